#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use channelforge::geometry::write_binary_stl;
use channelforge::TriangleMesh;
use nalgebra::Point3;

/// Axis-aligned box as binary STL, outward winding.
pub fn block_stl(max: [f64; 3]) -> Vec<u8> {
    let v = |i: usize| {
        Point3::new(
            if i & 1 == 0 { 0.0 } else { max[0] },
            if i & 2 == 0 { 0.0 } else { max[1] },
            if i & 4 == 0 { 0.0 } else { max[2] },
        )
    };
    let quads = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    let triangles = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    write_binary_stl(&TriangleMesh::new((0..8).map(v).collect(), triangles).unwrap())
}

pub const BLOCK: [f64; 3] = [40.0, 40.0, 30.0];

/// Inlet and outlet in the bottom layer band, one waypoint high in the block.
pub fn block_keypoints() -> serde_json::Value {
    serde_json::json!({
        "keypoints": [[8.0, 8.0, 2.5], [20.0, 20.0, 20.0], [32.0, 32.0, 2.5]],
        "options": { "channel_radius_mm": 1.0 }
    })
}

pub fn channelforge(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_channelforge"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("CHANNELFORGE_DATA_DIR")
        .output()
        .expect("binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}
