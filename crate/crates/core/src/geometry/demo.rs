//! Procedurally generated branched coral used by the demo pipeline and tests.
//!
//! The shape is an implicit union of a mounting foot, a trunk, a crown and
//! five two-segment branches, contoured with [`marching_cubes`]. The output is
//! watertight by construction and fully deterministic.

use nalgebra::{Point3, Vector3};

use super::surface::{marching_cubes, SampledField};
use super::TriangleMesh;

/// Sample spacing (mm) of the implicit field.
const SAMPLE_SPACING: f64 = 0.6;
/// Blend radius (mm) of the smooth union between parts.
const BLEND: f64 = 3.0;

struct Capsule {
    a: Point3<f64>,
    b: Point3<f64>,
    radius: f64,
}

impl Capsule {
    fn distance(&self, p: &Point3<f64>) -> f64 {
        let ab = self.b - self.a;
        let t = ((p - self.a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
        (p - (self.a + t * ab)).norm() - self.radius
    }
}

/// Crown attachment, elbow, tip and radius.
type Branch = ([f64; 3], [f64; 3], [f64; 3], f64);

const BRANCHES: [Branch; 5] = [
    ([0.0, 0.0, 28.0], [-19.0, 1.0, 46.0], [-24.0, 2.0, 68.0], 7.0),
    ([0.0, 0.0, 28.0], [16.0, 9.0, 45.0], [22.0, 13.0, 65.0], 7.0),
    ([0.0, 0.0, 28.0], [5.0, -19.0, 46.0], [7.0, -25.0, 66.0], 7.0),
    ([0.0, 0.0, 30.0], [-7.0, 15.0, 52.0], [-11.0, 19.0, 74.0], 6.5),
    ([0.0, 0.0, 30.0], [3.0, 1.0, 56.0], [1.0, -1.0, 79.0], 6.5),
];

const FOOT_RADIUS: f64 = 17.0;
const FOOT_HEIGHT: f64 = 7.0;
const FOOT_ROUNDING: f64 = 1.5;

fn smooth_min(a: f64, b: f64, k: f64) -> f64 {
    let h = (k - (a - b).abs()).max(0.0) / k;
    a.min(b) - h * h * k * 0.25
}

/// Signed distance (mm, negative inside) to the coral surface.
pub fn coral_sdf(p: &Point3<f64>) -> f64 {
    // Foot: rounded cylinder on z = 0.
    let q = Vector3::new(
        (p.x * p.x + p.y * p.y).sqrt() - (FOOT_RADIUS - FOOT_ROUNDING),
        (p.z - 0.5 * FOOT_HEIGHT).abs() - (0.5 * FOOT_HEIGHT - FOOT_ROUNDING),
        0.0,
    );
    let foot = q.x.max(q.y).min(0.0) + Vector3::new(q.x.max(0.0), q.y.max(0.0), 0.0).norm() - FOOT_ROUNDING;

    let trunk = Capsule {
        a: Point3::new(0.0, 0.0, 10.0),
        b: Point3::new(0.0, 0.0, 26.0),
        radius: 9.0,
    }
    .distance(p);
    let crown = (p - Point3::new(0.0, 0.0, 28.0)).norm() - 11.0;

    let mut d = smooth_min(smooth_min(foot, trunk, BLEND), crown, BLEND);
    for (root, elbow, tip, r) in BRANCHES {
        let lower = Capsule {
            a: Point3::from(root),
            b: Point3::from(elbow),
            radius: r,
        };
        let upper = Capsule {
            a: Point3::from(elbow),
            b: Point3::from(tip),
            radius: r - 0.5,
        };
        d = smooth_min(d, lower.distance(p).min(upper.distance(p)), BLEND);
    }
    d
}

/// Watertight triangle mesh of the demo coral, base on z = 0.
pub fn demo_coral() -> TriangleMesh {
    let lo = Point3::new(-32.0, -32.0, -1.5);
    let hi = Point3::new(32.0, 32.0, 85.0);
    let dims = [0, 1, 2].map(|a| ((hi[a] - lo[a]) / SAMPLE_SPACING).ceil() as usize + 1);
    let value = |i: usize, j: usize, k: usize| {
        let p = lo + SAMPLE_SPACING * Vector3::new(i as f64, j as f64, k as f64);
        -coral_sdf(&p)
    };
    let field = SampledField {
        dims,
        origin: lo,
        spacing: SAMPLE_SPACING,
        value: &value,
    };
    marching_cubes(&field, 0.0)
}

/// Points (mm) well inside the foot, suitable as inlet/outlet keypoints.
pub fn demo_base_points() -> [Point3<f64>; 2] {
    [Point3::new(-7.0, -3.0, 3.5), Point3::new(7.0, 3.0, 3.5)]
}

/// Points (mm) on the branch centre lines, 6 mm below each tip.
pub fn demo_branch_tips() -> Vec<Point3<f64>> {
    BRANCHES
        .iter()
        .map(|(_, elbow, tip, _)| {
            let e = Point3::from(*elbow);
            let t = Point3::from(*tip);
            t + (e - t).normalize() * 6.0
        })
        .collect()
}

/// Keypoints used by the end-to-end demo: inlet, two branch tips, outlet.
pub fn demo_keypoints() -> Vec<Point3<f64>> {
    let [a, b] = demo_base_points();
    let tips = demo_branch_tips();
    vec![a, tips[0], tips[1], b]
}
