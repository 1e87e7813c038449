use super::{CarveError, CarvedModel};
use crate::geometry::{exterior_region, label_components, Connectivity, VoxelGrid, VoxelIndex, FACE_OFFSETS};
use crate::router::{base_region_top, DEFAULT_BASE_FRACTION};

/// Drills a vertical shaft of the channel radius from each path endpoint
/// straight down (-z) until the cell below the shaft axis is exterior, so the
/// channel opens at the underside of the base. The opening must lie within the
/// base region.
pub fn open_ports(model: &CarvedModel) -> Result<CarvedModel, CarveError> {
    open_ports_with(model, DEFAULT_BASE_FRACTION)
}

pub fn open_ports_with(model: &CarvedModel, base_fraction: f64) -> Result<CarvedModel, CarveError> {
    if model.ports_opened {
        return Err(CarveError::PortsAlreadyOpen);
    }
    let original = model.original_grid();
    let base_top = base_region_top(&original, base_fraction).ok_or(CarveError::EmptyPath)?;
    let exterior = exterior_region(&original);
    let h = original.voxel_size();
    let r_cells = model.effective_radius_mm / h;
    let reach = r_cells.floor() as i64;
    let disk: Vec<[i32; 3]> = (-reach..=reach)
        .flat_map(|dy| (-reach..=reach).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| ((dx * dx + dy * dy) as f64) <= r_cells * r_cells)
        .map(|(dx, dy)| [dx as i32, dy as i32, 0])
        .collect();

    let mut grid = model.grid.clone();
    let mut port = Vec::new();
    let ends = [(0, model.inlet), (model.path.voxels.len() - 1, model.outlet)];
    for (position, end) in ends {
        let [i, j, k] = original.coords(end);
        // Lowest layer of the shaft: the cell under it is outside the solid.
        let mut bottom = k;
        loop {
            let below = (bottom > 0).then(|| original.index(i, j, bottom - 1));
            match below {
                None => break,
                Some(b) if exterior[b] => break,
                Some(b) if original.is_solid(b) => bottom -= 1,
                Some(_) => {
                    return Err(CarveError::Port {
                        position,
                        layer: bottom - 1,
                    })
                }
            }
        }
        if original.center_of(i, j, bottom).z > base_top {
            return Err(CarveError::Port {
                position,
                layer: bottom,
            });
        }
        for layer in bottom..k {
            for d in &disk {
                match original.offset([i, j, layer], *d) {
                    Some(n) if original.is_solid(n) => {
                        if grid.is_solid(n) {
                            grid.set(n, false);
                            port.push(n);
                        }
                    }
                    // The disk pokes out of the solid above the bottom layer.
                    _ if layer > bottom => return Err(CarveError::Port { position, layer }),
                    _ => {}
                }
            }
        }
    }
    port.sort_unstable();
    port.dedup();
    Ok(CarvedModel {
        grid,
        port_voxels: port,
        ports_opened: true,
        ..model.clone()
    })
}

/// Number of separate places (26-connected patches) where carved cells touch
/// the original exterior through a face.
pub fn count_openings(model: &CarvedModel) -> usize {
    let original = model.original_grid();
    count_exposed_patches(&original, &model.void_mask())
}

fn count_exposed_patches(original: &VoxelGrid, void: &[bool]) -> usize {
    let exterior = exterior_region(original);
    let exposed: Vec<bool> = (0..original.len())
        .map(|v: VoxelIndex| {
            void[v] && {
                let c = original.coords(v);
                FACE_OFFSETS
                    .iter()
                    .any(|&d| original.offset(c, d).is_none_or(|n| exterior[n]))
            }
        })
        .collect();
    label_components(original, &exposed, Connectivity::TwentySix).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carver::{carve, CarveOptions};
    use crate::geometry::flood_fill;
    use crate::router::ChannelPath;
    use nalgebra::Point3;

    /// 16x8x12 block (cells 2..18, 2..10, 2..14) with a U path whose legs stop
    /// `lift` layers above the bottom solid layer.
    fn u_model(lift: usize, r: f64) -> (VoxelGrid, ChannelPath) {
        let g = VoxelGrid::from_fn([20, 12, 16], 1.0, Point3::origin(), |i, j, k| {
            (2..18).contains(&i) && (2..10).contains(&j) && (2..14).contains(&k)
        })
        .unwrap();
        let z0 = 2 + lift;
        let v: Vec<_> = (z0..10)
            .map(|k| g.index(5, 6, k))
            .chain((6..14).map(|i| g.index(i, 6, 9)))
            .chain((z0..9).rev().map(|k| g.index(14, 6, k)))
            .collect();
        let n = v.len();
        (
            g.clone(),
            ChannelPath::from_voxels(&g, v, vec![0, n - 1], r, Connectivity::TwentySix),
        )
    }

    #[test]
    fn shafts_reach_the_base() {
        let (g, path) = u_model(3, 0.2);
        let m = open_ports(&carve(&g, &path, &CarveOptions::default()).unwrap()).unwrap();
        assert_eq!(m.port_voxels.len(), 6);
        assert_eq!(count_openings(&m), 2);
        assert_eq!(
            g.solid_count() - m.grid.solid_count(),
            m.channel_voxels.len() + m.port_voxels.len()
        );
        let reach = flood_fill(&m.grid, &m.void_mask(), m.inlet, Connectivity::TwentySix);
        assert!(reach[m.outlet]);
    }

    #[test]
    fn wide_shafts_also_open_twice() {
        let (g, path) = u_model(4, 1.2);
        let m = open_ports(&carve(&g, &path, &CarveOptions::default()).unwrap()).unwrap();
        assert_eq!(count_openings(&m), 2);
    }

    #[test]
    fn endpoint_on_base_needs_no_shaft() {
        let (g, path) = u_model(0, 0.2);
        let m = open_ports(&carve(&g, &path, &CarveOptions::default()).unwrap()).unwrap();
        assert!(m.port_voxels.is_empty());
        assert_eq!(count_openings(&m), 2);
    }

    #[test]
    fn no_openings_before_ports() {
        let (g, path) = u_model(3, 0.2);
        assert_eq!(count_openings(&carve(&g, &path, &CarveOptions::default()).unwrap()), 0);
    }

    #[test]
    fn cavity_under_endpoint_is_a_port_error() {
        let (mut g, path) = u_model(4, 0.2);
        g.set(g.index(5, 6, 4), false);
        let err = open_ports(&carve(&g, &path, &CarveOptions::default()).unwrap()).unwrap_err();
        assert_eq!(err, CarveError::Port { position: 0, layer: 4 });
    }

    #[test]
    fn opening_above_base_region_is_a_port_error() {
        // A notch open to the underside ends three layers above the base.
        let (mut g, path) = u_model(4, 0.2);
        for k in 2..5 {
            g.set(g.index(5, 6, k), false);
        }
        let err = open_ports(&carve(&g, &path, &CarveOptions::default()).unwrap()).unwrap_err();
        assert_eq!(err, CarveError::Port { position: 0, layer: 5 });
    }

    #[test]
    fn reopening_is_rejected() {
        let (g, path) = u_model(3, 0.2);
        let m = open_ports(&carve(&g, &path, &CarveOptions::default()).unwrap()).unwrap();
        assert_eq!(open_ports(&m).unwrap_err(), CarveError::PortsAlreadyOpen);
    }
}
