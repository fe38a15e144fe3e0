use super::tables::{CORNER_OFFSETS, EDGE_CORNERS, EDGE_TABLE, TRIANGLE_TABLE};
use super::TsdfGrid;
use crate::geometry::TriangleMesh;
use nalgebra::Vector3;
use std::collections::HashMap;

/// Extracts the zero isosurface of the grid with marching cubes.
///
/// Only cells whose eight corners all carry positive fusion weight are
/// marched, so the surface is watertight where observed and absent
/// elsewhere. Vertices sit on voxel edges by linear interpolation and are
/// shared between neighboring cells. A grid without a zero crossing yields
/// an empty mesh. Traversal order is fixed, so output is deterministic.
pub fn extract_mesh(grid: &TsdfGrid) -> TriangleMesh {
    let [nx, ny, nz] = grid.dims;
    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    // Key: (voxel x, y, z, axis) of the edge's lower corner.
    let mut edge_cache: HashMap<(usize, usize, usize, u8), usize> = HashMap::new();

    let mut corner_vals = [0.0f64; 8];
    for z in 0..nz.saturating_sub(1) {
        for y in 0..ny.saturating_sub(1) {
            for x in 0..nx.saturating_sub(1) {
                let mut observed = true;
                let mut case = 0usize;
                for (ci, off) in CORNER_OFFSETS.iter().enumerate() {
                    let idx = grid.index(x + off[0], y + off[1], z + off[2]);
                    if grid.weight[idx] <= 0.0 {
                        observed = false;
                        break;
                    }
                    corner_vals[ci] = grid.sdf[idx];
                    if corner_vals[ci] < 0.0 {
                        case |= 1 << ci;
                    }
                }
                if !observed || case == 0 || case == 255 {
                    continue;
                }
                let edges = EDGE_TABLE[case];
                let mut edge_vertex = [usize::MAX; 12];
                for (ei, corners) in EDGE_CORNERS.iter().enumerate() {
                    if edges & (1 << ei) == 0 {
                        continue;
                    }
                    let [a, b] = *corners;
                    let oa = CORNER_OFFSETS[a];
                    let ob = CORNER_OFFSETS[b];
                    // Canonical edge key: lower corner plus axis.
                    let (lo, axis) = edge_key(x, y, z, oa, ob);
                    let vid = *edge_cache.entry((lo.0, lo.1, lo.2, axis)).or_insert_with(|| {
                        let va = corner_vals[a];
                        let vb = corner_vals[b];
                        let t = va / (va - vb); // linear zero crossing
                        let pa = grid.voxel_center(x + oa[0], y + oa[1], z + oa[2]);
                        let pb = grid.voxel_center(x + ob[0], y + ob[1], z + ob[2]);
                        vertices.push(pa + (pb - pa) * t);
                        vertices.len() - 1
                    });
                    edge_vertex[ei] = vid;
                }
                let tri = &TRIANGLE_TABLE[case];
                let mut k = 0;
                while k < 16 && tri[k] >= 0 {
                    let f = [
                        edge_vertex[tri[k] as usize],
                        edge_vertex[tri[k + 1] as usize],
                        edge_vertex[tri[k + 2] as usize],
                    ];
                    if f[0] != f[1] && f[1] != f[2] && f[0] != f[2] {
                        faces.push(f);
                    }
                    k += 3;
                }
            }
        }
    }
    TriangleMesh::new(vertices, faces).expect("marching cubes produces valid indices")
}

fn edge_key(
    x: usize,
    y: usize,
    z: usize,
    oa: [usize; 3],
    ob: [usize; 3],
) -> ((usize, usize, usize), u8) {
    let a = (x + oa[0], y + oa[1], z + oa[2]);
    let b = (x + ob[0], y + ob[1], z + ob[2]);
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let axis = if hi.0 > lo.0 {
        0
    } else if hi.1 > lo.1 {
        1
    } else {
        2
    };
    (lo, axis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::GridParams;

    fn sphere_grid(radius: f64, resolution: usize) -> TsdfGrid {
        let half = radius * 1.5;
        let mut grid = TsdfGrid::for_bounds(
            Vector3::new(-half, -half, -half),
            Vector3::new(half, half, half),
            &GridParams {
                resolution,
                truncation_voxels: 5.0,
            },
        )
        .unwrap();
        for z in 0..grid.dims[2] {
            for y in 0..grid.dims[1] {
                for x in 0..grid.dims[0] {
                    let idx = grid.index(x, y, z);
                    grid.sdf[idx] = grid.voxel_center(x, y, z).norm() - radius;
                    grid.weight[idx] = 1.0;
                }
            }
        }
        grid
    }

    #[test]
    fn analytic_sphere_vertices_sit_on_radius() {
        let radius = 0.8;
        let grid = sphere_grid(radius, 48);
        let mesh = extract_mesh(&grid);
        assert!(!mesh.is_empty());
        for v in &mesh.vertices {
            assert!(
                (v.norm() - radius).abs() <= grid.voxel_size / 2.0,
                "vertex at radius {}",
                v.norm()
            );
        }
    }

    #[test]
    fn interpolated_sdf_at_vertices_is_zero() {
        // Every vertex lies on a voxel edge at the linear zero crossing of
        // the corner samples.
        let grid = sphere_grid(0.6, 32);
        let mesh = extract_mesh(&grid);
        for v in &mesh.vertices {
            // Locate the edge: the vertex has exactly two non-half-integer
            // grid coordinates equal and one interpolated axis.
            let g = (v - grid.origin) / grid.voxel_size;
            let frac = [
                (g.x - 0.5).fract().abs(),
                (g.y - 0.5).fract().abs(),
                (g.z - 0.5).fract().abs(),
            ];
            let axis = (0..3)
                .max_by(|&a, &b| {
                    let da = (frac[a] - 0.0).abs().min((frac[a] - 1.0).abs());
                    let db = (frac[b] - 0.0).abs().min((frac[b] - 1.0).abs());
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            let mut base = [
                (g.x - 0.5).floor() as usize,
                (g.y - 0.5).floor() as usize,
                (g.z - 0.5).floor() as usize,
            ];
            // For on-grid axes rounding may land one off; snap them.
            for a in 0..3 {
                if a != axis {
                    base[a] = (g[a] - 0.5).round() as usize;
                }
            }
            let mut upper = base;
            upper[axis] += 1;
            let va = grid.sdf[grid.index(base[0], base[1], base[2])];
            let vb = grid.sdf[grid.index(upper[0], upper[1], upper[2])];
            let t = (g[axis] - 0.5) - base[axis] as f64;
            let interp = va * (1.0 - t) + vb * t;
            assert!(interp.abs() < 1e-6, "interpolated sdf {interp}");
        }
    }

    #[test]
    fn constant_positive_grid_gives_empty_mesh() {
        let mut grid = TsdfGrid::for_bounds(
            Vector3::zeros(),
            Vector3::new(1.0, 1.0, 1.0),
            &GridParams {
                resolution: 8,
                truncation_voxels: 2.0,
            },
        )
        .unwrap();
        for i in 0..grid.sdf.len() {
            grid.sdf[i] = 1.0;
            grid.weight[i] = 1.0;
        }
        assert!(extract_mesh(&grid).is_empty());
    }

    #[test]
    fn vertex_count_is_stable_across_runs() {
        let grid = sphere_grid(0.7, 24);
        let a = extract_mesh(&grid);
        let b = extract_mesh(&grid);
        assert_eq!(a.vertices.len(), b.vertices.len());
        assert_eq!(a.faces, b.faces);
    }

    #[test]
    fn unobserved_cells_are_skipped() {
        let mut grid = sphere_grid(0.6, 24);
        // Zero out weights in the x < center half.
        for z in 0..grid.dims[2] {
            for y in 0..grid.dims[1] {
                for x in 0..grid.dims[0] / 2 {
                    let idx = grid.index(x, y, z);
                    grid.weight[idx] = 0.0;
                }
            }
        }
        let mesh = extract_mesh(&grid);
        assert!(!mesh.is_empty());
        let center_x = grid.origin.x + grid.dims[0] as f64 / 2.0 * grid.voxel_size;
        for v in &mesh.vertices {
            assert!(v.x >= center_x - 2.0 * grid.voxel_size);
        }
    }
}
