use crate::geometry::TriangleMesh;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Area-weighted uniform surface samples with face normals, deterministic
/// in the seed. Returns an empty vector for an empty mesh.
pub fn sample_mesh_points(
    mesh: &TriangleMesh,
    count: usize,
    seed: u64,
) -> Vec<(Vector3<f64>, Vector3<f64>)> {
    if mesh.is_empty() || count == 0 {
        return Vec::new();
    }
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let r = rng.gen_range(0.0..total);
        let face = cumulative.partition_point(|&c| c < r).min(mesh.faces.len() - 1);
        let [ia, ib, ic] = mesh.faces[face];
        let (a, b, c) = (mesh.vertices[ia], mesh.vertices[ib], mesh.vertices[ic]);
        // Uniform barycentric draw.
        let mut u: f64 = rng.gen_range(0.0..1.0);
        let mut v: f64 = rng.gen_range(0.0..1.0);
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let p = a + (b - a) * u + (c - a) * v;
        out.push((p, mesh.face_normal(face)));
    }
    out
}
