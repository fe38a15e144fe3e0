use super::{Bvh, Ray, TriangleMesh};
use nalgebra::Vector3;

/// Result of a ray/mesh query. `normal` is the face normal flipped to face
/// the ray origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub distance: f64,
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub face_index: usize,
}

const MIN_HIT_DISTANCE: f64 = 1e-9;

/// Moller-Trumbore ray/triangle intersection. Returns the ray parameter for
/// hits strictly in front of the origin.
pub(crate) fn ray_triangle(
    ray: &Ray,
    v0: &Vector3<f64>,
    v1: &Vector3<f64>,
    v2: &Vector3<f64>,
) -> Option<f64> {
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let pvec = ray.direction.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-14 {
        return None; // parallel to the triangle plane
    }
    let inv_det = 1.0 / det;
    let tvec = ray.origin - v0;
    let u = tvec.dot(&pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = ray.direction.dot(&qvec) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&qvec) * inv_det;
    (t > MIN_HIT_DISTANCE).then_some(t)
}

fn make_hit(ray: &Ray, mesh: &TriangleMesh, face: usize, t: f64) -> Hit {
    let mut normal = mesh.face_normal(face);
    if normal.dot(&ray.direction) > 0.0 {
        normal = -normal;
    }
    Hit {
        distance: t,
        point: ray.at(t),
        normal,
        face_index: face,
    }
}

/// Nearest positive-distance hit, scanning every triangle. Ties on equal
/// distance break toward the lowest face index.
pub fn intersect_ray_mesh_brute(ray: &Ray, mesh: &TriangleMesh) -> Option<Hit> {
    let mut best: Option<(f64, usize)> = None;
    for (fi, f) in mesh.faces.iter().enumerate() {
        if let Some(t) = ray_triangle(
            ray,
            &mesh.vertices[f[0]],
            &mesh.vertices[f[1]],
            &mesh.vertices[f[2]],
        ) {
            let better = match best {
                None => true,
                Some((bt, bf)) => t < bt || (t == bt && fi < bf),
            };
            if better {
                best = Some((t, fi));
            }
        }
    }
    best.map(|(t, fi)| make_hit(ray, mesh, fi, t))
}

/// Nearest positive-distance hit through the BVH. Equivalent to
/// [`intersect_ray_mesh_brute`] including the tie-break.
pub fn intersect_ray_mesh(ray: &Ray, bvh: &Bvh) -> Option<Hit> {
    bvh.intersect(ray)
        .map(|(t, fi)| make_hit(ray, bvh.mesh(), fi, t))
}
