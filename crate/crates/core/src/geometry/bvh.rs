use super::{intersect::ray_triangle, Ray, TriangleMesh};
use nalgebra::Vector3;

/// Median-split bounding volume hierarchy over mesh triangles.
///
/// Traversal returns the same nearest hit (with lowest-face-index tie
/// break) as a brute-force scan; the tree is purely an acceleration detail.
#[derive(Clone, Debug)]
pub struct Bvh {
    mesh: TriangleMesh,
    nodes: Vec<Node>,
    /// Triangle indices into `mesh.faces`, grouped by leaf.
    order: Vec<usize>,
}

#[derive(Clone, Debug)]
struct Node {
    lo: Vector3<f64>,
    hi: Vector3<f64>,
    /// Leaf: (start, count) into `order`; inner: children at
    /// (left, right) node indices encoded with count == 0.
    a: usize,
    b: usize,
    is_leaf: bool,
}

const LEAF_SIZE: usize = 8;

impl Bvh {
    pub fn build(mesh: TriangleMesh) -> Self {
        let n = mesh.faces.len();
        let mut order: Vec<usize> = (0..n).collect();
        let centroids: Vec<Vector3<f64>> = mesh
            .faces
            .iter()
            .map(|f| (mesh.vertices[f[0]] + mesh.vertices[f[1]] + mesh.vertices[f[2]]) / 3.0)
            .collect();
        let mut nodes = Vec::new();
        if n > 0 {
            build_node(&mesh, &centroids, &mut order, 0, n, &mut nodes);
        }
        Self { mesh, nodes, order }
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn is_empty(&self) -> bool {
        self.mesh.is_empty()
    }

    /// Nearest hit as `(distance, face_index)`.
    pub fn intersect(&self, ray: &Ray) -> Option<(f64, usize)> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv_dir = Vector3::new(
            1.0 / ray.direction.x,
            1.0 / ray.direction.y,
            1.0 / ray.direction.z,
        );
        let mut best: Option<(f64, usize)> = None;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            let t_box = slab_test(&node.lo, &node.hi, ray, &inv_dir);
            let cutoff = best.map_or(f64::INFINITY, |(t, _)| t);
            match t_box {
                Some(t_enter) if t_enter <= cutoff => {}
                _ => continue,
            }
            if node.is_leaf {
                for &fi in &self.order[node.a..node.a + node.b] {
                    let f = &self.mesh.faces[fi];
                    if let Some(t) = ray_triangle(
                        ray,
                        &self.mesh.vertices[f[0]],
                        &self.mesh.vertices[f[1]],
                        &self.mesh.vertices[f[2]],
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
            } else {
                stack.push(node.a);
                stack.push(node.b);
            }
        }
        best
    }
}

fn slab_test(
    lo: &Vector3<f64>,
    hi: &Vector3<f64>,
    ray: &Ray,
    inv_dir: &Vector3<f64>,
) -> Option<f64> {
    let mut t_min = 0.0f64;
    let mut t_max = f64::INFINITY;
    for axis in 0..3 {
        let t1 = (lo[axis] - ray.origin[axis]) * inv_dir[axis];
        let t2 = (hi[axis] - ray.origin[axis]) * inv_dir[axis];
        let (near, far) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        t_min = t_min.max(near);
        t_max = t_max.min(far);
        if t_min > t_max {
            return None;
        }
    }
    Some(t_min)
}

fn build_node(
    mesh: &TriangleMesh,
    centroids: &[Vector3<f64>],
    order: &mut [usize],
    start: usize,
    count: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for &fi in &order[start..start + count] {
        for &vi in &mesh.faces[fi] {
            lo = lo.inf(&mesh.vertices[vi]);
            hi = hi.sup(&mesh.vertices[vi]);
        }
    }
    let node_index = nodes.len();
    nodes.push(Node {
        lo,
        hi,
        a: start,
        b: count,
        is_leaf: true,
    });
    if count <= LEAF_SIZE {
        return node_index;
    }
    // Split on the widest centroid axis at the median.
    let mut c_lo = Vector3::repeat(f64::INFINITY);
    let mut c_hi = Vector3::repeat(f64::NEG_INFINITY);
    for &fi in &order[start..start + count] {
        c_lo = c_lo.inf(&centroids[fi]);
        c_hi = c_hi.sup(&centroids[fi]);
    }
    let extent = c_hi - c_lo;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    if extent[axis] < 1e-12 {
        return node_index; // all centroids coincide; keep as leaf
    }
    let mid = count / 2;
    order[start..start + count].select_nth_unstable_by(mid, |&a, &b| {
        centroids[a][axis]
            .partial_cmp(&centroids[b][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    let left = build_node(mesh, centroids, order, start, mid, nodes);
    let right = build_node(mesh, centroids, order, start + mid, count - mid, nodes);
    nodes[node_index].a = left;
    nodes[node_index].b = right;
    nodes[node_index].is_leaf = false;
    node_index
}
