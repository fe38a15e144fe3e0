use super::GeometryError;
use nalgebra::Vector3;

/// Indexed triangle mesh. Degenerate (zero-area) faces are dropped at
/// construction; face indices are validated.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[usize; 3]>,
    pub vertex_normals: Option<Vec<Vector3<f64>>>,
}

const DEGENERATE_AREA: f64 = 1e-14;

impl TriangleMesh {
    pub fn new(
        vertices: Vec<Vector3<f64>>,
        faces: Vec<[usize; 3]>,
    ) -> Result<Self, GeometryError> {
        let n = vertices.len();
        let mut kept = Vec::with_capacity(faces.len());
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&i| i >= n) {
                return Err(GeometryError::InvalidMesh(format!(
                    "face {fi} references vertex out of range (mesh has {n} vertices)"
                )));
            }
            let a = vertices[f[0]];
            let area2 = (vertices[f[1]] - a).cross(&(vertices[f[2]] - a)).norm();
            if area2 > DEGENERATE_AREA {
                kept.push(*f);
            }
        }
        Ok(Self {
            vertices,
            faces: kept,
            vertex_normals: None,
        })
    }

    pub fn with_vertex_normals(
        mut self,
        normals: Vec<Vector3<f64>>,
    ) -> Result<Self, GeometryError> {
        if normals.len() != self.vertices.len() {
            return Err(GeometryError::InvalidMesh(format!(
                "{} normals for {} vertices",
                normals.len(),
                self.vertices.len()
            )));
        }
        self.vertex_normals = Some(normals);
        Ok(self)
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// Geometric (unnormalized orientation) face normal.
    pub fn face_normal(&self, face: usize) -> Vector3<f64> {
        let [a, b, c] = self.faces[face];
        let e1 = self.vertices[b] - self.vertices[a];
        let e2 = self.vertices[c] - self.vertices[a];
        e1.cross(&e2).normalize()
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.faces[face];
        let e1 = self.vertices[b] - self.vertices[a];
        let e2 = self.vertices[c] - self.vertices[a];
        0.5 * e1.cross(&e2).norm()
    }

    pub fn bounding_box(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        if self.vertices.is_empty() {
            return None;
        }
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        Some((lo, hi))
    }

    /// Appends another mesh, re-indexing its faces.
    pub fn merge(&mut self, other: &TriangleMesh) {
        let offset = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.faces.extend(
            other
                .faces
                .iter()
                .map(|f| [f[0] + offset, f[1] + offset, f[2] + offset]),
        );
        // Merged meshes drop vertex normals unless both sides carry them.
        match (&mut self.vertex_normals, &other.vertex_normals) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            (sn, _) => *sn = None,
        }
    }
}
