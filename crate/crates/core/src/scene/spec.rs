use super::SceneError;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Declarative description of a synthetic scene. The seed fully determines
/// every random choice (object placement), so equal specs build identical
/// scenes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    /// Full interior extents of the room box, centered at the origin.
    pub room_extent: [f64; 3],
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    /// Direction the directional light travels (need not be unit length).
    #[serde(default = "default_light")]
    pub light_direction: [f64; 3],
}

fn default_light() -> [f64; 3] {
    [-0.4, 0.3, -0.85]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: ShapeSpec,
    pub albedo: Albedo,
    /// Explicit center; when absent the builder samples a non-overlapping
    /// position from the scene seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpec {
    Box { size: [f64; 3] },
    Sphere { radius: f64 },
    /// Horizontal slab of the given x/y size and small thickness, useful as
    /// a table top or floor panel.
    Plane { size: [f64; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Albedo {
    Flat { color: [f64; 3] },
    Checker { color_a: [f64; 3], color_b: [f64; 3], cell: f64 },
    /// Linear blend between two colors along a world axis (0=x, 1=y, 2=z),
    /// scaled to the room extent.
    Gradient { color_a: [f64; 3], color_b: [f64; 3], axis: usize },
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.room_extent.iter().any(|&e| e <= 0.0) {
            return Err(SceneError::InvalidSpec(format!(
                "room extents must be positive, got {:?}",
                self.room_extent
            )));
        }
        for (i, obj) in self.objects.iter().enumerate() {
            let ok = match obj.shape {
                ShapeSpec::Box { size } => size.iter().all(|&s| s > 0.0),
                ShapeSpec::Sphere { radius } => radius > 0.0,
                ShapeSpec::Plane { size } => size.iter().all(|&s| s > 0.0),
            };
            if !ok {
                return Err(SceneError::InvalidSpec(format!(
                    "object {i} has non-positive dimensions"
                )));
            }
            if let Albedo::Gradient { axis, .. } = obj.albedo {
                if axis > 2 {
                    return Err(SceneError::InvalidSpec(format!(
                        "object {i} gradient axis must be 0..=2, got {axis}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json_file(&self, path: &Path) -> Result<(), SceneError> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path)?;
        let spec: SceneSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// A furnished room used across tests and demos: one box, one sphere,
    /// one low table slab, varied albedos.
    pub fn example_room(seed: u64) -> Self {
        SceneSpec {
            seed,
            room_extent: [4.0, 3.2, 2.6],
            objects: vec![
                ObjectSpec {
                    shape: ShapeSpec::Box {
                        size: [0.7, 0.5, 0.9],
                    },
                    albedo: Albedo::Checker {
                        color_a: [0.85, 0.3, 0.25],
                        color_b: [0.9, 0.8, 0.75],
                        cell: 0.2,
                    },
                    position: None,
                },
                ObjectSpec {
                    shape: ShapeSpec::Sphere { radius: 0.35 },
                    albedo: Albedo::Flat {
                        color: [0.25, 0.45, 0.8],
                    },
                    position: None,
                },
                ObjectSpec {
                    shape: ShapeSpec::Plane { size: [1.1, 0.8] },
                    albedo: Albedo::Gradient {
                        color_a: [0.2, 0.7, 0.3],
                        color_b: [0.75, 0.75, 0.2],
                        axis: 0,
                    },
                    position: None,
                },
            ],
            light_direction: default_light(),
        }
    }
}
