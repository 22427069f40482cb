//! JSON mesh format.
//!
//! ```json
//! {
//!   "nodes": [[x, y, z], ...],
//!   "elements": [
//!     {"kind": "lagrange_linear", "nodes": [0, 1, 2, 3]},
//!     {"kind": "bezier", "degree": 2, "nodes": [...],
//!      "extraction": [...], "weights": [...]}
//!   ],
//!   "node_sets": {"clamped": [0, 1]},
//!   "closed": false,
//!   "prestretch": 1.0
//! }
//! ```
//!
//! Local node order is tensor-product with `ξ¹` fastest. A Bézier element's
//! `extraction` is its `n_ne × (p+1)²` operator stored row-major; row `i`
//! belongs to `nodes[i]`.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Element, Mesh};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::master_element::{BezierBasis, ElementBasis};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ElementRecord {
    LagrangeLinear {
        nodes: Vec<usize>,
    },
    LagrangeQuadratic {
        nodes: Vec<usize>,
    },
    Bezier {
        degree: usize,
        nodes: Vec<usize>,
        extraction: Vec<f64>,
        weights: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshFile {
    nodes: Vec<[f64; 3]>,
    elements: Vec<ElementRecord>,
    #[serde(default)]
    node_sets: BTreeMap<String, Vec<usize>>,
    closed: bool,
    #[serde(default = "one")]
    prestretch: f64,
}

fn one() -> f64 {
    1.0
}

impl MeshFile {
    pub fn from_mesh(mesh: &Mesh) -> Self {
        let elements = mesh
            .elements
            .iter()
            .map(|el| {
                let nodes = el.nodes.clone();
                match &el.basis {
                    ElementBasis::LagrangeLinear => ElementRecord::LagrangeLinear { nodes },
                    ElementBasis::LagrangeQuadratic => ElementRecord::LagrangeQuadratic { nodes },
                    ElementBasis::BezierExtracted(b) => {
                        let c = b.extraction();
                        ElementRecord::Bezier {
                            degree: b.degree(),
                            nodes,
                            extraction: (0..c.nrows())
                                .flat_map(|r| (0..c.ncols()).map(move |q| c[(r, q)]))
                                .collect(),
                            weights: b.weights().to_vec(),
                        }
                    }
                }
            })
            .collect();
        Self {
            nodes: mesh.ref_coords.iter().map(|x| [x[0], x[1], x[2]]).collect(),
            elements,
            node_sets: mesh.node_sets.clone(),
            closed: mesh.closed,
            prestretch: mesh.prestretch,
        }
    }

    pub fn into_mesh(self) -> Result<Mesh> {
        let elements = self
            .elements
            .into_iter()
            .enumerate()
            .map(|(e, rec)| match rec {
                ElementRecord::LagrangeLinear { nodes } => Ok(Element {
                    basis: ElementBasis::LagrangeLinear,
                    nodes,
                }),
                ElementRecord::LagrangeQuadratic { nodes } => Ok(Element {
                    basis: ElementBasis::LagrangeQuadratic,
                    nodes,
                }),
                ElementRecord::Bezier {
                    degree,
                    nodes,
                    extraction,
                    weights,
                } => {
                    let cols = (degree + 1) * (degree + 1);
                    if extraction.len() != nodes.len() * cols {
                        return Err(Error::InvalidMesh(format!(
                            "element {e}: extraction has {} entries, expected {}×{cols}",
                            extraction.len(),
                            nodes.len()
                        )));
                    }
                    let c = DMatrix::from_row_slice(nodes.len(), cols, &extraction);
                    Ok(Element {
                        basis: ElementBasis::BezierExtracted(BezierBasis::new(degree, c, weights)?),
                        nodes,
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Mesh::new(
            self.nodes.into_iter().map(Vec3::from).collect(),
            elements,
            self.node_sets,
            self.closed,
            self.prestretch,
        )
    }

    pub fn read(path: &Path) -> Result<Mesh> {
        let text = std::fs::read_to_string(path)?;
        let file: MeshFile = serde_json::from_str(&text)?;
        file.into_mesh()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_sphere_octant, ElementKind};

    #[test]
    fn round_trip_nurbs_octant() {
        let m = make_sphere_octant(2, 1, ElementKind::Nurbs, 1.0).unwrap();
        let json = MeshFile::from_mesh(&m).to_json().unwrap();
        let back: MeshFile = serde_json::from_str(&json).unwrap();
        let m2 = back.into_mesh().unwrap();
        assert_eq!(m.elements, m2.elements);
        assert_eq!(m.ref_coords, m2.ref_coords);
        assert_eq!(m.node_sets, m2.node_sets);
    }

    #[test]
    fn rejects_bad_extraction_size() {
        let json = r#"{"nodes": [[0,0,0]], "closed": false,
            "elements": [{"kind": "bezier", "degree": 1, "nodes": [0], "extraction": [1, 0], "weights": [1]}]}"#;
        let f: MeshFile = serde_json::from_str(json).unwrap();
        assert!(matches!(f.into_mesh(), Err(Error::InvalidMesh(_))));
    }
}
