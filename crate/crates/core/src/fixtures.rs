//! Canonical example meshes.

use crate::error::OracleError;
use crate::flex::{flex_space, FirstOrderFlex, DEFAULT_RANK_TOL};
use crate::mesh::{OrientationRule, Polyhedron};
use crate::Vec3;

#[derive(Clone, Debug, PartialEq)]
pub enum ExampleSpec {
    TetraRegular { edge: f64 },
    /// Regular tetrahedron of edge 8 with a fifth vertex inside one face.
    BipyramidQ,
    /// Line-symmetric (type I) octahedron: `a, b, c` and their images under
    /// the half-turn about the z-axis.
    Bricard1 { a: Vec3, b: Vec3, c: Vec3 },
    OctaRegular { edge: f64 },
}

impl ExampleSpec {
    pub const NAMES: [&'static str; 4] = ["tetra-regular", "bipyramid-q", "bricard1", "octa-regular"];

    /// Default parameters for a CLI name.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "tetra-regular" | "tetra" => Some(ExampleSpec::TetraRegular { edge: 1.0 }),
            "bipyramid-q" => Some(ExampleSpec::BipyramidQ),
            "bricard1" => Some(ExampleSpec::bricard_default()),
            "octa-regular" | "octa" => Some(ExampleSpec::OctaRegular { edge: 1.0 }),
            _ => None,
        }
    }

    pub fn bricard_default() -> Self {
        ExampleSpec::Bricard1 {
            a: Vec3::new(2.0, 0.0, 1.0),
            b: Vec3::new(0.0, 1.5, 2.0),
            c: Vec3::new(1.0, -1.0, 3.0),
        }
    }
}

pub fn gen_example(spec: &ExampleSpec) -> Result<Polyhedron, OracleError> {
    match spec {
        ExampleSpec::TetraRegular { edge } => {
            positive_param(*edge)?;
            let s = edge / (2.0 * 2f64.sqrt());
            let v = vec![
                Vec3::new(1.0, 1.0, 1.0) * s,
                Vec3::new(1.0, -1.0, -1.0) * s,
                Vec3::new(-1.0, 1.0, -1.0) * s,
                Vec3::new(-1.0, -1.0, 1.0) * s,
            ];
            Ok(Polyhedron::new(v, &[[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])?)
        }
        ExampleSpec::BipyramidQ => {
            let s3 = 3f64.sqrt();
            let v = vec![
                Vec3::new(4.0 * s3 / 3.0 - 3.0, 0.0, -8.0 * 6f64.sqrt() / 3.0),
                Vec3::new(4.0 * s3 - 3.0, 0.0, 0.0),
                Vec3::new(-3.0, 4.0, 0.0),
                Vec3::new(-3.0, -4.0, 0.0),
                Vec3::new(0.0, 0.0, 0.0),
            ];
            let faces = [[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 2, 4], [2, 3, 4], [3, 1, 4]];
            Ok(Polyhedron::new(v, &faces)?)
        }
        ExampleSpec::OctaRegular { edge } => {
            positive_param(*edge)?;
            let r = edge / 2f64.sqrt();
            let (a, b, c) = (Vec3::x() * r, Vec3::y() * r, Vec3::z() * r);
            Ok(Polyhedron::new(vec![a, b, c, -a, -b, -c], &octahedron_faces())?)
        }
        ExampleSpec::Bricard1 { a, b, c } => {
            let half_turn = |p: &Vec3| Vec3::new(-p.x, -p.y, p.z);
            let v = vec![*a, *b, *c, half_turn(a), half_turn(b), half_turn(c)];
            if v.iter().any(|p| !p.iter().all(|x| x.is_finite())) {
                return Err(OracleError::InvalidParams("non-finite vertex".into()));
            }
            // Self-intersecting with zero signed volume: keep the input winding.
            let p = Polyhedron::with_orientation(v, &octahedron_faces(), OrientationRule::Input)
                .map_err(|e| OracleError::InvalidParams(e.to_string()))?;
            if p.has_degenerate_face() {
                return Err(OracleError::InvalidParams("degenerate face".into()));
            }
            let report = flex_space(&p, DEFAULT_RANK_TOL)?;
            if report.kernel_dim < 7 {
                return Err(OracleError::InvalidParams(format!(
                    "rigidity kernel has dimension {} (< 7)",
                    report.kernel_dim
                )));
            }
            Ok(p)
        }
    }
}

/// Faces of an octahedron on vertices `[A, B, C, A', B', C']`, opposite
/// pairs unjoined; windings outward for the regular placement.
pub fn octahedron_faces() -> Vec<[usize; 3]> {
    let mut faces = Vec::with_capacity(8);
    for mask in 0..8usize {
        let pick = |bit: usize, base: usize| if mask & (1 << bit) != 0 { base + 3 } else { base };
        let (x, y, z) = (pick(0, 0), pick(1, 1), pick(2, 2));
        if mask.count_ones() % 2 == 0 {
            faces.push([x, y, z]);
        } else {
            faces.push([x, z, y]);
        }
    }
    faces
}

fn positive_param(x: f64) -> Result<(), OracleError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(OracleError::InvalidParams(format!("edge length must be positive, got {x}")))
    }
}

pub fn regular_tetrahedron(edge: f64) -> Polyhedron {
    gen_example(&ExampleSpec::TetraRegular { edge }).expect("valid tetrahedron")
}

pub fn regular_octahedron(edge: f64) -> Polyhedron {
    gen_example(&ExampleSpec::OctaRegular { edge }).expect("valid octahedron")
}

pub fn bipyramid_q() -> Polyhedron {
    gen_example(&ExampleSpec::BipyramidQ).expect("valid bipyramid")
}

pub fn bricard_octahedron() -> Polyhedron {
    gen_example(&ExampleSpec::bricard_default()).expect("valid Bricard octahedron")
}

/// The bipyramid's flex: the inner vertex moves along the face normal.
pub fn v5_flex() -> FirstOrderFlex {
    let mut f = FirstOrderFlex::zeros(5);
    f.velocities[4] = Vec3::new(0.0, 0.0, 1.0);
    f
}
