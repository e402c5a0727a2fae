//! Per-edge dihedral quantities and the coefficient vectors that express the
//! rate of change of a dihedral angle as a linear form in vertex velocities.
//!
//! Everything here works on an [`EdgeQuad`], the four points
//! `(x, y, z', z'')` around an edge, with `w = y - x`, `w' = z' - x` and
//! `w'' = z'' - x`. For a first-order flex with slot velocities
//! `(xi, eta, zeta', zeta'')` the angle rate is
//!
//! ```text
//! Phi = g . (eta - xi) + g' . (zeta' - xi) + g'' . (zeta'' - xi)
//! ```
//!
//! where `(g, g', g'')` is either the r-triple (valid when `sin phi != 0`) or
//! the s-triple (valid when `cos phi != 0`).

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::error::GeometryError;
use crate::flex::{first_order_violation, FirstOrderFlex};
use crate::mesh::{is_triangle_degenerate, EdgeFrame, Polyhedron};
use crate::Vec3;

/// Default absolute threshold on `|sin phi|` and `|cos phi|` for branch
/// definedness.
pub const DEFAULT_TRIG_TOL: f64 = 1e-9;

/// Positions (or velocities) at the four slots of an edge frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeQuad {
    pub edge: usize,
    pub x: Vec3,
    pub y: Vec3,
    pub z1: Vec3,
    pub z2: Vec3,
}

impl EdgeQuad {
    pub fn new(x: Vec3, y: Vec3, z1: Vec3, z2: Vec3) -> Self {
        EdgeQuad { edge: 0, x, y, z1, z2 }
    }

    pub fn from_points(points: &[Vec3], frame: &EdgeFrame) -> Self {
        EdgeQuad {
            edge: frame.edge_id,
            x: points[frame.x],
            y: points[frame.y],
            z1: points[frame.z1],
            z2: points[frame.z2],
        }
    }

    pub fn from_frame(p: &Polyhedron, frame: &EdgeFrame) -> Self {
        Self::from_points(p.vertices(), frame)
    }

    /// `(y - x, z' - x, z'' - x)`.
    pub fn spokes(&self) -> (Vec3, Vec3, Vec3) {
        (self.y - self.x, self.z1 - self.x, self.z2 - self.x)
    }

    pub fn displaced(&self, v: &EdgeQuad, t: f64) -> Self {
        EdgeQuad {
            edge: self.edge,
            x: self.x + v.x * t,
            y: self.y + v.y * t,
            z1: self.z1 + v.z1 * t,
            z2: self.z2 + v.z2 * t,
        }
    }

    fn has_degenerate_face(&self) -> bool {
        is_triangle_degenerate(self.x, self.y, self.z1) || is_triangle_degenerate(self.x, self.y, self.z2)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DihedralData {
    /// Length of `y - x`.
    pub ell: f64,
    pub ell_prime: f64,
    pub ell_double_prime: f64,
    /// Doubled areas of the faces `(x, y, z')` and `(x, y, z'')`.
    pub area_prime: f64,
    pub area_double_prime: f64,
    #[serde(serialize_with = "ser_vec3")]
    pub n_prime: Vec3,
    #[serde(serialize_with = "ser_vec3")]
    pub n_double_prime: Vec3,
    pub cos_phi: f64,
    pub sin_phi: f64,
    /// Interior dihedral angle in `[0, 2 pi)`.
    pub phi: f64,
}

fn ser_vec3<S: serde::Serializer>(v: &Vec3, s: S) -> Result<S::Ok, S::Error> {
    use serde::Serialize;
    [v.x, v.y, v.z].serialize(s)
}

/// Dihedral data from the scalar and triple-product identities.
pub fn quad_dihedral(q: &EdgeQuad) -> Result<DihedralData, GeometryError> {
    if q.has_degenerate_face() {
        return Err(GeometryError::DegenerateFace { edge: q.edge });
    }
    let (w, w1, w2) = q.spokes();
    let ell = w.norm();
    let c1 = w.cross(&w1);
    let c2 = w2.cross(&w);
    let area1 = c1.norm();
    let area2 = c2.norm();
    let (theta, triple) = theta_and_triple(w, w1, w2);
    let aa = area1 * area2;
    let cos_phi = theta / aa;
    let sin_phi = -ell * triple / aa;
    Ok(DihedralData {
        ell,
        ell_prime: w1.norm(),
        ell_double_prime: w2.norm(),
        area_prime: area1,
        area_double_prime: area2,
        n_prime: c1 / area1,
        n_double_prime: c2 / area2,
        cos_phi,
        sin_phi,
        phi: angle_from_trig(sin_phi, cos_phi),
    })
}

pub fn dihedral_data(p: &Polyhedron, frame: &EdgeFrame) -> Result<DihedralData, GeometryError> {
    quad_dihedral(&EdgeQuad::from_frame(p, frame))
}

/// `theta = l^2 (w'.w'') - (w'.w)(w''.w)` and `w . (w' x w'')`.
fn theta_and_triple(w: Vec3, w1: Vec3, w2: Vec3) -> (f64, f64) {
    let theta = w.norm_squared() * w1.dot(&w2) - w1.dot(&w) * w2.dot(&w);
    (theta, w.dot(&w1.cross(&w2)))
}

fn angle_from_trig(sin_phi: f64, cos_phi: f64) -> f64 {
    if sin_phi.abs() <= DEFAULT_TRIG_TOL && cos_phi < 0.0 {
        return PI;
    }
    let a = sin_phi.atan2(cos_phi);
    let a = if a < 0.0 { a + TAU } else { a };
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Three coefficient vectors addressed to the `y`, `z'` and `z''` slots.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Triple {
    #[serde(serialize_with = "ser_vec3")]
    pub g: Vec3,
    #[serde(serialize_with = "ser_vec3")]
    pub g_prime: Vec3,
    #[serde(serialize_with = "ser_vec3")]
    pub g_double_prime: Vec3,
}

impl Triple {
    /// `g.(eta - xi) + g'.(zeta' - xi) + g''.(zeta'' - xi)` for slot
    /// velocities `v`.
    pub fn contract(&self, v: &EdgeQuad) -> f64 {
        self.g.dot(&(v.y - v.x)) + self.g_prime.dot(&(v.z1 - v.x)) + self.g_double_prime.dot(&(v.z2 - v.x))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Triple {
            g: self.g * c,
            g_prime: self.g_prime * c,
            g_double_prime: self.g_double_prime * c,
        }
    }

    /// `|g| + |g'| + |g''|`.
    pub fn l1_norm(&self) -> f64 {
        self.g.norm() + self.g_prime.norm() + self.g_double_prime.norm()
    }

    fn slot(&self, i: usize) -> Vec3 {
        match i {
            0 => self.g,
            1 => self.g_prime,
            _ => self.g_double_prime,
        }
    }
}

/// All coefficient vectors of one edge.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CoefficientSet {
    pub p: Triple,
    pub q: Triple,
    /// Defined iff `|sin phi| > trig_tol`.
    pub r: Option<Triple>,
    /// Defined iff `|cos phi| > trig_tol`.
    pub s: Option<Triple>,
    pub theta: f64,
    pub triple_product: f64,
    pub cos_phi: f64,
    pub sin_phi: f64,
}

/// The p- and q-triples with `theta` and `w . (w' x w'')`.
///
/// These satisfy `(A'A'' sin phi) Phi = p-contraction` and
/// `(A'A'' cos phi) Phi = q-contraction` on first-order flexes. They are
/// defined even when a face is degenerate.
pub fn pq_vectors(q: &EdgeQuad) -> (Triple, Triple, f64, f64) {
    let (w, w1, w2) = q.spokes();
    let ell = w.norm();
    let l2 = ell * ell;
    let ww1 = w.dot(&w1);
    let ww2 = w.dot(&w2);
    let p = Triple {
        g: w1 * ww2 + w2 * ww1,
        g_prime: w * ww2 - w2 * l2,
        g_double_prime: w * ww1 - w1 * l2,
    };
    let qv = Triple {
        g: -w1.cross(&w2) * ell,
        g_prime: w.cross(&w2) * ell,
        g_double_prime: -w.cross(&w1) * ell,
    };
    let (theta, triple) = theta_and_triple(w, w1, w2);
    (p, qv, theta, triple)
}

/// p/q plus whichever of the r/s triples are defined at `trig_tol`.
pub fn rs_vectors(q: &EdgeQuad, trig_tol: f64) -> Result<CoefficientSet, GeometryError> {
    let d = quad_dihedral(q)?;
    let (p, qv, theta, triple) = pq_vectors(q);
    let r = (d.sin_phi.abs() > trig_tol).then(|| p.scaled(-1.0 / (d.ell * triple)));
    let s = (d.cos_phi.abs() > trig_tol).then(|| qv.scaled(1.0 / theta));
    if r.is_none() && s.is_none() {
        return Err(GeometryError::BothBranchesUndefined { edge: q.edge, trig_tol });
    }
    Ok(CoefficientSet {
        p,
        q: qv,
        r,
        s,
        theta,
        triple_product: triple,
        cos_phi: d.cos_phi,
        sin_phi: d.sin_phi,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    R,
    S,
}

/// Which coefficient triple to use where both are defined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum BranchPolicy {
    /// s when `|cos phi| >= |sin phi|`, else r.
    #[default]
    PreferStable,
    ForceR,
    ForceS,
    /// Slot-wise choice for `(g, g', g'')`. Experimental.
    MixedSlots([Branch; 3]),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GVariant {
    RTriple,
    STriple,
    Mixed([Branch; 3]),
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GSelection {
    pub triple: Triple,
    pub variant: GVariant,
}

/// Applies `policy`; errors when the requested branch is undefined.
pub fn g_vectors(set: &CoefficientSet, policy: BranchPolicy, edge: usize) -> Result<GSelection, GeometryError> {
    let pick = |b: Branch| -> Result<Triple, GeometryError> {
        match b {
            Branch::R => set.r.ok_or(GeometryError::BranchUndefined { edge, branch: "r" }),
            Branch::S => set.s.ok_or(GeometryError::BranchUndefined { edge, branch: "s" }),
        }
    };
    match policy {
        BranchPolicy::PreferStable => {
            if set.cos_phi.abs() >= set.sin_phi.abs() {
                Ok(GSelection { triple: pick(Branch::S)?, variant: GVariant::STriple })
            } else {
                Ok(GSelection { triple: pick(Branch::R)?, variant: GVariant::RTriple })
            }
        }
        BranchPolicy::ForceR => Ok(GSelection { triple: pick(Branch::R)?, variant: GVariant::RTriple }),
        BranchPolicy::ForceS => Ok(GSelection { triple: pick(Branch::S)?, variant: GVariant::STriple }),
        BranchPolicy::MixedSlots(mask) => {
            let slots = [pick(mask[0])?.slot(0), pick(mask[1])?.slot(1), pick(mask[2])?.slot(2)];
            Ok(GSelection {
                triple: Triple {
                    g: slots[0],
                    g_prime: slots[1],
                    g_double_prime: slots[2],
                },
                variant: GVariant::Mixed(mask),
            })
        }
    }
}

/// Like [`g_vectors`], but an edge with a single defined branch always uses
/// it; the policy only decides where both are available.
pub fn g_vectors_or_defined(set: &CoefficientSet, policy: BranchPolicy, edge: usize) -> Result<GSelection, GeometryError> {
    match (set.r, set.s) {
        (Some(r), None) => Ok(GSelection { triple: r, variant: GVariant::RTriple }),
        (None, Some(s)) => Ok(GSelection { triple: s, variant: GVariant::STriple }),
        _ => g_vectors(set, policy, edge),
    }
}

/// Angle rate `Phi` of one edge along a first-order flex, using the
/// numerically preferred branch.
pub fn angle_derivative(
    p: &Polyhedron,
    frame: &EdgeFrame,
    flex: &FirstOrderFlex,
    trig_tol: f64,
    flex_tol: f64,
) -> Result<f64, GeometryError> {
    let violation = first_order_violation(p, flex).map_err(|_| GeometryError::NotAFirstOrderFlex { max_residual: f64::NAN })?;
    if violation > flex_tol {
        return Err(GeometryError::NotAFirstOrderFlex { max_residual: violation });
    }
    let quad = EdgeQuad::from_frame(p, frame);
    let set = rs_vectors(&quad, trig_tol)?;
    let g = g_vectors(&set, BranchPolicy::PreferStable, frame.edge_id)?;
    Ok(g.triple.contract(&EdgeQuad::from_points(&flex.velocities, frame)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{bipyramid_q, regular_tetrahedron, v5_flex};
    use crate::flex::{FirstOrderFlex, DEFAULT_FLEX_TOL};

    fn q_edge_quad() -> (Polyhedron, EdgeFrame) {
        let q = bipyramid_q();
        let f = q.edge_frame(q.edge_id(1, 4).unwrap()).unwrap();
        (q, f)
    }

    #[test]
    fn worked_example_flat_edge() {
        let (q, f) = q_edge_quad();
        let d = dihedral_data(&q, &f).unwrap();
        let s3 = 3f64.sqrt();
        assert!((d.ell - (4.0 * s3 - 3.0)).abs() < 1e-12);
        assert!((d.ell_prime - 8.0).abs() < 1e-12);
        assert!((d.ell_double_prime - 8.0).abs() < 1e-12);
        assert!((d.n_prime - Vec3::z()).norm() < 1e-12);
        assert!((d.n_double_prime - Vec3::z()).norm() < 1e-12);
        assert!(d.sin_phi.abs() < 1e-12);
        assert!((d.cos_phi + 1.0).abs() < 1e-12);
        assert_eq!(d.phi, PI);
    }

    #[test]
    fn worked_example_q_vector_and_theta() {
        let (q, f) = q_edge_quad();
        let (_, qv, theta, _) = pq_vectors(&EdgeQuad::from_frame(&q, &f));
        let s3 = 3f64.sqrt();
        // Hand cross product: w' x w'' = (0, 0, -32 sqrt3).
        let expected = -(4.0 * s3 - 3.0) * Vec3::new(0.0, 0.0, -32.0 * s3);
        assert!((qv.g - expected).norm() < 1e-10);
        assert!((theta - (384.0 * s3 - 912.0)).abs() < 1e-9);
        assert!((theta + 246.8925).abs() < 1e-4);
    }

    #[test]
    fn worked_example_s_vector_direct_substitution() {
        let (q, f) = q_edge_quad();
        let set = rs_vectors(&EdgeQuad::from_frame(&q, &f), DEFAULT_TRIG_TOL).unwrap();
        assert!(set.r.is_none());
        let s = set.s.unwrap();
        let s3 = 3f64.sqrt();
        assert!(s.g.x.abs() < 1e-12 && s.g.y.abs() < 1e-12);
        assert!((s.g.z + (8.0 + 2.0 * s3) / 13.0).abs() < 1e-12);
        let g = g_vectors(&set, BranchPolicy::PreferStable, f.edge_id).unwrap();
        assert_eq!(g.variant, GVariant::STriple);
        assert!(matches!(
            g_vectors(&set, BranchPolicy::ForceR, f.edge_id),
            Err(GeometryError::BranchUndefined { .. })
        ));
        let phi_dot = angle_derivative(&q, &f, &v5_flex(), DEFAULT_TRIG_TOL, DEFAULT_FLEX_TOL).unwrap();
        assert!((phi_dot - s.g.z).abs() < 1e-15);
    }

    #[test]
    fn regular_tetrahedron_dihedral() {
        let p = regular_tetrahedron(1.0);
        for f in p.edge_frames().unwrap() {
            let d = dihedral_data(&p, &f).unwrap();
            assert!((d.cos_phi - 1.0 / 3.0).abs() < 1e-12);
            assert!((d.sin_phi - 8f64.sqrt() / 3.0).abs() < 1e-12);
            assert!((d.cos_phi + d.n_prime.dot(&d.n_double_prime)).abs() < 1e-12);
            let set = rs_vectors(&EdgeQuad::from_frame(&p, &f), DEFAULT_TRIG_TOL).unwrap();
            assert!(set.r.is_some() && set.s.is_some());
            let g = g_vectors(&set, BranchPolicy::ForceR, f.edge_id).unwrap();
            assert_eq!(g.variant, GVariant::RTriple);
        }
    }

    #[test]
    fn flat_rhombus_and_right_angle() {
        // Two coplanar triangles sharing x-y.
        let quad = EdgeQuad::new(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.5, 1.0, 0.0),
            Vec3::new(0.5, -1.0, 0.0),
        );
        let d = quad_dihedral(&quad).unwrap();
        assert_eq!(d.phi, PI);
        assert!(d.sin_phi.abs() < 1e-15);

        // Faces in the z=0 and y=0 half-planes meeting at a right angle.
        let quad = EdgeQuad::new(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.5, 1.0, 0.0),
            Vec3::new(0.5, 0.0, 1.0),
        );
        let d = quad_dihedral(&quad).unwrap();
        assert!(d.cos_phi.abs() < 1e-15);
        assert!((d.phi - PI / 2.0).abs() < 1e-12 || (d.phi - 1.5 * PI).abs() < 1e-12);
        let set = rs_vectors(&quad, DEFAULT_TRIG_TOL).unwrap();
        assert!(set.s.is_none());
        assert!(matches!(
            g_vectors(&set, BranchPolicy::ForceS, 0),
            Err(GeometryError::BranchUndefined { branch: "s", .. })
        ));
        assert_eq!(g_vectors(&set, BranchPolicy::PreferStable, 0).unwrap().variant, GVariant::RTriple);
    }

    #[test]
    fn both_branches_undefined_signals_bad_tolerance() {
        let p = regular_tetrahedron(1.0);
        let f = p.edge_frame(0).unwrap();
        assert!(matches!(
            rs_vectors(&EdgeQuad::from_frame(&p, &f), 0.99),
            Err(GeometryError::BothBranchesUndefined { .. })
        ));
    }

    #[test]
    fn coincident_apexes_give_opposite_q_slots() {
        let z = Vec3::new(0.3, 1.0, 0.2);
        let quad = EdgeQuad::new(Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), z, z);
        let (_, q, _, _) = pq_vectors(&quad);
        assert!((q.g_prime + q.g_double_prime).norm() < 1e-15);
    }

    #[test]
    fn degenerate_face_is_reported() {
        let quad = EdgeQuad::new(
            Vec3::zeros(),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 1.0),
        );
        assert!(matches!(quad_dihedral(&quad), Err(GeometryError::DegenerateFace { .. })));
    }

    #[test]
    fn non_flex_is_rejected() {
        let (q, f) = q_edge_quad();
        let mut v = FirstOrderFlex::zeros(5);
        v.velocities[4] = Vec3::new(1.0, 0.0, 0.0);
        assert!(matches!(
            angle_derivative(&q, &f, &v, DEFAULT_TRIG_TOL, DEFAULT_FLEX_TOL),
            Err(GeometryError::NotAFirstOrderFlex { .. })
        ));
    }

    #[test]
    fn rigid_motions_do_not_change_angles() {
        let p = regular_tetrahedron(1.3);
        let rot = FirstOrderFlex::rotation(&p, Vec3::new(0.3, -0.2, 0.9), Vec3::new(0.1, 0.5, -2.0));
        let tr = FirstOrderFlex::translation(4, Vec3::new(1.0, 2.0, 3.0));
        for f in p.edge_frames().unwrap() {
            for m in [&rot, &tr] {
                let phi = angle_derivative(&p, &f, m, DEFAULT_TRIG_TOL, DEFAULT_FLEX_TOL).unwrap();
                assert!(phi.abs() < 1e-9);
            }
        }
    }
}
