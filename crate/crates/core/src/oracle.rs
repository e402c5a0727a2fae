//! Independent checks: finite-difference derivatives and numeric
//! continuation along the fixed-edge-length constraint set.

use std::f64::consts::{PI, TAU};

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{GeometryError, OracleError};
use crate::flex::{first_order_violation, flex_space, trivial_motions, FirstOrderFlex, RigidityMatrix, DEFAULT_FLEX_TOL, DEFAULT_RANK_TOL};
use crate::geometry::{quad_dihedral, EdgeQuad};
use crate::linalg::right_svd;
use crate::mesh::{EdgeFrame, Polyhedron};
use crate::minors::{minor_value, MinorIndex};
use crate::Vec3;

pub use crate::fixtures::{gen_example, ExampleSpec};

pub const DEFAULT_FD_STEP: f64 = 1e-6;
/// Relative per-edge length tolerance of the corrector.
pub const DEFAULT_NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
/// A step whose non-rigid displacement falls below this fraction of the
/// step size counts as stalled.
pub const STALL_FRACTION: f64 = 0.5;

fn check_flex(p: &Polyhedron, flex: &FirstOrderFlex) -> Result<(), OracleError> {
    let violation = first_order_violation(p, flex)?;
    if violation > DEFAULT_FLEX_TOL {
        return Err(GeometryError::NotAFirstOrderFlex { max_residual: violation }.into());
    }
    Ok(())
}

fn check_step(h: f64) -> Result<(), OracleError> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(OracleError::InvalidParams(format!("step must be positive, got {h}")))
    }
}

fn raw_angle(q: &EdgeQuad) -> Result<f64, OracleError> {
    let d = quad_dihedral(q)?;
    Ok(d.sin_phi.atan2(d.cos_phi))
}

/// Moves `a` by a multiple of `2 pi` to the branch nearest `reference`.
fn unwrap_near(a: f64, reference: f64) -> f64 {
    a - TAU * ((a - reference) / TAU).round()
}

/// Central difference of the dihedral angle along `p + t v`.
pub fn fd_angle_derivative(p: &Polyhedron, frame: &EdgeFrame, flex: &FirstOrderFlex, h: f64) -> Result<f64, OracleError> {
    check_step(h)?;
    check_flex(p, flex)?;
    let q = EdgeQuad::from_frame(p, frame);
    let v = EdgeQuad::from_points(&flex.velocities, frame);
    let a0 = raw_angle(&q)?;
    let mut ends = [0.0; 2];
    for (slot, t) in ends.iter_mut().zip([h, -h]) {
        let a = unwrap_near(raw_angle(&q.displaced(&v, t))?, a0);
        if (a - a0).abs() > PI / 2.0 {
            return Err(OracleError::AngleUnwrapFailure { jump: a - a0 });
        }
        *slot = a;
    }
    Ok((ends[0] - ends[1]) / (2.0 * h))
}

/// Central difference of a minor along `p + t v`.
pub fn fd_minor_derivative(p: &Polyhedron, flex: &FirstOrderFlex, idx: &MinorIndex, h: f64) -> Result<f64, OracleError> {
    check_step(h)?;
    let at = |t: f64| minor_value(&RigidityMatrix::new(&p.displaced(&flex.velocities, t)), idx);
    Ok((at(h)? - at(-h)?) / (2.0 * h))
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuationStep {
    pub t: f64,
    #[serde(serialize_with = "ser_points")]
    pub positions: Vec<Vec3>,
    pub tangent: FirstOrderFlex,
    pub newton_iterations: usize,
    /// Largest `|l - l0| / l0` over edges.
    pub edge_drift: f64,
    pub kernel_dim: usize,
}

fn ser_points<S: serde::Serializer>(v: &[Vec3], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for p in v {
        seq.serialize_element(&[p.x, p.y, p.z])?;
    }
    seq.end()
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuationResult {
    pub steps: Vec<ContinuationStep>,
    pub max_edge_drift: f64,
}

impl ContinuationResult {
    pub fn polyhedron_at(&self, base: &Polyhedron, step: usize) -> Polyhedron {
        base.with_positions(self.steps[step].positions.clone())
    }

    pub fn newton_iterations(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.newton_iterations).collect()
    }
}

fn to_vec(points: &[Vec3]) -> DVector<f64> {
    DVector::from_iterator(points.len() * 3, points.iter().flat_map(|p| [p.x, p.y, p.z]))
}

fn from_vec(v: &DVector<f64>) -> Vec<Vec3> {
    v.as_slice().chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
}

fn edge_drift(p: &Polyhedron, l0: &[f64]) -> f64 {
    (0..p.num_edges())
        .map(|e| (p.edge_length(e) - l0[e]).abs() / l0[e])
        .fold(0.0, f64::max)
}

/// Component of `v` in the span of an orthonormal basis.
fn project_onto(v: &DVector<f64>, basis: &[FirstOrderFlex]) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    for b in basis {
        let b = b.to_dvector();
        out.axpy(b.dot(v), &b, 1.0);
    }
    out
}

/// Newton corrector on `|p_i - p_j|^2 = l0^2` with least-norm updates
/// through the top `rank` singular directions. Returns the iteration count.
fn correct(base: &Polyhedron, x: &mut DVector<f64>, l0: &[f64], rank: usize, tol: f64) -> Option<usize> {
    for it in 0..=NEWTON_MAX_ITER {
        let p = base.with_positions(from_vec(x));
        if edge_drift(&p, l0) <= tol {
            return Some(it);
        }
        if it == NEWTON_MAX_ITER {
            break;
        }
        let c = DVector::from_iterator(l0.len(), (0..l0.len()).map(|e| p.edge_length(e).powi(2) - l0[e] * l0[e]));
        let j = RigidityMatrix::new(&p).matrix * 2.0;
        let svd = right_svd(&j);
        let mut delta = DVector::zeros(x.len());
        for i in 0..rank {
            let s = svd.singular_values[i];
            if s == 0.0 {
                break;
            }
            let v = svd.right_vectors.column(i);
            let coef = (&j * v).dot(&c) / (s * s);
            delta.axpy(-coef, &v, 1.0);
        }
        *x += delta;
    }
    None
}

/// Follows a flex from `p` in `direction`, one predictor-corrector step at
/// a time.
pub fn continue_flex(
    p: &Polyhedron,
    direction: &FirstOrderFlex,
    step_size: f64,
    n_steps: usize,
    newton_tol: f64,
) -> Result<ContinuationResult, OracleError> {
    check_step(step_size)?;
    if !(newton_tol.is_finite() && newton_tol > 0.0) {
        return Err(OracleError::InvalidParams(format!("newton tolerance must be positive, got {newton_tol}")));
    }
    if direction.len() != p.num_vertices() {
        return Err(crate::error::FlexError::SizeMismatch {
            expected: p.num_vertices(),
            got: direction.len(),
        }
        .into());
    }
    let fs = flex_space(p, DEFAULT_RANK_TOL)?;
    if fs.kernel_dim < 7 {
        return Err(OracleError::KernelCollapse { step: 0, dim: fs.kernel_dim });
    }
    let dir = direction.to_dvector();
    let mut tangent = project_onto(&dir, &fs.nontrivial_basis);
    let tn = tangent.norm();
    if tn.is_nan() || tn <= 1e-9 * dir.norm() {
        return Err(OracleError::InvalidParams("direction has no nontrivial component".into()));
    }
    tangent /= tn;

    let l0 = p.edge_lengths();
    let rank = fs.rank;
    let mut x = to_vec(p.vertices());
    let mut steps = vec![ContinuationStep {
        t: 0.0,
        positions: p.vertices().to_vec(),
        tangent: FirstOrderFlex::from_dvector(&tangent),
        newton_iterations: 0,
        edge_drift: 0.0,
        kernel_dim: fs.kernel_dim,
    }];
    let mut max_drift: f64 = 0.0;

    for s in 1..=n_steps {
        let prev = x.clone();
        let mut next = &x + &tangent * step_size;
        let iters = correct(p, &mut next, &l0, rank, newton_tol).ok_or_else(|| OracleError::ContinuationStalled {
            step: s,
            reason: format!("corrector did not converge in {NEWTON_MAX_ITER} iterations"),
        })?;
        let here = p.with_positions(from_vec(&next));

        let rigid = trivial_motions(&p.with_positions(from_vec(&prev)))?;
        let moved = &next - &prev;
        let shape_change = (&moved - project_onto(&moved, &rigid)).norm();
        if shape_change < STALL_FRACTION * step_size {
            return Err(OracleError::ContinuationStalled {
                step: s,
                reason: format!("non-rigid displacement {shape_change:e} for step {step_size:e}"),
            });
        }

        let fs = flex_space(&here, DEFAULT_RANK_TOL)?;
        if fs.kernel_dim < 7 {
            return Err(OracleError::KernelCollapse { step: s, dim: fs.kernel_dim });
        }
        let mut t_new = project_onto(&tangent, &fs.nontrivial_basis);
        let n = t_new.norm();
        if n.is_nan() || n <= 1e-6 {
            return Err(OracleError::ContinuationStalled {
                step: s,
                reason: "tangent left the kernel".into(),
            });
        }
        t_new /= n;
        tangent = t_new;
        x = next;

        let drift = edge_drift(&here, &l0);
        max_drift = max_drift.max(drift);
        steps.push(ContinuationStep {
            t: s as f64 * step_size,
            positions: here.vertices().to_vec(),
            tangent: FirstOrderFlex::from_dvector(&tangent),
            newton_iterations: iters,
            edge_drift: drift,
            kernel_dim: fs.kernel_dim,
        });
    }
    Ok(ContinuationResult {
        steps,
        max_edge_drift: max_drift,
    })
}
