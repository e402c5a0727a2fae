//! Dehn-invariant conditions on first-order flexes.
//!
//! Edge lengths are written over a length basis `lambda_1..lambda_m` with
//! rational coefficients `alpha[e][j]`. Each basis element gives one linear
//! equation in the vertex velocities,
//!
//! ```text
//! sum_e alpha[e][j] * Phi_e = 0,
//! ```
//!
//! with `Phi_e` written through the edge's coefficient triple.

use nalgebra::DVector;
use num_rational::Rational64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{DehnError, GeometryError};
use crate::flex::{first_order_violation, FirstOrderFlex, DEFAULT_FLEX_TOL};
use crate::geometry::{
    dihedral_data, g_vectors_or_defined, rs_vectors, BranchPolicy, EdgeQuad, GSelection, GVariant, DEFAULT_TRIG_TOL,
};
use crate::mesh::{EdgeFrame, Polyhedron};
use crate::par::{map_indexed, Execution};
use crate::rational::{best_rational, to_f64};

/// Relative tolerance for `|sum alpha_j lambda_j - l| <= tol * l`.
pub const DEFAULT_DECOMP_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_DENOMINATOR: i64 = 10_000;
pub const DEFAULT_DEHN_TOL: f64 = 1e-8;

/// Denominator bound for both coefficients of two-term decompositions.
const PAIR_MAX_DENOMINATOR: i64 = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisElement {
    pub label: String,
    pub value: f64,
}

/// Ordered length basis. Rational independence of the values is taken on
/// trust.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<BasisElement>", into = "Vec<BasisElement>")]
pub struct LengthBasis {
    elements: Vec<BasisElement>,
}

impl TryFrom<Vec<BasisElement>> for LengthBasis {
    type Error = DehnError;

    fn try_from(elements: Vec<BasisElement>) -> Result<Self, DehnError> {
        LengthBasis::new(elements)
    }
}

impl From<LengthBasis> for Vec<BasisElement> {
    fn from(b: LengthBasis) -> Self {
        b.elements
    }
}

impl LengthBasis {
    pub fn new(elements: Vec<BasisElement>) -> Result<Self, DehnError> {
        if elements.is_empty() {
            return Err(DehnError::InvalidBasis("basis is empty".into()));
        }
        for (i, e) in elements.iter().enumerate() {
            if !(e.value.is_finite() && e.value > 0.0) {
                return Err(DehnError::InvalidBasis(format!("element {i} ({}) is not a positive real", e.label)));
            }
            if elements[..i].iter().any(|o| o.value == e.value) {
                return Err(DehnError::InvalidBasis(format!("element {i} ({}) repeats a value", e.label)));
            }
        }
        Ok(LengthBasis { elements })
    }

    /// Labels are the shortest round-trip decimal of each value.
    pub fn from_values(values: &[f64]) -> Result<Self, DehnError> {
        Self::new(
            values
                .iter()
                .map(|&value| BasisElement {
                    label: format!("{value}"),
                    value,
                })
                .collect(),
        )
    }

    pub fn elements(&self) -> &[BasisElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.value).collect()
    }
}

/// Rational coordinates of every edge length over a basis.
#[derive(Clone, Debug, PartialEq)]
pub struct LengthDecomposition {
    basis: LengthBasis,
    /// `coeffs[edge][j]`.
    coeffs: Vec<Vec<Rational64>>,
}

impl LengthDecomposition {
    /// Validates shape and the length residual of every edge.
    pub fn new(
        p: &Polyhedron,
        basis: LengthBasis,
        coeffs: Vec<Vec<Rational64>>,
        decomp_tol: f64,
    ) -> Result<Self, DehnError> {
        if coeffs.len() != p.num_edges() {
            return Err(DehnError::InvalidDecomposition(format!(
                "{} coefficient rows for {} edges",
                coeffs.len(),
                p.num_edges()
            )));
        }
        let values = basis.values();
        for (e, row) in coeffs.iter().enumerate() {
            if row.len() != values.len() {
                return Err(DehnError::InvalidDecomposition(format!(
                    "edge {e} has {} coefficients for a basis of {}",
                    row.len(),
                    values.len()
                )));
            }
            let ell = p.edge_length(e);
            let got = combine(row, &values);
            if (got - ell).abs() > decomp_tol * ell {
                return Err(DehnError::InvalidDecomposition(format!(
                    "edge {e}: coefficients give {got} but the length is {ell}"
                )));
            }
        }
        Ok(LengthDecomposition { basis, coeffs })
    }

    pub fn basis(&self) -> &LengthBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &[Vec<Rational64>] {
        &self.coeffs
    }

    pub fn alpha(&self, edge: usize, j: usize) -> Rational64 {
        self.coeffs[edge][j]
    }

    /// Column `j`: the coefficient of `lambda_j` on every edge.
    pub fn column(&self, j: usize) -> Vec<Rational64> {
        self.coeffs.iter().map(|row| row[j]).collect()
    }

    pub fn reconstructed_length(&self, edge: usize) -> f64 {
        combine(&self.coeffs[edge], &self.basis.values())
    }
}

fn combine(row: &[Rational64], values: &[f64]) -> f64 {
    row.iter().zip(values).map(|(a, l)| to_f64(a) * l).sum()
}

/// Rational coefficients of one length, or `None`.
///
/// Single-element representations are tried first (smallest denominator
/// wins). Failing that, two-element representations with both denominators
/// at most 12 are searched.
pub fn decompose_length(ell: f64, values: &[f64], decomp_tol: f64, max_den: i64) -> Option<Vec<Rational64>> {
    let m = values.len();
    let fits = |row: &[Rational64]| (combine(row, values) - ell).abs() <= decomp_tol * ell;
    let mut best: Option<(i64, Vec<Rational64>)> = None;
    for j in 0..m {
        let Some(a) = best_rational(ell / values[j], max_den) else { continue };
        if a.is_zero() {
            continue;
        }
        let mut row = vec![Rational64::zero(); m];
        row[j] = a;
        if fits(&row) && best.as_ref().is_none_or(|(d, _)| *a.denom() < *d) {
            best = Some((*a.denom(), row));
        }
    }
    if let Some((_, row)) = best {
        return Some(row);
    }
    for j in 0..m {
        for k in 0..m {
            if j == k {
                continue;
            }
            let bound = (2.0 * ell / values[j]).ceil() as i64 + 8;
            for d in 1..=PAIR_MAX_DENOMINATOR {
                for n in 1..=d * bound {
                    for n in [n, -n] {
                        let a = Rational64::new(n, d);
                        if *a.denom() != d {
                            continue;
                        }
                        let rest = ell - to_f64(&a) * values[j];
                        let Some(b) = best_rational(rest / values[k], max_den.min(PAIR_MAX_DENOMINATOR)) else {
                            continue;
                        };
                        if b.is_zero() {
                            continue;
                        }
                        let mut row = vec![Rational64::zero(); m];
                        row[j] = a;
                        row[k] = b;
                        if fits(&row) {
                            return Some(row);
                        }
                    }
                }
            }
        }
    }
    None
}

pub fn decompose_lengths(
    p: &Polyhedron,
    basis: &LengthBasis,
    decomp_tol: f64,
    max_den: i64,
) -> Result<LengthDecomposition, DehnError> {
    if p.has_degenerate_face() {
        return Err(DehnError::TheoremHypothesisViolated("mesh has a degenerate face".into()));
    }
    let values = basis.values();
    let rows = map_indexed(Execution::default(), p.num_edges(), |e| {
        decompose_length(p.edge_length(e), &values, decomp_tol, max_den)
    });
    let mut coeffs = Vec::with_capacity(rows.len());
    for (e, row) in rows.into_iter().enumerate() {
        match row {
            Some(r) => coeffs.push(r),
            None => {
                return Err(DehnError::DecompositionFailed {
                    edge: e,
                    length: p.edge_length(e),
                    max_denominator: max_den,
                })
            }
        }
    }
    Ok(LengthDecomposition {
        basis: basis.clone(),
        coeffs,
    })
}

/// Greedy basis: edges in increasing length order, each added unless it
/// already decomposes over the basis built so far. Labels are `"lo-hi"`.
pub fn auto_basis(p: &Polyhedron, decomp_tol: f64, max_den: i64) -> LengthBasis {
    let mut order: Vec<usize> = (0..p.num_edges()).collect();
    order.sort_by(|&a, &b| p.edge_length(a).total_cmp(&p.edge_length(b)).then(a.cmp(&b)));
    let mut elements: Vec<BasisElement> = Vec::new();
    for e in order {
        let ell = p.edge_length(e);
        let values: Vec<f64> = elements.iter().map(|b| b.value).collect();
        if !values.is_empty() && decompose_length(ell, &values, decomp_tol, max_den).is_some() {
            continue;
        }
        let edge = p.edges()[e];
        elements.push(BasisElement {
            label: format!("{}-{}", edge.lo, edge.hi),
            value: ell,
        });
    }
    LengthBasis { elements }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DehnOptions {
    pub policy: BranchPolicy,
    pub trig_tol: f64,
    pub dehn_tol: f64,
    pub flex_tol: f64,
}

impl Default for DehnOptions {
    fn default() -> Self {
        DehnOptions {
            policy: BranchPolicy::PreferStable,
            trig_tol: DEFAULT_TRIG_TOL,
            dehn_tol: DEFAULT_DEHN_TOL,
            flex_tol: DEFAULT_FLEX_TOL,
        }
    }
}

/// The triple chosen for one edge.
#[derive(Clone, Copy, Debug)]
pub struct EdgeSelection {
    pub frame: EdgeFrame,
    pub selection: GSelection,
}

#[derive(Clone, Copy, Debug)]
pub struct EdgeTerm {
    pub edge: usize,
    pub alpha: Rational64,
    pub frame: EdgeFrame,
    pub selection: GSelection,
}

#[derive(Clone, Debug)]
pub struct DehnEquation {
    pub basis_index: usize,
    /// Edges with a nonzero coefficient.
    pub terms: Vec<EdgeTerm>,
    /// Length `3V`; the equation is `assembled . flex = 0`.
    pub assembled: DVector<f64>,
    /// `sum |alpha| (|g| + |g'| + |g''|)`.
    pub magnitude: f64,
}

impl DehnEquation {
    pub fn evaluate(&self, flex: &FirstOrderFlex) -> f64 {
        self.assembled.dot(&flex.to_dvector())
    }

    /// Same value, summed edge by edge from slot velocity differences, so a
    /// translation gives exactly zero.
    pub fn evaluate_terms(&self, flex: &FirstOrderFlex) -> f64 {
        self.terms
            .iter()
            .map(|t| to_f64(&t.alpha) * t.selection.triple.contract(&EdgeQuad::from_points(&flex.velocities, &t.frame)))
            .sum()
    }
}

fn check_hypotheses(p: &Polyhedron) -> Result<Vec<EdgeFrame>, DehnError> {
    if p.has_degenerate_face() {
        return Err(DehnError::TheoremHypothesisViolated("mesh has a degenerate face".into()));
    }
    p.edge_frames()
        .map_err(|e| DehnError::TheoremHypothesisViolated(format!("surface must be oriented: {e}")))
}

/// Frame and coefficient triple of every edge under `policy`. Edges with one
/// defined branch use it regardless of policy.
pub fn edge_selections(p: &Polyhedron, policy: BranchPolicy, trig_tol: f64) -> Result<Vec<EdgeSelection>, DehnError> {
    let frames = check_hypotheses(p)?;
    map_indexed(Execution::default(), frames.len(), |e| {
        let frame = frames[e];
        let set = rs_vectors(&EdgeQuad::from_frame(p, &frame), trig_tol)?;
        Ok(EdgeSelection {
            frame,
            selection: g_vectors_or_defined(&set, policy, e)?,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, GeometryError>>()
    .map_err(DehnError::from)
}

/// One equation from a coefficient column over precomputed selections.
pub fn assemble_equation(
    num_vertices: usize,
    selections: &[EdgeSelection],
    column: &[Rational64],
    basis_index: usize,
) -> DehnEquation {
    let mut assembled = DVector::zeros(3 * num_vertices);
    let mut terms = Vec::new();
    let mut magnitude = 0.0;
    for (e, (sel, &alpha)) in selections.iter().zip(column).enumerate() {
        if alpha.is_zero() {
            continue;
        }
        let a = to_f64(&alpha);
        let t = sel.selection.triple;
        let f = sel.frame;
        let mut add = |v: usize, g: crate::Vec3| {
            for k in 0..3 {
                assembled[3 * v + k] += g[k];
            }
        };
        add(f.y, t.g * a);
        add(f.z1, t.g_prime * a);
        add(f.z2, t.g_double_prime * a);
        add(f.x, -(t.g + t.g_prime + t.g_double_prime) * a);
        magnitude += a.abs() * t.l1_norm();
        terms.push(EdgeTerm {
            edge: e,
            alpha,
            frame: f,
            selection: sel.selection,
        });
    }
    DehnEquation {
        basis_index,
        terms,
        assembled,
        magnitude,
    }
}

pub fn dehn_equations(
    p: &Polyhedron,
    decomp: &LengthDecomposition,
    opts: &DehnOptions,
) -> Result<Vec<DehnEquation>, DehnError> {
    check_decomposition_shape(p, decomp)?;
    let sel = edge_selections(p, opts.policy, opts.trig_tol)?;
    Ok((0..decomp.basis().len())
        .map(|j| assemble_equation(p.num_vertices(), &sel, &decomp.column(j), j))
        .collect())
}

fn check_decomposition_shape(p: &Polyhedron, decomp: &LengthDecomposition) -> Result<(), DehnError> {
    if decomp.coeffs().len() != p.num_edges() {
        return Err(DehnError::InvalidDecomposition(format!(
            "decomposition covers {} edges, mesh has {}",
            decomp.coeffs().len(),
            p.num_edges()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EdgeVariant {
    pub edge: usize,
    pub variant: GVariant,
}

#[derive(Clone, Debug, Serialize)]
pub struct DehnReport {
    pub labels: Vec<String>,
    pub residuals: Vec<f64>,
    /// Per equation, `magnitude * max speed`.
    pub scales: Vec<f64>,
    pub pass: Vec<bool>,
    pub all_pass: bool,
    pub dehn_tol: f64,
    pub policy: BranchPolicy,
    pub policy_used: Vec<EdgeVariant>,
}

impl DehnReport {
    /// 1-based indices of failing equations.
    pub fn failed(&self) -> Vec<usize> {
        self.pass.iter().enumerate().filter(|(_, ok)| !**ok).map(|(j, _)| j + 1).collect()
    }
}

pub fn evaluate_dehn(
    p: &Polyhedron,
    decomp: &LengthDecomposition,
    flex: &FirstOrderFlex,
    opts: &DehnOptions,
) -> Result<DehnReport, DehnError> {
    let violation = first_order_violation(p, flex)?;
    if violation > opts.flex_tol {
        return Err(GeometryError::NotAFirstOrderFlex { max_residual: violation }.into());
    }
    let eqs = dehn_equations(p, decomp, opts)?;
    let speed = flex.max_speed();
    let residuals: Vec<f64> = eqs.iter().map(|q| q.evaluate_terms(flex)).collect();
    let scales: Vec<f64> = eqs.iter().map(|q| q.magnitude * speed).collect();
    let pass: Vec<bool> = residuals
        .iter()
        .zip(&scales)
        .map(|(r, s)| r.abs() <= opts.dehn_tol * s)
        .collect();
    let sel = edge_selections(p, opts.policy, opts.trig_tol)?;
    Ok(DehnReport {
        labels: decomp.basis().elements().iter().map(|e| e.label.clone()).collect(),
        all_pass: pass.iter().all(|&b| b),
        residuals,
        scales,
        pass,
        dehn_tol: opts.dehn_tol,
        policy: opts.policy,
        policy_used: sel
            .iter()
            .enumerate()
            .map(|(edge, s)| EdgeVariant {
                edge,
                variant: s.selection.variant,
            })
            .collect(),
    })
}

/// `sum_e alpha[e][j] * phi_e` for every `j`.
pub fn dehn_expression_values(p: &Polyhedron, decomp: &LengthDecomposition) -> Result<Vec<f64>, DehnError> {
    check_decomposition_shape(p, decomp)?;
    let frames = check_hypotheses(p)?;
    let phis = frames
        .iter()
        .map(|f| dihedral_data(p, f).map(|d| d.phi))
        .collect::<Result<Vec<f64>, GeometryError>>()?;
    Ok((0..decomp.basis().len())
        .map(|j| phis.iter().enumerate().map(|(e, phi)| to_f64(&decomp.alpha(e, j)) * phi).sum())
        .collect())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BranchDiscrepancy {
    pub edge: usize,
    /// r-contraction minus s-contraction.
    pub discrepancy: f64,
    /// `(|r|_1 + |s|_1) * max speed`.
    pub scale: f64,
}

/// r- versus s-triple contractions on every edge that carries a nonzero
/// coefficient and has both branches defined at `trig_tol`.
pub fn per_edge_branch_consistency(
    p: &Polyhedron,
    decomp: &LengthDecomposition,
    flex: &FirstOrderFlex,
    trig_tol: f64,
) -> Result<Vec<BranchDiscrepancy>, DehnError> {
    check_decomposition_shape(p, decomp)?;
    let frames = check_hypotheses(p)?;
    let speed = flex.max_speed();
    let mut out = Vec::new();
    for (e, frame) in frames.iter().enumerate() {
        if decomp.coeffs()[e].iter().all(|a| a.is_zero()) {
            continue;
        }
        let set = rs_vectors(&EdgeQuad::from_frame(p, frame), trig_tol)?;
        if let (Some(r), Some(s)) = (set.r, set.s) {
            let v = EdgeQuad::from_points(&flex.velocities, frame);
            out.push(BranchDiscrepancy {
                edge: e,
                discrepancy: r.contract(&v) - s.contract(&v),
                scale: (r.l1_norm() + s.l1_norm()) * speed,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{bipyramid_q, bricard_octahedron, regular_tetrahedron, v5_flex};
    use crate::flex::{flex_space, trivial_motions, DEFAULT_RANK_TOL};
    use crate::Vec3;

    fn q_basis() -> LengthBasis {
        LengthBasis::new(vec![
            BasisElement {
                label: "1".into(),
                value: 1.0,
            },
            BasisElement {
                label: "4sqrt3-3".into(),
                value: 4.0 * 3f64.sqrt() - 3.0,
            },
        ])
        .unwrap()
    }

    fn q_decomp() -> (Polyhedron, LengthDecomposition) {
        let q = bipyramid_q();
        let d = decompose_lengths(&q, &q_basis(), DEFAULT_DECOMP_TOL, DEFAULT_MAX_DENOMINATOR).unwrap();
        (q, d)
    }

    fn r(n: i64) -> Rational64 {
        Rational64::from_integer(n)
    }

    #[test]
    fn bipyramid_coefficients() {
        let (q, d) = q_decomp();
        let short = q.edge_id(1, 4).unwrap();
        for e in 0..q.num_edges() {
            let ell = q.edge_length(e);
            let expected = if e == short {
                vec![r(0), r(1)]
            } else {
                vec![r(ell.round() as i64), r(0)]
            };
            assert_eq!(d.coeffs()[e], expected, "edge {e}");
        }
    }

    #[test]
    fn tetra_over_unit_basis() {
        let t = regular_tetrahedron(1.0);
        let basis = LengthBasis::from_values(&[1.0]).unwrap();
        let d = decompose_lengths(&t, &basis, DEFAULT_DECOMP_TOL, DEFAULT_MAX_DENOMINATOR).unwrap();
        assert!(d.coeffs().iter().all(|row| row == &vec![r(1)]));
    }

    #[test]
    fn irrational_length_fails_over_unit_basis() {
        let q = bipyramid_q();
        let basis = LengthBasis::from_values(&[1.0]).unwrap();
        match decompose_lengths(&q, &basis, DEFAULT_DECOMP_TOL, DEFAULT_MAX_DENOMINATOR) {
            Err(DehnError::DecompositionFailed { edge, .. }) => assert_eq!(edge, q.edge_id(1, 4).unwrap()),
            other => panic!("{other:?}"),
        }
        // The best admissible approximation misses by far more than the tolerance.
        let ell = 4.0 * 3f64.sqrt() - 3.0;
        let a = best_rational(ell, DEFAULT_MAX_DENOMINATOR).unwrap();
        assert!((to_f64(&a) - ell).abs() > 1e3 * DEFAULT_DECOMP_TOL * ell);
    }

    #[test]
    fn two_term_decomposition() {
        let s2 = 2f64.sqrt();
        let row = decompose_length(1.5 + 2.0 * s2 / 3.0, &[1.0, s2], DEFAULT_DECOMP_TOL, DEFAULT_MAX_DENOMINATOR).unwrap();
        assert_eq!(row, vec![Rational64::new(3, 2), Rational64::new(2, 3)]);
    }

    #[test]
    fn basis_validation() {
        assert!(LengthBasis::from_values(&[]).is_err());
        assert!(LengthBasis::from_values(&[1.0, -2.0]).is_err());
        assert!(LengthBasis::from_values(&[1.0, 1.0]).is_err());
        let json = serde_json::to_string(&q_basis()).unwrap();
        let back: LengthBasis = serde_json::from_str(&json).unwrap();
        assert_eq!(back, q_basis());
        assert!(serde_json::from_str::<LengthBasis>(r#"[{"label":"x","value":0.0}]"#).is_err());
    }

    #[test]
    fn auto_basis_for_fixtures() {
        let q = bipyramid_q();
        let b = auto_basis(&q, DEFAULT_DECOMP_TOL, DEFAULT_MAX_DENOMINATOR);
        assert_eq!(b.len(), 2);
        assert!(decompose_lengths(&q, &b, DEFAULT_DECOMP_TOL, DEFAULT_MAX_DENOMINATOR).is_ok());
        let br = bricard_octahedron();
        assert_eq!(auto_basis(&br, DEFAULT_DECOMP_TOL, DEFAULT_MAX_DENOMINATOR).len(), 5);
    }

    #[test]
    fn flat_edge_equation_support_and_residual() {
        let (q, d) = q_decomp();
        let eqs = dehn_equations(&q, &d, &DehnOptions::default()).unwrap();
        let eq = &eqs[1];
        assert_eq!(eq.terms.len(), 1);
        let support: Vec<usize> = (0..5).filter(|&v| (0..3).any(|k| eq.assembled[3 * v + k] != 0.0)).collect();
        assert!(support.iter().all(|v| [1, 2, 3, 4].contains(v)));
        assert!(support.contains(&4));
        let rep = evaluate_dehn(&q, &d, &v5_flex(), &DehnOptions::default()).unwrap();
        let s3 = 3f64.sqrt();
        assert!((rep.residuals[1] + (8.0 + 2.0 * s3) / 13.0).abs() < 1e-12);
        assert!(!rep.pass[1]);
        // sum_e l_e Phi_e vanishes on any first-order flex, which ties the
        // two residuals together.
        let lambda = q_basis().values();
        assert!((lambda[0] * rep.residuals[0] + lambda[1] * rep.residuals[1]).abs() < 1e-12);
        assert_eq!(rep.failed(), vec![1, 2]);
        let term = eq.evaluate_terms(&v5_flex());
        assert!((term - rep.residuals[1]).abs() < 1e-14);
    }

    #[test]
    fn zero_flex_and_zero_column() {
        let (q, d) = q_decomp();
        let rep = evaluate_dehn(&q, &d, &FirstOrderFlex::zeros(5), &DehnOptions::default()).unwrap();
        assert!(rep.all_pass);
        assert!(rep.residuals.iter().all(|&x| x == 0.0));
        let sel = edge_selections(&q, BranchPolicy::PreferStable, DEFAULT_TRIG_TOL).unwrap();
        let eq = assemble_equation(5, &sel, &vec![r(0); q.num_edges()], 0);
        assert!(eq.assembled.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn trivial_motions_annihilated() {
        for p in [bipyramid_q(), bricard_octahedron(), regular_tetrahedron(2.0)] {
            let b = auto_basis(&p, DEFAULT_DECOMP_TOL, DEFAULT_MAX_DENOMINATOR);
            let d = decompose_lengths(&p, &b, DEFAULT_DECOMP_TOL, DEFAULT_MAX_DENOMINATOR).unwrap();
            let eqs = dehn_equations(&p, &d, &DehnOptions::default()).unwrap();
            for t in trivial_motions(&p).unwrap() {
                for eq in &eqs {
                    assert!(eq.evaluate(&t).abs() < 1e-9 * eq.magnitude.max(1.0));
                }
            }
        }
    }

    #[test]
    fn rejects_non_flex() {
        let (q, d) = q_decomp();
        let mut f = FirstOrderFlex::zeros(5);
        f.velocities[0] = Vec3::new(1.0, 0.0, 0.0);
        assert!(matches!(
            evaluate_dehn(&q, &d, &f, &DehnOptions::default()),
            Err(DehnError::Geometry(GeometryError::NotAFirstOrderFlex { .. }))
        ));
    }

    #[test]
    fn expression_values() {
        let (q, d) = q_decomp();
        let v = dehn_expression_values(&q, &d).unwrap();
        assert!((v[1] - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn bricard_kernel_flex_passes() {
        let p = bricard_octahedron();
        let fs = flex_space(&p, DEFAULT_RANK_TOL).unwrap();
        let b = auto_basis(&p, DEFAULT_DECOMP_TOL, DEFAULT_MAX_DENOMINATOR);
        let d = decompose_lengths(&p, &b, DEFAULT_DECOMP_TOL, DEFAULT_MAX_DENOMINATOR).unwrap();
        let rep = evaluate_dehn(&p, &d, &fs.nontrivial_basis[0], &DehnOptions::default()).unwrap();
        assert!(rep.all_pass, "{:?}", rep.residuals);
        for c in per_edge_branch_consistency(&p, &d, &fs.nontrivial_basis[0], DEFAULT_TRIG_TOL).unwrap() {
            assert!(c.discrepancy.abs() <= 1e-7 * c.scale);
        }
    }

    #[test]
    fn flat_edge_skipped_in_branch_consistency() {
        let (q, d) = q_decomp();
        let c = per_edge_branch_consistency(&q, &d, &v5_flex(), DEFAULT_TRIG_TOL).unwrap();
        // The three edges at the inner vertex are flat.
        assert_eq!(c.len(), 6);
        for v in [1, 2, 3] {
            let flat = q.edge_id(v, 4).unwrap();
            assert!(c.iter().all(|x| x.edge != flat));
        }
    }
}
