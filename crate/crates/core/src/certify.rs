//! Runs every necessary condition on one (mesh, flex) pair and combines the
//! outcomes into a single verdict.

use serde::Serialize;

use crate::dehn::{evaluate_dehn, per_edge_branch_consistency, DehnOptions, DehnReport, LengthDecomposition};
use crate::error::{CertifyError, GeometryError};
use crate::flex::{edge_length_residuals, first_order_violation, FirstOrderFlex};
use crate::mesh::{Polyhedron, TopologyStats};
use crate::minors::{minor_stationarity_report, MinorOptions, MinorReport};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_BRANCH_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug)]
pub struct CertifyOptions {
    pub dehn: DehnOptions,
    /// Minor size; `None` means `3V - 6`.
    pub minor_size: Option<usize>,
    pub minors: MinorOptions,
    pub branch_tol: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            dehn: DehnOptions::default(),
            minor_size: None,
            minors: MinorOptions::new(0),
            branch_tol: DEFAULT_BRANCH_TOL,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchSummary {
    pub edges_checked: usize,
    /// Largest `|discrepancy| / scale`.
    pub max_rel_discrepancy: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    NoObstructionFound,
    Obstructed(Vec<String>),
}

#[derive(Clone, Debug, Serialize)]
pub struct CertifyReport {
    pub schema_version: u32,
    pub mesh: TopologyStats,
    pub flex_valid: bool,
    pub max_edge_residual: f64,
    pub max_scaled_edge_residual: f64,
    pub dehn: Option<DehnReport>,
    pub branch_consistency: Option<BranchSummary>,
    pub minors: MinorReport,
    pub verdict: Verdict,
}

impl CertifyReport {
    pub fn obstructed(&self) -> bool {
        matches!(self.verdict, Verdict::Obstructed(_))
    }
}

/// Dehn conditions run only when `decomp` is given. A minor condition fails
/// when some minor vanishes at `t = 0` while its derivative does not.
pub fn certify(
    p: &Polyhedron,
    flex: &FirstOrderFlex,
    decomp: Option<&LengthDecomposition>,
    opts: &CertifyOptions,
) -> Result<CertifyReport, CertifyError> {
    let residuals = edge_length_residuals(p, flex)?;
    let max_edge_residual = residuals.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    let scaled = first_order_violation(p, flex)?;
    if scaled > opts.dehn.flex_tol {
        return Err(GeometryError::NotAFirstOrderFlex { max_residual: scaled }.into());
    }
    let mut failed = Vec::new();

    let (dehn, branch_consistency) = match decomp {
        Some(d) => {
            let rep = evaluate_dehn(p, d, flex, &opts.dehn)?;
            failed.extend(rep.failed().into_iter().map(|j| format!("dehn[{j}]")));
            let entries = per_edge_branch_consistency(p, d, flex, opts.dehn.trig_tol)?;
            let max_rel = entries
                .iter()
                .map(|c| if c.scale > 0.0 { c.discrepancy.abs() / c.scale } else { 0.0 })
                .fold(0.0, f64::max);
            let summary = BranchSummary {
                edges_checked: entries.len(),
                max_rel_discrepancy: max_rel,
                tol: opts.branch_tol,
                pass: max_rel <= opts.branch_tol,
            };
            if !summary.pass {
                failed.push("branch_consistency".into());
            }
            (Some(rep), Some(summary))
        }
        None => (None, None),
    };

    let mut mopts = opts.minors;
    mopts.k = opts.minor_size.unwrap_or(3 * p.num_vertices() - 6);
    mopts.flex_tol = opts.dehn.flex_tol;
    let minors = minor_stationarity_report(p, flex, &mopts)?;
    if minors.nonstationary_vanishing > 0 {
        failed.push(format!("minors[k={}]", minors.k));
    }

    Ok(CertifyReport {
        schema_version: SCHEMA_VERSION,
        mesh: p.topology_stats(),
        flex_valid: true,
        max_edge_residual,
        max_scaled_edge_residual: scaled,
        dehn,
        branch_consistency,
        minors,
        verdict: if failed.is_empty() {
            Verdict::NoObstructionFound
        } else {
            Verdict::Obstructed(failed)
        },
    })
}
