//! Minors of the rigidity matrix and their rates of change along a
//! first-order flex.
//!
//! Every entry of the rigidity matrix is a coordinate difference, so along
//! `p + t v` the matrix is `R + t R_v` with `R_v` built from the
//! velocities. The derivative of a minor at `t = 0` is therefore exact:
//! the sum over rows `a` of the determinant with row `a` replaced by the
//! matching row of `R_v`.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::MinorError;
use crate::flex::{first_order_violation, project_out_trivial, FirstOrderFlex, RigidityMatrix, DEFAULT_FLEX_TOL};
use crate::linalg::det_in_place;
use crate::mesh::Polyhedron;
use crate::par::{map_indexed, Execution};

pub use crate::flex::rank_profile;

pub const DEFAULT_VALUE_TOL: f64 = 1e-9;
pub const DEFAULT_DERIV_TOL: f64 = 1e-8;
/// Largest minor count accepted for full enumeration.
pub const FULL_ENUMERATION_CAP: u128 = 10_000_000;
pub const DEFAULT_SAMPLE_COUNT: usize = 100_000;
pub const DEFAULT_SEED: u64 = 0x5eed_f1e8_6a7e_0001;
/// Offender lists keep at most this many entries.
pub const MAX_OFFENDERS: usize = 100;

const CHUNK: u128 = 2048;

/// Sorted row (edge) and column (vertex coordinate) sets of equal size.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct MinorIndex {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl MinorIndex {
    pub fn new(rows: Vec<usize>, cols: Vec<usize>) -> Self {
        MinorIndex { rows, cols }
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self, nrows: usize, ncols: usize) -> Result<(), MinorError> {
        if self.rows.len() != self.cols.len() || self.rows.is_empty() {
            return Err(MinorError::IndexOutOfRange(format!(
                "{} rows and {} columns",
                self.rows.len(),
                self.cols.len()
            )));
        }
        for (name, set, bound) in [("row", &self.rows, nrows), ("column", &self.cols, ncols)] {
            if set.windows(2).any(|w| w[0] >= w[1]) {
                return Err(MinorError::IndexOutOfRange(format!("{name} set is not strictly increasing")));
            }
            if let Some(&last) = set.last() {
                if last >= bound {
                    return Err(MinorError::IndexOutOfRange(format!("{name} {last} >= {bound}")));
                }
            }
        }
        Ok(())
    }
}

/// Determinant of the selected submatrix.
pub fn minor_value(r: &RigidityMatrix, idx: &MinorIndex) -> Result<f64, MinorError> {
    idx.validate(r.rows(), r.cols())?;
    let k = idx.k();
    let mut buf = vec![0.0; k * k];
    fill(&r.matrix, &idx.rows, &idx.cols, &mut buf);
    Ok(det_in_place(&mut buf, k))
}

/// `d/dt` at `t = 0` of the minor along `p + t v`.
pub fn minor_directional_derivative(p: &Polyhedron, flex: &FirstOrderFlex, idx: &MinorIndex) -> Result<f64, MinorError> {
    let r = RigidityMatrix::new(p);
    idx.validate(r.rows(), r.cols())?;
    let rd = RigidityMatrix::velocity_matrix(p, flex)?;
    let mut ws = Workspace::new(idx.k());
    Ok(ws.evaluate(&r.matrix, &rd.matrix, &idx.rows, &idx.cols).derivative)
}

/// Value, derivative and both Hadamard scales of one minor.
pub fn minor_entry(p: &Polyhedron, flex: &FirstOrderFlex, idx: &MinorIndex) -> Result<MinorEntry, MinorError> {
    let r = RigidityMatrix::new(p);
    idx.validate(r.rows(), r.cols())?;
    let rd = RigidityMatrix::velocity_matrix(p, flex)?;
    let e = Workspace::new(idx.k()).evaluate(&r.matrix, &rd.matrix, &idx.rows, &idx.cols);
    Ok(MinorEntry {
        rows: idx.rows.clone(),
        cols: idx.cols.clone(),
        value: e.value,
        derivative: e.derivative,
        value_scale: e.value_scale,
        derivative_scale: e.derivative_scale,
    })
}

/// Smallest `k` for which every `k x k` minor vanishes.
pub fn minimal_vanishing_size(r: &RigidityMatrix, rank_tol: f64) -> usize {
    rank_profile(r, rank_tol).0 + 1
}

fn fill(m: &DMatrix<f64>, rows: &[usize], cols: &[usize], out: &mut [f64]) {
    let k = rows.len();
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            out[a * k + b] = m[(i, j)];
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Eval {
    value: f64,
    derivative: f64,
    value_scale: f64,
    derivative_scale: f64,
}

struct Workspace {
    k: usize,
    m: Vec<f64>,
    md: Vec<f64>,
    tmp: Vec<f64>,
    norms: Vec<f64>,
    dnorms: Vec<f64>,
}

impl Workspace {
    fn new(k: usize) -> Self {
        Workspace {
            k,
            m: vec![0.0; k * k],
            md: vec![0.0; k * k],
            tmp: vec![0.0; k * k],
            norms: vec![0.0; k],
            dnorms: vec![0.0; k],
        }
    }

    fn evaluate(&mut self, r: &DMatrix<f64>, rd: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> Eval {
        let k = self.k;
        fill(r, rows, cols, &mut self.m);
        fill(rd, rows, cols, &mut self.md);
        for a in 0..k {
            self.norms[a] = row_norm(&self.m[a * k..(a + 1) * k]);
            self.dnorms[a] = row_norm(&self.md[a * k..(a + 1) * k]);
        }
        self.tmp.copy_from_slice(&self.m);
        let value = det_in_place(&mut self.tmp, k);
        let mut derivative = 0.0;
        for a in 0..k {
            if self.dnorms[a] == 0.0 {
                continue;
            }
            self.tmp.copy_from_slice(&self.m);
            self.tmp[a * k..(a + 1) * k].copy_from_slice(&self.md[a * k..(a + 1) * k]);
            derivative += det_in_place(&mut self.tmp, k);
        }
        // Hadamard bounds for the value and for each replaced determinant.
        let value_scale: f64 = self.norms.iter().product();
        let mut derivative_scale = 0.0;
        let mut prefix = 1.0;
        for a in 0..k {
            let suffix: f64 = self.norms[a + 1..].iter().product();
            derivative_scale += self.dnorms[a] * prefix * suffix;
            prefix *= self.norms[a];
        }
        Eval {
            value,
            derivative,
            value_scale,
            derivative_scale,
        }
    }
}

fn row_norm(row: &[f64]) -> f64 {
    row.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

/// The `rank`-th `k`-subset of `0..n` in lexicographic order.
fn unrank(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut c = 0;
    for i in 0..k {
        loop {
            let count = binomial(n - c - 1, k - i - 1);
            if rank < count {
                break;
            }
            rank -= count;
            c += 1;
        }
        out.push(c);
        c += 1;
    }
    out
}

/// Advances to the next `k`-subset in lexicographic order.
fn next_combination(a: &mut [usize], n: usize) -> bool {
    let k = a.len();
    let Some(i) = (0..k).rev().find(|&i| a[i] < n - k + i) else {
        return false;
    };
    a[i] += 1;
    for j in i + 1..k {
        a[j] = a[j - 1] + 1;
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Strategy {
    Full,
    Sampled { count: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug)]
pub struct MinorOptions {
    pub k: usize,
    pub strategy: Strategy,
    pub value_tol: f64,
    pub deriv_tol: f64,
    pub flex_tol: f64,
    /// Evaluate on the flex with its rigid-motion component removed.
    pub project_trivial: bool,
    pub exec: Execution,
}

impl MinorOptions {
    pub fn new(k: usize) -> Self {
        MinorOptions {
            k,
            strategy: Strategy::Full,
            value_tol: DEFAULT_VALUE_TOL,
            deriv_tol: DEFAULT_DERIV_TOL,
            flex_tol: DEFAULT_FLEX_TOL,
            project_trivial: false,
            exec: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinorEntry {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub value: f64,
    pub derivative: f64,
    pub value_scale: f64,
    pub derivative_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinorReport {
    pub k: usize,
    pub strategy: Strategy,
    pub evaluated: u64,
    pub max_abs_value: f64,
    pub max_abs_derivative: f64,
    /// Largest `|value| / value_scale`.
    pub max_rel_value: f64,
    /// Largest `|derivative| / derivative_scale`.
    pub max_rel_derivative: f64,
    pub nonvanishing_values: u64,
    pub nonstationary: u64,
    /// Minors that vanish at `t = 0` but whose derivative does not.
    pub nonstationary_vanishing: u64,
    pub all_values_vanish: bool,
    pub all_derivatives_vanish: bool,
    pub value_tol: f64,
    pub deriv_tol: f64,
    pub rank: usize,
    /// `rank + 1`: the smallest size at which every minor vanishes.
    pub minimal_vanishing_size: usize,
    pub trivial_projected: bool,
    /// Non-stationary minors, in enumeration order.
    pub offenders: Vec<MinorEntry>,
    /// Non-vanishing minors, in enumeration order.
    pub value_offenders: Vec<MinorEntry>,
}

#[derive(Clone, Debug, Default)]
struct Agg {
    evaluated: u64,
    max_abs_value: f64,
    max_abs_derivative: f64,
    max_rel_value: f64,
    max_rel_derivative: f64,
    nonvanishing_values: u64,
    nonstationary: u64,
    nonstationary_vanishing: u64,
    offenders: Vec<MinorEntry>,
    value_offenders: Vec<MinorEntry>,
}

impl Agg {
    fn push(&mut self, rows: &[usize], cols: &[usize], e: Eval, value_tol: f64, deriv_tol: f64) {
        self.evaluated += 1;
        self.max_abs_value = self.max_abs_value.max(e.value.abs());
        self.max_abs_derivative = self.max_abs_derivative.max(e.derivative.abs());
        if e.value_scale > 0.0 {
            self.max_rel_value = self.max_rel_value.max(e.value.abs() / e.value_scale);
        }
        if e.derivative_scale > 0.0 {
            self.max_rel_derivative = self.max_rel_derivative.max(e.derivative.abs() / e.derivative_scale);
        }
        let value_bad = e.value.abs() > value_tol * e.value_scale;
        let deriv_bad = e.derivative.abs() > deriv_tol * e.derivative_scale;
        let entry = || MinorEntry {
            rows: rows.to_vec(),
            cols: cols.to_vec(),
            value: e.value,
            derivative: e.derivative,
            value_scale: e.value_scale,
            derivative_scale: e.derivative_scale,
        };
        if value_bad {
            self.nonvanishing_values += 1;
            if self.value_offenders.len() < MAX_OFFENDERS {
                self.value_offenders.push(entry());
            }
        }
        if deriv_bad {
            self.nonstationary += 1;
            if !value_bad {
                self.nonstationary_vanishing += 1;
            }
            if self.offenders.len() < MAX_OFFENDERS {
                self.offenders.push(entry());
            }
        }
    }

    fn merge(mut self, other: Agg) -> Agg {
        self.evaluated += other.evaluated;
        self.max_abs_value = self.max_abs_value.max(other.max_abs_value);
        self.max_abs_derivative = self.max_abs_derivative.max(other.max_abs_derivative);
        self.max_rel_value = self.max_rel_value.max(other.max_rel_value);
        self.max_rel_derivative = self.max_rel_derivative.max(other.max_rel_derivative);
        self.nonvanishing_values += other.nonvanishing_values;
        self.nonstationary += other.nonstationary;
        self.nonstationary_vanishing += other.nonstationary_vanishing;
        for (dst, src) in [(&mut self.offenders, other.offenders), (&mut self.value_offenders, other.value_offenders)] {
            let room = MAX_OFFENDERS - dst.len();
            dst.extend(src.into_iter().take(room));
        }
        self
    }
}

pub fn minor_stationarity_report(
    p: &Polyhedron,
    flex: &FirstOrderFlex,
    opts: &MinorOptions,
) -> Result<MinorReport, MinorError> {
    let violation = first_order_violation(p, flex)?;
    if violation > opts.flex_tol {
        return Err(MinorError::NotAFirstOrderFlex { max_residual: violation });
    }
    let flex = if opts.project_trivial {
        project_out_trivial(p, flex)?
    } else {
        flex.clone()
    };
    let r = RigidityMatrix::new(p);
    let rd = RigidityMatrix::velocity_matrix(p, &flex)?;
    let (nr, nc, k) = (r.rows(), r.cols(), opts.k);
    if k == 0 || k > nr.min(nc) {
        return Err(MinorError::IndexOutOfRange(format!("minor size {k} for a {nr} x {nc} matrix")));
    }
    let (rank, _) = rank_profile(&r, crate::flex::DEFAULT_RANK_TOL);
    let row_count = binomial(nr, k);
    let col_count = binomial(nc, k);
    let total = row_count * col_count;
    let (vt, dt) = (opts.value_tol, opts.deriv_tol);

    let agg = match opts.strategy {
        Strategy::Full => {
            if total > FULL_ENUMERATION_CAP {
                return Err(MinorError::EnumerationTooLarge {
                    count: total,
                    cap: FULL_ENUMERATION_CAP,
                });
            }
            let chunks = total.div_ceil(CHUNK) as usize;
            let parts = map_indexed(opts.exec, chunks, |c| {
                let start = c as u128 * CHUNK;
                let end = (start + CHUNK).min(total);
                let mut rows = unrank(nr, k, start / col_count);
                let mut cols = unrank(nc, k, start % col_count);
                let mut ws = Workspace::new(k);
                let mut agg = Agg::default();
                for _ in start..end {
                    let e = ws.evaluate(&r.matrix, &rd.matrix, &rows, &cols);
                    agg.push(&rows, &cols, e, vt, dt);
                    if !next_combination(&mut cols, nc) {
                        next_combination(&mut rows, nr);
                        cols = (0..k).collect();
                    }
                }
                agg
            });
            parts.into_iter().fold(Agg::default(), Agg::merge)
        }
        Strategy::Sampled { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draws: Vec<(Vec<usize>, Vec<usize>)> = (0..count)
                .map(|_| {
                    let mut rows = sample(&mut rng, nr, k).into_vec();
                    let mut cols = sample(&mut rng, nc, k).into_vec();
                    rows.sort_unstable();
                    cols.sort_unstable();
                    (rows, cols)
                })
                .collect();
            let chunk = CHUNK as usize;
            let parts = map_indexed(opts.exec, draws.len().div_ceil(chunk), |c| {
                let mut ws = Workspace::new(k);
                let mut agg = Agg::default();
                for (rows, cols) in &draws[c * chunk..((c + 1) * chunk).min(draws.len())] {
                    let e = ws.evaluate(&r.matrix, &rd.matrix, rows, cols);
                    agg.push(rows, cols, e, vt, dt);
                }
                agg
            });
            parts.into_iter().fold(Agg::default(), Agg::merge)
        }
    };

    Ok(MinorReport {
        k,
        strategy: opts.strategy,
        evaluated: agg.evaluated,
        max_abs_value: agg.max_abs_value,
        max_abs_derivative: agg.max_abs_derivative,
        max_rel_value: agg.max_rel_value,
        max_rel_derivative: agg.max_rel_derivative,
        nonvanishing_values: agg.nonvanishing_values,
        nonstationary: agg.nonstationary,
        nonstationary_vanishing: agg.nonstationary_vanishing,
        all_values_vanish: agg.nonvanishing_values == 0,
        all_derivatives_vanish: agg.nonstationary == 0,
        value_tol: vt,
        deriv_tol: dt,
        rank,
        minimal_vanishing_size: rank + 1,
        trivial_projected: opts.project_trivial,
        offenders: agg.offenders,
        value_offenders: agg.value_offenders,
    })
}
