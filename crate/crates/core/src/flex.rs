//! Rigidity matrix, first-order flexes and the kernel analysis that decides
//! infinitesimal flexibility.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::FlexError;
use crate::linalg::{numerical_rank, orthonormalize, right_svd};
use crate::mesh::{Edge, Polyhedron};
use crate::Vec3;

/// Default relative cutoff on singular values.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;
/// Default per-edge tolerance for the first-order flex equations.
pub const DEFAULT_FLEX_TOL: f64 = 1e-9;
/// Default tolerance for the non-edge stationarity test.
pub const DEFAULT_NONTRIVIAL_TOL: f64 = 1e-9;

/// One velocity per vertex, in mesh order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderFlex {
    #[serde(with = "vec3_list")]
    pub velocities: Vec<Vec3>,
}

impl FirstOrderFlex {
    pub fn new(velocities: Vec<Vec3>) -> Self {
        FirstOrderFlex { velocities }
    }

    pub fn zeros(n: usize) -> Self {
        FirstOrderFlex { velocities: vec![Vec3::zeros(); n] }
    }

    /// Uniform translation of every vertex.
    pub fn translation(n: usize, t: Vec3) -> Self {
        FirstOrderFlex { velocities: vec![t; n] }
    }

    /// Infinitesimal rotation `omega x (p - center)`.
    pub fn rotation(p: &Polyhedron, omega: Vec3, center: Vec3) -> Self {
        FirstOrderFlex {
            velocities: p.vertices().iter().map(|q| omega.cross(&(q - center))).collect(),
        }
    }

    pub fn from_dvector(v: &DVector<f64>) -> Self {
        assert_eq!(v.len() % 3, 0);
        FirstOrderFlex {
            velocities: (0..v.len() / 3).map(|i| Vec3::new(v[3 * i], v[3 * i + 1], v[3 * i + 2])).collect(),
        }
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_iterator(self.velocities.len() * 3, self.velocities.iter().flat_map(|v| v.iter().copied()))
    }

    pub fn len(&self) -> usize {
        self.velocities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }

    pub fn max_speed(&self) -> f64 {
        self.velocities.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        FirstOrderFlex {
            velocities: self.velocities.iter().map(|v| v * c).collect(),
        }
    }

    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        FirstOrderFlex {
            velocities: self.velocities.iter().zip(&other.velocities).map(|(u, w)| u * a + w * b).collect(),
        }
    }

    pub(crate) fn check_against(&self, p: &Polyhedron) -> Result<(), FlexError> {
        if self.velocities.len() != p.num_vertices() {
            return Err(FlexError::SizeMismatch {
                expected: p.num_vertices(),
                got: self.velocities.len(),
            });
        }
        if let Some(i) = self.velocities.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(FlexError::NonFinite(i));
        }
        Ok(())
    }
}

/// The `E x 3V` matrix of the linearized edge-length equations.
///
/// Row `e` for edge `(i, j)` holds `p_i - p_j` in the columns of vertex `i`
/// and `p_j - p_i` in the columns of vertex `j`; column `3 * v + axis`.
#[derive(Clone, Debug)]
pub struct RigidityMatrix {
    pub matrix: DMatrix<f64>,
    pub row_edge: Vec<Edge>,
}

impl RigidityMatrix {
    pub fn new(p: &Polyhedron) -> Self {
        Self::from_points(p, p.vertices())
    }

    /// The entrywise t-derivative of the rigidity matrix along `p + t v`;
    /// entries are linear in positions, so this is the same pattern built
    /// from the velocities.
    pub fn velocity_matrix(p: &Polyhedron, flex: &FirstOrderFlex) -> Result<Self, FlexError> {
        flex.check_against(p)?;
        Ok(Self::from_points(p, &flex.velocities))
    }

    fn from_points(p: &Polyhedron, pts: &[Vec3]) -> Self {
        let n = pts.len();
        let mut matrix = DMatrix::zeros(p.num_edges(), 3 * n);
        for (row, e) in p.edges().iter().enumerate() {
            let d = pts[e.lo] - pts[e.hi];
            for a in 0..3 {
                matrix[(row, 3 * e.lo + a)] = d[a];
                matrix[(row, 3 * e.hi + a)] = -d[a];
            }
        }
        RigidityMatrix {
            matrix,
            row_edge: p.edges().to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn col_vertex_axis(col: usize) -> (usize, usize) {
        (col / 3, col % 3)
    }
}

/// Per edge, `(p_hi - p_lo) . (v_hi - v_lo)`.
pub fn edge_length_residuals(p: &Polyhedron, flex: &FirstOrderFlex) -> Result<Vec<f64>, FlexError> {
    flex.check_against(p)?;
    let v = &flex.velocities;
    Ok(p
        .edges()
        .iter()
        .map(|e| (p.vertex(e.hi) - p.vertex(e.lo)).dot(&(v[e.hi] - v[e.lo])))
        .collect())
}

/// Largest `|residual| / (length * max speed)` over edges; zero for the
/// zero flex.
pub fn first_order_violation(p: &Polyhedron, flex: &FirstOrderFlex) -> Result<f64, FlexError> {
    let res = edge_length_residuals(p, flex)?;
    let speed = flex.max_speed();
    if speed == 0.0 {
        return Ok(0.0);
    }
    Ok(res
        .iter()
        .enumerate()
        .map(|(e, r)| r.abs() / (p.edge_length(e) * speed))
        .fold(0.0, f64::max))
}

pub fn is_first_order_flex(p: &Polyhedron, flex: &FirstOrderFlex, flex_tol: f64) -> Result<bool, FlexError> {
    Ok(first_order_violation(p, flex)? <= flex_tol)
}

/// Three unit translations and three rotations about the centroid,
/// orthonormalized in the `3V` coordinate inner product.
pub fn trivial_motions(p: &Polyhedron) -> Result<Vec<FirstOrderFlex>, FlexError> {
    let n = p.num_vertices();
    let centroid = p.vertices().iter().sum::<Vec3>() / n as f64;
    let mut raw = Vec::with_capacity(6);
    for k in 0..3 {
        raw.push(FirstOrderFlex::translation(n, Vec3::ith(k, 1.0)).to_dvector());
    }
    for k in 0..3 {
        raw.push(FirstOrderFlex::rotation(p, Vec3::ith(k, 1.0), centroid).to_dvector());
    }
    let basis = orthonormalize(&raw, 1e-10);
    if basis.len() < 6 {
        return Err(FlexError::DegenerateVertexSet);
    }
    Ok(basis.iter().map(FirstOrderFlex::from_dvector).collect())
}

/// Removes the component along rigid motions (Euclidean `3V` projection).
pub fn project_out_trivial(p: &Polyhedron, flex: &FirstOrderFlex) -> Result<FirstOrderFlex, FlexError> {
    flex.check_against(p)?;
    let mut v = flex.to_dvector();
    for t in trivial_motions(p)? {
        let t = t.to_dvector();
        let c = t.dot(&v);
        v.axpy(-c, &t, 1.0);
    }
    Ok(FirstOrderFlex::from_dvector(&v))
}

#[derive(Clone, Debug, Serialize)]
pub struct FlexSpaceReport {
    pub kernel_dim: usize,
    pub rank: usize,
    pub infinitesimally_flexible: bool,
    pub singular_values: Vec<f64>,
    pub trivial_basis: Vec<FirstOrderFlex>,
    /// Orthonormal basis of `kernel ∩ (rigid motions)^⊥`.
    pub nontrivial_basis: Vec<FirstOrderFlex>,
}

/// Numerical rank and singular values of a rigidity matrix.
pub fn rank_profile(r: &RigidityMatrix, rank_tol: f64) -> (usize, Vec<f64>) {
    let svd = right_svd(&r.matrix);
    let rank = numerical_rank(&svd.singular_values, rank_tol);
    (rank, svd.singular_values[..svd.genuine].to_vec())
}

pub fn flex_space(p: &Polyhedron, rank_tol: f64) -> Result<FlexSpaceReport, FlexError> {
    let r = RigidityMatrix::new(p);
    let n = r.cols();
    let svd = right_svd(&r.matrix);
    let rank = numerical_rank(&svd.singular_values, rank_tol);
    let kernel_dim = n - rank;
    let trivial = trivial_motions(p)?;

    let nontrivial_basis = if kernel_dim > 6 {
        let t: Vec<DVector<f64>> = trivial.iter().map(|f| f.to_dvector()).collect();
        let mut projected = DMatrix::zeros(n, kernel_dim);
        for (j, k) in (rank..n).enumerate() {
            let mut v: DVector<f64> = svd.right_vectors.column(k).into_owned();
            for q in &t {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
            projected.set_column(j, &v);
        }
        // The projected kernel has rank kernel_dim - 6. Its range is spanned
        // by P v_i for the leading right singular vectors v_i.
        let proj_svd = projected.clone().svd(false, true);
        let v_t = proj_svd.v_t.expect("right singular vectors requested");
        let mut order: Vec<usize> = (0..proj_svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| proj_svd.singular_values[b].total_cmp(&proj_svd.singular_values[a]));
        let raw: Vec<DVector<f64>> = order
            .into_iter()
            .take(kernel_dim - 6)
            .map(|i| &projected * v_t.row(i).transpose())
            .collect();
        orthonormalize(&raw, 0.0)
            .into_iter()
            .map(|u| canonical_sign(FirstOrderFlex::from_dvector(&u)))
            .collect()
    } else {
        Vec::new()
    };

    Ok(FlexSpaceReport {
        kernel_dim,
        rank,
        infinitesimally_flexible: kernel_dim >= 7,
        singular_values: svd.singular_values[..svd.genuine].to_vec(),
        trivial_basis: trivial,
        nontrivial_basis,
    })
}

/// Flips sign so the largest-magnitude component is positive.
fn canonical_sign(f: FirstOrderFlex) -> FirstOrderFlex {
    let v = f.to_dvector();
    let imax = v.iamax();
    if v[imax] < 0.0 {
        f.scaled(-1.0)
    } else {
        f
    }
}

/// True iff some non-adjacent vertex pair has a non-stationary distance.
pub fn is_nontrivial(p: &Polyhedron, flex: &FirstOrderFlex, tol: f64) -> Result<bool, FlexError> {
    flex.check_against(p)?;
    let speed = flex.max_speed();
    if speed == 0.0 {
        return Ok(false);
    }
    let v = &flex.velocities;
    let n = p.num_vertices();
    for i in 0..n {
        for j in i + 1..n {
            if p.edge_id(i, j).is_some() {
                continue;
            }
            let d = p.vertex(i) - p.vertex(j);
            if d.dot(&(v[i] - v[j])).abs() > tol * d.norm() * speed {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

pub(crate) mod vec3_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::Vec3;

    pub fn serialize<S: Serializer>(v: &[Vec3], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<[f64; 3]> = v.iter().map(|p| [p.x, p.y, p.z]).collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec3>, D::Error> {
        let raw: Vec<[f64; 3]> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|[x, y, z]| Vec3::new(x, y, z)).collect())
    }
}
