//! File formats: OFF and JSON meshes (with an optional length basis and
//! exact coefficients), flex JSON, and the continuation CSV log.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::dehn::{dehn_expression_values, BasisElement, LengthBasis, LengthDecomposition};
use crate::error::{DehnError, IoError};
use crate::flex::FirstOrderFlex;
use crate::mesh::{OrientationRule, Polyhedron};
use crate::oracle::ContinuationResult;
use crate::Vec3;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeshDocument {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_basis: Option<Vec<BasisElement>>,
    /// Edge key `"i-j"` to one rational string per basis element.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<BTreeMap<String, Vec<String>>>,
}

/// A mesh plus whatever length data its file carried.
#[derive(Clone, Debug)]
pub struct LoadedMesh {
    pub polyhedron: Polyhedron,
    pub basis: Option<LengthBasis>,
    pub alpha: Option<BTreeMap<String, Vec<String>>>,
}

impl MeshDocument {
    pub fn from_polyhedron(p: &Polyhedron) -> Self {
        MeshDocument {
            vertices: p.vertices().iter().map(|v| [v.x, v.y, v.z]).collect(),
            faces: p.faces().iter().map(|f| f.to_vec()).collect(),
            length_basis: None,
            alpha: None,
        }
    }

    pub fn with_decomposition(mut self, p: &Polyhedron, d: &LengthDecomposition) -> Self {
        self.length_basis = Some(d.basis().elements().to_vec());
        self.alpha = Some(alpha_map(p, d));
        self
    }

    pub fn load(self) -> Result<LoadedMesh, IoError> {
        self.load_with(OrientationRule::Auto)
    }

    pub fn load_with(self, rule: OrientationRule) -> Result<LoadedMesh, IoError> {
        let vertices = self.vertices.iter().map(|v| Vec3::new(v[0], v[1], v[2])).collect();
        let polyhedron = Polyhedron::with_orientation(vertices, &self.faces, rule)?;
        let basis = self.length_basis.map(LengthBasis::new).transpose()?;
        if self.alpha.is_some() && basis.is_none() {
            return Err(DehnError::InvalidDecomposition("\"alpha\" given without \"length_basis\"".into()).into());
        }
        Ok(LoadedMesh {
            polyhedron,
            basis,
            alpha: self.alpha,
        })
    }
}

pub fn mesh_to_json(doc: &MeshDocument) -> String {
    serde_json::to_string_pretty(doc).expect("mesh documents always serialize")
}

pub fn parse_mesh_json(text: &str) -> Result<LoadedMesh, IoError> {
    parse_mesh_json_with(text, OrientationRule::Auto)
}

pub fn parse_mesh_json_with(text: &str, rule: OrientationRule) -> Result<LoadedMesh, IoError> {
    serde_json::from_str::<MeshDocument>(text)?.load_with(rule)
}

/// Parses OFF text. Comments start with `#`; the `OFF` header is optional.
pub fn parse_off(text: &str) -> Result<LoadedMesh, IoError> {
    parse_off_with(text, OrientationRule::Auto)
}

pub fn parse_off_with(text: &str, rule: OrientationRule) -> Result<LoadedMesh, IoError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let err = |line: usize, message: String| IoError::Parse { line, message };
    let (mut ln, mut first) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    if first.starts_with("OFF") {
        let rest = first[3..].trim();
        if rest.is_empty() {
            (ln, first) = lines.next().ok_or_else(|| err(ln, "missing counts line".into()))?;
        } else {
            first = rest;
        }
    }
    let counts: Vec<usize> = first
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| err(ln, format!("bad count {t:?}"))))
        .collect::<Result<_, _>>()?;
    if counts.len() < 2 {
        return Err(err(ln, "expected vertex and face counts".into()));
    }
    let (nv, nf) = (counts[0], counts[1]);
    let mut vertices = Vec::with_capacity(nv);
    let mut last = ln;
    for i in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| err(last, format!("expected {nv} vertices, found {i}")))?;
        last = ln;
        let xs: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(ln, format!("bad coordinate {t:?}"))))
            .collect::<Result<_, _>>()?;
        if xs.len() < 3 {
            return Err(err(ln, "vertex needs three coordinates".into()));
        }
        vertices.push(Vec3::new(xs[0], xs[1], xs[2]));
    }
    let mut faces = Vec::with_capacity(nf);
    for i in 0..nf {
        let (ln, l) = lines.next().ok_or_else(|| err(last, format!("expected {nf} faces, found {i}")))?;
        last = ln;
        let ids: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| err(ln, format!("bad index {t:?}"))))
            .collect::<Result<_, _>>()?;
        let Some((&n, rest)) = ids.split_first() else {
            return Err(err(ln, "empty face".into()));
        };
        if rest.len() < n {
            return Err(err(ln, format!("face declares {n} vertices but lists {}", rest.len())));
        }
        faces.push(rest[..n].to_vec());
    }
    Ok(LoadedMesh {
        polyhedron: Polyhedron::with_orientation(vertices, &faces, rule)?,
        basis: None,
        alpha: None,
    })
}

pub fn write_off(p: &Polyhedron) -> String {
    let mut s = format!("OFF\n{} {} {}\n", p.num_vertices(), p.num_faces(), p.num_edges());
    for v in p.vertices() {
        let _ = writeln!(s, "{:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for f in p.faces() {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    s
}

/// Reads OFF when the text starts with an `OFF` header or the path ends in
/// `.off`, JSON otherwise.
pub fn read_mesh(path: &Path) -> Result<LoadedMesh, IoError> {
    read_mesh_with(path, OrientationRule::Auto)
}

pub fn read_mesh_with(path: &Path, rule: OrientationRule) -> Result<LoadedMesh, IoError> {
    let text = std::fs::read_to_string(path)?;
    let is_off = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("off")) || text.trim_start().starts_with("OFF");
    if is_off {
        parse_off_with(&text, rule)
    } else {
        parse_mesh_json_with(&text, rule)
    }
}

fn edge_key(lo: usize, hi: usize) -> String {
    format!("{lo}-{hi}")
}

pub fn alpha_map(p: &Polyhedron, d: &LengthDecomposition) -> BTreeMap<String, Vec<String>> {
    p.edges()
        .iter()
        .zip(d.coeffs())
        .map(|(e, row)| (edge_key(e.lo, e.hi), row.iter().map(|a| a.to_string()).collect()))
        .collect()
}

/// Builds a decomposition from an `"i-j"` keyed coefficient map.
pub fn decomposition_from_alpha(
    p: &Polyhedron,
    basis: &LengthBasis,
    alpha: &BTreeMap<String, Vec<String>>,
    decomp_tol: f64,
) -> Result<LengthDecomposition, DehnError> {
    let bad = |m: String| DehnError::InvalidDecomposition(m);
    let mut rows: Vec<Option<Vec<Rational64>>> = vec![None; p.num_edges()];
    for (key, vals) in alpha {
        let (a, b) = key.split_once('-').ok_or_else(|| bad(format!("edge key {key:?} is not \"i-j\"")))?;
        let (a, b) = (
            a.trim().parse::<usize>().map_err(|_| bad(format!("edge key {key:?}")))?,
            b.trim().parse::<usize>().map_err(|_| bad(format!("edge key {key:?}")))?,
        );
        let e = p.edge_id(a, b).ok_or_else(|| bad(format!("{key} is not an edge")))?;
        let row = vals
            .iter()
            .map(|v| Rational64::from_str(v.trim()).map_err(|_| bad(format!("{key}: {v:?} is not a rational"))))
            .collect::<Result<Vec<_>, _>>()?;
        if rows[e].replace(row).is_some() {
            return Err(bad(format!("edge {key} listed twice")));
        }
    }
    let coeffs = rows
        .into_iter()
        .enumerate()
        .map(|(e, r)| {
            r.ok_or_else(|| {
                let edge = p.edges()[e];
                bad(format!("no coefficients for edge {}", edge_key(edge.lo, edge.hi)))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    LengthDecomposition::new(p, basis.clone(), coeffs, decomp_tol)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FlexDocument {
    Object(FirstOrderFlex),
    Bare(Vec<[f64; 3]>),
}

/// Accepts `{"velocities": [[x, y, z], ...]}` or a bare list of triples.
pub fn parse_flex(text: &str) -> Result<FirstOrderFlex, IoError> {
    Ok(match serde_json::from_str::<FlexDocument>(text)? {
        FlexDocument::Object(f) => f,
        FlexDocument::Bare(v) => FirstOrderFlex::new(v.iter().map(|c| Vec3::new(c[0], c[1], c[2])).collect()),
    })
}

pub fn read_flex(path: &Path) -> Result<FirstOrderFlex, IoError> {
    parse_flex(&std::fs::read_to_string(path)?)
}

pub fn flex_to_json(f: &FirstOrderFlex) -> String {
    serde_json::to_string_pretty(f).expect("flexes always serialize")
}

/// Columns `t, maxEdgeDrift, dehnExpr_1..m, kernelDim`; the Dehn columns are
/// present only when a decomposition is given.
pub fn continuation_csv(
    base: &Polyhedron,
    result: &ContinuationResult,
    decomp: Option<&LengthDecomposition>,
) -> Result<String, DehnError> {
    let m = decomp.map_or(0, |d| d.basis().len());
    let mut s = String::from("t,maxEdgeDrift");
    for j in 1..=m {
        let _ = write!(s, ",dehnExpr_{j}");
    }
    s.push_str(",kernelDim\n");
    for (i, step) in result.steps.iter().enumerate() {
        let _ = write!(s, "{:?},{:?}", step.t, step.edge_drift);
        if let Some(d) = decomp {
            for v in dehn_expression_values(&result.polyhedron_at(base, i), d)? {
                let _ = write!(s, ",{v:?}");
            }
        }
        let _ = writeln!(s, ",{}", step.kernel_dim);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dehn::{decompose_lengths, DEFAULT_DECOMP_TOL, DEFAULT_MAX_DENOMINATOR};
    use crate::fixtures::{bipyramid_q, bricard_octahedron, regular_tetrahedron};

    #[test]
    fn json_round_trip_is_bit_exact() {
        for p in [bipyramid_q(), bricard_octahedron()] {
            let text = mesh_to_json(&MeshDocument::from_polyhedron(&p));
            let back = parse_mesh_json(&text).unwrap().polyhedron;
            assert_eq!(back.vertices(), p.vertices());
            assert_eq!(back.faces(), p.faces());
        }
    }

    #[test]
    fn off_round_trip() {
        let p = regular_tetrahedron(1.0);
        let back = parse_off(&write_off(&p)).unwrap().polyhedron;
        assert_eq!(back.vertices(), p.vertices());
        assert_eq!(back.num_edges(), 6);
    }

    #[test]
    fn off_errors_carry_line_numbers() {
        let text = "OFF\n# comment\n4 4 6\n0 0 0\n1 0 0\n0 1 x\n0 0 1\n3 0 1 2\n";
        match parse_off(text) {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("{other:?}"),
        }
        match parse_off("OFF\n4 4 6\n0 0 0\n") {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_off(""), Err(IoError::Parse { line: 1, .. })));
    }

    #[test]
    fn alpha_round_trip() {
        let q = bipyramid_q();
        let basis = LengthBasis::from_values(&[1.0, 4.0 * 3f64.sqrt() - 3.0]).unwrap();
        let d = decompose_lengths(&q, &basis, DEFAULT_DECOMP_TOL, DEFAULT_MAX_DENOMINATOR).unwrap();
        let text = mesh_to_json(&MeshDocument::from_polyhedron(&q).with_decomposition(&q, &d));
        let loaded = parse_mesh_json(&text).unwrap();
        assert_eq!(loaded.alpha.as_ref().unwrap()["1-4"], vec!["0".to_string(), "1".to_string()]);
        let back = decomposition_from_alpha(&q, loaded.basis.as_ref().unwrap(), loaded.alpha.as_ref().unwrap(), 1e-12).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn alpha_errors() {
        let q = bipyramid_q();
        let basis = LengthBasis::from_values(&[1.0]).unwrap();
        let mut alpha = BTreeMap::new();
        alpha.insert("0-1".to_string(), vec!["8".to_string()]);
        assert!(decomposition_from_alpha(&q, &basis, &alpha, 1e-12).is_err());
        alpha.insert("0-4".to_string(), vec!["1/2".to_string()]);
        assert!(decomposition_from_alpha(&q, &basis, &alpha, 1e-12).is_err());
    }

    #[test]
    fn flex_formats() {
        let a = parse_flex(r#"{"velocities": [[0,0,1],[1,2,3]]}"#).unwrap();
        let b = parse_flex("[[0,0,1],[1,2,3]]").unwrap();
        assert_eq!(a, b);
        assert_eq!(parse_flex(&flex_to_json(&a)).unwrap(), a);
    }
}
