//! Closed triangulated surfaces and their per-edge vertex frames.
//!
//! A [`Polyhedron`] is validated once at construction: every edge must be
//! shared by exactly two triangles, every vertex must be used, and the face
//! windings are made globally consistent whenever the surface is orientable.
//! For orientable input the stored windings are also the outward ones, so
//! [`Polyhedron::edge_frames`] can read the canonical `(x, y, z', z'')`
//! ordering straight off the faces.

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use crate::error::MeshError;
use crate::Vec3;

/// Relative threshold below which a face is treated as degenerate:
/// doubled area < `FACE_DEGENERACY_TOL * (longest face edge)^2`.
pub const FACE_DEGENERACY_TOL: f64 = 1e-12;

/// Relative threshold on `|signed volume| / diag^3` below which the volume
/// sign is not trusted to pick the outward orientation.
pub const VOLUME_SIGN_TOL: f64 = 1e-9;

/// Unordered vertex pair, stored with `lo < hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Edge {
    pub lo: usize,
    pub hi: usize,
}

impl Edge {
    pub fn new(a: usize, b: usize) -> Self {
        if a < b {
            Edge { lo: a, hi: b }
        } else {
            Edge { lo: b, hi: a }
        }
    }
}

/// How to choose the outward side of an orientable surface.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OrientationRule {
    /// Positive signed volume when it is numerically meaningful, otherwise
    /// the winding of the first face of each component.
    #[default]
    Auto,
    /// Keep the winding of the first face of each component.
    Input,
    /// Reverse the winding of the first face of each component.
    Reversed,
}

/// Canonical vertex quadruple around an edge.
///
/// The faces `(x, y, z1)` and `(y, x, z2)` appear with these windings in the
/// oriented surface, so `(y-x)x(z1-x)` and `(z2-x)x(y-x)` are outward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EdgeFrame {
    pub edge_id: usize,
    pub x: usize,
    pub y: usize,
    #[serde(rename = "z_prime")]
    pub z1: usize,
    #[serde(rename = "z_double_prime")]
    pub z2: usize,
}

impl EdgeFrame {
    /// Frame with `x` and `y` swapped, which negates both face normals.
    pub fn swapped(&self) -> Self {
        EdgeFrame {
            x: self.y,
            y: self.x,
            ..*self
        }
    }
}

/// Counts and Euler data of a closed triangulation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TopologyStats {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub euler_char: i64,
    pub components: usize,
    pub orientable: bool,
    /// Genus when orientable, number of cross-caps otherwise.
    pub genus_or_crosscaps: i64,
}

#[derive(Clone, Debug)]
pub struct Polyhedron {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    edge_index: HashMap<Edge, usize>,
    edge_faces: Vec<[usize; 2]>,
    component_of_face: Vec<usize>,
    components: usize,
    oriented: bool,
}

impl Polyhedron {
    /// Validates a closed triangulated surface using [`OrientationRule::Auto`].
    pub fn new<F>(vertices: Vec<Vec3>, faces: &[F]) -> Result<Self, MeshError>
    where
        F: AsRef<[usize]>,
    {
        Self::with_orientation(vertices, faces, OrientationRule::Auto)
    }

    pub fn with_orientation<F>(
        vertices: Vec<Vec3>,
        faces: &[F],
        rule: OrientationRule,
    ) -> Result<Self, MeshError>
    where
        F: AsRef<[usize]>,
    {
        if vertices.len() < 4 || faces.len() < 4 {
            return Err(MeshError::TooSmall {
                vertices: vertices.len(),
                faces: faces.len(),
            });
        }
        if let Some(i) = vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(MeshError::NonFiniteCoordinate(i));
        }

        let mut tris = Vec::with_capacity(faces.len());
        for (fi, f) in faces.iter().enumerate() {
            let f = f.as_ref();
            if f.len() != 3 {
                return Err(MeshError::NonTriangleFace { face: fi, len: f.len() });
            }
            for &idx in f {
                if idx >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        face: fi,
                        index: idx,
                        count: vertices.len(),
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::RepeatedIndex { face: fi });
            }
            tris.push([f[0], f[1], f[2]]);
        }

        let mut used = vec![false; vertices.len()];
        for t in &tris {
            for &i in t {
                used[i] = true;
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(MeshError::DanglingVertex(i));
        }

        // Edge incidence in first-seen order.
        let mut edges = Vec::new();
        let mut edge_index = HashMap::new();
        let mut incident: Vec<Vec<usize>> = Vec::new();
        for (fi, t) in tris.iter().enumerate() {
            for k in 0..3 {
                let e = Edge::new(t[k], t[(k + 1) % 3]);
                let id = *edge_index.entry(e).or_insert_with(|| {
                    edges.push(e);
                    incident.push(Vec::new());
                    edges.len() - 1
                });
                incident[id].push(fi);
            }
        }
        let mut edge_faces = Vec::with_capacity(edges.len());
        for (id, fs) in incident.iter().enumerate() {
            if fs.len() != 2 {
                return Err(MeshError::NonManifoldEdge(edges[id].lo, edges[id].hi, fs.len()));
            }
            edge_faces.push([fs[0], fs[1]]);
        }

        // Winding propagation over the face adjacency graph.
        let mut flip: Vec<Option<bool>> = vec![None; tris.len()];
        let mut component_of_face = vec![usize::MAX; tris.len()];
        let mut components = 0;
        let mut oriented = true;
        for root in 0..tris.len() {
            if flip[root].is_some() {
                continue;
            }
            flip[root] = Some(false);
            component_of_face[root] = components;
            let mut queue = VecDeque::from([root]);
            while let Some(f) = queue.pop_front() {
                let ff = flip[f].unwrap_or(false);
                let t = tris[f];
                for k in 0..3 {
                    let (a, b) = (t[k], t[(k + 1) % 3]);
                    let id = edge_index[&Edge::new(a, b)];
                    let [f0, f1] = edge_faces[id];
                    let g = if f0 == f { f1 } else { f0 };
                    // g must traverse (a, b) as (b, a) once both windings are applied.
                    let g_has_ab = has_directed(&tris[g], a, b);
                    let needed = g_has_ab != ff;
                    match flip[g] {
                        None => {
                            flip[g] = Some(needed);
                            component_of_face[g] = components;
                            queue.push_back(g);
                        }
                        Some(existing) if existing != needed => oriented = false,
                        Some(_) => {}
                    }
                }
            }
            components += 1;
        }

        if oriented {
            for (t, fl) in tris.iter_mut().zip(&flip) {
                if fl.unwrap_or(false) {
                    t.swap(1, 2);
                }
            }
            let diag = bbox_diagonal(&vertices);
            for c in 0..components {
                let reverse = match rule {
                    OrientationRule::Input => false,
                    OrientationRule::Reversed => true,
                    OrientationRule::Auto => {
                        let vol: f64 = tris
                            .iter()
                            .zip(&component_of_face)
                            .filter(|(_, &cf)| cf == c)
                            .map(|(t, _)| tet_volume(&vertices, t))
                            .sum();
                        vol.abs() > VOLUME_SIGN_TOL * diag.powi(3) && vol < 0.0
                    }
                };
                if reverse {
                    for (t, &cf) in tris.iter_mut().zip(&component_of_face) {
                        if cf == c {
                            t.swap(1, 2);
                        }
                    }
                }
            }
        }

        Ok(Polyhedron {
            vertices,
            faces: tris,
            edges,
            edge_index,
            edge_faces,
            component_of_face,
            components,
            oriented,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Vec3 {
        self.vertices[i]
    }

    /// Faces with their stored (consistent, outward when oriented) windings.
    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&Edge::new(a, b)).copied()
    }

    pub fn edge_faces(&self, edge_id: usize) -> [usize; 2] {
        self.edge_faces[edge_id]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn is_oriented(&self) -> bool {
        self.oriented
    }

    pub fn edge_length(&self, edge_id: usize) -> f64 {
        let e = self.edges[edge_id];
        (self.vertices[e.hi] - self.vertices[e.lo]).norm()
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        (0..self.edges.len()).map(|i| self.edge_length(i)).collect()
    }

    /// Same combinatorics and windings with new vertex positions.
    ///
    /// Orientation is not re-decided, so frames stay in correspondence with
    /// the original surface along a deformation.
    pub fn with_positions(&self, vertices: Vec<Vec3>) -> Self {
        assert_eq!(vertices.len(), self.vertices.len(), "vertex count must not change");
        Polyhedron {
            vertices,
            ..self.clone()
        }
    }

    /// Positions displaced by `t * velocity` (the straight-line deformation).
    pub fn displaced(&self, velocities: &[Vec3], t: f64) -> Self {
        let moved = self
            .vertices
            .iter()
            .zip(velocities)
            .map(|(p, v)| p + v * t)
            .collect();
        self.with_positions(moved)
    }

    /// Signed enclosed volume of the surface under the stored windings.
    pub fn signed_volume(&self) -> f64 {
        self.faces.iter().map(|t| tet_volume(&self.vertices, t)).sum()
    }

    pub fn bbox_diagonal(&self) -> f64 {
        bbox_diagonal(&self.vertices)
    }

    pub fn topology_stats(&self) -> TopologyStats {
        let v = self.num_vertices() as i64;
        let e = self.num_edges() as i64;
        let f = self.num_faces() as i64;
        let chi = v - e + f;
        debug_assert_eq!(3 * f, 2 * e);
        debug_assert_eq!(e, 3 * v - 3 * chi);
        let c = self.components as i64;
        let genus_or_crosscaps = if self.oriented { (2 * c - chi) / 2 } else { 2 * c - chi };
        TopologyStats {
            vertices: v as usize,
            edges: e as usize,
            faces: f as usize,
            euler_char: chi,
            components: self.components,
            orientable: self.oriented,
            genus_or_crosscaps,
        }
    }

    pub fn doubled_face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.faces[face];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        (pb - pa).cross(&(pc - pa)).norm()
    }

    /// True iff the doubled area is below `1e-12 * (longest edge)^2`.
    pub fn is_face_degenerate(&self, face: usize) -> bool {
        let [a, b, c] = self.faces[face];
        is_triangle_degenerate(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn has_degenerate_face(&self) -> bool {
        (0..self.faces.len()).any(|f| self.is_face_degenerate(f))
    }

    /// One canonical frame per edge, in edge order.
    pub fn edge_frames(&self) -> Result<Vec<EdgeFrame>, MeshError> {
        if !self.oriented {
            return Err(MeshError::NotOrientable);
        }
        Ok((0..self.edges.len()).map(|id| self.frame_unchecked(id)).collect())
    }

    pub fn edge_frame(&self, edge_id: usize) -> Result<EdgeFrame, MeshError> {
        if !self.oriented {
            return Err(MeshError::NotOrientable);
        }
        Ok(self.frame_unchecked(edge_id))
    }

    fn frame_unchecked(&self, id: usize) -> EdgeFrame {
        let e = self.edges[id];
        let [f0, f1] = self.edge_faces[id];
        // The face containing lo -> hi supplies (x, y, z1).
        let (first, second) = if has_directed(&self.faces[f0], e.lo, e.hi) {
            (f0, f1)
        } else {
            (f1, f0)
        };
        let (x, y) = (e.lo, e.hi);
        EdgeFrame {
            edge_id: id,
            x,
            y,
            z1: third_vertex(&self.faces[first], x, y),
            z2: third_vertex(&self.faces[second], x, y),
        }
    }

    pub fn component_of_face(&self, face: usize) -> usize {
        self.component_of_face[face]
    }
}

pub fn is_triangle_degenerate(a: Vec3, b: Vec3, c: Vec3) -> bool {
    let longest = (b - a).norm().max((c - b).norm()).max((a - c).norm());
    (b - a).cross(&(c - a)).norm() < FACE_DEGENERACY_TOL * longest * longest
}

fn has_directed(t: &[usize; 3], a: usize, b: usize) -> bool {
    (0..3).any(|k| t[k] == a && t[(k + 1) % 3] == b)
}

fn third_vertex(t: &[usize; 3], a: usize, b: usize) -> usize {
    *t.iter().find(|&&v| v != a && v != b).expect("triangle has three distinct vertices")
}

fn tet_volume(vertices: &[Vec3], t: &[usize; 3]) -> f64 {
    vertices[t[0]].dot(&vertices[t[1]].cross(&vertices[t[2]])) / 6.0
}

fn bbox_diagonal(vertices: &[Vec3]) -> f64 {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for v in vertices {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    (hi - lo).norm()
}
