#![allow(dead_code)]

use flexgate::dehn::{auto_basis, decompose_lengths, LengthDecomposition, DEFAULT_DECOMP_TOL, DEFAULT_MAX_DENOMINATOR};
use flexgate::flex::{flex_space, FirstOrderFlex, DEFAULT_RANK_TOL};
use flexgate::geometry::dihedral_data;
use flexgate::mesh::Polyhedron;
use flexgate::oracle::{gen_example, ExampleSpec};
use flexgate::Vec3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = random_point(rng, 1.0);
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_point(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    Vec3::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r))
}

/// Random first-order flex: a kernel combination with unit max speed.
pub fn random_flex(p: &Polyhedron, rng: &mut ChaCha8Rng, with_trivial: bool) -> FirstOrderFlex {
    let fs = flex_space(p, DEFAULT_RANK_TOL).unwrap();
    let mut f = FirstOrderFlex::zeros(p.num_vertices());
    for b in &fs.nontrivial_basis {
        f = f.combine(1.0, b, rng.random_range(-1.0..1.0));
    }
    if with_trivial {
        for t in &fs.trivial_basis {
            f = f.combine(1.0, t, rng.random_range(-0.5..0.5));
        }
    }
    f.scaled(1.0 / f.max_speed())
}

pub fn auto_decomp(p: &Polyhedron) -> LengthDecomposition {
    let basis = auto_basis(p, DEFAULT_DECOMP_TOL, DEFAULT_MAX_DENOMINATOR);
    decompose_lengths(p, &basis, DEFAULT_DECOMP_TOL, DEFAULT_MAX_DENOMINATOR).unwrap()
}

/// Bricard octahedron with random parameters that passes every precondition.
pub fn random_bricard(rng: &mut ChaCha8Rng) -> Polyhedron {
    loop {
        let spec = ExampleSpec::Bricard1 {
            a: random_point(rng, 3.0),
            b: random_point(rng, 3.0),
            c: random_point(rng, 3.0),
        };
        let Ok(p) = gen_example(&spec) else { continue };
        let Ok(frames) = p.edge_frames() else { continue };
        let well_shaped = frames.iter().all(|f| {
            dihedral_data(&p, f).is_ok_and(|d| {
                d.sin_phi.abs() > 1e-3 && d.cos_phi.abs() > 1e-3 && d.area_prime > 0.1 && d.area_double_prime > 0.1
            })
        });
        if well_shaped && flex_space(&p, DEFAULT_RANK_TOL).unwrap().kernel_dim >= 7 {
            return p;
        }
    }
}
