use flexgate::dehn::{
    assemble_equation, edge_selections, evaluate_dehn, per_edge_branch_consistency, DehnOptions,
};
use flexgate::fixtures::{bipyramid_q, bricard_octahedron, regular_octahedron, regular_tetrahedron, v5_flex};
use flexgate::flex::{flex_space, is_nontrivial, trivial_motions, FirstOrderFlex, RigidityMatrix, DEFAULT_NONTRIVIAL_TOL, DEFAULT_RANK_TOL};
use flexgate::geometry::{
    angle_derivative, dihedral_data, g_vectors, pq_vectors, quad_dihedral, rs_vectors, BranchPolicy, EdgeQuad,
    DEFAULT_TRIG_TOL,
};
use flexgate::io::{mesh_to_json, parse_mesh_json, parse_off, write_off, MeshDocument};
use flexgate::mesh::Polyhedron;
use flexgate::minors::{minor_entry, minor_stationarity_report, rank_profile, MinorIndex, MinorOptions, Strategy as MinorStrategy};
use flexgate::oracle::fd_angle_derivative;
use flexgate::par::Execution;
use flexgate::Vec3;
use nalgebra::{Rotation3, Unit};
use num_rational::Rational64;
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{auto_decomp, random_bricard, random_flex, random_point, random_unit};

fn coord() -> impl Strategy<Value = f64> {
    -5.0..5.0f64
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (coord(), coord(), coord()).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn quad() -> impl Strategy<Value = EdgeQuad> {
    (vec3(), vec3(), vec3(), vec3()).prop_map(|(a, b, c, d)| EdgeQuad::new(a, b, c, d))
}

fn fixtures() -> Vec<Polyhedron> {
    vec![regular_tetrahedron(1.0), bipyramid_q(), bricard_octahedron(), regular_octahedron(2.0)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn trig_identities_hold_on_random_frames(q in quad()) {
        if let Ok(d) = quad_dihedral(&q) {
            prop_assert!((d.cos_phi.powi(2) + d.sin_phi.powi(2) - 1.0).abs() <= 1e-10);
            prop_assert!((d.n_prime.norm() - 1.0).abs() <= 1e-12);
            prop_assert!((d.n_double_prime.norm() - 1.0).abs() <= 1e-12);
            let w = (q.y - q.x).normalize();
            prop_assert!((-d.n_prime.dot(&d.n_double_prime) - d.cos_phi).abs() <= 1e-10);
            prop_assert!((d.n_prime.cross(&d.n_double_prime).dot(&w) - d.sin_phi).abs() <= 1e-10);
            prop_assert!((0.0..std::f64::consts::TAU).contains(&d.phi));
        }
    }

    #[test]
    fn mesh_json_and_off_round_trip_bit_exactly(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_bricard(&mut rng);
        let back = parse_mesh_json(&mesh_to_json(&MeshDocument::from_polyhedron(&p))).unwrap().polyhedron;
        prop_assert_eq!(back.vertices(), p.vertices());
        prop_assert_eq!(back.faces(), p.faces());
        let off = parse_off(&write_off(&p)).unwrap().polyhedron;
        prop_assert_eq!(off.vertices(), p.vertices());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_bricards_satisfy_mesh_invariants(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_bricard(&mut rng);
        let t = p.topology_stats();
        prop_assert_eq!(3 * t.faces, 2 * t.edges);
        prop_assert_eq!(t.edges as i64, 3 * t.vertices as i64 - 3 * t.euler_char);
        let frames = p.edge_frames().unwrap();
        prop_assert_eq!(&frames, &p.edge_frames().unwrap());
    }

    #[test]
    fn r_and_s_contractions_agree_and_match_eq4(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_bricard(&mut rng);
        let f = random_flex(&p, &mut rng, true);
        for frame in p.edge_frames().unwrap() {
            let q = EdgeQuad::from_frame(&p, &frame);
            let v = EdgeQuad::from_points(&f.velocities, &frame);
            let set = rs_vectors(&q, DEFAULT_TRIG_TOL).unwrap();
            let (r, s) = (set.r.unwrap().contract(&v), set.s.unwrap().contract(&v));
            prop_assert!((r - s).abs() <= 1e-8 * r.abs().max(s.abs()).max(1e-300), "r {} s {}", r, s);

            let d = dihedral_data(&p, &frame).unwrap();
            let phi = angle_derivative(&p, &frame, &f, DEFAULT_TRIG_TOL, 1e-9).unwrap();
            let (pt, qt, _, _) = pq_vectors(&q);
            let aa = d.area_prime * d.area_double_prime;
            let lhs_sin = aa * d.sin_phi * phi;
            let lhs_cos = aa * d.cos_phi * phi;
            let p_c = pt.contract(&v);
            let q_c = qt.contract(&v);
            prop_assert!((lhs_sin - p_c).abs() <= 1e-8 * (lhs_sin.abs() + aa * pt.l1_norm() * 1e-6));
            prop_assert!((lhs_cos - q_c).abs() <= 1e-8 * (lhs_cos.abs() + aa * qt.l1_norm() * 1e-6));
        }
    }

    #[test]
    fn trivial_motions_have_zero_angle_rate(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_bricard(&mut rng);
        let motion = FirstOrderFlex::rotation(&p, random_unit(&mut rng), random_point(&mut rng, 5.0))
            .combine(1.0, &FirstOrderFlex::translation(6, random_point(&mut rng, 2.0)), 1.0);
        for frame in p.edge_frames().unwrap() {
            let set = rs_vectors(&EdgeQuad::from_frame(&p, &frame), DEFAULT_TRIG_TOL).unwrap();
            let g = g_vectors(&set, BranchPolicy::PreferStable, frame.edge_id).unwrap();
            let phi = g.triple.contract(&EdgeQuad::from_points(&motion.velocities, &frame));
            prop_assert!(phi.abs() <= 1e-9 * motion.max_speed(), "{}", phi);
        }
    }

    #[test]
    fn kernel_is_invariant_under_rigid_motions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in fixtures() {
            let k0 = flex_space(&p, DEFAULT_RANK_TOL).unwrap().kernel_dim;
            let rot = Rotation3::from_axis_angle(&Unit::new_normalize(random_unit(&mut rng)), rng.random_range(0.0..6.3));
            let shift = random_point(&mut rng, 20.0);
            let moved = p.with_positions(p.vertices().iter().map(|v| rot * v + shift).collect());
            let rep = flex_space(&moved, DEFAULT_RANK_TOL).unwrap();
            prop_assert_eq!(rep.kernel_dim, k0);
            let r = RigidityMatrix::new(&moved);
            for t in trivial_motions(&moved).unwrap() {
                prop_assert!((&r.matrix * t.to_dvector()).amax() <= 1e-12 * moved.bbox_diagonal().max(1.0));
            }
            for f in &rep.nontrivial_basis {
                prop_assert!(is_nontrivial(&moved, f, DEFAULT_NONTRIVIAL_TOL).unwrap());
            }
        }
    }

    #[test]
    fn dehn_residuals_ignore_translations_exactly(seed in any::<u64>(), t in (-8i32..8, -8i32..8, -8i32..8)) {
        // Dyadic velocities plus integer shifts keep every difference exact.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = bricard_octahedron();
        let d = auto_decomp(&p);
        let sel = edge_selections(&p, BranchPolicy::PreferStable, DEFAULT_TRIG_TOL).unwrap();
        let v: Vec<Vec3> = (0..6)
            .map(|_| Vec3::new(
                rng.random_range(-64..64) as f64 / 64.0,
                rng.random_range(-64..64) as f64 / 64.0,
                rng.random_range(-64..64) as f64 / 64.0,
            ))
            .collect();
        let f = FirstOrderFlex::new(v);
        let shift = Vec3::new(t.0 as f64, t.1 as f64, t.2 as f64);
        let g = f.combine(1.0, &FirstOrderFlex::translation(6, shift), 1.0);
        for j in 0..d.basis().len() {
            let eq = assemble_equation(6, &sel, &d.column(j), j);
            prop_assert_eq!(eq.evaluate_terms(&f), eq.evaluate_terms(&g));
            prop_assert_eq!(eq.evaluate_terms(&FirstOrderFlex::translation(6, shift)), 0.0);
        }
    }

    #[test]
    fn dehn_equations_annihilate_rotations(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_bricard(&mut rng);
        let d = auto_decomp(&p);
        let rot = FirstOrderFlex::rotation(&p, random_unit(&mut rng), random_point(&mut rng, 5.0));
        let rep = evaluate_dehn(&p, &d, &rot, &DehnOptions::default()).unwrap();
        for (r, s) in rep.residuals.iter().zip(&rep.scales) {
            prop_assert!(r.abs() <= 1e-9 * s);
        }
    }

    #[test]
    fn dehn_residuals_are_rationally_linear(seed in any::<u64>(), num in -20i64..20, den in 1i64..20, e in -4i32..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = bricard_octahedron();
        let d = auto_decomp(&p);
        let f = random_flex(&p, &mut rng, true);
        let sel = edge_selections(&p, BranchPolicy::PreferStable, DEFAULT_TRIG_TOL).unwrap();
        let c = Rational64::new(num, den);
        let pow2 = if e >= 0 { Rational64::from_integer(1 << e) } else { Rational64::new(1, 1 << -e) };
        for j in 0..d.basis().len() {
            let col = d.column(j);
            let base = assemble_equation(6, &sel, &col, j).evaluate_terms(&f);
            let scaled: Vec<Rational64> = col.iter().map(|a| a * pow2).collect();
            let exact = assemble_equation(6, &sel, &scaled, j).evaluate_terms(&f);
            prop_assert_eq!(exact, base * (*pow2.numer() as f64) / (*pow2.denom() as f64));
            let scaled: Vec<Rational64> = col.iter().map(|a| a * c).collect();
            let eq = assemble_equation(6, &sel, &scaled, j);
            let want = base * num as f64 / den as f64;
            prop_assert!((eq.evaluate_terms(&f) - want).abs() <= 1e-14 * eq.magnitude * f.max_speed());
        }
    }

    #[test]
    fn branch_policies_differ_by_at_most_the_discrepancy(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_bricard(&mut rng);
        let d = auto_decomp(&p);
        let f = random_flex(&p, &mut rng, true);
        let tol = per_edge_branch_consistency(&p, &d, &f, DEFAULT_TRIG_TOL)
            .unwrap()
            .iter()
            .map(|b| b.discrepancy.abs())
            .fold(0.0, f64::max);
        let run = |policy| evaluate_dehn(&p, &d, &f, &DehnOptions { policy, ..DehnOptions::default() }).unwrap();
        let (r, s) = (run(BranchPolicy::ForceR), run(BranchPolicy::ForceS));
        for j in 0..d.basis().len() {
            let l1: f64 = d.column(j).iter().map(|a| (*a.numer() as f64 / *a.denom() as f64).abs()).sum();
            let slack = 1e-14 * r.scales[j].max(s.scales[j]);
            prop_assert!((r.residuals[j] - s.residuals[j]).abs() <= l1 * tol + slack);
        }
    }

    #[test]
    fn minor_derivative_is_linear_in_the_flex(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = if seed % 2 == 0 { bipyramid_q() } else { random_bricard(&mut rng) };
        let n = RigidityMatrix::new(&p);
        let k = rng.random_range(1..=n.rows().min(n.cols()));
        let mut rows = sample(&mut rng, n.rows(), k).into_vec();
        let mut cols = sample(&mut rng, n.cols(), k).into_vec();
        rows.sort_unstable();
        cols.sort_unstable();
        let idx = MinorIndex::new(rows, cols);
        let u = random_flex(&p, &mut rng, true);
        let w = random_flex(&p, &mut rng, true);
        let du = minor_entry(&p, &u, &idx).unwrap();
        let dw = minor_entry(&p, &w, &idx).unwrap();
        let dc = minor_entry(&p, &u.combine(a, &w, b), &idx).unwrap();
        let scale = a.abs() * du.derivative_scale + b.abs() * dw.derivative_scale;
        prop_assert!((dc.derivative - a * du.derivative - b * dw.derivative).abs() <= 1e-10 * scale.max(1e-300));
    }

    #[test]
    fn sampled_reports_are_reproducible(seed in any::<u64>(), k in 3usize..9) {
        let q = bipyramid_q();
        let mut opts = MinorOptions::new(k);
        opts.strategy = MinorStrategy::Sampled { count: 300, seed };
        let a = minor_stationarity_report(&q, &v5_flex(), &opts).unwrap();
        opts.exec = Execution::Sequential;
        let b = minor_stationarity_report(&q, &v5_flex(), &opts).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn minors_vanish_exactly_above_the_rank() {
    for p in fixtures() {
        let r = RigidityMatrix::new(&p);
        let (rank, _) = rank_profile(&r, DEFAULT_RANK_TOL);
        let zero = FirstOrderFlex::zeros(p.num_vertices());
        for k in [rank, rank + 1] {
            if k > r.rows().min(r.cols()) {
                continue;
            }
            let rep = minor_stationarity_report(&p, &zero, &MinorOptions::new(k)).unwrap();
            assert_eq!(rep.all_values_vanish, rank < k, "k = {k}, rank = {rank}");
        }
    }
}

#[test]
fn angle_rate_differences_converge_at_second_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = bricard_octahedron();
    let f = random_flex(&p, &mut rng, false);
    for frame in p.edge_frames().unwrap() {
        let exact = angle_derivative(&p, &frame, &f, DEFAULT_TRIG_TOL, 1e-9).unwrap();
        let err = |h: f64| (fd_angle_derivative(&p, &frame, &f, h).unwrap() - exact).abs();
        let (e1, e2) = (err(2e-2), err(1e-2));
        if e1 > 1e-9 {
            let ratio = e1 / e2;
            assert!((3.5..4.5).contains(&ratio), "edge {}: ratio {ratio}", frame.edge_id);
        }
    }
}
