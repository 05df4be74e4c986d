use boxvi::cones::{
    critical_cone, normal_cone_contains, polyhedricity_check_fd, tangent_cone, zero_threshold,
    BoxElem, ConeSpec, ConeTag, FdBox, TOL_ACTIVE,
};
use boxvi::fem::{load_vector, DualVec, FemSystem, Mesh, PrimalVec};
use boxvi::linalg::SymBanded;
use boxvi::qp::{cone_distance, solve_qp, solve_qp_pg, solve_qp_robust, Bound, QpProblem};
use boxvi::sensitivity::derivative_s;
use boxvi::vi::{solve_primal, TOL_VI};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn system(dim: usize, n: usize) -> FemSystem {
    FemSystem::assemble(&Mesh::build(dim, n, None).unwrap()).unwrap()
}

fn bound_strategy() -> impl Strategy<Value = Bound> {
    prop_oneof![
        Just(Bound::Free),
        Just(Bound::NonNeg),
        Just(Bound::NonPos),
        Just(Bound::Zero),
        (-2.0..0.0f64, 0.0..2.0f64).prop_map(|(lo, hi)| Bound::Interval { lo, hi }),
    ]
}

fn tag_strategy() -> impl Strategy<Value = ConeTag> {
    prop_oneof![
        Just(ConeTag::Free),
        Just(ConeTag::NonNeg),
        Just(ConeTag::NonPos),
        Just(ConeTag::Zero),
    ]
}

/// Banded, strictly diagonally dominant matrix from off-diagonal draws.
fn banded(n: usize, bw: usize, off: &[f64]) -> SymBanded {
    let mut h = SymBanded::zeros(n, bw);
    let mut row = vec![0.0; n];
    let mut it = off.iter().cycle();
    for i in 0..n {
        for d in 1..=bw.min(i) {
            let v = *it.next().unwrap();
            h.set(i, i - d, v);
            row[i] += v.abs();
            row[i - d] += v.abs();
        }
    }
    for (i, r) in row.iter().enumerate() {
        h.set(i, i, r + 0.5);
    }
    h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn banded_cholesky_matches_dense(n in 1usize..40, bw in 0usize..4, off in prop::collection::vec(-1.0..1.0f64, 1..20), rhs_seed in 0u64..1000) {
        let h = banded(n, bw, &off);
        let b: Vec<f64> = (0..n).map(|i| ((i as u64 * 31 + rhs_seed) % 17) as f64 - 8.0).collect();
        let x = h.cholesky().unwrap().solve(&b);
        let dense = DMatrix::from_fn(n, n, |i, j| h.get(i, j));
        let reference = dense.cholesky().unwrap().solve(&nalgebra::DVector::from_vec(b));
        for i in 0..n {
            prop_assert!((x[i] - reference[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn qp_solvers_agree(n in 1usize..60, bw in 0usize..3, off in prop::collection::vec(-1.0..1.0f64, 1..10),
                        b in prop::collection::vec(-3.0..3.0f64, 60), bounds in prop::collection::vec(bound_strategy(), 60),
                        with_eq in any::<bool>()) {
        let h = banded(n, bw, &off);
        let mut prob = QpProblem::direct(&h, b[..n].to_vec(), bounds[..n].to_vec());
        if with_eq {
            prob = prob.with_equality((0..n).map(|i| 1.0 + (i % 3) as f64).collect());
        }
        let a = solve_qp_robust(&prob, 1e-11, 200).unwrap();
        let p = solve_qp_pg(&prob, 1e-12, 400_000).unwrap();
        for i in 0..n {
            prop_assert!((a.x[i] - p.x[i]).abs() < 1e-8, "{} vs {}", a.x[i], p.x[i]);
        }
        prop_assert!(p.report.objective_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn inverse_metric_qp_agrees(n in 4usize..24, t in prop::collection::vec(-3.0..3.0f64, 24),
                                bounds in prop::collection::vec(bound_strategy(), 24)) {
        let sys = system(1, n);
        let k = sys.len();
        let target: Vec<f64> = (0..k).map(|i| t[i] * sys.lumped()[i]).collect();
        let prob = QpProblem::inverse_stiffness(&sys, target, bounds[..k].to_vec());
        let a = solve_qp_robust(&prob, 1e-10, 200).unwrap();
        let p = solve_qp_pg(&prob, 1e-13, 400_000).unwrap();
        for i in 0..k {
            prop_assert!((a.x[i] - p.x[i]).abs() < 1e-7, "{} vs {}", a.x[i], p.x[i]);
        }
    }

    #[test]
    fn stiffness_metric_identities(n in 2usize..50, v in prop::collection::vec(-1.0..1.0f64, 50)) {
        let sys = system(1, n);
        let v = PrimalVec::new(v[..sys.len()].to_vec());
        let kv = sys.apply_stiffness(&v);
        prop_assert!((sys.dual_norm(&kv).unwrap() - sys.energy_norm(&v)).abs() < 1e-10);
        let back = sys.apply_inverse(&kv).unwrap();
        for i in 0..sys.len() {
            prop_assert!((back[i] - v[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn bipolar_and_moreau(tags in prop::collection::vec(tag_strategy(), 1..30), v in prop::collection::vec(-2.0..2.0f64, 30)) {
        let d = tags.len();
        let w = vec![0.25; d];
        let cone = ConeSpec::from_tags(tags);
        let polar = cone.polar(&w).unwrap();
        prop_assert_eq!(&polar.polar(&w).unwrap(), &cone);
        // v = P_C v + P_{C°} v with orthogonal parts
        let v = &v[..d];
        let pc = cone.project(v).unwrap();
        let pp = polar.project(v).unwrap();
        let mut pairing = 0.0;
        for i in 0..d {
            prop_assert!((pc[i] + pp[i] - v[i]).abs() < 1e-15);
            pairing += w[i] * pc[i] * pp[i];
        }
        prop_assert!(pairing.abs() < 1e-15);
        prop_assert!(cone.contains(&pc, 0.0) && polar.contains(&pp, 0.0));
    }

    #[test]
    fn critical_cone_inside_tangent_and_orthogonal(y in prop::collection::vec(-1.0..1.0f64, 1..30), zero_mask in prop::collection::vec(any::<bool>(), 30),
                                                  inner in prop::collection::vec(-0.99..0.99f64, 30), z in prop::collection::vec(-1.0..1.0f64, 30)) {
        let d = y.len();
        let y: Vec<f64> = (0..d).map(|i| if zero_mask[i] { 0.0 } else { y[i] }).collect();
        // q = sign(y) off the zero set, anything in the box on it
        let q: Vec<f64> = (0..d).map(|i| if y[i] == 0.0 { if i % 3 == 0 { 1.0 } else { inner[i] } } else { y[i].signum() }).collect();
        let crit = critical_cone(&q, &y, TOL_ACTIVE, zero_threshold(&y)).unwrap();
        let tan = tangent_cone(&q, TOL_ACTIVE);
        let member = crit.project(&z[..d]).unwrap();
        prop_assert!(tan.contains(&member, 0.0));
        let pairing: f64 = member.iter().zip(&y).map(|(a, b)| a * b).sum();
        prop_assert!(pairing == 0.0);
    }

    #[test]
    fn normal_cone_invariant_under_scaling(y in prop::collection::vec(-1.0..1.0f64, 7), scale in 0.001..1000.0f64) {
        let sys = system(1, 8);
        let q = BoxElem::sign_of(&y);
        let y1 = PrimalVec::new(y.clone());
        let y2 = y1.scaled(scale);
        prop_assert!(normal_cone_contains(&sys, &q, &y1, 1e-14));
        prop_assert!(normal_cone_contains(&sys, &q, &y2, 1e-14 * scale.max(1.0)));
        let flipped = BoxElem::sign_of(&y.iter().map(|v| -v).collect::<Vec<_>>());
        prop_assert_eq!(normal_cone_contains(&sys, &flipped, &y1, 1e-14), normal_cone_contains(&sys, &flipped, &y2, 1e-14 * scale.max(1.0)));
    }

    #[test]
    fn cone_distance_monotone_under_enlargement(tags in prop::collection::vec(tag_strategy(), 15), t in prop::collection::vec(-1.0..1.0f64, 15)) {
        let sys = system(1, 16);
        let target = DualVec::new(t.iter().map(|v| v / 16.0).collect());
        let small = ConeSpec::from_tags(tags.clone());
        // enlarging: every tag becomes free where the coordinate index is even
        let big = ConeSpec::from_tags(tags.iter().enumerate().map(|(i, &c)| if i % 2 == 0 { ConeTag::Free } else { c }).collect());
        let ds = cone_distance(&sys, &target, &small).unwrap().distance;
        let db = cone_distance(&sys, &target, &big).unwrap().distance;
        prop_assert!(db <= ds + 1e-12);
    }

    #[test]
    fn vi_lipschitz_in_load(a in prop::collection::vec(-4.0..4.0f64, 31), b in prop::collection::vec(-4.0..4.0f64, 31)) {
        let sys = system(1, 32);
        let f1 = sys.lumped_functional(&a);
        let f2 = sys.lumped_functional(&b);
        let y1 = solve_primal(&sys, &f1, TOL_VI).unwrap().y;
        let y2 = solve_primal(&sys, &f2, TOL_VI).unwrap().y;
        let lhs = sys.energy_norm(&(&y1 - &y2));
        let rhs = sys.dual_norm(&(&f1 - &f2)).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn zero_solution_characterization(a in prop::collection::vec(-1.5..1.5f64, 15)) {
        let sys = system(1, 16);
        let f = sys.lumped_functional(&a);
        let sol = solve_primal(&sys, &f, TOL_VI).unwrap();
        let inside = a.iter().all(|v| v.abs() <= 1.0 + 1e-9);
        prop_assert_eq!(sol.y.iter().all(|&v| v == 0.0), inside);
    }

    #[test]
    fn derivative_positively_homogeneous(c in prop::collection::vec(-3.0..3.0f64, 31), g in prop::collection::vec(-1.0..1.0f64, 31), alpha in 0.01..100.0f64) {
        let sys = system(1, 32);
        let f = sys.lumped_functional(&c);
        let vi = solve_primal(&sys, &f, TOL_VI).unwrap();
        let g = sys.lumped_functional(&g);
        let d1 = derivative_s(&sys, &vi, &g, 1e-12).unwrap();
        let d2 = derivative_s(&sys, &vi, &g.scaled(alpha), 1e-12).unwrap();
        for i in 0..sys.len() {
            prop_assert!((alpha * d1.delta[i] - d2.delta[i]).abs() <= 1e-10 * alpha.max(1.0));
        }
    }

    #[test]
    fn finite_boxes_are_polyhedric(d in 1usize..12, pattern in prop::collection::vec(0u8..4, 12), seed in any::<u64>()) {
        let bx = FdBox::symmetric(d);
        // 0: lower face, 1: upper face, 2 and 3: interior
        let w: Vec<f64> = (0..d).map(|i| match pattern[i] { 0 => -1.0, 1 => 1.0, 2 => 0.3, _ => -0.6 }).collect();
        let eta: Vec<f64> = (0..d).map(|i| match pattern[i] { 0 if i % 2 == 0 => -0.7, 1 if i % 2 == 1 => 1.3, _ => 0.0 }).collect();
        let mut rng = StdRng::seed_from_u64(seed);
        let cert = polyhedricity_check_fd(&bx, &w, &eta, 20, &mut rng).unwrap();
        prop_assert!(cert.passed, "{:?}", cert);
    }
}

#[test]
fn analytic_load_solutions() {
    let sys = system(1, 40);
    let f = load_vector(sys.mesh(), "const:2").unwrap();
    let sol = solve_primal(&sys, &f, TOL_VI).unwrap();
    for k in 0..sys.len() {
        let x = sys.mesh().node(k)[0];
        assert!((sol.y[k] - x * (1.0 - x) / 2.0).abs() <= 1e-12);
    }
    assert!(sol.q.iter().all(|&v| v == 1.0));
}

#[test]
fn active_set_solver_reports_history() {
    let id = SymBanded::identity(4);
    let prob = QpProblem::direct(
        &id,
        vec![1.0, -1.0, 0.5, 3.0],
        vec![Bound::Interval { lo: 0.0, hi: 1.0 }; 4],
    );
    let sol = solve_qp(&prob, 1e-12, 10).unwrap();
    assert_eq!(sol.x, vec![1.0, 0.0, 0.5, 1.0]);
    assert_eq!(sol.report.residual_history.len(), sol.report.iterations);
    assert!(sol.multipliers[0] <= 0.0 && sol.multipliers[1] >= 0.0 && sol.multipliers[2] == 0.0);
}
