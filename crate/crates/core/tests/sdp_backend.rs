use nalgebra::DVector;
use proptest::prelude::*;
use sparse_hinf::linalg::{mat, Mat};
use sparse_hinf::lmi::{
    assemble_bounded_real, AffineExpr, AffineMatrixInequality, DecisionVariableSpace, LmiOptions,
};
use sparse_hinf::sdp::{compile, solve, svec, unsvec, Objective, SolveStatus, SolverSettings};
use sparse_hinf::system_model::StateSpace;

fn first_order() -> StateSpace {
    StateSpace::new(mat(1, 1, &[-1.0]), mat(1, 1, &[1.0]), mat(1, 1, &[1.0]), mat(1, 1, &[0.0])).unwrap()
}

fn random_sym(rng: &mut impl rand::Rng, n: usize) -> Mat {
    let a = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a + a.transpose()
}

#[test]
fn degenerate_scalar_program() {
    // minimize beta subject to 3 - beta <= 0
    let mut space = DecisionVariableSpace::new();
    let b = space.add_nonneg_vector("beta", 1, 1e-8).unwrap();
    let expr = AffineExpr::diag_of(&space, b, -1.0).unwrap().plus_const(&mat(1, 1, &[3.0])).unwrap();
    let lmi = AffineMatrixInequality::from_blocks("floor", &space, &[1], vec![((0, 0), expr)], 1e-7).unwrap();
    let prog = compile(&space, &Objective::WeightedL1 { var: b, weights: vec![1.0] }, &[lmi]).unwrap();
    let rep = solve(&prog, &SolverSettings::default());
    assert_eq!(rep.status, SolveStatus::Optimal);
    assert!((rep.objective - 3.0).abs() < 1e-6, "objective {}", rep.objective);
}

#[test]
fn bounded_real_first_order_threshold() {
    let ss = first_order();
    for (gamma, want) in [(1.01, SolveStatus::Optimal), (0.99, SolveStatus::Infeasible)] {
        let asm = assemble_bounded_real(&ss, gamma, &LmiOptions::default()).unwrap();
        let prog = compile(&asm.space, &Objective::Feasibility, &asm.lmis).unwrap();
        let rep = solve(&prog, &SolverSettings::default());
        assert_eq!(rep.status, want, "gamma {gamma}");
    }
}

#[test]
fn objective_nonzeros_follow_weights() {
    let mut space = DecisionVariableSpace::new();
    space.add_symmetric("X", 2).unwrap();
    let b = space.add_nonneg_vector("beta", 6, 1e-8).unwrap();
    let prog = compile(&space, &Objective::WeightedL1 { var: b, weights: vec![1.0; 6] }, &[]).unwrap();
    assert_eq!(prog.objective.iter().filter(|&&c| c != 0.0).count(), 6);
    assert!(compile(&space, &Objective::WeightedL1 { var: b, weights: vec![0.0; 6] }, &[]).is_err());
    assert!(compile(&space, &Objective::WeightedL1 { var: b, weights: vec![1.0; 5] }, &[]).is_err());
}

#[test]
fn svec_inner_product_is_trace() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let a = random_sym(&mut rng, 5);
        let b = random_sym(&mut rng, 5);
        let lhs: f64 = svec(&a).iter().zip(svec(&b)).map(|(x, y)| x * y).sum();
        let rhs = (&a * &b).trace();
        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
    }
}

#[test]
fn solves_are_deterministic() {
    let ss = StateSpace::new(
        mat(2, 2, &[0.0, 1.0, -2.0, -0.7]),
        mat(2, 1, &[0.0, 1.0]),
        mat(1, 2, &[1.0, 0.5]),
        mat(1, 1, &[0.0]),
    )
    .unwrap();
    let asm = assemble_bounded_real(&ss, 3.0, &LmiOptions::default()).unwrap();
    let prog = compile(&asm.space, &Objective::Feasibility, &asm.lmis).unwrap();
    let r1 = solve(&prog, &SolverSettings::default());
    let r2 = solve(&prog, &SolverSettings::default());
    assert_eq!(r1.status, r2.status);
    assert_eq!(r1.v, r2.v);
    assert!((r1.objective - r2.objective).abs() <= 1e-9);
}

proptest! {
    #[test]
    fn unsvec_inverts_svec(entries in proptest::collection::vec(-1e3f64..1e3, 21)) {
        let mut a = Mat::zeros(6, 6);
        let mut k = 0;
        for j in 0..6 {
            for i in 0..=j {
                a[(i, j)] = entries[k];
                a[(j, i)] = entries[k];
                k += 1;
            }
        }
        let back = unsvec(&svec(&a), 6);
        prop_assert!((back - &a).amax() <= 1e-12 * (1.0 + a.amax()));
    }

    #[test]
    fn reported_objective_matches_c_dot_v(floor in 0.1f64..10.0) {
        let mut space = DecisionVariableSpace::new();
        let b = space.add_nonneg_vector("beta", 2, 1e-8).unwrap();
        let expr = AffineExpr::diag_of(&space, b, -1.0).unwrap()
            .plus_const(&Mat::from_diagonal(&DVector::from_vec(vec![floor, 2.0 * floor]))).unwrap();
        let lmi = AffineMatrixInequality::from_blocks("floor", &space, &[2], vec![((0, 0), expr)], 1e-7).unwrap();
        let prog = compile(&space, &Objective::WeightedL1 { var: b, weights: vec![1.0, 0.5] }, &[lmi]).unwrap();
        let rep = solve(&prog, &SolverSettings::default());
        prop_assert_eq!(rep.status, SolveStatus::Optimal);
        let cv: f64 = prog.objective.iter().zip(rep.v.iter()).map(|(c, x)| c * x).sum();
        prop_assert!((rep.objective - cv).abs() <= 1e-9);
        prop_assert!((rep.objective - 2.0 * floor).abs() <= 1e-5 * (1.0 + floor));
    }
}
