//! Property tests over sampling, reweighting, norms, certification and I/O.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparse_hinf::analysis::{hinf_norm, sample_contraction, sample_diagonal, sample_rng, CertificationReport, CERT_TOL};
use sparse_hinf::cli::{read_csv, write_csv, ActiveFlag, MatrixSpec, SweepRow};
use sparse_hinf::design::reweight;
use sparse_hinf::linalg::{sigma_max, Mat};
use sparse_hinf::lmi::{assemble_bounded_real, LmiOptions};
use sparse_hinf::sdp::{compile, solve, Objective, SolveStatus, SolverSettings};
use sparse_hinf::smd::{smd_lft, SweepParam};
use sparse_hinf::system_model::{close_delta_loop, ObserverGain, PrecisionVector, StateSpace};

use common::{chain_state_matrix, random_stable};

proptest! {
    #[test]
    fn contractions_stay_in_the_unit_ball(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..6, boundary in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = sample_contraction(rows, cols, &mut rng, boundary);
        prop_assert_eq!((f.nrows(), f.ncols()), (rows, cols));
        let s = sigma_max(&f);
        prop_assert!(s <= 1.0 + 1e-12);
        if boundary {
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn diagonal_samples_are_admissible(seed in any::<u64>(), n in 1usize..8, boundary in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = sample_diagonal(n, &mut rng, boundary);
        for i in 0..n {
            for j in 0..n {
                let x = d[(i, j)];
                if i != j {
                    prop_assert_eq!(x, 0.0);
                } else if boundary {
                    prop_assert_eq!(x.abs(), 1.0);
                } else {
                    prop_assert!(x.abs() <= 1.0);
                }
            }
        }
    }

    #[test]
    fn per_sample_streams_are_reproducible(seed in any::<u64>(), id in 0u64..1000) {
        let a = sample_contraction(3, 4, &mut sample_rng(seed, id), false);
        let b = sample_contraction(3, 4, &mut sample_rng(seed, id), false);
        let c = sample_contraction(3, 4, &mut sample_rng(seed, id + 1), false);
        prop_assert_eq!(&a, &b);
        prop_assert_ne!(&a, &c);
    }

    #[test]
    fn reweighting_inverts_the_offset_magnitude(beta in proptest::collection::vec(-1e3f64..1e3, 1..10), eps in 1e-6f64..1.0) {
        let rho = reweight(&beta, eps);
        for (r, b) in rho.iter().zip(&beta) {
            prop_assert!(*r > 0.0 && *r <= 1.0 / eps);
            prop_assert!((r * (eps + b.abs()) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn certification_fold_is_consistent(norms in proptest::collection::vec(0.0f64..2.0, 1..50), gamma in 0.5f64..1.5) {
        let r = CertificationReport::from_norms(gamma, &norms);
        let bound = gamma * (1.0 + CERT_TOL);
        let max = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(r.worst_norm, max);
        prop_assert_eq!(norms[r.worst_sample_id], max);
        prop_assert_eq!(r.passed, max <= bound);
        prop_assert_eq!(r.violations.len(), norms.iter().filter(|&&x| x > bound).count());
        prop_assert_eq!(r.n_samples, norms.len() - 1);
        prop_assert_eq!(r.nominal_norm, norms[0]);
    }

    #[test]
    fn lft_closure_is_the_physical_chain(c0 in 0.0f64..0.9, c1 in 0.0f64..0.9, d in proptest::collection::vec(-1.0f64..=1.0, 6)) {
        let plant = smd_lft(c0, c1, &[1.0; 3]).unwrap();
        let delta = Mat::from_diagonal(&nalgebra::DVector::from_vec(d.clone()));
        let closed = close_delta_loop(&plant, &ObserverGain::zeros(6, 6), &PrecisionVector::uniform(6, 1.0), &delta).unwrap();
        let k = [1.0 + c0 * d[0], 1.0 + c0 * d[1], 1.0 + c0 * d[2]];
        let xi = [1.0 + c1 * d[3], 1.0 + c1 * d[4], 1.0 + c1 * d[5]];
        let got = closed.a.view((0, 0), (6, 6)).into_owned();
        prop_assert!((got - chain_state_matrix(&k, &xi)).amax() <= 1e-12);
    }

    #[test]
    fn matrix_spec_round_trips(rows in 0usize..5, cols in 0usize..5, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Mat::from_fn(rows, cols, |_, _| rng.random_range(-1e6..1e6));
        prop_assert_eq!(MatrixSpec::from_mat(&m).to_mat("m").unwrap(), m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn norm_scales_and_ignores_coordinates(seed in any::<u64>(), alpha in 0.1f64..10.0) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=5);
        let ss = random_stable(&mut rng, n, 2, 2);
        let g = hinf_norm(&ss, 1e-8, None).unwrap();
        let scaled = StateSpace::new(ss.a.clone(), &ss.b * alpha, ss.c.clone(), &ss.d * alpha).unwrap();
        prop_assert!((hinf_norm(&scaled, 1e-8, None).unwrap() / (alpha * g) - 1.0).abs() <= 1e-6);
        let t = Mat::from_fn(n, n, |i, j| if i == j { 2.0 } else { 0.0 } + rng.random_range(-0.5..0.5));
        if let Some(ti) = t.clone().try_inverse() {
            let similar = StateSpace::new(&t * &ss.a * &ti, &t * &ss.b, &ss.c * &ti, ss.d.clone()).unwrap();
            prop_assert!((hinf_norm(&similar, 1e-8, None).unwrap() / g - 1.0).abs() <= 1e-5);
        }
    }

    #[test]
    fn bounded_real_lmi_brackets_the_norm(seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=4);
        let ss = random_stable(&mut rng, n, 1, 1);
        let g = hinf_norm(&ss, 1e-8, None).unwrap();
        let status = |gamma: f64| {
            let asm = assemble_bounded_real(&ss, gamma, &LmiOptions::default()).unwrap();
            solve(&compile(&asm.space, &Objective::Feasibility, &asm.lmis).unwrap(), &SolverSettings::default()).status
        };
        prop_assert_eq!(status(1.05 * g), SolveStatus::Optimal);
        prop_assert_eq!(status(0.95 * g), SolveStatus::Infeasible);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sweep_csv_round_trips(values in proptest::collection::vec((0.0f64..2.0, 0u8..3, proptest::option::of(0.0f64..1e3), any::<bool>()), 1..20)) {
        let rows: Vec<SweepRow> = values
            .iter()
            .enumerate()
            .map(|(i, &(v, flag, beta, certified))| SweepRow {
                sweep_param: if i % 2 == 0 { SweepParam::Gamma } else { SweepParam::C0 },
                sweep_value: v,
                sensor_index: i,
                active: [ActiveFlag::Active, ActiveFlag::Inactive, ActiveFlag::NotAvailable][flag as usize],
                beta,
                certified,
                worst_norm: beta.map(|b| b / 7.0),
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        write_csv(&path, &rows).unwrap();
        prop_assert_eq!(read_csv(&path).unwrap(), rows);
    }
}
