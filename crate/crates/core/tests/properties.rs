use std::f64::consts::PI;

use proptest::prelude::*;

use qsl_control::dynamics::{final_fidelity, propagate_forward, simulate, ControlSequence};
use qsl_control::geometry::{
    direct_velocity, distance, energy_uncertainty, fidelity, pontryagin_hamiltonian, xi_state, QuantumState,
};
use qsl_control::grid::{sigma_q, GridSeries, TimeGrid};
use qsl_control::io::{read_controls_csv, write_controls_csv};
use qsl_control::models::{two_level_model, ControlBounds, HamiltonianModel, RydbergModel};
use qsl_control::optimizer::{optimize, project_bounds, OptimizerConfig};
use qsl_control::rng::run_rng;
use qsl_control::tradeoff::{redistribute, uniform_extend};

use qsl_validation::{random_hermitian, random_state, ComplexModel};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig::with_cases(n)
}

proptest! {
    #![proptest_config(cases(128))]

    #[test]
    fn velocity_bounded_by_energy_uncertainty(seed in any::<u64>(), dim in 2usize..8) {
        let mut rng = run_rng(seed, 1);
        let chi = random_state(&mut rng, dim);
        let psi = random_state(&mut rng, dim);
        let h = random_hermitian(&mut rng, dim, 2.0);
        let q = direct_velocity(&chi, &psi, &h).unwrap().q;
        let de = energy_uncertainty(&psi, &h).unwrap();
        prop_assert!(q.abs() <= de * (1.0 + 1e-12) + 1e-14);

        let xi = xi_state(&chi, &psi).unwrap();
        let xi = xi.state().unwrap();
        prop_assert!(xi.inner(&psi).unwrap().norm() < 1e-12);

        let f = fidelity(&chi, &psi).unwrap();
        let hp = pontryagin_hamiltonian(&chi, &psi, &h).unwrap();
        prop_assert!((hp - 2.0 * (f * (1.0 - f)).sqrt() * q).abs() < 1e-12 * de.max(1.0));
    }

    #[test]
    fn distance_is_a_metric(seed in any::<u64>(), dim in 2usize..7) {
        let mut rng = run_rng(seed, 2);
        let a = random_state(&mut rng, dim);
        let b = random_state(&mut rng, dim);
        let c = random_state(&mut rng, dim);
        let ab = distance(&a, &b).unwrap();
        prop_assert!(distance(&a, &a).unwrap() < 1e-7);
        prop_assert!((ab - distance(&b, &a).unwrap()).abs() < 1e-14);
        prop_assert!((0.0..=PI / 2.0 + 1e-15).contains(&ab));
        prop_assert!(ab <= distance(&a, &c).unwrap() + distance(&c, &b).unwrap() + 1e-12);
        // Global phase does not move a state.
        let rotated = QuantumState::new(a.amplitudes() * qsl_validation::c(0.6, 0.8)).unwrap();
        prop_assert!(distance(&a, &rotated).unwrap() < 1e-7);
    }

    #[test]
    fn sigma_q_is_scale_invariant(values in prop::collection::vec(-5.0f64..5.0, 2..30), scale in 0.01f64..100.0) {
        let grid = std::sync::Arc::new(TimeGrid::uniform(1.0, values.len()).unwrap());
        let mean: f64 = values.iter().sum::<f64>() / values.len() as f64;
        prop_assume!(mean.abs() > 0.1);
        let q = GridSeries::new(values, grid).unwrap();
        let scaled = q.map(|x| scale * x);
        let (a, b) = (sigma_q(&q).unwrap(), sigma_q(&scaled).unwrap());
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }

    #[test]
    fn redistribution_preserves_duration(
        seed in any::<u64>(),
        segments in 2usize..40,
        epsilon in 0.0f64..0.2,
    ) {
        let mut rng = run_rng(seed, 3);
        let durations: Vec<f64> = (0..segments).map(|_| 0.1 + rand::Rng::random::<f64>(&mut rng)).collect();
        let grid = std::sync::Arc::new(TimeGrid::new(durations).unwrap());
        let seq = ControlSequence::new(vec![vec![0.5]; segments], grid.clone()).unwrap();
        let nu: Vec<f64> = (0..segments).map(|_| 2.0 * rand::Rng::random::<f64>(&mut rng) - 1.0).collect();
        let nu = GridSeries::new(nu, grid).unwrap();
        let moved = redistribute(&seq, &nu, epsilon).unwrap();
        prop_assert!((moved.duration() - seq.duration()).abs() < 1e-12 * seq.duration());
        prop_assert_eq!(moved.controls(), seq.controls());
    }

    #[test]
    fn uniform_extension_scales_every_segment(segments in 1usize..30, kappa in -0.4f64..0.4) {
        let seq = ControlSequence::constant(&[0.3, 0.7], 2.0, segments).unwrap();
        let ext = uniform_extend(&seq, kappa).unwrap();
        prop_assert!((ext.duration() - 2.0 * (1.0 + kappa)).abs() < 1e-12);
        for (a, b) in ext.grid().durations().iter().zip(seq.grid().durations()) {
            prop_assert!((a - b * (1.0 + kappa)).abs() < 1e-14);
        }
    }

    #[test]
    fn projection_lands_inside_bounds(u in prop::collection::vec(-10.0f64..10.0, 2)) {
        let bounds = [ControlBounds { lo: 0.0, hi: 1.0 }, ControlBounds { lo: -2.0, hi: 3.0 }];
        let p = project_bounds(&u, &bounds);
        for ((x, y), b) in u.iter().zip(&p).zip(&bounds) {
            prop_assert!(b.contains(*y));
            if b.contains(*x) {
                prop_assert_eq!(x, y);
            }
        }
        prop_assert_eq!(project_bounds(&p, &bounds), p);
    }
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn controls_csv_round_trips_exactly(
        seed in any::<u64>(),
        segments in 1usize..20,
        controls in 1usize..4,
    ) {
        let mut rng = run_rng(seed, 4);
        let mut draw = || rand::Rng::random::<f64>(&mut rng);
        let durations: Vec<f64> = (0..segments).map(|_| 1e-9 * (0.01 + draw())).collect();
        let u: Vec<Vec<f64>> = (0..segments).map(|_| (0..controls).map(|_| draw()).collect()).collect();
        let seq = ControlSequence::new(u, std::sync::Arc::new(TimeGrid::new(durations).unwrap())).unwrap();
        let mut buf = Vec::new();
        write_controls_csv(&seq, &mut buf).unwrap();
        let back = read_controls_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.controls(), seq.controls());
        prop_assert_eq!(back.grid().durations(), seq.grid().durations());
    }

    #[test]
    fn evolution_is_unitary_and_length_bounds_distance(seed in any::<u64>(), dim in 2usize..6) {
        let mut rng = run_rng(seed, 5);
        let m = ComplexModel::random(&mut rng, dim, 2, 1.0);
        let u: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..2).map(|_| rand::Rng::random::<f64>(&mut rng)).collect())
            .collect();
        let seq = ControlSequence::new(u, std::sync::Arc::new(TimeGrid::uniform(3.0, 12).unwrap())).unwrap();
        let traj = propagate_forward(&m.initial_state(), &seq, &m).unwrap();
        for s in traj.states() {
            prop_assert!((s.amplitudes().norm() - 1.0).abs() < 1e-12);
        }
        let rec = simulate(&seq, &m).unwrap();
        let d = distance(traj.first(), traj.last()).unwrap();
        prop_assert!(rec.trajectory_length() >= d - 1e-10);
    }
}

proptest! {
    #![proptest_config(cases(16))]

    #[test]
    fn accepted_sweeps_never_lower_fidelity(seed in any::<u64>(), t_frac in 0.3f64..1.5) {
        let omega = 2.0 * PI * 1e7;
        let m = RydbergModel::new(3, omega).unwrap();
        let mut rng = run_rng(seed, 6);
        let u: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..2).map(|_| rand::Rng::random::<f64>(&mut rng)).collect())
            .collect();
        let t = t_frac * 0.3e-6;
        let seq = ControlSequence::new(u, std::sync::Arc::new(TimeGrid::uniform(t, 20).unwrap())).unwrap();
        let cfg = OptimizerConfig { max_sweeps: 30, ..OptimizerConfig::default() };
        let report = optimize(&seq, &m, &cfg).unwrap();
        for w in report.fidelity_history.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-14);
        }
        prop_assert!((final_fidelity(&report.sequence, &m).unwrap() - report.final_fidelity()).abs() < 1e-12);
        for step in report.sequence.controls() {
            prop_assert!(step.iter().zip(m.bounds()).all(|(x, b)| b.contains(*x)));
        }
    }
}

#[test]
fn two_level_optimum_stays_below_rabi_bound() {
    let omega = 1e6;
    let m = two_level_model(omega).unwrap();
    for frac in [0.2, 0.5, 0.9] {
        let t = frac * PI / omega;
        let seq = ControlSequence::constant(&[0.2], t, 10).unwrap();
        let r = optimize(&seq, &m, &OptimizerConfig::default()).unwrap();
        let bound = (omega * t / 2.0).sin().powi(2);
        assert!(r.final_fidelity() <= bound + 1e-12);
        assert!(r.final_fidelity() >= bound - 1e-9);
    }
}
