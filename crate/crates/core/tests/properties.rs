use proptest::prelude::*;

use phonon_lattice::envelope::{make_sech, TimeGrid};
use phonon_lattice::lattice::{build, BeamSplitter, EvolveOptions, Lattice, LossMode, NodeParams, TopologyConfig};
use phonon_lattice::pulse::{emission_schedule, CouplerSchedule};
use phonon_lattice::readout::{self, calibrate_thermal_floor, inject_thermal_floor, JointTable};
use phonon_lattice::scatter::{phase_distance, reflection_coefficient, wrap_phase, ScatterParams};
use phonon_lattice::scenarios::{ScenarioConfig, ScenarioId, SweepSpec};

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

/// One phonon released by node 1 into a short interferometer.
fn small_lattice(tp: f64, arm_phase: f64, eta: f64) -> Lattice {
    let dt = 0.5;
    let grid = TimeGrid::spanning(0.0, 600.0, dt).unwrap();
    let mut cfg = TopologyConfig::default();
    cfg.bs = BeamSplitter::with_transmission(tp).unwrap();
    cfg.arm_delay_left = 100.0;
    cfg.arm_delay_right = 100.0;
    cfg.arm_phase = arm_phase;
    let topo = build(&cfg, dt).unwrap();
    let mut n1 = NodeParams::qubit(grid, 0.21);
    n1.schedule = emission_schedule(&make_sech(10.0, 80.0, grid).unwrap(), 0.21).unwrap();
    let mut n2 = NodeParams::qubit(grid, 0.2);
    n2.schedule = CouplerSchedule::window(grid, 150.0, 450.0, 0.1).unwrap();
    let mut lat = Lattice::new(topo, [n1, n2], grid).unwrap();
    lat.loss.arm_efficiency = [eta, eta];
    lat
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sweep_values_are_inclusive_and_monotone(start in -100.0f64..100.0, width in 0.1f64..200.0, count in 2usize..200) {
        let stop = start + width;
        let s = SweepSpec::parse(&format!("x={start}:{stop}:{count}")).unwrap();
        let v = s.values();
        prop_assert_eq!(v.len(), count);
        prop_assert_eq!(v[0], start);
        prop_assert!((v[count - 1] - stop).abs() <= 1e-12 * stop.abs().max(1.0));
        prop_assert!(v.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn reflection_is_all_pass(w in -50.0f64..50.0, kappa in 1e-3f64..5.0, delta in -50.0f64..50.0) {
        let r = reflection_coefficient(w, &ScatterParams::new(kappa, delta).unwrap());
        prop_assert!((r.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_distance_is_a_wrapped_metric(a in -20.0f64..20.0, b in -20.0f64..20.0) {
        let d = phase_distance(a, b);
        prop_assert!((0.0..=std::f64::consts::PI + 1e-12).contains(&d));
        prop_assert!((d - phase_distance(b, a)).abs() < 1e-12);
        prop_assert!(phase_distance(wrap_phase(a), a) < 1e-9);
    }

    #[test]
    fn correction_inverts_two_qubit_readout(p in simplex(4)) {
        let m = readout::measured_two_qubit();
        let back = m.correct(&m.apply(&p).unwrap()).unwrap();
        for (a, b) in p.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn correction_inverts_qutrit_readout(p in simplex(9)) {
        let m = readout::measured_qutrit_1().tensor(&readout::measured_qutrit_2());
        let back = m.correct(&m.apply(&p).unwrap()).unwrap();
        for (a, b) in p.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn thermal_floor_keeps_probability_and_calibrates(p in simplex(4), floor in 1e-4f64..0.05) {
        let t = JointTable::from_vec(2, &p).unwrap();
        let q = inject_thermal_floor(&t, [0.01, 0.02]);
        prop_assert!((q.total() - 1.0).abs() < 1e-12);
        if t.get(1, 1) < floor {
            let th = calibrate_thermal_floor(&t, floor).unwrap();
            prop_assert!((inject_thermal_floor(&t, [th, th]).get(1, 1) - floor).abs() < 1e-9);
        }
    }

    #[test]
    fn emission_respects_the_coupler_cap(sigma in 8.0f64..30.0) {
        let grid = TimeGrid::spanning(0.0, 1200.0, 0.5).unwrap();
        let u = make_sech(sigma, 400.0, grid).unwrap();
        // The sech law peaks at 2/sigma.
        prop_assert!(emission_schedule(&u, 2.0 / sigma * 1.001).is_ok());
        prop_assert!(emission_schedule(&u, 2.0 / sigma * 0.95).is_err());
    }

    #[test]
    fn config_json_round_trips(kappa in 0.05f64..1.0, delta in -100.0f64..100.0, seed in any::<u64>()) {
        let mut c = ScenarioConfig::for_scenario(ScenarioId::MzSingle);
        c.set("scatter.kappa_max", &kappa.to_string()).unwrap();
        c.set("scatter.delta_MHz", &delta.to_string()).unwrap();
        c.seed = seed;
        let back = ScenarioConfig::from_json_str(&c.to_json().to_string()).unwrap();
        prop_assert_eq!(back, c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lossless_channel_conserves_norm(tp in 0.0f64..=1.0, phase in 0.0f64..6.3) {
        let lat = small_lattice(tp, phase, 1.0);
        let ev = lat.evolve(lat.node_state([1, 0]).unwrap(), &EvolveOptions::default()).unwrap();
        for row in &ev.trace.rows {
            prop_assert!((row.joint.total() - 1.0).abs() < 1e-9);
            prop_assert!(row.in_flight <= row.joint.get(0, 0) + 1e-12);
        }
    }

    #[test]
    fn lossy_channel_accounts_for_lost_norm(tp in 0.0f64..=1.0, eta in 0.2f64..1.0) {
        let lat = small_lattice(tp, 0.0, eta);
        let ev = lat.evolve(lat.node_state([1, 0]).unwrap(), &EvolveOptions::default()).unwrap();
        let mut prev = 0.0;
        for row in &ev.trace.rows {
            prop_assert!((row.joint.total() + row.loss - 1.0).abs() < 1e-9);
            prop_assert!(row.loss >= prev - 1e-12);
            prev = row.loss;
        }
    }

    #[test]
    fn jump_trajectories_are_seed_deterministic(seed in any::<u64>()) {
        let mut lat = small_lattice(0.5, 0.0, 0.5);
        lat.loss.mode = LossMode::Jump;
        lat.loss.trajectories = 50;
        lat.loss.seed = seed;
        let a = lat.evolve(lat.node_state([1, 0]).unwrap(), &EvolveOptions::default()).unwrap().trace;
        let b = lat.evolve(lat.node_state([1, 0]).unwrap(), &EvolveOptions::default()).unwrap().trace;
        prop_assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
    }
}
