use polariton::model::fixtures::flux5;
use polariton::steady::{
    coupled_steady_states, fixed_point_residual, fold_points, ramp_up_branch, stable_branch_count,
};
use polariton::units::{ghz, mhz};
use polariton::{DriveSpec, QubitState, SystemParams};
use proptest::prelude::*;

prop_compose! {
    fn system()(
        delta in -300.0..300.0f64,
        u_a in 1.0..30.0f64,
        g_zz in 0.0..50.0f64,
        g_ac in 20.0..300.0f64,
        kappa_a in 2.0..20.0f64,
        kappa_c in 2.0..20.0f64,
    ) -> SystemParams {
        SystemParams {
            omega_q: ghz(6.0),
            omega_a: ghz(7.0) + mhz(delta),
            omega_c: ghz(7.0),
            u_a: mhz(u_a),
            g_zz: mhz(g_zz),
            g_ac: mhz(g_ac),
            kappa_a: mhz(kappa_a),
            kappa_c: mhz(kappa_c),
            t1: 1e-5,
            t2: 1e-5,
        }
    }
}

fn eta_strategy() -> impl Strategy<Value = QubitState> {
    prop_oneof![Just(QubitState::Ground), Just(QubitState::Excited)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn one_or_three_roots_all_fixed_points(
        sys in system(),
        eta in eta_strategy(),
        detune in -800.0..400.0f64,
        log_amp in -1.0..2.5f64,
    ) {
        let drive = DriveSpec::new(ghz(7.0) + mhz(detune), mhz(10f64.powf(log_amp)));
        let branches = coupled_steady_states(&sys, eta, &drive).unwrap();
        let marginal = branches.iter().any(|b| b.marginal);
        prop_assert!(branches.len() == 1 || branches.len() == 3 || (branches.len() == 2 && marginal));
        for b in &branches {
            let scale = sys.kappa_c.max(sys.kappa_a) * (b.alpha.norm() + b.gamma.norm()) + drive.amplitude;
            prop_assert!(fixed_point_residual(&sys, eta, &drive, b) <= 1e-9 * scale);
        }
        prop_assert!(branches.windows(2).all(|w| w[0].n_a <= w[1].n_a));
    }

    #[test]
    fn drive_and_kerr_scaling(
        sys in system(),
        eta in eta_strategy(),
        detune in -600.0..300.0f64,
        amp in 1.0..100.0f64,
        lambda in 0.2..5.0f64,
    ) {
        let drive = DriveSpec::new(ghz(7.0) + mhz(detune), mhz(amp));
        let scaled_sys = SystemParams { u_a: sys.u_a / (lambda * lambda), ..sys };
        let scaled_drive = DriveSpec::new(drive.omega_d, lambda * drive.amplitude);
        let a = coupled_steady_states(&sys, eta, &drive).unwrap();
        let b = coupled_steady_states(&scaled_sys, eta, &scaled_drive).unwrap();
        prop_assume!(a.len() == b.len() && !a.iter().chain(&b).any(|x| x.marginal));
        for (x, y) in a.iter().zip(&b) {
            let norm = lambda * (x.alpha.norm() + x.gamma.norm());
            prop_assert!((lambda * x.alpha - y.alpha).norm() <= 1e-9 * norm);
            prop_assert!((lambda * x.gamma - y.gamma).norm() <= 1e-9 * norm);
        }
    }

    #[test]
    fn excited_state_equals_shifted_ground_state(
        sys in system(),
        detune in -600.0..300.0f64,
        amp in 1.0..100.0f64,
    ) {
        let drive = DriveSpec::new(ghz(7.0) + mhz(detune), mhz(amp));
        let shifted = SystemParams { omega_a: sys.omega_a - 2.0 * sys.g_zz, ..sys };
        let e = coupled_steady_states(&sys, QubitState::Excited, &drive).unwrap();
        let g = coupled_steady_states(&shifted, QubitState::Ground, &drive).unwrap();
        prop_assert_eq!(e.len(), g.len());
        for (x, y) in e.iter().zip(&g) {
            let norm = x.alpha.norm() + x.gamma.norm();
            prop_assert!((x.alpha - y.alpha).norm() <= 1e-9 * norm.max(1e-300));
            prop_assert_eq!(x.stable, y.stable);
        }
    }
}

#[test]
fn low_branch_grows_monotonically_until_its_fold() {
    let sys = flux5();
    for (eta, f) in [(QubitState::Excited, 7.52), (QubitState::Ground, 7.56)] {
        let w = ghz(f);
        let fold = fold_points(&sys, eta, w).expect("bistable column");
        let mut last = 0.0;
        for k in 1..200 {
            let amp = fold.b_up * k as f64 / 200.0;
            let b = ramp_up_branch(&sys, eta, &DriveSpec::new(w, amp)).unwrap();
            assert!(b.n_a >= last, "{eta} amplitude {amp}");
            last = b.n_a;
        }
    }
}

#[test]
fn stable_count_changes_only_at_folds() {
    let sys = flux5();
    let eta = QubitState::Excited;
    let w = ghz(7.52);
    let fold = fold_points(&sys, eta, w).unwrap();
    let count = |amp: f64| stable_branch_count(&sys, eta, &DriveSpec::new(w, amp)).unwrap();
    for k in 1..300 {
        let amp = 2.0 * fold.b_up * k as f64 / 300.0;
        let expected = if amp > fold.b_down * 1.001 && amp < fold.b_up * 0.999 {
            2
        } else if amp < fold.b_down * 0.999 || amp > fold.b_up * 1.001 {
            1
        } else {
            continue;
        };
        assert_eq!(count(amp), expected, "amplitude ratio {}", amp / fold.b_up);
    }
}
