use beam_lqr::kernel_assembly::{synthesize_profile, tail_report, WeightProfile};
use beam_lqr::modal_riccati::{BeamParams, ModalWeight};

fn report(alpha: f64, r: f64) -> beam_lqr::kernel_assembly::ConvergenceReport {
    let params = BeamParams::new(alpha, 1.0, 1.0).unwrap();
    let profile = WeightProfile {
        amplitude: 1.0,
        decay: r,
        order: 64,
        mask: None,
        base: ModalWeight::identity(),
    };
    let sols: Vec<_> = synthesize_profile(&profile, &params)
        .unwrap()
        .into_iter()
        .map(|m| (m.n, m.riccati))
        .collect();
    tail_report(&sols, &profile, &params).unwrap()
}

#[test]
fn gain_increments_decay_at_least_like_r_minus_one() {
    let cases = [
        (0.5, 1.5),
        (0.5, 3.0),
        (0.5, 9.0),
        (2.0, 1.5),
        (2.0, 9.0),
        (0.0, 1.2),
        (0.0, 1.5),
        (0.0, 2.0),
    ];
    for (alpha, r) in cases {
        let fitted = report(alpha, r).fitted_gain.unwrap();
        assert!(fitted > r - 1.0 - 0.2, "alpha {alpha}, r {r}: {fitted}");
    }
}

#[test]
fn undamped_gain_decays_like_half_r() {
    // without damping the gain is dominated by n pi p22 ~ n^{-r/2}
    for r in [3.0, 6.0, 9.0] {
        let fitted = report(0.0, r).fitted_gain.unwrap();
        assert!((fitted - r / 2.0).abs() < 0.2, "r {r}: {fitted}");
    }
}

#[test]
fn undamped_value_kernel_rates() {
    let rep = report(0.0, 9.0);
    assert!(rep.bounds_hold());
    assert!((rep.fitted_p22.unwrap() - 5.5).abs() < 0.3);
    // p11 ~ n^4 p22 ~ n^{3 - r/2}
    assert!((rep.fitted_p11.unwrap() - 1.5).abs() < 0.3);
    assert!(rep.verdicts.p11_converges);
    let slow = report(0.0, 1.5);
    assert!(!slow.verdicts.p11_converges);
    assert!(slow.verdicts.gain_converges);
}

#[test]
fn damped_p22_rate() {
    let rep = report(2.0, 9.0);
    assert_eq!(rep.p22_expected_exponent, 9.0);
    assert!((rep.fitted_p22.unwrap() - 9.0).abs() < 0.3);
}
