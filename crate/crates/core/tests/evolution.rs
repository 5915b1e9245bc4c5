use polycreep::evolution::{
    bp_rate, dg_rate, drive, relax, DriveOptions, EvolutionState, Trajectory,
};
use polycreep::kinematics::MotionProtocol;
use polycreep::material::{dissipation_rate, ThermalState};
use polycreep::tensors::{SpdFactor, SymTensor3, Tensor3};
use polycreep::validate::{random_spd, rotation};
use polycreep::MaterialParams;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pmr15() -> MaterialParams {
    MaterialParams::new(3.76e8, 4.42e8, 6.22e12).unwrap()
}

// least-squares slope of ln(T − T_inf) against t
fn decay_rate(traj: &Trajectory, t_inf: f64, t_max: f64) -> f64 {
    let pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|s| s.t > 0.0 && s.t <= t_max)
        .map(|s| (s.t, (s.axial_stress - t_inf).ln()))
        .collect();
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    -sxy / sxx
}

#[test]
fn step_relaxation_settles_at_series_modulus() {
    let mp = pmr15();
    let lambda: f64 = 1.001;
    let rate = 2.0 * (mp.mu_p_bar + mp.mu_g_bar) / mp.eta;
    let traj = relax(lambda, &mp, 15.0 / rate, &DriveOptions::default()).unwrap();

    let t0 = traj.samples[0].axial_stress;
    assert!(
        (t0 / (3.0 * mp.mu_p_bar * lambda.ln()) - 1.0).abs() < 2e-3,
        "T0 = {t0}"
    );

    let t_inf = traj.final_sample().unwrap().axial_stress;
    let expect = 3.0 * mp.mu_p_bar * mp.mu_g_bar / (mp.mu_p_bar + mp.mu_g_bar) * lambda.ln();
    assert!(
        (t_inf / expect - 1.0).abs() < 0.02,
        "T_inf = {t_inf}, expected {expect}"
    );

    let ratio = t_inf / t0;
    let expect_ratio = mp.mu_g_bar / (mp.mu_p_bar + mp.mu_g_bar);
    assert!(
        (ratio / expect_ratio - 1.0).abs() < 0.02,
        "{ratio} vs {expect_ratio}"
    );

    for w in traj.samples.windows(2) {
        assert!(w[1].axial_stress <= w[0].axial_stress + 1e-9 * t0);
    }

    let k = decay_rate(&traj, t_inf, 3.0 / rate);
    assert!((k / rate - 1.0).abs() < 0.02, "decay rate {k} vs {rate}");
}

#[test]
fn maxwell_relaxation_decays_to_zero() {
    let mp = MaterialParams::new(3.76e8, 0.0, 6.22e12).unwrap();
    let rate = 2.0 * mp.mu_p_bar / mp.eta;
    let traj = relax(1.001, &mp, 20.0 / rate, &DriveOptions::default()).unwrap();
    let t0 = traj.samples[0].axial_stress;
    let t_end = traj.final_sample().unwrap().axial_stress;
    assert!(t_end.abs() < 1e-6 * t0, "{t_end} of {t0}");
    let k = decay_rate(&traj, 0.0, 3.0 / rate);
    assert!((k / rate - 1.0).abs() < 0.02, "decay rate {k} vs {rate}");
}

#[test]
fn rotated_loading_gives_rotated_response() {
    let mp = pmr15();
    let opts = DriveOptions::default().with_rtol(1e-12);
    let q = rotation(0.4, 1.1, -0.7);
    let base = MotionProtocol::constant_strain_rate(2e-5, (0.0, 2e4));
    let a = drive(&base, &mp, EvolutionState::rest(), &opts).unwrap();
    let b = drive(&base.rotated(q), &mp, EvolutionState::rest(), &opts).unwrap();
    let fa = a.final_sample().unwrap();
    let fb = b.final_sample().unwrap();
    assert_eq!(fa.t, fb.t);
    let bp_err = (fa.b_p.congruence(&q) - fb.b_p).norm() / fa.b_p.norm();
    assert!(bp_err < 1e-10, "{bp_err}");
    let stress_err = (fa.stress.congruence(&q) - fb.stress).norm() / fa.stress.norm();
    assert!(stress_err < 1e-10, "{stress_err}");
    assert!((fa.axial_stress - fb.axial_stress).abs() < 1e-10 * fa.axial_stress.abs());
    assert!((fa.eps_axial - fb.eps_axial).abs() < 1e-12);
}

#[test]
fn shear_drive_keeps_invariants() {
    let mp = pmr15();
    let traj = drive(
        &MotionProtocol::simple_shear(|t| (2e-5 * t, 2e-5), (0.0, 2e4)),
        &mp,
        EvolutionState::rest(),
        &DriveOptions::default(),
    )
    .unwrap();
    assert!(traj.min_dissipation() >= 0.0);
    assert!(traj.max_det_drift() <= 1e-8);
    assert!(traj.max_identity_residual() <= 1e-8);
}

#[test]
fn non_unimodular_start_is_rejected() {
    assert!(EvolutionState::new(SymTensor3::diag(1.1, 1.0, 1.0)).is_err());
}

fn unimodular(rng: &mut ChaCha8Rng) -> SymTensor3 {
    let b = random_spd(rng);
    b * b.det().powf(-1.0 / 3.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn flow_is_isochoric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b_p = random_spd(&mut rng);
        let b_g = random_spd(&mut rng);
        let d = dg_rate(&b_p, &b_g, &pmr15()).unwrap();
        prop_assert!(d.trace().abs() <= 1e-12 * d.norm().max(1e-300) + 1e-25, "{:e}", d.trace());
    }

    #[test]
    fn natural_configuration_stays_unimodular(
        seed in any::<u64>(),
        l in prop::array::uniform8(-1e-4f64..1e-4),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b_p = unimodular(&mut rng);
        let b_g = random_spd(&mut rng);
        let l = Tensor3::from_rows([
            [l[0], l[1], l[2]],
            [l[3], l[4], l[5]],
            [l[6], l[7], -l[0] - l[4]],
        ]);
        let d = dg_rate(&b_p, &b_g, &pmr15()).unwrap();
        let rate = bp_rate(&b_p, &l, &d).unwrap();
        let inv = SpdFactor::new(&b_p).unwrap().inverse();
        let tr = inv.dot(&rate);
        prop_assert!(tr.abs() <= 1e-10 * (rate.norm() + 1e-12), "tr(B_p^-1 dB_p) = {:e}", tr);
    }

    #[test]
    fn dissipation_is_non_negative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mp = pmr15();
        let b_p = unimodular(&mut rng);
        let b_g = random_spd(&mut rng);
        let d = dg_rate(&b_p, &b_g, &mp).unwrap();
        let th = ThermalState::reference(&mp);
        let xi = dissipation_rate(&b_p, &d, &mp, &th).unwrap();
        prop_assert!(xi.rate >= 0.0);
    }
}
