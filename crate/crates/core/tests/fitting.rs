use polycreep::dataio::{dataset_from_curve, presets, synthetic_dataset, SyntheticSpec};
use polycreep::fitting::{
    creep_error, fit_dataset, fit_many, nelder_mead, ExperimentalDataset, FitConfig,
    NelderMeadConfig,
};
use polycreep::uniaxial::{simulate_creep, CreepOptions};
use polycreep::{Execution, MaterialParams};
use proptest::prelude::*;

fn hfpe285() -> MaterialParams {
    presets().get("hfpe285").unwrap().params()
}

fn synthetic(noise: f64, seed: u64) -> ExperimentalDataset {
    let mp = hfpe285();
    let tau = mp.retardation_time();
    let mut spec = SyntheticSpec::new(mp, 0.45 * 43.0e6, 5.0 * tau, 5.0 * tau);
    spec.noise = noise;
    spec.seed = seed;
    synthetic_dataset(&spec).unwrap()
}

fn within_initial_span(x0: &[f64], x: &[f64], cfg: &NelderMeadConfig) -> bool {
    x.iter().zip(x0).all(|(&v, &v0)| {
        let step = if v0 != 0.0 {
            cfg.initial_step * v0.abs()
        } else {
            cfg.initial_step
        };
        v >= v0 && v <= v0 + step
    })
}

#[test]
fn flat_coordinate_does_not_drift() {
    let cfg = NelderMeadConfig::default();
    let x0 = [1.0, 3.0];
    let r = nelder_mead(|x: &[f64]| (x[0] - 1.0).powi(2), &x0, &cfg);
    assert!(within_initial_span(&x0[1..], &r.x[1..], &cfg), "{:?}", r.x);
    assert!(r.converged);

    let x0 = [-2.0, 0.0, 5.0];
    let r = nelder_mead(|_: &[f64]| 4.0, &x0, &cfg);
    assert!(within_initial_span(&x0, &r.x, &cfg), "{:?}", r.x);
    assert_eq!(r.f, 4.0);
}

#[test]
fn simulated_data_fits_exactly() {
    let mp = hfpe285();
    let ds = synthetic(0.0, 1);
    assert!(creep_error(&mp, &ds, 0.5, &CreepOptions::default()) < 1e-10);
    let fit = fit_dataset(&ds, &FitConfig::new(mp)).unwrap();
    assert_eq!(fit.iterations, 0);
    assert!(fit.converged);
}

#[test]
fn fitted_curve_reproduces_the_source() {
    let truth = hfpe285();
    let ds = synthetic(0.0, 1);
    let start =
        MaterialParams::new(truth.mu_p_bar * 1.3, truth.mu_g_bar * 0.7, truth.eta * 1.5).unwrap();
    let fit = fit_dataset(&ds, &FitConfig::new(start)).unwrap();
    let program = ds.program();
    let a = simulate_creep(&program, &truth, &CreepOptions::default()).unwrap();
    let b = simulate_creep(&program, &fit.params(), &CreepOptions::default()).unwrap();
    let mut worst = 0.0f64;
    for i in 0..=500 {
        let t = a.t_end() * i as f64 / 500.0;
        worst = worst.max((a.strain_at(t).unwrap() - b.strain_at(t).unwrap()).abs());
    }
    assert!(worst <= 1e-4, "{worst}");
}

#[test]
fn batch_fits_match_single_fits() {
    let sets: Vec<_> = (0..3).map(|s| synthetic(0.005, 10 + s)).collect();
    let cfg = FitConfig::new(hfpe285());
    let seq = fit_many(&sets, &cfg, Execution::Sequential);
    for (ds, r) in sets.iter().zip(&seq) {
        assert_eq!(r.as_ref().unwrap(), &fit_dataset(ds, &cfg).unwrap());
    }
    #[cfg(feature = "parallel")]
    assert_eq!(fit_many(&sets, &cfg, Execution::Parallel), seq);
}

#[test]
fn curve_export_becomes_a_dataset() {
    let mp = hfpe285();
    let ds = synthetic(0.0, 1);
    let sol = simulate_creep(&ds.program(), &mp, &CreepOptions::default()).unwrap();
    let back = dataset_from_curve(&sol.curve(), ds.stress).unwrap();
    assert!(back.has_unload());
    assert!(creep_error(&mp, &back, 0.5, &CreepOptions::default()) < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn error_ignores_sample_order(seed in any::<u64>(), w in 0.0f64..1.0) {
        let ds = synthetic(0.01, 7);
        let mut shuffled = ds.clone();
        let n = shuffled.load.len();
        for i in 0..n {
            let j = (seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) % n as u64) as usize;
            shuffled.load.swap(i, j);
        }
        shuffled.unload.reverse();
        let mp = MaterialParams::new(5e8, 1.2e9, 4e13).unwrap();
        let opts = CreepOptions::default();
        let a = creep_error(&mp, &ds, w, &opts);
        let b = creep_error(&mp, &shuffled, w, &opts);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}
