use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sofr_core::estimation::{estimate, EstimationOptions, HStructure, MeasurementErrors};
use sofr_core::math::mean_sd;
use sofr_core::mc::{sim_study, simulate_panel, SimStudyConfig};
use sofr_core::ModelParams;

#[test]
fn one_factor_mean_reversion_recovered() {
    let truth = ModelParams::vasicek(0.4, 0.02, 0.008, 0.6, 0.015).unwrap();
    let cfg = SimStudyConfig {
        n_obs: 250,
        tick: 0.0,
        tau_1m: (0..4).map(|i| (30 * i) as f64 / 360.0).collect(),
        tau_3m: vec![0.25, 0.5],
        ..SimStudyConfig::default()
    };
    let opts = EstimationOptions {
        restarts: 1,
        ..EstimationOptions::default()
    };
    let h = MeasurementErrors::per_kind(2e-5, 2e-5);
    let mut kappa = vec![];
    let mut sigma = vec![];
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let (panel, _) = simulate_panel(&truth, &cfg, &mut rng).unwrap();
        let noisy = {
            use rand_distr::{Distribution, Normal};
            let n = Normal::new(0.0, 2e-5).unwrap();
            let mut p = panel.clone();
            for row in &mut p.rows {
                for o in &mut row.observations {
                    o.rate += n.sample(&mut rng);
                }
            }
            p
        };
        let fit = estimate(&noisy, &truth, &h, &opts).unwrap();
        kappa.push(fit.params.lambda);
        sigma.push(fit.params.sigma[(0, 0)]);
    }
    let (mk, sk) = mean_sd(&kappa);
    let (ms, ss) = mean_sd(&sigma);
    assert!((mk - 0.4).abs() <= 2.0 * sk, "kappa {mk} sd {sk}");
    assert!((ms - 0.008).abs() <= 2.0 * ss, "sigma {ms} sd {ss}");
}

#[test]
fn per_slot_measurement_errors_estimate() {
    let truth = ModelParams::reference_afns3();
    let cfg = SimStudyConfig {
        n_obs: 60,
        ..SimStudyConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (panel, _) = simulate_panel(&truth, &cfg, &mut rng).unwrap();
    let h = MeasurementErrors::uniform(HStructure::PerSlot, 1.5e-5, panel.n_slots());
    let fit = estimate(&panel, &truth, &h, &EstimationOptions { restarts: 0, ..Default::default() }).unwrap();
    assert_eq!(fit.measurement_error_sd().len(), 12);
    assert!(fit.loglik.is_finite());
}

#[test]
fn study_is_reproducible() {
    let truth = ModelParams::reference_afns3();
    let cfg = SimStudyConfig {
        n_replications: 3,
        n_obs: 80,
        ..SimStudyConfig::default()
    };
    let a = sim_study(&truth, &cfg).unwrap();
    let b = sim_study(&truth, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.n_succeeded + a.n_failed, 3);
    for r in a.params.iter().chain(a.states.iter().map(|s| &s.summary)) {
        assert!(r.q05 <= r.q25 && r.q25 <= r.median && r.median <= r.q75 && r.q75 <= r.q95);
    }
}
