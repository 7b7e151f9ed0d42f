use sofr_core::futures::{exact_futures_rate, futures_rate, AccrualWindow, ContractKind};
use sofr_core::math::QuadratureScheme;
use sofr_core::mc::{mc_futures_rates, mc_option_price_single, mc_zcb, McConfig, Sampler};
use sofr_core::term_structure::{convexity_3m, convexity_shadow, forward_term_rate};
use sofr_core::{Model, ModelParams};

const X: [f64; 3] = [0.0175, -0.0037, -0.0012];

fn gaussian() -> Model {
    Model::new(ModelParams::reference_afns3()).unwrap()
}

fn shadow() -> Model {
    Model::new(ModelParams::reference_shadow()).unwrap()
}

fn mc(paths: usize) -> McConfig {
    McConfig {
        n_paths: paths,
        dt: 1.0 / 360.0,
        seed: 99,
        antithetic: true,
        sampler: Sampler::Auto,
    }
}

#[test]
fn gaussian_futures_rates_match_simulation() {
    let m = gaussian();
    let ws = vec![
        AccrualWindow::stylized(ContractKind::OneMonth, 0.0, 30),
        AccrualWindow::stylized(ContractKind::OneMonth, 0.5, 30),
        AccrualWindow::stylized(ContractKind::ThreeMonth, 1.0, 90),
        AccrualWindow::stylized(ContractKind::ThreeMonth, 3.0, 90),
    ];
    let est = mc_futures_rates(&m, &X, &ws, &mc(20_000)).unwrap();
    for (w, e) in ws.iter().zip(est) {
        let exact = exact_futures_rate(&m, &X, w).unwrap();
        assert!((exact - e.mean).abs() <= 4.0 * e.std_error + 1e-8, "{exact} vs {e:?}");
    }
}

#[test]
fn bond_prices_match_simulation() {
    let m = gaussian();
    let taus = [0.25, 1.0, 2.0];
    let est = mc_zcb(&m, &X, &taus, &mc(20_000)).unwrap();
    for (t, e) in taus.iter().zip(&est) {
        let p = m.zcb_price(&X, *t).unwrap();
        assert!((p - e.mean).abs() <= 4.0 * e.std_error + 1e-9, "tau {t}: {p} vs {e:?}");
    }
    let f = forward_term_rate(&m, &X, 1.0, 2.0).unwrap();
    let f_mc = est[1].mean / est[2].mean - 1.0;
    let tol = 4.0 * (est[1].std_error + est[2].std_error) / est[2].mean;
    assert!((f - f_mc).abs() <= tol, "{f} vs {f_mc}");
}

#[test]
fn expected_backward_rate_exceeds_forward_rate() {
    let m = gaussian();
    let flat = Model::new(ModelParams::reference_afns3().with_sigma_scale(0.0)).unwrap();
    let quad = QuadratureScheme::default();
    for s in [0.25, 1.0, 4.0] {
        let w = AccrualWindow::stylized(ContractKind::ThreeMonth, s, 90);
        let fut = futures_rate(&m, &X, &w, &quad).unwrap();
        let fwd = forward_term_rate(&m, &X, w.start, w.end).unwrap();
        assert!(fut > fwd);
        let fut0 = futures_rate(&flat, &X, &w, &quad).unwrap();
        let fwd0 = forward_term_rate(&flat, &X, w.start, w.end).unwrap();
        assert!((fut0 - fwd0).abs() < 1e-15);
    }
}

#[test]
fn floor_raises_rates_near_zero_and_vanishes_far_from_it() {
    let quad = QuadratureScheme::default();
    let w = AccrualWindow::stylized(ContractKind::ThreeMonth, 0.5, 90);
    let low = [0.001, -0.001, 0.0];
    let g = futures_rate(&gaussian(), &low, &w, &quad).unwrap();
    let s = futures_rate(&shadow(), &low, &w, &quad).unwrap();
    assert!(s > g + 1e-4, "{s} vs {g}");
    let high = [0.08, 0.0, 0.0];
    let g = futures_rate(&gaussian(), &high, &w, &quad).unwrap();
    let s = futures_rate(&shadow(), &high, &w, &quad).unwrap();
    assert!((s - g).abs() < 1e-9, "{s} vs {g}");
}

#[test]
fn shadow_convexity_uses_simulation_and_flags_noise() {
    let w = AccrualWindow::stylized(ContractKind::ThreeMonth, 1.0, 90);
    let high = [0.08, 0.0, 0.0];
    let c = convexity_shadow(&shadow(), &high, &w, &mc(20_000), 1.0).unwrap();
    assert!(!c.flagged);
    assert!(c.closed_form.is_none());
    let se = c.std_error.unwrap();
    let g = convexity_3m(&gaussian(), &high, &w).unwrap();
    assert!((c.adjustment - g.adjustment).abs() <= 4.0 * se + 1e-8, "{c:?} vs {g:?}");
    let noisy = convexity_shadow(&shadow(), &high, &w, &mc(200), 1e-12).unwrap();
    assert!(noisy.flagged);
}

#[test]
fn option_has_value_only_with_volatility() {
    let quad = QuadratureScheme::default();
    let w = AccrualWindow::stylized(ContractKind::ThreeMonth, 0.5, 90);
    let m = gaussian();
    let base = mc_option_price_single(&m, &X, &w, 0.5, None, &mc(4000), &quad).unwrap();
    let vol = Model::new(ModelParams::reference_afns3().with_sigma_scale(2.0)).unwrap();
    let more = mc_option_price_single(&vol, &X, &w, 0.5, None, &mc(4000), &quad).unwrap();
    assert!(base.price > 0.0 && more.price > 1.5 * base.price);
    let flat = Model::new(ModelParams::reference_afns3().with_sigma_scale(0.0)).unwrap();
    let none = mc_option_price_single(&flat, &X, &w, 0.5, None, &mc(4000), &quad).unwrap();
    assert!(none.price.abs() < 1e-9, "{none:?}");
    assert!(mc_option_price_single(&m, &X, &w, 0.6, None, &mc(100), &quad).is_err());
}
