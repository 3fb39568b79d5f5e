use sigtail::asymptotics::{
    concentration_test, estimate_limsup, factorial_ratio_check, height_bound_check, ito_bound_check,
    kappa_samples, neoclassical_check, recovery_experiment, scaling_check, stratonovich_bound_check,
    subadditivity_experiment, KappaConfig, Reparametrization, Window,
};
use sigtail::brownian::BrownianSample;
use sigtail::signature::full_signature;
use sigtail::NormKind;

fn small(d: usize, seed: u64) -> KappaConfig {
    KappaConfig {
        k: 10,
        depth: 10,
        window: Window::new(4, 10).unwrap(),
        trials: 8,
        ..KappaConfig::standard(d, 1.0, seed)
    }
}

#[test]
fn ensembles_are_deterministic() {
    let cfg = small(2, 4);
    assert_eq!(kappa_samples(&cfg).unwrap(), kappa_samples(&cfg).unwrap());
    let other = KappaConfig { seed: 5, ..cfg.clone() };
    assert_ne!(kappa_samples(&cfg).unwrap(), kappa_samples(&other).unwrap());
}

#[test]
fn small_sandwich_holds() {
    let ledger = stratonovich_bound_check(&small(2, 1)).unwrap();
    assert_eq!(ledger.interval(), (0.2, 5.0));
    assert!(ledger.pass, "{ledger:?}");
    let ito = ito_bound_check(&small(2, 1)).unwrap();
    assert_eq!(ito.interval(), (0.4, 2.5));
    assert!(ito.pass, "{ito:?}");
}

#[test]
fn kappa_per_unit_time_is_stable_in_t() {
    // κ̂ is already divided by the interval length
    let a = kappa_samples(&small(2, 2)).unwrap();
    let b = kappa_samples(&KappaConfig { t: 4.0, ..small(2, 2) }).unwrap();
    let (ma, mb) = (sigtail::stats::median(&a), sigtail::stats::median(&b));
    assert!(mb / ma > 0.5 && mb / ma < 2.0, "{ma} vs {mb}");
}

#[test]
fn concentration_report_shape() {
    let r = concentration_test(&small(2, 3)).unwrap();
    assert_eq!(r.kappas.len(), 8);
    assert_eq!(r.subinterval_ratios.len(), 8);
    assert!(r.dispersion.relative_iqr.is_some());
    assert!(r.dispersion_pass.is_some());
    assert!(r.subinterval_ratios.iter().all(|x| x.is_finite() && *x > 0.0));
}

#[test]
fn subadditivity_margins_are_reported() {
    let rows = subadditivity_experiment(&small(2, 6), 4).unwrap();
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert!(r.s < r.u && r.u < r.t);
        assert!(r.lhs > 0.0 && r.rhs > 0.0);
        assert!((r.margin - (r.rhs - r.lhs) / r.rhs).abs() < 1e-12);
    }
}

#[test]
fn estimate_reuses_signature_levels() {
    let sample = BrownianSample::generate(2, 1.0, 10, 7, 0).unwrap();
    let rec = full_signature(sample.path(), 10);
    let r = estimate_limsup(&rec, 2.0, NormKind::L1Proj, Window::trailing(10)).unwrap();
    assert_eq!(r.window, Window::new(4, 10).unwrap());
    assert_eq!(r.sequence.len(), 10);
    assert!(r.sequence.iter().all(|a| *a >= 0.0));
    assert_eq!(r.kappa_hat, r.window_max());
}

#[test]
fn neoclassical_grid_corners() {
    for (a, b) in [(1e-3, 1e3), (1e3, 1e-3), (1.0, 1.0), (0.0, 2.0)] {
        for p in [1.0, 1.25, 1.5, 2.0] {
            assert!(neoclassical_check(a, b, p, 60).unwrap() <= 1.0 + 1e-12);
        }
    }
}

#[test]
fn factorial_ratio_sweeps() {
    for (alpha, p) in [(1.0, 1.0), (2.0, 2.0), (3.0, 2.0), (1.5, 1.5), (5.0, 2.0)] {
        let r = factorial_ratio_check(alpha, p, 200).unwrap();
        assert!(r.bounded, "{r:?}");
    }
}

#[test]
fn height_bound_small_run() {
    let (rows, series) = height_bound_check(&small(2, 8), &[4.0], &[0.25]).unwrap();
    assert_eq!(rows.len(), 8);
    assert_eq!(series.len(), 8);
    assert!(rows.iter().all(|r| r.lhs.is_finite() && r.rhs > 0.0));
    assert!(series.iter().all(|r| r.pass), "{series:?}");
}

#[test]
fn recovery_rows_are_well_formed() {
    let cfg = KappaConfig { trials: 2, ..small(2, 9) };
    for reparam in [Reparametrization::Identity, Reparametrization::Squared] {
        for row in recovery_experiment(&cfg, reparam, 10).unwrap() {
            assert_eq!(row.recovery.sigma_hat.len(), 10);
            assert!(row.recovery.sigma_hat.windows(2).all(|w| w[0] <= w[1]));
            // κ is the sample's own estimate, so the endpoint is recovered up to the
            // window-max of the same record
            let end = *row.recovery.raw.last().unwrap();
            assert!((end - 1.0).abs() < 1e-9, "{end}");
            assert!(row.sup_error.is_finite());
        }
    }
    assert!(recovery_experiment(&KappaConfig { t: 2.0, ..cfg }, Reparametrization::Identity, 10).is_err());
}

#[test]
fn scaling_report_is_symmetric_in_size() {
    let r = scaling_check(&small(2, 10)).unwrap();
    assert_eq!(r.base.len(), r.rescaled.len());
    assert!((0.0..=1.0).contains(&r.ks));
}
