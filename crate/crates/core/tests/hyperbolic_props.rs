use rand::Rng;
use sigtail::hyperbolic::{
    develop, develop_brownian_height, height_decay_bound, height_decay_experiment, hyperbolic_distance,
    ito_height_sde, random_walk, triangle_defect_check, HyperbolicPoint,
};
use sigtail::path::PiecewiseLinearPath;
use sigtail::rng::stream;
use sigtail::stats;

#[test]
fn random_triangle_sweep() {
    let mut rng = stream(3, 0);
    for i in 0..100 {
        let b = 10f64.powf(rng.random_range(-2.0..2.5));
        let c = 10f64.powf(rng.random_range(-2.0..2.5));
        let theta = rng.random_range(1e-3..std::f64::consts::PI - 1e-3);
        let r = triangle_defect_check(b, c, theta).unwrap();
        assert!(r.within_bound, "triangle {i}: {r:?}");
        assert!(r.monotone, "triangle {i}: {r:?}");
    }
}

#[test]
fn single_chords_develop_to_scaled_length() {
    let mut rng = stream(4, 0);
    for _ in 0..50 {
        let d = rng.random_range(1..=5);
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lambda = rng.random_range(0.1..8.0);
        let trace = develop(&PiecewiseLinearPath::line(&v), lambda).unwrap();
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let end = HyperbolicPoint::new(trace.points[1].clone()).unwrap();
        let rho = hyperbolic_distance(&HyperbolicPoint::origin(d), &end).unwrap();
        assert!((rho - lambda * len).abs() <= 1e-10 * (lambda * len).max(1.0));
    }
}

#[test]
fn long_random_walk_stays_on_group() {
    let path = random_walk(8, 3, 10_000, 0.05);
    let trace = develop(&path, 1.0).unwrap();
    assert!(trace.max_defect <= 1e-9, "{}", trace.max_defect);
    // developed chords keep their scaled lengths
    let total = trace.trace_length().unwrap();
    assert!((total - path.length_l2()).abs() <= 1e-6 * path.length_l2());
}

#[test]
fn ito_and_chord_developments_agree_in_mean() {
    let (d, lambda, trials) = (3, 2.0, 300u64);
    let chord: Vec<f64> = (0..trials)
        .map(|i| (-develop_brownian_height(d, 1.0, lambda, 8, 21, i).unwrap().log_height).exp())
        .collect();
    let ito: Vec<f64> = (0..trials)
        .map(|i| 1.0 / ito_height_sde(d, 1.0, lambda, 4096, 22, i).unwrap())
        .collect();
    let (m1, m2) = (stats::mean(&chord), stats::mean(&ito));
    let se = stats::stderr(&chord).unwrap().hypot(stats::stderr(&ito).unwrap());
    assert!((m1 - m2).abs() <= 3.0 * se, "{m1} vs {m2} (se {se})");
    let bound = height_decay_bound(d, 1.0, lambda, 1.0);
    assert!(m1 <= bound + 3.0 * stats::stderr(&chord).unwrap());
}

#[test]
fn decay_grid_point() {
    let rows = height_decay_experiment(3, &[0.5, 1.0], 2.0, 1.0, 400, 8, 5).unwrap();
    assert!((rows[1].bound - 0.1353352832366127).abs() <= 1e-12);
    for r in &rows {
        assert!(r.pass, "{}", r.csv_row());
        assert!(r.mean > 0.0 && r.mean < 1.0);
    }
}
