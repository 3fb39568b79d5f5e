use sigtail::brownian::{
    expected_signature, mc_expected_signature, mc_ito_vs_stratonovich, mc_second_moments, mc_sup_moments,
    random_words,
};

#[test]
fn fawcett_mean_within_four_sigma() {
    let (d, t, depth) = (2, 1.0, 4);
    let mc = mc_expected_signature(d, t, depth, 2000, 8, 11).unwrap();
    let exact = expected_signature(d, t, depth);
    let se = mc.stderr.unwrap();
    for n in 0..=depth {
        for ((m, e), s) in mc.mean.level(n).iter().zip(exact.level(n)).zip(se.level(n)) {
            assert!((m - e).abs() <= 4.0 * s + 1e-12, "level {n}: {m} vs {e} (se {s})");
        }
    }
    assert_eq!(exact.level(2)[0], 0.5);
    // word (1,1,2,2) in 0-based lexicographic order is 0*8 + 0*4 + 1*2 + 1
    assert_eq!(exact.level(4)[3], 0.125);
}

#[test]
fn expected_signature_scales_with_time() {
    let a = expected_signature(3, 1.0, 6);
    let b = expected_signature(3, 2.0, 6);
    for n in 0..=6 {
        for (x, y) in a.level(n).iter().zip(b.level(n)) {
            assert!((y - x * 2f64.powf(n as f64 / 2.0)).abs() <= 1e-15);
        }
    }
}

#[test]
fn second_moments_respect_bound_on_random_words() {
    let words = random_words(2, 20, 1, 8, 5);
    assert!(words.iter().all(|w| (1..=8).contains(&w.len())));
    for r in mc_second_moments(2, &words, 1.0, 1000, 8, 5).unwrap() {
        assert!(r.pass, "{}", r.csv_row());
    }
}

#[test]
fn sup_moments_respect_bound() {
    let words = random_words(3, 8, 3, 6, 9);
    for r in mc_sup_moments(3, &words, 0.25, 1.25, 500, 8, 9).unwrap() {
        assert!(r.pass, "{}", r.csv_row());
    }
}

#[test]
fn random_words_are_reproducible() {
    assert_eq!(random_words(4, 10, 2, 5, 1), random_words(4, 10, 2, 5, 1));
    assert_ne!(random_words(4, 10, 2, 5, 1), random_words(4, 10, 2, 5, 2));
    assert!(random_words(4, 50, 2, 5, 1).iter().flatten().all(|&i| i < 4));
}

#[test]
fn ito_stratonovich_gap_on_repeated_letter() {
    // Strat − Itô for (i, i) is half the realised quadratic variation, mean t/2
    let r = mc_ito_vs_stratonovich(2, &[vec![0, 0], vec![0, 1]], 1.0, 400, 8, 3).unwrap();
    assert!((r[0].gap_mean - 0.5).abs() <= 4.0 * r[0].gap_stderr);
    assert!(r[0].gap_stderr < 0.01);
    assert!(r[1].gap_mean.abs() <= 4.0 * r[1].gap_stderr + 1e-12);
    assert!(r[1].ito_mean.abs() <= 4.0 * r[1].ito_stderr);
}
