//! The `verify` suite: pinned parameters per scale tier and one function per
//! check. Every check writes its rows to a CSV named in its record.

use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;
use sigtail::asymptotics::{
    concentration_test, estimate_limsup, factorial_ratio_check, height_bound_check, ito_bound_check,
    neoclassical_sweep, recovery_experiment, scaling_check, stratonovich_bound_check, subadditivity_experiment,
    KappaConfig, Reparametrization, Window, MAX_RELATIVE_IQR, NEOCLASSICAL_TOL, RECOVERY_TOL,
    SUBINTERVAL_RATIO_RANGE,
};
use sigtail::brownian::{
    expected_signature, mc_expected_signature, mc_ito_vs_stratonovich, mc_second_moments, mc_sup_moments,
    random_words, MomentReport,
};
use sigtail::hyperbolic::{
    develop, develop_brownian_height, height_decay_experiment, hyperbolic_distance, ito_height_sde, minkowski,
    random_walk, triangle_defect_check, HeightDecayRow, HyperbolicPoint, TriangleDefect,
};
use sigtail::path::PiecewiseLinearPath;
use sigtail::rng::{derive_seed, stream};
use sigtail::signature::{full_signature, normalized_level_sequence, reverse_signature, signature};
use sigtail::stats;
use sigtail::tensor::{factorial_log, index_word, is_group_like, level_norm, tensor_levels, Permutation};
use sigtail::{NormKind, TruncatedTensorSeries};

use crate::error::CliError;
use crate::manifest::{CheckRecord, OutputDir, RunManifest, IN_SCOPE_TAGS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Smoke,
    Desk,
    Deep,
}

/// Pinned parameters of one tier.
#[derive(Clone, Debug, Serialize)]
pub struct TierParams {
    pub algebra_paths: usize,
    pub algebra_depth: usize,
    pub fawcett_trials: usize,
    pub fawcett_k: u32,
    pub moment_words: usize,
    pub moment_max_len: usize,
    pub sup_words: usize,
    pub moment_trials: usize,
    pub moment_k: u32,
    pub long_development: usize,
    pub triangles: usize,
    pub decay_dims: Vec<usize>,
    pub decay_mus: Vec<f64>,
    pub decay_lambdas: Vec<f64>,
    pub decay_trials: usize,
    pub decay_k: u32,
    pub sde_trials: usize,
    pub sde_steps: usize,
    pub kappa_k: u32,
    pub kappa_depth: usize,
    pub kappa_window: Window,
    pub kappa_trials: usize,
    pub kappa3_k: u32,
    pub kappa3_depth: usize,
    pub subadditivity_pairs: usize,
    pub neoclassical_points: usize,
    pub neoclassical_nmax: usize,
    pub factorial_nmax: usize,
    pub height_trials: usize,
    pub height_lambdas: Vec<f64>,
    pub series_lambdas: Vec<f64>,
    pub bv_depth: usize,
    pub recovery_trials: usize,
    pub recovery_points: usize,
}

impl Tier {
    pub fn params(self) -> TierParams {
        let desk = TierParams {
            algebra_paths: 50,
            algebra_depth: 8,
            fawcett_trials: 10_000,
            fawcett_k: 10,
            moment_words: 20,
            moment_max_len: 8,
            sup_words: 8,
            moment_trials: 5000,
            moment_k: 10,
            long_development: 10_000,
            triangles: 100,
            decay_dims: vec![2, 3, 4],
            decay_mus: vec![0.5, 1.0],
            decay_lambdas: vec![1.0, 2.0],
            decay_trials: 2000,
            decay_k: 8,
            sde_trials: 400,
            sde_steps: 4096,
            kappa_k: 12,
            kappa_depth: 14,
            kappa_window: Window { lo: 8, hi: 14 },
            kappa_trials: 16,
            kappa3_k: 12,
            kappa3_depth: 10,
            subadditivity_pairs: 20,
            neoclassical_points: 1000,
            neoclassical_nmax: 60,
            factorial_nmax: 200,
            height_trials: 8,
            height_lambdas: vec![4.0, 8.0, 16.0],
            series_lambdas: vec![0.25, 0.5],
            bv_depth: 14,
            recovery_trials: 4,
            recovery_points: 10,
        };
        match self {
            Tier::Desk => desk,
            Tier::Smoke => TierParams {
                algebra_paths: 10,
                long_development: 1000,
                triangles: 20,
                neoclassical_points: 200,
                ..desk
            },
            Tier::Deep => TierParams {
                fawcett_trials: 100_000,
                moment_trials: 50_000,
                decay_trials: 20_000,
                sde_trials: 2000,
                kappa_k: 14,
                kappa_depth: 16,
                kappa_window: Window { lo: 10, hi: 16 },
                kappa_trials: 64,
                subadditivity_pairs: 64,
                neoclassical_points: 10_000,
                height_trials: 32,
                bv_depth: 16,
                recovery_trials: 16,
                ..desk
            },
        }
    }

    /// Tags a tier must cover: the full list, except on the smoke tier which
    /// runs only the deterministic checks.
    pub fn required_tags(self) -> Vec<&'static str> {
        match self {
            Tier::Smoke => vec![
                "admissible-norms",
                "projective-cross-norm",
                "shuffle-identity",
                "chen-identity",
                "group-like-nonvanishing",
                "projective-duality",
                "sup-versus-limsup",
                "hyperboloid-model",
                "development-length",
                "triangle-defect",
                "neoclassical-inequality",
                "factorial-ratio",
            ],
            _ => IN_SCOPE_TAGS.to_vec(),
        }
    }
}

type Check = fn(&TierParams, u64, &OutputDir) -> Result<CheckRecord, CliError>;

/// Checks in run order, with the tiers that include them.
const REGISTRY: &[(&str, bool, Check)] = &[
    ("algebraic-exactness", true, algebraic_exactness),
    ("hyperbolic-geometry", true, hyperbolic_geometry),
    ("neoclassical", true, neoclassical),
    ("factorial-ratio", true, factorial_ratio),
    ("expected-signature", false, expected_signature_check),
    ("moment-bounds", false, moment_bounds),
    ("ito-stratonovich-gap", false, ito_stratonovich_gap),
    ("height-decay", false, height_decay),
    ("cartan-sde", false, cartan_sde),
    ("kappa-sandwich-d2", false, kappa_sandwich_d2),
    ("kappa-sandwich-d3", false, kappa_sandwich_d3),
    ("kappa-concentration", false, kappa_concentration),
    ("subinterval-stability", false, subinterval_stability),
    ("ito-sandwich", false, ito_sandwich),
    ("brownian-scaling", false, brownian_scaling),
    ("subadditivity", false, subadditivity),
    ("height-vs-limsup", false, height_vs_limsup),
    ("bv-degeneracy", false, bv_degeneracy),
    ("recovery-identity", false, recovery_identity),
    ("recovery-squared", false, recovery_squared),
];

/// Names of the checks run on `tier`, in order.
pub fn check_names(tier: Tier) -> Vec<&'static str> {
    REGISTRY
        .iter()
        .filter(|(_, smoke, _)| tier != Tier::Smoke || *smoke)
        .map(|(name, _, _)| *name)
        .collect()
}

/// Runs every registered check of `tier` into `out`, filling `manifest`.
pub fn run_tier(tier: Tier, seed: u64, out: &mut OutputDir, manifest: &mut RunManifest) -> Result<(), CliError> {
    let params = tier.params();
    out.write(
        "tier.json",
        &(serde_json::to_string_pretty(&serde_json::json!({ "tier": tier, "params": params }))? + "\n"),
    )?;
    for (name, smoke, check) in REGISTRY {
        if tier == Tier::Smoke && !smoke {
            continue;
        }
        let t0 = std::time::Instant::now();
        let record = check(&params, seed, out)?;
        out.add_section(name, t0.elapsed().as_secs_f64());
        debug_assert_eq!(record.name, *name);
        eprintln!("{:<24} {}", name, if record.pass { "pass" } else { "FAIL" });
        manifest.push(record);
    }
    manifest.assert_coverage(&tier.required_tags());
    Ok(())
}

fn kappa_config(params: &TierParams, d: usize, seed: u64) -> KappaConfig {
    KappaConfig {
        k: params.kappa_k,
        depth: params.kappa_depth,
        window: params.kappa_window,
        trials: params.kappa_trials,
        ..KappaConfig::standard(d, 1.0, seed)
    }
}

fn csv_file(out: &OutputDir, rec: &mut CheckRecord, name: &str, body: &str) -> Result<(), CliError> {
    out.write(name, body)?;
    rec.files.push(name.to_string());
    Ok(())
}

fn worst(acc: &mut f64, x: f64) {
    if x > *acc || x.is_nan() {
        *acc = x;
    }
}

fn algebraic_exactness(params: &TierParams, seed: u64, out: &OutputDir) -> Result<CheckRecord, CliError> {
    let mut rec = CheckRecord::new(
        "algebraic-exactness",
        &[
            "chen-identity",
            "shuffle-identity",
            "admissible-norms",
            "projective-cross-norm",
            "projective-duality",
            "group-like-nonvanishing",
            "sup-versus-limsup",
        ],
    );
    let depth = params.algebra_depth;
    let tol = 1e-12;
    let base = derive_seed(seed, "algebra");
    let mut chen = 0.0f64;
    let mut shuffle = 0.0f64;
    let mut reversal = 0.0f64;
    let mut perm = 0.0f64;
    let mut cross = 0.0f64;
    let mut duality = 0.0f64;
    let mut nonvanishing = f64::NEG_INFINITY;
    let mut multiples = f64::NEG_INFINITY;
    let mut rows = String::from("path,chen,shuffle,reversal,permutation,cross_norm\n");
    for i in 0..params.algebra_paths {
        let path = random_walk(base.wrapping_add(i as u64), 2, 8, 1.0);
        let full = full_signature(&path, depth);
        let mut rng = stream(base, i as u64 + 1);
        let u = rng.random_range(path.start_time()..path.end_time());
        let joined = signature(&path, path.start_time(), u, depth)?
            .concat(&signature(&path, u, path.end_time(), depth)?)?;
        let c = full.series().max_abs_diff(joined.series())?;
        let g = is_group_like(full.series(), f64::INFINITY)
            .worst
            .map(|w| w.deviation)
            .unwrap_or(0.0);
        let r = full
            .series()
            .max_abs_diff(reverse_signature(&reverse_signature(&full)).series())?;
        let mut pm = 0.0f64;
        let mut cn = 0.0f64;
        for n in 2..=depth.min(6) {
            let level = full.series().level(n);
            let mut image: Vec<usize> = (0..n).collect();
            for j in (1..n).rev() {
                image.swap(j, rng.random_range(0..=j));
            }
            let sigma = Permutation::new(image)?;
            let moved = sigma.apply(2, level)?;
            for kind in [NormKind::L1Proj, NormKind::L2Coord, NormKind::L1OfCoordsUpper] {
                pm = pm.max((level_norm(2, level, kind) - level_norm(2, &moved, kind)).abs());
            }
            let other = full.series().level(depth - n);
            let lhs = level_norm(2, &tensor_levels(level, other), NormKind::L1Proj);
            let rhs = level_norm(2, level, NormKind::L1Proj) * level_norm(2, other, NormKind::L1Proj);
            cn = cn.max((lhs - rhs).abs());
        }
        // ‖g_k‖^n <= ((nk)!/(k!)^n) ‖g_{nk}‖, and the integer normalization
        // grows along multiples
        let logs = full.log_level_norms(NormKind::L1Proj);
        let a = normalized_level_sequence(&full, 1.0, NormKind::L1Proj);
        for k in 1..=depth {
            for n in 2..=depth / k {
                let lhs = n as f64 * logs[k];
                let rhs = factorial_log((n * k) as f64) - n as f64 * factorial_log(k as f64) + logs[n * k];
                nonvanishing = nonvanishing.max(lhs - rhs);
                multiples = multiples.max(a[k - 1] / a[n * k - 1] - 1.0);
            }
        }
        for x in [(&mut chen, c), (&mut shuffle, g), (&mut reversal, r), (&mut perm, pm), (&mut cross, cn)] {
            worst(x.0, x.1);
        }
        writeln!(rows, "{i},{c:?},{g:?},{r:?},{pm:?},{cn:?}").unwrap();
    }
    // the sampled dual lower bound is exact on rank-one tensors
    for i in 0..params.algebra_paths {
        let mut rng = stream(base, 10_000 + i as u64);
        let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let seg = TruncatedTensorSeries::segment_exp(&v, 6);
        for n in 2..=6 {
            let exact = (v[0] * v[0] + v[1] * v[1]).sqrt().powi(n as i32) / factorial_log(n as f64).exp();
            let sampled = level_norm(2, seg.level(n), NormKind::sampled(16));
            let upper = level_norm(2, seg.level(n), NormKind::L1OfCoordsUpper);
            duality = duality.max((sampled / exact - 1.0).abs());
            rec.require(sampled <= upper * (1.0 + tol), format!("sampled above upper at level {n}"));
        }
    }
    csv_file(out, &mut rec, "algebra.csv", &rows)?;
    rec.metric("paths", params.algebra_paths as f64)
        .metric("tolerance", tol)
        .metric("worst_chen", chen)
        .metric("worst_shuffle", shuffle)
        .metric("worst_reversal", reversal)
        .metric("worst_permutation", perm)
        .metric("worst_cross_norm", cross)
        .metric("worst_rank_one_duality", duality)
        .metric("worst_nonvanishing_log_excess", nonvanishing)
        .metric("worst_multiple_growth", multiples);
    rec.require(chen <= tol, "Chen identity")
        .require(shuffle <= tol, "shuffle identity")
        .require(reversal <= tol, "double reversal")
        .require(perm <= tol, "permutation invariance")
        .require(cross <= tol, "cross-norm equality")
        .require(duality <= 1e-9, "rank-one duality")
        .require(nonvanishing <= 1e-9, "group-like non-vanishing")
        .require(multiples <= 1e-10, "growth along multiples");
    Ok(rec)
}

fn hyperbolic_geometry(params: &TierParams, seed: u64, out: &OutputDir) -> Result<CheckRecord, CliError> {
    let mut rec = CheckRecord::new(
        "hyperbolic-geometry",
        &["hyperboloid-model", "development-length", "triangle-defect"],
    );
    let base = derive_seed(seed, "hyperbolic");
    let mut rng = stream(base, 0);
    let mut chord_err = 0.0f64;
    for _ in 0..50 {
        let d = rng.random_range(1..=4);
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lambda = rng.random_range(0.1..4.0);
        let trace = develop(&PiecewiseLinearPath::line(&v), lambda)?;
        let end = HyperbolicPoint::new(trace.points[1].clone())?;
        let rho = hyperbolic_distance(&HyperbolicPoint::origin(d), &end)?;
        let len = lambda * v.iter().map(|x| x * x).sum::<f64>().sqrt();
        chord_err = chord_err.max((rho - len).abs() / len.max(1.0));
    }
    let mut invariant = 0.0f64;
    let mut on_model = 0.0f64;
    let mut length_err = 0.0f64;
    for (j, d) in [2usize, 3].into_iter().enumerate() {
        let path = random_walk(base.wrapping_add(1 + j as u64), d, params.long_development, 0.05);
        let trace = develop(&path, 1.0)?;
        invariant = invariant.max(trace.max_defect);
        for x in &trace.points {
            let scale = x.iter().map(|c| c * c).sum::<f64>().max(1.0);
            on_model = on_model.max((minkowski(x, x) + 1.0).abs() / scale);
        }
        let total = trace.trace_length()?;
        length_err = length_err.max((total - path.length_l2()).abs() / path.length_l2());
    }
    let mut rows = format!("{}\n", "b,c,theta,a,defect,bound,monotone,within_bound");
    let mut trng = stream(base, 1);
    let mut tri_ok = true;
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..params.triangles {
        let b = 10f64.powf(trng.random_range(-2.0..2.5));
        let c = 10f64.powf(trng.random_range(-2.0..2.5));
        let theta = trng.random_range(1e-3..std::f64::consts::PI - 1e-3);
        let t: TriangleDefect = triangle_defect_check(b, c, theta)?;
        tri_ok &= t.within_bound && t.monotone;
        worst_excess = worst_excess.max((t.defect - t.bound).max(-t.defect));
        writeln!(
            rows,
            "{:?},{:?},{:?},{:?},{:?},{:?},{},{}",
            t.b, t.c, t.theta, t.a, t.defect, t.bound, t.monotone, t.within_bound
        )
        .unwrap();
    }
    csv_file(out, &mut rec, "triangles.csv", &rows)?;
    rec.metric("worst_chord_distance_error", chord_err)
        .metric("worst_lorentz_defect", invariant)
        .metric("worst_minkowski_residual", on_model)
        .metric("worst_length_error", length_err)
        .metric("worst_triangle_excess", worst_excess)
        .metric("triangles", params.triangles as f64);
    rec.require(chord_err <= 1e-10, "single-chord distance")
        .require(invariant <= 1e-9, "Lorentz invariant")
        .require(on_model <= 1e-9, "points on the hyperboloid")
        .require(length_err <= 1e-6, "developed length")
        .require(tri_ok, "triangle defect sweep");
    Ok(rec)
}

fn neoclassical(params: &TierParams, seed: u64, _out: &OutputDir) -> Result<CheckRecord, CliError> {
    let mut rec = CheckRecord::new("neoclassical", &["neoclassical-inequality"]);
    let sweep = neoclassical_sweep(params.neoclassical_points, params.neoclassical_nmax, derive_seed(seed, "neo"))?;
    rec.metric("points", sweep.points as f64)
        .metric("nmax", sweep.nmax as f64)
        .metric("worst_ratio", sweep.worst_ratio)
        .metric("tolerance", NEOCLASSICAL_TOL);
    rec.require(sweep.pass, format!("ratio {} at {:?}", sweep.worst_ratio, sweep.worst_at));
    Ok(rec)
}

fn factorial_ratio(params: &TierParams, _seed: u64, out: &OutputDir) -> Result<CheckRecord, CliError> {
    let mut rec = CheckRecord::new("factorial-ratio", &["factorial-ratio"]);
    let mut rows = String::from("alpha,p,nmax,C,tail_slope,previous_slope,bounded\n");
    for (alpha, p) in [(1.0, 1.0), (2.0, 2.0), (3.0, 2.0), (1.5, 1.5), (5.0, 2.0), (4.0, 1.0)] {
        let r = factorial_ratio_check(alpha, p, params.factorial_nmax)?;
        writeln!(
            rows,
            "{:?},{:?},{},{:?},{:?},{:?},{}",
            r.alpha, r.p, r.nmax, r.c, r.tail_slope, r.previous_slope, r.bounded
        )
        .unwrap();
        rec.require(r.bounded, format!("α = {alpha}, p = {p}"));
    }
    csv_file(out, &mut rec, "factorial_ratio.csv", &rows)?;
    Ok(rec)
}

fn expected_signature_check(params: &TierParams, seed: u64, out: &OutputDir) -> Result<CheckRecord, CliError> {
    let mut rec = CheckRecord::new("expected-signature", &["expected-signature-formula"]);
    let (d, depth) = (2, 4);
    let mc = mc_expected_signature(d, 1.0, depth, params.fawcett_trials, params.fawcett_k, derive_seed(seed, "fawcett"))?;
    let exact = expected_signature(d, 1.0, depth);
    let se = mc.stderr.expect("more than one trial");
    let mut rows = String::from("word,mc,stderr,exact,z,pass\n");
    let mut worst_z = 0.0f64;
    for n in 1..=depth {
        for (j, ((m, e), s)) in mc.mean.level(n).iter().zip(exact.level(n)).zip(se.level(n)).enumerate() {
            let z = (m - e).abs() / s.max(1e-300);
            let pass = (m - e).abs() <= 4.0 * s;
            worst_z = worst_z.max(z);
            let word = index_word(d, n, j)
                .iter()
                .map(|i| (i + 1).to_string())
                .collect::<Vec<_>>()
                .join("-");
            writeln!(rows, "{word},{m:?},{s:?},{e:?},{z:?},{pass}").unwrap();
            rec.require(pass, format!("word {word}"));
        }
    }
    csv_file(out, &mut rec, "expected_signature.csv", &rows)?;
    rec.metric("trials", params.fawcett_trials as f64)
        .metric("worst_z", worst_z)
        .metric("mc_11", mc.mean.coeff(&[0, 0]))
        .metric("mc_1122", mc.mean.coeff(&[0, 0, 1, 1]));
    Ok(rec)
}

fn moment_rows(reports: &[MomentReport]) -> String {
    let mut rows = format!("{}\n", MomentReport::CSV_HEADER);
    for r in reports {
        rows.push_str(&r.csv_row());
        rows.push('\n');
    }
    rows
}

fn moment_bounds(params: &TierParams, seed: u64, out: &OutputDir) -> Result<CheckRecord, CliError> {
    let mut rec = CheckRecord::new("moment-bounds", &["second-moment-bound", "sup-moment-bound"]);
    let seed = derive_seed(seed, "moments");
    let words = random_words(2, params.moment_words, 1, params.moment_max_len, seed);
    let second = mc_second_moments(2, &words, 1.0, params.moment_trials, params.moment_k, seed)?;
    let sup_words = random_words(2, params.sup_words, 3, 6, seed.wrapping_add(1));
    let sup = mc_sup_moments(2, &sup_words, 0.0, 1.0, params.moment_trials, params.moment_k, seed.wrapping_add(1))?;
    let ratio = |rs: &[MomentReport]| rs.iter().map(|r| r.mean / r.bound).fold(0.0, f64::max);
    rec.metric("worst_second_moment_ratio", ratio(&second))
        .metric("worst_sup_moment_ratio", ratio(&sup))
        .metric("trials", params.moment_trials as f64);
    for r in second.iter().chain(&sup) {
        rec.require(r.pass, r.csv_row());
    }
    csv_file(out, &mut rec, "second_moments.csv", &moment_rows(&second))?;
    csv_file(out, &mut rec, "sup_moments.csv", &moment_rows(&sup))?;
    Ok(rec)
}

fn ito_stratonovich_gap(params: &TierParams, seed: u64, out: &OutputDir) -> Result<CheckRecord, CliError> {
    let mut rec = CheckRecord::new("ito-stratonovich-gap", &["ito-stratonovich-coefficients"]);
    // Strat − Itô on (i, j) has mean t/2 when i = j and 0 otherwise
    let words = vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]];
    let res = mc_ito_vs_stratonovich(2, &words, 1.0, params.moment_trials, params.moment_k, derive_seed(seed, "gap"))?;
    let mut rows = String::from("word,ito_mean,ito_stderr,strat_mean,strat_stderr,gap_mean,gap_stderr,expected_gap,pass\n");
    for r in &res {
        let expected = if r.word[0] == r.word[1] { 0.5 } else { 0.0 };
        let pass = (r.gap_mean - expected).abs() <= 4.0 * r.gap_stderr + 1e-12
            && r.ito_mean.abs() <= 4.0 * r.ito_stderr;
        let word = r.word.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join("-");
        writeln!(
            rows,
            "{word},{:?},{:?},{:?},{:?},{:?},{:?},{expected:?},{pass}",
            r.ito_mean, r.ito_stderr, r.strat_mean, r.strat_stderr, r.gap_mean, r.gap_stderr
        )
        .unwrap();
        rec.require(pass, format!("word {word}"));
    }
    csv_file(out, &mut rec, "ito_stratonovich.csv", &rows)?;
    Ok(rec)
}

fn height_decay(params: &TierParams, seed: u64, out: &OutputDir) -> Result<CheckRecord, CliError> {
    let mut rec = CheckRecord::new("height-decay", &["height-decay", "hyperboloid-model"]);
    let mut rows = format!("{}\n", HeightDecayRow::CSV_HEADER);
    let mut worst_excess = f64::NEG_INFINITY;
    for &d in &params.decay_dims {
        for &lambda in &params.decay_lambdas {
            let s = derive_seed(seed, &format!("decay-{d}-{lambda}"));
            for r in height_decay_experiment(d, &params.decay_mus, lambda, 1.0, params.decay_trials, params.decay_k, s)? {
                worst_excess = worst_excess.max((r.mean - r.bound) / r.stderr.max(1e-300));
                rows.push_str(&r.csv_row());
                rows.push('\n');
                rec.require(r.pass, r.csv_row());
            }
        }
    }
    rec.metric("worst_excess_in_stderr", worst_excess)
        .metric("trials", params.decay_trials as f64);
    csv_file(out, &mut rec, "height_decay.csv", &rows)?;
    Ok(rec)
}

fn cartan_sde(params: &TierParams, seed: u64, out: &OutputDir) -> Result<CheckRecord, CliError> {
    let mut rec = CheckRecord::new("cartan-sde", &["cartan-sde", "height-decay"]);
    let (d, lambda) = (3, 2.0);
    let a = derive_seed(seed, "cartan-chord");
    let b = derive_seed(seed, "cartan-ito");
    let mut rows = String::from("trial,chord_hinv,ito_hinv\n");
    let mut chord = Vec::with_capacity(params.sde_trials);
    let mut ito = Vec::with_capacity(params.sde_trials);
    for i in 0..params.sde_trials as u64 {
        let x = (-develop_brownian_height(d, 1.0, lambda, params.decay_k, a, i)?.log_height).exp();
        let y = 1.0 / ito_height_sde(d, 1.0, lambda, params.sde_steps, b, i)?;
        writeln!(rows, "{i},{x:?},{y:?}").unwrap();
        chord.push(x);
        ito.push(y);
    }
    let (m1, m2) = (stats::mean(&chord), stats::mean(&ito));
    let se = stats::stderr(&chord).unwrap_or(0.0).hypot(stats::stderr(&ito).unwrap_or(0.0));
    rec.metric("chord_mean", m1).metric("ito_mean", m2).metric("combined_stderr", se);
    rec.require((m1 - m2).abs() <= 3.0 * se, "chord and Itô means differ by more than 3σ");
    csv_file(out, &mut rec, "cartan_sde.csv", &rows)?;
    Ok(rec)
}

fn kappa_rows(kappas: &[f64]) -> String {
    let mut rows = String::from("trial,kappa_hat\n");
    for (i, k) in kappas.iter().enumerate() {
        writeln!(rows, "{i},{k:?}").unwrap();
    }
    rows
}

fn ledger_metrics(rec: &mut CheckRecord, ledger: &sigtail::asymptotics::BoundLedger) {
    let (lo, hi) = ledger.interval();
    rec.metric("median", ledger.dispersion.median)
        .metric("interval_lower", lo)
        .metric("interval_upper", hi)
        .metric("trials", ledger.kappas.len() as f64);
    if let Some(iqr) = ledger.dispersion.relative_iqr {
        rec.metric("relative_iqr", iqr);
    }
    rec.require(ledger.pass, format!("median {} outside [{lo}, {hi}]", ledger.dispersion.median));
}

fn kappa_sandwich_d2(params: &TierParams, seed: u64, out: &OutputDir) -> Result<CheckRecord, CliError> {
    let mut rec = CheckRecord::new(
        "kappa-sandwich-d2",
        &["normalized-limsup", "kappa-upper-bound", "kappa-lower-bound"],
    );
    let ledger = stratonovich_bound_check(&kappa_config(params, 2, seed))?;
    ledger_metrics(&mut rec, &ledger);
    csv_file(out, &mut rec, "kappa_d2.csv", &kappa_rows(&ledger.kappas))?;
    Ok(rec)
}

fn kappa_sandwich_d3(params: &TierParams, seed: u64, out: &OutputDir) -> Result<CheckRecord, CliError> {
    let mut rec = CheckRecord::new("kappa-sandwich-d3", &["kappa-upper-bound", "kappa-lower-bound"]);
    let cfg = KappaConfig {
        k: params.kappa3_k,
        depth: params.kappa3_depth,
        window: Window::trailing(params.kappa3_depth),
        ..kappa_config(params, 3, derive_seed(seed, "kappa-d3"))
    };
    let ledger = stratonovich_bound_check(&cfg)?;
    ledger_metrics(&mut rec, &ledger);
    csv_file(out, &mut rec, "kappa_d3.csv", &kappa_rows(&ledger.kappas))?;
    Ok(rec)
}

fn kappa_concentration(params: &TierParams, seed: u64, out: &OutputDir) -> Result<CheckRecord, CliError> {
    let mut rec = CheckRecord::new("kappa-concentration", &["deterministic-constant"]);
    // same samples as the d = 2 sandwich
    let r = concentration_test(&kappa_config(params, 2, seed))?;
    let mut rows = String::from("trial,kappa_hat,half_ratio\n");
    for (i, (k, h)) in r.kappas.iter().zip(&r.subinterval_ratios).enumerate() {
        writeln!(rows, "{i},{k:?},{h:?}").unwrap();
    }
    csv_file(out, &mut rec, "concentration.csv", &rows)?;
    rec.metric("median", r.dispersion.median)
        .metric("max_relative_iqr", MAX_RELATIVE_IQR);
    if let Some(iqr) = r.dispersion.relative_iqr {
        rec.metric("relative_iqr", iqr);
    }
    rec.require(r.dispersion_pass == Some(true), "relative IQR above the limit");
    Ok(rec)
}

fn subinterval_stability(params: &TierParams, seed: u64, out: &OutputDir) -> Result<CheckRecord, CliError> {
    let mut rec = CheckRecord::new("subinterval-stability", &["deterministic-constant"]);
    let r = concentration_test(&kappa_config(params, 2, seed))?;
    let mut rows = String::from("trial,first_half_over_second_half\n");
    for (i, h) in r.subinterval_ratios.iter().enumerate() {
        writeln!(rows, "{i},{h:?}").unwrap();
    }
    csv_file(out, &mut rec, "subinterval.csv", &rows)?;
    let lo = r.subinterval_ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = r.subinterval_ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    rec.metric("min_half_ratio", lo)
        .metric("max_half_ratio", hi)
        .metric("allowed_min", SUBINTERVAL_RATIO_RANGE.0)
        .metric("allowed_max", SUBINTERVAL_RATIO_RANGE.1);
    rec.require(r.subinterval_pass, format!("half-interval ratios span [{lo}, {hi}]"));
    Ok(rec)
}

fn ito_sandwich(params: &TierParams, seed: u64, out: &OutputDir) -> Result<CheckRecord, CliError> {
    let mut rec = CheckRecord::new("ito-sandwich", &["ito-signature-bounds"]);
    let ledger = ito_bound_check(&kappa_config(params, 2, seed))?;
    ledger_metrics(&mut rec, &ledger);
    csv_file(out, &mut rec, "ito_kappa.csv", &kappa_rows(&ledger.kappas))?;
    Ok(rec)
}

fn brownian_scaling(params: &TierParams, seed: u64, out: &OutputDir) -> Result<CheckRecord, CliError> {
    let mut rec = CheckRecord::new("brownian-scaling", &["brownian-scaling", "deterministic-constant"]);
    let r = scaling_check(&kappa_config(params, 2, seed))?;
    let mut rows = String::from("trial,base,rescaled\n");
    for (i, (a, b)) in r.base.iter().zip(&r.rescaled).enumerate() {
        writeln!(rows, "{i},{a:?},{b:?}").unwrap();
    }
    csv_file(out, &mut rec, "scaling.csv", &rows)?;
    rec.metric("ks", r.ks);
    rec.require(r.pass, format!("KS distance {}", r.ks));
    Ok(rec)
}

fn subadditivity(params: &TierParams, seed: u64, out: &OutputDir) -> Result<CheckRecord, CliError> {
    let mut rec = CheckRecord::new("subadditivity", &["subadditivity"]);
    let cfg = kappa_config(params, 2, derive_seed(seed, "subadditivity"));
    let reports = subadditivity_experiment(&cfg, params.subadditivity_pairs)?;
    let mut rows = String::from("pair,s,u,t,lhs,rhs,margin,pass\n");
    let mut min_margin = f64::INFINITY;
    for (i, r) in reports.iter().enumerate() {
        writeln!(
            rows,
            "{i},{:?},{:?},{:?},{:?},{:?},{:?},{}",
            r.s, r.u, r.t, r.lhs, r.rhs, r.margin, r.pass
        )
        .unwrap();
        min_margin = min_margin.min(r.margin);
        rec.require(r.pass, format!("pair {i}: margin {}", r.margin));
    }
    rec.metric("min_margin", min_margin).metric("pairs", reports.len() as f64);
    csv_file(out, &mut rec, "subadditivity.csv", &rows)?;
    Ok(rec)
}

fn height_vs_limsup(params: &TierParams, seed: u64, out: &OutputDir) -> Result<CheckRecord, CliError> {
    let mut rec = CheckRecord::new("height-vs-limsup", &["height-vs-limsup", "height-series"]);
    let cfg = KappaConfig {
        trials: params.height_trials,
        ..kappa_config(params, 2, derive_seed(seed, "height"))
    };
    let (rows, series) = height_bound_check(&cfg, &params.height_lambdas, &params.series_lambdas)?;
    let mut a = String::from("trial,lambda,lhs,kappa_hat,rhs,pass\n");
    let mut worst_ratio = 0.0f64;
    for r in &rows {
        writeln!(a, "{},{:?},{:?},{:?},{:?},{}", r.trial, r.lambda, r.lhs, r.kappa_hat, r.rhs, r.pass).unwrap();
        worst_ratio = worst_ratio.max(r.lhs / r.rhs);
        rec.require(r.pass, format!("trial {} λ = {}", r.trial, r.lambda));
    }
    let mut b = String::from("trial,lambda,ode,series,tail_bound,pass\n");
    let mut worst_series = 0.0f64;
    for r in &series {
        writeln!(b, "{},{:?},{:?},{:?},{:?},{}", r.trial, r.lambda, r.ode, r.series, r.tail_bound, r.pass).unwrap();
        worst_series = worst_series.max((r.ode - r.series).abs());
        rec.require(r.pass, format!("series trial {} λ = {}", r.trial, r.lambda));
    }
    rec.metric("worst_lhs_over_rhs", worst_ratio)
        .metric("worst_series_gap", worst_series);
    csv_file(out, &mut rec, "height_bound.csv", &a)?;
    csv_file(out, &mut rec, "height_series.csv", &b)?;
    Ok(rec)
}

fn bv_degeneracy(params: &TierParams, _seed: u64, out: &OutputDir) -> Result<CheckRecord, CliError> {
    let mut rec = CheckRecord::new("bv-degeneracy", &["normalized-limsup"]);
    let depth = params.bv_depth;
    let line = PiecewiseLinearPath::line(&[1.0, 0.0]);
    let stairs = PiecewiseLinearPath::from_increments(&[vec![1.0, 0.0], vec![0.0, 1.0]])?;
    let mut rows = String::from("path,n,a_n\n");
    for (name, path) in [("line", line), ("staircase", stairs)] {
        let rec_sig = full_signature(&path, depth);
        let report = estimate_limsup(&rec_sig, 2.0, NormKind::L1Proj, Window::trailing(depth))?;
        for (n, a) in report.sequence.iter().enumerate() {
            writeln!(rows, "{name},{},{a:?}", n + 1).unwrap();
        }
        let a_n = report.sequence[depth - 1];
        let w = report.window;
        let decreasing = (w.lo..w.hi).all(|n| report.sequence[n] < report.sequence[n - 1]);
        rec.metric(&format!("{name}_a_N"), a_n);
        rec.require(a_n < 0.05, format!("{name}: a_N = {a_n} is not below 0.05"));
        rec.require(decreasing, format!("{name}: a_n not decreasing over {w}"));
    }
    csv_file(out, &mut rec, "bv_degeneracy.csv", &rows)?;
    Ok(rec)
}

fn recovery(
    name: &str,
    reparam: Reparametrization,
    params: &TierParams,
    seed: u64,
    out: &OutputDir,
) -> Result<CheckRecord, CliError> {
    let mut rec = CheckRecord::new(name, &["parametrization-recovery"]);
    let cfg = KappaConfig {
        trials: params.recovery_trials,
        ..kappa_config(params, 2, derive_seed(seed, "recovery"))
    };
    let rows = recovery_experiment(&cfg, reparam, params.recovery_points)?;
    let mut body = String::from("trial,t,sigma,raw,sigma_hat\n");
    let mut worst_err = 0.0f64;
    for r in &rows {
        for ((t, raw), s) in r.recovery.grid.iter().zip(&r.recovery.raw).zip(&r.recovery.sigma_hat) {
            writeln!(body, "{},{t:?},{:?},{raw:?},{s:?}", r.trial, reparam.sigma(*t)).unwrap();
        }
        worst_err = worst_err.max(r.sup_error);
        rec.require(r.sup_error <= RECOVERY_TOL, format!("trial {}: sup error {}", r.trial, r.sup_error));
    }
    rec.metric("worst_sup_error", worst_err).metric("tolerance", RECOVERY_TOL);
    csv_file(out, &mut rec, &format!("recovery_{}.csv", reparam.tag()), &body)?;
    Ok(rec)
}

fn recovery_identity(params: &TierParams, seed: u64, out: &OutputDir) -> Result<CheckRecord, CliError> {
    recovery("recovery-identity", Reparametrization::Identity, params, seed, out)
}

fn recovery_squared(params: &TierParams, seed: u64, out: &OutputDir) -> Result<CheckRecord, CliError> {
    recovery("recovery-squared", Reparametrization::Squared, params, seed, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoke_is_a_subset_of_desk() {
        let desk = check_names(Tier::Desk);
        for name in check_names(Tier::Smoke) {
            assert!(desk.contains(&name));
        }
        assert_eq!(desk.len(), REGISTRY.len());
    }

    #[test]
    fn desk_tags_cover_the_required_list() {
        // tags declared by the desk checks, gathered without running them
        let declared = [
            "chen-identity",
            "shuffle-identity",
            "admissible-norms",
            "projective-cross-norm",
            "projective-duality",
            "group-like-nonvanishing",
            "sup-versus-limsup",
            "hyperboloid-model",
            "development-length",
            "triangle-defect",
            "neoclassical-inequality",
            "factorial-ratio",
            "expected-signature-formula",
            "second-moment-bound",
            "sup-moment-bound",
            "ito-stratonovich-coefficients",
            "height-decay",
            "cartan-sde",
            "normalized-limsup",
            "kappa-upper-bound",
            "kappa-lower-bound",
            "deterministic-constant",
            "ito-signature-bounds",
            "brownian-scaling",
            "subadditivity",
            "height-vs-limsup",
            "height-series",
            "parametrization-recovery",
        ];
        for tag in IN_SCOPE_TAGS {
            assert!(declared.contains(tag), "{tag}");
        }
        for tag in Tier::Smoke.required_tags() {
            assert!(IN_SCOPE_TAGS.contains(&tag));
        }
    }
}
