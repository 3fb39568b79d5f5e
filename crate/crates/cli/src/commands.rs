//! Subcommand bodies. Each one resolves its [`RunConfig`], writes its files
//! and a manifest, and reports whether every check passed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sigtail::asymptotics::{
    concentration_test, estimate_limsup, ito_bound_check, recovery_experiment, stratonovich_bound_check,
    BoundLedger, Reparametrization, RECOVERY_TOL,
};
use sigtail::brownian::{
    expected_signature, mc_expected_signature, mc_second_moments, mc_sup_moments, random_words, BrownianSample,
    MomentReport,
};
use sigtail::hyperbolic::{develop, height_decay_experiment, triangle_defect_check, HeightDecayRow};
use sigtail::path::PiecewiseLinearPath;
use sigtail::rng::{derive_seed, stream};
use sigtail::signature::{full_signature, normalized_level_sequence, signature};
use sigtail::tensor::{index_word, is_group_like};

use crate::cli::{Cli, Command, Common};
use crate::config::{read_config_file, Overrides, RunConfig, OUT_DIR_ENV};
use crate::error::CliError;
use crate::manifest::{CheckRecord, OutputDir, RunManifest};
use crate::verify::run_tier;

/// Runs one invocation. `Ok(false)` means the run finished but a check
/// failed.
pub fn run(cli: Cli) -> Result<bool, CliError> {
    let name = cli.command.name();
    match cli.command {
        Command::Verify {
            tier,
            seed,
            out,
            config,
        } => {
            let file = match config {
                Some(path) => Some(verify_file(&path)?),
                None => None,
            };
            let flags = Overrides {
                seed,
                out,
                ..Default::default()
            };
            let cfg = resolve(name, file, flags)?;
            let mut dir = OutputDir::create(&cfg.out)?;
            let seed = cfg.seed;
            let mut manifest = RunManifest::new(cfg);
            run_tier(tier, seed, &mut dir, &mut manifest)?;
            for failure in &manifest.failures {
                eprintln!("failed check: {failure}");
            }
            let pass = manifest.pass;
            dir.finish(&manifest)?;
            Ok(pass)
        }
        Command::Signature {
            line,
            brownian,
            path,
            common,
        } => {
            let cfg = resolve_common(name, &common)?;
            let input = if let Some(v) = line {
                Input::Line(v.0)
            } else if brownian {
                Input::Brownian
            } else {
                Input::File(path.expect("clap enforces one input"))
            };
            finish(cfg, |cfg, dir, m| cmd_signature(cfg, input, dir, m))
        }
        Command::ExpectedSignature { common } => finish(resolve_common(name, &common)?, cmd_expected_signature),
        Command::Moments {
            words,
            random_words: count,
            max_len,
            sup,
            common,
        } => {
            let cfg = resolve_common(name, &common)?;
            let words = match (words, count) {
                (Some(text), None) => parse_words(&text, cfg.d)?,
                (None, Some(count)) => {
                    if max_len == 0 || (sup && max_len < 3) {
                        return Err(CliError::Usage("--max-len too small".into()));
                    }
                    let min_len = if sup { 3 } else { 1 };
                    random_words(cfg.d, count, min_len, max_len, derive_seed(cfg.seed, "words"))
                }
                _ => unreachable!("clap enforces one choice"),
            };
            finish(cfg, |cfg, dir, m| cmd_moments(cfg, &words, sup, dir, m))
        }
        Command::Hyperbolic {
            triangle_sweep,
            height_decay,
            develop,
            common,
        } => {
            let cfg = resolve_common(name, &common)?;
            if let Some(count) = triangle_sweep {
                finish(cfg, |cfg, dir, m| cmd_triangles(cfg, count, dir, m))
            } else if height_decay {
                finish(cfg, cmd_height_decay)
            } else {
                let file = develop.expect("clap enforces one mode");
                finish(cfg, |cfg, dir, m| cmd_develop(cfg, &file, dir, m))
            }
        }
        Command::Limsup { path, common } => {
            let cfg = resolve_common(name, &common)?;
            finish(cfg, |cfg, dir, m| cmd_limsup(cfg, path.as_deref(), dir, m))
        }
        Command::Concentration { common } => finish(resolve_common(name, &common)?, cmd_concentration),
        Command::Ito { common } => finish(resolve_common(name, &common)?, cmd_ito),
        Command::RecoverSigma {
            reparam,
            points,
            common,
        } => {
            let cfg = resolve_common(name, &common)?;
            if points == 0 {
                return Err(CliError::Usage("--points must be positive".into()));
            }
            finish(cfg, |cfg, dir, m| cmd_recover(cfg, reparam.into(), points, dir, m))
        }
    }
}

enum Input {
    Line(Vec<f64>),
    Brownian,
    File(PathBuf),
}

fn env_out() -> Option<PathBuf> {
    std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn resolve(name: &str, file: Option<Overrides>, flags: Overrides) -> Result<RunConfig, CliError> {
    let cfg = RunConfig::resolve(name, file, flags, env_out())?;
    if cfg.slack_overridden() {
        eprintln!(
            "WARNING: slack factors overridden to lower = {}, upper = {}; results are not comparable with the pre-registered tolerances",
            cfg.slack_lower, cfg.slack_upper
        );
    }
    Ok(cfg)
}

fn resolve_common(name: &str, common: &Common) -> Result<RunConfig, CliError> {
    let file = match &common.config {
        Some(path) => Some(read_config_file(path, name)?),
        None => None,
    };
    resolve(name, file, common.overrides())
}

fn verify_file(path: &Path) -> Result<Overrides, CliError> {
    let o = read_config_file(path, "verify")?;
    let allowed = Overrides {
        seed: o.seed,
        out: o.out.clone(),
        ..Default::default()
    };
    if allowed != o {
        return Err(CliError::Usage(
            "verify pins its parameters per tier; its config may only set seed and out".into(),
        ));
    }
    Ok(o)
}

fn finish(
    cfg: RunConfig,
    body: impl FnOnce(&RunConfig, &OutputDir, &mut RunManifest) -> Result<(), CliError>,
) -> Result<bool, CliError> {
    let mut dir = OutputDir::create(&cfg.out)?;
    let mut manifest = RunManifest::new(cfg.clone());
    let t0 = std::time::Instant::now();
    body(&cfg, &dir, &mut manifest)?;
    dir.add_section(&cfg.command, t0.elapsed().as_secs_f64());
    for check in &manifest.checks {
        eprintln!("{:<24} {}", check.name, if check.pass { "pass" } else { "FAIL" });
    }
    dir.finish(&manifest)?;
    Ok(true)
}

fn write(dir: &OutputDir, rec: &mut CheckRecord, name: &str, body: &str) -> Result<(), CliError> {
    dir.write(name, body)?;
    rec.files.push(name.to_string());
    Ok(())
}

fn read_path(file: &Path) -> Result<PiecewiseLinearPath, CliError> {
    let text = std::fs::read_to_string(file).map_err(|source| CliError::Io {
        context: format!("reading {}", file.display()),
        source,
    })?;
    Ok(PiecewiseLinearPath::from_csv(&text)?)
}

fn word_label(word: &[usize]) -> String {
    word.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join("-")
}

/// `1-2-1,2-2` with 1-based letters up to `d`.
pub fn parse_words(text: &str, d: usize) -> Result<Vec<Vec<usize>>, CliError> {
    text.split(',')
        .map(|w| {
            w.trim()
                .split('-')
                .map(|c| match c.trim().parse::<usize>() {
                    Ok(i) if (1..=d).contains(&i) => Ok(i - 1),
                    _ => Err(CliError::Usage(format!("bad letter {c:?} in word {w:?} for d = {d}"))),
                })
                .collect()
        })
        .collect()
}

fn cmd_signature(cfg: &RunConfig, input: Input, dir: &OutputDir, m: &mut RunManifest) -> Result<(), CliError> {
    let path = match input {
        Input::Line(v) => PiecewiseLinearPath::line(&v),
        Input::Brownian => BrownianSample::generate(cfg.d, cfg.t - cfg.s, cfg.k, cfg.seed, 0)?.into_path(),
        Input::File(f) => read_path(&f)?,
    };
    let rec = full_signature(&path, cfg.depth);
    let mut check = CheckRecord::new("group-like", &["shuffle-identity"]);
    let tol = 1e-9;
    let report = is_group_like(rec.series(), tol);
    check.metric("tolerance", tol);
    if let Some(w) = &report.worst {
        check.metric("worst_deviation", w.deviation);
    }
    check.require(report.group_like, "shuffle identity");
    write(dir, &mut check, "signature.txt", &rec.series().to_text())?;
    write(dir, &mut check, "signature.json", &(rec.series().to_json()? + "\n"))?;
    let mut csv = String::from("n,a_n\n");
    for (n, a) in normalized_level_sequence(&rec, cfg.p, cfg.norm_kind).iter().enumerate() {
        writeln!(csv, "{},{a:?}", n + 1).unwrap();
    }
    write(dir, &mut check, "normalized.csv", &csv)?;
    m.push(check);
    Ok(())
}

fn cmd_expected_signature(cfg: &RunConfig, dir: &OutputDir, m: &mut RunManifest) -> Result<(), CliError> {
    let t = cfg.t - cfg.s;
    let exact = expected_signature(cfg.d, t, cfg.depth);
    let mc = mc_expected_signature(cfg.d, t, cfg.depth, cfg.trials, cfg.k, cfg.seed)?;
    let mut check = CheckRecord::new("expected-signature", &["expected-signature-formula"]);
    write(dir, &mut check, "expected_signature.txt", &exact.to_text())?;
    let mut csv = String::from("word,mc,stderr,exact,pass\n");
    for n in 1..=cfg.depth {
        for (j, (mean, e)) in mc.mean.level(n).iter().zip(exact.level(n)).enumerate() {
            let s = mc.stderr.as_ref().map(|s| s.level(n)[j]);
            let pass = s.is_none_or(|s| (mean - e).abs() <= 4.0 * s);
            let word = word_label(&index_word(cfg.d, n, j));
            writeln!(csv, "{word},{mean:?},{:?},{e:?},{pass}", s.unwrap_or(f64::NAN)).unwrap();
            check.require(pass, format!("word {word}"));
        }
    }
    check.metric("trials", cfg.trials as f64);
    write(dir, &mut check, "expected_signature.csv", &csv)?;
    m.push(check);
    Ok(())
}

fn moment_csv(reports: &[MomentReport]) -> String {
    let mut csv = format!("{}\n", MomentReport::CSV_HEADER);
    for r in reports {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    csv
}

fn cmd_moments(
    cfg: &RunConfig,
    words: &[Vec<usize>],
    sup: bool,
    dir: &OutputDir,
    m: &mut RunManifest,
) -> Result<(), CliError> {
    let (name, tag, reports) = if sup {
        let r = mc_sup_moments(cfg.d, words, cfg.s, cfg.t, cfg.trials, cfg.k, cfg.seed)?;
        ("sup-moments", "sup-moment-bound", r)
    } else {
        let r = mc_second_moments(cfg.d, words, cfg.t - cfg.s, cfg.trials, cfg.k, cfg.seed)?;
        ("second-moments", "second-moment-bound", r)
    };
    let mut check = CheckRecord::new(name, &[tag]);
    for r in &reports {
        check.require(r.pass, r.csv_row());
    }
    write(dir, &mut check, "moments.csv", &moment_csv(&reports))?;
    m.push(check);
    Ok(())
}

fn cmd_triangles(cfg: &RunConfig, count: usize, dir: &OutputDir, m: &mut RunManifest) -> Result<(), CliError> {
    use rand::Rng;
    let mut rng = stream(derive_seed(cfg.seed, "triangles"), 0);
    let mut check = CheckRecord::new("triangle-defect", &["triangle-defect"]);
    let mut csv = String::from("b,c,theta,a,defect,bound,monotone,within_bound\n");
    for _ in 0..count {
        let b = 10f64.powf(rng.random_range(-2.0..2.5));
        let c = 10f64.powf(rng.random_range(-2.0..2.5));
        let theta = rng.random_range(1e-3..std::f64::consts::PI - 1e-3);
        let t = triangle_defect_check(b, c, theta)?;
        writeln!(
            csv,
            "{:?},{:?},{:?},{:?},{:?},{:?},{},{}",
            t.b, t.c, t.theta, t.a, t.defect, t.bound, t.monotone, t.within_bound
        )
        .unwrap();
        check.require(t.within_bound && t.monotone, format!("b={b} c={c} θ={theta}"));
    }
    write(dir, &mut check, "triangles.csv", &csv)?;
    m.push(check);
    Ok(())
}

fn cmd_height_decay(cfg: &RunConfig, dir: &OutputDir, m: &mut RunManifest) -> Result<(), CliError> {
    let mut check = CheckRecord::new("height-decay", &["height-decay"]);
    let mut csv = format!("{}\n", HeightDecayRow::CSV_HEADER);
    for &lambda in &cfg.lambda {
        let seed = derive_seed(cfg.seed, &format!("decay-{lambda}"));
        for r in height_decay_experiment(cfg.d, &cfg.mu, lambda, cfg.t - cfg.s, cfg.trials, cfg.k, seed)? {
            csv.push_str(&r.csv_row());
            csv.push('\n');
            check.require(r.pass, r.csv_row());
        }
    }
    write(dir, &mut check, "height_decay.csv", &csv)?;
    m.push(check);
    Ok(())
}

fn cmd_develop(cfg: &RunConfig, file: &Path, dir: &OutputDir, m: &mut RunManifest) -> Result<(), CliError> {
    let path = read_path(file)?;
    let mut check = CheckRecord::new("development", &["hyperboloid-model", "development-length"]);
    for (j, &lambda) in cfg.lambda.iter().enumerate() {
        let trace = develop(&path, lambda)?;
        let name = if cfg.lambda.len() == 1 {
            "trace.csv".to_string()
        } else {
            format!("trace_{j}.csv")
        };
        check.metric(&format!("lambda_{j}"), lambda);
        check.metric(&format!("max_defect_{j}"), trace.max_defect);
        check.require(trace.max_defect <= 1e-9, format!("Lorentz defect at λ = {lambda}"));
        write(dir, &mut check, &name, &trace.to_csv())?;
    }
    m.push(check);
    Ok(())
}

fn ledger_check(cfg: &RunConfig, name: &str, tags: &[&str], ledger: BoundLedger) -> CheckRecord {
    let ledger = ledger.with_slack(cfg.slack_lower, cfg.slack_upper);
    let (lo, hi) = ledger.interval();
    let mut check = CheckRecord::new(name, tags);
    check
        .metric("median", ledger.dispersion.median)
        .metric("interval_lower", lo)
        .metric("interval_upper", hi);
    if let Some(iqr) = ledger.dispersion.relative_iqr {
        check.metric("relative_iqr", iqr);
    }
    if ledger.informational {
        check.note("informational only: the bounds make no claim for d = 1");
    } else {
        check.require(ledger.pass, format!("median outside [{lo}, {hi}]"));
    }
    if ledger.low_confidence {
        check.note("low confidence: the window starts below level 3");
    }
    check
}

fn kappa_csv(kappas: &[f64]) -> String {
    let mut csv = String::from("trial,kappa_hat\n");
    for (i, k) in kappas.iter().enumerate() {
        writeln!(csv, "{i},{k:?}").unwrap();
    }
    csv
}

fn cmd_limsup(cfg: &RunConfig, file: Option<&Path>, dir: &OutputDir, m: &mut RunManifest) -> Result<(), CliError> {
    if let Some(file) = file {
        let path = read_path(file)?;
        let (s, t) = if cfg.s >= path.start_time() && cfg.t <= path.end_time() {
            (cfg.s, cfg.t)
        } else {
            (path.start_time(), path.end_time())
        };
        let rec = signature(&path, s, t, cfg.depth)?;
        let report = estimate_limsup(&rec, cfg.p, cfg.norm_kind, cfg.window)?;
        let mut check = CheckRecord::new("limsup", &["normalized-limsup"]);
        check.metric("kappa_hat", report.kappa_hat);
        if report.degenerate {
            check.note("degenerate: every level in the window vanishes");
        }
        write(dir, &mut check, "limsup.csv", &report.to_csv())?;
        write(dir, &mut check, "limsup.json", &(report.to_json()? + "\n"))?;
        m.push(check);
        return Ok(());
    }
    let kc = cfg.kappa_config();
    let sample = BrownianSample::generate(kc.d, kc.t, kc.k, kc.seed, 0)?;
    let first = estimate_limsup(&full_signature(sample.path(), kc.depth), kc.p, kc.norm, kc.window)?;
    let ledger = stratonovich_bound_check(&kc)?;
    let kappas = ledger.kappas.clone();
    let mut check = ledger_check(
        cfg,
        "kappa-sandwich",
        &["normalized-limsup", "kappa-upper-bound", "kappa-lower-bound"],
        ledger,
    );
    write(dir, &mut check, "limsup.csv", &kappa_csv(&kappas))?;
    write(dir, &mut check, "limsup_trial0.csv", &first.to_csv())?;
    write(dir, &mut check, "limsup_trial0.json", &(first.to_json()? + "\n"))?;
    m.push(check);
    Ok(())
}

fn cmd_concentration(cfg: &RunConfig, dir: &OutputDir, m: &mut RunManifest) -> Result<(), CliError> {
    let r = concentration_test(&cfg.kappa_config())?;
    let mut check = CheckRecord::new("kappa-concentration", &["deterministic-constant"]);
    check.metric("median", r.dispersion.median);
    match (r.dispersion.relative_iqr, r.dispersion_pass) {
        (Some(iqr), Some(pass)) => {
            check.metric("relative_iqr", iqr);
            check.require(pass, "relative IQR above the limit");
        }
        _ => {
            check.note("dispersion undefined for this many trials");
        }
    }
    check.require(r.subinterval_pass, "half-interval ratios out of range");
    let mut csv = String::from("trial,kappa_hat,half_ratio\n");
    for (i, (k, h)) in r.kappas.iter().zip(&r.subinterval_ratios).enumerate() {
        writeln!(csv, "{i},{k:?},{h:?}").unwrap();
    }
    write(dir, &mut check, "concentration.csv", &csv)?;
    m.push(check);
    Ok(())
}

fn cmd_ito(cfg: &RunConfig, dir: &OutputDir, m: &mut RunManifest) -> Result<(), CliError> {
    let ledger = ito_bound_check(&cfg.kappa_config())?;
    let kappas = ledger.kappas.clone();
    let mut check = ledger_check(cfg, "ito-sandwich", &["ito-signature-bounds"], ledger);
    write(dir, &mut check, "ito.csv", &kappa_csv(&kappas))?;
    m.push(check);
    Ok(())
}

fn cmd_recover(
    cfg: &RunConfig,
    reparam: Reparametrization,
    points: usize,
    dir: &OutputDir,
    m: &mut RunManifest,
) -> Result<(), CliError> {
    if cfg.s != 0.0 || cfg.t != 1.0 {
        return Err(CliError::Usage("recover-sigma runs on [0, 1]".into()));
    }
    let rows = recovery_experiment(&cfg.kappa_config(), reparam, points)?;
    let mut check = CheckRecord::new(&format!("recovery-{}", reparam.tag()), &["parametrization-recovery"]);
    let mut csv = String::from("trial,t,sigma,raw,sigma_hat\n");
    for r in &rows {
        for ((t, raw), s) in r.recovery.grid.iter().zip(&r.recovery.raw).zip(&r.recovery.sigma_hat) {
            writeln!(csv, "{},{t:?},{:?},{raw:?},{s:?}", r.trial, reparam.sigma(*t)).unwrap();
        }
        check.require(r.sup_error <= RECOVERY_TOL, format!("trial {}: sup error {}", r.trial, r.sup_error));
    }
    write(dir, &mut check, "recovery.csv", &csv)?;
    m.push(check);
    Ok(())
}
