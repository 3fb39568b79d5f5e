//! Run configuration: defaults, a flat `key=value` file, then flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sigtail::asymptotics::{Window, SLACK_LOWER, SLACK_UPPER};
use sigtail::NormKind;

use crate::error::CliError;

/// Environment variable consulted for the output directory when neither a
/// flag nor the config file sets one.
pub const OUT_DIR_ENV: &str = "SIGTAIL_OUT";
pub const DEFAULT_OUT_DIR: &str = "sigtail-out";

pub const MAX_DIM: usize = 6;
pub const MAX_DEPTH: usize = 16;
pub const MAX_DYADIC: u32 = 24;
pub const MAX_TRIALS: usize = 1_000_000;

/// Keys accepted in a config file, mirroring the long flags.
pub const CONFIG_KEYS: &[&str] = &[
    "command",
    "d",
    "s",
    "t",
    "k",
    "N",
    "window",
    "norm",
    "p",
    "lambda",
    "mu",
    "M",
    "seed",
    "out",
    "slack-lower",
    "slack-upper",
];

/// Settings that may come from a flag or a config file. `None` means unset
/// at that layer.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub d: Option<usize>,
    pub s: Option<f64>,
    pub t: Option<f64>,
    pub k: Option<u32>,
    pub depth: Option<usize>,
    pub window: Option<(usize, usize)>,
    pub norm: Option<NormKind>,
    pub p: Option<f64>,
    pub lambdas: Option<Vec<f64>>,
    pub mus: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub slack_lower: Option<f64>,
    pub slack_upper: Option<f64>,
}

impl Overrides {
    /// Fields set in `top` replace those here.
    pub fn layered(mut self, top: Overrides) -> Overrides {
        macro_rules! take {
            ($($f:ident),*) => { $( if top.$f.is_some() { self.$f = top.$f; } )* };
        }
        take!(d, s, t, k, depth, window, norm, p, lambdas, mus, trials, seed, out, slack_lower, slack_upper);
        self
    }
}

pub fn parse_list(value: &str) -> Result<Vec<f64>, String> {
    let xs = value
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if xs.is_empty() || xs.iter().any(|x| !x.is_finite()) {
        return Err(format!("expected a comma-separated list of finite numbers, got {value:?}"));
    }
    Ok(xs)
}

pub fn parse_window(value: &str) -> Result<(usize, usize), String> {
    let (a, b) = value
        .split_once(',')
        .ok_or_else(|| format!("expected lo,hi, got {value:?}"))?;
    let lo = a.trim().parse().map_err(|e| format!("window start: {e}"))?;
    let hi = b.trim().parse().map_err(|e| format!("window end: {e}"))?;
    Ok((lo, hi))
}

pub fn parse_norm(value: &str) -> Result<NormKind, String> {
    value.parse().map_err(|e: sigtail::Error| e.to_string())
}

/// Parses a flat `key=value` file. Blank lines and lines starting with `#`
/// are skipped. Returns the overrides and the optional `command` entry.
pub fn parse_config_text(text: &str) -> Result<(Overrides, Option<String>), CliError> {
    let mut seen = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", i + 1)))?;
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(CliError::Usage(format!("config line {}: unknown key {key:?}", i + 1)));
        }
        if seen.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!("config line {}: duplicate key {key:?}", i + 1)));
        }
    }
    let bad = |key: &str, e: String| CliError::Usage(format!("config key {key}: {e}"));
    let num = |key: &str| -> Result<Option<f64>, CliError> {
        seen.get(key)
            .map(|v| v.parse::<f64>().map_err(|e| bad(key, e.to_string())))
            .transpose()
    };
    let int = |key: &str| -> Result<Option<u64>, CliError> {
        seen.get(key)
            .map(|v| v.parse::<u64>().map_err(|e| bad(key, e.to_string())))
            .transpose()
    };
    let o = Overrides {
        d: int("d")?.map(|x| x as usize),
        s: num("s")?,
        t: num("t")?,
        k: int("k")?.map(|x| x as u32),
        depth: int("N")?.map(|x| x as usize),
        window: seen
            .get("window")
            .map(|v| parse_window(v).map_err(|e| bad("window", e)))
            .transpose()?,
        norm: seen
            .get("norm")
            .map(|v| parse_norm(v).map_err(|e| bad("norm", e)))
            .transpose()?,
        p: num("p")?,
        lambdas: seen
            .get("lambda")
            .map(|v| parse_list(v).map_err(|e| bad("lambda", e)))
            .transpose()?,
        mus: seen
            .get("mu")
            .map(|v| parse_list(v).map_err(|e| bad("mu", e)))
            .transpose()?,
        trials: int("M")?.map(|x| x as usize),
        seed: int("seed")?,
        out: seen.get("out").map(PathBuf::from),
        slack_lower: num("slack-lower")?,
        slack_upper: num("slack-upper")?,
    };
    Ok((o, seen.get("command").cloned()))
}

pub fn read_config_file(path: &Path, command: &str) -> Result<Overrides, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let (o, declared) = parse_config_text(&text)?;
    if let Some(declared) = declared {
        if declared != command {
            return Err(CliError::Usage(format!(
                "config is for `{declared}` but `{command}` was run"
            )));
        }
    }
    Ok(o)
}

/// Fully resolved settings for one run. Serialized verbatim into the
/// manifest, except for the output directory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub d: usize,
    pub s: f64,
    pub t: f64,
    pub k: u32,
    #[serde(rename = "N")]
    pub depth: usize,
    pub window: Window,
    pub norm: String,
    #[serde(skip)]
    pub norm_kind: NormKind,
    pub p: f64,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    #[serde(rename = "M")]
    pub trials: usize,
    pub seed: u64,
    pub slack_lower: f64,
    pub slack_upper: f64,
    #[serde(skip)]
    pub out: PathBuf,
}

/// Per-command defaults, before any file or flag.
pub fn defaults(command: &str) -> Overrides {
    let trials = match command {
        "expected-signature" => 10_000,
        "moments" => 5000,
        "hyperbolic" => 2000,
        "recover-sigma" => 4,
        "limsup" | "concentration" | "ito" => 16,
        _ => 1,
    };
    Overrides {
        d: Some(2),
        s: Some(0.0),
        t: Some(1.0),
        k: Some(12),
        depth: Some(match command {
            "expected-signature" => 4,
            "signature" => 8,
            "moments" => 8,
            _ => 14,
        }),
        window: None,
        norm: Some(NormKind::L1Proj),
        p: Some(2.0),
        lambdas: Some(vec![4.0, 8.0, 16.0]),
        mus: Some(vec![0.5, 1.0]),
        trials: Some(trials),
        seed: Some(1),
        out: None,
        slack_lower: Some(SLACK_LOWER),
        slack_upper: Some(SLACK_UPPER),
    }
}

impl RunConfig {
    /// Layers defaults, the config file and the flags (in that order) and
    /// checks the safe ranges.
    pub fn resolve(
        command: &str,
        file: Option<Overrides>,
        flags: Overrides,
        env_out: Option<PathBuf>,
    ) -> Result<RunConfig, CliError> {
        let mut o = defaults(command);
        if let Some(file) = file {
            o = o.layered(file);
        }
        let o = o.layered(flags);
        let depth = o.depth.unwrap();
        let window = match o.window {
            Some((lo, hi)) => Window::new(lo, hi).map_err(|e| CliError::Usage(e.to_string()))?,
            None => Window::trailing(depth),
        };
        let norm_kind = o.norm.unwrap();
        let cfg = RunConfig {
            command: command.to_string(),
            d: o.d.unwrap(),
            s: o.s.unwrap(),
            t: o.t.unwrap(),
            k: o.k.unwrap(),
            depth,
            window,
            norm: norm_kind.tag(),
            norm_kind,
            p: o.p.unwrap(),
            lambda: o.lambdas.unwrap(),
            mu: o.mus.unwrap(),
            trials: o.trials.unwrap(),
            seed: o.seed.unwrap(),
            slack_lower: o.slack_lower.unwrap(),
            slack_upper: o.slack_upper.unwrap(),
            out: o
                .out
                .or(env_out)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.d == 0 || self.d > MAX_DIM {
            return usage(format!("d must be in 1..={MAX_DIM}, got {}", self.d));
        }
        if self.depth > MAX_DEPTH {
            return usage(format!("N must be at most {MAX_DEPTH}, got {}", self.depth));
        }
        if self.k > MAX_DYADIC {
            return usage(format!("k must be at most {MAX_DYADIC}, got {}", self.k));
        }
        if self.trials == 0 || self.trials > MAX_TRIALS {
            return usage(format!("M must be in 1..={MAX_TRIALS}, got {}", self.trials));
        }
        if !(self.s.is_finite() && self.t.is_finite() && self.s < self.t) {
            return usage(format!("need finite s < t, got [{}, {}]", self.s, self.t));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return usage(format!("p must be at least 1, got {}", self.p));
        }
        if self.window.hi > self.depth {
            return usage(format!("window {} does not fit N = {}", self.window, self.depth));
        }
        if self.lambda.iter().any(|l| *l <= 0.0) {
            return usage("λ values must be positive".into());
        }
        if self.mu.iter().any(|m| *m <= 0.0) {
            return usage("μ values must be positive".into());
        }
        if !(self.slack_lower > 0.0 && self.slack_lower <= 1.0 && self.slack_upper >= 1.0) {
            return usage(format!(
                "slack factors must satisfy 0 < lower <= 1 <= upper, got {} and {}",
                self.slack_lower, self.slack_upper
            ));
        }
        Ok(())
    }

    /// Whether the slack factors differ from the global ones.
    pub fn slack_overridden(&self) -> bool {
        self.slack_lower != SLACK_LOWER || self.slack_upper != SLACK_UPPER
    }

    pub fn kappa_config(&self) -> sigtail::asymptotics::KappaConfig {
        sigtail::asymptotics::KappaConfig {
            d: self.d,
            t: self.t - self.s,
            k: self.k,
            depth: self.depth,
            window: self.window,
            p: self.p,
            norm: self.norm_kind,
            trials: self.trials,
            seed: self.seed,
        }
    }
}
