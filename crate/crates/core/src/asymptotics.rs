//! Estimators for the normalized tail asymptotics of signatures and the
//! property checks built on them.
//!
//! The sequence `a_n = ((n/p)! ‖g_n‖)^{p/n}` only suggests its limsup at
//! finite depth. The surrogate used throughout is the maximum of `a_n` over a
//! trailing window `[N_0, N]`, divided by the interval length.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brownian::{ito_signature, BrownianSample};
use crate::error::{Error, Result};
use crate::hyperbolic::{brownian_height, develop, height_series, height_series_tail_bound};
use crate::path::PiecewiseLinearPath;
use crate::rng::{derive_seed, stream};
use crate::signature::{full_signature, log_normalized_level_sequence, running_signatures, signature, SignatureRecord};
use crate::stats;
use crate::tensor::{half_factorial_log, NormKind};

/// Multiplies the lower bound of every sandwich check.
pub const SLACK_LOWER: f64 = 0.4;
/// Multiplies the upper bound of every sandwich check.
pub const SLACK_UPPER: f64 = 1.25;
/// Allowed excess of the left side of the subadditivity estimate, as a
/// fraction of the right side.
pub const SUBADDITIVITY_TOL: f64 = 0.15;
/// Largest accepted interquartile range over median of an ensemble of `κ̂`.
pub const MAX_RELATIVE_IQR: f64 = 0.35;
/// Accepted range of `κ̂` on the first half over `κ̂` on the second half.
pub const SUBINTERVAL_RATIO_RANGE: (f64, f64) = (0.6, 1.6);
/// Relative slack on `(1/λ²) log h ≤ κ̂ t`.
pub const HEIGHT_SLACK: f64 = 0.2;
pub const NEOCLASSICAL_TOL: f64 = 1e-12;
/// Width of the default trailing window below the truncation depth.
pub const WINDOW_SPAN: usize = 6;
/// Ensembles smaller than this are reported but never pass a dispersion check.
pub const MIN_CONCENTRATION_TRIALS: usize = 8;

/// Levels `lo..=hi` over which `a_n` is maximized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub lo: usize,
    pub hi: usize,
}

impl Window {
    pub fn new(lo: usize, hi: usize) -> Result<Self> {
        if lo == 0 || lo > hi {
            return Err(Error::InvalidArgument(format!("bad window [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    /// `[max(3, N - 6), N]`.
    pub fn trailing(depth: usize) -> Self {
        Self {
            lo: depth.saturating_sub(WINDOW_SPAN).max(3).min(depth.max(1)),
            hi: depth.max(1),
        }
    }

    fn fits(&self, depth: usize) -> Result<()> {
        if self.hi > depth {
            return Err(Error::InvalidArgument(format!(
                "window [{}, {}] exceeds truncation depth {depth}",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    /// Windows starting below level 3 see mostly the low-order levels and
    /// say little about the tail.
    pub fn low_confidence(&self) -> bool {
        self.lo < 3
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub s: f64,
    pub t: f64,
    pub p: f64,
    pub norm: NormKind,
    /// `a_n` for `n = 1..=N`.
    pub sequence: Vec<f64>,
    pub window: Window,
    /// `max_{n in window} a_n / (t - s)`.
    pub kappa_hat: f64,
    /// Every level in the window vanished.
    pub degenerate: bool,
    pub low_confidence: bool,
}

impl AsymptoticsReport {
    /// `max_{n in window} a_n`, the surrogate for `L̃_{s,t}` itself.
    pub fn window_max(&self) -> f64 {
        self.kappa_hat * (self.t - self.s)
    }

    /// Flat `n,a_n` rows followed by a `kappa_hat` summary row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,a_n\n");
        for (i, a) in self.sequence.iter().enumerate() {
            out.push_str(&format!("{},{:?}\n", i + 1, a));
        }
        out.push_str(&format!("kappa_hat,{:?}\n", self.kappa_hat));
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn windowed_estimate(rec: &SignatureRecord, p: f64, kind: NormKind, window: Window) -> Result<AsymptoticsReport> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p must be >= 1, got {p}")));
    }
    window.fits(rec.depth())?;
    let span = rec.t - rec.s;
    if !(span > 0.0) {
        return Err(Error::InvalidArgument(format!("empty interval [{}, {}]", rec.s, rec.t)));
    }
    let logs = log_normalized_level_sequence(rec, p, kind);
    let top = logs[window.lo - 1..window.hi]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let degenerate = top == f64::NEG_INFINITY;
    let kappa_hat = if degenerate { 0.0 } else { top.exp() / span };
    if !kappa_hat.is_finite() {
        return Err(Error::Degenerate(format!("κ̂ over [{}, {}] is not finite", rec.s, rec.t)));
    }
    Ok(AsymptoticsReport {
        s: rec.s,
        t: rec.t,
        p,
        norm: kind,
        sequence: logs.into_iter().map(f64::exp).collect(),
        window,
        kappa_hat,
        degenerate,
        low_confidence: window.low_confidence(),
    })
}

/// Windowed limsup estimate for one signature record. The window must lie
/// in `[3, N]`.
pub fn estimate_limsup(rec: &SignatureRecord, p: f64, kind: NormKind, window: Window) -> Result<AsymptoticsReport> {
    if window.lo < 3 {
        return Err(Error::InvalidArgument(format!(
            "window {window} must start at level 3 or above"
        )));
    }
    windowed_estimate(rec, p, kind, window)
}

/// Parameters of a Brownian `κ̂` ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaConfig {
    pub d: usize,
    pub t: f64,
    /// Dyadic depth of every sample.
    pub k: u32,
    /// Truncation depth `N`.
    pub depth: usize,
    pub window: Window,
    pub p: f64,
    pub norm: NormKind,
    pub trials: usize,
    pub seed: u64,
}

impl KappaConfig {
    /// `d`, `t` with `k = 12`, `N = 14`, window `[8, 14]`, `p = 2`, the l¹
    /// projective norm and 16 trials.
    pub fn standard(d: usize, t: f64, seed: u64) -> Self {
        Self {
            d,
            t,
            k: 12,
            depth: 14,
            window: Window { lo: 8, hi: 14 },
            p: 2.0,
            norm: NormKind::L1Proj,
            trials: 16,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("need at least one trial".into()));
        }
        self.window.fits(self.depth)
    }

    fn sample(&self, trial: usize) -> Result<BrownianSample> {
        BrownianSample::generate(self.d, self.t, self.k, self.seed, trial as u64)
    }
}

/// Median, relative IQR and the raw values of an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub median: f64,
    /// Absent for fewer than two values or a zero median.
    pub relative_iqr: Option<f64>,
}

impl Dispersion {
    pub fn of(xs: &[f64]) -> Self {
        Self {
            median: stats::median(xs),
            relative_iqr: stats::relative_iqr(xs),
        }
    }
}

/// Per-sample `κ̂` over `[0, t]` for independent Brownian samples.
pub fn kappa_samples(cfg: &KappaConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let sample = cfg.sample(i)?;
            let rec = full_signature(sample.path(), cfg.depth);
            Ok(windowed_estimate(&rec, cfg.p, cfg.norm, cfg.window)?.kappa_hat)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub config: KappaConfig,
    pub kappas: Vec<f64>,
    pub dispersion: Dispersion,
    /// `relative IQR <= 0.35` with at least 8 trials; absent when the
    /// dispersion is undefined.
    pub dispersion_pass: Option<bool>,
    /// `κ̂` on `[0, t/2]` over `κ̂` on `[t/2, t]`, per sample.
    pub subinterval_ratios: Vec<f64>,
    pub subinterval_pass: bool,
}

/// Dispersion of `κ̂` across samples, plus the half-interval stability of
/// each sample. Both halves and the whole interval come from the same path
/// (the whole is the Chen product of the halves).
pub fn concentration_test(cfg: &KappaConfig) -> Result<ConcentrationReport> {
    cfg.validate()?;
    let per: Vec<(f64, f64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let sample = cfg.sample(i)?;
            let mid = 0.5 * cfg.t;
            let first = signature(sample.path(), 0.0, mid, cfg.depth)?;
            let second = signature(sample.path(), mid, cfg.t, cfg.depth)?;
            let whole = first.concat(&second)?;
            let est = |r: &SignatureRecord| windowed_estimate(r, cfg.p, cfg.norm, cfg.window).map(|e| e.kappa_hat);
            let (k1, k2) = (est(&first)?, est(&second)?);
            let ratio = if k2 > 0.0 { k1 / k2 } else { f64::INFINITY };
            Ok((est(&whole)?, ratio))
        })
        .collect::<Result<_>>()?;
    let kappas: Vec<f64> = per.iter().map(|x| x.0).collect();
    let subinterval_ratios: Vec<f64> = per.iter().map(|x| x.1).collect();
    let dispersion = Dispersion::of(&kappas);
    let dispersion_pass = dispersion
        .relative_iqr
        .map(|r| cfg.trials >= MIN_CONCENTRATION_TRIALS && r <= MAX_RELATIVE_IQR);
    let (lo, hi) = SUBINTERVAL_RATIO_RANGE;
    let subinterval_pass = subinterval_ratios.iter().all(|r| (lo..=hi).contains(r));
    Ok(ConcentrationReport {
        config: cfg.clone(),
        kappas,
        dispersion,
        dispersion_pass,
        subinterval_ratios,
        subinterval_pass,
    })
}

/// Empirical `κ̂` against a pair of bounds with the global slack factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundLedger {
    pub d: usize,
    pub lower: f64,
    pub upper: f64,
    pub slack_lower: f64,
    pub slack_upper: f64,
    pub kappas: Vec<f64>,
    pub dispersion: Dispersion,
    /// Median inside `[slack_lower * lower, slack_upper * upper]`.
    pub pass: bool,
    /// The bounds carry no claim for this configuration; reported only.
    pub informational: bool,
    pub low_confidence: bool,
}

impl BoundLedger {
    fn new(d: usize, lower: f64, upper: f64, kappas: Vec<f64>) -> Self {
        let dispersion = Dispersion::of(&kappas);
        let m = dispersion.median;
        Self {
            d,
            lower,
            upper,
            slack_lower: SLACK_LOWER,
            slack_upper: SLACK_UPPER,
            pass: m >= SLACK_LOWER * lower && m <= SLACK_UPPER * upper,
            kappas,
            dispersion,
            informational: false,
            low_confidence: false,
        }
    }

    /// `(d - 1)/2 <= κ_d <= d²` for the Stratonovich signature.
    pub fn stratonovich(d: usize, kappas: Vec<f64>) -> Self {
        let mut ledger = Self::new(d, (d as f64 - 1.0) / 2.0, (d * d) as f64, kappas);
        ledger.informational = d < 2;
        ledger
    }

    /// `d/2 <= κ̂ <= d²/2` for the Itô signature.
    pub fn ito(d: usize, kappas: Vec<f64>) -> Self {
        let mut ledger = Self::new(d, d as f64 / 2.0, (d * d) as f64 / 2.0, kappas);
        ledger.informational = d < 2;
        ledger
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.slack_lower * self.lower, self.slack_upper * self.upper)
    }

    /// Re-judges the ledger under other slack factors.
    pub fn with_slack(mut self, slack_lower: f64, slack_upper: f64) -> Self {
        self.slack_lower = slack_lower;
        self.slack_upper = slack_upper;
        let (lo, hi) = self.interval();
        self.pass = self.dispersion.median >= lo && self.dispersion.median <= hi;
        self
    }
}

/// Stratonovich sandwich over an ensemble.
pub fn stratonovich_bound_check(cfg: &KappaConfig) -> Result<BoundLedger> {
    Ok(BoundLedger::stratonovich(cfg.d, kappa_samples(cfg)?))
}

/// Windowed `κ̂` of the Itô iterated integrals of each sample against
/// `[d/2, d²/2]`. Windows starting below level 3 are allowed and flagged.
pub fn ito_bound_check(cfg: &KappaConfig) -> Result<BoundLedger> {
    cfg.validate()?;
    let kappas = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let sample = cfg.sample(i)?;
            let rec = SignatureRecord::new(0.0, cfg.t, ito_signature(&sample, cfg.depth));
            Ok(windowed_estimate(&rec, cfg.p, cfg.norm, cfg.window)?.kappa_hat)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut ledger = BoundLedger::ito(cfg.d, kappas);
    ledger.low_confidence = cfg.window.low_confidence();
    Ok(ledger)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityReport {
    pub s: f64,
    pub u: f64,
    pub t: f64,
    /// `κ̂_{s,t} (t - s)`.
    pub lhs: f64,
    /// `κ̂_{s,u} (u - s) + κ̂_{u,t} (t - u)`.
    pub rhs: f64,
    /// `(rhs - lhs) / rhs`.
    pub margin: f64,
    pub pass: bool,
}

/// Windowed subadditivity `L̃_{s,t} <= L̃_{s,u} + L̃_{u,t}` on one path, with
/// the trailing window of `depth` on every piece. The whole interval is the
/// Chen product of the two pieces.
pub fn subadditivity_check(
    path: &PiecewiseLinearPath,
    s: f64,
    u: f64,
    t: f64,
    depth: usize,
    p: f64,
    kind: NormKind,
) -> Result<SubadditivityReport> {
    if !(s < u && u < t) {
        return Err(Error::InvalidArgument(format!("need s < u < t, got {s}, {u}, {t}")));
    }
    let window = Window::trailing(depth);
    let left = signature(path, s, u, depth)?;
    let right = signature(path, u, t, depth)?;
    let whole = left.concat(&right)?;
    let max = |r: &SignatureRecord| windowed_estimate(r, p, kind, window).map(|e| e.window_max());
    let lhs = max(&whole)?;
    let rhs = max(&left)? + max(&right)?;
    let margin = if rhs > 0.0 {
        (rhs - lhs) / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::NEG_INFINITY
    };
    Ok(SubadditivityReport {
        s,
        u,
        t,
        lhs,
        rhs,
        margin,
        pass: margin >= -SUBADDITIVITY_TOL,
    })
}

/// Subadditivity on `pairs` Brownian samples, each split at a point drawn
/// uniformly from the middle 80% of `[0, t]`.
pub fn subadditivity_experiment(cfg: &KappaConfig, pairs: usize) -> Result<Vec<SubadditivityReport>> {
    use rand::Rng;
    let split_seed = derive_seed(cfg.seed, "subadditivity-split");
    (0..pairs)
        .into_par_iter()
        .map(|i| {
            let sample = cfg.sample(i)?;
            let frac: f64 = stream(split_seed, i as u64).random_range(0.1..0.9);
            subadditivity_check(sample.path(), 0.0, frac * cfg.t, cfg.t, cfg.depth, cfg.p, cfg.norm)
        })
        .collect()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let top = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + stats::pairwise_sum(&xs.iter().map(|x| (x - top).exp()).collect::<Vec<_>>()).ln()
}

/// `x ln y` with the convention `0 ln 0 = 0`.
fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Left side over right side of the neo-classical inequality
/// `Σ_i a^{i/p} b^{(N-i)/p} / ((i/p)! ((N-i)/p)!) <= p (a+b)^{N/p} / (N/p)!`,
/// evaluated in the log domain. Zero when both sides vanish.
pub fn neoclassical_ratio(a: f64, b: f64, p: f64, n: usize) -> f64 {
    let terms: Vec<f64> = (0..=n)
        .map(|i| {
            xlogy(i as f64 / p, a) + xlogy((n - i) as f64 / p, b) - half_factorial_log(i, p) - half_factorial_log(n - i, p)
        })
        .collect();
    let lhs = log_sum_exp(&terms);
    let rhs = p.ln() + xlogy(n as f64 / p, a + b) - half_factorial_log(n, p);
    if lhs == f64::NEG_INFINITY {
        return 0.0;
    }
    (lhs - rhs).exp()
}

/// Worst ratio over `N = 0..=nmax`.
pub fn neoclassical_check(a: f64, b: f64, p: f64, nmax: usize) -> Result<f64> {
    if !(a >= 0.0 && b >= 0.0 && p >= 1.0) {
        return Err(Error::InvalidArgument(format!("need a, b >= 0 and p >= 1; got {a}, {b}, {p}")));
    }
    Ok((0..=nmax)
        .map(|n| neoclassical_ratio(a, b, p, n))
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeoclassicalSweep {
    pub points: usize,
    pub nmax: usize,
    pub worst_ratio: f64,
    /// `(a, b, p)` of the worst point.
    pub worst_at: (f64, f64, f64),
    pub pass: bool,
}

/// Random points with `a, b` log-uniform in `[1e-3, 1e3]` and `p` uniform in
/// `[1, 2]`, every `N <= nmax`.
pub fn neoclassical_sweep(points: usize, nmax: usize, seed: u64) -> Result<NeoclassicalSweep> {
    use rand::Rng;
    let mut rng = stream(seed, 0);
    let mut worst = (0.0, (0.0, 0.0, 1.0));
    for _ in 0..points {
        let a = 10f64.powf(rng.random_range(-3.0..3.0));
        let b = 10f64.powf(rng.random_range(-3.0..3.0));
        let p = rng.random_range(1.0..=2.0);
        let r = neoclassical_check(a, b, p, nmax)?;
        if r > worst.0 {
            worst = (r, (a, b, p));
        }
    }
    Ok(NeoclassicalSweep {
        points,
        nmax,
        worst_ratio: worst.0,
        worst_at: worst.1,
        pass: worst.0 <= 1.0 + NEOCLASSICAL_TOL,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorialRatioReport {
    pub alpha: f64,
    pub p: f64,
    pub nmax: usize,
    /// `max_n (n/p)! / ((n-α)/p)! / n^{α/p}`.
    pub c: f64,
    /// Slope of the log ratio against `log n` over `[nmax/2, nmax]`.
    pub tail_slope: f64,
    /// The same over `[nmax/4, nmax/2]`.
    pub previous_slope: f64,
    pub bounded: bool,
}

/// The top-octave slope of a bounded factorial-ratio sweep must fall to this
/// fraction of the slope one octave down.
pub const FACTORIAL_RATIO_DECAY: f64 = 0.75;

/// `(n/p)! / ((n-α)/p)! <= C n^{α/p}` for `2α < n <= nmax`.
pub fn factorial_ratio_check(alpha: f64, p: f64, nmax: usize) -> Result<FactorialRatioReport> {
    if !(alpha > 0.0 && p >= 1.0) {
        return Err(Error::InvalidArgument(format!("need α > 0 and p >= 1; got {alpha}, {p}")));
    }
    let start = (2.0 * alpha).floor() as usize + 1;
    if nmax / 4 < start {
        return Err(Error::InvalidArgument(format!("nmax must be at least {}", 4 * start)));
    }
    let log_ratio = |n: usize| {
        let nf = n as f64;
        half_factorial_log(n, p) - crate::tensor::factorial_log((nf - alpha) / p) - alpha / p * nf.ln()
    };
    let c = (start..=nmax).map(|n| log_ratio(n).exp()).fold(0.0, f64::max);
    // log-log slopes over the last two octaves; a bounded ratio converging to
    // its limit has slopes shrinking toward zero, power growth keeps them flat
    let octave = |hi: usize| (log_ratio(hi) - log_ratio(hi / 2)) / ((hi as f64) / ((hi / 2) as f64)).ln();
    let tail_slope = octave(nmax);
    let previous_slope = octave(nmax / 2);
    Ok(FactorialRatioReport {
        alpha,
        p,
        nmax,
        c,
        tail_slope,
        previous_slope,
        bounded: c.is_finite() && tail_slope <= FACTORIAL_RATIO_DECAY * previous_slope.max(0.0) + 1e-12,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParametrizationRecovery {
    pub grid: Vec<f64>,
    /// `max_{window} a_n` over `[0, t] / κ` before cleanup.
    pub raw: Vec<f64>,
    /// Isotonic fit of `raw`, with `σ̂(0) = 0`.
    pub sigma_hat: Vec<f64>,
}

/// `σ̂(t) = L̃_{0,t} / κ` on `grid`, where `sigpath(t)` is the signature over
/// `[0, t]`, followed by a non-decreasing least-squares fit.
pub fn recover_parametrization<F>(
    mut sigpath: F,
    kappa: f64,
    grid: &[f64],
    p: f64,
    kind: NormKind,
    window: Window,
) -> Result<ParametrizationRecovery>
where
    F: FnMut(f64) -> Result<SignatureRecord>,
{
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidArgument(format!("κ must be positive, got {kappa}")));
    }
    let mut raw = Vec::with_capacity(grid.len());
    let mut any = false;
    for &t in grid {
        if t <= 0.0 {
            raw.push(0.0);
            continue;
        }
        let est = windowed_estimate(&sigpath(t)?, p, kind, window)?;
        any |= !est.degenerate;
        raw.push(est.window_max() / kappa);
    }
    if !any {
        return Err(Error::Degenerate(
            "every windowed estimate vanished; the path carries no tail information".into(),
        ));
    }
    let mut sigma_hat = stats::isotonic_increasing(&raw);
    for (s, &t) in sigma_hat.iter_mut().zip(grid) {
        if t <= 0.0 {
            *s = 0.0;
        }
    }
    Ok(ParametrizationRecovery {
        grid: grid.to_vec(),
        raw,
        sigma_hat,
    })
}

/// Time change applied to a Brownian sample before recovery.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reparametrization {
    Identity,
    /// `X_t = B_{t²}`.
    Squared,
}

impl Reparametrization {
    pub fn sigma(&self, t: f64) -> f64 {
        match self {
            Reparametrization::Identity => t,
            Reparametrization::Squared => t * t,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Reparametrization::Identity => "identity",
            Reparametrization::Squared => "squared",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub trial: usize,
    pub kappa: f64,
    pub recovery: ParametrizationRecovery,
    pub sup_error: f64,
}

/// Maximum sup-error accepted by [`recovery_experiment`].
pub const RECOVERY_TOL: f64 = 0.15;

/// Recovers the time change of `X = B ∘ σ` on `[0, 1]` for `trials`
/// samples, with `κ` set to each sample's own `κ̂` over `[0, 1]`, on the grid
/// `j / points` for `j = 1..=points`.
pub fn recovery_experiment(cfg: &KappaConfig, reparam: Reparametrization, points: usize) -> Result<Vec<RecoveryRow>> {
    cfg.validate()?;
    if cfg.t != 1.0 {
        return Err(Error::InvalidArgument("recovery runs on [0, 1]".into()));
    }
    let grid: Vec<f64> = (1..=points).map(|j| j as f64 / points as f64).collect();
    (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let sample = cfg.sample(i)?;
            let kappa = windowed_estimate(&full_signature(sample.path(), cfg.depth), cfg.p, cfg.norm, cfg.window)?
                .kappa_hat;
            let path = match reparam {
                Reparametrization::Identity => sample.into_path(),
                Reparametrization::Squared => sample.path().retime(f64::sqrt)?,
            };
            let records = running_signatures(&path, &grid, cfg.depth)?;
            let mut next = records.into_iter();
            let recovery = recover_parametrization(
                |_| next.next().ok_or_else(|| Error::InvalidArgument("grid exhausted".into())),
                kappa,
                &grid,
                cfg.p,
                cfg.norm,
                cfg.window,
            )?;
            let sup_error = recovery
                .sigma_hat
                .iter()
                .zip(&grid)
                .map(|(s, &t)| (s - reparam.sigma(t)).abs())
                .fold(0.0, f64::max);
            Ok(RecoveryRow {
                trial: i,
                kappa,
                recovery,
                sup_error,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub base: Vec<f64>,
    pub rescaled: Vec<f64>,
    pub ks: f64,
    pub pass: bool,
}

/// Largest accepted two-sample KS distance in [`scaling_check`].
pub const SCALING_MAX_KS: f64 = 0.25;

/// Brownian scaling: `κ̂` over `[0, t]` of fresh samples against `κ̂` of
/// `½ B_{4s}`, `s in [0, t]`, built from samples on `[0, 4t]` under an
/// independent seed.
pub fn scaling_check(cfg: &KappaConfig) -> Result<ScalingReport> {
    let base = kappa_samples(cfg)?;
    let seed = derive_seed(cfg.seed, "brownian-scaling");
    let rescaled = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let sample = BrownianSample::generate(cfg.d, 4.0 * cfg.t, cfg.k, seed, i as u64)?;
            let path = sample.path().dilate(0.5).retime(|s| s / 4.0)?;
            let rec = full_signature(&path, cfg.depth);
            Ok(windowed_estimate(&rec, cfg.p, cfg.norm, cfg.window)?.kappa_hat)
        })
        .collect::<Result<Vec<f64>>>()?;
    let ks = stats::ks_statistic(&base, &rescaled);
    Ok(ScalingReport {
        base,
        rescaled,
        ks,
        pass: ks <= SCALING_MAX_KS,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightBoundRow {
    pub trial: usize,
    pub lambda: f64,
    /// `(1/λ²) log h_t^λ`.
    pub lhs: f64,
    pub kappa_hat: f64,
    /// `κ̂ t (1 + 0.2)`.
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub trial: usize,
    pub lambda: f64,
    pub ode: f64,
    pub series: f64,
    pub tail_bound: f64,
    pub pass: bool,
}

/// `(1/λ²) log h_t^λ <= κ̂ t (1 + 0.2)` for every sample and `λ`, with `κ̂`
/// and the height taken from the same sample. For each `λ` in
/// `series_lambdas` the developed height of the sampled polygon is also
/// compared with the truncated signature series.
pub fn height_bound_check(
    cfg: &KappaConfig,
    lambdas: &[f64],
    series_lambdas: &[f64],
) -> Result<(Vec<HeightBoundRow>, Vec<SeriesRow>)> {
    cfg.validate()?;
    let per: Vec<(Vec<HeightBoundRow>, Vec<SeriesRow>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let sample = cfg.sample(i)?;
            let rec = full_signature(sample.path(), cfg.depth);
            let kappa_hat = windowed_estimate(&rec, cfg.p, cfg.norm, cfg.window)?.kappa_hat;
            let mut rows = Vec::with_capacity(lambdas.len());
            for &lambda in lambdas {
                let h = brownian_height(&sample, lambda)?;
                let lhs = h.log_height / (lambda * lambda);
                let rhs = kappa_hat * cfg.t * (1.0 + HEIGHT_SLACK);
                rows.push(HeightBoundRow {
                    trial: i,
                    lambda,
                    lhs,
                    kappa_hat,
                    rhs,
                    pass: lhs <= rhs,
                });
            }
            let mut series_rows = Vec::with_capacity(series_lambdas.len());
            for &lambda in series_lambdas {
                let ode = *develop(sample.path(), lambda)?.heights.last().expect("nonempty");
                let series = height_series(&rec, lambda);
                let tail_bound = height_series_tail_bound(sample.path().length_l2(), lambda, cfg.depth);
                series_rows.push(SeriesRow {
                    trial: i,
                    lambda,
                    ode,
                    series,
                    tail_bound,
                    pass: (ode - series).abs() <= tail_bound + 1e-12 * ode,
                });
            }
            Ok((rows, series_rows))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for (r, s) in per {
        rows.extend(r);
        series.extend(s);
    }
    Ok((rows, series))
}
