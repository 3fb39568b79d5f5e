//! Brownian sampling, the closed-form expected signature, and Monte Carlo
//! moment estimators for signature coefficients.

use std::fmt::Write as _;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::PiecewiseLinearPath;
use crate::rng::{stream, StreamRng};
use crate::signature::{full_signature, WordTracker};
use crate::stats::pairwise_sum;
use crate::tensor::{factorial_log, tensor_levels, TruncatedTensorSeries};

pub const MAX_DYADIC_DEPTH: u32 = 24;
pub const DEFAULT_DYADIC_DEPTH: u32 = 12;
pub const DEFAULT_TRIALS: usize = 10_000;

/// A Brownian path sampled on the dyadic grid `j T / 2^k` and interpolated
/// linearly between grid points.
#[derive(Clone, Debug)]
pub struct BrownianSample {
    pub dim: usize,
    pub horizon: f64,
    pub depth: u32,
    pub seed: u64,
    pub stream: u64,
    path: PiecewiseLinearPath,
}

impl BrownianSample {
    /// Lévy midpoint construction: draw `B_T`, then fill in midpoints level by
    /// level. Draws are consumed level by level, so the sample at depth `k+1`
    /// with the same `(seed, stream)` restricts to the sample at depth `k`.
    pub fn generate(dim: usize, horizon: f64, depth: u32, seed: u64, stream_index: u64) -> Result<Self> {
        if depth > MAX_DYADIC_DEPTH {
            return Err(Error::InvalidArgument(format!(
                "dyadic depth {depth} exceeds {MAX_DYADIC_DEPTH}"
            )));
        }
        if dim == 0 || !(horizon > 0.0) {
            return Err(Error::InvalidArgument("need d >= 1 and T > 0".into()));
        }
        let mut rng = stream(seed, stream_index);
        let m = 1usize << depth;
        let mut values = vec![0.0; (m + 1) * dim];
        let gauss = |rng: &mut StreamRng| -> f64 { StandardNormal.sample(rng) };
        let sd = horizon.sqrt();
        for i in 0..dim {
            values[m * dim + i] = sd * gauss(&mut rng);
        }
        for level in 1..=depth {
            let step = 1usize << (depth - level);
            // parent interval length is 2 * step grid units
            let parent_len = horizon * (2 * step) as f64 / m as f64;
            let cond_sd = (parent_len / 4.0).sqrt();
            let mut mid = step;
            while mid < m {
                for i in 0..dim {
                    let left = values[(mid - step) * dim + i];
                    let right = values[(mid + step) * dim + i];
                    values[mid * dim + i] = 0.5 * (left + right) + cond_sd * gauss(&mut rng);
                }
                mid += 2 * step;
            }
        }
        let times = (0..=m).map(|j| horizon * j as f64 / m as f64).collect();
        let points = values.chunks_exact(dim).map(<[f64]>::to_vec).collect();
        let path = PiecewiseLinearPath::new(times, points)?;
        Ok(Self {
            dim,
            horizon,
            depth,
            seed,
            stream: stream_index,
            path,
        })
    }

    pub fn path(&self) -> &PiecewiseLinearPath {
        &self.path
    }

    pub fn into_path(self) -> PiecewiseLinearPath {
        self.path
    }

    /// The same Brownian path resolved at a deeper dyadic level.
    pub fn refine(&self, depth: u32) -> Result<Self> {
        Self::generate(self.dim, self.horizon, depth, self.seed, self.stream)
    }

    pub fn increments(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.path.chords()
    }
}

/// Stream 0 under `seed`.
pub fn sample_brownian(d: usize, horizon: f64, k: u32, seed: u64) -> Result<BrownianSample> {
    BrownianSample::generate(d, horizon, k, seed, 0)
}

/// Closed-form expected Stratonovich signature of Brownian motion on
/// `[0, t]`: odd levels vanish and level `2n` is
/// `t^n / (n! 2^n) (Σ_i e_i ⊗ e_i)^{⊗n}`.
pub fn expected_signature(d: usize, t: f64, depth: usize) -> TruncatedTensorSeries {
    let mut out = TruncatedTensorSeries::zero(d, depth);
    out.level_mut(0)[0] = 1.0;
    let mut identity = vec![0.0; d * d];
    for i in 0..d {
        identity[i * d + i] = 1.0;
    }
    let mut power = vec![1.0];
    let mut scale = 1.0;
    let mut n = 0;
    while 2 * (n + 1) <= depth {
        n += 1;
        power = tensor_levels(&power, &identity);
        scale *= t / (2.0 * n as f64);
        for (o, &p) in out.level_mut(2 * n).iter_mut().zip(&power) {
            *o = scale * p;
        }
    }
    out
}

/// Trials are grouped in fixed blocks; each block sums in trial order and the
/// block sums are combined pairwise, so the result does not depend on how many
/// workers run the blocks.
const BLOCK: usize = 64;

/// Per-component sums of `x` and `x^2` over `trials` evaluations of `f`.
fn mc_moments<F>(trials: usize, width: usize, f: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    let blocks: Vec<(usize, usize)> = (0..trials)
        .step_by(BLOCK)
        .map(|start| (start, (start + BLOCK).min(trials)))
        .collect();
    let partial: Vec<(Vec<f64>, Vec<f64>)> = blocks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut s1 = vec![0.0; width];
            let mut s2 = vec![0.0; width];
            for trial in lo..hi {
                let x = f(trial as u64)?;
                for (j, v) in x.iter().enumerate() {
                    s1[j] += v;
                    s2[j] += v * v;
                }
            }
            Ok((s1, s2))
        })
        .collect::<Result<_>>()?;
    let combine = |pick: fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>| -> Vec<f64> {
        (0..width)
            .map(|j| {
                let col: Vec<f64> = partial.iter().map(|p| pick(p)[j]).collect();
                pairwise_sum(&col)
            })
            .collect()
    };
    Ok((combine(|p| &p.0), combine(|p| &p.1)))
}

fn mean_and_stderr(s1: f64, s2: f64, m: usize) -> (f64, Option<f64>) {
    let mf = m as f64;
    let mean = s1 / mf;
    if m < 2 {
        return (mean, None);
    }
    let var = ((s2 - mf * mean * mean) / (mf - 1.0)).max(0.0);
    (mean, Some((var / mf).sqrt()))
}

#[derive(Clone, Debug)]
pub struct McSignature {
    pub trials: usize,
    pub mean: TruncatedTensorSeries,
    /// Standard error per coefficient; absent for a single trial.
    pub stderr: Option<TruncatedTensorSeries>,
}

/// Empirical mean of `trials` chord-path signatures of independent Brownian
/// samples (trial `i` uses stream `i` under `seed`).
pub fn mc_expected_signature(
    d: usize,
    t: f64,
    depth: usize,
    trials: usize,
    k: u32,
    seed: u64,
) -> Result<McSignature> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let template = TruncatedTensorSeries::zero(d, depth);
    let width: usize = template.levels().iter().map(Vec::len).sum();
    let (s1, s2) = mc_moments(trials, width, |trial| {
        let sample = BrownianSample::generate(d, t, k, seed, trial)?;
        let sig = full_signature(sample.path(), depth);
        Ok(sig.series().levels().iter().flatten().copied().collect())
    })?;
    let mut mean_levels = Vec::with_capacity(depth + 1);
    let mut err_levels = Vec::with_capacity(depth + 1);
    let mut offset = 0;
    let mut has_err = true;
    for level in template.levels() {
        let mut mean = Vec::with_capacity(level.len());
        let mut err = Vec::with_capacity(level.len());
        for j in offset..offset + level.len() {
            let (m, e) = mean_and_stderr(s1[j], s2[j], trials);
            mean.push(m);
            match e {
                Some(e) => err.push(e),
                None => has_err = false,
            }
        }
        offset += level.len();
        mean_levels.push(mean);
        err_levels.push(err);
    }
    Ok(McSignature {
        trials,
        mean: TruncatedTensorSeries::from_levels(d, mean_levels)?,
        stderr: if has_err {
            Some(TruncatedTensorSeries::from_levels(d, err_levels)?)
        } else {
            None
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    /// 0-based letters.
    pub word: Vec<usize>,
    pub n: usize,
    pub trials: usize,
    /// Empirical mean of the bounded quantity.
    pub mean: f64,
    /// Empirical mean of its square.
    pub second_moment: f64,
    pub stderr: f64,
    pub bound: f64,
    /// Secondary form of the bound, where one exists.
    pub refined_bound: Option<f64>,
    /// `mean <= bound + 3 stderr`.
    pub pass: bool,
}

impl MomentReport {
    pub const CSV_HEADER: &'static str = "word,n,M,mean,stderr,bound,pass";

    /// One CSV row; the word is printed with 1-based letters joined by `-`.
    pub fn csv_row(&self) -> String {
        let word = self
            .word
            .iter()
            .map(|i| (i + 1).to_string())
            .collect::<Vec<_>>()
            .join("-");
        let mut row = String::new();
        write!(
            row,
            "{},{},{},{:?},{:?},{:?},{}",
            word, self.n, self.trials, self.mean, self.stderr, self.bound, self.pass
        )
        .unwrap();
        row
    }
}

/// `E|B^{w}_{0,t}|^2 <= (2n)!/(n!)^2 · t^n/(n! 2^n)` for a word of length `n`.
pub fn second_moment_bound(n: usize, t: f64) -> f64 {
    let nf = n as f64;
    (factorial_log(2.0 * nf) - 3.0 * factorial_log(nf) - nf * 2f64.ln() + nf * t.ln()).exp()
}

/// The Stirling form `e/(√2 π) · 2^n / (√n n!) · t^n` of the same bound.
pub fn second_moment_bound_stirling(n: usize, t: f64) -> f64 {
    let nf = n as f64;
    let c = std::f64::consts::E / (std::f64::consts::SQRT_2 * std::f64::consts::PI);
    c * (nf * 2f64.ln() - 0.5 * nf.ln() - factorial_log(nf) + nf * t.ln()).exp()
}

/// `E sup_{s<=u<=t} |B^{w}_{s,u}| <= (1/2 + √2)(e/(√2 π))^{1/2}
/// 2^{n/2} / ((n-2)^{1/4} √(n!)) (t-s)^{n/2}`, defined for `n >= 3`.
pub fn sup_moment_bound(n: usize, span: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "sup-moment bound needs a word of length >= 3, got {n}"
        )));
    }
    let nf = n as f64;
    let c = (0.5 + std::f64::consts::SQRT_2)
        * (std::f64::consts::E / (std::f64::consts::SQRT_2 * std::f64::consts::PI)).sqrt();
    Ok(c * (0.5 * nf * 2f64.ln() - 0.25 * (nf - 2.0).ln() - 0.5 * factorial_log(nf)
        + 0.5 * nf * span.ln())
    .exp())
}

/// `count` words over `d` letters with lengths uniform in `min_len..=max_len`,
/// drawn from stream 0 under `seed`.
pub fn random_words(d: usize, count: usize, min_len: usize, max_len: usize, seed: u64) -> Vec<Vec<usize>> {
    use rand::Rng;
    let mut rng = stream(seed, 0);
    (0..count)
        .map(|_| {
            let n = rng.random_range(min_len..=max_len);
            (0..n).map(|_| rng.random_range(0..d)).collect()
        })
        .collect()
}

fn check_words(d: usize, words: &[Vec<usize>]) -> Result<()> {
    for w in words {
        if w.is_empty() || w.iter().any(|&i| i >= d) {
            return Err(Error::InvalidArgument(format!(
                "word {w:?} is empty or uses letters outside 0..{d}"
            )));
        }
    }
    Ok(())
}

fn report(word: &[usize], trials: usize, s1: f64, s2: f64, bound: f64, refined: Option<f64>) -> MomentReport {
    let (mean, err) = mean_and_stderr(s1, s2, trials);
    let stderr = err.unwrap_or(f64::NAN);
    let band = if stderr.is_finite() { 3.0 * stderr } else { 0.0 };
    MomentReport {
        word: word.to_vec(),
        n: word.len(),
        trials,
        mean,
        second_moment: s2 / trials as f64,
        stderr,
        bound,
        refined_bound: refined,
        pass: mean <= bound + band,
    }
}

/// Second moments `E|B^{w}_{0,t}|^2` of several words from shared samples.
pub fn mc_second_moments(
    d: usize,
    words: &[Vec<usize>],
    t: f64,
    trials: usize,
    k: u32,
    seed: u64,
) -> Result<Vec<MomentReport>> {
    check_words(d, words)?;
    let (s1, s2) = mc_moments(trials, words.len(), |trial| {
        let sample = BrownianSample::generate(d, t, k, seed, trial)?;
        let mut trackers: Vec<WordTracker> = words.iter().map(|w| WordTracker::new(w)).collect();
        for c in sample.increments() {
            for tr in trackers.iter_mut() {
                tr.push_chord(&c);
            }
        }
        Ok(trackers.iter().map(|tr| tr.value() * tr.value()).collect())
    })?;
    Ok(words
        .iter()
        .enumerate()
        .map(|(j, w)| {
            report(
                w,
                trials,
                s1[j],
                s2[j],
                second_moment_bound(w.len(), t),
                Some(second_moment_bound_stirling(w.len(), t)),
            )
        })
        .collect())
}

pub fn mc_second_moment(
    d: usize,
    word: &[usize],
    t: f64,
    trials: usize,
    k: u32,
    seed: u64,
) -> Result<MomentReport> {
    Ok(mc_second_moments(d, &[word.to_vec()], t, trials, k, seed)?.remove(0))
}

/// `E sup_{s<=u<=t} |B^{w}_{s,u}|` along the dyadic grid, for several words.
pub fn mc_sup_moments(
    d: usize,
    words: &[Vec<usize>],
    s: f64,
    t: f64,
    trials: usize,
    k: u32,
    seed: u64,
) -> Result<Vec<MomentReport>> {
    check_words(d, words)?;
    if !(s < t) {
        return Err(Error::InvalidArgument(format!("need s < t, got [{s}, {t}]")));
    }
    let bounds = words
        .iter()
        .map(|w| sup_moment_bound(w.len(), t - s))
        .collect::<Result<Vec<_>>>()?;
    // increments are stationary, so [s, t] is sampled as [0, t - s]
    let (s1, s2) = mc_moments(trials, words.len(), |trial| {
        let sample = BrownianSample::generate(d, t - s, k, seed, trial)?;
        let mut trackers: Vec<WordTracker> = words.iter().map(|w| WordTracker::new(w)).collect();
        let mut sup = vec![0.0f64; words.len()];
        for c in sample.increments() {
            for (tr, m) in trackers.iter_mut().zip(sup.iter_mut()) {
                tr.push_chord(&c);
                *m = m.max(tr.value().abs());
            }
        }
        Ok(sup)
    })?;
    Ok(words
        .iter()
        .enumerate()
        .map(|(j, w)| report(w, trials, s1[j], s2[j], bounds[j], None))
        .collect())
}

pub fn mc_sup_moment(
    d: usize,
    word: &[usize],
    s: f64,
    t: f64,
    trials: usize,
    k: u32,
    seed: u64,
) -> Result<MomentReport> {
    Ok(mc_sup_moments(d, &[word.to_vec()], s, t, trials, k, seed)?.remove(0))
}

/// Itô iterated integrals on the sample's grid: the Euler hierarchy
/// `I^n_{j+1} = I^n_j + I^{n-1}_j ⊗ ΔB_j`.
pub fn ito_signature(sample: &BrownianSample, depth: usize) -> TruncatedTensorSeries {
    let mut out = TruncatedTensorSeries::unit(sample.dim, depth);
    for c in sample.increments() {
        out.mul_increment(&c);
    }
    out
}

/// Per-word empirical means of the Itô and Stratonovich (chord) coefficients
/// at the terminal time, from the same samples.
#[derive(Clone, Debug)]
pub struct ItoStratonovichMeans {
    pub word: Vec<usize>,
    pub ito_mean: f64,
    pub ito_stderr: f64,
    pub strat_mean: f64,
    pub strat_stderr: f64,
    /// Mean and standard error of the per-sample difference Strat − Itô.
    pub gap_mean: f64,
    pub gap_stderr: f64,
}

pub fn mc_ito_vs_stratonovich(
    d: usize,
    words: &[Vec<usize>],
    t: f64,
    trials: usize,
    k: u32,
    seed: u64,
) -> Result<Vec<ItoStratonovichMeans>> {
    check_words(d, words)?;
    let w = words.len();
    let (s1, s2) = mc_moments(trials, 3 * w, |trial| {
        let sample = BrownianSample::generate(d, t, k, seed, trial)?;
        let mut ito: Vec<WordTracker> = words.iter().map(|w| WordTracker::new(w)).collect();
        let mut strat = ito.clone();
        for c in sample.increments() {
            for (a, b) in ito.iter_mut().zip(strat.iter_mut()) {
                a.push_increment(&c);
                b.push_chord(&c);
            }
        }
        let mut out = Vec::with_capacity(3 * w);
        out.extend(ito.iter().map(WordTracker::value));
        out.extend(strat.iter().map(WordTracker::value));
        out.extend(ito.iter().zip(&strat).map(|(a, b)| b.value() - a.value()));
        Ok(out)
    })?;
    Ok(words
        .iter()
        .enumerate()
        .map(|(j, word)| {
            let (im, ie) = mean_and_stderr(s1[j], s2[j], trials);
            let (sm, se) = mean_and_stderr(s1[w + j], s2[w + j], trials);
            let (gm, ge) = mean_and_stderr(s1[2 * w + j], s2[2 * w + j], trials);
            ItoStratonovichMeans {
                word: word.clone(),
                ito_mean: im,
                ito_stderr: ie.unwrap_or(f64::NAN),
                strat_mean: sm,
                strat_stderr: se.unwrap_or(f64::NAN),
                gap_mean: gm,
                gap_stderr: ge.unwrap_or(f64::NAN),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use approx::assert_relative_eq;

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_brownian(2, 1.0, 8, 7).unwrap();
        let b = sample_brownian(2, 1.0, 8, 7).unwrap();
        assert_eq!(a.path(), b.path());
        let c = sample_brownian(2, 1.0, 8, 8).unwrap();
        assert_ne!(a.path(), c.path());
        assert_eq!(a.path().points()[0], vec![0.0, 0.0]);
    }

    #[test]
    fn refinement_keeps_skeleton() {
        let coarse = sample_brownian(3, 2.0, 6, 11).unwrap();
        let fine = coarse.refine(7).unwrap();
        for (j, p) in coarse.path().points().iter().enumerate() {
            assert_eq!(p, &fine.path().points()[2 * j]);
        }
        assert!(sample_brownian(1, 1.0, 25, 0).is_err());
    }

    #[test]
    fn terminal_variance_within_four_sigma() {
        let m = 10_000;
        let t = 1.5;
        let xs: Vec<f64> = (0..m)
            .map(|i| {
                let s = BrownianSample::generate(1, t, 4, 99, i).unwrap();
                s.path().points().last().unwrap()[0]
            })
            .collect();
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let var = stats::mean(&sq);
        let se = stats::stderr(&sq).unwrap();
        assert!((var - t).abs() <= 4.0 * se, "{var} vs {t} (se {se})");
        let mean = stats::mean(&xs);
        assert!(mean.abs() <= 4.0 * stats::stderr(&xs).unwrap());
    }

    #[test]
    fn increments_have_declared_variance() {
        let s = sample_brownian(2, 1.0, 12, 3).unwrap();
        let sq: Vec<f64> = s.increments().flatten().map(|x| x * x).collect();
        let var = stats::mean(&sq);
        let target = 1.0 / 4096.0;
        let se = stats::stderr(&sq).unwrap();
        assert!((var - target).abs() <= 4.0 * se, "{var}");
    }

    #[test]
    fn expected_signature_closed_form() {
        let e = expected_signature(2, 1.0, 4);
        assert_eq!(e.coeff(&[0, 0]), 0.5);
        assert_eq!(e.coeff(&[1, 1]), 0.5);
        assert_eq!(e.coeff(&[0, 1]), 0.0);
        assert_eq!(e.coeff(&[1, 0]), 0.0);
        for w in [[0, 0, 0, 0], [0, 0, 1, 1], [1, 1, 0, 0], [1, 1, 1, 1]] {
            assert_relative_eq!(e.coeff(&w), 0.125, max_relative = 1e-15);
        }
        let nonzero = e.level(4).iter().filter(|&&x| x != 0.0).count();
        assert_eq!(nonzero, 4);
        for d in 1..=4 {
            let e = expected_signature(d, 0.7, 5);
            assert!(e.level(1).iter().chain(e.level(3)).chain(e.level(5)).all(|&x| x == 0.0));
        }
    }

    #[test]
    fn mc_expected_signature_small() {
        let mc = mc_expected_signature(2, 1.0, 4, 2000, 6, 5).unwrap();
        let exact = expected_signature(2, 1.0, 4);
        let err = mc.stderr.as_ref().unwrap();
        for n in 1..=4 {
            for (j, (&m, &e)) in mc.mean.level(n).iter().zip(exact.level(n)).enumerate() {
                assert!((m - e).abs() <= 4.0 * err.level(n)[j] + 1e-15, "level {n} idx {j}");
            }
        }
        let single = mc_expected_signature(2, 1.0, 3, 1, 6, 5).unwrap();
        assert!(single.stderr.is_none());
        let sample = BrownianSample::generate(2, 1.0, 6, 5, 0).unwrap();
        assert_eq!(&single.mean, full_signature(sample.path(), 3).series());
    }

    #[test]
    fn moment_bound_values() {
        assert_relative_eq!(second_moment_bound(1, 1.0), 1.0, max_relative = 1e-14);
        assert_relative_eq!(second_moment_bound(2, 1.0), 0.75, max_relative = 1e-14);
        // (1/2 + √2) (e/(√2 π))^{1/2} 2^{3/2} / √6
        let direct = (0.5 + 2f64.sqrt())
            * (std::f64::consts::E / (2f64.sqrt() * std::f64::consts::PI)).sqrt()
            * 2f64.powf(1.5)
            / 6f64.sqrt();
        assert_relative_eq!(sup_moment_bound(3, 1.0).unwrap(), direct, max_relative = 1e-14);
        assert!((direct - 1.7289).abs() < 1e-4, "{direct}");
        let ratio = sup_moment_bound(5, 0.5).unwrap() / sup_moment_bound(5, 1.0).unwrap();
        assert_relative_eq!(ratio, 2f64.powf(-2.5), max_relative = 1e-14);
        assert!(sup_moment_bound(2, 1.0).is_err());
        // the Stirling form dominates the exact shuffle-count form
        for n in 1..30 {
            assert!(second_moment_bound_stirling(n, 1.0) >= second_moment_bound(n, 1.0));
        }
    }

    #[test]
    fn second_moment_examples() {
        let r = mc_second_moment(2, &[0], 1.0, 4000, 6, 1).unwrap();
        assert!(r.pass);
        assert!((r.mean - 1.0).abs() <= 4.0 * r.stderr);
        let r = mc_second_moment(2, &[0, 1], 1.0, 4000, 6, 2).unwrap();
        assert!(r.pass, "{r:?}");
        assert_relative_eq!(r.bound, 0.75, max_relative = 1e-14);
    }

    #[test]
    fn second_moment_scales_with_time() {
        let word = vec![0, 1, 1];
        let a = mc_second_moment(2, &word, 1.0, 3000, 6, 4).unwrap();
        let b = mc_second_moment(2, &word, 2.0, 3000, 6, 4).unwrap();
        // same streams: the t = 2 sample is the t = 1 sample scaled by √2
        assert_relative_eq!(b.mean / a.mean, 8.0, max_relative = 1e-9);
    }

    #[test]
    fn sup_moment_example() {
        let r = mc_sup_moment(2, &[0, 1, 0], 0.0, 1.0, 1000, 6, 3).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(mc_sup_moment(2, &[0, 1], 0.0, 1.0, 10, 4, 3).is_err());
    }

    #[test]
    fn ito_level_one_is_increment() {
        let s = sample_brownian(2, 1.0, 8, 12).unwrap();
        let ito = ito_signature(&s, 3);
        let end = s.path().points().last().unwrap();
        for i in 0..2 {
            assert_relative_eq!(ito.level(1)[i], end[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn ito_stratonovich_diagonal_gap() {
        let words = vec![vec![0, 0], vec![0, 1]];
        let res = mc_ito_vs_stratonovich(2, &words, 1.0, 3000, 8, 6).unwrap();
        let diag = &res[0];
        assert!(diag.ito_mean.abs() <= 4.0 * diag.ito_stderr);
        assert!((diag.strat_mean - 0.5).abs() <= 4.0 * diag.strat_stderr);
        assert!((diag.gap_mean - 0.5).abs() <= 4.0 * diag.gap_stderr.max(1e-12));
        let off = &res[1];
        assert!(off.ito_mean.abs() <= 4.0 * off.ito_stderr);
        assert!(off.strat_mean.abs() <= 4.0 * off.strat_stderr);
    }

    #[test]
    fn csv_row_format() {
        let r = MomentReport {
            word: vec![0, 1],
            n: 2,
            trials: 10,
            mean: 0.5,
            second_moment: 0.3,
            stderr: 0.1,
            bound: 0.75,
            refined_bound: None,
            pass: true,
        };
        assert_eq!(r.csv_row(), "1-2,2,10,0.5,0.1,0.75,true");
    }
}
