//! Exact truncated signatures of piecewise-linear paths.
//!
//! A linear chord with increment `v` has signature `exp(v)`; the signature of
//! a concatenation is the product of the pieces' signatures.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::path::PiecewiseLinearPath;
use crate::tensor::{
    half_factorial_log, level_norm, NormKind, Permutation, TruncatedTensorSeries,
};

#[derive(Debug)]
pub struct SignatureRecord {
    pub s: f64,
    pub t: f64,
    series: TruncatedTensorSeries,
    log_norms: Mutex<HashMap<NormKind, Vec<f64>>>,
}

impl Clone for SignatureRecord {
    fn clone(&self) -> Self {
        Self {
            s: self.s,
            t: self.t,
            series: self.series.clone(),
            log_norms: Mutex::new(self.log_norms.lock().unwrap().clone()),
        }
    }
}

impl SignatureRecord {
    pub fn new(s: f64, t: f64, series: TruncatedTensorSeries) -> Self {
        Self {
            s,
            t,
            series,
            log_norms: Mutex::new(HashMap::new()),
        }
    }

    pub fn series(&self) -> &TruncatedTensorSeries {
        &self.series
    }

    pub fn into_series(self) -> TruncatedTensorSeries {
        self.series
    }

    pub fn depth(&self) -> usize {
        self.series.depth()
    }

    pub fn dim(&self) -> usize {
        self.series.dim()
    }

    /// `log ‖g_n‖` for `n = 0..=N` (`-inf` for a zero level), cached per kind.
    pub fn log_level_norms(&self, kind: NormKind) -> Vec<f64> {
        if let Some(v) = self.log_norms.lock().unwrap().get(&kind) {
            return v.clone();
        }
        let d = self.series.dim();
        let v: Vec<f64> = self
            .series
            .levels()
            .iter()
            .map(|level| level_norm(d, level, kind).ln())
            .collect();
        self.log_norms.lock().unwrap().insert(kind, v.clone());
        v
    }

    /// Chen concatenation of adjacent records `[s, u]` and `[u, t]`.
    pub fn concat(&self, next: &SignatureRecord) -> Result<SignatureRecord> {
        Ok(SignatureRecord::new(
            self.s,
            next.t,
            self.series.product(&next.series)?,
        ))
    }
}

/// Signature of `path` over `[s, t]`, truncated at level `depth`.
pub fn signature(
    path: &PiecewiseLinearPath,
    s: f64,
    t: f64,
    depth: usize,
) -> Result<SignatureRecord> {
    let mut series = TruncatedTensorSeries::unit(path.dim(), depth);
    for chord in path.chords_between(s, t)? {
        series.mul_segment_exp(&chord);
    }
    Ok(SignatureRecord::new(s, t, series))
}

/// Signature over the whole domain of the path.
pub fn full_signature(path: &PiecewiseLinearPath, depth: usize) -> SignatureRecord {
    signature(path, path.start_time(), path.end_time(), depth).expect("full domain is valid")
}

/// Running signatures over `[t_0, u]` for each `u` in the increasing list
/// `stops`, computed in one sweep.
pub fn running_signatures(
    path: &PiecewiseLinearPath,
    stops: &[f64],
    depth: usize,
) -> Result<Vec<SignatureRecord>> {
    let t0 = path.start_time();
    let mut out = Vec::with_capacity(stops.len());
    let mut series = TruncatedTensorSeries::unit(path.dim(), depth);
    let mut from = t0;
    for &u in stops {
        if u < from {
            return Err(Error::InvalidArgument("stops must be increasing".into()));
        }
        if u > from {
            for chord in path.chords_between(from, u)? {
                series.mul_segment_exp(&chord);
            }
            from = u;
        }
        out.push(SignatureRecord::new(t0, u, series.clone()));
    }
    Ok(out)
}

/// Signature of the time-reversed path: reversal of every level with the sign
/// `(-1)^n` of reversed increments.
pub fn reverse_signature(rec: &SignatureRecord) -> SignatureRecord {
    let d = rec.dim();
    let levels = rec
        .series()
        .levels()
        .iter()
        .enumerate()
        .map(|(n, level)| {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            Permutation::reversal(n)
                .apply(d, level)
                .expect("arity matches level")
                .into_iter()
                .map(|x| sign * x)
                .collect()
        })
        .collect();
    SignatureRecord::new(
        rec.s,
        rec.t,
        TruncatedTensorSeries::from_levels(d, levels).expect("same shape"),
    )
}

/// `log a_n = (p/n) (log (n/p)! + log ‖g_n‖)` for `n = 1..=N`; entry `n-1`
/// holds level `n`. A zero level gives `-inf`.
pub fn log_normalized_level_sequence(rec: &SignatureRecord, p: f64, kind: NormKind) -> Vec<f64> {
    assert!(p >= 1.0, "normalization exponent must be >= 1");
    let logs = rec.log_level_norms(kind);
    (1..=rec.depth())
        .map(|n| {
            if logs[n] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                (p / n as f64) * (half_factorial_log(n, p) + logs[n])
            }
        })
        .collect()
}

/// `a_n = ((n/p)! ‖g_n‖)^{p/n}` for `n = 1..=N`; entry `n-1` holds level `n`.
pub fn normalized_level_sequence(rec: &SignatureRecord, p: f64, kind: NormKind) -> Vec<f64> {
    log_normalized_level_sequence(rec, p, kind)
        .into_iter()
        .map(f64::exp)
        .collect()
}

/// Running coefficients of every prefix of one word; cheaper than the full
/// signature when a single coefficient is tracked along a fine path.
#[derive(Clone, Debug)]
pub struct WordTracker {
    word: Vec<usize>,
    prefix: Vec<f64>,
    inv_factorial: Vec<f64>,
}

impl WordTracker {
    pub fn new(word: &[usize]) -> Self {
        let n = word.len();
        let mut prefix = vec![0.0; n + 1];
        prefix[0] = 1.0;
        let mut inv_factorial = vec![1.0; n + 1];
        for k in 1..=n {
            inv_factorial[k] = inv_factorial[k - 1] / k as f64;
        }
        Self {
            word: word.to_vec(),
            prefix,
            inv_factorial,
        }
    }

    /// Right-multiplies by the chord exponential `exp(v)`.
    pub fn push_chord(&mut self, v: &[f64]) {
        let n = self.word.len();
        for j in (1..=n).rev() {
            // Σ_{i<=j} c_i Π_{l=i}^{j-1} v[w_l] / (j-i)!
            let mut acc = self.prefix[j];
            let mut prod = 1.0;
            for i in (0..j).rev() {
                prod *= v[self.word[i]];
                acc += self.prefix[i] * prod * self.inv_factorial[j - i];
            }
            self.prefix[j] = acc;
        }
    }

    /// Itô Euler step: right-multiplies by `(1, v, 0, ...)`.
    pub fn push_increment(&mut self, v: &[f64]) {
        for j in (1..=self.word.len()).rev() {
            self.prefix[j] += self.prefix[j - 1] * v[self.word[j - 1]];
        }
    }

    pub fn value(&self) -> f64 {
        self.prefix[self.word.len()]
    }

    pub fn word(&self) -> &[usize] {
        &self.word
    }
}
