//! Cartan development of paths into `SO(d,1)` and the hyperboloid model
//! `H^d = {x : x*x = -1, x^{d+1} > 0}` with Minkowski form
//! `x*y = Σ_{i<=d} x^i y^i - x^{d+1} y^{d+1}`.
//!
//! A chord with increment `x` develops to `exp F(x)`, where `F(x)` has `x` in
//! its last column and last row and zeros elsewhere. Since
//! `F(x)^2 = diag(x x^T, |x|^2)` the exponential has the closed form
//! `I + (sinh r / r) F(x) + ((cosh r - 1) / r^2) F(x)^2` with `r = |x|_2`.

use std::fmt::Write as _;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brownian::{BrownianSample, MAX_DYADIC_DEPTH};
use crate::error::{Error, Result};
use crate::path::PiecewiseLinearPath;
use crate::rng::stream;
use crate::signature::SignatureRecord;
use crate::stats;

/// Guard on the normalized Lorentz defect; larger drift aborts a development.
pub const DRIFT_GUARD: f64 = 1e-6;
/// Frames are re-projected onto `SO(d,1)` while their height stays below
/// this value. Above it the J-inner products of the rows lose all relative
/// precision to cancellation and re-projection would inject error.
pub const REPROJECT_MAX_HEIGHT: f64 = 1e6;
/// Products of exact chord exponentials drift only by rounding; they are
/// re-projected once the normalized defect passes this level, since
/// re-projection itself costs accuracy when the entries are large.
pub const REPROJECT_TRIGGER: f64 = 1e-12;
/// Chord length bound `λ |Δ|_2 <= 0.25` enforced by auto-refinement.
pub const MAX_SCALED_CHORD: f64 = 0.25;
/// Heights above this are reported through their logarithm.
pub const LOG_HEIGHT_THRESHOLD: f64 = 1e100;

pub fn minkowski(x: &[f64], y: &[f64]) -> f64 {
    let last = x.len() - 1;
    let spatial: f64 = x[..last].iter().zip(&y[..last]).map(|(a, b)| a * b).sum();
    spatial - x[last] * y[last]
}

/// `arccosh` that stays accurate for arguments near 1 and past `f64` overflow
/// of `v^2`.
fn acosh_stable(v: f64) -> f64 {
    if v > 1e8 {
        v.ln() + (1.0 + (1.0 - 1.0 / (v * v)).sqrt()).ln()
    } else {
        let x = v - 1.0;
        (x + (x * (x + 2.0)).sqrt()).ln_1p()
    }
}

/// `arccosh(e^{log_h})` without forming `e^{log_h}` when it would overflow.
pub fn distance_from_log_height(log_h: f64) -> f64 {
    if log_h > 20.0 {
        log_h + (1.0 + (1.0 - (-2.0 * log_h).exp()).sqrt()).ln()
    } else {
        acosh_stable(log_h.exp())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperbolicPoint {
    coords: Vec<f64>,
}

impl HyperbolicPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidArgument("need d >= 1".into()));
        }
        let q = minkowski(&coords, &coords);
        let scale = coords.iter().map(|x| x * x).sum::<f64>().max(1.0);
        if (q + 1.0).abs() > 1e-9 * scale || coords[coords.len() - 1] < 1.0 - 1e-9 {
            return Err(Error::OffHyperboloid(-q));
        }
        Ok(Self { coords })
    }

    /// The base point `o = (0, ..., 0, 1)`.
    pub fn origin(d: usize) -> Self {
        let mut coords = vec![0.0; d + 1];
        coords[d] = 1.0;
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn height(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }
}

/// `ρ(x, y) = arccosh(-x*y)`.
pub fn hyperbolic_distance(x: &HyperbolicPoint, y: &HyperbolicPoint) -> Result<f64> {
    let v = -minkowski(&x.coords, &y.coords);
    if v < 1.0 - 1e-9 {
        return Err(Error::OffHyperboloid(v));
    }
    Ok(acosh_stable(v.max(1.0)))
}

/// Row-major `(d+1) x (d+1)` matrix in `SO(d,1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LorentzFrame {
    d: usize,
    m: Vec<f64>,
}

impl LorentzFrame {
    pub fn identity(d: usize) -> Self {
        let n = d + 1;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 1.0;
        }
        Self { d, m }
    }

    pub fn from_rows(d: usize, m: Vec<f64>) -> Result<Self> {
        if m.len() != (d + 1) * (d + 1) {
            return Err(Error::InvalidArgument("frame needs (d+1)^2 entries".into()));
        }
        Ok(Self { d, m })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.m[i * (self.d + 1) + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.m
    }

    /// `Γ^{d+1}_{d+1}`, the height of `Γ o`.
    pub fn height(&self) -> f64 {
        self.entry(self.d, self.d)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.d + 1;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.m[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * other.m[k * n + j];
                }
            }
        }
        Self { d: self.d, m: out }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.d + 1;
        (0..n)
            .map(|i| (0..n).map(|j| self.m[i * n + j] * x[j]).sum())
            .collect()
    }

    /// `Γ o`, the last column.
    pub fn base_point(&self) -> Vec<f64> {
        let n = self.d + 1;
        (0..n).map(|i| self.m[i * n + self.d]).collect()
    }

    fn row(&self, i: usize) -> &[f64] {
        let n = self.d + 1;
        &self.m[i * n..(i + 1) * n]
    }

    /// Largest deviation of the row inner products from `J`, each normalized
    /// by the Euclidean norms of the rows involved. For frames of unit size
    /// this is `‖Γ J Γ^T J - I‖_max` up to the sign pattern of `J`.
    pub fn lorentz_defect(&self) -> f64 {
        let n = self.d + 1;
        let norms: Vec<f64> = (0..n)
            .map(|i| self.row(i).iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                let target = if i != j {
                    0.0
                } else if i == self.d {
                    -1.0
                } else {
                    1.0
                };
                let dev = (minkowski(self.row(i), self.row(j)) - target).abs() / (norms[i] * norms[j]).max(1.0);
                worst = worst.max(dev);
            }
        }
        worst
    }

    /// Unnormalized `‖Γ J Γ^T J - I‖_max`.
    pub fn lorentz_defect_abs(&self) -> f64 {
        let n = self.d + 1;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                // (Γ J Γ^T J)_{ij} = <row_i, row_j>_J * J_jj
                let jj = if j == self.d { -1.0 } else { 1.0 };
                let v = minkowski(self.row(i), self.row(j)) * jj;
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }

    /// Lorentz Gram–Schmidt on the rows: the last (timelike) row is
    /// normalized first with a positive last entry, then the spatial rows are
    /// J-orthonormalized against everything before them.
    pub fn reproject(&mut self) {
        let n = self.d + 1;
        let d = self.d;
        let mut rows: Vec<Vec<f64>> = (0..n).map(|i| self.row(i).to_vec()).collect();
        let mut last = rows[d].clone();
        let q = -minkowski(&last, &last);
        if q > 0.0 {
            let s = q.sqrt();
            last.iter_mut().for_each(|x| *x /= s);
        }
        if last[d] < 0.0 {
            last.iter_mut().for_each(|x| *x = -*x);
        }
        rows[d] = last;
        for i in 0..d {
            let mut r = rows[i].clone();
            // against the timelike row (J-norm -1)
            let c = minkowski(&r, &rows[d]);
            for (x, y) in r.iter_mut().zip(&rows[d]) {
                *x += c * y;
            }
            for prev in rows.iter().take(i) {
                let c = minkowski(&r, prev);
                for (x, y) in r.iter_mut().zip(prev) {
                    *x -= c * y;
                }
            }
            let q = minkowski(&r, &r);
            if q > 0.0 {
                let s = q.sqrt();
                r.iter_mut().for_each(|x| *x /= s);
            }
            rows[i] = r;
        }
        self.m = rows.concat();
    }
}

/// `sinh r / r` and `(cosh r - 1) / r^2`, finite at `r = 0`.
fn chord_coefficients(r: f64) -> (f64, f64) {
    if r == 0.0 {
        return (1.0, 0.5);
    }
    let half = (0.5 * r).sinh() / r;
    (r.sinh() / r, 2.0 * half * half)
}

/// `exp F(x)` in closed form.
pub fn chord_exp(x: &[f64]) -> LorentzFrame {
    let d = x.len();
    let n = d + 1;
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (c1, c2) = chord_coefficients(r);
    let mut m = vec![0.0; n * n];
    for i in 0..d {
        for j in 0..d {
            m[i * n + j] = c2 * x[i] * x[j];
        }
        m[i * n + i] += 1.0;
        m[i * n + d] = c1 * x[i];
        m[d * n + i] = c1 * x[i];
    }
    m[d * n + d] = r.cosh();
    LorentzFrame { d, m }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DevelopmentTrace {
    pub lambda: f64,
    pub times: Vec<f64>,
    /// `h(t)`; saturates to `inf` past `f64` range, see `log_heights`.
    pub heights: Vec<f64>,
    pub log_heights: Vec<f64>,
    /// `ρ(X_t, o)`.
    pub distances: Vec<f64>,
    /// `X_t = Γ_t o` at every vertex.
    pub points: Vec<Vec<f64>>,
    /// Largest normalized Lorentz defect met along the way.
    pub max_defect: f64,
    #[serde(skip)]
    pub frames: Option<Vec<LorentzFrame>>,
}

impl DevelopmentTrace {
    pub const CSV_HEADER: &'static str = "t,h,rho,loght";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for j in 0..self.times.len() {
            let h = if self.heights[j] > LOG_HEIGHT_THRESHOLD {
                f64::NAN
            } else {
                self.heights[j]
            };
            writeln!(
                out,
                "{:?},{:?},{:?},{:?}",
                self.times[j], h, self.distances[j], self.log_heights[j]
            )
            .unwrap();
        }
        out
    }

    /// Sum of hyperbolic distances between consecutive developed vertices.
    pub fn trace_length(&self) -> Result<f64> {
        let mut total = 0.0;
        for w in self.points.windows(2) {
            let v = -minkowski(&w[0], &w[1]);
            let scale = w[0].iter().map(|x| x * x).sum::<f64>();
            if v < 1.0 - 1e-9 * scale.max(1.0) {
                return Err(Error::OffHyperboloid(v));
            }
            total += acosh_stable(v.max(1.0));
        }
        Ok(total)
    }
}

fn develop_impl(path: &PiecewiseLinearPath, lambda: f64, keep_frames: bool) -> Result<DevelopmentTrace> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("λ must be positive, got {lambda}")));
    }
    let d = path.dim();
    let mut frame = LorentzFrame::identity(d);
    let m = path.num_chords() + 1;
    let mut trace = DevelopmentTrace {
        lambda,
        times: path.times().to_vec(),
        heights: Vec::with_capacity(m),
        log_heights: Vec::with_capacity(m),
        distances: Vec::with_capacity(m),
        points: Vec::with_capacity(m),
        max_defect: 0.0,
        frames: keep_frames.then(|| Vec::with_capacity(m)),
    };
    let record = |frame: &LorentzFrame, trace: &mut DevelopmentTrace| {
        let h = frame.height();
        trace.heights.push(h);
        trace.log_heights.push(h.ln());
        trace.distances.push(acosh_stable(h.max(1.0)));
        trace.points.push(frame.base_point());
        if let Some(frames) = trace.frames.as_mut() {
            frames.push(frame.clone());
        }
    };
    record(&frame, &mut trace);
    for chord in path.chords() {
        let scaled: Vec<f64> = chord.iter().map(|x| lambda * x).collect();
        frame = frame.mul(&chord_exp(&scaled));
        let mut defect = frame.lorentz_defect();
        if defect > REPROJECT_TRIGGER && frame.height() <= REPROJECT_MAX_HEIGHT {
            frame.reproject();
            defect = frame.lorentz_defect();
        }
        if !(defect <= DRIFT_GUARD) {
            return Err(Error::LorentzDrift(defect));
        }
        trace.max_defect = trace.max_defect.max(defect);
        record(&frame, &mut trace);
    }
    Ok(trace)
}

/// Cartan development of `λ γ`: `Γ_j = Γ_{j-1} exp F(λ Δγ_j)`, recorded at
/// every vertex.
pub fn develop(path: &PiecewiseLinearPath, lambda: f64) -> Result<DevelopmentTrace> {
    develop_impl(path, lambda, false)
}

/// [`develop`] keeping every frame.
pub fn develop_with_frames(path: &PiecewiseLinearPath, lambda: f64) -> Result<DevelopmentTrace> {
    develop_impl(path, lambda, true)
}

/// Terminal `log h` of the development of `λ γ` from the chords alone.
///
/// Only the last row `w` of `Γ` is propagated (`w <- w exp F(λ Δ)`), held as
/// `e^{scale} u` so heights far past `f64` range stay representable.
pub fn terminal_log_height<I>(chords: I, d: usize, lambda: f64) -> Result<f64>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    const RESCALE_AT: f64 = 1e150;
    let mut u = vec![0.0; d + 1];
    u[d] = 1.0;
    let mut log_scale: f64 = 0.0;
    let mut fu = vec![0.0; d + 1];
    for chord in chords {
        let r = lambda * chord.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (c1, c2) = chord_coefficients(r);
        // u F(λx) and u F(λx)^2
        let dot: f64 = (0..d).map(|i| u[i] * chord[i]).sum::<f64>() * lambda;
        for i in 0..d {
            fu[i] = u[d] * lambda * chord[i];
        }
        fu[d] = dot;
        let last = u[d];
        for i in 0..d {
            u[i] += c1 * fu[i] + c2 * dot * lambda * chord[i];
        }
        u[d] = last + c1 * fu[d] + c2 * last * r * r;

        let norm2: f64 = u.iter().map(|x| x * x).sum();
        let target = -(-2.0 * log_scale).exp();
        let defect = (minkowski(&u, &u) - target).abs() / norm2.max(1.0);
        if !(defect <= DRIFT_GUARD) {
            return Err(Error::LorentzDrift(defect));
        }
        if u[d] > RESCALE_AT {
            u.iter_mut().for_each(|x| *x /= RESCALE_AT);
            log_scale += RESCALE_AT.ln();
        }
    }
    Ok(log_scale + u[d].ln())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightSample {
    pub log_height: f64,
    /// Dyadic depth actually used after auto-refinement.
    pub depth: u32,
}

impl HeightSample {
    pub fn height(&self) -> f64 {
        self.log_height.exp()
    }
}

/// Refines the sample (same skeleton) until `λ · max chord <= 0.25`.
pub fn refine_for_lambda(sample: &BrownianSample, lambda: f64) -> Result<BrownianSample> {
    let mut s = sample.clone();
    while lambda * s.path().max_chord_l2() > MAX_SCALED_CHORD {
        if s.depth >= MAX_DYADIC_DEPTH {
            return Err(Error::InvalidArgument(format!(
                "λ = {lambda} needs dyadic depth beyond {MAX_DYADIC_DEPTH}"
            )));
        }
        s = s.refine(s.depth + 1)?;
    }
    Ok(s)
}

/// Height `h_t^λ` of the hyperbolic development of `λ B` on `[0, t]` for the
/// Brownian sample `(seed, stream)`, auto-refined from depth `k`.
pub fn brownian_height(sample: &BrownianSample, lambda: f64) -> Result<HeightSample> {
    let s = refine_for_lambda(sample, lambda)?;
    let log_height = terminal_log_height(s.increments(), s.dim, lambda)?;
    Ok(HeightSample {
        log_height,
        depth: s.depth,
    })
}

pub fn develop_brownian_height(
    d: usize,
    t: f64,
    lambda: f64,
    k: u32,
    seed: u64,
    stream_index: u64,
) -> Result<HeightSample> {
    let sample = BrownianSample::generate(d, t, k, seed, stream_index)?;
    brownian_height(&sample, lambda)
}

/// Itô form of the development, `dΓ = λ Γ F(dB) + (λ^2/2) Γ diag(I_d, d) dt`,
/// by Euler–Maruyama. Returns the height after every step (`steps + 1`
/// values).
///
/// Only the last row `w` of `Γ` enters the height, and it evolves on its own
/// (`w <- w S` for the Euler step `S`). After each step `w` is put back on the
/// hyperboloid by recomputing `w_d = sqrt(1 + |w_s|^2)` from its spatial part,
/// which stays well conditioned however large the height gets.
///
/// `steps` is rounded up to a power of two and the increments are those of
/// the dyadic Brownian sample `(seed, stream)`, so the result can be compared
/// pathwise with [`develop_brownian_height`].
pub fn ito_height_path(
    d: usize,
    t: f64,
    lambda: f64,
    steps: usize,
    seed: u64,
    stream_index: u64,
) -> Result<Vec<f64>> {
    let min_steps = (lambda * lambda * t * 100.0).ceil() as usize;
    if steps < min_steps.max(1) {
        return Err(Error::InvalidArgument(format!(
            "need at least {min_steps} steps for λ = {lambda}, t = {t}"
        )));
    }
    let depth = steps.next_power_of_two().trailing_zeros();
    let sample = BrownianSample::generate(d, t, depth, seed, stream_index)?;
    let dt = t / (1usize << depth) as f64;
    let drift = 0.5 * lambda * lambda * dt;
    let mut w = vec![0.0; d + 1];
    w[d] = 1.0;
    let mut out = Vec::with_capacity((1 << depth) + 1);
    out.push(1.0);
    for db in sample.increments() {
        let last = w[d];
        let dot: f64 = (0..d).map(|i| w[i] * db[i]).sum();
        for i in 0..d {
            w[i] += drift * w[i] + lambda * last * db[i];
        }
        w[d] = last + lambda * dot + drift * d as f64 * last;
        let spatial: f64 = w[..d].iter().map(|x| x * x).sum();
        if !spatial.is_finite() || !w[d].is_finite() {
            return Err(Error::NonFinite(out.len()));
        }
        w[d] = (1.0 + spatial).sqrt();
        out.push(w[d]);
    }
    Ok(out)
}

pub fn ito_height_sde(
    d: usize,
    t: f64,
    lambda: f64,
    steps: usize,
    seed: u64,
    stream_index: u64,
) -> Result<f64> {
    Ok(*ito_height_path(d, t, lambda, steps, seed, stream_index)?
        .last()
        .unwrap())
}

/// `Σ_n λ^{2n} Φ_n(g_{2n})` with `Φ_n(v_1..v_{2n}) = <v_1,v_2>...<v_{2n-1},v_{2n}>`,
/// over the levels the record holds.
pub fn height_series(rec: &SignatureRecord, lambda: f64) -> f64 {
    let d = rec.dim();
    let g = rec.series();
    let mut total = 1.0;
    let mut n = 1;
    while 2 * n <= g.depth() {
        // words (i_1 i_1 i_2 i_2 ... i_n i_n)
        let level = g.level(2 * n);
        let mut phi = 0.0;
        for idx in 0..d.pow(n as u32) {
            let mut rest = idx;
            let mut full = 0;
            let mut mult = 1;
            for _ in 0..n {
                let letter = rest % d;
                rest /= d;
                full += (letter * d + letter) * mult;
                mult *= d * d;
            }
            phi += level[full];
        }
        total += lambda.powi(2 * n as i32) * phi;
        n += 1;
    }
    total
}

/// `Σ_{2n > N} (λ L)^{2n} / (2n)!`, which dominates the neglected part of
/// [`height_series`] for a path of Euclidean length `L`.
pub fn height_series_tail_bound(length_l2: f64, lambda: f64, depth: usize) -> f64 {
    let x = lambda * length_l2;
    let mut m = depth + 1;
    if m % 2 == 1 {
        m += 1;
    }
    // log of the first neglected term
    let mut log_term = m as f64 * x.ln() - crate::tensor::factorial_log(m as f64);
    let mut total = 0.0;
    for _ in 0..10_000 {
        let term = log_term.exp();
        total += term;
        if term <= 1e-18 * total {
            break;
        }
        log_term += 2.0 * x.ln() - ((m + 1) as f64).ln() - ((m + 2) as f64).ln();
        m += 2;
    }
    total
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleDefect {
    pub b: f64,
    pub c: f64,
    pub theta: f64,
    /// Side opposite `θ`.
    pub a: f64,
    /// `b + c - a`.
    pub defect: f64,
    /// `log(2 / (1 - cos θ))`.
    pub bound: f64,
    /// `λ (b + c) - a(λ)` non-decreasing over the λ grid.
    pub monotone: bool,
    pub within_bound: bool,
}

/// Side opposite `θ` in a hyperbolic triangle with sides `b`, `c`, from
/// `cosh a = cosh(b - c) + sinh b sinh c (1 - cos θ)` (the first cosine law
/// regrouped to avoid cancellation), evaluated in log form for large sides.
pub fn opposite_side(b: f64, c: f64, theta: f64) -> f64 {
    let one_minus_cos = 2.0 * (0.5 * theta).sin().powi(2);
    if b + c < 600.0 {
        let x = 2.0 * (0.5 * (b - c)).sinh().powi(2) + b.sinh() * c.sinh() * one_minus_cos;
        if x > 1e8 {
            acosh_stable(1.0 + x)
        } else {
            (x + (x * (x + 2.0)).sqrt()).ln_1p()
        }
    } else {
        // 4 cosh a = e^{b+c}(1-cos θ) + (e^{b-c} + e^{c-b})(1+cos θ) + e^{-b-c}(1-cos θ)
        let one_plus_cos = 2.0 - one_minus_cos;
        let terms = [
            b + c + one_minus_cos.ln(),
            b - c + one_plus_cos.ln(),
            c - b + one_plus_cos.ln(),
        ];
        let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_cosh = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln() - 4f64.ln();
        distance_from_log_height(log_cosh)
    }
}

/// λ grid used for the monotonicity check: `2^{-6}` to `2^{6}`.
pub fn defect_lambda_grid() -> Vec<f64> {
    (-24..=24).map(|i| 2f64.powf(i as f64 / 4.0)).collect()
}

pub fn triangle_defect_check(b: f64, c: f64, theta: f64) -> Result<TriangleDefect> {
    if !(b > 0.0 && c > 0.0) || !(theta > 0.0 && theta < std::f64::consts::PI) {
        return Err(Error::InvalidArgument(format!(
            "need b, c > 0 and θ in (0, π); got b={b}, c={c}, θ={theta}"
        )));
    }
    let a = opposite_side(b, c, theta);
    let defect = b + c - a;
    let bound = (2.0 / (1.0 - theta.cos())).ln();
    let mut monotone = true;
    let mut prev = f64::NEG_INFINITY;
    for lam in defect_lambda_grid() {
        let f = lam * (b + c) - opposite_side(lam * b, lam * c, theta);
        // rounding slack proportional to the side lengths
        if f < prev - 1e-12 * lam * (b + c) {
            monotone = false;
        }
        prev = prev.max(f);
    }
    let slack = 1e-9;
    Ok(TriangleDefect {
        b,
        c,
        theta,
        a,
        defect,
        bound,
        monotone,
        within_bound: defect >= -slack && defect <= bound + slack,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightDecayRow {
    pub d: usize,
    pub mu: f64,
    pub lambda: f64,
    pub t: f64,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
    /// `exp(-λ^2 μ (d - 1 - μ) t / 2)`.
    pub bound: f64,
    pub pass: bool,
}

impl HeightDecayRow {
    pub const CSV_HEADER: &'static str = "d,mu,lambda,t,M,mean_hinvmu,stderr,bound,pass";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:?},{:?},{:?},{},{:?},{:?},{:?},{}",
            self.d, self.mu, self.lambda, self.t, self.trials, self.mean, self.stderr, self.bound, self.pass
        )
    }
}

pub fn height_decay_bound(d: usize, mu: f64, lambda: f64, t: f64) -> f64 {
    (-lambda * lambda * mu * (d as f64 - 1.0 - mu) * t / 2.0).exp()
}

/// Log-heights `log h_t^λ` for `trials` independent Brownian samples (trial
/// `i` is stream `i` under `seed`), each auto-refined from depth `k`.
pub fn brownian_log_heights(d: usize, t: f64, lambda: f64, k: u32, trials: usize, seed: u64) -> Result<Vec<f64>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|i| develop_brownian_height(d, t, lambda, k, seed, i).map(|h| h.log_height))
        .collect()
}

/// Empirical `E[h^{-μ}]` against `exp(-λ^2 μ (d-1-μ) t / 2)` for every `μ`,
/// sharing one set of developments.
pub fn height_decay_experiment(
    d: usize,
    mus: &[f64],
    lambda: f64,
    t: f64,
    trials: usize,
    k: u32,
    seed: u64,
) -> Result<Vec<HeightDecayRow>> {
    let logs = brownian_log_heights(d, t, lambda, k, trials, seed)?;
    Ok(mus
        .iter()
        .map(|&mu| {
            let xs: Vec<f64> = logs.iter().map(|l| (-mu * l).exp()).collect();
            let mean = stats::mean(&xs);
            let stderr = stats::stderr(&xs).unwrap_or(f64::NAN);
            let bound = height_decay_bound(d, mu, lambda, t);
            HeightDecayRow {
                d,
                mu,
                lambda,
                t,
                trials,
                mean,
                stderr,
                bound,
                pass: mean <= bound + 3.0 * stderr.max(0.0),
            }
        })
        .collect())
}

/// Draws a uniformly random chord direction of Euclidean length `len`.
pub fn random_chord(rng: &mut crate::rng::StreamRng, d: usize, len: f64) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            v.iter_mut().for_each(|x| *x *= len / norm);
            return v;
        }
    }
}

/// A random-walk path of `chords` steps with lengths uniform in `(0, max_len]`.
pub fn random_walk(seed: u64, d: usize, chords: usize, max_len: f64) -> PiecewiseLinearPath {
    use rand::Rng;
    let mut rng = stream(seed, 0);
    let incs: Vec<Vec<f64>> = (0..chords)
        .map(|_| {
            let len = max_len * (1.0 - rng.random::<f64>());
            random_chord(&mut rng, d, len)
        })
        .collect();
    PiecewiseLinearPath::from_increments(&incs).expect("finite increments")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::full_signature;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn chord_exp_of_unit_vector() {
        let f = chord_exp(&[1.0, 0.0]);
        let x = f.base_point();
        assert_relative_eq!(x[0], 1f64.sinh(), max_relative = 1e-15);
        assert_eq!(x[1], 0.0);
        assert_relative_eq!(x[2], 1f64.cosh(), max_relative = 1e-15);
        let p = HyperbolicPoint::new(x).unwrap();
        let rho = hyperbolic_distance(&p, &HyperbolicPoint::origin(2)).unwrap();
        assert_relative_eq!(rho, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn chord_exp_zero_and_inverse() {
        assert_eq!(chord_exp(&[0.0, 0.0, 0.0]), LorentzFrame::identity(3));
        let x = [0.3, -0.7, 1.1];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let prod = chord_exp(&x).mul(&chord_exp(&neg));
        let id = LorentzFrame::identity(3);
        let diff = prod
            .entries()
            .iter()
            .zip(id.entries())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12, "{diff}");
        assert!(chord_exp(&x).lorentz_defect_abs() < 1e-12);
    }

    #[test]
    fn chord_exp_matches_power_series() {
        let x = [0.4, -0.2];
        let n = 3;
        let mut f = vec![0.0; 9];
        for i in 0..2 {
            f[i * n + 2] = x[i];
            f[2 * n + i] = x[i];
        }
        let fm = LorentzFrame::from_rows(2, f).unwrap();
        let mut term = LorentzFrame::identity(2);
        let mut sum = term.entries().to_vec();
        for k in 1..30 {
            term = term.mul(&fm);
            let scale = 1.0 / (1..=k).map(f64::from).product::<f64>();
            for (s, t) in sum.iter_mut().zip(term.entries()) {
                *s += t * scale;
            }
        }
        for (a, b) in chord_exp(&x).entries().iter().zip(&sum) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn single_chord_distance_is_scaled_length() {
        let v = [0.3, 0.4, -1.2];
        for lambda in [0.5, 1.0, 3.0] {
            let tr = develop(&PiecewiseLinearPath::line(&v), lambda).unwrap();
            let len = 1.3;
            assert_relative_eq!(*tr.distances.last().unwrap(), lambda * len, max_relative = 1e-12);
        }
    }

    #[test]
    fn two_chord_defect_within_bound() {
        // chords of lengths 1.5 and 0.8 meeting at turning angle φ; the
        // triangle angle at the middle vertex is θ = π - φ
        for phi in [0.3, 1.0, PI / 2.0, 2.5] {
            let v1 = vec![1.5, 0.0];
            let v2 = vec![0.8 * f64::cos(phi), 0.8 * f64::sin(phi)];
            let path = PiecewiseLinearPath::from_increments(&[v1, v2]).unwrap();
            let theta = PI - phi;
            for lambda in [1.0, 2.0, 4.0, 8.0] {
                let tr = develop(&path, lambda).unwrap();
                let defect = lambda * 2.3 - tr.distances.last().unwrap();
                let bound = (2.0 / (1.0 - theta.cos())).ln();
                assert!(defect >= -1e-9 && defect <= bound + 1e-9, "φ={phi} λ={lambda}");
                let expected = opposite_side(lambda * 1.5, lambda * 0.8, theta);
                assert_relative_eq!(*tr.distances.last().unwrap(), expected, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn distance_properties() {
        let o = HyperbolicPoint::origin(2);
        assert_eq!(hyperbolic_distance(&o, &o).unwrap(), 0.0);
        let x = HyperbolicPoint::new(chord_exp(&[0.3, 0.9]).base_point()).unwrap();
        let y = HyperbolicPoint::new(chord_exp(&[-1.2, 0.1]).base_point()).unwrap();
        assert_eq!(
            hyperbolic_distance(&x, &y).unwrap(),
            hyperbolic_distance(&y, &x).unwrap()
        );
        assert!(HyperbolicPoint::new(vec![0.0, 0.0, 0.5]).is_err());
        let bad = HyperbolicPoint { coords: vec![0.0, 0.0, 0.5] };
        assert!(matches!(hyperbolic_distance(&bad, &o), Err(Error::OffHyperboloid(_))));
    }

    #[test]
    fn fact_one_length_preservation() {
        let path = random_walk(4, 3, 200, 0.2);
        let lambda = 1.7;
        let tr = develop(&path, lambda).unwrap();
        assert_relative_eq!(tr.trace_length().unwrap(), lambda * path.length_l2(), max_relative = 1e-9);
        for (h, rho) in tr.heights.iter().zip(&tr.distances) {
            assert_relative_eq!(rho.cosh(), *h, max_relative = 1e-12);
        }
    }

    #[test]
    fn long_development_keeps_invariant() {
        let path = random_walk(8, 2, 10_000, 0.05);
        let tr = develop_with_frames(&path, 1.0).unwrap();
        assert!(tr.max_defect <= 1e-9, "{}", tr.max_defect);
        assert!(tr.frames.unwrap().iter().all(|f| f.height() > 0.0));
    }

    #[test]
    fn terminal_height_matches_frame_development() {
        let path = random_walk(2, 3, 500, 0.1);
        for lambda in [0.5, 2.0] {
            let tr = develop(&path, lambda).unwrap();
            let lh = terminal_log_height(path.chords(), 3, lambda).unwrap();
            assert_relative_eq!(lh, *tr.log_heights.last().unwrap(), max_relative = 1e-9);
        }
    }

    #[test]
    fn terminal_height_survives_overflow() {
        // a straight line of length 2000 develops to distance 2000 exactly
        let chords = vec![vec![0.1, 0.0]; 20_000];
        let lh = terminal_log_height(chords, 2, 1.0).unwrap();
        assert_relative_eq!(distance_from_log_height(lh), 2000.0, max_relative = 1e-9);
    }

    #[test]
    fn small_lambda_second_order_expansion() {
        let path = random_walk(6, 2, 50, 0.3);
        let lambda = 1e-3;
        let h = develop(&path, lambda).unwrap().heights.last().copied().unwrap();
        let end = path.points().last().unwrap();
        // h = 1 + λ^2 |γ_1 - γ_0|^2 / 2 + O(λ^4)
        let sq: f64 = end.iter().map(|x| x * x).sum();
        assert!((h - 1.0 - 0.5 * lambda * lambda * sq).abs() < 1e-10);
    }

    #[test]
    fn height_series_agrees_with_development() {
        let path = random_walk(12, 2, 10, 0.4);
        let depth = 14;
        let rec = full_signature(&path, depth);
        for lambda in [0.1, 0.25, 0.5] {
            let h = develop(&path, lambda).unwrap().heights.last().copied().unwrap();
            let series = height_series(&rec, lambda);
            let tail = height_series_tail_bound(path.length_l2(), lambda, depth);
            assert!((h - series).abs() <= tail + 1e-13, "λ={lambda}: {h} vs {series} (tail {tail})");
        }
    }

    #[test]
    fn tail_bound_is_cosh_remainder() {
        let (x, depth) = (1.3f64, 6);
        let partial: f64 = (0..=3).map(|n| x.powi(2 * n) / (1..=2 * n as i32).map(f64::from).product::<f64>()).sum();
        assert_relative_eq!(height_series_tail_bound(x, 1.0, depth), x.cosh() - partial, max_relative = 1e-10);
    }

    #[test]
    fn triangle_examples() {
        let r = triangle_defect_check(1.0, 2.0, PI / 2.0).unwrap();
        assert_relative_eq!(r.bound, 2f64.ln(), max_relative = 1e-15);
        let r = triangle_defect_check(5.0, 5.0, PI / 2.0).unwrap();
        let direct = 10.0 - (5f64.cosh().powi(2)).acosh();
        assert_relative_eq!(r.defect, direct, max_relative = 1e-9);
        assert!(r.defect > 0.0 && r.defect < 2f64.ln());
        assert!(r.monotone && r.within_bound);
        let r = triangle_defect_check(1.5, 2.5, PI - 1e-9).unwrap();
        assert!(r.defect.abs() < 1e-6 && r.bound < 1e-15);
        assert!(triangle_defect_check(1.0, 1.0, PI).is_err());
    }

    #[test]
    fn opposite_side_regimes_agree() {
        for theta in [0.2, 1.0, 2.0, 3.0] {
            let small = opposite_side(299.0, 300.9, theta);
            let one_minus_cos = 1.0 - f64::cos(theta);
            let asymptotic = 599.9 + (one_minus_cos / 2.0).ln();
            assert!((small - asymptotic).abs() < 1e-9);
            let large = opposite_side(400.0, 400.0, theta);
            assert!((large - (800.0 + (one_minus_cos / 2.0).ln())).abs() < 1e-9);
        }
    }

    #[test]
    fn reprojection_restores_invariant() {
        let mut f = chord_exp(&[0.3, 0.2]).mul(&chord_exp(&[-0.1, 0.5]));
        for x in f.m.iter_mut() {
            *x *= 1.0 + 1e-7;
        }
        assert!(f.lorentz_defect() > 1e-8);
        f.reproject();
        assert!(f.lorentz_defect() < 1e-14);
        assert!(f.height() > 0.0);
    }

    #[test]
    fn ito_height_trivial_and_guard() {
        let hs = ito_height_path(2, 1.0, 1e-9, 16, 1, 0).unwrap();
        assert!(hs.iter().all(|h| (h - 1.0).abs() < 1e-12));
        assert!(ito_height_path(2, 1.0, 2.0, 10, 1, 0).is_err());
    }

    #[test]
    fn ito_quadratic_variation() {
        let d = 3;
        let lambda = 1.0;
        let steps = 1 << 14;
        let hs = ito_height_path(d, 1.0, lambda, steps, 5, 0).unwrap();
        let dt = 1.0 / steps as f64;
        let qv: f64 = hs.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
        let predicted: f64 = hs[..steps].iter().map(|h| lambda * lambda * (h * h - 1.0) * dt).sum();
        assert!((qv / predicted - 1.0).abs() < 0.1, "{qv} vs {predicted}");
    }

    #[test]
    fn ito_and_stratonovich_heights_agree_pathwise() {
        let (d, lambda) = (3, 1.0);
        for stream_index in 0..4 {
            let strat = develop_brownian_height(d, 1.0, lambda, 18, 9, stream_index).unwrap();
            let ito = ito_height_sde(d, 1.0, lambda, 1 << 18, 9, stream_index).unwrap();
            assert!((strat.height() - ito).abs() / ito < 0.05, "{} vs {ito}", strat.height());
        }
    }

    #[test]
    fn refinement_enforces_chord_rule() {
        let h = develop_brownian_height(2, 1.0, 8.0, 6, 3, 0).unwrap();
        assert!(h.depth > 6);
        let s = BrownianSample::generate(2, 1.0, h.depth, 3, 0).unwrap();
        assert!(8.0 * s.path().max_chord_l2() <= MAX_SCALED_CHORD);
        assert!(h.log_height >= 0.0);
    }

    #[test]
    fn decay_bound_value() {
        assert_relative_eq!(height_decay_bound(3, 1.0, 2.0, 1.0), (-2f64).exp(), max_relative = 1e-15);
        assert!((height_decay_bound(3, 1.0, 2.0, 1.0) - 0.135335).abs() < 1e-6);
    }

    #[test]
    fn trace_csv() {
        let tr = develop(&PiecewiseLinearPath::line(&[1.0, 0.0]), 1.0).unwrap();
        let csv = tr.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,h,rho,loght"));
        assert_eq!(lines.next(), Some("0.0,1.0,0.0,0.0"));
    }
}
