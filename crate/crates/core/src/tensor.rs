//! Truncated free tensor series over `R^d`.
//!
//! Level `n` of a series is stored densely as `d^n` coefficients indexed by
//! words `(i_1, ..., i_n)` over the alphabet `{0, ..., d-1}` in lexicographic
//! order, first letter most significant. With that layout the tensor product
//! of a level-`n` array and a level-`k` array is a plain outer product:
//! `index(u ++ v) = index(u) * d^k + index(v)`.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for algebraic identities on unit-scale inputs.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Default truncation depth for a given dimension.
pub fn default_depth(d: usize) -> usize {
    match d {
        0..=2 => 14,
        3 => 10,
        _ => 8,
    }
}

#[inline]
pub fn level_len(d: usize, n: usize) -> usize {
    d.pow(n as u32)
}

/// Lexicographic index of a word (letters are 0-based).
pub fn word_index(d: usize, word: &[usize]) -> usize {
    word.iter().fold(0, |acc, &i| {
        debug_assert!(i < d);
        acc * d + i
    })
}

/// Inverse of [`word_index`].
pub fn index_word(d: usize, n: usize, mut idx: usize) -> Vec<usize> {
    let mut w = vec![0; n];
    for slot in w.iter_mut().rev() {
        *slot = idx % d;
        idx /= d;
    }
    w
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedTensorSeries {
    #[serde(rename = "d")]
    dim: usize,
    #[serde(rename = "N")]
    depth: usize,
    levels: Vec<Vec<f64>>,
}

impl TruncatedTensorSeries {
    pub fn zero(dim: usize, depth: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        let levels = (0..=depth).map(|n| vec![0.0; level_len(dim, n)]).collect();
        Self { dim, depth, levels }
    }

    /// The unit `(1, 0, 0, ...)`.
    pub fn unit(dim: usize, depth: usize) -> Self {
        let mut s = Self::zero(dim, depth);
        s.levels[0][0] = 1.0;
        s
    }

    pub fn from_levels(dim: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if levels.is_empty() {
            return Err(Error::InvalidArgument("series needs at least level 0".into()));
        }
        for (n, level) in levels.iter().enumerate() {
            let expected = level_len(dim, n);
            if level.len() != expected {
                return Err(Error::BadLevelLength {
                    level: n,
                    got: level.len(),
                    expected,
                });
            }
            if level.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(n));
            }
        }
        Ok(Self {
            dim,
            depth: levels.len() - 1,
            levels,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn level(&self, n: usize) -> &[f64] {
        &self.levels[n]
    }

    pub fn level_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.levels[n]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    /// Coefficient of a word (0-based letters); the empty word is level 0.
    pub fn coeff(&self, word: &[usize]) -> f64 {
        self.levels[word.len()][word_index(self.dim, word)]
    }

    pub fn set_coeff(&mut self, word: &[usize], value: f64) {
        let idx = word_index(self.dim, word);
        self.levels[word.len()][idx] = value;
    }

    /// Keeps levels `0..=depth`.
    pub fn truncate(&self, depth: usize) -> Self {
        assert!(depth <= self.depth);
        Self {
            dim: self.dim,
            depth,
            levels: self.levels[..=depth].to_vec(),
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        if self.depth != other.depth {
            return Err(Error::TruncationMismatch(self.depth, other.depth));
        }
        Ok(())
    }

    /// Truncated tensor product `self ⊗ other`.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let d = self.dim;
        let mut out = Self::zero(d, self.depth);
        for n in 0..=self.depth {
            let target = &mut out.levels[n];
            for k in 0..=n {
                let a = &self.levels[k];
                let b = &other.levels[n - k];
                let stride = b.len();
                for (ia, &x) in a.iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    let row = &mut target[ia * stride..(ia + 1) * stride];
                    for (t, &y) in row.iter_mut().zip(b) {
                        *t += x * y;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Exponential of a single increment: level `n` is `v^{⊗n} / n!`.
    pub fn segment_exp(v: &[f64], depth: usize) -> Self {
        let d = v.len();
        let mut s = Self::unit(d, depth);
        for n in 1..=depth {
            let prev = s.levels[n - 1].clone();
            let scale = 1.0 / n as f64;
            let level = &mut s.levels[n];
            for (ia, &x) in prev.iter().enumerate() {
                for (j, &vj) in v.iter().enumerate() {
                    level[ia * d + j] = x * vj * scale;
                }
            }
        }
        s
    }

    /// In-place right multiplication by `segment_exp(v)`, evaluated level by
    /// level in Horner form:
    /// `S'_n = ((S_0 v/n + S_1) v/(n-1) + ... + S_{n-1}) v/1 + S_n`.
    ///
    /// Levels are rewritten from the top down so every level reads the old
    /// values of the lower ones.
    pub fn mul_segment_exp(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.dim);
        let d = self.dim;
        let mut acc: Vec<f64> = Vec::with_capacity(level_len(d, self.depth));
        let mut next: Vec<f64> = Vec::with_capacity(level_len(d, self.depth));
        for n in (1..=self.depth).rev() {
            acc.clear();
            acc.extend_from_slice(&self.levels[0]);
            for i in 1..=n {
                let scale = 1.0 / (n - i + 1) as f64;
                next.clear();
                next.resize(acc.len() * d, 0.0);
                let lower = &self.levels[i];
                for (ia, &x) in acc.iter().enumerate() {
                    let xs = x * scale;
                    let base = ia * d;
                    for (j, &vj) in v.iter().enumerate() {
                        next[base + j] = xs * vj;
                    }
                }
                for (t, &l) in next.iter_mut().zip(lower) {
                    *t += l;
                }
                std::mem::swap(&mut acc, &mut next);
            }
            self.levels[n].copy_from_slice(&acc);
        }
    }

    /// In-place right multiplication by `(1, v, 0, 0, ...)`; one Euler step of
    /// the Itô iterated-integral hierarchy.
    pub fn mul_increment(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.dim);
        let d = self.dim;
        for n in (1..=self.depth).rev() {
            let (lo, hi) = self.levels.split_at_mut(n);
            let prev = &lo[n - 1];
            let level = &mut hi[0];
            for (ia, &x) in prev.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let base = ia * d;
                for (j, &vj) in v.iter().enumerate() {
                    level[base + j] += x * vj;
                }
            }
        }
    }

    pub fn scale_levels(&mut self, factor: f64) {
        let mut f = 1.0;
        for level in self.levels.iter_mut() {
            for x in level.iter_mut() {
                *x *= f;
            }
            f *= factor;
        }
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .levels
            .iter()
            .zip(&other.levels)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max))
    }

    pub fn all_finite(&self) -> bool {
        self.levels.iter().flatten().all(|x| x.is_finite())
    }

    /// Whitespace text form: a header line `d N`, then one line per level.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.dim, self.depth);
        for level in &self.levels {
            let mut first = true;
            for x in level {
                if !first {
                    out.push(' ');
                }
                first = false;
                write!(out, "{x:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty input".into()))?;
        let mut it = header.split_whitespace();
        let parse_usize = |s: Option<&str>, what: &str| -> Result<usize> {
            s.ok_or_else(|| Error::Parse(format!("missing {what}")))?
                .parse()
                .map_err(|e| Error::Parse(format!("bad {what}: {e}")))
        };
        let d = parse_usize(it.next(), "dimension")?;
        let depth = parse_usize(it.next(), "truncation")?;
        let mut levels = Vec::with_capacity(depth + 1);
        for n in 0..=depth {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing level {n}")))?;
            let level = line
                .split_whitespace()
                .map(f64::from_str)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("level {n}: {e}")))?;
            levels.push(level);
        }
        Self::from_levels(d, levels)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let raw: Self = serde_json::from_str(json)?;
        if raw.levels.len() != raw.depth + 1 {
            return Err(Error::Parse(format!(
                "declared N = {} but {} levels present",
                raw.depth,
                raw.levels.len()
            )));
        }
        Self::from_levels(raw.dim, raw.levels)
    }
}

/// Outer product of a level-`n` array and a level-`k` array.
pub fn tensor_levels(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        out.extend(b.iter().map(|&y| x * y));
    }
    out
}

/// Infers `n` from a level array of length `d^n`. For `d = 1` every level
/// has length one and `n` cannot be recovered; `Ok(0)` is returned.
pub fn level_of(d: usize, len: usize) -> Result<usize> {
    if d == 1 {
        return if len == 1 {
            Ok(0)
        } else {
            Err(Error::InvalidArgument(format!("array length {len} with d = 1")))
        };
    }
    let mut n = 0;
    let mut size = 1;
    while size < len {
        size *= d;
        n += 1;
    }
    if size != len {
        return Err(Error::InvalidArgument(format!(
            "array length {len} is not a power of {d}"
        )));
    }
    Ok(n)
}

fn check_level(d: usize, n: usize, a: &[f64]) -> Result<()> {
    let expected = level_len(d, n);
    if a.len() != expected {
        return Err(Error::BadLevelLength {
            level: n,
            got: a.len(),
            expected,
        });
    }
    Ok(())
}

/// All position sets of the first factor in an `(n, k)`-shuffle, as sorted
/// position lists of length `n` drawn from `0..n+k`.
pub fn shuffle_positions(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for p in start..=(m - left) {
            cur.push(p);
            rec(p + 1, m, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n + k, n, &mut Vec::with_capacity(n), &mut out);
    out
}

/// For one shuffle, the offset each first-factor word and each second-factor
/// word contributes to the merged word index.
fn shuffle_offsets(d: usize, n: usize, k: usize, a_positions: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let m = n + k;
    let weight = |pos: usize| d.pow((m - 1 - pos) as u32);
    let mut is_a = vec![false; m];
    for &p in a_positions {
        is_a[p] = true;
    }
    let b_positions: Vec<usize> = (0..m).filter(|&p| !is_a[p]).collect();
    let offsets = |positions: &[usize]| -> Vec<usize> {
        let len = level_len(d, positions.len());
        (0..len)
            .map(|idx| {
                let word = index_word(d, positions.len(), idx);
                word.iter()
                    .zip(positions)
                    .map(|(&letter, &pos)| letter * weight(pos))
                    .sum()
            })
            .collect()
    };
    (offsets(a_positions), offsets(&b_positions))
}

/// Shuffle product of a level-`n` array with a level-`k` array.
pub fn shuffle_product(d: usize, a: &[f64], n: usize, b: &[f64], k: usize) -> Result<Vec<f64>> {
    check_level(d, n, a)?;
    check_level(d, k, b)?;
    let mut out = vec![0.0; level_len(d, n + k)];
    for positions in shuffle_positions(n, k) {
        let (a_off, b_off) = shuffle_offsets(d, n, k, &positions);
        for (ia, &x) in a.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (ib, &y) in b.iter().enumerate() {
                out[a_off[ia] + b_off[ib]] += x * y;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    image: Vec<usize>,
}

impl Permutation {
    /// `image[k]` is the (0-based) image of position `k`.
    pub fn new(image: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; image.len()];
        for &i in &image {
            if i >= image.len() || seen[i] {
                return Err(Error::InvalidPermutation(image));
            }
            seen[i] = true;
        }
        Ok(Self { image })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            image: (0..n).collect(),
        }
    }

    /// The full reversal `k -> n-1-k`.
    pub fn reversal(n: usize) -> Self {
        Self {
            image: (0..n).rev().collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.image.len()
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.image.len()];
        for (k, &i) in self.image.iter().enumerate() {
            inv[i] = k;
        }
        Self { image: inv }
    }

    /// Applies the operator induced by `a_1 ⊗ ... ⊗ a_n -> a_σ(1) ⊗ ... ⊗ a_σ(n)`.
    pub fn apply(&self, d: usize, a: &[f64]) -> Result<Vec<f64>> {
        let n = self.arity();
        if a.len() != level_len(d, n) {
            return Err(Error::ArityMismatch {
                perm: n,
                level: level_of(d, a.len()).unwrap_or(usize::MAX),
            });
        }
        let mut out = vec![0.0; a.len()];
        let mut word = vec![0usize; n];
        for (idx, &x) in a.iter().enumerate() {
            // the output word at slot j carries the input letter at slot σ(j)
            let mut rest = idx;
            for slot in word.iter_mut().rev() {
                *slot = rest % d;
                rest /= d;
            }
            let target = self.image.iter().fold(0, |acc, &src| acc * d + word[src]);
            out[target] = x;
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShuffleViolation {
    pub n: usize,
    pub k: usize,
    /// Concatenated word `u ++ v` with `|u| = n`, `|v| = k`.
    pub word: Vec<usize>,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupLikeReport {
    pub group_like: bool,
    pub worst: Option<ShuffleViolation>,
}

/// Checks `g[u] g[v] = Σ_{w ∈ u ⧢ v} g[w]` for every pair of non-empty words
/// with `|u| + |v| <= N`.
pub fn is_group_like(g: &TruncatedTensorSeries, tol: f64) -> GroupLikeReport {
    is_group_like_up_to(g, g.depth(), tol)
}

/// Same as [`is_group_like`] but only tests pairs with `|u| + |v| <= max_total`.
pub fn is_group_like_up_to(g: &TruncatedTensorSeries, max_total: usize, tol: f64) -> GroupLikeReport {
    let d = g.dim();
    let max_total = max_total.min(g.depth());
    let mut worst: Option<ShuffleViolation> = None;
    if (g.level(0)[0] - 1.0).abs() > tol {
        return GroupLikeReport {
            group_like: false,
            worst: Some(ShuffleViolation {
                n: 0,
                k: 0,
                word: vec![],
                deviation: (g.level(0)[0] - 1.0).abs(),
            }),
        };
    }
    for m in 2..=max_total {
        let full = g.level(m);
        for n in 1..m {
            let k = m - n;
            let lhs = tensor_levels(g.level(n), g.level(k));
            let mut rhs = vec![0.0; lhs.len()];
            let kl = level_len(d, k);
            for positions in shuffle_positions(n, k) {
                let (a_off, b_off) = shuffle_offsets(d, n, k, &positions);
                for (ia, &ao) in a_off.iter().enumerate() {
                    let row = &mut rhs[ia * kl..(ia + 1) * kl];
                    for (r, &bo) in row.iter_mut().zip(&b_off) {
                        *r += full[ao + bo];
                    }
                }
            }
            for (idx, (l, r)) in lhs.iter().zip(&rhs).enumerate() {
                let dev = (l - r).abs();
                if worst.as_ref().is_none_or(|w| dev > w.deviation) {
                    worst = Some(ShuffleViolation {
                        n,
                        k,
                        word: index_word(d, m, idx),
                        deviation: dev,
                    });
                }
            }
        }
    }
    GroupLikeReport {
        group_like: worst.as_ref().is_none_or(|w| w.deviation <= tol),
        worst,
    }
}

/// Tensor norms on a single level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    /// Projective norm over the l¹ base norm, which is the coordinate l¹ norm.
    L1Proj,
    /// Coordinate Euclidean norm.
    L2Coord,
    /// Coordinate l¹ norm read as an upper bound for the l²-projective norm.
    L1OfCoordsUpper,
    /// Lower bound for the l²-projective norm: the best value of
    /// `|Φ(a)|`, `Φ(v_1..v_n) = Π <u_j, v_j>` with unit `u_j`, over `samples`
    /// random draws followed by alternating maximization from the best draw.
    SampledDualLower { samples: u32, seed: u64 },
}

impl NormKind {
    pub fn sampled(samples: u32) -> Self {
        NormKind::SampledDualLower {
            samples,
            seed: 0x5eed_d0a1,
        }
    }

    pub fn tag(&self) -> String {
        match self {
            NormKind::L1Proj => "L1_PROJ".into(),
            NormKind::L2Coord => "L2_COORD".into(),
            NormKind::L1OfCoordsUpper => "L1_OF_COORDS_UPPER".into(),
            NormKind::SampledDualLower { samples, .. } => format!("SAMPLED_DUAL_LOWER({samples})"),
        }
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        match upper.as_str() {
            "L1_PROJ" | "L1" => Ok(NormKind::L1Proj),
            "L2_COORD" | "L2" => Ok(NormKind::L2Coord),
            "L1_OF_COORDS_UPPER" => Ok(NormKind::L1OfCoordsUpper),
            _ => {
                if let Some(rest) = upper
                    .strip_prefix("SAMPLED_DUAL_LOWER(")
                    .and_then(|r| r.strip_suffix(')'))
                {
                    let m = rest
                        .parse()
                        .map_err(|e| Error::Parse(format!("sample count: {e}")))?;
                    Ok(NormKind::sampled(m))
                } else {
                    Err(Error::Parse(format!("unknown norm kind {s:?}")))
                }
            }
        }
    }
}

/// Norm of a single level array (`d^n` coefficients).
pub fn level_norm(d: usize, a: &[f64], kind: NormKind) -> f64 {
    match kind {
        NormKind::L1Proj | NormKind::L1OfCoordsUpper => a.iter().map(|x| x.abs()).sum(),
        NormKind::L2Coord => a.iter().map(|x| x * x).sum::<f64>().sqrt(),
        NormKind::SampledDualLower { samples, seed } => sampled_dual_lower(d, a, samples, seed),
    }
}

/// `Φ(a)` for rank-one functional `u_1 ⊗ ... ⊗ u_n`.
fn contract_all(d: usize, a: &[f64], us: &[Vec<f64>]) -> f64 {
    let mut cur = a.to_vec();
    for u in us.iter().rev() {
        cur = cur
            .chunks_exact(d)
            .map(|c| c.iter().zip(u).map(|(x, y)| x * y).sum())
            .collect();
    }
    cur[0]
}

/// Gradient of `Φ` with respect to `u_slot`.
fn contract_except(d: usize, a: &[f64], us: &[Vec<f64>], slot: usize) -> Vec<f64> {
    let n = us.len();
    let mut grad = vec![0.0; d];
    for (idx, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let mut rest = idx;
        let mut prod = x;
        let mut letter_at_slot = 0;
        for j in (0..n).rev() {
            let letter = rest % d;
            rest /= d;
            if j == slot {
                letter_at_slot = letter;
            } else {
                prod *= us[j][letter];
            }
        }
        grad[letter_at_slot] += prod;
    }
    grad
}

fn unit_vector(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

fn sampled_dual_lower(d: usize, a: &[f64], samples: u32, seed: u64) -> f64 {
    // for d = 1 the value does not depend on n
    let Ok(n) = level_of(d, a.len()).map(|n| if d == 1 { 1 } else { n }) else {
        return f64::NAN;
    };
    if n == 0 {
        return a[0].abs();
    }
    if a.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0;
    let mut best_us: Vec<Vec<f64>> = Vec::new();
    for _ in 0..samples.max(1) {
        let us: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut u: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                if !unit_vector(&mut u) {
                    u = vec![0.0; d];
                    u[0] = 1.0;
                }
                u
            })
            .collect();
        let val = contract_all(d, a, &us).abs();
        if val > best || best_us.is_empty() {
            best = val;
            best_us = us;
        }
    }
    // alternating maximization; each step is a valid functional so the bound stays valid
    let mut us = best_us;
    for _ in 0..25 {
        for slot in 0..n {
            let mut g = contract_except(d, a, &us, slot);
            if unit_vector(&mut g) {
                us[slot] = g;
            }
        }
        best = f64::max(best, contract_all(d, a, &us).abs());
    }
    best
}

/// `log Γ(n/p + 1)`, the logarithm of the fractional factorial `(n/p)!`.
pub fn half_factorial_log(n: usize, p: f64) -> f64 {
    assert!(p >= 1.0, "normalization exponent must be >= 1");
    statrs::function::gamma::ln_gamma(n as f64 / p + 1.0)
}

/// `log Γ(x + 1)` for real `x >= 0`.
pub fn factorial_log(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x + 1.0)
}
