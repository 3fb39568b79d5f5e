use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A path in `R^d` given by samples `(t_j, x_j)` and linear interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinearPath {
    dim: usize,
    times: Vec<f64>,
    points: Vec<Vec<f64>>,
}

impl PiecewiseLinearPath {
    pub fn new(times: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != points.len() {
            return Err(Error::InvalidPath(format!(
                "{} times but {} points",
                times.len(),
                points.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidPath("need at least two samples".into()));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidPath("zero-dimensional points".into()));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidPath("ragged points".into()));
        }
        if times.iter().chain(points.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidPath("non-finite sample".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPath("times must be strictly increasing".into()));
        }
        Ok(Self { dim, times, points })
    }

    /// The straight segment from the origin to `v` over `[0, 1]`.
    pub fn line(v: &[f64]) -> Self {
        Self::new(vec![0.0, 1.0], vec![vec![0.0; v.len()], v.to_vec()]).expect("valid line")
    }

    /// Concatenated chords `v_1, v_2, ...` starting at the origin, unit time each.
    pub fn from_increments(increments: &[Vec<f64>]) -> Result<Self> {
        let dim = increments.first().map_or(0, Vec::len);
        let mut points = vec![vec![0.0; dim]];
        for v in increments {
            let last = points.last().unwrap();
            points.push(last.iter().zip(v).map(|(a, b)| a + b).collect());
        }
        let times = (0..points.len()).map(|j| j as f64).collect();
        Self::new(times, points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn num_chords(&self) -> usize {
        self.times.len() - 1
    }

    pub fn chord(&self, j: usize) -> Vec<f64> {
        self.points[j + 1]
            .iter()
            .zip(&self.points[j])
            .map(|(b, a)| b - a)
            .collect()
    }

    pub fn chords(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.num_chords()).map(|j| self.chord(j))
    }

    /// Linear interpolation at `t` (clamped to the domain).
    pub fn point_at(&self, t: f64) -> Vec<f64> {
        let j = self.segment_index(t);
        let (t0, t1) = (self.times[j], self.times[j + 1]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        self.points[j]
            .iter()
            .zip(&self.points[j + 1])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    /// Index `j` of the chord `[t_j, t_{j+1}]` containing `t`.
    pub fn segment_index(&self, t: f64) -> usize {
        let m = self.num_chords();
        match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(j) => j.min(m - 1),
            Err(0) => 0,
            Err(j) => (j - 1).min(m - 1),
        }
    }

    /// Increments of the path restricted to `[s, t]`, with the end chords
    /// split at `s` and `t` by linear interpolation.
    pub fn chords_between(&self, s: f64, t: f64) -> Result<Vec<Vec<f64>>> {
        self.check_interval(s, t)?;
        let mut out = Vec::new();
        let mut prev = self.point_at(s);
        let first = self.segment_index(s);
        for j in first + 1..self.times.len() {
            if self.times[j] >= t {
                break;
            }
            if self.times[j] <= s {
                continue;
            }
            let p = &self.points[j];
            out.push(p.iter().zip(&prev).map(|(b, a)| b - a).collect());
            prev = p.clone();
        }
        let end = self.point_at(t);
        out.push(end.iter().zip(&prev).map(|(b, a)| b - a).collect());
        Ok(out)
    }

    pub fn check_interval(&self, s: f64, t: f64) -> Result<()> {
        if !(s < t) || s < self.start_time() || t > self.end_time() {
            return Err(Error::IntervalOutOfDomain {
                s,
                t,
                t0: self.start_time(),
                t1: self.end_time(),
            });
        }
        Ok(())
    }

    /// Length in the l¹ base norm.
    pub fn length_l1(&self) -> f64 {
        self.chords().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).sum()
    }

    /// Euclidean length.
    pub fn length_l2(&self) -> f64 {
        self.chords()
            .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
            .sum()
    }

    /// Largest Euclidean chord length.
    pub fn max_chord_l2(&self) -> f64 {
        self.chords()
            .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Spatial dilation `x -> c x`.
    pub fn dilate(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            times: self.times.clone(),
            points: self
                .points
                .iter()
                .map(|p| p.iter().map(|x| c * x).collect())
                .collect(),
        }
    }

    /// The same trace run on new sample times `new_time(t_j)`; `new_time`
    /// must be strictly increasing.
    pub fn retime(&self, new_time: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.times.iter().map(|&t| new_time(t)).collect(),
            self.points.clone(),
        )
    }

    /// CSV with header `t,x1,...,xd`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for i in 1..=self.dim {
            write!(out, ",x{i}").unwrap();
        }
        out.push('\n');
        for (t, p) in self.times.iter().zip(&self.points) {
            write!(out, "{t:?}").unwrap();
            for x in p {
                write!(out, ",{x:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty CSV".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"t") || cols.len() < 2 {
            return Err(Error::Parse(format!("bad header {header:?}")));
        }
        for (i, c) in cols.iter().enumerate().skip(1) {
            if *c != format!("x{i}") {
                return Err(Error::Parse(format!("bad column {c:?}")));
            }
        }
        let mut times = Vec::new();
        let mut points = Vec::new();
        for (row, line) in lines.enumerate() {
            let vals = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", row + 1)))?;
            if vals.len() != cols.len() {
                return Err(Error::Parse(format!("row {} has {} fields", row + 1, vals.len())));
            }
            times.push(vals[0]);
            points.push(vals[1..].to_vec());
        }
        Self::new(times, points)
    }
}
