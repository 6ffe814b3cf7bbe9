//! Angle samples of Jacobi sums, discrepancy, the Erdős–Turán–Koksma bound
//! and the scaling experiments run over sweeps of primes.
//!
//! Angles are normalized to `[0, 1)` via `arg(z)/(2π) mod 1` with `arg` in
//! `]-π, π]`, so an interval `I` of angles becomes an arc of length
//! `|I|/(2π)`. In dimension one the star discrepancy is exact; in higher
//! dimension a grid of anchored boxes gives a lower estimate which the ETK
//! bound brackets from above.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charsums::{gauss_table, jacobi_unchecked, GaussMethod, GaussTable};
use crate::error::{Error, Result};
use crate::field::{build_field, CharIndex, FieldCtx};
use crate::moments::random_char_set;
use crate::util::rng;

/// Hard cap on any ETK cutoff.
pub const MAX_CUTOFF: u64 = 10_000;
pub const DEFAULT_GRID: usize = 64;
const MAX_GRID_CELLS: usize = 1 << 24;

/// `arg(z)/(2π) mod 1`, landing in `[0, 1)`.
pub fn angle_of(z: Complex64) -> f64 {
    let t = z.im.atan2(z.re) / std::f64::consts::TAU;
    let u = t.rem_euclid(1.0);
    // rem_euclid of a tiny negative rounds up to exactly 1.0
    if u >= 1.0 {
        0.0
    } else {
        u
    }
}

/// Where a sample came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SampleSource {
    FixedEta { q: u64, eta: u32 },
    Joint { q: u64, etas: Vec<u32> },
    Bilinear { q: u64, x_size: usize, y_size: usize, s: u32 },
    Custom { label: String },
}

/// A one-dimensional sample of normalized angles.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AngleSample {
    pub points: Vec<f64>,
    pub source: SampleSource,
}

pub fn normalize_angles(values: &[Complex64], source: SampleSource) -> Result<AngleSample> {
    let points = values
        .iter()
        .enumerate()
        .map(|(i, z)| {
            if *z == Complex64::new(0.0, 0.0) {
                Err(Error::ZeroValue(i))
            } else {
                Ok(angle_of(*z))
            }
        })
        .collect::<Result<_>>()?;
    Ok(AngleSample { points, source })
}

/// Points in `[0,1)^dim`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::RaggedSample);
        }
        Ok(Self { dim, coords })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(1, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::RaggedSample);
        }
        Self::new(dim, rows.concat())
    }

    pub fn one_dim(points: &[f64]) -> Self {
        Self {
            dim: 1,
            coords: points.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
}

fn sorted(points: &[f64]) -> Vec<f64> {
    let mut xs = points.to_vec();
    xs.sort_by(f64::total_cmp);
    xs
}

/// Exact star discrepancy
/// `D*_N = 1/(2N) + max_i |x_(i) - (2i-1)/(2N)|` over the sorted points.
pub fn star_discrepancy(points: &[f64]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = points.len() as f64;
    let worst = sorted(points)
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - (2.0 * i as f64 + 1.0) / (2.0 * n)).abs())
        .fold(0.0, f64::max);
    Ok(1.0 / (2.0 * n) + worst)
}

/// Exact extreme (interval) discrepancy over all intervals in `[0, 1)`,
/// `D_N = 1/N + max_i (i/N - x_(i)) - min_i (i/N - x_(i))`. It equals the
/// discrepancy over arcs of the circle, hence is rotation invariant.
pub fn interval_discrepancy(points: &[f64]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = points.len() as f64;
    let (lo, hi) = sorted(points)
        .iter()
        .enumerate()
        .map(|(i, &x)| (i as f64 + 1.0) / n - x)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(d), hi.max(d))
        });
    Ok(1.0 / n + hi - lo)
}

/// Lower estimate of the box discrepancy in dimension ≥ 2: the maximum of
/// `|count/N - volume|` over anchored boxes `[0,a_1]×…×[0,a_s]` with every
/// `a_i ∈ {1/G, …, G/G}`.
pub fn box_discrepancy(sample: &PointSet, grid: usize) -> Result<f64> {
    let dim = sample.dim();
    if dim < 2 {
        return Err(Error::DimensionTooSmall(dim));
    }
    if grid < 2 {
        return Err(Error::GridTooSmall(grid));
    }
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let cells = grid
        .checked_pow(dim as u32)
        .filter(|&c| c <= MAX_GRID_CELLS)
        .ok_or(Error::GridTooLarge { grid, dim })?;

    // Cell k along an axis holds points with x ≤ k/G but not ≤ (k-1)/G;
    // index k-1 in 0..G. Zero is inside every box.
    let mut counts = vec![0u32; cells];
    for i in 0..sample.len() {
        let mut idx = 0usize;
        for &x in sample.point(i) {
            let k = ((x * grid as f64).ceil() as usize).clamp(1, grid);
            idx = idx * grid + (k - 1);
        }
        counts[idx] += 1;
    }
    // Prefix sums along each axis turn cell counts into box counts.
    let mut stride = 1usize;
    for _ in 0..dim {
        for idx in 0..cells {
            if !(idx / stride).is_multiple_of(grid) {
                counts[idx] += counts[idx - stride];
            }
        }
        stride *= grid;
    }

    let n = sample.len() as f64;
    let g = grid as f64;
    let mut worst = 0.0f64;
    for (idx, &c) in counts.iter().enumerate() {
        let mut rest = idx;
        let mut vol = 1.0;
        for _ in 0..dim {
            vol *= ((rest % grid) + 1) as f64 / g;
            rest /= grid;
        }
        worst = worst.max((f64::from(c) / n - vol).abs());
    }
    Ok(worst)
}

/// Nonzero `h ∈ [-H, H]^r` with first nonzero coordinate positive: one
/// representative per `±h` pair.
fn half_space_frequencies(dim: usize, cutoff: i64) -> Vec<Vec<i64>> {
    let side = (2 * cutoff + 1) as usize;
    let total = side.pow(dim as u32);
    (0..total)
        .filter_map(|mut code| {
            let mut h = vec![0i64; dim];
            for slot in h.iter_mut().rev() {
                *slot = (code % side) as i64 - cutoff;
                code /= side;
            }
            match h.iter().find(|&&c| c != 0) {
                Some(&c) if c > 0 => Some(h),
                _ => None,
            }
        })
        .collect()
}

/// `|(1/N) Σ_n e(⟨x_n, h⟩)|`.
pub fn weyl_sum(sample: &PointSet, h: &[i64]) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..sample.len() {
        let phase: f64 = sample
            .point(i)
            .iter()
            .zip(h)
            .map(|(&x, &k)| (x * k as f64).rem_euclid(1.0))
            .sum();
        let (s, c) = (std::f64::consts::TAU * phase).sin_cos();
        acc += Complex64::new(c, s);
    }
    acc.norm() / sample.len() as f64
}

/// Erdős–Turán–Koksma upper bound for the discrepancy,
/// `3^r (2/(H+1) + Σ_h |W_h| / β(h))`, `β(h) = max(1, max_j |h_j|)`.
///
/// The sum runs over nonzero `h ∈ [-H, H]^r` modulo `h ~ -h` (the two have
/// equal Weyl sums). In dimension one that is exactly `h = 1..H`.
pub fn etk_bound(sample: &PointSet, cutoff: u64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let cutoff = cutoff.clamp(1, MAX_CUTOFF);
    let freqs = half_space_frequencies(sample.dim(), cutoff as i64);
    let terms: Vec<f64> = freqs
        .par_iter()
        .map(|h| {
            let beta = h.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0).max(1);
            weyl_sum(sample, h) / beta as f64
        })
        .collect();
    let sum: f64 = terms.iter().sum();
    Ok(3f64.powi(sample.dim() as i32) * (2.0 / (cutoff as f64 + 1.0) + sum))
}

/// Summary of one discrepancy experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub q: u64,
    #[serde(rename = "N")]
    pub n: usize,
    /// Exact star discrepancy in dimension one; the anchored-box grid
    /// estimate in higher dimension.
    pub d_star: f64,
    /// `2·d_star`, bounding the sup over all intervals (dimension one).
    pub d_interval_bound: f64,
    pub etk_bound: f64,
    pub etk_cutoff: u64,
    /// Experiment-specific normalized size (see each experiment).
    pub scaled: f64,
    pub power: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_interval: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem_rhs: Option<f64>,
    pub source: SampleSource,
}

fn ceil_cutoff(h: f64) -> u64 {
    (h.ceil() as u64).clamp(1, MAX_CUTOFF)
}

/// Angles of `J(χ, η)` for `χ ∈ G(η)`; `d_star`, ETK with `H = ⌈q^{1/4}⌉`,
/// and `scaled = d_star·q^{1/4}`.
pub fn fixed_eta_experiment(
    ctx: &FieldCtx,
    table: &GaussTable,
    eta: CharIndex,
) -> Result<DiscrepancyReport> {
    ctx.char_index(eta.0.into())?;
    if eta.is_trivial() {
        return Err(Error::TrivialCharacter("fixed eta".into()));
    }
    let q = ctx.q();
    if q <= 3 {
        return Err(Error::HypothesisViolated(format!("q - 3 = {} <= 0", q as i64 - 3)));
    }
    let domain = ctx.char_domain(&[eta]);
    let values: Vec<Complex64> = domain
        .iter()
        .map(|chi| jacobi_unchecked(table, chi.0, eta.0))
        .collect();
    let sample = normalize_angles(&values, SampleSource::FixedEta { q, eta: eta.0 })?;
    let d_star = star_discrepancy(&sample.points)?;
    let cutoff = ceil_cutoff((q as f64).powf(0.25));
    let etk = etk_bound(&PointSet::one_dim(&sample.points), cutoff)?;
    Ok(DiscrepancyReport {
        q,
        n: sample.points.len(),
        d_star,
        d_interval_bound: 2.0 * d_star,
        etk_bound: etk,
        etk_cutoff: cutoff,
        scaled: d_star * (q as f64).powf(0.25),
        power: 0.25,
        d_interval: Some(interval_discrepancy(&sample.points)?),
        box_estimate: None,
        grid: None,
        theorem_rhs: None,
        source: sample.source,
    })
}

/// The s-dimensional sample `(arg J(χ, η_i))_i` for `χ ∈ G(η)`.
pub fn joint_sample(ctx: &FieldCtx, table: &GaussTable, etas: &[CharIndex]) -> Result<PointSet> {
    let s = etas.len();
    for (i, e) in etas.iter().enumerate() {
        ctx.char_index(e.0.into())?;
        if e.is_trivial() {
            return Err(Error::TrivialCharacter("joint eta".into()));
        }
        if etas[..i].contains(e) {
            return Err(Error::DuplicateEta(e.0));
        }
    }
    let q = ctx.q();
    if q as i64 - s as i64 - 2 <= 0 {
        return Err(Error::HypothesisViolated(format!("q - s - 2 <= 0 for q = {q}, s = {s}")));
    }
    let domain = ctx.char_domain(etas);
    let mut coords = Vec::with_capacity(domain.len() * s);
    for chi in &domain {
        for e in etas {
            coords.push(angle_of(jacobi_unchecked(table, chi.0, e.0)));
        }
    }
    PointSet::new(s, coords)
}

/// Joint angles for `s ≥ 2` distinct characters; box estimate on a `grid`,
/// ETK with `H = ⌈q^{1/(2(s+1))}⌉`, and `scaled = etk·q^{1/(2(s+1))}/3^s`.
pub fn joint_experiment(
    ctx: &FieldCtx,
    table: &GaussTable,
    etas: &[CharIndex],
    grid: usize,
) -> Result<DiscrepancyReport> {
    let s = etas.len();
    if s < 2 {
        return Err(Error::DimensionTooSmall(s));
    }
    let sample = joint_sample(ctx, table, etas)?;
    let q = ctx.q();
    let power = 1.0 / (2.0 * (s as f64 + 1.0));
    let cutoff = ceil_cutoff((q as f64).powf(power));
    let estimate = box_discrepancy(&sample, grid)?;
    let etk = etk_bound(&sample, cutoff)?;
    Ok(DiscrepancyReport {
        q,
        n: sample.len(),
        d_star: estimate,
        d_interval_bound: 2.0 * estimate,
        etk_bound: etk,
        etk_cutoff: cutoff,
        scaled: etk * (q as f64).powf(power) / 3f64.powi(s as i32),
        power,
        d_interval: None,
        box_estimate: Some(estimate),
        grid: Some(grid),
        theorem_rhs: None,
        source: SampleSource::Joint {
            q,
            etas: etas.iter().map(|e| e.0).collect(),
        },
    })
}

/// `s (√q/|X|)^{1/(2s+1)} + s |Y|^{-1/2} (q log q / |X|)^{1/(2s)}`, the
/// bilinear equidistribution error with implied constant 1.
pub fn bilinear_rhs(q: u64, size_x: usize, size_y: usize, s: u32) -> f64 {
    let (q, x, y, s) = (q as f64, size_x as f64, size_y as f64, f64::from(s));
    s * (q.sqrt() / x).powf(1.0 / (2.0 * s + 1.0))
        + s * y.powf(-0.5) * (q * q.ln() / x).powf(1.0 / (2.0 * s))
}

/// `H₂ = 2018 + (|X|/√q)^{1/(2s+1)}`, rounded up and capped.
pub fn bilinear_cutoff(q: u64, size_x: usize, s: u32, cap: u64) -> u64 {
    let h = 2018.0 + (size_x as f64 / (q as f64).sqrt()).powf(1.0 / (2.0 * f64::from(s) + 1.0));
    ceil_cutoff(h).min(cap.max(1))
}

/// Angles of `J(χ, η)` over `(χ, η) ∈ X × Y` with `χη ≠ 𝟏`. Requires
/// `|X| ≥ √q` and `|Y| ≥ 2`. `scaled = d_star / theorem_rhs`.
pub fn bilinear_experiment(
    ctx: &FieldCtx,
    table: &GaussTable,
    x: &[CharIndex],
    y: &[CharIndex],
    s: u32,
    cutoff_cap: u64,
) -> Result<DiscrepancyReport> {
    let mut x = x.to_vec();
    let mut y = y.to_vec();
    x.sort_unstable();
    x.dedup();
    y.sort_unstable();
    y.dedup();
    let q = ctx.q();
    if s == 0 {
        return Err(Error::HypothesisViolated("s must be >= 1".into()));
    }
    if (x.len() as f64) < (q as f64).sqrt() {
        return Err(Error::HypothesisViolated(format!(
            "|X| = {} < sqrt(q) = {:.3}",
            x.len(),
            (q as f64).sqrt()
        )));
    }
    if y.len() < 2 {
        return Err(Error::HypothesisViolated(format!("|Y| = {} < 2", y.len())));
    }
    for c in x.iter().chain(&y) {
        ctx.char_index(c.0.into())?;
        if c.is_trivial() {
            return Err(Error::TrivialCharacter("bilinear set".into()));
        }
    }
    let mut values = Vec::with_capacity(x.len() * y.len());
    for chi in &x {
        for eta in &y {
            if !ctx.char_mul(*chi, *eta).is_trivial() {
                values.push(jacobi_unchecked(table, chi.0, eta.0));
            }
        }
    }
    let sample = normalize_angles(
        &values,
        SampleSource::Bilinear {
            q,
            x_size: x.len(),
            y_size: y.len(),
            s,
        },
    )?;
    let d_star = star_discrepancy(&sample.points)?;
    let cutoff = bilinear_cutoff(q, x.len(), s, cutoff_cap);
    let etk = etk_bound(&PointSet::one_dim(&sample.points), cutoff)?;
    let rhs = bilinear_rhs(q, x.len(), y.len(), s);
    Ok(DiscrepancyReport {
        q,
        n: sample.points.len(),
        d_star,
        d_interval_bound: 2.0 * d_star,
        etk_bound: etk,
        etk_cutoff: cutoff,
        scaled: d_star / rhs,
        power: 1.0 / (4.0 * (2.0 * f64::from(s) + 1.0)),
        d_interval: Some(interval_discrepancy(&sample.points)?),
        box_estimate: None,
        grid: None,
        theorem_rhs: Some(rhs),
        source: sample.source,
    })
}

/// How the fixed character(s) are chosen per field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EtaChoice {
    Quadratic,
    Index(u32),
}

impl EtaChoice {
    pub fn resolve(self, ctx: &FieldCtx) -> Result<CharIndex> {
        match self {
            EtaChoice::Quadratic => ctx.quadratic_char().ok_or_else(|| {
                Error::HypothesisViolated("no quadratic character in characteristic 2".into())
            }),
            EtaChoice::Index(j) => ctx.char_index(j.into()),
        }
    }
}

impl FromStr for EtaChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "quadratic" {
            return Ok(EtaChoice::Quadratic);
        }
        s.strip_prefix('j')
            .and_then(|d| d.parse().ok())
            .map(EtaChoice::Index)
            .ok_or_else(|| format!("bad eta {s:?} (expected quadratic or jINDEX)"))
    }
}

impl fmt::Display for EtaChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EtaChoice::Quadratic => f.write_str("quadratic"),
            EtaChoice::Index(j) => write!(f, "j{j}"),
        }
    }
}

/// An experiment to run on every field of a scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Experiment {
    FixedEta { eta: EtaChoice },
    /// Uses `η, η·χ_1, …` i.e. indices `j0, j0+1, …` (skipping 0).
    Joint { eta: EtaChoice, s: usize, grid: usize },
    /// Random `X`, `Y` of sizes `⌈q^{3/4}⌉`, `⌈q^{1/4}⌉` drawn from `seed ^ q`.
    Bilinear { s: u32, seed: u64, cutoff_cap: u64 },
}

impl Experiment {
    /// Exponent `a` in the expected decay `d_star ≈ q^{-a}`.
    pub fn power(&self) -> f64 {
        match self {
            Experiment::FixedEta { .. } => 0.25,
            Experiment::Joint { s, .. } => 1.0 / (2.0 * (*s as f64 + 1.0)),
            Experiment::Bilinear { s, .. } => 1.0 / (4.0 * (2.0 * f64::from(*s) + 1.0)),
        }
    }

    pub fn run(&self, ctx: &FieldCtx, table: &GaussTable) -> Result<DiscrepancyReport> {
        match *self {
            Experiment::FixedEta { eta } => fixed_eta_experiment(ctx, table, eta.resolve(ctx)?),
            Experiment::Joint { eta, s, grid } => {
                let base = eta.resolve(ctx)?;
                let order = ctx.order() as u32;
                let etas: Vec<CharIndex> = (0..order)
                    .map(|k| CharIndex((base.0 + k) % order))
                    .filter(|c| !c.is_trivial())
                    .take(s)
                    .collect();
                if etas.len() < s {
                    return Err(Error::HypothesisViolated(format!(
                        "only {} nontrivial characters for s = {s}",
                        etas.len()
                    )));
                }
                joint_experiment(ctx, table, &etas, grid)
            }
            Experiment::Bilinear { s, seed, cutoff_cap } => {
                let (x, y) = bilinear_sets(ctx, seed);
                bilinear_experiment(ctx, table, &x, &y, s, cutoff_cap)
            }
        }
    }
}

/// The random sets of the bilinear experiment for this field.
pub fn bilinear_sets(ctx: &FieldCtx, seed: u64) -> (Vec<CharIndex>, Vec<CharIndex>) {
    let q = ctx.q() as f64;
    let mut r = rng(seed ^ ctx.q());
    let x = random_char_set(&mut r, ctx, q.powf(0.75).ceil() as usize);
    let y = random_char_set(&mut r, ctx, q.powf(0.25).ceil() as usize);
    (x, y)
}

/// One prime of a scan: the report, or the error it produced.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanRow {
    pub q: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<DiscrepancyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Least-squares slope of `ln d_star` on `ln q` over successful rows so far.
    pub slope_so_far: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanResult {
    pub power: f64,
    pub rows: Vec<ScanRow>,
    pub slope: Option<f64>,
    /// `max d_star·q^{power}` over successful rows.
    pub max_scaled: f64,
}

impl ScanResult {
    pub fn reports(&self) -> impl Iterator<Item = &DiscrepancyReport> {
        self.rows.iter().filter_map(|r| r.report.as_ref())
    }
}

/// Least-squares slope of `y` on `x`; `None` with fewer than two distinct `x`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Runs `run` for every prime in parallel and fits the decay exponent.
/// Rows keep the input order; a failing prime is recorded, not fatal.
pub fn prime_scan_with<F>(primes: &[u64], power: f64, run: F) -> Result<ScanResult>
where
    F: Fn(u64) -> Result<DiscrepancyReport> + Sync,
{
    if primes.is_empty() {
        return Err(Error::HypothesisViolated("empty prime list".into()));
    }
    let outcomes: Vec<Result<DiscrepancyReport>> = primes.par_iter().map(|&q| run(q)).collect();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut max_scaled = 0.0f64;
    let rows = primes
        .iter()
        .zip(outcomes)
        .map(|(&q, outcome)| match outcome {
            Ok(report) => {
                xs.push((q as f64).ln());
                ys.push(report.d_star.ln());
                max_scaled = max_scaled.max(report.d_star * (q as f64).powf(power));
                ScanRow {
                    q,
                    report: Some(report),
                    error: None,
                    slope_so_far: fit_slope(&xs, &ys),
                }
            }
            Err(e) => ScanRow {
                q,
                report: None,
                error: Some(e.to_string()),
                slope_so_far: fit_slope(&xs, &ys),
            },
        })
        .collect();
    Ok(ScanResult {
        power,
        rows,
        slope: fit_slope(&xs, &ys),
        max_scaled,
    })
}

/// Builds `F_q` and its FFT Gauss table for each prime and runs `experiment`.
pub fn prime_scan(primes: &[u64], experiment: &Experiment) -> Result<ScanResult> {
    prime_scan_with(primes, experiment.power(), |q| {
        let ctx = build_field(q, 1, None)?;
        let table = gauss_table(&ctx, GaussMethod::Fft);
        experiment.run(&ctx, &table)
    })
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with header `q,N,d_star,etk_bound,scaled,slope_so_far`; failed primes
/// and undefined slopes are written as empty fields.
pub fn write_scan_csv<W: Write>(scan: &ScanResult, mut out: W) -> std::io::Result<()> {
    writeln!(out, "q,N,d_star,etk_bound,scaled,slope_so_far")?;
    for row in &scan.rows {
        let slope = row.slope_so_far.map(fmt17).unwrap_or_default();
        match &row.report {
            Some(r) => writeln!(
                out,
                "{},{},{},{},{},{}",
                r.q,
                r.n,
                fmt17(r.d_star),
                fmt17(r.etk_bound),
                fmt17(r.scaled),
                slope
            )?,
            None => writeln!(out, "{},,,,,{}", row.q, slope)?,
        }
    }
    Ok(())
}

/// Plot-ready `ln q \t ln d_star` rows for successful primes.
pub fn write_scan_tsv<W: Write>(scan: &ScanResult, mut out: W) -> std::io::Result<()> {
    writeln!(out, "log_q\tlog_d_star")?;
    for r in scan.reports() {
        writeln!(out, "{}\t{}", fmt17((r.q as f64).ln()), fmt17(r.d_star.ln()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Sup over intervals with endpoints at sample points or 0/1, both open
    /// and closed ends, O(N^3).
    fn interval_brute(points: &[f64]) -> f64 {
        let n = points.len() as f64;
        let mut ends: Vec<f64> = points.to_vec();
        ends.push(0.0);
        ends.push(1.0);
        let mut worst = 0.0f64;
        for &a in &ends {
            for &b in &ends {
                if b < a {
                    continue;
                }
                let len = b - a;
                let closed = points.iter().filter(|&&x| a <= x && x <= b).count() as f64;
                let open = points.iter().filter(|&&x| a < x && x < b).count() as f64;
                worst = worst.max((closed / n - len).abs()).max((open / n - len).abs());
            }
        }
        worst
    }

    /// Brute force over anchored boxes with corners on the grid, O(G^2 N).
    fn box_brute_2d(points: &[[f64; 2]], grid: usize) -> f64 {
        let n = points.len() as f64;
        let mut worst = 0.0f64;
        for i in 1..=grid {
            for j in 1..=grid {
                let (a, b) = (i as f64 / grid as f64, j as f64 / grid as f64);
                let c = points.iter().filter(|p| p[0] <= a && p[1] <= b).count() as f64;
                worst = worst.max((c / n - a * b).abs());
            }
        }
        worst
    }

    #[test]
    fn angle_examples() {
        let s = normalize_angles(
            &[
                Complex64::new(0.0, 3f64.sqrt()),
                Complex64::new(0.0, -1.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(-1.0, -0.0),
            ],
            SampleSource::Custom { label: "t".into() },
        )
        .unwrap();
        assert_eq!(s.points, vec![0.25, 0.75, 0.5, 0.5]);
        assert!(matches!(
            normalize_angles(&[Complex64::new(0.0, 0.0)], SampleSource::Custom { label: "t".into() }),
            Err(Error::ZeroValue(0))
        ));
        assert!(angle_of(Complex64::new(1.0, -1e-300)) < 1.0);
    }

    #[test]
    fn star_discrepancy_examples() {
        let centered: Vec<f64> = (1..=10).map(|i| (2 * i - 1) as f64 / 20.0).collect();
        assert!((star_discrepancy(&centered).unwrap() - 0.05).abs() < 1e-15);
        let left: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        assert!((star_discrepancy(&left).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(star_discrepancy(&[0.5]).unwrap(), 0.5);
        assert!(matches!(star_discrepancy(&[]), Err(Error::EmptySample)));
    }

    #[test]
    fn box_discrepancy_examples() {
        let one = PointSet::from_rows(&[vec![0.5, 0.5]]).unwrap();
        assert!((box_discrepancy(&one, 2).unwrap() - 0.75).abs() < 1e-15);
        assert!(matches!(
            box_discrepancy(&PointSet::one_dim(&[0.1]), 4),
            Err(Error::DimensionTooSmall(1))
        ));
        // Everything near the far corner: only the full square is occupied.
        let corner = PointSet::from_rows(&vec![vec![0.999, 0.999]; 7]).unwrap();
        let g = 8;
        let est = box_discrepancy(&corner, g).unwrap();
        let pts = vec![[0.999, 0.999]; 7];
        assert!((est - box_brute_2d(&pts, g)).abs() < 1e-15);
        assert!((est - (1.0 - 1.0 / g as f64)).abs() < 1e-12);
    }

    #[test]
    fn lattice_product_is_small() {
        for g in [2usize, 4, 8, 16] {
            let mut rows = Vec::new();
            let mut pts = Vec::new();
            for i in 0..g {
                for j in 0..g {
                    let p = [(2 * i + 1) as f64 / (2 * g) as f64, (2 * j + 1) as f64 / (2 * g) as f64];
                    rows.push(p.to_vec());
                    pts.push(p);
                }
            }
            let est = box_discrepancy(&PointSet::from_rows(&rows).unwrap(), g).unwrap();
            assert!((est - box_brute_2d(&pts, g)).abs() < 1e-15);
            assert!(est <= 2.0 / g as f64);
        }
    }

    #[test]
    fn etk_examples() {
        // Nine equally spaced points: Weyl sums vanish for 1 <= h <= 8.
        let lattice: Vec<f64> = (0..9).map(|i| i as f64 / 9.0).collect();
        let b = etk_bound(&PointSet::one_dim(&lattice), 8).unwrap();
        assert!((b - 6.0 / 9.0).abs() < 1e-12);
        let ten: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let b = etk_bound(&PointSet::one_dim(&ten), 9).unwrap();
        assert!((b - 0.6).abs() < 1e-12);
        assert!(b >= star_discrepancy(&ten).unwrap());
    }

    #[test]
    fn half_space_counts() {
        assert_eq!(half_space_frequencies(1, 5), (1..=5).map(|h| vec![h]).collect::<Vec<_>>());
        assert_eq!(half_space_frequencies(2, 3).len(), (49 - 1) / 2);
        assert_eq!(half_space_frequencies(3, 2).len(), (125 - 1) / 2);
    }

    #[test]
    fn etk_dominates_box_estimate_on_a_diagonal() {
        // Points on x2 = x1 + 1/3: all Weyl sums with h1, h2 >= 0 vanish, so a
        // non-negative frequency box alone would not bound the discrepancy.
        let n = 60;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let x = i as f64 / n as f64;
                vec![x, (x + 1.0 / 3.0).rem_euclid(1.0)]
            })
            .collect();
        let set = PointSet::from_rows(&rows).unwrap();
        let est = box_discrepancy(&set, 16).unwrap();
        for h in 1..=10 {
            assert!(est <= etk_bound(&set, h).unwrap() + 1e-9);
        }
    }

    #[test]
    fn jacobi_angles_q101() {
        let ctx = build_field(101, 1, None).unwrap();
        let table = gauss_table(&ctx, GaussMethod::Fft);
        let r = fixed_eta_experiment(&ctx, &table, CharIndex(50)).unwrap();
        assert_eq!(r.n, 98);
        assert!(r.d_star <= r.etk_bound + 1e-9);
        let big_h = etk_bound(
            &PointSet::one_dim(
                &normalize_angles(
                    &ctx.char_domain(&[CharIndex(50)])
                        .iter()
                        .map(|c| jacobi_unchecked(&table, c.0, 50))
                        .collect::<Vec<_>>(),
                    SampleSource::Custom { label: "x".into() },
                )
                .unwrap()
                .points,
            ),
            50,
        )
        .unwrap();
        assert!(r.d_star <= big_h);
    }

    #[test]
    fn experiment_counts_and_errors() {
        let f7 = build_field(7, 1, None).unwrap();
        let t7 = gauss_table(&f7, GaussMethod::Fft);
        assert_eq!(fixed_eta_experiment(&f7, &t7, CharIndex(1)).unwrap().n, 4);
        let f5 = build_field(5, 1, None).unwrap();
        let t5 = gauss_table(&f5, GaussMethod::Fft);
        assert_eq!(fixed_eta_experiment(&f5, &t5, CharIndex(1)).unwrap().n, 2);
        assert!(matches!(
            fixed_eta_experiment(&f5, &t5, CharIndex(0)),
            Err(Error::TrivialCharacter(_))
        ));
        let f3 = build_field(3, 1, None).unwrap();
        let t3 = gauss_table(&f3, GaussMethod::Fft);
        assert!(matches!(
            fixed_eta_experiment(&f3, &t3, CharIndex(1)),
            Err(Error::HypothesisViolated(_))
        ));

        let f101 = build_field(101, 1, None).unwrap();
        let t101 = gauss_table(&f101, GaussMethod::Fft);
        let j = joint_experiment(&f101, &t101, &[CharIndex(1), CharIndex(2)], 64).unwrap();
        assert_eq!(j.n, 97);
        assert!(j.box_estimate.unwrap() <= j.etk_bound + 1e-9);
        assert!(matches!(
            joint_experiment(&f101, &t101, &[CharIndex(3), CharIndex(3)], 64),
            Err(Error::DuplicateEta(3))
        ));

        let all: Vec<CharIndex> = (1..100).map(CharIndex).collect();
        let mut r = rng(8);
        let y = random_char_set(&mut r, &f101, 8);
        let b = bilinear_experiment(&f101, &t101, &all, &y, 2, MAX_CUTOFF).unwrap();
        // Each η in Y excludes exactly one χ = η^{-1} from X.
        assert_eq!(b.n, 99 * 8 - 8);
        assert!(matches!(
            bilinear_experiment(&f101, &t101, &all[..5], &y, 2, MAX_CUTOFF),
            Err(Error::HypothesisViolated(_))
        ));
    }

    #[test]
    fn scan_control_and_errors() {
        let fake = |q: u64| {
            let pts: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
            Ok(DiscrepancyReport {
                q,
                n: 10,
                d_star: star_discrepancy(&pts)?,
                d_interval_bound: 0.2,
                etk_bound: 1.0,
                etk_cutoff: 1,
                scaled: 0.0,
                power: 0.25,
                d_interval: None,
                box_estimate: None,
                grid: None,
                theorem_rhs: None,
                source: SampleSource::Custom { label: "const".into() },
            })
        };
        let scan = prime_scan_with(&[101, 211, 307, 401, 503], 0.25, fake).unwrap();
        assert!(scan.slope.unwrap().abs() < 1e-12);
        assert!(prime_scan_with(&[], 0.25, fake).is_err());

        let scan = prime_scan(&[2, 101, 103], &Experiment::FixedEta { eta: EtaChoice::Quadratic }).unwrap();
        assert!(scan.rows[0].error.is_some());
        assert_eq!(scan.reports().count(), 2);
        let mut csv = Vec::new();
        write_scan_csv(&scan, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("q,N,d_star,etk_bound,scaled,slope_so_far\n"));
    }

    #[test]
    fn eta_choice_parsing() {
        assert_eq!("quadratic".parse::<EtaChoice>().unwrap(), EtaChoice::Quadratic);
        assert_eq!("j17".parse::<EtaChoice>().unwrap(), EtaChoice::Index(17));
        assert!("17".parse::<EtaChoice>().is_err());
    }

    proptest! {
        #[test]
        fn star_discrepancy_range_and_permutation(mut pts in prop::collection::vec(0.0f64..1.0, 1..120)) {
            let d = star_discrepancy(&pts).unwrap();
            let n = pts.len() as f64;
            prop_assert!(d <= 1.0 + 1e-15 && d >= 1.0 / (2.0 * n) - 1e-15);
            pts.reverse();
            prop_assert_eq!(star_discrepancy(&pts).unwrap(), d);
            let di = interval_discrepancy(&pts).unwrap();
            prop_assert!(d <= di + 1e-12 && di <= 2.0 * d + 1e-12);
        }

        #[test]
        fn interval_discrepancy_matches_brute_force(pts in prop::collection::vec(0.0f64..1.0, 1..60)) {
            let fast = interval_discrepancy(&pts).unwrap();
            let brute = interval_brute(&pts);
            prop_assert!((fast - brute).abs() <= 1.0 / pts.len() as f64 + 1e-12);
            prop_assert!(brute <= 2.0 * star_discrepancy(&pts).unwrap() + 1e-12);
        }

        #[test]
        fn reflection_and_rotation(pts in prop::collection::vec(0.0f64..1.0, 1..200), shift in 0.0f64..1.0) {
            let reflected: Vec<f64> = pts.iter().map(|x| angle_of(Complex64::from_polar(1.0, -std::f64::consts::TAU * x))).collect();
            let rotated: Vec<f64> = pts.iter().map(|x| (x + shift).rem_euclid(1.0)).map(|x| if x >= 1.0 { 0.0 } else { x }).collect();
            let d = interval_discrepancy(&pts).unwrap();
            prop_assert!((interval_discrepancy(&reflected).unwrap() - d).abs() < 1e-9);
            prop_assert!((interval_discrepancy(&rotated).unwrap() - d).abs() < 1e-9);
            let before = 2.0 * star_discrepancy(&pts).unwrap();
            let after = 2.0 * star_discrepancy(&rotated).unwrap();
            prop_assert!(after <= 2.0 * before + 1e-9 && before <= 2.0 * after + 1e-9);
        }

        #[test]
        fn etk_dominates_star(pts in prop::collection::vec(0.0f64..1.0, 1..80), h in 1u64..40) {
            let set = PointSet::one_dim(&pts);
            prop_assert!(star_discrepancy(&pts).unwrap() <= etk_bound(&set, h).unwrap() + 1e-9);
        }

        #[test]
        fn etk_dominates_box_estimate(coords in prop::collection::vec(0.0f64..1.0, 2..120), h in 1u64..6) {
            let even = coords.len() / 2 * 2;
            let set = PointSet::new(2, coords[..even].to_vec()).unwrap();
            prop_assert!(box_discrepancy(&set, 16).unwrap() <= etk_bound(&set, h).unwrap() + 1e-9);
        }
    }
}
