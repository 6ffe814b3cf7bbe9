//! Gauss, Jacobi, hyper-Kloosterman and hypergeometric sums.
//!
//! The Gauss table is the workhorse: with characters indexed through the
//! generator, `τ(χ_j) = Σ_k e^{2πi jk/(q-1)} ψ(g^k)` is a length-(q-1)
//! discrete Fourier transform of `k ↦ ψ(g^k)`. Both the FFT route and the
//! O(q²) double loop are kept; the latter is the reference the former is
//! checked against.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{CharIndex, Elem, FieldCtx};

/// Default cap on the number of summand evaluations in direct enumeration.
pub const DEFAULT_BUDGET: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GaussMethod {
    Naive,
    Fft,
}

impl fmt::Display for GaussMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GaussMethod::Naive => "naive",
            GaussMethod::Fft => "fft",
        })
    }
}

impl FromStr for GaussMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "naive" => Ok(GaussMethod::Naive),
            "fft" => Ok(GaussMethod::Fft),
            other => Err(format!("unknown gauss method {other:?} (expected fft|naive)")),
        }
    }
}

/// All Gauss sums `τ(χ_j)`, `j = 0..q-1`.
#[derive(Clone, Debug)]
pub struct GaussTable {
    q: u64,
    generator: Elem,
    method: GaussMethod,
    values: Vec<Complex64>,
}

/// JSON layout of an exported table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussTableExport {
    pub q: u64,
    pub generator: u32,
    pub method: GaussMethod,
    pub values: Vec<[f64; 2]>,
}

impl GaussTable {
    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn method(&self) -> GaussMethod {
        self.method
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn order(&self) -> u64 {
        self.values.len() as u64
    }

    pub fn get(&self, j: CharIndex) -> Complex64 {
        self.values[j.0 as usize]
    }

    /// `τ(χ_{a+b})`, indices added mod q-1.
    #[inline]
    pub fn at_sum(&self, a: u32, b: u32) -> Complex64 {
        let o = self.values.len() as u64;
        self.values[((u64::from(a) + u64::from(b)) % o) as usize]
    }

    pub fn parseval_sum(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    /// `max_{j≠0} | |τ(χ_j)| - √q |`.
    pub fn max_modulus_defect(&self) -> f64 {
        let root_q = (self.q as f64).sqrt();
        self.values
            .iter()
            .skip(1)
            .map(|v| (v.norm() - root_q).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_entry_diff(&self, other: &GaussTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn export(&self) -> GaussTableExport {
        GaussTableExport {
            q: self.q,
            generator: self.generator.0,
            method: self.method,
            values: self.values.iter().map(|v| [v.re, v.im]).collect(),
        }
    }
}

/// `k ↦ ψ(g^k)` for `k = 0..q-1`.
fn psi_of_powers(ctx: &FieldCtx) -> Vec<Complex64> {
    (0..ctx.order()).map(|k| ctx.add_char(ctx.exp(k))).collect()
}

pub fn gauss_table(ctx: &FieldCtx, method: GaussMethod) -> GaussTable {
    let seq = psi_of_powers(ctx);
    let order = seq.len();
    let values = match method {
        GaussMethod::Naive => {
            let roots = ctx.roots();
            (0..order)
                .into_par_iter()
                .map(|j| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    let mut idx = 0usize;
                    for &s in &seq {
                        acc += roots[idx] * s;
                        idx += j;
                        if idx >= order {
                            idx -= order;
                        }
                    }
                    acc
                })
                .collect()
        }
        GaussMethod::Fft => {
            // rustfft's inverse transform is the unnormalized e^{+2πi jk/N} sum.
            let mut buf = seq;
            FftPlanner::<f64>::new()
                .plan_fft_inverse(order)
                .process(&mut buf);
            buf
        }
    };
    GaussTable {
        q: ctx.q(),
        generator: ctx.generator(),
        method,
        values,
    }
}

/// `J(χ_a, χ_b) = Σ_{x≠0} χ_a(x) χ_b(1-x)` by direct summation.
pub fn jacobi_direct(ctx: &FieldCtx, a: CharIndex, b: CharIndex) -> Complex64 {
    let order = ctx.order();
    let (a, b) = (u64::from(a.0), u64::from(b.0));
    let mut acc = Complex64::new(0.0, 0.0);
    for x in ctx.nonzero() {
        let y = ctx.one_minus(x);
        // χ_b(0) = 0 kills the x = 1 term.
        let (Some(dx), Some(dy)) = (ctx.dlog(x), ctx.dlog(y)) else {
            continue;
        };
        acc += ctx.root((a * u64::from(dx) + b * u64::from(dy)) % order);
    }
    acc
}

/// `J(χ_a, χ_b) = τ(χ_a) τ(χ_b) / τ(χ_a χ_b)`, valid when `a`, `b` and
/// `a + b` are all nonzero mod q-1.
pub fn jacobi_from_gauss(table: &GaussTable, a: CharIndex, b: CharIndex) -> Result<Complex64> {
    let o = table.order();
    let ab = ((u64::from(a.0) + u64::from(b.0)) % o) as u32;
    if a.is_trivial() || b.is_trivial() || ab == 0 {
        return Err(Error::TrivialCharacter(format!(
            "J({a}, {b}) needs a, b and ab nontrivial"
        )));
    }
    Ok(jacobi_unchecked(table, a.0, b.0))
}

/// Lemma-form Jacobi sum without the admissibility check.
#[inline]
pub(crate) fn jacobi_unchecked(table: &GaussTable, a: u32, b: u32) -> Complex64 {
    table.values[a as usize] * table.values[b as usize] / table.at_sum(a, b)
}

/// `max_{j≠0} |τ(χ_{-j}) - χ_j(-1) conj(τ(χ_j))|`.
pub fn conjugation_defect(ctx: &FieldCtx, table: &GaussTable) -> f64 {
    let minus_one = ctx.neg(Elem::ONE);
    (1..ctx.order() as u32)
        .map(|j| {
            let lhs = table.get(ctx.char_inverse(CharIndex(j)));
            let rhs = ctx.mult_char(CharIndex(j), minus_one) * table.get(CharIndex(j)).conj();
            (lhs - rhs).norm()
        })
        .fold(0.0, f64::max)
}

fn budget_check(q: u64, free_vars: usize, budget: f64) -> Result<()> {
    let cost = ((q - 1) as f64).powi(free_vars.max(1) as i32);
    if cost > budget {
        return Err(Error::BudgetExceeded { cost, budget });
    }
    Ok(())
}

/// `(-1)^{k} q^{-k/2}` for `k = m + n - 1` variables beyond the constraint.
fn normalization(q: u64, k: usize) -> f64 {
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * (q as f64).powf(-(k as f64) / 2.0)
}

/// The hyper-Kloosterman sum `Kl_m(t, q)` by enumerating `x_1..x_{m-1}`
/// in F_q^* and solving for `x_m`.
pub fn kloosterman(ctx: &FieldCtx, m: usize, t: Elem) -> Result<Complex64> {
    kloosterman_with_budget(ctx, m, t, DEFAULT_BUDGET)
}

pub fn kloosterman_with_budget(ctx: &FieldCtx, m: usize, t: Elem, budget: f64) -> Result<Complex64> {
    if t.is_zero() {
        return Err(Error::ZeroArgument);
    }
    if m == 0 {
        return Err(Error::EmptySpec);
    }
    budget_check(ctx.q(), m - 1, budget)?;

    fn walk(ctx: &FieldCtx, left: usize, prod: Elem, sum: Elem, t: Elem) -> Complex64 {
        if left == 0 {
            let last = ctx.mul(t, ctx.inv(prod).expect("product of units"));
            return ctx.add_char(ctx.add(sum, last));
        }
        ctx.nonzero()
            .map(|x| walk(ctx, left - 1, ctx.mul(prod, x), ctx.add(sum, x), t))
            .sum()
    }

    let raw = walk(ctx, m - 1, Elem::ONE, Elem::ZERO, t);
    Ok(raw * normalization(ctx.q(), m - 1))
}

/// Character data `(χ_1..χ_m; η_1..η_n)` of a hypergeometric sum.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypergeomSpec {
    pub chis: Vec<CharIndex>,
    pub etas: Vec<CharIndex>,
}

impl HypergeomSpec {
    pub fn new(chis: Vec<CharIndex>, etas: Vec<CharIndex>) -> Self {
        Self { chis, etas }
    }

    pub fn m(&self) -> usize {
        self.chis.len()
    }

    pub fn n(&self) -> usize {
        self.etas.len()
    }

    /// No coordinate of `chis` equals a coordinate of `etas`.
    pub fn is_disjoint(&self) -> bool {
        self.chis.iter().all(|c| !self.etas.contains(c))
    }

    /// Rank of the underlying sheaf, `max(m, n)`.
    pub fn rank(&self) -> usize {
        self.m().max(self.n())
    }

    /// Whether the sum is pure of weight 0 at `t`: every `t ≠ 0` when
    /// `m ≠ n`, and additionally `t ≠ 1` when `m = n`.
    pub fn is_lisse_at(&self, t: Elem) -> bool {
        !t.is_zero() && (self.m() != self.n() || t != Elem::ONE)
    }
}

/// A random disjoint spec with `1 ≤ m + n ≤ max_vars`; characters, trivial
/// included, are uniform, and `η` draws avoid the chosen `χ`.
pub fn random_hypergeom_spec<R: Rng>(rng: &mut R, ctx: &FieldCtx, max_vars: usize) -> HypergeomSpec {
    let order = ctx.order() as u32;
    let vars = rng.gen_range(1..=max_vars.max(1));
    let m = if order == 1 { vars } else { rng.gen_range(0..=vars) };
    let chis: Vec<CharIndex> = (0..m).map(|_| CharIndex(rng.gen_range(0..order))).collect();
    let free: Vec<CharIndex> = (0..order).map(CharIndex).filter(|c| !chis.contains(c)).collect();
    if free.is_empty() {
        return HypergeomSpec::new(chis, Vec::new());
    }
    let etas = (m..vars).map(|_| free[rng.gen_range(0..free.len())]).collect();
    HypergeomSpec::new(chis, etas)
}

/// `H(t; χ, η, q)` by enumerating the variety `N(x) = t N(y)`.
pub fn hypergeom_direct(ctx: &FieldCtx, spec: &HypergeomSpec, t: Elem) -> Result<Complex64> {
    hypergeom_direct_with_budget(ctx, spec, t, DEFAULT_BUDGET)
}

pub fn hypergeom_direct_with_budget(
    ctx: &FieldCtx,
    spec: &HypergeomSpec,
    t: Elem,
    budget: f64,
) -> Result<Complex64> {
    let dlog_t = ctx.dlog(t).ok_or(Error::ZeroArgument)?;
    let vars = spec.m() + spec.n();
    if vars == 0 {
        return Err(Error::EmptySpec);
    }
    budget_check(ctx.q(), vars - 1, budget)?;

    let order = ctx.order();
    let psi: Vec<Complex64> = psi_of_powers(ctx);
    // Per-variable summand as a function of the exponent e of the variable:
    // x-side χ(g^e) ψ(g^e), y-side conj(η(g^e)) ψ(-g^e). The sign records how
    // e enters the constraint Σ e_x - Σ e_y ≡ log t.
    let mut factors: Vec<(bool, Vec<Complex64>)> = Vec::with_capacity(vars);
    for &c in &spec.chis {
        let tab = (0..order)
            .map(|e| ctx.root(u64::from(c.0) * e) * psi[e as usize])
            .collect();
        factors.push((true, tab));
    }
    for &h in &spec.etas {
        let tab = (0..order)
            .map(|e| (ctx.root(u64::from(h.0) * e) * psi[e as usize]).conj())
            .collect();
        factors.push((false, tab));
    }

    let (last_plus, last_tab) = factors.pop().expect("vars >= 1");
    let free = factors;

    fn walk(
        free: &[(bool, Vec<Complex64>)],
        last: (bool, &[Complex64]),
        target: u64,
        order: u64,
        acc_exp: u64,
    ) -> Complex64 {
        match free.split_first() {
            None => {
                let rest = (target + order - acc_exp) % order;
                let e = if last.0 { rest } else { (order - rest) % order };
                last.1[e as usize]
            }
            Some(((plus, tab), tail)) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for (e, &v) in tab.iter().enumerate() {
                    let e = e as u64;
                    let contrib = if *plus { e } else { (order - e) % order };
                    acc += v * walk(tail, last, target, order, (acc_exp + contrib) % order);
                }
                acc
            }
        }
    }

    let raw = walk(&free, (last_plus, &last_tab), u64::from(dlog_t), order, 0);
    Ok(raw * normalization(ctx.q(), vars - 1))
}

/// `H(t; χ, η, q)` through the character expansion of the constraint:
/// `(-1)^{m+n-1} q^{-(m+n-1)/2} (q-1)^{-1} Σ_j conj(χ_j(t)) Π τ(χ_j χ_i) Π conj(τ(χ_j η_k))`.
pub fn hypergeom_spectral(
    ctx: &FieldCtx,
    table: &GaussTable,
    spec: &HypergeomSpec,
    t: Elem,
) -> Result<Complex64> {
    let dlog_t = u64::from(ctx.dlog(t).ok_or(Error::ZeroArgument)?);
    let vars = spec.m() + spec.n();
    if vars == 0 {
        return Err(Error::EmptySpec);
    }
    let order = ctx.order();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..order as u32 {
        let mut term = ctx.root(order - (u64::from(j) * dlog_t) % order);
        for c in &spec.chis {
            term *= table.at_sum(j, c.0);
        }
        for h in &spec.etas {
            term *= table.at_sum(j, h.0).conj();
        }
        acc += term;
    }
    Ok(acc * normalization(ctx.q(), vars - 1) / order as f64)
}
