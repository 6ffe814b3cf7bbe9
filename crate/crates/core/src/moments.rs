//! Mixed moments `M_{κ,λ}(η, ρ)` of Jacobi sums, their Gauss-sum form
//! `M*`, bilinear moments `N_κ(X, Y)`, and the explicit bounds they obey.
//!
//! Bounds are evaluated in log space. Values of the moments themselves are
//! ordinary doubles; with `κ + λ ≤ 6` and q below the field ceiling they
//! stay far from overflow.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::charsums::{
    hypergeom_direct_with_budget, jacobi_direct, jacobi_unchecked, GaussTable, HypergeomSpec,
};
use crate::error::{Error, Result};
use crate::field::{CharIndex, Elem, FieldCtx};
use crate::util::{cpow, ln_add, ordered_par_sum};

/// Data `(κ, λ, η, ρ)` of a mixed moment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub kappas: Vec<u32>,
    pub lambdas: Vec<u32>,
    pub etas: Vec<CharIndex>,
    pub rhos: Vec<CharIndex>,
}

impl MomentSpec {
    pub fn new(
        kappas: Vec<u32>,
        lambdas: Vec<u32>,
        etas: Vec<CharIndex>,
        rhos: Vec<CharIndex>,
    ) -> Result<Self> {
        let spec = Self {
            kappas,
            lambdas,
            etas,
            rhos,
        };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        if self.kappas.len() != self.etas.len() || self.lambdas.len() != self.rhos.len() {
            return Err(Error::InvalidSpec(
                "each exponent needs exactly one character".into(),
            ));
        }
        if self.kappas.is_empty() && self.lambdas.is_empty() {
            return Err(Error::InvalidSpec("both exponent vectors are empty".into()));
        }
        if self.kappas.iter().chain(&self.lambdas).any(|&k| k == 0) {
            return Err(Error::InvalidSpec("exponents must be positive".into()));
        }
        if let Some(c) = self.etas.iter().chain(&self.rhos).find(|c| c.is_trivial()) {
            return Err(Error::TrivialCharacter(format!("{c} in moment spec")));
        }
        if let Some(c) = self.etas.iter().find(|e| self.rhos.contains(e)) {
            return Err(Error::NotDisjoint(format!("{c} appears in both eta and rho")));
        }
        Ok(())
    }

    /// Validates against a concrete field.
    pub fn check_for(&self, ctx: &FieldCtx) -> Result<()> {
        self.check()?;
        for c in self.etas.iter().chain(&self.rhos) {
            ctx.char_index(c.0.into())?;
        }
        Ok(())
    }

    /// `κ = ‖κ‖₁`.
    pub fn kappa(&self) -> u32 {
        self.kappas.iter().sum()
    }

    /// `λ = ‖λ‖₁`.
    pub fn lambda(&self) -> u32 {
        self.lambdas.iter().sum()
    }

    pub fn weight(&self) -> u32 {
        self.kappa() + self.lambda()
    }

    /// Exchanges the roles of `(κ, η)` and `(λ, ρ)`; the moment of the
    /// swapped spec is the complex conjugate of the original.
    pub fn swapped(&self) -> Self {
        Self {
            kappas: self.lambdas.clone(),
            lambdas: self.kappas.clone(),
            etas: self.rhos.clone(),
            rhos: self.etas.clone(),
        }
    }

    fn all_chars(&self) -> Vec<CharIndex> {
        self.etas.iter().chain(&self.rhos).copied().collect()
    }
}

fn moment_summand(table: &GaussTable, spec: &MomentSpec, chi: u32) -> Complex64 {
    let mut term = Complex64::new(1.0, 0.0);
    for (&k, e) in spec.kappas.iter().zip(&spec.etas) {
        term *= cpow(jacobi_unchecked(table, chi, e.0), k);
    }
    for (&l, r) in spec.lambdas.iter().zip(&spec.rhos) {
        term *= cpow(jacobi_unchecked(table, chi, r.0).conj(), l);
    }
    term
}

/// `Σ_{χ ∈ G(η,ρ)} Π J(χ,η_i)^{κ_i} Π conj(J(χ,ρ_j))^{λ_j}` with the Jacobi
/// sums taken from the Gauss table. An empty domain gives 0.
pub fn mixed_moment(ctx: &FieldCtx, table: &GaussTable, spec: &MomentSpec) -> Result<Complex64> {
    spec.check_for(ctx)?;
    let domain = ctx.char_domain(&spec.all_chars());
    Ok(ordered_par_sum(domain.len(), |i| {
        moment_summand(table, spec, domain[i].0)
    }))
}

/// The same moment from directly summed Jacobi sums, O(q²) per moment.
pub fn mixed_moment_direct(ctx: &FieldCtx, spec: &MomentSpec) -> Result<Complex64> {
    spec.check_for(ctx)?;
    let domain = ctx.char_domain(&spec.all_chars());
    Ok(ordered_par_sum(domain.len(), |i| {
        let chi = domain[i];
        let mut term = Complex64::new(1.0, 0.0);
        for (&k, &e) in spec.kappas.iter().zip(&spec.etas) {
            term *= cpow(jacobi_direct(ctx, chi, e), k);
        }
        for (&l, &r) in spec.lambdas.iter().zip(&spec.rhos) {
            term *= cpow(jacobi_direct(ctx, chi, r).conj(), l);
        }
        term
    }))
}

/// `M` next to its Gauss-sum counterpart `M*` summed over every character.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MomentDecomposition {
    pub m_value: Complex64,
    pub mstar_value: Complex64,
    /// `ϑ(η, ρ)`, of modulus one.
    pub theta: Complex64,
    /// `q^{(λ-κ)/2} (Σ_i q^{κ-κ_i/2} + Σ_j q^{λ-λ_j/2})`, for `κ ≥ λ`.
    pub gap_bound: f64,
    /// Term-by-term bound on `|M - M*|` over the excluded characters
    /// `𝟏, η_i^{-1}, ρ_j^{-1}`: `q^λ + Σ_i q^{(κ+λ-κ_i)/2} + Σ_j q^{(κ+λ-λ_j)/2}`.
    pub excluded_terms_bound: f64,
}

impl MomentDecomposition {
    pub fn gap(&self) -> f64 {
        (self.m_value - self.mstar_value).norm()
    }

    fn conj(self) -> Self {
        Self {
            m_value: self.m_value.conj(),
            mstar_value: self.mstar_value.conj(),
            theta: self.theta.conj(),
            ..self
        }
    }
}

/// `ϑ(η, ρ) = q^{-(κ+λ)/2} Π τ(η_i)^{κ_i} Π conj(τ(ρ_j))^{λ_j}`.
pub fn theta(table: &GaussTable, spec: &MomentSpec) -> Complex64 {
    let q = table.q() as f64;
    let mut t = Complex64::new(1.0, 0.0);
    for (&k, &e) in spec.kappas.iter().zip(&spec.etas) {
        t *= cpow(table.get(e) / q.sqrt(), k);
    }
    for (&l, &r) in spec.lambdas.iter().zip(&spec.rhos) {
        t *= cpow(table.get(r).conj() / q.sqrt(), l);
    }
    t
}

/// Computes `M`, `M*`, `ϑ` and the bounds on their difference. Specs with
/// `κ < λ` are handled through the conjugate swap.
pub fn mixed_moment_star(
    ctx: &FieldCtx,
    table: &GaussTable,
    spec: &MomentSpec,
) -> Result<MomentDecomposition> {
    spec.check_for(ctx)?;
    if spec.kappa() < spec.lambda() {
        return Ok(mixed_moment_star(ctx, table, &spec.swapped())?.conj());
    }
    let q = ctx.q() as f64;
    let (kappa, lambda) = (f64::from(spec.kappa()), f64::from(spec.lambda()));
    let diff = spec.kappa() - spec.lambda();
    let th = theta(table, spec);
    let order = ctx.order() as usize;
    let sum = ordered_par_sum(order, |j| {
        let j = j as u32;
        let mut term = cpow(table.get(CharIndex(j)), diff);
        for (&k, e) in spec.kappas.iter().zip(&spec.etas) {
            term *= cpow(table.at_sum(j, e.0).conj(), k);
        }
        for (&l, r) in spec.lambdas.iter().zip(&spec.rhos) {
            term *= cpow(table.at_sum(j, r.0), l);
        }
        term
    });
    let scale = q.powf((lambda - kappa) / 2.0);
    let gap_bound = scale
        * (spec
            .kappas
            .iter()
            .map(|&k| q.powf(kappa - f64::from(k) / 2.0))
            .sum::<f64>()
            + spec
                .lambdas
                .iter()
                .map(|&l| q.powf(lambda - f64::from(l) / 2.0))
                .sum::<f64>());
    let excluded_terms_bound = q.powf(lambda)
        + spec
            .kappas
            .iter()
            .chain(&spec.lambdas)
            .map(|&k| q.powf((kappa + lambda - f64::from(k)) / 2.0))
            .sum::<f64>();
    Ok(MomentDecomposition {
        m_value: mixed_moment(ctx, table, spec)?,
        mstar_value: th * scale * sum,
        theta: th,
        gap_bound,
        excluded_terms_bound,
    })
}

/// The character tuples of the hypergeometric sum that `M*` reduces to:
/// `((𝟏 × (κ-λ), ρ_j × λ_j), (η_i × κ_i))`, for `κ ≥ λ`.
pub fn induced_hypergeom(spec: &MomentSpec) -> HypergeomSpec {
    let diff = spec.kappa().saturating_sub(spec.lambda()) as usize;
    let mut chis = vec![CharIndex::TRIVIAL; diff];
    for (&l, &r) in spec.lambdas.iter().zip(&spec.rhos) {
        chis.extend(std::iter::repeat_n(r, l as usize));
    }
    let mut etas = Vec::new();
    for (&k, &e) in spec.kappas.iter().zip(&spec.etas) {
        etas.extend(std::iter::repeat_n(e, k as usize));
    }
    HypergeomSpec::new(chis, etas)
}

/// `M* = -ϑ (q-1) q^{(λ-κ)/2} q^{κ-1/2} H(1; ...)` with `H` enumerated
/// directly. Only feasible for small q and weight.
pub fn mstar_via_hypergeom(
    ctx: &FieldCtx,
    table: &GaussTable,
    spec: &MomentSpec,
    budget: f64,
) -> Result<Complex64> {
    spec.check_for(ctx)?;
    if spec.kappa() < spec.lambda() {
        return Ok(mstar_via_hypergeom(ctx, table, &spec.swapped(), budget)?.conj());
    }
    let q = ctx.q() as f64;
    let (kappa, lambda) = (f64::from(spec.kappa()), f64::from(spec.lambda()));
    let h = hypergeom_direct_with_budget(ctx, &induced_hypergeom(spec), Elem::ONE, budget)?;
    let scale = (q - 1.0) * q.powf((lambda - kappa) / 2.0) * q.powf(kappa - 0.5);
    Ok(-theta(table, spec) * scale * h)
}

/// The trivial bound and the explicit moment bound for weight `κ + λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentBounds {
    /// `q^{(κ+λ)/2 + 1}`.
    pub trivial: f64,
    /// `3(κ+λ) q^{(κ+λ+1)/2}`.
    pub theorem: f64,
    pub ln_trivial: f64,
    pub ln_theorem: f64,
    /// The explicit bound beats the trivial one, i.e. `3(κ+λ) < √q`.
    pub nontrivial: bool,
}

pub fn moment_bounds(q: u64, kappa: u32, lambda: u32) -> MomentBounds {
    let w = f64::from(kappa + lambda);
    let lq = (q as f64).ln();
    let ln_trivial = (w / 2.0 + 1.0) * lq;
    let ln_theorem = (3.0 * w).ln() + (w + 1.0) / 2.0 * lq;
    MomentBounds {
        trivial: ln_trivial.exp(),
        theorem: ln_theorem.exp(),
        ln_trivial,
        ln_theorem,
        nontrivial: 3.0 * w < (q as f64).sqrt(),
    }
}

fn check_char_set(ctx: &FieldCtx, set: &[CharIndex], name: &str) -> Result<()> {
    if set.is_empty() {
        return Err(Error::InvalidSpec(format!("{name} is empty")));
    }
    for c in set {
        ctx.char_index(c.0.into())?;
        if c.is_trivial() {
            return Err(Error::TrivialCharacter(format!("trivial character in {name}")));
        }
    }
    Ok(())
}

fn dedup_sorted(set: &[CharIndex]) -> Vec<CharIndex> {
    let mut v = set.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// `N_κ(X, Y) = Σ_{χ∈X} Σ_{η∈Y, χη≠𝟏} J(χ,η)^κ`. Inputs are treated as sets.
pub fn bilinear_moment(
    ctx: &FieldCtx,
    table: &GaussTable,
    x: &[CharIndex],
    y: &[CharIndex],
    kappa: u32,
) -> Result<Complex64> {
    Ok(bilinear_moments(ctx, table, x, y, &[kappa])?[0])
}

/// `N_κ` for several κ at once, sharing the Jacobi sums.
pub fn bilinear_moments(
    ctx: &FieldCtx,
    table: &GaussTable,
    x: &[CharIndex],
    y: &[CharIndex],
    kappas: &[u32],
) -> Result<Vec<Complex64>> {
    check_char_set(ctx, x, "X")?;
    check_char_set(ctx, y, "Y")?;
    let (x, y) = (dedup_sorted(x), dedup_sorted(y));
    let order = ctx.order();
    Ok(kappas
        .iter()
        .map(|&kappa| {
            ordered_par_sum(x.len(), |i| {
                let chi = x[i].0;
                y.iter()
                    .filter(|eta| (u64::from(chi) + u64::from(eta.0)) % order != 0)
                    .map(|eta| cpow(jacobi_unchecked(table, chi, eta.0), kappa))
                    .fold(Complex64::new(0.0, 0.0), |a, b| a + b)
            })
        })
        .collect())
}

/// `N_κ(X, Y)` with directly summed Jacobi sums.
pub fn bilinear_moment_direct(
    ctx: &FieldCtx,
    x: &[CharIndex],
    y: &[CharIndex],
    kappa: u32,
) -> Result<Complex64> {
    check_char_set(ctx, x, "X")?;
    check_char_set(ctx, y, "Y")?;
    let (x, y) = (dedup_sorted(x), dedup_sorted(y));
    Ok(ordered_par_sum(x.len(), |i| {
        let chi = x[i];
        y.iter()
            .filter(|&&eta| !ctx.char_mul(chi, eta).is_trivial())
            .map(|&eta| cpow(jacobi_direct(ctx, chi, eta), kappa))
            .fold(Complex64::new(0.0, 0.0), |a, b| a + b)
    }))
}

/// Natural log of
/// `s |X|^{1-1/(2s)} (|Y|^s q^{sκ+1} + 6sκ |Y|^{2s} q^{sκ+1/2})^{1/(2s)}`.
pub fn bilinear_bound_ln(q: u64, size_x: u64, size_y: u64, kappa: u32, s: u32) -> f64 {
    let (lq, lx, ly) = ((q as f64).ln(), (size_x as f64).ln(), (size_y as f64).ln());
    let (s, k) = (f64::from(s), f64::from(kappa));
    let first = s * ly + (s * k + 1.0) * lq;
    let second = (6.0 * s * k).ln() + 2.0 * s * ly + (s * k + 0.5) * lq;
    s.ln() + (1.0 - 1.0 / (2.0 * s)) * lx + ln_add(first, second) / (2.0 * s)
}

pub fn bilinear_bound(q: u64, size_x: u64, size_y: u64, kappa: u32, s: u32) -> f64 {
    bilinear_bound_ln(q, size_x, size_y, kappa, s).exp()
}

/// Both sides of the Hölder step
/// `|N_κ|^{2s} ≤ |X|^{2s-1} Σ_{χ≠𝟏} |Σ_{η∈Y, χη≠𝟏} J(χ,η)^κ|^{2s}`, as logs.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HolderCheck {
    pub ln_lhs: f64,
    pub ln_rhs: f64,
}

impl HolderCheck {
    pub fn holds(&self, rel_slack: f64) -> bool {
        self.ln_lhs <= self.ln_rhs + rel_slack.ln_1p()
    }
}

pub fn holder_check(
    ctx: &FieldCtx,
    table: &GaussTable,
    x: &[CharIndex],
    y: &[CharIndex],
    kappa: u32,
    s: u32,
) -> Result<HolderCheck> {
    let n = bilinear_moment(ctx, table, x, y, kappa)?;
    let (x, y) = (dedup_sorted(x), dedup_sorted(y));
    let order = ctx.order();
    let two_s = f64::from(2 * s);
    let mut ln_sum = f64::NEG_INFINITY;
    for chi in 1..order as u32 {
        let inner = y
            .iter()
            .filter(|eta| (u64::from(chi) + u64::from(eta.0)) % order != 0)
            .map(|eta| cpow(jacobi_unchecked(table, chi, eta.0), kappa))
            .fold(Complex64::new(0.0, 0.0), |a, b| a + b);
        ln_sum = ln_add(ln_sum, two_s * inner.norm().ln());
    }
    Ok(HolderCheck {
        ln_lhs: two_s * n.norm().ln(),
        ln_rhs: (two_s - 1.0) * (x.len() as f64).ln() + ln_sum,
    })
}

/// Serialized result of one moment evaluation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentRecord {
    pub q: u64,
    pub spec: MomentSpec,
    pub value: [f64; 2],
    pub abs: f64,
    pub trivial_bound: f64,
    pub theorem_bound: f64,
    pub ratio: f64,
}

impl MomentRecord {
    pub fn new(q: u64, spec: &MomentSpec, value: Complex64) -> Self {
        let b = moment_bounds(q, spec.kappa(), spec.lambda());
        Self {
            q,
            spec: spec.clone(),
            value: [value.re, value.im],
            abs: value.norm(),
            trivial_bound: b.trivial,
            theorem_bound: b.theorem,
            ratio: (value.norm().ln() - b.ln_theorem).exp(),
        }
    }
}

/// Draws a random disjoint spec with total weight `κ + λ ≤ max_weight`.
/// Characters on each side are sampled uniformly among nontrivial ones;
/// a draw colliding with the opposite side is rejected and redrawn, and a
/// piece whose side is fully blocked moves to the other side.
pub fn random_moment_spec<R: Rng>(rng: &mut R, ctx: &FieldCtx, max_weight: u32) -> MomentSpec {
    let order = ctx.order() as u32;
    assert!(order >= 2, "no nontrivial characters in F_2");
    let weight = rng.gen_range(1..=max_weight.max(1));
    let parts = rng.gen_range(1..=weight.min(4));
    // Random composition of `weight` into `parts` positive pieces.
    let mut cuts: Vec<u32> = (1..weight).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<u32> = cuts.into_iter().take(parts as usize - 1).collect();
    cuts.sort_unstable();
    let mut pieces = Vec::with_capacity(parts as usize);
    let mut prev = 0;
    for c in cuts.into_iter().chain(std::iter::once(weight)) {
        pieces.push(c - prev);
        prev = c;
    }

    // With a single nontrivial character both sides cannot be populated.
    let two_sided = order > 2;
    let (mut kappas, mut lambdas, mut etas, mut rhos) = (vec![], vec![], vec![], vec![]);
    for piece in pieces {
        let mut to_rho = two_sided && rng.gen_bool(0.5);
        // The opposite side may already use every nontrivial character.
        let blocked = if to_rho { &etas } else { &rhos };
        if (1..order).all(|j| blocked.contains(&CharIndex(j))) {
            to_rho = !to_rho;
        }
        let chi = loop {
            let c = CharIndex(rng.gen_range(1..order));
            let clash = if to_rho { etas.contains(&c) } else { rhos.contains(&c) };
            if !clash {
                break c;
            }
        };
        if to_rho {
            lambdas.push(piece);
            rhos.push(chi);
        } else {
            kappas.push(piece);
            etas.push(chi);
        }
    }
    MomentSpec {
        kappas,
        lambdas,
        etas,
        rhos,
    }
}

/// A uniformly random set of `size` distinct nontrivial characters, sorted.
pub fn random_char_set<R: Rng>(rng: &mut R, ctx: &FieldCtx, size: usize) -> Vec<CharIndex> {
    let mut all: Vec<CharIndex> = (1..ctx.order() as u32).map(CharIndex).collect();
    let size = size.min(all.len());
    let (chosen, _) = all.partial_shuffle(rng, size);
    let mut chosen = chosen.to_vec();
    chosen.sort_unstable();
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charsums::{gauss_table, GaussMethod};
    use crate::field::build_field;
    use crate::util::rng;

    fn setup(p: u64) -> (FieldCtx, GaussTable) {
        let ctx = build_field(p, 1, None).unwrap();
        let t = gauss_table(&ctx, GaussMethod::Fft);
        (ctx, t)
    }

    fn spec(k: &[u32], l: &[u32], e: &[u32], r: &[u32]) -> MomentSpec {
        MomentSpec::new(
            k.to_vec(),
            l.to_vec(),
            e.iter().map(|&j| CharIndex(j)).collect(),
            r.iter().map(|&j| CharIndex(j)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn spec_validation() {
        let c = |j| CharIndex(j);
        assert!(matches!(
            MomentSpec::new(vec![1], vec![1], vec![c(2)], vec![c(2)]),
            Err(Error::NotDisjoint(_))
        ));
        assert!(matches!(
            MomentSpec::new(vec![1], vec![], vec![c(0)], vec![]),
            Err(Error::TrivialCharacter(_))
        ));
        assert!(matches!(
            MomentSpec::new(vec![], vec![], vec![], vec![]),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            MomentSpec::new(vec![0], vec![], vec![c(1)], vec![]),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn empty_domain_gives_zero() {
        let (ctx, t) = setup(5);
        // G(χ_1, χ_2) over F_5 removes 𝟏, χ_3, χ_2, leaving {χ_1}; add χ_3 to empty it.
        let s = spec(&[1, 1, 1], &[], &[1, 2, 3], &[]);
        assert_eq!(ctx.char_domain(&s.all_chars()).len(), 0);
        assert_eq!(mixed_moment(&ctx, &t, &s).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn gauss_route_matches_direct_jacobi() {
        let mut r = rng(7);
        for p in [5u64, 7, 11, 13, 31, 53] {
            let (ctx, t) = setup(p);
            for _ in 0..10 {
                let s = random_moment_spec(&mut r, &ctx, 5);
                let a = mixed_moment(&ctx, &t, &s).unwrap();
                let b = mixed_moment_direct(&ctx, &s).unwrap();
                let scale = moment_bounds(p, s.kappa(), s.lambda()).trivial;
                assert!((a - b).norm() < 1e-8 * scale, "p={p} {s:?}");
            }
        }
    }

    #[test]
    fn conjugate_swap() {
        let (ctx, t) = setup(101);
        let mut r = rng(3);
        for _ in 0..20 {
            let s = random_moment_spec(&mut r, &ctx, 6);
            let a = mixed_moment(&ctx, &t, &s).unwrap();
            let b = mixed_moment(&ctx, &t, &s.swapped()).unwrap();
            let scale = moment_bounds(101, s.kappa(), s.lambda()).trivial;
            assert!((a - b.conj()).norm() < 1e-8 * scale);
        }
    }

    #[test]
    fn theorem_bound_example_q101() {
        let (ctx, t) = setup(101);
        let s = spec(&[2], &[1], &[17], &[40]);
        let m = mixed_moment(&ctx, &t, &s).unwrap();
        let b = moment_bounds(101, 2, 1);
        assert!((b.theorem - 9.0 * 101f64.powi(2)).abs() < 1e-6);
        assert!(m.norm() <= b.theorem);
        let d = mixed_moment_direct(&ctx, &s).unwrap();
        assert!((m - d).norm() < 1e-8 * b.trivial);
    }

    #[test]
    fn bounds_arithmetic() {
        let b = moment_bounds(101, 2, 1);
        assert!((b.trivial - 101f64.powf(2.5)).abs() < 1e-6 * b.trivial);
        assert!((moment_bounds(9, 1, 0).theorem - 27.0).abs() < 1e-12);
        assert!(!moment_bounds(9, 1, 0).nontrivial);
        assert!(moment_bounds(1009, 1, 0).nontrivial);
        for q in [5u64, 37, 101, 997] {
            for w in 1..=6 {
                let b = moment_bounds(q, w, 0);
                assert_eq!(b.theorem < b.trivial, b.nontrivial);
            }
        }
    }

    #[test]
    fn theta_has_unit_modulus() {
        let (ctx, t) = setup(31);
        let mut r = rng(11);
        for _ in 0..30 {
            let s = random_moment_spec(&mut r, &ctx, 6);
            assert!((theta(&t, &s).norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn mstar_matches_hypergeometric_reduction_q7() {
        let (ctx, t) = setup(7);
        let s = spec(&[1], &[1], &[1], &[2]);
        let d = mixed_moment_star(&ctx, &t, &s).unwrap();
        let h = mstar_via_hypergeom(&ctx, &t, &s, 1e8).unwrap();
        assert!((d.mstar_value - h).norm() <= 1e-8 * d.mstar_value.norm() + 1e-8);
    }

    #[test]
    fn excluded_terms_bound_holds() {
        let mut r = rng(5);
        for p in [7u64, 13, 31, 101] {
            let (ctx, t) = setup(p);
            for _ in 0..20 {
                let s = random_moment_spec(&mut r, &ctx, 6);
                let d = mixed_moment_star(&ctx, &t, &s).unwrap();
                assert!(d.gap() <= d.excluded_terms_bound * (1.0 + 1e-6), "p={p} {s:?}");
            }
        }
    }

    #[test]
    fn gap_at_q31_single_square() {
        // χ = 𝟏 and χ = η^{-1} each contribute a unit term with the same
        // phase, so the gap is 2 while the published bound gives 1.
        let (ctx, t) = setup(31);
        for j in 1..30 {
            let s = spec(&[2], &[], &[j], &[]);
            let d = mixed_moment_star(&ctx, &t, &s).unwrap();
            assert!((d.gap() - 2.0).abs() < 1e-9, "j={j}");
            assert_eq!(d.gap_bound, 1.0);
            assert_eq!(d.excluded_terms_bound, 2.0);
        }
    }

    #[test]
    fn bilinear_examples() {
        let (ctx, t) = setup(13);
        let c = |j| CharIndex(j);
        let n = bilinear_moment(&ctx, &t, &[c(3)], &[c(5)], 2).unwrap();
        let j = crate::charsums::jacobi_from_gauss(&t, c(3), c(5)).unwrap();
        assert!((n - j * j).norm() < 1e-10);
        let z = bilinear_moment(&ctx, &t, &[c(3)], &[c(9)], 3).unwrap();
        assert_eq!(z, Complex64::new(0.0, 0.0));
        assert!(matches!(
            bilinear_moment(&ctx, &t, &[c(0)], &[c(1)], 1),
            Err(Error::TrivialCharacter(_))
        ));
    }

    #[test]
    fn bilinear_bound_arithmetic() {
        let v = bilinear_bound(5, 1, 1, 1, 1);
        assert!((v - (25.0 + 6.0 * 5f64.powf(1.5)).sqrt()).abs() < 1e-12);
        assert!((v - 9.5960).abs() < 1e-4);
        let mut prev = 0.0;
        for x in 1..50 {
            let b = bilinear_bound(101, x, 5, 2, 2);
            assert!(b.is_finite() && b > prev);
            prev = b;
        }
        let big = bilinear_bound_ln(499, 400, 400, 6, 4);
        assert!(big.is_finite());
    }

    #[test]
    fn bilinear_q101_against_direct_and_bound() {
        let (ctx, t) = setup(101);
        let mut r = rng(101);
        let x = random_char_set(&mut r, &ctx, 20);
        let y = random_char_set(&mut r, &ctx, 5);
        let n = bilinear_moment(&ctx, &t, &x, &y, 2).unwrap();
        let d = bilinear_moment_direct(&ctx, &x, &y, 2).unwrap();
        assert!((n - d).norm() < 1e-8 * 100.0 * 101.0);
        for s in 1..=3 {
            assert!(n.norm() <= bilinear_bound(101, 20, 5, 2, s));
            let h = holder_check(&ctx, &t, &x, &y, 2, s).unwrap();
            assert!(h.holds(1e-9));
        }
    }

    #[test]
    fn holder_rhs_expands_into_moment_sums() {
        // Σ_{χ≠𝟏} |Σ_{η∈Y∖{χ^{-1}}} J^κ|^{2s} = Σ_{η,ρ ∈ Y^s} S(η, ρ) for s = 1.
        let (ctx, t) = setup(13);
        let y = [CharIndex(2), CharIndex(5), CharIndex(7)];
        let kappa = 2;
        let order = ctx.order() as u32;
        let lhs: f64 = (1..order)
            .map(|chi| {
                y.iter()
                    .filter(|e| (chi + e.0) % order != 0)
                    .map(|e| cpow(jacobi_unchecked(&t, chi, e.0), kappa))
                    .sum::<Complex64>()
                    .norm_sqr()
            })
            .sum();
        let mut rhs = Complex64::new(0.0, 0.0);
        for &eta in &y {
            for &rho in &y {
                for chi in ctx.char_domain(&[eta, rho]) {
                    rhs += cpow(jacobi_unchecked(&t, chi.0, eta.0), kappa)
                        * cpow(jacobi_unchecked(&t, chi.0, rho.0).conj(), kappa);
                }
            }
        }
        assert!((rhs.re - lhs).abs() < 1e-8 * lhs && rhs.im.abs() < 1e-8 * lhs);
    }

    #[test]
    fn random_specs_are_valid() {
        let mut r = rng(1);
        for p in [3u64, 5, 7, 101] {
            let (ctx, _) = setup(p);
            for _ in 0..200 {
                let s = random_moment_spec(&mut r, &ctx, 6);
                s.check_for(&ctx).unwrap();
                assert!(s.weight() <= 6 && s.weight() >= 1);
            }
        }
    }

    #[test]
    fn record_json_keys() {
        let s = spec(&[2], &[1], &[1], &[2]);
        let rec = MomentRecord::new(101, &s, Complex64::new(3.0, 4.0));
        let v = serde_json::to_value(&rec).unwrap();
        for key in ["q", "spec", "value", "abs", "trivial_bound", "theorem_bound", "ratio"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        for key in ["kappas", "lambdas", "etas", "rhos"] {
            assert!(v["spec"].get(key).is_some(), "{key}");
        }
        assert_eq!(v["abs"], 5.0);
    }
}
