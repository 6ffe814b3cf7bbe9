//! The `verify` suites. Each draws its random instances up front from one
//! seeded stream, evaluates them in parallel and reduces with `max`, so the
//! payload does not depend on the worker count.

use std::path::Path;

use charsum_core::cache::load_or_build;
use charsum_core::charsums::{
    conjugation_defect, gauss_table, hypergeom_direct, hypergeom_spectral, jacobi_direct,
    jacobi_from_gauss, kloosterman, random_hypergeom_spec, GaussMethod, GaussTable,
    HypergeomSpec,
};
use charsum_core::field::{is_prime, primes_in, CharIndex, FieldCtx};
use charsum_core::moments::{
    bilinear_bound, bilinear_moments, mixed_moment_star, moment_bounds, mstar_via_hypergeom,
    random_char_set, random_moment_spec, MomentSpec,
};
use charsum_core::util::rng;
use charsum_core::{Error, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::record::{Check, Payload};

pub struct SuiteOutput {
    pub payload: Payload,
    pub checks: Vec<Check>,
}

fn max0(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, f64::max)
}

/// Every prime power `p^n ≤ q_max` as `(p, n)`, ordered by `q`.
pub fn prime_powers_upto(q_max: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    for p in primes_in(2, q_max) {
        let mut q = p;
        let mut n = 1;
        while q <= q_max {
            out.push((q, p, n));
            n += 1;
            q = match q.checked_mul(p) {
                Some(v) => v,
                None => break,
            };
        }
    }
    out.sort_unstable();
    out.into_iter().map(|(_, p, n)| (p, n)).collect()
}

fn field(cache: Option<&Path>, p: u64, n: u32) -> Result<FieldCtx> {
    load_or_build(cache, p, n)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaussRow {
    pub q: u64,
    /// `max_j |τ_fft - τ_naive| / √q`.
    pub fft_vs_naive: f64,
    /// `|Σ|τ|² - (q-1)²| / q²`.
    pub parseval_defect: f64,
    pub trivial_defect: f64,
    /// `max_j ||τ_j| - √q| / √q` over nontrivial j.
    pub modulus_defect: f64,
    /// `max_j |τ(χ̄) - χ(-1) conj τ(χ)| / √q`.
    pub conjugation_defect: f64,
}

pub fn gauss_row(ctx: &FieldCtx) -> GaussRow {
    let fft = gauss_table(ctx, GaussMethod::Fft);
    let naive = gauss_table(ctx, GaussMethod::Naive);
    let q = ctx.q() as f64;
    let order = ctx.order() as f64;
    GaussRow {
        q: ctx.q(),
        fft_vs_naive: fft.max_entry_diff(&naive) / q.sqrt(),
        parseval_defect: (fft.parseval_sum() - order * order).abs() / (q * q),
        trivial_defect: (fft.get(CharIndex::TRIVIAL) + 1.0).norm(),
        modulus_defect: fft.max_modulus_defect() / q.sqrt(),
        conjugation_defect: conjugation_defect(ctx, &fft) / q.sqrt(),
    }
}

pub fn gauss_checks(rows: &[GaussRow]) -> Vec<Check> {
    vec![
        Check::at_most("gauss_fft_vs_naive", max0(rows.iter().map(|r| r.fft_vs_naive)), 1e-9),
        Check::at_most("gauss_parseval", max0(rows.iter().map(|r| r.parseval_defect)), 1e-6),
        Check::at_most("gauss_trivial_is_minus_one", max0(rows.iter().map(|r| r.trivial_defect)), 1e-12),
        Check::at_most("gauss_modulus", max0(rows.iter().map(|r| r.modulus_defect)), 1e-9),
        Check::at_most("gauss_conjugation", max0(rows.iter().map(|r| r.conjugation_defect)), 1e-9),
    ]
}

/// FFT against naive Gauss tables on each field.
pub fn gauss_suite(fields: &[(u64, u32)], cache: Option<&Path>) -> Result<(Vec<GaussRow>, Vec<Check>)> {
    let rows = fields
        .par_iter()
        .map(|&(p, n)| field(cache, p, n).map(|ctx| gauss_row(&ctx)))
        .collect::<Result<Vec<_>>>()?;
    let checks = gauss_checks(&rows);
    Ok((rows, checks))
}

/// `count` distinct prime powers `≤ q_max`, drawn with `seed`, sorted.
pub fn seeded_prime_powers(seed: u64, count: usize, q_max: u64) -> Vec<(u64, u32)> {
    let all: Vec<(u64, u32)> = prime_powers_upto(q_max).into_iter().filter(|&(p, n)| p.pow(n) >= 3).collect();
    let mut r = rng(seed);
    let picked = rand::seq::index::sample(&mut r, all.len(), count.min(all.len()));
    let mut out: Vec<(u64, u32)> = picked.into_iter().map(|i| all[i]).collect();
    out.sort_unstable_by_key(|&(p, n)| p.pow(n));
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityRow {
    pub q: u64,
    /// Ordered pairs `(χ, η)` with `χ, η, χη` nontrivial.
    pub pairs: u64,
    /// `max |J_gauss - J_direct| / √q`.
    pub jacobi_gauss_vs_direct: f64,
    /// `max ||J| - √q| / √q`.
    pub jacobi_modulus: f64,
}

pub fn identity_row(ctx: &FieldCtx, table: &GaussTable) -> Result<IdentityRow> {
    let order = ctx.order() as u32;
    let root_q = (ctx.q() as f64).sqrt();
    let per_a = (1..order)
        .into_par_iter()
        .map(|a| {
            let mut worst = (0u64, 0.0f64, 0.0f64);
            for b in 1..order {
                if (a + b) % order == 0 {
                    continue;
                }
                let (ca, cb) = (CharIndex(a), CharIndex(b));
                let direct = jacobi_direct(ctx, ca, cb);
                let via = jacobi_from_gauss(table, ca, cb)?;
                worst.0 += 1;
                worst.1 = worst.1.max((via - direct).norm());
                worst.2 = worst.2.max((direct.norm() - root_q).abs());
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IdentityRow {
        q: ctx.q(),
        pairs: per_a.iter().map(|w| w.0).sum(),
        jacobi_gauss_vs_direct: max0(per_a.iter().map(|w| w.1)) / root_q,
        jacobi_modulus: max0(per_a.iter().map(|w| w.2)) / root_q,
    })
}

/// Jacobi sums through Gauss sums against direct summation, `|J| = √q`,
/// and the Gauss-table checks, over the given fields.
pub fn identity_suite(fields: &[(u64, u32)], cache: Option<&Path>) -> Result<SuiteOutput> {
    let results = fields
        .iter()
        .map(|&(p, n)| {
            let ctx = field(cache, p, n)?;
            let table = gauss_table(&ctx, GaussMethod::Fft);
            Ok((identity_row(&ctx, &table)?, gauss_row(&ctx)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, gauss): (Vec<IdentityRow>, Vec<GaussRow>) = results.into_iter().unzip();
    let mut checks = vec![
        Check::at_most(
            "jacobi_gauss_vs_direct",
            max0(rows.iter().map(|r| r.jacobi_gauss_vs_direct)),
            1e-8,
        ),
        Check::at_most("jacobi_modulus", max0(rows.iter().map(|r| r.jacobi_modulus)), 1e-8),
    ];
    checks.extend(gauss_checks(&gauss));
    Ok(SuiteOutput {
        payload: Payload::Identities { rows, gauss },
        checks,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypergeomSummary {
    pub fields: Vec<u64>,
    pub specs_per_field: usize,
    pub evaluations: u64,
    pub max_direct_vs_spectral: f64,
    /// `max (|H(t)| - max(m, n))` over lisse points.
    pub max_katz_excess: f64,
    pub kl_fields: Vec<u64>,
    pub kl_max_m: usize,
    pub max_kl_specialization: f64,
    /// `max (|Kl_m(t)| - m)`.
    pub max_kl_excess: f64,
}

pub struct HypergeomConfig {
    pub fields: Vec<u64>,
    pub specs_per_field: usize,
    pub max_vars: usize,
    pub kl_fields: Vec<u64>,
    pub kl_max_m: usize,
    pub seed: u64,
}

/// Direct against spectral hypergeometric sums at every `t ≠ 0`, the rank
/// bound at lisse points, and the all-trivial case against Kloosterman sums.
pub fn hypergeom_suite(cfg: &HypergeomConfig, cache: Option<&Path>) -> Result<SuiteOutput> {
    let mut r = rng(cfg.seed);
    let mut jobs: Vec<(usize, HypergeomSpec)> = Vec::new();
    let ctxs = cfg
        .fields
        .iter()
        .map(|&q| field(cache, q, 1))
        .collect::<Result<Vec<_>>>()?;
    for (i, ctx) in ctxs.iter().enumerate() {
        for _ in 0..cfg.specs_per_field {
            jobs.push((i, random_hypergeom_spec(&mut r, ctx, cfg.max_vars)));
        }
    }
    let tables: Vec<GaussTable> = ctxs.iter().map(|c| gauss_table(c, GaussMethod::Fft)).collect();
    let per_job = jobs
        .par_iter()
        .map(|(i, spec)| {
            let (ctx, table) = (&ctxs[*i], &tables[*i]);
            let mut worst = (0u64, 0.0f64, f64::NEG_INFINITY);
            for t in ctx.nonzero() {
                let d = hypergeom_direct(ctx, spec, t)?;
                let s = hypergeom_spectral(ctx, table, spec, t)?;
                worst.0 += 1;
                worst.1 = worst.1.max((d - s).norm());
                if spec.is_lisse_at(t) {
                    worst.2 = worst.2.max(d.norm() - spec.rank() as f64);
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;

    let kl_ctxs = cfg
        .kl_fields
        .iter()
        .map(|&q| field(cache, q, 1))
        .collect::<Result<Vec<_>>>()?;
    let kl = kl_ctxs
        .par_iter()
        .map(|ctx| {
            let mut worst = (0.0f64, f64::NEG_INFINITY);
            for m in 1..=cfg.kl_max_m {
                let spec = HypergeomSpec::new(vec![CharIndex::TRIVIAL; m], Vec::new());
                for t in ctx.nonzero() {
                    let k = kloosterman(ctx, m, t)?;
                    let h = hypergeom_direct(ctx, &spec, t)?;
                    worst.0 = worst.0.max((k - h).norm());
                    worst.1 = worst.1.max(k.norm() - m as f64);
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;

    let summary = HypergeomSummary {
        fields: cfg.fields.clone(),
        specs_per_field: cfg.specs_per_field,
        evaluations: per_job.iter().map(|w| w.0).sum(),
        max_direct_vs_spectral: max0(per_job.iter().map(|w| w.1)),
        max_katz_excess: per_job.iter().map(|w| w.2).fold(f64::NEG_INFINITY, f64::max),
        kl_fields: cfg.kl_fields.clone(),
        kl_max_m: cfg.kl_max_m,
        max_kl_specialization: max0(kl.iter().map(|w| w.0)),
        max_kl_excess: kl.iter().map(|w| w.1).fold(f64::NEG_INFINITY, f64::max),
    };
    let checks = vec![
        Check::at_most("hypergeom_direct_vs_spectral", summary.max_direct_vs_spectral, 1e-8),
        Check::at_most("hypergeom_rank_bound", summary.max_katz_excess, 1e-6),
        Check::at_most("kloosterman_specialization", summary.max_kl_specialization, 1e-9),
        Check::at_most("kloosterman_bound", summary.max_kl_excess, 1e-9),
    ];
    Ok(SuiteOutput {
        payload: Payload::Hypergeom(summary),
        checks,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentRow {
    pub q: u64,
    pub specs: usize,
    /// `max |M| / (3(κ+λ) q^{(κ+λ+1)/2})`.
    pub max_theorem_ratio: f64,
    pub theorem_violations: usize,
    /// `max |M - M*| / gap_bound` for the stated gap bound.
    pub max_gap_ratio: f64,
    pub gap_violations: usize,
    /// `max |M - M*| / excluded_terms_bound`.
    pub max_excluded_ratio: f64,
    pub excluded_violations: usize,
    pub reductions_checked: usize,
    pub reductions_skipped: usize,
    /// `max |M*_sum - M*_hypergeom| / max(|M*|, 1)`.
    pub max_reduction_error: f64,
}

pub struct MomentConfig {
    pub primes: Vec<u64>,
    pub specs_per_prime: usize,
    pub max_weight: u32,
    /// The hypergeometric reduction of `M*` is checked for `q` up to here.
    pub reduction_q_max: u64,
    pub reduction_budget: f64,
    pub seed: u64,
}

/// Slack for comparing `|M - M*|` with a bound that it can attain exactly.
fn gap_slack(m: f64, mstar: f64) -> f64 {
    1e-9 * (m + mstar + 1.0)
}

fn moment_row(ctx: &FieldCtx, specs: &[MomentSpec], cfg: &MomentConfig) -> Result<MomentRow> {
    let table = gauss_table(ctx, GaussMethod::Fft);
    let q = ctx.q();
    let mut row = MomentRow {
        q,
        specs: specs.len(),
        max_theorem_ratio: 0.0,
        theorem_violations: 0,
        max_gap_ratio: 0.0,
        gap_violations: 0,
        max_excluded_ratio: 0.0,
        excluded_violations: 0,
        reductions_checked: 0,
        reductions_skipped: 0,
        max_reduction_error: 0.0,
    };
    for spec in specs {
        let d = mixed_moment_star(ctx, &table, spec)?;
        let b = moment_bounds(q, spec.kappa(), spec.lambda());
        let m = d.m_value.norm();
        row.max_theorem_ratio = row.max_theorem_ratio.max(m / b.theorem);
        if m > b.theorem * (1.0 + 1e-9) {
            row.theorem_violations += 1;
        }
        let gap = d.gap();
        let slack = gap_slack(m, d.mstar_value.norm());
        row.max_gap_ratio = row.max_gap_ratio.max(gap / d.gap_bound);
        if gap > d.gap_bound + slack {
            row.gap_violations += 1;
        }
        row.max_excluded_ratio = row.max_excluded_ratio.max(gap / d.excluded_terms_bound);
        if gap > d.excluded_terms_bound + slack {
            row.excluded_violations += 1;
        }
        if q <= cfg.reduction_q_max {
            match mstar_via_hypergeom(ctx, &table, spec, cfg.reduction_budget) {
                Ok(v) => {
                    row.reductions_checked += 1;
                    let err = (v - d.mstar_value).norm() / d.mstar_value.norm().max(1.0);
                    row.max_reduction_error = row.max_reduction_error.max(err);
                }
                Err(Error::BudgetExceeded { .. }) => row.reductions_skipped += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(row)
}

/// The explicit moment bound, the `M`/`M*` gap and the hypergeometric
/// reduction of `M*` on random disjoint specs.
pub fn moment_suite(cfg: &MomentConfig, cache: Option<&Path>) -> Result<SuiteOutput> {
    let ctxs = cfg
        .primes
        .iter()
        .map(|&q| field(cache, q, 1))
        .collect::<Result<Vec<_>>>()?;
    if let Some(ctx) = ctxs.iter().find(|c| c.order() < 2) {
        return Err(Error::HypothesisViolated(format!(
            "q = {} has no nontrivial characters",
            ctx.q()
        )));
    }
    let mut r = rng(cfg.seed);
    let specs: Vec<Vec<MomentSpec>> = ctxs
        .iter()
        .map(|ctx| {
            (0..cfg.specs_per_prime)
                .map(|_| random_moment_spec(&mut r, ctx, cfg.max_weight))
                .collect()
        })
        .collect();
    let rows = ctxs
        .par_iter()
        .zip(&specs)
        .map(|(ctx, s)| moment_row(ctx, s, cfg))
        .collect::<Result<Vec<_>>>()?;

    let sum = |f: fn(&MomentRow) -> usize| rows.iter().map(f).sum::<usize>();
    let mut checks = vec![
        Check::none("moment_theorem_bound", sum(|r| r.theorem_violations)),
        Check::none("moment_gap_bound", sum(|r| r.gap_violations)),
        Check::none("moment_excluded_terms_bound", sum(|r| r.excluded_violations)),
    ];
    if rows.iter().any(|r| r.reductions_checked > 0) {
        checks.push(Check::at_most(
            "mstar_hypergeometric_reduction",
            max0(rows.iter().map(|r| r.max_reduction_error)),
            1e-8,
        ));
    }
    Ok(SuiteOutput {
        payload: Payload::Moments { rows },
        checks,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BilinearRow {
    pub q: u64,
    pub instances: usize,
    /// `max |N_κ| / bilinear_bound` over instances, κ and s.
    pub max_ratio: f64,
    /// `|N_κ| > 2·bound`.
    pub factor2_violations: usize,
    /// `|N_κ| > bound`.
    pub factor1_violations: usize,
}

pub struct BilinearConfig {
    pub primes: Vec<u64>,
    pub instances_per_prime: usize,
    pub max_kappa: u32,
    pub max_s: u32,
    pub seed: u64,
}

/// The bilinear moment bound on random sets `X, Y` of nontrivial characters
/// with sizes uniform in `1..=q-2`.
pub fn bilinear_suite(cfg: &BilinearConfig, cache: Option<&Path>) -> Result<SuiteOutput> {
    let ctxs = cfg
        .primes
        .iter()
        .map(|&q| field(cache, q, 1))
        .collect::<Result<Vec<_>>>()?;
    if let Some(ctx) = ctxs.iter().find(|c| c.order() < 2) {
        return Err(Error::HypothesisViolated(format!(
            "q = {} has no nontrivial characters",
            ctx.q()
        )));
    }
    let mut r = rng(cfg.seed);
    type Sets = (Vec<CharIndex>, Vec<CharIndex>);
    let instances: Vec<Vec<Sets>> = ctxs
        .iter()
        .map(|ctx| {
            let nontrivial = ctx.order() as usize - 1;
            (0..cfg.instances_per_prime)
                .map(|_| {
                    let sx = r.gen_range(1..=nontrivial);
                    let sy = r.gen_range(1..=nontrivial);
                    (random_char_set(&mut r, ctx, sx), random_char_set(&mut r, ctx, sy))
                })
                .collect()
        })
        .collect();
    let kappas: Vec<u32> = (1..=cfg.max_kappa).collect();
    let rows = ctxs
        .par_iter()
        .zip(&instances)
        .map(|(ctx, sets)| {
            let table = gauss_table(ctx, GaussMethod::Fft);
            let q = ctx.q();
            let mut row = BilinearRow {
                q,
                instances: sets.len(),
                max_ratio: 0.0,
                factor2_violations: 0,
                factor1_violations: 0,
            };
            for (x, y) in sets {
                let values = bilinear_moments(ctx, &table, x, y, &kappas)?;
                for (&kappa, v) in kappas.iter().zip(&values) {
                    for s in 1..=cfg.max_s {
                        let bound = bilinear_bound(q, x.len() as u64, y.len() as u64, kappa, s);
                        let ratio = v.norm() / bound;
                        row.max_ratio = row.max_ratio.max(ratio);
                        row.factor2_violations += usize::from(ratio > 2.0 * (1.0 + 1e-9));
                        row.factor1_violations += usize::from(ratio > 1.0 + 1e-9);
                    }
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = max0(rows.iter().map(|r| r.max_ratio));
    let checks = vec![
        Check::at_most("bilinear_bound_factor2", max_ratio, 2.0),
        Check::at_most("bilinear_bound_factor1", max_ratio, 1.0).as_finding(),
    ];
    Ok(SuiteOutput {
        payload: Payload::BilinearScan { rows },
        checks,
    })
}

/// Primes in `[lo, hi]`, rejecting an empty range.
pub fn prime_range(lo: u64, hi: u64) -> Result<Vec<u64>> {
    let v = primes_in(lo, hi);
    if v.is_empty() {
        return Err(Error::HypothesisViolated(format!("no primes in [{lo}, {hi}]")));
    }
    Ok(v)
}

pub fn check_prime(p: u64) -> Result<()> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(Error::NonPrime(p))
    }
}
