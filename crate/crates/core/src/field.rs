//! Finite fields F_q with q = p^n, backed by dense discrete-log and trace
//! tables, together with the multiplicative and additive characters.
//!
//! Elements are encoded as integers `Σ c_i p^i` where `c_i` is the
//! coefficient of `α^i` in the polynomial basis over F_p (`α` a root of the
//! modulus). For prime fields the code is the residue itself.
//!
//! Multiplicative characters are indexed by `j ∈ [0, q-1)` relative to the
//! fixed generator `g`: `χ_j(g^k) = e^{2πi jk/(q-1)}`, and `χ_j(0) = 0` for
//! every `j`, including the trivial character.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly;

/// Largest q accepted by default; all tables are dense arrays of length q.
pub const DEFAULT_CEILING: u64 = 1 << 21;

/// An element of F_q by its code in `[0, q)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Elem(pub u32);

impl Elem {
    pub const ZERO: Elem = Elem(0);
    pub const ONE: Elem = Elem(1);

    pub fn code(self) -> u32 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The multiplicative character `χ_j`, stored as `j mod (q-1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CharIndex(pub u32);

impl CharIndex {
    pub const TRIVIAL: CharIndex = CharIndex(0);

    pub fn index(self) -> u32 {
        self.0
    }

    pub fn is_trivial(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for CharIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "j{}", self.0)
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Distinct prime factors in increasing order.
pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// All primes in `[lo, hi]`.
pub fn primes_in(lo: u64, hi: u64) -> Vec<u64> {
    (lo..=hi).filter(|&n| is_prime(n)).collect()
}

/// Configurable construction of a [`FieldCtx`].
#[derive(Clone, Debug)]
pub struct FieldBuilder {
    p: u64,
    n: u32,
    modulus: Option<Vec<u64>>,
    generator: Option<u32>,
    ceiling: u64,
}

impl FieldBuilder {
    pub fn new(p: u64, n: u32) -> Self {
        Self {
            p,
            n,
            modulus: None,
            generator: None,
            ceiling: DEFAULT_CEILING,
        }
    }

    /// Coefficients constant term first, length `n + 1`.
    pub fn modulus(mut self, coeffs: &[u64]) -> Self {
        self.modulus = Some(coeffs.to_vec());
        self
    }

    /// Use a specific primitive element instead of the smallest one.
    pub fn generator(mut self, code: u32) -> Self {
        self.generator = Some(code);
        self
    }

    pub fn ceiling(mut self, ceiling: u64) -> Self {
        self.ceiling = ceiling;
        self
    }

    pub fn build(self) -> Result<FieldCtx> {
        let FieldBuilder {
            p,
            n,
            modulus,
            generator,
            ceiling,
        } = self;
        if !is_prime(p) {
            return Err(Error::NonPrime(p));
        }
        if n == 0 {
            return Err(Error::ZeroDegree);
        }
        let q = p
            .checked_pow(n)
            .filter(|&q| q <= ceiling)
            .ok_or(Error::SizeExceeded { p, n, ceiling })?;

        let modulus = match (n, modulus) {
            (1, Some(m)) => {
                check_degree(&m, 1, p)?;
                None
            }
            (1, None) => None,
            (_, Some(m)) => {
                check_degree(&m, n as usize, p)?;
                let monic = poly::make_monic(&poly::reduce(&m, p), p);
                if !poly::is_irreducible(&monic, p) {
                    return Err(Error::ReducibleModulus(p));
                }
                Some(monic)
            }
            (_, None) => Some(smallest_irreducible(p, n as usize)),
        };

        let raw = RawField {
            p,
            n: n as usize,
            q,
            modulus: modulus.clone(),
        };
        let generator = match generator {
            Some(code) => {
                if u64::from(code) >= q {
                    return Err(Error::ElemOutOfRange {
                        code: code.into(),
                        q,
                    });
                }
                if !raw.is_primitive(code) {
                    return Err(Error::NotGenerator { code });
                }
                code
            }
            None => raw.find_generator(),
        };

        let order = (q - 1) as usize;
        let mut exp = vec![0u32; order];
        let mut dlog = vec![u32::MAX; q as usize];
        let mut x = 1u32;
        for (k, slot) in exp.iter_mut().enumerate() {
            *slot = x;
            dlog[x as usize] = k as u32;
            x = raw.mul(x, generator);
        }
        debug_assert_eq!(x, 1);

        let trace = raw.trace_table();
        Ok(FieldCtx::from_parts(
            p, n, q, modulus, Elem(generator), dlog, exp, trace,
        ))
    }
}

fn check_degree(m: &[u64], n: usize, p: u64) -> Result<()> {
    let got = poly::degree(&poly::reduce(m, p)).unwrap_or(0);
    if m.len() != n + 1 || got != n {
        return Err(Error::ModulusDegree { expected: n, got });
    }
    Ok(())
}

/// Smallest monic irreducible of degree `n`, ordering the lower coefficients
/// lexicographically from `c_{n-1}` down to `c_0`.
fn smallest_irreducible(p: u64, n: usize) -> Vec<u64> {
    let count = p.pow(n as u32);
    for code in 0..count {
        let mut f: Vec<u64> = (0..n).map(|i| (code / p.pow(i as u32)) % p).collect();
        f.push(1);
        // Reject polynomials with zero constant term cheaply.
        if f[0] == 0 {
            continue;
        }
        if poly::is_irreducible(&f, p) {
            return f;
        }
    }
    unreachable!("an irreducible polynomial of every degree exists")
}

/// Field arithmetic straight from the polynomial representation, used
/// before the log tables exist and as an independent reference afterwards.
#[derive(Clone, Debug)]
struct RawField {
    p: u64,
    n: usize,
    q: u64,
    modulus: Option<Vec<u64>>,
}

impl RawField {
    fn digits(&self, code: u32) -> Vec<u64> {
        let mut c = u64::from(code);
        (0..self.n)
            .map(|_| {
                let d = c % self.p;
                c /= self.p;
                d
            })
            .collect()
    }

    fn encode(&self, digits: &[u64]) -> u32 {
        digits
            .iter()
            .rev()
            .fold(0u64, |acc, &d| acc * self.p + d) as u32
    }

    fn mul(&self, a: u32, b: u32) -> u32 {
        match &self.modulus {
            None => ((u64::from(a) * u64::from(b)) % self.p) as u32,
            Some(f) => {
                let prod = poly::mul_mod(&self.digits(a), &self.digits(b), f, self.p);
                let mut d = prod;
                d.resize(self.n, 0);
                self.encode(&d)
            }
        }
    }

    fn add(&self, a: u32, b: u32) -> u32 {
        if self.modulus.is_none() {
            return ((u64::from(a) + u64::from(b)) % self.p) as u32;
        }
        let (da, db) = (self.digits(a), self.digits(b));
        let sum: Vec<u64> = da.iter().zip(&db).map(|(x, y)| (x + y) % self.p).collect();
        self.encode(&sum)
    }

    fn pow(&self, base: u32, mut e: u64) -> u32 {
        let mut acc = 1u32;
        let mut b = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            e >>= 1;
        }
        acc
    }

    fn is_primitive(&self, code: u32) -> bool {
        if code == 0 {
            return false;
        }
        let order = self.q - 1;
        if order == 1 {
            return code == 1;
        }
        prime_factors(order)
            .into_iter()
            .all(|l| self.pow(code, order / l) != 1)
    }

    fn find_generator(&self) -> u32 {
        (1..self.q as u32)
            .find(|&c| self.is_primitive(c))
            .expect("F_q^* is cyclic")
    }

    /// `x + x^p + ... + x^{p^{n-1}}`, reduced to its F_p value.
    fn frobenius_trace(&self, x: u32) -> u32 {
        let mut acc = 0u32;
        let mut y = x;
        for _ in 0..self.n {
            acc = self.add(acc, y);
            y = self.pow(y, self.p);
        }
        debug_assert!(u64::from(acc) < self.p, "trace lands in F_p");
        acc
    }

    fn trace_table(&self) -> Vec<u32> {
        if self.modulus.is_none() {
            return (0..self.q as u32).collect();
        }
        // Tr is F_p-linear, so the traces of the basis α^i determine it.
        let basis: Vec<u64> = (0..self.n)
            .map(|i| u64::from(self.frobenius_trace(self.p.pow(i as u32) as u32)))
            .collect();
        (0..self.q as u32)
            .map(|code| {
                let t: u64 = self
                    .digits(code)
                    .iter()
                    .zip(&basis)
                    .map(|(c, b)| c * b)
                    .sum();
                (t % self.p) as u32
            })
            .collect()
    }
}

/// An immutable finite-field context. Cheap to share across threads.
#[derive(Clone)]
pub struct FieldCtx {
    p: u64,
    n: u32,
    q: u64,
    modulus: Option<Vec<u64>>,
    generator: Elem,
    dlog: Vec<u32>,
    exp: Vec<u32>,
    trace: Vec<u32>,
    one_minus: Vec<u32>,
    mult_roots: Vec<Complex64>,
    add_roots: Vec<Complex64>,
}

impl fmt::Debug for FieldCtx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldCtx")
            .field("p", &self.p)
            .field("n", &self.n)
            .field("q", &self.q)
            .field("modulus", &self.modulus)
            .field("generator", &self.generator)
            .finish_non_exhaustive()
    }
}

/// Builds F_{p^n}; with no modulus the smallest monic irreducible is used.
pub fn build_field(p: u64, n: u32, modulus: Option<&[u64]>) -> Result<FieldCtx> {
    let mut b = FieldBuilder::new(p, n);
    if let Some(m) = modulus {
        b = b.modulus(m);
    }
    b.build()
}

/// `e^{2πi num/den}` with the numerator reduced first, so that large
/// arguments keep full precision.
pub fn unit_root(num: u64, den: u64) -> Complex64 {
    let (s, c) = (TAU * (num % den) as f64 / den as f64).sin_cos();
    Complex64::new(c, s)
}

impl FieldCtx {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        p: u64,
        n: u32,
        q: u64,
        modulus: Option<Vec<u64>>,
        generator: Elem,
        dlog: Vec<u32>,
        exp: Vec<u32>,
        trace: Vec<u32>,
    ) -> Self {
        let order = q - 1;
        let mut ctx = FieldCtx {
            p,
            n,
            q,
            modulus,
            generator,
            dlog,
            exp,
            trace,
            one_minus: Vec::new(),
            mult_roots: (0..order).map(|k| unit_root(k, order)).collect(),
            add_roots: (0..p).map(|k| unit_root(k, p)).collect(),
        };
        ctx.one_minus = (0..q as u32).map(|x| ctx.sub(Elem::ONE, Elem(x)).0).collect();
        ctx
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    /// Order of the character group, `q - 1`.
    pub fn order(&self) -> u64 {
        self.q - 1
    }

    pub fn modulus(&self) -> Option<&[u64]> {
        self.modulus.as_deref()
    }

    pub fn generator(&self) -> Elem {
        self.generator
    }

    /// Discrete log of a nonzero element, `None` for zero.
    pub fn dlog(&self, x: Elem) -> Option<u32> {
        match self.dlog[x.0 as usize] {
            u32::MAX => None,
            k => Some(k),
        }
    }

    /// Rebuilds a context from a stored modulus, generator and discrete-log
    /// table, checking them for consistency. `trace_low` holds the low byte
    /// of every trace and is compared against a fresh computation.
    pub(crate) fn from_stored(
        p: u64,
        n: u32,
        modulus: Option<Vec<u64>>,
        generator: u32,
        dlog_nonzero: &[u32],
        trace_low: &[u8],
    ) -> Result<Self> {
        let corrupt = |what: &str| Error::CorruptCache(what.into());
        if !is_prime(p) {
            return Err(Error::NonPrime(p));
        }
        let q = p
            .checked_pow(n)
            .filter(|&q| n > 0 && q <= DEFAULT_CEILING)
            .ok_or(Error::SizeExceeded { p, n, ceiling: DEFAULT_CEILING })?;
        if let Some(m) = &modulus {
            if m.len() != n as usize + 1 || m[n as usize] != 1 || !poly::is_irreducible(m, p) {
                return Err(corrupt("modulus is not a monic irreducible of degree n"));
            }
        }
        if dlog_nonzero.len() as u64 != q - 1 || trace_low.len() as u64 != q {
            return Err(corrupt("table lengths disagree with q"));
        }
        let raw = RawField {
            p,
            n: n as usize,
            q,
            modulus: modulus.clone(),
        };
        let order = (q - 1) as usize;
        let mut exp = vec![u32::MAX; order];
        let mut dlog = vec![u32::MAX; q as usize];
        for (i, &k) in dlog_nonzero.iter().enumerate() {
            let code = i as u32 + 1;
            if k as usize >= order || exp[k as usize] != u32::MAX {
                return Err(corrupt("dlog table is not a bijection onto 0..q-1"));
            }
            exp[k as usize] = code;
            dlog[code as usize] = k;
        }
        if u64::from(generator) >= q || dlog[generator as usize] != 1 % order as u32 {
            return Err(corrupt("generator does not have discrete log 1"));
        }
        // g^{k+1} = g^k · g along the whole table.
        for k in 0..order {
            if raw.mul(exp[k], generator) != exp[(k + 1) % order] {
                return Err(corrupt("dlog table is not the powers of the generator"));
            }
        }
        let trace = raw.trace_table();
        if trace.iter().zip(trace_low).any(|(&t, &b)| t as u8 != b) {
            return Err(corrupt("trace table mismatch"));
        }
        Ok(FieldCtx::from_parts(
            p, n, q, modulus, Elem(generator), dlog, exp, trace,
        ))
    }

    pub(crate) fn dlog_table(&self) -> &[u32] {
        &self.dlog
    }

    pub(crate) fn trace_table(&self) -> &[u32] {
        &self.trace
    }

    /// `g^k`.
    pub fn exp(&self, k: u64) -> Elem {
        Elem(self.exp[(k % self.order()) as usize])
    }

    pub fn elem(&self, code: u64) -> Result<Elem> {
        if code >= self.q {
            return Err(Error::ElemOutOfRange { code, q: self.q });
        }
        Ok(Elem(code as u32))
    }

    pub fn char_index(&self, j: u64) -> Result<CharIndex> {
        if j >= self.order() {
            return Err(Error::CharOutOfRange {
                index: j,
                order: self.order(),
            });
        }
        Ok(CharIndex(j as u32))
    }

    /// Iterator over all nonzero elements in code order.
    pub fn nonzero(&self) -> impl Iterator<Item = Elem> {
        (1..self.q as u32).map(Elem)
    }

    fn digit_op(&self, a: Elem, b: Elem, op: impl Fn(u64, u64) -> u64) -> Elem {
        let p = self.p;
        let (mut x, mut y) = (u64::from(a.0), u64::from(b.0));
        let mut out = 0u64;
        let mut scale = 1u64;
        for _ in 0..self.n {
            out += op(x % p, y % p) * scale;
            x /= p;
            y /= p;
            scale *= p;
        }
        Elem(out as u32)
    }

    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        let p = self.p;
        if self.n == 1 {
            return Elem(((u64::from(a.0) + u64::from(b.0)) % p) as u32);
        }
        self.digit_op(a, b, |x, y| (x + y) % p)
    }

    pub fn sub(&self, a: Elem, b: Elem) -> Elem {
        let p = self.p;
        if self.n == 1 {
            return Elem(((u64::from(a.0) + p - u64::from(b.0)) % p) as u32);
        }
        self.digit_op(a, b, |x, y| (x + p - y) % p)
    }

    pub fn neg(&self, a: Elem) -> Elem {
        self.sub(Elem::ZERO, a)
    }

    /// `1 - x`, from a precomputed table.
    pub fn one_minus(&self, x: Elem) -> Elem {
        Elem(self.one_minus[x.0 as usize])
    }

    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        match (self.dlog(a), self.dlog(b)) {
            (Some(x), Some(y)) => self.exp(u64::from(x) + u64::from(y)),
            _ => Elem::ZERO,
        }
    }

    pub fn inv(&self, a: Elem) -> Option<Elem> {
        self.dlog(a)
            .map(|k| self.exp(self.order() - u64::from(k)))
    }

    pub fn pow(&self, a: Elem, e: u64) -> Elem {
        match self.dlog(a) {
            Some(k) => self.exp((u64::from(k) * (e % self.order())) % self.order()),
            None if e == 0 => Elem::ONE,
            None => Elem::ZERO,
        }
    }

    /// Multiplication computed from the polynomial representation, without
    /// going through the log tables.
    pub fn mul_direct(&self, a: Elem, b: Elem) -> Elem {
        Elem(self.raw().mul(a.0, b.0))
    }

    fn raw(&self) -> RawField {
        RawField {
            p: self.p,
            n: self.n as usize,
            q: self.q,
            modulus: self.modulus.clone(),
        }
    }

    /// `Tr_{F_q/F_p}(x)` as a residue in `[0, p)`.
    pub fn trace(&self, x: Elem) -> u32 {
        self.trace[x.0 as usize]
    }

    /// The trace by summing the Frobenius orbit `x + x^p + ...`.
    pub fn frobenius_trace(&self, x: Elem) -> u32 {
        self.raw().frobenius_trace(x.0)
    }

    /// Order of `x` in F_q^*, or `None` for zero.
    pub fn mult_order(&self, x: Elem) -> Option<u64> {
        let order = self.order();
        let mut ord = order;
        self.dlog(x)?;
        for l in prime_factors(order) {
            while ord.is_multiple_of(l) && self.pow(x, ord / l) == Elem::ONE {
                ord /= l;
            }
        }
        Some(ord)
    }

    /// `e^{2πi k/(q-1)}`.
    pub fn root(&self, k: u64) -> Complex64 {
        self.mult_roots[(k % self.order()) as usize]
    }

    pub(crate) fn roots(&self) -> &[Complex64] {
        &self.mult_roots
    }

    /// `e^{2πi t/p}` for a residue `t`.
    pub fn add_root(&self, t: u32) -> Complex64 {
        self.add_roots[t as usize]
    }

    pub fn char_mul(&self, a: CharIndex, b: CharIndex) -> CharIndex {
        CharIndex(((u64::from(a.0) + u64::from(b.0)) % self.order()) as u32)
    }

    pub fn char_inverse(&self, a: CharIndex) -> CharIndex {
        CharIndex(((self.order() - u64::from(a.0)) % self.order()) as u32)
    }

    /// The quadratic character, present when q is odd.
    pub fn quadratic_char(&self) -> Option<CharIndex> {
        self.order().is_multiple_of(2).then(|| CharIndex((self.order() / 2) as u32))
    }

    /// `χ_j(x)`; zero at `x = 0` for every `j`.
    pub fn mult_char(&self, j: CharIndex, x: Elem) -> Complex64 {
        match self.dlog(x) {
            Some(k) => self.root(u64::from(j.0) * u64::from(k)),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// `ψ(x) = e^{2πi Tr(x)/p}`.
    pub fn add_char(&self, x: Elem) -> Complex64 {
        self.add_root(self.trace(x))
    }

    /// `G(η_1) ∩ ... ∩ G(η_s)`: every nontrivial `j` other than the inverses
    /// of the excluded characters, ascending.
    pub fn char_domain(&self, excluded: &[CharIndex]) -> Vec<CharIndex> {
        let banned: Vec<u32> = excluded.iter().map(|&e| self.char_inverse(e).0).collect();
        (1..self.order() as u32)
            .filter(|j| !banned.contains(j))
            .map(CharIndex)
            .collect()
    }
}
