//! Dense polynomials over F_p, constant term first. Only what field
//! construction needs: reduction, multiplication modulo f, gcd and the
//! Rabin irreducibility test.

use crate::field::prime_factors;

pub fn reduce(a: &[u64], p: u64) -> Vec<u64> {
    let mut out: Vec<u64> = a.iter().map(|c| c % p).collect();
    trim(&mut out);
    out
}

fn trim(a: &mut Vec<u64>) {
    while a.last() == Some(&0) {
        a.pop();
    }
}

/// `None` for the zero polynomial.
pub fn degree(a: &[u64]) -> Option<usize> {
    a.iter().rposition(|&c| c != 0)
}

pub fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a % p, p - 2, p)
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    acc
}

pub fn make_monic(a: &[u64], p: u64) -> Vec<u64> {
    match degree(a) {
        None => Vec::new(),
        Some(d) => {
            let inv = inv_mod(a[d], p);
            a[..=d].iter().map(|c| c * inv % p).collect()
        }
    }
}

/// Remainder of `a` modulo a nonzero `f`.
pub fn rem(a: &[u64], f: &[u64], p: u64) -> Vec<u64> {
    let df = degree(f).expect("division by zero polynomial");
    let lead_inv = inv_mod(f[df], p);
    let mut r = reduce(a, p);
    while let Some(dr) = degree(&r) {
        if dr < df {
            break;
        }
        let factor = r[dr] * lead_inv % p;
        let shift = dr - df;
        for (i, &c) in f[..=df].iter().enumerate() {
            r[shift + i] = (r[shift + i] + p - factor * c % p) % p;
        }
        trim(&mut r);
    }
    r
}

pub fn mul_mod(a: &[u64], b: &[u64], f: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut prod = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + x * y) % p;
        }
    }
    rem(&prod, f, p)
}

fn pow_poly_mod(base: &[u64], mut e: u64, f: &[u64], p: u64) -> Vec<u64> {
    let mut acc = vec![1u64];
    let mut b = rem(base, f, p);
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(&acc, &b, f, p);
        }
        b = mul_mod(&b, &b, f, p);
        e >>= 1;
    }
    rem(&acc, f, p)
}

fn sub(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let len = a.len().max(b.len());
    let mut out: Vec<u64> = (0..len)
        .map(|i| {
            let x = a.get(i).copied().unwrap_or(0);
            let y = b.get(i).copied().unwrap_or(0);
            (x + p - y) % p
        })
        .collect();
    trim(&mut out);
    out
}

pub fn gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut x = reduce(a, p);
    let mut y = reduce(b, p);
    while degree(&y).is_some() {
        let r = rem(&x, &y, p);
        x = y;
        y = r;
    }
    make_monic(&x, p)
}

/// Rabin's test: `f` of degree n is irreducible iff `x^{p^n} ≡ x (mod f)`
/// and `gcd(f, x^{p^d} - x) = 1` for every proper divisor `d = n/ℓ`.
pub fn is_irreducible(f: &[u64], p: u64) -> bool {
    let f = reduce(f, p);
    let n = match degree(&f) {
        None | Some(0) => return false,
        Some(1) => return true,
        Some(n) => n,
    };
    let x = vec![0u64, 1];
    // frob[d] = x^{p^d} mod f
    let mut frob = vec![rem(&x, &f, p)];
    for d in 1..=n {
        let next = pow_poly_mod(&frob[d - 1], p, &f, p);
        frob.push(next);
    }
    if sub(&frob[n], &x, p) != Vec::<u64>::new() {
        return false;
    }
    prime_factors(n as u64).into_iter().all(|l| {
        let d = n / l as usize;
        let g = gcd(&f, &sub(&frob[d], &x, p), p);
        degree(&g) == Some(0)
    })
}
