//! Binary cache of a built field context.
//!
//! Layout, all integers little-endian: magic `JQS1`; `u64` p, n, q and the
//! generator code; `n+1` `u64` modulus coefficients, constant term first
//! (two zeros for a prime field); `q-1` `u32` discrete logs for codes
//! `1..q-1`; `q` `u8` traces. Traces are below `p`, so for `p > 256` only
//! their low byte is stored; the reader recomputes traces from the modulus
//! and checks those bytes.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::{build_field, FieldCtx};

pub const MAGIC: &[u8; 4] = b"JQS1";

pub fn encode(ctx: &FieldCtx) -> Vec<u8> {
    let q = ctx.q() as usize;
    let n = ctx.n() as usize;
    let mut out = Vec::with_capacity(4 + 8 * (4 + n + 1) + 4 * (q - 1) + q);
    out.extend_from_slice(MAGIC);
    for v in [ctx.p(), u64::from(ctx.n()), ctx.q(), u64::from(ctx.generator().0)] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let modulus = ctx.modulus().map_or_else(|| vec![0, 0], <[u64]>::to_vec);
    for c in modulus {
        out.extend_from_slice(&c.to_le_bytes());
    }
    for &k in &ctx.dlog_table()[1..] {
        out.extend_from_slice(&k.to_le_bytes());
    }
    out.extend(ctx.trace_table().iter().map(|&t| t as u8));
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).ok_or(Error::Truncated)?;
        let chunk = self.bytes.get(self.pos..end).ok_or(Error::Truncated)?;
        self.pos = end;
        Ok(chunk)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<FieldCtx> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).map_err(|_| Error::BadMagic)? != MAGIC {
        return Err(Error::BadMagic);
    }
    let (p, n, q, generator) = (r.u64()?, r.u64()?, r.u64()?, r.u64()?);
    let n32 = u32::try_from(n)
        .ok()
        .filter(|&n| n > 0 && n <= 64)
        .ok_or_else(|| Error::CorruptCache(format!("degree {n}")))?;
    if p.checked_pow(n32) != Some(q) {
        return Err(Error::CorruptCache(format!("q = {q} is not {p}^{n}")));
    }
    let generator = u32::try_from(generator)
        .map_err(|_| Error::CorruptCache(format!("generator {generator}")))?;
    let modulus: Vec<u64> = (0..=n).map(|_| r.u64()).collect::<Result<_>>()?;
    let dlog: Vec<u32> = r
        .take(4 * (q as usize - 1))?
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let trace = r.take(q as usize)?;
    if r.pos != bytes.len() {
        return Err(Error::CorruptCache("trailing bytes".into()));
    }
    let modulus = if n == 1 {
        if modulus != [0, 0] {
            return Err(Error::CorruptCache("prime field with a modulus".into()));
        }
        None
    } else {
        Some(modulus)
    };
    FieldCtx::from_stored(p, n32, modulus, generator, &dlog, trace)
}

pub fn write_cache(ctx: &FieldCtx, path: &Path) -> Result<()> {
    fs::write(path, encode(ctx))?;
    Ok(())
}

pub fn read_cache(path: &Path) -> Result<FieldCtx> {
    decode(&fs::read(path)?)
}

pub fn cache_roundtrip(ctx: &FieldCtx, path: &Path) -> Result<FieldCtx> {
    write_cache(ctx, path)?;
    read_cache(path)
}

/// File name used for the default-modulus context of `F_{p^n}`.
pub fn cache_path(dir: &Path, p: u64, n: u32) -> PathBuf {
    dir.join(format!("F{p}^{n}.jqs"))
}

/// Builds the default context for `F_{p^n}`, reading it from `dir` when a
/// valid file is present and writing it otherwise. A file that fails to
/// decode is replaced.
pub fn load_or_build(dir: Option<&Path>, p: u64, n: u32) -> Result<FieldCtx> {
    let Some(dir) = dir else {
        return build_field(p, n, None);
    };
    let path = cache_path(dir, p, n);
    if let Ok(ctx) = read_cache(&path) {
        if ctx.p() == p && ctx.n() == n {
            return Ok(ctx);
        }
    }
    let ctx = build_field(p, n, None)?;
    fs::create_dir_all(dir)?;
    write_cache(&ctx, &path)?;
    Ok(ctx)
}
