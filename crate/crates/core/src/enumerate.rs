//! Exact total variation and slice discrepancies by exhaustive enumeration.
//!
//! Every atom of `{0,1}^n` is visited by a depth-first half-split over the
//! coordinates. Each level of the recursion carries the partial products of
//! `Ber(p)` and `Ber(q)` masses, so an atom mass is a fresh product of its `n`
//! factors in coordinate order; there is no division and no running
//! multiply/divide update that could drift.
//!
//! The atom space is split into `2^c` chunks by fixing the first
//! `c = min(n, CHUNK_BITS)` coordinates. Chunks are summed independently
//! and merged in chunk order, so the result does not depend on how many
//! worker threads process the chunks.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::{atom_mass, ParamPair, SubsetIndex};
use crate::sum::{compensated_sum, CompensatedSum};

/// Default ceiling on `n` for exhaustive enumeration (`2^26` atoms).
pub const DEFAULT_ENUM_LIMIT: usize = 26;

/// Number of leading coordinates fixed per work chunk. Independent of the
/// worker count.
const CHUNK_BITS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumConfig {
    /// Largest `n` accepted; larger inputs fail with `DimensionTooLarge`.
    pub limit: usize,
    /// Worker threads. `None` uses the global rayon pool, `Some(1)` runs on
    /// the calling thread.
    pub workers: Option<usize>,
}

impl Default for EnumConfig {
    fn default() -> Self {
        Self {
            limit: DEFAULT_ENUM_LIMIT,
            workers: None,
        }
    }
}

impl EnumConfig {
    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = limit;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers.max(1));
        self
    }

    pub fn sequential() -> Self {
        Self::default().with_workers(1)
    }

    fn check(&self, n: usize) -> Result<()> {
        // The hard ceiling keeps masks inside u64 regardless of the limit.
        if n > self.limit || n >= 63 {
            return Err(Error::DimensionTooLarge {
                n,
                limit: self.limit.min(62),
            });
        }
        Ok(())
    }
}

/// Per-slice discrepancies `Δ_0..Δ_n` with the exact TV.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceReport {
    pub n: usize,
    pub delta: Vec<f64>,
    pub tv_exact: f64,
    /// `|2·TV - Σ_k Δ_k|`.
    pub identity_residual: f64,
}

impl SliceReport {
    pub fn delta(&self, k: usize) -> f64 {
        self.delta[k]
    }

    pub fn sum_delta(&self) -> f64 {
        compensated_sum(self.delta.iter().copied())
    }

    /// `Σ_{k≥2} Δ_k`.
    pub fn tail_sum(&self) -> f64 {
        compensated_sum(self.delta.iter().skip(2).copied())
    }
}

/// Leaf callback for the atom traversal. `k` is the popcount of the atom,
/// `mp` and `mq` its masses under the two measures.
trait AtomVisitor: Send + Sized {
    fn visit(&mut self, k: usize, mp: f64, mq: f64);
    fn merge(&mut self, other: &Self);
}

struct TvVisitor(CompensatedSum);

impl AtomVisitor for TvVisitor {
    #[inline]
    fn visit(&mut self, _k: usize, mp: f64, mq: f64) {
        self.0.add((mp - mq).abs());
    }

    fn merge(&mut self, other: &Self) {
        self.0.merge(&other.0);
    }
}

struct SliceVisitor {
    slices: Vec<CompensatedSum>,
    total: CompensatedSum,
}

impl AtomVisitor for SliceVisitor {
    #[inline]
    fn visit(&mut self, k: usize, mp: f64, mq: f64) {
        let d = (mp - mq).abs();
        self.slices[k].add(d);
        self.total.add(d);
    }

    fn merge(&mut self, other: &Self) {
        for (a, b) in self.slices.iter_mut().zip(&other.slices) {
            a.merge(b);
        }
        self.total.merge(&other.total);
    }
}

struct BhattacharyyaVisitor(CompensatedSum);

impl AtomVisitor for BhattacharyyaVisitor {
    #[inline]
    fn visit(&mut self, _k: usize, mp: f64, mq: f64) {
        self.0.add((mp * mq).sqrt());
    }

    fn merge(&mut self, other: &Self) {
        self.0.merge(&other.0);
    }
}

fn descend<V: AtomVisitor>(p: &[f64], q: &[f64], depth: usize, mp: f64, mq: f64, k: usize, v: &mut V) {
    if depth == p.len() {
        v.visit(k, mp, mq);
        return;
    }
    let (a, b) = (p[depth], q[depth]);
    descend(p, q, depth + 1, mp * (1.0 - a), mq * (1.0 - b), k, v);
    descend(p, q, depth + 1, mp * a, mq * b, k + 1, v);
}

fn run_chunk<V: AtomVisitor>(p: &[f64], q: &[f64], chunk_bits: usize, chunk: usize, mut v: V) -> V {
    let mut mp = 1.0;
    let mut mq = 1.0;
    let mut k = 0;
    for i in 0..chunk_bits {
        if (chunk >> i) & 1 == 1 {
            mp *= p[i];
            mq *= q[i];
            k += 1;
        } else {
            mp *= 1.0 - p[i];
            mq *= 1.0 - q[i];
        }
    }
    descend(p, q, chunk_bits, mp, mq, k, &mut v);
    v
}

fn traverse<V, F>(pair: &ParamPair, cfg: &EnumConfig, make: F) -> Result<V>
where
    V: AtomVisitor,
    F: Fn() -> V + Sync,
{
    let n = pair.n();
    cfg.check(n)?;
    let p = pair.p().values();
    let q = pair.q().values();
    let chunk_bits = n.min(CHUNK_BITS);
    let chunks = 1usize << chunk_bits;

    let partials: Vec<V> = match cfg.workers {
        Some(1) => (0..chunks).map(|c| run_chunk(p, q, chunk_bits, c, make())).collect(),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            pool.install(|| {
                (0..chunks)
                    .into_par_iter()
                    .map(|c| run_chunk(p, q, chunk_bits, c, make()))
                    .collect()
            })
        }
        None => (0..chunks)
            .into_par_iter()
            .map(|c| run_chunk(p, q, chunk_bits, c, make()))
            .collect(),
    };

    let mut iter = partials.into_iter();
    let mut acc = iter.next().expect("at least one chunk");
    for part in iter {
        acc.merge(&part);
    }
    Ok(acc)
}

/// Signed atom discrepancy `P_S(p) - P_S(q)`.
pub fn slice_delta(pair: &ParamPair, s: SubsetIndex) -> Result<f64> {
    Ok(atom_mass(pair.p(), s)? - atom_mass(pair.q(), s)?)
}

/// Masks of popcount `k` below `2^n` in increasing order.
pub fn k_subsets(n: usize, k: usize) -> impl Iterator<Item = u64> {
    let end: u128 = 1u128 << n;
    let start: u128 = if k <= n { (1u128 << k) - 1 } else { end };
    let mut next = Some(start).filter(|&m| m < end);
    std::iter::from_fn(move || {
        let m = next?;
        next = if m == 0 {
            None
        } else {
            // Gosper's hack
            let c = m & m.wrapping_neg();
            let r = m + c;
            let nm = (((r ^ m) >> 2) / c) | r;
            Some(nm).filter(|&x| x < end)
        };
        Some(m as u64)
    })
}

/// `Δ_k = Σ_{|S|=k} |P_S(p) - P_S(q)|`, by direct enumeration of the
/// `C(n, k)` subsets.
pub fn slice_discrepancy(pair: &ParamPair, k: usize) -> Result<f64> {
    let n = pair.n();
    if k > n {
        return Err(Error::SliceOutOfRange { k, n });
    }
    if n > SubsetIndex::MAX_UNIVERSE {
        return Err(Error::UniverseTooLarge { n });
    }
    let mut acc = CompensatedSum::new();
    for mask in k_subsets(n, k) {
        acc.add(slice_delta(pair, SubsetIndex::new(mask, n)?)?.abs());
    }
    Ok(acc.value())
}

/// `½ Σ_x |Ber(p)(x) - Ber(q)(x)|` over all `2^n` atoms.
pub fn tv_exact(pair: &ParamPair, cfg: &EnumConfig) -> Result<f64> {
    let v = traverse(pair, cfg, || TvVisitor(CompensatedSum::new()))?;
    Ok(0.5 * v.0.value())
}

/// All slice discrepancies and the exact TV from one traversal.
pub fn full_slice_report(pair: &ParamPair, cfg: &EnumConfig) -> Result<SliceReport> {
    let n = pair.n();
    let v = traverse(pair, cfg, || SliceVisitor {
        slices: vec![CompensatedSum::new(); n + 1],
        total: CompensatedSum::new(),
    })?;
    let delta: Vec<f64> = v.slices.iter().map(CompensatedSum::value).collect();
    let tv_exact = 0.5 * v.total.value();
    let identity_residual = (2.0 * tv_exact - compensated_sum(delta.iter().copied())).abs();
    Ok(SliceReport {
        n,
        delta,
        tv_exact,
        identity_residual,
    })
}

/// `Σ_x √(Ber(p)(x)·Ber(q)(x))` summed atom by atom.
pub fn bhattacharyya_by_enumeration(pair: &ParamPair, cfg: &EnumConfig) -> Result<f64> {
    let v = traverse(pair, cfg, || BhattacharyyaVisitor(CompensatedSum::new()))?;
    Ok(v.0.value())
}
