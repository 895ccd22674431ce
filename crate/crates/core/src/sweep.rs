//! Shared sieve sweeps.
//!
//! A sweep walks `[1, limit]` in blocks. Each registered [`BlockConsumer`]
//! sees every block (extended by the largest halo any consumer asked for)
//! through a [`BlockView`], turns it into a partial result in parallel, and
//! then absorbs the partials one at a time in range order. Because absorption
//! order is fixed, results do not depend on the thread count.

use std::any::Any;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functions::{evaluate_range, FunctionError, MultiplicativeFunctionSpec};
use crate::sieve::{sieve_block_capped, FactorBlock, PrimeTable, SieveError, DEFAULT_SEGMENT};

static SWEEPS_STARTED: AtomicU64 = AtomicU64::new(0);

/// Number of sweeps started in this process.
pub fn sweeps_started() -> u64 {
    SWEEPS_STARTED.load(Ordering::Relaxed)
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Sieve(#[from] SieveError),
    #[error(transparent)]
    Function(#[from] FunctionError),
    #[error("halo {back}+{forward} leaves no room in a segment of {segment}")]
    HaloTooLarge { back: u64, forward: u64, segment: u64 },
    #[error("could not build thread pool: {0}")]
    Pool(String),
    #[error("{0}")]
    Consumer(String),
}

/// Extra integers a consumer needs on either side of each block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Halo {
    pub back: u64,
    pub forward: u64,
}

impl Halo {
    pub fn covering(offsets: impl IntoIterator<Item = i64>) -> Self {
        let mut h = Halo::default();
        for s in offsets {
            if s < 0 {
                h.back = h.back.max(s.unsigned_abs());
            } else {
                h.forward = h.forward.max(s as u64);
            }
        }
        h
    }

    pub fn max(self, other: Halo) -> Halo {
        Halo {
            back: self.back.max(other.back),
            forward: self.forward.max(other.forward),
        }
    }
}

/// A sieved block with its core range marked.
pub struct BlockView<'a> {
    block: &'a FactorBlock,
    lo: u64,
    hi: u64,
}

impl<'a> BlockView<'a> {
    /// Wrap a block whose core is the whole block.
    pub fn whole(block: &'a FactorBlock) -> Self {
        Self {
            block,
            lo: block.lo(),
            hi: block.hi(),
        }
    }

    /// The underlying, halo-extended block.
    pub fn block(&self) -> &'a FactorBlock {
        self.block
    }

    /// Core range start.
    pub fn lo(&self) -> u64 {
        self.lo
    }

    /// Core range end (exclusive).
    pub fn hi(&self) -> u64 {
        self.hi
    }

    /// Values of `g` over the extended block.
    pub fn evaluate(&self, g: &MultiplicativeFunctionSpec) -> Result<ExtendedValues, FunctionError> {
        Ok(ExtendedValues {
            lo: self.block.lo(),
            values: evaluate_range(g, self.block)?,
        })
    }
}

/// Function values over an extended block, indexed by `n`.
pub struct ExtendedValues {
    lo: u64,
    values: Vec<num_complex::Complex64>,
}

impl ExtendedValues {
    /// `g(m)`, zero for `m ≤ 0`. `m` must lie inside the extended block
    /// when positive.
    #[inline]
    pub fn at(&self, m: i64) -> num_complex::Complex64 {
        if m <= 0 {
            return num_complex::Complex64::new(0.0, 0.0);
        }
        self.values[(m as u64 - self.lo) as usize]
    }
}

/// Something that folds sieve blocks into a result.
pub trait BlockConsumer: Send + Sync {
    type Partial: Send;

    /// Largest core `n` this consumer needs.
    fn limit(&self) -> u64;

    fn halo(&self) -> Halo {
        Halo::default()
    }

    /// Pure per-block work; runs in parallel.
    fn process(&self, view: &BlockView<'_>) -> Result<Self::Partial, SweepError>;

    /// Called once per block, in increasing range order.
    fn absorb(&mut self, partial: Self::Partial);
}

/// Object-safe form of [`BlockConsumer`], used to mix consumers in a sweep.
pub trait DynConsumer: Send + Sync {
    fn limit(&self) -> u64;
    fn halo(&self) -> Halo;
    fn process_dyn(&self, view: &BlockView<'_>) -> Result<Box<dyn Any + Send>, SweepError>;
    fn absorb_dyn(&mut self, partial: Box<dyn Any + Send>);
}

impl<C: BlockConsumer> DynConsumer for C
where
    C::Partial: 'static,
{
    fn limit(&self) -> u64 {
        BlockConsumer::limit(self)
    }

    fn halo(&self) -> Halo {
        BlockConsumer::halo(self)
    }

    fn process_dyn(&self, view: &BlockView<'_>) -> Result<Box<dyn Any + Send>, SweepError> {
        Ok(Box::new(self.process(view)?))
    }

    fn absorb_dyn(&mut self, partial: Box<dyn Any + Send>) {
        let p = partial
            .downcast::<C::Partial>()
            .expect("partial produced by this consumer");
        self.absorb(*p);
    }
}

/// Sweep settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Maximum extended block length.
    pub segment: u64,
    /// Worker threads; 0 means the rayon default.
    pub threads: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            segment: DEFAULT_SEGMENT,
            threads: 0,
        }
    }
}

/// Counters for one sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepStats {
    pub limit: u64,
    pub blocks: u64,
    /// Integers sieved, halos included.
    pub values_sieved: u64,
    pub sieve_seconds: f64,
    pub wall_seconds: f64,
    pub threads: usize,
}

impl SweepStats {
    /// Sieve throughput in integers per wall-clock second.
    pub fn throughput(&self) -> f64 {
        if self.wall_seconds > 0.0 {
            self.values_sieved as f64 / self.wall_seconds
        } else {
            0.0
        }
    }
}

/// Run all `consumers` over one shared pass of `[1, max limit]`.
pub fn run_sweep(
    consumers: &mut [&mut dyn DynConsumer],
    config: SweepConfig,
) -> Result<SweepStats, SweepError> {
    let start = Instant::now();
    let limit = consumers.iter().map(|c| c.limit()).max().unwrap_or(0);
    let halo = consumers
        .iter()
        .map(|c| c.halo())
        .fold(Halo::default(), Halo::max);
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if config.threads > 0 {
            b = b.num_threads(config.threads);
        }
        b.build().map_err(|e| SweepError::Pool(e.to_string()))?
    };
    let mut stats = SweepStats {
        limit,
        threads: pool.current_num_threads(),
        ..SweepStats::default()
    };
    if limit == 0 || consumers.is_empty() {
        stats.wall_seconds = start.elapsed().as_secs_f64();
        return Ok(stats);
    }
    SWEEPS_STARTED.fetch_add(1, Ordering::Relaxed);

    let pad = halo.back + halo.forward;
    if pad >= config.segment {
        return Err(SweepError::HaloTooLarge {
            back: halo.back,
            forward: halo.forward,
            segment: config.segment,
        });
    }
    let core_len = config.segment - pad;
    let ext_hi_max = limit + 1 + halo.forward;
    let base = PrimeTable::for_limit(ext_hi_max);

    let cores: Vec<(u64, u64)> = {
        let mut v = Vec::new();
        let mut lo = 1;
        while lo <= limit {
            let hi = (lo + core_len).min(limit + 1);
            v.push((lo, hi));
            lo = hi;
        }
        v
    };
    log::debug!(
        "sweep over [1, {limit}] in {} blocks, halo {halo:?}, {} threads",
        cores.len(),
        stats.threads
    );

    // Enough blocks in flight to keep every worker busy without holding the
    // whole range in memory.
    let batch = stats.threads.max(1) * 2;
    for chunk in cores.chunks(batch) {
        let shared: &[&mut dyn DynConsumer] = consumers;
        let results: Vec<Result<(Vec<Box<dyn Any + Send>>, u64, f64), SweepError>> =
            pool.install(|| {
                chunk
                    .par_iter()
                    .map(|&(lo, hi)| {
                        let t0 = Instant::now();
                        let ext_lo = lo.saturating_sub(halo.back).max(1);
                        let ext_hi = hi + halo.forward;
                        let block = sieve_block_capped(ext_lo, ext_hi, &base, config.segment)?;
                        let sieve_time = t0.elapsed().as_secs_f64();
                        let view = BlockView {
                            block: &block,
                            lo,
                            hi,
                        };
                        let parts = shared
                            .iter()
                            .map(|c| {
                                if lo > c.limit() {
                                    // Keep the absorb sequence uniform.
                                    let empty = BlockView {
                                        block: &block,
                                        lo,
                                        hi: lo,
                                    };
                                    c.process_dyn(&empty)
                                } else {
                                    c.process_dyn(&view)
                                }
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        Ok((parts, ext_hi - ext_lo, sieve_time))
                    })
                    .collect()
            });
        for r in results {
            let (parts, sieved, sieve_time) = r?;
            stats.blocks += 1;
            stats.values_sieved += sieved;
            stats.sieve_seconds += sieve_time;
            for (c, p) in consumers.iter_mut().zip(parts) {
                c.absorb_dyn(p);
            }
        }
    }
    stats.wall_seconds = start.elapsed().as_secs_f64();
    log::info!(
        "sweep [1, {limit}]: {} blocks, {:.3e} values/s",
        stats.blocks,
        stats.throughput()
    );
    Ok(stats)
}

/// Sweep a single consumer.
pub fn sweep_one<C>(consumer: &mut C, config: SweepConfig) -> Result<SweepStats, SweepError>
where
    C: BlockConsumer,
    C::Partial: 'static,
{
    run_sweep(&mut [consumer as &mut dyn DynConsumer], config)
}

/// Thread count from the `CHOWLA_THREADS` environment variable, if set.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("CHOWLA_THREADS").ok()?.trim().parse().ok()
}
