//! Segmented factor sieve.
//!
//! A [`FactorBlock`] holds, for every `n` in a half-open range `[lo, hi)`,
//! the number of prime factors with multiplicity `Ω(n)`, the largest prime
//! factor `P⁺(n)` (with `P⁺(1) = 1`), a squarefree flag and the Liouville
//! sign `λ(n) = (-1)^Ω(n)`.
//!
//! Each base prime `p ≤ √hi` walks the multiples of `p, p², p³, …` inside the
//! block, bumping `Ω` and multiplying a running product of the small part of
//! `n`. Whatever is left after the walk (`n / small_part`) is either 1 or a
//! single prime above `√hi`, which is then the largest prime factor.

mod cache;
mod primes;

use bitvec::prelude::*;
use thiserror::Error;

pub use cache::{read_block, write_block, BlockCache, CACHE_MAGIC, CACHE_VERSION};
pub use primes::{isqrt, prime_iter, PrimeIter, PrimeTable};

/// Default number of integers per block.
pub const DEFAULT_SEGMENT: u64 = 1 << 22;

/// Largest supported exclusive upper bound.
pub const MAX_HI: u64 = 1 << 63;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SieveError {
    #[error("invalid range [{lo}, {hi}): need 1 <= lo < hi <= 2^63")]
    InvalidRange { lo: u64, hi: u64 },
    #[error("block [{lo}, {hi}) has {len} integers, segment cap is {cap}")]
    RangeTooLarge { lo: u64, hi: u64, len: u64, cap: u64 },
    #[error("base primes up to {bound} cannot sieve up to {hi}")]
    InsufficientBasePrimes { bound: u64, hi: u64 },
    #[error("{n} is outside block [{lo}, {hi})")]
    OutOfRange { n: u64, lo: u64, hi: u64 },
}

pub type Bits = BitVec<u64, Lsb0>;

/// Exact arithmetic data for a contiguous range of positive integers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorBlock {
    lo: u64,
    hi: u64,
    omega: Vec<u8>,
    lpf_largest: Vec<u64>,
    squarefree: Bits,
    /// Bit set where `λ(n) = -1`.
    liouville: Bits,
}

impl FactorBlock {
    pub(crate) fn from_parts(
        lo: u64,
        hi: u64,
        omega: Vec<u8>,
        lpf_largest: Vec<u64>,
        squarefree: Bits,
        liouville: Bits,
    ) -> Self {
        Self {
            lo,
            hi,
            omega,
            lpf_largest,
            squarefree,
            liouville,
        }
    }

    pub fn lo(&self) -> u64 {
        self.lo
    }

    pub fn hi(&self) -> u64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn contains(&self, n: u64) -> bool {
        (self.lo..self.hi).contains(&n)
    }

    #[inline]
    fn idx(&self, n: u64) -> usize {
        debug_assert!(self.contains(n), "{n} not in [{}, {})", self.lo, self.hi);
        (n - self.lo) as usize
    }

    /// `Ω(n)`; panics (in debug builds) if `n` is outside the block.
    #[inline]
    pub fn omega(&self, n: u64) -> u8 {
        self.omega[self.idx(n)]
    }

    #[inline]
    pub fn largest_prime_factor(&self, n: u64) -> u64 {
        self.lpf_largest[self.idx(n)]
    }

    #[inline]
    pub fn is_squarefree(&self, n: u64) -> bool {
        self.squarefree[self.idx(n)]
    }

    #[inline]
    pub fn is_prime(&self, n: u64) -> bool {
        self.omega[self.idx(n)] == 1
    }

    /// `λ(n)` as `+1` or `-1`.
    #[inline]
    pub fn liouville(&self, n: u64) -> i8 {
        if self.liouville[self.idx(n)] {
            -1
        } else {
            1
        }
    }

    pub fn omega_slice(&self) -> &[u8] {
        &self.omega
    }

    pub fn lpf_slice(&self) -> &[u64] {
        &self.lpf_largest
    }

    pub fn squarefree_bits(&self) -> &BitSlice<u64, Lsb0> {
        &self.squarefree
    }

    pub fn liouville_bits(&self) -> &BitSlice<u64, Lsb0> {
        &self.liouville
    }

    /// Checked `μ(n)`.
    pub fn mobius(&self, n: u64) -> Result<i8, SieveError> {
        if !self.contains(n) {
            return Err(SieveError::OutOfRange {
                n,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(self.mobius_unchecked(n))
    }

    #[inline]
    pub(crate) fn mobius_unchecked(&self, n: u64) -> i8 {
        if self.is_squarefree(n) {
            self.liouville(n)
        } else {
            0
        }
    }
}

/// `μ(n)` for `n` in the block: `λ(n)` on squarefree integers, zero elsewhere.
pub fn mobius(block: &FactorBlock, n: u64) -> Result<i8, SieveError> {
    block.mobius(n)
}

/// Sieve `[lo, hi)` with the default segment cap.
pub fn sieve_block(lo: u64, hi: u64, base: &PrimeTable) -> Result<FactorBlock, SieveError> {
    sieve_block_capped(lo, hi, base, DEFAULT_SEGMENT)
}

/// Sieve `[lo, hi)`, rejecting blocks longer than `cap`.
pub fn sieve_block_capped(
    lo: u64,
    hi: u64,
    base: &PrimeTable,
    cap: u64,
) -> Result<FactorBlock, SieveError> {
    if lo < 1 || lo >= hi || hi > MAX_HI {
        return Err(SieveError::InvalidRange { lo, hi });
    }
    let len = hi - lo;
    if len > cap {
        return Err(SieveError::RangeTooLarge { lo, hi, len, cap });
    }
    if !base.covers(hi) {
        return Err(SieveError::InsufficientBasePrimes {
            bound: base.bound(),
            hi,
        });
    }
    let len = len as usize;
    let mut omega = vec![0u8; len];
    let mut lpf = vec![1u64; len];
    let mut small_part = vec![1u64; len];
    let mut squarefree: Bits = BitVec::repeat(true, len);

    let max_n = hi - 1;
    for &p in base.primes() {
        if p.saturating_mul(p) > max_n {
            break;
        }
        // Multiples of p set the running largest factor; primes ascend, so the
        // last writer wins.
        let mut m = lo.div_ceil(p) * p;
        while m < hi {
            let i = (m - lo) as usize;
            omega[i] += 1;
            small_part[i] *= p;
            lpf[i] = p;
            m += p;
        }
        let mut pk = p * p;
        let mut square = true;
        while pk <= max_n {
            let mut m = lo.div_ceil(pk) * pk;
            while m < hi {
                let i = (m - lo) as usize;
                omega[i] += 1;
                small_part[i] *= p;
                if square {
                    squarefree.set(i, false);
                }
                m += pk;
            }
            square = false;
            pk = match pk.checked_mul(p) {
                Some(v) => v,
                None => break,
            };
        }
    }

    let mut liouville: Bits = BitVec::repeat(false, len);
    for i in 0..len {
        let n = lo + i as u64;
        let s = small_part[i];
        if s != n {
            // The cofactor has no prime factor below √hi, so it is prime.
            omega[i] += 1;
            lpf[i] = n / s;
        }
        if omega[i] & 1 == 1 {
            liouville.set(i, true);
        }
    }

    Ok(FactorBlock {
        lo,
        hi,
        omega,
        lpf_largest: lpf,
        squarefree,
        liouville,
    })
}
