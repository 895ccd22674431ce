use super::SieveError;

/// All primes up to (and including) `bound`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeTable {
    bound: u64,
    primes: Vec<u64>,
}

impl PrimeTable {
    /// Plain Eratosthenes over `[0, bound]`.
    pub fn new(bound: u64) -> Self {
        let limit = bound as usize;
        let mut composite = vec![false; limit + 1];
        let mut primes = Vec::new();
        for i in 2..=limit {
            if composite[i] {
                continue;
            }
            primes.push(i as u64);
            let mut j = i * i;
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
        Self { bound, primes }
    }

    /// Smallest table able to sieve every `n < hi`.
    pub fn for_limit(hi: u64) -> Self {
        Self::new(isqrt(hi) + 1)
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// Whether this table can sieve a block ending (exclusively) at `hi`.
    pub fn covers(&self, hi: u64) -> bool {
        (self.bound as u128) * (self.bound as u128) >= hi as u128
    }
}

/// Floor of the square root, exact for all `u64`.
pub fn isqrt(n: u64) -> u64 {
    if n < 2 {
        return n;
    }
    let mut r = (n as f64).sqrt() as u64;
    while (r as u128) * (r as u128) > n as u128 {
        r -= 1;
    }
    while ((r + 1) as u128) * ((r + 1) as u128) <= n as u128 {
        r += 1;
    }
    r
}

const ITER_SEGMENT: u64 = 1 << 18;

/// Ascending stream of the primes in `[lo, hi)`, produced by a segmented
/// sieve over odd numbers.
pub struct PrimeIter {
    next_lo: u64,
    hi: u64,
    base: Vec<u64>,
    buf: Vec<u64>,
    pos: usize,
}

/// Primes in `[lo, hi)` in ascending order.
pub fn prime_iter(lo: u64, hi: u64) -> Result<PrimeIter, SieveError> {
    if lo < 1 || lo >= hi {
        return Err(SieveError::InvalidRange { lo, hi });
    }
    let base = PrimeTable::for_limit(hi).primes;
    Ok(PrimeIter {
        next_lo: lo,
        hi,
        base,
        buf: Vec::new(),
        pos: 0,
    })
}

impl PrimeIter {
    fn refill(&mut self) -> bool {
        self.buf.clear();
        self.pos = 0;
        while self.buf.is_empty() && self.next_lo < self.hi {
            let lo = self.next_lo;
            let hi = lo.saturating_add(ITER_SEGMENT).min(self.hi);
            self.next_lo = hi;
            sieve_segment(lo, hi, &self.base, &mut self.buf);
        }
        !self.buf.is_empty()
    }
}

fn sieve_segment(lo: u64, hi: u64, base: &[u64], out: &mut Vec<u64>) {
    let len = (hi - lo) as usize;
    let mut composite = vec![false; len];
    for &p in base {
        if p * p >= hi {
            break;
        }
        let start = (p * p).max(lo.div_ceil(p) * p);
        let mut m = start;
        while m < hi {
            composite[(m - lo) as usize] = true;
            m += p;
        }
    }
    for (i, &c) in composite.iter().enumerate() {
        let n = lo + i as u64;
        if !c && n >= 2 {
            out.push(n);
        }
    }
}

impl Iterator for PrimeIter {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        if self.pos >= self.buf.len() && !self.refill() {
            return None;
        }
        let p = self.buf[self.pos];
        self.pos += 1;
        Some(p)
    }
}
