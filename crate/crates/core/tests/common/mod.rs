//! Trial-division oracles shared by the integration tests.
#![allow(dead_code)]

use chowla_lab::sweep::SweepConfig;

/// Prime factorisation by trial division, primes ascending.
pub fn factor(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn big_omega(n: u64) -> u32 {
    factor(n).iter().map(|&(_, e)| e).sum()
}

pub fn liouville(n: u64) -> i8 {
    if big_omega(n) % 2 == 0 {
        1
    } else {
        -1
    }
}

pub fn squarefree(n: u64) -> bool {
    factor(n).iter().all(|&(_, e)| e == 1)
}

pub fn mobius(n: u64) -> i8 {
    if squarefree(n) {
        liouville(n)
    } else {
        0
    }
}

/// `P⁺(n)`, with `P⁺(1) = 1`.
pub fn lpf(n: u64) -> u64 {
    factor(n).last().map_or(1, |&(p, _)| p)
}

pub fn is_prime(n: u64) -> bool {
    n >= 2 && factor(n) == [(n, 1)]
}

/// Small segments so that tests cross many block boundaries.
pub fn small(segment: u64, threads: usize) -> SweepConfig {
    SweepConfig { segment, threads }
}
