mod common;

use chowla_lab::sieve::{sieve_block, sieve_block_capped, PrimeTable};
use chowla_lab::sweep::{sweep_one, BlockConsumer, BlockView, SweepError};
use proptest::prelude::*;

#[test]
fn matches_trial_division_to_1e5() {
    let hi = 100_001;
    let block = sieve_block(1, hi, &PrimeTable::for_limit(hi)).unwrap();
    for n in 1..hi {
        assert_eq!(block.omega(n) as u32, common::big_omega(n), "omega({n})");
        assert_eq!(block.liouville(n), common::liouville(n), "lambda({n})");
        assert_eq!(block.mobius(n).unwrap(), common::mobius(n), "mu({n})");
        assert_eq!(block.largest_prime_factor(n), common::lpf(n), "P+({n})");
        assert_eq!(block.is_squarefree(n), common::squarefree(n), "squarefree({n})");
        assert_eq!(block.is_prime(n), common::is_prime(n), "prime({n})");
    }
}

#[test]
fn high_block_matches_trial_division() {
    let lo = 1_000_000_000_000;
    let hi = lo + 5_000;
    let block = sieve_block(lo, hi, &PrimeTable::for_limit(hi)).unwrap();
    for n in lo..hi {
        assert_eq!(block.omega(n) as u32, common::big_omega(n), "omega({n})");
        assert_eq!(block.largest_prime_factor(n), common::lpf(n), "P+({n})");
        assert_eq!(block.is_squarefree(n), common::squarefree(n), "squarefree({n})");
    }
}

/// Collects `(Ω(n), P⁺(n))` in range order through the sweep driver.
struct Collect {
    limit: u64,
    out: Vec<(u8, u64)>,
}

impl BlockConsumer for Collect {
    type Partial = Vec<(u8, u64)>;

    fn limit(&self) -> u64 {
        self.limit
    }

    fn process(&self, view: &BlockView<'_>) -> Result<Self::Partial, SweepError> {
        let b = view.block();
        let hi = view.hi().min(self.limit + 1);
        Ok((view.lo()..hi.max(view.lo())).map(|n| (b.omega(n), b.largest_prime_factor(n))).collect())
    }

    fn absorb(&mut self, partial: Self::Partial) {
        self.out.extend(partial);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn segmentation_does_not_matter(limit in 1u64..20_000, segment in 1024u64..5000, threads in 1usize..4) {
        let mut whole = Collect { limit, out: Vec::new() };
        sweep_one(&mut whole, common::small(1 << 20, 1)).unwrap();
        let mut split = Collect { limit, out: Vec::new() };
        sweep_one(&mut split, common::small(segment, threads)).unwrap();
        prop_assert_eq!(whole.out.len() as u64, limit);
        prop_assert_eq!(whole.out, split.out);
    }

    #[test]
    fn split_blocks_agree_with_one_block(lo in 1u64..1_000_000, len in 2u64..3000, cut in 1u64..3000) {
        let hi = lo + len;
        let cut = lo + cut % (len - 1) + 1;
        let base = PrimeTable::for_limit(hi);
        let whole = sieve_block(lo, hi, &base).unwrap();
        let left = sieve_block_capped(lo, cut, &base, len).unwrap();
        let right = sieve_block_capped(cut, hi, &base, len).unwrap();
        for n in lo..hi {
            let part = if n < cut { &left } else { &right };
            prop_assert_eq!(whole.omega(n), part.omega(n));
            prop_assert_eq!(whole.largest_prime_factor(n), part.largest_prime_factor(n));
            prop_assert_eq!(whole.is_squarefree(n), part.is_squarefree(n));
        }
    }

    #[test]
    fn liouville_is_completely_multiplicative(m in 1u64..3000, n in 1u64..3000) {
        let base = PrimeTable::for_limit(m * n + 1);
        let at = |k: u64| sieve_block(k, k + 1, &base).unwrap();
        let (a, b, ab) = (at(m), at(n), at(m * n));
        prop_assert_eq!(ab.liouville(m * n), a.liouville(m) * b.liouville(n));
        prop_assert_eq!(ab.omega(m * n), a.omega(m) + b.omega(n));
    }
}
