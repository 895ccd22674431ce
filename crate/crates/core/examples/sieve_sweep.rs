//! Sweep the factor sieve over [1, N] and report throughput and the
//! summatory Liouville function L(N).
//!
//! cargo run --release --example sieve_sweep -- 100000000

use chowla_lab::sweep::{sweep_one, BlockConsumer, BlockView, SweepConfig, SweepError};

struct Summatory {
    limit: u64,
    total: i64,
}

impl BlockConsumer for Summatory {
    type Partial = i64;

    fn limit(&self) -> u64 {
        self.limit
    }

    fn process(&self, view: &BlockView<'_>) -> Result<i64, SweepError> {
        let b = view.block();
        Ok((view.lo()..view.hi()).map(|n| b.liouville(n) as i64).sum())
    }

    fn absorb(&mut self, partial: i64) {
        self.total += partial;
    }
}

fn main() {
    let limit = std::env::args()
        .nth(1)
        .map(|s| s.parse::<f64>().expect("N must be a number") as u64)
        .unwrap_or(10_000_000);
    let mut c = Summatory { limit, total: 0 };
    let stats = sweep_one(&mut c, SweepConfig::default()).expect("sweep failed");
    println!("L({limit}) = {}", c.total);
    println!(
        "{} blocks, {:.2} s, {:.3e} values/s on {} threads",
        stats.blocks,
        stats.wall_seconds,
        stats.throughput(),
        stats.threads
    );
}
