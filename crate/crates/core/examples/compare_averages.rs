//! Doubly logarithmic averages over integers against logarithmic averages
//! over primes, for a slowly varying f(n) = n^{0.05i}.
//!
//! cargo run --release --example compare_averages

use chowla_lab::averaging::compare_integer_prime_averages;
use chowla_lab::functions::MultiplicativeFunctionSpec;

fn main() {
    let f = MultiplicativeFunctionSpec::archimedean(0.05);
    for x in [1e3, 1e4, 1e5, 1e6] {
        let c = compare_integer_prime_averages(|n| f.value_at(n as i64), 1, x).expect("compare");
        println!(
            "X = {x:>8.0e}  integers {:.4}{:+.4}i  primes {:.4}{:+.4}i  gap {:.4}",
            c.integer_loglog.re, c.integer_loglog.im, c.prime_log.re, c.prime_log.im, c.gap
        );
    }
}
