//! Number of distinct λ sign patterns of length K seen up to N, against
//! 2^K and the K+5 threshold.
//!
//! cargo run --release --example growth_report -- 1e7

use chowla_lab::functions::MultiplicativeFunctionSpec;
use chowla_lab::patterns::growth_report;
use chowla_lab::sweep::SweepConfig;

fn main() {
    let n = std::env::args()
        .nth(1)
        .map(|s| s.parse::<f64>().expect("N must be a number") as u64)
        .unwrap_or(10_000_000);
    let ks: Vec<usize> = (1..=20).collect();
    let r = growth_report(&ks, n, &MultiplicativeFunctionSpec::liouville(), SweepConfig::default())
        .expect("growth report failed");
    println!("{:>3} {:>9} {:>9} {:>5}", "K", "s(K)", "2^K", "K+5");
    for row in &r.rows {
        println!("{:>3} {:>9} {:>9} {:>5}", row.k, row.s, row.full.map_or("-".into(), |f| f.to_string()), row.k_plus_5);
    }
}
