//! Two- and three-point Chowla sums E_{n≤X} λ(n)λ(n+1) and
//! E_{n≤X} λ(n)λ(n+1)λ(n+2), both in one sweep.
//!
//! cargo run --release --example chowla_correlations -- 1e7

use chowla_lab::averaging::ScaleGrid;
use chowla_lab::correlation::{CorrelationPlan, CorrelationQuery};
use chowla_lab::functions::MultiplicativeFunctionSpec;
use chowla_lab::sweep::{run_sweep, DynConsumer, SweepConfig};

fn main() {
    let max = std::env::args()
        .nth(1)
        .map(|s| s.parse::<f64>().expect("max must be a number"))
        .unwrap_or(1e7);
    let grid = ScaleGrid::spanning(100.0, max, 10.0).expect("bad grid");
    let lam = MultiplicativeFunctionSpec::liouville;
    let mut two = CorrelationPlan::new(CorrelationQuery::new(vec![lam(), lam()], vec![0, 1], grid.clone()))
        .expect("bad query");
    let mut three = CorrelationPlan::new(CorrelationQuery::new(vec![lam(), lam(), lam()], vec![0, 1, 2], grid))
        .expect("bad query");
    let consumers: &mut [&mut dyn DynConsumer] = &mut [&mut two, &mut three];
    let stats = run_sweep(consumers, SweepConfig::default()).expect("sweep failed");
    let (two, three) = (two.finish().expect("two-point"), three.finish().expect("three-point"));
    println!("{:>12} {:>14} {:>14}", "X", "two-point", "three-point");
    for ((x, a), b) in two.scales.iter().zip(&two.values).zip(&three.values) {
        println!("{x:>12.0} {:>14.3e} {:>14.3e}", a.re, b.re);
    }
    eprintln!("one sweep, {:.2} s", stats.wall_seconds);
}
