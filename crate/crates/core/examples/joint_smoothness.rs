//! Joint smoothness of n and n+1 against the Dickman prediction
//! ρ(1/α)ρ(1/β).
//!
//! cargo run --release --example joint_smoothness -- 1/2 1/2 1e7

use chowla_lab::averaging::ScaleGrid;
use chowla_lab::smoothness::{joint_smooth_density, DickmanSolver, Exponent};
use chowla_lab::sweep::SweepConfig;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let alpha: Exponent = args.first().map_or("1/2", |s| s).parse().expect("bad alpha");
    let beta: Exponent = args.get(1).map_or("1/2", |s| s).parse().expect("bad beta");
    let max: f64 = args.get(2).map_or("1e7", |s| s).parse().expect("bad max");
    let grid = ScaleGrid::spanning(100.0, max, 10.0).expect("bad grid");
    let solver = DickmanSolver::default();
    let s = joint_smooth_density(alpha, beta, &grid, &solver, SweepConfig::default()).expect("run failed");
    println!("alpha = {alpha}, beta = {beta}, target = {:.6}", s.target);
    println!("{:>12} {:>10} {:>10}", "X", "n^alpha", "X^alpha");
    for ((x, e), f) in s.scales.iter().zip(&s.empirical).zip(&s.empirical_fixed) {
        println!("{x:>12.0} {e:>10.6} {f:>10.6}");
    }
}
