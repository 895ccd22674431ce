//! Both isotopy residuals: |S(X) − 2^{it}S(X/2)| for g(n) = n^{1.5i}, and
//! |S₋(X) − χ(−1)S₊(X)| for χ(n)λ(n+1) with χ odd mod 3.
//!
//! cargo run --release --example isotopy -- 1e6

use chowla_lab::averaging::ScaleGrid;
use chowla_lab::correlation::{archimedean_isotopy_residual, nonarch_isotopy_residual, CorrelationQuery};
use chowla_lab::functions::{parse_spec, MultiplicativeFunctionSpec};
use chowla_lab::sweep::SweepConfig;

fn main() {
    let max = std::env::args()
        .nth(1)
        .map(|s| s.parse::<f64>().expect("max must be a number"))
        .unwrap_or(1e6);
    let grid = ScaleGrid::spanning(1e3, max, 10.0).expect("bad grid");

    let g = MultiplicativeFunctionSpec::archimedean(1.5);
    let arch = CorrelationQuery::new(vec![g], vec![0], grid.clone());
    let s = archimedean_isotopy_residual(&arch, 2.0, 1.5, SweepConfig::default()).expect("arch");
    println!("archimedean, q = 2, t = 1.5");
    for (x, r) in s.scales.iter().zip(&s.residuals) {
        println!("  X = {x:>10.0}  residual {r:.3e}  (10/X = {:.1e})", 10.0 / x);
    }

    let chi_spec = parse_spec("char(q=3,index=1)").expect("spec");
    let chi = match chi_spec.kind() {
        chowla_lab::functions::FunctionKind::Character(c) => (**c).clone(),
        _ => unreachable!(),
    };
    let q = CorrelationQuery::new(vec![chi_spec, MultiplicativeFunctionSpec::liouville()], vec![0, 1], grid);
    let s = nonarch_isotopy_residual(&q, &chi, SweepConfig::default()).expect("nonarch");
    println!("non-archimedean, chi odd mod 3");
    for (x, r) in s.scales.iter().zip(&s.residuals) {
        println!("  X = {x:>10.0}  residual {r:.3e}");
    }
}
