//! Pretentious distance profiles, and the nearest twisted character to a
//! given function.
//!
//! cargo run --release --example pretense -- 1e7

use chowla_lab::averaging::ScaleGrid;
use chowla_lab::functions::{parse_spec, MultiplicativeFunctionSpec};
use chowla_lab::pretense::{fit_twisted_character, weak_pretension_profile, FitSearch};

fn main() {
    let max = std::env::args()
        .nth(1)
        .map(|s| s.parse::<f64>().expect("max must be a number"))
        .unwrap_or(1e7);
    let grid = ScaleGrid::spanning(10.0, max, 10.0).expect("bad grid");
    let one = MultiplicativeFunctionSpec::one();
    for g in ["liouville", "char(q=4,index=0)", "archimedean(t=0.01)"] {
        let g = parse_spec(g).expect("spec");
        let p = weak_pretension_profile(&g, &one, &grid).expect("profile");
        let last = p.dist_sq.last().copied().unwrap_or(f64::NAN);
        println!("D({}, 1; {max:.0e})^2 = {last:.4}  {:?}", g.label(), p.verdict);
    }
    let g = parse_spec("twist(char(q=5,index=2), t=0.7)").expect("spec");
    let fit = fit_twisted_character(&g, &FitSearch::new(8, 2.0, 1e5)).expect("fit");
    println!(
        "nearest to {}: modulus {} index {} t = {:.3}, D^2 = {:.4}",
        fit.g, fit.modulus, fit.index, fit.t, fit.dist_sq
    );
}
