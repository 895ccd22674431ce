//! Windowed logarithmic three-point correlations of λ₃ against 1/√2.
//!
//! cargo run --release --example three_point -- 1e7

use chowla_lab::correlation::three_point_bound_check;
use chowla_lab::functions::MultiplicativeFunctionSpec;
use chowla_lab::sweep::SweepConfig;

fn main() {
    let x = std::env::args()
        .nth(1)
        .map(|s| s.parse::<f64>().expect("x must be a number"))
        .unwrap_or(1e7);
    let g = MultiplicativeFunctionSpec::lambda_q(3).expect("lambda_3");
    let windows = [(x, 10.0), (x, 1e2), (x, 1e3)];
    for shifts in [[0, 1, 2], [0, 1, 3], [0, 2, 4]] {
        let r = three_point_bound_check(&g, shifts, &windows, SweepConfig::default()).expect("check");
        for w in &r.windows {
            println!("shifts {shifts:?}  x = {:.0e}  omega = {:>5}  |corr| = {:.4}", w.x, w.omega, w.magnitude);
        }
    }
}
