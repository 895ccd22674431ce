//! Frequency of P⁺(n) < P⁺(n+1) along a geometric grid of scales.
//!
//! cargo run --release --example lpf_race -- 1e7

use chowla_lab::averaging::ScaleGrid;
use chowla_lab::smoothness::lpf_race;
use chowla_lab::sweep::SweepConfig;

fn main() {
    let max = std::env::args()
        .nth(1)
        .map(|s| s.parse::<f64>().expect("max must be a number"))
        .unwrap_or(1e7);
    let grid = ScaleGrid::spanning(10.0, max, 10f64.sqrt()).expect("bad grid");
    let race = lpf_race(&grid, SweepConfig::default()).expect("race failed");
    race.write_csv(std::io::stdout()).expect("write failed");
}
