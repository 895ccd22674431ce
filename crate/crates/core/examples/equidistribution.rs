//! Argument equidistribution of S(X) = E_{n≤X} n^{2i} for a first-harmonic
//! mollifier supported on 0.2 ≤ |z| ≤ 2.
//!
//! cargo run --release --example equidistribution -- 1e6

use chowla_lab::averaging::ScaleGrid;
use chowla_lab::correlation::{argument_equidistribution, CorrelationQuery, EquidistMode, Mollifier, RadialProfile};
use chowla_lab::functions::MultiplicativeFunctionSpec;
use chowla_lab::sweep::SweepConfig;

fn main() {
    let max = std::env::args()
        .nth(1)
        .map(|s| s.parse::<f64>().expect("max must be a number"))
        .unwrap_or(1e6);
    let grid = ScaleGrid::spanning(10.0, max, 2f64.powf(0.25)).expect("bad grid");
    let query = CorrelationQuery::new(vec![MultiplicativeFunctionSpec::archimedean(2.0)], vec![0], grid);
    let profile = RadialProfile::new(vec![(0.2, 0.0), (0.3, 1.0), (1.5, 1.0), (2.0, 0.0)]).expect("profile");
    let psi = Mollifier::Harmonic { profile, k: 1 };
    let s = argument_equidistribution(&query, &psi, EquidistMode::Subsampled, SweepConfig::default())
        .expect("equidistribution failed");
    s.write_csv(std::io::stdout()).expect("write failed");
}
