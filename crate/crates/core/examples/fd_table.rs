//! The correlation table f_d(a) for λ(n)λ(n+1) and its best d^{-it} fit.
//!
//! cargo run --release --example fd_table -- 1e6

use chowla_lab::averaging::WeightScheme;
use chowla_lab::correlation::fd_table;
use chowla_lab::functions::MultiplicativeFunctionSpec;
use chowla_lab::sweep::SweepConfig;

fn main() {
    let scale = std::env::args()
        .nth(1)
        .map(|s| s.parse::<f64>().expect("scale must be a number"))
        .unwrap_or(1e6);
    let lam = MultiplicativeFunctionSpec::liouville();
    let table = fd_table(
        &[lam.clone(), lam],
        &[0, 1],
        WeightScheme::Log,
        &[1.0, 2.0, 3.0, 5.0, 8.0, 13.0],
        &[1, 2, 3],
        scale,
        SweepConfig::default(),
    )
    .expect("fd table failed");
    table.write_csv(std::io::stdout()).expect("write failed");
    let (t, fits) = table.fit_t(2.0);
    eprintln!("best t = {t:.4}");
    for f in fits {
        eprintln!("{f:?}");
    }
}
