//! Census of length-K value patterns of λ (or another finite-alphabet
//! function) up to N.
//!
//! cargo run --release --example sign_patterns -- 3 1e7 liouville
//! cargo run --release --example sign_patterns -- 2 1e7 "lambda_q(3)"

use chowla_lab::functions::MultiplicativeFunctionSpec;
use chowla_lab::patterns::census;
use chowla_lab::sweep::SweepConfig;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let k: usize = args.first().map_or("3", |s| s).parse().expect("bad K");
    let n = args.get(1).map_or("1e7", |s| s).parse::<f64>().expect("bad N") as u64;
    let spec: MultiplicativeFunctionSpec = args.get(2).map_or("liouville", |s| s).parse().expect("bad function");
    let c = census(k, n, &spec, SweepConfig::default()).expect("census failed");
    println!("{}: s({k}) = {} over n <= {n}", c.function, c.distinct);
    c.write_csv(std::io::stdout()).expect("write failed");
}
