//! Validate and run an experiment config through the library runner.
//!
//! cargo run --release --example run_config -- examples/configs/demo.toml

use chowla_lab::runner::{parse_config, run};

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| "examples/configs/demo.toml".into());
    let text = std::fs::read_to_string(&path).expect("cannot read config");
    let config = match parse_config(&text) {
        Ok(c) => c,
        Err(diags) => {
            for d in diags {
                eprintln!("{path}:{d}");
            }
            std::process::exit(1);
        }
    };
    let manifest = run(&config, &text).expect("run failed");
    println!("{}", serde_json::to_string_pretty(&manifest).expect("json"));
}
