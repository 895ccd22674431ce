mod common;

use std::collections::HashMap;

use chowla_lab::averaging::ScaleGrid;
use chowla_lab::functions::{parse_spec, MultiplicativeFunctionSpec};
use chowla_lab::patterns::{census, growth_report};
use chowla_lab::smoothness::{joint_smooth_density, lpf_race, DickmanSolver, Exponent};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `p < n^{a/b}` by floating point away from the boundary, exact near it.
fn below_oracle(p: u64, n: u64, e: Exponent) -> bool {
    let (lhs, rhs) = (e.den as f64 * (p as f64).ln(), e.num as f64 * (n as f64).ln());
    if (lhs - rhs).abs() > 1e-9 {
        return lhs < rhs;
    }
    // Equality p^den = n^num can only hold exactly; check by integer powers.
    (p as u128).pow(e.den) < (n as u128).pow(e.num)
}

#[test]
fn smoothness_indicator_matches_trial_division() {
    let n_max = 100_000u64;
    let grid = ScaleGrid::spanning(10.0, n_max as f64, 10.0).unwrap();
    let solver = DickmanSolver::default();
    for (a, b) in [("1/2", "1/2"), ("1/3", "2/3"), ("0.25", "1/2")] {
        let (alpha, beta): (Exponent, Exponent) = (a.parse().unwrap(), b.parse().unwrap());
        let s = joint_smooth_density(alpha, beta, &grid, &solver, common::small(4096, 3)).unwrap();
        let lpf: Vec<u64> = (0..=n_max + 1).map(|n| if n == 0 { 0 } else { common::lpf(n) }).collect();
        for (j, &x) in s.scales.iter().enumerate() {
            let top = x.floor() as u64;
            let hits = (1..=top)
                .filter(|&n| below_oracle(lpf[n as usize], n, alpha) && below_oracle(lpf[n as usize + 1], n, beta))
                .count();
            let fixed = (1..=top)
                .filter(|&n| {
                    (lpf[n as usize] as f64).ln() < alpha.value() * x.ln()
                        && (lpf[n as usize + 1] as f64).ln() < beta.value() * x.ln()
                })
                .count();
            assert_eq!(s.empirical[j], hits as f64 / top as f64, "{a} {b} X={x}");
            assert_eq!(s.empirical_fixed[j], fixed as f64 / top as f64, "{a} {b} X={x} fixed");
        }
    }
}

#[test]
fn exact_boundary_cases() {
    let half = Exponent::new(1, 2).unwrap();
    for p in [2u64, 3, 65_521, 4_294_967_291] {
        assert!(!half.below(p, p * p));
        assert!(half.below(p, p * p + 1));
    }
    let third = Exponent::new(1, 3).unwrap();
    assert!(!third.below(2_097_143, 2_097_143u64.pow(3)));
}

#[test]
fn race_matches_trial_division() {
    let grid = ScaleGrid::spanning(10.0, 50_000.0, 5.0).unwrap();
    let r = lpf_race(&grid, common::small(1024, 2)).unwrap();
    for (x, f) in r.scales.iter().zip(&r.freq) {
        let top = x.floor() as u64;
        let wins = (1..=top).filter(|&n| common::lpf(n) < common::lpf(n + 1)).count();
        assert_eq!(*f, wins as f64 / top as f64);
    }
}

fn symbols(spec: &MultiplicativeFunctionSpec, n: u64, k: usize) -> String {
    (n..n + k as u64)
        .map(|m| {
            let v = spec.value_at(m as i64);
            match spec.label() {
                "liouville" => if v.re > 0.0 { "+" } else { "-" }.to_string(),
                _ => if v.norm() < 0.5 { "0" } else if v.re > 0.0 { "+" } else { "-" }.to_string(),
            }
        })
        .collect()
}

/// Random windows read directly agree with the census tally.
#[test]
fn window_encoding_at_random_n() {
    let n_max = 200_000u64;
    for name in ["liouville", "mobius"] {
        let spec = parse_spec(name).unwrap();
        for k in [3usize, 7, 12] {
            let c = census(k, n_max, &spec, common::small(8192, 2)).unwrap();
            let counts: HashMap<&str, u64> = c.frequencies.iter().map(|f| (f.pattern.as_str(), f.count)).collect();
            assert_eq!(counts.values().sum::<u64>(), c.windows());
            let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
            for _ in 0..10_000 {
                let n = rng.gen_range(1..=n_max + 1 - k as u64);
                let p = symbols(&spec, n, k);
                assert!(counts.get(p.as_str()).copied().unwrap_or(0) > 0, "{name} K={k} n={n} {p}");
            }
        }
    }
}

#[test]
fn census_counts_match_direct_tally() {
    let spec = parse_spec("liouville").unwrap();
    let (k, n_max) = (5usize, 30_000u64);
    let c = census(k, n_max, &spec, common::small(1024, 3)).unwrap();
    let mut want: HashMap<String, (u64, f64)> = HashMap::new();
    let mut total = 0.0;
    for n in 1..=n_max + 1 - k as u64 {
        let e = want.entry(symbols(&spec, n, k)).or_default();
        e.0 += 1;
        e.1 += 1.0 / n as f64;
        total += 1.0 / n as f64;
    }
    assert_eq!(c.distinct, want.len());
    for f in &c.frequencies {
        let (count, w) = want[&f.pattern];
        assert_eq!(f.count, count, "{}", f.pattern);
        assert!((f.density_log - w / total).abs() < 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Each length-K window but the last extends to a length-(K+1) window,
    /// and each length-(K+1) window restricts to a length-K one.
    #[test]
    fn pattern_counts_grow_monotonically(n in 1000u64..60_000, name in prop::sample::select(vec!["liouville", "mobius", "lambda_q(3)"])) {
        let spec = parse_spec(name).unwrap();
        let ks: Vec<usize> = (1..=10).collect();
        let r = growth_report(&ks, n, &spec, common::small(4096, 2)).unwrap();
        let alphabet = spec.alphabet().unwrap().size();
        for w in r.rows.windows(2) {
            prop_assert!(w[0].s <= w[1].s + 1, "{:?}", r.rows);
            prop_assert!(w[1].s <= alphabet * w[0].s);
        }
    }
}
