mod common;

use chowla_lab::averaging::{ScaleGrid, WeightScheme};
use chowla_lab::correlation::{correlate, three_point_bound_check, CorrelationQuery};
use chowla_lab::functions::{parse_spec, MultiplicativeFunctionSpec};
use num_complex::Complex64;
use proptest::prelude::*;

fn weight(scheme: WeightScheme, n: u64) -> f64 {
    let x = n as f64;
    match scheme {
        WeightScheme::Unweighted | WeightScheme::PrimeUnweighted => 1.0,
        WeightScheme::Log | WeightScheme::PrimeLog => 1.0 / x,
        WeightScheme::LogLog => 1.0 / (x * (1.0 + x).ln()),
    }
}

/// Direct `Σ w(n) Π g_i(n + a h_i) / Σ w(n)` over `n ≤ ⌊X/d⌋`.
fn brute(q: &CorrelationQuery, x: f64) -> Complex64 {
    let cutoff = (x / q.divisor).floor() as u64;
    let (mut num, mut den) = (Complex64::new(0.0, 0.0), 0.0);
    for n in 1..=cutoff {
        if matches!(q.scheme, WeightScheme::PrimeUnweighted | WeightScheme::PrimeLog) && !common::is_prime(n) {
            continue;
        }
        let w = weight(q.scheme, n);
        let mut z = Complex64::new(w, 0.0);
        for (g, &h) in q.functions.iter().zip(&q.shifts) {
            z *= g.value_at(n as i64 + q.dilation * h);
        }
        num += z;
        den += w;
    }
    num / den
}

fn spec(s: &str) -> MultiplicativeFunctionSpec {
    parse_spec(s).unwrap()
}

#[test]
fn matches_brute_force_up_to_1e4() {
    let grid = ScaleGrid::new(10.0, 2f64.powf(0.5), 27).unwrap();
    let cases: Vec<(Vec<&str>, Vec<i64>)> = vec![
        (vec!["liouville", "liouville"], vec![0, 1]),
        (vec!["mobius", "mobius", "mobius"], vec![0, 1, 2]),
        (vec!["liouville", "liouville"], vec![-3, 2]),
        (vec!["char(q=5,index=1)", "conj(char(q=5,index=1))"], vec![0, 4]),
        (vec!["lambda_q(3)", "conj(lambda_q(3))", "lambda_q(3)"], vec![0, 1, 3]),
        (vec!["archimedean(t=1.5)"], vec![0]),
        (vec!["twist(char(q=4,index=1), t=-0.7)", "liouville"], vec![0, 1]),
    ];
    for (fs, shifts) in cases {
        for scheme in WeightScheme::ALL {
            for (dilation, divisor) in [(1, 1.0), (2, 3.0)] {
                let q = CorrelationQuery::new(fs.iter().map(|s| spec(s)).collect(), shifts.clone(), grid)
                    .with_scheme(scheme)
                    .with_dilation(dilation)
                    .with_divisor(divisor);
                let s = correlate(&q, common::small(1024, 3)).unwrap();
                for (x, v) in s.scales.iter().zip(&s.values) {
                    let want = brute(&q, *x);
                    assert!(
                        (v - want).norm() <= 1e-12,
                        "{fs:?} {shifts:?} {scheme} a={dilation} d={divisor} X={x}: {v} vs {want}"
                    );
                }
            }
        }
    }
}

#[test]
fn three_point_windows_match_brute_force() {
    let g = spec("lambda_q(3)");
    let windows = [(5000.0, 10.0), (8000.0, 100.0), (9999.5, 3.0)];
    let r = three_point_bound_check(&g, [0, 1, 2], &windows, common::small(1024, 2)).unwrap();
    for (w, &(x, omega)) in r.windows.iter().zip(&windows) {
        let (mut num, mut den) = (Complex64::new(0.0, 0.0), 0.0);
        for n in (x / omega).ceil() as i64..=x.floor() as i64 {
            num += g.value_at(n) * g.value_at(n + 1) * g.value_at(n + 2) / n as f64;
            den += 1.0 / n as f64;
        }
        assert!((w.value - num / den).norm() < 1e-12, "{x} {omega}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Conjugating every function conjugates the average.
    #[test]
    fn conjugation(t in -3.0f64..3.0, h in 1i64..20, idx in 0u64..4) {
        let grid = ScaleGrid::spanning(100.0, 20_000.0, 3.0).unwrap();
        let f = vec![spec(&format!("twist(char(q=5,index={idx}), t={t})")), spec("lambda_q(4)")];
        let g = f.iter().cloned().map(MultiplicativeFunctionSpec::conjugate).collect();
        let a = correlate(&CorrelationQuery::new(f, vec![0, h], grid), common::small(4096, 1)).unwrap();
        let b = correlate(&CorrelationQuery::new(g, vec![0, h], grid), common::small(4096, 2)).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            prop_assert!((u.conj() - v).norm() < 1e-12);
        }
    }

    /// Translating all shifts by `c` moves only `c` terms at each end.
    #[test]
    fn shift_translation(c in 1i64..30, h in 1i64..30) {
        let grid = ScaleGrid::spanning(100.0, 30_000.0, 2.0).unwrap();
        let lam = || vec![spec("liouville"), spec("liouville")];
        let a = correlate(&CorrelationQuery::new(lam(), vec![0, h], grid), common::small(2048, 2)).unwrap();
        let b = correlate(&CorrelationQuery::new(lam(), vec![c, h + c], grid), common::small(2048, 2)).unwrap();
        for ((x, u), v) in a.scales.iter().zip(&a.values).zip(&b.values) {
            let n = x.floor();
            prop_assert!((u - v).norm() <= 2.0 * c as f64 / n + 1e-12, "X={} {} {}", x, u, v);
        }
    }

    /// Thread count does not change a single bit; segment length moves only
    /// the grouping of compensated sums.
    #[test]
    fn layout_independence(segment in 1024u64..9000, threads in 2usize..5) {
        let grid = ScaleGrid::spanning(10.0, 50_000.0, 1.5).unwrap();
        let q = CorrelationQuery::new(vec![spec("liouville"), spec("mobius"), spec("lambda_q(3)")], vec![0, 1, 5], grid)
            .with_scheme(WeightScheme::Log);
        let one = correlate(&q, common::small(segment, 1)).unwrap();
        let many = correlate(&q, common::small(segment, threads)).unwrap();
        let whole = correlate(&q, common::small(1 << 20, 1)).unwrap();
        for ((u, v), w) in one.values.iter().zip(&many.values).zip(&whole.values) {
            prop_assert_eq!(u.re.to_bits(), v.re.to_bits());
            prop_assert_eq!(u.im.to_bits(), v.im.to_bits());
            prop_assert!((u - w).norm() <= 1e-15 * w.norm().max(1e-3));
        }
    }
}
