//! Pretentious distance `D(f, g; X)² = Σ_{p ≤ X} (1 − Re f(p)·conj g(p)) / p`,
//! weak-pretension profiles and best-fit twisted characters `χ(n)n^{it}`.

use std::fmt;
use std::io;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::averaging::{AverageError, CompensatedSum, ComplexSum, ScaleGrid};
use crate::functions::{enumerate_characters, DirichletCharacter, FunctionError, MultiplicativeFunctionSpec};
use crate::sieve::{prime_iter, SieveError};

#[derive(Debug, Error)]
pub enum PretenseError {
    #[error("scale {0} too small (need X >= {1})")]
    ScaleTooSmall(f64, f64),
    #[error("invalid search: {0}")]
    InvalidSearch(String),
    #[error("search needs about {cost:.3e} operations, over the budget of {budget:.3e}")]
    BudgetExceeded { cost: f64, budget: f64 },
    #[error(transparent)]
    Sieve(#[from] SieveError),
    #[error(transparent)]
    Function(#[from] FunctionError),
    #[error(transparent)]
    Average(#[from] AverageError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn primes_upto(x: f64) -> Result<Vec<u64>, SieveError> {
    let hi = x.floor() as u64 + 1;
    if hi <= 2 {
        return Ok(Vec::new());
    }
    Ok(prime_iter(1, hi)?.collect())
}

/// `D(f, g; X)²`.
pub fn pretentious_distance_sq(
    f: &MultiplicativeFunctionSpec,
    g: &MultiplicativeFunctionSpec,
    x: f64,
) -> Result<f64, PretenseError> {
    if !(x >= 2.0) {
        return Err(PretenseError::ScaleTooSmall(x, 2.0));
    }
    let mut s = CompensatedSum::default();
    for p in prime_iter(2, x.floor() as u64 + 1)? {
        s.add(term(f.value_at_prime(p), g.value_at_prime(p), p));
    }
    Ok(s.value().max(0.0))
}

#[inline]
fn term(fp: Complex64, gp: Complex64, p: u64) -> f64 {
    (1.0 - (fp * gp.conj()).re) / p as f64
}

/// Heuristic reading of a profile's tail; never a proof.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "trending-0")]
    TrendingZero,
    #[serde(rename = "trending-∞")]
    TrendingInfinity,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::TrendingZero => "trending-0",
            Verdict::TrendingInfinity => "trending-∞",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// `D²` and `D²/ln ln X` along a grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PretenseProfile {
    pub f: String,
    pub g: String,
    pub scales: Vec<f64>,
    pub dist_sq: Vec<f64>,
    pub normalized: Vec<f64>,
    pub verdict: Verdict,
}

impl PretenseProfile {
    /// CSV `scale, dist_sq, normalized`.
    pub fn write_csv(&self, w: impl io::Write) -> Result<(), PretenseError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["scale", "dist_sq", "normalized"])?;
        for i in 0..self.scales.len() {
            out.write_record([
                self.scales[i].to_string(),
                self.dist_sq[i].to_string(),
                self.normalized[i].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Normalised values below this count as vanishing.
const ZERO_LEVEL: f64 = 0.05;

fn verdict(dist_sq: &[f64], normalized: &[f64]) -> Verdict {
    let n = normalized.len();
    if n < 3 {
        return Verdict::Inconclusive;
    }
    let tail = &normalized[n - 3..];
    let dtail = &dist_sq[n - 3..];
    if tail.iter().all(|&v| v < ZERO_LEVEL) && tail[2] <= tail[0] {
        Verdict::TrendingZero
    } else if tail.iter().all(|&v| v >= ZERO_LEVEL) && dtail.windows(2).all(|w| w[1] > w[0]) {
        Verdict::TrendingInfinity
    } else {
        Verdict::Inconclusive
    }
}

/// `D(f, g; X)²` and `D²/ln ln X` at every grid scale, one prime pass.
pub fn weak_pretension_profile(
    f: &MultiplicativeFunctionSpec,
    g: &MultiplicativeFunctionSpec,
    grid: &ScaleGrid,
) -> Result<PretenseProfile, PretenseError> {
    grid.validate()?;
    let scales = grid.scales();
    if scales[0] < 3.0 {
        return Err(PretenseError::ScaleTooSmall(scales[0], 3.0));
    }
    let mut dist_sq = Vec::with_capacity(scales.len());
    let mut s = CompensatedSum::default();
    let mut k = 0;
    for p in prime_iter(2, grid.max_scale().floor() as u64 + 1)? {
        while k < scales.len() && (p as f64) > scales[k] {
            dist_sq.push(s.value().max(0.0));
            k += 1;
        }
        s.add(term(f.value_at_prime(p), g.value_at_prime(p), p));
    }
    while dist_sq.len() < scales.len() {
        dist_sq.push(s.value().max(0.0));
    }
    let normalized: Vec<f64> = scales
        .iter()
        .zip(&dist_sq)
        .map(|(x, d)| d / x.ln().ln())
        .collect();
    Ok(PretenseProfile {
        f: f.label().to_string(),
        g: g.label().to_string(),
        verdict: verdict(&dist_sq, &normalized),
        scales,
        dist_sq,
        normalized,
    })
}

/// Search settings for [`fit_twisted_character`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSearch {
    pub q_max: u64,
    pub t_max: f64,
    pub scale: f64,
    /// Maximum number of prime-term evaluations.
    pub budget: f64,
}

impl FitSearch {
    pub const DEFAULT_BUDGET: f64 = 5e9;
    pub const DEFAULT_T_MAX: f64 = 10.0;

    pub fn new(q_max: u64, t_max: f64, scale: f64) -> Self {
        Self {
            q_max,
            t_max,
            scale,
            budget: Self::DEFAULT_BUDGET,
        }
    }

    /// Coarse grid spacing `1/ln X`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.scale.ln()
    }

    /// `0, ±δ, ±2δ, …` up to `t_max`, in increasing order.
    pub fn t_grid(&self) -> Vec<f64> {
        let d = self.spacing();
        let m = (self.t_max / d + 1e-9).floor() as i64;
        (-m..=m).map(|k| k as f64 * d).collect()
    }

    /// Estimated prime-term evaluations: coarse grid plus refinement.
    pub fn cost(&self) -> f64 {
        let pi = self.scale / (self.scale.ln() - 1.0).max(1.0);
        (self.t_grid().len() as f64 * self.q_max as f64 + 41.0) * pi
    }
}

/// Best twisted character found.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwistFit {
    pub g: String,
    pub q_max: u64,
    pub t_range: (f64, f64),
    pub scale: f64,
    pub modulus: u64,
    pub index: u64,
    pub odd: bool,
    pub t: f64,
    pub dist_sq: f64,
    pub grid_resolution: f64,
    pub candidates: u64,
}

#[derive(Clone, Copy)]
struct Candidate {
    q: u64,
    index: u64,
    t: f64,
    d2: f64,
}

/// Prime data for repeated distance evaluations.
struct PrimeSums {
    primes: Vec<u64>,
    values: Vec<Complex64>,
    inv_sum: f64,
}

impl PrimeSums {
    fn new(g: &MultiplicativeFunctionSpec, x: f64) -> Result<Self, PretenseError> {
        let primes = primes_upto(x)?;
        let values = primes.iter().map(|&p| g.value_at_prime(p)).collect();
        let mut s = CompensatedSum::default();
        for &p in &primes {
            s.add(1.0 / p as f64);
        }
        Ok(Self {
            primes,
            values,
            inv_sum: s.value(),
        })
    }

    /// `B_{q,r}(t) = Σ_{p ≡ r (q)} g(p) p^{-it} / p` for `q = 1..=q_max`.
    fn buckets(&self, t: f64, q_max: u64) -> Vec<Vec<ComplexSum>> {
        let mut b: Vec<Vec<ComplexSum>> = (1..=q_max).map(|q| vec![ComplexSum::default(); q as usize]).collect();
        for (&p, &v) in self.primes.iter().zip(&self.values) {
            let pf = p as f64;
            let z = v * Complex64::from_polar(1.0 / pf, -t * pf.ln());
            for (k, row) in b.iter_mut().enumerate() {
                row[(p % (k as u64 + 1)) as usize].add(z);
            }
        }
        b
    }

    fn dist_sq(&self, chi: &DirichletCharacter, row: &[ComplexSum]) -> f64 {
        let mut s = CompensatedSum::default();
        s.add(self.inv_sum);
        for (r, b) in row.iter().enumerate() {
            let c = chi.value(r as u64);
            if c.norm_sqr() > 0.0 {
                s.add(-(c.conj() * b.value()).re);
            }
        }
        s.value().max(0.0)
    }
}

/// Minimise `D(g, χ(n)n^{it}; X)²` over characters of modulus `≤ q_max` and
/// `t` on a grid of spacing `1/ln X` in `[−t_max, t_max]`, then refine
/// once at a twentieth of the spacing. Ties go to the earlier candidate in
/// the order (modulus, index, t).
pub fn fit_twisted_character(
    g: &MultiplicativeFunctionSpec,
    search: &FitSearch,
) -> Result<TwistFit, PretenseError> {
    if search.q_max < 1 {
        return Err(PretenseError::InvalidSearch("q_max must be >= 1".into()));
    }
    if !(search.t_max > 0.0 && search.t_max.is_finite()) {
        return Err(PretenseError::InvalidSearch(format!("t_max must be positive, got {}", search.t_max)));
    }
    if !(search.scale >= 100.0 && search.scale.is_finite()) {
        return Err(PretenseError::ScaleTooSmall(search.scale, 100.0));
    }
    let cost = search.cost();
    if cost > search.budget {
        return Err(PretenseError::BudgetExceeded {
            cost,
            budget: search.budget,
        });
    }
    let chars: Vec<Vec<DirichletCharacter>> = (1..=search.q_max)
        .map(enumerate_characters)
        .collect::<Result<_, _>>()?;
    let sums = PrimeSums::new(g, search.scale)?;
    let grid = search.t_grid();

    let per_t: Vec<Vec<Candidate>> = grid
        .par_iter()
        .map(|&t| {
            let b = sums.buckets(t, search.q_max);
            let mut out = Vec::new();
            for (k, list) in chars.iter().enumerate() {
                for chi in list {
                    out.push(Candidate {
                        q: k as u64 + 1,
                        index: chi.index(),
                        t,
                        d2: sums.dist_sq(chi, &b[k]),
                    });
                }
            }
            out
        })
        .collect();
    let mut candidates = 0u64;
    let mut best: Option<Candidate> = None;
    // Canonical order: modulus, index, then t.
    let n_chars = per_t.first().map_or(0, |v| v.len());
    for c in 0..n_chars {
        for row in &per_t {
            let cand = &row[c];
            candidates += 1;
            if best.as_ref().map_or(true, |b| cand.d2 < b.d2 - 1e-12) {
                best = Some(*cand);
            }
        }
    }
    let mut best = best.expect("at least the principal character mod 1");

    // Refinement around the best t for the best character only.
    let chi = &chars[best.q as usize - 1][best.index as usize];
    let fine = search.spacing() / 20.0;
    let refined: Vec<(f64, f64)> = (-20..=20i64)
        .into_par_iter()
        .map(|k| {
            let t = best.t + k as f64 * fine;
            if t.abs() > search.t_max + 1e-12 {
                return (t, f64::INFINITY);
            }
            let b = sums.buckets(t, best.q);
            (t, sums.dist_sq(chi, &b[best.q as usize - 1]))
        })
        .collect();
    for (t, d2) in refined {
        candidates += 1;
        if d2 < best.d2 - 1e-12 {
            best.t = t;
            best.d2 = d2;
        }
    }
    Ok(TwistFit {
        g: g.label().to_string(),
        q_max: search.q_max,
        t_range: (-search.t_max, search.t_max),
        scale: search.scale,
        modulus: best.q,
        index: best.index,
        odd: chi.is_odd(),
        t: best.t,
        dist_sq: best.d2,
        grid_resolution: search.spacing(),
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::parse_spec;

    #[test]
    fn worked_distances() {
        let lam = MultiplicativeFunctionSpec::liouville();
        let one = MultiplicativeFunctionSpec::one();
        let harmonic = 1.0 / 2.0 + 1.0 / 3.0 + 1.0 / 5.0 + 1.0 / 7.0;
        assert!((pretentious_distance_sq(&lam, &one, 10.0).unwrap() - 2.0 * harmonic).abs() < 1e-14);
        let l3 = parse_spec("lambda_q(3)").unwrap();
        assert!((pretentious_distance_sq(&lam, &l3, 10.0).unwrap() - 0.5 * harmonic).abs() < 1e-14);
        assert!(pretentious_distance_sq(&l3, &l3, 1e4).unwrap() < 1e-14);
        assert!(pretentious_distance_sq(&lam, &one, 1.5).is_err());
    }

    #[test]
    fn profiles_and_verdicts() {
        let grid = ScaleGrid::new(1e2, 10.0, 5).unwrap();
        let lam = MultiplicativeFunctionSpec::liouville();
        let one = MultiplicativeFunctionSpec::one();
        let same = weak_pretension_profile(&lam, &lam, &grid).unwrap();
        assert!(same.normalized.iter().all(|&v| v == 0.0));
        assert_eq!(same.verdict, Verdict::TrendingZero);
        let far = weak_pretension_profile(&lam, &one, &grid).unwrap();
        assert_eq!(far.verdict, Verdict::TrendingInfinity);
        assert!(far.dist_sq.windows(2).all(|w| w[1] >= w[0]));
        let sq = MultiplicativeFunctionSpec::product(vec![lam.clone(), lam]).unwrap();
        let p = weak_pretension_profile(&sq, &one, &grid).unwrap();
        assert!(p.dist_sq.iter().all(|&d| d == 0.0));
        assert!(weak_pretension_profile(&one, &one, &ScaleGrid::new(2.0, 2.0, 3).unwrap()).is_err());
    }

    #[test]
    fn self_fit_twisted() {
        let g = parse_spec("twist(char(q=4,index=1), t=1.0)").unwrap();
        let fit = fit_twisted_character(&g, &FitSearch::new(6, 3.0, 1e4)).unwrap();
        assert_eq!((fit.modulus, fit.index), (4, 1));
        assert!(fit.odd);
        assert!((fit.t - 1.0).abs() <= fit.grid_resolution);
        // χ(2) = 0, so the best possible value is D(g, g; X)² = 1/2.
        let floor = pretentious_distance_sq(&g, &g, 1e4).unwrap();
        assert!((floor - 0.5).abs() < 1e-12);
        assert!(fit.dist_sq - floor < 1e-3);
    }

    #[test]
    fn principal_self_fit_is_exact() {
        let fit = fit_twisted_character(&MultiplicativeFunctionSpec::one(), &FitSearch::new(3, 1.0, 1e3)).unwrap();
        assert_eq!((fit.modulus, fit.index, fit.t), (1, 0, 0.0));
        assert!(fit.dist_sq < 1e-12);
    }

    #[test]
    fn budget_and_arguments() {
        let g = MultiplicativeFunctionSpec::liouville();
        let mut s = FitSearch::new(50, 10.0, 1e9);
        s.budget = 1e6;
        assert!(matches!(fit_twisted_character(&g, &s), Err(PretenseError::BudgetExceeded { .. })));
        assert!(fit_twisted_character(&g, &FitSearch::new(0, 1.0, 1e3)).is_err());
        assert!(fit_twisted_character(&g, &FitSearch::new(2, 1.0, 50.0)).is_err());
    }

    #[test]
    fn grid_contains_zero() {
        let s = FitSearch::new(1, 1.0, 1e4);
        let g = s.t_grid();
        assert!(g.contains(&0.0));
        assert_eq!(g.first().unwrap(), &-g.last().unwrap());
    }
}
