//! Equidistribution of `arg S(X)` away from zero: log-averages over scales
//! of `ψ(S(X)) − ψ̄(S(X))`, where `ψ̄` is the rotational average of `ψ`.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{means, write_complex_csv, CorrelationError, CorrelationQuery, ProductAverager};
use crate::averaging::{checkpoints, BlockPieces, CompensatedSum, ComplexSum, WeightedAccumulator};
use crate::sweep::{sweep_one, BlockConsumer, BlockView, Halo, SweepConfig, SweepError};

/// Piecewise-linear radial profile `Ψ(r)`, zero outside its knots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    knots: Vec<(f64, f64)>,
}

impl RadialProfile {
    /// Knots `(r, Ψ(r))` with strictly increasing `r`, starting at
    /// `r₀ > 0` with `Ψ(r₀) = 0`.
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self, CorrelationError> {
        let bad = |m: &str| CorrelationError::InvalidQuery(format!("radial profile: {m}"));
        let Some(&(r0, v0)) = knots.first() else {
            return Err(bad("no knots"));
        };
        if !(r0 > 0.0) {
            return Err(bad("mollifier must vanish near 0 (first knot radius must be > 0)"));
        }
        if v0 != 0.0 {
            return Err(bad("profile must start at value 0"));
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(bad("knot radii must increase"));
        }
        if knots.iter().any(|&(r, v)| !r.is_finite() || !v.is_finite()) {
            return Err(bad("non-finite knot"));
        }
        Ok(Self { knots })
    }

    /// 0 below `a`, rising linearly to 1 on `[b, c]`, falling to 0 at `d`.
    pub fn trapezoid(a: f64, b: f64, c: f64, d: f64) -> Result<Self, CorrelationError> {
        Self::new(vec![(a, 0.0), (b, 1.0), (c, 1.0), (d, 0.0)])
    }

    /// Radius below which the profile vanishes.
    pub fn inner_radius(&self) -> f64 {
        self.knots[0].0
    }

    pub fn eval(&self, r: f64) -> f64 {
        let k = &self.knots;
        if r <= k[0].0 || r >= k[k.len() - 1].0 {
            return if r == k[k.len() - 1].0 { k[k.len() - 1].1 } else { 0.0 };
        }
        let j = k.partition_point(|&(x, _)| x <= r);
        let (x0, y0) = k[j - 1];
        let (x1, y1) = k[j];
        y0 + (y1 - y0) * (r - x0) / (x1 - x0)
    }
}

pub type MollifierFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// Test function `ψ` on the punctured plane.
#[derive(Clone)]
pub enum Mollifier {
    /// `ψ(re^{iθ}) = Ψ(r)·e^{ikθ}`. Its rotational average is `Ψ(r)` when
    /// `k = 0` and zero otherwise, which is what angular quadrature of
    /// order above `|k|` returns.
    Harmonic { profile: RadialProfile, k: i32 },
    /// Arbitrary `ψ`, declared to vanish on `|z| ≤ r₀`; the rotational
    /// average is taken by `order`-point angular quadrature.
    Custom {
        r0: f64,
        order: usize,
        f: MollifierFn,
    },
}

/// Default angular quadrature order.
pub const QUADRATURE_ORDER: usize = 256;

impl fmt::Debug for Mollifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mollifier::Harmonic { profile, k } => f
                .debug_struct("Harmonic")
                .field("profile", profile)
                .field("k", k)
                .finish(),
            Mollifier::Custom { r0, order, .. } => {
                f.debug_struct("Custom").field("r0", r0).field("order", order).finish()
            }
        }
    }
}

impl Mollifier {
    pub fn custom(r0: f64, f: MollifierFn) -> Self {
        Mollifier::Custom {
            r0,
            order: QUADRATURE_ORDER,
            f,
        }
    }

    pub fn validate(&self) -> Result<(), CorrelationError> {
        match self {
            Mollifier::Harmonic { k, .. } => {
                if k.unsigned_abs() as usize >= QUADRATURE_ORDER {
                    return Err(CorrelationError::InvalidQuery(format!(
                        "harmonic {k} not resolved by {QUADRATURE_ORDER}-point quadrature"
                    )));
                }
                Ok(())
            }
            Mollifier::Custom { r0, order, .. } => {
                if !(*r0 > 0.0) {
                    return Err(CorrelationError::InvalidQuery(format!(
                        "mollifier must vanish on a disc of positive radius, got r0 = {r0}"
                    )));
                }
                if *order == 0 {
                    return Err(CorrelationError::InvalidQuery("quadrature order must be positive".into()));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        match self {
            Mollifier::Harmonic { profile, k } => {
                let r = z.norm();
                let p = profile.eval(r);
                if p == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                Complex64::from_polar(p, *k as f64 * z.arg())
            }
            Mollifier::Custom { r0, f, .. } => {
                if z.norm() <= *r0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    f(z)
                }
            }
        }
    }

    /// Rotational average `(1/2π)∫ ψ(|z|e^{iθ}) dθ`.
    pub fn rotational_average(&self, z: Complex64) -> Complex64 {
        match self {
            Mollifier::Harmonic { profile, k } => {
                if *k == 0 {
                    Complex64::new(profile.eval(z.norm()), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            Mollifier::Custom { order, .. } => {
                let r = z.norm();
                let mut s = ComplexSum::default();
                for j in 0..*order {
                    s.add(self.eval(Complex64::from_polar(r, TAU * j as f64 / *order as f64)));
                }
                s.value() / *order as f64
            }
        }
    }

    /// `ψ(z) − ψ̄(z)`.
    pub fn deviation(&self, z: Complex64) -> Complex64 {
        if let Mollifier::Harmonic { k: 0, .. } = self {
            return Complex64::new(0.0, 0.0);
        }
        self.eval(z) - self.rotational_average(z)
    }
}

/// Which scales enter the average over `X`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquidistMode {
    /// Every integer `X ≤ X₀`, weight `1/X`.
    AllScales,
    /// Only the grid scales, equally weighted, which on a geometric grid is
    /// the log-weighted average sampled at the grid.
    Subsampled,
}

/// Statistic per cut-off `X₀` (the grid scales).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquidistSeries {
    pub mode: EquidistMode,
    pub cutoffs: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Scales that entered each average.
    pub scales_used: Vec<u64>,
}

impl EquidistSeries {
    /// CSV `scale, re, im, abs` with the cut-off as scale.
    pub fn write_csv(&self, w: impl std::io::Write) -> Result<(), CorrelationError> {
        write_complex_csv(w, &self.cutoffs, &self.values)
    }
}

enum Engine {
    All(AllScales),
    Sampled {
        averager: ProductAverager,
        scales: Vec<f64>,
    },
}

struct AllScales {
    averager: ProductAverager,
    divisor: f64,
    cutoffs: Vec<u64>,
    running: WeightedAccumulator,
    next_x: u64,
    num: ComplexSum,
    den: CompensatedSum,
    used: u64,
    snaps: Vec<(Complex64, u64)>,
}

impl AllScales {
    fn x0_max(&self) -> u64 {
        *self.cutoffs.last().expect("non-empty grid")
    }

    fn floor_div(&self, x: u64) -> u64 {
        (x as f64 / self.divisor).floor() as u64
    }

    /// Feed `S_N` once the running average covers `n ≤ N`.
    fn scales_at(&mut self, n_done: u64, psi: &Mollifier) {
        let s = self.running.mean();
        while self.next_x <= self.x0_max() && self.floor_div(self.next_x) <= n_done {
            let x = self.next_x;
            if let Some(s) = s.filter(|_| self.floor_div(x) == n_done) {
                let w = 1.0 / x as f64;
                self.num.add(psi.deviation(s) * w);
                self.den.add(w);
                self.used += 1;
            }
            while self.snaps.len() < self.cutoffs.len() && self.cutoffs[self.snaps.len()] == x {
                self.snaps.push((self.num.value() / self.den.value(), self.used));
            }
            self.next_x += 1;
        }
    }
}

/// [`argument_equidistribution`] as a sweep consumer.
pub struct EquidistPlan {
    psi: Mollifier,
    mode: EquidistMode,
    cutoffs: Vec<f64>,
    engine: Engine,
}

pub enum EquidistPartial {
    Products(u64, Vec<Option<Complex64>>),
    Pieces(BlockPieces),
}

impl EquidistPlan {
    pub fn new(query: &CorrelationQuery, psi: Mollifier, mode: EquidistMode) -> Result<Self, CorrelationError> {
        query.validate()?;
        psi.validate()?;
        let cutoffs = query.grid.scales();
        let engine = match mode {
            EquidistMode::Subsampled => {
                let cps = checkpoints(&cutoffs, query.divisor);
                Engine::Sampled {
                    averager: ProductAverager::new(query.functions.clone(), query.offsets()?, query.scheme, &cps),
                    scales: cutoffs.clone(),
                }
            }
            EquidistMode::AllScales => {
                let xs: Vec<u64> = cutoffs.iter().map(|x| x.floor() as u64).collect();
                let n_max = (*xs.last().expect("grid") as f64 / query.divisor).floor() as u64;
                let mut all = AllScales {
                    averager: ProductAverager::new(
                        query.functions.clone(),
                        query.offsets()?,
                        query.scheme,
                        &[n_max],
                    ),
                    divisor: query.divisor,
                    cutoffs: xs,
                    running: WeightedAccumulator::new(query.scheme),
                    next_x: 1,
                    num: ComplexSum::default(),
                    den: CompensatedSum::default(),
                    used: 0,
                    snaps: Vec::new(),
                };
                // Scales with X < d have no terms.
                all.scales_at(0, &psi);
                Engine::All(all)
            }
        };
        Ok(Self {
            psi,
            mode,
            cutoffs,
            engine,
        })
    }

    pub fn finish(self) -> Result<EquidistSeries, CorrelationError> {
        match self.engine {
            Engine::Sampled { averager, scales } => {
                let vals = means(&averager.finish(), &scales, 1.0)?;
                let mut sum = ComplexSum::default();
                let mut values = Vec::with_capacity(vals.len());
                for (k, s) in vals.iter().enumerate() {
                    sum.add(self.psi.deviation(*s));
                    values.push(sum.value() / (k + 1) as f64);
                }
                Ok(EquidistSeries {
                    mode: self.mode,
                    cutoffs: self.cutoffs,
                    scales_used: (1..=vals.len() as u64).collect(),
                    values,
                })
            }
            Engine::All(all) => {
                let (values, scales_used) = all.snaps.iter().copied().unzip();
                Ok(EquidistSeries {
                    mode: self.mode,
                    cutoffs: self.cutoffs,
                    values,
                    scales_used,
                })
            }
        }
    }
}

impl BlockConsumer for EquidistPlan {
    type Partial = EquidistPartial;

    fn limit(&self) -> u64 {
        match &self.engine {
            Engine::All(a) => a.averager.limit(),
            Engine::Sampled { averager, .. } => averager.limit(),
        }
    }

    fn halo(&self) -> Halo {
        match &self.engine {
            Engine::All(a) => a.averager.halo(),
            Engine::Sampled { averager, .. } => averager.halo(),
        }
    }

    fn process(&self, view: &BlockView<'_>) -> Result<EquidistPartial, SweepError> {
        match &self.engine {
            Engine::Sampled { averager, .. } => Ok(EquidistPartial::Pieces(averager.process(view)?)),
            Engine::All(a) => {
                let hi = view.hi().min(a.averager.limit() + 1).max(view.lo());
                if hi == view.lo() {
                    return Ok(EquidistPartial::Products(view.lo(), Vec::new()));
                }
                let values = a
                    .averager
                    .functions
                    .iter()
                    .map(|g| view.evaluate(g))
                    .collect::<Result<Vec<_>, _>>()?;
                let block = view.block();
                let primes_only = a.averager.scheme.primes_only();
                let products = (view.lo()..hi)
                    .map(|n| {
                        if primes_only && !block.is_prime(n) {
                            return None;
                        }
                        let mut z = Complex64::new(1.0, 0.0);
                        for (vals, &s) in values.iter().zip(&a.averager.offsets) {
                            z *= vals.at(n as i64 + s);
                        }
                        Some(z)
                    })
                    .collect();
                Ok(EquidistPartial::Products(view.lo(), products))
            }
        }
    }

    fn absorb(&mut self, partial: EquidistPartial) {
        match (&mut self.engine, partial) {
            (Engine::Sampled { averager, .. }, EquidistPartial::Pieces(p)) => averager.absorb(p),
            (Engine::All(a), EquidistPartial::Products(lo, products)) => {
                for (k, z) in products.into_iter().enumerate() {
                    let n = lo + k as u64;
                    if let Some(z) = z {
                        a.running.push(n, z);
                    }
                    a.scales_at(n, &self.psi);
                }
            }
            _ => unreachable!("partial kind matches engine"),
        }
    }
}

/// `E^{log}_{X ≤ X₀} [ψ(S(X)) − ψ̄(S(X))]` for every grid cut-off `X₀`.
pub fn argument_equidistribution(
    query: &CorrelationQuery,
    psi: &Mollifier,
    mode: EquidistMode,
    config: SweepConfig,
) -> Result<EquidistSeries, CorrelationError> {
    let mut plan = EquidistPlan::new(query, psi.clone(), mode)?;
    sweep_one(&mut plan, config)?;
    plan.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::ScaleGrid;
    use crate::functions::MultiplicativeFunctionSpec;

    fn cfg() -> SweepConfig {
        SweepConfig {
            segment: 1 << 12,
            threads: 2,
        }
    }

    fn one_query(grid: ScaleGrid) -> CorrelationQuery {
        CorrelationQuery::new(vec![MultiplicativeFunctionSpec::one()], vec![0], grid)
    }

    #[test]
    fn profile_shape() {
        let p = RadialProfile::trapezoid(0.5, 0.6, 1.5, 2.0).unwrap();
        assert_eq!(p.eval(0.2), 0.0);
        assert!((p.eval(0.55) - 0.5).abs() < 1e-12);
        assert_eq!(p.eval(1.0), 1.0);
        assert_eq!(p.eval(2.5), 0.0);
        assert!(RadialProfile::new(vec![(0.0, 0.0), (1.0, 1.0)]).is_err());
        assert!(RadialProfile::new(vec![(0.5, 0.2), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn radial_mollifier_gives_zero() {
        let psi = Mollifier::Harmonic {
            profile: RadialProfile::trapezoid(0.5, 0.7, 1.5, 2.0).unwrap(),
            k: 0,
        };
        let q = CorrelationQuery::new(
            vec![MultiplicativeFunctionSpec::archimedean(2.0)],
            vec![0],
            ScaleGrid::new(10.0, 2.0, 6).unwrap(),
        );
        for mode in [EquidistMode::AllScales, EquidistMode::Subsampled] {
            let s = argument_equidistribution(&q, &psi, mode, cfg()).unwrap();
            assert!(s.values.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        }
        // A radial custom mollifier through the quadrature path.
        let radial = Mollifier::custom(0.5, Arc::new(|z: Complex64| Complex64::new(z.norm(), 0.0)));
        let s = argument_equidistribution(&q, &radial, EquidistMode::Subsampled, cfg()).unwrap();
        assert!(s.values.iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn constant_sequence_gives_constant_statistic() {
        let psi = Mollifier::Harmonic {
            profile: RadialProfile::new(vec![(0.4, 0.0), (0.6, 0.6), (2.0, 2.0), (3.0, 0.0)]).unwrap(),
            k: 1,
        };
        let s = argument_equidistribution(&one_query(ScaleGrid::new(4.0, 3.0, 5).unwrap()), &psi, EquidistMode::AllScales, cfg())
            .unwrap();
        for (z, used) in s.values.iter().zip(&s.scales_used) {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-14);
            assert!(*used > 0);
        }
        assert_eq!(s.scales_used[0], 4);
    }

    #[test]
    fn quadrature_matches_harmonic() {
        let profile = RadialProfile::trapezoid(0.3, 0.5, 1.5, 2.0).unwrap();
        let h = Mollifier::Harmonic { profile: profile.clone(), k: 2 };
        let p2 = profile.clone();
        let c = Mollifier::custom(
            0.3,
            Arc::new(move |z: Complex64| Complex64::from_polar(p2.eval(z.norm()), 2.0 * z.arg()) + p2.eval(z.norm())),
        );
        for z in [Complex64::new(0.4, 0.7), Complex64::new(-1.2, 0.1)] {
            assert!(h.rotational_average(z).norm() < 1e-15);
            assert!((c.rotational_average(z) - Complex64::new(profile.eval(z.norm()), 0.0)).norm() < 1e-14);
        }
        assert!(Mollifier::custom(0.0, Arc::new(|z| z)).validate().is_err());
    }

    #[test]
    fn all_scales_matches_direct() {
        let g = MultiplicativeFunctionSpec::archimedean(3.0);
        let q = CorrelationQuery::new(vec![g.clone()], vec![0], ScaleGrid::new(20.0, 3.0, 4).unwrap()).with_divisor(1.5);
        let psi = Mollifier::Harmonic {
            profile: RadialProfile::trapezoid(0.1, 0.2, 1.5, 2.0).unwrap(),
            k: 1,
        };
        let s = argument_equidistribution(&q, &psi, EquidistMode::AllScales, cfg()).unwrap();
        for (j, &x0) in s.cutoffs.iter().enumerate() {
            let (mut num, mut den) = (Complex64::new(0.0, 0.0), 0.0);
            for x in 1..=x0.floor() as u64 {
                let n = (x as f64 / 1.5).floor() as u64;
                if n == 0 {
                    continue;
                }
                let sx = (1..=n).map(|m| g.value_at(m as i64)).sum::<Complex64>() / n as f64;
                num += psi.deviation(sx) / x as f64;
                den += 1.0 / x as f64;
            }
            assert!((s.values[j] - num / den).norm() < 1e-12, "{j}");
        }
    }
}
