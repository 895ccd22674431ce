//! Isotopy residuals: `|S(X) − q^{it} S(X/q)|` and `|S₋(X) − χ(−1) S₊(X)|`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{fraction_above, means, write_complex_csv, CorrelationError, CorrelationQuery, ProductAverager};
use crate::averaging::{checkpoints, BlockPieces};
use crate::functions::DirichletCharacter;
use crate::sweep::{sweep_one, BlockConsumer, BlockView, Halo, SweepConfig, SweepError};

/// Residual per scale with the two correlation values it compares.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsotopySeries {
    pub scales: Vec<f64>,
    pub left: Vec<Complex64>,
    pub right: Vec<Complex64>,
    pub residuals: Vec<f64>,
}

impl IsotopySeries {
    /// Fraction of scales with residual above `eps`.
    pub fn fraction_above(&self, eps: f64) -> f64 {
        fraction_above(&self.residuals, eps)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// CSV `scale, re, im, abs` of `left − right`.
    pub fn write_csv(&self, w: impl std::io::Write) -> Result<(), CorrelationError> {
        let diff: Vec<Complex64> = self.left.iter().zip(&self.right).map(|(a, b)| a - b).collect();
        write_complex_csv(w, &self.scales, &diff)
    }
}

/// [`archimedean_isotopy_residual`] as a sweep consumer.
pub struct ArchIsotopyPlan {
    scales: Vec<f64>,
    q: f64,
    t: f64,
    divisor: f64,
    averager: ProductAverager,
}

impl ArchIsotopyPlan {
    pub fn new(query: &CorrelationQuery, q: f64, t: f64) -> Result<Self, CorrelationError> {
        query.validate()?;
        if !(q > 0.0 && q.is_finite()) {
            return Err(CorrelationError::InvalidQuery(format!("q must be positive, got {q}")));
        }
        if !t.is_finite() {
            return Err(CorrelationError::InvalidQuery(format!("t must be finite, got {t}")));
        }
        let scales = query.grid.scales();
        let mut all: Vec<f64> = scales.clone();
        all.extend(scales.iter().map(|x| x / q));
        let cps = checkpoints(&all, query.divisor);
        if let Some(k) = cps.iter().position(|&c| c == 0) {
            return Err(CorrelationError::EmptyScale {
                scale: all[k],
                ratio: all[k] / query.divisor,
            });
        }
        Ok(Self {
            averager: ProductAverager::new(query.functions.clone(), query.offsets()?, query.scheme, &cps),
            scales,
            q,
            t,
            divisor: query.divisor,
        })
    }

    pub fn finish(self) -> Result<IsotopySeries, CorrelationError> {
        let m = self.scales.len();
        let mut all = self.scales.clone();
        all.extend(self.scales.iter().map(|x| x / self.q));
        let vals = means(&self.averager.finish(), &all, self.divisor)?;
        let rot = Complex64::from_polar(1.0, self.t * self.q.ln());
        let left = vals[..m].to_vec();
        let right: Vec<Complex64> = vals[m..].iter().map(|v| rot * v).collect();
        let residuals = left.iter().zip(&right).map(|(a, b)| (a - b).norm()).collect();
        Ok(IsotopySeries {
            scales: self.scales,
            left,
            right,
            residuals,
        })
    }
}

impl BlockConsumer for ArchIsotopyPlan {
    type Partial = BlockPieces;

    fn limit(&self) -> u64 {
        self.averager.limit()
    }

    fn halo(&self) -> Halo {
        self.averager.halo()
    }

    fn process(&self, view: &BlockView<'_>) -> Result<BlockPieces, SweepError> {
        self.averager.process(view)
    }

    fn absorb(&mut self, partial: BlockPieces) {
        self.averager.absorb(partial);
    }
}

/// `|S(X) − q^{it}·S(X/q)|` at every grid scale.
pub fn archimedean_isotopy_residual(
    query: &CorrelationQuery,
    q: f64,
    t: f64,
    config: SweepConfig,
) -> Result<IsotopySeries, CorrelationError> {
    let mut plan = ArchIsotopyPlan::new(query, q, t)?;
    sweep_one(&mut plan, config)?;
    plan.finish()
}

/// [`nonarch_isotopy_residual`] as a sweep consumer.
pub struct NonArchIsotopyPlan {
    scales: Vec<f64>,
    divisor: f64,
    parity: f64,
    plus: ProductAverager,
    minus: ProductAverager,
}

impl NonArchIsotopyPlan {
    pub fn new(query: &CorrelationQuery, chi: &DirichletCharacter) -> Result<Self, CorrelationError> {
        query.validate()?;
        let scales = query.grid.scales();
        let cps = checkpoints(&scales, query.divisor);
        let offsets = query.offsets()?;
        let negated: Vec<i64> = offsets.iter().map(|s| -s).collect();
        Ok(Self {
            plus: ProductAverager::new(query.functions.clone(), offsets, query.scheme, &cps),
            minus: ProductAverager::new(query.functions.clone(), negated, query.scheme, &cps),
            scales,
            divisor: query.divisor,
            parity: chi.parity() as f64,
        })
    }

    pub fn finish(self) -> Result<IsotopySeries, CorrelationError> {
        let plus = means(&self.plus.finish(), &self.scales, self.divisor)?;
        let minus = means(&self.minus.finish(), &self.scales, self.divisor)?;
        let right: Vec<Complex64> = plus.iter().map(|v| v * self.parity).collect();
        let residuals = minus.iter().zip(&right).map(|(a, b)| (a - b).norm()).collect();
        Ok(IsotopySeries {
            scales: self.scales,
            left: minus,
            right,
            residuals,
        })
    }
}

impl BlockConsumer for NonArchIsotopyPlan {
    type Partial = (BlockPieces, BlockPieces);

    fn limit(&self) -> u64 {
        self.plus.limit()
    }

    fn halo(&self) -> Halo {
        let (a, b) = (self.plus.halo(), self.minus.halo());
        Halo {
            back: a.back.max(b.back),
            forward: a.forward.max(b.forward),
        }
    }

    fn process(&self, view: &BlockView<'_>) -> Result<Self::Partial, SweepError> {
        Ok((self.plus.process(view)?, self.minus.process(view)?))
    }

    fn absorb(&mut self, (p, m): Self::Partial) {
        self.plus.absorb(p);
        self.minus.absorb(m);
    }
}

/// `|S₋(X) − χ(−1)·S₊(X)|` where `S±` use shifts `±a·h_i`.
pub fn nonarch_isotopy_residual(
    query: &CorrelationQuery,
    chi: &DirichletCharacter,
    config: SweepConfig,
) -> Result<IsotopySeries, CorrelationError> {
    let mut plan = NonArchIsotopyPlan::new(query, chi)?;
    sweep_one(&mut plan, config)?;
    plan.finish()
}
