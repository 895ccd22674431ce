//! Tables of `f_d(a)` at a fixed scale and their `d^{-it}` fits.

use std::io;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{means, CorrelationError, ProductAverager};
use crate::averaging::{checkpoints, BlockPieces, WeightScheme};
use crate::functions::MultiplicativeFunctionSpec;
use crate::sweep::{sweep_one, BlockConsumer, BlockView, Halo, SweepConfig, SweepError};

/// `f_d(a) = E_{n ≤ X/d} Π g_i(n + a·h_i)` for `d ∈ D`, `a ∈ A`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FdTable {
    pub functions: Vec<String>,
    pub shifts: Vec<i64>,
    pub scheme: WeightScheme,
    pub scale: f64,
    pub divisors: Vec<f64>,
    pub dilations: Vec<i64>,
    /// `values[i][j] = f_{divisors[j]}(dilations[i])`.
    pub values: Vec<Vec<Complex64>>,
}

/// Best `f̂(a)` for a given `t` and the loglog-averaged misfit.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FdFit {
    pub a: i64,
    pub t: f64,
    pub fhat: Complex64,
    pub residual: f64,
}

fn loglog_weight(d: f64) -> f64 {
    1.0 / (d * d.ln_1p())
}

impl FdTable {
    /// Per `a`: the loglog-weighted least-squares `f̂(a)` for the model
    /// `f_d(a) ≈ f̂(a)·d^{-it}`, and `E^{loglog}_d |f_d(a) − f̂(a) d^{-it}|`.
    pub fn fit(&self, t: f64) -> Vec<FdFit> {
        let weights: Vec<f64> = self.divisors.iter().map(|&d| loglog_weight(d)).collect();
        let total: f64 = weights.iter().sum();
        let twist: Vec<Complex64> = self
            .divisors
            .iter()
            .map(|&d| Complex64::from_polar(1.0, -t * d.ln()))
            .collect();
        self.dilations
            .iter()
            .zip(&self.values)
            .map(|(&a, row)| {
                let mut num = Complex64::new(0.0, 0.0);
                for ((v, w), tw) in row.iter().zip(&weights).zip(&twist) {
                    num += v * tw.conj() * *w;
                }
                let fhat = num / total;
                let residual = row
                    .iter()
                    .zip(&weights)
                    .zip(&twist)
                    .map(|((v, w), tw)| w * (v - fhat * tw).norm())
                    .sum::<f64>()
                    / total;
                FdFit { a, t, fhat, residual }
            })
            .collect()
    }

    /// Scan `t ∈ [−t_max, t_max]` for the smallest total residual, then
    /// refine once around the best point at a twentieth of the spacing.
    pub fn fit_t(&self, t_max: f64) -> (f64, Vec<FdFit>) {
        let (lo, hi) = self
            .divisors
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        let spread = (hi / lo).ln();
        if !(spread > 0.0) || !(t_max > 0.0) {
            return (0.0, self.fit(0.0));
        }
        let total = |t: f64| self.fit(t).iter().map(|f| f.residual).sum::<f64>();
        let step = 1.0 / (4.0 * spread);
        let scan = |center: f64, step: f64, half: i64| {
            let mut best = (center, total(center));
            for k in 1..=half {
                for t in [center - k as f64 * step, center + k as f64 * step] {
                    if t.abs() > t_max + 1e-12 {
                        continue;
                    }
                    let r = total(t);
                    if r < best.1 - 1e-12 {
                        best = (t, r);
                    }
                }
            }
            best.0
        };
        let coarse = scan(0.0, step, (t_max / step).floor() as i64);
        let t = scan(coarse, step / 20.0, 20);
        (t, self.fit(t))
    }

    /// CSV with columns `a, d, re, im, abs`.
    pub fn write_csv(&self, w: impl io::Write) -> Result<(), CorrelationError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["a", "d", "re", "im", "abs"])?;
        for (a, row) in self.dilations.iter().zip(&self.values) {
            for (d, z) in self.divisors.iter().zip(row) {
                out.write_record([
                    a.to_string(),
                    d.to_string(),
                    z.re.to_string(),
                    z.im.to_string(),
                    z.norm().to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// [`fd_table`] as a sweep consumer: one product stream per `a`.
pub struct FdTablePlan {
    functions: Vec<String>,
    shifts: Vec<i64>,
    scheme: WeightScheme,
    scale: f64,
    divisors: Vec<f64>,
    dilations: Vec<i64>,
    averagers: Vec<ProductAverager>,
}

impl FdTablePlan {
    pub fn new(
        functions: Vec<MultiplicativeFunctionSpec>,
        shifts: Vec<i64>,
        scheme: WeightScheme,
        divisors: Vec<f64>,
        dilations: Vec<i64>,
        scale: f64,
    ) -> Result<Self, CorrelationError> {
        if divisors.is_empty() || dilations.is_empty() {
            return Err(CorrelationError::InvalidQuery("empty divisor or dilation list".into()));
        }
        if functions.is_empty() || functions.len() != shifts.len() {
            return Err(CorrelationError::InvalidQuery(
                "need one shift per function and at least one function".into(),
            ));
        }
        for &d in &divisors {
            if !(d > 0.0 && d.is_finite()) || scale / d < 1.0 {
                return Err(CorrelationError::EmptyScale {
                    scale,
                    ratio: scale / d,
                });
            }
        }
        let cps = divisors
            .iter()
            .map(|&d| checkpoints(&[scale], d)[0])
            .collect::<Vec<_>>();
        let mut averagers = Vec::with_capacity(dilations.len());
        for &a in &dilations {
            let offsets = shifts
                .iter()
                .map(|&h| {
                    h.checked_mul(a)
                        .ok_or_else(|| CorrelationError::InvalidQuery(format!("shift {h}·{a} overflows")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            averagers.push(ProductAverager::new(functions.clone(), offsets, scheme, &cps));
        }
        Ok(Self {
            functions: functions.iter().map(|g| g.label().to_string()).collect(),
            shifts,
            scheme,
            scale,
            divisors,
            dilations,
            averagers,
        })
    }

    pub fn finish(self) -> Result<FdTable, CorrelationError> {
        let scales: Vec<f64> = vec![self.scale; self.divisors.len()];
        let mut values = Vec::with_capacity(self.averagers.len());
        for avg in self.averagers {
            values.push(means(&avg.finish(), &scales, 1.0)?);
        }
        Ok(FdTable {
            functions: self.functions,
            shifts: self.shifts,
            scheme: self.scheme,
            scale: self.scale,
            divisors: self.divisors,
            dilations: self.dilations,
            values,
        })
    }
}

impl BlockConsumer for FdTablePlan {
    type Partial = Vec<BlockPieces>;

    fn limit(&self) -> u64 {
        self.averagers.iter().map(|a| a.limit()).max().unwrap_or(0)
    }

    fn halo(&self) -> Halo {
        self.averagers.iter().fold(Halo::default(), |h, a| {
            let o = a.halo();
            Halo {
                back: h.back.max(o.back),
                forward: h.forward.max(o.forward),
            }
        })
    }

    fn process(&self, view: &BlockView<'_>) -> Result<Vec<BlockPieces>, SweepError> {
        self.averagers.iter().map(|a| a.process(view)).collect()
    }

    fn absorb(&mut self, partial: Vec<BlockPieces>) {
        for (a, p) in self.averagers.iter_mut().zip(partial) {
            a.absorb(p);
        }
    }
}

/// The matrix `f_d(a)` at scale `X`.
pub fn fd_table(
    functions: &[MultiplicativeFunctionSpec],
    shifts: &[i64],
    scheme: WeightScheme,
    divisors: &[f64],
    dilations: &[i64],
    scale: f64,
    config: SweepConfig,
) -> Result<FdTable, CorrelationError> {
    let mut plan = FdTablePlan::new(
        functions.to_vec(),
        shifts.to_vec(),
        scheme,
        divisors.to_vec(),
        dilations.to_vec(),
        scale,
    )?;
    sweep_one(&mut plan, config)?;
    plan.finish()
}
