//! Finite-scale correlation averages `S(X) = E_{n ≤ X/d} Π g_i(n + a·h_i)`.

mod equidist;
mod fd;
mod isotopy;

use std::io;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::averaging::{
    checkpoints, AverageError, BlockPieces, ScaleGrid, SnapshotFolder, WeightScheme,
    WeightedAccumulator,
};
use crate::functions::{FunctionError, MultiplicativeFunctionSpec};
use crate::sweep::{sweep_one, BlockConsumer, BlockView, Halo, SweepConfig, SweepError};

pub use equidist::{
    argument_equidistribution, EquidistMode, EquidistPlan, EquidistSeries, Mollifier, RadialProfile,
};
pub use fd::{fd_table, FdFit, FdTable, FdTablePlan};
pub use isotopy::{
    archimedean_isotopy_residual, nonarch_isotopy_residual, ArchIsotopyPlan, IsotopySeries,
    NonArchIsotopyPlan,
};

#[derive(Debug, Error)]
pub enum CorrelationError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("scale {scale} gives an empty average (X/d = {ratio})")]
    EmptyScale { scale: f64, ratio: f64 },
    #[error(transparent)]
    Average(#[from] AverageError),
    #[error(transparent)]
    Function(#[from] FunctionError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// `E_{n ≤ X/d} Π g_i(n + a·h_i)` on a grid of `X`.
#[derive(Clone, Debug)]
pub struct CorrelationQuery {
    pub functions: Vec<MultiplicativeFunctionSpec>,
    pub shifts: Vec<i64>,
    pub dilation: i64,
    pub divisor: f64,
    pub scheme: WeightScheme,
    pub grid: ScaleGrid,
}

impl CorrelationQuery {
    /// Unweighted query with `a = 1`, `d = 1`.
    pub fn new(
        functions: Vec<MultiplicativeFunctionSpec>,
        shifts: Vec<i64>,
        grid: ScaleGrid,
    ) -> Self {
        Self {
            functions,
            shifts,
            dilation: 1,
            divisor: 1.0,
            scheme: WeightScheme::Unweighted,
            grid,
        }
    }

    pub fn with_scheme(mut self, scheme: WeightScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_dilation(mut self, a: i64) -> Self {
        self.dilation = a;
        self
    }

    pub fn with_divisor(mut self, d: f64) -> Self {
        self.divisor = d;
        self
    }

    pub fn validate(&self) -> Result<(), CorrelationError> {
        if self.functions.is_empty() {
            return Err(CorrelationError::InvalidQuery("need at least one function".into()));
        }
        if self.functions.len() != self.shifts.len() {
            return Err(CorrelationError::InvalidQuery(format!(
                "{} functions but {} shifts",
                self.functions.len(),
                self.shifts.len()
            )));
        }
        if !(self.divisor > 0.0 && self.divisor.is_finite()) {
            return Err(CorrelationError::InvalidQuery(format!(
                "divisor must be positive, got {}",
                self.divisor
            )));
        }
        self.grid.validate()?;
        self.offsets()?;
        Ok(())
    }

    /// `a·h_i`.
    pub fn offsets(&self) -> Result<Vec<i64>, CorrelationError> {
        self.shifts
            .iter()
            .map(|&h| {
                h.checked_mul(self.dilation).ok_or_else(|| {
                    CorrelationError::InvalidQuery(format!("shift {h} times {} overflows", self.dilation))
                })
            })
            .collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.functions.iter().map(|g| g.label().to_string()).collect()
    }
}

/// Streams `Π g_i(n + s_i)` into snapshots at arbitrary integer cut-offs.
pub struct ProductAverager {
    functions: Vec<MultiplicativeFunctionSpec>,
    offsets: Vec<i64>,
    scheme: WeightScheme,
    order: Vec<usize>,
    folder: SnapshotFolder,
}

impl ProductAverager {
    /// `cutoffs` in any order; [`finish`](Self::finish) returns the
    /// accumulators in the same order.
    pub fn new(
        functions: Vec<MultiplicativeFunctionSpec>,
        offsets: Vec<i64>,
        scheme: WeightScheme,
        cutoffs: &[u64],
    ) -> Self {
        let mut order: Vec<usize> = (0..cutoffs.len()).collect();
        order.sort_by_key(|&i| cutoffs[i]);
        let sorted = order.iter().map(|&i| cutoffs[i]).collect();
        Self {
            functions,
            offsets,
            scheme,
            order,
            folder: SnapshotFolder::new(scheme, sorted),
        }
    }

    pub fn finish(self) -> Vec<WeightedAccumulator> {
        let sorted = self.folder.finish();
        let mut out = vec![WeightedAccumulator::new(self.scheme); sorted.len()];
        for (k, &i) in self.order.iter().enumerate() {
            out[i] = sorted[k];
        }
        out
    }
}

impl BlockConsumer for ProductAverager {
    type Partial = BlockPieces;

    fn limit(&self) -> u64 {
        self.folder.limit()
    }

    fn halo(&self) -> Halo {
        Halo::covering(self.offsets.iter().copied())
    }

    fn process(&self, view: &BlockView<'_>) -> Result<BlockPieces, SweepError> {
        let hi = view.hi().min(self.limit() + 1).max(view.lo());
        if hi == view.lo() {
            return Ok(self.folder.pieces(view.lo(), view.lo(), self.scheme, |_| None));
        }
        let values = self
            .functions
            .iter()
            .map(|g| view.evaluate(g))
            .collect::<Result<Vec<_>, _>>()?;
        let block = view.block();
        let primes_only = self.scheme.primes_only();
        Ok(self.folder.pieces(view.lo(), hi, self.scheme, |n| {
            if primes_only && !block.is_prime(n) {
                return None;
            }
            let mut z = Complex64::new(1.0, 0.0);
            for (vals, &s) in values.iter().zip(&self.offsets) {
                z *= vals.at(n as i64 + s);
            }
            Some(z)
        }))
    }

    fn absorb(&mut self, partial: BlockPieces) {
        self.folder.absorb(partial);
    }
}

/// One correlation average per grid scale.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub functions: Vec<String>,
    pub shifts: Vec<i64>,
    pub dilation: i64,
    pub divisor: f64,
    pub scheme: WeightScheme,
    pub scales: Vec<f64>,
    pub values: Vec<Complex64>,
    pub counts: Vec<u64>,
}

impl CorrelationSeries {
    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    /// Pairs `(i, j)` breaking `|S(x) − S(y)| ≤ 2|ln x − ln y| + 4d/min(x, y)`.
    pub fn log_lipschitz_violations(&self) -> Vec<(usize, usize)> {
        let mut bad = Vec::new();
        for i in 0..self.scales.len() {
            for j in i + 1..self.scales.len() {
                let (x, y) = (self.scales[i], self.scales[j]);
                let bound = 2.0 * (x.ln() - y.ln()).abs() + 4.0 * self.divisor / x.min(y);
                if (self.values[i] - self.values[j]).norm() > bound + 1e-12 {
                    bad.push((i, j));
                }
            }
        }
        bad
    }

    /// CSV with columns `scale, re, im, abs`.
    pub fn write_csv(&self, w: impl io::Write) -> Result<(), CorrelationError> {
        write_complex_csv(w, &self.scales, &self.values)
    }
}

pub(crate) fn write_complex_csv(
    w: impl io::Write,
    scales: &[f64],
    values: &[Complex64],
) -> Result<(), CorrelationError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["scale", "re", "im", "abs"])?;
    for (x, z) in scales.iter().zip(values) {
        out.write_record([
            x.to_string(),
            z.re.to_string(),
            z.im.to_string(),
            z.norm().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Fraction of entries above `eps`.
pub fn fraction_above(values: &[f64], eps: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&v| v > eps).count() as f64 / values.len() as f64
}

fn means(
    accs: &[WeightedAccumulator],
    scales: &[f64],
    divisor: f64,
) -> Result<Vec<Complex64>, CorrelationError> {
    accs.iter()
        .zip(scales)
        .map(|(a, &x)| {
            a.mean().ok_or(CorrelationError::EmptyScale {
                scale: x,
                ratio: x / divisor,
            })
        })
        .collect()
}

/// [`correlate`] as a sweep consumer.
pub struct CorrelationPlan {
    query: CorrelationQuery,
    scales: Vec<f64>,
    averager: ProductAverager,
}

impl CorrelationPlan {
    pub fn new(query: CorrelationQuery) -> Result<Self, CorrelationError> {
        query.validate()?;
        let scales = query.grid.scales();
        let cps = checkpoints(&scales, query.divisor);
        let averager = ProductAverager::new(
            query.functions.clone(),
            query.offsets()?,
            query.scheme,
            &cps,
        );
        Ok(Self {
            query,
            scales,
            averager,
        })
    }

    pub fn finish(self) -> Result<CorrelationSeries, CorrelationError> {
        let accs = self.averager.finish();
        let values = means(&accs, &self.scales, self.query.divisor)?;
        Ok(CorrelationSeries {
            functions: self.query.labels(),
            shifts: self.query.shifts.clone(),
            dilation: self.query.dilation,
            divisor: self.query.divisor,
            scheme: self.query.scheme,
            counts: accs.iter().map(|a| a.count()).collect(),
            scales: self.scales,
            values,
        })
    }
}

impl BlockConsumer for CorrelationPlan {
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

/// Evaluate a correlation query at every scale of its grid in one pass.
pub fn correlate(
    query: &CorrelationQuery,
    config: SweepConfig,
) -> Result<CorrelationSeries, CorrelationError> {
    let mut plan = CorrelationPlan::new(query.clone())?;
    sweep_one(&mut plan, config)?;
    plan.finish()
}

/// One window of the three-point check.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ThreePointWindow {
    pub x: f64,
    pub omega: f64,
    pub value: Complex64,
    pub magnitude: f64,
}

/// The three-point check over a list of windows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThreePointReport {
    pub function: String,
    pub shifts: [i64; 3],
    pub windows: Vec<ThreePointWindow>,
    pub bound: f64,
}

impl ThreePointReport {
    pub fn max_magnitude(&self) -> f64 {
        self.windows.iter().map(|w| w.magnitude).fold(0.0, f64::max)
    }

    /// CSV `x, omega, re, im, abs`.
    pub fn write_csv(&self, w: impl io::Write) -> Result<(), CorrelationError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x", "omega", "re", "im", "abs"])?;
        for win in &self.windows {
            out.write_record([
                win.x.to_string(),
                win.omega.to_string(),
                win.value.re.to_string(),
                win.value.im.to_string(),
                win.magnitude.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// [`three_point_bound_check`] as a sweep consumer.
pub struct ThreePointPlan {
    function: String,
    shifts: [i64; 3],
    windows: Vec<(f64, f64)>,
    averager: ProductAverager,
}

impl ThreePointPlan {
    pub fn new(
        g: MultiplicativeFunctionSpec,
        shifts: [i64; 3],
        windows: &[(f64, f64)],
    ) -> Result<Self, CorrelationError> {
        let [a, b, c] = shifts;
        if a == b || b == c || a == c {
            return Err(CorrelationError::InvalidQuery(format!(
                "shifts must be distinct, got {shifts:?}"
            )));
        }
        if windows.is_empty() {
            return Err(CorrelationError::InvalidQuery("no windows".into()));
        }
        let mut cps = Vec::with_capacity(2 * windows.len());
        for &(x, omega) in windows {
            if !(x >= 1.0 && x.is_finite() && omega >= 1.0 && omega.is_finite()) {
                return Err(CorrelationError::InvalidQuery(format!(
                    "window (x = {x}, omega = {omega}) needs x >= 1 and omega >= 1"
                )));
            }
            let start = (x / omega).ceil() as u64;
            let end = x.floor() as u64;
            if start > end {
                return Err(CorrelationError::EmptyScale { scale: x, ratio: omega });
            }
            cps.push(start.max(1) - 1);
            cps.push(end);
        }
        let function = g.label().to_string();
        let averager = ProductAverager::new(
            vec![g.clone(), g.clone(), g],
            shifts.to_vec(),
            WeightScheme::Log,
            &cps,
        );
        Ok(Self {
            function,
            shifts,
            windows: windows.to_vec(),
            averager,
        })
    }

    pub fn finish(self) -> ThreePointReport {
        let accs = self.averager.finish();
        let windows = self
            .windows
            .iter()
            .enumerate()
            .map(|(k, &(x, omega))| {
                let w = accs[2 * k + 1].since(&accs[2 * k]);
                let value = w.mean().expect("window checked non-empty");
                ThreePointWindow {
                    x,
                    omega,
                    value,
                    magnitude: value.norm(),
                }
            })
            .collect();
        ThreePointReport {
            function: self.function,
            shifts: self.shifts,
            windows,
            bound: std::f64::consts::FRAC_1_SQRT_2,
        }
    }
}

impl BlockConsumer for ThreePointPlan {
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

/// `|E^{log}_{x/ω ≤ n ≤ x} g(n+h₁)g(n+h₂)g(n+h₃)|` for each window `(x, ω)`.
pub fn three_point_bound_check(
    g: &MultiplicativeFunctionSpec,
    shifts: [i64; 3],
    windows: &[(f64, f64)],
    config: SweepConfig,
) -> Result<ThreePointReport, CorrelationError> {
    let mut plan = ThreePointPlan::new(g.clone(), shifts, windows)?;
    sweep_one(&mut plan, config)?;
    Ok(plan.finish())
}
