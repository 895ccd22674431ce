//! Largest-prime-factor races, joint smoothness densities and the Dickman
//! function.

use std::fmt;
use std::io;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::averaging::{checkpoints, AverageError, BlockPieces, ScaleGrid, SnapshotFolder, WeightScheme};
use crate::sweep::{sweep_one, BlockConsumer, BlockView, Halo, SweepConfig, SweepError};

#[derive(Debug, Error)]
pub enum SmoothError {
    #[error("u = {u} outside [0, {u_max}]")]
    OutOfDomain { u: f64, u_max: f64 },
    #[error("invalid Dickman solver settings: {0}")]
    Solver(String),
    #[error("invalid exponent: {0}")]
    Exponent(String),
    #[error(transparent)]
    Average(#[from] AverageError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Tabulated Dickman function on `[0, u_max]`.
#[derive(Clone, Debug)]
pub struct DickmanSolver {
    u_max: f64,
    steps_per_unit: usize,
    table: Vec<f64>,
}

impl DickmanSolver {
    pub const DEFAULT_U_MAX: f64 = 20.0;
    pub const DEFAULT_STEPS: usize = 1000;

    /// Solve with step `1/steps_per_unit` up to `u_max`.
    ///
    /// Marches `u·ρ(u) = ∫_{u−1}^{u} ρ(t) dt`, recomputing the integral at
    /// every node. Each smooth piece between integers uses the trapezoid
    /// rule with the Euler–Maclaurin end correction `h²/12·(ρ′(a) − ρ′(b))`,
    /// where `ρ′(t) = −ρ(t−1)/t` comes from the table. Marching the
    /// difference form `ρ(u) = ρ(u₀) − ∫ ρ(s−1)/s ds` instead lets early
    /// truncation error persist as a slowly decaying mode, which swamps ρ
    /// near `u = 10`.
    pub fn new(u_max: f64, steps_per_unit: usize) -> Result<Self, SmoothError> {
        if !(u_max >= 1.0 && u_max.is_finite() && u_max <= 1e3) {
            return Err(SmoothError::Solver(format!("u_max must be in [1, 1000], got {u_max}")));
        }
        if steps_per_unit < 4 {
            return Err(SmoothError::Solver(format!(
                "steps_per_unit must be >= 4, got {steps_per_unit}"
            )));
        }
        let s = steps_per_unit;
        let h = 1.0 / s as f64;
        let nodes = (u_max.ceil() as usize) * s;
        let mut table = vec![1.0; nodes + 1];
        // ρ′ at node i, taken inside the unit piece starting at node `piece`.
        let deriv = |table: &[f64], i: usize, piece: usize| -> f64 {
            if piece == 0 {
                0.0
            } else {
                -table[i - s] / (i as f64 * h)
            }
        };
        for k in s + 1..=nodes {
            let a = k - s;
            let b = (k / s) * s;
            let mut rest = 0.0;
            let mut right = a;
            if b > a && b < k {
                // Left piece [a, b], fully known.
                let piece = (a / s) * s;
                let inner: f64 = table[a + 1..b].iter().sum();
                rest += h * (inner + 0.5 * (table[a] + table[b]));
                rest += h * h / 12.0 * (deriv(&table, a, piece) - deriv(&table, b, piece));
                right = b;
            }
            // Right piece [right, k] with ρ(k) unknown.
            let piece = ((k - 1) / s) * s;
            let inner: f64 = table[right + 1..k].iter().sum();
            rest += h * (inner + 0.5 * table[right]);
            rest += h * h / 12.0 * (deriv(&table, right, piece) - deriv(&table, k, piece));
            let u = k as f64 * h;
            table[k] = rest / (u - 0.5 * h);
        }
        Ok(Self {
            u_max,
            steps_per_unit,
            table,
        })
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn step(&self) -> f64 {
        1.0 / self.steps_per_unit as f64
    }

    /// `(u, ρ(u))` at every node.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = self.step();
        self.table.iter().enumerate().map(move |(k, &r)| (k as f64 * h, r))
    }

    /// `ρ(u)`, interpolated with four nodes from the same unit piece.
    pub fn rho(&self, u: f64) -> Result<f64, SmoothError> {
        if !(u >= 0.0 && u <= self.u_max) {
            return Err(SmoothError::OutOfDomain { u, u_max: self.u_max });
        }
        if u <= 1.0 {
            return Ok(1.0);
        }
        let s = self.steps_per_unit;
        let x = u * s as f64;
        let i = x.floor() as usize;
        let frac = x - i as f64;
        if frac == 0.0 {
            return Ok(self.table[i]);
        }
        let start = (i / s) * s;
        let first = i.saturating_sub(1).clamp(start, start + s - 3);
        let p = x - first as f64;
        let mut r = 0.0;
        for j in 0..4 {
            let mut w = 1.0;
            for m in 0..4 {
                if m != j {
                    w *= (p - m as f64) / (j as f64 - m as f64);
                }
            }
            r += w * self.table[first + j];
        }
        Ok(r)
    }

    /// Largest `|u·ρ′(u) + ρ(u−1)|` at nodes in `[lo, hi]`, with `ρ′` by
    /// central differences; nodes at integers, where `ρ″` jumps, are skipped.
    pub fn dde_residual(&self, lo: f64, hi: f64) -> f64 {
        let s = self.steps_per_unit;
        let h = self.step();
        let mut worst = 0.0f64;
        for k in 1..self.table.len() - 1 {
            let u = k as f64 * h;
            if u < lo || u > hi || k % s == 0 || u <= 1.0 {
                continue;
            }
            let d = (self.table[k + 1] - self.table[k - 1]) / (2.0 * h);
            worst = worst.max((u * d + self.table[k - s]).abs());
        }
        worst
    }
}

impl Default for DickmanSolver {
    fn default() -> Self {
        Self::new(Self::DEFAULT_U_MAX, Self::DEFAULT_STEPS).expect("default settings are valid")
    }
}

/// A rational exponent `num/den` in `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exponent {
    pub num: u32,
    pub den: u32,
}

impl Exponent {
    pub fn new(num: u32, den: u32) -> Result<Self, SmoothError> {
        if den == 0 || num == 0 || num >= den {
            return Err(SmoothError::Exponent(format!("{num}/{den} is not in (0, 1)")));
        }
        let g = gcd(num, den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `p < n^{num/den}`, exactly.
    pub fn below(&self, p: u64, n: u64) -> bool {
        // p^den < n^num
        let bits_p = 64 - p.leading_zeros();
        let bits_n = 64 - n.leading_zeros();
        if bits_p * self.den <= 127 && bits_n * self.num <= 127 {
            let lhs = (p as u128).pow(self.den);
            let rhs = (n as u128).pow(self.num);
            return lhs < rhs;
        }
        BigUint::from(p).pow(self.den) < BigUint::from(n).pow(self.num)
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Exponent {
    type Err = SmoothError;

    /// `"a/b"` or a decimal such as `"0.25"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || SmoothError::Exponent(format!("cannot parse '{s}' as a rational"));
        if let Some((a, b)) = s.split_once('/') {
            let a = a.trim().parse().map_err(|_| bad())?;
            let b = b.trim().parse().map_err(|_| bad())?;
            return Exponent::new(a, b);
        }
        let (int, frac) = s.split_once('.').ok_or_else(bad)?;
        if frac.len() > 9 || !frac.chars().all(|c| c.is_ascii_digit()) || !(int.is_empty() || int == "0") {
            return Err(bad());
        }
        let den = 10u32.pow(frac.len() as u32);
        let num = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        Exponent::new(num, den)
    }
}

/// `E_{n ≤ X} 1_{P⁺(n) < P⁺(n+1)}` per scale.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RaceSeries {
    pub scales: Vec<f64>,
    pub freq: Vec<f64>,
    pub counts: Vec<u64>,
}

impl RaceSeries {
    /// CSV `scale, empirical, target, gap` against the limit 1/2.
    pub fn write_csv(&self, w: impl io::Write) -> Result<(), SmoothError> {
        write_target_csv(w, &self.scales, &self.freq, 0.5)
    }
}

fn write_target_csv(w: impl io::Write, scales: &[f64], values: &[f64], target: f64) -> Result<(), SmoothError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["scale", "empirical", "target", "gap"])?;
    for (x, v) in scales.iter().zip(values) {
        out.write_record([
            x.to_string(),
            v.to_string(),
            target.to_string(),
            (v - target).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn real_folder_means(accs: Vec<crate::averaging::WeightedAccumulator>) -> (Vec<f64>, Vec<u64>) {
    accs.iter()
        .map(|a| (a.mean().map_or(f64::NAN, |z| z.re), a.count()))
        .unzip()
}

/// [`lpf_race`] as a sweep consumer.
pub struct RacePlan {
    scales: Vec<f64>,
    folder: SnapshotFolder,
}

impl RacePlan {
    pub fn new(grid: &ScaleGrid) -> Result<Self, SmoothError> {
        grid.validate()?;
        let scales = grid.scales();
        let folder = SnapshotFolder::new(WeightScheme::Unweighted, checkpoints(&scales, 1.0));
        Ok(Self { scales, folder })
    }

    pub fn finish(self) -> RaceSeries {
        let (freq, counts) = real_folder_means(self.folder.finish());
        RaceSeries {
            scales: self.scales,
            freq,
            counts,
        }
    }
}

impl BlockConsumer for RacePlan {
    type Partial = BlockPieces;

    fn limit(&self) -> u64 {
        self.folder.limit()
    }

    fn halo(&self) -> Halo {
        Halo { back: 0, forward: 1 }
    }

    fn process(&self, view: &BlockView<'_>) -> Result<BlockPieces, SweepError> {
        let b = view.block();
        Ok(self.folder.pieces(view.lo(), view.hi(), WeightScheme::Unweighted, |n| {
            let win = b.largest_prime_factor(n) < b.largest_prime_factor(n + 1);
            Some(num_complex::Complex64::new(if win { 1.0 } else { 0.0 }, 0.0))
        }))
    }

    fn absorb(&mut self, partial: BlockPieces) {
        self.folder.absorb(partial);
    }
}

/// Frequency of `P⁺(n) < P⁺(n+1)` among `n ≤ X`, per grid scale.
pub fn lpf_race(grid: &ScaleGrid, config: SweepConfig) -> Result<RaceSeries, SmoothError> {
    let mut plan = RacePlan::new(grid)?;
    sweep_one(&mut plan, config)?;
    Ok(plan.finish())
}

/// Joint smoothness per scale with its Dickman target.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothSeries {
    pub alpha: Exponent,
    pub beta: Exponent,
    pub scales: Vec<f64>,
    /// `E_{n≤X} 1_{P⁺(n) < n^α} 1_{P⁺(n+1) < n^β}`.
    pub empirical: Vec<f64>,
    /// `E_{n≤X} 1_{P⁺(n) < X^α} 1_{P⁺(n+1) < X^β}`.
    pub empirical_fixed: Vec<f64>,
    /// `ρ(1/α)ρ(1/β)`.
    pub target: f64,
}

impl SmoothSeries {
    pub fn gaps(&self) -> Vec<f64> {
        self.empirical.iter().map(|e| e - self.target).collect()
    }

    /// CSV `scale, empirical, target, gap` for the `n^α` version.
    pub fn write_csv(&self, w: impl io::Write) -> Result<(), SmoothError> {
        write_target_csv(w, &self.scales, &self.empirical, self.target)
    }

    /// Same columns for the `X^α` version.
    pub fn write_fixed_csv(&self, w: impl io::Write) -> Result<(), SmoothError> {
        write_target_csv(w, &self.scales, &self.empirical_fixed, self.target)
    }
}

/// [`joint_smooth_density`] as a sweep consumer.
pub struct SmoothPlan {
    alpha: Exponent,
    beta: Exponent,
    scales: Vec<f64>,
    ln_scales: Vec<f64>,
    target: f64,
    folder: SnapshotFolder,
    /// Count of `n` first counted by the `X^α` indicator at scale `j`.
    buckets: Vec<u64>,
}

pub struct SmoothPartial {
    pieces: BlockPieces,
    buckets: Vec<u64>,
}

impl SmoothPlan {
    pub fn new(alpha: Exponent, beta: Exponent, grid: &ScaleGrid, solver: &DickmanSolver) -> Result<Self, SmoothError> {
        grid.validate()?;
        let target = solver.rho(1.0 / alpha.value())? * solver.rho(1.0 / beta.value())?;
        let scales = grid.scales();
        Ok(Self {
            alpha,
            beta,
            ln_scales: scales.iter().map(|x| x.ln()).collect(),
            folder: SnapshotFolder::new(WeightScheme::Unweighted, checkpoints(&scales, 1.0)),
            buckets: vec![0; scales.len()],
            scales,
            target,
        })
    }

    pub fn finish(self) -> SmoothSeries {
        let (empirical, counts) = real_folder_means(self.folder.finish());
        let mut running = 0u64;
        let empirical_fixed = self
            .buckets
            .iter()
            .zip(&counts)
            .map(|(b, &c)| {
                running += b;
                if c == 0 {
                    f64::NAN
                } else {
                    running as f64 / c as f64
                }
            })
            .collect();
        SmoothSeries {
            alpha: self.alpha,
            beta: self.beta,
            scales: self.scales,
            empirical,
            empirical_fixed,
            target: self.target,
        }
    }

    /// First scale index whose `X^α`, `X^β` thresholds admit the pair and
    /// which contains `n`.
    fn fixed_bucket(&self, n: u64, p: u64, p1: u64) -> usize {
        let first_containing = self.scales.partition_point(|&x| x.floor() < n as f64);
        let need = |p: u64, e: Exponent| -> f64 {
            // P < X^e  ⟺  ln X > ln P / e
            (p as f64).ln() / e.value()
        };
        let (la, lb) = (need(p, self.alpha), need(p1, self.beta));
        let first_threshold = self.ln_scales.partition_point(|&l| !(l > la && l > lb));
        first_containing.max(first_threshold)
    }
}

impl BlockConsumer for SmoothPlan {
    type Partial = SmoothPartial;

    fn limit(&self) -> u64 {
        self.folder.limit()
    }

    fn halo(&self) -> Halo {
        Halo { back: 0, forward: 1 }
    }

    fn process(&self, view: &BlockView<'_>) -> Result<SmoothPartial, SweepError> {
        let b = view.block();
        let mut buckets = vec![0u64; self.scales.len()];
        let hi = view.hi().min(self.limit() + 1).max(view.lo());
        for n in view.lo()..hi {
            let j = self.fixed_bucket(n, b.largest_prime_factor(n), b.largest_prime_factor(n + 1));
            if j < buckets.len() {
                buckets[j] += 1;
            }
        }
        let pieces = self.folder.pieces(view.lo(), view.hi(), WeightScheme::Unweighted, |n| {
            let hit = self.alpha.below(b.largest_prime_factor(n), n)
                && self.beta.below(b.largest_prime_factor(n + 1), n);
            Some(num_complex::Complex64::new(if hit { 1.0 } else { 0.0 }, 0.0))
        });
        Ok(SmoothPartial { pieces, buckets })
    }

    fn absorb(&mut self, partial: SmoothPartial) {
        self.folder.absorb(partial.pieces);
        for (a, b) in self.buckets.iter_mut().zip(partial.buckets) {
            *a += b;
        }
    }
}

/// `E_{n≤X} 1_{P⁺(n)<n^α} 1_{P⁺(n+1)<n^β}` per scale against `ρ(1/α)ρ(1/β)`.
pub fn joint_smooth_density(
    alpha: Exponent,
    beta: Exponent,
    grid: &ScaleGrid,
    solver: &DickmanSolver,
    config: SweepConfig,
) -> Result<SmoothSeries, SmoothError> {
    let mut plan = SmoothPlan::new(alpha, beta, grid, solver)?;
    sweep_one(&mut plan, config)?;
    Ok(plan.finish())
}
