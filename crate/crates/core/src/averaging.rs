//! Weighted averages over integers and primes.
//!
//! Every average is a ratio `Σ w(n) f(n) / Σ w(n)` kept as compensated sums
//! so that partial accumulators over disjoint ranges merge into the
//! accumulator of the union. Snapshots along a [`ScaleGrid`] give the
//! multi-scale series used everywhere else in the crate.

use std::fmt;
use std::io;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sieve::{prime_iter, SieveError};

#[derive(Debug, Error)]
pub enum AverageError {
    #[error("empty index set for {scheme} average up to {upto}")]
    EmptyIndexSet { scheme: WeightScheme, upto: f64 },
    #[error("stream not sorted: {n} follows {prev}")]
    Unsorted { prev: u64, n: u64 },
    #[error("non-finite value f({n}) = {value}")]
    NonFinite { n: u64, value: Complex64 },
    #[error("invalid scale grid: {0}")]
    Grid(String),
    #[error("cannot merge a {left} accumulator with a {right} one")]
    SchemeMismatch { left: WeightScheme, right: WeightScheme },
    #[error(transparent)]
    Sieve(#[from] SieveError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn negated(&self) -> Self {
        Self {
            sum: -self.sum,
            comp: -self.comp,
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComplexSum {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl ComplexSum {
    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn merge(&mut self, other: &Self) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
    }

    pub fn negated(&self) -> Self {
        Self {
            re: self.re.negated(),
            im: self.im.negated(),
        }
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// The averaging operators: weights `1`, `1/n`, `1/(n ln(1+n))`, and the
/// prime-restricted unweighted and logarithmic averages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    Unweighted,
    Log,
    LogLog,
    PrimeUnweighted,
    PrimeLog,
}

impl WeightScheme {
    pub const ALL: [WeightScheme; 5] = [
        WeightScheme::Unweighted,
        WeightScheme::Log,
        WeightScheme::LogLog,
        WeightScheme::PrimeUnweighted,
        WeightScheme::PrimeLog,
    ];

    #[inline]
    pub fn weight(self, n: u64) -> f64 {
        match self {
            WeightScheme::Unweighted | WeightScheme::PrimeUnweighted => 1.0,
            WeightScheme::Log | WeightScheme::PrimeLog => 1.0 / n as f64,
            WeightScheme::LogLog => {
                let x = n as f64;
                1.0 / (x * x.ln_1p())
            }
        }
    }

    pub fn primes_only(self) -> bool {
        matches!(self, WeightScheme::PrimeUnweighted | WeightScheme::PrimeLog)
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightScheme::Unweighted => "unweighted",
            WeightScheme::Log => "log",
            WeightScheme::LogLog => "loglog",
            WeightScheme::PrimeUnweighted => "prime_unweighted",
            WeightScheme::PrimeLog => "prime_log",
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for WeightScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WeightScheme::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| format!("unknown weight scheme '{s}'"))
    }
}

/// Streaming `Σ w(n) f(n)` and `Σ w(n)` for one scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedAccumulator {
    scheme: WeightScheme,
    num: ComplexSum,
    den: CompensatedSum,
    count: u64,
}

impl WeightedAccumulator {
    pub fn new(scheme: WeightScheme) -> Self {
        Self {
            scheme,
            num: ComplexSum::default(),
            den: CompensatedSum::default(),
            count: 0,
        }
    }

    pub fn scheme(&self) -> WeightScheme {
        self.scheme
    }

    /// Add index `n` with value `f`. Prime schemes trust the caller to pass
    /// only primes.
    #[inline]
    pub fn push(&mut self, n: u64, f: Complex64) {
        let w = self.scheme.weight(n);
        self.num.add(f * w);
        self.den.add(w);
        self.count += 1;
    }

    #[inline]
    pub fn push_real(&mut self, n: u64, f: f64) {
        let w = self.scheme.weight(n);
        self.num.re.add(f * w);
        self.den.add(w);
        self.count += 1;
    }

    /// Combine with an accumulator over a disjoint range.
    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.scheme, other.scheme, "merging accumulators of different schemes");
        self.num.merge(&other.num);
        self.den.merge(&other.den);
        self.count += other.count;
    }

    pub fn try_merge(&mut self, other: &Self) -> Result<(), AverageError> {
        if self.scheme != other.scheme {
            return Err(AverageError::SchemeMismatch {
                left: self.scheme,
                right: other.scheme,
            });
        }
        self.merge(other);
        Ok(())
    }

    /// `self − earlier`, for window averages from two prefix snapshots.
    pub fn since(&self, earlier: &Self) -> Self {
        let mut out = *self;
        out.num.merge(&earlier.num.negated());
        out.den.merge(&earlier.den.negated());
        out.count -= earlier.count;
        out
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn numerator(&self) -> Complex64 {
        self.num.value()
    }

    pub fn denominator(&self) -> f64 {
        self.den.value()
    }

    /// The weighted mean, `None` when nothing has been pushed.
    pub fn mean(&self) -> Option<Complex64> {
        if self.count == 0 {
            return None;
        }
        Some(self.num.value() / self.den.value())
    }
}

/// Geometric scales `x0 · ratio^j`, `j < count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleGrid {
    pub x0: f64,
    pub ratio: f64,
    pub count: usize,
}

/// Default grid ratio, four scales per doubling.
pub const DEFAULT_RATIO: f64 = 1.189_207_115_002_721; // 2^(1/4)

impl ScaleGrid {
    pub fn new(x0: f64, ratio: f64, count: usize) -> Result<Self, AverageError> {
        let g = Self { x0, ratio, count };
        g.validate()?;
        Ok(g)
    }

    /// A single scale.
    pub fn single(x: f64) -> Result<Self, AverageError> {
        Self::new(x, 2.0, 1)
    }

    /// Geometric grid from `x0` up to at most `x_max` with the given ratio.
    pub fn spanning(x0: f64, x_max: f64, ratio: f64) -> Result<Self, AverageError> {
        if !(x_max >= x0) {
            return Err(AverageError::Grid(format!("x_max {x_max} below x0 {x0}")));
        }
        let count = ((x_max / x0).ln() / ratio.ln() + 1e-9).floor() as usize + 1;
        Self::new(x0, ratio, count)
    }

    pub fn validate(&self) -> Result<(), AverageError> {
        if !(self.x0 >= 1.0 && self.x0.is_finite()) {
            return Err(AverageError::Grid(format!("x0 must be >= 1, got {}", self.x0)));
        }
        if !(self.ratio > 1.0 && self.ratio.is_finite()) {
            return Err(AverageError::Grid(format!("ratio must be > 1, got {}", self.ratio)));
        }
        if self.count == 0 {
            return Err(AverageError::Grid("grid has no scales".into()));
        }
        let last = self.x0 * self.ratio.powi(self.count as i32 - 1);
        if !(last.is_finite() && last < 9.2e18) {
            return Err(AverageError::Grid(format!("largest scale {last} not representable")));
        }
        Ok(())
    }

    /// `x0·ratio^j`; values within a relative 10⁻⁹ of an integer are
    /// snapped to it, so `10^{j/2}` grids land on `10^k` exactly.
    pub fn scales(&self) -> Vec<f64> {
        (0..self.count).map(|j| self.scale(j)).collect()
    }

    fn scale(&self, j: usize) -> f64 {
        let x = self.x0 * self.ratio.powi(j as i32);
        let r = x.round();
        if (x - r).abs() <= 1e-9 * x {
            r
        } else {
            x
        }
    }

    pub fn max_scale(&self) -> f64 {
        self.scale(self.count.saturating_sub(1))
    }
}

/// One snapshot of an average.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub scale: f64,
    pub value: Complex64,
    pub count: u64,
    pub den: f64,
}

/// Averages of one scheme at a list of scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedSeries {
    pub scheme: WeightScheme,
    pub points: Vec<SeriesPoint>,
}

impl AveragedSeries {
    pub fn values(&self) -> Vec<Complex64> {
        self.points.iter().map(|p| p.value).collect()
    }

    /// CSV with columns `scale, scheme, re, im, abs, count, den`.
    pub fn write_csv(&self, w: impl io::Write) -> Result<(), AverageError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["scale", "scheme", "re", "im", "abs", "count", "den"])?;
        for p in &self.points {
            out.write_record([
                p.scale.to_string(),
                self.scheme.to_string(),
                p.value.re.to_string(),
                p.value.im.to_string(),
                p.value.norm().to_string(),
                p.count.to_string(),
                p.den.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Integer cut-offs `⌊scale / divisor⌋` for each scale.
pub fn checkpoints(scales: &[f64], divisor: f64) -> Vec<u64> {
    scales.iter().map(|x| (x / divisor).floor() as u64).collect()
}

/// Builds per-scale snapshots from accumulators over consecutive blocks.
///
/// Each block contributes a [`BlockPieces`]: its accumulator split at the
/// checkpoints falling inside it. Folding pieces in range order reproduces a
/// single left-to-right pass exactly, whatever the block boundaries.
#[derive(Clone, Debug)]
pub struct SnapshotFolder {
    checkpoints: Vec<u64>,
    running: WeightedAccumulator,
    snapshots: Vec<Option<WeightedAccumulator>>,
    next: usize,
}

/// Accumulator pieces of one block; piece `k < len − 1` closes checkpoint
/// `first + k`.
#[derive(Clone, Debug)]
pub struct BlockPieces {
    pub first: usize,
    pub pieces: Vec<WeightedAccumulator>,
}

impl SnapshotFolder {
    /// `checkpoints` must be non-decreasing.
    pub fn new(scheme: WeightScheme, checkpoints: Vec<u64>) -> Self {
        debug_assert!(checkpoints.windows(2).all(|w| w[0] <= w[1]));
        let mut folder = Self {
            snapshots: vec![None; checkpoints.len()],
            checkpoints,
            running: WeightedAccumulator::new(scheme),
            next: 0,
        };
        // Checkpoint 0 means an empty range.
        folder.close_through(0);
        folder
    }

    fn close_through(&mut self, n: u64) {
        while self.next < self.checkpoints.len() && self.checkpoints[self.next] <= n {
            self.snapshots[self.next] = Some(self.running);
            self.next += 1;
        }
    }

    pub fn checkpoints(&self) -> &[u64] {
        &self.checkpoints
    }

    /// Largest index needed.
    pub fn limit(&self) -> u64 {
        self.checkpoints.last().copied().unwrap_or(0)
    }

    /// Accumulate `n ∈ [lo, hi)` into pieces. `value(n)` returns `None`
    /// for indices excluded from the index set.
    pub fn pieces<F>(&self, lo: u64, hi: u64, scheme: WeightScheme, mut value: F) -> BlockPieces
    where
        F: FnMut(u64) -> Option<Complex64>,
    {
        let first = self.checkpoints.partition_point(|&c| c < lo);
        let mut pieces = vec![WeightedAccumulator::new(scheme)];
        let mut k = first;
        let hi = hi.min(self.limit().saturating_add(1)).max(lo);
        for n in lo..hi {
            if let Some(f) = value(n) {
                pieces.last_mut().expect("non-empty").push(n, f);
            }
            while k < self.checkpoints.len() && self.checkpoints[k] == n {
                pieces.push(WeightedAccumulator::new(scheme));
                k += 1;
            }
        }
        BlockPieces { first, pieces }
    }

    /// Fold one block's pieces; blocks must arrive in range order.
    pub fn absorb(&mut self, block: BlockPieces) {
        let last = block.pieces.len() - 1;
        for (k, piece) in block.pieces.iter().enumerate() {
            self.running.merge(piece);
            if k < last {
                let j = block.first + k;
                debug_assert_eq!(j, self.next);
                self.snapshots[j] = Some(self.running);
                self.next = j + 1;
            }
        }
    }

    pub fn running(&self) -> &WeightedAccumulator {
        &self.running
    }

    pub fn is_complete(&self) -> bool {
        self.next == self.checkpoints.len()
    }

    /// Accumulators at every checkpoint.
    pub fn finish(self) -> Vec<WeightedAccumulator> {
        assert!(self.is_complete(), "snapshot folder not fed to the last checkpoint");
        self.snapshots.into_iter().map(|s| s.expect("closed")).collect()
    }
}

/// `Σ_{n≤X} w(n) f(n) / Σ_{n≤X} w(n)` over a sorted `(n, f(n))` stream.
/// For prime schemes the stream is filtered to primes.
pub fn average<I>(values: I, scheme: WeightScheme, upto: f64) -> Result<Complex64, AverageError>
where
    I: IntoIterator<Item = (u64, Complex64)>,
{
    let grid = ScaleGrid::single(upto.max(1.0))?;
    let series = snapshot_series(values, scheme, &grid)?;
    let p = series.points[0];
    if p.count == 0 {
        return Err(AverageError::EmptyIndexSet { scheme, upto });
    }
    Ok(p.value)
}

/// One pass over a sorted stream, one averaged value per grid scale.
pub fn snapshot_series<I>(
    values: I,
    scheme: WeightScheme,
    grid: &ScaleGrid,
) -> Result<AveragedSeries, AverageError>
where
    I: IntoIterator<Item = (u64, Complex64)>,
{
    grid.validate()?;
    let scales = grid.scales();
    let cps = checkpoints(&scales, 1.0);
    let limit = *cps.last().expect("non-empty grid");
    let mut acc = WeightedAccumulator::new(scheme);
    let mut snaps = Vec::with_capacity(cps.len());
    let mut k = 0;
    let mut prev: Option<u64> = None;
    for (n, f) in values {
        if let Some(p) = prev {
            if n <= p {
                return Err(AverageError::Unsorted { prev: p, n });
            }
        }
        prev = Some(n);
        while k < cps.len() && cps[k] < n {
            snaps.push(acc);
            k += 1;
        }
        if n > limit {
            break;
        }
        if !(f.re.is_finite() && f.im.is_finite()) {
            return Err(AverageError::NonFinite { n, value: f });
        }
        if scheme.primes_only() && !is_prime(n) {
            continue;
        }
        acc.push(n, f);
    }
    while snaps.len() < cps.len() {
        snaps.push(acc);
    }
    Ok(AveragedSeries {
        scheme,
        points: scales
            .iter()
            .zip(&snaps)
            .map(|(&scale, a)| SeriesPoint {
                scale,
                value: a.mean().unwrap_or(Complex64::new(f64::NAN, f64::NAN)),
                count: a.count(),
                den: a.denominator(),
            })
            .collect(),
    })
}

/// Deterministic Miller–Rabin for `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    let mul = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let pow = |mut b: u64, mut e: u64| {
        let mut r = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                r = mul(r, b);
            }
            b = mul(b, b);
            e >>= 1;
        }
        r
    };
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Result of comparing a doubly logarithmic average over integers with a
/// logarithmic average over primes.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IntegerPrimeComparison {
    pub scale: f64,
    pub integer_loglog: Complex64,
    pub prime_log: Complex64,
    pub gap: f64,
}

/// `E^{loglog}_{d ≤ X} f(d)` against `E^{log}_{p ≤ X} f(a p)`.
pub fn compare_integer_prime_averages<F>(
    f: F,
    a: u64,
    x: f64,
) -> Result<IntegerPrimeComparison, AverageError>
where
    F: Fn(u64) -> Complex64,
{
    if a == 0 {
        return Err(AverageError::Grid("a must be >= 1".into()));
    }
    if !(x >= 10.0) {
        return Err(AverageError::Grid(format!("X must be >= 10, got {x}")));
    }
    let upto = x.floor() as u64;
    let mut ints = WeightedAccumulator::new(WeightScheme::LogLog);
    for d in 1..=upto {
        let v = f(d);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(AverageError::NonFinite { n: d, value: v });
        }
        ints.push(d, v);
    }
    let mut primes = WeightedAccumulator::new(WeightScheme::PrimeLog);
    for p in prime_iter(2, upto + 1)? {
        let v = f(a * p);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(AverageError::NonFinite { n: a * p, value: v });
        }
        primes.push(p, v);
    }
    let integer_loglog = ints.mean().expect("X >= 10");
    let prime_log = primes.mean().expect("X >= 10");
    Ok(IntegerPrimeComparison {
        scale: x,
        integer_loglog,
        prime_log,
        gap: (integer_loglog - prime_log).norm(),
    })
}

/// `H(n) = Σ_{k≤n} 1/k`, summed directly below 2^20 and by Euler–Maclaurin
/// above.
pub fn harmonic(n: u64) -> f64 {
    const DIRECT: u64 = 1 << 20;
    if n <= DIRECT {
        let mut s = CompensatedSum::default();
        for k in 1..=n {
            s.add(1.0 / k as f64);
        }
        return s.value();
    }
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let x = n as f64;
    let x2 = x * x;
    x.ln() + EULER_GAMMA + 1.0 / (2.0 * x) - 1.0 / (12.0 * x2) + 1.0 / (120.0 * x2 * x2)
}

/// Logarithmic density `E^{log}_{n ≤ X} 1_A(n)` of a sorted set at every
/// grid scale.
pub fn logarithmic_density<I>(members: I, grid: &ScaleGrid) -> Result<AveragedSeries, AverageError>
where
    I: IntoIterator<Item = u64>,
{
    grid.validate()?;
    let scales = grid.scales();
    let cps = checkpoints(&scales, 1.0);
    let limit = *cps.last().expect("non-empty grid");
    let mut num = CompensatedSum::default();
    let mut hits = 0u64;
    let mut snaps: Vec<(f64, u64)> = Vec::with_capacity(cps.len());
    let mut k = 0;
    let mut prev: Option<u64> = None;
    for n in members {
        if let Some(p) = prev {
            if n <= p {
                return Err(AverageError::Unsorted { prev: p, n });
            }
        }
        prev = Some(n);
        while k < cps.len() && cps[k] < n {
            snaps.push((num.value(), hits));
            k += 1;
        }
        if n > limit {
            break;
        }
        if n >= 1 {
            num.add(1.0 / n as f64);
            hits += 1;
        }
    }
    while snaps.len() < cps.len() {
        snaps.push((num.value(), hits));
    }
    Ok(AveragedSeries {
        scheme: WeightScheme::Log,
        points: scales
            .iter()
            .zip(cps.iter().zip(&snaps))
            .map(|(&scale, (&cp, &(s, hits)))| {
                let den = harmonic(cp);
                SeriesPoint {
                    scale,
                    value: Complex64::new(if cp == 0 { f64::NAN } else { s / den }, 0.0),
                    count: hits,
                    den,
                }
            })
            .collect(),
    })
}
