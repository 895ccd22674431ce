//! Straightening approximate characters into exact ones.
//!
//! [`snap_to_dirichlet`] turns an ε-quasimorphism on `(ℤ/qℤ)ˣ` into a
//! Dirichlet character by the cocycle/coboundary construction, then rounds
//! to `φ(q)`-th roots of unity and checks the result is exactly
//! multiplicative. [`snap_to_archimedean`] does the same on `(0, ∞)` with a
//! finite logarithmic average standing in for the limit in `M`, and reads
//! `t` off a dyadic ladder of powers of `x₀ = 1 + ε`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functions::{DirichletCharacter, FunctionError, UnitGroup};

/// Largest ε the construction accepts.
pub const EPSILON_CAP: f64 = 0.1;
/// Largest cocycle magnitude for which the principal logarithm is used.
pub const LOG_CAP: f64 = 0.5;

#[derive(Debug, Error)]
pub enum StraightenError {
    #[error("epsilon {eps} too large (cap {cap})")]
    EpsilonTooLarge { eps: f64, cap: f64 },
    #[error("cocycle at ({x}, {y}) has |log| = {magnitude:.3e} > {LOG_CAP}; perturbation too large")]
    CocycleTooLarge { x: f64, y: f64, magnitude: f64 },
    #[error("straightening failed: {0}")]
    Failed(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error(transparent)]
    Function(#[from] FunctionError),
}

fn principal_log(z: Complex64, x: f64, y: f64) -> Result<Complex64, StraightenError> {
    if !(z.norm() > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return Err(StraightenError::CocycleTooLarge {
            x,
            y,
            magnitude: f64::INFINITY,
        });
    }
    let l = z.ln();
    if l.norm() > LOG_CAP {
        return Err(StraightenError::CocycleTooLarge { x, y, magnitude: l.norm() });
    }
    Ok(l)
}

/// A function on the units mod `q`, normalised so `ψ(1) = 1`.
#[derive(Clone, Debug)]
pub struct UnitGroupQuasimorphism {
    q: u64,
    /// Indexed by residue; non-units are ignored.
    values: Vec<Complex64>,
    bound: f64,
}

impl UnitGroupQuasimorphism {
    pub fn new(q: u64, values: Vec<Complex64>, bound: f64) -> Result<Self, StraightenError> {
        if q == 0 {
            return Err(FunctionError::ZeroModulus.into());
        }
        if values.len() as u64 != q {
            return Err(StraightenError::Hypothesis(format!(
                "need {q} values, got {}",
                values.len()
            )));
        }
        let group = UnitGroup::new(q)?;
        for b in group.units() {
            let v = values[b as usize];
            if !(v.norm() <= bound) {
                return Err(StraightenError::Hypothesis(format!("|ψ({b})| = {} exceeds {bound}", v.norm())));
            }
        }
        let one = values[(1 % q) as usize];
        if (one - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
            return Err(StraightenError::Hypothesis(format!("ψ(1) = {one}, expected 1")));
        }
        Ok(Self { q, values, bound })
    }

    /// `χ(b)·exp(iδ_b)` with `δ_b` uniform in `[−noise/2, noise/2]` and `δ_1 = 0`.
    pub fn planted(chi: &DirichletCharacter, noise: f64, rng: &mut ChaCha8Rng) -> Self {
        let q = chi.modulus();
        let values = (0..q)
            .map(|r| {
                let v = chi.value(r);
                if r == 1 % q || v.norm_sqr() == 0.0 {
                    v
                } else {
                    v * Complex64::from_polar(1.0, rng.gen_range(-0.5..=0.5) * noise)
                }
            })
            .collect();
        Self { q, values, bound: 1.0 }
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn value(&self, b: u64) -> Complex64 {
        self.values[(b % self.q) as usize]
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }
}

/// Output of [`snap_to_dirichlet`].
#[derive(Clone, Debug)]
pub struct DirichletSnap {
    pub chi: DirichletCharacter,
    /// `sup_b |ψ(b) − χ(b)|` over units.
    pub sup_error: f64,
    /// `sup_b |χ̃(b) − χ(b)|`, the rounding step's correction.
    pub rounding: f64,
}

/// Straighten `ψ` into a Dirichlet character.
pub fn snap_to_dirichlet(psi: &UnitGroupQuasimorphism, eps: f64) -> Result<DirichletSnap, StraightenError> {
    if !(eps >= 0.0 && eps <= EPSILON_CAP) {
        return Err(StraightenError::EpsilonTooLarge { eps, cap: EPSILON_CAP });
    }
    let q = psi.q;
    let group = UnitGroup::new(q)?;
    let units: Vec<u64> = group.units().collect();
    let phi = group.order();

    // φ(b) = E_{b₃} ρ(b, b₃).
    let mut coboundary = vec![Complex64::new(0.0, 0.0); q as usize];
    for &b1 in &units {
        let mut s = Complex64::new(0.0, 0.0);
        for &b2 in &units {
            let ratio = psi.value(b1 * b2 % q) / (psi.value(b1) * psi.value(b2));
            s += principal_log(ratio, b1 as f64, b2 as f64)?;
        }
        coboundary[b1 as usize] = s / units.len() as f64;
    }

    let mut exponents: Vec<Option<u64>> = vec![None; q as usize];
    let mut rounding = 0.0f64;
    for &b in &units {
        let candidate = psi.value(b) * coboundary[b as usize].exp();
        let k = (candidate.arg() / TAU * phi as f64).round().rem_euclid(phi as f64) as u64;
        rounding = rounding.max((candidate - crate::functions::root_of_unity(k, phi)).norm());
        exponents[b as usize] = Some(k);
    }

    // Exact multiplicativity of the rounded table.
    for &a in &units {
        for &b in &units {
            let (ka, kb) = (exponents[a as usize].unwrap(), exponents[b as usize].unwrap());
            let kab = exponents[(a * b % q) as usize].unwrap();
            if (ka + kb) % phi != kab {
                return Err(StraightenError::Failed(format!(
                    "rounded table not multiplicative: χ({a})χ({b}) ≠ χ({})",
                    a * b % q
                )));
            }
        }
    }

    // Read the index off the generators and rebuild the character exactly.
    let mut index = 0u64;
    let mut radix = 1u64;
    for &(g, m) in group.generators() {
        let k = exponents[g as usize].expect("generator is a unit");
        let step = phi / m;
        if k % step != 0 {
            return Err(StraightenError::Failed(format!("χ({g}) is not an {m}-th root of unity")));
        }
        index += (k / step) * radix;
        radix *= m;
    }
    let chi = group.character(index)?;
    if chi.exponents() != exponents.as_slice() {
        return Err(StraightenError::Failed("rounded table is not a character".into()));
    }
    let sup_error = units
        .iter()
        .map(|&b| (psi.value(b) - chi.value(b)).norm())
        .fold(0.0, f64::max);
    Ok(DirichletSnap {
        chi,
        sup_error,
        rounding,
    })
}

pub type Sampler = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// An ε-quasimorphism on `(0, ∞)`, given by a sampler.
#[derive(Clone)]
pub struct PositiveRealQuasimorphism {
    sampler: Sampler,
    bound: f64,
    epsilon: f64,
}

impl fmt::Debug for PositiveRealQuasimorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PositiveRealQuasimorphism")
            .field("bound", &self.bound)
            .field("epsilon", &self.epsilon)
            .finish()
    }
}

/// SplitMix64 finaliser.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl PositiveRealQuasimorphism {
    pub fn new(sampler: Sampler, bound: f64, epsilon: f64) -> Self {
        Self {
            sampler,
            bound,
            epsilon,
        }
    }

    /// `x^{−it₀}·exp(iδ(x))` with `δ(x)` a deterministic function of
    /// `(seed, x)`, uniform in `[−noise/2, noise/2]`.
    pub fn planted(t0: f64, noise: f64, seed: u64) -> Self {
        let sampler: Sampler = Arc::new(move |x: f64| {
            let u = (splitmix64(seed ^ splitmix64(x.to_bits())) >> 11) as f64 / (1u64 << 53) as f64;
            Complex64::from_polar(1.0, -t0 * x.ln() + (u - 0.5) * noise)
        });
        Self::new(sampler, 1.0, noise)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Granule of the measurable discretisation.
    pub fn granule(&self) -> f64 {
        self.epsilon * self.epsilon
    }

    /// Raw sample `α(x)`.
    pub fn sample(&self, x: f64) -> Complex64 {
        (self.sampler)(x)
    }

    /// Discretised `α₁`: `α(ε²⌊x/ε²⌋)` for `x ≥ ε`, `α(1/n)` on
    /// `(1/(n+1), 1/n]` below `ε`. Identity when `ε = 0`.
    pub fn discretised(&self, x: f64) -> Complex64 {
        let g = self.granule();
        if g == 0.0 {
            return self.sample(x);
        }
        if x >= self.epsilon {
            let k = (x / g).floor().max(1.0);
            self.sample(g * k)
        } else {
            let n = (1.0 / x).floor().max(1.0);
            self.sample(1.0 / n)
        }
    }
}

/// Settings for [`snap_to_archimedean`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchimedeanSettings {
    /// Largest `x` on the ladder and the error grid.
    pub x_max: f64,
    /// Upper end `M` of the logarithmic average.
    pub m: f64,
    /// Points on the error grid, log-spaced over `[1/x_max, x_max]`.
    pub grid_points: usize,
}

impl Default for ArchimedeanSettings {
    fn default() -> Self {
        Self {
            x_max: 1e6,
            m: 1e3,
            grid_points: 4001,
        }
    }
}

/// Output of [`snap_to_archimedean`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArchimedeanSnap {
    pub t: f64,
    /// `sup |α(x) − x^{−it}|` on the grid.
    pub sup_error: f64,
    /// Ladder rungs `x₀^{2^k}` used.
    pub rungs: usize,
    /// Largest `|α̃(x) − x^{−it}|` on the ladder.
    pub ladder_misfit: f64,
}

struct Coboundary<'a> {
    alpha: &'a PositiveRealQuasimorphism,
    nodes: Vec<f64>,
}

impl Coboundary<'_> {
    /// `φ(x) = (1/ln M)∫₁^M ρ(x, y) dy/y` by the midpoint rule in `ln y`.
    fn phi(&self, x: f64) -> Result<Complex64, StraightenError> {
        let a = self.alpha;
        let ax = a.discretised(x);
        let mut s = Complex64::new(0.0, 0.0);
        for &y in &self.nodes {
            let ratio = a.discretised(x * y) / (ax * a.discretised(y));
            s += principal_log(ratio, x, y)?;
        }
        Ok(s / self.nodes.len() as f64)
    }

    fn corrected(&self, x: f64) -> Result<Complex64, StraightenError> {
        Ok(self.alpha.discretised(x) * self.phi(x)?.exp())
    }
}

/// Recover `t` with `α(x) ≈ x^{−it}`.
pub fn snap_to_archimedean(
    alpha: &PositiveRealQuasimorphism,
    settings: &ArchimedeanSettings,
) -> Result<ArchimedeanSnap, StraightenError> {
    let eps = alpha.epsilon;
    if !(eps >= 0.0 && eps <= EPSILON_CAP) {
        return Err(StraightenError::EpsilonTooLarge { eps, cap: EPSILON_CAP });
    }
    if !(settings.m >= 100.0) {
        return Err(StraightenError::Hypothesis(format!("M must be >= 100, got {}", settings.m)));
    }
    let x0 = 1.0 + eps.max(0.01);
    if !(settings.x_max >= x0 * x0) {
        return Err(StraightenError::Hypothesis(format!(
            "x_max {} leaves no ladder above x0 = {x0}",
            settings.x_max
        )));
    }
    let ln_m = settings.m.ln();
    let count = if eps > 0.0 {
        ((ln_m / alpha.granule()).ceil() as usize).clamp(256, 20_000)
    } else {
        256
    };
    let nodes = (0..count)
        .map(|j| ((j as f64 + 0.5) * ln_m / count as f64).exp())
        .collect();
    let cob = Coboundary { alpha, nodes };

    // First estimate from x₀, then refine with unwrapped phases on the ladder.
    let mut t = -cob.corrected(x0)?.arg() / x0.ln();
    let mut rungs = vec![x0];
    let mut x = x0 * x0;
    while x <= settings.x_max {
        let lx = x.ln();
        let predicted = -t * lx;
        let observed = cob.corrected(x)?.arg();
        let d = (observed - predicted + PI).rem_euclid(TAU) - PI;
        t = -(predicted + d) / lx;
        rungs.push(x);
        x *= x;
    }

    let tol = 10.0 * eps + 1e-9;
    let mut ladder_misfit = 0.0f64;
    for &r in &rungs {
        let misfit = (cob.corrected(r)? - Complex64::from_polar(1.0, -t * r.ln())).norm();
        ladder_misfit = ladder_misfit.max(misfit);
        if misfit > tol {
            return Err(StraightenError::Failed(format!(
                "no single t fits the ladder: misfit {misfit:.3e} at x = {r}"
            )));
        }
    }

    let n = settings.grid_points.max(2);
    let span = settings.x_max.ln();
    let mut sup_error = 0.0f64;
    for j in 0..n {
        let x = (-span + 2.0 * span * j as f64 / (n - 1) as f64).exp();
        let a = alpha.sample(x);
        if !(a.norm() <= alpha.bound + 1e-12) {
            return Err(StraightenError::Hypothesis(format!("|α({x})| = {} exceeds {}", a.norm(), alpha.bound)));
        }
        sup_error = sup_error.max((a - Complex64::from_polar(1.0, -t * x.ln())).norm());
    }
    Ok(ArchimedeanSnap {
        t,
        sup_error,
        rungs: rungs.len(),
        ladder_misfit,
    })
}
