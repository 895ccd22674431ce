//! 1-bounded multiplicative functions and their evaluation over sieved blocks.

mod character;
mod parse;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::sieve::{isqrt, FactorBlock, PrimeTable};

pub use character::{
    enumerate_characters, euler_phi, gcd, root_of_unity, DirichletCharacter, UnitGroup,
};
pub(crate) use character::factorize;
pub use parse::{parse_spec, SpecParseError};

/// Largest modulus accepted for a custom value.
pub const BOUND_SLACK: f64 = 1.0 / (1u64 << 40) as f64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionError {
    #[error("modulus must be positive")]
    ZeroModulus,
    #[error("character index {index} out of range: there are {count} characters mod {q}")]
    CharacterIndex { q: u64, index: u64, count: u64 },
    #[error("lambda_q needs q >= 2, got {0}")]
    BadLambdaQ(u32),
    #[error("{label} has |g({p}^{j})| = {modulus} > 1")]
    BoundViolation {
        label: String,
        p: u64,
        j: u32,
        modulus: f64,
    },
    #[error("a product needs at least one factor")]
    EmptyProduct,
}

/// Value of a custom function at `p^j`; `None` means unspecified.
pub type PrimePowerRule = Arc<dyn Fn(u64, u32) -> Option<Complex64> + Send + Sync>;

#[derive(Clone)]
pub enum FunctionKind {
    Liouville,
    Moebius,
    /// `e(Ω(n)/q)`.
    LambdaQ(u32),
    Character(Arc<DirichletCharacter>),
    /// `n^{it}`.
    Archimedean(f64),
    /// `χ(n) n^{it}`.
    Twisted(Arc<DirichletCharacter>, f64),
    Product(Vec<MultiplicativeFunctionSpec>),
    Conjugate(Box<MultiplicativeFunctionSpec>),
    Custom(PrimePowerRule),
}

/// A 1-bounded multiplicative function with a display label.
#[derive(Clone)]
pub struct MultiplicativeFunctionSpec {
    kind: FunctionKind,
    label: String,
}

impl fmt::Debug for MultiplicativeFunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Spec({})", self.label)
    }
}

impl fmt::Display for MultiplicativeFunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl std::str::FromStr for MultiplicativeFunctionSpec {
    type Err = SpecParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_spec(s)
    }
}

fn char_label(chi: &DirichletCharacter) -> String {
    format!("char(q={},index={})", chi.modulus(), chi.index())
}

/// Finite value set of a function, used by the pattern census.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Alphabet {
    /// `λ`: symbol 0 for `+1`, 1 for `-1`.
    Sign,
    /// `μ`: symbols for `0, +1, -1`.
    Moebius,
    /// `λ_q`: symbol `Ω(n) mod q`.
    RootsOfUnity(u32),
    /// Character mod `q`: 0 for non-units, `1 + k` for `e(k/φ(q))`.
    Character { q: u64, phi: u64 },
}

impl Alphabet {
    pub fn size(&self) -> u64 {
        match *self {
            Alphabet::Sign => 2,
            Alphabet::Moebius => 3,
            Alphabet::RootsOfUnity(q) => q as u64,
            Alphabet::Character { phi, .. } => phi + 1,
        }
    }
}

impl MultiplicativeFunctionSpec {
    pub fn new(kind: FunctionKind, label: impl Into<String>) -> Self {
        Self {
            kind,
            label: label.into(),
        }
    }

    pub fn liouville() -> Self {
        Self::new(FunctionKind::Liouville, "liouville")
    }

    pub fn moebius() -> Self {
        Self::new(FunctionKind::Moebius, "mobius")
    }

    pub fn lambda_q(q: u32) -> Result<Self, FunctionError> {
        if q < 2 {
            return Err(FunctionError::BadLambdaQ(q));
        }
        Ok(Self::new(FunctionKind::LambdaQ(q), format!("lambda_q({q})")))
    }

    pub fn character(chi: DirichletCharacter) -> Self {
        let label = char_label(&chi);
        Self::new(FunctionKind::Character(Arc::new(chi)), label)
    }

    /// Character `index` mod `q` in [`enumerate_characters`] order.
    pub fn character_by_index(q: u64, index: u64) -> Result<Self, FunctionError> {
        Ok(Self::character(UnitGroup::new(q)?.character(index)?))
    }

    /// The constant function 1 (principal character mod 1).
    pub fn one() -> Self {
        let chi = DirichletCharacter::principal(1).expect("q = 1 is valid");
        Self::new(FunctionKind::Character(Arc::new(chi)), "one")
    }

    pub fn archimedean(t: f64) -> Self {
        Self::new(FunctionKind::Archimedean(t), format!("archimedean(t={t})"))
    }

    pub fn twisted(chi: DirichletCharacter, t: f64) -> Self {
        let label = format!("twist({}, t={t})", char_label(&chi));
        Self::new(FunctionKind::Twisted(Arc::new(chi), t), label)
    }

    pub fn product(factors: Vec<Self>) -> Result<Self, FunctionError> {
        if factors.is_empty() {
            return Err(FunctionError::EmptyProduct);
        }
        let label = format!(
            "product({})",
            factors.iter().map(|f| f.label.as_str()).collect::<Vec<_>>().join(", ")
        );
        Ok(Self::new(FunctionKind::Product(factors), label))
    }

    pub fn conjugate(inner: Self) -> Self {
        let label = format!("conj({})", inner.label);
        Self::new(FunctionKind::Conjugate(Box::new(inner)), label)
    }

    /// A function given by its values at prime powers.
    pub fn custom(label: impl Into<String>, rule: PrimePowerRule) -> Self {
        Self::new(FunctionKind::Custom(rule), label)
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Value at a prime `p`; cheaper than [`Self::value_at`].
    pub fn value_at_prime(&self, p: u64) -> Complex64 {
        match &self.kind {
            FunctionKind::Liouville | FunctionKind::Moebius => Complex64::new(-1.0, 0.0),
            FunctionKind::LambdaQ(q) => root_of_unity(1, *q as u64),
            FunctionKind::Character(chi) => chi.value(p),
            FunctionKind::Archimedean(t) => archimedean_value(p, *t),
            FunctionKind::Twisted(chi, t) => chi.value(p) * archimedean_value(p, *t),
            FunctionKind::Product(fs) => fs.iter().map(|f| f.value_at_prime(p)).product(),
            FunctionKind::Conjugate(g) => g.value_at_prime(p).conj(),
            FunctionKind::Custom(rule) => rule(p, 1).unwrap_or(Complex64::new(1.0, 0.0)),
        }
    }

    /// Value at any integer; zero for `n ≤ 0`. Factorises `n` by trial
    /// division, so meant for spot checks rather than bulk evaluation.
    pub fn value_at(&self, n: i64) -> Complex64 {
        if n <= 0 {
            return Complex64::new(0.0, 0.0);
        }
        let n = n as u64;
        let factors = factorize(n);
        self.value_from_factors(n, &factors)
    }

    fn value_from_factors(&self, n: u64, factors: &[(u64, u32)]) -> Complex64 {
        let omega: u32 = factors.iter().map(|&(_, e)| e).sum();
        match &self.kind {
            FunctionKind::Liouville => sign(omega),
            FunctionKind::Moebius => {
                if factors.iter().any(|&(_, e)| e > 1) {
                    Complex64::new(0.0, 0.0)
                } else {
                    sign(omega)
                }
            }
            FunctionKind::LambdaQ(q) => lambda_q_value(omega, *q),
            FunctionKind::Character(chi) => chi.value(n),
            FunctionKind::Archimedean(t) => archimedean_value(n, *t),
            FunctionKind::Twisted(chi, t) => chi.value(n) * archimedean_value(n, *t),
            FunctionKind::Product(fs) => fs.iter().map(|f| f.value_from_factors(n, factors)).product(),
            FunctionKind::Conjugate(g) => g.value_from_factors(n, factors).conj(),
            FunctionKind::Custom(rule) => factors
                .iter()
                .map(|&(p, e)| rule(p, e).unwrap_or(Complex64::new(1.0, 0.0)))
                .product(),
        }
    }

    /// The finite alphabet of the function, if it has one that the census
    /// understands.
    pub fn alphabet(&self) -> Option<Alphabet> {
        match &self.kind {
            FunctionKind::Liouville => Some(Alphabet::Sign),
            FunctionKind::Moebius => Some(Alphabet::Moebius),
            FunctionKind::LambdaQ(q) => Some(Alphabet::RootsOfUnity(*q)),
            FunctionKind::Character(chi) => Some(Alphabet::Character {
                q: chi.modulus(),
                phi: chi.denominator(),
            }),
            _ => None,
        }
    }

    /// Census symbol of `n` (which must lie in `block`).
    pub fn symbol(&self, block: &FactorBlock, n: u64) -> Option<u64> {
        Some(match &self.kind {
            FunctionKind::Liouville => (block.liouville(n) < 0) as u64,
            FunctionKind::Moebius => match block.mobius_unchecked(n) {
                0 => 0,
                1 => 1,
                _ => 2,
            },
            FunctionKind::LambdaQ(q) => block.omega(n) as u64 % *q as u64,
            FunctionKind::Character(chi) => chi.exponent(n).map_or(0, |k| k + 1),
            _ => return None,
        })
    }

    /// Whether any component is user-defined (and so needs full factorisations).
    fn needs_factorization(&self) -> bool {
        match &self.kind {
            FunctionKind::Custom(_) => true,
            FunctionKind::Product(fs) => fs.iter().any(|f| f.needs_factorization()),
            FunctionKind::Conjugate(g) => g.needs_factorization(),
            _ => false,
        }
    }

    /// Validate every custom value at prime powers `p^j ≤ bound`.
    fn check_custom(&self, primes: &[u64], hi: u64) -> Result<(), FunctionError> {
        match &self.kind {
            FunctionKind::Custom(rule) => {
                for &p in primes {
                    let mut pk = p;
                    let mut j = 1;
                    while pk < hi {
                        if let Some(v) = rule(p, j) {
                            check_bound(&self.label, p, j, v)?;
                        }
                        pk = match pk.checked_mul(p) {
                            Some(x) => x,
                            None => break,
                        };
                        j += 1;
                    }
                }
                Ok(())
            }
            FunctionKind::Product(fs) => fs.iter().try_for_each(|f| f.check_custom(primes, hi)),
            FunctionKind::Conjugate(g) => g.check_custom(primes, hi),
            _ => Ok(()),
        }
    }
}

fn check_bound(label: &str, p: u64, j: u32, v: Complex64) -> Result<(), FunctionError> {
    let modulus = v.norm();
    if !(modulus <= 1.0 + BOUND_SLACK) {
        return Err(FunctionError::BoundViolation {
            label: label.to_string(),
            p,
            j,
            modulus,
        });
    }
    Ok(())
}

#[inline]
fn sign(omega: u32) -> Complex64 {
    Complex64::new(if omega & 1 == 1 { -1.0 } else { 1.0 }, 0.0)
}

#[inline]
fn lambda_q_value(omega: u32, q: u32) -> Complex64 {
    root_of_unity(omega as u64, q as u64)
}

#[inline]
pub(crate) fn archimedean_value(n: u64, t: f64) -> Complex64 {
    if t == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    Complex64::from_polar(1.0, t * (n as f64).ln())
}

/// Values of `g` at every `n` of the block, in order.
pub fn evaluate_range(
    g: &MultiplicativeFunctionSpec,
    block: &FactorBlock,
) -> Result<Vec<Complex64>, FunctionError> {
    let custom = if g.needs_factorization() {
        let base = PrimeTable::for_limit(block.hi());
        g.check_custom(base.primes(), block.hi())?;
        Some(CustomFactorization::new(block.lo(), block.hi(), &base))
    } else {
        None
    };
    let mut out = vec![Complex64::new(0.0, 0.0); block.len()];
    fill(g, block, custom.as_ref(), &mut out);
    Ok(out)
}

fn fill(
    g: &MultiplicativeFunctionSpec,
    block: &FactorBlock,
    custom: Option<&CustomFactorization>,
    out: &mut [Complex64],
) {
    let lo = block.lo();
    match &g.kind {
        FunctionKind::Liouville => {
            for (i, v) in out.iter_mut().enumerate() {
                *v = Complex64::new(block.liouville(lo + i as u64) as f64, 0.0);
            }
        }
        FunctionKind::Moebius => {
            for (i, v) in out.iter_mut().enumerate() {
                *v = Complex64::new(block.mobius_unchecked(lo + i as u64) as f64, 0.0);
            }
        }
        FunctionKind::LambdaQ(q) => {
            let roots: Vec<Complex64> = (0..*q).map(|k| lambda_q_value(k, *q)).collect();
            for (v, &om) in out.iter_mut().zip(block.omega_slice()) {
                *v = roots[om as usize % *q as usize];
            }
        }
        FunctionKind::Character(chi) => {
            let q = chi.modulus();
            let table = chi.values();
            let mut r = (lo % q) as usize;
            for v in out.iter_mut() {
                *v = table[r];
                r += 1;
                if r == q as usize {
                    r = 0;
                }
            }
        }
        FunctionKind::Archimedean(t) => {
            for (i, v) in out.iter_mut().enumerate() {
                *v = archimedean_value(lo + i as u64, *t);
            }
        }
        FunctionKind::Twisted(chi, t) => {
            for (i, v) in out.iter_mut().enumerate() {
                let n = lo + i as u64;
                let c = chi.value(n);
                *v = if c.re == 0.0 && c.im == 0.0 {
                    c
                } else {
                    c * archimedean_value(n, *t)
                };
            }
        }
        FunctionKind::Product(fs) => {
            out.iter_mut().for_each(|v| *v = Complex64::new(1.0, 0.0));
            let mut scratch = vec![Complex64::new(0.0, 0.0); out.len()];
            for f in fs {
                fill(f, block, custom, &mut scratch);
                for (v, s) in out.iter_mut().zip(&scratch) {
                    *v *= s;
                }
            }
        }
        FunctionKind::Conjugate(inner) => {
            fill(inner, block, custom, out);
            out.iter_mut().for_each(|v| *v = v.conj());
        }
        FunctionKind::Custom(rule) => {
            let fact = custom.expect("factorization prepared for custom functions");
            fact.evaluate(rule, out);
        }
    }
}

/// Full factorisations of a block, as `(p, j)` lists, for custom rules.
struct CustomFactorization {
    lo: u64,
    factors: Vec<Vec<(u64, u32)>>,
}

impl CustomFactorization {
    fn new(lo: u64, hi: u64, base: &PrimeTable) -> Self {
        let len = (hi - lo) as usize;
        let mut rem: Vec<u64> = (lo..hi).collect();
        let mut factors = vec![Vec::new(); len];
        let root = isqrt(hi - 1);
        for &p in base.primes() {
            if p > root {
                break;
            }
            let mut m = lo.div_ceil(p) * p;
            while m < hi {
                let i = (m - lo) as usize;
                let mut e = 0;
                while rem[i] % p == 0 {
                    rem[i] /= p;
                    e += 1;
                }
                factors[i].push((p, e));
                m += p;
            }
        }
        for (f, r) in factors.iter_mut().zip(&rem) {
            if *r > 1 {
                f.push((*r, 1));
            }
        }
        Self { lo, factors }
    }

    fn evaluate(&self, rule: &PrimePowerRule, out: &mut [Complex64]) {
        let mut warned = false;
        for (i, v) in out.iter_mut().enumerate() {
            *v = self.factors[i]
                .iter()
                .map(|&(p, e)| {
                    rule(p, e).unwrap_or_else(|| {
                        if !warned {
                            log::warn!(
                                "custom function unspecified at {p}^{e} (n = {}); using 1",
                                self.lo + i as u64
                            );
                            warned = true;
                        }
                        Complex64::new(1.0, 0.0)
                    })
                })
                .product();
        }
    }
}
