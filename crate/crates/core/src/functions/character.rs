//! Dirichlet characters as exact tables of root-of-unity exponents.
//!
//! `(ℤ/qℤ)ˣ` is split by CRT into cyclic factors: a primitive root for each
//! odd prime power, `-1` for `4`, and the pair `{-1, 5}` for `2^k` with
//! `k ≥ 3`. A character is an exponent vector on those generators; its value
//! at a unit is `e(k / φ(q))` with `k` an integer mod `φ(q)`.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::OnceLock;

use num_complex::Complex64;

use super::FunctionError;

/// Prime factorisation by trial division, ascending primes.
pub(crate) fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p.saturating_mul(p) <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn euler_phi(q: u64) -> u64 {
    factorize(q)
        .into_iter()
        .fold(1, |acc, (p, e)| acc * (p - 1) * p.pow(e - 1))
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

/// Smallest primitive root of an odd prime power, by exhaustive search.
fn primitive_root(p: u64, pe: u64) -> u64 {
    let order = pe / p * (p - 1);
    let prime_divs: Vec<u64> = factorize(order).into_iter().map(|(r, _)| r).collect();
    (2..pe)
        .find(|&g| gcd(g, pe) == 1 && prime_divs.iter().all(|&r| pow_mod(g, order / r, pe) != 1))
        .expect("odd prime powers have primitive roots")
}

/// Solve `x ≡ r (mod m)` and `x ≡ 1 (mod q/m)` for coprime `m`, `q/m`.
fn crt_lift(r: u64, m: u64, q: u64) -> u64 {
    let other = q / m;
    (0..other)
        .map(|k| r + k * m)
        .find(|x| x % other == 1 % other)
        .expect("coprime moduli")
        % q
}

/// Cyclic decomposition of `(ℤ/qℤ)ˣ` with a discrete-log table.
#[derive(Clone, Debug)]
pub struct UnitGroup {
    q: u64,
    phi: u64,
    /// `(generator as residue mod q, order)`.
    generators: Vec<(u64, u64)>,
    /// Exponent vector of every residue, `None` for non-units.
    logs: Vec<Option<Vec<u64>>>,
}

impl UnitGroup {
    pub fn new(q: u64) -> Result<Self, FunctionError> {
        if q == 0 {
            return Err(FunctionError::ZeroModulus);
        }
        let mut generators = Vec::new();
        for (p, e) in factorize(q) {
            let pe = p.pow(e);
            if p == 2 {
                if e >= 2 {
                    generators.push((crt_lift(pe - 1, pe, q), 2));
                }
                if e >= 3 {
                    generators.push((crt_lift(5, pe, q), pe / 4));
                }
            } else {
                let g = primitive_root(p, pe);
                generators.push((crt_lift(g, pe, q), pe / p * (p - 1)));
            }
        }
        let phi = euler_phi(q);
        let mut logs: Vec<Option<Vec<u64>>> = vec![None; q as usize];
        // Walk every exponent vector in mixed radix.
        let mut exps = vec![0u64; generators.len()];
        let mut count = 0u64;
        loop {
            let mut x = 1 % q;
            for (&(g, _), &k) in generators.iter().zip(&exps) {
                x = mul_mod(x, pow_mod(g, k, q), q);
            }
            debug_assert!(logs[x as usize].is_none(), "generators are not independent");
            logs[x as usize] = Some(exps.clone());
            count += 1;
            let mut j = 0;
            loop {
                if j == exps.len() {
                    debug_assert_eq!(count, phi);
                    return Ok(Self {
                        q,
                        phi,
                        generators,
                        logs,
                    });
                }
                exps[j] += 1;
                if exps[j] < generators[j].1 {
                    break;
                }
                exps[j] = 0;
                j += 1;
            }
        }
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn order(&self) -> u64 {
        self.phi
    }

    pub fn generators(&self) -> &[(u64, u64)] {
        &self.generators
    }

    /// Units mod `q` in ascending order.
    pub fn units(&self) -> impl Iterator<Item = u64> + '_ {
        self.logs
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_some())
            .map(|(r, _)| r as u64)
    }

    pub fn log(&self, r: u64) -> Option<&[u64]> {
        self.logs[(r % self.q) as usize].as_deref()
    }

    /// Number of characters, equal to `φ(q)`.
    pub fn character_count(&self) -> u64 {
        self.phi
    }

    /// Character number `index`, principal first, exponent vectors in
    /// mixed radix with the first generator least significant.
    pub fn character(&self, index: u64) -> Result<DirichletCharacter, FunctionError> {
        if index >= self.phi {
            return Err(FunctionError::CharacterIndex {
                q: self.q,
                index,
                count: self.phi,
            });
        }
        let mut label = Vec::with_capacity(self.generators.len());
        let mut rest = index;
        for &(_, m) in &self.generators {
            label.push(rest % m);
            rest /= m;
        }
        let phi = self.phi;
        let exponents = self
            .logs
            .iter()
            .map(|l| {
                l.as_ref().map(|v| {
                    v.iter()
                        .zip(&label)
                        .zip(&self.generators)
                        .map(|((&e, &k), &(_, m))| mul_mod(e * (phi / m) % phi, k, phi))
                        .fold(0, |acc, x| (acc + x) % phi)
                })
            })
            .collect();
        Ok(DirichletCharacter::from_exponents(self.q, phi, exponents, label, index))
    }
}

/// `e(k/d)`, exact at multiples of a quarter turn.
pub fn root_of_unity(k: u64, d: u64) -> Complex64 {
    let k = k % d;
    if (4 * k) % d == 0 {
        return match 4 * k / d {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
    }
    Complex64::from_polar(1.0, TAU * k as f64 / d as f64)
}

/// A Dirichlet character mod `q`, stored as exponents `k` with
/// `χ(r) = e(k / denominator)`.
#[derive(Clone)]
pub struct DirichletCharacter {
    q: u64,
    denominator: u64,
    exponents: Vec<Option<u64>>,
    label: Vec<u64>,
    index: u64,
    rendered: OnceLock<Vec<Complex64>>,
}

impl PartialEq for DirichletCharacter {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q
            && self.denominator == other.denominator
            && self.exponents == other.exponents
    }
}

impl fmt::Debug for DirichletCharacter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DirichletCharacter")
            .field("q", &self.q)
            .field("index", &self.index)
            .field("label", &self.label)
            .field("parity", &self.parity())
            .finish()
    }
}

impl DirichletCharacter {
    fn from_exponents(
        q: u64,
        denominator: u64,
        exponents: Vec<Option<u64>>,
        label: Vec<u64>,
        index: u64,
    ) -> Self {
        Self {
            q,
            denominator,
            exponents,
            label,
            index,
            rendered: OnceLock::new(),
        }
    }

    /// The principal character mod `q`.
    pub fn principal(q: u64) -> Result<Self, FunctionError> {
        UnitGroup::new(q)?.character(0)
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// Exponent vector on the unit-group generators.
    pub fn label(&self) -> &[u64] {
        &self.label
    }

    /// Values are `e(k / denominator())`; the denominator is `φ(q)`.
    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    /// Exact exponent of `χ(n)`, `None` when `gcd(n, q) > 1`.
    pub fn exponent(&self, n: u64) -> Option<u64> {
        self.exponents[(n % self.q) as usize]
    }

    pub fn exponents(&self) -> &[Option<u64>] {
        &self.exponents
    }

    pub fn is_principal(&self) -> bool {
        self.exponents.iter().all(|e| matches!(e, None | Some(0)))
    }

    /// `χ(-1)` for `q > 2`, `+1` otherwise.
    pub fn parity(&self) -> i8 {
        if self.q <= 2 {
            return 1;
        }
        match self.exponent(self.q - 1) {
            Some(0) => 1,
            Some(k) => {
                debug_assert_eq!(2 * k, self.denominator);
                -1
            }
            None => unreachable!("q - 1 is a unit"),
        }
    }

    pub fn is_odd(&self) -> bool {
        self.parity() == -1
    }

    /// Complex values indexed by residue, rendered on first use.
    pub fn values(&self) -> &[Complex64] {
        self.rendered.get_or_init(|| {
            self.exponents
                .iter()
                .map(|e| match e {
                    None => Complex64::new(0.0, 0.0),
                    Some(k) => root_of_unity(*k, self.denominator),
                })
                .collect()
        })
    }

    #[inline]
    pub fn value(&self, n: u64) -> Complex64 {
        self.values()[(n % self.q) as usize]
    }

    /// `χ(n)` for any integer, using `n mod q`.
    pub fn value_signed(&self, n: i64) -> Complex64 {
        self.values()[n.rem_euclid(self.q as i64) as usize]
    }
}

/// All `φ(q)` characters mod `q`, principal first.
pub fn enumerate_characters(q: u64) -> Result<Vec<DirichletCharacter>, FunctionError> {
    let group = UnitGroup::new(q)?;
    (0..group.character_count()).map(|i| group.character(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn mod_four() {
        let chars = enumerate_characters(4).unwrap();
        assert_eq!(chars.len(), 2);
        assert!(chars[0].is_principal());
        let chi = &chars[1];
        assert!(close(chi.value(1), Complex64::new(1.0, 0.0)));
        assert!(close(chi.value(3), Complex64::new(-1.0, 0.0)));
        assert_eq!(chi.value(2), Complex64::new(0.0, 0.0));
        assert_eq!(chi.parity(), -1);
    }

    #[test]
    fn mod_one() {
        let chars = enumerate_characters(1).unwrap();
        assert_eq!(chars.len(), 1);
        for n in 1..20 {
            assert_eq!(chars[0].value(n), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn mod_five_brute_force() {
        // Homomorphisms of the cyclic group generated by 2 (order 4) are fixed by
        // χ(2) ∈ {1, i, -1, -i}; the odd ones have χ(2)^2 = χ(4) = χ(-1) = -1.
        let chars = enumerate_characters(5).unwrap();
        assert_eq!(chars.len(), 4);
        assert_eq!(chars.iter().filter(|c| c.is_odd()).count(), 2);
        let mut seen: Vec<Vec<Option<u64>>> = chars.iter().map(|c| c.exponents().to_vec()).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn zero_modulus() {
        assert!(matches!(enumerate_characters(0), Err(FunctionError::ZeroModulus)));
    }

    #[test]
    fn exact_multiplicativity_and_support() {
        for q in 1..=60u64 {
            for chi in enumerate_characters(q).unwrap() {
                for a in 0..q {
                    assert_eq!(chi.exponent(a).is_some(), gcd(a, q) == 1, "q={q} a={a}");
                    for b in 0..q {
                        match (chi.exponent(a), chi.exponent(b), chi.exponent(a * b % q)) {
                            (Some(x), Some(y), Some(z)) => {
                                assert_eq!((x + y) % chi.denominator(), z)
                            }
                            (None, _, None) | (_, None, None) => {}
                            other => panic!("support mismatch {other:?}"),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn generators_for_two_powers() {
        let g = UnitGroup::new(32).unwrap();
        assert_eq!(g.generators(), &[(31, 2), (5, 8)]);
        let g = UnitGroup::new(12).unwrap();
        assert_eq!(g.order(), 4);
        assert_eq!(g.generators().len(), 2);
    }

    #[test]
    fn index_out_of_range() {
        let g = UnitGroup::new(4).unwrap();
        assert!(matches!(g.character(5), Err(FunctionError::CharacterIndex { .. })));
    }
}
