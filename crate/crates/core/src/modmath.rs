//! Arithmetic in `Z_p` and univariate polynomials over it.
//!
//! All values are kept in the canonical range `[0, p)`. Polynomials store
//! their coefficients in ascending degree order with trailing zeros trimmed,
//! so the zero polynomial is the empty vector.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Largest modulus for which [`find_roots`] will scan every field element.
pub const ROOT_SCAN_LIMIT: u64 = 1 << 22;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MathError {
    #[error("{value} is not invertible modulo {modulus}")]
    NotInvertible { value: u64, modulus: u64 },
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u64, u64),
    #[error("root {0} occurs twice")]
    DuplicateRoot(u64),
    #[error("cannot divide a constant polynomial by a linear factor")]
    DegreeTooLow,
    #[error("root scan over p = {0} exceeds the exhaustive budget of 2^22")]
    ScanBudgetExceeded(u64),
    #[error("{0} is not an odd prime")]
    NotPrime(u64),
}

/// Deterministic trial division.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) || n.is_multiple_of(3) {
        return false;
    }
    let mut d = 5u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) || n.is_multiple_of(d + 2) {
            return false;
        }
        d += 6;
    }
    true
}

#[inline]
pub fn add_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 + b as u128) % m as u128) as u64
}

#[inline]
pub fn sub_mod(a: u64, b: u64, m: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        ((a as u128 + m as u128 - b as u128) % m as u128) as u64
    }
}

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut result = 1u64;
    let mut b = base % m;
    while exp > 0 {
        if exp & 1 == 1 {
            result = mul_mod(result, b, m);
        }
        b = mul_mod(b, b, m);
        exp >>= 1;
    }
    result
}

/// Square root modulo an odd prime (Tonelli-Shanks). `None` for non-residues.
pub fn sqrt_mod(a: u64, p: u64) -> Option<u64> {
    let a = a % p;
    if a == 0 {
        return Some(0);
    }
    if pow_mod(a, (p - 1) / 2, p) != 1 {
        return None;
    }
    if p % 4 == 3 {
        return Some(pow_mod(a, (p + 1) / 4, p));
    }
    let mut q = p - 1;
    let mut s = 0u32;
    while q.is_multiple_of(2) {
        q /= 2;
        s += 1;
    }
    let mut z = 2u64;
    while pow_mod(z, (p - 1) / 2, p) != p - 1 {
        z += 1;
    }
    let mut m = s;
    let mut c = pow_mod(z, q, p);
    let mut t = pow_mod(a, q, p);
    let mut r = pow_mod(a, q.div_ceil(2), p);
    while t != 1 {
        let mut i = 0u32;
        let mut t2 = t;
        while t2 != 1 {
            t2 = mul_mod(t2, t2, p);
            i += 1;
        }
        let b = pow_mod(c, 1u64 << (m - i - 1), p);
        m = i;
        c = mul_mod(b, b, p);
        t = mul_mod(t, c, p);
        r = mul_mod(r, b, p);
    }
    Some(r)
}

/// A validated prime modulus `p ≥ 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeField {
    p: u64,
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self, MathError> {
        if p < 3 || !is_prime(p) {
            return Err(MathError::NotPrime(p));
        }
        Ok(Self { p })
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn elem(&self, value: u64) -> Fp {
        Fp::new(value, self.p)
    }

    pub fn elem_signed(&self, value: i128) -> Fp {
        Fp::new(value.rem_euclid(self.p as i128) as u64, self.p)
    }

    pub fn zero(&self) -> Fp {
        Fp::new(0, self.p)
    }

    pub fn one(&self) -> Fp {
        Fp::new(1, self.p)
    }
}

/// An element of `Z_p`, carrying its modulus.
///
/// The arithmetic operators panic when the two operands disagree on `p`;
/// operations that can see foreign input ([`Poly::eval`], [`Poly::sub`])
/// check first and return [`MathError::ModulusMismatch`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fp {
    value: u64,
    modulus: u64,
}

impl Fp {
    pub fn new(value: u64, modulus: u64) -> Self {
        assert!(modulus > 1, "modulus must exceed 1");
        Self {
            value: value % modulus,
            modulus,
        }
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn modulus(self) -> u64 {
        self.modulus
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    pub fn pow(self, exp: u64) -> Fp {
        Fp::new(pow_mod(self.value, exp, self.modulus), self.modulus)
    }

    pub fn inv(self) -> Result<Fp, MathError> {
        mod_inv(self)
    }

    fn same_modulus(self, other: Fp) {
        assert_eq!(
            self.modulus, other.modulus,
            "mixed-modulus arithmetic on Fp values"
        );
    }
}

impl fmt::Debug for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self.value, self.modulus)
    }
}

impl fmt::Display for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Add for Fp {
    type Output = Fp;
    fn add(self, rhs: Fp) -> Fp {
        self.same_modulus(rhs);
        Fp::new(add_mod(self.value, rhs.value, self.modulus), self.modulus)
    }
}

impl Sub for Fp {
    type Output = Fp;
    fn sub(self, rhs: Fp) -> Fp {
        self.same_modulus(rhs);
        Fp::new(sub_mod(self.value, rhs.value, self.modulus), self.modulus)
    }
}

impl Mul for Fp {
    type Output = Fp;
    fn mul(self, rhs: Fp) -> Fp {
        self.same_modulus(rhs);
        Fp::new(mul_mod(self.value, rhs.value, self.modulus), self.modulus)
    }
}

impl Neg for Fp {
    type Output = Fp;
    fn neg(self) -> Fp {
        Fp::new(sub_mod(0, self.value, self.modulus), self.modulus)
    }
}

/// Multiplicative inverse via the extended Euclidean algorithm.
pub fn mod_inv(a: Fp) -> Result<Fp, MathError> {
    let m = a.modulus as i128;
    let (mut old_r, mut r) = (a.value as i128, m);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return Err(MathError::NotInvertible {
            value: a.value,
            modulus: a.modulus,
        });
    }
    Ok(Fp::new(old_s.rem_euclid(m) as u64, a.modulus))
}

/// A polynomial over `Z_p` with ascending, canonical, trimmed coefficients.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Poly {
    coeffs: Vec<u64>,
    modulus: u64,
}

impl Poly {
    pub fn zero(modulus: u64) -> Self {
        Self {
            coeffs: Vec::new(),
            modulus,
        }
    }

    pub fn constant(c: Fp) -> Self {
        Self::from_coeffs(vec![c.value], c.modulus)
    }

    /// Builds a polynomial from ascending coefficients, reducing and trimming.
    pub fn from_coeffs(coeffs: Vec<u64>, modulus: u64) -> Self {
        let mut poly = Self {
            coeffs: coeffs.into_iter().map(|c| c % modulus).collect(),
            modulus,
        };
        poly.trim();
        poly
    }

    /// Monic polynomial `Π(x − r) + mask`. With no roots the result is the
    /// bare constant `mask`.
    pub fn from_roots(roots: &[Fp], mask: Fp) -> Result<Self, MathError> {
        if roots.is_empty() {
            return Ok(Self::constant(mask));
        }
        let mut seen = BTreeSet::new();
        let mut poly = Self::constant(Fp::new(1, mask.modulus));
        for &r in roots {
            if r.modulus != mask.modulus {
                return Err(MathError::ModulusMismatch(mask.modulus, r.modulus));
            }
            if !seen.insert(r.value) {
                return Err(MathError::DuplicateRoot(r.value));
            }
            poly = poly.mul_linear(r);
        }
        Ok(poly.add_constant(mask))
    }

    fn trim(&mut self) {
        while self.coeffs.last() == Some(&0) {
            self.coeffs.pop();
        }
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> Fp {
        Fp::new(self.coeffs.get(i).copied().unwrap_or(0), self.modulus)
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_monic(&self) -> bool {
        self.coeffs.last() == Some(&1)
    }

    /// Horner evaluation.
    pub fn eval(&self, x: Fp) -> Result<Fp, MathError> {
        if x.modulus != self.modulus {
            return Err(MathError::ModulusMismatch(self.modulus, x.modulus));
        }
        let mut acc = 0u64;
        for &c in self.coeffs.iter().rev() {
            acc = add_mod(mul_mod(acc, x.value, self.modulus), c, self.modulus);
        }
        Ok(Fp::new(acc, self.modulus))
    }

    /// `(x − r)·f`: `new_j = old_{j−1} − r·old_j`.
    pub fn mul_linear(&self, r: Fp) -> Poly {
        assert_eq!(r.modulus, self.modulus, "mixed-modulus linear factor");
        if self.is_zero() {
            return self.clone();
        }
        let p = self.modulus;
        let n = self.coeffs.len();
        let mut out = vec![0u64; n + 1];
        for j in 0..=n {
            let shifted = if j > 0 { self.coeffs[j - 1] } else { 0 };
            let scaled = if j < n { mul_mod(r.value, self.coeffs[j], p) } else { 0 };
            out[j] = sub_mod(shifted, scaled, p);
        }
        Poly::from_coeffs(out, p)
    }

    /// Synthetic division by `(x − r)`: returns `(q, rem)` with `f = (x − r)q + rem`.
    pub fn div_linear(&self, r: Fp) -> Result<(Poly, Fp), MathError> {
        if r.modulus != self.modulus {
            return Err(MathError::ModulusMismatch(self.modulus, r.modulus));
        }
        let n = match self.degree() {
            Some(d) if d >= 1 => d,
            _ => return Err(MathError::DegreeTooLow),
        };
        let p = self.modulus;
        let mut quotient = vec![0u64; n];
        let mut carry = 0u64;
        for k in (1..=n).rev() {
            carry = add_mod(self.coeffs[k], mul_mod(r.value, carry, p), p);
            quotient[k - 1] = carry;
        }
        let remainder = add_mod(self.coeffs[0], mul_mod(r.value, carry, p), p);
        Ok((Poly::from_coeffs(quotient, p), Fp::new(remainder, p)))
    }

    pub fn sub(&self, other: &Poly) -> Result<Poly, MathError> {
        if other.modulus != self.modulus {
            return Err(MathError::ModulusMismatch(self.modulus, other.modulus));
        }
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len)
            .map(|i| sub_mod(self.coeff(i).value, other.coeff(i).value, self.modulus))
            .collect();
        Ok(Poly::from_coeffs(coeffs, self.modulus))
    }

    pub fn add_constant(&self, c: Fp) -> Poly {
        assert_eq!(c.modulus, self.modulus, "mixed-modulus constant");
        let mut coeffs = self.coeffs.clone();
        if coeffs.is_empty() {
            coeffs.push(0);
        }
        coeffs[0] = add_mod(coeffs[0], c.value, self.modulus);
        Poly::from_coeffs(coeffs, self.modulus)
    }

    pub fn sub_constant(&self, c: Fp) -> Poly {
        self.add_constant(-c)
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly({:?} mod {})", self.coeffs, self.modulus)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match (i, c) {
                (0, _) => write!(f, "{c}")?,
                (1, 1) => write!(f, "x")?,
                (1, _) => write!(f, "{c}x")?,
                (_, 1) => write!(f, "x^{i}")?,
                _ => write!(f, "{c}x^{i}")?,
            }
        }
        Ok(())
    }
}

/// Result of an exhaustive root scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Roots {
    /// Every zero of a nonzero polynomial, ascending.
    Finite(Vec<Fp>),
    /// The zero polynomial vanishes everywhere.
    Degenerate,
}

impl Roots {
    pub fn values(&self) -> Vec<u64> {
        match self {
            Roots::Finite(v) => v.iter().map(|r| r.value).collect(),
            Roots::Degenerate => Vec::new(),
        }
    }
}

/// All `x ∈ [0, p)` with `f(x) = 0`, by exhaustive scan.
pub fn find_roots(f: &Poly) -> Result<Roots, MathError> {
    if f.is_zero() {
        return Ok(Roots::Degenerate);
    }
    let p = f.modulus;
    if p > ROOT_SCAN_LIMIT {
        return Err(MathError::ScanBudgetExceeded(p));
    }
    let degree = f.degree().unwrap_or(0);
    let mut roots = Vec::new();
    if degree == 0 {
        return Ok(Roots::Finite(roots));
    }
    // Forward differences: after seeding with f(0..=d), each step to x + 1
    // is d modular additions.
    let mut table: Vec<u64> = (0..=degree as u64)
        .map(|x| f.eval(Fp::new(x % p, p)).map(Fp::value))
        .collect::<Result<_, _>>()?;
    for k in 1..=degree {
        for i in (k..=degree).rev() {
            table[i] = sub_mod(table[i], table[i - 1], p);
        }
    }
    for x in 0..p {
        if table[0] == 0 {
            roots.push(Fp::new(x, p));
            if roots.len() == degree {
                break;
            }
        }
        for i in 0..degree {
            let s = table[i] + table[i + 1];
            table[i] = if s >= p { s - p } else { s };
        }
    }
    Ok(Roots::Finite(roots))
}
