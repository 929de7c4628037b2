//! Desk-scale short-Weierstrass curves `y² = x³ + ax + b` over `GF(p)`.
//!
//! Nothing here is constant time or of cryptographic size. The group exists
//! to produce filter roots `Ã(n_j·P_i)` and to carry `(K_i, n_i)` from a
//! class to the CA.

use rand::Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::modmath::{add_mod, is_prime, mul_mod, pow_mod, sqrt_mod, sub_mod, Fp, MathError, PrimeField};

/// Moduli up to this size get a full point count during validation.
pub const EXHAUSTIVE_VALIDATION_LIMIT: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CurveError {
    #[error("singular curve: 4a^3 + 27b^2 = 0 mod p")]
    Singular,
    #[error("point {0:?} is not on the curve")]
    OffCurve(Point),
    #[error("base point order check failed: {0}")]
    BadOrder(String),
    #[error("the point at infinity has no scalar image")]
    InfinityPoint,
    #[error("ephemeral scalar annihilates the CA public key")]
    DegenerateEphemeral,
    #[error("no prime-order curve found over p = {0}")]
    NoCurveFound(u64),
    #[error("unknown point map {0:?}")]
    UnknownMap(String),
    #[error(transparent)]
    Math(#[from] MathError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Point {
    Infinity,
    Affine { x: u64, y: u64 },
}

impl Point {
    pub fn is_infinity(&self) -> bool {
        matches!(self, Point::Infinity)
    }
}

/// The agreed map `Ã` from curve points to filter roots in `Z_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PointMap {
    /// `Ã(x, y) = x`. `Ã(P) = Ã(−P)`.
    #[default]
    XCoordinate,
    /// SHA-256 of `"x,y"`, first 16 bytes big-endian, reduced mod p.
    Sha256,
}

impl PointMap {
    pub fn id(&self) -> &'static str {
        match self {
            PointMap::XCoordinate => "x",
            PointMap::Sha256 => "sha256",
        }
    }

    pub fn from_id(id: &str) -> Result<Self, CurveError> {
        match id {
            "x" => Ok(PointMap::XCoordinate),
            "sha256" => Ok(PointMap::Sha256),
            other => Err(CurveError::UnknownMap(other.to_string())),
        }
    }
}

/// Transport ciphertext `{kG, (K, n) + kP_ca}`.
///
/// `(K, n)` is masked coordinate-wise by `kP_ca = (sx, sy)`:
/// `masked_key = K + sx mod p`, `masked_secret = n + sy mod q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransportCiphertext {
    pub ephemeral: Point,
    pub masked_key: u64,
    pub masked_secret: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveContext {
    field: PrimeField,
    a: u64,
    b: u64,
    generator: Point,
    order: u64,
    map: PointMap,
}

impl CurveContext {
    /// Validates the curve and base point. For `p ≤ 2^20` the group is also
    /// counted to confirm that `q` divides its order.
    pub fn new(p: u64, a: u64, b: u64, gx: u64, gy: u64, q: u64) -> Result<Self, CurveError> {
        let field = PrimeField::new(p)?;
        if p <= 3 {
            return Err(CurveError::Math(MathError::NotPrime(p)));
        }
        let (a, b) = (a % p, b % p);
        let disc = add_mod(
            mul_mod(4, pow_mod(a, 3, p), p),
            mul_mod(27, mul_mod(b, b, p), p),
            p,
        );
        if disc == 0 {
            return Err(CurveError::Singular);
        }
        let ctx = Self {
            field,
            a,
            b,
            generator: Point::Affine { x: gx % p, y: gy % p },
            order: q,
            map: PointMap::default(),
        };
        if !ctx.contains(&ctx.generator) {
            return Err(CurveError::OffCurve(ctx.generator));
        }
        if !is_prime(q) {
            return Err(CurveError::BadOrder(format!("q = {q} is not prime")));
        }
        if !ctx.mul(q, &ctx.generator)?.is_infinity() {
            return Err(CurveError::BadOrder(format!("q·G ≠ O for q = {q}")));
        }
        if p <= EXHAUSTIVE_VALIDATION_LIMIT {
            let count = ctx.count_points();
            if !count.is_multiple_of(q) {
                return Err(CurveError::BadOrder(format!(
                    "q = {q} does not divide the group order {count}"
                )));
            }
        }
        Ok(ctx)
    }

    /// `y² = x³ + 2x + 2` over `F_17`, `G = (5, 1)` of order 19.
    pub fn toy() -> Self {
        Self::new(17, 2, 2, 5, 1, 19).expect("toy curve is valid")
    }

    /// Randomly searches `y² = x³ + ax + b` over `p` for a group whose order
    /// has a prime factor `q ≥ N/16`, and returns a base point of order `q`.
    pub fn search<R: Rng + ?Sized>(p: u64, rng: &mut R) -> Result<Self, CurveError> {
        PrimeField::new(p)?;
        if p <= 3 || p > EXHAUSTIVE_VALIDATION_LIMIT {
            return Err(CurveError::NoCurveFound(p));
        }
        for _ in 0..256 {
            let a = rng.gen_range(1..p);
            let b = rng.gen_range(1..p);
            let probe = Self {
                field: PrimeField::new(p)?,
                a,
                b,
                generator: Point::Infinity,
                order: 1,
                map: PointMap::default(),
            };
            let disc = add_mod(
                mul_mod(4, pow_mod(a, 3, p), p),
                mul_mod(27, mul_mod(b, b, p), p),
                p,
            );
            if disc == 0 {
                continue;
            }
            let n = probe.count_points();
            let q = largest_prime_factor(n);
            if q < 5 || q * 16 < n {
                continue;
            }
            let cofactor = n / q;
            for _ in 0..64 {
                let x = rng.gen_range(0..p);
                let Some(y) = sqrt_mod(probe.rhs(x), p) else {
                    continue;
                };
                let g = probe.mul(cofactor, &Point::Affine { x, y })?;
                if let Point::Affine { x, y } = g {
                    return Self::new(p, a, b, x, y, q);
                }
            }
        }
        Err(CurveError::NoCurveFound(p))
    }

    pub fn with_map(mut self, map: PointMap) -> Self {
        self.map = map;
        self
    }

    pub fn p(&self) -> u64 {
        self.field.modulus()
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn a(&self) -> u64 {
        self.a
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    pub fn generator(&self) -> Point {
        self.generator
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn map(&self) -> PointMap {
        self.map
    }

    fn rhs(&self, x: u64) -> u64 {
        let p = self.p();
        add_mod(
            add_mod(pow_mod(x, 3, p), mul_mod(self.a, x, p), p),
            self.b,
            p,
        )
    }

    pub fn contains(&self, pt: &Point) -> bool {
        match *pt {
            Point::Infinity => true,
            Point::Affine { x, y } => {
                x < self.p() && y < self.p() && mul_mod(y, y, self.p()) == self.rhs(x)
            }
        }
    }

    fn require(&self, pt: &Point) -> Result<(), CurveError> {
        if self.contains(pt) {
            Ok(())
        } else {
            Err(CurveError::OffCurve(*pt))
        }
    }

    /// Number of points including `O`, via Euler's criterion per abscissa.
    pub fn count_points(&self) -> u64 {
        let p = self.p();
        let half = (p - 1) / 2;
        let mut n = 1;
        for x in 0..p {
            let r = self.rhs(x);
            if r == 0 {
                n += 1;
            } else if pow_mod(r, half, p) == 1 {
                n += 2;
            }
        }
        n
    }

    /// Every point of the group, `O` first. Only for `p ≤ 2^20`.
    pub fn points(&self) -> Vec<Point> {
        assert!(self.p() <= EXHAUSTIVE_VALIDATION_LIMIT, "enumeration is desk-scale only");
        let p = self.p();
        let mut out = vec![Point::Infinity];
        for x in 0..p {
            if let Some(y) = sqrt_mod(self.rhs(x), p) {
                out.push(Point::Affine { x, y });
                if y != 0 {
                    out.push(Point::Affine { x, y: p - y });
                }
            }
        }
        out
    }

    pub fn neg(&self, pt: &Point) -> Point {
        match *pt {
            Point::Infinity => Point::Infinity,
            Point::Affine { x, y } => Point::Affine {
                x,
                y: sub_mod(0, y, self.p()),
            },
        }
    }

    pub fn add(&self, lhs: &Point, rhs: &Point) -> Result<Point, CurveError> {
        self.require(lhs)?;
        self.require(rhs)?;
        Ok(self.add_unchecked(lhs, rhs))
    }

    fn add_unchecked(&self, lhs: &Point, rhs: &Point) -> Point {
        let p = self.p();
        let (x1, y1, x2, y2) = match (*lhs, *rhs) {
            (Point::Infinity, q) => return q,
            (q, Point::Infinity) => return q,
            (Point::Affine { x: x1, y: y1 }, Point::Affine { x: x2, y: y2 }) => (x1, y1, x2, y2),
        };
        if x1 == x2 && add_mod(y1, y2, p) == 0 {
            return Point::Infinity;
        }
        let slope = if x1 == x2 {
            let num = add_mod(mul_mod(3, mul_mod(x1, x1, p), p), self.a, p);
            let den = self.field.elem(mul_mod(2, y1, p));
            mul_mod(num, den.inv().expect("y ≠ 0 here").value(), p)
        } else {
            let num = sub_mod(y2, y1, p);
            let den = self.field.elem(sub_mod(x2, x1, p));
            mul_mod(num, den.inv().expect("x1 ≠ x2 here").value(), p)
        };
        let x3 = sub_mod(sub_mod(mul_mod(slope, slope, p), x1, p), x2, p);
        let y3 = sub_mod(mul_mod(slope, sub_mod(x1, x3, p), p), y1, p);
        Point::Affine { x: x3, y: y3 }
    }

    /// Double-and-add.
    pub fn mul(&self, n: u64, pt: &Point) -> Result<Point, CurveError> {
        self.require(pt)?;
        let mut acc = Point::Infinity;
        let mut addend = *pt;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.add_unchecked(&acc, &addend);
            }
            addend = self.add_unchecked(&addend, &addend);
            k >>= 1;
        }
        Ok(acc)
    }

    pub fn mul_generator(&self, n: u64) -> Point {
        self.mul(n, &self.generator).expect("generator is on the curve")
    }

    /// `Ã(P)` under the configured map.
    pub fn point_to_scalar(&self, pt: &Point) -> Result<Fp, CurveError> {
        self.require(pt)?;
        match (*pt, self.map) {
            (Point::Infinity, _) => Err(CurveError::InfinityPoint),
            (Point::Affine { x, .. }, PointMap::XCoordinate) => Ok(self.field.elem(x)),
            (Point::Affine { x, y }, PointMap::Sha256) => {
                let digest = Sha256::digest(format!("{x},{y}").as_bytes());
                let mut head = [0u8; 16];
                head.copy_from_slice(&digest[..16]);
                let v = u128::from_be_bytes(head) % self.p() as u128;
                Ok(self.field.elem(v as u64))
            }
        }
    }

    /// Class side of enrollment: masks `(key, secret)` under `k·P_ca`.
    pub fn transport_encrypt(
        &self,
        key: u64,
        secret: u64,
        ca_public: &Point,
        k: u64,
    ) -> Result<TransportCiphertext, CurveError> {
        self.require(ca_public)?;
        let shared = self.mul(k, ca_public)?;
        let Point::Affine { x: sx, y: sy } = shared else {
            return Err(CurveError::DegenerateEphemeral);
        };
        Ok(TransportCiphertext {
            ephemeral: self.mul_generator(k),
            masked_key: add_mod(key % self.p(), sx, self.p()),
            masked_secret: add_mod(secret % self.order, sy % self.order, self.order),
        })
    }

    /// CA side: unmasks with `n_ca·C1 = k·P_ca`.
    pub fn transport_decrypt(
        &self,
        ct: &TransportCiphertext,
        ca_secret: u64,
    ) -> Result<(u64, u64), CurveError> {
        if ct.ephemeral.is_infinity() {
            return Err(CurveError::OffCurve(ct.ephemeral));
        }
        let shared = self.mul(ca_secret, &ct.ephemeral)?;
        let Point::Affine { x: sx, y: sy } = shared else {
            return Err(CurveError::DegenerateEphemeral);
        };
        Ok((
            sub_mod(ct.masked_key % self.p(), sx, self.p()),
            sub_mod(ct.masked_secret % self.order, sy % self.order, self.order),
        ))
    }
}

fn largest_prime_factor(mut n: u64) -> u64 {
    let mut largest = 1;
    let mut d = 2;
    while d * d <= n {
        while n.is_multiple_of(d) {
            largest = d;
            n /= d;
        }
        d += 1;
    }
    if n > 1 {
        largest = largest.max(n);
    }
    largest
}
