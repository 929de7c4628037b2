//! Cyclic digit-shift masking of keys.
//!
//! A key `k < p` is written with exactly as many base-`b` digits as `p`
//! (padding with leading zeros). The top digit stays in place and the
//! remaining `m` digits rotate: `L_1(21349) = 23491` in base 10. When the
//! key's top digit is below the top digit of `p`, every rotation stays below
//! `p` and `L_{-l}` undoes `L_l` exactly.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShiftError {
    #[error("radix base must be at least 2, got {0}")]
    InvalidBase(u64),
    #[error("modulus {modulus} must exceed the base {base}")]
    ModulusTooSmall { base: u64, modulus: u64 },
    #[error("{value} is outside [0, {modulus})")]
    OutOfRange { value: u64, modulus: u64 },
    #[error("{0} cannot be masked: top digit too large or rotation block constant")]
    NotShiftable(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RadixContext {
    base: u64,
    modulus: u64,
    width: usize,
    top_digit: u64,
}

impl RadixContext {
    pub fn new(base: u64, modulus: u64) -> Result<Self, ShiftError> {
        if base < 2 {
            return Err(ShiftError::InvalidBase(base));
        }
        if modulus <= base {
            return Err(ShiftError::ModulusTooSmall { base, modulus });
        }
        let mut width = 0;
        let mut rest = modulus;
        let mut top_digit = 0;
        while rest > 0 {
            top_digit = rest % base;
            rest /= base;
            width += 1;
        }
        Ok(Self {
            base,
            modulus,
            width,
            top_digit,
        })
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Digit count of `p`, i.e. `m + 1`.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Length `m` of the rotating block.
    pub fn block_len(&self) -> usize {
        self.width - 1
    }

    pub fn top_digit(&self) -> u64 {
        self.top_digit
    }

    fn check(&self, k: u64) -> Result<(), ShiftError> {
        if k >= self.modulus {
            return Err(ShiftError::OutOfRange {
                value: k,
                modulus: self.modulus,
            });
        }
        Ok(())
    }

    /// Little-endian digits: index 0 holds `k_1`, the last index holds `k_{m+1}`.
    pub fn to_digits(&self, k: u64) -> Result<Vec<u64>, ShiftError> {
        self.check(k)?;
        let mut rest = k;
        Ok((0..self.width)
            .map(|_| {
                let d = rest % self.base;
                rest /= self.base;
                d
            })
            .collect())
    }

    fn digits_value(&self, digits: &[u64]) -> u128 {
        digits
            .iter()
            .rev()
            .fold(0u128, |acc, &d| acc * self.base as u128 + d as u128)
    }

    /// `L_l(k)`: rotate the lower block left by `l` (toward significance),
    /// right for negative `l`; reduced mod `p` only if the result reaches `p`.
    pub fn cyclic_shift(&self, k: u64, l: i64) -> Result<u64, ShiftError> {
        let digits = self.to_digits(k)?;
        let m = self.block_len();
        let l = l.rem_euclid(m as i64) as usize;
        let mut shifted = digits.clone();
        for i in 0..m {
            shifted[i] = digits[(i + m - l) % m];
        }
        Ok((self.digits_value(&shifted) % self.modulus as u128) as u64)
    }

    /// True iff the top digit of `k` is below that of `p` and the rotating
    /// block is not constant.
    pub fn shiftable(&self, k: u64) -> bool {
        let Ok(digits) = self.to_digits(k) else {
            return false;
        };
        let m = self.block_len();
        digits[m] < self.top_digit && digits[..m].iter().any(|&d| d != digits[0])
    }

    /// Shift indices in `[1, m − 1]` that change `k`.
    pub fn nontrivial_shifts(&self, k: u64) -> Vec<u32> {
        (1..self.block_len() as u32)
            .filter(|&l| self.cyclic_shift(k, l as i64).is_ok_and(|s| s != k))
            .collect()
    }

    /// Wraps `k` as a key that round-trips through every shift.
    pub fn shiftable_key(&self, k: u64) -> Result<ShiftableKey, ShiftError> {
        self.check(k)?;
        if k == 0 || !self.shiftable(k) {
            return Err(ShiftError::NotShiftable(k));
        }
        Ok(ShiftableKey { value: k, ctx: *self })
    }
}

/// A key in `[1, p)` satisfying the shift invertibility condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShiftableKey {
    value: u64,
    ctx: RadixContext,
}

impl ShiftableKey {
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn mask(&self, l: i64) -> u64 {
        self.ctx
            .cyclic_shift(self.value, l)
            .expect("shiftable keys are in range")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big_endian(ctx: &RadixContext, k: u64) -> Vec<u64> {
        let mut d = ctx.to_digits(k).unwrap();
        d.reverse();
        d
    }

    #[test]
    fn digits() {
        let ctx = RadixContext::new(10, 99991).unwrap();
        assert_eq!(big_endian(&ctx, 21349), vec![2, 1, 3, 4, 9]);
        assert_eq!(big_endian(&ctx, 0), vec![0; 5]);
        let small = RadixContext::new(10, 239).unwrap();
        assert_eq!(big_endian(&small, 14), vec![0, 1, 4]);
        assert_eq!(small.top_digit(), 2);
        assert_eq!(small.block_len(), 2);
        assert_eq!(
            small.to_digits(239),
            Err(ShiftError::OutOfRange { value: 239, modulus: 239 })
        );
    }

    #[test]
    fn bad_contexts() {
        assert_eq!(RadixContext::new(1, 17), Err(ShiftError::InvalidBase(1)));
        assert_eq!(
            RadixContext::new(10, 7),
            Err(ShiftError::ModulusTooSmall { base: 10, modulus: 7 })
        );
    }

    #[test]
    fn decimal_rotation_table() {
        let ctx = RadixContext::new(10, 99991).unwrap();
        let table: Vec<u64> = (1..=4).map(|l| ctx.cyclic_shift(21349, l).unwrap()).collect();
        assert_eq!(table, vec![23491, 24913, 29134, 21349]);
        assert_eq!(ctx.cyclic_shift(21349, 0).unwrap(), 21349);
        assert_eq!(ctx.cyclic_shift(23491, -1).unwrap(), 21349);
    }

    #[test]
    fn binary_rotation_table() {
        let ctx = RadixContext::new(2, 31).unwrap();
        let table: Vec<u64> = (1..=4).map(|l| ctx.cyclic_shift(0b11110, l).unwrap()).collect();
        assert_eq!(table, vec![0b11101, 0b11011, 0b10111, 0b11110]);
    }

    #[test]
    fn wraparound_counterexample() {
        let ctx = RadixContext::new(10, 239).unwrap();
        let forward = ctx.cyclic_shift(235, 1).unwrap();
        assert_eq!(forward, 253 % 239);
        assert_eq!(forward, 14);
        assert_eq!(ctx.cyclic_shift(forward, -1).unwrap(), 41);
    }

    #[test]
    fn shiftability() {
        assert!(!RadixContext::new(10, 239).unwrap().shiftable(235));
        let ctx = RadixContext::new(10, 1009).unwrap();
        assert!(ctx.shiftable(123));
        assert!(!ctx.shiftable(777));
        assert!(!ctx.shiftable(5000));
        assert!(ctx.shiftable_key(0).is_err());
        assert_eq!(ctx.shiftable_key(777), Err(ShiftError::NotShiftable(777)));
        let key = ctx.shiftable_key(123).unwrap();
        assert_eq!(key.mask(1), 231);
        assert_eq!(ctx.nontrivial_shifts(123), vec![1, 2]);
        // 1212 under a 5-digit modulus: shifting by 2 is a fixed point
        let ctx5 = RadixContext::new(10, 99991).unwrap();
        assert_eq!(ctx5.nontrivial_shifts(1212), vec![1, 3]);
    }
}
