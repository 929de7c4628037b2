//! Adversaries that watch a filter across two epochs.
//!
//! Both attacks read only published data: the two coefficient vectors and,
//! for shift-masked filters, the public shift indices. Whether a candidate
//! is the real key is for the caller to judge with [`AttackReport::recovers`].

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::board::PublicBoard;
use crate::hierarchy::ClassId;
use crate::modmath::{find_roots, Fp, MathError, Poly, Roots};
use crate::radixshift::RadixContext;
use crate::schemes::{Scheme, SchemeError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttackError {
    #[error("attack needs deg new = deg old + 1, got {old:?} and {new:?}")]
    DegreeMismatch {
        old: Option<usize>,
        new: Option<usize>,
    },
    #[error("the two filters live over different moduli")]
    ModulusMismatch,
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackKind {
    LinHsu,
    TripathyPaul,
}

impl AttackKind {
    pub fn tag(self) -> &'static str {
        match self {
            AttackKind::LinHsu => "linhsu",
            AttackKind::TripathyPaul => "tp",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Turns a filter value back into a key guess using public shift data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskExtractor {
    /// The filter is masked by the key itself.
    Identity,
    /// Filter values are `L_l(K)`; guesses are unshifted by the public `l`.
    Shift {
        radix: RadixContext,
        old_shift: u32,
        new_shift: u32,
    },
}

impl MaskExtractor {
    /// The extractor an observer of `class` across the two boards would use.
    pub fn from_boards(
        old: &PublicBoard,
        new: &PublicBoard,
        class: &ClassId,
    ) -> Result<Self, SchemeError> {
        match new.params.radix {
            Some(radix) if new.params.scheme.is_shift_masked() => {
                let shift = |b: &PublicBoard| {
                    b.class(class)?.shift.ok_or_else(|| {
                        SchemeError::Inconsistent(format!("{class} has no shift index"))
                    })
                };
                Ok(MaskExtractor::Shift {
                    radix,
                    old_shift: shift(old)?,
                    new_shift: shift(new)?,
                })
            }
            _ => Ok(MaskExtractor::Identity),
        }
    }

    pub fn unmask_old(&self, v: u64) -> Option<u64> {
        self.unmask(v, false)
    }

    pub fn unmask_new(&self, v: u64) -> Option<u64> {
        self.unmask(v, true)
    }

    fn unmask(&self, v: u64, new: bool) -> Option<u64> {
        match *self {
            MaskExtractor::Identity => Some(v),
            MaskExtractor::Shift {
                radix,
                old_shift,
                new_shift,
            } => {
                let l = if new { new_shift } else { old_shift };
                radix.cyclic_shift(v, -(l as i64)).ok()
            }
        }
    }
}

/// Everything an attack produced, plus the public inputs it saw.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackReport {
    pub kind: AttackKind,
    pub old_filter: Vec<u64>,
    pub new_filter: Vec<u64>,
    /// Recovered candidate roots, ascending.
    pub candidate_roots: Vec<u64>,
    /// Recovered candidate keys, ascending and deduplicated.
    pub candidate_keys: Vec<u64>,
    /// The two filters were identical, so every point is a root of their
    /// difference.
    pub degenerate: bool,
}

impl AttackReport {
    pub fn recovers(&self, true_key: u64) -> bool {
        self.candidate_keys.contains(&true_key)
    }

    fn new(kind: AttackKind, old: &Poly, new: &Poly) -> Self {
        Self {
            kind,
            old_filter: old.coeffs().to_vec(),
            new_filter: new.coeffs().to_vec(),
            candidate_roots: Vec::new(),
            candidate_keys: Vec::new(),
            degenerate: false,
        }
    }
}

impl fmt::Display for AttackReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "attack: {}", self.kind)?;
        writeln!(f, "old filter: {:?}", self.old_filter)?;
        writeln!(f, "new filter: {:?}", self.new_filter)?;
        if self.degenerate {
            return writeln!(f, "filters identical: nothing to recover");
        }
        writeln!(f, "candidate roots: {:?}", self.candidate_roots)?;
        write!(f, "candidate keys: {:?}", self.candidate_keys)
    }
}

fn check_degrees(old: &Poly, new: &Poly) -> Result<usize, AttackError> {
    if old.modulus() != new.modulus() {
        return Err(AttackError::ModulusMismatch);
    }
    match (old.degree(), new.degree()) {
        (Some(a), Some(b)) if a >= 1 && b == a + 1 => Ok(a),
        (a, b) => Err(AttackError::DegreeMismatch { old: a, new: b }),
    }
}

/// Solves `new(x) − old(x) = 0`. On an unhardened filter every common root
/// `ρ` gives `old(ρ) = new(ρ) = K`.
pub fn linhsu_attack(
    old: &Poly,
    new: &Poly,
    extractor: &MaskExtractor,
) -> Result<AttackReport, AttackError> {
    let mut report = AttackReport::new(AttackKind::LinHsu, old, new);
    let diff = new.sub(old)?;
    let roots = match find_roots(&diff)? {
        Roots::Degenerate => {
            report.degenerate = true;
            return Ok(report);
        }
        Roots::Finite(r) => r,
    };
    check_degrees(old, new)?;
    let mut keys = BTreeSet::new();
    for &rho in &roots {
        keys.extend(extractor.unmask_old(old.eval(rho)?.value()));
        keys.extend(extractor.unmask_new(new.eval(rho)?.value()));
    }
    report.candidate_roots = roots.iter().map(|r| r.value()).collect();
    report.candidate_keys = keys.into_iter().collect();
    Ok(report)
}

/// Reads the inserted root off the subleading coefficients: for monic
/// filters the coefficient below the leading one is minus the root sum, so
/// `c = old[deg − 1] − new[deg]`. Needs an old filter of degree at least 2;
/// below that the subleading coefficient is the masked constant term.
pub fn tripathy_paul_attack(
    old: &Poly,
    new: &Poly,
    extractor: &MaskExtractor,
) -> Result<AttackReport, AttackError> {
    let deg = check_degrees(old, new)?;
    let mut report = AttackReport::new(AttackKind::TripathyPaul, old, new);
    let c: Fp = old.coeff(deg - 1) - new.coeff(deg);
    report.candidate_roots = vec![c.value()];
    report.candidate_keys = extractor
        .unmask_new(new.eval(c)?.value())
        .into_iter()
        .collect();
    Ok(report)
}

/// Runs `kind` against one class across two published boards.
pub fn attack_boards(
    kind: AttackKind,
    old: &PublicBoard,
    new: &PublicBoard,
    class: &ClassId,
) -> Result<AttackReport, AttackError> {
    if old.params.scheme != new.params.scheme {
        return Err(SchemeError::Inconsistent("boards use different schemes".into()).into());
    }
    if old.params.scheme == Scheme::AklTaylor {
        return Err(SchemeError::Inconsistent("Akl-Taylor publishes no filters".into()).into());
    }
    let old_f = old.secure_filter(class)?.poly;
    let new_f = new.secure_filter(class)?.poly;
    let extractor = MaskExtractor::from_boards(old, new, class)?;
    match kind {
        AttackKind::LinHsu => linhsu_attack(&old_f, &new_f, &extractor),
        AttackKind::TripathyPaul => tripathy_paul_attack(&old_f, &new_f, &extractor),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roots(vals: &[u64], p: u64) -> Vec<Fp> {
        vals.iter().map(|&v| Fp::new(v, p)).collect()
    }

    #[test]
    fn tripathy_paul_small_example() {
        let p = 23;
        let k = Fp::new(11, p);
        let old = Poly::from_roots(&roots(&[3, 5], p), k).unwrap();
        let new = Poly::from_roots(&roots(&[3, 5, 9], p), k).unwrap();
        // x² − 8x + 15 and x³ − 17x² + ... by hand
        assert_eq!(old.coeff(1).value(), 15);
        assert_eq!(new.coeff(2).value(), 6);
        let r = tripathy_paul_attack(&old, &new, &MaskExtractor::Identity).unwrap();
        assert_eq!(r.candidate_roots, vec![9]);
        assert!(r.recovers(11));
    }

    #[test]
    fn tripathy_paul_zero_root() {
        let p = 23;
        let k = Fp::new(4, p);
        let old = Poly::from_roots(&roots(&[3, 5], p), k).unwrap();
        let new = Poly::from_roots(&roots(&[3, 5, 0], p), k).unwrap();
        let r = tripathy_paul_attack(&old, &new, &MaskExtractor::Identity).unwrap();
        assert_eq!(r.candidate_roots, vec![0]);
        assert!(r.recovers(4));
    }

    #[test]
    fn linhsu_recovers_unmasked_key() {
        let p = 10007;
        let k = Fp::new(4321, p);
        let old = Poly::from_roots(&roots(&[3, 5], p), k).unwrap();
        let new = Poly::from_roots(&roots(&[3, 5, 9], p), k).unwrap();
        let r = linhsu_attack(&old, &new, &MaskExtractor::Identity).unwrap();
        // new − old = (x − 3)(x − 5)(x − 10)
        assert_eq!(r.candidate_roots, vec![3, 5, 10]);
        assert!(r.recovers(4321));
    }

    #[test]
    fn linhsu_fails_when_h_and_mask_change() {
        let p = 10007;
        let radix = RadixContext::new(10, p).unwrap();
        let key = 4321;
        let (l_old, l_new) = (1, 2);
        let m = |l: i64| Fp::new(radix.cyclic_shift(key, l).unwrap(), p);
        let old = Poly::from_roots(&roots(&[77, 3, 5], p), m(l_old)).unwrap();
        let new = Poly::from_roots(&roots(&[901, 3, 5, 9], p), m(l_new)).unwrap();
        let ex = MaskExtractor::Shift {
            radix,
            old_shift: l_old as u32,
            new_shift: l_new as u32,
        };
        let lh = linhsu_attack(&old, &new, &ex).unwrap();
        assert!(!lh.recovers(key));
        let tp = tripathy_paul_attack(&old, &new, &ex).unwrap();
        // c = a + h̃ − h
        assert_eq!(tp.candidate_roots, vec![9 + 901 - 77]);
        assert!(!tp.recovers(key));
    }

    #[test]
    fn degenerate_and_mismatched_inputs() {
        let p = 23;
        let f = Poly::from_roots(&roots(&[3, 5], p), Fp::new(2, p)).unwrap();
        let r = linhsu_attack(&f, &f, &MaskExtractor::Identity).unwrap();
        assert!(r.degenerate);
        assert!(r.candidate_keys.is_empty());
        assert!(matches!(
            tripathy_paul_attack(&f, &f, &MaskExtractor::Identity),
            Err(AttackError::DegreeMismatch { .. })
        ));
        let g = Poly::from_roots(&roots(&[3], p), Fp::new(2, p)).unwrap();
        assert!(matches!(
            linhsu_attack(&f, &g, &MaskExtractor::Identity),
            Err(AttackError::DegreeMismatch { .. })
        ));
    }
}
