//! The six key-assignment schemes and the CA that runs them.
//!
//! Filter schemes publish, for every class `u_i` with strict predecessors
//! `S_i`, a monic polynomial whose roots only those predecessors can compute:
//!
//! | tag      | roots                                  | mask        |
//! |----------|----------------------------------------|-------------|
//! | `wu`     | `g_i^{s_j} mod p`                      | `K_i`       |
//! | `jw`     | `Ã(n_j·P_i)`                           | `K_i`       |
//! | `linhsu` | `H(r ‖ Ã(n_j·P_i)) mod p`              | `K_i`       |
//! | `m1`     | `h_i` and `Ã(n_j·P_i)`                 | `L_{l_i}(K_i)` |
//! | `m2`     | `h_i` and `g_i^{s_j} mod p`            | `L_{l_i}(K_i)` |
//!
//! `akl` publishes exponents `t_i` instead of filters.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::board::{CaSecrets, ClassSecrets, PublicBoard, PublicClass};
use crate::curve::{CurveContext, CurveError};
use crate::dynamics::DynamicsError;
use crate::hierarchy::{ClassId, Hierarchy, HierarchyError};
use crate::modmath::{is_prime, pow_mod, Fp, MathError, Poly, PrimeField};
use crate::radixshift::{RadixContext, ShiftError};

/// Retry bound for every resampling loop in key generation and updates.
pub const RESAMPLE_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    AklTaylor,
    Wu,
    JengWang,
    LinHsu,
    Method1,
    Method2,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::AklTaylor,
        Scheme::Wu,
        Scheme::JengWang,
        Scheme::LinHsu,
        Scheme::Method1,
        Scheme::Method2,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Scheme::AklTaylor => "akl",
            Scheme::Wu => "wu",
            Scheme::JengWang => "jw",
            Scheme::LinHsu => "linhsu",
            Scheme::Method1 => "m1",
            Scheme::Method2 => "m2",
        }
    }

    pub fn uses_curve(&self) -> bool {
        matches!(self, Scheme::JengWang | Scheme::LinHsu | Scheme::Method1)
    }

    pub fn uses_exponent_roots(&self) -> bool {
        matches!(self, Scheme::Wu | Scheme::Method2)
    }

    /// Methods 1 and 2: extra CA root `h_i` and shift-masked key.
    pub fn is_shift_masked(&self) -> bool {
        matches!(self, Scheme::Method1 | Scheme::Method2)
    }

    pub fn has_filters(&self) -> bool {
        !matches!(self, Scheme::AklTaylor)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scheme {
    type Err = SchemeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.tag() == s)
            .ok_or_else(|| SchemeError::UnknownScheme(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemeError {
    #[error("unknown scheme tag {0:?}")]
    UnknownScheme(String),
    #[error("scheme {0} needs an elliptic curve")]
    MissingCurve(Scheme),
    #[error("curve modulus {curve} differs from filter modulus {field}")]
    CurveModulusMismatch { curve: u64, field: u64 },
    #[error("radix {base} gives a {block}-digit rotation block under p; shift masking needs at least 3")]
    RadixTooNarrow { base: u64, block: usize },
    #[error("unknown class {0}")]
    UnknownClass(ClassId),
    #[error("key {key} of class {class} is outside [1, p)")]
    KeyOutOfRange { class: ClassId, key: u64 },
    #[error("key {key} of class {class} is not shiftable with two distinct re-masks")]
    NotShiftable { class: ClassId, key: u64 },
    #[error("filter of {class} has a repeated root {value}")]
    RootCollision { class: ClassId, value: u64 },
    #[error("{viewer} is not a predecessor of {target}")]
    NotPredecessor { viewer: ClassId, target: ClassId },
    #[error("no shift index re-masks the key of {0}")]
    NoFreshShift(ClassId),
    #[error("scheme {0} does not accept caller-chosen keys")]
    KeysAreAssigned(Scheme),
    #[error("inconsistent CA state: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Shift(#[from] ShiftError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Public parameters shared by every class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemeParams {
    pub scheme: Scheme,
    pub field: PrimeField,
    pub curve: Option<CurveContext>,
    pub radix: Option<RadixContext>,
}

impl SchemeParams {
    /// `base` is the radix of the shift mask; ignored by unmasked schemes.
    pub fn new(
        scheme: Scheme,
        p: u64,
        curve: Option<CurveContext>,
        base: u64,
    ) -> Result<Self, SchemeError> {
        let field = PrimeField::new(p)?;
        let curve = if scheme.uses_curve() {
            let c = curve.ok_or(SchemeError::MissingCurve(scheme))?;
            if c.p() != p {
                return Err(SchemeError::CurveModulusMismatch { curve: c.p(), field: p });
            }
            Some(c)
        } else {
            None
        };
        let radix = if scheme.is_shift_masked() {
            let r = RadixContext::new(base, p)?;
            if r.block_len() < 3 {
                return Err(SchemeError::RadixTooNarrow {
                    base,
                    block: r.block_len(),
                });
            }
            Some(r)
        } else {
            None
        };
        Ok(Self {
            scheme,
            field,
            curve,
            radix,
        })
    }

    pub fn p(&self) -> u64 {
        self.field.modulus()
    }

    fn curve(&self) -> Result<&CurveContext, SchemeError> {
        self.curve.as_ref().ok_or(SchemeError::MissingCurve(self.scheme))
    }

    fn radix(&self) -> Result<&RadixContext, SchemeError> {
        self.radix
            .as_ref()
            .ok_or_else(|| SchemeError::Inconsistent("shift-masked scheme without radix".into()))
    }
}

/// A class's private scheme secret.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassSecret {
    /// `n_i ∈ [1, q)` for the curve schemes.
    Curve(u64),
    /// `s_i` for the Wu-style schemes.
    Exponent(u64),
    /// Akl-Taylor keys come from the CA's root key.
    Assigned,
}

/// What a class holds: its id, its own key and its scheme secret.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewerCredentials {
    pub id: ClassId,
    pub key: u64,
    pub secret: ClassSecret,
}

/// Output of [`derive_key`]. `authorized` is false when the public hierarchy
/// does not place the viewer above the target, in which case `key` is
/// whatever the filter evaluates to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Derivation {
    pub key: u64,
    pub authorized: bool,
}

/// A published filter with its public side data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecureFilter {
    pub owner: ClassId,
    pub scheme: Scheme,
    pub poly: Poly,
    pub shift: Option<u32>,
    pub salt: Option<u64>,
}

// ---------------------------------------------------------------------------
// Akl-Taylor
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AklAssignment {
    pub modulus: u64,
    pub root_key: u64,
    pub primes: BTreeMap<ClassId, u64>,
    pub exponents: BTreeMap<ClassId, BigUint>,
}

impl AklAssignment {
    pub fn key(&self, id: &ClassId) -> Result<u64, SchemeError> {
        let t = self
            .exponents
            .get(id)
            .ok_or_else(|| SchemeError::UnknownClass(id.clone()))?;
        Ok(big_pow_mod(self.root_key, t, self.modulus))
    }
}

fn big_pow_mod(base: u64, exp: &BigUint, m: u64) -> u64 {
    let r = BigUint::from(base).modpow(exp, &BigUint::from(m));
    r.iter_u64_digits().next().unwrap_or(0)
}

/// Gives each class a distinct prime (in topological order: 2, 3, 5, ...)
/// and `t_i` = product of the primes of `u_i` and everything above it, so
/// `t_i | t_j` iff `u_j ≤ u_i`.
pub fn akl_setup(h: &Hierarchy, root_key: u64, p: u64) -> Result<AklAssignment, SchemeError> {
    PrimeField::new(p)?;
    if root_key < 2 || root_key >= p {
        return Err(SchemeError::Inconsistent(format!(
            "root key {root_key} outside [2, {}]",
            p - 1
        )));
    }
    let mut primes = BTreeMap::new();
    let mut candidate = 2u64;
    for id in h.topological_order() {
        while !is_prime(candidate) {
            candidate += 1;
        }
        primes.insert(id, candidate);
        candidate += 1;
    }
    let mut exponents = BTreeMap::new();
    for id in h.classes() {
        let mut t = BigUint::from(primes[id]);
        for up in h.strict_predecessors(id)? {
            t *= primes[&up];
        }
        exponents.insert(id.clone(), t);
    }
    Ok(AklAssignment {
        modulus: p,
        root_key,
        primes,
        exponents,
    })
}

/// `K_j = K_i^{t_j / t_i} mod p`.
pub fn akl_derive(
    assignment: &AklAssignment,
    viewer: &ClassId,
    target: &ClassId,
) -> Result<u64, SchemeError> {
    let key = assignment.key(viewer)?;
    exponent_derive(&assignment.exponents, assignment.modulus, viewer, key, target)
}

fn exponent_derive(
    exponents: &BTreeMap<ClassId, BigUint>,
    p: u64,
    viewer: &ClassId,
    viewer_key: u64,
    target: &ClassId,
) -> Result<u64, SchemeError> {
    let tv = exponents
        .get(viewer)
        .ok_or_else(|| SchemeError::UnknownClass(viewer.clone()))?;
    let tt = exponents
        .get(target)
        .ok_or_else(|| SchemeError::UnknownClass(target.clone()))?;
    if (tt % tv) != BigUint::from(0u8) {
        return Err(SchemeError::NotPredecessor {
            viewer: viewer.clone(),
            target: target.clone(),
        });
    }
    Ok(big_pow_mod(viewer_key, &(tt / tv), p))
}

// ---------------------------------------------------------------------------
// Filter roots and construction
// ---------------------------------------------------------------------------

/// Lin-Hsu root hardening: SHA-256 of `"r:v"` (decimal), first 16 bytes
/// big-endian, reduced mod p.
pub fn salted_root(salt: u64, v: Fp) -> Fp {
    let digest = Sha256::digest(format!("{salt}:{}", v.value()).as_bytes());
    let mut head = [0u8; 16];
    head.copy_from_slice(&digest[..16]);
    let reduced = u128::from_be_bytes(head) % v.modulus() as u128;
    Fp::new(reduced as u64, v.modulus())
}

/// The filter root a holder of `secret` computes for `target`.
pub fn root_for(
    board: &PublicBoard,
    target: &ClassId,
    secret: &ClassSecret,
) -> Result<Fp, SchemeError> {
    let params = &board.params;
    let public = board.class(target)?;
    match (params.scheme, secret) {
        (Scheme::Wu | Scheme::Method2, ClassSecret::Exponent(s)) => {
            let g = public
                .base
                .ok_or_else(|| SchemeError::Inconsistent(format!("{target} has no base")))?;
            Ok(params.field.elem(pow_mod(g, *s, params.p())))
        }
        (Scheme::JengWang | Scheme::Method1 | Scheme::LinHsu, ClassSecret::Curve(n)) => {
            let curve = params.curve()?;
            let pk = public
                .public_key
                .ok_or_else(|| SchemeError::Inconsistent(format!("{target} has no public key")))?;
            let v = curve.point_to_scalar(&curve.mul(*n, &pk)?)?;
            if params.scheme == Scheme::LinHsu {
                let salt = board
                    .salt
                    .ok_or_else(|| SchemeError::Inconsistent("Lin-Hsu board without salt".into()))?;
                Ok(salted_root(salt, v))
            } else {
                Ok(v)
            }
        }
        (scheme, _) => Err(SchemeError::Inconsistent(format!(
            "secret kind does not fit scheme {scheme}"
        ))),
    }
}

fn class_secrets<'a>(secrets: &'a CaSecrets, id: &ClassId) -> Result<&'a ClassSecrets, SchemeError> {
    secrets
        .classes
        .get(id)
        .ok_or_else(|| SchemeError::UnknownClass(id.clone()))
}

/// Roots contributed by the strict predecessors of `target`, keyed by
/// predecessor, checked pairwise distinct.
pub(crate) fn predecessor_roots(
    board: &PublicBoard,
    secrets: &CaSecrets,
    target: &ClassId,
) -> Result<BTreeMap<ClassId, Fp>, SchemeError> {
    let mut seen = BTreeSet::new();
    let mut out = BTreeMap::new();
    for pred in board.hierarchy.strict_predecessors(target)? {
        let root = root_for(board, target, &class_secrets(secrets, &pred)?.secret)?;
        if !seen.insert(root.value()) {
            return Err(SchemeError::RootCollision {
                class: target.clone(),
                value: root.value(),
            });
        }
        out.insert(pred, root);
    }
    Ok(out)
}

/// The mask added to the root product: `K_i`, or `L_{l_i}(K_i)`.
pub(crate) fn mask_for(
    params: &SchemeParams,
    id: &ClassId,
    key: u64,
    shift: Option<u32>,
) -> Result<Fp, SchemeError> {
    if !params.scheme.is_shift_masked() {
        return Ok(params.field.elem(key));
    }
    let radix = params.radix()?;
    if !radix.shiftable(key) {
        return Err(SchemeError::NotShiftable {
            class: id.clone(),
            key,
        });
    }
    let l = shift.ok_or_else(|| SchemeError::Inconsistent(format!("{id} has no shift index")))?;
    Ok(params.field.elem(radix.cyclic_shift(key, l as i64)?))
}

/// Builds the filter of `target` from scratch with the current secrets.
pub fn build_filter(
    board: &PublicBoard,
    secrets: &CaSecrets,
    target: &ClassId,
) -> Result<SecureFilter, SchemeError> {
    let params = &board.params;
    let public = board.class(target)?;
    let own = class_secrets(secrets, target)?;
    let mut roots: Vec<Fp> = predecessor_roots(board, secrets, target)?
        .into_values()
        .collect();
    let poly = if roots.is_empty() {
        Poly::zero(params.p())
    } else {
        if params.scheme.is_shift_masked() {
            let h = own
                .filter_secret
                .ok_or_else(|| SchemeError::Inconsistent(format!("{target} has no h")))?;
            if roots.iter().any(|r| r.value() == h) {
                return Err(SchemeError::RootCollision {
                    class: target.clone(),
                    value: h,
                });
            }
            roots.insert(0, params.field.elem(h));
        }
        let mask = mask_for(params, target, own.key, public.shift)?;
        Poly::from_roots(&roots, mask)?
    };
    Ok(SecureFilter {
        owner: target.clone(),
        scheme: params.scheme,
        poly,
        shift: public.shift,
        salt: board.salt,
    })
}

/// Key derivation from public data plus the viewer's own credentials.
pub fn derive_key(
    board: &PublicBoard,
    viewer: &ViewerCredentials,
    target: &ClassId,
) -> Result<Derivation, SchemeError> {
    let public = board.class(target)?;
    if &viewer.id == target {
        return Ok(Derivation {
            key: viewer.key,
            authorized: true,
        });
    }
    let authorized = board
        .hierarchy
        .strict_predecessors(target)?
        .contains(&viewer.id);
    let params = &board.params;
    if params.scheme == Scheme::AklTaylor {
        let exponents = board.akl_exponents();
        let key = exponent_derive(&exponents, params.p(), &viewer.id, viewer.key, target)?;
        return Ok(Derivation { key, authorized });
    }
    let filter = public
        .filter
        .as_ref()
        .ok_or_else(|| SchemeError::Inconsistent(format!("{target} has no filter")))?;
    let root = root_for(board, target, &viewer.secret)?;
    let value = filter.eval(root)?.value();
    let key = if params.scheme.is_shift_masked() {
        let l = public
            .shift
            .ok_or_else(|| SchemeError::Inconsistent(format!("{target} has no shift index")))?;
        params.radix()?.cyclic_shift(value, -(l as i64))?
    } else {
        value
    };
    Ok(Derivation { key, authorized })
}

// ---------------------------------------------------------------------------
// The CA
// ---------------------------------------------------------------------------

/// The central authority: public board plus secret store.
///
/// The CA is itself a super class: it knows every key directly.
#[derive(Debug, Clone, PartialEq)]
pub struct Authority {
    pub(crate) board: PublicBoard,
    pub(crate) secrets: CaSecrets,
}

impl Authority {
    /// A CA with no classes at epoch 0.
    pub fn new(params: SchemeParams, seed: u64) -> Result<Self, SchemeError> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let p = params.p();
        let mut ca_secret = None;
        let mut ca_public = None;
        if let Some(curve) = &params.curve {
            let n = rng.gen_range(1..curve.order());
            ca_secret = Some(n);
            ca_public = Some(curve.mul_generator(n));
        }
        let akl_root = (params.scheme == Scheme::AklTaylor).then(|| rng.gen_range(2..p));
        let salt = (params.scheme == Scheme::LinHsu).then(|| rng.gen::<u64>());
        Ok(Self {
            board: PublicBoard {
                epoch: 0,
                params,
                hierarchy: Hierarchy::new(),
                ca_public,
                salt,
                classes: BTreeMap::new(),
            },
            secrets: CaSecrets {
                ca_secret,
                akl_root,
                classes: BTreeMap::new(),
                rng,
            },
        })
    }

    /// Enrolls every class of `hierarchy` in one epoch. `keys` may fix the
    /// keys of some classes; the rest are drawn at random.
    pub fn bootstrap(
        params: SchemeParams,
        hierarchy: &Hierarchy,
        keys: &BTreeMap<ClassId, u64>,
        seed: u64,
    ) -> Result<Self, SchemeError> {
        let mut ca = Self::new(params, seed)?;
        for id in hierarchy.topological_order() {
            let above: Vec<ClassId> = hierarchy
                .edges()
                .filter(|(_, lo)| *lo == id)
                .map(|(hi, _)| hi.clone())
                .collect();
            ca.enroll_leaf(&id, &above, keys.get(&id).copied())?;
        }
        ca.board.epoch = 1;
        Ok(ca)
    }

    /// Rebuilds a CA from its persisted halves, checking that they agree.
    pub fn from_parts(board: PublicBoard, secrets: CaSecrets) -> Result<Self, SchemeError> {
        let public_ids: BTreeSet<_> = board.classes.keys().collect();
        let secret_ids: BTreeSet<_> = secrets.classes.keys().collect();
        let hier_ids: BTreeSet<_> = board.hierarchy.classes().collect();
        if public_ids != secret_ids || public_ids != hier_ids {
            return Err(SchemeError::Inconsistent(
                "board, hierarchy and secret store list different classes".into(),
            ));
        }
        if board.params.curve.is_some() && secrets.ca_secret.is_none() {
            return Err(SchemeError::Inconsistent("missing CA curve secret".into()));
        }
        Ok(Self { board, secrets })
    }

    pub fn into_parts(self) -> (PublicBoard, CaSecrets) {
        (self.board, self.secrets)
    }

    pub fn board(&self) -> &PublicBoard {
        &self.board
    }

    pub fn secrets(&self) -> &CaSecrets {
        &self.secrets
    }

    pub fn params(&self) -> &SchemeParams {
        &self.board.params
    }

    pub fn scheme(&self) -> Scheme {
        self.board.params.scheme
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.board.hierarchy
    }

    pub fn epoch(&self) -> u64 {
        self.board.epoch
    }

    /// The CA reads any key straight from its store.
    pub fn key_of(&self, id: &ClassId) -> Result<u64, SchemeError> {
        Ok(class_secrets(&self.secrets, id)?.key)
    }

    /// The credentials the CA handed to class `id` at enrollment.
    pub fn credentials(&self, id: &ClassId) -> Result<ViewerCredentials, SchemeError> {
        let s = class_secrets(&self.secrets, id)?;
        Ok(ViewerCredentials {
            id: id.clone(),
            key: s.key,
            secret: s.secret,
        })
    }

    pub fn filter(&self, id: &ClassId) -> Result<SecureFilter, SchemeError> {
        self.board.secure_filter(id)
    }

    /// Derivation by class `viewer` using only its credentials and the board.
    pub fn derive(&self, viewer: &ClassId, target: &ClassId) -> Result<Derivation, SchemeError> {
        derive_key(&self.board, &self.credentials(viewer)?, target)
    }

    pub(crate) fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.secrets.rng
    }

    /// A random key valid for the scheme.
    pub(crate) fn sample_key(&mut self) -> u64 {
        let p = self.board.params.p();
        let radix = self.board.params.radix;
        loop {
            let k = self.rng().gen_range(1..p);
            match &radix {
                Some(r) if !remaskable(r, k) => continue,
                _ => return k,
            }
        }
    }

    pub(crate) fn validate_key(&self, id: &ClassId, key: u64) -> Result<(), SchemeError> {
        let params = &self.board.params;
        if key == 0 || key >= params.p() {
            return Err(SchemeError::KeyOutOfRange {
                class: id.clone(),
                key,
            });
        }
        if let Some(r) = &params.radix {
            if !remaskable(r, key) {
                return Err(SchemeError::NotShiftable {
                    class: id.clone(),
                    key,
                });
            }
        }
        Ok(())
    }

    /// Key generation for one class: secret, public value and, on the curve
    /// schemes, the round trip of `(K, n)` to the CA through transport
    /// encryption.
    pub(crate) fn generate_class(
        &mut self,
        key: u64,
    ) -> Result<(ClassSecret, PublicClass), SchemeError> {
        let p = self.board.params.p();
        match self.board.params.scheme {
            Scheme::AklTaylor => Ok((ClassSecret::Assigned, PublicClass::default())),
            Scheme::Wu | Scheme::Method2 => {
                let taken: BTreeSet<u64> = self
                    .secrets
                    .classes
                    .values()
                    .filter_map(|c| match c.secret {
                        ClassSecret::Exponent(s) => Some(s),
                        _ => None,
                    })
                    .collect();
                let s = loop {
                    let s = self.rng().gen_range(1..p - 1);
                    if !taken.contains(&s) {
                        break s;
                    }
                };
                let g = self.rng().gen_range(2..p);
                Ok((
                    ClassSecret::Exponent(s),
                    PublicClass {
                        base: Some(g),
                        ..PublicClass::default()
                    },
                ))
            }
            Scheme::JengWang | Scheme::LinHsu | Scheme::Method1 => {
                let curve = self.board.params.curve()?.clone();
                let ca_public = self
                    .board
                    .ca_public
                    .ok_or_else(|| SchemeError::Inconsistent("no CA public key".into()))?;
                let ca_secret = self
                    .secrets
                    .ca_secret
                    .ok_or_else(|| SchemeError::Inconsistent("no CA secret".into()))?;
                // n and q − n give points with the same x-coordinate, so
                // both are kept out to leave every root distinct.
                let q = curve.order();
                let taken: BTreeSet<u64> = self
                    .secrets
                    .classes
                    .values()
                    .filter_map(|c| match c.secret {
                        ClassSecret::Curve(n) => Some(n.min(q - n)),
                        _ => None,
                    })
                    .collect();
                if taken.len() as u64 >= (q - 1) / 2 {
                    return Err(SchemeError::Inconsistent("curve secrets exhausted".into()));
                }
                let n = loop {
                    let n = self.rng().gen_range(1..q);
                    if !taken.contains(&n.min(q - n)) {
                        break n;
                    }
                };
                let ct = loop {
                    let k = self.rng().gen_range(1..curve.order());
                    match curve.transport_encrypt(key, n, &ca_public, k) {
                        Err(CurveError::DegenerateEphemeral) => continue,
                        other => break other?,
                    }
                };
                let (got_key, got_n) = curve.transport_decrypt(&ct, ca_secret)?;
                if (got_key, got_n) != (key, n) {
                    return Err(SchemeError::Inconsistent(
                        "transport round trip altered the enrollment".into(),
                    ));
                }
                Ok((
                    ClassSecret::Curve(got_n),
                    PublicClass {
                        public_key: Some(curve.mul_generator(got_n)),
                        ..PublicClass::default()
                    },
                ))
            }
        }
    }

    /// Fresh `h` outside `roots` and different from `avoid`.
    pub(crate) fn fresh_filter_secret(
        &mut self,
        class: &ClassId,
        roots: &[Fp],
        avoid: Option<u64>,
    ) -> Result<u64, SchemeError> {
        let p = self.board.params.p();
        for _ in 0..RESAMPLE_LIMIT {
            let h = self.rng().gen_range(0..p);
            if Some(h) != avoid && roots.iter().all(|r| r.value() != h) {
                return Ok(h);
            }
        }
        Err(SchemeError::RootCollision {
            class: class.clone(),
            value: avoid.unwrap_or(0),
        })
    }

    /// Fresh shift index in `[1, m − 1]` whose mask differs from the key and
    /// from `avoid_mask`.
    pub(crate) fn fresh_shift(
        &mut self,
        class: &ClassId,
        key: u64,
        avoid_mask: Option<u64>,
    ) -> Result<u32, SchemeError> {
        let radix = *self.board.params.radix()?;
        let candidates: Vec<u32> = radix
            .nontrivial_shifts(key)
            .into_iter()
            .filter(|&l| Some(radix.cyclic_shift(key, l as i64).unwrap_or(key)) != avoid_mask)
            .collect();
        if candidates.is_empty() {
            return Err(SchemeError::NoFreshShift(class.clone()));
        }
        let pick = self.rng().gen_range(0..candidates.len());
        Ok(candidates[pick])
    }

    /// Recomputes the Akl-Taylor exponents and keys for the current hierarchy.
    pub(crate) fn reassign_akl(&mut self) -> Result<(), SchemeError> {
        let root = self
            .secrets
            .akl_root
            .ok_or_else(|| SchemeError::Inconsistent("no Akl-Taylor root key".into()))?;
        let assignment = akl_setup(&self.board.hierarchy, root, self.board.params.p())?;
        for (id, t) in &assignment.exponents {
            self.board
                .classes
                .entry(id.clone())
                .or_default()
                .exponent = Some(t.clone());
            let key = assignment.key(id)?;
            self.secrets
                .classes
                .entry(id.clone())
                .or_insert_with(|| ClassSecrets {
                    key,
                    secret: ClassSecret::Assigned,
                    filter_secret: None,
                })
                .key = key;
        }
        Ok(())
    }

    /// The Akl-Taylor assignment currently in force.
    pub fn akl_assignment(&self) -> Option<AklAssignment> {
        let root_key = self.secrets.akl_root?;
        let p = self.board.params.p();
        akl_setup(&self.board.hierarchy, root_key, p).ok()
    }
}

/// Shiftable, and at least two distinct non-identity masks exist, so the
/// CA can always pick a new mask on update.
pub fn remaskable(radix: &RadixContext, key: u64) -> bool {
    if key == 0 || !radix.shiftable(key) {
        return false;
    }
    let masks: BTreeSet<u64> = radix
        .nontrivial_shifts(key)
        .into_iter()
        .filter_map(|l| radix.cyclic_shift(key, l as i64).ok())
        .collect();
    masks.len() >= 2
}
