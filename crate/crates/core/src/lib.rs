//! Secure-filter key assignment for hierarchical access control.
//!
//! A central authority (CA) assigns every security class in a partially
//! ordered hierarchy an encryption key and publishes, per class, a polynomial
//! over `Z_p` (a *secure filter*) that evaluates to the class key, possibly
//! masked by a cyclic digit shift, exactly at values that only the strict
//! predecessors of that class can compute.
//!
//! The crate contains:
//!
//! * [`modmath`]: `Z_p` arithmetic and the linear-factor polynomial algebra.
//! * [`radixshift`]: the cyclic l-shift key mask and its invertibility test.
//! * [`curve`]: a desk-scale short-Weierstrass group and CA key transport.
//! * [`hierarchy`]: the DAG of security classes.
//! * [`schemes`]: Akl-Taylor, Wu, Jeng-Wang, Lin-Hsu and the two shift-masked
//!   revisions behind one CA type, [`Authority`].
//! * [`dynamics`]: incremental filter updates on insertion and removal, and
//!   the from-scratch rebuild used to check them.
//! * [`attacks`]: the root-recovery and coefficient-subtraction adversaries.
//! * [`board`]: the public board, the CA secret store, and their JSON files.

pub mod attacks;
pub mod board;
pub mod curve;
pub mod dynamics;
pub mod hierarchy;
pub mod modmath;
pub mod radixshift;
pub mod schemes;

pub use attacks::{
    attack_boards, linhsu_attack, tripathy_paul_attack, AttackError, AttackKind, AttackReport,
    MaskExtractor,
};
pub use board::{
    diff_epochs, BoardDiff, BoardError, BoardStore, CaSecrets, ClassSecrets, FilterChange,
    PublicBoard, PublicClass,
};
pub use curve::{CurveContext, CurveError, Point, PointMap, TransportCiphertext};
pub use dynamics::{
    extend_filter, rebuild_oracle, shrink_filter, DynamicsError, FilterUpdatePlan, RootStep,
    UpdateReport,
};
pub use hierarchy::{ClassId, Hierarchy, HierarchyError};
pub use modmath::{find_roots, mod_inv, Fp, MathError, Poly, PrimeField, Roots};
pub use radixshift::{RadixContext, ShiftError};
pub use schemes::{
    akl_derive, akl_setup, derive_key, AklAssignment, Authority, ClassSecret, Derivation, Scheme,
    SchemeError, SchemeParams, SecureFilter, ViewerCredentials,
};
