mod common;

use common::*;
use hierkey::{
    derive_key, Authority, ClassSecret, Fp, Poly, RadixContext, Scheme, SchemeError, SchemeParams,
    ViewerCredentials,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;

#[test]
fn fig1_degrees_per_scheme() {
    for scheme in Scheme::ALL {
        let ca = bootstrap(scheme, 10007, &fig1(), 11);
        let degrees: Vec<usize> = ca.board().filter_degrees().into_values().collect();
        match scheme {
            Scheme::AklTaylor => assert!(degrees.is_empty()),
            Scheme::Method1 | Scheme::Method2 => assert_eq!(degrees, vec![0, 2, 2, 3, 4]),
            _ => assert_eq!(degrees, vec![0, 1, 1, 2, 3]),
        }
        assert!(ca.board().classes[&id("u1")]
            .filter
            .as_ref()
            .is_none_or(|f| f.is_zero()));
        assert_all_derivations(&ca);
    }
}

#[test]
fn random_dags_derive_for_every_scheme() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for scheme in Scheme::ALL {
        for trial in 0..8 {
            let h = random_dag(&mut rng, 8, 0.35);
            let ca = bootstrap(scheme, 99991, &h, trial);
            assert_all_derivations(&ca);
        }
    }
}

#[test]
fn non_predecessor_is_flagged_and_wrong() {
    for scheme in Scheme::ALL {
        let ca = bootstrap(scheme, 999983, &fig1(), 4);
        // u4 is incomparable to u3 and below u2
        match ca.derive(&id("u3"), &id("u4")) {
            Ok(d) => {
                assert!(!d.authorized);
                assert_ne!(d.key, ca.key_of(&id("u4")).unwrap());
            }
            Err(SchemeError::NotPredecessor { .. }) => assert_eq!(scheme, Scheme::AklTaylor),
            Err(e) => panic!("{scheme}: {e}"),
        }
        let own = ca.derive(&id("u4"), &id("u4")).unwrap();
        assert_eq!(own.key, ca.key_of(&id("u4")).unwrap());
    }
}

#[test]
fn fixed_keys_are_used_and_checked() {
    let keys = BTreeMap::from([(id("u5"), 21349)]);
    let ca = Authority::bootstrap(params(Scheme::Method1, 99991), &fig1(), &keys, 1).unwrap();
    assert_eq!(ca.key_of(&id("u5")).unwrap(), 21349);
    assert_eq!(ca.derive(&id("u1"), &id("u5")).unwrap().key, 21349);

    let bad = BTreeMap::from([(id("u5"), 1212)]);
    assert!(matches!(
        Authority::bootstrap(params(Scheme::Method1, 99991), &fig1(), &bad, 1),
        Err(SchemeError::NotShiftable { key: 1212, .. })
    ));
    let out = BTreeMap::from([(id("u5"), 99991)]);
    assert!(matches!(
        Authority::bootstrap(params(Scheme::Wu, 99991), &fig1(), &out, 1),
        Err(SchemeError::KeyOutOfRange { .. })
    ));
}

#[test]
fn shift_masked_construction_identity() {
    // (x − 2)(x − 3)(x − 5) + L_l(K) over p = 23 in binary
    let p = 23;
    let radix = RadixContext::new(2, p).unwrap();
    let key = 0b00110;
    assert!(radix.shiftable(key));
    let mask = radix.cyclic_shift(key, 1).unwrap();
    let f = Poly::from_roots(&[2, 3, 5].map(|v| Fp::new(v, p)), Fp::new(mask, p)).unwrap();
    let constant = (p as i64 * 4 - 2 * 3 * 5 + mask as i64) as u64 % p;
    assert_eq!(f.coeff(0).value(), constant);
    for r in [2, 3, 5] {
        let v = f.eval(Fp::new(r, p)).unwrap().value();
        assert_eq!(radix.cyclic_shift(v, -1).unwrap(), key);
    }
}

#[test]
fn mask_recoverable_at_every_root() {
    let ca = bootstrap(Scheme::Method2, 99991, &fig1(), 8);
    let radix = ca.params().radix.unwrap();
    for (cid, class) in &ca.board().classes {
        let f = class.filter.as_ref().unwrap();
        if f.is_zero() {
            continue;
        }
        let h = ca.secrets().classes[cid].filter_secret.unwrap();
        let v = f.eval(Fp::new(h, 99991)).unwrap().value();
        let l = class.shift.unwrap() as i64;
        assert_eq!(radix.cyclic_shift(v, -l).unwrap(), ca.key_of(cid).unwrap());
    }
}

#[test]
fn derivation_uses_only_public_data_and_credentials() {
    let ca = bootstrap(Scheme::JengWang, 10007, &fig1(), 2);
    let board = ca.board().clone();
    let creds = ca.credentials(&id("u2")).unwrap();
    assert!(matches!(creds.secret, ClassSecret::Curve(_)));
    let d = derive_key(&board, &creds, &id("u5")).unwrap();
    assert_eq!(d.key, ca.key_of(&id("u5")).unwrap());
    let forged = ViewerCredentials {
        secret: ClassSecret::Curve(1),
        ..creds
    };
    assert_ne!(
        derive_key(&board, &forged, &id("u5")).unwrap().key,
        ca.key_of(&id("u5")).unwrap()
    );
}

#[test]
fn curve_schemes_require_matching_curve() {
    assert!(matches!(
        SchemeParams::new(Scheme::Method1, 10007, Some(desk_curve(99991)), 10),
        Err(SchemeError::CurveModulusMismatch { .. })
    ));
}
