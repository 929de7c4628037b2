//! Inserting and removing classes without rebuilding unaffected filters.
//!
//! A published filter is `f = B + M` with `B` a product of linear factors
//! and `M` the mask. Any change of root set is a chain of exact divisions
//! and multiplications of `B = f − M` by linear factors, followed by adding
//! the new mask:
//!
//! ```text
//! g = (x − r)·[(x − h̃)·((f − M)/(x − h))] + M̃       (one root added)
//! g = (x − h̃)·[((f − M)/(x − a))/(x − h)] + M̃       (one root removed)
//! ```
//!
//! [`FilterUpdatePlan`] records such a chain. [`rebuild_oracle`] recomputes
//! every filter from the secret store and is the reference the incremental
//! path is tested against.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use thiserror::Error;

use crate::board::{ClassSecrets, PublicBoard};
use crate::hierarchy::ClassId;
use crate::modmath::{Fp, MathError, Poly};
use crate::schemes::{
    build_filter, mask_for, predecessor_roots, root_for, Authority, Scheme, SchemeError,
    RESAMPLE_LIMIT,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DynamicsError {
    #[error("{0} is not a root of the unmasked filter")]
    NotARoot(u64),
    #[error("{0} is already a root of the unmasked filter")]
    RootCollision(u64),
    #[error("update produced a non-monic filter")]
    NotMonic,
    #[error(transparent)]
    Math(#[from] MathError),
}

/// One linear-factor pass over the unmasked filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootStep {
    DivideOut(Fp),
    MultiplyIn(Fp),
}

/// The full incremental update of one filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterUpdatePlan {
    pub target: ClassId,
    pub old_mask: Fp,
    pub new_mask: Fp,
    pub steps: Vec<RootStep>,
    /// Public shift index after the update, on Methods 1 and 2.
    pub new_shift: Option<u32>,
}

impl FilterUpdatePlan {
    /// Strips the old mask, runs the steps in order, adds the new mask.
    pub fn apply(&self, f: &Poly) -> Result<Poly, DynamicsError> {
        let mut body = f.sub_constant(self.old_mask);
        for step in &self.steps {
            body = match *step {
                RootStep::DivideOut(r) => {
                    let (q, rem) = body.div_linear(r)?;
                    if !rem.is_zero() {
                        return Err(DynamicsError::NotARoot(r.value()));
                    }
                    q
                }
                RootStep::MultiplyIn(r) => {
                    if body.eval(r)?.is_zero() {
                        return Err(DynamicsError::RootCollision(r.value()));
                    }
                    body.mul_linear(r)
                }
            };
        }
        let g = body.add_constant(self.new_mask);
        if !g.is_monic() {
            return Err(DynamicsError::NotMonic);
        }
        Ok(g)
    }
}

/// Adds `new_root` to a shift-masked filter while replacing `h` and the mask.
pub fn extend_filter(
    f: &Poly,
    old_h: Fp,
    new_h: Fp,
    new_root: Fp,
    old_mask: Fp,
    new_mask: Fp,
) -> Result<Poly, DynamicsError> {
    plan(old_mask, new_mask, vec![
        RootStep::DivideOut(old_h),
        RootStep::MultiplyIn(new_h),
        RootStep::MultiplyIn(new_root),
    ])
    .apply(f)
}

/// Removes `removed_root` from a shift-masked filter while replacing `h`
/// and the mask.
pub fn shrink_filter(
    f: &Poly,
    old_h: Fp,
    new_h: Fp,
    removed_root: Fp,
    old_mask: Fp,
    new_mask: Fp,
) -> Result<Poly, DynamicsError> {
    plan(old_mask, new_mask, vec![
        RootStep::DivideOut(removed_root),
        RootStep::DivideOut(old_h),
        RootStep::MultiplyIn(new_h),
    ])
    .apply(f)
}

fn plan(old_mask: Fp, new_mask: Fp, steps: Vec<RootStep>) -> FilterUpdatePlan {
    FilterUpdatePlan {
        target: ClassId::from(""),
        old_mask,
        new_mask,
        steps,
        new_shift: None,
    }
}

/// What one mutation did to the board.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UpdateReport {
    pub epoch: u64,
    pub inserted: Option<ClassId>,
    pub removed: Option<ClassId>,
    /// Pre-existing classes whose filter was updated in place.
    pub updated: BTreeSet<ClassId>,
    /// True when every filter (or every Akl-Taylor key) was regenerated.
    pub rebuilt_all: bool,
}

/// Every filter of the current state, regenerated from the secret store.
pub fn rebuild_oracle(ca: &Authority) -> Result<BTreeMap<ClassId, Poly>, SchemeError> {
    let board = ca.board();
    if !board.params.scheme.has_filters() {
        return Ok(BTreeMap::new());
    }
    board
        .classes
        .keys()
        .map(|id| Ok((id.clone(), build_filter(board, ca.secrets(), id)?.poly)))
        .collect()
}

fn is_collision(e: &SchemeError) -> bool {
    matches!(
        e,
        SchemeError::RootCollision { .. }
            | SchemeError::Dynamics(DynamicsError::RootCollision(_))
            | SchemeError::Math(MathError::DuplicateRoot(_))
    )
}

impl Authority {
    /// Inserts `id` below every class in `above` and above every class in
    /// `below`, then publishes a new epoch. `key` fixes the new class key.
    pub fn insert_class(
        &mut self,
        id: &ClassId,
        above: &[ClassId],
        below: &[ClassId],
        key: Option<u64>,
    ) -> Result<UpdateReport, SchemeError> {
        let mut report = self.insert_with_retries(id, above, below, key)?;
        self.board.epoch += 1;
        report.epoch = self.board.epoch;
        Ok(report)
    }

    /// Removes `id` and publishes a new epoch. Former neighbours are not
    /// reconnected.
    pub fn remove_class(&mut self, id: &ClassId) -> Result<UpdateReport, SchemeError> {
        let mut next = self.clone();
        let mut report = next.try_remove(id)?;
        next.board.epoch += 1;
        report.epoch = next.board.epoch;
        *self = next;
        Ok(report)
    }

    /// Insertion without an epoch bump, used while bootstrapping.
    pub(crate) fn enroll_leaf(
        &mut self,
        id: &ClassId,
        above: &[ClassId],
        key: Option<u64>,
    ) -> Result<UpdateReport, SchemeError> {
        self.insert_with_retries(id, above, &[], key)
    }

    /// Root collisions are cured by drawing the new class's secrets again.
    fn insert_with_retries(
        &mut self,
        id: &ClassId,
        above: &[ClassId],
        below: &[ClassId],
        key: Option<u64>,
    ) -> Result<UpdateReport, SchemeError> {
        if key.is_some() && self.scheme() == Scheme::AklTaylor {
            return Err(SchemeError::KeysAreAssigned(Scheme::AklTaylor));
        }
        if let Some(k) = key {
            self.validate_key(id, k)?;
        }
        let mut rng = self.secrets.rng.clone();
        let mut last = None;
        for _ in 0..RESAMPLE_LIMIT {
            let mut next = self.clone();
            next.secrets.rng = rng;
            match next.try_insert(id, above, below, key) {
                Ok(report) => {
                    *self = next;
                    return Ok(report);
                }
                Err(e) if is_collision(&e) => {
                    rng = next.secrets.rng.clone();
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn try_insert(
        &mut self,
        id: &ClassId,
        above: &[ClassId],
        below: &[ClassId],
        key: Option<u64>,
    ) -> Result<UpdateReport, SchemeError> {
        let old = self.board.clone();
        let hierarchy = old.hierarchy.add_class(id, above, below)?;
        let mut report = UpdateReport {
            inserted: Some(id.clone()),
            ..UpdateReport::default()
        };
        self.board.hierarchy = hierarchy;

        if self.scheme() == Scheme::AklTaylor {
            self.board.classes.insert(id.clone(), Default::default());
            self.reassign_akl()?;
            report.rebuilt_all = true;
            return Ok(report);
        }

        let key = match key {
            Some(k) => k,
            None => self.sample_key(),
        };
        let (secret, public) = self.generate_class(key)?;
        self.board.classes.insert(id.clone(), public);
        self.secrets.classes.insert(
            id.clone(),
            ClassSecrets {
                key,
                secret,
                filter_secret: None,
            },
        );

        if self.scheme() == Scheme::LinHsu {
            self.rebuild_with_fresh_salt()?;
            report.updated = old.classes.keys().cloned().collect();
            report.rebuilt_all = true;
            return Ok(report);
        }

        if self.scheme().is_shift_masked() {
            let roots: Vec<Fp> = predecessor_roots(&self.board, &self.secrets, id)?
                .into_values()
                .collect();
            let h = self.fresh_filter_secret(id, &roots, None)?;
            let l = self.fresh_shift(id, key, None)?;
            self.secrets.classes.get_mut(id).expect("just inserted").filter_secret = Some(h);
            self.board.classes.get_mut(id).expect("just inserted").shift = Some(l);
        }
        let own = build_filter(&self.board, &self.secrets, id)?.poly;
        self.board.classes.get_mut(id).expect("just inserted").filter = Some(own);

        for s in self.board.hierarchy.strict_successors(id)? {
            let before = old.hierarchy.strict_predecessors(&s)?;
            let mut added = Vec::new();
            for pred in self.board.hierarchy.strict_predecessors(&s)? {
                if !before.contains(&pred) {
                    let secret = self.secrets.classes[&pred].secret;
                    added.push(root_for(&self.board, &s, &secret)?);
                }
            }
            self.update_filter(&s, &[], &added)?;
            report.updated.insert(s);
        }
        Ok(report)
    }

    fn try_remove(&mut self, id: &ClassId) -> Result<UpdateReport, SchemeError> {
        let (hierarchy, affected) = self.board.hierarchy.remove_class(id)?;
        let mut report = UpdateReport {
            removed: Some(id.clone()),
            ..UpdateReport::default()
        };
        let mut lost = BTreeMap::new();
        if self.scheme().has_filters() && self.scheme() != Scheme::LinHsu {
            for s in &affected {
                let after = hierarchy.strict_predecessors(s)?;
                let roots: Vec<Fp> = predecessor_roots(&self.board, &self.secrets, s)?
                    .into_iter()
                    .filter(|(pred, _)| !after.contains(pred))
                    .map(|(_, r)| r)
                    .collect();
                lost.insert(s.clone(), roots);
            }
        }
        self.board.hierarchy = hierarchy;
        self.board.classes.remove(id);
        self.secrets.classes.remove(id);

        match self.scheme() {
            Scheme::AklTaylor => {
                self.reassign_akl()?;
                report.rebuilt_all = true;
            }
            Scheme::LinHsu => {
                self.rebuild_with_fresh_salt()?;
                report.updated = self.board.classes.keys().cloned().collect();
                report.rebuilt_all = true;
            }
            _ => {
                for (s, roots) in lost {
                    self.update_filter(&s, &roots, &[])?;
                    report.updated.insert(s);
                }
            }
        }
        Ok(report)
    }

    /// Moves the filter of `s` from its old root set to the current one.
    /// `lost` must be roots of the published filter and `added` must not.
    fn update_filter(&mut self, s: &ClassId, lost: &[Fp], added: &[Fp]) -> Result<(), SchemeError> {
        let params = self.board.params.clone();
        let public = self.board.class(s)?.clone();
        let own = self.secrets.classes[s].clone();
        let old_poly = public
            .filter
            .clone()
            .ok_or_else(|| SchemeError::Inconsistent(format!("{s} has no filter")))?;
        let roots: Vec<Fp> = predecessor_roots(&self.board, &self.secrets, s)?
            .into_values()
            .collect();
        let masked = params.scheme.is_shift_masked();

        if old_poly.is_zero() || roots.is_empty() {
            if masked {
                let h = self.fresh_filter_secret(s, &roots, own.filter_secret)?;
                let old_mask = public
                    .shift
                    .and_then(|l| mask_for(&params, s, own.key, Some(l)).ok())
                    .map(|m| m.value());
                let l = self.fresh_shift(s, own.key, old_mask)?;
                self.secrets.classes.get_mut(s).expect("known class").filter_secret = Some(h);
                self.board.classes.get_mut(s).expect("known class").shift = Some(l);
            }
            let rebuilt = build_filter(&self.board, &self.secrets, s)?.poly;
            self.board.classes.get_mut(s).expect("known class").filter = Some(rebuilt);
            return Ok(());
        }

        let old_mask = mask_for(&params, s, own.key, public.shift)?;
        let plan_with = |h: Option<(u64, u64)>, new_mask: Fp, new_shift: Option<u32>| {
            let mut steps: Vec<RootStep> = lost.iter().map(|&r| RootStep::DivideOut(r)).collect();
            if let Some((old_h, new_h)) = h {
                steps.push(RootStep::DivideOut(params.field.elem(old_h)));
                steps.push(RootStep::MultiplyIn(params.field.elem(new_h)));
            }
            steps.extend(added.iter().map(|&r| RootStep::MultiplyIn(r)));
            FilterUpdatePlan {
                target: s.clone(),
                old_mask,
                new_mask,
                steps,
                new_shift,
            }
        };
        if !masked {
            let updated = plan_with(None, old_mask, None).apply(&old_poly)?;
            self.board.classes.get_mut(s).expect("known class").filter = Some(updated);
            return Ok(());
        }

        let old_h = own
            .filter_secret
            .ok_or_else(|| SchemeError::Inconsistent(format!("{s} has no h")))?;
        for _ in 0..RESAMPLE_LIMIT {
            let new_h = self.fresh_filter_secret(s, &roots, Some(old_h))?;
            let l = self.fresh_shift(s, own.key, Some(old_mask.value()))?;
            let new_mask = mask_for(&params, s, own.key, Some(l))?;
            let updated = plan_with(Some((old_h, new_h)), new_mask, Some(l)).apply(&old_poly)?;
            // A root present in only one of the two filters must not evaluate
            // to the other filter's mask, or the pair's difference vanishes
            // there and the common value is a mask of K.
            let fresh = added.iter().copied().chain([params.field.elem(new_h)]);
            let dropped = lost.iter().copied().chain([params.field.elem(old_h)]);
            let mut exposed = false;
            for r in fresh {
                exposed |= old_poly.eval(r)? == new_mask;
            }
            for r in dropped {
                exposed |= updated.eval(r)? == old_mask;
            }
            if exposed {
                continue;
            }
            self.secrets.classes.get_mut(s).expect("known class").filter_secret = Some(new_h);
            let entry = self.board.classes.get_mut(s).expect("known class");
            entry.filter = Some(updated);
            entry.shift = Some(l);
            return Ok(());
        }
        Err(SchemeError::NoFreshShift(s.clone()))
    }

    /// Lin-Hsu: new salt, every filter rebuilt.
    fn rebuild_with_fresh_salt(&mut self) -> Result<(), SchemeError> {
        let mut last = None;
        for _ in 0..RESAMPLE_LIMIT {
            let salt: u64 = self.rng().gen();
            self.board.salt = Some(salt);
            match rebuild_all(&self.board, self) {
                Ok(filters) => {
                    for (id, f) in filters {
                        self.board.classes.get_mut(&id).expect("known class").filter = Some(f);
                    }
                    return Ok(());
                }
                Err(e) if is_collision(&e) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

fn rebuild_all(board: &PublicBoard, ca: &Authority) -> Result<BTreeMap<ClassId, Poly>, SchemeError> {
    board
        .classes
        .keys()
        .map(|id| Ok((id.clone(), build_filter(board, ca.secrets(), id)?.poly)))
        .collect()
}
