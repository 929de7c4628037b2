//! The poset of security classes, stored as a DAG.
//!
//! An edge `(higher, lower)` records `lower < higher`. Transitive queries are
//! recomputed on demand; hierarchies here have at most a few thousand nodes.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(String);

impl ClassId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ClassId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

impl From<String> for ClassId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HierarchyError {
    #[error("unknown class {0}")]
    UnknownClass(ClassId),
    #[error("class {0} already exists")]
    DuplicateId(ClassId),
    #[error("placing {id} below {above} and above {below} creates a cycle")]
    CycleCreated {
        id: ClassId,
        above: ClassId,
        below: ClassId,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Hierarchy {
    classes: BTreeSet<ClassId>,
    /// (higher, lower)
    edges: BTreeSet<(ClassId, ClassId)>,
}

impl Hierarchy {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a hierarchy from a class list and `(higher, lower)` edges.
    pub fn from_edges<I, E>(classes: I, edges: E) -> Result<Self, HierarchyError>
    where
        I: IntoIterator<Item = ClassId>,
        E: IntoIterator<Item = (ClassId, ClassId)>,
    {
        let mut h = Hierarchy::new();
        for c in classes {
            if !h.classes.insert(c.clone()) {
                return Err(HierarchyError::DuplicateId(c));
            }
        }
        for (hi, lo) in edges {
            h.require(&hi)?;
            h.require(&lo)?;
            if hi == lo || h.reaches(&lo, &hi) {
                return Err(HierarchyError::CycleCreated {
                    id: lo.clone(),
                    above: lo,
                    below: hi,
                });
            }
            h.edges.insert((hi, lo));
        }
        Ok(h)
    }

    fn require(&self, id: &ClassId) -> Result<(), HierarchyError> {
        if self.classes.contains(id) {
            Ok(())
        } else {
            Err(HierarchyError::UnknownClass(id.clone()))
        }
    }

    pub fn contains(&self, id: &ClassId) -> bool {
        self.classes.contains(id)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> impl Iterator<Item = &ClassId> {
        self.classes.iter()
    }

    /// `(higher, lower)` pairs.
    pub fn edges(&self) -> impl Iterator<Item = &(ClassId, ClassId)> {
        self.edges.iter()
    }

    fn parents(&self, id: &ClassId) -> impl Iterator<Item = &ClassId> {
        let id = id.clone();
        self.edges
            .iter()
            .filter(move |(_, lo)| *lo == id)
            .map(|(hi, _)| hi)
    }

    fn children(&self, id: &ClassId) -> impl Iterator<Item = &ClassId> {
        let id = id.clone();
        self.edges
            .iter()
            .filter(move |(hi, _)| *hi == id)
            .map(|(_, lo)| lo)
    }

    /// True if a downward path leads from `from` to `to` (length ≥ 1).
    fn reaches(&self, from: &ClassId, to: &ClassId) -> bool {
        self.walk(from, |h, n| h.children(n).cloned().collect()).contains(to)
    }

    fn walk<F>(&self, start: &ClassId, next: F) -> BTreeSet<ClassId>
    where
        F: Fn(&Self, &ClassId) -> Vec<ClassId>,
    {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<ClassId> = next(self, start).into();
        while let Some(n) = queue.pop_front() {
            if seen.insert(n.clone()) {
                queue.extend(next(self, &n));
            }
        }
        seen
    }

    /// `S_i`: every class strictly above `id`.
    pub fn strict_predecessors(&self, id: &ClassId) -> Result<BTreeSet<ClassId>, HierarchyError> {
        self.require(id)?;
        Ok(self.walk(id, |h, n| h.parents(n).cloned().collect()))
    }

    /// Every class strictly below `id`.
    pub fn strict_successors(&self, id: &ClassId) -> Result<BTreeSet<ClassId>, HierarchyError> {
        self.require(id)?;
        Ok(self.walk(id, |h, n| h.children(n).cloned().collect()))
    }

    /// `lower ≤ higher`.
    pub fn dominates(&self, higher: &ClassId, lower: &ClassId) -> Result<bool, HierarchyError> {
        self.require(higher)?;
        self.require(lower)?;
        Ok(higher == lower || self.reaches(higher, lower))
    }

    /// Inserts `id` with `lower < id < higher` for every listed neighbour.
    pub fn add_class(
        &self,
        id: &ClassId,
        above: &[ClassId],
        below: &[ClassId],
    ) -> Result<Hierarchy, HierarchyError> {
        if self.contains(id) {
            return Err(HierarchyError::DuplicateId(id.clone()));
        }
        for n in above.iter().chain(below) {
            self.require(n)?;
        }
        for hi in above {
            for lo in below {
                if hi == lo || self.reaches(lo, hi) {
                    return Err(HierarchyError::CycleCreated {
                        id: id.clone(),
                        above: hi.clone(),
                        below: lo.clone(),
                    });
                }
            }
        }
        let mut next = self.clone();
        next.classes.insert(id.clone());
        for hi in above {
            next.edges.insert((hi.clone(), id.clone()));
        }
        for lo in below {
            next.edges.insert((id.clone(), lo.clone()));
        }
        Ok(next)
    }

    /// Deletes `id` and its edges. Neighbours are not reconnected. Returns
    /// the classes whose predecessor sets shrink (the old strict successors).
    pub fn remove_class(
        &self,
        id: &ClassId,
    ) -> Result<(Hierarchy, BTreeSet<ClassId>), HierarchyError> {
        let affected = self.strict_successors(id)?;
        let mut next = self.clone();
        next.classes.remove(id);
        next.edges.retain(|(hi, lo)| hi != id && lo != id);
        Ok((next, affected))
    }

    /// Classes ordered so every class follows all of its predecessors; ties
    /// broken by id.
    pub fn topological_order(&self) -> Vec<ClassId> {
        let mut indegree: BTreeMap<&ClassId, usize> =
            self.classes.iter().map(|c| (c, 0)).collect();
        for (_, lo) in &self.edges {
            *indegree.get_mut(lo).expect("edge endpoints exist") += 1;
        }
        let mut ready: BTreeSet<&ClassId> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(c, _)| *c)
            .collect();
        let mut order = Vec::with_capacity(self.classes.len());
        while let Some(c) = ready.pop_first() {
            order.push(c.clone());
            for (hi, lo) in &self.edges {
                if hi == c {
                    let d = indegree.get_mut(lo).expect("edge endpoints exist");
                    *d -= 1;
                    if *d == 0 {
                        ready.insert(lo);
                    }
                }
            }
        }
        order
    }
}
