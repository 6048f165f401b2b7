//! Implicit rooted regular tree.
//!
//! The root has `K` children and every other non-leaf vertex has one parent and
//! `K` children. Vertices are numbered breadth first, so shell `n` (the vertices
//! at graph distance `n` from the root) occupies the contiguous index block
//! `[(K^n - 1)/(K - 1), (K^(n+1) - 1)/(K - 1))`. With this layout the children
//! of `x` are `K x + 1 ..= K x + K` and the parent of `x > 0` is `(x - 1) / K`,
//! so no adjacency is ever stored.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry", into = "RawGeometry")]
pub struct TreeGeometry {
    branching: usize,
    depth: usize,
    /// `shell_starts[n]` is the first index of shell `n`; one extra entry holds the vertex count.
    shell_starts: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawGeometry {
    branching: usize,
    depth: usize,
}

impl TryFrom<RawGeometry> for TreeGeometry {
    type Error = Error;

    fn try_from(raw: RawGeometry) -> Result<Self> {
        TreeGeometry::new(raw.branching, raw.depth)
    }
}

impl From<TreeGeometry> for RawGeometry {
    fn from(g: TreeGeometry) -> Self {
        RawGeometry {
            branching: g.branching,
            depth: g.depth,
        }
    }
}

impl TreeGeometry {
    pub fn new(branching: usize, depth: usize) -> Result<Self> {
        if branching < 2 {
            return Err(Error::invalid(format!(
                "branching number must be at least 2, got {branching}"
            )));
        }
        let overflow = || Error::Overflow { branching, depth };
        let mut shell_starts = Vec::with_capacity(depth + 2);
        let mut start = 0usize;
        let mut width = 1usize;
        for n in 0..=depth {
            shell_starts.push(start);
            start = start.checked_add(width).ok_or_else(overflow)?;
            if n < depth {
                width = width.checked_mul(branching).ok_or_else(overflow)?;
            }
        }
        shell_starts.push(start);
        Ok(Self {
            branching,
            depth,
            shell_starts,
        })
    }

    #[inline]
    pub fn branching(&self) -> usize {
        self.branching
    }

    #[inline]
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Total number of vertices, `(K^(D+1) - 1)/(K - 1)`.
    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.shell_starts[self.depth + 1]
    }

    /// Index block of shell `n`. Empty for `n > D`.
    pub fn shell_range(&self, n: usize) -> Range<usize> {
        if n > self.depth {
            let end = self.vertex_count();
            return end..end;
        }
        self.shell_starts[n]..self.shell_starts[n + 1]
    }

    pub fn shell_of(&self, index: usize) -> Result<usize> {
        self.check(index)?;
        Ok(self.shell_of_unchecked(index))
    }

    #[inline]
    pub(crate) fn shell_of_unchecked(&self, index: usize) -> usize {
        self.shell_starts.partition_point(|&s| s <= index) - 1
    }

    pub fn parent_of(&self, index: usize) -> Result<usize> {
        self.check(index)?;
        if index == 0 {
            return Err(Error::RootHasNoParent);
        }
        Ok((index - 1) / self.branching)
    }

    /// Children of `index`; empty for leaves.
    pub fn children_of(&self, index: usize) -> Result<Range<usize>> {
        self.check(index)?;
        Ok(self.children_unchecked(index))
    }

    #[inline]
    pub(crate) fn children_unchecked(&self, index: usize) -> Range<usize> {
        let first = index * self.branching + 1;
        if first >= self.vertex_count() {
            first..first
        } else {
            first..first + self.branching
        }
    }

    /// First index of the deepest shell; every index at or above it is a leaf.
    #[inline]
    pub fn first_leaf(&self) -> usize {
        self.shell_starts[self.depth]
    }

    /// Number of vertices per shell.
    pub fn shell_sizes(&self) -> Vec<usize> {
        self.shell_starts.windows(2).map(|w| w[1] - w[0]).collect()
    }

    fn check(&self, index: usize) -> Result<()> {
        let count = self.vertex_count();
        if index >= count {
            return Err(Error::IndexOutOfRange { index, count });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vertex_counts() {
        assert_eq!(TreeGeometry::new(2, 0).unwrap().vertex_count(), 1);
        assert_eq!(TreeGeometry::new(2, 3).unwrap().vertex_count(), 15);
        // 1 + 3 + 9 + 27 + 81
        assert_eq!(TreeGeometry::new(3, 4).unwrap().vertex_count(), 121);
    }

    #[test]
    fn overflow_is_reported() {
        assert!(matches!(
            TreeGeometry::new(2, 80),
            Err(Error::Overflow { .. })
        ));
        assert!(TreeGeometry::new(1, 3).is_err());
    }

    #[test]
    fn shells() {
        let g = TreeGeometry::new(2, 3).unwrap();
        assert_eq!(g.shell_of(0).unwrap(), 0);
        assert_eq!(g.shell_of(1).unwrap(), 1);
        assert_eq!(g.shell_of(14).unwrap(), 3);
        assert!(g.shell_of(15).is_err());
        assert_eq!(g.shell_sizes(), vec![1, 2, 4, 8]);
        assert_eq!(g.shell_range(2), 3..7);
    }

    #[test]
    fn parent_and_children() {
        let g = TreeGeometry::new(2, 3).unwrap();
        assert_eq!(g.children_of(0).unwrap(), 1..3);
        assert_eq!(g.parent_of(4).unwrap(), 1);
        assert!(g.children_of(14).unwrap().is_empty());
        let g3 = TreeGeometry::new(3, 2).unwrap();
        assert!(matches!(g3.parent_of(0), Err(Error::RootHasNoParent)));
    }

    #[test]
    fn serde_validates() {
        let g: TreeGeometry = serde_json::from_str(r#"{"branching":3,"depth":2}"#).unwrap();
        assert_eq!(g.vertex_count(), 13);
        assert!(serde_json::from_str::<TreeGeometry>(r#"{"branching":1,"depth":2}"#).is_err());
    }

    proptest! {
        #[test]
        fn parent_child_consistency(k in 2usize..6, d in 0usize..6, seed in any::<u64>()) {
            let g = TreeGeometry::new(k, d).unwrap();
            let n = g.vertex_count();
            let x = (seed as usize) % n;
            let shell = g.shell_of(x).unwrap();
            let children = g.children_of(x).unwrap();
            if shell < d {
                prop_assert_eq!(children.len(), k);
                for c in children {
                    prop_assert_eq!(g.parent_of(c).unwrap(), x);
                    prop_assert_eq!(g.shell_of(c).unwrap(), shell + 1);
                }
            } else {
                prop_assert!(children.is_empty());
            }
            if x != 0 {
                let p = g.parent_of(x).unwrap();
                prop_assert_eq!(g.shell_of(p).unwrap() + 1, shell);
                prop_assert!(g.children_of(p).unwrap().contains(&x));
            }
            let mut steps = 0;
            let mut y = x;
            while y != 0 {
                y = g.parent_of(y).unwrap();
                steps += 1;
            }
            prop_assert_eq!(steps, shell);
        }
    }
}
