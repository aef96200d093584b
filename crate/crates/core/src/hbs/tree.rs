use std::ops::Range;

use crate::error::{Error, Result};

/// Smallest accepted leaf capacity.
pub const MIN_LEAF_SIZE: usize = 4;

/// Binary index tree over `0..n` with heap numbering: the root is 1 and the
/// children of `τ` are `2τ` and `2τ + 1`. Every box is a contiguous range,
/// split in half (left child takes the floor), and all leaves sit on level `L`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tree {
    n: usize,
    levels: usize,
    ranges: Vec<Range<usize>>,
}

impl Tree {
    /// `L = ceil(log2(n / leaf_size))`, so every leaf holds at most `leaf_size` points.
    pub fn new(n: usize, leaf_size: usize) -> Result<Tree> {
        if leaf_size < MIN_LEAF_SIZE {
            return Err(Error::InvalidArgument(format!(
                "leaf size {leaf_size} is below the minimum {MIN_LEAF_SIZE}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("cannot build a tree over zero points".into()));
        }
        let mut levels = 0;
        while n.div_ceil(1 << levels) > leaf_size {
            levels += 1;
        }
        Ok(Self::with_levels(n, levels))
    }

    pub fn with_levels(n: usize, levels: usize) -> Tree {
        let count = (1usize << (levels + 1)) - 1;
        let mut ranges = vec![0..0; count + 1];
        ranges[1] = 0..n;
        for t in 1..=count {
            if 2 * t <= count {
                let r = ranges[t].clone();
                let mid = r.start + (r.end - r.start) / 2;
                ranges[2 * t] = r.start..mid;
                ranges[2 * t + 1] = mid..r.end;
            }
        }
        Tree { n, levels, ranges }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of levels below the root; leaves are on level `levels()`.
    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Largest node id; ids run over `1..=node_count()`.
    pub fn node_count(&self) -> usize {
        self.ranges.len() - 1
    }

    pub fn range(&self, t: usize) -> Range<usize> {
        self.ranges[t].clone()
    }

    pub fn level(t: usize) -> usize {
        (usize::BITS - 1 - t.leading_zeros()) as usize
    }

    pub fn is_leaf(&self, t: usize) -> bool {
        Self::level(t) == self.levels
    }

    pub fn children(&self, t: usize) -> Option<(usize, usize)> {
        (!self.is_leaf(t)).then_some((2 * t, 2 * t + 1))
    }

    pub fn parent(t: usize) -> Option<usize> {
        (t > 1).then_some(t / 2)
    }

    pub fn sibling(t: usize) -> Option<usize> {
        (t > 1).then_some(t ^ 1)
    }

    /// Ids on `level`, left to right.
    pub fn level_nodes(&self, level: usize) -> Range<usize> {
        (1 << level)..(1 << (level + 1))
    }

    pub fn leaves(&self) -> Range<usize> {
        self.level_nodes(self.levels)
    }

    /// Every id with children before parents.
    pub fn bottom_up(&self) -> impl Iterator<Item = usize> {
        (1..=self.node_count()).rev()
    }

    /// Every id with parents before children.
    pub fn top_down(&self) -> impl Iterator<Item = usize> {
        1..=self.node_count()
    }

    /// Leaf holding index `i`.
    pub fn leaf_of(&self, i: usize) -> usize {
        let mut t = 1;
        while let Some((a, b)) = self.children(t) {
            t = if self.ranges[a].contains(&i) { a } else { b };
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heap_numbering_and_ranges() {
        let t = Tree::new(400, 50).unwrap();
        assert_eq!(t.levels(), 3);
        assert_eq!(t.range(8), 0..50);
        assert_eq!(t.range(2), 0..200);
        assert_eq!(t.range(15), 350..400);
        assert_eq!(t.leaf_of(399), 15);
        assert!(t.is_leaf(8) && !t.is_leaf(7));
    }

    #[test]
    fn single_leaf_tree() {
        let t = Tree::new(10, 64).unwrap();
        assert_eq!(t.levels(), 0);
        assert!(t.is_leaf(1));
        assert_eq!(t.children(1), None);
    }

    #[test]
    fn leaves_partition_and_respect_capacity() {
        for (n, leaf) in [(1000, 64), (97, 8), (4096, 64), (12345, 100)] {
            let t = Tree::new(n, leaf).unwrap();
            let mut next = 0;
            for l in t.leaves() {
                let r = t.range(l);
                assert_eq!(r.start, next);
                assert!(r.len() <= leaf && !r.is_empty());
                next = r.end;
            }
            assert_eq!(next, n);
        }
    }

    #[test]
    fn tiny_leaf_rejected() {
        assert!(Tree::new(100, 2).is_err());
    }
}
