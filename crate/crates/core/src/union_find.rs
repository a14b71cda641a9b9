//! Disjoint sets with path halving and union by size.

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Adds a fresh singleton and returns its index.
    pub fn push(&mut self) -> usize {
        self.parent.push(self.parent.len());
        self.size.push(1);
        self.parent.len() - 1
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; returns the surviving root.
    pub fn union(&mut self, a: usize, b: usize) -> usize {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        if self.size[ra] < self.size[rb] || (self.size[ra] == self.size[rb] && rb < ra) {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        ra
    }

    pub fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    /// Blocks of `items` grouped by root, each block ascending, blocks ordered by first member.
    pub fn blocks_of(&mut self, items: &[usize]) -> Vec<Vec<usize>> {
        let mut sorted = items.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut by_root: std::collections::HashMap<usize, usize> = Default::default();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for x in sorted {
            let r = self.find(x);
            let b = *by_root.entry(r).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[b].push(x);
        }
        blocks
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unions_merge_and_stay_merged() {
        let mut uf = UnionFind::new(5);
        uf.union(1, 2);
        uf.union(4, 2);
        assert!(uf.same(1, 4));
        assert!(!uf.same(0, 1));
        assert_eq!(uf.blocks_of(&[0, 1, 2, 3, 4]), vec![vec![0], vec![1, 2, 4], vec![3]]);
        let x = uf.push();
        assert_eq!(x, 5);
        assert!(!uf.same(5, 1));
    }
}
