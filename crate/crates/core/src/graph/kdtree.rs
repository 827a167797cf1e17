//! Exact k-nearest-neighbour search.
//!
//! A kd-tree with runtime dimension handles low ambient dimensions; above
//! [`BRUTE_FORCE_DIM`] the tree prunes too little and a linear scan wins.
//! Both paths order neighbours by `(distance, index)`, so ties go to the
//! lower point index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;
use rayon::prelude::*;

/// Ambient dimension above which queries fall back to a linear scan.
pub const BRUTE_FORCE_DIM: usize = 8;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// Row-major copy of the points plus an optional kd-tree over them.
pub struct NeighborIndex {
    points: Vec<f64>,
    dim: usize,
    n: usize,
    order: Vec<usize>,
    root: Option<Node>,
}

impl NeighborIndex {
    /// Indexes the rows of `coords`.
    pub fn new(coords: &DMatrix<f64>) -> Self {
        let (n, dim) = coords.shape();
        let mut points = Vec::with_capacity(n * dim);
        for i in 0..n {
            points.extend(coords.row(i).iter());
        }
        let mut index = NeighborIndex {
            points,
            dim,
            n,
            order: (0..n).collect(),
            root: None,
        };
        if dim <= BRUTE_FORCE_DIM {
            let mut order = std::mem::take(&mut index.order);
            index.root = Some(index.build(&mut order, 0));
            index.order = order;
        }
        index
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn dist2(&self, a: &[f64], i: usize) -> f64 {
        a.iter()
            .zip(self.point(i))
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    }

    fn build(&self, idx: &mut [usize], offset: usize) -> Node {
        let len = idx.len();
        if len <= LEAF_SIZE {
            return Node::Leaf {
                start: offset,
                end: offset + len,
            };
        }
        // split on the dimension of widest spread
        let mut best = (0usize, -1.0f64);
        for d in 0..self.dim {
            let (lo, hi) = idx.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &i| {
                let v = self.points[i * self.dim + d];
                (lo.min(v), hi.max(v))
            });
            if hi - lo > best.1 {
                best = (d, hi - lo);
            }
        }
        let dim = best.0;
        if best.1 <= 0.0 {
            return Node::Leaf {
                start: offset,
                end: offset + len,
            };
        }
        let mid = len / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            self.points[a * self.dim + dim].total_cmp(&self.points[b * self.dim + dim])
        });
        let value = self.points[idx[mid] * self.dim + dim];
        let (l, r) = idx.split_at_mut(mid);
        Node::Split {
            dim,
            value,
            left: Box::new(self.build(l, offset)),
            right: Box::new(self.build(r, offset + mid)),
        }
    }

    /// The `k` nearest neighbours of point `i`, excluding `i` itself, sorted
    /// by `(distance, index)`.
    pub fn knn_of(&self, i: usize, k: usize) -> Vec<Neighbor> {
        let q = self.point(i).to_vec();
        self.query(&q, k, Some(i))
    }

    /// The `k` nearest indexed points to `q`, optionally skipping one index.
    pub fn query(&self, q: &[f64], k: usize, skip: Option<usize>) -> Vec<Neighbor> {
        let mut heap: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(k + 1);
        if k == 0 {
            return Vec::new();
        }
        match &self.root {
            Some(root) => self.search(root, q, k, skip, &mut heap),
            None => {
                for j in 0..self.n {
                    self.offer(q, j, k, skip, &mut heap);
                }
            }
        }
        heap.into_sorted_vec()
    }

    fn offer(&self, q: &[f64], j: usize, k: usize, skip: Option<usize>, heap: &mut BinaryHeap<Neighbor>) {
        if Some(j) == skip {
            return;
        }
        let cand = Neighbor {
            index: j,
            dist2: self.dist2(q, j),
        };
        if heap.len() < k {
            heap.push(cand);
        } else if cand < *heap.peek().expect("heap holds k items") {
            heap.pop();
            heap.push(cand);
        }
    }

    fn search(&self, node: &Node, q: &[f64], k: usize, skip: Option<usize>, heap: &mut BinaryHeap<Neighbor>) {
        match node {
            Node::Leaf { start, end } => {
                for &j in &self.order[*start..*end] {
                    self.offer(q, j, k, skip, heap);
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[*dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, skip, heap);
                // `<=` keeps equal-distance candidates with lower indices reachable
                let worst = heap.peek().map(|w| w.dist2);
                if heap.len() < k || worst.is_some_and(|w| diff * diff <= w) {
                    self.search(far, q, k, skip, heap);
                }
            }
        }
    }

    /// kNN lists for every indexed point, computed in parallel.
    pub fn all_knn(&self, k: usize) -> Vec<Vec<Neighbor>> {
        (0..self.n).into_par_iter().map(|i| self.knn_of(i, k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(coords: &DMatrix<f64>, i: usize, k: usize) -> Vec<Neighbor> {
        let mut all: Vec<Neighbor> = (0..coords.nrows())
            .filter(|&j| j != i)
            .map(|j| Neighbor {
                index: j,
                dist2: (coords.row(i) - coords.row(j)).norm_squared(),
            })
            .collect();
        all.sort();
        all.truncate(k);
        all
    }

    #[test]
    fn ties_go_to_lower_index() {
        // points at 0, -1, 1: both neighbours of 0 are at distance 1
        let coords = DMatrix::from_column_slice(3, 1, &[0.0, -1.0, 1.0]);
        let idx = NeighborIndex::new(&coords);
        let nn = idx.knn_of(0, 1);
        assert_eq!(nn[0].index, 1);
    }

    #[test]
    fn grid_ties_match_brute_force() {
        let mut pts = Vec::new();
        for a in 0..12 {
            for b in 0..12 {
                pts.push((a as f64, b as f64));
            }
        }
        let coords = DMatrix::from_fn(pts.len(), 2, |i, j| if j == 0 { pts[i].0 } else { pts[i].1 });
        let idx = NeighborIndex::new(&coords);
        for i in 0..pts.len() {
            assert_eq!(idx.knn_of(i, 6), brute(&coords, i, 6));
        }
    }

    proptest! {
        #[test]
        fn tree_matches_brute_force(
            n in 2usize..120,
            dim in 1usize..12,
            k in 1usize..10,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            // coarse grid values force plenty of exact ties
            let coords = DMatrix::from_fn(n, dim, |_, _| rng.random_range(0..4) as f64);
            let k = k.min(n - 1);
            let idx = NeighborIndex::new(&coords);
            for i in 0..n {
                prop_assert_eq!(idx.knn_of(i, k), brute(&coords, i, k));
            }
        }
    }
}
