//! Balanced k-d tree over 3D points.
//!
//! Query results are ordered by `(squared distance, index)`, so ties between
//! equidistant points always resolve to the smaller index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Vector3;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbour {
    pub index: usize,
    pub dist_sq: f64,
}

impl Neighbour {
    pub fn distance(&self) -> f64 {
        self.dist_sq.sqrt()
    }

    fn key_cmp(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

impl Eq for Neighbour {}

impl PartialOrd for Neighbour {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbour {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Immutable spatial index. Owns a copy of the points.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Vector3<f64>>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl SpatialIndex {
    pub fn new(points: &[Vector3<f64>]) -> Self {
        let mut index = SpatialIndex {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            index.build(0, points.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let (mut lo, mut hi) = (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY));
        for &i in &self.order[start..end] {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        let axis = (hi - lo).imax();
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis])
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// All points with `|p - query| <= radius`, sorted by `(distance, index)`.
    pub fn radius(&self, query: &Vector3<f64>, radius: f64) -> Vec<Neighbour> {
        let mut out = Vec::new();
        self.radius_into(query, radius, &mut out);
        out
    }

    /// As [`radius`](Self::radius), reusing `out`'s allocation.
    pub fn radius_into(&self, query: &Vector3<f64>, radius: f64, out: &mut Vec<Neighbour>) {
        out.clear();
        if self.nodes.is_empty() || !(radius >= 0.0) {
            return;
        }
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            match self.nodes[id] {
                Node::Leaf { start, end } => {
                    for &i in &self.order[start..end] {
                        let d2 = (self.points[i] - query).norm_squared();
                        if d2 <= r2 {
                            out.push(Neighbour {
                                index: i,
                                dist_sq: d2,
                            });
                        }
                    }
                }
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    let diff = query[axis] - value;
                    if diff <= radius {
                        stack.push(left);
                    }
                    if diff >= -radius {
                        stack.push(right);
                    }
                }
            }
        }
        out.sort_unstable();
    }

    /// The `k` nearest points, sorted by `(distance, index)`.
    pub fn knn(&self, query: &Vector3<f64>, k: usize) -> Vec<Neighbour> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Neighbour> = BinaryHeap::with_capacity(k + 1);
        self.knn_recurse(0, query, k, &mut heap);
        let mut out = heap.into_vec();
        out.sort_unstable();
        out
    }

    fn knn_recurse(&self, id: usize, query: &Vector3<f64>, k: usize, heap: &mut BinaryHeap<Neighbour>) {
        match self.nodes[id] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Neighbour {
                        index: i,
                        dist_sq: (self.points[i] - query).norm_squared(),
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.knn_recurse(near, query, k, heap);
                // Points equal to the split value can sit on either side, so
                // the far side is visited on equality too.
                if heap.len() < k || diff * diff <= heap.peek().unwrap().dist_sq {
                    self.knn_recurse(far, query, k, heap);
                }
            }
        }
    }

    pub fn nearest(&self, query: &Vector3<f64>) -> Option<Neighbour> {
        self.knn(query, 1).into_iter().next()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_radius(points: &[Vector3<f64>], q: &Vector3<f64>, r: f64) -> Vec<Neighbour> {
        let mut v: Vec<Neighbour> = points
            .iter()
            .enumerate()
            .map(|(i, p)| Neighbour {
                index: i,
                dist_sq: (p - q).norm_squared(),
            })
            .filter(|n| n.dist_sq <= r * r)
            .collect();
        v.sort();
        v
    }

    fn brute_knn(points: &[Vector3<f64>], q: &Vector3<f64>, k: usize) -> Vec<Neighbour> {
        let mut v: Vec<Neighbour> = points
            .iter()
            .enumerate()
            .map(|(i, p)| Neighbour {
                index: i,
                dist_sq: (p - q).norm_squared(),
            })
            .collect();
        v.sort();
        v.truncate(k);
        v
    }

    #[test]
    fn radius_and_knn_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..100 {
            let n = rng.gen_range(0..2000);
            let points: Vec<_> = (0..n)
                .map(|_| Vector3::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()))
                .collect();
            let index = SpatialIndex::new(&points);
            for _ in 0..5 {
                let q = Vector3::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
                let r = rng.gen_range(0.0..0.3);
                assert_eq!(index.radius(&q, r), brute_radius(&points, &q, r), "trial {trial}");
                let k = rng.gen_range(1..20);
                assert_eq!(index.knn(&q, k), brute_knn(&points, &q, k), "trial {trial}");
            }
        }
    }

    #[test]
    fn ties_prefer_smaller_index() {
        // Duplicated points on an integer lattice produce many exact ties.
        let mut points = Vec::new();
        for _ in 0..3 {
            for x in 0..6 {
                for y in 0..6 {
                    points.push(Vector3::new(x as f64, y as f64, 0.0));
                }
            }
        }
        let index = SpatialIndex::new(&points);
        let q = Vector3::new(2.0, 2.0, 0.0);
        for k in 1..40 {
            assert_eq!(index.knn(&q, k), brute_knn(&points, &q, k));
        }
        assert_eq!(index.radius(&q, 1.0), brute_radius(&points, &q, 1.0));
    }

    #[test]
    fn empty_index() {
        let index = SpatialIndex::new(&[]);
        assert!(index.radius(&Vector3::zeros(), 1.0).is_empty());
        assert!(index.nearest(&Vector3::zeros()).is_none());
    }
}
