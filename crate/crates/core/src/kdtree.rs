//! Exact k-d tree over one frame's positions.
//!
//! Axes cycle x, y, z by depth and every split is at the median, so the
//! tree is balanced and its nodes live in an implicit binary layout
//! (children of node `i` at `2i + 1` and `2i + 2`). Leaves hold at most
//! [`LEAF_SIZE`] points and are scanned linearly.
//!
//! All comparisons use squared distances and ties are broken by the lower
//! point index, so every query returns exactly what a linear scan would.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::geometry::{squared_distance, PointCloud, Vec3};

pub const LEAF_SIZE: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// Work done by one query.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub nodes_visited: usize,
    pub points_examined: usize,
}

#[derive(Clone, Copy, Debug)]
enum Node {
    Unused,
    Split { axis: usize, value: f64 },
    Leaf { start: usize, end: usize },
}

#[derive(Clone, Debug)]
pub struct KdTree {
    /// Positions in tree order.
    points: Vec<Vec3>,
    /// `indices[j]` is the cloud index of `points[j]`.
    indices: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    dist_sq: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

/// The `k` smallest candidates seen so far; max-heap so the worst is on top.
struct Best {
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl Best {
    fn new(k: usize) -> Self {
        Best {
            k,
            heap: BinaryHeap::with_capacity(k.min(1024) + 1),
        }
    }

    #[inline]
    fn worst(&self) -> f64 {
        if self.heap.len() < self.k {
            f64::INFINITY
        } else {
            self.heap.peek().map_or(f64::INFINITY, |c| c.dist_sq)
        }
    }

    #[inline]
    fn offer(&mut self, cand: Candidate) {
        if self.heap.len() < self.k {
            self.heap.push(cand);
        } else if let Some(top) = self.heap.peek() {
            if cand < *top {
                self.heap.pop();
                self.heap.push(cand);
            }
        }
    }
}

impl KdTree {
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        Self::from_positions(cloud.positions().copied().collect())
    }

    pub fn from_positions(positions: Vec<Vec3>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let n = positions.len();
        let mut indices: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::new();
        build_node(&positions, &mut indices, &mut nodes, 0, 0, n, 0);
        let points = indices.iter().map(|&i| positions[i]).collect();
        Ok(KdTree {
            points,
            indices,
            nodes,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest indexed point; ties go to the lower index.
    pub fn nearest(&self, query: &Vec3) -> Neighbor {
        self.knn(query, 1)[0]
    }

    /// The `min(k, n)` nearest points sorted by `(distance, index)`.
    pub fn knn(&self, query: &Vec3, k: usize) -> Vec<Neighbor> {
        self.knn_with_stats(query, k).0
    }

    pub fn knn_with_stats(&self, query: &Vec3, k: usize) -> (Vec<Neighbor>, SearchStats) {
        let mut stats = SearchStats::default();
        let found = self
            .knn_candidates(query, k, &mut stats)
            .into_iter()
            .map(|c| Neighbor {
                index: c.index,
                distance: c.dist_sq.sqrt(),
            })
            .collect();
        (found, stats)
    }

    /// Like [`KdTree::knn`] but yields `(index, squared distance)`.
    pub fn knn_squared(&self, query: &Vec3, k: usize) -> Vec<(usize, f64)> {
        self.knn_candidates(query, k, &mut SearchStats::default())
            .into_iter()
            .map(|c| (c.index, c.dist_sq))
            .collect()
    }

    fn knn_candidates(&self, query: &Vec3, k: usize, stats: &mut SearchStats) -> Vec<Candidate> {
        let k = k.min(self.len());
        if k == 0 {
            return Vec::new();
        }
        let mut best = Best::new(k);
        self.search_knn(0, query, &mut best, stats);
        best.heap.into_sorted_vec()
    }

    /// Indices within `radius` (inclusive), ascending.
    pub fn radius_query(&self, center: &Vec3, radius: f64) -> Result<Vec<usize>> {
        if radius < 0.0 || radius.is_nan() {
            return Err(Error::NegativeRadius);
        }
        let mut out = Vec::new();
        self.search_radius(0, center, radius * radius, &mut out);
        out.sort_unstable();
        Ok(out)
    }

    fn search_knn(&self, node: usize, query: &Vec3, best: &mut Best, stats: &mut SearchStats) {
        stats.nodes_visited += 1;
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                stats.points_examined += end - start;
                for j in start..end {
                    best.offer(Candidate {
                        dist_sq: squared_distance(query, &self.points[j]),
                        index: self.indices[j],
                    });
                }
            }
            Node::Split { axis, value } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (2 * node + 1, 2 * node + 2)
                } else {
                    (2 * node + 2, 2 * node + 1)
                };
                self.search_knn(near, query, best, stats);
                // `<=` keeps equal-distance points with lower indices reachable.
                if diff * diff <= best.worst() {
                    self.search_knn(far, query, best, stats);
                }
            }
            Node::Unused => unreachable!("query reached an unused node"),
        }
    }

    fn search_radius(&self, node: usize, center: &Vec3, radius_sq: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for j in start..end {
                    if squared_distance(center, &self.points[j]) <= radius_sq {
                        out.push(self.indices[j]);
                    }
                }
            }
            Node::Split { axis, value } => {
                let diff = center[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (2 * node + 1, 2 * node + 2)
                } else {
                    (2 * node + 2, 2 * node + 1)
                };
                self.search_radius(near, center, radius_sq, out);
                if diff * diff <= radius_sq {
                    self.search_radius(far, center, radius_sq, out);
                }
            }
            Node::Unused => unreachable!("query reached an unused node"),
        }
    }
}

fn build_node(
    positions: &[Vec3],
    indices: &mut [usize],
    nodes: &mut Vec<Node>,
    node: usize,
    start: usize,
    end: usize,
    depth: usize,
) {
    if nodes.len() <= node {
        nodes.resize(node + 1, Node::Unused);
    }
    if end - start <= LEAF_SIZE {
        nodes[node] = Node::Leaf { start, end };
        return;
    }
    let axis = depth % 3;
    let mid = (end - start) / 2;
    indices[start..end].select_nth_unstable_by(mid, |&a, &b| {
        positions[a][axis]
            .total_cmp(&positions[b][axis])
            .then(a.cmp(&b))
    });
    let value = positions[indices[start + mid]][axis];
    nodes[node] = Node::Split { axis, value };
    build_node(positions, indices, nodes, 2 * node + 1, start, start + mid, depth + 1);
    build_node(positions, indices, nodes, 2 * node + 2, start + mid, end, depth + 1);
}
