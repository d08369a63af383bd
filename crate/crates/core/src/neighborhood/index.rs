//! Exact k-NN and ball queries under the Gower distance.
//!
//! Three interchangeable engines answer queries identically, down to
//! tie-breaking (ascending distance, then ascending record index):
//!
//! * a k-d tree over the numeric columns, used whenever one has positive
//!   weight; categorical mismatches only add to the distance, so the
//!   numeric split bound stays a valid lower bound;
//! * a grouped scan over the distinct feature vectors, used for purely
//!   categorical data where many records coincide;
//! * a plain linear scan, kept as the reference.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{DistanceSpec, NeighborhoodMode, NeighborhoodSpec};
use crate::data::{ColumnData, Dataset};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

fn by_distance_then_index(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.distance
        .total_cmp(&b.distance)
        .then(a.index.cmp(&b.index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// k-d tree when a numeric column carries weight, grouped scan otherwise.
    #[default]
    Auto,
    Linear,
    KdTree,
    Grouped,
}

#[derive(Debug, Clone, Copy)]
enum KdNode {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
struct KdTree {
    nodes: Vec<KdNode>,
    perm: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Groups {
    reps: Vec<usize>,
    members: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
enum Engine {
    Linear,
    Kd(KdTree),
    Grouped(Groups),
}

/// Immutable neighbor index over the weighted feature columns of a dataset.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    n: usize,
    num_dims: usize,
    /// Min-max scaled numeric values, row-major `n × num_dims`.
    numeric: Vec<f64>,
    num_weights: Vec<f64>,
    cat_dims: usize,
    /// Category codes, row-major `n × cat_dims`.
    codes: Vec<u32>,
    cat_weights: Vec<f64>,
    total_weight: f64,
    columns: Vec<usize>,
    engine: Engine,
}

#[derive(PartialEq)]
struct Candidate(Neighbor);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        by_distance_then_index(&self.0, &other.0)
    }
}

impl NeighborIndex {
    pub fn build(dataset: &Dataset, dist: &DistanceSpec) -> Result<Self> {
        NeighborIndex::build_with(dataset, dist, Backend::Auto)
    }

    pub fn build_with(dataset: &Dataset, dist: &DistanceSpec, backend: Backend) -> Result<Self> {
        let features = dataset.feature_indices();
        if features.is_empty() {
            return Err(Error::NoFeatures);
        }
        let weights = dist.resolve(features.len())?;
        NeighborIndex::from_weighted(dataset, features, &weights, backend)
    }

    /// Builds over `features` (dataset column positions); zero-weight columns are left out.
    pub(crate) fn from_weighted(
        dataset: &Dataset,
        features: &[usize],
        weights: &[f64],
        backend: Backend,
    ) -> Result<Self> {
        let n = dataset.n();
        let total_weight: f64 = weights.iter().sum();
        let mut numeric_cols: Vec<(Vec<f64>, f64)> = Vec::new();
        let mut cat_cols: Vec<(&[u32], f64)> = Vec::new();
        let mut columns = Vec::new();
        for (&c, &w) in features.iter().zip(weights) {
            if w <= 0.0 {
                continue;
            }
            columns.push(c);
            match &dataset.column(c).data {
                ColumnData::Numeric(values) => {
                    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let range = hi - lo;
                    let scaled = values
                        .iter()
                        .map(|&v| {
                            if range > 0.0 {
                                ((v - lo) / range).min(1.0)
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    numeric_cols.push((scaled, w));
                }
                ColumnData::Categorical(cat) => cat_cols.push((cat.codes(), w)),
            }
        }

        let num_dims = numeric_cols.len();
        let cat_dims = cat_cols.len();
        let mut numeric = vec![0.0; n * num_dims];
        for (k, (col, _)) in numeric_cols.iter().enumerate() {
            for r in 0..n {
                numeric[r * num_dims + k] = col[r];
            }
        }
        let mut codes = vec![0u32; n * cat_dims];
        for (k, (col, _)) in cat_cols.iter().enumerate() {
            for r in 0..n {
                codes[r * cat_dims + k] = col[r];
            }
        }

        let mut index = NeighborIndex {
            n,
            num_dims,
            numeric,
            num_weights: numeric_cols.iter().map(|c| c.1).collect(),
            cat_dims,
            codes,
            cat_weights: cat_cols.iter().map(|c| c.1).collect(),
            total_weight,
            columns,
            engine: Engine::Linear,
        };
        index.engine = match backend {
            Backend::Linear => Engine::Linear,
            Backend::KdTree => Engine::Kd(index.build_kd()),
            Backend::Grouped => Engine::Grouped(index.build_groups()),
            Backend::Auto if num_dims > 0 => Engine::Kd(index.build_kd()),
            Backend::Auto => Engine::Grouped(index.build_groups()),
        };
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Dataset columns that carry positive weight.
    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    #[inline]
    fn num(&self, r: usize) -> &[f64] {
        &self.numeric[r * self.num_dims..(r + 1) * self.num_dims]
    }

    #[inline]
    fn cat(&self, r: usize) -> &[u32] {
        &self.codes[r * self.cat_dims..(r + 1) * self.cat_dims]
    }

    /// Gower distance between two records.
    #[inline]
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let mut acc = 0.0;
        for ((x, y), w) in self.num(a).iter().zip(self.num(b)).zip(&self.num_weights) {
            acc += w * (x - y).abs();
        }
        for ((x, y), w) in self.cat(a).iter().zip(self.cat(b)).zip(&self.cat_weights) {
            if x != y {
                acc += w;
            }
        }
        // summation order differs from `total_weight`, so clamp the rounding overshoot
        (acc / self.total_weight).min(1.0)
    }

    /// The neighborhood of record `query` under `spec`, sorted by distance then index.
    pub fn neighbors(&self, query: usize, spec: &NeighborhoodSpec) -> Vec<Neighbor> {
        let exclude = (!spec.include_self).then_some(query);
        match spec.mode {
            NeighborhoodMode::Knn { k } => self.knn(query, k, exclude),
            NeighborhoodMode::Ball { radius } => self.ball(query, radius, exclude),
        }
    }

    pub fn knn(&self, query: usize, k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        if k == 0 {
            return Vec::new();
        }
        match &self.engine {
            Engine::Linear => {
                let mut all = self.scan(query, exclude);
                if k < all.len() {
                    all.select_nth_unstable_by(k - 1, by_distance_then_index);
                    all.truncate(k);
                }
                all.sort_unstable_by(by_distance_then_index);
                all
            }
            Engine::Kd(tree) => {
                let mut heap = BinaryHeap::with_capacity(k + 1);
                self.kd_knn(tree, 0, query, k, exclude, &mut heap);
                let mut out: Vec<Neighbor> = heap.into_iter().map(|c| c.0).collect();
                out.sort_unstable_by(by_distance_then_index);
                out
            }
            Engine::Grouped(groups) => self.grouped_knn(groups, query, k, exclude),
        }
    }

    pub fn ball(&self, query: usize, radius: f64, exclude: Option<usize>) -> Vec<Neighbor> {
        let mut out = match &self.engine {
            Engine::Linear => {
                let mut all = self.scan(query, exclude);
                all.retain(|nb| nb.distance <= radius);
                all
            }
            Engine::Kd(tree) => {
                let mut out = Vec::new();
                self.kd_ball(tree, 0, query, radius, exclude, &mut out);
                out
            }
            Engine::Grouped(groups) => {
                let mut out = Vec::new();
                for (g, &rep) in groups.reps.iter().enumerate() {
                    let d = self.distance(query, rep);
                    if d <= radius {
                        out.extend(
                            groups.members[g]
                                .iter()
                                .filter(|&&m| Some(m) != exclude)
                                .map(|&m| Neighbor {
                                    index: m,
                                    distance: d,
                                }),
                        );
                    }
                }
                out
            }
        };
        out.sort_unstable_by(by_distance_then_index);
        out
    }

    fn scan(&self, query: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        (0..self.n)
            .filter(|&r| Some(r) != exclude)
            .map(|r| Neighbor {
                index: r,
                distance: self.distance(query, r),
            })
            .collect()
    }

    // ---- k-d tree -------------------------------------------------------

    fn build_kd(&self) -> KdTree {
        let mut tree = KdTree {
            nodes: Vec::new(),
            perm: (0..self.n).collect(),
        };
        self.kd_split(&mut tree, 0, self.n);
        tree
    }

    fn kd_split(&self, tree: &mut KdTree, start: usize, end: usize) -> usize {
        let id = tree.nodes.len();
        tree.nodes.push(KdNode::Leaf { start, end });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let mut best_dim = 0;
        let mut best_spread = 0.0;
        for d in 0..self.num_dims {
            let (lo, hi) = tree.perm[start..end].iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), &r| {
                    let v = self.numeric[r * self.num_dims + d];
                    (lo.min(v), hi.max(v))
                },
            );
            let spread = (hi - lo) * self.num_weights[d];
            if spread > best_spread {
                best_spread = spread;
                best_dim = d;
            }
        }
        if best_spread <= 0.0 {
            return id;
        }
        let dims = self.num_dims;
        let mid = start + (end - start) / 2;
        let value_of = |r: usize| self.numeric[r * dims + best_dim];
        tree.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            value_of(a).total_cmp(&value_of(b)).then(a.cmp(&b))
        });
        let value = value_of(tree.perm[mid]);
        let left = self.kd_split(tree, start, mid);
        let right = self.kd_split(tree, mid, end);
        tree.nodes[id] = KdNode::Split {
            dim: best_dim,
            value,
            left,
            right,
        };
        id
    }

    /// Lower bound on the distance from `query` to anything across a split plane.
    #[inline]
    fn plane_bound(&self, dim: usize, diff: f64) -> f64 {
        self.num_weights[dim] * diff.abs() / self.total_weight
    }

    fn kd_knn(
        &self,
        tree: &KdTree,
        node: usize,
        query: usize,
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match tree.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &r in &tree.perm[start..end] {
                    if Some(r) == exclude {
                        continue;
                    }
                    let cand = Candidate(Neighbor {
                        index: r,
                        distance: self.distance(query, r),
                    });
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap holds k items") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            KdNode::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = self.numeric[query * self.num_dims + dim] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.kd_knn(tree, near, query, k, exclude, heap);
                // equal bounds may still hide a lower record index at the same distance
                let bound = self.plane_bound(dim, diff);
                if heap.len() < k || bound <= heap.peek().expect("non-empty").0.distance {
                    self.kd_knn(tree, far, query, k, exclude, heap);
                }
            }
        }
    }

    fn kd_ball(
        &self,
        tree: &KdTree,
        node: usize,
        query: usize,
        radius: f64,
        exclude: Option<usize>,
        out: &mut Vec<Neighbor>,
    ) {
        match tree.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &r in &tree.perm[start..end] {
                    if Some(r) == exclude {
                        continue;
                    }
                    let distance = self.distance(query, r);
                    if distance <= radius {
                        out.push(Neighbor { index: r, distance });
                    }
                }
            }
            KdNode::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = self.numeric[query * self.num_dims + dim] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.kd_ball(tree, near, query, radius, exclude, out);
                if self.plane_bound(dim, diff) <= radius {
                    self.kd_ball(tree, far, query, radius, exclude, out);
                }
            }
        }
    }

    // ---- grouped scan ---------------------------------------------------

    fn same_features(&self, a: usize, b: usize) -> bool {
        self.cat(a) == self.cat(b)
            && self
                .num(a)
                .iter()
                .zip(self.num(b))
                .all(|(x, y)| x.total_cmp(y) == Ordering::Equal)
    }

    fn build_groups(&self) -> Groups {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| {
            self.cat(a).cmp(self.cat(b)).then_with(|| {
                self.num(a)
                    .iter()
                    .zip(self.num(b))
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
            })
        });
        let mut groups = Groups {
            reps: Vec::new(),
            members: Vec::new(),
        };
        for r in order {
            match groups.reps.last() {
                Some(&rep) if self.same_features(rep, r) => {
                    groups.members.last_mut().expect("parallel vectors").push(r)
                }
                _ => {
                    groups.reps.push(r);
                    groups.members.push(vec![r]);
                }
            }
        }
        groups
    }

    fn grouped_knn(
        &self,
        groups: &Groups,
        query: usize,
        k: usize,
        exclude: Option<usize>,
    ) -> Vec<Neighbor> {
        let mut by_distance: Vec<(f64, usize)> = groups
            .reps
            .iter()
            .enumerate()
            .map(|(g, &rep)| (self.distance(query, rep), g))
            .collect();
        by_distance.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut out = Vec::with_capacity(k);
        let mut pos = 0;
        let mut level = Vec::new();
        while pos < by_distance.len() && out.len() < k {
            let d = by_distance[pos].0;
            level.clear();
            while pos < by_distance.len() && by_distance[pos].0 == d {
                level.extend(
                    groups.members[by_distance[pos].1]
                        .iter()
                        .filter(|&&m| Some(m) != exclude),
                );
                pos += 1;
            }
            level.sort_unstable();
            let take = (k - out.len()).min(level.len());
            out.extend(level[..take].iter().map(|&m| Neighbor {
                index: m,
                distance: d,
            }));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, Provenance, Role};

    fn with_features(features: Vec<Column>) -> Dataset {
        let n = features[0].data.len();
        let s: Vec<&str> = (0..n).map(|i| if i % 2 == 0 { "a" } else { "b" }).collect();
        let mut cols = vec![
            Column::categorical("s", Role::Sensitive, &s),
            Column::categorical("y", Role::Target, &s),
            Column::categorical("yhat", Role::Prediction, &s),
        ];
        cols.extend(features);
        Dataset::from_columns(cols, Provenance::default()).unwrap()
    }

    fn indices(nbs: &[Neighbor]) -> Vec<usize> {
        nbs.iter().map(|n| n.index).collect()
    }

    #[test]
    fn knn_and_ball_on_one_numeric_feature() {
        let d = with_features(vec![Column::numeric(
            "x",
            Role::Feature,
            vec![0.0, 1.0, 3.0],
        )]);
        for backend in [Backend::Linear, Backend::KdTree, Backend::Grouped] {
            let idx = NeighborIndex::build_with(&d, &DistanceSpec::default(), backend).unwrap();
            assert_eq!(indices(&idx.knn(0, 2, None)), vec![0, 1]);
            let ball = idx.ball(0, 0.5, None);
            assert_eq!(indices(&ball), vec![0, 1]);
            assert!((ball[1].distance - 1.0 / 3.0).abs() < 1e-15);
            assert_eq!(idx.distance(0, 2), 1.0);
        }
    }

    #[test]
    fn duplicate_row_is_nearest_when_self_excluded() {
        let d = with_features(vec![
            Column::numeric("x", Role::Feature, vec![0.2, 5.0, 0.2, 9.0]),
            Column::categorical("c", Role::Feature, ["u", "v", "u", "v"]),
        ]);
        for backend in [Backend::Linear, Backend::KdTree, Backend::Grouped] {
            let idx = NeighborIndex::build_with(&d, &DistanceSpec::default(), backend).unwrap();
            let nb = idx.neighbors(0, &NeighborhoodSpec::knn(1).excluding_self());
            assert_eq!(
                nb,
                vec![Neighbor {
                    index: 2,
                    distance: 0.0
                }]
            );
        }
    }

    #[test]
    fn ties_go_to_lower_index() {
        let d = with_features(vec![Column::categorical(
            "c",
            Role::Feature,
            ["u", "v", "v", "u", "v", "u"],
        )]);
        for backend in [Backend::Linear, Backend::Grouped] {
            let idx = NeighborIndex::build_with(&d, &DistanceSpec::default(), backend).unwrap();
            assert_eq!(indices(&idx.knn(0, 2, None)), vec![0, 3]);
            assert_eq!(indices(&idx.knn(1, 4, None)), vec![1, 2, 4, 0]);
        }
    }

    #[test]
    fn weights_are_validated() {
        let d = with_features(vec![Column::numeric("x", Role::Feature, vec![0.0, 1.0])]);
        let bad = DistanceSpec::weighted(vec![1.0, 2.0]);
        assert!(matches!(
            NeighborIndex::build(&d, &bad),
            Err(Error::InvalidDistance(_))
        ));
        let zero = DistanceSpec::weighted(vec![0.0]);
        assert!(matches!(
            NeighborIndex::build(&d, &zero),
            Err(Error::InvalidDistance(_))
        ));
    }

    #[test]
    fn no_features_is_an_error() {
        let d = Dataset::from_columns(
            vec![
                Column::categorical("s", Role::Sensitive, ["a", "b"]),
                Column::categorical("y", Role::Target, ["0", "1"]),
                Column::categorical("yhat", Role::Prediction, ["0", "1"]),
            ],
            Provenance::default(),
        )
        .unwrap();
        assert!(matches!(
            NeighborIndex::build(&d, &DistanceSpec::default()),
            Err(Error::NoFeatures)
        ));
    }
}
