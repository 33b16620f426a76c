use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignMode {
    /// Majority label among the nearest training points.
    Knn,
    /// Label of the nearest k-means centroid.
    NearestCentroid,
}

impl AssignMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "knn" => Some(Self::Knn),
            "nearest-centroid" => Some(Self::NearestCentroid),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Knn => "knn",
            Self::NearestCentroid => "nearest-centroid",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
enum KdNode {
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

/// Static kd-tree over training points for exact nearest-neighbour search.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KdTree {
    dim: usize,
    points: Vec<f64>,
    /// Point indices, permuted so every leaf owns a contiguous range.
    order: Vec<usize>,
    nodes: Vec<KdNode>,
}

const LEAF_SIZE: usize = 16;

impl KdTree {
    pub fn build(points: &[f64], dim: usize) -> Self {
        let n = points.len() / dim;
        let mut t = Self {
            dim,
            points: points.to_vec(),
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            t.build_node(0, n, 0);
        }
        t
    }

    fn coord(&self, idx: usize, axis: usize) -> f64 {
        self.points[idx * self.dim + axis]
    }

    fn build_node(&mut self, start: usize, end: usize, depth: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(KdNode::Leaf { start, end });
            return id;
        }
        let axis = depth % self.dim;
        let mid = start + (end - start) / 2;
        let (points, dim) = (&self.points, self.dim);
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a * dim + axis]
                .total_cmp(&points[b * dim + axis])
                .then(a.cmp(&b))
        });
        let value = self.coord(self.order[mid], axis);
        self.nodes.push(KdNode::Split {
            axis,
            value,
            left: 0,
            right: 0,
        });
        let left = self.build_node(start, mid, depth + 1);
        let right = self.build_node(mid, end, depth + 1);
        if let KdNode::Split {
            left: l, right: r, ..
        } = &mut self.nodes[id]
        {
            *l = left;
            *r = right;
        }
        id
    }

    /// The `k` nearest points as `(squared distance, index)`, ordered by
    /// distance then index.
    pub fn nearest(&self, q: &[f64], k: usize) -> Vec<(f64, usize)> {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if !self.nodes.is_empty() && k > 0 {
            self.search(0, q, k, &mut best);
        }
        best
    }

    fn search(&self, node: usize, q: &[f64], k: usize, best: &mut Vec<(f64, usize)>) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &p in &self.order[start..end] {
                    let d: f64 = (0..self.dim)
                        .map(|j| (self.coord(p, j) - q[j]).powi(2))
                        .sum();
                    let cand = (d, p);
                    if best.len() < k || lex_less(cand, best[best.len() - 1]) {
                        let pos = best.partition_point(|&b| lex_less(b, cand));
                        best.insert(pos, cand);
                        best.truncate(k);
                    }
                }
            }
            KdNode::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, k, best);
                // equal distances must still be visited for the index tie-break
                if best.len() < k || diff * diff <= best[best.len() - 1].0 {
                    self.search(far, q, k, best);
                }
            }
        }
    }
}

fn lex_less(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Routes points to clusters from labelled training points.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClusterAssigner {
    pub k_nn: usize,
    pub n_clusters: usize,
    labels: Vec<usize>,
    tree: KdTree,
}

impl ClusterAssigner {
    pub fn new(
        points: &[f64],
        dim: usize,
        labels: &[usize],
        n_clusters: usize,
        k_nn: usize,
    ) -> Self {
        assert!(k_nn >= 1, "k_nn must be at least 1");
        Self {
            k_nn,
            n_clusters,
            labels: labels.to_vec(),
            tree: KdTree::build(points, dim),
        }
    }

    /// Majority label among the `k_nn` nearest training points; among tied
    /// labels the one held by the nearest point wins.
    pub fn assign(&self, q: &[f64]) -> usize {
        let nn = self.tree.nearest(q, self.k_nn);
        let mut votes = vec![0usize; self.n_clusters];
        for &(_, p) in &nn {
            votes[self.labels[p]] += 1;
        }
        let top = *votes.iter().max().expect("clusters");
        nn.iter()
            .map(|&(_, p)| self.labels[p])
            .find(|&l| votes[l] == top)
            .expect("at least one neighbour")
    }
}

/// Index of the nearest centroid (row-major `k × dim`), lowest index on ties.
pub fn nearest_centroid(q: &[f64], centroids: &[f64], dim: usize) -> usize {
    let mut best = (0, f64::INFINITY);
    for (c, cent) in centroids.chunks_exact(dim).enumerate() {
        let d: f64 = cent.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum();
        if d < best.1 {
            best = (c, d);
        }
    }
    best.0
}
