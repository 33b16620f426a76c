//! Gradient-boosted regression trees with squared loss.
//!
//! Trees grow level by level. Split search is exact: each feature's distinct
//! training values are enumerated in sorted order, and the threshold is the
//! midpoint between adjacent values present in the node.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug)]
pub struct GbtConfig {
    pub trees: usize,
    pub depth: usize,
    pub lr: f64,
    pub min_leaf: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    k = if row[feature] <= threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub base_score: f64,
    pub lr: f64,
    pub width: usize,
    pub trees: Vec<Tree>,
    /// Mean squared training error before boosting and after each round.
    pub train_loss: Vec<f64>,
}

impl TreeEnsemble {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.base_score + self.lr * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }
}

/// Per-feature sorted distinct values and each row's rank among them.
struct Binned {
    values: Vec<Vec<f64>>,
    /// `bins[f][r]`
    bins: Vec<Vec<u32>>,
}

impl Binned {
    fn new(x: &[f64], stride: usize, width: usize, n: usize) -> Self {
        let mut values = Vec::with_capacity(width);
        let mut bins = Vec::with_capacity(width);
        for f in 0..width {
            let mut v: Vec<f64> = (0..n).map(|r| x[r * stride + f]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            let b = (0..n)
                .map(|r| {
                    v.binary_search_by(|p| p.total_cmp(&x[r * stride + f]))
                        .expect("value present") as u32
                })
                .collect();
            values.push(v);
            bins.push(b);
        }
        Self { values, bins }
    }
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    /// Rows with bin ≤ this go left.
    split_bin: u32,
}

/// Best split of the rows in one node, or `None` when no split with positive
/// gain respects `min_leaf`.
fn best_split(
    binned: &Binned,
    rows: &[u32],
    grad: &[f64],
    min_leaf: usize,
    sums: &mut Vec<(f64, u32)>,
) -> Option<Candidate> {
    let n = rows.len();
    if n < 2 * min_leaf {
        return None;
    }
    let total: f64 = rows.iter().map(|&r| grad[r as usize]).sum();
    let parent = total * total / n as f64;
    let mut best: Option<Candidate> = None;
    for (f, (values, bins)) in binned.values.iter().zip(&binned.bins).enumerate() {
        if values.len() < 2 {
            continue;
        }
        sums.clear();
        sums.resize(values.len(), (0.0, 0));
        for &r in rows {
            let s = &mut sums[bins[r as usize] as usize];
            s.0 += grad[r as usize];
            s.1 += 1;
        }
        let (mut sl, mut nl) = (0.0, 0usize);
        let mut prev: Option<usize> = None;
        for (b, &(s, c)) in sums.iter().enumerate() {
            if c == 0 {
                continue;
            }
            if let Some(pb) = prev {
                // split between bin pb (left side end) and bin b
                let nr = n - nl;
                if nl >= min_leaf && nr >= min_leaf {
                    let sr = total - sl;
                    let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - parent;
                    if gain > 1e-12 && best.as_ref().is_none_or(|c| gain > c.gain) {
                        best = Some(Candidate {
                            gain,
                            feature: f,
                            threshold: 0.5 * (values[pb] + values[b]),
                            split_bin: pb as u32,
                        });
                    }
                }
            }
            sl += s;
            nl += c as usize;
            prev = Some(b);
        }
    }
    best
}

/// Fits `cfg.trees` rounds on the first `width` columns of row-major `x`.
pub fn fit_gbt(x: &[f64], stride: usize, width: usize, y: &[f64], cfg: &GbtConfig) -> TreeEnsemble {
    let n = y.len();
    let base_score = if n == 0 {
        0.0
    } else {
        y.iter().sum::<f64>() / n as f64
    };
    let mut pred = vec![base_score; n];
    let mse = |pred: &[f64]| -> f64 {
        if n == 0 {
            0.0
        } else {
            y.iter()
                .zip(pred)
                .map(|(t, p)| (t - p).powi(2))
                .sum::<f64>()
                / n as f64
        }
    };
    let mut ensemble = TreeEnsemble {
        base_score,
        lr: cfg.lr,
        width,
        trees: Vec::new(),
        train_loss: vec![mse(&pred)],
    };
    if n < 2 * cfg.min_leaf {
        return ensemble;
    }
    let binned = Binned::new(x, stride, width, n);
    let mut grad = vec![0.0; n];
    let mut sums = Vec::new();
    for _ in 0..cfg.trees {
        for r in 0..n {
            grad[r] = y[r] - pred[r];
        }
        let mut nodes = Vec::new();
        // (node index, member rows)
        let mut frontier: Vec<(usize, Vec<u32>)> = vec![(0, (0..n as u32).collect())];
        nodes.push(Node::Leaf(0.0));
        let mut leaves: Vec<(usize, Vec<u32>)> = Vec::new();
        for _level in 0..cfg.depth {
            let mut next = Vec::new();
            for (id, rows) in frontier {
                match best_split(&binned, &rows, &grad, cfg.min_leaf, &mut sums) {
                    Some(c) => {
                        let bins = &binned.bins[c.feature];
                        let (l, r): (Vec<u32>, Vec<u32>) =
                            rows.iter().partition(|&&k| bins[k as usize] <= c.split_bin);
                        let (li, ri) = (nodes.len(), nodes.len() + 1);
                        nodes.push(Node::Leaf(0.0));
                        nodes.push(Node::Leaf(0.0));
                        nodes[id] = Node::Split {
                            feature: c.feature,
                            threshold: c.threshold,
                            left: li,
                            right: ri,
                        };
                        next.push((li, l));
                        next.push((ri, r));
                    }
                    None => leaves.push((id, rows)),
                }
            }
            frontier = next;
            if frontier.is_empty() {
                break;
            }
        }
        leaves.extend(frontier);
        for (id, rows) in &leaves {
            let v = rows.iter().map(|&r| grad[r as usize]).sum::<f64>() / rows.len() as f64;
            nodes[*id] = Node::Leaf(v);
            for &r in rows {
                pred[r as usize] += cfg.lr * v;
            }
        }
        ensemble.trees.push(Tree { nodes });
        ensemble.train_loss.push(mse(&pred));
    }
    ensemble
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(trees: usize, depth: usize, lr: f64, min_leaf: usize) -> GbtConfig {
        GbtConfig {
            trees,
            depth,
            lr,
            min_leaf,
        }
    }

    #[test]
    fn constant_targets() {
        let x: Vec<f64> = (0..50).map(|k| k as f64).collect();
        let y = vec![3.5; 50];
        let m = fit_gbt(&x, 1, 1, &y, &cfg(5, 3, 0.1, 2));
        for v in [-10.0, 0.0, 25.0, 1e6] {
            assert_eq!(m.predict(&[v]), 3.5);
        }
    }

    #[test]
    fn single_stump_fits_binary_split_exactly() {
        let x: Vec<f64> = (0..40).map(|k| if k < 15 { 0.0 } else { 1.0 }).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| if v == 0.0 { 1.0 } else { 5.0 })
            .collect();
        let m = fit_gbt(&x, 1, 1, &y, &cfg(1, 1, 1.0, 1));
        let mae: f64 = x
            .iter()
            .zip(&y)
            .map(|(&v, &t)| (m.predict(&[v]) - t).abs())
            .sum::<f64>()
            / 40.0;
        assert!(mae < 1e-12);
        // brute force: the only candidate threshold reachable on this feature
        match &m.trees[0].nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => assert_eq!((*feature, *threshold), (0, 0.5)),
            n => panic!("expected a split, got {n:?}"),
        }
    }

    #[test]
    fn split_matches_brute_force_search() {
        // 2 features, choose the best threshold over all midpoints by direct SSE
        let rows: Vec<[f64; 2]> = (0..30)
            .map(|k| [((k * 7) % 11) as f64, ((k * 3) % 5) as f64])
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| if r[0] > 5.0 { 4.0 } else { 2.0 } + 0.1 * r[1])
            .collect();
        let x: Vec<f64> = rows.iter().flatten().copied().collect();
        let m = fit_gbt(&x, 2, 2, &y, &cfg(1, 1, 1.0, 3));
        let sse = |f: usize, t: f64| -> Option<f64> {
            let (l, r): (Vec<f64>, Vec<f64>) = {
                let mut l = Vec::new();
                let mut r = Vec::new();
                for (row, &v) in rows.iter().zip(&y) {
                    if row[f] <= t {
                        l.push(v)
                    } else {
                        r.push(v)
                    }
                }
                (l, r)
            };
            if l.len() < 3 || r.len() < 3 {
                return None;
            }
            let s = |v: &[f64]| {
                let m = v.iter().sum::<f64>() / v.len() as f64;
                v.iter().map(|x| (x - m).powi(2)).sum::<f64>()
            };
            Some(s(&l) + s(&r))
        };
        let mut best = (f64::INFINITY, 0, 0.0);
        for f in 0..2 {
            let mut vals: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = 0.5 * (w[0] + w[1]);
                if let Some(e) = sse(f, t) {
                    if e < best.0 - 1e-12 {
                        best = (e, f, t);
                    }
                }
            }
        }
        match &m.trees[0].nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => assert_eq!((*feature, *threshold), (best.1, best.2)),
            n => panic!("expected a split, got {n:?}"),
        }
    }

    #[test]
    fn too_few_rows_is_constant() {
        let m = fit_gbt(
            &[1.0, 2.0, 3.0],
            1,
            1,
            &[1.0, 2.0, 3.0],
            &cfg(10, 3, 0.1, 2),
        );
        assert!(m.trees.is_empty());
        assert_eq!(m.predict(&[100.0]), 2.0);
    }

    proptest! {
        #[test]
        fn loss_non_increasing_and_deterministic(
            data in prop::collection::vec((0.0f64..10.0, 0u8..3, 1.0f64..5.0), 10..80),
            lr in 0.05f64..1.0,
        ) {
            let x: Vec<f64> = data.iter().flat_map(|d| [d.0, d.1 as f64]).collect();
            let y: Vec<f64> = data.iter().map(|d| d.2).collect();
            let c = cfg(8, 3, lr, 2);
            let m = fit_gbt(&x, 2, 2, &y, &c);
            for w in m.train_loss.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
            prop_assert_eq!(&m, &fit_gbt(&x, 2, 2, &y, &c));
        }
    }
}
