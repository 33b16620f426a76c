use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    pub dim: usize,
    /// Row-major `k × dim`.
    pub centroids: Vec<f64>,
    pub labels: Vec<usize>,
    pub wss: f64,
    /// WSS after every centroid update.
    pub wss_history: Vec<f64>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct KMeansConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub n_init: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol: 1e-6,
            n_init: 10,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding. Falls back to sampling with replacement plus a tiny
/// jitter when fewer than `k` distinct points exist.
fn plus_plus(points: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = points.len() / dim;
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.gen_range(0..n);
    centroids.extend_from_slice(&points[first * dim..(first + 1) * dim]);
    let mut d2: Vec<f64> = points
        .chunks_exact(dim)
        .map(|p| sq_dist(p, &centroids[..dim]))
        .collect();
    while centroids.len() < k * dim {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            log::warn!(
                "k-means++ found only {} distinct seeds for k={k}; sampling with replacement",
                centroids.len() / dim
            );
            while centroids.len() < k * dim {
                let p = rng.gen_range(0..n);
                for j in 0..dim {
                    centroids.push(points[p * dim + j] + 1e-9 * (rng.gen::<f64>() - 0.5));
                }
            }
            break;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut pick = n - 1;
        for (p, &w) in d2.iter().enumerate() {
            if target < w {
                pick = p;
                break;
            }
            target -= w;
        }
        // never re-pick a zero-distance point due to rounding at the tail
        if d2[pick] == 0.0 {
            pick = d2.iter().rposition(|&w| w > 0.0).expect("total > 0");
        }
        let c = &points[pick * dim..(pick + 1) * dim];
        centroids.extend_from_slice(c);
        for (w, p) in d2.iter_mut().zip(points.chunks_exact(dim)) {
            *w = w.min(sq_dist(p, c));
        }
    }
    centroids
}

fn update_centroids(
    points: &[f64],
    dim: usize,
    labels: &[usize],
    k: usize,
) -> (Vec<f64>, Vec<usize>) {
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.chunks_exact(dim).zip(labels) {
        counts[l] += 1;
        for j in 0..dim {
            sums[l * dim + j] += p[j];
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for j in 0..dim {
                sums[c * dim + j] /= counts[c] as f64;
            }
        }
    }
    (sums, counts)
}

fn wss_of(points: &[f64], dim: usize, labels: &[usize], centroids: &[f64]) -> f64 {
    points
        .chunks_exact(dim)
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l * dim..(l + 1) * dim]))
        .sum()
}

/// Lloyd iterations from `init`. Empty clusters take the point farthest from
/// its centroid among clusters with at least two members.
pub fn lloyd(
    points: &[f64],
    dim: usize,
    init: Vec<f64>,
    cfg: &KMeansConfig,
    seed: u64,
) -> KMeansModel {
    let k = init.len() / dim;
    let mut centroids = init;
    let mut labels = vec![usize::MAX; points.len() / dim];
    let mut history = Vec::new();
    for _ in 0..cfg.max_iter.max(1) {
        let mut changed = false;
        for (p, l) in points.chunks_exact(dim).zip(labels.iter_mut()) {
            let (c, _) = nearest(p, &centroids, dim);
            if *l != c {
                *l = c;
                changed = true;
            }
        }
        let (mut next, mut counts) = update_centroids(points, dim, &labels, k);
        while let Some(empty) = counts.iter().position(|&c| c == 0) {
            let far = points
                .chunks_exact(dim)
                .enumerate()
                .filter(|&(r, _)| counts[labels[r]] >= 2)
                .map(|(r, p)| (r, sq_dist(p, &next[labels[r] * dim..(labels[r] + 1) * dim])))
                .fold(None, |best: Option<(usize, f64)>, (r, d)| match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((r, d)),
                });
            let Some((r, _)) = far else { break };
            labels[r] = empty;
            changed = true;
            let recomputed = update_centroids(points, dim, &labels, k);
            next = recomputed.0;
            counts = recomputed.1;
        }
        let shift = centroids
            .chunks_exact(dim)
            .zip(next.chunks_exact(dim))
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        // keep seeded positions for clusters that stayed empty
        for c in 0..k {
            if counts[c] == 0 {
                next[c * dim..(c + 1) * dim].copy_from_slice(&centroids[c * dim..(c + 1) * dim]);
            }
        }
        centroids = next;
        history.push(wss_of(points, dim, &labels, &centroids));
        if !changed || shift < cfg.tol {
            break;
        }
    }
    KMeansModel {
        k,
        dim,
        wss: *history.last().expect("at least one iteration"),
        centroids,
        labels,
        wss_history: history,
        seed,
    }
}

/// Best of `cfg.n_init` k-means++ restarts; `warm` (a solution with fewer
/// clusters) adds one extra start from its centroids plus the farthest point.
pub fn fit_kmeans(
    points: &[f64],
    dim: usize,
    k: usize,
    seed: u64,
    cfg: &KMeansConfig,
    warm: Option<&KMeansModel>,
) -> KMeansModel {
    let n = points.len() / dim;
    assert!(k >= 1 && n >= k, "k-means needs n ≥ k ≥ 1 (n={n}, k={k})");
    let mut best: Option<KMeansModel> = None;
    let mut consider = |m: KMeansModel| {
        if best.as_ref().is_none_or(|b| m.wss < b.wss) {
            best = Some(m);
        }
    };
    for restart in 0..cfg.n_init.max(1) {
        let s = derive_seed(seed, restart as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let init = plus_plus(points, dim, k, &mut rng);
        consider(lloyd(points, dim, init, cfg, seed));
    }
    if let Some(w) = warm.filter(|w| w.k < k && w.dim == dim) {
        let mut init = w.centroids.clone();
        while init.len() < k * dim {
            let (far, _) = points
                .chunks_exact(dim)
                .enumerate()
                .map(|(r, p)| (r, nearest(p, &init, dim).1))
                .fold((0, -1.0), |b, x| if x.1 > b.1 { x } else { b });
            init.extend_from_slice(&points[far * dim..(far + 1) * dim]);
        }
        consider(lloyd(points, dim, init, cfg, seed));
    }
    best.expect("at least one restart")
}

/// Best-of-restarts WSS for every `k` in `k_lo..=k_hi`, each `k` also warm
/// started from the previous solution so the curve is non-increasing.
pub fn wss_curve(
    points: &[f64],
    dim: usize,
    k_lo: usize,
    k_hi: usize,
    seed: u64,
    cfg: &KMeansConfig,
) -> Vec<KMeansModel> {
    let mut out: Vec<KMeansModel> = Vec::new();
    for k in k_lo..=k_hi {
        let m = fit_kmeans(points, dim, k, derive_seed(seed, k as u64), cfg, out.last());
        out.push(m);
    }
    out
}

/// Interior `k` maximizing `WSS(k−1) − 2·WSS(k) + WSS(k+1)`; ties go to the smallest `k`.
pub fn select_k_elbow(curve: &[(usize, f64)]) -> Option<usize> {
    if curve.len() < 3 {
        return None;
    }
    let mut best: Option<(usize, f64)> = None;
    for w in curve.windows(3) {
        let d2 = w[0].1 - 2.0 * w[1].1 + w[2].1;
        if best.is_none_or(|(_, b)| d2 > b) {
            best = Some((w[1].0, d2));
        }
    }
    best.map(|b| b.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn blobs(centers: &[[f64; 3]], per: usize, spread: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, spread).unwrap();
        let mut out = Vec::new();
        for c in centers {
            for _ in 0..per {
                for x in c {
                    out.push(x + noise.sample(&mut rng));
                }
            }
        }
        out
    }

    #[test]
    fn two_blobs_by_hand() {
        let pts = [
            0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 10.0, 10.0, 0.0, 10.0, 12.0, 0.0,
        ];
        let m = fit_kmeans(&pts, 3, 2, 1, &KMeansConfig::default(), None);
        let mut cs: Vec<Vec<f64>> = m.centroids.chunks(3).map(<[f64]>::to_vec).collect();
        cs.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(cs, vec![vec![1.0, 0.0, 0.0], vec![10.0, 11.0, 0.0]]);
        assert!((m.wss - 4.0).abs() < 1e-12);
        assert_eq!(m.labels[0], m.labels[1]);
        assert_ne!(m.labels[1], m.labels[2]);
    }

    #[test]
    fn k_equals_n_and_repeated_points() {
        let pts = blobs(&[[0.0; 3], [5.0; 3]], 4, 1.0, 2);
        let m = fit_kmeans(&pts, 3, 8, 4, &KMeansConfig::default(), None);
        assert!(m.wss.abs() < 1e-20);
        let same = vec![1.5; 30];
        for k in 1..=4 {
            let m = fit_kmeans(&same, 3, k, 0, &KMeansConfig::default(), None);
            assert!(m.wss < 1e-12, "k={k}: {}", m.wss);
            assert!(m.labels.iter().all(|&l| l < k));
        }
    }

    #[test]
    fn lloyd_descends_and_centroids_are_member_means() {
        let pts = blobs(
            &[[0.0; 3], [3.0, 0.0, 0.0], [0.0, 3.0, 1.0], [2.0, 2.0, 2.0]],
            60,
            1.0,
            8,
        );
        for seed in 0..5 {
            let m = fit_kmeans(&pts, 3, 6, seed, &KMeansConfig::default(), None);
            for w in m.wss_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{:?}", m.wss_history);
            }
            let (means, counts) = update_centroids(&pts, 3, &m.labels, 6);
            assert!(counts.iter().all(|&c| c > 0));
            for (a, b) in means.iter().zip(&m.centroids) {
                assert!((a - b).abs() < 1e-9);
            }
            assert_eq!(
                m,
                fit_kmeans(&pts, 3, 6, seed, &KMeansConfig::default(), None)
            );
        }
    }

    #[test]
    fn curve_is_non_increasing_with_knee_at_three() {
        let pts = blobs(&[[0.0; 3], [10.0, 0.0, 0.0], [0.0, 10.0, 0.0]], 50, 0.5, 13);
        let models = wss_curve(&pts, 3, 1, 7, 21, &KMeansConfig::default());
        let curve: Vec<(usize, f64)> = models.iter().map(|m| (m.k, m.wss)).collect();
        for w in curve.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-9, "{curve:?}");
        }
        assert_eq!(select_k_elbow(&curve), Some(3));
    }

    #[test]
    fn elbow_examples() {
        assert_eq!(
            select_k_elbow(&[(1, 100.0), (2, 40.0), (3, 35.0), (4, 33.0)]),
            Some(2)
        );
        assert_eq!(
            select_k_elbow(&[(2, 10.0), (3, 8.0), (4, 6.0), (5, 4.0)]),
            Some(3)
        );
        assert_eq!(select_k_elbow(&[(1, 1.0), (2, 0.5)]), None);
    }
}
