//! k-means: a deterministic two-cluster 1-D variant for pitch tracks and a
//! general k-means++ variant for feature vectors.

use rand::Rng;

const MAX_ITER: usize = 100;

/// Optimal two-cluster partition of scalars. In one dimension the optimum is
/// a split of the sorted values, so every split is scored and the lowest
/// within-cluster sum of squares wins (the lowest split on ties). Cluster 0
/// is the lower one. Returns (assignments, centroids).
pub fn two_means_1d(values: &[f64]) -> (Vec<u8>, [f64; 2]) {
    if values.is_empty() {
        return (Vec::new(), [f64::NAN; 2]);
    }
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // centering keeps the prefix sums well conditioned
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let total: f64 = sorted.iter().map(|v| v - mean).sum();
    let mut left = 0.0;
    let mut best: Option<(f64, usize)> = None;
    for s in 1..n {
        left += sorted[s - 1] - mean;
        if sorted[s - 1] == sorted[s] {
            continue;
        }
        let right = total - left;
        // SSE = const - (left²/s + right²/(n - s))
        let gain = left * left / s as f64 + right * right / (n - s) as f64;
        if best.is_none_or(|(g, _)| gain > g) {
            best = Some((gain, s));
        }
    }
    let Some((_, split)) = best else {
        return (vec![0; n], [sorted[0]; 2]);
    };
    let threshold = sorted[split];
    let assign: Vec<u8> = values.iter().map(|&v| u8::from(v >= threshold)).collect();
    let centroids = [
        sorted[..split].iter().sum::<f64>() / split as f64,
        sorted[split..].iter().sum::<f64>() / (n - split) as f64,
    ];
    (assign, centroids)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means with k-means++ seeding. Returns one cluster index per point;
/// clusters may end up empty when points coincide.
pub fn kmeans<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<usize> {
    let n = points.len();
    if n == 0 || k == 0 {
        return vec![0; n];
    }
    let k = k.min(n);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().zip(&chosen).filter(|(_, c)| !**c).map(|(d, _)| d).sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for i in 0..n {
                if chosen[i] || d2[i] <= 0.0 {
                    continue;
                }
                pick = Some(i);
                target -= d2[i];
                if target <= 0.0 {
                    break;
                }
            }
            pick.expect("positive mass")
        } else {
            // every remaining point coincides with a centroid
            let rest: Vec<usize> = (0..n).filter(|i| !chosen[*i]).collect();
            rest[rng.random_range(0..rest.len())]
        };
        chosen[pick] = true;
        centroids.push(points[pick].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[pick]));
        }
    }

    let dim = points[0].len();
    let mut assign = vec![usize::MAX; n];
    for _ in 0..MAX_ITER {
        let mut changed = false;
        for (a, p) in assign.iter_mut().zip(points) {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = sq_dist(p, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if *a != best {
                *a = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assign.iter().zip(points) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    assign
}
