//! UMAP with Euclidean metric, exact nearest neighbours and PCA
//! initialization.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::pca::project2;
use super::sq_distances;

pub const N_NEIGHBORS: usize = 15;
pub const MIN_DIST: f64 = 0.1;
pub const SPREAD: f64 = 1.0;
pub const MIN_POINTS: usize = 3;
const N_EPOCHS: usize = 500;
const NEGATIVE_SAMPLE_RATE: f64 = 5.0;
const LEARNING_RATE: f64 = 1.0;
const GRAD_CLIP: f64 = 4.0;

/// Fits `1 / (1 + a x^(2b))` to the offset-exponential target curve by
/// Levenberg-Marquardt least squares.
pub fn fit_ab(spread: f64, min_dist: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if x < min_dist {
                1.0
            } else {
                (-(x - min_dist) / spread).exp()
            }
        })
        .collect();
    let residuals = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let r = 1.0 / (1.0 + a * x.powf(2.0 * b)) - y;
                r * r
            })
            .sum()
    };
    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut lambda = 1e-3;
    let mut cost = residuals(a, b);
    for _ in 0..500 {
        // normal equations of the 2-parameter problem
        let (mut jtj, mut jtr) = ([[0.0f64; 2]; 2], [0.0f64; 2]);
        for (&x, &y) in xs.iter().zip(&ys) {
            if x == 0.0 {
                continue;
            }
            let p = x.powf(2.0 * b);
            let den = 1.0 + a * p;
            let r = 1.0 / den - y;
            let da = -p / (den * den);
            let db = -a * p * 2.0 * x.ln() / (den * den);
            let g = [da, db];
            for u in 0..2 {
                jtr[u] += g[u] * r;
                for v in 0..2 {
                    jtj[u][v] += g[u] * g[v];
                }
            }
        }
        let m = [
            [jtj[0][0] * (1.0 + lambda), jtj[0][1]],
            [jtj[1][0], jtj[1][1] * (1.0 + lambda)],
        ];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det == 0.0 {
            break;
        }
        let step_a = -(m[1][1] * jtr[0] - m[0][1] * jtr[1]) / det;
        let step_b = -(m[0][0] * jtr[1] - m[1][0] * jtr[0]) / det;
        let (na, nb) = (a + step_a, b + step_b);
        let new_cost = if na > 0.0 && nb > 0.0 {
            residuals(na, nb)
        } else {
            f64::INFINITY
        };
        if new_cost < cost {
            let converged = (cost - new_cost) <= 1e-15 * cost.max(1e-300);
            a = na;
            b = nb;
            cost = new_cost;
            lambda /= 10.0;
            if converged {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    (a, b)
}

/// Neighbour indices and distances, self first, `k` per row.
fn knn(d2: &Array2<f64>, k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = d2.nrows();
    (0..n)
        .map(|i| {
            let mut row: Vec<(usize, f64)> =
                (0..n).map(|j| (j, d2[[i, j]].max(0.0).sqrt())).collect();
            row.sort_by(|x, y| {
                x.1.total_cmp(&y.1)
                    .then((x.0 != i).cmp(&(y.0 != i)))
                    .then(x.0.cmp(&y.0))
            });
            row.truncate(k);
            row
        })
        .collect()
}

/// Per-point `(rho, sigma)` such that the neighbour memberships sum to
/// `log2(k)`.
fn smooth_knn_dist(neighbours: &[Vec<(usize, f64)>], k: usize) -> Vec<(f64, f64)> {
    let target = (k as f64).log2();
    let all_mean = {
        let (s, c) = neighbours
            .iter()
            .flatten()
            .fold((0.0, 0usize), |(s, c), &(_, d)| (s + d, c + 1));
        s / c.max(1) as f64
    };
    neighbours
        .iter()
        .map(|row| {
            let rho = row
                .iter()
                .map(|&(_, d)| d)
                .find(|&d| d > 0.0)
                .unwrap_or(0.0);
            let (mut lo, mut hi, mut mid) = (0.0f64, f64::INFINITY, 1.0f64);
            for _ in 0..64 {
                let psum: f64 = row[1..]
                    .iter()
                    .map(|&(_, d)| {
                        let t = d - rho;
                        if t > 0.0 {
                            (-t / mid).exp()
                        } else {
                            1.0
                        }
                    })
                    .sum();
                if (psum - target).abs() < 1e-5 {
                    break;
                }
                if psum > target {
                    hi = mid;
                    mid = (lo + hi) / 2.0;
                } else {
                    lo = mid;
                    mid = if hi.is_finite() {
                        (lo + hi) / 2.0
                    } else {
                        mid * 2.0
                    };
                }
            }
            let row_mean = row.iter().map(|&(_, d)| d).sum::<f64>() / row.len() as f64;
            let floor = 1e-3 * if rho > 0.0 { row_mean } else { all_mean };
            (rho, mid.max(floor))
        })
        .collect()
}

/// Symmetric fuzzy graph `A + Aᵀ - A∘Aᵀ` as a dense matrix.
fn fuzzy_graph(neighbours: &[Vec<(usize, f64)>], params: &[(f64, f64)]) -> Array2<f64> {
    let n = neighbours.len();
    let mut a = Array2::zeros((n, n));
    for (i, row) in neighbours.iter().enumerate() {
        let (rho, sigma) = params[i];
        for &(j, d) in &row[1..] {
            if j == i {
                continue;
            }
            let t = d - rho;
            a[[i, j]] = if t <= 0.0 || sigma == 0.0 {
                1.0
            } else {
                (-t / sigma).exp()
            };
        }
    }
    let at = a.t().to_owned();
    &a + &at - &a * &at
}

fn initial_layout(x: &Array2<f64>, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut y = project2(x);
    for mut col in y.columns_mut() {
        let (lo, hi) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if hi > lo {
            col.mapv_inplace(|v| 10.0 * (v - lo) / (hi - lo));
        } else {
            col.fill(0.0);
        }
    }
    let noise = Normal::new(0.0, 1e-4).expect("valid sd");
    y.mapv_inplace(|v| v + noise.sample(rng));
    y
}

fn clip(v: f64) -> f64 {
    v.clamp(-GRAD_CLIP, GRAD_CLIP)
}

/// Two-dimensional UMAP of the rows of `x`; `None` below [`MIN_POINTS`].
///
/// Exactly repeated rows are embedded once and share coordinates; otherwise
/// negative sampling would push copies of one point apart.
pub fn umap(x: &Array2<f64>, seed: u64) -> Option<Array2<f64>> {
    let n = x.nrows();
    if n < MIN_POINTS {
        return None;
    }
    let mut first_of: Vec<usize> = Vec::with_capacity(n);
    let mut unique: Vec<usize> = Vec::new();
    for i in 0..n {
        let same = unique.iter().position(|&u| x.row(u) == x.row(i));
        match same {
            Some(k) => first_of.push(k),
            None => {
                first_of.push(unique.len());
                unique.push(i);
            }
        }
    }
    let ux = x.select(ndarray::Axis(0), &unique);
    let uy = match unique.len() {
        1 => Array2::zeros((1, 2)),
        2 => ndarray::array![[0.0, 0.0], [10.0, 0.0]],
        _ => layout(&ux, seed),
    };
    Some(Array2::from_shape_fn((n, 2), |(i, d)| uy[[first_of[i], d]]))
}

fn layout(x: &Array2<f64>, seed: u64) -> Array2<f64> {
    let n = x.nrows();
    let k = N_NEIGHBORS.min(n - 1);
    let d2 = sq_distances(x);
    let neighbours = knn(&d2, k);
    let params = smooth_knn_dist(&neighbours, k);
    let graph = fuzzy_graph(&neighbours, &params);
    let (a, b) = fit_ab(SPREAD, MIN_DIST);

    let max_w = graph.iter().copied().fold(0.0, f64::max);
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for ((i, j), &w) in graph.indexed_iter() {
        // edges too weak to be sampled once in the whole run are dropped
        if w > 0.0 && w >= max_w / N_EPOCHS as f64 {
            edges.push((i, j, max_w / w));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = initial_layout(x, &mut rng);
    let mut next_sample: Vec<f64> = edges.iter().map(|e| e.2).collect();
    let neg_every: Vec<f64> = edges.iter().map(|e| e.2 / NEGATIVE_SAMPLE_RATE).collect();
    let mut next_negative = neg_every.clone();

    for epoch in 0..N_EPOCHS {
        let alpha = LEARNING_RATE * (1.0 - epoch as f64 / N_EPOCHS as f64);
        let now = epoch as f64;
        for (e, &(i, j, per)) in edges.iter().enumerate() {
            if next_sample[e] > now {
                continue;
            }
            let (dx, dy) = (y[[i, 0]] - y[[j, 0]], y[[i, 1]] - y[[j, 1]]);
            let dist2 = dx * dx + dy * dy;
            let coeff = if dist2 > 0.0 {
                -2.0 * a * b * dist2.powf(b - 1.0) / (a * dist2.powf(b) + 1.0)
            } else {
                0.0
            };
            for (d, delta) in [(0, dx), (1, dy)] {
                let g = clip(coeff * delta) * alpha;
                y[[i, d]] += g;
                y[[j, d]] -= g;
            }
            next_sample[e] += per;

            let n_neg = ((now - next_negative[e]) / neg_every[e]).floor().max(0.0) as usize;
            for _ in 0..n_neg {
                let m = rng.gen_range(0..n);
                if m == i {
                    continue;
                }
                let (dx, dy) = (y[[i, 0]] - y[[m, 0]], y[[i, 1]] - y[[m, 1]]);
                let dist2 = dx * dx + dy * dy;
                if dist2 <= 0.0 {
                    continue;
                }
                let coeff = 2.0 * b / ((0.001 + dist2) * (a * dist2.powf(b) + 1.0));
                y[[i, 0]] += clip(coeff * dx) * alpha;
                y[[i, 1]] += clip(coeff * dy) * alpha;
            }
            next_negative[e] += n_neg as f64 * neg_every[e];
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_parameters() {
        let (a, b) = fit_ab(1.0, 0.1);
        // reference least-squares optimum of the same curve
        assert!((a - 1.5769).abs() < 2e-3, "{a}");
        assert!((b - 0.8951).abs() < 2e-3, "{b}");
    }

    #[test]
    fn memberships_sum_to_log2_k() {
        let x = Array2::from_shape_fn((20, 2), |(i, j)| ((i * 13 + j * 5) % 17) as f64);
        let k = 15;
        let nb = knn(&sq_distances(&x), k);
        let params = smooth_knn_dist(&nb, k);
        for (row, &(rho, sigma)) in nb.iter().zip(&params) {
            assert_eq!(row[0].1, 0.0);
            let s: f64 = row[1..]
                .iter()
                .map(|&(_, d)| (-(d - rho).max(0.0) / sigma).exp())
                .sum();
            assert!((s - (k as f64).log2()).abs() < 1e-3, "{s}");
        }
    }

    #[test]
    fn graph_is_symmetric_in_unit_interval() {
        let x = Array2::from_shape_fn((10, 3), |(i, j)| ((i * 7 + j) % 5) as f64 + i as f64 * 0.1);
        let nb = knn(&sq_distances(&x), 5);
        let g = fuzzy_graph(&nb, &smooth_knn_dist(&nb, 5));
        for ((i, j), &w) in g.indexed_iter() {
            assert!((0.0..=1.0).contains(&w));
            assert_eq!(w, g[[j, i]]);
        }
    }

    #[test]
    fn too_few_points() {
        assert!(umap(&Array2::zeros((2, 3)), 0).is_none());
        assert_eq!(umap(&Array2::zeros((4, 3)), 0), Some(Array2::zeros((4, 2))));
    }
}
