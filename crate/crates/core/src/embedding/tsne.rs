//! Exact t-SNE with PCA initialization.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::pca::project2;
use super::sq_distances;

pub const MAX_PERPLEXITY: f64 = 30.0;
pub const MIN_POINTS: usize = 5;
const ITERATIONS: usize = 1000;
const EXAGGERATION_ITERATIONS: usize = 250;
const EXAGGERATION: f64 = 12.0;
const MIN_GAIN: f64 = 0.01;

pub fn perplexity_for(n: usize) -> f64 {
    MAX_PERPLEXITY.min((n as f64 - 1.0) / 3.0)
}

/// Row-conditional probabilities whose entropy matches `ln(perplexity)`.
fn conditional_p(d2: &Array2<f64>, perplexity: f64) -> Array2<f64> {
    let n = d2.nrows();
    let target = perplexity.ln();
    let mut p = Array2::zeros((n, n));
    for i in 0..n {
        let (mut beta, mut lo, mut hi) = (1.0f64, f64::NEG_INFINITY, f64::INFINITY);
        let mut row = vec![0.0; n];
        for _ in 0..100 {
            let mut sum = 0.0;
            for j in 0..n {
                row[j] = if j == i {
                    0.0
                } else {
                    (-d2[[i, j]] * beta).exp()
                };
                sum += row[j];
            }
            if sum == 0.0 {
                sum = 1e-8;
            }
            let mut weighted = 0.0;
            for j in 0..n {
                row[j] /= sum;
                weighted += d2[[i, j]] * row[j];
            }
            let entropy = sum.ln() + beta * weighted;
            let diff = entropy - target;
            if diff.abs() <= 1e-5 {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() {
                    (beta + hi) / 2.0
                } else {
                    beta * 2.0
                };
            } else {
                hi = beta;
                beta = if lo.is_finite() {
                    (beta + lo) / 2.0
                } else {
                    beta / 2.0
                };
            }
        }
        for j in 0..n {
            p[[i, j]] = row[j];
        }
    }
    p
}

fn initial_layout(x: &Array2<f64>, seed: u64) -> Array2<f64> {
    let n = x.nrows();
    let pcs = project2(x);
    let sd = {
        let c = pcs.column(0);
        let m = c.sum() / n as f64;
        (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    if sd > 0.0 {
        return pcs / sd * 1e-4;
    }
    let normal = Normal::new(0.0, 1e-4).expect("valid sd");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((n, 2), || normal.sample(&mut rng))
}

/// Two-dimensional t-SNE of the rows of `x`; `None` below [`MIN_POINTS`].
pub fn tsne(x: &Array2<f64>, seed: u64) -> Option<Array2<f64>> {
    let n = x.nrows();
    if n < MIN_POINTS {
        return None;
    }
    let d2 = sq_distances(x);
    let cond = conditional_p(&d2, perplexity_for(n));
    let mut p = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            p[[i, j]] = ((cond[[i, j]] + cond[[j, i]]) / (2.0 * n as f64)).max(1e-12);
        }
    }
    let lr = (n as f64 / EXAGGERATION / 4.0).max(50.0);
    let mut y = initial_layout(x, seed);
    let mut update = Array2::<f64>::zeros((n, 2));
    let mut gains = Array2::<f64>::ones((n, 2));
    let mut num = Array2::<f64>::zeros((n, n));
    let mut grad = Array2::<f64>::zeros((n, 2));
    for it in 0..ITERATIONS {
        let (exaggeration, momentum) = if it < EXAGGERATION_ITERATIONS {
            (EXAGGERATION, 0.5)
        } else {
            (1.0, 0.8)
        };
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = if i == j {
                    0.0
                } else {
                    let dx = y[[i, 0]] - y[[j, 0]];
                    let dy = y[[i, 1]] - y[[j, 1]];
                    1.0 / (1.0 + dx * dx + dy * dy)
                };
                num[[i, j]] = v;
                total += v;
            }
        }
        let total = total.max(f64::MIN_POSITIVE);
        grad.fill(0.0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = (num[[i, j]] / total).max(1e-12);
                let c = 4.0 * (exaggeration * p[[i, j]] - q) * num[[i, j]];
                grad[[i, 0]] += c * (y[[i, 0]] - y[[j, 0]]);
                grad[[i, 1]] += c * (y[[i, 1]] - y[[j, 1]]);
            }
        }
        for k in 0..n * 2 {
            let (i, d) = (k / 2, k % 2);
            let g = grad[[i, d]];
            let u = update[[i, d]];
            gains[[i, d]] = if (u > 0.0) != (g > 0.0) {
                gains[[i, d]] + 0.2
            } else {
                (gains[[i, d]] * 0.8).max(MIN_GAIN)
            };
            update[[i, d]] = momentum * u - lr * gains[[i, d]] * g;
            y[[i, d]] += update[[i, d]];
        }
    }
    Some(y)
}
