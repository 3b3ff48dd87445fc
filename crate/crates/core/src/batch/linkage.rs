//! Average-linkage agglomerative clustering.

use ndarray::Array2;

/// Merges clusters by smallest average distance until `k` remain. Returns a
/// label in `0..k` per point, numbered by each cluster's first member. Ties
/// merge the pair with the smallest indices.
pub fn average_linkage(dist: &Array2<f64>, k: usize) -> Vec<usize> {
    let n = dist.nrows();
    let k = k.clamp(1, n.max(1));
    let mut d = dist.clone();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut alive: Vec<bool> = vec![true; n];
    let mut clusters = n;
    while clusters > k {
        let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            for j in i + 1..n {
                if alive[j] && d[[i, j]] < best.0 {
                    best = (d[[i, j]], i, j);
                }
            }
        }
        let (_, a, b) = best;
        if a == usize::MAX {
            // NaN distances: merge the first two live clusters
            let live: Vec<usize> = (0..n).filter(|&i| alive[i]).take(2).collect();
            merge(&mut d, &mut members, &mut alive, live[0], live[1]);
        } else {
            merge(&mut d, &mut members, &mut alive, a, b);
        }
        clusters -= 1;
    }
    let mut labels = vec![0; n];
    let mut roots: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
    roots.sort_by_key(|&r| members[r].iter().copied().min().unwrap_or(r));
    for (label, &r) in roots.iter().enumerate() {
        for &m in &members[r] {
            labels[m] = label;
        }
    }
    labels
}

fn merge(d: &mut Array2<f64>, members: &mut [Vec<usize>], alive: &mut [bool], a: usize, b: usize) {
    let (na, nb) = (members[a].len() as f64, members[b].len() as f64);
    for x in 0..alive.len() {
        if alive[x] && x != a && x != b {
            let v = (na * d[[a, x]] + nb * d[[b, x]]) / (na + nb);
            d[[a, x]] = v;
            d[[x, a]] = v;
        }
    }
    let moved = std::mem::take(&mut members[b]);
    members[a].extend(moved);
    alive[b] = false;
}
