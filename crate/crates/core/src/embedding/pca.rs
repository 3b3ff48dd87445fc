use nalgebra::DMatrix;
use ndarray::Array2;

/// Projection of the centred rows of `x` on their two leading principal
/// axes. Each axis is signed so that its largest-magnitude loading is
/// positive, which keeps the result independent of the eigensolver's sign.
pub fn project2(x: &Array2<f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut out = Array2::zeros((n, 2));
    if n == 0 || d == 0 {
        return out;
    }
    let means: Vec<f64> = (0..d).map(|j| x.column(j).sum() / n as f64).collect();
    let centred = DMatrix::from_fn(n, d, |i, j| x[[i, j]] - means[j]);
    let cov = centred.transpose() * &centred / n as f64;
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    for (k, &axis) in order.iter().take(2).enumerate() {
        let v = eig.eigenvectors.column(axis);
        let pivot = (0..d)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
            .unwrap_or(0);
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            out[[i, k]] = sign * (0..d).map(|j| centred[(i, j)] * v[j]).sum::<f64>();
        }
    }
    out
}
