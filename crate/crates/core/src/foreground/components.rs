use ndarray::Array2;

/// 8-connected components of the `true` pixels, each as a list of
/// `(row, col)` in discovery order. Components are ordered by their first
/// pixel in raster order.
pub fn connected_components(mask: &Array2<bool>) -> Vec<Vec<(usize, usize)>> {
    let (rows, cols) = mask.dim();
    let mut seen = Array2::from_elem((rows, cols), false);
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for ((r, c), &on) in mask.indexed_iter() {
        if !on || seen[[r, c]] {
            continue;
        }
        let mut comp = Vec::new();
        seen[[r, c]] = true;
        stack.push((r, c));
        while let Some((y, x)) = stack.pop() {
            comp.push((y, x));
            for ny in y.saturating_sub(1)..=(y + 1).min(rows - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(cols - 1) {
                    if mask[[ny, nx]] && !seen[[ny, nx]] {
                        seen[[ny, nx]] = true;
                        stack.push((ny, nx));
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}
