//! Strided sweeps and the batched matrix product used by elimination.

/// Calls `f(flat, offset)` for every multi-index of `shape` in row-major
/// order, where `offset = Σ index[k]·strides[k]`.
pub(crate) fn for_each_offset(shape: &[usize], strides: &[usize], mut f: impl FnMut(usize, usize)) {
    let total: usize = shape.iter().product();
    if total == 0 {
        return;
    }
    if shape.is_empty() {
        f(0, 0);
        return;
    }
    let last = shape.len() - 1;
    let (inner_len, inner_stride) = (shape[last], strides[last]);
    let mut index = vec![0usize; last];
    let mut base = 0usize;
    let mut flat = 0usize;
    loop {
        let mut off = base;
        for _ in 0..inner_len {
            f(flat, off);
            flat += 1;
            off += inner_stride;
        }
        // advance the outer odometer
        let mut k = last;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            index[k] += 1;
            base += strides[k];
            if index[k] < shape[k] {
                break;
            }
            base -= strides[k] * shape[k];
            index[k] = 0;
        }
    }
}

/// Strides of `vars` (a factor's axis order) measured inside `layout`;
/// variables of `layout` the factor does not read get stride 0.
pub(crate) fn strides_in(layout: &[usize], vars: &[usize], shape: &[usize]) -> Vec<usize> {
    let own = crate::tensor::strides_for(shape);
    layout
        .iter()
        .map(|v| vars.iter().position(|u| u == v).map_or(0, |k| own[k]))
        .collect()
}

/// Multiplies `factors` (each given as `(vars, shape, data)`) into a dense
/// tensor laid out over `layout` with the given axis lengths.
pub(crate) fn product_over(
    layout: &[usize],
    layout_shape: &[usize],
    factors: &[(&[usize], &[usize], &[f64])],
) -> Vec<f64> {
    let len: usize = layout_shape.iter().product();
    let mut out = vec![1.0; len];
    for (vars, shape, data) in factors {
        let strides = strides_in(layout, vars, shape);
        for_each_offset(layout_shape, &strides, |flat, off| out[flat] *= data[off]);
    }
    out
}

/// Sums `data` (laid out over `vars` with `shape`) into a tensor over
/// `out_vars`, scaling by `scale`.
pub(crate) fn sum_into(
    vars: &[usize],
    shape: &[usize],
    data: &[f64],
    out_vars: &[usize],
    out_shape: &[usize],
    scale: f64,
) -> Vec<f64> {
    let mut out = vec![0.0; out_shape.iter().product()];
    let strides = strides_in(vars, out_vars, out_shape);
    for_each_offset(shape, &strides, |flat, off| out[off] += data[flat]);
    if scale != 1.0 {
        out.iter_mut().for_each(|v| *v *= scale);
    }
    out
}

/// `C_b = alpha · A_b · B_b` for every batch index `b`, where `A` is laid out
/// `[batch, m, k]`, `B` is `[batch, k, n]` and `C` is `[batch, m, n]`.
pub(crate) fn batched_gemm(
    batch: usize,
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    b: &[f64],
) -> Vec<f64> {
    let mut c = vec![0.0; batch * m * n];
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    if m == 1 && n == 1 {
        for (t, out) in c.iter_mut().enumerate() {
            let dot: f64 = a[t * k..(t + 1) * k].iter().zip(&b[t * k..(t + 1) * k]).map(|(x, y)| x * y).sum();
            *out = alpha * dot;
        }
        return c;
    }
    for t in 0..batch {
        let a_t = &a[t * m * k..(t + 1) * m * k];
        let b_t = &b[t * k * n..(t + 1) * k * n];
        let c_t = &mut c[t * m * n..(t + 1) * m * n];
        // SAFETY: the slices have exactly the lengths implied by the
        // dimensions and row-major strides passed below.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                alpha,
                a_t.as_ptr(),
                k as isize,
                1,
                b_t.as_ptr(),
                n as isize,
                1,
                0.0,
                c_t.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_follow_strides() {
        let mut seen = Vec::new();
        for_each_offset(&[2, 3], &[1, 2], |flat, off| seen.push((flat, off)));
        assert_eq!(seen, vec![(0, 0), (1, 2), (2, 4), (3, 1), (4, 3), (5, 5)]);
        let mut count = 0;
        for_each_offset(&[], &[], |_, _| count += 1);
        assert_eq!(count, 1);
    }

    #[test]
    fn gemm_matches_loops() {
        let (m, k, n) = (3, 4, 2);
        let a: Vec<f64> = (0..2 * m * k).map(|v| v as f64 * 0.5 - 3.0).collect();
        let b: Vec<f64> = (0..2 * k * n).map(|v| (v % 5) as f64).collect();
        let c = batched_gemm(2, m, k, n, 0.25, &a, &b);
        for t in 0..2 {
            for i in 0..m {
                for j in 0..n {
                    let want: f64 = (0..k)
                        .map(|l| a[t * m * k + i * k + l] * b[t * k * n + l * n + j])
                        .sum::<f64>()
                        * 0.25;
                    assert!((c[t * m * n + i * n + j] - want).abs() < 1e-12);
                }
            }
        }
    }
}
