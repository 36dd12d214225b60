//! Small register-blocked matrix products backing the convolutions. All
//! matrices are row-major; summation order is fixed, so results are
//! reproducible run to run.

use super::engine::Scalar;

const MR: usize = 4;
const NR: usize = 16;

/// `c += a * b` with `a: m x k`, `b: k x n`, `c: m x n`.
pub(crate) fn gemm_acc<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let n_main = n - n % NR;
    let mut panel = vec![[T::ZERO; NR]; k];
    for j0 in (0..n_main).step_by(NR) {
        for (p, dst) in panel.iter_mut().enumerate() {
            *dst = b[p * n + j0..p * n + j0 + NR].try_into().unwrap();
        }
        let mut i0 = 0;
        while i0 + MR <= m {
            block_nn::<T, MR>(i0, j0, k, n, a, &panel, c);
            i0 += MR;
        }
        while i0 < m {
            block_nn::<T, 1>(i0, j0, k, n, a, &panel, c);
            i0 += 1;
        }
    }
    for i in 0..m {
        for j in n_main..n {
            let mut acc = T::ZERO;
            for p in 0..k {
                acc += a[i * k + p] * b[p * n + j];
            }
            c[i * n + j] += acc;
        }
    }
}

#[inline(always)]
fn block_nn<T: Scalar, const R: usize>(
    i0: usize,
    j0: usize,
    k: usize,
    n: usize,
    a: &[T],
    panel: &[[T; NR]],
    c: &mut [T],
) {
    let mut acc = [[T::ZERO; NR]; R];
    let arows: [&[T]; R] = std::array::from_fn(|r| &a[(i0 + r) * k..(i0 + r + 1) * k]);
    for (p, brow) in panel.iter().enumerate() {
        for r in 0..R {
            let av = arows[r][p];
            for l in 0..NR {
                acc[r][l] += av * brow[l];
            }
        }
    }
    for r in 0..R {
        let crow = &mut c[(i0 + r) * n + j0..(i0 + r) * n + j0 + NR];
        for l in 0..NR {
            crow[l] += acc[r][l];
        }
    }
}

/// `c += a * b^T` with `a: m x n`, `b: k x n`, `c: m x k`. Evaluated as
/// `(b * a^T)^T` so the long `n` axis is the reduction of a packed product;
/// each finished dot product is added to `c` in `f64`.
pub(crate) fn gemm_abt_f64<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [f64]) {
    debug_assert!(a.len() >= m * n && b.len() >= k * n && c.len() >= m * k);
    let mut a_t = vec![T::ZERO; n * m];
    for i in 0..m {
        for j in 0..n {
            a_t[j * m + i] = a[i * n + j];
        }
    }
    let mut prod = vec![T::ZERO; k * m];
    gemm_acc(k, n, m, b, &a_t, &mut prod);
    for p in 0..k {
        for i in 0..m {
            c[i * k + p] += prod[p * m + i].to_f64();
        }
    }
}
