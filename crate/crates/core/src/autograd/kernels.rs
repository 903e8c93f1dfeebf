//! Dense kernels shared by the operators.

use crate::scalar::Scalar;

/// `c = a·b + beta·c` where `a` is logically `[m × k]` and `b` is `[k × n]`.
/// `ta`/`tb` say the operand is stored transposed (`[k × m]` / `[n × k]`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn matmul<S: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[S],
    ta: bool,
    b: &[S],
    tb: bool,
    beta: S,
    c: &mut [S],
) {
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    if k == 0 {
        if beta == S::zero() {
            c[..m * n].iter_mut().for_each(|v| *v = S::zero());
        } else {
            c[..m * n].iter_mut().for_each(|v| *v *= beta);
        }
        return;
    }
    S::gemm(
        m,
        k,
        n,
        S::one(),
        a,
        rsa,
        csa,
        b,
        rsb,
        csb,
        beta,
        c,
        n as isize,
        1,
    );
}

pub(crate) fn add_into<S: Scalar>(dst: &mut [S], src: &[S]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += *s;
    }
}

/// Swap the last two axes of `[a × b × c]`.
pub(crate) fn transpose12<S: Scalar>(x: &[S], a: usize, b: usize, c: usize, out: &mut [S]) {
    for i in 0..a {
        let src = &x[i * b * c..(i + 1) * b * c];
        let dst = &mut out[i * b * c..(i + 1) * b * c];
        for j in 0..b {
            for k in 0..c {
                dst[k * b + j] = src[j * c + k];
            }
        }
    }
}
