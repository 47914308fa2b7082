//! Strided 2-D convolution kernels over channel-major planes.
//!
//! A convolution and its transpose are the same index relation read in
//! opposite directions: `big = small * stride + k - pad`. For an ordinary
//! convolution the output is the "small" side; for a transposed convolution
//! the input is. Weights are stored `[small_ch][big_ch][k][k]` in both cases,
//! which matches the usual `[out][in][k][k]` and `[in][out][k][k]` layouts.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Relation {
    pub small_ch: usize,
    pub big_ch: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub small: (usize, usize),
    pub big: (usize, usize),
}

impl Relation {
    /// Range of small indices `s` with `0 <= s * stride + koff - pad < big_len`.
    #[inline]
    fn range(&self, small_len: usize, big_len: usize, koff: usize) -> (usize, usize) {
        let st = self.stride as isize;
        let off = koff as isize - self.pad as isize;
        // smallest s with s*st + off >= 0
        let lo = if off >= 0 { 0 } else { ((-off) + st - 1) / st };
        // largest s with s*st + off <= big_len - 1
        let top = big_len as isize - 1 - off;
        let hi = if top < 0 { 0 } else { top / st + 1 };
        let lo = lo.clamp(0, small_len as isize) as usize;
        let hi = hi.clamp(0, small_len as isize) as usize;
        (lo, hi.max(lo))
    }

    pub fn weight_len(&self) -> usize {
        self.small_ch * self.big_ch * self.k * self.k
    }

    fn cols_rows(&self) -> usize {
        self.big_ch * self.k * self.k
    }

    fn small_len(&self) -> usize {
        self.small.0 * self.small.1
    }

    /// Unrolled patches: `cols[(b, kx, ky)][s] = big[b][s * stride + k - pad]`,
    /// zero outside the plane.
    fn im2col(&self, big: &[f64]) -> Vec<f64> {
        let (sw, sh) = self.small;
        let (bw, bh) = self.big;
        let (k, st, pad) = (self.k, self.stride, self.pad);
        let n = self.small_len();
        let mut cols = vec![0.0; self.cols_rows() * n];
        for b in 0..self.big_ch {
            let plane = &big[b * bw * bh..(b + 1) * bw * bh];
            for kx in 0..k {
                let (x0, x1) = self.range(sw, bw, kx);
                for ky in 0..k {
                    let (y0, y1) = self.range(sh, bh, ky);
                    let row = &mut cols[((b * k + kx) * k + ky) * n..][..n];
                    for sx in x0..x1 {
                        let base = (sx * st + kx - pad) * bh + y0 * st + ky - pad;
                        let dst = &mut row[sx * sh + y0..sx * sh + y1];
                        if st == 1 {
                            dst.copy_from_slice(&plane[base..base + (y1 - y0)]);
                        } else {
                            for (j, d) in dst.iter_mut().enumerate() {
                                *d = plane[base + j * st];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    /// Adjoint of [`Relation::im2col`]: accumulates patches back into `big`.
    fn col2im(&self, cols: &[f64], big: &mut [f64]) {
        let (sw, sh) = self.small;
        let (bw, bh) = self.big;
        let (k, st, pad) = (self.k, self.stride, self.pad);
        let n = self.small_len();
        for b in 0..self.big_ch {
            let plane = &mut big[b * bw * bh..(b + 1) * bw * bh];
            for kx in 0..k {
                let (x0, x1) = self.range(sw, bw, kx);
                for ky in 0..k {
                    let (y0, y1) = self.range(sh, bh, ky);
                    let row = &cols[((b * k + kx) * k + ky) * n..][..n];
                    for sx in x0..x1 {
                        let base = (sx * st + kx - pad) * bh + y0 * st + ky - pad;
                        let src = &row[sx * sh + y0..sx * sh + y1];
                        if st == 1 {
                            for (d, v) in plane[base..base + (y1 - y0)].iter_mut().zip(src) {
                                *d += v;
                            }
                        } else {
                            for (j, v) in src.iter().enumerate() {
                                plane[base + j * st] += v;
                            }
                        }
                    }
                }
            }
        }
    }

    /// `small[a] += sum_b w[a][b] (*) big[b]`
    pub fn gather(&self, w: &[f64], big: &[f64], small: &mut [f64]) {
        let cols = self.im2col(big);
        let (m, kk, n) = (self.small_ch, self.cols_rows(), self.small_len());
        // small (m x n) += w (m x kk) . cols (kk x n)
        gemm(m, kk, n, w, (kk, 1), &cols, (n, 1), small, (n, 1));
    }

    /// `big[b] += sum_a w[a][b] (*)^T small[a]`
    pub fn scatter(&self, w: &[f64], small: &[f64], big: &mut [f64]) {
        let (m, kk, n) = (self.small_ch, self.cols_rows(), self.small_len());
        let mut cols = vec![0.0; kk * n];
        // cols (kk x n) = w^T (kk x m) . small (m x n)
        gemm(kk, m, n, w, (1, kk), small, (n, 1), &mut cols, (n, 1));
        self.col2im(&cols, big);
    }

    /// `gw[a][b][kx][ky] += sum small[a][s] * big[b][s * stride + k - pad]`
    pub fn weight_grad(&self, small: &[f64], big: &[f64], gw: &mut [f64]) {
        let cols = self.im2col(big);
        let (m, kk, n) = (self.small_ch, self.cols_rows(), self.small_len());
        // gw (m x kk) += small (m x n) . cols^T (n x kk)
        gemm(m, n, kk, small, (n, 1), &cols, (1, n), gw, (kk, 1));
    }
}

/// `c += a . b` for an `m x k` by `k x n` product with explicit
/// (row, column) strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    let span = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs + 1;
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || a.len() >= span(m, k, rsa, csa) && b.len() >= span(k, n, rsb, csb));
    assert!(c.len() >= span(m, n, rsc, csc));
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            1.0,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}
