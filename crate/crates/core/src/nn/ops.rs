//! Batched tensor kernels with hand-written backward passes.
//!
//! Activations are row-major `[batch, features]`; images are NHWC.

use num_traits::Float;

/// Element type of the network: `f32` for training and inference, `f64`
/// for gradient checking.
pub trait Scalar:
    Float + Default + Send + Sync + std::fmt::Debug + std::iter::Sum + 'static
{
    /// `c = alpha * a @ b + beta * c` with arbitrary strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );

    fn from_f(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
                rsc: isize,
                csc: isize,
            ) {
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: callers pass slices covering the strided extents;
                // the checks below guard the furthest element touched.
                assert!(
                    k == 0 || a.len() as isize > (m as isize - 1) * rsa + (k as isize - 1) * csa
                );
                assert!(
                    k == 0 || b.len() as isize > (k as isize - 1) * rsb + (n as isize - 1) * csb
                );
                assert!(c.len() as isize > (m as isize - 1) * rsc + (n as isize - 1) * csc);
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    )
                }
            }

            fn from_f(v: f64) -> Self {
                v as $t
            }

            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

/// Fully connected layer: `y = x @ W + b`, `W` stored `[inp][out]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dense {
    pub inp: usize,
    pub out: usize,
    pub offset: usize,
}

impl Dense {
    pub fn param_count(&self) -> usize {
        self.inp * self.out + self.out
    }

    fn split<'a, S>(&self, p: &'a [S]) -> (&'a [S], &'a [S]) {
        let w = &p[self.offset..self.offset + self.inp * self.out];
        let b = &p[self.offset + self.inp * self.out..self.offset + self.param_count()];
        (w, b)
    }

    pub fn forward<S: Scalar>(&self, p: &[S], x: &[S], batch: usize) -> Vec<S> {
        debug_assert_eq!(x.len(), batch * self.inp);
        let (w, b) = self.split(p);
        let mut y = Vec::with_capacity(batch * self.out);
        for _ in 0..batch {
            y.extend_from_slice(b);
        }
        S::gemm(
            batch,
            self.inp,
            self.out,
            S::one(),
            x,
            self.inp as isize,
            1,
            w,
            self.out as isize,
            1,
            S::one(),
            &mut y,
            self.out as isize,
            1,
        );
        y
    }

    /// Accumulate parameter gradients into `g`; return `dx` if requested.
    pub fn backward<S: Scalar>(
        &self,
        p: &[S],
        g: &mut [S],
        x: &[S],
        dy: &[S],
        batch: usize,
        want_dx: bool,
    ) -> Option<Vec<S>> {
        let (w, _) = self.split(p);
        let (gw, gb) =
            g[self.offset..self.offset + self.param_count()].split_at_mut(self.inp * self.out);
        // dW += x^T dy
        S::gemm(
            self.inp,
            batch,
            self.out,
            S::one(),
            x,
            1,
            self.inp as isize,
            dy,
            self.out as isize,
            1,
            S::one(),
            gw,
            self.out as isize,
            1,
        );
        for row in dy.chunks_exact(self.out) {
            for (a, &d) in gb.iter_mut().zip(row) {
                *a = *a + d;
            }
        }
        want_dx.then(|| {
            let mut dx = vec![S::zero(); batch * self.inp];
            // dx = dy W^T
            S::gemm(
                batch,
                self.out,
                self.inp,
                S::one(),
                dy,
                self.out as isize,
                1,
                w,
                1,
                self.out as isize,
                S::zero(),
                &mut dx,
                self.inp as isize,
                1,
            );
            dx
        })
    }
}

/// `y += a * x`.
#[inline]
fn axpy<S: Scalar>(y: &mut [S], a: S, x: &[S]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

/// Dot product with eight independent partial sums (vectorizes without
/// reassociation).
#[inline]
fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = [S::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] = acc[i] + x[i] * y[i];
        }
    }
    let mut s = S::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        s = s + x * y;
    }
    acc.iter().fold(s, |t, &v| t + v)
}

/// 3x3 convolution with zero padding 1 over planar `[batch, c, n, n]`
/// images. Weights are stored `[cout][cin][3][3]`, then `cout` biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv3 {
    pub cin: usize,
    pub cout: usize,
    pub stride: usize,
    /// Input height and width (square).
    pub size: usize,
    pub offset: usize,
}

impl Conv3 {
    pub fn param_count(&self) -> usize {
        9 * self.cin * self.cout + self.cout
    }

    pub fn out_size(&self) -> usize {
        self.size.div_ceil(self.stride)
    }

    /// Output indices whose tap `k` lands inside the input.
    fn valid(&self, k: usize) -> (usize, usize) {
        let (s, n, o) = (self.stride, self.size, self.out_size());
        let lo = if k == 0 { 1usize.div_ceil(s) } else { 0 };
        let hi = ((n + 1 - k - 1) / s + 1).min(o);
        (lo, hi.max(lo))
    }

    /// Column phases of a strided input row: phase `r` holds columns
    /// `r, r + s, r + 2s, ...`. Returns `(offset in plane, width)` per phase.
    fn phases(&self) -> Vec<(usize, usize)> {
        let (n, s) = (self.size, self.stride);
        let mut off = 0;
        (0..s)
            .map(|r| {
                let w = (n - r).div_ceil(s);
                let out = (off, w);
                off += n * w;
                out
            })
            .collect()
    }

    /// Rearrange every plane into its column phases so that each tap reads
    /// a contiguous run.
    fn phase_split<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        if self.stride == 1 {
            return x.to_vec();
        }
        let (n, s) = (self.size, self.stride);
        let ph = self.phases();
        let mut y = vec![S::zero(); x.len()];
        for (src, dst) in x.chunks_exact(n * n).zip(y.chunks_exact_mut(n * n)) {
            for (r, &(off, w)) in ph.iter().enumerate() {
                for iy in 0..n {
                    for j in 0..w {
                        dst[off + iy * w + j] = src[iy * n + j * s + r];
                    }
                }
            }
        }
        y
    }

    fn phase_merge<S: Scalar>(&self, y: &[S]) -> Vec<S> {
        if self.stride == 1 {
            return y.to_vec();
        }
        let (n, s) = (self.size, self.stride);
        let ph = self.phases();
        let mut x = vec![S::zero(); y.len()];
        for (src, dst) in y.chunks_exact(n * n).zip(x.chunks_exact_mut(n * n)) {
            for (r, &(off, w)) in ph.iter().enumerate() {
                for iy in 0..n {
                    for j in 0..w {
                        dst[iy * n + j * s + r] = src[off + iy * w + j];
                    }
                }
            }
        }
        x
    }

    /// For tap `kx`: output column range, phase offset and width, and the
    /// phase column read by the first output column.
    fn taps(&self) -> [(usize, usize, usize, usize, usize); 3] {
        let ph = self.phases();
        std::array::from_fn(|kx| {
            let (lo, hi) = self.valid(kx);
            let d = kx as isize - 1;
            let (q, r) = (
                d.div_euclid(self.stride as isize),
                d.rem_euclid(self.stride as isize) as usize,
            );
            let (off, w) = ph[r];
            (lo, hi, off, w, (lo as isize + q) as usize)
        })
    }

    /// Visit every (output row, input row) pair of one tap.
    /// Zero-pad every plane to `(n + 2)^2`.
    fn pad<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let (n, m) = (self.size, self.size + 2);
        let mut y = vec![S::zero(); x.len() / (n * n) * m * m];
        for (src, dst) in x.chunks_exact(n * n).zip(y.chunks_exact_mut(m * m)) {
            for r in 0..n {
                dst[(r + 1) * m + 1..(r + 1) * m + 1 + n].copy_from_slice(&src[r * n..(r + 1) * n]);
            }
        }
        y
    }

    // Stride 1: outputs are computed on rows of width n + 2 so every tap is
    // one flat shifted axpy; the two trailing columns of each row are junk.
    fn wide_len(&self) -> usize {
        (self.size - 1) * (self.size + 2) + self.size
    }

    fn forward_padded<S: Scalar>(&self, p: &[S], x: &[S], batch: usize) -> Vec<S> {
        let (n, m, len) = (self.size, self.size + 2, self.wide_len());
        let xp = self.pad(x);
        let bias = self.offset + 9 * self.cin * self.cout;
        let mut y = vec![S::zero(); batch * self.cout * n * n];
        let mut wide = vec![S::zero(); len];
        for b in 0..batch {
            for co in 0..self.cout {
                wide.fill(p[bias + co]);
                for ci in 0..self.cin {
                    let inp = &xp[(b * self.cin + ci) * m * m..(b * self.cin + ci + 1) * m * m];
                    let wbase = self.offset + (co * self.cin + ci) * 9;
                    for k in 0..9 {
                        let shift = (k / 3) * m + k % 3;
                        axpy(&mut wide, p[wbase + k], &inp[shift..shift + len]);
                    }
                }
                let out = &mut y[(b * self.cout + co) * n * n..(b * self.cout + co + 1) * n * n];
                for r in 0..n {
                    out[r * n..(r + 1) * n].copy_from_slice(&wide[r * m..r * m + n]);
                }
            }
        }
        y
    }

    fn backward_padded<S: Scalar>(
        &self,
        p: &[S],
        g: &mut [S],
        x: &[S],
        dy: &[S],
        batch: usize,
        want_dx: bool,
    ) -> Option<Vec<S>> {
        let (n, m, len) = (self.size, self.size + 2, self.wide_len());
        let xp = self.pad(x);
        let bias = self.offset + 9 * self.cin * self.cout;
        let mut dxp = if want_dx {
            vec![S::zero(); xp.len()]
        } else {
            Vec::new()
        };
        let mut wide = vec![S::zero(); len];
        for b in 0..batch {
            for co in 0..self.cout {
                let d = &dy[(b * self.cout + co) * n * n..(b * self.cout + co + 1) * n * n];
                g[bias + co] = d.iter().fold(g[bias + co], |a, &v| a + v);
                for r in 0..n {
                    wide[r * m..r * m + n].copy_from_slice(&d[r * n..(r + 1) * n]);
                }
                for ci in 0..self.cin {
                    let base = (b * self.cin + ci) * m * m;
                    let wbase = self.offset + (co * self.cin + ci) * 9;
                    for k in 0..9 {
                        let shift = base + (k / 3) * m + k % 3;
                        g[wbase + k] = g[wbase + k] + dot(&wide, &xp[shift..shift + len]);
                        if want_dx {
                            axpy(&mut dxp[shift..shift + len], p[wbase + k], &wide);
                        }
                    }
                }
            }
        }
        want_dx.then(|| self.crop(&dxp))
    }

    /// Kernel row (or column) index of the 2x2 sub-pixel kernel that tap `k`
    /// folds into, for output phase `a`.
    fn fold(a: usize, k: usize) -> usize {
        (a + k).div_ceil(2) - a
    }

    /// Fold the 3x3 kernel of `(co, ci)` into four 2x2 kernels, one per
    /// output phase `(a, b)`, acting on the input before upsampling.
    fn sub_pixel<S: Scalar>(&self, p: &[S], co: usize, ci: usize) -> [[S; 4]; 4] {
        let w = &p[self.offset + (co * self.cin + ci) * 9..][..9];
        let mut k = [[S::zero(); 4]; 4];
        for (ph, kp) in k.iter_mut().enumerate() {
            let (a, b) = (ph / 2, ph % 2);
            for ky in 0..3 {
                for kx in 0..3 {
                    let t = Self::fold(a, ky) * 2 + Self::fold(b, kx);
                    kp[t] = kp[t] + w[ky * 3 + kx];
                }
            }
        }
        k
    }

    /// Same as `forward(upsample2(x))` for a stride-1 conv whose `size` is
    /// twice the side of `x`, computed without materializing the upsampled
    /// image.
    pub fn forward_up2<S: Scalar>(&self, p: &[S], x: &[S], batch: usize) -> Vec<S> {
        debug_assert_eq!(self.stride, 1);
        let (n, m) = (self.size, self.size / 2);
        let (mp, len) = (m + 2, (m - 1) * (m + 2) + m);
        let xp = self.half().pad(x);
        let bias = self.offset + 9 * self.cin * self.cout;
        let mut y = vec![S::zero(); batch * self.cout * n * n];
        let mut wide = vec![S::zero(); len];
        for b in 0..batch {
            for co in 0..self.cout {
                let kernels: Vec<_> = (0..self.cin).map(|ci| self.sub_pixel(p, co, ci)).collect();
                let out = &mut y[(b * self.cout + co) * n * n..(b * self.cout + co + 1) * n * n];
                for ph in 0..4 {
                    let (a, bb) = (ph / 2, ph % 2);
                    wide.fill(p[bias + co]);
                    for (ci, k) in kernels.iter().enumerate() {
                        let base = (b * self.cin + ci) * mp * mp;
                        for (t, &kt) in k[ph].iter().enumerate() {
                            let shift = base + (t / 2 + a) * mp + t % 2 + bb;
                            axpy(&mut wide, kt, &xp[shift..shift + len]);
                        }
                    }
                    for i in 0..m {
                        for j in 0..m {
                            out[(2 * i + a) * n + 2 * j + bb] = wide[i * mp + j];
                        }
                    }
                }
            }
        }
        y
    }

    /// Backward of [`Conv3::forward_up2`]; `dx` is at the low resolution.
    pub fn backward_up2<S: Scalar>(
        &self,
        p: &[S],
        g: &mut [S],
        x: &[S],
        dy: &[S],
        batch: usize,
        want_dx: bool,
    ) -> Option<Vec<S>> {
        let (n, m) = (self.size, self.size / 2);
        let (mp, len) = (m + 2, (m - 1) * (m + 2) + m);
        let half = self.half();
        let xp = half.pad(x);
        let bias = self.offset + 9 * self.cin * self.cout;
        let mut dxp = if want_dx {
            vec![S::zero(); xp.len()]
        } else {
            Vec::new()
        };
        let mut wide = vec![S::zero(); len];
        let mut gk = vec![[[S::zero(); 4]; 4]; self.cin * self.cout];
        for b in 0..batch {
            for co in 0..self.cout {
                let kernels: Vec<_> = (0..self.cin).map(|ci| self.sub_pixel(p, co, ci)).collect();
                let d = &dy[(b * self.cout + co) * n * n..(b * self.cout + co + 1) * n * n];
                g[bias + co] = d.iter().fold(g[bias + co], |acc, &v| acc + v);
                for ph in 0..4 {
                    let (a, bb) = (ph / 2, ph % 2);
                    for i in 0..m {
                        for j in 0..m {
                            wide[i * mp + j] = d[(2 * i + a) * n + 2 * j + bb];
                        }
                    }
                    for (ci, k) in kernels.iter().enumerate() {
                        let base = (b * self.cin + ci) * mp * mp;
                        let gkc = &mut gk[co * self.cin + ci][ph];
                        for t in 0..4 {
                            let shift = base + (t / 2 + a) * mp + t % 2 + bb;
                            gkc[t] = gkc[t] + dot(&wide, &xp[shift..shift + len]);
                            if want_dx {
                                axpy(&mut dxp[shift..shift + len], k[ph][t], &wide);
                            }
                        }
                    }
                }
            }
        }
        for (pair, gkp) in gk.iter().enumerate() {
            let wbase = self.offset + pair * 9;
            for (ph, gt) in gkp.iter().enumerate() {
                let (a, bb) = (ph / 2, ph % 2);
                for ky in 0..3 {
                    for kx in 0..3 {
                        let t = Self::fold(a, ky) * 2 + Self::fold(bb, kx);
                        g[wbase + ky * 3 + kx] = g[wbase + ky * 3 + kx] + gt[t];
                    }
                }
            }
        }
        want_dx.then(|| half.crop(&dxp))
    }

    fn half(&self) -> Self {
        Self {
            size: self.size / 2,
            ..*self
        }
    }

    /// Inverse of [`Conv3::pad`] (drops the border).
    fn crop<S: Scalar>(&self, xp: &[S]) -> Vec<S> {
        let (n, m) = (self.size, self.size + 2);
        let mut x = vec![S::zero(); xp.len() / (m * m) * n * n];
        for (src, dst) in xp.chunks_exact(m * m).zip(x.chunks_exact_mut(n * n)) {
            for r in 0..n {
                dst[r * n..(r + 1) * n].copy_from_slice(&src[(r + 1) * m + 1..(r + 1) * m + 1 + n]);
            }
        }
        x
    }

    fn for_rows(&self, ky: usize, mut f: impl FnMut(usize, usize)) {
        let (lo, hi) = self.valid(ky);
        for oy in lo..hi {
            f(oy, oy * self.stride + ky - 1);
        }
    }

    pub fn forward<S: Scalar>(&self, p: &[S], x: &[S], batch: usize) -> Vec<S> {
        let (n, o) = (self.size, self.out_size());
        debug_assert_eq!(x.len(), batch * self.cin * n * n);
        if self.stride == 1 {
            return self.forward_padded(p, x, batch);
        }
        let xp = self.phase_split(x);
        let taps = self.taps();
        let bias = self.offset + 9 * self.cin * self.cout;
        let mut y = vec![S::zero(); batch * self.cout * o * o];
        for b in 0..batch {
            for co in 0..self.cout {
                let out = &mut y[(b * self.cout + co) * o * o..(b * self.cout + co + 1) * o * o];
                out.fill(p[bias + co]);
                for ci in 0..self.cin {
                    let inp = &xp[(b * self.cin + ci) * n * n..(b * self.cin + ci + 1) * n * n];
                    let wbase = self.offset + (co * self.cin + ci) * 9;
                    for ky in 0..3 {
                        for (kx, &(lo, hi, off, w, j0)) in taps.iter().enumerate() {
                            let wv = p[wbase + ky * 3 + kx];
                            self.for_rows(ky, |oy, iy| {
                                let start = off + iy * w + j0;
                                axpy(
                                    &mut out[oy * o + lo..oy * o + hi],
                                    wv,
                                    &inp[start..start + hi - lo],
                                );
                            });
                        }
                    }
                }
            }
        }
        y
    }

    /// Accumulate parameter gradients into `g`; return `dx` if requested.
    pub fn backward<S: Scalar>(
        &self,
        p: &[S],
        g: &mut [S],
        x: &[S],
        dy: &[S],
        batch: usize,
        want_dx: bool,
    ) -> Option<Vec<S>> {
        let (n, o) = (self.size, self.out_size());
        if self.stride == 1 {
            return self.backward_padded(p, g, x, dy, batch, want_dx);
        }
        let xp = self.phase_split(x);
        let taps = self.taps();
        let bias = self.offset + 9 * self.cin * self.cout;
        let mut dxp = if want_dx {
            vec![S::zero(); x.len()]
        } else {
            Vec::new()
        };
        for b in 0..batch {
            for co in 0..self.cout {
                let d = &dy[(b * self.cout + co) * o * o..(b * self.cout + co + 1) * o * o];
                g[bias + co] = d.iter().fold(g[bias + co], |a, &v| a + v);
                for ci in 0..self.cin {
                    let base = (b * self.cin + ci) * n * n;
                    let inp = &xp[base..base + n * n];
                    let wbase = self.offset + (co * self.cin + ci) * 9;
                    for ky in 0..3 {
                        for (kx, &(lo, hi, off, w, j0)) in taps.iter().enumerate() {
                            let wi = wbase + ky * 3 + kx;
                            let wv = p[wi];
                            let mut acc = S::zero();
                            self.for_rows(ky, |oy, iy| {
                                let drow = &d[oy * o + lo..oy * o + hi];
                                let start = off + iy * w + j0;
                                acc = acc + dot(drow, &inp[start..start + drow.len()]);
                                if want_dx {
                                    axpy(
                                        &mut dxp[base + start..base + start + drow.len()],
                                        wv,
                                        drow,
                                    );
                                }
                            });
                            g[wi] = g[wi] + acc;
                        }
                    }
                }
            }
        }
        want_dx.then(|| self.phase_merge(&dxp))
    }
}

/// `[batch, n*n, c]` (channel-interleaved) to `[batch, c, n*n]`.
pub fn to_planar<S: Scalar>(x: &[S], batch: usize, pixels: usize, c: usize) -> Vec<S> {
    let mut y = vec![S::zero(); x.len()];
    for b in 0..batch {
        for q in 0..pixels {
            for k in 0..c {
                y[(b * c + k) * pixels + q] = x[(b * pixels + q) * c + k];
            }
        }
    }
    y
}

/// Inverse of [`to_planar`].
pub fn to_interleaved<S: Scalar>(x: &[S], batch: usize, pixels: usize, c: usize) -> Vec<S> {
    let mut y = vec![S::zero(); x.len()];
    for b in 0..batch {
        for k in 0..c {
            for q in 0..pixels {
                y[(b * pixels + q) * c + k] = x[(b * c + k) * pixels + q];
            }
        }
    }
    y
}

pub fn tanh_inplace<S: Scalar>(v: &mut [S]) {
    for x in v {
        *x = x.tanh();
    }
}

/// `dy * (1 - y^2)` for `y = tanh(x)`.
pub fn tanh_backward<S: Scalar>(y: &[S], dy: &[S]) -> Vec<S> {
    y.iter()
        .zip(dy)
        .map(|(&y, &d)| d * (S::one() - y * y))
        .collect()
}

/// Nearest-neighbour 2x upsampling of planar `[batch, c, n, n]`.
pub fn upsample2<S: Scalar>(x: &[S], batch: usize, n: usize, c: usize) -> Vec<S> {
    let m = 2 * n;
    let mut y = vec![S::zero(); batch * c * m * m];
    for plane in 0..batch * c {
        let src = &x[plane * n * n..(plane + 1) * n * n];
        let dst = &mut y[plane * m * m..(plane + 1) * m * m];
        for yy in 0..m {
            for xx in 0..m {
                dst[yy * m + xx] = src[(yy / 2) * n + xx / 2];
            }
        }
    }
    y
}

pub fn upsample2_backward<S: Scalar>(dy: &[S], batch: usize, n: usize, c: usize) -> Vec<S> {
    let m = 2 * n;
    let mut dx = vec![S::zero(); batch * c * n * n];
    for plane in 0..batch * c {
        let src = &dy[plane * m * m..(plane + 1) * m * m];
        let dst = &mut dx[plane * n * n..(plane + 1) * n * n];
        for yy in 0..m {
            for xx in 0..m {
                dst[(yy / 2) * n + xx / 2] = dst[(yy / 2) * n + xx / 2] + src[yy * m + xx];
            }
        }
    }
    dx
}
