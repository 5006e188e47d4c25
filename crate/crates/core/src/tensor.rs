//! Dense matrices, single-channel images, "same" 2D convolution, the
//! orthonormal DCT-II basis and the small dense solvers used by filter
//! learning (Householder least squares, Jacobi symmetric eigendecomposition).

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{config_err, input_err, Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "MatrixRepr"))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[cfg(feature = "serde")]
impl TryFrom<MatrixRepr> for Matrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        Matrix::from_vec(r.rows, r.cols, r.data)
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(input_err!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(input_err!("matrix contains non-finite values"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix whose columns are the given equal-length vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        let cols = columns.len();
        let mut m = Self::zeros(rows, cols);
        for (j, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(input_err!("column {} has length {}, expected {}", j, col.len(), rows));
            }
            for (i, &v) in col.iter().enumerate() {
                m.data[i * cols + j] = v;
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(input_err!(
                "cannot multiply {}x{} by {}x{}",
                self.rows,
                self.cols,
                other.rows,
                other.cols
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(input_err!("vector length {} does not match {} columns", x.len(), self.cols));
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), x)).collect())
    }

    /// `selfᵀ x`.
    pub fn tr_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(input_err!("vector length {} does not match {} rows", x.len(), self.rows));
        }
        let mut out = vec![0.0; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o += a * xr;
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| f64::max(m, libm::fabs(a - b)))
    }
}

/// Single-channel image stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(input_err!(
                "image buffer length {} does not match {}x{}",
                pixels.len(),
                height,
                width
            ));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, pixels: vec![0.0; height * width] }
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self { height, width, pixels: vec![value; height * width] }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.width + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.pixels[r * self.width + c] = v;
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }
}

impl From<Matrix> for Image {
    fn from(m: Matrix) -> Self {
        Self { height: m.rows, width: m.cols, pixels: m.data }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Orthonormal `d×d` DCT-II matrix: entry `(u, v)` is
/// `c(u)·cos(π(2v+1)u / 2d)` with `c(0) = √(1/d)` and `c(u) = √(2/d)` otherwise.
pub fn dct_matrix(d: usize) -> Result<Matrix> {
    if d == 0 {
        return Err(config_err!("DCT dimension must be at least 1"));
    }
    let mut m = Matrix::zeros(d, d);
    let dc = libm::sqrt(1.0 / d as f64);
    let ac = libm::sqrt(2.0 / d as f64);
    for u in 0..d {
        let c = if u == 0 { dc } else { ac };
        for v in 0..d {
            let angle = PI * (2 * v + 1) as f64 * u as f64 / (2 * d) as f64;
            m.set(u, v, c * libm::cos(angle));
        }
    }
    Ok(m)
}

/// Cross-correlation of `img` with `filter` under zero padding; the output has
/// the input's size and `out(r, c) = Σ filter(i, j)·img(r + i − pad_h, c + j − pad_w)`.
pub fn conv2d_same(img: &Image, filter: &Matrix) -> Result<Image> {
    let (k1, k2) = (filter.rows(), filter.cols());
    if k1 % 2 == 0 || k2 % 2 == 0 {
        return Err(config_err!("filter dimensions must be odd, got {}x{}", k1, k2));
    }
    if k1 > img.height || k2 > img.width {
        return Err(config_err!(
            "filter {}x{} larger than image {}x{}",
            k1,
            k2,
            img.height,
            img.width
        ));
    }
    let (h, w) = (img.height as isize, img.width as isize);
    let (ph, pw) = ((k1 / 2) as isize, (k2 / 2) as isize);
    let mut out = Image::zeros(img.height, img.width);
    for i in 0..k1 {
        let di = i as isize - ph;
        let r_lo = (-di).max(0);
        let r_hi = (h - di).min(h);
        for j in 0..k2 {
            let f = filter.get(i, j);
            if f == 0.0 {
                continue;
            }
            let dj = j as isize - pw;
            let c_lo = (-dj).max(0) as usize;
            let c_hi = (w - dj).min(w) as usize;
            if c_lo >= c_hi {
                continue;
            }
            for r in r_lo..r_hi {
                let src_row = (r + di) as usize * img.width;
                let dst_row = r as usize * img.width;
                let src = &img.pixels[src_row + (c_lo as isize + dj) as usize
                    ..src_row + (c_hi as isize + dj) as usize];
                let dst = &mut out.pixels[dst_row + c_lo..dst_row + c_hi];
                for (o, &s) in dst.iter_mut().zip(src) {
                    *o += f * s;
                }
            }
        }
    }
    Ok(out)
}

/// Relative pivot threshold below which a column is treated as dependent.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Solves `argmin_x ‖y − A x‖₂` by Householder QR.
pub fn least_squares(a: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    let (m, t) = (a.rows(), a.cols());
    if y.len() != m {
        return Err(input_err!("rhs length {} does not match {} rows", y.len(), m));
    }
    if t > m {
        return Err(config_err!("least squares needs cols <= rows, got {}x{}", m, t));
    }
    // Column-major working copy.
    let mut q: Vec<Vec<f64>> = (0..t).map(|j| a.column(j)).collect();
    let col_norms: Vec<f64> = q.iter().map(|c| norm2(c)).collect();
    let mut rhs = y.to_vec();
    let mut diag = vec![0.0; t];

    for k in 0..t {
        let alpha = norm2(&q[k][k..]);
        let pivot_scale = col_norms[k].max(f64::MIN_POSITIVE);
        if alpha / pivot_scale < PIVOT_TOLERANCE {
            return Err(Error::Singular { column: k, pivot: alpha });
        }
        let r_kk = if q[k][k] > 0.0 { -alpha } else { alpha };
        // v = x - r_kk e_1, stored in place of column k.
        q[k][k] -= r_kk;
        let vnorm2: f64 = q[k][k..].iter().map(|v| v * v).sum();
        diag[k] = r_kk;
        if vnorm2 == 0.0 {
            continue;
        }
        let (head, tail) = q.split_at_mut(k + 1);
        let v = &head[k][k..];
        for col in tail.iter_mut() {
            let s = 2.0 * dot(v, &col[k..]) / vnorm2;
            for (c, &vi) in col[k..].iter_mut().zip(v) {
                *c -= s * vi;
            }
        }
        let s = 2.0 * dot(v, &rhs[k..]) / vnorm2;
        for (c, &vi) in rhs[k..].iter_mut().zip(v) {
            *c -= s * vi;
        }
    }

    // Back substitution with R stored above the diagonal of q.
    let mut x = vec![0.0; t];
    for i in (0..t).rev() {
        let mut s = rhs[i];
        for j in i + 1..t {
            s -= q[j][i] * x[j];
        }
        x[i] = s / diag[i];
    }
    Ok(x)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching unit eigenvectors
/// as the columns of the returned matrix.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(input_err!("eigendecomposition needs a square matrix, got {}x{}", n, a.cols()));
    }
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let total: f64 = m.data.iter().map(|x| x * x).sum();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m.get(p, q) * m.get(p, q);
            }
        }
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).total_cmp(&m.get(i, i)).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(k, dst, v.get(k, src));
        }
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    fn random_image(h: usize, w: usize, rng: &mut ChaCha8Rng) -> Image {
        Image::new(h, w, (0..h * w).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn naive_conv(img: &Image, f: &Matrix) -> Image {
        let (ph, pw) = ((f.rows() / 2) as isize, (f.cols() / 2) as isize);
        let mut out = Image::zeros(img.height(), img.width());
        for r in 0..img.height() as isize {
            for c in 0..img.width() as isize {
                let mut s = 0.0;
                for i in 0..f.rows() as isize {
                    for j in 0..f.cols() as isize {
                        let (rr, cc) = (r + i - ph, c + j - pw);
                        if rr >= 0 && cc >= 0 && rr < img.height() as isize && cc < img.width() as isize {
                            s += f.get(i as usize, j as usize) * img.get(rr as usize, cc as usize);
                        }
                    }
                }
                out.set(r as usize, c as usize, s);
            }
        }
        out
    }

    #[test]
    fn dct_small_closed_forms() {
        assert_eq!(dct_matrix(1).unwrap().data(), &[1.0]);
        let d2 = dct_matrix(2).unwrap();
        let h = 1.0 / libm::sqrt(2.0);
        let expected = Matrix::from_vec(2, 2, vec![h, h, h, -h]).unwrap();
        assert!(d2.max_abs_diff(&expected) < 1e-15);
        assert!(matches!(dct_matrix(0), Err(Error::Config(_))));
    }

    #[test]
    fn dct_orthonormal_up_to_64() {
        for d in 1..=64 {
            let psi = dct_matrix(d).unwrap();
            let g = psi.matmul(&psi.transpose()).unwrap();
            let err = g.max_abs_diff(&Matrix::identity(d));
            assert!(err < 1e-10, "d={d} err={err}");
            if d == 49 {
                assert!(err < 1e-12);
            }
        }
    }

    #[test]
    fn conv_zero_filter_and_even_rejection() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = random_image(6, 7, &mut rng);
        let out = conv2d_same(&img, &Matrix::zeros(3, 3)).unwrap();
        assert!(out.pixels().iter().all(|&v| v == 0.0));
        assert!(matches!(conv2d_same(&img, &Matrix::zeros(2, 3)), Err(Error::Config(_))));
        assert!(matches!(conv2d_same(&img, &Matrix::zeros(9, 3)), Err(Error::Config(_))));
    }

    #[test]
    fn conv_impulse_reproduces_filter() {
        let mut img = Image::zeros(7, 7);
        img.set(3, 3, 1.0);
        let f = Matrix::from_vec(3, 3, (1..=9).map(f64::from).collect()).unwrap();
        let out = conv2d_same(&img, &f).unwrap();
        // Cross-correlation places the filter flipped around the impulse.
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(out.get(2 + i, 2 + j), f.get(2 - i, 2 - j));
            }
        }
        let total: f64 = out.pixels().iter().sum();
        assert_eq!(total, 45.0);
    }

    #[test]
    fn conv_matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(h, w, k1, k2) in &[(8, 8, 3, 3), (28, 28, 7, 7), (9, 5, 5, 3), (5, 5, 5, 5)] {
            let img = random_image(h, w, &mut rng);
            let f = random_matrix(k1, k2, &mut rng);
            let fast = conv2d_same(&img, &f).unwrap();
            let slow = naive_conv(&img, &f);
            let diff = fast
                .pixels()
                .iter()
                .zip(slow.pixels())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(diff < 1e-12, "{h}x{w} {k1}x{k2}: {diff}");
        }
    }

    #[test]
    fn least_squares_small_cases() {
        let x = least_squares(&Matrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
        let a = Matrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        let x = least_squares(&a, &[0.0, 2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn least_squares_reports_dependent_column() {
        let a = Matrix::from_vec(3, 3, vec![1.0, 2.0, 0.0, 0.0, 0.0, 1.0, 1.0, 2.0, 0.0]).unwrap();
        match least_squares(&a, &[1.0, 1.0, 1.0]) {
            Err(Error::Singular { column, .. }) => assert_eq!(column, 1),
            other => panic!("expected singular error, got {other:?}"),
        }
        let a = Matrix::from_vec(2, 3, vec![0.0; 6]).unwrap();
        assert!(matches!(least_squares(&a, &[0.0, 0.0]), Err(Error::Config(_))));
    }

    #[test]
    fn jacobi_diagonalizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_matrix(6, 6, &mut rng);
        let s = b.matmul(&b.transpose()).unwrap();
        let (vals, vecs) = symmetric_eigen(&s).unwrap();
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let d = vecs.transpose().matmul(&s).unwrap().matmul(&vecs).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j { vals[i] } else { 0.0 };
                assert!((d.get(i, j) - expect).abs() < 1e-9);
            }
        }
    }
}
