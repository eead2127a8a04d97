//! Dense kernels used by DMD: truncated SVD, general (non-symmetric)
//! eigendecomposition and the Moore-Penrose pseudo-inverse.
//!
//! Matrices are plain `nalgebra` dynamic matrices. The SVD itself is
//! delegated to `nalgebra`'s Golub-Kahan implementation; the eigensolver is a
//! complex Hessenberg QR iteration with Wilkinson shifts, written here so the
//! iteration budget and eigenvector normalisation are under our control.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RealMatrix = DMatrix<f64>;
pub type ComplexMatrix = DMatrix<Complex64>;

/// Singular values below `SINGULAR_CUTOFF * sigma_max` are treated as zero.
pub const SINGULAR_CUTOFF: f64 = 1e-12;

/// QR sweeps allowed per matrix dimension before giving up.
pub const EIG_SWEEPS_PER_DIM: usize = 100;

/// Scalars the kernels operate on: `f64` or `Complex64`.
pub trait Scalar: ComplexField<RealField = f64> + Copy {
    fn to_complex(self) -> Complex64;
}

impl Scalar for f64 {
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Scalar for Complex64 {
    fn to_complex(self) -> Complex64 {
        self
    }
}

/// Leading singular triplets `A ~ U diag(S) V*`.
///
/// `s` is sorted in descending order and only holds values above the
/// relative cutoff, so `rank()` may be smaller than the rank requested.
#[derive(Debug, Clone)]
pub struct SvdFactors<T: Scalar> {
    pub u: DMatrix<T>,
    pub s: Vec<f64>,
    pub v: DMatrix<T>,
}

impl<T: Scalar> SvdFactors<T> {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `U diag(S) V*`.
    pub fn reconstruct(&self) -> DMatrix<T> {
        let mut us = self.u.clone();
        for (j, &sj) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(sj);
        }
        us * self.v.adjoint()
    }
}

pub fn check_finite<T: Scalar>(a: &DMatrix<T>) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn check_nonempty<T: Scalar>(a: &DMatrix<T>) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        Err(Error::Empty)
    } else {
        Ok(())
    }
}

/// Thin SVD with all `min(rows, cols)` triplets, sorted descending and
/// without any cutoff applied.
pub fn full_svd<T: Scalar>(a: &DMatrix<T>) -> Result<SvdFactors<T>> {
    check_nonempty(a)?;
    check_finite(a)?;
    let (rows, cols) = a.shape();
    let budget = 200 * rows.max(cols);
    let svd = nalgebra::SVD::try_new(a.clone(), true, true, f64::EPSILON, budget)
        .ok_or(Error::ConvergenceFailure { budget })?;
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let k = svd.singular_values.len();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

    let mut s = Vec::with_capacity(k);
    let mut uu = DMatrix::<T>::zeros(rows, k);
    let mut vv = DMatrix::<T>::zeros(cols, k);
    for (dst, &src) in order.iter().enumerate() {
        s.push(svd.singular_values[src]);
        uu.set_column(dst, &u.column(src));
        let row = v_t.row(src).adjoint();
        vv.set_column(dst, &row);
    }
    Ok(SvdFactors { u: uu, s, v: vv })
}

/// Number of leading singular values above the relative cutoff.
fn effective_rank(s: &[f64]) -> usize {
    let smax = s.first().copied().unwrap_or(0.0);
    if smax <= 0.0 {
        return 0;
    }
    s.iter().take_while(|&&x| x >= SINGULAR_CUTOFF * smax).count()
}

/// Best rank-`rank` approximation factors of `a`.
///
/// Trailing singular values under the cutoff are dropped, so the returned
/// factors can carry fewer than `rank` columns (possibly zero for the zero
/// matrix).
pub fn truncated_svd<T: Scalar>(a: &DMatrix<T>, rank: usize) -> Result<SvdFactors<T>> {
    check_nonempty(a)?;
    check_finite(a)?;
    let max = a.nrows().min(a.ncols());
    if rank == 0 || rank > max {
        return Err(Error::RankOutOfRange { requested: rank, max });
    }
    let full = full_svd(a)?;
    let keep = effective_rank(&full.s).min(rank);
    Ok(SvdFactors {
        u: full.u.columns(0, keep).into_owned(),
        s: full.s[..keep].to_vec(),
        v: full.v.columns(0, keep).into_owned(),
    })
}

/// Moore-Penrose pseudo-inverse through the SVD, with singular values under
/// the relative cutoff inverted as zero.
pub fn pinv<T: Scalar>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    let full = full_svd(a)?;
    let keep = effective_rank(&full.s);
    let mut v_sinv = full.v.columns(0, keep).into_owned();
    for j in 0..keep {
        v_sinv.column_mut(j).scale_mut(1.0 / full.s[j]);
    }
    Ok(v_sinv * full.u.columns(0, keep).adjoint())
}

/// Matrix 2-norm (largest singular value).
pub fn norm2<T: Scalar>(a: &DMatrix<T>) -> Result<f64> {
    Ok(full_svd(a)?.s.first().copied().unwrap_or(0.0))
}

/// 2-norm condition number `sigma_max / sigma_min` over all singular values.
pub fn condition_number<T: Scalar>(a: &DMatrix<T>) -> Result<f64> {
    let s = full_svd(a)?.s;
    let smax = s.first().copied().unwrap_or(0.0);
    let smin = s.last().copied().unwrap_or(0.0);
    Ok(if smin > 0.0 { smax / smin } else { f64::INFINITY })
}

pub fn to_complex<T: Scalar>(a: &DMatrix<T>) -> ComplexMatrix {
    a.map(|x| x.to_complex())
}

/// Eigenvalues and right eigenvectors, one column per eigenvalue.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<Complex64>,
    pub vectors: ComplexMatrix,
}

/// Eigendecomposition of a general square matrix, real or complex.
///
/// Eigenvectors have unit 2-norm with their largest-magnitude component made
/// real and positive. Real input may yield complex conjugate pairs.
pub fn eig_general<T: Scalar>(a: &DMatrix<T>) -> Result<EigenPairs> {
    check_nonempty(a)?;
    check_finite(a)?;
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let mut h = to_complex(a);
    let n = rows;
    let mut z = ComplexMatrix::identity(n, n);
    hessenberg_reduce(&mut h, &mut z);
    schur_qr(&mut h, &mut z)?;
    let values: Vec<Complex64> = (0..n).map(|i| h[(i, i)]).collect();
    let vectors = triangular_eigenvectors(&h, &z);
    Ok(EigenPairs { values, vectors })
}

/// Householder reduction `H = Q* A Q` to upper Hessenberg form; `q`
/// accumulates the transformations.
fn hessenberg_reduce(h: &mut ComplexMatrix, q: &mut ComplexMatrix) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let x: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { Complex64::new(1.0, 0.0) };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for c in v.iter_mut() {
            *c /= vnorm;
        }
        // H <- (I - 2 v v*) H on rows k+1..n
        for j in 0..n {
            let dot: Complex64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * h[(k + 1 + i, j)]).sum();
            for (i, vi) in v.iter().enumerate() {
                h[(k + 1 + i, j)] -= 2.0 * vi * dot;
            }
        }
        // H <- H (I - 2 v v*) and Q <- Q (I - 2 v v*) on columns k+1..n
        for m in [&mut *h, &mut *q] {
            for i in 0..n {
                let dot: Complex64 = v.iter().enumerate().map(|(jj, vj)| m[(i, k + 1 + jj)] * vj).sum();
                for (jj, vj) in v.iter().enumerate() {
                    m[(i, k + 1 + jj)] -= 2.0 * dot * vj.conj();
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = Complex64::new(0.0, 0.0);
        }
    }
}

/// Rotation `[c s; -conj(s) c]` with real `c` mapping `(a, b)` to `(r, 0)`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    let an = a.norm();
    if an == 0.0 {
        return (0.0, b.conj() / bn);
    }
    let nrm = an.hypot(bn);
    (an / nrm, (a / an) * b.conj() / nrm)
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mean = (a + d) * 0.5;
    let mu1 = mean + disc;
    let mu2 = mean - disc;
    if (mu1 - d).norm() <= (mu2 - d).norm() {
        mu1
    } else {
        mu2
    }
}

/// Shifted QR iteration on a Hessenberg matrix until it is upper triangular
/// (complex Schur form); `z` accumulates the unitary similarity.
fn schur_qr(h: &mut ComplexMatrix, z: &mut ComplexMatrix) -> Result<()> {
    let n = h.nrows();
    if n == 1 {
        return Ok(());
    }
    let budget = EIG_SWEEPS_PER_DIM * n;
    let frob = h.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let zero = Complex64::new(0.0, 0.0);
    let mut sweeps = 0usize;
    let mut stalled = 0usize;
    let mut hi = n - 1;
    while hi > 0 {
        // Locate the start of the unreduced block ending at `hi`.
        let mut lo = hi;
        while lo > 0 {
            let scale = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            let scale = if scale == 0.0 { frob } else { scale };
            if h[(lo, lo - 1)].norm() <= f64::EPSILON * scale {
                h[(lo, lo - 1)] = zero;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            stalled = 0;
            continue;
        }
        sweeps += 1;
        if sweeps > budget {
            return Err(Error::ConvergenceFailure { budget });
        }
        stalled += 1;
        let mu = if stalled.is_multiple_of(10) {
            // Exceptional shift to break cycles.
            h[(hi, hi)] + Complex64::new(h[(hi, hi - 1)].norm() * 0.75, h[(hi, hi - 1)].norm() * 0.25)
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };

        for k in lo..=hi {
            h[(k, k)] -= mu;
        }
        let mut rots = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..n {
                let a = h[(k, j)];
                let b = h[(k + 1, j)];
                h[(k, j)] = a * c + s * b;
                h[(k + 1, j)] = -s.conj() * a + b * c;
            }
            h[(k + 1, k)] = zero;
            rots.push((c, s));
        }
        for (idx, k) in (lo..hi).enumerate() {
            let (c, s) = rots[idx];
            for i in 0..=(k + 1) {
                let a = h[(i, k)];
                let b = h[(i, k + 1)];
                h[(i, k)] = a * c + b * s.conj();
                h[(i, k + 1)] = -a * s + b * c;
            }
            for i in 0..n {
                let a = z[(i, k)];
                let b = z[(i, k + 1)];
                z[(i, k)] = a * c + b * s.conj();
                z[(i, k + 1)] = -a * s + b * c;
            }
        }
        for k in lo..=hi {
            h[(k, k)] += mu;
        }
    }
    Ok(())
}

/// Eigenvectors of `Z T Z*` from the upper-triangular Schur factor `t`.
fn triangular_eigenvectors(t: &ComplexMatrix, z: &ComplexMatrix) -> ComplexMatrix {
    let n = t.nrows();
    let tnorm = t.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let small = (f64::EPSILON * tnorm).max(f64::MIN_POSITIVE);
    let mut vectors = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut y = DVector::<Complex64>::zeros(n);
        y[k] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in j + 1..=k {
                acc += t[(j, l)] * y[l];
            }
            let mut denom = t[(j, j)] - lambda;
            if denom.norm() < small {
                denom = Complex64::new(small, 0.0);
            }
            y[j] = -acc / denom;
        }
        let v = z * y;
        vectors.set_column(k, &normalize_phase(v));
    }
    vectors
}

/// Unit 2-norm with the largest-magnitude component rotated onto the
/// positive real axis.
pub fn normalize_phase(mut v: DVector<Complex64>) -> DVector<Complex64> {
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return v;
    }
    let peak = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    // First component within rounding of the peak, so ties resolve stably.
    let idx = v.iter().position(|c| c.norm() >= peak * (1.0 - 1e-12)).unwrap_or(0);
    let phase = v[idx].conj() / v[idx].norm();
    for c in v.iter_mut() {
        *c = *c * phase / norm;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn svd_of_rank_one_diagonal() {
        let a = dmatrix![1.0, 0.0; 0.0, 0.0];
        let f = truncated_svd(&a, 1).unwrap();
        assert_eq!(f.s, vec![1.0]);
        assert!((f.u[(0, 0)].abs() - 1.0).abs() < 1e-14 && f.u[(1, 0)].abs() < 1e-14);
        assert!((f.v[(0, 0)].abs() - 1.0).abs() < 1e-14 && f.v[(1, 0)].abs() < 1e-14);
    }

    #[test]
    fn svd_identity_and_hand_computed() {
        let f = truncated_svd(&RealMatrix::identity(2, 2), 2).unwrap();
        assert!((f.s[0] - 1.0).abs() < 1e-14 && (f.s[1] - 1.0).abs() < 1e-14);
        // A^T A = [[25, 0], [0, 0]] so sigma_1 = 5.
        let f = truncated_svd(&dmatrix![3.0, 0.0; 4.0, 0.0], 1).unwrap();
        assert!((f.s[0] - 5.0).abs() < 1e-13);
    }

    #[test]
    fn svd_rank_errors_and_cutoff() {
        let a = dmatrix![1.0, 2.0; 2.0, 4.0];
        assert!(matches!(truncated_svd(&a, 3), Err(Error::RankOutOfRange { .. })));
        assert!(matches!(truncated_svd(&a, 0), Err(Error::RankOutOfRange { .. })));
        // Rank-one matrix: the second singular value is cut off.
        assert_eq!(truncated_svd(&a, 2).unwrap().rank(), 1);
        let bad = dmatrix![1.0, f64::NAN];
        assert_eq!(truncated_svd(&bad, 1).unwrap_err(), Error::NonFinite);
        assert_eq!(truncated_svd(&RealMatrix::zeros(2, 3), 1).unwrap().rank(), 0);
    }

    #[test]
    fn eig_scalar_rotation_identity() {
        let e = eig_general(&dmatrix![2.0]).unwrap();
        assert_eq!(e.values, vec![c(2.0, 0.0)]);
        assert_eq!(e.vectors[(0, 0)], c(1.0, 0.0));

        let e = eig_general(&dmatrix![0.0, -1.0; 1.0, 0.0]).unwrap();
        let mut ims: Vec<f64> = e.values.iter().map(|v| v.im).collect();
        ims.sort_by(f64::total_cmp);
        assert!((ims[0] + 1.0).abs() < 1e-14 && (ims[1] - 1.0).abs() < 1e-14);
        assert!(e.values.iter().all(|v| v.re.abs() < 1e-14));

        let e = eig_general(&RealMatrix::identity(3, 3)).unwrap();
        assert!(e.values.iter().all(|v| (*v - c(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn eig_rejects_non_square() {
        let a = RealMatrix::zeros(2, 3);
        assert!(matches!(eig_general(&a), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn eigenvectors_are_phase_normalized() {
        let a = dmatrix![4.0, 1.0, 0.5; -2.0, 1.0, 0.0; 0.3, 0.7, -1.5];
        let e = eig_general(&a).unwrap();
        for k in 0..3 {
            let v = e.vectors.column(k);
            let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
            let peak = v.iter().max_by(|x, y| x.norm().total_cmp(&y.norm())).unwrap();
            assert!(peak.im.abs() < 1e-12 && peak.re > 0.0);
        }
    }

    #[test]
    fn pinv_small_cases() {
        let p = pinv(&dmatrix![2.0]).unwrap();
        assert!((p[(0, 0)] - 0.5).abs() < 1e-15);
        let p = pinv(&dmatrix![1.0, 0.0; 0.0, 0.0]).unwrap();
        assert!((p - dmatrix![1.0, 0.0; 0.0, 0.0]).norm() < 1e-15);
    }

    #[test]
    fn pinv_of_complex_matches_normal_equations() {
        let a = ComplexMatrix::from_fn(4, 2, |i, j| c((i as f64 + 1.0) * (j as f64 - 0.5), (i * j) as f64 * 0.3 + 0.1));
        let p = pinv(&a).unwrap();
        let ah = a.adjoint();
        let oracle = (&ah * &a).try_inverse().unwrap() * ah;
        assert!((p - oracle).norm() < 1e-10);
    }

    fn matrix(rows: usize, cols: usize, v: &[f64]) -> RealMatrix {
        RealMatrix::from_row_slice(rows, cols, &v[..rows * cols])
    }

    proptest::proptest! {
        #[test]
        fn truncation_error_nonincreasing(v in proptest::collection::vec(-5.0f64..5.0, 24)) {
            let a = matrix(4, 6, &v);
            let mut prev = f64::INFINITY;
            for r in 1..=4 {
                let err = (&a - truncated_svd(&a, r).unwrap().reconstruct()).norm();
                proptest::prop_assert!(err <= prev + 1e-10);
                prev = err;
            }
        }

        #[test]
        fn factors_are_orthonormal_and_sorted(v in proptest::collection::vec(-5.0f64..5.0, 30)) {
            let a = matrix(6, 5, &v);
            let f = full_svd(&a).unwrap();
            proptest::prop_assert!(f.s.windows(2).all(|p| p[0] >= p[1]));
            let k = f.s.len();
            proptest::prop_assert!((f.u.transpose() * &f.u - RealMatrix::identity(k, k)).amax() < 1e-10);
            proptest::prop_assert!((f.v.transpose() * &f.v - RealMatrix::identity(k, k)).amax() < 1e-10);
            proptest::prop_assert!((f.reconstruct() - &a).norm() < 1e-10 * (1.0 + a.norm()));
        }

        #[test]
        fn eigen_residuals_are_small(n in 1usize..8, v in proptest::collection::vec(-5.0f64..5.0, 49)) {
            let a = matrix(n, n, &v);
            let e = eig_general(&a).unwrap();
            let ac = to_complex(&a);
            let scale = norm2(&a).unwrap();
            for k in 0..n {
                let vk = e.vectors.column(k);
                let res = (&ac * vk - vk * e.values[k]).norm();
                proptest::prop_assert!(res <= 1e-8 * scale.max(f64::MIN_POSITIVE), "{res} {scale}");
                proptest::prop_assert!((vk.norm() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn complex_eigen_residuals(v in proptest::collection::vec(-3.0f64..3.0, 50)) {
            let a = ComplexMatrix::from_fn(5, 5, |i, j| Complex64::new(v[5 * i + j], v[25 + 5 * i + j]));
            let e = eig_general(&a).unwrap();
            let scale = norm2(&a).unwrap();
            for k in 0..5 {
                let vk = e.vectors.column(k);
                proptest::prop_assert!((&a * vk - vk * e.values[k]).norm() <= 1e-8 * scale);
            }
        }

        #[test]
        fn penrose_conditions(v in proptest::collection::vec(-5.0f64..5.0, 15)) {
            let a = matrix(5, 3, &v);
            proptest::prop_assume!(full_svd(&a).unwrap().s[2] > 1e-3);
            let p = pinv(&a).unwrap();
            let tol = 1e-8 * (1.0 + a.norm() * p.norm()).powi(2);
            proptest::prop_assert!((&a * &p * &a - &a).norm() <= tol * a.norm());
            proptest::prop_assert!((&p * &a * &p - &p).norm() <= tol * p.norm());
            let ap = &a * &p;
            let pa = &p * &a;
            proptest::prop_assert!((&ap - ap.transpose()).norm() <= tol);
            proptest::prop_assert!((&pa - pa.transpose()).norm() <= tol);
        }
    }

    #[test]
    fn companion_with_clustered_roots() {
        // (x - 1)^2 (x + 0.5): a defective pair plus a simple root.
        let a = dmatrix![1.5, 0.0, -0.5; 1.0, 0.0, 0.0; 0.0, 1.0, 0.0];
        let e = eig_general(&a).unwrap();
        let mut re: Vec<f64> = e.values.iter().map(|v| v.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 0.5).abs() < 1e-10);
        assert!((re[1] - 1.0).abs() < 1e-6 && (re[2] - 1.0).abs() < 1e-6);
    }
}
