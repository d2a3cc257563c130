//! Dense complex matrix helpers on top of `faer`.

use crate::error::{OeeError, Result};
use crate::scalar::{cx, Cx, Real};
use faer::linalg::matmul::matmul;
use faer::traits::Conjugate;
use faer::{Accum, Mat, MatRef, Par, Side};
use num_traits::{Float, One, Zero};
use std::sync::Once;

pub type CMat<T> = Mat<Cx<T>>;

static SEQUENTIAL: Once = Once::new();

/// All kernels run single-threaded; parallelism lives one level up (over k points),
/// which keeps results bitwise independent of the thread count.
fn ensure_sequential_kernels() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(Par::Seq));
}

pub fn zeros<T: Real>(rows: usize, cols: usize) -> CMat<T> {
    Mat::from_fn(rows, cols, |_, _| Cx::zero())
}

pub fn identity<T: Real>(n: usize) -> CMat<T> {
    Mat::from_fn(n, n, |i, j| if i == j { Cx::one() } else { Cx::zero() })
}

pub fn from_rows<T: Real, const N: usize>(rows: [[Cx<T>; N]; N]) -> CMat<T> {
    Mat::from_fn(N, N, |i, j| rows[i][j])
}

/// `[sigma_x, sigma_y, sigma_z]`
pub fn pauli<T: Real>() -> [CMat<T>; 3] {
    let (o, l, i) = (Cx::zero(), Cx::one(), cx(T::zero(), T::one()));
    [from_rows([[o, l], [l, o]]), from_rows([[o, -i], [i, o]]), from_rows([[l, o], [o, -l]])]
}

pub fn kron<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(a.nrows() * br, a.ncols() * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn adjoint<T: Real>(a: &CMat<T>) -> CMat<T> {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj())
}

pub fn transpose<T: Real>(a: &CMat<T>) -> CMat<T> {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)])
}

pub fn conj<T: Real>(a: &CMat<T>) -> CMat<T> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].conj())
}

pub fn add<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] + b[(i, j)])
}

pub fn sub<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)])
}

pub fn scale<T: Real>(a: &CMat<T>, s: Cx<T>) -> CMat<T> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// `sum_i c_i M_i` for equally shaped matrices.
pub fn combine<T: Real>(terms: &[(Cx<T>, &CMat<T>)]) -> CMat<T> {
    let (r, c) = (terms[0].1.nrows(), terms[0].1.ncols());
    Mat::from_fn(r, c, |i, j| terms.iter().fold(Cx::zero(), |acc, (s, m)| acc + *s * m[(i, j)]))
}

pub fn matmul_into<T: Real, A, B>(a: MatRef<'_, A>, b: MatRef<'_, B>) -> CMat<T>
where
    A: Conjugate<Canonical = Cx<T>>,
    B: Conjugate<Canonical = Cx<T>>,
{
    ensure_sequential_kernels();
    let mut out = zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, Cx::one(), Par::Seq);
    out
}

pub fn mul<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    assert_eq!(a.ncols(), b.nrows());
    matmul_into(a.as_ref(), b.as_ref())
}

/// `a^dagger b`
pub fn mul_adj_left<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    assert_eq!(a.nrows(), b.nrows());
    matmul_into(a.as_ref().adjoint(), b.as_ref())
}

pub fn trace<T: Real>(a: &CMat<T>) -> Cx<T> {
    (0..a.nrows().min(a.ncols())).fold(Cx::zero(), |acc, i| acc + a[(i, i)])
}

/// `Re Tr[a b]` without forming the product.
pub fn trace_product_re<T: Real>(a: &CMat<T>, b: &CMat<T>) -> T {
    let mut s = Cx::zero();
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s.re
}

pub fn max_abs<T: Real>(a: &CMat<T>) -> T {
    let mut m = T::zero();
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = Float::max(m, a[(i, j)].norm());
        }
    }
    m
}

pub fn max_abs_diff<T: Real>(a: &CMat<T>, b: &CMat<T>) -> T {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = T::zero();
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = Float::max(m, (a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

pub fn hermiticity_deviation<T: Real>(a: &CMat<T>) -> T {
    let mut m = T::zero();
    for j in 0..a.ncols() {
        for i in 0..=j.min(a.nrows().saturating_sub(1)) {
            m = Float::max(m, (a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// Fails with `NonHermitian` when the deviation exceeds the tight tolerance
/// relative to the matrix scale.
pub fn check_hermitian<T: Real>(a: &CMat<T>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(OeeError::InvalidParameter(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let dev = hermiticity_deviation(a);
    let scale = Float::max(T::one(), max_abs(a));
    if !(dev <= T::tight() * scale) {
        return Err(OeeError::NonHermitian { deviation: dev.to_f64_lossy() });
    }
    Ok(())
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending, eigenvectors in columns.
#[derive(Debug, Clone)]
pub struct Eigh<T: Real> {
    pub values: Vec<T>,
    pub vectors: CMat<T>,
}

pub fn eigh<T: Real>(a: &CMat<T>) -> Result<Eigh<T>> {
    check_hermitian(a)?;
    ensure_sequential_kernels();
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|e| OeeError::EigenFailure(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let values: Vec<T> = (0..a.nrows()).map(|i| s[i].re).collect();
    if values.iter().any(|v| !Float::is_finite(*v)) {
        return Err(OeeError::EigenFailure("non-finite eigenvalue".into()));
    }
    Ok(Eigh { values, vectors: evd.U().to_owned() })
}

pub fn eigvalsh<T: Real>(a: &CMat<T>) -> Result<Vec<T>> {
    check_hermitian(a)?;
    ensure_sequential_kernels();
    let vals =
        a.self_adjoint_eigenvalues(Side::Lower).map_err(|e| OeeError::EigenFailure(format!("{e:?}")))?;
    if vals.iter().any(|v| !Float::is_finite(*v)) {
        return Err(OeeError::EigenFailure("non-finite eigenvalue".into()));
    }
    Ok(vals)
}

/// `V V^dagger` over the first `n` columns of `vectors`.
pub fn projector_onto<T: Real>(vectors: &CMat<T>, n: usize) -> CMat<T> {
    let v = vectors.as_ref().subcols(0, n);
    matmul_into(v, v.adjoint())
}

/// Determinant of a small square matrix by Gaussian elimination with partial pivoting.
pub fn det<T: Real>(a: &CMat<T>) -> Cx<T> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m: Vec<Vec<Cx<T>>> = (0..n).map(|i| (0..n).map(|j| a[(i, j)]).collect()).collect();
    let mut d = Cx::one();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| {
                m[x][col].norm().partial_cmp(&m[y][col].norm()).unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if m[piv][col].norm() == T::zero() {
            return Cx::zero();
        }
        if piv != col {
            m.swap(piv, col);
            d = -d;
        }
        let p = m[col][col];
        d *= p;
        for r in col + 1..n {
            let f = m[r][col] / p;
            for c in col..n {
                let v = m[col][c];
                m[r][c] -= f * v;
            }
        }
    }
    d
}

/// Sum of the diagonal `inner x inner` blocks after grouping indices as
/// `(outer, inner)`: the partial trace over the outer factor.
pub fn partial_trace_outer<T: Real>(a: &CMat<T>, inner: usize) -> CMat<T> {
    let outer = a.nrows() / inner;
    Mat::from_fn(inner, inner, |i, j| {
        (0..outer).fold(Cx::zero(), |acc, s| acc + a[(s * inner + i, s * inner + j)])
    })
}

/// Expands a Hermitian 2x2 matrix as `a0 I + a . sigma`; returns `(a0, a)`, complex in general.
pub fn pauli_components<T: Real>(m: &CMat<T>) -> (Cx<T>, [Cx<T>; 3]) {
    let half = T::lit(0.5);
    let i = cx(T::zero(), T::one());
    let a0 = (m[(0, 0)] + m[(1, 1)]) * half;
    let ax = (m[(0, 1)] + m[(1, 0)]) * half;
    let ay = (m[(1, 0)] - m[(0, 1)]) * half * (-i);
    let az = (m[(0, 0)] - m[(1, 1)]) * half;
    (a0, [ax, ay, az])
}

/// `a0 I + a . sigma` for a complex coefficient vector.
pub fn from_pauli<T: Real>(a0: Cx<T>, a: [Cx<T>; 3]) -> CMat<T> {
    let i = cx(T::zero(), T::one());
    from_rows([[a0 + a[2], a[0] - i * a[1]], [a[0] + i * a[1], a0 - a[2]]])
}

pub fn from_real_vector<T: Real>(a: [T; 3]) -> CMat<T> {
    from_pauli(Cx::zero(), a.map(|x| cx(x, T::zero())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pauli_algebra() {
        let [x, y, z] = pauli::<f64>();
        let xy = mul(&x, &y);
        let iz = scale(&z, cx(0.0, 1.0));
        assert!(max_abs_diff(&xy, &iz) < 1e-15);
        for s in [&x, &y, &z] {
            assert!(max_abs_diff(&mul(s, s), &identity(2)) < 1e-15);
        }
    }

    #[test]
    fn pauli_roundtrip() {
        let a0 = cx(0.3, 0.1);
        let a = [cx(1.0, -0.2), cx(-0.7, 0.4), cx(0.25, 0.0)];
        let (b0, b) = pauli_components(&from_pauli(a0, a));
        assert_abs_diff_eq!((b0 - a0).norm(), 0.0, epsilon = 1e-15);
        for k in 0..3 {
            assert_abs_diff_eq!((b[k] - a[k]).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn eigh_reconstructs() {
        let a = Mat::from_fn(5, 5, |i: usize, j: usize| {
            cx((i as f64 + 2.0 * j as f64).sin(), (0.7 * i as f64 - 0.3 * j as f64).cos())
        });
        let a = add(&a, &adjoint(&a));
        let e = eigh(&a).unwrap();
        for w in e.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
        let d = Mat::from_fn(5, 5, |i, j| if i == j { cx(e.values[i], 0.0) } else { Cx::zero() });
        let back = mul(&mul(&e.vectors, &d), &adjoint(&e.vectors));
        assert!(max_abs_diff(&back, &a) < 1e-12);
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let a = from_rows([[cx(1.0, 0.0), cx(1.0, 0.0)], [cx(0.0, 0.0), cx(1.0, 0.0)]]);
        assert!(matches!(eigh(&a), Err(OeeError::NonHermitian { .. })));
    }

    #[test]
    fn det_matches_product_of_eigenvalues() {
        let a = from_rows([
            [cx(2.0, 0.0), cx(0.0, 1.0), cx(0.5, 0.0)],
            [cx(0.0, -1.0), cx(3.0, 0.0), cx(0.0, 0.0)],
            [cx(0.5, 0.0), cx(0.0, 0.0), cx(1.0, 0.0)],
        ]);
        let p: f64 = eigvalsh(&a).unwrap().iter().product();
        assert_abs_diff_eq!(det(&a).re, p, epsilon = 1e-12);
        assert_abs_diff_eq!(det(&a).im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn partial_trace_of_kron() {
        let [x, y, _] = pauli::<f64>();
        let k = kron(&x, &y);
        assert!(max_abs(&partial_trace_outer(&k, 2)) < 1e-15);
        let k = kron(&identity(2), &y);
        assert!(max_abs_diff(&partial_trace_outer(&k, 2), &scale(&y, cx(2.0, 0.0))) < 1e-15);
    }

    #[test]
    fn works_in_single_precision() {
        let [x, _, z] = pauli::<f32>();
        let e = eigvalsh(&add(&x, &z)).unwrap();
        assert!((e[0] + 2f32.sqrt()).abs() < 1e-6);
    }
}
