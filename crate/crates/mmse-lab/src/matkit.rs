//! Small dense matrix kernel: Hermitian eigenvalues in descending order,
//! determinants in sign/log form, diagonal of the inverse, and principal
//! minors.
//!
//! Everything is dense and capped at 64x64; antenna counts never get close
//! to that. Determinants are only ever consumed as `sign * exp(log)` ratios,
//! so they are produced in that form from the start.

use crate::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Hard cap on matrix dimensions handled by this kernel.
pub const DIM_LIMIT: usize = 64;

/// Relative tolerance for the Hermitian-symmetry check.
const HERMITIAN_TOL: f64 = 1e-12;

/// A determinant as `sign * exp(log_abs)`. `sign == 0` marks an exactly
/// singular factorization and carries `log_abs = -inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLogDet {
    pub sign: i8,
    pub log_abs: f64,
}

impl SignedLogDet {
    pub fn value(&self) -> f64 {
        self.sign as f64 * self.log_abs.exp()
    }
}

fn check_square<T: nalgebra::Scalar>(a: &DMatrix<T>) -> Result<usize> {
    let (r, c) = a.shape();
    if r != c {
        return Err(Error::Domain(format!("matrix must be square, got {r}x{c}")));
    }
    if r == 0 {
        return Err(Error::Domain("matrix must be at least 1x1".into()));
    }
    if r > DIM_LIMIT {
        return Err(Error::DimensionLimit(r, DIM_LIMIT));
    }
    Ok(r)
}

fn check_hermitian(a: &DMatrix<Complex64>) -> Result<()> {
    let n = check_square(a)?;
    let mut scale = 0.0f64;
    let mut mismatch = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            scale = scale.max(a[(i, j)].norm());
            mismatch = mismatch.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    if scale == 0.0 || mismatch > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(if scale == 0.0 {
            f64::INFINITY
        } else {
            mismatch / scale
        }));
    }
    Ok(())
}

/// Eigenvalues of a Hermitian matrix, sorted descending. Ties keep their
/// solver order (stable sort); strictness is enforced downstream where the
/// determinant expansions actually require it.
pub fn hermitian_eig_desc(a: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    check_hermitian(a)?;
    let eig = nalgebra::SymmetricEigen::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or(Error::EigNonConvergence)?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|x, y| y.partial_cmp(x).expect("eigenvalues are finite"));
    Ok(vals)
}

/// Determinant of a real matrix in sign/log form via partially pivoted LU
/// with per-row max-abs prescaling. Never overflows; an exactly zero pivot
/// yields `sign = 0`.
pub fn signed_logdet(a: &DMatrix<f64>) -> Result<SignedLogDet> {
    let n = check_square(a)?;
    let mut m = a.clone();
    let mut sign: i8 = 1;
    let mut log_abs = 0.0f64;
    for r in 0..n {
        let s = (0..n).map(|c| m[(r, c)].abs()).fold(0.0f64, f64::max);
        if s == 0.0 {
            return Ok(SignedLogDet { sign: 0, log_abs: f64::NEG_INFINITY });
        }
        for c in 0..n {
            m[(r, c)] /= s;
        }
        log_abs += s.ln();
    }
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[(r, col)].abs() > m[(piv, col)].abs() {
                piv = r;
            }
        }
        let p = m[(piv, col)];
        if p == 0.0 {
            return Ok(SignedLogDet { sign: 0, log_abs: f64::NEG_INFINITY });
        }
        if piv != col {
            m.swap_rows(piv, col);
            sign = -sign;
        }
        if p < 0.0 {
            sign = -sign;
        }
        log_abs += p.abs().ln();
        for r in col + 1..n {
            let f = m[(r, col)] / p;
            for c in col + 1..n {
                let v = m[(col, c)];
                m[(r, c)] -= f * v;
            }
        }
    }
    Ok(SignedLogDet { sign, log_abs })
}

/// Natural-log determinant of a Hermitian positive-definite matrix via
/// Cholesky.
pub fn hpd_logdet(a: &DMatrix<Complex64>) -> Result<f64> {
    check_hermitian(a)?;
    let chol = nalgebra::Cholesky::new(a.clone()).ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        acc += l[(i, i)].re.ln();
    }
    Ok(2.0 * acc)
}

/// Diagonal of the inverse of a Hermitian positive-definite matrix. Each
/// entry is real and strictly positive.
pub fn diag_of_inverse(a: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    check_hermitian(a)?;
    let chol = nalgebra::Cholesky::new(a.clone()).ok_or(Error::NotPositiveDefinite)?;
    let inv = chol.inverse();
    let mut out = Vec::with_capacity(a.nrows());
    for i in 0..a.nrows() {
        let v = inv[(i, i)].re;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        out.push(v);
    }
    Ok(out)
}

/// The `(i,i)`-th principal minor: `a` with row `i` and column `i` removed.
pub fn principal_minor<T: nalgebra::Scalar>(a: &DMatrix<T>, i: usize) -> DMatrix<T> {
    a.clone().remove_row(i).remove_column(i)
}

/// Solve the dual Vandermonde system `V a = f` in place, where
/// `V[s][t] = x_s^t` (ascending powers, `t = 0..n-1`), by the
/// Bjorck-Pereyra divided-difference scheme. On return `f` holds the
/// monomial coefficients of the interpolant.
///
/// By Cramer's rule, coefficient `t` equals `det(V with column t replaced
/// by f) / det V` — exactly the Vandermonde determinant ratios of the
/// eigenvalue expansions, but computed without forming either determinant.
/// This stays accurate where explicit LU determinants lose everything
/// (clustered nodes, near-proportional modified columns).
pub(crate) fn vandermonde_coeffs(x: &[f64], f: &mut [f64]) {
    let n = x.len();
    debug_assert_eq!(f.len(), n);
    for k in 0..n.saturating_sub(1) {
        for i in ((k + 1)..n).rev() {
            f[i] = (f[i] - f[i - 1]) / (x[i] - x[i - 1 - k]);
        }
    }
    for k in (0..n.saturating_sub(1)).rev() {
        for i in k..n - 1 {
            let next = f[i + 1];
            f[i] -= next * x[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn uniform(rng: &mut ChaCha8Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn random_complex(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(n, n, |_, _| c(uniform(rng) - 0.5, uniform(rng) - 0.5))
    }

    fn random_hpd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<Complex64> {
        let g = random_complex(rng, n);
        let mut a = &g * g.adjoint();
        for i in 0..n {
            a[(i, i)] += c(0.05 * n as f64, 0.0);
        }
        a
    }

    /// Cofactor-expansion determinant, the independent oracle.
    fn cofactor_det_c(a: &DMatrix<Complex64>) -> Complex64 {
        let n = a.nrows();
        if n == 1 {
            return a[(0, 0)];
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let mut sign = 1.0;
        for j in 0..n {
            let sub = a.clone().remove_row(0).remove_column(j);
            acc += sign * a[(0, j)] * cofactor_det_c(&sub);
            sign = -sign;
        }
        acc
    }

    fn cofactor_det_r(a: &DMatrix<f64>) -> f64 {
        cofactor_det_c(&a.map(|v| c(v, 0.0))).re
    }

    #[test]
    fn eig_exp_correlation_2x2() {
        let a = dmatrix![c(1.0,0.0), c(0.5,0.0); c(0.5,0.0), c(1.0,0.0)];
        let e = hermitian_eig_desc(&a).unwrap();
        assert!((e[0] - 1.5).abs() < 1e-12 && (e[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn eig_identity() {
        let a = DMatrix::<Complex64>::identity(3, 3);
        let e = hermitian_eig_desc(&a).unwrap();
        assert!(e.iter().all(|v| (v - 1.0).abs() < 1e-13));
    }

    #[test]
    fn eig_matches_characteristic_polynomial_roots() {
        // exp-correlation(3, 0.9): roots of l^3 - c2 l^2 + c1 l - c0 by the
        // trigonometric cubic formula (all roots real for symmetric input).
        let rho: f64 = 0.9;
        let a3 = dmatrix![
            c(1.0,0.0), c(rho,0.0), c(rho*rho,0.0);
            c(rho,0.0), c(1.0,0.0), c(rho,0.0);
            c(rho*rho,0.0), c(rho,0.0), c(1.0,0.0)
        ];
        let c2 = 3.0;
        let c1 = 2.0 * (1.0 - rho * rho) + (1.0 - rho.powi(4)); // sum of 2x2 principal minors
        let c0 = cofactor_det_c(&a3).re;
        // depressed cubic t^3 + p t + q = 0 with l = t + c2/3
        let p = c1 - c2 * c2 / 3.0;
        let q = -(2.0 * c2.powi(3) / 27.0 - c2 * c1 / 3.0 + c0);
        let m = 2.0 * (-p / 3.0).sqrt();
        let phi = ((3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt()).acos() / 3.0;
        let mut roots: Vec<f64> = (0..3)
            .map(|k| m * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + c2 / 3.0)
            .collect();
        roots.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let e = hermitian_eig_desc(&a3).unwrap();
        for (got, want) in e.iter().zip(&roots) {
            assert!((got - want).abs() < 1e-10, "eig {got} vs root {want}");
        }
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let a = dmatrix![c(1.0,0.0), c(0.5,0.1); c(0.5,0.1), c(1.0,0.0)];
        assert!(matches!(hermitian_eig_desc(&a), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn logdet_diagonal_and_singular() {
        let d = dmatrix![2.0, 0.0; 0.0, 3.0];
        let r = signed_logdet(&d).unwrap();
        assert_eq!(r.sign, 1);
        assert!((r.log_abs - 6.0f64.ln()).abs() < 1e-14);

        let s = dmatrix![1.0, 2.0; 2.0, 4.0]; // rank 1
        let r = signed_logdet(&s).unwrap();
        assert_eq!(r.sign, 0);
        assert_eq!(r.log_abs, f64::NEG_INFINITY);
    }

    #[test]
    fn logdet_matches_cofactor_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = DMatrix::from_fn(4, 4, |_, _| uniform(&mut rng) * 2.0 - 1.0);
            let want = cofactor_det_r(&a);
            let got = signed_logdet(&a).unwrap();
            assert_eq!(got.sign as f64, want.signum());
            assert!(
                (got.log_abs - want.abs().ln()).abs() < 1e-12 * got.log_abs.abs().max(1.0),
                "log {} vs {}",
                got.log_abs,
                want.abs().ln()
            );
        }
    }

    #[test]
    fn diag_inverse_simple_cases() {
        let i4 = DMatrix::<Complex64>::identity(4, 4);
        assert!(diag_of_inverse(&i4)
            .unwrap()
            .iter()
            .all(|v| (v - 1.0).abs() < 1e-14));
        let d = dmatrix![c(2.0,0.0), c(0.0,0.0); c(0.0,0.0), c(4.0,0.0)];
        let v = diag_of_inverse(&d).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-14 && (v[1] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn diag_inverse_is_minor_over_det() {
        // [Z^-1]_ii = det Z^ii / det Z for HPD Z, dims 2..=8.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..=8usize {
            let z = random_hpd(&mut rng, n);
            let det = cofactor_det_c(&z).re;
            let diag = diag_of_inverse(&z).unwrap();
            for i in 0..n {
                let minor = cofactor_det_c(&principal_minor(&z, i)).re;
                let want = minor / det;
                assert!(
                    (diag[i] - want).abs() <= 1e-10 * diag[i],
                    "n={n} i={i}: {} vs {}",
                    diag[i],
                    want
                );
            }
        }
    }

    #[test]
    fn eig_sum_is_trace_product_is_det() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n in [2usize, 3, 5, 8] {
            let a = random_hpd(&mut rng, n);
            let eigs = hermitian_eig_desc(&a).unwrap();
            let trace: f64 = (0..n).map(|i| a[(i, i)].re).sum();
            let sum: f64 = eigs.iter().sum();
            assert!((sum - trace).abs() < 1e-10 * trace.abs());
            let logdet: f64 = eigs.iter().map(|v| v.ln()).sum();
            let want = hpd_logdet(&a).unwrap();
            assert!((logdet - want).abs() < 1e-10 * want.abs().max(1.0));
        }
    }

    #[test]
    fn dimension_cap_enforced() {
        let a = DMatrix::<f64>::identity(65, 65);
        assert!(matches!(signed_logdet(&a), Err(Error::DimensionLimit(65, 64))));
    }

    #[test]
    fn vandermonde_solve_reproduces_polynomial() {
        // f(x) = 2 - x + 3x^2 sampled at 3 nodes recovers its coefficients,
        // and a 5-node solve matches the determinant-ratio definition.
        let x = [1.7, 0.8, 0.3];
        let mut f: Vec<f64> = x.iter().map(|&v| 2.0 - v + 3.0 * v * v).collect();
        vandermonde_coeffs(&x, &mut f);
        assert!((f[0] - 2.0).abs() < 1e-12 && (f[1] + 1.0).abs() < 1e-12 && (f[2] - 3.0).abs() < 1e-12);

        let nodes = [2.3, 1.4, 0.9, 0.55, 0.21];
        let vals: Vec<f64> = nodes.iter().map(|&v: &f64| (1.0 + v).ln() * v).collect();
        let mut coeffs = vals.clone();
        vandermonde_coeffs(&nodes, &mut coeffs);
        let n = nodes.len();
        let vmat = DMatrix::from_fn(n, n, |s, t| nodes[s].powi(t as i32));
        let det_v = cofactor_det_r(&vmat);
        for t in 0..n {
            let mut m = vmat.clone();
            for s in 0..n {
                m[(s, t)] = vals[s];
            }
            let ratio = cofactor_det_r(&m) / det_v;
            assert!(
                (coeffs[t] - ratio).abs() < 1e-9 * ratio.abs().max(1.0),
                "t={t}: {} vs {}",
                coeffs[t],
                ratio
            );
        }
    }
}
