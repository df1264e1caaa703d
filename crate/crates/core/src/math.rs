//! Scalar numerical helpers shared by the pricing engines.

/// Standard normal cumulative distribution function.
///
/// Computed through `erfc` so that both tails underflow cleanly instead of
/// losing precision to cancellation.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * libm::exp(-0.5 * x * x)
}

/// Inverse of the standard normal CDF for p in (0, 1).
///
/// Acklam's rational approximation (~1e-9 relative) followed by one Halley
/// step against the erfc-based CDF, which brings the result to full f64
/// accuracy. Deterministic across platforms.
pub fn norm_inv(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * libm::log(1.0 - p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // One Halley refinement step.
    let e = norm_cdf(x) - p;
    let u = e * libm::sqrt(2.0 * core::f64::consts::PI) * libm::exp(0.5 * x * x);
    x - u / (1.0 + 0.5 * x * u)
}

/// Cholesky factor (lower triangular, row major) of a symmetric matrix.
///
/// Returns `None` when the matrix is not positive definite to working
/// precision.
pub fn cholesky(matrix: &[f64], dim: usize) -> Option<alloc::vec::Vec<f64>> {
    debug_assert_eq!(matrix.len(), dim * dim);
    let mut lower = alloc::vec![0.0f64; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut sum = matrix[i * dim + j];
            for k in 0..j {
                sum -= lower[i * dim + k] * lower[j * dim + k];
            }
            if i == j {
                if sum <= 1e-14 {
                    return None;
                }
                lower[i * dim + i] = libm::sqrt(sum);
            } else {
                lower[i * dim + j] = sum / lower[j * dim + j];
            }
        }
    }
    Some(lower)
}

/// Solves a tridiagonal system in place (Thomas algorithm).
///
/// `sub[i]`, `diag[i]`, `sup[i]` are the coefficients of row `i`
/// (`sub[0]` and `sup[n-1]` are ignored). `rhs` is overwritten with the
/// solution. The caller guarantees diagonal dominance.
pub fn solve_tridiagonal(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &mut [f64],
    scratch: &mut [f64],
) {
    let n = diag.len();
    scratch[0] = sup[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let m = 1.0 / (diag[i] - sub[i] * scratch[i - 1]);
        scratch[i] = sup[i] * m;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) * m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn cdf_symmetry_and_known_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((norm_cdf(1.0) - 0.8413447460685429).abs() < 1e-12);
        for &x in &[0.1, 0.7, 1.3, 2.9, 5.5] {
            assert!((norm_cdf(x) + norm_cdf(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn inverse_cdf_round_trips() {
        for i in 1..200 {
            let p = i as f64 / 200.0;
            let x = norm_inv(p);
            assert!((norm_cdf(x) - p).abs() < 1e-13, "p={p}");
        }
        // Deep tails.
        for &p in &[1e-12, 1e-8, 1e-4, 1.0 - 1e-4, 1.0 - 1e-8] {
            let x = norm_inv(p);
            assert!((norm_cdf(x) - p).abs() / p.min(1.0 - p) < 1e-9);
        }
    }

    #[test]
    fn cholesky_recomposes() {
        let d = 3;
        let m = vec![1.0, 0.3, 0.3, 0.3, 1.0, 0.3, 0.3, 0.3, 1.0];
        let l = cholesky(&m, d).unwrap();
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += l[i * d + k] * l[j * d + k];
                }
                assert!((s - m[i * d + j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cholesky_rejects_non_psd() {
        // Correlation -0.9 in dimension 3 with the other pair at 0.9 is not PSD.
        let m = vec![1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0];
        assert!(cholesky(&m, 3).is_none());
    }

    #[test]
    fn tridiagonal_solver_matches_direct() {
        let n = 5;
        let sub = [0.0, -1.0, -1.0, -1.0, -1.0];
        let diag = [4.0; 5];
        let sup = [-1.0, -1.0, -1.0, -1.0, 0.0];
        let x_true = [1.0, -2.0, 3.0, 0.5, -1.5];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = diag[i] * x_true[i];
            if i > 0 {
                rhs[i] += sub[i] * x_true[i - 1];
            }
            if i + 1 < n {
                rhs[i] += sup[i] * x_true[i + 1];
            }
        }
        let mut scratch = vec![0.0; n];
        solve_tridiagonal(&sub, &diag, &sup, &mut rhs, &mut scratch);
        for i in 0..n {
            assert!((rhs[i] - x_true[i]).abs() < 1e-12);
        }
    }
}
