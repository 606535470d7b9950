//! Dense least-squares helpers shared by the regression routines.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff for rank decisions in the pseudo-inverse.
pub const PINV_RCOND: f64 = 1e-10;

/// Minimal-norm least-squares solution `K = B A^+` of `min_K ||K A - B||_F`,
/// computed through the SVD of `A` with singular values below
/// `rcond * sigma_max` treated as zero. A positive `ridge` replaces the
/// reciprocal singular values by the Tikhonov filter `s / (s^2 + ridge)`.
pub fn lstsq_left(a: &DMatrix<f64>, b: &DMatrix<f64>, rcond: f64, ridge: f64) -> DMatrix<f64> {
    assert_eq!(
        a.ncols(),
        b.ncols(),
        "regressor and target must share the sample axis"
    );
    // K A = B  <=>  A^T K^T = B^T; solve through A = U S V^T.
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let smax = svd.singular_values.max();
    let cutoff = rcond * smax;

    // B A^+ = B V S^+ U^T
    let mut bv = b * v_t.transpose(); // (rows_b x r)
    for (j, &s) in svd.singular_values.iter().enumerate() {
        let f = if s > cutoff && s > 0.0 {
            if ridge > 0.0 {
                s / (s * s + ridge)
            } else {
                1.0 / s
            }
        } else {
            0.0
        };
        bv.column_mut(j).scale_mut(f);
    }
    bv * u.transpose()
}

/// Solve the square linear system `M x = rhs` by LU with full pivoting.
/// Returns `None` when `M` is numerically singular.
pub fn solve_square(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    m.clone().full_piv_lu().solve(rhs)
}

/// Frobenius norm of `K A - B`.
pub fn residual_fro(k: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (k * a - b).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_solve_on_full_rank_data() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, -1.0, 0.5, -1.0, 2.0]);
        let k_true = DMatrix::from_row_slice(2, 2, &[0.3, -1.2, 2.0, 0.7]);
        let b = &k_true * &a;
        let k = lstsq_left(&a, &b, PINV_RCOND, 0.0);
        assert!((&k - &k_true).norm() < 1e-12);
    }

    #[test]
    fn minimal_norm_on_rank_deficient_data() {
        // Single sample: any K with K a = b fits; the SVD route returns the
        // minimal-Frobenius-norm one, b a^T / ||a||^2.
        let a = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 2.0]);
        let b = DMatrix::from_column_slice(3, 1, &[9.0, 0.0, -9.0]);
        let k = lstsq_left(&a, &b, PINV_RCOND, 0.0);
        assert!(residual_fro(&k, &a, &b) < 1e-10);
        let expected = &b * a.transpose() / a.norm_squared();
        assert!((&k - &expected).norm() < 1e-12);
    }

    #[test]
    fn ridge_shrinks_the_solution() {
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, -1.0, 0.0, 0.5, -1.0, 2.0, 1.0]);
        let b = DMatrix::from_row_slice(1, 4, &[3.0, -1.0, 0.25, 2.0]);
        let plain = lstsq_left(&a, &b, PINV_RCOND, 0.0);
        let damped = lstsq_left(&a, &b, PINV_RCOND, 10.0);
        assert!(damped.norm() < plain.norm());
    }
}
