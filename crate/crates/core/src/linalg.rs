//! Least squares through a thin QR factorisation, with a singular-value
//! rank check on the triangular factor.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value threshold below which a design is rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// A solved least-squares problem.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub beta: DVector<f64>,
    pub residuals: DVector<f64>,
    /// `(X'X)^-1`, built from the triangular factor.
    pub xtx_inv: DMatrix<f64>,
}

/// Minimises `‖y − Xβ‖²`. `names` label the columns of `x` for the
/// collinearity error.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<LeastSquares> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Domain(format!(
            "design has {n} rows but response has {}",
            y.len()
        )));
    }
    if p == 0 {
        return Err(Error::EmptyDesign("design has no columns".into()));
    }
    if n < p {
        return Err(Error::EmptyDesign(format!("{n} rows cannot identify {p} coefficients")));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    check_rank(&r, names)?;
    let qty = qr.q().transpose() * y;
    let beta = r.solve_upper_triangular(&qty).ok_or_else(|| Error::Collinear {
        columns: names.to_vec(),
        ratio: 0.0,
    })?;
    let residuals = y - x * &beta;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::Collinear {
            columns: names.to_vec(),
            ratio: 0.0,
        })?;
    let xtx_inv = &r_inv * r_inv.transpose();
    Ok(LeastSquares {
        beta,
        residuals,
        xtx_inv,
    })
}

fn check_rank(r: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let svd = r.clone().svd(false, true);
    let sv = &svd.singular_values;
    let max = sv.max();
    let min = sv.min();
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if ratio >= RANK_TOL && ratio.is_finite() {
        return Ok(());
    }
    // columns taking part in a near-null right singular vector
    let v_t = svd.v_t.expect("requested V^T");
    let mut involved = vec![false; r.ncols()];
    for (k, s) in sv.iter().enumerate() {
        if max > 0.0 && s / max >= RANK_TOL {
            continue;
        }
        let row = v_t.row(k);
        let scale = row.amax();
        for (j, v) in row.iter().enumerate() {
            if v.abs() > 1e-6 * scale {
                involved[j] = true;
            }
        }
    }
    let columns = involved
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(j, _)| names.get(j).cloned().unwrap_or_else(|| format!("column {j}")))
        .collect();
    Err(Error::Collinear { columns, ratio })
}

/// `B M B` made exactly symmetric.
pub fn sandwich(bread: &DMatrix<f64>, meat: &DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(bread * meat * bread)
}

pub fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Smallest eigenvalue is at least `-tol · max(trace, tiny)`.
pub fn is_psd(m: &DMatrix<f64>, tol: f64) -> bool {
    let trace = m.trace().abs().max(f64::MIN_POSITIVE);
    let eig = symmetrize(m.clone()).symmetric_eigenvalues();
    eig.iter().all(|&l| l >= -tol * trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|j| format!("c{j}")).collect()
    }

    #[test]
    fn exact_fit() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, 2.0, 1.0, 4.0, 1.0, 7.0]);
        let y = DVector::from_vec(vec![7.0, 9.0, 13.0, 19.0]);
        let ls = least_squares(&x, &y, &names(2)).unwrap();
        assert!((ls.beta[0] - 5.0).abs() < 1e-12);
        assert!((ls.beta[1] - 2.0).abs() < 1e-12);
        assert!(ls.residuals.amax() < 1e-12);
        let direct = (x.transpose() * &x).try_inverse().unwrap();
        assert!((ls.xtx_inv - direct).amax() < 1e-12);
    }

    #[test]
    fn duplicated_column_names_both() {
        let x = DMatrix::from_row_slice(4, 3, &[1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 1.0, 3.0, 3.0, 1.0, 5.0, 5.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        match least_squares(&x, &y, &names(3)) {
            Err(Error::Collinear { columns, .. }) => assert_eq!(columns, vec!["c1".to_string(), "c2".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_column_is_collinear() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(matches!(least_squares(&x, &y, &names(2)), Err(Error::Collinear { .. })));
    }

    #[test]
    fn psd_check() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!(is_psd(&m, 1e-10));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(!is_psd(&m, 1e-10));
    }
}
