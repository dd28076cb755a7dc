use nalgebra::{Schur, SymmetricEigen};

use super::NumError;
use crate::{Mat, C64};

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 10_000;

/// Complex eigenvalues from the real Schur form (shifted QR on Hessenberg form).
pub fn eigenvalues(a: &Mat) -> Result<Vec<C64>, NumError> {
    if !a.is_square() {
        return Err(NumError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    if a.nrows() == 0 {
        return Ok(vec![]);
    }
    let schur =
        Schur::try_new(a.clone(), EIG_EPS, EIG_MAX_ITER).ok_or(NumError::NoConvergence("Schur decomposition"))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

pub fn sym_part(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// λ_min((a + aᵀ)/2).
pub fn min_real_eig_sym_part(a: &Mat) -> Result<f64, NumError> {
    if !a.is_square() {
        return Err(NumError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    if a.nrows() == 0 {
        return Ok(f64::NAN);
    }
    let eig = SymmetricEigen::try_new(sym_part(a), EIG_EPS, EIG_MAX_ITER)
        .ok_or(NumError::NoConvergence("symmetric eigensolver"))?;
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn diagonal_and_rotation() {
        let d = Mat::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.0, 3.0]);
        let ev = sorted(eigenvalues(&d).unwrap());
        let want = [-2.0, 1.0, 3.0];
        for (e, w) in ev.iter().zip(want) {
            assert!((e - C64::new(w, 0.0)).norm() < 1e-12);
        }
        let rot = Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let ev = sorted(eigenvalues(&rot).unwrap());
        assert!((ev[0] - C64::new(0.0, -1.0)).norm() < 1e-12);
        assert!((ev[1] - C64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn companion_matrix_roots() {
        // (x-1)(x-2)(x+3) = x³ - 7x + 6
        let c = Mat::from_row_slice(3, 3, &[0.0, 7.0, -6.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let ev = sorted(eigenvalues(&c).unwrap());
        for (e, w) in ev.iter().zip([-3.0, 1.0, 2.0]) {
            assert!((e - C64::new(w, 0.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn sym_part_min_eig() {
        // skew part does not affect the quadratic form
        let a = Mat::from_row_slice(2, 2, &[2.0, 5.0, -5.0, 1.0]);
        assert!((min_real_eig_sym_part(&a).unwrap() - 1.0).abs() < 1e-12);
        let neg = -Mat::identity(3, 3);
        assert!((min_real_eig_sym_part(&neg).unwrap() + 1.0).abs() < 1e-12);
    }
}
