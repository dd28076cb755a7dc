use super::{inf_norm, NumError};
use crate::Mat;

const PIVOT_REL_TOL: f64 = 1e-14;

/// LU factorization with partial pivoting, PA = LU stored compactly.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &Mat) -> Result<Self, NumError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(NumError::NotSquare { rows: n, cols: a.ncols() });
        }
        let thresh = PIVOT_REL_TOL * inf_norm(a);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot > thresh) || pivot == 0.0 {
                return Err(NumError::SingularMatrix { column: k, pivot });
            }
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &Mat) -> Result<Mat, NumError> {
        let n = self.dim();
        if b.nrows() != n {
            return Err(NumError::DimensionMismatch(format!(
                "right-hand side has {} rows, matrix is {n}x{n}",
                b.nrows()
            )));
        }
        let mut x = Mat::zeros(n, b.ncols());
        for c in 0..b.ncols() {
            for i in 0..n {
                x[(i, c)] = b[(self.perm[i], c)];
            }
            for i in 0..n {
                let mut s = x[(i, c)];
                for j in 0..i {
                    s -= self.lu[(i, j)] * x[(j, c)];
                }
                x[(i, c)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for j in i + 1..n {
                    s -= self.lu[(i, j)] * x[(j, c)];
                }
                x[(i, c)] = s / self.lu[(i, i)];
            }
        }
        Ok(x)
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>, NumError> {
        let x = self.solve(&Mat::from_column_slice(b.len(), 1, b))?;
        Ok(x.as_slice().to_vec())
    }

    pub fn inverse(&self) -> Mat {
        self.solve(&Mat::identity(self.dim(), self.dim())).expect("identity has matching rows")
    }
}

pub fn lu_solve(a: &Mat, b: &Mat) -> Result<Mat, NumError> {
    Lu::factor(a)?.solve(b)
}

pub fn inverse(a: &Mat) -> Result<Mat, NumError> {
    Ok(Lu::factor(a)?.inverse())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_diagonal() {
        let b = Mat::from_column_slice(3, 1, &[1.0, -2.0, 3.0]);
        assert_eq!(lu_solve(&Mat::identity(3, 3), &b).unwrap(), b);
        let a = Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let x = lu_solve(&a, &Mat::from_column_slice(2, 1, &[2.0, 8.0])).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn random_50_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = Mat::from_fn(50, 50, |_, _| rng.random_range(-1.0..1.0));
        let b = Mat::from_fn(50, 3, |_, _| rng.random_range(-1.0..1.0));
        let x = lu_solve(&a, &b).unwrap();
        let r = &a * &x - &b;
        assert!(r.amax() <= 1e-10 * b.amax());
    }

    #[test]
    fn needs_pivoting() {
        let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let x = lu_solve(&a, &Mat::from_column_slice(2, 1, &[3.0, 5.0])).unwrap();
        assert_eq!(x.as_slice(), &[5.0, 3.0]);
    }

    #[test]
    fn singular_rejected() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(Lu::factor(&a), Err(NumError::SingularMatrix { column: 1, .. })));
        assert!(matches!(Lu::factor(&Mat::zeros(3, 3)), Err(NumError::SingularMatrix { .. })));
        assert!(matches!(Lu::factor(&Mat::zeros(2, 3)), Err(NumError::NotSquare { .. })));
    }
}
