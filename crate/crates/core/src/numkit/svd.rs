use nalgebra::SVD;

use crate::Mat;

// eigen-residual tolerance; the Rayleigh quotient error is quadratic in it,
// so this pins λ(aᵀa) to roughly 1e-14 relative
const POWER_RESID_TOL: f64 = 1e-7;
const POWER_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// rows×k, orthonormal columns
    pub u: Mat,
    /// nonincreasing
    pub sigma: Vec<f64>,
    /// cols×k, orthonormal columns
    pub v: Mat,
}

impl SvdFactors {
    pub fn rank(&self, rel_tol: f64) -> usize {
        let top = self.sigma.first().copied().unwrap_or(0.0);
        self.sigma.iter().filter(|&&s| s > rel_tol * top).count()
    }
}

pub fn svd(a: &Mat) -> SvdFactors {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return SvdFactors { u: Mat::zeros(m, 0), sigma: vec![], v: Mat::zeros(n, 0) };
    }
    let f = SVD::new(a.clone(), true, true);
    let u = f.u.expect("requested u");
    let v = f.v_t.expect("requested v_t").transpose();
    let mut order: Vec<usize> = (0..f.singular_values.len()).collect();
    order.sort_by(|&i, &j| f.singular_values[j].total_cmp(&f.singular_values[i]));
    SvdFactors {
        u: Mat::from_fn(m, order.len(), |r, c| u[(r, order[c])]),
        sigma: order.iter().map(|&k| f.singular_values[k]).collect(),
        v: Mat::from_fn(n, order.len(), |r, c| v[(r, order[c])]),
    }
}

/// Sum of the leading `r` rank-one terms; `r` is clipped to the available rank.
pub fn truncate(f: &SvdFactors, r: usize) -> Mat {
    let r = r.min(f.sigma.len());
    let mut out = Mat::zeros(f.u.nrows(), f.v.nrows());
    for k in 0..r {
        out += f.sigma[k] * f.u.column(k) * f.v.column(k).transpose();
    }
    out
}

/// U·diag(max(σ−τ, 0))·Vᵀ, the proximal operator of τ‖·‖_*.
pub fn svt(a: &Mat, tau: f64) -> Mat {
    let f = svd(a);
    let mut out = Mat::zeros(a.nrows(), a.ncols());
    for (k, &s) in f.sigma.iter().enumerate() {
        let shrunk = s - tau;
        if shrunk > 0.0 {
            out += shrunk * f.u.column(k) * f.v.column(k).transpose();
        }
    }
    out
}

/// Singular values only, nonincreasing.
pub fn singular_values(a: &Mat) -> Vec<f64> {
    if a.is_empty() {
        return vec![];
    }
    let mut s: Vec<f64> = SVD::new(a.clone(), false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn nuclear_norm(a: &Mat) -> f64 {
    singular_values(a).iter().sum()
}

/// Largest singular value by power iteration on aᵀa, falling back to the SVD
/// when the iteration stalls or the start vector is deficient.
pub fn spectral_norm(a: &Mat) -> f64 {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return 0.0;
    }
    let ones = vec![1.0; n];
    let alt: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -0.5 }).collect();
    match (power_sigma(a, &ones), power_sigma(a, &alt)) {
        (Some(x), Some(y)) => x.max(y),
        _ => svd(a).sigma[0],
    }
}

fn power_sigma(a: &Mat, start: &[f64]) -> Option<f64> {
    let ata = a.transpose() * a;
    let mut x = nalgebra::DVector::from_column_slice(start);
    for _ in 0..POWER_MAX_ITER {
        let nx = x.norm();
        if nx == 0.0 {
            return None;
        }
        x /= nx;
        let y = &ata * &x;
        let lambda = x.dot(&y);
        if lambda <= 0.0 {
            return if ata.amax() == 0.0 { Some(0.0) } else { None };
        }
        if (&y - lambda * &x).norm() <= POWER_RESID_TOL * lambda {
            return Some(lambda.sqrt());
        }
        x = y;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn factors_are_orthonormal_and_reconstruct() {
        let a = random(10, 20, 1);
        let f = svd(&a);
        assert_eq!(f.sigma.len(), 10);
        assert!(f.sigma.windows(2).all(|w| w[0] >= w[1]));
        assert!((f.u.transpose() * &f.u - Mat::identity(10, 10)).norm() < 1e-10);
        assert!((f.v.transpose() * &f.v - Mat::identity(10, 10)).norm() < 1e-10);
        assert!((truncate(&f, 10) - &a).norm() / a.norm() < 1e-10);
    }

    #[test]
    fn truncate_diagonal() {
        let a = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let t = truncate(&svd(&a), 2);
        let want = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0, 0.0]));
        assert!((t - want).amax() < 1e-12);
        assert!((truncate(&svd(&a), 99) - &a).amax() < 1e-12);
    }

    #[test]
    fn rank_one_outer_product() {
        let x = nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let y = nalgebra::DVector::from_vec(vec![0.3, 1.0, -1.0]);
        let f = svd(&(x * y.transpose()));
        assert!(f.sigma[1] < 1e-12 && f.sigma[2] < 1e-12);
        assert_eq!(f.rank(1e-10), 1);
    }

    #[test]
    fn spectral_norm_cases() {
        let d = Mat::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 2.0]);
        assert!((spectral_norm(&d) - 3.0).abs() < 1e-10);
        let (s, c) = 0.3f64.sin_cos();
        let rot = Mat::from_row_slice(2, 2, &[c, -s, s, c]);
        assert!((spectral_norm(&rot) - 1.0).abs() < 1e-10);
        let a = random(30, 30, 3);
        assert!((spectral_norm(&a) - svd(&a).sigma[0]).abs() < 1e-9);
        // all-ones start vector lies in the null space here
        let null = Mat::from_row_slice(1, 2, &[1.0, -1.0]);
        assert!((spectral_norm(&null) - 2f64.sqrt()).abs() < 1e-10);
        assert_eq!(spectral_norm(&Mat::zeros(3, 2)), 0.0);
    }

    #[test]
    fn svt_cases() {
        let a = random(4, 6, 5);
        assert!((svt(&a, 0.0) - &a).amax() < 1e-12);
        assert_eq!(svt(&a, svd(&a).sigma[0]).amax(), 0.0);
        let d = Mat::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let want = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((svt(&d, 2.0) - want).amax() < 1e-12);
    }
}
