//! Seeded random streams and Gaussian sampling helpers.

use nalgebra::{DMatrix, SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// The random stream type used throughout the simulator.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a path of counters.
///
/// Each path element is folded through a splitmix64 round, so streams
/// identified by different paths are independent and adding new paths never
/// perturbs existing ones.
pub fn derive_seed(parent: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(parent), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(0x5851_f42d_4c95_7f2d))))
}

/// Stable tag for a string label, usable as a [`derive_seed`] path element.
pub fn label_tag(label: &str) -> u64 {
    // FNV-1a
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Symmetric square-root factor `S` with `S Sᵀ = cov` for a PSD matrix.
///
/// Small negative eigenvalues from round-off are clamped to zero.
pub fn psd_sqrt<const N: usize>(cov: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    let sym = DMatrix::from_fn(N, N, |i, j| 0.5 * (cov[(i, j)] + cov[(j, i)]));
    let eig = sym.symmetric_eigen();
    let mut scaled = eig.eigenvectors.clone();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        scaled.column_mut(k).scale_mut(s);
    }
    let root = &scaled * eig.eigenvectors.transpose();
    SMatrix::from_fn(|i, j| root[(i, j)])
}

pub fn standard_normal<const N: usize, R: Rng + ?Sized>(rng: &mut R) -> SVector<f64, N> {
    SVector::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Draws from `N(0, S Sᵀ)` given a square-root factor `S`.
pub fn sample_with_sqrt<const N: usize, R: Rng + ?Sized>(
    sqrt: &SMatrix<f64, N, N>,
    rng: &mut R,
) -> SVector<f64, N> {
    sqrt * standard_normal::<N, R>(rng)
}

pub fn is_symmetric_psd<const N: usize>(m: &SMatrix<f64, N, N>, tol: f64) -> bool {
    if m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let asym = (m - m.transpose()).abs().max();
    if asym > tol * (1.0 + m.abs().max()) {
        return false;
    }
    let sym = DMatrix::from_fn(N, N, |i, j| m[(i, j)]);
    sym.symmetric_eigenvalues().iter().all(|&l| l >= -tol * (1.0 + m.abs().max()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    #[test]
    fn derived_seeds_differ_by_path() {
        let a = derive_seed(7, &[1, 2]);
        let b = derive_seed(7, &[2, 1]);
        let c = derive_seed(7, &[1, 2, 0]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(7, &[1, 2]));
    }

    #[test]
    fn sqrt_reconstructs_psd_matrix() {
        let cov = Matrix3::new(4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0);
        let s = psd_sqrt(&cov);
        assert!((s * s.transpose() - cov).norm() < 1e-12);
        let zero = psd_sqrt(&Matrix3::zeros());
        assert_eq!(zero, Matrix3::zeros());
    }

    #[test]
    fn psd_check_rejects_indefinite() {
        assert!(is_symmetric_psd(&Matrix3::identity(), 1e-12));
        assert!(!is_symmetric_psd(&Matrix3::from_diagonal(&[1.0, -1.0, 1.0].into()), 1e-12));
        assert!(!is_symmetric_psd(&Matrix3::new(1.0, 2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0), 1e-12));
    }
}
