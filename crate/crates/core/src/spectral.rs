//! Hermitian eigendecomposition with rank truncation, degeneracy screening and
//! the pairing of complementary Schmidt spectra.

use nalgebra::{DMatrix, DVectorView, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::DensityMatrix;
use crate::tol;

const MAX_SWEEPS: usize = 10_000;

/// Descending nonzero eigenvalues of a density matrix with their orthonormal
/// eigenvectors (one column each).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<Complex64>,
    original_dim: usize,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `original_dim × rank` matrix of eigenvectors.
    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, n: usize) -> DVectorView<'_, Complex64> {
        self.eigenvectors.column(n)
    }

    pub fn original_dim(&self) -> usize {
        self.original_dim
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V Λ V†`.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let mut scaled = self.eigenvectors.clone();
        for (n, &p) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(n).scale_mut(p);
        }
        scaled * self.eigenvectors.adjoint()
    }

    /// Smallest gap between consecutive retained eigenvalues, if there are two.
    pub fn min_gap(&self) -> Option<f64> {
        self.eigenvalues.windows(2).map(|w| w[0] - w[1]).reduce(f64::min)
    }
}

/// Diagonalizes `rho`, discarding eigenvalues `<= rank_threshold`.
pub fn eig_hermitian(rho: &DensityMatrix, rank_threshold: f64) -> Result<SpectralDecomposition> {
    eig_hermitian_matrix(rho.matrix(), rank_threshold)
}

/// Same as [`eig_hermitian`] on a bare Hermitian matrix.
pub fn eig_hermitian_matrix(m: &DMatrix<Complex64>, rank_threshold: f64) -> Result<SpectralDecomposition> {
    if !(rank_threshold > 0.0 && rank_threshold < 1.0) {
        return Err(Error::Contract(format!("rank threshold {rank_threshold} must lie in (0, 1)")));
    }
    if !m.is_square() {
        return Err(Error::Contract(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, MAX_SWEEPS)
        .ok_or_else(|| Error::Numerical(format!("eigensolver did not converge on {n}x{n} matrix")))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));
    order.retain(|&x| eig.eigenvalues[x] > rank_threshold);

    let eigenvalues: Vec<f64> = order.iter().map(|&x| eig.eigenvalues[x]).collect();
    let eigenvectors = DMatrix::from_fn(n, order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    let spec = SpectralDecomposition { eigenvalues, eigenvectors, original_dim: n };

    let leak = (m - spec.reconstruct()).norm();
    if !(leak <= tol::RANK_LEAK) {
        return Err(Error::Numerical(format!(
            "truncated eigen-expansion misses {leak:e} in Frobenius norm"
        )));
    }
    Ok(spec)
}

/// Clusters of retained eigenvalue indices whose consecutive gaps fall below
/// `gap_tol`. Empty means the spectrum is generic.
pub fn detect_degeneracy(spec: &SpectralDecomposition, gap_tol: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for (n, w) in spec.eigenvalues.windows(2).enumerate() {
        if w[0] - w[1] < gap_tol {
            if current.is_empty() {
                current.push(n);
            }
            current.push(n + 1);
        } else if !current.is_empty() {
            clusters.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        clusters.push(current);
    }
    clusters
}

/// Correspondence between the eigen-indices of a single-party marginal and
/// those of its complementary two-party marginal.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPairing {
    /// `permutation[i]` is the index in the complementary spectrum paired with `i`.
    pub permutation: Vec<usize>,
    pub max_pair_gap: f64,
}

/// Pairs two spectra that must coincide for marginals of one pure state.
///
/// Both spectra are sorted, so with degeneracy excluded the pairing is the
/// identity on descending order.
pub fn match_spectra(
    spec_single: &SpectralDecomposition,
    spec_pair: &SpectralDecomposition,
    pair_tol: f64,
) -> Result<SpectrumPairing> {
    if spec_single.rank() != spec_pair.rank() {
        return Err(Error::SpectrumMismatch(format!(
            "ranks differ: {} vs {}",
            spec_single.rank(),
            spec_pair.rank()
        )));
    }
    for spec in [spec_single, spec_pair] {
        let clusters = detect_degeneracy(spec, pair_tol);
        if !clusters.is_empty() {
            return Err(Error::GenericityViolation(format!(
                "degenerate eigenvalues {:?} at indices {clusters:?}",
                spec.eigenvalues
            )));
        }
    }
    let max_pair_gap = spec_single
        .eigenvalues
        .iter()
        .zip(&spec_pair.eigenvalues)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    if !(max_pair_gap <= pair_tol) {
        return Err(Error::SpectrumMismatch(format!(
            "paired eigenvalues differ by up to {max_pair_gap:e} (tolerance {pair_tol:e})"
        )));
    }
    Ok(SpectrumPairing { permutation: (0..spec_single.rank()).collect(), max_pair_gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sample_haar_state;
    use crate::state::{Dims, Party, PureState};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn diag(values: &[f64]) -> DMatrix<Complex64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(values.len(), values.iter().map(|&v| c(v))))
    }

    fn spec_of(values: &[f64]) -> SpectralDecomposition {
        SpectralDecomposition {
            eigenvalues: values.to_vec(),
            eigenvectors: DMatrix::identity(values.len(), values.len()),
            original_dim: values.len(),
        }
    }

    fn w_state() -> PureState {
        let d = Dims::new(2, 2, 2).unwrap();
        PureState::from_terms(d, &[(c(1.0), [0, 0, 1]), (c(1.0), [0, 1, 0]), (c(1.0), [1, 0, 0])]).unwrap()
    }

    #[test]
    fn isotropic_qubit() {
        let spec = eig_hermitian_matrix(&diag(&[0.5, 0.5]), 1e-10).unwrap();
        assert_eq!(spec.rank(), 2);
        for &p in spec.eigenvalues() {
            assert!((p - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn w_state_marginal() {
        let rho_a = w_state().partial_trace(&[Party::A]).unwrap();
        // brute force: ρ_A is diagonal with weights of |0⟩_A and |1⟩_A branches
        assert!((rho_a.matrix()[(0, 0)].re - 2.0 / 3.0).abs() < 1e-15);
        assert!(rho_a.matrix()[(0, 1)].norm() < 1e-15);
        let spec = eig_hermitian(&rho_a, 1e-10).unwrap();
        assert_eq!(spec.rank(), 2);
        assert!((spec.eigenvalues()[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((spec.eigenvalues()[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn truncates_null_space() {
        let spec = eig_hermitian_matrix(&diag(&[0.7, 0.3, 0.0]), 1e-12).unwrap();
        assert_eq!(spec.rank(), 2);
        assert_eq!(spec.original_dim(), 3);
        assert!((spec.eigenvalues()[0] - 0.7).abs() < 1e-15);
        assert!((spec.eigenvalues()[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rank_threshold_contract() {
        assert!(matches!(eig_hermitian_matrix(&diag(&[1.0]), 0.0), Err(Error::Contract(_))));
        assert!(matches!(eig_hermitian_matrix(&diag(&[1.0]), 1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn degeneracy_examples() {
        assert_eq!(detect_degeneracy(&spec_of(&[0.5, 0.5]), 1e-8), vec![vec![0, 1]]);
        assert!(detect_degeneracy(&spec_of(&[2.0 / 3.0, 1.0 / 3.0]), 1e-8).is_empty());
        assert_eq!(detect_degeneracy(&spec_of(&[0.4, 0.4 - 5e-9, 0.2]), 1e-8), vec![vec![0, 1]]);
        assert_eq!(
            detect_degeneracy(&spec_of(&[0.3, 0.3, 0.2, 0.1, 0.1]), 1e-8),
            vec![vec![0, 1], vec![3, 4]]
        );
    }

    #[test]
    fn w_state_spectra_pair() {
        let psi = w_state();
        let a = eig_hermitian(&psi.partial_trace(&[Party::A]).unwrap(), 1e-10).unwrap();
        let bc = eig_hermitian(&psi.partial_trace(&[Party::B, Party::C]).unwrap(), 1e-10).unwrap();
        let pairing = match_spectra(&a, &bc, 1e-8).unwrap();
        assert_eq!(pairing.permutation, vec![0, 1]);
        assert!(pairing.max_pair_gap <= 1e-10);
    }

    #[test]
    fn independent_states_mismatch() {
        let d = Dims::new(2, 2, 2).unwrap();
        let mut mismatches = 0;
        for seed in 0..50 {
            let a = eig_hermitian(&sample_haar_state(d, seed).partial_trace(&[Party::A]).unwrap(), 1e-10).unwrap();
            let other = sample_haar_state(d, 1000 + seed);
            let bc = eig_hermitian(&other.partial_trace(&[Party::B, Party::C]).unwrap(), 1e-10).unwrap();
            if let Err(Error::SpectrumMismatch(_)) = match_spectra(&a, &bc, 1e-8) {
                mismatches += 1;
            }
        }
        assert_eq!(mismatches, 50);
    }

    #[test]
    fn ghz_is_not_generic() {
        let d = Dims::new(2, 2, 2).unwrap();
        let ghz = PureState::from_terms(d, &[(c(1.0), [0, 0, 0]), (c(1.0), [1, 1, 1])]).unwrap();
        let a = eig_hermitian(&ghz.partial_trace(&[Party::A]).unwrap(), 1e-10).unwrap();
        let bc = eig_hermitian(&ghz.partial_trace(&[Party::B, Party::C]).unwrap(), 1e-10).unwrap();
        assert!(matches!(match_spectra(&a, &bc, 1e-8), Err(Error::GenericityViolation(_))));
    }

    #[test]
    fn rank_mismatch() {
        let err = match_spectra(&spec_of(&[1.0]), &spec_of(&[0.6, 0.4]), 1e-8).unwrap_err();
        assert!(matches!(err, Error::SpectrumMismatch(_)));
    }

    #[test]
    fn complementary_spectra_agree() {
        for seed in 0..20 {
            let psi = sample_haar_state(Dims::new(3, 2, 4).unwrap(), seed);
            let a = eig_hermitian(&psi.partial_trace(&[Party::A]).unwrap(), 1e-10).unwrap();
            let bc = eig_hermitian(&psi.partial_trace(&[Party::B, Party::C]).unwrap(), 1e-10).unwrap();
            assert_eq!(a.rank(), bc.rank());
            for (p, q) in a.eigenvalues().iter().zip(bc.eigenvalues()) {
                assert!((p - q).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn decomposition_is_stable_under_reconstruction() {
        for seed in 0..10 {
            let psi = sample_haar_state(Dims::new(3, 3, 3).unwrap(), seed);
            let rho = psi.partial_trace(&[Party::A, Party::B]).unwrap();
            let spec = eig_hermitian(&rho, 1e-10).unwrap();

            let v = spec.eigenvectors();
            let gram = v.adjoint() * v;
            let off = (&gram - DMatrix::<Complex64>::identity(spec.rank(), spec.rank())).camax();
            assert!(off <= 1e-10);

            let again = eig_hermitian_matrix(&spec.reconstruct(), 1e-10).unwrap();
            assert_eq!(again.rank(), spec.rank());
            for n in 0..spec.rank() {
                assert!((again.eigenvalues()[n] - spec.eigenvalues()[n]).abs() < 1e-10);
                let overlap = again.eigenvector(n).dotc(&spec.eigenvector(n)).norm();
                assert!(overlap >= 1.0 - 1e-9);
            }
        }
    }
}
