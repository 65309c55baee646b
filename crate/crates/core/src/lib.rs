//! Reconstruction of tripartite pure states `|ψ_ABC⟩` from the two bipartite
//! reduced density matrices `ρ_AB` and `ρ_BC`.
//!
//! The pipeline diagonalizes the marginals, pairs the Schmidt spectra of the
//! `A|BC` and `AB|C` cuts, expands the bipartite eigenvectors in products of
//! single-party eigenvectors and solves for the relative Schmidt phases on a
//! bipartite phase graph. Inputs outside the generic set (degenerate spectra,
//! vanishing overlaps) are refused with typed errors.
//!
//! Amplitudes are flattened row-major: `flat(i, j, k) = (i·d_B + j)·d_C + k`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod reconstruct;
pub mod spectral;
pub mod state;
pub mod tomography;

pub use error::{Error, Result};
pub use reconstruct::{reconstruct_tripartite, ReconstructionConfig, ReconstructionReport};
pub use spectral::{eig_hermitian, SpectralDecomposition};
pub use state::{flat_index, fidelity, purity, DensityMatrix, Dims, Party, PureState};

pub use num_complex::Complex64;

/// Absolute tolerances shared across the crate.
pub mod tol {
    /// Allowed deviation of a state vector's Euclidean norm from one.
    pub const NORM: f64 = 1e-10;
    /// Largest entrywise `|M - M†|` accepted (and symmetrized away) on input.
    pub const HERM: f64 = 1e-10;
    pub const TRACE: f64 = 1e-10;
    /// Smallest eigenvalue accepted for a density matrix is `-PSD`.
    pub const PSD: f64 = 1e-9;
    /// Frobenius error allowed between a matrix and its truncated eigen-expansion.
    pub const RANK_LEAK: f64 = 1e-8;
    /// Norm deficit of an eigenvector expanded in a retained product basis.
    pub const EXPANSION_LEAK: f64 = 1e-6;
}
