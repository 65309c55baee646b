//! Tripartite state types: dimensions, pure states, density matrices and the
//! partial trace.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;

/// One of the three parties of the composite system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
    C,
}

impl Party {
    pub const ALL: [Party; 3] = [Party::A, Party::B, Party::C];
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Party::A => "A",
            Party::B => "B",
            Party::C => "C",
        };
        f.write_str(s)
    }
}

impl FromStr for Party {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Party::A),
            "B" | "b" => Ok(Party::B),
            "C" | "c" => Ok(Party::C),
            other => Err(Error::Contract(format!("unknown subsystem label {other:?}"))),
        }
    }
}

/// Parses a label set such as `"AB"` into canonical (sorted) order.
pub fn parse_parties(s: &str) -> Result<Vec<Party>> {
    let mut parties = s
        .chars()
        .map(|c| c.to_string().parse())
        .collect::<Result<Vec<Party>>>()?;
    let n = parties.len();
    parties.sort();
    parties.dedup();
    if parties.len() != n {
        return Err(Error::Contract(format!("repeated subsystem label in {s:?}")));
    }
    Ok(parties)
}

pub fn format_parties(parties: &[Party]) -> String {
    parties.iter().map(Party::to_string).collect()
}

/// Local dimensions `(d_A, d_B, d_C)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[usize; 3]", into = "[usize; 3]")]
pub struct Dims {
    a: usize,
    b: usize,
    c: usize,
}

impl Dims {
    pub fn new(a: usize, b: usize, c: usize) -> Result<Self> {
        if a == 0 || b == 0 || c == 0 {
            return Err(Error::Contract(format!(
                "dimensions must be positive, got ({a}, {b}, {c})"
            )));
        }
        // Density matrices over the full space need total² entries.
        let fits = a
            .checked_mul(b)
            .and_then(|ab| ab.checked_mul(c))
            .and_then(|t| t.checked_mul(t))
            .is_some();
        if !fits {
            return Err(Error::Contract(format!("dimensions ({a}, {b}, {c}) overflow")));
        }
        Ok(Dims { a, b, c })
    }

    pub fn a(&self) -> usize {
        self.a
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn get(&self, party: Party) -> usize {
        match party {
            Party::A => self.a,
            Party::B => self.b,
            Party::C => self.c,
        }
    }

    pub fn total(&self) -> usize {
        self.a * self.b * self.c
    }

    /// Local dimensions of `parties`, in the given order.
    pub fn of(&self, parties: &[Party]) -> Vec<usize> {
        parties.iter().map(|&p| self.get(p)).collect()
    }
}

impl TryFrom<[usize; 3]> for Dims {
    type Error = Error;

    fn try_from(d: [usize; 3]) -> Result<Self> {
        Dims::new(d[0], d[1], d[2])
    }
}

impl From<Dims> for [usize; 3] {
    fn from(d: Dims) -> Self {
        [d.a, d.b, d.c]
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.a, self.b, self.c)
    }
}

/// Row-major flat index of `|i⟩⊗|j⟩⊗|k⟩`.
pub fn flat_index(i: usize, j: usize, k: usize, dims: Dims) -> Result<usize> {
    if i >= dims.a || j >= dims.b || k >= dims.c {
        return Err(Error::Index { i, j, k, dims });
    }
    Ok((i * dims.b + j) * dims.c + k)
}

/// Unit-norm amplitude vector on `A⊗B⊗C`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    dims: Dims,
    amplitudes: DVector<Complex64>,
}

impl PureState {
    /// Wraps `amplitudes`, which must already have unit norm.
    pub fn new(dims: Dims, amplitudes: DVector<Complex64>) -> Result<Self> {
        check_len(dims, amplitudes.len())?;
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > tol::NORM {
            return Err(Error::Contract(format!("state norm {norm} is not 1")));
        }
        Ok(PureState { dims, amplitudes })
    }

    /// Wraps `amplitudes` after dividing by their norm.
    pub fn normalized(dims: Dims, amplitudes: DVector<Complex64>) -> Result<Self> {
        check_len(dims, amplitudes.len())?;
        let norm = amplitudes.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Contract(format!("cannot normalize vector of norm {norm}")));
        }
        Ok(PureState { dims, amplitudes: amplitudes.unscale(norm) })
    }

    /// Computational basis state `|ijk⟩`.
    pub fn basis(dims: Dims, i: usize, j: usize, k: usize) -> Result<Self> {
        let mut amplitudes = DVector::zeros(dims.total());
        amplitudes[flat_index(i, j, k, dims)?] = Complex64::new(1.0, 0.0);
        Ok(PureState { dims, amplitudes })
    }

    /// Normalized superposition of basis states `Σ c·|ijk⟩`.
    pub fn from_terms(dims: Dims, terms: &[(Complex64, [usize; 3])]) -> Result<Self> {
        let mut amplitudes = DVector::zeros(dims.total());
        for &(c, [i, j, k]) in terms {
            amplitudes[flat_index(i, j, k, dims)?] += c;
        }
        PureState::normalized(dims, amplitudes)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<Complex64> {
        self.amplitudes
    }

    pub fn amplitude(&self, i: usize, j: usize, k: usize) -> Result<Complex64> {
        Ok(self.amplitudes[flat_index(i, j, k, self.dims)?])
    }

    /// `e^{iθ}|ψ⟩`.
    pub fn with_global_phase(&self, theta: f64) -> PureState {
        let phase = Complex64::from_polar(1.0, theta);
        PureState { dims: self.dims, amplitudes: self.amplitudes.map(|z| z * phase) }
    }

    /// Rotates the largest-modulus amplitude onto the positive real axis.
    /// Ties go to the lowest flat index.
    pub fn canonicalize_phase(&mut self) {
        let mut best = 0;
        let mut best_norm = f64::NEG_INFINITY;
        for (n, z) in self.amplitudes.iter().enumerate() {
            let m = z.norm();
            if m > best_norm {
                best = n;
                best_norm = m;
            }
        }
        if best_norm > 0.0 {
            let z = self.amplitudes[best];
            let rot = z.conj() / best_norm;
            self.amplitudes.apply(|a| *a *= rot);
            self.amplitudes[best] = Complex64::new(best_norm, 0.0);
        }
    }

    /// `(U_A ⊗ U_B ⊗ U_C)|ψ⟩`. The operators must be square with the local
    /// dimensions; unitarity is the caller's concern beyond renormalization.
    pub fn apply_local(
        &self,
        ua: &DMatrix<Complex64>,
        ub: &DMatrix<Complex64>,
        uc: &DMatrix<Complex64>,
    ) -> Result<PureState> {
        let d = self.dims;
        for (u, n) in [(ua, d.a), (ub, d.b), (uc, d.c)] {
            if u.nrows() != n || u.ncols() != n {
                return Err(Error::Contract(format!(
                    "local operator is {}x{}, expected {n}x{n}",
                    u.nrows(),
                    u.ncols()
                )));
            }
        }
        let full = ua.kronecker(ub).kronecker(uc);
        PureState::normalized(d, full * &self.amplitudes)
    }

    /// Full projector `|ψ⟩⟨ψ|` over `ABC`.
    pub fn density_matrix(&self) -> DensityMatrix {
        let matrix = &self.amplitudes * self.amplitudes.adjoint();
        DensityMatrix::from_parts(Party::ALL.to_vec(), self.dims.of(&Party::ALL), matrix)
    }

    /// `Tr_discard |ψ⟩⟨ψ|`, keeping the parties in `keep`.
    pub fn partial_trace(&self, keep: &[Party]) -> Result<DensityMatrix> {
        let layout = TraceLayout::new(&Party::ALL, &self.dims.of(&Party::ALL), keep)?;
        // ρ = M M† with M[kept, traced] = ψ[kept + traced]
        let m = DMatrix::from_fn(layout.kept.len(), layout.traced.len(), |r, t| {
            self.amplitudes[layout.kept[r] + layout.traced[t]]
        });
        let matrix = &m * m.adjoint();
        Ok(DensityMatrix::from_parts(layout.keep, layout.kept_dims, matrix))
    }
}

fn check_len(dims: Dims, len: usize) -> Result<()> {
    if len != dims.total() {
        return Err(Error::Contract(format!(
            "amplitude vector has length {len}, dims {dims} need {}",
            dims.total()
        )));
    }
    Ok(())
}

/// `|⟨ψ1|ψ2⟩|²`.
pub fn fidelity(psi1: &PureState, psi2: &PureState) -> Result<f64> {
    if psi1.dims != psi2.dims {
        return Err(Error::Contract(format!(
            "fidelity between states of dims {} and {}",
            psi1.dims, psi2.dims
        )));
    }
    Ok(psi1.amplitudes.dotc(&psi2.amplitudes).norm_sqr().min(1.0))
}

/// `Tr ρ²`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    // Hermitian, so Tr ρ² = Σ |ρ_ij|²
    rho.matrix.iter().map(|z| z.norm_sqr()).sum()
}

/// Hermitian, unit-trace, positive semidefinite operator on the tensor product
/// of the labeled parties, flattened in label order (last label fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    parties: Vec<Party>,
    dims: Vec<usize>,
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validates and symmetrizes `matrix`. `parties` must be in canonical
    /// order with `dims` giving the matching local dimensions.
    pub fn new(parties: Vec<Party>, dims: Vec<usize>, matrix: DMatrix<Complex64>) -> Result<Self> {
        if parties.is_empty() || parties.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Contract(format!(
                "subsystem labels {:?} must be nonempty, distinct and ordered",
                parties
            )));
        }
        if dims.len() != parties.len() || dims.contains(&0) {
            return Err(Error::Contract(format!(
                "dims {dims:?} do not match subsystems {}",
                format_parties(&parties)
            )));
        }
        let n: usize = dims.iter().product();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Contract(format!(
                "matrix is {}x{}, subsystems need {n}x{n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Contract("matrix has non-finite entries".into()));
        }
        let asym = (0..n)
            .flat_map(|r| (0..n).map(move |c| (r, c)))
            .map(|(r, c)| (matrix[(r, c)] - matrix[(c, r)].conj()).norm())
            .fold(0.0, f64::max);
        if asym > tol::HERM {
            return Err(Error::Contract(format!("matrix is not Hermitian (max |M - M†| = {asym:e})")));
        }
        let rho = DensityMatrix::from_parts(parties, dims, matrix);
        let trace = rho.trace();
        if (trace - 1.0).abs() > tol::TRACE {
            return Err(Error::Contract(format!("trace {trace} is not 1")));
        }
        let min_eig = rho
            .matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -tol::PSD {
            return Err(Error::Contract(format!(
                "matrix is not positive semidefinite (smallest eigenvalue {min_eig:e})"
            )));
        }
        Ok(rho)
    }

    /// Builds without validation, symmetrizing `matrix`.
    pub(crate) fn from_parts(parties: Vec<Party>, dims: Vec<usize>, matrix: DMatrix<Complex64>) -> Self {
        let matrix = (&matrix + matrix.adjoint()).unscale(2.0);
        DensityMatrix { parties, dims, matrix }
    }

    pub fn parties(&self) -> &[Party] {
        &self.parties
    }

    /// Local dimensions, one per party.
    pub fn local_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        purity(self)
    }

    /// Frobenius norm of `self - other`; both must describe the same parties.
    pub fn distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.parties != other.parties || self.dims != other.dims {
            return Err(Error::Contract(format!(
                "cannot compare density matrices over {} {:?} and {} {:?}",
                format_parties(&self.parties),
                self.dims,
                format_parties(&other.parties),
                other.dims
            )));
        }
        Ok((&self.matrix - &other.matrix).norm())
    }

    /// `U ρ U†` for an operator `U` acting on the whole labeled space.
    pub fn conjugated(&self, u: &DMatrix<Complex64>) -> Result<DensityMatrix> {
        let n = self.dim();
        if u.nrows() != n || u.ncols() != n {
            return Err(Error::Contract(format!(
                "operator is {}x{}, expected {n}x{n}",
                u.nrows(),
                u.ncols()
            )));
        }
        DensityMatrix::new(self.parties.clone(), self.dims.clone(), u * &self.matrix * u.adjoint())
    }

    /// Reduced density matrix over `keep`.
    pub fn partial_trace(&self, keep: &[Party]) -> Result<DensityMatrix> {
        let layout = TraceLayout::new(&self.parties, &self.dims, keep)?;
        let matrix = DMatrix::from_fn(layout.kept.len(), layout.kept.len(), |r, c| {
            let (r0, c0) = (layout.kept[r], layout.kept[c]);
            layout.traced.iter().map(|&t| self.matrix[(r0 + t, c0 + t)]).sum()
        });
        Ok(DensityMatrix::from_parts(layout.keep, layout.kept_dims, matrix))
    }
}

/// Anything that can be reduced to a marginal.
pub trait PartialTrace {
    fn partial_trace(&self, keep: &[Party]) -> Result<DensityMatrix>;
}

impl PartialTrace for PureState {
    fn partial_trace(&self, keep: &[Party]) -> Result<DensityMatrix> {
        PureState::partial_trace(self, keep)
    }
}

impl PartialTrace for DensityMatrix {
    fn partial_trace(&self, keep: &[Party]) -> Result<DensityMatrix> {
        DensityMatrix::partial_trace(self, keep)
    }
}

/// Flat offsets contributed by the kept and traced parties; the full index of
/// `(kept r, traced t)` is `kept[r] + traced[t]`.
struct TraceLayout {
    keep: Vec<Party>,
    kept_dims: Vec<usize>,
    kept: Vec<usize>,
    traced: Vec<usize>,
}

impl TraceLayout {
    fn new(parties: &[Party], dims: &[usize], keep: &[Party]) -> Result<Self> {
        let mut keep = keep.to_vec();
        keep.sort();
        keep.dedup();
        if keep.is_empty() || keep.len() >= parties.len() || keep.iter().any(|p| !parties.contains(p)) {
            return Err(Error::Contract(format!(
                "keep set {:?} must be a nonempty proper subset of {}",
                format_parties(&keep),
                format_parties(parties)
            )));
        }
        let mut strides = vec![1; dims.len()];
        for n in (0..dims.len().saturating_sub(1)).rev() {
            strides[n] = strides[n + 1] * dims[n + 1];
        }
        let offsets = |want: bool| {
            let mut offs = vec![0usize];
            for ((p, &d), &s) in parties.iter().zip(dims).zip(&strides) {
                if keep.contains(p) == want {
                    offs = offs.iter().flat_map(|&o| (0..d).map(move |x| o + x * s)).collect();
                }
            }
            offs
        };
        let kept_dims = parties
            .iter()
            .zip(dims)
            .filter(|(p, _)| keep.contains(p))
            .map(|(_, &d)| d)
            .collect();
        Ok(TraceLayout { kept: offsets(true), traced: offsets(false), keep, kept_dims })
    }
}
