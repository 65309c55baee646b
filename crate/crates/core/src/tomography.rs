//! Reconstruction of a discretized spatial wavefunction `ψ(x, y, z)` from its
//! planar density matrices `ρ_XY` and `ρ_YZ`, with `X→A`, `Y→B`, `Z→C`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reconstruct::{reconstruct_tripartite, ReconstructionConfig};
use crate::state::{DensityMatrix, Dims, Party, PureState};

pub const MAX_GRID_POINTS: usize = 4096;
const GRID_NORM_TOL: f64 = 1e-9;

/// Grid sizes and spacings along `x`, `y`, `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    sizes: [usize; 3],
    spacings: [f64; 3],
}

impl GridSpec {
    pub fn new(sizes: [usize; 3], spacings: [f64; 3]) -> Result<Self> {
        if sizes.contains(&0) {
            return Err(Error::Contract(format!("grid sizes {sizes:?} must be positive")));
        }
        let points = sizes.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
        if !matches!(points, Some(p) if p <= MAX_GRID_POINTS) {
            return Err(Error::Contract(format!(
                "grid {sizes:?} exceeds {MAX_GRID_POINTS} points"
            )));
        }
        if spacings.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::Contract(format!("grid spacings {spacings:?} must be positive")));
        }
        Ok(GridSpec { sizes, spacings })
    }

    /// Grid centered on the origin spanning `[-3, 3]` along each axis of more
    /// than one point.
    pub fn centered(sizes: [usize; 3]) -> Result<Self> {
        let spacing = |n: usize| if n > 1 { 6.0 / (n - 1) as f64 } else { 1.0 };
        GridSpec::new(sizes, sizes.map(spacing))
    }

    pub fn sizes(&self) -> [usize; 3] {
        self.sizes
    }

    pub fn spacings(&self) -> [f64; 3] {
        self.spacings
    }

    pub fn points(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacings.iter().product()
    }

    pub fn dims(&self) -> Dims {
        let [nx, ny, nz] = self.sizes;
        Dims::new(nx, ny, nz).expect("grid sizes validated")
    }

    /// Coordinates of the grid points along `axis` (0, 1, 2 for x, y, z).
    pub fn coordinates(&self, axis: usize) -> Vec<f64> {
        let n = self.sizes[axis];
        let center = (n - 1) as f64 / 2.0;
        (0..n).map(|m| (m as f64 - center) * self.spacings[axis]).collect()
    }
}

/// Samples of `ψ` on a grid, `x` slowest and `z` fastest, with
/// `Σ |ψ|² · h_x h_y h_z = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWavefunction {
    grid: GridSpec,
    values: DVector<Complex64>,
}

impl GridWavefunction {
    pub fn new(grid: GridSpec, values: DVector<Complex64>) -> Result<Self> {
        if values.len() != grid.points() {
            return Err(Error::Contract(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.points()
            )));
        }
        let norm = values.norm_squared() * grid.cell_volume();
        if !((norm - 1.0).abs() <= GRID_NORM_TOL) {
            return Err(Error::Contract(format!("grid wavefunction has L² norm {norm}")));
        }
        Ok(GridWavefunction { grid, values })
    }

    pub fn normalized(grid: GridSpec, values: DVector<Complex64>) -> Result<Self> {
        let norm = (values.norm_squared() * grid.cell_volume()).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Contract(format!("cannot normalize grid wavefunction of norm {norm}")));
        }
        GridWavefunction::new(grid, values.unscale(norm))
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64, f64) -> Complex64) -> Result<Self> {
        let [xs, ys, zs] = [0, 1, 2].map(|a| grid.coordinates(a));
        let mut values = Vec::with_capacity(grid.points());
        for &x in &xs {
            for &y in &ys {
                for &z in &zs {
                    values.push(f(x, y, z));
                }
            }
        }
        GridWavefunction::normalized(grid, DVector::from_vec(values))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &DVector<Complex64> {
        &self.values
    }

    /// The grid samples as a unit vector over `X⊗Y⊗Z`.
    pub fn to_pure_state(&self) -> PureState {
        let amps = self.values.scale(self.grid.cell_volume().sqrt());
        PureState::normalized(self.grid.dims(), amps).expect("normalized grid wavefunction")
    }

    pub fn from_pure_state(grid: GridSpec, psi: &PureState) -> Result<Self> {
        if psi.dims() != grid.dims() {
            return Err(Error::Contract(format!("state dims {} do not match grid {:?}", psi.dims(), grid.sizes)));
        }
        GridWavefunction::normalized(grid, psi.amplitudes().clone())
    }

    /// `|∫ conj(ψ₁) ψ₂|²` on the common grid.
    pub fn fidelity(&self, other: &GridWavefunction) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Contract("fidelity between wavefunctions on different grids".into()));
        }
        let overlap = self.values.dotc(&other.values) * self.grid.cell_volume();
        Ok(overlap.norm_sqr().min(1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    XY,
    YZ,
}

/// `ρ_XY(xy; x'y') = Σ_z ψ(x,y,z) conj(ψ(x',y',z)) h_z` (and likewise for
/// `YZ`), rescaled to unit trace.
pub fn planar_density(psi: &GridWavefunction, plane: Plane) -> DensityMatrix {
    let [nx, ny, nz] = psi.grid.sizes;
    let [hx, _, hz] = psi.grid.spacings;
    let v = &psi.values;
    let (parties, dims, m, h) = match plane {
        Plane::XY => (
            vec![Party::A, Party::B],
            vec![nx, ny],
            DMatrix::from_fn(nx * ny, nz, |xy, z| v[xy * nz + z]),
            hz,
        ),
        Plane::YZ => (
            vec![Party::B, Party::C],
            vec![ny, nz],
            DMatrix::from_fn(ny * nz, nx, |yz, x| v[x * ny * nz + yz]),
            hx,
        ),
    };
    let rho = (&m * m.adjoint()).scale(h);
    let trace = rho.trace().re;
    DensityMatrix::from_parts(parties, dims, rho.unscale(trace))
}

/// Recovers `ψ` (up to global phase) from its two planar density matrices.
pub fn reconstruct_grid(
    rho_xy: &DensityMatrix,
    rho_yz: &DensityMatrix,
    grid: &GridSpec,
    config: &ReconstructionConfig,
) -> Result<GridWavefunction> {
    let report = reconstruct_tripartite(rho_xy, rho_yz, grid.dims(), config)?;
    GridWavefunction::from_pure_state(*grid, &report.state)
}

/// Built-in test wavefunctions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Product of three displaced Gaussians: every marginal is rank one.
    Separable,
    /// Gaussian envelope times a complex polynomial coupling all three axes.
    Correlated,
    /// `(φ₀(x)φ₁(z) + φ₁(x)φ₀(z)) φ₀(y)`: equal Schmidt weights, so the
    /// planar spectra are degenerate.
    Symmetric,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "separable" => Ok(Profile::Separable),
            "correlated" => Ok(Profile::Correlated),
            "symmetric" => Ok(Profile::Symmetric),
            other => Err(Error::Contract(format!("unknown profile {other:?}"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Separable => "separable",
            Profile::Correlated => "correlated",
            Profile::Symmetric => "symmetric",
        })
    }
}

fn gauss(u: f64, center: f64, width: f64) -> f64 {
    (-(u - center).powi(2) / (2.0 * width * width)).exp()
}

/// Discretely normalized 1D functions `φ₀ ∝ e^{-u²/2}` and `φ₁ ∝ u e^{-u²/2}`.
fn hermite_pair(coords: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let normalize = |v: Vec<f64>| -> Result<Vec<f64>> {
        let n = (v.iter().map(|x| x * x).sum::<f64>() * h).sqrt();
        if !(n > 0.0) {
            return Err(Error::Contract("symmetric profile needs at least two points on x and z".into()));
        }
        Ok(v.into_iter().map(|x| x / n).collect())
    };
    let phi0 = normalize(coords.iter().map(|&u| gauss(u, 0.0, 1.0)).collect())?;
    let phi1 = normalize(coords.iter().map(|&u| u * gauss(u, 0.0, 1.0)).collect())?;
    Ok((phi0, phi1))
}

impl Profile {
    pub fn wavefunction(self, grid: &GridSpec) -> Result<GridWavefunction> {
        match self {
            Profile::Separable => GridWavefunction::from_fn(*grid, |x, y, z| {
                let amp = gauss(x, 0.4, 1.0) * gauss(y, -0.3, 0.8) * gauss(z, 0.0, 1.2);
                Complex64::from_polar(amp, 0.5 * x - 0.3 * z)
            }),
            Profile::Correlated => GridWavefunction::from_fn(*grid, |x, y, z| {
                let envelope = gauss(x, 0.3, 1.0) * gauss(y, -0.2, 1.1) * gauss(z, 0.1, 0.9);
                let i = Complex64::i();
                let poly = Complex64::new(1.0, 0.0)
                    + Complex64::from_polar(0.9, 0.4) * x * y
                    + 0.7 * y * z
                    + 0.6 * i * x * z
                    + 0.5 * x * y * z
                    + 0.3 * (x * x - 0.5) * z;
                poly * envelope
            }),
            Profile::Symmetric => {
                let [hx, _, hz] = grid.spacings;
                let (fx0, fx1) = hermite_pair(&grid.coordinates(0), hx)?;
                let (fz0, fz1) = hermite_pair(&grid.coordinates(2), hz)?;
                let ys = grid.coordinates(1);
                let [nx, ny, nz] = grid.sizes;
                let mut values = Vec::with_capacity(grid.points());
                for x in 0..nx {
                    for &y in ys.iter().take(ny) {
                        for z in 0..nz {
                            let xz = (fx0[x] * fz1[z] + fx1[x] * fz0[z]) * FRAC_1_SQRT_2;
                            values.push(Complex64::new(xz * gauss(y, 0.0, 1.0), 0.0));
                        }
                    }
                }
                GridWavefunction::normalized(*grid, DVector::from_vec(values))
            }
        }
    }
}
