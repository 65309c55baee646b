//! The `MatrixFile` JSON interchange format.
//!
//! ```json
//! {"kind":"density_matrix","dims":[2,2],"subsystems":["A","B"],"data":[[[1.0e0,0.0e0], ...], ...]}
//! ```
//!
//! Vectors are arrays of `[re, im]` pairs in flat row-major order, matrices are
//! arrays of rows of such pairs. Every number is written with 17 significant
//! digits so that a write followed by a read reproduces each `f64` exactly.

use std::fs;
use std::io;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qrecon_core::tomography::{GridSpec, GridWavefunction};
use qrecon_core::{DensityMatrix, Dims, Party, PureState};
use serde::ser::Serialize;
use serde::Deserialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    PureState,
    DensityMatrix,
    GridWavefunction,
}

#[derive(Debug, serde::Serialize, Deserialize)]
#[serde(untagged)]
enum Data {
    Vector(Vec<[f64; 2]>),
    Matrix(Vec<Vec<[f64; 2]>>),
}

#[derive(Debug, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    kind: Kind,
    dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subsystems: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spacings: Option<Vec<f64>>,
    data: Data,
}

/// A parsed and validated `MatrixFile`.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixFile {
    Pure(PureState),
    Density(DensityMatrix),
    Grid(GridWavefunction),
}

impl MatrixFile {
    pub fn kind(&self) -> Kind {
        match self {
            MatrixFile::Pure(_) => Kind::PureState,
            MatrixFile::Density(_) => Kind::DensityMatrix,
            MatrixFile::Grid(_) => Kind::GridWavefunction,
        }
    }

    pub fn to_json(&self) -> String {
        let raw = match self {
            MatrixFile::Pure(psi) => RawFile {
                kind: Kind::PureState,
                dims: <[usize; 3]>::from(psi.dims()).to_vec(),
                subsystems: None,
                spacings: None,
                data: vector_data(psi.amplitudes()),
            },
            MatrixFile::Density(rho) => RawFile {
                kind: Kind::DensityMatrix,
                dims: rho.local_dims().to_vec(),
                subsystems: Some(rho.parties().iter().map(Party::to_string).collect()),
                spacings: None,
                data: Data::Matrix(
                    rho.matrix().row_iter().map(|row| row.iter().map(|z| [z.re, z.im]).collect()).collect(),
                ),
            },
            MatrixFile::Grid(g) => RawFile {
                kind: Kind::GridWavefunction,
                dims: g.grid().sizes().to_vec(),
                subsystems: None,
                spacings: Some(g.grid().spacings().to_vec()),
                data: vector_data(g.values()),
            },
        };
        let mut out = to_json_with(&raw, CompactFormatter);
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let raw: RawFile = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("malformed matrix file: {e}")))?;
        match raw.kind {
            Kind::PureState => {
                let dims = three_dims(&raw.dims)?;
                let v = expect_vector(raw.data, dims.total())?;
                Ok(MatrixFile::Pure(PureState::new(dims, v)?))
            }
            Kind::DensityMatrix => {
                let labels = raw
                    .subsystems
                    .ok_or_else(|| CliError::Usage("density matrix file lacks \"subsystems\"".into()))?;
                let parties = labels.iter().map(|s| s.parse::<Party>()).collect::<Result<Vec<_>, _>>()?;
                let n = raw.dims.iter().product();
                let m = expect_matrix(raw.data, n)?;
                Ok(MatrixFile::Density(DensityMatrix::new(parties, raw.dims, m)?))
            }
            Kind::GridWavefunction => {
                let sizes = three_dims(&raw.dims)?;
                let spacings = raw
                    .spacings
                    .ok_or_else(|| CliError::Usage("grid file lacks \"spacings\"".into()))?;
                let spacings: [f64; 3] = spacings
                    .try_into()
                    .map_err(|s: Vec<f64>| CliError::Usage(format!("expected 3 spacings, found {}", s.len())))?;
                let grid = GridSpec::new(sizes.into(), spacings)?;
                let v = expect_vector(raw.data, grid.points())?;
                Ok(MatrixFile::Grid(GridWavefunction::new(grid, v)?))
            }
        }
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        MatrixFile::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.to_json()).map_err(|e| io_error(path, e))
    }

    pub fn into_pure(self, path: &Path) -> Result<PureState, CliError> {
        match self {
            MatrixFile::Pure(psi) => Ok(psi),
            other => Err(wrong_kind(path, Kind::PureState, other.kind())),
        }
    }

    pub fn into_density(self, path: &Path) -> Result<DensityMatrix, CliError> {
        match self {
            MatrixFile::Density(rho) => Ok(rho),
            other => Err(wrong_kind(path, Kind::DensityMatrix, other.kind())),
        }
    }
}

fn wrong_kind(path: &Path, want: Kind, got: Kind) -> CliError {
    CliError::Usage(format!("{}: expected a {want:?} file, found {got:?}", path.display()))
}

pub(crate) fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

fn vector_data(v: &DVector<Complex64>) -> Data {
    Data::Vector(v.iter().map(|z| [z.re, z.im]).collect())
}

fn three_dims(dims: &[usize]) -> Result<Dims, CliError> {
    match *dims {
        [a, b, c] => Ok(Dims::new(a, b, c)?),
        _ => Err(CliError::Usage(format!("expected 3 dims, found {dims:?}"))),
    }
}

fn expect_vector(data: Data, len: usize) -> Result<DVector<Complex64>, CliError> {
    let Data::Vector(pairs) = data else {
        return Err(CliError::Usage("expected a vector of [re, im] pairs".into()));
    };
    if pairs.len() != len {
        return Err(CliError::Usage(format!("expected {len} entries, found {}", pairs.len())));
    }
    Ok(DVector::from_iterator(len, pairs.into_iter().map(|[re, im]| Complex64::new(re, im))))
}

fn expect_matrix(data: Data, n: usize) -> Result<DMatrix<Complex64>, CliError> {
    let Data::Matrix(rows) = data else {
        return Err(CliError::Usage("expected a matrix of [re, im] pairs".into()));
    };
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Usage(format!("expected a {n}x{n} matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |r, c| {
        let [re, im] = rows[r][c];
        Complex64::new(re, im)
    }))
}

/// Writes every finite `f64` as `{:.16e}` and delegates layout to the inner
/// formatter.
struct SciFormatter<F>(F);

impl<F: Formatter> Formatter for SciFormatter<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn to_json_with<T: Serialize, F: Formatter>(value: &T, formatter: F) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter(formatter));
    value.serialize(&mut ser).expect("in-memory JSON serialization");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Indented JSON with full-precision numbers, newline terminated.
pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut out = to_json_with(value, PrettyFormatter::new());
    out.push('\n');
    out
}

pub fn write_report<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    fs::write(path, to_pretty_json(value)).map_err(|e| io_error(path, e))
}
