//! Reconstruction of `|ψ_ABC⟩` from `ρ_AB` and `ρ_BC`.
//!
//! With the Schmidt forms
//!
//! ```text
//! |ψ⟩ = Σ_i e^{iα_i} √p_A^i |i⟩|i;BC⟩ = Σ_k e^{iγ_k} √p_C^k |k;AB⟩|k⟩
//! ```
//!
//! and the overlaps `A^i_jk = ⟨jk|i;BC⟩`, `C^k_ij = ⟨ij|k;AB⟩`, equality of
//! the two forms requires `α_i − γ_k = arg S_ik` with
//! `S_ik = Σ_j conj(A^i_jk) C^k_ij`. Those constraints are solved on the
//! bipartite graph of phase unknowns: a spanning tree fixes every phase and
//! the remaining edges certify consistency.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{detect_degeneracy, eig_hermitian, match_spectra, SpectralDecomposition, SpectrumPairing};
use crate::state::{DensityMatrix, Dims, Party, PureState};
use crate::tol;

/// Tolerances for [`reconstruct_tripartite`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    /// Eigenvalues at or below this are treated as zero.
    pub rank_threshold: f64,
    /// Consecutive eigenvalues closer than this count as degenerate.
    pub gap_tol: f64,
    /// Largest allowed difference between paired complementary eigenvalues.
    pub pair_tol: f64,
    /// Edges with `|S_ik| <= edge_tol · max|S|` carry no phase information.
    pub edge_tol: f64,
    /// Radians; also bounds the amplitude residual of the compatibility equations.
    pub phase_tol: f64,
    /// Frobenius tolerance on marginal cross-checks and residuals.
    pub marginal_tol: f64,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            rank_threshold: 1e-10,
            gap_tol: 1e-8,
            pair_tol: 1e-8,
            edge_tol: 1e-7,
            phase_tol: 1e-6,
            marginal_tol: 1e-8,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rank_threshold", self.rank_threshold),
            ("gap_tol", self.gap_tol),
            ("pair_tol", self.pair_tol),
            ("edge_tol", self.edge_tol),
            ("phase_tol", self.phase_tol),
            ("marginal_tol", self.marginal_tol),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Contract(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.rank_threshold >= 1.0 {
            return Err(Error::Contract("rank_threshold must be below 1".into()));
        }
        Ok(())
    }
}

/// Spectral decompositions of the five marginals used by the pipeline, with
/// the pairings of the `A|BC` and `AB|C` Schmidt spectra.
#[derive(Debug, Clone)]
pub struct MarginalSpectra {
    pub a: SpectralDecomposition,
    pub b: SpectralDecomposition,
    pub c: SpectralDecomposition,
    pub ab: SpectralDecomposition,
    pub bc: SpectralDecomposition,
    /// `ρ_A` eigen-index → `ρ_BC` eigen-index.
    pub a_to_bc: SpectrumPairing,
    /// `ρ_C` eigen-index → `ρ_AB` eigen-index.
    pub c_to_ab: SpectrumPairing,
}

/// Overlap arrays `A^i_jk = ⟨jk|i;BC⟩` (stored per `i` as an `r_B × r_C`
/// matrix) and `C^k_ij = ⟨ij|k;AB⟩` (per `k`, `r_A × r_B`).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTensors {
    a: Vec<DMatrix<Complex64>>,
    c: Vec<DMatrix<Complex64>>,
    ranks: [usize; 3],
}

impl CoefficientTensors {
    /// `A^i_jk`.
    pub fn a(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.a[i][(j, k)]
    }

    /// `C^k_ij`.
    pub fn c(&self, k: usize, i: usize, j: usize) -> Complex64 {
        self.c[k][(i, j)]
    }

    /// Retained ranks `(r_A, r_B, r_C)`.
    pub fn ranks(&self) -> [usize; 3] {
        self.ranks
    }

    pub fn a_slice(&self, i: usize) -> &DMatrix<Complex64> {
        &self.a[i]
    }

    pub fn c_slice(&self, k: usize) -> &DMatrix<Complex64> {
        &self.c[k]
    }
}

/// Builds the overlap arrays from the paired spectra. A single `|j⟩` basis
/// (from `spectra.b`) enters both arrays.
pub fn coefficient_tensors(spectra: &MarginalSpectra, dims: Dims) -> Result<CoefficientTensors> {
    let (da, db, dc) = (dims.a(), dims.b(), dims.c());
    let expect = [
        (&spectra.a, da),
        (&spectra.b, db),
        (&spectra.c, dc),
        (&spectra.ab, da * db),
        (&spectra.bc, db * dc),
    ];
    if expect.iter().any(|(s, n)| s.original_dim() != *n) {
        return Err(Error::Contract(format!("spectral decompositions do not match dims {dims}")));
    }
    let ub = spectra.b.eigenvectors();
    let ub_adj = ub.adjoint();
    let ua_adj = spectra.a.eigenvectors().adjoint();
    let uc_conj = spectra.c.eigenvectors().conjugate();
    let ub_conj = ub.conjugate();

    // A^i = U_B† V_i conj(U_C), where V_i is |i;BC⟩ reshaped to d_B × d_C.
    let a: Vec<_> = spectra
        .a_to_bc
        .permutation
        .iter()
        .map(|&n| {
            let v = spectra.bc.eigenvector(n);
            let vm = DMatrix::from_fn(db, dc, |b, c| v[b * dc + c]);
            &ub_adj * vm * &uc_conj
        })
        .collect();
    // C^k = U_A† Y_k conj(U_B), where Y_k is |k;AB⟩ reshaped to d_A × d_B.
    let c: Vec<_> = spectra
        .c_to_ab
        .permutation
        .iter()
        .map(|&n| {
            let y = spectra.ab.eigenvector(n);
            let ym = DMatrix::from_fn(da, db, |a, b| y[a * db + b]);
            &ua_adj * ym * &ub_conj
        })
        .collect();

    let deficit = a
        .iter()
        .chain(&c)
        .map(|m| (1.0 - m.norm_squared()).abs())
        .fold(0.0, f64::max);
    if !(deficit <= tol::EXPANSION_LEAK) {
        return Err(Error::ExpansionLeakage { deficit });
    }
    Ok(CoefficientTensors { a, c, ranks: [spectra.a.rank(), spectra.b.rank(), spectra.c.rank()] })
}

/// Edge weights `S_ik = Σ_j conj(A^i_jk) C^k_ij`, as an `r_A × r_C` matrix.
pub fn phase_edges(coeffs: &CoefficientTensors) -> DMatrix<Complex64> {
    let [ra, rb, rc] = coeffs.ranks;
    DMatrix::from_fn(ra, rc, |i, k| (0..rb).map(|j| coeffs.a(i, j, k).conj() * coeffs.c(k, i, j)).sum())
}

/// How the spanning tree of the phase graph is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanningTree {
    /// Prim's algorithm preferring the strongest edges.
    #[default]
    MaxWeight,
    /// Prim's algorithm preferring the weakest admissible edges.
    MinWeight,
    /// Breadth-first search in index order.
    BreadthFirst,
}

/// Phases `α_i`, `γ_k` solving `α_i − γ_k = arg S_ik`, gauge-fixed by
/// `γ_root = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSolution {
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    /// `|S_ik|`.
    pub edge_magnitudes: DMatrix<f64>,
    /// Largest wrapped violation over edges outside the spanning tree (radians).
    pub cycle_residual: f64,
    pub root: usize,
    /// `(i, k)` pairs forming the spanning tree.
    pub tree_edges: Vec<(usize, usize)>,
}

impl PhaseSolution {
    /// Shifts every phase by `chi`; the physical state is unchanged.
    pub fn shifted(&self, chi: f64) -> PhaseSolution {
        let mut out = self.clone();
        out.alpha.iter_mut().chain(out.gamma.iter_mut()).for_each(|p| *p = wrap(*p + chi));
        out
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap(x: f64) -> f64 {
    let y = x - TAU * (x / TAU).round();
    if y <= -PI {
        y + TAU
    } else {
        y
    }
}

/// Solves the phase constraints with the default (strongest-edge) tree.
/// `edge_tol` is absolute here.
pub fn solve_phases(s: &DMatrix<Complex64>, edge_tol: f64, phase_tol: f64) -> Result<PhaseSolution> {
    solve_phases_with(s, edge_tol, phase_tol, SpanningTree::MaxWeight)
}

#[derive(PartialEq)]
struct Frontier {
    key: f64,
    node: usize,
    parent: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on key, then lowest node index
        self.key.total_cmp(&other.key).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn solve_phases_with(
    s: &DMatrix<Complex64>,
    edge_tol: f64,
    phase_tol: f64,
    tree: SpanningTree,
) -> Result<PhaseSolution> {
    let (ra, rc) = s.shape();
    if ra == 0 || rc == 0 {
        return Err(Error::Contract("empty phase edge array".into()));
    }
    let mags = s.map(|z| z.norm());
    let edge = |i: usize, k: usize| mags[(i, k)] > edge_tol;

    // Nodes 0..ra are α_i, ra..ra+rc are γ_k.
    let n = ra + rc;
    let neighbors = |node: usize| -> Vec<usize> {
        if node < ra {
            (0..rc).filter(|&k| edge(node, k)).map(|k| ra + k).collect()
        } else {
            (0..ra).filter(|&i| edge(i, node - ra)).collect()
        }
    };
    let edge_of = |x: usize, y: usize| if x < ra { (x, y - ra) } else { (y, x - ra) };

    let root = (0..rc)
        .map(|k| (k, (0..ra).filter(|&i| edge(i, k)).map(|i| mags[(i, k)]).sum::<f64>()))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
        .0;

    let mut phase = vec![0.0; n];
    let mut seen = vec![false; n];
    let mut tree_edges = Vec::new();
    let assign = |parent: usize, child: usize, phase: &mut [f64]| {
        let (i, k) = edge_of(parent, child);
        let arg = s[(i, k)].arg();
        phase[child] = if child < ra { wrap(phase[parent] + arg) } else { wrap(phase[parent] - arg) };
        (i, k)
    };

    let root_node = ra + root;
    seen[root_node] = true;
    match tree {
        SpanningTree::BreadthFirst => {
            let mut queue = VecDeque::from([root_node]);
            while let Some(x) = queue.pop_front() {
                for y in neighbors(x) {
                    if !seen[y] {
                        seen[y] = true;
                        tree_edges.push(assign(x, y, &mut phase));
                        queue.push_back(y);
                    }
                }
            }
        }
        SpanningTree::MaxWeight | SpanningTree::MinWeight => {
            let sign = if tree == SpanningTree::MaxWeight { 1.0 } else { -1.0 };
            let weight = |x: usize, y: usize| {
                let (i, k) = edge_of(x, y);
                sign * mags[(i, k)]
            };
            let mut heap: BinaryHeap<Frontier> = neighbors(root_node)
                .into_iter()
                .map(|y| Frontier { key: weight(root_node, y), node: y, parent: root_node })
                .collect();
            while let Some(Frontier { node, parent, .. }) = heap.pop() {
                if seen[node] {
                    continue;
                }
                seen[node] = true;
                tree_edges.push(assign(parent, node, &mut phase));
                for y in neighbors(node) {
                    if !seen[y] {
                        heap.push(Frontier { key: weight(node, y), node: y, parent: node });
                    }
                }
            }
        }
    }

    let unreached = seen.iter().filter(|&&v| !v).count();
    if unreached > 0 {
        return Err(Error::PhaseGraphDisconnected { unreached, nodes: n });
    }

    let alpha = phase[..ra].to_vec();
    let gamma = phase[ra..].to_vec();
    let mut cycle_residual: f64 = 0.0;
    for i in 0..ra {
        for k in 0..rc {
            if edge(i, k) && !tree_edges.contains(&(i, k)) {
                let v = wrap(alpha[i] - gamma[k] - s[(i, k)].arg()).abs();
                cycle_residual = cycle_residual.max(v);
            }
        }
    }
    if !(cycle_residual <= phase_tol) {
        return Err(Error::PhaseInconsistency { residual: cycle_residual, tol: phase_tol });
    }
    Ok(PhaseSolution { alpha, gamma, edge_magnitudes: mags, cycle_residual, root, tree_edges })
}

/// `|ψ⟩ = Σ_i e^{iα_i} √p_A^i |i⟩⊗|i;BC⟩`, normalized and phase-canonicalized.
pub fn assemble_state(
    pairing: &SpectrumPairing,
    spec_a: &SpectralDecomposition,
    spec_bc: &SpectralDecomposition,
    alpha: &[f64],
    dims: Dims,
) -> Result<PureState> {
    let r = spec_a.rank();
    if alpha.len() != r || pairing.permutation.len() != r {
        return Err(Error::Contract(format!(
            "{} phases and {} pairs for rank {r}",
            alpha.len(),
            pairing.permutation.len()
        )));
    }
    if spec_a.original_dim() != dims.a() || spec_bc.original_dim() != dims.b() * dims.c() {
        return Err(Error::Contract(format!("spectral decompositions do not match dims {dims}")));
    }
    let dbc = dims.b() * dims.c();
    let mut m = DMatrix::<Complex64>::zeros(dims.a(), dbc);
    for (i, (&p, &a)) in spec_a.eigenvalues().iter().zip(alpha).enumerate() {
        let w = Complex64::from_polar(p.sqrt(), a);
        let x = spec_a.eigenvector(i);
        let v = spec_bc.eigenvector(pairing.permutation[i]);
        m += (x * v.transpose()) * w;
    }
    let amplitudes = DVector::from_fn(dims.total(), |n, _| m[(n / dbc, n % dbc)]);
    let mut psi = PureState::normalized(dims, amplitudes)?;
    psi.canonicalize_phase();
    Ok(psi)
}

/// Largest violation of `e^{iα_i}√p_A^i A^i_jk = e^{iγ_k}√p_C^k C^k_ij`.
pub fn eq8_residual(
    coeffs: &CoefficientTensors,
    phases: &PhaseSolution,
    spec_a: &SpectralDecomposition,
    spec_c: &SpectralDecomposition,
) -> f64 {
    let [ra, rb, rc] = coeffs.ranks;
    let mut worst: f64 = 0.0;
    for i in 0..ra {
        let lhs = Complex64::from_polar(spec_a.eigenvalues()[i].sqrt(), phases.alpha[i]);
        for k in 0..rc {
            let rhs = Complex64::from_polar(spec_c.eigenvalues()[k].sqrt(), phases.gamma[k]);
            for j in 0..rb {
                worst = worst.max((lhs * coeffs.a(i, j, k) - rhs * coeffs.c(k, i, j)).norm());
            }
        }
    }
    worst
}

/// Non-fatal observations about how close the inputs sit to the non-generic set.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenericityFlag {
    /// `ρ_B` has degenerate eigenvalues. Harmless: only the span of the `|j⟩`
    /// enters the phase constraints.
    DegenerateSpectrum { party: Party, clusters: Vec<Vec<usize>> },
    /// Edges dropped from the phase graph as too weak to carry a phase.
    PrunedEdges { count: usize, threshold: f64 },
}

/// Everything up to (but excluding) the phase solve.
#[derive(Debug, Clone)]
pub struct MarginalAnalysis {
    pub dims: Dims,
    pub spectra: MarginalSpectra,
    pub coeffs: CoefficientTensors,
    /// `S_ik`.
    pub edges: DMatrix<Complex64>,
    /// Absolute edge threshold, `edge_tol · max|S|`.
    pub edge_threshold: f64,
    pub flags: Vec<GenericityFlag>,
}

fn check_input(rho: &DensityMatrix, parties: [Party; 2], dims: Dims, name: &str) -> Result<()> {
    if rho.parties() != parties || rho.local_dims() != dims.of(&parties).as_slice() {
        return Err(Error::Contract(format!(
            "{name} must be over {}{} with dims {:?}, got {:?} {:?}",
            parties[0],
            parties[1],
            dims.of(&parties),
            rho.parties(),
            rho.local_dims()
        )));
    }
    Ok(())
}

/// Derives and diagonalizes the marginals, pairs spectra and builds the
/// coefficient arrays and phase edges.
pub fn analyze_marginals(
    rho_ab: &DensityMatrix,
    rho_bc: &DensityMatrix,
    dims: Dims,
    config: &ReconstructionConfig,
) -> Result<MarginalAnalysis> {
    config.validate()?;
    check_input(rho_ab, [Party::A, Party::B], dims, "rho_AB")?;
    check_input(rho_bc, [Party::B, Party::C], dims, "rho_BC")?;

    let rho_a = rho_ab.partial_trace(&[Party::A])?;
    let rho_b_ab = rho_ab.partial_trace(&[Party::B])?;
    let rho_b_bc = rho_bc.partial_trace(&[Party::B])?;
    let rho_c = rho_bc.partial_trace(&[Party::C])?;

    let b_gap = rho_b_ab.distance(&rho_b_bc)?;
    if !(b_gap <= config.marginal_tol) {
        return Err(Error::MarginalInconsistency { what: "rho_B", residual: b_gap, tol: config.marginal_tol });
    }
    let b_avg = (rho_b_ab.matrix() + rho_b_bc.matrix()).unscale(2.0);
    let rho_b = DensityMatrix::from_parts(vec![Party::B], vec![dims.b()], b_avg);

    let t = config.rank_threshold;
    let a = eig_hermitian(&rho_a, t)?;
    let b = eig_hermitian(&rho_b, t)?;
    let c = eig_hermitian(&rho_c, t)?;
    let ab = eig_hermitian(rho_ab, t)?;
    let bc = eig_hermitian(rho_bc, t)?;

    for (name, spec) in [("rho_A", &a), ("rho_C", &c), ("rho_BC", &bc), ("rho_AB", &ab)] {
        let clusters = detect_degeneracy(spec, config.gap_tol);
        if !clusters.is_empty() {
            return Err(Error::GenericityViolation(format!(
                "{name} has degenerate eigenvalues at indices {clusters:?} (spectrum {:?})",
                spec.eigenvalues()
            )));
        }
    }
    let mut flags = Vec::new();
    let b_clusters = detect_degeneracy(&b, config.gap_tol);
    if !b_clusters.is_empty() {
        flags.push(GenericityFlag::DegenerateSpectrum { party: Party::B, clusters: b_clusters });
    }

    let a_to_bc = match_spectra(&a, &bc, config.pair_tol)?;
    let c_to_ab = match_spectra(&c, &ab, config.pair_tol)?;
    let spectra = MarginalSpectra { a, b, c, ab, bc, a_to_bc, c_to_ab };

    let coeffs = coefficient_tensors(&spectra, dims)?;
    let edges = phase_edges(&coeffs);
    let max_edge = edges.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let edge_threshold = config.edge_tol * max_edge;
    let pruned = edges.iter().filter(|z| z.norm() <= edge_threshold).count();
    if pruned > 0 {
        flags.push(GenericityFlag::PrunedEdges { count: pruned, threshold: edge_threshold });
    }
    Ok(MarginalAnalysis { dims, spectra, coeffs, edges, edge_threshold, flags })
}

impl MarginalAnalysis {
    pub fn solve(&self, config: &ReconstructionConfig, tree: SpanningTree) -> Result<PhaseSolution> {
        solve_phases_with(&self.edges, self.edge_threshold, config.phase_tol, tree)
    }

    pub fn assemble(&self, phases: &PhaseSolution) -> Result<PureState> {
        let s = &self.spectra;
        assemble_state(&s.a_to_bc, &s.a, &s.bc, &phases.alpha, self.dims)
    }

    pub fn eq8_residual(&self, phases: &PhaseSolution) -> f64 {
        eq8_residual(&self.coeffs, phases, &self.spectra.a, &self.spectra.c)
    }
}

/// Outcome of a successful reconstruction.
#[derive(Debug, Clone)]
pub struct ReconstructionReport {
    pub state: PureState,
    /// `‖Tr_C |ψ⟩⟨ψ| − ρ_AB‖_F`.
    pub marginal_residual_ab: f64,
    /// `‖Tr_A |ψ⟩⟨ψ| − ρ_BC‖_F`.
    pub marginal_residual_bc: f64,
    pub eq8_residual: f64,
    pub cycle_residual: f64,
    pub genericity_flags: Vec<GenericityFlag>,
    pub phases: PhaseSolution,
}

/// Reconstructs the pure state whose `AB` and `BC` marginals are the inputs.
pub fn reconstruct_tripartite(
    rho_ab: &DensityMatrix,
    rho_bc: &DensityMatrix,
    dims: Dims,
    config: &ReconstructionConfig,
) -> Result<ReconstructionReport> {
    let analysis = analyze_marginals(rho_ab, rho_bc, dims, config)?;
    let phases = analysis.solve(config, SpanningTree::MaxWeight)?;
    let state = analysis.assemble(&phases)?;

    let eq8 = analysis.eq8_residual(&phases);
    if !(eq8 <= config.phase_tol) {
        return Err(Error::PhaseInconsistency { residual: eq8, tol: config.phase_tol });
    }
    let marginal_residual_ab = state.partial_trace(&[Party::A, Party::B])?.distance(rho_ab)?;
    let marginal_residual_bc = state.partial_trace(&[Party::B, Party::C])?.distance(rho_bc)?;
    for (what, residual) in [("rho_AB", marginal_residual_ab), ("rho_BC", marginal_residual_bc)] {
        if !(residual <= config.marginal_tol) {
            return Err(Error::MarginalInconsistency { what, residual, tol: config.marginal_tol });
        }
    }
    Ok(ReconstructionReport {
        state,
        marginal_residual_ab,
        marginal_residual_bc,
        eq8_residual: eq8,
        cycle_residual: phases.cycle_residual,
        genericity_flags: analysis.flags,
        phases,
    })
}
