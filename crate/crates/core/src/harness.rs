//! Random states, round-trip trials and batch statistics.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reconstruct::{reconstruct_tripartite, ReconstructionConfig};
use crate::spectral::eig_hermitian;
use crate::state::{fidelity, Dims, Party, PureState};

pub const SUCCESS: &str = "success";

fn gaussian(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random pure state: i.i.d. standard complex Gaussians, normalized.
/// Deterministic in `seed`.
pub fn sample_haar_state(dims: Dims, seed: u64) -> PureState {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    loop {
        let v = DVector::from_fn(dims.total(), |_, _| gaussian(&mut rng));
        if let Ok(psi) = PureState::normalized(dims, v) {
            return psi;
        }
    }
}

/// Haar-random `n × n` unitary (QR of a Ginibre matrix with the phases of
/// `diag R` divided out).
pub fn sample_haar_unitary(n: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let z = DMatrix::from_fn(n, n, |_, _| gaussian(rng));
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for c in 0..n {
        let d = r[(c, c)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for x in q.column_mut(c).iter_mut() {
            *x *= phase;
        }
    }
    q
}

/// Residuals of one successful reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub marginal_ab: f64,
    pub marginal_bc: f64,
    pub eq8: f64,
    pub cycle: f64,
}

/// One round-trip trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: Option<u64>,
    pub dims: Dims,
    /// `"success"` or the typed error name.
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Present iff the outcome is a success.
    pub fidelity: Option<f64>,
    pub residuals: Option<Residuals>,
    /// Smallest consecutive gap in the true `ρ_A` and `ρ_C` spectra.
    pub min_spectral_gap: Option<f64>,
}

impl TrialRecord {
    pub fn is_success(&self) -> bool {
        self.outcome == SUCCESS
    }
}

fn spectral_gap(psi: &PureState, rank_threshold: f64) -> Option<f64> {
    [Party::A, Party::C]
        .iter()
        .filter_map(|&p| {
            let rho = psi.partial_trace(&[p]).ok()?;
            eig_hermitian(&rho, rank_threshold).ok()?.min_gap()
        })
        .reduce(f64::min)
}

/// Traces `psi` down to `ρ_AB`, `ρ_BC`, reconstructs and compares.
pub fn roundtrip(psi: &PureState, config: &ReconstructionConfig) -> TrialRecord {
    let dims = psi.dims();
    let min_spectral_gap = spectral_gap(psi, config.rank_threshold);
    let result = psi
        .partial_trace(&[Party::A, Party::B])
        .and_then(|ab| Ok((ab, psi.partial_trace(&[Party::B, Party::C])?)))
        .and_then(|(ab, bc)| reconstruct_tripartite(&ab, &bc, dims, config));
    match result {
        Ok(report) => TrialRecord {
            seed: None,
            dims,
            outcome: SUCCESS.into(),
            error: None,
            fidelity: fidelity(&report.state, psi).ok(),
            residuals: Some(Residuals {
                marginal_ab: report.marginal_residual_ab,
                marginal_bc: report.marginal_residual_bc,
                eq8: report.eq8_residual,
                cycle: report.cycle_residual,
            }),
            min_spectral_gap,
        },
        Err(e) => TrialRecord {
            seed: None,
            dims,
            outcome: e.name().into(),
            error: Some(e.to_string()),
            fidelity: None,
            residuals: None,
            min_spectral_gap,
        },
    }
}

pub fn run_trial(dims: Dims, seed: u64, config: &ReconstructionConfig) -> TrialRecord {
    let mut record = roundtrip(&sample_haar_state(dims, seed), config);
    record.seed = Some(seed);
    record
}

/// Runs `trials` independent trials with seeds `seed_base + t`, in parallel.
/// The returned records are ordered by trial index.
pub fn run_batch(dims: Dims, trials: usize, seed_base: u64, config: &ReconstructionConfig) -> Vec<TrialRecord> {
    (0..trials as u64)
        .into_par_iter()
        .map(|t| run_trial(dims, seed_base.wrapping_add(t), config))
        .collect()
}

/// Nearest-rank quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub p05: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Quantiles> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let q = |p: f64| v[((p * n as f64).ceil() as usize).clamp(1, n) - 1];
        Some(Quantiles { min: v[0], p05: q(0.05), median: q(0.5), p95: q(0.95), max: v[n - 1] })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapErrorPoint {
    pub min_spectral_gap: f64,
    pub infidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub outcomes: BTreeMap<String, usize>,
    pub fidelity: Option<Quantiles>,
    pub marginal_residual: Option<Quantiles>,
    pub eq8_residual: Option<Quantiles>,
    pub cycle_residual: Option<Quantiles>,
    pub gap_vs_error: Vec<GapErrorPoint>,
}

impl BatchSummary {
    pub fn min_fidelity(&self) -> Option<f64> {
        self.fidelity.map(|q| q.min)
    }
}

/// Aggregates trial records; fidelity and residual statistics cover the
/// successful trials only.
pub fn batch_stats(records: &[TrialRecord]) -> Result<BatchSummary> {
    if records.is_empty() {
        return Err(Error::Contract("no trial records to summarize".into()));
    }
    let mut outcomes = BTreeMap::new();
    for r in records {
        *outcomes.entry(r.outcome.clone()).or_insert(0) += 1;
    }
    let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.is_success()).collect();
    let fids: Vec<f64> = ok.iter().filter_map(|r| r.fidelity).collect();
    let res: Vec<Residuals> = ok.iter().filter_map(|r| r.residuals).collect();
    let marg: Vec<f64> = res.iter().map(|r| r.marginal_ab.max(r.marginal_bc)).collect();
    let eq8: Vec<f64> = res.iter().map(|r| r.eq8).collect();
    let cyc: Vec<f64> = res.iter().map(|r| r.cycle).collect();
    let gap_vs_error = ok
        .iter()
        .filter_map(|r| {
            Some(GapErrorPoint { min_spectral_gap: r.min_spectral_gap?, infidelity: 1.0 - r.fidelity? })
        })
        .collect();
    Ok(BatchSummary {
        trials: records.len(),
        successes: ok.len(),
        success_rate: ok.len() as f64 / records.len() as f64,
        outcomes,
        fidelity: Quantiles::of(&fids),
        marginal_residual: Quantiles::of(&marg),
        eq8_residual: Quantiles::of(&eq8),
        cycle_residual: Quantiles::of(&cyc),
        gap_vs_error,
    })
}
