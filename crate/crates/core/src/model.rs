//! Two-band finite bath coupled to a two-level system.
//!
//! The spin has levels |0⟩ at energy 0 and |1⟩ at energy ΔE. The bath has a
//! lower band of N₁ equidistant levels in (0, δε] and an upper band of N₂
//! equidistant levels in (ΔE, ΔE + δε]. The interaction
//! `λ Σ C(n₁,n₂) σ⁺|n₁⟩⟨n₂| + h.c.` only connects |0,n₂⟩ with |1,n₁⟩.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::random::GaussianSource;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: &'static str, reason: String },
    #[error("interval width {width} must satisfy 0 < width <= band width {band_width}")]
    IntervalTooWide { width: f64, band_width: f64 },
}

/// Physical parameters. Units: ħ = 1, energies in u, times in ħ/u.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Spin splitting and band separation ΔE.
    pub delta_e: f64,
    /// Width δε of each band.
    pub band_width: f64,
    /// Number of lower-band levels N₁.
    pub n1: usize,
    /// Number of upper-band levels N₂.
    pub n2: usize,
    /// Coupling strength λ.
    pub lambda: f64,
    /// Seed of the random coupling matrix.
    pub seed_coupling: u64,
}

impl ModelParams {
    /// ΔE = 25, δε = 0.5, N₁ = N₂ = 500, λ = 5·10⁻⁴.
    pub fn paper() -> Self {
        Self { delta_e: 25.0, band_width: 0.5, n1: 500, n2: 500, lambda: 5e-4, seed_coupling: 1 }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |key, reason: &str| Err(ModelError::InvalidParameter { key, reason: reason.into() });
        if self.n1 == 0 {
            return bad("n1", "must be at least 1");
        }
        if self.n2 == 0 {
            return bad("n2", "must be at least 1");
        }
        if !(self.delta_e.is_finite() && self.delta_e > 0.0) {
            return bad("delta_e", "must be finite and > 0");
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda", "must be finite and >= 0");
        }
        if !(self.band_width.is_finite() && self.band_width >= 0.0) {
            return bad("band_width", "must be finite and >= 0");
        }
        if self.band_width >= self.delta_e {
            return bad("band_width", "must be smaller than delta_e (bands would overlap)");
        }
        Ok(())
    }

    /// N entering the Markovianity conditions: the band with the larger
    /// state density. Both bands share the width δε, so that is the larger count.
    pub fn n_dense(&self) -> usize {
        self.n1.max(self.n2)
    }
}

/// Random N₁×N₂ coupling matrix normalized to Σ|C|²/(N₁N₂) = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix(Array2<C64>);

impl CouplingMatrix {
    /// Real and imaginary parts i.i.d. standard normal, then rescaled.
    pub fn sample(n1: usize, n2: usize, seed: u64) -> Self {
        let mut g = GaussianSource::new(seed);
        let mut c = Array2::from_shape_simple_fn((n1, n2), || g.complex_normal());
        let total: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        let scale = ((n1 * n2) as f64 / total).sqrt();
        c.mapv_inplace(|z| z * scale);
        Self(c)
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.0
    }

    /// Σ|C(n₁,n₂)|² / (N₁N₂).
    pub fn mean_square(&self) -> f64 {
        let (n1, n2) = self.0.dim();
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>() / (n1 * n2) as f64
    }
}

/// Immutable model: parameters, level energies and coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteBathModel {
    params: ModelParams,
    lower_levels: Vec<f64>,
    upper_levels: Vec<f64>,
    coupling: CouplingMatrix,
}

pub fn build_model(params: ModelParams) -> Result<FiniteBathModel, ModelError> {
    params.validate()?;
    let lower_levels = band_levels(0.0, params.band_width, params.n1);
    let upper_levels = band_levels(params.delta_e, params.band_width, params.n2);
    let coupling = CouplingMatrix::sample(params.n1, params.n2, params.seed_coupling);
    Ok(FiniteBathModel { params, lower_levels, upper_levels, coupling })
}

fn band_levels(offset: f64, width: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| offset + width * k as f64 / n as f64).collect()
}

impl FiniteBathModel {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }
    pub fn n1(&self) -> usize {
        self.params.n1
    }
    pub fn n2(&self) -> usize {
        self.params.n2
    }
    pub fn delta_e(&self) -> f64 {
        self.params.delta_e
    }
    pub fn lambda(&self) -> f64 {
        self.params.lambda
    }
    /// Bath energies ε(n₁) of the lower band.
    pub fn lower_levels(&self) -> &[f64] {
        &self.lower_levels
    }
    /// Bath energies ΔE + ε'(n₂) of the upper band.
    pub fn upper_levels(&self) -> &[f64] {
        &self.upper_levels
    }
    pub fn coupling(&self) -> &CouplingMatrix {
        &self.coupling
    }
    /// Spin energy of level `s` (0 or 1).
    pub fn spin_energy(&self, excited: bool) -> f64 {
        if excited {
            self.params.delta_e
        } else {
            0.0
        }
    }
    /// Dimension of the full product basis, 2(N₁+N₂).
    pub fn dimension(&self) -> usize {
        2 * (self.params.n1 + self.params.n2)
    }
}

/// Values of the two Markovianity criteria and the derived timescales.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    /// 2λN/δε, must be ≥ 1.
    #[serde(serialize_with = "crate::serialize_extended_f64")]
    pub criterion_one: f64,
    /// λ²N/δε², must be ≪ 1.
    #[serde(serialize_with = "crate::serialize_extended_f64")]
    pub criterion_two: f64,
    pub n_used: usize,
    /// ħ/δε.
    #[serde(serialize_with = "crate::serialize_extended_f64")]
    pub tau_c_estimate: f64,
    /// 1/R₀₁.
    #[serde(serialize_with = "crate::serialize_extended_f64")]
    pub tau_r_estimate: f64,
    pub criterion_one_ok: bool,
    pub criterion_two_ok: bool,
    pub pass: bool,
    pub reasons: Vec<String>,
}

/// Threshold used for "≪ 1" in the second criterion.
pub const CRITERION_TWO_MAX: f64 = 0.01;

pub fn check_conditions(params: &ModelParams) -> ConditionReport {
    let n = params.n_dense() as f64;
    let lambda = params.lambda;
    let width = params.band_width;
    let criterion_one = if width > 0.0 {
        2.0 * lambda * n / width
    } else if lambda > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    // Vanishing width always violates the second criterion, even at λ = 0.
    let criterion_two = if width > 0.0 { lambda * lambda * n / (width * width) } else { f64::INFINITY };
    let tau_c_estimate = if width > 0.0 { 1.0 / width } else { f64::INFINITY };
    let r01 =
        if width > 0.0 { std::f64::consts::TAU * lambda * lambda * params.n2 as f64 / width } else { f64::INFINITY };
    let tau_r_estimate = if r01 > 0.0 { 1.0 / r01 } else { f64::INFINITY };

    // Relative slack absorbs roundoff for parameter sets sitting exactly on the boundary.
    let criterion_one_ok = criterion_one >= 1.0 - 1e-12;
    let criterion_two_ok = criterion_two <= CRITERION_TWO_MAX;
    let mut reasons = Vec::new();
    if lambda == 0.0 {
        reasons.push("lambda = 0: infinitely weak coupling limit excluded".to_string());
    }
    if width == 0.0 {
        reasons.push("band_width = 0: bath correlations never decay (non-Markovian)".to_string());
    }
    if !criterion_one_ok {
        reasons.push(format!("2*lambda*N/band_width = {criterion_one:.4e} < 1"));
    }
    if !criterion_two_ok {
        reasons.push(format!("lambda^2*N/band_width^2 = {criterion_two:.4e} > {CRITERION_TWO_MAX}"));
    }
    ConditionReport {
        criterion_one,
        criterion_two,
        n_used: params.n_dense(),
        tau_c_estimate,
        tau_r_estimate,
        criterion_one_ok,
        criterion_two_ok,
        pass: criterion_one_ok && criterion_two_ok,
        reasons,
    }
}

/// Max/min spread of a windowed quantity, or `None` when undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowSpread {
    pub windows: usize,
    pub min: f64,
    pub max: f64,
    pub ratio: Option<f64>,
    pub degenerate: bool,
}

impl WindowSpread {
    fn from_values(values: &[f64], degenerate_band: bool) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let degenerate = degenerate_band || values.is_empty() || !(min > 0.0);
        Self { windows: values.len(), min, max, ratio: if degenerate { None } else { Some(max / min) }, degenerate }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandHomogeneity {
    pub level_counts: WindowSpread,
    /// Window totals of |C|² summed over every source state of the other band.
    pub coupling_weight: WindowSpread,
    /// Mean over source states of the per-source max/min window ratio.
    pub per_source_ratio_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomogeneityReport {
    pub interval_width: f64,
    pub lower: BandHomogeneity,
    pub upper: BandHomogeneity,
}

/// Index ranges of the sliding windows of width `width` over `levels`.
/// One window starts at each level whose window still fits in the band.
fn window_ranges(levels: &[f64], band_top: f64, width: f64) -> Vec<(usize, usize)> {
    let tol = 1e-9 * width;
    let mut out = Vec::new();
    let mut end = 0;
    for (start, &lo) in levels.iter().enumerate() {
        if lo + width > band_top + tol {
            break;
        }
        end = end.max(start);
        while end < levels.len() && levels[end] < lo + width - tol {
            end += 1;
        }
        out.push((start, end));
    }
    out
}

pub fn homogeneity_diagnostic(model: &FiniteBathModel, interval_width: f64) -> Result<HomogeneityReport, ModelError> {
    let p = model.params();
    if !(interval_width > 0.0) || interval_width > p.band_width * (1.0 + 1e-12) {
        return Err(ModelError::IntervalTooWide { width: interval_width, band_width: p.band_width });
    }
    let c = model.coupling().entries();
    let lower_w = window_ranges(model.lower_levels(), p.band_width, interval_width);
    let upper_w = window_ranges(model.upper_levels(), p.delta_e + p.band_width, interval_width);

    // Targets in the lower band are reached from upper-band sources (columns of C).
    let lower = band_homogeneity(&lower_w, p.n1 < 2, p.n2, |src, tgt| c[[tgt, src]].norm_sqr());
    let upper = band_homogeneity(&upper_w, p.n2 < 2, p.n1, |src, tgt| c[[src, tgt]].norm_sqr());
    Ok(HomogeneityReport { interval_width, lower, upper })
}

fn band_homogeneity(
    windows: &[(usize, usize)],
    degenerate: bool,
    n_sources: usize,
    weight: impl Fn(usize, usize) -> f64,
) -> BandHomogeneity {
    let counts: Vec<f64> = windows.iter().map(|&(a, b)| (b - a) as f64).collect();
    let mut totals = vec![0.0; windows.len()];
    let mut ratio_sum = 0.0;
    let mut ratio_ok = !degenerate && !windows.is_empty();
    for src in 0..n_sources {
        let sums: Vec<f64> = windows.iter().map(|&(a, b)| (a..b).map(|t| weight(src, t)).sum()).collect();
        for (tot, s) in totals.iter_mut().zip(&sums) {
            *tot += s;
        }
        let spread = WindowSpread::from_values(&sums, degenerate);
        match spread.ratio {
            Some(r) => ratio_sum += r,
            None => ratio_ok = false,
        }
    }
    BandHomogeneity {
        level_counts: WindowSpread::from_values(&counts, degenerate),
        coupling_weight: WindowSpread::from_values(&totals, degenerate),
        per_source_ratio_mean: ratio_ok.then(|| ratio_sum / n_sources as f64),
    }
}
