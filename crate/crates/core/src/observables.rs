//! Reduced spin state and derived scalars.

use num_complex::Complex64 as C64;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{PureState, SpectralPropagator};
use crate::model::FiniteBathModel;

/// Eigenvalues below this are treated as roundoff and clamped to zero.
pub const EIGEN_CLAMP: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservablesError {
    #[error("state is not normalized (norm² = {0})")]
    Unnormalized(f64),
    #[error("invalid reduced state: {0}")]
    InvalidReducedState(String),
}

/// 2×2 spin density matrix, stored through its independent entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReducedState {
    pub rho00: f64,
    pub rho11: f64,
    /// ⟨0|ρ|1⟩.
    pub rho01: C64,
}

impl ReducedState {
    pub fn new(rho00: f64, rho11: f64, rho01: C64) -> Self {
        Self { rho00, rho11, rho01 }
    }

    pub fn rho10(&self) -> C64 {
        self.rho01.conj()
    }

    pub fn matrix(&self) -> [[C64; 2]; 2] {
        [[C64::new(self.rho00, 0.0), self.rho01], [self.rho10(), C64::new(self.rho11, 0.0)]]
    }

    pub fn trace(&self) -> f64 {
        self.rho00 + self.rho11
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.rho00 + self.rho11);
        let half_diff = 0.5 * (self.rho00 - self.rho11);
        let r = (half_diff * half_diff + self.rho01.norm_sqr()).sqrt();
        [mean - r, mean + r]
    }

    /// Trace 1 ± 1e-10 and no eigenvalue below −1e-10.
    pub fn validate(&self) -> Result<(), ObservablesError> {
        let tr = self.trace();
        if !tr.is_finite() || (tr - 1.0).abs() > 1e-10 {
            return Err(ObservablesError::InvalidReducedState(format!("trace {tr}")));
        }
        let [lo, _] = self.eigenvalues();
        if lo < -EIGEN_CLAMP {
            return Err(ObservablesError::InvalidReducedState(format!("negative eigenvalue {lo:e}")));
        }
        Ok(())
    }
}

/// Partial trace over the bath.
pub fn reduce(state: &PureState) -> Result<ReducedState, ObservablesError> {
    let n = state.norm_sqr();
    if (n.sqrt() - 1.0).abs() > 1e-6 {
        return Err(ObservablesError::Unnormalized(n));
    }
    let l = state.layout();
    let c1_lower = state.block(l.excited_lower());
    let c0_lower = state.block(l.ground_lower());
    let c0_upper = state.block(l.ground_upper());
    let c1_upper = state.block(l.excited_upper());

    let sq = |v: &ndarray::ArrayView1<C64>| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let rho11 = sq(&c1_lower) + sq(&c1_upper);
    let rho00 = sq(&c0_lower) + sq(&c0_upper);
    let cross = |c0: &ndarray::ArrayView1<C64>, c1: &ndarray::ArrayView1<C64>| {
        c0.iter().zip(c1.iter()).map(|(a, b)| a * b.conj()).sum::<C64>()
    };
    let rho01 = cross(&c0_lower, &c1_lower) + cross(&c0_upper, &c1_upper);
    Ok(ReducedState { rho00, rho11, rho01 })
}

fn xlnx(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * p.ln()
    }
}

/// von Neumann entropy in nats.
pub fn entropy(rho: &ReducedState) -> f64 {
    let [a, b] = rho.eigenvalues();
    let (a, b) = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
    (-(xlnx(a) + xlnx(b))).max(0.0)
}

/// Tr ρ².
pub fn purity(rho: &ReducedState) -> f64 {
    rho.rho00 * rho.rho00 + rho.rho11 * rho.rho11 + 2.0 * rho.rho01.norm_sqr()
}

/// |ρ₀₁|².
pub fn coherence(rho: &ReducedState) -> f64 {
    rho.rho01.norm_sqr()
}

/// Probability carried by the resonant block {|1,n₁⟩} ∪ {|0,n₂⟩}.
pub fn coupled_probability(state: &PureState) -> f64 {
    state.weight(state.layout().coupled())
}

/// f(t) = (1/N₁) Σ exp(−i ε(n₁) t), the free phase sum over the lower band.
pub fn band_kernel(model: &FiniteBathModel, t_grid: &[f64]) -> Vec<C64> {
    let levels = model.lower_levels();
    let norm = 1.0 / levels.len() as f64;
    t_grid.iter().map(|&t| levels.iter().map(|e| C64::from_polar(1.0, -e * t)).sum::<C64>() * norm).collect()
}

/// One time sample of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub rho: ReducedState,
    pub entropy: f64,
    pub purity: f64,
    pub coherence: f64,
    pub p_coupled: f64,
}

/// Reduced-state samples on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
}

/// Number of time samples propagated per matrix product.
const CHUNK: usize = 256;

impl Trajectory {
    /// Propagate `state0` to every time of `t_grid` and record observables.
    pub fn simulate(
        propagator: &SpectralPropagator,
        state0: &PureState,
        t_grid: &[f64],
    ) -> Result<Self, ObservablesError> {
        let mut samples = Vec::with_capacity(t_grid.len());
        for times in t_grid.chunks(CHUNK) {
            for (t, state) in times.iter().zip(propagator.evolve_many(state0, times)) {
                samples.push(Sample::of(*t, &state)?);
            }
        }
        Ok(Self { samples })
    }

    pub fn from_states<'a>(
        t_grid: &[f64],
        states: impl IntoIterator<Item = &'a PureState>,
    ) -> Result<Self, ObservablesError> {
        let samples = t_grid.iter().zip(states).map(|(t, s)| Sample::of(*t, s)).collect::<Result<_, _>>()?;
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }
    pub fn rho11(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.rho.rho11).collect()
    }
    pub fn coherence(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.coherence).collect()
    }

    /// Mean of `f` over samples with t in [t_lo, t_hi].
    pub fn window_mean(&self, t_lo: f64, t_hi: f64, f: impl Fn(&Sample) -> f64) -> Option<f64> {
        let (sum, n) = self
            .samples
            .iter()
            .filter(|s| s.t >= t_lo && s.t <= t_hi)
            .fold((0.0, 0usize), |(acc, n), s| (acc + f(s), n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}

impl Sample {
    pub fn of(t: f64, state: &PureState) -> Result<Self, ObservablesError> {
        let rho = reduce(state)?;
        Ok(Self {
            t,
            rho,
            entropy: entropy(&rho),
            purity: purity(&rho),
            coherence: coherence(&rho),
            p_coupled: coupled_probability(state),
        })
    }
}
