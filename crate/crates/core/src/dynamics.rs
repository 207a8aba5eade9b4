//! Initial states and exact propagation of the full pure state.
//!
//! The interaction only connects |1,n₁⟩ with |0,n₂⟩, so the Hamiltonian
//! splits into a resonant (N₁+N₂)-dimensional block and two sectors on which
//! it is diagonal. The block is diagonalized once; propagation to any time,
//! forwards or backwards, is then a phase multiplication in the eigenbasis.

use std::ops::Range;

use ndarray::{s, Array1, Array2, ArrayView1, Axis, ShapeBuilder};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::model::FiniteBathModel;
use crate::ode::{self, OdeError, Tolerance};
use crate::random::GaussianSource;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("eigensolver failed on the {dim}x{dim} coupled block: {message}")]
    Eigensolver { dim: usize, message: String },
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("state dimension {got} does not match model dimension {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// Index layout of the product basis.
///
/// Block order: |1,n₁⟩ (N₁), |0,n₂⟩ (N₂), |0,n₁⟩ (N₁), |1,n₂⟩ (N₂). The first
/// two blocks form the resonant coupled block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisLayout {
    pub n1: usize,
    pub n2: usize,
}

impl BasisLayout {
    pub fn of(model: &FiniteBathModel) -> Self {
        Self { n1: model.n1(), n2: model.n2() }
    }
    pub fn dim(&self) -> usize {
        2 * (self.n1 + self.n2)
    }
    pub fn excited_lower(&self) -> Range<usize> {
        0..self.n1
    }
    pub fn ground_upper(&self) -> Range<usize> {
        self.n1..self.n1 + self.n2
    }
    pub fn ground_lower(&self) -> Range<usize> {
        self.n1 + self.n2..2 * self.n1 + self.n2
    }
    pub fn excited_upper(&self) -> Range<usize> {
        2 * self.n1 + self.n2..self.dim()
    }
    pub fn coupled(&self) -> Range<usize> {
        0..self.n1 + self.n2
    }
}

/// Full pure state in the product basis described by [`BasisLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    layout: BasisLayout,
    amplitudes: Array1<C64>,
}

impl PureState {
    pub fn from_amplitudes(layout: BasisLayout, amplitudes: Array1<C64>) -> Result<Self, DynamicsError> {
        if amplitudes.len() != layout.dim() {
            return Err(DynamicsError::DimensionMismatch { got: amplitudes.len(), expected: layout.dim() });
        }
        Ok(Self { layout, amplitudes })
    }
    pub fn layout(&self) -> BasisLayout {
        self.layout
    }
    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amplitudes
    }
    pub fn block(&self, r: Range<usize>) -> ArrayView1<'_, C64> {
        self.amplitudes.slice(s![r])
    }
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }
    /// Total probability in an index range.
    pub fn weight(&self, r: Range<usize>) -> f64 {
        self.block(r).iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Haar-random unit vector of length `n` (complex Gaussian, normalized).
fn haar_vector(g: &mut GaussianSource, n: usize) -> Array1<C64> {
    let v = Array1::from_shape_simple_fn(n, || g.complex_normal());
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.mapv(|z| z / norm)
}

/// |1⟩ ⊗ |χ⟩ with |χ⟩ random in the lower band.
pub fn initial_state_excited(model: &FiniteBathModel, bath_seed: u64) -> PureState {
    let layout = BasisLayout::of(model);
    let chi = haar_vector(&mut GaussianSource::new(bath_seed), layout.n1);
    let mut amps = Array1::zeros(layout.dim());
    amps.slice_mut(s![layout.excited_lower()]).assign(&chi);
    PureState { layout, amplitudes: amps }
}

/// (|0⟩ + |1⟩)/√2 ⊗ |χ⟩ with |χ⟩ random in the lower band.
pub fn initial_state_superposition(model: &FiniteBathModel, bath_seed: u64) -> PureState {
    let layout = BasisLayout::of(model);
    let chi = haar_vector(&mut GaussianSource::new(bath_seed), layout.n1);
    let half = chi.mapv(|z| z * std::f64::consts::FRAC_1_SQRT_2);
    let mut amps = Array1::zeros(layout.dim());
    amps.slice_mut(s![layout.excited_lower()]).assign(&half);
    amps.slice_mut(s![layout.ground_lower()]).assign(&half);
    PureState { layout, amplitudes: amps }
}

/// √p·|a⟩ + √(1−p)·|b⟩ with |a⟩ random in span{|1,n₁⟩} and |b⟩ random in
/// span{|0,n₂⟩}. The weights are exact.
pub fn initial_state_subspace_random(
    model: &FiniteBathModel,
    p_excited: f64,
    seed: u64,
) -> Result<PureState, DynamicsError> {
    if !(0.0..=1.0).contains(&p_excited) {
        return Err(DynamicsError::InvalidProbability(p_excited));
    }
    let layout = BasisLayout::of(model);
    let mut g = GaussianSource::new(seed);
    let a = haar_vector(&mut g, layout.n1);
    let b = haar_vector(&mut g, layout.n2);
    let (wa, wb) = (p_excited.sqrt(), (1.0 - p_excited).sqrt());
    let mut amps = Array1::zeros(layout.dim());
    amps.slice_mut(s![layout.excited_lower()]).assign(&a.mapv(|z| z * wa));
    amps.slice_mut(s![layout.ground_upper()]).assign(&b.mapv(|z| z * wb));
    Ok(PureState { layout, amplitudes: amps })
}

/// Coupled block Hamiltonian plus the diagonal energies of the two sectors
/// the interaction annihilates.
#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    pub coupled: Array2<C64>,
    /// Energies of |0,n₁⟩.
    pub ground_lower: Vec<f64>,
    /// Energies of |1,n₂⟩.
    pub excited_upper: Vec<f64>,
}

impl BlockDecomposition {
    pub fn from_model(model: &FiniteBathModel) -> Self {
        let (n1, n2) = (model.n1(), model.n2());
        let e1 = model.spin_energy(true);
        let e0 = model.spin_energy(false);
        let lam = C64::new(model.lambda(), 0.0);
        let c = model.coupling().entries();

        let mut h = Array2::<C64>::zeros((n1 + n2, n1 + n2));
        for (i, eps) in model.lower_levels().iter().enumerate() {
            h[[i, i]] = C64::new(e1 + eps, 0.0);
        }
        for (j, eps) in model.upper_levels().iter().enumerate() {
            h[[n1 + j, n1 + j]] = C64::new(e0 + eps, 0.0);
        }
        for i in 0..n1 {
            for j in 0..n2 {
                let v = lam * c[[i, j]];
                h[[i, n1 + j]] = v;
                h[[n1 + j, i]] = v.conj();
            }
        }
        Self {
            coupled: h,
            ground_lower: model.lower_levels().iter().map(|e| e0 + e).collect(),
            excited_upper: model.upper_levels().iter().map(|e| e1 + e).collect(),
        }
    }

    /// max |H − H†| over the coupled block.
    pub fn hermiticity_defect(&self) -> f64 {
        let h = &self.coupled;
        let mut worst = 0.0f64;
        for ((i, j), v) in h.indexed_iter() {
            worst = worst.max((v - h[[j, i]].conj()).norm());
        }
        worst
    }
}

/// Eigendecomposition of the coupled block plus the decoupled phases.
#[derive(Debug, Clone)]
pub struct SpectralPropagator {
    layout: BasisLayout,
    energies: Array1<f64>,
    vectors: Array2<C64>,
    ground_lower: Array1<f64>,
    excited_upper: Array1<f64>,
}

pub fn build_propagator(model: &FiniteBathModel) -> Result<SpectralPropagator, DynamicsError> {
    let blocks = BlockDecomposition::from_model(model);
    let dim = blocks.coupled.nrows();
    let mut fortran = Array2::<C64>::zeros((dim, dim).f());
    fortran.assign(&blocks.coupled);
    let (energies, vectors) =
        fortran.eigh(UPLO::Lower).map_err(|e| DynamicsError::Eigensolver { dim, message: e.to_string() })?;
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(DynamicsError::Eigensolver { dim, message: "non-finite eigenvalue".into() });
    }
    Ok(SpectralPropagator {
        layout: BasisLayout::of(model),
        energies,
        vectors,
        ground_lower: Array1::from_vec(blocks.ground_lower),
        excited_upper: Array1::from_vec(blocks.excited_upper),
    })
}

impl SpectralPropagator {
    pub fn layout(&self) -> BasisLayout {
        self.layout
    }
    /// Eigenvalues of the coupled block, ascending.
    pub fn energies(&self) -> &Array1<f64> {
        &self.energies
    }
    /// Orthonormal eigenvectors (columns) of the coupled block.
    pub fn vectors(&self) -> &Array2<C64> {
        &self.vectors
    }

    /// max |U†U − 1|.
    pub fn unitarity_defect(&self) -> f64 {
        let u = &self.vectors;
        let g = u.t().mapv(|z| z.conj()).dot(u);
        g.indexed_iter()
            .map(|((i, j), v)| (v - if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }).norm())
            .fold(0.0, f64::max)
    }

    /// max |U·diag(E)·U† − H_c|.
    pub fn reconstruction_residual(&self, blocks: &BlockDecomposition) -> f64 {
        let u = &self.vectors;
        let mut ue = u.clone();
        for (mut col, e) in ue.axis_iter_mut(Axis(1)).zip(self.energies.iter()) {
            col.mapv_inplace(|z| z * *e);
        }
        let rebuilt = ue.dot(&u.t().mapv(|z| z.conj()));
        (&rebuilt - &blocks.coupled).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Coupled-block amplitudes expressed in the eigenbasis.
    fn eigen_coefficients(&self, state: &PureState) -> Array1<C64> {
        let psi = state.block(self.layout.coupled()).mapv(|z| z.conj());
        self.vectors.t().dot(&psi).mapv(|z| z.conj())
    }

    fn check_layout(&self, state: &PureState) {
        assert_eq!(state.layout, self.layout, "state and propagator belong to different models");
    }

    /// Exact state at time `t` (negative `t` propagates backwards).
    pub fn evolve(&self, state: &PureState, t: f64) -> PureState {
        self.evolve_many(state, &[t]).pop().expect("one time requested")
    }

    /// Exact states at every time of `times`, computed with one matrix
    /// product per call. Callers bound memory by chunking long grids.
    pub fn evolve_many(&self, state: &PureState, times: &[f64]) -> Vec<PureState> {
        self.check_layout(state);
        let coeffs = self.eigen_coefficients(state);
        let d = coeffs.len();
        let mut phased = Array2::<C64>::zeros((d, times.len()));
        for (k, (a, e)) in coeffs.iter().zip(self.energies.iter()).enumerate() {
            for (j, &t) in times.iter().enumerate() {
                phased[[k, j]] = a * C64::from_polar(1.0, -e * t);
            }
        }
        let block = self.vectors.dot(&phased);

        let l = self.layout;
        let gl0 = state.block(l.ground_lower());
        let eu0 = state.block(l.excited_upper());
        times
            .iter()
            .enumerate()
            .map(|(j, &t)| {
                let mut amps = Array1::<C64>::zeros(l.dim());
                amps.slice_mut(s![l.coupled()]).assign(&block.column(j));
                for ((dst, a), e) in
                    amps.slice_mut(s![l.ground_lower()]).iter_mut().zip(gl0.iter()).zip(self.ground_lower.iter())
                {
                    *dst = a * C64::from_polar(1.0, -e * t);
                }
                for ((dst, a), e) in
                    amps.slice_mut(s![l.excited_upper()]).iter_mut().zip(eu0.iter()).zip(self.excited_upper.iter())
                {
                    *dst = a * C64::from_polar(1.0, -e * t);
                }
                PureState { layout: l, amplitudes: amps }
            })
            .collect()
    }
}

/// Ĥ|ψ⟩ assembled directly from the product-basis matrix elements of Ĥ₀ and V̂.
pub fn apply_hamiltonian(model: &FiniteBathModel, psi: &Array1<C64>) -> Array1<C64> {
    let l = BasisLayout::of(model);
    let (e0, e1) = (model.spin_energy(false), model.spin_energy(true));
    let lam = model.lambda();
    let c = model.coupling().entries();
    let mut out = Array1::<C64>::zeros(l.dim());

    for (k, eps) in model.lower_levels().iter().enumerate() {
        let i1 = l.excited_lower().start + k;
        let i0 = l.ground_lower().start + k;
        out[i1] = psi[i1] * (e1 + eps);
        out[i0] = psi[i0] * (e0 + eps);
    }
    for (k, eps) in model.upper_levels().iter().enumerate() {
        let i0 = l.ground_upper().start + k;
        let i1 = l.excited_upper().start + k;
        out[i0] = psi[i0] * (e0 + eps);
        out[i1] = psi[i1] * (e1 + eps);
    }
    if lam != 0.0 {
        // σ⁺|n₁⟩⟨n₂| maps |0,n₂⟩ → |1,n₁⟩; the conjugate term maps back.
        for n1 in 0..l.n1 {
            let i1 = l.excited_lower().start + n1;
            for n2 in 0..l.n2 {
                let i0 = l.ground_upper().start + n2;
                let v = c[[n1, n2]] * lam;
                out[i1] += v * psi[i0];
                out[i0] += v.conj() * psi[i1];
            }
        }
    }
    out
}

/// ⟨Ψ|Ĥ|Ψ⟩.
pub fn energy(model: &FiniteBathModel, state: &PureState) -> f64 {
    let h_psi = apply_hamiltonian(model, state.amplitudes());
    state.amplitudes().iter().zip(h_psi.iter()).map(|(a, b)| (a.conj() * b).re).sum()
}

fn diagonal_energies(model: &FiniteBathModel) -> Array1<f64> {
    let l = BasisLayout::of(model);
    let (e0, e1) = (model.spin_energy(false), model.spin_energy(true));
    let mut h0 = Array1::<f64>::zeros(l.dim());
    for (k, eps) in model.lower_levels().iter().enumerate() {
        h0[l.excited_lower().start + k] = e1 + eps;
        h0[l.ground_lower().start + k] = e0 + eps;
    }
    for (k, eps) in model.upper_levels().iter().enumerate() {
        h0[l.ground_upper().start + k] = e0 + eps;
        h0[l.excited_upper().start + k] = e1 + eps;
    }
    h0
}

fn rotate(h0: &Array1<f64>, y: &Array1<C64>, t: f64) -> Array1<C64> {
    Array1::from_iter(y.iter().zip(h0.iter()).map(|(z, e)| z * C64::from_polar(1.0, -e * t)))
}

/// Integrate i∂|Ψ⟩/∂t = Ĥ|Ψ⟩ with an adaptive explicit Runge–Kutta scheme,
/// in the interaction picture of the diagonal part so the step size follows
/// the coupling rather than ΔE. Verification backend only.
pub fn evolve_ode(
    model: &FiniteBathModel,
    state0: &PureState,
    t_grid: &[f64],
) -> Result<Vec<PureState>, DynamicsError> {
    let layout = BasisLayout::of(model);
    if state0.layout != layout {
        return Err(DynamicsError::DimensionMismatch { got: state0.layout.dim(), expected: layout.dim() });
    }
    let Some(&t0) = t_grid.first() else {
        return Ok(Vec::new());
    };
    let h0 = diagonal_energies(model);
    let minus_i = C64::new(0.0, -1.0);
    let tol = Tolerance { rtol: 1e-12, atol: 1e-12, ..Tolerance::default() };
    let ys = ode::integrate(
        |t, phi| {
            let psi = rotate(&h0, phi, t);
            let h_psi = apply_hamiltonian(model, &psi);
            let v_psi = Array1::from_iter(h_psi.iter().zip(psi.iter()).zip(h0.iter()).map(|((h, p), e)| h - p * e));
            rotate(&h0, &v_psi, -t).mapv(|z| z * minus_i)
        },
        &rotate(&h0, state0.amplitudes(), -t0),
        t_grid,
        tol,
    )?;
    Ok(ys.into_iter().zip(t_grid).map(|(phi, &t)| PureState { layout, amplitudes: rotate(&h0, &phi, t) }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, ModelParams};

    fn small(n1: usize, n2: usize, lambda: f64) -> FiniteBathModel {
        build_model(ModelParams { n1, n2, lambda, ..ModelParams::paper() }).unwrap()
    }

    #[test]
    fn excited_state_is_normalized_and_local() {
        let m = small(40, 30, 5e-4);
        let s = initial_state_excited(&m, 9);
        assert!((s.norm() - 1.0).abs() < 1e-12);
        let l = s.layout();
        assert!((s.weight(l.excited_lower()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_lower_level_excited_state() {
        let m = small(1, 4, 5e-4);
        let s = initial_state_excited(&m, 3);
        assert!((s.amplitudes()[0].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn superposition_weights() {
        let m = small(20, 20, 5e-4);
        let s = initial_state_superposition(&m, 5);
        let l = s.layout();
        assert!((s.weight(l.coupled()) - 0.5).abs() < 1e-12);
        assert!((s.weight(l.ground_lower()) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn subspace_random_weights_exact() {
        let m = small(20, 25, 5e-4);
        let s = initial_state_subspace_random(&m, 0.75, 11).unwrap();
        let l = s.layout();
        assert!((s.weight(l.excited_lower()) - 0.75).abs() < 1e-12);
        assert!((s.weight(l.coupled()) - 1.0).abs() < 1e-12);
        let s = initial_state_subspace_random(&m, 1.0, 11).unwrap();
        assert_eq!(s.weight(l.ground_upper()), 0.0);
        assert!(initial_state_subspace_random(&m, 1.5, 1).is_err());
    }

    #[test]
    fn uncoupled_two_level_eigenvalues() {
        let m = small(1, 1, 0.0);
        let p = build_propagator(&m).unwrap();
        let e = p.energies();
        assert_eq!(e[0], 25.5);
        assert_eq!(e[1], 25.5);
        let m =
            build_model(ModelParams { n1: 1, n2: 1, lambda: 0.0, band_width: 0.3, ..ModelParams::paper() }).unwrap();
        let e = build_propagator(&m).unwrap().energies().to_vec();
        assert_eq!(e, vec![25.3, 25.3]);
    }

    #[test]
    fn uncoupled_eigenvalues_are_level_energies() {
        let m = small(6, 4, 0.0);
        let p = build_propagator(&m).unwrap();
        let mut expected: Vec<f64> =
            m.lower_levels().iter().map(|e| 25.0 + e).chain(m.upper_levels().iter().copied()).collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in p.energies().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn decomposition_contracts() {
        let m = small(30, 20, 5e-3);
        let blocks = BlockDecomposition::from_model(&m);
        assert!(blocks.hermiticity_defect() <= 1e-12);
        let p = build_propagator(&m).unwrap();
        assert!(p.unitarity_defect() < 1e-10);
        let emax = p.energies().iter().fold(0.0f64, |a, e| a.max(e.abs()));
        assert!(p.reconstruction_residual(&blocks) <= 1e-8 * emax);
    }

    #[test]
    fn evolve_identity_and_reversibility() {
        let m = small(25, 25, 5e-3);
        let p = build_propagator(&m).unwrap();
        let s = initial_state_superposition(&m, 2);
        let s0 = p.evolve(&s, 0.0);
        for (a, b) in s0.amplitudes().iter().zip(s.amplitudes()) {
            assert!((a - b).norm() < 1e-13);
        }
        let fwd = p.evolve(&s, 730.0);
        assert!((fwd.norm() - 1.0).abs() < 1e-10);
        let back = p.evolve(&fwd, -730.0);
        for (a, b) in back.amplitudes().iter().zip(s.amplitudes()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn hamiltonian_matches_block() {
        let m = small(5, 3, 0.02);
        let blocks = BlockDecomposition::from_model(&m);
        let l = BasisLayout::of(&m);
        for k in 0..l.dim() {
            let mut e = Array1::<C64>::zeros(l.dim());
            e[k] = C64::new(1.0, 0.0);
            let col = apply_hamiltonian(&m, &e);
            if k < l.coupled().end {
                for i in l.coupled() {
                    assert!((col[i] - blocks.coupled[[i, k]]).norm() < 1e-15);
                }
                assert!(col.slice(s![l.coupled().end..]).iter().all(|z| z.norm() == 0.0));
            } else {
                let nz: Vec<usize> = (0..l.dim()).filter(|&i| col[i].norm() > 0.0).collect();
                assert_eq!(nz, vec![k]);
            }
        }
    }

    #[test]
    fn ode_zero_coupling_pure_phase() {
        let m = small(6, 6, 0.0);
        let s = initial_state_subspace_random(&m, 0.5, 4).unwrap();
        let out = evolve_ode(&m, &s, &[0.0, 40.0]).unwrap();
        assert_eq!(out[0], s);
        for (a, b) in out[1].amplitudes().iter().zip(s.amplitudes()) {
            assert!((a.norm() - b.norm()).abs() < 1e-8);
        }
    }
}
