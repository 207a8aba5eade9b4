//! Adaptive Dormand–Prince 5(4) integrator for complex linear systems.
//!
//! Only used as an independent cross-check of the spectral propagator and of
//! the closed-form rate-equation solutions, so it favours clarity over speed.

use ndarray::Array1;
use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("time grid must be non-decreasing (index {index})")]
    UnsortedGrid { index: usize },
    #[error("exceeded {max_steps} steps before reaching t = {t_end}")]
    TooManySteps { max_steps: usize, t_end: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-10, max_steps: 50_000_000 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: &Array1<C64>, terms: &[(f64, &Array1<C64>)], h: f64) -> Array1<C64> {
    let mut out = y.clone();
    for &(a, k) in terms {
        if a != 0.0 {
            out.scaled_add(C64::new(a * h, 0.0), k);
        }
    }
    out
}

/// Integrate dy/dt = f(t, y) from `t_grid[0]` and return y at every grid time.
pub fn integrate<F>(mut rhs: F, y0: &Array1<C64>, t_grid: &[f64], tol: Tolerance) -> Result<Vec<Array1<C64>>, OdeError>
where
    F: FnMut(f64, &Array1<C64>) -> Array1<C64>,
{
    if let Some(i) = t_grid.windows(2).position(|w| w[1] < w[0]) {
        return Err(OdeError::UnsortedGrid { index: i + 1 });
    }
    let mut out = Vec::with_capacity(t_grid.len());
    let Some(&t0) = t_grid.first() else {
        return Ok(out);
    };
    let mut t = t0;
    let mut y = y0.clone();
    let mut k1 = rhs(t, &y);
    let mut h = initial_step(&y, &k1, tol);
    let mut steps = 0usize;

    for &t_target in t_grid {
        while t < t_target {
            steps += 1;
            if steps > tol.max_steps {
                return Err(OdeError::TooManySteps { max_steps: tol.max_steps, t_end: t_target });
            }
            let last = t + h >= t_target;
            let h_try = if last { t_target - t } else { h };
            if h_try < 1e-14 * t.abs().max(1.0) && !last {
                return Err(OdeError::StepUnderflow { t, h: h_try });
            }

            let k2 = rhs(t + C2 * h_try, &axpy(&y, &[(A21, &k1)], h_try));
            let k3 = rhs(t + C3 * h_try, &axpy(&y, &[(A31, &k1), (A32, &k2)], h_try));
            let k4 = rhs(t + C4 * h_try, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h_try));
            let k5 = rhs(t + C5 * h_try, &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h_try));
            let k6 = rhs(t + h_try, &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h_try));
            let y_new = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h_try);
            let k7 = rhs(t + h_try, &y_new);

            let mut err = Array1::<C64>::zeros(y.len());
            for (a, k) in [(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)] {
                err.scaled_add(C64::new(a * h_try, 0.0), k);
            }
            let err_norm = scaled_rms(&err, &y, &y_new, tol);

            if err_norm <= 1.0 {
                t = if last { t_target } else { t + h_try };
                y = y_new;
                k1 = k7;
            }
            let factor = if err_norm == 0.0 { 5.0 } else { (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0) };
            if !(last && err_norm <= 1.0) {
                h = h_try * factor;
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(OdeError::StepUnderflow { t, h });
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

fn scaled_rms(err: &Array1<C64>, y0: &Array1<C64>, y1: &Array1<C64>, tol: Tolerance) -> f64 {
    if err.is_empty() {
        return 0.0;
    }
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = tol.atol + tol.rtol * a.norm().max(b.norm());
            (e.norm() / sc).powi(2)
        })
        .sum();
    (s / err.len() as f64).sqrt()
}

fn initial_step(y: &Array1<C64>, f: &Array1<C64>, tol: Tolerance) -> f64 {
    let yn = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let fnorm = f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if fnorm == 0.0 {
        return 1.0;
    }
    (0.01 * (yn.max(tol.atol)) / fnorm).clamp(1e-8, 1.0)
}
