//! Agreement measures between exact and predicted trajectories.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("series lengths differ: {0} vs {1} (grid {2})")]
    Misaligned(usize, usize, usize),
    #[error("time grid must start at 0, be uniform and reach tau = {tau}: {reason}")]
    BadGrid { tau: f64, reason: String },
    #[error("scaling fit needs at least 3 points with D² > 0, got {0}")]
    TooFewPoints(usize),
    #[error("scaling fit is degenerate: all N are equal")]
    DegenerateAbscissa,
    #[error("bin width must be positive, got {0}")]
    BadBinWidth(f64),
}

/// Time-averaged squared deviation over [0, τ].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationReport {
    pub d_squared: f64,
    pub d: f64,
    pub tau: f64,
    pub n_samples: usize,
    pub grid_step: f64,
}

/// D² = (1/τ)∫₀^τ (a(t) − b(t))² dt by the trapezoidal rule on a uniform grid.
pub fn deviation_d2(a: &[f64], b: &[f64], t_grid: &[f64], tau: f64) -> Result<DeviationReport, MetricsError> {
    if a.len() != t_grid.len() || b.len() != t_grid.len() {
        return Err(MetricsError::Misaligned(a.len(), b.len(), t_grid.len()));
    }
    let bad = |reason: &str| Err(MetricsError::BadGrid { tau, reason: reason.into() });
    if !(tau > 0.0) {
        return bad("tau must be positive");
    }
    if t_grid.len() < 2 {
        return bad("need at least two samples");
    }
    if t_grid[0].abs() > 1e-12 {
        return bad("first sample is not t = 0");
    }
    let step = t_grid[1] - t_grid[0];
    if !(step > 0.0) {
        return bad("grid is not increasing");
    }
    let slack = 1e-9 * step.max(1.0);
    if t_grid.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > slack) {
        return bad("grid is not uniform");
    }
    let n_int = ((tau / step) + 1e-9).floor() as usize;
    if n_int + 1 > t_grid.len() {
        return bad("tau lies beyond the grid");
    }
    if (t_grid[n_int] - tau).abs() > slack {
        return bad("tau does not fall on a grid point");
    }

    let sq: Vec<f64> = a[..=n_int].iter().zip(&b[..=n_int]).map(|(x, y)| (x - y) * (x - y)).collect();
    let interior: f64 = sq[1..n_int].iter().sum();
    let integral = step * (0.5 * (sq[0] + sq[n_int]) + interior);
    let d_squared = (integral / tau).max(0.0);
    Ok(DeviationReport { d_squared, d: d_squared.sqrt(), tau, n_samples: n_int + 1, grid_step: step })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Left-closed bins of width `bin_width` starting at 0, up to the bin of the
/// largest value. Values below 0 land in the first bin.
pub fn histogram(values: &[f64], bin_width: f64) -> Result<Vec<Bin>, MetricsError> {
    if !(bin_width > 0.0) {
        return Err(MetricsError::BadBinWidth(bin_width));
    }
    if values.is_empty() {
        return Ok(Vec::new());
    }
    let index = |v: f64| (v / bin_width).floor().max(0.0) as usize;
    let n_bins = values.iter().map(|&v| index(v)).max().unwrap_or(0) + 1;
    let mut counts = vec![0usize; n_bins];
    for &v in values {
        counts[index(v)] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| Bin { lo: i as f64 * bin_width, hi: (i + 1) as f64 * bin_width, count })
        .collect())
}

/// Bin with the highest count (first one on ties).
pub fn histogram_mode(bins: &[Bin]) -> Option<Bin> {
    bins.iter().copied().fold(None, |best: Option<Bin>, b| match best {
        Some(m) if m.count >= b.count => Some(m),
        _ => Some(b),
    })
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
}

/// Least squares of ln D² against ln N.
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<ScalingFit, MetricsError> {
    let used: Vec<(f64, f64)> = points.iter().copied().filter(|&(n, d2)| n >= 1.0 && d2 > 0.0).collect();
    if used.len() < 3 {
        return Err(MetricsError::TooFewPoints(used.len()));
    }
    let xs: Vec<f64> = used.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 1e-300 {
        return Err(MetricsError::DegenerateAbscissa);
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / m).sqrt();
    Ok(ScalingFit { points: used, slope, intercept, residual })
}

/// Least-squares fit y ≈ offset + amplitude·exp(−rate·t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpFit {
    pub offset: f64,
    pub amplitude: f64,
    pub rate: f64,
    pub rms_residual: f64,
}

impl ExpFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.offset + self.amplitude * (-self.rate * t).exp()
    }
}

/// Best single exponential over rates in [rate_lo, rate_hi]. The linear
/// coefficients are solved exactly for each trial rate; the rate itself is
/// found by a log-spaced scan followed by golden-section refinement.
pub fn fit_exponential(t: &[f64], y: &[f64], with_offset: bool, rate_lo: f64, rate_hi: f64) -> ExpFit {
    let solve = |rate: f64| -> ExpFit {
        let e: Vec<f64> = t.iter().map(|&ti| (-rate * ti).exp()).collect();
        let (offset, amplitude) = if with_offset {
            let n = t.len() as f64;
            let se: f64 = e.iter().sum();
            let see: f64 = e.iter().map(|v| v * v).sum();
            let sy: f64 = y.iter().sum();
            let sey: f64 = e.iter().zip(y).map(|(a, b)| a * b).sum();
            let det = n * see - se * se;
            if det.abs() < 1e-12 * n * see.max(1e-300) {
                (sy / n, 0.0)
            } else {
                ((see * sy - se * sey) / det, (n * sey - se * sy) / det)
            }
        } else {
            let see: f64 = e.iter().map(|v| v * v).sum();
            let sey: f64 = e.iter().zip(y).map(|(a, b)| a * b).sum();
            (0.0, if see > 0.0 { sey / see } else { 0.0 })
        };
        let rss: f64 = e.iter().zip(y).map(|(ei, yi)| (offset + amplitude * ei - yi).powi(2)).sum();
        ExpFit { offset, amplitude, rate, rms_residual: (rss / t.len().max(1) as f64).sqrt() }
    };

    let (llo, lhi) = (rate_lo.ln(), rate_hi.ln());
    let scan = 400;
    let mut best = (0usize, solve(rate_lo));
    for k in 1..=scan {
        let fit = solve((llo + (lhi - llo) * k as f64 / scan as f64).exp());
        if fit.rms_residual < best.1.rms_residual {
            best = (k, fit);
        }
    }
    let h = (lhi - llo) / scan as f64;
    let (mut a, mut b) = (llo + h * (best.0 as f64 - 1.0).max(0.0), llo + h * (best.0 as f64 + 1.0).min(scan as f64));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if solve(c.exp()).rms_residual < solve(d.exp()).rms_residual {
            b = d;
        } else {
            a = c;
        }
    }
    let refined = solve((0.5 * (a + b)).exp());
    if refined.rms_residual < best.1.rms_residual {
        refined
    } else {
        best.1
    }
}
