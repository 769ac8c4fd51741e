//! Thermal occupancy conversions, least-squares fits for decay and
//! oscillation traces, and the steady-state occupancy scan.

use crate::error::{Error, Result};
use crate::protocols::ResetModel;
use crate::units::{HBAR, K_B};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Bose-Einstein occupancy of a mode at angular frequency `frequency` (rad/s).
pub fn bose_einstein(frequency: f64, temperature: f64) -> Result<f64> {
    if !(frequency > 0.0) || !frequency.is_finite() {
        return Err(Error::invalid("frequency", "must be positive"));
    }
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::invalid("temperature", "must be positive"));
    }
    let x = HBAR * frequency / (K_B * temperature);
    if x > 30.0 {
        Ok((-x).exp())
    } else {
        Ok(1.0 / x.exp_m1())
    }
}

/// Temperature at which a mode at `frequency` has mean occupancy `occupancy`.
pub fn effective_temperature(frequency: f64, occupancy: f64) -> Result<f64> {
    if !(frequency > 0.0) {
        return Err(Error::invalid("frequency", "must be positive"));
    }
    if !(occupancy > 0.0) || !occupancy.is_finite() {
        return Err(Error::invalid("occupancy", "must be positive and finite"));
    }
    Ok(HBAR * frequency / (K_B * (1.0 / occupancy).ln_1p()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalPoint {
    pub frequency: f64,
    pub temperature: f64,
    pub occupancy: f64,
}

impl ThermalPoint {
    pub fn from_temperature(frequency: f64, temperature: f64) -> Result<Self> {
        Ok(Self {
            frequency,
            temperature,
            occupancy: bose_einstein(frequency, temperature)?,
        })
    }

    pub fn from_occupancy(frequency: f64, occupancy: f64) -> Result<Self> {
        Ok(Self {
            frequency,
            temperature: effective_temperature(frequency, occupancy)?,
            occupancy,
        })
    }
}

/// Fitted `A exp(-rate t) cos(frequency t + phase) + offset`; the cosine is
/// absent for exponential fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub amplitude: f64,
    pub rate: f64,
    pub offset: f64,
    pub frequency: Option<f64>,
    pub phase: Option<f64>,
    /// sqrt of the residual sum of squares.
    pub residual_norm: f64,
    pub iterations: usize,
}

impl FitResult {
    /// Decay time; infinite when no decay was resolved.
    pub fn tau(&self) -> f64 {
        1.0 / self.rate
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let osc = match (self.frequency, self.phase) {
            (Some(w), Some(p)) => (w * t + p).cos(),
            _ => 1.0,
        };
        self.amplitude * (-self.rate * t).exp() * osc + self.offset
    }
}

const MAX_ITERATIONS: usize = 500;

struct LmOutcome {
    params: Vec<f64>,
    sse: f64,
    iterations: usize,
}

/// Levenberg-Marquardt on residuals `model(x) - y`. `model` fills the value
/// and gradient at one abscissa.
fn levenberg_marquardt(
    xs: &[f64],
    ys: &[f64],
    start: &[f64],
    model: &dyn Fn(&[f64], f64, &mut [f64]) -> f64,
    project: &dyn Fn(&mut [f64]),
) -> Result<LmOutcome> {
    let np = start.len();
    let mut grad = vec![0.0; np];
    let eval = |p: &[f64], grad: &mut [f64], jac: Option<&mut DMatrix<f64>>| -> (DVector<f64>, f64) {
        let mut r = DVector::zeros(xs.len());
        let mut jac = jac;
        for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
            r[i] = model(p, x, grad) - y;
            if let Some(j) = jac.as_deref_mut() {
                for k in 0..np {
                    j[(i, k)] = grad[k];
                }
            }
        }
        let sse = r.norm_squared();
        (r, sse)
    };
    let mut p = start.to_vec();
    let mut jac = DMatrix::zeros(xs.len(), np);
    let (mut r, mut sse) = eval(&p, &mut grad, Some(&mut jac));
    let scale = ys.iter().map(|y| y * y).sum::<f64>().max(1e-300);
    let mut lambda = 1e-3;
    for it in 1..=MAX_ITERATIONS {
        if !sse.is_finite() {
            return Err(Error::FitDiverged {
                iterations: it,
                residual: sse.sqrt(),
            });
        }
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..np {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            project(&mut trial);
            let mut tj = DMatrix::zeros(xs.len(), np);
            let (tr, tsse) = eval(&trial, &mut grad, Some(&mut tj));
            if tsse.is_finite() && tsse <= sse {
                let gain = sse - tsse;
                let small_step = step.norm() <= 1e-12 * (1.0 + DVector::from_column_slice(&p).norm());
                p = trial;
                r = tr;
                jac = tj;
                let converged = gain <= 1e-15 * sse || tsse <= 1e-28 * scale || small_step;
                sse = tsse;
                lambda = (lambda / 5.0).max(1e-12);
                accepted = true;
                if converged {
                    return Ok(LmOutcome {
                        params: p,
                        sse,
                        iterations: it,
                    });
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // no descent direction left at machine precision
            return Ok(LmOutcome {
                params: p,
                sse,
                iterations: it,
            });
        }
    }
    Err(Error::FitDiverged {
        iterations: MAX_ITERATIONS,
        residual: sse.sqrt(),
    })
}

fn check_series(times: &[f64], values: &[f64], min: usize) -> Result<()> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: values.len(),
        });
    }
    if times.len() < min {
        return Err(Error::FitInput(format!("need at least {min} samples, got {}", times.len())));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::FitInput("times must be strictly increasing".into()));
    }
    if values.iter().chain(times).any(|v| !v.is_finite()) {
        return Err(Error::FitInput("non-finite sample".into()));
    }
    Ok(())
}

fn sse_of(values: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    values.iter().enumerate().map(|(i, y)| (f(i) - y).powi(2)).sum()
}

/// Linear least squares for `(A, C)` in `A e^{-k s} + C`.
fn linear_amplitude(s: &[f64], ys: &[f64], k: f64) -> (f64, f64, f64) {
    let n = s.len() as f64;
    let e: Vec<f64> = s.iter().map(|x| (-k * x).exp()).collect();
    let (se, see) = (e.iter().sum::<f64>(), e.iter().map(|v| v * v).sum::<f64>());
    let (sy, sey) = (ys.iter().sum::<f64>(), e.iter().zip(ys).map(|(a, b)| a * b).sum::<f64>());
    let det = n * see - se * se;
    if det.abs() < 1e-300 {
        return (0.0, sy / n, f64::INFINITY);
    }
    let a = (n * sey - se * sy) / det;
    let c = (see * sy - se * sey) / det;
    (a, c, sse_of(ys, |i| a * e[i] + c))
}

/// Least-squares fit of `A exp(-t/tau) + C`. The rate is seeded from a
/// log-linear regression against the tail value, with a coarse rate scan as
/// a fallback when that seed is worse.
pub fn fit_exponential(times: &[f64], values: &[f64]) -> Result<FitResult> {
    check_series(times, values, 5)?;
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;
    let s: Vec<f64> = times.iter().map(|t| (t - t0) / span).collect();
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if hi - lo <= 1e-12 * mean.abs().max(1e-300) {
        return Ok(FitResult {
            amplitude: 0.0,
            rate: 0.0,
            offset: mean,
            frequency: None,
            phase: None,
            residual_norm: sse_of(values, |_| mean).sqrt(),
            iterations: 0,
        });
    }

    let mut seeds: Vec<f64> = Vec::new();
    let tail = values[values.len() - 1];
    let first = values[0];
    let pad = 0.01 * (first - tail);
    let (mut sx, mut sy, mut sxx, mut sxy, mut m) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in s.iter().zip(values) {
        let d = (y - tail + pad) / (first - tail + pad);
        if d > 0.0 {
            let ly = d.ln();
            sx += x;
            sy += ly;
            sxx += x * x;
            sxy += x * ly;
            m += 1.0;
        }
    }
    if m >= 2.0 && (m * sxx - sx * sx).abs() > 0.0 {
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        if slope < 0.0 {
            seeds.push(-slope);
        }
    }
    seeds.extend((0..40).map(|k| 0.05 * 10f64.powf(k as f64 * 0.075)));
    let (k0, a0, c0) = seeds
        .iter()
        .map(|&k| {
            let (a, c, e) = linear_amplitude(&s, values, k);
            (k, a, c, e)
        })
        .min_by(|x, y| x.3.total_cmp(&y.3))
        .map(|(k, a, c, _)| (k, a, c))
        .expect("seed list is non-empty");

    let model = |p: &[f64], x: f64, g: &mut [f64]| {
        let e = (-p[1] * x).exp();
        g[0] = e;
        g[1] = -p[0] * x * e;
        g[2] = 1.0;
        p[0] * e + p[2]
    };
    let project = |p: &mut [f64]| p[1] = p[1].max(0.0);
    let out = levenberg_marquardt(&s, values, &[a0, k0, c0], &model, &project)?;
    let (a, k, c) = (out.params[0], out.params[1], out.params[2]);
    Ok(FitResult {
        amplitude: a * (k * t0 / span).exp(),
        rate: k / span,
        offset: c,
        frequency: None,
        phase: None,
        residual_norm: out.sse.sqrt(),
        iterations: out.iterations,
    })
}

/// Peak-to-median power ratio required of the spectral seed.
const PEAK_OVER_FLOOR: f64 = 10.0;

/// Least-squares fit of `A exp(-t/tau) cos(w t + phi) + C`, with `w` seeded
/// from the largest peak of a zero-padded discrete Fourier sum.
pub fn fit_damped_sine(times: &[f64], values: &[f64]) -> Result<FitResult> {
    check_series(times, values, 10)?;
    let n = times.len();
    let t0 = times[0];
    let span = times[n - 1] - t0;
    let s: Vec<f64> = times.iter().map(|t| (t - t0) / span).collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = values.iter().map(|v| v - mean).collect();
    if centred.iter().all(|v| v.abs() <= 1e-12 * mean.abs().max(1e-300)) {
        return Err(Error::NoSpectralPeak);
    }

    let mut dts: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
    dts.sort_by(f64::total_cmp);
    let nyquist = 0.5 / dts[dts.len() / 2];
    // frequencies in cycles per span; padded 8x
    let df = 0.125;
    let count = (nyquist / df).floor() as usize;
    if count < 8 {
        return Err(Error::NoSpectralPeak);
    }
    let spectrum: Vec<(f64, f64, f64)> = (4..=count)
        .map(|k| {
            let f = k as f64 * df;
            let w = 2.0 * std::f64::consts::PI * f;
            let (mut re, mut im) = (0.0, 0.0);
            for (x, y) in s.iter().zip(&centred) {
                re += y * (w * x).cos();
                im -= y * (w * x).sin();
            }
            (w, re, im)
        })
        .collect();
    let mut powers: Vec<f64> = spectrum.iter().map(|(_, re, im)| re * re + im * im).collect();
    let (peak_idx, _) = powers
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("spectrum is non-empty");
    let (w0, re0, im0) = spectrum[peak_idx];
    let peak = powers[peak_idx];
    powers.sort_by(f64::total_cmp);
    let floor = powers[powers.len() / 2];
    if !(peak > PEAK_OVER_FLOOR * floor) || peak == 0.0 {
        return Err(Error::NoSpectralPeak);
    }
    let amp = 2.0 * (re0 * re0 + im0 * im0).sqrt() / n as f64;
    let phi = im0.atan2(re0);
    let start = [amp * phi.cos(), -amp * phi.sin(), 1.0, w0, mean];

    let model = |p: &[f64], x: f64, g: &mut [f64]| {
        let e = (-p[2] * x).exp();
        let (sn, cs) = (p[3] * x).sin_cos();
        let osc = p[0] * cs + p[1] * sn;
        g[0] = e * cs;
        g[1] = e * sn;
        g[2] = -x * e * osc;
        g[3] = e * x * (-p[0] * sn + p[1] * cs);
        g[4] = 1.0;
        e * osc + p[4]
    };
    let project = |p: &mut [f64]| p[2] = p[2].max(0.0);
    let out = levenberg_marquardt(&s, values, &start, &model, &project)?;
    let p = &out.params;
    let amplitude_s = p[0].hypot(p[1]);
    let phase_s = (-p[1]).atan2(p[0]);
    let rate = p[2] / span;
    let omega = p[3] / span;
    let phase = (phase_s - omega * t0).rem_euclid(2.0 * std::f64::consts::PI);
    Ok(FitResult {
        amplitude: amplitude_s * (rate * t0).exp(),
        rate,
        offset: p[4],
        frequency: Some(omega),
        phase: Some(phase),
        residual_norm: out.sse.sqrt(),
        iterations: out.iterations,
    })
}

/// Occupancy read off the contour at one mode decay rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarReadout {
    pub kappa: f64,
    pub target: f64,
    /// Contour value interpolated from the grid surface.
    pub interpolated: Option<f64>,
    /// Root of a direct steady-state solve in the grid's occupancy range.
    pub occupancy: Option<f64>,
    /// Occupancies at `target -/+ tolerance`.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyScanResult {
    pub occupancies: Vec<f64>,
    pub kappas: Vec<f64>,
    /// `pe[j][i]` at `kappas[j]`, `occupancies[i]`.
    pub pe: Vec<Vec<f64>>,
    pub target: f64,
    /// Contour segments as `[(occupancy, kappa); 2]`.
    pub segments: Vec<[(f64, f64); 2]>,
    /// Target lies outside the surface's range.
    pub out_of_range: bool,
}

impl SteadyScanResult {
    /// Crossing occupancy in each kappa row, if the row crosses the target.
    pub fn row_crossings(&self) -> Vec<Vec<f64>> {
        self.pe
            .iter()
            .map(|row| {
                let mut hits = Vec::new();
                for i in 0..row.len().saturating_sub(1) {
                    if let Some(x) = edge_crossing(
                        self.occupancies[i].ln(),
                        row[i] - self.target,
                        self.occupancies[i + 1].ln(),
                        row[i + 1] - self.target,
                    ) {
                        if hits.last().map_or(true, |&h: &f64| (h - x.exp()).abs() > 1e-12 * h) {
                            hits.push(x.exp());
                        }
                    }
                }
                if row.len() == 1 && row[0] == self.target {
                    hits.push(self.occupancies[0]);
                }
                hits
            })
            .collect()
    }

    /// Contour occupancy at `kappa`, interpolated linearly in log kappa
    /// between the row crossings that bracket it.
    pub fn contour_at(&self, kappa: f64) -> Option<f64> {
        let rows = self.row_crossings();
        let single = |j: usize| match rows[j].as_slice() {
            [x] => Some(*x),
            _ => None,
        };
        if self.kappas.len() == 1 {
            return if (self.kappas[0] - kappa).abs() <= 1e-12 * kappa { single(0) } else { None };
        }
        for j in 0..self.kappas.len() - 1 {
            let (k0, k1) = (self.kappas[j], self.kappas[j + 1]);
            if (kappa - k0) * (kappa - k1) <= 0.0 {
                let (a, b) = (single(j)?, single(j + 1)?);
                let w = (kappa.ln() - k0.ln()) / (k1.ln() - k0.ln());
                return Some((a.ln() * (1.0 - w) + b.ln() * w).exp());
            }
        }
        None
    }
}

fn edge_crossing(x0: f64, f0: f64, x1: f64, f1: f64) -> Option<f64> {
    if f0 == 0.0 {
        return Some(x0);
    }
    if f1 == 0.0 {
        return Some(x1);
    }
    if (f0 < 0.0) != (f1 < 0.0) {
        Some(x0 + (x1 - x0) * f0 / (f0 - f1))
    } else {
        None
    }
}

/// Marching squares over a surface `f` on axes `xs` (columns) and `ys`
/// (rows), returning segments of the zero level set.
fn marching_squares(xs: &[f64], ys: &[f64], f: &[Vec<f64>]) -> Vec<[(f64, f64); 2]> {
    let mut segments = Vec::new();
    for j in 0..ys.len().saturating_sub(1) {
        for i in 0..xs.len().saturating_sub(1) {
            let corners = [
                (xs[i], ys[j], f[j][i]),
                (xs[i + 1], ys[j], f[j][i + 1]),
                (xs[i + 1], ys[j + 1], f[j + 1][i + 1]),
                (xs[i], ys[j + 1], f[j + 1][i]),
            ];
            let mut pts: Vec<(f64, f64)> = Vec::new();
            for e in 0..4 {
                let (a, b) = (corners[e], corners[(e + 1) % 4]);
                let hit = if a.1 == b.1 {
                    edge_crossing(a.0, a.2, b.0, b.2).map(|x| (x, a.1))
                } else {
                    edge_crossing(a.1, a.2, b.1, b.2).map(|y| (a.0, y))
                };
                if let Some(p) = hit {
                    if !pts.iter().any(|q| (q.0 - p.0).abs() < 1e-15 && (q.1 - p.1).abs() < 1e-15) {
                        pts.push(p);
                    }
                }
            }
            match pts.len() {
                2 => segments.push([pts[0], pts[1]]),
                4 => {
                    // saddle: pair by the sign at the cell centre
                    let centre: f64 = corners.iter().map(|c| c.2).sum::<f64>() / 4.0;
                    if (centre < 0.0) == (corners[0].2 < 0.0) {
                        segments.push([pts[0], pts[1]]);
                        segments.push([pts[2], pts[3]]);
                    } else {
                        segments.push([pts[0], pts[3]]);
                        segments.push([pts[1], pts[2]]);
                    }
                }
                _ => {}
            }
        }
    }
    segments
}

/// Steady-state qubit excitation of `template` over a grid of mode
/// occupancies and decay rates, with the `target` iso-contour.
pub fn steady_scan(template: &ResetModel, occupancies: &[f64], kappas: &[f64], target: f64) -> Result<SteadyScanResult> {
    if occupancies.is_empty() || kappas.is_empty() {
        return Err(Error::invalid("grid", "must be non-empty"));
    }
    if occupancies.iter().chain(kappas).any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("grid", "values must be positive"));
    }
    if occupancies.windows(2).any(|w| w[1] <= w[0]) || kappas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("grid", "must be strictly increasing"));
    }
    let points: Vec<(usize, usize)> = (0..kappas.len()).flat_map(|j| (0..occupancies.len()).map(move |i| (j, i))).collect();
    let values = points
        .par_iter()
        .map(|&(j, i)| pe_at(template, kappas[j], occupancies[i]))
        .collect::<Result<Vec<f64>>>()?;
    let pe: Vec<Vec<f64>> = values.chunks(occupancies.len()).map(<[f64]>::to_vec).collect();
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let out_of_range = target < lo || target > hi;
    let shifted: Vec<Vec<f64>> = pe.iter().map(|r| r.iter().map(|v| v - target).collect()).collect();
    let log_n: Vec<f64> = occupancies.iter().map(|n| n.ln()).collect();
    let segments = marching_squares(&log_n, kappas, &shifted)
        .into_iter()
        .map(|seg| seg.map(|(x, y)| (x.exp(), y)))
        .collect();
    Ok(SteadyScanResult {
        occupancies: occupancies.to_vec(),
        kappas: kappas.to_vec(),
        pe,
        target,
        segments,
        out_of_range,
    })
}

fn pe_at(template: &ResetModel, kappa: f64, occupancy: f64) -> Result<f64> {
    ResetModel {
        resonator_kappa: kappa,
        resonator_occupancy: occupancy,
        fock_cutoff: None,
        ..*template
    }
    .steady_pe()
}

/// Occupancy in `[n_lo, n_hi]` whose steady state gives `target`, by
/// bisection in log occupancy.
fn solve_occupancy(template: &ResetModel, kappa: f64, target: f64, n_lo: f64, n_hi: f64) -> Result<Option<f64>> {
    let (f_lo, f_hi) = (pe_at(template, kappa, n_lo)? - target, pe_at(template, kappa, n_hi)? - target);
    if f_lo > 0.0 || f_hi < 0.0 {
        return Ok(None);
    }
    let (mut a, mut b) = (n_lo.ln(), n_hi.ln());
    while b - a > 1e-9 {
        let mid = 0.5 * (a + b);
        if pe_at(template, kappa, mid.exp())? < target {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Some((0.5 * (a + b)).exp()))
}

/// The contour's occupancy at `kappa`, with bounds from re-solving at
/// `target -/+ tolerance`.
pub fn star_readout(scan: &SteadyScanResult, template: &ResetModel, kappa: f64, tolerance: f64) -> Result<StarReadout> {
    let n_lo = scan.occupancies[0];
    let n_hi = scan.occupancies[scan.occupancies.len() - 1];
    let solve = |t: f64| solve_occupancy(template, kappa, t, n_lo, n_hi);
    Ok(StarReadout {
        kappa,
        target: scan.target,
        interpolated: scan.contour_at(kappa),
        occupancy: solve(scan.target)?,
        lower: solve(scan.target - tolerance)?,
        upper: solve(scan.target + tolerance)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn w(ghz: f64) -> f64 {
        2.0 * PI * ghz * 1e9
    }

    #[test]
    fn occupancy_references() {
        assert!((bose_einstein(w(7.48), 2.0).unwrap() - 5.09).abs() < 0.01);
        assert!((bose_einstein(w(7.48), 4.0).unwrap() - 10.66).abs() < 0.05);
        assert!(bose_einstein(w(7.48), 1e-3).unwrap() < 1e-100);
        assert!(bose_einstein(w(7.48), 0.0).is_err());
        assert!(bose_einstein(-1.0, 1.0).is_err());
        assert!((effective_temperature(w(7.48), 5.09).unwrap() - 2.0).abs() < 0.01);
        assert!((effective_temperature(w(7.48), 0.06).unwrap() - 0.125).abs() < 0.003);
        assert!(effective_temperature(w(7.48), 0.0).is_err());
    }

    #[test]
    fn exponential_noiseless() {
        let t: Vec<f64> = (0..80).map(|k| k as f64 * 50e-9).collect();
        let y: Vec<f64> = t.iter().map(|t| (-t / 760e-9).exp() + 0.34).collect();
        let fit = fit_exponential(&t, &y).unwrap();
        assert!((fit.tau() / 760e-9 - 1.0).abs() < 1e-6);
        assert!((fit.amplitude - 1.0).abs() < 1e-6);
        assert!((fit.offset - 0.34).abs() < 1e-6);
    }

    #[test]
    fn exponential_constant_and_bad_input() {
        let t: Vec<f64> = (0..6).map(f64::from).collect();
        let fit = fit_exponential(&t, &[0.3; 6]).unwrap();
        assert_eq!(fit.amplitude, 0.0);
        assert_eq!(fit.offset, 0.3);
        assert!(fit_exponential(&t[..4], &[0.3; 4]).is_err());
        assert!(fit_exponential(&[0.0, 1.0, 1.0, 2.0, 3.0], &[1.0; 5]).is_err());
    }

    #[test]
    fn damped_sine_noiseless() {
        let t: Vec<f64> = (0..400).map(|k| k as f64 * 2e-9).collect();
        let omega = 2.0 * PI * 5e6;
        let y: Vec<f64> = t.iter().map(|t| 0.4 * (-t / 400e-9).exp() * (omega * t + 0.3).cos() + 0.5).collect();
        let fit = fit_damped_sine(&t, &y).unwrap();
        assert!((fit.frequency.unwrap() / omega - 1.0).abs() < 1e-6);
        assert!((fit.tau() / 400e-9 - 1.0).abs() < 1e-6);
        assert!((fit.amplitude - 0.4).abs() < 1e-6);
        assert!((fit.phase.unwrap() - 0.3).abs() < 1e-6);
    }

    #[test]
    fn pure_cosine_has_no_decay() {
        let t: Vec<f64> = (0..200).map(|k| k as f64 * 1e-9 + 5e-9).collect();
        let omega = 2.0 * PI * 20e6;
        let y: Vec<f64> = t.iter().map(|t| (omega * t).cos()).collect();
        let fit = fit_damped_sine(&t, &y).unwrap();
        assert!(fit.rate.abs() < 1.0);
        assert!((fit.frequency.unwrap() / omega - 1.0).abs() < 1e-9);
    }

    #[test]
    fn flat_trace_has_no_peak() {
        let t: Vec<f64> = (0..50).map(f64::from).collect();
        let y = vec![0.7; t.len()];
        assert!(matches!(fit_damped_sine(&t, &y), Err(Error::NoSpectralPeak)));
    }

    #[test]
    fn marching_squares_single_cell() {
        let f = vec![vec![-1.0, 1.0], vec![-1.0, 1.0]];
        let segs = marching_squares(&[0.0, 1.0], &[0.0, 1.0], &f);
        assert_eq!(segs.len(), 1);
        for p in segs[0] {
            assert!((p.0 - 0.5).abs() < 1e-15);
        }
    }
}
