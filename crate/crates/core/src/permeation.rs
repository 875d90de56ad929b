//! Electrochemical permeation analysis: transient fitting, sub-surface
//! concentration and environment schedules.
//!
//! Transients are in SI units (s, A/m², m) as recorded; concentrations leave
//! this module in wt ppm.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log10};

use crate::diffusion::{EnvSchedule, PPM_TO_MOLAR};
use crate::error::{Error, Result};

/// Faraday constant, C/mol.
pub const FARADAY: f64 = 96485.0;

const PI2: f64 = core::f64::consts::PI * core::f64::consts::PI;
const MAX_TERMS: usize = 10_000;
const TERM_CUTOFF: f64 = 1e-12;

/// Normalized exit flux of a membrane after a step in entry concentration,
/// `1 + 2 Σ (−1)ⁿ exp(−n²π²τ)`, clamped to [0, 1].
pub fn normalized_flux(tau: f64) -> f64 {
    if !(tau > 0.0) {
        return 0.0;
    }
    let mut s = 1.0;
    for n in 1..=MAX_TERMS {
        let nf = n as f64;
        let t = 2.0 * exp(-nf * nf * PI2 * tau);
        s += if n % 2 == 1 { -t } else { t };
        if t < TERM_CUTOFF {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

/// dF/dτ of [`normalized_flux`].
pub fn normalized_flux_slope(tau: f64) -> f64 {
    if !(tau > 0.0) {
        return 0.0;
    }
    let mut s = 0.0;
    for n in 1..=MAX_TERMS {
        let nf = n as f64;
        let t = 2.0 * nf * nf * PI2 * exp(-nf * nf * PI2 * tau);
        s += if n % 2 == 1 { t } else { -t };
        if t < TERM_CUTOFF {
            break;
        }
    }
    s.max(0.0)
}

/// Smallest τ with `normalized_flux(τ) ≥ level`.
fn tau_at_level(level: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 2.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if normalized_flux(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Measured anodic current density through a membrane.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PermeationTransient {
    /// Seconds since charging began.
    pub times: Vec<f64>,
    /// Current density, A/m².
    pub current: Vec<f64>,
    /// Membrane thickness, m.
    pub thickness: f64,
    /// Exposed area, m².
    pub area: f64,
    pub label: String,
}

impl PermeationTransient {
    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.current.len() {
            return Err(Error::InvalidParameter(format!(
                "{} times but {} current values",
                self.times.len(),
                self.current.len()
            )));
        }
        if !(self.thickness > 0.0) {
            return Err(Error::InvalidParameter(format!("membrane thickness {} must be positive", self.thickness)));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("transient times must increase".into()));
        }
        if self.current.iter().chain(&self.times).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("transient contains non-finite values".into()));
        }
        Ok(())
    }

    /// Samples with t ≤ `until` seconds.
    pub fn truncated(&self, until: f64) -> Self {
        let n = self.times.partition_point(|&t| t <= until);
        Self {
            times: self.times[..n].to_vec(),
            current: self.current[..n].to_vec(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PermeationFit {
    /// Apparent diffusivity, m²/s.
    pub diffusivity: f64,
    /// Steady-state current density, A/m².
    pub j_inf: f64,
    /// Background current density, A/m².
    pub j0: f64,
    pub r_squared: f64,
    pub iterations: usize,
}

impl PermeationFit {
    pub fn model(&self, t: f64, thickness: f64) -> f64 {
        self.j0 + (self.j_inf - self.j0) * normalized_flux(self.diffusivity * t / (thickness * thickness))
    }
}

fn decile_mean(v: &[f64], last: bool) -> f64 {
    let k = (v.len() / 10).max(1);
    let s = if last { &v[v.len() - k..] } else { &v[..k] };
    s.iter().sum::<f64>() / k as f64
}

/// Robust noise level from the median absolute successive difference.
fn noise_level(v: &[f64]) -> f64 {
    let mut d: Vec<f64> = v.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    d.sort_by(f64::total_cmp);
    d[d.len() / 2] / (core::f64::consts::SQRT_2 * 0.6745)
}

/// Least-squares fit of the rise to `j0 + (j∞ − j0) F(D t / l²)` by
/// Levenberg–Marquardt over (ln D, j∞, j0).
pub fn fit_transient(data: &PermeationTransient) -> Result<PermeationFit> {
    data.validate()?;
    let n = data.times.len();
    if n < 20 {
        return Err(Error::Fit(format!("{n} samples; at least 20 are needed")));
    }
    let (t, j, l2) = (&data.times, &data.current, data.thickness * data.thickness);
    let j0 = decile_mean(j, false);
    let jinf = decile_mean(j, true);
    let noise = noise_level(j);
    if !(jinf - j0 > 5.0 * noise) || !(jinf > j0) {
        return Err(Error::Fit(format!(
            "no rise detected: plateau {jinf:e} vs baseline {j0:e} with noise {noise:e}"
        )));
    }
    // 63.2 % rise time seeds D
    let level = j0 + 0.632 * (jinf - j0);
    let t63 = t.iter().zip(j).find(|(_, &v)| v >= level).map(|(&x, _)| x).unwrap_or(t[n / 2]);
    let d_seed = tau_at_level(0.632) * l2 / t63.max(t[1].max(1e-9));

    let eval = |p: &[f64; 3], r: &mut Vec<f64>, jac: Option<&mut Vec<[f64; 3]>>| {
        let d = exp(p[0]);
        r.clear();
        let mut jac = jac;
        if let Some(jm) = jac.as_deref_mut() {
            jm.clear();
        }
        for i in 0..n {
            let tau = d * t[i] / l2;
            let f = normalized_flux(tau);
            r.push(p[2] + (p[1] - p[2]) * f - j[i]);
            if let Some(jm) = jac.as_deref_mut() {
                jm.push([(p[1] - p[2]) * normalized_flux_slope(tau) * tau, f, 1.0 - f]);
            }
        }
    };
    let sse = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();

    let mut p = [libm::log(d_seed), jinf, j0];
    let mut r = Vec::with_capacity(n);
    let mut jac = Vec::with_capacity(n);
    eval(&p, &mut r, Some(&mut jac));
    let mut cost = sse(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut it = 0;
    while it < 500 {
        it += 1;
        let mut a = [[0.0; 3]; 3];
        let mut g = [0.0; 3];
        for (ji, ri) in jac.iter().zip(&r) {
            for x in 0..3 {
                g[x] += ji[x] * ri;
                for y in 0..3 {
                    a[x][y] += ji[x] * ji[y];
                }
            }
        }
        let mut accepted = false;
        for _ in 0..30 {
            let mut m = a;
            for x in 0..3 {
                m[x][x] += lambda * a[x][x].max(1e-300);
            }
            let Some(step) = solve3(m, [-g[0], -g[1], -g[2]]) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
            let mut rt = Vec::with_capacity(n);
            eval(&trial, &mut rt, None);
            let c = sse(&rt);
            if c.is_finite() && c <= cost {
                let small = step[0].abs() < 1e-12
                    && step[1].abs() <= 1e-12 * trial[1].abs().max(1e-30)
                    && step[2].abs() <= 1e-12 * trial[1].abs().max(1e-30);
                let rel = (cost - c) <= 1e-15 * cost;
                p = trial;
                cost = c;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if small || rel {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // no downhill step left: at a minimum to working precision
            converged = true;
        }
        if converged {
            break;
        }
        eval(&p, &mut r, Some(&mut jac));
    }
    if !converged {
        return Err(Error::Fit(format!("Levenberg-Marquardt did not converge in {it} iterations (SSE {cost:e})")));
    }
    let mean = j.iter().sum::<f64>() / n as f64;
    let sst: f64 = j.iter().map(|v| (v - mean) * (v - mean)).sum();
    let r2 = if sst > 0.0 { (1.0 - cost / sst).clamp(0.0, 1.0) } else { 0.0 };
    let fit = PermeationFit {
        diffusivity: exp(p[0]),
        j_inf: p[1],
        j0: p[2],
        r_squared: r2,
        iterations: it,
    };
    if !(fit.j_inf > fit.j0) || !fit.diffusivity.is_finite() {
        return Err(Error::Fit(format!("degenerate fit {fit:?}")));
    }
    Ok(fit)
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if !(d.abs() > 0.0) || !d.is_finite() {
        return None;
    }
    let mut x = [0.0; 3];
    for (c, xc) in x.iter_mut().enumerate() {
        let mut mc = m;
        for r in 0..3 {
            mc[r][c] = b[r];
        }
        *xc = det(&mc) / d;
    }
    Some(x)
}

/// C0 = j∞ l / (F D) converted from mol/m³ to wt ppm.
pub fn subsurface_concentration(j_inf: f64, thickness: f64, diffusivity: f64) -> Result<f64> {
    if !(j_inf >= 0.0) || !(thickness > 0.0) || !(diffusivity > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sub-surface concentration needs j >= 0, l > 0, D > 0 (got {j_inf}, {thickness}, {diffusivity})"
        )));
    }
    let mol_per_m3 = j_inf * thickness / (FARADAY * diffusivity);
    Ok(mol_per_m3 * 1e-9 / PPM_TO_MOLAR)
}

fn sorted_anchors<T: Copy>(anchors: &[(f64, T)]) -> Result<Vec<(f64, T)>> {
    if anchors.len() < 2 {
        return Err(Error::InvalidParameter("at least two H2S anchors are required".into()));
    }
    if anchors.iter().any(|a| !(a.0 > 0.0)) {
        return Err(Error::InvalidParameter("H2S fractions must be positive".into()));
    }
    let mut a = anchors.to_vec();
    a.sort_by(|x, y| x.0.total_cmp(&y.0));
    if a.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidParameter("duplicate H2S anchor fraction".into()));
    }
    Ok(a)
}

/// Locates `fraction` among sorted anchors: (lower index, weight in log10).
fn log_weight(fraction: f64, fr: &[f64], allow_extrapolation: bool) -> Result<(usize, f64)> {
    let (lo, hi) = (fr[0], fr[fr.len() - 1]);
    if !(fraction > 0.0) || (!allow_extrapolation && !(fraction >= lo && fraction <= hi)) {
        return Err(Error::Range {
            what: "H2S fraction",
            value: fraction,
            lo,
            hi,
        });
    }
    let i = fr.partition_point(|&f| f <= fraction).clamp(1, fr.len() - 1) - 1;
    let w = (log10(fraction) - log10(fr[i])) / (log10(fr[i + 1]) - log10(fr[i]));
    Ok((i, w))
}

/// Sub-surface concentration at an H₂S fraction (%) by linear interpolation
/// against log10 of the fraction.
pub fn interpolate_h2s(fraction: f64, anchors: &[(f64, f64)], allow_extrapolation: bool) -> Result<f64> {
    let a = sorted_anchors(anchors)?;
    if let Some(hit) = a.iter().find(|x| x.0 == fraction) {
        return Ok(hit.1);
    }
    let fr: Vec<f64> = a.iter().map(|x| x.0).collect();
    let (i, w) = log_weight(fraction, &fr, allow_extrapolation)?;
    Ok(a[i].1 + (a[i + 1].1 - a[i].1) * w)
}

/// Pointwise log-fraction interpolation of whole schedules, evaluated at the
/// union of their knot times.
pub fn interpolate_schedules(
    fraction: f64,
    anchors: &[(f64, &EnvSchedule)],
    allow_extrapolation: bool,
) -> Result<EnvSchedule> {
    let a = sorted_anchors(anchors)?;
    let fr: Vec<f64> = a.iter().map(|x| x.0).collect();
    let (i, w) = log_weight(fraction, &fr, allow_extrapolation)?;
    let (s0, s1) = (a[i].1, a[i + 1].1);
    let mut times: Vec<f64> = s0.knots().iter().chain(s1.knots()).map(|k| k.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let knots = times
        .into_iter()
        .map(|t| {
            let (c0, c1) = (s0.eval(t), s1.eval(t));
            (t, (c0 + (c1 - c0) * w).max(0.0))
        })
        .collect();
    EnvSchedule::new(knots)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleOptions {
    /// Diffusivity used in C0 = (j − j0) l / (F D), m²/s.
    pub diffusivity: f64,
    pub max_knots: usize,
    /// Simulation horizon, hours; shorter transients are held at their last value.
    pub horizon: f64,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        Self {
            diffusivity: 1.4e-10,
            max_knots: 50,
            horizon: 720.0,
        }
    }
}

/// Piecewise-linear environment schedule from a measured transient, each
/// sample treated as a new steady state.
pub fn build_env_schedule(data: &PermeationTransient, fit: &PermeationFit, opts: &ScheduleOptions) -> Result<EnvSchedule> {
    data.validate()?;
    if data.times.is_empty() {
        return Err(Error::InvalidParameter("empty transient".into()));
    }
    let pts: Vec<(f64, f64)> = data
        .times
        .iter()
        .zip(&data.current)
        .map(|(&t, &j)| {
            let c = subsurface_concentration((j - fit.j0).max(0.0), data.thickness, opts.diffusivity);
            c.map(|c| (t / 3600.0, c))
        })
        .collect::<Result<_>>()?;
    let last = pts[pts.len() - 1].0;
    if last < opts.horizon {
        log::warn!(
            "transient '{}' ends at {last:.1} h, before the {:.1} h horizon; schedule held constant beyond",
            data.label,
            opts.horizon
        );
    }
    EnvSchedule::new(downsample(&pts, opts.max_knots.max(2)))
}

/// Greedy knot insertion: repeatedly adds the sample with the largest
/// interpolation error until the error is below 0.5 % of the peak or the
/// knot budget is spent.
pub fn downsample(pts: &[(f64, f64)], max_knots: usize) -> Vec<(f64, f64)> {
    if pts.len() <= max_knots {
        return pts.to_vec();
    }
    let peak = pts.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let mut keep = vec![false; pts.len()];
    keep[0] = true;
    keep[pts.len() - 1] = true;
    let mut count = 2;
    while count < max_knots {
        let mut worst = (0.0, 0);
        let mut a = 0;
        for b in 1..pts.len() {
            if !keep[b] {
                continue;
            }
            let ((t0, c0), (t1, c1)) = (pts[a], pts[b]);
            for (k, &(t, c)) in pts.iter().enumerate().take(b).skip(a + 1) {
                let e = (c0 + (c1 - c0) * (t - t0) / (t1 - t0) - c).abs();
                if e > worst.0 {
                    worst = (e, k);
                }
            }
            a = b;
        }
        if worst.0 <= 0.005 * peak {
            break;
        }
        keep[worst.1] = true;
        count += 1;
    }
    pts.iter().zip(&keep).filter(|(_, &k)| k).map(|(p, _)| *p).collect()
}
