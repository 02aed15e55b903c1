//! Local phase δ(k,r) and amplitude A(k,r).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, StepControl};
use crate::potentials::{OriginClass, Potential};
use crate::quad;
use crate::radial::{self, Channel, NormConvention, RadialSolution, SolverConfig, StartData, TailPlan};
use crate::specfun::riccati_pair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseMethod {
    Ode,
    IntegralOfSolution,
    Picard,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseProfile {
    pub channel: Channel,
    pub grid: Vec<f64>,
    /// continuous local phase, never reduced mod π
    pub delta: Vec<f64>,
    /// δ(k, r_max) plus the tail correction
    pub total: f64,
    pub amplitude: Option<Vec<f64>>,
    /// A(k,∞) when the amplitude has settled by r_max
    pub amplitude_inf: Option<f64>,
    pub method: PhaseMethod,
    pub tail_correction: f64,
    pub err_integration: f64,
    pub err_tail: f64,
    pub err_start: f64,
}

impl PhaseProfile {
    pub fn r_max(&self) -> f64 {
        self.grid.last().copied().unwrap_or(0.0)
    }

    /// Linear interpolation of δ(k,r) on the grid.
    pub fn delta_at(&self, r: f64) -> f64 {
        let g = &self.grid;
        if g.is_empty() {
            return 0.0;
        }
        if r <= g[0] {
            return self.delta[0];
        }
        let i = g.partition_point(|&x| x < r);
        if i >= g.len() {
            return *self.delta.last().unwrap();
        }
        let t = (r - g[i - 1]) / (g[i] - g[i - 1]);
        self.delta[i - 1] + t * (self.delta[i] - self.delta[i - 1])
    }

    /// CSV with header `r,delta,amplitude`; the amplitude column is empty when absent.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,delta,amplitude\n");
        for i in 0..self.grid.len() {
            let a = match &self.amplitude {
                Some(a) => format!("{:.16e}", a[i]),
                None => String::new(),
            };
            let _ = writeln!(out, "{:.16e},{:.16e},{}", self.grid[i], self.delta[i], a);
        }
        out
    }
}

/// u, du/dr, v, dv/dr at radius r.
pub(crate) fn free_waves(ell: f64, k: f64, r: f64) -> Result<(f64, f64, f64, f64)> {
    let p = riccati_pair(ell, k * r)?;
    Ok((p.u, k * p.du, p.v, k * p.dv))
}

/// s = u′φ − uφ′ and c = vφ′ − v′φ (r-derivatives), so that
/// φ = A(u cos δ + v sin δ) with kA·(sin δ, cos δ) = (s, c).
pub(crate) fn sin_cos_parts(ell: f64, k: f64, r: f64, phi: f64, dphi: f64) -> Result<(f64, f64)> {
    let (u, du, v, dv) = free_waves(ell, k, r)?;
    Ok((du * phi - u * dphi, v * dphi - dv * phi))
}

/// Local phase at the start radius and a first-order estimate of its error.
pub(crate) fn start_phase(ch: &Channel, start: &StartData) -> Result<(f64, f64)> {
    let phase = |dphi: f64| -> Result<f64> {
        let (s, c) = sin_cos_parts(ch.ell, ch.k, start.r0, start.phi, dphi)?;
        // v overflows faster than u underflows; the phase is then zero to working precision
        if !c.is_finite() {
            return Ok(0.0);
        }
        Ok(s.atan2(c))
    };
    let d0 = phase(start.dphi)?;
    let rel = start.start_error.max(f64::EPSILON);
    let d1 = phase(start.dphi * (1.0 + rel))?;
    Ok((d0, (d1 - d0).abs()))
}

/// The start data for `v` in this channel, as used by `radial::solve`.
pub(crate) fn start_for(v: &Potential, ch: &Channel, cfg: &SolverConfig) -> Result<StartData> {
    match v.origin_class() {
        OriginClass::PowerSingular { .. } => radial::wkb_start(v, ch, cfg),
        _ => radial::series_start(v, ch, cfg),
    }
}

/// Bound on the change of ln A beyond r_max.
fn amplitude_drift(v: &Potential, ch: &Channel, r_max: f64) -> Result<f64> {
    let tail = v.tail_abs_integral(r_max)?;
    let (u, _, w, _) = free_waves(ch.ell, ch.k, r_max)?;
    Ok(tail / ch.k * (u * u + w * w).max(1.0))
}

fn amplitude_limit(v: &Potential, ch: &Channel, r_max: f64, a_last: f64) -> Result<Option<f64>> {
    let drift = amplitude_drift(v, ch, r_max)?;
    Ok(if drift <= 1e-6 { Some(a_last) } else { None })
}

/// Variable-phase equation δ′ = −(1/k)V(u cos δ + v sin δ)², carried together with
/// (ln A)′ = (1/k)V(u cos δ + v sin δ)(v cos δ − u sin δ).
fn phase_sweep(
    v: &Potential,
    ch: &Channel,
    cfg: &SolverConfig,
    r_start: f64,
    y0: [f64; 2],
    r_end: f64,
    cutoff: f64,
) -> Result<ode::Trajectory<2>> {
    let k = ch.k;
    let ell = ch.ell;
    let rhs = |r: f64, y: &[f64; 2]| -> [f64; 2] {
        if r < cutoff {
            return [0.0, 0.0];
        }
        let vr = v.value(r);
        let (u, w) = match riccati_pair(ell, k * r) {
            Ok(p) => (p.u, p.v),
            Err(_) => (f64::NAN, f64::NAN),
        };
        let (s, c) = y[0].sin_cos();
        let a = u * c + w * s;
        let b = w * c - u * s;
        [-vr * a * a / k, vr * a * b / k]
    };
    let mut breaks = v.breakpoints();
    if cutoff > 0.0 {
        breaks.push(cutoff);
    }
    let ctl = StepControl {
        h_init: (0.1 * r_start).max(1e-6 / k.max(1.0)),
        h_max: if k > 0.0 { 1.0 / k } else { f64::INFINITY },
        max_steps: cfg.max_steps,
        ..Default::default()
    };
    ode::integrate(rhs, ode::componentwise(cfg.rtol, [cfg.atol, cfg.atol]), r_start, y0, r_end, &breaks, ctl)
}

fn profile_from_sweep(
    ch: &Channel,
    traj: &ode::Trajectory<2>,
    tail: &TailPlan,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, f64, f64)> {
    let grid = traj.knots();
    let mut delta = Vec::with_capacity(grid.len());
    let mut amp = Vec::with_capacity(grid.len());
    if let Some(s) = traj.segments.first() {
        let y = s.start();
        delta.push(y[0]);
        amp.push(y[1].exp());
    }
    for s in &traj.segments {
        let y = s.end();
        delta.push(y[0]);
        amp.push(y[1].exp());
    }
    let last = *delta.last().unwrap_or(&0.0);
    let (corr, err) = tail.correction(ch, last)?;
    Ok((grid, delta, amp, corr, err))
}

/// Integrates the variable-phase equation from the regularized start to r_max.
pub fn solve_phase_ode(v: &Potential, ch: &Channel, cfg: &SolverConfig) -> Result<PhaseProfile> {
    if !(ch.k > 0.0) {
        return Err(Error::Domain("the phase equation needs k > 0".into()));
    }
    let start = start_for(v, ch, cfg)?;
    let (d0, err_start) = start_phase(ch, &start)?;
    let (s, c) = sin_cos_parts(ch.ell, ch.k, start.r0, start.phi, start.dphi)?;
    let ln_a0 = if c.is_finite() {
        (s.hypot(c) / ch.k).ln() + start.ln_norm
    } else {
        f64::INFINITY
    };
    let tail = radial::tail_plan(v, ch.k, 2.0 * start.r0, cfg)?;
    let traj = phase_sweep(v, ch, cfg, start.r0, [d0, if ln_a0.is_finite() { ln_a0 } else { 0.0 }], tail.r_max, 0.0)?;
    let (grid, delta, amp, corr, err_tail) = profile_from_sweep(ch, &traj, &tail)?;
    let total = delta.last().unwrap() + corr;
    let amplitude_inf = if ln_a0.is_finite() {
        amplitude_limit(v, ch, tail.r_max, *amp.last().unwrap())?
    } else {
        None
    };
    Ok(PhaseProfile {
        channel: *ch,
        grid,
        delta,
        total,
        amplitude: ln_a0.is_finite().then_some(amp),
        amplitude_inf,
        method: PhaseMethod::Ode,
        tail_correction: corr,
        err_integration: cfg.rtol * (1.0 + total.abs()) + cfg.atol * traj.segments.len() as f64,
        err_tail,
        err_start,
    })
}

/// Result of the cutoff regularization θ(r − ε) with ε halved to convergence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutoffEstimate {
    pub total: f64,
    /// smallest ε used
    pub eps: f64,
    /// |extrapolated − last| as the uncertainty of the ε → 0 limit
    pub richardson_residual: f64,
    pub sequence: Vec<(f64, f64)>,
    pub converged: bool,
}

/// Phase equation for the cut potential V·θ(r − ε), δ(ε) = 0, with ε halved until
/// successive totals agree to 1e−7, then one Richardson step.
pub fn solve_phase_ode_cutoff(v: &Potential, ch: &Channel, cfg: &SolverConfig, eps0: f64) -> Result<CutoffEstimate> {
    if !(ch.k > 0.0) || !(eps0 > 0.0) {
        return Err(Error::Domain("cutoff phase needs k > 0 and ε > 0".into()));
    }
    let tail = radial::tail_plan(v, ch.k, 2.0 * eps0, cfg)?;
    let mut seq: Vec<(f64, f64)> = Vec::new();
    let mut eps = eps0;
    let mut converged = false;
    for _ in 0..40 {
        let traj = match phase_sweep(v, ch, cfg, eps, [0.0, 0.0], tail.r_max, eps) {
            Ok(t) => t,
            Err(e @ (Error::StepCollapse { .. } | Error::TooManySteps(_))) => {
                if seq.len() < 2 {
                    return Err(e);
                }
                log::warn!("cutoff sequence stopped at ε = {eps:e}: {e}");
                break;
            }
            Err(e) => return Err(e),
        };
        let last = traj.final_state()[0];
        let (corr, _) = tail.correction(ch, last)?;
        seq.push((eps, last + corr));
        let n = seq.len();
        if n >= 2 && (seq[n - 1].1 - seq[n - 2].1).abs() < 1e-7 {
            converged = true;
            break;
        }
        eps *= 0.5;
    }
    let n = seq.len();
    let d3 = seq[n - 1].1;
    let extrapolated = if n >= 3 {
        let (d1, d2) = (seq[n - 3].1, seq[n - 2].1);
        let rho = (d2 - d1) / (d3 - d2);
        if rho.is_finite() && rho > 1.05 {
            d3 + (d3 - d2) / (rho - 1.0)
        } else {
            d3
        }
    } else if n == 2 {
        2.0 * d3 - seq[0].1
    } else {
        d3
    };
    Ok(CutoffEstimate {
        total: extrapolated,
        eps: seq[n - 1].0,
        richardson_residual: (extrapolated - d3).abs(),
        sequence: seq,
        converged,
    })
}

/// Phase integrated over the solution: δ(r₀) from the start data, then
/// −k∫Vφ²/(s² + c²) by Gauss–Kronrod on each step of the dense output.
pub(crate) struct PhaseIntegral {
    pub grid: Vec<f64>,
    pub delta: Vec<f64>,
    pub err_quadrature: f64,
    pub err_start: f64,
}

pub(crate) fn integrate_phase(v: &Potential, sol: &RadialSolution, abs_tol: f64) -> Result<PhaseIntegral> {
    let ch = sol.channel;
    let k = ch.k;
    if !(k > 0.0) {
        return Err(Error::Domain("the local phase needs k > 0".into()));
    }
    let sign = sol.factor.signum();
    let (d0, err_start) = start_phase(&ch, &sol.start)?;
    let segs = &sol.traj.segments;
    let per_seg = (abs_tol / segs.len().max(1) as f64).max(1e-16);
    let mut grid = Vec::with_capacity(segs.len() + 1);
    let mut delta = Vec::with_capacity(segs.len() + 1);
    grid.push(sol.start.r0);
    delta.push(d0);
    let mut acc = d0;
    let mut err = 0.0;
    let mut bad: Option<f64> = None;
    for seg in segs {
        let mut f = |r: f64| {
            let y = seg.eval(r);
            let (p, dp) = (sign * y[0], sign * y[1]);
            let (s, c) = match sin_cos_parts(ch.ell, k, r, p, dp) {
                Ok(x) => x,
                Err(_) => return f64::NAN,
            };
            let den = s * s + c * c;
            if !den.is_finite() {
                return 0.0;
            }
            if den < 1e-300 {
                bad.get_or_insert(r);
            }
            -k * v.value(r) * p * p / den
        };
        let q = quad::adaptive(&mut f, seg.t0, seg.t1(), per_seg, 1e-13, 64);
        if !q.value.is_finite() {
            return Err(Error::Quadrature(format!("non-finite phase integrand near r = {}", seg.t0)));
        }
        acc += q.value;
        err += q.error;
        grid.push(seg.t1());
        delta.push(acc);
    }
    if let Some(r) = bad {
        return Err(Error::Invalid(format!("amplitude denominator vanished at r = {r}")));
    }
    Ok(PhaseIntegral { grid, delta, err_quadrature: err, err_start })
}

/// δ(k,r) on the solution grid by quadrature, with amplitude samples.
pub fn local_phase_from_solution(v: &Potential, sol: &RadialSolution) -> Result<PhaseProfile> {
    let pi = integrate_phase(v, sol, 1e-9)?;
    let last = *pi.delta.last().unwrap();
    let (corr, err_tail) = sol.tail.correction(&sol.channel, last)?;
    let amp = amplitude_from_solution(v, sol)?;
    Ok(PhaseProfile {
        channel: sol.channel,
        grid: pi.grid,
        delta: pi.delta,
        total: last + corr,
        amplitude: Some(amp.values),
        amplitude_inf: amp.inf,
        method: PhaseMethod::IntegralOfSolution,
        tail_correction: corr,
        err_integration: pi.err_quadrature,
        err_tail,
        err_start: pi.err_start,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AmplitudeProfile {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// A(k,∞) if the amplitude has settled within r_max
    pub inf: Option<f64>,
    /// bound on the relative change of A beyond r_max
    pub drift: f64,
}

/// A² = [(uφ′ − u′φ)² + (vφ′ − v′φ)²]/k² on the solution grid.
pub fn amplitude_from_solution(v: &Potential, sol: &RadialSolution) -> Result<AmplitudeProfile> {
    let ch = sol.channel;
    if !(ch.k > 0.0) {
        return Err(Error::Domain("the amplitude needs k > 0".into()));
    }
    let mut values = Vec::with_capacity(sol.grid.len());
    for i in 0..sol.grid.len() {
        let r = sol.grid[i];
        let (s, c) = sin_cos_parts(ch.ell, ch.k, r, sol.phi[i], sol.dphi[i])?;
        let ln_a = (s.hypot(c) / ch.k).ln() + sol.log_scale[i] + sol.factor.abs().ln();
        values.push(ln_a.exp());
    }
    let drift = amplitude_drift(v, &ch, sol.r_max)?;
    let inf = if drift <= 1e-6 { values.last().copied() } else { None };
    Ok(AmplitudeProfile { grid: sol.grid.clone(), values, inf, drift })
}

/// Amplitude and the k^{ℓ+1} scale for the Jost modulus; the order is the
/// effective one when an inverse-square term shifts it.
pub(crate) fn jost_order(sol: &RadialSolution) -> Result<f64> {
    match sol.norm_convention {
        NormConvention::BesselNormalized => Ok(sol.channel.ell),
        NormConvention::UnitSlope if sol.channel.k > 0.0 => Ok(sol.start.effective_order),
        _ => Err(Error::Normalization(format!(
            "no Jost normalization for a {:?} solution",
            sol.norm_convention
        ))),
    }
}
