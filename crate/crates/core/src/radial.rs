//! Regular solution φ_ℓ(k,r) of the radial equation.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, StepControl, Trajectory};
use crate::potentials::{OriginClass, Potential};
use crate::quad;
use crate::specfun::{self, riccati_pair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub k: f64,
    pub ell: f64,
}

impl Channel {
    pub fn new(k: f64, ell: f64) -> Result<Self> {
        if !(k >= 0.0) || !k.is_finite() {
            return Err(Error::Domain(format!("wave number must be ≥ 0, got {k}")));
        }
        if !(ell >= -0.5) || !ell.is_finite() {
            return Err(Error::OrderOutOfRange(ell));
        }
        Ok(Self { k, ell })
    }

    pub fn centrifugal(&self) -> f64 {
        self.ell * (self.ell + 1.0)
    }
}

/// How the start data fix the overall factor of φ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormConvention {
    /// unit coefficient on r^{L+1}/(2L+1)!! for an effective order L ≠ ℓ (k = 0 included)
    UnitSlope,
    /// φ ≈ r^{ℓ+1}/(2ℓ+1)!!, equivalently u_ℓ(kr)/k^{ℓ+1} near the origin
    BesselNormalized,
    /// φ ≈ r^{m/4} exp(−2√g/(m−2)·r^{−(m−2)/2})
    WkbStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rtol: f64,
    pub atol: f64,
    /// bound on the neglected tail phase
    pub tail_tol: f64,
    pub r_max_cap: f64,
    /// local error allowed in the series start
    pub start_tol: f64,
    pub max_steps: usize,
    /// absolute tolerance for quadratures over the solution
    pub quad_tol: f64,
    /// WKB validity parameter at the singular start
    pub wkb_eta: f64,
    /// start the singular solution where V exceeds this multiple of k²
    pub singular_ratio: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            tail_tol: 1e-9,
            r_max_cap: 1e4,
            start_tol: 1e-12,
            max_steps: 5_000_000,
            quad_tol: 1e-9,
            wkb_eta: 1e-2,
            singular_ratio: 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StartKind {
    Series,
    Wkb,
}

/// Start radius and data. φ(r₀) = sign·phi·e^{ln_norm}, likewise φ′.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartData {
    pub kind: StartKind,
    pub r0: f64,
    pub phi: f64,
    pub dphi: f64,
    pub ln_norm: f64,
    /// estimated relative error of the start values
    pub start_error: f64,
    /// outward shift applied to keep the WKB exponent above −700 (0 if none)
    pub shift: f64,
    /// L with L(L+1) = ℓ(ℓ+1) + λ
    pub effective_order: f64,
    /// r₀ before any halving or shift
    pub r0_initial: f64,
}

/// Where the outward sweep stops and what lies beyond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailPlan {
    pub r_max: f64,
    /// bound on the phase (or k = 0 moment) neglected beyond r_max
    pub bound: f64,
    /// λ of a λ/r² tail, matched exactly to free waves of the effective order
    pub inverse_square: f64,
    /// other power tails c·r^{−p} handled to first order when r_max is capped
    pub power_terms: Vec<(f64, f64)>,
    pub capped: bool,
}

#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub channel: Channel,
    pub norm_convention: NormConvention,
    pub start: StartData,
    pub tail: TailPlan,
    pub r_max: f64,
    pub traj: Trajectory<2>,
    /// step endpoints
    pub grid: Vec<f64>,
    /// φ at the grid in the scaled representation
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    /// natural-log factor for each grid sample (true φ = phi·e^{log_scale})
    pub log_scale: Vec<f64>,
    /// true-scale multiplier applied on top of the integration
    pub factor: f64,
}

/// Effective order L ≥ −1/2 of the combined centrifugal and λ/r² terms.
pub fn effective_order(v: &Potential, ell: f64) -> Result<f64> {
    let lam = v.inverse_square_strength();
    let disc = (ell + 0.5).powi(2) + lam;
    if disc < 0.0 {
        return Err(Error::Domain(format!(
            "λ/r² with λ = {lam} falls below the ℓ = {ell} threshold; no real effective order"
        )));
    }
    Ok(-0.5 + disc.sqrt())
}

/// ∫₀^r f(t) dt with t = r·e^{−x}, which tames integrable power singularities at 0.
pub(crate) fn integrate_from_origin<F: FnMut(f64) -> f64>(mut f: F, r: f64) -> f64 {
    let mut g = |x: f64| {
        let t = r * (-x).exp();
        f(t) * t
    };
    let mut total = 0.0;
    let mut a = 0.0;
    for &b in &[2.0, 6.0, 15.0, 40.0, 120.0] {
        total += quad::adaptive(&mut g, a, b, 0.0, 1e-13, 200).value;
        a = b;
    }
    total
}

/// Leading power plus one Volterra correction for the regular solution.
/// Returns (φ, φ′, relative size of the correction).
fn series_values(v: &Potential, ch: &Channel, l_eff: f64, r: f64) -> Result<(f64, f64, f64)> {
    let df = specfun::double_factorial_odd(l_eff)?;
    let k2 = ch.k * ch.k;
    let phi0 = |t: f64| t.powf(l_eff + 1.0) / df;
    let w = |t: f64| v.value_rest(t) - k2;
    let p0 = phi0(r);
    let dp0 = (l_eff + 1.0) * r.powf(l_eff) / df;
    let (p1, dp1);
    if (2.0 * l_eff + 1.0).abs() < 1e-12 {
        let a = integrate_from_origin(|t| t.sqrt() * w(t) * phi0(t), r);
        let b = integrate_from_origin(|t| t.sqrt() * t.ln() * w(t) * phi0(t), r);
        let sr = r.sqrt();
        p1 = sr * (r.ln() * a - b);
        dp1 = (r.ln() * a - b) / (2.0 * sr) + a / sr;
    } else {
        let a = integrate_from_origin(|t| t.powf(-l_eff) * w(t) * phi0(t), r);
        let b = integrate_from_origin(|t| t.powf(l_eff + 1.0) * w(t) * phi0(t), r);
        let n = 2.0 * l_eff + 1.0;
        p1 = (r.powf(l_eff + 1.0) * a - r.powf(-l_eff) * b) / n;
        dp1 = ((l_eff + 1.0) * r.powf(l_eff) * a + l_eff * r.powf(-l_eff - 1.0) * b) / n;
    }
    let eps = (p1 / p0).abs().max((dp1 / dp0).abs());
    Ok((p0 + p1, dp0 + dp1, eps))
}

/// Series start at r₀ = min(1e−4, 1e−3/k), halved until the dropped
/// second-order term is below `cfg.start_tol`.
pub fn series_start(v: &Potential, ch: &Channel, cfg: &SolverConfig) -> Result<StartData> {
    let l_eff = effective_order(v, ch.ell)?;
    let r_init = if ch.k > 0.0 { 1e-4f64.min(1e-3 / ch.k) } else { 1e-4 };
    let mut r0 = r_init;
    if let Some(&b) = v.breakpoints().first() {
        if b > 0.0 && r0 >= b {
            r0 = 0.5 * b;
        }
    }
    let floor = 1e-60;
    loop {
        let (p, dp, eps) = series_values(v, ch, l_eff, r0)?;
        let err = eps * eps;
        if err <= cfg.start_tol || r0 * 0.5 < floor {
            let scale = p.abs();
            return Ok(StartData {
                kind: StartKind::Series,
                r0,
                phi: p / scale,
                dphi: dp / scale,
                ln_norm: scale.ln(),
                start_error: err,
                shift: 0.0,
                effective_order: l_eff,
                r0_initial: r_init,
            });
        }
        r0 *= 0.5;
    }
}

/// WKB start for g/r^m cores.
pub fn wkb_start(v: &Potential, ch: &Channel, cfg: &SolverConfig) -> Result<StartData> {
    let (g, m) = match v.origin_class() {
        OriginClass::PowerSingular { g, m } => (g, m),
        other => return Err(Error::UnsupportedOrigin(format!("WKB start needs a power singularity, got {other:?}"))),
    };
    let eta = cfg.wkb_eta;
    // |d(1/√V)/dr| = (m/2)r^{m/2−1}/√g ≤ η
    let r_eta = (2.0 * eta * g.sqrt() / m).powf(1.0 / (0.5 * m - 1.0));
    let mut r0 = if ch.k > 0.0 {
        let r_v = (g / (cfg.singular_ratio * ch.k * ch.k)).powf(1.0 / m);
        r_eta.min(r_v)
    } else {
        r_eta
    };
    let r_init = r0;
    let c = 2.0 * g.sqrt() / (m - 2.0);
    let expo = |r: f64| -c * r.powf(-(0.5 * m - 1.0));
    let mut shift = 0.0;
    if expo(r0) < -700.0 {
        let r_new = (c / 700.0).powf(1.0 / (0.5 * m - 1.0));
        shift = r_new - r0;
        r0 = r_new;
    }
    let y = m / (4.0 * r0) + g.sqrt() * r0.powf(-0.5 * m);
    let eta_here = 0.5 * m * r0.powf(0.5 * m - 1.0) / g.sqrt();
    Ok(StartData {
        kind: StartKind::Wkb,
        r0,
        phi: 1.0,
        dphi: y,
        ln_norm: expo(r0) + 0.25 * m * r0.ln(),
        start_error: eta_here * eta_here,
        shift,
        effective_order: f64::NAN,
        r0_initial: r_init,
    })
}

/// First radius beyond which the neglected tail is below tolerance.
pub fn tail_plan(v: &Potential, k: f64, r_lo: f64, cfg: &SolverConfig) -> Result<TailPlan> {
    let lam = v.inverse_square_strength();
    if let Some(end) = v.support_end() {
        return Ok(TailPlan {
            r_max: end.max(r_lo),
            bound: 0.0,
            inverse_square: 0.0,
            power_terms: vec![],
            capped: false,
        });
    }
    let power_terms: Vec<(f64, f64)> = v.power_tail().into_iter().filter(|&(_, p)| p != 2.0).collect();
    let cap = cfg.r_max_cap.max(r_lo);
    // λ/r² is matched exactly, so only the rest counts at k > 0
    let measure = |r: f64| -> Result<f64> {
        if k > 0.0 && lam != 0.0 {
            Ok(rest_tail_abs(v, r)? / k)
        } else if k > 0.0 {
            Ok(v.tail_abs_integral(r)? / k)
        } else {
            let m = v.integrate_abs(|t| t * t, r, f64::INFINITY, 1e-8);
            Ok(m.value().unwrap_or(f64::INFINITY))
        }
    };
    let tol = cfg.tail_tol;
    let mut lo = r_lo.max(1e-3);
    if k > 0.0 && lam != 0.0 {
        // the match keeps only δ mod π, so stop where the λ/r² tail moves δ by well under π/2
        lo = lo.max((10.0 * (1.0 + lam.abs()) / k).min(cap));
    }
    let (r_max, full, capped) = if measure(lo)? < tol {
        (lo, measure(lo)?, false)
    } else if measure(cap)? >= tol {
        (cap, measure(cap)?, true)
    } else {
        let (mut a, mut b) = (lo.ln(), cap.ln());
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if measure(mid.exp())? < tol {
                b = mid;
            } else {
                a = mid;
            }
            if b - a < 1e-4 {
                break;
            }
        }
        (b.exp(), measure(b.exp())?, false)
    };
    // what remains unaccounted once λ/r² is matched exactly and other
    // power tails are corrected to first order
    let bound = if k > 0.0 && capped {
        let mut b = rest_tail_abs(v, r_max)? / k;
        for &(c, p) in &power_terms {
            b -= c.abs() * r_max.powf(1.0 - p) / (p - 1.0) / k;
        }
        b.max(0.0)
    } else {
        full
    };
    Ok(TailPlan {
        r_max,
        bound,
        inverse_square: if k > 0.0 { lam } else { 0.0 },
        power_terms: if capped && k > 0.0 { power_terms } else { vec![] },
        capped,
    })
}

/// ∫_R^∞ |V − λ/r²| (a bound via the triangle inequality for sums).
fn rest_tail_abs(v: &Potential, r: f64) -> Result<f64> {
    use crate::potentials::Family;
    match &v.family {
        Family::InverseSquare { .. } => Ok(0.0),
        Family::Composite { strength, decay, .. } => Ok(strength.abs() * decay * (-r / decay).exp()),
        Family::Sum(parts) => {
            let mut s = 0.0;
            for p in parts {
                s += rest_tail_abs(p, r)?;
            }
            Ok(s)
        }
        _ => v.tail_abs_integral(r),
    }
}

impl TailPlan {
    /// Phase accumulated beyond r_max given the local phase there.
    /// Returns (correction, error estimate).
    pub fn correction(&self, ch: &Channel, delta_r: f64) -> Result<(f64, f64)> {
        let k = ch.k;
        let r = self.r_max;
        let mut corr = 0.0;
        let mut err = self.bound;
        if self.inverse_square != 0.0 && k > 0.0 {
            let lo = -0.5 + ((ch.ell + 0.5).powi(2) + self.inverse_square).max(0.0).sqrt();
            let z = k * r;
            let a = riccati_pair(ch.ell, z)?;
            let (s, c) = delta_r.sin_cos();
            let phi = a.u * c + a.v * s;
            let dphi = k * (a.du * c + a.dv * s);
            let b = riccati_pair(lo, z)?;
            let sl = k * b.du * phi - b.u * dphi;
            let cl = b.v * dphi - k * b.dv * phi;
            let d_inf = sl.atan2(cl) + (ch.ell - lo) * 0.5 * PI;
            let mut t = (d_inf - delta_r).rem_euclid(PI);
            if t > 0.5 * PI {
                t -= PI;
            }
            corr += t;
        }
        for &(c, p) in &self.power_terms {
            let first = -(c / (2.0 * k)) * r.powf(1.0 - p) / (p - 1.0);
            corr += first;
            err += c.abs() * r.powf(-p) / (2.0 * k * k) + first * first;
        }
        Ok((corr, err))
    }
}

fn energy_scale(q: f64, k: f64, r: f64) -> f64 {
    (q.abs() + k * k + 1.0 / (r * r)).sqrt()
}

fn integrate_radial(
    v: &Potential,
    ch: &Channel,
    start: &StartData,
    r_max: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory<2>> {
    let k = ch.k;
    let cl = ch.centrifugal();
    let q = |r: f64| cl / (r * r) + v.value(r) - k * k;
    let rtol = cfg.rtol;
    let atol = cfg.atol;
    let scale = move |a: &[f64; 2], b: &[f64; 2], r: f64| {
        let kap = energy_scale(q(r), k, r);
        let m = (a[0].abs() * kap).max(a[1].abs()).max(b[0].abs() * kap).max(b[1].abs());
        [atol / kap + rtol * m / kap, atol + rtol * m]
    };
    let kap0 = energy_scale(q(start.r0), k, start.r0);
    let ctl = StepControl {
        h_init: (0.05 / kap0).min(0.1 * start.r0.max(1e-300) + 0.05 / kap0),
        h_max: if k > 0.0 { 1.0 / k } else { f64::INFINITY },
        max_steps: cfg.max_steps,
        renormalize_above: Some(1e8),
        ..Default::default()
    };
    ode::integrate(
        |r, y: &[f64; 2]| [y[1], q(r) * y[0]],
        scale,
        start.r0,
        [start.phi, start.dphi],
        r_max,
        &v.breakpoints(),
        ctl,
    )
}

fn assemble(
    ch: Channel,
    norm_convention: NormConvention,
    start: StartData,
    tail: TailPlan,
    traj: Trajectory<2>,
) -> RadialSolution {
    let mut grid = Vec::with_capacity(traj.segments.len() + 1);
    let mut phi = Vec::with_capacity(grid.capacity());
    let mut dphi = Vec::with_capacity(grid.capacity());
    let mut log_scale = Vec::with_capacity(grid.capacity());
    if let Some(s) = traj.segments.first() {
        let y = s.start();
        grid.push(s.t0);
        phi.push(y[0]);
        dphi.push(y[1]);
        log_scale.push(s.log_scale + start.ln_norm);
    }
    for s in &traj.segments {
        let y = s.end();
        grid.push(s.t1());
        phi.push(y[0]);
        dphi.push(y[1]);
        log_scale.push(s.log_scale + start.ln_norm);
    }
    RadialSolution {
        channel: ch,
        norm_convention,
        r_max: tail.r_max,
        start,
        tail,
        traj,
        grid,
        phi,
        dphi,
        log_scale,
        factor: 1.0,
    }
}

/// Regular solution for potentials with an L¹, BJK or inverse-square origin.
pub fn solve_regular(v: &Potential, ch: &Channel, cfg: &SolverConfig) -> Result<RadialSolution> {
    if let OriginClass::PowerSingular { .. } = v.origin_class() {
        return Err(Error::UnsupportedOrigin(format!(
            "{} has a power singularity at the origin; use solve_singular",
            v.label
        )));
    }
    let start = series_start(v, ch, cfg)?;
    let l_eff = start.effective_order;
    let same_order = (l_eff - ch.ell).abs() < 1e-14;
    let norm = if same_order && (ch.k > 0.0 || ch.ell != 0.0) {
        NormConvention::BesselNormalized
    } else {
        NormConvention::UnitSlope
    };
    let tail = tail_plan(v, ch.k, 2.0 * start.r0, cfg)?;
    let traj = integrate_radial(v, ch, &start, tail.r_max, cfg)?;
    Ok(assemble(*ch, norm, start, tail, traj))
}

/// Solution for g/r^m cores, started from the WKB form deep inside the core.
pub fn solve_singular(v: &Potential, ch: &Channel, cfg: &SolverConfig) -> Result<RadialSolution> {
    let start = wkb_start(v, ch, cfg)?;
    let tail = tail_plan(v, ch.k, 2.0 * start.r0, cfg)?;
    let traj = integrate_radial(v, ch, &start, tail.r_max, cfg)?;
    Ok(assemble(*ch, NormConvention::WkbStart, start, tail, traj))
}

/// Dispatches on the origin class.
pub fn solve(v: &Potential, ch: &Channel, cfg: &SolverConfig) -> Result<RadialSolution> {
    match v.origin_class() {
        OriginClass::PowerSingular { .. } => solve_singular(v, ch, cfg),
        _ => solve_regular(v, ch, cfg),
    }
}

/// A number stored as value·e^{ln_scale}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaled {
    pub value: f64,
    pub ln_scale: f64,
}

impl Scaled {
    pub fn get(&self) -> f64 {
        self.value * self.ln_scale.exp()
    }

    pub fn ln_abs(&self) -> f64 {
        self.value.abs().ln() + self.ln_scale
    }
}

/// √r·K_ν(2√g/(m−2)·r^{−(m−2)/2}) with ν = (2ℓ+1)/(m−2), the exact zero-energy solution.
pub fn zero_energy_singular(g: f64, m: f64, ell: f64, r: f64) -> Result<Scaled> {
    if !(r > 0.0) || !(g > 0.0) || !(m > 2.0) {
        return Err(Error::Domain(format!("zero_energy_singular(g={g}, m={m}, r={r})")));
    }
    let nu = (2.0 * ell + 1.0) / (m - 2.0);
    let x = 2.0 * g.sqrt() / (m - 2.0) * r.powf(-(m - 2.0) / 2.0);
    let ks = specfun::bessel_k_scaled(nu.abs(), x)?;
    Ok(Scaled { value: r.sqrt() * ks, ln_scale: -x })
}

impl RadialSolution {
    /// φ and φ′ at r in the scaled representation, with their log-scale.
    pub fn eval_scaled(&self, r: f64) -> ([f64; 2], f64) {
        let (y, ls) = self.traj.eval(r);
        ([y[0] * self.factor, y[1] * self.factor], ls + self.start.ln_norm)
    }

    /// True-scale φ(r), φ′(r) (may under- or overflow for singular starts).
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let (y, ls) = self.eval_scaled(r);
        let f = ls.exp();
        (y[0] * f, y[1] * f)
    }

    /// Multiply the solution by λ.
    pub fn scaled_by(&self, lambda: f64) -> RadialSolution {
        let mut s = self.clone();
        s.factor *= lambda;
        for p in s.phi.iter_mut() {
            *p *= lambda;
        }
        for p in s.dphi.iter_mut() {
            *p *= lambda;
        }
        s
    }

    /// True-scale samples (r, φ, φ′) on the step grid.
    pub fn samples(&self) -> Vec<(f64, f64, f64)> {
        (0..self.grid.len())
            .map(|i| {
                let f = self.log_scale[i].exp();
                (self.grid[i], self.phi[i] * f, self.dphi[i] * f)
            })
            .collect()
    }

    /// Q(r) = ℓ(ℓ+1)/r² + V(r) − k².
    pub fn q(&self, v: &Potential, r: f64) -> f64 {
        self.channel.centrifugal() / (r * r) + v.value(r) - self.channel.k.powi(2)
    }

    /// Largest residual of φ″ = Qφ (and of φ′ = dφ/dr) at interior points of
    /// each step, relative to the local energy norm.
    pub fn residual(&self, v: &Potential) -> f64 {
        let mut worst: f64 = 0.0;
        for s in &self.traj.segments {
            for &th in &[0.25, 0.5, 0.75] {
                let r = s.t0 + th * s.h;
                let y = s.eval(r);
                let d = s.eval_derivative(r);
                let q = self.q(v, r);
                let kap = energy_scale(q, self.channel.k, r);
                let m = (y[0].abs() * kap).max(y[1].abs());
                if m == 0.0 {
                    continue;
                }
                // differentiating the interpolant loses about ε·|y|/h to rounding
                let floor = 64.0 * f64::EPSILON * m / (s.h.abs() * kap);
                let r1 = (d[0] - y[1]).abs() / m;
                let r2 = (d[1] - q * y[0]).abs() / (m * kap);
                let (r1, r2) = ((r1 - floor).max(0.0), (r2 - floor).max(0.0));
                worst = worst.max(r1).max(r2);
            }
        }
        worst
    }

    /// min over the grid of φ′² + k²φ² in the scaled representation.
    pub fn min_energy_norm(&self) -> f64 {
        let k = self.channel.k;
        self.phi
            .iter()
            .zip(&self.dphi)
            .map(|(p, d)| d * d + k * k * p * p)
            .fold(f64::INFINITY, f64::min)
    }

    /// Number of sign changes of φ on (0, r_max], located via dense output.
    pub fn node_count(&self) -> usize {
        let mut n = 0;
        for s in &self.traj.segments {
            let mut prev = s.start()[0];
            for j in 1..=8 {
                let y = s.eval(s.t0 + s.h * j as f64 / 8.0)[0];
                if y != 0.0 && prev != 0.0 && (y > 0.0) != (prev > 0.0) {
                    n += 1;
                }
                if y != 0.0 {
                    prev = y;
                }
            }
        }
        n
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,phi,dphi\n");
        for (r, p, d) in self.samples() {
            let _ = writeln!(out, "{r:.16e},{p:.16e},{d:.16e}");
        }
        out
    }
}
