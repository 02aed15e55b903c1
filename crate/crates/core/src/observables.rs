//! Derived quantities: scattering length, asymptotic fits, the 2D low-energy
//! law, Levinson counting and phases relative to a background potential.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::absolute;
use crate::error::{Error, Result};
use crate::ode::{self, StepControl};
use crate::phasefunc;
use crate::potentials::{self, Family, OriginClass, Potential};
use crate::quad;
use crate::radial::{self, Channel, RadialSolution, SolverConfig};
use crate::specfun;

/// δ(k) ≈ −c·k^p over a window, with the analytic prediction when there is one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub exponent: f64,
    pub coefficient: f64,
    pub k_window: (f64, f64),
    /// max relative deviation of the fitted model from the data
    pub residual: f64,
    pub predicted_exponent: Option<f64>,
    pub predicted_coefficient: Option<f64>,
    /// B·g^{1/m} for the singular case
    pub heuristic_coefficient: Option<f64>,
    /// straight line through log|δ| against log k, for comparison
    pub loglog_exponent: f64,
    pub loglog_coefficient: f64,
    /// coefficients of the subleading terms of the model
    pub subleading: Vec<f64>,
    pub points: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct FitJson {
    exponent: f64,
    coefficient: f64,
    predicted_exponent: Option<f64>,
    predicted_coefficient: Option<f64>,
    residual: f64,
    k_window: (f64, f64),
    #[serde(skip_serializing_if = "Option::is_none")]
    heuristic_coefficient: Option<f64>,
}

impl AsymptoticFit {
    /// `{exponent, coefficient, predicted_exponent, predicted_coefficient, residual, k_window}`
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(FitJson {
            exponent: self.exponent,
            coefficient: self.coefficient,
            predicted_exponent: self.predicted_exponent,
            predicted_coefficient: self.predicted_coefficient,
            residual: self.residual,
            k_window: self.k_window,
            heuristic_coefficient: self.heuristic_coefficient,
        })
        .expect("plain struct serializes")
    }

    pub fn exponent_error(&self) -> Option<f64> {
        self.predicted_exponent.map(|p| ((self.exponent - p) / p).abs())
    }

    pub fn coefficient_error(&self) -> Option<f64> {
        self.predicted_coefficient.map(|c| ((self.coefficient - c) / c).abs())
    }
}

/// Shapes fitted on top of the leading −c·k^p.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Model {
    /// + b
    Offset,
    /// + b·k^{2p} + e·k^{3p}
    PowerOrigin,
}

impl Model {
    fn columns(self, k: f64, p: f64) -> Vec<f64> {
        match self {
            Model::Offset => vec![-k.powf(p), 1.0],
            Model::PowerOrigin => vec![-k.powf(p), k.powf(2.0 * p), k.powf(3.0 * p)],
        }
    }
}

/// Least squares through the SVD. None when the columns are numerically dependent.
fn lstsq(rows: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let m = rows.first()?.len();
    let a = DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
    let svd = a.svd(true, true);
    let top = svd.singular_values.max();
    if !(svd.singular_values.min() > 1e-12 * top) {
        return None;
    }
    let x = svd.solve(&DVector::from_column_slice(y), 0.0).ok()?;
    Some(x.iter().copied().collect())
}

/// For fixed p the model is linear; returns its coefficients and the
/// relative sum of squares.
fn solve_linear(model: Model, pts: &[(f64, f64)], p: f64) -> Option<(Vec<f64>, f64)> {
    let rows: Vec<Vec<f64>> = pts
        .iter()
        .map(|&(k, d)| model.columns(k, p).into_iter().map(|c| c / d.abs()).collect())
        .collect();
    let y: Vec<f64> = pts.iter().map(|&(_, d)| d / d.abs()).collect();
    let coef = lstsq(&rows, &y)?;
    let sse = rows
        .iter()
        .zip(&y)
        .map(|(row, yi)| {
            let f: f64 = row.iter().zip(&coef).map(|(a, c)| a * c).sum();
            (f - yi).powi(2)
        })
        .sum();
    Some((coef, sse))
}

pub(crate) fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Exponent by a scan over [lo, hi] refined by golden section; the scan
/// keeps the search out of the shallow side minima of the variable projection.
fn fit_model(model: Model, pts: &[(f64, f64)], lo: f64, hi: f64) -> Result<(f64, Vec<f64>, f64)> {
    let sse = |p: f64| solve_linear(model, pts, p).map(|s| s.1).unwrap_or(f64::INFINITY);
    let n: usize = 240;
    let ps: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let vals: Vec<f64> = ps.iter().map(|&p| sse(p)).collect();
    // the true basin can be narrower than the scan spacing, so every local
    // minimum of the scan is refined and the best survivor kept
    let mut best: Option<(f64, f64)> = None;
    for i in 0..=n {
        let left = vals[i.saturating_sub(1)];
        let right = vals[(i + 1).min(n)];
        if !(vals[i].is_finite() && vals[i] <= left && vals[i] <= right) {
            continue;
        }
        let p = golden_min(sse, ps[i.saturating_sub(1)], ps[(i + 1).min(n)], 1e-12);
        let (p, f) = if sse(p) <= vals[i] { (p, sse(p)) } else { (ps[i], vals[i]) };
        if best.is_none_or(|b| f < b.1) {
            best = Some((p, f));
        }
    }
    let p = best
        .ok_or_else(|| Error::NotConverged("no admissible exponent in the fit range".into()))?
        .0;
    let (coef, _) = solve_linear(model, pts, p)
        .ok_or_else(|| Error::NotConverged("fit columns became dependent".into()))?;
    let residual = pts
        .iter()
        .map(|&(k, d)| {
            let f: f64 = model.columns(k, p).iter().zip(&coef).map(|(a, c)| a * c).sum();
            ((f - d) / d).abs()
        })
        .fold(0.0, f64::max);
    Ok((p, coef, residual))
}

/// Straight line through (ln k, ln|δ|): returns (p, c) with δ ≈ −c·k^p.
fn loglog(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.abs().ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let p = sxy / sxx;
    let sign = -pts[0].1.signum();
    (p, sign * (my - p * mx).exp())
}

fn check_window(ks: &[f64]) -> Result<(f64, f64)> {
    if ks.len() < 5 {
        return Err(Error::Invalid(format!("a fit needs at least 5 wave numbers, got {}", ks.len())));
    }
    let lo = ks.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ks.iter().copied().fold(0.0, f64::max);
    if !(lo > 0.0) || hi < 10.0 * lo * (1.0 - 1e-12) {
        return Err(Error::Invalid(format!("fit window [{lo}, {hi}] spans less than a decade")));
    }
    Ok((lo, hi))
}

/// Absolute phase shift from a fresh regular solution.
pub fn phase_at(v: &Potential, ch: &Channel, cfg: &SolverConfig) -> Result<f64> {
    let sol = radial::solve(v, ch, cfg)?;
    Ok(absolute::phase_shift(v, &sol)?.delta)
}

fn phases(v: &Potential, ks: &[f64], ell: f64, cfg: &SolverConfig) -> Result<Vec<(f64, f64)>> {
    ks.par_iter()
        .map(|&k| {
            let ch = Channel::new(k, ell)?;
            phase_at(v, &ch, cfg).map(|d| (k, d))
        })
        .collect()
}

/// A = (√π/2)Γ(1−1/m)/Γ(3/2−1/m).
pub fn singular_coefficient(m: f64) -> Result<f64> {
    if !(m > 2.0) {
        return Err(Error::Domain(format!("singular power needs m > 2, got {m}")));
    }
    let x = 1.0 / m;
    Ok(0.5 * std::f64::consts::PI.sqrt() * specfun::gamma(1.0 - x)? / specfun::gamma(1.5 - x)?)
}

/// B = ∫₀^∞ dt/(1 + t^m) = (π/m)/sin(π/m).
pub fn heuristic_coefficient(m: f64) -> Result<f64> {
    if !(m > 1.0) {
        return Err(Error::Domain(format!("∫dt/(1+t^m) diverges for m = {m}")));
    }
    let a = std::f64::consts::PI / m;
    Ok(a / a.sin())
}

/// Smallest power-of-two radius at which the g/r^m tail, once corrected to
/// first order, leaves less than a tenth of `tol` behind. Far inside the
/// uncorrected truncation radius when k is large.
fn corrected_tail_radius(g: f64, m: f64, k: f64, tol: f64) -> f64 {
    let left = |r: f64| {
        let first = g * r.powf(1.0 - m) / ((m - 1.0) * 2.0 * k);
        first * first + g * r.powf(-m) / (2.0 * k * k)
    };
    let mut r = 1.0;
    while left(r) > 0.1 * tol && r < 1e6 {
        r *= 2.0;
    }
    r
}

/// Fit of δ(k) for g/r^m against −A·g^{1/m}·k^{(m−2)/m}. The model carries
/// a constant offset for the subleading terms.
pub fn high_energy_fit(v: &Potential, ks: &[f64], cfg: &SolverConfig) -> Result<AsymptoticFit> {
    let (g, m) = match v.origin_class() {
        OriginClass::PowerSingular { g, m } if g > 0.0 => (g, m),
        _ => return Err(Error::Invalid("high-energy fit needs a repulsive g/r^m potential".into())),
    };
    let window = check_window(ks)?;
    let pts: Vec<(f64, f64)> = ks
        .par_iter()
        .map(|&k| {
            let local = SolverConfig { r_max_cap: cfg.r_max_cap.min(corrected_tail_radius(g, m, k, cfg.tail_tol)), ..*cfg };
            phase_at(v, &Channel::new(k, 0.0)?, &local).map(|d| (k, d))
        })
        .collect::<Result<_>>()?;
    if let Some(&(k, d)) = pts.iter().find(|p| p.1.abs() <= 1.0) {
        return Err(Error::Invalid(format!("|δ| = {} ≤ 1 at k = {k}; the window is not asymptotic", d.abs())));
    }
    let (p, coef, residual) = fit_model(Model::Offset, &pts, 0.02, 1.5)?;
    let (lp, lc) = loglog(&pts);
    let scale = g.powf(1.0 / m);
    Ok(AsymptoticFit {
        exponent: p,
        coefficient: coef[0],
        k_window: window,
        residual,
        predicted_exponent: Some((m - 2.0) / m),
        predicted_coefficient: Some(singular_coefficient(m)? * scale),
        heuristic_coefficient: Some(heuristic_coefficient(m)? * scale),
        loglog_exponent: lp,
        loglog_coefficient: lc,
        subleading: coef[1..].to_vec(),
        points: pts,
    })
}

/// −(V₀/α)cos(πα/2)Γ(1−α)(2k)^{α−1}.
pub fn titchmarsh_predict(v0: f64, alpha: f64, k: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("α must lie in (0, 1), got {alpha}")));
    }
    if !(k > 0.0) {
        return Err(Error::Domain("prediction needs k > 0".into()));
    }
    let c = (v0 / alpha) * (0.5 * std::f64::consts::PI * alpha).cos() * specfun::gamma(1.0 - alpha)?;
    Ok(-c * (2.0 * k).powf(alpha - 1.0))
}

/// ∫_a^∞ r^{−β}cos(ωr + θ) dr: quadrature out to many periods, then three
/// terms of the integration-by-parts expansion.
fn cos_power_tail(beta: f64, omega: f64, theta: f64, a: f64) -> f64 {
    let period = 2.0 * std::f64::consts::PI / omega;
    let x = (a + 64.0 * period).max(400.0 / omega);
    let mut total = 0.0;
    let mut lo = a;
    while lo < x {
        let hi = (lo + period).min(x);
        total += quad::adaptive(|r| r.powf(-beta) * (omega * r + theta).cos(), lo, hi, 1e-16, 1e-13, 50).value;
        lo = hi;
    }
    let (s, c) = (omega * x + theta).sin_cos();
    total - s / (omega * x.powf(beta)) + beta * c / (omega.powi(2) * x.powf(beta + 1.0))
        + beta * (beta + 1.0) * s / (omega.powi(3) * x.powf(beta + 2.0))
}

/// Phase added by V₀r^{−(1+α)} on r > r_c to a wave that already carries
/// phase δ there, to first order in the tail:
/// −(V₀/k)∫_{r_c}^∞ r^{−1−α} sin²(kr + δ) dr.
pub fn power_tail_born_phase(v0: f64, alpha: f64, rc: f64, k: f64, delta: f64) -> f64 {
    let i = cos_power_tail(1.0 + alpha, 2.0 * k, 2.0 * delta, rc);
    -(v0 / (2.0 * k)) * (rc.powf(-alpha) / alpha - i)
}

/// Fit of δ(k) for V₀r^{−(1+α)}θ(r_c − r). The cut is undone by adding back
/// the first-order phase of the missing tail. The uncut phase depends on k
/// only through V₀k^{α−1}, so the model is the cubic −c·k^p + b·k^{2p} + e·k^{3p}.
pub fn titchmarsh_fit(v: &Potential, ks: &[f64], cfg: &SolverConfig) -> Result<AsymptoticFit> {
    let (v0, alpha, rc) = match v.family {
        Family::PowerLaw { v0, alpha, radius } => (v0, alpha, radius),
        _ => return Err(Error::Invalid("Titchmarsh fit needs a cut power-law potential".into())),
    };
    titchmarsh_predict(v0, alpha, 1.0)?;
    let window = check_window(ks)?;
    let raw = phases(v, ks, 0.0, cfg)?;
    let pts: Vec<(f64, f64)> = raw.iter().map(|&(k, d)| (k, d + power_tail_born_phase(v0, alpha, rc, k, d))).collect();
    let (p, coef, residual) = fit_model(Model::PowerOrigin, &pts, -0.98, -0.02)?;
    let (lp, lc) = loglog(&raw);
    Ok(AsymptoticFit {
        exponent: p,
        coefficient: coef[0],
        k_window: window,
        residual,
        predicted_exponent: Some(alpha - 1.0),
        predicted_coefficient: Some(-titchmarsh_predict(v0, alpha, 1.0)?),
        heuristic_coefficient: None,
        loglog_exponent: lp,
        loglog_coefficient: lc,
        subleading: coef[1..].to_vec(),
        points: raw,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthStatus {
    Ok,
    /// φ′(0,r) changes sign, so the integral formula does not apply
    FormulaInvalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringLength {
    /// the recommended value
    pub value: f64,
    pub status: LengthStatus,
    /// ∫φ²/φ′²·V at k = 0
    pub integral: Option<f64>,
    pub integral_error: f64,
    /// −(δ − nπ)/k extrapolated in k²
    pub extrapolated: f64,
    pub extrapolation_spread: f64,
}

/// Quadratic in x through three points, evaluated at x = 0.
fn extrapolate_to_zero(x: [f64; 3], y: [f64; 3]) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        let mut w = 1.0;
        for j in 0..3 {
            if i != j {
                w *= x[j] / (x[j] - x[i]);
            }
        }
        s += w * y[i];
    }
    s
}

fn zero_energy_solution(v: &Potential, ell: f64, cfg: &SolverConfig) -> Result<RadialSolution> {
    if !matches!(v.origin_class(), OriginClass::L1AtOrigin | OriginClass::Bjk) {
        return Err(Error::Invalid("zero-energy quantities need a regular potential".into()));
    }
    let m = potentials::moments(v, 1.0, 1.0, ell)?;
    if m.second_moment_tail.value().is_none() {
        return Err(Error::Invalid("∫r²|V| diverges at large r".into()));
    }
    radial::solve(v, &Channel::new(0.0, ell)?, cfg)
}

fn derivative_changes_sign(sol: &RadialSolution) -> bool {
    let mut prev = 0.0f64;
    for s in &sol.traj.segments {
        for j in 0..=8 {
            let y = s.eval(s.t0 + s.h * j as f64 / 8.0)[1];
            if y != 0.0 {
                if prev != 0.0 && (y > 0.0) != (prev > 0.0) {
                    return true;
                }
                prev = y;
            }
        }
    }
    false
}

/// S-wave scattering length from the k = 0 solution, cross-checked against
/// −(δ − nπ)/k at k = 10^{−2}, 10^{−2.5}, 10^{−3}.
pub fn scattering_length(v: &Potential, cfg: &SolverConfig) -> Result<ScatteringLength> {
    let sol = zero_energy_solution(v, 0.0, cfg)?;
    let invalid = derivative_changes_sign(&sol);
    let integral = if invalid {
        None
    } else {
        let head = radial::integrate_from_origin(|t| t * t * v.value(t), sol.start.r0);
        let mut acc = head;
        let mut err = 0.0;
        for seg in &sol.traj.segments {
            let q = quad::adaptive(
                |r| {
                    let y = seg.eval(r);
                    let x = y[0] / y[1];
                    x * x * v.value(r)
                },
                seg.t0,
                seg.t1(),
                1e-13,
                1e-12,
                64,
            );
            acc += q.value;
            err += q.error;
        }
        Some((acc, err + sol.tail.bound))
    };

    let ks = [1e-2, 10f64.powf(-2.5), 1e-3];
    let ds = phases(v, &ks, 0.0, cfg)?;
    let n = (ds[2].1 / std::f64::consts::PI).round();
    let a: Vec<f64> = ds.iter().map(|&(k, d)| -(d - n * std::f64::consts::PI) / k).collect();
    let x = [ks[0] * ks[0], ks[1] * ks[1], ks[2] * ks[2]];
    let extrapolated = extrapolate_to_zero(x, [a[0], a[1], a[2]]);
    let spread = a.iter().map(|ai| (ai - extrapolated).abs()).fold(0.0, f64::max);

    Ok(match integral {
        Some((val, e)) => ScatteringLength {
            value: val,
            status: LengthStatus::Ok,
            integral: Some(val),
            integral_error: e,
            extrapolated,
            extrapolation_spread: spread,
        },
        None => ScatteringLength {
            value: extrapolated,
            status: LengthStatus::FormulaInvalid,
            integral: None,
            integral_error: f64::NAN,
            extrapolated,
            extrapolation_spread: spread,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevinsonReport {
    pub delta_at_zero: f64,
    pub n_estimate: i64,
    /// δ at k_min, 2k_min, 4k_min
    pub samples: Vec<(f64, f64)>,
    pub spread: f64,
    pub low_confidence: bool,
}

/// δ(0⁺) by quadratic extrapolation from k_min, 2k_min, 4k_min.
pub fn levinson_check(v: &Potential, k_min: f64, cfg: &SolverConfig) -> Result<LevinsonReport> {
    if !(k_min > 0.0) {
        return Err(Error::Domain("k_min must be positive".into()));
    }
    let ks = [k_min, 2.0 * k_min, 4.0 * k_min];
    let s = phases(v, &ks, 0.0, cfg)?;
    let d0 = extrapolate_to_zero(ks, [s[0].1, s[1].1, s[2].1]);
    let spread = s.iter().map(|p| (p.1 - d0).abs()).fold(0.0, f64::max);
    Ok(LevinsonReport {
        delta_at_zero: d0,
        n_estimate: (d0 / std::f64::consts::PI).round() as i64,
        samples: s,
        spread,
        low_confidence: spread > 0.2,
    })
}

/// Bound states in channel ℓ from the zeros of φ(0,r) on (0, ∞), counting
/// the zero the free continuation beyond r_max may still have.
pub fn bound_state_count(v: &Potential, ell: f64, cfg: &SolverConfig) -> Result<usize> {
    let sol = zero_energy_solution(v, ell, cfg)?;
    let mut n = sol.node_count();
    let r = sol.r_max;
    let y = sol.traj.final_state();
    // φ = a·r^{ℓ+1} + b·r^{−ℓ} outside; a zero beyond R needs −b/a > R^{2ℓ+1}
    let x = (ell + 1.0) * y[0] - r * y[1];
    let z = ell * y[0] + r * y[1];
    if z != 0.0 && -x / z > 1.0 {
        n += 1;
    }
    Ok(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowEnergyPoint {
    pub k: f64,
    pub delta: f64,
    /// δ·|ln k|, which tends to −π/2
    pub product: f64,
}

/// ℓ = −1/2 phases of a positive potential at small k.
pub fn low_energy_2d_scan(v: &Potential, ks: &[f64], cfg: &SolverConfig) -> Result<Vec<LowEnergyPoint>> {
    if !v.is_nonnegative() {
        return Err(Error::Invalid("the 2D low-energy law needs V ≥ 0".into()));
    }
    if let Some(&k) = ks.iter().find(|&&k| !(k > 0.0 && k < 0.1)) {
        return Err(Error::Domain(format!("low-energy scan needs 0 < k < 0.1, got {k}")));
    }
    ks.par_iter()
        .map(|&k| {
            let sol = radial::solve(v, &Channel::new(k, -0.5)?, cfg)?;
            let d = absolute::phase_shift_volterra(v, &sol)?.delta;
            Ok(LowEnergyPoint { k, delta: d, product: d * k.ln().abs() })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativePhase {
    /// phase of V₂ measured against the V₁ waves
    pub delta2: f64,
    /// absolute phase of V₁ + V₂
    pub total: f64,
    /// absolute phase of V₁ alone
    pub background: f64,
    /// max |W(φ₁,ψ₁)/k − 1| seen on the grid
    pub wronskian_deviation: f64,
    /// bound on the V₂ phase beyond the last radius
    pub err_tail: f64,
}

/// δ₂ from the quotient formula with (u, v) replaced by the V₁ pair (φ₁, ψ₁),
/// both of unit asymptotic amplitude with Wronskian k. ψ₁ is integrated inward.
pub fn relative_phase(v1: &Potential, v2: &Potential, ch: &Channel, cfg: &SolverConfig) -> Result<RelativePhase> {
    let k = ch.k;
    if !(k > 0.0) {
        return Err(Error::Domain("relative phase needs k > 0".into()));
    }
    let both = Potential::sum(vec![v1.clone(), v2.clone()])?;
    let sol = radial::solve(&both, ch, cfg)?;
    // the Wronskian test below is sharper than the default step tolerance
    let tight = SolverConfig { rtol: cfg.rtol.min(1e-12), ..*cfg };
    let sol1 = radial::solve(v1, ch, &tight)?;
    let big_r = sol.r_max;
    if sol1.r_max > big_r * (1.0 + 1e-12) {
        return Err(Error::Invalid(format!(
            "background not yet asymptotic at r = {big_r} (needs {})",
            sol1.r_max
        )));
    }
    let order = radial::effective_order(v1, ch.ell)?;
    let r1 = sol1.r_max;
    let (y1, ls1) = sol1.eval_scaled(r1);
    let (s1, c1) = phasefunc::sin_cos_parts(order, k, r1, y1[0], y1[1])?;
    let phase1 = s1.atan2(c1);
    let ln_amp = (s1.hypot(c1) / k).ln() + ls1;
    let (sn, cs) = phase1.sin_cos();
    let free = |r: f64| -> Result<(f64, f64, f64, f64)> { phasefunc::free_waves(order, k, r) };

    // ψ₁ = −sin δ₁·u + cos δ₁·v at R, then inward under V₁
    let (u, du, w, dw) = free(big_r)?;
    let psi_r = [-sn * u + cs * w, -sn * du + cs * dw];
    let cl = ch.centrifugal();
    let rhs = |r: f64, y: &[f64; 2]| [y[1], (cl / (r * r) + v1.value(r) - k * k) * y[0]];
    let rtol = 1e-12;
    let scale = move |a: &[f64; 2], b: &[f64; 2], r: f64| {
        let kap = (k * k + 1.0 / (r * r)).sqrt();
        let m = (a[0].abs() * kap).max(a[1].abs()).max(b[0].abs() * kap).max(b[1].abs());
        [rtol * m / kap + 1e-300, rtol * m + 1e-300]
    };
    let ctl = StepControl {
        h_init: 0.1 / k,
        h_max: 1.0 / k,
        max_steps: cfg.max_steps,
        renormalize_above: Some(1e100),
        ..Default::default()
    };
    let r0 = sol.start.r0;
    let psi = ode::integrate(rhs, scale, big_r, psi_r, r0, &v1.breakpoints(), ctl)?;

    // unit-amplitude background pair at r
    let pair = |r: f64| -> Result<([f64; 2], [f64; 2])> {
        let p1 = if r <= r1 {
            let (y, ls) = sol1.eval_scaled(r);
            let f = (ls - ln_amp).exp();
            [y[0] * f, y[1] * f]
        } else {
            let (u, du, w, dw) = free(r)?;
            [cs * u + sn * w, cs * du + sn * dw]
        };
        let (y, ls) = psi.eval(r);
        let f = ls.exp();
        Ok((p1, [y[0] * f, y[1] * f]))
    };

    let mut wdev: f64 = 0.0;
    let sign = sol.factor.signum();
    let parts = |r: f64, p: f64, dp: f64| -> Result<(f64, f64, f64)> {
        let (a, b) = pair(r)?;
        let wr = a[1] * b[0] - a[0] * b[1];
        Ok((a[1] * p - a[0] * dp, b[0] * dp - b[1] * p, wr / k - 1.0))
    };
    let (s0, c0, w0) = parts(r0, sol.start.phi, sol.start.dphi)?;
    wdev = wdev.max(w0.abs());
    let mut delta2 = if c0.is_finite() { s0.atan2(c0) } else { 0.0 };
    for seg in &sol.traj.segments {
        let (_, _, wseg) = parts(seg.t1(), 1.0, 0.0)?;
        wdev = wdev.max(wseg.abs());
        let q = quad::adaptive(
            |r| {
                let y = seg.eval(r);
                let (p, dp) = (sign * y[0], sign * y[1]);
                match parts(r, p, dp) {
                    Ok((s, c, _)) => {
                        let den = s * s + c * c;
                        if den.is_finite() && den > 0.0 {
                            -k * v2.value(r) * p * p / den
                        } else {
                            0.0
                        }
                    }
                    Err(_) => f64::NAN,
                }
            },
            seg.t0,
            seg.t1(),
            1e-12,
            1e-13,
            64,
        );
        if !q.value.is_finite() {
            return Err(Error::Quadrature(format!("non-finite relative-phase integrand near r = {}", seg.t0)));
        }
        delta2 += q.value;
    }
    if wdev > 1e-8 {
        return Err(Error::Invalid(format!("background Wronskian off by {wdev:.3e} relative to k")));
    }
    let total = absolute::phase_shift(&both, &sol)?.delta;
    let background = absolute::phase_shift(v1, &sol1)?.delta;
    let err_tail = if v2.support_end().is_some_and(|e| e <= big_r) {
        0.0
    } else {
        potentials::tail_bound(v2, k, big_r)?
    };
    Ok(RelativePhase { delta2, total, background, wronskian_deviation: wdev, err_tail })
}
