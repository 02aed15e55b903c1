//! Total phase shift from closed integrals over the regular solution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, StepControl};
use crate::phasefunc::{self, PhaseProfile};
use crate::potentials::Potential;
use crate::radial::{self, Channel, NormConvention, RadialSolution};
use crate::specfun::{self, riccati_pair};

/// Which closed form produced a phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    /// −k∫Vφ²/(φ′² + k²φ²)
    SWave,
    /// −k∫Vφ²/[(u′φ − uφ′)² + (v′φ − vφ′)²]
    Quotient,
    /// denominators rebuilt from ∫uφV and k^{−ℓ} + ∫vφV
    Volterra,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseResult {
    pub channel: Channel,
    pub delta: f64,
    pub err_quadrature: f64,
    pub err_tail: f64,
    pub err_start: f64,
    pub formula: Formula,
    /// the tail term dominates the error budget
    pub dominated: bool,
}

#[derive(Serialize)]
struct PhaseJson {
    k: f64,
    ell: f64,
    delta: f64,
    err_quadrature: f64,
    err_tail: f64,
    formula: Formula,
}

impl PhaseResult {
    pub fn error_total(&self) -> f64 {
        self.err_quadrature + self.err_tail + self.err_start
    }

    /// `{k, ell, delta, err_quadrature, err_tail, formula}`
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(PhaseJson {
            k: self.channel.k,
            ell: self.channel.ell,
            delta: self.delta,
            err_quadrature: self.err_quadrature,
            err_tail: self.err_tail,
            formula: self.formula,
        })
        .expect("plain struct serializes")
    }

    fn new(channel: Channel, delta: f64, err_q: f64, err_tail: f64, err_start: f64, formula: Formula) -> Self {
        Self {
            channel,
            delta,
            err_quadrature: err_q,
            err_tail,
            err_start,
            formula,
            dominated: err_tail > err_q + err_start,
        }
    }
}

/// Normalization-free phase: start phase, quadrature over every step, tail correction.
pub fn phase_shift(v: &Potential, sol: &RadialSolution) -> Result<PhaseResult> {
    let pi = phasefunc::integrate_phase(v, sol, 1e-9)?;
    let last = *pi.delta.last().unwrap();
    let (corr, err_tail) = sol.tail.correction(&sol.channel, last)?;
    let formula = if sol.channel.ell == 0.0 { Formula::SWave } else { Formula::Quotient };
    Ok(PhaseResult::new(sol.channel, last + corr, pi.err_quadrature, err_tail, pi.err_start, formula))
}

/// Volterra form. The two inner integrals ride along with φ in one sweep,
/// so the result depends on φ ≈ r^{ℓ+1}/(2ℓ+1)!! holding exactly.
pub fn phase_shift_volterra(v: &Potential, sol: &RadialSolution) -> Result<PhaseResult> {
    if sol.norm_convention != NormConvention::BesselNormalized || sol.factor != 1.0 {
        return Err(Error::Normalization(format!(
            "the Volterra form needs the Bessel-normalized solution, got {:?} scaled by {}",
            sol.norm_convention, sol.factor
        )));
    }
    let ch = sol.channel;
    if !(ch.k > 0.0) {
        return Err(Error::Domain("phase shift needs k > 0".into()));
    }
    let fine = volterra_sweep(v, sol, 1e-12)?;
    let coarse = volterra_sweep(v, sol, 1e-10)?;
    let (corr, err_tail) = sol.tail.correction(&ch, fine)?;
    let (d0, err_start) = phasefunc::start_phase(&ch, &sol.start)?;
    let _ = d0;
    Ok(PhaseResult::new(ch, fine + corr, (fine - coarse).abs(), err_tail, err_start, Formula::Volterra))
}

/// Local phase at r_max from the state [φ, φ′, ∫uφV, k^{−ℓ} + ∫vφV, δ].
fn volterra_sweep(v: &Potential, sol: &RadialSolution, rtol: f64) -> Result<f64> {
    let ch = sol.channel;
    let (k, ell) = (ch.k, ch.ell);
    let cl = ch.centrifugal();
    let r0 = sol.start.r0;
    let norm = sol.start.ln_norm.exp();
    let (p0, dp0) = (sol.start.phi * norm, sol.start.dphi * norm);
    let k_ell = k.powf(-ell);

    // first panel from the leading power
    let df = specfun::double_factorial_odd(ell)?;
    let lead = |t: f64| t.powf(ell + 1.0) / df;
    let free = |t: f64| riccati_pair(ell, k * t).map(|p| (p.u, p.v)).unwrap_or((0.0, 0.0));
    let finite = |x: f64| if x.is_finite() { x } else { 0.0 };
    let su0 = radial::integrate_from_origin(|t| finite(free(t).0 * lead(t) * v.value(t)), r0);
    let sv0 = radial::integrate_from_origin(|t| finite(free(t).1 * lead(t) * v.value(t)), r0);
    let d0 = radial::integrate_from_origin(
        |t| {
            let p = lead(t);
            finite(-k * v.value(t) * p * p / (k_ell * k_ell))
        },
        r0,
    );

    let rhs = |r: f64, y: &[f64; 5]| -> [f64; 5] {
        let vr = v.value(r);
        let (u, w) = free(r);
        let den = y[2] * y[2] + y[3] * y[3];
        [
            y[1],
            (cl / (r * r) + vr - k * k) * y[0],
            u * y[0] * vr,
            w * y[0] * vr,
            -k * vr * y[0] * y[0] / den,
        ]
    };
    let scale = move |a: &[f64; 5], b: &[f64; 5], r: f64| {
        let kap = (k * k + 1.0 / (r * r)).sqrt();
        let m = (a[0].abs() * kap).max(a[1].abs()).max(b[0].abs() * kap).max(b[1].abs());
        let s = a[2].hypot(a[3]).max(b[2].hypot(b[3]));
        let tiny = 1e-300;
        [
            rtol * m / kap + tiny,
            rtol * m + tiny,
            rtol * s + tiny,
            rtol * s + tiny,
            rtol * 1e-2 * (1.0 + a[4].abs()),
        ]
    };
    let ctl = StepControl {
        h_init: 0.1 * r0,
        h_max: 1.0 / k,
        max_steps: 5_000_000,
        ..Default::default()
    };
    let y0 = [p0, dp0, su0, k_ell + sv0, d0];
    let traj = ode::integrate(rhs, scale, r0, y0, sol.r_max, &v.breakpoints(), ctl)?;
    let d = traj.final_state()[4];
    if !d.is_finite() {
        return Err(Error::Quadrature("Volterra sweep produced a non-finite phase".into()));
    }
    Ok(d)
}

/// |F_ℓ(k)| = k^{ℓ+1}·A_ℓ(k,∞).
pub fn jost_modulus(sol: &RadialSolution, profile: &PhaseProfile) -> Result<f64> {
    let order = phasefunc::jost_order(sol)?;
    let a = profile
        .amplitude_inf
        .ok_or_else(|| Error::NotConverged("amplitude has no plateau within r_max".into()))?;
    Ok(sol.channel.k.powf(order + 1.0) * a / sol.factor.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::SolverConfig;
    use std::f64::consts::PI;

    fn solve(v: &Potential, k: f64, l: f64) -> RadialSolution {
        radial::solve(v, &Channel::new(k, l).unwrap(), &SolverConfig::default()).unwrap()
    }

    #[test]
    fn zero_potential() {
        let v = Potential::zero();
        for &l in &[0.0, 1.0, -0.5] {
            let s = solve(&v, 1.2, l);
            assert!(phase_shift(&v, &s).unwrap().delta.abs() < 1e-12);
            assert!(phase_shift_volterra(&v, &s).unwrap().delta.abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_square_limits() {
        let v = Potential::inverse_square(6.0).unwrap();
        let r = phase_shift(&v, &solve(&v, 1.0, 0.0)).unwrap();
        assert!((r.delta + PI).abs() < 1e-6, "{}", r.delta);
        let v = Potential::inverse_square(-0.25).unwrap();
        let r = phase_shift(&v, &solve(&v, 1.0, 0.0)).unwrap();
        assert!((r.delta - 0.25 * PI).abs() < 1e-6, "{}", r.delta);
    }

    #[test]
    fn volterra_matches_quotient() {
        let v = Potential::exponential(-3.0, 1.0).unwrap();
        let s = solve(&v, 1.0, 0.0);
        let a = phase_shift(&v, &s).unwrap();
        let b = phase_shift_volterra(&v, &s).unwrap();
        assert!((a.delta - b.delta).abs() < 1e-6, "{} {}", a.delta, b.delta);
        assert_eq!(a.formula, Formula::SWave);
    }

    #[test]
    fn volterra_rejects_rescaled() {
        let v = Potential::exponential(-3.0, 1.0).unwrap();
        let s = solve(&v, 1.0, 0.0).scaled_by(2.0);
        assert!(matches!(phase_shift_volterra(&v, &s), Err(Error::Normalization(_))));
    }

    #[test]
    fn two_dimensional_barrier_at_low_k() {
        let v = Potential::square(1.0, 1.0).unwrap();
        let s = solve(&v, 1e-4, -0.5);
        let r = phase_shift_volterra(&v, &s).unwrap();
        assert!(r.delta < 0.0 && r.delta.abs() < 1.0, "{}", r.delta);
        let q = phase_shift(&v, &s).unwrap();
        assert!((q.delta - r.delta).abs() < 1e-6, "{} {}", q.delta, r.delta);
    }

    #[test]
    fn normalization_invariance() {
        let v = Potential::yukawa(-2.0, 1.5).unwrap();
        let s = solve(&v, 0.8, 1.0);
        let d = phase_shift(&v, &s).unwrap().delta;
        for lam in [1e-6, 1.0, 1e6] {
            let e = phase_shift(&v, &s.scaled_by(lam)).unwrap().delta;
            assert!((d - e).abs() < 1e-10);
        }
    }

    #[test]
    fn jost_modulus_free_and_barrier() {
        let v = Potential::zero();
        let s = solve(&v, 0.7, 0.0);
        let p = phasefunc::local_phase_from_solution(&v, &s).unwrap();
        assert!((jost_modulus(&s, &p).unwrap() - 1.0).abs() < 1e-10);
        let v = Potential::square(3.0, 1.0).unwrap();
        let s = solve(&v, 1.0, 0.0);
        let p = phasefunc::local_phase_from_solution(&v, &s).unwrap();
        assert!(jost_modulus(&s, &p).unwrap() >= 1.0);
    }

    #[test]
    fn json_fields() {
        let v = Potential::square(1.0, 1.0).unwrap();
        let r = phase_shift(&v, &solve(&v, 1.0, 0.0)).unwrap();
        let j = r.to_json();
        for key in ["k", "ell", "delta", "err_quadrature", "err_tail", "formula"] {
            assert!(j.get(key).is_some(), "{key}");
        }
        assert_eq!(j["formula"], "s_wave");
    }
}
