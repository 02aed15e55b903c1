//! Invariant suite behind the `validate` command.

use serde::{Deserialize, Serialize};

use crate::absolute;
use crate::error::Result;
use crate::phasefunc;
use crate::potentials::Potential;
use crate::radial::{self, Channel, SolverConfig};
use crate::specfun::riccati_pair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// largest violation seen
    pub worst: f64,
    pub tolerance: f64,
    pub samples: usize,
}

impl Check {
    fn new(name: &str, worst: f64, tolerance: f64, samples: usize) -> Self {
        Self { name: name.into(), passed: worst <= tolerance, worst, tolerance, samples }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// One line per check.
    pub fn lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{} {}: worst {:.3e} (tolerance {:.1e}, {} samples)",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.worst,
                    c.tolerance,
                    c.samples
                )
            })
            .collect()
    }
}

/// |du·v − u·dv − 1| on a 100 × 100 grid of ℓ ∈ [−½, 10] and z ∈ [10⁻², 10³].
pub fn wronskian_check() -> Result<Check> {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for i in 0..100 {
        let ell = -0.5 + 10.5 * i as f64 / 99.0;
        for j in 0..100 {
            let z = 10f64.powf(-2.0 + 5.0 * j as f64 / 99.0);
            let w = riccati_pair(ell, z)?.wronskian();
            worst = worst.max((w - 1.0).abs());
            n += 1;
        }
    }
    Ok(Check::new("wronskian", worst, 1e-10, n))
}

fn sample_potentials() -> Result<Vec<Potential>> {
    Ok(vec![
        Potential::square(-2.0, 1.0)?,
        Potential::square(1.0, 1.0)?,
        Potential::exponential(-3.0, 1.0)?,
        Potential::yukawa(-2.0, 1.5)?,
        Potential::yukawa(1.0, 1.0)?,
    ])
}

/// Runs every invariant over a fixed set of potentials and channels.
pub fn run_invariants(cfg: &SolverConfig) -> Result<ValidationReport> {
    let mut checks = vec![wronskian_check()?];
    let channels: Vec<Channel> = [(0.5, 0.0), (2.0, 0.0), (0.5, 1.0), (2.0, 1.0)]
        .iter()
        .map(|&(k, l)| Channel::new(k, l))
        .collect::<Result<_>>()?;

    let mut norm_worst: f64 = 0.0;
    let mut sign_worst: f64 = 0.0;
    let mut resid_worst: f64 = 0.0;
    let mut n_norm = 0;
    let mut n_sign = 0;
    let mut n_resid = 0;
    for v in sample_potentials()? {
        for ch in &channels {
            let sol = radial::solve(&v, ch, cfg)?;
            resid_worst = resid_worst.max(sol.residual(&v));
            n_resid += 1;
            let d = absolute::phase_shift(&v, &sol)?.delta;
            for lam in [1e-6, 1e6] {
                let e = absolute::phase_shift(&v, &sol.scaled_by(lam))?.delta;
                norm_worst = norm_worst.max((d - e).abs());
                n_norm += 1;
            }
            // a single-signed V pushes δ the other way
            let wrong = if v.is_nonnegative() {
                d.max(0.0)
            } else if v.is_nonpositive() {
                (-d).max(0.0)
            } else {
                0.0
            };
            sign_worst = sign_worst.max(wrong);
            n_sign += 1;
        }
    }
    checks.push(Check::new("normalization_invariance", norm_worst, 1e-10, n_norm));
    checks.push(Check::new("sign_law", sign_worst, 0.0, n_sign));

    let zero = Potential::zero();
    let mut jost_worst: f64 = 0.0;
    let mut n_jost = 0;
    for &(k, l) in &[(0.3, 0.0), (1.0, 0.0), (5.0, 0.0), (1.0, 1.0), (1.0, 2.0), (1.0, -0.5)] {
        let sol = radial::solve(&zero, &Channel::new(k, l)?, cfg)?;
        resid_worst = resid_worst.max(sol.residual(&zero));
        n_resid += 1;
        let prof = phasefunc::local_phase_from_solution(&zero, &sol)?;
        jost_worst = jost_worst.max((absolute::jost_modulus(&sol, &prof)? - 1.0).abs());
        n_jost += 1;
    }
    checks.push(Check::new("free_jost_modulus", jost_worst, 1e-8, n_jost));
    checks.push(Check::new("ode_residual", resid_worst, 1e-6, n_resid));
    Ok(ValidationReport { checks })
}
