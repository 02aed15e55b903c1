//! The ten acceptance criteria, run in order with one PASS/FAIL line each.

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use phasekit::absolute;
use phasekit::iterate::{self, IterConfig};
use phasekit::observables::{self, LengthStatus};
use phasekit::phasefunc;
use phasekit::potentials::Potential;
use phasekit::radial::{self, Channel, SolverConfig};
use phasekit::specfun::gamma;
use phasekit::validation;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (a.ln() + (b.ln() - a.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn four_methods(v: &Potential, ch: &Channel, cfg: &SolverConfig) -> phasekit::Result<[f64; 4]> {
    let ode = phasefunc::solve_phase_ode(v, ch, cfg)?.total;
    let sol = radial::solve(v, ch, cfg)?;
    let integral = absolute::phase_shift(v, &sol)?.delta;
    let volterra = absolute::phase_shift_volterra(v, &sol)?.delta;
    let picard = iterate::picard_phase(v, ch, cfg, &IterConfig::default())?.profile.total;
    Ok([ode, integral, volterra, picard])
}

fn cross_method(cfg: &SolverConfig) -> Outcome {
    let t = Instant::now();
    let pots = [
        Potential::square(-2.0, 1.0).unwrap(),
        Potential::square(1.0, 1.0).unwrap(),
        Potential::exponential(-3.0, 1.0).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for v in &pots {
        for k in [0.5, 1.0, 2.0, 5.0] {
            for ell in [0.0, 1.0, 2.0] {
                match four_methods(v, &Channel::new(k, ell).unwrap(), cfg) {
                    Ok(d) => {
                        let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
                        worst = worst.max(hi - lo);
                    }
                    Err(e) => failures.push(format!("k = {k}, ℓ = {ell}: {e}")),
                }
            }
        }
    }
    let elapsed = secs(t.elapsed());
    outcome(
        failures.is_empty() && worst < 1e-6 && elapsed < 10.0,
        format!("36 channels, worst pairwise spread {worst:.2e} rad, {elapsed:.2} s {failures:?}"),
    )
}

fn centrifugal(cfg: &SolverConfig) -> Outcome {
    let t = Instant::now();
    let mut worst_exact: f64 = 0.0;
    let mut worst_k: f64 = 0.0;
    for ell in [1.0, 2.0, -0.5] {
        let v = Potential::centrifugal(ell).unwrap();
        let expect = if ell == -0.5 { PI / 4.0 } else { -ell * PI / 2.0 };
        let mut at = Vec::new();
        for k in [0.5, 5.0] {
            match observables::phase_at(&v, &Channel::new(k, 0.0).unwrap(), cfg) {
                Ok(d) => at.push(d),
                Err(e) => return outcome(false, format!("ℓ = {ell}, k = {k}: {e}")),
            }
        }
        worst_exact = at.iter().fold(worst_exact, |w, d| w.max((d - expect).abs()));
        worst_k = worst_k.max((at[0] - at[1]).abs());
    }
    let elapsed = secs(t.elapsed());
    outcome(
        worst_exact < 1e-4 && worst_k < 1e-6 && elapsed < 5.0,
        format!("worst |δ − exact| {worst_exact:.2e}, k-dependence {worst_k:.2e}, {elapsed:.2} s"),
    )
}

fn high_energy_vanishing(cfg: &SolverConfig) -> Outcome {
    let v = Potential::exponential(-3.0, 1.0).unwrap();
    let mut d = Vec::new();
    for k in [100.0, 300.0, 1000.0] {
        match observables::phase_at(&v, &Channel::new(k, 0.0).unwrap(), cfg) {
            Ok(x) => d.push(x.abs()),
            Err(e) => return outcome(false, format!("k = {k}: {e}")),
        }
    }
    outcome(
        d[0] > d[1] && d[1] > d[2] && d[2] < 1e-2,
        format!("|δ| at k = 100, 300, 1000: {:.3e}, {:.3e}, {:.3e}", d[0], d[1], d[2]),
    )
}

fn titchmarsh(cfg: &SolverConfig) -> Outcome {
    let t = Instant::now();
    let ks = logspace(50.0, 500.0, 10);
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [0.3, 0.5, 0.7] {
        let v0 = 1.0;
        let v = Potential::power_law(v0, alpha, 1.0).unwrap();
        let predicted = -(v0 / alpha) * (PI * alpha / 2.0).cos() * gamma(1.0 - alpha).unwrap() * 2f64.powf(alpha - 1.0);
        match observables::titchmarsh_fit(&v, &ks, cfg) {
            Ok(f) => {
                // the fit reports δ ≈ −c·k^p
                let ce = ((-f.coefficient - predicted) / predicted).abs();
                let pe = ((f.exponent - (alpha - 1.0)) / (alpha - 1.0)).abs();
                ok &= ce < 0.03 && pe < 0.02;
                parts.push(format!("α = {alpha}: exponent {:.4} ({:.2}%), coefficient {:.4} ({:.2}%)", f.exponent, 100.0 * pe, -f.coefficient, 100.0 * ce));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("α = {alpha}: {e}"));
            }
        }
    }
    let elapsed = secs(t.elapsed());
    outcome(ok && elapsed < 30.0, format!("{}; {elapsed:.2} s", parts.join("; ")))
}

fn singular_power_law(cfg: &SolverConfig) -> Outcome {
    let t = Instant::now();
    let ks = logspace(100.0, 1000.0, 6);
    let a = 1.1981361;
    let mut ok = true;
    let mut parts = Vec::new();
    for g in [1.0, 2.0] {
        let v = Potential::power_singular(g, 4.0).unwrap();
        match observables::high_energy_fit(&v, &ks, cfg) {
            Ok(f) => {
                let target = a * g.powf(0.25);
                let pe = ((f.exponent - 0.5) / 0.5).abs();
                let ce = ((f.coefficient - target) / target).abs();
                ok &= pe < 0.02 && ce < 0.05;
                parts.push(format!(
                    "g = {g}: exponent {:.4} ({:.2}%), coefficient {:.4} ({:.2}%), B·g^¼ = {:.4}",
                    f.exponent,
                    100.0 * pe,
                    f.coefficient,
                    100.0 * ce,
                    f.heuristic_coefficient.unwrap_or(f64::NAN)
                ));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("g = {g}: {e}"));
            }
        }
    }
    let elapsed = secs(t.elapsed());
    outcome(ok && elapsed < 60.0, format!("{}; {elapsed:.2} s", parts.join("; ")))
}

fn scattering_length(cfg: &SolverConfig) -> Outcome {
    let exact = 1.0 - 1f64.tanh();
    match observables::scattering_length(&Potential::square(1.0, 1.0).unwrap(), cfg) {
        Ok(a) => {
            let ei = a.integral.map_or(f64::INFINITY, |x| (x - exact).abs());
            let ee = (a.extrapolated - exact).abs();
            outcome(
                a.status == LengthStatus::Ok && ei < 1e-6 && ee < 1e-4,
                format!("integral off by {ei:.2e}, extrapolation off by {ee:.2e}"),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn two_dimensional(cfg: &SolverConfig) -> Outcome {
    let t = Instant::now();
    let v = Potential::square(1.0, 1.0).unwrap();
    match observables::low_energy_2d_scan(&v, &[1e-4, 1e-6, 1e-8], cfg) {
        Ok(p) => {
            let elapsed = secs(t.elapsed());
            let negative = p.iter().all(|x| x.product < 0.0);
            // |log k| grows along the list, and the product heads for −π/2 from above
            let monotone = p.windows(2).all(|w| w[1].product < w[0].product);
            let gap = (p[2].product + PI / 2.0).abs();
            outcome(
                negative && monotone && gap < 0.4 && elapsed < 20.0,
                format!(
                    "products {:.4}, {:.4}, {:.4}; |product(1e-8) + π/2| = {gap:.4}; {elapsed:.2} s",
                    p[0].product, p[1].product, p[2].product
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn levinson(cfg: &SolverConfig) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (s, n) in [(-6.0, 1), (-30.0, 2)] {
        let v = Potential::square(s, 1.0).unwrap();
        let r = observables::levinson_check(&v, 1e-3, cfg);
        let nodes = observables::bound_state_count(&v, 0.0, cfg);
        match (r, nodes) {
            (Ok(r), Ok(nodes)) => {
                let gap = (r.delta_at_zero - n as f64 * PI).abs();
                ok &= r.n_estimate == n && nodes == n as usize && gap < 0.05;
                parts.push(format!("V = {s}: δ(0⁺) = {:.5}, n = {}, nodes = {nodes}", r.delta_at_zero, r.n_estimate));
            }
            (r, nodes) => {
                ok = false;
                parts.push(format!("V = {s}: {:?} {:?}", r.err(), nodes.err()));
            }
        }
    }
    outcome(ok, parts.join("; "))
}

fn random_well(rng: &mut ChaCha8Rng) -> Potential {
    let square = |rng: &mut ChaCha8Rng| Potential::square(rng.gen_range(-5.0..5.0), rng.gen_range(0.2..3.0)).unwrap();
    let exponential =
        |rng: &mut ChaCha8Rng| Potential::exponential(rng.gen_range(-5.0..5.0), rng.gen_range(0.5..3.0)).unwrap();
    match rng.gen_range(0..3) {
        0 => square(rng),
        1 => exponential(rng),
        _ => Potential::sum(vec![square(rng), exponential(rng)]).unwrap(),
    }
}

/// Checks one potential; Err carries the reason it fails.
fn dominance_case(v: &Potential, cfg: &SolverConfig) -> Result<f64, String> {
    let it = IterConfig::default();
    let l1 = v
        .integrate_abs(|_| 1.0, 0.0, f64::INFINITY, 1e-10)
        .value()
        .ok_or("∫|V| did not converge")?;
    let mut worst: f64 = 0.0;
    for k in [0.5, 2.0, 8.0] {
        let ch = Channel::new(k, 0.0).unwrap();
        let maj = iterate::majorant(v, &ch, cfg, &it).map_err(|e| e.to_string())?;
        let sol = radial::solve(v, &ch, cfg).map_err(|e| e.to_string())?;
        let prof = phasefunc::local_phase_from_solution(v, &sol).map_err(|e| e.to_string())?;
        for (&r, &b) in maj.grid.iter().zip(&maj.delta_bound) {
            let d = if r <= 0.0 { 0.0 } else { prof.delta_at(r).abs() };
            if b + 1e-12 * (1.0 + d) < d {
                return Err(format!("k = {k}, r = {r}: Δ = {b} < |δ| = {d}"));
            }
            worst = worst.max(d / b.max(f64::MIN_POSITIVE));
        }
        if !maj.monotone {
            return Err(format!("k = {k}: iterates not monotone"));
        }
        let cap = maj.d / k * l1;
        if maj.total() > cap * (1.0 + 1e-10) {
            return Err(format!("k = {k}: Δ(∞) = {} > (D/k)∫|V| = {cap}", maj.total()));
        }
    }
    let at = |k: f64| {
        iterate::majorant(v, &Channel::new(k, 0.0).unwrap(), cfg, &it)
            .map(|m| m.total())
            .map_err(|e| e.to_string())
    };
    let (lo, hi) = (at(1.0)?, at(100.0)?);
    if !(hi < lo) {
        return Err(format!("Δ(100, ∞) = {hi} is not below Δ(1, ∞) = {lo}"));
    }
    Ok(worst)
}

fn majorant_dominance(cfg: &SolverConfig) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut tightest: f64 = 0.0;
    for i in 0..50 {
        let v = random_well(&mut rng);
        match dominance_case(&v, cfg) {
            Ok(w) => tightest = tightest.max(w),
            Err(e) => return outcome(false, format!("potential #{i} {:?}: {e}", v.family)),
        }
    }
    outcome(true, format!("50 potentials × 3 k, largest |δ|/Δ {tightest:.3}"))
}

fn invariants(cfg: &SolverConfig) -> Outcome {
    match validation::run_invariants(cfg) {
        Ok(r) => {
            let wronskian_samples = r.checks.iter().find(|c| c.name == "wronskian").map_or(0, |c| c.samples);
            let worst: Vec<String> = r.checks.iter().map(|c| format!("{} {:.1e}", c.name, c.worst)).collect();
            outcome(r.passed() && wronskian_samples >= 10_000, worst.join(", "))
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

#[test]
fn acceptance_criteria() {
    let cfg = SolverConfig::default();
    let criteria: [(&str, fn(&SolverConfig) -> Outcome); 10] = [
        ("cross-method concordance", cross_method),
        ("centrifugal exactness", centrifugal),
        ("high-energy vanishing", high_energy_vanishing),
        ("Titchmarsh coefficient", titchmarsh),
        ("singular power law", singular_power_law),
        ("scattering length", scattering_length),
        ("2D universal law", two_dimensional),
        ("Levinson", levinson),
        ("majorant dominance", majorant_dominance),
        ("invariant suite", invariants),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run(&cfg);
        // straight to the handle so the line shows without --nocapture
        let _ = writeln!(
            std::io::stderr(),
            "{} {:>2} {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
        if !o.passed {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
