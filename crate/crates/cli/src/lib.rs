//! Batch driver for phasekit: config parsing, per-channel runs and report formatting.

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use phasekit::absolute::{self, PhaseResult};
use phasekit::iterate::{self, IterConfig};
use phasekit::observables;
use phasekit::phasefunc::{self, PhaseProfile};
use phasekit::potentials::{Potential, PotentialSpec};
use phasekit::radial::{self, Channel, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ode,
    Integral,
    Volterra,
    Picard,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ode => "ode",
            Method::Integral => "integral",
            Method::Volterra => "volterra",
            Method::Picard => "picard",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub k: f64,
    pub ell: f64,
}

/// Overrides on top of the default solver settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub tail_tol: Option<f64>,
    pub r_max_cap: Option<f64>,
    pub quad_tol: Option<f64>,
}

impl SolverSection {
    /// Default solver settings with these overrides, then `tol` on top.
    pub fn resolve(&self, tol: Option<f64>) -> Result<SolverConfig> {
        let mut s = SolverConfig::default();
        let fields = [
            ("solver.rtol", self.rtol, &mut s.rtol),
            ("solver.atol", self.atol, &mut s.atol),
            ("solver.tail_tol", self.tail_tol, &mut s.tail_tol),
            ("solver.r_max_cap", self.r_max_cap, &mut s.r_max_cap),
            ("solver.quad_tol", self.quad_tol, &mut s.quad_tol),
        ];
        for (name, value, slot) in fields {
            if let Some(x) = value {
                if !(x > 0.0) || !x.is_finite() {
                    bail!("field \"{name}\" must be positive, got {x}");
                }
                *slot = x;
            }
        }
        if let Some(t) = tol {
            if !(t > 0.0) {
                bail!("--tol must be positive, got {t}");
            }
            s.rtol = t;
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialSpec,
    #[serde(default)]
    pub channels: Vec<ChannelSpec>,
    #[serde(default)]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub outputs: OutputSection,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).context("malformed config")?;
        cfg.potential().context("field \"potential\"")?;
        Ok(cfg)
    }

    pub fn potential(&self) -> Result<Potential> {
        Ok(self.potential.build()?)
    }

    /// Requirements of the `compute` command on top of parsing.
    pub fn check_runnable(&self) -> Result<()> {
        if self.channels.is_empty() {
            bail!("field \"channels\": at least one channel is required");
        }
        if self.methods.is_empty() {
            bail!("field \"methods\": at least one method is required");
        }
        for (i, c) in self.channels.iter().enumerate() {
            Channel::new(c.k, c.ell).with_context(|| format!("field \"channels[{i}]\""))?;
        }
        Ok(())
    }

    pub fn solver_config(&self, tol: Option<f64>) -> Result<SolverConfig> {
        self.solver.resolve(tol)
    }
}

/// 17 significant digits, or empty for a missing value.
pub fn fmt_f(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.16e}"),
        None => String::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub k: f64,
    pub ell: f64,
    pub method: Method,
    pub delta: Option<f64>,
    pub err_quad: Option<f64>,
    pub err_tail: Option<f64>,
    pub amplitude_inf: Option<f64>,
    pub jost_modulus: Option<f64>,
    /// largest pairwise spread between the methods of this channel
    pub max_discrepancy: Option<f64>,
    pub dominated: bool,
    pub error: Option<String>,
}

pub const CSV_HEADER: &str = "k,ell,method,delta,err_quad,err_tail,amplitude_inf,jost_modulus,max_discrepancy,error";

impl Row {
    fn csv(&self) -> String {
        let err = self.error.as_deref().unwrap_or("").replace(['"', '\n'], " ");
        let err = if err.contains(',') { format!("\"{err}\"") } else { err };
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_f(Some(self.k)),
            fmt_f(Some(self.ell)),
            self.method.name(),
            fmt_f(self.delta),
            fmt_f(self.err_quad),
            fmt_f(self.err_tail),
            fmt_f(self.amplitude_inf),
            fmt_f(self.jost_modulus),
            fmt_f(self.max_discrepancy),
            err
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub rows: Vec<Row>,
}

impl RunReport {
    pub fn any_dominated(&self) -> bool {
        self.rows.iter().any(|r| r.dominated)
    }

    pub fn any_error(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv());
            out.push('\n');
        }
        out
    }

    /// 0 when clean, 1 when a row failed, 3 when only dominated-error flags were raised.
    pub fn exit_code(&self) -> i32 {
        if self.any_error() {
            1
        } else if self.any_dominated() {
            3
        } else {
            0
        }
    }
}

struct MethodOut {
    delta: f64,
    err_quad: f64,
    err_tail: f64,
    dominated: bool,
}

fn from_result(r: PhaseResult) -> MethodOut {
    MethodOut { delta: r.delta, err_quad: r.err_quadrature, err_tail: r.err_tail, dominated: r.dominated }
}

fn from_profile(p: &PhaseProfile) -> MethodOut {
    MethodOut {
        delta: p.total,
        err_quad: p.err_integration,
        err_tail: p.err_tail,
        dominated: p.err_tail > p.err_integration + p.err_start,
    }
}

fn run_method(v: &Potential, ch: &Channel, m: Method, cfg: &SolverConfig) -> phasekit::Result<MethodOut> {
    match m {
        Method::Ode => Ok(from_profile(&phasefunc::solve_phase_ode(v, ch, cfg)?)),
        Method::Integral => {
            let sol = radial::solve(v, ch, cfg)?;
            Ok(from_result(absolute::phase_shift(v, &sol)?))
        }
        Method::Volterra => {
            let sol = radial::solve(v, ch, cfg)?;
            Ok(from_result(absolute::phase_shift_volterra(v, &sol)?))
        }
        Method::Picard => Ok(from_profile(&iterate::picard_phase(v, ch, cfg, &IterConfig::default())?.profile)),
    }
}

/// A(k,∞) and |F| from one regular solution.
fn amplitude_and_jost(v: &Potential, ch: &Channel, cfg: &SolverConfig) -> (Option<f64>, Option<f64>) {
    let prof = radial::solve(v, ch, cfg).and_then(|sol| {
        let p = phasefunc::local_phase_from_solution(v, &sol)?;
        let j = absolute::jost_modulus(&sol, &p).ok();
        Ok((p.amplitude_inf, j))
    });
    prof.unwrap_or((None, None))
}

fn channel_rows(v: &Potential, c: ChannelSpec, methods: &[Method], cfg: &SolverConfig) -> Vec<Row> {
    let ch = match Channel::new(c.k, c.ell) {
        Ok(ch) => ch,
        Err(e) => {
            return methods
                .iter()
                .map(|&m| Row {
                    k: c.k,
                    ell: c.ell,
                    method: m,
                    delta: None,
                    err_quad: None,
                    err_tail: None,
                    amplitude_inf: None,
                    jost_modulus: None,
                    max_discrepancy: None,
                    dominated: false,
                    error: Some(e.to_string()),
                })
                .collect()
        }
    };
    let (amp, jost) = amplitude_and_jost(v, &ch, cfg);
    let mut rows: Vec<Row> = methods
        .iter()
        .map(|&m| {
            let out = run_method(v, &ch, m, cfg).and_then(|o| {
                if o.delta.is_finite() && o.err_quad.is_finite() && o.err_tail.is_finite() {
                    Ok(o)
                } else {
                    Err(phasekit::Error::Quadrature("non-finite value in the result".into()))
                }
            });
            match out {
                Ok(o) => Row {
                    k: c.k,
                    ell: c.ell,
                    method: m,
                    delta: Some(o.delta),
                    err_quad: Some(o.err_quad),
                    err_tail: Some(o.err_tail),
                    amplitude_inf: amp,
                    jost_modulus: jost,
                    max_discrepancy: None,
                    dominated: o.dominated,
                    error: None,
                },
                Err(e) => {
                    log::warn!("k = {}, ℓ = {}, {}: {e}", c.k, c.ell, m.name());
                    Row {
                        k: c.k,
                        ell: c.ell,
                        method: m,
                        delta: None,
                        err_quad: None,
                        err_tail: None,
                        amplitude_inf: amp,
                        jost_modulus: jost,
                        max_discrepancy: None,
                        dominated: false,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    let ds: Vec<f64> = rows.iter().filter_map(|r| r.delta).collect();
    if !ds.is_empty() {
        let hi = ds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = ds.iter().copied().fold(f64::INFINITY, f64::min);
        for r in &mut rows {
            r.max_discrepancy = Some(hi - lo);
        }
    }
    rows
}

/// Every channel × method, channels in parallel, rows in config order.
pub fn run(config: &RunConfig, cfg: &SolverConfig) -> Result<RunReport> {
    config.check_runnable()?;
    let v = config.potential()?;
    let per: Vec<Vec<Row>> = config
        .channels
        .par_iter()
        .map(|&c| channel_rows(&v, c, &config.methods, cfg))
        .collect();
    Ok(RunReport { rows: per.into_iter().flatten().collect() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub k: f64,
    pub delta: Option<f64>,
    pub amplitude_inf: Option<f64>,
    pub jost_modulus: Option<f64>,
    pub error: Option<String>,
}

/// n points from k_min to k_max, evenly spaced in log k.
pub fn logspace(k_min: f64, k_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(k_min > 0.0 && k_max >= k_min) || n == 0 {
        bail!("need 0 < k_min ≤ k_max and at least one point");
    }
    if n == 1 {
        return Ok(vec![k_min]);
    }
    let (a, b) = (k_min.ln(), k_max.ln());
    Ok((0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect())
}

pub fn scan(v: &Potential, ks: &[f64], ell: f64, cfg: &SolverConfig) -> Vec<ScanRow> {
    ks.par_iter()
        .map(|&k| {
            let res = Channel::new(k, ell).and_then(|ch| {
                let sol = radial::solve(v, &ch, cfg)?;
                let d = absolute::phase_shift(v, &sol)?.delta;
                let p = phasefunc::local_phase_from_solution(v, &sol)?;
                Ok((d, p.amplitude_inf, absolute::jost_modulus(&sol, &p).ok()))
            });
            match res {
                Ok((d, a, j)) => ScanRow { k, delta: Some(d), amplitude_inf: a, jost_modulus: j, error: None },
                Err(e) => ScanRow { k, delta: None, amplitude_inf: None, jost_modulus: None, error: Some(e.to_string()) },
            }
        })
        .collect()
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut out = String::from("k,delta,amplitude_inf,jost_modulus\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f(Some(r.k)),
            fmt_f(r.delta),
            fmt_f(r.amplitude_inf),
            fmt_f(r.jost_modulus)
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub r: f64,
    pub bound: f64,
    pub abs_delta: f64,
    pub dominates: bool,
}

/// Majorant Δ(k,r) beside |δ(k,r)| on the same knots.
pub fn bound_table(v: &Potential, k: f64, cfg: &SolverConfig) -> Result<Vec<BoundRow>> {
    let ch = Channel::new(k, 0.0)?;
    let maj = iterate::majorant(v, &ch, cfg, &IterConfig::default())?;
    let sol = radial::solve(v, &ch, cfg)?;
    let prof = phasefunc::local_phase_from_solution(v, &sol)?;
    Ok(maj
        .grid
        .iter()
        .zip(&maj.delta_bound)
        .map(|(&r, &b)| {
            let d = if r <= 0.0 { 0.0 } else { prof.delta_at(r).abs() };
            // the same rounding margin the dominance tests allow
            BoundRow { r, bound: b, abs_delta: d, dominates: b + 1e-12 * (1.0 + d) >= d }
        })
        .collect())
}

pub fn bound_csv(rows: &[BoundRow]) -> String {
    let mut out = String::from("r,Delta,abs_delta,dominates\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", fmt_f(Some(r.r)), fmt_f(Some(r.bound)), fmt_f(Some(r.abs_delta)), r.dominates));
    }
    out
}

pub fn twodim_csv(points: &[observables::LowEnergyPoint]) -> String {
    let mut out = String::from("k,delta,product\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", fmt_f(Some(p.k)), fmt_f(Some(p.delta)), fmt_f(Some(p.product))));
    }
    out
}
