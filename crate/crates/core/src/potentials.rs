//! Radial potentials, their origin/tail classes and moment integrals.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Improper};

/// Behaviour of the potential as r → 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OriginClass {
    L1AtOrigin,
    /// only rV is integrable near the origin
    Bjk,
    InverseSquare(f64),
    PowerSingular { g: f64, m: f64 },
}

/// Behaviour of the potential as r → ∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailClass {
    CompactSupport(f64),
    IntegrableTail,
    SecondMomentTail,
    LogWeightedTail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Zero,
    /// `strength` on [0, radius)
    Square { strength: f64, radius: f64 },
    /// strength·e^{−r/decay}
    Exponential { strength: f64, decay: f64 },
    /// strength·e^{−μr}/r
    Yukawa { strength: f64, mu: f64 },
    /// λ/r²
    InverseSquare { lambda: f64 },
    /// g/r^m
    PowerSingular { g: f64, m: f64 },
    /// v0·r^{−(1+α)} on (0, radius)
    PowerLaw { v0: f64, alpha: f64, radius: f64 },
    /// λ/r² + strength·e^{−r/decay}
    Composite { lambda: f64, strength: f64, decay: f64 },
    Sum(Vec<Potential>),
    /// linear interpolation; constant below the first node, zero beyond the last
    Tabulated { r: Vec<f64>, v: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub family: Family,
    pub label: String,
}

fn check(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Spec(msg.to_string()))
    }
}

impl Potential {
    pub fn new(family: Family) -> Result<Self> {
        let label = match &family {
            Family::Zero => "zero".to_string(),
            Family::Square { strength, radius } => {
                check(radius.is_finite() && *radius > 0.0, "square: radius must be positive")?;
                check(strength.is_finite(), "square: strength must be finite")?;
                format!("square(strength={strength},radius={radius})")
            }
            Family::Exponential { strength, decay } => {
                check(*decay > 0.0 && decay.is_finite(), "exponential: decay must be positive")?;
                check(strength.is_finite(), "exponential: strength must be finite")?;
                format!("exponential(strength={strength},decay={decay})")
            }
            Family::Yukawa { strength, mu } => {
                check(*mu > 0.0 && mu.is_finite(), "yukawa: mu must be positive")?;
                check(strength.is_finite(), "yukawa: strength must be finite")?;
                format!("yukawa(strength={strength},mu={mu})")
            }
            Family::InverseSquare { lambda } => {
                check(lambda.is_finite(), "inverse_square: lambda must be finite")?;
                format!("inverse_square(lambda={lambda})")
            }
            Family::PowerSingular { g, m } => {
                check(*g > 0.0 && g.is_finite(), "power_singular: g must be positive")?;
                check(*m > 2.0 && m.is_finite(), "power_singular: m must exceed 2")?;
                format!("power_singular(g={g},m={m})")
            }
            Family::PowerLaw { v0, alpha, radius } => {
                check(*alpha > 0.0 && *alpha < 1.0, "power_law: alpha must lie in (0,1)")?;
                check(*radius > 0.0 && radius.is_finite(), "power_law: radius must be positive")?;
                check(v0.is_finite(), "power_law: v0 must be finite")?;
                format!("power_law(v0={v0},alpha={alpha},radius={radius})")
            }
            Family::Composite { lambda, strength, decay } => {
                check(*decay > 0.0 && decay.is_finite(), "composite: decay must be positive")?;
                check(lambda.is_finite() && strength.is_finite(), "composite: parameters must be finite")?;
                format!("composite(lambda={lambda},strength={strength},decay={decay})")
            }
            Family::Sum(parts) => {
                check(!parts.is_empty(), "sum: needs at least one term")?;
                let labels: Vec<&str> = parts.iter().map(|p| p.label.as_str()).collect();
                labels.join("+")
            }
            Family::Tabulated { r, v } => {
                check(r.len() >= 2 && r.len() == v.len(), "tabulated: need at least two [r, V] rows")?;
                check(r[0] > 0.0, "tabulated: radii must be positive")?;
                check(r.windows(2).all(|w| w[1] > w[0]), "tabulated: radii must be strictly increasing")?;
                check(v.iter().all(|x| x.is_finite()), "tabulated: values must be finite")?;
                format!("tabulated({} rows)", r.len())
            }
        };
        Ok(Self { family, label })
    }

    pub fn zero() -> Self {
        Self { family: Family::Zero, label: "zero".into() }
    }

    pub fn square(strength: f64, radius: f64) -> Result<Self> {
        Self::new(Family::Square { strength, radius })
    }

    pub fn exponential(strength: f64, decay: f64) -> Result<Self> {
        Self::new(Family::Exponential { strength, decay })
    }

    pub fn yukawa(strength: f64, mu: f64) -> Result<Self> {
        Self::new(Family::Yukawa { strength, mu })
    }

    pub fn inverse_square(lambda: f64) -> Result<Self> {
        Self::new(Family::InverseSquare { lambda })
    }

    /// The centrifugal term ℓ(ℓ+1)/r².
    pub fn centrifugal(ell: f64) -> Result<Self> {
        Self::inverse_square(ell * (ell + 1.0))
    }

    pub fn power_singular(g: f64, m: f64) -> Result<Self> {
        Self::new(Family::PowerSingular { g, m })
    }

    pub fn power_law(v0: f64, alpha: f64, radius: f64) -> Result<Self> {
        Self::new(Family::PowerLaw { v0, alpha, radius })
    }

    pub fn composite(lambda: f64, strength: f64, decay: f64) -> Result<Self> {
        Self::new(Family::Composite { lambda, strength, decay })
    }

    pub fn sum(parts: Vec<Potential>) -> Result<Self> {
        Self::new(Family::Sum(parts))
    }

    pub fn tabulated(r: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        Self::new(Family::Tabulated { r, v })
    }

    /// Reads whitespace- or comma-separated `r V` rows; `#` starts a comment.
    pub fn tabulated_from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Spec(format!("cannot read {}: {e}", path.display())))?;
        let mut r = Vec::new();
        let mut v = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
            if cols.len() != 2 {
                return Err(Error::Spec(format!("{}:{}: expected two columns", path.display(), n + 1)));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Spec(format!("{}:{}: bad number {s:?}", path.display(), n + 1)))
            };
            r.push(parse(cols[0])?);
            v.push(parse(cols[1])?);
        }
        Self::tabulated(r, v)
    }

    /// V(r) without domain checks.
    pub fn value(&self, r: f64) -> f64 {
        match &self.family {
            Family::Zero => 0.0,
            Family::Square { strength, radius } => {
                if r < *radius {
                    *strength
                } else {
                    0.0
                }
            }
            Family::Exponential { strength, decay } => strength * (-r / decay).exp(),
            Family::Yukawa { strength, mu } => strength * (-mu * r).exp() / r,
            Family::InverseSquare { lambda } => lambda / (r * r),
            Family::PowerSingular { g, m } => g * r.powf(-m),
            Family::PowerLaw { v0, alpha, radius } => {
                if r < *radius {
                    v0 * r.powf(-(1.0 + alpha))
                } else {
                    0.0
                }
            }
            Family::Composite { lambda, strength, decay } => lambda / (r * r) + strength * (-r / decay).exp(),
            Family::Sum(parts) => parts.iter().map(|p| p.value(r)).sum(),
            Family::Tabulated { r: rs, v } => interpolate(rs, v, r),
        }
    }

    /// V(r); rejects r ≤ 0 unless the potential is finite at the origin.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !r.is_finite() || r < 0.0 || (r == 0.0 && self.origin_class() != OriginClass::L1AtOrigin) {
            return Err(Error::Domain(format!("{} evaluated at r = {r}", self.label)));
        }
        Ok(self.value(r))
    }

    /// Strength of the λ/r² part of the potential (0 if absent).
    pub fn inverse_square_strength(&self) -> f64 {
        match &self.family {
            Family::InverseSquare { lambda } | Family::Composite { lambda, .. } => *lambda,
            Family::Sum(parts) => parts.iter().map(|p| p.inverse_square_strength()).sum(),
            _ => 0.0,
        }
    }

    /// V(r) − λ/r².
    pub fn value_rest(&self, r: f64) -> f64 {
        match &self.family {
            Family::InverseSquare { .. } => 0.0,
            Family::Composite { strength, decay, .. } => strength * (-r / decay).exp(),
            Family::Sum(parts) => parts.iter().map(|p| p.value_rest(r)).sum(),
            _ => self.value(r),
        }
    }

    pub fn origin_class(&self) -> OriginClass {
        match &self.family {
            Family::Zero | Family::Square { .. } | Family::Exponential { .. } | Family::Tabulated { .. } => {
                OriginClass::L1AtOrigin
            }
            Family::Yukawa { .. } | Family::PowerLaw { .. } => OriginClass::Bjk,
            Family::InverseSquare { lambda } | Family::Composite { lambda, .. } => {
                if *lambda == 0.0 {
                    OriginClass::L1AtOrigin
                } else {
                    OriginClass::InverseSquare(*lambda)
                }
            }
            Family::PowerSingular { g, m } => OriginClass::PowerSingular { g: *g, m: *m },
            Family::Sum(parts) => {
                let mut best = OriginClass::L1AtOrigin;
                let mut sing: Option<(f64, f64)> = None;
                for p in parts {
                    match p.origin_class() {
                        OriginClass::PowerSingular { g, m } => {
                            sing = match sing {
                                Some((g0, m0)) if m0 > m => Some((g0, m0)),
                                Some((g0, m0)) if m0 == m => Some((g0 + g, m)),
                                _ => Some((g, m)),
                            };
                        }
                        OriginClass::InverseSquare(_) => {
                            best = OriginClass::InverseSquare(0.0);
                        }
                        OriginClass::Bjk => {
                            if best == OriginClass::L1AtOrigin {
                                best = OriginClass::Bjk;
                            }
                        }
                        OriginClass::L1AtOrigin => {}
                    }
                }
                if let Some((g, m)) = sing {
                    if g > 0.0 {
                        return OriginClass::PowerSingular { g, m };
                    }
                }
                if let OriginClass::InverseSquare(_) = best {
                    let l = self.inverse_square_strength();
                    if l != 0.0 {
                        return OriginClass::InverseSquare(l);
                    }
                    // the inverse-square parts cancel
                    return if parts.iter().any(|p| p.origin_class() == OriginClass::Bjk) {
                        OriginClass::Bjk
                    } else {
                        OriginClass::L1AtOrigin
                    };
                }
                best
            }
        }
    }

    /// Declared power p in |V| ~ r^{−p} as r → 0.
    pub fn origin_exponent(&self) -> f64 {
        match &self.family {
            Family::Yukawa { .. } => 1.0,
            Family::PowerLaw { alpha, .. } => 1.0 + alpha,
            Family::Sum(parts) => parts
                .iter()
                .filter(|p| !matches!(p.family, Family::Zero))
                .map(|p| p.origin_exponent())
                .fold(0.0, f64::max),
            _ => match self.origin_class() {
                OriginClass::L1AtOrigin => 0.0,
                OriginClass::Bjk => 1.0,
                OriginClass::InverseSquare(_) => 2.0,
                OriginClass::PowerSingular { m, .. } => m,
            },
        }
    }

    /// Radius beyond which V vanishes identically, if any.
    pub fn support_end(&self) -> Option<f64> {
        match &self.family {
            Family::Zero => Some(0.0),
            Family::Square { radius, .. } | Family::PowerLaw { radius, .. } => Some(*radius),
            Family::Tabulated { r, .. } => r.last().copied(),
            Family::Sum(parts) => {
                let mut end: f64 = 0.0;
                for p in parts {
                    end = end.max(p.support_end()?);
                }
                Some(end)
            }
            _ => None,
        }
    }

    pub fn tail_class(&self) -> TailClass {
        if let Some(r) = self.support_end() {
            return TailClass::CompactSupport(r);
        }
        let p = self
            .power_tail()
            .iter()
            .map(|&(_, p)| p)
            .fold(f64::INFINITY, f64::min);
        if p > 3.0 {
            // exponential tails land here too (p = ∞)
            TailClass::SecondMomentTail
        } else if p > 2.0 {
            TailClass::LogWeightedTail
        } else {
            TailClass::IntegrableTail
        }
    }

    /// Pure power terms c·r^{−p} that persist to infinity.
    pub fn power_tail(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut add = |c: f64, p: f64| {
            if c == 0.0 {
                return;
            }
            if let Some(e) = out.iter_mut().find(|e| e.1 == p) {
                e.0 += c;
            } else {
                out.push((c, p));
            }
        };
        match &self.family {
            Family::InverseSquare { lambda } | Family::Composite { lambda, .. } => add(*lambda, 2.0),
            Family::PowerSingular { g, m } => add(*g, *m),
            Family::Sum(parts) => {
                for p in parts {
                    for (c, q) in p.power_tail() {
                        add(c, q);
                    }
                }
            }
            _ => {}
        }
        out.retain(|e| e.0 != 0.0);
        out
    }

    /// Radii where V or its derivative jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = match &self.family {
            Family::Square { radius, .. } | Family::PowerLaw { radius, .. } => vec![*radius],
            Family::Tabulated { r, .. } => r.clone(),
            Family::Sum(parts) => parts.iter().flat_map(|p| p.breakpoints()).collect(),
            _ => vec![],
        };
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// true when V ≥ 0 everywhere (checked analytically where possible).
    pub fn is_nonnegative(&self) -> bool {
        matches!(self.sign(), 0 | 1)
    }

    pub fn is_nonpositive(&self) -> bool {
        matches!(self.sign(), 0 | -1)
    }

    /// +1, −1 or 0 for single-signed potentials (0 also for V ≡ 0); 2 if mixed.
    fn sign(&self) -> i32 {
        let s = |x: f64| {
            if x > 0.0 {
                1
            } else if x < 0.0 {
                -1
            } else {
                0
            }
        };
        let combine = |a: i32, b: i32| -> i32 {
            if a == 0 {
                b
            } else if b == 0 || a == b {
                a
            } else {
                2
            }
        };
        match &self.family {
            Family::Zero => 0,
            Family::Square { strength, .. } | Family::Exponential { strength, .. } | Family::Yukawa { strength, .. } => {
                s(*strength)
            }
            Family::InverseSquare { lambda } => s(*lambda),
            Family::PowerSingular { .. } => 1,
            Family::PowerLaw { v0, .. } => s(*v0),
            Family::Composite { lambda, strength, .. } => combine(s(*lambda), s(*strength)),
            Family::Sum(parts) => parts.iter().fold(0, |a, p| {
                let b = p.sign();
                if a == 2 || b == 2 {
                    2
                } else {
                    combine(a, b)
                }
            }),
            Family::Tabulated { v, .. } => v.iter().fold(0, |a, &x| if a == 2 { 2 } else { combine(a, s(x)) }),
        }
    }

    /// ∫_R^∞ |V(r)| dr.
    pub fn tail_abs_integral(&self, r: f64) -> Result<f64> {
        let v = match &self.family {
            Family::Zero => 0.0,
            Family::Square { strength, radius } => strength.abs() * (radius - r).max(0.0),
            Family::Exponential { strength, decay } => strength.abs() * decay * (-r / decay).exp(),
            Family::InverseSquare { lambda } => lambda.abs() / r,
            Family::PowerSingular { g, m } => g * r.powf(1.0 - m) / (m - 1.0),
            Family::PowerLaw { v0, alpha, radius } => {
                if r >= *radius {
                    0.0
                } else {
                    v0.abs() * (r.powf(-alpha) - radius.powf(-alpha)) / alpha
                }
            }
            Family::Composite { lambda, strength, decay } if lambda.signum() * strength.signum() >= 0.0 => {
                lambda.abs() / r + strength.abs() * decay * (-r / decay).exp()
            }
            _ => {
                let end = self.support_end().unwrap_or(f64::INFINITY);
                if r >= end {
                    0.0
                } else {
                    let m = self.integrate_abs(|_| 1.0, r, end, 1e-10);
                    match m {
                        Improper::Finite(x) => x,
                        Improper::Infinite(_) => {
                            return Err(Error::UnboundedTail(format!("∫|V| diverges for {}", self.label)))
                        }
                        Improper::NotConverged { partial } => {
                            return Err(Error::Quadrature(format!(
                                "tail of {} (partial {partial:e})",
                                self.label
                            )))
                        }
                    }
                }
            }
        };
        Ok(v)
    }

    /// ∫_a^b w(r)|V(r)| dr split at the breakpoints.
    pub fn integrate_abs<W: Fn(f64) -> f64>(&self, w: W, a: f64, b: f64, rel_tol: f64) -> Improper {
        let mut edges = vec![a];
        edges.extend(self.breakpoints().into_iter().filter(|&x| x > a && x < b));
        edges.push(b);
        let mut total = 0.0;
        let mut bad_origin = false;
        let mut bad_inf = false;
        let mut stalled = false;
        for e in edges.windows(2) {
            match quad::improper_nonneg(|r| w(r) * self.value(r).abs(), e[0], e[1], rel_tol) {
                Improper::Finite(x) => total += x,
                Improper::Infinite(ep) => match ep {
                    quad::Endpoint::Origin => bad_origin = true,
                    quad::Endpoint::Infinity => bad_inf = true,
                    quad::Endpoint::Both => {
                        bad_origin = true;
                        bad_inf = true
                    }
                },
                Improper::NotConverged { partial } => {
                    total += partial;
                    stalled = true;
                }
            }
        }
        match (bad_origin, bad_inf) {
            (true, true) => Improper::Infinite(quad::Endpoint::Both),
            (true, false) => Improper::Infinite(quad::Endpoint::Origin),
            (false, true) => Improper::Infinite(quad::Endpoint::Infinity),
            _ if stalled => Improper::NotConverged { partial: total },
            _ => Improper::Finite(total),
        }
    }

    pub fn to_spec(&self) -> Result<PotentialSpec> {
        let mut params = BTreeMap::new();
        let mut tabulated = None;
        let family = match &self.family {
            Family::Zero => "zero",
            Family::Square { strength, radius } => {
                params.insert("strength".into(), *strength);
                params.insert("radius".into(), *radius);
                "square"
            }
            Family::Exponential { strength, decay } => {
                params.insert("strength".into(), *strength);
                params.insert("decay".into(), *decay);
                "exponential"
            }
            Family::Yukawa { strength, mu } => {
                params.insert("strength".into(), *strength);
                params.insert("mu".into(), *mu);
                "yukawa"
            }
            Family::InverseSquare { lambda } => {
                params.insert("lambda".into(), *lambda);
                "inverse_square"
            }
            Family::PowerSingular { g, m } => {
                params.insert("g".into(), *g);
                params.insert("m".into(), *m);
                "power_singular"
            }
            Family::PowerLaw { v0, alpha, radius } => {
                params.insert("v0".into(), *v0);
                params.insert("alpha".into(), *alpha);
                params.insert("radius".into(), *radius);
                "power_law"
            }
            Family::Composite { lambda, strength, decay } => {
                params.insert("lambda".into(), *lambda);
                params.insert("strength".into(), *strength);
                params.insert("decay".into(), *decay);
                "composite"
            }
            Family::Tabulated { r, v } => {
                tabulated = Some(r.iter().zip(v).map(|(a, b)| [*a, *b]).collect());
                "tabulated"
            }
            Family::Sum(_) => return Err(Error::Spec("sums have no JSON representation".into())),
        };
        Ok(PotentialSpec { family: family.into(), params, tabulated })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: PotentialSpec = serde_json::from_str(text).map_err(|e| Error::Spec(e.to_string()))?;
        spec.build()
    }
}

fn interpolate(rs: &[f64], v: &[f64], r: f64) -> f64 {
    let n = rs.len();
    if r <= rs[0] {
        return v[0];
    }
    if r > rs[n - 1] {
        return 0.0;
    }
    let i = rs.partition_point(|&x| x < r).clamp(1, n - 1);
    let t = (r - rs[i - 1]) / (rs[i] - rs[i - 1]);
    v[i - 1] + t * (v[i] - v[i - 1])
}

/// JSON form `{"family": ..., "params": {...}, "tabulated": [[r, V], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tabulated: Option<Vec<[f64; 2]>>,
}

impl PotentialSpec {
    fn param(&self, name: &str) -> Result<f64> {
        self.params
            .get(name)
            .copied()
            .ok_or_else(|| Error::Spec(format!("{}: missing parameter \"{name}\"", self.family)))
    }

    fn expect_only(&self, names: &[&str]) -> Result<()> {
        for k in self.params.keys() {
            if !names.contains(&k.as_str()) {
                return Err(Error::Spec(format!("{}: unknown parameter \"{k}\"", self.family)));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Potential> {
        let p = |n| self.param(n);
        let f = match self.family.as_str() {
            "zero" => {
                self.expect_only(&[])?;
                Family::Zero
            }
            "square" => {
                self.expect_only(&["strength", "radius"])?;
                Family::Square { strength: p("strength")?, radius: p("radius")? }
            }
            "exponential" => {
                self.expect_only(&["strength", "decay"])?;
                Family::Exponential { strength: p("strength")?, decay: p("decay")? }
            }
            "yukawa" => {
                self.expect_only(&["strength", "mu"])?;
                Family::Yukawa { strength: p("strength")?, mu: p("mu")? }
            }
            "inverse_square" => {
                self.expect_only(&["lambda"])?;
                Family::InverseSquare { lambda: p("lambda")? }
            }
            "power_singular" => {
                self.expect_only(&["g", "m"])?;
                Family::PowerSingular { g: p("g")?, m: p("m")? }
            }
            "power_law" => {
                self.expect_only(&["v0", "alpha", "radius"])?;
                Family::PowerLaw { v0: p("v0")?, alpha: p("alpha")?, radius: p("radius")? }
            }
            "composite" => {
                self.expect_only(&["lambda", "strength", "decay"])?;
                Family::Composite { lambda: p("lambda")?, strength: p("strength")?, decay: p("decay")? }
            }
            "tabulated" => {
                let rows = self
                    .tabulated
                    .as_ref()
                    .ok_or_else(|| Error::Spec("tabulated: missing field \"tabulated\"".into()))?;
                Family::Tabulated { r: rows.iter().map(|x| x[0]).collect(), v: rows.iter().map(|x| x[1]).collect() }
            }
            other => return Err(Error::Spec(format!("unknown family \"{other}\""))),
        };
        Potential::new(f)
    }
}

/// Moment integrals of |V| that decide the integrability class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    /// ∫₀^∞ r|V|
    pub bjk_moment: Improper,
    /// ∫₀^∞ r|V|(1 + |ln r|)
    pub log_moment_origin: Improper,
    /// ∫_a^∞ r|V|(ln r)²
    pub log_moment_tail: Improper,
    /// ∫_R^∞ r²|V|
    pub second_moment_tail: Improper,
    /// ∫₀^∞ r^{2ℓ+2}|V|
    pub ell_moment: Improper,
    pub a: f64,
    pub r_tail: f64,
    pub ell: f64,
}

/// Moments at relative tolerance 1e−8. The log-tail constant `a` is usually 1.
pub fn moments(v: &Potential, a: f64, r_tail: f64, ell: f64) -> Result<MomentReport> {
    if !(a > 0.0) || !(r_tail > 0.0) {
        return Err(Error::Domain("moment radii must be positive".into()));
    }
    let tol = 1e-8;
    let inf = f64::INFINITY;
    Ok(MomentReport {
        bjk_moment: v.integrate_abs(|r| r, 0.0, inf, tol),
        log_moment_origin: v.integrate_abs(|r| r * (1.0 + r.ln().abs()), 0.0, inf, tol),
        log_moment_tail: v.integrate_abs(|r| r * r.ln().powi(2), a, inf, tol),
        second_moment_tail: v.integrate_abs(|r| r * r, r_tail, inf, tol),
        ell_moment: v.integrate_abs(|r| r.powf(2.0 * ell + 2.0), 0.0, inf, tol),
        a,
        r_tail,
        ell,
    })
}

/// (1/k)∫_R^∞ |V|, the largest phase the neglected tail can contribute.
pub fn tail_bound(v: &Potential, k: f64, r: f64) -> Result<f64> {
    if !(k > 0.0) || !(r > 0.0) {
        return Err(Error::Domain(format!("tail_bound needs k > 0 and R > 0 (k={k}, R={r})")));
    }
    Ok(v.tail_abs_integral(r)? / k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use quad::Endpoint;

    #[test]
    fn evaluation_examples() {
        assert_eq!(Potential::square(1.0, 1.0).unwrap().eval(0.5).unwrap(), 1.0);
        assert_eq!(Potential::centrifugal(1.0).unwrap().eval(2.0).unwrap(), 0.5);
        assert_relative_eq!(Potential::power_singular(1.0, 4.0).unwrap().eval(0.1).unwrap(), 1e4, max_relative = 1e-14);
        assert!(Potential::power_singular(1.0, 4.0).unwrap().eval(0.0).is_err());
        assert_eq!(Potential::square(1.0, 1.0).unwrap().eval(0.0).unwrap(), 1.0);
        assert!(Potential::square(1.0, 1.0).unwrap().eval(-1.0).is_err());
    }

    #[test]
    fn moments_of_exponential() {
        let v = Potential::exponential(-3.0, 1.0).unwrap();
        let m = moments(&v, 1.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(m.bjk_moment.value().unwrap(), 3.0, max_relative = 1e-8);
        // ∫ r^2·3e^{−r} = 6
        assert_relative_eq!(m.ell_moment.value().unwrap(), 6.0, max_relative = 1e-8);
        // ∫_1^∞ 3r²e^{−r} = 15/e
        assert_relative_eq!(m.second_moment_tail.value().unwrap(), 15.0 / 1f64.exp(), max_relative = 1e-8);
    }

    #[test]
    fn moments_of_zero_and_inverse_square() {
        let m = moments(&Potential::zero(), 1.0, 1.0, 0.0).unwrap();
        assert_eq!(m.bjk_moment, Improper::Finite(0.0));
        assert_eq!(m.log_moment_tail, Improper::Finite(0.0));
        let m = moments(&Potential::inverse_square(2.0).unwrap(), 1.0, 1.0, 0.0).unwrap();
        assert_eq!(m.bjk_moment, Improper::Infinite(Endpoint::Both));
    }

    #[test]
    fn square_moments_across_the_jump() {
        let v = Potential::square(2.0, 1.5).unwrap();
        let m = moments(&v, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(m.bjk_moment.value().unwrap(), 2.0 * 1.5f64.powi(2) / 2.0, max_relative = 1e-8);
        assert_relative_eq!(m.ell_moment.value().unwrap(), 2.0 * 1.5f64.powi(5) / 5.0, max_relative = 1e-8);
        assert_relative_eq!(m.second_moment_tail.value().unwrap(), 2.0 * (1.5f64.powi(3) - 1.0) / 3.0, max_relative = 1e-8);
    }

    #[test]
    fn tail_bound_examples() {
        let v = Potential::exponential(-3.0, 1.0).unwrap();
        assert_relative_eq!(tail_bound(&v, 1.0, 10.0).unwrap(), 3.0 * (-10.0f64).exp(), max_relative = 1e-12);
        assert_eq!(tail_bound(&Potential::square(1.0, 1.0).unwrap(), 3.0, 2.0).unwrap(), 0.0);
        let g = Potential::power_singular(1.0, 4.0).unwrap();
        assert_relative_eq!(tail_bound(&g, 10.0, 1.0).unwrap(), 1.0 / 30.0, max_relative = 1e-12);
        // numeric route agrees with closed forms
        let y = Potential::sum(vec![v.clone(), Potential::zero()]).unwrap();
        assert_relative_eq!(tail_bound(&y, 1.0, 10.0).unwrap(), 3.0 * (-10.0f64).exp(), max_relative = 1e-8);
    }

    #[test]
    fn tail_bound_is_monotone() {
        let v = Potential::yukawa(2.0, 0.7).unwrap();
        let mut prev = f64::INFINITY;
        for r in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let t = tail_bound(&v, 1.0, r).unwrap();
            assert!(t <= prev);
            assert!(tail_bound(&v, 2.0, r).unwrap() <= t);
            prev = t;
        }
    }

    #[test]
    fn moments_are_monotone_in_the_interval() {
        let v = Potential::yukawa(1.0, 1.0).unwrap();
        let a = v.integrate_abs(|r| r, 0.0, 2.0, 1e-10).value().unwrap();
        let b = v.integrate_abs(|r| r, 0.0, 5.0, 1e-10).value().unwrap();
        assert!(b >= a);
    }

    #[test]
    fn origin_probe_matches_declared_class() {
        let lib = vec![
            Potential::square(1.0, 1.0).unwrap(),
            Potential::exponential(-3.0, 1.0).unwrap(),
            Potential::yukawa(1.0, 1.0).unwrap(),
            Potential::inverse_square(2.0).unwrap(),
            Potential::power_singular(1.0, 4.0).unwrap(),
            Potential::power_singular(2.0, 3.0).unwrap(),
            Potential::power_law(1.0, 0.5, 1.0).unwrap(),
            Potential::composite(2.0, -3.0, 1.0).unwrap(),
            Potential::tabulated(vec![0.5, 1.0, 2.0], vec![1.0, 2.0, 0.0]).unwrap(),
        ];
        for v in &lib {
            let (r1, r2) = (1e-6f64, 1e-3f64);
            let slope = -(v.value(r2).abs().ln() - v.value(r1).abs().ln()) / (r2.ln() - r1.ln());
            assert!((slope - v.origin_exponent()).abs() < 0.05, "{}: slope {slope}", v.label);
        }
    }

    #[test]
    fn classes() {
        assert_eq!(Potential::yukawa(1.0, 1.0).unwrap().origin_class(), OriginClass::Bjk);
        assert_eq!(Potential::composite(2.0, 1.0, 1.0).unwrap().origin_class(), OriginClass::InverseSquare(2.0));
        let s = Potential::sum(vec![Potential::centrifugal(1.0).unwrap(), Potential::exponential(-3.0, 1.0).unwrap()]).unwrap();
        assert_eq!(s.origin_class(), OriginClass::InverseSquare(2.0));
        assert_eq!(s.value_rest(1.0), -3.0 * (-1.0f64).exp());
        assert_eq!(Potential::square(1.0, 2.0).unwrap().tail_class(), TailClass::CompactSupport(2.0));
        assert_eq!(Potential::inverse_square(1.0).unwrap().tail_class(), TailClass::IntegrableTail);
        assert_eq!(Potential::power_singular(1.0, 4.0).unwrap().tail_class(), TailClass::SecondMomentTail);
        assert_eq!(Potential::power_singular(1.0, 3.0).unwrap().tail_class(), TailClass::LogWeightedTail);
        assert!(Potential::square(1.0, 1.0).unwrap().is_nonnegative());
        assert!(!Potential::composite(2.0, -3.0, 1.0).unwrap().is_nonnegative());
    }

    #[test]
    fn json_round_trip_and_errors() {
        let v = Potential::from_json(r#"{"family":"exponential","params":{"strength":-3,"decay":1}}"#).unwrap();
        assert_eq!(v, Potential::exponential(-3.0, 1.0).unwrap());
        let s = serde_json::to_string(&v.to_spec().unwrap()).unwrap();
        assert_eq!(Potential::from_json(&s).unwrap(), v);
        let e = Potential::from_json(r#"{"params":{"strength":1}}"#).unwrap_err();
        assert!(e.to_string().contains("family"));
        let e = Potential::from_json(r#"{"family":"square","params":{"strength":1}}"#).unwrap_err();
        assert!(e.to_string().contains("radius"));
        let t = Potential::from_json(r#"{"family":"tabulated","tabulated":[[0.5,1],[1,2],[2,0]]}"#).unwrap();
        assert_relative_eq!(t.value(1.5), 1.0);
        assert_eq!(t.value(3.0), 0.0);
        assert!(Potential::from_json(r#"{"family":"power_singular","params":{"g":1,"m":2}}"#).is_err());
    }

    #[test]
    fn tabulated_file() {
        let dir = std::env::temp_dir().join(format!("phasekit-tab-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("v.dat");
        std::fs::write(&path, "# r V\n0.1 -1\n0.5, -2\n1.0 0\n").unwrap();
        let v = Potential::tabulated_from_file(&path).unwrap();
        assert_relative_eq!(v.value(0.3), -1.5);
        assert_eq!(v.breakpoints(), vec![0.1, 0.5, 1.0]);
        std::fs::remove_dir_all(&dir).ok();
    }
}
