//! Quadrature kernels: adaptive Gauss–Kronrod, Gauss–Legendre panels with
//! cumulative integration matrices, and a logarithmic panel walker for
//! integrals over `(0, ∞)` that must decide convergence numerically.

use std::collections::BinaryHeap;

// 21-point Kronrod abscissae and weights with the embedded 10-point Gauss rule.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_729_564_861_040,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// One 21-point Kronrod evaluation on `[a, b]`. Returns `(estimate, error)`.
pub fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        res_k += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let value = res_k * half;
    let err = ((res_k - res_g) * half).abs();
    (value, err)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    pub intervals: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive bisection driven by the 21-point Kronrod rule.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> QuadResult {
    if a == b {
        return QuadResult { value: 0.0, error: 0.0, converged: true, intervals: 0 };
    }
    let (v, e) = gk21(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value: v, error: e });
    let mut total = v;
    let mut total_err = e;
    let mut count = 1;
    while total_err > abs_tol.max(rel_tol * total.abs()) && count < max_intervals {
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid);
        let (v2, e2) = gk21(&mut f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Piece { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, error: e2 });
        count += 1;
    }
    // re-sum to shed accumulated rounding from the running updates
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    QuadResult {
        value,
        error,
        converged: error <= abs_tol.max(rel_tol * value.abs()),
        intervals: count,
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            } else {
                for j in 2..=n {
                    let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// A Gauss–Legendre panel rule with its cumulative integration matrix.
///
/// `cumulative[i][j]` is the integral over `[-1, x_i]` of the `j`-th Lagrange
/// basis polynomial through the nodes, so that integrals from the panel start
/// to every node follow from one matrix–vector product.
#[derive(Debug, Clone)]
pub struct PanelRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub cumulative: Vec<Vec<f64>>,
}

impl PanelRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        let (qx, qw) = gauss_legendre(n + 2);
        let lagrange = |j: usize, x: f64| -> f64 {
            let mut p = 1.0;
            for (m, &xm) in nodes.iter().enumerate() {
                if m != j {
                    p *= (x - xm) / (nodes[j] - xm);
                }
            }
            p
        };
        let mut cumulative = vec![vec![0.0; n]; n];
        for i in 0..n {
            let hi = nodes[i];
            let half = 0.5 * (hi + 1.0);
            let mid = 0.5 * (hi - 1.0);
            for j in 0..n {
                let mut s = 0.0;
                for (t, wt) in qx.iter().zip(&qw) {
                    s += wt * lagrange(j, mid + half * t);
                }
                cumulative[i][j] = s * half;
            }
        }
        Self { nodes, weights, cumulative }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Physical node positions on `[a, b]`.
    pub fn map(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().map(move |x| mid + half * x)
    }
}

/// Which end of `(0, ∞)` an improper integral fails at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Endpoint {
    Origin,
    Infinity,
    Both,
}

/// Outcome of an integral whose finiteness is decided numerically.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Improper {
    Finite(f64),
    Infinite(Endpoint),
    NotConverged { partial: f64 },
}

impl Improper {
    pub fn value(&self) -> Option<f64> {
        match self {
            Improper::Finite(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Improper::Finite(_))
    }
}

pub(crate) const DIVERGENCE_THRESHOLD: f64 = 1e12;
// e^230 ≈ 1e100 keeps r³ and r^{-3} representable
const LOG_LIMIT: f64 = 230.0;

enum Walk {
    Done(f64),
    Diverged,
    Stalled(f64),
}

/// Sum e-fold panels (in `t = ln r`) of a non-negative integrand moving away
/// from `t_start` in direction `dir` until the increments are negligible.
fn walk_panels<F: FnMut(f64) -> f64>(f: &mut F, t_start: f64, dir: f64, rel_tol: f64) -> Walk {
    let mut sum = 0.0;
    let mut prev_inc = f64::INFINITY;
    let mut non_decreasing = 0usize;
    let mut small = 0usize;
    let mut t = t_start;
    while t.abs() < LOG_LIMIT {
        let t_next = t + dir;
        let (lo, hi) = if dir > 0.0 { (t, t_next) } else { (t_next, t) };
        let q = adaptive(
            |s: f64| {
                let r = s.exp();
                f(r) * r
            },
            lo,
            hi,
            0.0,
            rel_tol * 0.1,
            200,
        );
        let inc = q.value.abs();
        sum += inc;
        if !sum.is_finite() {
            return Walk::Diverged;
        }
        if inc >= prev_inc * (1.0 - 1e-9) && inc > 0.0 {
            non_decreasing += 1;
        } else {
            non_decreasing = 0;
        }
        if sum > DIVERGENCE_THRESHOLD && non_decreasing > 0 {
            return Walk::Diverged;
        }
        if inc <= rel_tol * 1e-2 * sum || (sum == 0.0 && inc == 0.0) {
            small += 1;
            if small >= 3 {
                return Walk::Done(sum);
            }
        } else {
            small = 0;
        }
        prev_inc = inc;
        t = t_next;
    }
    // hit the representable range: non-decaying increments mean divergence
    if non_decreasing >= 3 || prev_inc > rel_tol * sum {
        if non_decreasing >= 3 || prev_inc > 1e-3 * sum {
            Walk::Diverged
        } else {
            Walk::Stalled(sum)
        }
    } else {
        Walk::Done(sum)
    }
}

/// Integral of a non-negative function over `[a, b]` where `a` may be 0 and
/// `b` may be infinite. Endpoint behavior is resolved with the substitution
/// `r = e^t`, walking unit panels outward until convergence or divergence.
pub fn improper_nonneg<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64) -> Improper {
    assert!(a >= 0.0 && b > a);
    let mut total = 0.0;
    let mut origin_bad = false;
    let mut inf_bad = false;
    let mut stalled = false;

    let lo_core = if a == 0.0 { b.min(1.0) } else { a };
    let hi_core = if b.is_infinite() { lo_core.max(1.0).max(a) } else { b };

    if a == 0.0 {
        match walk_panels(&mut f, lo_core.ln(), -1.0, rel_tol) {
            Walk::Done(v) => total += v,
            Walk::Diverged => origin_bad = true,
            Walk::Stalled(v) => {
                total += v;
                stalled = true;
            }
        }
    }
    if hi_core > lo_core {
        let q = adaptive(
            |s: f64| {
                let r = s.exp();
                f(r) * r
            },
            lo_core.ln(),
            hi_core.ln(),
            0.0,
            rel_tol * 0.1,
            2000,
        );
        total += q.value;
        if !q.converged && q.error > rel_tol * q.value.abs() {
            stalled = true;
        }
    }
    if b.is_infinite() {
        match walk_panels(&mut f, hi_core.ln(), 1.0, rel_tol) {
            Walk::Done(v) => total += v,
            Walk::Diverged => inf_bad = true,
            Walk::Stalled(v) => {
                total += v;
                stalled = true;
            }
        }
    }
    match (origin_bad, inf_bad) {
        (true, true) => Improper::Infinite(Endpoint::Both),
        (true, false) => Improper::Infinite(Endpoint::Origin),
        (false, true) => Improper::Infinite(Endpoint::Infinity),
        _ if stalled => Improper::NotConverged { partial: total },
        _ => Improper::Finite(total),
    }
}
