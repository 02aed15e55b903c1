//! Embedded Runge–Kutta 5(4) pair (Dormand–Prince) with continuous output.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its interpolation coefficients.
#[derive(Debug, Clone)]
pub struct Segment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    coeffs: [[f64; N]; 5],
    /// natural log of the factor the stored values must be multiplied by
    pub log_scale: f64,
}

impl<const N: usize> Segment<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn start(&self) -> [f64; N] {
        self.coeffs[0]
    }

    pub fn end(&self) -> [f64; N] {
        let mut y = [0.0; N];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.coeffs[0][i] + self.coeffs[1][i];
        }
        y
    }

    /// Interpolated state (in this segment's stored scale).
    pub fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let c = &self.coeffs;
        let mut y = [0.0; N];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = c[0][i] + th * (c[1][i] + th1 * (c[2][i] + th * (c[3][i] + th1 * c[4][i])));
        }
        y
    }

    /// Time derivative of the interpolant.
    pub fn eval_derivative(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let c = &self.coeffs;
        let mut y = [0.0; N];
        for (i, yi) in y.iter_mut().enumerate() {
            // y = c0 + c1 θ + c2 θ(1-θ) + c3 θ²(1-θ) + c4 θ²(1-θ)²
            let d = c[1][i]
                + c[2][i] * (1.0 - 2.0 * th)
                + c[3][i] * (2.0 * th - 3.0 * th * th)
                + c[4][i] * (2.0 * th * (1.0 - th) * (1.0 - 2.0 * th));
            *yi = d / self.h;
        }
        y
    }
}

/// Dense solution over an interval (monotone in either direction).
#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    pub segments: Vec<Segment<N>>,
    pub forward: bool,
}

impl<const N: usize> Trajectory<N> {
    pub fn t_start(&self) -> f64 {
        self.segments.first().map(|s| s.t0).unwrap_or(f64::NAN)
    }

    pub fn t_end(&self) -> f64 {
        self.segments.last().map(|s| s.t1()).unwrap_or(f64::NAN)
    }

    pub fn final_state(&self) -> [f64; N] {
        self.segments.last().map(|s| s.end()).unwrap_or([f64::NAN; N])
    }

    /// Index of the segment containing `t` (clamped to the ends).
    pub fn locate(&self, t: f64) -> usize {
        let n = self.segments.len();
        if self.forward {
            self.segments.partition_point(|s| s.t1() < t).min(n - 1)
        } else {
            self.segments.partition_point(|s| s.t1() > t).min(n - 1)
        }
    }

    /// Interpolated state and its log-scale.
    pub fn eval(&self, t: f64) -> ([f64; N], f64) {
        let s = &self.segments[self.locate(t)];
        (s.eval(t), s.log_scale)
    }

    /// Step endpoints including the initial point.
    pub fn knots(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.segments.len() + 1);
        if let Some(s) = self.segments.first() {
            v.push(s.t0);
        }
        v.extend(self.segments.iter().map(|s| s.t1()));
        v
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub h_init: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
    /// for linear homogeneous systems: rescale the state when its max-norm
    /// exceeds this value, recording the factor in the segment log-scale
    pub renormalize_above: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            h_init: 0.0,
            h_max: f64::INFINITY,
            h_min: 1e-300,
            max_steps: 5_000_000,
            renormalize_above: None,
        }
    }
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        out[i] += h * s;
    }
    out
}

/// Integrate `y' = f(t, y)` from `t0` to `t1`, stopping exactly at each of
/// `breakpoints` that lies strictly inside the interval.
///
/// `scale(y_old, y_new, t)` returns the per-component error scale
/// (`atol + rtol·|y|` in the simplest case); a step is accepted when the RMS
/// of `err_i / scale_i` is at most one.
#[allow(clippy::too_many_arguments)]
pub fn integrate<const N: usize, F, S>(
    mut f: F,
    scale: S,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    breakpoints: &[f64],
    ctl: StepControl,
) -> Result<Trajectory<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    S: Fn(&[f64; N], &[f64; N], f64) -> [f64; N],
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut stops: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| (b - t0) * dir > 0.0 && (t1 - b) * dir > 0.0)
        .collect();
    stops.sort_by(|a, b| (a * dir).total_cmp(&(b * dir)));
    stops.push(t1);

    let mut segments: Vec<Segment<N>> = Vec::new();
    let mut t = t0;
    let mut y = y0;
    let mut log_scale = 0.0;
    let mut k1 = f(t, &y);
    let span = (t1 - t0).abs();
    let mut h = if ctl.h_init > 0.0 {
        ctl.h_init
    } else {
        (span * 1e-3).max(1e-12 * t0.abs().max(1.0))
    };
    h = h.min(ctl.h_max);
    let mut steps = 0usize;
    let mut fac_old: f64 = 1e-4;

    for &stop in &stops {
        let mut hit_stop = false;
        while !hit_stop {
            steps += 1;
            if steps > ctl.max_steps {
                return Err(Error::TooManySteps(ctl.max_steps));
            }
            let remaining = (stop - t).abs();
            let mut hh = h.min(ctl.h_max);
            if hh >= remaining * (1.0 - 1e-12) {
                hh = remaining;
                hit_stop = true;
            } else if remaining - hh < 0.25 * hh {
                // two even steps instead of a full one and a sliver
                hh = 0.5 * remaining;
            }
            let hs = hh * dir;
            // at a stop, evaluate the end stages on the near side of a possible jump
            let at_break = hit_stop;
            let t_end_eval = if at_break { stop - dir * stop.abs().max(1e-300) * 4.0 * f64::EPSILON } else { t + hs };
            let k2 = f(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
            let k3 = f(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(
                t + C5 * hs,
                &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = f(
                t_end_eval,
                &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y_new = axpy(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let t_new = if hit_stop { stop } else { t + hs };
            let k7 = f(if at_break { t_end_eval } else { t_new }, &y_new);

            let sc = scale(&y, &y_new, t_new);
            let mut err = 0.0;
            for i in 0..N {
                let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                err += (e / sc[i]).powi(2);
            }
            err = (err / N as f64).sqrt();
            let finite = y_new.iter().all(|v| v.is_finite()) && err.is_finite();

            if finite && err <= 1.0 {
                let mut c = [[0.0; N]; 5];
                for i in 0..N {
                    let ydiff = y_new[i] - y[i];
                    let bspl = hs * k1[i] - ydiff;
                    c[0][i] = y[i];
                    c[1][i] = ydiff;
                    c[2][i] = bspl;
                    c[3][i] = ydiff - hs * k7[i] - bspl;
                    c[4][i] = hs
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                segments.push(Segment { t0: t, h: hs, coeffs: c, log_scale });
                t = t_new;
                y = y_new;
                k1 = if at_break { f(t, &y) } else { k7 };
                if let Some(limit) = ctl.renormalize_above {
                    let m = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                    if m > limit {
                        for v in y.iter_mut() {
                            *v /= m;
                        }
                        for v in k1.iter_mut() {
                            *v /= m;
                        }
                        log_scale += m.ln();
                    }
                }
                // Lund-stabilized step-size update
                let fac = (err.max(1e-10)).powf(0.2 - 0.04 * 0.75) / fac_old.powf(0.04);
                let fac = (fac / 0.9).clamp(0.2, 10.0);
                fac_old = err.max(1e-4);
                if !hit_stop {
                    h = (hh / fac).min(ctl.h_max);
                }
            } else {
                hit_stop = false;
                let shrink = if finite { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
                h = hh * shrink;
                if h < ctl.h_min || h <= 1e-15 * t.abs() {
                    return Err(Error::StepCollapse { r: t + h * dir, last_good: t });
                }
            }
        }
    }
    Ok(Trajectory { segments, forward: dir > 0.0 })
}

/// Mixed absolute/relative componentwise error scale.
pub fn componentwise<const N: usize>(
    rtol: f64,
    atol: [f64; N],
) -> impl Fn(&[f64; N], &[f64; N], f64) -> [f64; N] {
    move |a: &[f64; N], b: &[f64; N], _t: f64| {
        let mut s = [0.0; N];
        for i in 0..N {
            s[i] = atol[i] + rtol * a[i].abs().max(b[i].abs());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn harmonic_oscillator_to_high_accuracy() {
        let traj = integrate(
            |_t, y: &[f64; 2]| [y[1], -y[0]],
            componentwise(1e-11, [1e-13; 2]),
            0.0,
            [0.0, 1.0],
            20.0,
            &[],
            StepControl::default(),
        )
        .unwrap();
        let y = traj.final_state();
        assert_relative_eq!(y[0], 20f64.sin(), epsilon = 1e-8);
        // dense output at an interior point
        let (yi, _) = traj.eval(7.3);
        assert_relative_eq!(yi[0], 7.3f64.sin(), epsilon = 1e-8);
        let s = &traj.segments[traj.locate(7.3)];
        assert_relative_eq!(s.eval_derivative(7.3)[0], 7.3f64.cos(), epsilon = 1e-6);
    }

    #[test]
    fn stops_exactly_at_breakpoints() {
        let traj = integrate(
            |t, _y: &[f64; 1]| [if t < 1.0 { 1.0 } else { 2.0 }],
            componentwise(1e-10, [1e-12]),
            0.0,
            [0.0],
            2.0,
            &[1.0],
            StepControl::default(),
        )
        .unwrap();
        assert!(traj.knots().contains(&1.0));
        assert_relative_eq!(traj.final_state()[0], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn backward_integration() {
        let traj = integrate(
            |_t, y: &[f64; 1]| [y[0]],
            componentwise(1e-11, [1e-14]),
            1.0,
            [1.0],
            0.0,
            &[],
            StepControl::default(),
        )
        .unwrap();
        assert_relative_eq!(traj.final_state()[0], (-1.0f64).exp(), epsilon = 1e-9);
        let (y, _) = traj.eval(0.5);
        assert_relative_eq!(y[0], (-0.5f64).exp(), epsilon = 1e-9);
    }

    #[test]
    fn renormalization_tracks_log_scale() {
        let ctl = StepControl { renormalize_above: Some(1e10), ..Default::default() };
        let traj = integrate(
            |_t, y: &[f64; 1]| [y[0]],
            componentwise(1e-11, [0.0]),
            0.0,
            [1.0],
            60.0,
            &[],
            ctl,
        )
        .unwrap();
        let last = traj.segments.last().unwrap();
        let total = last.end()[0].ln() + last.log_scale;
        assert_relative_eq!(total, 60.0, epsilon = 1e-8);
    }
}
