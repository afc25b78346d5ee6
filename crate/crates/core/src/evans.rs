//! Evans-type determinants by exterior-power integration of the decaying
//! manifolds, rescaled by the analytic eigenvalue sum of the limit matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, pair, CVec, ExteriorPower, C64};
use crate::linearize::{
    limit_basis, znd_jump_vector, End, FrameKind, NsFrame, RnsFrame, SpectralFrame, Which, ZndFrame,
};
use crate::ode::{Dopri, OdeOptions};
use crate::profile::{ViscousDetonationProfile, ViscousShockProfile, ZndProfile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvansOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Multiplies the default truncation lengths.
    pub length_factor: f64,
    /// Matching point in the frame variable.
    pub matching_point: f64,
    /// Slow/fast switch `|x| = delta` for the viscous detonation.
    pub slow_switch: f64,
    /// Reaction tails are cut where `z` drops below this.
    pub tail_tol: f64,
    /// Half-width of shock layers in the stretched variable.
    pub shock_window: f64,
    /// Below this `|p| / p_ref` the value is a circle mean.
    pub zero_radius: f64,
    pub zero_points: usize,
}

impl Default for EvansOptions {
    fn default() -> Self {
        EvansOptions {
            rtol: 1e-10,
            atol: 1e-12,
            length_factor: 1.0,
            matching_point: 0.0,
            slow_switch: 0.5,
            tail_tol: 1e-8,
            shock_window: 30.0,
            zero_radius: 1e-3,
            zero_points: 16,
        }
    }
}

/// Determinant `value * exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvansValue {
    pub value: C64,
    pub log_scale: f64,
    /// `|omega_-| |omega_+| / |D|` at the matching point.
    pub cond: f64,
}

impl EvansValue {
    fn normalized(value: C64, log_scale: f64, cond: f64) -> Self {
        let r = value.norm();
        if r > 0.0 && r.is_finite() {
            let e = r.ln().floor();
            EvansValue {
                value: value / e.exp(),
                log_scale: log_scale + e,
                cond,
            }
        } else {
            EvansValue { value, log_scale, cond }
        }
    }

    pub fn ln_abs(&self) -> f64 {
        self.value.norm().ln() + self.log_scale
    }

    pub fn arg(&self) -> f64 {
        self.value.arg()
    }

    /// `value * exp(log_scale - reference)`.
    pub fn scaled(&self, reference: f64) -> C64 {
        self.value * (self.log_scale - reference).exp()
    }

    pub fn total(&self) -> C64 {
        self.scaled(0.0)
    }

    pub fn times(&self, f: C64) -> Self {
        EvansValue::normalized(self.value * f, self.log_scale, self.cond)
    }
}

/// Lift of a k-frame at `x`.
#[derive(Debug, Clone)]
pub struct ManifoldState {
    pub omega: CVec,
    pub k: usize,
    pub m: usize,
    pub log_scale: f64,
    pub x: f64,
    /// Sum of the initial growth rates subtracted during integration.
    pub shift: C64,
    pub steps: usize,
}

impl ManifoldState {
    pub fn plucker_residual(&self) -> f64 {
        ExteriorPower::new(self.m, self.k).plucker_residual(&(&self.omega / c(self.omega.norm(), 0.0)))
    }
}

fn renormalize(y: &mut CVec, log_scale: &mut f64) -> bool {
    let r = y.norm();
    if r > 1e3 || (r < 1e-3 && r > 0.0) {
        *y /= c(r, 0.0);
        *log_scale += r.ln();
        true
    } else {
        false
    }
}

/// Integrates `omega' = (G^(k)(p, x) - shift) omega` from `state.x` to `x1`,
/// using the slow variable on the part of the left tail beyond the switch.
fn propagate(frame: &dyn SpectralFrame, p: C64, state: &mut ManifoldState, x1: f64, opts: &EvansOptions) -> Result<()> {
    let ext = ExteriorPower::new(state.m, state.k);
    let mut pieces: Vec<(f64, f64, f64)> = Vec::new();
    let x0 = state.x;
    match frame.slow_scale() {
        Some(eps) => {
            let sw = -opts.slow_switch / eps;
            let lo = x0.min(x1);
            let hi = x0.max(x1);
            if lo < sw && sw < hi {
                if x0 < x1 {
                    pieces.push((x0, sw, eps));
                    pieces.push((sw, x1, 1.0));
                } else {
                    pieces.push((x0, sw, 1.0));
                    pieces.push((sw, x1, eps));
                }
            } else {
                pieces.push((x0, x1, if hi <= sw { eps } else { 1.0 }));
            }
        }
        None => pieces.push((x0, x1, 1.0)),
    }
    let shift = state.shift;
    for (a, b, scale) in pieces {
        if a == b {
            continue;
        }
        let mut rhs = |t: f64, y: &CVec| -> Result<CVec> {
            let g = frame.matrix(p, t / scale)?;
            let mut d = ext.apply(&g, y) - y * shift;
            if scale != 1.0 {
                d /= c(scale, 0.0);
            }
            Ok(d)
        };
        let mut o = OdeOptions::with_tol(opts.rtol, opts.atol);
        o.h_min = 1e-10 * (b - a).abs().max(1.0);
        let mut solver = Dopri::new(&mut rhs, a * scale, state.omega.clone(), o)?;
        let mut ls = state.log_scale;
        let mut on_accept = |_t: f64, y: &mut CVec| -> Result<bool> { Ok(renormalize(y, &mut ls)) };
        solver.advance_to(&mut rhs, b * scale, &mut on_accept)?;
        state.omega = solver.y;
        state.log_scale = ls;
        state.steps += solver.accepted;
    }
    state.x = x1;
    Ok(())
}

/// Decaying manifold from `end` (unstable at -inf, stable at +inf), started
/// from the analytic basis at `-l` or `+l` and carried to `target_x`.
pub fn integrate_manifold(
    frame: &dyn SpectralFrame,
    p: C64,
    end: End,
    l: f64,
    target_x: f64,
    opts: &EvansOptions,
) -> Result<ManifoldState> {
    let which = match end {
        End::Minus => Which::Unstable,
        End::Plus => Which::Stable,
    };
    let cb = limit_basis(frame, end, which, p)?;
    let k = cb.basis.ncols();
    let m = frame.dim();
    let ext = ExteriorPower::new(m, k);
    let mut omega = ext.wedge(&cb.basis);
    let mut log_scale = 0.0;
    let r = omega.norm();
    if r == 0.0 {
        return Err(Error::Lift("initial frame is degenerate".into()));
    }
    omega /= c(r, 0.0);
    log_scale += r.ln();
    let x0 = match end {
        End::Minus => -l,
        End::Plus => l,
    };
    let mut state = ManifoldState {
        omega,
        k,
        m,
        log_scale,
        x: x0,
        shift: cb.eigen_sum,
        steps: 0,
    };
    propagate(frame, p, &mut state, target_x, opts)?;
    let res = state.plucker_residual();
    if res > 1e-6 {
        return Err(Error::Lift(format!("decomposability residual {res:e}")));
    }
    Ok(state)
}

/// `int_{a}^{b} tr G(p, x) dx` by composite Simpson.
fn trace_integral(frame: &dyn SpectralFrame, p: C64, a: f64, b: f64) -> Result<C64> {
    if a == b {
        return Ok(c(0.0, 0.0));
    }
    let n = (((b - a).abs() / 0.005).ceil() as usize).max(2) & !1usize;
    let n = n.max(2);
    let h = (b - a) / n as f64;
    let mut acc = c(0.0, 0.0);
    for i in 0..=n {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += frame.matrix(p, a + h * i as f64)?.trace() * w;
    }
    Ok(acc * (h / 3.0))
}

/// Determinant of the frame at parameter `p`, matched at `opts.matching_point`
/// and transported back to 0 by Abel's formula.
fn determinant_at(frame: &dyn SpectralFrame, p: C64, opts: &EvansOptions) -> Result<EvansValue> {
    let (lm, lp) = frame.default_lengths(opts.tail_tol, opts.shock_window);
    let xm = opts.matching_point;
    let left = integrate_manifold(frame, p, End::Minus, lm * opts.length_factor, xm, opts)?;
    let right = match frame.kind() {
        FrameKind::Znd => {
            let znd = match frame.znd_profile() {
                Some(z) => z,
                None => return Err(Error::Usage("ZND frame without profile".into())),
            };
            let j = znd_jump_vector(znd, p)?;
            let r = j.norm();
            let mut st = ManifoldState {
                omega: if r > 0.0 { &j / c(r, 0.0) } else { j.clone() },
                k: 1,
                m: frame.dim(),
                log_scale: if r > 0.0 { r.ln() } else { 0.0 },
                x: 0.0,
                shift: c(0.0, 0.0),
                steps: 0,
            };
            if xm != 0.0 {
                propagate(frame, p, &mut st, xm, opts)?;
            }
            st
        }
        _ => integrate_manifold(frame, p, End::Plus, lp * opts.length_factor, xm, opts)?,
    };
    let el = ExteriorPower::new(left.m, left.k);
    let er = ExteriorPower::new(right.m, right.k);
    let d = pair(&el, &left.omega, &er, &right.omega);
    let mut log_scale = left.log_scale + right.log_scale;
    let mut value = d;
    if xm != 0.0 {
        // Delta(xm) = e^{(mu_- + mu_+) xm} <omega_-, omega_+>, D = Delta(xm) e^{int_xm^0 tr G}
        let e = (left.shift + right.shift) * xm + trace_integral(frame, p, xm, 0.0)?;
        value *= C64::from_polar(1.0, e.im);
        log_scale += e.re;
    }
    let cond = left.omega.norm() * right.omega.norm() / d.norm().max(1e-300);
    Ok(EvansValue::normalized(value, log_scale, cond))
}

/// Determinant of a frame at physical `lambda`; near the origin, where the
/// limiting splitting degenerates, the value is the mean over a small circle.
pub fn evans_frame(frame: &dyn SpectralFrame, lambda: C64, opts: &EvansOptions) -> Result<EvansValue> {
    let p = frame.parameter(lambda);
    let p0 = frame.reference();
    let r0 = opts.zero_radius * p0;
    if p.norm() >= r0 {
        return determinant_at(frame, p, opts);
    }
    let rad = 2.0 * r0;
    let n = opts.zero_points.max(4);
    let vals = (0..n)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / n as f64;
            determinant_at(frame, p + C64::from_polar(rad, th), opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let reference = vals.iter().map(|v| v.log_scale).fold(f64::NEG_INFINITY, f64::max);
    let mean = vals.iter().map(|v| v.scaled(reference)).sum::<C64>() / n as f64;
    let cond = vals.iter().map(|v| v.cond).fold(0.0, f64::max);
    Ok(EvansValue::normalized(mean, reference, cond))
}

/// Evans–Lopatinski determinant of the ZND profile.
pub fn evans_lopatinski(znd: &ZndProfile, lambda: C64, opts: &EvansOptions) -> Result<EvansValue> {
    evans_frame(&ZndFrame::new(znd), lambda, opts)
}

/// Evans function of the viscous Neumann shock at stretched `lt`.
pub fn evans_ns(shock: &ViscousShockProfile, lt: C64, opts: &EvansOptions) -> Result<EvansValue> {
    evans_frame(&NsFrame::new(shock), lt, opts)
}

/// Evans function of the viscous detonation at physical `lambda`.
pub fn evans_rns(profile: &ViscousDetonationProfile, lambda: C64, opts: &EvansOptions) -> Result<EvansValue> {
    evans_frame(&RnsFrame::new(profile), lambda, opts)
}

/// Something that evaluates a determinant at a spectral point.
pub trait DeterminantSource: Sync {
    fn eval(&self, lambda: C64) -> Result<EvansValue>;
}

impl<F> DeterminantSource for F
where
    F: Fn(C64) -> Result<EvansValue> + Sync,
{
    fn eval(&self, lambda: C64) -> Result<EvansValue> {
        self(lambda)
    }
}

/// Wraps a plain analytic function as a determinant source.
pub fn plain(value: C64) -> EvansValue {
    EvansValue::normalized(value, 0.0, 1.0)
}
