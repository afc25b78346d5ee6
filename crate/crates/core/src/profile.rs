//! Traveling-wave profiles: the ZND detonation, the viscous Neumann shock
//! and the viscous detonation, plus Hermite sampling and a JSON cache.

use std::cell::RefCell;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{real_basis, to_complex, BandMatrix, SpectralGroup};
use crate::model::{GasState, ModelSpec};
use crate::ode::{Dopri, OdeOptions};

pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndStates {
    pub u_minus: Vec<f64>,
    pub u_star: Vec<f64>,
    pub u_plus: Vec<f64>,
    pub s: f64,
    pub z_minus: f64,
    pub z_plus: f64,
}

impl EndStates {
    /// Relative Rankine-Hugoniot defect across the Neumann shock.
    pub fn rh_residual(&self, model: &ModelSpec) -> Result<f64> {
        let fs = model.flux(&self.u_star)?;
        let fp = model.flux(&self.u_plus)?;
        let us = DVector::from_column_slice(&self.u_star);
        let up = DVector::from_column_slice(&self.u_plus);
        let r = (&us - &up) * self.s - (&fs - &fp);
        let scale = 1.0 + fs.amax() + fp.amax() + self.s.abs() * (us.amax() + up.amax());
        Ok(r.amax() / scale)
    }

    /// Defect of the reacting jump `u_* -> u_-` (heat release included).
    pub fn burned_residual(&self, model: &ModelSpec) -> Result<f64> {
        let q = model.heat_release() * (self.z_plus - self.z_minus);
        let fs = model.flux(&self.u_star)?;
        let fm = model.flux(&self.u_minus)?;
        let us = DVector::from_column_slice(&self.u_star);
        let um = DVector::from_column_slice(&self.u_minus);
        let left = &fs - (&us + &q) * self.s;
        let right = &fm - &um * self.s;
        Ok((left - right).amax() / (1.0 + fs.amax() + fm.amax()))
    }

    pub fn minus(&self) -> GasState {
        GasState::new(self.u_minus.clone(), self.z_minus)
    }

    pub fn star(&self) -> GasState {
        GasState::new(self.u_star.clone(), self.z_plus)
    }

    pub fn plus(&self) -> GasState {
        GasState::new(self.u_plus.clone(), self.z_plus)
    }
}

/// Ideal-gas state `(tau, v, E)` from specific volume, velocity and pressure.
pub fn gas_state_from_pressure(model: &ModelSpec, tau: f64, v: f64, p: f64) -> Result<Vec<f64>> {
    match model {
        ModelSpec::IdealGas(g) => {
            if tau <= 0.0 || p <= 0.0 {
                return Err(Error::Domain(format!("tau = {tau} and p = {p} must be positive")));
            }
            Ok(vec![tau, v, p * tau / g.gruneisen + 0.5 * v * v])
        }
        ModelSpec::Majda(_) => Err(Error::Usage("pressure parametrization applies to the ideal gas only".into())),
    }
}

fn speeds(model: &ModelSpec, u: &[f64]) -> Result<Vec<f64>> {
    Ok(model.characteristic_speeds(u)?.iter().map(|e| e.re).collect())
}

const LAX_MARGIN: f64 = 1e-8;

fn check_upstream(model: &ModelSpec, u_plus: &[f64], s: f64) -> Result<()> {
    let a = speeds(model, u_plus)?;
    if let Some((j, v)) = a.iter().enumerate().find(|(_, &v)| v >= s - LAX_MARGIN) {
        return Err(Error::LaxViolation(format!(
            "characteristic a_{} = {v} at u_+ is not below s = {s}",
            j + 1
        )));
    }
    Ok(())
}

/// Lax conditions for the downstream side: `a_{n-1} < s < a_n`.
fn check_downstream(model: &ModelSpec, u: &[f64], s: f64, label: &str) -> Result<()> {
    let a = speeds(model, u)?;
    let n = a.len();
    if a[n - 1] <= s + LAX_MARGIN {
        return Err(Error::LaxViolation(format!("a_{n} = {} at {label} is not above s = {s}", a[n - 1])));
    }
    if n >= 2 && a[n - 2] >= s - LAX_MARGIN {
        return Err(Error::LaxViolation(format!(
            "a_{} = {} at {label} is not below s = {s}",
            n - 1,
            a[n - 2]
        )));
    }
    Ok(())
}

/// Nontrivial Rankine-Hugoniot partner `u_*` of `u_plus` at speed `s`.
pub fn solve_neumann_shock(model: &ModelSpec, u_plus: &[f64], s: f64) -> Result<Vec<f64>> {
    model.flux(u_plus)?;
    check_upstream(model, u_plus, s)?;
    let u_star = match model {
        ModelSpec::Majda(_) => vec![2.0 * s - u_plus[0]],
        ModelSpec::IdealGas(g) => {
            let (tau, v) = (u_plus[0], u_plus[1]);
            let p = model.pressure(u_plus).unwrap();
            let a = (p - s * s * tau) / g.gruneisen + p;
            let c2 = s * s * (1.0 / g.gruneisen + 0.5);
            let t = a / c2;
            if !(t < 0.0) || tau + t <= 0.0 {
                return Err(Error::NoShock(format!("Rayleigh line gives volume jump {t}")));
            }
            gas_state_from_pressure(model, tau + t, v - s * t, p - s * s * t)?
        }
    };
    let gap: f64 = u_star.iter().zip(u_plus).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if gap < 1e-12 {
        return Err(Error::NoShock("only the trivial root was found".into()));
    }
    check_downstream(model, &u_star, s, "u_*")?;
    Ok(u_star)
}

/// Strong-detonation burned state reached from `u_star` by releasing the
/// model's heat.
pub fn solve_burned_state(model: &ModelSpec, u_star: &[f64], s: f64) -> Result<Vec<f64>> {
    let q = model.heat_release_scalar();
    let candidates: Vec<Vec<f64>> = match model {
        ModelSpec::Majda(_) => {
            let us = u_star[0];
            let k = 0.5 * us * us - s * us - s * q;
            let disc = s * s + 2.0 * k;
            if disc < 0.0 {
                return Err(Error::NoBurnedState(format!("discriminant {disc} is negative (q = {q}, s = {s})")));
            }
            vec![vec![s + disc.sqrt()], vec![s - disc.sqrt()]]
        }
        ModelSpec::IdealGas(g) => {
            let (tau, v) = (u_star[0], u_star[1]);
            let p = model.pressure(u_star).unwrap();
            let a = (p - s * s * tau) / g.gruneisen + p;
            let c2 = s * s * (1.0 / g.gruneisen + 0.5);
            let disc = a * a - 4.0 * c2 * q;
            if disc < 0.0 {
                return Err(Error::NoBurnedState(format!("discriminant {disc} is negative (q = {q}, s = {s})")));
            }
            let mut ts = vec![(a - disc.sqrt()) / (2.0 * c2), (a + disc.sqrt()) / (2.0 * c2)];
            ts.sort_by(|x, y| x.abs().partial_cmp(&y.abs()).unwrap());
            ts.into_iter()
                .filter_map(|t| gas_state_from_pressure(model, tau + t, v - s * t, p - s * s * t).ok())
                .collect()
        }
    };
    let mut last_err = Error::NoBurnedState("no admissible root".into());
    for u in candidates {
        if model.flux(&u).is_err() {
            continue;
        }
        match check_downstream(model, &u, s, "u_-") {
            Ok(()) => {
                if q > 0.0 && model.ignition(&u) <= 0.0 {
                    return Err(Error::IgnitionError(format!("ignition vanishes at the burned state {u:?}")));
                }
                return Ok(u);
            }
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

/// Neumann shock and burned state for the given upstream state. With a
/// vanishing rate constant nothing burns and `u_- = u_*`, `z_- = 1`.
pub fn compute_end_states(model: &ModelSpec, u_plus: &[f64], s: f64) -> Result<EndStates> {
    model.validate()?;
    if model.ignition(u_plus) != 0.0 {
        return Err(Error::IgnitionError(format!("ignition is active at the unburned state {u_plus:?}")));
    }
    let u_star = solve_neumann_shock(model, u_plus, s)?;
    let (u_minus, z_minus) = if model.rate() == 0.0 {
        (u_star.clone(), 1.0)
    } else {
        (solve_burned_state(model, &u_star, s)?, 0.0)
    };
    Ok(EndStates {
        u_minus,
        u_star,
        u_plus: u_plus.to_vec(),
        s,
        z_minus,
        z_plus: 1.0,
    })
}

/// Piecewise cubic Hermite curve with node values and exact node slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub dim: usize,
    pub x: Vec<f64>,
    /// Row-major, `dim` entries per node.
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
    /// Constant states used outside the grid.
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub w: Vec<f64>,
    pub dw: Vec<f64>,
    pub extrapolated: bool,
}

impl Sample {
    pub fn state(&self) -> GasState {
        let n = self.w.len() - 1;
        GasState::new(self.w[..n].to_vec(), self.w[n])
    }
}

impl Curve {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn node_slope(&self, i: usize) -> &[f64] {
        &self.slopes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.x.last().unwrap()
    }

    pub fn eval(&self, x: f64) -> Sample {
        let m = self.dim;
        if x < self.x_min() {
            return Sample {
                w: self.left.clone(),
                dw: vec![0.0; m],
                extrapolated: true,
            };
        }
        if x > self.x_max() {
            return Sample {
                w: self.right.clone(),
                dw: vec![0.0; m],
                extrapolated: true,
            };
        }
        let i = self.x.partition_point(|&v| v <= x).saturating_sub(1);
        if self.x[i] == x || i + 1 == self.len() {
            return Sample {
                w: self.node(i).to_vec(),
                dw: self.node_slope(i).to_vec(),
                extrapolated: false,
            };
        }
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        let (y0, y1) = (self.node(i), self.node(i + 1));
        let (m0, m1) = (self.node_slope(i), self.node_slope(i + 1));
        let mut w = vec![0.0; m];
        let mut dw = vec![0.0; m];
        for c in 0..m {
            w[c] = h00 * y0[c] + h10 * h * m0[c] + h01 * y1[c] + h11 * h * m1[c];
            dw[c] = d00 * y0[c] + d10 * m0[c] + d01 * y1[c] + d11 * m1[c];
        }
        Sample {
            w,
            dw,
            extrapolated: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZndOptions {
    pub dx: f64,
    pub tail_tol: f64,
    pub margin: f64,
    pub max_length: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Domain length used when nothing reacts.
    pub inert_length: f64,
}

impl Default for ZndOptions {
    fn default() -> Self {
        ZndOptions {
            dx: 0.01,
            tail_tol: 1e-10,
            margin: 0.2,
            max_length: 5000.0,
            rtol: 1e-11,
            atol: 1e-14,
            inert_length: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZndProfile {
    pub model: ModelSpec,
    pub ends: EndStates,
    /// Value of `f(u) - s (u + q z)` along the profile, fixed at `(u_*, 1)`.
    pub conserved_value: Vec<f64>,
    /// Nodes on `[-L, 0]`, values `(u, z)`.
    pub curve: Curve,
}

impl ZndProfile {
    pub fn length(&self) -> f64 {
        -self.curve.x_min()
    }

    /// Profile sample; constant `(u_+, 1)` ahead of the shock.
    pub fn sample(&self, x: f64) -> Sample {
        if x > 0.0 {
            let mut w = self.ends.u_plus.clone();
            w.push(1.0);
            return Sample {
                dw: vec![0.0; w.len()],
                w,
                extrapolated: false,
            };
        }
        self.curve.eval(x)
    }

    /// Largest relative drift of the conserved relation over the nodes.
    pub fn conserved_drift(&self) -> Result<f64> {
        let n = self.model.n();
        let q = self.model.heat_release();
        let s = self.ends.s;
        let k = DVector::from_column_slice(&self.conserved_value);
        let scale = 1.0 + k.amax();
        let mut worst: f64 = 0.0;
        for i in 0..self.curve.len() {
            let w = self.curve.node(i);
            let u = DVector::from_column_slice(&w[..n]);
            let val = self.model.flux(&w[..n])? - (&u + &q * w[n]) * s;
            worst = worst.max((val - &k).amax() / scale);
        }
        Ok(worst)
    }
}

/// Solves `f(u) - s (u + q z) = k` for `u` by Newton from `guess`.
fn gas_on_conserved_curve(model: &ModelSpec, s: f64, k: &DVector<f64>, z: f64, guess: &[f64]) -> Result<Vec<f64>> {
    let n = model.n();
    let q = model.heat_release();
    let mut u = DVector::from_column_slice(guess);
    let scale = 1.0 + k.amax();
    for _ in 0..60 {
        let g = model.flux(u.as_slice())? - (&u + &q * z) * s - k;
        let mut jac = model.flux_jacobian(u.as_slice())?;
        for i in 0..n {
            jac[(i, i)] -= s;
        }
        let svd = jac.clone().svd(false, false);
        let smin = svd.singular_values.min();
        if smin <= 1e-12 * (1.0 + svd.singular_values.max()) {
            return Err(Error::Transversality(format!("df - s is singular at u = {:?}", u.as_slice())));
        }
        let du = jac
            .lu()
            .solve(&g)
            .ok_or_else(|| Error::Transversality("df - s is singular".into()))?;
        u -= &du;
        if du.amax() <= 1e-15 * (1.0 + u.amax()) && g.amax() <= 1e-13 * scale {
            break;
        }
    }
    let g = model.flux(u.as_slice())? - (&u + &q * z) * s - k;
    if g.amax() > 1e-10 * scale {
        return Err(Error::Convergence {
            msg: format!("conserved relation not solved at z = {z}"),
            residual: g.amax(),
        });
    }
    Ok(u.as_slice().to_vec())
}

/// Profile slopes `(u', z')` from the reaction ODE at a point.
fn znd_slopes(model: &ModelSpec, s: f64, u: &[f64], z: f64) -> Result<Vec<f64>> {
    let n = model.n();
    let dz = model.rate() / s * model.ignition(u) * z;
    let mut jac = model.flux_jacobian(u)?;
    for i in 0..n {
        jac[(i, i)] -= s;
    }
    let rhs = model.heat_release() * (s * dz);
    let du = jac
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Transversality(format!("df - s is singular at u = {u:?}")))?;
    let mut out = du.as_slice().to_vec();
    out.push(dz);
    Ok(out)
}

pub fn compute_znd_profile(model: &ModelSpec, ends: &EndStates, opts: &ZndOptions) -> Result<ZndProfile> {
    let n = model.n();
    let s = ends.s;
    let q = model.heat_release();
    let us = DVector::from_column_slice(&ends.u_star);
    let k = model.flux(&ends.u_star)? - (&us + &q) * s;
    let mut star = ends.u_star.clone();
    star.push(1.0);

    if ends.z_minus >= 1.0 || model.rate() == 0.0 {
        let count = (opts.inert_length / opts.dx).ceil() as usize;
        let x: Vec<f64> = (0..=count).rev().map(|i| -(i as f64) * opts.dx).collect();
        let values: Vec<f64> = x.iter().flat_map(|_| star.iter().copied()).collect();
        let curve = Curve {
            dim: n + 1,
            slopes: vec![0.0; values.len()],
            x,
            values,
            left: star.clone(),
            right: star,
        };
        return Ok(ZndProfile {
            model: *model,
            ends: ends.clone(),
            conserved_value: k.as_slice().to_vec(),
            curve,
        });
    }

    let last_u = RefCell::new(ends.u_star.clone());
    let rate = model.rate() / s;
    let mut rhs = |_x: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
        let z = y[0].clamp(0.0, 1.0);
        let guess = last_u.borrow().clone();
        let u = gas_on_conserved_curve(model, s, &k, z, &guess)?;
        let dz = rate * model.ignition(&u) * y[0];
        *last_u.borrow_mut() = u;
        Ok(DVector::from_element(1, dz))
    };
    let ode = OdeOptions {
        h_max: opts.dx,
        ..OdeOptions::with_tol(opts.rtol, opts.atol)
    };
    let mut solver = Dopri::new(&mut rhs, 0.0, DVector::from_element(1, 1.0), ode)?;
    let mut xs = vec![0.0];
    let mut zs = vec![1.0];
    let mut stop_at: Option<usize> = None;
    let mut i = 0usize;
    loop {
        i += 1;
        let x = -(i as f64) * opts.dx;
        if -x > opts.max_length {
            return Err(Error::DomainExhausted(format!(
                "z = {} still above {} at x = {x}",
                zs.last().unwrap(),
                opts.tail_tol
            )));
        }
        solver.advance_to(&mut rhs, x, &mut |_, _| Ok(false))?;
        xs.push(x);
        zs.push(solver.y[0]);
        if stop_at.is_none() && solver.y[0] <= opts.tail_tol {
            stop_at = Some(i + (opts.margin * i as f64).ceil() as usize);
        }
        if stop_at == Some(i) {
            break;
        }
    }
    let mut values = Vec::with_capacity(xs.len() * (n + 1));
    let mut slopes = Vec::with_capacity(xs.len() * (n + 1));
    let mut guess = ends.u_star.clone();
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.reverse();
    let mut xs_sorted = Vec::with_capacity(xs.len());
    // march from the shock inward for warm starts, then reverse
    let mut rows: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(xs.len());
    for (j, &z) in zs.iter().enumerate() {
        let u = gas_on_conserved_curve(model, s, &k, z, &guess)?;
        let sl = znd_slopes(model, s, &u, z)?;
        guess = u.clone();
        let mut w = u;
        w.push(z);
        rows.push((w, sl));
        let _ = j;
    }
    for &j in &order {
        xs_sorted.push(xs[j]);
        values.extend_from_slice(&rows[j].0);
        slopes.extend_from_slice(&rows[j].1);
    }
    let mut left = ends.u_minus.clone();
    left.push(ends.z_minus);
    let curve = Curve {
        dim: n + 1,
        x: xs_sorted,
        values,
        slopes,
        left,
        right: star,
    };
    Ok(ZndProfile {
        model: *model,
        ends: ends.clone(),
        conserved_value: k.as_slice().to_vec(),
        curve,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShockOptions {
    pub half_width: f64,
    pub dx: f64,
    pub delta: f64,
    pub rtol: f64,
    pub atol: f64,
    pub tail_tol: f64,
}

impl Default for ShockOptions {
    fn default() -> Self {
        ShockOptions {
            half_width: 40.0,
            dx: 0.05,
            delta: 1e-8,
            rtol: 1e-12,
            atol: 1e-14,
            tail_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViscousShockProfile {
    pub model: ModelSpec,
    pub u_star: Vec<f64>,
    pub u_plus: Vec<f64>,
    pub s: f64,
    /// Fast variable nodes, values `(u, 1)`.
    pub curve: Curve,
    pub max_residual: f64,
    pub tail_errors: (f64, f64),
}

impl ViscousShockProfile {
    pub fn sample(&self, xt: f64) -> Sample {
        self.curve.eval(xt)
    }

    /// Relative residual of `B(u) u' = f(u) - f(u_+) - s (u - u_+)` at the nodes.
    pub fn ode_residual(&self) -> Result<f64> {
        let n = self.model.n();
        let fp = self.model.flux(&self.u_plus)?;
        let up = DVector::from_column_slice(&self.u_plus);
        let mut worst: f64 = 0.0;
        for i in 0..self.curve.len() {
            let w = &self.curve.node(i)[..n];
            let dw = DVector::from_column_slice(&self.curve.node_slope(i)[..n]);
            let u = DVector::from_column_slice(w);
            let lhs = self.model.viscosity_full(w) * dw;
            let rhs = self.model.flux(w)? - &fp - (&u - &up) * self.s;
            worst = worst.max((lhs - rhs).amax() / (1.0 + fp.amax()));
        }
        Ok(worst)
    }
}

/// Hyperbolic components from `f_1(u) - s u_1 = target` (linear in `u_1`).
fn hyperbolic_part(model: &ModelSpec, s: f64, u2: &[f64], target: &[f64], reference: &[f64]) -> Result<Vec<f64>> {
    let n1 = model.dim_u1();
    let mut u: Vec<f64> = reference[..n1].to_vec();
    u.extend_from_slice(u2);
    if n1 == 0 {
        return Ok(u);
    }
    for _ in 0..2 {
        let f = model.flux(&u)?;
        let jac = model.flux_jacobian(&u)?;
        let mut a = jac.view((0, 0), (n1, n1)).into_owned();
        for i in 0..n1 {
            a[(i, i)] -= s;
        }
        let g = DVector::from_iterator(n1, (0..n1).map(|i| f[i] - s * u[i] - target[i]));
        let du = a
            .lu()
            .solve(&g)
            .ok_or_else(|| Error::Transversality("df_11 - s is singular".into()))?;
        for i in 0..n1 {
            u[i] -= du[i];
        }
    }
    Ok(u)
}

/// Reduced shock ODE written for the deviation `w = u_2 - u_{*,2}`, so that
/// step control is relative to the distance from the rest point.
struct ShockOde<'a> {
    model: &'a ModelSpec,
    s: f64,
    anchor: Vec<f64>,
    f_anchor: DVector<f64>,
}

impl ShockOde<'_> {
    fn full_state(&self, w2: &[f64]) -> Result<Vec<f64>> {
        let n1 = self.model.dim_u1();
        let target: Vec<f64> = (0..n1).map(|i| self.f_anchor[i] - self.s * self.anchor[i]).collect();
        let u2: Vec<f64> = w2.iter().zip(&self.anchor[n1..]).map(|(a, b)| a + b).collect();
        hyperbolic_part(self.model, self.s, &u2, &target, &self.anchor)
    }

    fn rhs(&self, w2: &[f64]) -> Result<DVector<f64>> {
        let n1 = self.model.dim_u1();
        let n = self.model.n();
        let u = self.full_state(w2)?;
        let f = self.model.flux(&u)?;
        let g = DVector::from_iterator(n - n1, (n1..n).map(|i| (f[i] - self.f_anchor[i]) - self.s * (u[i] - self.anchor[i])));
        self.model
            .viscosity(&u)
            .lu()
            .solve(&g)
            .ok_or_else(|| Error::Structure("viscosity block is singular".into()))
    }

    /// Full-state slopes `u'` given the parabolic slopes.
    fn full_slope(&self, u: &[f64], du2: &DVector<f64>) -> Result<Vec<f64>> {
        let n1 = self.model.dim_u1();
        let n = self.model.n();
        let mut out = vec![0.0; n];
        for i in 0..(n - n1) {
            out[n1 + i] = du2[i];
        }
        if n1 > 0 {
            let jac = self.model.flux_jacobian(u)?;
            let mut a = jac.view((0, 0), (n1, n1)).into_owned();
            for i in 0..n1 {
                a[(i, i)] -= self.s;
            }
            let b = jac.view((0, n1), (n1, n - n1)) * du2;
            let d1 = a
                .lu()
                .solve(&(-b))
                .ok_or_else(|| Error::Transversality("df_11 - s is singular".into()))?;
            out[..n1].copy_from_slice(d1.as_slice());
        }
        Ok(out)
    }
}

fn fd_jacobian<F>(f: F, y: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<DVector<f64>>,
{
    let d = y.len();
    let f0 = f(y)?;
    let mut out = DMatrix::zeros(f0.len(), d);
    for j in 0..d {
        let h = 1e-7 * (1.0 + y[j].abs());
        let mut yp = y.to_vec();
        let mut ym = y.to_vec();
        yp[j] += h;
        ym[j] -= h;
        let col = (f(&yp)? - f(&ym)?) / (2.0 * h);
        out.set_column(j, &col);
    }
    Ok(out)
}

/// Viscous Neumann shock: the orbit leaving `u_star` along its one unstable
/// direction, centered where the first parabolic component crosses the
/// midpoint of its end values.
pub fn compute_ns_shock_profile(
    model: &ModelSpec,
    u_star: &[f64],
    u_plus: &[f64],
    s: f64,
    opts: &ShockOptions,
) -> Result<ViscousShockProfile> {
    let n = model.n();
    let n1 = model.dim_u1();
    let n2 = n - n1;
    let sys = ShockOde {
        model,
        s,
        anchor: u_star.to_vec(),
        f_anchor: model.flux(u_star)?,
    };
    let jac = fd_jacobian(|y| sys.rhs(y), &vec![0.0; n2])?;
    let group = SpectralGroup::from_predicate(&to_complex(&jac), |e| e.re > 0.0)?;
    if group.k != 1 {
        return Err(Error::NoConnection(format!(
            "expected a one-dimensional unstable manifold at u_*, found dimension {}",
            group.k
        )));
    }
    let mu = group.group_eigenvalues()[0].re;
    let basis = real_basis(&group.basis())?;
    let mut r: Vec<f64> = basis.column(0).iter().copied().collect();
    if (u_plus[n1] - u_star[n1]) * r[0] < 0.0 {
        r.iter_mut().for_each(|v| *v = -*v);
    }
    let start: Vec<f64> = r.iter().map(|b| opts.delta * b).collect();
    let mid = 0.5 * (u_plus[n1] - u_star[n1]);
    let ode = OdeOptions {
        h_max: opts.dx,
        ..OdeOptions::with_tol(opts.rtol, opts.atol)
    };
    let mut rhs = |_t: f64, y: &DVector<f64>| sys.rhs(y.as_slice());

    // locate the midpoint crossing
    let sign = (u_plus[n1] - u_star[n1]).signum();
    let mut solver = Dopri::new(&mut rhs, 0.0, DVector::from_column_slice(&start), ode)?;
    let mut t_prev = 0.0;
    let mut y_prev = solver.y.clone();
    let chunk = 0.5;
    loop {
        if solver.x > 1e4 {
            return Err(Error::NoConnection("orbit never reaches the midpoint value".into()));
        }
        let t = solver.x + chunk;
        solver.advance_to(&mut rhs, t, &mut |_, _| Ok(false))?;
        if (solver.y[0] - mid) * sign >= 0.0 {
            break;
        }
        t_prev = solver.x;
        y_prev = solver.y.clone();
    }
    let (mut a, mut b) = (0.0, chunk);
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        let y = crate::ode::integrate(|t, y| rhs(t, y), t_prev, y_prev.clone(), t_prev + m, ode)?;
        if (y[0] - mid) * sign >= 0.0 {
            b = m;
        } else {
            a = m;
        }
        if b - a < 1e-15 * (1.0 + t_prev) {
            break;
        }
    }
    let mut t_c = t_prev + 0.5 * (a + b);

    let count = (2.0 * opts.half_width / opts.dx).round() as usize;
    let xs: Vec<f64> = (0..=count).map(|j| -opts.half_width + j as f64 * opts.dx).collect();
    let centre = xs.iter().position(|&v| v.abs() < 0.5 * opts.dx);
    let mut values = Vec::with_capacity(xs.len() * (n + 1));
    let mut slopes = Vec::with_capacity(xs.len() * (n + 1));
    // the tabulation pass takes other steps than the search; re-centre on it
    for _ in 0..6 {
        values.clear();
        slopes.clear();
        let mut solver = Dopri::new(&mut rhs, 0.0, DVector::from_column_slice(&start), ode)?;
        for &xt in &xs {
            let t = xt + t_c;
            let (w2, dw2) = if t < 0.0 {
                let e = opts.delta * (mu * t).exp();
                let w2: Vec<f64> = r.iter().map(|b| e * b).collect();
                let dw2 = DVector::from_iterator(n2, r.iter().map(|b| mu * e * b));
                (w2, dw2)
            } else {
                solver.advance_to(&mut rhs, t, &mut |_, _| Ok(false))?;
                let w2 = solver.y.as_slice().to_vec();
                let dw2 = sys.rhs(&w2)?;
                (w2, dw2)
            };
            let u = sys.full_state(&w2)?;
            let du = sys.full_slope(&u, &dw2)?;
            values.extend_from_slice(&u);
            values.push(1.0);
            slopes.extend_from_slice(&du);
            slopes.push(0.0);
        }
        let Some(j) = centre else { break };
        let off = values[j * (n + 1) + n1] - (u_star[n1] + mid);
        let slope = slopes[j * (n + 1) + n1];
        if off.abs() <= 1e-13 * (1.0 + u_star[n1].abs()) || slope == 0.0 {
            break;
        }
        t_c -= off / slope;
    }
    let dist = |i: usize, target: &[f64]| -> f64 {
        (0..n).map(|c| (values[i * (n + 1) + c] - target[c]).abs()).fold(0.0, f64::max)
    };
    let tail_errors = (dist(0, u_star), dist(xs.len() - 1, u_plus));
    if tail_errors.1 > opts.tail_tol {
        return Err(Error::NoConnection(format!(
            "orbit ends {:e} away from u_+ at x = {}",
            tail_errors.1, opts.half_width
        )));
    }
    let mut left = u_star.to_vec();
    left.push(1.0);
    let mut right = u_plus.to_vec();
    right.push(1.0);
    let mut prof = ViscousShockProfile {
        model: *model,
        u_star: u_star.to_vec(),
        u_plus: u_plus.to_vec(),
        s,
        curve: Curve {
            dim: n + 1,
            x: xs,
            values,
            slopes,
            left,
            right,
        },
        max_residual: 0.0,
        tail_errors,
    };
    prof.max_residual = prof.ode_residual()?;
    Ok(prof)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetonationOptions {
    pub eps_max: f64,
    /// Fast window `[-window, right]` in the stretched variable.
    pub window: f64,
    pub right: f64,
    pub h_fast: f64,
    pub h_slow: f64,
    pub grading: f64,
    pub tol: f64,
    pub max_newton: usize,
    /// Distance from the shock beyond which the slow estimate is checked.
    pub delta: f64,
    /// Constant in the a-posteriori bounds `K eps`.
    pub bound_constant: f64,
}

impl Default for DetonationOptions {
    fn default() -> Self {
        DetonationOptions {
            eps_max: 0.1,
            window: 30.0,
            right: 40.0,
            h_fast: 0.05,
            h_slow: 0.05,
            grading: 1.1,
            tol: 1e-9,
            max_newton: 40,
            delta: 0.5,
            bound_constant: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetonationDiagnostics {
    pub residual: f64,
    pub newton_iterations: usize,
    /// `sup_{x <= -delta} |W_eps - W_0|`.
    pub slow_error: f64,
    /// `sup_{x >= 0} |W_eps - (u_hat(x/eps), 1)|`.
    pub fast_error: f64,
    pub bound: f64,
    pub bounds_hold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViscousDetonationProfile {
    pub model: ModelSpec,
    pub eps: f64,
    pub ends: EndStates,
    /// Slow-variable nodes, values `(u, z)`.
    pub curve: Curve,
    pub znd: ZndProfile,
    pub shock: ViscousShockProfile,
    pub diagnostics: DetonationDiagnostics,
}

impl ViscousDetonationProfile {
    pub fn sample(&self, x: f64) -> Sample {
        self.curve.eval(x)
    }

    /// Sample in the stretched variable, with slopes in that variable.
    pub fn sample_fast(&self, xt: f64) -> Sample {
        let mut s = self.curve.eval(self.eps * xt);
        s.dw.iter_mut().for_each(|v| *v *= self.eps);
        s
    }
}

/// Reduced traveling-wave system for the viscous detonation in the slow
/// variable: `y = (Y_z, u_2, z)` with `Y_z = -s z - eps C z'`.
struct DetonationOde<'a> {
    model: &'a ModelSpec,
    eps: f64,
    s: f64,
    k_const: DVector<f64>,
    q: DVector<f64>,
    reference: Vec<f64>,
}

impl DetonationOde<'_> {
    fn dim(&self) -> usize {
        self.model.dim_u2() + 2
    }

    fn gas(&self, y: &[f64]) -> Result<Vec<f64>> {
        let n1 = self.model.dim_u1();
        let n2 = self.model.dim_u2();
        let yz = y[0];
        let target: Vec<f64> = (0..n1).map(|i| self.k_const[i] - self.q[i] * yz).collect();
        hyperbolic_part(self.model, self.s, &y[1..1 + n2], &target, &self.reference)
    }

    fn rhs(&self, y: &[f64]) -> Result<DVector<f64>> {
        let n1 = self.model.dim_u1();
        let n = self.model.n();
        let n2 = n - n1;
        let d = self.dim();
        let u = self.gas(y)?;
        let yz = y[0];
        let z = y[d - 1];
        let f = self.model.flux(&u)?;
        let phi = self.model.ignition(&u);
        let mut out = DVector::zeros(d);
        out[0] = -self.model.rate() * z * phi;
        let g = DVector::from_iterator(n2, (n1..n).map(|i| (f[i] - self.s * u[i] - (self.k_const[i] - self.q[i] * yz)) / self.eps));
        let du2 = self
            .model
            .viscosity(&u)
            .lu()
            .solve(&g)
            .ok_or_else(|| Error::Structure("viscosity block is singular".into()))?;
        for i in 0..n2 {
            out[1 + i] = du2[i];
        }
        out[d - 1] = (-self.s * z - yz) / (self.eps * self.model.species_diffusion(&u));
        Ok(out)
    }

    fn jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        fd_jacobian(|v| self.rhs(v), y)
    }
}

fn detonation_mesh(eps: f64, length: f64, opts: &DetonationOptions) -> (Vec<f64>, usize) {
    let hf = opts.h_fast * eps;
    let n_left = (opts.window / opts.h_fast).round() as i64;
    let n_right = (opts.right / opts.h_fast).round() as i64;
    let mut left: Vec<f64> = Vec::new();
    let mut x = -(n_left as f64) * hf;
    let mut h = hf;
    while x > -length {
        h = (h * opts.grading).min(opts.h_slow.max(hf));
        x -= h;
        left.push(x.max(-length));
    }
    left.reverse();
    let zero_index = left.len() + n_left as usize;
    let mut xs = left;
    for j in -n_left..=n_right {
        xs.push(j as f64 * hf);
    }
    (xs, zero_index)
}

/// Solves the viscous detonation profile as a boundary-value problem by
/// damped Newton on a fourth-order collocation scheme.
pub fn compute_viscous_detonation_profile(
    model: &ModelSpec,
    eps: f64,
    znd: &ZndProfile,
    shock: &ViscousShockProfile,
    opts: &DetonationOptions,
) -> Result<ViscousDetonationProfile> {
    if !(eps > 0.0) || eps > opts.eps_max {
        return Err(Error::Usage(format!("eps = {eps} outside (0, {}]", opts.eps_max)));
    }
    let ends = znd.ends.clone();
    let n = model.n();
    let n1 = model.dim_u1();
    let s = ends.s;

    if model.rate() == 0.0 || ends.z_minus >= 1.0 {
        // nothing burns: the detonation is the stretched Neumann shock
        let sc = &shock.curve;
        let curve = Curve {
            dim: sc.dim,
            x: sc.x.iter().map(|v| v * eps).collect(),
            values: sc.values.clone(),
            slopes: sc.slopes.iter().map(|v| v / eps).collect(),
            left: sc.left.clone(),
            right: sc.right.clone(),
        };
        return Ok(ViscousDetonationProfile {
            model: *model,
            eps,
            ends,
            curve,
            znd: znd.clone(),
            shock: shock.clone(),
            diagnostics: DetonationDiagnostics {
                residual: shock.max_residual,
                newton_iterations: 0,
                slow_error: 0.0,
                fast_error: 0.0,
                bound: opts.bound_constant * eps,
                bounds_hold: true,
            },
        });
    }

    let q = model.heat_release();
    let up = DVector::from_column_slice(&ends.u_plus);
    let k_const = model.flux(&ends.u_plus)? - &up * s - &q * s;
    let sys = DetonationOde {
        model,
        eps,
        s,
        k_const,
        q,
        reference: ends.u_plus.clone(),
    };
    let d = sys.dim();
    let (xs, j0) = detonation_mesh(eps, znd.length(), opts);
    let npts = xs.len();

    // composite initial guess
    let mut y = vec![0.0; npts * d];
    for (i, &x) in xs.iter().enumerate() {
        let hat = shock.sample(x / eps);
        let (u, z, dz) = if x <= 0.0 {
            let w0 = znd.sample(x);
            let u: Vec<f64> = (0..n).map(|c| w0.w[c] + hat.w[c] - ends.u_star[c]).collect();
            (u, w0.w[n], w0.dw[n])
        } else {
            (hat.w[..n].to_vec(), 1.0, 0.0)
        };
        let row = &mut y[i * d..(i + 1) * d];
        row[0] = -s * z - eps * model.species_diffusion(&u) * dz;
        row[1..1 + n - n1].copy_from_slice(&u[n1..]);
        row[d - 1] = z;
    }

    // boundary rows
    let mut y_minus = vec![0.0; d];
    y_minus[1..1 + n - n1].copy_from_slice(&ends.u_minus[n1..]);
    y_minus[0] = -s * ends.z_minus;
    y_minus[d - 1] = ends.z_minus;
    let mut y_plus = vec![0.0; d];
    y_plus[0] = -s;
    y_plus[1..1 + n - n1].copy_from_slice(&ends.u_plus[n1..]);
    y_plus[d - 1] = 1.0;
    let jl = sys.jacobian(&y_minus)?;
    let jr = sys.jacobian(&y_plus)?;
    let scale_l = jl.amax();
    let scale_r = jr.amax();
    let left_rows = {
        let g = SpectralGroup::from_predicate(&to_complex(&jl.transpose()), |e| e.re < -1e-9 * scale_l)?;
        real_basis(&g.basis())?.transpose()
    };
    let right_rows = {
        let g = SpectralGroup::from_predicate(&to_complex(&jr.transpose()), |e| e.re > 1e-9 * scale_r)?;
        real_basis(&g.basis())?.transpose()
    };
    let kl_rows = left_rows.nrows();
    let kr_rows = right_rows.nrows() + 1;
    if kl_rows + kr_rows + 1 != d {
        return Err(Error::NoConnection(format!(
            "boundary conditions ({kl_rows} left, {kr_rows} right, 1 phase) do not match system dimension {d}"
        )));
    }
    let mid = 0.5 * (ends.u_star[n1] + ends.u_plus[n1]);

    // row layout: left rows, interval blocks (phase row after interval j0-1), right rows
    let nrows = npts * d;
    let interval_row = |i: usize| kl_rows + i * d + usize::from(i >= j0);
    let phase_row = kl_rows + j0 * d;
    let right_row0 = nrows - kr_rows;

    let residual = |y: &[f64]| -> Result<(Vec<f64>, Vec<DVector<f64>>, Vec<DVector<f64>>, Vec<Vec<f64>>)> {
        let mut r = vec![0.0; nrows];
        let fs: Vec<DVector<f64>> = (0..npts).map(|i| sys.rhs(&y[i * d..(i + 1) * d])).collect::<Result<_>>()?;
        let mut fm = Vec::with_capacity(npts - 1);
        let mut ym_all = Vec::with_capacity(npts - 1);
        for i in 0..npts - 1 {
            let h = xs[i + 1] - xs[i];
            let (a, b) = (&y[i * d..(i + 1) * d], &y[(i + 1) * d..(i + 2) * d]);
            let ym: Vec<f64> = (0..d).map(|c| 0.5 * (a[c] + b[c]) - h / 8.0 * (fs[i + 1][c] - fs[i][c])).collect();
            let f_mid = sys.rhs(&ym)?;
            let row = interval_row(i);
            for c in 0..d {
                r[row + c] = b[c] - a[c] - h / 6.0 * (fs[i][c] + 4.0 * f_mid[c] + fs[i + 1][c]);
            }
            fm.push(f_mid);
            ym_all.push(ym);
        }
        for (rr, lrow) in left_rows.row_iter().enumerate() {
            r[rr] = (0..d).map(|c| lrow[c] * (y[c] - y_minus[c])).sum();
        }
        r[phase_row] = y[j0 * d + 1] - mid;
        let last = &y[(npts - 1) * d..];
        r[right_row0] = last[0] + s;
        for (rr, rrow) in right_rows.row_iter().enumerate() {
            r[right_row0 + 1 + rr] = (0..d).map(|c| rrow[c] * (last[c] - y_plus[c])).sum();
        }
        Ok((r, fs, fm, ym_all))
    };
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let (mut r, mut fs, mut fm, mut ym) = residual(&y)?;
    let mut rnorm = norm(&r);
    let mut iterations = 0;
    while rnorm > opts.tol {
        if iterations >= opts.max_newton {
            return Err(Error::Convergence {
                msg: format!("viscous detonation Newton stalled after {iterations} iterations"),
                residual: rnorm,
            });
        }
        iterations += 1;
        let jn: Vec<DMatrix<f64>> = (0..npts).map(|i| sys.jacobian(&y[i * d..(i + 1) * d])).collect::<Result<_>>()?;
        let mut band = BandMatrix::new(nrows, 2 * d + 1, 2 * d + 1);
        let eye = DMatrix::<f64>::identity(d, d);
        for i in 0..npts - 1 {
            let h = xs[i + 1] - xs[i];
            let jm = sys.jacobian(&ym[i])?;
            let dm_da = &eye * 0.5 + &jn[i] * (h / 8.0);
            let dm_db = &eye * 0.5 - &jn[i + 1] * (h / 8.0);
            let da = -&eye - (&jn[i] + &jm * dm_da * 4.0) * (h / 6.0);
            let db = &eye - (&jn[i + 1] + &jm * dm_db * 4.0) * (h / 6.0);
            let row = interval_row(i);
            for a in 0..d {
                for b in 0..d {
                    band.add(row + a, i * d + b, da[(a, b)]);
                    band.add(row + a, (i + 1) * d + b, db[(a, b)]);
                }
            }
        }
        for (rr, lrow) in left_rows.row_iter().enumerate() {
            for c in 0..d {
                band.add(rr, c, lrow[c]);
            }
        }
        band.add(phase_row, j0 * d + 1, 1.0);
        let base = (npts - 1) * d;
        band.add(right_row0, base, 1.0);
        for (rr, rrow) in right_rows.row_iter().enumerate() {
            for c in 0..d {
                band.add(right_row0 + 1 + rr, base + c, rrow[c]);
            }
        }
        let step = band.solve(&r)?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = y.iter().zip(&step).map(|(a, b)| a - lambda * b).collect();
            if let Ok((r2, fs2, fm2, ym2)) = residual(&trial) {
                let n2 = norm(&r2);
                if n2 < (1.0 - 1e-4 * lambda) * rnorm || n2 <= opts.tol {
                    y = trial;
                    r = r2;
                    fs = fs2;
                    fm = fm2;
                    ym = ym2;
                    rnorm = n2;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-4 {
                return Err(Error::Convergence {
                    msg: "viscous detonation line search failed".into(),
                    residual: rnorm,
                });
            }
        }
    }
    let _ = (&fm, &ym, &r);

    // assemble (u, z) nodes and slopes
    let mut values = Vec::with_capacity(npts * (n + 1));
    let mut slopes = Vec::with_capacity(npts * (n + 1));
    for i in 0..npts {
        let yi = &y[i * d..(i + 1) * d];
        let u = sys.gas(yi)?;
        let f = &fs[i];
        let mut du = vec![0.0; n];
        for c in 0..(n - n1) {
            du[n1 + c] = f[1 + c];
        }
        if n1 > 0 {
            let jac = model.flux_jacobian(&u)?;
            let mut a = jac.view((0, 0), (n1, n1)).into_owned();
            for c in 0..n1 {
                a[(c, c)] -= s;
            }
            let du2 = DVector::from_iterator(n - n1, (0..n - n1).map(|c| f[1 + c]));
            let rhs = DVector::from_iterator(n1, (0..n1).map(|c| -sys.q[c] * f[0])) - jac.view((0, n1), (n1, n - n1)) * du2;
            let d1 = a
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Transversality("df_11 - s is singular".into()))?;
            du[..n1].copy_from_slice(d1.as_slice());
        }
        values.extend_from_slice(&u);
        values.push(yi[d - 1]);
        slopes.extend_from_slice(&du);
        slopes.push(f[d - 1]);
    }
    let mut left = ends.u_minus.clone();
    left.push(ends.z_minus);
    let mut right = ends.u_plus.clone();
    right.push(1.0);
    let curve = Curve {
        dim: n + 1,
        x: xs,
        values,
        slopes,
        left,
        right,
    };

    let mut slow_error: f64 = 0.0;
    let mut fast_error: f64 = 0.0;
    for i in 0..curve.len() {
        let x = curve.x[i];
        let w = curve.node(i);
        if x <= -opts.delta {
            let w0 = znd.sample(x);
            slow_error = slow_error.max((0..=n).map(|c| (w[c] - w0.w[c]).abs()).fold(0.0, f64::max));
        }
        if x >= 0.0 {
            let hat = shock.sample(x / eps);
            fast_error = fast_error.max((0..=n).map(|c| (w[c] - hat.w[c]).abs()).fold(0.0, f64::max));
        }
    }
    let bound = opts.bound_constant * eps;
    Ok(ViscousDetonationProfile {
        model: *model,
        eps,
        ends,
        curve,
        znd: znd.clone(),
        shock: shock.clone(),
        diagnostics: DetonationDiagnostics {
            residual: rnorm,
            newton_iterations: iterations,
            slow_error,
            fast_error,
            bound,
            bounds_hold: slow_error <= bound && fast_error <= bound,
        },
    })
}

/// Any profile, for sampling and caching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnyProfile {
    Znd(ZndProfile),
    Ns(ViscousShockProfile),
    Rns(Box<ViscousDetonationProfile>),
}

impl AnyProfile {
    pub fn model(&self) -> &ModelSpec {
        match self {
            AnyProfile::Znd(p) => &p.model,
            AnyProfile::Ns(p) => &p.model,
            AnyProfile::Rns(p) => &p.model,
        }
    }

    pub fn curve(&self) -> &Curve {
        match self {
            AnyProfile::Znd(p) => &p.curve,
            AnyProfile::Ns(p) => &p.curve,
            AnyProfile::Rns(p) => &p.curve,
        }
    }

    pub fn eps(&self) -> Option<f64> {
        match self {
            AnyProfile::Rns(p) => Some(p.eps),
            _ => None,
        }
    }
}

/// Samples a profile in its native variable (slow for ZND and viscous
/// detonations, fast for the Neumann shock).
pub fn sample_profile(profile: &AnyProfile, x: f64) -> Sample {
    match profile {
        AnyProfile::Znd(p) => p.sample(x),
        AnyProfile::Ns(p) => p.sample(x),
        AnyProfile::Rns(p) => p.sample(x),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub version: u32,
    pub kind: String,
    pub model_hash: String,
    pub eps: Option<f64>,
    pub nodes: usize,
    pub tolerances: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCache {
    pub header: CacheHeader,
    pub profile: AnyProfile,
}

impl ProfileCache {
    pub fn new(profile: AnyProfile, tolerances: serde_json::Value) -> Self {
        let kind = match &profile {
            AnyProfile::Znd(_) => "znd",
            AnyProfile::Ns(_) => "ns",
            AnyProfile::Rns(_) => "rns",
        };
        ProfileCache {
            header: CacheHeader {
                version: CACHE_VERSION,
                kind: kind.into(),
                model_hash: profile.model().hash(),
                eps: profile.eps(),
                nodes: profile.curve().len(),
                tolerances,
            },
            profile,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ProfileCache = serde_json::from_str(text).map_err(|e| Error::Io(format!("bad profile cache: {e}")))?;
        if c.header.version != CACHE_VERSION {
            return Err(Error::Io(format!("unsupported cache version {}", c.header.version)));
        }
        if c.header.model_hash != c.profile.model().hash() {
            return Err(Error::Io("cache header does not match its model".into()));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{IdealGasParams, MajdaParams};

    fn majda() -> ModelSpec {
        ModelSpec::Majda(MajdaParams::default())
    }

    #[test]
    fn majda_end_states() {
        let ends = compute_end_states(&majda(), &[0.0], 1.0).unwrap();
        assert!((ends.u_star[0] - 2.0).abs() < 1e-14);
        assert!((ends.u_minus[0] - (1.0 + 0.4f64.sqrt())).abs() < 1e-14);
        assert!(ends.rh_residual(&majda()).unwrap() < 1e-14);
        assert!(ends.burned_residual(&majda()).unwrap() < 1e-14);
        let u4 = solve_neumann_shock(&majda(), &[0.0], 2.0).unwrap();
        assert!((u4[0] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn majda_burned_state_edge_cases() {
        let m = majda().with_heat_release(0.0);
        assert!((solve_burned_state(&m, &[2.0], 1.0).unwrap()[0] - 2.0).abs() < 1e-14);
        let m = majda().with_heat_release(0.6);
        let e = solve_burned_state(&m, &[2.0], 1.0).unwrap_err();
        assert!(matches!(e, Error::NoBurnedState(_)));
    }

    #[test]
    fn upstream_lax_violation() {
        let e = solve_neumann_shock(&majda(), &[2.0], 1.0).unwrap_err();
        assert!(matches!(e, Error::LaxViolation(_)));
    }

    #[test]
    fn gas_end_states() {
        let m = ModelSpec::IdealGas(IdealGasParams::default());
        let up = gas_state_from_pressure(&m, 1.0, 0.0, 1.0).unwrap();
        let ends = compute_end_states(&m, &up, 3.0).unwrap();
        assert!(ends.rh_residual(&m).unwrap() < 1e-13);
        assert!(ends.burned_residual(&m).unwrap() < 1e-13);
        assert!((ends.u_star[0] - (1.0 - 7.6 / 10.8)).abs() < 1e-13);
        assert!(ends.u_minus[0] > ends.u_star[0]);
    }

    #[test]
    fn hermite_curve_is_exact_at_nodes_and_for_cubics() {
        let f = |x: f64| x * x * x - 2.0 * x;
        let df = |x: f64| 3.0 * x * x - 2.0;
        let x: Vec<f64> = (0..11).map(|i| i as f64 * 0.3).collect();
        let curve = Curve {
            dim: 1,
            values: x.iter().map(|&v| f(v)).collect(),
            slopes: x.iter().map(|&v| df(v)).collect(),
            x,
            left: vec![0.0],
            right: vec![1.0],
        };
        for t in [0.0, 0.3, 0.45, 1.234, 2.99, 3.0] {
            let s = curve.eval(t);
            assert!((s.w[0] - f(t)).abs() < 1e-12);
            assert!((s.dw[0] - df(t)).abs() < 1e-11);
        }
        assert!(curve.eval(5.0).extrapolated);
        assert_eq!(curve.eval(0.3).w[0], f(0.3));
    }

    #[test]
    fn majda_znd_profile_matches_closed_form() {
        let m = majda();
        let ends = compute_end_states(&m, &[0.0], 1.0).unwrap();
        let p = compute_znd_profile(&m, &ends, &ZndOptions::default()).unwrap();
        assert!(p.conserved_drift().unwrap() < 1e-12);
        for i in 0..p.curve.len() {
            let w = p.curve.node(i);
            assert!((w[0] - (1.0 + (0.4 + 0.6 * w[1]).sqrt())).abs() < 1e-12);
        }
        let first = p.curve.node(0);
        assert!(first[1] <= 1e-10);
        assert_eq!(p.sample(0.5).w, vec![0.0, 1.0]);
        assert_eq!(p.sample(0.0).w, vec![2.0, 1.0]);
        let l = p.length();
        assert!(l > 50.0 && l < 90.0, "length {l}");
    }

    #[test]
    fn majda_viscous_shock_is_tanh() {
        let m = majda();
        let prof = compute_ns_shock_profile(&m, &[2.0], &[0.0], 1.0, &ShockOptions::default()).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..prof.curve.len() {
            let x = prof.curve.x[i];
            worst = worst.max((prof.curve.node(i)[0] - (1.0 - (x / 2.0).tanh())).abs());
        }
        assert!(worst < 1e-8, "max error {worst}");
        assert!((prof.sample(0.0).w[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gas_viscous_shock_reaches_end_states() {
        let m = ModelSpec::IdealGas(IdealGasParams::default());
        let up = gas_state_from_pressure(&m, 1.0, 0.0, 1.0).unwrap();
        let us = solve_neumann_shock(&m, &up, 3.0).unwrap();
        let prof = compute_ns_shock_profile(&m, &us, &up, 3.0, &ShockOptions::default()).unwrap();
        assert!(prof.tail_errors.0 < 1e-8 && prof.tail_errors.1 < 1e-8, "{:?}", prof.tail_errors);
        assert!(prof.max_residual < 1e-8);
    }

    #[test]
    fn eps_guard() {
        let m = majda();
        let ends = compute_end_states(&m, &[0.0], 1.0).unwrap();
        let znd = compute_znd_profile(&m, &ends, &ZndOptions::default()).unwrap();
        let shock = compute_ns_shock_profile(&m, &[2.0], &[0.0], 1.0, &ShockOptions::default()).unwrap();
        let e = compute_viscous_detonation_profile(&m, 0.2, &znd, &shock, &DetonationOptions::default()).unwrap_err();
        assert!(e.is_usage());
    }
}
