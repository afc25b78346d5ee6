//! Reactive-flow models `u_t + f(u)_x = eps (B(u) u_x)_x + k q phi(u) z`,
//! `z_t = eps (C(u) z_x)_x - k phi(u) z`, with a Majda-type scalar instance
//! and the Lagrangian ideal gas.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, eigenvalues_real, to_complex, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MajdaParams {
    pub q: f64,
    pub k: f64,
    pub u_ig: f64,
    /// Ignition steepness `T_A`.
    pub activation: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for MajdaParams {
    fn default() -> Self {
        MajdaParams {
            q: 0.3,
            k: 1.0,
            u_ig: 0.5,
            activation: 1.0,
            b: 1.0,
            c: 1.0,
        }
    }
}

/// Ideal gas in Lagrangian coordinates. The gas vector is `(tau, v, E)`
/// with `E = e + v^2/2`; the chemical energy `q z` is carried by the
/// reaction source instead of the stored energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdealGasParams {
    pub gruneisen: f64,
    pub specific_heat: f64,
    pub nu: f64,
    pub kappa: f64,
    pub d: f64,
    pub k: f64,
    pub q: f64,
    pub t_ignition: f64,
    pub activation: f64,
}

impl Default for IdealGasParams {
    fn default() -> Self {
        IdealGasParams {
            gruneisen: 0.4,
            specific_heat: 1.0,
            nu: 1.0,
            kappa: 1.0,
            d: 1.0,
            k: 1.0,
            q: 0.5,
            t_ignition: 4.0,
            activation: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Majda(MajdaParams),
    IdealGas(IdealGasParams),
}

/// Gas variables plus reactant mass fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasState {
    pub u: Vec<f64>,
    pub z: f64,
}

impl GasState {
    pub fn new(u: Vec<f64>, z: f64) -> Self {
        GasState { u, z }
    }

    pub fn gas(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.u)
    }
}

/// `exp(-a / (t - t0))` above `t0`, zero otherwise.
fn smooth_switch(t: f64, t0: f64, a: f64) -> f64 {
    if t > t0 {
        (-a / (t - t0)).exp()
    } else {
        0.0
    }
}

fn smooth_switch_derivative(t: f64, t0: f64, a: f64) -> f64 {
    if t > t0 {
        let d = t - t0;
        (-a / d).exp() * a / (d * d)
    } else {
        0.0
    }
}

impl ModelSpec {
    pub fn majda(p: MajdaParams) -> Self {
        ModelSpec::Majda(p)
    }

    pub fn ideal_gas(p: IdealGasParams) -> Self {
        ModelSpec::IdealGas(p)
    }

    pub fn n(&self) -> usize {
        self.dim_u1() + self.dim_u2()
    }

    pub fn dim_u1(&self) -> usize {
        match self {
            ModelSpec::Majda(_) => 0,
            ModelSpec::IdealGas(_) => 1,
        }
    }

    pub fn dim_u2(&self) -> usize {
        match self {
            ModelSpec::Majda(_) => 1,
            ModelSpec::IdealGas(_) => 2,
        }
    }

    /// Number of parabolic unknowns including the species.
    pub fn r(&self) -> usize {
        self.dim_u2() + 1
    }

    pub fn rate(&self) -> f64 {
        match self {
            ModelSpec::Majda(p) => p.k,
            ModelSpec::IdealGas(p) => p.k,
        }
    }

    pub fn heat_release_scalar(&self) -> f64 {
        match self {
            ModelSpec::Majda(p) => p.q,
            ModelSpec::IdealGas(p) => p.q,
        }
    }

    /// The n-vector `q` multiplying the reaction source in the gas equations.
    pub fn heat_release(&self) -> DVector<f64> {
        match self {
            ModelSpec::Majda(p) => DVector::from_element(1, p.q),
            ModelSpec::IdealGas(p) => DVector::from_vec(vec![0.0, 0.0, p.q]),
        }
    }

    /// Copy of the model with another rate constant.
    pub fn with_rate(&self, k: f64) -> Self {
        match *self {
            ModelSpec::Majda(p) => ModelSpec::Majda(MajdaParams { k, ..p }),
            ModelSpec::IdealGas(p) => ModelSpec::IdealGas(IdealGasParams { k, ..p }),
        }
    }

    pub fn with_heat_release(&self, q: f64) -> Self {
        match *self {
            ModelSpec::Majda(p) => ModelSpec::Majda(MajdaParams { q, ..p }),
            ModelSpec::IdealGas(p) => ModelSpec::IdealGas(IdealGasParams { q, ..p }),
        }
    }

    /// Copy with the viscous and diffusive coefficients scaled by `factor`.
    pub fn with_dissipation_scaled(&self, factor: f64) -> Self {
        match *self {
            ModelSpec::Majda(p) => ModelSpec::Majda(MajdaParams {
                b: p.b * factor,
                ..p
            }),
            ModelSpec::IdealGas(p) => ModelSpec::IdealGas(IdealGasParams {
                nu: p.nu * factor,
                kappa: p.kappa * factor,
                ..p
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, v: f64| Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
        // k = 0 switches the reaction off
        let k = match self {
            ModelSpec::Majda(p) => p.k,
            ModelSpec::IdealGas(p) => p.k,
        };
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::Config(format!("k must be nonnegative and finite, got {k}")));
        }
        match self {
            ModelSpec::Majda(p) => {
                for (name, v) in [("activation", p.activation), ("b", p.b), ("c", p.c)] {
                    if !(v > 0.0 && v.is_finite()) {
                        return bad(name, v);
                    }
                }
                if !(p.q >= 0.0 && p.q.is_finite()) {
                    return Err(Error::Config(format!("q must be nonnegative, got {}", p.q)));
                }
                if !p.u_ig.is_finite() {
                    return Err(Error::Config("u_ig must be finite".into()));
                }
            }
            ModelSpec::IdealGas(p) => {
                for (name, v) in [
                    ("gruneisen", p.gruneisen),
                    ("specific_heat", p.specific_heat),
                    ("nu", p.nu),
                    ("kappa", p.kappa),
                    ("d", p.d),
                    ("activation", p.activation),
                    ("t_ignition", p.t_ignition),
                ] {
                    if !(v > 0.0 && v.is_finite()) {
                        return bad(name, v);
                    }
                }
                if !(p.q >= 0.0 && p.q.is_finite()) {
                    return Err(Error::Config(format!("q must be nonnegative, got {}", p.q)));
                }
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("model serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn check_admissible(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.n() {
            return Err(Error::Domain(format!("expected {} gas components, got {}", self.n(), u.len())));
        }
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("component {i} is not finite")));
        }
        if let ModelSpec::IdealGas(_) = self {
            if u[0] <= 0.0 {
                return Err(Error::Domain(format!("specific volume tau = {} is not positive", u[0])));
            }
            let e = u[2] - 0.5 * u[1] * u[1];
            if e <= 0.0 {
                return Err(Error::Domain(format!("internal energy e = {e} is not positive")));
            }
        }
        Ok(())
    }

    /// Scalar argument of the ignition function: `u` (Majda) or `T = e/c`.
    pub fn temperature(&self, u: &[f64]) -> f64 {
        match self {
            ModelSpec::Majda(_) => u[0],
            ModelSpec::IdealGas(p) => (u[2] - 0.5 * u[1] * u[1]) / p.specific_heat,
        }
    }

    fn temperature_gradient(&self, u: &[f64]) -> DVector<f64> {
        match self {
            ModelSpec::Majda(_) => DVector::from_element(1, 1.0),
            ModelSpec::IdealGas(p) => {
                DVector::from_vec(vec![0.0, -u[1] / p.specific_heat, 1.0 / p.specific_heat])
            }
        }
    }

    /// Pressure (ideal gas only).
    pub fn pressure(&self, u: &[f64]) -> Option<f64> {
        match self {
            ModelSpec::Majda(_) => None,
            ModelSpec::IdealGas(p) => Some(p.gruneisen * (u[2] - 0.5 * u[1] * u[1]) / u[0]),
        }
    }

    pub fn flux(&self, u: &[f64]) -> Result<DVector<f64>> {
        self.check_admissible(u)?;
        Ok(match self {
            ModelSpec::Majda(_) => DVector::from_element(1, 0.5 * u[0] * u[0]),
            ModelSpec::IdealGas(_) => {
                let p = self.pressure(u).unwrap();
                DVector::from_vec(vec![-u[1], p, p * u[1]])
            }
        })
    }

    pub fn flux_jacobian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        self.check_admissible(u)?;
        Ok(match self {
            ModelSpec::Majda(_) => DMatrix::from_element(1, 1, u[0]),
            ModelSpec::IdealGas(g) => {
                let (tau, v) = (u[0], u[1]);
                let p = self.pressure(u).unwrap();
                let p_tau = -p / tau;
                let p_v = -g.gruneisen * v / tau;
                let p_e = g.gruneisen / tau;
                DMatrix::from_row_slice(
                    3,
                    3,
                    &[0.0, -1.0, 0.0, p_tau, p_v, p_e, v * p_tau, p + v * p_v, v * p_e],
                )
            }
        })
    }

    /// Parabolic block `b(u)` of the viscosity matrix (dim_u2 × dim_u2).
    pub fn viscosity(&self, u: &[f64]) -> DMatrix<f64> {
        match self {
            ModelSpec::Majda(p) => DMatrix::from_element(1, 1, p.b),
            ModelSpec::IdealGas(g) => {
                let (tau, v) = (u[0], u[1]);
                let kc = g.kappa / g.specific_heat;
                DMatrix::from_row_slice(2, 2, &[g.nu / tau, 0.0, (g.nu - kc) * v / tau, kc / tau])
            }
        }
    }

    /// Partial derivatives `d b / d u_j`, one matrix per gas component.
    pub fn viscosity_derivatives(&self, u: &[f64]) -> Vec<DMatrix<f64>> {
        match self {
            ModelSpec::Majda(_) => vec![DMatrix::zeros(1, 1)],
            ModelSpec::IdealGas(g) => {
                let tau = u[0];
                let kc = g.kappa / g.specific_heat;
                let b = self.viscosity(u);
                let d_tau = -b / tau;
                let d_v = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, (g.nu - kc) / tau, 0.0]);
                vec![d_tau, d_v, DMatrix::zeros(2, 2)]
            }
        }
    }

    /// Full n × n viscosity matrix `B = diag(0, b)`.
    pub fn viscosity_full(&self, u: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        let n1 = self.dim_u1();
        let mut out = DMatrix::zeros(n, n);
        out.view_mut((n1, n1), (n - n1, n - n1)).copy_from(&self.viscosity(u));
        out
    }

    pub fn species_diffusion(&self, u: &[f64]) -> f64 {
        match self {
            ModelSpec::Majda(p) => p.c,
            ModelSpec::IdealGas(g) => g.d / (u[0] * u[0]),
        }
    }

    pub fn species_diffusion_gradient(&self, u: &[f64]) -> DVector<f64> {
        match self {
            ModelSpec::Majda(_) => DVector::zeros(1),
            ModelSpec::IdealGas(g) => DVector::from_vec(vec![-2.0 * g.d / u[0].powi(3), 0.0, 0.0]),
        }
    }

    fn ignition_params(&self) -> (f64, f64) {
        match self {
            ModelSpec::Majda(p) => (p.u_ig, p.activation),
            ModelSpec::IdealGas(g) => (g.t_ignition, g.activation),
        }
    }

    pub fn ignition(&self, u: &[f64]) -> f64 {
        let (t0, a) = self.ignition_params();
        smooth_switch(self.temperature(u), t0, a)
    }

    pub fn ignition_gradient(&self, u: &[f64]) -> DVector<f64> {
        let (t0, a) = self.ignition_params();
        self.temperature_gradient(u) * smooth_switch_derivative(self.temperature(u), t0, a)
    }

    /// Characteristic speeds (eigenvalues of `df`) sorted by real part.
    pub fn characteristic_speeds(&self, u: &[f64]) -> Result<Vec<C64>> {
        let mut ev = eigenvalues_real(&self.flux_jacobian(u)?)?;
        ev.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        Ok(ev)
    }
}

/// Central finite-difference Jacobian of the flux.
pub fn fd_flux_jacobian(model: &ModelSpec, u: &[f64]) -> Result<DMatrix<f64>> {
    let n = u.len();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = 1e-6 * (1.0 + norm);
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut up = u.to_vec();
        let mut um = u.to_vec();
        up[j] += h;
        um[j] -= h;
        let col = (model.flux(&up)? - model.flux(&um)?) / (2.0 * h);
        out.set_column(j, &col);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateStructure {
    pub state: Vec<f64>,
    pub eigenvalues: Vec<(f64, f64)>,
    /// Characteristic speeds real, distinct and different from s.
    pub h1: bool,
    /// Block form of the viscosity: positive parabolic block and diffusion,
    /// hyperbolic speeds on one side of s.
    pub h2: bool,
    /// Dissipativity margin over the sampled frequencies.
    pub theta: f64,
    pub h3: bool,
    pub jacobian_fd_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub states: Vec<StateStructure>,
    pub h1: bool,
    pub h2: bool,
    pub h3: bool,
    pub pass: bool,
}

/// Default frequency grid: 201 points on [-10, 10].
pub fn default_xi_grid() -> Vec<f64> {
    (0..201).map(|i| -10.0 + 0.1 * i as f64).collect()
}

/// Numerical check of the structural hypotheses at a list of states.
/// Only the state list and frequency grid are examined; a model with
/// vanishing viscosity is reported as failing rather than rejected.
pub fn check_structure(model: &ModelSpec, states: &[GasState], s: f64, xi_grid: &[f64]) -> Result<StructureReport> {
    if states.is_empty() {
        return Err(Error::Usage("check_structure needs at least one state".into()));
    }
    if xi_grid.iter().all(|&x| x == 0.0) {
        return Err(Error::Usage("frequency grid has no nonzero entry".into()));
    }
    let n = model.n();
    let n1 = model.dim_u1();
    let mut out = Vec::with_capacity(states.len());
    for st in states {
        let u = &st.u;
        let df = model.flux_jacobian(u)?;
        let fd = fd_flux_jacobian(model, u)?;
        let fd_err = (&df - &fd).norm() / (1.0 + df.norm());
        let mut ev = eigenvalues_real(&df)?;
        ev.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        let scale = 1.0 + df.norm();
        let real = ev.iter().all(|e| e.im.abs() <= 1e-8 * scale);
        let distinct = ev.windows(2).all(|w| (w[1] - w[0]).norm() > 1e-8);
        let off_s = ev.iter().all(|e| (e.re - s).abs() > 1e-8);
        let h1 = real && distinct && off_s;

        let b = model.viscosity(u);
        let b_ok = eigenvalues_real(&b)?.iter().all(|e| e.re > 0.0);
        let c_ok = model.species_diffusion(u) > 0.0;
        let df11_ok = if n1 == 0 {
            true
        } else {
            let d11 = df.view((0, 0), (n1, n1)).into_owned();
            let e11 = eigenvalues_real(&d11)?;
            e11.iter().all(|e| e.im.abs() <= 1e-8 && e.re < s) || e11.iter().all(|e| e.im.abs() <= 1e-8 && e.re > s)
        };
        let h2 = b_ok && c_ok && df11_ok;

        let bfull = model.viscosity_full(u);
        let mut theta = f64::INFINITY;
        for &xi in xi_grid {
            if xi == 0.0 {
                continue;
            }
            let m = to_complex(&df) * C64::new(0.0, -xi) - to_complex(&bfull) * C64::new(xi * xi, 0.0);
            let max_re = eigenvalues(&m)?.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
            theta = theta.min(-max_re * (1.0 + xi * xi) / (xi * xi));
        }
        let _ = n;
        out.push(StateStructure {
            state: u.clone(),
            eigenvalues: ev.iter().map(|e| (e.re, e.im)).collect(),
            h1,
            h2,
            theta,
            h3: theta > 1e-10,
            jacobian_fd_error: fd_err,
        });
    }
    let h1 = out.iter().all(|s| s.h1);
    let h2 = out.iter().all(|s| s.h2);
    let h3 = out.iter().all(|s| s.h3);
    let h0 = out.iter().all(|s| s.jacobian_fd_error <= 1e-6);
    Ok(StructureReport {
        states: out,
        h1,
        h2,
        h3,
        pass: h0 && h1 && h2 && h3,
    })
}
