//! Adaptive Dormand–Prince 5(4) integrator over real or complex vectors.
//!
//! The solver keeps its state between calls so that callers can march
//! through a list of output nodes (`advance_to`) without losing the step
//! size. Accepted steps are reported through a hook which may rescale the
//! state in place; this is how the exterior-power integration renormalizes.

use nalgebra::{ComplexField, DVector};

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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step magnitude; 0 selects one automatically.
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-10,
            h_init: 0.0,
            h_min: 1e-12,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(rtol: f64, atol: f64) -> Self {
        OdeOptions {
            rtol,
            atol,
            ..Default::default()
        }
    }
}

/// Stateful Dormand–Prince stepper.
pub struct Dopri<T: ComplexField<RealField = f64> + Copy> {
    pub x: f64,
    pub y: DVector<T>,
    f: DVector<T>,
    h: f64,
    pub opts: OdeOptions,
    pub accepted: usize,
    pub rejected: usize,
}

fn scaled<T: ComplexField<RealField = f64> + Copy>(v: &DVector<T>, s: f64) -> DVector<T> {
    v.map(|c| c.scale(s))
}

impl<T: ComplexField<RealField = f64> + Copy> Dopri<T> {
    pub fn new<F>(rhs: &mut F, x0: f64, y0: DVector<T>, opts: OdeOptions) -> Result<Self>
    where
        F: FnMut(f64, &DVector<T>) -> Result<DVector<T>>,
    {
        let f = rhs(x0, &y0)?;
        Ok(Dopri {
            x: x0,
            y: y0,
            f,
            h: opts.h_init,
            opts,
            accepted: 0,
            rejected: 0,
        })
    }

    fn initial_step(&self, dir: f64, span: f64) -> f64 {
        let mut d0: f64 = 0.0;
        let mut d1: f64 = 0.0;
        for (yi, fi) in self.y.iter().zip(self.f.iter()) {
            let sc = self.opts.atol + self.opts.rtol * yi.modulus();
            d0 = d0.max(yi.modulus() / sc);
            d1 = d1.max(fi.modulus() / sc);
        }
        let h = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let _ = dir;
        h.min(span).min(self.opts.h_max).max(self.opts.h_min)
    }

    /// Recompute the cached derivative after the caller changed `y`.
    pub fn refresh<F>(&mut self, rhs: &mut F) -> Result<()>
    where
        F: FnMut(f64, &DVector<T>) -> Result<DVector<T>>,
    {
        self.f = rhs(self.x, &self.y)?;
        Ok(())
    }

    /// Integrates from the current point to `x_target` (either direction).
    /// `on_accept` sees every accepted step and may modify the state; it
    /// returns `true` when it did, so the cached derivative is recomputed.
    pub fn advance_to<F, H>(&mut self, rhs: &mut F, x_target: f64, on_accept: &mut H) -> Result<()>
    where
        F: FnMut(f64, &DVector<T>) -> Result<DVector<T>>,
        H: FnMut(f64, &mut DVector<T>) -> Result<bool>,
    {
        let span = (x_target - self.x).abs();
        if span == 0.0 {
            return Ok(());
        }
        let dir = (x_target - self.x).signum();
        if self.h <= 0.0 {
            self.h = self.initial_step(dir, span);
        }
        let mut steps = 0usize;
        loop {
            let remaining = (x_target - self.x) * dir;
            if remaining <= 1e-14 * (1.0 + x_target.abs()) {
                self.x = x_target;
                return Ok(());
            }
            steps += 1;
            if steps > self.opts.max_steps {
                return Err(Error::Stiffness(format!(
                    "max_steps {} exceeded at x = {}",
                    self.opts.max_steps, self.x
                )));
            }
            let mut h = self.h.min(self.opts.h_max);
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            let hs = h * dir;
            let (y_new, f_new, err) = self.trial(rhs, hs)?;
            if err <= 1.0 && err.is_finite() {
                self.accepted += 1;
                self.x = if last { x_target } else { self.x + hs };
                self.y = y_new;
                self.f = f_new;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    self.h = h * fac;
                } else {
                    self.h = self.h.max(h * fac.min(1.0));
                }
                if on_accept(self.x, &mut self.y)? {
                    self.refresh(rhs)?;
                }
            } else {
                self.rejected += 1;
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
                self.h = h * fac;
                if self.h < self.opts.h_min {
                    return Err(Error::Stiffness(format!(
                        "step size {:e} below minimum at x = {}",
                        self.h, self.x
                    )));
                }
            }
        }
    }

    fn trial<F>(&self, rhs: &mut F, h: f64) -> Result<(DVector<T>, DVector<T>, f64)>
    where
        F: FnMut(f64, &DVector<T>) -> Result<DVector<T>>,
    {
        let x = self.x;
        let y = &self.y;
        let k1 = &self.f;
        let k2 = rhs(x + C2 * h, &(y + scaled(k1, h * A21)))?;
        let k3 = rhs(x + C3 * h, &(y + scaled(k1, h * A31) + scaled(&k2, h * A32)))?;
        let k4 = rhs(
            x + C4 * h,
            &(y + scaled(k1, h * A41) + scaled(&k2, h * A42) + scaled(&k3, h * A43)),
        )?;
        let k5 = rhs(
            x + C5 * h,
            &(y + scaled(k1, h * A51) + scaled(&k2, h * A52) + scaled(&k3, h * A53) + scaled(&k4, h * A54)),
        )?;
        let k6 = rhs(
            x + h,
            &(y + scaled(k1, h * A61)
                + scaled(&k2, h * A62)
                + scaled(&k3, h * A63)
                + scaled(&k4, h * A64)
                + scaled(&k5, h * A65)),
        )?;
        let y_new = y
            + scaled(k1, h * B1)
            + scaled(&k3, h * B3)
            + scaled(&k4, h * B4)
            + scaled(&k5, h * B5)
            + scaled(&k6, h * B6);
        let k7 = rhs(x + h, &y_new)?;
        let e = scaled(k1, h * E1)
            + scaled(&k3, h * E3)
            + scaled(&k4, h * E4)
            + scaled(&k5, h * E5)
            + scaled(&k6, h * E6)
            + scaled(&k7, h * E7);
        let mut err: f64 = 0.0;
        for i in 0..y.len() {
            let sc = self.opts.atol + self.opts.rtol * y[i].modulus().max(y_new[i].modulus());
            let r = e[i].modulus() / sc;
            if !r.is_finite() {
                err = f64::INFINITY;
                break;
            }
            err = err.max(r);
        }
        Ok((y_new, k7, err))
    }
}

/// One-shot integration from `x0` to `x1`.
pub fn integrate<T, F>(mut rhs: F, x0: f64, y0: DVector<T>, x1: f64, opts: OdeOptions) -> Result<DVector<T>>
where
    T: ComplexField<RealField = f64> + Copy,
    F: FnMut(f64, &DVector<T>) -> Result<DVector<T>>,
{
    let mut solver = Dopri::new(&mut rhs, x0, y0, opts)?;
    solver.advance_to(&mut rhs, x1, &mut |_, _| Ok(false))?;
    Ok(solver.y)
}
