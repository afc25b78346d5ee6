//! First-order eigenvalue systems `W' = G(p, x) W` for the ZND, Neumann
//! shock and viscous detonation problems, their limits at `x = ±inf`, and
//! analytic bases of the limiting invariant subspaces.
//!
//! Every coefficient matrix is affine in the spectral parameter, so frames
//! return the pair `(a, b)` with `G = a + p b`. The parameter `p` is `lambda`
//! for ZND and the stretched `lambda~ = eps lambda` for the viscous frames.

use std::cell::RefCell;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, real_basis, schur, to_complex, CMat, CVec, SpectralGroup, C64};
use crate::model::ModelSpec;
use crate::ode::{Dopri, OdeOptions};
use crate::profile::{ViscousDetonationProfile, ViscousShockProfile, ZndProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Znd,
    Ns,
    Rns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum End {
    Minus,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Stable,
    Unstable,
}

/// Linearized coefficients at one point of a profile.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientAssembly {
    /// Jacobian of the moving-frame flux `(f(u) - s u, -s z)`.
    pub a: DMatrix<f64>,
    /// Jacobian of the reaction source.
    pub e: DMatrix<f64>,
    /// `a` corrected by the variation of the viscosity along the profile.
    pub a_tilde: DMatrix<f64>,
    /// Parabolic block of the viscosity, species diffusion included.
    pub b_tilde: DMatrix<f64>,
}

/// Coefficients at state `w = (u, z)` with profile slope `dw`.
pub fn assemble(model: &ModelSpec, s: f64, w: &[f64], dw: &[f64]) -> Result<CoefficientAssembly> {
    let n = model.n();
    let n1 = model.dim_u1();
    let n2 = n - n1;
    let nn = n + 1;
    let u = &w[..n];
    let z = w[n];
    let df = model.flux_jacobian(u)?;
    let mut a = DMatrix::zeros(nn, nn);
    a.view_mut((0, 0), (n, n)).copy_from(&df);
    for i in 0..nn {
        a[(i, i)] -= s;
    }
    let k = model.rate();
    let phi = model.ignition(u);
    let grad = model.ignition_gradient(u);
    let q = model.heat_release();
    let mut e = DMatrix::zeros(nn, nn);
    for i in 0..n {
        for j in 0..n {
            e[(i, j)] = k * q[i] * z * grad[j];
        }
        e[(i, n)] = k * q[i] * phi;
    }
    for j in 0..n {
        e[(n, j)] = -k * z * grad[j];
    }
    e[(n, n)] = -k * phi;

    let db = model.viscosity_derivatives(u);
    let dc = model.species_diffusion_gradient(u);
    let mut a_tilde = a.clone();
    for j in 0..n {
        for ai in 0..n2 {
            let mut acc = 0.0;
            for bi in 0..n2 {
                acc += db[j][(ai, bi)] * dw[n1 + bi];
            }
            a_tilde[(n1 + ai, j)] -= acc;
        }
        a_tilde[(n, j)] -= dc[j] * dw[n];
    }
    let mut b_tilde = DMatrix::zeros(n2 + 1, n2 + 1);
    b_tilde.view_mut((0, 0), (n2, n2)).copy_from(&model.viscosity(u));
    b_tilde[(n2, n2)] = model.species_diffusion(u);
    Ok(CoefficientAssembly {
        a,
        e,
        a_tilde,
        b_tilde,
    })
}

fn invert(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Structure(format!("{what} is singular")))
}

/// ZND pair: `G = (E - p I) A^{-1}`.
fn znd_pair(asm: &CoefficientAssembly) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let ainv = asm
        .a
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Transversality("A = dF is singular on the ZND profile".into()))?;
    Ok((&asm.e * &ainv, -ainv))
}

/// Viscous pair for the unknowns `(Y, W_2)`, `Y = B W' - A~ W`, in the
/// stretched variable; `eps` multiplies the reaction (0 for the inert shock).
fn viscous_pair(model: &ModelSpec, asm: &CoefficientAssembly, eps: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = model.n();
    let n1 = model.dim_u1();
    let nn = n + 1;
    let r = nn - n1;
    let m = nn + r;
    let at = &asm.a_tilde;
    let a11 = at.view((0, 0), (n1, n1)).into_owned();
    let a12 = at.view((0, n1), (n1, r)).into_owned();
    let a21 = at.view((n1, 0), (r, n1)).into_owned();
    let a22 = at.view((n1, n1), (r, r)).into_owned();
    let a11inv = invert(&a11, "A~_11")?;
    let binv = invert(&asm.b_tilde, "viscosity block")?;
    // W = P (Y, W_2)
    let mut p = DMatrix::zeros(nn, m);
    if n1 > 0 {
        p.view_mut((0, 0), (n1, n1)).copy_from(&(-&a11inv));
        p.view_mut((0, nn), (n1, r)).copy_from(&(-&a11inv * &a12));
    }
    p.view_mut((n1, nn), (r, r)).copy_from(&DMatrix::identity(r, r));
    let mut a = DMatrix::zeros(m, m);
    let mut b = DMatrix::zeros(m, m);
    if eps != 0.0 {
        a.view_mut((0, 0), (nn, m)).copy_from(&(-(&asm.e * &p) * eps));
    }
    b.view_mut((0, 0), (nn, m)).copy_from(&p);
    let couple = &binv * &a21 * &a11inv;
    if n1 > 0 {
        a.view_mut((nn, 0), (r, n1)).copy_from(&(-&couple));
    }
    a.view_mut((nn, n1), (r, r)).copy_from(&binv);
    a.view_mut((nn, nn), (r, r)).copy_from(&(&binv * (&a22 - &a21 * &a11inv * &a12)));
    Ok((a, b))
}

/// A λ-dependent first-order system with limits at both ends.
pub trait SpectralFrame: Sync {
    fn kind(&self) -> FrameKind;
    fn model(&self) -> &ModelSpec;
    fn dim(&self) -> usize;
    /// `(a, b)` with `G(p, x) = a + p b`.
    fn pair(&self, x: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)>;
    fn limit_pair(&self, end: End) -> Result<(DMatrix<f64>, DMatrix<f64>)>;
    /// (rank of the unstable subspace at -inf, rank of the stable subspace at +inf)
    fn split_dims(&self) -> (usize, usize);
    /// Spectral parameter of the frame for a physical `lambda`.
    fn parameter(&self, lambda: C64) -> C64 {
        lambda
    }
    /// Real reference parameter from which analytic bases are continued.
    fn reference(&self) -> f64 {
        1.0
    }
    /// Truncation distances `(L_-, L_+)` in the frame variable: the reaction
    /// tail is cut where `z` falls below `tail_tol`, shock layers at `window`.
    fn default_lengths(&self, tail_tol: f64, window: f64) -> (f64, f64) {
        let _ = tail_tol;
        (window, window)
    }
    fn znd_profile(&self) -> Option<&ZndProfile> {
        None
    }
    /// `Some(eps)` when the left tail varies on the slow scale `x = eps x~`.
    fn slow_scale(&self) -> Option<f64> {
        None
    }
    fn matrix(&self, p: C64, x: f64) -> Result<CMat> {
        let (a, b) = self.pair(x)?;
        Ok(to_complex(&a) + to_complex(&b) * p)
    }
    fn limit(&self, p: C64, end: End) -> Result<CMat> {
        let (a, b) = self.limit_pair(end)?;
        Ok(to_complex(&a) + to_complex(&b) * p)
    }
}

pub struct ZndFrame<'a> {
    pub znd: &'a ZndProfile,
}

impl<'a> ZndFrame<'a> {
    pub fn new(znd: &'a ZndProfile) -> Self {
        ZndFrame { znd }
    }
}

impl SpectralFrame for ZndFrame<'_> {
    fn kind(&self) -> FrameKind {
        FrameKind::Znd
    }

    fn model(&self) -> &ModelSpec {
        &self.znd.model
    }

    fn dim(&self) -> usize {
        self.znd.model.n() + 1
    }

    fn pair(&self, x: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let smp = self.znd.sample(x);
        znd_pair(&assemble(&self.znd.model, self.znd.ends.s, &smp.w, &smp.dw)?)
    }

    fn limit_pair(&self, end: End) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let e = &self.znd.ends;
        let mut w = match end {
            End::Minus => e.u_minus.clone(),
            End::Plus => e.u_plus.clone(),
        };
        w.push(if end == End::Minus { e.z_minus } else { 1.0 });
        let zero = vec![0.0; w.len()];
        znd_pair(&assemble(&self.znd.model, e.s, &w, &zero)?)
    }

    fn split_dims(&self) -> (usize, usize) {
        // unstable rank n at -inf; the + side carries no decaying modes
        (self.znd.model.n(), 0)
    }

    fn znd_profile(&self) -> Option<&ZndProfile> {
        Some(self.znd)
    }

    fn default_lengths(&self, tail_tol: f64, _window: f64) -> (f64, f64) {
        (tail_length(&self.znd.curve, tail_tol).unwrap_or(1.0), 0.0)
    }
}

pub struct NsFrame<'a> {
    pub shock: &'a ViscousShockProfile,
}

impl<'a> NsFrame<'a> {
    pub fn new(shock: &'a ViscousShockProfile) -> Self {
        NsFrame { shock }
    }
}

impl SpectralFrame for NsFrame<'_> {
    fn kind(&self) -> FrameKind {
        FrameKind::Ns
    }

    fn model(&self) -> &ModelSpec {
        &self.shock.model
    }

    fn dim(&self) -> usize {
        let m = &self.shock.model;
        m.n() + 1 + m.r()
    }

    fn pair(&self, xt: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let smp = self.shock.sample(xt);
        let asm = assemble(&self.shock.model, self.shock.s, &smp.w, &smp.dw)?;
        viscous_pair(&self.shock.model, &asm, 0.0)
    }

    fn limit_pair(&self, end: End) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let mut w = match end {
            End::Minus => self.shock.u_star.clone(),
            End::Plus => self.shock.u_plus.clone(),
        };
        w.push(1.0);
        let zero = vec![0.0; w.len()];
        let asm = assemble(&self.shock.model, self.shock.s, &w, &zero)?;
        viscous_pair(&self.shock.model, &asm, 0.0)
    }

    fn split_dims(&self) -> (usize, usize) {
        let m = &self.shock.model;
        (m.n() + 1, m.r())
    }
}

pub struct RnsFrame<'a> {
    pub profile: &'a ViscousDetonationProfile,
}

impl<'a> RnsFrame<'a> {
    pub fn new(profile: &'a ViscousDetonationProfile) -> Self {
        RnsFrame { profile }
    }

    pub fn eps(&self) -> f64 {
        self.profile.eps
    }
}

impl SpectralFrame for RnsFrame<'_> {
    fn kind(&self) -> FrameKind {
        FrameKind::Rns
    }

    fn model(&self) -> &ModelSpec {
        &self.profile.model
    }

    fn dim(&self) -> usize {
        let m = &self.profile.model;
        m.n() + 1 + m.r()
    }

    fn pair(&self, xt: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let smp = self.profile.sample_fast(xt);
        let asm = assemble(&self.profile.model, self.profile.ends.s, &smp.w, &smp.dw)?;
        viscous_pair(&self.profile.model, &asm, self.profile.eps)
    }

    fn limit_pair(&self, end: End) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let e = &self.profile.ends;
        let w = match end {
            End::Minus => {
                let mut w = e.u_minus.clone();
                w.push(e.z_minus);
                w
            }
            End::Plus => {
                let mut w = e.u_plus.clone();
                w.push(1.0);
                w
            }
        };
        let zero = vec![0.0; w.len()];
        let asm = assemble(&self.profile.model, e.s, &w, &zero)?;
        viscous_pair(&self.profile.model, &asm, self.profile.eps)
    }

    fn split_dims(&self) -> (usize, usize) {
        let m = &self.profile.model;
        (m.n() + 1, m.r())
    }

    fn parameter(&self, lambda: C64) -> C64 {
        lambda * self.profile.eps
    }

    fn reference(&self) -> f64 {
        self.profile.eps
    }

    fn default_lengths(&self, tail_tol: f64, window: f64) -> (f64, f64) {
        let left = tail_length(&self.profile.curve, tail_tol)
            .map(|l| l / self.profile.eps)
            .unwrap_or(window)
            .max(window);
        (left, window)
    }

    fn slow_scale(&self) -> Option<f64> {
        Some(self.profile.eps)
    }
}

/// Distance from 0 to the leftmost node where `z >= tol`; `None` when the
/// curve carries no reaction tail.
fn tail_length(curve: &crate::profile::Curve, tol: f64) -> Option<f64> {
    let d = curve.dim;
    let zc = d - 1;
    if curve.left[zc] >= tol {
        return None;
    }
    let i = (0..curve.x.len()).find(|&i| curve.values[i * d + zc] >= tol)?;
    Some(-curve.x[i])
}

/// `G = (-lambda I + E) A^{-1}` on the ZND profile.
pub fn znd_interior_matrix(znd: &ZndProfile, lambda: C64, x: f64) -> Result<CMat> {
    ZndFrame::new(znd).matrix(lambda, x)
}

/// `lambda [W] + A(0-) W'(0-)`, with `[W] = W(0+) - W(0-)`.
pub fn znd_jump_vector(znd: &ZndProfile, lambda: C64) -> Result<CVec> {
    let n = znd.model.n();
    let s = znd.ends.s;
    let left = znd.sample(0.0);
    let asm = assemble(&znd.model, s, &left.w, &left.dw)?;
    let aw = &asm.a * DVector::from_column_slice(&left.dw);
    let mut out = CVec::zeros(n + 1);
    for i in 0..n {
        out[i] = lambda * (znd.ends.u_plus[i] - left.w[i]) + aw[i];
    }
    out[n] = lambda * (1.0 - left.w[n]) + aw[n];
    Ok(out)
}

/// Coefficient matrix of the viscous detonation system at physical
/// `lambda` and stretched position `xt`.
pub fn rns_matrix(profile: &ViscousDetonationProfile, lambda: C64, xt: f64) -> Result<CMat> {
    let f = RnsFrame::new(profile);
    f.matrix(f.parameter(lambda), xt)
}

/// Coefficient matrix of the Neumann shock system at stretched `lt`.
pub fn ns_matrix(shock: &ViscousShockProfile, lt: C64, xt: f64) -> Result<CMat> {
    NsFrame::new(shock).matrix(lt, xt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndSplit {
    pub eigenvalues: Vec<(f64, f64)>,
    pub unstable_rank: usize,
    pub stable_rank: usize,
    /// Smallest |Re| over the spectrum.
    pub gap: f64,
    #[serde(skip)]
    pub unstable_projector: Option<CMat>,
    #[serde(skip)]
    pub stable_projector: Option<CMat>,
}

/// Sign partition of the spectrum of one matrix.
pub fn split_matrix(g: &CMat) -> Result<EndSplit> {
    let (q, t) = schur(g)?;
    let m = t.nrows();
    let ev: Vec<C64> = (0..m).map(|i| t[(i, i)]).collect();
    let scale = 1.0 + g.norm();
    let gap = ev.iter().map(|e| e.re.abs()).fold(f64::INFINITY, f64::min);
    if gap <= 1e-10 * scale {
        return Err(Error::SplitAmbiguous(format!("eigenvalue within {gap:e} of the imaginary axis")));
    }
    let sel: Vec<bool> = ev.iter().map(|e| e.re > 0.0).collect();
    let unstable = SpectralGroup::from_schur(q.clone(), t.clone(), &sel)?;
    let sel_s: Vec<bool> = sel.iter().map(|v| !v).collect();
    let stable = SpectralGroup::from_schur(q, t, &sel_s)?;
    Ok(EndSplit {
        eigenvalues: ev.iter().map(|e| (e.re, e.im)).collect(),
        unstable_rank: unstable.k,
        stable_rank: stable.k,
        gap,
        unstable_projector: Some(unstable.projector()),
        stable_projector: Some(stable.projector()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitData {
    pub kind: FrameKind,
    pub minus: EndSplit,
    pub plus: EndSplit,
}

/// Splitting of both limits at parameter `p`, checked against the expected
/// ranks of the frame.
pub fn limiting_splitting(frame: &dyn SpectralFrame, p: C64) -> Result<SplitData> {
    let minus = split_matrix(&frame.limit(p, End::Minus)?)?;
    let plus = split_matrix(&frame.limit(p, End::Plus)?)?;
    let (ku, ks) = frame.split_dims();
    let m = frame.dim();
    let ok = match frame.kind() {
        FrameKind::Znd => minus.unstable_rank == ku && plus.unstable_rank == m,
        _ => minus.unstable_rank == ku && plus.stable_rank == ks && minus.stable_rank == ks,
    };
    if !ok {
        return Err(Error::SplitAmbiguous(format!(
            "unexpected ranks: unstable {} at -inf, stable {} at +inf (expected {ku}, {ks})",
            minus.unstable_rank, plus.stable_rank
        )));
    }
    Ok(SplitData {
        kind: frame.kind(),
        minus,
        plus,
    })
}

/// Group membership of each eigenvalue by nearest matching to labelled
/// anchors: `true` for members of the continued group.
fn match_to_anchors(ev: &[C64], anchors: &[(C64, bool)]) -> Result<Vec<bool>> {
    let m = ev.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(m * m);
    for (i, e) in ev.iter().enumerate() {
        for (j, (a, _)) in anchors.iter().enumerate() {
            pairs.push(((e - a).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut used_e = vec![false; m];
    let mut used_a = vec![false; m];
    let mut out = vec![false; m];
    for (_, i, j) in pairs {
        if !used_e[i] && !used_a[j] {
            used_e[i] = true;
            used_a[j] = true;
            out[i] = anchors[j].1;
        }
    }
    Ok(out)
}

/// Continues an invariant-subspace basis of `g(p) = a + p b` along a path
/// by the Kato transport `R' = [P', P] R`.
pub struct KatoTransport {
    a: CMat,
    b: CMat,
    pub rtol: f64,
}

/// State of a continued basis at one parameter value.
#[derive(Debug, Clone)]
pub struct ContinuedBasis {
    pub p: C64,
    pub basis: CMat,
    /// Sum of the group eigenvalues (analytic in p).
    pub eigen_sum: C64,
    pub group: Vec<C64>,
    pub others: Vec<C64>,
}

impl KatoTransport {
    pub fn new(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Self {
        KatoTransport {
            a: to_complex(a),
            b: to_complex(b),
            rtol: 1e-11,
        }
    }

    pub fn from_complex(a: CMat, b: CMat) -> Self {
        KatoTransport { a, b, rtol: 1e-11 }
    }

    pub fn matrix(&self, p: C64) -> CMat {
        &self.a + &self.b * p
    }

    fn group_at(&self, p: C64, anchors: &[(C64, bool)]) -> Result<SpectralGroup> {
        let (q, t) = schur(&self.matrix(p))?;
        let ev: Vec<C64> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
        let sel = match_to_anchors(&ev, anchors)?;
        let g = SpectralGroup::from_schur(q, t, &sel)?;
        let scale = 1.0 + ev.iter().map(|e| e.norm()).fold(0.0, f64::max);
        if g.k > 0 && g.k < g.dim() && g.separation() <= 1e-9 * scale {
            return Err(Error::Continuation(format!("spectral groups touch at p = {p}")));
        }
        Ok(g)
    }

    /// Start at a real `p0` with a real orthonormal basis of the eigenvalues
    /// selected by `which` (sign of the real part).
    pub fn start(&self, p0: f64, which: Which) -> Result<ContinuedBasis> {
        let p = c(p0, 0.0);
        let g = SpectralGroup::from_predicate(&self.matrix(p), |e| match which {
            Which::Unstable => e.re > 0.0,
            Which::Stable => e.re < 0.0,
        })?;
        let rb = real_basis(&g.basis())?;
        Ok(ContinuedBasis {
            p,
            basis: to_complex(&rb),
            eigen_sum: g.eigen_sum(),
            group: g.group_eigenvalues(),
            others: g.other_eigenvalues(),
        })
    }

    /// Transports along `p(t) = path(t)`, `t in [0, 1]`, with `dpath` the
    /// derivative.
    pub fn transport<P, D>(&self, from: &ContinuedBasis, path: P, dpath: D) -> Result<ContinuedBasis>
    where
        P: Fn(f64) -> C64,
        D: Fn(f64) -> C64,
    {
        let m = from.basis.nrows();
        let k = from.basis.ncols();
        if k == 0 {
            let p = path(1.0);
            let (_, t) = schur(&self.matrix(p))?;
            return Ok(ContinuedBasis {
                p,
                basis: from.basis.clone(),
                eigen_sum: c(0.0, 0.0),
                group: vec![],
                others: (0..m).map(|i| t[(i, i)]).collect(),
            });
        }
        let anchors: RefCell<Vec<(C64, bool)>> = RefCell::new(
            from.group
                .iter()
                .map(|&e| (e, true))
                .chain(from.others.iter().map(|&e| (e, false)))
                .collect(),
        );
        let flatten = |r: &CMat| CVec::from_iterator(m * k, r.iter().copied());
        let mut rhs = |t: f64, y: &CVec| -> Result<CVec> {
            let r = CMat::from_column_slice(m, k, y.as_slice());
            let g = self.group_at(path(t), &anchors.borrow())?;
            let dg = &self.b * dpath(t);
            let dr = g.kato_direction(&dg, &r)?;
            Ok(flatten(&dr))
        };
        let opts = OdeOptions {
            h_max: 0.05,
            h_min: 1e-10,
            ..OdeOptions::with_tol(self.rtol, self.rtol)
        };
        let mut solver = Dopri::new(&mut rhs, 0.0, flatten(&from.basis), opts)?;
        let mut on_accept = |t: f64, _y: &mut CVec| -> Result<bool> {
            let g = self.group_at(path(t), &anchors.borrow())?;
            let fresh: Vec<(C64, bool)> = g
                .group_eigenvalues()
                .into_iter()
                .map(|e| (e, true))
                .chain(g.other_eigenvalues().into_iter().map(|e| (e, false)))
                .collect();
            *anchors.borrow_mut() = fresh;
            Ok(false)
        };
        solver.advance_to(&mut rhs, 1.0, &mut on_accept)?;
        let p = path(1.0);
        let g = self.group_at(p, &anchors.borrow())?;
        if g.k != k {
            return Err(Error::Continuation(format!("group rank changed from {k} to {}", g.k)));
        }
        let r = CMat::from_column_slice(m, k, solver.y.as_slice());
        // remove drift out of the subspace; the projector is analytic
        let basis = g.projector() * r;
        Ok(ContinuedBasis {
            p,
            basis,
            eigen_sum: g.eigen_sum(),
            group: g.group_eigenvalues(),
            others: g.other_eigenvalues(),
        })
    }

    /// Straight segment from the current point to `to`.
    pub fn segment(&self, from: &ContinuedBasis, to: C64) -> Result<ContinuedBasis> {
        let p0 = from.p;
        self.transport(from, move |t| p0 + (to - p0) * t, move |_| to - p0)
    }

    /// Radial segment from the real reference to `|p|`, then the arc of
    /// radius `|p|` to `p`. Conjugate targets get conjugate paths.
    pub fn continue_to(&self, start: &ContinuedBasis, p: C64, min_radius: f64) -> Result<ContinuedBasis> {
        let rho = p.norm();
        if rho < min_radius {
            return Err(Error::Continuation(format!("parameter {p} too close to the origin")));
        }
        let mut cur = start.clone();
        if (cur.p.re - rho).abs() > 0.0 {
            cur = self.segment(&cur, c(rho, 0.0))?;
        }
        let theta = p.arg();
        if theta != 0.0 {
            cur = self.transport(
                &cur,
                move |t| C64::from_polar(rho, theta * t),
                move |t| C64::from_polar(rho, theta * t) * c(0.0, theta),
            )?;
        }
        cur.p = p;
        Ok(cur)
    }
}

/// Analytic basis of a limiting subspace at one frame parameter value.
pub fn limit_basis(frame: &dyn SpectralFrame, end: End, which: Which, p: C64) -> Result<ContinuedBasis> {
    let (a, b) = frame.limit_pair(end)?;
    let kt = KatoTransport::new(&a, &b);
    let p0 = frame.reference();
    let start = kt.start(p0, which)?;
    let min_radius = 1e-4 * p0;
    kt.continue_to(&start, p, min_radius)
}

#[derive(Debug, Clone)]
pub struct AnalyticBasis {
    pub path: Vec<C64>,
    pub bases: Vec<CMat>,
    pub eigen_sums: Vec<C64>,
}

impl AnalyticBasis {
    /// Largest `|P R - R|` over the samples.
    pub fn span_residual(&self, frame: &dyn SpectralFrame, end: End, which: Which) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (p, r) in self.path.iter().zip(&self.bases) {
            let g = frame.limit(*p, end)?;
            let sp = split_matrix(&g)?;
            let proj = match which {
                Which::Stable => sp.stable_projector.unwrap(),
                Which::Unstable => sp.unstable_projector.unwrap(),
            };
            worst = worst.max((&proj * r - r).norm() / r.norm().max(1e-300));
        }
        Ok(worst)
    }
}

/// Continues a basis along the polyline through `path`, starting from a real
/// basis at `path[0]` (which must be real and split by sign).
pub fn analytic_basis(frame: &dyn SpectralFrame, path: &[C64], which: Which, end: End) -> Result<AnalyticBasis> {
    if path.is_empty() {
        return Err(Error::Usage("empty parameter path".into()));
    }
    if path[0].im != 0.0 {
        return Err(Error::Usage("path must start on the real axis".into()));
    }
    let (a, b) = frame.limit_pair(end)?;
    let kt = KatoTransport::new(&a, &b);
    let mut cur = kt.start(path[0].re, which)?;
    let mut out = AnalyticBasis {
        path: vec![cur.p],
        bases: vec![cur.basis.clone()],
        eigen_sums: vec![cur.eigen_sum],
    };
    for &p in &path[1..] {
        cur = kt.segment(&cur, p)?;
        out.path.push(p);
        out.bases.push(cur.basis.clone());
        out.eigen_sums.push(cur.eigen_sum);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MajdaParams;
    use crate::profile::*;

    fn majda_setup() -> (ModelSpec, ZndProfile, ViscousShockProfile) {
        let m = ModelSpec::Majda(MajdaParams::default());
        let ends = compute_end_states(&m, &[0.0], 1.0).unwrap();
        let znd = compute_znd_profile(&m, &ends, &ZndOptions::default()).unwrap();
        let shock = compute_ns_shock_profile(&m, &[2.0], &[0.0], 1.0, &ShockOptions::default()).unwrap();
        (m, znd, shock)
    }

    #[test]
    fn znd_limits() {
        let (_, znd, _) = majda_setup();
        let lam = c(0.7, 0.2);
        let um = 1.0 + 0.4f64.sqrt();
        let phi = (-1.0 / (um - 0.5)).exp();
        let g = znd_interior_matrix(&znd, lam, -1e6).unwrap();
        // (E_- - lambda) A_-^{-1}, A_- = diag(u_- - 1, -1)
        let expected = CMat::from_row_slice(
            2,
            2,
            &[-lam / (um - 1.0), c(0.3 * phi, 0.0) / -1.0, c(0.0, 0.0), (c(-phi, 0.0) - lam) / -1.0],
        );
        assert!((g - expected).norm() < 1e-12);
        let gp = znd_interior_matrix(&znd, c(1.0, 0.0), 0.5).unwrap();
        let ap = CMat::from_row_slice(2, 2, &[c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        assert!((gp + ap.try_inverse().unwrap()).norm() < 1e-14);
        let x = -3.0;
        let d = znd_interior_matrix(&znd, lam * 2.0, x).unwrap() - znd_interior_matrix(&znd, lam, x).unwrap();
        let (_, b) = ZndFrame::new(&znd).pair(x).unwrap();
        assert!((d - to_complex(&b) * lam).norm() < 1e-13);
    }

    #[test]
    fn znd_jump_is_affine_and_matches_profile_slope() {
        let (_, znd, _) = majda_setup();
        let j0 = znd_jump_vector(&znd, c(0.0, 0.0)).unwrap();
        let j1 = znd_jump_vector(&znd, c(1.0, 0.0)).unwrap();
        let j2 = znd_jump_vector(&znd, c(2.0, 0.0)).unwrap();
        assert!((&j2 - &j1 - (&j1 - &j0)).norm() < 1e-14);
        assert!(((&j2 - &j1)[0] - c(-2.0, 0.0)).norm() < 1e-14);
        // one-sided differences of the stored profile at 0-
        let h = 1e-4;
        let w0 = znd.sample(0.0).w;
        let wh = znd.sample(-h).w;
        let w2h = znd.sample(-2.0 * h).w;
        let phi = (-1.0f64 / 1.5).exp();
        for c_ in 0..2 {
            let fd = (3.0 * w0[c_] - 4.0 * wh[c_] + w2h[c_]) / (2.0 * h);
            assert!((fd - znd.sample(0.0).dw[c_]).abs() < 1e-6);
        }
        assert!((znd.sample(0.0).dw[1] - phi).abs() < 1e-12);
    }

    #[test]
    fn majda_rank_counts() {
        let (m, znd, shock) = majda_setup();
        let sd = limiting_splitting(&ZndFrame::new(&znd), c(1.0, 0.0)).unwrap();
        assert_eq!(sd.minus.unstable_rank, 1);
        assert_eq!(sd.plus.unstable_rank, 2);
        let sd = limiting_splitting(&NsFrame::new(&shock), c(1.0, 0.0)).unwrap();
        assert_eq!(sd.minus.stable_rank, 2);
        assert_eq!(sd.plus.stable_rank, 2);
        let det = compute_viscous_detonation_profile(&m, 0.05, &znd, &shock, &DetonationOptions::default()).unwrap();
        let f = RnsFrame::new(&det);
        let sd = limiting_splitting(&f, f.parameter(c(1.0, 0.0))).unwrap();
        assert_eq!(sd.minus.stable_rank, 2);
        assert_eq!(sd.plus.stable_rank, 2);
    }

    #[test]
    fn diagonal_split() {
        let g = CMat::from_row_slice(2, 2, &[c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]);
        let sp = split_matrix(&g).unwrap();
        assert_eq!(sp.unstable_rank, 1);
        assert!((sp.gap - 1.0).abs() < 1e-14);
    }

    /// The translational mode has `Y = 0` and `W_2 = u_2'`, so the system
    /// carries `(0, u_2'(x0))` to `(0, u_2'(x1))`.
    fn check_translational(shock: &ViscousShockProfile) {
        let f = NsFrame::new(shock);
        let model = &shock.model;
        let n = model.n();
        let n1 = model.dim_u1();
        let m = f.dim();
        let lift = |x: f64| {
            let dw = shock.sample(x).dw;
            let mut v = CVec::zeros(m);
            for (a, i) in (n1..=n).enumerate() {
                v[n + 1 + a] = c(dw[i], 0.0);
            }
            v
        };
        let (x0, x1) = (-3.0, 2.5);
        let mut rhs = |x: f64, y: &CVec| -> Result<CVec> { Ok(f.matrix(c(0.0, 0.0), x)? * y) };
        let y = crate::ode::integrate(&mut rhs, x0, lift(x0), x1, OdeOptions::with_tol(1e-11, 1e-13)).unwrap();
        let target = lift(x1);
        let res = (&y - &target).norm() / target.norm();
        assert!(res < 1e-6, "transport residual {res}");
        // algebraic block: W_1 = -A~11^{-1} A~12 W_2 reproduces u_1'
        if n1 > 0 {
            for x in [-1.0, 0.0, 1.0] {
                let smp = shock.sample(x);
                let (_, b) = f.pair(x).unwrap();
                let w = &b * DVector::from_iterator(m, lift(x).iter().map(|v| v.re));
                for i in 0..n1 {
                    assert!((w[i] - smp.dw[i]).abs() < 1e-8 * (1.0 + smp.dw[i].abs()));
                }
            }
        }
    }

    #[test]
    fn translational_mode_solves_shock_system() {
        let (_, _, shock) = majda_setup();
        check_translational(&shock);
        let m = ModelSpec::IdealGas(crate::model::IdealGasParams::default());
        let up = gas_state_from_pressure(&m, 1.0, 0.0, 1.0).unwrap();
        let us = solve_neumann_shock(&m, &up, 3.0).unwrap();
        let gas = compute_ns_shock_profile(&m, &us, &up, 3.0, &ShockOptions::default()).unwrap();
        check_translational(&gas);
        let sd = limiting_splitting(&NsFrame::new(&gas), c(1.0, 0.0)).unwrap();
        assert_eq!((sd.minus.unstable_rank, sd.plus.stable_rank), (4, 3));
    }

    #[test]
    fn kato_constant_family_keeps_basis() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let b = DMatrix::zeros(2, 2);
        let kt = KatoTransport::new(&a, &b);
        let st = kt.start(1.0, Which::Stable).unwrap();
        let out = kt.continue_to(&st, c(-0.5, 2.0), 1e-6).unwrap();
        assert!((out.basis[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(out.basis[(1, 0)].norm() < 1e-12);
    }

    #[test]
    fn kato_triangular_family_matches_closed_form() {
        // A(l) = [[l, 1], [0, -1]], stable direction (1, -1 - l)
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let kt = KatoTransport::new(&a, &b);
        let mut cur = kt.start(1.0, Which::Stable).unwrap();
        for j in 1..=10 {
            let l = 1.0 + 0.1 * j as f64;
            cur = kt.segment(&cur, c(l, 0.0)).unwrap();
            let v = cur.basis.column(0);
            let ratio = v[1] / v[0];
            assert!((ratio - c(-1.0 - l, 0.0)).norm() < 1e-10);
            let g = CMat::from_row_slice(2, 2, &[c(l, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
            let sp = split_matrix(&g).unwrap();
            let p = sp.stable_projector.unwrap();
            assert!((&p * &cur.basis - &cur.basis).norm() < 1e-10);
        }
    }

    #[test]
    fn kato_loop_returns_with_trivial_monodromy() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.2, -1.0, 0.3, 0.0, 0.1, 2.0]);
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.1, 0.0, -0.5, 0.0, 0.0, 0.2, 1.0]);
        let kt = KatoTransport::new(&a, &b);
        let st = kt.start(1.0, Which::Unstable).unwrap();
        let mut cur = st.clone();
        let n = 40;
        let mut args = Vec::new();
        for j in 1..=n {
            let th = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            let p = c(1.0, 0.0) + C64::from_polar(0.3, th) - c(0.3, 0.0);
            cur = kt.segment(&cur, p).unwrap();
            // coefficient of the transported frame in the starting frame
            let coef = st.basis.adjoint() * &cur.basis;
            args.push(coef.determinant());
        }
        let back = st.basis.adjoint() * &cur.basis;
        assert!((back - CMat::identity(2, 2)).norm() < 1e-8);
        let mut wind = 0.0;
        let mut prev = c(1.0, 0.0);
        for d in args {
            wind += (d / prev).arg();
            prev = d;
        }
        assert!(wind.abs() < 1e-6);
    }

    #[test]
    fn conjugate_parameters_give_conjugate_bases() {
        let (_, _, shock) = majda_setup();
        let f = NsFrame::new(&shock);
        let p = c(0.3, 1.7);
        let r1 = limit_basis(&f, End::Minus, Which::Unstable, p).unwrap();
        let r2 = limit_basis(&f, End::Minus, Which::Unstable, p.conj()).unwrap();
        assert!((r1.basis.map(|v| v.conj()) - r2.basis).norm() < 1e-9);
    }
}
