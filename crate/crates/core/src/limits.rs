//! Three-region comparison of the viscous detonation determinant with its
//! ZND and Neumann-shock limits, and the resulting stability verdicts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evans::{evans_lopatinski, evans_ns, evans_rns, DeterminantSource, EvansOptions, EvansValue};
use crate::linalg::{c, C64};
use crate::model::ModelSpec;
use crate::profile::{
    compute_end_states, compute_ns_shock_profile, compute_viscous_detonation_profile, compute_znd_profile,
    DetonationOptions, EndStates, ShockOptions, ViscousDetonationProfile, ViscousShockProfile, ZndOptions,
    ZndProfile,
};
use crate::roots::{
    locate_roots, match_roots, winding_number, Contour, LocateOptions, Rect, Root, WindingOptions, WindingResult,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    /// Decreasing list of viscosities.
    pub eps: Vec<f64>,
    pub eta: f64,
    /// Region I box half-width.
    pub c_i: f64,
    /// Region II annulus `c_ii eps <= |lambda~| <= 1 / c_ii`.
    pub c_ii: f64,
    /// Region III radius multiplier: `|lambda| = r_iii / eps`.
    pub r_iii: f64,
    /// Radius of the detour around the origin.
    pub indent: f64,
    /// Smallest admissible `min |D| / max |D|` on the Region III contour.
    pub floor_iii: f64,
    pub noise_floor: f64,
    /// Repeat the windings with doubled region constants.
    pub sensitivity: bool,
    /// Subset of {1, 2, 3} to run.
    pub regions: Vec<u8>,
    pub evans: EvansOptions,
    pub winding: WindingOptions,
    pub locate: LocateOptions,
    pub eps_max: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            eps: vec![0.1, 0.05, 0.025],
            eta: 0.01,
            c_i: 2.0,
            c_ii: 2.0,
            r_iii: 4.0,
            indent: 0.05,
            floor_iii: 1e-3,
            noise_floor: 1e-4,
            sensitivity: false,
            regions: vec![1, 2, 3],
            evans: EvansOptions::default(),
            winding: WindingOptions::default(),
            locate: LocateOptions::default(),
            eps_max: DetonationOptions::default().eps_max,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps.is_empty() {
            return Err(Error::Config("empty eps list".into()));
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("eps list must be strictly decreasing".into()));
        }
        if self.eps.iter().any(|&e| !(e > 0.0 && e <= self.eps_max)) {
            return Err(Error::Config(format!("eps values must lie in (0, {}]", self.eps_max)));
        }
        if !(self.eta > 0.0) {
            return Err(Error::Config("eta must be positive".into()));
        }
        if !(self.indent > 1.2 * self.eta && self.indent < self.c_i) {
            return Err(Error::Config(format!(
                "indentation radius {} must exceed 1.2 eta = {} and stay below c_i",
                self.indent,
                1.2 * self.eta
            )));
        }
        for &e in &self.eps {
            if self.c_ii * e >= 1.0 / self.c_ii {
                return Err(Error::Config(format!(
                    "Region II annulus is empty at eps = {e}: inner {} >= outer {}",
                    self.c_ii * e,
                    1.0 / self.c_ii
                )));
            }
            if self.c_ii * e <= 1.2 * e * self.eta {
                return Err(Error::Config("Region II inner radius below the left abscissa".into()));
            }
        }
        if self.r_iii < 2.0 {
            return Err(Error::Config(format!("r_iii = {} is below the minimum 2", self.r_iii)));
        }
        if self.regions.is_empty() || self.regions.iter().any(|r| !(1..=3).contains(r)) {
            return Err(Error::Config("regions must be a nonempty subset of {1, 2, 3}".into()));
        }
        Ok(())
    }

    pub fn runs(&self, region: u8) -> bool {
        self.regions.contains(&region)
    }
}

/// Traveling-wave data shared by all viscosities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveSetup {
    pub u_plus: Vec<f64>,
    pub s: f64,
    pub znd: ZndOptions,
    pub shock: ShockOptions,
    pub detonation: DetonationOptions,
}

impl Default for WaveSetup {
    fn default() -> Self {
        WaveSetup {
            u_plus: vec![0.0],
            s: 1.0,
            znd: ZndOptions::default(),
            shock: ShockOptions::default(),
            detonation: DetonationOptions::default(),
        }
    }
}

pub struct ProfileSet {
    pub model: ModelSpec,
    pub ends: EndStates,
    pub znd: ZndProfile,
    pub shock: ViscousShockProfile,
    pub detonations: Vec<ViscousDetonationProfile>,
}

impl ProfileSet {
    pub fn build(model: &ModelSpec, setup: &WaveSetup, eps: &[f64]) -> Result<Self> {
        let ends = compute_end_states(model, &setup.u_plus, setup.s)?;
        let znd = compute_znd_profile(model, &ends, &setup.znd)?;
        let shock = compute_ns_shock_profile(model, &ends.u_star, &ends.u_plus, ends.s, &setup.shock)?;
        let detonations = eps
            .iter()
            .map(|&e| compute_viscous_detonation_profile(model, e, &znd, &shock, &setup.detonation))
            .collect::<Result<Vec<_>>>()?;
        Ok(ProfileSet {
            model: *model,
            ends,
            znd,
            shock,
            detonations,
        })
    }

    pub fn determinants(&self, opts: &EvansOptions) -> Determinants<'_> {
        let o = *opts;
        Determinants {
            znd: Box::new(move |l| evans_lopatinski(&self.znd, l, &o)),
            ns: Box::new(move |l| evans_ns(&self.shock, l, &o)),
            rns: self
                .detonations
                .iter()
                .map(|p| {
                    let f: Box<dyn DeterminantSource + '_> = Box::new(move |l| evans_rns(p, l, &o));
                    (p.eps, f)
                })
                .collect(),
        }
    }
}

/// The three determinant families: ZND and viscous detonation in `lambda`,
/// Neumann shock in `lambda~`.
pub struct Determinants<'a> {
    pub znd: Box<dyn DeterminantSource + 'a>,
    pub ns: Box<dyn DeterminantSource + 'a>,
    pub rns: Vec<(f64, Box<dyn DeterminantSource + 'a>)>,
}

impl<'a> Determinants<'a> {
    /// Multiplies every viscous detonation determinant by `f(lambda)`.
    pub fn inject<F>(self, f: F) -> Determinants<'a>
    where
        F: Fn(C64) -> C64 + Sync + Clone + 'a,
    {
        Determinants {
            znd: self.znd,
            ns: self.ns,
            rns: self
                .rns
                .into_iter()
                .map(|(e, src)| {
                    let g = f.clone();
                    let w: Box<dyn DeterminantSource + 'a> =
                        Box::new(move |l: C64| -> Result<EvansValue> { Ok(src.eval(l)?.times(g(l))) });
                    (e, w)
                })
                .collect(),
        }
    }

    pub fn rns_at(&self, eps: f64) -> Result<&(dyn DeterminantSource + 'a)> {
        self.rns
            .iter()
            .find(|(e, _)| *e == eps)
            .map(|(_, s)| s.as_ref())
            .ok_or_else(|| Error::Config(format!("no profile for eps = {eps}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootMatch {
    pub rns: usize,
    pub limit: usize,
    pub distance: f64,
}

fn to_matches(pairs: Vec<(usize, usize, f64)>) -> Vec<RootMatch> {
    pairs
        .into_iter()
        .map(|(a, b, d)| RootMatch {
            rns: a,
            limit: b,
            distance: d,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region1Eps {
    pub eps: f64,
    pub eta: f64,
    pub winding: i64,
    pub znd_winding: i64,
    pub origin_winding: i64,
    pub roots: Vec<Root>,
    pub matches: Vec<RootMatch>,
    pub match_cost: f64,
    pub agree: bool,
    pub min_relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region1 {
    pub znd_origin_winding: i64,
    pub znd_roots: Vec<Root>,
    pub per_eps: Vec<Region1Eps>,
    /// `None` for a single viscosity.
    pub monotone: Option<bool>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region2Eps {
    pub eps: f64,
    pub winding: i64,
    pub ns_winding: i64,
    /// Roots of the viscous detonation determinant in `lambda~ = eps lambda`.
    pub roots_scaled: Vec<Root>,
    pub ns_roots: Vec<Root>,
    pub matches: Vec<RootMatch>,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region2 {
    pub per_eps: Vec<Region2Eps>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region3Eps {
    pub eps: f64,
    pub radius: f64,
    pub winding: i64,
    /// `min |D| / max |D|` on the large arc.
    pub min_relative: f64,
    pub roots: Vec<Root>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region3 {
    pub per_eps: Vec<Region3Eps>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsVerdict {
    pub eps: f64,
    pub verdict: Verdict,
    pub failing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: StudyConfig,
    pub region1: Option<Region1>,
    pub region2: Option<Region2>,
    pub region3: Option<Region3>,
    pub verdicts: Vec<EpsVerdict>,
    pub verdict: Verdict,
    /// Verdicts unchanged under doubled region constants.
    pub sensitivity: Option<bool>,
}

/// Winding with automatic retry on a perturbed contour.
fn robust_winding<F>(d: &dyn DeterminantSource, base: f64, make: F, w: &WindingOptions) -> Result<(WindingResult, f64)>
where
    F: Fn(f64) -> Result<Contour>,
{
    let mut last = None;
    for f in [1.0, 1.2, 0.8] {
        let v = base * f;
        match winding_number(d, &make(v)?, w) {
            Ok(r) => return Ok((r, v)),
            Err(e @ Error::ContourThroughZero(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap())
}

fn outside(roots: Vec<Root>, radius: f64) -> Vec<Root> {
    roots.into_iter().filter(|r| r.z().norm() >= radius).collect()
}

fn region1_box(cfg: &StudyConfig, eta: f64) -> Result<Contour> {
    Contour::indented_box(-eta, cfg.c_i, cfg.c_i, cfg.indent)
}

fn region1_roots(d: &dyn DeterminantSource, cfg: &StudyConfig, eta: f64) -> Result<Vec<Root>> {
    let r = locate_roots(d, &Rect::new(-eta, cfg.c_i, -cfg.c_i, cfg.c_i), &cfg.locate)?;
    Ok(outside(r.roots, cfg.indent))
}

pub fn region1_study(dets: &Determinants<'_>, cfg: &StudyConfig) -> Result<Region1> {
    let circle = Contour::circle(c(0.0, 0.0), cfg.indent);
    let znd_origin = winding_number(dets.znd.as_ref(), &circle, &cfg.winding)?.winding;
    let mut znd_cache: Vec<(f64, i64, Vec<Root>)> = Vec::new();
    let mut per_eps = Vec::new();
    let diameter = (cfg.c_i + cfg.eta).hypot(2.0 * cfg.c_i);
    for (eps, src) in &dets.rns {
        let (w, eta) = robust_winding(src.as_ref(), cfg.eta, |e| region1_box(cfg, e), &cfg.winding)?;
        let (zw, zroots) = match znd_cache.iter().find(|(e, _, _)| *e == eta) {
            Some((_, w, r)) => (*w, r.clone()),
            None => {
                let zw = winding_number(dets.znd.as_ref(), &region1_box(cfg, eta)?, &cfg.winding)?.winding;
                let zr = if zw > 0 {
                    region1_roots(dets.znd.as_ref(), cfg, eta)?
                } else {
                    Vec::new()
                };
                znd_cache.push((eta, zw, zr.clone()));
                (zw, zr)
            }
        };
        let origin = winding_number(src.as_ref(), &circle, &cfg.winding)?.winding;
        let roots = if w.winding > 0 {
            region1_roots(src.as_ref(), cfg, eta)?
        } else {
            Vec::new()
        };
        let a: Vec<C64> = roots.iter().map(Root::z).collect();
        let b: Vec<C64> = zroots.iter().map(Root::z).collect();
        let (pairs, cost) = match_roots(&a, &b, diameter);
        per_eps.push(Region1Eps {
            eps: *eps,
            eta,
            winding: w.winding,
            znd_winding: zw,
            origin_winding: origin,
            roots,
            matches: to_matches(pairs),
            match_cost: cost,
            agree: w.winding == zw && origin == znd_origin,
            min_relative: w.min_relative,
        });
    }
    let monotone = if per_eps.len() < 2 {
        None
    } else {
        Some(per_eps.windows(2).all(|p| p[1].match_cost <= p[0].match_cost + cfg.noise_floor))
    };
    let znd_roots = znd_cache.first().map(|z| z.2.clone()).unwrap_or_default();
    let pass = per_eps.iter().all(|r| r.agree) && monotone.unwrap_or(true);
    Ok(Region1 {
        znd_origin_winding: znd_origin,
        znd_roots,
        per_eps,
        monotone,
        pass,
    })
}

pub fn region2_study(dets: &Determinants<'_>, cfg: &StudyConfig) -> Result<Region2> {
    let outer = 1.0 / cfg.c_ii;
    let mut per_eps = Vec::new();
    for (eps, src) in &dets.rns {
        let e = *eps;
        let inner = cfg.c_ii * e;
        let scaled = move |lt: C64| src.eval(lt / e);
        let ns = |lt: C64| dets.ns.eval(lt).map(|v| v.times(c(1.0, 0.0) / lt));
        let make = |eta: f64| Contour::annular_sector(-e * eta, inner, outer);
        let (w, eta) = robust_winding(&scaled, cfg.eta, make, &cfg.winding)?;
        let nw = winding_number(&ns, &make(eta)?, &cfg.winding)?;
        let rect = Rect::new(-e * eta, outer, -outer, outer);
        let find = |d: &dyn DeterminantSource, wind: i64| -> Result<Vec<Root>> {
            if wind == 0 {
                return Ok(Vec::new());
            }
            let r = locate_roots(d, &rect, &cfg.locate)?;
            Ok(outside(r.roots, inner))
        };
        let roots_scaled = find(&scaled, w.winding)?;
        let ns_roots = find(&ns, nw.winding)?;
        let a: Vec<C64> = roots_scaled.iter().map(Root::z).collect();
        let b: Vec<C64> = ns_roots.iter().map(Root::z).collect();
        let (pairs, _) = match_roots(&a, &b, 2.0 * outer);
        per_eps.push(Region2Eps {
            eps: e,
            winding: w.winding,
            ns_winding: nw.winding,
            roots_scaled,
            ns_roots,
            matches: to_matches(pairs),
            agree: w.winding == nw.winding,
        });
    }
    let pass = per_eps.iter().all(|r| r.agree);
    Ok(Region2 { per_eps, pass })
}

pub fn region3_check(dets: &Determinants<'_>, cfg: &StudyConfig) -> Result<Region3> {
    let mut per_eps = Vec::new();
    for (eps, src) in &dets.rns {
        let radius = cfg.r_iii / eps;
        let (w, _) = robust_winding(src.as_ref(), cfg.indent, |rho| Contour::half_disk(radius, rho), &cfg.winding)?;
        // the floor applies to the large arc; the chord crosses moderate
        // frequencies where |D| legitimately grows by orders of magnitude
        let [lo, hi] = w.segment_ln_abs[0];
        let arc_relative = (lo - hi).exp();
        let roots = if w.winding != 0 {
            let r = locate_roots(src.as_ref(), &Rect::new(-cfg.eta, radius, -radius, radius), &cfg.locate)?;
            outside(r.roots, cfg.indent)
        } else {
            Vec::new()
        };
        per_eps.push(Region3Eps {
            eps: *eps,
            radius,
            winding: w.winding,
            min_relative: arc_relative,
            pass: w.winding == 0 && arc_relative >= cfg.floor_iii,
            roots,
        });
    }
    let pass = per_eps.iter().all(|r| r.pass);
    Ok(Region3 { per_eps, pass })
}

fn verdicts(
    cfg: &StudyConfig,
    r1: &Option<Region1>,
    r2: &Option<Region2>,
    r3: &Option<Region3>,
) -> (Vec<EpsVerdict>, Verdict) {
    let mut out = Vec::new();
    for (i, &eps) in cfg.eps.iter().enumerate() {
        let mut failing = Vec::new();
        let mut unstable = false;
        if let Some(r) = r1 {
            let e = &r.per_eps[i];
            if e.winding != 0 {
                unstable = true;
                failing.push(format!("region 1: {} zero(s) in the box", e.winding));
            }
            if e.origin_winding != 1 {
                failing.push(format!("region 1: origin winding {} (expected 1)", e.origin_winding));
            }
            if !e.agree {
                failing.push(format!("region 1: winding {} differs from ZND {}", e.winding, e.znd_winding));
            }
        }
        if let Some(r) = r2 {
            let e = &r.per_eps[i];
            if e.winding != 0 {
                unstable = true;
                failing.push(format!("region 2: {} zero(s) in the annulus", e.winding));
            }
            if !e.agree {
                failing.push(format!("region 2: winding {} differs from shock {}", e.winding, e.ns_winding));
            }
        }
        if let Some(r) = r3 {
            let e = &r.per_eps[i];
            if e.winding != 0 {
                unstable = true;
                failing.push(format!("region 3: {} zero(s) in the half-disk", e.winding));
            }
            if e.min_relative < cfg.floor_iii {
                failing.push(format!("region 3: min |D| ratio {:e} on the arc below floor", e.min_relative));
            }
        }
        let verdict = if unstable {
            Verdict::Unstable
        } else if failing.is_empty() {
            Verdict::Stable
        } else {
            Verdict::Inconclusive
        };
        out.push(EpsVerdict { eps, verdict, failing });
    }
    let overall = if out.iter().any(|v| v.verdict == Verdict::Unstable) {
        Verdict::Unstable
    } else if out.iter().all(|v| v.verdict == Verdict::Stable) {
        Verdict::Stable
    } else {
        Verdict::Inconclusive
    };
    (out, overall)
}

fn run_regions(dets: &Determinants<'_>, cfg: &StudyConfig) -> Result<ConvergenceReport> {
    let region1 = if cfg.runs(1) { Some(region1_study(dets, cfg)?) } else { None };
    let region2 = if cfg.runs(2) { Some(region2_study(dets, cfg)?) } else { None };
    let region3 = if cfg.runs(3) { Some(region3_check(dets, cfg)?) } else { None };
    let (verdicts, verdict) = verdicts(cfg, &region1, &region2, &region3);
    Ok(ConvergenceReport {
        config: cfg.clone(),
        region1,
        region2,
        region3,
        verdicts,
        verdict,
        sensitivity: None,
    })
}

/// Composes the selected regions into per-viscosity verdicts.
pub fn full_certificate(dets: &Determinants<'_>, cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let listed: Vec<f64> = dets.rns.iter().map(|(e, _)| *e).collect();
    if listed != cfg.eps {
        return Err(Error::Config(format!("determinants given for {listed:?}, config lists {:?}", cfg.eps)));
    }
    let mut report = run_regions(dets, cfg)?;
    if cfg.sensitivity {
        let mut doubled = cfg.clone();
        doubled.c_i *= 2.0;
        doubled.r_iii *= 2.0;
        if doubled.eps.iter().all(|&e| 2.0 * cfg.c_ii * e < 0.5 / cfg.c_ii) {
            doubled.c_ii *= 2.0;
        }
        doubled.sensitivity = false;
        let again = run_regions(dets, &doubled)?;
        report.sensitivity = Some(
            again.verdict == report.verdict
                && again.verdicts.iter().zip(&report.verdicts).all(|(a, b)| a.verdict == b.verdict),
        );
    }
    Ok(report)
}

/// Builds the profiles for `cfg.eps` and certifies them.
pub fn certify(model: &ModelSpec, setup: &WaveSetup, cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let set = ProfileSet::build(model, setup, &cfg.eps)?;
    let dets = set.determinants(&cfg.evans);
    full_certificate(&dets, cfg)
}
