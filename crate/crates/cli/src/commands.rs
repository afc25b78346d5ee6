use std::path::{Path, PathBuf};

use detstab_core::evans::{evans_lopatinski, evans_ns, evans_rns, EvansOptions, EvansValue};
use detstab_core::limits::{full_certificate, ConvergenceReport, ProfileSet, StudyConfig, Verdict, WaveSetup};
use detstab_core::linalg::C64;
use detstab_core::model::{check_structure, default_xi_grid};
use detstab_core::profile::{
    compute_end_states, compute_ns_shock_profile, compute_viscous_detonation_profile, compute_znd_profile,
    AnyProfile, ProfileCache,
};
use detstab_core::roots::{winding_number, Contour, Root};
use detstab_core::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::output::{emit, evans_csv, prepare_dir, to_json, write_text, Writer};
use crate::{svg, Common, Kind, Points, Target};

fn load(common: &Common) -> Result<ExperimentConfig> {
    ExperimentConfig::load(&common.config)
}

fn pick_eps(cfg: &ExperimentConfig, eps: Option<f64>) -> Result<f64> {
    match eps.or_else(|| cfg.profile.eps.first().copied()) {
        Some(e) if e > 0.0 && e <= cfg.profile.detonation.eps_max => Ok(e),
        Some(e) => Err(Error::Config(format!(
            "eps = {e} outside (0, {}]",
            cfg.profile.detonation.eps_max
        ))),
        None => Err(Error::Config("no viscosity given".into())),
    }
}

fn build(cfg: &ExperimentConfig, kind: Kind, eps: Option<f64>) -> Result<AnyProfile> {
    let setup = cfg.setup()?;
    let model = &cfg.model;
    let ends = compute_end_states(model, &setup.u_plus, setup.s)?;
    let shock = || compute_ns_shock_profile(model, &ends.u_star, &ends.u_plus, ends.s, &setup.shock);
    Ok(match kind {
        Kind::Znd => AnyProfile::Znd(compute_znd_profile(model, &ends, &setup.znd)?),
        Kind::Ns => AnyProfile::Ns(shock()?),
        Kind::Rns => {
            let e = pick_eps(cfg, eps)?;
            let znd = compute_znd_profile(model, &ends, &setup.znd)?;
            let sh = shock()?;
            AnyProfile::Rns(Box::new(compute_viscous_detonation_profile(
                model,
                e,
                &znd,
                &sh,
                &setup.detonation,
            )?))
        }
    })
}

fn eval(p: &AnyProfile, l: C64, o: &EvansOptions) -> Result<EvansValue> {
    match p {
        AnyProfile::Znd(z) => evans_lopatinski(z, l, o),
        AnyProfile::Ns(s) => evans_ns(s, l, o),
        AnyProfile::Rns(d) => evans_rns(d, l, o),
    }
}

fn tolerances(setup: &WaveSetup) -> serde_json::Value {
    serde_json::to_value(setup).expect("setup serializes")
}

pub fn profile(common: &Common, kind: Kind, eps: Option<f64>, out: &Path) -> Result<u8> {
    let cfg = load(common)?;
    let p = build(&cfg, kind, eps)?;
    let rh = match &p {
        AnyProfile::Znd(z) => z.ends.rh_residual(&cfg.model)?,
        AnyProfile::Ns(_) => compute_end_states(&cfg.model, &cfg.setup()?.u_plus, cfg.setup()?.s)?.rh_residual(&cfg.model)?,
        AnyProfile::Rns(d) => d.ends.rh_residual(&cfg.model)?,
    };
    println!("nodes: {}", p.curve().len());
    println!("rh_residual: {rh:e}");
    match &p {
        AnyProfile::Znd(z) => {
            println!("length: {}", z.length());
            println!("conserved_drift: {:e}", z.conserved_drift()?);
        }
        AnyProfile::Ns(s) => {
            println!("ode_residual: {:e}", s.ode_residual()?);
            println!("tail_errors: {:e} {:e}", s.tail_errors.0, s.tail_errors.1);
        }
        AnyProfile::Rns(d) => {
            println!("eps: {}", d.eps);
            println!("conserved_drift: {:e}", d.znd.conserved_drift()?);
            println!("newton_residual: {:e}", d.diagnostics.residual);
            println!("slow_error: {:e}", d.diagnostics.slow_error);
            println!("fast_error: {:e}", d.diagnostics.fast_error);
            println!("bounds_hold: {}", d.diagnostics.bounds_hold);
        }
    }
    ProfileCache::new(p, tolerances(&cfg.setup()?)).save(out)?;
    Ok(0)
}

fn parse_point(s: &str) -> Result<C64> {
    let bad = || Error::Usage(format!("cannot parse spectral point '{s}' (expected re,im)"));
    let mut it = s.split(',').map(|t| t.trim().parse::<f64>());
    let re = it.next().ok_or_else(bad)?.map_err(|_| bad())?;
    let im = match it.next() {
        Some(v) => v.map_err(|_| bad())?,
        None => 0.0,
    };
    if it.next().is_some() {
        return Err(bad());
    }
    Ok(C64::new(re, im))
}

pub fn load_contour(path: &Path) -> Result<Contour> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let c: Contour = serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad contour: {e}")))?;
    c.validate()?;
    Ok(c)
}

fn points(p: &Points) -> Result<Vec<C64>> {
    if !p.lambda.is_empty() {
        return p.lambda.iter().map(|s| parse_point(s)).collect();
    }
    if let Some(path) = &p.contour {
        let c = load_contour(path)?;
        let mut pts = c.polyline(c.base_samples);
        pts.pop();
        return Ok(pts);
    }
    if let Some(r) = p.circle {
        if !(r > 0.0) || p.count == 0 {
            return Err(Error::Usage("circle needs a positive radius and count".into()));
        }
        let n = p.count;
        return Ok((0..n)
            .map(|j| C64::from_polar(r, 2.0 * std::f64::consts::PI * j as f64 / n as f64))
            .collect());
    }
    if let Some(n) = p.random {
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        return Ok((0..n)
            .map(|_| C64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)) * p.scale)
            .collect());
    }
    Err(Error::Usage("no spectral points given".into()))
}

pub fn evans(common: &Common, target: &Target, pts: &Points, out: Option<&Path>) -> Result<u8> {
    let cfg = load(common)?;
    let lambdas = points(pts)?;
    let p = build(&cfg, target.kind, target.eps)?;
    let o = cfg.study.evans;
    let rows = lambdas
        .par_iter()
        .map(|&l| eval(&p, l, &o).map(|v| (l, v)))
        .collect::<Result<Vec<_>>>()?;
    emit(out, &evans_csv(&rows))?;
    Ok(0)
}

pub fn winding(
    common: &Common,
    target: &Target,
    contour: Option<&Path>,
    circle: Option<f64>,
    samples: usize,
    out: Option<&Path>,
) -> Result<u8> {
    let cfg = load(common)?;
    let c = match (contour, circle) {
        (Some(path), _) => load_contour(path)?,
        (None, Some(r)) if r > 0.0 => Contour::circle(C64::new(0.0, 0.0), r).with_samples(samples),
        _ => return Err(Error::Usage("give --contour or a positive --circle radius".into())),
    };
    let p = build(&cfg, target.kind, target.eps)?;
    let o = cfg.study.evans;
    let d = |l: C64| eval(&p, l, &o);
    let w = winding_number(&d, &c, &cfg.study.winding)?;
    emit(out, &to_json(&w)?)?;
    Ok(0)
}

pub fn validate(common: &Common, out: Option<&Path>) -> Result<u8> {
    let cfg = load(common)?;
    let setup = cfg.setup()?;
    let ends = compute_end_states(&cfg.model, &setup.u_plus, setup.s)?;
    let states = [ends.plus(), ends.star(), ends.minus()];
    let report = check_structure(&cfg.model, &states, setup.s, &default_xi_grid())?;
    emit(out, &to_json(&report)?)?;
    Ok(if report.pass { 0 } else { 1 })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResultBundle {
    pub version: String,
    pub config_hash: String,
    pub model_hash: String,
    pub profiles_from_cache: bool,
    pub profiles: Vec<String>,
    pub files: Vec<String>,
    pub verdict: Verdict,
}

fn cache_names(eps: &[f64]) -> Vec<String> {
    let mut v = vec!["profiles/znd.json".to_string(), "profiles/ns.json".to_string()];
    v.extend(eps.iter().map(|e| format!("profiles/rns_{e}.json")));
    v
}

fn load_cached(dir: &Path, cfg: &ExperimentConfig, setup: &WaveSetup, eps: &[f64]) -> Option<ProfileSet> {
    let tol = tolerances(setup);
    let hash = cfg.model.hash();
    let mut loaded = Vec::new();
    for name in cache_names(eps) {
        let c = ProfileCache::load(&dir.join(&name)).ok()?;
        if c.header.tolerances != tol || c.header.model_hash != hash {
            return None;
        }
        loaded.push(c.profile);
    }
    let mut it = loaded.into_iter();
    let znd = match it.next()? {
        AnyProfile::Znd(z) => z,
        _ => return None,
    };
    let shock = match it.next()? {
        AnyProfile::Ns(s) => s,
        _ => return None,
    };
    let mut detonations = Vec::new();
    for (p, &e) in it.zip(eps) {
        match p {
            AnyProfile::Rns(d) if d.eps == e => detonations.push(*d),
            _ => return None,
        }
    }
    Some(ProfileSet {
        model: cfg.model,
        ends: znd.ends.clone(),
        znd,
        shock,
        detonations,
    })
}

fn save_cached(dir: &Path, set: &ProfileSet, setup: &WaveSetup) -> Result<()> {
    let tol = tolerances(setup);
    let eps: Vec<f64> = set.detonations.iter().map(|d| d.eps).collect();
    let mut profiles = vec![AnyProfile::Znd(set.znd.clone()), AnyProfile::Ns(set.shock.clone())];
    profiles.extend(set.detonations.iter().map(|d| AnyProfile::Rns(Box::new(d.clone()))));
    for (name, p) in cache_names(&eps).iter().zip(profiles) {
        write_text(&dir.join(name), &ProfileCache::new(p, tol.clone()).to_json()?)?;
    }
    Ok(())
}

fn roots_csv(report: &ConvergenceReport) -> String {
    let mut s = String::from("region,family,eps,re,im,multiplicity,residual\n");
    let mut push = |region: u8, family: &str, eps: Option<f64>, roots: &[Root]| {
        for r in roots {
            let e = eps.map(|e| e.to_string()).unwrap_or_default();
            s.push_str(&format!(
                "{region},{family},{e},{},{},{},{}\n",
                r.re, r.im, r.multiplicity, r.residual
            ));
        }
    };
    if let Some(r) = &report.region1 {
        push(1, "znd", None, &r.znd_roots);
        for e in &r.per_eps {
            push(1, "rns", Some(e.eps), &e.roots);
        }
    }
    if let Some(r) = &report.region2 {
        for e in &r.per_eps {
            push(2, "ns", Some(e.eps), &e.ns_roots);
            push(2, "rns_scaled", Some(e.eps), &e.roots_scaled);
        }
    }
    if let Some(r) = &report.region3 {
        for e in &r.per_eps {
            push(3, "rns", Some(e.eps), &e.roots);
        }
    }
    s
}

fn region_tables(report: &ConvergenceReport) -> Vec<(String, String)> {
    let mut out = Vec::new();
    if let Some(r) = &report.region1 {
        let mut s = String::from("eps,eta,winding,znd_winding,origin_winding,roots,match_cost,min_relative,agree\n");
        for e in &r.per_eps {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                e.eps,
                e.eta,
                e.winding,
                e.znd_winding,
                e.origin_winding,
                e.roots.len(),
                e.match_cost,
                e.min_relative,
                e.agree
            ));
        }
        out.push(("region1.csv".into(), s));
    }
    if let Some(r) = &report.region2 {
        let mut s = String::from("eps,winding,ns_winding,roots,ns_roots,agree\n");
        for e in &r.per_eps {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.eps,
                e.winding,
                e.ns_winding,
                e.roots_scaled.len(),
                e.ns_roots.len(),
                e.agree
            ));
        }
        out.push(("region2.csv".into(), s));
    }
    if let Some(r) = &report.region3 {
        let mut s = String::from("eps,radius,winding,min_relative,roots,pass\n");
        for e in &r.per_eps {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.eps,
                e.radius,
                e.winding,
                e.min_relative,
                e.roots.len(),
                e.pass
            ));
        }
        out.push(("region3.csv".into(), s));
    }
    out
}

fn study_config(cfg: &ExperimentConfig, regions: Option<Vec<u8>>, eps: Option<Vec<f64>>) -> Result<StudyConfig> {
    let mut s = cfg.study();
    if let Some(r) = regions {
        s.regions = r;
    }
    if let Some(e) = eps {
        s.eps = e;
    }
    s.validate()?;
    Ok(s)
}

pub fn study(common: &Common, regions: Option<Vec<u8>>, eps: Option<Vec<f64>>, out: Option<PathBuf>) -> Result<u8> {
    let cfg = load(common)?;
    let scfg = study_config(&cfg, regions, eps)?;
    let dir = out
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::Usage("no output directory (use --out or output.dir)".into()))?;
    prepare_dir(&dir)?;
    let setup = cfg.setup()?;

    let (set, from_cache) = match load_cached(&dir, &cfg, &setup, &scfg.eps) {
        Some(set) => (set, true),
        None => {
            let set = ProfileSet::build(&cfg.model, &setup, &scfg.eps)?;
            save_cached(&dir, &set, &setup)?;
            (set, false)
        }
    };
    let dets = set.determinants(&scfg.evans);
    let report = full_certificate(&dets, &scfg)?;

    let mut w = Writer::new(dir);
    w.write("report.json", &to_json(&report)?)?;
    for (name, text) in region_tables(&report) {
        w.write(&name, &text)?;
    }
    w.write("roots.csv", &roots_csv(&report))?;
    w.write("zeros.svg", &svg::zero_map(&report))?;
    let bundle = ResultBundle {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        model_hash: cfg.model.hash(),
        profiles_from_cache: from_cache,
        profiles: cache_names(&scfg.eps),
        files: w.files.clone(),
        verdict: report.verdict,
    };
    w.write("bundle.json", &to_json(&bundle)?)?;
    println!("verdict: {}", serde_json::to_string(&report.verdict).unwrap_or_default().trim_matches('"'));
    for v in &report.verdicts {
        for f in &v.failing {
            println!("eps {}: {f}", v.eps);
        }
    }
    Ok(if report.verdict == Verdict::Stable { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_points() {
        assert_eq!(parse_point("1.5,-2").unwrap(), C64::new(1.5, -2.0));
        assert_eq!(parse_point("0").unwrap(), C64::new(0.0, 0.0));
        assert!(parse_point("a,b").is_err());
        assert!(parse_point("1,2,3").is_err());
    }

    #[test]
    fn cache_names_follow_eps() {
        let n = cache_names(&[0.1, 0.05]);
        assert_eq!(n[2], "profiles/rns_0.1.json");
        assert_eq!(n.len(), 4);
    }
}
