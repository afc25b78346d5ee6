//! Zero counting by phase unwrapping along closed contours, and root
//! location by box quadrisection with Muller polishing.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evans::{DeterminantSource, EvansValue};
use crate::linalg::{c, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Segment {
    Line { from: [f64; 2], to: [f64; 2] },
    /// Arc from `theta0` to `theta1`; counterclockwise when `theta1 > theta0`.
    Arc { center: [f64; 2], radius: f64, theta0: f64, theta1: f64 },
}

fn pt(p: [f64; 2]) -> C64 {
    c(p[0], p[1])
}

impl Segment {
    pub fn point(&self, t: f64) -> C64 {
        match *self {
            Segment::Line { from, to } => pt(from) + (pt(to) - pt(from)) * t,
            Segment::Arc {
                center,
                radius,
                theta0,
                theta1,
            } => pt(center) + C64::from_polar(radius, theta0 + (theta1 - theta0) * t),
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { from, to } => (pt(to) - pt(from)).norm(),
            Segment::Arc {
                radius, theta0, theta1, ..
            } => radius * (theta1 - theta0).abs(),
        }
    }

    pub fn start(&self) -> C64 {
        self.point(0.0)
    }

    pub fn end(&self) -> C64 {
        self.point(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Indentation {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Contour {
    pub segments: Vec<Segment>,
    /// Samples on the longest segment; shorter ones get proportionally fewer.
    #[serde(default = "default_samples")]
    pub base_samples: usize,
    #[serde(default)]
    pub indentations: Vec<Indentation>,
}

fn default_samples() -> usize {
    32
}

impl Contour {
    pub fn new(segments: Vec<Segment>) -> Self {
        Contour {
            segments,
            base_samples: default_samples(),
            indentations: Vec::new(),
        }
    }

    pub fn circle(center: C64, radius: f64) -> Self {
        Contour::new(vec![Segment::Arc {
            center: [center.re, center.im],
            radius,
            theta0: -PI,
            theta1: PI,
        }])
    }

    /// Counterclockwise rectangle.
    pub fn rectangle(re0: f64, re1: f64, im0: f64, im1: f64) -> Self {
        let p = [[re0, im0], [re1, im0], [re1, im1], [re0, im1]];
        Contour::new((0..4).map(|i| Segment::Line { from: p[i], to: p[(i + 1) % 4] }).collect())
    }

    /// Box `[re0, re1] x [-half, half]` whose left edge `Re = re0 < 0` detours
    /// around the origin through `Re > 0` along a circle of radius `rho`,
    /// leaving the origin outside.
    pub fn indented_box(re0: f64, re1: f64, half: f64, rho: f64) -> Result<Self> {
        if !(re0 < 0.0 && rho > -re0 && rho < half && rho < re1) {
            return Err(Error::Config(format!(
                "indentation radius {rho} incompatible with box [{re0}, {re1}] x [-{half}, {half}]"
            )));
        }
        let y = (rho * rho - re0 * re0).sqrt();
        let th = y.atan2(re0);
        let mut segs = vec![
            Segment::Line { from: [re0, -half], to: [re1, -half] },
            Segment::Line { from: [re1, -half], to: [re1, half] },
            Segment::Line { from: [re1, half], to: [re0, half] },
            Segment::Line { from: [re0, half], to: [re0, y] },
        ];
        segs.push(Segment::Arc {
            center: [0.0, 0.0],
            radius: rho,
            theta0: th,
            theta1: -th,
        });
        segs.push(Segment::Line { from: [re0, -y], to: [re0, -half] });
        let mut out = Contour::new(segs);
        out.indentations.push(Indentation {
            center: [0.0, 0.0],
            radius: rho,
        });
        Ok(out)
    }

    /// `{Re >= re0, r <= |z| <= big}` with `re0 < 0`, the inner circle
    /// traversed clockwise.
    pub fn annular_sector(re0: f64, r: f64, big: f64) -> Result<Self> {
        if !(re0 <= 0.0 && -re0 < r && r < big) {
            return Err(Error::Config(format!("annulus radii {r} < {big} with abscissa {re0} are inconsistent")));
        }
        let to = (re0 / big).acos();
        let ti = (re0 / r).acos();
        Ok(Contour::new(vec![
            Segment::Arc {
                center: [0.0, 0.0],
                radius: big,
                theta0: -to,
                theta1: to,
            },
            Segment::Line {
                from: [re0, big * to.sin()],
                to: [re0, r * ti.sin()],
            },
            Segment::Arc {
                center: [0.0, 0.0],
                radius: r,
                theta0: ti,
                theta1: -ti,
            },
            Segment::Line {
                from: [re0, -r * ti.sin()],
                to: [re0, -big * to.sin()],
            },
        ]))
    }

    /// Right half-disk of radius `big` closed along the imaginary axis, with
    /// the origin excluded by a detour of radius `rho` into `Re > 0`.
    pub fn half_disk(big: f64, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < big) {
            return Err(Error::Config(format!("half-disk radius {big} must exceed indentation {rho}")));
        }
        let mut out = Contour::new(vec![
            Segment::Arc {
                center: [0.0, 0.0],
                radius: big,
                theta0: -PI / 2.0,
                theta1: PI / 2.0,
            },
            Segment::Line { from: [0.0, big], to: [0.0, rho] },
            Segment::Arc {
                center: [0.0, 0.0],
                radius: rho,
                theta0: PI / 2.0,
                theta1: -PI / 2.0,
            },
            Segment::Line { from: [0.0, -rho], to: [0.0, -big] },
        ]);
        out.indentations.push(Indentation {
            center: [0.0, 0.0],
            radius: rho,
        });
        Ok(out)
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.base_samples = n;
        self
    }

    /// Largest gap between consecutive segment endpoints.
    pub fn closure_gap(&self) -> f64 {
        let n = self.segments.len();
        (0..n)
            .map(|i| (self.segments[i].end() - self.segments[(i + 1) % n].start()).norm())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::Config("contour has no segments".into()));
        }
        let scale = 1.0 + self.segments.iter().map(|s| s.start().norm()).fold(0.0, f64::max);
        if self.closure_gap() > 1e-12 * scale {
            return Err(Error::Config(format!("contour is not closed (gap {:e})", self.closure_gap())));
        }
        if self.base_samples < 4 {
            return Err(Error::Config("contour needs at least 4 base samples".into()));
        }
        Ok(())
    }

    /// Points along the contour, `per_segment` per segment, closing point included.
    pub fn polyline(&self, per_segment: usize) -> Vec<C64> {
        let n = per_segment.max(1);
        let mut out: Vec<C64> = self
            .segments
            .iter()
            .flat_map(|s| (0..n).map(move |j| s.point(j as f64 / n as f64)))
            .collect();
        if let Some(s) = self.segments.first() {
            out.push(s.start());
        }
        out
    }

    /// Image under `z -> a z`, `a > 0`.
    pub fn scaled(&self, a: f64) -> Self {
        let sc = |p: [f64; 2]| [p[0] * a, p[1] * a];
        Contour {
            segments: self
                .segments
                .iter()
                .map(|s| match *s {
                    Segment::Line { from, to } => Segment::Line { from: sc(from), to: sc(to) },
                    Segment::Arc {
                        center,
                        radius,
                        theta0,
                        theta1,
                    } => Segment::Arc {
                        center: sc(center),
                        radius: radius * a,
                        theta0,
                        theta1,
                    },
                })
                .collect(),
            base_samples: self.base_samples,
            indentations: self
                .indentations
                .iter()
                .map(|i| Indentation {
                    center: sc(i.center),
                    radius: i.radius * a,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindingOptions {
    /// Refine until every increment of `log D` is below this.
    pub max_increment: f64,
    pub max_depth: usize,
    /// Smallest admissible `|D| / max |D|` on the contour.
    pub floor: f64,
}

impl Default for WindingOptions {
    fn default() -> Self {
        WindingOptions {
            max_increment: PI / 4.0,
            max_depth: 24,
            floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingResult {
    pub winding: i64,
    /// Accumulated phase over `2 pi` before rounding.
    pub raw: f64,
    pub deviation: f64,
    /// `min |D| / max |D|` over the samples.
    pub min_relative: f64,
    pub min_ln_abs: f64,
    pub max_ln_abs: f64,
    /// `[min, max]` of `ln |D|` on each segment.
    pub segment_ln_abs: Vec<[f64; 2]>,
    pub samples: usize,
}

fn eval_all(d: &dyn DeterminantSource, pts: &[C64]) -> Result<Vec<EvansValue>> {
    pts.par_iter().map(|&l| d.eval(l)).collect()
}

fn phase_step(a: &EvansValue, b: &EvansValue) -> f64 {
    (b.value / a.value).arg()
}

/// `|log D(b) - log D(a)|` on the principal branch. The modulus part
/// catches fast rotations that alias to a small phase step.
fn log_step(a: &EvansValue, b: &EvansValue) -> f64 {
    c((b.value / a.value).norm().ln() + b.log_scale - a.log_scale, phase_step(a, b)).norm()
}

/// Argument-principle winding of `d` along `contour`.
pub fn winding_number(d: &dyn DeterminantSource, contour: &Contour, opts: &WindingOptions) -> Result<WindingResult> {
    contour.validate()?;
    let longest = contour.segments.iter().map(|s| s.length()).fold(0.0, f64::max);
    let mut total = 0.0;
    let mut min_ln = f64::INFINITY;
    let mut max_ln = f64::NEG_INFINITY;
    let mut count = 0;
    let mut per_segment = Vec::with_capacity(contour.segments.len());
    for seg in &contour.segments {
        let n = ((contour.base_samples as f64 * seg.length() / longest).ceil() as usize).max(4);
        let mut ts: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
        let mut vals = eval_all(d, &ts.iter().map(|&t| seg.point(t)).collect::<Vec<_>>())?;
        for depth in 0..=opts.max_depth {
            let bad: Vec<usize> = (0..ts.len() - 1)
                .filter(|&j| log_step(&vals[j], &vals[j + 1]) >= opts.max_increment)
                .collect();
            if bad.is_empty() {
                break;
            }
            if depth == opts.max_depth {
                return Err(Error::ContourThroughZero(format!(
                    "log D jump persists near {} after {depth} refinements",
                    seg.point(ts[bad[0]])
                )));
            }
            let mids: Vec<f64> = bad.iter().map(|&j| 0.5 * (ts[j] + ts[j + 1])).collect();
            let mv = eval_all(d, &mids.iter().map(|&t| seg.point(t)).collect::<Vec<_>>())?;
            let mut nt = Vec::with_capacity(ts.len() + mids.len());
            let mut nv = Vec::with_capacity(ts.len() + mids.len());
            let mut k = 0;
            for j in 0..ts.len() {
                nt.push(ts[j]);
                nv.push(vals[j]);
                if k < bad.len() && bad[k] == j {
                    nt.push(mids[k]);
                    nv.push(mv[k]);
                    k += 1;
                }
            }
            ts = nt;
            vals = nv;
        }
        let mut range = [f64::INFINITY, f64::NEG_INFINITY];
        for v in &vals {
            let l = v.ln_abs();
            range = [range[0].min(l), range[1].max(l)];
        }
        min_ln = min_ln.min(range[0]);
        max_ln = max_ln.max(range[1]);
        per_segment.push(range);
        total += (0..vals.len() - 1).map(|j| phase_step(&vals[j], &vals[j + 1])).sum::<f64>();
        count += vals.len();
    }
    let raw = total / (2.0 * PI);
    let winding = raw.round() as i64;
    let deviation = (raw - winding as f64).abs();
    let min_relative = (min_ln - max_ln).exp();
    if !min_ln.is_finite() || min_relative < opts.floor {
        return Err(Error::ContourThroughZero(format!(
            "|D| drops to {min_relative:e} of its maximum on the contour"
        )));
    }
    if deviation >= 1e-2 {
        return Err(Error::ContourThroughZero(format!("winding {raw} is not near an integer")));
    }
    Ok(WindingResult {
        winding,
        raw,
        deviation,
        min_relative,
        min_ln_abs: min_ln,
        max_ln_abs: max_ln,
        segment_ln_abs: per_segment,
        samples: count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re0: f64,
    pub re1: f64,
    pub im0: f64,
    pub im1: f64,
}

impl Rect {
    pub fn new(re0: f64, re1: f64, im0: f64, im1: f64) -> Self {
        Rect { re0, re1, im0, im1 }
    }

    pub fn contour(&self, samples: usize) -> Contour {
        Contour::rectangle(self.re0, self.re1, self.im0, self.im1).with_samples(samples)
    }

    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.re0 && z.re <= self.re1 && z.im >= self.im0 && z.im <= self.im1
    }

    pub fn center(&self) -> C64 {
        c(0.5 * (self.re0 + self.re1), 0.5 * (self.im0 + self.im1))
    }

    pub fn diameter(&self) -> f64 {
        (self.re1 - self.re0).hypot(self.im1 - self.im0)
    }

    /// Four children split at a point near the centre; `shift` in (-0.5, 0.5)
    /// moves the split off zeros on the dividing lines.
    pub fn quadrisect(&self, shift: f64) -> [Rect; 4] {
        let xm = self.re0 + (0.5 + shift) * (self.re1 - self.re0);
        let ym = self.im0 + (0.5 + 0.7 * shift) * (self.im1 - self.im0);
        [
            Rect::new(self.re0, xm, self.im0, ym),
            Rect::new(xm, self.re1, self.im0, ym),
            Rect::new(self.re0, xm, ym, self.im1),
            Rect::new(xm, self.re1, ym, self.im1),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub re: f64,
    pub im: f64,
    pub multiplicity: i64,
    /// `|D(root)|` relative to the largest `|D|` on the enclosing box.
    pub residual: f64,
}

impl Root {
    pub fn z(&self) -> C64 {
        c(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxNode {
    pub rect: Rect,
    pub depth: usize,
    pub winding: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootReport {
    pub winding: i64,
    pub roots: Vec<Root>,
    pub tree: Vec<BoxNode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocateOptions {
    pub max_depth: usize,
    pub samples: usize,
    pub winding: WindingOptions,
    /// Relative step size at which Muller stops.
    pub tol: f64,
}

impl Default for LocateOptions {
    fn default() -> Self {
        LocateOptions {
            max_depth: 8,
            samples: 16,
            winding: WindingOptions::default(),
            tol: 1e-13,
        }
    }
}

fn box_winding(d: &dyn DeterminantSource, r: &Rect, o: &LocateOptions) -> Result<WindingResult> {
    winding_number(d, &r.contour(o.samples), &o.winding)
}

/// Muller iteration on `d` from three points around `z0` at spacing `h`.
pub fn muller(d: &dyn DeterminantSource, z0: C64, h: f64, tol: f64, max_iter: usize) -> Result<C64> {
    let mut xs = [z0 - h, z0 + c(0.0, h) * 0.5, z0 + h * 0.5];
    let v0 = d.eval(xs[0])?;
    let reference = v0.log_scale;
    let f = |v: EvansValue| v.scaled(reference);
    let mut fs = [f(v0), f(d.eval(xs[1])?), f(d.eval(xs[2])?)];
    for _ in 0..max_iter {
        let (x0, x1, x2) = (xs[0], xs[1], xs[2]);
        let (f0, f1, f2) = (fs[0], fs[1], fs[2]);
        if f2 == c(0.0, 0.0) {
            return Ok(x2);
        }
        let h1 = x1 - x0;
        let h2 = x2 - x1;
        let d1 = (f1 - f0) / h1;
        let d2 = (f2 - f1) / h2;
        let a = (d2 - d1) / (h2 + h1);
        let b = a * h2 + d2;
        let disc = (b * b - a * f2 * 4.0).sqrt();
        let den = if (b + disc).norm() > (b - disc).norm() { b + disc } else { b - disc };
        let step = if den.norm() == 0.0 { c(h, 0.0) * 0.1 } else { f2 * -2.0 / den };
        let x3 = x2 + step;
        if !x3.re.is_finite() || !x3.im.is_finite() {
            return Err(Error::Convergence {
                msg: "Muller iterate is not finite".into(),
                residual: f64::NAN,
            });
        }
        xs = [x1, x2, x3];
        fs = [f1, f2, f(d.eval(x3)?)];
        if step.norm() <= tol * (1.0 + x3.norm()) {
            return Ok(x3);
        }
    }
    Ok(xs[2])
}

fn scale_on(d: &dyn DeterminantSource, r: &Rect) -> Result<f64> {
    let pts = [
        c(r.re0, r.im0),
        c(r.re1, r.im0),
        c(r.re1, r.im1),
        c(r.re0, r.im1),
    ];
    Ok(eval_all(d, &pts)?
        .iter()
        .map(|v| v.ln_abs())
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Muller from the box centre; `None` when the iterate leaves the box.
fn polish(d: &dyn DeterminantSource, r: &Rect, mult: i64, o: &LocateOptions, force: bool) -> Result<Option<Root>> {
    let h = 0.25 * r.diameter();
    let z = match muller(d, r.center(), h, o.tol, 80) {
        Ok(z) if contains_padded(r, z) => z,
        _ if force => r.center(),
        _ => return Ok(None),
    };
    let scale = scale_on(d, r)?;
    let v = d.eval(z)?;
    Ok(Some(Root {
        re: z.re,
        im: z.im,
        multiplicity: mult,
        residual: (v.ln_abs() - scale).exp(),
    }))
}

fn contains_padded(r: &Rect, z: C64) -> bool {
    let pad = 1e-9 * (1.0 + r.diameter());
    z.re >= r.re0 - pad && z.re <= r.re1 + pad && z.im >= r.im0 - pad && z.im <= r.im1 + pad
}

/// Roots of `d` inside `rect`, by winding-guided quadrisection.
pub fn locate_roots(d: &dyn DeterminantSource, rect: &Rect, o: &LocateOptions) -> Result<RootReport> {
    let w = box_winding(d, rect, o)?;
    let mut report = RootReport {
        winding: w.winding,
        roots: Vec::new(),
        tree: vec![BoxNode {
            rect: *rect,
            depth: 0,
            winding: w.winding,
        }],
    };
    if w.winding < 0 {
        return Err(Error::ContourThroughZero(format!("negative winding {} on a box", w.winding)));
    }
    let mut stack = vec![(*rect, 0usize, w.winding)];
    while let Some((r, depth, wind)) = stack.pop() {
        if wind == 0 {
            continue;
        }
        if depth >= o.max_depth {
            report.roots.extend(polish(d, &r, wind, o, true)?);
            continue;
        }
        if wind == 1 && depth > 0 {
            if let Some(root) = polish(d, &r, wind, o, false)? {
                report.roots.push(root);
                continue;
            }
        }
        let mut children = None;
        for shift in [0.0, 0.0371, -0.0613, 0.1127] {
            let kids = r.quadrisect(shift);
            let ws: Result<Vec<i64>> = kids.iter().map(|k| box_winding(d, k, o).map(|w| w.winding)).collect();
            match ws {
                Ok(ws) if ws.iter().sum::<i64>() == wind && ws.iter().all(|&v| v >= 0) => {
                    children = Some((kids, ws));
                    break;
                }
                Ok(_) | Err(Error::ContourThroughZero(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        let (kids, ws) = match children {
            Some(v) => v,
            None => {
                report.roots.extend(polish(d, &r, wind, o, true)?);
                continue;
            }
        };
        for (k, wk) in kids.iter().zip(ws) {
            report.tree.push(BoxNode {
                rect: *k,
                depth: depth + 1,
                winding: wk,
            });
            if wk > 0 {
                stack.push((*k, depth + 1, wk));
            }
        }
    }
    report
        .roots
        .sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
    Ok(report)
}

/// Optimal assignment between two small point sets; unmatched points cost
/// `penalty`. Returns pairs `(i, j, distance)` and the total cost.
pub fn match_roots(a: &[C64], b: &[C64], penalty: f64) -> (Vec<(usize, usize, f64)>, f64) {
    // pad to square with dummy points costing `penalty`
    let n = a.len().max(b.len());
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let cost = |i: usize, j: usize| -> f64 {
        if i < a.len() && j < b.len() {
            (a[i] - b[j]).norm().min(penalty)
        } else {
            penalty
        }
    };
    let mut best = (f64::INFINITY, Vec::new());
    let mut perm: Vec<usize> = (0..n).collect();
    // n <= 10 keeps the exhaustive search cheap enough with pruning
    fn search(
        k: usize,
        perm: &mut Vec<usize>,
        acc: f64,
        cost: &dyn Fn(usize, usize) -> f64,
        best: &mut (f64, Vec<usize>),
    ) {
        if acc >= best.0 {
            return;
        }
        if k == perm.len() {
            *best = (acc, perm.clone());
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            let cst = cost(k, perm[k]);
            search(k + 1, perm, acc + cst, cost, best);
            perm.swap(k, i);
        }
    }
    search(0, &mut perm, 0.0, &cost, &mut best);
    let pairs = (0..n)
        .filter(|&i| i < a.len() && best.1[i] < b.len())
        .map(|i| (i, best.1[i], (a[i] - b[best.1[i]]).norm()))
        .collect();
    (pairs, best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evans::plain;

    fn src(f: impl Fn(C64) -> C64 + Sync) -> impl Fn(C64) -> Result<EvansValue> + Sync {
        move |l| Ok(plain(f(l)))
    }

    #[test]
    fn trivial_windings() {
        let o = WindingOptions::default();
        let circ = Contour::circle(c(0.0, 0.0), 1.0);
        assert_eq!(winding_number(&src(|_| c(1.0, 0.0)), &circ, &o).unwrap().winding, 0);
        assert_eq!(winding_number(&src(|l| l), &circ, &o).unwrap().winding, 1);
        let w = winding_number(&src(|l| (l - 0.5) * (l + 2.0)), &circ, &o).unwrap();
        assert_eq!(w.winding, 1);
        assert!(w.deviation < 1e-10);
    }

    #[test]
    fn contours_close() {
        assert!(Contour::indented_box(-0.01, 2.0, 2.0, 0.05).unwrap().validate().is_ok());
        assert!(Contour::annular_sector(-0.001, 0.1, 0.5).unwrap().validate().is_ok());
        assert!(Contour::half_disk(80.0, 0.05).unwrap().validate().is_ok());
        assert!(Contour::indented_box(-0.1, 2.0, 2.0, 0.05).is_err());
    }

    #[test]
    fn indentation_excludes_origin() {
        let o = WindingOptions::default();
        let b = Contour::indented_box(-0.01, 2.0, 2.0, 0.05).unwrap();
        assert_eq!(winding_number(&src(|l| l), &b, &o).unwrap().winding, 0);
        assert_eq!(winding_number(&src(|l| l - c(-0.005, 0.1)), &b, &o).unwrap().winding, 1);
        let h = Contour::half_disk(10.0, 0.05).unwrap();
        assert_eq!(winding_number(&src(|l| l * (l - 3.0)), &h, &o).unwrap().winding, 1);
        let a = Contour::annular_sector(-0.01, 0.1, 1.0).unwrap();
        assert_eq!(winding_number(&src(|l| l * (l - 0.5) * (l + 0.05)), &a, &o).unwrap().winding, 1);
    }

    #[test]
    fn contour_round_trips_through_json() {
        let b = Contour::indented_box(-0.01, 2.0, 2.0, 0.05).unwrap();
        let s = serde_json::to_string(&b).unwrap();
        let back: Contour = serde_json::from_str(&s).unwrap();
        assert_eq!(b, back);
    }

    #[test]
    fn locates_simple_and_double_roots() {
        let o = LocateOptions::default();
        let r = locate_roots(&src(|l| l * l - 0.25), &Rect::new(-1.0, 1.0, -1.0, 1.0), &o).unwrap();
        assert_eq!(r.winding, 2);
        assert_eq!(r.roots.len(), 2);
        assert!((r.roots[0].z() - c(-0.5, 0.0)).norm() < 1e-8);
        assert!((r.roots[1].z() - c(0.5, 0.0)).norm() < 1e-8);
        let r = locate_roots(&src(|_| c(5.0, 0.0)), &Rect::new(-1.0, 1.0, -1.0, 1.0), &o).unwrap();
        assert!(r.roots.is_empty() && r.winding == 0);
        let r = locate_roots(&src(|l| l * l), &Rect::new(-0.9, 1.1, -0.8, 1.2), &o).unwrap();
        assert_eq!(r.roots.len(), 1);
        assert_eq!(r.roots[0].multiplicity, 2);
        assert!(r.roots[0].z().norm() < 1e-6);
    }

    #[test]
    fn matching_is_optimal() {
        let a = [c(0.0, 0.0), c(1.0, 0.0)];
        let b = [c(1.1, 0.0), c(0.1, 0.0), c(5.0, 0.0)];
        let (pairs, cost) = match_roots(&a, &b, 3.0);
        assert_eq!(pairs.len(), 2);
        assert!((cost - 3.2).abs() < 1e-12);
        assert!(pairs.iter().any(|&(i, j, _)| i == 0 && j == 1));
    }
}
