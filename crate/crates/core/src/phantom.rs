//! Synthetic tubes with analytically known axes.
//!
//! Intensity at `p` is
//! `background + (peak − background)·exp(−d²/(2σ²)) + slab(p) + noise`
//! with `d` the distance from `p` to the axis curve and `σ = radius / 2`,
//! clamped to `[0, 1]`.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Geometry, PointMm, ValueKind, Volume};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum CurveSpec {
    Straight {
        start_mm: [f64; 3],
        end_mm: [f64; 3],
    },
    /// Helix about an axis parallel to z through `center_mm`, rising
    /// `pitch_mm` per turn.
    Helix {
        center_mm: [f64; 3],
        radius_mm: f64,
        pitch_mm: f64,
        turns: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    /// Uniform Catmull–Rom spline through the control points.
    Spline { control_points_mm: Vec<[f64; 3]> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlabSpec {
    /// 0, 1 or 2 for x, y, z.
    pub normal_axis: usize,
    pub position_mm: f64,
    pub thickness_mm: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeSpec {
    pub curve: CurveSpec,
    pub radius_mm: f64,
    pub peak_intensity: f64,
    pub background: f64,
    #[serde(default)]
    pub slab: Option<SlabSpec>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Closest point on a curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest {
    pub t: f64,
    pub arc_length: f64,
    pub point: PointMm,
    pub distance: f64,
}

/// A parametric curve with an arc-length table and nearest-point queries.
#[derive(Debug, Clone)]
pub struct AnalyticCurve {
    spec: CurveSpec,
    t_max: f64,
    ts: Vec<f64>,
    pts: Vec<PointMm>,
    cumulative: Vec<f64>,
    /// Indices into `pts` roughly every [`COARSE_STEP_MM`] of arc length.
    coarse: Vec<usize>,
}

const COARSE_STEP_MM: f64 = 0.2;

impl AnalyticCurve {
    pub fn new(spec: CurveSpec) -> Result<Self> {
        let t_max = match &spec {
            CurveSpec::Straight { start_mm, end_mm } => {
                if start_mm == end_mm {
                    return Err(Error::InvalidParameter("straight curve has zero length".into()));
                }
                1.0
            }
            CurveSpec::Helix {
                radius_mm,
                pitch_mm,
                turns,
                ..
            } => {
                if !(*radius_mm >= 0.0) || !(*turns > 0.0) || !pitch_mm.is_finite() {
                    return Err(Error::InvalidParameter("invalid helix parameters".into()));
                }
                if *radius_mm == 0.0 && *pitch_mm == 0.0 {
                    return Err(Error::InvalidParameter("degenerate helix".into()));
                }
                2.0 * std::f64::consts::PI * turns
            }
            CurveSpec::Spline { control_points_mm } => {
                if control_points_mm.len() < 2 {
                    return Err(Error::InvalidParameter(
                        "spline needs at least two control points".into(),
                    ));
                }
                (control_points_mm.len() - 1) as f64
            }
        };
        let mut curve = AnalyticCurve {
            spec,
            t_max,
            ts: Vec::new(),
            pts: Vec::new(),
            cumulative: Vec::new(),
            coarse: Vec::new(),
        };
        // Dense table: 1/4000 of the parameter range or finer.
        let rough_len: f64 = {
            let n = 256;
            (0..n)
                .map(|i| {
                    let a = curve.eval(t_max * i as f64 / n as f64);
                    let b = curve.eval(t_max * (i + 1) as f64 / n as f64);
                    (b - a).norm()
                })
                .sum()
        };
        let n = ((rough_len / 0.01).ceil() as usize).clamp(4000, 400_000);
        curve.ts = (0..=n).map(|i| t_max * i as f64 / n as f64).collect();
        curve.pts = curve.ts.iter().map(|&t| curve.eval(t)).collect();
        let mut acc = 0.0;
        curve.cumulative = std::iter::once(0.0)
            .chain(curve.pts.windows(2).map(|w| {
                acc += (w[1] - w[0]).norm();
                acc
            }))
            .collect();
        let stride = ((COARSE_STEP_MM / (curve.length() / n as f64)).floor() as usize).max(1);
        curve.coarse = (0..=n).step_by(stride).collect();
        if *curve.coarse.last().unwrap() != n {
            curve.coarse.push(n);
        }
        Ok(curve)
    }

    pub fn spec(&self) -> &CurveSpec {
        &self.spec
    }

    pub fn param_range(&self) -> (f64, f64) {
        (0.0, self.t_max)
    }

    pub fn eval(&self, t: f64) -> PointMm {
        let t = t.clamp(0.0, self.t_max);
        match &self.spec {
            CurveSpec::Straight { start_mm, end_mm } => {
                let a = PointMm::from(*start_mm);
                let b = PointMm::from(*end_mm);
                a + (b - a) * t
            }
            CurveSpec::Helix {
                center_mm,
                radius_mm,
                pitch_mm,
                phase_rad,
                ..
            } => {
                let c = PointMm::from(*center_mm);
                let ang = t + phase_rad;
                c + Vector3::new(
                    radius_mm * ang.cos(),
                    radius_mm * ang.sin(),
                    pitch_mm * t / (2.0 * std::f64::consts::PI),
                )
            }
            CurveSpec::Spline { control_points_mm } => catmull_rom(control_points_mm, t),
        }
    }

    /// Total arc length in mm.
    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn t_at_arc_length(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.length());
        let i = self.cumulative.partition_point(|&c| c < s).clamp(1, self.ts.len() - 1);
        let (s0, s1) = (self.cumulative[i - 1], self.cumulative[i]);
        let f = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        self.ts[i - 1] + f * (self.ts[i] - self.ts[i - 1])
    }

    pub fn point_at_arc_length(&self, s: f64) -> PointMm {
        self.eval(self.t_at_arc_length(s))
    }

    /// Unit tangent at arc length `s`, oriented along increasing `t`.
    pub fn tangent_at_arc_length(&self, s: f64) -> Vector3<f64> {
        let t = self.t_at_arc_length(s);
        let h = self.t_max * 1e-6;
        let a = self.eval((t - h).max(0.0));
        let b = self.eval((t + h).min(self.t_max));
        (b - a).normalize()
    }

    /// Points every `step_mm` of arc length, including both ends.
    pub fn sample_every(&self, step_mm: f64) -> Vec<PointMm> {
        let len = self.length();
        let n = (len / step_mm).floor() as usize;
        let mut out: Vec<PointMm> = (0..=n).map(|i| self.point_at_arc_length(i as f64 * step_mm)).collect();
        if len - n as f64 * step_mm > 1e-9 {
            out.push(self.point_at_arc_length(len));
        }
        out
    }

    /// Nearest axis point to `p`.
    pub fn nearest(&self, p: &PointMm) -> Nearest {
        let best = (0..self.coarse.len())
            .map(|c| (c, (self.pts[self.coarse[c]] - p).norm_squared()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(c, _)| c)
            .unwrap();
        self.refine(p, best)
    }

    /// Golden-section refinement between the coarse samples adjacent to
    /// coarse sample `c`.
    fn refine(&self, p: &PointMm, c: usize) -> Nearest {
        if let CurveSpec::Straight { start_mm, end_mm } = &self.spec {
            let a = PointMm::from(*start_mm);
            let d = PointMm::from(*end_mm) - a;
            let t = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            let point = a + d * t;
            return Nearest {
                t,
                arc_length: t * d.norm(),
                point,
                distance: (p - point).norm(),
            };
        }
        let lo = self.ts[self.coarse[c.saturating_sub(1)]];
        let hi = self.ts[self.coarse[(c + 1).min(self.coarse.len() - 1)]];
        let f = |t: f64| (self.eval(t) - p).norm_squared();
        // Golden-section search on the bracketing interval.
        let gr = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (lo, hi);
        let mut c = b - gr * (b - a);
        let mut d = a + gr * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..80 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (b - a);
                fd = f(d);
            }
        }
        let mut t = 0.5 * (a + b);
        for cand in [lo, hi] {
            if f(cand) < f(t) {
                t = cand;
            }
        }
        let point = self.eval(t);
        let i = self.ts.partition_point(|&x| x < t).clamp(1, self.ts.len() - 1);
        let frac = (t - self.ts[i - 1]) / (self.ts[i] - self.ts[i - 1]);
        let arc_length =
            self.cumulative[i - 1] + frac * (self.cumulative[i] - self.cumulative[i - 1]);
        Nearest {
            t,
            arc_length,
            point,
            distance: (p - point).norm(),
        }
    }
}

fn catmull_rom(cps: &[[f64; 3]], t: f64) -> PointMm {
    let n = cps.len();
    let seg = (t.floor() as usize).min(n - 2);
    let u = t - seg as f64;
    let p = |i: i64| -> Vector3<f64> {
        if i < 0 {
            2.0 * Vector3::from(cps[0]) - Vector3::from(cps[1])
        } else if i as usize >= n {
            2.0 * Vector3::from(cps[n - 1]) - Vector3::from(cps[n - 2])
        } else {
            Vector3::from(cps[i as usize])
        }
    };
    let s = seg as i64;
    let (p0, p1, p2, p3) = (p(s - 1), p(s), p(s + 1), p(s + 2));
    let u2 = u * u;
    let u3 = u2 * u;
    let v = 0.5
        * ((2.0 * p1)
            + (-p0 + p2) * u
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u2
            + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * u3);
    PointMm::from(v)
}

/// A generated phantom: the normalised volume and its analytic axis.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub volume: Volume,
    pub axis: AnalyticCurve,
    pub spec: TubeSpec,
}

impl Phantom {
    /// Axis samples every `step_mm` (landmark ground truth).
    pub fn landmarks(&self, step_mm: f64) -> Vec<PointMm> {
        self.axis.sample_every(step_mm)
    }
}

impl TubeSpec {
    pub fn validate(&self, geometry: &Geometry) -> Result<()> {
        if !(self.peak_intensity > 0.0 && self.peak_intensity <= 1.0) {
            return Err(Error::InvalidParameter("peak intensity must lie in (0, 1]".into()));
        }
        if !(self.background >= 0.0 && self.background < 1.0) {
            return Err(Error::InvalidParameter("background must lie in [0, 1)".into()));
        }
        if !(self.peak_intensity > self.background) {
            return Err(Error::InvalidParameter(
                "peak intensity must exceed the background".into(),
            ));
        }
        if !(self.radius_mm >= geometry.max_spacing() / 2.0) {
            return Err(Error::InvalidParameter(format!(
                "radius {} mm is below half the largest spacing ({} mm)",
                self.radius_mm,
                geometry.max_spacing()
            )));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidParameter("noise sigma must be non-negative".into()));
        }
        if let Some(slab) = &self.slab {
            if slab.normal_axis > 2 || !(slab.thickness_mm > 0.0) {
                return Err(Error::InvalidParameter("invalid slab".into()));
            }
        }
        Ok(())
    }
}

/// Renders `spec` on the given grid.
pub fn generate(spec: &TubeSpec, geometry: Geometry) -> Result<Phantom> {
    geometry.validate()?;
    spec.validate(&geometry)?;
    let axis = AnalyticCurve::new(spec.curve.clone())?;

    let (lo, hi) = geometry.bounds_mm();
    let r = spec.radius_mm;
    for p in &axis.pts {
        for a in 0..3 {
            if p[a] < lo[a] + r - 1e-9 || p[a] > hi[a] - r + 1e-9 {
                return Err(Error::CurveOutOfBounds(format!(
                    "axis point ({:.2}, {:.2}, {:.2}) is within one radius of the grid edge",
                    p.x, p.y, p.z
                )));
            }
        }
    }

    let sigma = spec.radius_mm / 2.0;
    let cutoff = 8.0 * sigma;
    // Dense grid of cells of side `cutoff`; each cell lists the coarse axis
    // samples in its 3×3×3 neighbourhood, so one lookup per voxel suffices.
    let cell = cutoff;
    let cells = [0, 1, 2].map(|a| ((hi[a] - lo[a]) / cell).floor() as usize + 1);
    let cell_of = |p: &PointMm| -> [usize; 3] {
        [0, 1, 2].map(|a| (((p[a] - lo[a]) / cell).floor().max(0.0) as usize).min(cells[a] - 1))
    };
    let mut near: Vec<Vec<usize>> = vec![Vec::new(); cells[0] * cells[1] * cells[2]];
    for (c, &i) in axis.coarse.iter().enumerate() {
        let k = cell_of(&axis.pts[i]);
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let q = [k[0] as i64 + dx, k[1] as i64 + dy, k[2] as i64 + dz];
                    if (0..3).all(|a| q[a] >= 0 && q[a] < cells[a] as i64) {
                        let o = q[0] as usize + cells[0] * (q[1] as usize + cells[1] * q[2] as usize);
                        near[o].push(c);
                    }
                }
            }
        }
    }

    let contrast = spec.peak_intensity - spec.background;
    let tube_term = |p: &PointMm| -> f64 {
        let k = cell_of(p);
        let list = &near[k[0] + cells[0] * (k[1] + cells[1] * k[2])];
        let mut best: Option<(usize, f64)> = None;
        for &c in list {
            let d2 = (axis.pts[axis.coarse[c]] - p).norm_squared();
            if best.is_none_or(|(_, b)| d2 < b) {
                best = Some((c, d2));
            }
        }
        match best {
            Some((c, d2)) if d2 <= (cutoff + COARSE_STEP_MM).powi(2) => {
                let d = axis.refine(p, c).distance;
                contrast * (-d * d / (2.0 * sigma * sigma)).exp()
            }
            _ => 0.0,
        }
    };

    let n = geometry.len();
    let mut data: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|off| {
            let p = geometry.voxel_to_mm(geometry.index_of(off));
            let mut v = spec.background + tube_term(&p);
            if let Some(slab) = &spec.slab {
                if (p[slab.normal_axis] - slab.position_mm).abs() <= slab.thickness_mm / 2.0 {
                    v += slab.intensity - spec.background;
                }
            }
            v
        })
        .collect();

    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::InvalidParameter(format!("noise: {e}")))?;
        for v in data.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));

    let volume = Volume::new(geometry, data, ValueKind::NormalizedUnit)?
        .with_metadata("phantom", serde_json::to_value(spec)?);
    Ok(Phantom {
        volume,
        axis,
        spec: spec.clone(),
    })
}
