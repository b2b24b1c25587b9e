//! Frangi vesselness from Hessian eigenvalues.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{eig3_symmetric, EigenTriple};
use crate::error::{Error, Result};
use crate::volume::{hessian_volume, ValueKind, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    /// Bright tubes on a darker background (contrast-enhanced vessels).
    BrightOnDark,
    DarkOnBright,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrangiParams {
    /// Sensitivity to the plate/line ratio `|λ2| / |λ3|`.
    pub alpha: f64,
    /// Sensitivity to the blob ratio `|λ1| / sqrt(|λ2 λ3|)`.
    pub beta: f64,
    /// Sensitivity to the structure norm `sqrt(Σ λ²)`.
    pub c: f64,
    pub sigma_mm: f64,
    pub polarity: Polarity,
}

/// Largest double strictly below one.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

impl FrangiParams {
    /// α = 0.5, β = 10, c = 500: tuned for high-contrast subcutaneous
    /// vessels.
    pub fn subcutaneous() -> Self {
        FrangiParams {
            alpha: 0.5,
            beta: 10.0,
            c: 500.0,
            sigma_mm: 1.0,
            polarity: Polarity::BrightOnDark,
        }
    }

    /// α = 0.5, β = 0.5, c = 100: used to build terrain costs inside muscle.
    pub fn intramuscular() -> Self {
        FrangiParams {
            alpha: 0.5,
            beta: 0.5,
            c: 100.0,
            sigma_mm: 1.0,
            polarity: Polarity::BrightOnDark,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "subcutaneous" => Some(Self::subcutaneous()),
            "intramuscular" => Some(Self::intramuscular()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("c", self.c),
            ("sigma_mm", self.sigma_mm),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Vesselness of one eigen-triple, in `[0, 1)`.
///
/// Zero when `λ2 > 0` or `λ3 > 0` (signs flipped for dark-on-bright), and
/// zero when there is no structure at all (`λ3 = 0`).
pub fn frangi_vesselness(eig: &EigenTriple, p: &FrangiParams) -> f64 {
    let flip = match p.polarity {
        Polarity::BrightOnDark => 1.0,
        Polarity::DarkOnBright => -1.0,
    };
    let [l1, l2, l3] = eig.values.map(|l| l * flip);
    if l2 > 0.0 || l3 > 0.0 || l3 == 0.0 || l2 == 0.0 {
        return 0.0;
    }
    let ra = l2.abs() / l3.abs();
    let rb = l1.abs() / (l2 * l3).abs().sqrt();
    let s2 = l1 * l1 + l2 * l2 + l3 * l3;
    let v = (1.0 - (-ra * ra / (2.0 * p.alpha * p.alpha)).exp())
        * (-rb * rb / (2.0 * p.beta * p.beta)).exp()
        * (1.0 - (-s2 / (2.0 * p.c * p.c)).exp());
    v.clamp(0.0, BELOW_ONE)
}

/// Single-scale vesselness of a normalised volume at `p.sigma_mm`.
pub fn enhance_volume(v: &Volume, p: &FrangiParams) -> Result<Volume> {
    v.ensure_kind(ValueKind::NormalizedUnit)?;
    p.validate()?;
    let data = scale_response(v, p, p.sigma_mm, 1.0)?;
    Ok(Volume::new(*v.geometry(), data, ValueKind::Vesselness)?
        .with_metadata("frangi", serde_json::to_value(p)?))
}

/// Maximum over scales of the vesselness of σ²-normalised Hessians.
/// `p.sigma_mm` is ignored in favour of `sigmas_mm`.
pub fn enhance_volume_multiscale(v: &Volume, p: &FrangiParams, sigmas_mm: &[f64]) -> Result<Volume> {
    v.ensure_kind(ValueKind::NormalizedUnit)?;
    p.validate()?;
    if sigmas_mm.is_empty() {
        return Err(Error::InvalidParameter("empty scale list".into()));
    }
    let mut best = vec![0.0f64; v.geometry().len()];
    for &sigma in sigmas_mm {
        let resp = scale_response(v, p, sigma, sigma * sigma)?;
        best.par_iter_mut()
            .zip(resp.par_iter())
            .for_each(|(b, &r)| *b = b.max(r));
    }
    Ok(Volume::new(*v.geometry(), best, ValueKind::Vesselness)?
        .with_metadata("frangi", serde_json::to_value(p)?)
        .with_metadata("scales_mm", serde_json::to_value(sigmas_mm)?))
}

fn scale_response(v: &Volume, p: &FrangiParams, sigma: f64, weight: f64) -> Result<Vec<f64>> {
    let field = hessian_volume(v, sigma)?;
    Ok((0..field.len())
        .into_par_iter()
        .map(|i| frangi_vesselness(&eig3_symmetric(&(field.at(i) * weight)), p))
        .collect())
}

/// Maps the volume's `[min, max]` affinely onto `[0, 1]`; a constant volume
/// maps to all zeros.
pub fn normalize_vesselness(v: &Volume) -> Result<Volume> {
    v.ensure_kind(ValueKind::Vesselness)?;
    let (lo, hi) = v.min_max();
    let out = if hi > lo {
        let range = hi - lo;
        v.map(ValueKind::NormalizedUnit, move |x| ((x - lo) / range).clamp(0.0, 1.0))?
    } else {
        v.map(ValueKind::NormalizedUnit, |_| 0.0)?
    };
    let mut meta = v.metadata().clone();
    meta.insert("normalized_from".into(), serde_json::json!([lo, hi]));
    let mut out = out;
    out.set_metadata(meta);
    Ok(out)
}
