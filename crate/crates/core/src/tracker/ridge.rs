//! Ridge re-centering by cross-correlating the unit gradient field of a
//! cross-section with a centre-seeking template.

use nalgebra::Vector2;

use super::cross_section::Patch;
use crate::error::{Error, Result};

/// Gradients weaker than this are treated as zero vectors.
const MIN_GRADIENT: f64 = 1e-9;

/// Unit gradient orientations of a patch (central differences inside,
/// one-sided at the border); zero where the gradient vanishes.
pub fn orientation_field(patch: &Patch) -> Vec<Vector2<f64>> {
    let (w, h) = (patch.width, patch.height);
    let res = patch.resolution_mm;
    let diff = |lo: f64, hi: f64, span: usize| (hi - lo) / (span as f64 * res);
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let (c0, c1) = (c.saturating_sub(1), (c + 1).min(w - 1));
            let (r0, r1) = (r.saturating_sub(1), (r + 1).min(h - 1));
            let g = Vector2::new(
                diff(patch.at(c0, r), patch.at(c1, r), c1 - c0),
                diff(patch.at(c, r0), patch.at(c, r1), r1 - r0),
            );
            let n = g.norm();
            out.push(if n < MIN_GRADIENT { Vector2::zeros() } else { g / n });
        }
    }
    out
}

/// Template vector at offset `(dc, dr)` from the template centre: the unit
/// vector pointing back to the centre, zero at the centre.
#[inline]
pub fn template_vector(dc: i64, dr: i64) -> Vector2<f64> {
    if dc == 0 && dr == 0 {
        return Vector2::zeros();
    }
    let v = Vector2::new(-(dc as f64), -(dr as f64));
    v / v.norm()
}

/// Correlation response for every candidate centre. The template spans the
/// whole patch from any candidate, so each response sums over all samples.
pub fn correlation_response(patch: &Patch) -> Patch {
    let f = orientation_field(patch);
    let (w, h) = (patch.width, patch.height);
    Patch::from_fn(w, h, patch.resolution_mm, |qc, qr| {
        let mut acc = 0.0;
        for r in 0..h {
            for c in 0..w {
                let g = &f[r * w + c];
                if g.x == 0.0 && g.y == 0.0 {
                    continue;
                }
                acc += g.dot(&template_vector(c as i64 - qc as i64, r as i64 - qr as i64));
            }
        }
        acc
    })
}

/// In-plane offset (mm, along columns then rows) from the patch centre to
/// the strongest response. A patch without gradients yields no offset.
pub fn ridge_correct(patch: &Patch) -> Result<Vector2<f64>> {
    if patch.width < 8 || patch.height < 8 {
        return Err(Error::InvalidParameter(format!(
            "ridge correction needs at least 8x8 samples, got {}x{}",
            patch.width, patch.height
        )));
    }
    if orientation_field(patch).iter().all(|g| g.x == 0.0 && g.y == 0.0) {
        return Ok(Vector2::zeros());
    }
    let resp = correlation_response(patch);
    let (c, r) = resp.argmax();
    let (c0, r0) = patch.centre();
    Ok(Vector2::new(
        (c as f64 - c0) * patch.resolution_mm,
        (r as f64 - r0) * patch.resolution_mm,
    ))
}
