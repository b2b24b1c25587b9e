//! Axis-aligned slices rendered as 8-bit grayscale PNG.

use std::io::Cursor;

use image::{GrayImage, ImageFormat};
use serde::Deserialize;
use vessel_core::{ValueKind, Volume, WindowParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SliceAxis {
    X,
    Y,
    Z,
}

impl SliceAxis {
    pub fn index(self) -> usize {
        match self {
            SliceAxis::X => 0,
            SliceAxis::Y => 1,
            SliceAxis::Z => 2,
        }
    }
}

/// Window for a slice request. Raw-stored volumes start from the abdominal
/// HU window; anything else is shown through the unit window.
pub fn slice_window(v: &Volume, wc: Option<f64>, ww: Option<f64>) -> WindowParams {
    let mut w = match v.kind() {
        ValueKind::RawStored => WindowParams::default(),
        _ => WindowParams::identity(),
    };
    if let Some(c) = wc {
        w.window_center = c;
    }
    if let Some(width) = ww {
        w.window_width = width;
    }
    w
}

/// Image size `(width, height)` of a slice orthogonal to `axis`. Columns
/// follow the lower remaining volume axis, rows the higher one.
pub fn slice_shape(dims: [usize; 3], axis: SliceAxis) -> (usize, usize) {
    match axis {
        SliceAxis::X => (dims[1], dims[2]),
        SliceAxis::Y => (dims[0], dims[2]),
        SliceAxis::Z => (dims[0], dims[1]),
    }
}

/// Grayscale pixels of slice `index`, row-major. `index` must be in range.
pub fn slice_pixels(v: &Volume, axis: SliceAxis, index: usize, window: &WindowParams) -> Vec<u8> {
    let (w, h) = slice_shape(v.dims(), axis);
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let idx = match axis {
                SliceAxis::X => [index, c, r],
                SliceAxis::Y => [c, index, r],
                SliceAxis::Z => [c, r, index],
            };
            out.push((window.apply(v.get(idx)) * 255.0).round() as u8);
        }
    }
    out
}

pub fn encode_png(width: usize, height: usize, pixels: Vec<u8>) -> Vec<u8> {
    let img = GrayImage::from_raw(width as u32, height as u32, pixels)
        .expect("pixel buffer matches the image size");
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .expect("PNG encoding into memory cannot fail");
    buf.into_inner()
}
