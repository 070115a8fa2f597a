//! Image preprocessing: decode, bilinear resize, [0,1] scaling, optional
//! per-channel standardization, and horizontal-flip augmentation.

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::tensor::Tensor;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::Sample;

/// Decoded 8-bit image, row-major HWC.
#[derive(Debug, Clone)]
pub struct RawImage {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub pixels: Vec<u8>,
}

impl RawImage {
    pub fn constant(height: usize, width: usize, channels: usize, value: u8) -> Self {
        RawImage { height, width, channels, pixels: vec![value; height * width * channels] }
    }
}

/// Decode an image file to RGB (or luma for 1-channel targets).
pub fn decode_image(path: &Path, channels: usize) -> Result<RawImage> {
    let img = image::open(path)
        .map_err(|e| Error::Input(format!("cannot decode image '{}': {e}", path.display())))?;
    Ok(match channels {
        1 => {
            let g = img.to_luma8();
            RawImage {
                height: g.height() as usize,
                width: g.width() as usize,
                channels: 1,
                pixels: g.into_raw(),
            }
        }
        _ => {
            let rgb = img.to_rgb8();
            RawImage {
                height: rgb.height() as usize,
                width: rgb.width() as usize,
                channels: 3,
                pixels: rgb.into_raw(),
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Target [H, W, C].
    pub target: [usize; 3],
    /// Optional per-channel (mean, std) standardization applied after the
    /// [0,1] scaling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardize: Option<(Vec<f64>, Vec<f64>)>,
}

impl PreprocessConfig {
    pub fn plain(target: [usize; 3]) -> Self {
        PreprocessConfig { target, standardize: None }
    }
}

/// Scale a decoded image to [0,1], resize to the target and standardize if
/// configured.
pub fn preprocess_image(raw: &RawImage, cfg: &PreprocessConfig) -> Result<Tensor> {
    if raw.channels != cfg.target[2] {
        return Err(Error::Input(format!(
            "image has {} channels, target wants {}",
            raw.channels, cfg.target[2]
        )));
    }
    let data: Vec<f64> = raw.pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let t = Tensor::new(vec![raw.height, raw.width, raw.channels], data)?;
    preprocess_tensor(&t, cfg)
}

/// Same as [`preprocess_image`] for inputs already in [0,1].
pub fn preprocess_tensor(input: &Tensor, cfg: &PreprocessConfig) -> Result<Tensor> {
    let [th, tw, tc] = cfg.target;
    if input.shape().len() != 3 || input.shape()[2] != tc {
        return Err(Error::Input(format!(
            "expected [H, W, {tc}] input, got {:?}",
            input.shape()
        )));
    }
    let mut out = if input.shape()[0] == th && input.shape()[1] == tw {
        input.clone()
    } else {
        bilinear_resize(input, th, tw)?
    };
    if let Some((mean, std)) = &cfg.standardize {
        if mean.len() != tc || std.len() != tc {
            return Err(Error::Config(format!(
                "standardize vectors must have {tc} channels"
            )));
        }
        if let Some(bad) = std.iter().find(|s| **s <= 0.0) {
            return Err(Error::Config(format!("standardize std must be positive, got {bad}")));
        }
        let data = out.data_mut();
        for (i, v) in data.iter_mut().enumerate() {
            let c = i % tc;
            *v = (*v - mean[c]) / std[c];
        }
    }
    Ok(out)
}

/// Bilinear resize of an HWC tensor using pixel-center sampling
/// (source coordinate = (dst + 0.5) * scale - 0.5, clamped).
pub fn bilinear_resize(src: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (h, w, c) = (src.shape()[0], src.shape()[1], src.shape()[2]);
    let mut out = vec![0.0; out_h * out_w * c];
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    let data = src.data();
    for oy in 0..out_h {
        let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let wy = fy - y0 as f64;
        for ox in 0..out_w {
            let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let wx = fx - x0 as f64;
            for ch in 0..c {
                let v00 = data[(y0 * w + x0) * c + ch];
                let v01 = data[(y0 * w + x1) * c + ch];
                let v10 = data[(y1 * w + x0) * c + ch];
                let v11 = data[(y1 * w + x1) * c + ch];
                let top = v00 * (1.0 - wx) + v01 * wx;
                let bot = v10 * (1.0 - wx) + v11 * wx;
                out[(oy * out_w + ox) * c + ch] = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    Tensor::new(vec![out_h, out_w, c], out)
}

/// Mirror an HWC tensor left-right.
pub fn hflip(t: &Tensor) -> Tensor {
    let (h, w, c) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    let src = t.data();
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mx = w - 1 - x;
            for ch in 0..c {
                out[(y * w + x) * c + ch] = src[(y * w + mx) * c + ch];
            }
        }
    }
    Tensor::new(t.shape().to_vec(), out).expect("same shape")
}

/// Independently mirror each sample left-right with probability `p`;
/// labels and attributes are untouched. Deterministic under the seed.
pub fn augment(samples: &[Sample], p: f64, seed: u64) -> Vec<Sample> {
    let mut rng = rng_from_seed(seed);
    samples
        .iter()
        .map(|s| {
            let flip = rng.random::<f64>() < p;
            if flip {
                let mut flipped = s.clone();
                flipped.input = hflip(&s.input);
                flipped
            } else {
                s.clone()
            }
        })
        .collect()
}
