//! Pixel containers: sRGB images, normalized depth maps and scalar maps.

use crate::error::{Error, Result};

/// Smallest accepted image side, in pixels.
pub const MIN_SIDE: usize = 16;

fn check_len(width: usize, height: usize, got: usize) -> Result<()> {
    if width * height != got {
        return Err(Error::BufferLength { width, height, got });
    }
    Ok(())
}

fn check_min(width: usize, height: usize) -> Result<()> {
    if width < MIN_SIDE || height < MIN_SIDE {
        return Err(Error::ImageTooSmall { width, height, min: MIN_SIDE });
    }
    Ok(())
}

/// An 8-bit sRGB image stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<[u8; 3]>) -> Result<Self> {
        check_min(width, height)?;
        check_len(width, height, data.len())?;
        Ok(Self { width, height, data })
    }

    /// Builds an image from a packed `RGBRGB...` byte buffer.
    pub fn from_packed(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height * 3 {
            return Err(Error::BufferLength { width, height, got: bytes.len() / 3 });
        }
        let data = bytes.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Self::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.data[y * self.width + x]
    }

    pub fn to_image(&self) -> image::RgbImage {
        let raw = self.data.iter().flatten().copied().collect();
        image::RgbImage::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer length checked at construction")
    }

    pub fn from_image(img: &image::RgbImage) -> Result<Self> {
        Self::from_packed(img.width() as usize, img.height() as usize, img.as_raw())
    }
}

/// Per-pixel depth in `[0, 1]`; larger values are closer to the camera.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthMap {
    /// Wraps already-normalized depth values. Values outside `[0, 1]` are rejected.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_len(width, height, data.len())?;
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!("depth value {v} outside [0,1]")));
        }
        Ok(Self { width, height, data })
    }

    /// Min-max normalizes raw depth readings of any scale into `[0, 1]`.
    /// A constant map becomes all zeros.
    pub fn from_raw(width: usize, height: usize, raw: &[f64]) -> Result<Self> {
        check_len(width, height, raw.len())?;
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite depth value".into()));
        }
        Self::new(width, height, crate::field::normalize_min_max(raw))
    }

    /// A depth map that carries no information.
    pub fn flat(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

/// A scalar per-pixel map with values in `[0, 1]` (input saliency, ground truth, output).
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl PixelMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_len(width, height, data.len())?;
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!("map value {v} outside [0,1]")));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_gray8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        check_len(width, height, bytes.len())?;
        Ok(Self { width, height, data: bytes.iter().map(|&b| f64::from(b) / 255.0).collect() })
    }

    /// Binary mask from 8-bit ground truth: values above 127 are foreground.
    pub fn mask_from_gray8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        check_len(width, height, bytes.len())?;
        let data = bytes.iter().map(|&b| if b > 127 { 1.0 } else { 0.0 }).collect();
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    pub fn to_gray8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn to_image(&self) -> image::GrayImage {
        image::GrayImage::from_raw(self.width as u32, self.height as u32, self.to_gray8())
            .expect("buffer length checked at construction")
    }

    /// Snaps every value onto the 8-bit grid, as writing and re-reading a PNG would.
    pub fn quantized(&self) -> PixelMap {
        let data = self.data.iter().map(|&v| f64::from(quantize(v)) / 255.0).collect();
        PixelMap { width: self.width, height: self.height, data }
    }

    pub fn same_shape(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }
}

pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// sRGB (D65) to CIE L*a*b*.
pub fn srgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    fn linear(c: u8) -> f64 {
        let c = f64::from(c) / 255.0;
        if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        }
    }
    fn f(t: f64) -> f64 {
        const EPS: f64 = 216.0 / 24389.0;
        const KAPPA: f64 = 24389.0 / 27.0;
        if t > EPS {
            t.cbrt()
        } else {
            (KAPPA * t + 16.0) / 116.0
        }
    }
    let (r, g, b) = (linear(rgb[0]), linear(rgb[1]), linear(rgb[2]));
    let x = r * 0.4124564 + g * 0.3575761 + b * 0.1804375;
    let y = r * 0.2126729 + g * 0.7151522 + b * 0.0721750;
    let z = r * 0.0193339 + g * 0.1191920 + b * 0.9503041;
    // D65 reference white
    let (fx, fy, fz) = (f(x / 0.95047), f(y), f(z / 1.08883));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Lab scaled so each channel lies in `[0, 1]`.
pub fn lab_unit(lab: [f64; 3]) -> [f64; 3] {
    [
        (lab[0] / 100.0).clamp(0.0, 1.0),
        ((lab[1] + 128.0) / 255.0).clamp(0.0, 1.0),
        ((lab[2] + 128.0) / 255.0).clamp(0.0, 1.0),
    ]
}

/// Rec. 601 luma.
pub fn luminance(rgb: [u8; 3]) -> f64 {
    0.299 * f64::from(rgb[0]) + 0.587 * f64::from(rgb[1]) + 0.114 * f64::from(rgb[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_is_l100() {
        let lab = srgb_to_lab([255, 255, 255]);
        assert!((lab[0] - 100.0).abs() < 0.5);
        assert!(lab[1].abs() < 0.5 && lab[2].abs() < 0.5);
    }

    #[test]
    fn black_is_l0() {
        let lab = srgb_to_lab([0, 0, 0]);
        assert!(lab[0].abs() < 1e-9);
    }

    #[test]
    fn small_image_rejected() {
        assert!(matches!(RgbImage::filled(15, 40, [0, 0, 0]), Err(Error::ImageTooSmall { .. })));
    }

    #[test]
    fn depth_from_raw_normalizes() {
        let raw: Vec<f64> = (0..256).map(f64::from).collect();
        let d = DepthMap::from_raw(16, 16, &raw).unwrap();
        assert_eq!(d.values()[0], 0.0);
        assert_eq!(d.values()[255], 1.0);
    }

    #[test]
    fn constant_depth_becomes_zero() {
        let d = DepthMap::from_raw(16, 16, &[42.0; 256]).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gt_threshold_is_127() {
        let m = PixelMap::mask_from_gray8(2, 1, &[127, 128]).unwrap();
        assert_eq!(m.values(), &[0.0, 1.0]);
    }
}
