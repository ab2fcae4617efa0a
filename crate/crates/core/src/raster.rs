//! Per-pixel rasters and their on-disk encodings.
//!
//! * masks: 8-bit grayscale PNG holding only 0 and 255
//! * colors: 8-bit RGB PNG
//! * depth: `CPD1` little-endian binary, one `f32` Euclidean ray distance per pixel,
//!   `+inf` where the pixel ray misses
//! * normals: `CPN1` little-endian binary, three `f32` per pixel, zero vector where
//!   the pixel ray misses
//!
//! Both binary formats start with a 4-byte magic followed by `u32` width and
//! height, then row-major pixel data.

use std::io::Cursor;

use thiserror::Error;

pub const DEPTH_MAGIC: &[u8; 4] = b"CPD1";
pub const NORMAL_MAGIC: &[u8; 4] = b"CPN1";
const HEADER_LEN: usize = 12;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("mask is not binary: found value {0}")]
    NonBinaryMask(u8),
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("truncated raster: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("unsupported png layout: {0}")]
    PngLayout(String),
    #[error("png decode: {0}")]
    PngDecode(#[from] png::DecodingError),
    #[error("png encode: {0}")]
    PngEncode(#[from] png::EncodingError),
    #[error("invalid depth value {0} (must be > 0, or +inf for no hit)")]
    BadDepth(f32),
}

fn check_dims(a: (u32, u32), b: (u32, u32)) -> Result<(), RasterError> {
    if a == b {
        Ok(())
    } else {
        Err(RasterError::DimensionMismatch(a.0, a.1, b.0, b.1))
    }
}

/// Binary image. Stored as one byte per pixel, 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaskImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl MaskImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; (width * height) as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.data[(y * width + x) as usize] = 1;
                }
            }
        }
        m
    }

    /// Builds from 0/1 values; anything else is rejected.
    pub fn from_bits(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        if data.len() != (width * height) as usize {
            return Err(RasterError::Truncated {
                expected: (width * height) as usize,
                actual: data.len(),
            });
        }
        if let Some(&v) = data.iter().find(|&&v| v > 1) {
            return Err(RasterError::NonBinaryMask(v));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[(y * self.width + x) as usize] != 0
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.data[(y * self.width + x) as usize] = v as u8;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Fraction of set pixels.
    pub fn area_ratio(&self) -> f64 {
        self.count() as f64 / self.data.len() as f64
    }

    fn zip_with(
        &self,
        other: &MaskImage,
        f: impl Fn(u8, u8) -> u8,
    ) -> Result<MaskImage, RasterError> {
        check_dims(self.dims(), other.dims())?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(MaskImage {
            width: self.width,
            height: self.height,
            data,
        })
    }

    pub fn and(&self, other: &MaskImage) -> Result<MaskImage, RasterError> {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn or(&self, other: &MaskImage) -> Result<MaskImage, RasterError> {
        self.zip_with(other, |a, b| a | b)
    }

    /// Pixels set here and clear in `other`.
    pub fn minus(&self, other: &MaskImage) -> Result<MaskImage, RasterError> {
        self.zip_with(other, |a, b| a & (1 - b))
    }

    pub fn union_in_place(&mut self, other: &MaskImage) -> Result<(), RasterError> {
        check_dims(self.dims(), other.dims())?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a |= b;
        }
        Ok(())
    }

    /// True when every set pixel of `self` is set in `other`.
    pub fn is_subset_of(&self, other: &MaskImage) -> Result<bool, RasterError> {
        check_dims(self.dims(), other.dims())?;
        Ok(self.data.iter().zip(&other.data).all(|(&a, &b)| a <= b))
    }

    /// Number of pixels where the masks differ.
    pub fn disagreement(&self, other: &MaskImage) -> Result<usize, RasterError> {
        check_dims(self.dims(), other.dims())?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .filter(|(a, b)| a != b)
            .count())
    }

    /// Square (Chebyshev) dilation by `radius` pixels.
    pub fn dilate(&self, radius: u32) -> MaskImage {
        let r = radius as i64;
        let (w, h) = (self.width as i64, self.height as i64);
        MaskImage::from_fn(self.width, self.height, |x, y| {
            let (x, y) = (x as i64, y as i64);
            for yy in (y - r).max(0)..=(y + r).min(h - 1) {
                for xx in (x - r).max(0)..=(x + r).min(w - 1) {
                    if self.data[(yy * w + xx) as usize] != 0 {
                        return true;
                    }
                }
            }
            false
        })
    }

    pub fn to_png(&self) -> Result<Vec<u8>, RasterError> {
        let bytes: Vec<u8> = self.data.iter().map(|&v| v * 255).collect();
        encode_png(self.width, self.height, png::ColorType::Grayscale, &bytes)
    }

    /// Decodes an 8-bit grayscale PNG that holds only 0 and 255.
    pub fn from_png(bytes: &[u8]) -> Result<Self, RasterError> {
        let (w, h, color, data) = decode_png(bytes)?;
        if color != png::ColorType::Grayscale {
            return Err(RasterError::PngLayout(format!(
                "mask must be grayscale, got {color:?}"
            )));
        }
        let mut bits = Vec::with_capacity(data.len());
        for v in data {
            match v {
                0 => bits.push(0),
                255 => bits.push(1),
                other => return Err(RasterError::NonBinaryMask(other)),
            }
        }
        Self::from_bits(w, h, bits)
    }
}

/// Per-pixel Euclidean distance from the camera center along the pixel ray.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl DepthMap {
    pub const NO_HIT: f32 = f32::INFINITY;

    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![Self::NO_HIT; (width * height) as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, d: f32) {
        self.data[(y * self.width + x) as usize] = d;
    }

    pub fn is_hit(&self, x: u32, y: u32) -> bool {
        self.get(x, y).is_finite()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(DEPTH_MAGIC);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RasterError> {
        let (width, height, body) = read_header(bytes, DEPTH_MAGIC, "CPD1", 1)?;
        let data: Vec<f32> = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if let Some(&bad) = data.iter().find(|v| v.is_nan() || **v <= 0.0) {
            return Err(RasterError::BadDepth(bad));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }
}

/// Per-pixel world-frame unit normals; the zero vector marks no hit.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    width: u32,
    height: u32,
    data: Vec<[f32; 3]>,
}

impl NormalMap {
    pub const NO_HIT: [f32; 3] = [0.0, 0.0, 0.0];

    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![Self::NO_HIT; (width * height) as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[[f32; 3]] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> [f32; 3] {
        self.data[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, n: [f32; 3]) {
        self.data[(y * self.width + x) as usize] = n;
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 12 * self.data.len());
        out.extend_from_slice(NORMAL_MAGIC);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        for n in &self.data {
            for v in n {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RasterError> {
        let (width, height, body) = read_header(bytes, NORMAL_MAGIC, "CPN1", 3)?;
        let data = body
            .chunks_exact(12)
            .map(|c| {
                let f = |i: usize| f32::from_le_bytes([c[i], c[i + 1], c[i + 2], c[i + 3]]);
                [f(0), f(4), f(8)]
            })
            .collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }
}

fn read_header<'a>(
    bytes: &'a [u8],
    magic: &[u8; 4],
    name: &'static str,
    channels: usize,
) -> Result<(u32, u32, &'a [u8]), RasterError> {
    if bytes.len() < HEADER_LEN {
        return Err(RasterError::Truncated {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    if &bytes[..4] != magic {
        return Err(RasterError::BadMagic { expected: name });
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let expected = HEADER_LEN + 4 * channels * (width as usize) * (height as usize);
    if bytes.len() != expected {
        return Err(RasterError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    Ok((width, height, &bytes[HEADER_LEN..]))
}

/// 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<[u8; 3]>,
}

impl RgbImage {
    pub const WHITE: [u8; 3] = [255, 255, 255];

    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        Self {
            width,
            height,
            data: vec![color; (width * height) as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        self.data[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, c: [u8; 3]) {
        self.data[(y * self.width + x) as usize] = c;
    }

    /// Averages each `factor`×`factor` block.
    pub fn downsample(&self, factor: u32) -> RgbImage {
        let (w, h) = (self.width / factor, self.height / factor);
        let n = factor * factor;
        let mut out = RgbImage::filled(w, h, [0; 3]);
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0u32; 3];
                for dy in 0..factor {
                    for dx in 0..factor {
                        let c = self.get(x * factor + dx, y * factor + dy);
                        for k in 0..3 {
                            acc[k] += c[k] as u32;
                        }
                    }
                }
                out.set(x, y, acc.map(|v| ((v + n / 2) / n) as u8));
            }
        }
        out
    }

    pub fn to_png(&self) -> Result<Vec<u8>, RasterError> {
        let bytes: Vec<u8> = self.data.iter().flatten().copied().collect();
        encode_png(self.width, self.height, png::ColorType::Rgb, &bytes)
    }

    /// Decodes 8-bit RGB or RGBA (alpha is dropped).
    pub fn from_png(bytes: &[u8]) -> Result<Self, RasterError> {
        let (width, height, color, data) = decode_png(bytes)?;
        let stride = match color {
            png::ColorType::Rgb => 3,
            png::ColorType::Rgba => 4,
            other => {
                return Err(RasterError::PngLayout(format!(
                    "color image must be RGB, got {other:?}"
                )))
            }
        };
        let data = data
            .chunks_exact(stride)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }
}

fn encode_png(
    width: u32,
    height: u32,
    color: png::ColorType,
    bytes: &[u8],
) -> Result<Vec<u8>, RasterError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header()?;
        writer.write_image_data(bytes)?;
    }
    Ok(out)
}

fn decode_png(bytes: &[u8]) -> Result<(u32, u32, png::ColorType, Vec<u8>), RasterError> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info()?;
    let info = reader.info();
    if info.bit_depth != png::BitDepth::Eight {
        return Err(RasterError::PngLayout(format!(
            "expected 8-bit samples, got {:?}",
            info.bit_depth
        )));
    }
    if info.palette.is_some() {
        return Err(RasterError::PngLayout(
            "palette images are not supported".into(),
        ));
    }
    let (w, h, color) = (info.width, info.height, info.color_type);
    let mut buf = vec![
        0;
        reader
            .output_buffer_size()
            .ok_or_else(|| RasterError::PngLayout("image too large".into()))?
    ];
    let frame = reader.next_frame(&mut buf)?;
    buf.truncate(frame.buffer_size());
    Ok((w, h, color, buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mask_algebra() {
        let a = MaskImage::from_fn(4, 4, |x, _| x < 2);
        let b = MaskImage::from_fn(4, 4, |_, y| y < 2);
        assert_eq!(a.and(&b).unwrap().count(), 4);
        assert_eq!(a.or(&b).unwrap().count(), 12);
        assert_eq!(a.minus(&b).unwrap().count(), 4);
        assert!(a.and(&b).unwrap().is_subset_of(&a).unwrap());
        assert!(a.and(&MaskImage::new(3, 4)).is_err());
    }

    #[test]
    fn dilation_grows_by_radius() {
        let mut m = MaskImage::new(9, 9);
        m.set(4, 4, true);
        assert_eq!(m.dilate(1).count(), 9);
        assert_eq!(m.dilate(2).count(), 25);
    }

    #[test]
    fn mask_png_rejects_grey() {
        let enc = encode_png(2, 1, png::ColorType::Grayscale, &[0, 128]).unwrap();
        assert!(matches!(
            MaskImage::from_png(&enc),
            Err(RasterError::NonBinaryMask(128))
        ));
    }

    #[test]
    fn depth_rejects_bad_magic_and_truncation() {
        let d = DepthMap::new(3, 2);
        let mut bytes = d.to_bytes();
        assert_eq!(&bytes[..4], b"CPD1");
        assert_eq!(DepthMap::from_bytes(&bytes).unwrap(), d);
        bytes.pop();
        assert!(matches!(
            DepthMap::from_bytes(&bytes),
            Err(RasterError::Truncated { .. })
        ));
        let mut bad = d.to_bytes();
        bad[0] = b'X';
        assert!(matches!(
            DepthMap::from_bytes(&bad),
            Err(RasterError::BadMagic { .. })
        ));
    }

    #[test]
    fn downsample_averages_blocks() {
        let mut img = RgbImage::filled(2, 2, [0, 0, 0]);
        img.set(0, 0, [255, 100, 4]);
        let d = img.downsample(2);
        assert_eq!(d.get(0, 0), [64, 25, 1]);
    }

    proptest! {
        #[test]
        fn encodings_round_trip(w in 1u32..9, h in 1u32..9, seed in any::<u64>()) {
            let mut s = seed;
            let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); s >> 33 };
            let mask = MaskImage::from_fn(w, h, |_, _| next() % 2 == 0);
            prop_assert_eq!(MaskImage::from_png(&mask.to_png().unwrap()).unwrap(), mask);

            let mut depth = DepthMap::new(w, h);
            let mut normal = NormalMap::new(w, h);
            let mut color = RgbImage::filled(w, h, [0; 3]);
            for y in 0..h { for x in 0..w {
                if next() % 3 != 0 { depth.set(x, y, 0.5 + (next() % 1000) as f32 * 1e-3); }
                normal.set(x, y, [(next() % 7) as f32 - 3.0, 0.25, -1.5]);
                color.set(x, y, [next() as u8, next() as u8, next() as u8]);
            }}
            prop_assert_eq!(DepthMap::from_bytes(&depth.to_bytes()).unwrap(), depth);
            prop_assert_eq!(NormalMap::from_bytes(&normal.to_bytes()).unwrap(), normal);
            prop_assert_eq!(RgbImage::from_png(&color.to_png().unwrap()).unwrap(), color);
        }
    }
}
