//! RGB frames with channel values in `[0, 1]`, plus binary PPM (P6) I/O.

use std::fs;
use std::path::Path;

use crate::error::{PvmError, Result};

/// H×W×3 image, row-major, RGB interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Frame {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height * 3],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width * height * 3, "frame data length mismatch");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Copies pixels through a gather map: output pixel `i` takes input
    /// pixel `src[i]`.
    pub fn gather(&self, src: &[u32]) -> Frame {
        assert_eq!(src.len(), self.pixel_count(), "gather map size mismatch");
        let mut data = Vec::with_capacity(self.data.len());
        for &s in src {
            let i = s as usize * 3;
            data.extend_from_slice(&self.data[i..i + 3]);
        }
        Frame::from_data(self.width, self.height, data)
    }

    pub fn mean_abs_diff(&self, other: &Frame) -> f64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a as f64 - *b as f64).abs())
            .sum();
        sum / self.data.len() as f64
    }

    /// 8-bit quantization, `round(v · 255)` with clamping.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Self {
        assert_eq!(bytes.len(), width * height * 3, "byte length mismatch");
        Self::from_data(width, height, bytes.iter().map(|&b| b as f32 / 255.0).collect())
    }

    /// Snap every channel to the nearest 8-bit level.
    pub fn quantized(&self) -> Frame {
        Frame::from_bytes(self.width, self.height, &self.to_bytes())
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.to_bytes());
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Frame> {
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(PvmError::Image("truncated PPM header".into()));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        if fields[0] != "P6" {
            return Err(PvmError::Image(format!("unsupported PPM magic {:?}", fields[0])));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| PvmError::Image(format!("bad PPM header field {s:?}")))
        };
        let (w, h, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
        if maxval != 255 {
            return Err(PvmError::Image(format!("only 8-bit PPM supported, maxval {maxval}")));
        }
        let raster = bytes
            .get(pos..pos + w * h * 3)
            .ok_or_else(|| PvmError::Image("truncated PPM raster".into()))?;
        Ok(Frame::from_bytes(w, h, raster))
    }

    pub fn save_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_ppm()).map_err(|e| PvmError::io(path, e))
    }

    pub fn load_ppm(path: impl AsRef<Path>) -> Result<Frame> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| PvmError::io(path, e))?;
        Frame::from_ppm(&bytes)
    }
}

#[inline]
fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
