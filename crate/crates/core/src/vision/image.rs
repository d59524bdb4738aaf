use std::io::{self, Read, Write};

use super::VisionError;

/// Grayscale image with intensities in [0, 1], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, VisionError> {
        if width < 2 || height < 2 {
            return Err(VisionError::InvalidImage(format!(
                "image must be at least 2×2, got {width}×{height}"
            )));
        }
        if data.len() != width * height {
            return Err(VisionError::InvalidImage(format!(
                "expected {} intensities, got {}",
                width * height,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(VisionError::InvalidImage("non-finite intensity".into()));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, VisionError> {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[v * self.width + u]
    }

    /// Bilinear lookup; `None` outside `[0, w-1] × [0, h-1]`.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        if !(0.0..=max_x).contains(&x) || !(0.0..=max_y).contains(&y) {
            return None;
        }
        let x0 = (x.floor() as usize).min(self.width - 2);
        let y0 = (y.floor() as usize).min(self.height - 2);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let i00 = self.get(x0, y0);
        let i10 = self.get(x0 + 1, y0);
        let i01 = self.get(x0, y0 + 1);
        let i11 = self.get(x0 + 1, y0 + 1);
        let top = i00 + fx * (i10 - i00);
        let bottom = i01 + fx * (i11 - i01);
        Some(top + fy * (bottom - top))
    }

    /// Central-difference gradient at an interior pixel.
    #[inline]
    pub fn gradient(&self, u: usize, v: usize) -> (f64, f64) {
        let gx = (self.get(u + 1, v) - self.get(u - 1, v)) * 0.5;
        let gy = (self.get(u, v + 1) - self.get(u, v - 1)) * 0.5;
        (gx, gy)
    }

    /// Sub-pixel gradient: bilinear interpolation of the central-difference
    /// gradient field. Valid where the interpolation stencil stays interior.
    pub fn sample_gradient(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        if x < 1.0 || y < 1.0 || x > (self.width - 2) as f64 || y > (self.height - 2) as f64 {
            return None;
        }
        let x0 = (x.floor() as usize).min(self.width - 3);
        let y0 = (y.floor() as usize).min(self.height - 3);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let g00 = self.gradient(x0, y0);
        let g10 = self.gradient(x0 + 1, y0);
        let g01 = self.gradient(x0, y0 + 1);
        let g11 = self.gradient(x0 + 1, y0 + 1);
        let lerp = |a: f64, b: f64, c: f64, d: f64| {
            let top = a + fx * (b - a);
            let bottom = c + fx * (d - c);
            top + fy * (bottom - top)
        };
        Some((
            lerp(g00.0, g10.0, g01.0, g11.0),
            lerp(g00.1, g10.1, g01.1, g11.1),
        ))
    }

    /// Reads a binary (P5) 8-bit PGM.
    pub fn read_pgm(mut reader: impl Read) -> Result<Self, VisionError> {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(VisionError::Pgm("truncated header".into()));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        if fields[0] != "P5" {
            return Err(VisionError::Pgm(format!("unsupported magic {}", fields[0])));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| VisionError::Pgm(format!("bad header field {s:?}")))
        };
        let (width, height, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
        if maxval == 0 || maxval > 255 {
            return Err(VisionError::Pgm(format!("only 8-bit PGM supported, maxval {maxval}")));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let raster = bytes
            .get(pos..pos + width * height)
            .ok_or_else(|| VisionError::Pgm("truncated raster".into()))?;
        let scale = maxval as f64;
        Self::new(
            width,
            height,
            raster.iter().map(|&b| b as f64 / scale).collect(),
        )
    }

    /// Writes a binary (P5) 8-bit PGM, clamping intensities to [0, 1].
    pub fn write_pgm(&self, mut writer: impl Write) -> io::Result<()> {
        write!(writer, "P5\n{} {}\n255\n", self.width, self.height)?;
        let raster: Vec<u8> = self
            .data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        writer.write_all(&raster)
    }
}
