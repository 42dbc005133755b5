//! Grayscale image loading (PGM P2/P5, PNG) and PGM export.
//!
//! Loaded pixels are reals in `[0, 255]`. Colour PNGs are reduced to luma
//! with `0.299 R + 0.587 G + 0.114 B`; inputs of any other size are
//! resampled bilinearly to the requested target.

use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};
use crate::grid::Grid;

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Reads an image and resamples it to `target` (width, height) if given.
pub fn load_image(path: &Path, target: Option<(usize, usize)>) -> Result<Grid<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = decode_image(&bytes, path)?;
    Ok(match target {
        Some((w, h)) if (w, h) != (img.width(), img.height()) => resize_bilinear(&img, w, h)?,
        _ => img,
    })
}

pub fn decode_image(bytes: &[u8], path: &Path) -> Result<Grid<f64>> {
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        decode_pgm(bytes, path)
    } else if bytes.starts_with(PNG_MAGIC) {
        decode_png(bytes, path)
    } else {
        Err(Error::UnknownFormat { path: path.to_path_buf() })
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    /// Next whitespace-delimited token, skipping `#` comments.
    fn token(&mut self) -> Option<&[u8]> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str, path: &Path) -> Result<usize> {
        let tok = self.token().ok_or_else(|| Error::Truncated {
            path: path.to_path_buf(),
            detail: format!("missing {what}"),
        })?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Malformed {
                path: path.to_path_buf(),
                detail: format!("{what} is not a number"),
            })
    }
}

fn decode_pgm(bytes: &[u8], path: &Path) -> Result<Grid<f64>> {
    let binary = bytes[1] == b'5';
    let mut r = HeaderReader { bytes, pos: 2 };
    let w = r.number("width", path)?;
    let h = r.number("height", path)?;
    let maxval = r.number("maxval", path)?;
    if w == 0 || h == 0 {
        return Err(Error::ZeroDimensions { path: path.to_path_buf() });
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            detail: format!("maxval {maxval} outside 1..=65535"),
        });
    }
    let scale = 255.0 / maxval as f64;
    let n = w * h;
    let values: Vec<f64> = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        let start = r.pos + 1;
        let bpp = if maxval < 256 { 1 } else { 2 };
        let need = n * bpp;
        let raster = bytes.get(start..).unwrap_or_default();
        if raster.len() < need {
            return Err(Error::Truncated {
                path: path.to_path_buf(),
                detail: format!("raster has {} of {need} bytes", raster.len()),
            });
        }
        if bpp == 1 {
            raster[..need].iter().map(|&v| v as f64 * scale).collect()
        } else {
            raster[..need]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 * scale)
                .collect()
        }
    } else {
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            let s = r.token().ok_or_else(|| Error::Truncated {
                path: path.to_path_buf(),
                detail: format!("{i} of {n} samples present"),
            })?;
            let x: usize = std::str::from_utf8(s)
                .ok()
                .and_then(|s| s.parse().ok())
                .filter(|&x| x <= maxval)
                .ok_or_else(|| Error::Malformed {
                    path: path.to_path_buf(),
                    detail: format!("sample {i} is not a number in 0..={maxval}"),
                })?;
            v.push(x as f64 * scale);
        }
        v
    };
    Ok(Grid::from_vec(w, h, values))
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<Grid<f64>> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| {
        let detail = e.to_string();
        if detail.to_ascii_lowercase().contains("eof") || detail.to_ascii_lowercase().contains("end of") {
            Error::Truncated {
                path: path.to_path_buf(),
                detail,
            }
        } else {
            Error::Malformed {
                path: path.to_path_buf(),
                detail,
            }
        }
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::ZeroDimensions { path: path.to_path_buf() });
    }
    let values = match &img {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => {
            img.to_luma8().into_raw().into_iter().map(f64::from).collect()
        }
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => img
            .to_luma16()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 * 255.0 / 65535.0)
            .collect(),
        _ => img
            .to_rgb8()
            .pixels()
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect(),
    };
    Ok(Grid::from_vec(w, h, values))
}

/// Bilinear resampling with pixel-centre alignment. Constant images stay
/// exactly constant.
pub fn resize_bilinear(src: &Grid<f64>, width: usize, height: usize) -> Result<Grid<f64>> {
    if width == 0 || height == 0 || src.is_empty() {
        return Err(Error::invalid("cannot resize to or from an empty image"));
    }
    let axis = |dst: usize, n_src: usize, n_dst: usize| -> (usize, usize, f64) {
        let pos = ((dst as f64 + 0.5) * n_src as f64 / n_dst as f64 - 0.5).clamp(0.0, (n_src - 1) as f64);
        let i0 = pos.floor() as usize;
        let i1 = (i0 + 1).min(n_src - 1);
        (i0, i1, pos - i0 as f64)
    };
    let xs: Vec<_> = (0..width).map(|x| axis(x, src.width(), width)).collect();
    let ys: Vec<_> = (0..height).map(|y| axis(y, src.height(), height)).collect();
    Ok(Grid::from_fn(width, height, |x, y| {
        let (x0, x1, fx) = xs[x];
        let (y0, y1, fy) = ys[y];
        let top = lerp(src[(x0, y0)], src[(x1, y0)], fx);
        let bottom = lerp(src[(x0, y1)], src[(x1, y1)], fx);
        lerp(top, bottom, fy)
    }))
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// 8-bit PGM of `values` after min-max normalisation to `0..=255`. A constant
/// image maps to all zeros.
pub fn encode_pgm_normalized(values: &Grid<f64>, binary: bool) -> Vec<u8> {
    let (lo, hi) = values
        .as_slice()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let quantized = values.map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 });
    encode_pgm(&quantized, binary)
}

pub fn encode_pgm(pixels: &Grid<u8>, binary: bool) -> Vec<u8> {
    let magic = if binary { "P5" } else { "P2" };
    let mut out = format!("{magic}\n{} {}\n255\n", pixels.width(), pixels.height()).into_bytes();
    if binary {
        out.extend_from_slice(pixels.as_slice());
    } else {
        for y in 0..pixels.height() {
            let row: Vec<String> = pixels.row(y).iter().map(u8::to_string).collect();
            out.extend_from_slice(row.join(" ").as_bytes());
            out.push(b'\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn p() -> PathBuf {
        PathBuf::from("test.img")
    }

    fn pattern(w: usize, h: usize) -> Grid<u8> {
        Grid::from_fn(w, h, |x, y| ((x * 31 + y * 17) % 256) as u8)
    }

    #[test]
    fn ascii_and_binary_pgm_agree() {
        let px = pattern(7, 5);
        let a = decode_image(&encode_pgm(&px, false), &p()).unwrap();
        let b = decode_image(&encode_pgm(&px, true), &p()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[(3, 2)], px[(3, 2)] as f64);
    }

    #[test]
    fn header_comments_and_sixteen_bit() {
        let mut bytes = b"P5\n# made by hand\n2 1\n# another\n65535\n".to_vec();
        bytes.extend_from_slice(&[0xff, 0xff, 0x00, 0x00]);
        let g = decode_image(&bytes, &p()).unwrap();
        assert_eq!(g.as_slice(), &[255.0, 0.0]);
    }

    #[test]
    fn distinct_errors() {
        assert!(matches!(decode_image(b"GIF89a", &p()), Err(Error::UnknownFormat { .. })));
        assert!(matches!(decode_image(b"P5\n4 4\n255\n\x01\x02", &p()), Err(Error::Truncated { .. })));
        assert!(matches!(decode_image(b"P2\n2 2\n255\n1 2 3", &p()), Err(Error::Truncated { .. })));
        assert!(matches!(decode_image(b"P5\n0 4\n255\n", &p()), Err(Error::ZeroDimensions { .. })));
        assert!(matches!(decode_image(b"P5\n4", &p()), Err(Error::Truncated { .. })));
        let err = decode_image(b"P2\n1 1\n255\n300", &p()).unwrap_err();
        assert!(matches!(err, Error::Malformed { .. }));
        assert!(err.to_string().contains("test.img"));
    }

    #[test]
    fn png_gray_and_rgb() {
        let mut buf = std::io::Cursor::new(Vec::new());
        let gray = image::GrayImage::from_fn(3, 2, |x, y| image::Luma([(x * 10 + y) as u8]));
        gray.write_to(&mut buf, ImageFormat::Png).unwrap();
        let g = decode_image(buf.get_ref(), &p()).unwrap();
        assert_eq!(g[(2, 1)], 21.0);

        let mut buf = std::io::Cursor::new(Vec::new());
        let rgb = image::RgbImage::from_pixel(2, 2, image::Rgb([100, 50, 200]));
        rgb.write_to(&mut buf, ImageFormat::Png).unwrap();
        let g = decode_image(buf.get_ref(), &p()).unwrap();
        assert!((g[(1, 1)] - (29.9 + 29.35 + 22.8)).abs() < 1e-9);

        let truncated = &buf.get_ref()[..buf.get_ref().len() / 2];
        assert!(decode_image(truncated, &p()).is_err());
    }

    #[test]
    fn resize_keeps_constants_and_identity() {
        let c = Grid::filled(184, 224, 77.25);
        let r = resize_bilinear(&c, 92, 112).unwrap();
        assert!(r.as_slice().iter().all(|&v| v == 77.25));
        let px = pattern(92, 112).map(|&v| v as f64);
        assert_eq!(resize_bilinear(&px, 92, 112).unwrap(), px);
    }

    #[test]
    fn resize_downscale_by_two_averages_pairs() {
        let src = Grid::from_fn(4, 2, |x, _| x as f64);
        let r = resize_bilinear(&src, 2, 1).unwrap();
        assert_eq!(r.as_slice(), &[0.5, 2.5]);
    }

    #[test]
    fn normalized_export() {
        let g = Grid::from_vec(3, 1, vec![2.0, 4.0, 6.0]);
        let bytes = encode_pgm_normalized(&g, true);
        let back = decode_image(&bytes, &p()).unwrap();
        assert_eq!(back.as_slice(), &[0.0, 128.0, 255.0]);
    }
}
