//! Minimal netpbm support: PBM (P1/P4) and PGM (P2/P5), one or more images
//! per file. Writing always uses the plain (ASCII) variants.

use std::fmt::Write as _;

/// A decoded netpbm image with samples scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PnmImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Magic {
    PlainPbm,
    PlainPgm,
    RawPbm,
    RawPgm,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws_and_comments(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.data.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws_and_comments();
        self.pos >= self.data.len()
    }

    fn magic(&mut self) -> Result<Magic, String> {
        self.skip_ws_and_comments();
        let m = self.data.get(self.pos..self.pos + 2).ok_or("truncated magic number")?;
        self.pos += 2;
        match m {
            b"P1" => Ok(Magic::PlainPbm),
            b"P2" => Ok(Magic::PlainPgm),
            b"P4" => Ok(Magic::RawPbm),
            b"P5" => Ok(Magic::RawPgm),
            other => Err(format!("unsupported magic number {:?}", String::from_utf8_lossy(other))),
        }
    }

    fn number(&mut self) -> Result<usize, String> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.data.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if self.pos >= self.data.len() {
                "unexpected end of file".into()
            } else {
                format!("expected a number at byte {}", self.pos)
            });
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| "number out of range".into())
    }

    /// A single plain-PBM bit; digits need not be separated.
    fn bit(&mut self) -> Result<f64, String> {
        self.skip_ws_and_comments();
        match self.data.get(self.pos) {
            Some(b'0') => {
                self.pos += 1;
                Ok(0.0)
            }
            Some(b'1') => {
                self.pos += 1;
                Ok(1.0)
            }
            Some(_) => Err(format!("invalid PBM bit at byte {}", self.pos)),
            None => Err("unexpected end of file".into()),
        }
    }

    fn raw(&mut self, len: usize) -> Result<&'a [u8], String> {
        let out = self.data.get(self.pos..self.pos + len).ok_or("truncated raster")?;
        self.pos += len;
        Ok(out)
    }
}

pub fn parse(data: &[u8]) -> Result<Vec<PnmImage>, String> {
    let mut cur = Cursor { data, pos: 0 };
    let mut images = Vec::new();
    while !cur.at_end() {
        images.push(parse_one(&mut cur)?);
    }
    if images.is_empty() {
        return Err("no images in file".into());
    }
    Ok(images)
}

fn parse_one(cur: &mut Cursor<'_>) -> Result<PnmImage, String> {
    let magic = cur.magic()?;
    let width = cur.number()?;
    let height = cur.number()?;
    let count = width * height;
    let maxval = match magic {
        Magic::PlainPgm | Magic::RawPgm => {
            let m = cur.number()?;
            if m == 0 || m > 65535 {
                return Err(format!("invalid maxval {m}"));
            }
            m
        }
        _ => 1,
    };
    let mut pixels = Vec::with_capacity(count);
    match magic {
        Magic::PlainPbm => {
            for _ in 0..count {
                pixels.push(cur.bit()?);
            }
        }
        Magic::PlainPgm => {
            for _ in 0..count {
                let v = cur.number()?;
                if v > maxval {
                    return Err(format!("sample {v} exceeds maxval {maxval}"));
                }
                pixels.push(v as f64 / maxval as f64);
            }
        }
        Magic::RawPbm => {
            cur.pos += 1;
            let row_bytes = width.div_ceil(8);
            let raster = cur.raw(row_bytes * height)?;
            for row in raster.chunks(row_bytes) {
                for x in 0..width {
                    let bit = (row[x / 8] >> (7 - x % 8)) & 1;
                    pixels.push(f64::from(bit));
                }
            }
        }
        Magic::RawPgm => {
            cur.pos += 1;
            let wide = maxval > 255;
            let raster = cur.raw(count * if wide { 2 } else { 1 })?;
            if wide {
                for pair in raster.chunks(2) {
                    pixels.push(f64::from(u16::from_be_bytes([pair[0], pair[1]])) / maxval as f64);
                }
            } else {
                pixels.extend(raster.iter().map(|&b| f64::from(b) / maxval as f64));
            }
        }
    }
    Ok(PnmImage { width, height, pixels })
}

/// Plain PBM. Fails on any pixel other than exactly 0 or 1.
pub fn write_pbm(images: &[PnmImage]) -> Result<String, String> {
    let mut out = String::new();
    for img in images {
        let _ = writeln!(out, "P1\n{} {}", img.width, img.height);
        for row in img.pixels.chunks(img.width.max(1)) {
            let mut line = Vec::with_capacity(row.len());
            for &v in row {
                line.push(match v {
                    0.0 => "0",
                    1.0 => "1",
                    v => return Err(format!("PBM needs binary pixels, found {v}")),
                });
            }
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
    Ok(out)
}

/// Plain PGM, values clamped to `[0, 1]` and rounded to `maxval` steps.
pub fn write_pgm(images: &[PnmImage], maxval: u16) -> String {
    let mut out = String::new();
    let m = f64::from(maxval);
    for img in images {
        let _ = writeln!(out, "P2\n{} {}\n{}", img.width, img.height, maxval);
        for row in img.pixels.chunks(img.width.max(1)) {
            let line: Vec<String> = row
                .iter()
                .map(|v| ((v.clamp(0.0, 1.0) * m).round() as u32).to_string())
                .collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
    out
}
