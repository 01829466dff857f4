//! Plain-text PPM (`P3`) images.

use std::io::Write;

use crate::error::{Error, Result};

pub type Rgb = [u8; 3];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    /// Row-major from the top-left corner.
    pub pixels: Vec<Rgb>,
}

impl Raster {
    pub fn new(width: usize, height: usize, fill: Rgb) -> Self {
        Raster { width, height, pixels: vec![fill; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        self.pixels[y * self.width + x] = c;
    }

    fn plot(&mut self, x: i64, y: i64, c: Rgb) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.set(x as usize, y as usize, c);
        }
    }

    /// Bresenham segment, endpoints included.
    pub fn line(&mut self, from: (i64, i64), to: (i64, i64), c: Rgb) {
        let (mut x, mut y) = from;
        let (dx, dy) = ((to.0 - x).abs(), -(to.1 - y).abs());
        let (sx, sy) = ((to.0 - x).signum(), (to.1 - y).signum());
        let mut err = dx + dy;
        loop {
            self.plot(x, y, c);
            if (x, y) == to {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    /// Lines are kept under 70 characters.
    pub fn write_ppm<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P3\n{} {}\n255\n", self.width, self.height)?;
        for row in self.pixels.chunks(self.width) {
            let mut line = String::new();
            for px in row {
                let item = format!("{} {} {}", px[0], px[1], px[2]);
                if !line.is_empty() && line.len() + 1 + item.len() > 69 {
                    writeln!(w, "{line}")?;
                    line.clear();
                }
                if !line.is_empty() {
                    line.push(' ');
                }
                line.push_str(&item);
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_ppm(text: &str) -> Result<Raster> {
        let bad = |msg: &str| Error::Parse { line: 0, msg: format!("ppm: {msg}") };
        let mut tokens = text.lines().map(|l| l.split('#').next().unwrap_or("")).flat_map(str::split_whitespace);
        if tokens.next() != Some("P3") {
            return Err(bad("expected P3 magic"));
        }
        let mut num = || -> Result<usize> { tokens.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("truncated or non-numeric")) };
        let (width, height, max) = (num()?, num()?, num()?);
        if max != 255 {
            return Err(bad("only maxval 255 is supported"));
        }
        let mut pixels = Vec::with_capacity(width * height);
        for _ in 0..width * height {
            let px = [num()?, num()?, num()?];
            if px.iter().any(|&v| v > 255) {
                return Err(bad("sample above maxval"));
            }
            pixels.push(px.map(|v| v as u8));
        }
        Ok(Raster { width, height, pixels })
    }
}
