//! Rasterisation of marble traces: time runs left to right, space bottom to
//! top. Bubbles are filled with palette colours, particle paths drawn in
//! black and fragmentation events as red vertical segments.

mod ppm;
mod svg;

pub use ppm::{encode_ppm, encode_ppm_annotated, read_ppm, write_ppm};
pub use svg::{marble_svg, write_svg};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::marble::{BubbleSet, EventKind, MarbleTrace};
use crate::stochastics::splitmix64;

pub type Rgb = [u8; 3];

pub const BACKGROUND: Rgb = [255, 255, 255];
pub const PATH: Rgb = [0, 0, 0];
pub const FRAGMENT: Rgb = [220, 0, 0];

/// Number of distinct hues in the palette.
const HUES: u64 = 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB, row 0 at the top.
    pub pixels: Vec<Rgb>,
}

impl Raster {
    pub fn new(width: usize, height: usize, fill: Rgb) -> Result<Self> {
        ensure(width > 0 && height > 0, || format!("raster size {width}x{height} is empty"))?;
        Ok(Self {
            width,
            height,
            pixels: vec![fill; width * height],
        })
    }

    pub fn get(&self, col: usize, row: usize) -> Rgb {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, c: Rgb) {
        self.pixels[row * self.width + col] = c;
    }

    fn line(&mut self, (c0, r0): (i64, i64), (c1, r1): (i64, i64), c: Rgb) {
        // Bresenham, clipped per pixel
        let (dc, dr) = ((c1 - c0).abs(), -(r1 - r0).abs());
        let (sc, sr) = (if c0 < c1 { 1 } else { -1 }, if r0 < r1 { 1 } else { -1 });
        let (mut col, mut row, mut err) = (c0, r0, dc + dr);
        loop {
            if (0..self.width as i64).contains(&col) && (0..self.height as i64).contains(&row) {
                self.set(col as usize, row as usize, c);
            }
            if col == c1 && row == r1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dr {
                err += dr;
                col += sc;
            }
            if e2 <= dc {
                err += dc;
                row += sr;
            }
        }
    }
}

/// Region of the `(time, space)` plane mapped onto the raster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewport {
    pub t_min: f64,
    pub t_max: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl Viewport {
    /// The whole trace: `[0, horizon] × window`.
    pub fn of(trace: &MarbleTrace) -> Self {
        Self {
            t_min: trace.grid.t0,
            t_max: trace.grid.t1(),
            x_min: trace.config.window.0,
            x_max: trace.config.window.1,
        }
    }
}

struct Mapping {
    vp: Viewport,
    width: usize,
    height: usize,
}

impl Mapping {
    fn col_f(&self, t: f64) -> f64 {
        (t - self.vp.t_min) / (self.vp.t_max - self.vp.t_min) * self.width as f64
    }

    fn row_f(&self, x: f64) -> f64 {
        (self.vp.x_max - x) / (self.vp.x_max - self.vp.x_min) * self.height as f64
    }

    /// Pixel containing `(t, x)`; the far edges map into the last pixel.
    fn pixel(&self, t: f64, x: f64) -> (i64, i64) {
        let c = (self.col_f(t).floor() as i64).min(self.width as i64 - 1);
        let r = (self.row_f(x).floor() as i64).min(self.height as i64 - 1);
        (c, r)
    }

    fn col_time(&self, col: usize) -> f64 {
        self.vp.t_min + (col as f64 + 0.5) / self.width as f64 * (self.vp.t_max - self.vp.t_min)
    }
}

/// Colour of bubble `id`: one of `HUES` evenly spaced hues picked by a hash
/// of the id and the palette seed.
pub fn bubble_color(id: u64, palette_seed: u64) -> Rgb {
    let h = splitmix64(id ^ splitmix64(palette_seed));
    let hue = (h % HUES) as f64 / HUES as f64;
    let sat = 0.35 + 0.3 * ((h >> 16) % 4) as f64 / 3.0;
    hsv_to_rgb(hue, sat, 0.95)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> Rgb {
    let i = (h * 6.0).floor();
    let f = h * 6.0 - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - f * s), v * (1.0 - (1.0 - f) * s));
    let (r, g, b) = match i as i64 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    let to8 = |c: f64| (c * 255.0).round().clamp(0.0, 255.0) as u8;
    [to8(r), to8(g), to8(b)]
}

pub fn render_marble(
    trace: &MarbleTrace,
    bubbles: &BubbleSet,
    viewport: Viewport,
    size: (usize, usize),
    palette_seed: u64,
) -> Result<Raster> {
    let vp = viewport;
    ensure(vp.t_min < vp.t_max && vp.x_min < vp.x_max, || format!("degenerate viewport {vp:?}"))?;
    let (t_lo, t_hi) = (trace.grid.t0, trace.grid.t1());
    let (w_lo, w_hi) = trace.config.window;
    let tol = 1e-9 * (t_hi - t_lo);
    ensure(
        vp.t_min >= t_lo - tol && vp.t_max <= t_hi + tol && vp.x_min >= w_lo && vp.x_max <= w_hi,
        || format!("viewport {vp:?} leaves the trace window [{t_lo}, {t_hi}] x [{w_lo}, {w_hi}]"),
    )?;
    let mut img = Raster::new(size.0, size.1, BACKGROUND)?;
    let map = Mapping {
        vp,
        width: size.0,
        height: size.1,
    };

    for (id, b) in bubbles.bubbles.iter().enumerate() {
        if b.times.is_empty() {
            continue;
        }
        let color = bubble_color(id as u64, palette_seed);
        let (first, last) = (b.times[0], b.times[b.times.len() - 1]);
        let c0 = map.col_f(first).floor().max(0.0) as usize;
        let c1 = (map.col_f(last).ceil().max(0.0) as usize).min(img.width);
        for col in c0..c1.max(c0 + 1).min(img.width) {
            let t = map.col_time(col).clamp(first, last);
            let k = b.times.partition_point(|&u| u <= t).clamp(1, b.times.len()) - 1;
            let (l, u) = if k + 1 < b.times.len() {
                let w = (t - b.times[k]) / (b.times[k + 1] - b.times[k]);
                (
                    b.lower[k] + w * (b.lower[k + 1] - b.lower[k]),
                    b.upper[k] + w * (b.upper[k + 1] - b.upper[k]),
                )
            } else {
                (b.lower[k], b.upper[k])
            };
            // pixel rows whose centres lie strictly inside (l, u)
            let r0 = (map.row_f(u) - 0.5).ceil().max(0.0) as usize;
            let r1 = ((map.row_f(l) - 0.5).floor() as i64).min(img.height as i64 - 1);
            for row in r0 as i64..=r1 {
                img.set(col, row as usize, color);
            }
        }
    }

    for pair in trace.fronts.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let next: HashMap<u64, f64> = b.ids.iter().copied().zip(b.positions.iter().copied()).collect();
        for (id, &x0) in a.ids.iter().zip(&a.positions) {
            if let Some(&x1) = next.get(id) {
                if (x0 < vp.x_min && x1 < vp.x_min) || (x0 > vp.x_max && x1 > vp.x_max) {
                    continue;
                }
                img.line(map.pixel(a.time, x0), map.pixel(b.time, x1), PATH);
            }
        }
    }

    for e in trace.events.iter().filter(|e| e.kind == EventKind::Fragment) {
        if e.time < vp.t_min || e.time > vp.t_max || e.upper < vp.x_min || e.lower > vp.x_max {
            continue;
        }
        let top = map.pixel(e.time, e.upper.min(vp.x_max));
        let bottom = map.pixel(e.time, e.lower.max(vp.x_min));
        img.line(top, bottom, FRAGMENT);
    }
    Ok(img)
}
