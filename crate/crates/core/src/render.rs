//! Binary PPM (P6) rendering of intensity grids, one square block of
//! pixels per cell, row 0 (north) at the top.
//!
//! Two palettes:
//!
//! * `Grayscale` (default): intensity clamped to [0, 7] and mapped linearly
//!   onto 0..=255.
//! * `Classes`: one fixed color per JMA class, from white for class 0 to a
//!   dark crimson for class 7:
//!
//! | class | RGB             |
//! |-------|-----------------|
//! | 0     | 255, 255, 255   |
//! | 1     | 205, 230, 250   |
//! | 2     | 130, 190, 245   |
//! | 3     |  60, 135, 220   |
//! | 4     | 120, 210, 120   |
//! | 5-    | 250, 240,  90   |
//! | 5+    | 250, 195,  60   |
//! | 6-    | 245, 135,  40   |
//! | 6+    | 225,  50,  30   |
//! | 7     | 140,   0,  60   |
//!
//! The optional epicenter marker fills the middle of its cell's block with
//! pure red on grayscale maps and black on class maps.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{point_to_cell, GeoPoint, JmaClass};
use crate::grid::IntensityGrid;
use crate::scalar::Scalar;

pub type Rgb = [u8; 3];

pub const CLASS_PALETTE: [Rgb; JmaClass::COUNT] = [
    [255, 255, 255],
    [205, 230, 250],
    [130, 190, 245],
    [60, 135, 220],
    [120, 210, 120],
    [250, 240, 90],
    [250, 195, 60],
    [245, 135, 40],
    [225, 50, 30],
    [140, 0, 60],
];

pub const GRAYSCALE_MARKER: Rgb = [255, 0, 0];
pub const CLASS_MARKER: Rgb = [0, 0, 0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Palette {
    #[default]
    Grayscale,
    Classes,
}

impl fmt::Display for Palette {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Palette::Grayscale => "grayscale",
            Palette::Classes => "classes",
        })
    }
}

impl FromStr for Palette {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grayscale" | "gray" => Ok(Palette::Grayscale),
            "classes" | "class" => Ok(Palette::Classes),
            other => Err(Error::InvalidArgument(format!("unknown palette `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderOptions {
    pub palette: Palette,
    /// Side of the pixel block drawn per cell.
    pub block: usize,
    pub epicenter: Option<GeoPoint>,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions { palette: Palette::Grayscale, block: 8, epicenter: None }
    }
}

pub fn gray_level<T: Scalar>(intensity: T) -> u8 {
    let v = intensity.as_f64().clamp(0.0, 7.0);
    (v / 7.0 * 255.0).round() as u8
}

fn cell_color<T: Scalar>(v: T, palette: Palette) -> Result<Rgb> {
    Ok(match palette {
        Palette::Grayscale => [gray_level(v); 3],
        Palette::Classes => CLASS_PALETTE[crate::geo::intensity_to_class(v)?.ordinal()],
    })
}

/// Returns the full P6 file contents.
pub fn render_ppm<T: Scalar>(grid: &IntensityGrid<T>, opts: &RenderOptions) -> Result<Vec<u8>> {
    if opts.block == 0 {
        return Err(Error::InvalidArgument("block size must be at least 1".into()));
    }
    let spec = grid.spec();
    let (width, height) = (spec.n_cols * opts.block, spec.n_rows * opts.block);
    let header = format!("P6\n{width} {height}\n255\n");
    let mut out = Vec::with_capacity(header.len() + width * height * 3);
    out.extend_from_slice(header.as_bytes());
    let colors = grid
        .values()
        .iter()
        .map(|&v| cell_color(v, opts.palette))
        .collect::<Result<Vec<_>>>()?;
    let marker = match opts.epicenter {
        Some(p) => Some(point_to_cell(p, spec).ok_or(Error::OutsideWindow { lat: p.lat, lon: p.lon })?),
        None => None,
    };
    let marker_color = match opts.palette {
        Palette::Grayscale => GRAYSCALE_MARKER,
        Palette::Classes => CLASS_MARKER,
    };
    // Middle half of the block, at least one pixel.
    let lo = opts.block / 4;
    let hi = (opts.block - opts.block / 4).max(lo + 1);
    for py in 0..height {
        let row = py / opts.block;
        for px in 0..width {
            let col = px / opts.block;
            let in_marker = marker.is_some_and(|m| {
                let (dy, dx) = (py % opts.block, px % opts.block);
                m.row == row && m.col == col && (lo..hi).contains(&dy) && (lo..hi).contains(&dx)
            });
            let c = if in_marker { marker_color } else { colors[row * spec.n_cols + col] };
            out.extend_from_slice(&c);
        }
    }
    Ok(out)
}

pub fn save_ppm<T: Scalar>(grid: &IntensityGrid<T>, opts: &RenderOptions, path: impl AsRef<Path>) -> Result<()> {
    let bytes = render_ppm(grid, opts)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}
