//! Model container.
//!
//! A text header of `key=value` lines terminated by `end`, followed by the
//! weight matrix (row-major) and the bias vector as little-endian `f32`:
//!
//! ```text
//! SHINDO-MODEL
//! version=1
//! kind=regression
//! grid.n_rows=64
//! ...
//! in_dim=8192
//! out_dim=4096
//! end
//! <in_dim * out_dim + out_dim little-endian f32>
//! ```

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::geo::GridSpec;
use crate::scalar::Scalar;

use super::{ModelKind, ModelParams};

pub const MODEL_MAGIC: &str = "SHINDO-MODEL";
pub const MODEL_FORMAT_VERSION: u32 = 1;

const CHUNK: usize = 1 << 16;

pub fn write_model<T: Scalar, W: Write>(params: &ModelParams<T>, w: W) -> Result<()> {
    params.check_shape()?;
    let mut w = BufWriter::new(w);
    let g = &params.grid;
    let e = &params.encoder;
    writeln!(w, "{MODEL_MAGIC}")?;
    writeln!(w, "version={MODEL_FORMAT_VERSION}")?;
    writeln!(w, "kind={}", params.kind)?;
    writeln!(w, "grid.n_rows={}", g.n_rows)?;
    writeln!(w, "grid.n_cols={}", g.n_cols)?;
    writeln!(w, "grid.lat_min={}", g.lat_min)?;
    writeln!(w, "grid.lat_max={}", g.lat_max)?;
    writeln!(w, "grid.lon_min={}", g.lon_min)?;
    writeln!(w, "grid.lon_max={}", g.lon_max)?;
    writeln!(w, "grid.projection={}", g.projection)?;
    writeln!(w, "encoder.k={}", e.k)?;
    writeln!(w, "encoder.mag_transform={}", e.mag_transform)?;
    writeln!(w, "encoder.mag_ref={}", e.mag_ref)?;
    writeln!(w, "encoder.depth_scale={}", e.depth_scale)?;
    writeln!(w, "in_dim={}", params.in_dim)?;
    writeln!(w, "out_dim={}", params.out_dim)?;
    writeln!(w, "payload=f32le")?;
    writeln!(w, "end")?;
    let mut buf = Vec::with_capacity(CHUNK * 4);
    for chunk in params.w.chunks(CHUNK).chain(params.b.chunks(CHUNK)) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.as_f32().to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_model<T: Scalar>(params: &ModelParams<T>, path: impl AsRef<Path>) -> Result<()> {
    write_model(params, std::fs::File::create(path)?)
}

fn field<V: FromStr>(header: &HashMap<String, String>, key: &str) -> Result<V> {
    let raw = header
        .get(key)
        .ok_or_else(|| Error::Version(format!("header is missing `{key}`")))?;
    raw.parse()
        .map_err(|_| Error::Version(format!("header field `{key}` has invalid value `{raw}`")))
}

fn read_floats<T: Scalar, R: Read>(r: &mut R, n: usize, already: usize, total: usize) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(n);
    let mut buf = vec![0u8; CHUNK * 4];
    let mut remaining = n;
    while remaining > 0 {
        let take = remaining.min(CHUNK);
        let bytes = &mut buf[..take * 4];
        let mut filled = 0;
        while filled < bytes.len() {
            match r.read(&mut bytes[filled..])? {
                0 => {
                    return Err(Error::Truncated {
                        expected: total * 4,
                        found: (already + out.len()) * 4 + filled,
                    })
                }
                k => filled += k,
            }
        }
        out.extend(
            bytes
                .chunks_exact(4)
                .map(|c| T::from_f32_bits(f32::from_le_bytes([c[0], c[1], c[2], c[3]]))),
        );
        remaining -= take;
    }
    Ok(out)
}

pub fn read_model<T: Scalar, R: Read>(r: R) -> Result<ModelParams<T>> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != MODEL_MAGIC {
        return Err(Error::Version("missing model file magic".into()));
    }
    let mut header = HashMap::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Version("header ended without `end`".into()));
        }
        let l = line.trim_end();
        if l == "end" {
            break;
        }
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| Error::Version(format!("malformed header line `{l}`")))?;
        header.insert(k.to_string(), v.to_string());
    }
    let version: u32 = field(&header, "version")?;
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::Version(format!("format version {version}, expected {MODEL_FORMAT_VERSION}")));
    }
    if header.get("payload").map(String::as_str) != Some("f32le") {
        return Err(Error::Version("unsupported payload encoding".into()));
    }
    let kind: ModelKind = field(&header, "kind")?;
    let grid = GridSpec {
        n_rows: field(&header, "grid.n_rows")?,
        n_cols: field(&header, "grid.n_cols")?,
        lat_min: field(&header, "grid.lat_min")?,
        lat_max: field(&header, "grid.lat_max")?,
        lon_min: field(&header, "grid.lon_min")?,
        lon_max: field(&header, "grid.lon_max")?,
        projection: field(&header, "grid.projection")?,
    };
    let encoder = EncoderConfig {
        k: field(&header, "encoder.k")?,
        mag_transform: field(&header, "encoder.mag_transform")?,
        mag_ref: field(&header, "encoder.mag_ref")?,
        depth_scale: field(&header, "encoder.depth_scale")?,
    };
    grid.validate()?;
    encoder.validate(&grid)?;
    let in_dim: usize = field(&header, "in_dim")?;
    let out_dim: usize = field(&header, "out_dim")?;
    let expected = ModelParams::<T> {
        kind,
        grid,
        encoder,
        in_dim: crate::encoder::feature_len(&grid),
        out_dim: grid.n_cells() * kind.outputs_per_cell(),
        w: Vec::new(),
        b: Vec::new(),
    };
    if in_dim != expected.in_dim || out_dim != expected.out_dim {
        return Err(Error::dim(
            format!("{} x {} for a {kind} model on a {}x{} grid", expected.in_dim, expected.out_dim, grid.n_rows, grid.n_cols),
            format!("{in_dim} x {out_dim}"),
        ));
    }
    let total = in_dim * out_dim + out_dim;
    let w = read_floats(&mut r, in_dim * out_dim, 0, total)?;
    let b = read_floats(&mut r, out_dim, in_dim * out_dim, total)?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::dim(format!("{} payload bytes", total * 4), "trailing data"));
    }
    Ok(ModelParams { w, b, ..expected })
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<ModelParams<T>> {
    read_model(std::fs::File::open(path)?)
}
