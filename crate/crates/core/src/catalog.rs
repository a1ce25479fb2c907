//! Earthquake events, their rasterized intensity grids, dataset splits and
//! the per-cell AVS30 site raster.
//!
//! # Event files
//!
//! JSONL, one event per line:
//!
//! ```text
//! {"id":"e1","time":"2016-04-15T16:25:05Z","lat":32.7,"lon":130.77,"depth_km":12,"mag":7.3,"obs":[[32.8,130.7,6.5]]}
//! ```
//!
//! CSV alternative, with a header and observations packed into one field as
//! `lat:lon:intensity` triples separated by `;`:
//!
//! ```text
//! id,time,lat,lon,depth_km,mag,obs
//! e1,2016-04-15T16:25:05Z,32.7,130.77,12,7.3,32.8:130.7:6.5;33.0:131.0:5.1
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{point_to_cell, GeoPoint, GridSpec};
use crate::grid::{read_numeric_csv, IntensityGrid};
use crate::scalar::Scalar;

/// Magnitude threshold of the dataset.
pub const DEFAULT_MIN_MAGNITUDE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub location: GeoPoint,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypocenterEvent {
    pub id: String,
    pub origin_time: DateTime<Utc>,
    pub epicenter: GeoPoint,
    pub depth_km: f64,
    pub magnitude_jma: f64,
    pub observations: Vec<Observation>,
}

impl HypocenterEvent {
    /// An event with no observations, for prediction queries. The origin
    /// time is the Unix epoch; nothing downstream of the encoder reads it.
    pub fn point_source(id: impl Into<String>, epicenter: GeoPoint, depth_km: f64, magnitude_jma: f64) -> Result<Self> {
        check_finite("depth", depth_km).map_err(Error::InvalidArgument)?;
        check_finite("magnitude", magnitude_jma).map_err(Error::InvalidArgument)?;
        if depth_km < 0.0 {
            return Err(Error::InvalidArgument(format!("negative depth {depth_km}")));
        }
        Ok(HypocenterEvent {
            id: id.into(),
            origin_time: DateTime::<Utc>::UNIX_EPOCH,
            epicenter,
            depth_km,
            magnitude_jma,
            observations: Vec::new(),
        })
    }
}

/// Wire form of one JSONL line.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRecord {
    id: String,
    time: String,
    lat: f64,
    lon: f64,
    depth_km: f64,
    mag: f64,
    #[serde(default)]
    obs: Vec<[f64; 3]>,
}

fn format_time(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn parse_time(s: &str) -> std::result::Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("bad time `{s}`: {e}"))
}

fn check_finite(name: &str, v: f64) -> std::result::Result<f64, String> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{name} is not finite"))
    }
}

impl EventRecord {
    fn into_event(self) -> std::result::Result<HypocenterEvent, String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        let depth_km = check_finite("depth_km", self.depth_km)?;
        if depth_km < 0.0 {
            return Err(format!("negative depth_km {depth_km}"));
        }
        let magnitude_jma = check_finite("mag", self.mag)?;
        let epicenter = GeoPoint::new(self.lat, self.lon).map_err(|e| e.to_string())?;
        let observations = self
            .obs
            .into_iter()
            .map(|[lat, lon, intensity]| {
                let intensity = check_finite("observed intensity", intensity)?;
                if intensity < 0.0 {
                    return Err(format!("negative observed intensity {intensity}"));
                }
                Ok(Observation {
                    location: GeoPoint::new(lat, lon).map_err(|e| e.to_string())?,
                    intensity,
                })
            })
            .collect::<std::result::Result<Vec<_>, String>>()?;
        Ok(HypocenterEvent {
            id: self.id,
            origin_time: parse_time(&self.time)?,
            epicenter,
            depth_km,
            magnitude_jma,
            observations,
        })
    }

    fn from_event(e: &HypocenterEvent) -> Self {
        EventRecord {
            id: e.id.clone(),
            time: format_time(&e.origin_time),
            lat: e.epicenter.lat,
            lon: e.epicenter.lon,
            depth_km: e.depth_km,
            mag: e.magnitude_jma,
            obs: e
                .observations
                .iter()
                .map(|o| [o.location.lat, o.location.lon, o.intensity])
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CatalogFormat {
    #[default]
    Jsonl,
    Csv,
}

impl CatalogFormat {
    /// Guesses from the file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CatalogFormat::Csv,
            _ => CatalogFormat::Jsonl,
        }
    }
}

impl FromStr for CatalogFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(CatalogFormat::Jsonl),
            "csv" => Ok(CatalogFormat::Csv),
            other => Err(Error::InvalidArgument(format!("unknown catalog format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub min_magnitude: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            min_magnitude: DEFAULT_MIN_MAGNITUDE,
        }
    }
}

/// An event dropped at load time for falling below the magnitude threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub line: usize,
    pub id: String,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Catalog {
    /// Sorted by origin time, ties in file order.
    pub events: Vec<HypocenterEvent>,
    pub skipped: Vec<Skipped>,
}

impl Catalog {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn by_id(&self) -> HashMap<&str, &HypocenterEvent> {
        self.events.iter().map(|e| (e.id.as_str(), e)).collect()
    }
}

pub fn load_catalog(path: impl AsRef<Path>, format: CatalogFormat, opts: &LoadOptions) -> Result<Catalog> {
    let path = path.as_ref();
    let records = match format {
        CatalogFormat::Jsonl => read_jsonl(path)?,
        CatalogFormat::Csv => read_csv(path)?,
    };
    assemble(path, records, opts)
}

fn read_jsonl(path: &Path) -> Result<Vec<(usize, EventRecord)>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EventRecord = serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

fn parse_packed_obs(field: &str) -> std::result::Result<Vec<[f64; 3]>, String> {
    field
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|triple| {
            let parts: Vec<&str> = triple.split(':').collect();
            if parts.len() != 3 {
                return Err(format!("observation `{triple}` is not lat:lon:intensity"));
            }
            let mut v = [0.0; 3];
            for (slot, p) in v.iter_mut().zip(&parts) {
                *slot = p.trim().parse().map_err(|e| format!("observation `{triple}`: {e}"))?;
            }
            Ok(v)
        })
        .collect()
}

fn read_csv(path: &Path) -> Result<Vec<(usize, EventRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(path, 1, e.to_string()))?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let err = |m: String| Error::parse(path, line, m);
        if rec.len() < 6 || rec.len() > 7 {
            return Err(err(format!("expected 6 or 7 fields, found {}", rec.len())));
        }
        let num = |idx: usize, name: &str| -> Result<f64> {
            rec[idx]
                .parse::<f64>()
                .map_err(|e| err(format!("field `{name}` = `{}`: {e}", &rec[idx])))
        };
        out.push((
            line,
            EventRecord {
                id: rec[0].to_string(),
                time: rec[1].to_string(),
                lat: num(2, "lat")?,
                lon: num(3, "lon")?,
                depth_km: num(4, "depth_km")?,
                mag: num(5, "mag")?,
                obs: match rec.get(6) {
                    Some(f) => parse_packed_obs(f).map_err(err)?,
                    None => Vec::new(),
                },
            },
        ));
    }
    Ok(out)
}

fn assemble(path: &Path, records: Vec<(usize, EventRecord)>, opts: &LoadOptions) -> Result<Catalog> {
    let mut seen = HashSet::new();
    let mut catalog = Catalog::default();
    for (line, rec) in records {
        if !seen.insert(rec.id.clone()) {
            return Err(Error::DuplicateId { id: rec.id, line });
        }
        let event = rec.into_event().map_err(|m| Error::parse(path, line, m))?;
        if event.magnitude_jma < opts.min_magnitude {
            log::warn!(
                "{}:{line}: skipping event {} with magnitude {} below {}",
                path.display(),
                event.id,
                event.magnitude_jma,
                opts.min_magnitude
            );
            catalog.skipped.push(Skipped {
                line,
                id: event.id,
                magnitude: event.magnitude_jma,
            });
            continue;
        }
        catalog.events.push(event);
    }
    catalog.events.sort_by_key(|e| e.origin_time);
    Ok(catalog)
}

pub fn write_catalog<W: Write>(events: &[HypocenterEvent], mut w: W) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, &EventRecord::from_event(e))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_catalog(events: &[HypocenterEvent], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_catalog(events, std::io::BufWriter::new(file))
}

/// Observed intensity grid: each cell holds the largest observation inside
/// it, cells without observations hold 0. Observations outside the window
/// are dropped.
pub fn rasterize<T: Scalar>(event: &HypocenterEvent, spec: &GridSpec) -> IntensityGrid<T> {
    let mut grid = IntensityGrid::zeros(*spec);
    for obs in &event.observations {
        if let Some(cell) = point_to_cell(obs.location, spec) {
            let v = T::lit(obs.intensity);
            if v > grid.get(cell) {
                grid.set(cell, v);
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPart {
    Train,
    Validation,
    Test,
}

impl SplitPart {
    fn header(self) -> &'static str {
        match self {
            SplitPart::Train => "[train]",
            SplitPart::Validation => "[validation]",
            SplitPart::Test => "[test]",
        }
    }
}

impl fmt::Display for SplitPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.header().trim_matches(['[', ']']))
    }
}

impl FromStr for SplitPart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitPart::Train),
            "validation" | "val" => Ok(SplitPart::Validation),
            "test" => Ok(SplitPart::Test),
            other => Err(Error::InvalidArgument(format!("unknown split part `{other}`"))),
        }
    }
}

/// Chronological train/validation/test sizes for the full 1,857-event catalog.
pub const REFERENCE_SPLIT_SIZES: (usize, usize, usize) = (1455, 227, 175);

/// Chronological split sizes in the reference proportions, for a catalog of
/// `n` events. Exact for the full 1,857-event catalog.
pub fn proportional_split_sizes(n: usize) -> (usize, usize, usize) {
    let (a, b, c) = REFERENCE_SPLIT_SIZES;
    let total = a + b + c;
    let train = (n * a + total / 2) / total;
    let validation = ((n * b + total / 2) / total).min(n - train);
    (train, validation, n - train - validation)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitMode {
    /// Earliest events train, then validation, then test.
    Chronological { train: usize, validation: usize, test: usize },
    /// Explicit id lists read from a split file.
    File(PathBuf),
}

impl DatasetSplit {
    pub fn part(&self, part: SplitPart) -> &[String] {
        match part {
            SplitPart::Train => &self.train,
            SplitPart::Validation => &self.validation,
            SplitPart::Test => &self.test,
        }
    }

    /// Events of one part, in split order.
    pub fn events<'a>(&self, part: SplitPart, catalog: &'a Catalog) -> Result<Vec<&'a HypocenterEvent>> {
        let index = catalog.by_id();
        self.part(part)
            .iter()
            .map(|id| index.get(id.as_str()).copied().ok_or_else(|| Error::UnknownId(id.clone())))
            .collect()
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for part in [SplitPart::Train, SplitPart::Validation, SplitPart::Test] {
            writeln!(w, "{}", part.header())?;
            for id in self.part(part) {
                writeln!(w, "{id}")?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    /// Reads a split file and checks every id against the catalog.
    pub fn load(path: impl AsRef<Path>, catalog: &Catalog) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut split = DatasetSplit::default();
        let mut current: Option<SplitPart> = None;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = Some(name.parse().map_err(|e: Error| Error::parse(path, i + 1, e.to_string()))?);
                continue;
            }
            let part = current.ok_or_else(|| Error::parse(path, i + 1, "event id before any section header"))?;
            let list = match part {
                SplitPart::Train => &mut split.train,
                SplitPart::Validation => &mut split.validation,
                SplitPart::Test => &mut split.test,
            };
            list.push(line.to_string());
        }
        split.check_against(catalog)?;
        Ok(split)
    }

    fn check_against(&self, catalog: &Catalog) -> Result<()> {
        let index = catalog.by_id();
        let mut seen = HashSet::new();
        for id in self.train.iter().chain(&self.validation).chain(&self.test) {
            if !index.contains_key(id.as_str()) {
                return Err(Error::UnknownId(id.clone()));
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidArgument(format!("event `{id}` listed in more than one split slot")));
            }
        }
        if seen.len() != catalog.len() {
            log::warn!(
                "split covers {} of {} catalog events; the rest are unused",
                seen.len(),
                catalog.len()
            );
        }
        Ok(())
    }
}

pub fn make_split(catalog: &Catalog, mode: &SplitMode) -> Result<DatasetSplit> {
    match mode {
        SplitMode::Chronological { train, validation, test } => {
            let (train, validation, test) = (*train, *validation, *test);
            if train + validation + test != catalog.len() {
                return Err(Error::SplitSize {
                    train,
                    validation,
                    test,
                    catalog: catalog.len(),
                });
            }
            let mut ordered: Vec<&HypocenterEvent> = catalog.events.iter().collect();
            ordered.sort_by_key(|e| e.origin_time);
            let ids: Vec<String> = ordered.into_iter().map(|e| e.id.clone()).collect();
            Ok(DatasetSplit {
                train: ids[..train].to_vec(),
                validation: ids[train..train + validation].to_vec(),
                test: ids[train + validation..].to_vec(),
            })
        }
        SplitMode::File(path) => DatasetSplit::load(path, catalog),
    }
}

/// Per-cell AVS30 in m/s; 0 marks a cell without site data.
#[derive(Debug, Clone, PartialEq)]
pub struct Avs30Grid {
    spec: GridSpec,
    values: Vec<f64>,
}

impl Avs30Grid {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.n_cells() {
            return Err(Error::dim(spec.n_cells(), values.len()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidArgument(format!("AVS30 value {v} must be finite and >= 0")));
        }
        Ok(Avs30Grid { spec, values })
    }

    pub fn uniform(spec: GridSpec, avs30: f64) -> Result<Self> {
        Self::new(spec, vec![avs30; spec.n_cells()])
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        IntensityGrid::from_values(self.spec, self.values.clone())?.save_csv(path)
    }
}

/// Reads a pre-aggregated AVS30 raster (each cell already holds the minimum
/// non-zero source value inside it).
pub fn load_avs30(path: impl AsRef<Path>, spec: &GridSpec) -> Result<Avs30Grid> {
    let path = path.as_ref();
    let values = read_numeric_csv(std::fs::File::open(path)?, path, spec)?;
    Avs30Grid::new(*spec, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::CellIndex;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_tmp(contents: &str, ext: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn event(id: &str, time: &str, obs: Vec<(f64, f64, f64)>) -> HypocenterEvent {
        HypocenterEvent {
            id: id.into(),
            origin_time: parse_time(time).unwrap(),
            epicenter: GeoPoint { lat: 36.0, lon: 138.0 },
            depth_km: 10.0,
            magnitude_jma: 6.0,
            observations: obs
                .into_iter()
                .map(|(lat, lon, intensity)| Observation {
                    location: GeoPoint { lat, lon },
                    intensity,
                })
                .collect(),
        }
    }

    #[test]
    fn empty_file_is_empty_catalog() {
        let f = write_tmp("", ".jsonl");
        let c = load_catalog(f.path(), CatalogFormat::Jsonl, &LoadOptions::default()).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn single_record_fields_are_exact() {
        let line = r#"{"id":"kumamoto","time":"2016-04-14T12:26:00Z","lat":32.7,"lon":130.77666666666667,"depth_km":7.0,"mag":6.4,"obs":[[32.8,130.8,6.7],[33.1,131.2,4.4]]}"#;
        let f = write_tmp(&format!("{line}\n"), ".jsonl");
        let c = load_catalog(f.path(), CatalogFormat::Jsonl, &LoadOptions::default()).unwrap();
        assert_eq!(c.len(), 1);
        let e = &c.events[0];
        assert_eq!(e.id, "kumamoto");
        assert_eq!(e.epicenter.lon, 130.77666666666667);
        assert_eq!(e.depth_km, 7.0);
        assert_eq!(e.magnitude_jma, 6.4);
        assert_eq!(e.observations[1].intensity, 4.4);
        let mut out = Vec::new();
        write_catalog(&c.events, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().trim(), line);
    }

    #[test]
    fn malformed_depth_names_the_line() {
        let text = concat!(
            r#"{"id":"a","time":"2000-01-01T00:00:00Z","lat":35,"lon":135,"depth_km":10,"mag":5.5,"obs":[]}"#,
            "\n",
            r#"{"id":"b","time":"2000-01-02T00:00:00Z","lat":35,"lon":135,"depth_km":"deep","mag":5.5,"obs":[]}"#,
            "\n"
        );
        let f = write_tmp(text, ".jsonl");
        let err = load_catalog(f.path(), CatalogFormat::Jsonl, &LoadOptions::default()).unwrap_err();
        match &err {
            Error::Parse { line, .. } => assert_eq!(*line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains(":2:"));
    }

    #[test]
    fn negative_depth_is_rejected() {
        let f = write_tmp(
            r#"{"id":"a","time":"2000-01-01T00:00:00Z","lat":35,"lon":135,"depth_km":-1,"mag":5.5}"#,
            ".jsonl",
        );
        assert!(matches!(
            load_catalog(f.path(), CatalogFormat::Jsonl, &LoadOptions::default()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn duplicates_rejected_and_small_events_skipped() {
        let rec = |id: &str, mag: f64| {
            format!(r#"{{"id":"{id}","time":"2001-01-01T00:00:00Z","lat":35,"lon":135,"depth_km":10,"mag":{mag}}}"#)
        };
        let f = write_tmp(&format!("{}\n{}\n", rec("a", 5.1), rec("a", 5.2)), ".jsonl");
        assert!(matches!(
            load_catalog(f.path(), CatalogFormat::Jsonl, &LoadOptions::default()),
            Err(Error::DuplicateId { line: 2, .. })
        ));
        let f = write_tmp(&format!("{}\n{}\n", rec("a", 5.1), rec("b", 4.9)), ".jsonl");
        let c = load_catalog(f.path(), CatalogFormat::Jsonl, &LoadOptions::default()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.skipped, vec![Skipped { line: 2, id: "b".into(), magnitude: 4.9 }]);
    }

    #[test]
    fn events_are_time_sorted() {
        let text = [
            r#"{"id":"late","time":"2010-01-01T00:00:00Z","lat":35,"lon":135,"depth_km":10,"mag":5.5}"#,
            r#"{"id":"early","time":"1999-01-01T00:00:00Z","lat":35,"lon":135,"depth_km":10,"mag":5.5}"#,
        ]
        .join("\n");
        let f = write_tmp(&text, ".jsonl");
        let c = load_catalog(f.path(), CatalogFormat::Jsonl, &LoadOptions::default()).unwrap();
        let ids: Vec<_> = c.events.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["early", "late"]);
    }

    #[test]
    fn csv_format_matches_jsonl() {
        let csv = "id,time,lat,lon,depth_km,mag,obs\n\
                   e1,2004-10-23T08:56:00Z,37.29,138.87,13,6.8,37.3:138.9:6.7;37.5:139.0:5.2\n\
                   e2,2005-03-20T01:53:00Z,33.74,130.18,9,7.0,\n";
        let f = write_tmp(csv, ".csv");
        assert_eq!(CatalogFormat::from_path(f.path()), CatalogFormat::Csv);
        let c = load_catalog(f.path(), CatalogFormat::Csv, &LoadOptions::default()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.events[0].observations.len(), 2);
        assert_eq!(c.events[0].observations[1].intensity, 5.2);
        assert!(c.events[1].observations.is_empty());

        let bad = write_tmp("id,time,lat,lon,depth_km,mag,obs\ne1,2004-10-23T08:56:00Z,37.29,138.87,x,6.8,\n", ".csv");
        let err = load_catalog(bad.path(), CatalogFormat::Csv, &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn rasterize_takes_cell_maximum() {
        let spec = GridSpec::default();
        let e = event("x", "2000-01-01T00:00:00Z", vec![(38.0, 137.0, 3.1), (38.0, 137.0, 4.2), (20.0, 135.0, 6.0)]);
        let g: IntensityGrid = rasterize(&e, &spec);
        let cell = point_to_cell(GeoPoint { lat: 38.0, lon: 137.0 }, &spec).unwrap();
        assert_eq!(g.get(cell), 4.2);
        assert_eq!(g.values().iter().filter(|v| **v != 0.0).count(), 1);

        let empty = event("y", "2000-01-01T00:00:00Z", vec![]);
        assert!(rasterize::<f64>(&empty, &spec).values().iter().all(|v| *v == 0.0));
        let outside = event("z", "2000-01-01T00:00:00Z", vec![(20.0, 135.0, 5.0)]);
        assert!(rasterize::<f32>(&outside, &spec).values().iter().all(|v| *v == 0.0));
        assert_eq!(g.get(CellIndex::new(0, 0)), 0.0);
    }

    fn toy_catalog(n: usize) -> Catalog {
        Catalog {
            events: (0..n)
                .map(|i| event(&format!("ev{i}"), &format!("20{:02}-01-01T00:00:00Z", i), vec![]))
                .collect(),
            skipped: vec![],
        }
    }

    #[test]
    fn chronological_split_orders_by_time() {
        let mut c = toy_catalog(10);
        c.events.reverse();
        let s = make_split(&c, &SplitMode::Chronological { train: 6, validation: 2, test: 2 }).unwrap();
        assert_eq!(s.train, (0..6).map(|i| format!("ev{i}")).collect::<Vec<_>>());
        assert_eq!(s.validation, ["ev6", "ev7"]);
        assert_eq!(s.test, ["ev8", "ev9"]);
        assert!(matches!(
            make_split(&c, &SplitMode::Chronological { train: 6, validation: 2, test: 1 }),
            Err(Error::SplitSize { .. })
        ));
    }

    #[test]
    fn split_file_round_trip() {
        let c = toy_catalog(5);
        let s = make_split(&c, &SplitMode::Chronological { train: 3, validation: 1, test: 1 }).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        s.save(f.path()).unwrap();
        let back = make_split(&c, &SplitMode::File(f.path().to_path_buf())).unwrap();
        assert_eq!(back, s);

        let bad = write_tmp("[train]\nev0\nnope\n[validation]\n[test]\n", ".txt");
        assert!(matches!(DatasetSplit::load(bad.path(), &c), Err(Error::UnknownId(id)) if id == "nope"));
        let dup = write_tmp("[train]\nev0\n[test]\nev0\n", ".txt");
        assert!(DatasetSplit::load(dup.path(), &c).is_err());
    }

    #[test]
    fn avs30_loading() {
        let spec = GridSpec::square(3).unwrap();
        let f = write_tmp("600,600,600\n600,0,600\n600,600,600\n", ".csv");
        let g = load_avs30(f.path(), &spec).unwrap();
        assert_eq!(g.values()[4], 0.0);
        assert_eq!(g.values().iter().filter(|v| **v == 600.0).count(), 8);

        let short = write_tmp("600,600,600\n600,600,600\n", ".csv");
        assert!(matches!(load_avs30(short.path(), &spec), Err(Error::Dimension { .. })));
        let neg = write_tmp("600,600,600\n600,-1,600\n600,600,600\n", ".csv");
        assert!(load_avs30(neg.path(), &spec).is_err());
    }

    #[test]
    fn avs30_63_rows_is_dimension_error() {
        let row = vec!["600"; 64].join(",");
        let f = write_tmp(&vec![row; 63].join("\n"), ".csv");
        assert!(matches!(load_avs30(f.path(), &GridSpec::default()), Err(Error::Dimension { .. })));
    }

    #[test]
    fn proportional_sizes() {
        assert_eq!(proportional_split_sizes(1857), REFERENCE_SPLIT_SIZES);
        assert_eq!(proportional_split_sizes(10), (8, 1, 1));
        assert_eq!(proportional_split_sizes(0), (0, 0, 0));
        for n in 0..300 {
            let (a, b, c) = proportional_split_sizes(n);
            assert_eq!(a + b + c, n);
        }
    }

    fn obs_strategy() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        proptest::collection::vec((29.0..47.0f64, 127.0..147.0f64, 0.0..7.0f64), 0..40)
    }

    proptest! {
        #[test]
        fn rasterize_is_permutation_invariant(obs in obs_strategy(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let spec = GridSpec::square(16).unwrap();
            let a = event("a", "2000-01-01T00:00:00Z", obs.clone());
            let mut shuffled = obs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = event("a", "2000-01-01T00:00:00Z", shuffled);
            let (ga, gb) = (rasterize::<f64>(&a, &spec), rasterize::<f64>(&b, &spec));
            prop_assert_eq!(ga.values(), gb.values());
            let top = obs.iter().map(|o| o.2).fold(0.0, f64::max);
            prop_assert!(ga.values().iter().all(|v| *v >= 0.0 && *v <= top));
        }

        #[test]
        fn catalog_round_trip(obs in obs_strategy(), depth in 0.0..700.0f64, mag in 5.0..9.0f64) {
            let mut e = event("rt", "2011-03-11T05:46:18Z", obs);
            e.depth_km = depth;
            e.magnitude_jma = mag;
            let f = tempfile::NamedTempFile::new().unwrap();
            save_catalog(std::slice::from_ref(&e), f.path()).unwrap();
            let back = load_catalog(f.path(), CatalogFormat::Jsonl, &LoadOptions::default()).unwrap();
            prop_assert_eq!(&back.events[0], &e);
        }
    }
}
