//! Geodesy and grid bookkeeping.
//!
//! Great-circle distance on a spherical Earth, the projection of a lat/lon
//! window onto an `n_rows x n_cols` cell grid, and conversion between
//! continuous instrumental intensity and the 10-step JMA scale.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// A point on the sphere, degrees north / degrees east.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint<T = f64> {
    pub lat: T,
    pub lon: T,
}

impl<T: Scalar> GeoPoint<T> {
    /// Builds a point, wrapping longitude into [-180, 180].
    pub fn new(lat: T, lon: T) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(Error::NonFinite(format!("coordinate ({lat}, {lon})")));
        }
        if lat.abs() > T::lit(90.0) {
            return Err(Error::InvalidArgument(format!("latitude {lat} outside [-90, 90]")));
        }
        Ok(GeoPoint {
            lat,
            lon: normalize_lon(lon),
        })
    }

    pub fn cast<U: Scalar>(self) -> GeoPoint<U> {
        GeoPoint {
            lat: U::lit(self.lat.as_f64()),
            lon: U::lit(self.lon.as_f64()),
        }
    }
}

fn normalize_lon<T: Scalar>(lon: T) -> T {
    let half = T::lit(180.0);
    if lon >= -half && lon <= half {
        return lon;
    }
    let full = T::lit(360.0);
    let wrapped = (lon + half) % full;
    let wrapped = if wrapped < T::zero() { wrapped + full } else { wrapped };
    wrapped - half
}

/// Great-circle distance in km (haversine formula, R = 6371 km).
pub fn haversine_km<T: Scalar>(a: GeoPoint<T>, b: GeoPoint<T>) -> T {
    let to_rad = T::lit(std::f64::consts::PI / 180.0);
    let two = T::lit(2.0);
    let (lat1, lat2) = (a.lat * to_rad, b.lat * to_rad);
    let dlat = (b.lat - a.lat) * to_rad / two;
    let dlon = (b.lon - a.lon) * to_rad / two;
    let h = dlat.sin().powi(2) + lat1.cos() * lat2.cos() * dlon.sin().powi(2);
    // rounding can push h a hair above 1 for antipodes
    let h = h.min(T::one());
    two * T::lit(EARTH_RADIUS_KM) * h.sqrt().asin()
}

/// How latitude bands are laid out across the rows of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    /// Equal steps of the Mercator ordinate `ln(tan(pi/4 + lat/2))`.
    #[default]
    Mercator,
    /// Equal steps of latitude in degrees.
    Equirectangular,
}

impl Projection {
    /// Forward ordinate for a latitude in degrees.
    pub fn y<T: Scalar>(self, lat_deg: T) -> T {
        match self {
            Projection::Mercator => mercator_y(lat_deg),
            Projection::Equirectangular => lat_deg,
        }
    }

    /// Inverse of [`Projection::y`], returning degrees.
    pub fn lat<T: Scalar>(self, y: T) -> T {
        match self {
            Projection::Mercator => inverse_mercator_y(y),
            Projection::Equirectangular => y,
        }
    }
}

impl fmt::Display for Projection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Projection::Mercator => "mercator",
            Projection::Equirectangular => "equirectangular",
        })
    }
}

impl FromStr for Projection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mercator" => Ok(Projection::Mercator),
            "equirectangular" => Ok(Projection::Equirectangular),
            other => Err(Error::InvalidArgument(format!("unknown projection `{other}`"))),
        }
    }
}

pub fn mercator_y<T: Scalar>(lat_deg: T) -> T {
    let quarter_pi = T::lit(std::f64::consts::FRAC_PI_4);
    let phi = lat_deg.to_radians();
    (quarter_pi + phi / T::lit(2.0)).tan().ln()
}

pub fn inverse_mercator_y<T: Scalar>(y: T) -> T {
    let half_pi = T::lit(std::f64::consts::FRAC_PI_2);
    (T::lit(2.0) * y.exp().atan() - half_pi).to_degrees()
}

/// Geographic window and its subdivision into cells.
///
/// Row 0 is the northernmost band, column 0 the westernmost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_rows: usize,
    pub n_cols: usize,
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub projection: Projection,
}

impl Default for GridSpec {
    /// 64x64 cells over 30 to 46°N, 128 to 146°E, Mercator bands.
    fn default() -> Self {
        GridSpec {
            n_rows: 64,
            n_cols: 64,
            lat_min: 30.0,
            lat_max: 46.0,
            lon_min: 128.0,
            lon_max: 146.0,
            projection: Projection::Mercator,
        }
    }
}

impl GridSpec {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        (lat_min, lat_max): (f64, f64),
        (lon_min, lon_max): (f64, f64),
        projection: Projection,
    ) -> Result<Self> {
        let spec = GridSpec {
            n_rows,
            n_cols,
            lat_min,
            lat_max,
            lon_min,
            lon_max,
            projection,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The default window divided into `n x n` cells.
    pub fn square(n: usize) -> Result<Self> {
        let spec = GridSpec {
            n_rows: n,
            n_cols: n,
            ..GridSpec::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rows == 0 || self.n_cols == 0 {
            return Err(Error::InvalidArgument("grid must have at least one row and column".into()));
        }
        let finite = [self.lat_min, self.lat_max, self.lon_min, self.lon_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.lat_min >= self.lat_max || self.lon_min >= self.lon_max {
            return Err(Error::InvalidArgument(format!(
                "degenerate window lat {}..{} lon {}..{}",
                self.lat_min, self.lat_max, self.lon_min, self.lon_max
            )));
        }
        if self.lat_min <= -90.0 || self.lat_max >= 90.0 {
            return Err(Error::InvalidArgument("window must exclude the poles".into()));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn cell_width_deg(&self) -> f64 {
        (self.lon_max - self.lon_min) / self.n_cols as f64
    }

    /// Row-major linear index of a cell.
    pub fn linear(&self, cell: CellIndex) -> usize {
        cell.row * self.n_cols + cell.col
    }

    pub fn cell_of_linear(&self, idx: usize) -> CellIndex {
        CellIndex {
            row: idx / self.n_cols,
            col: idx % self.n_cols,
        }
    }

    pub fn contains(&self, p: GeoPoint<f64>) -> bool {
        p.lat >= self.lat_min && p.lat <= self.lat_max && p.lon >= self.lon_min && p.lon <= self.lon_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub row: usize,
    pub col: usize,
}

impl CellIndex {
    pub fn new(row: usize, col: usize) -> Self {
        CellIndex { row, col }
    }
}

/// Index of the band containing `t in [0, 1]`, half-open with the top edge
/// clamped into the last band.
fn band(t: f64, n: usize) -> usize {
    let idx = (t * n as f64).floor();
    if idx < 0.0 {
        0
    } else {
        (idx as usize).min(n - 1)
    }
}

/// Maps a point to its cell, or `None` when it falls outside the window.
pub fn point_to_cell(p: GeoPoint<f64>, spec: &GridSpec) -> Option<CellIndex> {
    if !spec.contains(p) {
        return None;
    }
    let y_min = spec.projection.y(spec.lat_min);
    let y_max = spec.projection.y(spec.lat_max);
    let y = spec.projection.y(p.lat);
    // bands counted from the south; rows counted from the north
    let south_band = band((y - y_min) / (y_max - y_min), spec.n_rows);
    let col = band((p.lon - spec.lon_min) / (spec.lon_max - spec.lon_min), spec.n_cols);
    Some(CellIndex {
        row: spec.n_rows - 1 - south_band,
        col,
    })
}

/// Geographic centre of a cell: the inverse projection of the band midpoints.
pub fn cell_center(c: CellIndex, spec: &GridSpec) -> Result<GeoPoint<f64>> {
    if c.row >= spec.n_rows || c.col >= spec.n_cols {
        return Err(Error::IndexOutOfRange {
            row: c.row,
            col: c.col,
            n_rows: spec.n_rows,
            n_cols: spec.n_cols,
        });
    }
    let y_min = spec.projection.y(spec.lat_min);
    let y_max = spec.projection.y(spec.lat_max);
    let south_band = (spec.n_rows - 1 - c.row) as f64;
    let y = y_min + (south_band + 0.5) * (y_max - y_min) / spec.n_rows as f64;
    let lon = spec.lon_min + (c.col as f64 + 0.5) * spec.cell_width_deg();
    Ok(GeoPoint {
        lat: spec.projection.lat(y),
        lon,
    })
}

/// One step of the JMA seismic intensity scale: 0, 1, 2, 3, 4, 5-, 5+, 6-, 6+, 7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JmaClass(u8);

impl JmaClass {
    pub const COUNT: usize = 10;
    pub const ZERO: JmaClass = JmaClass(0);
    pub const SEVEN: JmaClass = JmaClass(9);

    const LABELS: [&'static str; 10] = ["0", "1", "2", "3", "4", "5-", "5+", "6-", "6+", "7"];

    /// Lower instrumental-intensity bound of classes 1..=9.
    const LOWER_BOUNDS: [f64; 9] = [0.5, 1.5, 2.5, 3.5, 4.5, 5.0, 5.5, 6.0, 6.5];

    /// Instrumental intensity chosen to stand for each class when a class
    /// has to be written back as a continuous grid (interval midpoints,
    /// 0 for class 0, 6.75 for class 7).
    const REPRESENTATIVE: [f64; 10] = [0.0, 1.0, 2.0, 3.0, 4.0, 4.75, 5.25, 5.75, 6.25, 6.75];

    pub fn from_ordinal(ordinal: usize) -> Option<Self> {
        (ordinal < Self::COUNT).then_some(JmaClass(ordinal as u8))
    }

    pub fn ordinal(self) -> usize {
        self.0 as usize
    }

    pub fn label(self) -> &'static str {
        Self::LABELS[self.ordinal()]
    }

    pub fn representative_intensity(self) -> f64 {
        Self::REPRESENTATIVE[self.ordinal()]
    }

    pub fn all() -> impl Iterator<Item = JmaClass> {
        (0..Self::COUNT as u8).map(JmaClass)
    }
}

impl fmt::Display for JmaClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Rounds an instrumental intensity to its JMA class.
///
/// Anything below 0.5, including negative regression outputs, is class 0.
pub fn intensity_to_class<T: Scalar>(i: T) -> Result<JmaClass> {
    if !i.is_finite() {
        return Err(Error::NonFinite(format!("intensity {i}")));
    }
    let i = i.as_f64();
    let ordinal = JmaClass::LOWER_BOUNDS.iter().take_while(|&&lo| i >= lo).count();
    Ok(JmaClass(ordinal as u8))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    /// Central angle from 3-D unit vectors and atan2; shares nothing with the
    /// haversine path.
    fn vector_great_circle_km(a: GeoPoint, b: GeoPoint) -> f64 {
        let unit = |p: GeoPoint| {
            let (la, lo) = (p.lat.to_radians(), p.lon.to_radians());
            [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
        };
        let (u, v) = (unit(a), unit(b));
        let cross = [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ];
        let sin = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
        let cos = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
        sin.atan2(cos) * EARTH_RADIUS_KM
    }

    #[test]
    fn haversine_identity_and_equator() {
        assert_eq!(haversine_km(pt(35.0, 135.0), pt(35.0, 135.0)), 0.0);
        let d = haversine_km(pt(0.0, 0.0), pt(0.0, 1.0));
        assert_abs_diff_eq!(d, EARTH_RADIUS_KM * std::f64::consts::PI / 180.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d, 111.195, epsilon = 0.001);
    }

    #[test]
    fn haversine_tokyo_osaka_against_vector_oracle() {
        let (tokyo, osaka) = (pt(35.6762, 139.6503), pt(34.6937, 135.5023));
        let oracle = vector_great_circle_km(tokyo, osaka);
        let d = haversine_km(tokyo, osaka);
        assert!((d - oracle).abs() / oracle < 1e-3, "{d} vs {oracle}");
        assert!((392.0..393.0).contains(&d), "{d}");
    }

    #[test]
    fn haversine_f32_tracks_f64() {
        let (a, b) = (pt(31.0, 129.5), pt(44.0, 145.0));
        let d64 = haversine_km(a, b);
        let d32 = haversine_km(a.cast::<f32>(), b.cast::<f32>());
        assert!((d32 as f64 - d64).abs() / d64 < 1e-5);
    }

    #[test]
    fn longitude_is_normalized() {
        assert_eq!(pt(0.0, 190.0).lon, -170.0);
        assert_eq!(pt(0.0, -181.0).lon, 179.0);
        assert_eq!(pt(0.0, 180.0).lon, 180.0);
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn corners_map_to_corner_cells() {
        let spec = GridSpec::default();
        assert_eq!(point_to_cell(pt(46.0, 128.0), &spec), Some(CellIndex::new(0, 0)));
        assert_eq!(point_to_cell(pt(30.0, 146.0), &spec), Some(CellIndex::new(63, 63)));
        assert_eq!(point_to_cell(pt(20.0, 135.0), &spec), None);
        assert_eq!(point_to_cell(pt(35.0, 146.01), &spec), None);
    }

    #[test]
    fn interior_point_matches_direct_band_formula() {
        // Mercator ordinate via asinh(tan(phi)), an identity independent of
        // the ln(tan(pi/4 + phi/2)) form used by the implementation.
        let y = |lat: f64| lat.to_radians().tan().asinh();
        let (y_lo, y_hi) = (y(30.0), y(46.0));
        let south_band = ((y(38.0) - y_lo) / (y_hi - y_lo) * 64.0).floor() as usize;
        let expected_row = 63 - south_band;
        let expected_col = ((137.0 - 128.0) / 18.0 * 64.0_f64).floor() as usize;
        assert_eq!(expected_col, 32);
        let got = point_to_cell(pt(38.0, 137.0), &GridSpec::default()).unwrap();
        assert_eq!(got, CellIndex::new(expected_row, expected_col));
        assert_eq!(got, CellIndex::new(33, 32));
    }

    #[test]
    fn equirectangular_rows_are_equal_degree_bands() {
        let spec = GridSpec {
            projection: Projection::Equirectangular,
            ..GridSpec::default()
        };
        // 0.25° per row; 38.0 is the lower edge of south band 32 -> row 31
        assert_eq!(point_to_cell(pt(38.0, 137.0), &spec).unwrap().row, 31);
        assert_abs_diff_eq!(cell_center(CellIndex::new(0, 0), &spec).unwrap().lat, 45.875);
    }

    #[test]
    fn cell_center_examples() {
        let spec = GridSpec::default();
        let c00 = cell_center(CellIndex::new(0, 0), &spec).unwrap();
        assert_eq!(c00.lon, 128.140625);
        let top_band_lo = inverse_mercator_y(mercator_y(46.0) - (mercator_y(46.0) - mercator_y(30.0)) / 64.0);
        assert!(c00.lat > top_band_lo && c00.lat < 46.0, "{}", c00.lat);
        let c63 = cell_center(CellIndex::new(63, 63), &spec).unwrap();
        assert_eq!(c63.lon, 145.859375);
        assert!(cell_center(CellIndex::new(64, 0), &spec).is_err());
    }

    #[test]
    fn every_cell_round_trips() {
        for projection in [Projection::Mercator, Projection::Equirectangular] {
            let spec = GridSpec {
                projection,
                ..GridSpec::default()
            };
            for idx in 0..spec.n_cells() {
                let c = spec.cell_of_linear(idx);
                let center = cell_center(c, &spec).unwrap();
                assert_eq!(point_to_cell(center, &spec), Some(c));
            }
        }
    }

    #[test]
    fn class_boundaries() {
        let cls = |v: f64| intensity_to_class(v).unwrap().ordinal();
        assert_eq!(cls(0.49), 0);
        assert_eq!(cls(-0.3), 0);
        assert_eq!(cls(0.5), 1);
        assert_eq!(cls(4.49), 4);
        assert_eq!(cls(4.5), 5);
        assert_eq!(cls(5.2), 6);
        assert_eq!(intensity_to_class(5.2).unwrap().label(), "5+");
        assert_eq!(cls(6.49), 8);
        assert_eq!(cls(6.5), 9);
        assert_eq!(cls(9.0), 9);
        assert!(intensity_to_class(f64::NAN).is_err());
        assert!(intensity_to_class(f32::INFINITY).is_err());
    }

    #[test]
    fn representative_intensity_round_trips() {
        for c in JmaClass::all() {
            assert_eq!(intensity_to_class(c.representative_intensity()).unwrap(), c);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(GridSpec::square(0).is_err());
        assert!(GridSpec::new(4, 4, (46.0, 30.0), (128.0, 146.0), Projection::Mercator).is_err());
        assert!(GridSpec::new(4, 4, (30.0, 46.0), (128.0, 146.0), Projection::Mercator).is_ok());
    }

    fn window_point() -> impl Strategy<Value = GeoPoint> {
        (30.0..=46.0f64, 128.0..=146.0f64).prop_map(|(lat, lon)| GeoPoint { lat, lon })
    }

    proptest! {
        #[test]
        fn haversine_symmetric(lat1 in -89.0..89.0f64, lon1 in -180.0..180.0f64,
                               lat2 in -89.0..89.0f64, lon2 in -180.0..180.0f64) {
            let (a, b) = (pt(lat1, lon1), pt(lat2, lon2));
            prop_assert_eq!(haversine_km(a, b), haversine_km(b, a));
            prop_assert!(haversine_km(a, b) >= 0.0);
        }

        #[test]
        fn haversine_triangle(a in window_point(), b in window_point(), c in window_point()) {
            prop_assert!(haversine_km(a, c) <= haversine_km(a, b) + haversine_km(b, c) + 1e-9);
        }

        #[test]
        fn window_points_always_land(p in window_point()) {
            let spec = GridSpec::default();
            let c = point_to_cell(p, &spec);
            prop_assert!(c.is_some());
            let c = c.unwrap();
            prop_assert!(c.row < 64 && c.col < 64);
        }

        #[test]
        fn class_is_monotone(mut xs in proptest::collection::vec(-2.0..9.0f64, 2..64)) {
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let classes: Vec<_> = xs.iter().map(|&x| intensity_to_class(x).unwrap()).collect();
            prop_assert!(classes.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
