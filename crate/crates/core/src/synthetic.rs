//! Seeded synthetic catalogs for tests, demos and the acceptance suite.
//!
//! Events are drawn uniformly inside the grid window. A fixed station
//! network (also seeded) records the attenuation-relation intensity plus
//! uniform noise; readings below 0.5 are dropped as unfelt.

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, HypocenterEvent, Observation};
use crate::geo::{GeoPoint, GridSpec};
use crate::gmpe::{mw_from_mjma, site_intensity, GmpeConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_events: usize,
    pub seed: u64,
    pub n_stations: usize,
    pub min_magnitude: f64,
    pub max_magnitude: f64,
    pub max_depth_km: f64,
    /// Half-width of the uniform noise added to each reading.
    pub noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_events: 100,
            seed: 0,
            n_stations: 400,
            min_magnitude: 5.0,
            max_magnitude: 7.5,
            max_depth_km: 100.0,
            noise: 0.3,
        }
    }
}

struct Station {
    location: GeoPoint,
    avs30: f64,
}

fn random_point(rng: &mut ChaCha8Rng, spec: &GridSpec) -> GeoPoint {
    let lat = rng.gen_range(spec.lat_min..spec.lat_max);
    let lon = rng.gen_range(spec.lon_min..spec.lon_max);
    GeoPoint { lat, lon }
}

pub fn synthetic_catalog(cfg: &SyntheticConfig, spec: &GridSpec) -> Catalog {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let stations: Vec<Station> = (0..cfg.n_stations)
        .map(|_| Station {
            location: random_point(&mut rng, spec),
            avs30: rng.gen_range(150.0..900.0),
        })
        .collect();
    let gmpe = GmpeConfig::default();
    let start = Utc.with_ymd_and_hms(2000, 1, 1, 0, 0, 0).unwrap();
    let mut time = start;
    let events = (0..cfg.n_events)
        .map(|i| {
            time += Duration::seconds(rng.gen_range(3_600..30 * 86_400));
            let epicenter = random_point(&mut rng, spec);
            let depth_km = if rng.gen_bool(0.7) {
                rng.gen_range(0.0..30.0_f64.min(cfg.max_depth_km))
            } else {
                rng.gen_range(0.0..cfg.max_depth_km)
            };
            // Squared uniform skews toward small events.
            let u: f64 = rng.gen();
            let magnitude_jma = cfg.min_magnitude + (cfg.max_magnitude - cfg.min_magnitude) * u * u;
            let mw = mw_from_mjma(magnitude_jma);
            let observations = stations
                .iter()
                .filter_map(|s| {
                    let noise = if cfg.noise > 0.0 { rng.gen_range(-cfg.noise..cfg.noise) } else { 0.0 };
                    let i = site_intensity(epicenter, depth_km, mw, s.location, s.avs30, &gmpe).ok()? + noise;
                    (i >= 0.5).then(|| Observation { location: s.location, intensity: (i * 10.0).round() / 10.0 })
                })
                .collect();
            HypocenterEvent {
                id: format!("syn{:05}", i + 1),
                origin_time: time,
                epicenter,
                depth_km: (depth_km * 10.0).round() / 10.0,
                magnitude_jma: (magnitude_jma * 10.0).round() / 10.0,
                observations,
            }
        })
        .collect();
    Catalog { events, skipped: Vec::new() }
}
