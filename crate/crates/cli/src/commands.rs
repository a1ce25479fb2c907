use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shindo::catalog::{proportional_split_sizes, save_catalog};
use shindo::gmpe::predict_grid_gmpe;
use shindo::hybrid::combine;
use shindo::linmodel::{load_model, save_model, sweep_k, ClassWeighting, ModelParams};
use shindo::metrics::{collect_pairs, EvalReport, PairedClasses};
use shindo::render::save_ppm;
use shindo::synthetic::{synthetic_catalog, SyntheticConfig};
use shindo::{
    load_avs30, load_catalog, make_split, rasterize, Avs30Grid, Catalog, CatalogFormat, DatasetSplit,
    EncoderConfig, GeoPoint, GmpeConfig, GridSpec, HypocenterEvent, IntensityGrid, LoadOptions, ModelKind,
    Prediction, RenderOptions, Scalar, SplitMode, SplitPart, TrainConfig,
};

use crate::{
    Context, EvaluateArgs, GmpeArgs, GridArgs, HypocenterArgs, IngestArgs, PredictArgs, RenderArgs, SiteArgs,
    SynthArgs, TrainArgs,
};

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| anyhow!("missing required option --{flag}"))
}

impl GridArgs {
    fn spec(&self) -> Result<GridSpec> {
        Ok(GridSpec::new(
            self.rows,
            self.cols,
            (self.lat_min, self.lat_max),
            (self.lon_min, self.lon_max),
            self.projection.parse()?,
        )?)
    }
}

impl SiteArgs {
    fn gmpe_config(&self) -> Result<GmpeConfig> {
        Ok(GmpeConfig {
            distance_mode: self.distance.parse()?,
            amp_sigma: self.amp_sigma.parse()?,
        })
    }

    fn available(&self) -> bool {
        self.avs30.is_some() || self.uniform_avs30.is_some()
    }

    fn avs30(&self, spec: &GridSpec) -> Result<Avs30Grid> {
        match (&self.avs30, self.uniform_avs30) {
            (Some(_), Some(_)) => bail!("give either --avs30 or --uniform-avs30, not both"),
            (Some(path), None) => load_avs30(path, spec).with_context(|| format!("loading {}", path.display())),
            (None, Some(v)) => Ok(Avs30Grid::uniform(*spec, v)?),
            (None, None) => bail!("the baseline needs --avs30 or --uniform-avs30"),
        }
    }
}

/// Decimal degrees, or `deg:min` with the sign on the degrees.
pub fn parse_coord(s: &str) -> Result<f64> {
    let s = s.trim();
    let value = match s.split_once(':') {
        Some((d, m)) => {
            let deg: f64 = d.trim().parse().with_context(|| format!("bad degrees in `{s}`"))?;
            let min: f64 = m.trim().parse().with_context(|| format!("bad minutes in `{s}`"))?;
            if !(0.0..60.0).contains(&min) {
                bail!("minutes out of range in `{s}`");
            }
            let magnitude = deg.abs() + min / 60.0;
            if d.trim().starts_with('-') {
                -magnitude
            } else {
                magnitude
            }
        }
        None => s.parse().with_context(|| format!("bad coordinate `{s}`"))?,
    };
    if !value.is_finite() {
        bail!("bad coordinate `{s}`");
    }
    Ok(value)
}

impl HypocenterArgs {
    fn is_set(&self) -> bool {
        self.lat.is_some() || self.lon.is_some() || self.depth.is_some() || self.mag.is_some()
    }

    fn event(&self) -> Result<HypocenterEvent> {
        let lat = parse_coord(required(&self.lat, "lat")?)?;
        let lon = parse_coord(required(&self.lon, "lon")?)?;
        let depth = *required(&self.depth, "depth")?;
        let mag = *required(&self.mag, "mag")?;
        Ok(HypocenterEvent::point_source("query", GeoPoint::new(lat, lon)?, depth, mag)?)
    }
}

fn require_inside(event: &HypocenterEvent, spec: &GridSpec) -> Result<()> {
    if !spec.contains(event.epicenter) {
        return Err(shindo::Error::OutsideWindow { lat: event.epicenter.lat, lon: event.epicenter.lon }.into());
    }
    Ok(())
}

fn open_catalog(path: &Path) -> Result<Catalog> {
    load_catalog(path, CatalogFormat::from_path(path), &LoadOptions::default())
        .with_context(|| format!("loading catalog {}", path.display()))
}

fn open_split(path: &Option<PathBuf>, catalog: &Catalog) -> Result<DatasetSplit> {
    let mode = match path {
        Some(p) => SplitMode::File(p.clone()),
        None => {
            let (train, validation, test) = proportional_split_sizes(catalog.len());
            info!("no split file; chronological split {train}/{validation}/{test}");
            SplitMode::Chronological { train, validation, test }
        }
    };
    Ok(make_split(catalog, &mode)?)
}

fn open_model(path: &Path, kind: ModelKind) -> Result<ModelParams<f32>> {
    let params: ModelParams<f32> = load_model(path).with_context(|| format!("loading model {}", path.display()))?;
    if params.kind != kind {
        bail!("{} holds a {} model, expected {kind}", path.display(), params.kind);
    }
    Ok(params)
}

fn save_grid<T: Scalar>(grid: &IntensityGrid<T>, path: &Path) -> Result<()> {
    grid.save_csv(path).with_context(|| format!("writing {}", path.display()))
}

pub fn ingest(a: &IngestArgs, _ctx: &Context) -> Result<()> {
    let input = required(&a.input, "input")?;
    let format = match a.format.as_str() {
        "auto" => CatalogFormat::from_path(input),
        other => other.parse()?,
    };
    let catalog = load_catalog(input, format, &LoadOptions { min_magnitude: a.min_magnitude })?;
    for s in &catalog.skipped {
        warn!("line {}: event `{}` has M {} below {}, skipped", s.line, s.id, s.magnitude, a.min_magnitude);
    }
    println!("events: {}", catalog.len());
    if let (Some(first), Some(last)) = (catalog.events.first(), catalog.events.last()) {
        let (lo, hi) = catalog
            .events
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e.magnitude_jma), hi.max(e.magnitude_jma)));
        println!("magnitude: {lo} to {hi}");
        println!(
            "dates: {} to {}",
            first.origin_time.format("%Y-%m-%d"),
            last.origin_time.format("%Y-%m-%d")
        );
    }
    println!("skipped: {}", catalog.skipped.len());
    if let Some(out) = &a.output {
        save_catalog(&catalog.events, out).with_context(|| format!("writing {}", out.display()))?;
    }
    if let Some(out) = &a.split_out {
        let (train, validation, test) = match &a.split_sizes {
            Some(s) => parse_sizes(s)?,
            None => proportional_split_sizes(catalog.len()),
        };
        let split = make_split(&catalog, &SplitMode::Chronological { train, validation, test })?;
        split.save(out).with_context(|| format!("writing {}", out.display()))?;
        println!("split: {train} train, {validation} validation, {test} test");
    }
    Ok(())
}

fn parse_sizes(s: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts.as_slice() else {
        bail!("split sizes must be `train:validation:test`, got `{s}`");
    };
    Ok((a.trim().parse()?, b.trim().parse()?, c.trim().parse()?))
}

/// `start:end:step` with `end` inclusive.
pub fn parse_range(s: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = s.split(':').collect();
    let (start, end, step) = match parts.as_slice() {
        [a, b] => (a.parse::<usize>()?, b.parse::<usize>()?, 1),
        [a, b, c] => (a.parse::<usize>()?, b.parse::<usize>()?, c.parse::<usize>()?),
        _ => bail!("range must be `start:end[:step]`, got `{s}`"),
    };
    if step == 0 || start > end {
        bail!("empty range `{s}`");
    }
    Ok((start..=end).step_by(step).collect())
}

fn default_log_path(model: &Path) -> PathBuf {
    model.with_extension("log.csv")
}

fn train_config(a: &TrainArgs, ctx: &Context) -> Result<(ModelKind, EncoderConfig, TrainConfig)> {
    let kind: ModelKind = a.kind.parse()?;
    let encoder = EncoderConfig {
        k: a.k.unwrap_or(kind.default_k()),
        mag_transform: a.mag_transform.parse()?,
        mag_ref: a.mag_ref,
        depth_scale: a.depth_scale,
    };
    let cfg = TrainConfig {
        batch_size: a.batch_size,
        learning_rate: a.lr,
        epochs: a.epochs,
        seed: ctx.seed,
        class_weights: a.class_weights.parse::<ClassWeighting>()?,
        early_stop_patience: a.early_stop,
    };
    cfg.validate()?;
    Ok((kind, encoder, cfg))
}

fn train_model<T: Scalar>(a: &TrainArgs, ctx: &Context) -> Result<()> {
    let catalog = open_catalog(required(&a.catalog, "catalog")?)?;
    let split = open_split(&a.split, &catalog)?;
    let grid = a.grid.spec()?;
    let (kind, encoder, cfg) = train_config(a, ctx)?;

    if let Some(range) = &a.sweep_k {
        let ks = parse_range(range)?;
        let (points, best) = sweep_k::<T>(&catalog, &split, &grid, &encoder, &cfg, kind, &ks)?;
        println!("{:>4}  {:>8}", "k", "val_r");
        for p in &points {
            println!("{:>4}  {:>8}", p.k, fmt_metric(p.val_r));
        }
        match best {
            Some(k) => println!("best k: {k}"),
            None => println!("best k: undefined (no validation correlation)"),
        }
        if let Some(out) = &a.sweep_out {
            let mut w = BufWriter::new(File::create(out)?);
            writeln!(w, "k,val_r")?;
            for p in &points {
                writeln!(w, "{},{}", p.k, p.val_r.map(|v| v.to_string()).unwrap_or_default())?;
            }
            w.flush()?;
        }
        return Ok(());
    }

    let output = required(&a.output, "output")?;
    let (params, log) = shindo::linmodel::train::<T>(&catalog, &split, &grid, &encoder, &cfg, kind)?;
    save_model(&params, output).with_context(|| format!("writing {}", output.display()))?;
    let log_path = a.log.clone().unwrap_or_else(|| default_log_path(output));
    log.write_csv(BufWriter::new(File::create(&log_path)?))?;
    println!(
        "trained {kind} model (k = {}) for {} epochs; selected epoch {}; best validation r {}",
        encoder.k,
        log.records.len(),
        log.selected_epoch,
        fmt_metric(log.best_val_metric())
    );
    Ok(())
}

pub fn train(a: &TrainArgs, ctx: &Context) -> Result<()> {
    match a.precision.as_str() {
        "f32" => train_model::<f32>(a, ctx),
        "f64" => train_model::<f64>(a, ctx),
        other => bail!("unknown precision `{other}` (f32 or f64)"),
    }
}

fn predict_one(
    mode: &str,
    event: &HypocenterEvent,
    a: &PredictArgs,
) -> Result<IntensityGrid<f64>> {
    Ok(match mode {
        "regression" | "reg" => {
            let m = open_model(required(&a.model, "model")?, ModelKind::Regression)?;
            require_inside(event, &m.grid)?;
            m.predict_intensity(event)?.cast()
        }
        "classification" | "cls" => {
            let m = open_model(required(&a.model, "model")?, ModelKind::Classification)?;
            require_inside(event, &m.grid)?;
            m.predict_classes(event)?.to_intensity()
        }
        "hybrid" => {
            let reg = open_model(required(&a.reg_model, "reg-model")?, ModelKind::Regression)?;
            let cls = open_model(required(&a.cls_model, "cls-model")?, ModelKind::Classification)?;
            require_inside(event, &reg.grid)?;
            combine(&reg.predict_intensity(event)?, &cls.predict_classes(event)?)?.grid.cast()
        }
        "gmpe" => {
            let spec = a.grid.spec()?;
            require_inside(event, &spec)?;
            predict_grid_gmpe(event, &a.site.avs30(&spec)?, &a.site.gmpe_config()?)?
        }
        other => bail!("unknown prediction mode `{other}`"),
    })
}

pub fn predict(a: &PredictArgs, _ctx: &Context) -> Result<()> {
    let event = a.hypocenter.event()?;
    let grid = predict_one(&a.mode, &event, a)?;
    let output = required(&a.output, "output")?;
    save_grid(&grid, output)?;
    let peak = grid.argmax();
    println!(
        "max intensity {:.3} at cell ({}, {})",
        grid.max_value(),
        peak.row,
        peak.col
    );
    if let Some(img) = &a.render {
        let opts = RenderOptions { palette: a.palette.parse()?, block: a.block, epicenter: Some(event.epicenter) };
        save_ppm(&grid, &opts, img).with_context(|| format!("writing {}", img.display()))?;
    }
    Ok(())
}

pub fn gmpe(a: &GmpeArgs, _ctx: &Context) -> Result<()> {
    let spec = a.grid.spec()?;
    let event = match (&a.event, a.hypocenter.is_set()) {
        (Some(_), true) => bail!("give either --event or a hypocenter, not both"),
        (Some(id), false) => {
            let catalog = open_catalog(required(&a.catalog, "catalog")?)?;
            catalog
                .events
                .iter()
                .find(|e| &e.id == id)
                .cloned()
                .ok_or_else(|| anyhow!("event `{id}` not in catalog"))?
        }
        (None, _) => a.hypocenter.event()?,
    };
    require_inside(&event, &spec)?;
    let grid: IntensityGrid<f64> = predict_grid_gmpe(&event, &a.site.avs30(&spec)?, &a.site.gmpe_config()?)?;
    save_grid(&grid, required(&a.output, "output")?)?;
    println!("max intensity {:.3}", grid.max_value());
    Ok(())
}

const MODEL_ORDER: [&str; 4] = ["gmpe", "classification", "regression", "hybrid"];

fn fmt_metric(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}

pub fn evaluate(a: &EvaluateArgs, _ctx: &Context) -> Result<()> {
    let catalog = open_catalog(required(&a.catalog, "catalog")?)?;
    let split = open_split(&a.split, &catalog)?;
    let part: SplitPart = a.part.parse()?;
    let events = split.events(part, &catalog)?;
    if events.is_empty() {
        bail!("the {part} split is empty");
    }

    let reg = a.reg_model.as_deref().map(|p| open_model(p, ModelKind::Regression)).transpose()?;
    let cls = a.cls_model.as_deref().map(|p| open_model(p, ModelKind::Classification)).transpose()?;
    let spec = match (&reg, &cls) {
        (Some(r), Some(c)) if r.grid != c.grid => bail!("regression and classification models use different grids"),
        (Some(r), _) => r.grid,
        (None, Some(c)) => c.grid,
        (None, None) => a.grid.spec()?,
    };

    let models: Vec<String> = if a.self_test {
        vec!["ground-truth".into()]
    } else {
        match &a.models {
            Some(list) => list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            None => MODEL_ORDER
                .iter()
                .filter(|m| match **m {
                    "gmpe" => a.site.available(),
                    "classification" => cls.is_some(),
                    "regression" => reg.is_some(),
                    _ => reg.is_some() && cls.is_some(),
                })
                .map(|m| m.to_string())
                .collect(),
        }
    };
    if models.is_empty() {
        bail!("nothing to evaluate: give model files, --avs30/--uniform-avs30 or --self-test");
    }

    let avs30 = if models.iter().any(|m| m == "gmpe") { Some(a.site.avs30(&spec)?) } else { None };
    let gmpe_cfg = a.site.gmpe_config()?;
    let mut results: BTreeMap<usize, (String, EvalReport, PairedClasses)> = BTreeMap::new();
    for (order, name) in models.iter().enumerate() {
        let mut preds: HashMap<String, Prediction<f64>> = HashMap::with_capacity(events.len());
        for e in &events {
            let p = match name.as_str() {
                "ground-truth" => Prediction::Intensity(rasterize(e, &spec)),
                "gmpe" => Prediction::Intensity(predict_grid_gmpe(e, avs30.as_ref().unwrap(), &gmpe_cfg)?),
                "classification" => {
                    let m = cls.as_ref().ok_or_else(|| anyhow!("classification needs --cls-model"))?;
                    Prediction::Classes(m.predict_classes(e)?)
                }
                "regression" => {
                    let m = reg.as_ref().ok_or_else(|| anyhow!("regression needs --reg-model"))?;
                    Prediction::Intensity(m.predict_intensity(e)?.cast())
                }
                "hybrid" => {
                    let (r, c) = reg.as_ref().zip(cls.as_ref()).ok_or_else(|| anyhow!("hybrid needs --reg-model and --cls-model"))?;
                    Prediction::Intensity(combine(&r.predict_intensity(e)?, &c.predict_classes(e)?)?.grid.cast())
                }
                other => bail!("unknown model `{other}`"),
            };
            preds.insert(e.id.clone(), p);
        }
        let pairs = collect_pairs(&preds, &catalog, &split, part)?;
        let report = EvalReport::from_classes(&pairs.pred, &pairs.truth)?;
        results.insert(order, (name.clone(), report, pairs));
    }

    println!("{:<16}{:>10}{:>10}{:>10}", "model", "r", "F1", "MCC");
    for (name, r, _) in results.values() {
        println!(
            "{:<16}{:>10}{:>10}{:>10}",
            name,
            fmt_metric(r.pearson_r),
            fmt_metric(Some(r.f1_binary)),
            fmt_metric(r.mcc_multiclass)
        );
    }
    if let Some(path) = &a.report {
        let map: serde_json::Map<String, serde_json::Value> = results
            .values()
            .map(|(n, r, _)| Ok((n.clone(), serde_json::to_value(r)?)))
            .collect::<Result<_>>()?;
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, &map)?;
        writeln!(w)?;
        w.flush()?;
    }
    if let Some(path) = &a.dump_pairs {
        let single = results.len() == 1;
        for (name, _, pairs) in results.values() {
            let target = if single { path.clone() } else { pairs_path(path, name) };
            pairs.write_csv(BufWriter::new(File::create(&target)?))?;
        }
    }
    Ok(())
}

fn pairs_path(base: &Path, model: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "pairs".into());
    base.with_file_name(format!("{stem}.{model}.csv"))
}

pub fn render(a: &RenderArgs, _ctx: &Context) -> Result<()> {
    let spec = a.grid.spec()?;
    let input = required(&a.grid_file, "grid-file")?;
    let grid: IntensityGrid<f64> =
        IntensityGrid::load_csv(input, spec).with_context(|| format!("reading {}", input.display()))?;
    let epicenter = match &a.epicenter {
        Some(s) => {
            let (lat, lon) = s.split_once(',').ok_or_else(|| anyhow!("--epicenter must be `lat,lon`"))?;
            Some(GeoPoint::new(parse_coord(lat)?, parse_coord(lon)?)?)
        }
        None => None,
    };
    let opts = RenderOptions { palette: a.palette.parse()?, block: a.block, epicenter };
    let output = required(&a.output, "output")?;
    save_ppm(&grid, &opts, output).with_context(|| format!("writing {}", output.display()))?;
    Ok(())
}

pub fn synth(a: &SynthArgs, ctx: &Context) -> Result<()> {
    let spec = a.grid.spec()?;
    let cfg = SyntheticConfig { n_events: a.events, seed: ctx.seed, n_stations: a.stations, ..Default::default() };
    let catalog = synthetic_catalog(&cfg, &spec);
    let output = required(&a.output, "output")?;
    save_catalog(&catalog.events, output).with_context(|| format!("writing {}", output.display()))?;
    if let Some(out) = &a.avs30_out {
        // Independent stream so the catalog does not depend on this flag.
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 0x5A5A_5A5A);
        let values = (0..spec.n_cells()).map(|_| (rng.gen_range(150.0..900.0f64)).round()).collect();
        Avs30Grid::new(spec, values)?.save_csv(out)?;
    }
    if let Some(out) = &a.split_out {
        let (train, validation, test) = proportional_split_sizes(catalog.len());
        make_split(&catalog, &SplitMode::Chronological { train, validation, test })?.save(out)?;
    }
    println!("wrote {} synthetic events", catalog.len());
    Ok(())
}
