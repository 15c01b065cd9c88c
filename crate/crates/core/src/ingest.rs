//! File formats: histogram CSV, raw samples, and the quantile bundle.
//!
//! A bundle is a directory holding
//!
//! - `quantiles.csv`: header `t,<label 1>,...,<label n>`, one row per knot,
//!   every value in Rust's shortest round-trip decimal form;
//! - `manifest.json`: [`DatasetManifest`], including the SHA-256 of
//!   `quantiles.csv`.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::measures::{
    quantile_from_histogram, quantile_from_location_scale, quantile_from_samples, EmpiricalSample,
    GridConfig, Histogram, QuantileGrid,
};
use crate::{Error, Result};

pub const BUNDLE_VERSION: u32 = 1;
pub const QUANTILES_FILE: &str = "quantiles.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Accepted total-mass window before renormalization.
pub const MASS_WINDOW: (f64, f64) = (0.99, 1.01);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Histogram,
    Samples,
    Parametric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub label: String,
    /// Input path, or an inline description for parametric records.
    pub source: String,
    pub kind: RecordKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub grid: GridConfig,
    pub records: Vec<RecordMeta>,
    /// Seconds since the Unix epoch.
    pub created: u64,
    /// SHA-256 (hex) of `quantiles.csv`.
    pub checksum: String,
    /// SHA-256 (hex) over the raw inputs, when built by [`build_dataset`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_checksum: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistogramCsvOptions {
    /// Right edge used for an open last bin (`inf` or empty `bin_right`).
    pub cap: f64,
}

impl Default for HistogramCsvOptions {
    fn default() -> Self {
        HistogramCsvOptions { cap: 100.0 }
    }
}

/// Side information from [`load_histogram_csv_with`].
#[derive(Clone, Debug, PartialEq)]
pub struct HistogramLoad {
    pub histogram: Histogram,
    /// Sum of the masses as read.
    pub raw_total: f64,
    pub renormalized: bool,
    pub gaps_filled: usize,
}

pub fn load_histogram_csv(path: &Path) -> Result<Histogram> {
    load_histogram_csv_with(path, &HistogramCsvOptions::default()).map(|l| l.histogram)
}

/// Reads `bin_left,bin_right,mass` rows sorted by `bin_left`.
///
/// Gaps between bins become zero-mass bins; overlaps are errors. Totals in
/// [`MASS_WINDOW`] are renormalized to one, anything else is rejected.
pub fn load_histogram_csv_with(path: &Path, opts: &HistogramCsvOptions) -> Result<HistogramLoad> {
    let bytes = fs::read(path)?;
    parse_histogram_csv(&bytes, path, opts)
}

pub(crate) fn parse_histogram_csv(
    bytes: &[u8],
    path: &Path,
    opts: &HistogramCsvOptions,
) -> Result<HistogramLoad> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = rdr.headers()?.clone();
    let expected = ["bin_left", "bin_right", "mass"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(parse_err(
            path,
            format!("expected header bin_left,bin_right,mass, got {:?}", headers),
        ));
    }
    let mut rows: Vec<(f64, Option<f64>, f64)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != 3 {
            return Err(parse_err(path, format!("line {line}: expected 3 fields")));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| {
                parse_err(path, format!("line {line}: {what} {s:?} is not a number"))
            })?;
            if v.is_nan() {
                return Err(parse_err(path, format!("line {line}: {what} is NaN")));
            }
            Ok(v)
        };
        let left = num(&rec[0], "bin_left")?;
        let right = match rec[1].trim() {
            "" | "inf" | "+inf" | "Inf" => None,
            s => Some(num(s, "bin_right")?),
        };
        let mass = num(&rec[2], "mass")?;
        if !left.is_finite() || !mass.is_finite() || mass < 0.0 {
            return Err(parse_err(
                path,
                format!("line {line}: invalid bin_left or mass"),
            ));
        }
        rows.push((left, right, mass));
    }
    if rows.is_empty() {
        return Err(parse_err(path, "no bins"));
    }
    let last = rows.len() - 1;
    let mut edges = vec![rows[0].0];
    let mut weights = Vec::with_capacity(rows.len());
    let mut gaps_filled = 0;
    for (i, &(left, right, mass)) in rows.iter().enumerate() {
        let right = match right {
            Some(r) if r.is_finite() => r,
            _ if i == last => opts.cap,
            _ => {
                return Err(parse_err(
                    path,
                    format!("line {}: only the last bin may be open", i + 2),
                ))
            }
        };
        let prev = *edges.last().expect("nonempty");
        if left < prev {
            return Err(parse_err(
                path,
                format!(
                    "line {}: bin [{left}, {right}] overlaps the previous bin",
                    i + 2
                ),
            ));
        }
        if left > prev {
            edges.push(left);
            weights.push(0.0);
            gaps_filled += 1;
        }
        if !(right > left) {
            return Err(parse_err(
                path,
                format!("line {}: empty or reversed bin [{left}, {right}]", i + 2),
            ));
        }
        edges.push(right);
        weights.push(mass);
    }
    let raw_total: f64 = weights.iter().sum();
    if !(raw_total >= MASS_WINDOW.0 && raw_total <= MASS_WINDOW.1) {
        return Err(parse_err(
            path,
            format!("masses sum to {raw_total}, outside [0.99, 1.01]"),
        ));
    }
    let renormalized = (raw_total - 1.0).abs() > 1e-12;
    if renormalized {
        log::warn!(
            "{}: masses sum to {raw_total}; renormalizing",
            path.display()
        );
    }
    let histogram = Histogram::normalized(edges, weights)?;
    Ok(HistogramLoad {
        histogram,
        raw_total,
        renormalized,
        gaps_filled,
    })
}

/// One real per line; blank lines are skipped.
pub fn load_samples(path: &Path) -> Result<EmpiricalSample> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        let v: f64 = s
            .parse()
            .map_err(|_| parse_err(path, format!("line {}: {s:?} is not a number", i + 1)))?;
        if !v.is_finite() {
            return Err(parse_err(
                path,
                format!("line {}: non-finite value {s}", i + 1),
            ));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(parse_err(path, "no samples"));
    }
    EmpiricalSample::new(values)
}

fn now_secs() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Serializes the quantile table.
fn quantile_table(records: &[(String, QuantileGrid)]) -> Result<Vec<u8>> {
    let grid = records[0].1.grid();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend(records.iter().map(|(l, _)| l.clone()));
    w.write_record(&header)?;
    for (j, t) in grid.knots().iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(records.iter().map(|(_, q)| q.values()[j].to_string()));
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Bundle(e.to_string()))
}

/// Writes a bundle directory; returns its manifest.
pub fn save_quantile_bundle(
    dir: &Path,
    records: &[(String, QuantileGrid)],
    meta: Option<Vec<RecordMeta>>,
    input_checksum: Option<String>,
) -> Result<DatasetManifest> {
    let first = records.first().ok_or(Error::Empty("bundle records"))?;
    let grid = first.1.grid().clone();
    let mut seen = HashSet::new();
    for (label, q) in records {
        grid.check_same(q.grid())?;
        if !seen.insert(label.as_str()) {
            return Err(Error::Bundle(format!("duplicate label {label:?}")));
        }
        if label == "t" {
            return Err(Error::Bundle("label \"t\" is reserved".into()));
        }
    }
    let meta = match meta {
        Some(m) if m.len() == records.len() => m,
        Some(_) => return Err(Error::Bundle("metadata does not match records".into())),
        None => records
            .iter()
            .map(|(l, _)| RecordMeta {
                label: l.clone(),
                source: "inline".into(),
                kind: RecordKind::Parametric,
            })
            .collect(),
    };
    let table = quantile_table(records)?;
    let manifest = DatasetManifest {
        version: BUNDLE_VERSION,
        grid,
        records: meta,
        created: now_secs(),
        checksum: sha256_hex(&table),
        input_checksum,
    };
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join(QUANTILES_FILE), &table)?;
    write_atomic(
        &dir.join(MANIFEST_FILE),
        &serde_json::to_vec_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bundle {
    pub manifest: DatasetManifest,
    pub labels: Vec<String>,
    pub measures: Vec<QuantileGrid>,
}

impl Bundle {
    pub fn get(&self, label: &str) -> Option<&QuantileGrid> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| &self.measures[i])
    }
}

pub fn load_quantile_bundle(dir: &Path) -> Result<Bundle> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut manifest: DatasetManifest = serde_json::from_slice(&fs::read(&manifest_path)?)?;
    if manifest.version != BUNDLE_VERSION {
        return Err(Error::Bundle(format!(
            "bundle version {} not supported (expected {BUNDLE_VERSION})",
            manifest.version
        )));
    }
    manifest.grid = manifest.grid.validated()?;
    let table_path = dir.join(QUANTILES_FILE);
    let table = fs::read(&table_path)?;
    if sha256_hex(&table) != manifest.checksum {
        return Err(Error::Bundle(format!(
            "checksum mismatch for {}",
            table_path.display()
        )));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(table.as_slice());
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("t") {
        return Err(Error::Bundle("first column must be t".into()));
    }
    let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let meta_labels: Vec<&str> = manifest.records.iter().map(|r| r.label.as_str()).collect();
    if labels
        .iter()
        .map(String::as_str)
        .ne(meta_labels.iter().copied())
    {
        return Err(Error::Bundle(
            "manifest labels do not match the quantile table".into(),
        ));
    }
    let grid = manifest.grid.clone();
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.m()); labels.len()];
    for (j, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let t: f64 = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Bundle(format!("row {}: bad knot", j + 1)))?;
        if j >= grid.m() || t.to_bits() != grid.knots()[j].to_bits() {
            return Err(Error::Bundle(format!(
                "row {}: knot {t} does not match the manifest grid",
                j + 1
            )));
        }
        for (c, col) in cols.iter_mut().enumerate() {
            match rec.get(c + 1).map(str::trim) {
                Some(s) if !s.is_empty() => col.push(
                    s.parse()
                        .map_err(|_| Error::Bundle(format!("row {}: bad value {s:?}", j + 1)))?,
                ),
                _ => {}
            }
        }
    }
    let mut measures = Vec::with_capacity(labels.len());
    for (label, col) in labels.iter().zip(cols) {
        if col.len() != grid.m() {
            return Err(Error::Bundle(format!(
                "record {label:?} has {} values, grid has m = {}",
                col.len(),
                grid.m()
            )));
        }
        measures.push(QuantileGrid::new(grid.clone(), col)?);
    }
    Ok(Bundle {
        manifest,
        labels,
        measures,
    })
}

/// Parametric families available to input manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Parametric {
    /// `N(b, a²)`.
    Normal { a: f64, b: f64 },
    /// Standard Gaussian truncated to `[-c, c]`, then `x -> a x + b`.
    TruncatedNormal { a: f64, b: f64, c: f64 },
    /// Uniform on `[b, b + a]`.
    Uniform { a: f64, b: f64 },
}

impl Parametric {
    pub fn quantiles(&self, grid: &GridConfig) -> Result<QuantileGrid> {
        match *self {
            Parametric::Normal { a, b } => {
                quantile_from_location_scale(&QuantileGrid::standard_normal(grid.clone())?, a, b)
            }
            Parametric::TruncatedNormal { a, b, c } => quantile_from_location_scale(
                &QuantileGrid::truncated_normal(grid.clone(), c)?,
                a,
                b,
            ),
            Parametric::Uniform { a, b } => {
                if !(a > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "uniform width {a} must be positive"
                    )));
                }
                QuantileGrid::from_inverse_cdf(grid.clone(), |t| b + a * t)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputSource {
    Histogram { path: PathBuf },
    Samples { path: PathBuf },
    Parametric(Parametric),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub label: String,
    #[serde(flatten)]
    pub source: InputSource,
}

/// JSON description of a dataset to ingest.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InputManifest {
    #[serde(default)]
    pub records: Vec<InputRecord>,
    /// Right edge for open last histogram bins.
    #[serde(default)]
    pub cap: Option<f64>,
}

/// Quantile grids and source metadata for every record of an input manifest.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub records: Vec<(String, QuantileGrid)>,
    pub meta: Vec<RecordMeta>,
    pub input_checksum: String,
}

impl Dataset {
    pub fn measures(&self) -> Vec<QuantileGrid> {
        self.records.iter().map(|(_, q)| q.clone()).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.records.iter().map(|(l, _)| l.clone()).collect()
    }
}

/// Resolves every record of `input` onto `grid`; relative paths are taken
/// from `base_dir`.
pub fn build_dataset(input: &InputManifest, grid: &GridConfig, base_dir: &Path) -> Result<Dataset> {
    if input.records.is_empty() {
        return Err(Error::Empty("no records"));
    }
    let hopts = HistogramCsvOptions {
        cap: input.cap.unwrap_or(HistogramCsvOptions::default().cap),
    };
    let mut hasher = Sha256::new();
    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(input.records.len());
    let mut meta = Vec::with_capacity(input.records.len());
    for rec in &input.records {
        if !seen.insert(rec.label.clone()) {
            return Err(Error::Bundle(format!("duplicate label {:?}", rec.label)));
        }
        hasher.update(rec.label.as_bytes());
        let (q, source, kind) = match &rec.source {
            InputSource::Histogram { path } => {
                let p = base_dir.join(path);
                let bytes = fs::read(&p)?;
                hasher.update(&bytes);
                let h = parse_histogram_csv(&bytes, &p, &hopts)?.histogram;
                (
                    quantile_from_histogram(&h, grid)?,
                    path.display().to_string(),
                    RecordKind::Histogram,
                )
            }
            InputSource::Samples { path } => {
                let p = base_dir.join(path);
                hasher.update(fs::read(&p)?);
                let s = load_samples(&p)?;
                (
                    quantile_from_samples(&s, grid)?,
                    path.display().to_string(),
                    RecordKind::Samples,
                )
            }
            InputSource::Parametric(par) => {
                let desc = serde_json::to_string(par)?;
                hasher.update(desc.as_bytes());
                (par.quantiles(grid)?, desc, RecordKind::Parametric)
            }
        };
        records.push((rec.label.clone(), q));
        meta.push(RecordMeta {
            label: rec.label.clone(),
            source,
            kind,
        });
    }
    Ok(Dataset {
        records,
        meta,
        input_checksum: hex::encode(hasher.finalize()),
    })
}

/// Age-pyramid-like histograms: one-year bins on `[0, 85]` plus `[85, cap]`,
/// densities `exp(-r x) / (1 + exp((x - L) / 5))` with decay `r` falling and
/// life expectancy `L` rising across the records.
pub fn synthetic_pyramids(count: usize, cap: f64, seed: u64) -> Result<Vec<(String, Histogram)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<f64> = (0..=85).map(f64::from).collect();
    edges.push(cap);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let s = if count > 1 {
            i as f64 / (count - 1) as f64
        } else {
            0.5
        };
        let r = 0.04 * (1.0 - s) + 0.002 * rng.random::<f64>();
        let life = 55.0 + 25.0 * s + 4.0 * (rng.random::<f64>() - 0.5);
        let weights: Vec<f64> = edges
            .windows(2)
            .map(|e| {
                let mid = 0.5 * (e[0] + e[1]);
                (-r * mid).exp() / (1.0 + ((mid - life) / 5.0).exp()) * (e[1] - e[0])
            })
            .collect();
        out.push((
            format!("pyramid_{i:02}"),
            Histogram::normalized(edges.clone(), weights)?,
        ));
    }
    Ok(out)
}

/// Writes a histogram as `bin_left,bin_right,mass`.
pub fn histogram_csv(h: &Histogram) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bin_left", "bin_right", "mass"])?;
    for (e, p) in h.edges().windows(2).zip(h.masses()) {
        w.write_record([e[0].to_string(), e[1].to_string(), p.to_string()])?;
    }
    w.into_inner().map_err(|e| Error::Bundle(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<HistogramLoad> {
        parse_histogram_csv(
            s.as_bytes(),
            Path::new("mem.csv"),
            &HistogramCsvOptions::default(),
        )
    }

    #[test]
    fn single_bin() {
        let l = parse("bin_left,bin_right,mass\n0,1,1.0\n").unwrap();
        assert_eq!(l.histogram.edges(), &[0.0, 1.0]);
        assert!(!l.renormalized);
    }

    #[test]
    fn renormalizes_inside_window() {
        let l = parse("bin_left,bin_right,mass\n0,1,0.5\n1,2,0.495\n").unwrap();
        assert!(l.renormalized);
        let s: f64 = l.histogram.masses().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(parse("bin_left,bin_right,mass\n0,1,0.5\n1,2,0.4\n").is_err());
    }

    #[test]
    fn open_last_bin_and_gaps() {
        let l = parse("bin_left,bin_right,mass\n0,1,0.5\n2,3,0.25\n85,,0.25\n").unwrap();
        assert_eq!(l.histogram.edges(), &[0.0, 1.0, 2.0, 3.0, 85.0, 100.0]);
        assert_eq!(l.gaps_filled, 2);
        assert!(parse("bin_left,bin_right,mass\n0,,0.5\n1,2,0.5\n").is_err());
    }

    #[test]
    fn malformed_rows() {
        assert!(parse("left,right,mass\n0,1,1\n").is_err());
        assert!(parse("bin_left,bin_right,mass\n0,1,abc\n").is_err());
        assert!(parse("bin_left,bin_right,mass\n0,2,0.5\n1,3,0.5\n").is_err());
        assert!(parse("bin_left,bin_right,mass\n0,1,-0.5\n1,2,1.5\n").is_err());
        assert!(parse("bin_left,bin_right,mass\n").is_err());
    }

    #[test]
    fn samples_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.txt");
        fs::write(&p, "1.0\n2.0\n").unwrap();
        assert_eq!(load_samples(&p).unwrap().values(), &[1.0, 2.0]);
        fs::write(&p, "1.0\nnan\n").unwrap();
        assert!(load_samples(&p).is_err());
        fs::write(&p, "\n").unwrap();
        assert!(load_samples(&p).is_err());
        fs::write(&p, "1.0\nx\n").unwrap();
        assert!(load_samples(&p).is_err());
    }

    #[test]
    fn synthetic_pyramids_are_valid() {
        let p = synthetic_pyramids(20, 100.0, 1).unwrap();
        assert_eq!(p.len(), 20);
        assert_eq!(p[0].1.edges().len(), 87);
        let again = synthetic_pyramids(20, 100.0, 1).unwrap();
        assert_eq!(p, again);
    }
}
