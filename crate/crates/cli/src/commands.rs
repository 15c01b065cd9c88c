use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;
use wgpca::cpca::{self, check_pca_sufficiency, HilbertPoint, PrincipalComponents};
use wgpca::geometry::{frechet_mean, geodesic_point, log_map};
use wgpca::gpca::{
    consistency_experiment, fpca_fit, gpca_fit, is_valid_quantile, mode_of_variation,
    ConsistencyConfig, FpcaInput, FunctionalComponents, GeodesicComponents, GpcaOptions,
    LocationScaleSampler, Method,
};
use wgpca::ingest::{
    self, build_dataset, load_quantile_bundle, sha256_hex, InputManifest, MANIFEST_FILE,
    QUANTILES_FILE,
};
use wgpca::measures::wasserstein_distance;
use wgpca::{GridConfig, QuantileGrid};

use crate::config::RunConfig;
use crate::error::{classify, CliError};
use crate::output::{num, tau_tag, FileDigest, OutputDir, Table};

/// Measures of a run together with what they were read from.
pub struct Loaded {
    pub labels: Vec<String>,
    pub measures: Vec<QuantileGrid>,
    pub inputs: Vec<FileDigest>,
    pub dataset_checksum: String,
}

fn digest(path: &Path, bytes: &[u8]) -> FileDigest {
    FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(bytes),
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

/// Reads either a bundle directory written by `ingest` or an input
/// manifest (JSON). A bundle fixes the grid; `grid_explicit` says whether
/// the user asked for a particular one.
pub fn load_input(
    path: &Path,
    cfg: &mut RunConfig,
    grid_explicit: bool,
) -> Result<Loaded, CliError> {
    if path.is_dir() {
        let bundle = load_quantile_bundle(path).map_err(CliError::Input)?;
        let grid = &bundle.manifest.grid;
        let (lo, hi) = grid.omega();
        if grid_explicit && (grid.m() != cfg.grid || lo != cfg.omega.lo || hi != cfg.omega.hi) {
            return Err(CliError::Usage(format!(
                "bundle {} has m = {} on [{lo}, {hi}], which differs from the requested grid",
                path.display(),
                grid.m()
            )));
        }
        cfg.grid = grid.m();
        cfg.omega.lo = lo;
        cfg.omega.hi = hi;
        let inputs = [MANIFEST_FILE, QUANTILES_FILE]
            .iter()
            .map(|f| {
                let p = path.join(f);
                read_input(&p).map(|b| digest(&p, &b))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if bundle.labels.is_empty() {
            return Err(CliError::Input(wgpca::Error::Empty("no records")));
        }
        return Ok(Loaded {
            labels: bundle.labels,
            measures: bundle.measures,
            inputs,
            dataset_checksum: bundle.manifest.checksum,
        });
    }
    let (dataset, input) = build_from_manifest(path, &cfg.grid_config()?)?;
    Ok(Loaded {
        labels: dataset.labels(),
        measures: dataset.measures(),
        inputs: vec![input],
        dataset_checksum: dataset.input_checksum,
    })
}

fn build_from_manifest(
    path: &Path,
    grid: &GridConfig,
) -> Result<(ingest::Dataset, FileDigest), CliError> {
    let bytes = read_input(path)?;
    let manifest: InputManifest = serde_json::from_slice(&bytes).map_err(|e| {
        CliError::Input(wgpca::Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let dataset = build_dataset(&manifest, grid, base).map_err(CliError::Input)?;
    Ok((dataset, digest(path, &bytes)))
}

pub fn ingest(path: &Path, cfg: &RunConfig, out: &mut OutputDir) -> Result<FileDigest, CliError> {
    let (dataset, input) = build_from_manifest(path, &cfg.grid_config()?)?;
    let manifest = ingest::save_quantile_bundle(
        out.path(),
        &dataset.records,
        Some(dataset.meta.clone()),
        Some(dataset.input_checksum.clone()),
    )
    .map_err(classify)?;
    for f in [QUANTILES_FILE, MANIFEST_FILE] {
        let bytes = fs::read(out.path().join(f)).map_err(|e| CliError::Output {
            path: f.into(),
            source: e.into(),
        })?;
        out.record(f, &bytes);
    }
    println!(
        "ingested {} records on m = {} into {}",
        manifest.records.len(),
        manifest.grid.m(),
        out.path().display()
    );
    Ok(input)
}

fn density_table(nu: &QuantileGrid, cells: usize) -> Result<Table, CliError> {
    let mut t = Table::new(&["x", "density"])?;
    let (lo, hi) = nu.support();
    if hi > lo {
        let c = nu.density_on(lo, hi, cells);
        for (x, f) in c.x.iter().zip(&c.f) {
            t.numeric_row(&[*x, *f])?;
        }
    } else {
        log::warn!("measure is a point mass at {lo}; density curve left empty");
    }
    Ok(t)
}

fn quantile_table(nu: &QuantileGrid) -> Result<Table, CliError> {
    let mut t = Table::new(&["t", "q"])?;
    for (tj, q) in nu.grid().knots().iter().zip(nu.values()) {
        t.numeric_row(&[*tj, *q])?;
    }
    Ok(t)
}

pub fn barycenter(data: &Loaded, cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let bary = frechet_mean(&data.measures).map_err(classify)?;
    out.write_csv("barycenter.csv", quantile_table(&bary)?)?;
    out.write_csv(
        "barycenter_density.csv",
        density_table(&bary, cfg.density_cells)?,
    )?;
    println!(
        "barycenter of {} records, mean {}",
        data.measures.len(),
        num(bary.mean())
    );
    Ok(())
}

fn gpca_options(cfg: &RunConfig, method: Method) -> GpcaOptions {
    let mut solver = cfg.solver.clone();
    solver.seed = cfg.seed;
    GpcaOptions {
        method,
        solver,
        reference: None,
    }
}

fn explained_table(pcs: &PrincipalComponents) -> Result<Table, CliError> {
    let mut t = Table::new(&[
        "component",
        "explained_ratio",
        "cumulative_ratio",
        "cumulative_cost",
    ])?;
    let mut cum = 0.0;
    for (j, r) in pcs.explained_ratios.iter().enumerate() {
        cum += r;
        t.row(&[
            (j + 1).to_string(),
            num(*r),
            num(cum),
            num(pcs.cumulative_costs[j]),
        ])?;
    }
    Ok(t)
}

fn scores_table(labels: &[String], scores: &[Vec<f64>], k: usize) -> Result<Table, CliError> {
    let mut header = vec!["label".to_string()];
    header.extend((1..=k).map(|j| format!("score_{j}")));
    let mut t = Table::new(&header)?;
    for (label, s) in labels.iter().zip(scores) {
        let mut row = vec![label.clone()];
        row.extend(s.iter().map(|x| num(*x)));
        t.row(&row)?;
    }
    Ok(t)
}

fn warn_notes(pcs: &PrincipalComponents, requested: usize) {
    if pcs.k() < requested {
        log::warn!(
            "data has rank {}; writing {} of {requested} components",
            pcs.k(),
            pcs.k()
        );
    }
    for note in &pcs.notes {
        log::info!("solver note: {note:?}");
    }
}

fn fit_geodesic(
    data: &Loaded,
    cfg: &RunConfig,
    method: Method,
) -> Result<GeodesicComponents, CliError> {
    let gc = gpca_fit(&data.measures, cfg.k, &gpca_options(cfg, method)).map_err(classify)?;
    warn_notes(&gc.pcs, cfg.k);
    Ok(gc)
}

fn fit_functional(data: &Loaded, cfg: &RunConfig) -> Result<FunctionalComponents, CliError> {
    let fc = fpca_fit(FpcaInput::Quantiles(&data.measures), cfg.k).map_err(classify)?;
    warn_notes(&fc.pcs, cfg.k);
    Ok(fc)
}

/// Whether PCA of the log-mapped data already stays admissible.
fn sufficiency_report(
    data: &Loaded,
    gc: &GeodesicComponents,
    cfg: &RunConfig,
) -> Result<String, CliError> {
    let logs = data
        .measures
        .iter()
        .map(|nu| log_map(&gc.frame, nu).map(|v| HilbertPoint::new(v.into_values())))
        .collect::<wgpca::Result<Vec<_>>>()
        .map_err(classify)?;
    let pca = cpca::standard_pca(&logs, &gc.pcs.reference, cfg.k).map_err(classify)?;
    let s = check_pca_sufficiency(
        &logs,
        &gc.pcs.reference,
        &pca.directions,
        &gc.frame.admissible_set(),
    );
    let mut text = format!(
        "pca sufficient: {}\nconstrained solution: {}\nviolators: {}\nrecord\tlabel\n",
        if s.holds { "yes" } else { "no" },
        if gc.pcs.constrained { "yes" } else { "no" },
        s.violators.len()
    );
    for i in &s.violators {
        // records are numbered from 1
        text.push_str(&format!("{}\t{}\n", i + 1, data.labels[*i]));
    }
    Ok(text)
}

#[derive(Serialize)]
struct ModeRow {
    component: usize,
    t_requested: f64,
    t_used: f64,
    clamped: bool,
    valid: bool,
}

pub fn gpca(data: &Loaded, cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    if cfg.method == Method::Fpca {
        return fpca_outputs(data, cfg, out);
    }
    let gc = fit_geodesic(data, cfg, cfg.method)?;
    let k = gc.k();
    let mut header = vec!["t".to_string(), "barycenter".to_string()];
    header.extend((1..=k).map(|j| format!("u{j}")));
    let mut comp = Table::new(&header)?;
    for (j, tj) in gc.barycenter.grid().knots().iter().enumerate() {
        let mut row = vec![*tj, gc.barycenter.values()[j]];
        row.extend(gc.pcs.directions.iter().map(|u| u[j]));
        comp.numeric_row(&row)?;
    }
    out.write_csv("components.csv", comp)?;
    out.write_csv("scores.csv", scores_table(&data.labels, &gc.pcs.scores, k)?)?;
    out.write_csv("explained.csv", explained_table(&gc.pcs)?)?;

    let mut modes = Table::new(&["component", "t_requested", "t_used", "clamped", "valid"])?;
    for j in 0..k {
        for &tau in &cfg.taus {
            let mp = mode_of_variation(&gc, j, tau).map_err(classify)?;
            if mp.clamped {
                log::warn!("mode {} at t = {tau} clamped to {}", j + 1, mp.t);
            }
            out.write_csv(
                &format!("mode_{}_t{}.csv", j + 1, tau_tag(tau)),
                density_table(&mp.measure, cfg.density_cells)?,
            )?;
            let r = ModeRow {
                component: j + 1,
                t_requested: tau,
                t_used: mp.t,
                clamped: mp.clamped,
                valid: is_valid_quantile(&mp.measure),
            };
            modes.row(&[
                r.component.to_string(),
                num(r.t_requested),
                num(r.t_used),
                r.clamped.to_string(),
                r.valid.to_string(),
            ])?;
        }
    }
    out.write_csv("modes.csv", modes)?;
    out.write(
        "sufficiency.txt",
        sufficiency_report(data, &gc, cfg)?.as_bytes(),
    )?;
    println!("explained: {}", percentages(&gc.pcs.explained_ratios));
    Ok(())
}

fn fpca_outputs(data: &Loaded, cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let fc = fit_functional(data, cfg)?;
    let k = fc.pcs.k();
    let mut header = vec!["x".to_string(), "mean".to_string()];
    header.extend((1..=k).map(|j| format!("w{j}")));
    let mut comp = Table::new(&header)?;
    for (i, x) in fc.x.iter().enumerate() {
        let mut row = vec![*x, fc.mean[i]];
        row.extend(fc.pcs.directions.iter().map(|w| w[i]));
        comp.numeric_row(&row)?;
    }
    out.write_csv("components.csv", comp)?;
    out.write_csv("scores.csv", scores_table(&data.labels, &fc.pcs.scores, k)?)?;
    out.write_csv("explained.csv", explained_table(&fc.pcs)?)?;
    for j in 0..k {
        for &tau in &cfg.taus {
            let g = fc.linear_mode(j, tau).map_err(classify)?;
            let mut t = Table::new(&["x", "density"])?;
            for (x, f) in fc.x.iter().zip(&g) {
                t.numeric_row(&[*x, *f])?;
            }
            out.write_csv(&format!("mode_{}_t{}.csv", j + 1, tau_tag(tau)), t)?;
        }
    }
    out.write(
        "sufficiency.txt",
        b"not applicable: method fpca is unconstrained\n",
    )?;
    println!("explained: {}", percentages(&fc.pcs.explained_ratios));
    Ok(())
}

fn percentages(r: &[f64]) -> String {
    r.iter()
        .map(|x| format!("{:.2}%", 100.0 * x))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn compare(data: &Loaded, cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let method = if cfg.method == Method::Fpca {
        log::warn!("compare always fits principal geodesics; using gpca-global against fpca");
        Method::GpcaGlobal
    } else {
        cfg.method
    };
    let gc = fit_geodesic(data, cfg, method)?;
    let fc = fit_functional(data, cfg)?;

    let mut gpca_modes_valid = true;
    for j in 0..gc.k() {
        for &tau in &cfg.taus {
            gpca_modes_valid &=
                is_valid_quantile(&mode_of_variation(&gc, j, tau).map_err(classify)?.measure);
        }
    }
    let mut linear_modes = Vec::new();
    for j in 0..fc.pcs.k() {
        for &tau in &cfg.taus {
            let g = fc.linear_mode(j, tau).map_err(classify)?;
            let min = g.iter().copied().fold(f64::INFINITY, f64::min);
            linear_modes.push(json!({
                "component": j + 1,
                "t": tau,
                "min_density": min,
                "negative": min < 0.0,
                "density": g,
            }));
        }
    }
    let report = json!({
        "labels": data.labels,
        "gpca": {
            "method": method,
            "explained_ratios": gc.pcs.explained_ratios,
            "scores": gc.pcs.scores,
            "modes_valid": gpca_modes_valid,
            "notes": gc.pcs.notes,
        },
        "fpca": {
            "explained_ratios": fc.pcs.explained_ratios,
            "scores": fc.pcs.scores,
            "x": fc.x,
            "linear_modes": linear_modes,
        },
    });
    out.write_json("compare.json", &report)?;
    println!("gpca explained: {}", percentages(&gc.pcs.explained_ratios));
    println!("fpca explained: {}", percentages(&fc.pcs.explained_ratios));
    Ok(())
}

pub fn geodesic(
    data: &Loaded,
    from: &str,
    to: &str,
    cfg: &RunConfig,
    out: &mut OutputDir,
) -> Result<(), CliError> {
    let find = |label: &str| {
        data.labels
            .iter()
            .position(|l| l == label)
            .map(|i| &data.measures[i])
            .ok_or_else(|| CliError::Usage(format!("no record labelled {label:?}")))
    };
    let (a, b) = (find(from)?, find(to)?);
    // one x-range for every step so the curves overlay
    let (alo, ahi) = a.support();
    let (blo, bhi) = b.support();
    let (lo, hi) = (alo.min(blo), ahi.max(bhi));
    let total = wasserstein_distance(a, b).map_err(classify)?;
    let mut quant = Table::new(&["t", "knot", "q"])?;
    let mut dens = Table::new(&["t", "x", "density"])?;
    let mut dist = Table::new(&["t", "d_from_start", "d_to_end"])?;
    for i in 0..=cfg.steps {
        let t = i as f64 / cfg.steps as f64;
        let g = geodesic_point(a, b, t).map_err(classify)?;
        for (tj, q) in g.grid().knots().iter().zip(g.values()) {
            quant.numeric_row(&[t, *tj, *q])?;
        }
        if hi > lo {
            let c = g.density_on(lo, hi, cfg.density_cells);
            for (x, f) in c.x.iter().zip(&c.f) {
                dens.numeric_row(&[t, *x, *f])?;
            }
        }
        let d0 = wasserstein_distance(a, &g).map_err(classify)?;
        let d1 = wasserstein_distance(&g, b).map_err(classify)?;
        dist.numeric_row(&[t, d0, d1])?;
    }
    out.write_csv("geodesic_quantiles.csv", quant)?;
    out.write_csv("geodesic_densities.csv", dens)?;
    out.write_csv("geodesic_distances.csv", dist)?;
    println!(
        "geodesic {from} -> {to}: d_W = {}, {} steps",
        num(total),
        cfg.steps
    );
    Ok(())
}

pub fn consistency(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    if !cfg.omega.is_compact() {
        return Err(CliError::Usage(
            "consistency needs a compact --omega, e.g. --omega=-10,10".into(),
        ));
    }
    let c = &cfg.consistency;
    let grid = cfg.grid_config()?;
    let base = QuantileGrid::truncated_normal(grid, c.truncation).map_err(classify)?;
    let sampler = LocationScaleSampler {
        base,
        scale: c.scale,
        shift: c.shift,
    };
    let mut solver = cfg.solver.clone();
    solver.seed = cfg.seed;
    let execution = solver.execution;
    // trials run in parallel, each fit serially
    solver.execution = wgpca::Execution::Serial;
    let ccfg = ConsistencyConfig {
        schedule: c.schedule.clone(),
        trials: c.trials,
        k: cfg.k,
        seed: cfg.seed,
        solver,
        execution,
    };
    let report = consistency_experiment(&sampler, &ccfg).map_err(classify)?;
    let mut t = Table::new(&["n", "median_barycenter_error", "median_cost"])?;
    for r in &report.rows {
        t.row(&[
            r.n.to_string(),
            num(r.median_barycenter_error),
            num(r.median_cost),
        ])?;
        println!(
            "n = {:>5}: median d_W to population barycenter {:.5}, median cost {:.5}",
            r.n, r.median_barycenter_error, r.median_cost
        );
    }
    out.write_csv("consistency.csv", t)?;
    out.write_json("consistency.json", &report)?;
    Ok(())
}
