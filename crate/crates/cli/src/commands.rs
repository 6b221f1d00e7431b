//! The eight batch commands. Every command is deterministic given
//! (config, seed): outputs are written in canonical key order and all
//! randomness flows through streams derived from the run seed.

use std::collections::BTreeMap;
use std::io::Write;


use anyhow::Result;

use enacull::features::{compute_features, write_feature_matrix, FeatureMatrix};
use enacull::forest::{fit_forest, sample_training_set, save_forest, Forest};
use enacull::fov::build_masks;
use enacull::model::{build_grid, ArcGrid, ArcLetter, EsaStep, Label, Observation, OrbitArcId};
use enacull::pipeline::{
    export_goodtimes, stage1, stage2, stage3, FovCellMask, GoodTimesList, LabelGrid,
    ProbabilityGrid,
};
use enacull::rates::{arc_rate_rows, exposure_group};
use enacull::skymap::{build_sky_map, percent_diff, render_pgm, write_sky_map, SkyMap};
use enacull::stats::{
    ccf_lags, confusion_metrics, ks_two_sample, lin_ccc, paired_t_test, summarize_map_tests,
    MapTestCell, MapTestTriple,
};
use enacull::tables::{
    ingest_observations, read_geometry, read_label_rows, read_rate_rows, write_exclusion_mask,
    write_geometry, write_label_rows, write_observations, write_rate_rows, write_truth_table,
    GeometryRow, IngestConfig, LabelRow, RateRow,
};
use enacull::Error;

use crate::config::{LabelSource, RunConfig};

fn not_found(msg: String) -> anyhow::Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, msg)).into()
}

fn load_grids(config: &RunConfig) -> Result<BTreeMap<OrbitArcId, ArcGrid>> {
    let path = config.observations_path();
    let observations = ingest_observations(&path, &IngestConfig::default())?;
    let mut by_arc: BTreeMap<OrbitArcId, Vec<Observation>> = BTreeMap::new();
    for obs in observations {
        by_arc.entry(obs.arc).or_default().push(obs);
    }
    by_arc
        .into_iter()
        .map(|(arc, rows)| Ok((arc, build_grid(&rows, arc)?)))
        .collect()
}

fn features_by_arc(grids: &BTreeMap<OrbitArcId, ArcGrid>) -> Result<BTreeMap<OrbitArcId, FeatureMatrix>> {
    grids
        .iter()
        .map(|(arc, grid)| Ok((*arc, compute_features(grid)?)))
        .collect()
}

fn pooled_features(per_arc: &BTreeMap<OrbitArcId, FeatureMatrix>) -> FeatureMatrix {
    let mut pool = FeatureMatrix::new();
    for matrix in per_arc.values() {
        pool.extend(matrix);
    }
    pool
}

/// Synthetic arc-to-pixel geometry: each arc observes one meridian pair,
/// consecutive arcs landing on consecutive meridians. Angle bins 0..29
/// climb latitude rows 0..29 on the near meridian; bins 30..59 descend
/// rows 29..0 on the opposite one.
fn synthetic_geometry(arcs: &[OrbitArcId]) -> Vec<GeometryRow> {
    let mut rows = Vec::new();
    for &arc in arcs {
        let swath = 2 * arc.orbit + matches!(arc.arc, ArcLetter::B) as u32;
        for bin in 0..60u8 {
            let (lat_row, lon_col) = if bin < 30 {
                (bin as u16, (swath % 60) as u16)
            } else {
                ((59 - bin) as u16, ((swath + 30) % 60) as u16)
            };
            rows.push(GeometryRow {
                arc,
                angle: enacull::model::AngleBin::new(bin).expect("bin < 60"),
                lat_row,
                lon_col,
            });
        }
    }
    rows
}

pub fn cmd_simulate(config: &RunConfig) -> Result<()> {
    config.sim.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;
    let mut observations = Vec::new();
    let mut arcs = Vec::new();
    for orbit in config.sim.orbits() {
        for arc in config.sim.arcs() {
            let sim_config = config.sim.arc_sim_config(config.seed, orbit, arc);
            let generated = enacull::sim::simulate_arc(&sim_config)?;
            observations.extend(generated.observations());
            arcs.push(OrbitArcId::new(orbit, arc));
        }
    }
    let obs_path = config.observations_path();
    write_observations(&obs_path, &observations)?;
    write_truth_table(&config.truth_path(), &observations)?;
    write_geometry(&config.geometry_path(), &synthetic_geometry(&arcs))?;
    println!(
        "simulate: wrote {} observations across {} arcs to {}",
        observations.len(),
        arcs.len(),
        obs_path.display()
    );
    Ok(())
}

pub fn cmd_fov(config: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&config.out_dir)?;
    let pointings = enacull::tables::read_pointing_log(&config.pointing_path())?;
    let ephemerides = enacull::tables::read_ephemerides(&config.ephemeris_path())?;
    let mask = build_masks(&pointings, &ephemerides, &config.fov, config.fov_time_range)?;
    let out = config.out_dir.join("fov_mask.csv");
    write_exclusion_mask(&out, &mask)?;
    println!(
        "fov: wrote {} samples x {} bodies to {}",
        mask.samples.len(),
        ephemerides.len(),
        out.display()
    );
    Ok(())
}

pub fn cmd_features(config: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&config.out_dir)?;
    let grids = load_grids(config)?;
    let per_arc = features_by_arc(&grids)?;
    let pool = pooled_features(&per_arc);
    let out = config.out_dir.join("features.csv");
    write_feature_matrix(&out, &pool)?;
    println!("features: wrote {} rows to {}", pool.len(), out.display());
    Ok(())
}

fn train_forest_for_orbit(
    config: &RunConfig,
    per_arc: &BTreeMap<OrbitArcId, FeatureMatrix>,
    orbit: u32,
) -> Result<Forest> {
    let pool = pooled_features(per_arc);
    let held_out = OrbitArcId::new(orbit, ArcLetter::A);
    let sample = sample_training_set(&pool, held_out, &config.train)?;
    Ok(fit_forest(&sample, &config.train)?)
}

pub fn cmd_train(config: &RunConfig, orbit: u32) -> Result<()> {
    std::fs::create_dir_all(&config.out_dir)?;
    let grids = load_grids(config)?;
    let per_arc = features_by_arc(&grids)?;
    let forest = train_forest_for_orbit(config, &per_arc, orbit)?;
    let path = config.forest_path(orbit);
    save_forest(&path, &forest)?;
    println!(
        "train: {} trees (mtry {}, min_leaf {}) for orbit {orbit} -> {}",
        forest.trees.len(),
        forest.config.mtry,
        forest.config.min_leaf,
        path.display()
    );
    Ok(())
}

fn label_rows_for_stage(
    grid: &ArcGrid,
    stage: u8,
    labels: &LabelGrid,
    stage1_prob: &ProbabilityGrid,
    stage2_prob: Option<&ProbabilityGrid>,
    threshold: f64,
) -> Vec<LabelRow> {
    let mut rows = Vec::new();
    for (epos, &esa) in grid.esa_steps().iter().enumerate() {
        for angle in 0..grid.angle_count() {
            for t in 0..grid.n_time() {
                let Some(p1) = stage1_prob.get(epos, angle, t) else {
                    continue;
                };
                let (label, probability) = match stage {
                    1 => (
                        if p1 >= threshold { Label::Good } else { Label::Bad },
                        p1,
                    ),
                    _ => {
                        let Some(label) = labels.get(epos, angle, t) else {
                            continue;
                        };
                        let p = stage2_prob.and_then(|g| g.get(epos, angle, t)).unwrap_or(p1);
                        (label, p)
                    }
                };
                rows.push(LabelRow {
                    esa,
                    angle: enacull::model::AngleBin::new(angle as u8).expect("angle < 60"),
                    time_index: t as u32,
                    stage,
                    label,
                    probability,
                });
            }
        }
    }
    rows
}

fn write_goodtimes_files(
    config: &RunConfig,
    arc: OrbitArcId,
    grid: &ArcGrid,
    list: &GoodTimesList,
) -> Result<()> {
    let path = config.goodtimes_path(arc.orbit, arc.arc);
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(w, "{}", enacull::tables::GOODTIMES_HEADER)?;
    for (epos, spans) in list.spans.iter().enumerate() {
        let esa = grid.esa_steps()[epos];
        for &(lo, hi) in spans {
            writeln!(w, "{esa},{lo},{hi}")?;
        }
    }
    w.flush()?;

    let path = config.goodtimes_exceptions_path(arc.orbit, arc.arc);
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(w, "{}", enacull::tables::EXCEPTIONS_HEADER)?;
    for &(epos, angle, t) in &list.exceptions {
        writeln!(w, "{},{angle},{t}", grid.esa_steps()[epos])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_cull(config: &RunConfig, orbit: u32) -> Result<()> {
    std::fs::create_dir_all(&config.out_dir)?;
    let grids = load_grids(config)?;
    let target_arcs: Vec<OrbitArcId> = grids.keys().filter(|a| a.orbit == orbit).copied().collect();
    if target_arcs.is_empty() {
        return Err(Error::Config(format!(
            "orbit {orbit} has no observations in {}",
            config.observations_path().display()
        ))
        .into());
    }
    let per_arc = features_by_arc(&grids)?;
    let forest = train_forest_for_orbit(config, &per_arc, orbit)?;
    save_forest(&config.forest_path(orbit), &forest)?;

    for arc in target_arcs {
        let grid = &grids[&arc];
        let features = &per_arc[&arc];
        let s1 = stage1(&forest, features, grid)?;
        let fov_mask = FovCellMask::from_grid(grid);
        let s2 = stage2(&s1, &fov_mask, &config.pipeline)?;
        let s3 = stage3(&s1, &s2, &config.pipeline)?;

        let threshold = config.pipeline.threshold;
        let stage1_rows = label_rows_for_stage(grid, 1, &s2.labels, &s1, None, threshold);
        write_label_rows(
            &config.stage_labels_path(arc.orbit, arc.arc, 1),
            &stage1_rows,
        )?;
        let stage2_rows = label_rows_for_stage(grid, 2, &s2.labels, &s1, Some(&s2.prob), threshold);
        write_label_rows(
            &config.stage_labels_path(arc.orbit, arc.arc, 2),
            &stage2_rows,
        )?;
        let stage3_rows = label_rows_for_stage(grid, 3, &s3, &s1, Some(&s2.prob), threshold);
        write_label_rows(
            &config.stage_labels_path(arc.orbit, arc.arc, 3),
            &stage3_rows,
        )?;

        let list = export_goodtimes(&s3);
        write_goodtimes_files(config, arc, grid, &list)?;
        println!(
            "cull: arc {arc}: {} cells, stage3 good {} ({} empty columns)",
            features.len(),
            s3.good_cells(),
            s2.empty_columns.len()
        );
    }
    Ok(())
}

/// Build the label grid an evaluation source refers to for one arc.
fn source_labels(
    config: &RunConfig,
    source: LabelSource,
    arc: OrbitArcId,
    grid: &ArcGrid,
) -> Result<LabelGrid> {
    match source {
        LabelSource::Sme | LabelSource::Truth => {
            let mut labels = LabelGrid::masked(
                arc,
                0,
                grid.esa_steps().to_vec(),
                grid.angle_count(),
                grid.n_time(),
            );
            let mut any = false;
            for e in 0..grid.esa_steps().len() {
                for a in 0..grid.angle_count() {
                    for t in 0..grid.n_time() {
                        let label = match source {
                            LabelSource::Sme => grid.sme_label(e, a, t),
                            _ => grid.truth_label(e, a, t),
                        };
                        if let Some(l) = label {
                            labels.set(e, a, t, l);
                            any = true;
                        }
                    }
                }
            }
            if !any {
                return Err(not_found(format!(
                    "no {} labels present in the observation table for arc {arc}",
                    source.as_str()
                )));
            }
            Ok(labels)
        }
        _ => {
            let stage = source.stage().expect("stage source");
            let path = config.stage_labels_path(arc.orbit, arc.arc, stage);
            if !path.exists() {
                return Err(not_found(format!(
                    "{} (run `cull --orbit {}` first)",
                    path.display(),
                    arc.orbit
                )));
            }
            let rows = read_label_rows(&path)?;
            let mut labels = LabelGrid::masked(
                arc,
                stage,
                grid.esa_steps().to_vec(),
                grid.angle_count(),
                grid.n_time(),
            );
            for row in rows {
                let epos = grid.esa_position(row.esa).ok_or_else(|| {
                    Error::Contract(format!(
                        "label file {} references ESA {} not in arc {arc}",
                        path.display(),
                        row.esa
                    ))
                })?;
                labels.set(epos, row.angle.index(), row.time_index as usize, row.label);
            }
            Ok(labels)
        }
    }
}

fn rates_for_source(
    config: &RunConfig,
    grids: &BTreeMap<OrbitArcId, ArcGrid>,
    source: LabelSource,
    orbit: Option<u32>,
) -> Result<Vec<RateRow>> {
    let mut rows = Vec::new();
    for (arc, grid) in grids {
        if let Some(filter) = orbit {
            if arc.orbit != filter {
                continue;
            }
        }
        let labels = source_labels(config, source, *arc, grid)?;
        rows.extend(arc_rate_rows(&labels, grid, config.isotropic_bg_override)?);
    }
    Ok(rows)
}

pub fn cmd_rates(config: &RunConfig, orbit: Option<u32>) -> Result<()> {
    std::fs::create_dir_all(&config.out_dir)?;
    let grids = load_grids(config)?;
    let rows = rates_for_source(config, &grids, config.rates_source, orbit)?;
    let path = config.rates_path(config.rates_source);
    write_rate_rows(&path, &rows)?;
    println!(
        "rates: wrote {} rows ({} labels) to {}",
        rows.len(),
        config.rates_source.as_str(),
        path.display()
    );
    Ok(())
}

pub fn cmd_map(config: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&config.out_dir)?;
    let rates = read_rate_rows(&config.rates_path(config.rates_source))?;
    let geometry = read_geometry(&config.geometry_path())?;
    let map = build_sky_map(&rates, &geometry, &config.map_tag)?;
    let (values_path, exposure_path) = config.map_paths(config.rates_source);
    write_sky_map(&values_path, &exposure_path, &map)?;
    if config.render_maps {
        render_pgm(&values_path.with_extension("pgm"), &map)?;
    }
    println!(
        "map: {} defined pixels -> {}",
        map.defined_values().len(),
        values_path.display()
    );
    Ok(())
}

/// Aligned (candidate, reference) label pairs over one arc, canonical order.
fn label_pairs(
    grid: &ArcGrid,
    candidate: &LabelGrid,
    reference: &LabelGrid,
) -> (Vec<Label>, Vec<Label>) {
    let mut cand = Vec::new();
    let mut refr = Vec::new();
    for e in 0..grid.esa_steps().len() {
        for a in 0..grid.angle_count() {
            for t in 0..grid.n_time() {
                if let (Some(c), Some(r)) = (candidate.get(e, a, t), reference.get(e, a, t)) {
                    cand.push(c);
                    refr.push(r);
                }
            }
        }
    }
    (cand, refr)
}

/// Restrict pairs to one ESA position.
fn label_pairs_esa(
    grid: &ArcGrid,
    candidate: &LabelGrid,
    reference: &LabelGrid,
    epos: usize,
) -> (Vec<Label>, Vec<Label>) {
    let mut cand = Vec::new();
    let mut refr = Vec::new();
    for a in 0..grid.angle_count() {
        for t in 0..grid.n_time() {
            if let (Some(c), Some(r)) = (candidate.get(epos, a, t), reference.get(epos, a, t)) {
                cand.push(c);
                refr.push(r);
            }
        }
    }
    (cand, refr)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn cmd_evaluate(config: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&config.out_dir)?;
    let grids = load_grids(config)?;
    let eval = &config.evaluate;

    let mut candidate_labels = BTreeMap::new();
    let mut reference_labels = BTreeMap::new();
    for (arc, grid) in &grids {
        candidate_labels.insert(*arc, source_labels(config, eval.candidate, *arc, grid)?);
        reference_labels.insert(*arc, source_labels(config, eval.reference, *arc, grid)?);
    }

    // ---- Confusion metrics per (arc, esa) + pooled per esa --------------
    let mut confusion_csv = String::from("orbit,arc,esa,n,accuracy,sensitivity,specificity\n");
    let mut pooled: BTreeMap<EsaStep, (Vec<Label>, Vec<Label>)> = BTreeMap::new();
    for (arc, grid) in &grids {
        let cand = &candidate_labels[arc];
        let refr = &reference_labels[arc];
        for (epos, &esa) in grid.esa_steps().iter().enumerate() {
            let (c, r) = label_pairs_esa(grid, cand, refr, epos);
            if c.is_empty() {
                continue;
            }
            let m = confusion_metrics(&c, &r)?;
            confusion_csv.push_str(&format!(
                "{},{},{esa},{},{},{},{}\n",
                arc.orbit,
                arc.arc.as_str(),
                c.len(),
                m.accuracy,
                fmt_opt(m.sensitivity),
                fmt_opt(m.specificity)
            ));
            let entry = pooled.entry(esa).or_default();
            entry.0.extend(c);
            entry.1.extend(r);
        }
    }
    let mut per_esa_accuracy = Vec::new();
    for (esa, (c, r)) in &pooled {
        let m = confusion_metrics(c, r)?;
        confusion_csv.push_str(&format!(
            "all,all,{esa},{},{},{},{}\n",
            c.len(),
            m.accuracy,
            fmt_opt(m.sensitivity),
            fmt_opt(m.specificity)
        ));
        per_esa_accuracy.push((*esa, m));
    }
    let (all_c, all_r): (Vec<Label>, Vec<Label>) = grids.iter().fold(
        (Vec::new(), Vec::new()),
        |(mut c, mut r), (arc, grid)| {
            let (ci, ri) = label_pairs(grid, &candidate_labels[arc], &reference_labels[arc]);
            c.extend(ci);
            r.extend(ri);
            (c, r)
        },
    );
    if all_c.is_empty() {
        return Err(not_found(format!(
            "no overlapping {} and {} labels to evaluate",
            eval.candidate.as_str(),
            eval.reference.as_str()
        )));
    }
    let overall = confusion_metrics(&all_c, &all_r)?;
    confusion_csv.push_str(&format!(
        "all,all,all,{},{},{},{}\n",
        all_c.len(),
        overall.accuracy,
        fmt_opt(overall.sensitivity),
        fmt_opt(overall.specificity)
    ));
    std::fs::write(config.out_dir.join("confusion.csv"), &confusion_csv)?;

    // ---- Rate ratios by exposure-time group ------------------------------
    let cand_rates = rates_for_source(config, &grids, eval.candidate, None)?;
    let ref_rates = rates_for_source(config, &grids, eval.reference, None)?;
    let mut cand_index: BTreeMap<(OrbitArcId, EsaStep, u8), &RateRow> = BTreeMap::new();
    for r in &cand_rates {
        cand_index.insert((r.arc, r.esa, r.angle.index() as u8), r);
    }
    let mut ratios_csv = String::from(
        "orbit,arc,esa,angle_bin,reference_rate,candidate_rate,ratio,exposure_group\n",
    );
    let mut group_ratios: BTreeMap<u8, Vec<f64>> = BTreeMap::new();
    for r in &ref_rates {
        let Some(c) = cand_index.get(&(r.arc, r.esa, r.angle.index() as u8)) else {
            continue;
        };
        if c.rate == 0.0 {
            continue;
        }
        let ratio = r.rate / c.rate;
        let group = exposure_group(r.good_exposure_s)?;
        ratios_csv.push_str(&format!(
            "{},{},{},{},{},{},{ratio},{group}\n",
            r.arc.orbit,
            r.arc.arc.as_str(),
            r.esa,
            r.angle,
            r.rate,
            c.rate
        ));
        group_ratios.entry(group).or_default().push(ratio);
    }
    std::fs::write(config.out_dir.join("rate_ratios.csv"), &ratios_csv)?;

    let mut groups_csv = String::from("exposure_group,n,median_ratio,mean_ratio\n");
    let mut group_summary = Vec::new();
    for group in 1..=6u8 {
        let rs = group_ratios.get(&group).cloned().unwrap_or_default();
        let (median, mean) = if rs.is_empty() {
            (None, None)
        } else {
            let mut sorted = rs.clone();
            sorted.sort_by(f64::total_cmp);
            let mid = sorted.len() / 2;
            let median = if sorted.len() % 2 == 0 {
                0.5 * (sorted[mid - 1] + sorted[mid])
            } else {
                sorted[mid]
            };
            (Some(median), Some(rs.iter().sum::<f64>() / rs.len() as f64))
        };
        groups_csv.push_str(&format!(
            "{group},{},{},{}\n",
            rs.len(),
            fmt_opt(median),
            fmt_opt(mean)
        ));
        group_summary.push((group, rs.len(), median));
    }
    std::fs::write(config.out_dir.join("rate_ratio_groups.csv"), &groups_csv)?;

    // ---- Per-ESA sky maps and the three map tests -------------------------
    let geometry = read_geometry(&config.geometry_path())?;
    let mut cells = Vec::new();
    let mut esa_steps: Vec<EsaStep> = grids
        .values()
        .flat_map(|g| g.esa_steps().iter().copied())
        .collect();
    esa_steps.sort_unstable();
    esa_steps.dedup();
    let mut percent_diff_note = String::new();
    for &esa in &esa_steps {
        let filter = |rows: &[RateRow]| -> Vec<RateRow> {
            rows.iter().filter(|r| r.esa == esa).cloned().collect()
        };
        let cand_map = build_sky_map(&filter(&cand_rates), &geometry, &config.map_tag)?;
        let ref_map = build_sky_map(&filter(&ref_rates), &geometry, &config.map_tag)?;
        let triple = map_test_triple(&cand_map, &ref_map, eval.alpha);
        if let Ok(diff) = percent_diff(&cand_map, &ref_map) {
            let defined = diff.defined_values();
            if !defined.is_empty() {
                let mean_abs =
                    defined.iter().map(|v| v.abs()).sum::<f64>() / defined.len() as f64;
                percent_diff_note.push_str(&format!(
                    "ESA {esa}: mean |percent difference| = {mean_abs:.2}% over {} pixels\n",
                    defined.len()
                ));
            }
        }
        cells.push(MapTestCell {
            map_tag: config.map_tag.clone(),
            esa,
            triple,
        });
    }
    let summary = summarize_map_tests(&cells, eval.alpha, eval.bonferroni);
    std::fs::write(config.out_dir.join("map_tests.csv"), summary.render_csv())?;

    // ---- Report -----------------------------------------------------------
    let mut report = String::new();
    report.push_str(&format!(
        "Evaluation: candidate = {}, reference = {}\n\n",
        eval.candidate.as_str(),
        eval.reference.as_str()
    ));
    report.push_str("Correct classification (pooled over arcs):\n");
    for (esa, m) in &per_esa_accuracy {
        report.push_str(&format!(
            "  ESA {esa}: accuracy {:.2}%  sensitivity {}  specificity {}\n",
            100.0 * m.accuracy,
            m.sensitivity
                .map(|v| format!("{:.2}%", 100.0 * v))
                .unwrap_or_else(|| "n/a".into()),
            m.specificity
                .map(|v| format!("{:.2}%", 100.0 * v))
                .unwrap_or_else(|| "n/a".into()),
        ));
    }
    report.push_str(&format!(
        "  overall: accuracy {:.2}% over {} cells\n\n",
        100.0 * overall.accuracy,
        all_c.len()
    ));
    report.push_str("Rate ratios (reference / candidate) by exposure-time group:\n");
    for (group, n, median) in &group_summary {
        report.push_str(&format!(
            "  group {group}: n = {n}, median ratio = {}\n",
            median.map(|m| format!("{m:.4}")).unwrap_or_else(|| "n/a".into())
        ));
    }
    report.push('\n');
    if !percent_diff_note.is_empty() {
        report.push_str(&percent_diff_note);
        report.push('\n');
    }
    report.push_str(&summary.render_report());
    std::fs::write(config.out_dir.join("report.txt"), &report)?;
    println!(
        "evaluate: accuracy {:.2}% over {} cells; report -> {}",
        100.0 * overall.accuracy,
        all_c.len(),
        config.out_dir.join("report.txt").display()
    );
    Ok(())
}

/// The three map tests for one ESA step, or `None` when a side is too
/// degenerate to test (empty map, zero variance, tiny overlap).
fn map_test_triple(candidate: &SkyMap, reference: &SkyMap, alpha: f64) -> Option<MapTestTriple> {
    let cand_vals = candidate.defined_values();
    let ref_vals = reference.defined_values();
    if cand_vals.is_empty() || ref_vals.is_empty() {
        return None;
    }
    let ks = ks_two_sample(&ref_vals, &cand_vals, alpha).ok()?;
    let ref_flat = reference.flatten_row_major();
    let cand_flat = candidate.flatten_row_major();
    let self_ccf = ccf_lags(&ref_flat, &ref_flat, 3).ok()?;
    let cross_ccf = ccf_lags(&ref_flat, &cand_flat, 3).ok()?;
    let ccf_t = paired_t_test(&self_ccf, &cross_ccf, alpha).ok()?;
    let (xs, ys) = reference.paired_values(candidate);
    let ccc = lin_ccc(&xs, &ys).ok()?;
    Some(MapTestTriple { ks, ccf_t, ccc })
}
