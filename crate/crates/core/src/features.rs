//! The 28 engineered predictors computed for every unmasked observation.
//!
//! Aggregates (sums, means, variances over an angle row, a time column, or
//! the ESA stack) skip masked cells entirely — treating gaps as zero counts
//! would fabricate low-count evidence. Neighbor counts wrap at the angle
//! seam (the detector sweep is circular) and clamp at the time edges by
//! duplicating the center cell's count; masked neighbors duplicate the
//! center as well.

use crate::error::{Error, Result};
use crate::model::{ArcGrid, EsaStep, Label, OrbitArcId};

/// Names of the 28 features, in canonical column order.
pub const FEATURE_NAMES: [&str; 28] = [
    "esa_step",
    "angle_bin",
    "time_index",
    "orbit",
    "counts",
    "counts_lower",
    "counts_upper",
    "earth_nv",
    "moon_nv",
    "sun_nv",
    "sum_angle",
    "mean_angle",
    "var_angle",
    "sum_time",
    "mean_time",
    "var_time",
    "mean_theta_counts_ratio",
    "sum_esa",
    "mean_esa",
    "var_esa",
    "nbr_up",
    "nbr_down",
    "nbr_right",
    "nbr_left",
    "nbr_up_left",
    "nbr_up_right",
    "nbr_down_right",
    "nbr_down_left",
];

pub const N_FEATURES: usize = 28;

/// Floor applied to the minimum column mean in the ratio feature so a
/// zero-count column cannot divide by zero.
pub const RATIO_EPSILON: f64 = 1e-6;

/// Key identifying the cell a feature row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub arc: OrbitArcId,
    pub esa: EsaStep,
    pub angle: u16,
    pub time: u32,
}

/// Feature rows for one or more arcs, stored column-major (one `Vec<f64>`
/// per feature) for cache-friendly tree training. Labels ride along so
/// training and evaluation never have to re-join against the grid.
#[derive(Debug, Clone, Default)]
pub struct FeatureMatrix {
    pub keys: Vec<CellKey>,
    columns: Vec<Vec<f64>>,
    pub sme_labels: Vec<Option<Label>>,
    pub truth_labels: Vec<Option<Label>>,
}

impl FeatureMatrix {
    pub fn new() -> Self {
        FeatureMatrix {
            keys: Vec::new(),
            columns: vec![Vec::new(); N_FEATURES],
            sme_labels: Vec::new(),
            truth_labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn column(&self, feature: usize) -> &[f64] {
        &self.columns[feature]
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.columns[feature][row]
    }

    pub fn row(&self, row: usize) -> [f64; N_FEATURES] {
        let mut out = [0.0; N_FEATURES];
        for (f, col) in self.columns.iter().enumerate() {
            out[f] = col[row];
        }
        out
    }

    pub fn push_row(
        &mut self,
        key: CellKey,
        values: [f64; N_FEATURES],
        sme: Option<Label>,
        truth: Option<Label>,
    ) {
        self.keys.push(key);
        for (f, v) in values.into_iter().enumerate() {
            self.columns[f].push(v);
        }
        self.sme_labels.push(sme);
        self.truth_labels.push(truth);
    }

    /// Append all rows of `other`.
    pub fn extend(&mut self, other: &FeatureMatrix) {
        self.keys.extend_from_slice(&other.keys);
        for (f, col) in self.columns.iter_mut().enumerate() {
            col.extend_from_slice(&other.columns[f]);
        }
        self.sme_labels.extend_from_slice(&other.sme_labels);
        self.truth_labels.extend_from_slice(&other.truth_labels);
    }

    /// Gather a row subset (used by training-set sampling).
    pub fn subset(&self, rows: &[usize]) -> FeatureMatrix {
        let mut out = FeatureMatrix::new();
        out.keys = rows.iter().map(|&r| self.keys[r]).collect();
        for (f, col) in self.columns.iter().enumerate() {
            out.columns[f] = rows.iter().map(|&r| col[r]).collect();
        }
        out.sme_labels = rows.iter().map(|&r| self.sme_labels[r]).collect();
        out.truth_labels = rows.iter().map(|&r| self.truth_labels[r]).collect();
        out
    }
}

/// Two-pass (sum, mean, unbiased sample variance) over an iterator of counts.
/// Variance is 0 for n = 1. Returns `None` for an empty iterator.
fn stats_two_pass(values: impl Iterator<Item = u32> + Clone) -> Option<(f64, f64, f64)> {
    let mut n = 0usize;
    let mut sum = 0u64;
    for v in values.clone() {
        n += 1;
        sum += v as u64;
    }
    if n == 0 {
        return None;
    }
    let sum = sum as f64;
    let mean = sum / n as f64;
    if n == 1 {
        return Some((sum, mean, 0.0));
    }
    let mut ss = 0.0;
    for v in values {
        let d = v as f64 - mean;
        ss += d * d;
    }
    Some((sum, mean, ss / (n - 1) as f64))
}

/// Sum/mean/variance of counts within one angle bin, over time.
pub fn angle_bin_stats(grid: &ArcGrid, esa: EsaStep, angle: usize) -> Result<(f64, f64, f64)> {
    let epos = grid
        .esa_position(esa)
        .ok_or_else(|| Error::MissingData(format!("ESA {esa} absent from arc {}", grid.arc)))?;
    stats_two_pass((0..grid.n_time()).filter_map(|t| grid.count(epos, angle, t)))
        .ok_or_else(|| Error::MissingData(format!("angle row {angle} (ESA {esa}) fully masked")))
}

/// Sum/mean/variance of counts within one time interval, over angle bins.
pub fn time_interval_stats(grid: &ArcGrid, esa: EsaStep, time: usize) -> Result<(f64, f64, f64)> {
    let epos = grid
        .esa_position(esa)
        .ok_or_else(|| Error::MissingData(format!("ESA {esa} absent from arc {}", grid.arc)))?;
    stats_two_pass((0..grid.angle_count()).filter_map(|a| grid.count(epos, a, time)))
        .ok_or_else(|| Error::MissingData(format!("time column {time} (ESA {esa}) fully masked")))
}

/// Sum/mean/variance of counts over the ESA stack at one (angle, time).
pub fn across_esa_stats(grid: &ArcGrid, angle: usize, time: usize) -> Result<(f64, f64, f64)> {
    stats_two_pass((0..grid.esa_steps().len()).filter_map(|e| grid.count(e, angle, time)))
        .ok_or_else(|| {
            Error::MissingData(format!("no ESA present at angle {angle}, time {time}"))
        })
}

/// Ratio of a time column's mean count to the minimum column mean across the
/// arc (same ESA), with the minimum floored at [`RATIO_EPSILON`].
pub fn mean_theta_counts_ratio(grid: &ArcGrid, esa: EsaStep, time: usize) -> Result<f64> {
    let epos = grid
        .esa_position(esa)
        .ok_or_else(|| Error::MissingData(format!("ESA {esa} absent from arc {}", grid.arc)))?;
    let mean_of = |t: usize| {
        stats_two_pass((0..grid.angle_count()).filter_map(|a| grid.count(epos, a, t)))
            .map(|(_, m, _)| m)
    };
    let this = mean_of(time)
        .ok_or_else(|| Error::MissingData(format!("time column {time} (ESA {esa}) fully masked")))?;
    let min = (0..grid.n_time())
        .filter_map(mean_of)
        .fold(f64::INFINITY, f64::min);
    Ok(this / min.max(RATIO_EPSILON))
}

/// The eight neighboring counts of a cell, in feature order
/// (up, down, right, left, up-left, up-right, down-right, down-left).
///
/// "Up" is angle+1 (wrapping), "right" is time+1 (clamped). Out-of-range or
/// masked neighbors duplicate the center cell's count.
pub fn neighbor_counts(
    grid: &ArcGrid,
    esa: EsaStep,
    angle: usize,
    time: usize,
) -> Result<[u32; 8]> {
    let epos = grid
        .esa_position(esa)
        .ok_or_else(|| Error::MissingData(format!("ESA {esa} absent from arc {}", grid.arc)))?;
    let center = grid
        .count(epos, angle, time)
        .ok_or_else(|| Error::MissingData(format!("cell ({esa},{angle},{time}) is masked")))?;
    Ok(neighbor_counts_at(grid, epos, angle, time, center))
}

fn neighbor_counts_at(
    grid: &ArcGrid,
    epos: usize,
    angle: usize,
    time: usize,
    center: u32,
) -> [u32; 8] {
    let a = grid.angle_count();
    let up = (angle + 1) % a;
    let down = (angle + a - 1) % a;
    let fetch = |ang: usize, dt: i64| -> u32 {
        let t = time as i64 + dt;
        if t < 0 || t >= grid.n_time() as i64 {
            return center;
        }
        grid.count(epos, ang, t as usize).unwrap_or(center)
    };
    [
        fetch(up, 0),
        fetch(down, 0),
        fetch(angle, 1),
        fetch(angle, -1),
        fetch(up, -1),
        fetch(up, 1),
        fetch(down, 1),
        fetch(down, -1),
    ]
}

/// Precomputed per-arc aggregates shared by all cells.
struct ArcAggregates {
    /// (sum, mean, var) per (esa_pos, angle); `None` for fully masked rows.
    by_angle: Vec<Option<(f64, f64, f64)>>,
    /// (sum, mean, var) per (esa_pos, time); `None` for fully masked columns.
    by_time: Vec<Option<(f64, f64, f64)>>,
    /// (sum, mean, var) per (angle, time) across ESAs.
    by_stack: Vec<Option<(f64, f64, f64)>>,
    /// Minimum column mean per esa_pos, floored at RATIO_EPSILON.
    min_col_mean: Vec<f64>,
}

fn precompute(grid: &ArcGrid) -> ArcAggregates {
    let (ne, na, nt) = (grid.esa_steps().len(), grid.angle_count(), grid.n_time());
    let mut by_angle = vec![None; ne * na];
    let mut by_time = vec![None; ne * nt];
    let mut by_stack = vec![None; na * nt];
    let mut min_col_mean = vec![f64::INFINITY; ne];

    for e in 0..ne {
        for a in 0..na {
            by_angle[e * na + a] = stats_two_pass((0..nt).filter_map(|t| grid.count(e, a, t)));
        }
        for t in 0..nt {
            let s = stats_two_pass((0..na).filter_map(|a| grid.count(e, a, t)));
            if let Some((_, mean, _)) = s {
                if mean < min_col_mean[e] {
                    min_col_mean[e] = mean;
                }
            }
            by_time[e * nt + t] = s;
        }
    }
    for a in 0..na {
        for t in 0..nt {
            by_stack[a * nt + t] = stats_two_pass((0..ne).filter_map(|e| grid.count(e, a, t)));
        }
    }
    for m in &mut min_col_mean {
        *m = m.max(RATIO_EPSILON);
    }
    ArcAggregates {
        by_angle,
        by_time,
        by_stack,
        min_col_mean,
    }
}

fn cell_features(
    grid: &ArcGrid,
    agg: &ArcAggregates,
    epos: usize,
    angle: usize,
    time: usize,
) -> Result<[f64; N_FEATURES]> {
    let (na, nt) = (grid.angle_count(), grid.n_time());
    let esa = grid.esa_steps()[epos];
    let count = grid
        .count(epos, angle, time)
        .ok_or_else(|| Error::MissingData(format!("cell ({esa},{angle},{time}) is masked")))?;
    let (bg_low, bg_high) = grid.monitor(epos, angle, time).expect("present cell");
    let (earth_nv, moon_nv, sun_nv) = grid.visibility(epos, angle, time).expect("present cell");
    let with_cell = |s: Option<(f64, f64, f64)>, what: &str| {
        s.ok_or_else(|| {
            Error::MissingData(format!(
                "{what} empty at cell ({esa},{angle},{time}) of arc {}",
                grid.arc
            ))
        })
    };
    let (sum_a, mean_a, var_a) = with_cell(agg.by_angle[epos * na + angle], "angle row")?;
    let (sum_t, mean_t, var_t) = with_cell(agg.by_time[epos * nt + time], "time column")?;
    let (sum_e, mean_e, var_e) = with_cell(agg.by_stack[angle * nt + time], "esa stack")?;
    let ratio = mean_t / agg.min_col_mean[epos];
    let nbr = neighbor_counts_at(grid, epos, angle, time, count);

    Ok([
        esa.value() as f64,
        angle as f64,
        time as f64,
        grid.arc.orbit as f64,
        count as f64,
        bg_low as f64,
        bg_high as f64,
        earth_nv as u8 as f64,
        moon_nv as u8 as f64,
        sun_nv as u8 as f64,
        sum_a,
        mean_a,
        var_a,
        sum_t,
        mean_t,
        var_t,
        ratio,
        sum_e,
        mean_e,
        var_e,
        nbr[0] as f64,
        nbr[1] as f64,
        nbr[2] as f64,
        nbr[3] as f64,
        nbr[4] as f64,
        nbr[5] as f64,
        nbr[6] as f64,
        nbr[7] as f64,
    ])
}

fn present_cells(grid: &ArcGrid) -> Vec<(usize, usize, usize)> {
    let mut cells = Vec::new();
    for e in 0..grid.esa_steps().len() {
        for a in 0..grid.angle_count() {
            for t in 0..grid.n_time() {
                if grid.is_present(e, a, t) {
                    cells.push((e, a, t));
                }
            }
        }
    }
    cells
}

fn assemble(grid: &ArcGrid, rows: Vec<(usize, usize, usize, [f64; N_FEATURES])>) -> FeatureMatrix {
    let mut matrix = FeatureMatrix::new();
    for (e, a, t, values) in rows {
        let key = CellKey {
            arc: grid.arc,
            esa: grid.esa_steps()[e],
            angle: a as u16,
            time: t as u32,
        };
        matrix.push_row(
            key,
            values,
            grid.sme_label(e, a, t),
            grid.truth_label(e, a, t),
        );
    }
    matrix
}

/// Compute the full feature matrix for one arc: one row per unmasked cell,
/// in canonical (esa, angle, time) order.
pub fn compute_features(grid: &ArcGrid) -> Result<FeatureMatrix> {
    let agg = precompute(grid);
    let cells = present_cells(grid);
    #[cfg(feature = "parallel")]
    let rows: Result<Vec<_>> = {
        use rayon::prelude::*;
        cells
            .par_iter()
            .map(|&(e, a, t)| cell_features(grid, &agg, e, a, t).map(|v| (e, a, t, v)))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Result<Vec<_>> = cells
        .iter()
        .map(|&(e, a, t)| cell_features(grid, &agg, e, a, t).map(|v| (e, a, t, v)))
        .collect();
    Ok(assemble(grid, rows?))
}

/// Sequential twin of [`compute_features`]; kept compiled for the
/// parallel-vs-serial benchmark suite.
#[doc(hidden)]
pub fn compute_features_seq(grid: &ArcGrid) -> Result<FeatureMatrix> {
    let agg = precompute(grid);
    let rows: Result<Vec<_>> = present_cells(grid)
        .into_iter()
        .map(|(e, a, t)| cell_features(grid, &agg, e, a, t).map(|v| (e, a, t, v)))
        .collect();
    Ok(assemble(grid, rows?))
}

/// Export a feature matrix as delimited text (key columns then the 28
/// feature columns), for cross-language parity testing.
pub fn write_feature_matrix(path: &std::path::Path, m: &FeatureMatrix) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        w,
        "orbit,arc,esa,angle_bin,time_index,{}",
        FEATURE_NAMES.join(",")
    )?;
    for (i, key) in m.keys.iter().enumerate() {
        write!(
            w,
            "{},{},{},{},{}",
            key.arc.orbit,
            key.arc.arc.as_str(),
            key.esa,
            key.angle,
            key.time
        )?;
        for f in 0..N_FEATURES {
            write!(w, ",{}", m.value(i, f))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
