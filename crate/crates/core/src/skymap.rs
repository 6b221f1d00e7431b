//! Sky maps: 30 x 60 grids of 6-degree pixels holding exposure-weighted
//! ENA rates for one half-year epoch, plus percent-difference maps and a
//! plain-text/PGM export.
//!
//! Contributions are folded in canonical key order regardless of input or
//! thread order, so map construction is reproducible byte-for-byte.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tables::{GeometryRow, RateRow};

pub const MAP_ROWS: usize = 30;
pub const MAP_COLS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct SkyMap {
    /// Half-year tag, e.g. `2019B`.
    pub tag: String,
    /// counts/second per pixel; `None` where no exposure landed.
    values: Vec<Option<f64>>,
    exposure: Vec<f64>,
}

impl SkyMap {
    pub fn empty(tag: impl Into<String>) -> Self {
        SkyMap {
            tag: tag.into(),
            values: vec![None; MAP_ROWS * MAP_COLS],
            exposure: vec![0.0; MAP_ROWS * MAP_COLS],
        }
    }

    #[inline]
    pub fn idx(row: usize, col: usize) -> usize {
        debug_assert!(row < MAP_ROWS && col < MAP_COLS);
        row * MAP_COLS + col
    }

    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        self.values[Self::idx(row, col)]
    }

    pub fn exposure(&self, row: usize, col: usize) -> f64 {
        self.exposure[Self::idx(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64, exposure: f64) {
        let i = Self::idx(row, col);
        self.values[i] = Some(value);
        self.exposure[i] = exposure;
    }

    /// Defined pixel values in row-major order (for eCDF/KS input).
    pub fn defined_values(&self) -> Vec<f64> {
        self.values.iter().copied().flatten().collect()
    }

    /// Row-major flattening keeping holes (for lagged cross-correlation).
    pub fn flatten_row_major(&self) -> Vec<Option<f64>> {
        self.values.clone()
    }

    /// Pairs of values at pixels defined in both maps.
    pub fn paired_values(&self, other: &SkyMap) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (a, b) in self.values.iter().zip(&other.values) {
            if let (Some(a), Some(b)) = (a, b) {
                xs.push(*a);
                ys.push(*b);
            }
        }
        (xs, ys)
    }
}

/// Build one half-year sky map from rate rows and the arc-to-pixel lookup.
///
/// Pixel value = exposure-weighted mean of contributing rates; pixel
/// exposure = summed exposure. Rows without a geometry entry are an error,
/// as is a contribution with zero exposure.
pub fn build_sky_map(rates: &[RateRow], geometry: &[GeometryRow], tag: &str) -> Result<SkyMap> {
    // Index the lookup by (arc, angle).
    let mut lookup = std::collections::BTreeMap::new();
    for g in geometry {
        if g.lat_row as usize >= MAP_ROWS || g.lon_col as usize >= MAP_COLS {
            return Err(Error::config(format!(
                "geometry pixel ({}, {}) outside {MAP_ROWS}x{MAP_COLS}",
                g.lat_row, g.lon_col
            )));
        }
        lookup.insert((g.arc, g.angle), (g.lat_row as usize, g.lon_col as usize));
    }

    // Canonical fold order: sort contributions by (pixel, arc, esa, angle).
    let mut contributions = Vec::with_capacity(rates.len());
    for r in rates {
        let &(row, col) = lookup.get(&(r.arc, r.angle)).ok_or_else(|| {
            Error::config(format!(
                "no geometry entry for arc {} angle {}",
                r.arc, r.angle
            ))
        })?;
        if r.good_exposure_s <= 0.0 {
            return Err(Error::contract(format!(
                "rate row for arc {} angle {} has non-positive exposure",
                r.arc, r.angle
            )));
        }
        contributions.push((SkyMap::idx(row, col), r.arc, r.esa, r.angle, r));
    }
    contributions.sort_by_key(|&(i, arc, esa, angle, _)| (i, arc, esa, angle));

    let mut weighted = vec![0.0f64; MAP_ROWS * MAP_COLS];
    let mut exposure = vec![0.0f64; MAP_ROWS * MAP_COLS];
    for (i, _, _, _, r) in contributions {
        weighted[i] += r.rate * r.good_exposure_s;
        exposure[i] += r.good_exposure_s;
    }

    let mut map = SkyMap::empty(tag);
    for i in 0..MAP_ROWS * MAP_COLS {
        if exposure[i] > 0.0 {
            map.values[i] = Some(weighted[i] / exposure[i]);
            map.exposure[i] = exposure[i];
        }
    }
    Ok(map)
}

/// Percent difference 100 * (candidate - reference) / reference per pixel,
/// defined only where both maps have a value and the reference is nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentDiffMap {
    pub tag: String,
    values: Vec<Option<f64>>,
}

impl PercentDiffMap {
    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        self.values[SkyMap::idx(row, col)]
    }

    pub fn defined_values(&self) -> Vec<f64> {
        self.values.iter().copied().flatten().collect()
    }
}

pub fn percent_diff(candidate: &SkyMap, reference: &SkyMap) -> Result<PercentDiffMap> {
    if candidate.tag != reference.tag {
        return Err(Error::contract(format!(
            "map tags differ: {} vs {}",
            candidate.tag, reference.tag
        )));
    }
    let values = candidate
        .values
        .iter()
        .zip(&reference.values)
        .map(|(c, r)| match (c, r) {
            (Some(c), Some(r)) if *r != 0.0 => Some(100.0 * (c - r) / r),
            _ => None,
        })
        .collect();
    Ok(PercentDiffMap {
        tag: candidate.tag.clone(),
        values,
    })
}

/// Write the value grid and exposure grid as two delimited-text files
/// (30 rows x 60 comma-separated columns; empty string = empty pixel).
pub fn write_sky_map(values_path: &Path, exposure_path: &Path, map: &SkyMap) -> Result<()> {
    let mut vw = std::io::BufWriter::new(std::fs::File::create(values_path)?);
    let mut ew = std::io::BufWriter::new(std::fs::File::create(exposure_path)?);
    for row in 0..MAP_ROWS {
        let vals: Vec<String> = (0..MAP_COLS)
            .map(|col| match map.value(row, col) {
                Some(v) => v.to_string(),
                None => String::new(),
            })
            .collect();
        writeln!(vw, "{}", vals.join(","))?;
        let exps: Vec<String> = (0..MAP_COLS)
            .map(|col| map.exposure(row, col).to_string())
            .collect();
        writeln!(ew, "{}", exps.join(","))?;
    }
    vw.flush()?;
    ew.flush()?;
    Ok(())
}

pub fn read_sky_map(values_path: &Path, exposure_path: &Path, tag: &str) -> Result<SkyMap> {
    let parse_grid = |path: &Path| -> Result<Vec<Vec<Option<f64>>>> {
        let text = std::fs::read_to_string(path)?;
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let row: Vec<Option<f64>> = line
                .split(',')
                .map(|cell| {
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>().map(Some).map_err(|_| Error::Parse {
                            path: path.to_path_buf(),
                            line: lineno + 1,
                            message: format!("bad number {cell:?}"),
                        })
                    }
                })
                .collect::<Result<_>>()?;
            if row.len() != MAP_COLS {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    message: format!("expected {MAP_COLS} columns, got {}", row.len()),
                });
            }
            rows.push(row);
        }
        if rows.len() != MAP_ROWS {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                message: format!("expected {MAP_ROWS} rows, got {}", rows.len()),
            });
        }
        Ok(rows)
    };
    let values = parse_grid(values_path)?;
    let exposures = parse_grid(exposure_path)?;
    let mut map = SkyMap::empty(tag);
    for row in 0..MAP_ROWS {
        for col in 0..MAP_COLS {
            if let Some(v) = values[row][col] {
                map.set(row, col, v, exposures[row][col].unwrap_or(0.0));
            }
        }
    }
    Ok(map)
}

/// Portable graymap render (ASCII P2) with a linear scale from the minimum
/// to the maximum defined value; empty pixels are black.
pub fn render_pgm(path: &Path, map: &SkyMap) -> Result<()> {
    let defined = map.defined_values();
    let (lo, hi) = defined
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "P2")?;
    writeln!(w, "{MAP_COLS} {MAP_ROWS}")?;
    writeln!(w, "255")?;
    for row in 0..MAP_ROWS {
        let line: Vec<String> = (0..MAP_COLS)
            .map(|col| match map.value(row, col) {
                Some(v) => format!("{}", (255.0 * (v - lo) / span).round() as u8),
                None => "0".to_string(),
            })
            .collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}
