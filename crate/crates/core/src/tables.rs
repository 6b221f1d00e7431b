//! Delimited-text readers and writers for every file interface.
//!
//! All tables are plain comma-delimited text with a fixed documented header,
//! chosen for diff-ability and cross-language parity. Booleans are written
//! as `0`/`1`, labels as `good`/`bad`/empty, floats in Rust's shortest
//! round-trip decimal form.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fov::{Body, BodyEphemeris, EphemerisSample, ExclusionMask, PointingRecord};
use crate::model::{AngleBin, ArcLetter, EsaStep, Label, Observation, OrbitArcId, TimeInterval};

pub const OBSERVATION_HEADER: &str = "orbit,arc,esa,angle_bin,time_index,start_epoch_s,duration_s,\
count,bg_low,bg_high,earth_nv,moon_nv,sun_nv,sme_label,truth_label";
pub const TRUTH_HEADER: &str = "orbit,arc,esa,angle_bin,time_index,truth_label";
pub const POINTING_HEADER: &str = "valid_from_s,x,y,z";
pub const EPHEMERIS_HEADER: &str = "body,epoch_s,x_km,y_km,z_km";
pub const MASK_HEADER: &str = "epoch_s,body,bad_bins";
pub const LABEL_HEADER: &str = "esa,angle_bin,time_index,stage,label,probability";
pub const GOODTIMES_HEADER: &str = "esa,span_start_index,span_end_index";
pub const EXCEPTIONS_HEADER: &str = "esa,angle_bin,time_index";
pub const RATES_HEADER: &str = "orbit,arc,esa,angle_bin,good_counts,good_exposure_s,isotropic_bg,rate";
pub const GEOMETRY_HEADER: &str = "orbit,arc,angle_bin,lat_row,lon_col";

/// Ingestion options. The schema itself is fixed; only the delimiter varies.
#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub delimiter: char,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig { delimiter: ',' }
    }
}

struct RowCtx<'a> {
    path: &'a Path,
    /// 1-based line number in the file (header is line 1).
    line: usize,
    /// 1-based data-row number (first row after the header is 1).
    row: usize,
}

impl RowCtx<'_> {
    fn parse_err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            message: msg.into(),
        }
    }

    fn field<'f>(&self, fields: &[&'f str], idx: usize, name: &str) -> Result<&'f str> {
        fields
            .get(idx)
            .copied()
            .ok_or_else(|| self.parse_err(format!("missing field `{name}`")))
    }

    fn num<T: std::str::FromStr>(&self, s: &str, name: &str) -> Result<T> {
        s.parse()
            .map_err(|_| self.parse_err(format!("field `{name}`: cannot parse {s:?}")))
    }

    /// Integer that must be >= 0; negatives are a validation error naming the row.
    fn non_negative(&self, s: &str, name: &str) -> Result<u32> {
        let v: i64 = self.num(s, name)?;
        if v < 0 {
            return Err(Error::Validation {
                row: self.row,
                message: format!("field `{name}` must be non-negative, got {v}"),
            });
        }
        u32::try_from(v).map_err(|_| self.parse_err(format!("field `{name}`: {v} out of range")))
    }

    fn boolean(&self, s: &str, name: &str) -> Result<bool> {
        match s {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(self.parse_err(format!("field `{name}` must be 0|1, got {other:?}"))),
        }
    }
}

fn check_header(path: &Path, got: Option<&str>, expected: &str) -> Result<()> {
    let got = got.ok_or_else(|| Error::Schema {
        path: path.to_path_buf(),
        message: "file is empty (missing header)".into(),
    })?;
    if got.trim_end() != expected {
        // Point at the first missing column for a usable message.
        let got_cols: Vec<&str> = got.trim_end().split(',').collect();
        for col in expected.split(',') {
            if !got_cols.contains(&col) {
                return Err(Error::Schema {
                    path: path.to_path_buf(),
                    message: format!("missing required column `{col}`"),
                });
            }
        }
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: format!("header mismatch: expected `{expected}`"),
        });
    }
    Ok(())
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = std::io::Result<String>>> {
    let file = File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{}: not found", path.display()),
            ))
        } else {
            Error::Io(e)
        }
    })?;
    Ok(BufReader::new(file).lines())
}

/// Read an observation table. Row order is preserved; malformed rows are
/// reported with their line number, field-contract violations with their
/// data-row number.
pub fn ingest_observations(path: &Path, config: &IngestConfig) -> Result<Vec<Observation>> {
    let mut lines = open_lines(path)?;
    check_header(path, lines.next().transpose()?.as_deref(), OBSERVATION_HEADER)?;

    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ctx = RowCtx {
            path,
            line: i + 2,
            row: i + 1,
        };
        let fields: Vec<&str> = line.split(config.delimiter).collect();
        if fields.len() != 15 {
            return Err(ctx.parse_err(format!("expected 15 fields, got {}", fields.len())));
        }
        let orbit: u32 = ctx.num(ctx.field(&fields, 0, "orbit")?, "orbit")?;
        let arc = ArcLetter::parse(ctx.field(&fields, 1, "arc")?)
            .map_err(|e| ctx.parse_err(e.to_string()))?;
        let esa = EsaStep::new(ctx.num(ctx.field(&fields, 2, "esa")?, "esa")?)
            .map_err(|e| ctx.parse_err(e.to_string()))?;
        let angle = AngleBin::new(ctx.num(ctx.field(&fields, 3, "angle_bin")?, "angle_bin")?)
            .map_err(|e| ctx.parse_err(e.to_string()))?;
        let time = TimeInterval {
            index: ctx.num(ctx.field(&fields, 4, "time_index")?, "time_index")?,
            start_epoch_s: ctx.num(ctx.field(&fields, 5, "start_epoch_s")?, "start_epoch_s")?,
            duration_s: ctx.num(ctx.field(&fields, 6, "duration_s")?, "duration_s")?,
        };
        let count = ctx.non_negative(ctx.field(&fields, 7, "count")?, "count")?;
        let bg_low = ctx.non_negative(ctx.field(&fields, 8, "bg_low")?, "bg_low")?;
        let bg_high = ctx.non_negative(ctx.field(&fields, 9, "bg_high")?, "bg_high")?;
        let earth_nv = ctx.boolean(ctx.field(&fields, 10, "earth_nv")?, "earth_nv")?;
        let moon_nv = ctx.boolean(ctx.field(&fields, 11, "moon_nv")?, "moon_nv")?;
        let sun_nv = ctx.boolean(ctx.field(&fields, 12, "sun_nv")?, "sun_nv")?;
        let sme_label = Label::parse(ctx.field(&fields, 13, "sme_label")?)
            .map_err(|e| ctx.parse_err(e.to_string()))?;
        let truth_label = Label::parse(ctx.field(&fields, 14, "truth_label")?)
            .map_err(|e| ctx.parse_err(e.to_string()))?;

        out.push(Observation {
            arc: OrbitArcId::new(orbit, arc),
            esa,
            angle,
            time,
            count,
            bg_low,
            bg_high,
            earth_nv,
            moon_nv,
            sun_nv,
            sme_label,
            truth_label,
        });
    }
    Ok(out)
}

fn label_str(l: Option<Label>) -> &'static str {
    l.map_or("", Label::as_str)
}

pub fn write_observations(path: &Path, observations: &[Observation]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{OBSERVATION_HEADER}")?;
    for o in observations {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            o.arc.orbit,
            o.arc.arc.as_str(),
            o.esa,
            o.angle,
            o.time.index,
            o.time.start_epoch_s,
            o.time.duration_s,
            o.count,
            o.bg_low,
            o.bg_high,
            o.earth_nv as u8,
            o.moon_nv as u8,
            o.sun_nv as u8,
            label_str(o.sme_label),
            label_str(o.truth_label),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Sidecar truth table: identical keys, one truth label per row.
pub fn write_truth_table(path: &Path, observations: &[Observation]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{TRUTH_HEADER}")?;
    for o in observations {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            o.arc.orbit,
            o.arc.arc.as_str(),
            o.esa,
            o.angle,
            o.time.index,
            label_str(o.truth_label),
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pointing_log(path: &Path) -> Result<Vec<PointingRecord>> {
    let mut lines = open_lines(path)?;
    check_header(path, lines.next().transpose()?.as_deref(), POINTING_HEADER)?;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ctx = RowCtx {
            path,
            line: i + 2,
            row: i + 1,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(ctx.parse_err(format!("expected 4 fields, got {}", fields.len())));
        }
        out.push(PointingRecord::new(
            ctx.num(fields[0], "valid_from_s")?,
            [
                ctx.num(fields[1], "x")?,
                ctx.num(fields[2], "y")?,
                ctx.num(fields[3], "z")?,
            ],
        )?);
    }
    Ok(out)
}

pub fn write_pointing_log(path: &Path, records: &[PointingRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{POINTING_HEADER}")?;
    for r in records {
        let [x, y, z] = r.spin_axis;
        writeln!(w, "{},{},{},{}", r.valid_from_s, x, y, z)?;
    }
    w.flush()?;
    Ok(())
}

/// Read an ephemeris table into one series per body present in the file.
pub fn read_ephemerides(path: &Path) -> Result<Vec<BodyEphemeris>> {
    let mut lines = open_lines(path)?;
    check_header(path, lines.next().transpose()?.as_deref(), EPHEMERIS_HEADER)?;
    let mut per_body: Vec<(Body, Vec<EphemerisSample>)> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ctx = RowCtx {
            path,
            line: i + 2,
            row: i + 1,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(ctx.parse_err(format!("expected 5 fields, got {}", fields.len())));
        }
        let body = Body::parse(fields[0]).map_err(|e| ctx.parse_err(e.to_string()))?;
        let sample = EphemerisSample::new(
            ctx.num(fields[1], "epoch_s")?,
            [
                ctx.num(fields[2], "x_km")?,
                ctx.num(fields[3], "y_km")?,
                ctx.num(fields[4], "z_km")?,
            ],
        )?;
        match per_body.iter_mut().find(|(b, _)| *b == body) {
            Some((_, samples)) => samples.push(sample),
            None => per_body.push((body, vec![sample])),
        }
    }
    per_body
        .into_iter()
        .map(|(body, samples)| BodyEphemeris::new(body, samples))
        .collect()
}

pub fn write_ephemerides(path: &Path, ephemerides: &[BodyEphemeris]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{EPHEMERIS_HEADER}")?;
    for e in ephemerides {
        for s in e.samples() {
            let [x, y, z] = s.position_km;
            writeln!(w, "{},{},{},{},{}", e.body.as_str(), s.epoch_s, x, y, z)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Mask export: one row per (sample, body) with `;`-joined bad bins.
pub fn write_exclusion_mask(path: &Path, mask: &ExclusionMask) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{MASK_HEADER}")?;
    for sample in &mask.samples {
        for body in Body::ALL {
            let bins = sample.bad_bins(body);
            let joined = bins
                .iter()
                .map(|b| b.index().to_string())
                .collect::<Vec<_>>()
                .join(";");
            writeln!(w, "{},{},{}", sample.epoch_s, body.as_str(), joined)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One exported label row (any stage).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRow {
    pub esa: EsaStep,
    pub angle: AngleBin,
    pub time_index: u32,
    pub stage: u8,
    pub label: Label,
    pub probability: f64,
}

pub fn write_label_rows(path: &Path, rows: &[LabelRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{LABEL_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.esa,
            r.angle,
            r.time_index,
            r.stage,
            r.label.as_str(),
            r.probability
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_label_rows(path: &Path) -> Result<Vec<LabelRow>> {
    let mut lines = open_lines(path)?;
    check_header(path, lines.next().transpose()?.as_deref(), LABEL_HEADER)?;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ctx = RowCtx {
            path,
            line: i + 2,
            row: i + 1,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(ctx.parse_err(format!("expected 6 fields, got {}", fields.len())));
        }
        let label = Label::parse(fields[4])
            .map_err(|e| ctx.parse_err(e.to_string()))?
            .ok_or_else(|| ctx.parse_err("label must be good|bad"))?;
        out.push(LabelRow {
            esa: EsaStep::new(ctx.num(fields[0], "esa")?).map_err(|e| ctx.parse_err(e.to_string()))?,
            angle: AngleBin::new(ctx.num(fields[1], "angle_bin")?)
                .map_err(|e| ctx.parse_err(e.to_string()))?,
            time_index: ctx.num(fields[2], "time_index")?,
            stage: ctx.num(fields[3], "stage")?,
            label,
            probability: ctx.num(fields[5], "probability")?,
        });
    }
    Ok(out)
}

/// One exported ENA-rate row.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub arc: OrbitArcId,
    pub esa: EsaStep,
    pub angle: AngleBin,
    pub good_counts: u64,
    pub good_exposure_s: f64,
    pub isotropic_bg: f64,
    pub rate: f64,
}

pub fn write_rate_rows(path: &Path, rows: &[RateRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{RATES_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.arc.orbit,
            r.arc.arc.as_str(),
            r.esa,
            r.angle,
            r.good_counts,
            r.good_exposure_s,
            r.isotropic_bg,
            r.rate
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rate_rows(path: &Path) -> Result<Vec<RateRow>> {
    let mut lines = open_lines(path)?;
    check_header(path, lines.next().transpose()?.as_deref(), RATES_HEADER)?;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ctx = RowCtx {
            path,
            line: i + 2,
            row: i + 1,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(ctx.parse_err(format!("expected 8 fields, got {}", fields.len())));
        }
        out.push(RateRow {
            arc: OrbitArcId::new(
                ctx.num(fields[0], "orbit")?,
                ArcLetter::parse(fields[1]).map_err(|e| ctx.parse_err(e.to_string()))?,
            ),
            esa: EsaStep::new(ctx.num(fields[2], "esa")?).map_err(|e| ctx.parse_err(e.to_string()))?,
            angle: AngleBin::new(ctx.num(fields[3], "angle_bin")?)
                .map_err(|e| ctx.parse_err(e.to_string()))?,
            good_counts: ctx.num(fields[4], "good_counts")?,
            good_exposure_s: ctx.num(fields[5], "good_exposure_s")?,
            isotropic_bg: ctx.num(fields[6], "isotropic_bg")?,
            rate: ctx.num(fields[7], "rate")?,
        });
    }
    Ok(out)
}

/// Arc-and-angle to sky-map-pixel lookup row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeometryRow {
    pub arc: OrbitArcId,
    pub angle: AngleBin,
    pub lat_row: u16,
    pub lon_col: u16,
}

pub fn write_geometry(path: &Path, rows: &[GeometryRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{GEOMETRY_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.arc.orbit,
            r.arc.arc.as_str(),
            r.angle,
            r.lat_row,
            r.lon_col
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_geometry(path: &Path) -> Result<Vec<GeometryRow>> {
    let mut lines = open_lines(path)?;
    check_header(path, lines.next().transpose()?.as_deref(), GEOMETRY_HEADER)?;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ctx = RowCtx {
            path,
            line: i + 2,
            row: i + 1,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(ctx.parse_err(format!("expected 5 fields, got {}", fields.len())));
        }
        out.push(GeometryRow {
            arc: OrbitArcId::new(
                ctx.num(fields[0], "orbit")?,
                ArcLetter::parse(fields[1]).map_err(|e| ctx.parse_err(e.to_string()))?,
            ),
            angle: AngleBin::new(ctx.num(fields[2], "angle_bin")?)
                .map_err(|e| ctx.parse_err(e.to_string()))?,
            lat_row: ctx.num(fields[3], "lat_row")?,
            lon_col: ctx.num(fields[4], "lon_col")?,
        });
    }
    Ok(out)
}

/// Resolve a path against an optional base directory.
pub fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ANGLE_BINS;

    fn tmpfile(name: &str, contents: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("enacull-tables-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        std::fs::write(&path, contents).unwrap();
        path
    }

    #[test]
    fn header_only_yields_empty_list() {
        let path = tmpfile("empty.csv", &format!("{OBSERVATION_HEADER}\n"));
        let rows = ingest_observations(&path, &IngestConfig::default()).unwrap();
        assert!(rows.is_empty());
    }

    #[test]
    fn single_row_round_trips_fields() {
        let path = tmpfile(
            "one.csv",
            &format!("{OBSERVATION_HEADER}\n471,a,6,0,0,1000,50,3,1,0,1,1,1,good,bad\n"),
        );
        let rows = ingest_observations(&path, &IngestConfig::default()).unwrap();
        assert_eq!(rows.len(), 1);
        let o = &rows[0];
        assert_eq!(o.arc.orbit, 471);
        assert_eq!(o.arc.arc, ArcLetter::A);
        assert_eq!(o.esa.value(), 6);
        assert_eq!(o.angle.index(), 0);
        assert_eq!(o.count, 3);
        assert!(o.earth_nv && o.moon_nv && o.sun_nv);
        assert_eq!(o.sme_label, Some(Label::Good));
        assert_eq!(o.truth_label, Some(Label::Bad));
    }

    #[test]
    fn negative_count_names_row_one() {
        let path = tmpfile(
            "neg.csv",
            &format!("{OBSERVATION_HEADER}\n471,a,6,0,0,1000,50,-1,0,0,1,1,1,,\n"),
        );
        let err = ingest_observations(&path, &IngestConfig::default()).unwrap_err();
        match err {
            Error::Validation { row, .. } => assert_eq!(row, 1),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_schema_error() {
        let header = OBSERVATION_HEADER.replace(",count", "");
        let path = tmpfile("badheader.csv", &format!("{header}\n"));
        let err = ingest_observations(&path, &IngestConfig::default()).unwrap_err();
        match err {
            Error::Schema { message, .. } => assert!(message.contains("count"), "{message}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn observations_write_read_round_trip() {
        let obs = Observation {
            arc: OrbitArcId::new(12, ArcLetter::B),
            esa: EsaStep::new(3).unwrap(),
            angle: AngleBin::new(ANGLE_BINS as u8 - 1).unwrap(),
            time: TimeInterval {
                index: 7,
                start_epoch_s: 123.456,
                duration_s: 17.25,
            },
            count: 9,
            bg_low: 2,
            bg_high: 1,
            earth_nv: false,
            moon_nv: true,
            sun_nv: true,
            sme_label: None,
            truth_label: Some(Label::Good),
        };
        let dir = std::env::temp_dir().join("enacull-tables-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.csv");
        write_observations(&path, std::slice::from_ref(&obs)).unwrap();
        let back = ingest_observations(&path, &IngestConfig::default()).unwrap();
        assert_eq!(back, vec![obs]);
    }
}
