//! Good-time ENA rates per angle bin and the exposure-time grouping.
//!
//! rate = good counts / good exposure - isotropic background, per
//! (arc, esa, angle). Exposure is the summed interval duration of the
//! good-labeled cells in that angle row; an angle with zero good exposure
//! has no defined rate (never zero).

use crate::error::{Error, Result};
use crate::model::{ArcGrid, EsaStep, Label};
use crate::pipeline::LabelGrid;
use crate::tables::RateRow;

/// Rate record for one (arc, esa, angle).
#[derive(Debug, Clone, PartialEq)]
pub struct EnaRate {
    pub esa: EsaStep,
    pub angle: usize,
    pub good_counts: u64,
    pub good_exposure_s: f64,
    pub isotropic_bg: f64,
    /// counts/second after background subtraction.
    pub rate: f64,
}

fn good_counts_and_exposure(
    labels: &LabelGrid,
    grid: &ArcGrid,
    esa_pos: usize,
    angle: usize,
) -> (u64, f64) {
    let mut counts = 0u64;
    let mut exposure = 0.0;
    for t in 0..grid.n_time() {
        if labels.get(esa_pos, angle, t) == Some(Label::Good) {
            if let Some(c) = grid.count(esa_pos, angle, t) {
                counts += c as u64;
                exposure += grid.time(t).expect("present cell has interval").duration_s;
            }
        }
    }
    (counts, exposure)
}

/// ENA rate for one angle row under the given labels.
pub fn ena_rate(
    labels: &LabelGrid,
    grid: &ArcGrid,
    esa: EsaStep,
    angle: usize,
    isotropic_bg: f64,
) -> Result<EnaRate> {
    let epos = grid
        .esa_position(esa)
        .ok_or_else(|| Error::contract(format!("ESA {esa} absent from arc {}", grid.arc)))?;
    if labels.esa_steps != grid.esa_steps()
        || labels.angle_count != grid.angle_count()
        || labels.n_time != grid.n_time()
    {
        return Err(Error::contract("label grid shape does not match arc grid"));
    }
    let (good_counts, good_exposure_s) = good_counts_and_exposure(labels, grid, epos, angle);
    if good_exposure_s <= 0.0 {
        return Err(Error::UndefinedRate(format!(
            "no good exposure at arc {}, ESA {esa}, angle {angle}",
            grid.arc
        )));
    }
    Ok(EnaRate {
        esa,
        angle,
        good_counts,
        good_exposure_s,
        isotropic_bg,
        rate: good_counts as f64 / good_exposure_s - isotropic_bg,
    })
}

/// Isotropic-background estimate for one ESA step: the 10th percentile of
/// the per-angle good-time raw rates (counts/exposure before subtraction),
/// or the override verbatim when one is configured.
///
/// Percentiles interpolate linearly between order statistics
/// (h = (n-1)p, the common "type 7" convention).
pub fn estimate_isotropic_bg(
    labels: &LabelGrid,
    grid: &ArcGrid,
    esa: EsaStep,
    override_bg: Option<f64>,
) -> Result<f64> {
    if let Some(v) = override_bg {
        return Ok(v);
    }
    let epos = grid
        .esa_position(esa)
        .ok_or_else(|| Error::contract(format!("ESA {esa} absent from arc {}", grid.arc)))?;
    let mut raw: Vec<f64> = (0..grid.angle_count())
        .filter_map(|a| {
            let (c, e) = good_counts_and_exposure(labels, grid, epos, a);
            (e > 0.0).then(|| c as f64 / e)
        })
        .collect();
    if raw.is_empty() {
        return Err(Error::Estimation(format!(
            "no good cells for ESA {esa} in arc {}",
            grid.arc
        )));
    }
    raw.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&raw, 0.10))
}

fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Exposure-time group boundaries in seconds, lower bound inclusive:
/// group 1 below 21, then [21, 83), [83, 168), [168, 277), [277, 374),
/// and group 6 at or above 374.
pub const EXPOSURE_GROUP_BOUNDS: [f64; 5] = [21.0, 83.0, 168.0, 277.0, 374.0];

/// Classify an exposure into its group 1..=6. Total, monotone step
/// function of exposure; non-positive exposures are a contract error.
pub fn exposure_group(exposure_s: f64) -> Result<u8> {
    if exposure_s <= 0.0 || !exposure_s.is_finite() {
        return Err(Error::contract(format!(
            "exposure must be positive, got {exposure_s}"
        )));
    }
    let mut group = 1u8;
    for &bound in &EXPOSURE_GROUP_BOUNDS {
        if exposure_s >= bound {
            group += 1;
        }
    }
    Ok(group)
}

/// All rates for one labeled arc, as exportable rows. Angles without good
/// exposure are skipped (their rate is undefined). The background is
/// estimated (or overridden) once per ESA step.
pub fn arc_rate_rows(
    labels: &LabelGrid,
    grid: &ArcGrid,
    override_bg: Option<f64>,
) -> Result<Vec<RateRow>> {
    let mut rows = Vec::new();
    for &esa in grid.esa_steps() {
        let bg = match estimate_isotropic_bg(labels, grid, esa, override_bg) {
            Ok(bg) => bg,
            Err(Error::Estimation(_)) => continue, // no good cells in this ESA
            Err(e) => return Err(e),
        };
        for angle in 0..grid.angle_count() {
            match ena_rate(labels, grid, esa, angle, bg) {
                Ok(r) => rows.push(RateRow {
                    arc: grid.arc,
                    esa,
                    angle: crate::model::AngleBin::new(angle as u8)?,
                    good_counts: r.good_counts,
                    good_exposure_s: r.good_exposure_s,
                    isotropic_bg: r.isotropic_bg,
                    rate: r.rate,
                }),
                Err(Error::UndefinedRate(_)) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_grid, AngleBin, ArcLetter, Observation, OrbitArcId, TimeInterval};

    fn obs(esa: u8, angle: u8, t: u32, count: u32, duration: f64) -> Observation {
        Observation {
            arc: OrbitArcId::new(1, ArcLetter::A),
            esa: EsaStep::new(esa).unwrap(),
            angle: AngleBin::new(angle).unwrap(),
            time: TimeInterval {
                index: t,
                start_epoch_s: 1000.0 * t as f64,
                duration_s: duration,
            },
            count,
            bg_low: 0,
            bg_high: 0,
            earth_nv: true,
            moon_nv: true,
            sun_nv: true,
            sme_label: None,
            truth_label: None,
        }
    }

    fn all_good(grid: &ArcGrid) -> LabelGrid {
        let mut labels = LabelGrid::masked(
            grid.arc,
            3,
            grid.esa_steps().to_vec(),
            grid.angle_count(),
            grid.n_time(),
        );
        for e in 0..grid.esa_steps().len() {
            for a in 0..grid.angle_count() {
                for t in 0..grid.n_time() {
                    if grid.is_present(e, a, t) {
                        labels.set(e, a, t, Label::Good);
                    }
                }
            }
        }
        labels
    }

    #[test]
    fn rate_direct_arithmetic() {
        // 100 counts over 50 s, bg 0.5 -> 1.5 counts/s.
        let rows = vec![obs(6, 0, 0, 60, 30.0), obs(6, 0, 1, 40, 20.0)];
        let grid = build_grid(&rows, OrbitArcId::new(1, ArcLetter::A)).unwrap();
        let labels = all_good(&grid);
        let r = ena_rate(&labels, &grid, EsaStep::new(6).unwrap(), 0, 0.5).unwrap();
        assert_eq!(r.good_counts, 100);
        assert_eq!(r.good_exposure_s, 50.0);
        assert_eq!(r.rate, 1.5);
    }

    #[test]
    fn zero_counts_zero_bg_is_zero_rate() {
        let rows = vec![obs(6, 0, 0, 0, 25.0)];
        let grid = build_grid(&rows, OrbitArcId::new(1, ArcLetter::A)).unwrap();
        let labels = all_good(&grid);
        let r = ena_rate(&labels, &grid, EsaStep::new(6).unwrap(), 0, 0.0).unwrap();
        assert_eq!(r.rate, 0.0);
    }

    #[test]
    fn zero_good_exposure_is_undefined() {
        let rows = vec![obs(6, 0, 0, 5, 25.0)];
        let grid = build_grid(&rows, OrbitArcId::new(1, ArcLetter::A)).unwrap();
        // Leave everything unlabeled = nothing good.
        let labels = LabelGrid::masked(grid.arc, 3, grid.esa_steps().to_vec(), 60, 1);
        let err = ena_rate(&labels, &grid, EsaStep::new(6).unwrap(), 0, 0.0).unwrap_err();
        assert!(matches!(err, Error::UndefinedRate(_)));
    }

    #[test]
    fn rate_additive_over_split_spans() {
        // Splitting a good span into two adjacent spans leaves the totals
        // unchanged; the rate only depends on summed counts and exposure.
        let rows: Vec<Observation> = (0..10).map(|t| obs(6, 0, t, 3 * t, 40.0)).collect();
        let grid = build_grid(&rows, OrbitArcId::new(1, ArcLetter::A)).unwrap();
        let labels = all_good(&grid);
        let whole = ena_rate(&labels, &grid, EsaStep::new(6).unwrap(), 0, 0.2).unwrap();
        let (c1, e1) = good_counts_and_exposure(&labels, &grid, 0, 0);
        assert_eq!(whole.good_counts, c1);
        assert_eq!(whole.good_exposure_s, e1);
        let (sum_c, sum_e) = (0..10).fold((0u64, 0.0), |(c, e), t| {
            (c + 3 * t as u64, e + 40.0)
        });
        assert_eq!(c1, sum_c);
        assert_eq!(e1, sum_e);
    }

    #[test]
    fn bg_override_passes_through() {
        let rows = vec![obs(6, 0, 0, 5, 25.0)];
        let grid = build_grid(&rows, OrbitArcId::new(1, ArcLetter::A)).unwrap();
        let labels = all_good(&grid);
        let bg =
            estimate_isotropic_bg(&labels, &grid, EsaStep::new(6).unwrap(), Some(0.775)).unwrap();
        assert_eq!(bg, 0.775);
    }

    #[test]
    fn bg_estimate_under_uniform_rates() {
        // Every angle has raw rate exactly 2.0 counts/s -> estimate 2.0.
        let mut rows = Vec::new();
        for a in 0..60u8 {
            for t in 0..5u32 {
                rows.push(obs(6, a, t, 80, 40.0));
            }
        }
        let grid = build_grid(&rows, OrbitArcId::new(1, ArcLetter::A)).unwrap();
        let labels = all_good(&grid);
        let bg = estimate_isotropic_bg(&labels, &grid, EsaStep::new(6).unwrap(), None).unwrap();
        assert_eq!(bg, 2.0);
    }

    #[test]
    fn bg_estimate_needs_good_cells() {
        let rows = vec![obs(6, 0, 0, 5, 25.0)];
        let grid = build_grid(&rows, OrbitArcId::new(1, ArcLetter::A)).unwrap();
        let labels = LabelGrid::masked(grid.arc, 3, grid.esa_steps().to_vec(), 60, 1);
        let err =
            estimate_isotropic_bg(&labels, &grid, EsaStep::new(6).unwrap(), None).unwrap_err();
        assert!(matches!(err, Error::Estimation(_)));
    }

    #[test]
    fn exposure_groups_match_documented_boundaries() {
        let cases = [
            (20.9, 1u8),
            (21.0, 2),
            (82.0, 2),
            (83.0, 3),
            (167.5, 3),
            (276.0, 4),
            (277.0, 5),
            (373.0, 5),
            (374.0, 6),
        ];
        for (exposure, expected) in cases {
            assert_eq!(exposure_group(exposure).unwrap(), expected, "{exposure} s");
        }
        assert!(exposure_group(0.0).is_err());
        assert!(exposure_group(-3.0).is_err());
    }

    #[test]
    fn exposure_group_is_monotone() {
        let mut prev = 0;
        for i in 1..5000 {
            let g = exposure_group(i as f64 * 0.1).unwrap();
            assert!(g >= prev);
            prev = g;
        }
        assert_eq!(prev, 6);
    }
}
