//! Label- and map-comparison statistics: confusion metrics, eCDFs with
//! distribution-free confidence bands, the two-sample Kolmogorov-Smirnov
//! test, lagged cross-correlation vectors with a paired t-test, Lin's
//! concordance correlation coefficient, and the per-map pass/fail summary.

use crate::error::{Error, Result};
use crate::model::{EsaStep, Label};

/// Confusion counts with "good" as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionMetrics {
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    /// P(predicted good | reference good); absent when the reference has
    /// no positives.
    pub sensitivity: Option<f64>,
    /// P(predicted bad | reference bad); absent when the reference has no
    /// negatives.
    pub specificity: Option<f64>,
}

/// Accuracy, sensitivity, and specificity of `predicted` against
/// `reference`. Undefined ratios are reported as absent, never as zero.
pub fn confusion_metrics(predicted: &[Label], reference: &[Label]) -> Result<ConfusionMetrics> {
    if predicted.len() != reference.len() {
        return Err(Error::contract(format!(
            "label sequences differ in length: {} vs {}",
            predicted.len(),
            reference.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::contract("label sequences are empty"));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &r) in predicted.iter().zip(reference) {
        match (p, r) {
            (Label::Good, Label::Good) => c.tp += 1,
            (Label::Good, Label::Bad) => c.fp += 1,
            (Label::Bad, Label::Bad) => c.tn += 1,
            (Label::Bad, Label::Good) => c.fn_ += 1,
        }
    }
    let total = (c.tp + c.fp + c.tn + c.fn_) as f64;
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    Ok(ConfusionMetrics {
        counts: c,
        accuracy: (c.tp + c.tn) as f64 / total,
        sensitivity: ratio(c.tp, c.tp + c.fn_),
        specificity: ratio(c.tn, c.tn + c.fp),
    })
}

/// Empirical CDF with a Dvoretzky-Kiefer-Wolfowitz confidence band.
#[derive(Debug, Clone)]
pub struct Ecdf {
    sorted: Vec<f64>,
    /// Half-width sqrt(ln(2/alpha) / (2n)) of the distribution-free band.
    pub band_half_width: f64,
    pub alpha: f64,
}

impl Ecdf {
    /// F(x): fraction of the sample <= x.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.sorted.partition_point(|&v| v <= x);
        k as f64 / self.sorted.len() as f64
    }

    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    /// Band around F(x), clipped to [0, 1].
    pub fn band(&self, x: f64) -> (f64, f64) {
        let f = self.eval(x);
        (
            (f - self.band_half_width).max(0.0),
            (f + self.band_half_width).min(1.0),
        )
    }
}

pub fn ecdf_with_band(sample: &[f64], alpha: f64) -> Result<Ecdf> {
    if sample.is_empty() {
        return Err(Error::contract("eCDF of an empty sample"));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::contract("alpha must be in (0, 1)"));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(Ecdf {
        sorted,
        band_half_width: ((2.0 / alpha).ln() / (2.0 * n)).sqrt(),
        alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub d_statistic: f64,
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub critical_value: f64,
    pub reject: bool,
}

/// Asymptotic two-sample critical coefficient c(alpha). The conventional
/// alpha = 0.01 level uses the rounded literature value 1.628 exactly;
/// other levels use the closed form sqrt(-ln(alpha/2) / 2).
pub fn ks_coefficient(alpha: f64) -> f64 {
    if alpha == 0.01 {
        1.628
    } else {
        (-(alpha / 2.0).ln() / 2.0).sqrt()
    }
}

pub fn ks_critical_value(alpha: f64, n: usize, m: usize) -> f64 {
    ks_coefficient(alpha) * (((n + m) as f64) / ((n * m) as f64)).sqrt()
}

/// Two-sample Kolmogorov-Smirnov test: D is the supremum over pooled
/// points of |F_a - F_b|; reject when D exceeds the asymptotic critical
/// value at `alpha`.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::contract("KS test requires non-empty samples"));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n || j < m {
        let v = match (xs.get(i), ys.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let critical_value = ks_critical_value(alpha, n, m);
    Ok(KsResult {
        d_statistic: d,
        n,
        m,
        alpha,
        critical_value,
        reject: d > critical_value,
    })
}

/// Cross-correlations at lags -max_lag..=+max_lag.
///
/// Entry for lag k is the Pearson correlation of pairs (x_t, y_{t+k}) over
/// every index where both sides are defined, normalized by that overlap's
/// own means and deviations. With y equal to x shifted forward by one
/// index (y_t = x_{t-1}), the peak lands at lag +1.
#[derive(Debug, Clone, PartialEq)]
pub struct CcfVector {
    pub max_lag: usize,
    /// values[k] is the correlation at lag k - max_lag.
    pub values: Vec<f64>,
}

impl CcfVector {
    pub fn at_lag(&self, lag: i64) -> f64 {
        self.values[(lag + self.max_lag as i64) as usize]
    }
}

fn pearson(pairs: &[(f64, f64)]) -> Result<f64> {
    let n = pairs.len();
    if n < 2 {
        return Err(Error::contract(format!(
            "correlation overlap has {n} points (< 2)"
        )));
    }
    let nf = n as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::contract(
            "correlation undefined: zero variance in overlap",
        ));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Lagged cross-correlation of two equal-length sequences with holes
/// (`None` entries are dropped pairwise at each lag).
pub fn ccf_lags(x: &[Option<f64>], y: &[Option<f64>], max_lag: usize) -> Result<CcfVector> {
    if x.len() != y.len() {
        return Err(Error::contract("sequences must have equal length"));
    }
    if x.len() < 2 * max_lag + 2 {
        return Err(Error::contract(format!(
            "sequence length {} too short for max_lag {max_lag}",
            x.len()
        )));
    }
    let n = x.len() as i64;
    let mut values = Vec::with_capacity(2 * max_lag + 1);
    for lag in -(max_lag as i64)..=max_lag as i64 {
        let mut pairs = Vec::new();
        for t in 0..n {
            let u = t + lag;
            if u < 0 || u >= n {
                continue;
            }
            if let (Some(a), Some(b)) = (x[t as usize], y[u as usize]) {
                pairs.push((a, b));
            }
        }
        values.push(pearson(&pairs)?);
    }
    Ok(CcfVector { max_lag, values })
}

/// Convenience for hole-free slices.
pub fn ccf_lags_dense(x: &[f64], y: &[f64], max_lag: usize) -> Result<CcfVector> {
    let xo: Vec<Option<f64>> = x.iter().copied().map(Some).collect();
    let yo: Vec<Option<f64>> = y.iter().copied().map(Some).collect();
    ccf_lags(&xo, &yo, max_lag)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    /// Set when the paired differences had zero variance around a nonzero
    /// mean, forcing rejection with p ~ 0.
    pub zero_variance: bool,
}

/// Two-sided Student-t p-value for even degrees of freedom, via the
/// elementary closed-form CDF
///   P(|T| <= t) = u * sum_{j<df/2} c_j (1 - u^2)^j,
///   u = t / sqrt(df + t^2),  c_0 = 1,  c_j = c_{j-1} (2j-1) / (2j).
fn student_t_two_sided_p(t: f64, df: usize) -> f64 {
    assert!(df >= 2 && df.is_multiple_of(2), "even df only (paired design uses 6)");
    let t = t.abs();
    let u = t / (df as f64 + t * t).sqrt();
    let one_minus_u2 = 1.0 - u * u;
    let mut coeff = 1.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..df / 2 {
        coeff *= (2 * j - 1) as f64 / (2 * j) as f64;
        term *= one_minus_u2;
        sum += coeff * term;
    }
    (1.0 - u * sum).clamp(0.0, 1.0)
}

/// Paired t-test on the 7 lag differences of two cross-correlation
/// vectors (df = 6), two-sided, rejecting when p < alpha.
pub fn paired_t_test(v1: &CcfVector, v2: &CcfVector, alpha: f64) -> Result<TTestResult> {
    if v1.values.len() != 7 || v2.values.len() != 7 {
        return Err(Error::contract(format!(
            "paired t-test expects length-7 vectors, got {} and {}",
            v1.values.len(),
            v2.values.len()
        )));
    }
    let diffs: Vec<f64> = v1
        .values
        .iter()
        .zip(&v2.values)
        .map(|(a, b)| a - b)
        .collect();
    let n = diffs.len() as f64;
    let df = diffs.len() - 1;
    let mean = diffs.iter().sum::<f64>() / n;
    let ss: f64 = diffs.iter().map(|d| (d - mean) * (d - mean)).sum();
    let sd = (ss / (n - 1.0)).sqrt();

    // Bitwise-constant differences hit the degenerate branch even when the
    // mean rounds a hair away from the repeated value.
    let constant = diffs.windows(2).all(|w| w[0] == w[1]);
    if sd == 0.0 || constant {
        return Ok(if mean == 0.0 || (constant && diffs[0] == 0.0) {
            TTestResult {
                t_statistic: 0.0,
                degrees_of_freedom: df,
                p_value: 1.0,
                alpha,
                reject: false,
                zero_variance: false,
            }
        } else {
            TTestResult {
                t_statistic: if mean > 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                },
                degrees_of_freedom: df,
                p_value: 0.0,
                alpha,
                reject: true,
                zero_variance: true,
            }
        });
    }
    let t = mean / (sd / n.sqrt());
    let p = student_t_two_sided_p(t, df);
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p,
        alpha,
        reject: p < alpha,
        zero_variance: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CccResult {
    pub ccc: f64,
    pub pearson_r: f64,
    /// Agreement gate used by the map summary.
    pub pass_095: bool,
}

/// Lin's concordance correlation coefficient with population (1/n)
/// moments: 2 s_xy / (s_x^2 + s_y^2 + (mean_x - mean_y)^2).
pub fn lin_ccc(x: &[f64], y: &[f64]) -> Result<CccResult> {
    if x.len() != y.len() {
        return Err(Error::contract("sequences must have equal length"));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::contract("concordance requires >= 2 points"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy /= nf;
    sxx /= nf;
    syy /= nf;
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::contract("concordance undefined: zero variance"));
    }
    let ccc = 2.0 * sxy / (sxx + syy + (mx - my) * (mx - my));
    Ok(CccResult {
        ccc,
        pearson_r: sxy / (sxx * syy).sqrt(),
        pass_095: ccc > 0.95,
    })
}

/// The three map-comparison outcomes for one (map tag, ESA step).
#[derive(Debug, Clone)]
pub struct MapTestTriple {
    pub ks: KsResult,
    pub ccf_t: TTestResult,
    pub ccc: CccResult,
}

#[derive(Debug, Clone)]
pub struct MapTestCell {
    pub map_tag: String,
    pub esa: EsaStep,
    /// `None` when the cell could not be tested (e.g. an empty map);
    /// excluded from every denominator.
    pub triple: Option<MapTestTriple>,
}

/// One summarized row: the three pass booleans, or None when untested.
pub type PassTriple = Option<[bool; 3]>;

#[derive(Debug, Clone)]
pub struct MapTestSummary {
    pub alpha: f64,
    /// Per-test alpha after the optional Bonferroni correction.
    pub per_test_alpha: f64,
    pub map_tags: Vec<String>,
    pub esa_steps: Vec<EsaStep>,
    /// passes[map][esa] aligned with `map_tags` x `esa_steps`.
    pub passes: Vec<Vec<PassTriple>>,
    /// case_pct[esa][k] = percentage of tested maps passing >= k+1 tests.
    pub case_pct_by_esa: Vec<[f64; 3]>,
    /// Overall percentages passing >= 1, >= 2, all 3 tests.
    pub case_pct_overall: [f64; 3],
    pub untested: usize,
}

/// Tabulate per-map, per-ESA pass/fail for the three tests and the
/// case-1/2/3 percentages. With `bonferroni`, each test re-decides at
/// alpha/3 (Lin's concordance keeps its fixed 0.95 gate).
pub fn summarize_map_tests(
    cells: &[MapTestCell],
    alpha: f64,
    bonferroni: bool,
) -> MapTestSummary {
    let per_test_alpha = if bonferroni { alpha / 3.0 } else { alpha };
    let mut map_tags: Vec<String> = cells.iter().map(|c| c.map_tag.clone()).collect();
    map_tags.dedup();
    let mut esa_steps: Vec<EsaStep> = cells.iter().map(|c| c.esa).collect();
    esa_steps.sort_unstable();
    esa_steps.dedup();

    let mut passes = vec![vec![None; esa_steps.len()]; map_tags.len()];
    let mut untested = 0usize;
    for cell in cells {
        let mi = map_tags.iter().position(|t| *t == cell.map_tag).expect("tag");
        let ei = esa_steps.iter().position(|e| *e == cell.esa).expect("esa");
        match &cell.triple {
            None => untested += 1,
            Some(triple) => {
                let ks_pass = triple.ks.d_statistic
                    <= ks_critical_value(per_test_alpha, triple.ks.n, triple.ks.m);
                let ccf_pass = triple.ccf_t.p_value >= per_test_alpha;
                let ccc_pass = triple.ccc.pass_095;
                passes[mi][ei] = Some([ks_pass, ccf_pass, ccc_pass]);
            }
        }
    }

    let pct = |hits: usize, n: usize| {
        if n == 0 {
            0.0
        } else {
            100.0 * hits as f64 / n as f64
        }
    };
    let mut case_pct_by_esa = Vec::with_capacity(esa_steps.len());
    for ei in 0..esa_steps.len() {
        let tested: Vec<&[bool; 3]> = passes
            .iter()
            .filter_map(|row| row[ei].as_ref())
            .collect();
        let mut out = [0.0; 3];
        for (k, slot) in out.iter_mut().enumerate() {
            let hits = tested
                .iter()
                .filter(|t| t.iter().filter(|&&b| b).count() > k)
                .count();
            *slot = pct(hits, tested.len());
        }
        case_pct_by_esa.push(out);
    }
    let all_tested: Vec<&[bool; 3]> = passes
        .iter()
        .flat_map(|row| row.iter().filter_map(|c| c.as_ref()))
        .collect();
    let mut case_pct_overall = [0.0; 3];
    for (k, slot) in case_pct_overall.iter_mut().enumerate() {
        let hits = all_tested
            .iter()
            .filter(|t| t.iter().filter(|&&b| b).count() > k)
            .count();
        *slot = pct(hits, all_tested.len());
    }

    MapTestSummary {
        alpha,
        per_test_alpha,
        map_tags,
        esa_steps,
        passes,
        case_pct_by_esa,
        case_pct_overall,
        untested,
    }
}

impl MapTestSummary {
    /// Human-readable report: rows = map tags, columns = test x ESA step.
    pub fn render_report(&self) -> String {
        let mut out = String::new();
        let esas: Vec<String> = self.esa_steps.iter().map(|e| e.to_string()).collect();
        out.push_str(&format!(
            "Map test summary (alpha = {}, per-test alpha = {})\n",
            self.alpha, self.per_test_alpha
        ));
        out.push_str(&format!(
            "{:<8} | {:^width$} | {:^width$} | {:^width$}\n",
            "map",
            "eCDF (KS)",
            "CCF (t)",
            "CCC>0.95",
            width = esas.len() * 5 - 1
        ));
        out.push_str(&format!(
            "{:<8} | {} | {} | {}\n",
            "ESA",
            esas.iter().map(|e| format!("{e:>4}")).collect::<String>(),
            esas.iter().map(|e| format!("{e:>4}")).collect::<String>(),
            esas.iter().map(|e| format!("{e:>4}")).collect::<String>(),
        ));
        for (mi, tag) in self.map_tags.iter().enumerate() {
            let mut cols = [String::new(), String::new(), String::new()];
            for cell in &self.passes[mi] {
                for (t, col) in cols.iter_mut().enumerate() {
                    let mark = match cell {
                        Some(p) => {
                            if p[t] {
                                "pass"
                            } else {
                                "FAIL"
                            }
                        }
                        None => "  --",
                    };
                    col.push_str(&format!("{mark:>4} "));
                }
            }
            out.push_str(&format!(
                "{tag:<8} | {}| {}| {}\n",
                cols[0], cols[1], cols[2]
            ));
        }
        for (k, label) in ["case 1 (>=1 test)", "case 2 (>=2 tests)", "case 3 (all 3)"]
            .iter()
            .enumerate()
        {
            let per_esa: Vec<String> = self
                .esa_steps
                .iter()
                .zip(&self.case_pct_by_esa)
                .map(|(e, p)| format!("ESA {e}: {:.1}%", p[k]))
                .collect();
            out.push_str(&format!(
                "{label}: {:.1}% overall ({})\n",
                self.case_pct_overall[k],
                per_esa.join(", ")
            ));
        }
        if self.untested > 0 {
            out.push_str(&format!("untested cells: {}\n", self.untested));
        }
        out
    }

    /// Machine-readable rows `map,esa,ks_pass,ccf_pass,ccc_pass`
    /// (empty booleans for untested cells).
    pub fn render_csv(&self) -> String {
        let mut out = String::from("map,esa,ks_pass,ccf_pass,ccc_pass\n");
        for (mi, tag) in self.map_tags.iter().enumerate() {
            for (ei, esa) in self.esa_steps.iter().enumerate() {
                match &self.passes[mi][ei] {
                    Some(p) => out.push_str(&format!(
                        "{tag},{esa},{},{},{}\n",
                        p[0] as u8, p[1] as u8, p[2] as u8
                    )),
                    None => out.push_str(&format!("{tag},{esa},,,\n")),
                }
            }
        }
        out
    }
}
