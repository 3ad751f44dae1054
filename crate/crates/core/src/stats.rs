//! Statistical suite: Pearson correlation, simple linear regression, Welch's
//! t-test with Cohen's d, one-way ANOVA with partial eta squared, and the
//! Student-t / F tail probabilities behind them.
//!
//! Tail probabilities go through the regularized incomplete beta function,
//! evaluated with Lentz's continued fraction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Feature, FeatureTable};
use crate::ingest::{ScoreTable, VisitMonth};
use crate::scales::ScaleKind;

const CF_MAX_ITER: usize = 10_000;
const CF_EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;

/// ln Γ(x) for x > 0, Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided Student-t probability P(|T| >= |t|) with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) {
        return Err(Error::precondition(format!("degrees of freedom must be positive, got {df}")));
    }
    if t.is_nan() {
        return Err(Error::precondition("t statistic is NaN"));
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    let x = df / (df + t * t);
    Ok(regularized_incomplete_beta(df / 2.0, 0.5, x).clamp(0.0, 1.0))
}

/// Upper-tail probability P(F >= f) for an F(df1, df2) variate.
pub fn f_upper_tail_p(f: f64, df1: f64, df2: f64) -> Result<f64> {
    if f.is_nan() || f < 0.0 {
        return Err(Error::precondition(format!("F statistic must be non-negative, got {f}")));
    }
    if !(df1 >= 1.0 && df2 >= 1.0) {
        return Err(Error::precondition("F degrees of freedom must be at least 1"));
    }
    if f == 0.0 {
        return Ok(1.0);
    }
    if f.is_infinite() {
        return Ok(0.0);
    }
    let x = df2 / (df2 + df1 * f);
    Ok(regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, x).clamp(0.0, 1.0))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sum of squared deviations from the mean.
fn sum_sq_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum()
}

fn check_pairs(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::precondition(format!(
            "paired samples differ in length ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::precondition("at least 3 pairs are required"));
    }
    Ok(())
}

/// Sample Pearson correlation coefficient.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pairs(xs, ys)?;
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("a sample is constant"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
    /// Two-sided p-value for slope != 0 on n - 2 degrees of freedom.
    pub p_slope: f64,
}

/// Ordinary least squares fit of `ys` on `xs`.
pub fn linreg(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    check_pairs(xs, ys)?;
    let n = xs.len() as f64;
    let (mx, my) = (mean(xs), mean(ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("degenerate design: predictor is constant"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy = sum_sq_dev(ys);
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r = if syy == 0.0 {
        0.0
    } else {
        (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
    };
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let df = n - 2.0;
    let p_slope = if slope == 0.0 {
        1.0
    } else if sse == 0.0 {
        0.0
    } else {
        let se = (sse / df / sxx).sqrt();
        student_t_two_sided_p(slope / se, df)?
    };
    Ok(LinearFit {
        slope,
        intercept,
        r,
        p_slope,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    /// Cohen's d with the pooled (n1 + n2 - 2) standard deviation.
    pub d: f64,
}

/// Welch's unequal-variance two-sample t-test.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::precondition("each Welch sample needs at least 2 values"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (ssa, ssb) = (sum_sq_dev(a), sum_sq_dev(b));
    if ssa == 0.0 && ssb == 0.0 {
        return Err(Error::ZeroVariance("both Welch samples are constant"));
    }
    let (va, vb) = (ssa / (na - 1.0), ssb / (nb - 1.0));
    let (qa, qb) = (va / na, vb / nb);
    let se2 = qa + qb;
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let pooled_sd = ((ssa + ssb) / (na + nb - 2.0)).sqrt();
    let d = (ma - mb) / pooled_sd;
    let p = student_t_two_sided_p(t, df)?;
    Ok(WelchResult { t, df, p, d })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
    pub partial_eta2: f64,
    pub ss_between: f64,
    pub ss_within: f64,
}

/// Classical one-way ANOVA across `groups`.
pub fn anova_oneway<G: AsRef<[f64]>>(groups: &[G]) -> Result<AnovaResult> {
    let k = groups.len();
    if k < 2 {
        return Err(Error::precondition("ANOVA needs at least 2 groups"));
    }
    if groups.iter().any(|g| g.as_ref().is_empty()) {
        return Err(Error::precondition("ANOVA group is empty"));
    }
    let n: usize = groups.iter().map(|g| g.as_ref().len()).sum();
    if n < k + 1 {
        return Err(Error::precondition("ANOVA needs more observations than groups"));
    }
    let grand = groups.iter().flat_map(|g| g.as_ref()).sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let g = g.as_ref();
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand) * (m - grand);
        ss_within += sum_sq_dev(g);
    }
    if ss_within == 0.0 {
        return Err(Error::ZeroVariance("no within-group variation"));
    }
    let (df_b, df_w) = (k - 1, n - k);
    let f = (ss_between / df_b as f64) / (ss_within / df_w as f64);
    Ok(AnovaResult {
        f,
        df_between: df_b,
        df_within: df_w,
        p: f_upper_tail_p(f, df_b as f64, df_w as f64)?,
        partial_eta2: ss_between / (ss_between + ss_within),
        ss_between,
        ss_within,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPoint {
    pub ordinal: u32,
    pub sample_size: usize,
    pub pearson_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub feature: Feature,
    pub scale: ScaleKind,
    /// `None` pools both visits.
    pub visit_month: Option<VisitMonth>,
    pub points: Vec<CorrelationPoint>,
}

/// (feature of the k-th smile, score) pairs across sessions that have a k-th
/// smile and a score on `scale`.
pub fn ordinal_pairs(
    tables: &[FeatureTable],
    scores: &ScoreTable,
    feature: Feature,
    scale: ScaleKind,
    visit: Option<VisitMonth>,
    ordinal: u32,
) -> (Vec<f64>, Vec<f64>) {
    tables
        .iter()
        .filter(|t| visit.is_none_or(|v| v == t.visit_month))
        .filter_map(|t| {
            let s = scores.score(&t.mother_id, t.visit_month, scale)?;
            let f = t.smile(ordinal)?;
            Some((f.get(feature), s.value() as f64))
        })
        .unzip()
}

fn max_ordinal(tables: &[FeatureTable]) -> u32 {
    tables.iter().map(|t| t.count() as u32).max().unwrap_or(0)
}

/// Correlation between a feature of the k-th smile and the score, for every k
/// with at least 3 contributing sessions. Ordinals where the correlation is
/// undefined (a constant sample) are skipped.
pub fn smile_index_correlations(
    tables: &[FeatureTable],
    scores: &ScoreTable,
    feature: Feature,
    scale: ScaleKind,
    visit: Option<VisitMonth>,
) -> CorrelationSeries {
    let points = (1..=max_ordinal(tables))
        .filter_map(|k| {
            let (xs, ys) = ordinal_pairs(tables, scores, feature, scale, visit, k);
            if xs.len() < 3 {
                return None;
            }
            pearson_r(&xs, &ys).ok().map(|r| CorrelationPoint {
                ordinal: k,
                sample_size: xs.len(),
                pearson_r: r,
            })
        })
        .collect();
    CorrelationSeries {
        feature,
        scale,
        visit_month: visit,
        points,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    pub alpha: f64,
    /// Mean slope p-value per feature over all (ordinal, scale) cells.
    pub mean_p: BTreeMap<Feature, f64>,
    /// Number of regressions behind each mean.
    pub cells: BTreeMap<Feature, usize>,
    pub selected: Vec<Feature>,
}

/// Averages the per-(ordinal, scale) regression p-values of each feature and
/// keeps the features whose mean is at or below `alpha`. A feature with no
/// computable regression gets mean p = 1.
pub fn select_significant_features(
    tables: &[FeatureTable],
    scores: &ScoreTable,
    scales: &[ScaleKind],
    alpha: f64,
    visit: Option<VisitMonth>,
) -> FeatureSelection {
    let mut mean_p = BTreeMap::new();
    let mut cells = BTreeMap::new();
    let mut selected = Vec::new();
    for feature in Feature::ALL {
        let mut ps = Vec::new();
        for &scale in scales {
            for k in 1..=max_ordinal(tables) {
                let (xs, ys) = ordinal_pairs(tables, scores, feature, scale, visit, k);
                if xs.len() < 3 {
                    continue;
                }
                if let Ok(fit) = linreg(&xs, &ys) {
                    ps.push(fit.p_slope);
                }
            }
        }
        let m = if ps.is_empty() { 1.0 } else { mean(&ps) };
        if m <= alpha {
            selected.push(feature);
        }
        mean_p.insert(feature, m);
        cells.insert(feature, ps.len());
    }
    FeatureSelection {
        alpha,
        mean_p,
        cells,
        selected,
    }
}
