//! Brute-force reference statistics.
//!
//! Sums of squares use pairwise differences instead of deviations from the
//! mean, ln-gamma uses a Stirling series after upward recurrence, and tail
//! probabilities integrate the density numerically. None of it shares code
//! or formulas with the library under test.
#![allow(dead_code)]

use std::f64::consts::PI;

pub fn ln_gamma(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 15.0 {
        shift -= x.ln();
        x += 1.0;
    }
    let x2 = x * x;
    let series = 1.0 / (12.0 * x) - 1.0 / (360.0 * x * x2) + 1.0 / (1260.0 * x2 * x2 * x)
        - 1.0 / (1680.0 * x2 * x2 * x2 * x)
        + 1.0 / (1188.0 * x2 * x2 * x2 * x2 * x);
    shift + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + series
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// Integral of `f` over [a, b] to roughly `rel` relative accuracy.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel: f64) -> f64 {
    // A coarse composite pass sets the scale of the tolerance.
    let n = 64;
    let h = (b - a) / n as f64;
    let mut total = 0.0;
    let mut pieces = Vec::with_capacity(n);
    for i in 0..n {
        let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
        let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
        let s = h / 6.0 * (f0 + 4.0 * fm + f1);
        total += s.abs();
        pieces.push((x0, x1, f0, fm, f1, s));
    }
    let tol = rel * total / n as f64;
    pieces
        .into_iter()
        .map(|(x0, x1, f0, fm, f1, s)| simpson(f, x0, x1, f0, fm, f1, s, tol, 40))
        .sum()
}

/// Two-sided Student t tail, integrating the density from |t| to infinity
/// through s = |t| / u.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    let t = t.abs();
    if t == 0.0 {
        return 1.0;
    }
    let ln_c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * PI).ln();
    let density = |s: f64| (ln_c - (df + 1.0) / 2.0 * (s * s / df).ln_1p()).exp();
    let g = |u: f64| if u == 0.0 { 0.0 } else { density(t / u) * t / (u * u) };
    2.0 * integrate(&g, 0.0, 1.0, 1e-13)
}

/// Upper tail of F(d1, d2) beyond `f`, through x = f / u.
pub fn f_upper(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    let ln_b = ln_gamma(d1 / 2.0) + ln_gamma(d2 / 2.0) - ln_gamma((d1 + d2) / 2.0);
    let density = |x: f64| {
        (0.5 * d1 * (d1 / d2).ln() + (0.5 * d1 - 1.0) * x.ln()
            - 0.5 * (d1 + d2) * (d1 * x / d2).ln_1p()
            - ln_b)
            .exp()
    };
    let g = |u: f64| if u == 0.0 { 0.0 } else { density(f / u) * f / (u * u) };
    integrate(&g, 0.0, 1.0, 1e-13)
}

fn pair_ss(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            s += (x[i] - x[j]) * (x[i] - x[j]);
        }
    }
    s / x.len() as f64
}

fn pair_sp(x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            s += (x[i] - x[j]) * (y[i] - y[j]);
        }
    }
    s / x.len() as f64
}

fn avg(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    pair_sp(x, y) / (pair_ss(x) * pair_ss(y)).sqrt()
}

/// `(slope, intercept, r, p)`.
pub fn linreg(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let slope = pair_sp(x, y) / pair_ss(x);
    let intercept = avg(y) - slope * avg(x);
    let r = pearson(x, y);
    let df = x.len() as f64 - 2.0;
    let t = r * (df / (1.0 - r * r)).sqrt();
    (slope, intercept, r, t_two_sided(t, df))
}

/// `(t, df, p, d)`.
pub fn welch(a: &[f64], b: &[f64]) -> (f64, f64, f64, f64) {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (pair_ss(a) / (na - 1.0), pair_ss(b) / (nb - 1.0));
    let (qa, qb) = (va / na, vb / nb);
    let t = (avg(a) - avg(b)) / (qa + qb).sqrt();
    let df = (qa + qb).powi(2) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let pooled = (((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0)).sqrt();
    (t, df, t_two_sided(t, df), (avg(a) - avg(b)) / pooled)
}

/// `(f, p, partial eta squared)`.
pub fn anova(groups: &[Vec<f64>]) -> (f64, f64, f64) {
    let n: usize = groups.iter().map(Vec::len).sum();
    let k = groups.len();
    let within: f64 = groups.iter().map(|g| pair_ss(g)).sum();
    let mut between = 0.0;
    for g in 0..k {
        for h in g + 1..k {
            let (ng, nh) = (groups[g].len() as f64, groups[h].len() as f64);
            let d = avg(&groups[g]) - avg(&groups[h]);
            between += ng * nh * d * d;
        }
    }
    between /= n as f64;
    let (d1, d2) = ((k - 1) as f64, (n - k) as f64);
    let f = (between / d1) / (within / d2);
    (f, f_upper(f, d1, d2), between / (between + within))
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}
