//! Univariate association between a feature and closeness: Pearson r, the
//! regression F statistic with (1, n - 2) degrees of freedom, and its p-value.

mod special;

pub use special::{ln_beta, ln_gamma, regularized_incomplete_beta};

use crate::error::{Error, Result};

/// p-values below this are reported as exactly zero.
pub const P_VALUE_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionResult {
    pub feature: String,
    pub n: usize,
    pub r: f64,
    pub f_value: f64,
    pub p_value: f64,
}

/// Product-moment correlation of two equally long samples.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::domain(format!(
            "sample lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Degenerate(format!(
            "need at least 3 observations, got {n}"
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite value in sample".into()));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(Error::Degenerate("feature column is constant".into()));
    }
    if syy == 0.0 {
        return Err(Error::Degenerate("target column is constant".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// `F = r² (n - 2) / (1 - r²)`. Correlations within a few ulps of ±1 count as perfect.
pub fn f_from_r(r: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::domain(format!("F needs n >= 3, got {n}")));
    }
    if !(r.abs() <= 1.0) {
        return Err(Error::domain(format!("correlation {r} outside [-1, 1]")));
    }
    // Exactly collinear samples come out of pearson_r a few ulps short of 1.
    if 1.0 - r.abs() <= 4.0 * f64::EPSILON {
        return Err(Error::InfiniteF);
    }
    let r2 = r * r;
    Ok(r2 * (n - 2) as f64 / (1.0 - r2))
}

/// Survival function `P(F > f)` of the F distribution with `(df1, df2)` degrees of freedom.
pub fn f_sf(f: f64, df1: f64, df2: f64) -> Result<f64> {
    if !(df1 > 0.0 && df2 > 0.0) || !df1.is_finite() || !df2.is_finite() {
        return Err(Error::domain(format!(
            "invalid degrees of freedom ({df1}, {df2})"
        )));
    }
    if !(f >= 0.0) {
        return Err(Error::domain(format!("F statistic must be >= 0, got {f}")));
    }
    if f == 0.0 {
        return Ok(1.0);
    }
    if f.is_infinite() {
        return Ok(0.0);
    }
    // P(F > f) = I_x(df2/2, df1/2) with x = df2 / (df2 + df1 f).
    let denom = df2 + df1 * f;
    let p = special::betainc_xy(df2 / 2.0, df1 / 2.0, df2 / denom, df1 * f / denom)?;
    Ok(if p < P_VALUE_FLOOR { 0.0 } else { p.min(1.0) })
}

/// Correlates `x` with `y` and converts r into F and its p-value.
pub fn univariate_f_test(feature: &str, x: &[f64], y: &[f64]) -> Result<RegressionResult> {
    let r = pearson_r(x, y)?;
    let n = x.len();
    let f_value = f_from_r(r, n)?;
    let p_value = f_sf(f_value, 1.0, (n - 2) as f64)?;
    Ok(RegressionResult {
        feature: feature.to_owned(),
        n,
        r,
        f_value,
        p_value,
    })
}
