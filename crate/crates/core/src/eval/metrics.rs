use crate::error::{Error, Result};

/// Pearson correlation
/// `(nΣuv − ΣuΣv) / √([nΣu² − (Σu)²][nΣv² − (Σv)²])`,
/// evaluated through centred sums (algebraically identical, better rounded).
pub fn corr_coeff(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Dimension {
            context: "corr_coeff",
            expected: u.len(),
            actual: v.len(),
        });
    }
    if u.len() < 2 {
        return Err(Error::UndefinedMetric("correlation needs at least two points".into()));
    }
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let (mut suv, mut suu, mut svv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        let (da, db) = (a - mu, b - mv);
        suv += da * db;
        suu += da * da;
        svv += db * db;
    }
    if suu == 0.0 || svv == 0.0 {
        return Err(Error::UndefinedMetric("correlation of a constant series".into()));
    }
    Ok((suv / (suu.sqrt() * svv.sqrt())).clamp(-1.0, 1.0))
}

/// Relative mean absolute error and how many zero actuals were skipped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mae {
    pub value: f64,
    pub skipped: usize,
}

/// `(1/n) Σ |uᵢ − vᵢ| / uᵢ` over the terms with `uᵢ ≠ 0`.
pub fn mae(actual: &[f64], estimated: &[f64]) -> Result<Mae> {
    if actual.len() != estimated.len() {
        return Err(Error::Dimension {
            context: "mae",
            expected: actual.len(),
            actual: estimated.len(),
        });
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    for (&u, &v) in actual.iter().zip(estimated) {
        if u == 0.0 {
            continue;
        }
        sum += (u - v).abs() / u;
        used += 1;
    }
    if used == 0 {
        return Err(Error::UndefinedMetric("every actual value is zero".into()));
    }
    Ok(Mae {
        value: sum / used as f64,
        skipped: actual.len() - used,
    })
}
