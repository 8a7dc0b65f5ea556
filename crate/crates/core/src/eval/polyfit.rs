use crate::error::{Error, Result};

/// Least-squares cubic `c0 + c1·x + c2·x² + c3·x³`.
///
/// Solved by Householder QR on a centred and scaled Vandermonde matrix, then
/// mapped back to the raw-`x` basis.
pub fn polyfit3(x: &[f64], y: &[f64]) -> Result<[f64; 4]> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            context: "polyfit3",
            expected: x.len(),
            actual: y.len(),
        });
    }
    let mut distinct = x.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "cubic fit needs at least 4 distinct x values, got {}",
            distinct.len()
        )));
    }
    let n = x.len();
    let centre = x.iter().sum::<f64>() / n as f64;
    let scale = x.iter().map(|v| (v - centre).abs()).fold(0.0, f64::max);

    // column-major design matrix
    let mut a: Vec<[f64; 4]> = x
        .iter()
        .map(|&v| {
            let t = (v - centre) / scale;
            [1.0, t, t * t, t * t * t]
        })
        .collect();
    let mut b = y.to_vec();
    let mut r_diag = [0.0; 4];
    for k in 0..4 {
        let norm = a[k..].iter().map(|row| row[k] * row[k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Numerical("rank-deficient cubic design".into()));
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k..].iter().map(|row| row[k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|e| e * e).sum();
        if vnorm2 > 0.0 {
            for col in k..4 {
                let dot: f64 = v.iter().zip(&a[k..]).map(|(vi, row)| vi * row[col]).sum();
                let f = 2.0 * dot / vnorm2;
                for (vi, row) in v.iter().zip(a[k..].iter_mut()) {
                    row[col] -= f * vi;
                }
            }
            let dot: f64 = v.iter().zip(&b[k..]).map(|(vi, bi)| vi * bi).sum();
            let f = 2.0 * dot / vnorm2;
            for (vi, bi) in v.iter().zip(b[k..].iter_mut()) {
                *bi -= f * vi;
            }
        }
        r_diag[k] = a[k][k];
    }
    let biggest = r_diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if r_diag.iter().any(|d| d.abs() <= biggest * 1e-12) {
        return Err(Error::Numerical("rank-deficient cubic design".into()));
    }
    let mut t_coef = [0.0; 4];
    for k in (0..4).rev() {
        let mut acc = b[k];
        for j in k + 1..4 {
            acc -= a[k][j] * t_coef[j];
        }
        t_coef[k] = acc / a[k][k];
    }

    // (x − centre)^k / scale^k expanded in powers of x
    let binom = [
        [1.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0],
        [1.0, 2.0, 1.0, 0.0],
        [1.0, 3.0, 3.0, 1.0],
    ];
    let mut coef = [0.0; 4];
    for (k, &ck) in t_coef.iter().enumerate() {
        let s = ck / scale.powi(k as i32);
        for j in 0..=k {
            coef[j] += s * binom[k][j] * (-centre).powi((k - j) as i32);
        }
    }
    Ok(coef)
}

pub fn polyval3(c: &[f64; 4], x: f64) -> f64 {
    ((c[3] * x + c[2]) * x + c[1]) * x + c[0]
}
