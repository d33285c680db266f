//! Least-squares line fits used by the rate estimators.

/// Result of fitting `y ≈ intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Some(LineFit { slope, intercept, residual: (ss / nf).sqrt() })
}

/// Fits `log y ≈ a + s log x` over positive samples.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).unzip();
    fit_line(&lx, &ly)
}

/// Fits `log y ≈ a + s x` over positive samples.
pub fn fit_exponential(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x.iter().zip(y).filter(|(_, b)| **b > 0.0).map(|(a, b)| (*a, b.ln())).unzip();
    fit_line(&lx, &ly)
}

/// `y ≈ a + b x^s` with `s` on a uniform grid over `[s_min, s_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetPowerFit {
    pub offset: f64,
    pub coef: f64,
    pub exponent: f64,
    pub residual: f64,
}

/// Least-squares `y ≈ a + b x^s`; `s` is found by a grid search with step `1e-3`.
pub fn fit_offset_power_law(x: &[f64], y: &[f64], s_min: f64, s_max: f64) -> Option<OffsetPowerFit> {
    if x.len() < 3 || x.iter().any(|v| *v <= 0.0) {
        return None;
    }
    let steps = ((s_max - s_min) / 1e-3).round() as usize;
    let mut best: Option<OffsetPowerFit> = None;
    for i in 0..=steps {
        let s = s_min + (s_max - s_min) * i as f64 / steps.max(1) as f64;
        if s.abs() < 1e-9 {
            continue;
        }
        let xs: Vec<f64> = x.iter().map(|v| v.powf(s)).collect();
        if let Some(f) = fit_line(&xs, y) {
            if best.is_none_or(|b| f.residual < b.residual) {
                best = Some(OffsetPowerFit { offset: f.intercept, coef: f.slope, exponent: s, residual: f.residual });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offset_power_law() {
        let x: Vec<f64> = (1..16).map(|k| k as f64 * 3.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 15.0 + 0.7 * v.sqrt()).collect();
        let f = fit_offset_power_law(&x, &y, -2.0, 2.0).unwrap();
        assert!((f.exponent - 0.5).abs() < 2e-3);
        assert!((f.offset - 15.0).abs() < 0.05);
    }

    #[test]
    fn exact_power_law() {
        let x: Vec<f64> = (1..20).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(-1.5)).collect();
        let f = fit_power_law(&x, &y).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12);
        assert!(f.residual < 1e-12);
    }
}
