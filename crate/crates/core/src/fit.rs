//! Least-squares fits used to summarize decay curves.

/// Slope and intercept of the least-squares line through `(ln x, ln y)`.
/// Points with a non-positive coordinate are skipped; `None` when fewer than
/// two usable points remain or all abscissae coincide.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Relative deviation `|a - b| / |b|`.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = (0..6).map(|k| {
            let x = 2f64.powi(-k);
            (x, 3.0 * x.powf(0.75))
        }).collect();
        let (s, c) = loglog_slope(&pts).unwrap();
        assert!((s - 0.75).abs() < 1e-12);
        assert!((c - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(loglog_slope(&[(1.0, 1.0)]).is_none());
        assert!(loglog_slope(&[(1.0, 1.0), (1.0, 2.0)]).is_none());
        assert!(loglog_slope(&[(1.0, 0.0), (2.0, 1.0)]).is_none());
    }
}
