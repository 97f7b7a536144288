//! Least-squares line fits for ladder measurements.

/// Result of a straight-line fit `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points to fit a line");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    LineFit {
        slope,
        intercept,
        r_squared,
        residual: (ss_res / n).sqrt(),
    }
}

/// Fit `log(y) = slope * log(x) + c`. Returns `None` if every `y` sits at or
/// below `floor`, in which case the decay is below measurement precision and
/// any finite slope bound is met trivially.
pub fn fit_loglog(xs: &[f64], ys: &[f64], floor: f64) -> Option<LineFit> {
    if ys.iter().all(|&y| y <= floor) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.max(floor).ln()).collect();
    Some(fit_line(&lx, &ly))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| -1.5 * x + 0.25).collect();
        let fit = fit_line(&xs, &ys);
        assert!((fit.slope + 1.5).abs() < 1e-12);
        assert!((fit.intercept - 0.25).abs() < 1e-12);
        assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn loglog_power_law() {
        let xs: [f64; 4] = [10.0, 20.0, 40.0, 80.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-2.0)).collect();
        let fit = fit_loglog(&xs, &ys, 1e-30).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-10);
    }

    #[test]
    fn loglog_all_below_floor() {
        let xs = [10.0, 20.0];
        let ys = [0.0, 1e-16];
        assert!(fit_loglog(&xs, &ys, 1e-13).is_none());
    }
}
