//! Stability exponent and probe-parameter selection.

use crate::error::{Error, Result};

/// Exact rational, reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

impl Rational {
    fn reduced(num: i64, den: i64) -> Self {
        fn gcd(a: i64, b: i64) -> i64 {
            if b == 0 {
                a.abs()
            } else {
                gcd(b, a % b)
            }
        }
        let g = gcd(num, den).max(1);
        Self {
            num: num / g,
            den: den / g,
        }
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl std::fmt::Display for Rational {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// The stability exponent `8(m-1) / (2m(m-1)(8s-n+13) + 2m-1)` in exact
/// integer arithmetic.
pub fn sigma_exponent(s: i64, m: i64, n: i64) -> Result<Rational> {
    if m < 4 {
        return Err(Error::ParameterDomain(format!("m = {m} < 4")));
    }
    if 2 * (s + 1) <= n + 1 {
        return Err(Error::ParameterDomain(format!(
            "regularity too low: need s+1 > (n+1)/2, got s = {s}, n = {n}"
        )));
    }
    if n < 1 {
        return Err(Error::ParameterDomain(format!("n = {n} < 1")));
    }
    let num = 8 * (m - 1);
    let den = 2 * m * (m - 1) * (8 * s - n + 13) + 2 * m - 1;
    Ok(Rational::reduced(num, den))
}

/// Parameters selected for a target data discrepancy.
#[derive(Debug, Clone, Copy)]
pub struct OptimalParams {
    pub eps: f64,
    pub tau: f64,
    /// The shrunk auxiliary constant actually used.
    pub kappa0: f64,
    /// The trace-growth weight `(2m-1)(s - n/8 + 13/8)`.
    pub s_hat: f64,
}

/// The error budget balanced by the optimizer:
///
/// ```text
/// f(eps, tau) = 2 tau^{-1/2} + (kappa0^{2m-1} delta / (m M)) eps^{-m}
///               + eps^{m-1} tau^{s_hat} / (m-1)
/// ```
pub fn objective(
    m: usize,
    s_hat: f64,
    delta: f64,
    big_m: f64,
    kappa0: f64,
    eps: f64,
    tau: f64,
) -> f64 {
    let mf = m as f64;
    2.0 / tau.sqrt() + kappa0.powi(2 * m as i32 - 1) * delta / (mf * big_m) * eps.powf(-mf)
        + eps.powf(mf - 1.0) * tau.powf(s_hat) / (mf - 1.0)
}

/// Closed-form critical point of the objective, with the auxiliary constant
/// halved until the frequency floor and the smallness constraint hold.
pub fn optimal_params(
    m: usize,
    s: f64,
    n: usize,
    delta: f64,
    big_m: f64,
    kappa: f64,
    tau0: f64,
) -> Result<OptimalParams> {
    if !(0.0..1.0).contains(&kappa) || kappa == 0.0 {
        return Err(Error::ParameterDomain(format!("kappa = {kappa} not in (0,1)")));
    }
    if delta <= 0.0 || delta >= big_m {
        return Err(Error::ParameterDomain(format!(
            "delta = {delta} not in (0, {big_m})"
        )));
    }
    if m < 4 {
        return Err(Error::ParameterDomain(format!("m = {m} < 4")));
    }
    let mf = m as f64;
    let nf = n as f64;
    let s_hat = (2.0 * mf - 1.0) * (s - nf / 8.0 + 13.0 / 8.0);
    let denom = 2.0 * s_hat * mf + 2.0 * mf - 1.0;
    let base = (mf - 1.0) / s_hat;
    let tau_pref = base.powf(2.0 * (2.0 * mf - 1.0) / denom);
    let tau_expo = -2.0 * (mf - 1.0) / denom;
    let eps_pref = base.powf(-2.0 * s_hat / denom);
    let eps_expo =
        (4.0 * s_hat * mf + 2.0 * mf - 1.0 - 2.0 * s_hat) / (denom * (2.0 * mf - 1.0));

    let mut kappa0 = kappa;
    for _ in 0..4000 {
        let gamma0 = kappa0.powi(2 * m as i32 - 1) / big_m;
        let gd = gamma0 * delta;
        let tau = tau_pref * gd.powf(tau_expo);
        let eps = eps_pref * gd.powf(eps_expo);
        let constraint = eps * tau.powf(s_hat / (2.0 * mf - 1.0));
        if tau >= tau0 && constraint <= kappa {
            return Ok(OptimalParams {
                eps,
                tau,
                kappa0,
                s_hat,
            });
        }
        kappa0 *= 0.5;
    }
    Err(Error::ParameterDomain(
        "parameter shrinking failed to reach the frequency floor".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exponent_values_from_the_display() {
        let a = sigma_exponent(2, 4, 2).unwrap();
        assert_eq!((a.num, a.den), (24, 655));
        let b = sigma_exponent(2, 4, 3).unwrap();
        assert_eq!((b.num, b.den), (24, 631));
    }

    #[test]
    fn exponent_monotone_in_s() {
        for n in [2i64, 3] {
            for m in [4i64, 5, 6] {
                let mut prev = f64::INFINITY;
                for s in 2..8 {
                    let val = sigma_exponent(s, m, n).unwrap().value();
                    assert!(val < prev, "sigma should strictly decrease in s");
                    prev = val;
                }
            }
        }
    }

    #[test]
    fn exponent_matches_float_evaluation() {
        // 20 pseudo-random in-domain triples against direct evaluation.
        let mut state = 0x12345678u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            state >> 33
        };
        for _ in 0..20 {
            let s = 2 + (next() % 6) as i64;
            let m = 4 + (next() % 5) as i64;
            let n = 1 + (next() % 3) as i64;
            let r = sigma_exponent(s, m, n).unwrap();
            let direct = 8.0 * (m as f64 - 1.0)
                / (2.0 * m as f64 * (m as f64 - 1.0) * (8 * s - n + 13) as f64
                    + 2.0 * m as f64
                    - 1.0);
            assert_abs_diff_eq!(r.value(), direct, epsilon = 1e-14);
        }
    }

    #[test]
    fn domain_violations_rejected() {
        assert!(sigma_exponent(2, 3, 2).is_err());
        assert!(sigma_exponent(0, 4, 2).is_err());
        assert!(optimal_params(4, 2.0, 2, 2.0, 1.0, 0.5, 1.0).is_err());
        assert!(optimal_params(4, 2.0, 2, 0.5, 1.0, 1.5, 1.0).is_err());
    }

    #[test]
    fn worked_case_constants() {
        // (m, s, n) = (4, 2, 2): s_hat = 23.625; tau = 0.8629 (g0 d)^{-0.030612},
        // eps = 1.6446 (g0 d)^{0.24618}.
        let p = optimal_params(4, 2.0, 2, 1e-3, 1.0, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(p.s_hat, 23.625, epsilon = 1e-12);
        let mf = 4.0_f64;
        let denom = 2.0 * 23.625 * mf + 2.0 * mf - 1.0;
        assert_abs_diff_eq!(denom, 196.0, epsilon = 1e-12);
        let base: f64 = 3.0 / 23.625;
        assert_abs_diff_eq!(
            base.powf(2.0 * 7.0 / 196.0),
            0.8629,
            epsilon = 5e-4
        );
        assert_abs_diff_eq!(base.powf(-2.0 * 23.625 / 196.0), 1.6446, epsilon = 5e-4);
        assert_abs_diff_eq!(2.0 * 3.0 / 196.0, 0.030612, epsilon = 5e-6);
        assert_abs_diff_eq!(
            (4.0 * 23.625 * 4.0 + 7.0 - 2.0 * 23.625) / (196.0 * 7.0),
            0.24618,
            epsilon = 5e-6
        );
        // The returned values satisfy the closed forms.
        let gamma0 = p.kappa0.powi(7) / 1.0;
        let gd = gamma0 * 1e-3;
        assert_abs_diff_eq!(p.tau, base.powf(14.0 / 196.0) * gd.powf(-6.0 / 196.0), epsilon = 1e-12);
    }

    #[test]
    fn smallness_constraint_holds() {
        for (delta, tau0) in [(1e-3, 1.0), (1e-2, 40.0), (0.3, 40.0)] {
            let p = optimal_params(4, 2.0, 2, delta, 1.0, 1e-2, tau0).unwrap();
            assert!(p.tau >= tau0);
            let constraint = p.eps * p.tau.powf(2.0 - 2.0 / 8.0 + 13.0 / 8.0);
            assert!(
                constraint <= 1e-2 * (1.0 + 1e-12),
                "constraint {constraint} violated"
            );
        }
    }

    #[test]
    fn near_optimality_on_log_grid() {
        // 41 x 41 log-grid search around the returned point.
        let (m, s, n, delta, big_m, kappa, tau0) = (4usize, 2.0, 2usize, 1e-3, 1.0, 0.5, 1.0);
        let p = optimal_params(m, s, n, delta, big_m, kappa, tau0).unwrap();
        let f_star = objective(m, p.s_hat, delta, big_m, p.kappa0, p.eps, p.tau);
        let mut min = f64::INFINITY;
        for i in 0..41 {
            for j in 0..41 {
                let le = (i as f64 - 20.0) / 20.0; // +- one e-fold
                let lt = (j as f64 - 20.0) / 20.0;
                let f = objective(
                    m,
                    p.s_hat,
                    delta,
                    big_m,
                    p.kappa0,
                    p.eps * le.exp(),
                    p.tau * lt.exp(),
                );
                min = min.min(f);
            }
        }
        assert!(
            f_star <= 1.01 * min,
            "returned point not near-optimal: {f_star} vs grid {min}"
        );
    }
}
