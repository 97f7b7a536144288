//! Gaussian averaging against C^1 bumps: the quantitative approximate-delta
//! estimate used by the recovery calibration.

/// Gamma function at half-integer arguments: `gamma_half(k)` = Gamma(k/2).
pub fn gamma_half(k: usize) -> f64 {
    assert!(k >= 1);
    if k % 2 == 0 {
        // Gamma(j) = (j-1)!
        let j = k / 2;
        (1..j).map(|i| i as f64).product()
    } else {
        // Gamma(1/2 + j) = sqrt(pi) (2j-1)!! / 2^j
        let j = (k - 1) / 2;
        let mut v = std::f64::consts::PI.sqrt();
        for i in 0..j {
            v *= (2 * i + 1) as f64 / 2.0;
        }
        v
    }
}

/// The sharp constant `Gamma((d+1)/2) / Gamma(d/2)` of the averaging
/// estimate in dimension `d`.
pub fn c_d(d: usize) -> f64 {
    gamma_half(d + 1) / gamma_half(d)
}

/// `(tau/pi)^{d/2} integral b(z) exp(-tau |z - z0|^2) dz` by tensor
/// trapezoid quadrature over an `8 / sqrt(tau)` window.
pub fn gaussian_average(
    b: &dyn Fn(&[f64]) -> f64,
    z0: &[f64],
    tau: f64,
    d: usize,
) -> f64 {
    assert!(d == 1 || d == 2);
    let half_width = 8.0 / tau.sqrt();
    let n = 320usize;
    let h = 2.0 * half_width / n as f64;
    let weight = |i: usize| if i == 0 || i == n { 0.5 } else { 1.0 };
    let mut acc = 0.0;
    match d {
        1 => {
            for i in 0..=n {
                let z = z0[0] - half_width + i as f64 * h;
                let r2 = (z - z0[0]).powi(2);
                acc += weight(i) * h * b(&[z]) * (-tau * r2).exp();
            }
        }
        _ => {
            for i in 0..=n {
                let zx = z0[0] - half_width + i as f64 * h;
                for j in 0..=n {
                    let zy = z0[1] - half_width + j as f64 * h;
                    let r2 = (zx - z0[0]).powi(2) + (zy - z0[1]).powi(2);
                    acc += weight(i) * weight(j) * h * h * b(&[zx, zy]) * (-tau * r2).exp();
                }
            }
        }
    }
    acc * (tau / std::f64::consts::PI).powf(d as f64 / 2.0)
}

/// `|b(z0) - gaussian_average|`, the quantity bounded by
/// `c_d |b|_{C^1} tau^{-1/2}`.
pub fn delta_defect(b: &dyn Fn(&[f64]) -> f64, z0: &[f64], tau: f64, d: usize) -> f64 {
    (b(z0) - gaussian_average(b, z0, tau, d)).abs()
}
