//! Runge-Kutta steppers shared by the geometry and beam modules.

use nalgebra::DVector;
use num_complex::Complex64;

/// One Dormand-Prince 5(4) step. Returns the 5th-order estimate and the
/// infinity norm of the embedded error.
pub fn rk45_step<F>(f: &F, s: f64, y: &DVector<f64>, h: f64) -> (DVector<f64>, f64)
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    const A21: f64 = 1.0 / 5.0;
    const A31: f64 = 3.0 / 40.0;
    const A32: f64 = 9.0 / 40.0;
    const A41: f64 = 44.0 / 45.0;
    const A42: f64 = -56.0 / 15.0;
    const A43: f64 = 32.0 / 9.0;
    const A51: f64 = 19372.0 / 6561.0;
    const A52: f64 = -25360.0 / 2187.0;
    const A53: f64 = 64448.0 / 6561.0;
    const A54: f64 = -212.0 / 729.0;
    const A61: f64 = 9017.0 / 3168.0;
    const A62: f64 = -355.0 / 33.0;
    const A63: f64 = 46732.0 / 5247.0;
    const A64: f64 = 49.0 / 176.0;
    const A65: f64 = -5103.0 / 18656.0;
    const B1: f64 = 35.0 / 384.0;
    const B3: f64 = 500.0 / 1113.0;
    const B4: f64 = 125.0 / 192.0;
    const B5: f64 = -2187.0 / 6784.0;
    const B6: f64 = 11.0 / 84.0;
    // 4th-order weights for the embedded estimate.
    const C1: f64 = 5179.0 / 57600.0;
    const C3: f64 = 7571.0 / 16695.0;
    const C4: f64 = 393.0 / 640.0;
    const C5: f64 = -92097.0 / 339200.0;
    const C6: f64 = 187.0 / 2100.0;
    const C7: f64 = 1.0 / 40.0;

    let k1 = f(s, y);
    let k2 = f(s + A21 * h, &(y + &k1 * (A21 * h)));
    let k3 = f(s + 0.3 * h, &(y + &k1 * (A31 * h) + &k2 * (A32 * h)));
    let k4 = f(
        s + 0.8 * h,
        &(y + &k1 * (A41 * h) + &k2 * (A42 * h) + &k3 * (A43 * h)),
    );
    let k5 = f(
        s + 8.0 / 9.0 * h,
        &(y + &k1 * (A51 * h) + &k2 * (A52 * h) + &k3 * (A53 * h) + &k4 * (A54 * h)),
    );
    let k6 = f(
        s + h,
        &(y + &k1 * (A61 * h)
            + &k2 * (A62 * h)
            + &k3 * (A63 * h)
            + &k4 * (A64 * h)
            + &k5 * (A65 * h)),
    );
    let y5 = y + &k1 * (B1 * h) + &k3 * (B3 * h) + &k4 * (B4 * h) + &k5 * (B5 * h) + &k6 * (B6 * h);
    let k7 = f(s + h, &y5);
    let y4 = y
        + &k1 * (C1 * h)
        + &k3 * (C3 * h)
        + &k4 * (C4 * h)
        + &k5 * (C5 * h)
        + &k6 * (C6 * h)
        + &k7 * (C7 * h);
    let err = (&y5 - &y4).amax();
    (y5, err)
}

/// Fixed-step classical RK4 for real vector states.
pub fn rk4_step<F>(f: &F, s: f64, y: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let k1 = f(s, y);
    let k2 = f(s + 0.5 * h, &(y + &k1 * (0.5 * h)));
    let k3 = f(s + 0.5 * h, &(y + &k2 * (0.5 * h)));
    let k4 = f(s + h, &(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Fixed-step classical RK4 for complex vector states.
pub fn rk4_step_c<F>(f: &F, s: f64, y: &DVector<Complex64>, h: f64) -> DVector<Complex64>
where
    F: Fn(f64, &DVector<Complex64>) -> DVector<Complex64>,
{
    let two = Complex64::new(2.0, 0.0);
    let hc = Complex64::new(h, 0.0);
    let half = Complex64::new(0.5 * h, 0.0);
    let k1 = f(s, y);
    let k2 = f(s + 0.5 * h, &(y + &k1 * half));
    let k3 = f(s + 0.5 * h, &(y + &k2 * half));
    let k4 = f(s + h, &(y + &k3 * hc));
    y + (k1 + k2 * two + k3 * two + k4) * Complex64::new(h / 6.0, 0.0)
}

/// Cubic Hermite interpolation of a vector-valued function given endpoint
/// values and derivatives.
pub fn hermite(
    s0: f64,
    y0: &DVector<f64>,
    d0: &DVector<f64>,
    s1: f64,
    y1: &DVector<f64>,
    d1: &DVector<f64>,
    s: f64,
) -> DVector<f64> {
    let h = s1 - s0;
    if h.abs() < 1e-300 {
        return y0.clone();
    }
    let u = (s - s0) / h;
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    let h11 = u3 - u2;
    y0 * h00 + d0 * (h10 * h) + y1 * h01 + d1 * (h11 * h)
}
