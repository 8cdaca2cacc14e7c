//! Adaptive Dormand-Prince 5(4) integration for small first-order systems.

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
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

/// Integrates `y' = f(t, y)` from `t0` to `t1`, returning `y(t1)` or `None`
/// when the step size collapses.
pub fn integrate<const N: usize, F>(f: &F, t0: f64, t1: f64, y0: [f64; N], tol: Tolerance, h0: f64) -> Option<[f64; N]>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut t = t0;
    let mut y = y0;
    let span = t1 - t0;
    if span == 0.0 {
        return Some(y);
    }
    let mut h = h0.min(span);
    let add = |y: &[f64; N], terms: &[(f64, &[f64; N])], h: f64| -> [f64; N] {
        let mut out = *y;
        for (c, k) in terms {
            for i in 0..N {
                out[i] += h * c * k[i];
            }
        }
        out
    };
    let mut k1 = f(t, &y);
    for _ in 0..1_000_000 {
        if t1 - t <= 1e-15 * span.abs().max(1.0) {
            return Some(y);
        }
        if t + h > t1 {
            h = t1 - t;
        }
        let k2 = f(t + h / 5.0, &add(&y, &[(A21, &k1)], h));
        let k3 = f(t + 3.0 * h / 10.0, &add(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = f(t + 4.0 * h / 5.0, &add(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = f(t + 8.0 * h / 9.0, &add(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
        let k6 = f(t + h, &add(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h));
        let y5 = add(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
        let k7 = f(t + h, &y5);
        let mut err = 0.0f64;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.atol + tol.rtol * y[i].abs().max(y5[i].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() {
            h *= 0.25;
            if h < 1e-300 {
                return None;
            }
            continue;
        }
        if err <= 1.0 {
            t += h;
            y = y5;
            k1 = k7;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-14 * span.abs() {
            return None;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let tol = Tolerance { rtol: 1e-12, atol: 1e-14 };
        let y = integrate(&f, 0.0, 3.0, [1.0, 0.0], tol, 0.01).unwrap();
        assert!((y[0] - 3f64.cos()).abs() < 1e-10);
        assert!((y[1] + 3f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn exponential_growth() {
        let f = |_t: f64, y: &[f64; 1]| [2.0 * y[0]];
        let tol = Tolerance { rtol: 1e-12, atol: 1e-14 };
        let y = integrate(&f, 0.0, 1.0, [1.0], tol, 0.1).unwrap();
        assert!((y[0] / 2f64.exp() - 1.0).abs() < 1e-10);
    }
}
