//! Classical fixed-step Runge-Kutta.

/// One RK4 step of `dy/dt = f(t, y)` from `(t, y)` with step `h`.
pub fn rk4_step<const N: usize, F>(f: F, t: f64, y: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let half = 0.5 * h;
    let k1 = f(t, y);
    let k2 = f(t + half, &axpy(y, half, &k1));
    let k3 = f(t + half, &axpy(y, half, &k2));
    let k4 = f(t + h, &axpy(y, h, &k3));
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Integrates `n` equal steps from `t0` to `t1` and returns the end point.
pub fn rk4_integrate<const N: usize, F>(f: F, t0: f64, t1: f64, y0: [f64; N], n: usize) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let h = (t1 - t0) / n as f64;
    let mut y = y0;
    for k in 0..n {
        y = rk4_step(&f, t0 + k as f64 * h, &y, h);
    }
    y
}

fn axpy<const N: usize>(y: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let y = rk4_integrate(|_, y: &[f64; 1]| [-y[0]], 0.0, 1.0, [1.0], 100);
        assert!((y[0] - (-1.0_f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn fourth_order_convergence_on_oscillator() {
        let f = |_: f64, y: &[f64; 2]| [y[1], -y[0]];
        let err = |n| {
            let y = rk4_integrate(f, 0.0, 2.0, [1.0, 0.0], n);
            (y[0] - 2.0_f64.cos()).abs()
        };
        let ratio = err(20) / err(40);
        assert!((14.0..18.0).contains(&ratio), "ratio {ratio}");
    }
}
