//! Classical fixed-step fourth-order Runge-Kutta.

/// Advances `y` from `t` to `t + dt` for `y' = f(t, y)`.
pub fn rk4_step<const N: usize, F>(mut f: F, t: f64, y: &[f64; N], dt: f64) -> [f64; N]
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let k1 = f(t, y);
    let y2 = axpy(y, 0.5 * dt, &k1);
    let k2 = f(t + 0.5 * dt, &y2);
    let y3 = axpy(y, 0.5 * dt, &k2);
    let k3 = f(t + 0.5 * dt, &y3);
    let y4 = axpy(y, dt, &k3);
    let k4 = f(t + dt, &y4);
    let mut out = *y;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

#[inline]
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
    fn harmonic_oscillator_fourth_order() {
        // y'' = -y over one period; global error scales as dt^4.
        let run = |n: usize| {
            let dt = 2.0 * core::f64::consts::PI / n as f64;
            let mut y = [0.0, 1.0];
            for i in 0..n {
                y = rk4_step(|_, s| [s[1], -s[0]], i as f64 * dt, &y, dt);
            }
            (y[0].powi(2) + (y[1] - 1.0).powi(2)).sqrt()
        };
        let e1 = run(50);
        let e2 = run(100);
        let order = (e1 / e2).log2();
        assert!(order > 3.8 && order < 4.2, "order {order}");
    }
}
