//! Jacobi elliptic functions and the complete integral of the first kind,
//! parameter convention `m = k²`, valid for any `m < 1`.

#[allow(unused_imports)]
use num_traits::Float;
use core::f64::consts::FRAC_PI_2;

const AGM_TOL: f64 = 1e-16;
const AGM_MAX: usize = 40;

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..AGM_MAX {
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        if (an - bn).abs() <= AGM_TOL * an {
            return an;
        }
        a = an;
        b = bn;
    }
    0.5 * (a + b)
}

/// Complete elliptic integral of the first kind, `K(m)` for `m < 1`.
pub fn ellip_k(m: f64) -> f64 {
    debug_assert!(m < 1.0);
    FRAC_PI_2 / agm(1.0, (1.0 - m).sqrt())
}

/// `(sn, cn, dn)` of `u` for parameter `m < 1`.
pub fn ellip_j(u: f64, m: f64) -> (f64, f64, f64) {
    if m < 0.0 {
        // Negative parameter: map onto mu in (0, 1).
        let s = (1.0 - m).sqrt();
        let mu = -m / (1.0 - m);
        let (sn, cn, dn) = ellip_j_unit(u * s, mu);
        (sn / (dn * s), cn / dn, 1.0 / dn)
    } else {
        ellip_j_unit(u, m)
    }
}

fn ellip_j_unit(u: f64, m: f64) -> (f64, f64, f64) {
    if m < 1e-300 {
        return (u.sin(), u.cos(), 1.0);
    }
    // Descending Landen / AGM scheme.
    let mut a = [0.0f64; AGM_MAX + 1];
    let mut c = [0.0f64; AGM_MAX + 1];
    a[0] = 1.0;
    let mut b = (1.0 - m).sqrt();
    c[0] = m.sqrt();
    let mut n = 0;
    while n < AGM_MAX && c[n].abs() > AGM_TOL {
        a[n + 1] = 0.5 * (a[n] + b);
        c[n + 1] = 0.5 * (a[n] - b);
        b = (a[n] * b).sqrt();
        n += 1;
    }
    let mut phi = ((1u64 << n) as f64) * a[n] * u;
    for i in (1..=n).rev() {
        phi = 0.5 * (phi + (c[i] / a[i] * phi.sin()).asin());
    }
    let sn = phi.sin();
    let cn = phi.cos();
    let dn = (1.0 - m * sn * sn).sqrt();
    (sn, cn, dn)
}
