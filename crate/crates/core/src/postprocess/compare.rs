#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use crate::error::{precondition, Result};
use crate::methods::Branch;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareReport {
    pub max_rel: f64,
    pub mean_rel: f64,
    /// Relative offset between the frequencies of peak amplitude.
    pub peak_omega_rel: f64,
}

const SAMPLES: usize = 200;

fn curve(b: &Branch) -> Vec<(f64, f64)> {
    b.points.iter().map(|p| (p.omega, p.a1())).collect()
}

/// Cumulative arclength in `(ω / w_scale, a / own peak)` coordinates,
/// normalised to end at 1.
fn arclength(c: &[(f64, f64)], w_scale: f64) -> Vec<f64> {
    let a_scale = c.iter().fold(0.0, |m: f64, p| m.max(p.1.abs())).max(f64::MIN_POSITIVE);
    let mut s = Vec::with_capacity(c.len());
    let mut acc = 0.0;
    s.push(0.0);
    for w in c.windows(2) {
        let dw = (w[1].0 - w[0].0) / w_scale;
        let da = (w[1].1 - w[0].1) / a_scale;
        acc += (dw * dw + da * da).sqrt();
        s.push(acc);
    }
    if acc > 0.0 {
        for v in &mut s {
            *v /= acc;
        }
    }
    s
}

fn resample(c: &[(f64, f64)], s: &[f64], t: f64) -> f64 {
    let i = s.partition_point(|&v| v < t).clamp(1, c.len() - 1);
    let (s0, s1) = (s[i - 1], s[i]);
    let u = if s1 > s0 { (t - s0) / (s1 - s0) } else { 0.0 };
    c[i - 1].1 + u * (c[i].1 - c[i - 1].1)
}

/// Amplitude agreement of two branches resampled on a common normalised
/// arclength, after trimming the reference to the stretch nearest the test
/// branch's end points.
pub fn branch_compare(test: &Branch, reference: &Branch) -> Result<CompareReport> {
    let t = curve(test);
    let r_all = curve(reference);
    if t.len() < 2 || r_all.len() < 2 {
        return Err(precondition("both branches need at least two points"));
    }
    let (tmin, tmax) = t.iter().fold((f64::INFINITY, 0.0f64), |(l, h), p| (l.min(p.0), h.max(p.0)));
    let (rmin, rmax) = r_all.iter().fold((f64::INFINITY, 0.0f64), |(l, h), p| (l.min(p.0), h.max(p.0)));
    if tmax < rmin || tmin > rmax {
        return Err(precondition("branches cover disjoint frequency ranges"));
    }
    let w_scale = if tmax > tmin { tmax - tmin } else { 1.0 };
    let a_scale = t.iter().fold(0.0, |m: f64, p| m.max(p.1.abs())).max(f64::MIN_POSITIVE);
    let nearest = |p: (f64, f64)| {
        let mut best = (0, f64::INFINITY);
        for (i, q) in r_all.iter().enumerate() {
            let d = ((q.0 - p.0) / w_scale).powi(2) + ((q.1 - p.1) / a_scale).powi(2);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    };
    let (i0, i1) = (nearest(t[0]), nearest(t[t.len() - 1]));
    let mut r: Vec<(f64, f64)> = if i0 <= i1 {
        r_all[i0..=i1].to_vec()
    } else {
        r_all[i1..=i0].iter().rev().copied().collect()
    };
    if r.len() < 2 {
        r = r_all;
    }
    let st = arclength(&t, w_scale);
    let sr = arclength(&r, w_scale);
    let mut max_rel: f64 = 0.0;
    let mut sum = 0.0;
    for k in 0..=SAMPLES {
        let u = k as f64 / SAMPLES as f64;
        let (at, ar) = (resample(&t, &st, u), resample(&r, &sr, u));
        let d = if ar != 0.0 { ((at - ar) / ar).abs() } else { (at - ar).abs() };
        max_rel = max_rel.max(d);
        sum += d;
    }
    let peak = |c: &[(f64, f64)]| c.iter().fold((0.0, f64::NEG_INFINITY), |b, p| if p.1 > b.1 { *p } else { b }).0;
    let (pt, pr) = (peak(&t), peak(&r));
    Ok(CompareReport {
        max_rel,
        mean_rel: sum / (SAMPLES + 1) as f64,
        peak_omega_rel: ((pt - pr) / pr).abs(),
    })
}

/// For each test point, the relative fundamental-amplitude offset from the
/// closest reference solution at the same frequency, or `None` when no
/// reference segment spans that frequency.
pub fn matched_frequency_deviation(test: &Branch, reference: &Branch) -> Vec<Option<f64>> {
    let r = curve(reference);
    test.points
        .iter()
        .map(|p| {
            let (w, a) = (p.omega, p.a1());
            r.windows(2)
                .filter(|s| (s[0].0 - w) * (s[1].0 - w) <= 0.0 && s[0].0 != s[1].0)
                .map(|s| {
                    let u = (w - s[0].0) / (s[1].0 - s[0].0);
                    s[0].1 + u * (s[1].1 - s[0].1)
                })
                .map(|ar| ((a - ar) / ar).abs())
                .fold(None, |best: Option<f64>, d| Some(best.map_or(d, |b| b.min(d))))
        })
        .collect()
}
