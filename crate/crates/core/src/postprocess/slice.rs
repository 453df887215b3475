use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::spline::BicubicSpline;
use super::SurfaceGrid;
use crate::error::Result;

/// Point on a constant-force curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicePoint {
    pub omega: f64,
    pub a_star: f64,
    /// Response amplitude read through the response surface.
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SliceResult {
    pub polylines: Vec<Vec<SlicePoint>>,
    pub diagnostics: Vec<String>,
}

const REFINE: usize = 4;
const BISECTIONS: usize = 40;

fn refine(axis: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(REFINE * (axis.len() - 1) + 1);
    for w in axis.windows(2) {
        for k in 0..REFINE {
            out.push(w[0] + (w[1] - w[0]) * k as f64 / REFINE as f64);
        }
    }
    out.push(axis[axis.len() - 1]);
    out
}

/// Edge of the refined lattice: `(vertical, i, j)` where a horizontal edge
/// joins `(i, j)`–`(i+1, j)` and a vertical one `(i, j)`–`(i, j+1)`.
type EdgeKey = (bool, usize, usize);

/// Constant-force curves `f(ω, a*) = f*` of a force surface.
pub fn slice_constant_force(grid: &SurfaceGrid, f_star: f64) -> Result<SliceResult> {
    let mut res = SliceResult::default();
    let (nw, na) = (grid.omega_axis.len(), grid.a_star_axis.len());
    if nw < 2 || na < 2 {
        res.diagnostics.push("grid needs at least two nodes per axis".into());
        return Ok(res);
    }
    let force = grid.filled(&grid.force);
    let response = grid.filled(&grid.response);
    if force.iter().chain(&response).any(|v| !v.is_finite()) {
        res.diagnostics
            .push("too few unflagged cells to interpolate the surface".into());
        return Ok(res);
    }
    let (lo, hi) = grid
        .force
        .iter()
        .zip(&grid.flags)
        .filter(|(_, f)| !**f)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), (v, _)| (l.min(*v), h.max(*v)));
    if !(f_star >= lo && f_star <= hi) {
        res.diagnostics
            .push(format!("force level {f_star} outside the measured range [{lo}, {hi}]"));
        return Ok(res);
    }
    let fs = BicubicSpline::new(&grid.omega_axis, &grid.a_star_axis, &force)?;
    let rs = BicubicSpline::new(&grid.omega_axis, &grid.a_star_axis, &response)?;
    let wr = refine(&grid.omega_axis);
    let ar = refine(&grid.a_star_axis);
    let (nr, mr) = (wr.len(), ar.len());
    let mut g = vec![0.0; nr * mr];
    for i in 0..nr {
        for j in 0..mr {
            g[i * mr + j] = fs.eval(wr[i], ar[j]) - f_star;
        }
    }
    let gv = |i: usize, j: usize| g[i * mr + j];
    let skip = |i: usize, j: usize| {
        let (ci, cj) = (i / REFINE, j / REFINE);
        [(ci, cj), (ci + 1, cj), (ci, cj + 1), (ci + 1, cj + 1)]
            .iter()
            .all(|&(a, b)| grid.flags[grid.index(a.min(nw - 1), b.min(na - 1))])
    };
    let root = |key: EdgeKey| -> (f64, f64) {
        let (vert, i, j) = key;
        let (p0, p1) = if vert {
            ((wr[i], ar[j]), (wr[i], ar[j + 1]))
        } else {
            ((wr[i], ar[j]), (wr[i + 1], ar[j]))
        };
        let at = |t: f64| (p0.0 + t * (p1.0 - p0.0), p0.1 + t * (p1.1 - p0.1));
        let val = |t: f64| {
            let (w, a) = at(t);
            fs.eval(w, a) - f_star
        };
        let (mut t0, mut t1) = (0.0, 1.0);
        let s0 = val(t0) >= 0.0;
        for _ in 0..BISECTIONS {
            let tm = 0.5 * (t0 + t1);
            if (val(tm) >= 0.0) == s0 {
                t0 = tm;
            } else {
                t1 = tm;
            }
        }
        at(0.5 * (t0 + t1))
    };
    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    for i in 0..nr - 1 {
        for j in 0..mr - 1 {
            if skip(i, j) {
                continue;
            }
            // Corners counter-clockwise and the edges between them.
            let c = [gv(i, j), gv(i + 1, j), gv(i + 1, j + 1), gv(i, j + 1)];
            let edges: [EdgeKey; 4] = [(false, i, j), (true, i + 1, j), (false, i, j + 1), (true, i, j)];
            let crossing: Vec<usize> = (0..4).filter(|&k| (c[k] >= 0.0) != (c[(k + 1) % 4] >= 0.0)).collect();
            match crossing.len() {
                2 => segments.push((edges[crossing[0]], edges[crossing[1]])),
                4 => {
                    let center = fs.eval(0.5 * (wr[i] + wr[i + 1]), 0.5 * (ar[j] + ar[j + 1])) - f_star;
                    // Join the edges around the corners whose sign differs from the centre.
                    if (center >= 0.0) == (c[0] >= 0.0) {
                        segments.push((edges[0], edges[1]));
                        segments.push((edges[2], edges[3]));
                    } else {
                        segments.push((edges[3], edges[0]));
                        segments.push((edges[1], edges[2]));
                    }
                }
                _ => {}
            }
        }
    }
    let mut at_edge: BTreeMap<EdgeKey, Vec<usize>> = BTreeMap::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        at_edge.entry(*a).or_default().push(k);
        at_edge.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut roots: BTreeMap<EdgeKey, (f64, f64)> = BTreeMap::new();
    let mut point = |key: EdgeKey| -> SlicePoint {
        let (w, a) = *roots.entry(key).or_insert_with(|| root(key));
        SlicePoint {
            omega: w,
            a_star: a,
            a: rs.eval(w, a),
        }
    };
    // Open chains start at edges used once; loops are picked up afterwards.
    let mut starts: Vec<usize> = at_edge
        .iter()
        .filter(|(_, v)| v.len() == 1)
        .map(|(_, v)| v[0])
        .collect();
    starts.extend(0..segments.len());
    for s in starts {
        if used[s] {
            continue;
        }
        let (a, b) = segments[s];
        let begin = if at_edge[&a].len() == 1 { a } else if at_edge[&b].len() == 1 { b } else { a };
        let mut chain = vec![begin];
        let mut cur_seg = s;
        let mut cur = begin;
        loop {
            used[cur_seg] = true;
            let (x, y) = segments[cur_seg];
            let next = if x == cur { y } else { x };
            chain.push(next);
            let cand = at_edge[&next].iter().copied().find(|k| !used[*k]);
            match cand {
                Some(k) => {
                    cur_seg = k;
                    cur = next;
                }
                None => break,
            }
        }
        let mut line: Vec<SlicePoint> = chain.into_iter().map(&mut point).collect();
        // Report curves in increasing frequency at their start.
        if line.len() > 1 && line[0].omega > line[line.len() - 1].omega {
            line.reverse();
        }
        res.polylines.push(line);
    }
    Ok(res)
}

impl SliceResult {
    /// Largest response amplitude over all curves.
    pub fn peak(&self) -> Option<SlicePoint> {
        self.polylines
            .iter()
            .flatten()
            .copied()
            .fold(None, |best: Option<SlicePoint>, p| match best {
                Some(b) if b.a >= p.a => Some(b),
                _ => Some(p),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::linear_frf;

    fn linear_grid(nw: usize, na: usize) -> SurfaceGrid {
        // Infinite-gain surface of a linear oscillator: f = a*·|k − mω² + icω|.
        let w: Vec<f64> = (0..nw).map(|i| 0.5 + 1.0 * i as f64 / (nw - 1) as f64).collect();
        let a: Vec<f64> = (0..na).map(|j| 0.2 + 4.0 * j as f64 / (na - 1) as f64).collect();
        let mut g = SurfaceGrid::new(w.clone(), a.clone()).unwrap();
        for (i, &wi) in w.iter().enumerate() {
            let (gain, _) = linear_frf(1.0, 0.2, 1.0, 1.0, wi);
            for (j, &aj) in a.iter().enumerate() {
                g.set(i, j, aj / gain, aj, false);
            }
        }
        g
    }

    #[test]
    fn linear_surface_slice_matches_frf() {
        let g = linear_grid(21, 15);
        let r = slice_constant_force(&g, 0.5).unwrap();
        assert_eq!(r.polylines.len(), 1, "{:?}", r.diagnostics);
        for p in &r.polylines[0] {
            let (a, _) = linear_frf(1.0, 0.2, 1.0, 0.5, p.omega);
            assert!((p.a - a).abs() < 0.005 * a, "{} {} {}", p.omega, p.a, a);
        }
    }

    #[test]
    fn out_of_range_level_is_empty() {
        let g = linear_grid(6, 5);
        let r = slice_constant_force(&g, 100.0).unwrap();
        assert!(r.polylines.is_empty());
        assert_eq!(r.diagnostics.len(), 1);
    }

    #[test]
    fn flagged_entries_do_not_matter() {
        let mut g = linear_grid(11, 9);
        let k = g.index(4, 3);
        g.flags[k] = true;
        let a = slice_constant_force(&g, 0.5).unwrap();
        g.force[k] = 123.0;
        g.response[k] = -7.0;
        let b = slice_constant_force(&g, 0.5).unwrap();
        assert_eq!(a, b);
    }
}
