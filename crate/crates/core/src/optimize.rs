//! One-dimensional bracketed minimization.

use rayon::prelude::*;
use serde::Serialize;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
    /// Set when the coarse probe was not unimodal and the grid scan was used.
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Points of the unimodality probe.
    pub probe: usize,
    /// Points of the fallback grid.
    pub grid: usize,
    /// Absolute tolerance on the abscissa.
    pub xtol: f64,
    pub max_iter: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            probe: 9,
            grid: 101,
            xtol: 1e-4,
            max_iter: 200,
        }
    }
}

/// Golden-section search on `[a, b]`. Non-finite values count as `+inf`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> Minimum {
    let g = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = g(c);
    let mut fd = g(d);
    let mut evals = 2;
    let mut iter = 0;
    while (b - a) > xtol && iter < max_iter {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = g(d);
        }
        evals += 1;
        iter += 1;
    }
    let (x, value) = if fc <= fd { (c, fc) } else { (d, fd) };
    Minimum {
        x,
        value,
        evaluations: evals,
        fallback: false,
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn sample<F: Fn(f64) -> f64 + Sync>(f: &F, xs: &[f64]) -> Vec<f64> {
    xs.par_iter()
        .map(|&x| {
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        })
        .collect()
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

fn is_unimodal(v: &[f64]) -> bool {
    let k = argmin(v);
    v[..=k].windows(2).all(|w| w[1] <= w[0]) && v[k..].windows(2).all(|w| w[1] >= w[0])
}

/// Minimizes `f` on `[a, b]`: golden section when a coarse probe looks
/// unimodal, otherwise a dense grid scan refined by golden section around the
/// best grid point. The probe and grid are evaluated in parallel.
pub fn minimize<F: Fn(f64) -> f64 + Sync>(f: F, a: f64, b: f64, opts: &SearchOptions) -> Minimum {
    let probe_x = linspace(a, b, opts.probe.max(3));
    let probe_v = sample(&f, &probe_x);
    let (xs, vs, fallback) = if is_unimodal(&probe_v) {
        (probe_x, probe_v, false)
    } else {
        let gx = linspace(a, b, opts.grid.max(3));
        let gv = sample(&f, &gx);
        (gx, gv, true)
    };
    let k = argmin(&vs);
    let lo = xs[k.saturating_sub(1)];
    let hi = xs[(k + 1).min(xs.len() - 1)];
    let mut best = golden_section(&f, lo, hi, opts.xtol, opts.max_iter);
    best.evaluations += opts.probe.max(3) + if fallback { opts.grid.max(3) } else { 0 };
    best.fallback = fallback;
    if vs[k] < best.value {
        best.x = xs[k];
        best.value = vs[k];
    }
    best
}
