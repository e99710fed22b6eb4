#![allow(dead_code)]

use nsrl_core::quadrature::gauss_legendre_on;
use nsrl_core::GridSpec;

/// `∫_{|y| ≤ R} f(y) dy` by iterated Gauss–Legendre in Cartesian
/// coordinates, one octant at a time. Each coordinate is written as
/// `y = bound · t²(3 − 2t)`: the Jacobian vanishes at both ends, which
/// absorbs the `1/|y|` growth at the origin and the square-root behaviour of
/// the octant bounds.
pub fn ball_integral<F: Fn([f64; 3]) -> f64 + Sync>(f: F, radius: f64, nodes: usize) -> f64 {
    let (t, w) = gauss_legendre_on(nodes, 0.0, 1.0);
    let mut total = 0.0;
    for s in 0..8 {
        let sign = [
            1.0 - 2.0 * (s & 1) as f64,
            1.0 - 2.0 * ((s >> 1) & 1) as f64,
            1.0 - 2.0 * ((s >> 2) & 1) as f64,
        ];
        for (t1, w1) in t.iter().zip(&w) {
            let b1 = radius;
            let y1 = b1 * t1 * t1 * (3.0 - 2.0 * t1);
            let j1 = b1 * 6.0 * t1 * (1.0 - t1);
            for (t2, w2) in t.iter().zip(&w) {
                let b2 = (radius * radius - y1 * y1).max(0.0).sqrt();
                let y2 = b2 * t2 * t2 * (3.0 - 2.0 * t2);
                let j2 = b2 * 6.0 * t2 * (1.0 - t2);
                for (t3, w3) in t.iter().zip(&w) {
                    let b3 = (radius * radius - y1 * y1 - y2 * y2).max(0.0).sqrt();
                    let y3 = b3 * t3 * t3 * (3.0 - 2.0 * t3);
                    let j3 = b3 * 6.0 * t3 * (1.0 - t3);
                    let y = [sign[0] * y1, sign[1] * y2, sign[2] * y3];
                    total += w1 * w2 * w3 * j1 * j2 * j3 * f(y);
                }
            }
        }
    }
    total
}

pub fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn norm2(a: [f64; 3]) -> f64 {
    a[0] * a[0] + a[1] * a[1] + a[2] * a[2]
}

/// Best fractional level set `{w > τ}` plus part of `{w = τ}`, over every
/// candidate threshold, each summed from scratch.
pub fn exhaustive_threshold(g: &GridSpec, v: &[f64], e: f64, delta: f64) -> f64 {
    let dv = g.cell_volume();
    let w: Vec<f64> = v.iter().map(|x| x.abs().powf(e)).collect();
    let budget = delta.min(g.volume());
    let mut best = 0.0f64;
    for &tau in &w {
        let mut above = 0.0;
        let mut at = 0.0;
        let mut s = 0.0;
        for &x in &w {
            if x > tau {
                above += dv;
                s += x * dv;
            } else if x == tau {
                at += dv;
            }
        }
        if above <= budget {
            best = best.max(s + (budget - above).min(at) * tau);
        }
    }
    best
}
