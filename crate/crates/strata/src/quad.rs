//! Quadrature rules and Monte-Carlo bookkeeping shared by the analytic modules.

use crate::C64;
use serde::Serialize;
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                z
            } else {
                p1
            };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// A reusable Gauss–Legendre rule, mapped onto arbitrary intervals.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = 0.5 * (b - a);
        let c = 0.5 * (b + a);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (c + h * x, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    pub fn integrate_c<F: FnMut(f64) -> C64>(&self, a: f64, b: f64, mut f: F) -> C64 {
        self.mapped(a, b).map(|(x, w)| f(x) * w).sum()
    }

    /// Composite rule over `panels` equal pieces of `[a, b]`.
    pub fn composite_c<F: FnMut(f64) -> C64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> C64 {
        let h = (b - a) / panels as f64;
        (0..panels).map(|i| self.integrate_c(a + i as f64 * h, a + (i + 1) as f64 * h, &mut f)).sum()
    }

    pub fn composite<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels).map(|i| self.integrate(a + i as f64 * h, a + (i + 1) as f64 * h, &mut f)).sum()
    }
}

/// Double-exponential rule for `∫_0^∞ f(t) dt` with `t = exp(π/2·sinh s)`.
/// Handles integrable endpoint singularities at 0 and exponential decay at ∞.
pub fn exp_sinh<F: FnMut(f64) -> C64>(mut f: F, h: f64, s_max: f64) -> C64 {
    let n = (s_max / h).ceil() as i64;
    let mut acc = C64::new(0.0, 0.0);
    for j in -n..=n {
        let s = j as f64 * h;
        let arg = 0.5 * PI * s.sinh();
        if arg > 700.0 || arg < -700.0 {
            continue;
        }
        let t = arg.exp();
        let dt = t * 0.5 * PI * s.cosh();
        let v = f(t);
        if v.re.is_finite() && v.im.is_finite() {
            acc += v * dt;
        }
    }
    acc * h
}

/// Mean and standard error of a Monte-Carlo estimate.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Is `target` within `k` standard errors (plus an absolute slack)?
    pub fn agrees(&self, target: f64, k: f64, slack: f64) -> bool {
        (self.value - target).abs() <= k * self.stderr + slack
    }
}

/// Complex Monte-Carlo estimate; the error bar is the modulus of the
/// per-component standard errors.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct EstimateC {
    pub re: f64,
    pub im: f64,
    pub stderr: f64,
}

impl EstimateC {
    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

/// Standard error from batch means; batches of unequal length are weighted by size.
pub fn batch_estimate(batch_sums: &[(f64, usize)]) -> Estimate {
    let total: usize = batch_sums.iter().map(|b| b.1).sum();
    let mean = batch_sums.iter().map(|b| b.0).sum::<f64>() / total as f64;
    let nb = batch_sums.len();
    if nb < 2 {
        return Estimate { value: mean, stderr: f64::INFINITY };
    }
    let var: f64 = batch_sums
        .iter()
        .map(|&(s, n)| {
            let m = s / n as f64;
            n as f64 * (m - mean).powi(2)
        })
        .sum::<f64>()
        / (nb as f64 - 1.0);
    // var estimates the per-batch-size-weighted variance of a single sample
    Estimate { value: mean, stderr: (var / total as f64).sqrt() }
}

pub fn batch_estimate_c(batch_sums: &[(C64, usize)]) -> EstimateC {
    let re: Vec<(f64, usize)> = batch_sums.iter().map(|b| (b.0.re, b.1)).collect();
    let im: Vec<(f64, usize)> = batch_sums.iter().map(|b| (b.0.im, b.1)).collect();
    let (r, i) = (batch_estimate(&re), batch_estimate(&im));
    EstimateC { re: r.value, im: i.value, stderr: r.stderr.hypot(i.stderr) }
}
