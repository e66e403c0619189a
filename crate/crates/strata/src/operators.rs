//! Invariant differential operators on the Jacobi half-space, realised by
//! fourth-order central differences in real coordinates.
//!
//! With `∂_τ = ½(∂_x − i∂_y)`, `∂_z = ½(∂_u − i∂_v)`:
//! * `L_k = −iy²[(∂_x + i∂_y) + (v/y)(∂_u + i∂_v)]`, weight `k → k−2`;
//! * `R_k = i[(∂_x − i∂_y) + (v/y)(∂_u − i∂_v)] + k/y`, weight `k → k+2`;
//! * `L^H = −(iy/2)(∂_u + i∂_v)`, weight `k → k−1`;
//! * `R^H = (i/2)(∂_u − i∂_v)`, weight `k → k+1`.

use crate::enveloping::{casimir_sl2, euclidean_rep, DiffOpPoly, GaussianRational};
use crate::quad::{batch_estimate_c, EstimateC};
use crate::saff_group::{JacobiPoint, ModularFunction};
use crate::siegel_veech::{sv_rel_m, sv_rel_m_function, PlaneFunction};
use crate::{Result, StrataError, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StencilSpec {
    /// Step relative to `min(y, 1)`.
    pub h_rel: f64,
    /// One level of Richardson extrapolation (`h` and `h/2`).
    pub richardson: bool,
}

impl Default for StencilSpec {
    fn default() -> Self {
        Self { h_rel: 2e-3, richardson: false }
    }
}

impl StencilSpec {
    pub fn step(&self, y: f64) -> Result<f64> {
        let h = self.h_rel * y.min(1.0);
        if !(h > 1e-9) {
            return Err(StrataError::InvalidParameter(format!("stencil step {h} underflows")));
        }
        Ok(h)
    }
}

/// Which real coordinates the partial derivatives refer to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chart {
    /// `(x, y, u, v)`
    Uv,
    /// `(x, y, p, q)`
    Pq,
}

fn stencil(order: u8) -> &'static [(i32, f64)] {
    const D0: [(i32, f64); 1] = [(0, 1.0)];
    const D1: [(i32, f64); 4] = [(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)];
    const D2: [(i32, f64); 5] =
        [(-2, -1.0 / 12.0), (-1, 16.0 / 12.0), (0, -30.0 / 12.0), (1, 16.0 / 12.0), (2, -1.0 / 12.0)];
    const D3: [(i32, f64); 6] =
        [(-3, 1.0 / 8.0), (-2, -1.0), (-1, 13.0 / 8.0), (1, -13.0 / 8.0), (2, 1.0), (3, -1.0 / 8.0)];
    match order {
        0 => &D0,
        1 => &D1,
        2 => &D2,
        3 => &D3,
        _ => panic!("derivative order {order} not supported"),
    }
}

/// Tensor-product central difference of `f: ℝᴺ → ℂ` at `c`.
pub fn partial_nd<const N: usize, F: Fn([f64; N]) -> C64>(f: &F, c: [f64; N], ord: [u8; N], h: f64) -> C64 {
    fn rec<const N: usize, F: Fn([f64; N]) -> C64>(
        f: &F,
        c: [f64; N],
        ord: &[u8; N],
        h: f64,
        dim: usize,
        shift: &mut [f64; N],
        weight: f64,
        acc: &mut C64,
    ) {
        if dim == N {
            let mut p = c;
            for i in 0..N {
                p[i] += shift[i];
            }
            *acc += f(p) * weight;
            return;
        }
        let scale = h.powi(ord[dim] as i32);
        for &(o, w) in stencil(ord[dim]) {
            shift[dim] = o as f64 * h;
            rec(f, c, ord, h, dim + 1, shift, weight * w / scale, acc);
        }
        shift[dim] = 0.0;
    }
    let mut acc = C64::new(0.0, 0.0);
    let mut shift = [0.0; N];
    rec(f, c, &ord, h, 0, &mut shift, 1.0, &mut acc);
    acc
}

fn partial_rich<const N: usize, F: Fn([f64; N]) -> C64>(f: &F, c: [f64; N], ord: [u8; N], h: f64, rich: bool) -> C64 {
    let d = partial_nd(f, c, ord, h);
    if !rich || ord.iter().all(|&o| o == 0) {
        return d;
    }
    let d2 = partial_nd(f, c, ord, 0.5 * h);
    (d2 * 16.0 - d) / 15.0
}

/// Partial derivative `∂^ord φ` in the given chart.
pub fn partial(phi: &ModularFunction, pt: &JacobiPoint, chart: Chart, ord: [u8; 4], s: &StencilSpec) -> Result<C64> {
    let h = s.step(pt.y)?;
    Ok(match chart {
        Chart::Uv => {
            let f = |c: [f64; 4]| phi.eval(&JacobiPoint::new(c[0], c[1], c[2], c[3]));
            partial_rich(&f, [pt.x, pt.y, pt.u, pt.v], ord, h, s.richardson)
        }
        Chart::Pq => {
            let f = |c: [f64; 4]| phi.eval(&JacobiPoint::from_pq(c[0], c[1], c[2], c[3]));
            partial_rich(&f, [pt.x, pt.y, pt.p(), pt.q()], ord, h, s.richardson)
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Maass {
    L,
    R,
    LH,
    RH,
}

impl Maass {
    /// Weight change of the operator.
    pub fn shift(self) -> i32 {
        match self {
            Maass::L => -2,
            Maass::R => 2,
            Maass::LH => -1,
            Maass::RH => 1,
        }
    }
}

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn check_weight(phi: &ModularFunction, k: i32) -> Result<()> {
    if phi.weight != k {
        return Err(StrataError::WeightMismatch(phi.weight, k));
    }
    Ok(())
}

pub fn apply_maass(which: Maass, phi: &ModularFunction, k: i32, pt: &JacobiPoint, s: &StencilSpec) -> Result<C64> {
    check_weight(phi, k)?;
    let d = |o: [u8; 4]| partial(phi, pt, Chart::Uv, o, s);
    let (y, v) = (pt.y, pt.v);
    Ok(match which {
        Maass::L => {
            let (dx, dy, du, dv) = (d([1, 0, 0, 0])?, d([0, 1, 0, 0])?, d([0, 0, 1, 0])?, d([0, 0, 0, 1])?);
            -I * y * y * ((dx + I * dy) + (du + I * dv) * (v / y))
        }
        Maass::R => {
            let (dx, dy, du, dv) = (d([1, 0, 0, 0])?, d([0, 1, 0, 0])?, d([0, 0, 1, 0])?, d([0, 0, 0, 1])?);
            I * ((dx - I * dy) + (du - I * dv) * (v / y)) + phi.eval(pt) * (k as f64 / y)
        }
        Maass::LH => -I * (0.5 * y) * (d([0, 0, 1, 0])? + I * d([0, 0, 0, 1])?),
        Maass::RH => I * 0.5 * (d([0, 0, 1, 0])? - I * d([0, 0, 0, 1])?),
    })
}

/// The Maass operator as a new function of weight `k + shift`.
pub fn maass_operator(which: Maass, phi: &ModularFunction, s: &StencilSpec) -> ModularFunction {
    let f = phi.clone();
    let s = *s;
    let k = phi.weight;
    ModularFunction::new(k + which.shift(), move |pt| {
        apply_maass(which, &f, k, pt, &s).unwrap_or(C64::new(f64::NAN, 0.0))
    })
}

/// `Δ^fol_k` in `(x, y, u, v)` coordinates.
pub fn apply_fol(phi: &ModularFunction, k: i32, pt: &JacobiPoint, s: &StencilSpec) -> Result<C64> {
    check_weight(phi, k)?;
    let d = |o: [u8; 4]| partial(phi, pt, Chart::Uv, o, s);
    let (y, v, kf) = (pt.y, pt.v, k as f64);
    Ok((d([2, 0, 0, 0])? + d([0, 2, 0, 0])?) * (y * y)
        + (d([1, 0, 1, 0])? + d([0, 1, 0, 1])?) * (2.0 * y * v)
        + (d([0, 0, 2, 0])? + d([0, 0, 0, 2])?) * (v * v)
        - I * kf * y * (d([1, 0, 0, 0])? + I * d([0, 1, 0, 0])?)
        - I * kf * v * (d([0, 0, 1, 0])? + I * d([0, 0, 0, 1])?))
}

/// `Δ^fol_k = y²(∂_x² + ∂_y²) − iky(∂_x + i∂_y)` in `(x, y, p, q)` coordinates.
pub fn apply_fol_pq(phi: &ModularFunction, k: i32, pt: &JacobiPoint, s: &StencilSpec) -> Result<C64> {
    check_weight(phi, k)?;
    let d = |o: [u8; 4]| partial(phi, pt, Chart::Pq, o, s);
    let y = pt.y;
    Ok((d([2, 0, 0, 0])? + d([0, 2, 0, 0])?) * (y * y) - I * (k as f64) * y * (d([1, 0, 0, 0])? + I * d([0, 1, 0, 0])?))
}

/// `Δ^ver = y ∂_z ∂_z̄ = (y/4)(∂_u² + ∂_v²)`.
pub fn apply_ver(phi: &ModularFunction, pt: &JacobiPoint, s: &StencilSpec) -> Result<C64> {
    let d = |o: [u8; 4]| partial(phi, pt, Chart::Uv, o, s);
    Ok((d([0, 0, 2, 0])? + d([0, 0, 0, 2])?) * (0.25 * pt.y))
}

/// `Δ^ver = (y/4)(∂_q² + y⁻²(∂_p − x∂_q)²)`.
pub fn apply_ver_pq(phi: &ModularFunction, pt: &JacobiPoint, s: &StencilSpec) -> Result<C64> {
    let d = |o: [u8; 4]| partial(phi, pt, Chart::Pq, o, s);
    let (x, y) = (pt.x, pt.y);
    let dpp = d([0, 0, 2, 0])? - d([0, 0, 1, 1])? * (2.0 * x) + d([0, 0, 0, 2])? * (x * x);
    Ok((d([0, 0, 0, 2])? + dpp / (y * y)) * (0.25 * y))
}

/// `Δ^tot_k = (k/2)y∂_u(∂_u + i∂_v) + (i/2)y²∂_x(∂_u² − ∂_v²) + iy²∂_y∂_u∂_v + (i/2)yv∂_u(∂_u² + ∂_v²)`.
pub fn apply_tot(phi: &ModularFunction, k: i32, pt: &JacobiPoint, s: &StencilSpec) -> Result<C64> {
    check_weight(phi, k)?;
    let d = |o: [u8; 4]| partial(phi, pt, Chart::Uv, o, s);
    let (y, v) = (pt.y, pt.v);
    let t1 = (d([0, 0, 2, 0])? + I * d([0, 0, 1, 1])?) * (0.5 * k as f64 * y);
    let t2 = I * (0.5 * y * y) * (d([1, 0, 2, 0])? - d([1, 0, 0, 2])?);
    let t3 = I * (y * y) * d([0, 1, 1, 1])?;
    let t4 = I * (0.5 * y * v) * (d([0, 0, 3, 0])? + d([0, 0, 1, 2])?);
    Ok(t1 + t2 + t3 + t4)
}

/// `Δ^tot_k` through its factorisation
/// `k R^H_{k−1}L^H_k − R_{k−2}L^H_{k−1}L^H_k + L_{k+2}R^H_{k+1}R^H_k`.
pub fn apply_tot_factorized(phi: &ModularFunction, k: i32, pt: &JacobiPoint, s: &StencilSpec) -> Result<C64> {
    check_weight(phi, k)?;
    let lh = maass_operator(Maass::LH, phi, s);
    let rh = maass_operator(Maass::RH, phi, s);
    let a = apply_maass(Maass::RH, &lh, k - 1, pt, s)? * k as f64;
    let b = apply_maass(Maass::R, &maass_operator(Maass::LH, &lh, s), k - 2, pt, s)?;
    let c = apply_maass(Maass::L, &maass_operator(Maass::RH, &rh, s), k + 2, pt, s)?;
    Ok(a - b + c)
}

/// `Δ^(ε)_k = Δ^fol_k + εΔ^ver`.
pub fn apply_compound(phi: &ModularFunction, k: i32, eps: f64, pt: &JacobiPoint, s: &StencilSpec) -> Result<C64> {
    Ok(apply_fol(phi, k, pt, s)? + apply_ver(phi, pt, s)? * eps)
}

/// `Δ^(ε)_k` as a function (weight `k`).
pub fn compound_operator(phi: &ModularFunction, eps: f64, s: &StencilSpec) -> ModularFunction {
    let f = phi.clone();
    let s = *s;
    let k = phi.weight;
    ModularFunction::new(k, move |pt| apply_compound(&f, k, eps, pt, &s).unwrap_or(C64::new(f64::NAN, 0.0)))
}

/// `(k/2)(k/2 − 1)`: the constant by which the twisted mode operator differs
/// from the untwisted one.
pub fn weight_shift(k: i32) -> f64 {
    let h = 0.5 * k as f64;
    h * (h - 1.0)
}

fn second_derivative<B: Fn(f64) -> C64>(beta: &B, y: f64) -> (C64, C64) {
    let h = 1e-3 * y;
    let d1 = (beta(y - 2.0 * h) - beta(y - h) * 8.0 + beta(y + h) * 8.0 - beta(y + 2.0 * h)) / (12.0 * h);
    let d2 = (-beta(y - 2.0 * h) + beta(y - h) * 16.0 - beta(y) * 30.0 + beta(y + h) * 16.0 - beta(y + 2.0 * h))
        / (12.0 * h * h);
    (d1, d2)
}

/// Radial action of `−Δ^fol_k` on the mode `y^{−k/2} β(y) e(nx + m v/y)`, i.e.
/// `−y²β'' + 4π²n²y²β − 2πkn yβ + (k/2)(k/2−1)β`, sampled on `grid`.
/// (The mode index `m` does not enter.)
pub fn mode_reduce_fol<B: Fn(f64) -> C64>(beta: &B, k: i32, n: i32, grid: &[f64]) -> Vec<C64> {
    let (kf, nf) = (k as f64, n as f64);
    grid.iter()
        .map(|&y| {
            let (_, d2) = second_derivative(beta, y);
            let b = beta(y);
            -d2 * (y * y) + b * (4.0 * PI * PI * nf * nf * y * y - 2.0 * PI * kf * nf * y + weight_shift(k))
        })
        .collect()
}

/// Radial action of `−Δ^fol_k` on the untwisted mode `G(y) e(nx + m v/y)`:
/// `−y²G'' − kyG' + 4π²n²y²G − 2πkn yG`.
pub fn mode_reduce_plain<B: Fn(f64) -> C64>(g: &B, k: i32, n: i32, grid: &[f64]) -> Vec<C64> {
    let (kf, nf) = (k as f64, n as f64);
    grid.iter()
        .map(|&y| {
            let (d1, d2) = second_derivative(g, y);
            -d2 * (y * y) - d1 * (kf * y) + g(y) * (4.0 * PI * PI * nf * nf * y * y - 2.0 * PI * kf * nf * y)
        })
        .collect()
}

/// Least-squares `λ` with `−Δ^fol_k(G e) ≈ λ G e` on `grid` (untwisted profile).
pub fn fit_lambda<B: Fn(f64) -> C64>(k: i32, n: i32, g: &B, grid: &[f64]) -> f64 {
    let lg = mode_reduce_plain(g, k, n, grid);
    let mut num = C64::new(0.0, 0.0);
    let mut den = 0.0;
    for (y, l) in grid.iter().zip(&lg) {
        let b = g(*y);
        num += l * b.conj();
        den += b.norm_sqr();
    }
    (num / den).re
}

/// Relative residual `‖−Δ^fol(G e) − λ G e‖ / ‖G‖` on `grid`.
pub fn eigen_residual<B: Fn(f64) -> C64>(k: i32, n: i32, lambda: f64, g: &B, grid: &[f64]) -> f64 {
    let lg = mode_reduce_plain(g, k, n, grid);
    let mut num = 0.0;
    let mut den = 0.0;
    for (y, l) in grid.iter().zip(&lg) {
        let b = g(*y);
        num += (l - b * lambda).norm_sqr();
        den += b.norm_sqr();
    }
    (num / den).sqrt()
}

/// Apply a polynomial-coefficient differential operator on ℝ² numerically.
pub fn apply_diffop<F: Fn([f64; 2]) -> C64>(op: &DiffOpPoly, f: &F, w: [f64; 2], h: f64) -> C64 {
    op.terms()
        .iter()
        .map(|(&(a, b, c, d), coef)| {
            let der = partial_rich(f, w, [c as u8, d as u8], h, true);
            der * coef.to_c64() * w[0].powi(a as i32) * w[1].powi(b as i32)
        })
        .sum()
}

/// Outcome of [`quadratic_form_check`].
#[derive(Clone, Debug, Serialize)]
pub struct QuadraticFormReport {
    /// `⟨−Δ^(ε)φ, ψ⟩`
    pub operator_side: EstimateC,
    /// `Q^(ε)(φ, ψ)`
    pub form_side: EstimateC,
    /// Difference of the two, estimated on common samples.
    pub difference: EstimateC,
    /// `Q(φ, ψ) − conj Q(ψ, φ)` on common samples.
    pub symmetry: EstimateC,
}

/// Compare `⟨−Δ^(ε)_k φ, ψ⟩` with the gradient form
/// `∫ y^k ∇_{x,y}φ·∇_{x,y}ψ̄ + ik y^{k−1} ∂_xφ ψ̄ dx dy dp dq
///  + (ε/4) ∫ y^{k−2} ∇_{u,v}φ·∇_{u,v}ψ̄ dx dy du dv`
/// (the first two terms in `(x,y,p,q)` coordinates).
///
/// The test functions must be `1`-periodic in `x`, `p`, `q` and supported in
/// `y ∈ (y_lo, y_hi)`; the integrals are over the box
/// `[0,1) × (y_lo, y_hi) × [0,1)²`, sampled uniformly.
pub fn quadratic_form_check(
    phi: &ModularFunction,
    psi: &ModularFunction,
    k: i32,
    eps: f64,
    y_range: (f64, f64),
    samples: usize,
    seed: u64,
    s: &StencilSpec,
) -> Result<QuadraticFormReport> {
    check_weight(phi, k)?;
    check_weight(psi, k)?;
    let (y0, y1) = y_range;
    let vol = y1 - y0;
    let kf = k as f64;
    let batches = 20usize;
    let per = samples.div_ceil(batches);
    let mut rows: Vec<[(C64, usize); 4]> = Vec::new();
    for b in 0..batches {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64 + 1);
        let mut acc = [C64::new(0.0, 0.0); 4];
        for _ in 0..per {
            let (x, y, p, q) = (rng.gen::<f64>(), y0 + vol * rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
            let pt = JacobiPoint::from_pq(x, y, p, q);
            let lhs = -apply_compound(phi, k, eps, &pt, s)? * psi.eval(&pt).conj() * y.powf(kf - 2.0);
            let form = |a: &ModularFunction, c: &ModularFunction| -> Result<C64> {
                let da = |o| partial(a, &pt, Chart::Pq, o, s);
                let dc = |o| partial(c, &pt, Chart::Pq, o, s);
                let ua = |o| partial(a, &pt, Chart::Uv, o, s);
                let uc = |o| partial(c, &pt, Chart::Uv, o, s);
                let (ax, ay) = (da([1, 0, 0, 0])?, da([0, 1, 0, 0])?);
                let (cx, cy) = (dc([1, 0, 0, 0])?, dc([0, 1, 0, 0])?);
                let grad = (ax * cx.conj() + ay * cy.conj()) * y.powf(kf);
                let drift = I * kf * y.powf(kf - 1.0) * ax * c.eval(&pt).conj();
                // du dv = y dp dq
                let vert = (ua([0, 0, 1, 0])? * uc([0, 0, 1, 0])?.conj()
                    + ua([0, 0, 0, 1])? * uc([0, 0, 0, 1])?.conj())
                    * (0.25 * eps * y.powf(kf - 1.0));
                Ok(grad + drift + vert)
            };
            let q12 = form(phi, psi)?;
            let q21 = form(psi, phi)?;
            acc[0] += lhs * vol;
            acc[1] += q12 * vol;
            acc[2] += (lhs - q12) * vol;
            acc[3] += (q12 - q21.conj()) * vol;
        }
        rows.push(acc.map(|a| (a, per)));
    }
    let col = |j: usize| batch_estimate_c(&rows.iter().map(|r| r[j]).collect::<Vec<_>>());
    Ok(QuadraticFormReport { operator_side: col(0), form_side: col(1), difference: col(2), symmetry: col(3) })
}

/// Residuals of the two intertwining identities for Siegel–Veech transforms
/// of a smooth K-type-`k` function, relative to `max(|lhs|, 1)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SvCommutationReport {
    /// `Δ^fol_k SV(f) − SV((rep(2C) − c_k) f)`, with `c_k = (k/2)(k/2 − 1)`.
    pub foliated: f64,
    /// `Δ^tot_k SV(f)`; the Euclidean image of the cubic Casimir vanishes.
    pub total: f64,
}

pub fn sv_commutation_check(
    f: &PlaneFunction,
    m: u32,
    pt: &JacobiPoint,
    s: &StencilSpec,
) -> Result<SvCommutationReport> {
    let k = f.k;
    let phi = sv_rel_m_function(f, m);
    let lhs = apply_fol(&phi, k, pt, s)?;
    let op = euclidean_rep(&casimir_sl2()).scale(&GaussianRational::from_ints(2, 0));
    let h = 1e-3 * f.support;
    let ff = f.clone();
    let ck = weight_shift(k);
    let image = PlaneFunction::new(k, f.support, move |w| apply_diffop(&op, &|v| ff.eval(v), w, h) - ff.eval(w) * ck);
    let rhs = sv_rel_m(&image, pt, m);
    let tot = apply_tot(&phi, k, pt, s)?;
    Ok(SvCommutationReport {
        foliated: (lhs - rhs).norm() / lhs.norm().max(1.0),
        total: tot.norm() / lhs.norm().max(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::e;
    use crate::saff_group::{compose, from_iwasawa, slash, IwasawaCoords, SAff};
    use crate::special_fn::whittaker_profile;
    use proptest::prelude::*;

    fn mode(k: i32, n: f64, m: f64) -> ModularFunction {
        ModularFunction::new(k, move |p| e(n * p.x + m * p.v / p.y))
    }

    fn generic(k: i32) -> ModularFunction {
        ModularFunction::new(k, |p| {
            C64::new((p.x + 0.3 * p.u).sin() * p.y.powf(0.7), (p.v * 1.3 - p.x).cos() / (1.0 + p.y))
                + e(p.u * 0.5 + p.v * 0.2) * 0.3
        })
    }

    fn close(a: C64, b: C64, rel: f64) -> bool {
        (a - b).norm() <= rel * b.norm().max(1.0)
    }

    #[test]
    fn stencil_accuracy() {
        let f = |c: [f64; 1]| C64::new(c[0].sin(), 0.0);
        for (o, exact) in [(1u8, 0.7f64.cos()), (2, -0.7f64.sin()), (3, -0.7f64.cos())] {
            let d = partial_rich(&f, [0.7], [o], 2e-2, true);
            assert!((d.re - exact).abs() < 1e-8, "order {o}");
        }
    }

    #[test]
    fn total_casimir_eigenvalue() {
        let s = StencilSpec { richardson: true, ..Default::default() };
        let pt = JacobiPoint::new(0.13, 1.1, 0.37, 0.21);
        for (n, m) in [(1, 1), (2, 1), (1, -3)] {
            let phi = mode(0, n as f64, m as f64);
            let val = -apply_tot(&phi, 0, &pt, &s).unwrap() / phi.eval(&pt);
            let target = 4.0 * PI.powi(3) * (n * m * m) as f64;
            assert!(
                (val.re - target).abs() / target.abs() < 1e-5 && val.im.abs() < 1e-5 * target.abs(),
                "{n},{m}: {val}"
            );
        }
    }

    #[test]
    fn vertical_two_charts() {
        let s = StencilSpec::default();
        for m in [1.0, 2.0, -3.0] {
            let phi = mode(0, 0.0, m);
            let pt = JacobiPoint::new(0.2, 1.4, 0.3, 0.5);
            let a = apply_ver(&phi, &pt, &s).unwrap();
            let b = apply_ver_pq(&phi, &pt, &s).unwrap();
            let target = phi.eval(&pt) * (-PI * PI * m * m / pt.y);
            assert!(close(a, target, 1e-6) && close(b, target, 1e-6));
        }
    }

    #[test]
    fn simple_annihilations() {
        let s = StencilSpec::default();
        let pt = JacobiPoint::new(0.1, 0.9, 0.4, 0.2);
        let z_free = ModularFunction::new(0, |p| C64::new(p.x * p.y, p.y.ln()));
        assert!(apply_maass(Maass::RH, &z_free, 0, &pt, &s).unwrap().norm() < 1e-9);
        let hol = ModularFunction::new(2, |p| {
            let t = p.tau();
            (t * t + 1.0).inv() + t * 3.0
        });
        assert!(apply_maass(Maass::L, &hol, 2, &pt, &s).unwrap().norm() < 1e-8);
        assert!(apply_maass(Maass::L, &hol, 0, &pt, &s).is_err());
    }

    #[test]
    fn foliated_reduces_to_hyperbolic_laplacian() {
        // z-independent weight-0: y²(∂x² + ∂y²) of y^s e(x) is (s(s−1) − 4π²y²) y^s e(x)
        let s = StencilSpec::default();
        let f = ModularFunction::new(0, |p| e(p.x) * p.y.powf(1.3));
        let pt = JacobiPoint::new(0.3, 0.8, 0.1, 0.1);
        let v = apply_fol(&f, 0, &pt, &s).unwrap();
        let target = f.eval(&pt) * (1.3 * 0.3 - 4.0 * PI * PI * 0.64);
        assert!(close(v, target, 1e-7));
    }

    #[test]
    fn mode_reduction_trivial_cases() {
        let grid = [0.5, 1.0, 2.0];
        assert!(mode_reduce_fol(&|_| C64::new(1.0, 0.0), 0, 0, &grid).iter().all(|v| v.norm() < 1e-9));
        assert!(mode_reduce_fol(&|y| C64::new(y, 0.0), 0, 0, &grid).iter().all(|v| v.norm() < 1e-9));
    }

    #[test]
    fn mode_reduction_matches_4d_stencil() {
        let s = StencilSpec { richardson: true, ..Default::default() };
        for (k, n, m) in [(2, 1, 1), (0, 2, 1), (4, -1, 2), (1, 1, 3)] {
            let beta = |y: f64| C64::new((-y).exp() * y.powf(1.5), 0.0);
            let kf = k as f64;
            let phi = ModularFunction::new(k, move |p| {
                e(n as f64 * p.x + m as f64 * p.v / p.y) * beta(p.y) * p.y.powf(-0.5 * kf)
            });
            let y = 1.3;
            let pt = JacobiPoint::new(0.2, y, 0.4, 0.7);
            let direct = -apply_fol(&phi, k, &pt, &s).unwrap();
            let reduced =
                mode_reduce_fol(&beta, k, n, &[y])[0] * y.powf(-0.5 * kf) * e(n as f64 * pt.x + m as f64 * pt.v / y);
            assert!(close(direct, reduced, 1e-6), "k={k}: {direct} vs {reduced}");
        }
    }

    #[test]
    fn eigen_fits() {
        let grid: Vec<f64> = (0..40).map(|i| 0.3 * (1.06f64).powi(i)).collect();
        let t = 1.7;
        for k in [-3, 0, 1, 2, 4] {
            let s = C64::new(0.5 * (1 - k) as f64, t);
            let g = move |y: f64| C64::new(y, 0.0).powc(s);
            let lam = fit_lambda(k, 0, &g, &grid);
            assert!((lam - (t * t + 0.25 + weight_shift(k))).abs() < 1e-6, "k={k} {lam}");
            assert!(eigen_residual(k, 0, lam, &g, &grid) < 1e-8);
        }
        for k in [2, 3, 4] {
            let g = |y: f64| C64::new((-2.0 * PI * y).exp(), 0.0);
            assert!(fit_lambda(k, 1, &g, &grid).abs() < 1e-6);
            let w = move |y: f64| whittaker_profile(k, 1, t, y).unwrap() * (4.0 * PI).powf(0.5 * k as f64);
            let lam = fit_lambda(k, 1, &w, &grid);
            assert!((lam - (t * t + 0.25 + weight_shift(k))).abs() < 1e-5, "k={k} {lam}");
        }
    }

    #[test]
    fn foliated_factorizes_through_maass() {
        let s = StencilSpec::default();
        let pt = JacobiPoint::new(0.2, 1.2, 0.3, 0.4);
        for k in [-2, 0, 1, 3] {
            let phi = generic(k);
            let direct = apply_fol(&phi, k, &pt, &s).unwrap();
            let pq = apply_fol_pq(&phi, k, &pt, &s).unwrap();
            let composed = apply_maass(Maass::R, &maass_operator(Maass::L, &phi, &s), k - 2, &pt, &s).unwrap();
            assert!(close(pq, direct, 1e-6), "k={k}");
            assert!(close(composed, direct, 1e-4), "k={k}");
        }
    }

    #[test]
    fn total_factorization() {
        let s = StencilSpec { h_rel: 1e-2, richardson: true };
        let pt = JacobiPoint::new(0.2, 1.2, 0.3, 0.4);
        for k in [0, 1, 2] {
            let phi = generic(k);
            let direct = apply_tot(&phi, k, &pt, &s).unwrap();
            let fact = apply_tot_factorized(&phi, k, &pt, &s).unwrap();
            assert!(close(fact, direct, 1e-4), "k={k}: {fact} vs {direct}");
        }
    }

    #[test]
    fn quadratic_form_matches_operator() {
        let bump = |y: f64| if y <= 1.2 || y >= 2.8 { 0.0 } else { (-1.0 / ((y - 1.2) * (2.8 - y))).exp() * 50.0 };
        for k in [0, 2] {
            let phi = ModularFunction::new(k, move |p| (e(p.x + p.p()) + e(-p.q()) * 0.5) * bump(p.y));
            let psi =
                ModularFunction::new(k, move |p| (e(p.x + p.p()) * 0.7 + e(2.0 * p.p() - p.q())) * bump(p.y) * p.y);
            let r = quadratic_form_check(&phi, &psi, k, 0.5, (1.2, 2.8), 4000, 11, &StencilSpec::default()).unwrap();
            let d = r.difference;
            assert!(d.value().norm() < 3.0 * d.stderr + 1e-6, "k={k} {:?} {:?}", d, r.form_side);
            assert!(r.symmetry.value().norm() < 3.0 * r.symmetry.stderr + 1e-6);
            // real φ = ψ at k = 0 gives a sum of squares
            let re = ModularFunction::new(0, move |p| C64::new((2.0 * PI * p.x).cos() * bump(p.y), 0.0));
            let r0 = quadratic_form_check(&re, &re, 0, 0.5, (1.2, 2.8), 400, 3, &StencilSpec::default()).unwrap();
            assert!(r0.form_side.re > 0.0);
        }
    }

    prop_compose! {
        fn arb_g()(x in -1.0..1.0f64, ly in -0.5..0.5f64, w1 in -1.0..1.0f64, w2 in -1.0..1.0f64, th in 0.0..6.28f64) -> SAff {
            from_iwasawa(&IwasawaCoords { x, y: ly.exp(), w1, w2, theta: th })
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn maass_covariance(g in arb_g(), k in -2i32..=2) {
            let s = StencilSpec { richardson: true, ..Default::default() };
            let phi = generic(k);
            let pt = JacobiPoint::new(0.15, 1.1, 0.2, -0.3);
            for which in [Maass::L, Maass::R, Maass::LH, Maass::RH] {
                let lhs = slash(&maass_operator(which, &phi, &s), &g).eval(&pt);
                let rhs = apply_maass(which, &slash(&phi, &g), k, &pt, &s).unwrap();
                prop_assert!(close(lhs, rhs, 1e-6), "{which:?}: {lhs} vs {rhs}");
            }
            let eps = 0.3;
            let lhs = slash(&compound_operator(&phi, eps, &s), &g).eval(&pt);
            let rhs = apply_compound(&slash(&phi, &g), k, eps, &pt, &s).unwrap();
            prop_assert!(close(lhs, rhs, 1e-6));
            let _ = compose(&g, &g);
        }
    }

    #[test]
    fn siegel_veech_intertwining() {
        use crate::siegel_veech::KTypeFunction;
        let s = StencilSpec { h_rel: 2e-3, richardson: true };
        let pts = [JacobiPoint::new(0.13, 0.9, 0.21, 0.37), JacobiPoint::new(-0.4, 1.6, -0.3, 0.8)];
        for k in [-1, 0, 1, 2, 3] {
            for (m, pt) in [1u32, 2].iter().zip(&pts) {
                let r = sv_commutation_check(&KTypeFunction::bump(k, 1.3).plane(), *m, pt, &s).unwrap();
                assert!(r.foliated < 1e-4 && r.total < 1e-4, "k={k} M={m}: {r:?}");
            }
        }
    }
}
