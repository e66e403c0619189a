//! Siegel–Veech transforms on `H(0,0)`.
//!
//! A group element `(g, w)` is the marked torus whose period lattice is spanned
//! by the rows of `g` and whose relative period is `w`. The `M`-relative
//! configuration is `w + Λ/M`; the absolute one is the set of primitive vectors
//! of `Λ`. Planar points are row vectors `(v₁, v₂) ↔ λ = v₁ + i v₂`, so the
//! rotation `k(θ)` multiplies `λ` by `e^{iθ}` and a function `f₀(|λ|)e^{ik arg λ}`
//! transforms to a weight-`k` modular function.

use crate::heisenberg_fourier::{scalar_product_via_coeffs, CoeffCutoff, H0Table, QuadratureSpec};
use crate::quad::{EstimateC, GaussLegendre};
use crate::saff_group::{
    compose, inner_product, mc_average, GroupFunction, JacobiPoint, MCSpec, ModularFunction, SAff, Sl2,
};
use crate::special_fn::{hankel_at, RadialProfile};
use crate::{Result, StrataError, C64};
use num_integer::Integer;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

/// Period lattice (rows of `basis`) with a marked relative period `z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MarkedTorus {
    pub basis: [[f64; 2]; 2],
    pub z: [f64; 2],
}

impl MarkedTorus {
    pub fn from_group(h: &SAff) -> Self {
        Self { basis: [[h.g.a, h.g.b], [h.g.c, h.g.d]], z: h.w }
    }

    /// The torus of `(τ, z)`: basis `(√y, x/√y), (0, 1/√y)`, i.e. `⟨τ, 1⟩/√y`
    /// with coordinates swapped into `(Im, Re)` order.
    pub fn from_point(pt: &JacobiPoint) -> Self {
        Self::from_group(&pt.group_element())
    }

    pub fn covolume(&self) -> f64 {
        let [e1, e2] = self.basis;
        (e1[0] * e2[1] - e1[1] * e2[0]).abs()
    }

    /// Right action of `(A, p)`: every period is mapped by `v ↦ vA + p`
    /// (the translation only moves the marked point).
    pub fn act(&self, a: &SAff) -> Self {
        let [e1, e2] = self.basis;
        let z = a.g.row_mul(self.z);
        Self { basis: [a.g.row_mul(e1), a.g.row_mul(e2)], z: [z[0] + a.w[0], z[1] + a.w[1]] }
    }
}

/// Calls `visit(a, b, v)` for every `v = (a e₁ + b e₂)/M + z` with `|v| ≤ r`.
///
/// Rows are indexed by `a` along the normal of `e₂`, so each row is an
/// arithmetic progression and the `b`-range is solved for directly; the
/// ranges are padded by one and every candidate is tested exactly.
fn for_each_point<F: FnMut(i64, i64, [f64; 2])>(t: &MarkedTorus, m: u32, z: [f64; 2], r: f64, mut visit: F) {
    let mf = m as f64;
    let [e1, e2] = t.basis;
    let l2 = e2[0].hypot(e2[1]);
    let u = [e2[0] / l2, e2[1] / l2];
    let nrm = [-u[1], u[0]];
    let ne1 = nrm[0] * e1[0] + nrm[1] * e1[1];
    let nz = nrm[0] * z[0] + nrm[1] * z[1];
    let ue1 = u[0] * e1[0] + u[1] * e1[1];
    let uz = u[0] * z[0] + u[1] * z[1];
    let (a0, a1) = {
        let p = (-r - nz) * mf / ne1;
        let q = (r - nz) * mf / ne1;
        (p.min(q).floor() as i64 - 1, p.max(q).ceil() as i64 + 1)
    };
    let r2 = r * r;
    for a in a0..=a1 {
        let s = a as f64 * ne1 / mf + nz;
        if s.abs() > r * (1.0 + 1e-12) + 1e-300 {
            continue;
        }
        let half = (r2 - s * s).max(0.0).sqrt();
        let c = a as f64 * ue1 / mf + uz;
        let b0 = ((-half - c) * mf / l2).floor() as i64 - 1;
        let b1 = ((half - c) * mf / l2).ceil() as i64 + 1;
        for b in b0..=b1 {
            let v =
                [(a as f64 * e1[0] + b as f64 * e2[0]) / mf + z[0], (a as f64 * e1[1] + b as f64 * e2[1]) / mf + z[1]];
            if v[0] * v[0] + v[1] * v[1] <= r2 {
                visit(a, b, v);
            }
        }
    }
}

/// All points of `z + Λ/M` of norm at most `r`.
pub fn config_rel_m(t: &MarkedTorus, m: u32, r: f64) -> Result<Vec<[f64; 2]>> {
    if m == 0 {
        return Err(StrataError::InvalidParameter("M ≥ 1 required".into()));
    }
    let mut out = Vec::new();
    for_each_point(t, m, t.z, r, |_, _, v| out.push(v));
    Ok(out)
}

/// Primitive vectors of `Λ` of norm at most `r`.
pub fn config_abs(t: &MarkedTorus, r: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for_each_point(t, 1, [0.0, 0.0], r, |a, b, v| {
        if a.gcd(&b) == 1 {
            out.push(v)
        }
    });
    out
}

type PlaneEval = Arc<dyn Fn([f64; 2]) -> C64 + Send + Sync>;

/// Compactly supported function on ℝ²; `k` is its K-type (the weight of its
/// transforms) when it has one, and is otherwise only used for bookkeeping.
#[derive(Clone)]
pub struct PlaneFunction {
    pub k: i32,
    pub support: f64,
    eval: PlaneEval,
}

impl std::fmt::Debug for PlaneFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PlaneFunction").field("k", &self.k).field("support", &self.support).finish()
    }
}

impl PlaneFunction {
    pub fn new<F>(k: i32, support: f64, f: F) -> Self
    where
        F: Fn([f64; 2]) -> C64 + Send + Sync + 'static,
    {
        Self { k, support, eval: Arc::new(f) }
    }

    #[inline]
    pub fn eval(&self, v: [f64; 2]) -> C64 {
        if v[0] * v[0] + v[1] * v[1] > self.support * self.support {
            C64::new(0.0, 0.0)
        } else {
            (self.eval)(v)
        }
    }

    /// `∫ g(f(v)) dv` in polar coordinates (trapezoid in angle).
    fn polar_integral<G: Fn(C64) -> C64 + Sync>(&self, g: G) -> C64 {
        let gl = GaussLegendre::new(20);
        let nth = 128;
        let panels = 64;
        let h = self.support / panels as f64;
        (0..panels)
            .into_par_iter()
            .map(|i| {
                let mut acc = C64::new(0.0, 0.0);
                for (r, w) in gl.mapped(i as f64 * h, (i + 1) as f64 * h) {
                    let s: C64 = (0..nth)
                        .map(|j| {
                            let th = 2.0 * PI * j as f64 / nth as f64;
                            g(self.eval([r * th.cos(), r * th.sin()]))
                        })
                        .sum();
                    acc += s * (w * r * 2.0 * PI / nth as f64);
                }
                acc
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum()
    }

    pub fn integral(&self) -> C64 {
        self.polar_integral(|x| x)
    }

    pub fn norm_sq(&self) -> f64 {
        self.polar_integral(|x| C64::new(x.norm_sqr(), 0.0)).re
    }

    /// Angular mean of `∫ |∫ f((s, t)k(θ)) dt|² ds`: the coefficient of
    /// `M³√y` in the conditional second moment of the transform high in the cusp,
    /// where the configuration degenerates to one dense line.
    pub fn line_energy(&self) -> f64 {
        let gl = GaussLegendre::new(16);
        let nth = 64;
        let panels = 24;
        let r = self.support;
        let h = 2.0 * r / panels as f64;
        let nodes: Vec<(f64, f64)> = (0..panels)
            .flat_map(|i| gl.mapped(-r + i as f64 * h, -r + (i + 1) as f64 * h).collect::<Vec<_>>())
            .collect();
        let total: f64 = (0..nth)
            .into_par_iter()
            .map(|j| {
                let rot = Sl2::rotation(2.0 * PI * j as f64 / nth as f64);
                nodes
                    .iter()
                    .map(|&(s, ws)| {
                        let line: C64 = nodes.iter().map(|&(t, wt)| self.eval(rot.row_mul([s, t])) * wt).sum();
                        ws * line.norm_sqr()
                    })
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum();
        total / nth as f64
    }
}

/// `f(λ) = f₀(|λ|) e^{ik arg λ}`.
#[derive(Clone, Debug)]
pub struct KTypeFunction {
    pub profile: RadialProfile,
    pub k: i32,
}

impl KTypeFunction {
    pub fn new(k: i32, profile: RadialProfile) -> Self {
        Self { profile, k }
    }

    /// `r^{|k|} e^{−r²/(2σ²)}` cut at `9σ`.
    pub fn gaussian(k: i32, sigma: f64) -> Self {
        let ka = k.abs();
        let s2 = 2.0 * sigma * sigma;
        Self::new(k, RadialProfile::real(9.0 * sigma, move |r| r.powi(ka) * (-r * r / s2).exp()))
    }

    /// `r^{|k|} exp(−1/(1 − (r/R)²))`.
    pub fn bump(k: i32, radius: f64) -> Self {
        Self::new(k, RadialProfile::bump(k, radius))
    }

    pub fn eval(&self, v: [f64; 2]) -> C64 {
        let r = v[0].hypot(v[1]);
        let f0 = self.profile.eval(r);
        if self.k == 0 {
            f0
        } else {
            f0 * C64::from_polar(1.0, self.k as f64 * v[1].atan2(v[0]))
        }
    }

    /// `∫_{ℝ²} f = 2π ∫ f₀ r dr` when `k = 0`, else 0.
    pub fn integral(&self) -> C64 {
        if self.k != 0 {
            return C64::new(0.0, 0.0);
        }
        let gl = GaussLegendre::new(20);
        gl.composite_c(0.0, self.profile.support, 256, |r| self.profile.eval(r) * r) * (2.0 * PI)
    }

    pub fn mean_zero(&self) -> bool {
        self.integral().norm() <= 1e-14 * (2.0 * PI * self.profile.norm_sq()).sqrt().max(1e-300)
    }

    pub fn plane(&self) -> PlaneFunction {
        let f = self.clone();
        PlaneFunction::new(self.k, self.profile.support, move |v| f.eval(v))
    }
}

/// `Σ_{v ∈ w + Λ/M} f(v)` for the marked torus of `h`.
pub fn sv_group(f: &PlaneFunction, h: &SAff, m: u32) -> C64 {
    let t = MarkedTorus::from_group(h);
    let mut acc = C64::new(0.0, 0.0);
    for_each_point(&t, m.max(1), t.z, f.support, |_, _, v| acc += f.eval(v));
    acc
}

/// `Σ_{v ∈ Λ primitive} f(v)`; independent of the marked point.
pub fn sv_abs_group(f: &PlaneFunction, h: &SAff) -> C64 {
    let t = MarkedTorus::from_group(h);
    let mut acc = C64::new(0.0, 0.0);
    for_each_point(&t, 1, [0.0, 0.0], f.support, |a, b, v| {
        if a.gcd(&b) == 1 {
            acc += f.eval(v)
        }
    });
    acc
}

pub fn sv_group_function(f: &PlaneFunction, m: u32) -> GroupFunction {
    let f = f.clone();
    Arc::new(move |h: &SAff| sv_group(&f, h, m))
}

/// `SV_rel,M(f)(τ, z) = y^{−k/2} Σ_{a,b} f(λ_{a,b})`, where
/// `λ_{a,b} = (a/M + v/y)√y + i((ax + b)/M + u)/√y`.
pub fn sv_rel_m(f: &PlaneFunction, pt: &JacobiPoint, m: u32) -> C64 {
    sv_group(f, &pt.group_element(), m) * pt.y.powf(-0.5 * f.k as f64)
}

pub fn sv_rel_m_function(f: &PlaneFunction, m: u32) -> ModularFunction {
    let f = f.clone();
    ModularFunction::new(f.k, move |pt| sv_rel_m(&f, pt, m))
}

pub fn sv_abs(f: &PlaneFunction, pt: &JacobiPoint) -> C64 {
    sv_abs_group(f, &pt.group_element()) * pt.y.powf(-0.5 * f.k as f64)
}

pub fn sv_abs_function(f: &PlaneFunction) -> ModularFunction {
    let f = f.clone();
    ModularFunction::new(f.k, move |pt| sv_abs(&f, pt))
}

fn rotated(pt: &JacobiPoint, theta: f64) -> SAff {
    compose(&pt.group_element(), &SAff::linear(Sl2::rotation(theta)))
}

/// Monte-Carlo moment with its analytic cusp contribution folded in.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MomentReport {
    pub estimate: EstimateC,
    pub predicted: C64,
    /// Contribution of `y > y_max`, already included in `estimate`.
    pub tail: C64,
}

impl MomentReport {
    pub fn deviation_sigmas(&self) -> f64 {
        (self.estimate.value() - self.predicted).norm() / self.estimate.stderr
    }
}

fn with_tail(est: EstimateC, mc: &MCSpec, tail: C64) -> EstimateC {
    let keep = 1.0 - mc.tail_mass();
    EstimateC { re: keep * est.re + tail.re, im: keep * est.im + tail.im, stderr: keep * est.stderr }
}

/// `∫ SV_rel,M(f) dμ` against the prediction `M²∫f`. Above `y_max` the
/// conditional mean is exactly `M²∫f`, so the tail is added in closed form.
pub fn sv_mean_mc(f: &PlaneFunction, m: u32, mc: &MCSpec) -> MomentReport {
    let intf = f.integral();
    let c = (m * m) as f64;
    let est = mc_average(mc, |pt, th| sv_group(f, &rotated(pt, th), m));
    let tail = intf * c * mc.tail_mass();
    MomentReport { estimate: with_tail(est, mc, tail), predicted: intf * c, tail }
}

/// `∫ |SV_rel,M(f)|² dμ` against `M⁴|∫f|² + M²∫|f|²`. For `y > (2MR)²` only one
/// line of the configuration meets the support, so the conditional second
/// moment is `M³√y·J` with `J` the [`PlaneFunction::line_energy`]; the tail
/// integral is `(3/π)·M³J·2/√y_max`.
pub fn sv_second_moment_mc(f: &PlaneFunction, m: u32, mc: &MCSpec) -> MomentReport {
    let intf = f.integral();
    let mf = m as f64;
    let predicted = mf.powi(4) * intf.norm_sqr() + mf * mf * f.norm_sq();
    let est = mc_average(mc, |pt, th| C64::new(sv_group(f, &rotated(pt, th), m).norm_sqr(), 0.0));
    let tail = 3.0 / PI * mf.powi(3) * f.line_energy() * 2.0 / mc.y_max.sqrt();
    MomentReport {
        estimate: with_tail(est, mc, C64::new(tail, 0.0)),
        predicted: C64::new(predicted, 0.0),
        tail: C64::new(tail, 0.0),
    }
}

/// Formal adjoint of `SV_rel,1`: `SV*h(λ) = ∫ h(g, λ) dg` over
/// `SL₂(ℤ)\SL₂(ℝ)` with probability measure, so that
/// `⟨SV f, h⟩ = ∫_{ℝ²} f · conj(SV*h)`. `h` must be left
/// `SAff₂(ℤ)`-invariant and negligible above `y_max`.
pub fn sv_adjoint(h: &GroupFunction, lambda: [f64; 2], mc: &MCSpec) -> EstimateC {
    let est = mc_average(mc, |pt, th| {
        let g = pt.group_element().g.mul(&Sl2::rotation(th));
        h(&SAff::new(g, lambda))
    });
    with_tail(est, mc, C64::new(0.0, 0.0))
}

/// Both sides of `⟨SV f, h⟩ = ⟨f, SV*h⟩`; `rhs` integrates `λ` uniformly
/// over the square `[−R, R]²` containing the support, with an independent
/// sample stream.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DualityReport {
    pub lhs: EstimateC,
    pub rhs: EstimateC,
    pub difference: f64,
    pub combined_stderr: f64,
}

pub fn adjoint_duality(f: &PlaneFunction, h: &GroupFunction, mc: &MCSpec) -> DualityReport {
    let keep = 1.0 - mc.tail_mass();
    let lhs = mc_average(mc, |pt, th| {
        let e = rotated(pt, th);
        sv_group(f, &e, 1) * h(&e).conj()
    });
    let r = f.support;
    let area = 4.0 * r * r;
    let mc2 = MCSpec { seed: mc.seed.wrapping_add(0x9e37_79b9_7f4a_7c15), ..*mc };
    let rhs = mc_average(&mc2, |pt, th| {
        let lam = [(2.0 * pt.p() - 1.0) * r, (2.0 * pt.q() - 1.0) * r];
        let g = pt.group_element().g.mul(&Sl2::rotation(th));
        f.eval(lam) * h(&SAff::new(g, lam)).conj()
    });
    let scale = |e: EstimateC, s: f64| EstimateC { re: e.re * s, im: e.im * s, stderr: e.stderr * s };
    let (lhs, rhs) = (scale(lhs, keep), scale(rhs, keep * area));
    DualityReport {
        lhs,
        rhs,
        difference: (lhs.value() - rhs.value()).norm(),
        combined_stderr: lhs.stderr.hypot(rhs.stderr),
    }
}

/// Bounded invariant test function `e^{−ρ·ht} SV_rel,1(f)`, where `ht` is the
/// height of the reduced `τ`.
pub fn height_damped_transform(f: &PlaneFunction, rho: f64) -> GroupFunction {
    let f = f.clone();
    Arc::new(move |h: &SAff| {
        let tau = h.g.mobius(C64::new(0.0, 1.0));
        let (_, red) = crate::saff_group::reduce_to_fundamental(&JacobiPoint::new(tau.re, tau.im, 0.0, 0.0));
        sv_group(&f, h, 1) * (-rho * red.y).exp()
    })
}

/// One measured `c^{H0}(SV_rel,M(f); n, m̃; y)` and its predictions.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SvCoeffRow {
    pub n: i32,
    pub m: i32,
    pub y: f64,
    pub measured: C64,
    /// `(mM)²(T_M ℋ_k f₀)(y/m²) = M² y (ℋ_k f₀)(2π|m|M/√y)` as stated, for `m̃ = mM ≠ 0`.
    pub stated: Option<C64>,
    /// `y^{−k/2} M² f̂(m̃/√y, 0) = (−i·sgn m̃)^k 2π M² y^{−k/2} (ℋ_k f₀)(2π|m̃|/√y)`.
    pub direct: C64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SvCoeffReport {
    pub rows: Vec<SvCoeffRow>,
    /// Largest relative error of the stated formula over nonzero predictions.
    pub stated_rel: f64,
    /// Largest relative error of the direct Fourier computation.
    pub direct_rel: f64,
    /// Largest modulus among coefficients predicted to vanish.
    pub zero_abs: f64,
}

/// Measures `c^{H0}(SV_rel,M(f); n, m̃; y)` for `|n| ≤ n_max`, `|m̃| ≤ m_max`
/// on `y_grid` and compares with both closed forms. Relative errors are taken
/// where the prediction exceeds `1e−8`; smaller predictions count as zeros
/// and are held to the same absolute bound as the vanishing entries.
pub fn sv_coeffs_check(
    f: &KTypeFunction,
    m_rel: u32,
    y_grid: &[f64],
    n_max: i32,
    m_max: i32,
    q: &QuadratureSpec,
) -> Result<SvCoeffReport> {
    q.validate()?;
    if m_rel == 0 {
        return Err(StrataError::InvalidParameter("M ≥ 1 required".into()));
    }
    if n_max >= (q.nodes / 2) as i32 || m_max >= (q.v_nodes / 2) as i32 {
        return Err(StrataError::InvalidParameter("index range exceeds quadrature resolution".into()));
    }
    let phi = sv_rel_m_function(&f.plane(), m_rel);
    let k = f.k;
    let mm = m_rel as f64;
    let mut rows = Vec::new();
    for &y in y_grid {
        let table = H0Table::new(&phi, y, q);
        for n in -n_max..=n_max {
            for mt in -m_max..=m_max {
                let measured = table.get(n, mt);
                let on_support = n == 0 && mt % m_rel as i32 == 0;
                let (stated, direct) = if !on_support {
                    (None, C64::new(0.0, 0.0))
                } else if mt == 0 {
                    (None, f.integral() * (mm * mm * y.powf(-0.5 * k as f64)))
                } else {
                    let s = 2.0 * PI * mt.unsigned_abs() as f64 / y.sqrt();
                    let hk = hankel_at(k, &f.profile, s)?;
                    let phase = C64::new(0.0, -(mt.signum() as f64)).powi(k);
                    (Some(hk * (mm * mm * y)), phase * hk * (2.0 * PI * mm * mm * y.powf(-0.5 * k as f64)))
                };
                rows.push(SvCoeffRow { n, m: mt, y, measured, stated, direct });
            }
        }
    }
    let rel = |a: C64, b: C64| (a - b).norm() / b.norm();
    let mut report = SvCoeffReport { rows, stated_rel: 0.0, direct_rel: 0.0, zero_abs: 0.0 };
    for r in &report.rows {
        if r.direct.norm() > 1e-8 {
            report.direct_rel = report.direct_rel.max(rel(r.measured, r.direct));
            if let Some(s) = r.stated {
                report.stated_rel = report.stated_rel.max(rel(r.measured, s));
            }
        } else {
            report.zero_abs = report.zero_abs.max(r.measured.norm());
        }
    }
    Ok(report)
}

/// `⟨SV_rel,M(f), φ⟩` by two routes: the coefficient sum (exact up to
/// quadrature and truncation) and Monte Carlo.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OrthogonalityReport {
    pub via_coeffs: C64,
    pub via_mc: EstimateC,
}

pub fn orthogonality_to_cusp(
    f: &PlaneFunction,
    m_rel: u32,
    phi: &ModularFunction,
    cut: &CoeffCutoff,
    q: &QuadratureSpec,
    mc: &MCSpec,
) -> Result<OrthogonalityReport> {
    let sv = sv_rel_m_function(f, m_rel);
    let via_coeffs = scalar_product_via_coeffs(&sv, phi, cut, q)?;
    let via_mc = inner_product(&sv, phi, mc)?;
    Ok(OrthogonalityReport { via_coeffs, via_mc })
}
