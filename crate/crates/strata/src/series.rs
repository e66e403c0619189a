//! Affine Eisenstein and Poincaré series as truncated coset sums, the radial
//! profiles that feed them, and the classical non-holomorphic Eisenstein
//! series with its Fourier-expansion continuation.

use crate::quad::GaussLegendre;
use crate::saff_group::{JacobiPoint, ModularFunction};
use crate::special_fn::{bessel_k, gamma_real, gamma_w, whittaker_w, xi, zeta, WhittakerParams};
use crate::{e, Result, StrataError, C64};
use num_integer::Integer;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;
use std::sync::Arc;

/// Representative of `Γ∞⁺\SL₂(ℤ)`: bottom row `(c, d)` and a fixed completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Coset {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl Coset {
    /// Completion with `ad − bc = 1` and minimal `|a|`, ties to `a > 0`.
    pub fn complete(c: i64, d: i64) -> Result<Self> {
        let g = c.extended_gcd(&d);
        if g.gcd != 1 {
            return Err(StrataError::InvalidParameter(format!("({c}, {d}) is not a primitive pair")));
        }
        // x c + y d = 1, so (a, b) = (y, −x) works; shift by multiples of (c, d)
        let (mut a, mut b) = (g.y, -g.x);
        if c != 0 {
            let t = (-(a as f64) / c as f64).round() as i64;
            let mut best = (a + t * c, b + t * d);
            for dt in [-1, 1] {
                let cand = (a + (t + dt) * c, b + (t + dt) * d);
                let better = cand.0.abs() < best.0.abs() || (cand.0.abs() == best.0.abs() && cand.0 > best.0);
                if better {
                    best = cand;
                }
            }
            (a, b) = best;
        } else {
            (a, b) = (d, 0);
        }
        debug_assert_eq!(a * d - b * c, 1);
        Ok(Self { a, b, c, d })
    }

    pub fn j(&self, tau: C64) -> C64 {
        tau * self.c as f64 + self.d as f64
    }
}

/// Every primitive `(c, d)` with `|c|, |d| ≤ R`; both signs are present because
/// `Γ∞⁺` does not contain `−I`.
#[derive(Clone, Debug, Serialize)]
pub struct CosetList {
    pub radius: i64,
    pub cosets: Vec<Coset>,
}

pub fn coset_list(radius: i64) -> Result<CosetList> {
    if radius < 1 {
        return Err(StrataError::InvalidParameter("coset radius must be ≥ 1".into()));
    }
    let cosets = (-radius..=radius)
        .flat_map(|c| (-radius..=radius).map(move |d| (c, d)))
        .filter(|&(c, d)| c.gcd(&d) == 1)
        .map(|(c, d)| Coset::complete(c, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(CosetList { radius, cosets })
}

/// Primitive `(c, d)` with `|cτ + d|² ≤ bound`, i.e. `Im(γτ) ≥ y / bound`.
pub fn cosets_in_ellipse(tau: C64, bound: f64) -> Vec<Coset> {
    let (x, y) = (tau.re, tau.im);
    let cmax = (bound.sqrt() / y).floor() as i64;
    let mut out = Vec::new();
    for c in -cmax..=cmax {
        let rem = bound - (c * c) as f64 * y * y;
        if rem < 0.0 {
            continue;
        }
        let r = rem.sqrt();
        let centre = -(c as f64) * x;
        for d in (centre - r).ceil() as i64..=(centre + r).floor() as i64 {
            if c.gcd(&d) == 1 {
                out.push(Coset::complete(c, d).expect("primitive"));
            }
        }
    }
    out
}

/// `|β(y)| ≤ A y^{1−k/2+ε₀}` on `(0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthCertificate {
    pub a: f64,
    pub eps0: f64,
}

/// Behaviour of `β` on `[1, ∞)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum DecayCertificate {
    /// `β = 0` beyond this height.
    Compact(f64),
    /// `|β(y)| ≤ b e^{−rate·y}`.
    Exponential { b: f64, rate: f64 },
    /// `|β(y)| ≤ b y^{−exponent}`.
    Power { b: f64, exponent: f64 },
}

type BetaEval = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

/// Radial profile `β` of an affine series, with its growth and decay bounds.
#[derive(Clone)]
pub struct BetaProfile {
    eval: BetaEval,
    pub k: i32,
    pub growth: GrowthCertificate,
    pub decay: DecayCertificate,
    /// `β` vanishes outside this interval.
    pub support: Option<(f64, f64)>,
}

impl std::fmt::Debug for BetaProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BetaProfile")
            .field("k", &self.k)
            .field("growth", &self.growth)
            .field("decay", &self.decay)
            .field("support", &self.support)
            .finish()
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
}

impl BetaProfile {
    pub fn new<F>(k: i32, growth: GrowthCertificate, decay: DecayCertificate, f: F) -> Self
    where
        F: Fn(f64) -> C64 + Send + Sync + 'static,
    {
        Self { eval: Arc::new(f), k, growth, decay, support: None }
    }

    /// Profile supported in `[lo, hi]`; the certificates are read off by
    /// sampling with `ε₀ = 1`.
    pub fn compact<F>(k: i32, lo: f64, hi: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> C64 + Send + Sync + 'static,
    {
        if !(lo > 0.0 && hi > lo) {
            return Err(StrataError::InvalidParameter(format!("bad support [{lo}, {hi}]")));
        }
        let f = Arc::new(f);
        let expo = 2.0 - 0.5 * k as f64;
        let a = log_grid(lo, hi.min(1.0).max(lo), 400).map(|y| f(y).norm() / y.powf(expo)).fold(0.0, f64::max) * 1.01
            + 1e-300;
        let g = f.clone();
        Ok(Self {
            eval: Arc::new(move |y| if y < lo || y > hi { C64::new(0.0, 0.0) } else { g(y) }),
            k,
            growth: GrowthCertificate { a, eps0: 1.0 },
            decay: DecayCertificate::Compact(hi),
            support: Some((lo, hi)),
        })
    }

    #[inline]
    pub fn eval(&self, y: f64) -> C64 {
        (self.eval)(y)
    }

    /// Check both bounds on log grids over `[1e−6, 1]` and `[1, 1e3]`.
    pub fn check_certificates(&self) -> Result<()> {
        let expo = 1.0 - 0.5 * self.k as f64 + self.growth.eps0;
        if self.growth.eps0 < 0.0 {
            return Err(StrataError::Certificate(format!("negative growth margin ε₀ = {}", self.growth.eps0)));
        }
        for y in log_grid(1e-6, 1.0, 300) {
            let v = self.eval(y).norm();
            if v > self.growth.a * y.powf(expo) * (1.0 + 1e-9) + 1e-300 {
                return Err(StrataError::Certificate(format!("growth bound fails at y = {y:.3e}")));
            }
        }
        for y in log_grid(1.0, 1e3, 300) {
            let v = self.eval(y).norm();
            let bound = match self.decay {
                DecayCertificate::Compact(h) => {
                    if y > h {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                }
                DecayCertificate::Exponential { b, rate } => b * (-rate * y).exp(),
                DecayCertificate::Power { b, exponent } => b * y.powf(-exponent),
            };
            if v > bound * (1.0 + 1e-9) + 1e-300 {
                return Err(StrataError::Certificate(format!("decay bound fails at y = {y:.3e}")));
            }
        }
        Ok(())
    }

    /// Whether the coset sum converges absolutely (`ε₀ > 0`).
    pub fn absolutely_convergent(&self) -> bool {
        self.growth.eps0 > 0.0
    }

    /// `∫ |β|² y^{k−2} dy`, the squared norm of `y^{(k−1)/2}β` for the Haar
    /// measure, by Gauss–Legendre in `log y` on `[lo, hi]`.
    pub fn haar_norm_sq(&self, lo: f64, hi: f64, panels: usize) -> f64 {
        let gl = GaussLegendre::new(20);
        let k = self.k as f64;
        gl.composite(lo.ln(), hi.ln(), panels, |s| {
            let y = s.exp();
            self.eval(y).norm_sqr() * y.powf(k - 1.0)
        })
    }
}

/// `e^{−2π|n|y}` for `k ≥ 2`, `y^{−k} e^{−2π|n|y}` for `k ≤ −2`; requires `nk > 0`.
///
/// At `|k| = 2` the growth margin is `ε₀ = 0`: the coset sum is then only
/// conditionally convergent, as for weight-two holomorphic Poincaré series.
pub fn beta_discrete(k: i32, n: i32) -> Result<BetaProfile> {
    if k.abs() < 2 || (n as i64) * (k as i64) <= 0 {
        return Err(StrataError::InvalidParameter(format!(
            "discrete profile needs |k| ≥ 2 and nk > 0, got k={k}, n={n}"
        )));
    }
    let rate = 2.0 * PI * n.abs() as f64;
    let growth = GrowthCertificate { a: 1.0, eps0: 0.5 * k.abs() as f64 - 1.0 };
    if k > 0 {
        Ok(BetaProfile::new(k, growth, DecayCertificate::Exponential { b: 1.0, rate }, move |y| {
            C64::new((-rate * y).exp(), 0.0)
        }))
    } else {
        let p = -k;
        // y^p e^{−ry} ≤ b e^{−ry/2} with b = sup_y y^p e^{−ry/2} = (2p/(re))^p
        let b = (2.0 * p as f64 / (rate * std::f64::consts::E)).powi(p);
        Ok(BetaProfile::new(k, growth, DecayCertificate::Exponential { b: b.max(1.0), rate: 0.5 * rate }, move |y| {
            C64::new(y.powi(p) * (-rate * y).exp(), 0.0)
        }))
    }
}

/// Value of a truncated series with its tail estimate.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SeriesValue {
    pub value: C64,
    /// Upper bound on the omitted terms (`0` when the truncation is exact,
    /// `∞` when no bound is available).
    pub tail_bound: f64,
    pub terms: usize,
}

/// Coset enumeration strategy.
#[derive(Clone, Debug)]
pub enum Truncation {
    /// All primitive `(c, d)` in the box `|c|, |d| ≤ R`.
    Box(Arc<CosetList>),
    /// Exact for profiles supported in `[y_lo, ∞)`: only cosets with
    /// `Im(γτ) ≥ y_lo` contribute.
    Height,
}

/// `2^{−1/2} Σ_{γ ∈ Γ∞⁺\SL₂(ℤ)} (β(y) e(nx + m v/y))|′_k γ`.
#[derive(Clone, Debug)]
pub struct AffineSeries {
    pub k: i32,
    pub n: i32,
    pub m: i32,
    pub beta: BetaProfile,
    pub truncation: Truncation,
}

impl AffineSeries {
    /// Poincaré series; `n = 0` gives the affine Eisenstein series. Profiles
    /// with compact support use the exact height truncation, others the box
    /// of radius `radius`.
    pub fn new(k: i32, n: i32, m: i32, beta: BetaProfile, radius: i64) -> Result<Self> {
        if beta.k != k {
            return Err(StrataError::WeightMismatch(beta.k, k));
        }
        beta.check_certificates()?;
        let truncation =
            if beta.support.is_some() { Truncation::Height } else { Truncation::Box(Arc::new(coset_list(radius)?)) };
        Ok(Self { k, n, m, beta, truncation })
    }

    fn summand(&self, g: &Coset, pt: &JacobiPoint) -> C64 {
        let tau = pt.tau();
        let j = g.j(tau);
        let tau_g = (tau * g.a as f64 + g.b as f64) / j;
        let vy = (pt.v / pt.y) * (g.c as f64 * pt.x + g.d as f64) - g.c as f64 * pt.u;
        let b = self.beta.eval(tau_g.im);
        if b == C64::new(0.0, 0.0) {
            return b;
        }
        j.powi(-self.k) * b * e(self.n as f64 * tau_g.re + self.m as f64 * vy)
    }

    pub fn eval(&self, pt: &JacobiPoint) -> SeriesValue {
        match &self.truncation {
            Truncation::Height => {
                let (lo, _) = self.beta.support.expect("height truncation needs compact support");
                let cos = cosets_in_ellipse(pt.tau(), pt.y / lo);
                let value: C64 = cos.iter().map(|g| self.summand(g, pt)).sum::<C64>() * FRAC_1_SQRT_2;
                SeriesValue { value, tail_bound: 0.0, terms: cos.len() }
            }
            Truncation::Box(list) => {
                let value: C64 = list.cosets.iter().map(|g| self.summand(g, pt)).sum::<C64>() * FRAC_1_SQRT_2;
                SeriesValue { value, tail_bound: self.box_tail(pt, list.radius), terms: list.cosets.len() }
            }
        }
    }

    /// From `|summand| ≤ A y^{−k/2} Im(γτ)^{1+ε₀}` and
    /// `|cτ+d|² ≥ κ (c² + d²)` with `κ` the smaller eigenvalue of the form.
    fn box_tail(&self, pt: &JacobiPoint, radius: i64) -> f64 {
        let GrowthCertificate { a, eps0 } = self.beta.growth;
        if eps0 <= 0.0 {
            return f64::INFINITY;
        }
        let (x, y) = (pt.x, pt.y);
        let (p, q) = (x * x + y * y, 1.0);
        let kappa = 0.5 * (p + q - ((p - q).powi(2) + 4.0 * x * x).sqrt());
        let rho = (radius + 1) as f64;
        if y / (kappa * rho * rho) > 1.0 {
            return f64::INFINITY;
        }
        let lattice = PI * (rho - 1.0).powf(-2.0 * eps0) / eps0;
        FRAC_1_SQRT_2 * a * y.powf(-0.5 * self.k as f64) * (y / kappa).powf(1.0 + eps0) * lattice
    }

    pub fn as_modular_function(&self) -> ModularFunction {
        let s = self.clone();
        ModularFunction::new(self.k, move |pt| s.eval(pt).value)
    }
}

pub fn eisenstein(k: i32, m: i32, beta: &BetaProfile, pt: &JacobiPoint, radius: i64) -> Result<SeriesValue> {
    Ok(AffineSeries::new(k, 0, m, beta.clone(), radius)?.eval(pt))
}

pub fn poincare(k: i32, n: i32, m: i32, beta: &BetaProfile, pt: &JacobiPoint, radius: i64) -> Result<SeriesValue> {
    Ok(AffineSeries::new(k, n, m, beta.clone(), radius)?.eval(pt))
}

/// A test function `ψ` on the spectral line with its integration window.
#[derive(Clone)]
pub struct SpectralWindow {
    pub psi: Arc<dyn Fn(f64) -> C64 + Send + Sync>,
    pub lo: f64,
    pub hi: f64,
    /// Gauss–Legendre panels (16 nodes each) over `[lo, hi]`.
    pub panels: usize,
}

impl std::fmt::Debug for SpectralWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralWindow")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("panels", &self.panels)
            .finish()
    }
}

impl SpectralWindow {
    pub fn new<F>(lo: f64, hi: f64, panels: usize, psi: F) -> Self
    where
        F: Fn(f64) -> C64 + Send + Sync + 'static,
    {
        Self { psi: Arc::new(psi), lo, hi, panels }
    }

    /// `exp(−(t−t₀)²/(2σ²))` on `[t₀ − 8σ, t₀ + 8σ]` (clipped at `t > 0`).
    pub fn gaussian(t0: f64, sigma: f64) -> Self {
        let lo = (t0 - 8.0 * sigma).max(1e-3);
        Self::new(lo, t0 + 8.0 * sigma, 12, move |t| C64::new((-(t - t0).powi(2) / (2.0 * sigma * sigma)).exp(), 0.0))
    }

    fn nodes(&self) -> Vec<(f64, f64)> {
        let gl = GaussLegendre::new(16);
        let h = (self.hi - self.lo) / self.panels as f64;
        (0..self.panels)
            .flat_map(|p| gl.mapped(self.lo + p as f64 * h, self.lo + (p + 1) as f64 * h).collect::<Vec<_>>())
            .collect()
    }

    /// `∫ |ψ|² dt`.
    pub fn norm_sq(&self) -> f64 {
        self.nodes().iter().map(|&(t, w)| w * (self.psi)(t).norm_sqr()).sum()
    }
}

/// Precomputed Whittaker transform
/// `β(y) = (4π|n|^{3/2})^{−1} ∫ ψ(t) (Γ^W(t)Γ^W(−t))^{−1/2} y^{−k/2} W_{sgn(n)k/2, it}(4π|n|y) dt`.
#[derive(Clone, Debug)]
pub struct WhittakerTransform {
    pub k: i32,
    pub n: i32,
    weights: Vec<(f64, C64)>,
}

impl WhittakerTransform {
    pub fn new(k: i32, n: i32, window: &SpectralWindow) -> Result<Self> {
        if n == 0 {
            return Err(StrataError::InvalidParameter("Whittaker transform needs n ≠ 0".into()));
        }
        let pref = 1.0 / (4.0 * PI * (n.abs() as f64).powf(1.5));
        let weights = window
            .nodes()
            .into_iter()
            .map(|(t, w)| {
                // Γ^W(−t) = conj Γ^W(t) for real t
                let g = gamma_w(t, k, n.signum())?;
                Ok((t, (window.psi)(t) * (w * pref / g.norm())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { k, n, weights })
    }

    pub fn eval(&self, y: f64) -> Result<C64> {
        let z = 4.0 * PI * self.n.abs() as f64 * y;
        let mut acc = C64::new(0.0, 0.0);
        for &(t, w) in &self.weights {
            acc += w * whittaker_w(WhittakerParams::for_mode(self.k, self.n.signum(), t), z)?;
        }
        Ok(acc * y.powf(-0.5 * self.k as f64))
    }

    /// `∫ |β|² y^{k−2} dy` over `log y ∈ [s_lo, s_hi]`.
    pub fn haar_norm_sq(&self, s_lo: f64, s_hi: f64, panels: usize) -> Result<f64> {
        let gl = GaussLegendre::new(16);
        let h = (s_hi - s_lo) / panels as f64;
        let k = self.k as f64;
        let pts: Vec<(f64, f64)> = (0..panels)
            .flat_map(|p| gl.mapped(s_lo + p as f64 * h, s_lo + (p + 1) as f64 * h).collect::<Vec<_>>())
            .collect();
        let vals = pts
            .par_iter()
            .map(|&(s, w)| {
                let y = s.exp();
                Ok(w * self.eval(y)?.norm_sqr() * y.powf(k - 1.0))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(vals.iter().sum())
    }

    /// The transform as a series profile; growth is certified by sampling
    /// with margin `ε₀ = 0.1`.
    pub fn profile(&self) -> Result<BetaProfile> {
        let me = self.clone();
        let eps0 = 0.1;
        let expo = 1.0 - 0.5 * self.k as f64 + eps0;
        let mut a: f64 = 0.0;
        for y in log_grid(1e-6, 1.0, 120) {
            a = a.max(self.eval(y)?.norm() / y.powf(expo));
        }
        let rate = 2.0 * PI * self.n.abs() as f64 * 0.99;
        let mut b: f64 = 0.0;
        for y in log_grid(1.0, 1e3, 120) {
            b = b.max(self.eval(y)?.norm() * (rate * y).exp());
        }
        Ok(BetaProfile::new(
            self.k,
            GrowthCertificate { a: a * 1.5 + 1e-300, eps0 },
            DecayCertificate::Exponential { b: b * 1.5 + 1e-300, rate },
            move |y| me.eval(y).unwrap_or(C64::new(f64::NAN, 0.0)),
        ))
    }
}

/// One value of the Whittaker transform.
pub fn beta_whittaker(k: i32, n: i32, window: &SpectralWindow, y: f64) -> Result<C64> {
    WhittakerTransform::new(k, n, window)?.eval(y)
}

/// `‖y^{(k−1)/2}β^W‖² / ‖ψ‖²`. The Kontorovich–Lebedev orthogonality
/// `∫ W_{κ,it₁} W_{κ,−it₂} z^{−2} dz = 2π Γ^W(t)Γ^W(−t) δ(t₁ − t₂)` predicts
/// `1/(2n²)` for every `k`, which is what this measures.
pub fn whittaker_isometry_constant(k: i32, n: i32, window: &SpectralWindow, s_lo: f64, panels: usize) -> Result<f64> {
    let tr = WhittakerTransform::new(k, n, window)?;
    // W decays like e^{−z/2}; stop at z = 140
    let s_hi = (140.0 / (4.0 * PI * n.abs() as f64)).ln();
    Ok(tr.haar_norm_sq(s_lo, s_hi, panels)? / window.norm_sq())
}

/// Sign in the y-power transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PowerSign {
    Plus,
    Minus,
}

/// `β^{c±}(y) = ∫ ψ(t) (y^{(1−k)/2+it} ± y^{(1−k)/2−it}) dt`.
pub fn beta_ypower(k: i32, window: &SpectralWindow, sign: PowerSign, y: f64) -> C64 {
    let sg = if sign == PowerSign::Plus { 1.0 } else { -1.0 };
    let base = y.powf(0.5 * (1 - k) as f64);
    let ly = y.ln();
    window
        .nodes()
        .iter()
        .map(|&(t, w)| (window.psi)(t) * w * (C64::from_polar(1.0, t * ly) + sg * C64::from_polar(1.0, -t * ly)))
        .sum::<C64>()
        * base
}

/// `(‖y^{(k−1)/2}β^{c+}‖², ‖y^{(k−1)/2}β^{c−}‖², ⟨β^{c+}, β^{c−}⟩)` with the
/// `y`-integral restricted to `(ε, 1/ε)`.
pub fn ypower_gram(k: i32, window: &SpectralWindow, eps: f64) -> (f64, f64, C64) {
    let gl = GaussLegendre::new(16);
    let l = -eps.ln();
    let panels = (8.0 * l * window.hi).ceil() as usize;
    let kf = k as f64;
    let (mut pp, mut mm, mut pm) = (0.0, 0.0, C64::new(0.0, 0.0));
    for s0 in 0..panels {
        let a = -l + 2.0 * l * s0 as f64 / panels as f64;
        let b = -l + 2.0 * l * (s0 + 1) as f64 / panels as f64;
        for (s, w) in gl.mapped(a, b) {
            let y = s.exp();
            let p = beta_ypower(k, window, PowerSign::Plus, y);
            let m = beta_ypower(k, window, PowerSign::Minus, y);
            // y^{k−2} dy = y^{k−1} ds
            let jac = w * y.powf(kf - 1.0);
            pp += jac * p.norm_sqr();
            mm += jac * m.norm_sqr();
            pm += p * m.conj() * jac;
        }
    }
    (pp, mm, pm)
}

/// `E_k(τ|ψ) = Σ_{(c,d) primitive} ((cτ+d)/|cτ+d|)^k ψ(y / |cτ+d|²)` for `ψ`
/// supported in `[lo, hi]`.
pub fn eisenstein_psi<F: Fn(f64) -> C64>(k: i32, psi: F, lo: f64, tau: C64) -> C64 {
    cosets_in_ellipse(tau, tau.im / lo)
        .iter()
        .map(|g| {
            let j = g.j(tau);
            let ph = j / j.norm();
            ph.powi(k) * psi(tau.im / j.norm_sqr())
        })
        .sum()
}

/// `∫_{ℝ² ∖ [−ρ, ρ]²} |cτ + d|^{−2s} dc dd`, in polar coordinates.
fn box_complement_integral(tau: C64, s: f64, rho: f64) -> f64 {
    let gl = GaussLegendre::new(24);
    let mut acc = 0.0;
    for oct in 0..8 {
        let a = oct as f64 * PI / 4.0;
        for (th, w) in gl.mapped(a, a + PI / 4.0) {
            let (sn, cs) = th.sin_cos();
            let q = (tau * cs + sn).norm_sqr();
            let r0 = rho / cs.abs().max(sn.abs());
            acc += w * q.powf(-s) * r0.powf(2.0 - 2.0 * s) / (2.0 * s - 2.0);
        }
    }
    acc
}

/// `E(τ, s) = Σ_{(c,d) primitive} y^s / |cτ+d|^{2s}` (the sum over all primitive
/// pairs, twice the sum over `Γ∞\SL₂(ℤ)`), for real `s > 1`. The box is
/// `|c|, |d| ≤ R`; the omitted part is replaced by its continuum value with
/// density `6/π²`, and `tail_bound` is that correction.
pub fn classical_eisenstein(tau: C64, s: f64, radius: i64) -> Result<SeriesValue> {
    if s <= 1.0 {
        return Err(StrataError::InvalidParameter(format!("raw Eisenstein sum diverges at s = {s}; use `completed`")));
    }
    let y = tau.im;
    let terms: Vec<f64> = (-radius..=radius)
        .into_par_iter()
        .map(|c| {
            (-radius..=radius)
                .filter(|&d| c.gcd(&d) == 1)
                .map(|d| (tau * c as f64 + d as f64).norm_sqr().powf(-s))
                .sum::<f64>()
        })
        .collect();
    let raw: f64 = terms.iter().sum();
    let tail = 6.0 / (PI * PI) * box_complement_integral(tau, s, radius as f64 + 0.5);
    let count = (2 * radius + 1).pow(2) as usize;
    Ok(SeriesValue { value: C64::new(y.powf(s) * (raw + tail), 0.0), tail_bound: y.powf(s) * tail, terms: count })
}

fn divisor_sigma(n: u64, w: f64) -> f64 {
    let mut s = 0.0;
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            s += (d as f64).powf(w);
            let e2 = n / d;
            if e2 != d {
                s += (e2 as f64).powf(w);
            }
        }
        d += 1;
    }
    s
}

/// `E*(τ, s) = π^{−s}Γ(s)ζ(2s) E(τ, s)` from the Fourier expansion
/// `2[ξ(2s)y^s + ξ(2−2s)y^{1−s} + 2√y Σ_{n≠0} |n|^{s−½} σ_{1−2s}(|n|) K_{s−½}(2π|n|y) e(nx)]`,
/// valid for all real `s ∉ {0, ½, 1}`. The factor 2 matches the sum over all
/// primitive pairs.
pub fn completed(tau: C64, s: f64) -> Result<C64> {
    if s == 0.0 || s == 0.5 || s == 1.0 {
        return Err(StrataError::Pole("completed Eisenstein series"));
    }
    let (x, y) = (tau.re, tau.im);
    let mut acc = C64::new(xi(2.0 * s)? * y.powf(s) + xi(2.0 - 2.0 * s)? * y.powf(1.0 - s), 0.0);
    let nu = s - 0.5;
    for n in 1..400u64 {
        let arg = 2.0 * PI * n as f64 * y;
        if arg > 700.0 {
            break;
        }
        let c = 2.0 * y.sqrt() * (n as f64).powf(nu) * divisor_sigma(n, 1.0 - 2.0 * s) * bessel_k(nu, arg);
        // e(nx) + e(−nx)
        acc += c * 2.0 * (2.0 * PI * n as f64 * x).cos();
        if c.abs() < 1e-18 * acc.norm() {
            break;
        }
    }
    Ok(acc * 2.0)
}

/// `E(τ, s)` for any real `s` away from poles, through [`completed`].
pub fn classical_eisenstein_continued(tau: C64, s: f64) -> Result<C64> {
    let f = PI.powf(-s) * gamma_real(s)? * zeta(2.0 * s)?;
    Ok(completed(tau, s)? / f)
}

/// `|E*(τ, s) − E*(τ, 1−s)|`.
pub fn functional_equation_residual(tau: C64, s: f64) -> Result<f64> {
    Ok((completed(tau, s)? - completed(tau, 1.0 - s)?).norm())
}

/// CSV rows `id,x,y,u,v,R,re,im,tail`.
pub fn series_csv(rows: &[(String, JacobiPoint, i64, SeriesValue)]) -> String {
    let mut s = String::from("id,x,y,u,v,R,re,im,tail\n");
    for (id, p, r, v) in rows {
        let _ = writeln!(
            s,
            "{id},{},{},{},{},{r},{:.12e},{:.12e},{:.3e}",
            p.x, p.y, p.u, p.v, v.value.re, v.value.im, v.tail_bound
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heisenberg_fourier::{H0Table, QuadratureSpec};
    use crate::saff_group::{slash, SAff, Sl2};
    use crate::special_fn::gamma;

    fn bump_beta(k: i32) -> BetaProfile {
        BetaProfile::compact(k, 0.6, 2.5, |y| {
            let t = (y - 0.6) / 1.9;
            C64::new((-1.0 / (t * (1.0 - t))).exp() * 40.0, 0.0)
        })
        .unwrap()
    }

    #[test]
    fn coset_enumeration() {
        let l = coset_list(1).unwrap();
        let mut pairs: Vec<_> = l.cosets.iter().map(|g| (g.c, g.d)).collect();
        pairs.sort();
        assert_eq!(pairs, vec![(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]);
        let l = coset_list(50).unwrap();
        let expected = 6.0 / (PI * PI) * 100f64.powi(2);
        assert!((l.cosets.len() as f64 / expected - 1.0).abs() < 0.05);
        assert!(l.cosets.iter().all(|g| g.a * g.d - g.b * g.c == 1));
        // a fixed completion with |a| ≤ |c|/2
        assert!(l.cosets.iter().all(|g| g.c == 0 || 2 * g.a.abs() <= g.c.abs()));
        assert!(coset_list(0).is_err());
    }

    #[test]
    fn ellipse_cosets_match_box() {
        let tau = C64::new(0.3, 0.7);
        let bound = 9.0;
        let mut a: Vec<_> = cosets_in_ellipse(tau, bound).iter().map(|g| (g.c, g.d)).collect();
        let mut b: Vec<_> = coset_list(20)
            .unwrap()
            .cosets
            .iter()
            .filter(|g| g.j(tau).norm_sqr() <= bound)
            .map(|g| (g.c, g.d))
            .collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn discrete_profiles() {
        let b = beta_discrete(2, 1).unwrap();
        assert!((b.eval(0.3).re - (-2.0 * PI * 0.3).exp()).abs() < 1e-15);
        let b = beta_discrete(-2, -1).unwrap();
        assert!((b.eval(0.3).re - 0.09 * (-2.0 * PI * 0.3).exp()).abs() < 1e-15);
        for k in [2, 3, 4, -2, -3] {
            let b = beta_discrete(k, k.signum()).unwrap();
            b.check_certificates().unwrap();
            assert_eq!(b.absolutely_convergent(), k.abs() > 2);
        }
        assert!(beta_discrete(2, -1).is_err());
        assert!(beta_discrete(1, 1).is_err());
    }

    #[test]
    fn eisenstein_invariance_and_periodicity() {
        for k in [0, 1, 2] {
            let beta = bump_beta(k);
            let es = AffineSeries::new(k, 0, 2, beta, 0).unwrap();
            let phi = es.as_modular_function();
            let pt = JacobiPoint::new(0.21, 0.8, 0.37, 0.55);
            for g in [Sl2::new(0.0, -1.0, 1.0, 0.0), Sl2::new(1.0, 1.0, 0.0, 1.0), Sl2::new(2.0, 1.0, 1.0, 1.0)] {
                let v = slash(&phi, &SAff::linear(g)).eval(&pt);
                assert!((v - phi.eval(&pt)).norm() < 1e-12, "k={k}");
            }
            let lat = slash(&phi, &SAff::translation(1.0, -2.0)).eval(&pt);
            assert!((lat - phi.eval(&pt)).norm() < 1e-12);
            assert!(es.eval(&pt).tail_bound == 0.0);
        }
    }

    #[test]
    fn poincare_coefficients() {
        let q = QuadratureSpec::new(32, 32).unwrap();
        for (k, n, m) in [(0, 1, 1), (1, -1, 2), (2, 0, 1)] {
            let beta = bump_beta(k);
            let ps = AffineSeries::new(k, n, m, beta.clone(), 0).unwrap().as_modular_function();
            for y in [0.7, 1.3] {
                let t = H0Table::new(&ps, y, &q);
                let target = beta.eval(y) * FRAC_1_SQRT_2;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                for nn in -6..=6 {
                    for mm in -6..=6 {
                        let expect = if nn == n && mm == m {
                            target
                        } else if nn == n && mm == -m {
                            target * sign
                        } else {
                            C64::new(0.0, 0.0)
                        };
                        assert!((t.get(nn, mm) - expect).norm() < 1e-10, "k={k} ({nn},{mm}) y={y}: {}", t.get(nn, mm));
                    }
                }
            }
        }
    }

    #[test]
    fn box_truncation_tail_bound() {
        let beta = beta_discrete(4, 1).unwrap();
        let pt = JacobiPoint::new(0.1, 0.9, 0.2, 0.3);
        let a = poincare(4, 1, 1, &beta, &pt, 40).unwrap();
        let b = poincare(4, 1, 1, &beta, &pt, 80).unwrap();
        assert!(a.tail_bound.is_finite());
        assert!((a.value - b.value).norm() <= a.tail_bound);
        let s = AffineSeries::new(4, 1, 1, beta, 60).unwrap().as_modular_function();
        let v = slash(&s, &SAff::linear(Sl2::new(0.0, -1.0, 1.0, 0.0))).eval(&pt);
        assert!((v - s.eval(&pt)).norm() < 2.0 * a.tail_bound);
        let b2 = beta_discrete(2, 1).unwrap();
        assert!(poincare(2, 1, 1, &b2, &pt, 10).unwrap().tail_bound.is_infinite());
    }

    #[test]
    fn ypower_isometry() {
        let w = SpectralWindow::gaussian(2.0, 0.4);
        let nrm = w.norm_sq();
        let (pp, mm, pm) = ypower_gram(0, &w, 1e-9);
        assert!((pp / (4.0 * PI * nrm) - 1.0).abs() < 1e-6, "{}", pp / nrm);
        assert!((mm / (4.0 * PI * nrm) - 1.0).abs() < 1e-6);
        assert!(pm.norm() < 1e-6 * nrm);
        // swapping the sign is complex conjugation up to a factor for real ψ
        let y = 0.37;
        let p = beta_ypower(2, &w, PowerSign::Plus, y);
        let m = beta_ypower(2, &w, PowerSign::Minus, y);
        assert!(p.im.abs() < 1e-12 && m.re.abs() < 1e-12);
    }

    #[test]
    fn whittaker_transform_zero_and_eigen() {
        let zero = SpectralWindow::new(1.0, 2.0, 2, |_| C64::new(0.0, 0.0));
        assert_eq!(beta_whittaker(2, 1, &zero, 0.5).unwrap(), C64::new(0.0, 0.0));
        let grid: Vec<f64> = (0..30).map(|i| 0.05 * 1.15f64.powi(i)).collect();
        let mut last = f64::INFINITY;
        for sigma in [0.3, 0.1, 0.03] {
            let w = SpectralWindow::gaussian(3.0, sigma);
            let tr = WhittakerTransform::new(0, 1, &w).unwrap();
            let g = |y: f64| tr.eval(y).unwrap();
            let res = crate::operators::eigen_residual(0, 1, 9.25, &g, &grid);
            assert!(res < last, "σ={sigma}: {res}");
            last = res;
        }
    }

    #[test]
    fn whittaker_isometry_constant_is_half_inverse_square() {
        let w = SpectralWindow::gaussian(3.0, 0.3);
        for (k, n) in [(0, 1), (3, -2)] {
            let c = whittaker_isometry_constant(k, n, &w, -30.0, 60).unwrap();
            assert!((c * 2.0 * (n * n) as f64 - 1.0).abs() < 1e-3, "k={k} n={n}: {c}");
        }
    }

    #[test]
    fn classical_against_fourier_oracle() {
        let tau = C64::new(0.0, 1.0);
        let raw = classical_eisenstein(tau, 2.0, 200).unwrap();
        let f = PI.powi(-2) * gamma(C64::new(2.0, 0.0)).unwrap().re * zeta(4.0).unwrap();
        let oracle = completed(tau, 2.0).unwrap() / f;
        assert!((raw.value - oracle).norm() / oracle.norm() < 1e-6, "{} vs {}", raw.value, oracle);
        let tau = C64::new(0.3, 1.7);
        let raw = classical_eisenstein(tau, 2.5, 150).unwrap();
        let oracle = classical_eisenstein_continued(tau, 2.5).unwrap();
        assert!((raw.value - oracle).norm() / oracle.norm() < 1e-6);
        assert!(functional_equation_residual(tau, 2.0).unwrap() < 1e-6);
        assert!(classical_eisenstein(tau, 0.8, 10).is_err());
    }

    #[test]
    fn csv_layout() {
        let v = SeriesValue { value: C64::new(1.0, 2.0), tail_bound: 0.0, terms: 3 };
        let s = series_csv(&[("E".into(), JacobiPoint::new(0.0, 1.0, 0.0, 0.0), 10, v)]);
        assert_eq!(s.lines().count(), 2);
    }
}
