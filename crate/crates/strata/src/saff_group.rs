//! Arithmetic on `SAff₂(ℝ) = SL₂(ℝ) ⋉ ℝ²`, coordinates on the Jacobi half-space,
//! the weight-k slash action, lifts to the group, reduction to a fundamental
//! domain and Monte-Carlo sampling of the invariant probability measure.
//!
//! Conventions, fixed once here:
//! * group law `(g,w)·(g̃,w̃) = (g g̃, w g̃ + w̃)` with `w` a row vector;
//! * the group acts on points of `ℍ × ℂ` on the **left**:
//!   `act(a∘b, P) = act(a, act(b, P))`;
//! * the slash action on functions is a **right** action:
//!   `(φ|a)|b = φ|(a∘b)`.

use crate::quad::{batch_estimate_c, EstimateC};
use crate::{Result, StrataError, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sl2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Sl2 {
    pub const IDENTITY: Sl2 = Sl2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    /// Upper unipotent `[[1,x],[0,1]]`.
    pub fn unipotent(x: f64) -> Self {
        Self::new(1.0, x, 0.0, 1.0)
    }

    /// `diag(s, 1/s)`.
    pub fn diag(s: f64) -> Self {
        Self::new(s, 0.0, 0.0, 1.0 / s)
    }

    /// `[[cos θ, sin θ], [−sin θ, cos θ]]`; fixes `i` and multiplies row vectors
    /// `v₁ + i v₂` by `e^{iθ}`.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, s, -s, c)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn mul(&self, o: &Sl2) -> Sl2 {
        Sl2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn inverse(&self) -> Sl2 {
        Sl2 { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// Rescale so that the determinant is one again.
    pub fn renormalized(&self) -> Sl2 {
        let s = self.det().sqrt().recip();
        Sl2 { a: self.a * s, b: self.b * s, c: self.c * s, d: self.d * s }
    }

    /// Automorphy factor `cτ + d`.
    pub fn j(&self, tau: C64) -> C64 {
        tau * self.c + self.d
    }

    pub fn mobius(&self, tau: C64) -> C64 {
        (tau * self.a + self.b) / self.j(tau)
    }

    /// Row vector times matrix.
    pub fn row_mul(&self, w: [f64; 2]) -> [f64; 2] {
        [w[0] * self.a + w[1] * self.c, w[0] * self.b + w[1] * self.d]
    }

    pub fn is_integral(&self) -> bool {
        [self.a, self.b, self.c, self.d].iter().all(|v| v.fract() == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SAff {
    pub g: Sl2,
    pub w: [f64; 2],
}

impl SAff {
    pub const IDENTITY: SAff = SAff { g: Sl2::IDENTITY, w: [0.0, 0.0] };

    pub fn new(g: Sl2, w: [f64; 2]) -> Self {
        Self { g, w }
    }

    pub fn linear(g: Sl2) -> Self {
        Self { g, w: [0.0, 0.0] }
    }

    pub fn translation(w1: f64, w2: f64) -> Self {
        Self { g: Sl2::IDENTITY, w: [w1, w2] }
    }

    pub fn inverse(&self) -> SAff {
        let gi = self.g.inverse();
        let t = gi.row_mul(self.w);
        SAff { g: gi, w: [-t[0], -t[1]] }
    }

    /// 3×3 embedding `[[g, 0], [w, 1]]`, row-major.
    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        [[self.g.a, self.g.b, 0.0], [self.g.c, self.g.d, 0.0], [self.w[0], self.w[1], 1.0]]
    }

    pub fn renormalized(&self) -> SAff {
        SAff { g: self.g.renormalized(), w: self.w }
    }

    pub fn is_integral(&self) -> bool {
        self.g.is_integral() && self.w.iter().all(|v| v.fract() == 0.0)
    }

    /// Right action on plane row vectors: `λ·(g, w) = λ g + w`.
    pub fn act_on_plane(&self, lambda: [f64; 2]) -> [f64; 2] {
        let t = self.g.row_mul(lambda);
        [t[0] + self.w[0], t[1] + self.w[1]]
    }
}

/// `(g_a g_b, w_a g_b + w_b)`.
pub fn compose(a: &SAff, b: &SAff) -> SAff {
    let t = b.g.row_mul(a.w);
    SAff { g: a.g.mul(&b.g), w: [t[0] + b.w[0], t[1] + b.w[1]] }
}

/// Running product that restores `det g = 1` every 64 factors.
#[derive(Clone, Debug)]
pub struct ComposeChain {
    acc: SAff,
    count: usize,
}

impl Default for ComposeChain {
    fn default() -> Self {
        Self { acc: SAff::IDENTITY, count: 0 }
    }
}

impl ComposeChain {
    pub fn push(&mut self, x: &SAff) {
        self.acc = compose(&self.acc, x);
        self.count += 1;
        if self.count % 64 == 0 {
            self.acc = self.acc.renormalized();
        }
    }

    pub fn value(&self) -> SAff {
        self.acc
    }
}

/// Iwasawa coordinates: the element is
/// `(n(x) a(√y) k(θ), (w₁√y, w₂/√y) k(θ))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IwasawaCoords {
    pub x: f64,
    pub y: f64,
    pub w1: f64,
    pub w2: f64,
    pub theta: f64,
}

impl IwasawaCoords {
    pub fn jacobi(&self) -> JacobiPoint {
        JacobiPoint { x: self.x, y: self.y, u: self.w2, v: self.w1 * self.y }
    }
}

pub fn iwasawa(a: &SAff) -> IwasawaCoords {
    let i = C64::new(0.0, 1.0);
    let tau = a.g.mobius(i);
    let jf = a.g.j(i);
    let z = (i * a.w[0] + a.w[1]) / jf;
    let theta = (-jf.arg()).rem_euclid(2.0 * PI);
    IwasawaCoords { x: tau.re, y: tau.im, w1: z.im / tau.im, w2: z.re, theta }
}

pub fn from_iwasawa(c: &IwasawaCoords) -> SAff {
    let s = c.y.sqrt();
    let k = Sl2::rotation(c.theta);
    let g = Sl2::unipotent(c.x).mul(&Sl2::diag(s)).mul(&k);
    let w = k.row_mul([c.w1 * s, c.w2 / s]);
    SAff { g, w }
}

/// Point of `ℍ × ℂ` with `τ = x+iy`, `z = u+iv = pτ + q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiPoint {
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub v: f64,
}

impl JacobiPoint {
    pub fn new(x: f64, y: f64, u: f64, v: f64) -> Self {
        Self { x, y, u, v }
    }

    pub fn from_complex(tau: C64, z: C64) -> Self {
        Self { x: tau.re, y: tau.im, u: z.re, v: z.im }
    }

    pub fn from_pq(x: f64, y: f64, p: f64, q: f64) -> Self {
        Self { x, y, u: p * x + q, v: p * y }
    }

    pub fn tau(&self) -> C64 {
        C64::new(self.x, self.y)
    }

    pub fn z(&self) -> C64 {
        C64::new(self.u, self.v)
    }

    pub fn p(&self) -> f64 {
        self.v / self.y
    }

    pub fn q(&self) -> f64 {
        self.u - self.v * self.x / self.y
    }

    /// Group element with these Iwasawa coordinates and `θ = 0`.
    pub fn group_element(&self) -> SAff {
        from_iwasawa(&IwasawaCoords { x: self.x, y: self.y, w1: self.p(), w2: self.u, theta: 0.0 })
    }
}

pub fn act_on_jacobi(a: &SAff, pt: &JacobiPoint) -> JacobiPoint {
    let tau = pt.tau();
    let j = a.g.j(tau);
    let z = (pt.z() + tau * a.w[0] + a.w[1]) / j;
    JacobiPoint::from_complex(a.g.mobius(tau), z)
}

/// Automorphy factor `cτ + d` of `a` at `pt`.
pub fn automorphy(a: &SAff, pt: &JacobiPoint) -> C64 {
    a.g.j(pt.tau())
}

type Evaluator = Arc<dyn Fn(&JacobiPoint) -> C64 + Send + Sync>;

/// A function on the Jacobi half-space carrying its weight.
#[derive(Clone)]
pub struct ModularFunction {
    pub weight: i32,
    /// Bounds on the `y`-support if known (used only to skip work).
    pub y_support: Option<(f64, f64)>,
    eval: Evaluator,
}

impl std::fmt::Debug for ModularFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModularFunction").field("weight", &self.weight).field("y_support", &self.y_support).finish()
    }
}

impl ModularFunction {
    pub fn new<F>(weight: i32, f: F) -> Self
    where
        F: Fn(&JacobiPoint) -> C64 + Send + Sync + 'static,
    {
        Self { weight, y_support: None, eval: Arc::new(f) }
    }

    pub fn with_y_support(mut self, lo: f64, hi: f64) -> Self {
        self.y_support = Some((lo, hi));
        self
    }

    #[inline]
    pub fn eval(&self, pt: &JacobiPoint) -> C64 {
        (self.eval)(pt)
    }

    /// Pointwise linear combination of two functions of equal weight.
    pub fn combine(&self, a: C64, other: &ModularFunction, b: C64) -> Result<ModularFunction> {
        if self.weight != other.weight {
            return Err(StrataError::WeightMismatch(self.weight, other.weight));
        }
        let (f, g) = (self.clone(), other.clone());
        Ok(ModularFunction::new(self.weight, move |p| f.eval(p) * a + g.eval(p) * b))
    }
}

/// `(φ|_k a)(τ, z) = (cτ+d)^{−k} φ(a·(τ, z))`.
pub fn slash(phi: &ModularFunction, a: &SAff) -> ModularFunction {
    let f = phi.clone();
    let a = *a;
    let k = phi.weight;
    ModularFunction::new(k, move |pt| {
        let j = automorphy(&a, pt);
        f.eval(&act_on_jacobi(&a, pt)) * j.powi(-k)
    })
}

/// Function on the group, as produced by [`lift`].
pub type GroupFunction = Arc<dyn Fn(&SAff) -> C64 + Send + Sync>;

/// `φ̃(g) = (φ|g)(i, 0) = e^{ikθ} y^{k/2} φ(τ, z)`.
pub fn lift(phi: &ModularFunction) -> GroupFunction {
    let f = phi.clone();
    let k = phi.weight;
    Arc::new(move |g: &SAff| {
        let c = iwasawa(g);
        C64::from_polar(c.y.powf(0.5 * k as f64), k as f64 * c.theta) * f.eval(&c.jacobi())
    })
}

/// Inverse of [`lift`] on K-type `k` functions: `φ(τ,z) = y^{−k/2} f(g_{τ,z})`.
pub fn unlift(k: i32, f: GroupFunction) -> ModularFunction {
    ModularFunction::new(k, move |pt: &JacobiPoint| f(&pt.group_element()) * pt.y.powf(-0.5 * k as f64))
}

fn in_sl2_domain(tau: C64) -> bool {
    let (x, y) = (tau.re, tau.im);
    let r2 = x * x + y * y;
    x > -0.5 && x <= 0.5 && (r2 > 1.0 || (r2 == 1.0 && x <= 0.0)) && y > 0.0
}

/// Reduce to `x ∈ (−½, ½]`, `|τ| ≥ 1` (on `|τ| = 1` only `x ≤ 0`), `(p, q) ∈ [0,1)²`.
/// Returns `γ ∈ SAff₂(ℤ)` with `act(γ, pt) = rep`.
pub fn reduce_to_fundamental(pt: &JacobiPoint) -> (SAff, JacobiPoint) {
    let mut gamma = SAff::IDENTITY;
    let mut cur = *pt;
    let s = SAff::linear(Sl2::new(0.0, -1.0, 1.0, 0.0));
    for _ in 0..10_000 {
        if in_sl2_domain(cur.tau()) {
            break;
        }
        // translate into (−½, ½]
        let n = (0.5 - cur.x).floor() + 1.0;
        let n = if cur.x + n > 0.5 { n - 1.0 } else { n };
        if n != 0.0 {
            let t = SAff::linear(Sl2::unipotent(n));
            cur = act_on_jacobi(&t, &cur);
            gamma = compose(&t, &gamma);
        }
        let r2 = cur.x * cur.x + cur.y * cur.y;
        if r2 < 1.0 || (r2 == 1.0 && cur.x > 0.0) {
            cur = act_on_jacobi(&s, &cur);
            gamma = compose(&s, &gamma);
        }
    }
    let (p, q) = (cur.p(), cur.q());
    let t = SAff::translation(-p.floor(), -q.floor());
    cur = act_on_jacobi(&t, &cur);
    // p, q can round to exactly 1.0 after the shift
    let (mut p2, mut q2) = (cur.p(), cur.q());
    let (mut extra_p, mut extra_q) = (0.0, 0.0);
    if p2 >= 1.0 {
        extra_p = -1.0;
        p2 -= 1.0;
    }
    if q2 >= 1.0 {
        extra_q = -1.0;
        q2 -= 1.0;
    }
    let t2 = SAff::translation(-p.floor() + extra_p, -q.floor() + extra_q);
    gamma = compose(&t2, &gamma);
    (gamma, JacobiPoint::from_pq(cur.x, cur.y, p2.max(0.0), q2.max(0.0)))
}

/// Sampling parameters for integrals over `F × [0,1)²`, where `F` is the
/// standard fundamental domain of `SL₂(ℤ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCSpec {
    pub samples: usize,
    pub seed: u64,
    pub y_max: f64,
    pub batches: usize,
}

impl Default for MCSpec {
    fn default() -> Self {
        Self { samples: 1_000_000, seed: 7, y_max: 1e3, batches: 200 }
    }
}

impl MCSpec {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self { samples, seed, ..Default::default() }
    }

    /// Probability mass of `y > y_max` under the normalised measure.
    pub fn tail_mass(&self) -> f64 {
        3.0 / (PI * self.y_max)
    }

    fn batch_sizes(&self) -> Vec<usize> {
        let nb = self.batches.max(1).min(self.samples.max(1));
        let base = self.samples / nb;
        let rem = self.samples % nb;
        (0..nb).map(|i| base + usize::from(i < rem)).collect()
    }
}

/// Volume of `F` for `dx dy / y²`.
pub const SL2_DOMAIN_AREA: f64 = PI / 3.0;

/// One draw of `(x, y)` from `dx dy / y²` on `F ∩ {y ≤ y_max}` by exact inverse
/// CDF in `y` followed by rejection against the unit circle.
pub fn sample_domain_point<R: Rng>(rng: &mut R, y_max: f64) -> (f64, f64) {
    let y0 = 3f64.sqrt() / 2.0;
    loop {
        let x = rng.gen::<f64>() - 0.5;
        let uu: f64 = rng.gen();
        let y = 1.0 / (1.0 / y0 - uu * (1.0 / y0 - 1.0 / y_max));
        if x * x + y * y >= 1.0 {
            return (x, y);
        }
    }
}

fn batch_rng(seed: u64, batch: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(batch as u64 + 1);
    r
}

/// Samples from the normalised invariant measure on `F × [0,1)²` truncated to
/// `y ≤ y_max`. Batch `b` uses its own ChaCha stream, so results do not depend
/// on thread count.
pub fn sample_masur_veech(seed: u64, n: usize, y_max: f64) -> Vec<JacobiPoint> {
    let spec = MCSpec { samples: n, seed, y_max, batches: 64 };
    let sizes = spec.batch_sizes();
    sizes
        .par_iter()
        .enumerate()
        .map(|(b, &m)| {
            let mut rng = batch_rng(seed, b);
            (0..m)
                .map(|_| {
                    let (x, y) = sample_domain_point(&mut rng, y_max);
                    let (p, q): (f64, f64) = (rng.gen(), rng.gen());
                    JacobiPoint::from_pq(x, y, p, q)
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Monte-Carlo average of `h(pt, θ)` under the normalised measure on
/// `F × [0,1)² × [0, 2π)`, truncated at `y_max`. Returns the batch-means estimate.
pub fn mc_average<H>(spec: &MCSpec, h: H) -> EstimateC
where
    H: Fn(&JacobiPoint, f64) -> C64 + Sync,
{
    let sizes = spec.batch_sizes();
    let sums: Vec<(C64, usize)> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &m)| {
            let mut rng = batch_rng(spec.seed, b);
            let mut acc = C64::new(0.0, 0.0);
            for _ in 0..m {
                let (x, y) = sample_domain_point(&mut rng, spec.y_max);
                let (p, q, t): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
                acc += h(&JacobiPoint::from_pq(x, y, p, q), 2.0 * PI * t);
            }
            (acc, m)
        })
        .collect();
    batch_estimate_c(&sums)
}

/// MC estimate of `⟨φ₁, φ₂⟩ = ∫_{F×[0,1)²} φ₁ φ̄₂ y^{k−2} dx dy dp dq`
/// over `y ≤ y_max`; mass above `y_max` is not estimated (see [`MCSpec::tail_mass`]).
pub fn inner_product(phi1: &ModularFunction, phi2: &ModularFunction, mc: &MCSpec) -> Result<EstimateC> {
    if phi1.weight != phi2.weight {
        return Err(StrataError::WeightMismatch(phi1.weight, phi2.weight));
    }
    let k = phi1.weight as f64;
    let scale = SL2_DOMAIN_AREA * (1.0 - mc.tail_mass());
    let est = mc_average(mc, |pt, _| phi1.eval(pt) * phi2.eval(pt).conj() * pt.y.powf(k));
    Ok(EstimateC { re: est.re * scale, im: est.im * scale, stderr: est.stderr * scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_compose, proptest, ProptestConfig};

    fn close(a: &SAff, b: &SAff, tol: f64) -> bool {
        let (ma, mb) = (a.to_matrix(), b.to_matrix());
        (0..3).all(|i| (0..3).all(|j| (ma[i][j] - mb[i][j]).abs() <= tol))
    }

    fn mat_mul(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        c
    }

    prop_compose! {
        fn arb_saff()(x in -3.0..3.0f64, ly in -2.0..2.0f64, w1 in -3.0..3.0f64,
                      w2 in -3.0..3.0f64, th in 0.0..6.28f64) -> SAff {
            from_iwasawa(&IwasawaCoords { x, y: ly.exp(), w1, w2, theta: th })
        }
    }

    prop_compose! {
        fn arb_point()(x in -3.0..3.0f64, ly in -1.5..1.5f64, u in -2.0..2.0f64, v in -2.0..2.0f64)
            -> JacobiPoint { JacobiPoint::new(x, ly.exp(), u, v) }
    }

    #[test]
    fn compose_matches_matrix_embedding() {
        let t = SAff::new(Sl2::new(1.0, 1.0, 0.0, 1.0), [1.0, 0.0]);
        let s = SAff::new(Sl2::new(0.0, 1.0, -1.0, 0.0), [0.0, 1.0]);
        let ts = compose(&t, &s);
        assert_eq!(ts.g, Sl2::new(-1.0, 1.0, -1.0, 0.0));
        assert_eq!(ts.w, [0.0, 2.0]);
        assert_eq!(ts.to_matrix(), mat_mul(t.to_matrix(), s.to_matrix()));
    }

    #[test]
    fn iwasawa_simple_cases() {
        let c = iwasawa(&SAff::IDENTITY);
        assert_eq!((c.x, c.y, c.w1, c.w2, c.theta), (0.0, 1.0, 0.0, 0.0, 0.0));
        let c = iwasawa(&SAff::linear(Sl2::diag(2.0)));
        assert!((c.y - 4.0).abs() < 1e-14 && c.x.abs() < 1e-14 && c.theta.abs() < 1e-14);
    }

    #[test]
    fn s_fixes_base_point() {
        let s = SAff::linear(Sl2::new(0.0, 1.0, -1.0, 0.0));
        let p = act_on_jacobi(&s, &JacobiPoint::new(0.0, 1.0, 0.0, 0.0));
        assert!(p.x.abs() < 1e-15 && (p.y - 1.0).abs() < 1e-15 && p.u.abs() < 1e-15 && p.v.abs() < 1e-15);
    }

    #[test]
    fn translation_shifts_z() {
        let p = act_on_jacobi(&SAff::translation(0.0, 1.0), &JacobiPoint::new(0.3, 1.2, 0.1, 0.4));
        assert_eq!(p, JacobiPoint::new(0.3, 1.2, 1.1, 0.4));
    }

    #[test]
    fn lift_values() {
        let one = ModularFunction::new(2, |_| C64::new(1.0, 0.0));
        let v = lift(&one)(&SAff::linear(Sl2::diag(2.0)));
        assert!((v - C64::new(4.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn reduction_cases() {
        let p = JacobiPoint::new(0.1, 1.3, 0.2, 0.5);
        let (g, r) = reduce_to_fundamental(&p);
        assert_eq!(g, SAff::IDENTITY);
        assert_eq!(r, p);
        let (g, r) = reduce_to_fundamental(&JacobiPoint::new(5.0, 1.0, 0.0, 0.0));
        assert_eq!(g, SAff::linear(Sl2::unipotent(-5.0)));
        assert!(r.x.abs() < 1e-15 && (r.y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn compose_chain_keeps_determinant() {
        let mut ch = ComposeChain::default();
        let a = from_iwasawa(&IwasawaCoords { x: 0.3, y: 1.7, w1: 0.2, w2: -0.4, theta: 1.1 });
        for _ in 0..1000 {
            ch.push(&a);
            ch.push(&a.inverse());
        }
        assert!((ch.value().g.det() - 1.0).abs() < 1e-12);
        assert!(close(&ch.value(), &SAff::IDENTITY, 1e-8));
    }

    #[test]
    fn sampler_volume_and_marginals() {
        // acceptance rate of the rejection step estimates the area of F
        let mut rng = batch_rng(1, 0);
        let y0 = 3f64.sqrt() / 2.0;
        let n = 200_000;
        let mut acc = 0usize;
        for _ in 0..n {
            let x = rng.gen::<f64>() - 0.5;
            let u: f64 = rng.gen();
            let y = 1.0 / (1.0 / y0 - u * (1.0 / y0));
            if x * x + y * y >= 1.0 {
                acc += 1;
            }
        }
        let area = acc as f64 / n as f64 / y0;
        let se = (0.9069 * 0.0931 / n as f64).sqrt() / y0;
        assert!((area - PI / 3.0).abs() < 4.0 * se, "{area}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn group_axioms(a in arb_saff(), b in arb_saff(), c in arb_saff()) {
            let l = compose(&compose(&a, &b), &c);
            let r = compose(&a, &compose(&b, &c));
            prop_assert!(close(&l, &r, 1e-9));
            prop_assert!(close(&compose(&a, &a.inverse()), &SAff::IDENTITY, 1e-9));
            prop_assert!(close(&compose(&SAff::IDENTITY, &a), &a, 0.0));
        }

        #[test]
        fn iwasawa_round_trip(a in arb_saff()) {
            prop_assert!(close(&from_iwasawa(&iwasawa(&a)), &a, 1e-10));
        }

        #[test]
        fn chart_involution(p in arb_point()) {
            let q = JacobiPoint::from_pq(p.x, p.y, p.p(), p.q());
            prop_assert!((q.u - p.u).abs() < 1e-12 && (q.v - p.v).abs() < 1e-12);
        }

        #[test]
        fn action_is_left(a in arb_saff(), b in arb_saff(), p in arb_point()) {
            let l = act_on_jacobi(&compose(&a, &b), &p);
            let r = act_on_jacobi(&a, &act_on_jacobi(&b, &p));
            prop_assert!((l.tau() - r.tau()).norm() < 1e-9 && (l.z() - r.z()).norm() < 1e-9);
        }

        #[test]
        fn slash_is_right_action(a in arb_saff(), b in arb_saff(), p in arb_point(), k in -4i32..=4) {
            let phi = ModularFunction::new(k, |pt| C64::new(pt.u.sin() + pt.y, pt.x * pt.v));
            let l = slash(&slash(&phi, &a), &b).eval(&p);
            let r = slash(&phi, &compose(&a, &b)).eval(&p);
            prop_assert!((l - r).norm() < 1e-9 * (1.0 + r.norm()));
        }

        #[test]
        fn lift_k_type(a in arb_saff(), th in 0.0..6.28f64, k in -4i32..=4) {
            let phi = ModularFunction::new(k, |pt| C64::new(pt.u.cos() * pt.y, pt.x + pt.v));
            let f = lift(&phi);
            let rot = SAff::linear(Sl2::rotation(th));
            let l = f(&compose(&a, &rot));
            let r = C64::from_polar(1.0, k as f64 * th) * f(&a);
            prop_assert!((l - r).norm() < 1e-10 * (1.0 + r.norm()));
            let back = unlift(k, f.clone()).eval(&iwasawa(&a).jacobi());
            prop_assert!((back - phi.eval(&iwasawa(&a).jacobi())).norm() < 1e-10 * (1.0 + back.norm()));
        }

        #[test]
        fn lift_is_slash_at_base_point(a in arb_saff(), k in -3i32..=3) {
            let phi = ModularFunction::new(k, |pt| C64::new(pt.u + pt.y, pt.x * pt.v + 1.0));
            let direct = slash(&phi, &a).eval(&JacobiPoint::new(0.0, 1.0, 0.0, 0.0));
            let l = lift(&phi)(&a);
            prop_assert!((direct - l).norm() < 1e-9 * (1.0 + l.norm()));
        }

        #[test]
        fn reduction_is_consistent(p in arb_point()) {
            let (g, r) = reduce_to_fundamental(&p);
            prop_assert!(g.is_integral());
            let moved = act_on_jacobi(&g, &p);
            prop_assert!((moved.tau() - r.tau()).norm() < 1e-9 && (moved.z() - r.z()).norm() < 1e-9);
            prop_assert!(r.x > -0.5 - 1e-12 && r.x <= 0.5 + 1e-12 && r.x * r.x + r.y * r.y >= 1.0 - 1e-12);
            prop_assert!(r.p() >= 0.0 && r.p() < 1.0 && r.q() >= -1e-12 && r.q() < 1.0 + 1e-12);
            let (g2, _) = reduce_to_fundamental(&r);
            prop_assert!(close(&g2, &SAff::IDENTITY, 1e-9) || g2.g == Sl2::IDENTITY);
        }
    }
}
