//! Special functions: complex log-gamma, integer-order Bessel `J_k`, Macdonald
//! `K_ν`, Kummer and Whittaker functions, the Riemann zeta function on the real
//! line, and the radial transforms (Hankel, `T_j`, `S_j`) used by the
//! Siegel–Veech module.

use crate::quad::{exp_sinh, GaussLegendre};
use crate::{Result, StrataError, C64};
use std::f64::consts::PI;
use std::sync::Arc;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

// B_{2j} / (2j (2j−1)) for j = 1..=10
const STIRLING: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
    43867.0 / 244_188.0,
    -174_611.0 / 125_400.0,
];

fn is_nonpositive_integer(z: C64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0
}

/// Principal branch of `log Γ(z)` (continuous off the negative real axis,
/// matching the usual `loggamma` convention).
pub fn log_gamma(z: C64) -> Result<C64> {
    if is_nonpositive_integer(z) {
        return Err(StrataError::Pole("log_gamma"));
    }
    let mut z = z;
    let mut shift = C64::new(0.0, 0.0);
    while z.re < 15.0 {
        shift += z.ln();
        z += 1.0;
    }
    let inv = z.inv();
    let inv2 = inv * inv;
    let mut series = C64::new(0.0, 0.0);
    let mut pw = inv;
    for c in STIRLING {
        series += pw * c;
        pw *= inv2;
    }
    Ok((z - 0.5) * z.ln() - z + LN_SQRT_2PI + series - shift)
}

pub fn gamma(z: C64) -> Result<C64> {
    log_gamma(z).map(|l| l.exp())
}

/// Real gamma function (sign included).
pub fn gamma_real(x: f64) -> Result<f64> {
    Ok(gamma(C64::new(x, 0.0))?.re)
}

/// `J_k(x)` for integer `k` and real `x`.
pub fn bessel_j(k: i32, x: f64) -> f64 {
    if k < 0 {
        let v = bessel_j(-k, x);
        return if k % 2 == 0 { v } else { -v };
    }
    if x < 0.0 {
        let v = bessel_j(k, -x);
        return if k % 2 == 0 { v } else { -v };
    }
    let kf = k as f64;
    if x <= 12.0 {
        bessel_j_series(k, x)
    } else if x >= 40.0_f64.max(kf * kf) {
        bessel_j_hankel(k, x)
    } else {
        bessel_j_miller(k, x)
    }
}

fn bessel_j_series(k: i32, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = 1.0;
    for j in 1..=k {
        term *= h / j as f64;
    }
    let mut sum = term;
    let h2 = h * h;
    for m in 1..200 {
        term *= -h2 / (m as f64 * (m + k) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && m as f64 > h {
            break;
        }
    }
    sum
}

/// Backward recurrence normalised by `J₀ + 2ΣJ₂ⱼ = 1`.
fn bessel_j_miller(k: i32, x: f64) -> f64 {
    let start = (x + 30.0 + (k as f64)).ceil() as i32 + ((x.sqrt() * 10.0) as i32);
    let start = start + (start % 2);
    let (mut jp1, mut j) = (0.0, 1e-300);
    let mut norm = 0.0;
    let mut target = 0.0;
    for n in (0..start).rev() {
        let jm1 = 2.0 * (n as f64 + 1.0) / x * j - jp1;
        // jm1 is J_n
        jp1 = j;
        j = jm1;
        if n == k {
            target = j;
        }
        if n == 0 {
            norm += j;
        } else if n % 2 == 0 {
            norm += 2.0 * j;
        }
        if j.abs() > 1e250 {
            jp1 *= 1e-250;
            j *= 1e-250;
            norm *= 1e-250;
            target *= 1e-250;
        }
    }
    target / norm
}

fn bessel_j_hankel(k: i32, x: f64) -> f64 {
    let mu = 4.0 * (k as f64).powi(2);
    let (mut p, mut q) = (1.0, 0.0);
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for j in 1..60 {
        let jf = j as f64;
        term *= (mu - (2.0 * jf - 1.0).powi(2)) / (jf * 8.0 * x);
        if term.abs() > last {
            break;
        }
        last = term.abs();
        match j % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * k as f64 + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// `K_ν(x) = ∫₀^∞ e^{−x cosh t} cosh(νt) dt`, `x > 0`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    assert!(x > 0.0, "bessel_k needs x > 0");
    // integrand below e^{-x-745} beyond t_max
    let t_max = (1.0 + 745.0 / x).acosh() + 1.0;
    let gl = GaussLegendre::new(20);
    let panels = (t_max * 4.0).ceil() as usize;
    gl.composite(0.0, t_max, panels, |t| (-x * t.cosh()).exp() * (nu * t).cosh())
}

/// Parameters `(κ, μ)` of the Whittaker equation
/// `f'' + (−¼ + κ/y + (¼ − μ²)/y²) f = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WhittakerParams {
    pub kappa: f64,
    pub mu: C64,
}

impl WhittakerParams {
    pub fn new(kappa: f64, mu: C64) -> Self {
        Self { kappa, mu }
    }

    /// `κ = sgn(n)·k/2`, `μ = it`: the parameters of the weight-`k` Fourier profiles.
    pub fn for_mode(k: i32, sgn_n: i32, t: f64) -> Self {
        Self { kappa: 0.5 * (sgn_n.signum() * k) as f64, mu: C64::new(0.0, t) }
    }
}

/// Kummer `M(a, b, z) = Σ (a)ₙ/(b)ₙ zⁿ/n!`.
pub fn kummer_m(a: C64, b: C64, z: f64) -> Result<C64> {
    if is_nonpositive_integer(b) {
        return Err(StrataError::Pole("kummer_m"));
    }
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    for n in 0..10_000 {
        let nf = n as f64;
        term *= (a + nf) / (b + nf) * (z / (nf + 1.0));
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() && nf > z {
            return Ok(sum);
        }
        if term.norm() == 0.0 {
            return Ok(sum);
        }
    }
    Err(StrataError::Convergence("kummer_m series".into()))
}

/// `M_{κ,μ}(y) = e^{−y/2} y^{½+μ} M(½+μ−κ, 1+2μ, y)`.
pub fn whittaker_m(p: WhittakerParams, y: f64) -> Result<C64> {
    if y <= 0.0 {
        return Err(StrataError::InvalidParameter(format!("whittaker_m at y = {y}")));
    }
    let a = p.mu + 0.5 - p.kappa;
    let b = p.mu * 2.0 + 1.0;
    if is_nonpositive_integer(b) {
        return Err(StrataError::Pole("whittaker_m: 2μ is a negative integer"));
    }
    Ok(kummer_m(a, b, y)? * C64::new(y, 0.0).powc(p.mu + 0.5) * (-0.5 * y).exp())
}

/// `W_{κ,μ}(y)`, the solution decaying like `e^{−y/2} y^κ` as `y → ∞`.
///
/// Branches: terminating expansion when the Kummer `U` is a polynomial, the
/// connection formula with two `M` series for `y ≤ 2` and `2μ ∉ ℤ`, the
/// asymptotic series for large `y`, and otherwise the Laplace-integral for `U`
/// followed by a downward recurrence in `a`.
pub fn whittaker_w(p: WhittakerParams, y: f64) -> Result<C64> {
    if y <= 0.0 {
        return Err(StrataError::InvalidParameter(format!("whittaker_w at y = {y}")));
    }
    // W is even in μ; prefer the sign with Re μ ≥ 0
    let mu = if p.mu.re < 0.0 { -p.mu } else { p.mu };
    let p = WhittakerParams { kappa: p.kappa, mu };
    let pre = |u: C64| u * C64::new(y, 0.0).powc(mu + 0.5) * (-0.5 * y).exp();
    let a = mu + 0.5 - p.kappa;
    let b = mu * 2.0 + 1.0;
    if is_nonpositive_integer(a) || is_nonpositive_integer(a - b + 1.0) {
        let (a, b) = if is_nonpositive_integer(a) { (a, b) } else { (a - b + 1.0, 2.0 - b) };
        let u = kummer_u_terminating(a, b, y);
        // U(a,b,z) = z^{1−b} U(a−b+1, 2−b, z) restores the original b
        let u = if b == mu * 2.0 + 1.0 { u } else { u * C64::new(y, 0.0).powc(b - 1.0) };
        return Ok(pre(u));
    }
    let two_mu_int = (2.0 * mu).im == 0.0 && (2.0 * mu).re.fract() == 0.0;
    if y <= 2.0 && !two_mu_int {
        return whittaker_w_connection(p, y);
    }
    if y >= asymptotic_threshold(a, b) {
        return Ok(pre(kummer_u_asymptotic(a, b, y)));
    }
    Ok(pre(kummer_u_integral(a, b, y)?))
}

fn asymptotic_threshold(a: C64, b: C64) -> f64 {
    35.0 + 2.0 * ((a.norm() + 1.0) * ((a - b + 1.0).norm() + 1.0))
}

/// `U(a, b, z)` when `a` is a nonpositive integer.
fn kummer_u_terminating(a: C64, b: C64, z: f64) -> C64 {
    let n = (-a.re).round() as usize;
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    for j in 0..n {
        let jf = j as f64;
        term *= (a + jf) * (a - b + 1.0 + jf) / (jf + 1.0) * (-1.0 / z);
        sum += term;
    }
    sum * C64::new(z, 0.0).powc(-a)
}

fn kummer_u_asymptotic(a: C64, b: C64, z: f64) -> C64 {
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    let mut last = f64::INFINITY;
    for j in 0..200 {
        let jf = j as f64;
        let next = term * (a + jf) * (a - b + 1.0 + jf) / (jf + 1.0) * (-1.0 / z);
        if next.norm() > last {
            break;
        }
        last = next.norm();
        term = next;
        sum += term;
        if term.norm() < 1e-17 * sum.norm() {
            break;
        }
    }
    sum * C64::new(z, 0.0).powc(-a)
}

/// `U(a,b,z) = Γ(a)⁻¹ ∫₀^∞ e^{−zt} t^{a−1} (1+t)^{b−a−1} dt`, valid for
/// `Re a > 0`; smaller `a` are reached by `U(a−1) = −(b−2a−z)U(a) − a(a−b+1)U(a+1)`.
fn kummer_u_integral(a: C64, b: C64, z: f64) -> Result<C64> {
    let shift = if a.re >= 1.0 { 0 } else { (1.0 - a.re).ceil() as usize };
    let top = a + shift as f64;
    let laplace = |aa: C64| -> Result<C64> {
        // t = τ / z
        let v = exp_sinh(
            |tau| {
                let t = tau / z;
                let l = -tau + (aa - 1.0) * t.ln() + (b - aa - 1.0) * t.ln_1p();
                C64::new(l.re, 0.0).exp() * C64::new(0.0, l.im).exp()
            },
            1.0 / 64.0,
            5.0,
        );
        Ok(v / z / gamma(aa)?)
    };
    let mut u_hi = laplace(top + 1.0)?;
    let mut u = laplace(top)?;
    for j in 0..shift {
        let ac = top - j as f64;
        let u_lo = -(b - ac * 2.0 - z) * u - ac * (ac - b + 1.0) * u_hi;
        u_hi = u;
        u = u_lo;
    }
    Ok(u)
}

fn whittaker_w_connection(p: WhittakerParams, y: f64) -> Result<C64> {
    let mu = p.mu;
    let k = p.kappa;
    let m_plus = whittaker_m(p, y)?;
    let m_minus = whittaker_m(WhittakerParams { kappa: k, mu: -mu }, y)?;
    // Γ(−2μ)/Γ(½−μ−κ); a pole in the denominator makes the coefficient vanish
    let coeff = |num: C64, den: C64| -> Result<C64> {
        if is_nonpositive_integer(den) {
            Ok(C64::new(0.0, 0.0))
        } else {
            Ok((log_gamma(num)? - log_gamma(den)?).exp())
        }
    };
    Ok(coeff(-mu * 2.0, -mu + 0.5 - k)? * m_plus + coeff(mu * 2.0, mu + 0.5 - k)? * m_minus)
}

/// `Γ^W(t) = Γ(2it) / Γ((1 − sgn(n)·k)/2 + it)`.
pub fn gamma_w(t: f64, k: i32, sgn_n: i32) -> Result<C64> {
    if t == 0.0 {
        return Err(StrataError::Pole("gamma_w at t = 0"));
    }
    let den = C64::new(0.5 * (1 - sgn_n.signum() * k) as f64, t);
    if is_nonpositive_integer(den) {
        return Ok(C64::new(0.0, 0.0));
    }
    Ok((log_gamma(C64::new(0.0, 2.0 * t))? - log_gamma(den)?).exp())
}

/// `(4π|n|y)^{−k/2} W_{sgn(n)k/2, it}(4π|n|y)`.
pub fn whittaker_profile(k: i32, n: i32, t: f64, y: f64) -> Result<C64> {
    if n == 0 {
        return Err(StrataError::InvalidParameter("whittaker_profile needs n ≠ 0".into()));
    }
    let z = 4.0 * PI * n.abs() as f64 * y;
    Ok(whittaker_w(WhittakerParams::for_mode(k, n.signum(), t), z)? * z.powf(-0.5 * k as f64))
}

/// Relative residual of `W'' + (−¼ + κ/y + (¼ − μ²)/y²) W = 0` at `y`, with a
/// five-point second difference.
pub fn whittaker_ode_residual(p: WhittakerParams, y: f64) -> Result<f64> {
    let h = 1e-3 * y.max(0.1);
    let f = |x: f64| whittaker_w(p, x);
    let d2 = (-f(y + 2.0 * h)? + f(y + h)? * 16.0 - f(y)? * 30.0 + f(y - h)? * 16.0 - f(y - 2.0 * h)?) / (12.0 * h * h);
    let coef = -0.25 + p.kappa / y + (C64::new(0.25, 0.0) - p.mu * p.mu) / (y * y);
    let r = d2 + f(y)? * coef;
    Ok(r.norm() / (f(y)?.norm() * coef.norm().max(1.0)))
}

/// Two leading terms of [`whittaker_profile`] as `y → 0`:
/// `Γ^W(t) z^{(1−k)/2−it} + Γ^W(−t) z^{(1−k)/2+it}` with `z = 4π|n|y`.
pub fn whittaker_asymptotic_smally(k: i32, n: i32, t: f64, y: f64) -> Result<C64> {
    let z = C64::new(4.0 * PI * n.abs() as f64 * y, 0.0);
    let base = 0.5 * (1 - k) as f64;
    let s = n.signum();
    Ok(gamma_w(t, k, s)? * z.powc(C64::new(base, -t)) + gamma_w(-t, k, s)? * z.powc(C64::new(base, t)))
}

/// Error of [`whittaker_asymptotic_smally`] maximised over one oscillation
/// period `[y, y·e^{π/|t|})` of the `z^{±2it}` factor.
pub fn asymptotic_error_envelope(k: i32, n: i32, t: f64, y: f64) -> Result<f64> {
    let span = PI / t.abs();
    let mut worst: f64 = 0.0;
    for j in 0..48 {
        let yy = y * (span * j as f64 / 48.0).exp();
        let d = whittaker_profile(k, n, t, yy)? - whittaker_asymptotic_smally(k, n, t, yy)?;
        worst = worst.max(d.norm());
    }
    Ok(worst)
}

/// Least-squares slope of `log envelope` against `log y` on four windows whose
/// left ends are whole oscillation periods apart, starting at `y = 10⁻⁴`, so
/// that a remainder `y^p·(periodic)` yields exactly `p`. The remainder bound
/// predicts at least `(3 − k)/2`.
pub fn asymptotic_error_order(k: i32, t: f64) -> Result<f64> {
    let span = PI / t.abs();
    let mut pts = Vec::new();
    for j in 0..4 {
        let y = 1e-4 * (-span * j as f64).exp();
        pts.push((y.ln(), asymptotic_error_envelope(k, 1, t, y)?.ln()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let me = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let num: f64 = pts.iter().map(|(x, e)| (x - mx) * (e - me)).sum();
    let den: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(num / den)
}

/// `ζ(s)` for real `s ≠ 1`: Borwein's alternating-series acceleration for
/// `s ≥ ½`, the functional equation otherwise.
pub fn zeta(s: f64) -> Result<f64> {
    if s == 1.0 {
        return Err(StrataError::Pole("zeta at s = 1"));
    }
    if s == 0.0 {
        return Ok(-0.5);
    }
    if s < 0.0 && (0.5 * s).fract() == 0.0 {
        return Ok(0.0);
    }
    if s < 0.5 {
        // ξ(s) = ξ(1−s)
        return Ok(xi(1.0 - s)? / xi_factor(s)?);
    }
    let n = 60usize;
    let mut d = vec![0.0; n + 1];
    let mut acc = 0.0;
    let mut term = 1.0 / n as f64;
    for i in 0..=n {
        if i > 0 {
            term *= 4.0 * ((n + i - 1) as f64) * ((n - i + 1) as f64) / ((2 * i - 1) as f64 * (2 * i) as f64);
        }
        acc += term;
        d[i] = acc * n as f64;
    }
    let mut sum = 0.0;
    for (kk, dk) in d.iter().take(n).enumerate() {
        let sign = if kk % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (dk - d[n]) / ((kk + 1) as f64).powf(s);
    }
    let eta = -sum / d[n];
    Ok(eta / (1.0 - 2f64.powf(1.0 - s)))
}

fn xi_factor(s: f64) -> Result<f64> {
    Ok(PI.powf(-0.5 * s) * gamma_real(0.5 * s)?)
}

/// Completed zeta `ξ(s) = π^{−s/2} Γ(s/2) ζ(s)`.
pub fn xi(s: f64) -> Result<f64> {
    if s < 0.5 {
        return xi(1.0 - s);
    }
    Ok(xi_factor(s)? * zeta(s)?)
}

type RadialEval = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

/// Radial profile `f₀` of a K-type function `f₀(r) e^{ikθ}` on ℝ².
#[derive(Clone)]
pub struct RadialProfile {
    eval: RadialEval,
    /// Numerical support: `f₀` vanishes (or is negligible) beyond this radius.
    pub support: f64,
    pub smooth: bool,
}

impl std::fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialProfile").field("support", &self.support).field("smooth", &self.smooth).finish()
    }
}

impl RadialProfile {
    pub fn new<F>(support: f64, f: F) -> Self
    where
        F: Fn(f64) -> C64 + Send + Sync + 'static,
    {
        Self { eval: Arc::new(f), support, smooth: true }
    }

    pub fn real<F>(support: f64, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(support, move |r| C64::new(f(r), 0.0))
    }

    #[inline]
    pub fn eval(&self, r: f64) -> C64 {
        if r > self.support {
            C64::new(0.0, 0.0)
        } else {
            (self.eval)(r)
        }
    }

    /// `∫ |f₀|² r dr`.
    pub fn norm_sq(&self) -> f64 {
        let gl = GaussLegendre::new(20);
        gl.composite(0.0, self.support, 256, |r| self.eval(r).norm_sqr() * r)
    }

    /// `r^k e^{−r²/2}`, a fixed point of the order-`k` Hankel transform.
    pub fn hermite_gaussian(k: i32) -> Self {
        let k = k.abs();
        Self::real(14.0, move |r| r.powi(k) * (-0.5 * r * r).exp())
    }

    /// `r^{|k|} exp(−1/(1 − (r/R)²))` on `[0, R)`; the factor `r^{|k|}` keeps
    /// `f₀(r)e^{ikθ}` smooth at the origin.
    pub fn bump(k: i32, radius: f64) -> Self {
        let k = k.abs();
        Self::real(radius, move |r| {
            let t = r / radius;
            if t >= 1.0 {
                0.0
            } else {
                r.powi(k) * (-1.0 / (1.0 - t * t)).exp()
            }
        })
    }
}

/// `(ℋ_k f₀)(s) = ∫₀^∞ f₀(r) J_k(sr) r dr` at one point, with Gauss–Legendre
/// panels no wider than a quarter period of the Bessel oscillation.
pub fn hankel_at(k: i32, f0: &RadialProfile, s: f64) -> Result<C64> {
    if !f0.support.is_finite() {
        return Err(StrataError::InvalidParameter("Hankel transform needs a finite numerical support".into()));
    }
    let r = f0.support;
    let width = (0.5 * PI / s.abs().max(1e-12)).min(r / 48.0);
    let panels = (r / width).ceil() as usize;
    let gl = GaussLegendre::new(16);
    let v = gl.composite_c(0.0, r, panels, |x| f0.eval(x) * (bessel_j(k, s * x) * x));
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(StrataError::InvalidParameter("profile is not integrable".into()));
    }
    Ok(v)
}

/// Order-`k` Hankel transform sampled on `grid`.
pub fn hankel_transform(k: i32, f0: &RadialProfile, grid: &[f64]) -> Result<Vec<C64>> {
    use rayon::prelude::*;
    grid.par_iter().map(|&s| hankel_at(k, f0, s)).collect()
}

/// Lazily evaluated `ℋ_k f₀`, truncated to `[0, s_max]`.
pub fn hankel_profile(k: i32, f0: &RadialProfile, s_max: f64) -> RadialProfile {
    let f = f0.clone();
    RadialProfile::new(s_max, move |s| hankel_at(k, &f, s).unwrap_or(C64::new(f64::NAN, 0.0)))
}

/// `ℋ_k` tabulated on Gauss–Legendre nodes of `[0, s_max]`; supports cheap
/// evaluation of the inverse transform.
#[derive(Clone, Debug)]
pub struct HankelTable {
    pub k: i32,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub values: Vec<C64>,
}

impl HankelTable {
    pub fn new(k: i32, f0: &RadialProfile, s_max: f64, r_max: f64) -> Result<Self> {
        let width = (0.5 * PI / r_max).min(s_max / 64.0);
        let panels = (s_max / width).ceil() as usize;
        let gl = GaussLegendre::new(16);
        let h = s_max / panels as f64;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for i in 0..panels {
            for (x, w) in gl.mapped(i as f64 * h, (i + 1) as f64 * h) {
                nodes.push(x);
                weights.push(w);
            }
        }
        let values = hankel_transform(k, f0, &nodes)?;
        Ok(Self { k, nodes, weights, values })
    }

    /// `∫₀^{s_max} (ℋ_k f₀)(s) J_k(rs) s ds`, i.e. `ℋ_k ℋ_k f₀` at `r`.
    pub fn inverse_at(&self, r: f64) -> C64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .zip(&self.values)
            .map(|((s, w), v)| v * (w * s * bessel_j(self.k, r * s)))
            .sum()
    }

    /// `∫₀^{s_max} |ℋ_k f₀|² s ds`.
    pub fn norm_sq(&self) -> f64 {
        self.nodes.iter().zip(&self.weights).zip(&self.values).map(|((s, w), v)| w * s * v.norm_sqr()).sum()
    }
}

/// Relative `L²(r dr)` errors of `ℋ_kℋ_k f₀ = f₀` and `‖ℋ_k f₀‖ = ‖f₀‖`.
pub fn hankel_involution_check(k: i32, f0: &RadialProfile, s_max: f64) -> Result<(f64, f64)> {
    let table = HankelTable::new(k, f0, s_max, f0.support)?;
    let gl = GaussLegendre::new(16);
    let panels = 64;
    let h = f0.support / panels as f64;
    let mut err = 0.0;
    let mut norm = 0.0;
    for i in 0..panels {
        for (r, w) in gl.mapped(i as f64 * h, (i + 1) as f64 * h) {
            let d = table.inverse_at(r) - f0.eval(r);
            err += w * r * d.norm_sqr();
            norm += w * r * f0.eval(r).norm_sqr();
        }
    }
    let involution = (err / norm).sqrt();
    let isometry = (table.norm_sq().sqrt() - norm.sqrt()).abs() / norm.sqrt();
    Ok((involution, isometry))
}

/// `(T_j h)(y) = y · h(2πj/√y)`.
pub fn t_transform<H: Fn(f64) -> C64>(j: i32, h: H) -> Result<impl Fn(f64) -> C64> {
    if j == 0 {
        return Err(StrataError::InvalidParameter("T_j needs j ≠ 0".into()));
    }
    let c = 2.0 * PI * j as f64;
    Ok(move |y: f64| h(c / y.sqrt()) * y)
}

/// `(S_j h)(r) = r²/(2πj)² · h((2πj)²/r²)`, the inverse of [`t_transform`].
pub fn s_transform<H: Fn(f64) -> C64>(j: i32, h: H) -> Result<impl Fn(f64) -> C64> {
    if j == 0 {
        return Err(StrataError::InvalidParameter("S_j needs j ≠ 0".into()));
    }
    let c2 = (2.0 * PI * j as f64).powi(2);
    Ok(move |r: f64| h(c2 / (r * r)) * (r * r / c2))
}
