//! Fourier coefficients along the torus fibres (`c^T`) and along the
//! Heisenberg group (`c^H`, refined to `c^{H0}` at `r = 0`), extracted by
//! trapezoidal quadrature / FFT on periodic grids.

use crate::quad::GaussLegendre;
use crate::saff_group::{compose, iwasawa, slash, GroupFunction, JacobiPoint, ModularFunction, SAff, Sl2};
use crate::{e, Result, StrataError, C64};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Nodes per periodic direction (`x`, `u`, `p`, `q`).
    pub nodes: usize,
    /// Nodes over one `v`-period.
    pub v_nodes: usize,
    pub tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { nodes: 64, v_nodes: 64, tol: 1e-10 }
    }
}

impl QuadratureSpec {
    pub fn new(nodes: usize, v_nodes: usize) -> Result<Self> {
        let s = Self { nodes, v_nodes, ..Default::default() };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.nodes.is_power_of_two() || !self.v_nodes.is_power_of_two() {
            return Err(StrataError::InvalidParameter(format!(
                "node counts must be powers of two, got {} and {}",
                self.nodes, self.v_nodes
            )));
        }
        Ok(())
    }
}

/// Index of a Heisenberg coefficient; `m` refines `r = 0` only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeisenbergIndex {
    pub n: i32,
    pub r: i32,
    pub m: Option<i32>,
}

impl HeisenbergIndex {
    pub fn new(n: i32, r: i32, m: Option<i32>) -> Result<Self> {
        if m.is_some() && r != 0 {
            return Err(StrataError::InvalidParameter("refined index m requires r = 0".into()));
        }
        Ok(Self { n, r, m })
    }
}

/// Normalised 2-D DFT coefficients of a row-major `rows × cols` grid:
/// `out[a][b] = (1/(rows·cols)) Σ f[i][j] e(−a i/rows − b j/cols)`.
fn dft2(mut data: Vec<C64>, rows: usize, cols: usize) -> Vec<C64> {
    let mut planner = FftPlanner::<f64>::new();
    let fr = planner.plan_fft_forward(cols);
    for row in data.chunks_mut(cols) {
        fr.process(row);
    }
    let fc = planner.plan_fft_forward(rows);
    let mut col = vec![C64::new(0.0, 0.0); rows];
    for j in 0..cols {
        for i in 0..rows {
            col[i] = data[i * cols + j];
        }
        fc.process(&mut col);
        for i in 0..rows {
            data[i * cols + j] = col[i];
        }
    }
    let s = 1.0 / (rows * cols) as f64;
    data.iter_mut().for_each(|z| *z *= s);
    data
}

fn wrap(i: i32, n: usize) -> usize {
    i.rem_euclid(n as i32) as usize
}

/// Table of `c^T(φ; m, r; τ)` for all `|m|, |r| < nodes/2`.
#[derive(Clone, Debug)]
pub struct TorusTable {
    nodes: usize,
    data: Vec<C64>,
}

impl TorusTable {
    pub fn new(phi: &ModularFunction, tau: C64, q: &QuadratureSpec) -> Self {
        let n = q.nodes;
        let vals: Vec<C64> = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                phi.eval(&JacobiPoint::from_pq(tau.re, tau.im, i as f64 / n as f64, j as f64 / n as f64))
            })
            .collect();
        Self { nodes: n, data: dft2(vals, n, n) }
    }

    pub fn get(&self, m: i32, r: i32) -> C64 {
        self.data[wrap(m, self.nodes) * self.nodes + wrap(r, self.nodes)]
    }
}

/// `c^T(φ; m, r; τ) = ∫∫ φ(τ, pτ + q) e(−mp − rq) dp dq`.
pub fn coeff_t(phi: &ModularFunction, m: i32, r: i32, tau: C64, q: &QuadratureSpec) -> C64 {
    TorusTable::new(phi, tau, q).get(m, r)
}

/// Table of `c^H(φ; n, r; y, w₁)` over the `(x, u)` torus at `v = w₁ y`.
#[derive(Clone, Debug)]
pub struct HeisenbergTable {
    nodes: usize,
    data: Vec<C64>,
    /// Mean of `|φ|²` over the grid, for Parseval checks.
    pub mean_sq: f64,
}

impl HeisenbergTable {
    pub fn new(phi: &ModularFunction, y: f64, w1: f64, q: &QuadratureSpec) -> Self {
        let n = q.nodes;
        let vals: Vec<C64> = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                phi.eval(&JacobiPoint::new(i as f64 / n as f64, y, j as f64 / n as f64, w1 * y))
            })
            .collect();
        let mean_sq = vals.iter().map(|z| z.norm_sqr()).sum::<f64>() / (n * n) as f64;
        Self { nodes: n, data: dft2(vals, n, n), mean_sq }
    }

    pub fn get(&self, n: i32, r: i32) -> C64 {
        self.data[wrap(n, self.nodes) * self.nodes + wrap(r, self.nodes)]
    }

    /// `|Σ|c|² − mean|φ|²|`.
    pub fn parseval_residual(&self) -> f64 {
        (self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() - self.mean_sq).abs()
    }
}

pub fn coeff_h(phi: &ModularFunction, n: i32, r: i32, y: f64, w1: f64, q: &QuadratureSpec) -> C64 {
    HeisenbergTable::new(phi, y, w1, q).get(n, r)
}

/// Table of `c^{H0}(φ; n, m; y)` for `|n| < nodes/2`, `|m| < v_nodes/2`.
#[derive(Clone, Debug)]
pub struct H0Table {
    pub y: f64,
    nodes: usize,
    v_nodes: usize,
    data: Vec<C64>,
}

impl H0Table {
    pub fn new(phi: &ModularFunction, y: f64, q: &QuadratureSpec) -> Self {
        let (n, nv) = (q.nodes, q.v_nodes);
        // rows x, columns s = v/y; the u-average is the r = 0 projection
        let vals: Vec<C64> = (0..n * nv)
            .into_par_iter()
            .map(|idx| {
                let (i, l) = (idx / nv, idx % nv);
                let x = i as f64 / n as f64;
                let v = y * l as f64 / nv as f64;
                let s: C64 = (0..n).map(|j| phi.eval(&JacobiPoint::new(x, y, j as f64 / n as f64, v))).sum();
                s / n as f64
            })
            .collect();
        Self { y, nodes: n, v_nodes: nv, data: dft2(vals, n, nv) }
    }

    pub fn get(&self, n: i32, m: i32) -> C64 {
        self.data[wrap(n, self.nodes) * self.v_nodes + wrap(m, self.v_nodes)]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `c^{H0}(φ; n, m; y) = (1/y) ∫_0^y c^H(φ; n, 0; y, v/y) e(−mv/y) dv`.
pub fn coeff_h0(phi: &ModularFunction, n: i32, m: i32, y: f64, q: &QuadratureSpec) -> C64 {
    H0Table::new(phi, y, q).get(n, m)
}

/// Residual of `c^T(φ; m, 0; τ) = Σ_n c^{H0}(φ; n, m; y) e(nx)` with the
/// sum over `|n| ≤ n_max`, and a truncation indicator: the mass of the
/// retained coefficients with `|n| > n_max/2`.
pub fn relation_t_h0(phi: &ModularFunction, m: i32, tau: C64, n_max: i32, q: &QuadratureSpec) -> (f64, f64) {
    let lhs = coeff_t(phi, m, 0, tau, q);
    let tab = H0Table::new(phi, tau.im, q);
    let mut rhs = C64::new(0.0, 0.0);
    let mut tail = 0.0;
    for n in -n_max..=n_max {
        let c = tab.get(n, m);
        rhs += c * e(n as f64 * tau.re);
        if 2 * n.abs() > n_max {
            tail += c.norm();
        }
    }
    ((lhs - rhs).norm(), tail)
}

/// Residual of `c^T(φ|γ; m, r; τ) = (cτ+d)^{−k} c^T(φ; (m, r)γᵗ; γτ)`.
/// For invariant `φ` the left side is `c^T(φ; m, r; τ)`.
pub fn torus_equivariance_check(
    phi: &ModularFunction,
    gamma: &Sl2,
    m: i32,
    r: i32,
    tau: C64,
    q: &QuadratureSpec,
) -> Result<f64> {
    if !gamma.is_integral() {
        return Err(StrataError::InvalidParameter("γ must be integral".into()));
    }
    let lhs = coeff_t(&slash(phi, &SAff::linear(*gamma)), m, r, tau, q);
    let (a, b, c, d) = (gamma.a.round() as i32, gamma.b.round() as i32, gamma.c.round() as i32, gamma.d.round() as i32);
    // (m, r)γᵗ = (am + br, cm + dr)
    let (mt, rt) = (a * m + b * r, c * m + d * r);
    let rhs = coeff_t(phi, mt, rt, gamma.mobius(tau), q) * gamma.j(tau).powi(-phi.weight);
    Ok((lhs - rhs).norm())
}

/// Truncation and quadrature for [`scalar_product_via_coeffs`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffCutoff {
    pub n_max: i32,
    pub m_max: i32,
    pub y_min: f64,
    pub y_max: f64,
    /// Gauss–Legendre panels in `log y` (16 nodes each).
    pub y_panels: usize,
}

impl Default for CoeffCutoff {
    fn default() -> Self {
        Self { n_max: 8, m_max: 8, y_min: 0.05, y_max: 20.0, y_panels: 6 }
    }
}

/// `Σ_{|n|≤N, 0<|m|≤M} ∫ c^{H0}(φ₁; n, m; y) c̄^{H0}(φ₂; n, m; y) y^{k−2} dy`.
///
/// The `m = 0` terms are excluded: they do not unfold and would be infinite
/// for any function with a nonzero `m = 0` constant term.
pub fn scalar_product_via_coeffs(
    phi1: &ModularFunction,
    phi2: &ModularFunction,
    cut: &CoeffCutoff,
    q: &QuadratureSpec,
) -> Result<C64> {
    if phi1.weight != phi2.weight {
        return Err(StrataError::WeightMismatch(phi1.weight, phi2.weight));
    }
    if cut.n_max >= (q.nodes / 2) as i32 || cut.m_max >= (q.v_nodes / 2) as i32 {
        return Err(StrataError::InvalidParameter("cutoff exceeds quadrature resolution".into()));
    }
    let k = phi1.weight as f64;
    let gl = GaussLegendre::new(16);
    let (a, b) = (cut.y_min.ln(), cut.y_max.ln());
    let h = (b - a) / cut.y_panels as f64;
    let mut nodes = Vec::new();
    for p in 0..cut.y_panels {
        for (t, w) in gl.mapped(a + p as f64 * h, a + (p + 1) as f64 * h) {
            nodes.push((t.exp(), w));
        }
    }
    let total: C64 = nodes
        .par_iter()
        .map(|&(y, w)| {
            let t1 = H0Table::new(phi1, y, q);
            let t2 = H0Table::new(phi2, y, q);
            let mut s = C64::new(0.0, 0.0);
            for n in -cut.n_max..=cut.n_max {
                for m in (-cut.m_max..=cut.m_max).filter(|&m| m != 0) {
                    s += t1.get(n, m) * t2.get(n, m).conj();
                }
            }
            // dy = y d(log y)
            s * (w * y.powf(k - 1.0))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(total)
}

/// True iff `|c^{H0}(φ; 0, m; y)| < tol` for all `|m| ≤ m_max` and `y` in the grid.
pub fn is_cusp_form(phi: &ModularFunction, tol: f64, m_max: i32, y_grid: &[f64], q: &QuadratureSpec) -> bool {
    y_grid.par_iter().all(|&y| {
        let t = H0Table::new(phi, y, q);
        (-m_max..=m_max).all(|m| t.get(0, m).norm() < tol)
    })
}

/// `∫_{N′(ℤ)\N′(ℝ)} f(hg) χ̄_{n,m}(h) dh` with `h = (n(b̃), (w̃₁, w̃₂))` and
/// `χ_{n,m}(h) = e(n b̃ + m w̃₁)`, by the trapezoidal rule on `(ℝ/ℤ)³`.
pub fn heisenberg_average(f: &GroupFunction, n: i32, m: i32, g: &SAff, q: &QuadratureSpec) -> C64 {
    let nn = q.nodes;
    let h = 1.0 / nn as f64;
    let total: C64 = (0..nn * nn)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / nn, idx % nn);
            let (b, w1) = (i as f64 * h, j as f64 * h);
            let chi = e(-(n as f64 * b + m as f64 * w1));
            let s: C64 = (0..nn).map(|l| f(&compose(&SAff::new(Sl2::unipotent(b), [w1, l as f64 * h]), g))).sum();
            s * chi
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    total * h * h * h
}

/// Closed form of [`heisenberg_average`] for `f` the lift of `φ`:
/// `e^{ikθ} y^{k/2} c^{H0}(φ; n, m; y) e(nx + m w₁)` in Iwasawa coordinates of `g`.
pub fn heisenberg_average_closed_form(phi: &ModularFunction, n: i32, m: i32, g: &SAff, q: &QuadratureSpec) -> C64 {
    let c = iwasawa(g);
    let k = phi.weight as f64;
    C64::from_polar(c.y.powf(0.5 * k), k * c.theta) * coeff_h0(phi, n, m, c.y, q) * e(n as f64 * c.x + m as f64 * c.w1)
}

/// CSV rows `n,m,y,re,im`.
pub fn coeff_csv(rows: &[(i32, i32, f64, C64)]) -> String {
    let mut s = String::from("n,m,y,re,im\n");
    for (n, m, y, c) in rows {
        let _ = writeln!(s, "{n},{m},{y:.12e},{:.12e},{:.12e}", c.re, c.im);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saff_group::{from_iwasawa, lift, IwasawaCoords};
    use proptest::prelude::*;

    fn q16() -> QuadratureSpec {
        QuadratureSpec::new(16, 16).unwrap()
    }

    #[test]
    fn torus_coefficients_of_characters() {
        let tau = C64::new(0.3, 1.1);
        let one = ModularFunction::new(0, |_| C64::new(1.0, 0.0));
        let t = TorusTable::new(&one, tau, &q16());
        assert!((t.get(0, 0) - 1.0).norm() < 1e-14);
        assert!((1..8).all(|m| t.get(m, -m + 1).norm() < 1e-12));
        let ch = ModularFunction::new(0, |p| e(3.0 * p.p() + 2.0 * p.q()));
        assert!((coeff_t(&ch, 3, 2, tau, &q16()) - 1.0).norm() < 1e-12);
        assert!(coeff_t(&ch, 2, 3, tau, &q16()).norm() < 1e-12);
        // z-independent functions have only the (0,0) torus coefficient
        let pull = ModularFunction::new(0, |p| C64::new(p.x.cos() * p.y, p.y.sin()));
        let t = TorusTable::new(&pull, tau, &q16());
        assert!((-7..8).all(|m| (-7..8).all(|r| (m, r) == (0, 0) || t.get(m, r).norm() < 1e-12)));
    }

    #[test]
    fn heisenberg_characters() {
        let phi = ModularFunction::new(0, |p| e(2.0 * p.x + 3.0 * p.v / p.y));
        let t = H0Table::new(&phi, 1.7, &q16());
        for n in -7..8 {
            for m in -7..8 {
                let target = if (n, m) == (2, 3) { 1.0 } else { 0.0 };
                assert!((t.get(n, m) - target).norm() < 1e-10);
            }
        }
        let (res, tail) = relation_t_h0(&phi, 3, C64::new(0.3, 1.7), 6, &q16());
        assert!(res < 1e-12 && tail < 1e-12);
        assert!((coeff_t(&phi, 3, 0, C64::new(0.3, 1.7), &q16()) - e(0.6)).norm() < 1e-12);
    }

    #[test]
    fn relation_for_trig_polynomial_in_x_p_q() {
        let phi = ModularFunction::new(0, |p| {
            e(p.x + 2.0 * p.p()) * 0.5 + e(-p.x + p.p() - p.q()) + e(3.0 * p.x - p.p()) * C64::new(0.0, 2.0)
        });
        for m in [-1, 0, 1, 2] {
            let (res, _) = relation_t_h0(&phi, m, C64::new(-0.2, 0.9), 6, &q16());
            assert!(res < 1e-12, "m={m}: {res}");
        }
    }

    #[test]
    fn parseval_on_trig_polynomial() {
        let phi = ModularFunction::new(0, |p| e(p.x + 2.0 * p.u) * 0.5 + e(-3.0 * p.u) + 0.25);
        let t = HeisenbergTable::new(&phi, 1.3, 0.4, &q16());
        assert!(t.parseval_residual() < 1e-12);
        assert!((t.mean_sq - (0.25 + 1.0 + 0.0625)).abs() < 1e-12);
        assert!((coeff_h(&phi, 1, 2, 1.3, 0.4, &q16()) - 0.5).norm() < 1e-12);
    }

    #[test]
    fn equivariance_identity_and_minus_identity() {
        let phi = ModularFunction::new(3, |p| e(p.p() + 2.0 * p.q()) * p.y + e(-p.p()) * C64::new(p.x, 1.0));
        let tau = C64::new(0.1, 1.2);
        assert!(torus_equivariance_check(&phi, &Sl2::IDENTITY, 1, 2, tau, &q16()).unwrap() < 1e-12);
        let minus = Sl2::new(-1.0, 0.0, 0.0, -1.0);
        // γ = −I sends the index to (−m, −r) with sign (−1)^k
        assert!(torus_equivariance_check(&phi, &minus, 1, 2, tau, &q16()).unwrap() < 1e-12);
        assert!(torus_equivariance_check(&phi, &Sl2::new(1.0, 0.5, 0.0, 1.0), 1, 2, tau, &q16()).is_err());
    }

    #[test]
    fn heisenberg_average_closed_form_and_orthogonality() {
        let q = q16();
        for k in [0, 2, -1] {
            let phi = ModularFunction::new(k, |p| e(p.x - 2.0 * p.v / p.y) + e(2.0 * p.u) * 0.3);
            let f = lift(&phi);
            let g = from_iwasawa(&IwasawaCoords { x: 0.3, y: 1.4, w1: 0.2, w2: -0.4, theta: 0.7 });
            let avg = heisenberg_average(&f, 1, -2, &g, &q);
            let closed = heisenberg_average_closed_form(&phi, 1, -2, &g, &q);
            let target = C64::from_polar(1.4f64.powf(0.5 * k as f64), 0.7 * k as f64) * e(0.3 - 0.4);
            assert!((avg - target).norm() < 1e-10 && (closed - target).norm() < 1e-10, "k={k}");
            assert!(heisenberg_average(&f, 1, 2, &g, &q).norm() < 1e-10);
        }
    }

    #[test]
    fn cusp_predicate_trivial() {
        let zero = ModularFunction::new(0, |_| C64::new(0.0, 0.0));
        assert!(is_cusp_form(&zero, 1e-12, 4, &[0.5, 1.0], &q16()));
        let c = ModularFunction::new(0, |p| e(p.v / p.y));
        assert!(!is_cusp_form(&c, 1e-6, 4, &[0.5, 1.0], &q16()));
        assert!(QuadratureSpec::new(12, 16).is_err());
        assert!(HeisenbergIndex::new(1, 2, Some(1)).is_err());
        assert!(coeff_csv(&[(1, 2, 0.5, C64::new(1.0, 0.0))]).lines().count() == 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn equivariance_on_generic_functions(
            a in -2i32..=2, c in -2i32..=2, x in -0.5..0.5f64, y in 0.6..2.0f64, m in -2i32..=2, r in -2i32..=2, k in -2i32..=3
        ) {
            // complete (a, c) to an SL2(Z) element when coprime
            prop_assume!(num_integer::gcd(a, c) == 1);
            let (mut b, mut d) = (0i32, 0i32);
            'outer: for bb in -3..=3 { for dd in -3..=3 { if a * dd - bb * c == 1 { b = bb; d = dd; break 'outer; } } }
            prop_assume!(a * d - b * c == 1);
            let gamma = Sl2::new(a as f64, b as f64, c as f64, d as f64);
            let phi = ModularFunction::new(k, |p| {
                let (pp, qq) = (p.p(), p.q());
                e(pp - qq) * (1.0 + p.x * p.x) + e(2.0 * qq) * p.y.sqrt() + e(pp + qq) * C64::new(0.0, p.x)
            });
            let res = torus_equivariance_check(&phi, &gamma, m, r, C64::new(x, y), &QuadratureSpec::new(16, 16).unwrap()).unwrap();
            prop_assert!(res < 1e-11, "{res}");
        }
    }
}
