//! Per-mode spectral problem for the compound Laplacian on cusp forms.
//!
//! On the mode `β(y) e(nx + m v/y)` with `n, m ≠ 0` the operator acts as
//!
//! `Lβ = −y²β'' + (4π²n²y² − 2πkny + c_k + επ²m²/y) β`,  `c_k = (k/2)(k/2 − 1)`,
//!
//! which is symmetric for `∫ β γ̄ y⁻² dy`. Its quadratic form is
//! `∫|β'|² dy + ∫ V|β|² y⁻² dy`; we discretise that form with piecewise-linear
//! elements and a lumped (diagonal) mass, which on a log grid is the usual
//! three-point scheme. The generalised problem is then a symmetric tridiagonal
//! one, solved by Sturm bisection and inverse iteration.

use crate::operators::weight_shift;
use crate::{Result, StrataError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    /// Uniform in `log y`.
    Log,
    /// `log y` uniform in `s + ½ sin(2πs)/(2π)`: coarser in the middle, finer at both ends.
    Graded,
}

/// Node set on `[y_min, y_max]`; `n` intervals, Dirichlet at both ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub y_min: f64,
    pub y_max: f64,
    pub n: usize,
    pub kind: GridKind,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { y_min: 1e-3, y_max: 50.0, n: 4096, kind: GridKind::Log }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.y_min > 0.0 && self.y_max > self.y_min && self.n >= 4) {
            return Err(StrataError::InvalidParameter(format!("bad grid {self:?}")));
        }
        Ok(())
    }

    /// All `n + 1` nodes including the two boundary nodes.
    pub fn nodes(&self) -> Vec<f64> {
        let (a, b) = (self.y_min.ln(), self.y_max.ln());
        (0..=self.n)
            .map(|i| {
                let s = i as f64 / self.n as f64;
                let t = match self.kind {
                    GridKind::Log => s,
                    GridKind::Graded => s + 0.5 * (2.0 * PI * s).sin() / (2.0 * PI),
                };
                if i == self.n {
                    self.y_max
                } else {
                    (a + (b - a) * t).exp()
                }
            })
            .collect()
    }

    pub fn refined(&self) -> Self {
        Self { n: 2 * self.n, ..*self }
    }
}

/// `M⁻¹(K + V)` on the interior nodes, stored as three bands, together with
/// the lumped weights `M`.
#[derive(Clone, Debug, Serialize)]
pub struct ModeOperator {
    pub k: i32,
    pub n: i32,
    pub m: i32,
    pub eps: f64,
    pub grid: GridSpec,
    /// Interior nodes.
    pub y: Vec<f64>,
    /// Lumped weights of `y⁻² dy`.
    pub mass: Vec<f64>,
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

/// `4π²n²y² − 2πkny + c_k + επ²m²/y`.
pub fn potential(k: i32, n: i32, m: i32, eps: f64, y: f64) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    4.0 * PI * PI * nf * nf * y * y - 2.0 * PI * k as f64 * nf * y + weight_shift(k) + eps * PI * PI * mf * mf / y
}

pub fn build_mode_operator(k: i32, n: i32, m: i32, eps: f64, grid: &GridSpec) -> Result<ModeOperator> {
    grid.validate()?;
    if n == 0 || m == 0 {
        return Err(StrataError::InvalidParameter("cusp modes need n ≠ 0 and m ≠ 0".into()));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(StrataError::InvalidParameter(format!("ε = {eps} must be ≥ 0")));
    }
    let nodes = grid.nodes();
    let h: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
    let ni = nodes.len() - 2;
    let mut y = Vec::with_capacity(ni);
    let mut mass = Vec::with_capacity(ni);
    let mut diag = Vec::with_capacity(ni);
    let mut upper = vec![0.0; ni];
    let mut lower = vec![0.0; ni];
    for i in 1..=ni {
        let yi = nodes[i];
        let w = 0.5 * (h[i - 1] + h[i]) / (yi * yi);
        y.push(yi);
        mass.push(w);
        diag.push(1.0 / h[i - 1] + 1.0 / h[i] + potential(k, n, m, eps, yi) * w);
    }
    for i in 0..ni {
        let kij = -1.0 / h[i + 1];
        if i + 1 < ni {
            upper[i] = kij / mass[i];
            lower[i + 1] = kij / mass[i + 1];
        }
        diag[i] /= mass[i];
    }
    Ok(ModeOperator { k, n, m, eps, grid: *grid, y, mass, lower, diag, upper })
}

impl ModeOperator {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// `(Lβ)` at the interior nodes, for `β` sampled there (zero at the ends).
    pub fn apply(&self, beta: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * beta[i];
                if i > 0 {
                    s += self.lower[i] * beta[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * beta[i + 1];
                }
                s
            })
            .collect()
    }

    /// `max |M_i L_{i,i+1} − M_{i+1} L_{i+1,i}|` relative to the largest entry
    /// of `M L`.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.len();
        let scale = (0..n).map(|i| (self.mass[i] * self.diag[i]).abs()).fold(0.0, f64::max);
        (0..n - 1)
            .map(|i| (self.mass[i] * self.upper[i] - self.mass[i + 1] * self.lower[i + 1]).abs())
            .fold(0.0, f64::max)
            / scale
    }

    /// Symmetric tridiagonal `M^{1/2} L M^{−1/2}`.
    fn symmetric(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let off = (0..n - 1).map(|i| self.upper[i] * (self.mass[i] / self.mass[i + 1]).sqrt()).collect();
        (self.diag.clone(), off)
    }

    /// Number of eigenvalues below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let (d, e) = self.symmetric();
        sturm_count(&d, &e, x)
    }

    pub fn weighted_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.mass).map(|((x, y), w)| x * y * w).sum()
    }

    /// `⟨β, Lβ⟩ / ⟨β, β⟩` in the weighted inner product.
    pub fn rayleigh(&self, beta: &[f64]) -> f64 {
        self.weighted_dot(beta, &self.apply(beta)) / self.weighted_dot(beta, beta)
    }

    /// `∂_ε` of the Rayleigh quotient: `⟨β, π²m²y⁻¹β⟩ / ⟨β, β⟩`.
    pub fn eps_derivative(&self, beta: &[f64]) -> f64 {
        let c = PI * PI * (self.m as f64).powi(2);
        let num: f64 = beta.iter().zip(&self.y).zip(&self.mass).map(|((b, y), w)| c / y * b * b * w).sum();
        num / self.weighted_dot(beta, beta)
    }
}

fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        let qq = if q == 0.0 { f64::EPSILON * (e[i - 1].abs() + 1e-300) } else { q };
        q = d[i] - x - e[i - 1] * e[i - 1] / qq;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Solve `(T − σ)x = b` for tridiagonal `T` with partial pivoting.
fn tridiag_solve(d: &[f64], e: &[f64], sigma: f64, b: &[f64]) -> Vec<f64> {
    let n = d.len();
    // rows of U have up to three entries after pivoting
    let mut u0 = vec![0.0; n];
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    let mut rhs = b.to_vec();
    let mut cur = [d[0] - sigma, if n > 1 { e[0] } else { 0.0 }, 0.0];
    for i in 0..n {
        if i + 1 == n {
            u0[i] = if cur[0] == 0.0 { f64::EPSILON } else { cur[0] };
            break;
        }
        let next = [e[i], d[i + 1] - sigma, if i + 2 < n { e[i + 1] } else { 0.0 }];
        if cur[0].abs() >= next[0].abs() {
            let piv = if cur[0] == 0.0 { f64::EPSILON } else { cur[0] };
            let l = next[0] / piv;
            u0[i] = piv;
            u1[i] = cur[1];
            u2[i] = cur[2];
            rhs[i + 1] -= l * rhs[i];
            cur = [next[1] - l * cur[1], next[2] - l * cur[2], 0.0];
        } else {
            let l = cur[0] / next[0];
            u0[i] = next[0];
            u1[i] = next[1];
            u2[i] = next[2];
            let ri = rhs[i];
            rhs[i] = rhs[i + 1];
            rhs[i + 1] = ri - l * rhs[i + 1];
            cur = [cur[1] - l * next[1], cur[2] - l * next[2], 0.0];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        if i + 1 < n {
            s -= u1[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= u2[i] * x[i + 2];
        }
        x[i] = s / u0[i];
    }
    x
}

/// Lowest eigenpairs; vectors are samples of `β` at the interior nodes,
/// normalised in `∫|β|² y⁻² dy`.
#[derive(Clone, Debug, Serialize)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

pub fn eigen_solve(op: &ModeOperator, count: usize) -> Result<Eigenpairs> {
    let n = op.len();
    if count == 0 || count > n {
        return Err(StrataError::InvalidParameter(format!("cannot extract {count} of {n} eigenvalues")));
    }
    let (d, e) = op.symmetric();
    // Gershgorin bounds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    let values: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|j| {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if sturm_count(&d, &e, mid) > j {
                    b = mid;
                } else {
                    a = mid;
                }
                if b - a <= 4.0 * f64::EPSILON * (a.abs() + b.abs()) {
                    break;
                }
            }
            0.5 * (a + b)
        })
        .collect();
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(count);
    for (j, &lam) in values.iter().enumerate() {
        let gap = (lam.abs() + 1.0) * 1e-10;
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7 + j * 13) % 17) as f64).collect();
        for _ in 0..4 {
            x = tridiag_solve(&d, &e, lam - gap, &x);
            // eigenvalues this close are not resolved by the grid anyway; keep the
            // vectors orthogonal so they still span the cluster
            for prev in &xs {
                let c: f64 = x.iter().zip(prev).map(|(a, b)| a * b).sum();
                x.iter_mut().zip(prev).for_each(|(a, b)| *a -= c * b);
            }
            let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(nrm.is_finite() && nrm > 0.0) {
                return Err(StrataError::Convergence(format!("inverse iteration for eigenvalue {j}")));
            }
            x.iter_mut().for_each(|v| *v /= nrm);
        }
        xs.push(x);
    }
    let vectors = xs.into_iter().map(|x| x.iter().zip(&op.mass).map(|(v, w)| v / w.sqrt()).collect()).collect();
    Ok(Eigenpairs { values, vectors })
}

/// Largest `|β|` within the outer `frac` of the nodes at either end, relative
/// to `max |β|`.
pub fn boundary_mass(beta: &[f64], frac: f64) -> f64 {
    let n = beta.len();
    let w = ((n as f64 * frac) as usize).max(1);
    let mx = beta.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let edge = beta[..w].iter().chain(&beta[n - w..]).fold(0.0f64, |a, b| a.max(b.abs()));
    edge / mx
}

/// One row of an ε-sweep.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SweepRow {
    pub k: i32,
    pub n: i32,
    pub m: i32,
    pub eps: f64,
    pub j: usize,
    pub lambda: f64,
    /// `|λ(N) − λ(2N)| / |λ(2N)|`.
    pub refinement_delta: f64,
}

pub fn epsilon_sweep(k: i32, n: i32, m: i32, eps: &[f64], grid: &GridSpec, count: usize) -> Result<Vec<SweepRow>> {
    let rows: Result<Vec<Vec<SweepRow>>> = eps
        .par_iter()
        .map(|&e| {
            let coarse = eigen_solve(&build_mode_operator(k, n, m, e, grid)?, count)?;
            let fine = eigen_solve(&build_mode_operator(k, n, m, e, &grid.refined())?, count)?;
            Ok(coarse
                .values
                .iter()
                .zip(&fine.values)
                .enumerate()
                .map(|(j, (a, b))| SweepRow {
                    k,
                    n,
                    m,
                    eps: e,
                    j,
                    lambda: *a,
                    refinement_delta: (a - b).abs() / b.abs(),
                })
                .collect())
        })
        .collect();
    Ok(rows?.into_iter().flatten().collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("k,n,m,eps,j,lambda,refinement_delta\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{:.12e},{:.3e}\n",
            r.k, r.n, r.m, r.eps, r.j, r.lambda, r.refinement_delta
        ));
    }
    s
}

/// Bottom of the band the spectrum fills as `ε → 0`: `1/4 + c_k`, the value of
/// `t² + 1/4 + c_k` at `t = 0` for the power solutions `y^{(1−k)/2 ± it}` of
/// the foliated mode equation near `y = 0`.
pub fn band_bottom(k: i32) -> f64 {
    0.25 + weight_shift(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{fit_lambda, mode_reduce_fol};
    use crate::C64;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn small() -> GridSpec {
        GridSpec { n: 1024, ..Default::default() }
    }

    #[test]
    fn rejects_bad_input() {
        let g = small();
        assert!(build_mode_operator(0, 1, 1, -0.1, &g).is_err());
        assert!(build_mode_operator(0, 0, 1, 0.1, &g).is_err());
        assert!(build_mode_operator(0, 1, 0, 0.1, &g).is_err());
        assert!(build_mode_operator(0, 1, 1, f64::NAN, &g).is_err());
        assert!(build_mode_operator(0, 1, 1, 1.0, &GridSpec { y_min: 2.0, y_max: 1.0, ..g }).is_err());
    }

    #[test]
    fn symmetric_and_positive_potential() {
        for kind in [GridKind::Log, GridKind::Graded] {
            let op = build_mode_operator(0, 1, 1, 0.5, &GridSpec { kind, ..small() }).unwrap();
            assert!(op.symmetry_residual() < 1e-12);
            assert!(op.y.iter().all(|&y| potential(0, 1, 1, 0.5, y) > 0.0));
        }
    }

    #[test]
    fn matches_mode_reduction_on_exponential() {
        // β = y^{k/2}e^{−2πy} is the twisted form of the λ = 0 solution e^{−2πy}
        // (k = 2, n = 1)
        let g = GridSpec { y_min: 0.05, y_max: 6.0, n: 4096, kind: GridKind::Log };
        let op = build_mode_operator(2, 1, 1, 0.0, &g).unwrap();
        let prof = |y: f64| y * (-2.0 * PI * y).exp();
        let beta: Vec<f64> = op.y.iter().map(|&y| prof(y)).collect();
        let lb = op.apply(&beta);
        let reference = mode_reduce_fol(&|y: f64| C64::new(prof(y), 0.0), 2, 1, &op.y);
        let lambda = fit_lambda(2, 1, &|y: f64| C64::new((-2.0 * PI * y).exp(), 0.0), &op.y[100..op.len() - 100]);
        assert!(lambda.abs() < 1e-6);
        let n = op.len();
        let bmax = beta.iter().fold(0.0f64, |a, b| a.max(*b));
        for i in n / 8..7 * n / 8 {
            // second-order scheme: the local error h²y²β⁗/12 grows like y⁴β
            assert!((lb[i] - reference[i].re).abs() < 1e-5 * bmax, "{i}: {} vs {}", lb[i], reference[i].re);
            assert!((lb[i] - lambda * beta[i]).abs() < 1e-5 * bmax);
        }
        // the ε-term is the diagonal επ²m²/y
        let op2 = build_mode_operator(2, 1, 3, 0.7, &g).unwrap();
        let lb2 = op2.apply(&beta);
        for i in n / 8..7 * n / 8 {
            let extra = 0.7 * PI * PI * 9.0 / op.y[i] * beta[i];
            assert!((lb2[i] - lb[i] - extra).abs() < 1e-10 * extra.abs().max(1.0));
        }
    }

    #[test]
    fn tridiagonal_solver_with_pivoting() {
        let d = [1e-14, 2.0, 3.0, -1.0, 5.0];
        let e = [1.0, 0.5, 2.0, 0.3];
        let x0 = [1.0, -2.0, 0.5, 3.0, -1.0];
        let b: Vec<f64> = (0..5)
            .map(|i| {
                d[i] * x0[i]
                    + if i > 0 { e[i - 1] * x0[i - 1] } else { 0.0 }
                    + if i < 4 { e[i] * x0[i + 1] } else { 0.0 }
            })
            .collect();
        let x = tridiag_solve(&d, &e, 0.0, &b);
        for (a, c) in x.iter().zip(&x0) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenpairs_are_consistent() {
        let op = build_mode_operator(0, 1, 1, 1.0, &small()).unwrap();
        let ep = eigen_solve(&op, 6).unwrap();
        for (lam, v) in ep.values.iter().zip(&ep.vectors) {
            assert!((op.rayleigh(v) - lam).abs() < 1e-8 * lam.abs().max(1.0));
            assert!(boundary_mass(v, 0.01) < 1e-6);
            let lv = op.apply(v);
            let res: f64 = lv.iter().zip(v).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt();
            let nrm: f64 = v.iter().map(|b| b * b).sum::<f64>().sqrt();
            assert!(res < 1e-7 * lam * nrm);
        }
        for w in ep.values.windows(2) {
            assert!(w[1] > w[0] * (1.0 + 1e-6), "{:?}", ep.values);
        }
        assert!(ep.values[0] > band_bottom(0));
        assert_eq!(op.count_below(ep.values[3] + 1e-9), 4);
        assert!(eigen_solve(&op, 0).is_err());
    }

    #[test]
    fn grid_and_domain_stability() {
        let base = GridSpec::default();
        let a = eigen_solve(&build_mode_operator(0, 1, 1, 1.0, &base).unwrap(), 5).unwrap().values;
        let b = eigen_solve(&build_mode_operator(0, 1, 1, 1.0, &base.refined()).unwrap(), 5).unwrap().values;
        let c =
            eigen_solve(&build_mode_operator(0, 1, 1, 1.0, &GridSpec { kind: GridKind::Graded, ..base }).unwrap(), 5)
                .unwrap()
                .values;
        let d = eigen_solve(
            &build_mode_operator(0, 1, 1, 1.0, &GridSpec { y_min: 1e-4, y_max: 80.0, n: 8192, ..base }).unwrap(),
            5,
        )
        .unwrap()
        .values;
        for j in 0..5 {
            assert!((a[j] - b[j]).abs() / b[j] < 5e-3);
            assert!((a[j] - c[j]).abs() / b[j] < 5e-3);
            assert!((a[j] - d[j]).abs() / b[j] < 5e-3);
        }
    }

    #[test]
    fn hellmann_feynman_slope() {
        let g = small();
        let eps = 0.2;
        let de = 1e-4;
        let op = build_mode_operator(0, 1, 1, eps, &g).unwrap();
        let ep = eigen_solve(&op, 3).unwrap();
        let ep2 = eigen_solve(&build_mode_operator(0, 1, 1, eps + de, &g).unwrap(), 3).unwrap();
        for j in 0..3 {
            let fd = (ep2.values[j] - ep.values[j]) / de;
            let hf = op.eps_derivative(&ep.vectors[j]);
            assert!((fd - hf).abs() < 0.05 * hf, "{j}: {fd} vs {hf}");
        }
    }

    #[test]
    fn sweep_is_monotone_and_fills_the_band() {
        let g = GridSpec { n: 2048, ..Default::default() };
        let rows = epsilon_sweep(0, 1, 1, &[1.0, 0.1, 0.01], &g, 10).unwrap();
        let at = |e: f64, j: usize| rows.iter().find(|r| r.eps == e && r.j == j).unwrap().lambda;
        for j in 0..10 {
            assert!(at(0.01, j) < at(0.1, j) && at(0.1, j) < at(1.0, j));
        }
        let window = 40.0;
        let counts: Vec<usize> = [1.0, 0.1, 0.01]
            .iter()
            .map(|&e| build_mode_operator(0, 1, 1, e, &g).unwrap().count_below(window))
            .collect();
        assert!(counts[0] < counts[1] && counts[1] < counts[2], "{counts:?}");
        assert!(sweep_csv(&rows).lines().count() == 31);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn eigenvalues_nondecreasing_in_eps(e1 in 0.0f64..2.0, de in 0.0f64..1.0, k in -2i32..=2, n in 1i32..=2) {
            let g = GridSpec { n: 512, ..Default::default() };
            let a = eigen_solve(&build_mode_operator(k, n, 1, e1, &g).unwrap(), 4).unwrap().values;
            let b = eigen_solve(&build_mode_operator(k, n, 1, e1 + de, &g).unwrap(), 4).unwrap().values;
            for j in 0..4 {
                prop_assert!(a[j] <= b[j] * (1.0 + 1e-12) + 1e-12);
            }
        }
    }
}
