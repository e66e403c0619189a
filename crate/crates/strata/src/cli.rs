//! Verification suites, run configuration and report emission.
//!
//! Every identity the library is built to reproduce is phrased as a [`Claim`]
//! (prediction, measurement, error bar, verdict). The suites group claims by
//! layer; the `strata` binary and the acceptance target both run them from
//! here, so the two can never disagree.

use crate::enveloping::{
    casimir_saff, casimir_sl2, euclidean_foliated_target, euclidean_rep, is_central, symmetrize_element,
    GaussianRational as GR,
};
use crate::heisenberg_fourier::H0Table;
use crate::heisenberg_fourier::{CoeffCutoff, QuadratureSpec};
use crate::operators::{apply_tot, fit_lambda, sv_commutation_check, weight_shift, StencilSpec};
use crate::saff_group::{inner_product, JacobiPoint, MCSpec, ModularFunction};
use crate::series::{AffineSeries, BetaProfile};
use crate::siegel_veech::{
    adjoint_duality, height_damped_transform, orthogonality_to_cusp, sv_coeffs_check, sv_mean_mc, sv_second_moment_mc,
    KTypeFunction, PlaneFunction,
};
use crate::special_fn::{
    asymptotic_error_order, hankel_involution_check, whittaker_ode_residual, whittaker_profile, RadialProfile,
    WhittakerParams,
};
use crate::spectral::{build_mode_operator, epsilon_sweep, sweep_csv, GridKind, GridSpec, SweepRow};
use crate::{e, Result, StrataError, C64};
use clap::{Args, Parser, Subcommand};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

pub const SCHEMA: &str = "report_v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Algebra,
    Operators,
    Series,
    Sv,
    Fourier,
    Spectrum,
    All,
}

impl Suite {
    pub const EACH: [Suite; 6] =
        [Suite::Algebra, Suite::Operators, Suite::Series, Suite::Sv, Suite::Fourier, Suite::Spectrum];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Algebra => "algebra",
            Suite::Operators => "operators",
            Suite::Series => "series",
            Suite::Sv => "sv",
            Suite::Fourier => "fourier",
            Suite::Spectrum => "spectrum",
            Suite::All => "all",
        }
    }

    /// Criteria whose claims the suite produces.
    pub fn criteria(self) -> &'static [u8] {
        match self {
            Suite::Algebra => &[1, 2],
            Suite::Operators => &[3, 9],
            Suite::Series => &[7, 8],
            Suite::Sv => &[4, 5, 11],
            Suite::Fourier => &[6],
            Suite::Spectrum => &[10],
            Suite::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11],
        }
    }
}

impl FromStr for Suite {
    type Err = StrataError;
    fn from_str(s: &str) -> Result<Self> {
        [Suite::All]
            .iter()
            .chain(Suite::EACH.iter())
            .copied()
            .find(|x| x.name() == s)
            .ok_or_else(|| bad(format!("unknown suite `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = StrataError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(bad(format!("unknown format `{s}`"))),
        }
    }
}

fn bad(msg: String) -> StrataError {
    StrataError::InvalidParameter(msg)
}

/// Everything a run depends on. Two runs with equal configurations produce
/// byte-identical reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    /// Box radius of the coset enumeration for series without compact support.
    pub r_coset: i64,
    /// Support radius of the plane test functions fed to Siegel–Veech transforms.
    pub r_lattice: f64,
    pub samples: usize,
    pub batches: usize,
    /// Cusp cut of the Monte-Carlo sampler.
    pub y_max: f64,
    pub quad_nodes: usize,
    pub quad_v_nodes: usize,
    pub grid_y_min: f64,
    pub grid_y_max: f64,
    pub grid_n: usize,
    pub grid_kind: GridKind,
    /// Levels `M` of the relative transforms checked by the `sv` suite.
    pub sv_m: Vec<u32>,
    pub spectrum_k: i32,
    pub spectrum_n: i32,
    pub spectrum_m: i32,
    pub spectrum_eps: Vec<f64>,
    /// Eigenvalues reported per `ε`.
    pub spectrum_count: usize,
    /// Upper end of the counting window `[0, w)`.
    pub spectrum_window: f64,
    pub suite: Suite,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            seed: 7,
            r_coset: 40,
            r_lattice: 1.0,
            samples: 1_000_000,
            batches: 200,
            y_max: 1e3,
            quad_nodes: 32,
            quad_v_nodes: 32,
            grid_y_min: g.y_min,
            grid_y_max: g.y_max,
            grid_n: g.n,
            grid_kind: g.kind,
            sv_m: vec![1, 2, 3],
            spectrum_k: 0,
            spectrum_n: 1,
            spectrum_m: 1,
            spectrum_eps: vec![1.0, 0.1, 0.01],
            spectrum_count: 10,
            spectrum_window: 40.0,
            suite: Suite::All,
            output: None,
            format: Format::Json,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| bad(format!("bad value `{v}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(key, s)).collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn mc(&self, stream: u64) -> MCSpec {
        MCSpec { samples: self.samples, seed: stream_seed(self.seed, stream), y_max: self.y_max, batches: self.batches }
    }

    pub fn quadrature(&self) -> Result<QuadratureSpec> {
        QuadratureSpec::new(self.quad_nodes, self.quad_v_nodes)
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec { y_min: self.grid_y_min, y_max: self.grid_y_max, n: self.grid_n, kind: self.grid_kind }
    }

    pub fn validate(&self) -> Result<()> {
        self.quadrature()?;
        self.grid().validate()?;
        if self.samples < 2 * self.batches || self.batches < 2 {
            return Err(bad("need batches ≥ 2 and at least two samples per batch".into()));
        }
        if !(self.r_lattice > 0.0 && self.y_max > 1.0 && self.r_coset >= 1) {
            return Err(bad("radii and y_max must be positive".into()));
        }
        if self.sv_m.is_empty() || self.sv_m.contains(&0) {
            return Err(bad("sv_m must list levels ≥ 1".into()));
        }
        if self.spectrum_eps.is_empty() || self.spectrum_count == 0 {
            return Err(bad("spectrum needs at least one ε and one eigenvalue".into()));
        }
        Ok(())
    }

    /// Sets one `key = value` entry.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse(key, v)?,
            "r_coset" => self.r_coset = parse(key, v)?,
            "r_lattice" => self.r_lattice = parse(key, v)?,
            "samples" => self.samples = parse(key, v)?,
            "batches" => self.batches = parse(key, v)?,
            "y_max" => self.y_max = parse(key, v)?,
            "quad_nodes" => self.quad_nodes = parse(key, v)?,
            "quad_v_nodes" => self.quad_v_nodes = parse(key, v)?,
            "grid_y_min" => self.grid_y_min = parse(key, v)?,
            "grid_y_max" => self.grid_y_max = parse(key, v)?,
            "grid_n" => self.grid_n = parse(key, v)?,
            "grid_kind" => {
                self.grid_kind = match v.trim() {
                    "log" => GridKind::Log,
                    "graded" => GridKind::Graded,
                    _ => return Err(bad(format!("bad grid kind `{v}`"))),
                }
            }
            "sv_m" => self.sv_m = parse_list(key, v)?,
            "spectrum_k" => self.spectrum_k = parse(key, v)?,
            "spectrum_n" => self.spectrum_n = parse(key, v)?,
            "spectrum_m" => self.spectrum_m = parse(key, v)?,
            "spectrum_eps" => self.spectrum_eps = parse_list(key, v)?,
            "spectrum_count" => self.spectrum_count = parse(key, v)?,
            "spectrum_window" => self.spectrum_window = parse(key, v)?,
            "suite" => self.suite = v.trim().parse()?,
            "output" => self.output = if v.trim().is_empty() { None } else { Some(PathBuf::from(v.trim())) },
            "format" => self.format = v.trim().parse()?,
            _ => return Err(bad(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Flat `key = value` text; `#` starts a comment. Unset keys keep their defaults.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("line {}: expected key = value", i + 1)))?;
            c.set(k.trim(), v)?;
        }
        Ok(c)
    }

    pub fn to_kv(&self) -> String {
        let kind = match self.grid_kind {
            GridKind::Log => "log",
            GridKind::Graded => "graded",
        };
        let fmt = match self.format {
            Format::Json => "json",
            Format::Csv => "csv",
        };
        let mut s = String::new();
        let mut put = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        put("seed", self.seed.to_string());
        put("r_coset", self.r_coset.to_string());
        put("r_lattice", self.r_lattice.to_string());
        put("samples", self.samples.to_string());
        put("batches", self.batches.to_string());
        put("y_max", self.y_max.to_string());
        put("quad_nodes", self.quad_nodes.to_string());
        put("quad_v_nodes", self.quad_v_nodes.to_string());
        put("grid_y_min", self.grid_y_min.to_string());
        put("grid_y_max", self.grid_y_max.to_string());
        put("grid_n", self.grid_n.to_string());
        put("grid_kind", kind.into());
        put("sv_m", join(&self.sv_m));
        put("spectrum_k", self.spectrum_k.to_string());
        put("spectrum_n", self.spectrum_n.to_string());
        put("spectrum_m", self.spectrum_m.to_string());
        put("spectrum_eps", join(&self.spectrum_eps));
        put("spectrum_count", self.spectrum_count.to_string());
        put("spectrum_window", self.spectrum_window.to_string());
        put("suite", self.suite.name().into());
        put("output", self.output.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        put("format", fmt.into());
        s
    }
}

/// Independent seed for sample stream `stream` of a run seeded with `base`.
pub fn stream_seed(base: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(stream);
    rng.next_u64()
}

/// One checked statement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    /// Acceptance criterion the claim belongs to; `None` for supporting checks.
    pub criterion: Option<u8>,
    pub claim: String,
    pub predicted: Value,
    pub measured: Value,
    pub stderr: Option<f64>,
    pub pass: bool,
    pub detail: String,
}

impl Claim {
    fn new(id: impl Into<String>, criterion: Option<u8>, claim: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            criterion,
            claim: claim.into(),
            predicted: Value::Null,
            measured: Value::Null,
            stderr: None,
            pass: false,
            detail: String::new(),
        }
    }

    fn values(mut self, predicted: Value, measured: Value) -> Self {
        self.predicted = predicted;
        self.measured = measured;
        self
    }

    fn stderr(mut self, s: f64) -> Self {
        self.stderr = Some(s);
        self
    }

    fn pass(mut self, p: bool) -> Self {
        self.pass = p;
        self
    }

    fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }
}

fn cjson(z: C64) -> Value {
    json!([z.re, z.im])
}

// ---------------------------------------------------------------------------
// exact layer

pub fn criterion_1() -> Vec<Claim> {
    let c3 = casimir_saff();
    let c2 = casimir_sl2();
    let sym = symmetrize_element(&c3);
    let six = c3.scale(&GR::from_ints(6, 0));
    vec![
        Claim::new("c1.cubic_central", Some(1), "the cubic Casimir C′ is central in U(𝔤′)")
            .values(json!(true), json!(is_central(&c3)))
            .pass(is_central(&c3))
            .detail(format!("C′ = {c3}")),
        Claim::new("c1.sl2_not_central", Some(1), "the sl₂ Casimir C is not central in U(𝔤′)")
            .values(json!(false), json!(is_central(&c2)))
            .pass(!is_central(&c2))
            .detail(format!("C = {c2}")),
        Claim::new("c1.symmetrization", Some(1), "symmetrizing the leading term of C′ gives 6C′")
            .values(json!(six.to_string()), json!(sym.to_string()))
            .pass(sym == six),
    ]
}

pub fn criterion_2() -> Vec<Claim> {
    let rep = euclidean_rep(&casimir_saff().scale(&GR::from_ints(2, 0)));
    let mut nonzero = Vec::new();
    for a in 0..=4u32 {
        for b in 0..=(4 - a) {
            if !rep.apply_monomial(a, b).is_empty() {
                nonzero.push(format!("w1^{a} w2^{b}"));
            }
        }
    }
    let c8 = euclidean_rep(&casimir_sl2().scale(&GR::from_ints(8, 0)));
    let target = euclidean_foliated_target();
    vec![
        Claim::new("c2.cubic_annihilates", Some(2), "rep(2C′) annihilates w₁ᵃw₂ᵇ for a + b ≤ 4")
            .values(json!(0), json!(nonzero.len()))
            .pass(nonzero.is_empty() && rep.is_zero())
            .detail(format!("rep(2C′) = {rep}; nonzero images: {nonzero:?}")),
        Claim::new("c2.foliated_image", Some(2), "rep(8C) = E² + 2E with E the Euler operator")
            .values(json!(target.to_string()), json!(c8.to_string()))
            .pass(c8 == target),
    ]
}

// ---------------------------------------------------------------------------
// operators

fn plane_wave(n: f64, m: f64) -> ModularFunction {
    ModularFunction::new(0, move |p| e(n * p.x + m * p.v / p.y))
}

pub fn criterion_3() -> Result<Vec<Claim>> {
    let s = StencilSpec { richardson: true, ..Default::default() };
    let pt = JacobiPoint::new(0.13, 1.1, 0.37, 0.21);
    let mut out = Vec::new();
    for (n, m) in [(1, 1), (2, 1), (1, -3)] {
        let phi = plane_wave(n as f64, m as f64);
        let val = -apply_tot(&phi, 0, &pt, &s)? / phi.eval(&pt);
        let target = 4.0 * PI.powi(3) * (n * m * m) as f64;
        let rel = (val - target).norm() / target.abs();
        out.push(
            Claim::new(
                format!("c3.total_casimir.n{n}.m{m}"),
                Some(3),
                format!("−Δ^tot e(nx + mv/y) = 4π³nm² e(nx + mv/y) for (n, m) = ({n}, {m})"),
            )
            .values(json!(target), cjson(val))
            .pass(rel < 1e-5)
            .detail(format!("relative error {rel:.2e}")),
        );
    }
    Ok(out)
}

fn log_grid(start: f64, ratio: f64, len: usize) -> Vec<f64> {
    (0..len).map(|i| start * ratio.powi(i as i32)).collect()
}

pub fn criterion_9() -> Result<Vec<Claim>> {
    let t = 1.7;
    let grids = [log_grid(0.3, 1.06, 40), log_grid(0.5, 1.04, 60)];
    let mut out = Vec::new();
    for k in [-3, 0, 1, 2, 4] {
        let s = C64::new(0.5 * (1 - k) as f64, t);
        let g = move |y: f64| C64::new(y, 0.0).powc(s);
        let lam = fit_lambda(k, 0, &g, &grids[0]);
        let target = t * t + 0.25 + weight_shift(k);
        out.push(
            Claim::new(
                format!("c9.power.k{k}"),
                Some(9),
                format!("fit on y^((1−k)/2 + it), k = {k}, n = 0 returns t² + 1/4 + c_k"),
            )
            .values(json!(target), json!(lam))
            .pass((lam - target).abs() < 1e-6)
            .detail(format!("t = {t}, c_k = (k/2)(k/2 − 1) = {}", weight_shift(k))),
        );
    }
    let mut consistent = |id: String, what: String, k: i32, g: &dyn Fn(f64) -> C64, expect: f64| {
        let fits: Vec<f64> = grids.iter().map(|gr| fit_lambda(k, 1, &g, gr)).collect();
        let spread = (fits[0] - fits[1]).abs();
        out.push(
            Claim::new(id, Some(9), what)
                .values(json!(expect), json!(fits))
                .pass(spread < 1e-6 && (fits[0] - expect).abs() < 1e-5)
                .detail(format!("spread across grids {spread:.2e}")),
        );
    };
    for k in [2, 3, 4] {
        consistent(
            format!("c9.exponential.k{k}"),
            format!("fit on e^(−2πy), k = {k}, n = 1 is one constant across grids"),
            k,
            &|y| C64::new((-2.0 * PI * y).exp(), 0.0),
            0.0,
        );
        let norm = (4.0 * PI).powf(0.5 * k as f64);
        consistent(
            format!("c9.whittaker.k{k}"),
            format!("fit on the Whittaker profile, k = {k}, n = 1, t = {t} is one constant across grids"),
            k,
            &move |y| whittaker_profile(k, 1, t, y).unwrap_or(C64::new(f64::NAN, 0.0)) * norm,
            t * t + 0.25 + weight_shift(k),
        );
    }
    Ok(out)
}

/// Intertwining of the invariant operators with Siegel–Veech transforms.
pub fn sv_commutation(cfg: &RunConfig) -> Result<Vec<Claim>> {
    let s = StencilSpec { richardson: true, ..Default::default() };
    let pts = [JacobiPoint::new(0.13, 0.9, 0.21, 0.37), JacobiPoint::new(-0.4, 1.6, -0.3, 0.8)];
    let mut out = Vec::new();
    for k in [0, 1, 2] {
        for (m, pt) in [1u32, 2].iter().zip(&pts) {
            let r = sv_commutation_check(&KTypeFunction::bump(k, 1.3 * cfg.r_lattice).plane(), *m, pt, &s)?;
            out.push(
                Claim::new(
                    format!("sv.intertwining.k{k}.M{m}"),
                    None,
                    format!("Δ^fol SV f = SV((rep(2C) − c_k) f) and Δ^tot SV f = 0, k = {k}, M = {m}"),
                )
                .values(json!([0.0, 0.0]), json!([r.foliated, r.total]))
                .pass(r.foliated < 1e-4 && r.total < 1e-4),
            );
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// series and special functions

fn bump_beta(k: i32) -> Result<BetaProfile> {
    BetaProfile::compact(k, 0.6, 2.5, |y| {
        let t = (y - 0.6) / 1.9;
        C64::new((-1.0 / (t * (1.0 - t))).exp() * 40.0, 0.0)
    })
}

pub fn criterion_7(cfg: &RunConfig) -> Result<Vec<Claim>> {
    let q = cfg.quadrature()?;
    let span = 6.min(q.nodes as i32 / 2 - 1).min(q.v_nodes as i32 / 2 - 1);
    let mut out = Vec::new();
    for (k, n, m) in [(0, 0, 1), (1, 0, 2), (2, 0, 1), (0, 1, 1), (1, -1, 2), (2, 1, 1)] {
        let beta = bump_beta(k)?;
        let phi = AffineSeries::new(k, n, m, beta.clone(), cfg.r_coset)?.as_modular_function();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let mut worst: f64 = 0.0;
        for y in [0.7, 1.3, 2.0] {
            let t = H0Table::new(&phi, y, &q);
            let target = beta.eval(y) * FRAC_1_SQRT_2;
            for nn in -span..=span {
                for mm in -span..=span {
                    let expect = if nn == n && mm == m {
                        target
                    } else if nn == n && mm == -m {
                        target * sign
                    } else {
                        C64::new(0.0, 0.0)
                    };
                    worst = worst.max((t.get(nn, mm) - expect).norm());
                }
            }
        }
        let kind = if n == 0 { "Eisenstein" } else { "Poincaré" };
        out.push(
            Claim::new(
                format!("c7.coefficients.k{k}.n{n}.m{m}"),
                Some(7),
                format!("{kind} series (k, n, m) = ({k}, {n}, {m}): c^H0 = 2^(−1/2)β at (n, ±m), zero elsewhere"),
            )
            .values(json!(0.0), json!(worst))
            .pass(worst < 1e-8)
            .detail(format!(
                "largest deviation over |n|, |m| ≤ {span}, y ∈ {{0.7, 1.3, 2}}; the (n, −m) entry carries (−1)^k"
            )),
        );
    }
    for (stream, (k, n, m)) in [(0, 0, 1), (2, 1, 1)].into_iter().enumerate() {
        let beta = bump_beta(k)?;
        let quad = beta.haar_norm_sq(0.6, 2.5, 32);
        let phi = AffineSeries::new(k, n, m, beta, cfg.r_coset)?.as_modular_function();
        let est = inner_product(&phi, &phi, &cfg.mc(100 + stream as u64))?;
        let dev = (est.re - quad).abs() / est.stderr;
        out.push(
            Claim::new(
                format!("c7.norm.k{k}.n{n}.m{m}"),
                Some(7),
                format!("‖series‖² = ‖y^((k−1)/2)β‖² for (k, n, m) = ({k}, {n}, {m})"),
            )
            .values(json!(quad), json!(est.re))
            .stderr(est.stderr)
            .pass(dev < 3.0)
            .detail(format!("{dev:.2}σ")),
        );
    }
    Ok(out)
}

pub fn criterion_8() -> Result<Vec<Claim>> {
    let mut worst: f64 = 0.0;
    for kappa in [-1.0, 0.0, 0.5, 1.0, 2.0] {
        for t in [0.3, 1.0, 3.0] {
            for y in [0.05, 0.7, 1.9, 2.1, 6.0, 20.0, 45.0, 80.0] {
                worst = worst.max(whittaker_ode_residual(WhittakerParams::new(kappa, C64::new(0.0, t)), y)?);
            }
        }
    }
    let mut out = vec![Claim::new("c8.ode", Some(8), "W_{κ,it} solves Whittaker's equation")
        .values(json!(0.0), json!(worst))
        .pass(worst < 1e-6)
        .detail("relative residual, κ ∈ {−1, 0, ½, 1, 2}, t ∈ {0.3, 1, 3}, y ∈ [0.05, 80]")];
    for k in 0..=3 {
        let order = asymptotic_error_order(k, 1.0)?;
        let bound = 0.5 * (3 - k) as f64;
        out.push(
            Claim::new(format!("c8.small_y.k{k}"), Some(8), format!("small-y remainder is O(y^((3−k)/2)), k = {k}"))
                .values(json!(bound), json!(order))
                .pass(order > bound - 0.1)
                .detail(if k == 0 {
                    "the linear correction cancels at κ = 0, so the remainder is one order smaller"
                } else {
                    ""
                }),
        );
    }
    for k in 0..=3 {
        let (inv, iso) = hankel_involution_check(k, &RadialProfile::bump(k, 2.0), 150.0)?;
        out.push(
            Claim::new(format!("c8.hankel.k{k}"), Some(8), format!("ℋ_k is an isometric involution, k = {k}"))
                .values(json!([0.0, 0.0]), json!([inv, iso]))
                .pass(inv < 1e-5 && iso < 1e-5)
                .detail("relative L²(r dr) errors of ℋℋf = f and ‖ℋf‖ = ‖f‖"),
        );
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Siegel–Veech transforms

pub fn criterion_4(cfg: &RunConfig) -> Vec<Claim> {
    let f = KTypeFunction::bump(0, cfg.r_lattice).plane();
    cfg.sv_m
        .iter()
        .map(|&m| {
            let rep = sv_mean_mc(&f, m, &cfg.mc(200 + m as u64));
            let dev = rep.deviation_sigmas();
            let rel = rep.estimate.stderr / rep.predicted.norm();
            Claim::new(format!("c4.mean.M{m}"), Some(4), format!("∫ SV_rel,M f dμ = M²∫f, M = {m}"))
                .values(json!(rep.predicted.re), json!(rep.estimate.re))
                .stderr(rep.estimate.stderr)
                .pass(dev < 3.0 && rel < 0.01)
                .detail(format!("{dev:.2}σ, σ/mean = {rel:.1e}, cusp tail {:.3e} added in closed form", rep.tail.re))
        })
        .collect()
}

pub fn criterion_5(cfg: &RunConfig) -> Vec<Claim> {
    let f = KTypeFunction::bump(0, cfg.r_lattice).plane();
    let odd = KTypeFunction::bump(1, cfg.r_lattice).plane();
    let mut out = Vec::new();
    for &m in &cfg.sv_m {
        let rep = sv_second_moment_mc(&f, m, &cfg.mc(300 + m as u64));
        let dev = rep.deviation_sigmas();
        out.push(
            Claim::new(
                format!("c5.second_moment.M{m}"),
                Some(5),
                format!("∫ |SV_rel,M f|² dμ = M⁴(∫f)² + M²∫f², M = {m}"),
            )
            .values(json!(rep.predicted.re), json!(rep.estimate.re))
            .stderr(rep.estimate.stderr)
            .pass(dev < 3.0)
            .detail(format!("{dev:.2}σ, cusp tail {:.3e} from the one-line asymptotic", rep.tail.re)),
        );
        let rep = sv_second_moment_mc(&odd, m, &cfg.mc(400 + m as u64));
        let ratio = rep.estimate.re.max(0.0).sqrt() / (m as f64 * odd.norm_sq().sqrt());
        out.push(
            Claim::new(format!("c5.isometry.M{m}"), Some(5), format!("‖SV_rel,M f‖ = M‖f‖ for mean-zero f, M = {m}"))
                .values(json!(1.0), json!(ratio))
                .stderr(0.5 * rep.estimate.stderr / rep.estimate.re.abs())
                .pass((ratio - 1.0).abs() < 0.01)
                .detail("f of K-type 1, so ∫f = 0"),
        );
    }
    out
}

fn duality_pair(r: f64) -> (PlaneFunction, PlaneFunction) {
    let f = PlaneFunction::new(0, r, move |v| {
        let (a, b) = (v[0] / r, v[1] / r);
        let (x, y) = (a - 0.2, b - 0.1);
        C64::new((-(x * x + y * y) * 6.0).exp() * (1.0 - a * a - b * b).max(0.0).powi(3), 0.0)
    });
    let g = PlaneFunction::new(0, r, move |v| {
        let (a, b) = (v[0] / r, v[1] / r);
        C64::new(b * (1.0 + a) * (1.0 - a * a - b * b).max(0.0).powi(3), 0.0)
    });
    (f, g)
}

pub fn criterion_11(cfg: &RunConfig) -> Vec<Claim> {
    let (f, g) = duality_pair(cfg.r_lattice);
    let h = height_damped_transform(&g, 1.0);
    let rep = adjoint_duality(&f, &h, &cfg.mc(500));
    vec![Claim::new("c11.adjoint", Some(11), "⟨SV_rel f, h⟩ = ⟨f, SV* h⟩ for a smooth pair")
        .values(cjson(rep.lhs.value()), cjson(rep.rhs.value()))
        .stderr(rep.combined_stderr)
        .pass(rep.difference < 3.0 * rep.combined_stderr)
        .detail(format!(
            "|difference| = {:.3e} = {:.2}σ; h = e^(−ht)·SV_rel,1(g)",
            rep.difference,
            rep.difference / rep.combined_stderr
        ))]
}

// ---------------------------------------------------------------------------
// Fourier coefficients

pub fn criterion_6(cfg: &RunConfig) -> Result<Vec<Claim>> {
    let q = cfg.quadrature()?;
    let n_max = 3.min(q.nodes as i32 / 2 - 1);
    let m_max = 6.min(q.v_nodes as i32 / 2 - 1);
    let grid = log_grid(2.0, 8f64.powf(1.0 / 15.0), 16);
    let mut out = Vec::new();
    for (k, mrel, m) in [(0, 1u32, 1), (2, 2, 1), (1, 1, 2)] {
        let f = KTypeFunction::gaussian(k, 0.5);
        let rep = sv_coeffs_check(&f, mrel, &grid, n_max, m_max, &q)?;
        let mt = m * mrel as i32;
        let row = rep.rows.iter().find(|r| r.n == 0 && r.m == mt && r.y == grid[0]).expect("row present");
        let ratio = row.stated.expect("nonzero index") / row.measured;
        let factor = C64::new(0.0, -1.0).powi(k).inv() * (row.y.powf(1.0 + 0.5 * k as f64) / (2.0 * PI));
        let tag = format!("k{k}.M{mrel}.m{m}");
        out.push(
            Claim::new(format!("c6.stated.{tag}"), Some(6), format!("c^H0(SV_rel,M f; 0, mM; y) = (mM)²(T_M ℋ_k f₀)(y/m²), (k, M, m) = ({k}, {mrel}, {m})"))
                .values(json!(0.0), json!(rep.stated_rel))
                .pass(rep.stated_rel < 1e-6)
                .detail(format!(
                    "largest relative error over the 16-point grid y ∈ [2, 16]; stated/measured at y = {} is ({:.6}, {:.6}) against y^(1+k/2)/(2π(−i)^k) = ({:.6}, {:.6}); the corrected formula (−i sgn m̃)^k 2πM² y^(−k/2) ℋ_k f₀(2π|m̃|/√y) matches to {:.1e}",
                    row.y, ratio.re, ratio.im, factor.re, factor.im, rep.direct_rel
                )),
        );
        out.push(
            Claim::new(
                format!("c6.vanishing.{tag}"),
                Some(6),
                format!("coefficients with n ≠ 0 or m̃ ∉ MZ vanish, (k, M) = ({k}, {mrel})"),
            )
            .values(json!(0.0), json!(rep.zero_abs))
            .pass(rep.zero_abs < 1e-8)
            .detail(format!("|n| ≤ {n_max}, |m̃| ≤ {m_max}")),
        );
        out.push(
            Claim::new(
                format!("sv.coefficients.corrected.{tag}"),
                None,
                format!(
                    "c^H0(SV_rel,M f; 0, m̃; y) = (−i sgn m̃)^k 2πM² y^(−k/2) ℋ_k f₀(2π|m̃|/√y), (k, M) = ({k}, {mrel})"
                ),
            )
            .values(json!(0.0), json!(rep.direct_rel))
            .pass(rep.direct_rel < 1e-6)
            .detail("largest relative error; the m̃ = 0 entry is M² y^(−k/2) ∫f"),
        );
    }
    let beta = BetaProfile::compact(0, 0.8, 3.0, |y| C64::new((-1.0 / ((y - 0.8) * (3.0 - y))).exp(), 0.0))?;
    let p = AffineSeries::new(0, 1, 1, beta, cfg.r_coset)?.as_modular_function();
    let f = KTypeFunction::gaussian(0, 0.5).plane();
    let cut = CoeffCutoff { n_max: 3.min(n_max), m_max: 3.min(m_max), y_min: 0.3, y_max: 8.0, y_panels: 2 };
    let mut mc = cfg.mc(600);
    mc.samples = mc.samples.min(50_000).max(2 * mc.batches);
    let rep = orthogonality_to_cusp(&f, 1, &p, &cut, &q, &mc)?;
    out.push(
        Claim::new("sv.orthogonal_to_poincare", None, "SV_rel,1 f is orthogonal to the Poincaré series P_{0;1,1,β}")
            .values(json!(0.0), cjson(rep.via_coeffs))
            .pass(rep.via_coeffs.norm() < 1e-10 && rep.via_mc.value().norm() < 4.0 * rep.via_mc.stderr)
            .detail(format!(
                "Monte Carlo ({} samples): ({:.2e}, {:.2e}) ± {:.1e}",
                mc.samples, rep.via_mc.re, rep.via_mc.im, rep.via_mc.stderr
            )),
    );
    Ok(out)
}

// ---------------------------------------------------------------------------
// per-mode spectrum

pub fn criterion_10(cfg: &RunConfig) -> Result<(Vec<Claim>, Vec<SweepRow>)> {
    let (k, n, m) = (cfg.spectrum_k, cfg.spectrum_n, cfg.spectrum_m);
    let grid = cfg.grid();
    let rows = epsilon_sweep(k, n, m, &cfg.spectrum_eps, &grid, cfg.spectrum_count)?;
    let tag = format!("k{k}.n{n}.m{m}");
    let worst = rows.iter().map(|r| r.refinement_delta).fold(0.0, f64::max);
    let mut out = vec![Claim::new(
        format!("c10.refinement.{tag}"),
        Some(10),
        "eigenvalues are stable under grid refinement N → 2N",
    )
    .values(json!(0.005), json!(worst))
    .pass(worst < 0.005)
    .detail(format!("largest relative change, N = {}", grid.n))];
    let mut eps = cfg.spectrum_eps.clone();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    let at = |e: f64, j: usize| rows.iter().find(|r| r.eps == e && r.j == j).map(|r| r.lambda).unwrap_or(f64::NAN);
    let increasing = (0..cfg.spectrum_count).all(|j| eps.windows(2).all(|w| at(w[0], j) < at(w[1], j)));
    out.push(
        Claim::new(format!("c10.monotone.{tag}"), Some(10), "each eigenvalue increases strictly with ε")
            .values(json!(true), json!(increasing))
            .pass(increasing)
            .detail(format!("ε ∈ {eps:?}, first {} eigenvalues", cfg.spectrum_count)),
    );
    let counts: Result<Vec<usize>> =
        eps.iter().map(|&e| Ok(build_mode_operator(k, n, m, e, &grid)?.count_below(cfg.spectrum_window))).collect();
    let counts = counts?;
    let growing = counts.windows(2).all(|w| w[0] > w[1]);
    out.push(
        Claim::new(
            format!("c10.accumulation.{tag}"),
            Some(10),
            format!("the number of eigenvalues below {} grows as ε decreases", cfg.spectrum_window),
        )
        .values(json!(true), json!(counts))
        .pass(growing)
        .detail(format!("counts for ε ∈ {eps:?}")),
    );
    Ok((out, rows))
}

// ---------------------------------------------------------------------------
// reports

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub suite: Suite,
    pub config: RunConfig,
    pub claims: Vec<Claim>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub spectrum: Vec<SweepRow>,
    pub pass: bool,
}

impl Report {
    pub fn failing(&self) -> Vec<&Claim> {
        self.claims.iter().filter(|c| !c.pass).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// The eigenvalue table for the spectrum suite, the claim table otherwise.
    pub fn to_csv(&self) -> String {
        if self.suite == Suite::Spectrum {
            return sweep_csv(&self.spectrum);
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["id", "criterion", "claim", "predicted", "measured", "stderr", "pass"])
            .expect("in-memory write");
        for c in &self.claims {
            w.write_record([
                c.id.clone(),
                c.criterion.map(|n| n.to_string()).unwrap_or_default(),
                c.claim.clone(),
                c.predicted.to_string(),
                c.measured.to_string(),
                c.stderr.map(|s| s.to_string()).unwrap_or_default(),
                c.pass.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }
}

/// Claims of one acceptance criterion (1–11).
pub fn criterion(n: u8, cfg: &RunConfig) -> Result<Vec<Claim>> {
    Ok(match n {
        1 => criterion_1(),
        2 => criterion_2(),
        3 => criterion_3()?,
        4 => criterion_4(cfg),
        5 => criterion_5(cfg),
        6 => criterion_6(cfg)?,
        7 => criterion_7(cfg)?,
        8 => criterion_8()?,
        9 => criterion_9()?,
        10 => criterion_10(cfg)?.0,
        11 => criterion_11(cfg),
        _ => return Err(bad(format!("no criterion {n}"))),
    })
}

pub fn run_suite(suite: Suite, cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let mut claims = Vec::new();
    let mut spectrum = Vec::new();
    let suites: Vec<Suite> = if suite == Suite::All { Suite::EACH.to_vec() } else { vec![suite] };
    for s in suites {
        match s {
            Suite::Spectrum => {
                let (c, rows) = criterion_10(cfg)?;
                claims.extend(c);
                spectrum = rows;
            }
            Suite::All => unreachable!(),
            _ => {
                for &n in s.criteria() {
                    claims.extend(criterion(n, cfg)?);
                }
                if s == Suite::Operators {
                    claims.extend(sv_commutation(cfg)?);
                }
            }
        }
    }
    let pass = claims.iter().all(|c| c.pass);
    Ok(Report { schema: SCHEMA, suite, config: cfg.clone(), claims, spectrum, pass })
}

/// Caps the global thread pool at `STRATA_THREADS` when set.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("STRATA_THREADS") else { return Ok(()) };
    let n: usize = parse("STRATA_THREADS", &v)?;
    if n == 0 {
        return Err(bad("STRATA_THREADS must be ≥ 1".into()));
    }
    // a second initialisation in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

// ---------------------------------------------------------------------------
// command line

#[derive(Parser, Debug)]
#[command(name = "strata", version, about = "Verification runs on the stratum H(0,0)")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte-Carlo sample count.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Levels M for the Siegel–Veech suite, comma separated.
    #[arg(long = "M", global = true, value_delimiter = ',')]
    levels: Option<Vec<u32>>,
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Report path; standard output when absent.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set quad_nodes=64`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one verification suite.
    Verify {
        #[arg(value_parser = ["algebra", "operators", "series", "sv", "fourier"])]
        suite: String,
    },
    /// Siegel–Veech suite (same as `verify sv`).
    SvVerify,
    /// Per-mode eigenvalue table over a list of ε.
    Spectrum {
        #[arg(long, allow_hyphen_values = true)]
        k: Option<i32>,
        #[arg(long, allow_hyphen_values = true)]
        n: Option<i32>,
        #[arg(long, allow_hyphen_values = true)]
        m: Option<i32>,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        /// Eigenvalues per ε.
        #[arg(long)]
        count: Option<usize>,
        /// Grid intervals.
        #[arg(long)]
        grid_n: Option<usize>,
    },
    /// Every suite.
    All,
    /// Print the effective configuration as `key = value` text.
    Config,
}

fn build_config(cli: &Cli) -> Result<(RunConfig, bool)> {
    let mut cfg = match &cli.common.config {
        Some(p) => RunConfig::from_kv(&std::fs::read_to_string(p).map_err(|e| bad(format!("{}: {e}", p.display())))?)?,
        None => RunConfig::default(),
    };
    let c = &cli.common;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(s) = c.samples {
        cfg.samples = s;
    }
    if let Some(l) = &c.levels {
        cfg.sv_m = l.clone();
    }
    if let Some(f) = c.format {
        cfg.format = f;
    }
    if let Some(o) = &c.output {
        cfg.output = Some(o.clone());
    }
    for kv in &c.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("`--set {kv}`: expected KEY=VALUE")))?;
        cfg.set(k.trim(), v)?;
    }
    let mut print_config = false;
    match &cli.command {
        Command::Verify { suite } => cfg.suite = suite.parse()?,
        Command::SvVerify => cfg.suite = Suite::Sv,
        Command::All => cfg.suite = Suite::All,
        Command::Config => print_config = true,
        Command::Spectrum { k, n, m, eps, count, grid_n } => {
            cfg.suite = Suite::Spectrum;
            if let Some(k) = k {
                cfg.spectrum_k = *k;
            }
            if let Some(n) = n {
                cfg.spectrum_n = *n;
            }
            if let Some(m) = m {
                cfg.spectrum_m = *m;
            }
            if let Some(e) = eps {
                cfg.spectrum_eps = e.clone();
            }
            if let Some(c) = count {
                cfg.spectrum_count = *c;
            }
            if let Some(g) = grid_n {
                cfg.grid_n = *g;
            }
            // the eigenvalue table is CSV unless asked otherwise
            if c.format.is_none() {
                cfg.format = Format::Csv;
            }
        }
    }
    Ok((cfg, print_config))
}

/// Parses `argv`, runs the selected suite and writes the report. Returns 0
/// when every claim passes, 1 when some fail, 2 on usage or setup errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = init_threads().and_then(|_| build_config(&cli));
    let (cfg, print_config) = match result {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    if print_config {
        print!("{}", cfg.to_kv());
        return 0;
    }
    let report = match run_suite(cfg.suite, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let text = report.render(cfg.format);
    match &cfg.output {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &text) {
                eprintln!("error: {}: {e}", p.display());
                return 2;
            }
        }
        None => print!("{text}"),
    }
    let failing = report.failing();
    if failing.is_empty() {
        return 0;
    }
    eprintln!("{} failing claim(s):", failing.len());
    for c in failing {
        eprintln!("  {}: {}", c.id, c.claim);
    }
    1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_kv(&c.to_kv()).unwrap(), c);
        let mut d = c.clone();
        d.seed = 123;
        d.r_lattice = 0.1 + 0.2;
        d.spectrum_eps = vec![1.0, 1e-3, 0.3];
        d.grid_kind = GridKind::Graded;
        d.output = Some("out/report.json".into());
        d.format = Format::Csv;
        d.suite = Suite::Spectrum;
        assert_eq!(RunConfig::from_kv(&d.to_kv()).unwrap(), d);
        let js = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&js).unwrap(), d);
    }

    #[test]
    fn config_parsing_errors() {
        assert!(RunConfig::from_kv("seed = 3 # comment\n\n").unwrap().seed == 3);
        assert!(RunConfig::from_kv("bogus = 1").is_err());
        assert!(RunConfig::from_kv("seed 3").is_err());
        assert!(RunConfig::from_kv("samples = -4").is_err());
        assert!(RunConfig::from_kv("grid_kind = cubic").is_err());
        let mut c = RunConfig::default();
        c.batches = 1;
        assert!(c.validate().is_err());
        c = RunConfig { sv_m: vec![0], ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn streams_are_distinct_and_stable() {
        let a: Vec<u64> = (0..8).map(|s| stream_seed(7, s)).collect();
        let mut b = a.clone();
        b.sort();
        b.dedup();
        assert_eq!(b.len(), 8);
        assert_eq!(a, (0..8).map(|s| stream_seed(7, s)).collect::<Vec<_>>());
        assert_ne!(stream_seed(7, 0), stream_seed(8, 0));
    }

    #[test]
    fn exact_suite_passes() {
        let r = run_suite(Suite::Algebra, &RunConfig::default()).unwrap();
        assert!(r.pass, "{:?}", r.failing());
        assert_eq!(r.claims.len(), 5);
        assert!(r.claims.iter().all(|c| matches!(c.criterion, Some(1 | 2))));
        let js: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(js["schema"], "report_v1");
        assert_eq!(r.to_csv().lines().count(), 6);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["strata", "verify", "algebra", "--bogus"]), 2);
        assert_eq!(run(["strata", "verify", "nothing"]), 2);
        assert_eq!(run(["strata", "verify", "algebra", "--set", "nokey=1"]), 2);
    }
}
