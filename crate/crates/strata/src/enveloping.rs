//! Exact computations in the universal enveloping algebra of the complexified
//! Lie algebra of `SAff₂(ℝ)`, in the basis `Z, X₊, X₋, Y₊, Y₋`:
//!
//! `Z = −i(F − G)`, `X± = ½(H ± i(F + G))`, `Y± = ½(P ± iQ)`,
//!
//! where `H, F, G` span `sl₂` and `P, Q` are the translations. Brackets are
//! computed from exact 3×3 matrices `[[A, 0], [p, 0]]`, so nothing here is
//! hand-transcribed.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GaussianRational {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussianRational {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Self { re, im }
    }

    pub fn from_ints(re: i64, im: i64) -> Self {
        Self::new(BigRational::from_integer(re.into()), BigRational::from_integer(im.into()))
    }

    /// `(re_num/den) + i (im_num/den)`.
    pub fn frac(re_num: i64, im_num: i64, den: i64) -> Self {
        let d = BigInt::from(den);
        Self::new(BigRational::new(re_num.into(), d.clone()), BigRational::new(im_num.into(), d))
    }

    pub fn i() -> Self {
        Self::from_ints(0, 1)
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), -self.im.clone())
    }

    pub fn to_c64(&self) -> crate::C64 {
        use num_traits::ToPrimitive;
        crate::C64::new(self.re.to_f64().unwrap_or(f64::NAN), self.im.to_f64().unwrap_or(f64::NAN))
    }
}

impl Zero for GaussianRational {
    fn zero() -> Self {
        Self::from_ints(0, 0)
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

impl One for GaussianRational {
    fn one() -> Self {
        Self::from_ints(1, 0)
    }
}

impl Add for GaussianRational {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.im + o.im)
    }
}

impl<'a> Add<&'a GaussianRational> for &'a GaussianRational {
    type Output = GaussianRational;
    fn add(self, o: Self) -> GaussianRational {
        GaussianRational::new(&self.re + &o.re, &self.im + &o.im)
    }
}

impl Sub for GaussianRational {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.im - o.im)
    }
}

impl Neg for GaussianRational {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.im)
    }
}

impl Mul for GaussianRational {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        &self * &o
    }
}

impl<'a> Mul<&'a GaussianRational> for &'a GaussianRational {
    type Output = GaussianRational;
    fn mul(self, o: Self) -> GaussianRational {
        GaussianRational::new(&self.re * &o.re - &self.im * &o.im, &self.re * &o.im + &self.im * &o.re)
    }
}

fn fmt_rat(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re.is_zero(), self.im.is_zero()) {
            (_, true) => write!(f, "{}", fmt_rat(&self.re)),
            (true, false) => write!(f, "{}i", fmt_rat(&self.im)),
            (false, false) => {
                let sign = if self.im.is_negative() { "-" } else { "+" };
                write!(f, "({} {} {}i)", fmt_rat(&self.re), sign, fmt_rat(&self.im.abs()))
            }
        }
    }
}

type GR = GaussianRational;

/// Basis of the complexified Lie algebra, in PBW order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LieGenerator {
    Z = 0,
    Xp = 1,
    Xm = 2,
    Yp = 3,
    Ym = 4,
}

impl LieGenerator {
    pub const ALL: [LieGenerator; 5] = [Self::Z, Self::Xp, Self::Xm, Self::Yp, Self::Ym];

    pub fn name(self) -> &'static str {
        match self {
            Self::Z => "Z",
            Self::Xp => "X+",
            Self::Xm => "X-",
            Self::Yp => "Y+",
            Self::Ym => "Y-",
        }
    }

    fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }
}

/// 3×3 matrix over the Gaussian rationals.
type Mat3 = [[GR; 3]; 3];

fn mat_zero() -> Mat3 {
    std::array::from_fn(|_| std::array::from_fn(|_| GR::zero()))
}

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = mat_zero();
    for i in 0..3 {
        for j in 0..3 {
            let mut s = GR::zero();
            for k in 0..3 {
                s = s + &a[i][k] * &b[k][j];
            }
            c[i][j] = s;
        }
    }
    c
}

fn mat_sub(a: &Mat3, b: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j].clone() - b[i][j].clone()))
}

/// Matrix `[[h, f, 0], [g, −h, 0], [p, q, 0]]`.
fn algebra_matrix(h: GR, f: GR, g: GR, p: GR, q: GR) -> Mat3 {
    let mut m = mat_zero();
    m[0][0] = h.clone();
    m[0][1] = f;
    m[1][0] = g;
    m[1][1] = -h;
    m[2][0] = p;
    m[2][1] = q;
    m
}

/// Exact matrix of a basis generator.
pub fn generator_matrix(x: LieGenerator) -> Mat3 {
    let z = GR::zero;
    let half = GR::frac(1, 0, 2);
    let ihalf = GR::frac(0, 1, 2);
    match x {
        // −i(F − G)
        LieGenerator::Z => algebra_matrix(z(), GR::from_ints(0, -1), GR::from_ints(0, 1), z(), z()),
        LieGenerator::Xp => algebra_matrix(half, ihalf.clone(), ihalf, z(), z()),
        LieGenerator::Xm => algebra_matrix(half, -ihalf.clone(), -ihalf, z(), z()),
        LieGenerator::Yp => algebra_matrix(z(), z(), z(), half, ihalf),
        LieGenerator::Ym => algebra_matrix(z(), z(), z(), half, -ihalf),
    }
}

/// Coordinates of an algebra matrix in the basis `Z, X₊, X₋, Y₊, Y₋`.
fn decompose(m: &Mat3) -> [GR; 5] {
    let (h, f, g) = (m[0][0].clone(), m[0][1].clone(), m[1][0].clone());
    let (p, q) = (m[2][0].clone(), m[2][1].clone());
    let i = GR::i();
    let ihalf = GR::frac(0, 1, 2);
    [
        &ihalf * &(f.clone() - g.clone()),
        h.clone() - &ihalf * &(f.clone() + g.clone()),
        h + &ihalf * &(f + g),
        p.clone() - &i * &q,
        p + &i * &q,
    ]
}

/// Exponents of `Z^a X₊^b X₋^c Y₊^d Y₋^e`.
pub type Monomial = [u32; 5];

/// Element of the enveloping algebra in PBW normal form.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PBWElement {
    terms: BTreeMap<Monomial, GR>,
}

impl PBWElement {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn scalar(c: GR) -> Self {
        let mut e = Self::zero();
        e.add_term([0; 5], c);
        e
    }

    pub fn one() -> Self {
        Self::scalar(GR::one())
    }

    pub fn generator(x: LieGenerator) -> Self {
        let mut m = [0; 5];
        m[x as usize] = 1;
        Self::monomial(m, GR::one())
    }

    pub fn monomial(m: Monomial, c: GR) -> Self {
        let mut e = Self::zero();
        e.add_term(m, c);
        e
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, GR> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.iter().sum()).max().unwrap_or(0)
    }

    fn add_term(&mut self, m: Monomial, c: GR) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(m).or_insert_with(GR::zero);
        *slot = &*slot + &c;
        if slot.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn scale(&self, c: &GR) -> Self {
        let mut out = Self::zero();
        for (m, v) in &self.terms {
            out.add_term(*m, v * c);
        }
        out
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (m, v) in &o.terms {
            out.add_term(*m, v.clone());
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&GR::from_ints(-1, 0)))
    }

    /// Product in the enveloping algebra, returned in normal form.
    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let mut acc = o.clone();
            for x in monomial_word(m).into_iter().rev() {
                acc = left_mul_element(x, &acc);
            }
            out = out.add(&acc.scale(c));
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Self::one(), |acc, _| acc.mul(self))
    }

    /// Commutator `[self, o]`.
    pub fn commutator(&self, o: &Self) -> Self {
        self.mul(o).sub(&o.mul(self))
    }
}

impl fmt::Display for PBWElement {
    /// Monomials in increasing PBW order, e.g. `1/2 X+X- + 1/8 Z^2 - 1/4 Z`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        // highest degree first, then PBW order
        let mut keys: Vec<&Monomial> = self.terms.keys().collect();
        keys.sort_by_key(|m| std::cmp::Reverse(m.iter().sum::<u32>()));
        for m in keys {
            let c = &self.terms[m];
            let mono: String = LieGenerator::ALL
                .iter()
                .filter(|x| m[**x as usize] > 0)
                .map(|x| match m[*x as usize] {
                    1 => x.name().to_string(),
                    e => format!("{}^{}", x.name(), e),
                })
                .collect();
            let (neg, mag) = if c.im.is_zero() && c.re.is_negative() { (true, -c.clone()) } else { (false, c.clone()) };
            if !first {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            } else if neg {
                write!(f, "-")?;
            }
            first = false;
            if mono.is_empty() {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "{mono}")?;
            } else {
                write!(f, "{mag} {mono}")?;
            }
        }
        Ok(())
    }
}

fn monomial_word(m: &Monomial) -> Vec<LieGenerator> {
    let mut w = Vec::new();
    for (i, &e) in m.iter().enumerate() {
        for _ in 0..e {
            w.push(LieGenerator::from_index(i));
        }
    }
    w
}

thread_local! {
    static BRACKETS: [[PBWElement; 5]; 5] = std::array::from_fn(|i| std::array::from_fn(|j| {
        bracket_from_matrices(LieGenerator::from_index(i), LieGenerator::from_index(j))
    }));
    static LEFT_MUL: RefCell<HashMap<(LieGenerator, Monomial), PBWElement>> = RefCell::new(HashMap::new());
}

fn bracket_from_matrices(a: LieGenerator, b: LieGenerator) -> PBWElement {
    let (ma, mb) = (generator_matrix(a), generator_matrix(b));
    let c = mat_sub(&mat_mul(&ma, &mb), &mat_mul(&mb, &ma));
    let coords = decompose(&c);
    let mut e = PBWElement::zero();
    for (i, v) in coords.into_iter().enumerate() {
        let mut m = [0; 5];
        m[i] = 1;
        e.add_term(m, v);
    }
    e
}

/// `[a, b]`, a linear combination of generators.
pub fn bracket(a: LieGenerator, b: LieGenerator) -> PBWElement {
    BRACKETS.with(|t| t[a as usize][b as usize].clone())
}

/// `x · m` in normal form, for an ordered monomial `m`.
fn left_mul_monomial(x: LieGenerator, m: &Monomial) -> PBWElement {
    let first = m.iter().position(|&e| e > 0);
    match first {
        Some(i) if (x as usize) > i => {}
        _ => {
            let mut m2 = *m;
            m2[x as usize] += 1;
            return PBWElement::monomial(m2, GR::one());
        }
    }
    if let Some(v) = LEFT_MUL.with(|c| c.borrow().get(&(x, *m)).cloned()) {
        return v;
    }
    let i = first.unwrap();
    let lead = LieGenerator::from_index(i);
    let mut rest = *m;
    rest[i] -= 1;
    // x·lead·rest = lead·(x·rest) + [x, lead]·rest
    let inner = left_mul_monomial(x, &rest);
    let mut out = left_mul_element(lead, &inner);
    let rest_e = PBWElement::monomial(rest, GR::one());
    for (gm, c) in bracket(x, lead).terms() {
        let g = LieGenerator::from_index(gm.iter().position(|&e| e > 0).unwrap());
        out = out.add(&left_mul_element(g, &rest_e).scale(c));
    }
    LEFT_MUL.with(|c| c.borrow_mut().insert((x, *m), out.clone()));
    out
}

fn left_mul_element(x: LieGenerator, e: &PBWElement) -> PBWElement {
    let mut out = PBWElement::zero();
    for (m, c) in e.terms() {
        out = out.add(&left_mul_monomial(x, m).scale(c));
    }
    out
}

/// Normal form of a word of generators.
pub fn pbw_normalize(word: &[LieGenerator]) -> PBWElement {
    let mut acc = PBWElement::one();
    for &x in word.iter().rev() {
        acc = left_mul_element(x, &acc);
    }
    acc
}

fn product(word: &[LieGenerator]) -> PBWElement {
    pbw_normalize(word)
}

/// `C = ¼X₊X₋ + ⅛Z² + ¼X₋X₊`.
pub fn casimir_sl2() -> PBWElement {
    use LieGenerator::*;
    product(&[Xp, Xm])
        .scale(&GR::frac(1, 0, 4))
        .add(&product(&[Z, Z]).scale(&GR::frac(1, 0, 8)))
        .add(&product(&[Xm, Xp]).scale(&GR::frac(1, 0, 4)))
}

/// `C = ½X₊X₋ + ⅛Z² − ¼Z`, the second printed form.
pub fn casimir_sl2_alt() -> PBWElement {
    use LieGenerator::*;
    product(&[Xp, Xm])
        .scale(&GR::frac(1, 0, 2))
        .add(&product(&[Z, Z]).scale(&GR::frac(1, 0, 8)))
        .sub(&product(&[Z]).scale(&GR::frac(1, 0, 4)))
}

/// `C′ = Z Y₊Y₋ − X₊Y₋² + X₋Y₊²`, the cubic generator of the center.
pub fn casimir_saff() -> PBWElement {
    use LieGenerator::*;
    product(&[Z, Yp, Ym]).sub(&product(&[Xp, Ym, Ym])).add(&product(&[Xm, Yp, Yp]))
}

pub fn is_central(e: &PBWElement) -> bool {
    LieGenerator::ALL.iter().all(|&x| PBWElement::generator(x).commutator(e).is_zero())
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Sum over all `n!` orderings of the letters of `m` (no `1/n!`).
pub fn symmetrize(m: &Monomial) -> PBWElement {
    let w = monomial_word(m);
    let mut out = PBWElement::zero();
    for p in permutations(w.len()) {
        let word: Vec<LieGenerator> = p.iter().map(|&i| w[i]).collect();
        out = out.add(&pbw_normalize(&word));
    }
    out
}

/// Linear extension of [`symmetrize`], applied to the stored monomials.
pub fn symmetrize_element(e: &PBWElement) -> PBWElement {
    let mut out = PBWElement::zero();
    for (m, c) in e.terms() {
        out = out.add(&symmetrize(m).scale(c));
    }
    out
}

/// Key `(a, b, c, d)` of the term `w₁^a w₂^b ∂₁^c ∂₂^d`.
pub type DiffKey = (u32, u32, u32, u32);

/// Differential operator on ℝ² with polynomial coefficients, derivatives on the right.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DiffOpPoly {
    terms: BTreeMap<DiffKey, GR>,
}

/// Polynomial in `w₁, w₂`.
pub type Poly2 = BTreeMap<(u32, u32), GR>;

fn falling(n: u32, k: u32) -> i64 {
    (0..k).map(|j| (n - j) as i64).product()
}

fn binom(n: u32, k: u32) -> i64 {
    falling(n, k) / falling(k, k)
}

impl DiffOpPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::term((0, 0, 0, 0), GR::one())
    }

    pub fn term(k: DiffKey, c: GR) -> Self {
        let mut d = Self::zero();
        d.add_term(k, c);
        d
    }

    pub fn terms(&self) -> &BTreeMap<DiffKey, GR> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, k: DiffKey, c: GR) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(k).or_insert_with(GR::zero);
        *slot = &*slot + &c;
        if slot.is_zero() {
            self.terms.remove(&k);
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in &o.terms {
            out.add_term(*k, c.clone());
        }
        out
    }

    pub fn scale(&self, c: &GR) -> Self {
        let mut out = Self::zero();
        for (k, v) in &self.terms {
            out.add_term(*k, v * c);
        }
        out
    }

    /// `self ∘ o`, by the Leibniz rule in each variable.
    pub fn compose(&self, o: &Self) -> Self {
        let mut out = Self::zero();
        for (&(a1, a2, c1, c2), u) in &self.terms {
            for (&(b1, b2, d1, d2), v) in &o.terms {
                let uv = u * v;
                for j1 in 0..=c1.min(b1) {
                    for j2 in 0..=c2.min(b2) {
                        let n = binom(c1, j1) * falling(b1, j1) * binom(c2, j2) * falling(b2, j2);
                        out.add_term(
                            (a1 + b1 - j1, a2 + b2 - j2, c1 - j1 + d1, c2 - j2 + d2),
                            &uv * &GR::from_ints(n, 0),
                        );
                    }
                }
            }
        }
        out
    }

    /// Apply to `w₁^a w₂^b`.
    pub fn apply_monomial(&self, a: u32, b: u32) -> Poly2 {
        let mut out: Poly2 = BTreeMap::new();
        for (&(p1, p2, c1, c2), u) in &self.terms {
            if c1 > a || c2 > b {
                continue;
            }
            let n = falling(a, c1) * falling(b, c2);
            let key = (a - c1 + p1, b - c2 + p2);
            let slot = out.entry(key).or_insert_with(GR::zero);
            *slot = &*slot + &(u * &GR::from_ints(n, 0));
            if slot.is_zero() {
                out.remove(&key);
            }
        }
        out
    }
}

impl fmt::Display for DiffOpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(&(a, b, c, d), v)| {
                let mut s = format!("{v}");
                for (sym, e) in [("w1", a), ("w2", b), ("d1", c), ("d2", d)] {
                    match e {
                        0 => {}
                        1 => s.push_str(&format!("·{sym}")),
                        _ => s.push_str(&format!("·{sym}^{e}")),
                    }
                }
                s
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Lie-derivative action on functions of `w ∈ ℝ²` under `w ↦ wA + p`:
/// `P → ∂₁`, `Q → ∂₂`, `F → w₁∂₂`, `G → w₂∂₁`, `H → w₁∂₁ − w₂∂₂`.
pub fn generator_rep(x: LieGenerator) -> DiffOpPoly {
    let t = |k: DiffKey| DiffOpPoly::term(k, GR::one());
    let h = t((1, 0, 1, 0)).add(&t((0, 1, 0, 1)).scale(&GR::from_ints(-1, 0)));
    let f = t((1, 0, 0, 1));
    let g = t((0, 1, 1, 0));
    let p = t((0, 0, 1, 0));
    let q = t((0, 0, 0, 1));
    let i = GR::i();
    let half = GR::frac(1, 0, 2);
    let ihalf = GR::frac(0, 1, 2);
    match x {
        LieGenerator::Z => f.add(&g.scale(&GR::from_ints(-1, 0))).scale(&-i),
        LieGenerator::Xp => h.scale(&half).add(&f.add(&g).scale(&ihalf)),
        LieGenerator::Xm => h.scale(&half).add(&f.add(&g).scale(&-ihalf)),
        LieGenerator::Yp => p.scale(&half).add(&q.scale(&ihalf)),
        LieGenerator::Ym => p.scale(&half).add(&q.scale(&-ihalf)),
    }
}

/// Extension of [`generator_rep`] to the enveloping algebra.
pub fn euclidean_rep(e: &PBWElement) -> DiffOpPoly {
    let mut out = DiffOpPoly::zero();
    for (m, c) in e.terms() {
        let mut op = DiffOpPoly::identity();
        for x in monomial_word(m) {
            op = op.compose(&generator_rep(x));
        }
        out = out.add(&op.scale(c));
    }
    out
}

/// Euler operator `w₁∂₁ + w₂∂₂`.
pub fn euler_operator() -> DiffOpPoly {
    DiffOpPoly::term((1, 0, 1, 0), GR::one()).add(&DiffOpPoly::term((0, 1, 0, 1), GR::one()))
}

/// `E² + 2E`, the image of `8C` under [`euclidean_rep`].
pub fn euclidean_foliated_target() -> DiffOpPoly {
    let e = euler_operator();
    e.compose(&e).add(&e.scale(&GR::from_ints(2, 0)))
}
