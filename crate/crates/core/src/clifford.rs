//! Exact ℂ⁴ Dirac-matrix algebra with even/odd grading.
//!
//! Generators are ordered (β, α₁, α₂, α₃); they satisfy the Euclidean
//! Clifford relations {γ_a, γ_b} = 2δ_ab, so a sign matrix is a unit
//! 4-vector contracted with the generators.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dressed_dirac::DressedDirac;
use crate::error::{BdfError, Result};

pub type Mat4 = Matrix4<Complex64>;

/// Tolerance below which a floating-point trace counts as zero.
pub const EXACT_ZERO: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grading {
    Even,
    Odd,
    Mixed,
}

impl Grading {
    /// Grading of a product.
    pub fn compose(self, other: Grading) -> Grading {
        match (self, other) {
            (Grading::Mixed, _) | (_, Grading::Mixed) => Grading::Mixed,
            (a, b) if a == b => Grading::Even,
            _ => Grading::Odd,
        }
    }

    /// Grading of a sum.
    pub fn join(self, other: Grading) -> Grading {
        if self == other {
            self
        } else {
            Grading::Mixed
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiracElement {
    pub entries: Mat4,
    pub grading: Grading,
}

impl DiracElement {
    pub fn new(entries: Mat4, grading: Grading) -> Self {
        Self { entries, grading }
    }

    pub fn identity() -> Self {
        Self::new(Mat4::identity(), Grading::Even)
    }

    pub fn zero(grading: Grading) -> Self {
        Self::new(Mat4::zeros(), grading)
    }

    /// Recompute the grading from the entries (see [`classify`]).
    pub fn classified(entries: Mat4) -> Self {
        let g = classify(&entries, 1e-12);
        Self::new(entries, g)
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.entries.adjoint(), self.grading)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::new(self.entries * c, self.grading)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Operator (spectral) norm.
    pub fn op_norm(&self) -> f64 {
        let h = self.entries.adjoint() * self.entries;
        let eig = nalgebra::SymmetricEigen::new(h);
        eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v)).max(0.0).sqrt()
    }
}

impl Mul for &DiracElement {
    type Output = DiracElement;
    fn mul(self, rhs: &DiracElement) -> DiracElement {
        DiracElement::new(self.entries * rhs.entries, self.grading.compose(rhs.grading))
    }
}

impl Mul for DiracElement {
    type Output = DiracElement;
    fn mul(self, rhs: DiracElement) -> DiracElement {
        &self * &rhs
    }
}

impl Add for &DiracElement {
    type Output = DiracElement;
    fn add(self, rhs: &DiracElement) -> DiracElement {
        DiracElement::new(self.entries + rhs.entries, self.grading.join(rhs.grading))
    }
}

impl Add for DiracElement {
    type Output = DiracElement;
    fn add(self, rhs: DiracElement) -> DiracElement {
        &self + &rhs
    }
}

impl Sub for &DiracElement {
    type Output = DiracElement;
    fn sub(self, rhs: &DiracElement) -> DiracElement {
        DiracElement::new(self.entries - rhs.entries, self.grading.join(rhs.grading))
    }
}

impl Sub for DiracElement {
    type Output = DiracElement;
    fn sub(self, rhs: DiracElement) -> DiracElement {
        &self - &rhs
    }
}

impl Neg for DiracElement {
    type Output = DiracElement;
    fn neg(self) -> DiracElement {
        DiracElement::new(-self.entries, self.grading)
    }
}

pub fn pauli() -> [Matrix2<Complex64>; 3] {
    [
        Matrix2::new(ZERO, ONE, ONE, ZERO),
        Matrix2::new(ZERO, -I, I, ZERO),
        Matrix2::new(ONE, ZERO, ZERO, -ONE),
    ]
}

#[derive(Debug, Clone)]
pub struct DiracBasis {
    pub alpha: [DiracElement; 3],
    pub beta: DiracElement,
}

impl DiracBasis {
    /// Generators in Euclidean order (β, α₁, α₂, α₃).
    pub fn generators(&self) -> [DiracElement; 4] {
        [
            self.beta.clone(),
            self.alpha[0].clone(),
            self.alpha[1].clone(),
            self.alpha[2].clone(),
        ]
    }
}

/// β = diag(I₂, −I₂) and α_j with the Pauli matrix σ_j in both off-diagonal blocks.
pub fn make_dirac_basis() -> DiracBasis {
    let s = pauli();
    let alpha = s.map(|sj| {
        let mut m = Mat4::zeros();
        m.fixed_view_mut::<2, 2>(0, 2).copy_from(&sj);
        m.fixed_view_mut::<2, 2>(2, 0).copy_from(&sj);
        DiracElement::new(m, Grading::Odd)
    });
    let beta = DiracElement::new(
        Mat4::from_diagonal(&nalgebra::Vector4::new(ONE, ONE, -ONE, -ONE)),
        Grading::Odd,
    );
    DiracBasis { alpha, beta }
}

thread_local! {
    static BASIS: DiracBasis = make_dirac_basis();
}

fn with_basis<T>(f: impl FnOnce(&DiracBasis) -> T) -> T {
    BASIS.with(f)
}

/// v₀β + v₁α₁ + v₂α₂ + v₃α₃.
pub fn slash(v: &[f64; 4]) -> DiracElement {
    with_basis(|b| {
        let m = b.beta.entries * Complex64::from(v[0])
            + b.alpha[0].entries * Complex64::from(v[1])
            + b.alpha[1].entries * Complex64::from(v[2])
            + b.alpha[2].entries * Complex64::from(v[3]);
        DiracElement::new(m, Grading::Odd)
    })
}

/// Γ = βα₁α₂α₃ anticommutes with every generator.
fn chirality() -> Mat4 {
    with_basis(|b| b.beta.entries * b.alpha[0].entries * b.alpha[1].entries * b.alpha[2].entries)
}

/// Even and odd parts of a 4×4 matrix: M± = (M ± ΓMΓ⁻¹)/2.
pub fn split_grades(m: &Mat4) -> (Mat4, Mat4) {
    let g = chirality();
    let conj = g * m * g.adjoint();
    ((m + conj) * Complex64::from(0.5), (m - conj) * Complex64::from(0.5))
}

/// Project onto the even and odd subalgebras and report which one `m` lies in.
pub fn classify(m: &Mat4, tol: f64) -> Grading {
    let (even, odd) = split_grades(m);
    let scale = m.norm().max(1.0);
    let e = even.norm() / scale;
    let o = odd.norm() / scale;
    if o <= tol {
        Grading::Even
    } else if e <= tol {
        Grading::Odd
    } else {
        Grading::Mixed
    }
}

/// s_p = (β g₀ + p̂·α g₁)/ℰ at momentum `p`.
pub fn sign_matrix(p: &[f64; 3], dressed: &DressedDirac) -> Result<DiracElement> {
    Ok(slash(&dressed.sign_vector(p)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FurryReport {
    pub trace: Complex64,
    pub grading: Grading,
}

impl FurryReport {
    /// Odd words must have vanishing trace.
    pub fn consistent(&self) -> bool {
        self.grading != Grading::Odd || self.trace.norm() < EXACT_ZERO
    }
}

/// Trace and composed grading of a product of pure-graded elements.
pub fn furry_trace_check(word: &[DiracElement]) -> Result<FurryReport> {
    if word.is_empty() {
        return Err(BdfError::InvalidInput("empty Dirac word".into()));
    }
    let mut acc = DiracElement::identity();
    for (index, w) in word.iter().enumerate() {
        if w.grading == Grading::Mixed {
            return Err(BdfError::GradingUndefined { index, grading: w.grading });
        }
        acc = &acc * w;
    }
    Ok(FurryReport { trace: acc.trace(), grading: acc.grading })
}

/// 4×4 matrix over the Gaussian integers, for exact trace checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactDirac(pub [[(i64, i64); 4]; 4]);

impl ExactDirac {
    pub fn identity() -> Self {
        let mut m = [[(0, 0); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = (1, 0);
        }
        Self(m)
    }

    /// Exact copy of a float matrix whose entries are Gaussian integers.
    pub fn from_float(m: &Mat4) -> Option<Self> {
        let mut out = [[(0, 0); 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                let z = m[(i, j)];
                let (re, im) = (z.re.round(), z.im.round());
                if (z.re - re).abs() > 0.0 || (z.im - im).abs() > 0.0 {
                    return None;
                }
                *e = (re as i64, im as i64);
            }
        }
        Some(Self(out))
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let mut out = [[(0i64, 0i64); 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                let mut re = 0;
                let mut im = 0;
                for k in 0..4 {
                    let (a, b) = self.0[i][k];
                    let (c, d) = rhs.0[k][j];
                    re += a * c - b * d;
                    im += a * d + b * c;
                }
                *e = (re, im);
            }
        }
        Self(out)
    }

    pub fn trace(&self) -> (i64, i64) {
        (0..4).fold((0, 0), |(r, i), k| (r + self.0[k][k].0, i + self.0[k][k].1))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FurrySweep {
    pub max_len: usize,
    pub words: usize,
    pub odd_words: usize,
    /// Largest |trace| over odd-length words.
    pub max_odd_trace: f64,
    pub violations: usize,
}

/// Check every word of generators of length 1..=max_len.
///
/// In exact mode traces are computed over the Gaussian integers and an odd
/// word violates only if its trace is not literally zero.
pub fn exhaustive_furry(max_len: usize, exact: bool) -> FurrySweep {
    let gens = make_dirac_basis().generators();
    let exact_gens: Vec<ExactDirac> = gens
        .iter()
        .map(|g| ExactDirac::from_float(&g.entries).expect("generators have integer entries"))
        .collect();
    let mut sweep = FurrySweep { max_len, words: 0, odd_words: 0, max_odd_trace: 0.0, violations: 0 };
    for len in 1..=max_len {
        let count = 4usize.pow(len as u32);
        for code in 0..count {
            let mut c = code;
            let idx: Vec<usize> = (0..len)
                .map(|_| {
                    let d = c % 4;
                    c /= 4;
                    d
                })
                .collect();
            sweep.words += 1;
            let odd = len % 2 == 1;
            let t = if exact {
                let m = idx
                    .iter()
                    .fold(ExactDirac::identity(), |acc, &i| acc.mul(&exact_gens[i]));
                let (re, im) = m.trace();
                ((re * re + im * im) as f64).sqrt()
            } else {
                let word: Vec<DiracElement> = idx.iter().map(|&i| gens[i].clone()).collect();
                furry_trace_check(&word).expect("generators are pure").trace.norm()
            };
            if odd {
                sweep.odd_words += 1;
                sweep.max_odd_trace = sweep.max_odd_trace.max(t);
                let bad = if exact { t != 0.0 } else { t >= EXACT_ZERO };
                if bad {
                    sweep.violations += 1;
                }
            }
        }
    }
    sweep
}

#[derive(Debug, Clone)]
pub struct CalculReport {
    /// Entrywise residual of each of the three identities.
    pub residuals: [f64; 3],
    pub max_residual: f64,
    /// Traces of the three combinations (left-hand sides).
    pub traces: [Complex64; 3],
    pub gradings: [Grading; 3],
}

/// Both sides of the three sign-pattern identities with scalar potential weights.
pub fn calcul_identity_check(
    s_p: &DiracElement,
    s_p1: &DiracElement,
    s_q: &DiracElement,
    v1: Complex64,
    v2: Complex64,
) -> CalculReport {
    let a = DiracElement::identity().scale(v1);
    let b = DiracElement::identity().scale(v2);
    calcul_identity_check_with(s_p, s_p1, s_q, &a, &b)
}

/// Same identities with even-graded matrix weights (exchange-type insertions).
pub fn calcul_identity_check_with(
    s_p: &DiracElement,
    s_p1: &DiracElement,
    s_q: &DiracElement,
    v1: &DiracElement,
    v2: &DiracElement,
) -> CalculReport {
    let id = DiracElement::identity();
    let plus = |s: &DiracElement| &id + s;
    let minus = |s: &DiracElement| &id - s;
    let chain = |x: DiracElement, y: DiracElement, z: DiracElement| {
        let m = &(&(&(&x * v1) * &y) * v2) * &z;
        m
    };
    let half = Complex64::from(0.5);
    let lhs = [
        (chain(plus(s_p), minus(s_p1), minus(s_q)) - chain(minus(s_p), plus(s_p1), plus(s_q)))
            .scale(half),
        (chain(plus(s_p), minus(s_p1), plus(s_q)) - chain(minus(s_p), plus(s_p1), minus(s_q)))
            .scale(half),
        (chain(minus(s_p), minus(s_p1), plus(s_q)) - chain(plus(s_p), plus(s_p1), minus(s_q)))
            .scale(half),
    ];
    let abc = &(&(&(s_p * v1) * s_p1) * v2) * s_q;
    let a_ = &(s_p * v1) * v2;
    let c_ = &(v1 * v2) * s_q;
    let b_ = &(v1 * s_p1) * v2;
    let rhs = [
        &(&(&abc + &a_) - &c_) - &b_,
        &(&(&(-abc.clone()) + &a_) + &c_) - &b_,
        &(&(&abc - &a_) + &c_) - &b_,
    ];
    let mut residuals = [0.0; 3];
    let mut traces = [Complex64::new(0.0, 0.0); 3];
    let mut gradings = [Grading::Mixed; 3];
    for k in 0..3 {
        residuals[k] = (&lhs[k] - &rhs[k]).max_abs();
        traces[k] = lhs[k].trace();
        gradings[k] = rhs[k].grading;
    }
    let max_residual = residuals.iter().fold(0.0f64, |m, &r| m.max(r));
    CalculReport { residuals, max_residual, traces, gradings }
}

#[derive(Debug, Clone, Serialize)]
pub struct CalculSweep {
    pub trials: usize,
    pub max_residual: f64,
    /// Largest |trace| of the odd combinations.
    pub max_trace: f64,
    /// Draws with residual or trace above `EXACT_ZERO`, or a combination that is not odd.
    pub violations: usize,
}

/// `calcul_identity_check` on `trials` random momentum triples inside the cutoff ball and
/// random complex weights. Each trial has its own ChaCha stream, so the result does not
/// depend on scheduling.
pub fn calcul_sweep(dressed: &DressedDirac, trials: usize, seed: u64) -> Result<CalculSweep> {
    use rand::{Rng, SeedableRng};
    let mut sweep = CalculSweep { trials, max_residual: 0.0, max_trace: 0.0, violations: 0 };
    for t in 0..trials {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let mut momentum = || loop {
            let v = [0, 1, 2].map(|_| dressed.lambda * rng.random_range(-1.0..1.0));
            if v.iter().map(|x| x * x).sum::<f64>() < dressed.lambda * dressed.lambda {
                return v;
            }
        };
        let (p, p1, q) = (momentum(), momentum(), momentum());
        let s = [p, p1, q].map(|k| sign_matrix(&k, dressed));
        let [s_p, s_p1, s_q] = s;
        let w = [0, 1].map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let r = calcul_identity_check(&s_p?, &s_p1?, &s_q?, w[0], w[1]);
        let tr = r.traces.iter().map(|c| c.norm()).fold(0.0, f64::max);
        sweep.max_residual = sweep.max_residual.max(r.max_residual);
        sweep.max_trace = sweep.max_trace.max(tr);
        if r.max_residual > EXACT_ZERO || tr > EXACT_ZERO || r.gradings.iter().any(|g| *g != Grading::Odd) {
            sweep.violations += 1;
        }
    }
    Ok(sweep)
}

fn shift(p: &[f64; 3], l: &[f64; 3]) -> [f64; 3] {
    [p[0] - l[0], p[1] - l[1], p[2] - l[2]]
}

/// One transport step: K(p−ℓ, q−ℓ) − s_p K(p−ℓ, q−ℓ) s_q.
pub fn a_transport<K>(
    ell: &[f64; 3],
    kernel: K,
    p: &[f64; 3],
    q: &[f64; 3],
    dressed: &DressedDirac,
) -> Result<DiracElement>
where
    K: Fn(&[f64; 3], &[f64; 3]) -> Result<DiracElement>,
{
    a_transport_nested(std::slice::from_ref(ell), &kernel, p, q, dressed)
}

/// The J-fold transport with shifts (ℓ₁, …, ℓ_J); ℓ₁ is the outermost.
pub fn a_transport_nested<K>(
    ells: &[[f64; 3]],
    kernel: &K,
    p: &[f64; 3],
    q: &[f64; 3],
    dressed: &DressedDirac,
) -> Result<DiracElement>
where
    K: Fn(&[f64; 3], &[f64; 3]) -> Result<DiracElement>,
{
    let Some((first, rest)) = ells.split_first() else {
        return kernel(p, q);
    };
    let sp = sign_matrix(p, dressed)?;
    let sq = sign_matrix(q, dressed)?;
    let ps = shift(p, first);
    let qs = shift(q, first);
    dressed.check_cutoff(&ps)?;
    dressed.check_cutoff(&qs)?;
    let inner = a_transport_nested(rest, kernel, &ps, &qs, dressed)?;
    let sandwiched = &(&sp * &inner) * &sq;
    Ok(DiracElement::new(inner.entries - sandwiched.entries, inner.grading))
}

/// Tr(s_a s_b) for unit 4-vectors.
pub fn trace2(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    4.0 * dot4(a, b)
}

/// Tr(s_a s_b s_c s_d) = 4[(a·b)(c·d) − (a·c)(b·d) + (a·d)(b·c)].
pub fn trace4(a: &[f64; 4], b: &[f64; 4], c: &[f64; 4], d: &[f64; 4]) -> f64 {
    4.0 * (dot4(a, b) * dot4(c, d) - dot4(a, c) * dot4(b, d) + dot4(a, d) * dot4(b, c))
}

pub fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn generators_square_to_identity_and_anticommute() {
        let g = make_dirac_basis().generators();
        for a in 0..4 {
            assert!((g[a].entries - g[a].entries.adjoint()).norm() < 1e-15);
            for b in 0..4 {
                let ac = g[a].entries * g[b].entries + g[b].entries * g[a].entries;
                let expect = if a == b { Mat4::identity() * Complex64::from(2.0) } else { Mat4::zeros() };
                assert!((ac - expect).norm() < 1e-15, "pair {a},{b}");
            }
        }
    }

    #[test]
    fn beta_is_traceless_and_squares_to_one() {
        let b = make_dirac_basis().beta;
        assert_eq!(b.trace(), ZERO);
        assert_eq!((&b * &b).entries, Mat4::identity());
    }

    #[test]
    fn alpha1_alpha2_anticommute() {
        let d = make_dirac_basis();
        let s = &d.alpha[0] * &d.alpha[1] + &d.alpha[1] * &d.alpha[0];
        assert_eq!(s.entries, Mat4::zeros());
        assert_eq!(s.grading, Grading::Even);
    }

    #[test]
    fn furry_small_words() {
        let d = make_dirac_basis();
        let r = furry_trace_check(&[d.alpha[0].clone()]).unwrap();
        assert_eq!(r.grading, Grading::Odd);
        assert!(r.trace.norm() < EXACT_ZERO);
        let r = furry_trace_check(&[d.alpha[0].clone(), d.alpha[0].clone()]).unwrap();
        assert_eq!(r.grading, Grading::Even);
        assert_relative_eq!(r.trace.re, 4.0);
        let r = furry_trace_check(&[d.beta.clone(), d.alpha[0].clone(), d.alpha[1].clone()]).unwrap();
        assert_eq!(r.grading, Grading::Odd);
        // Direct 4×4 multiplication oracle.
        let m = d.beta.entries * d.alpha[0].entries * d.alpha[1].entries;
        assert_eq!(m.trace(), ZERO);
        assert!(r.trace.norm() < EXACT_ZERO);
    }

    #[test]
    fn mixed_input_is_rejected() {
        let d = make_dirac_basis();
        let mixed = &DiracElement::identity() + &d.beta;
        assert_eq!(mixed.grading, Grading::Mixed);
        let err = furry_trace_check(&[d.beta.clone(), mixed]).unwrap_err();
        assert!(matches!(err, BdfError::GradingUndefined { index: 1, .. }));
    }

    #[test]
    fn classify_matches_metadata() {
        let d = make_dirac_basis();
        let even = &d.beta * &d.alpha[2];
        assert_eq!(classify(&even.entries, 1e-12), Grading::Even);
        assert_eq!(classify(&d.alpha[1].entries, 1e-12), Grading::Odd);
        let mixed = &DiracElement::identity() + &d.alpha[1];
        assert_eq!(classify(&mixed.entries, 1e-12), Grading::Mixed);
    }

    #[test]
    fn exhaustive_words_exact_and_float() {
        let f = exhaustive_furry(5, false);
        assert_eq!(f.words, 4 + 16 + 64 + 256 + 1024);
        assert_eq!(f.violations, 0);
        let e = exhaustive_furry(5, true);
        assert_eq!(e.violations, 0);
        assert_eq!(e.max_odd_trace, 0.0);
    }

    #[test]
    fn beta_only_calcul_case() {
        let b = make_dirac_basis().beta;
        let one = Complex64::from(1.0);
        let r = calcul_identity_check(&b, &b, &b, one, one);
        assert!(r.max_residual < 1e-15);
        for t in r.traces {
            assert!(t.norm() < 1e-15);
        }
        assert_eq!(r.gradings, [Grading::Odd; 3]);
    }

    #[test]
    fn trace_formulas_match_matrices() {
        let a = [0.5, 0.5, 0.5, 0.5];
        let b = [0.0, 0.6, 0.0, 0.8];
        let c = [0.8, 0.0, 0.6, 0.0];
        let d = [1.0, 0.0, 0.0, 0.0];
        let m = &(&(&slash(&a) * &slash(&b)) * &slash(&c)) * &slash(&d);
        assert_relative_eq!(m.trace().re, trace4(&a, &b, &c, &d), epsilon = 1e-14);
        assert_relative_eq!((&slash(&a) * &slash(&b)).trace().re, trace2(&a, &b), epsilon = 1e-14);
    }
}
