//! Order-J contributions f_{Λ,J}(k) to the vacuum response, f_Λ = αB_Λ + Σ_J α^J f_{Λ,J}.
//!
//! With p₀ = u + k/2·e, q₀ = u − k/2·e and p_j = p_{j−1} − ℓ_j (same shifts for q),
//!
//! f_{Λ,J}(k) = −α/(4π²k²) (4π²)^{−J} ∫du ∏dℓ_j/|ℓ_j|² Tr[(1 − s_{q₀}s_{p₀})X₁] / ∏_{j=0}^{J}(ℰ_{p_j} + ℰ_{q_j}),
//!
//! where X_J = s_{p_J}s_{q_J} − 1 and X_j = X_{j+1} − s_{p_j}X_{j+1}s_{q_j}. Every momentum stays in
//! the cutoff ball. At k = 0 both factors that vanish linearly in k become −s∂_e s.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clifford::{dot4, slash, trace4, Mat4};
use crate::dressed_dirac::{norm3, DressedDirac};
use crate::error::{BdfError, Result};
use crate::quadrature::{adaptive, GaussLegendre};

use super::b_lambda::compute_b;

pub const MAX_ORDER: usize = 3;

/// Samples per Monte-Carlo chunk; each chunk owns one RNG stream.
const CHUNK: usize = 2048;

const E_AXIS: [f64; 3] = [0.0, 0.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FTermMethod {
    /// J = 0: α·B_Λ.
    Closed,
    /// Three-dimensional isotropic reduction at k = 0.
    Reduced,
    ProductRule,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FTermEstimate {
    pub order: usize,
    pub k: f64,
    pub value: f64,
    /// Standard error for Monte Carlo, rule-refinement difference otherwise.
    pub std_error: f64,
    pub evaluations: u64,
    pub method: FTermMethod,
}

impl FTermEstimate {
    /// K in |f_{Λ,J}| = J (αK)^J ln Λ, the shape of the a-priori bound.
    pub fn shape_constant(&self, alpha: f64, lambda: f64) -> f64 {
        if self.order == 0 || alpha == 0.0 {
            return 0.0;
        }
        let j = self.order as f64;
        (self.value.abs() / (j * lambda.ln())).powf(1.0 / j) / alpha
    }
}

/// Node counts for the deterministic product rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductRule {
    /// Gauss nodes per radial variable (log-mapped).
    pub radial: usize,
    /// Gauss nodes in cos θ for each ℓ; u uses half as many on the half range.
    pub polar: usize,
    /// Midpoint nodes on a half turn of azimuth.
    pub azimuth: usize,
}

impl ProductRule {
    pub const COARSE: ProductRule = ProductRule { radial: 20, polar: 10, azimuth: 8 };
    pub const STANDARD: ProductRule = ProductRule { radial: 32, polar: 16, azimuth: 12 };

    /// The rule used for the error estimate: roughly two thirds of the nodes per axis.
    pub fn coarsened(&self) -> ProductRule {
        let c = |n: usize, min: usize| (2 * n / 3).max(min);
        ProductRule { radial: c(self.radial, 4), polar: c(self.polar, 2), azimuth: c(self.azimuth, 2) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FTermOptions {
    pub rule: ProductRule,
    /// Monte-Carlo sample count for J ≥ 2.
    pub samples: usize,
    pub seed: u64,
    /// Relative tolerance of the adaptive one-dimensional pieces.
    pub tol: f64,
}

impl Default for FTermOptions {
    fn default() -> Self {
        Self { rule: ProductRule::STANDARD, samples: 200_000, seed: 0, tol: 1e-8 }
    }
}

/// f_{Λ,J}(k) with an error bar. J = 1 is deterministic, J ∈ {2, 3} is Monte Carlo.
pub fn compute_f_term(order: usize, k: f64, dressed: &DressedDirac, opts: &FTermOptions) -> Result<FTermEstimate> {
    check_k(k, dressed)?;
    match order {
        0 => Ok(FTermEstimate {
            order,
            k,
            value: dressed.alpha * compute_b(k, dressed, opts.tol)?,
            std_error: 0.0,
            evaluations: 0,
            method: FTermMethod::Closed,
        }),
        1 if k == 0.0 => f1_at_zero(dressed, opts.tol),
        1 => {
            let fine = f_term_product(1, k, dressed, &opts.rule)?;
            let coarse = f_term_product(1, k, dressed, &opts.rule.coarsened())?;
            Ok(FTermEstimate {
                std_error: (fine.value - coarse.value).abs(),
                evaluations: fine.evaluations + coarse.evaluations,
                ..fine
            })
        }
        2 | 3 => f_term_monte_carlo(order, k, dressed, opts.samples, opts.seed),
        _ => Err(BdfError::UnsupportedOrder(order)),
    }
}

fn check_k(k: f64, dressed: &DressedDirac) -> Result<()> {
    if !(0.0..=2.0 * dressed.lambda).contains(&k) {
        return Err(BdfError::InvalidInput(format!("k = {k} outside [0, 2Λ]")));
    }
    Ok(())
}

fn prefactor(order: usize, k: f64, alpha: f64) -> f64 {
    let k2 = if k == 0.0 { 1.0 } else { k * k };
    -alpha / (4.0 * PI * PI * k2) * (4.0 * PI * PI).powi(-(order as i32))
}

/// Sign data at one level of the chain.
#[derive(Debug, Clone, Copy, Default)]
struct Level {
    p: [f64; 3],
    q: [f64; 3],
    sp: [f64; 4],
    sq: [f64; 4],
    /// ∂_e σ at p (= q) when k = 0.
    ds: [f64; 4],
    denom: f64,
}

impl Level {
    fn new(p: [f64; 3], q: [f64; 3], k: f64, d: &DressedDirac) -> Level {
        let (rp, rq) = (norm3(&p), norm3(&q));
        let sp = d.sign_vector_unchecked(&p);
        let ep = d.script_e(rp);
        if k == 0.0 {
            let ds = d.sign_vector_derivative(&p, &E_AXIS);
            return Level { p, q, sp, sq: sp, ds, denom: 2.0 * ep };
        }
        let sq = d.sign_vector_unchecked(&q);
        let eq = d.script_e(rq);
        Level { p, q, sp, sq, ds: [0.0; 4], denom: ep + eq }
    }

    fn shifted(&self, ell: &[f64; 3], k: f64, d: &DressedDirac) -> Level {
        let p = [self.p[0] - ell[0], self.p[1] - ell[1], self.p[2] - ell[2]];
        let q = [self.q[0] - ell[0], self.q[1] - ell[1], self.q[2] - ell[2]];
        Level::new(p, q, k, d)
    }
}

fn s_mat(v: &[f64; 4]) -> Mat4 {
    slash(v).entries
}

/// Tr[(1 − s_{q₀}s_{p₀}) X₁] / ∏ denominators, with the k = 0 replacement when `k == 0`.
fn chain_integrand(chain: &[Level], k: f64) -> f64 {
    let order = chain.len() - 1;
    let denom: f64 = chain.iter().map(|l| l.denom).product();
    if order == 1 {
        let (a, b) = (&chain[0], &chain[1]);
        let t = if k == 0.0 {
            trace4(&a.sp, &a.ds, &b.sp, &b.ds)
        } else {
            4.0 * dot4(&b.sp, &b.sq) - 4.0 - trace4(&a.sq, &a.sp, &b.sp, &b.sq) + 4.0 * dot4(&a.sq, &a.sp)
        };
        return t / denom;
    }
    let one = Mat4::identity();
    let last = &chain[order];
    let (outer, mut x) = if k == 0.0 {
        let a = &chain[0];
        (-(s_mat(&a.sp) * s_mat(&a.ds)), -(s_mat(&last.sp) * s_mat(&last.ds)))
    } else {
        let a = &chain[0];
        (one - s_mat(&a.sq) * s_mat(&a.sp), s_mat(&last.sp) * s_mat(&last.sq) - one)
    };
    for lvl in chain[1..order].iter().rev() {
        x = x - s_mat(&lvl.sp) * x * s_mat(&lvl.sq);
    }
    let tr: Complex64 = (outer * x).trace();
    tr.re / denom
}

/// Largest t with |c − t d| ≤ Λ for both shifted momenta.
fn ray_limit(lvl: &Level, d: &[f64; 3], lambda: f64) -> f64 {
    let lim = |c: &[f64; 3]| {
        let cd = c[0] * d[0] + c[1] * d[1] + c[2] * d[2];
        let c2 = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
        let disc = cd * cd - c2 + lambda * lambda;
        if disc < 0.0 {
            0.0
        } else {
            (cd + disc.sqrt()).max(0.0)
        }
    };
    lim(&lvl.p).min(lim(&lvl.q))
}

struct RuleNodes {
    radial: Vec<(f64, f64)>,
    u_polar: Vec<(f64, f64)>,
    polar: Vec<(f64, f64)>,
    azimuth: usize,
}

impl RuleNodes {
    fn new(rule: &ProductRule) -> Self {
        let radial = GaussLegendre::new(rule.radial).on(0.0, 1.0).collect();
        let u_polar = GaussLegendre::new(rule.polar.div_ceil(2)).on(0.0, 1.0).collect();
        let polar = GaussLegendre::new(rule.polar).on(-1.0, 1.0).collect();
        Self { radial, u_polar, polar, azimuth: rule.azimuth }
    }

    /// r = (1+R)^x − 1 flattens the 1/r tails.
    fn radial_on(&self, r_max: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let lg = r_max.ln_1p();
        self.radial.iter().map(move |&(x, w)| {
            let r = (lg * x).exp_m1();
            (r, w * lg * (1.0 + r))
        })
    }
}

/// Deterministic nested product rule for any order 1 ≤ J ≤ 3.
///
/// The u-azimuth about e and the reflection through the plane ⊥ e are used as exact symmetries,
/// the first ℓ azimuth is folded with the reflection y ↦ −y. Cost grows like (radial·polar·azimuth)^J.
pub fn f_term_product(order: usize, k: f64, dressed: &DressedDirac, rule: &ProductRule) -> Result<FTermEstimate> {
    check_k(k, dressed)?;
    if order == 0 || order > MAX_ORDER {
        return Err(BdfError::UnsupportedOrder(order));
    }
    let lambda = dressed.lambda;
    let nodes = RuleNodes::new(rule);
    let half = 0.5 * k;
    // One task per (cos θ_u, r_u) pair; partial sums are reduced in a fixed order.
    let mut tasks = Vec::new();
    for &(c, wc) in &nodes.u_polar {
        let disc = (half * c).powi(2) + lambda * lambda - half * half;
        let r_max = -half * c + disc.max(0.0).sqrt();
        if r_max <= 0.0 {
            continue;
        }
        for (r, wr) in nodes.radial_on(r_max) {
            tasks.push((c, r, wc * wr * r * r * 2.0 * 2.0 * PI));
        }
    }
    let partial: Vec<(f64, u64)> = tasks
        .par_iter()
        .map(|&(c, r, w)| {
            let s = (1.0 - c * c).max(0.0).sqrt();
            let u = [r * s, 0.0, r * c];
            let p = [u[0], u[1], u[2] + half];
            let q = [u[0], u[1], u[2] - half];
            let mut chain = vec![Level::new(p, q, k, dressed)];
            let mut acc = 0.0;
            let mut count = 0;
            descend(&nodes, order, k, dressed, &mut chain, w, &mut acc, &mut count);
            (acc, count)
        })
        .collect();
    let (sum, evals) = partial.iter().fold((0.0, 0), |(s, n), &(a, c)| (s + a, n + c));
    Ok(FTermEstimate {
        order,
        k,
        value: prefactor(order, k, dressed.alpha) * sum,
        std_error: f64::NAN,
        evaluations: evals,
        method: FTermMethod::ProductRule,
    })
}

#[allow(clippy::too_many_arguments)]
fn descend(
    nodes: &RuleNodes,
    order: usize,
    k: f64,
    dressed: &DressedDirac,
    chain: &mut Vec<Level>,
    weight: f64,
    acc: &mut f64,
    count: &mut u64,
) {
    let depth = chain.len();
    let first = depth == 1;
    let n_az = if first { nodes.azimuth } else { 2 * nodes.azimuth };
    let w_az = PI / nodes.azimuth as f64 * if first { 2.0 } else { 1.0 };
    let prev = *chain.last().expect("chain starts at u");
    for &(c, wc) in &nodes.polar {
        let s = (1.0 - c * c).max(0.0).sqrt();
        for ia in 0..n_az {
            let phi = PI * (ia as f64 + 0.5) / nodes.azimuth as f64;
            let d = [s * phi.cos(), s * phi.sin(), c];
            let t_max = ray_limit(&prev, &d, dressed.lambda);
            if t_max <= 0.0 {
                continue;
            }
            for (t, wt) in nodes.radial_on(t_max) {
                let ell = [t * d[0], t * d[1], t * d[2]];
                chain.push(prev.shifted(&ell, k, dressed));
                let w = weight * wc * w_az * wt;
                if depth == order {
                    *acc += w * chain_integrand(chain, k);
                    *count += 1;
                } else {
                    descend(nodes, order, k, dressed, chain, w, acc, count);
                }
                chain.pop();
            }
        }
    }
}

/// Radial sampling density on |x| ≤ R: uniform radius below 1, log-uniform above, total mass one.
fn pdf_vol(r: f64, r_max: f64) -> f64 {
    let v = if r < 1.0 {
        1.0 / (r * r)
    } else if r <= r_max {
        1.0 / (r * r * r * r_max.ln())
    } else {
        0.0
    };
    v / (8.0 * PI)
}

fn sample_vol(rng: &mut ChaCha8Rng, r_max: f64) -> [f64; 3] {
    let r = if rng.random::<f64>() < 0.5 { rng.random::<f64>() } else { r_max.powf(rng.random::<f64>()) };
    let c = 2.0 * rng.random::<f64>() - 1.0;
    let phi = 2.0 * PI * rng.random::<f64>();
    let s = (1.0 - c * c).max(0.0).sqrt();
    [r * s * phi.cos(), r * s * phi.sin(), r * c]
}

/// Importance-sampled estimate. Each ℓ_j is drawn from an equal mixture centred on 0 and on
/// the midpoint of the previous pair, which tames both 1/|ℓ|² and the ℰ-peaks.
///
/// Chunk c uses stream c of a ChaCha8 generator seeded by `seed` and the order; chunk sums
/// are combined in chunk order, so the result does not depend on the thread count.
pub fn f_term_monte_carlo(order: usize, k: f64, dressed: &DressedDirac, samples: usize, seed: u64) -> Result<FTermEstimate> {
    check_k(k, dressed)?;
    if order == 0 || order > MAX_ORDER {
        return Err(BdfError::UnsupportedOrder(order));
    }
    if samples < 2 {
        return Err(BdfError::InvalidInput("Monte Carlo needs at least 2 samples".into()));
    }
    let lambda = dressed.lambda;
    let half = 0.5 * k;
    let n_chunks = samples.div_ceil(CHUNK);
    let base = seed ^ (order as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let chunks: Vec<(f64, f64, usize)> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = ChaCha8Rng::seed_from_u64(base);
            rng.set_stream(ci as u64);
            let n = CHUNK.min(samples - ci * CHUNK);
            let (mut s1, mut s2) = (0.0, 0.0);
            let mut chain = Vec::with_capacity(order + 1);
            for _ in 0..n {
                let v = mc_sample(&mut rng, order, k, half, lambda, dressed, &mut chain);
                s1 += v;
                s2 += v * v;
            }
            (s1, s2, n)
        })
        .collect();
    let (s1, s2, n) = chunks.iter().fold((0.0, 0.0, 0usize), |(a, b, m), &(x, y, c)| (a + x, b + y, m + c));
    let nf = n as f64;
    let mean = s1 / nf;
    let var = ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    let pre = prefactor(order, k, dressed.alpha);
    Ok(FTermEstimate {
        order,
        k,
        value: pre * mean,
        std_error: pre.abs() * (var / nf).sqrt(),
        evaluations: n as u64,
        method: FTermMethod::MonteCarlo,
    })
}

fn mc_sample(
    rng: &mut ChaCha8Rng,
    order: usize,
    k: f64,
    half: f64,
    lambda: f64,
    dressed: &DressedDirac,
    chain: &mut Vec<Level>,
) -> f64 {
    chain.clear();
    let u = sample_vol(rng, lambda);
    let mut weight = 1.0 / pdf_vol(norm3(&u), lambda);
    let p = [u[0], u[1], u[2] + half];
    let q = [u[0], u[1], u[2] - half];
    if norm3(&p) > lambda || norm3(&q) > lambda {
        return 0.0;
    }
    chain.push(Level::new(p, q, k, dressed));
    let r_ell = 2.0 * lambda;
    for _ in 0..order {
        let prev = *chain.last().expect("non-empty");
        let mid = [
            0.5 * (prev.p[0] + prev.q[0]),
            0.5 * (prev.p[1] + prev.q[1]),
            0.5 * (prev.p[2] + prev.q[2]),
        ];
        let x = sample_vol(rng, r_ell);
        let ell = if rng.random::<f64>() < 0.5 { x } else { [mid[0] - x[0], mid[1] - x[1], mid[2] - x[2]] };
        let t = norm3(&ell);
        let to_mid = norm3(&[mid[0] - ell[0], mid[1] - ell[1], mid[2] - ell[2]]);
        let dens = 0.5 * (pdf_vol(t, r_ell) + pdf_vol(to_mid, r_ell));
        let next = prev.shifted(&ell, k, dressed);
        if norm3(&next.p) > lambda || norm3(&next.q) > lambda || t == 0.0 {
            return 0.0;
        }
        weight /= t * t * dens;
        chain.push(next);
    }
    weight * chain_integrand(chain, k)
}

/// Radial data (a, h, a′, h′, h/r) of σ = (a, h r̂).
fn radial_jet(d: &DressedDirac, r: f64) -> [f64; 5] {
    let (g0, d0, g1, d1) = d.radial_with_derivatives(r);
    let en = g0.hypot(g1);
    let de = (g0 * d0 + g1 * d1) / en;
    let da = (d0 - g0 * de / en) / en;
    let dh = (d1 - g1 * de / en) / en;
    let h_over_r = if r > 0.0 { g1 / en / r } else { dh };
    [g0 / en, g1 / en, da, dh, h_over_r]
}

/// Direction-averaged Tr(s_u∂s_u s_w∂s_w) for û·ŵ = c.
///
/// With ∂_eσ = M e, the average over e of trace4(σ_u, M_u e, σ_w, M_w e) is
/// (4/3)[(M_wᵀσ_u)·(M_uᵀσ_w) − (σ_u·σ_w) Tr(M_uᵀM_w)].
fn averaged_trace(ju: &[f64; 5], jw: &[f64; 5], c: f64) -> f64 {
    let s = (1.0 - c * c).max(0.0).sqrt();
    let uh = [0.0, 0.0, 1.0];
    let wh = [s, 0.0, c];
    let jac = |j: &[f64; 5], n: &[f64; 3]| -> [[f64; 3]; 4] {
        let mut m = [[0.0; 3]; 4];
        for b in 0..3 {
            m[0][b] = j[2] * n[b];
            for a in 0..3 {
                let delta = if a == b { 1.0 } else { 0.0 };
                m[a + 1][b] = j[3] * n[a] * n[b] + j[4] * (delta - n[a] * n[b]);
            }
        }
        m
    };
    let mu = jac(ju, &uh);
    let mw = jac(jw, &wh);
    let su = [ju[0], ju[1] * uh[0], ju[1] * uh[1], ju[1] * uh[2]];
    let sw = [jw[0], jw[1] * wh[0], jw[1] * wh[1], jw[1] * wh[2]];
    let mut tr = 0.0;
    for a in 0..4 {
        for b in 0..3 {
            tr += mu[a][b] * mw[a][b];
        }
    }
    let mut x = [0.0; 3];
    let mut y = [0.0; 3];
    for b in 0..3 {
        for a in 0..4 {
            x[b] += mw[a][b] * su[a];
            y[b] += mu[a][b] * sw[a];
        }
    }
    let xy = x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
    (4.0 / 3.0) * (xy - dot4(&su, &sw) * tr)
}

/// ∫_{−1}^{1} P(c)/(A − Bc) dc for the cubic P(c) = averaged_trace(·, ·, c).
fn angular(ju: &[f64; 5], jw: &[f64; 5], a: f64, b: f64) -> f64 {
    thread_local! {
        static GL16: GaussLegendre = GaussLegendre::new(16);
    }
    if b < 0.5 * a {
        return GL16.with(|g| g.integrate(-1.0, 1.0, |c| averaged_trace(ju, jw, c) / (a - b * c)));
    }
    // Subtract the value at the pole c* = A/B ∈ [1, 2]; the remainder is a quadratic. P is only
    // known on [−1, 1], so it is continued through its interpolant on four Chebyshev nodes.
    let nodes: [f64; 4] = std::array::from_fn(|i| ((2 * i + 1) as f64 * PI / 8.0).cos());
    let vals = nodes.map(|c| averaged_trace(ju, jw, c));
    let cubic = |c: f64| {
        let mut s = 0.0;
        for i in 0..4 {
            let mut l = vals[i];
            for j in 0..4 {
                if j != i {
                    l *= (c - nodes[j]) / (nodes[i] - nodes[j]);
                }
            }
            s += l;
        }
        s
    };
    if a - b <= 1e-15 * a {
        // |u| = |w| to rounding: a single node on the integrable log singularity.
        return 0.0;
    }
    let cs = a / b;
    let pc = cubic(cs);
    let smooth = GL16.with(|g| g.integrate(-1.0, 1.0, |c| (cubic(c) - pc) / (a - b * c)));
    smooth + pc / b * ((a + b) / (a - b)).ln()
}

/// Absolute floor for the radial pieces, whose integrands are O(1).
const ABS_FLOOR: f64 = 1e-13;

/// ∫_a^b f, switching to r = e^y away from the origin where the tails are logarithmic.
fn panel<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let est = if a >= 0.5 {
        adaptive(|y: f64| y.exp() * f(y.exp()), a.ln(), b.ln(), ABS_FLOOR, tol)?
    } else {
        adaptive(&mut *f, a, b, ABS_FLOOR, tol)?
    };
    Ok(est.value)
}

/// ∫_lo^hi f with a breakpoint at r = 1.
fn range<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if lo < 1.0 && hi > 1.0 {
        Ok(panel(f, lo, 1.0, tol)? + panel(f, 1.0, hi, tol)?)
    } else {
        panel(f, lo, hi, tol)
    }
}

/// ∫_0^Λ f where f has a logarithmic singularity at `x`: the two panels touching x use
/// r = x ∓ h t³, which turns ln|r − x| into a smooth function of t.
fn range_log_singular<F: FnMut(f64) -> f64>(f: &mut F, x: f64, lambda: f64, tol: f64) -> Result<f64> {
    let lo = 0.5 * x;
    let hi = (2.0 * x).min(lambda);
    let mut total = range(f, 0.0, lo, tol)? + range(f, hi, lambda, tol)?;
    let h = x - lo;
    total += adaptive(|t: f64| 3.0 * h * t * t * f(x - h * t * t * t), 0.0, 1.0, ABS_FLOOR, tol)?.value;
    let h = hi - x;
    if h > 0.0 {
        total += adaptive(|t: f64| 3.0 * h * t * t * f(x + h * t * t * t), 0.0, 1.0, ABS_FLOOR, tol)?.value;
    }
    Ok(total)
}

/// Tolerances below this stall: the interpolated g₀, g₁ are only C² at the grid knots.
pub const REDUCED_TOL_FLOOR: f64 = 2e-6;

/// f_{Λ,1}(0) from the direction-averaged three-dimensional integral over (|u|, |w|, û·ŵ).
pub fn f1_at_zero(dressed: &DressedDirac, tol: f64) -> Result<FTermEstimate> {
    let tol = tol.max(REDUCED_TOL_FLOOR);
    let lambda = dressed.lambda;
    let mut evals = 0u64;
    let mut inner_failure = None;
    let outer = |ru: f64| -> f64 {
        let ju = radial_jet(dressed, ru);
        let eu = dressed.script_e(ru);
        let g = |rw: f64| {
            let jw = radial_jet(dressed, rw);
            let ew = dressed.script_e(rw);
            let a = ru * ru + rw * rw;
            let b = 2.0 * ru * rw;
            evals += 1;
            rw * rw * angular(&ju, &jw, a, b) / (4.0 * eu * ew)
        };
        let mut g = g;
        match range_log_singular(&mut g, ru, lambda, tol * 0.1) {
            Ok(v) => ru * ru * v,
            Err(e) => {
                inner_failure.get_or_insert(e);
                0.0
            }
        }
    };
    let mut outer = outer;
    let total = range(&mut outer, 0.0, lambda, tol)?;
    if let Some(e) = inner_failure {
        return Err(e);
    }
    let value = -dressed.alpha / (16.0 * PI.powi(4)) * 8.0 * PI * PI * total;
    Ok(FTermEstimate {
        order: 1,
        k: 0.0,
        value,
        std_error: value.abs() * tol,
        evaluations: evals,
        method: FTermMethod::Reduced,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dressed_dirac::{dress, PhysicalParams};

    #[test]
    fn rejects_order_four() {
        let d = DressedDirac::free(10.0);
        let r = compute_f_term(4, 0.0, &d, &FTermOptions::default());
        assert_eq!(r.unwrap_err(), BdfError::UnsupportedOrder(4));
    }

    #[test]
    fn zero_coupling_gives_zero() {
        let d = dress(&PhysicalParams::new(0.0, 10.0), 1e-12, 10).unwrap();
        let opts = FTermOptions { rule: ProductRule { radial: 6, polar: 4, azimuth: 3 }, ..Default::default() };
        for k in [0.0, 1.0] {
            assert_eq!(compute_f_term(1, k, &d, &opts).unwrap().value, 0.0);
        }
    }

    #[test]
    fn pdf_vol_has_unit_mass() {
        let r_max = 37.0;
        let m = adaptive(|r: f64| 4.0 * PI * r * r * pdf_vol(r, r_max), 0.0, 1.0, 1e-14, 1e-12).unwrap().value
            + adaptive(|r: f64| 4.0 * PI * r * r * pdf_vol(r, r_max), 1.0, r_max, 1e-14, 1e-12).unwrap().value;
        assert!((m - 1.0).abs() < 1e-10, "{m}");
    }

    #[test]
    fn angular_split_matches_plain_quadrature() {
        let d = dress(&PhysicalParams::new(0.05, 20.0), 1e-12, 50).unwrap();
        let (ru, rw) = (1.3, 1.1);
        let ju = radial_jet(&d, ru);
        let jw = radial_jet(&d, rw);
        let (a, b) = (ru * ru + rw * rw, 2.0 * ru * rw);
        let direct = adaptive(|c| averaged_trace(&ju, &jw, c) / (a - b * c), -1.0, 1.0, 1e-15, 1e-13).unwrap().value;
        assert!((angular(&ju, &jw, a, b) - direct).abs() < 1e-10 * direct.abs().max(1e-3));
    }

    #[test]
    fn vector_and_matrix_traces_agree() {
        let d = dress(&PhysicalParams::new(0.05, 20.0), 1e-12, 50).unwrap();
        for k in [0.0, 0.7] {
            let a = Level::new([0.3, -0.2, 0.5 + 0.5 * k], [0.3, -0.2, 0.5 - 0.5 * k], k, &d);
            let b = a.shifted(&[1.1, 0.4, -0.9], k, &d);
            let vector = chain_integrand(&[a, b], k);
            let one = Mat4::identity();
            let tr = if k == 0.0 {
                ((s_mat(&a.sp) * s_mat(&a.ds)) * (s_mat(&b.sp) * s_mat(&b.ds))).trace().re
            } else {
                ((one - s_mat(&a.sq) * s_mat(&a.sp)) * (s_mat(&b.sp) * s_mat(&b.sq) - one)).trace().re
            };
            assert!((vector - tr / (a.denom * b.denom)).abs() < 1e-12);
        }
    }
}
