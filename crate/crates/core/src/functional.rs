//! Quadrature for the Folland–Stein ratio
//! `R(u) = int |grad_H u|^2 / (int |u|^{2*})^{2/2*}` on `G(H)` with Lebesgue
//! measure.
//!
//! Integrals over the whole group use a product rule in polar coordinates
//! about a chosen centre: Gauss–Legendre in a tangent-compressed radius and
//! hyperspherical angles for `q`, and the same for `w`. Perturbations with
//! compact support are handled by integrating only the change of the
//! integrand over the support box with a tensor Gauss–Legendre rule.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::{FiniteAboveNegOneF64, GaussJacobi, GaussLegendre};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QcError, Result};
use crate::field::ScalarField;
use crate::frame::HorizontalFrame;
use crate::group::{ambient_dim, dilate_field, homogeneous_dim, left_translate_field, GroupPoint};
use crate::ops::HorizontalGradient;
use crate::yamabe::{h_explicit, phi_from_h, Bump, ExtremalParams};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let m = NonZeroUsize::new(m.max(1)).expect("nonzero");
    GaussLegendre::new(m).as_node_weight_pairs().to_vec()
}

/// Gauss–Jacobi nodes and weights for the weight `(1 - x^2)^a` on `[-1, 1]`.
pub fn gauss_jacobi(m: usize, a: f64) -> Vec<(f64, f64)> {
    if a == 0.0 {
        return gauss_legendre(m);
    }
    let m = NonZeroUsize::new(m.max(1)).expect("nonzero");
    let a = FiniteAboveNegOneF64::new(a).expect("exponent above -1");
    GaussJacobi::new(m, a, a).as_node_weight_pairs().to_vec()
}

/// Sum with a fixed pairwise reduction tree.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        k if k <= 8 => v.iter().sum(),
        k => pairwise_sum(&v[..k / 2]) + pairwise_sum(&v[k / 2..]),
    }
}

/// Node counts of a polar product rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarSpec {
    pub radial: usize,
    pub polar: usize,
    pub azimuth: usize,
    /// Radius scale of the tangent map for the `q` factor.
    pub scale_q: f64,
    /// Radius scale of the tangent map for the `w` factor.
    pub scale_w: f64,
}

impl PolarSpec {
    /// Coarse and fine levels used by default.
    pub fn levels(scale: f64) -> [PolarSpec; 2] {
        let mk = |radial, polar, azimuth| PolarSpec {
            radial,
            polar,
            azimuth,
            scale_q: 0.7 * scale,
            scale_w: scale * scale,
        };
        [mk(20, 6, 8), mk(28, 8, 10)]
    }
}

/// Radial nodes `r = a tan(pi t / 2)`, `t in (0, 1)`, with weights `w dr`.
fn radial_nodes(m: usize, scale: f64) -> Vec<(f64, f64)> {
    gauss_legendre(m)
        .into_iter()
        .map(|(x, w)| {
            let t = 0.5 * (x + 1.0);
            let c = (0.5 * PI * t).cos();
            (scale * (0.5 * PI * t).tan(), 0.5 * w * scale * 0.5 * PI / (c * c))
        })
        .collect()
}

/// Directions on `S^{m-1}` via hyperspherical angles, with surface weights.
fn sphere_nodes(m: usize, polar: usize, azimuth: usize) -> Vec<(Vec<f64>, f64)> {
    assert!(m >= 2);
    // one list per polar angle phi_k (k = 1..m-2) with weight sin^{m-1-k}
    let mut angle_rules: Vec<Vec<(f64, f64)>> = Vec::new();
    for k in 1..m - 1 {
        // int sin^e(phi) g(phi) dphi = int (1 - x^2)^{(e-1)/2} g(acos x) dx
        let a = 0.5 * (m - 2 - k) as f64;
        let rule = gauss_jacobi(polar, a)
            .into_iter()
            .map(|(x, w)| (x.clamp(-1.0, 1.0).acos(), w))
            .collect();
        angle_rules.push(rule);
    }
    let az: Vec<(f64, f64)> = (0..azimuth)
        .map(|k| (2.0 * PI * k as f64 / azimuth as f64, 2.0 * PI / azimuth as f64))
        .collect();
    angle_rules.push(az);

    let mut out = vec![(Vec::<f64>::new(), 1.0)];
    for rule in &angle_rules {
        let mut next = Vec::with_capacity(out.len() * rule.len());
        for (angles, w) in &out {
            for (phi, wp) in rule {
                let mut a = angles.clone();
                a.push(*phi);
                next.push((a, w * wp));
            }
        }
        out = next;
    }
    out.into_iter()
        .map(|(angles, w)| {
            let mut x = vec![0.0; m];
            let mut prod = 1.0;
            for (k, phi) in angles.iter().enumerate() {
                x[k] = prod * phi.cos();
                prod *= phi.sin();
            }
            x[m - 1] = prod;
            (x, w)
        })
        .collect()
}

/// Polar product rule on `R^m` with weights including the volume element.
pub fn ball_nodes(m: usize, radial: usize, polar: usize, azimuth: usize, scale: f64) -> Vec<(Vec<f64>, f64)> {
    let dirs = sphere_nodes(m, polar, azimuth);
    let mut out = Vec::with_capacity(radial * dirs.len());
    for (r, wr) in radial_nodes(radial, scale) {
        let jac = wr * r.powi(m as i32 - 1);
        for (x, w) in &dirs {
            out.push((x.iter().map(|v| r * v).collect(), jac * w));
        }
    }
    out
}

fn box_nodes(lo: &[f64], hi: &[f64], k: usize) -> Vec<(Vec<f64>, f64)> {
    let gl = gauss_legendre(k);
    let mut out = vec![(Vec::<f64>::new(), 1.0)];
    for (a, b) in lo.iter().zip(hi) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut next = Vec::with_capacity(out.len() * k);
        for (x, w) in &out {
            for (t, wt) in &gl {
                let mut y = x.clone();
                y.push(mid + half * t);
                next.push((y, w * wt * half));
            }
        }
        out = next;
    }
    out
}

/// Product rule `sum_i sum_j wq_i ww_j f(center + (q_i, w_j))`.
#[derive(Clone, Debug)]
pub struct ProductRule {
    pub center: Vec<f64>,
    pub q_nodes: Vec<(Vec<f64>, f64)>,
    pub w_nodes: Vec<(Vec<f64>, f64)>,
}

impl ProductRule {
    pub fn polar(n: usize, center: &[f64], spec: &PolarSpec) -> Self {
        Self {
            center: center.to_vec(),
            q_nodes: ball_nodes(4 * n, spec.radial, spec.polar, spec.azimuth, spec.scale_q),
            w_nodes: ball_nodes(3, spec.radial, spec.polar, spec.azimuth, spec.scale_w),
        }
    }

    /// Tensor Gauss–Legendre rule on the box `[lo, hi]` with `k` nodes per axis.
    pub fn boxed(n: usize, lo: &[f64], hi: &[f64], k: usize) -> Self {
        let m = 4 * n;
        Self {
            center: vec![0.0; m + 3],
            q_nodes: box_nodes(&lo[..m], &hi[..m], k),
            w_nodes: box_nodes(&lo[m..], &hi[m..], k),
        }
    }

    pub fn len(&self) -> usize {
        self.q_nodes.len() * self.w_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Monte-Carlo rule using the same radial compression as the polar rule and
/// uniformly distributed directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloRule {
    pub center: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub scale_q: f64,
    pub scale_w: f64,
}

/// Uniform Monte-Carlo rule on the box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxMonteCarloRule {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub enum Rule {
    Product(ProductRule),
    MonteCarlo(MonteCarloRule),
    BoxMonteCarlo(BoxMonteCarloRule),
}

impl Rule {
    pub fn evaluations(&self) -> usize {
        match self {
            Rule::Product(p) => p.len(),
            Rule::MonteCarlo(m) => m.samples,
            Rule::BoxMonteCarlo(m) => m.samples,
        }
    }
}

fn sphere_area(m: usize) -> f64 {
    // 2 pi^{m/2} / Gamma(m/2)
    let half = m as f64 / 2.0;
    let gamma = if m % 2 == 0 {
        (1..m / 2).map(|k| k as f64).product::<f64>()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < half - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    };
    2.0 * PI.powf(half) / gamma
}

fn random_direction<R: Rng>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut s = 0.0;
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
            s += *v * *v;
        }
        if s > 1e-24 {
            let k = 1.0 / s.sqrt();
            out.iter_mut().for_each(|v| *v *= k);
            return;
        }
    }
}

const MC_CHUNK: usize = 4096;

/// Integrates a `K`-vector of integrands; the closure receives the point
/// and a scratch buffer of ambient length.
pub fn integrate<const K: usize, F>(rule: &Rule, dim: usize, f: F) -> Result<[f64; K]>
where
    F: Fn(&[f64], &mut [f64]) -> Result<[f64; K]> + Sync,
{
    let partial: Vec<Result<[f64; K]>> = match rule {
        Rule::Product(r) => r
            .q_nodes
            .par_iter()
            .map(|(qv, wq)| {
                let mut p = r.center.clone();
                let mut scratch = vec![0.0; dim];
                let m = qv.len();
                for i in 0..m {
                    p[i] = r.center[i] + qv[i];
                }
                let mut inner = vec![Vec::with_capacity(r.w_nodes.len()); K];
                for (wv, ww) in &r.w_nodes {
                    for s in 0..3 {
                        p[m + s] = r.center[m + s] + wv[s];
                    }
                    let v = f(&p, &mut scratch)?;
                    for k in 0..K {
                        inner[k].push(ww * v[k]);
                    }
                }
                let mut out = [0.0; K];
                for k in 0..K {
                    out[k] = wq * pairwise_sum(&inner[k]);
                }
                Ok(out)
            })
            .collect(),
        Rule::BoxMonteCarlo(mc) => {
            let chunks = mc.samples.div_ceil(MC_CHUNK);
            let volume: f64 = mc.lo.iter().zip(&mc.hi).map(|(a, b)| b - a).product();
            (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
                    rng.set_stream(c as u64);
                    let count = MC_CHUNK.min(mc.samples - c * MC_CHUNK);
                    let mut p = vec![0.0; dim];
                    let mut scratch = vec![0.0; dim];
                    let mut inner = vec![Vec::with_capacity(count); K];
                    for _ in 0..count {
                        for (i, x) in p.iter_mut().enumerate() {
                            *x = rng.gen_range(mc.lo[i]..mc.hi[i]);
                        }
                        let v = f(&p, &mut scratch)?;
                        for k in 0..K {
                            inner[k].push(v[k]);
                        }
                    }
                    let mut out = [0.0; K];
                    for k in 0..K {
                        out[k] = volume * pairwise_sum(&inner[k]) / mc.samples as f64;
                    }
                    Ok(out)
                })
                .collect()
        }
        Rule::MonteCarlo(mc) => {
            let m = dim - 3;
            let chunks = mc.samples.div_ceil(MC_CHUNK);
            let area = sphere_area(m) * sphere_area(3);
            (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
                    rng.set_stream(c as u64);
                    let count = MC_CHUNK.min(mc.samples - c * MC_CHUNK);
                    let mut p = vec![0.0; dim];
                    let mut scratch = vec![0.0; dim];
                    let mut dir_q = vec![0.0; m];
                    let mut dir_w = [0.0; 3];
                    let mut inner = vec![Vec::with_capacity(count); K];
                    for _ in 0..count {
                        let tq: f64 = rng.gen_range(0.0..1.0);
                        let tw: f64 = rng.gen_range(0.0..1.0);
                        random_direction(&mut rng, &mut dir_q);
                        random_direction(&mut rng, &mut dir_w);
                        let cq = (0.5 * PI * tq).cos();
                        let cw = (0.5 * PI * tw).cos();
                        let r = mc.scale_q * (0.5 * PI * tq).tan();
                        let s = mc.scale_w * (0.5 * PI * tw).tan();
                        let jac = r.powi(m as i32 - 1) * mc.scale_q * 0.5 * PI / (cq * cq)
                            * s
                            * s
                            * mc.scale_w
                            * 0.5
                            * PI
                            / (cw * cw);
                        for i in 0..m {
                            p[i] = mc.center[i] + r * dir_q[i];
                        }
                        for i in 0..3 {
                            p[m + i] = mc.center[m + i] + s * dir_w[i];
                        }
                        let v = f(&p, &mut scratch)?;
                        for k in 0..K {
                            inner[k].push(jac * v[k]);
                        }
                    }
                    let mut out = [0.0; K];
                    for k in 0..K {
                        out[k] = area * pairwise_sum(&inner[k]) / mc.samples as f64;
                    }
                    Ok(out)
                })
                .collect()
        }
    };
    let mut cols = vec![Vec::with_capacity(partial.len()); K];
    for r in partial {
        let v = r?;
        for k in 0..K {
            cols[k].push(v[k]);
        }
    }
    let mut out = [0.0; K];
    for k in 0..K {
        out[k] = pairwise_sum(&cols[k]);
    }
    Ok(out)
}

/// Ratio with its pieces and an error estimate from the last two
/// refinements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub ratio: f64,
    pub error: f64,
    /// `int |grad_H u|^2`.
    pub numerator: f64,
    pub numerator_error: f64,
    /// `int |u|^{2*}`.
    pub denominator: f64,
    pub denominator_error: f64,
    pub evaluations: usize,
}

impl RatioEstimate {
    pub fn relative_error(&self) -> f64 {
        self.error / self.ratio.abs()
    }
}

fn ratio_of(num: f64, den: f64, two_star: f64) -> f64 {
    num / den.powf(2.0 / two_star)
}

fn two_star(n: usize) -> f64 {
    let q = homogeneous_dim(n) as f64;
    2.0 * q / (q - 2.0)
}

/// The pair of integrals of `R(u)` under one rule.
pub fn ratio_integrals<F: ScalarField<f64> + ?Sized>(
    frame: &HorizontalFrame<f64>,
    u: &F,
    rule: &Rule,
) -> Result<[f64; 2]> {
    let fast = HorizontalGradient::new(frame);
    let ts = two_star(frame.n);
    integrate::<2, _>(rule, frame.dim(), |p, g| {
        let v = u.value_grad(p, g)?;
        Ok([fast.norm_sq(p, g), v.abs().powf(ts)])
    })
}

/// `R(u)` under a sequence of rules, coarse to fine. The estimate is the
/// finest value and the error the change from the previous rule.
pub fn folland_stein_ratio<F: ScalarField<f64> + ?Sized>(
    frame: &HorizontalFrame<f64>,
    u: &F,
    rules: &[Rule],
) -> Result<RatioEstimate> {
    if rules.len() < 2 {
        return Err(QcError::InvalidParameter("need at least two quadrature refinements".into()));
    }
    let ts = two_star(frame.n);
    let mut last: Option<[f64; 2]> = None;
    let mut prev: Option<[f64; 2]> = None;
    let mut evaluations = 0;
    for r in rules {
        let v = ratio_integrals(frame, u, r)?;
        evaluations += r.evaluations();
        prev = last;
        last = Some(v);
    }
    let (fine, coarse) = (last.expect("nonempty"), prev.expect("two rules"));
    let ratio = ratio_of(fine[0], fine[1], ts);
    let coarse_ratio = ratio_of(coarse[0], coarse[1], ts);
    let error = (ratio - coarse_ratio).abs();
    let unstable = (0..2).any(|k| !fine[k].is_finite() || (fine[k] - coarse[k]).abs() > 0.1 * fine[k].abs());
    if unstable || !ratio.is_finite() || !error.is_finite() || error > 0.1 * ratio.abs() {
        return Err(QcError::NoConvergence(format!(
            "quadrature refinements disagree: {coarse:?} vs {fine:?}"
        )));
    }
    Ok(RatioEstimate {
        ratio,
        error,
        numerator: fine[0],
        numerator_error: (fine[0] - coarse[0]).abs(),
        denominator: fine[1],
        denominator_error: (fine[1] - coarse[1]).abs(),
        evaluations,
    })
}

/// `R(u + eps b)` for `b` supported in a box, from the integrals of `u` and
/// the change of the integrands over the box under `rules` (coarse to fine),
/// which must cover the support.
pub fn perturbed_ratio<F: ScalarField<f64> + ?Sized, B: ScalarField<f64> + ?Sized>(
    frame: &HorizontalFrame<f64>,
    base: &RatioEstimate,
    u: &F,
    bump: &B,
    eps: f64,
    rules: &[Rule],
) -> Result<RatioEstimate> {
    if rules.len() < 2 {
        return Err(QcError::InvalidParameter("need at least two box refinements".into()));
    }
    let fast = HorizontalGradient::new(frame);
    let ts = two_star(frame.n);
    let d = frame.dim();
    let mut deltas = Vec::new();
    let mut evaluations = base.evaluations;
    for rule in rules {
        evaluations += rule.evaluations();
        let v = integrate::<2, _>(rule, d, |p, g| {
            let a = u.value_grad(p, g)?;
            let ga = fast.norm_sq(p, g);
            let mut gb = [0.0f64; 16];
            let gb = &mut gb[..d];
            let b = bump.value_grad(p, gb)?;
            let mut pert = 0.0;
            for (x, y) in g.iter_mut().zip(gb.iter()) {
                *x += eps * y;
            }
            pert += fast.norm_sq(p, g);
            let w = a + eps * b;
            Ok([pert - ga, w.abs().powf(ts) - a.abs().powf(ts)])
        })?;
        deltas.push(v);
    }
    let fine = deltas[deltas.len() - 1];
    let coarse = deltas[deltas.len() - 2];
    let num = base.numerator + fine[0];
    let den = base.denominator + fine[1];
    let ratio = ratio_of(num, den, ts);
    let num_err = base.numerator_error + (fine[0] - coarse[0]).abs();
    let den_err = base.denominator_error + (fine[1] - coarse[1]).abs();
    // first-order propagation of the two integral errors
    let error = ratio * (num_err / num.abs() + (2.0 / ts) * den_err / den.abs());
    Ok(RatioEstimate {
        ratio,
        error,
        numerator: num,
        numerator_error: num_err,
        denominator: den,
        denominator_error: den_err,
        evaluations,
    })
}

/// Settings of the invariance and extremality scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalConfig {
    pub n: usize,
    pub c0: f64,
    pub sigma: f64,
    /// Left translation applied to the extremal.
    pub translation: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub bumps: usize,
    pub eps: f64,
    pub seed: u64,
    /// Monte-Carlo sample counts (coarse, fine) used when `n > 1`.
    pub mc_samples: [usize; 2],
}

impl FunctionalConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        let mut translation = vec![0.0; ambient_dim(n)];
        let defaults = [0.5, -0.3, 0.8, 0.2];
        for (i, v) in translation.iter_mut().take(4 * n).enumerate() {
            *v = defaults[i % 4] / (1 + i / 4) as f64;
        }
        let m = 4 * n;
        translation[m] = 0.4;
        translation[m + 1] = -0.2;
        translation[m + 2] = 0.3;
        Self {
            n,
            c0: 1.0,
            sigma: 1.0,
            translation,
            lambdas: vec![0.5, 2.0],
            bumps: 20,
            eps: 0.05,
            seed,
            mc_samples: [250_000, 1_000_000],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceOutcome {
    pub name: String,
    pub transformed: RatioEstimate,
    /// `|R(Tu) - R(u)| / R(u)`.
    pub relative_difference: f64,
    /// Combined relative error estimate of both ratios.
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpOutcome {
    pub index: usize,
    pub perturbed: RatioEstimate,
    /// `R(u + eps b) - R(u)`.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub base: RatioEstimate,
    pub invariance: Vec<InvarianceOutcome>,
    pub bumps: Vec<BumpOutcome>,
}

fn rules_about(n: usize, center: &[f64], scale: f64, cfg: &FunctionalConfig, stream: u64) -> Vec<Rule> {
    if n == 1 {
        PolarSpec::levels(scale)
            .iter()
            .map(|s| Rule::Product(ProductRule::polar(n, center, s)))
            .collect()
    } else {
        cfg.mc_samples
            .iter()
            .enumerate()
            .map(|(k, &samples)| {
                Rule::MonteCarlo(MonteCarloRule {
                    center: center.to_vec(),
                    samples,
                    seed: cfg.seed.wrapping_mul(31).wrapping_add(stream * 2 + k as u64),
                    scale_q: 0.7 * scale,
                    scale_w: scale * scale,
                })
            })
            .collect()
    }
}

/// Ratio of the extremal, of its left translate, of its normalized dilates,
/// and of seeded compactly supported perturbations.
pub fn functional_scan(cfg: &FunctionalConfig) -> Result<FunctionalReport> {
    let n = cfg.n;
    let frame = crate::frame::build_frame_f64(n)?;
    let params = ExtremalParams::centered(n, cfg.c0, cfg.sigma)?;
    let phi = phi_from_h(h_explicit(&params), homogeneous_dim(n));
    let scale = cfg.sigma.sqrt();
    let origin = vec![0.0; ambient_dim(n)];
    let base = folland_stein_ratio(&frame, &phi, &rules_about(n, &origin, scale, cfg, 0))?;

    let mut invariance = Vec::new();
    let p0 = GroupPoint::from_coords(&cfg.translation)?;
    let translated = left_translate_field(&phi, &p0);
    // the translate peaks at p0^{-1}
    let centre = p0.inverse().to_coords();
    let t = folland_stein_ratio(&frame, &translated, &rules_about(n, &centre, scale, cfg, 1))?;
    invariance.push(outcome("left_translation", &base, t));
    for (k, &lambda) in cfg.lambdas.iter().enumerate() {
        let weight = lambda.powf((homogeneous_dim(n) as f64 - 2.0) / 2.0);
        let dilated = dilate_field(&phi, n, &lambda, weight);
        let t = folland_stein_ratio(&frame, &dilated, &rules_about(n, &origin, scale, cfg, 2 + k as u64))?;
        invariance.push(outcome(&format!("dilation_{lambda}"), &base, t));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut bumps = Vec::new();
    for index in 0..cfg.bumps {
        let b = Bump::random(n, 0.5 * scale, 0.6 * scale, &mut rng);
        let (lo, hi) = b.support();
        let rules: Vec<Rule> = if n == 1 {
            [6, 8].iter().map(|&k| Rule::Product(ProductRule::boxed(n, &lo, &hi, k))).collect()
        } else {
            cfg.mc_samples
                .iter()
                .enumerate()
                .map(|(k, &samples)| {
                    Rule::BoxMonteCarlo(BoxMonteCarloRule {
                        lo: lo.clone(),
                        hi: hi.clone(),
                        samples,
                        seed: cfg.seed.wrapping_add(1000 + 2 * index as u64 + k as u64),
                    })
                })
                .collect()
        };
        let perturbed = perturbed_ratio(&frame, &base, &phi, &b, cfg.eps, &rules)?;
        bumps.push(BumpOutcome {
            index,
            margin: perturbed.ratio - base.ratio,
            perturbed,
        });
    }
    Ok(FunctionalReport {
        base,
        invariance,
        bumps,
    })
}

fn outcome(name: &str, base: &RatioEstimate, t: RatioEstimate) -> InvarianceOutcome {
    InvarianceOutcome {
        name: name.to_string(),
        relative_difference: (t.ratio - base.ratio).abs() / base.ratio.abs(),
        relative_error: base.relative_error() + t.relative_error(),
        transformed: t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre(5);
        let s: f64 = rule.iter().map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_rules_have_correct_area() {
        for m in [3usize, 4, 8] {
            let total: f64 = sphere_nodes(m, 6, 8).iter().map(|(_, w)| w).sum();
            assert!((total - sphere_area(m)).abs() < 1e-10 * sphere_area(m), "m={m} {total}");
            for (x, _) in sphere_nodes(m, 3, 4) {
                assert!((x.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-14);
            }
        }
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn polar_rule_integrates_a_gaussian() {
        // int exp(-|x|^2) over R^7 = pi^{7/2}
        let exact = PI.powf(3.5);
        let errs: Vec<f64> = PolarSpec::levels(1.0)
            .iter()
            .map(|spec| {
                let rule = Rule::Product(ProductRule::polar(1, &[0.0; 7], spec));
                let [v] = integrate::<1, _>(&rule, 7, |p, _| Ok([(-p.iter().map(|x| x * x).sum::<f64>()).exp()])).unwrap();
                (v - exact).abs() / exact
            })
            .collect();
        assert!(errs[0] < 1e-3 && errs[1] < 1e-4, "{errs:?}");
    }

    #[test]
    fn monte_carlo_rule_is_deterministic_and_unbiased() {
        let mc = MonteCarloRule {
            center: vec![0.0; 7],
            samples: 20_000,
            seed: 3,
            scale_q: 0.7,
            scale_w: 1.0,
        };
        let rule = Rule::MonteCarlo(mc);
        let f = |p: &[f64], _: &mut [f64]| Ok([(-p.iter().map(|x| x * x).sum::<f64>()).exp()]);
        let a = integrate::<1, _>(&rule, 7, f).unwrap();
        let b = integrate::<1, _>(&rule, 7, f).unwrap();
        assert_eq!(a, b);
        assert!((a[0] - PI.powf(3.5)).abs() < 0.1 * PI.powf(3.5), "{a:?}");
    }

    #[test]
    fn box_rule_is_exact_for_polynomials() {
        let lo = [-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let hi = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0];
        let rule = Rule::Product(ProductRule::boxed(1, &lo, &hi, 3));
        let [v] = integrate::<1, _>(&rule, 7, |p, _| Ok([p[0] * p[0] * p[6]])).unwrap();
        assert!((v - 2.0 / 3.0 * 2.0).abs() < 1e-13);
    }

    #[test]
    fn pairwise_sum_matches() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
    }

    fn extremal(n: usize) -> (HorizontalFrame<f64>, crate::yamabe::Phi<crate::yamabe::ExtremalH<f64>>) {
        let frame = crate::frame::build_frame_f64(n).unwrap();
        let params = ExtremalParams::centered(n, 1.0, 1.0).unwrap();
        (frame, phi_from_h(h_explicit(&params), homogeneous_dim(n)))
    }

    #[test]
    fn extremal_ratio_matches_integrated_equation() {
        // -c Delta Phi = S Phi^{2*-1} integrated against Phi gives
        // int |grad_H Phi|^2 = S int Phi^{2*} / c
        let (frame, phi) = extremal(1);
        let rule = Rule::Product(ProductRule::polar(1, &[0.0; 7], &PolarSpec::levels(1.0)[0]));
        let [num, den] = ratio_integrals(&frame, &phi, &rule).unwrap();
        let consts = crate::yamabe::YamabeConstants::new(1, 1.0, 1.0);
        let predicted = consts.s_theta * den / consts.laplacian_coeff();
        assert!((num - predicted).abs() < 1e-5 * num, "{num} {predicted}");
    }

    #[test]
    fn zero_perturbation_reproduces_base() {
        let (frame, phi) = extremal(1);
        let b = Bump::random(1, 0.5, 0.5, &mut ChaCha8Rng::seed_from_u64(1));
        let (lo, hi) = b.support();
        let rules: Vec<Rule> = [2, 3].iter().map(|&k| Rule::Product(ProductRule::boxed(1, &lo, &hi, k))).collect();
        let base = RatioEstimate {
            ratio: 1.0,
            error: 0.0,
            numerator: 2.0,
            numerator_error: 0.0,
            denominator: 3.0,
            denominator_error: 0.0,
            evaluations: 0,
        };
        let r = perturbed_ratio(&frame, &base, &phi, &b, 0.0, &rules).unwrap();
        assert_eq!(r.numerator, 2.0);
        assert_eq!(r.denominator, 3.0);
    }

    #[test]
    fn box_monte_carlo_integrates_constant() {
        let rule = Rule::BoxMonteCarlo(BoxMonteCarloRule {
            lo: vec![0.0; 7],
            hi: vec![2.0; 7],
            samples: 5000,
            seed: 9,
        });
        let [v] = integrate::<1, _>(&rule, 7, |_, _| Ok([1.0])).unwrap();
        assert!((v - 128.0).abs() < 1e-9);
    }

    #[test]
    fn non_integrable_input_detected() {
        let frame = crate::frame::build_frame_f64(1).unwrap();
        let u = Poly::constant(1.0, 7);
        let rules: Vec<Rule> = [6, 12]
            .iter()
            .map(|&radial| {
                let spec = PolarSpec {
                    radial,
                    polar: 3,
                    azimuth: 4,
                    scale_q: 1.0,
                    scale_w: 1.0,
                };
                Rule::Product(ProductRule::polar(1, &[0.0; 7], &spec))
            })
            .collect();
        assert!(matches!(
            folland_stein_ratio(&frame, &u, &rules),
            Err(QcError::NoConvergence(_))
        ));
    }
}
