//! Seeded randomness and relaxed / conditional-relaxed sampling.
//!
//! The generator is pinned so experiment output is reproducible bit-for-bit
//! across platforms: xoshiro256++ with SplitMix64 seed expansion, uniforms in
//! the open interval (0,1) by rejecting exact zeros of the 53-bit mantissa
//! draw, and Box–Muller (two uniforms per call, no caching) for normals.
//! Parallel streams are derived with [`Rng::fork`], which consumes one draw
//! from the parent and seeds a fresh generator from it.
//!
//! Sampling primitives cover the Bernoulli relaxation (logistic
//! reparameterization `z`, hard sample `b = H(z)`, conditional `z̃ ~ p(z|b)`)
//! and its categorical generalization (Gumbel perturbation, argmax action,
//! top-down conditional Gumbel). The conditional constructions reproduce the
//! marginal relaxed distribution only when the categorical sampler is fed
//! normalized log-probabilities; `log_softmax` the logits first.


use core::fmt;

use crate::linalg::Vector;
use crate::math;

/// Errors from the sampling primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleError {
    /// A uniform draw of exactly 0 or 1 would map to an infinite value.
    DegenerateUniform,
}

impl fmt::Display for SampleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleError::DegenerateUniform => {
                write!(f, "uniform draw must lie strictly inside (0, 1)")
            }
        }
    }
}

impl core::error::Error for SampleError {}

const TWO_POW_53: f64 = 9007199254740992.0;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// xoshiro256++ generator with SplitMix64 seed expansion.
#[derive(Clone, Debug)]
pub struct Rng {
    state: [u64; 4],
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let mut state = [0u64; 4];
        for word in &mut state {
            *word = splitmix64(&mut sm);
        }
        if state == [0, 0, 0, 0] {
            state[0] = 1;
        }
        Rng { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[0].wrapping_add(s[3]).rotate_left(23).wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Derives an independent child stream.
    ///
    /// Consumes exactly one `next_u64` from the parent and uses it as the
    /// child's seed, so the split points are themselves reproducible.
    pub fn fork(&mut self) -> Rng {
        Rng::new(self.next_u64())
    }

    /// Uniform draw in the open interval (0, 1).
    ///
    /// Takes the top 53 bits of a `next_u64`; exact zeros are rejected and
    /// redrawn, and `(2^53 - 1) / 2^53 < 1`, so neither endpoint can occur.
    pub fn uniform(&mut self) -> f64 {
        loop {
            let bits = self.next_u64() >> 11;
            if bits != 0 {
                return bits as f64 / TWO_POW_53;
            }
        }
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box–Muller; consumes two uniforms per call.
    pub fn normal(&mut self) -> f64 {
        let u = self.uniform();
        let v = self.uniform();
        math::sqrt(-2.0 * math::ln(u)) * math::cos(core::f64::consts::TAU * v)
    }
}

/// Softmax with max-shift for stability; output strictly positive.
pub fn softmax(logits: &[f64]) -> Vector {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vector = logits.iter().map(|&x| math::exp(x - m)).collect();
    let sum: f64 = out.iter().sum();
    out.scale(1.0 / sum);
    out
}

/// Log-softmax with max-shift for stability.
pub fn log_softmax(logits: &[f64]) -> Vector {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + math::ln(logits.iter().map(|&x| math::exp(x - m)).sum::<f64>());
    logits.iter().map(|&x| x - lse).collect()
}

fn check_open_unit(u: f64) -> Result<(), SampleError> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(SampleError::DegenerateUniform)
    }
}

/// Logistic reparameterization: `z = θ + log u − log(1−u)`.
///
/// `z ~ Logistic(θ, 1)`, so `P(z ≥ 0) = σ(θ)`.
pub fn logistic_reparam(theta: f64, u: f64) -> Result<f64, SampleError> {
    check_open_unit(u)?;
    Ok(theta + math::ln(u) - math::ln(1.0 - u))
}

/// Heaviside step: `true` iff `z ≥ 0`.
pub fn heaviside(z: f64) -> bool {
    z >= 0.0
}

/// Inverse-CDF sample of `Logistic(θ, 1)` truncated to the side selected by
/// the hard sample `b`: non-negative when `b` is set, negative otherwise.
pub fn conditional_logistic(theta: f64, b: bool, v: f64) -> Result<f64, SampleError> {
    check_open_unit(v)?;
    let p = math::sigmoid(theta);
    Ok(if b {
        theta + math::ln(1.0 - p + v * p) - math::ln(p * (1.0 - v))
    } else {
        theta + math::ln(v * (1.0 - p)) - math::ln(1.0 - v * (1.0 - p))
    })
}

/// Analytic `∂z̃/∂θ` of [`conditional_logistic`] at fixed `(b, v)`.
///
/// θ enters both directly and through `p = σ(θ)`; the closed forms are
/// `p·v / (1−p+vp)` for `b = 1` and `(1−p)(1−v) / (1−v(1−p))` for `b = 0`.
pub fn conditional_logistic_dtheta(theta: f64, b: bool, v: f64) -> f64 {
    let p = math::sigmoid(theta);
    if b {
        p * v / (1.0 - p + v * p)
    } else {
        (1.0 - p) * (1.0 - v) / (1.0 - v * (1.0 - p))
    }
}

/// Gumbel perturbation: `z_k = logits_k − log(−log u_k)`, action = argmax
/// (ties broken toward the lowest index).
pub fn gumbel_reparam(logits: &[f64], u: &[f64]) -> Result<(Vector, usize), SampleError> {
    assert_eq!(logits.len(), u.len(), "gumbel_reparam: length mismatch");
    assert!(!logits.is_empty(), "gumbel_reparam: empty logits");
    let mut z = Vector::zeros(logits.len());
    for (k, (&l, &uk)) in logits.iter().zip(u).enumerate() {
        check_open_unit(uk)?;
        z[k] = l - math::ln(-math::ln(uk));
    }
    let mut best = 0usize;
    for k in 1..z.len() {
        if z[k] > z[best] {
            best = k;
        }
    }
    Ok((z, best))
}

/// Top-down conditional Gumbel sample given the argmax `a`.
///
/// With `π = softmax(logits)`: `z̃_a = −log(−log v_a)` and for `k ≠ a`
/// `z̃_k = −log(−log(v_k)/π_k − log(v_a))`, a truncated Gumbel below `z̃_a`,
/// so `argmax(z̃) = a` always. Marginally consistent with [`gumbel_reparam`]
/// when `logits` are normalized log-probabilities.
pub fn conditional_gumbel(logits: &[f64], a: usize, v: &[f64]) -> Result<Vector, SampleError> {
    assert_eq!(logits.len(), v.len(), "conditional_gumbel: length mismatch");
    assert!(a < logits.len(), "conditional_gumbel: action out of range");
    let pis = softmax(logits);
    check_open_unit(v[a])?;
    let l_a = -math::ln(v[a]);
    let mut zt = Vector::zeros(logits.len());
    for k in 0..logits.len() {
        if k == a {
            zt[k] = -math::ln(l_a);
        } else {
            check_open_unit(v[k])?;
            let l_k = -math::ln(v[k]);
            zt[k] = -math::ln(l_k / pis[k] + l_a);
        }
    }
    Ok(zt)
}

/// Jacobian coefficients of [`conditional_gumbel`] with respect to the
/// logits, recovered from the sample itself.
///
/// Returns `r` with `r_a = 0` and `r_k = 1 − exp(z̃_k − z̃_a)` such that
/// `∂z̃_k/∂logit_j = r_k (δ_kj − π_j)`.
pub fn conditional_gumbel_dcoeffs(z_tilde: &[f64], a: usize) -> Vector {
    let za = z_tilde[a];
    z_tilde
        .iter()
        .enumerate()
        .map(|(k, &zk)| if k == a { 0.0 } else { 1.0 - math::exp(zk - za) })
        .collect()
}

/// One Bernoulli relaxed draw: uniforms, relaxed sample, hard sample and
/// conditional relaxed sample.
#[derive(Clone, Debug)]
pub struct BernoulliRelaxedSample {
    pub u: f64,
    pub v: f64,
    pub z: f64,
    pub b: bool,
    pub z_tilde: f64,
}

/// Draws `u`, then `v`, and assembles `(z, b, z̃)` for the logit `theta`.
pub fn sample_bernoulli_relaxed(theta: f64, rng: &mut Rng) -> BernoulliRelaxedSample {
    let u = rng.uniform();
    let v = rng.uniform();
    bernoulli_relaxed_from_uniforms(theta, u, v).expect("open-interval uniforms")
}

/// Deterministic core of [`sample_bernoulli_relaxed`] for replaying cached
/// uniforms.
pub fn bernoulli_relaxed_from_uniforms(
    theta: f64,
    u: f64,
    v: f64,
) -> Result<BernoulliRelaxedSample, SampleError> {
    let z = logistic_reparam(theta, u)?;
    let b = heaviside(z);
    let z_tilde = conditional_logistic(theta, b, v)?;
    Ok(BernoulliRelaxedSample { u, v, z, b, z_tilde })
}

/// One categorical relaxed draw.
#[derive(Clone, Debug)]
pub struct CategoricalRelaxedSample {
    pub u: Vector,
    pub v: Vector,
    pub z: Vector,
    pub action: usize,
    pub z_tilde: Vector,
}

/// Draws the `u` vector, then the `v` vector, and assembles
/// `(z, action, z̃)`. Feed normalized log-probabilities for marginal
/// consistency of the conditional sample.
pub fn sample_categorical_relaxed(log_probs: &[f64], rng: &mut Rng) -> CategoricalRelaxedSample {
    let n = log_probs.len();
    let u: Vector = (0..n).map(|_| rng.uniform()).collect();
    let v: Vector = (0..n).map(|_| rng.uniform()).collect();
    let (z, action) = gumbel_reparam(log_probs, &u).expect("open-interval uniforms");
    let z_tilde = conditional_gumbel(log_probs, action, &v).expect("open-interval uniforms");
    CategoricalRelaxedSample { u, v, z, action, z_tilde }
}
