//! Gradient estimators for the synthetic Bernoulli problem and a continuous
//! demo: REINFORCE, LAX, RELAX, their closed-form oracles, and the
//! surrogate variance-objective gradient that drives control-variate
//! training.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::kfac::{clip_update, KfacError, KfacLayerState, TrustRegion};
use crate::linalg::{Matrix, Vector};
use crate::math;
use crate::mlp::{Activation, ForwardTrace, Mlp, TangentTrace};
use crate::optim::{adam_step, AdamState};
use crate::sample::{
    bernoulli_relaxed_from_uniforms, conditional_logistic_dtheta, Rng, SampleError,
};

/// Errors from estimator assembly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EstimatorError {
    /// The estimate was produced without surrogate internals (REINFORCE or a
    /// closed-form control variate), so no variance gradient exists.
    MissingInternals,
    Sample(SampleError),
}

impl fmt::Display for EstimatorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorError::MissingInternals => {
                write!(f, "estimate carries no surrogate internals")
            }
            EstimatorError::Sample(e) => write!(f, "sampling failed: {e}"),
        }
    }
}

impl core::error::Error for EstimatorError {}

impl From<SampleError> for EstimatorError {
    fn from(e: SampleError) -> Self {
        EstimatorError::Sample(e)
    }
}

/// The synthetic problem: minimize `E_{p(b|σ(θ))}[(b − t)²]`.
#[derive(Clone, Copy, Debug)]
pub struct ToyProblem {
    pub theta: f64,
    pub t: f64,
}

impl ToyProblem {
    pub fn new(theta: f64, t: f64) -> Self {
        assert!(t > 0.0 && t < 1.0, "target must lie in (0, 1)");
        ToyProblem { theta, t }
    }
}

/// Closed-form expected loss `p(1−t)² + (1−p)t²` with `p = σ(θ)`.
pub fn expected_toy_loss(theta: f64, t: f64) -> f64 {
    let p = math::sigmoid(theta);
    p * (1.0 - t) * (1.0 - t) + (1.0 - p) * t * t
}

/// Exact gradient `σ(θ)(1−σ(θ))(1−2t)` of the expected loss.
pub fn true_toy_grad(theta: f64, t: f64) -> f64 {
    let p = math::sigmoid(theta);
    p * (1.0 - p) * (1.0 - 2.0 * t)
}

#[inline]
fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// One surrogate evaluation retained for the variance-objective gradient:
/// the primal/tangent traces plus this point's coefficients in `∇_φ ĝ`
/// (`backward_weight` multiplies `∇_φ c`, `tangent_weight` multiplies
/// `∇_φ ẏ`).
#[derive(Clone, Debug)]
pub struct EvalPoint {
    pub trace: ForwardTrace,
    pub ttrace: TangentTrace,
    pub backward_weight: f64,
    pub tangent_weight: f64,
}

/// Surrogate internals of a single-sample estimate.
#[derive(Clone, Debug)]
pub struct ScalarInternals {
    pub score: f64,
    pub points: Vec<EvalPoint>,
}

/// A single-sample gradient estimate for a scalar parameter.
#[derive(Clone, Debug)]
pub struct GradEstimate {
    pub g_theta: f64,
    pub internals: Option<ScalarInternals>,
}

/// Single-sample REINFORCE on the toy problem:
/// `ĝ = (b−t)²·(b − σ(θ))`.
pub fn reinforce_toy(theta: f64, t: f64, rng: &mut Rng) -> GradEstimate {
    reinforce_toy_from_uniform(theta, t, rng.uniform()).expect("open-interval uniform")
}

/// Deterministic core of [`reinforce_toy`] for replaying cached uniforms.
pub fn reinforce_toy_from_uniform(theta: f64, t: f64, u: f64) -> Result<GradEstimate, SampleError> {
    let z = crate::sample::logistic_reparam(theta, u)?;
    let b = crate::sample::heaviside(z);
    let score = bit(b) - math::sigmoid(theta);
    let f = (bit(b) - t) * (bit(b) - t);
    Ok(GradEstimate {
        g_theta: f * score,
        internals: None,
    })
}

/// Single-sample RELAX estimate on the toy problem.
///
/// Draws `(u, v)`, forms `z`, `b = H(z)`, `z̃`, and assembles
/// `ĝ = [f(b) − c(z̃)]·(b − σ(θ)) + ∂_θ c(z) − ∂_θ c(z̃)` with the pathwise
/// terms computed by tangent propagation (`∂z/∂θ = 1`, `∂z̃/∂θ` analytic).
/// The traces are retained for [`variance_objective_grad`].
pub fn relax_toy_estimate(theta: f64, t: f64, surrogate: &Mlp, rng: &mut Rng) -> GradEstimate {
    let u = rng.uniform();
    let v = rng.uniform();
    relax_toy_from_uniforms(theta, t, surrogate, u, v).expect("open-interval uniforms")
}

/// Deterministic core of [`relax_toy_estimate`] for replaying cached
/// uniforms.
pub fn relax_toy_from_uniforms(
    theta: f64,
    t: f64,
    surrogate: &Mlp,
    u: f64,
    v: f64,
) -> Result<GradEstimate, SampleError> {
    assert_eq!(surrogate.in_dim(), 1, "toy surrogate takes scalar input");
    let s = bernoulli_relaxed_from_uniforms(theta, u, v)?;
    let score = bit(s.b) - math::sigmoid(theta);
    let f = (bit(s.b) - t) * (bit(s.b) - t);
    let dzt_dtheta = conditional_logistic_dtheta(theta, s.b, v);

    let (trace_z, ttrace_z) = surrogate.forward_tangent(&[s.z], &[1.0]);
    let (trace_zt, ttrace_zt) = surrogate.forward_tangent(&[s.z_tilde], &[dzt_dtheta]);
    let c_zt = trace_zt.output_scalar();
    let g_theta =
        (f - c_zt) * score + ttrace_z.output_scalar() - ttrace_zt.output_scalar();
    Ok(GradEstimate {
        g_theta,
        internals: Some(ScalarInternals {
            score,
            points: vec![
                EvalPoint {
                    trace: trace_z,
                    ttrace: ttrace_z,
                    backward_weight: 0.0,
                    tangent_weight: 1.0,
                },
                EvalPoint {
                    trace: trace_zt,
                    ttrace: ttrace_zt,
                    backward_weight: -score,
                    tangent_weight: -1.0,
                },
            ],
        }),
    })
}

/// Control variate for the continuous LAX demo.
pub enum ControlVariate<'a> {
    /// Learned surrogate; internals are retained so the variance gradient
    /// can train it.
    Surrogate(&'a Mlp),
    /// Closed-form `c` and its derivative (for the `c = f` reparam check).
    Closed {
        c: &'a dyn Fn(f64) -> f64,
        dc: &'a dyn Fn(f64) -> f64,
    },
}

/// Single-sample LAX on the continuous demo `x = θ + ε`, `ε ~ N(0,1)`:
/// `ĝ = [f(x) − c(x)]·ε + ∂_θ c(x)` (the Gaussian score of `x` is `ε`).
pub fn lax_estimate(
    theta: f64,
    f: &dyn Fn(f64) -> f64,
    cv: &ControlVariate<'_>,
    rng: &mut Rng,
) -> GradEstimate {
    lax_estimate_from_noise(theta, f, cv, rng.normal())
}

/// Deterministic core of [`lax_estimate`] at a fixed noise draw.
pub fn lax_estimate_from_noise(
    theta: f64,
    f: &dyn Fn(f64) -> f64,
    cv: &ControlVariate<'_>,
    eps: f64,
) -> GradEstimate {
    let x = theta + eps;
    match cv {
        ControlVariate::Closed { c, dc } => GradEstimate {
            g_theta: (f(x) - c(x)) * eps + dc(x),
            internals: None,
        },
        ControlVariate::Surrogate(mlp) => {
            assert_eq!(mlp.in_dim(), 1, "demo surrogate takes scalar input");
            let (trace, ttrace) = mlp.forward_tangent(&[x], &[1.0]);
            let c_x = trace.output_scalar();
            let g_theta = (f(x) - c_x) * eps + ttrace.output_scalar();
            GradEstimate {
                g_theta,
                internals: Some(ScalarInternals {
                    score: eps,
                    points: vec![EvalPoint {
                        trace,
                        ttrace,
                        backward_weight: -eps,
                        tangent_weight: 1.0,
                    }],
                }),
            }
        }
    }
}

/// KFAC statistics from one surrogate forward instance: the per-layer
/// homogeneous inputs and the total pre-activation gradients of the
/// variance loss at that instance.
#[derive(Clone, Debug)]
pub struct InstanceStats {
    pub activations: Vec<Vector>,
    pub pre_grads: Vec<Vector>,
}

/// Exact `∇_φ(ĝ²)` plus the per-instance factor statistics.
#[derive(Clone, Debug)]
pub struct VarianceGrad {
    pub grads: Vec<Matrix>,
    pub instances: Vec<InstanceStats>,
}

impl VarianceGrad {
    pub fn zeros(mlp: &Mlp) -> Self {
        VarianceGrad {
            grads: mlp.zero_grads(),
            instances: Vec::new(),
        }
    }

    /// Per-layer `(a, g)` pairs across all instances.
    pub fn layer_pairs(&self, layer: usize) -> Vec<(Vector, Vector)> {
        self.instances
            .iter()
            .map(|inst| (inst.activations[layer].clone(), inst.pre_grads[layer].clone()))
            .collect()
    }
}

/// Exact gradient of the single-sample variance objective `ĝ²` with respect
/// to every surrogate weight: `2·ĝ·∇_φ ĝ`, assembled from the retained
/// traces via plain backward (score-coefficient term) and double backprop
/// (pathwise terms).
pub fn variance_objective_grad(
    estimate: &GradEstimate,
    surrogate: &Mlp,
) -> Result<VarianceGrad, EstimatorError> {
    let internals = estimate
        .internals
        .as_ref()
        .ok_or(EstimatorError::MissingInternals)?;
    let two_g = 2.0 * estimate.g_theta;
    let mut grads = surrogate.zero_grads();
    let mut instances = Vec::with_capacity(internals.points.len());
    for point in &internals.points {
        let mut pre_grads: Vec<Vector> = point
            .trace
            .pre
            .iter()
            .map(|s| Vector::zeros(s.len()))
            .collect();
        let bw = two_g * point.backward_weight;
        if bw != 0.0 {
            let res = surrogate.backward(&point.trace, &[bw]);
            for l in 0..grads.len() {
                grads[l].add_scaled(&res.grads[l], 1.0);
                pre_grads[l].add_scaled(&res.pre_grads[l], 1.0);
            }
        }
        let tw = two_g * point.tangent_weight;
        if tw != 0.0 {
            let res = surrogate.backward_over_tangent(&point.trace, &point.ttrace, &[tw]);
            for l in 0..grads.len() {
                grads[l].add_scaled(&res.grads[l], 1.0);
                pre_grads[l].add_scaled(&res.primal_pre_grads[l], 1.0);
            }
        }
        instances.push(InstanceStats {
            activations: point.trace.inputs.clone(),
            pre_grads,
        });
    }
    Ok(VarianceGrad { grads, instances })
}

/// Optimizer applied to the surrogate's variance gradient: Adam for RELAX,
/// damped Kronecker-factored natural steps for the KF variants.
pub enum SurrogateOptimizer {
    Adam {
        states: Vec<AdamState>,
        lr: f64,
    },
    Kfac {
        states: Vec<KfacLayerState>,
        lr: f64,
        trust: TrustRegion,
        /// Replaces both factor inverses with identities before every step;
        /// the natural step then reproduces plain SGD bit-for-bit.
        identity_factors: bool,
    },
}

impl SurrogateOptimizer {
    pub fn adam(mlp: &Mlp, lr: f64) -> Self {
        SurrogateOptimizer::Adam {
            states: mlp
                .layers()
                .iter()
                .map(|w| AdamState::new(w.rows() * w.cols()))
                .collect(),
            lr,
        }
    }

    pub fn kfac(
        mlp: &Mlp,
        lr: f64,
        decay: f64,
        damping: f64,
        inverse_period: usize,
        trust: TrustRegion,
    ) -> Self {
        SurrogateOptimizer::Kfac {
            states: mlp
                .layers()
                .iter()
                .map(|w| KfacLayerState::new(w.rows(), w.cols(), decay, damping, inverse_period))
                .collect(),
            lr,
            trust,
            identity_factors: false,
        }
    }

    pub fn force_identity_factors(&mut self, on: bool) {
        if let SurrogateOptimizer::Kfac { identity_factors, .. } = self {
            *identity_factors = on;
        }
    }

    pub fn kfac_states(&self) -> Option<&[KfacLayerState]> {
        match self {
            SurrogateOptimizer::Kfac { states, .. } => Some(states),
            _ => None,
        }
    }

    /// Applies one update from a single-sample variance gradient,
    /// accumulating each instance into the factor statistics in KFAC mode.
    pub fn step_single(&mut self, mlp: &mut Mlp, var_grad: &VarianceGrad) -> Result<(), KfacError> {
        match self {
            SurrogateOptimizer::Adam { states, lr } => {
                for (l, state) in states.iter_mut().enumerate() {
                    adam_step(state, mlp.layer_mut(l).data_mut(), var_grad.grads[l].data(), *lr);
                }
                Ok(())
            }
            SurrogateOptimizer::Kfac {
                states,
                lr,
                trust,
                identity_factors,
            } => {
                for (l, state) in states.iter_mut().enumerate() {
                    for inst in &var_grad.instances {
                        state.accumulate(&inst.activations[l], &inst.pre_grads[l]);
                    }
                }
                kfac_apply(states, mlp, &var_grad.grads, *lr, trust, *identity_factors)
            }
        }
    }

    /// Applies one update from batch-averaged gradients, folding the batch's
    /// `(a, g)` pairs into the factors with a single EMA application per
    /// layer.
    pub fn step_batch(
        &mut self,
        mlp: &mut Mlp,
        grads: &[Matrix],
        pairs: &[Vec<(Vector, Vector)>],
    ) -> Result<(), KfacError> {
        match self {
            SurrogateOptimizer::Adam { states, lr } => {
                for (l, state) in states.iter_mut().enumerate() {
                    adam_step(state, mlp.layer_mut(l).data_mut(), grads[l].data(), *lr);
                }
                Ok(())
            }
            SurrogateOptimizer::Kfac {
                states,
                lr,
                trust,
                identity_factors,
            } => {
                for (l, state) in states.iter_mut().enumerate() {
                    if !pairs[l].is_empty() {
                        state.accumulate_mean(&pairs[l]);
                    }
                }
                kfac_apply(states, mlp, grads, *lr, trust, *identity_factors)
            }
        }
    }
}

fn kfac_apply(
    states: &mut [KfacLayerState],
    mlp: &mut Mlp,
    grads: &[Matrix],
    lr: f64,
    trust: &TrustRegion,
    identity_factors: bool,
) -> Result<(), KfacError> {
    for (l, state) in states.iter_mut().enumerate() {
        if identity_factors {
            state.force_identity_inverses();
        } else if state.needs_refresh() {
            state.refresh_inverses()?;
        }
        let mut delta = state.natural_step(&grads[l])?;
        delta.scale(lr);
        let update = clip_update(&delta, trust);
        let w = mlp.layer_mut(l);
        for (p, d) in w.data_mut().iter_mut().zip(update.data()) {
            *p -= d;
        }
    }
    Ok(())
}

/// Which estimator drives the synthetic-problem optimization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ToyEstimatorKind {
    Reinforce,
    Relax,
    KfRelax,
}

/// Hyperparameters for the synthetic-problem training loop.
#[derive(Clone, Debug)]
pub struct ToyConfig {
    pub t: f64,
    /// Adam rate on θ.
    pub lr_theta: f64,
    /// Surrogate rate (Adam for RELAX, natural step size for KF-RELAX).
    pub lr_surrogate: f64,
    pub hidden: usize,
    pub activation: Activation,
    pub decay: f64,
    pub damping: f64,
    pub inverse_period: usize,
    pub trust_bound: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            t: 0.499,
            lr_theta: 0.03,
            lr_surrogate: 0.01,
            hidden: 10,
            activation: Activation::Tanh,
            decay: 0.95,
            // Early in training the S factor can be nearly zero, which makes
            // an undamped natural step enormous; the grid's strongest
            // damping plus a capped update keeps every seed stable.
            damping: 0.1,
            inverse_period: 20,
            trust_bound: 1e-3,
        }
    }
}

/// Synthetic-problem training state: θ under Adam, surrogate under the
/// configured optimizer, single sample per iteration.
pub struct ToyTrainer {
    pub kind: ToyEstimatorKind,
    pub cfg: ToyConfig,
    pub theta: f64,
    theta_adam: AdamState,
    pub surrogate: Option<Mlp>,
    surrogate_opt: Option<SurrogateOptimizer>,
    steps: usize,
}

impl ToyTrainer {
    pub fn new(kind: ToyEstimatorKind, cfg: ToyConfig, rng: &mut Rng) -> Self {
        assert!(cfg.t > 0.0 && cfg.t < 1.0, "target must lie in (0, 1)");
        let (surrogate, surrogate_opt) = match kind {
            ToyEstimatorKind::Reinforce => (None, None),
            ToyEstimatorKind::Relax => {
                let mlp = Mlp::new(&[1, cfg.hidden, cfg.hidden, 1], cfg.activation, rng);
                let opt = SurrogateOptimizer::adam(&mlp, cfg.lr_surrogate);
                (Some(mlp), Some(opt))
            }
            ToyEstimatorKind::KfRelax => {
                let mlp = Mlp::new(&[1, cfg.hidden, cfg.hidden, 1], cfg.activation, rng);
                let opt = SurrogateOptimizer::kfac(
                    &mlp,
                    cfg.lr_surrogate,
                    cfg.decay,
                    cfg.damping,
                    cfg.inverse_period,
                    if cfg.trust_bound.is_finite() {
                        TrustRegion::new(cfg.trust_bound)
                    } else {
                        TrustRegion::unbounded()
                    },
                );
                (Some(mlp), Some(opt))
            }
        };
        ToyTrainer {
            kind,
            cfg,
            theta: 0.0,
            theta_adam: AdamState::new(1),
            surrogate,
            surrogate_opt,
            steps: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// A single-sample estimate at the current parameters, without mutating
    /// trainer state (used by variance measurement on a forked stream).
    pub fn single_estimate(&self, rng: &mut Rng) -> f64 {
        match self.kind {
            ToyEstimatorKind::Reinforce => reinforce_toy(self.theta, self.cfg.t, rng).g_theta,
            _ => {
                relax_toy_estimate(
                    self.theta,
                    self.cfg.t,
                    self.surrogate.as_ref().expect("relax has a surrogate"),
                    rng,
                )
                .g_theta
            }
        }
    }

    /// One full iteration: draw a sample, step the surrogate on `∇_φ ĝ²`,
    /// then step θ by Adam on `ĝ`.
    pub fn step(&mut self, rng: &mut Rng) -> Result<f64, KfacError> {
        let g_theta = match self.kind {
            ToyEstimatorKind::Reinforce => reinforce_toy(self.theta, self.cfg.t, rng).g_theta,
            _ => {
                let est = relax_toy_estimate(
                    self.theta,
                    self.cfg.t,
                    self.surrogate.as_ref().expect("relax has a surrogate"),
                    rng,
                );
                self.surrogate_update(&est)?;
                est.g_theta
            }
        };
        let mut theta = [self.theta];
        adam_step(&mut self.theta_adam, &mut theta, &[g_theta], self.cfg.lr_theta);
        self.theta = theta[0];
        self.steps += 1;
        Ok(g_theta)
    }

    /// Surrogate-only iteration at frozen θ.
    pub fn surrogate_step_only(&mut self, rng: &mut Rng) -> Result<(), KfacError> {
        let est = relax_toy_estimate(
            self.theta,
            self.cfg.t,
            self.surrogate.as_ref().expect("relax has a surrogate"),
            rng,
        );
        self.surrogate_update(&est)
    }

    fn surrogate_update(&mut self, est: &GradEstimate) -> Result<(), KfacError> {
        let mlp = self.surrogate.as_mut().expect("relax has a surrogate");
        let var_grad = variance_objective_grad(est, mlp).expect("relax estimate has internals");
        self.surrogate_opt
            .as_mut()
            .expect("relax has an optimizer")
            .step_single(mlp, &var_grad)
    }
}
