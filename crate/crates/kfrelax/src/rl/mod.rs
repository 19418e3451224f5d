//! Discrete-action policy-gradient machinery: categorical softmax policies,
//! trajectory collection with relaxed-sample recording, the RL RELAX
//! gradient and its surrogate variance gradient, and the combined
//! policy/surrogate update.
//!
//! Per-step estimator weights carry the discount-to-step factor γᵗ (the
//! discounted-visitation weighting of the policy gradient theorem), which
//! makes the estimator unbiased for the exact discounted objective that the
//! tabular oracles compute.

pub mod tabular;

use alloc::vec::Vec;
use core::fmt;

use crate::envs::{EnvError, Environment};
use crate::estimators::{InstanceStats, SurrogateOptimizer, VarianceGrad};
use crate::kfac::TrustRegion;
use crate::linalg::{Matrix, Vector};

use crate::mlp::{Activation, ForwardTrace, Mlp};
use crate::optim::{adam_step, AdamState};
use crate::sample::{
    conditional_gumbel_dcoeffs, log_softmax, sample_categorical_relaxed, softmax, Rng,
};

/// Errors from the RL update path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RlError {
    EmptyBatch,
    /// Estimate carries no surrogate internals.
    MissingInternals,
    Env(EnvError),
    Kfac(crate::kfac::KfacError),
}

impl fmt::Display for RlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RlError::EmptyBatch => write!(f, "update needs at least one trajectory"),
            RlError::MissingInternals => write!(f, "estimate carries no surrogate internals"),
            RlError::Env(e) => write!(f, "environment error: {e}"),
            RlError::Kfac(e) => write!(f, "curvature error: {e}"),
        }
    }
}

impl core::error::Error for RlError {}

impl From<EnvError> for RlError {
    fn from(e: EnvError) -> Self {
        RlError::Env(e)
    }
}

impl From<crate::kfac::KfacError> for RlError {
    fn from(e: crate::kfac::KfacError) -> Self {
        RlError::Kfac(e)
    }
}

/// Categorical softmax policy over the logits of an [`Mlp`].
#[derive(Clone, Debug)]
pub struct Policy {
    pub net: Mlp,
}

impl Policy {
    pub fn new(net: Mlp) -> Self {
        Policy { net }
    }

    /// Forward pass at an observation; the trace output is the raw logits.
    pub fn logits(&self, obs: &[f64]) -> ForwardTrace {
        self.net.forward(obs)
    }

    pub fn n_actions(&self) -> usize {
        self.net.out_dim()
    }
}

/// One recorded environment step with the relaxed samples and uniforms
/// needed to recompute every gradient term exactly.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub obs: Vector,
    pub action: usize,
    pub reward: f64,
    pub z: Vector,
    pub z_tilde: Vector,
    pub log_pi: f64,
    pub u: Vector,
    pub v: Vector,
}

/// A complete episode.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

/// Training hyperparameters for the RL estimators.
#[derive(Clone, Debug)]
pub struct RlConfig {
    pub gamma: f64,
    pub entropy_weight: f64,
    pub lr_policy: f64,
    pub lr_surrogate: f64,
    pub damping: f64,
    pub trust_bound: f64,
    /// Episodes per update.
    pub batch_episodes: usize,
    pub decay: f64,
    pub inverse_period: usize,
    pub policy_hidden: usize,
    pub surrogate_hidden: usize,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            gamma: 0.99,
            entropy_weight: 0.01,
            lr_policy: 0.01,
            lr_surrogate: 1e-3,
            damping: 0.01,
            trust_bound: 1e-3,
            batch_episodes: 4,
            decay: 0.95,
            inverse_period: 1,
            policy_hidden: 32,
            surrogate_hidden: 32,
        }
    }
}

/// Runs one episode: actions are sampled by Gumbel perturbation of the
/// normalized log-probabilities, the conditional relaxed sample is drawn per
/// step, and all uniforms are cached.
pub fn rollout<E: Environment>(env: &mut E, policy: &Policy, rng: &mut Rng) -> Trajectory {
    let mut obs = env.reset(rng);
    let mut steps = Vec::new();
    loop {
        let trace = policy.logits(&obs);
        let lp = log_softmax(trace.output());
        let sample = sample_categorical_relaxed(&lp, rng);
        let result = env
            .step(sample.action)
            .expect("rollout stepped a finished episode");
        steps.push(StepRecord {
            obs,
            action: sample.action,
            reward: result.reward,
            log_pi: lp[sample.action],
            z: sample.z,
            z_tilde: sample.z_tilde,
            u: sample.u,
            v: sample.v,
        });
        obs = result.observation;
        if result.done {
            break;
        }
    }
    Trajectory { steps }
}

/// Discounted suffix sums `Q̂_t = Σ_{k≥t} γ^{k−t} r_k`.
pub fn reward_to_go(rewards: &[f64], gamma: f64) -> Vector {
    assert!((0.0..=1.0).contains(&gamma), "gamma must lie in [0, 1]");
    let mut out = Vector::zeros(rewards.len());
    let mut acc = 0.0;
    for (i, &r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        out[i] = acc;
    }
    out
}

/// Entropy of the softmax distribution and its exact gradient with respect
/// to the logits: `∂H/∂logit_j = −π_j(log π_j + H)`.
pub fn entropy_bonus(logits: &[f64]) -> (f64, Vector) {
    let pis = softmax(logits);
    let lp = log_softmax(logits);
    let h: f64 = -pis.iter().zip(lp.iter()).map(|(p, l)| p * l).sum::<f64>();
    let grad: Vector = pis
        .iter()
        .zip(lp.iter())
        .map(|(p, l)| -p * (l + h))
        .collect();
    (h, grad)
}

/// Per-step internals retained for the surrogate variance gradient.
#[derive(Clone, Debug)]
struct RlStepInternals {
    trace_z: ForwardTrace,
    trace_zt: ForwardTrace,
    pis: Vector,
    dcoeffs: Vector,
    gamma_pow: f64,
}

/// A gradient estimate over all policy weights.
#[derive(Clone, Debug)]
pub struct RlGradEstimate {
    pub grads: Vec<Matrix>,
    internals: Option<Vec<RlStepInternals>>,
}

impl RlGradEstimate {
    /// `Σ_l ‖ĝ_l‖²_F` — the squared norm the variance objective measures.
    pub fn squared_norm(&self) -> f64 {
        self.grads.iter().map(|g| {
            let n = g.frobenius_norm();
            n * n
        }).sum()
    }

    /// Flattens per-layer gradients in layer order (row-major within each).
    pub fn flatten(&self) -> Vector {
        let mut out = Vec::new();
        for g in &self.grads {
            out.extend_from_slice(g.data());
        }
        Vector::from(out)
    }
}

fn surrogate_input(obs: &[f64], z: &[f64]) -> Vector {
    let mut x = Vector::from_slice(obs);
    for &zk in z {
        x.push(zk);
    }
    x
}

fn relax_rl_gradient_inner(
    traj: &Trajectory,
    policy: &Policy,
    surrogate: Option<&Mlp>,
    cfg: &RlConfig,
) -> RlGradEstimate {
    assert!(!traj.is_empty(), "gradient of an empty trajectory");
    let n_actions = policy.n_actions();
    let rewards: Vec<f64> = traj.steps.iter().map(|s| s.reward).collect();
    let rtg = reward_to_go(&rewards, cfg.gamma);
    let mut grads = policy.net.zero_grads();
    let mut internals = surrogate.map(|_| Vec::with_capacity(traj.len()));
    let mut gamma_pow = 1.0;
    for (t, step) in traj.steps.iter().enumerate() {
        let trace = policy.logits(&step.obs);
        let pis = softmax(trace.output());
        let mut coef = rtg[t];
        let mut dlogits = Vector::zeros(n_actions);
        if let Some(c) = surrogate {
            let x_z = surrogate_input(&step.obs, &step.z);
            let x_zt = surrogate_input(&step.obs, &step.z_tilde);
            let trace_z = c.forward(&x_z);
            let trace_zt = c.forward(&x_zt);
            coef -= trace_zt.output_scalar();

            // Pathwise terms flow through z and z̃ into the normalized
            // log-probabilities and thence the raw logits. For
            // z = log_softmax(raw) + Gumbel the adjoint of q = ∂c/∂z is
            // q_j − π_j·Σq; for the conditional sample the Jacobian
            // coefficients r give r_j·q̃_j − π_j·Σ_k r_k q̃_k.
            let obs_dim = step.obs.len();
            let q_full = c.input_gradient(&trace_z, &[1.0]);
            let qt_full = c.input_gradient(&trace_zt, &[1.0]);
            let q = &q_full[obs_dim..];
            let qt = &qt_full[obs_dim..];
            let dcoeffs = conditional_gumbel_dcoeffs(&step.z_tilde, step.action);
            let q_sum: f64 = q.iter().sum();
            let rq_sum: f64 = dcoeffs.iter().zip(qt).map(|(r, x)| r * x).sum();
            for j in 0..n_actions {
                dlogits[j] += q[j] - pis[j] * q_sum;
                dlogits[j] -= dcoeffs[j] * qt[j] - pis[j] * rq_sum;
            }
            internals.as_mut().unwrap().push(RlStepInternals {
                trace_z,
                trace_zt,
                pis: pis.clone(),
                dcoeffs,
                gamma_pow,
            });
        }
        for j in 0..n_actions {
            let score = if j == step.action { 1.0 - pis[j] } else { -pis[j] };
            dlogits[j] += coef * score;
        }
        if cfg.entropy_weight != 0.0 {
            let (_, ent_grad) = entropy_bonus(trace.output());
            dlogits.add_scaled(&ent_grad, cfg.entropy_weight);
        }
        dlogits.scale(gamma_pow);
        let bw = policy.net.backward(&trace, &dlogits);
        for l in 0..grads.len() {
            grads[l].add_scaled(&bw.grads[l], 1.0);
        }
        gamma_pow *= cfg.gamma;
    }
    RlGradEstimate { grads, internals }
}

/// The RELAX policy-gradient estimate of one trajectory:
/// `Σ_t γᵗ·(∂logπ(a_t|s_t)·[Q̂_t − c(z̃_t,s_t)] − ∂c(z̃_t,s_t) + ∂c(z_t,s_t))`
/// plus the entropy-bonus gradient weighted by `entropy_weight`.
///
/// Internals are retained for [`surrogate_variance_gradient`].
pub fn relax_rl_gradient(
    traj: &Trajectory,
    policy: &Policy,
    surrogate: &Mlp,
    cfg: &RlConfig,
) -> RlGradEstimate {
    relax_rl_gradient_inner(traj, policy, Some(surrogate), cfg)
}

/// REINFORCE with reward-to-go (the `c ≡ 0` collapse of the RELAX
/// estimator), same discount weighting and entropy handling.
pub fn reinforce_rl_gradient(traj: &Trajectory, policy: &Policy, cfg: &RlConfig) -> RlGradEstimate {
    relax_rl_gradient_inner(traj, policy, None, cfg)
}

/// Exact `∇_φ ‖ĝ‖²` for one trajectory's estimate, plus the per-instance
/// KFAC statistics.
///
/// For each step the estimate direction `u = ĝ` enters through the policy
/// weight-tangent of the logits, which gives the tangents of `z` and `z̃`
/// analytically; the three per-step terms are then one plain backward at
/// `z̃` (score-coefficient path) and two double-backprops (pathwise terms).
pub fn surrogate_variance_gradient(
    traj: &Trajectory,
    estimate: &RlGradEstimate,
    policy: &Policy,
    surrogate: &Mlp,
) -> Result<VarianceGrad, RlError> {
    let internals = estimate.internals.as_ref().ok_or(RlError::MissingInternals)?;
    assert_eq!(internals.len(), traj.len(), "internals mismatch trajectory");
    let mut grads = surrogate.zero_grads();
    let mut instances = Vec::with_capacity(2 * traj.len());
    let obs_dim = traj.steps.first().map(|s| s.obs.len()).unwrap_or(0);
    for (step, intern) in traj.steps.iter().zip(internals) {
        let (_, rawdot) = policy.net.forward_weight_tangent(&step.obs, &estimate.grads);
        // u·∇logπ(a_t|s_t) = (e_a − π)·rawdot; tangent of the normalized
        // log-probabilities is the centered rawdot.
        let pis = &intern.pis;
        let pi_raw: f64 = pis.iter().zip(rawdot.iter()).map(|(p, d)| p * d).sum();
        let u_score = rawdot[step.action] - pi_raw;
        let zdot: Vector = rawdot.iter().map(|d| d - pi_raw).collect();
        let pi_zdot: f64 = pis.iter().zip(zdot.iter()).map(|(p, d)| p * d).sum();
        let ztdot: Vector = intern
            .dcoeffs
            .iter()
            .zip(zdot.iter())
            .map(|(r, d)| r * (d - pi_zdot))
            .collect();

        let mut xdot_z = Vector::zeros(obs_dim);
        for &d in zdot.iter() {
            xdot_z.push(d);
        }
        let mut xdot_zt = Vector::zeros(obs_dim);
        for &d in ztdot.iter() {
            xdot_zt.push(d);
        }
        let w = 2.0 * intern.gamma_pow;

        // Score-coefficient term: −u·ψ_t · ∇_φ c(z̃_t, s_t).
        let bw = surrogate.backward(&intern.trace_zt, &[-w * u_score]);
        // Pathwise terms: +∇_φ⟨u, ∂_θ c(z_t)⟩ − ∇_φ⟨u, ∂_θ c(z̃_t)⟩.
        let ttrace_z = surrogate.tangent_from_trace(&intern.trace_z, &xdot_z);
        let db_z = surrogate.backward_over_tangent(&intern.trace_z, &ttrace_z, &[w]);
        let ttrace_zt = surrogate.tangent_from_trace(&intern.trace_zt, &xdot_zt);
        let db_zt = surrogate.backward_over_tangent(&intern.trace_zt, &ttrace_zt, &[-w]);

        let mut zt_pre_grads = Vec::with_capacity(grads.len());
        for l in 0..grads.len() {
            grads[l].add_scaled(&bw.grads[l], 1.0);
            grads[l].add_scaled(&db_z.grads[l], 1.0);
            grads[l].add_scaled(&db_zt.grads[l], 1.0);
            let mut g = bw.pre_grads[l].clone();
            g.add_scaled(&db_zt.primal_pre_grads[l], 1.0);
            zt_pre_grads.push(g);
        }
        instances.push(InstanceStats {
            activations: intern.trace_z.inputs.clone(),
            pre_grads: db_z.primal_pre_grads.clone(),
        });
        instances.push(InstanceStats {
            activations: intern.trace_zt.inputs.clone(),
            pre_grads: zt_pre_grads,
        });
    }
    Ok(VarianceGrad { grads, instances })
}

/// Which estimator a trainer runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RlEstimatorKind {
    Relax,
    KfRelax,
}

/// Batch statistics from one update.
#[derive(Clone, Copy, Debug)]
pub struct UpdateStats {
    pub mean_return: f64,
    pub mean_squared_norm: f64,
}

/// Policy/surrogate pair plus optimizer state for RELAX or KF-RELAX
/// training: the policy ascends the estimate under Adam; the surrogate
/// descends the variance objective under Adam (RELAX) or damped
/// Kronecker-factored natural steps with trust-region capping (KF-RELAX).
pub struct RlTrainer {
    pub kind: RlEstimatorKind,
    pub cfg: RlConfig,
    pub policy: Policy,
    pub surrogate: Mlp,
    policy_adam: Vec<AdamState>,
    surrogate_opt: SurrogateOptimizer,
}

impl RlTrainer {
    pub fn new(
        kind: RlEstimatorKind,
        obs_dim: usize,
        n_actions: usize,
        cfg: RlConfig,
        rng: &mut Rng,
    ) -> Self {
        let policy = Policy::new(Mlp::new(
            &[obs_dim, cfg.policy_hidden, n_actions],
            Activation::Tanh,
            rng,
        ));
        let surrogate = Mlp::new(
            &[
                obs_dim + n_actions,
                cfg.surrogate_hidden,
                cfg.surrogate_hidden,
                1,
            ],
            Activation::Tanh,
            rng,
        );
        let policy_adam = policy
            .net
            .layers()
            .iter()
            .map(|w| AdamState::new(w.rows() * w.cols()))
            .collect();
        let surrogate_opt = match kind {
            RlEstimatorKind::Relax => SurrogateOptimizer::adam(&surrogate, cfg.lr_surrogate),
            RlEstimatorKind::KfRelax => SurrogateOptimizer::kfac(
                &surrogate,
                cfg.lr_surrogate,
                cfg.decay,
                cfg.damping,
                cfg.inverse_period,
                if cfg.trust_bound.is_finite() {
                    TrustRegion::new(cfg.trust_bound)
                } else {
                    TrustRegion::unbounded()
                },
            ),
        };
        RlTrainer {
            kind,
            cfg,
            policy,
            surrogate,
            policy_adam,
            surrogate_opt,
        }
    }

    /// Identity-factor mode: KFAC inverses forced to I before every step, so
    /// the surrogate update degenerates to plain SGD.
    pub fn force_identity_factors(&mut self, on: bool) {
        self.surrogate_opt.force_identity_factors(on);
    }

    pub fn collect_batch<E: Environment>(&self, env: &mut E, rng: &mut Rng) -> Vec<Trajectory> {
        (0..self.cfg.batch_episodes)
            .map(|_| rollout(env, &self.policy, rng))
            .collect()
    }

    /// One combined update from a batch of trajectories: the policy takes an
    /// Adam ascent step on the batch-mean estimate (entropy bonus included),
    /// the surrogate a step on the batch-mean variance gradient.
    pub fn kf_relax_update(&mut self, batch: &[Trajectory]) -> Result<UpdateStats, RlError> {
        if batch.is_empty() {
            return Err(RlError::EmptyBatch);
        }
        let scale = 1.0 / batch.len() as f64;
        let mut policy_grads = self.policy.net.zero_grads();
        let mut surrogate_grads = self.surrogate.zero_grads();
        let mut pairs: Vec<Vec<(Vector, Vector)>> =
            (0..self.surrogate.num_layers()).map(|_| Vec::new()).collect();
        let mut mean_sq = 0.0;
        let mut mean_return = 0.0;
        for traj in batch {
            let est = relax_rl_gradient(traj, &self.policy, &self.surrogate, &self.cfg);
            let vg = surrogate_variance_gradient(traj, &est, &self.policy, &self.surrogate)?;
            for l in 0..policy_grads.len() {
                policy_grads[l].add_scaled(&est.grads[l], scale);
            }
            for l in 0..surrogate_grads.len() {
                surrogate_grads[l].add_scaled(&vg.grads[l], scale);
            }
            for inst in &vg.instances {
                for l in 0..pairs.len() {
                    pairs[l].push((inst.activations[l].clone(), inst.pre_grads[l].clone()));
                }
            }
            mean_sq += scale * est.squared_norm();
            mean_return += scale * traj.total_reward();
        }
        // Ascent on J: Adam on the negated estimate.
        for (l, state) in self.policy_adam.iter_mut().enumerate() {
            let mut descent = policy_grads[l].clone();
            descent.scale(-1.0);
            adam_step(
                state,
                self.policy.net.layer_mut(l).data_mut(),
                descent.data(),
                self.cfg.lr_policy,
            );
        }
        self.surrogate_opt
            .step_batch(&mut self.surrogate, &surrogate_grads, &pairs)?;
        Ok(UpdateStats {
            mean_return,
            mean_squared_norm: mean_sq,
        })
    }
}

/// Policy logits at an observation after log-softmax normalization (what
/// the samplers consume). Exposed for tests and diagnostics.
pub fn policy_log_probs(policy: &Policy, obs: &[f64]) -> Vector {
    log_softmax(policy.logits(obs).output())
}

/// Discounted return of a trajectory: `Σ_t γᵗ r_t`.
pub fn discounted_return(traj: &Trajectory, gamma: f64) -> f64 {
    let mut acc = 0.0;
    let mut g = 1.0;
    for s in &traj.steps {
        acc += g * s.reward;
        g *= gamma;
    }
    acc
}
