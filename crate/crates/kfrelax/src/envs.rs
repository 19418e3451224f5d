//! Native classic-control environments with seeded resets.
//!
//! CartPole and Acrobot follow the de-facto standard specifications:
//! CartPole integrates the standard cart-pole equations with explicit Euler
//! at τ = 0.02 s and a 200-step cap; Acrobot integrates the two-link
//! underactuated dynamics with a single fixed-step RK4 over dt = 0.2 s and a
//! 500-step cap. Both are fully deterministic given a seed and an action
//! sequence.

use core::f64::consts::PI;
use core::fmt;

use crate::linalg::Vector;
use crate::math;
use crate::sample::Rng;

/// Errors from environment stepping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvError {
    /// `step` called on a finished episode.
    EpisodeOver,
    /// Action index outside the discrete action set.
    InvalidAction { action: usize, n_actions: usize },
}

impl fmt::Display for EnvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvError::EpisodeOver => write!(f, "episode is over; reset the environment"),
            EnvError::InvalidAction { action, n_actions } => {
                write!(f, "action {action} out of range (n_actions = {n_actions})")
            }
        }
    }
}

impl core::error::Error for EnvError {}

/// One step's outcome.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub observation: Vector,
    pub reward: f64,
    pub done: bool,
}

/// Discrete-action episodic environment.
pub trait Environment {
    /// Starts a fresh episode and returns the initial observation.
    fn reset(&mut self, rng: &mut Rng) -> Vector;
    fn step(&mut self, action: usize) -> Result<StepResult, EnvError>;
    fn n_actions(&self) -> usize;
    fn obs_dim(&self) -> usize;
    /// Hard step cap per episode.
    fn max_steps(&self) -> usize;
}

impl<E: Environment + ?Sized> Environment for alloc::boxed::Box<E> {
    fn reset(&mut self, rng: &mut Rng) -> Vector {
        (**self).reset(rng)
    }
    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        (**self).step(action)
    }
    fn n_actions(&self) -> usize {
        (**self).n_actions()
    }
    fn obs_dim(&self) -> usize {
        (**self).obs_dim()
    }
    fn max_steps(&self) -> usize {
        (**self).max_steps()
    }
}

const CARTPOLE_GRAVITY: f64 = 9.8;
const CARTPOLE_MASSCART: f64 = 1.0;
const CARTPOLE_MASSPOLE: f64 = 0.1;
const CARTPOLE_TOTAL_MASS: f64 = CARTPOLE_MASSCART + CARTPOLE_MASSPOLE;
const CARTPOLE_HALF_LENGTH: f64 = 0.5;
const CARTPOLE_POLEMASS_LENGTH: f64 = CARTPOLE_MASSPOLE * CARTPOLE_HALF_LENGTH;
const CARTPOLE_FORCE: f64 = 10.0;
const CARTPOLE_TAU: f64 = 0.02;
const CARTPOLE_X_LIMIT: f64 = 2.4;
const CARTPOLE_THETA_LIMIT: f64 = 12.0 * PI / 180.0;
const CARTPOLE_MAX_STEPS: usize = 200;

/// Cart position/velocity and pole angle/angular velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

/// CartPole with ±10 N force actions, +1 reward per step (terminal step
/// included), Euler integration.
#[derive(Clone, Debug)]
pub struct CartPole {
    pub state: CartPoleState,
    steps: usize,
    done: bool,
}

impl CartPole {
    pub fn new() -> Self {
        CartPole {
            state: CartPoleState {
                x: 0.0,
                x_dot: 0.0,
                theta: 0.0,
                theta_dot: 0.0,
            },
            steps: 0,
            done: true,
        }
    }

    fn observation(&self) -> Vector {
        Vector::from_slice(&[
            self.state.x,
            self.state.x_dot,
            self.state.theta,
            self.state.theta_dot,
        ])
    }

    fn failed(&self) -> bool {
        math::abs(self.state.x) > CARTPOLE_X_LIMIT
            || math::abs(self.state.theta) > CARTPOLE_THETA_LIMIT
    }
}

impl Default for CartPole {
    fn default() -> Self {
        CartPole::new()
    }
}

impl Environment for CartPole {
    /// Every state component uniform in ±0.05.
    fn reset(&mut self, rng: &mut Rng) -> Vector {
        self.state = CartPoleState {
            x: rng.uniform_range(-0.05, 0.05),
            x_dot: rng.uniform_range(-0.05, 0.05),
            theta: rng.uniform_range(-0.05, 0.05),
            theta_dot: rng.uniform_range(-0.05, 0.05),
        };
        self.steps = 0;
        self.done = false;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        if action >= 2 {
            return Err(EnvError::InvalidAction { action, n_actions: 2 });
        }
        let force = if action == 1 { CARTPOLE_FORCE } else { -CARTPOLE_FORCE };
        let s = &mut self.state;
        let cos_t = math::cos(s.theta);
        let sin_t = math::sin(s.theta);
        let temp = (force + CARTPOLE_POLEMASS_LENGTH * s.theta_dot * s.theta_dot * sin_t)
            / CARTPOLE_TOTAL_MASS;
        let theta_acc = (CARTPOLE_GRAVITY * sin_t - cos_t * temp)
            / (CARTPOLE_HALF_LENGTH
                * (4.0 / 3.0 - CARTPOLE_MASSPOLE * cos_t * cos_t / CARTPOLE_TOTAL_MASS));
        let x_acc = temp - CARTPOLE_POLEMASS_LENGTH * theta_acc * cos_t / CARTPOLE_TOTAL_MASS;

        s.x += CARTPOLE_TAU * s.x_dot;
        s.x_dot += CARTPOLE_TAU * x_acc;
        s.theta += CARTPOLE_TAU * s.theta_dot;
        s.theta_dot += CARTPOLE_TAU * theta_acc;

        self.steps += 1;
        self.done = self.failed() || self.steps >= CARTPOLE_MAX_STEPS;
        Ok(StepResult {
            observation: self.observation(),
            reward: 1.0,
            done: self.done,
        })
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn obs_dim(&self) -> usize {
        4
    }

    fn max_steps(&self) -> usize {
        CARTPOLE_MAX_STEPS
    }
}

const ACROBOT_DT: f64 = 0.2;
const ACROBOT_M1: f64 = 1.0;
const ACROBOT_M2: f64 = 1.0;
const ACROBOT_L1: f64 = 1.0;
const ACROBOT_LC1: f64 = 0.5;
const ACROBOT_LC2: f64 = 0.5;
const ACROBOT_I1: f64 = 1.0;
const ACROBOT_I2: f64 = 1.0;
const ACROBOT_G: f64 = 9.8;
const ACROBOT_MAX_VEL1: f64 = 4.0 * PI;
const ACROBOT_MAX_VEL2: f64 = 9.0 * PI;
const ACROBOT_MAX_STEPS: usize = 500;

/// Link angles (θ₁ from the downward vertical) and angular velocities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcrobotState {
    pub theta1: f64,
    pub theta2: f64,
    pub dtheta1: f64,
    pub dtheta2: f64,
}

impl AcrobotState {
    /// Total mechanical energy of the undriven system (kinetic plus
    /// gravitational potential); conserved by the exact dynamics at zero
    /// torque, used by the integrator sanity tests.
    pub fn mechanical_energy(&self) -> f64 {
        let (t1, t2, d1, d2) = (self.theta1, self.theta2, self.dtheta1, self.dtheta2);
        let m11 = ACROBOT_M1 * ACROBOT_LC1 * ACROBOT_LC1
            + ACROBOT_M2
                * (ACROBOT_L1 * ACROBOT_L1
                    + ACROBOT_LC2 * ACROBOT_LC2
                    + 2.0 * ACROBOT_L1 * ACROBOT_LC2 * math::cos(t2))
            + ACROBOT_I1
            + ACROBOT_I2;
        let m12 = ACROBOT_M2 * (ACROBOT_LC2 * ACROBOT_LC2 + ACROBOT_L1 * ACROBOT_LC2 * math::cos(t2))
            + ACROBOT_I2;
        let m22 = ACROBOT_M2 * ACROBOT_LC2 * ACROBOT_LC2 + ACROBOT_I2;
        let kinetic = 0.5 * (m11 * d1 * d1 + 2.0 * m12 * d1 * d2 + m22 * d2 * d2);
        let potential = -ACROBOT_G
            * ((ACROBOT_M1 * ACROBOT_LC1 + ACROBOT_M2 * ACROBOT_L1) * math::cos(t1)
                + ACROBOT_M2 * ACROBOT_LC2 * math::cos(t1 + t2));
        kinetic + potential
    }
}

/// Time derivative of the acrobot state under the given torque.
fn acrobot_dynamics(s: &AcrobotState, torque: f64) -> [f64; 4] {
    let (t1, t2, d1, d2) = (s.theta1, s.theta2, s.dtheta1, s.dtheta2);
    let d1_coef = ACROBOT_M1 * ACROBOT_LC1 * ACROBOT_LC1
        + ACROBOT_M2
            * (ACROBOT_L1 * ACROBOT_L1
                + ACROBOT_LC2 * ACROBOT_LC2
                + 2.0 * ACROBOT_L1 * ACROBOT_LC2 * math::cos(t2))
        + ACROBOT_I1
        + ACROBOT_I2;
    let d2_coef = ACROBOT_M2 * (ACROBOT_LC2 * ACROBOT_LC2 + ACROBOT_L1 * ACROBOT_LC2 * math::cos(t2))
        + ACROBOT_I2;
    let phi2 = ACROBOT_M2 * ACROBOT_LC2 * ACROBOT_G * math::cos(t1 + t2 - PI / 2.0);
    let phi1 = -ACROBOT_M2 * ACROBOT_L1 * ACROBOT_LC2 * d2 * d2 * math::sin(t2)
        - 2.0 * ACROBOT_M2 * ACROBOT_L1 * ACROBOT_LC2 * d2 * d1 * math::sin(t2)
        + (ACROBOT_M1 * ACROBOT_LC1 + ACROBOT_M2 * ACROBOT_L1) * ACROBOT_G * math::cos(t1 - PI / 2.0)
        + phi2;
    let ddtheta2 = (torque + d2_coef / d1_coef * phi1
        - ACROBOT_M2 * ACROBOT_L1 * ACROBOT_LC2 * d1 * d1 * math::sin(t2)
        - phi2)
        / (ACROBOT_M2 * ACROBOT_LC2 * ACROBOT_LC2 + ACROBOT_I2 - d2_coef * d2_coef / d1_coef);
    let ddtheta1 = -(d2_coef * ddtheta2 + phi1) / d1_coef;
    [d1, d2, ddtheta1, ddtheta2]
}

fn wrap_angle(x: f64) -> f64 {
    let mut y = x;
    while y > PI {
        y -= 2.0 * PI;
    }
    while y < -PI {
        y += 2.0 * PI;
    }
    y
}

/// One classic RK4 step of the acrobot ODE over `h` seconds, before
/// wrapping or clamping.
pub fn acrobot_rk4_step(s: &AcrobotState, torque: f64, h: f64) -> AcrobotState {
    let add = |s: &AcrobotState, k: &[f64; 4], scale: f64| AcrobotState {
        theta1: s.theta1 + scale * k[0],
        theta2: s.theta2 + scale * k[1],
        dtheta1: s.dtheta1 + scale * k[2],
        dtheta2: s.dtheta2 + scale * k[3],
    };
    let k1 = acrobot_dynamics(s, torque);
    let k2 = acrobot_dynamics(&add(s, &k1, h / 2.0), torque);
    let k3 = acrobot_dynamics(&add(s, &k2, h / 2.0), torque);
    let k4 = acrobot_dynamics(&add(s, &k3, h), torque);
    AcrobotState {
        theta1: s.theta1 + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        theta2: s.theta2 + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        dtheta1: s.dtheta1 + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        dtheta2: s.dtheta2 + h / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
    }
}

/// Fine-grained explicit-Euler integration of the same ODE; test oracle for
/// the RK4 step.
pub fn acrobot_euler_oracle(s: &AcrobotState, torque: f64, h: f64, substeps: usize) -> AcrobotState {
    let dt = h / substeps as f64;
    let mut cur = *s;
    for _ in 0..substeps {
        let k = acrobot_dynamics(&cur, torque);
        cur = AcrobotState {
            theta1: cur.theta1 + dt * k[0],
            theta2: cur.theta2 + dt * k[1],
            dtheta1: cur.dtheta1 + dt * k[2],
            dtheta2: cur.dtheta2 + dt * k[3],
        };
    }
    cur
}

/// Acrobot with torque {−1, 0, +1} on the second joint, −1 reward per step
/// until the goal (`−cosθ₁ − cos(θ₁+θ₂) > 1`), 0 on the goal step.
#[derive(Clone, Debug)]
pub struct Acrobot {
    pub state: AcrobotState,
    steps: usize,
    done: bool,
}

impl Acrobot {
    pub fn new() -> Self {
        Acrobot {
            state: AcrobotState {
                theta1: 0.0,
                theta2: 0.0,
                dtheta1: 0.0,
                dtheta2: 0.0,
            },
            steps: 0,
            done: true,
        }
    }

    fn observation(&self) -> Vector {
        Vector::from_slice(&[
            math::cos(self.state.theta1),
            math::sin(self.state.theta1),
            math::cos(self.state.theta2),
            math::sin(self.state.theta2),
            self.state.dtheta1,
            self.state.dtheta2,
        ])
    }

    fn at_goal(&self) -> bool {
        -math::cos(self.state.theta1) - math::cos(self.state.theta2 + self.state.theta1) > 1.0
    }
}

impl Default for Acrobot {
    fn default() -> Self {
        Acrobot::new()
    }
}

impl Environment for Acrobot {
    /// Every state component uniform in ±0.1.
    fn reset(&mut self, rng: &mut Rng) -> Vector {
        self.state = AcrobotState {
            theta1: rng.uniform_range(-0.1, 0.1),
            theta2: rng.uniform_range(-0.1, 0.1),
            dtheta1: rng.uniform_range(-0.1, 0.1),
            dtheta2: rng.uniform_range(-0.1, 0.1),
        };
        self.steps = 0;
        self.done = false;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        if action >= 3 {
            return Err(EnvError::InvalidAction { action, n_actions: 3 });
        }
        let torque = action as f64 - 1.0;
        let mut next = acrobot_rk4_step(&self.state, torque, ACROBOT_DT);
        next.theta1 = wrap_angle(next.theta1);
        next.theta2 = wrap_angle(next.theta2);
        next.dtheta1 = next.dtheta1.clamp(-ACROBOT_MAX_VEL1, ACROBOT_MAX_VEL1);
        next.dtheta2 = next.dtheta2.clamp(-ACROBOT_MAX_VEL2, ACROBOT_MAX_VEL2);
        self.state = next;
        self.steps += 1;
        let goal = self.at_goal();
        self.done = goal || self.steps >= ACROBOT_MAX_STEPS;
        Ok(StepResult {
            observation: self.observation(),
            reward: if goal { 0.0 } else { -1.0 },
            done: self.done,
        })
    }

    fn n_actions(&self) -> usize {
        3
    }

    fn obs_dim(&self) -> usize {
        6
    }

    fn max_steps(&self) -> usize {
        ACROBOT_MAX_STEPS
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartpole_reset_range_and_determinism() {
        let mut env = CartPole::new();
        let mut rng = Rng::new(5);
        for _ in 0..200 {
            let obs = env.reset(&mut rng);
            for x in obs.iter() {
                assert!((-0.05..=0.05).contains(x));
            }
        }
        let mut a = CartPole::new();
        let mut b = CartPole::new();
        let oa = a.reset(&mut Rng::new(9));
        let ob = b.reset(&mut Rng::new(9));
        assert_eq!(oa, ob);
    }

    #[test]
    fn cartpole_reset_mean_is_centered() {
        let mut env = CartPole::new();
        let mut rng = Rng::new(6);
        let n = 10_000;
        let mut sums = [0.0f64; 4];
        for _ in 0..n {
            let obs = env.reset(&mut rng);
            for (s, x) in sums.iter_mut().zip(obs.iter()) {
                *s += x;
            }
        }
        // Uniform ±0.05 has sd 0.05/√3; 3 standard errors of the mean.
        let tol = 3.0 * (0.05 / (3.0f64).sqrt()) / (n as f64).sqrt();
        for s in sums {
            assert!((s / n as f64).abs() < tol);
        }
    }

    #[test]
    fn cartpole_one_euler_step_from_origin() {
        let mut env = CartPole::new();
        env.state = CartPoleState { x: 0.0, x_dot: 0.0, theta: 0.0, theta_dot: 0.0 };
        env.done = false;
        let res = env.step(1).unwrap();
        assert!((res.observation[0] - 0.0).abs() < 1e-12);
        assert!((res.observation[1] - 0.1951219512195122).abs() < 1e-10);
        assert!((res.observation[2] - 0.0).abs() < 1e-12);
        assert!((res.observation[3] + 0.2926829268292683).abs() < 1e-10);
    }

    #[test]
    fn cartpole_mirror_symmetry_is_exact() {
        let mut rng = Rng::new(7);
        for _ in 0..200 {
            let state = CartPoleState {
                x: rng.uniform_range(-1.0, 1.0),
                x_dot: rng.uniform_range(-1.0, 1.0),
                theta: rng.uniform_range(-0.2, 0.2),
                theta_dot: rng.uniform_range(-1.0, 1.0),
            };
            let mut env = CartPole::new();
            env.state = state;
            env.done = false;
            let res = env.step(1).unwrap();

            let mut mirrored = CartPole::new();
            mirrored.state = CartPoleState {
                x: -state.x,
                x_dot: -state.x_dot,
                theta: -state.theta,
                theta_dot: -state.theta_dot,
            };
            mirrored.done = false;
            let mres = mirrored.step(0).unwrap();
            for (a, b) in res.observation.iter().zip(mres.observation.iter()) {
                assert_eq!(*a, -*b);
            }
        }
    }

    #[test]
    fn cartpole_termination_and_step_after_done() {
        let mut env = CartPole::new();
        env.state = CartPoleState { x: 2.5, x_dot: 0.0, theta: 0.0, theta_dot: 0.0 };
        env.done = false;
        let res = env.step(0).unwrap();
        assert!(res.done);
        assert_eq!(res.reward, 1.0);
        assert!(matches!(env.step(0), Err(EnvError::EpisodeOver)));
    }

    #[test]
    fn invalid_actions_are_rejected() {
        let mut env = CartPole::new();
        let mut rng = Rng::new(31);
        env.reset(&mut rng);
        assert!(matches!(
            env.step(2),
            Err(EnvError::InvalidAction { action: 2, n_actions: 2 })
        ));
        let mut env = Acrobot::new();
        env.reset(&mut rng);
        assert!(matches!(
            env.step(3),
            Err(EnvError::InvalidAction { action: 3, n_actions: 3 })
        ));
    }

    #[test]
    fn cartpole_return_capped_at_200() {
        // Alternate actions to keep the pole up a while; even if it survives,
        // the cap ends the episode at 200 with total return 200.
        let mut env = CartPole::new();
        let mut rng = Rng::new(11);
        env.reset(&mut rng);
        let mut total = 0.0;
        let mut steps = 0;
        loop {
            let a = steps % 2;
            let res = env.step(a).unwrap();
            total += res.reward;
            steps += 1;
            if res.done {
                break;
            }
        }
        assert!(total <= 200.0);
        assert_eq!(total, steps as f64);
    }

    #[test]
    fn acrobot_hanging_rest_is_equilibrium() {
        let rest = AcrobotState { theta1: 0.0, theta2: 0.0, dtheta1: 0.0, dtheta2: 0.0 };
        let next = acrobot_rk4_step(&rest, 0.0, ACROBOT_DT);
        assert!((next.theta1).abs() < 1e-14);
        assert!((next.theta2).abs() < 1e-14);
        assert!((next.dtheta1).abs() < 1e-14);
        assert!((next.dtheta2).abs() < 1e-14);
    }

    #[test]
    fn acrobot_rk4_matches_fine_euler_oracle() {
        // One RK4 step at h = 0.2 carries ~5e-4 intrinsic truncation even
        // from reset-scale states (gravity makes the accelerations large),
        // so 1e-3 per component is the tightest honest bound against the
        // 1000-substep Euler oracle.
        let mut rng = Rng::new(13);
        for _ in 0..50 {
            let s = AcrobotState {
                theta1: rng.uniform_range(-0.1, 0.1),
                theta2: rng.uniform_range(-0.1, 0.1),
                dtheta1: rng.uniform_range(-0.1, 0.1),
                dtheta2: rng.uniform_range(-0.1, 0.1),
            };
            let torque = (rng.next_u64() % 3) as f64 - 1.0;
            let rk4 = acrobot_rk4_step(&s, torque, ACROBOT_DT);
            let euler = acrobot_euler_oracle(&s, torque, ACROBOT_DT, 1000);
            assert!((rk4.theta1 - euler.theta1).abs() < 1e-3);
            assert!((rk4.theta2 - euler.theta2).abs() < 1e-3);
            assert!((rk4.dtheta1 - euler.dtheta1).abs() < 1e-3);
            assert!((rk4.dtheta2 - euler.dtheta2).abs() < 1e-3);
        }
        // Against a much finer Euler reference the RK4 step must sit inside
        // its own truncation budget rather than the oracle's.
        let s = AcrobotState { theta1: 0.05, theta2: -0.08, dtheta1: 0.1, dtheta2: -0.02 };
        let rk4 = acrobot_rk4_step(&s, 1.0, ACROBOT_DT);
        let fine = acrobot_euler_oracle(&s, 1.0, ACROBOT_DT, 100_000);
        assert!((rk4.theta1 - fine.theta1).abs() < 1e-3);
        assert!((rk4.dtheta2 - fine.dtheta2).abs() < 1e-3);
    }

    #[test]
    fn acrobot_energy_drift_small_for_undriven_small_swings() {
        let mut rng = Rng::new(17);
        for _ in 0..5 {
            let mut s = AcrobotState {
                theta1: rng.uniform_range(-0.1, 0.1),
                theta2: rng.uniform_range(-0.1, 0.1),
                dtheta1: rng.uniform_range(-0.1, 0.1),
                dtheta2: rng.uniform_range(-0.1, 0.1),
            };
            let e0 = s.mechanical_energy();
            let mut max_drift = 0.0f64;
            for _ in 0..50 {
                s = acrobot_rk4_step(&s, 0.0, ACROBOT_DT);
                max_drift = max_drift.max((s.mechanical_energy() - e0).abs());
            }
            assert!(
                max_drift / e0.abs() < 0.01,
                "relative drift {}",
                max_drift / e0.abs()
            );
        }
    }

    #[test]
    fn acrobot_velocity_clamps_and_determinism() {
        let mut env = Acrobot::new();
        let mut rng = Rng::new(19);
        env.reset(&mut rng);
        let mut env2 = Acrobot::new();
        let mut rng2 = Rng::new(19);
        env2.reset(&mut rng2);
        for k in 0..300 {
            let a = (k * 7 + 3) % 3;
            let r1 = env.step(a).unwrap();
            let r2 = env2.step(a).unwrap();
            assert_eq!(r1.observation, r2.observation);
            assert_eq!(r1.reward, r2.reward);
            assert!(env.state.dtheta1.abs() <= ACROBOT_MAX_VEL1);
            assert!(env.state.dtheta2.abs() <= ACROBOT_MAX_VEL2);
            if r1.done {
                break;
            }
        }
    }

    #[test]
    fn acrobot_return_bounded_below() {
        let mut env = Acrobot::new();
        let mut rng = Rng::new(23);
        env.reset(&mut rng);
        let mut total = 0.0;
        loop {
            let res = env.step(1).unwrap();
            total += res.reward;
            if res.done {
                break;
            }
        }
        assert!(total >= -(ACROBOT_MAX_STEPS as f64));
    }

    #[test]
    fn reward_structure_matches_goal_semantics() {
        // Torque with the sign of the second joint's velocity pumps energy
        // in reliably; the goal must be reached well before the cap, with
        // reward 0 on the goal step and −1 before it.
        let mut env = Acrobot::new();
        let mut rng = Rng::new(29);
        env.reset(&mut rng);
        let mut rewards = vec![];
        for _ in 0..ACROBOT_MAX_STEPS {
            let a = if env.state.dtheta2 > 0.0 { 2 } else { 0 };
            let res = env.step(a).unwrap();
            rewards.push(res.reward);
            if res.done {
                break;
            }
        }
        assert!(
            rewards.len() < ACROBOT_MAX_STEPS,
            "pumping policy failed to reach the goal"
        );
        assert_eq!(*rewards.last().unwrap(), 0.0);
        assert!(rewards[..rewards.len() - 1].iter().all(|&r| r == -1.0));
    }
}
