//! Per-layer Kronecker-factored curvature state.
//!
//! For a layer with homogeneous input `a` (bias appended) and pre-activation
//! gradient `g`, the layer's Fisher block is approximated as
//! `F̂ = A ⊗ S` with `A = E[aaᵀ]` and `S = E[ggᵀ]`, so the damped natural
//! step is `ΔW = (A + λI)⁻¹ G (S + λI)⁻¹`. Under the row-major `vec`
//! convention of [`crate::linalg`] this equals `(A ⊗ S)⁻¹ vec(G)` when
//! λ = 0, which the oracle tests check by brute force.


use core::fmt;

use crate::linalg::{invert_spd, matmul, outer, LinalgError, Matrix, Vector};

/// Errors from curvature-state operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KfacError {
    /// `refresh_inverses` called before any statistics were accumulated.
    NotAccumulated,
    /// `natural_step` called before the first `refresh_inverses`.
    StaleInverses,
    /// A damped factor was not positive definite; raise the damping.
    DampingInsufficient(LinalgError),
}

impl fmt::Display for KfacError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KfacError::NotAccumulated => write!(f, "no statistics accumulated yet"),
            KfacError::StaleInverses => write!(f, "factor inverses were never refreshed"),
            KfacError::DampingInsufficient(e) => write!(f, "damping insufficient: {e}"),
        }
    }
}

impl core::error::Error for KfacError {}

impl From<LinalgError> for KfacError {
    fn from(e: LinalgError) -> Self {
        KfacError::DampingInsufficient(e)
    }
}

/// Frobenius-norm cap on a per-layer parameter update.
#[derive(Clone, Copy, Debug)]
pub struct TrustRegion {
    pub max_update_norm: f64,
}

impl TrustRegion {
    pub fn new(max_update_norm: f64) -> Self {
        assert!(max_update_norm > 0.0, "trust-region bound must be positive");
        TrustRegion { max_update_norm }
    }

    /// No capping.
    pub fn unbounded() -> Self {
        TrustRegion {
            max_update_norm: f64::INFINITY,
        }
    }
}

/// Rescales `delta` onto the trust-region ball if its Frobenius norm
/// exceeds the bound; direction is preserved.
pub fn clip_update(delta: &Matrix, tr: &TrustRegion) -> Matrix {
    let norm = delta.frobenius_norm();
    if norm <= tr.max_update_norm {
        delta.clone()
    } else {
        let mut out = delta.clone();
        out.scale(tr.max_update_norm / norm);
        out
    }
}

/// Kronecker factor statistics and cached damped inverses for one layer.
#[derive(Clone, Debug)]
pub struct KfacLayerState {
    a: Matrix,
    s: Matrix,
    a_inv: Option<Matrix>,
    s_inv: Option<Matrix>,
    /// EMA coefficient ρ: `A ← ρA + (1−ρ)aaᵀ` after the first sample.
    pub decay: f64,
    /// Tikhonov damping λ added to each factor before inversion.
    pub damping: f64,
    /// Steps between re-inversions (interpreted by the training loop).
    pub inverse_period: usize,
    step_count: usize,
    stale_samples: usize,
}

impl KfacLayerState {
    /// `in_dim` includes the bias coordinate; factors start at zero.
    pub fn new(in_dim: usize, out_dim: usize, decay: f64, damping: f64, inverse_period: usize) -> Self {
        assert!((0.0..1.0).contains(&decay), "decay must be in [0, 1)");
        assert!(damping >= 0.0, "damping must be non-negative");
        assert!(inverse_period >= 1, "inverse period must be at least 1");
        KfacLayerState {
            a: Matrix::zeros(in_dim, in_dim),
            s: Matrix::zeros(out_dim, out_dim),
            a_inv: None,
            s_inv: None,
            decay,
            damping,
            inverse_period,
            step_count: 0,
            stale_samples: 0,
        }
    }

    pub fn factor_a(&self) -> &Matrix {
        &self.a
    }

    pub fn factor_s(&self) -> &Matrix {
        &self.s
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    /// Folds one `(a, g)` sample into the factors: the first call sets
    /// `A ← aaᵀ`, `S ← ggᵀ`; later calls apply the EMA.
    pub fn accumulate(&mut self, a: &[f64], g: &[f64]) {
        assert_eq!(a.len(), self.a.rows(), "accumulate: activation length");
        assert_eq!(g.len(), self.s.rows(), "accumulate: gradient length");
        let rho = if self.step_count == 0 { 0.0 } else { self.decay };
        ema_outer(&mut self.a, a, rho);
        ema_outer(&mut self.s, g, rho);
        self.step_count += 1;
        self.stale_samples += 1;
    }

    /// Folds the mean outer products of a batch of `(a, g)` samples in a
    /// single EMA application, so one update counts as one step regardless
    /// of batch size.
    pub fn accumulate_mean(&mut self, pairs: &[(Vector, Vector)]) {
        assert!(!pairs.is_empty(), "accumulate_mean: empty batch");
        let scale = 1.0 / pairs.len() as f64;
        let mut a_mean = Matrix::zeros(self.a.rows(), self.a.cols());
        let mut s_mean = Matrix::zeros(self.s.rows(), self.s.cols());
        for (a, g) in pairs {
            a_mean.add_scaled(&outer(a, a), scale);
            s_mean.add_scaled(&outer(g, g), scale);
        }
        let rho = if self.step_count == 0 { 0.0 } else { self.decay };
        self.a.scale(rho);
        self.a.add_scaled(&a_mean, 1.0 - rho);
        self.s.scale(rho);
        self.s.add_scaled(&s_mean, 1.0 - rho);
        self.step_count += 1;
        self.stale_samples += 1;
    }

    /// Whether inverses are missing or `inverse_period` samples have gone by.
    pub fn needs_refresh(&self) -> bool {
        self.a_inv.is_none() || self.stale_samples >= self.inverse_period
    }

    /// Recomputes `A_inv = (A + λI)⁻¹` and `S_inv = (S + λI)⁻¹`.
    pub fn refresh_inverses(&mut self) -> Result<(), KfacError> {
        if self.step_count == 0 {
            return Err(KfacError::NotAccumulated);
        }
        self.a_inv = Some(invert_spd(&self.a, self.damping)?);
        self.s_inv = Some(invert_spd(&self.s, self.damping)?);
        self.stale_samples = 0;
        Ok(())
    }

    /// Replaces both cached inverses with identities (plain-gradient mode;
    /// used to check that the natural step degenerates to SGD bit-exactly).
    pub fn force_identity_inverses(&mut self) {
        self.a_inv = Some(Matrix::identity(self.a.rows()));
        self.s_inv = Some(Matrix::identity(self.s.rows()));
        self.stale_samples = 0;
    }

    /// Damped natural-gradient direction `ΔW = A_inv · gradW · S_inv`.
    pub fn natural_step(&self, grad_w: &Matrix) -> Result<Matrix, KfacError> {
        let (a_inv, s_inv) = match (&self.a_inv, &self.s_inv) {
            (Some(a), Some(s)) => (a, s),
            _ => return Err(KfacError::StaleInverses),
        };
        assert_eq!(grad_w.rows(), a_inv.rows(), "natural_step: gradient rows");
        assert_eq!(grad_w.cols(), s_inv.rows(), "natural_step: gradient cols");
        Ok(matmul(&matmul(a_inv, grad_w), s_inv))
    }
}

fn ema_outer(acc: &mut Matrix, v: &[f64], rho: f64) {
    let n = v.len();
    for i in 0..n {
        let row = acc.row_mut(i);
        for j in 0..n {
            row[j] = rho * row[j] + (1.0 - rho) * v[i] * v[j];
        }
    }
}
