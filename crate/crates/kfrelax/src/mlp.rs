//! Fixed-architecture multilayer perceptron with explicit differentiation
//! passes.
//!
//! The estimators need four views of the same network: plain forward with
//! cached per-layer activations, reverse mode (weight gradients plus the
//! pre-activation gradients KFAC consumes), forward tangents through the
//! input (directional derivatives), and reverse-over-tangent (weight
//! gradients of a directional derivative, i.e. double backprop). Biases are
//! handled homogeneously: every layer input carries a trailing 1, so each
//! weight matrix is `(d_in + 1) × d_out` and the bias participates in the
//! KFAC activation factor.
//!
//! Hidden activations must be smooth for the double-backprop path to carry
//! meaningful second derivatives; the output activation is the identity.

use alloc::vec::Vec;

use crate::linalg::{outer, Matrix, Vector};
use crate::math;
use crate::sample::Rng;

/// Hidden-layer activation. All variants are smooth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
    Sigmoid,
    /// Linear pass-through; turns the network into a matrix product chain.
    Identity,
}

impl Activation {
    #[inline]
    fn value(self, s: f64) -> f64 {
        match self {
            Activation::Tanh => math::tanh(s),
            Activation::Sigmoid => math::sigmoid(s),
            Activation::Identity => s,
        }
    }

    /// First derivative expressed through the activation value.
    #[inline]
    fn d1(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - v * v,
            Activation::Sigmoid => v * (1.0 - v),
            Activation::Identity => 1.0,
        }
    }

    /// Second derivative expressed through the activation value.
    #[inline]
    fn d2(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => -2.0 * v * (1.0 - v * v),
            Activation::Sigmoid => v * (1.0 - v) * (1.0 - 2.0 * v),
            Activation::Identity => 0.0,
        }
    }
}

/// Per-layer cache from a forward pass.
///
/// `inputs[l]` is the layer-l input with the bias 1 appended; `pre[l]` is the
/// pre-activation `s_l = W_lᵀ a_l`. The network output is the last
/// pre-activation (identity output layer).
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub inputs: Vec<Vector>,
    pub pre: Vec<Vector>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Vector {
        self.pre.last().expect("trace has at least one layer")
    }

    pub fn output_scalar(&self) -> f64 {
        let y = self.output();
        assert_eq!(y.len(), 1, "network output is not scalar");
        y[0]
    }
}

/// Tangent-side cache from a forward-tangent pass, aligned with a
/// [`ForwardTrace`]: `dinputs[l]` and `dpre[l]` are the directional
/// derivatives of `inputs[l]` and `pre[l]` (bias tangents are zero).
#[derive(Clone, Debug)]
pub struct TangentTrace {
    pub dinputs: Vec<Vector>,
    pub dpre: Vec<Vector>,
}

impl TangentTrace {
    pub fn output(&self) -> &Vector {
        self.dpre.last().expect("trace has at least one layer")
    }

    pub fn output_scalar(&self) -> f64 {
        let y = self.output();
        assert_eq!(y.len(), 1, "network output is not scalar");
        y[0]
    }
}

/// Reverse-mode result: exact weight gradients and the per-layer
/// pre-activation gradients `g_l = ∂L/∂s_l` (the KFAC `S` statistic);
/// `grads[l] = inputs[l] · g_lᵀ` holds exactly.
#[derive(Clone, Debug)]
pub struct BackwardResult {
    pub grads: Vec<Matrix>,
    pub pre_grads: Vec<Vector>,
}

/// Reverse-over-tangent result.
///
/// `grads[l] = dinputs[l]·ḡ_lᵀ + inputs[l]·ĝ_lᵀ` where `ḡ` are the
/// tangent-side and `ĝ` the primal-side pre-activation cotangents. The
/// primal cotangents are the `∂L/∂s_l` contributions that KFAC statistics
/// accumulate.
#[derive(Clone, Debug)]
pub struct DoubleBackwardResult {
    pub grads: Vec<Matrix>,
    pub primal_pre_grads: Vec<Vector>,
    pub tangent_pre_grads: Vec<Vector>,
}

/// Fully-connected network with homogeneous bias rows.
#[derive(Clone, Debug)]
pub struct Mlp {
    layers: Vec<Matrix>,
    activation: Activation,
}

impl Mlp {
    /// Builds a network with the given widths (`dims[0]` inputs through
    /// `dims.last()` outputs) and weights drawn uniformly in
    /// `±1/√fan_in`, biases included.
    pub fn new(dims: &[usize], activation: Activation, rng: &mut Rng) -> Self {
        assert!(dims.len() >= 2, "network needs at least one layer");
        let layers = (0..dims.len() - 1)
            .map(|l| {
                let bound = 1.0 / math::sqrt(dims[l] as f64);
                Matrix::from_fn(dims[l] + 1, dims[l + 1], |_, _| {
                    rng.uniform_range(-bound, bound)
                })
            })
            .collect();
        Mlp { layers, activation }
    }

    pub fn zeros(dims: &[usize], activation: Activation) -> Self {
        assert!(dims.len() >= 2, "network needs at least one layer");
        let layers = (0..dims.len() - 1)
            .map(|l| Matrix::zeros(dims[l] + 1, dims[l + 1]))
            .collect();
        Mlp { layers, activation }
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    pub fn layer_mut(&mut self, l: usize) -> &mut Matrix {
        &mut self.layers[l]
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].rows() - 1
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().cols()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|w| w.rows() * w.cols()).sum()
    }

    /// Zero matrices shaped like each layer, for gradient accumulators.
    pub fn zero_grads(&self) -> Vec<Matrix> {
        self.layers
            .iter()
            .map(|w| Matrix::zeros(w.rows(), w.cols()))
            .collect()
    }

    fn with_bias(x: &[f64]) -> Vector {
        let mut a = Vector::from_slice(x);
        a.push(1.0);
        a
    }

    pub fn forward(&self, x: &[f64]) -> ForwardTrace {
        assert_eq!(x.len(), self.in_dim(), "forward: input width mismatch");
        let layer_count = self.layers.len();
        let mut inputs = Vec::with_capacity(layer_count);
        let mut pre = Vec::with_capacity(layer_count);
        let mut a = Self::with_bias(x);
        for (l, w) in self.layers.iter().enumerate() {
            let s = w.tr_mul_vec(&a);
            let next = if l + 1 < layer_count {
                let mut h: Vector = s.iter().map(|&si| self.activation.value(si)).collect();
                h.push(1.0);
                h
            } else {
                Vector::zeros(0)
            };
            inputs.push(a);
            pre.push(s);
            a = next;
        }
        ForwardTrace { inputs, pre }
    }

    /// Exact reverse-mode gradients of `⟨dy, y⟩` with respect to every
    /// weight, plus the per-layer pre-activation gradients.
    pub fn backward(&self, trace: &ForwardTrace, dy: &[f64]) -> BackwardResult {
        assert_eq!(dy.len(), self.out_dim(), "backward: cotangent width mismatch");
        let layer_count = self.layers.len();
        let mut grads = Vec::with_capacity(layer_count);
        let mut pre_grads = Vec::with_capacity(layer_count);
        let mut g = Vector::from_slice(dy);
        for l in (0..layer_count).rev() {
            grads.push(outer(&trace.inputs[l], &g));
            if l > 0 {
                let da = self.layers[l].mul_vec(&g);
                let width = self.layers[l].rows() - 1;
                let mut prev = Vector::zeros(width);
                for k in 0..width {
                    prev[k] = self.activation.d1(trace.inputs[l][k]) * da[k];
                }
                pre_grads.push(core::mem::replace(&mut g, prev));
            } else {
                pre_grads.push(core::mem::take(&mut g));
            }
        }
        grads.reverse();
        pre_grads.reverse();
        BackwardResult { grads, pre_grads }
    }

    /// `∂⟨dy, y⟩/∂x`, exact.
    pub fn input_gradient(&self, trace: &ForwardTrace, dy: &[f64]) -> Vector {
        assert_eq!(dy.len(), self.out_dim());
        let mut g = Vector::from_slice(dy);
        for l in (0..self.layers.len()).rev() {
            let da = self.layers[l].mul_vec(&g);
            let width = self.layers[l].rows() - 1;
            let mut prev = Vector::zeros(width);
            if l > 0 {
                for k in 0..width {
                    prev[k] = self.activation.d1(trace.inputs[l][k]) * da[k];
                }
            } else {
                prev.copy_from_slice(&da[..width]);
            }
            g = prev;
        }
        g
    }

    /// Propagates an input tangent through a cached primal trace.
    pub fn tangent_from_trace(&self, trace: &ForwardTrace, xdot: &[f64]) -> TangentTrace {
        assert_eq!(xdot.len(), self.in_dim(), "tangent: input width mismatch");
        let layer_count = self.layers.len();
        let mut dinputs = Vec::with_capacity(layer_count);
        let mut dpre = Vec::with_capacity(layer_count);
        let mut adot = Self::with_bias(xdot);
        *adot.last_mut().unwrap() = 0.0;
        for l in 0..layer_count {
            let sdot = self.layers[l].tr_mul_vec(&adot);
            let next = if l + 1 < layer_count {
                let mut hdot: Vector = sdot
                    .iter()
                    .enumerate()
                    .map(|(k, &sd)| self.activation.d1(trace.inputs[l + 1][k]) * sd)
                    .collect();
                hdot.push(0.0);
                hdot
            } else {
                Vector::zeros(0)
            };
            dinputs.push(adot);
            dpre.push(sdot);
            adot = next;
        }
        TangentTrace { dinputs, dpre }
    }

    /// Forward pass plus directional derivative `ẏ = (∂y/∂x)·xdot`.
    pub fn forward_tangent(&self, x: &[f64], xdot: &[f64]) -> (ForwardTrace, TangentTrace) {
        let trace = self.forward(x);
        let tangent = self.tangent_from_trace(&trace, xdot);
        (trace, tangent)
    }

    /// Directional derivative of the output with respect to the weights:
    /// forward pass plus `ẏ = Σ_l ⟨∂y/∂W_l, dir_l⟩`.
    pub fn forward_weight_tangent(&self, x: &[f64], dir: &[Matrix]) -> (ForwardTrace, Vector) {
        assert_eq!(dir.len(), self.layers.len(), "weight tangent: layer count");
        let layer_count = self.layers.len();
        let trace = self.forward(x);
        let mut adot = Vector::zeros(self.in_dim() + 1);
        let mut ydot = Vector::zeros(0);
        for l in 0..layer_count {
            let mut sdot = self.layers[l].tr_mul_vec(&adot);
            let direct = dir[l].tr_mul_vec(&trace.inputs[l]);
            for (sd, d) in sdot.iter_mut().zip(direct.iter()) {
                *sd += d;
            }
            if l + 1 < layer_count {
                let mut hdot: Vector = sdot
                    .iter()
                    .enumerate()
                    .map(|(k, &sd)| self.activation.d1(trace.inputs[l + 1][k]) * sd)
                    .collect();
                hdot.push(0.0);
                adot = hdot;
            } else {
                ydot = sdot;
            }
        }
        (trace, ydot)
    }

    /// Exact weight gradients of `⟨dydot, ẏ⟩` — double backprop through a
    /// forward-tangent pass.
    ///
    /// Walks the tangent program in reverse, carrying a cotangent pair per
    /// layer: `ḡ_l` for the tangent pre-activations and `ĝ_l` for the primal
    /// ones (the latter picks up the activation-curvature term
    /// `act''(s)·ṡ·…`). Each layer contributes
    /// `ȧ_l ḡ_lᵀ + a_l ĝ_lᵀ` to the weight gradient.
    pub fn backward_over_tangent(
        &self,
        trace: &ForwardTrace,
        tangent: &TangentTrace,
        dydot: &[f64],
    ) -> DoubleBackwardResult {
        assert_eq!(dydot.len(), self.out_dim());
        let layer_count = self.layers.len();
        let mut grads = Vec::with_capacity(layer_count);
        let mut primal = Vec::with_capacity(layer_count);
        let mut tangent_cots = Vec::with_capacity(layer_count);
        let mut gbar = Vector::from_slice(dydot);
        let mut ghat = Vector::zeros(self.out_dim());
        for l in (0..layer_count).rev() {
            let mut grad = outer(&tangent.dinputs[l], &gbar);
            grad.add_scaled(&outer(&trace.inputs[l], &ghat), 1.0);
            grads.push(grad);
            if l > 0 {
                let dadot = self.layers[l].mul_vec(&gbar);
                let dahat = self.layers[l].mul_vec(&ghat);
                let width = self.layers[l].rows() - 1;
                let mut gbar_prev = Vector::zeros(width);
                let mut ghat_prev = Vector::zeros(width);
                for k in 0..width {
                    let v = trace.inputs[l][k];
                    let d1 = self.activation.d1(v);
                    let d2 = self.activation.d2(v);
                    gbar_prev[k] = d1 * dadot[k];
                    ghat_prev[k] = d1 * dahat[k] + d2 * tangent.dpre[l - 1][k] * dadot[k];
                }
                primal.push(core::mem::replace(&mut ghat, ghat_prev));
                tangent_cots.push(core::mem::replace(&mut gbar, gbar_prev));
            } else {
                primal.push(core::mem::take(&mut ghat));
                tangent_cots.push(core::mem::take(&mut gbar));
            }
        }
        grads.reverse();
        primal.reverse();
        tangent_cots.reverse();
        DoubleBackwardResult {
            grads,
            primal_pre_grads: primal,
            tangent_pre_grads: tangent_cots,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_net(dims: &[usize], seed: u64) -> Mlp {
        let mut rng = Rng::new(seed);
        Mlp::new(dims, Activation::Tanh, &mut rng)
    }

    fn scalar(mlp: &Mlp, x: &[f64]) -> f64 {
        mlp.forward(x).output_scalar()
    }

    #[test]
    fn forward_zero_network_and_linear_layer() {
        let zero = Mlp::zeros(&[3, 4, 1], Activation::Tanh);
        assert_eq!(scalar(&zero, &[0.3, -1.0, 2.0]), 0.0);

        let mut lin = Mlp::zeros(&[2, 1], Activation::Tanh);
        lin.layer_mut(0).data_mut().copy_from_slice(&[2.0, 3.0, 0.0]);
        assert_eq!(scalar(&lin, &[1.0, 1.0]), 5.0);
    }

    #[test]
    fn forward_identity_activation_is_linear_composition() {
        let mut rng = Rng::new(8);
        let net = Mlp::new(&[3, 2, 1], Activation::Identity, &mut rng);
        let x = [0.4, -0.7, 1.2];
        // Fold biases by extending x with 1 through each layer by hand.
        let a0 = {
            let mut a = Vector::from_slice(&x);
            a.push(1.0);
            a
        };
        let s0 = net.layers()[0].tr_mul_vec(&a0);
        let mut a1 = s0.clone();
        a1.push(1.0);
        let s1 = net.layers()[1].tr_mul_vec(&a1);
        assert!((scalar(&net, &x) - s1[0]).abs() < 1e-15);
    }

    #[test]
    fn backward_zero_cotangent_and_linear_case() {
        let net = random_net(&[2, 3, 1], 1);
        let trace = net.forward(&[0.5, -0.25]);
        let res = net.backward(&trace, &[0.0]);
        for g in &res.grads {
            assert_eq!(g.frobenius_norm(), 0.0);
        }

        let mut lin = Mlp::zeros(&[2, 1], Activation::Tanh);
        lin.layer_mut(0).data_mut().copy_from_slice(&[2.0, 3.0, 0.5]);
        let x = [0.7, -0.2];
        let trace = lin.forward(&x);
        let res = lin.backward(&trace, &[1.0]);
        assert_eq!(res.grads[0].data(), &[0.7, -0.2, 1.0]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let net = random_net(&[3, 5, 4, 1], 2);
        let x = [0.3, -0.8, 0.45];
        let trace = net.forward(&x);
        let res = net.backward(&trace, &[1.0]);
        let h = 1e-5;
        for l in 0..net.num_layers() {
            for idx in 0..net.layers()[l].data().len() {
                let mut plus = net.clone();
                plus.layer_mut(l).data_mut()[idx] += h;
                let mut minus = net.clone();
                minus.layer_mut(l).data_mut()[idx] -= h;
                let fd = (scalar(&plus, &x) - scalar(&minus, &x)) / (2.0 * h);
                let an = res.grads[l].data()[idx];
                let denom = fd.abs().max(an.abs()).max(1e-8);
                assert!(
                    (fd - an).abs() / denom <= 1e-6,
                    "layer {l} idx {idx}: fd={fd} an={an}"
                );
            }
        }
    }

    #[test]
    fn backward_reconstruction_invariant() {
        let net = random_net(&[2, 4, 3, 2], 3);
        let trace = net.forward(&[1.1, -0.6]);
        let res = net.backward(&trace, &[0.3, -1.7]);
        for l in 0..net.num_layers() {
            let rebuilt = outer(&trace.inputs[l], &res.pre_grads[l]);
            assert_eq!(res.grads[l], rebuilt);
        }
    }

    #[test]
    fn backward_cotangent_linearity() {
        let net = random_net(&[2, 4, 1], 4);
        let trace = net.forward(&[0.2, 0.9]);
        let base = net.backward(&trace, &[1.0]);
        // Power-of-two scales commute with every FP operation bit-exactly.
        for alpha in [2.0, 0.5, 8.0] {
            let scaled = net.backward(&trace, &[alpha]);
            for l in 0..net.num_layers() {
                for (a, b) in scaled.grads[l].data().iter().zip(base.grads[l].data()) {
                    assert_eq!(*a, alpha * b);
                }
            }
        }
        let scaled = net.backward(&trace, &[1.7]);
        for l in 0..net.num_layers() {
            for (a, b) in scaled.grads[l].data().iter().zip(base.grads[l].data()) {
                assert!((a - 1.7 * b).abs() <= 1e-14 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn input_gradient_cases() {
        let mut lin = Mlp::zeros(&[2, 1], Activation::Tanh);
        lin.layer_mut(0).data_mut().copy_from_slice(&[2.0, 3.0, 0.5]);
        let trace = lin.forward(&[0.4, 0.6]);
        let g = lin.input_gradient(&trace, &[1.0]);
        assert_eq!(&g[..], &[2.0, 3.0]);

        let zero = Mlp::zeros(&[3, 2, 1], Activation::Tanh);
        let trace = zero.forward(&[0.1, 0.2, 0.3]);
        assert_eq!(&zero.input_gradient(&trace, &[1.0])[..], &[0.0, 0.0, 0.0]);

        let net = random_net(&[3, 6, 5, 1], 5);
        let x = [0.25, -0.4, 0.9];
        let trace = net.forward(&x);
        let an = net.input_gradient(&trace, &[1.0]);
        let h = 1e-5;
        for i in 0..x.len() {
            let mut xp = x;
            xp[i] += h;
            let mut xm = x;
            xm[i] -= h;
            let fd = (scalar(&net, &xp) - scalar(&net, &xm)) / (2.0 * h);
            let denom = fd.abs().max(an[i].abs()).max(1e-8);
            assert!((fd - an[i]).abs() / denom <= 1e-6);
        }
    }

    #[test]
    fn forward_tangent_cases() {
        let net = random_net(&[3, 5, 1], 6);
        let x = [0.3, 0.1, -0.2];
        let (_, t) = net.forward_tangent(&x, &[0.0, 0.0, 0.0]);
        assert_eq!(t.output_scalar(), 0.0);

        let mut lin = Mlp::zeros(&[2, 1], Activation::Tanh);
        lin.layer_mut(0).data_mut().copy_from_slice(&[2.0, 3.0, 0.5]);
        let (_, t) = lin.forward_tangent(&[0.0, 0.0], &[1.0, -1.0]);
        assert_eq!(t.output_scalar(), -1.0);

        // Consistency with the reverse-mode input gradient.
        let mut rng = Rng::new(7);
        for _ in 0..20 {
            let xdot = [rng.uniform_range(-1.0, 1.0), rng.uniform_range(-1.0, 1.0), rng.uniform_range(-1.0, 1.0)];
            let (trace, t) = net.forward_tangent(&x, &xdot);
            let ig = net.input_gradient(&trace, &[1.0]);
            let expect = ig.dot(&xdot);
            let denom = expect.abs().max(1e-12);
            assert!((t.output_scalar() - expect).abs() / denom <= 1e-12);
        }
    }

    #[test]
    fn forward_tangent_finite_difference_order() {
        let net = random_net(&[2, 6, 6, 1], 9);
        let x = [0.4, -0.3];
        let xdot = [0.8, 0.6];
        let (_, t) = net.forward_tangent(&x, &xdot);
        let exact = t.output_scalar();
        let fd = |h: f64| {
            let xp: Vec<f64> = x.iter().zip(&xdot).map(|(a, d)| a + h * d).collect();
            let xm: Vec<f64> = x.iter().zip(&xdot).map(|(a, d)| a - h * d).collect();
            (scalar(&net, &xp) - scalar(&net, &xm)) / (2.0 * h)
        };
        let e1 = (fd(1e-3) - exact).abs();
        let e2 = (fd(5e-4) - exact).abs();
        let ratio = e1 / e2;
        assert!((3.0..=5.0).contains(&ratio), "O(h^2) ratio {ratio}, e1={e1} e2={e2}");
    }

    #[test]
    fn weight_tangent_matches_backward() {
        // ⟨grad, dir⟩ computed by reverse mode must equal the forward
        // weight-tangent directional derivative.
        let net = random_net(&[3, 4, 2], 10);
        let mut rng = Rng::new(11);
        let x = [0.2, -0.5, 0.7];
        let dir: Vec<Matrix> = net
            .layers()
            .iter()
            .map(|w| Matrix::from_fn(w.rows(), w.cols(), |_, _| rng.uniform_range(-1.0, 1.0)))
            .collect();
        let (trace, ydot) = net.forward_weight_tangent(&x, &dir);
        for out in 0..2 {
            let mut dy = [0.0, 0.0];
            dy[out] = 1.0;
            let res = net.backward(&trace, &dy);
            let mut expect = 0.0;
            for l in 0..net.num_layers() {
                expect += res.grads[l]
                    .data()
                    .iter()
                    .zip(dir[l].data())
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            }
            assert!((ydot[out] - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn double_backprop_linear_and_zero_tangent() {
        let mut lin = Mlp::zeros(&[2, 1], Activation::Tanh);
        lin.layer_mut(0).data_mut().copy_from_slice(&[2.0, 3.0, 0.5]);
        let xdot = [0.3, -0.9];
        let (trace, t) = lin.forward_tangent(&[0.1, 0.2], &xdot);
        let res = lin.backward_over_tangent(&trace, &t, &[1.0]);
        assert_eq!(res.grads[0].data(), &[0.3, -0.9, 0.0]);

        let net = random_net(&[2, 4, 1], 12);
        let (trace, t) = net.forward_tangent(&[0.1, 0.2], &[0.0, 0.0]);
        let res = net.backward_over_tangent(&trace, &t, &[1.0]);
        for g in &res.grads {
            assert_eq!(g.frobenius_norm(), 0.0);
        }
    }

    #[test]
    fn double_backprop_matches_finite_differences() {
        let net = random_net(&[2, 5, 4, 1], 13);
        let x = [0.35, -0.6];
        let xdot = [1.0, 0.5];
        let (trace, t) = net.forward_tangent(&x, &xdot);
        let res = net.backward_over_tangent(&trace, &t, &[1.0]);
        let ydot_of = |m: &Mlp| {
            let (_, t) = m.forward_tangent(&x, &xdot);
            t.output_scalar()
        };
        let h = 1e-4;
        for l in 0..net.num_layers() {
            for idx in 0..net.layers()[l].data().len() {
                let mut plus = net.clone();
                plus.layer_mut(l).data_mut()[idx] += h;
                let mut minus = net.clone();
                minus.layer_mut(l).data_mut()[idx] -= h;
                let fd = (ydot_of(&plus) - ydot_of(&minus)) / (2.0 * h);
                let an = res.grads[l].data()[idx];
                let denom = fd.abs().max(an.abs());
                if denom < 1e-7 {
                    assert!((fd - an).abs() < 1e-10);
                } else {
                    assert!(
                        (fd - an).abs() / denom <= 1e-4,
                        "layer {l} idx {idx}: fd={fd} an={an}"
                    );
                }
            }
        }
    }
}
