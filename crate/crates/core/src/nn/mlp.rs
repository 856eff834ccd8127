use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::matrix::{gemm, Matrix};
use crate::error::{ensure_dim, Error, Result};
use crate::real::Real;
use crate::snapshot::{join_usize, split_usize, Snapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Snapshot(format!("unknown activation `{other}`"))),
        }
    }

    #[inline]
    fn apply<T: Real>(self, x: T) -> T {
        match self {
            // NaN must survive; `max` would map it to zero
            Activation::Relu => {
                if x < T::zero() {
                    T::zero()
                } else {
                    x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output<T: Real>(self, y: T) -> T {
        match self {
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - y * y,
            Activation::Identity => T::one(),
        }
    }
}

/// Fully connected network with every parameter in one flat buffer.
///
/// Layer `l` stores its `[fan_in x fan_out]` row-major weight followed by its
/// bias. The flat layout lets Adam, soft target updates, checkpoints and the
/// finite-difference checks all treat a network as one vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    widths: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<T>,
}

/// Layer outputs retained by [`Mlp::forward_cached`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    /// `values[0]` is the input; `values[l + 1]` is the output of layer `l`.
    values: Vec<Matrix<T>>,
}

impl<T> MlpCache<T> {
    pub fn output(&self) -> &Matrix<T> {
        self.values.last().expect("cache holds at least the input")
    }
}

impl<T: Real> Mlp<T> {
    /// Hidden layers use `hidden`, the last layer uses `output`.
    /// Weights and biases start uniform in `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(
        widths: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        let layers = widths.len() - 1;
        let activations = (0..layers).map(|l| if l + 1 == layers { output } else { hidden }).collect();
        Self::with_activations(widths, activations, rng)
    }

    pub fn with_activations<R: Rng + ?Sized>(
        widths: &[usize],
        activations: Vec<Activation>,
        rng: &mut R,
    ) -> Self {
        assert_eq!(activations.len() + 1, widths.len());
        let n = param_count(widths);
        let mut params = Vec::with_capacity(n);
        for w in widths.windows(2) {
            let bound = T::of(w[0] as f64).sqrt().recip().f64();
            for _ in 0..(w[0] * w[1] + w[1]) {
                params.push(T::of(rng.random_range(-bound..=bound)));
            }
        }
        Self { widths: widths.to_vec(), activations, params }
    }

    pub fn from_params(widths: &[usize], activations: Vec<Activation>, params: Vec<T>) -> Result<Self> {
        if widths.len() < 2 || activations.len() + 1 != widths.len() {
            return Err(Error::InvalidConfig("inconsistent MLP layout".into()));
        }
        ensure_dim("mlp parameter count", param_count(widths), params.len())?;
        if !params.iter().all(|p| p.is_finite()) {
            return Err(Error::NonFinite("mlp parameters".into()));
        }
        Ok(Self { widths: widths.to_vec(), activations, params })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn zero_grads(&self) -> Vec<T> {
        vec![T::zero(); self.params.len()]
    }

    /// Multiplies the last layer's weights and bias by `factor`.
    pub fn scale_output_layer(&mut self, factor: T) {
        let l = self.widths.len() - 2;
        let (w, _) = self.layer_offsets(l);
        for p in &mut self.params[w..] {
            *p *= factor;
        }
    }

    fn layer_offsets(&self, layer: usize) -> (usize, usize) {
        let mut off = 0;
        for w in self.widths.windows(2).take(layer) {
            off += w[0] * w[1] + w[1];
        }
        let fan_in = self.widths[layer];
        (off, off + fan_in * self.widths[layer + 1])
    }

    pub fn forward(&self, input: &Matrix<T>) -> Result<Matrix<T>> {
        ensure_dim("mlp input width", self.input_dim(), input.cols())?;
        let mut x = input.clone();
        for l in 0..self.activations.len() {
            x = self.layer_forward(l, &x);
        }
        Ok(x)
    }

    pub fn forward_cached(&self, input: &Matrix<T>) -> Result<MlpCache<T>> {
        ensure_dim("mlp input width", self.input_dim(), input.cols())?;
        let mut values = Vec::with_capacity(self.activations.len() + 1);
        values.push(input.clone());
        for l in 0..self.activations.len() {
            let next = self.layer_forward(l, values.last().unwrap());
            values.push(next);
        }
        Ok(MlpCache { values })
    }

    fn layer_forward(&self, l: usize, x: &Matrix<T>) -> Matrix<T> {
        let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
        let (w, b) = self.layer_offsets(l);
        let bias = &self.params[b..b + fan_out];
        let mut out = Matrix::zeros(x.rows(), fan_out);
        for i in 0..x.rows() {
            out.row_mut(i).copy_from_slice(bias);
        }
        gemm(
            x.rows(),
            fan_in,
            fan_out,
            T::one(),
            (x.as_slice(), fan_in as isize, 1),
            (&self.params[w..b], fan_out as isize, 1),
            T::one(),
            (out.as_mut_slice(), fan_out as isize, 1),
        );
        let act = self.activations[l];
        if act != Activation::Identity {
            for v in out.as_mut_slice() {
                *v = act.apply(*v);
            }
        }
        out
    }

    /// Reverse-mode pass for the scalar `sum(output * upstream)`.
    ///
    /// Parameter gradients are accumulated into `grads`; the gradient with
    /// respect to the input batch is returned.
    pub fn backward_into(
        &self,
        cache: &MlpCache<T>,
        upstream: &Matrix<T>,
        grads: &mut [T],
    ) -> Result<Matrix<T>> {
        ensure_dim("mlp grad buffer", self.params.len(), grads.len())?;
        ensure_dim("mlp upstream rows", cache.output().rows(), upstream.rows())?;
        ensure_dim("mlp upstream width", self.output_dim(), upstream.cols())?;
        let batch = upstream.rows();
        let mut g = upstream.clone();
        for l in (0..self.activations.len()).rev() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let act = self.activations[l];
            let y = &cache.values[l + 1];
            if act != Activation::Identity {
                for (gv, &yv) in g.as_mut_slice().iter_mut().zip(y.as_slice()) {
                    *gv *= act.derivative_from_output(yv);
                }
            }
            let x = &cache.values[l];
            let (w, b) = self.layer_offsets(l);
            // dW += x^T g
            gemm(
                fan_in,
                batch,
                fan_out,
                T::one(),
                (x.as_slice(), 1, fan_in as isize),
                (g.as_slice(), fan_out as isize, 1),
                T::one(),
                (&mut grads[w..b], fan_out as isize, 1),
            );
            let db = &mut grads[b..b + fan_out];
            for i in 0..batch {
                for (d, &gv) in db.iter_mut().zip(g.row(i)) {
                    *d += gv;
                }
            }
            // g <- g W^T
            let mut next = Matrix::zeros(batch, fan_in);
            gemm(
                batch,
                fan_out,
                fan_in,
                T::one(),
                (g.as_slice(), fan_out as isize, 1),
                (&self.params[w..b], 1, fan_out as isize),
                T::zero(),
                (next.as_mut_slice(), fan_in as isize, 1),
            );
            g = next;
        }
        Ok(g)
    }

    /// Gradient of `sum(output * upstream)` with respect to the input only.
    pub fn input_gradient(&self, cache: &MlpCache<T>, upstream: &Matrix<T>) -> Result<Matrix<T>> {
        ensure_dim("mlp upstream rows", cache.output().rows(), upstream.rows())?;
        ensure_dim("mlp upstream width", self.output_dim(), upstream.cols())?;
        let batch = upstream.rows();
        let mut g = upstream.clone();
        for l in (0..self.activations.len()).rev() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let act = self.activations[l];
            if act != Activation::Identity {
                for (gv, &yv) in g.as_mut_slice().iter_mut().zip(cache.values[l + 1].as_slice()) {
                    *gv *= act.derivative_from_output(yv);
                }
            }
            let (w, b) = self.layer_offsets(l);
            let mut next = Matrix::zeros(batch, fan_in);
            gemm(
                batch,
                fan_out,
                fan_in,
                T::one(),
                (g.as_slice(), fan_out as isize, 1),
                (&self.params[w..b], 1, fan_out as isize),
                T::zero(),
                (next.as_mut_slice(), fan_in as isize, 1),
            );
            g = next;
        }
        Ok(g)
    }

    /// Like [`Mlp::backward_into`] with a fresh gradient buffer.
    pub fn backward(&self, cache: &MlpCache<T>, upstream: &Matrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
        let mut grads = self.zero_grads();
        let input_grad = self.backward_into(cache, upstream, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Polyak averaging `self <- tau * online + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, online: &Self, tau: T) -> Result<()> {
        soft_update(&mut self.params, &online.params, tau)
    }

    pub fn export(&self, prefix: &str, snap: &mut Snapshot<T>) {
        snap.set_meta(format!("{prefix}.widths"), join_usize(&self.widths));
        let acts: Vec<&str> = self.activations.iter().map(|a| a.name()).collect();
        snap.set_meta(format!("{prefix}.activations"), acts.join(","));
        for l in 0..self.activations.len() {
            let (w, b) = self.layer_offsets(l);
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            snap.push(format!("{prefix}.layer{l}.weight"), vec![fan_in, fan_out], self.params[w..b].to_vec());
            snap.push(format!("{prefix}.layer{l}.bias"), vec![fan_out], self.params[b..b + fan_out].to_vec());
        }
    }

    pub fn import(prefix: &str, snap: &Snapshot<T>) -> Result<Self> {
        let widths = split_usize(snap.meta(&format!("{prefix}.widths"))?)?;
        let activations = snap
            .meta(&format!("{prefix}.activations"))?
            .split(',')
            .map(Activation::parse)
            .collect::<Result<Vec<_>>>()?;
        if widths.len() < 2 || activations.len() + 1 != widths.len() {
            return Err(Error::Snapshot(format!("inconsistent layout for `{prefix}`")));
        }
        let mut params = Vec::with_capacity(param_count(&widths));
        for l in 0..activations.len() {
            for (part, shape) in [("weight", vec![widths[l], widths[l + 1]]), ("bias", vec![widths[l + 1]])] {
                let name: String = format!("{prefix}.layer{l}.{part}");
                let t = snap.tensor(&name)?;
                if t.shape != shape {
                    return Err(Error::Snapshot(format!("tensor `{name}` has shape {:?}", t.shape)));
                }
                params.extend_from_slice(&t.data);
            }
        }
        Self::from_params(&widths, activations, params)
    }
}

fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Elementwise `target <- tau * online + (1 - tau) * target`.
pub fn soft_update<T: Real>(target: &mut [T], online: &[T], tau: T) -> Result<()> {
    ensure_dim("soft update", target.len(), online.len())?;
    if !(tau >= T::zero() && tau <= T::one()) {
        return Err(Error::OutOfRange { what: "tau", value: format!("{tau}") });
    }
    let keep = T::one() - tau;
    for (t, &o) in target.iter_mut().zip(online) {
        *t = tau * o + keep * *t;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn random_batch(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_weights_output_bias() {
        let mut net = Mlp::<f64>::new(&[3, 2], Activation::Identity, Activation::Identity, &mut rng());
        net.params_mut()[..6].fill(0.0);
        net.params_mut()[6..].copy_from_slice(&[0.25, -4.0]);
        let mut r = rng();
        let out = net.forward(&random_batch(5, 3, &mut r)).unwrap();
        for i in 0..5 {
            assert_eq!(out.row(i), &[0.25, -4.0]);
        }
    }

    #[test]
    fn relu_clips_negative_preactivation() {
        let net = Mlp::from_params(&[1, 1], vec![Activation::Relu], vec![1.0, -3.0]).unwrap();
        let out = net.forward(&Matrix::from_vec(2, 1, vec![1.0, 5.0]).unwrap()).unwrap();
        assert_eq!(out.as_slice(), &[0.0, 2.0]);
    }

    #[test]
    fn forward_is_deterministic() {
        let mut r = rng();
        let net = Mlp::<f64>::new(&[4, 16, 16, 2], Activation::Relu, Activation::Identity, &mut r);
        let x = random_batch(7, 4, &mut r);
        let a = net.forward(&x).unwrap();
        let b = net.forward(&x).unwrap();
        assert!(a.as_slice().iter().zip(b.as_slice()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn scalar_chain_rule() {
        let net = Mlp::from_params(&[1, 1], vec![Activation::Identity], vec![0.7, 0.1]).unwrap();
        let x = Matrix::from_vec(1, 1, vec![2.5]).unwrap();
        let cache = net.forward_cached(&x).unwrap();
        let (g, gx) = net.backward(&cache, &Matrix::filled(1, 1, 1.0)).unwrap();
        assert_eq!(g, vec![2.5, 1.0]);
        assert_eq!(gx.as_slice(), &[0.7]);
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut r = rng();
        let net = Mlp::<f64>::new(&[3, 8, 2], Activation::Tanh, Activation::Identity, &mut r);
        let x = random_batch(4, 3, &mut r);
        let cache = net.forward_cached(&x).unwrap();
        let (g, gx) = net.backward(&cache, &Matrix::zeros(4, 2)).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        assert!(gx.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn input_width_is_checked() {
        let net = Mlp::<f64>::new(&[3, 2], Activation::Relu, Activation::Identity, &mut rng());
        assert!(matches!(net.forward(&Matrix::zeros(1, 4)), Err(Error::Dimension { .. })));
    }

    #[test]
    fn soft_update_endpoints() {
        let online = vec![1.0f64; 4];
        let mut target = vec![0.0f64; 4];
        soft_update(&mut target, &online, 0.0).unwrap();
        assert_eq!(target, vec![0.0; 4]);
        soft_update(&mut target, &online, 0.005).unwrap();
        assert!(target.iter().all(|&t| (t - 0.005).abs() < 1e-15));
        soft_update(&mut target, &online, 1.0).unwrap();
        assert_eq!(target, online);
        assert!(soft_update(&mut target, &online, 1.5).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let net = Mlp::<f32>::new(&[3, 5, 2], Activation::Relu, Activation::Tanh, &mut rng());
        let mut snap = Snapshot::new("test");
        net.export("net", &mut snap);
        assert_eq!(Mlp::import("net", &snap).unwrap(), net);
    }

    #[test]
    fn input_gradient_matches_full_backward() {
        let net = Mlp::<f64>::new(&[3, 6, 2], Activation::Tanh, Activation::Identity, &mut rng());
        let x = Matrix::from_fn(4, 3, |i, j| (i as f64 - j as f64) * 0.3);
        let up = Matrix::from_fn(4, 2, |i, j| (i + j) as f64 * 0.1 - 0.2);
        let cache = net.forward_cached(&x).unwrap();
        let (_, full) = net.backward(&cache, &up).unwrap();
        assert_eq!(net.input_gradient(&cache, &up).unwrap(), full);
    }
}
