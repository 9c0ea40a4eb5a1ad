//! Dense feed-forward networks with ReLU hidden layers, hand-written
//! backpropagation and an Adam optimizer.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputActivation {
    Identity,
    /// `scale * tanh(z)`.
    ScaledTanh { scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// (inputs, outputs)
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn uniform<R: Rng>(inputs: usize, outputs: usize, bound: f64, rng: &mut R) -> Self {
        Self {
            weight: Array2::from_shape_fn((inputs, outputs), |_| rng.gen_range(-bound..=bound)),
            bias: Array1::from_shape_fn(outputs, |_| rng.gen_range(-bound..=bound)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub output: OutputActivation,
}

/// Per-layer parameter gradients, same shapes as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Grads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weight.raw_dim()), Array1::zeros(l.bias.raw_dim())))
                .collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|(w, b)| w.iter().chain(b.iter()).all(|v| v.is_finite()))
    }
}

/// Intermediate values kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Cache {
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation output of each layer.
    pre: Vec<Array2<f64>>,
}

impl Mlp {
    /// `sizes` lists every layer width including input and output. Layers use
    /// the fan-in uniform initialization; the final layer can be shrunk to
    /// `final_bound` so initial outputs start near zero.
    pub fn new<R: Rng>(sizes: &[usize], output: OutputActivation, final_bound: Option<f64>, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "network needs input and output sizes");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let bound = match final_bound {
                    Some(b) if i == n - 1 => b,
                    _ => 1.0 / (sizes[i] as f64).sqrt(),
                };
                Dense::uniform(sizes[i], sizes[i + 1], bound, rng)
            })
            .collect();
        Self { layers, output }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").weight.ncols()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.weight.ncols())
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    fn activate_output(&self, z: &Array2<f64>) -> Array2<f64> {
        match self.output {
            OutputActivation::Identity => z.clone(),
            OutputActivation::ScaledTanh { scale } => z.mapv(|v| scale * v.tanh()),
        }
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut a = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weight);
            z += &layer.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
                a = z;
            } else {
                return self.activate_output(&z);
            }
        }
        unreachable!()
    }

    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        self.forward(view).into_raw_vec_and_offset().0
    }

    pub fn forward_train(&self, x: ArrayView2<f64>) -> (Array2<f64>, Cache) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        let last = self.layers.len() - 1;
        let mut out = None;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weight);
            z += &layer.bias;
            inputs.push(a);
            if i < last {
                a = z.mapv(|v| v.max(0.0));
                pre.push(z);
            } else {
                out = Some(self.activate_output(&z));
                pre.push(z);
                a = Array2::zeros((0, 0));
            }
        }
        (out.expect("at least one layer"), Cache { inputs, pre })
    }

    /// Gradients of a scalar loss given `grad_out` = dLoss/dOutput. Returns the
    /// parameter gradients and dLoss/dInput.
    pub fn backward(&self, cache: &Cache, grad_out: ArrayView2<f64>) -> (Grads, Array2<f64>) {
        let last = self.layers.len() - 1;
        let mut dz = match self.output {
            OutputActivation::Identity => grad_out.to_owned(),
            OutputActivation::ScaledTanh { scale } => {
                let mut d = grad_out.to_owned();
                Zip::from(&mut d).and(&cache.pre[last]).for_each(|g, &z| {
                    let t = z.tanh();
                    *g *= scale * (1.0 - t * t);
                });
                d
            }
        };
        let mut layers = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let dw = cache.inputs[i].t().dot(&dz);
            let db = dz.sum_axis(Axis(0));
            let mut da = dz.dot(&self.layers[i].weight.t());
            layers.push((dw, db));
            if i > 0 {
                Zip::from(&mut da)
                    .and(&cache.pre[i - 1])
                    .for_each(|g, &z| {
                        if z <= 0.0 {
                            *g = 0.0;
                        }
                    });
            }
            dz = da;
        }
        layers.reverse();
        (Grads { layers }, dz)
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count(), "parameter count mismatch");
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for v in l.weight.iter_mut().chain(l.bias.iter_mut()) {
                *v = it.next().expect("length checked");
            }
        }
    }

    /// `self = tau * source + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, source: &Mlp, tau: f64) {
        for (dst, src) in self.layers.iter_mut().zip(&source.layers) {
            Zip::from(&mut dst.weight)
                .and(&src.weight)
                .for_each(|d, &s| *d = tau * s + (1.0 - tau) * *d);
            Zip::from(&mut dst.bias)
                .and(&src.bias)
                .for_each(|d, &s| *d = tau * s + (1.0 - tau) * *d);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Grads,
    v: Grads,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Grads::zeros_like(net),
            v: Grads::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Grads) {
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = self.lr;
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[i];
            let (mw, mb) = &mut self.m.layers[i];
            let (vw, vb) = &mut self.v.layers[i];
            Zip::from(&mut layer.weight)
                .and(gw)
                .and(mw)
                .and(vw)
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                });
            Zip::from(&mut layer.bias)
                .and(gb)
                .and(mb)
                .and(vb)
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                });
        }
    }
}

/// Stacks equal-length rows into a matrix.
pub fn stack_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>, width: usize) -> Array2<f64> {
    let mut data = Vec::new();
    let mut n = 0;
    for r in rows {
        debug_assert_eq!(r.len(), width);
        data.extend_from_slice(r);
        n += 1;
    }
    Array2::from_shape_vec((n, width), data).expect("rows have equal width")
}

/// Horizontal concatenation `[a | b]`.
pub fn concat_cols(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((a.nrows(), a.ncols() + b.ncols()));
    out.slice_mut(s![.., ..a.ncols()]).assign(a);
    out.slice_mut(s![.., a.ncols()..]).assign(b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn finite_difference<F: Fn(&Mlp) -> f64>(net: &Mlp, f: F, eps: f64) -> Vec<f64> {
        let base = net.flat_params();
        let mut probe = net.clone();
        (0..base.len())
            .map(|i| {
                let mut p = base.clone();
                p[i] = base[i] + eps;
                probe.set_flat_params(&p);
                let up = f(&probe);
                p[i] = base[i] - eps;
                probe.set_flat_params(&p);
                let down = f(&probe);
                (up - down) / (2.0 * eps)
            })
            .collect()
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for output in [OutputActivation::Identity, OutputActivation::ScaledTanh { scale: 0.6 }] {
            let net = Mlp::new(&[5, 4, 4, 2], output, None, &mut rng);
            let x = Array2::from_shape_fn((3, 5), |_| rng.gen_range(-1.0..1.0));
            let target = Array2::from_shape_fn((3, 2), |_| rng.gen_range(-0.5..0.5));
            let loss = |n: &Mlp| (&n.forward(x.view()) - &target).mapv(|v| v * v).sum();
            let (out, cache) = net.forward_train(x.view());
            let grad_out = (&out - &target) * 2.0;
            let (grads, _) = net.backward(&cache, grad_out.view());
            let analytic = grads.flatten();
            let numeric = finite_difference(&net, loss, 1e-6);
            for (a, n) in analytic.iter().zip(&numeric) {
                let denom = a.abs().max(n.abs()).max(1e-8);
                assert!((a - n).abs() / denom < 1e-4 || (a - n).abs() < 1e-9, "{a} vs {n}");
            }
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::new(&[3, 6, 1], OutputActivation::Identity, None, &mut rng);
        let x = Array2::from_shape_vec((1, 3), vec![0.3, -0.2, 0.7]).unwrap();
        let (_, cache) = net.forward_train(x.view());
        let (_, dx) = net.backward(&cache, Array2::ones((1, 1)).view());
        for j in 0..3 {
            let mut up = x.clone();
            up[[0, j]] += 1e-6;
            let mut down = x.clone();
            down[[0, j]] -= 1e-6;
            let fd = (net.forward(up.view())[[0, 0]] - net.forward(down.view())[[0, 0]]) / 2e-6;
            assert!((fd - dx[[0, j]]).abs() < 1e-8);
        }
    }

    #[test]
    fn soft_update_is_exact_convex_combination() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let online = Mlp::new(&[4, 8, 2], OutputActivation::Identity, None, &mut rng);
        let mut target = Mlp::new(&[4, 8, 2], OutputActivation::Identity, None, &mut rng);
        let old = target.flat_params();
        target.soft_update_from(&online, 0.005);
        for ((t, o), p) in target.flat_params().iter().zip(online.flat_params()).zip(old) {
            assert!((t - (0.005 * o + 0.995 * p)).abs() <= 1e-12);
        }
        target.soft_update_from(&online, 1.0);
        assert_eq!(target.flat_params(), online.flat_params());
    }

    #[test]
    fn adam_reduces_quadratic_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Mlp::new(&[2, 8, 1], OutputActivation::Identity, None, &mut rng);
        let x = Array2::from_shape_vec((4, 2), vec![0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
        let y = Array2::from_shape_vec((4, 1), vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let mut opt = Adam::new(&net, 1e-2);
        let loss = |n: &Mlp| (&n.forward(x.view()) - &y).mapv(|v| v * v).mean().unwrap();
        let before = loss(&net);
        for _ in 0..200 {
            let (out, cache) = net.forward_train(x.view());
            let g = (&out - &y) * (2.0 / 4.0);
            let (grads, _) = net.backward(&cache, g.view());
            opt.step(&mut net, &grads);
        }
        assert!(loss(&net) < before * 0.5);
    }

    #[test]
    fn parameter_count_is_shape_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::new(&[34, 512, 512, 2], OutputActivation::Identity, None, &mut rng);
        assert_eq!(net.param_count(), 34 * 512 + 512 + 512 * 512 + 512 + 512 * 2 + 2);
        assert_eq!(net.hidden_sizes(), vec![512, 512]);
    }
}
