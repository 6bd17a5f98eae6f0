use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

/// Fully connected layer computing `x · weight + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// Shape `(inputs, outputs)`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    /// Uniform init in `±gain/sqrt(inputs)`; `gain = 0` yields an all-zero layer.
    pub fn new(inputs: usize, outputs: usize, gain: f64, rng: &mut impl Rng) -> Self {
        let bound = gain / (inputs as f64).sqrt();
        let weight = Array2::from_shape_fn((inputs, outputs), |_| {
            if bound == 0.0 {
                0.0
            } else {
                rng.random_range(-bound..bound)
            }
        });
        Self { weight, bias: Array1::zeros(outputs) }
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }
}

/// Multi-layer perceptron with tanh hidden activations and a linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Gradient of a scalar loss with respect to every layer of an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `sizes = [inputs, hidden.., outputs]`; the head is scaled by `head_gain`.
    pub fn new(sizes: &[usize], head_gain: f64, rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "an mlp needs input and output sizes");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let gain = if i + 1 == n { head_gain } else { 1.0 };
                Linear::new(sizes[i], sizes[i + 1], gain, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Linear>) -> Result<Self, String> {
        if layers.is_empty() {
            return Err("no layers".into());
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(format!("layer {i}: bias length {} != outputs {}", l.bias.len(), l.outputs()));
            }
            if i > 0 && layers[i - 1].outputs() != l.inputs() {
                return Err(format!(
                    "layer {i}: expects {} inputs but previous layer gives {}",
                    l.inputs(),
                    layers[i - 1].outputs()
                ));
            }
        }
        Ok(Self { layers })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs()];
        s.extend(self.layers.iter().map(Linear::outputs));
        s
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().unwrap().outputs()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut h = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            h = h.dot(&l.weight) + &l.bias;
            if i + 1 < self.layers.len() {
                h.mapv_inplace(f64::tanh);
            }
        }
        h
    }

    /// Forward pass keeping every layer input for [`Mlp::backward`].
    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> (Array2<f64>, Vec<Array2<f64>>) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            let next = h.dot(&l.weight) + &l.bias;
            inputs.push(h);
            h = next;
            if i + 1 < self.layers.len() {
                h.mapv_inplace(f64::tanh);
            }
        }
        (h, inputs)
    }

    /// Backpropagates `grad_out = dL/d(output)` through the cached pass.
    pub fn backward(&self, inputs: &[Array2<f64>], grad_out: Array2<f64>) -> MlpGrad {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out;
        for (i, l) in self.layers.iter().enumerate().rev() {
            let x = &inputs[i];
            grads.push(Linear { weight: x.t().dot(&g).as_standard_layout().into_owned(), bias: g.sum_axis(Axis(0)) });
            if i > 0 {
                // x is the tanh output of the previous layer
                let mut back = g.dot(&l.weight.t());
                back.zip_mut_with(x, |b, &a| *b *= 1.0 - a * a);
                g = back;
            }
        }
        grads.reverse();
        MlpGrad { layers: grads }
    }
}

impl MlpGrad {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Linear { weight: Array2::zeros(l.weight.raw_dim()), bias: Array1::zeros(l.bias.len()) })
                .collect(),
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.layers.iter().map(|l| l.weight.iter().chain(l.bias.iter()).map(|v| v * v).sum::<f64>()).sum()
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weight *= k;
            l.bias *= k;
        }
    }
}

/// Adam state for one network.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: i32,
    m: MlpGrad,
    v: MlpGrad,
}

impl Adam {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: MlpGrad::zeros_like(net),
            v: MlpGrad::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grad: &MlpGrad) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = self.learning_rate;
        let eps = self.epsilon;
        for (((p, g), m), v) in net.layers.iter_mut().zip(&grad.layers).zip(&mut self.m.layers).zip(&mut self.v.layers) {
            let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            };
            ndarray::Zip::from(&mut p.weight).and(&g.weight).and(&mut m.weight).and(&mut v.weight).for_each(
                |p, &g, m, v| update(p, g, m, v),
            );
            ndarray::Zip::from(&mut p.bias).and(&g.bias).and(&mut m.bias).and(&mut v.bias).for_each(|p, &g, m, v| {
                update(p, g, m, v)
            });
        }
    }
}
