use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::params::{join, ParamSet};
use crate::Real;

/// Affine map `y = x W^T + b` with `W` stored as `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Real> Dense<T> {
    /// Uniform fan-in initialisation, `U(-1/sqrt(in), 1/sqrt(in))`.
    pub fn new(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        let k = 1.0 / (input as f64).sqrt();
        Self {
            weight: Array2::from_shape_simple_fn((output, input), || T::c(rng.random_range(-k..k))),
            bias: Array1::from_shape_simple_fn(output, || T::c(rng.random_range(-k..k))),
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn forward(&self, x: &Array2<T>) -> Array2<T> {
        x.dot(&self.weight.t()) + &self.bias
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &Array2<T>, dy: &Array2<T>, grad: &mut Self) -> Array2<T> {
        grad.weight += &dy.t().dot(x);
        grad.bias += &dy.sum_axis(Axis(0));
        dy.dot(&self.weight)
    }
}

impl<T: Real> ParamSet<T> for Dense<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[T])) {
        f(
            &join(prefix, "weight"),
            self.weight.shape(),
            self.weight.as_slice().unwrap(),
        );
        f(
            &join(prefix, "bias"),
            self.bias.shape(),
            self.bias.as_slice().unwrap(),
        );
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [T])) {
        f(&join(prefix, "weight"), self.weight.as_slice_mut().unwrap());
        f(&join(prefix, "bias"), self.bias.as_slice_mut().unwrap());
    }
}

/// Multilayer perceptron: ReLU between layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Dense<T>>,
}

#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    /// Input to each layer.
    pub inputs: Vec<Array2<T>>,
    /// Pre-activation of each hidden layer (the output layer is not stored).
    pub pre: Vec<Array2<T>>,
}

impl<T: Real> Mlp<T> {
    /// `n_layers` affine layers mapping `input -> hidden -> ... -> output`.
    pub fn new(
        input: usize,
        hidden: usize,
        output: usize,
        n_layers: usize,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(n_layers >= 1);
        let layers = (0..n_layers)
            .map(|l| {
                let i = if l == 0 { input } else { hidden };
                let o = if l + 1 == n_layers { output } else { hidden };
                Dense::new(i, o, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    pub fn forward(&self, x: &Array2<T>) -> Array2<T> {
        let mut h = self.layers[0].forward(x);
        for layer in &self.layers[1..] {
            h.mapv_inplace(relu);
            h = layer.forward(&h);
        }
        h
    }

    pub fn forward_cached(&self, x: &Array2<T>) -> (Array2<T>, MlpCache<T>) {
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len().saturating_sub(1)),
        };
        let mut h = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&h);
            cache.inputs.push(h);
            if l + 1 < self.layers.len() {
                h = z.mapv(relu);
                cache.pre.push(z);
            } else {
                h = z;
            }
        }
        (h, cache)
    }

    pub fn backward(&self, cache: &MlpCache<T>, dy: &Array2<T>, grad: &mut Self) -> Array2<T> {
        let mut d = dy.clone();
        for l in (0..self.layers.len()).rev() {
            if l + 1 < self.layers.len() {
                d.zip_mut_with(&cache.pre[l], |g, &z| {
                    if z <= T::zero() {
                        *g = T::zero()
                    }
                });
            }
            d = self.layers[l].backward(&cache.inputs[l], &d, &mut grad.layers[l]);
        }
        d
    }
}

#[inline]
pub(crate) fn relu<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

impl<T: Real> ParamSet<T> for Mlp<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[T])) {
        for (i, l) in self.layers.iter().enumerate() {
            l.visit(&join(prefix, &format!("layer{i}")), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [T])) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.visit_mut(&join(prefix, &format!("layer{i}")), f);
        }
    }
}
