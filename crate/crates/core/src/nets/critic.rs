//! Scalar-output critics and the input-gradient machinery behind the
//! gradient penalty.
//!
//! For a ReLU network the input gradient at `x` is the linear chain
//! `W_0^T M_0 W_1^T M_1 ... W_L^T` where `M_l` are the activation masks at
//! `x`. The masks are piecewise constant, so the parameter gradient of any
//! function of that chain only involves the weights, never the biases.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::dense::{Mlp, MlpCache};
use super::params::{join, ParamSet};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Critic<T> {
    pub mlp: Mlp<T>,
}

/// Forward state of a critic evaluation at a batch of inputs.
#[derive(Debug, Clone)]
pub struct CriticEval<T> {
    pub scores: Array1<T>,
    cache: MlpCache<T>,
}

/// Per-row input gradients plus what the penalty backward pass needs.
#[derive(Debug, Clone)]
pub struct InputGradients<T> {
    /// `(batch, input_dim)`, row `b` is `dD/dx` at sample `b`.
    pub grads: Array2<T>,
    /// Masked chain vectors `a_l = M_l ⊙ u_{l+1}`, indexed by hidden layer.
    chain: Vec<Array2<T>>,
}

impl<T: Real> Critic<T> {
    /// `n_layers` affine layers, `hidden` units wide, scalar linear output.
    pub fn new(input: usize, hidden: usize, n_layers: usize, rng: &mut impl Rng) -> Self {
        Self {
            mlp: Mlp::new(input, hidden, 1, n_layers, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.mlp.input_dim()
    }

    fn check(&self, x: &Array2<T>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "critic expects {} inputs, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        Ok(())
    }

    pub fn scores(&self, x: &Array2<T>) -> Result<Array1<T>> {
        self.check(x)?;
        Ok(self.mlp.forward(x).index_axis_move(Axis(1), 0))
    }

    pub fn eval(&self, x: &Array2<T>) -> Result<CriticEval<T>> {
        self.check(x)?;
        let (out, cache) = self.mlp.forward_cached(x);
        Ok(CriticEval {
            scores: out.index_axis_move(Axis(1), 0),
            cache,
        })
    }

    /// Accumulates `sum_b dscores[b] * dD(x_b)/dθ` into `grad` and returns
    /// `dL/dx`.
    pub fn backward(
        &self,
        eval: &CriticEval<T>,
        dscores: &Array1<T>,
        grad: &mut Self,
    ) -> Array2<T> {
        let dy = dscores.clone().insert_axis(Axis(1));
        self.mlp.backward(&eval.cache, &dy, &mut grad.mlp)
    }

    /// Input gradient of the score for every row of the evaluated batch.
    pub fn input_gradients(&self, eval: &CriticEval<T>) -> InputGradients<T> {
        let layers = &self.mlp.layers;
        let n = layers.len();
        let batch = eval.scores.len();
        let top = layers[n - 1].weight.row(0);
        let mut u = Array2::from_shape_fn((batch, top.len()), |(_, j)| top[j]);
        let mut chain = vec![Array2::zeros((0, 0)); n - 1];
        for l in (0..n - 1).rev() {
            let mut a = u;
            a.zip_mut_with(&eval.cache.pre[l], |v, &z| {
                if z <= T::zero() {
                    *v = T::zero()
                }
            });
            u = a.dot(&layers[l].weight);
            chain[l] = a;
        }
        InputGradients { grads: u, chain }
    }

    /// Given `dL/dg` for each row's input gradient `g`, accumulates the
    /// parameter gradient of `L` into `grad`.
    pub fn input_gradients_backward(
        &self,
        eval: &CriticEval<T>,
        ig: &InputGradients<T>,
        dgrads: &Array2<T>,
        grad: &mut Self,
    ) {
        let layers = &self.mlp.layers;
        let n = layers.len();
        let mut du = dgrads.clone();
        for l in 0..n - 1 {
            grad.mlp.layers[l].weight += &ig.chain[l].t().dot(&du);
            let mut da = du.dot(&layers[l].weight.t());
            da.zip_mut_with(&eval.cache.pre[l], |v, &z| {
                if z <= T::zero() {
                    *v = T::zero()
                }
            });
            du = da;
        }
        let top = du.sum_axis(Axis(0));
        let mut row = grad.mlp.layers[n - 1].weight.row_mut(0);
        row += &top;
    }
}

/// Score of a single input vector.
pub fn critic_score<T: Real>(params: &Critic<T>, x: &[T]) -> Result<T> {
    let x = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row vector");
    Ok(params.scores(&x)?[0])
}

impl<T: Real> ParamSet<T> for Critic<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[T])) {
        self.mlp.visit(&join(prefix, "mlp"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [T])) {
        self.mlp.visit_mut(&join(prefix, "mlp"), f);
    }
}
