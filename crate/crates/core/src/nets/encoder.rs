use ndarray::{Array1, Array2, Array3};
use rand::Rng;

use super::dense::Dense;
use super::lstm::{LstmCell, LstmStepCache};
use super::params::{join, ParamSet};
use super::seq;
use crate::traj_data::Point;
use crate::{Error, Real, Result};

/// Step embedding followed by an LSTM; the final hidden state is the
/// trajectory feature.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder<T> {
    pub embed: Dense<T>,
    pub lstm: LstmCell<T>,
}

#[derive(Debug, Clone)]
pub struct EncoderCache<T> {
    steps: Vec<(Array2<T>, LstmStepCache<T>)>,
}

impl<T: Real> Encoder<T> {
    pub fn new(embed_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            embed: Dense::new(2, embed_dim, rng),
            lstm: LstmCell::new(embed_dim, hidden_dim, rng),
        }
    }

    pub fn zeros(embed_dim: usize, hidden_dim: usize) -> Self {
        Self {
            embed: Dense::zeros(2, embed_dim),
            lstm: LstmCell::zeros(embed_dim, hidden_dim),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.lstm.hidden_dim()
    }

    /// `obs` is `(batch, steps, 2)`; returns `(batch, hidden)` features.
    pub fn forward(&self, obs: &Array3<T>) -> (Array2<T>, EncoderCache<T>) {
        let batch = obs.shape()[0];
        let hd = self.hidden_dim();
        let mut h = Array2::zeros((batch, hd));
        let mut c = Array2::zeros((batch, hd));
        let mut steps = Vec::with_capacity(obs.shape()[1]);
        for t in 0..obs.shape()[1] {
            let x = seq::step(obs, t).to_owned();
            let e = self.embed.forward(&x);
            let (h2, c2, cache) = self.lstm.step(&e, &h, &c);
            steps.push((x, cache));
            h = h2;
            c = c2;
        }
        (h, EncoderCache { steps })
    }

    /// Backpropagates `dL/dfeature` through time, accumulating into `grad`.
    pub fn backward(&self, cache: &EncoderCache<T>, dfeature: &Array2<T>, grad: &mut Self) {
        let mut dh = dfeature.clone();
        let mut dc = Array2::zeros(dh.raw_dim());
        for (x, step) in cache.steps.iter().rev() {
            let (de, dh_prev, dc_prev) = self.lstm.backward_step(step, &dh, &dc, &mut grad.lstm);
            self.embed.backward(x, &de, &mut grad.embed);
            dh = dh_prev;
            dc = dc_prev;
        }
    }
}

/// Encodes one observed trajectory into its feature vector.
pub fn encode<T: Real>(params: &Encoder<T>, obs: &[Point]) -> Result<Array1<T>> {
    if obs.is_empty() {
        return Err(Error::Length { needed: 1, got: 0 });
    }
    let x = seq::stack::<T, _>(&[obs])?;
    let (h, _) = params.forward(&x);
    Ok(h.row(0).to_owned())
}

impl<T: Real> ParamSet<T> for Encoder<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[T])) {
        self.embed.visit(&join(prefix, "embed"), f);
        self.lstm.visit(&join(prefix, "lstm"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [T])) {
        self.embed.visit_mut(&join(prefix, "embed"), f);
        self.lstm.visit_mut(&join(prefix, "lstm"), f);
    }
}
