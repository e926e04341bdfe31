//! Single-layer LSTM cell with gates ordered `input, forget, cell, output`.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;

use super::params::{join, ParamSet};
use crate::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell<T> {
    /// `(4H, E)`
    pub w_ih: Array2<T>,
    /// `(4H, H)`
    pub w_hh: Array2<T>,
    /// `(4H)`
    pub bias: Array1<T>,
}

/// Everything the backward pass needs from one step.
#[derive(Debug, Clone)]
pub struct LstmStepCache<T> {
    x: Array2<T>,
    h_prev: Array2<T>,
    c_prev: Array2<T>,
    i: Array2<T>,
    f: Array2<T>,
    g: Array2<T>,
    o: Array2<T>,
    tanh_c: Array2<T>,
}

impl<T: Real> LstmCell<T> {
    /// Uniform `U(-1/sqrt(H), 1/sqrt(H))` weights, zero biases except the
    /// forget gate which starts at 1.
    pub fn new(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let k = 1.0 / (hidden as f64).sqrt();
        let mut bias = Array1::zeros(4 * hidden);
        bias.slice_mut(s![hidden..2 * hidden]).fill(T::one());
        Self {
            w_ih: Array2::from_shape_simple_fn((4 * hidden, input), || {
                T::c(rng.random_range(-k..k))
            }),
            w_hh: Array2::from_shape_simple_fn((4 * hidden, hidden), || {
                T::c(rng.random_range(-k..k))
            }),
            bias,
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_ih: Array2::zeros((4 * hidden, input)),
            w_hh: Array2::zeros((4 * hidden, hidden)),
            bias: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hh.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.w_ih.ncols()
    }

    pub fn step(
        &self,
        x: &Array2<T>,
        h: &Array2<T>,
        c: &Array2<T>,
    ) -> (Array2<T>, Array2<T>, LstmStepCache<T>) {
        let hd = self.hidden_dim();
        let z = x.dot(&self.w_ih.t()) + h.dot(&self.w_hh.t()) + &self.bias;
        let i = z.slice(s![.., 0..hd]).mapv(sigmoid);
        let f = z.slice(s![.., hd..2 * hd]).mapv(sigmoid);
        let g = z.slice(s![.., 2 * hd..3 * hd]).mapv(|v| v.tanh());
        let o = z.slice(s![.., 3 * hd..]).mapv(sigmoid);
        let c_new = &f * c + &i * &g;
        let tanh_c = c_new.mapv(|v| v.tanh());
        let h_new = &o * &tanh_c;
        let cache = LstmStepCache {
            x: x.clone(),
            h_prev: h.clone(),
            c_prev: c.clone(),
            i,
            f,
            g,
            o,
            tanh_c,
        };
        (h_new, c_new, cache)
    }

    /// Given gradients w.r.t. the step's `(h, c)` outputs, accumulates
    /// parameter gradients and returns `(dx, dh_prev, dc_prev)`.
    pub fn backward_step(
        &self,
        cache: &LstmStepCache<T>,
        dh: &Array2<T>,
        dc: &Array2<T>,
        grad: &mut Self,
    ) -> (Array2<T>, Array2<T>, Array2<T>) {
        let one = T::one();
        let hd = self.hidden_dim();
        let LstmStepCache {
            x,
            h_prev,
            c_prev,
            i,
            f,
            g,
            o,
            tanh_c,
        } = cache;

        let d_o = dh * tanh_c;
        let mut dc_total = dc.clone();
        ndarray::Zip::from(&mut dc_total)
            .and(dh)
            .and(o)
            .and(tanh_c)
            .for_each(|d, &dh, &o, &t| *d += dh * o * (one - t * t));

        let batch = x.nrows();
        let mut dz = Array2::<T>::zeros((batch, 4 * hd));
        ndarray::Zip::from(dz.slice_mut(s![.., 0..hd]))
            .and(&dc_total)
            .and(g)
            .and(i)
            .for_each(|d, &dc, &g, &i| *d = dc * g * i * (one - i));
        ndarray::Zip::from(dz.slice_mut(s![.., hd..2 * hd]))
            .and(&dc_total)
            .and(c_prev)
            .and(f)
            .for_each(|d, &dc, &cp, &f| *d = dc * cp * f * (one - f));
        ndarray::Zip::from(dz.slice_mut(s![.., 2 * hd..3 * hd]))
            .and(&dc_total)
            .and(i)
            .and(g)
            .for_each(|d, &dc, &i, &g| *d = dc * i * (one - g * g));
        ndarray::Zip::from(dz.slice_mut(s![.., 3 * hd..]))
            .and(&d_o)
            .and(o)
            .for_each(|d, &dout, &o| *d = dout * o * (one - o));

        grad.w_ih += &dz.t().dot(x);
        grad.w_hh += &dz.t().dot(h_prev);
        grad.bias += &dz.sum_axis(Axis(0));
        let dx = dz.dot(&self.w_ih);
        let dh_prev = dz.dot(&self.w_hh);
        let dc_prev = &dc_total * f;
        (dx, dh_prev, dc_prev)
    }
}

#[inline]
pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

impl<T: Real> ParamSet<T> for LstmCell<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[T])) {
        f(
            &join(prefix, "w_ih"),
            self.w_ih.shape(),
            self.w_ih.as_slice().unwrap(),
        );
        f(
            &join(prefix, "w_hh"),
            self.w_hh.shape(),
            self.w_hh.as_slice().unwrap(),
        );
        f(
            &join(prefix, "bias"),
            self.bias.shape(),
            self.bias.as_slice().unwrap(),
        );
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [T])) {
        f(&join(prefix, "w_ih"), self.w_ih.as_slice_mut().unwrap());
        f(&join(prefix, "w_hh"), self.w_hh.as_slice_mut().unwrap());
        f(&join(prefix, "bias"), self.bias.as_slice_mut().unwrap());
    }
}
