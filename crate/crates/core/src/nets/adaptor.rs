use ndarray::{Array2, Array3};
use rand::Rng;

use super::dense::{Mlp, MlpCache};
use super::params::{join, ParamSet};
use super::seq;
use crate::traj_data::Point;
use crate::{Error, Real, Result};

/// Residual MLP applied to non-overlapping chunks of `window` steps:
/// `chunk -> chunk + mlp(chunk)`. The last layer starts at zero so a fresh
/// adaptor is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Adaptor<T> {
    pub mlp: Mlp<T>,
    pub window: usize,
}

#[derive(Debug, Clone)]
pub struct AdaptorCache<T> {
    mlp: MlpCache<T>,
    dims: (usize, usize),
}

impl<T: Real> Adaptor<T> {
    pub fn new(window: usize, hidden: usize, n_layers: usize, rng: &mut impl Rng) -> Self {
        let mut mlp = Mlp::new(2 * window, hidden, 2 * window, n_layers, rng);
        let last = mlp.layers.last_mut().unwrap();
        last.weight.fill(T::zero());
        last.bias.fill(T::zero());
        Self { mlp, window }
    }

    fn chunks(&self, x: &Array3<T>) -> Result<Array2<T>> {
        let (batch, steps, _) = x.dim();
        if steps % self.window != 0 {
            return Err(Error::Config(format!(
                "{steps} steps cannot be cut into chunks of {}",
                self.window
            )));
        }
        Ok(x.as_standard_layout()
            .into_owned()
            .into_shape_with_order((batch * steps / self.window, 2 * self.window))
            .expect("contiguous"))
    }

    /// `x` is `(batch, steps, 2)` with `steps` a multiple of the window.
    pub fn forward(&self, x: &Array3<T>) -> Result<(Array3<T>, AdaptorCache<T>)> {
        let flat = self.chunks(x)?;
        let (delta, mlp) = self.mlp.forward_cached(&flat);
        let out = (flat + delta)
            .into_shape_with_order(x.raw_dim())
            .expect("same size");
        Ok((
            out,
            AdaptorCache {
                mlp,
                dims: (x.dim().0, x.dim().1),
            },
        ))
    }

    pub fn backward(
        &self,
        cache: &AdaptorCache<T>,
        dout: &Array3<T>,
        grad: &mut Self,
    ) -> Array3<T> {
        let dflat = self.chunks(dout).expect("shape checked in forward");
        let dx = &dflat + &self.mlp.backward(&cache.mlp, &dflat, &mut grad.mlp);
        dx.into_shape_with_order((cache.dims.0, cache.dims.1, 2))
            .expect("same size")
    }
}

/// Adapts one predicted sequence chunk by chunk.
pub fn adapt_offsets<T: Real>(params: &Adaptor<T>, offsets: &[Point]) -> Result<Vec<Point>> {
    let x = seq::stack::<T, _>(&[offsets])?;
    let (out, _) = params.forward(&x)?;
    Ok(seq::unstack(&out).remove(0))
}

impl<T: Real> ParamSet<T> for Adaptor<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[T])) {
        self.mlp.visit(&join(prefix, "mlp"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [T])) {
        self.mlp.visit_mut(&join(prefix, "mlp"), f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn offsets() -> Vec<Point> {
        (0..12)
            .map(|k| [0.1 * k as f64, -0.05 * (k as f64).sqrt()])
            .collect()
    }

    fn trained_like() -> Adaptor<f64> {
        let mut a = Adaptor::new(6, 8, 2, &mut ChaCha8Rng::seed_from_u64(1));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        *a.mlp.layers.last_mut().unwrap() = super::super::dense::Dense::new(8, 12, &mut rng);
        a
    }

    #[test]
    fn fresh_adaptor_is_identity() {
        let a = Adaptor::<f64>::new(6, 8, 2, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(adapt_offsets(&a, &offsets()).unwrap(), offsets());
    }

    #[test]
    fn two_chunks_for_twelve_steps() {
        let a = trained_like();
        let x = seq::stack::<f64, _>(&[offsets()]).unwrap();
        assert_eq!(a.chunks(&x).unwrap().nrows(), 2);
        let out = adapt_offsets(&a, &offsets()).unwrap();
        assert_eq!(out.len(), 12);
        // Each chunk is processed on its own.
        let first = adapt_offsets(&a, &offsets()[..6]).unwrap();
        let second = adapt_offsets(&a, &offsets()[6..]).unwrap();
        assert_eq!(&out[..6], &first[..]);
        assert_eq!(&out[6..], &second[..]);
    }

    #[test]
    fn chunk_permutation_commutes() {
        let a = trained_like();
        let o = offsets();
        let swapped: Vec<Point> = o[6..].iter().chain(&o[..6]).cloned().collect();
        let out = adapt_offsets(&a, &o).unwrap();
        let out_sw = adapt_offsets(&a, &swapped).unwrap();
        assert_eq!(&out[..6], &out_sw[6..]);
        assert_eq!(&out[6..], &out_sw[..6]);
    }

    #[test]
    fn indivisible_length_rejected() {
        let a = trained_like();
        assert!(matches!(
            adapt_offsets(&a, &offsets()[..10]),
            Err(Error::Config(_))
        ));
    }
}
