//! RMSprop, the optimizer used by every training stage.

use crate::nets::ParamSet;
use crate::Real;

/// `v <- rho v + (1 - rho) g^2`, `p <- p - lr g / (sqrt(v) + eps)`.
#[derive(Debug, Clone)]
pub struct RmsProp<T> {
    pub lr: T,
    pub rho: T,
    pub eps: T,
    square_avg: Vec<T>,
    steps: usize,
}

impl<T: Real> RmsProp<T> {
    pub fn new(lr: f64) -> Self {
        Self {
            lr: T::c(lr),
            rho: T::c(0.99),
            eps: T::c(1e-8),
            square_avg: Vec::new(),
            steps: 0,
        }
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step<P: ParamSet<T>>(&mut self, params: &mut P, grads: &P) {
        let g = grads.to_flat();
        if self.square_avg.len() != g.len() {
            assert!(
                self.square_avg.is_empty(),
                "optimizer reused across parameter sets"
            );
            self.square_avg = vec![T::zero(); g.len()];
        }
        let (rho, lr, eps) = (self.rho, self.lr, self.eps);
        for (v, &gi) in self.square_avg.iter_mut().zip(&g) {
            *v = rho * *v + (T::one() - rho) * gi * gi;
        }
        let mut pos = 0;
        let avg = &self.square_avg;
        params.visit_mut("", &mut |_, p| {
            for (k, x) in p.iter_mut().enumerate() {
                let i = pos + k;
                *x -= lr * g[i] / (avg[i].sqrt() + eps);
            }
            pos += p.len();
        });
        self.steps += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::Dense;
    use ndarray::array;

    #[test]
    fn first_step_matches_formula() {
        let mut p = Dense {
            weight: array![[1.0f64, 2.0]],
            bias: array![0.5],
        };
        let g = Dense {
            weight: array![[0.1, -0.2]],
            bias: array![0.0],
        };
        let mut opt = RmsProp::new(0.01);
        opt.step(&mut p, &g);
        // v = 0.01 g^2, update = lr g / (0.1 |g| + eps) = lr * sign(g) * 10.
        let expect = |w: f64, g: f64| w - 0.01 * g / ((0.01f64 * g * g).sqrt() + 1e-8);
        assert!((p.weight[[0, 0]] - expect(1.0, 0.1)).abs() < 1e-12);
        assert!((p.weight[[0, 1]] - expect(2.0, -0.2)).abs() < 1e-12);
        assert_eq!(p.bias[0], 0.5);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn minimises_quadratic() {
        let mut p = Dense {
            weight: array![[3.0f64, -4.0]],
            bias: array![1.0],
        };
        let mut opt = RmsProp::new(0.05);
        for _ in 0..2000 {
            let g = p.clone();
            opt.step(&mut p, &g);
        }
        assert!(p.to_flat().iter().all(|x| x.abs() < 0.1));
    }
}
