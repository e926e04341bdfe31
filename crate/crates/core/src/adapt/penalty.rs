//! Critic objective with gradient penalty.
//!
//! The minimised critic loss is the batch mean of
//! `D(fake) - D(real) + lambda * (||grad_x D(x_hat)|| - 1)^2` with
//! `x_hat = gamma * real + (1 - gamma) * fake`, one `gamma ~ U[0, 1]` per pair.
//! Minimising it pushes `D(real)` up and `D(fake)` down.

use ndarray::{Array1, Array2, Zip};
use rand::Rng;

use crate::nets::Critic;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticLoss<T> {
    /// `mean(D(fake)) - mean(D(real)) + lambda * penalty`.
    pub total: T,
    /// `mean(D(real)) - mean(D(fake))`, the distance estimate.
    pub wasserstein: T,
    /// Mean squared deviation of the input-gradient norm from 1.
    pub penalty: T,
}

fn check_pair<T: Real>(real: &Array2<T>, fake: &Array2<T>) -> Result<()> {
    if real.dim() != fake.dim() || real.nrows() == 0 {
        return Err(Error::Shape(format!(
            "critic batches differ or are empty: {:?} vs {:?}",
            real.dim(),
            fake.dim()
        )));
    }
    Ok(())
}

fn draw_gammas<T: Real>(rng: &mut impl Rng, n: usize) -> Vec<T> {
    (0..n).map(|_| T::c(rng.random::<f64>())).collect()
}

/// Gradient penalty with fresh interpolation coefficients.
pub fn gradient_penalty<T: Real>(
    critic: &Critic<T>,
    real: &Array2<T>,
    fake: &Array2<T>,
    rng: &mut impl Rng,
) -> Result<T> {
    let gammas = draw_gammas(rng, real.nrows());
    gradient_penalty_with_gammas(critic, real, fake, &gammas, None)
}

/// Gradient penalty at `gamma_b * real_b + (1 - gamma_b) * fake_b`. When
/// `grad` is given, `coeff * dPenalty/dtheta` is accumulated into it.
pub fn gradient_penalty_with_gammas<T: Real>(
    critic: &Critic<T>,
    real: &Array2<T>,
    fake: &Array2<T>,
    gammas: &[T],
    grad: Option<(&mut Critic<T>, T)>,
) -> Result<T> {
    check_pair(real, fake)?;
    if gammas.len() != real.nrows() {
        return Err(Error::Shape(format!(
            "{} interpolation coefficients for {} pairs",
            gammas.len(),
            real.nrows()
        )));
    }
    let batch = real.nrows();
    let mut mixed = fake.clone();
    for (b, mut row) in mixed.outer_iter_mut().enumerate() {
        let g = gammas[b];
        Zip::from(&mut row)
            .and(real.row(b))
            .for_each(|m, &r| *m = g * r + (T::one() - g) * *m);
    }
    let eval = critic.eval(&mixed)?;
    let ig = critic.input_gradients(&eval);
    let norms: Array1<T> = ig
        .grads
        .outer_iter()
        .map(|g| g.iter().map(|&v| v * v).sum::<T>().sqrt())
        .collect();
    if norms.iter().any(|n| !n.is_finite()) {
        return Err(Error::Numeric("non-finite critic input gradient".into()));
    }
    let n = T::c(batch as f64);
    let penalty = norms
        .iter()
        .map(|&v| (v - T::one()) * (v - T::one()))
        .sum::<T>()
        / n;

    if let Some((grad, coeff)) = grad {
        // d/dg of coeff * mean (|g| - 1)^2 = coeff * 2 (|g| - 1) g / (|g| n).
        let mut dg = ig.grads.clone();
        for (b, mut row) in dg.outer_iter_mut().enumerate() {
            let norm = norms[b];
            let scale = if norm > T::zero() {
                coeff * T::c(2.0) * (norm - T::one()) / (norm * n)
            } else {
                T::zero()
            };
            row.mapv_inplace(|v| v * scale);
        }
        critic.input_gradients_backward(&eval, &ig, &dg, grad);
    }
    Ok(penalty)
}

/// Critic loss with fresh interpolation coefficients.
pub fn critic_loss<T: Real>(
    critic: &Critic<T>,
    real: &Array2<T>,
    fake: &Array2<T>,
    lambda: f64,
    rng: &mut impl Rng,
) -> Result<CriticLoss<T>> {
    let gammas = draw_gammas(rng, real.nrows());
    let mut scratch = critic.clone();
    critic_loss_and_grad(critic, real, fake, lambda, &gammas, &mut scratch)
}

/// Critic loss and its parameter gradient, accumulated into `grad`.
pub fn critic_loss_and_grad<T: Real>(
    critic: &Critic<T>,
    real: &Array2<T>,
    fake: &Array2<T>,
    lambda: f64,
    gammas: &[T],
    grad: &mut Critic<T>,
) -> Result<CriticLoss<T>> {
    check_pair(real, fake)?;
    let n = T::c(real.nrows() as f64);
    let lambda = T::c(lambda);
    let real_eval = critic.eval(real)?;
    let fake_eval = critic.eval(fake)?;
    let mean_real = real_eval.scores.sum() / n;
    let mean_fake = fake_eval.scores.sum() / n;
    critic.backward(
        &fake_eval,
        &Array1::from_elem(real.nrows(), T::one() / n),
        grad,
    );
    critic.backward(
        &real_eval,
        &Array1::from_elem(real.nrows(), -T::one() / n),
        grad,
    );
    let penalty = gradient_penalty_with_gammas(critic, real, fake, gammas, Some((grad, lambda)))?;
    Ok(CriticLoss {
        total: mean_fake - mean_real + lambda * penalty,
        wasserstein: mean_real - mean_fake,
        penalty,
    })
}
