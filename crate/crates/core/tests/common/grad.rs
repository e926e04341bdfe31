//! Gradient-check cases shared by the unit suite and the acceptance run.
//! Each returns `(label, worst relative error)` pairs.

use ctp_core::adapt::{critic_loss_and_grad, gradient_penalty_with_gammas};
use ctp_core::nets::{Adaptor, Critic, Decoder, Encoder, ParamSet};
use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_flat, gradcheck};

pub const TOL: f64 = 1e-3;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rand2(r: &mut ChaCha8Rng, shape: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_fn(shape, |_| r.random_range(-1.0..1.0))
}

fn rand3(r: &mut ChaCha8Rng, shape: (usize, usize, usize)) -> Array3<f64> {
    Array3::from_shape_fn(shape, |_| r.random_range(-1.0..1.0))
}

fn dot2(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a * b).sum()
}

fn dot3(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    (a * b).sum()
}

pub fn encoder() -> Vec<(&'static str, f64)> {
    let mut r = rng(1);
    let enc = Encoder::<f64>::new(4, 6, &mut r);
    assert!(enc.num_params() <= 1000);
    let obs = rand3(&mut r, (3, 5, 2));
    let w = rand2(&mut r, (3, 6));
    let (_, cache) = enc.forward(&obs);
    let mut grad = enc.zeros_like();
    enc.backward(&cache, &w, &mut grad);
    vec![(
        "encoder params",
        gradcheck(&enc, &grad, |p| dot2(&p.forward(&obs).0, &w)),
    )]
}

pub fn decoder(teacher: bool) -> Vec<(&'static str, f64)> {
    let mut r = rng(if teacher { 2 } else { 3 });
    let dec = Decoder::<f64>::new(4, 6, 5, 3, &mut r);
    assert!(dec.num_params() <= 1000);
    let feature = rand2(&mut r, (3, 6));
    let start = rand2(&mut r, (3, 2));
    let steps = 4;
    let teach = rand3(&mut r, (3, steps, 2));
    let teach = teacher.then_some(&teach);
    let w = rand3(&mut r, (3, steps, 2));
    let (_, cache) = dec.forward(&feature, &start, steps, teach).unwrap();
    let mut grad = dec.zeros_like();
    let dfeature = dec.backward(&cache, &w, &mut grad);
    let params = gradcheck(&dec, &grad, |p| {
        dot3(&p.forward(&feature, &start, steps, teach).unwrap().0, &w)
    });
    let base: Vec<f64> = feature.iter().copied().collect();
    let analytic: Vec<f64> = dfeature.iter().copied().collect();
    let inputs = check_flat(&base, &analytic, |x| {
        let f = Array2::from_shape_vec((3, 6), x.to_vec()).unwrap();
        dot3(&dec.forward(&f, &start, steps, teach).unwrap().0, &w)
    });
    if teacher {
        vec![
            ("decoder (teacher) params", params),
            ("decoder (teacher) feature", inputs),
        ]
    } else {
        vec![
            ("decoder (autoregressive) params", params),
            ("decoder (autoregressive) feature", inputs),
        ]
    }
}

fn critic_case(input: usize, layers: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let critic = Critic::<f64>::new(input, 8, layers, &mut r);
    assert!(critic.num_params() <= 1000);
    let x = rand2(&mut r, (5, input));
    let w = Array1::from_shape_fn(5, |_| r.random_range(-1.0..1.0));
    let eval = critic.eval(&x).unwrap();
    let mut grad = critic.zeros_like();
    let dx = critic.backward(&eval, &w, &mut grad);
    let params = gradcheck(&critic, &grad, |p| p.scores(&x).unwrap().dot(&w));
    let base: Vec<f64> = x.iter().copied().collect();
    let analytic: Vec<f64> = dx.iter().copied().collect();
    let inputs = check_flat(&base, &analytic, |v| {
        let xs = Array2::from_shape_vec((5, input), v.to_vec()).unwrap();
        critic.scores(&xs).unwrap().dot(&w)
    });
    (params, inputs)
}

pub fn feature_critic() -> Vec<(&'static str, f64)> {
    let (p, i) = critic_case(6, 3, 4);
    vec![("feature critic params", p), ("feature critic input", i)]
}

pub fn offset_critic() -> Vec<(&'static str, f64)> {
    let (p, i) = critic_case(12, 4, 5);
    vec![("offset critic params", p), ("offset critic input", i)]
}

pub fn adaptor() -> Vec<(&'static str, f64)> {
    let mut r = rng(6);
    let mut adaptor = Adaptor::<f64>::new(3, 5, 2, &mut r);
    // Move away from the zero-initialised last layer.
    let flat: Vec<f64> = (0..adaptor.num_params())
        .map(|_| r.random_range(-0.5..0.5))
        .collect();
    adaptor.set_flat(&flat);
    let x = rand3(&mut r, (2, 6, 2));
    let w = rand3(&mut r, (2, 6, 2));
    let (_, cache) = adaptor.forward(&x).unwrap();
    let mut grad = adaptor.zeros_like();
    let dx = adaptor.backward(&cache, &w, &mut grad);
    let params = gradcheck(&adaptor, &grad, |p| dot3(&p.forward(&x).unwrap().0, &w));
    let base: Vec<f64> = x.iter().copied().collect();
    let analytic: Vec<f64> = dx.iter().copied().collect();
    let inputs = check_flat(&base, &analytic, |v| {
        let xs = Array3::from_shape_vec((2, 6, 2), v.to_vec()).unwrap();
        dot3(&adaptor.forward(&xs).unwrap().0, &w)
    });
    vec![("adaptor params", params), ("adaptor input", inputs)]
}

pub fn penalty() -> Vec<(&'static str, f64)> {
    let mut r = rng(7);
    let critic = Critic::<f64>::new(6, 8, 3, &mut r);
    let real = rand2(&mut r, (4, 6));
    let fake = rand2(&mut r, (4, 6));
    let gammas: Vec<f64> = (0..4).map(|_| r.random()).collect();
    let coeff = 10.0;
    let mut grad = critic.zeros_like();
    gradient_penalty_with_gammas(&critic, &real, &fake, &gammas, Some((&mut grad, coeff))).unwrap();
    let gp = gradcheck(&critic, &grad, |p| {
        coeff * gradient_penalty_with_gammas(p, &real, &fake, &gammas, None).unwrap()
    });

    let critic = Critic::<f64>::new(12, 8, 4, &mut r);
    let real = rand2(&mut r, (4, 12));
    let fake = rand2(&mut r, (4, 12));
    let gammas: Vec<f64> = (0..4).map(|_| r.random()).collect();
    let mut grad = critic.zeros_like();
    critic_loss_and_grad(&critic, &real, &fake, 10.0, &gammas, &mut grad).unwrap();
    let total = gradcheck(&critic, &grad, |p| {
        let mut scratch = p.zeros_like();
        critic_loss_and_grad(p, &real, &fake, 10.0, &gammas, &mut scratch)
            .unwrap()
            .total
    });
    vec![("gradient penalty", gp), ("critic objective", total)]
}

pub fn all() -> Vec<(&'static str, f64)> {
    [
        encoder(),
        decoder(true),
        decoder(false),
        feature_critic(),
        offset_critic(),
        adaptor(),
        penalty(),
    ]
    .concat()
}

/// A gradient scaled by 1.01 must be flagged.
pub fn scaled_gradient_error() -> f64 {
    let mut r = rng(9);
    let critic = Critic::<f64>::new(6, 8, 2, &mut r);
    let x = rand2(&mut r, (3, 6));
    let w = Array1::from_elem(3, 1.0);
    let eval = critic.eval(&x).unwrap();
    let mut grad = critic.zeros_like();
    critic.backward(&eval, &w, &mut grad);
    let scaled: Vec<f64> = grad.to_flat().iter().map(|g| g * 1.01).collect();
    grad.set_flat(&scaled);
    gradcheck(&critic, &grad, |p| p.scores(&x).unwrap().dot(&w))
}
