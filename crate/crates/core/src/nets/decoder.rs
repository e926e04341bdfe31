use ndarray::{Array1, Array2, Array3, Axis};
use rand::Rng;

use super::dense::{Dense, Mlp, MlpCache};
use super::lstm::{LstmCell, LstmStepCache};
use super::params::{join, ParamSet};
use super::seq;
use crate::traj_data::Point;
use crate::{Error, Real, Result};

/// Step embedding, LSTM and readout MLP. Consumes the previous step
/// (offset or coordinate, depending on the representation) and emits the
/// next one.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder<T> {
    pub embed: Dense<T>,
    pub lstm: LstmCell<T>,
    pub readout: Mlp<T>,
}

#[derive(Debug, Clone)]
struct DecodeStep<T> {
    input: Array2<T>,
    lstm: LstmStepCache<T>,
    readout: MlpCache<T>,
}

#[derive(Debug, Clone)]
pub struct DecoderCache<T> {
    steps: Vec<DecodeStep<T>>,
    teacher_forced: bool,
}

impl<T: Real> Decoder<T> {
    pub fn new(
        embed_dim: usize,
        hidden_dim: usize,
        mlp_hidden: usize,
        mlp_layers: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            embed: Dense::new(2, embed_dim, rng),
            lstm: LstmCell::new(embed_dim, hidden_dim, rng),
            readout: Mlp::new(hidden_dim, mlp_hidden, 2, mlp_layers, rng),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.lstm.hidden_dim()
    }

    /// Runs `steps` decoding steps from hidden state `feature` (cell memory
    /// zero). The first step consumes `seed`; later steps consume
    /// `teacher[k - 1]` when a teacher sequence is given, else the previous
    /// prediction.
    pub fn forward(
        &self,
        feature: &Array2<T>,
        seed: &Array2<T>,
        steps: usize,
        teacher: Option<&Array3<T>>,
    ) -> Result<(Array3<T>, DecoderCache<T>)> {
        let batch = feature.nrows();
        if steps == 0 {
            return Err(Error::Shape("decoder needs at least one step".into()));
        }
        if feature.ncols() != self.hidden_dim() || seed.dim() != (batch, 2) {
            return Err(Error::Shape(format!(
                "feature {:?} / seed {:?} do not match hidden size {}",
                feature.dim(),
                seed.dim(),
                self.hidden_dim()
            )));
        }
        if let Some(t) = teacher {
            if t.dim() != (batch, steps, 2) {
                return Err(Error::Shape(format!(
                    "teacher sequence {:?}, expected {:?}",
                    t.dim(),
                    (batch, steps, 2)
                )));
            }
        }
        let mut h = feature.clone();
        let mut c = Array2::zeros(h.raw_dim());
        let mut out = Array3::zeros((batch, steps, 2));
        let mut cache = DecoderCache {
            steps: Vec::with_capacity(steps),
            teacher_forced: teacher.is_some(),
        };
        let mut input = seed.clone();
        for k in 0..steps {
            let e = self.embed.forward(&input);
            let (h2, c2, lstm) = self.lstm.step(&e, &h, &c);
            let (y, readout) = self.readout.forward_cached(&h2);
            out.index_axis_mut(Axis(1), k).assign(&y);
            let next = match teacher {
                Some(t) => seq::step(t, k).to_owned(),
                None => y,
            };
            cache.steps.push(DecodeStep {
                input: std::mem::replace(&mut input, next),
                lstm,
                readout,
            });
            h = h2;
            c = c2;
        }
        Ok((out, cache))
    }

    /// Backpropagates `dL/doutputs` and returns `dL/dfeature`. In
    /// autoregressive mode the gradient also flows through each fed-back
    /// prediction.
    pub fn backward(
        &self,
        cache: &DecoderCache<T>,
        douts: &Array3<T>,
        grad: &mut Self,
    ) -> Array2<T> {
        let batch = douts.shape()[0];
        let hd = self.hidden_dim();
        let mut dh = Array2::zeros((batch, hd));
        let mut dc = Array2::zeros((batch, hd));
        let mut carried: Option<Array2<T>> = None;
        for (k, step) in cache.steps.iter().enumerate().rev() {
            let mut dy = douts.index_axis(Axis(1), k).to_owned();
            if let Some(extra) = carried.take() {
                dy += &extra;
            }
            dh += &self.readout.backward(&step.readout, &dy, &mut grad.readout);
            let (de, dh_prev, dc_prev) =
                self.lstm
                    .backward_step(&step.lstm, &dh, &dc, &mut grad.lstm);
            let dinput = self.embed.backward(&step.input, &de, &mut grad.embed);
            if !cache.teacher_forced && k > 0 {
                carried = Some(dinput);
            }
            dh = dh_prev;
            dc = dc_prev;
        }
        dh
    }
}

/// Decodes a single trajectory. `teacher`, when given, must have `steps`
/// entries.
pub fn decode<T: Real>(
    params: &Decoder<T>,
    feature: &Array1<T>,
    seed_offset: Point,
    steps: usize,
    teacher: Option<&[Point]>,
) -> Result<Vec<Point>> {
    if let Some(t) = teacher {
        if t.len() != steps {
            return Err(Error::Shape(format!(
                "teacher has {} steps, decoding {steps}",
                t.len()
            )));
        }
    }
    let feat = feature.clone().insert_axis(Axis(0));
    let seed = seq::stack_points::<T>(&[seed_offset]);
    let teacher = teacher.map(|t| seq::stack::<T, _>(&[t])).transpose()?;
    let (out, _) = params.forward(&feat, &seed, steps, teacher.as_ref())?;
    Ok(seq::unstack(&out).remove(0))
}

impl<T: Real> ParamSet<T> for Decoder<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[T])) {
        self.embed.visit(&join(prefix, "embed"), f);
        self.lstm.visit(&join(prefix, "lstm"), f);
        self.readout.visit(&join(prefix, "readout"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [T])) {
        self.embed.visit_mut(&join(prefix, "embed"), f);
        self.lstm.visit_mut(&join(prefix, "lstm"), f);
        self.readout.visit_mut(&join(prefix, "readout"), f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Decoder<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dec = Decoder::new(4, 6, 5, 3, &mut rng);
        let feat = Array1::from_shape_fn(6, |i| (i as f64 * 0.37).sin() * 0.5);
        (dec, feat)
    }

    #[test]
    fn single_step() {
        let (dec, feat) = setup();
        let out = decode(&dec, &feat, [0.3, -0.1], 1, None).unwrap();
        assert_eq!(out.len(), 1);
        // Only the seed is consumed: changing a teacher of length one has no effect.
        let t = decode(&dec, &feat, [0.3, -0.1], 1, Some(&[[9.0, 9.0]])).unwrap();
        assert_eq!(out, t);
    }

    #[test]
    fn teacher_equal_to_own_outputs_reproduces_autoregression() {
        let (dec, feat) = setup();
        let auto = decode(&dec, &feat, [0.3, -0.1], 12, None).unwrap();
        let forced = decode(&dec, &feat, [0.3, -0.1], 12, Some(&auto)).unwrap();
        assert_eq!(auto, forced);
    }

    #[test]
    fn zero_readout_gives_constant_bias() {
        let (mut dec, feat) = setup();
        let last = dec.readout.layers.last_mut().unwrap();
        last.weight.fill(0.0);
        last.bias = ndarray::array![0.25, -0.5];
        let out = decode(&dec, &feat, [0.3, -0.1], 12, None).unwrap();
        assert!(out.iter().all(|p| *p == [0.25, -0.5]));
    }

    #[test]
    fn teacher_length_checked() {
        let (dec, feat) = setup();
        assert!(matches!(
            decode(&dec, &feat, [0.0, 0.0], 3, Some(&[[0.0, 0.0]; 2])),
            Err(Error::Shape(_))
        ));
        assert!(decode(&dec, &feat, [0.0, 0.0], 0, None).is_err());
    }

    #[test]
    fn output_length_matches_steps() {
        let (dec, _) = setup();
        for steps in [1, 5, 12] {
            let feat = Array1::from_elem(6, 3.0);
            assert_eq!(
                decode(&dec, &feat, [1.0, 1.0], steps, None).unwrap().len(),
                steps
            );
        }
    }
}
