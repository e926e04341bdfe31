use sha2::{Digest, Sha256};

use crate::Real;

/// A collection of named parameter tensors visited in a fixed order.
///
/// The same type doubles as its own gradient accumulator, so optimizers and
/// gradient checks can walk parameters and gradients in lock-step.
pub trait ParamSet<T: Real> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[T]));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [T]));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, _, v| n += v.len());
        n
    }

    fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit("", &mut |_, _, v| out.extend_from_slice(v));
        out
    }

    fn set_flat(&mut self, flat: &[T]) {
        let mut pos = 0;
        self.visit_mut("", &mut |_, v| {
            v.copy_from_slice(&flat[pos..pos + v.len()]);
            pos += v.len();
        });
        assert_eq!(pos, flat.len(), "flat parameter length mismatch");
    }

    fn fill_zero(&mut self) {
        self.visit_mut("", &mut |_, v| v.fill(T::zero()));
    }

    fn zeros_like(&self) -> Self
    where
        Self: Clone,
    {
        let mut z = self.clone();
        z.fill_zero();
        z
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit("", &mut |_, _, v| ok &= v.iter().all(|x| x.is_finite()));
        ok
    }

    /// SHA-256 over the little-endian parameter bytes, hex encoded.
    fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        let mut buf = Vec::new();
        self.visit("", &mut |name, shape, v| {
            hasher.update(name.as_bytes());
            for d in shape {
                hasher.update((*d as u64).to_le_bytes());
            }
            buf.clear();
            for &x in v {
                x.write_le(&mut buf);
            }
            hasher.update(&buf);
        });
        hex::encode(hasher.finalize())
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}
