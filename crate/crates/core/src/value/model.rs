use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::sequence::SequenceState;

#[derive(Debug, Error)]
pub enum ValueError {
    #[error("model expects A = {alphabet}, L = {length}; state has A = {got_alphabet}, L = {got_length}")]
    Shape {
        alphabet: usize,
        length: usize,
        got_alphabet: usize,
        got_length: usize,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] io::Error),
}

const MAGIC: &[u8; 8] = b"EVTVALUE";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerLayout {
    inputs: usize,
    outputs: usize,
    weights: usize,
    bias: usize,
}

/// Multilayer perceptron over the flattened one-hot state.
///
/// Hidden layers use `tanh`; the output head is linear so predictions are
/// unbounded. All parameters live in one flat vector, layer by layer, each
/// layer storing its row-major `outputs × inputs` weights followed by its
/// biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueModel<T> {
    alphabet_size: usize,
    length: usize,
    layout: Vec<LayerLayout>,
    params: Vec<T>,
}

/// Input to the network: the active one-hot cells of a state.
pub type SparseInput = [u32];

impl<T: Scalar> ValueModel<T> {
    /// Network with every parameter zero.
    pub fn zeros(alphabet_size: usize, length: usize, hidden: &[usize]) -> Self {
        let mut layout = Vec::new();
        let mut offset = 0;
        let mut inputs = alphabet_size * length;
        for &outputs in hidden.iter().chain(std::iter::once(&1)) {
            layout.push(LayerLayout {
                inputs,
                outputs,
                weights: offset,
                bias: offset + inputs * outputs,
            });
            offset += inputs * outputs + outputs;
            inputs = outputs;
        }
        Self {
            alphabet_size,
            length,
            layout,
            params: vec![T::zero(); offset],
        }
    }

    /// Weights and biases uniform in `[-1/√fan_in, 1/√fan_in]`.
    pub fn new(alphabet_size: usize, length: usize, hidden: &[usize], rng: &mut impl Rng) -> Self {
        let mut model = Self::zeros(alphabet_size, length, hidden);
        for l in model.layout.clone() {
            let bound = 1.0 / (l.inputs as f64).sqrt();
            for p in &mut model.params[l.weights..l.bias + l.outputs] {
                *p = T::lit(rng.random_range(-bound..=bound));
            }
        }
        model
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layout[..self.layout.len() - 1]
            .iter()
            .map(|l| l.outputs)
            .collect()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Input weights attached to one-hot cell `index` in the first layer.
    pub fn input_weights_mut(&mut self, index: usize) -> impl Iterator<Item = &mut T> {
        let l = self.layout[0];
        self.params[l.weights..l.bias]
            .iter_mut()
            .skip(index)
            .step_by(l.inputs)
    }

    pub fn encode(&self, state: &SequenceState) -> Result<Vec<u32>, ValueError> {
        if state.alphabet().size() != self.alphabet_size || state.len() != self.length {
            return Err(ValueError::Shape {
                alphabet: self.alphabet_size,
                length: self.length,
                got_alphabet: state.alphabet().size(),
                got_length: state.len(),
            });
        }
        Ok(state.active_indices().map(|i| i as u32).collect())
    }

    pub fn predict(&self, state: &SequenceState) -> Result<T, ValueError> {
        Ok(self.forward(&self.encode(state)?))
    }

    pub fn forward(&self, input: &SparseInput) -> T {
        let mut acts = Vec::new();
        self.forward_collect(input, &mut acts)
    }

    /// Runs the network, pushing each hidden layer's activations.
    fn forward_collect(&self, input: &SparseInput, acts: &mut Vec<Vec<T>>) -> T {
        let last = self.layout.len() - 1;
        for (k, l) in self.layout.iter().enumerate() {
            let w = &self.params[l.weights..l.bias];
            let b = &self.params[l.bias..l.bias + l.outputs];
            let mut out: Vec<T> = b.to_vec();
            if k == 0 {
                for (j, o) in out.iter_mut().enumerate() {
                    let row = &w[j * l.inputs..(j + 1) * l.inputs];
                    for &i in input {
                        *o += row[i as usize];
                    }
                }
            } else {
                let prev = &acts[k - 1];
                for (j, o) in out.iter_mut().enumerate() {
                    let row = &w[j * l.inputs..(j + 1) * l.inputs];
                    *o += row.iter().zip(prev).map(|(&a, &b)| a * b).sum::<T>();
                }
            }
            if k == last {
                return out[0];
            }
            out.iter_mut().for_each(|v| *v = v.tanh());
            acts.push(out);
        }
        unreachable!("layout always ends in the output head")
    }

    /// Mean squared error over `batch` and its gradient with respect to
    /// every parameter.
    pub fn loss_and_gradient(&self, batch: &[(&SparseInput, T)]) -> (T, Vec<T>) {
        let mut grad = vec![T::zero(); self.params.len()];
        if batch.is_empty() {
            return (T::zero(), grad);
        }
        let scale = T::one() / T::from_usize_lossy(batch.len());
        let two = T::lit(2.0);
        let mut loss = T::zero();
        let mut acts = Vec::with_capacity(self.layout.len());
        for &(input, target) in batch {
            acts.clear();
            let pred = self.forward_collect(input, &mut acts);
            let err = pred - target;
            loss += err * err * scale;
            let mut delta = vec![two * err * scale];
            for k in (0..self.layout.len()).rev() {
                let l = self.layout[k];
                for (j, &d) in delta.iter().enumerate() {
                    grad[l.bias + j] += d;
                }
                if k == 0 {
                    for (j, &d) in delta.iter().enumerate() {
                        for &i in input {
                            grad[l.weights + j * l.inputs + i as usize] += d;
                        }
                    }
                    break;
                }
                let prev = &acts[k - 1];
                let mut next = vec![T::zero(); l.inputs];
                for (j, &d) in delta.iter().enumerate() {
                    let base = l.weights + j * l.inputs;
                    for i in 0..l.inputs {
                        grad[base + i] += d * prev[i];
                        next[i] += d * self.params[base + i];
                    }
                }
                for (n, &a) in next.iter_mut().zip(prev) {
                    *n *= T::one() - a * a;
                }
                delta = next;
            }
        }
        (loss, grad)
    }

    /// Writes the checkpoint format: `EVTVALUE`, `u32` version, `u64`
    /// alphabet size, `u64` length, `u64` layer count, one `u64` output width
    /// per layer, `u64` parameter count, then every parameter as an `f64`.
    /// All integers and floats little-endian.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<(), ValueError> {
        out.write_all(MAGIC)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        for v in [self.alphabet_size, self.length, self.layout.len()] {
            out.write_all(&(v as u64).to_le_bytes())?;
        }
        for l in &self.layout {
            out.write_all(&(l.outputs as u64).to_le_bytes())?;
        }
        out.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for p in &self.params {
            out.write_all(&p.as_f64().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Self, ValueError> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(ValueError::Checkpoint("bad magic".into()));
        }
        let mut word = [0u8; 4];
        input.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != CHECKPOINT_VERSION {
            return Err(ValueError::Checkpoint(format!("unsupported version {version}")));
        }
        let read_u64 = |input: &mut R| -> Result<u64, ValueError> {
            let mut buf = [0u8; 8];
            input.read_exact(&mut buf)?;
            Ok(u64::from_le_bytes(buf))
        };
        let alphabet_size = read_u64(&mut input)? as usize;
        let length = read_u64(&mut input)? as usize;
        let layers = read_u64(&mut input)? as usize;
        if layers == 0 || layers > 64 {
            return Err(ValueError::Checkpoint(format!("implausible layer count {layers}")));
        }
        let mut widths = Vec::with_capacity(layers);
        for _ in 0..layers {
            widths.push(read_u64(&mut input)? as usize);
        }
        if widths.last() != Some(&1) {
            return Err(ValueError::Checkpoint("output layer must have width 1".into()));
        }
        let mut model = Self::zeros(alphabet_size, length, &widths[..layers - 1]);
        let count = read_u64(&mut input)? as usize;
        if count != model.params.len() {
            return Err(ValueError::Checkpoint(format!(
                "parameter count {count} does not match architecture ({})",
                model.params.len()
            )));
        }
        for p in &mut model.params {
            let mut buf = [0u8; 8];
            input.read_exact(&mut buf)?;
            *p = T::lit(f64::from_le_bytes(buf));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ValueError> {
        let mut buf = Vec::new();
        self.write_checkpoint(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ValueError> {
        Self::read_checkpoint(io::Cursor::new(fs::read(path)?))
    }
}

/// Adam with L2 weight decay folded into the gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam<T> {
    pub learning_rate: T,
    pub weight_decay: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    #[serde(skip)]
    m: Vec<T>,
    #[serde(skip)]
    v: Vec<T>,
    #[serde(skip)]
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(learning_rate: T, weight_decay: T) -> Self {
        Self {
            learning_rate,
            weight_decay,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        if self.m.len() != params.len() {
            self.m = vec![T::zero(); params.len()];
            self.v = vec![T::zero(); params.len()];
            self.t = 0;
        }
        self.t += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.t);
        let c2 = one - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i] + self.weight_decay * params[i];
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::sequence::Alphabet;

    fn state(a: &Alphabet, s: &str) -> SequenceState {
        SequenceState::parse(a, s).unwrap()
    }

    #[test]
    fn zero_model_predicts_zero() {
        let a = Alphabet::new("ACD").unwrap();
        let m = ValueModel::<f64>::zeros(3, 4, &[8]);
        assert_eq!(m.predict(&state(&a, "ACDA")).unwrap(), 0.0);
        assert_eq!(m.param_count(), 12 * 8 + 8 + 8 + 1);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = Alphabet::new("ACD").unwrap();
        let m = ValueModel::<f64>::zeros(3, 4, &[8]);
        assert!(matches!(m.predict(&state(&a, "AC")), Err(ValueError::Shape { .. })));
    }

    #[test]
    fn dead_inputs_do_not_affect_prediction() {
        let a = Alphabet::new("ACD").unwrap();
        let mut m = ValueModel::<f64>::new(3, 4, &[16], &mut seeded(2));
        for r in 0..3 {
            m.input_weights_mut(r * 4 + 2).for_each(|w| *w = 0.0);
        }
        let x = m.predict(&state(&a, "ACAD")).unwrap();
        let y = m.predict(&state(&a, "ACCD")).unwrap();
        assert_eq!(x, y);
        assert_ne!(x, m.predict(&state(&a, "CCAD")).unwrap());
    }

    #[test]
    fn initialization_is_bounded_and_seeded() {
        let m1 = ValueModel::<f64>::new(4, 5, &[7], &mut seeded(9));
        let m2 = ValueModel::<f64>::new(4, 5, &[7], &mut seeded(9));
        assert_eq!(m1, m2);
        let first_bound = 1.0 / 20f64.sqrt();
        assert!(m1.params()[..20 * 7 + 7].iter().all(|p| p.abs() <= first_bound));
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = ValueModel::<f64>::new(4, 5, &[7, 3], &mut seeded(1));
        let mut buf = Vec::new();
        m.write_checkpoint(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"EVTVALUE");
        let back = ValueModel::<f64>::read_checkpoint(io::Cursor::new(&buf)).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.hidden_sizes(), vec![7, 3]);
        buf.truncate(buf.len() - 3);
        assert!(ValueModel::<f64>::read_checkpoint(io::Cursor::new(&buf)).is_err());
    }

    #[test]
    fn adam_with_zero_gradient_on_zero_params_is_identity() {
        let mut params = vec![0.0f64; 6];
        let mut adam = Adam::new(2e-3, 1e-4);
        adam.step(&mut params, &[0.0; 6]);
        assert!(params.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn decay_alone_shrinks_parameter_norm() {
        let mut m = ValueModel::<f64>::new(4, 6, &[32], &mut seeded(4));
        let mut adam = Adam::new(2e-3, 1e-4);
        let zeros = vec![0.0; m.param_count()];
        let norm = |p: &[f64]| p.iter().map(|x| x * x).sum::<f64>();
        let mut last = norm(m.params());
        for _ in 0..10 {
            adam.step(m.params_mut(), &zeros);
            let now = norm(m.params());
            assert!(now < last, "{now} !< {last}");
            last = now;
        }
    }
}
