use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{logistic_loss, seeded_rng};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetArchitecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub n_tasks: usize,
}

impl NetArchitecture {
    pub fn new(input_dim: usize, hidden: Vec<usize>, n_tasks: usize) -> Result<Self> {
        let a = NetArchitecture {
            input_dim,
            hidden,
            n_tasks,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.n_tasks == 0 || self.hidden.contains(&0) {
            return Err(Error::config(format!(
                "every layer width must be at least 1 (input {}, hidden {:?}, tasks {})",
                self.input_dim, self.hidden, self.n_tasks
            )));
        }
        Ok(())
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(&self.hidden);
        w.push(self.n_tasks);
        w
    }
}

/// Dense affine map; `w` is `n_out x n_in`, row-major, so row `j` is the
/// incoming weight vector of unit `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Layer {
            n_in,
            n_out,
            w: vec![0.0; n_in * n_out],
            b: vec![0.0; n_out],
        }
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.w[j * self.n_in..(j + 1) * self.n_in]
    }
}

/// Parameter-shaped buffers (gradients, momentum).
pub type Params = Vec<Layer>;

pub fn zeros_like(net: &Network) -> Params {
    net.layers.iter().map(|l| Layer::zeros(l.n_in, l.n_out)).collect()
}

/// Shared ReLU hidden layers followed by one linear output per task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub arch: NetArchitecture,
    /// Hidden layers, then the task-head layer last.
    pub layers: Vec<Layer>,
    /// Keep probability `r` of every dropout mask; test mode scales by it.
    pub dropout_rate: f64,
    /// Whether input features are masked too (and scaled at test time).
    pub input_dropout: bool,
}

/// He-style init: weights ~ N(0, 2/fan_in), biases 0.
pub fn init_network(arch: &NetArchitecture, seed: u64) -> Result<Network> {
    arch.validate()?;
    let mut rng = seeded_rng(seed, 0xD0);
    let widths = arch.widths();
    let mut layers = Vec::with_capacity(widths.len() - 1);
    for pair in widths.windows(2) {
        let (n_in, n_out) = (pair[0], pair[1]);
        let normal = Normal::new(0.0, (2.0 / n_in as f64).sqrt()).expect("positive sd");
        let mut l = Layer::zeros(n_in, n_out);
        for w in &mut l.w {
            *w = normal.sample(&mut rng);
        }
        layers.push(l);
    }
    Ok(Network {
        arch: arch.clone(),
        layers,
        dropout_rate: 0.5,
        input_dropout: true,
    })
}

/// Per-layer 0/1 masks: the input mask first, then one per hidden layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Masks {
    pub layers: Vec<Vec<f64>>,
}

impl Masks {
    pub fn ones(net: &Network) -> Self {
        Masks {
            layers: net.layers.iter().map(|l| vec![1.0; l.n_in]).collect(),
        }
    }

    /// Fresh Bernoulli(r) keep-masks; the input mask is all ones when input
    /// dropout is off.
    pub fn sample<R: Rng>(net: &Network, rng: &mut R) -> Self {
        let mut m = Self::ones(net);
        sample_into(net, rng, &mut m.layers);
        m
    }
}

fn sample_into<R: Rng>(net: &Network, rng: &mut R, mult: &mut [Vec<f64>]) {
    let r = net.dropout_rate;
    for (l, m) in mult.iter_mut().enumerate() {
        if l == 0 && !net.input_dropout {
            m.fill(1.0);
            continue;
        }
        for v in m.iter_mut() {
            *v = if rng.random_bool(r) { 1.0 } else { 0.0 };
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Mode<'a> {
    /// Masked pass with the given masks.
    Train(&'a Masks),
    /// All units kept; every dropout-affected layer input scaled by `r`.
    Test,
    /// No masks and no scaling.
    Plain,
}

/// Activations from a forward pass, reused by [`backward`].
#[derive(Clone, Debug, PartialEq)]
pub struct Cache {
    /// Multiplier applied to each layer input (mask values or the test scale).
    pub mult: Vec<Vec<f64>>,
    /// Unmasked input to each layer: `x`, then each hidden ReLU output.
    pub raw: Vec<Vec<f64>>,
    /// Masked input to each layer.
    pub acts: Vec<Vec<f64>>,
    /// Hidden pre-activations.
    pub pre: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
}

impl Cache {
    pub fn new(net: &Network) -> Self {
        let l = net.layers.len();
        Cache {
            mult: net.layers.iter().map(|l| vec![1.0; l.n_in]).collect(),
            raw: net.layers.iter().map(|l| vec![0.0; l.n_in]).collect(),
            acts: net.layers.iter().map(|l| vec![0.0; l.n_in]).collect(),
            pre: net.layers[..l - 1].iter().map(|l| vec![0.0; l.n_out]).collect(),
            scores: vec![0.0; net.arch.n_tasks],
        }
    }

    fn set_mode(&mut self, net: &Network, mode: Mode<'_>) -> Result<()> {
        match mode {
            Mode::Train(m) => {
                if m.layers.len() != self.mult.len()
                    || m.layers.iter().zip(&self.mult).any(|(a, b)| a.len() != b.len())
                {
                    return Err(Error::data("dropout masks do not match the network shape"));
                }
                for (dst, src) in self.mult.iter_mut().zip(&m.layers) {
                    dst.copy_from_slice(src);
                }
            }
            Mode::Test => {
                for (l, m) in self.mult.iter_mut().enumerate() {
                    let s = if l == 0 && !net.input_dropout {
                        1.0
                    } else {
                        net.dropout_rate
                    };
                    m.fill(s);
                }
            }
            Mode::Plain => self.mult.iter_mut().for_each(|m| m.fill(1.0)),
        }
        Ok(())
    }
}

impl Network {
    fn check_arity(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arch.input_dim {
            return Err(Error::Arity {
                expected: self.arch.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Forward pass using the multipliers already stored in `cache.mult`.
    pub(crate) fn forward_into(&self, x: &[f64], cache: &mut Cache) {
        let n_layers = self.layers.len();
        cache.raw[0].copy_from_slice(x);
        for (l, layer) in self.layers.iter().enumerate() {
            {
                let (raw, mult, act) = (&cache.raw[l], &cache.mult[l], &mut cache.acts[l]);
                for i in 0..layer.n_in {
                    act[i] = raw[i] * mult[i];
                }
            }
            let a = &cache.acts[l];
            let out: &mut [f64] = if l + 1 < n_layers {
                &mut cache.pre[l]
            } else {
                &mut cache.scores
            };
            for j in 0..layer.n_out {
                let row = layer.row(j);
                let mut s = layer.b[j];
                for i in 0..layer.n_in {
                    s += row[i] * a[i];
                }
                out[j] = s;
            }
            if l + 1 < n_layers {
                let (pre, next) = (&cache.pre[l], &mut cache.raw[l + 1]);
                for j in 0..layer.n_out {
                    next[j] = pre[j].max(0.0);
                }
            }
        }
    }

    pub fn scores(&self, x: &[f64], mode: Mode<'_>) -> Result<Vec<f64>> {
        Ok(forward_dropout(self, x, mode)?.scores)
    }
}

/// Runs the network on one example and keeps every intermediate value.
pub fn forward_dropout(net: &Network, x: &[f64], mode: Mode<'_>) -> Result<Cache> {
    net.check_arity(x)?;
    let mut cache = Cache::new(net);
    cache.set_mode(net, mode)?;
    net.forward_into(x, &mut cache);
    Ok(cache)
}

fn check_labels(labels: &[i8], m: usize) -> Result<()> {
    if labels.len() != m {
        return Err(Error::Arity {
            expected: m,
            got: labels.len(),
        });
    }
    if let Some(bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
        return Err(Error::data(format!("label {bad} is not +1 or -1")));
    }
    Ok(())
}

/// `sum_m log(1 + exp(-y_m F_m))`.
pub fn multitask_loss(scores: &[f64], labels: &[i8]) -> Result<f64> {
    check_labels(labels, scores.len())?;
    Ok(scores
        .iter()
        .zip(labels)
        .map(|(&f, &y)| logistic_loss(f64::from(y), f))
        .sum())
}

/// Per-example scratch for [`accumulate_gradients`].
pub(crate) struct Deltas {
    upper: Vec<f64>,
    lower: Vec<f64>,
}

impl Deltas {
    pub(crate) fn new(net: &Network) -> Self {
        let widest = net
            .layers
            .iter()
            .map(|l| l.n_in.max(l.n_out))
            .max()
            .unwrap_or(1);
        Deltas {
            upper: Vec::with_capacity(widest),
            lower: Vec::with_capacity(widest),
        }
    }
}

/// Adds `weight * dLoss/dparams` for the cached example into `grads`; returns the loss.
pub(crate) fn accumulate_gradients(
    net: &Network,
    cache: &Cache,
    labels: &[i8],
    weight: f64,
    grads: &mut Params,
    d: &mut Deltas,
) -> f64 {
    let mut loss = 0.0;
    d.upper.clear();
    for (&f, &y) in cache.scores.iter().zip(labels) {
        let y = f64::from(y);
        loss += logistic_loss(y, f);
        // dL/dF = -y / (1 + exp(yF)), written stably.
        let t = y * f;
        let g = if t > 0.0 {
            let e = (-t).exp();
            -y * e / (1.0 + e)
        } else {
            -y / (1.0 + t.exp())
        };
        d.upper.push(g);
    }
    for l in (0..net.layers.len()).rev() {
        let layer = &net.layers[l];
        let a = &cache.acts[l];
        let g = &mut grads[l];
        for j in 0..layer.n_out {
            let dj = d.upper[j] * weight;
            if dj == 0.0 {
                continue;
            }
            g.b[j] += dj;
            let gw = &mut g.w[j * layer.n_in..(j + 1) * layer.n_in];
            for i in 0..layer.n_in {
                gw[i] += dj * a[i];
            }
        }
        if l == 0 {
            break;
        }
        // Gradient w.r.t. the unmasked ReLU output of layer l-1, then its pre-activation.
        d.lower.clear();
        d.lower.resize(layer.n_in, 0.0);
        for j in 0..layer.n_out {
            let dj = d.upper[j];
            if dj == 0.0 {
                continue;
            }
            let row = layer.row(j);
            for i in 0..layer.n_in {
                d.lower[i] += row[i] * dj;
            }
        }
        let (mult, pre) = (&cache.mult[l], &cache.pre[l - 1]);
        for i in 0..layer.n_in {
            d.lower[i] *= if pre[i] > 0.0 { mult[i] } else { 0.0 };
        }
        std::mem::swap(&mut d.upper, &mut d.lower);
    }
    loss
}

/// Exact gradients of [`multitask_loss`] for the cached pass (masks included).
pub fn backward(net: &Network, cache: &Cache, labels: &[i8]) -> Result<Params> {
    check_labels(labels, net.arch.n_tasks)?;
    let mut grads = zeros_like(net);
    let mut d = Deltas::new(net);
    accumulate_gradients(net, cache, labels, 1.0, &mut grads, &mut d);
    Ok(grads)
}

/// Momentum SGD with L2 weight decay on weights, then max-norm projection of
/// every hidden unit's incoming weights. Biases get neither decay nor projection.
pub fn sgd_step(
    net: &mut Network,
    velocity: &mut Params,
    grads: &Params,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
    max_norm: f64,
) {
    let n_hidden = net.layers.len() - 1;
    for (l, layer) in net.layers.iter_mut().enumerate() {
        let (v, g) = (&mut velocity[l], &grads[l]);
        for i in 0..layer.w.len() {
            v.w[i] = momentum * v.w[i] - lr * (g.w[i] + weight_decay * layer.w[i]);
            layer.w[i] += v.w[i];
        }
        for j in 0..layer.b.len() {
            v.b[j] = momentum * v.b[j] - lr * g.b[j];
            layer.b[j] += v.b[j];
        }
        if l < n_hidden {
            for j in 0..layer.n_out {
                let row = &mut layer.w[j * layer.n_in..(j + 1) * layer.n_in];
                let norm = row.iter().map(|w| w * w).sum::<f64>().sqrt();
                if norm > max_norm {
                    let s = max_norm / norm;
                    row.iter_mut().for_each(|w| *w *= s);
                }
            }
        }
    }
}

pub(crate) fn sample_masks_into<R: Rng>(net: &Network, rng: &mut R, cache: &mut Cache) {
    sample_into(net, rng, &mut cache.mult);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(hidden: Vec<usize>) -> Network {
        init_network(&NetArchitecture::new(3, hidden, 2).unwrap(), 7).unwrap()
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let a = net(vec![50, 50]);
        assert_eq!(a, net(vec![50, 50]));
        assert!(a.layers.iter().all(|l| l.b.iter().all(|&b| b == 0.0)));
        let w = &a.layers[1].w;
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((var - 0.04).abs() < 0.3 * 0.04, "{var}");
    }

    #[test]
    fn ones_masks_equal_plain_pass() {
        let n = net(vec![4, 5]);
        let x = [0.3, -1.2, 2.0];
        let a = forward_dropout(&n, &x, Mode::Train(&Masks::ones(&n))).unwrap();
        let b = forward_dropout(&n, &x, Mode::Plain).unwrap();
        assert_eq!(a.scores, b.scores);
        let ga = backward(&n, &a, &[1, -1]).unwrap();
        let gb = backward(&n, &b, &[1, -1]).unwrap();
        assert_eq!(ga, gb);
    }

    #[test]
    fn blacked_out_input_gives_bias_only_output() {
        let n = net(vec![4]);
        let mut m = Masks::ones(&n);
        m.layers[0].fill(0.0);
        let s1 = n.scores(&[1.0, 2.0, 3.0], Mode::Train(&m)).unwrap();
        let s2 = n.scores(&[-5.0, 0.0, 9.0], Mode::Train(&m)).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn loss_values() {
        assert!((multitask_loss(&[0.0; 6], &[1, -1, 1, 1, -1, 1]).unwrap() - 6.0 * 2f64.ln()).abs() < 1e-12);
        assert!(multitask_loss(&[100.0; 6], &[1; 6]).unwrap() < 1e-40);
        assert!((multitask_loss(&[1.0], &[1]).unwrap() - 0.313_261_687_518_222_8).abs() < 1e-12);
        assert!(multitask_loss(&[1.0], &[0]).is_err());
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut n = net(vec![4]);
        let before = n.clone();
        let mut v = zeros_like(&n);
        sgd_step(&mut n, &mut v, &zeros_like(&before), 0.1, 0.9, 0.0, f64::INFINITY);
        assert_eq!(n, before);
    }

    #[test]
    fn max_norm_rescales_preserving_direction() {
        let mut n = net(vec![2]);
        n.layers[0].w = vec![3.0, 0.0, 0.0, 0.1, 0.1, 0.1];
        let mut v = zeros_like(&n);
        let g = zeros_like(&n);
        sgd_step(&mut n, &mut v, &g, 0.1, 0.9, 0.0, 1.0);
        assert!((n.layers[0].row(0)[0] - 1.0).abs() < 1e-15);
        assert_eq!(&n.layers[0].row(1), &[0.1, 0.1, 0.1]);
    }

    #[test]
    fn arity_checked() {
        let n = net(vec![]);
        assert!(matches!(n.scores(&[1.0], Mode::Test), Err(Error::Arity { .. })));
    }
}
