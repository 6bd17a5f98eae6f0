use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::net::Mlp;
use super::PpoError;
use crate::obs::KinematicsObs;
use crate::sim::MetaAction;

const ACTOR_HEAD_GAIN: f64 = 0.01;

/// Actor and critic networks over the flattened kinematics state.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub actor: Mlp,
    pub critic: Mlp,
}

impl PolicyParams {
    pub fn new(input_dim: usize, hidden: &[usize], actions: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = |out: usize| {
            let mut s = vec![input_dim];
            s.extend_from_slice(hidden);
            s.push(out);
            s
        };
        let actor = Mlp::new(&sizes(actions), ACTOR_HEAD_GAIN, &mut rng);
        let critic = Mlp::new(&sizes(1), 1.0, &mut rng);
        Self { actor, critic }
    }

    /// Policy over the five meta-actions.
    pub fn driving(input_dim: usize, hidden: &[usize], seed: u64) -> Self {
        Self::new(input_dim, hidden, MetaAction::COUNT, seed)
    }

    pub fn from_networks(actor: Mlp, critic: Mlp) -> Result<Self, String> {
        if actor.inputs() != critic.inputs() {
            return Err(format!("actor takes {} inputs, critic takes {}", actor.inputs(), critic.inputs()));
        }
        if critic.outputs() != 1 {
            return Err(format!("critic must output 1 value, has {}", critic.outputs()));
        }
        Ok(Self { actor, critic })
    }

    /// Zeroes the output layers so every state maps to uniform probabilities and value 0.
    pub fn zero_heads(&mut self) {
        for net in [&mut self.actor, &mut self.critic] {
            let head = net.layers.last_mut().unwrap();
            head.weight.fill(0.0);
            head.bias.fill(0.0);
        }
    }

    pub fn input_dim(&self) -> usize {
        self.actor.inputs()
    }

    pub fn action_count(&self) -> usize {
        self.actor.outputs()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        let s = self.actor.sizes();
        s[1..s.len() - 1].to_vec()
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite() && self.critic.is_finite()
    }

    /// Batched forward pass: probabilities `(n, actions)` and values `(n)`.
    pub fn forward_batch(&self, states: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Vec<f64>), PpoError> {
        if states.ncols() != self.input_dim() {
            return Err(PpoError::Input(format!(
                "state has {} features, network expects {}",
                states.ncols(),
                self.input_dim()
            )));
        }
        let mut probs = self.actor.forward(states);
        for mut row in probs.rows_mut() {
            let p = softmax(row.as_slice().unwrap());
            row.assign(&ndarray::ArrayView1::from(&p));
        }
        let values = self.critic.forward(states).column(0).to_vec();
        Ok((probs, values))
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Action probabilities and state value for one kinematics observation.
pub fn policy_forward(params: &PolicyParams, state: &KinematicsObs) -> Result<(Vec<f64>, f64), PpoError> {
    let x = ArrayView2::from_shape((1, state.as_slice().len()), state.as_slice())
        .map_err(|e| PpoError::Input(e.to_string()))?;
    let (probs, values) = params.forward_batch(x)?;
    Ok((probs.row(0).to_vec(), values[0]))
}

/// Categorical draw returning the index and its log-probability.
pub fn sample_index(probs: &[f64], rng: &mut impl Rng) -> (usize, f64) {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        cum += p;
        last = i;
        if u < cum {
            return (i, p.ln());
        }
    }
    // rounding left u above the cumulative total
    (last, probs[last].ln())
}

pub fn sample_action(probs: &[f64], rng: &mut impl Rng) -> (MetaAction, f64) {
    let (i, lp) = sample_index(probs, rng);
    (MetaAction::from_index(i).expect("probability vector has five entries"), lp)
}
