use super::MlpParams;
use crate::preference::Preference;

/// What the reward model sees of a comparison: the credited states of each
/// segment and the label. Ground-truth returns never reach this type.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledPair {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub label: Preference,
}

/// `1 / (1 + e^-x)` without overflow.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Mean Bradley-Terry negative log-likelihood of `batch` and its gradient.
///
/// The gradient is accumulated per distinct state, so each state is
/// backpropagated once per batch however often it appears.
pub fn nll_gradient(params: &MlpParams, batch: &[&LabeledPair]) -> (f64, MlpParams) {
    let mut grad = params.zeros_like();
    if batch.is_empty() {
        return (0.0, grad);
    }
    let n = params.num_states();
    let mut raw: Vec<Option<f64>> = vec![None; n];
    let mut acts = Vec::new();
    let value = |s: usize, raw: &mut Vec<Option<f64>>| -> f64 {
        *raw[s].get_or_insert_with(|| params.forward(s))
    };
    let mut coeff = vec![0.0; n];
    let mut touched = Vec::new();
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for pair in batch {
        let r1: f64 = pair.first.iter().map(|&s| value(s, &mut raw)).sum();
        let r2: f64 = pair.second.iter().map(|&s| value(s, &mut raw)).sum();
        let z = r1 - r2;
        let (l, dz) = match pair.label {
            Preference::First => (softplus(-z), logistic(z) - 1.0),
            Preference::Second => (softplus(z), logistic(z)),
        };
        loss += l;
        for (states, sign) in [(&pair.first, 1.0), (&pair.second, -1.0)] {
            for &s in states {
                if coeff[s] == 0.0 {
                    touched.push(s);
                }
                coeff[s] += sign * dz * scale;
            }
        }
    }
    touched.sort_unstable();
    touched.dedup();
    for s in touched {
        if coeff[s] != 0.0 {
            params.accumulate_gradient(s, coeff[s], &mut grad, &mut acts);
        }
    }
    (loss * scale, grad)
}
