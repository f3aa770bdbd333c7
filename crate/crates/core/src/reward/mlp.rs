use crate::error::{Error, Result};
use crate::rng::Rng;
use rand::Rng as _;

/// Parameters of a ReLU MLP `[num_states, hidden.., 1]` with a linear output,
/// stored flat. Layer `l` occupies a row-major `[out × in]` weight block
/// followed by its `out` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) || dims.last() != Some(&1) {
            return Err(Error::InvalidArgument(format!(
                "MLP dims {dims:?} must be positive and end in a single output"
            )));
        }
        let len = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        })
    }

    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub fn init(num_states: usize, hidden: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut dims = vec![num_states];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let mut params = Self::zeros(&dims)?;
        for l in 0..params.num_layers() {
            let bound = 1.0 / (params.dims[l] as f64).sqrt();
            let (w, _) = params.layer_mut(l);
            for x in w {
                *x = rng.gen_range(-bound..bound);
            }
        }
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            data: vec![0.0; self.data.len()],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_states(&self) -> usize {
        self.dims[0]
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    fn offset(&self, layer: usize) -> usize {
        self.dims[..=layer].windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// `(weights, bias)` of a layer.
    pub fn layer(&self, layer: usize) -> (&[f64], &[f64]) {
        let (inp, out) = (self.dims[layer], self.dims[layer + 1]);
        let start = self.offset(layer);
        let block = &self.data[start..start + inp * out + out];
        block.split_at(inp * out)
    }

    pub fn layer_mut(&mut self, layer: usize) -> (&mut [f64], &mut [f64]) {
        let (inp, out) = (self.dims[layer], self.dims[layer + 1]);
        let start = self.offset(layer);
        let block = &mut self.data[start..start + inp * out + out];
        block.split_at_mut(inp * out)
    }

    /// Rebuild from per-layer arrays, validating every shape.
    pub fn from_layers(dims: &[usize], layers: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        let mut params = Self::zeros(dims)?;
        if layers.len() != params.num_layers() {
            return Err(Error::InvalidArgument(format!(
                "expected {} layers, found {}",
                params.num_layers(),
                layers.len()
            )));
        }
        for (l, (w, b)) in layers.iter().enumerate() {
            let (pw, pb) = params.layer_mut(l);
            if w.len() != pw.len() || b.len() != pb.len() {
                return Err(Error::InvalidArgument(format!("layer {l} has the wrong shape")));
            }
            pw.copy_from_slice(w);
            pb.copy_from_slice(b);
        }
        Ok(params)
    }

    /// Hidden activations for one-hot `state`; returns the scalar output.
    fn forward_into(&self, state: usize, acts: &mut Vec<Vec<f64>>) -> f64 {
        assert!(state < self.num_states(), "state {state} out of range");
        let layers = self.num_layers();
        acts.resize(layers - 1, Vec::new());
        let mut output = 0.0;
        for l in 0..layers {
            let (inp, out) = (self.dims[l], self.dims[l + 1]);
            let (w, b) = self.layer(l);
            let mut z: Vec<f64> = if l == 0 {
                (0..out).map(|o| w[o * inp + state] + b[o]).collect()
            } else {
                let x = &acts[l - 1];
                (0..out)
                    .map(|o| {
                        let row = &w[o * inp..(o + 1) * inp];
                        row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b[o]
                    })
                    .collect()
            };
            if l + 1 == layers {
                output = z[0];
            } else {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
                acts[l] = z;
            }
        }
        output
    }

    /// Raw reward of a state.
    pub fn forward(&self, state: usize) -> f64 {
        self.forward_into(state, &mut Vec::new())
    }

    /// Raw reward of every state.
    pub fn forward_all(&self) -> Vec<f64> {
        let mut acts = Vec::new();
        (0..self.num_states()).map(|s| self.forward_into(s, &mut acts)).collect()
    }

    /// Add `upstream · ∂output(state)/∂params` into `grad`; returns the output.
    pub(crate) fn accumulate_gradient(&self, state: usize, upstream: f64, grad: &mut MlpParams, acts: &mut Vec<Vec<f64>>) -> f64 {
        let output = self.forward_into(state, acts);
        let layers = self.num_layers();
        let mut delta = vec![upstream];
        for l in (0..layers).rev() {
            let inp = self.dims[l];
            let (w, _) = self.layer(l);
            let (gw, gb) = grad.layer_mut(l);
            for (o, d) in delta.iter().enumerate() {
                gb[o] += d;
                if l == 0 {
                    gw[o * inp + state] += d;
                } else {
                    for (g, x) in gw[o * inp..(o + 1) * inp].iter_mut().zip(&acts[l - 1]) {
                        *g += d * x;
                    }
                }
            }
            if l > 0 {
                let prev = &acts[l - 1];
                let mut next = vec![0.0; inp];
                for (o, d) in delta.iter().enumerate() {
                    for (n, wi) in next.iter_mut().zip(&w[o * inp..(o + 1) * inp]) {
                        *n += wi * d;
                    }
                }
                for (n, a) in next.iter_mut().zip(prev) {
                    if *a <= 0.0 {
                        *n = 0.0;
                    }
                }
                delta = next;
            }
        }
        output
    }
}
