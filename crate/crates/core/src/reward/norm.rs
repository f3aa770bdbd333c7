use serde::{Deserialize, Serialize};

/// Lower bound on the divisor when normalizing.
pub const NORM_STD_FLOOR: f64 = 1e-8;

/// Streaming mean and population variance (Welford).
///
/// With no observations it is the identity map.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunningNorm {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
    pub frozen: bool,
}

impl RunningNorm {
    pub fn new() -> Self {
        Self::default()
    }

    /// A frozen map `(x - mean) / std`.
    pub fn fixed(mean: f64, std: f64) -> Self {
        Self {
            count: 1,
            mean,
            m2: std * std,
            frozen: true,
        }
    }

    pub fn update(&mut self, value: f64) {
        if self.frozen {
            return;
        }
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn apply(&self, value: f64) -> f64 {
        if self.count == 0 {
            return value;
        }
        (value - self.mean) / self.std().max(NORM_STD_FLOOR)
    }

    pub fn update_apply(&mut self, value: f64) -> f64 {
        self.update(value);
        self.apply(value)
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_finite(&self) -> bool {
        self.mean.is_finite() && self.m2.is_finite()
    }
}

/// Exponentially weighted mean and variance.
#[derive(Clone, Debug, PartialEq)]
pub struct EmaNorm {
    pub decay: f64,
    pub mean: f64,
    pub var: f64,
    initialized: bool,
}

impl Default for EmaNorm {
    fn default() -> Self {
        Self::new(0.99)
    }
}

impl EmaNorm {
    pub fn new(decay: f64) -> Self {
        Self {
            decay,
            mean: 0.0,
            var: 0.0,
            initialized: false,
        }
    }

    pub fn update(&mut self, value: f64) {
        if !self.initialized {
            self.mean = value;
            self.var = 0.0;
            self.initialized = true;
            return;
        }
        let diff = value - self.mean;
        let incr = (1.0 - self.decay) * diff;
        self.mean += incr;
        self.var = self.decay * (self.var + diff * incr);
    }

    pub fn apply(&self, value: f64) -> f64 {
        if !self.initialized {
            return value;
        }
        (value - self.mean) / self.var.max(0.0).sqrt().max(NORM_STD_FLOOR)
    }

    pub fn update_apply(&mut self, value: f64) -> f64 {
        self.update(value);
        self.apply(value)
    }
}
