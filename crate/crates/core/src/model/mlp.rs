use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::ScanLabel;
use crate::loss::{cel, cel_grad_logit, crl, crl_grad, sigmoid, LossConfig, Prediction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub seed: u64,
    /// Start the regression head at the mean training-set `t_d`.
    pub init_regression_bias: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_dim: 1,
            hidden_dims: vec![64, 64],
            seed: 0,
            init_regression_bias: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("model.input_dim must be at least 1".into()));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::Config("model.hidden_dims entries must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Offset of the row-major `outputs x inputs` weight block.
    pub w: usize,
    /// Offset of the bias vector.
    pub b: usize,
}

impl Dense {
    fn len(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

/// Shared ReLU trunk with a sigmoid classification head and an affine
/// regression head. All parameters live in one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    config: ModelConfig,
    trunk: Vec<Dense>,
    cls: Dense,
    reg: Dense,
    params: Vec<f64>,
}

/// Reusable activation buffers for one forward/backward pass.
#[derive(Debug, Default)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next_delta: Vec<f64>,
}

impl Mlp {
    fn layout(config: &ModelConfig) -> (Vec<Dense>, Dense, Dense, usize) {
        let mut offset = 0;
        let mut dense = |inputs: usize, outputs: usize| {
            let d = Dense {
                inputs,
                outputs,
                w: offset,
                b: offset + inputs * outputs,
            };
            offset += d.len();
            d
        };
        let mut trunk = Vec::with_capacity(config.hidden_dims.len());
        let mut width = config.input_dim;
        for &h in &config.hidden_dims {
            trunk.push(dense(width, h));
            width = h;
        }
        let cls = dense(width, 1);
        let reg = dense(width, 1);
        (trunk, cls, reg, offset)
    }

    /// All-zero parameters.
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let (trunk, cls, reg, n) = Self::layout(config);
        Ok(Self {
            config: config.clone(),
            trunk,
            cls,
            reg,
            params: vec![0.0; n],
        })
    }

    /// Seeded fan-in uniform initialisation. Trunk weights use
    /// `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, head weights `U(-sqrt(3/fan_in), ..)`.
    /// Biases start at zero except the regression bias, which is set to
    /// `target_mean` when given and enabled in the config.
    pub fn init(config: &ModelConfig, target_mean: Option<f64>) -> Result<Self> {
        let mut mlp = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let trunk = mlp.trunk.clone();
        for layer in &trunk {
            let bound = (6.0 / layer.inputs as f64).sqrt();
            for w in &mut mlp.params[layer.w..layer.b] {
                *w = rng.random_range(-bound..bound);
            }
        }
        for head in [mlp.cls, mlp.reg] {
            let bound = (3.0 / head.inputs as f64).sqrt();
            for w in &mut mlp.params[head.w..head.b] {
                *w = rng.random_range(-bound..bound);
            }
        }
        if let (true, Some(mean)) = (config.init_regression_bias, target_mean) {
            mlp.params[mlp.reg.b] = mean;
        }
        Ok(mlp)
    }

    pub fn from_params(config: &ModelConfig, params: Vec<f64>) -> Result<Self> {
        let mut mlp = Self::zeros(config)?;
        if params.len() != mlp.params.len() {
            return Err(Error::DimensionMismatch {
                expected: mlp.params.len(),
                got: params.len(),
            });
        }
        mlp.params = params;
        Ok(mlp)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    /// Offset of the regression-head bias in the parameter vector.
    pub fn regression_bias_index(&self) -> usize {
        self.reg.b
    }

    /// Parameter index ranges (weights then bias) of the classification head.
    pub fn classification_head_range(&self) -> std::ops::Range<usize> {
        self.cls.w..self.cls.b + 1
    }

    pub fn regression_head_range(&self) -> std::ops::Range<usize> {
        self.reg.w..self.reg.b + 1
    }

    /// Width of the representation the heads read from.
    pub fn feature_width(&self) -> usize {
        self.cls.inputs
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn affine(&self, layer: &Dense, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let w = &self.params[layer.w..layer.b];
        let b = &self.params[layer.b..layer.b + layer.outputs];
        for (row, bias) in w.chunks_exact(layer.inputs).zip(b) {
            let dot: f64 = row.iter().zip(x).map(|(a, c)| a * c).sum();
            out.push(dot + bias);
        }
    }

    fn head(&self, head: &Dense, h: &[f64]) -> f64 {
        let w = &self.params[head.w..head.b];
        w.iter().zip(h).map(|(a, c)| a * c).sum::<f64>() + self.params[head.b]
    }

    /// Fills `ws.acts` with the input and every hidden activation, returning
    /// `(logit, t_pred)`.
    fn forward_cached(&self, x: &[f64], ws: &mut Workspace) -> (f64, f64) {
        let depth = self.trunk.len();
        ws.acts.resize_with(depth + 1, Vec::new);
        ws.acts[0].clear();
        ws.acts[0].extend_from_slice(x);
        for (l, layer) in self.trunk.iter().enumerate() {
            let (done, rest) = ws.acts.split_at_mut(l + 1);
            let out = &mut rest[0];
            self.affine(layer, &done[l], out);
            for v in out.iter_mut() {
                *v = v.max(0.0);
            }
        }
        let h = &ws.acts[depth];
        (self.head(&self.cls, h), self.head(&self.reg, h))
    }

    /// Returns the classification logit and predicted time.
    pub fn forward_logit(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check_dim(x)?;
        Ok(self.forward_cached(x, &mut Workspace::default()))
    }

    /// Returns `(y_hat, t_pred)`.
    pub fn forward(&self, x: &[f64]) -> Result<(f64, f64)> {
        let (z, t) = self.forward_logit(x)?;
        Ok((sigmoid(z), t))
    }

    pub fn predict<'a, I>(&self, scans: I) -> Result<Vec<Prediction>>
    where
        I: IntoIterator<Item = (&'a str, &'a [f64])>,
    {
        let mut ws = Workspace::default();
        scans
            .into_iter()
            .map(|(scan_id, x)| {
                self.check_dim(x)?;
                let (z, t_pred) = self.forward_cached(x, &mut ws);
                Ok(Prediction {
                    scan_id: scan_id.to_string(),
                    y_hat: sigmoid(z),
                    t_pred,
                })
            })
            .collect()
    }

    /// Gradient of the mean joint loss over the batch with respect to every
    /// parameter, plus the loss itself.
    pub fn backward(&self, batch: &[(&[f64], &ScanLabel)], loss: &LossConfig) -> Result<(Vec<f64>, f64)> {
        let mut grads = vec![0.0; self.params.len()];
        let value = self.backward_into(batch, loss, &mut grads, &mut Workspace::default())?;
        Ok((grads, value))
    }

    /// As [`Mlp::backward`], overwriting `grads` and reusing `ws`.
    pub fn backward_into(
        &self,
        batch: &[(&[f64], &ScanLabel)],
        loss: &LossConfig,
        grads: &mut [f64],
        ws: &mut Workspace,
    ) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        if grads.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: grads.len(),
            });
        }
        grads.fill(0.0);
        let scale = 1.0 / batch.len() as f64;
        let depth = self.trunk.len();
        let mut total = 0.0;

        for &(x, label) in batch {
            self.check_dim(x)?;
            let (logit, t_pred) = self.forward_cached(x, ws);
            let y_hat = sigmoid(logit);
            total += cel(y_hat, label.y, loss.prob_clamp)?;
            let d_logit = cel_grad_logit(logit, label.y)? * scale;
            let d_t = if loss.lambda == 0.0 {
                0.0
            } else {
                total += loss.lambda * crl(t_pred, label.t_d, label.p, loss.epsilon)?;
                loss.lambda * crl_grad(t_pred, label.t_d, label.p, loss.epsilon)? * scale
            };

            // Heads.
            let h = &ws.acts[depth];
            ws.delta.clear();
            ws.delta.resize(h.len(), 0.0);
            for (head, d) in [(self.cls, d_logit), (self.reg, d_t)] {
                if d == 0.0 {
                    continue;
                }
                for (i, &hi) in h.iter().enumerate() {
                    grads[head.w + i] += d * hi;
                    ws.delta[i] += d * self.params[head.w + i];
                }
                grads[head.b] += d;
            }

            // Trunk, last layer first. `delta` holds dL/d(activation) of layer l.
            for l in (0..depth).rev() {
                let layer = self.trunk[l];
                let out = &ws.acts[l + 1];
                for (d, &a) in ws.delta.iter_mut().zip(out) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
                let input = &ws.acts[l];
                ws.next_delta.clear();
                ws.next_delta.resize(layer.inputs, 0.0);
                for (o, &d) in ws.delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = layer.w + o * layer.inputs;
                    for i in 0..layer.inputs {
                        grads[row + i] += d * input[i];
                        ws.next_delta[i] += d * self.params[row + i];
                    }
                    grads[layer.b + o] += d;
                }
                std::mem::swap(&mut ws.delta, &mut ws.next_delta);
            }
        }
        Ok(total * scale)
    }
}
