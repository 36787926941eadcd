use super::{ModelConfig, ModelError, Result};
use crate::autodiff::Tensor;
use crate::rng::XorShift64Star;

/// Standard deviation of projection and positional-embedding init.
pub const INIT_STD: f64 = 0.02;
/// Standard deviation of the noise around the identity LISTA init.
pub const LISTA_INIT_NOISE: f64 = 0.01;
/// Initial LISTA threshold.
pub const LISTA_INIT_THETA: f64 = 0.01;
/// Initial value of both fusion weights.
pub const FUSION_INIT: f64 = 0.5;

/// `(W_e, S, θ)` of one tied LISTA recurrence over `D`-dimensional rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ListaWeights<T> {
    pub w_e: T,
    pub s: T,
    pub theta: T,
}

/// LISTA block plus the fusion weights `α`, `β`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights<T> {
    pub lista: ListaWeights<T>,
    pub alpha: T,
    pub beta: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights<T> {
    pub ln1_gain: T,
    pub ln1_bias: T,
    /// `D × 3D`: query, key and value columns for all heads.
    pub qkv: T,
    /// `D × D` output projection of the concatenated heads.
    pub proj: T,
    pub ln2_gain: T,
    pub ln2_bias: T,
    pub mlp_w1: T,
    pub mlp_b1: T,
    pub mlp_w2: T,
    pub mlp_b2: T,
    /// Present only in the LISTA-Transformer.
    pub fusion: Option<FusionWeights<T>>,
}

/// Every learnable tensor of the classifier. `T` is [`Tensor`] for stored
/// values and [`crate::autodiff::Var`] for the same weights inside a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T> {
    /// `P²C × D` patch projection.
    pub patch_proj: T,
    pub class_token: T,
    /// `(patches + 1) × D`.
    pub pos_embed: T,
    pub backbone: Option<ListaWeights<T>>,
    pub layers: Vec<LayerWeights<T>>,
    pub norm_gain: T,
    pub norm_bias: T,
    /// `D × classes`, no bias.
    pub head: T,
}

pub type ModelParams = Weights<Tensor>;

impl<T> ListaWeights<T> {
    fn map<U>(&self, f: &mut impl FnMut(&str, &T) -> U, prefix: &str) -> ListaWeights<U> {
        ListaWeights {
            w_e: f(&format!("{prefix}.w_e"), &self.w_e),
            s: f(&format!("{prefix}.s"), &self.s),
            theta: f(&format!("{prefix}.theta"), &self.theta),
        }
    }

    fn refs(&self) -> [&T; 3] {
        [&self.w_e, &self.s, &self.theta]
    }

    fn refs_mut(&mut self) -> [&mut T; 3] {
        [&mut self.w_e, &mut self.s, &mut self.theta]
    }
}

impl<T> LayerWeights<T> {
    fn map<U>(&self, f: &mut impl FnMut(&str, &T) -> U, prefix: &str) -> LayerWeights<U> {
        let mut g = |name: &str, t: &T| f(&format!("{prefix}.{name}"), t);
        LayerWeights {
            ln1_gain: g("ln1_gain", &self.ln1_gain),
            ln1_bias: g("ln1_bias", &self.ln1_bias),
            qkv: g("qkv", &self.qkv),
            proj: g("proj", &self.proj),
            ln2_gain: g("ln2_gain", &self.ln2_gain),
            ln2_bias: g("ln2_bias", &self.ln2_bias),
            mlp_w1: g("mlp_w1", &self.mlp_w1),
            mlp_b1: g("mlp_b1", &self.mlp_b1),
            mlp_w2: g("mlp_w2", &self.mlp_w2),
            mlp_b2: g("mlp_b2", &self.mlp_b2),
            fusion: self.fusion.as_ref().map(|fu| FusionWeights {
                lista: fu.lista.map(&mut g, "lista"),
                alpha: g("alpha", &fu.alpha),
                beta: g("beta", &fu.beta),
            }),
        }
    }

    fn refs(&self) -> Vec<&T> {
        let mut out = vec![
            &self.ln1_gain,
            &self.ln1_bias,
            &self.qkv,
            &self.proj,
            &self.ln2_gain,
            &self.ln2_bias,
            &self.mlp_w1,
            &self.mlp_b1,
            &self.mlp_w2,
            &self.mlp_b2,
        ];
        if let Some(fu) = &self.fusion {
            out.extend(fu.lista.refs());
            out.push(&fu.alpha);
            out.push(&fu.beta);
        }
        out
    }

    fn refs_mut(&mut self) -> Vec<&mut T> {
        let mut out = vec![
            &mut self.ln1_gain,
            &mut self.ln1_bias,
            &mut self.qkv,
            &mut self.proj,
            &mut self.ln2_gain,
            &mut self.ln2_bias,
            &mut self.mlp_w1,
            &mut self.mlp_b1,
            &mut self.mlp_w2,
            &mut self.mlp_b2,
        ];
        if let Some(fu) = &mut self.fusion {
            out.extend(fu.lista.refs_mut());
            out.push(&mut fu.alpha);
            out.push(&mut fu.beta);
        }
        out
    }
}

impl<T> Weights<T> {
    /// Applies `f` to every tensor (with its dotted name) in the fixed
    /// serialization order, preserving the structure.
    pub fn map<U>(&self, mut f: impl FnMut(&str, &T) -> U) -> Weights<U> {
        Weights {
            patch_proj: f("patch_proj", &self.patch_proj),
            class_token: f("class_token", &self.class_token),
            pos_embed: f("pos_embed", &self.pos_embed),
            backbone: self.backbone.as_ref().map(|b| b.map(&mut f, "backbone")),
            layers: self
                .layers
                .iter()
                .enumerate()
                .map(|(i, l)| l.map(&mut f, &format!("layers.{i}")))
                .collect(),
            norm_gain: f("norm_gain", &self.norm_gain),
            norm_bias: f("norm_bias", &self.norm_bias),
            head: f("head", &self.head),
        }
    }

    /// All tensors in the fixed serialization order.
    pub fn tensors(&self) -> Vec<&T> {
        let mut out = vec![&self.patch_proj, &self.class_token, &self.pos_embed];
        if let Some(b) = &self.backbone {
            out.extend(b.refs());
        }
        for l in &self.layers {
            out.extend(l.refs());
        }
        out.extend([&self.norm_gain, &self.norm_bias, &self.head]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut T> {
        let mut out = vec![&mut self.patch_proj, &mut self.class_token, &mut self.pos_embed];
        if let Some(b) = &mut self.backbone {
            out.extend(b.refs_mut());
        }
        for l in &mut self.layers {
            out.extend(l.refs_mut());
        }
        out.extend([&mut self.norm_gain, &mut self.norm_bias, &mut self.head]);
        out
    }

    /// The LISTA thresholds, which must stay non-negative.
    pub fn thresholds_mut(&mut self) -> Vec<&mut T> {
        let mut out = Vec::new();
        if let Some(b) = &mut self.backbone {
            out.push(&mut b.theta);
        }
        for l in &mut self.layers {
            if let Some(fu) = &mut l.fusion {
                out.push(&mut fu.lista.theta);
            }
        }
        out
    }

    pub fn thresholds(&self) -> Vec<&T> {
        let mut out = Vec::new();
        if let Some(b) = &self.backbone {
            out.push(&b.theta);
        }
        for l in &self.layers {
            if let Some(fu) = &l.fusion {
                out.push(&fu.lista.theta);
            }
        }
        out
    }
}

impl ModelParams {
    /// Fresh weights for `config` drawn from `seed`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        Self::init_with_std(config, seed, INIT_STD)
    }

    /// Like [`ModelParams::init`] with a custom projection standard deviation.
    pub fn init_with_std(config: &ModelConfig, seed: u64, std: f64) -> Result<Self> {
        config.validate()?;
        let mut rng = XorShift64Star::new(seed);
        let d = config.embed_dim;
        let h = config.hidden_dim;
        let mut normal = |shape: &[usize], sd: f64| {
            let n = shape.iter().product();
            Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gaussian(0.0, sd)).collect()).expect("positive extents")
        };
        let near_identity = |noise: Tensor| {
            let mut t = noise;
            for i in 0..d {
                t.data_mut()[i * d + i] += 1.0;
            }
            t
        };
        let ones = Tensor::full(&[d], 1.0);
        let zeros = Tensor::zeros(&[d]);

        let patch_proj = normal(&[config.patch_dim(), d], std);
        let class_token = normal(&[d], std);
        let pos_embed = normal(&[config.num_tokens(), d], std);
        let lista = config.architecture.has_lista();
        let new_lista = |normal: &mut dyn FnMut(&[usize], f64) -> Tensor| ListaWeights {
            w_e: near_identity(normal(&[d, d], LISTA_INIT_NOISE)),
            s: normal(&[d, d], LISTA_INIT_NOISE),
            theta: Tensor::full(&[d], LISTA_INIT_THETA),
        };
        let backbone = lista.then(|| new_lista(&mut normal));
        let layers = (0..config.num_layers)
            .map(|_| {
                let qkv = normal(&[d, 3 * d], std);
                let proj = normal(&[d, d], std);
                let mlp_w1 = normal(&[d, h], std);
                let mlp_w2 = normal(&[h, d], std);
                let fusion = lista.then(|| FusionWeights {
                    lista: new_lista(&mut normal),
                    alpha: Tensor::scalar(FUSION_INIT),
                    beta: Tensor::scalar(FUSION_INIT),
                });
                LayerWeights {
                    ln1_gain: ones.clone(),
                    ln1_bias: zeros.clone(),
                    qkv,
                    proj,
                    ln2_gain: ones.clone(),
                    ln2_bias: zeros.clone(),
                    mlp_w1,
                    mlp_b1: Tensor::zeros(&[h]),
                    mlp_w2,
                    mlp_b2: zeros.clone(),
                    fusion,
                }
            })
            .collect();
        let head = normal(&[d, config.num_classes], std);
        Ok(Self {
            patch_proj,
            class_token,
            pos_embed,
            backbone,
            layers,
            norm_gain: ones,
            norm_bias: zeros,
            head,
        })
    }

    /// Total number of scalar parameters.
    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Every value in serialization order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    /// Overwrites every value from a flat vector in serialization order.
    pub fn load_flat(&mut self, values: &[f64]) -> Result<()> {
        let expected = self.parameter_count();
        if values.len() != expected {
            return Err(ModelError::Checkpoint(format!(
                "expected {expected} parameters, got {}",
                values.len()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Shapes must match `config` exactly.
    pub fn check_config(&self, config: &ModelConfig) -> Result<()> {
        let reference = Self::init(config, 0)?;
        let ours = self.map(|name, t| (name.to_string(), t.shape().to_vec()));
        let theirs = reference.map(|name, t| (name.to_string(), t.shape().to_vec()));
        if ours.tensors() != theirs.tensors() {
            return Err(ModelError::InvalidConfig("parameter shapes do not match the configuration".into()));
        }
        Ok(())
    }

    /// Clamps every LISTA threshold to `≥ 0`.
    pub fn clamp_thresholds(&mut self) {
        for t in self.thresholds_mut() {
            for v in t.data_mut() {
                *v = v.max(0.0);
            }
        }
    }
}

/// Scalar count implied by the configuration, without allocating weights.
pub fn parameter_count(config: &ModelConfig) -> usize {
    let d = config.embed_dim;
    let h = config.hidden_dim;
    let lista_block = 2 * d * d + d;
    let layer = 4 * d + 3 * d * d + d * d + d * h + h + h * d + d;
    let mut total = config.patch_dim() * d + d + config.num_tokens() * d;
    total += config.num_layers * layer + 2 * d + d * config.num_classes;
    if config.architecture.has_lista() {
        total += lista_block + config.num_layers * (lista_block + 2);
    }
    total
}
