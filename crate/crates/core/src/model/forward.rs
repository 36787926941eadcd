use super::{LayerWeights, ListaWeights, ModelConfig, ModelError, Result, Weights};
use crate::autodiff::{Graph, Tensor, Var};
use crate::sparse::lista_rows;
use crate::timefreq::Image;

/// Row-major patches of a square single-channel image: row `p` is patch
/// `p` (patches ordered left to right, top to bottom), flattened row-major.
pub fn patchify(image: &Image, config: &ModelConfig) -> Result<Tensor> {
    if image.size() != config.image_size || config.channels != 1 {
        return Err(ModelError::ImageShape {
            expected: config.image_size,
            got: image.size(),
        });
    }
    let p = config.patch_size;
    let side = config.patches_per_side();
    let mut data = Vec::with_capacity(config.num_patches() * config.patch_dim());
    for pr in 0..side {
        for pc in 0..side {
            for r in 0..p {
                for c in 0..p {
                    data.push(image.get(pr * p + r, pc * p + c));
                }
            }
        }
    }
    Ok(Tensor::new(vec![config.num_patches(), config.patch_dim()], data)?)
}

/// Intermediate nodes of one forward pass, for inspection and tests.
#[derive(Debug, Clone)]
pub struct Trace {
    pub logits: Var,
    /// `z₀` after the positional embedding, before the backbone.
    pub embedded: Var,
    /// Attention matrices, `[layer][head]`, each `tokens × tokens`.
    pub attention: Vec<Vec<Var>>,
    /// Pre-threshold inputs and outputs of every LISTA application:
    /// backbone iterations first, then one per encoder layer.
    pub lista_pre: Vec<Var>,
    pub lista_out: Vec<Var>,
    /// Output of each encoder layer.
    pub layer_out: Vec<Var>,
}

/// `z₀ = [x_class; patches·E] + E_pos`.
pub fn patch_embed(g: &mut Graph, w: &Weights<Var>, config: &ModelConfig, patches: Var) -> Result<Var> {
    let tokens = g.matmul(patches, w.patch_proj)?;
    let cls = g.reshape(w.class_token, &[1, config.embed_dim])?;
    let z = g.concat(&[cls, tokens], 0)?;
    Ok(g.add(z, w.pos_embed)?)
}

/// Tied LISTA over the patch rows of `z₀`; the class token row passes
/// through unchanged.
pub fn backbone_lista(
    g: &mut Graph,
    lista: &ListaWeights<Var>,
    config: &ModelConfig,
    z0: Var,
) -> Result<(Var, Vec<Var>, Vec<Var>)> {
    let tokens = config.num_tokens();
    let cls = g.slice(z0, 0, 0, 1)?;
    let patches = g.slice(z0, 0, 1, tokens)?;
    let (pre, out) = lista_rows(g, patches, lista.w_e, lista.s, lista.theta, config.backbone_iters)?;
    let z = g.concat(&[cls, *out.last().expect("at least one iteration")], 0)?;
    Ok((z, pre, out))
}

/// Multi-head self-attention. Returns the projected output and the
/// attention matrix of every head.
pub fn msa(g: &mut Graph, layer: &LayerWeights<Var>, config: &ModelConfig, z: Var) -> Result<(Var, Vec<Var>)> {
    let d = config.embed_dim;
    let dh = config.head_dim();
    let qkv = g.matmul(z, layer.qkv)?;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut heads = Vec::with_capacity(config.num_heads);
    let mut attention = Vec::with_capacity(config.num_heads);
    for h in 0..config.num_heads {
        let q = g.slice(qkv, 1, h * dh, (h + 1) * dh)?;
        let k = g.slice(qkv, 1, d + h * dh, d + (h + 1) * dh)?;
        let v = g.slice(qkv, 1, 2 * d + h * dh, 2 * d + (h + 1) * dh)?;
        let k_t = g.transpose(k)?;
        let scores = g.matmul(q, k_t)?;
        let scores = g.scale(scores, scale);
        let a = g.softmax(scores);
        heads.push(g.matmul(a, v)?);
        attention.push(a);
    }
    let cat = if heads.len() == 1 { heads[0] } else { g.concat(&heads, 1)? };
    Ok((g.matmul(cat, layer.proj)?, attention))
}

/// `z'_l = MSA(LN(z_{l−1})) + z_{l−1}`.
pub fn attention_half(
    g: &mut Graph,
    layer: &LayerWeights<Var>,
    config: &ModelConfig,
    z: Var,
) -> Result<(Var, Vec<Var>)> {
    let n = g.layernorm(z, layer.ln1_gain, layer.ln1_bias)?;
    let (a, attention) = msa(g, layer, config, n)?;
    Ok((g.add(a, z)?, attention))
}

/// Two-layer GELU MLP `D → hidden → D`.
pub fn mlp(g: &mut Graph, layer: &LayerWeights<Var>, x: Var) -> Result<Var> {
    let h = g.matmul(x, layer.mlp_w1)?;
    let h = g.add_bias(h, layer.mlp_b1)?;
    let h = g.gelu(h);
    let o = g.matmul(h, layer.mlp_w2)?;
    Ok(g.add_bias(o, layer.mlp_b2)?)
}

/// `z_l = MLP(LN(z'_l)) + z'_l`, the second half of a plain encoder block.
pub fn mlp_half(g: &mut Graph, layer: &LayerWeights<Var>, z_prime: Var) -> Result<Var> {
    let n = g.layernorm(z_prime, layer.ln2_gain, layer.ln2_bias)?;
    let m = mlp(g, layer, n)?;
    Ok(g.add(m, z_prime)?)
}

/// Per token row: `h_θ(W_e·z'[r] + S·z_prev[r])`. Returns the
/// pre-threshold node and the output.
pub fn lista_block(g: &mut Graph, lista: &ListaWeights<Var>, z_prime: Var, z_prev: Var) -> Result<(Var, Var)> {
    let w_e_t = g.transpose(lista.w_e)?;
    let s_t = g.transpose(lista.s)?;
    let a = g.matmul(z_prime, w_e_t)?;
    let b = g.matmul(z_prev, s_t)?;
    let pre = g.add(a, b)?;
    Ok((pre, g.soft_threshold(pre, lista.theta)?))
}

/// `u = α·z'_l + β·z_l`, then `MLP(LN(u)) + u`.
pub fn fuse_mlp(
    g: &mut Graph,
    layer: &LayerWeights<Var>,
    z_prime: Var,
    z_lista: Var,
    alpha: Var,
    beta: Var,
) -> Result<Var> {
    let a = g.scale_by(z_prime, alpha)?;
    let b = g.scale_by(z_lista, beta)?;
    let u = g.add(a, b)?;
    mlp_half(g, layer, u)
}

/// Full forward pass for one image's patch matrix (see [`patchify`]).
pub fn forward(g: &mut Graph, w: &Weights<Var>, config: &ModelConfig, patches: Var) -> Result<Trace> {
    let embedded = patch_embed(g, w, config, patches)?;
    let mut lista_pre = Vec::new();
    let mut lista_out = Vec::new();
    let mut z = embedded;
    if let Some(backbone) = &w.backbone {
        let (out, pre, outs) = backbone_lista(g, backbone, config, z)?;
        lista_pre.extend(pre);
        lista_out.extend(outs);
        z = out;
    }
    let mut attention = Vec::with_capacity(w.layers.len());
    let mut layer_out = Vec::with_capacity(w.layers.len());
    for layer in &w.layers {
        let (z_prime, att) = attention_half(g, layer, config, z)?;
        attention.push(att);
        z = match &layer.fusion {
            Some(fusion) => {
                let (pre, z_l) = lista_block(g, &fusion.lista, z_prime, z)?;
                lista_pre.push(pre);
                lista_out.push(z_l);
                fuse_mlp(g, layer, z_prime, z_l, fusion.alpha, fusion.beta)?
            }
            None => mlp_half(g, layer, z_prime)?,
        };
        layer_out.push(z);
    }
    let n = g.layernorm(z, w.norm_gain, w.norm_bias)?;
    let cls = g.slice(n, 0, 0, 1)?;
    let logits = g.matmul(cls, w.head)?;
    let logits = g.reshape(logits, &[config.num_classes])?;
    Ok(Trace {
        logits,
        embedded,
        attention,
        lista_pre,
        lista_out,
        layer_out,
    })
}

/// Puts stored weights into `g`, as trainable nodes when `trainable`.
pub fn bind(g: &mut Graph, params: &Weights<Tensor>, trainable: bool) -> Weights<Var> {
    params.map(|_, t| if trainable { g.param(t.clone()) } else { g.constant(t.clone()) })
}

/// Logits for one image.
pub fn predict_logits(params: &Weights<Tensor>, config: &ModelConfig, image: &Image) -> Result<Vec<f64>> {
    let mut g = Graph::new();
    let w = bind(&mut g, params, false);
    let x = g.constant(patchify(image, config)?);
    let trace = forward(&mut g, &w, config, x)?;
    Ok(g.value(trace.logits).data().to_vec())
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

pub fn predict(params: &Weights<Tensor>, config: &ModelConfig, image: &Image) -> Result<usize> {
    Ok(argmax(&predict_logits(params, config, image)?))
}
