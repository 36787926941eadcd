use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::ista::{lipschitz_constant, soft_threshold_scalar};
use super::{check_len, Result, SparseError, SparseProblem};
use crate::autodiff::{Graph, Tensor, Var};
use crate::rng::XorShift64Star;

const PARAMS_MAGIC: &str = "lista-params v1";
const HEADER_END: &str = "---\n";

/// Tied-weight LISTA encoder: `K` applications of
/// `Z ← h_θ(W_e·X + S·Z)` from `Z = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ListaParams {
    /// `n × m` filter matrix.
    pub w_e: Array2<f64>,
    /// `n × n` mutual-inhibition matrix.
    pub s: Array2<f64>,
    /// Per-atom thresholds, all `≥ 0`.
    pub theta: Array1<f64>,
    pub layers: usize,
    /// Regularization weight the encoder was initialized for.
    pub alpha: f64,
}

impl ListaParams {
    pub fn new(w_e: Array2<f64>, s: Array2<f64>, theta: Array1<f64>, layers: usize, alpha: f64) -> Result<Self> {
        let n = w_e.nrows();
        check_len("S rows", n, s.nrows())?;
        check_len("S columns", n, s.ncols())?;
        check_len("theta", n, theta.len())?;
        if layers == 0 {
            return Err(SparseError::ZeroLayers);
        }
        if let Some((index, &value)) = theta.iter().enumerate().find(|(_, t)| t.is_nan() || **t < 0.0) {
            return Err(SparseError::NegativeThreshold { index, value });
        }
        Ok(Self {
            w_e,
            s,
            theta,
            layers,
            alpha,
        })
    }

    pub fn measurement_dim(&self) -> usize {
        self.w_e.ncols()
    }

    pub fn code_dim(&self) -> usize {
        self.w_e.nrows()
    }
}

/// Parameters under which LISTA reproduces `layers` ISTA iterations:
/// `W_e = W_dᵀ/L`, `S = I − W_dᵀW_d/L`, `θ = α/L`.
pub fn lista_init(dictionary: &Array2<f64>, alpha: f64, layers: usize) -> Result<ListaParams> {
    if dictionary.iter().any(|v| !v.is_finite()) {
        return Err(SparseError::NonFinite("dictionary"));
    }
    let n = dictionary.ncols();
    let l = lipschitz_constant(dictionary);
    let w_e = dictionary.t().as_standard_layout().to_owned() / l;
    let s = Array2::eye(n) - dictionary.t().dot(dictionary) / l;
    let theta = Array1::from_elem(n, alpha / l);
    ListaParams::new(w_e, s, theta, layers, alpha)
}

/// Encodes one measurement. `W_e·X` is formed once and reused by every layer.
pub fn lista_forward(params: &ListaParams, x: &Array1<f64>) -> Result<Array1<f64>> {
    check_len("measurement", params.measurement_dim(), x.len())?;
    let b = params.w_e.dot(x);
    let mut z = Array1::zeros(params.code_dim());
    for _ in 0..params.layers {
        let pre = &b + &params.s.dot(&z);
        z = ndarray::Zip::from(&pre)
            .and(&params.theta)
            .map_collect(|&v, &t| soft_threshold_scalar(v, t));
    }
    Ok(z)
}

/// Measurement and target code.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub x: Array1<f64>,
    pub z_star: Array1<f64>,
}

impl TrainingPair {
    /// Uses the problem's generating code as the target.
    pub fn from_problem(p: &SparseProblem) -> Option<Self> {
        p.code().map(|z| Self {
            x: p.measurement().clone(),
            z_star: z.clone(),
        })
    }
}

/// `(1/P)·Σ ½‖Z*ᵖ − f(Xᵖ)‖²`.
pub fn lista_loss(params: &ListaParams, pairs: &[TrainingPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(SparseError::EmptyTrainingSet);
    }
    let mut total = 0.0;
    for pair in pairs {
        let d = lista_forward(params, &pair.x)? - &pair.z_star;
        total += 0.5 * d.dot(&d);
    }
    Ok(total / pairs.len() as f64)
}

/// `Σ‖Z* − f(X)‖² / Σ‖Z*‖²` over the set.
pub fn nmse(params: &ListaParams, pairs: &[TrainingPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(SparseError::EmptyTrainingSet);
    }
    let (mut err, mut energy) = (0.0, 0.0);
    for pair in pairs {
        let d = lista_forward(params, &pair.x)? - &pair.z_star;
        err += d.dot(&d);
        energy += pair.z_star.dot(&pair.z_star);
    }
    Ok(if energy > 0.0 { err / energy } else { err })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ListaTrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for ListaTrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            lr: 1e-2,
            momentum: 0.9,
            batch: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedLista {
    pub params: ListaParams,
    /// Mini-batch loss before each step.
    pub loss_history: Vec<f64>,
}

fn to_tensor(a: &Array2<f64>) -> Tensor {
    Tensor::new(vec![a.nrows(), a.ncols()], a.iter().copied().collect()).expect("non-empty matrix")
}

fn stack_rows<'a>(rows: impl Iterator<Item = &'a Array1<f64>>, width: usize) -> Tensor {
    let data: Vec<f64> = rows.flat_map(|r| r.iter().copied()).collect();
    let n = data.len() / width;
    Tensor::new(vec![n, width], data).expect("non-empty batch")
}

/// Graph form of the encoder over the rows of `x`: with `B = X·W_eᵀ`,
/// applies `Z ← h_θ(B + Z·Sᵀ)` from `Z = 0` `layers` times. Returns the
/// pre-threshold and output node of every layer.
pub fn lista_rows(
    g: &mut Graph,
    x: Var,
    w_e: Var,
    s: Var,
    theta: Var,
    layers: usize,
) -> crate::autodiff::Result<(Vec<Var>, Vec<Var>)> {
    let w_e_t = g.transpose(w_e)?;
    let s_t = g.transpose(s)?;
    let b = g.matmul(x, w_e_t)?;
    let mut pre = vec![b];
    let mut out = vec![g.soft_threshold(b, theta)?];
    for _ in 1..layers {
        let lateral = g.matmul(*out.last().expect("nonempty"), s_t)?;
        let p = g.add(b, lateral)?;
        pre.push(p);
        out.push(g.soft_threshold(p, theta)?);
    }
    Ok((pre, out))
}

/// Mini-batch SGD with momentum on `(1/B)·Σ ½‖Z* − f(X)‖²` over `W_e`, `S`
/// and `θ`. Thresholds are clamped to `≥ 0` after every step.
pub fn lista_train(pairs: &[TrainingPair], params: &ListaParams, config: ListaTrainConfig) -> Result<TrainedLista> {
    if pairs.is_empty() {
        return Err(SparseError::EmptyTrainingSet);
    }
    let (m, n) = (params.measurement_dim(), params.code_dim());
    for pair in pairs {
        check_len("training measurement", m, pair.x.len())?;
        check_len("training code", n, pair.z_star.len())?;
    }
    let batch = config.batch.clamp(1, pairs.len());
    let mut rng = XorShift64Star::new(config.seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut cursor = order.len();

    let mut w_e = to_tensor(&params.w_e);
    let mut s = to_tensor(&params.s);
    let mut theta = Tensor::vector(params.theta.to_vec());
    let mut vel = [
        vec![0.0; w_e.len()],
        vec![0.0; s.len()],
        vec![0.0; theta.len()],
    ];
    let mut history = Vec::with_capacity(config.steps);

    for _ in 0..config.steps {
        let mut picked = Vec::with_capacity(batch);
        while picked.len() < batch {
            if cursor == order.len() {
                rng.shuffle(&mut order);
                cursor = 0;
            }
            picked.push(order[cursor]);
            cursor += 1;
        }
        let xb = stack_rows(picked.iter().map(|&i| &pairs[i].x), m);
        let zb = stack_rows(picked.iter().map(|&i| &pairs[i].z_star), n);

        let mut g = Graph::new();
        let x = g.constant(xb);
        let target = g.constant(zb);
        let vw = g.param(w_e.clone());
        let vs = g.param(s.clone());
        let vt = g.param(theta.clone());
        let (_, outs) = lista_rows(&mut g, x, vw, vs, vt, params.layers)?;
        let z = *outs.last().expect("at least one layer");
        let diff = g.sub(z, target)?;
        let sq = g.mul(diff, diff)?;
        let total = g.sum(sq);
        let loss = g.scale(total, 0.5 / batch as f64);
        g.backward(loss)?;
        history.push(g.value(loss).item());

        for ((tensor, var), v) in [&mut w_e, &mut s, &mut theta].into_iter().zip([vw, vs, vt]).zip(vel.iter_mut()) {
            let grad = g.grad_or_zeros(var);
            for ((p, gi), vi) in tensor.data_mut().iter_mut().zip(grad.data()).zip(v.iter_mut()) {
                *vi = config.momentum * *vi + gi;
                *p -= config.lr * *vi;
            }
        }
        for t in theta.data_mut() {
            *t = t.max(0.0);
        }
    }

    let params = ListaParams::new(
        Array2::from_shape_vec((n, m), w_e.into_data()).expect("shape kept"),
        Array2::from_shape_vec((n, n), s.into_data()).expect("shape kept"),
        Array1::from(theta.into_data()),
        params.layers,
        params.alpha,
    )?;
    Ok(TrainedLista {
        params,
        loss_history: history,
    })
}

/// Text header (`m`, `n`, `layers`, `alpha`), a `---` line, then `W_e`, `S`
/// and `θ` as row-major little-endian `f64`.
pub fn encode_params(p: &ListaParams) -> Vec<u8> {
    let mut out = format!(
        "{PARAMS_MAGIC}\nm = {}\nn = {}\nlayers = {}\nalpha = {}\n{HEADER_END}",
        p.measurement_dim(),
        p.code_dim(),
        p.layers,
        p.alpha
    )
    .into_bytes();
    for v in p.w_e.iter().chain(p.s.iter()).chain(p.theta.iter()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_params(bytes: &[u8]) -> Result<ListaParams> {
    let bad = |msg: &str| SparseError::Format(msg.to_string());
    let split = bytes
        .windows(HEADER_END.len() + 1)
        .position(|w| w[0] == b'\n' && &w[1..] == HEADER_END.as_bytes())
        .ok_or_else(|| bad("missing header terminator"))?;
    let header = std::str::from_utf8(&bytes[..split]).map_err(|_| bad("header is not utf-8"))?;
    let payload = &bytes[split + 1 + HEADER_END.len()..];

    let mut lines = header.lines();
    if lines.next() != Some(PARAMS_MAGIC) {
        return Err(bad("unrecognized magic line"));
    }
    let (mut m, mut n, mut layers, mut alpha) = (None, None, None, None);
    for line in lines {
        let (key, value) = line.split_once('=').ok_or_else(|| bad("header line without '='"))?;
        let value = value.trim();
        match key.trim() {
            "m" => m = value.parse::<usize>().ok(),
            "n" => n = value.parse::<usize>().ok(),
            "layers" => layers = value.parse::<usize>().ok(),
            "alpha" => alpha = value.parse::<f64>().ok(),
            other => return Err(SparseError::Format(format!("unknown header key {other:?}"))),
        }
    }
    let (m, n, layers, alpha) = match (m, n, layers, alpha) {
        (Some(m), Some(n), Some(l), Some(a)) if m > 0 && n > 0 => (m, n, l, a),
        _ => return Err(bad("header needs positive m, n and numeric layers, alpha")),
    };
    let expected = n * m + n * n + n;
    if payload.len() != 8 * expected {
        return Err(SparseError::Format(format!(
            "payload holds {} bytes, expected {}",
            payload.len(),
            8 * expected
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let w_e = Array2::from_shape_vec((n, m), values[..n * m].to_vec()).expect("sized");
    let s = Array2::from_shape_vec((n, n), values[n * m..n * m + n * n].to_vec()).expect("sized");
    let theta = Array1::from(values[n * m + n * n..].to_vec());
    ListaParams::new(w_e, s, theta, layers, alpha)
}

pub fn save_params(p: &ListaParams, path: &Path) -> Result<()> {
    fs::write(path, encode_params(p))?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<ListaParams> {
    decode_params(&fs::read(path)?)
}
