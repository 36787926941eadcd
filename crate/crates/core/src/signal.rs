//! Signal ingestion, synthetic bearing-fault signals and dataset splitting.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::rng::XorShift64Star;

/// Sample rate the synthetic fault recipes are defined at. Other rates scale
/// every frequency (and inverse-scale every time constant) proportionally.
pub const REFERENCE_SAMPLE_RATE_HZ: f64 = 12_000.0;

/// Minimum length accepted by [`gen_synthetic`].
pub const MIN_SYNTHETIC_LEN: usize = 256;

/// Default additive noise level of the synthetic recipes.
pub const SYNTHETIC_NOISE_SIGMA: f64 = 0.1;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("non-numeric token {token:?} at position {position}")]
    NonNumeric { token: String, position: usize },
    #[error("input contains no samples")]
    EmptyInput,
    #[error("raw f64le payload of {0} bytes is not a multiple of 8")]
    TruncatedRaw(usize),
    #[error("sample {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("sample rate must be positive and finite, got {0}")]
    InvalidSampleRate(f64),
    #[error("class index {0} is outside 0..{NUM_CLASSES}")]
    InvalidClass(usize),
    #[error("signal length {len} is below the minimum of {min}")]
    TooShort { len: usize, min: usize },
    #[error("dataset of {0} samples is too small to split (need at least 10)")]
    TooFewSamples(usize),
}

pub type Result<T> = std::result::Result<T, SignalError>;

/// Uniformly sampled, finite, non-empty real time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(SignalError::InvalidSampleRate(sample_rate_hz));
        }
        if samples.is_empty() {
            return Err(SignalError::EmptyInput);
        }
        if let Some((index, &value)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(SignalError::NonFinite { index, value });
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Duration of one sample in seconds.
    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }
}

pub const NUM_CLASSES: usize = 4;

/// Bearing condition classes, in label-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaultClass {
    Normal = 0,
    InnerRace = 1,
    OuterRace = 2,
    Ball = 3,
}

impl FaultClass {
    pub const ALL: [FaultClass; NUM_CLASSES] = [
        FaultClass::Normal,
        FaultClass::InnerRace,
        FaultClass::OuterRace,
        FaultClass::Ball,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or(SignalError::InvalidClass(index))
    }

    /// Short tag used in file names and reports.
    pub fn tag(self) -> &'static str {
        match self {
            FaultClass::Normal => "normal",
            FaultClass::InnerRace => "ir",
            FaultClass::OuterRace => "or",
            FaultClass::Ball => "ball",
        }
    }

    /// Parses a tag (`normal`, `ir`, `or`, `ball`) or a numeric label.
    pub fn parse(text: &str) -> Option<Self> {
        let lower = text.trim().to_ascii_lowercase();
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.tag() == lower)
            .or_else(|| lower.parse::<usize>().ok().and_then(|i| Self::from_index(i).ok()))
    }
}

impl fmt::Display for FaultClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub signal: Signal,
    pub label: usize,
}

/// On-disk sample encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalFormat {
    /// Little-endian IEEE-754 doubles, no header.
    RawF64Le,
    /// One real per comma- or whitespace-separated token.
    Csv,
}

impl SignalFormat {
    /// Guesses the format from a file extension (`csv`/`txt` vs. anything else).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") | Some("txt") => SignalFormat::Csv,
            _ => SignalFormat::RawF64Le,
        }
    }
}

pub fn load_signal(path: &Path, format: SignalFormat, sample_rate_hz: f64) -> Result<Signal> {
    let bytes = fs::read(path).map_err(|source| SignalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let samples = match format {
        SignalFormat::RawF64Le => decode_raw_f64le(&bytes)?,
        SignalFormat::Csv => parse_csv_samples(&String::from_utf8_lossy(&bytes))?,
    };
    Signal::new(samples, sample_rate_hz)
}

pub fn decode_raw_f64le(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.is_empty() {
        return Err(SignalError::EmptyInput);
    }
    if bytes.len() % 8 != 0 {
        return Err(SignalError::TruncatedRaw(bytes.len()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn encode_raw_f64le(samples: &[f64]) -> Vec<u8> {
    samples.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn parse_csv_samples(text: &str) -> Result<Vec<f64>> {
    let mut samples = Vec::new();
    for (position, token) in text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .enumerate()
    {
        let value = token.parse::<f64>().map_err(|_| SignalError::NonNumeric {
            token: token.to_string(),
            position,
        })?;
        samples.push(value);
    }
    if samples.is_empty() {
        return Err(SignalError::EmptyInput);
    }
    Ok(samples)
}

pub fn write_signal(path: &Path, format: SignalFormat, signal: &Signal) -> io::Result<()> {
    match format {
        SignalFormat::RawF64Le => fs::write(path, encode_raw_f64le(signal.samples())),
        SignalFormat::Csv => {
            let mut text = String::with_capacity(signal.len() * 24);
            for v in signal.samples() {
                // `{:?}` prints the shortest representation that round-trips.
                text.push_str(&format!("{v:?}\n"));
            }
            fs::write(path, text)
        }
    }
}

/// Impulse-train parameters of one fault class at the reference sample rate.
#[derive(Debug, Clone, Copy)]
struct FaultRecipe {
    repetition_hz: f64,
    resonance_hz: f64,
    modulation_hz: Option<f64>,
}

const IMPULSE_DECAY_S: f64 = 1e-3;
const IMPULSE_AMPLITUDE: f64 = 1.0;
const BALL_MODULATION_DEPTH: f64 = 0.5;
const NORMAL_TONE_HZ: f64 = 30.0;
const NORMAL_TONE_AMPLITUDE: f64 = 0.2;

fn recipe(class: FaultClass) -> Option<FaultRecipe> {
    match class {
        FaultClass::Normal => None,
        FaultClass::InnerRace => Some(FaultRecipe {
            repetition_hz: 162.0,
            resonance_hz: 3_000.0,
            modulation_hz: None,
        }),
        FaultClass::OuterRace => Some(FaultRecipe {
            repetition_hz: 107.0,
            resonance_hz: 2_500.0,
            modulation_hz: None,
        }),
        FaultClass::Ball => Some(FaultRecipe {
            repetition_hz: 70.0,
            resonance_hz: 2_000.0,
            modulation_hz: Some(10.0),
        }),
    }
}

/// Generates a labeled synthetic vibration signal for `label`.
///
/// Normal is white Gaussian noise (σ = 0.1) plus a 30 Hz tone of amplitude 0.2.
/// The fault classes are periodic impulse trains, each impulse ringing a
/// resonance with exponential decay τ = 1 ms, plus the same noise:
///
/// | class | repetition | resonance | extra |
/// |-------|-----------:|----------:|-------|
/// | IR    | 162 Hz     | 3 kHz     |       |
/// | OR    | 107 Hz     | 2.5 kHz   |       |
/// | Ball  | 70 Hz      | 2 kHz     | impulse amplitude modulated at 10 Hz |
///
/// Frequencies are defined at 12 kHz and scale with `fs`. The seed controls
/// the noise, the tone/train phase and the modulation phase.
pub fn gen_synthetic(label: usize, seed: u64, n: usize, fs: f64) -> Result<LabeledSample> {
    gen_synthetic_with_noise(label, seed, n, fs, SYNTHETIC_NOISE_SIGMA)
}

/// [`gen_synthetic`] with an explicit noise level (`0.0` gives the clean waveform).
pub fn gen_synthetic_with_noise(
    label: usize,
    seed: u64,
    n: usize,
    fs: f64,
    noise_sigma: f64,
) -> Result<LabeledSample> {
    let class = FaultClass::from_index(label)?;
    if n < MIN_SYNTHETIC_LEN {
        return Err(SignalError::TooShort {
            len: n,
            min: MIN_SYNTHETIC_LEN,
        });
    }
    if !(fs.is_finite() && fs > 0.0) {
        return Err(SignalError::InvalidSampleRate(fs));
    }
    let scale = fs / REFERENCE_SAMPLE_RATE_HZ;
    let mut rng = XorShift64Star::new(seed.wrapping_mul(4).wrapping_add(label as u64));
    let phase = rng.uniform(0.0, 2.0 * PI);
    let mut samples = vec![0.0; n];

    match recipe(class) {
        None => {
            let omega = 2.0 * PI * NORMAL_TONE_HZ * scale / fs;
            for (i, s) in samples.iter_mut().enumerate() {
                *s = NORMAL_TONE_AMPLITUDE * (omega * i as f64 + phase).sin();
            }
        }
        Some(r) => {
            // All quantities below are in samples.
            let period = fs / (r.repetition_hz * scale);
            let resonance = 2.0 * PI * r.resonance_hz * scale / fs;
            let decay = IMPULSE_DECAY_S / scale * fs;
            let ring_len = (decay * 12.0).ceil() as usize;
            let offset = rng.uniform(0.0, period);
            let modulation_phase = rng.uniform(0.0, 2.0 * PI);
            let mut k = 0usize;
            loop {
                let onset = offset + k as f64 * period;
                if onset >= n as f64 {
                    break;
                }
                let amplitude = match r.modulation_hz {
                    Some(f_mod) => {
                        let w = 2.0 * PI * f_mod * scale / fs;
                        IMPULSE_AMPLITUDE
                            * (1.0 + BALL_MODULATION_DEPTH * (w * onset + modulation_phase).cos())
                    }
                    None => IMPULSE_AMPLITUDE,
                };
                let start = onset.ceil() as usize;
                let end = (start + ring_len).min(n);
                for (i, s) in samples.iter_mut().enumerate().take(end).skip(start) {
                    let age = i as f64 - onset;
                    *s += amplitude * (-age / decay).exp() * (resonance * age).sin();
                }
                k += 1;
            }
        }
    }
    if noise_sigma > 0.0 {
        for s in &mut samples {
            *s += rng.gaussian(0.0, noise_sigma);
        }
    }
    Ok(LabeledSample {
        signal: Signal::new(samples, fs)?,
        label,
    })
}

/// Disjoint train/validation/test index lists, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub const TRAIN_FRACTION: f64 = 0.7;
pub const VAL_FRACTION: f64 = 0.2;

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Random 70/20/10 split of `n` indices.
pub fn split_dataset(n: usize, seed: u64) -> Result<DatasetSplit> {
    split_stratified(&vec![0; n], seed)
}

/// Random 70/20/10 split that keeps every class close to the global ratios.
///
/// Global sizes are `round(0.7·N)`, `round(0.2·N)` and the remainder; the
/// per-class quotas are apportioned by largest remainder so both the totals
/// and the class balance hold.
pub fn split_stratified(labels: &[usize], seed: u64) -> Result<DatasetSplit> {
    let n = labels.len();
    if n < 10 {
        return Err(SignalError::TooFewSamples(n));
    }
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &label) in labels.iter().enumerate() {
        members[label].push(i);
    }
    let counts: Vec<usize> = members.iter().map(Vec::len).collect();
    let train_total = (TRAIN_FRACTION * n as f64).round() as usize;
    let val_total = (VAL_FRACTION * n as f64).round() as usize;

    let train_quota = apportion(
        &counts.iter().map(|&c| TRAIN_FRACTION * c as f64).collect::<Vec<_>>(),
        &counts,
        train_total,
    );
    let remaining: Vec<usize> = counts.iter().zip(&train_quota).map(|(c, t)| c - t).collect();
    let val_quota = apportion(
        &counts.iter().map(|&c| VAL_FRACTION * c as f64).collect::<Vec<_>>(),
        &remaining,
        val_total,
    );

    let mut rng = XorShift64Star::new(seed);
    let mut split = DatasetSplit {
        train: Vec::with_capacity(train_total),
        val: Vec::with_capacity(val_total),
        test: Vec::with_capacity(n - train_total - val_total),
    };
    for (class, mut idx) in members.into_iter().enumerate() {
        rng.shuffle(&mut idx);
        let (t, v) = (train_quota[class], val_quota[class]);
        split.train.extend_from_slice(&idx[..t]);
        split.val.extend_from_slice(&idx[t..t + v]);
        split.test.extend_from_slice(&idx[t + v..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Integer allocation summing to `total`, each entry at most `caps[i]`,
/// as close as possible to the real-valued `targets`.
fn apportion(targets: &[f64], caps: &[usize], total: usize) -> Vec<usize> {
    let mut alloc: Vec<usize> = targets
        .iter()
        .zip(caps)
        .map(|(t, &cap)| (t.floor() as usize).min(cap))
        .collect();
    let mut assigned: usize = alloc.iter().sum();
    while assigned < total {
        let pick = (0..alloc.len())
            .filter(|&i| alloc[i] < caps[i])
            .max_by(|&a, &b| {
                let da = targets[a] - alloc[a] as f64;
                let db = targets[b] - alloc[b] as f64;
                // Ties go to the lower class index.
                da.total_cmp(&db).then(b.cmp(&a))
            });
        match pick {
            Some(i) => {
                alloc[i] += 1;
                assigned += 1;
            }
            None => break,
        }
    }
    alloc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_parse() {
        let s = parse_csv_samples("0.0,1.0,-1.0").unwrap();
        assert_eq!(s, vec![0.0, 1.0, -1.0]);
        let s = parse_csv_samples("1\n2, 3\n\n").unwrap();
        assert_eq!(s, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(parse_csv_samples(""), Err(SignalError::EmptyInput)));
        assert!(matches!(parse_csv_samples(" \n,"), Err(SignalError::EmptyInput)));
        match parse_csv_samples("1.0,abc") {
            Err(SignalError::NonNumeric { token, position }) => {
                assert_eq!(token, "abc");
                assert_eq!(position, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn raw_errors() {
        assert!(matches!(decode_raw_f64le(&[]), Err(SignalError::EmptyInput)));
        assert!(matches!(decode_raw_f64le(&[0; 7]), Err(SignalError::TruncatedRaw(7))));
    }

    #[test]
    fn signal_invariants() {
        assert!(Signal::new(vec![1.0], 0.0).is_err());
        assert!(Signal::new(vec![f64::NAN], 1.0).is_err());
        assert!(Signal::new(vec![], 1.0).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_signal(Path::new("/nonexistent/x.csv"), SignalFormat::Csv, 1.0);
        assert!(matches!(err, Err(SignalError::Io { .. })));
    }

    #[test]
    fn synthetic_is_deterministic() {
        for label in 0..NUM_CLASSES {
            let a = gen_synthetic(label, 11, 2048, 12_000.0).unwrap();
            let b = gen_synthetic(label, 11, 2048, 12_000.0).unwrap();
            assert_eq!(a, b);
            let c = gen_synthetic(label, 12, 2048, 12_000.0).unwrap();
            assert_ne!(a.signal.samples(), c.signal.samples());
        }
    }

    #[test]
    fn synthetic_errors() {
        assert!(matches!(
            gen_synthetic(4, 0, 2048, 12_000.0),
            Err(SignalError::InvalidClass(4))
        ));
        assert!(matches!(
            gen_synthetic(0, 0, 255, 12_000.0),
            Err(SignalError::TooShort { .. })
        ));
    }

    #[test]
    fn split_sizes() {
        for (n, expect) in [(1000, (700, 200, 100)), (10, (7, 2, 1)), (11, (8, 2, 1))] {
            let s = split_dataset(n, 1).unwrap();
            assert_eq!((s.train.len(), s.val.len(), s.test.len()), expect, "n = {n}");
        }
        assert!(matches!(split_dataset(9, 0), Err(SignalError::TooFewSamples(9))));
    }

    #[test]
    fn stratified_split_balances_classes() {
        let labels: Vec<usize> = (0..100).map(|i| i % 4).collect();
        let s = split_stratified(&labels, 5).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (70, 20, 10));
        for class in 0..4 {
            let count = |v: &[usize]| v.iter().filter(|&&i| labels[i] == class).count();
            assert!((17..=18).contains(&count(&s.train)));
            assert_eq!(count(&s.val), 5);
        }
    }

    #[test]
    fn apportion_respects_caps() {
        let a = apportion(&[0.2, 0.2, 0.2], &[0, 1, 5], 3);
        assert_eq!(a.iter().sum::<usize>(), 3);
        assert_eq!(a[0], 0);
        assert!(a[1] <= 1);
    }
}
