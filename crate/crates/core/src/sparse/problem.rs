use ndarray::{Array1, Array2};

use super::{check_len, Result, SparseError};
use crate::rng::XorShift64Star;

/// One LASSO instance `min ½‖W_d·Z − X‖² + α‖Z‖₁`, optionally with the code
/// that generated `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseProblem {
    dictionary: Array2<f64>,
    measurement: Array1<f64>,
    alpha: f64,
    code: Option<Array1<f64>>,
}

impl SparseProblem {
    pub fn new(dictionary: Array2<f64>, measurement: Array1<f64>, alpha: f64) -> Result<Self> {
        let (m, n) = dictionary.dim();
        if m == 0 || n == 0 {
            return Err(SparseError::EmptyDictionary);
        }
        check_len("measurement", m, measurement.len())?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(SparseError::InvalidAlpha(alpha));
        }
        if dictionary.iter().any(|v| !v.is_finite()) {
            return Err(SparseError::NonFinite("dictionary"));
        }
        if measurement.iter().any(|v| !v.is_finite()) {
            return Err(SparseError::NonFinite("measurement"));
        }
        Ok(Self {
            dictionary,
            measurement,
            alpha,
            code: None,
        })
    }

    /// Attaches the ground-truth code `Z*`.
    pub fn with_code(mut self, code: Array1<f64>) -> Result<Self> {
        check_len("code", self.atoms(), code.len())?;
        self.code = Some(code);
        Ok(self)
    }

    pub fn dictionary(&self) -> &Array2<f64> {
        &self.dictionary
    }

    pub fn measurement(&self) -> &Array1<f64> {
        &self.measurement
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn code(&self) -> Option<&Array1<f64>> {
        self.code.as_ref()
    }

    /// Measurement dimension `m`.
    pub fn rows(&self) -> usize {
        self.dictionary.nrows()
    }

    /// Code dimension `n`.
    pub fn atoms(&self) -> usize {
        self.dictionary.ncols()
    }

    /// `X − W_d·Z*`, when the code is known.
    pub fn noise(&self) -> Option<Array1<f64>> {
        self.code
            .as_ref()
            .map(|z| &self.measurement - &self.dictionary.dot(z))
    }
}

/// `m × n` dictionary with i.i.d. `N(0, 1/m)` entries, so columns have unit
/// expected norm.
pub fn gaussian_dictionary(rng: &mut XorShift64Star, m: usize, n: usize) -> Array2<f64> {
    let sd = 1.0 / (m as f64).sqrt();
    Array2::from_shape_simple_fn((m, n), || rng.gaussian(0.0, sd))
}

/// Length-`n` code where each entry is nonzero with probability `density`,
/// nonzeros drawn from `N(0, 1)`.
pub fn sparse_code(rng: &mut XorShift64Star, n: usize, density: f64) -> Array1<f64> {
    Array1::from_shape_simple_fn(n, || {
        let active = rng.next_f64() < density;
        let v = rng.normal();
        if active {
            v
        } else {
            0.0
        }
    })
}

/// Recipe for synthetic instances sharing one dictionary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    pub alpha: f64,
    pub density: f64,
    pub noise_sd: f64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            density: 0.25,
            noise_sd: 0.01,
        }
    }
}

/// `X = W_d·Z* + w` with a fresh sparse `Z*` and Gaussian noise `w`.
pub fn random_problem(
    rng: &mut XorShift64Star,
    dictionary: &Array2<f64>,
    spec: ProblemSpec,
) -> Result<SparseProblem> {
    let code = sparse_code(rng, dictionary.ncols(), spec.density);
    let mut x = dictionary.dot(&code);
    x.mapv_inplace(|v| v + rng.gaussian(0.0, spec.noise_sd));
    SparseProblem::new(dictionary.clone(), x, spec.alpha)?.with_code(code)
}
