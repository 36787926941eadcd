use ndarray::{Array1, Array2, ArrayView1, Axis};

use super::{check_len, Result, SparseError, SparseProblem};

/// Relative-change stop for [`lipschitz_constant`].
pub const POWER_ITERATION_TOL: f64 = 1e-10;
/// Iteration cap for [`lipschitz_constant`].
pub const POWER_ITERATION_MAX: usize = 1000;

/// Upper bound on full coordinate-descent sweeps.
const CD_MAX_SWEEPS: usize = 1_000_000;

/// Relative pivot size below which the dictionary is treated as rank deficient.
const RANK_TOL: f64 = 1e-12;

pub fn soft_threshold_scalar(v: f64, theta: f64) -> f64 {
    if v > theta {
        v - theta
    } else if v < -theta {
        v + theta
    } else {
        0.0
    }
}

/// `sign(v_i)·max(|v_i| − θ_i, 0)`.
pub fn soft_threshold(v: &Array1<f64>, theta: &Array1<f64>) -> Result<Array1<f64>> {
    check_len("theta", v.len(), theta.len())?;
    if let Some((index, &value)) = theta.iter().enumerate().find(|(_, t)| t.is_nan() || **t < 0.0) {
        return Err(SparseError::NegativeThreshold { index, value });
    }
    Ok(ndarray::Zip::from(v)
        .and(theta)
        .map_collect(|&x, &t| soft_threshold_scalar(x, t)))
}

/// `½‖W_d·Z − X‖² + α‖Z‖₁`.
pub fn lasso_objective(p: &SparseProblem, z: &Array1<f64>) -> Result<f64> {
    check_len("code", p.atoms(), z.len())?;
    Ok(objective_unchecked(p, z.view()))
}

fn objective_unchecked(p: &SparseProblem, z: ArrayView1<f64>) -> f64 {
    let r = p.dictionary().dot(&z) - p.measurement();
    0.5 * r.dot(&r) + p.alpha() * z.iter().map(|v| v.abs()).sum::<f64>()
}

/// `λ_max(W_dᵀW_d)` by power iteration, stopping when successive Rayleigh
/// quotients differ by less than [`POWER_ITERATION_TOL`] in relative terms.
///
/// A zero dictionary has no curvature; 1 is returned so that step sizes stay
/// finite (its ISTA iterates never leave zero anyway).
pub fn lipschitz_constant(dictionary: &Array2<f64>) -> f64 {
    let gram = dictionary.t().dot(dictionary);
    let n = gram.nrows();
    // A fixed, non-symmetric start vector avoids being orthogonal to the
    // top eigenvector for structured dictionaries.
    let mut v = Array1::from_shape_fn(n, |i| 1.0 + (i as f64 + 1.0).sqrt().fract());
    v /= v.dot(&v).sqrt();
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERATION_MAX {
        let w = gram.dot(&v);
        let next = v.dot(&w) / v.dot(&v);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return if lambda > 0.0 { lambda } else { 1.0 };
        }
        v = w / norm;
        let converged = (next - lambda).abs() <= POWER_ITERATION_TOL * next.abs();
        lambda = next;
        if converged {
            break;
        }
    }
    if lambda > 0.0 { lambda } else { 1.0 }
}

/// ISTA from `Z(0) = 0`; returns `Z(0), …, Z(K)`.
pub fn ista(p: &SparseProblem, iterations: usize) -> Vec<Array1<f64>> {
    ista_with_lipschitz(p, iterations, lipschitz_constant(p.dictionary()))
}

/// [`ista`] with a caller-supplied step constant `L`.
pub fn ista_with_lipschitz(p: &SparseProblem, iterations: usize, l: f64) -> Vec<Array1<f64>> {
    let w = p.dictionary();
    let wt_x = w.t().dot(p.measurement());
    let theta = p.alpha() / l;
    let mut z = Array1::zeros(p.atoms());
    let mut out = Vec::with_capacity(iterations + 1);
    out.push(z.clone());
    for _ in 0..iterations {
        // ∇ = W_dᵀ(W_d·Z − X)
        let grad = w.t().dot(&w.dot(&z)) - &wt_x;
        z = (&z - &(grad / l)).mapv(|v| soft_threshold_scalar(v, theta));
        out.push(z.clone());
    }
    out
}

/// Cyclic coordinate descent on the LASSO until no coordinate moves by more
/// than `tol` in a full sweep.
pub fn lasso_cd_oracle(p: &SparseProblem, tol: f64) -> Result<Array1<f64>> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(SparseError::InvalidTolerance(tol));
    }
    let w = p.dictionary();
    let n = p.atoms();
    let col_sq: Vec<f64> = w.axis_iter(Axis(1)).map(|c| c.dot(&c)).collect();
    let mut z = Array1::<f64>::zeros(n);
    // Residual X − W_d·Z, maintained incrementally.
    let mut r = p.measurement().clone();
    for _ in 0..CD_MAX_SWEEPS {
        let mut max_change = 0.0f64;
        for j in 0..n {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = w.column(j);
            let rho = col.dot(&r) + col_sq[j] * z[j];
            let next = soft_threshold_scalar(rho, p.alpha()) / col_sq[j];
            let delta = next - z[j];
            if delta != 0.0 {
                r.scaled_add(-delta, &col);
                z[j] = next;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < tol {
            break;
        }
    }
    Ok(z)
}

/// Unregularized `argmin ‖W_d·Z − X‖²` via Householder QR.
pub fn least_squares(p: &SparseProblem) -> Result<Array1<f64>> {
    let (m, n) = p.dictionary().dim();
    if m < n {
        return Err(SparseError::SingularSystem);
    }
    let mut a = p.dictionary().clone();
    let mut b = p.measurement().clone();
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return Err(SparseError::SingularSystem);
    }
    for k in 0..n {
        let norm = a.column(k).slice(ndarray::s![k..]).mapv(|v| v * v).sum().sqrt();
        if norm <= RANK_TOL * scale * (m as f64).sqrt() {
            return Err(SparseError::SingularSystem);
        }
        let alpha = if a[[k, k]] > 0.0 { -norm } else { norm };
        let mut v: Array1<f64> = a.column(k).slice(ndarray::s![k..]).to_owned();
        v[0] -= alpha;
        let vnorm_sq = v.dot(&v);
        if vnorm_sq > 0.0 {
            for j in k..n {
                let dot: f64 = (0..m - k).map(|i| v[i] * a[[k + i, j]]).sum();
                let f = 2.0 * dot / vnorm_sq;
                for i in 0..m - k {
                    a[[k + i, j]] -= f * v[i];
                }
            }
            let dot: f64 = (0..m - k).map(|i| v[i] * b[k + i]).sum();
            let f = 2.0 * dot / vnorm_sq;
            for i in 0..m - k {
                b[k + i] -= f * v[i];
            }
        }
    }
    let mut z = Array1::zeros(n);
    for k in (0..n).rev() {
        let tail: f64 = (k + 1..n).map(|j| a[[k, j]] * z[j]).sum();
        z[k] = (b[k] - tail) / a[[k, k]];
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::XorShift64Star;
    use crate::sparse::{gaussian_dictionary, random_problem, ProblemSpec};
    use ndarray::{arr1, arr2};

    fn identity_problem(x: Vec<f64>, alpha: f64) -> SparseProblem {
        let n = x.len();
        SparseProblem::new(Array2::eye(n), Array1::from(x), alpha).unwrap()
    }

    #[test]
    fn soft_threshold_cases() {
        let t = arr1(&[0.5, 0.5, 0.5]);
        let out = soft_threshold(&arr1(&[1.2, -1.2, 0.3]), &t).unwrap();
        assert!((out[0] - 0.7).abs() < 1e-15 && (out[1] + 0.7).abs() < 1e-15 && out[2] == 0.0);
        let v = arr1(&[3.0, -0.1, 0.0]);
        assert_eq!(soft_threshold(&v, &Array1::zeros(3)).unwrap(), v);
        assert_eq!(soft_threshold(&Array1::zeros(3), &arr1(&[0.0, 1.0, 9.0])).unwrap(), Array1::<f64>::zeros(3));
        assert!(matches!(
            soft_threshold(&v, &arr1(&[0.1, -0.2, 0.0])),
            Err(SparseError::NegativeThreshold { index: 1, .. })
        ));
    }

    #[test]
    fn objective_small_cases() {
        let p = identity_problem(vec![1.0, 0.0], 0.1);
        assert!((lasso_objective(&p, &arr1(&[0.0, 0.0])).unwrap() - 0.5).abs() < 1e-15);
        assert!((lasso_objective(&p, &arr1(&[1.0, 0.0])).unwrap() - 0.1).abs() < 1e-15);
        assert!(lasso_objective(&p, &arr1(&[1.0])).is_err());
    }

    #[test]
    fn objective_matches_term_by_term_sum() {
        let mut rng = XorShift64Star::new(3);
        let w = gaussian_dictionary(&mut rng, 3, 5);
        let p = random_problem(&mut rng, &w, ProblemSpec::default()).unwrap();
        let z = Array1::from_shape_simple_fn(5, || rng.normal());
        let mut fit = 0.0;
        for i in 0..3 {
            let mut acc = -p.measurement()[i];
            for j in 0..5 {
                acc += w[[i, j]] * z[j];
            }
            fit += acc * acc;
        }
        let l1: f64 = z.iter().map(|v: &f64| v.abs()).sum();
        let expected = 0.5 * fit + 0.1 * l1;
        assert!((lasso_objective(&p, &z).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn power_iteration_on_known_spectrum() {
        let w = arr2(&[[3.0, 0.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.0, 0.5]]);
        assert!((lipschitz_constant(&w) - 9.0).abs() < 1e-8);
        assert!((lipschitz_constant(&Array2::eye(4)) - 1.0).abs() < 1e-12);
        let mut rng = XorShift64Star::new(8);
        let w = gaussian_dictionary(&mut rng, 4, 8);
        let l = lipschitz_constant(&w);
        // λ_max bounds the Rayleigh quotient of every vector.
        for _ in 0..50 {
            let v = Array1::from_shape_simple_fn(8, || rng.normal());
            let wv = w.dot(&v);
            assert!(wv.dot(&wv) <= l * v.dot(&v) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn ista_identity_dictionary_fixed_point() {
        let p = identity_problem(vec![1.0, 0.2], 0.5);
        let traj = ista(&p, 5);
        assert_eq!(traj[0], arr1(&[0.0, 0.0]));
        for z in &traj[1..] {
            assert!((z[0] - 0.5).abs() < 1e-15 && z[1] == 0.0);
        }
        let zero = identity_problem(vec![0.0, 0.0], 0.5);
        assert!(ista(&zero, 10).iter().all(|z| z.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn cd_oracle_closed_forms() {
        let p = identity_problem(vec![1.0, 0.2], 0.5);
        let z = lasso_cd_oracle(&p, 1e-12).unwrap();
        assert!((z[0] - 0.5).abs() < 1e-15 && z[1] == 0.0);

        let mut rng = XorShift64Star::new(2);
        let w = gaussian_dictionary(&mut rng, 4, 8);
        let base = random_problem(&mut rng, &w, ProblemSpec::default()).unwrap();
        let big = w.t().dot(base.measurement()).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let p = SparseProblem::new(w, base.measurement().clone(), big).unwrap();
        assert!(lasso_cd_oracle(&p, 1e-10).unwrap().iter().all(|&v| v == 0.0));
        assert!(lasso_cd_oracle(&p, 0.0).is_err());
    }

    #[test]
    fn cd_solution_is_an_ista_fixed_point() {
        let mut rng = XorShift64Star::new(21);
        let w = gaussian_dictionary(&mut rng, 4, 8);
        let p = random_problem(&mut rng, &w, ProblemSpec::default()).unwrap();
        let z = lasso_cd_oracle(&p, 1e-12).unwrap();
        let l = lipschitz_constant(&w);
        let grad = w.t().dot(&(w.dot(&z) - p.measurement()));
        let step = (&z - &(grad / l)).mapv(|v| soft_threshold_scalar(v, p.alpha() / l));
        let moved = (&step - &z).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(moved < 1e-10, "{moved}");
    }

    #[test]
    fn least_squares_cases() {
        let p = identity_problem(vec![0.3, -2.0, 5.0], 0.1);
        let z = least_squares(&p).unwrap();
        assert!((&z - p.measurement()).iter().all(|v| v.abs() < 1e-14));

        let mut rng = XorShift64Star::new(12);
        let w = gaussian_dictionary(&mut rng, 9, 4);
        let z0 = Array1::from_shape_simple_fn(4, || rng.normal());
        let p = SparseProblem::new(w.clone(), w.dot(&z0), 0.1).unwrap();
        let z = least_squares(&p).unwrap();
        assert!((&z - &z0).iter().all(|v| v.abs() < 1e-9));

        // With X outside the column space the residual is orthogonal to it.
        let x = Array1::from_shape_simple_fn(9, || rng.normal());
        let p = SparseProblem::new(w.clone(), x.clone(), 0.1).unwrap();
        let r = w.dot(&least_squares(&p).unwrap()) - &x;
        assert!(w.t().dot(&r).iter().all(|v| v.abs() < 1e-8));

        let mut deficient = w.clone();
        let c0 = deficient.column(0).to_owned();
        deficient.column_mut(2).assign(&(&c0 * 2.0));
        let p = SparseProblem::new(deficient, x, 0.1).unwrap();
        assert!(matches!(least_squares(&p), Err(SparseError::SingularSystem)));
        let wide = SparseProblem::new(gaussian_dictionary(&mut rng, 2, 3), arr1(&[1.0, 1.0]), 0.1).unwrap();
        assert!(matches!(least_squares(&wide), Err(SparseError::SingularSystem)));
    }
}
