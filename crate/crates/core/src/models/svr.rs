//! ε-insensitive support vector regression with an RBF kernel.
//!
//! Training solves the dual problem by sequential minimal optimization with
//! maximal-violating-pair working-set selection. The dual is posed over the
//! doubled variable vector `(α, α*) ∈ [0, C]^{2n}` with the single equality
//! constraint `Σ(α_i − α*_i) = 0`; the trained coefficients are the signed
//! differences `β_i = α_i − α*_i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `exp(-gamma · ‖x − y‖²)`. Equals 1 iff `x == y` or `gamma == 0`.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-gamma * sq).exp())
}

/// SVR hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrConfig {
    /// Regularization bound on each dual coefficient, > 0.
    pub c: f64,
    /// Half-width of the insensitive tube, >= 0.
    pub epsilon: f64,
    /// RBF width, >= 0.
    pub gamma: f64,
    /// KKT violation tolerance for the stopping rule.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.1,
            gamma: 0.1,
            tol: 1e-3,
            max_iter: 100_000,
        }
    }
}

/// Trained SVR: support vectors with signed dual coefficients plus a bias.
///
/// Invariants after a successful fit: `|alphas[i]| <= c`, support vector and
/// coefficient counts match, and `Σ alphas ≈ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// Signed coefficients `α_i − α*_i`, nonzero entries only.
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub epsilon: f64,
    /// Set when `max_iter` ran out before the KKT gap closed.
    pub converged: bool,
}

impl SvrModel {
    /// `Σ α_i K(x, X_i) + b`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut acc = self.bias;
        for (sv, alpha) in self.support_vectors.iter().zip(&self.alphas) {
            acc += alpha * rbf_kernel(x, sv, self.gamma)?;
        }
        Ok(acc)
    }
}

/// Doubled-variable index helpers: `t < n` is the α side (`d = +1`),
/// `t >= n` the α* side (`d = −1`), both referring to sample `t % n`.
#[inline]
fn side(t: usize, n: usize) -> f64 {
    if t < n {
        1.0
    } else {
        -1.0
    }
}

/// Fit by SMO. Points whose final coefficient is zero are excluded from the
/// support set; the bias averages the KKT value over free support vectors
/// and falls back to the midpoint of the KKT bounds when none are free.
pub fn svr_fit(x: &[Vec<f64>], y: &[f64], config: &SvrConfig) -> Result<SvrModel> {
    let n = x.len();
    if n == 0 || y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n.max(1),
            got: y.len(),
        });
    }
    if x.iter().flatten().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "svr_fit inputs".into(),
        });
    }
    if config.c <= 0.0 || config.epsilon < 0.0 || config.gamma < 0.0 {
        return Err(Error::InvalidConfig(
            "svr requires c > 0, epsilon >= 0, gamma >= 0".into(),
        ));
    }
    let c = config.c;
    let eps = config.epsilon;

    // Dense kernel matrix; training sets here are small enough to hold it.
    let mut kernel = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let k = rbf_kernel(&x[i], &x[j], config.gamma)?;
            kernel[i][j] = k;
            kernel[j][i] = k;
        }
    }

    // grad[t] = ∂f/∂x_t of the dual objective
    //   f = ½ Σ β_i β_j K_ij + ε Σ (α + α*) − Σ y_i (α_i − α*_i)
    // at the starting point α = α* = 0.
    let mut vars = vec![0.0_f64; 2 * n];
    let mut grad: Vec<f64> = (0..2 * n).map(|t| eps - side(t, n) * y[t % n]).collect();

    let mut converged = false;
    for _ in 0..config.max_iter {
        // Maximal violating pair over I_up and I_low.
        let mut m_val = f64::NEG_INFINITY;
        let mut m_idx = usize::MAX;
        let mut big_m_val = f64::INFINITY;
        let mut big_m_idx = usize::MAX;
        for t in 0..2 * n {
            let d = side(t, n);
            let v = -d * grad[t];
            let in_up = if d > 0.0 { vars[t] < c } else { vars[t] > 0.0 };
            let in_low = if d > 0.0 { vars[t] > 0.0 } else { vars[t] < c };
            if in_up && v > m_val {
                m_val = v;
                m_idx = t;
            }
            if in_low && v < big_m_val {
                big_m_val = v;
                big_m_idx = t;
            }
        }
        if m_idx == usize::MAX || big_m_idx == usize::MAX || m_val - big_m_val <= config.tol {
            converged = true;
            break;
        }

        let (ti, tj) = (m_idx, big_m_idx);
        let (si, sj) = (ti % n, tj % n);
        let (di, dj) = (side(ti, n), side(tj, n));

        // Feasible direction u with u_i = d_i, u_j = −d_j keeps Σ d·x fixed;
        // curvature along it is K_ii + K_jj − 2 K_ij, floored to keep the
        // step finite on duplicate rows.
        let curv = (kernel[si][si] + kernel[sj][sj] - 2.0 * kernel[si][sj]).max(1e-12);
        let step_unclipped = (m_val - big_m_val) / curv;

        // Box limits along the direction.
        let room_i = if di > 0.0 { c - vars[ti] } else { vars[ti] };
        let room_j = if dj > 0.0 { vars[tj] } else { c - vars[tj] };
        let step = step_unclipped.min(room_i).min(room_j);
        if step <= 0.0 {
            converged = true;
            break;
        }

        // Move along u (u_i = d_i, u_j = −d_j); Σ d·x stays fixed.
        vars[ti] += di * step;
        vars[tj] -= dj * step;
        vars[ti] = vars[ti].clamp(0.0, c);
        vars[tj] = vars[tj].clamp(0.0, c);

        for t in 0..2 * n {
            let d = side(t, n);
            grad[t] += d * step * (kernel[t % n][si] - kernel[t % n][sj]);
        }
    }

    // Bias from free variables: −d_t · grad[t] equals b at optimality.
    let mut b_sum = 0.0;
    let mut b_count = 0usize;
    for t in 0..2 * n {
        if vars[t] > 0.0 && vars[t] < c {
            b_sum += -side(t, n) * grad[t];
            b_count += 1;
        }
    }
    let bias = if b_count > 0 {
        b_sum / b_count as f64
    } else {
        // Midpoint of the KKT interval [M, m].
        let mut m_val = f64::NEG_INFINITY;
        let mut big_m_val = f64::INFINITY;
        for t in 0..2 * n {
            let d = side(t, n);
            let v = -d * grad[t];
            let in_up = if d > 0.0 { vars[t] < c } else { vars[t] > 0.0 };
            let in_low = if d > 0.0 { vars[t] > 0.0 } else { vars[t] < c };
            if in_up {
                m_val = m_val.max(v);
            }
            if in_low {
                big_m_val = big_m_val.min(v);
            }
        }
        (m_val + big_m_val) / 2.0
    };

    let mut support_vectors = Vec::new();
    let mut alphas = Vec::new();
    for i in 0..n {
        let beta = vars[i] - vars[i + n];
        if beta != 0.0 {
            support_vectors.push(x[i].clone());
            alphas.push(beta);
        }
    }

    Ok(SvrModel {
        support_vectors,
        alphas,
        bias,
        gamma: config.gamma,
        c,
        epsilon: eps,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_basics() {
        let x = vec![1.0, 2.0];
        assert_eq!(rbf_kernel(&x, &x, 3.0).unwrap(), 1.0);
        assert_eq!(rbf_kernel(&[0.0], &[5.0], 0.0).unwrap(), 1.0);
        // Oracle: exp(-1) for unit distance at gamma = 1
        let k = rbf_kernel(&[0.0], &[1.0], 1.0).unwrap();
        assert!((k - 0.36787944117144233).abs() < 1e-12);
        assert!(rbf_kernel(&[0.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn kernel_symmetry() {
        let a = vec![0.3, -1.2, 4.0];
        let b = vec![2.0, 0.1, -0.5];
        assert_eq!(
            rbf_kernel(&a, &b, 0.7).unwrap(),
            rbf_kernel(&b, &a, 0.7).unwrap()
        );
    }

    #[test]
    fn kernel_matrix_positive_semidefinite() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let pts: Vec<Vec<f64>> = (0..10)
                .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let mut k = nalgebra::DMatrix::zeros(10, 10);
            for i in 0..10 {
                for j in 0..10 {
                    k[(i, j)] = rbf_kernel(&pts[i], &pts[j], 0.8).unwrap();
                }
            }
            let eig = k.symmetric_eigenvalues();
            assert!(eig.iter().all(|&l| l >= -1e-8), "eigenvalues {eig:?}");
        }
    }

    #[test]
    fn constant_targets_give_bias() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let y = vec![4.5; 6];
        let cfg = SvrConfig {
            c: 10.0,
            epsilon: 0.1,
            gamma: 0.5,
            ..Default::default()
        };
        let model = svr_fit(&x, &y, &cfg).unwrap();
        assert!((model.bias - 4.5).abs() < 0.1 + cfg.tol);
        for xi in &x {
            assert!((model.predict(xi).unwrap() - 4.5).abs() <= cfg.epsilon + cfg.tol);
        }
    }

    #[test]
    fn single_point_fit() {
        let model = svr_fit(
            &[vec![2.0]],
            &[7.0],
            &SvrConfig {
                epsilon: 0.05,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((model.predict(&[2.0]).unwrap() - 7.0).abs() <= 0.05 + 1e-6);
    }

    #[test]
    fn predict_with_empty_support_set_is_bias() {
        let model = SvrModel {
            support_vectors: vec![],
            alphas: vec![],
            bias: 3.25,
            gamma: 0.1,
            c: 1.0,
            epsilon: 0.1,
            converged: true,
        };
        assert_eq!(model.predict(&[1.0, 2.0]).unwrap(), 3.25);
    }

    #[test]
    fn predict_matches_hand_computed_sum() {
        // Two hand-set support vectors with α = [1, −1]:
        //   f(x) = K(x, [0]) − K(x, [2]) + 0.5, gamma = 0.25.
        let model = SvrModel {
            support_vectors: vec![vec![0.0], vec![2.0]],
            alphas: vec![1.0, -1.0],
            bias: 0.5,
            gamma: 0.25,
            c: 1.0,
            epsilon: 0.1,
            converged: true,
        };
        // x = [1]: exp(-0.25) − exp(-0.25) + 0.5 = 0.5
        assert!((model.predict(&[1.0]).unwrap() - 0.5).abs() < 1e-12);
        // x = [0]: 1 − exp(-1) + 0.5 = 1.1321205588285577
        assert!((model.predict(&[0.0]).unwrap() - 1.1321205588285577).abs() < 1e-12);
    }

    #[test]
    fn iteration_cap_sets_warning_flag() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 * r[0] + 1.0).collect();
        let cfg = SvrConfig {
            c: 1000.0,
            epsilon: 0.001,
            gamma: 1.0,
            tol: 1e-8,
            max_iter: 3,
        };
        let model = svr_fit(&x, &y, &cfg).unwrap();
        assert!(!model.converged, "3 iterations cannot satisfy tol 1e-8");
    }

    #[test]
    fn dual_feasibility_after_fit() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let x: Vec<Vec<f64>> = (0..15)
                .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
                .collect();
            let y: Vec<f64> = x
                .iter()
                .map(|r| r[0] * 2.0 - r[1] + rng.gen_range(-0.1..0.1))
                .collect();
            let cfg = SvrConfig {
                c: 5.0,
                epsilon: 0.05,
                gamma: 0.5,
                ..Default::default()
            };
            let model = svr_fit(&x, &y, &cfg).unwrap();
            let sum: f64 = model.alphas.iter().sum();
            assert!(sum.abs() < 1e-8, "Σα = {sum}");
            assert!(model.alphas.iter().all(|a| a.abs() <= cfg.c + 1e-12));
        }
    }

    #[test]
    fn training_points_within_tube_for_free_svs() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 * r[0] + 1.0).collect();
        let cfg = SvrConfig {
            c: 1000.0,
            epsilon: 0.01,
            gamma: 1.0,
            tol: 1e-4,
            max_iter: 200_000,
        };
        let model = svr_fit(&x, &y, &cfg).unwrap();
        assert!(model.converged);
        for (xi, yi) in x.iter().zip(&y) {
            let err = (model.predict(xi).unwrap() - yi).abs();
            assert!(err <= cfg.epsilon + 1e-3, "residual {err}");
        }
    }
}
