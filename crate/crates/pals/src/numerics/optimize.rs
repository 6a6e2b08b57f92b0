//! Quasi-Newton minimization.
//!
//! Dense BFGS with a backtracking Armijo line search. An L1 penalty, when
//! configured, is handled orthant-wise (pseudo-gradient plus sign projection
//! of the search direction and the trial points), since BFGS itself assumes
//! a smooth objective. The L2 penalty is folded into the smooth part.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Settings shared by every solver call in the crate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Infinity-norm threshold on the (pseudo-)gradient.
    pub gradient_tolerance: f64,
    /// Multiplicative backtracking factor, strictly inside (0, 1).
    pub line_search_shrink: f64,
    pub l2_penalty: f64,
    pub l1_penalty: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            line_search_shrink: 0.5,
            l2_penalty: 0.0,
            l1_penalty: 0.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::Config(
                "gradient_tolerance must be strictly positive".into(),
            ));
        }
        if !(self.line_search_shrink > 0.0 && self.line_search_shrink < 1.0) {
            return Err(Error::Config(
                "line_search_shrink must lie in (0, 1)".into(),
            ));
        }
        if self.l2_penalty < 0.0 || self.l1_penalty < 0.0 {
            return Err(Error::Config("penalties must be non-negative".into()));
        }
        Ok(())
    }
}

/// Outcome summary for one `minimize` call.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectiveReport {
    /// Final penalized objective value.
    pub final_value: f64,
    /// Infinity norm of the final (pseudo-)gradient.
    pub gradient_norm: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

const ARMIJO_C1: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;
const CURVATURE_GUARD: f64 = 1e-10;

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pseudo-gradient of f(x) + l1*|x|_1 given the smooth gradient g.
fn pseudo_gradient(x: &[f64], g: &[f64], l1: f64) -> Vec<f64> {
    if l1 == 0.0 {
        return g.to_vec();
    }
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| {
            if xi > 0.0 {
                gi + l1
            } else if xi < 0.0 {
                gi - l1
            } else if gi + l1 < 0.0 {
                gi + l1
            } else if gi - l1 > 0.0 {
                gi - l1
            } else {
                0.0
            }
        })
        .collect()
}

/// Minimize a smooth objective plus the configured penalties.
///
/// `objective` returns the value and gradient of the smooth part only; the
/// penalties are applied here. Accepted steps never increase the penalized
/// objective. A non-finite value or gradient at any evaluated point aborts
/// with an error carrying the last valid point.
pub fn minimize<F>(
    mut objective: F,
    start: &[f64],
    config: &OptimizerConfig,
) -> Result<(Vec<f64>, ObjectiveReport)>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    config.validate()?;
    let n = start.len();
    let l1 = config.l1_penalty;
    let l2 = config.l2_penalty;

    // Penalized smooth part: f(x) + (l2/2)|x|^2, gradient g(x) + l2*x.
    let mut eval = |x: &[f64]| -> (f64, Vec<f64>) {
        let (f, mut g) = objective(x);
        let mut v = f;
        if l2 > 0.0 {
            for (gi, xi) in g.iter_mut().zip(x) {
                v += 0.5 * l2 * xi * xi;
                *gi += l2 * xi;
            }
        }
        (v, g)
    };
    let penalized = |f_smooth: f64, x: &[f64]| -> f64 {
        if l1 > 0.0 {
            f_smooth + l1 * x.iter().map(|v| v.abs()).sum::<f64>()
        } else {
            f_smooth
        }
    };

    let mut x = start.to_vec();
    let (mut f_smooth, mut g) = eval(&x);
    if !f_smooth.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Optimization {
            message: "objective non-finite at start".into(),
            last_valid_point: x,
        });
    }
    let mut f_total = penalized(f_smooth, &x);

    // Inverse Hessian approximation, dense.
    let mut h: Vec<f64> = vec![0.0; n * n];
    let reset_h = |h: &mut Vec<f64>| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
    };
    reset_h(&mut h);
    let mut first_update_pending = true;

    let mut iterations_used = 0;
    let mut converged = false;

    for _ in 0..config.max_iterations {
        let pg = pseudo_gradient(&x, &g, l1);
        if inf_norm(&pg) <= config.gradient_tolerance {
            converged = true;
            break;
        }

        // d = -H pg, then orthant alignment for the L1 case.
        let mut d = vec![0.0; n];
        for i in 0..n {
            let row = &h[i * n..(i + 1) * n];
            d[i] = -dot(row, &pg);
        }
        if l1 > 0.0 {
            for i in 0..n {
                if d[i] * pg[i] > 0.0 {
                    d[i] = 0.0;
                }
            }
        }
        let mut slope = dot(&pg, &d);
        if !(slope < 0.0) {
            // Not a descent direction; fall back to steepest descent.
            reset_h(&mut h);
            first_update_pending = true;
            for i in 0..n {
                d[i] = -pg[i];
            }
            slope = dot(&pg, &d);
            if !(slope < 0.0) {
                // Pseudo-gradient is numerically zero.
                converged = inf_norm(&pg) <= config.gradient_tolerance;
                break;
            }
        }

        // Orthant of the current point; zero coordinates take the sign the
        // pseudo-gradient wants to move them into.
        let orthant: Option<Vec<f64>> = (l1 > 0.0).then(|| {
            x.iter()
                .zip(&pg)
                .map(|(&xi, &pgi)| if xi != 0.0 { xi.signum() } else { -pgi.signum() })
                .collect()
        });

        let mut alpha = 1.0;
        let mut accepted = false;
        let mut x_new = Vec::new();
        let (mut f_new_smooth, mut g_new) = (0.0, Vec::new());
        while alpha >= MIN_STEP {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            if let Some(orth) = &orthant {
                for i in 0..n {
                    if trial[i] * orth[i] < 0.0 {
                        trial[i] = 0.0;
                    }
                }
            }
            let (f_t, g_t) = eval(&trial);
            if !f_t.is_finite() || g_t.iter().any(|v| !v.is_finite()) {
                return Err(Error::Optimization {
                    message: format!("objective non-finite at step size {alpha}"),
                    last_valid_point: x,
                });
            }
            let f_t_total = penalized(f_t, &trial);
            if f_t_total <= f_total + ARMIJO_C1 * alpha * slope {
                x_new = trial;
                f_new_smooth = f_t;
                g_new = g_t;
                f_total = f_t_total;
                accepted = true;
                break;
            }
            alpha *= config.line_search_shrink;
        }
        if !accepted {
            // No acceptable step; report the current point as-is.
            break;
        }

        iterations_used += 1;

        // BFGS update on the smooth gradients.
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        let s_norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y_norm = yv.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sy > CURVATURE_GUARD * s_norm * y_norm {
            if first_update_pending {
                // Scale the initial inverse Hessian before the first update.
                let yy = dot(&yv, &yv);
                if yy > 0.0 {
                    let scale = sy / yy;
                    for i in 0..n {
                        for j in 0..n {
                            h[i * n + j] = if i == j { scale } else { 0.0 };
                        }
                    }
                }
                first_update_pending = false;
            }
            let rho = 1.0 / sy;
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            let mut hy = vec![0.0; n];
            for i in 0..n {
                hy[i] = dot(&h[i * n..(i + 1) * n], &yv);
            }
            let yhy = dot(&yv, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += -rho * (s[i] * hy[j] + hy[i] * s[j])
                        + rho * rho * yhy * s[i] * s[j]
                        + rho * s[i] * s[j];
                }
            }
        }

        x = x_new;
        f_smooth = f_new_smooth;
        g = g_new;
        let _ = f_smooth;
    }

    if !converged {
        let pg = pseudo_gradient(&x, &g, l1);
        converged = inf_norm(&pg) <= config.gradient_tolerance;
    }
    let pg = pseudo_gradient(&x, &g, l1);
    let report = ObjectiveReport {
        final_value: f_total,
        gradient_norm: inf_norm(&pg),
        iterations_used,
        converged,
    };
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{log_sigmoid, sigmoid};

    #[test]
    fn quadratic_finds_minimum() {
        let (x, report) = minimize(
            |v| ((v[0] - 3.0) * (v[0] - 3.0), vec![2.0 * (v[0] - 3.0)]),
            &[0.0],
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!((x[0] - 3.0).abs() <= 1e-6);
        assert!(report.converged);
        assert!(report.gradient_norm <= 1e-6);
    }

    #[test]
    fn separable_logistic_with_l2_stays_finite() {
        // Two perfectly separable points; without the penalty the weights
        // would diverge.
        let config = OptimizerConfig {
            l2_penalty: 1.0,
            ..OptimizerConfig::default()
        };
        let (x, report) = minimize(
            |v| {
                let pts = [(-1.0, 0.0), (1.0, 1.0)];
                let mut f = 0.0;
                let mut g = 0.0;
                for (xi, yi) in pts {
                    let t = v[0] * xi;
                    f -= yi * log_sigmoid(t) + (1.0 - yi) * log_sigmoid(-t);
                    g += (sigmoid(t) - yi) * xi;
                }
                (f, vec![g])
            },
            &[0.0],
            &config,
        )
        .unwrap();
        assert!(x[0].is_finite());
        assert!(x[0] > 0.1);
        assert!(report.converged);
    }

    #[test]
    fn rosenbrock_reaches_known_optimum() {
        let rosenbrock = |v: &[f64]| {
            let (a, b) = (v[0], v[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            (f, g)
        };
        let config = OptimizerConfig {
            max_iterations: 2000,
            gradient_tolerance: 1e-8,
            ..OptimizerConfig::default()
        };
        let (x, _) = minimize(rosenbrock, &[-1.2, 1.0], &config).unwrap();
        assert!((x[0] - 1.0).abs() <= 1e-4, "x0={}", x[0]);
        assert!((x[1] - 1.0).abs() <= 1e-4, "x1={}", x[1]);
    }

    #[test]
    fn l1_soft_thresholds_a_quadratic() {
        // argmin 0.5 (v - c)^2 + l1 |v| = sign(c) * max(|c| - l1, 0).
        for (c, l1, want) in [(3.0, 1.0, 2.0), (0.5, 1.0, 0.0), (-2.0, 0.5, -1.5)] {
            let config = OptimizerConfig {
                l1_penalty: l1,
                gradient_tolerance: 1e-10,
                ..OptimizerConfig::default()
            };
            let (x, _) = minimize(
                |v| (0.5 * (v[0] - c) * (v[0] - c), vec![v[0] - c]),
                &[0.0],
                &config,
            )
            .unwrap();
            assert!((x[0] - want).abs() <= 1e-8, "c={c} l1={l1} got {}", x[0]);
        }
    }

    #[test]
    fn never_returns_worse_point_than_start() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let n = rng.gen_range(1..6);
            let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let scale: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..10.0)).collect();
            let start: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let config = OptimizerConfig {
                max_iterations: rng.gen_range(1..20),
                l1_penalty: if rng.gen_bool(0.5) { 0.3 } else { 0.0 },
                ..OptimizerConfig::default()
            };
            let obj = |v: &[f64]| {
                let mut f = 0.0;
                let mut g = vec![0.0; v.len()];
                for i in 0..v.len() {
                    f += 0.5 * scale[i] * (v[i] - center[i]).powi(2);
                    g[i] = scale[i] * (v[i] - center[i]);
                }
                (f, g)
            };
            let f_start = {
                let (f, _) = obj(&start);
                f + config.l1_penalty * start.iter().map(|v| v.abs()).sum::<f64>()
            };
            let (_, report) = minimize(obj, &start, &config).unwrap();
            assert!(report.final_value <= f_start + 1e-12);
        }
    }

    #[test]
    fn non_finite_objective_reports_last_valid_point() {
        let err = minimize(
            |v| {
                if v[0] > 0.5 {
                    (f64::NAN, vec![f64::NAN])
                } else {
                    // Steep slope pushes the first trial step past 0.5.
                    (-10.0 * v[0], vec![-10.0])
                }
            },
            &[0.0],
            &OptimizerConfig::default(),
        )
        .unwrap_err();
        match err {
            Error::Optimization {
                last_valid_point, ..
            } => assert_eq!(last_valid_point, vec![0.0]),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
