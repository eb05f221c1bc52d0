//! Bound-constrained nonlinear least squares.
//!
//! Each iteration builds a forward-difference Jacobian, forms the
//! Gauss-Newton quadratic model of the objective and solves the
//! bound-constrained quadratic subproblem with a small active-set loop.
//! A Levenberg-Marquardt damping term keeps the model trustworthy; a step is
//! accepted only if it lowers the sum of squared residuals.

use nalgebra::{DMatrix, DVector};

/// Stopping budgets and tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iterations: usize,
    pub max_function_evaluations: usize,
    pub step_tolerance: f64,
    pub optimality_tolerance: f64,
    pub constraint_tolerance: f64,
    /// Carried for completeness; the SQP termination test does not consult it.
    pub function_tolerance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            max_function_evaluations: 500,
            step_tolerance: 1e-6,
            optimality_tolerance: 1e-6,
            constraint_tolerance: 1e-6,
            function_tolerance: 1e-1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    StepTolerance,
    Optimality,
    IterationBudget,
    EvaluationBudget,
    /// The damping grew without finding a descent step.
    Stalled,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(self, Termination::StepTolerance | Termination::Optimality)
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    /// Sum of squared residuals at `x`.
    pub cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

/// Minimises `sum(residuals(x)^2)` subject to `lower <= x <= upper`.
///
/// `residuals` writes into its output slice, whose length is fixed by the
/// first call. The start point is projected onto the box first.
pub fn minimize_box<F>(
    mut residuals: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    n_residuals: usize,
    settings: &SolverSettings,
) -> Solution
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = x0.len();
    assert!(lower.len() == n && upper.len() == n, "bounds must match the parameter count");
    let project = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lower[i], upper[i]);
        }
    };

    let mut x = x0.to_vec();
    project(&mut x);
    let mut r = vec![0.0; n_residuals];
    residuals(&x, &mut r);
    let mut evaluations = 1;
    let mut cost = sum_sq(&r);

    let mut lambda = 1e-3;
    let mut jac = DMatrix::<f64>::zeros(n_residuals, n);
    let mut r_probe = vec![0.0; n_residuals];
    let mut x_probe = x.clone();
    let mut iterations = 0;

    let termination = loop {
        if iterations >= settings.max_iterations {
            break Termination::IterationBudget;
        }
        if evaluations + n + 1 > settings.max_function_evaluations {
            break Termination::EvaluationBudget;
        }
        iterations += 1;

        // Forward differences, stepping inward when a bound is in the way.
        for j in 0..n {
            let mut h = f64::EPSILON.sqrt() * x[j].abs().max(1.0);
            if x[j] + h > upper[j] {
                h = -h;
            }
            x_probe.copy_from_slice(&x);
            x_probe[j] += h;
            residuals(&x_probe, &mut r_probe);
            for i in 0..n_residuals {
                jac[(i, j)] = (r_probe[i] - r[i]) / h;
            }
        }
        evaluations += n;

        let rv = DVector::from_column_slice(&r);
        let grad = jac.tr_mul(&rv);
        let hess = jac.tr_mul(&jac);

        let at_lower = |i: usize| x[i] - lower[i] <= settings.constraint_tolerance;
        let at_upper = |i: usize| upper[i] - x[i] <= settings.constraint_tolerance;
        let projected_gradient = (0..n)
            .map(|i| {
                let g = grad[i];
                if (at_lower(i) && g > 0.0) || (at_upper(i) && g < 0.0) {
                    0.0
                } else {
                    g.abs()
                }
            })
            .fold(0.0, f64::max);
        if projected_gradient <= settings.optimality_tolerance {
            break Termination::Optimality;
        }

        // Inner loop: raise the damping until the bounded model step descends.
        let mut accepted = false;
        let mut small_step = false;
        while evaluations < settings.max_function_evaluations {
            let mut damped = hess.clone();
            for i in 0..n {
                damped[(i, i)] += lambda * hess[(i, i)].max(1e-9);
            }
            let lo: Vec<f64> = (0..n).map(|i| lower[i] - x[i]).collect();
            let hi: Vec<f64> = (0..n).map(|i| upper[i] - x[i]).collect();
            let step = bounded_quadratic_step(&damped, &grad, &lo, &hi);
            x_probe.copy_from_slice(&x);
            for i in 0..n {
                x_probe[i] += step[i];
            }
            project(&mut x_probe);
            let step_norm = x_probe.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            small_step = step_norm <= settings.step_tolerance * (1.0 + x_norm);

            residuals(&x_probe, &mut r_probe);
            evaluations += 1;
            let probe_cost = sum_sq(&r_probe);
            if probe_cost < cost {
                x.copy_from_slice(&x_probe);
                r.copy_from_slice(&r_probe);
                cost = probe_cost;
                lambda = (lambda * 0.1).max(1e-12);
                accepted = true;
                break;
            }
            if small_step {
                break;
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
        if small_step {
            break Termination::StepTolerance;
        }
        if !accepted {
            if evaluations >= settings.max_function_evaluations {
                break Termination::EvaluationBudget;
            }
            break Termination::Stalled;
        }
    };

    Solution { x, cost, iterations, evaluations, termination }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Minimises `0.5 d'Hd + g'd` subject to `lo <= d <= hi` for a small
/// positive definite `H` (primal active-set on the box).
fn bounded_quadratic_step(h: &DMatrix<f64>, g: &DVector<f64>, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let n = g.len();
    // 0 = free, -1 = pinned at lo, +1 = pinned at hi.
    let mut state = vec![0i8; n];
    let mut d = vec![0.0; n];
    for _ in 0..(3 * n + 3) {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 0).collect();
        for i in 0..n {
            d[i] = match state[i] {
                -1 => lo[i],
                1 => hi[i],
                _ => 0.0,
            };
        }
        if !free.is_empty() {
            let k = free.len();
            let mut a = DMatrix::zeros(k, k);
            let mut b = DVector::zeros(k);
            for (p, &i) in free.iter().enumerate() {
                let mut rhs = -g[i];
                for j in 0..n {
                    if state[j] != 0 {
                        rhs -= h[(i, j)] * d[j];
                    }
                }
                b[p] = rhs;
                for (q, &j) in free.iter().enumerate() {
                    a[(p, q)] = h[(i, j)];
                }
            }
            let sol = match a.clone().cholesky() {
                Some(c) => c.solve(&b),
                None => a.lu().solve(&b).unwrap_or_else(|| DVector::zeros(k)),
            };
            for (p, &i) in free.iter().enumerate() {
                d[i] = sol[p];
            }
        }
        let mut changed = false;
        // Pin the free variables that left the box.
        for i in 0..n {
            if state[i] == 0 {
                if d[i] < lo[i] {
                    state[i] = -1;
                    changed = true;
                } else if d[i] > hi[i] {
                    state[i] = 1;
                    changed = true;
                }
            }
        }
        if changed {
            continue;
        }
        // Release pinned variables whose multiplier has the wrong sign.
        let mut release = None;
        let mut worst = 0.0;
        for i in 0..n {
            if state[i] == 0 {
                continue;
            }
            let grad_i = g[i] + (0..n).map(|j| h[(i, j)] * d[j]).sum::<f64>();
            let pulls_inward = (state[i] == -1 && grad_i < 0.0) || (state[i] == 1 && grad_i > 0.0);
            if pulls_inward && grad_i.abs() > worst {
                worst = grad_i.abs();
                release = Some(i);
            }
        }
        match release {
            Some(i) => state[i] = 0,
            None => break,
        }
    }
    for i in 0..n {
        d[i] = d[i].clamp(lo[i], hi[i]);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rosenbrock_unconstrained() {
        let sol = minimize_box(
            |x, r| {
                r[0] = 10.0 * (x[1] - x[0] * x[0]);
                r[1] = 1.0 - x[0];
            },
            &[-1.2, 1.0],
            &[-5.0, -5.0],
            &[5.0, 5.0],
            2,
            &SolverSettings::default(),
        );
        assert!(sol.termination.converged(), "{:?}", sol.termination);
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(sol.x[1], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn active_bound_is_respected() {
        // Unconstrained optimum at (3, -2); box forces x0 <= 1.
        let sol = minimize_box(
            |x, r| {
                r[0] = x[0] - 3.0;
                r[1] = x[1] + 2.0;
                r[2] = 0.5 * (x[0] - x[1]);
            },
            &[0.0, 0.0],
            &[-1.0, -1.0],
            &[1.0, 1.0],
            3,
            &SolverSettings::default(),
        );
        assert!(sol.x[0] <= 1.0 && sol.x[1] >= -1.0);
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.x[1], -1.0, epsilon = 1e-6);
    }

    #[test]
    fn evaluation_budget_is_honoured() {
        let settings = SolverSettings { max_function_evaluations: 20, ..SolverSettings::default() };
        let mut calls = 0;
        let sol = minimize_box(
            |x, r| {
                calls += 1;
                r[0] = 10.0 * (x[1] - x[0] * x[0]);
                r[1] = 1.0 - x[0];
            },
            &[-1.2, 1.0],
            &[-5.0, -5.0],
            &[5.0, 5.0],
            2,
            &settings,
        );
        assert!(calls <= 20);
        assert_eq!(sol.evaluations, calls);
    }

    #[test]
    fn start_at_optimum_stops_immediately() {
        let sol = minimize_box(|x, r| r[0] = x[0] - 0.5, &[0.5], &[0.0], &[1.0], 1, &SolverSettings::default());
        assert_eq!(sol.x, vec![0.5]);
        assert_eq!(sol.termination, Termination::Optimality);
    }

    #[test]
    fn quadratic_step_matches_clamped_solution_for_diagonal() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 4.0]));
        let g = DVector::from_vec(vec![-10.0, 1.0, 2.0]);
        let d = bounded_quadratic_step(&h, &g, &[-1.0, -1.0, -1.0], &[1.0, 1.0, 1.0]);
        assert_abs_diff_eq!(d[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[1], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[2], -0.5, epsilon = 1e-12);
    }
}
