//! Derivative-free Nelder–Mead simplex minimization.

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    /// Edge length of the initial simplex.
    pub step: f64,
    pub max_evaluations: usize,
    /// Converged when the spread of simplex values is below
    /// `f_tol · (|f_best| + f_tol)` and every vertex is within `x_tol` of the best.
    pub f_tol: f64,
    pub x_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            step: 0.1,
            max_evaluations: 4000,
            f_tol: 1e-12,
            x_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl NelderMead {
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let dim = x0.len();
        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        if dim == 0 {
            let value = eval(x0, &mut evals);
            return Minimum {
                x: Vec::new(),
                value,
                evaluations: evals,
                converged: true,
            };
        }
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
        simplex.push(x0.to_vec());
        for i in 0..dim {
            let mut v = x0.to_vec();
            v[i] += self.step;
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();
        let mut converged = false;

        while evals < self.max_evaluations {
            let mut order: Vec<usize> = (0..=dim).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let best = values[0];
            let worst = values[dim];
            let spread = (worst - best).abs();
            let size = simplex[1..]
                .iter()
                .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if best.is_finite()
                && spread <= self.f_tol * (best.abs() + self.f_tol)
                && size <= self.x_tol
            {
                converged = true;
                break;
            }
            if best.is_finite() && spread == 0.0 && size <= self.x_tol.sqrt() {
                converged = true;
                break;
            }

            let centroid: Vec<f64> = (0..dim)
                .map(|j| simplex[..dim].iter().map(|v| v[j]).sum::<f64>() / dim as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[dim])
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };
            let reflected = along(-1.0);
            let fr = eval(&reflected, &mut evals);
            if fr < values[0] {
                let expanded = along(-2.0);
                let fe = eval(&expanded, &mut evals);
                if fe < fr {
                    simplex[dim] = expanded;
                    values[dim] = fe;
                } else {
                    simplex[dim] = reflected;
                    values[dim] = fr;
                }
            } else if fr < values[dim - 1] {
                simplex[dim] = reflected;
                values[dim] = fr;
            } else {
                let (contracted, fc) = if fr < values[dim] {
                    let c = along(-0.5);
                    let v = eval(&c, &mut evals);
                    (c, v)
                } else {
                    let c = along(0.5);
                    let v = eval(&c, &mut evals);
                    (c, v)
                };
                if fc < values[dim].min(fr) {
                    simplex[dim] = contracted;
                    values[dim] = fc;
                } else {
                    let best = simplex[0].clone();
                    for i in 1..=dim {
                        for j in 0..dim {
                            simplex[i][j] = best[j] + 0.5 * (simplex[i][j] - best[j]);
                        }
                        values[i] = eval(&simplex[i], &mut evals);
                    }
                }
            }
        }
        let (bi, _) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("simplex is nonempty");
        Minimum {
            x: simplex[bi].clone(),
            value: values[bi],
            evaluations: evals,
            converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_rosenbrock_minimum() {
        let nm = NelderMead {
            max_evaluations: 20_000,
            ..NelderMead::default()
        };
        let m = nm.minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
        );
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| (x[0] - 3.0).abs() + x[1].powi(2);
        let start = [0.5, 0.5];
        let m = NelderMead::default().minimize(f, &start);
        assert!(m.value <= f(&start));
    }
}
