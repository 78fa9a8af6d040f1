//! Box-constrained Nelder–Mead simplex minimisation.
//!
//! Trial points are projected onto the box before evaluation, so the simplex
//! can collapse against a bound when the optimum lies on it.

#[derive(Debug, Clone)]
pub struct NelderMead {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
    /// Relative spread of objective values across the simplex.
    pub f_tol: f64,
    /// Largest coordinate distance of any vertex from the best one.
    pub x_tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl NelderMead {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        NelderMead {
            lower,
            upper,
            initial_step: 0.5,
            f_tol: 1e-10,
            x_tol: 1e-8,
            max_iter: 5_000,
        }
    }

    fn project(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let dim = x0.len();
        assert_eq!(dim, self.lower.len());
        let mut evaluations = 0usize;
        let mut eval = |x: &[f64], evaluations: &mut usize| {
            *evaluations += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut start = x0.to_vec();
        self.project(&mut start);
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
        simplex.push(start.clone());
        for i in 0..dim {
            let mut v = start.clone();
            // step away from the bound we are sitting on
            v[i] += if v[i] + self.initial_step <= self.upper[i] {
                self.initial_step
            } else {
                -self.initial_step
            };
            self.project(&mut v);
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evaluations)).collect();

        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            let mut order: Vec<usize> = (0..=dim).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let (best, worst) = (values[0], values[dim]);
            let f_spread = (worst - best).abs() <= self.f_tol * best.abs().max(1e-300)
                || (best.is_infinite() && worst == best);
            let x_spread = simplex[1..]
                .iter()
                .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if f_spread && x_spread <= self.x_tol {
                converged = true;
                break;
            }
            iterations += 1;

            let centroid: Vec<f64> = (0..dim)
                .map(|j| simplex[..dim].iter().map(|v| v[j]).sum::<f64>() / dim as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                let mut p: Vec<f64> = centroid
                    .iter()
                    .zip(&simplex[dim])
                    .map(|(c, w)| c + t * (c - w))
                    .collect();
                self.project(&mut p);
                p
            };

            let reflected = along(1.0);
            let fr = eval(&reflected, &mut evaluations);
            if fr < values[0] {
                let expanded = along(2.0);
                let fe = eval(&expanded, &mut evaluations);
                if fe < fr {
                    simplex[dim] = expanded;
                    values[dim] = fe;
                } else {
                    simplex[dim] = reflected;
                    values[dim] = fr;
                }
                continue;
            }
            if fr < values[dim - 1] {
                simplex[dim] = reflected;
                values[dim] = fr;
                continue;
            }
            let (contracted, fc) = if fr < values[dim] {
                let p = along(0.5);
                let v = eval(&p, &mut evaluations);
                (p, v)
            } else {
                let p = along(-0.5);
                let v = eval(&p, &mut evaluations);
                (p, v)
            };
            if fc < values[dim].min(fr) {
                simplex[dim] = contracted;
                values[dim] = fc;
                continue;
            }
            // shrink towards the best vertex
            for i in 1..=dim {
                let shrunk: Vec<f64> = simplex[i]
                    .iter()
                    .zip(&simplex[0])
                    .map(|(v, b)| b + 0.5 * (v - b))
                    .collect();
                values[i] = eval(&shrunk, &mut evaluations);
                simplex[i] = shrunk;
            }
        }

        let best = (0..=dim)
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
            .unwrap();
        Minimum {
            x: simplex[best].clone(),
            f: values[best],
            iterations,
            evaluations,
            converged,
        }
    }
}
