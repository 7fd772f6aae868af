use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Reference solution of the C-SVC dual.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub alpha: Vec<f64>,
    /// ½ αᵀQα − eᵀα
    pub objective: f64,
    /// Offset b of f(x) = Σ α_i y_i K(x, x_i) + b.
    pub bias: f64,
    pub iterations: usize,
    /// Norm of the projected-gradient step at exit, scaled by the step size.
    pub residual: f64,
}

const MAX_M: usize = 50;
const TOL: f64 = 1e-10;
const MAX_ITERS: usize = 2_000_000;
const POLISH_EVERY: usize = 500;

struct Problem {
    m: usize,
    q: Vec<f64>,
    y: Vec<f64>,
    c: f64,
}

impl Problem {
    fn grad(&self, a: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|i| {
                (0..self.m)
                    .map(|j| self.q[i * self.m + j] * a[j])
                    .sum::<f64>()
                    - 1.0
            })
            .collect()
    }

    fn objective(&self, a: &[f64]) -> f64 {
        let g = self.grad(a);
        // ½αᵀQα − eᵀα = ½ αᵀ(Qα − e) − ½ eᵀα
        0.5 * a.iter().zip(&g).map(|(x, g)| x * g).sum::<f64>() - 0.5 * a.iter().sum::<f64>()
    }

    /// Euclidean projection onto {0 ≤ α ≤ C, yᵀα = 0} by bisection on the
    /// multiplier of the equality constraint.
    fn project(&self, v: &[f64]) -> Vec<f64> {
        let at = |lam: f64| -> Vec<f64> {
            v.iter()
                .zip(&self.y)
                .map(|(&vi, &yi)| (vi - lam * yi).clamp(0.0, self.c))
                .collect()
        };
        let g = |lam: f64| -> f64 { at(lam).iter().zip(&self.y).map(|(a, y)| a * y).sum() };
        let span = v.iter().fold(0.0f64, |s, x| s.max(x.abs())) + self.c + 1.0;
        let (mut lo, mut hi) = (-span, span);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut a = at(0.5 * (lo + hi));
        // clear the bisection's residual imbalance on a free coordinate
        let r: f64 = a.iter().zip(&self.y).map(|(a, y)| a * y).sum();
        if let Some(i) =
            (0..self.m).find(|&i| a[i] - self.y[i] * r > 0.0 && a[i] - self.y[i] * r < self.c)
        {
            a[i] -= self.y[i] * r;
        }
        a
    }

    fn step_residual(&self, a: &[f64], step: f64) -> f64 {
        let g = self.grad(a);
        let t: Vec<f64> = a.iter().zip(&g).map(|(x, g)| x - step * g).collect();
        let p = self.project(&t);
        a.iter()
            .zip(&p)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
            / step
    }

    /// Solves the KKT system with the bounded coordinates of `a` fixed.
    fn polish(&self, a: &[f64]) -> Option<Vec<f64>> {
        let eps = 1e-9 * self.c;
        let free: Vec<usize> = (0..self.m)
            .filter(|&i| a[i] > eps && a[i] < self.c - eps)
            .collect();
        let fixed: Vec<(usize, f64)> = (0..self.m)
            .filter(|i| !free.contains(i))
            .map(|i| (i, if a[i] >= self.c - eps { self.c } else { 0.0 }))
            .collect();
        let n = free.len();
        let mut out = vec![0.0; self.m];
        for &(i, v) in &fixed {
            out[i] = v;
        }
        if n == 0 {
            return Some(out);
        }
        // [Q_FF  y_F] [α_F]   [e_F − Q_FB α_B]
        // [y_Fᵀ  0  ] [ν  ] = [   −y_Bᵀ α_B  ]
        let mut lhs = DMatrix::zeros(n + 1, n + 1);
        let mut rhs = DVector::zeros(n + 1);
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate() {
                lhs[(r, s)] = self.q[i * self.m + j];
            }
            lhs[(r, n)] = self.y[i];
            lhs[(n, r)] = self.y[i];
            rhs[r] = 1.0
                - fixed
                    .iter()
                    .map(|&(j, v)| self.q[i * self.m + j] * v)
                    .sum::<f64>();
        }
        rhs[n] = -fixed.iter().map(|&(j, v)| self.y[j] * v).sum::<f64>();
        let sol = lhs.lu().solve(&rhs)?;
        for (r, &i) in free.iter().enumerate() {
            if !(sol[r] >= 0.0 && sol[r] <= self.c) {
                return None;
            }
            out[i] = sol[r];
        }
        Some(out)
    }

    fn bias(&self, a: &[f64]) -> f64 {
        let g = self.grad(a);
        let (mut sum, mut free) = (0.0, 0usize);
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..self.m {
            let yg = self.y[i] * g[i];
            let at_upper = a[i] >= self.c * (1.0 - 1e-12);
            let at_lower = a[i] <= self.c * 1e-12;
            if !at_upper && !at_lower {
                sum += yg;
                free += 1;
            } else if (at_upper && self.y[i] < 0.0) || (at_lower && self.y[i] > 0.0) {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        }
        let rho = if free > 0 {
            sum / free as f64
        } else {
            0.5 * (ub + lb)
        };
        -rho
    }
}

fn largest_eigenvalue(q: &[f64], m: usize) -> f64 {
    let mut v = vec![1.0 / (m as f64).sqrt(); m];
    let mut lam = 0.0;
    for _ in 0..1000 {
        let w: Vec<f64> = (0..m)
            .map(|i| (0..m).map(|j| q[i * m + j] * v[j]).sum())
            .collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        v = w.into_iter().map(|x| x / norm).collect();
        if (next - lam).abs() <= 1e-12 * next.abs() {
            return next.max(norm);
        }
        lam = next;
    }
    lam
}

/// Accelerated projected gradient (FISTA with function-value restart) on
/// the SVM dual, polished by solving the KKT system on the current active
/// set. Stops when the projected-gradient residual is at most `1e-10`.
pub fn qp_oracle(k: &[f64], y: &[f64], c: f64) -> Result<QpSolution> {
    let m = y.len();
    if m == 0 || m > MAX_M {
        return Err(Error::usage(format!(
            "qp oracle handles 1..={MAX_M} points, got {m}"
        )));
    }
    if k.len() != m * m {
        return Err(Error::usage(format!(
            "kernel has {} entries for {m} points",
            k.len()
        )));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::usage("labels must be ±1"));
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(Error::usage("both classes must be present"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::usage(format!("C must be positive, got {c}")));
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("kernel contains non-finite values"));
    }
    let q: Vec<f64> = (0..m * m).map(|t| y[t / m] * y[t % m] * k[t]).collect();
    let p = Problem {
        m,
        q,
        y: y.to_vec(),
        c,
    };
    let lip = largest_eigenvalue(&p.q, m) * 1.01 + f64::MIN_POSITIVE;
    let step = 1.0 / lip;

    let mut x = p.project(&vec![0.0; m]);
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut fx = p.objective(&x);
    let mut iterations = 0;
    let mut residual = p.step_residual(&x, step);
    while residual > TOL && iterations < MAX_ITERS {
        iterations += 1;
        let g = p.grad(&z);
        let trial: Vec<f64> = z.iter().zip(&g).map(|(a, g)| a - step * g).collect();
        let next = p.project(&trial);
        let fnext = p.objective(&next);
        if fnext > fx && t > 1.0 {
            // restart momentum
            z = x.clone();
            t = 1.0;
            continue;
        }
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = next
            .iter()
            .zip(&x)
            .map(|(n, o)| n + (t - 1.0) / tn * (n - o))
            .collect();
        x = next;
        fx = fnext;
        t = tn;
        if iterations % POLISH_EVERY == 0 {
            if let Some(pol) = p.polish(&x) {
                let fp = p.objective(&pol);
                if fp <= fx + 1e-15 * fx.abs() {
                    let r = p.step_residual(&pol, step);
                    if r <= TOL {
                        x = pol;
                        fx = fp;
                        residual = r;
                        break;
                    }
                }
            }
        }
        residual = p.step_residual(&x, step);
    }
    if residual > TOL {
        return Err(Error::data(format!(
            "qp oracle did not reach residual {TOL:e} (got {residual:e})"
        )));
    }
    Ok(QpSolution {
        bias: p.bias(&x),
        objective: fx,
        alpha: x,
        iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_hand_solution() {
        let s = qp_oracle(&[1.0, -1.0, -1.0, 1.0], &[1.0, -1.0], 10.0).unwrap();
        assert!(
            (s.alpha[0] - 0.5).abs() < 1e-10 && (s.alpha[1] - 0.5).abs() < 1e-10,
            "{s:?}"
        );
        assert!((s.objective + 0.5).abs() < 1e-10);
        assert!(s.bias.abs() < 1e-10);
    }

    #[test]
    fn small_c_objective_vanishes() {
        let k = [2.0, 0.5, 0.1, 0.5, 1.0, 0.3, 0.1, 0.3, 1.5];
        let y = [1.0, -1.0, 1.0];
        let mut prev = 0.0f64;
        for c in [1e-2, 1e-4, 1e-6] {
            let s = qp_oracle(&k, &y, c).unwrap();
            assert!(s.objective <= 0.0 && s.objective.abs() <= 2.0 * c * 3.0);
            assert!(s.objective.abs() < prev.abs() || prev == 0.0);
            prev = s.objective;
        }
    }

    #[test]
    fn projection_is_feasible() {
        let p = Problem {
            m: 4,
            q: vec![0.0; 16],
            y: vec![1.0, 1.0, -1.0, -1.0],
            c: 1.0,
        };
        let a = p.project(&[3.0, -2.0, 0.4, 0.9]);
        assert!(a.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(a.iter().zip(&p.y).map(|(a, y)| a * y).sum::<f64>().abs() < 1e-12);
    }
}
