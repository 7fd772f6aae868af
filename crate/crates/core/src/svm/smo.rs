//! SMO for the C-SVC dual over a precomputed kernel matrix.
//!
//! Solves
//!
//! ```text
//! min_α  ½ αᵀQα − eᵀα    s.t.  yᵀα = 0,  0 ≤ α_i ≤ C,    Q_ij = y_i y_j K_ij
//! ```
//!
//! with maximal-violating-pair selection for the first index and
//! second-order gain for the second, as in LIBSVM. Non-positive curvature
//! (indefinite log-kernels) is floored at [`TAU`]. Ties in selection go to
//! the lowest index.

use log::warn;

use crate::error::{Error, Result};

/// Curvature floor for pairs with K_ii + K_jj − 2K_ij ≤ 0.
pub const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Soft-margin weight.
    pub c: f64,
    /// KKT violation threshold m(α) − M(α) < tolerance.
    pub tolerance: f64,
    /// Iteration cap, in multiples of the number of training points.
    pub max_passes: usize,
    pub shrinking: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 1.0,
            tolerance: 1e-3,
            max_passes: 100_000,
            shrinking: true,
        }
    }
}

impl TrainConfig {
    pub fn with_c(c: f64) -> Self {
        TrainConfig {
            c,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::usage(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::usage(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_passes == 0 {
            return Err(Error::usage("max_passes must be positive"));
        }
        Ok(())
    }
}

/// Raw dual solution.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Decision offset: f(x) = Σ α_i y_i K(x, x_i) − rho.
    pub rho: f64,
    /// ½ αᵀQα − eᵀα at the returned α.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Bound {
    Lower,
    Upper,
    Free,
}

struct Solver<'a> {
    k: &'a [f64],
    m: usize,
    y: &'a [f64],
    c: f64,
    eps: f64,
    alpha: Vec<f64>,
    grad: Vec<f64>,
    status: Vec<Bound>,
    active: Vec<usize>,
    unshrunk: bool,
}

impl<'a> Solver<'a> {
    #[inline]
    fn q(&self, i: usize, j: usize) -> f64 {
        self.y[i] * self.y[j] * self.k[i * self.m + j]
    }

    #[inline]
    fn qd(&self, i: usize) -> f64 {
        self.k[i * self.m + i]
    }

    fn bound_of(&self, a: f64) -> Bound {
        if a >= self.c {
            Bound::Upper
        } else if a <= 0.0 {
            Bound::Lower
        } else {
            Bound::Free
        }
    }

    fn is_upper(&self, i: usize) -> bool {
        self.status[i] == Bound::Upper
    }

    fn is_lower(&self, i: usize) -> bool {
        self.status[i] == Bound::Lower
    }

    /// Returns the working pair, or `None` when the active set is optimal.
    fn select_working_set(&self) -> Option<(usize, usize)> {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmax2 = f64::NEG_INFINITY;
        let mut i_sel: Option<usize> = None;
        for &t in &self.active {
            if self.y[t] > 0.0 {
                if !self.is_upper(t) && -self.grad[t] > gmax {
                    gmax = -self.grad[t];
                    i_sel = Some(t);
                }
            } else if !self.is_lower(t) && self.grad[t] > gmax {
                gmax = self.grad[t];
                i_sel = Some(t);
            }
        }
        let i = i_sel?;
        let mut j_sel: Option<usize> = None;
        let mut obj_min = f64::INFINITY;
        for &t in &self.active {
            let (grad_diff, eligible) = if self.y[t] > 0.0 {
                if self.is_lower(t) {
                    (0.0, false)
                } else {
                    gmax2 = gmax2.max(self.grad[t]);
                    (gmax + self.grad[t], true)
                }
            } else if self.is_upper(t) {
                (0.0, false)
            } else {
                gmax2 = gmax2.max(-self.grad[t]);
                (gmax - self.grad[t], true)
            };
            if eligible && grad_diff > 0.0 {
                // K_ii + K_tt − 2 K_it for either sign combination
                let quad = self.qd(i) + self.qd(t) - 2.0 * self.k[i * self.m + t];
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj = -(grad_diff * grad_diff) / quad;
                if obj < obj_min {
                    obj_min = obj;
                    j_sel = Some(t);
                }
            }
        }
        if gmax + gmax2 < self.eps {
            return None;
        }
        j_sel.map(|j| (i, j))
    }

    fn update_pair(&mut self, i: usize, j: usize) {
        let c = self.c;
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let qij = self.q(i, j);
        if self.y[i] != self.y[j] {
            let quad = self.qd(i) + self.qd(j) + 2.0 * qij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = old_i - old_j;
            let (mut ai, mut aj) = (old_i + delta, old_j + delta);
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
            self.alpha[i] = ai;
            self.alpha[j] = aj;
        } else {
            let quad = self.qd(i) + self.qd(j) - 2.0 * qij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = old_i + old_j;
            let (mut ai, mut aj) = (old_i - delta, old_j + delta);
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
            self.alpha[i] = ai;
            self.alpha[j] = aj;
        }
        let (di, dj) = (self.alpha[i] - old_i, self.alpha[j] - old_j);
        for idx in 0..self.active.len() {
            let t = self.active[idx];
            self.grad[t] += self.q(i, t) * di + self.q(j, t) * dj;
        }
        self.status[i] = self.bound_of(self.alpha[i]);
        self.status[j] = self.bound_of(self.alpha[j]);
    }

    fn violation_bounds(&self) -> (f64, f64) {
        let (mut g1, mut g2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &t in &self.active {
            if self.y[t] > 0.0 {
                if !self.is_upper(t) {
                    g1 = g1.max(-self.grad[t]);
                }
                if !self.is_lower(t) {
                    g2 = g2.max(self.grad[t]);
                }
            } else {
                if !self.is_upper(t) {
                    g2 = g2.max(-self.grad[t]);
                }
                if !self.is_lower(t) {
                    g1 = g1.max(self.grad[t]);
                }
            }
        }
        (g1, g2)
    }

    fn be_shrunk(&self, t: usize, g1: f64, g2: f64) -> bool {
        match self.status[t] {
            Bound::Upper => {
                if self.y[t] > 0.0 {
                    -self.grad[t] > g1
                } else {
                    -self.grad[t] > g2
                }
            }
            Bound::Lower => {
                if self.y[t] > 0.0 {
                    self.grad[t] > g2
                } else {
                    self.grad[t] > g1
                }
            }
            Bound::Free => false,
        }
    }

    fn do_shrinking(&mut self) {
        let (g1, g2) = self.violation_bounds();
        if !self.unshrunk && g1 + g2 <= self.eps * 10.0 {
            self.unshrunk = true;
            self.reconstruct_gradient();
        }
        let keep: Vec<usize> = self
            .active
            .iter()
            .copied()
            .filter(|&t| !self.be_shrunk(t, g1, g2))
            .collect();
        self.active = keep;
    }

    /// Recomputes the gradient of inactive points and reactivates all.
    fn reconstruct_gradient(&mut self) {
        if self.active.len() == self.m {
            return;
        }
        let mut is_active = vec![false; self.m];
        for &t in &self.active {
            is_active[t] = true;
        }
        let support: Vec<usize> = (0..self.m).filter(|&j| self.alpha[j] > 0.0).collect();
        for t in (0..self.m).filter(|&t| !is_active[t]) {
            self.grad[t] = -1.0
                + support
                    .iter()
                    .map(|&j| self.q(t, j) * self.alpha[j])
                    .sum::<f64>();
        }
        self.active = (0..self.m).collect();
    }

    fn rho(&self) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum_free, mut n_free) = (0.0, 0usize);
        for t in 0..self.m {
            let yg = self.y[t] * self.grad[t];
            match self.status[t] {
                Bound::Upper => {
                    if self.y[t] < 0.0 {
                        ub = ub.min(yg)
                    } else {
                        lb = lb.max(yg)
                    }
                }
                Bound::Lower => {
                    if self.y[t] > 0.0 {
                        ub = ub.min(yg)
                    } else {
                        lb = lb.max(yg)
                    }
                }
                Bound::Free => {
                    n_free += 1;
                    sum_free += yg;
                }
            }
        }
        if n_free > 0 {
            sum_free / n_free as f64
        } else {
            (ub + lb) / 2.0
        }
    }
}

/// Solves the dual for a row-major `m × m` kernel matrix `k` and labels
/// `y ∈ {−1, +1}`.
pub fn solve_dual(k: &[f64], y: &[f64], cfg: &TrainConfig) -> Result<DualSolution> {
    cfg.validate()?;
    let m = y.len();
    if k.len() != m * m {
        return Err(Error::usage(format!(
            "kernel matrix has {} entries, expected {m}x{m}",
            k.len()
        )));
    }
    if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::usage(format!("labels must be ±1, got {bad}")));
    }
    if !(y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0)) {
        return Err(Error::usage("training labels contain a single class"));
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("kernel matrix contains non-finite values"));
    }

    let mut s = Solver {
        k,
        m,
        y,
        c: cfg.c,
        eps: cfg.tolerance,
        alpha: vec![0.0; m],
        grad: vec![-1.0; m],
        status: vec![Bound::Lower; m],
        active: (0..m).collect(),
        unshrunk: false,
    };

    let max_iter = cfg.max_passes.saturating_mul(m.max(1));
    let mut iter = 0usize;
    let mut counter = m.min(1000) + 1;
    let mut converged = false;
    while iter < max_iter {
        counter -= 1;
        if counter == 0 {
            counter = m.min(1000);
            if cfg.shrinking {
                s.do_shrinking();
            }
        }
        let pair = match s.select_working_set() {
            Some(p) => Some(p),
            None => {
                s.reconstruct_gradient();
                let p = s.select_working_set();
                if p.is_some() {
                    counter = 1;
                }
                p
            }
        };
        let Some((i, j)) = pair else {
            converged = true;
            break;
        };
        iter += 1;
        s.update_pair(i, j);
    }
    s.reconstruct_gradient();
    if !converged {
        warn!(
            "SMO stopped after {iter} iterations without reaching tolerance {}",
            cfg.tolerance
        );
    }
    let rho = s.rho();
    let objective = s
        .alpha
        .iter()
        .zip(&s.grad)
        .map(|(a, g)| a * (g - 1.0))
        .sum::<f64>()
        / 2.0;
    Ok(DualSolution {
        alpha: s.alpha,
        rho,
        objective,
        iterations: iter,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_problem() {
        let k = [1.0, -1.0, -1.0, 1.0];
        let y = [1.0, -1.0];
        let sol = solve_dual(&k, &y, &TrainConfig::with_c(10.0)).unwrap();
        assert!((sol.alpha[0] - 0.5).abs() < 1e-12);
        assert!((sol.alpha[1] - 0.5).abs() < 1e-12);
        assert!(sol.rho.abs() < 1e-12);
        assert!((sol.objective - -0.5).abs() < 1e-12);
        assert!(sol.converged);
    }

    #[test]
    fn box_constraint_binds_for_small_c() {
        let k = [1.0, -1.0, -1.0, 1.0];
        let sol = solve_dual(&k, &[1.0, -1.0], &TrainConfig::with_c(0.1)).unwrap();
        assert_eq!(sol.alpha, vec![0.1, 0.1]);
    }

    #[test]
    fn rejects_bad_input() {
        let k = [1.0, 0.0, 0.0, 1.0];
        assert!(matches!(
            solve_dual(&k, &[1.0, 1.0], &TrainConfig::default()),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            solve_dual(&k, &[1.0, 0.0], &TrainConfig::default()),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            solve_dual(
                &[1.0, f64::NAN, f64::NAN, 1.0],
                &[1.0, -1.0],
                &TrainConfig::default()
            ),
            Err(Error::Data(_))
        ));
        assert!(solve_dual(&k, &[1.0, -1.0], &TrainConfig::with_c(0.0)).is_err());
    }

    #[test]
    fn indefinite_kernel_terminates() {
        // log-kernel style matrix with negative entries and a negative eigenvalue
        let k = [0.0, 2.0, -1.0, 2.0, 0.0, 1.0, -1.0, 1.0, 0.5];
        let sol = solve_dual(&k, &[1.0, -1.0, 1.0], &TrainConfig::with_c(1.0)).unwrap();
        assert!(sol.alpha.iter().all(|&a| (0.0..=1.0).contains(&a)));
        let eq: f64 = sol
            .alpha
            .iter()
            .zip([1.0, -1.0, 1.0])
            .map(|(a, y)| a * y)
            .sum();
        assert!(eq.abs() < 1e-12);
    }
}
