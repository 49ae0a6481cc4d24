//! Dense primal active-set solver for small convex quadratic programs
//!
//! minimize `0.5 x'Hx + g'x` subject to `C x >= d`,
//!
//! started from a feasible point. Sizes here are tiny (spline coefficient
//! vectors), so every subproblem is solved through a dense KKT system.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub struct QuadraticProgram<'a> {
    pub hessian: &'a DMatrix<f64>,
    pub gradient: &'a DVector<f64>,
    pub constraints: &'a DMatrix<f64>,
    pub bounds: &'a DVector<f64>,
}

const FEAS_TOL: f64 = 1e-10;

impl QuadraticProgram<'_> {
    pub fn solve(&self, start: &DVector<f64>) -> Result<DVector<f64>> {
        let n = start.len();
        let m = self.constraints.nrows();
        let slack0 = self.constraints * start - self.bounds;
        if slack0.iter().any(|s| *s < -FEAS_TOL) {
            return Err(Error::numerical("active-set start point is infeasible"));
        }
        let ridge = 1e-12 * (self.hessian.trace() / n as f64).abs().max(1e-300);
        let h = self.hessian + DMatrix::identity(n, n) * ridge;

        let mut x = start.clone();
        let mut working: Vec<usize> = Vec::new();
        let max_iter = 50 * (n + m) + 100;
        for _ in 0..max_iter {
            let grad = &h * &x + self.gradient;
            let (step, multipliers) = self.kkt_step(&h, &grad, &working)?;
            let scale = 1.0 + x.amax();
            if step.amax() <= 1e-12 * scale {
                let worst = multipliers
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, v)| (i, *v));
                match worst {
                    Some((i, lambda)) if lambda < -1e-12 => {
                        working.remove(i);
                    }
                    _ => return Ok(x),
                }
            } else {
                let mut alpha = 1.0;
                let mut blocking = None;
                for i in 0..m {
                    if working.contains(&i) {
                        continue;
                    }
                    let row = self.constraints.row(i);
                    let cp = row.dot(&step.transpose());
                    if cp < -1e-14 {
                        let slack = (row.dot(&x.transpose()) - self.bounds[i]).max(0.0);
                        let a = slack / -cp;
                        if a < alpha {
                            alpha = a;
                            blocking = Some(i);
                        }
                    }
                }
                x += step * alpha;
                if let Some(i) = blocking {
                    working.push(i);
                }
            }
        }
        Err(Error::NonConvergence {
            what: "active-set quadratic program".into(),
            iterations: max_iter,
            gap: f64::NAN,
        })
    }

    fn kkt_step(
        &self,
        h: &DMatrix<f64>,
        grad: &DVector<f64>,
        working: &[usize],
    ) -> Result<(DVector<f64>, Vec<f64>)> {
        let n = h.nrows();
        let k = working.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(h);
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-grad));
        for (r, &i) in working.iter().enumerate() {
            for j in 0..n {
                let v = self.constraints[(i, j)];
                kkt[(n + r, j)] = v;
                kkt[(j, n + r)] = -v;
            }
        }
        let sol = kkt
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::numerical("singular KKT system in active-set solver"))?;
        let step = sol.rows(0, n).into_owned();
        let multipliers = sol.rows(n, k).iter().copied().collect();
        Ok((step, multipliers))
    }
}
