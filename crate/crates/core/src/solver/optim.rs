//! Bounded robust Gauss-Newton for the two-parameter reprojection problem,
//! plus a central-difference Jacobian used for gradient checks.

use crate::geometry::Real;

use super::LossKind;

/// Central-difference Jacobian: column j is
/// `(f(x + h e_j) - f(x - h e_j)) / (2h)`. Returned as rows of length
/// `x.len()`.
pub fn numeric_jacobian<F>(f: F, x: &[Real], h: Real) -> Vec<Vec<Real>>
where
    F: Fn(&[Real]) -> Vec<Real>,
{
    assert!(h > 0.0, "step size must be positive");
    let n = x.len();
    let f0 = f(x);
    let mut jac = vec![vec![0.0; n]; f0.len()];
    let mut probe = x.to_vec();
    for j in 0..n {
        probe[j] = x[j] + h;
        let fp = f(&probe);
        probe[j] = x[j] - h;
        let fm = f(&probe);
        probe[j] = x[j];
        for (row, (p, m)) in jac.iter_mut().zip(fp.iter().zip(fm.iter())) {
            row[j] = (p - m) / (2.0 * h);
        }
    }
    jac
}

/// Robust cost of a residual vector under the configured loss.
pub(super) fn robust_cost(rows: &[Real], loss: LossKind) -> Real {
    match loss {
        LossKind::Cauchy { scale } => super::cauchy_cost(rows, scale),
        LossKind::Square => rows.iter().map(|r| r * r).sum::<Real>() / 2.0,
    }
}

/// IRLS weight of a single residual component.
fn weight(r: Real, loss: LossKind) -> Real {
    match loss {
        LossKind::Cauchy { scale } => 1.0 / (1.0 + (r / scale) * (r / scale)),
        LossKind::Square => 1.0,
    }
}

#[derive(Debug, Clone, Copy)]
pub(super) struct Box2 {
    pub lo: [Real; 2],
    pub hi: [Real; 2],
}

impl Box2 {
    fn clamp(&self, x: [Real; 2]) -> [Real; 2] {
        [
            x[0].clamp(self.lo[0], self.hi[0]),
            x[1].clamp(self.lo[1], self.hi[1]),
        ]
    }
}

#[derive(Debug, Clone, Copy)]
pub(super) struct Outcome {
    pub x: [Real; 2],
    pub cost: Real,
    pub converged: bool,
}

/// Minimizes the robust reprojection cost from one start, with
/// Levenberg-damped Gauss-Newton steps clipped to the bounds box.
///
/// `eval` returns the residual rows and their 2-column Jacobian, or `None`
/// when the point is infeasible (a keypoint fell behind the camera); such
/// points carry infinite cost.
pub(super) fn minimize<F>(
    mut eval: F,
    start: [Real; 2],
    bounds: Box2,
    loss: LossKind,
    max_iterations: usize,
    function_tolerance: Real,
) -> Outcome
where
    F: FnMut(Real, Real) -> Option<(Vec<Real>, Vec<[Real; 2]>)>,
{
    let mut x = bounds.clamp(start);
    let Some((mut rows, mut jac)) = eval(x[0], x[1]) else {
        return Outcome {
            x,
            cost: Real::INFINITY,
            converged: false,
        };
    };
    let mut cost = robust_cost(&rows, loss);
    let mut damping = 1e-4;
    let mut converged = false;

    for _ in 0..max_iterations {
        // Weighted normal equations H d = -g.
        let (mut h11, mut h12, mut h22) = (0.0, 0.0, 0.0);
        let (mut g1, mut g2) = (0.0, 0.0);
        for (r, j) in rows.iter().zip(jac.iter()) {
            let w = weight(*r, loss);
            h11 += w * j[0] * j[0];
            h12 += w * j[0] * j[1];
            h22 += w * j[1] * j[1];
            g1 += w * r * j[0];
            g2 += w * r * j[1];
        }
        if (g1 * g1 + g2 * g2).sqrt() < 1e-14 {
            converged = true;
            break;
        }

        let mut accepted = false;
        for _ in 0..20 {
            let a11 = h11 + damping * h11.max(1e-12);
            let a22 = h22 + damping * h22.max(1e-12);
            let det = a11 * a22 - h12 * h12;
            if det.abs() < 1e-300 {
                damping *= 10.0;
                continue;
            }
            let dx = [
                (-g1 * a22 + g2 * h12) / det,
                (-g2 * a11 + g1 * h12) / det,
            ];
            let x_new = bounds.clamp([x[0] + dx[0], x[1] + dx[1]]);
            let step = ((x_new[0] - x[0]).powi(2) + (x_new[1] - x[1]).powi(2)).sqrt();
            if step < 1e-15 {
                damping *= 10.0;
                if damping > 1e10 {
                    break;
                }
                continue;
            }
            let cost_new = match eval(x_new[0], x_new[1]) {
                Some((rows_new, jac_new)) => {
                    let c = robust_cost(&rows_new, loss);
                    if c < cost {
                        rows = rows_new;
                        jac = jac_new;
                    }
                    c
                }
                None => Real::INFINITY,
            };
            if cost_new < cost {
                let decrease = cost - cost_new;
                x = x_new;
                cost = cost_new;
                damping = (damping / 3.0).max(1e-12);
                accepted = true;
                if decrease <= function_tolerance * cost.max(1e-16) {
                    converged = true;
                }
                break;
            }
            damping *= 10.0;
            if damping > 1e10 {
                break;
            }
        }
        if !accepted {
            // No descent step available: treat as a (possibly boundary)
            // stationary point.
            converged = converged || damping > 1e10;
            break;
        }
        if converged {
            break;
        }
    }
    Outcome { x, cost, converged }
}
