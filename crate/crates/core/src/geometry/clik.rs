use nalgebra::{Matrix6, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::chain::{JointVector, KinematicChain};
use super::pose::{pose_error, Pose, PoseError};
use crate::error::{Error, Result};
use crate::hash;

/// Damped-least-squares CLIK parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IkConfig {
    /// Damping factor lambda in `J^T (J J^T + lambda^2 I)^-1`.
    pub damping: f64,
    /// Fraction of the DLS step applied per iteration.
    pub step_scale: f64,
    /// Largest joint-space step norm per iteration (rad).
    pub max_step: f64,
    pub pos_tol: f64,
    pub rot_tol: f64,
    pub max_iters: usize,
    /// Extra attempts from seeded in-limits configurations when the solve
    /// from `q0` ends in a local minimum. Each gets the full `max_iters`.
    pub restarts: usize,
}

impl Default for IkConfig {
    fn default() -> Self {
        Self {
            damping: 1e-3,
            step_scale: 0.5,
            max_step: 0.5,
            pos_tol: 1e-4,
            rot_tol: 1e-3,
            max_iters: 200,
            restarts: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub q: JointVector,
    pub residual: PoseError,
    pub converged: bool,
    /// Number of joint updates performed.
    pub iterations: usize,
}

/// Closed-loop IK: iterate damped least-squares updates until the pose
/// error is within tolerance or the budget runs out.
///
/// Never fails on unreachable targets; the best configuration seen is
/// returned with `converged = false` and its true residual.
///
/// Restart configurations depend only on the chain id, so the solver stays
/// a pure function of its arguments.
pub fn clik_solve(chain: &KinematicChain, target: &Pose, q0: &JointVector, cfg: &IkConfig) -> Result<IkSolution> {
    if q0.len() != chain.dof() {
        return Err(Error::DimensionMismatch {
            expected: chain.dof(),
            got: q0.len(),
        });
    }
    let mut best = solve_from(chain, target, &q0.values, cfg);
    if best.converged || cfg.restarts == 0 {
        return Ok(best);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hash::fnv1a(chain.id()));
    let mut iterations = best.iterations;
    for _ in 0..cfg.restarts {
        let start: Vec<f64> = chain.joints().iter().map(|j| rng.random_range(j.lower..=j.upper)).collect();
        let sol = solve_from(chain, target, &start, cfg);
        iterations += sol.iterations;
        if sol.converged || score(&sol.residual) < score(&best.residual) {
            best = sol;
        }
        if best.converged {
            break;
        }
    }
    best.iterations = iterations;
    Ok(best)
}

fn solve_from(chain: &KinematicChain, target: &Pose, q0: &[f64], cfg: &IkConfig) -> IkSolution {
    let n = chain.dof();
    let mut q = q0.to_vec();
    chain.clamp(&mut q);

    let mut jac = Vec::with_capacity(n);
    let mut best_q = q.clone();
    let mut best_err = PoseError {
        pos: f64::INFINITY,
        rot: f64::INFINITY,
    };
    let mut dq = vec![0.0; n];
    let lambda2 = cfg.damping * cfg.damping;

    for iter in 0..=cfg.max_iters {
        let ee = chain.fk_with_jacobian(&q, &mut jac);
        let err = pose_error(&ee, target);
        if score(&err) < score(&best_err) {
            best_err = err;
            best_q.copy_from_slice(&q);
        }
        if err.pos <= cfg.pos_tol && err.rot <= cfg.rot_tol {
            return IkSolution {
                q: JointVector::new(chain.id(), q),
                residual: err,
                converged: true,
                iterations: iter,
            };
        }
        if iter == cfg.max_iters {
            break;
        }

        let e = error_twist(&ee, target);
        let mut jjt = Matrix6::<f64>::zeros();
        for col in &jac {
            let c = Vector6::from_column_slice(col);
            jjt += c * c.transpose();
        }
        for i in 0..6 {
            jjt[(i, i)] += lambda2;
        }
        let y = match jjt.cholesky() {
            Some(ch) => ch.solve(&e),
            None => break,
        };
        let mut norm2 = 0.0;
        for (d, col) in dq.iter_mut().zip(&jac) {
            *d = cfg.step_scale * Vector6::from_column_slice(col).dot(&y);
            norm2 += *d * *d;
        }
        let norm = norm2.sqrt();
        let shrink = if norm > cfg.max_step { cfg.max_step / norm } else { 1.0 };
        for (v, d) in q.iter_mut().zip(&dq) {
            *v += shrink * d;
        }
        chain.clamp(&mut q);
    }

    IkSolution {
        q: JointVector::new(chain.id(), best_q),
        residual: best_err,
        converged: false,
        iterations: cfg.max_iters,
    }
}

fn score(e: &PoseError) -> f64 {
    e.pos + 0.1 * e.rot
}

/// Stacked (linear, angular) error; the angular part is the axis-angle of
/// `target * current^-1`, expressed in the chain base frame.
fn error_twist(current: &Pose, target: &Pose) -> Vector6<f64> {
    let dp = target.position - current.position;
    let rel = target.orientation() * current.orientation().inverse();
    let w = rel.scaled_axis();
    Vector6::new(dp.x, dp.y, dp.z, w.x, w.y, w.z)
}
