//! Reduced-space solver for min f(u) = ψ(G(u), u) over the box
//! K = {a ≤ u ≤ b}: adjoint-based reduced gradient, pointwise projection,
//! and projected gradient with Armijo backtracking.
//!
//! The reduced gradient is the density g = L_u − φ with φ the
//! discrete-transpose adjoint, so the coordinate gradient of the discrete
//! objective is exactly W·g (W the Q-quadrature weights) and central
//! finite differences of f reproduce ⟨g, v⟩_{Q,h} to rounding. The
//! time-reversal adjoint gives a second gradient, reported for the
//! optimize-then-discretize vs discretize-then-optimize gap diagnostic;
//! the optimizer itself always uses the transpose.
//!
//! Stationarity is measured by the projected-gradient residual with unit
//! trial step, r(u) = ‖u − P(u − g)‖_{Q,h}, which vanishes exactly at
//! points satisfying the discrete first-order conditions.

use crate::adjoint::{solve_adjoint_reversal, solve_adjoint_transpose, AdjointProblem};
use crate::cost::{eval_cost, partial_fields, CostModel};
use crate::error::{Error, Result};
use crate::fracops::{FracOrder, TimeMesh};
use crate::grid::SpaceGrid;
use crate::state::{solve_state_with, Trajectory};

/// Pointwise control bounds a < b.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlBounds {
    pub lower: f64,
    pub upper: f64,
}

impl ControlBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !lower.is_finite() || !upper.is_finite() || !(lower < upper) {
            return Err(Error::invariant(format!(
                "control bounds need finite a < b, got [{lower}, {upper}]"
            )));
        }
        Ok(ControlBounds { lower, upper })
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.lower).min(self.upper)
    }
}

/// Everything defining the reduced optimization problem.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub frac: FracOrder,
    pub mesh: TimeMesh,
    pub grid: SpaceGrid,
    pub y0: Vec<f64>,
    pub cost: CostModel,
    pub bounds: ControlBounds,
}

impl ControlProblem {
    pub fn new(
        frac: FracOrder,
        mesh: TimeMesh,
        grid: SpaceGrid,
        y0: Vec<f64>,
        cost: CostModel,
        bounds: ControlBounds,
    ) -> Result<Self> {
        grid.check_field(&y0)?;
        if cost.y_d().mesh() != &mesh || cost.y_d().grid() != &grid {
            return Err(Error::shape("cost target does not match mesh/grid".to_string()));
        }
        Ok(ControlProblem { frac, mesh, grid, y0, cost, bounds })
    }

    /// Control-to-state map G(u).
    pub fn solve_forward(&self, u: &Trajectory) -> Result<Trajectory> {
        solve_state_with(&self.frac, &self.mesh, &self.grid, &self.y0, u)
    }

    /// f(u) = ψ(G(u), u).
    pub fn objective(&self, u: &Trajectory) -> Result<f64> {
        let y = self.solve_forward(u)?;
        eval_cost(&self.cost, &y, u)
    }
}

/// Linearized state z_v = G'(u)v: the state of (0, v). G is affine, so
/// G(u + v) − G(u) = z_v exactly.
pub fn linearized_state(problem: &ControlProblem, v: &Trajectory) -> Result<Trajectory> {
    solve_state_with(&problem.frac, &problem.mesh, &problem.grid, &vec![0.0; problem.grid.dof()], v)
}

/// Reduced gradient bundle: the gradient density, the state, and the
/// adjoint it was built from.
#[derive(Debug, Clone)]
pub struct GradientBundle {
    pub gradient: Trajectory,
    pub state: Trajectory,
    pub adjoint: Trajectory,
}

/// g = L_u − φ with the exact-transpose adjoint.
pub fn reduced_gradient(problem: &ControlProblem, u: &Trajectory) -> Result<GradientBundle> {
    reduced_gradient_impl(problem, u, false)
}

/// g = L_u − φ with the time-reversal adjoint (diagnostic variant).
pub fn reduced_gradient_reversal(
    problem: &ControlProblem,
    u: &Trajectory,
) -> Result<GradientBundle> {
    reduced_gradient_impl(problem, u, true)
}

fn reduced_gradient_impl(
    problem: &ControlProblem,
    u: &Trajectory,
    reversal: bool,
) -> Result<GradientBundle> {
    let y = problem.solve_forward(u)?;
    let (l_y, l_u) = partial_fields(&problem.cost, &y, u)?;
    let ap = AdjointProblem::new(
        problem.frac.clone(),
        problem.mesh.clone(),
        problem.grid.clone(),
        l_y,
    )?;
    let phi = if reversal { solve_adjoint_reversal(&ap)? } else { solve_adjoint_transpose(&ap)? };
    let mut g = l_u;
    for (gv, pv) in g.data_mut().iter_mut().zip(phi.data()) {
        *gv -= pv;
    }
    Ok(GradientBundle { gradient: g, state: y, adjoint: phi })
}

/// Pointwise clamp of a control trajectory to the box.
pub fn project_box(u: &Trajectory, bounds: &ControlBounds) -> Trajectory {
    let mut out = u.clone();
    for v in out.data_mut() {
        *v = bounds.clamp(*v);
    }
    out
}

/// Projected-gradient residual ‖u − P(u − g)‖_{Q,h} with unit trial step.
pub fn stationarity_residual(u: &Trajectory, g: &Trajectory, bounds: &ControlBounds) -> f64 {
    let mut diff = u.clone();
    for i in 0..diff.data().len() {
        let moved = bounds.clamp(u.data()[i] - g.data()[i]);
        diff.data_mut()[i] = u.data()[i] - moved;
    }
    diff.norm_qh()
}

/// Iteration tuning knobs.
#[derive(Debug, Clone)]
pub struct OptimizeConfig {
    pub max_iters: usize,
    pub step0: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub tol_stationarity: f64,
    pub tol_step: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            max_iters: 2000,
            step0: 1.0,
            armijo_c: 1e-4,
            backtrack: 0.5,
            tol_stationarity: 1e-8,
            tol_step: 1e-14,
        }
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters > 0
            && self.step0 > 0.0
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0
            && self.backtrack > 0.0
            && self.backtrack < 1.0
            && self.tol_stationarity > 0.0
            && self.tol_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invariant("optimizer configuration out of range".to_string()))
        }
    }
}

/// One accepted iteration of the trace.
#[derive(Debug, Clone, Copy)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub residual: f64,
    pub step: f64,
    pub delta_u: f64,
}

/// Iteration history plus the termination flags.
#[derive(Debug, Clone, Default)]
pub struct OptimizeTrace {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    /// Iteration budget ran out before the residual tolerance was reached.
    pub budget_exhausted: bool,
}

impl OptimizeTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,f,residual,step,delta_u\n");
        for r in &self.records {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{:e}\n",
                r.iter, r.objective, r.residual, r.step, r.delta_u
            ));
        }
        s
    }
}

/// Projected gradient with Armijo backtracking.
///
/// Iterates u ← P(u − s·g) with the sufficient-decrease test
/// f(u⁺) ≤ f(u) − c·⟨g, u − u⁺⟩ and stops when the stationarity residual
/// drops below `tol_stationarity` (or the step/budget limits trigger;
/// budget exhaustion is reported in the trace, not as an error).
pub fn projected_gradient(
    problem: &ControlProblem,
    start: &Trajectory,
    config: &OptimizeConfig,
) -> Result<(Trajectory, OptimizeTrace)> {
    config.validate()?;
    let bounds = problem.bounds;
    let mut u = project_box(start, &bounds);
    let mut f = problem.objective(&u)?;
    if !f.is_finite() {
        return Err(Error::solver("objective is non-finite at the start point".to_string()));
    }
    let mut trace = OptimizeTrace::default();

    for iter in 0..config.max_iters {
        let bundle = reduced_gradient(problem, &u)?;
        let g = bundle.gradient;
        let residual = stationarity_residual(&u, &g, &bounds);
        if residual <= config.tol_stationarity {
            trace.records.push(IterationRecord {
                iter,
                objective: f,
                residual,
                step: 0.0,
                delta_u: 0.0,
            });
            trace.converged = true;
            return Ok((u, trace));
        }

        let mut step = config.step0;
        let mut accepted = None;
        for _ in 0..80 {
            let mut trial = u.clone();
            for i in 0..trial.data().len() {
                trial.data_mut()[i] = bounds.clamp(u.data()[i] - step * g.data()[i]);
            }
            let f_trial = problem.objective(&trial)?;
            if !f_trial.is_finite() {
                return Err(Error::solver(format!("objective became non-finite at iter {iter}")));
            }
            // ⟨g, u − trial⟩_{Q,h} ≥ 0 along projected-gradient arcs
            let mut decrease = 0.0;
            {
                let tau = problem.mesh.tau();
                let cell = problem.grid.cell_measure();
                for n in 0..problem.mesh.nodes() {
                    let w = u.time_weight(n) * tau * cell;
                    let gu = g.field(n);
                    let uu = u.field(n);
                    let tt = trial.field(n);
                    for j in 0..problem.grid.dof() {
                        decrease += w * gu[j] * (uu[j] - tt[j]);
                    }
                }
            }
            if f_trial <= f - config.armijo_c * decrease {
                accepted = Some((trial, f_trial, step));
                break;
            }
            step *= config.backtrack;
        }
        let Some((u_next, f_next, step_taken)) = accepted else {
            // line search exhausted: numerically stationary
            trace.records.push(IterationRecord {
                iter,
                objective: f,
                residual,
                step: 0.0,
                delta_u: 0.0,
            });
            trace.converged = residual <= 10.0 * config.tol_stationarity;
            trace.budget_exhausted = !trace.converged;
            return Ok((u, trace));
        };
        let mut delta = u.clone();
        for i in 0..delta.data().len() {
            delta.data_mut()[i] -= u_next.data()[i];
        }
        let delta_u = delta.norm_qh();
        debug_assert!(f_next <= f + 1e-15 * f.abs().max(1.0), "Armijo accepted an ascent step");
        u = u_next;
        f = f_next;
        trace.records.push(IterationRecord {
            iter,
            objective: f,
            residual,
            step: step_taken,
            delta_u,
        });
        if delta_u <= config.tol_step {
            trace.converged = true;
            return Ok((u, trace));
        }
    }
    trace.budget_exhausted = true;
    Ok((u, trace))
}
