//! Adjoint solvers for the backward equation
//! d̂^α φ/dt^α = Δφ − L_y,  φ(T) = 0,
//! where d̂^α is the right Caputo derivative.
//!
//! Two constructions are provided and deliberately kept distinct:
//!
//! * [`solve_adjoint_reversal`] — the continuous-equation route: substitute
//!   ζ(t) = φ(T−t), which turns the right Caputo derivative into a left one
//!   and yields the forward problem d^α ζ = Δζ − L_y(T−t, ·), ζ(0) = 0.
//!   This is solved with the L1 state stepper and flipped back. The
//!   terminal condition φ(T) = 0 holds exactly by construction.
//! * [`solve_adjoint_transpose`] — the discrete route: the exact transpose
//!   of the linear control-to-state map of the L1 scheme, conjugated by
//!   the trapezoid quadrature weights. Reduced gradients built from it
//!   match finite differences of the discrete objective to rounding.
//!
//! Sign convention, stated once: when the adjoint equation is cast as a
//! forward problem the source enters negated (−L_y on the right-hand
//! side); both solvers here take the field L_y itself and return φ, so the
//! classic sign error in e = L_u − φ cannot arise from mixing them.
//!
//! The transpose adjoint is only defined on nodes 1..N (the control value
//! at t = 0 never enters the state recurrence); its node-0 field is zero
//! by convention and is excluded from reversal/transpose gap metrics.

use crate::error::{Error, Result};
use crate::fracops::{FracOrder, TimeMesh};
use crate::grid::{ShiftedSolver, SpaceGrid};
use crate::state::{solve_state_with, Trajectory};

/// Data of one adjoint solve; `source` is the field L_y[t_n, x_j].
#[derive(Debug, Clone)]
pub struct AdjointProblem {
    pub frac: FracOrder,
    pub mesh: TimeMesh,
    pub grid: SpaceGrid,
    pub source: Trajectory,
}

impl AdjointProblem {
    pub fn new(
        frac: FracOrder,
        mesh: TimeMesh,
        grid: SpaceGrid,
        source: Trajectory,
    ) -> Result<Self> {
        if source.mesh() != &mesh || source.grid() != &grid {
            return Err(Error::shape("adjoint source does not match mesh/grid".to_string()));
        }
        Ok(AdjointProblem { frac, mesh, grid, source })
    }
}

/// Time-reversal adjoint: solve the forward problem for ζ(t) = φ(T−t) with
/// source −L_y(T−t), then flip. φ(T) = 0 exactly.
pub fn solve_adjoint_reversal(p: &AdjointProblem) -> Result<Trajectory> {
    let n_steps = p.mesh.steps();
    let dof = p.grid.dof();
    // g(t_m) = -L_y(T - t_m)
    let mut g = Trajectory::zeros(&p.mesh, &p.grid);
    for m in 0..=n_steps {
        let src = p.source.field(n_steps - m);
        let out = g.field_mut(m);
        for j in 0..dof {
            out[j] = -src[j];
        }
    }
    let zeta = solve_state_with(&p.frac, &p.mesh, &p.grid, &vec![0.0; dof], &g)?;
    let mut phi = Trajectory::zeros(&p.mesh, &p.grid);
    for n in 0..=n_steps {
        phi.field_mut(n).copy_from_slice(zeta.field(n_steps - n));
    }
    Ok(phi)
}

/// Exact transpose of the control-to-state map u ↦ y (y₀ = 0) of the L1
/// scheme, conjugated by the trapezoid weights:
/// result = W⁻¹ Sᵀ (W s), so that ⟨S u, s⟩_{Q,h} = ⟨u, result⟩_{Q,h}
/// for every u and s. Node 0 of the result is zero by convention.
pub fn apply_state_transpose(
    frac: &FracOrder,
    mesh: &TimeMesh,
    grid: &SpaceGrid,
    s: &Trajectory,
) -> Result<Trajectory> {
    if s.mesh() != mesh || s.grid() != grid {
        return Err(Error::shape("transpose source does not match mesh/grid".to_string()));
    }
    let n_steps = mesh.steps();
    if frac.weights().len() < n_steps {
        return Err(Error::shape("FracOrder too short for the mesh".to_string()));
    }
    let dof = grid.dof();
    let sigma = frac.l1_scale(mesh.tau());
    let solver = ShiftedSolver::new(grid, sigma)?;
    let b = frac.weights();

    // backward substitution of Aᵀ φ'' = (ω_n s_n): n = N, N-1, …, 1
    let mut phi2 = Trajectory::zeros(mesh, grid);
    let mut rhs = vec![0.0; dof];
    for n in (1..=n_steps).rev() {
        let omega = if n == n_steps { 0.5 } else { 1.0 };
        let sn = s.field(n);
        for j in 0..dof {
            rhs[j] = omega * sn[j];
        }
        for k in 1..=(n_steps - n) {
            let d = b[k - 1] - b[k];
            if d == 0.0 {
                continue;
            }
            let future = phi2.field(n + k);
            for j in 0..dof {
                rhs[j] += sigma * d * future[j];
            }
        }
        let sol = solver.solve(&rhs)?;
        phi2.field_mut(n).copy_from_slice(&sol);
    }
    // undo the weight conjugation; node 0 stays zero
    let mut out = phi2;
    for n in 1..=n_steps {
        let omega = if n == n_steps { 0.5 } else { 1.0 };
        for v in out.field_mut(n) {
            *v /= omega;
        }
    }
    Ok(out)
}

/// Discrete-transpose adjoint of the source L_y (applies the plain
/// transpose to −L_y, matching the continuous sign convention).
pub fn solve_adjoint_transpose(p: &AdjointProblem) -> Result<Trajectory> {
    let mut neg = p.source.clone();
    for v in neg.data_mut() {
        *v = -*v;
    }
    apply_state_transpose(&p.frac, &p.mesh, &p.grid, &neg)
}

/// Discrete L²(Q) distance between the two adjoints over nodes 1..N
/// (node 0 is outside the transpose's domain).
pub fn adjoint_gap(reversal: &Trajectory, transpose: &Trajectory) -> f64 {
    debug_assert!(reversal.same_shape(transpose));
    let mesh = reversal.mesh();
    let grid = reversal.grid();
    let tau = mesh.tau();
    let mut acc = 0.0;
    for n in 1..=mesh.steps() {
        let w = if n == mesh.steps() { 0.5 } else { 1.0 };
        let mut s = 0.0;
        for (a, b) in reversal.field(n).iter().zip(transpose.field(n)) {
            s += (a - b) * (a - b);
        }
        acc += w * tau * grid.cell_measure() * s;
    }
    acc.sqrt()
}
