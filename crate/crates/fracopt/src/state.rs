//! Forward solvers for the state equation d^α y/dt^α = Δy + u, y(0) = y₀,
//! with homogeneous Dirichlet boundary.
//!
//! Two independent derivations are implemented and tested against each
//! other:
//!
//! * [`solve_state`] — L1-implicit time stepping. At node n it solves
//!   `(σI − Δ_h) y_n = σ(Σ_{k=1}^{n-1}(b_{k-1}-b_k) y_{n-k} + b_{n-1} y₀) + u_n`
//!   with σ = τ^{-α}/Γ(2-α); unconditionally stable, sequential in time.
//! * [`spectral_oracle`] — exact solution of the same semi-discrete system:
//!   expand in the eigenmodes of Δ_h and evolve each coefficient by
//!   `c_k(t) = E_{α,1}(-λ_k t^α) c_k(0) + ∫_0^t (t-s)^{α-1} E_{α,α}(-λ_k (t-s)^α) u_k(s) ds`,
//!   the Duhamel integral evaluated exactly for piecewise-linear u via the
//!   antiderivative identities
//!   `d/dw [w^α E_{α,α+1}(-λw^α)] = w^{α-1} E_{α,α}(-λw^α)` and
//!   `∫_0^w s^α E_{α,α}(-λs^α) ds = w^{α+1} E_{α,α+1}(-λw^α) - w^{α+1} E_{α,α+2}(-λw^α)`.
//!
//! The difference between the two is purely the L1 time-stepping error.
//! [`mild_residual`] measures how well a trajectory satisfies the Volterra
//! form y = y₀ + I^α(Δ_h y + u) node by node.

use crate::error::{Error, Result};
use crate::fracops::{mittag_leffler, rl_integral_left, FracOrder, TimeMesh};
use crate::grid::{apply_laplacian, eigensystem, ShiftedSolver, SpaceGrid};

/// Space-time array over all mesh nodes: data[n·dof + j] = y(t_n, x_j).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    mesh: TimeMesh,
    grid: SpaceGrid,
    data: Vec<f64>,
}

impl Trajectory {
    pub fn zeros(mesh: &TimeMesh, grid: &SpaceGrid) -> Self {
        Trajectory {
            mesh: mesh.clone(),
            grid: grid.clone(),
            data: vec![0.0; mesh.nodes() * grid.dof()],
        }
    }

    /// Sample f(t, x, y) on every node.
    pub fn from_fn(mesh: &TimeMesh, grid: &SpaceGrid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let mut t = Self::zeros(mesh, grid);
        let dof = grid.dof();
        for n in 0..mesh.nodes() {
            let tn = mesh.node(n);
            for j in 0..dof {
                let (x, y) = grid.coords(j);
                t.data[n * dof + j] = f(tn, x, y);
            }
        }
        t
    }

    /// Constant value everywhere.
    pub fn constant(mesh: &TimeMesh, grid: &SpaceGrid, value: f64) -> Self {
        let mut t = Self::zeros(mesh, grid);
        t.data.fill(value);
        t
    }

    pub fn mesh(&self) -> &TimeMesh {
        &self.mesh
    }

    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    pub fn field(&self, n: usize) -> &[f64] {
        let dof = self.grid.dof();
        &self.data[n * dof..(n + 1) * dof]
    }

    pub fn field_mut(&mut self, n: usize) -> &mut [f64] {
        let dof = self.grid.dof();
        &mut self.data[n * dof..(n + 1) * dof]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Trapezoid weight of time node n (without the τ factor).
    pub fn time_weight(&self, n: usize) -> f64 {
        if n == 0 || n == self.mesh.steps() {
            0.5
        } else {
            1.0
        }
    }

    /// Space-time inner product Σ_n ω_n τ ⟨f_n, g_n⟩_h (trapezoid in time).
    pub fn inner_qh(&self, other: &Trajectory) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        let tau = self.mesh.tau();
        let mut acc = 0.0;
        for n in 0..self.mesh.nodes() {
            acc += self.time_weight(n) * tau * self.grid.inner(self.field(n), other.field(n));
        }
        acc
    }

    /// Discrete L²(Q) norm under the trapezoid-in-time weights.
    pub fn norm_qh(&self) -> f64 {
        self.inner_qh(self).sqrt()
    }

    /// max_n ‖field(n)‖_h.
    pub fn max_h_norm(&self) -> f64 {
        (0..self.mesh.nodes())
            .map(|n| self.grid.norm(self.field(n)))
            .fold(0.0, f64::max)
    }

    /// Pointwise max-norm difference over all nodes.
    pub fn max_abs_diff(&self, other: &Trajectory) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn same_shape(&self, other: &Trajectory) -> bool {
        self.mesh == other.mesh && self.grid == other.grid
    }

    /// CSV rows `t,x[,y],value` for all nodes, header included.
    pub fn to_csv(&self) -> String {
        let dof = self.grid.dof();
        let mut out = String::with_capacity(self.data.len() * 24);
        if self.grid.dim() == 1 {
            out.push_str("t,x,value\n");
        } else {
            out.push_str("t,x,y,value\n");
        }
        for n in 0..self.mesh.nodes() {
            let t = self.mesh.node(n);
            for j in 0..dof {
                let (x, y) = self.grid.coords(j);
                if self.grid.dim() == 1 {
                    out.push_str(&format!("{:e},{:e},{:e}\n", t, x, self.data[n * dof + j]));
                } else {
                    out.push_str(&format!(
                        "{:e},{:e},{:e},{:e}\n",
                        t,
                        x,
                        y,
                        self.data[n * dof + j]
                    ));
                }
            }
        }
        out
    }
}

/// Data of one forward solve.
#[derive(Debug, Clone)]
pub struct StateProblem {
    pub frac: FracOrder,
    pub mesh: TimeMesh,
    pub grid: SpaceGrid,
    pub y0: Vec<f64>,
    pub control: Trajectory,
}

impl StateProblem {
    pub fn new(
        frac: FracOrder,
        mesh: TimeMesh,
        grid: SpaceGrid,
        y0: Vec<f64>,
        control: Trajectory,
    ) -> Result<Self> {
        grid.check_field(&y0)?;
        if control.mesh() != &mesh || control.grid() != &grid {
            return Err(Error::shape("control trajectory does not match mesh/grid".to_string()));
        }
        if frac.weights().len() < mesh.steps() {
            return Err(Error::shape(format!(
                "FracOrder holds {} weights, mesh needs {}",
                frac.weights().len(),
                mesh.steps()
            )));
        }
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("initial state contains non-finite values".to_string()));
        }
        Ok(StateProblem { frac, mesh, grid, y0, control })
    }
}

/// L1-implicit forward solve.
pub fn solve_state(p: &StateProblem) -> Result<Trajectory> {
    solve_state_with(&p.frac, &p.mesh, &p.grid, &p.y0, &p.control)
}

/// L1-implicit forward solve from parts (shared by the adjoint module).
pub fn solve_state_with(
    frac: &FracOrder,
    mesh: &TimeMesh,
    grid: &SpaceGrid,
    y0: &[f64],
    control: &Trajectory,
) -> Result<Trajectory> {
    grid.check_field(y0)?;
    if control.mesh() != mesh || control.grid() != grid {
        return Err(Error::shape("control trajectory does not match mesh/grid".to_string()));
    }
    let n_steps = mesh.steps();
    let dof = grid.dof();
    let sigma = frac.l1_scale(mesh.tau());
    let solver = ShiftedSolver::new(grid, sigma)?;
    let b = frac.weights();

    let mut y = Trajectory::zeros(mesh, grid);
    y.field_mut(0).copy_from_slice(y0);

    let mut rhs = vec![0.0; dof];
    for n in 1..=n_steps {
        // history: Σ_{k=1}^{n-1} (b_{k-1} - b_k) y_{n-k}  +  b_{n-1} y₀
        rhs.fill(0.0);
        for k in 1..n {
            let d = b[k - 1] - b[k];
            if d == 0.0 {
                continue; // classical limit: all history weights vanish
            }
            let past = y.field(n - k);
            for j in 0..dof {
                rhs[j] += d * past[j];
            }
        }
        let bn = b[n - 1];
        let u_n = control.field(n);
        for j in 0..dof {
            rhs[j] = sigma * (rhs[j] + bn * y0[j]) + u_n[j];
        }
        let next = solver.solve(&rhs)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::solver(format!("non-finite state at node {n}")));
        }
        y.field_mut(n).copy_from_slice(&next);
    }
    Ok(y)
}

/// Exact semi-discrete solution via eigen expansion and Mittag-Leffler
/// relaxation; the independent oracle for [`solve_state`].
pub fn spectral_oracle(p: &StateProblem) -> Result<Trajectory> {
    let mesh = &p.mesh;
    let grid = &p.grid;
    let alpha = p.frac.alpha();
    let n_nodes = mesh.nodes();
    let tau = mesh.tau();
    let eig = eigensystem(grid);
    let modes = eig.mode_count();

    let c0 = eig.to_modal(&p.y0)?;
    // modal control at every node: u_modal[n][k]
    let mut u_modal = Vec::with_capacity(n_nodes);
    for n in 0..n_nodes {
        u_modal.push(eig.to_modal(p.control.field(n))?);
    }

    // modal state coefficients, built mode by mode
    let mut c = vec![vec![0.0; modes]; n_nodes];
    for (k, cn0) in c0.iter().enumerate().take(modes) {
        let lam = eig.eigenvalue(k);
        // relaxation E_{α,1}(-λ t_n^α) and the Duhamel antiderivatives
        // F1(w) = w^α E_{α,α+1}(-λ w^α), F2(w) = w^{α+1} E_{α,α+2}(-λ w^α)
        let mut relax = vec![0.0; n_nodes];
        let mut f1 = vec![0.0; n_nodes];
        let mut g = vec![0.0; n_nodes]; // G(w) = w·F1(w) - F2(w)
        relax[0] = 1.0;
        for m in 1..n_nodes {
            let w = mesh.node(m);
            let z = -lam * w.powf(alpha);
            relax[m] = mittag_leffler(alpha, 1.0, z)?;
            let e_a1 = mittag_leffler(alpha, alpha + 1.0, z)?;
            let e_a2 = mittag_leffler(alpha, alpha + 2.0, z)?;
            f1[m] = w.powf(alpha) * e_a1;
            g[m] = w * f1[m] - w.powf(alpha + 1.0) * e_a2;
        }
        for n in 0..n_nodes {
            let mut acc = relax[n] * cn0;
            // Duhamel over intervals [t_j, t_{j+1}], u linear in w = t_n - s
            for j in 0..n {
                let wa = n - j - 1; // (n-j-1)τ
                let wb = n - j;
                let uj = u_modal[j][k];
                let uj1 = u_modal[j + 1][k];
                let q = (uj - uj1) / tau;
                let pcoef = uj1 - q * (wa as f64 * tau);
                acc += pcoef * (f1[wb] - f1[wa]) + q * (g[wb] - g[wa]);
            }
            c[n][k] = acc;
        }
    }

    let mut y = Trajectory::zeros(mesh, grid);
    for n in 0..n_nodes {
        let field = eig.from_modal(&c[n])?;
        y.field_mut(n).copy_from_slice(&field);
    }
    Ok(y)
}

/// Volterra-form defect max_n ‖y(t_n) − y₀ − I^α(Δ_h y + u)(t_n)‖_h.
pub fn mild_residual(
    frac: &FracOrder,
    mesh: &TimeMesh,
    grid: &SpaceGrid,
    y: &Trajectory,
    control: &Trajectory,
) -> Result<f64> {
    if y.mesh() != mesh || y.grid() != grid || !y.same_shape(control) {
        return Err(Error::shape("mild_residual shapes do not match".to_string()));
    }
    let n_nodes = mesh.nodes();
    let dof = grid.dof();
    // source s = Δ_h y + u per node
    let mut source = Vec::with_capacity(n_nodes);
    for n in 0..n_nodes {
        let mut s = apply_laplacian(grid, y.field(n))?;
        for (sv, uv) in s.iter_mut().zip(control.field(n)) {
            *sv += uv;
        }
        source.push(s);
    }
    // I^α along time for each spatial dof, then the per-node defect norm
    let y0 = y.field(0);
    let mut defect_sq = vec![0.0f64; n_nodes];
    let mut seq = vec![0.0; n_nodes];
    for j in 0..dof {
        for n in 0..n_nodes {
            seq[n] = source[n][j];
        }
        let integ = rl_integral_left(frac.alpha(), &seq, mesh)?;
        for n in 0..n_nodes {
            let d = y.field(n)[j] - y0[j] - integ[n];
            defect_sq[n] += d * d;
        }
    }
    let cell = grid.cell_measure();
    Ok(defect_sq.iter().map(|s| (s * cell).sqrt()).fold(0.0, f64::max))
}

/// Classical backward-Euler heat solve (I/τ − Δ_h) y_n = y_{n-1}/τ + u_n;
/// comparison target for the α = 1 limit mode.
pub fn solve_heat_backward_euler(
    mesh: &TimeMesh,
    grid: &SpaceGrid,
    y0: &[f64],
    control: &Trajectory,
) -> Result<Trajectory> {
    grid.check_field(y0)?;
    let sigma = 1.0 / mesh.tau();
    let solver = ShiftedSolver::new(grid, sigma)?;
    let mut y = Trajectory::zeros(mesh, grid);
    y.field_mut(0).copy_from_slice(y0);
    let dof = grid.dof();
    let mut rhs = vec![0.0; dof];
    for n in 1..=mesh.steps() {
        let prev = y.field(n - 1).to_vec();
        let u_n = control.field(n);
        for j in 0..dof {
            rhs[j] = sigma * prev[j] + u_n[j];
        }
        let next = solver.solve(&rhs)?;
        y.field_mut(n).copy_from_slice(&next);
    }
    Ok(y)
}
