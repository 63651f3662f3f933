//! Running-cost models ψ(y, u) = ∫_Q L(t, x, y, u) dt dx and their
//! pointwise derivatives up to second order.
//!
//! The integrand family is closed — two variants — so the growth and
//! smoothness bounds the optimality theory needs can be checked rather
//! than assumed:
//!
//! * `Tracking`: L = ½(y − y_d)² + (γ/2)u², γ > 0. Jointly convex,
//!   L_uu = γ; the workhorse for the optimizer and KKT tests.
//! * `Polynomial` (degree p ≥ 2):
//!   L = (y − y_d)^p + Σ_{j=2}^{p-1} y^j + y·u + Σ_{j=1}^{p} u^{2j}.
//!   Convex in u for fixed y (L_uu ≥ 2); jointly convex only for p = 2.
//!
//! Integration over Q uses trapezoid weights in time and the interior
//! h^dim cell sum in space, matching the nodal layout of the L1 scheme so
//! the discrete adjoint transpose stays exact. Sums are compensated
//! (Kahan) so that quadratic-growth fits near an optimum are not drowned
//! by accumulation noise.

use crate::error::{Error, Result};
use crate::state::Trajectory;

/// Pointwise integrand values and partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrandDerivs {
    pub l: f64,
    pub l_y: f64,
    pub l_u: f64,
    pub l_yy: f64,
    pub l_yu: f64,
    pub l_uu: f64,
}

/// The closed integrand family.
#[derive(Debug, Clone)]
pub enum CostModel {
    Tracking { gamma: f64, y_d: Trajectory },
    Polynomial { p: u32, y_d: Trajectory },
}

impl CostModel {
    pub fn tracking(gamma: f64, y_d: Trajectory) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invariant(format!("tracking cost needs gamma > 0, got {gamma}")));
        }
        if y_d.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::invariant("target trajectory contains non-finite values".to_string()));
        }
        Ok(CostModel::Tracking { gamma, y_d })
    }

    pub fn polynomial(p: u32, y_d: Trajectory) -> Result<Self> {
        if p < 2 {
            return Err(Error::invariant(format!("polynomial cost needs p >= 2, got {p}")));
        }
        if y_d.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::invariant("target trajectory contains non-finite values".to_string()));
        }
        Ok(CostModel::Polynomial { p, y_d })
    }

    pub fn y_d(&self) -> &Trajectory {
        match self {
            CostModel::Tracking { y_d, .. } => y_d,
            CostModel::Polynomial { y_d, .. } => y_d,
        }
    }

    /// Growth exponent p of the family (2 for tracking).
    pub fn growth_exponent(&self) -> u32 {
        match self {
            CostModel::Tracking { .. } => 2,
            CostModel::Polynomial { p, .. } => *p,
        }
    }

    /// L(t, x, ·, ·) convex jointly in (y, u)?
    pub fn is_jointly_convex(&self) -> bool {
        match self {
            CostModel::Tracking { .. } => true,
            // Hessian [[L_yy, 1], [1, L_uu]] with L_yy = 2, L_uu ≥ 2 for p = 2;
            // odd y-powers break convexity in y for p ≥ 3
            CostModel::Polynomial { p, .. } => *p == 2,
        }
    }

    /// L(t, x, y, ·) convex in u for every fixed y?
    pub fn is_convex_in_u(&self) -> bool {
        true // both variants have L_uu ≥ min(γ, 2) > 0
    }

    /// Uniform lower bound Λ with L_uu ≥ Λ > 0.
    pub fn l_uu_lower_bound(&self) -> f64 {
        match self {
            CostModel::Tracking { gamma, .. } => *gamma,
            CostModel::Polynomial { .. } => 2.0,
        }
    }

    /// Closed-form partials of the selected variant at one node value.
    pub fn derivs_at(&self, y_d_value: f64, y: f64, u: f64) -> IntegrandDerivs {
        match self {
            CostModel::Tracking { gamma, .. } => {
                let d = y - y_d_value;
                IntegrandDerivs {
                    l: 0.5 * d * d + 0.5 * gamma * u * u,
                    l_y: d,
                    l_u: gamma * u,
                    l_yy: 1.0,
                    l_yu: 0.0,
                    l_uu: *gamma,
                }
            }
            CostModel::Polynomial { p, .. } => {
                let p = *p as i32;
                let d = y - y_d_value;
                let mut l = d.powi(p) + y * u;
                let mut l_y = p as f64 * d.powi(p - 1) + u;
                let mut l_yy = (p * (p - 1)) as f64 * d.powi(p - 2);
                for j in 2..p {
                    l += y.powi(j);
                    l_y += j as f64 * y.powi(j - 1);
                    l_yy += (j * (j - 1)) as f64 * y.powi(j - 2);
                }
                let mut l_u = y;
                let mut l_uu = 0.0;
                for j in 1..=p {
                    l += u.powi(2 * j);
                    l_u += (2 * j) as f64 * u.powi(2 * j - 1);
                    l_uu += (2 * j * (2 * j - 1)) as f64 * u.powi(2 * j - 2);
                }
                IntegrandDerivs { l, l_y, l_u, l_yy, l_yu: 1.0, l_uu }
            }
        }
    }

    /// Partials at mesh node (n, j) of a state/control pair.
    pub fn derivs(&self, n: usize, j: usize, y: &Trajectory, u: &Trajectory) -> IntegrandDerivs {
        let yd = self.y_d().field(n)[j];
        self.derivs_at(yd, y.field(n)[j], u.field(n)[j])
    }
}

/// ψ(y, u): trapezoid-in-time × h^dim spatial sum, Kahan-compensated.
pub fn eval_cost(model: &CostModel, y: &Trajectory, u: &Trajectory) -> Result<f64> {
    if !y.same_shape(u) || !y.same_shape(model.y_d()) {
        return Err(Error::shape("cost evaluation shapes do not match".to_string()));
    }
    let mesh = y.mesh();
    let grid = y.grid();
    let tau = mesh.tau();
    let cell = grid.cell_measure();
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for n in 0..mesh.nodes() {
        let w = y.time_weight(n) * tau * cell;
        let yf = y.field(n);
        let uf = u.field(n);
        let yd = model.y_d().field(n);
        for j in 0..grid.dof() {
            let term = w * model.derivs_at(yd[j], yf[j], uf[j]).l;
            let t = term - comp;
            let s = sum + t;
            comp = (s - sum) - t;
            sum = s;
        }
    }
    if !sum.is_finite() {
        return Err(Error::solver("cost evaluated to a non-finite value".to_string()));
    }
    Ok(sum)
}

/// The fields L_y[·,·] and L_u[·,·] along a state/control pair.
pub fn partial_fields(
    model: &CostModel,
    y: &Trajectory,
    u: &Trajectory,
) -> Result<(Trajectory, Trajectory)> {
    if !y.same_shape(u) || !y.same_shape(model.y_d()) {
        return Err(Error::shape("cost field shapes do not match".to_string()));
    }
    let mut l_y = Trajectory::zeros(y.mesh(), y.grid());
    let mut l_u = Trajectory::zeros(y.mesh(), y.grid());
    for n in 0..y.mesh().nodes() {
        for j in 0..y.grid().dof() {
            let d = model.derivs(n, j, y, u);
            l_y.field_mut(n)[j] = d.l_y;
            l_u.field_mut(n)[j] = d.l_u;
        }
    }
    Ok((l_y, l_u))
}

/// Result of sampling the growth inequality
/// |L_y| + |L_u| ≤ k(|y|^{p-1} + |u|) + r_M over |u| ≤ M.
#[derive(Debug, Clone)]
pub struct GrowthBoundReport {
    /// Smallest admissible constant found over the sample set.
    pub k_lm: f64,
    /// The constant offset r_M used (derived from the target bound).
    pub r_m: f64,
    /// Sample (y, u, required k) exceeding the cap, if any.
    pub counterexample: Option<(f64, f64, f64)>,
    pub samples_tested: usize,
}

/// Sample the first-derivative growth inequality over |u| ≤ M.
///
/// Reports the smallest admissible k_{LM} for the natural offset r_M of
/// the variant, or a counterexample if no k below the cap works.
pub fn check_a4_bounds(model: &CostModel, m_bound: f64, samples: usize) -> Result<GrowthBoundReport> {
    if !(m_bound > 0.0) {
        return Err(Error::domain(format!("bound M must be positive, got {m_bound}")));
    }
    let p = model.growth_exponent() as i32;
    let yd_max = model
        .y_d()
        .data()
        .iter()
        .fold(0.0f64, |a, &v| a.max(v.abs()));
    // offset absorbing the y_d shift and the u-bounded terms
    let r_m = match model {
        CostModel::Tracking { .. } => yd_max,
        CostModel::Polynomial { .. } => {
            let pf = p as f64;
            let mut c = pf * (2.0 * yd_max).powi(p - 1) + 2.0 * pf * pf;
            for j in 1..=p {
                c += (2 * j) as f64 * m_bound.powi(2 * j - 1);
            }
            c
        }
    };
    let k_cap = 1e6;
    let mut k_lm = 0.0f64;
    let mut counterexample = None;
    let mut tested = 0usize;
    // deterministic low-discrepancy sweep over (y, u)
    let side = (samples as f64).sqrt().ceil() as usize;
    for iy in 0..side {
        for iu in 0..side {
            let y = -20.0 + 40.0 * (iy as f64 + 0.5) / side as f64;
            let u = -m_bound + 2.0 * m_bound * (iu as f64 + 0.5) / side as f64;
            let d = model.derivs_at(0.0, y, u);
            let lhs = d.l_y.abs() + d.l_u.abs();
            let denom = y.abs().powi(p - 1) + u.abs();
            if denom < 1e-9 {
                continue;
            }
            let need = ((lhs - r_m) / denom).max(0.0);
            if need > k_lm {
                k_lm = need;
            }
            if need > k_cap && counterexample.is_none() {
                counterexample = Some((y, u, need));
            }
            tested += 1;
        }
    }
    Ok(GrowthBoundReport { k_lm, r_m, counterexample, samples_tested: tested })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracops::TimeMesh;
    use crate::grid::SpaceGrid;

    fn shapes() -> (TimeMesh, SpaceGrid) {
        (TimeMesh::new(1.0, 16).unwrap(), SpaceGrid::interval(1.0, 7).unwrap())
    }

    fn q_measure(mesh: &TimeMesh, grid: &SpaceGrid) -> f64 {
        // Σ ω_n τ · M h = T · M h
        mesh.horizon() * grid.dof() as f64 * grid.cell_measure()
    }

    #[test]
    fn tracking_cost_zero_at_target() {
        let (mesh, grid) = shapes();
        let y_d = Trajectory::from_fn(&mesh, &grid, |t, x, _| t * x);
        let m = CostModel::tracking(1.0, y_d.clone()).unwrap();
        let u = Trajectory::zeros(&mesh, &grid);
        assert_eq!(eval_cost(&m, &y_d, &u).unwrap(), 0.0);
    }

    #[test]
    fn tracking_constant_integrand_measures_q() {
        // y ≡ y_d, u ≡ 1, γ = 1 → ψ = ½ |Q_h|
        let (mesh, grid) = shapes();
        let y_d = Trajectory::constant(&mesh, &grid, 0.7);
        let m = CostModel::tracking(1.0, y_d.clone()).unwrap();
        let u = Trajectory::constant(&mesh, &grid, 1.0);
        let got = eval_cost(&m, &y_d, &u).unwrap();
        let want = 0.5 * q_measure(&mesh, &grid);
        assert!((got - want).abs() < 1e-13, "{got} vs {want}");
    }

    #[test]
    fn polynomial_constant_integrand_measures_q() {
        // p = 2, y ≡ 0, u ≡ 0, y_d ≡ 1 → ψ = |Q_h|, against a direct sum oracle
        let (mesh, grid) = shapes();
        let y_d = Trajectory::constant(&mesh, &grid, 1.0);
        let m = CostModel::polynomial(2, y_d).unwrap();
        let z = Trajectory::zeros(&mesh, &grid);
        let got = eval_cost(&m, &z, &z).unwrap();
        // direct sum oracle with explicit weights
        let mut want = 0.0;
        for n in 0..mesh.nodes() {
            let w = if n == 0 || n == mesh.steps() { 0.5 } else { 1.0 };
            want += w * mesh.tau() * grid.cell_measure() * grid.dof() as f64;
        }
        assert!((got - want).abs() < 1e-13);
        assert!((got - q_measure(&mesh, &grid)).abs() < 1e-12);
    }

    #[test]
    fn tracking_derivative_values() {
        let (mesh, grid) = shapes();
        let y_d = Trajectory::constant(&mesh, &grid, 1.0);
        let m = CostModel::tracking(0.5, y_d).unwrap();
        let d = m.derivs_at(1.0, 2.0, 3.0);
        assert_eq!(d.l_y, 1.0);
        assert_eq!(d.l_u, 1.5);
        assert_eq!(d.l_yy, 1.0);
        assert_eq!(d.l_uu, 0.5);
        assert_eq!(d.l_yu, 0.0);
    }

    #[test]
    fn polynomial_derivative_values() {
        // p = 2, y_d = 0, y = u = 1: L_y = 2y + u = 3, L_u = y + 2u + 4u³ = 7
        let (mesh, grid) = shapes();
        let y_d = Trajectory::zeros(&mesh, &grid);
        let m = CostModel::polynomial(2, y_d).unwrap();
        let d = m.derivs_at(0.0, 1.0, 1.0);
        assert_eq!(d.l_y, 3.0);
        assert_eq!(d.l_u, 7.0);
        assert_eq!(d.l_yu, 1.0);
        assert_eq!(d.l_uu, 2.0 + 12.0);
    }

    #[test]
    fn finite_difference_consistency_of_partials() {
        let (mesh, grid) = shapes();
        let y_d = Trajectory::constant(&mesh, &grid, 0.3);
        let eps = 1e-6;
        for model in [
            CostModel::tracking(0.7, y_d.clone()).unwrap(),
            CostModel::polynomial(2, y_d.clone()).unwrap(),
            CostModel::polynomial(3, y_d.clone()).unwrap(),
        ] {
            for &(y, u) in &[(0.4, -0.2), (-1.1, 0.8), (2.0, 0.05)] {
                let d = model.derivs_at(0.3, y, u);
                let fd_y = (model.derivs_at(0.3, y + eps, u).l
                    - model.derivs_at(0.3, y - eps, u).l)
                    / (2.0 * eps);
                let fd_u = (model.derivs_at(0.3, y, u + eps).l
                    - model.derivs_at(0.3, y, u - eps).l)
                    / (2.0 * eps);
                let scale_y = d.l_y.abs().max(1.0);
                let scale_u = d.l_u.abs().max(1.0);
                assert!((fd_y - d.l_y).abs() / scale_y < 1e-6, "L_y at ({y},{u})");
                assert!((fd_u - d.l_u).abs() / scale_u < 1e-6, "L_u at ({y},{u})");
                // second derivatives against first-derivative differences
                let fd_yy = (model.derivs_at(0.3, y + eps, u).l_y
                    - model.derivs_at(0.3, y - eps, u).l_y)
                    / (2.0 * eps);
                let fd_uu = (model.derivs_at(0.3, y, u + eps).l_u
                    - model.derivs_at(0.3, y, u - eps).l_u)
                    / (2.0 * eps);
                let fd_yu = (model.derivs_at(0.3, y + eps, u).l_u
                    - model.derivs_at(0.3, y - eps, u).l_u)
                    / (2.0 * eps);
                assert!((fd_yy - d.l_yy).abs() / d.l_yy.abs().max(1.0) < 1e-5);
                assert!((fd_uu - d.l_uu).abs() / d.l_uu.abs().max(1.0) < 1e-5);
                assert!((fd_yu - d.l_yu).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn directional_derivative_matches_partial_fields() {
        // dψ/dε in direction (δy, δu) = ∫ L_y δy + ∫ L_u δu
        let (mesh, grid) = shapes();
        let y_d = Trajectory::from_fn(&mesh, &grid, |t, x, _| (t - x).cos());
        let model = CostModel::polynomial(2, y_d).unwrap();
        let y = Trajectory::from_fn(&mesh, &grid, |t, x, _| t + 0.5 * x);
        let u = Trajectory::from_fn(&mesh, &grid, |t, x, _| 0.3 * t * x - 0.1);
        let dy = Trajectory::from_fn(&mesh, &grid, |t, x, _| (2.0 * t + x).sin());
        let du = Trajectory::from_fn(&mesh, &grid, |t, x, _| (t - 2.0 * x).cos());
        let (l_y, l_u) = partial_fields(&model, &y, &u).unwrap();
        let want = l_y.inner_qh(&dy) + l_u.inner_qh(&du);
        let eps = 1e-6;
        let perturb = |s: f64| {
            let mut yp = y.clone();
            let mut up = u.clone();
            for i in 0..yp.data().len() {
                yp.data_mut()[i] += s * dy.data()[i];
                up.data_mut()[i] += s * du.data()[i];
            }
            eval_cost(&model, &yp, &up).unwrap()
        };
        let fd = (perturb(eps) - perturb(-eps)) / (2.0 * eps);
        assert!(
            (fd - want).abs() / want.abs().max(1.0) < 1e-6,
            "directional derivative {fd} vs {want}"
        );
    }

    #[test]
    fn a4_growth_bound_tracking() {
        let (mesh, grid) = shapes();
        let y_d = Trajectory::constant(&mesh, &grid, 0.9);
        let gamma = 0.4;
        let m = CostModel::tracking(gamma, y_d).unwrap();
        let rep = check_a4_bounds(&m, 1.0, 900).unwrap();
        assert!(rep.counterexample.is_none());
        // |L_y| + |L_u| = |y - y_d| + γ|u| ≤ 1·|y| + γ|u| + |y_d|
        assert!(rep.k_lm <= 1.0f64.max(gamma) * 1.01, "k_lm {}", rep.k_lm);
        assert!((rep.r_m - 0.9).abs() < 1e-12);
    }

    #[test]
    fn a4_growth_bound_polynomial() {
        let (mesh, grid) = shapes();
        let y_d = Trajectory::constant(&mesh, &grid, 0.5);
        let m = CostModel::polynomial(2, y_d).unwrap();
        let rep = check_a4_bounds(&m, 1.0, 900).unwrap();
        assert!(rep.counterexample.is_none());
        assert!(rep.k_lm.is_finite() && rep.k_lm < 20.0, "k_lm {}", rep.k_lm);
    }

    #[test]
    fn variant_gate_rejects_bad_parameters() {
        let (mesh, grid) = shapes();
        let y_d = Trajectory::zeros(&mesh, &grid);
        assert!(CostModel::tracking(0.0, y_d.clone()).is_err());
        assert!(CostModel::tracking(-1.0, y_d.clone()).is_err());
        assert!(CostModel::polynomial(1, y_d.clone()).is_err());
        assert!(CostModel::polynomial(0, y_d).is_err());
    }

    #[test]
    fn convexity_flags_and_midpoint_sampling() {
        let (mesh, grid) = shapes();
        let y_d = Trajectory::zeros(&mesh, &grid);
        let tr = CostModel::tracking(0.3, y_d.clone()).unwrap();
        let p2 = CostModel::polynomial(2, y_d.clone()).unwrap();
        let p3 = CostModel::polynomial(3, y_d).unwrap();
        assert!(tr.is_jointly_convex() && p2.is_jointly_convex() && !p3.is_jointly_convex());
        assert!(tr.is_convex_in_u() && p2.is_convex_in_u() && p3.is_convex_in_u());
        // midpoint convexity in u on a grid of points
        for model in [&tr, &p2, &p3] {
            let mut k = 0;
            while k < 60 {
                let y = -2.0 + 0.15 * k as f64;
                let u1 = -1.5 + 0.05 * k as f64;
                let u2 = 1.5 - 0.04 * k as f64;
                let mid = model.derivs_at(0.0, y, 0.5 * (u1 + u2)).l;
                let avg =
                    0.5 * (model.derivs_at(0.0, y, u1).l + model.derivs_at(0.0, y, u2).l);
                assert!(mid <= avg + 1e-12);
                k += 1;
            }
        }
        // joint midpoint convexity for the convex variants
        for model in [&tr, &p2] {
            let mut k = 0;
            while k < 60 {
                let (y1, u1) = (-1.0 + 0.05 * k as f64, 1.0 - 0.03 * k as f64);
                let (y2, u2) = (2.0 - 0.06 * k as f64, -0.8 + 0.04 * k as f64);
                let mid = model.derivs_at(0.0, 0.5 * (y1 + y2), 0.5 * (u1 + u2)).l;
                let avg =
                    0.5 * (model.derivs_at(0.0, y1, u1).l + model.derivs_at(0.0, y2, u2).l);
                assert!(mid <= avg + 1e-12);
                k += 1;
            }
        }
    }

    #[test]
    fn coercivity_envelope_sampled() {
        // φ₁ - a₁|y|^p - b₁|u|^β ≤ L ≤ φ₂ + a₂|y|^p + b₂|u|^β on a sample grid
        let (mesh, grid) = shapes();
        let y_d = Trajectory::constant(&mesh, &grid, 0.6);
        let tr = CostModel::tracking(0.8, y_d.clone()).unwrap();
        let (a2, b2, phi2) = (1.0, 0.4, 0.36); // (|y|+c)²/2 ≤ |y|² + c²; c = 0.6
        for iy in 0..40 {
            for iu in 0..40 {
                let y = -8.0 + 0.4 * iy as f64;
                let u = -3.0 + 0.15 * iu as f64;
                let l = tr.derivs_at(0.6, y, u).l;
                assert!(l >= 0.0);
                assert!(l <= phi2 + a2 * y * y + b2 * u * u + 1e-12);
            }
        }
    }
}
