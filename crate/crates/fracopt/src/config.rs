//! Run configuration: a TOML file of flat `key = value` sections.
//!
//! ```toml
//! command = "optimize"            # optional; the CLI argument wins
//!
//! [problem]
//! alpha = 0.5
//! horizon = 1.0
//! steps = 256
//!
//! [grid]
//! dim = 1
//! extents = [1.0]
//! counts = [63]
//!
//! [bounds]
//! lower = -0.5
//! upper = 0.5
//!
//! [cost]
//! variant = "tracking"            # or "polynomial"
//! gamma = 0.1                     # tracking weight
//! degree = 2                      # polynomial degree p
//! target = "expr:sin(pi*x)"       # y_d: const:<v> | expr:<e> | csv:<path>
//!
//! [initial]
//! state = "expr:sin(pi*x)"        # y0 (expression/const/csv)
//! control = "const:0.0"           # control, or optimizer start
//!
//! [optimizer]
//! max_iters = 2000
//! step0 = 1.0
//! armijo_c = 1e-4
//! backtrack = 0.5
//! tol_stationarity = 1e-8
//! tol_step = 1e-14
//!
//! [kkt]
//! cone_samples = 200
//! ssc_trials = 100
//! ssc_radii = [1e-1, 1e-2, 1e-3]
//! tol_sonc = 1e-8
//!
//! [study]
//! refinements = 4
//! mode = "manufactured"           # or "relaxation"
//! refine_space = false
//!
//! [output]
//! seed = 42
//! ```
//!
//! Desk-scale caps are enforced at validation: steps ≤ 8192 and total
//! spatial DOF ≤ 65536. Value sources use the `const:` / `expr:` /
//! `csv:` prefixes; CSV inputs must match the mesh and grid of the run
//! node for node.

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::expr;
use crate::fracops::{FracOrder, TimeMesh};
use crate::grid::SpaceGrid;
use crate::optimize::{ControlBounds, ControlProblem, OptimizeConfig};
use crate::state::Trajectory;
use serde::Deserialize;
use std::path::{Path, PathBuf};

pub const MAX_STEPS: usize = 8192;
pub const MAX_DOF: usize = 65536;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<String>,
    pub problem: ProblemSection,
    pub grid: GridSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    pub cost: CostSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub kkt: KktSection,
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory of the config file; base for relative csv: paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub alpha: f64,
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub extents: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub lower: f64,
    pub upper: f64,
}

impl Default for BoundsSection {
    fn default() -> Self {
        BoundsSection { lower: -1.0, upper: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub variant: String,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_degree")]
    pub degree: u32,
    pub target: String,
}

fn default_gamma() -> f64 {
    1.0
}
fn default_degree() -> u32 {
    2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub state: String,
    #[serde(default = "default_control")]
    pub control: String,
}

fn default_control() -> String {
    "const:0.0".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub max_iters: usize,
    pub step0: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub tol_stationarity: f64,
    pub tol_step: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = OptimizeConfig::default();
        OptimizerSection {
            max_iters: d.max_iters,
            step0: d.step0,
            armijo_c: d.armijo_c,
            backtrack: d.backtrack,
            tol_stationarity: d.tol_stationarity,
            tol_step: d.tol_step,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KktSection {
    pub cone_samples: usize,
    pub ssc_trials: usize,
    pub ssc_radii: Vec<f64>,
    pub tol_sonc: f64,
}

impl Default for KktSection {
    fn default() -> Self {
        KktSection {
            cone_samples: 200,
            ssc_trials: 100,
            ssc_radii: vec![1e-1, 1e-2, 1e-3],
            tol_sonc: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySection {
    pub refinements: usize,
    pub mode: String,
    pub refine_space: bool,
}

impl Default for StudySection {
    fn default() -> Self {
        StudySection { refinements: 4, mode: "manufactured".to_string(), refine_space: false }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub seed: u64,
    pub dir: Option<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { seed: 0, dir: None }
    }
}

impl RunConfig {
    /// Read and parse a config file (parse failures are `Error::Config`).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::config(format!("cannot parse {}: {e}", path.display())))?;
        cfg.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_str_with_base(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("cannot parse config: {e}")))?;
        cfg.base_dir = base.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Invariant checks (violations are `Error::Invariant`).
    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        if !(p.alpha > 0.0 && p.alpha <= 1.0) {
            return Err(Error::invariant(format!("alpha must lie in (0, 1], got {}", p.alpha)));
        }
        if !(p.horizon > 0.0) || !p.horizon.is_finite() {
            return Err(Error::invariant(format!("horizon must be positive, got {}", p.horizon)));
        }
        if p.steps < 2 || p.steps > MAX_STEPS {
            return Err(Error::invariant(format!(
                "steps must lie in [2, {MAX_STEPS}], got {}",
                p.steps
            )));
        }
        if self.grid.dim != 1 && self.grid.dim != 2 {
            return Err(Error::invariant(format!("grid dim must be 1 or 2, got {}", self.grid.dim)));
        }
        if self.grid.extents.len() != self.grid.dim || self.grid.counts.len() != self.grid.dim {
            return Err(Error::invariant(
                "grid extents/counts length must equal dim".to_string(),
            ));
        }
        let dof: usize = self.grid.counts.iter().product();
        if dof > MAX_DOF {
            return Err(Error::invariant(format!("total DOF {dof} exceeds the cap {MAX_DOF}")));
        }
        if !(self.bounds.lower < self.bounds.upper) {
            return Err(Error::invariant(format!(
                "bounds need lower < upper, got [{}, {}]",
                self.bounds.lower, self.bounds.upper
            )));
        }
        match self.cost.variant.as_str() {
            "tracking" | "polynomial" => {}
            other => {
                return Err(Error::invariant(format!(
                    "cost variant must be tracking or polynomial, got '{other}'"
                )))
            }
        }
        for src in [&self.cost.target, &self.initial.state, &self.initial.control] {
            parse_source(src)?; // syntax only; csv existence checked on build
        }
        if let Some(Source::Csv(p)) = parse_source(&self.cost.target).ok() {
            let full = self.base_dir.join(&p);
            if !full.exists() {
                return Err(Error::invariant(format!("target csv does not exist: {}", full.display())));
            }
        }
        if let Some(Source::Csv(p)) = parse_source(&self.initial.state).ok() {
            let full = self.base_dir.join(&p);
            if !full.exists() {
                return Err(Error::invariant(format!("state csv does not exist: {}", full.display())));
            }
        }
        if let Some(Source::Csv(p)) = parse_source(&self.initial.control).ok() {
            let full = self.base_dir.join(&p);
            if !full.exists() {
                return Err(Error::invariant(format!(
                    "control csv does not exist: {}",
                    full.display()
                )));
            }
        }
        Ok(())
    }

    pub fn mesh(&self) -> Result<TimeMesh> {
        TimeMesh::new(self.problem.horizon, self.problem.steps)
    }

    pub fn space_grid(&self) -> Result<SpaceGrid> {
        if self.grid.dim == 1 {
            SpaceGrid::interval(self.grid.extents[0], self.grid.counts[0])
        } else {
            SpaceGrid::rectangle(
                self.grid.extents[0],
                self.grid.extents[1],
                self.grid.counts[0],
                self.grid.counts[1],
            )
        }
    }

    pub fn frac(&self) -> Result<FracOrder> {
        FracOrder::new(self.problem.alpha, self.problem.steps)
    }

    pub fn optimizer_config(&self) -> OptimizeConfig {
        OptimizeConfig {
            max_iters: self.optimizer.max_iters,
            step0: self.optimizer.step0,
            armijo_c: self.optimizer.armijo_c,
            backtrack: self.optimizer.backtrack,
            tol_stationarity: self.optimizer.tol_stationarity,
            tol_step: self.optimizer.tol_step,
        }
    }

    /// Sample a value source as a full trajectory.
    pub fn trajectory_from(
        &self,
        src: &str,
        mesh: &TimeMesh,
        grid: &SpaceGrid,
    ) -> Result<Trajectory> {
        match parse_source(src)? {
            Source::Const(v) => Ok(Trajectory::constant(mesh, grid, v)),
            Source::Expr(e) => {
                let ast = expr::parse(&e)?;
                Ok(Trajectory::from_fn(mesh, grid, |t, x, y| ast.eval(t, x, y)))
            }
            Source::Csv(p) => read_trajectory_csv(&self.base_dir.join(p), mesh, grid),
        }
    }

    /// Sample a value source at t = 0 as a space field.
    pub fn field_from(&self, src: &str, grid: &SpaceGrid) -> Result<Vec<f64>> {
        match parse_source(src)? {
            Source::Const(v) => Ok(vec![v; grid.dof()]),
            Source::Expr(e) => {
                let ast = expr::parse(&e)?;
                Ok(grid.sample(|x, y| ast.eval(0.0, x, y)))
            }
            Source::Csv(p) => {
                let mesh = self.mesh()?;
                let traj = read_trajectory_csv(&self.base_dir.join(p), &mesh, grid)?;
                Ok(traj.field(0).to_vec())
            }
        }
    }

    pub fn cost_model(&self, mesh: &TimeMesh, grid: &SpaceGrid) -> Result<CostModel> {
        let y_d = self.trajectory_from(&self.cost.target, mesh, grid)?;
        match self.cost.variant.as_str() {
            "tracking" => CostModel::tracking(self.cost.gamma, y_d),
            _ => CostModel::polynomial(self.cost.degree, y_d),
        }
    }

    /// Assemble the full reduced control problem.
    pub fn control_problem(&self) -> Result<ControlProblem> {
        let mesh = self.mesh()?;
        let grid = self.space_grid()?;
        let frac = self.frac()?;
        let y0 = self.field_from(&self.initial.state, &grid)?;
        let cost = self.cost_model(&mesh, &grid)?;
        let bounds = ControlBounds::new(self.bounds.lower, self.bounds.upper)?;
        ControlProblem::new(frac, mesh, grid, y0, cost, bounds)
    }
}

enum Source {
    Const(f64),
    Expr(String),
    Csv(String),
}

fn parse_source(src: &str) -> Result<Source> {
    if let Some(rest) = src.strip_prefix("const:") {
        let v = rest
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::config(format!("bad constant value '{rest}'")))?;
        return Ok(Source::Const(v));
    }
    if let Some(rest) = src.strip_prefix("expr:") {
        expr::parse(rest)?; // validate eagerly
        return Ok(Source::Expr(rest.to_string()));
    }
    if let Some(rest) = src.strip_prefix("csv:") {
        return Ok(Source::Csv(rest.trim().to_string()));
    }
    Err(Error::config(format!(
        "value source must start with const:, expr: or csv:, got '{src}'"
    )))
}

/// Read a trajectory CSV (as written by `Trajectory::to_csv`) and verify
/// it matches the mesh/grid node for node.
pub fn read_trajectory_csv(path: &Path, mesh: &TimeMesh, grid: &SpaceGrid) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::config("empty csv".to_string()))?;
    let want_cols = if grid.dim() == 1 { 3 } else { 4 };
    let have_cols = header.split(',').count();
    if have_cols != want_cols {
        return Err(Error::shape(format!(
            "csv {} has {have_cols} columns, expected {want_cols}",
            path.display()
        )));
    }
    let dof = grid.dof();
    let mut out = Trajectory::zeros(mesh, grid);
    let mut row = 0usize;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != want_cols {
            return Err(Error::shape(format!("csv row {row} has {} fields", parts.len())));
        }
        let n = row / dof;
        let j = row % dof;
        if n >= mesh.nodes() {
            return Err(Error::shape(format!(
                "csv {} has more rows than mesh nodes",
                path.display()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| Error::config(format!("bad csv number '{s}'")))
        };
        let t = parse(parts[0])?;
        let x = parse(parts[1])?;
        let (want_x, want_y) = grid.coords(j);
        let scale = mesh.horizon().abs().max(1.0);
        if (t - mesh.node(n)).abs() > 1e-9 * scale || (x - want_x).abs() > 1e-9 {
            return Err(Error::shape(format!(
                "csv row {row} coordinates do not match the run mesh/grid"
            )));
        }
        if grid.dim() == 2 {
            let yv = parse(parts[2])?;
            if (yv - want_y).abs() > 1e-9 {
                return Err(Error::shape(format!("csv row {row} y-coordinate mismatch")));
            }
        }
        out.field_mut(n)[j] = parse(parts[want_cols - 1])?;
        row += 1;
    }
    if row != mesh.nodes() * dof {
        return Err(Error::shape(format!(
            "csv {} has {row} data rows, expected {}",
            path.display(),
            mesh.nodes() * dof
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[problem]
alpha = 0.5
horizon = 1.0
steps = 32

[grid]
dim = 1
extents = [1.0]
counts = [15]

[bounds]
lower = -0.5
upper = 0.5

[cost]
variant = "tracking"
gamma = 0.1
target = "expr:sin(pi*x)"

[initial]
state = "expr:sin(pi*x)"
control = "const:0.0"
"#;

    #[test]
    fn parses_and_builds() {
        let cfg = RunConfig::from_str_with_base(BASE, Path::new(".")).unwrap();
        let p = cfg.control_problem().unwrap();
        assert_eq!(p.mesh.steps(), 32);
        assert_eq!(p.grid.dof(), 15);
        assert_eq!(p.bounds.lower, -0.5);
    }

    #[test]
    fn rejects_bad_bounds_and_alpha() {
        let bad = BASE.replace("upper = 0.5", "upper = -0.6");
        let err = RunConfig::from_str_with_base(&bad, Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Invariant(_)), "{err}");
        let bad = BASE.replace("alpha = 0.5", "alpha = 1.5");
        assert!(RunConfig::from_str_with_base(&bad, Path::new(".")).is_err());
        let bad = BASE.replace("steps = 32", "steps = 100000");
        assert!(RunConfig::from_str_with_base(&bad, Path::new(".")).is_err());
    }

    #[test]
    fn rejects_unparseable_toml_as_config_error() {
        let err = RunConfig::from_str_with_base("not [valid toml", Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let bad = BASE.replace("\"expr:sin(pi*x)\"", "\"wavelet:sin\"");
        let err = RunConfig::from_str_with_base(&bad, Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn csv_round_trip() {
        let mesh = TimeMesh::new(1.0, 4).unwrap();
        let grid = SpaceGrid::interval(1.0, 5).unwrap();
        let traj = Trajectory::from_fn(&mesh, &grid, |t, x, _| t * 10.0 + x);
        let dir = std::env::temp_dir().join("fracopt_cfg_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("traj.csv");
        std::fs::write(&path, traj.to_csv()).unwrap();
        let back = read_trajectory_csv(&path, &mesh, &grid).unwrap();
        assert!(traj.max_abs_diff(&back) < 1e-12);
        // mismatched grid is rejected
        let grid2 = SpaceGrid::interval(1.0, 6).unwrap();
        assert!(read_trajectory_csv(&path, &mesh, &grid2).is_err());
    }
}
