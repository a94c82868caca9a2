//! Experiment drivers: level table, stabilization sweep, hierarchy study,
//! per-cell λ distributions and single solves.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::{Discretization, ProblemData, QuadratureSettings};
use crate::geometry::{ImplicitDomain, Point};
use crate::mesh::{Grid, GridHierarchy, Quadrant};
use crate::multigrid::{CoarseOp, CycleOptions, MgProblem, SolveReport, SubdomainRule};
use crate::stabilization::{estimate_global, estimate_local, summarize, Scheme};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub center: [f64; 2],
    pub radius: f64,
    pub theta_a: f64,
    pub theta_b: f64,
    pub alpha_fict: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let pi = std::f64::consts::PI;
        Self {
            center: [0.5, 0.5],
            radius: 0.3,
            theta_a: 0.75 * pi,
            theta_b: 1.25 * pi,
            alpha_fict: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub uniform_levels: u8,
    pub adaptive_levels: u8,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            uniform_levels: 5,
            adaptive_levels: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub depth: usize,
    pub order: usize,
    pub boundary_points: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        let q = QuadratureSettings::default();
        Self {
            depth: q.max_depth,
            order: q.gauss_order,
            boundary_points: q.points_per_arc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub coarse_op: CoarseOp,
    pub safety: f64,
    pub factors: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub nu1: usize,
    pub nu2: usize,
    pub omega: f64,
    pub subdomains: SubdomainRule,
    pub rank_tol: f64,
    /// Above this many DoFs the global scheme is not run.
    pub global_dof_cap: usize,
    /// Constant Dirichlet value.
    pub dirichlet_value: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Local,
            coarse_op: CoarseOp::Assembly,
            safety: 2.0,
            factors: vec![0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
            tol: 1e-9,
            max_iter: 100,
            nu1: 3,
            nu2: 3,
            omega: 2.0 / 3.0,
            subdomains: SubdomainRule::AllCut,
            rank_tol: crate::stabilization::DEFAULT_RANK_TOL,
            global_dof_cap: 20_000,
            dirichlet_value: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchyConfig {
    pub schemes: Vec<Scheme>,
    pub coarse_ops: Vec<CoarseOp>,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            schemes: vec![Scheme::Local, Scheme::Global],
            coarse_ops: vec![CoarseOp::Assembly, CoarseOp::Rap],
        }
    }
}

/// Full experiment description; every field has a default, so an empty
/// file is a valid configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub mesh: MeshConfig,
    pub quadrature: QuadratureConfig,
    pub solver: SolverConfig,
    pub hierarchy: HierarchyConfig,
    pub output: String,
    /// Unused; all runs are deterministic.
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.solver;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(s.tol > 0.0 && s.tol < 1.0) {
            return bad("solver.tol must lie in (0, 1)");
        }
        if s.factors.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
            return bad("sweep factors must be positive");
        }
        if !(s.safety > 0.0) {
            return bad("solver.safety must be positive");
        }
        if !(s.omega > 0.0 && s.omega <= 1.0) {
            return bad("solver.omega must lie in (0, 1]");
        }
        if !(s.rank_tol > 0.0 && s.rank_tol < 1.0) {
            return bad("solver.rank_tol must lie in (0, 1)");
        }
        let q = &self.quadrature;
        if q.order == 0 || q.boundary_points < 2 {
            return bad("quadrature needs order >= 1 and boundary_points >= 2");
        }
        let depth = self.mesh.uniform_levels as usize + self.mesh.adaptive_levels as usize;
        if depth > crate::mesh::DEPTH_MAX as usize {
            return bad("too many refinement levels");
        }
        self.domain().map(|_| ())
    }

    pub fn domain(&self) -> Result<ImplicitDomain<f64>> {
        let g = &self.geometry;
        ImplicitDomain::new(
            Point::new(g.center[0], g.center[1]),
            g.radius,
            g.theta_a,
            g.theta_b,
            g.alpha_fict,
        )
    }

    pub fn quadrature_settings(&self) -> QuadratureSettings {
        QuadratureSettings {
            max_depth: self.quadrature.depth,
            gauss_order: self.quadrature.order,
            points_per_arc: self.quadrature.boundary_points,
        }
    }

    pub fn cycle_options(&self) -> CycleOptions<f64> {
        CycleOptions {
            nu1: self.solver.nu1,
            nu2: self.solver.nu2,
            omega: self.solver.omega,
            subdomains: self.solver.subdomains,
        }
    }

    /// First 16 hex digits of the SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn problem_data(&self) -> ProblemData<f64> {
        ProblemData::constant_dirichlet(self.solver.dirichlet_value)
    }
}

/// `τ_0 … τ_n`: uniform refinement, then one boundary refinement per level.
pub fn mesh_sequence(cfg: &ExperimentConfig, domain: &ImplicitDomain<f64>) -> Result<Vec<Grid>> {
    let mut grids = vec![Grid::uniform(cfg.mesh.uniform_levels)?];
    for _ in 0..cfg.mesh.adaptive_levels {
        let next = grids
            .last()
            .expect("non-empty")
            .refine_toward_boundary::<f64, _>(domain)?;
        grids.push(next);
    }
    Ok(grids)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub level: usize,
    pub n_dof: usize,
    pub n_dirichlet_cut: usize,
    pub lambda_g: Option<f64>,
    pub global_skipped: bool,
    pub lambda_l: Option<(f64, f64, f64)>,
}

/// DoF counts and raw `λ` estimates on every mesh `τ_k`.
pub fn cmd_table(cfg: &ExperimentConfig) -> Result<Vec<TableRow>> {
    cfg.validate()?;
    let domain = cfg.domain()?;
    let rank_tol = cfg.solver.rank_tol;
    let mut rows = Vec::new();
    for (level, grid) in mesh_sequence(cfg, &domain)?.into_iter().enumerate() {
        let disc = Discretization::new(grid, &domain, cfg.quadrature_settings())?;
        let n_dof = disc.n_dof();
        let n_cut = disc.dirichlet_cut_cells().len();
        let global_skipped = n_cut > 0 && n_dof > cfg.solver.global_dof_cap;
        let lambda_g = if n_cut > 0 && !global_skipped {
            Some(estimate_global(&disc, rank_tol)?)
        } else {
            None
        };
        let local: Vec<f64> = estimate_local(&disc, rank_tol)?.into_values().collect();
        rows.push(TableRow {
            level,
            n_dof,
            n_dirichlet_cut: n_cut,
            lambda_g,
            global_skipped,
            lambda_l: summarize(&local),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub factor: f64,
    /// Effective `λ` (min, mean, max) over the Dirichlet-cut cells of the
    /// finest grid.
    pub lambda: Option<(f64, f64, f64)>,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    pub rate: Option<f64>,
    pub final_relative_residual: f64,
    pub error: Option<String>,
}

/// Two-grid solves on the finest mesh with the raw estimate scaled by each
/// sweep factor; failures become non-converged rows.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let domain = cfg.domain()?;
    let fine = mesh_sequence(cfg, &domain)?.pop().expect("non-empty");
    let hierarchy = GridHierarchy::build(fine, 2)?;
    let s = &cfg.solver;
    let problem = MgProblem::new(
        &hierarchy,
        &domain,
        cfg.quadrature_settings(),
        s.scheme,
        s.coarse_op,
        1.0,
        s.rank_tol,
    )?;
    let cells: Vec<Quadrant> = problem
        .fine()
        .dirichlet_cut_cells()
        .iter()
        .map(|&c| problem.fine().leaves()[c])
        .collect();
    let data = cfg.problem_data();
    let options = cfg.cycle_options();
    Ok(s.factors
        .iter()
        .map(|&factor| {
            let field = problem.fine_field().clone().with_factor(factor);
            let lambda = summarize(&field.effective(&cells));
            let run = || -> Result<SolveReport<f64>> {
                let mg = problem.multigrid(factor, &options)?;
                let b = problem.fine().assemble_load(&field, &data)?;
                Ok(mg.solve(&b, s.tol, s.max_iter)?.1)
            };
            match run() {
                Ok(rep) => SweepRow {
                    factor,
                    lambda,
                    iterations: rep.iterations,
                    converged: rep.converged,
                    diverged: rep.diverged,
                    rate: rep.rate(),
                    final_relative_residual: rep.relative_residual(),
                    error: None,
                },
                Err(e) => SweepRow {
                    factor,
                    lambda,
                    iterations: 0,
                    converged: false,
                    diverged: false,
                    rate: None,
                    final_relative_residual: f64::NAN,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseStatus {
    Converged,
    NotConverged,
    Diverged,
    Skipped,
    Failed,
}

impl std::fmt::Display for CaseStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            CaseStatus::Converged => "converged",
            CaseStatus::NotConverged => "not-converged",
            CaseStatus::Diverged => "diverged",
            CaseStatus::Skipped => "skipped",
            CaseStatus::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HierarchyRow {
    pub level: usize,
    pub n_levels: usize,
    pub n_dof: usize,
    pub scheme: Scheme,
    pub coarse_op: CoarseOp,
    pub status: CaseStatus,
    pub iterations: usize,
    pub rate: Option<f64>,
}

/// Runs one configured case on the hierarchy below `fine`.
pub fn run_case(
    cfg: &ExperimentConfig,
    domain: &ImplicitDomain<f64>,
    hierarchy: &GridHierarchy,
    scheme: Scheme,
    coarse_op: CoarseOp,
) -> Result<SolveReport<f64>> {
    let s = &cfg.solver;
    let problem = MgProblem::new(
        hierarchy,
        domain,
        cfg.quadrature_settings(),
        scheme,
        coarse_op,
        s.safety,
        s.rank_tol,
    )?;
    let mg = problem.multigrid(1.0, &cfg.cycle_options())?;
    let b = problem
        .fine()
        .assemble_load(problem.fine_field(), &cfg.problem_data())?;
    Ok(mg.solve(&b, s.tol, s.max_iter)?.1)
}

/// Average reduction rates on `τ_1 … τ_n`, each with its full hierarchy
/// down to `τ_0`, for every configured scheme and coarse operator.
pub fn cmd_hierarchy(cfg: &ExperimentConfig) -> Result<Vec<HierarchyRow>> {
    cfg.validate()?;
    if cfg.mesh.adaptive_levels == 0 {
        return Err(Error::Config(
            "the hierarchy study needs adaptive_levels >= 1".into(),
        ));
    }
    let domain = cfg.domain()?;
    let grids = mesh_sequence(cfg, &domain)?;
    let mut rows = Vec::new();
    for (level, fine) in grids.into_iter().enumerate().skip(1) {
        let hierarchy = GridHierarchy::build(fine, level + 1)?;
        let n_dof = crate::mesh::build_dof_map::<f64>(hierarchy.finest())?
            .0
            .n_dof();
        for &scheme in &cfg.hierarchy.schemes {
            for &coarse_op in &cfg.hierarchy.coarse_ops {
                let mut row = HierarchyRow {
                    level,
                    n_levels: hierarchy.len(),
                    n_dof,
                    scheme,
                    coarse_op,
                    status: CaseStatus::Skipped,
                    iterations: 0,
                    rate: None,
                };
                if scheme == Scheme::Global && n_dof > cfg.solver.global_dof_cap {
                    rows.push(row);
                    continue;
                }
                match run_case(cfg, &domain, &hierarchy, scheme, coarse_op) {
                    Ok(rep) => {
                        row.status = if rep.converged {
                            CaseStatus::Converged
                        } else if rep.diverged {
                            CaseStatus::Diverged
                        } else {
                            CaseStatus::NotConverged
                        };
                        row.iterations = rep.iterations;
                        row.rate = rep.rate();
                    }
                    Err(_) => row.status = CaseStatus::Failed,
                }
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaHistogram {
    pub level: usize,
    pub n_dof: usize,
    pub lambda_g: Option<f64>,
    /// Raw local estimates in Morton order.
    pub cells: Vec<(Quadrant, f64)>,
}

/// Raw local estimates of every Dirichlet-cut cell of `τ_level`, plus the
/// global estimate when within the size cap.
pub fn cmd_lambda_hist(cfg: &ExperimentConfig, level: usize) -> Result<LambdaHistogram> {
    cfg.validate()?;
    let domain = cfg.domain()?;
    let grid = mesh_sequence(cfg, &domain)?
        .into_iter()
        .nth(level)
        .ok_or_else(|| Error::Config(format!("level {level} exceeds the configured meshes")))?;
    let disc = Discretization::new(grid, &domain, cfg.quadrature_settings())?;
    if disc.dirichlet_cut_cells().is_empty() {
        return Err(Error::EmptyScope(format!(
            "mesh {level} has no Dirichlet-cut cells"
        )));
    }
    let lambda_g = if disc.n_dof() <= cfg.solver.global_dof_cap {
        Some(estimate_global(&disc, cfg.solver.rank_tol)?)
    } else {
        None
    };
    let mut cells: Vec<(Quadrant, f64)> = estimate_local(&disc, cfg.solver.rank_tol)?
        .into_iter()
        .collect();
    cells.sort_by_key(|(q, _)| q.morton());
    Ok(LambdaHistogram {
        level,
        n_dof: disc.n_dof(),
        lambda_g,
        cells,
    })
}

/// Multigrid solve on the finest mesh with the configured case.
pub fn cmd_solve(cfg: &ExperimentConfig) -> Result<SolveReport<f64>> {
    cfg.validate()?;
    let domain = cfg.domain()?;
    let grids = mesh_sequence(cfg, &domain)?;
    let n = grids.len();
    let fine = grids.into_iter().last().expect("non-empty");
    if n == 1 {
        let hierarchy = GridHierarchy::from_grids(vec![fine])?;
        return run_case(
            cfg,
            &domain,
            &hierarchy,
            cfg.solver.scheme,
            cfg.solver.coarse_op,
        );
    }
    let hierarchy = GridHierarchy::build(fine, n)?;
    run_case(
        cfg,
        &domain,
        &hierarchy,
        cfg.solver.scheme,
        cfg.solver.coarse_op,
    )
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.10e}"))
}

pub fn write_table_csv<W: Write>(mut w: W, hash: &str, rows: &[TableRow]) -> Result<()> {
    writeln!(
        w,
        "config_hash,level,n_dof,n_dirichlet_cut,lambda_g,lambda_l_min,lambda_l_mean,lambda_l_max"
    )?;
    for r in rows {
        let g = if r.global_skipped {
            "skipped".to_string()
        } else {
            opt(r.lambda_g)
        };
        let (a, b, c) = r
            .lambda_l
            .map_or((None, None, None), |(a, b, c)| (Some(a), Some(b), Some(c)));
        writeln!(
            w,
            "{hash},{},{},{},{g},{},{},{}",
            r.level,
            r.n_dof,
            r.n_dirichlet_cut,
            opt(a),
            opt(b),
            opt(c)
        )?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(
    mut w: W,
    hash: &str,
    scheme: Scheme,
    rows: &[SweepRow],
) -> Result<()> {
    writeln!(
        w,
        "config_hash,scheme,factor,lambda_min,lambda_mean,lambda_max,iterations,converged,diverged,rate,final_relative_residual,error"
    )?;
    for r in rows {
        let (a, b, c) = r
            .lambda
            .map_or((None, None, None), |(a, b, c)| (Some(a), Some(b), Some(c)));
        writeln!(
            w,
            "{hash},{scheme},{},{},{},{},{},{},{},{},{:.6e},{}",
            r.factor,
            opt(a),
            opt(b),
            opt(c),
            r.iterations,
            r.converged,
            r.diverged,
            r.rate.map_or(String::new(), |x| format!("{x:.6}")),
            r.final_relative_residual,
            r.error.as_deref().unwrap_or("").replace(',', ";")
        )?;
    }
    Ok(())
}

pub fn write_hierarchy_csv<W: Write>(mut w: W, hash: &str, rows: &[HierarchyRow]) -> Result<()> {
    writeln!(
        w,
        "config_hash,level,n_levels,n_dof,scheme,coarse_op,status,iterations,rate"
    )?;
    for r in rows {
        writeln!(
            w,
            "{hash},{},{},{},{},{},{},{},{}",
            r.level,
            r.n_levels,
            r.n_dof,
            r.scheme,
            r.coarse_op,
            r.status,
            r.iterations,
            r.rate.map_or(String::new(), |x| format!("{x:.6}"))
        )?;
    }
    Ok(())
}

pub fn write_lambda_csv<W: Write>(mut w: W, hash: &str, hist: &LambdaHistogram) -> Result<()> {
    writeln!(w, "config_hash,level,cell_level,x0,y0,h,lambda_l,lambda_g")?;
    let g = opt(hist.lambda_g);
    for (q, v) in &hist.cells {
        let r = q.rect::<f64>();
        writeln!(
            w,
            "{hash},{},{},{:.12},{:.12},{:.12},{v:.10e},{g}",
            hist.level,
            q.level,
            r.x0,
            r.y0,
            r.width()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.mesh.uniform_levels, 5);
        assert_eq!(cfg.solver.factors.len(), 9);
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.hash(), cfg.hash());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(ExperimentConfig::from_toml("[solver]\ntol = 2.0").is_err());
        assert!(ExperimentConfig::from_toml("[solver]\nfactors = [1.0, -1.0]").is_err());
        assert!(ExperimentConfig::from_toml("[geometry]\nradius = 0.7").is_err());
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
        let cfg = ExperimentConfig::from_toml("[solver]\nscheme = \"global\"\ncoarse_op = \"rap\"")
            .unwrap();
        assert_eq!(
            (cfg.solver.scheme, cfg.solver.coarse_op),
            (Scheme::Global, CoarseOp::Rap)
        );
    }

    #[test]
    fn hash_depends_on_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.solver.safety = 3.0;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn uniform_table_row() {
        let cfg =
            ExperimentConfig::from_toml("[mesh]\nadaptive_levels = 0\n[quadrature]\ndepth = 3")
                .unwrap();
        let rows = cmd_table(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].n_dof, 1089);
        let mut out = Vec::new();
        write_table_csv(&mut out, &cfg.hash(), &rows).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 2);
    }
}
