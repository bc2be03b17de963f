//! Command implementations. Each one writes its CSV files into the output
//! directory and returns a small report for the terminal.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::rc::Rc;

use mvhawkes_core::frontier::{efficient_frontier, g0_from_table, poisson_frontier, FrontierPoint, StrategyField};
use mvhawkes_core::gsolver::{cache_key, poisson_g, solve_g, GTable};
use mvhawkes_core::hawkes::{expected_intensity, simulate_exact_with};
use mvhawkes_core::rng::{domain, stream};
use mvhawkes_core::wealth::{simulate_wealth, WealthSummary};
use mvhawkes_core::HawkesParams;

use crate::config::{Comparison, Ordering, RunConfig, Sweep, SweepParameter, Verdict};
use crate::error::CliError;
use crate::output::{Cell, CsvWriter};

/// Standard errors allowed by every Monte Carlo check.
pub const CHECK_SE: f64 = 3.0;

/// Solved surfaces, memoised in memory and on disk under a parameter hash.
pub struct SurfaceCache {
    dir: PathBuf,
    force: bool,
    memo: HashMap<String, Rc<GTable>>,
    /// Keys solved (rather than loaded) during this run.
    pub solved: Vec<String>,
}

impl SurfaceCache {
    pub fn new(dir: PathBuf, force: bool) -> Self {
        Self {
            dir,
            force,
            memo: HashMap::new(),
            solved: Vec::new(),
        }
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.gtable"))
    }

    /// The surface for `hawkes` under the configured market and solver settings.
    pub fn get(&mut self, cfg: &RunConfig, hawkes: &HawkesParams) -> Result<Rc<GTable>, CliError> {
        let key = cache_key(hawkes, &cfg.market, &cfg.solver);
        if let Some(t) = self.memo.get(&key) {
            return Ok(t.clone());
        }
        let path = self.path_for(&key);
        let table = if !self.force && path.exists() {
            log::info!("cache hit: {}", path.display());
            GTable::load(&path)?
        } else {
            log::info!("solving surface {key}");
            let t = solve_g(hawkes, &cfg.market, &cfg.solver)?;
            std::fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
            t.save(&path)?;
            self.solved.push(key.clone());
            t
        };
        let table = Rc::new(table);
        self.memo.insert(key, table.clone());
        Ok(table)
    }

    /// Surfaces held in memory, ordered by key.
    pub fn surfaces(&self) -> Vec<(&str, &GTable)> {
        let mut v: Vec<_> = self.memo.iter().map(|(k, t)| (k.as_str(), t.as_ref())).collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }
}

fn with_lambda0(h: &HawkesParams, lambda0: f64) -> Result<HawkesParams, CliError> {
    Ok(h.with_lambda0(vec![lambda0; h.dim()])?)
}

fn check_inside_grid(cfg: &RunConfig, lambda0: &[f64]) -> Result<(), CliError> {
    if lambda0.iter().any(|l| *l < cfg.solver.lam_lo || *l > cfg.solver.lam_hi) {
        return Err(CliError::Core(mvhawkes_core::Error::InvalidParameter {
            key: "hawkes.lambda0".into(),
            reason: format!(
                "{lambda0:?} lies outside the solver grid [{}, {}]",
                cfg.solver.lam_lo, cfg.solver.lam_hi
            ),
        }));
    }
    Ok(())
}

// ---------------------------------------------------------------- simulate

pub struct SimulateReport {
    pub files: Vec<PathBuf>,
    pub summary: PathBuf,
    /// Grid times where the empirical mean left the 3 SE band.
    pub outside: usize,
    pub rows: usize,
}

impl fmt::Display for SimulateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "wrote {} path files and {}",
            self.files.len(),
            self.summary.display()
        )?;
        write!(
            f,
            "mean intensity within {CHECK_SE} SE of the moment equation at {}/{} grid times",
            self.rows - self.outside,
            self.rows
        )
    }
}

pub fn simulate_hawkes(cfg: &RunConfig, out: &Path) -> Result<SimulateReport, CliError> {
    let h = &cfg.hawkes;
    let m = h.dim();
    let horizon = cfg.solver.horizon;
    let sim = &cfg.simulate;
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=m).map(|l| format!("lambda_{l}")));
    header.extend((1..=m).map(|l| format!("N_{l}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();

    let mut files = Vec::with_capacity(sim.paths);
    let mut paths = Vec::with_capacity(sim.paths);
    for p in 0..sim.paths {
        let mut rng = stream(sim.seed, domain::PATH_EXPORT, p as u64, 0);
        let path = simulate_exact_with(h, horizon, Some(sim.grid_dt), &mut rng)?;
        let file = out.join(format!("path_{p:04}.csv"));
        let mut w = CsvWriter::create(&file, &header)?;
        for (t, lam) in path.grid_times.iter().zip(&path.grid_intensity) {
            let mut row = vec![Cell::F(*t)];
            row.extend(lam.iter().map(|x| Cell::F(*x)));
            row.extend(path.counts_at(*t).into_iter().map(|n| Cell::I(n as u64)));
            w.row(&row)?;
        }
        files.push(w.finish()?);
        paths.push(path);
    }

    let mut head = vec!["t".to_string()];
    for l in 1..=m {
        head.extend([
            format!("mean_lambda_{l}"),
            format!("se_lambda_{l}"),
            format!("expected_lambda_{l}"),
            format!("within_3se_{l}"),
        ]);
    }
    let head: Vec<&str> = head.iter().map(String::as_str).collect();
    let summary = out.join("hawkes_summary.csv");
    let mut w = CsvWriter::create(&summary, &head)?;
    let n = paths.len() as f64;
    let mut outside = 0;
    let rows = paths.first().map_or(0, |p| p.grid_times.len());
    for k in 0..rows {
        let t = paths[0].grid_times[k];
        let oracle = expected_intensity(h, t)?;
        let mut row = vec![Cell::F(t)];
        let mut ok = true;
        for l in 0..m {
            let mean = paths.iter().map(|p| p.grid_intensity[k][l]).sum::<f64>() / n;
            let var = if n > 1.0 {
                paths
                    .iter()
                    .map(|p| (p.grid_intensity[k][l] - mean).powi(2))
                    .sum::<f64>()
                    / (n - 1.0)
            } else {
                0.0
            };
            let se = (var / n).sqrt();
            let inside = (mean - oracle[l]).abs() <= CHECK_SE * se + 1e-9 * oracle[l].abs().max(1.0);
            ok &= inside;
            row.extend([Cell::F(mean), Cell::F(se), Cell::F(oracle[l]), Cell::B(inside)]);
        }
        outside += usize::from(!ok);
        w.row(&row)?;
    }
    let summary = w.finish()?;
    Ok(SimulateReport {
        files,
        summary,
        outside,
        rows,
    })
}

// ---------------------------------------------------------------- solve-g

pub struct SolveReport {
    pub cache_file: PathBuf,
    pub cache_hit: bool,
    pub surface_csv: PathBuf,
    pub g0: f64,
    pub g0_se: f64,
    /// `(closed form, relative error)` when β = 0.
    pub poisson: Option<(f64, f64)>,
    pub clamped_lookups: u64,
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} {}",
            if self.cache_hit {
                "loaded cached surface"
            } else {
                "solved surface"
            },
            self.cache_file.display()
        )?;
        writeln!(f, "wrote {}", self.surface_csv.display())?;
        write!(f, "g~(0, lambda0) = {:.6} (standard error {:.2e})", self.g0, self.g0_se)?;
        if let Some((exact, rel)) = self.poisson {
            write!(
                f,
                "\nPoisson closed form {:.6}, relative error {:.3e} ({})",
                exact,
                rel,
                if rel <= 0.01 { "within 1%" } else { "OUTSIDE 1%" }
            )?;
        }
        if self.clamped_lookups > 0 {
            write!(
                f,
                "\n{} lookups were clamped at the grid growth cap",
                self.clamped_lookups
            )?;
        }
        Ok(())
    }
}

pub fn solve(cfg: &RunConfig, out: &Path, cache: &mut SurfaceCache) -> Result<SolveReport, CliError> {
    check_inside_grid(cfg, &cfg.hawkes.lambda0)?;
    let before = cache.solved.len();
    let table = cache.get(cfg, &cfg.hawkes)?;
    let key = cache_key(&cfg.hawkes, &cfg.market, &cfg.solver);
    let surface_csv = out.join("g_surface.csv");
    let file = std::fs::File::create(&surface_csv).map_err(|e| CliError::io(&surface_csv, e))?;
    table.write_csv(file)?;
    let lambda0 = &cfg.hawkes.lambda0;
    let g0 = table.initial_value(lambda0)?;
    let g0_se = table.initial_std_err(lambda0);
    let poisson = if cfg.hawkes.is_poisson() {
        let h = cfg.hawkes.clone();
        let exact = poisson_g(
            &cfg.market,
            move |s| (0..h.dim()).map(|l| h.decay(l, h.lambda0[l], s)).collect(),
            cfg.solver.horizon,
        )?
        .tilde_at(0.0)?;
        Some((exact, (g0 - exact).abs() / exact))
    } else {
        None
    };
    Ok(SolveReport {
        cache_file: cache.path_for(&key),
        cache_hit: cache.solved.len() == before,
        surface_csv,
        g0,
        g0_se,
        poisson,
        clamped_lookups: table.meta.clamped_lookups,
    })
}

// ---------------------------------------------------------------- frontier

pub struct ValidationReport {
    pub xi: f64,
    pub summary: WealthSummary,
    pub expected_variance: f64,
    pub variance_tolerance: f64,
    pub mean_ok: bool,
    pub variance_ok: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.mean_ok && self.variance_ok
    }
}

pub struct FrontierReport {
    pub csv: PathBuf,
    pub points: Vec<FrontierPoint>,
    pub g0_se: f64,
    pub validation: Option<ValidationReport>,
}

impl fmt::Display for FrontierReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "wrote {}", self.csv.display())?;
        if let Some(p) = self.points.first() {
            write!(f, "g~(0, lambda0) = {:.6} (standard error {:.2e})", p.g0, self.g0_se)?;
        }
        for p in &self.points {
            write!(
                f,
                "\n  xi = {:.4}  theta* = {:+.6}  Var = {:.6}",
                p.xi, p.theta_star, p.variance
            )?;
        }
        if let Some(v) = &self.validation {
            let s = &v.summary;
            write!(
                f,
                "\nwealth simulation at xi = {}: mean {:.6} (se {:.2e}) [{}], variance {:.6} vs {:.6} (tolerance {:.2e}) [{}]",
                v.xi,
                s.mean,
                s.se_mean,
                if v.mean_ok { "ok" } else { "FAIL" },
                s.variance,
                v.expected_variance,
                v.variance_tolerance,
                if v.variance_ok { "ok" } else { "FAIL" },
            )?;
        }
        Ok(())
    }
}

/// Frontier from the solved surface, or from the closed form when
/// `poisson_lambda` is given. With `validate`, wealth paths are simulated
/// under the efficient strategy at `frontier.validate_xi`.
pub fn frontier(
    cfg: &RunConfig,
    out: &Path,
    cache: &mut SurfaceCache,
    poisson_lambda: Option<f64>,
    validate: bool,
) -> Result<FrontierReport, CliError> {
    let xi = cfg.xi_grid();
    let x0 = cfg.frontier.x0;
    let horizon = cfg.solver.horizon;
    let (points, g0_se, validation) = match poisson_lambda {
        Some(lp) => {
            if !(lp > 0.0 && lp.is_finite()) {
                return Err(CliError::Config(format!("--poisson lambda must be positive, got {lp}")));
            }
            let points = poisson_frontier(&cfg.market, |_| vec![lp; cfg.market.jump_dim()], x0, horizon, &xi)?;
            let validation = if validate {
                let h = HawkesParams::new(
                    vec![lp; cfg.hawkes.dim()],
                    vec![lp; cfg.hawkes.dim()],
                    cfg.hawkes.alpha.clone(),
                    vec![vec![0.0; cfg.hawkes.dim()]; cfg.hawkes.dim()],
                )?;
                let strategy = StrategyField::poisson(&h, &cfg.market, x0, cfg.frontier.validate_xi, horizon)?;
                Some(validate_strategy(cfg, &strategy, 0.0)?)
            } else {
                None
            };
            (points, 0.0, validation)
        }
        None => {
            let lambda0 = cfg.hawkes.lambda0.clone();
            check_inside_grid(cfg, &lambda0)?;
            let table = cache.get(cfg, &cfg.hawkes)?;
            let g0 = g0_from_table(&table, &lambda0)?;
            let se = table.initial_std_err(&lambda0);
            let points = efficient_frontier(g0, x0, cfg.market.r, horizon, &xi)?;
            let validation = if validate {
                let strategy = StrategyField::from_table(&table, &lambda0, x0, cfg.frontier.validate_xi)?;
                Some(validate_strategy(cfg, &strategy, se)?)
            } else {
                None
            };
            (points, se, validation)
        }
    };

    let csv = out.join("frontier.csv");
    let mut w = CsvWriter::create(&csv, &["xi", "theta_star", "variance", "sd"])?;
    for p in &points {
        w.row(&[
            Cell::F(p.xi),
            Cell::F(p.theta_star),
            Cell::F(p.variance),
            Cell::F(p.std_dev),
        ])?;
    }
    let csv = w.finish()?;

    if let Some(v) = &validation {
        let path = out.join("wealth_summary.csv");
        let mut w = CsvWriter::create(
            &path,
            &[
                "xi",
                "mean",
                "variance",
                "se_mean",
                "se_variance",
                "n_paths",
                "blown_up",
                "expected_variance",
                "variance_tolerance",
                "pass",
            ],
        )?;
        let s = &v.summary;
        w.row(&[
            Cell::F(v.xi),
            Cell::F(s.mean),
            Cell::F(s.variance),
            Cell::F(s.se_mean),
            Cell::F(s.se_variance),
            Cell::I(s.n_paths as u64),
            Cell::I(s.blown_up as u64),
            Cell::F(v.expected_variance),
            Cell::F(v.variance_tolerance),
            Cell::B(v.passed()),
        ])?;
        w.finish()?;
    }
    Ok(FrontierReport {
        csv,
        points,
        g0_se,
        validation,
    })
}

/// Simulates wealth under `strategy` and compares the sample moments with
/// the frontier: the mean against ξ within 3 SE, the variance against
/// Var(ξ) within 3 SE plus the effect of a 3 SE error in g0.
pub fn validate_strategy(
    cfg: &RunConfig,
    strategy: &StrategyField<'_>,
    g0_se: f64,
) -> Result<ValidationReport, CliError> {
    let xi = strategy.xi;
    let summary = simulate_wealth(strategy, cfg.frontier.x0, &cfg.wealth)?;
    let point = efficient_frontier(strategy.g0, cfg.frontier.x0, cfg.market.r, strategy.horizon, &[xi])?[0];
    let gap = cfg.riskless_terminal() - xi;
    // dVar/dg0 = gap² / (1 − g0)²
    let sensitivity = gap * gap / (1.0 - strategy.g0).powi(2);
    let variance_tolerance = CHECK_SE * summary.se_variance + CHECK_SE * g0_se * sensitivity;
    Ok(ValidationReport {
        xi,
        mean_ok: (summary.mean - xi).abs() <= CHECK_SE * summary.se_mean + 1e-12,
        variance_ok: (summary.variance - point.variance).abs() <= variance_tolerance + 1e-12,
        expected_variance: point.variance,
        variance_tolerance,
        summary,
    })
}

// ---------------------------------------------------------------- sensitivity

/// One solved level of a sweep or comparison.
#[derive(Debug, Clone)]
pub struct Level {
    pub value: f64,
    pub g0: f64,
    pub g0_se: f64,
    pub points: Vec<FrontierPoint>,
}

#[derive(Debug, Clone)]
pub struct OrderingCheck {
    pub sweep: String,
    pub from: f64,
    pub to: f64,
    pub xi: f64,
    pub var_from: f64,
    pub var_to: f64,
    /// Ordering holds strictly.
    pub strict: bool,
    /// Not contradicted beyond Monte Carlo tolerance.
    pub within_tolerance: bool,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub sweep: Sweep,
    pub levels: Vec<Level>,
    pub checks: Vec<OrderingCheck>,
}

impl SweepResult {
    pub fn holds(&self) -> bool {
        self.checks.iter().all(|c| c.within_tolerance)
    }

    pub fn strict(&self) -> bool {
        self.checks.iter().all(|c| c.strict)
    }
}

#[derive(Debug, Clone)]
pub struct ComparisonResult {
    pub comparison: Comparison,
    pub hawkes: Level,
    pub poisson: Vec<FrontierPoint>,
    pub strict: bool,
    pub within_tolerance: bool,
}

pub struct SensitivityReport {
    pub sweeps: Vec<SweepResult>,
    pub comparisons: Vec<ComparisonResult>,
    pub files: Vec<PathBuf>,
}

impl SensitivityReport {
    pub fn holds(&self) -> bool {
        self.sweeps.iter().all(SweepResult::holds) && self.comparisons.iter().all(|c| c.within_tolerance)
    }
}

impl fmt::Display for SensitivityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = |strict: bool, tol: bool| match (strict, tol) {
            (true, _) => "holds",
            (false, true) => "holds within tolerance",
            (false, false) => "VIOLATED",
        };
        let mut lines = Vec::new();
        for s in &self.sweeps {
            let levels: Vec<String> = s
                .levels
                .iter()
                .map(|l| format!("{}: g0 {:.6} (se {:.1e})", l.value, l.g0, l.g0_se))
                .collect();
            lines.push(format!(
                "sweep {} (variance {:?} in {:?}): {} [{}]",
                s.sweep.name,
                s.sweep.expect,
                s.sweep.parameter,
                mark(s.strict(), s.holds()),
                levels.join("; ")
            ));
        }
        for c in &self.comparisons {
            lines.push(format!(
                "comparison {} (Hawkes lambda0 = {} vs Poisson {}; expected {:?}): {} [g0 {:.6} vs {:.6}]",
                c.comparison.name,
                c.comparison.lambda0,
                c.comparison.poisson_lambda,
                c.comparison.expect,
                mark(c.strict, c.within_tolerance),
                c.hawkes.g0,
                c.poisson.first().map_or(f64::NAN, |p| p.g0),
            ));
        }
        for p in &self.files {
            lines.push(format!("wrote {}", p.display()));
        }
        write!(f, "{}", lines.join("\n"))
    }
}

fn sweep_hawkes(base: &HawkesParams, sweep: &Sweep, value: f64) -> Result<HawkesParams, CliError> {
    let mut h = base.clone();
    match sweep.parameter {
        SweepParameter::Lambda0 => h.lambda0 = vec![value],
        SweepParameter::LambdaInf => h.lambda_inf = vec![value],
        SweepParameter::Alpha => h.alpha = vec![value],
        SweepParameter::Beta => h.beta = vec![vec![value]],
    }
    if sweep.lambda0_at_inf {
        h.lambda0 = h.lambda_inf.clone();
    }
    if let Some(l0) = sweep.lambda0 {
        h.lambda0 = vec![l0];
    }
    h.validate()?;
    Ok(h)
}

fn solve_level(cfg: &RunConfig, cache: &mut SurfaceCache, h: &HawkesParams, value: f64) -> Result<Level, CliError> {
    check_inside_grid(cfg, &h.lambda0)?;
    let table = cache.get(cfg, h)?;
    let g0 = g0_from_table(&table, &h.lambda0)?;
    let g0_se = table.initial_std_err(&h.lambda0);
    let points = efficient_frontier(g0, cfg.frontier.x0, cfg.market.r, cfg.solver.horizon, &cfg.xi_grid())?;
    Ok(Level {
        value,
        g0,
        g0_se,
        points,
    })
}

/// Runs one parameter sweep and checks the variance ordering between consecutive levels.
pub fn run_sweep(cfg: &RunConfig, cache: &mut SurfaceCache, sweep: &Sweep) -> Result<SweepResult, CliError> {
    let levels = sweep
        .levels
        .iter()
        .map(|&v| {
            let h = sweep_hawkes(&cfg.hawkes, sweep, v)?;
            solve_level(cfg, cache, &h, v)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let sign = match sweep.expect {
        Ordering::Increasing => 1.0,
        Ordering::Decreasing => -1.0,
    };
    let mut checks = Vec::new();
    for pair in levels.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        // Var is increasing in g0 at every ξ above the riskless level.
        let diff = sign * (b.g0 - a.g0);
        let tol = CHECK_SE * (a.g0_se.powi(2) + b.g0_se.powi(2)).sqrt();
        for (pa, pb) in a.points.iter().zip(&b.points) {
            if pa.variance == 0.0 && pb.variance == 0.0 {
                continue;
            }
            checks.push(OrderingCheck {
                sweep: sweep.name.clone(),
                from: a.value,
                to: b.value,
                xi: pa.xi,
                var_from: pa.variance,
                var_to: pb.variance,
                strict: diff > 0.0 && sign * (pb.variance - pa.variance) > 0.0,
                within_tolerance: diff > -tol,
            });
        }
    }
    Ok(SweepResult {
        sweep: sweep.clone(),
        levels,
        checks,
    })
}

/// Compares a Hawkes frontier with the constant-intensity Poisson frontier.
pub fn run_comparison(cfg: &RunConfig, cache: &mut SurfaceCache, c: &Comparison) -> Result<ComparisonResult, CliError> {
    let mut h = with_lambda0(&cfg.hawkes, c.lambda0)?;
    if let Some(b) = c.beta {
        h.beta = vec![vec![b]];
    }
    h.validate()?;
    let hawkes = solve_level(cfg, cache, &h, c.lambda0)?;
    let poisson = poisson_frontier(
        &cfg.market,
        |_| vec![c.poisson_lambda],
        cfg.frontier.x0,
        cfg.solver.horizon,
        &cfg.xi_grid(),
    )?;
    let g0_p = poisson[0].g0;
    let sign = match c.expect {
        Verdict::Worse => 1.0,
        Verdict::Better => -1.0,
    };
    let diff = sign * (hawkes.g0 - g0_p);
    Ok(ComparisonResult {
        comparison: c.clone(),
        strict: diff > 0.0,
        within_tolerance: diff > -CHECK_SE * hawkes.g0_se,
        hawkes,
        poisson,
    })
}

fn write_sweep(out: &Path, s: &SweepResult) -> Result<PathBuf, CliError> {
    let path = out.join(format!("sensitivity_{}.csv", s.sweep.name));
    let mut w = CsvWriter::create(&path, &["level", "xi", "theta_star", "variance", "sd", "g0", "g0_se"])?;
    for l in &s.levels {
        for p in &l.points {
            w.row(&[
                Cell::F(l.value),
                Cell::F(p.xi),
                Cell::F(p.theta_star),
                Cell::F(p.variance),
                Cell::F(p.std_dev),
                Cell::F(l.g0),
                Cell::F(l.g0_se),
            ])?;
        }
    }
    w.finish()
}

fn write_comparisons(out: &Path, results: &[ComparisonResult]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for c in results {
        let path = out.join(format!("comparison_{}.csv", c.comparison.name));
        let mut w = CsvWriter::create(
            &path,
            &["xi", "hawkes_variance", "poisson_variance", "hawkes_g0", "poisson_g0"],
        )?;
        for (h, p) in c.hawkes.points.iter().zip(&c.poisson) {
            w.row(&[
                Cell::F(h.xi),
                Cell::F(h.variance),
                Cell::F(p.variance),
                Cell::F(h.g0),
                Cell::F(p.g0),
            ])?;
        }
        files.push(w.finish()?);
    }
    let path = out.join("comparison_report.csv");
    let mut w = CsvWriter::create(
        &path,
        &[
            "name",
            "hawkes_lambda0",
            "poisson_lambda",
            "expect",
            "hawkes_g0",
            "hawkes_g0_se",
            "poisson_g0",
            "strict",
            "within_tolerance",
        ],
    )?;
    for c in results {
        w.row(&[
            Cell::S(c.comparison.name.clone()),
            Cell::F(c.comparison.lambda0),
            Cell::F(c.comparison.poisson_lambda),
            Cell::S(format!("{:?}", c.comparison.expect).to_lowercase()),
            Cell::F(c.hawkes.g0),
            Cell::F(c.hawkes.g0_se),
            Cell::F(c.poisson[0].g0),
            Cell::B(c.strict),
            Cell::B(c.within_tolerance),
        ])?;
    }
    files.push(w.finish()?);
    Ok(files)
}

pub fn sensitivity(cfg: &RunConfig, out: &Path, cache: &mut SurfaceCache) -> Result<SensitivityReport, CliError> {
    let mut files = Vec::new();
    let mut sweeps = Vec::new();
    for sweep in &cfg.sensitivity.sweeps {
        let r = run_sweep(cfg, cache, sweep)?;
        files.push(write_sweep(out, &r)?);
        sweeps.push(r);
    }
    let path = out.join("sensitivity_report.csv");
    let mut w = CsvWriter::create(
        &path,
        &[
            "sweep",
            "from",
            "to",
            "xi",
            "var_from",
            "var_to",
            "strict",
            "within_tolerance",
        ],
    )?;
    for c in sweeps.iter().flat_map(|s| &s.checks) {
        w.row(&[
            Cell::S(c.sweep.clone()),
            Cell::F(c.from),
            Cell::F(c.to),
            Cell::F(c.xi),
            Cell::F(c.var_from),
            Cell::F(c.var_to),
            Cell::B(c.strict),
            Cell::B(c.within_tolerance),
        ])?;
    }
    files.push(w.finish()?);
    let comparisons = cfg
        .sensitivity
        .comparisons
        .iter()
        .map(|c| run_comparison(cfg, cache, c))
        .collect::<Result<Vec<_>, _>>()?;
    files.extend(write_comparisons(out, &comparisons)?);
    Ok(SensitivityReport {
        sweeps,
        comparisons,
        files,
    })
}

pub fn compare_poisson(cfg: &RunConfig, out: &Path, cache: &mut SurfaceCache) -> Result<SensitivityReport, CliError> {
    let comparisons = cfg
        .sensitivity
        .comparisons
        .iter()
        .map(|c| run_comparison(cfg, cache, c))
        .collect::<Result<Vec<_>, _>>()?;
    let files = write_comparisons(out, &comparisons)?;
    Ok(SensitivityReport {
        sweeps: Vec::new(),
        comparisons,
        files,
    })
}
