//! Run configuration: a TOML file layered over built-in defaults, with
//! `--set key=value` overrides addressed by dotted paths.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mvhawkes_core::{HawkesParams, MarketParams, SolverSettings, WealthSettings};

use crate::error::CliError;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "MVHAWKES_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub hawkes: HawkesParams,
    pub market: MarketParams,
    pub solver: SolverSettings,
    pub frontier: FrontierConfig,
    pub wealth: WealthSettings,
    pub simulate: SimulateConfig,
    pub sensitivity: SensitivityConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontierConfig {
    pub x0: f64,
    /// Explicit targets. When empty, `points` targets are spread evenly
    /// from x₀e^{rT} to `xi_max`.
    #[serde(default)]
    pub xi: Vec<f64>,
    pub xi_max: f64,
    pub points: usize,
    /// Target used by `--validate`.
    pub validate_xi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub paths: usize,
    /// Spacing of the CSV rows.
    pub grid_dt: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    Lambda0,
    LambdaInf,
    Alpha,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ordering {
    /// Variance grows with the parameter level.
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub name: String,
    pub parameter: SweepParameter,
    pub levels: Vec<f64>,
    /// Fixed initial intensity for every level.
    #[serde(default)]
    pub lambda0: Option<f64>,
    /// Start every level at its mean-reversion level.
    #[serde(default)]
    pub lambda0_at_inf: bool,
    pub expect: Ordering,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Hawkes variance above the Poisson variance.
    Worse,
    Better,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub name: String,
    pub lambda0: f64,
    #[serde(default)]
    pub beta: Option<f64>,
    pub poisson_lambda: f64,
    pub expect: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityConfig {
    pub sweeps: Vec<Sweep>,
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; defaults to `$MVHAWKES_OUT` or `./mvhawkes-out`.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Solved-surface cache; defaults to `<dir>/cache`.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            hawkes: HawkesParams::univariate(0.48, 0.48, 5.0, 0.1).expect("valid defaults"),
            market: MarketParams::reference(),
            solver: SolverSettings::default(),
            frontier: FrontierConfig {
                x0: 1.0,
                xi: Vec::new(),
                xi_max: 1.5,
                points: 11,
                validate_xi: 1.2,
            },
            wealth: WealthSettings::default(),
            simulate: SimulateConfig {
                paths: 10,
                grid_dt: 0.02,
                seed: 0,
            },
            sensitivity: SensitivityConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        let sweep = |name: &str, parameter, levels: &[f64], lambda0, lambda0_at_inf, expect| Sweep {
            name: name.into(),
            parameter,
            levels: levels.to_vec(),
            lambda0,
            lambda0_at_inf,
            expect,
        };
        let cmp = |name: &str, lambda0, beta, poisson_lambda, expect| Comparison {
            name: name.into(),
            lambda0,
            beta,
            poisson_lambda,
            expect,
        };
        use Ordering::*;
        use SweepParameter::*;
        Self {
            sweeps: vec![
                sweep("lambda0", Lambda0, &[0.1, 0.48, 1.9], None, false, Increasing),
                sweep("lambda_inf", LambdaInf, &[0.3, 0.48, 0.8], None, true, Increasing),
                sweep("alpha", Alpha, &[1.0, 2.0, 5.0], Some(1.0), false, Decreasing),
                sweep("beta", Beta, &[0.1, 0.5, 2.0], Some(1.0), false, Increasing),
            ],
            comparisons: vec![
                cmp("low_start", 0.3, None, 0.3, Verdict::Worse),
                cmp("high_start", 0.7, None, 0.7, Verdict::Better),
                cmp("strong_excitation", 0.48, Some(2.0), 0.48, Verdict::Worse),
            ],
        }
    }
}

impl RunConfig {
    /// Defaults, overlaid with `path` (if any) and then with `overrides`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut value = toml::Value::try_from(RunConfig::default()).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let file: toml::Value =
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?;
            merge(&mut value, file);
        }
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: RunConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    /// Checks every block before any computation starts.
    pub fn validate(&self) -> Result<(), CliError> {
        self.hawkes.validate()?;
        self.market.validate()?;
        let m = self.hawkes.dim();
        if self.market.jump_dim() != m {
            return Err(invalid(
                "market.jump_mean",
                format!(
                    "{} jump components but the Hawkes process has {m}",
                    self.market.jump_dim()
                ),
            ));
        }
        let s = &self.solver;
        mvhawkes_core::hawkes::step_count(s.horizon, s.dt).map_err(|_| {
            invalid(
                "solver.dt",
                format!("horizon {} must be a positive multiple of dt {}", s.horizon, s.dt),
            )
        })?;
        if !(s.dlam > 0.0) {
            return Err(invalid("solver.dlam", "must be > 0"));
        }
        if !(s.lam_lo > 0.0 && s.lam_hi >= s.lam_lo) {
            return Err(invalid("solver.lam_lo", "require 0 < lam_lo <= lam_hi"));
        }
        if s.paths < 2 {
            return Err(invalid("solver.paths", "need at least 2"));
        }
        let f = &self.frontier;
        if !(f.x0.is_finite() && f.x0 > 0.0) {
            return Err(invalid("frontier.x0", "must be finite and > 0"));
        }
        let floor = self.riskless_terminal();
        if f.xi.is_empty() {
            if f.points < 2 {
                return Err(invalid("frontier.points", "need at least 2"));
            }
            if !(f.xi_max > floor) {
                return Err(invalid("frontier.xi_max", format!("must exceed x0*e^(rT) = {floor}")));
            }
        }
        if let Some(bad) = f.xi.iter().find(|x| !(**x >= floor)) {
            return Err(invalid(
                "frontier.xi",
                format!("target {bad} is below x0*e^(rT) = {floor}"),
            ));
        }
        if !(f.validate_xi >= floor) {
            return Err(invalid(
                "frontier.validate_xi",
                format!("must be >= x0*e^(rT) = {floor}"),
            ));
        }
        if self.wealth.n_paths < 2 {
            return Err(invalid("wealth.n_paths", "need at least 2"));
        }
        mvhawkes_core::hawkes::step_count(s.horizon, self.wealth.dt)
            .map_err(|_| invalid("wealth.dt", "horizon must be a multiple of dt"))?;
        mvhawkes_core::hawkes::step_count(s.horizon, self.simulate.grid_dt)
            .map_err(|_| invalid("simulate.grid_dt", "horizon must be a multiple of grid_dt"))?;
        for (i, sw) in self.sensitivity.sweeps.iter().enumerate() {
            if sw.levels.len() < 2 {
                return Err(invalid(
                    format!("sensitivity.sweeps[{i}].levels"),
                    "need at least 2 levels",
                ));
            }
            if m != 1 {
                return Err(invalid(
                    "sensitivity.sweeps",
                    "sweeps are defined for one jump component",
                ));
            }
        }
        Ok(())
    }

    pub fn riskless_terminal(&self) -> f64 {
        self.frontier.x0 * (self.market.r * self.solver.horizon).exp()
    }

    /// Targets of the frontier table.
    pub fn xi_grid(&self) -> Vec<f64> {
        let f = &self.frontier;
        if !f.xi.is_empty() {
            return f.xi.clone();
        }
        let lo = self.riskless_terminal();
        let n = f.points;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    f.xi_max
                } else {
                    lo + (f.xi_max - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }

    pub fn out_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| {
            std::env::var_os(OUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("mvhawkes-out"))
        })
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.output
            .cache_dir
            .clone()
            .unwrap_or_else(|| self.out_dir().join("cache"))
    }

    /// Applies one seed to the solver, wealth simulation and path export.
    pub fn set_seed(&mut self, seed: u64) {
        self.solver.seed = seed;
        self.wealth.seed = seed;
        self.simulate.seed = seed;
    }
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> CliError {
    CliError::Core(mvhawkes_core::Error::InvalidParameter {
        key: key.into(),
        reason: reason.into(),
    })
}

/// Recursive table merge; non-table values in `top` replace those in `base`.
fn merge(base: &mut toml::Value, top: toml::Value) {
    match (base, top) {
        (toml::Value::Table(b), toml::Value::Table(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `a.b.c=value`; the value is read as TOML (`5`, `[0.1]`, `"x"`) and falls back to a bare string.
fn apply_override(root: &mut toml::Value, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{item}` is not of the form key=value")))?;
    let key = key.trim();
    let value = parse_value(raw.trim());
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{}` is not a table", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    Err(CliError::Config(format!("empty override key in `{item}`")))
}

fn parse_value(raw: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Wrap {
        v: toml::Value,
    }
    match toml::from_str::<Wrap>(&format!("v = {raw}")) {
        Ok(w) => w.v,
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_parameters() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.market, MarketParams::reference());
        assert_eq!(c.hawkes.alpha, vec![5.0]);
        assert_eq!(c.hawkes.beta, vec![vec![0.1]]);
        assert_eq!(c.hawkes.lambda_inf, vec![0.48]);
        assert_eq!(c.solver.horizon, 2.0);
        assert_eq!(c.frontier.x0, 1.0);
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let c = RunConfig::load(
            None,
            &[
                "hawkes.beta=[[0.0]]".into(),
                "solver.paths=7".into(),
                "frontier.xi=[1.1, 1.2]".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.hawkes.beta, vec![vec![0.0]]);
        assert_eq!(c.solver.paths, 7);
        assert_eq!(c.xi_grid(), vec![1.1, 1.2]);
    }

    #[test]
    fn scalar_override_of_vector_field_is_rejected() {
        assert!(RunConfig::load(None, &["hawkes.alpha=5".into()]).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::load(None, &["solver.pathz=7".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("pathz"));
    }

    #[test]
    fn validation_names_the_key() {
        let err = RunConfig::load(None, &["hawkes.alpha=[-1.0]".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("hawkes.alpha"), "{err}");
    }

    #[test]
    fn xi_grid_starts_at_riskless_wealth() {
        let c = RunConfig::default();
        let g = c.xi_grid();
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], c.riskless_terminal());
        assert_eq!(*g.last().unwrap(), 1.5);
    }

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::default();
        c.output.dir = Some("out".into());
        c.solver.growth_cap = Some(6.0);
        let text = c.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml().unwrap(), text);
    }
}
