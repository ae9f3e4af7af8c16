//! Run configuration in TOML.
//!
//! ```toml
//! scenario = "mms"            # mms | energy | gaussian-source | loh1-geometry
//! periodic = false            # lateral periodicity (mms, energy)
//! domain = "full"             # full | reduced (gaussian-source)
//! edge = "linear"             # transpose | norm-adjoint | preserving | linear
//! on_nonconvergence = "abort" # abort | warn
//!
//! [grid]                      # coarse laterals, both vertical counts
//! n1 = 25
//! n2 = 25
//! n3_coarse = 13
//! n3_fine = 25
//! n1_fine = 49                # optional; checked against 1:2 nesting
//!
//! [solver]                    # defaults depend on the scenario
//! method = "block-jacobi"     # cg | pcg | block-jacobi | lu
//! abs_tol = 1e-7
//!
//! [time]
//! cfl = 1.3
//! t_end = 0.5                 # scenario default when absent
//! dt = 0.01                   # optional fixed step
//!
//! [output]
//! dir = "output"
//! snapshot_stride = 0         # 0 disables snapshots
//! energy_stride = 10          # 0 disables the energy log
//! receivers = [[1.0, 2.0, 3.0]]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sbp_elastic::interface::EdgeRestriction;
use sbp_elastic::krylov::SolverConfig;
use sbp_elastic::scenarios::{GridSize, Scenario, ScenarioName, SourceParams};
use sbp_elastic::timestepper::TimeConfig;

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    #[default]
    Abort,
    Warn,
}

/// Domain size of the surface-source experiment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    #[default]
    Full,
    Reduced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n1: usize,
    pub n2: usize,
    pub n3_coarse: usize,
    pub n3_fine: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n1_fine: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2_fine: Option<usize>,
}

impl GridConfig {
    pub fn size(&self) -> GridSize {
        GridSize { n1: self.n1, n2: self.n2, n3_coarse: self.n3_coarse, n3_fine: self.n3_fine }
    }

    /// Fine lateral counts implied by 1:2 nesting.
    pub fn nested(&self, periodic: bool) -> (usize, usize) {
        let f = |n: usize| if periodic { 2 * n } else { 2 * n - 1 };
        (f(self.n1), f(self.n2))
    }

    pub fn validate(&self, periodic: bool) -> Result<()> {
        for (key, v) in [("grid.n1", self.n1), ("grid.n2", self.n2), ("grid.n3_coarse", self.n3_coarse), ("grid.n3_fine", self.n3_fine)] {
            if v < 8 {
                return Err(CliError::config(key, format!("at least 8 points are needed, got {v}")));
            }
        }
        let (e1, e2) = self.nested(periodic);
        let (g1, g2) = (self.n1_fine.unwrap_or(e1), self.n2_fine.unwrap_or(e2));
        if g1 != e1 || g2 != e2 {
            let (key, rule) = if g1 != e1 { ("grid.n1_fine", "n1") } else { ("grid.n2_fine", "n2") };
            let rule = if periodic { format!("2·{rule}") } else { format!("2·{rule} − 1") };
            return Err(CliError::config(
                key,
                format!(
                    "1:2 nesting requires fine lateral count = {rule}; coarse lattice is {}×{}, fine lattice is {g1}×{g2} (expected {e1}×{e2})",
                    self.n1, self.n2
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub cfl: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection { cfl: TimeConfig::default().cfl, t_end: None, dt: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub snapshot_stride: usize,
    pub energy_stride: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub receivers: Option<Vec<[f64; 3]>>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: PathBuf::from("output"), snapshot_stride: 0, energy_stride: 10, receivers: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic: Option<bool>,
    #[serde(default)]
    pub domain: Domain,
    #[serde(default)]
    pub edge: EdgeRestriction,
    #[serde(default)]
    pub on_nonconvergence: Policy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn new(scenario: ScenarioName) -> Self {
        RunConfig {
            scenario,
            periodic: None,
            domain: Domain::default(),
            edge: EdgeRestriction::default(),
            on_nonconvergence: Policy::default(),
            grid: None,
            solver: None,
            time: TimeSection::default(),
            output: OutputSpec::default(),
        }
    }

    /// Parses and validates TOML text; deserialization errors carry the key path.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::config("<document>", e.to_string()))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            CliError::config(if key == "." { "<document>".to_string() } else { key }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::config("<document>", e.to_string()))
    }

    /// Scenario with every override applied.
    pub fn scenario(&self) -> Scenario {
        let periodic = self.periodic.unwrap_or(false);
        let mut s = match self.scenario {
            ScenarioName::Mms => Scenario::mms_lateral(24, periodic),
            ScenarioName::Energy => Scenario::energy(periodic),
            ScenarioName::GaussianSource => Scenario::gaussian_source(match self.domain {
                Domain::Full => SourceParams::full(),
                Domain::Reduced => SourceParams::reduced(),
            }),
            ScenarioName::Loh1Geometry => Scenario::loh1_geometry(),
        };
        if let Some(g) = &self.grid {
            s.grid = g.size();
        }
        if let Some(t) = self.time.t_end {
            s.t_end = t;
        }
        if let Some(r) = &self.output.receivers {
            s.receivers = r.clone();
        }
        s
    }

    pub fn solver(&self) -> SolverConfig {
        self.solver.clone().unwrap_or_else(|| self.scenario().recommended_solver())
    }

    pub fn time(&self) -> TimeConfig {
        TimeConfig { cfl: self.time.cfl, t_end: self.scenario().t_end, dt: self.time.dt }
    }

    pub fn validate(&self) -> Result<()> {
        let periodic = self.periodic.unwrap_or(false);
        if periodic && !matches!(self.scenario, ScenarioName::Mms | ScenarioName::Energy) {
            return Err(CliError::config("periodic", format!("scenario `{}` has Dirichlet lateral faces only", self.scenario.as_str())));
        }
        if self.domain != Domain::Full && self.scenario != ScenarioName::GaussianSource {
            return Err(CliError::config("domain", "only the gaussian-source scenario has a reduced domain"));
        }
        if let Some(g) = &self.grid {
            g.validate(periodic)?;
        }
        let s = self.solver();
        if s.abs_tol.is_nan() || s.abs_tol < 0.0 {
            return Err(CliError::config("solver.abs_tol", format!("must be non-negative, got {}", s.abs_tol)));
        }
        if s.block_size == 0 || s.block_size % 3 != 0 {
            return Err(CliError::config("solver.block_size", format!("must be a positive multiple of 3, got {}", s.block_size)));
        }
        if s.max_iter == 0 {
            return Err(CliError::config("solver.max_iter", "must be positive"));
        }
        let t = TimeConfig { cfl: self.time.cfl, t_end: self.time.t_end.unwrap_or(1.0), dt: self.time.dt };
        t.validate().map_err(|e| CliError::config("time", e.to_string()))?;
        if let Some(r) = &self.output.receivers {
            if let Some(i) = r.iter().position(|x| x.iter().any(|v| !v.is_finite())) {
                return Err(CliError::config(format!("output.receivers[{i}]"), "coordinates must be finite"));
            }
        }
        Ok(())
    }

    /// Creates the output directory and checks that it accepts files.
    pub fn prepare_output(&self) -> Result<PathBuf> {
        prepare_dir(&self.output.dir)
    }
}

pub fn prepare_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let probe = dir.join(".write-test");
    std::fs::write(&probe, b"").map_err(|e| CliError::io(&probe, e))?;
    std::fs::remove_file(&probe).map_err(|e| CliError::io(&probe, e))?;
    Ok(dir.to_path_buf())
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    RunConfig::from_toml(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sbp_elastic::krylov::Method;

    const MINIMAL: &str = "scenario = \"mms\"\n[grid]\nn1 = 25\nn2 = 25\nn3_coarse = 13\nn3_fine = 25\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.time.cfl, 1.3);
        assert_eq!(c.solver().abs_tol, 1e-7);
        assert_eq!(c.solver().method, Method::BlockJacobi);
        assert_eq!(c.edge, EdgeRestriction::Linear);
        assert_eq!(c.time().t_end, 0.5);
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::from_toml(MINIMAL).unwrap();
        c.solver = Some(SolverConfig { rel_tol: Some(1e-9), ..Default::default() });
        c.output.receivers = Some(vec![[1.0, 2.0, 3.0]]);
        c.time.dt = Some(0.01);
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
        let plain = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(RunConfig::from_toml(&plain.to_toml().unwrap()).unwrap(), plain);
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let err = RunConfig::from_toml(&format!("{MINIMAL}[time]\ncfll = 1.0\n")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("time"), "{msg}");
        assert!(msg.contains("cfll"), "{msg}");
        let err = RunConfig::from_toml(&format!("bogus = 1\n{MINIMAL}")).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn nesting_violation_names_the_rule() {
        let err = RunConfig::from_toml(&format!("{MINIMAL}n1_fine = 50\n")).unwrap_err().to_string();
        assert!(err.contains("grid.n1_fine"), "{err}");
        assert!(err.contains("2·n1 − 1"), "{err}");
        assert!(err.contains("25×25") && err.contains("50×49"), "{err}");
        let ok = RunConfig::from_toml(&format!("{MINIMAL}n1_fine = 49\nn2_fine = 49\n"));
        assert!(ok.is_ok());
        let per = "scenario = \"mms\"\nperiodic = true\n[grid]\nn1 = 24\nn2 = 24\nn3_coarse = 13\nn3_fine = 25\nn2_fine = 47\n";
        assert!(RunConfig::from_toml(per).unwrap_err().to_string().contains("2·n2;"));
    }

    #[test]
    fn semantic_errors_carry_key_paths() {
        let bad = |extra: &str| RunConfig::from_toml(&format!("{MINIMAL}{extra}")).unwrap_err().to_string();
        assert!(bad("[solver]\nblock_size = 4\n").starts_with("solver.block_size"));
        assert!(bad("[time]\ncfl = -1.0\n").starts_with("time"));
        assert!(bad("[output]\nreceivers = [[1.0, nan, 0.0]]\n").starts_with("output.receivers[0]"));
        assert!(RunConfig::from_toml("scenario = \"loh1-geometry\"\nperiodic = true\n").unwrap_err().to_string().starts_with("periodic"));
        assert!(RunConfig::from_toml("scenario = \"mms\"\n[grid]\nn1 = 5\nn2 = 25\nn3_coarse = 13\nn3_fine = 25\n")
            .unwrap_err()
            .to_string()
            .starts_with("grid.n1"));
    }

    #[test]
    fn scenario_overrides_apply() {
        let c = RunConfig::from_toml(&format!("{MINIMAL}[time]\nt_end = 0.25\n[output]\nreceivers = [[0.5, 0.5, 0.5]]\n")).unwrap();
        let s = c.scenario();
        assert_eq!(s.t_end, 0.25);
        assert_eq!(s.receivers, vec![[0.5, 0.5, 0.5]]);
        assert_eq!(s.grid, GridSize::mms(24));
        let e = RunConfig::new(ScenarioName::Energy);
        assert_eq!(e.solver().method, Method::Lu);
    }
}
