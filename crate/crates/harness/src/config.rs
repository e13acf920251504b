//! Experiment configuration: a TOML document with one section per module.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RteForward,
    RteGradient,
    RteScaling,
    DsmcForward,
    DsmcGradient,
    DsmcScaling,
    McDemo,
    Validate,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::RteForward => "rte_forward",
            Self::RteGradient => "rte_gradient",
            Self::RteScaling => "rte_scaling",
            Self::DsmcForward => "dsmc_forward",
            Self::DsmcGradient => "dsmc_gradient",
            Self::DsmcScaling => "dsmc_scaling",
            Self::McDemo => "mc_demo",
            Self::Validate => "validate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RteMethod {
    POtd,
    PDto,
    Fvm,
    All,
}

impl RteMethod {
    pub fn p_otd(self) -> bool {
        matches!(self, Self::POtd | Self::All)
    }

    pub fn p_dto(self) -> bool {
        matches!(self, Self::PDto | Self::All)
    }

    pub fn fvm(self) -> bool {
        matches!(self, Self::Fvm | Self::All)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DsmcMethod {
    Adjoint,
    Fd,
    Both,
}

impl DsmcMethod {
    pub fn adjoint(self) -> bool {
        matches!(self, Self::Adjoint | Self::Both)
    }

    pub fn fd(self) -> bool {
        matches!(self, Self::Fd | Self::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    Maxwellian,
    Vhs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableChoice {
    /// φ(v) = v_x⁴
    Vx4,
    /// φ(v) = |v|²
    Speed2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingTarget {
    Rte,
    Dsmc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub repeats: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self { kind: ExperimentKind::RteGradient, seed: 1, repeats: 1, output_dir: PathBuf::from("adjmc-out") }
    }
}

/// Particle RTE run on the benchmark problem: σ(x) = 2 + 2e^{−4x²},
/// two Gaussian bumps in x, uniform velocities, r = v² on x < 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RteSection {
    pub method: RteMethod,
    pub x_lo: f64,
    pub x_hi: f64,
    pub v_lo: f64,
    pub v_hi: f64,
    pub t_final: f64,
    pub steps: usize,
    pub n_particles: usize,
    /// Cells of the piecewise-constant σ and of the gradient output.
    pub sigma_cells: usize,
    pub v_bins: usize,
    pub block: usize,
}

impl Default for RteSection {
    fn default() -> Self {
        Self {
            method: RteMethod::All,
            x_lo: -2.0,
            x_hi: 2.0,
            v_lo: -1.0,
            v_hi: 1.0,
            t_final: 0.5,
            steps: 50,
            n_particles: 100_000,
            sigma_cells: 80,
            v_bins: 20,
            block: 1 << 16,
        }
    }
}

/// Finite-volume reference (fine) and comparison (coarse) grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FvmSection {
    pub ref_nx: usize,
    pub ref_nv: usize,
    pub ref_steps: usize,
    pub coarse_nx: usize,
    pub coarse_nv: usize,
    pub coarse_steps: usize,
}

impl Default for FvmSection {
    fn default() -> Self {
        Self { ref_nx: 800, ref_nv: 40, ref_steps: 500, coarse_nx: 80, coarse_nv: 40, coarse_steps: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DsmcSection {
    pub method: DsmcMethod,
    pub kernel: KernelChoice,
    /// VHS prefactor; the default matches the Maxwellian value 1/(4π).
    pub vhs_c: f64,
    pub vhs_beta: f64,
    pub theta: Vec<f64>,
    pub observable: ObservableChoice,
    pub n_particles: usize,
    pub dt: f64,
    pub t_final: f64,
    pub fd_step: f64,
    /// Record moments every this many steps in `dsmc_forward`.
    pub moment_stride: usize,
}

impl Default for DsmcSection {
    fn default() -> Self {
        Self {
            method: DsmcMethod::Both,
            kernel: KernelChoice::Maxwellian,
            vhs_c: adjmc::dsmc::Maxwellian::VALUE,
            vhs_beta: 0.5,
            theta: vec![0.5, 1.0, 1.0],
            observable: ObservableChoice::Vx4,
            n_particles: 100_000,
            dt: 0.1,
            t_final: 2.0,
            fd_step: 1e-2,
            moment_stride: 1,
        }
    }
}

impl DsmcSection {
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingSection {
    pub target: ScalingTarget,
    pub n_values: Vec<usize>,
    /// DSMC only: ensemble size of the high-N reference gradient.
    pub reference_n: usize,
}

impl Default for ScalingSection {
    fn default() -> Self {
        Self { target: ScalingTarget::Rte, n_values: (11..=17).map(|k| 1usize << k).collect(), reference_n: 1 << 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McDemoSection {
    pub sizes: Vec<usize>,
    pub theta: f64,
    pub fd_step: f64,
    pub fd_replicates: usize,
}

impl Default for McDemoSection {
    fn default() -> Self {
        Self { sizes: vec![1_000, 10_000, 100_000], theta: 0.7, fd_step: 1e-2, fd_replicates: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub rte: RteSection,
    pub fvm: FvmSection,
    pub dsmc: DsmcSection,
    pub scaling: ScalingSection,
    pub mc_demo: McDemoSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: Table = text.parse().context("config is not valid TOML")?;
        Self::from_table(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Layers the keys present in a TOML document over `self`; keys the
    /// document leaves out keep their current values.
    pub fn merge_toml_str(&self, text: &str) -> Result<Self> {
        let patch: Table = text.parse().context("config is not valid TOML")?;
        let mut table = self.to_table()?;
        let mut leaves = Vec::new();
        collect_leaves(&patch, "", &mut leaves);
        for (path, value) in leaves {
            set_path(&mut table, &path, value)?;
        }
        Self::from_table(table)
    }

    pub fn merge_file(&self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        self.merge_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    fn from_table(table: Table) -> Result<Self> {
        let cfg: Self = Value::Table(table).try_into().context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `section.key=value` overrides and re-validates. Values are
    /// parsed as TOML, falling back to a bare string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut table = self.to_table()?;
        for o in overrides {
            let o = o.as_ref();
            let (path, raw) = o.split_once('=').with_context(|| format!("override `{o}` is not key=value"))?;
            set_path(&mut table, path.trim(), parse_value(raw.trim()))?;
        }
        Self::from_table(table)
    }

    pub fn to_table(&self) -> Result<Table> {
        match Value::try_from(self)? {
            Value::Table(t) => Ok(t),
            _ => bail!("configuration did not serialize to a table"),
        }
    }

    /// Every setting as sorted `section.key=value` pairs.
    pub fn flatten(&self) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        flatten_into(&self.to_table()?, "", &mut out);
        out.sort();
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.experiment.repeats >= 1, "experiment.repeats: must be at least 1");
        let r = &self.rte;
        ensure!(r.x_hi > r.x_lo, "rte.x_hi: must exceed rte.x_lo");
        ensure!(r.v_hi > r.v_lo, "rte.v_hi: must exceed rte.v_lo");
        ensure!(r.t_final >= 0.0 && r.t_final.is_finite(), "rte.t_final: must be finite and nonnegative");
        ensure!(r.steps >= 1, "rte.steps: must be at least 1");
        ensure!(r.n_particles >= 1, "rte.n_particles: must be at least 1");
        ensure!(r.sigma_cells >= 1, "rte.sigma_cells: must be at least 1");
        ensure!(r.v_bins >= 1, "rte.v_bins: must be at least 1");
        ensure!(r.block >= 1, "rte.block: must be at least 1");
        let f = &self.fvm;
        for (name, v) in [
            ("fvm.ref_nx", f.ref_nx),
            ("fvm.ref_nv", f.ref_nv),
            ("fvm.ref_steps", f.ref_steps),
            ("fvm.coarse_nx", f.coarse_nx),
            ("fvm.coarse_nv", f.coarse_nv),
            ("fvm.coarse_steps", f.coarse_steps),
        ] {
            ensure!(v >= 1, "{name}: must be at least 1");
        }
        let d = &self.dsmc;
        ensure!(d.theta.len() == 3, "dsmc.theta: expected 3 temperatures, got {}", d.theta.len());
        ensure!(d.theta.iter().all(|&t| t > 0.0 && t.is_finite()), "dsmc.theta: temperatures must be positive");
        ensure!(d.n_particles >= 2 && d.n_particles.is_multiple_of(2), "dsmc.n_particles: must be even and at least 2");
        ensure!(d.dt > 0.0 && d.dt.is_finite(), "dsmc.dt: must be positive");
        ensure!(d.t_final >= 0.0 && d.t_final.is_finite(), "dsmc.t_final: must be finite and nonnegative");
        ensure!(
            (d.t_final / d.dt - d.steps() as f64).abs() < 1e-9,
            "dsmc.t_final: must be a whole number of dsmc.dt steps"
        );
        ensure!(d.fd_step > 0.0 && d.fd_step.is_finite(), "dsmc.fd_step: must be positive");
        ensure!(d.moment_stride >= 1, "dsmc.moment_stride: must be at least 1");
        ensure!(d.vhs_c > 0.0 && d.vhs_beta >= 0.0, "dsmc.vhs_c / dsmc.vhs_beta: invalid kernel parameters");
        let s = &self.scaling;
        ensure!(s.n_values.iter().all(|&n| n >= 2), "scaling.n_values: sizes must be at least 2");
        ensure!(s.reference_n >= 2, "scaling.reference_n: must be at least 2");
        let m = &self.mc_demo;
        ensure!(!m.sizes.is_empty() && m.sizes.iter().all(|&n| n >= 2), "mc_demo.sizes: need sizes of at least 2");
        ensure!(m.theta > 0.0, "mc_demo.theta: must be positive");
        ensure!(m.fd_step > 0.0, "mc_demo.fd_step: must be positive");
        ensure!(m.fd_replicates >= 2, "mc_demo.fd_replicates: must be at least 2");
        Ok(())
    }
}

fn parse_value(raw: &str) -> Value {
    // parse as the right-hand side of a one-line document
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

fn set_path(table: &mut Table, path: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let leaf = parts.pop().filter(|s| !s.is_empty()).with_context(|| format!("empty override key `{path}`"))?;
    let mut cur = table;
    for p in parts {
        cur = match cur.get_mut(p) {
            Some(Value::Table(t)) => t,
            _ => bail!("{path}: unknown section `{p}`"),
        };
    }
    ensure!(cur.contains_key(leaf), "{path}: unknown key");
    cur.insert(leaf.to_string(), value);
    Ok(())
}

fn collect_leaves(table: &Table, prefix: &str, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => collect_leaves(t, &key, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn flatten_into(table: &Table, prefix: &str, out: &mut Vec<(String, String)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten_into(t, &key, out),
            Value::String(s) => out.push((key, s.clone())),
            other => out.push((key, other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let cfg = ExperimentConfig::from_toml_str("[experiment]\nkind = \"dsmc_gradient\"\n[dsmc]\nkernel = \"vhs\"\n").unwrap();
        assert_eq!(cfg.experiment.kind, ExperimentKind::DsmcGradient);
        assert_eq!(cfg.dsmc.kernel, KernelChoice::Vhs);
        assert_eq!(cfg.dsmc.theta, vec![0.5, 1.0, 1.0]);
        assert_eq!(cfg.dsmc.steps(), 20);
    }

    #[test]
    fn merged_files_keep_unmentioned_settings() {
        let base = ExperimentConfig::default().with_overrides(&["rte.n_particles=1234", "experiment.repeats=7"]).unwrap();
        let cfg = base.merge_toml_str("[experiment]\nseed = 5\n[rte]\nsteps = 10\n").unwrap();
        assert_eq!((cfg.experiment.seed, cfg.rte.steps), (5, 10));
        assert_eq!((cfg.rte.n_particles, cfg.experiment.repeats), (1234, 7));
        assert!(base.merge_toml_str("[rte]\nparticles = 3\n").is_err());
    }

    #[test]
    fn unknown_keys_name_their_path() {
        let err = ExperimentConfig::from_toml_str("[rte]\nparticles = 3\n").unwrap_err();
        assert!(format!("{err:#}").contains("particles"), "{err:#}");
        let err = ExperimentConfig::default().with_overrides(&["dsmc.nope=1"]).unwrap_err();
        assert!(format!("{err:#}").contains("dsmc.nope"));
    }

    #[test]
    fn overrides_are_typed() {
        let cfg = ExperimentConfig::default()
            .with_overrides(&["rte.n_particles=4096", "dsmc.kernel=vhs", "dsmc.theta=[1.0, 2.0, 3.0]", "rte.method=p-dto"])
            .unwrap();
        assert_eq!(cfg.rte.n_particles, 4096);
        assert_eq!(cfg.dsmc.kernel, KernelChoice::Vhs);
        assert_eq!(cfg.dsmc.theta, vec![1.0, 2.0, 3.0]);
        assert_eq!(cfg.rte.method, RteMethod::PDto);
    }

    #[test]
    fn invalid_values_are_rejected_with_field_path() {
        let err = ExperimentConfig::default().with_overrides(&["experiment.repeats=0"]).unwrap_err();
        assert!(format!("{err:#}").contains("experiment.repeats"));
        let err = ExperimentConfig::default().with_overrides(&["dsmc.n_particles=7"]).unwrap_err();
        assert!(format!("{err:#}").contains("dsmc.n_particles"));
    }

    #[test]
    fn flatten_lists_every_section() {
        let flat = ExperimentConfig::default().flatten().unwrap();
        assert!(flat.iter().any(|(k, v)| k == "experiment.kind" && v == "rte_gradient"));
        assert!(flat.iter().any(|(k, _)| k == "fvm.ref_nx"));
        assert!(flat.windows(2).all(|w| w[0] <= w[1]));
    }
}
