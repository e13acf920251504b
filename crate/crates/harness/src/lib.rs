//! Configuration, experiment orchestration and CSV output for the `adjmc`
//! command-line tool.

pub mod config;
pub mod experiments;
pub mod output;
pub mod problems;
pub mod scaling;
pub mod validate;

pub use config::{ExperimentConfig, ExperimentKind};
pub use experiments::{run_experiment, RepeatSeries, RunReport, Timing};
pub use scaling::{scaling_study, ScalingRow, ScalingTable};

/// Named configurations shipped with the tool.
pub const PRESETS: &[(&str, &str)] = &[
    ("rte_fig4", include_str!("../presets/rte_fig4.toml")),
    ("dsmc_table2_desk", include_str!("../presets/dsmc_table2_desk.toml")),
];

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name)?;
    ExperimentConfig::from_toml_str(text).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for (name, _) in PRESETS {
            assert!(preset(name).is_some(), "{name}");
        }
        assert!(preset("missing").is_none());
    }
}
