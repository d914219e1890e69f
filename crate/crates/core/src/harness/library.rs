//! Scenario files shipped with the crate.

use super::{HarnessError, ScenarioConfig};

/// `(name, TOML text)` of every bundled scenario.
pub const BUILTIN: &[(&str, &str)] = &[
    ("fully_connected_baseline", include_str!("../../scenarios/fully_connected_baseline.toml")),
    ("lemma2_3f_impossible", include_str!("../../scenarios/lemma2_3f_impossible.toml")),
    ("necessity_f_proper", include_str!("../../scenarios/necessity_f_proper.toml")),
    ("necessity_improper_mix", include_str!("../../scenarios/necessity_improper_mix.toml")),
    ("partition_never", include_str!("../../scenarios/partition_never.toml")),
    ("fig1_scripted_path", include_str!("../../scenarios/fig1_scripted_path.toml")),
    ("over_budget_control", include_str!("../../scenarios/over_budget_control.toml")),
    ("random_mobile", include_str!("../../scenarios/random_mobile.toml")),
];

/// Sweep grid bundled next to the scenarios.
pub const RC_GRID: &str = include_str!("../../scenarios/rc_grid.toml");

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(name, _)| *name)
}

pub fn builtin_text(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn builtin(name: &str) -> Result<ScenarioConfig, HarnessError> {
    let text = builtin_text(name).ok_or_else(|| HarnessError::UnknownScenario(name.to_string()))?;
    ScenarioConfig::from_toml(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_parses_and_validates_under_its_own_name() {
        for (name, _) in BUILTIN {
            let cfg = builtin(name).unwrap();
            assert_eq!(cfg.name, *name);
            cfg.validate().unwrap();
        }
        assert!(matches!(builtin("nope"), Err(HarnessError::UnknownScenario(_))));
    }
}
