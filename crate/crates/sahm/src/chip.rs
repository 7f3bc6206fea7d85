//! Chip configurations: baseline cores plus cores specialized for one
//! component, each with a fractional speedup that applies whenever the
//! running program's state has that component HIGH.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::Metric;

#[derive(Debug, Error)]
pub enum ChipError {
    #[error("chip must contain at least one core")]
    NoCores,
    #[error("core ids must be dense from 0; expected {expected}, found {found}")]
    NonDenseIds { expected: usize, found: usize },
    #[error("core {id}: speedup {speedup} must be finite and non-negative")]
    BadSpeedup { id: usize, speedup: f64 },
    #[error("core {id}: baseline cores cannot carry a speedup (got {speedup})")]
    BaselineSpeedup { id: usize, speedup: f64 },
    #[error("at least one speedup level is required")]
    NoLevels,
    #[error("speedup level {0} must be finite and non-negative")]
    BadLevel(f64),
    #[error("core group {index}: count must be at least 1")]
    EmptyGroup { index: usize },
    #[error("chip name must be non-empty")]
    EmptyName,
    #[error("unknown chip preset `{0}` (expected baseline, canonical30, or realistic39)")]
    UnknownPreset(String),
    #[error("failed to read chip file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse chip file {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
}

/// What a core is specialized for. Baseline cores have no specialization and
/// never match any state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Specialization {
    Baseline,
    Branch,
    L1i,
    L1d,
    L2,
}

impl Specialization {
    /// The four specialized kinds, in state-bit order.
    pub const SPECIALIZED: [Specialization; 4] = [
        Specialization::Branch,
        Specialization::L1i,
        Specialization::L1d,
        Specialization::L2,
    ];

    /// Metric whose HIGH bit this specialization serves.
    pub fn metric(self) -> Option<Metric> {
        match self {
            Specialization::Baseline => None,
            Specialization::Branch => Some(Metric::BranchMispredict),
            Specialization::L1i => Some(Metric::L1iMpki),
            Specialization::L1d => Some(Metric::L1dMiss),
            Specialization::L2 => Some(Metric::L2Miss),
        }
    }

    /// Short code used in generated config names.
    pub fn code(self) -> &'static str {
        match self {
            Specialization::Baseline => "B",
            Specialization::Branch => "Br",
            Specialization::L1i => "L1I",
            Specialization::L1d => "L1D",
            Specialization::L2 => "L2",
        }
    }
}

/// One core: its id, specialization, and fractional speedup (e.g. 0.30).
/// Baseline cores always have speedup 0. A specialized core may carry a zero
/// speedup; it still attracts matching programs but never accelerates them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoreSpec {
    pub id: usize,
    pub specialization: Specialization,
    pub speedup: f64,
}

/// A named set of cores with dense ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ChipConfig {
    name: String,
    cores: Vec<CoreSpec>,
}

/// JSON form of a chip: a list of core groups expanded in order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoreGroup {
    pub specialization: Specialization,
    pub speedup: f64,
    pub count: usize,
}

impl ChipConfig {
    pub fn new(name: String, cores: Vec<CoreSpec>) -> Result<Self, ChipError> {
        if name.is_empty() {
            return Err(ChipError::EmptyName);
        }
        if cores.is_empty() {
            return Err(ChipError::NoCores);
        }
        for (expected, core) in cores.iter().enumerate() {
            if core.id != expected {
                return Err(ChipError::NonDenseIds {
                    expected,
                    found: core.id,
                });
            }
            if !core.speedup.is_finite() || core.speedup < 0.0 {
                return Err(ChipError::BadSpeedup {
                    id: core.id,
                    speedup: core.speedup,
                });
            }
            if core.specialization == Specialization::Baseline && core.speedup != 0.0 {
                return Err(ChipError::BaselineSpeedup {
                    id: core.id,
                    speedup: core.speedup,
                });
            }
        }
        Ok(ChipConfig { name, cores })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn cores(&self) -> &[CoreSpec] {
        &self.cores
    }

    pub fn core_count(&self) -> usize {
        self.cores.len()
    }

    /// Largest speedup on the chip.
    pub fn max_speedup(&self) -> f64 {
        self.cores.iter().map(|c| c.speedup).fold(0.0, f64::max)
    }

    pub fn with_name(mut self, name: String) -> Result<Self, ChipError> {
        if name.is_empty() {
            return Err(ChipError::EmptyName);
        }
        self.name = name;
        Ok(self)
    }

    /// A single baseline core.
    pub fn baseline_only() -> Self {
        ChipConfig {
            name: "B".to_string(),
            cores: vec![CoreSpec {
                id: 0,
                specialization: Specialization::Baseline,
                speedup: 0.0,
            }],
        }
    }

    /// One baseline core plus one core per specialization, with speedups
    /// given in the order (branch, l1i, l1d, l2).
    pub fn canonical(speedups: [f64; 4]) -> Result<Self, ChipError> {
        let mut cores = vec![CoreSpec {
            id: 0,
            specialization: Specialization::Baseline,
            speedup: 0.0,
        }];
        for (spec, speedup) in Specialization::SPECIALIZED.iter().zip(speedups) {
            cores.push(CoreSpec {
                id: cores.len(),
                specialization: *spec,
                speedup,
            });
        }
        let name = config_name(&cores);
        ChipConfig::new(name, cores)
    }

    /// `baselines` baseline cores followed by `per_specialization` cores of
    /// each specialization (grouped, in state-bit order), all at `speedup`.
    pub fn realistic(
        per_specialization: usize,
        baselines: usize,
        speedup: f64,
    ) -> Result<Self, ChipError> {
        let mut cores = Vec::with_capacity(baselines + 4 * per_specialization);
        for _ in 0..baselines {
            cores.push(CoreSpec {
                id: cores.len(),
                specialization: Specialization::Baseline,
                speedup: 0.0,
            });
        }
        for spec in Specialization::SPECIALIZED {
            for _ in 0..per_specialization {
                cores.push(CoreSpec {
                    id: cores.len(),
                    specialization: spec,
                    speedup,
                });
            }
        }
        if cores.is_empty() {
            return Err(ChipError::NoCores);
        }
        let name = config_name(&cores);
        ChipConfig::new(name, cores)
    }

    /// Five cores, every specialized core at 30%.
    pub fn canonical30() -> Self {
        Self::canonical([0.3; 4])
            .and_then(|c| c.with_name("canonical30".to_string()))
            .expect("canonical30 preset is valid")
    }

    /// Thirty-nine cores: 7 baseline plus 8 of each specialization at 30%.
    pub fn realistic39() -> Self {
        Self::realistic(8, 7, 0.3)
            .and_then(|c| c.with_name("realistic39".to_string()))
            .expect("realistic39 preset is valid")
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "baseline" => Some(Self::baseline_only()),
            "canonical30" => Some(Self::canonical30()),
            "realistic39" => Some(Self::realistic39()),
            _ => None,
        }
    }

    /// Resolves a preset name or a JSON file path.
    pub fn resolve(arg: &str) -> Result<Self, ChipError> {
        if let Some(chip) = Self::preset(arg) {
            return Ok(chip);
        }
        let path = Path::new(arg);
        if !path.exists() {
            return Err(ChipError::UnknownPreset(arg.to_string()));
        }
        Self::load(path)
    }

    /// Expands a list of core groups into a chip.
    pub fn from_groups(name: String, groups: &[CoreGroup]) -> Result<Self, ChipError> {
        let mut cores = Vec::new();
        for (index, group) in groups.iter().enumerate() {
            if group.count == 0 {
                return Err(ChipError::EmptyGroup { index });
            }
            for _ in 0..group.count {
                cores.push(CoreSpec {
                    id: cores.len(),
                    specialization: group.specialization,
                    speedup: group.speedup,
                });
            }
        }
        ChipConfig::new(name, cores)
    }

    /// Collapses consecutive identical cores back into groups.
    pub fn to_groups(&self) -> Vec<CoreGroup> {
        let mut groups: Vec<CoreGroup> = Vec::new();
        for core in &self.cores {
            match groups.last_mut() {
                Some(last)
                    if last.specialization == core.specialization
                        && last.speedup == core.speedup =>
                {
                    last.count += 1;
                }
                _ => groups.push(CoreGroup {
                    specialization: core.specialization,
                    speedup: core.speedup,
                    count: 1,
                }),
            }
        }
        groups
    }

    pub fn load(path: &Path) -> Result<Self, ChipError> {
        let text = fs::read_to_string(path).map_err(|source| ChipError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let groups: Vec<CoreGroup> =
            serde_json::from_str(&text).map_err(|source| ChipError::Parse {
                path: path.display().to_string(),
                source,
            })?;
        let name = path
            .file_stem()
            .map(|stem| stem.to_string_lossy().to_string())
            .filter(|stem| !stem.is_empty())
            .unwrap_or_else(|| "chip".to_string());
        Self::from_groups(name, &groups)
    }

    pub fn save(&self, path: &Path) -> Result<(), ChipError> {
        let text = serde_json::to_string_pretty(&self.to_groups()).expect("core groups serialize");
        fs::write(path, text).map_err(|source| ChipError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Canonical config name: `B` for the bare baseline, otherwise `B` plus one
/// `<code><percent>` part per specialized core, e.g. `B+Br30+L2_30`. Codes
/// ending in a digit get an underscore before the percent. Repeated cores
/// gain an `x<count>` suffix.
fn config_name(cores: &[CoreSpec]) -> String {
    let baselines = cores
        .iter()
        .filter(|c| c.specialization == Specialization::Baseline)
        .count();
    let mut parts = vec![if baselines == 1 {
        "B".to_string()
    } else {
        format!("Bx{baselines}")
    }];
    let mut index = 0;
    let specialized: Vec<&CoreSpec> = cores
        .iter()
        .filter(|c| c.specialization != Specialization::Baseline)
        .collect();
    while index < specialized.len() {
        let core = specialized[index];
        let mut run = 1;
        while index + run < specialized.len()
            && specialized[index + run].specialization == core.specialization
            && specialized[index + run].speedup == core.speedup
        {
            run += 1;
        }
        let code = core.specialization.code();
        let sep = if code.ends_with(|c: char| c.is_ascii_digit()) {
            "_"
        } else {
            ""
        };
        let mut part = format!("{code}{sep}{}", format_percent(core.speedup));
        if run > 1 {
            part.push_str(&format!("x{run}"));
        }
        parts.push(part);
        index += run;
    }
    parts.join("+")
}

/// Formats a fractional speedup as a percentage without float noise:
/// 0.3 -> "30", 0.125 -> "12.5".
fn format_percent(speedup: f64) -> String {
    let percent = speedup * 100.0;
    let rounded = percent.round();
    if (percent - rounded).abs() < 1e-6 {
        format!("{}", rounded as i64)
    } else {
        let mut text = format!("{percent:.4}");
        while text.ends_with('0') {
            text.pop();
        }
        if text.ends_with('.') {
            text.pop();
        }
        text
    }
}

/// Enumerates the chip design space for the given speedup levels: the bare
/// baseline config plus, for every non-empty subset of the four
/// specializations, every assignment of a level to each member. Each
/// specialized config also carries one baseline core. Levels are sorted and
/// deduplicated, so the result has set semantics and a deterministic order.
pub fn enumerate_design_space(levels: &[f64]) -> Result<Vec<ChipConfig>, ChipError> {
    if levels.is_empty() {
        return Err(ChipError::NoLevels);
    }
    for &level in levels {
        if !level.is_finite() || level < 0.0 {
            return Err(ChipError::BadLevel(level));
        }
    }
    let mut levels = levels.to_vec();
    levels.sort_by(|a, b| a.partial_cmp(b).expect("levels are finite"));
    levels.dedup();

    let mut configs = vec![ChipConfig::baseline_only()];
    // Subsets ordered by size, then by member order within SPECIALIZED.
    for size in 1..=4usize {
        let members: Vec<Vec<Specialization>> = subsets_of_size(&Specialization::SPECIALIZED, size);
        for subset in members {
            let mut assignment = vec![0usize; subset.len()];
            loop {
                let mut cores = vec![CoreSpec {
                    id: 0,
                    specialization: Specialization::Baseline,
                    speedup: 0.0,
                }];
                for (spec, &level_index) in subset.iter().zip(assignment.iter()) {
                    cores.push(CoreSpec {
                        id: cores.len(),
                        specialization: *spec,
                        speedup: levels[level_index],
                    });
                }
                let name = config_name(&cores);
                configs.push(ChipConfig::new(name, cores)?);
                // Advance the mixed-radix assignment odometer.
                let mut position = assignment.len();
                loop {
                    if position == 0 {
                        break;
                    }
                    position -= 1;
                    assignment[position] += 1;
                    if assignment[position] < levels.len() {
                        break;
                    }
                    assignment[position] = 0;
                }
                if assignment.iter().all(|&i| i == 0) {
                    break;
                }
            }
        }
    }
    Ok(configs)
}

fn subsets_of_size(items: &[Specialization; 4], size: usize) -> Vec<Vec<Specialization>> {
    let mut result = Vec::new();
    let n = items.len();
    for mask in 1u32..(1 << n) {
        if mask.count_ones() as usize != size {
            continue;
        }
        let subset: Vec<Specialization> = (0..n)
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| items[i])
            .collect();
        result.push(subset);
    }
    result.sort_by_key(|subset| {
        subset
            .iter()
            .map(|s| {
                Specialization::SPECIALIZED
                    .iter()
                    .position(|x| x == s)
                    .unwrap()
            })
            .collect::<Vec<_>>()
    });
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn enumerate_three_levels_has_256_configs() {
        let configs = enumerate_design_space(&[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(configs.len(), 256);
        let names: HashSet<&str> = configs.iter().map(|c| c.name()).collect();
        assert_eq!(names.len(), 256, "config names must be unique");
    }

    #[test]
    fn enumerate_single_level_has_16_configs() {
        let configs = enumerate_design_space(&[0.3]).unwrap();
        assert_eq!(configs.len(), 16);
    }

    #[test]
    fn enumerate_count_follows_subset_formula() {
        // 1 + sum over subset sizes k of C(4,k) * levels^k.
        for levels in 1..=3usize {
            let input: Vec<f64> = (1..=levels).map(|i| i as f64 / 10.0).collect();
            let expected: usize = 1
                + (1..=4)
                    .map(|k| binomial(4, k) * levels.pow(k as u32))
                    .sum::<usize>();
            assert_eq!(enumerate_design_space(&input).unwrap().len(), expected);
        }
    }

    fn binomial(n: usize, k: usize) -> usize {
        match k {
            1 => n,
            2 => n * (n - 1) / 2,
            3 => n * (n - 1) * (n - 2) / 6,
            4 => 1,
            _ => panic!("unused"),
        }
    }

    #[test]
    fn enumerate_dedupes_levels() {
        let configs = enumerate_design_space(&[0.3, 0.3]).unwrap();
        assert_eq!(configs.len(), 16);
    }

    #[test]
    fn enumerate_rejects_empty_levels() {
        assert!(matches!(
            enumerate_design_space(&[]),
            Err(ChipError::NoLevels)
        ));
    }

    #[test]
    fn enumerate_first_config_is_baseline() {
        let configs = enumerate_design_space(&[0.3]).unwrap();
        assert_eq!(configs[0].name(), "B");
        assert_eq!(configs[0].core_count(), 1);
        // Every other config carries exactly one baseline core.
        for config in &configs[1..] {
            let baselines = config
                .cores()
                .iter()
                .filter(|c| c.specialization == Specialization::Baseline)
                .count();
            assert_eq!(baselines, 1);
        }
    }

    #[test]
    fn config_names_follow_convention() {
        let chip = ChipConfig::canonical([0.3, 0.3, 0.3, 0.3]).unwrap();
        assert_eq!(chip.name(), "B+Br30+L1I30+L1D30+L2_30");
        let pair = ChipConfig::new(
            "x".into(),
            vec![
                CoreSpec {
                    id: 0,
                    specialization: Specialization::Baseline,
                    speedup: 0.0,
                },
                CoreSpec {
                    id: 1,
                    specialization: Specialization::Branch,
                    speedup: 0.3,
                },
                CoreSpec {
                    id: 2,
                    specialization: Specialization::L2,
                    speedup: 0.3,
                },
            ],
        )
        .unwrap();
        assert_eq!(super::config_name(pair.cores()), "B+Br30+L2_30");
    }

    #[test]
    fn percent_formatting_has_no_float_noise() {
        assert_eq!(format_percent(0.3), "30");
        assert_eq!(format_percent(0.1), "10");
        assert_eq!(format_percent(0.125), "12.5");
        assert_eq!(format_percent(0.0), "0");
    }

    #[test]
    fn canonical_orders_speedups_by_bit() {
        let chip = ChipConfig::canonical([0.1, 0.2, 0.25, 0.3]).unwrap();
        let speedups: Vec<f64> = chip.cores().iter().map(|c| c.speedup).collect();
        assert_eq!(speedups, [0.0, 0.1, 0.2, 0.25, 0.3]);
        assert_eq!(chip.cores()[1].specialization, Specialization::Branch);
        assert_eq!(chip.cores()[4].specialization, Specialization::L2);
    }

    #[test]
    fn canonical_allows_zero_speedup_specialized_cores() {
        let chip = ChipConfig::canonical([0.0, 0.3, 0.3, 0.3]).unwrap();
        assert_eq!(chip.cores()[1].speedup, 0.0);
        assert_eq!(chip.cores()[1].specialization, Specialization::Branch);
    }

    #[test]
    fn realistic_counts_and_order() {
        let chip = ChipConfig::realistic(8, 7, 0.3).unwrap();
        assert_eq!(chip.core_count(), 39);
        assert!(chip.cores()[..7]
            .iter()
            .all(|c| c.specialization == Specialization::Baseline));
        assert!(chip.cores()[7..15]
            .iter()
            .all(|c| c.specialization == Specialization::Branch));
        assert!(chip.cores()[31..]
            .iter()
            .all(|c| c.specialization == Specialization::L2));
    }

    #[test]
    fn realistic_one_of_each_matches_canonical() {
        let realistic = ChipConfig::realistic(1, 1, 0.3).unwrap();
        let canonical = ChipConfig::canonical([0.3; 4]).unwrap();
        assert_eq!(realistic.cores(), canonical.cores());
    }

    #[test]
    fn realistic_zero_specialized_is_baseline_pool() {
        let chip = ChipConfig::realistic(0, 3, 0.3).unwrap();
        assert_eq!(chip.core_count(), 3);
        assert_eq!(chip.max_speedup(), 0.0);
    }

    #[test]
    fn baseline_cores_cannot_carry_speedup() {
        let result = ChipConfig::new(
            "bad".into(),
            vec![CoreSpec {
                id: 0,
                specialization: Specialization::Baseline,
                speedup: 0.1,
            }],
        );
        assert!(matches!(result, Err(ChipError::BaselineSpeedup { .. })));
    }

    #[test]
    fn ids_must_be_dense() {
        let result = ChipConfig::new(
            "bad".into(),
            vec![CoreSpec {
                id: 1,
                specialization: Specialization::Baseline,
                speedup: 0.0,
            }],
        );
        assert!(matches!(result, Err(ChipError::NonDenseIds { .. })));
    }

    #[test]
    fn groups_round_trip() {
        let chip = ChipConfig::realistic39();
        let groups = chip.to_groups();
        assert_eq!(groups.len(), 5);
        assert_eq!(groups[0].count, 7);
        let back = ChipConfig::from_groups("realistic39".into(), &groups).unwrap();
        assert_eq!(back, chip);
    }

    #[test]
    fn json_round_trip() {
        let chip = ChipConfig::canonical30();
        let text = serde_json::to_string(&chip.to_groups()).unwrap();
        assert!(text.contains("\"branch\""));
        let groups: Vec<CoreGroup> = serde_json::from_str(&text).unwrap();
        let back = ChipConfig::from_groups("canonical30".into(), &groups).unwrap();
        assert_eq!(back, chip);
    }

    #[test]
    fn presets_resolve() {
        assert_eq!(ChipConfig::preset("canonical30").unwrap().core_count(), 5);
        assert_eq!(ChipConfig::preset("realistic39").unwrap().core_count(), 39);
        assert_eq!(ChipConfig::preset("baseline").unwrap().core_count(), 1);
        assert!(ChipConfig::preset("other").is_none());
        assert!(matches!(
            ChipConfig::resolve("definitely-not-a-file"),
            Err(ChipError::UnknownPreset(_))
        ));
    }

    #[test]
    fn max_speedup_over_cores() {
        let chip = ChipConfig::canonical([0.1, 0.3, 0.2, 0.25]).unwrap();
        assert_eq!(chip.max_speedup(), 0.3);
        assert_eq!(ChipConfig::baseline_only().max_speedup(), 0.0);
    }
}
