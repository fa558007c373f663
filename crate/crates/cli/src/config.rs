//! Experiment configuration: one TOML file, one table per experiment.
//!
//! Every knob has a default, so an empty file is a valid configuration.
//! Unknown keys are rejected with the offending key named in the error.

use std::fmt;
use std::path::{Path, PathBuf};

use mclab_core::hyperbolicity::Margin;
use mclab_core::stochastic::NoiseKind;
use mclab_core::SkewProductMap;
use serde::{Deserialize, Serialize};

/// Raised for malformed or invalid configuration; the runner exits with 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed; every random stream is derived from it.
    pub seed: u64,
    pub map: MapConfig,
    pub verify_ph: VerifyPhConfig,
    pub lyapunov: LyapunovConfig,
    pub mostly_contracting: MostlyContractingConfig,
    pub pliss: PlissConfig,
    pub disintegrate: DisintegrateConfig,
    pub toy_check: ToyCheckConfig,
    pub physical: PhysicalConfig,
    pub basins: BasinsConfig,
    pub holonomy: HolonomyConfig,
    pub stochastic: StochasticConfig,
    pub sweep: SweepConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    KanCylinder,
    KanTorus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    pub kind: MapKind,
    pub d: u32,
    pub alpha: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            kind: MapKind::KanCylinder,
            d: 3,
            alpha: 0.5,
        }
    }
}

impl MapConfig {
    pub fn build(&self) -> Result<SkewProductMap, ConfigError> {
        self.build_with_alpha(self.alpha)
    }

    /// The same family at another coupling.
    pub fn build_with_alpha(&self, alpha: f64) -> Result<SkewProductMap, ConfigError> {
        let cyl = SkewProductMap::kan_cylinder(self.d, alpha).map_err(|e| ConfigError(format!("map: {e}")))?;
        match self.kind {
            MapKind::KanCylinder => Ok(cyl),
            MapKind::KanTorus => cyl.torus_double().map_err(|e| ConfigError(format!("map: {e}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyPhConfig {
    pub samples: usize,
    /// Cone aperture; the self-consistent automatic aperture when absent.
    pub aperture: Option<f64>,
}

impl Default for VerifyPhConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            aperture: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovConfig {
    pub n: usize,
    pub theta: f64,
    pub t: f64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self {
            n: 1_000_000,
            theta: 0.1,
            t: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginKind {
    Fixed,
    Stderr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MostlyContractingConfig {
    pub curves: usize,
    pub n: usize,
    pub m_points: usize,
    /// Carrier radius and `2^k` node resolution of the random curves.
    pub radius: f64,
    pub nodes_log2: u32,
    pub margin_kind: MarginKind,
    pub margin: f64,
}

impl Default for MostlyContractingConfig {
    fn default() -> Self {
        Self {
            curves: 5,
            n: 10_000,
            m_points: 500,
            radius: 0.1,
            nodes_log2: 8,
            margin_kind: MarginKind::Stderr,
            margin: 10.0,
        }
    }
}

impl MostlyContractingConfig {
    pub fn margin(&self) -> Margin {
        match self.margin_kind {
            MarginKind::Fixed => Margin::Fixed(self.margin),
            MarginKind::Stderr => Margin::Stderr(self.margin),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlissConfig {
    /// Block length `N`.
    pub block: usize,
    pub eps: f64,
    pub depth: usize,
    /// Orbit points tested for membership.
    pub points: usize,
    /// Steps between consecutive tested points along each orbit.
    pub stride: usize,
    /// Independent orbits the points are spread over.
    pub orbits: usize,
    /// Burn-in before the first tested point of each orbit.
    pub burn: usize,
}

impl Default for PlissConfig {
    fn default() -> Self {
        Self {
            block: 20,
            eps: 0.01,
            depth: 50,
            points: 4000,
            stride: 97,
            orbits: 16,
            burn: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisintegrateConfig {
    pub n: usize,
    pub a: f64,
    /// Carrier resolution `2^k` for the built-in source curve.
    pub nodes_log2: u32,
    pub max_nodes: usize,
    pub nodes_per_radius: usize,
    /// Midpoint samples of the direct-pushforward oracle.
    pub oracle_samples: usize,
    pub degree: usize,
    pub density_bound: f64,
    /// Optional carrier CSV replacing the built-in source.
    pub input: Option<PathBuf>,
}

impl Default for DisintegrateConfig {
    fn default() -> Self {
        Self {
            n: 5,
            a: 0.05,
            nodes_log2: 12,
            max_nodes: mclab_core::carriers::MAX_WORKING_NODES,
            nodes_per_radius: 8,
            oracle_samples: 1 << 20,
            degree: mclab_core::measures::DEFAULT_DEGREE,
            density_bound: 2.0,
            input: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyCheckConfig {
    pub points: usize,
    pub intervals: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for ToyCheckConfig {
    fn default() -> Self {
        Self {
            points: 100,
            intervals: 20,
            lo: 0.1,
            hi: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalConfig {
    pub grid: usize,
    pub n: usize,
    pub tol_conv: f64,
    pub delta_cluster: f64,
    pub degree: usize,
}

impl Default for PhysicalConfig {
    fn default() -> Self {
        Self {
            grid: 200,
            n: 100_000,
            tol_conv: 0.02,
            delta_cluster: 0.2,
            degree: mclab_core::measures::DEFAULT_DEGREE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasinsConfig {
    /// Side of the sub-blocks scanned for mixed labels.
    pub block: usize,
    /// Fraction of mixed blocks reported as intermingled.
    pub threshold: f64,
}

impl Default for BasinsConfig {
    fn default() -> Self {
        Self {
            block: 10,
            threshold: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HolonomyConfig {
    pub n: usize,
    /// Common base centre and radius of the two straight carriers.
    pub theta: f64,
    pub radius: f64,
    pub nodes_log2: u32,
    pub t1: f64,
    pub slope1: f64,
    pub t2: f64,
    pub slope2: f64,
    pub samples: usize,
    pub windows: usize,
    pub contraction: f64,
}

impl Default for HolonomyConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            theta: 0.4,
            radius: 0.08,
            nodes_log2: 6,
            t1: 0.06,
            slope1: 0.4,
            t2: 0.062,
            slope2: 0.403,
            samples: 257,
            windows: 16,
            contraction: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StochasticConfig {
    /// Strictly decreasing noise amplitudes.
    pub eps_list: Vec<f64>,
    pub kind: NoiseKind,
    pub n_burn: usize,
    pub n_samp: usize,
    pub chains: usize,
    /// Physical-measure JSON supplying the simplex vertices; extracted
    /// afresh from the `physical` table when absent.
    pub report: Option<PathBuf>,
}

impl Default for StochasticConfig {
    fn default() -> Self {
        Self {
            eps_list: vec![0.04, 0.02, 0.01, 0.005],
            kind: NoiseKind::FiberOnly,
            n_burn: 50_000,
            n_samp: 500_000,
            chains: 16,
            report: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub steps: usize,
    pub grid: usize,
    pub n: usize,
    pub tol_conv: f64,
    pub delta_cluster: f64,
    pub degree: usize,
    /// Largest adjacent centroid distance accepted where `N` is constant.
    pub continuity_tol: f64,
    /// Rows whose unresolved fraction exceeds this are flagged.
    pub unresolved_threshold: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            alpha_min: 0.2,
            alpha_max: 0.6,
            steps: 9,
            grid: 40,
            n: 100_000,
            tol_conv: 0.02,
            delta_cluster: 0.2,
            degree: mclab_core::measures::DEFAULT_DEGREE,
            continuity_tol: 0.05,
            unresolved_threshold: 0.05,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("invalid config: {}", e.message().trim())))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = ExperimentConfig::parse("[map]\nalhpa = 0.5\n").unwrap_err();
        assert!(e.0.contains("alhpa"), "{e}");
        let e = ExperimentConfig::parse("[lyapnuov]\nn = 3\n").unwrap_err();
        assert!(e.0.contains("lyapnuov"), "{e}");
    }

    #[test]
    fn sections_override_defaults() {
        let c = ExperimentConfig::parse(
            "seed = 9\n[map]\nalpha = 0.3\nkind = \"kan_torus\"\n[stochastic]\nkind = \"full\"\n",
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.map.alpha, 0.3);
        assert_eq!(c.map.kind, MapKind::KanTorus);
        assert_eq!(c.stochastic.kind, NoiseKind::Full);
        assert_eq!(c.map.d, 3);
    }

    #[test]
    fn invalid_map_is_a_config_error() {
        let c = ExperimentConfig::parse("[map]\nalpha = 1.5\n").unwrap();
        assert!(c.map.build().unwrap_err().0.contains("alpha"));
    }
}
