use std::path::PathBuf;

use coded_mrpt::cluster::{ClusterConfig, ExecutionMode, MasterCost, Strategy, StragglerModel, TimingMode};
use coded_mrpt::matdot::BetaScheme;
use coded_mrpt::{IndexParams, Preset, RngSeed};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, BenchResult};
use crate::synth::SyntheticKind;

pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub seed: u64,
    pub k: usize,
    pub queries: usize,
    pub runs: usize,
    #[serde(default)]
    pub in_dataset: bool,
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub dataset: DatasetSpec,
    pub index: IndexSpec,
    pub cluster: ClusterSpec,
    #[serde(default)]
    pub straggler: StragglerModel,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic,
    Fvecs,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Gaussian,
    Clustered,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub source: DataSource,
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub d: usize,
    #[serde(default = "default_distribution")]
    pub distribution: Distribution,
    #[serde(default)]
    pub clusters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queries_path: Option<PathBuf>,
}

fn default_distribution() -> Distribution {
    Distribution::Gaussian
}

impl DatasetSpec {
    pub fn synthetic_kind(&self) -> SyntheticKind {
        match self.distribution {
            Distribution::Gaussian => SyntheticKind::Gaussian,
            Distribution::Clustered => SyntheticKind::Clustered {
                clusters: self.clusters,
            },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trees: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vote_threshold: Option<usize>,
}

impl IndexSpec {
    /// Index parameters and `ν` for dimension `d`.
    pub fn resolve(&self, d: usize) -> BenchResult<(IndexParams, usize)> {
        let preset = match &self.preset {
            Some(name) => Some(
                Preset::by_name(name).ok_or_else(|| BenchError::Config(format!("unknown preset `{name}`")))?,
            ),
            None => None,
        };
        let pick = |own: Option<usize>, from: Option<usize>, what: &str| {
            own.or(from)
                .ok_or_else(|| BenchError::Config(format!("index.{what} is required without a preset")))
        };
        let depth = pick(self.depth, preset.map(|p| p.params.depth), "depth")?;
        let trees = pick(self.trees, preset.map(|p| p.params.trees), "trees")?;
        let nu = pick(self.vote_threshold, preset.map(|p| p.vote_threshold), "vote_threshold")?;
        let sparsity = self
            .sparsity
            .or(preset.map(|p| p.params.sparsity))
            .unwrap_or(1.0 / (d.max(1) as f64).sqrt());
        Ok((IndexParams::new(depth, trees, sparsity), nu))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub workers: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<usize>,
    #[serde(default = "default_betas")]
    pub betas: BetaScheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_delay: Vec<f64>,
    #[serde(default)]
    pub execution: ExecutionMode,
    #[serde(default)]
    pub timing: TimingMode,
    #[serde(default)]
    pub master_cost: MasterCost,
}

fn default_m() -> usize {
    3
}

fn default_betas() -> BetaScheme {
    BetaScheme::Chebyshev
}

/// Straggler presets selectable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum StragglerChoice {
    None,
    Exp,
    Weibull,
}

impl StragglerChoice {
    pub fn model(self) -> StragglerModel {
        match self {
            StragglerChoice::None => StragglerModel::None,
            StragglerChoice::Exp => StragglerModel::REFERENCE_EXPONENTIAL,
            StragglerChoice::Weibull => StragglerModel::REFERENCE_WEIBULL,
        }
    }
}

/// Command-line overrides, applied on top of the config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub strategies: Option<Vec<Strategy>>,
    pub seed: Option<u64>,
    pub queries: Option<usize>,
    pub runs: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub straggler: Option<StragglerChoice>,
    pub m: Option<usize>,
    pub workers: Option<usize>,
    pub preset: Option<String>,
    pub in_dataset: bool,
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> BenchResult<Self> {
        toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = &o.strategies {
            self.strategies = s.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.queries {
            self.queries = v;
        }
        if let Some(v) = o.runs {
            self.runs = v;
        }
        if let Some(v) = &o.out_dir {
            self.out_dir = v.clone();
        }
        if let Some(v) = o.straggler {
            self.straggler = v.model();
        }
        if let Some(v) = o.m {
            self.cluster.m = v;
        }
        if let Some(v) = o.workers {
            self.cluster.workers = v;
        }
        if let Some(v) = &o.preset {
            // a preset on the command line replaces the file's index fields
            self.index = IndexSpec {
                preset: Some(v.clone()),
                ..IndexSpec::default()
            };
        }
        if o.in_dataset {
            self.in_dataset = true;
        }
    }

    /// SHA-256 over the canonical JSON form, output location excluded.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.out_dir = PathBuf::new();
        let json = serde_json::to_vec(&canon).expect("spec serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn seeds(&self) -> Seeds {
        let root = RngSeed(self.seed);
        Seeds {
            data: root.child(1),
            index: root.child(2),
            query_pick: root.child(3),
            straggler: root.child(4),
        }
    }

    /// Checks that need no data.
    pub fn validate(&self) -> BenchResult<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.k == 0 {
            return bad("k must be ≥ 1".into());
        }
        if self.strategies.is_empty() {
            return bad("at least one strategy is required".into());
        }
        for (i, s) in self.strategies.iter().enumerate() {
            if self.strategies[..i].contains(s) {
                return bad(format!("strategy {} listed twice", s.name()));
            }
        }
        if self.runs == 0 {
            return bad("runs must be ≥ 1".into());
        }
        let ds = &self.dataset;
        match ds.source {
            DataSource::Synthetic => {
                if ds.n == 0 || ds.d == 0 {
                    return bad("synthetic dataset needs n ≥ 1 and d ≥ 1".into());
                }
                if ds.distribution == Distribution::Clustered && (ds.clusters == 0 || ds.clusters > ds.n) {
                    return bad(format!("clusters = {} must be in [1, n]", ds.clusters));
                }
                if ds.path.is_some() || ds.queries_path.is_some() {
                    return bad("synthetic dataset takes no path".into());
                }
            }
            DataSource::Fvecs | DataSource::Csv => {
                if ds.path.is_none() {
                    return bad("dataset.path is required for file sources".into());
                }
                if ds.queries_path.is_some() && self.in_dataset {
                    return bad("in_dataset conflicts with dataset.queries_path".into());
                }
            }
        }
        self.straggler.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        let sparsity_ok = self.index.sparsity.is_none_or(|a| a > 0.0 && a <= 1.0);
        if !sparsity_ok {
            return bad("index.sparsity must be in (0, 1]".into());
        }
        if let Some(p) = &self.index.preset {
            if Preset::by_name(p).is_none() {
                return bad(format!("unknown preset `{p}` (expected stl10 or gist)"));
            }
        }
        if matches!(self.cluster.timing, TimingMode::MeasuredCompute { scale } if scale.is_nan() || scale < 0.0) {
            return bad("timing scale must be ≥ 0".into());
        }
        if matches!(self.cluster.master_cost, MasterCost::Measured { scale } if scale.is_nan() || scale < 0.0) {
            return bad("master cost scale must be ≥ 0".into());
        }
        self.index.resolve(self.dataset.d.max(1))?;
        Ok(())
    }

    /// Cluster configuration for one strategy on `n × d` data.
    pub fn cluster_config(&self, strategy: Strategy, d: usize) -> BenchResult<ClusterConfig> {
        let (params, nu) = self.index.resolve(d)?;
        let single = strategy == Strategy::Single;
        let mut c = ClusterConfig::new(strategy, if single { 1 } else { self.cluster.workers }, params, nu, self.k);
        c.tau = self.cluster.tau.unwrap_or(self.k);
        c.m = self.cluster.m;
        c.betas = self.cluster.betas;
        c.straggler = self.straggler;
        c.index_seed = self.seeds().index;
        c.straggler_seed = self.seeds().straggler;
        c.timeout = self.cluster.timeout.unwrap_or(f64::INFINITY);
        c.extra_delay = if single { Vec::new() } else { self.cluster.extra_delay.clone() };
        c.execution = self.cluster.execution;
        c.timing = self.cluster.timing;
        c.master_cost = self.cluster.master_cost;
        Ok(c)
    }

    /// Checks that depend on the loaded data's shape.
    pub fn validate_for(&self, n: usize, d: usize, query_count: usize) -> BenchResult<()> {
        if self.k > n {
            return Err(BenchError::Config(format!("k = {} exceeds N = {n}", self.k)));
        }
        if self.in_dataset && query_count > n {
            return Err(BenchError::Config(format!("{query_count} in-dataset queries from {n} points")));
        }
        for &s in &self.strategies {
            self.cluster_config(s, d)?
                .validate(n, d)
                .map_err(|e| BenchError::Config(format!("{}: {e}", s.name())))?;
        }
        Ok(())
    }
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self::parse(DEFAULT_CONFIG).expect("shipped config parses")
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Seeds {
    pub data: RngSeed,
    pub index: RngSeed,
    pub query_pick: RngSeed,
    pub straggler: RngSeed,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_config_is_valid() {
        let s = ExperimentSpec::default();
        s.validate().unwrap();
        assert_eq!(s.strategies.len(), 5);
        assert_eq!(s.straggler, StragglerModel::REFERENCE_EXPONENTIAL);
        assert_eq!(ExperimentSpec::parse(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn presets_fill_missing_fields() {
        let spec = IndexSpec {
            preset: Some("gist".into()),
            trees: Some(10),
            ..IndexSpec::default()
        };
        let (p, nu) = spec.resolve(960).unwrap();
        assert_eq!((p.depth, p.trees, p.sparsity, nu), (9, 10, 0.032, 10));
        assert!(IndexSpec::default().resolve(4).is_err());
        let (p, _) = IndexSpec {
            depth: Some(2),
            trees: Some(3),
            vote_threshold: Some(1),
            ..IndexSpec::default()
        }
        .resolve(64)
        .unwrap();
        assert_eq!(p.sparsity, 0.125);
    }

    #[test]
    fn overrides_and_hash() {
        let base = ExperimentSpec::default();
        let mut s = base.clone();
        s.apply(&Overrides {
            out_dir: Some("elsewhere".into()),
            ..Overrides::default()
        });
        assert_eq!(s.hash(), base.hash());
        s.apply(&Overrides {
            straggler: Some(StragglerChoice::Weibull),
            preset: Some("stl10".into()),
            m: Some(2),
            in_dataset: true,
            ..Overrides::default()
        });
        assert_ne!(s.hash(), base.hash());
        assert_eq!(s.straggler, StragglerModel::REFERENCE_WEIBULL);
        assert_eq!(s.index.resolve(64).unwrap().1, 25);
        assert_eq!(s.cluster.m, 2);
    }

    #[test]
    fn structural_errors() {
        let mut s = ExperimentSpec::default();
        s.strategies.push(Strategy::Single);
        assert!(s.validate().is_err());
        let mut s = ExperimentSpec::default();
        s.dataset.clusters = 0;
        assert!(s.validate().is_err());
        let mut s = ExperimentSpec::default();
        s.index.preset = Some("sift".into());
        assert!(s.validate().is_err());
        assert!(ExperimentSpec::parse("seed = 1\nbogus = 2").is_err());
    }

    #[test]
    fn shape_errors() {
        let s = ExperimentSpec::default();
        s.validate_for(2000, 64, 500).unwrap();
        assert!(s.validate_for(5, 64, 500).is_err());
        assert!(s.validate_for(2000, 2, 500).is_err());
    }
}
