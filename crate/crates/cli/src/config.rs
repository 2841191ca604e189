use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sparsemix_core::embedding::{KMeansOptions, DEFAULT_EMBEDDING_DIM};
use sparsemix_core::metrics::{AggregateOptions, DEFAULT_BIN_EDGES};
use sparsemix_core::mixture::SimulationConfig;
use sparsemix_core::pipeline::PipelineOptions;
use sparsemix_core::segperm::{
    AffinityOptions, GroupScore, SeparationOptions, DEFAULT_MIN_SEGMENT_FRAMES,
};
use sparsemix_core::signal::wav::WavFormat;
use sparsemix_core::{Exec, StftParams, VERSION};

pub const SEED_ENV: &str = "SPARSEMIX_SEED";

/// Every tunable of the toolkit. Command-line flags shadow these keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// `simulation.seed` is ignored; the run seed is used instead.
    pub simulation: SimulationConfig,
    pub stft: StftParams,
    pub embedding_dim: usize,
    pub oracle_sigma: f64,
    pub speakers: usize,
    pub kmeans_iters: usize,
    pub stiffness: f64,
    pub kmeans_tol: f64,
    pub silence_db: Option<f64>,
    pub min_segment_frames: usize,
    pub group_score: GroupScore,
    pub exhaustive_limit: usize,
    pub track_format: WavFormat,
    pub bin_edges: Vec<f64>,
    pub gender_split: bool,
    pub per_utterance_wer: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let km = KMeansOptions::default();
        RunConfig {
            seed: SimulationConfig::default().seed,
            simulation: SimulationConfig::default(),
            stft: StftParams::separation(),
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            oracle_sigma: 0.3,
            speakers: 2,
            kmeans_iters: km.max_iters,
            stiffness: km.stiffness,
            kmeans_tol: km.tol,
            silence_db: None,
            min_segment_frames: DEFAULT_MIN_SEGMENT_FRAMES,
            group_score: GroupScore::default(),
            exhaustive_limit: AffinityOptions::default().exhaustive_limit,
            track_format: WavFormat::Float32,
            bin_edges: DEFAULT_BIN_EDGES.to_vec(),
            gender_split: false,
            per_utterance_wer: false,
        }
    }
}

impl RunConfig {
    /// Config file (or defaults), then `SPARSEMIX_SEED`, then `--seed`.
    pub fn resolve(
        path: Option<&Path>,
        env_seed: Option<String>,
        flag_seed: Option<u64>,
    ) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = env_seed {
            cfg.seed = s
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV}={s:?} is not an unsigned integer"))?;
        }
        if let Some(s) = flag_seed {
            cfg.seed = s;
        }
        cfg.simulation.seed = cfg.seed;
        Ok(cfg)
    }

    /// Per-mixture work stays sequential; parallelism is across mixtures.
    pub fn pipeline(&self, seed: u64) -> PipelineOptions {
        PipelineOptions {
            stft: self.stft,
            separation: SeparationOptions {
                k: self.speakers,
                kmeans: KMeansOptions {
                    max_iters: self.kmeans_iters,
                    stiffness: self.stiffness,
                    tol: self.kmeans_tol,
                    seed,
                    exec: Exec::Sequential,
                },
                silence_db: self.silence_db,
                affinity: AffinityOptions {
                    score: self.group_score,
                    exhaustive_limit: self.exhaustive_limit,
                    force_greedy: false,
                },
                exec: Exec::Sequential,
            },
            min_segment_frames: self.min_segment_frames,
        }
    }

    pub fn aggregate(&self) -> AggregateOptions {
        AggregateOptions {
            gender_split: self.gender_split,
            per_utterance_wer: self.per_utterance_wer,
        }
    }
}

#[derive(Serialize)]
struct Provenance<'a, A: Serialize> {
    version: &'a str,
    command: &'a str,
    args: &'a A,
    config: &'a RunConfig,
}

/// Writes `run_config.json` with the toolkit version into `dir`.
pub fn write_run_config<A: Serialize>(
    dir: &Path,
    command: &str,
    args: &A,
    cfg: &RunConfig,
) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let p = Provenance {
        version: VERSION,
        command,
        args,
        config: cfg,
    };
    let path = dir.join("run_config.json");
    let mut text = serde_json::to_string_pretty(&p)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}
