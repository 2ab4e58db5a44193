//! Run configuration: flat key-value text with `[section]` headers.
//!
//! Unknown sections or keys are hard errors so a typo in a hyperparameter
//! name cannot silently fall back to a default. The fully resolved
//! configuration (every default materialized) is echoed into each output
//! directory and is itself parseable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use abn_core::network::{NetworkConfig, LayerSpec, NeuronModel, Readout};
use abn_core::neuron::{LifParams, SrmParams};
use abn_core::threshold::{make_policy, AbnParams, PolicyKind, ThresholdPolicy};
use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Train,
    Eval,
    SweepWeights,
    AblateComponents,
    Homeostasis,
    SpikeTrace,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Eval => "eval",
            Command::SweepWeights => "sweep-weights",
            Command::AblateComponents => "ablate-components",
            Command::Homeostasis => "homeostasis",
            Command::SpikeTrace => "spike-trace",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetKind {
    /// File-per-sample, directory-per-class N-MNIST binary layout.
    Nmnist { path: PathBuf, preset: Preset },
    /// In-memory labeled digit-glyph workload.
    Digits {
        train_per_class: usize,
        test_per_class: usize,
        duration_us: u64,
        on_rate_hz: f64,
        noise_rate_hz: f64,
        jitter_px: u16,
    },
    /// Unlabeled Poisson stream workload.
    Poisson {
        num_neurons: u16,
        rate_hz: f64,
        duration_us: u64,
        trials: usize,
    },
    /// Unlabeled windowed-burst workload.
    Burst {
        num_neurons: u16,
        base_rate_hz: f64,
        burst_rate_hz: f64,
        burst_windows: Vec<(u64, u64)>,
        duration_us: u64,
        trials: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// 10 train / 4 test samples per class.
    Nmnist100,
    /// 100 train / 20 test samples per class.
    Nmnist1k,
    All,
}

impl Preset {
    pub fn per_class(&self) -> Option<(usize, usize)> {
        match self {
            Preset::Nmnist100 => Some((10, 4)),
            Preset::Nmnist1k => Some((100, 20)),
            Preset::All => None,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Preset::Nmnist100 => "nmnist-100",
            Preset::Nmnist1k => "nmnist-1k",
            Preset::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetCfg {
    pub hidden: Vec<usize>,
    pub model_kind: ModelKind,
    pub lif: LifParams,
    pub srm: SrmParams,
    pub dt_ms: f64,
    pub num_steps: usize,
    pub readout: Readout,
    pub tau1_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Lif,
    Srm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyCfg {
    pub kind: PolicyKind,
    pub params: AbnParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomeoCfg {
    pub conditions: Vec<Condition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    RateDoubled,
    Burst,
    Sparse,
}

impl Condition {
    pub fn name(&self) -> &'static str {
        match self {
            Condition::RateDoubled => "rate-doubled",
            Condition::Burst => "burst",
            Condition::Sparse => "sparse",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub workers: usize,
    pub dataset: DatasetKind,
    pub network: NetCfg,
    pub policy: PolicyCfg,
    pub train: TrainCfg,
    pub eval_checkpoint: Option<PathBuf>,
    pub sweep_grid: Vec<(f64, f64, f64)>,
    pub homeostasis: HomeoCfg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainCfg {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub surrogate_width: f64,
}

struct Raw {
    sections: BTreeMap<String, BTreeMap<String, String>>,
    consumed: BTreeSet<(String, String)>,
}

impl Raw {
    fn parse(text: &str) -> Result<Raw> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| anyhow!("line {}: unterminated section header", lineno + 1))?
                    .trim()
                    .to_string();
                sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected 'key = value', got '{line}'", lineno + 1))?;
            let section = current
                .clone()
                .ok_or_else(|| anyhow!("line {}: key before any [section]", lineno + 1))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            let entry = sections.get_mut(&section).unwrap();
            if entry.contains_key(&key) {
                bail!("duplicate key '{key}' in section [{section}]");
            }
            entry.insert(key, value);
        }
        Ok(Raw {
            sections,
            consumed: BTreeSet::new(),
        })
    }

    fn get(&mut self, section: &str, key: &str) -> Option<String> {
        let v = self.sections.get(section)?.get(key).cloned()?;
        self.consumed.insert((section.to_string(), key.to_string()));
        Some(v)
    }

    fn parse_as<T: std::str::FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| anyhow!("[{section}] {key} = '{v}': {e}")),
        }
    }

    fn require<T: std::str::FromStr>(&mut self, section: &str, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parse_as(section, key)?
            .ok_or_else(|| anyhow!("missing required key '{key}' in section [{section}]"))
    }

    fn or_default<T: std::str::FromStr>(&mut self, section: &str, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parse_as(section, key)?.unwrap_or(default))
    }

    fn reject_unknown(&self) -> Result<()> {
        for (section, keys) in &self.sections {
            if !KNOWN_SECTIONS.contains(&section.as_str()) {
                bail!("unknown section [{section}]");
            }
            for key in keys.keys() {
                if !self.consumed.contains(&(section.clone(), key.clone())) {
                    bail!("unknown key '{key}' in section [{section}]");
                }
            }
        }
        Ok(())
    }
}

const KNOWN_SECTIONS: &[&str] = &[
    "run",
    "dataset",
    "network",
    "policy",
    "train",
    "eval",
    "sweep",
    "homeostasis",
];

fn parse_bool(raw: &mut Raw, section: &str, key: &str, default: bool) -> Result<bool> {
    match raw.get(section, key) {
        None => Ok(default),
        Some(v) => match v.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            other => bail!("[{section}] {key} must be true or false, got '{other}'"),
        },
    }
}

fn parse_windows(spec: &str) -> Result<Vec<(u64, u64)>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (a, b) = pair
                .trim()
                .split_once(':')
                .ok_or_else(|| anyhow!("burst window '{pair}' is not 'start:end'"))?;
            Ok((a.trim().parse()?, b.trim().parse()?))
        })
        .collect()
}

fn parse_grid(spec: &str) -> Result<Vec<(f64, f64, f64)>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|triple| {
            let parts: Vec<&str> = triple.trim().split(':').collect();
            if parts.len() != 3 {
                bail!("grid cell '{triple}' is not 'k1:k2:k3'");
            }
            Ok((
                parts[0].trim().parse()?,
                parts[1].trim().parse()?,
                parts[2].trim().parse()?,
            ))
        })
        .collect()
}

/// CLI-level overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text, overrides)
}

pub fn parse_config(text: &str, overrides: &Overrides) -> Result<RunConfig> {
    let mut raw = Raw::parse(text)?;

    let seed = match overrides.seed {
        Some(s) => {
            raw.get("run", "seed"); // consume if present; override wins
            s
        }
        None => raw.require::<u64>("run", "seed")?,
    };
    let output_dir = overrides
        .output_dir
        .clone()
        .or_else(|| {
            raw.get("run", "output_dir").map(PathBuf::from)
        })
        .unwrap_or_else(|| PathBuf::from("runs/out"));
    if overrides.output_dir.is_some() {
        raw.get("run", "output_dir");
    }
    let workers = match overrides.workers {
        Some(w) => {
            raw.get("run", "workers");
            w
        }
        None => raw.or_default("run", "workers", 0usize)?,
    };

    let dataset = {
        let kind = raw
            .get("dataset", "kind")
            .unwrap_or_else(|| "digits".to_string());
        match kind.as_str() {
            "nmnist" => {
                let path = PathBuf::from(raw.require::<String>("dataset", "path")?);
                let preset = match raw
                    .get("dataset", "preset")
                    .unwrap_or_else(|| "all".to_string())
                    .as_str()
                {
                    "nmnist-100" => Preset::Nmnist100,
                    "nmnist-1k" => Preset::Nmnist1k,
                    "all" => Preset::All,
                    other => bail!("unknown preset '{other}'"),
                };
                DatasetKind::Nmnist { path, preset }
            }
            "digits" => DatasetKind::Digits {
                train_per_class: raw.or_default("dataset", "train_per_class", 10usize)?,
                test_per_class: raw.or_default("dataset", "test_per_class", 4usize)?,
                duration_us: raw.or_default("dataset", "duration_us", 100_000u64)?,
                on_rate_hz: raw.or_default("dataset", "on_rate_hz", 120.0f64)?,
                noise_rate_hz: raw.or_default("dataset", "noise_rate_hz", 4.0f64)?,
                jitter_px: raw.or_default("dataset", "jitter_px", 4u16)?,
            },
            "poisson" => DatasetKind::Poisson {
                num_neurons: raw.or_default("dataset", "num_neurons", 64u16)?,
                rate_hz: raw.or_default("dataset", "rate_hz", 60.0f64)?,
                duration_us: raw.or_default("dataset", "duration_us", 200_000u64)?,
                trials: raw.or_default("dataset", "trials", 8usize)?,
            },
            "burst" => DatasetKind::Burst {
                num_neurons: raw.or_default("dataset", "num_neurons", 64u16)?,
                base_rate_hz: raw.or_default("dataset", "base_rate_hz", 40.0f64)?,
                burst_rate_hz: raw.or_default("dataset", "burst_rate_hz", 400.0f64)?,
                burst_windows: parse_windows(
                    &raw.get("dataset", "burst_windows")
                        .unwrap_or_else(|| "80000:120000".to_string()),
                )?,
                duration_us: raw.or_default("dataset", "duration_us", 200_000u64)?,
                trials: raw.or_default("dataset", "trials", 8usize)?,
            },
            other => bail!("unknown dataset kind '{other}'"),
        }
    };

    let model_kind = match raw
        .get("network", "neuron_model")
        .unwrap_or_else(|| "lif".to_string())
        .as_str()
    {
        "lif" => ModelKind::Lif,
        "srm" => ModelKind::Srm,
        other => bail!("unknown neuron model '{other}'"),
    };
    let hidden = {
        let spec = raw
            .get("network", "hidden")
            .unwrap_or_else(|| "128".to_string());
        spec.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<usize>().map_err(|e| anyhow!("hidden '{s}': {e}")))
            .collect::<Result<Vec<_>>>()?
    };
    let dt_ms = raw.or_default("network", "dt_ms", 1.0f64)?;
    let network = NetCfg {
        hidden,
        model_kind,
        lif: LifParams {
            tau_m: raw.or_default("network", "tau_m_ms", 10.0f64)?,
            e_l: raw.or_default("network", "e_l", 0.0f64)?,
            r_m: raw.or_default("network", "r_m", 1.0f64)?,
            v_reset: raw.or_default("network", "v_reset", 0.0f64)?,
            t_ref: raw.or_default("network", "t_ref_ms", 2.0f64)?,
        },
        srm: SrmParams {
            tau_eps: raw.or_default("network", "tau_eps_ms", 5.0f64)?,
            tau_zeta: raw.or_default("network", "tau_zeta_ms", 10.0f64)?,
            zeta_amp: raw.or_default("network", "zeta_amp", -2.0f64)?,
        },
        dt_ms,
        num_steps: raw.or_default("network", "num_steps", 100usize)?,
        readout: match raw
            .get("network", "readout")
            .unwrap_or_else(|| "spike-count".to_string())
            .as_str()
        {
            "spike-count" => Readout::SpikeCount,
            "membrane-integral" => Readout::MembraneIntegral,
            other => bail!("unknown readout '{other}'"),
        },
        tau1_ms: raw.or_default("network", "tau1_ms", 0.1f64)?,
    };

    let policy = {
        let kind_name = raw
            .get("policy", "kind")
            .unwrap_or_else(|| "abn".to_string());
        let kind = match kind_name.as_str() {
            "fixed" => PolicyKind::Fixed,
            "abn" => PolicyKind::Abn,
            "abn-masked" => PolicyKind::AbnMasked {
                use_mg: parse_bool(&mut raw, "policy", "use_mg", true)?,
                use_trg: parse_bool(&mut raw, "policy", "use_trg", true)?,
                use_se: parse_bool(&mut raw, "policy", "use_se", true)?,
            },
            other => bail!("unknown policy kind '{other}'"),
        };
        let defaults = AbnParams::default();
        let params = AbnParams {
            k1: raw.or_default("policy", "k1", defaults.k1)?,
            k2: raw.or_default("policy", "k2", defaults.k2)?,
            k3: raw.or_default("policy", "k3", defaults.k3)?,
            eta: raw.or_default("policy", "eta", defaults.eta)?,
            alpha: raw.or_default("policy", "alpha", defaults.alpha)?,
            window_n: raw.or_default("policy", "window_n", defaults.window_n)?,
            dt: dt_ms,
            theta_init: raw.or_default("policy", "theta_init", defaults.theta_init)?,
            theta_min: raw.or_default("policy", "theta_min", defaults.theta_min)?,
            theta_max: raw.or_default("policy", "theta_max", defaults.theta_max)?,
        };
        PolicyCfg { kind, params }
    };

    let train = TrainCfg {
        learning_rate: raw.or_default("train", "learning_rate", 1.0f64)?,
        epochs: raw.or_default("train", "epochs", 30usize)?,
        batch_size: raw.or_default("train", "batch_size", 16usize)?,
        surrogate_width: raw.or_default("train", "surrogate_width", 1.0f64)?,
    };

    let eval_checkpoint = raw.get("eval", "checkpoint").map(PathBuf::from);

    let sweep_grid = parse_grid(
        &raw.get("sweep", "grid").unwrap_or_else(|| {
            "0.05:0.15:0.05, 0.15:0.25:0.15, 0.25:0.5:0.25, 0.5:0.75:0.5, 0.75:0.85:0.75"
                .to_string()
        }),
    )?;

    let homeostasis = {
        let spec = raw
            .get("homeostasis", "conditions")
            .unwrap_or_else(|| "rate-doubled".to_string());
        let conditions = spec
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| match s.trim() {
                "rate-doubled" => Ok(Condition::RateDoubled),
                "burst" => Ok(Condition::Burst),
                "sparse" => Ok(Condition::Sparse),
                other => bail!("unknown homeostasis condition '{other}'"),
            })
            .collect::<Result<Vec<_>>>()?;
        HomeoCfg { conditions }
    };

    raw.reject_unknown()?;

    let cfg = RunConfig {
        seed,
        output_dir,
        workers,
        dataset,
        network,
        policy,
        train,
        eval_checkpoint,
        sweep_grid,
        homeostasis,
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<()> {
    if let DatasetKind::Nmnist { path, .. } = &cfg.dataset {
        if !path.is_dir() {
            bail!("dataset path {} does not exist", path.display());
        }
    }
    cfg.policy.params.validate()?;
    if cfg.network.dt_ms <= 0.0 || cfg.network.num_steps == 0 {
        bail!("network dt and num_steps must be positive");
    }
    if cfg.train.epochs == 0 || cfg.train.batch_size == 0 {
        bail!("train epochs and batch_size must be positive");
    }
    if cfg.sweep_grid.is_empty() {
        bail!("sweep grid must be non-empty");
    }
    if cfg.homeostasis.conditions.is_empty() {
        bail!("homeostasis needs at least one degraded condition");
    }
    Ok(())
}

/// Build the policy for the configured kind with an optional mask override
/// (used by the ablation and trace commands).
pub fn build_policy(cfg: &RunConfig, kind: PolicyKind) -> Result<ThresholdPolicy> {
    Ok(make_policy(kind, cfg.policy.params)?)
}

/// Assemble the spiking MLP config for a given input width and class count.
pub fn build_network_config(
    cfg: &RunConfig,
    input_size: usize,
    num_classes: usize,
    policy: ThresholdPolicy,
) -> Result<NetworkConfig> {
    let net = &cfg.network;
    let model = match net.model_kind {
        ModelKind::Lif => NeuronModel::Lif(net.lif),
        ModelKind::Srm => NeuronModel::Srm(net.srm),
    };
    let mut sizes = vec![input_size];
    sizes.extend(&net.hidden);
    sizes.push(num_classes);
    let layers = sizes
        .windows(2)
        .map(|pair| LayerSpec {
            in_size: pair[0],
            out_size: pair[1],
            model,
            policy,
        })
        .collect();
    let config = NetworkConfig {
        layers,
        dt_ms: net.dt_ms,
        num_steps: net.num_steps,
        readout: net.readout,
        tau1_ms: net.tau1_ms,
        seed: cfg.seed,
    };
    config.validate()?;
    Ok(config)
}

/// Network for forward-only stream workloads: the hidden list is the whole
/// simulated chain, with no classification head.
pub fn build_stream_network_config(
    cfg: &RunConfig,
    input_size: usize,
    policy: ThresholdPolicy,
) -> Result<NetworkConfig> {
    let net = &cfg.network;
    if net.hidden.is_empty() {
        bail!("stream commands need at least one hidden layer");
    }
    let model = match net.model_kind {
        ModelKind::Lif => NeuronModel::Lif(net.lif),
        ModelKind::Srm => NeuronModel::Srm(net.srm),
    };
    let mut sizes = vec![input_size];
    sizes.extend(&net.hidden);
    let layers = sizes
        .windows(2)
        .map(|pair| LayerSpec {
            in_size: pair[0],
            out_size: pair[1],
            model,
            policy,
        })
        .collect();
    let config = NetworkConfig {
        layers,
        dt_ms: net.dt_ms,
        num_steps: net.num_steps,
        readout: net.readout,
        tau1_ms: net.tau1_ms,
        seed: cfg.seed,
    };
    config.validate()?;
    Ok(config)
}

/// Raster time bin in microseconds, tied to the network step.
pub fn raster_dt_us(cfg: &RunConfig) -> u64 {
    (cfg.network.dt_ms * 1000.0).round() as u64
}

/// Serialize the fully resolved configuration; parseable by `parse_config`.
pub fn resolved_text(cfg: &RunConfig, command: Command) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# resolved configuration: {}", command.name());
    let _ = writeln!(s, "[run]");
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "output_dir = {}", cfg.output_dir.display());
    let _ = writeln!(s, "workers = {}", cfg.workers);
    let _ = writeln!(s, "\n[dataset]");
    match &cfg.dataset {
        DatasetKind::Nmnist { path, preset } => {
            let _ = writeln!(s, "kind = nmnist");
            let _ = writeln!(s, "path = {}", path.display());
            let _ = writeln!(s, "preset = {}", preset.name());
        }
        DatasetKind::Digits {
            train_per_class,
            test_per_class,
            duration_us,
            on_rate_hz,
            noise_rate_hz,
            jitter_px,
        } => {
            let _ = writeln!(s, "kind = digits");
            let _ = writeln!(s, "train_per_class = {train_per_class}");
            let _ = writeln!(s, "test_per_class = {test_per_class}");
            let _ = writeln!(s, "duration_us = {duration_us}");
            let _ = writeln!(s, "on_rate_hz = {on_rate_hz}");
            let _ = writeln!(s, "noise_rate_hz = {noise_rate_hz}");
            let _ = writeln!(s, "jitter_px = {jitter_px}");
        }
        DatasetKind::Poisson {
            num_neurons,
            rate_hz,
            duration_us,
            trials,
        } => {
            let _ = writeln!(s, "kind = poisson");
            let _ = writeln!(s, "num_neurons = {num_neurons}");
            let _ = writeln!(s, "rate_hz = {rate_hz}");
            let _ = writeln!(s, "duration_us = {duration_us}");
            let _ = writeln!(s, "trials = {trials}");
        }
        DatasetKind::Burst {
            num_neurons,
            base_rate_hz,
            burst_rate_hz,
            burst_windows,
            duration_us,
            trials,
        } => {
            let _ = writeln!(s, "kind = burst");
            let _ = writeln!(s, "num_neurons = {num_neurons}");
            let _ = writeln!(s, "base_rate_hz = {base_rate_hz}");
            let _ = writeln!(s, "burst_rate_hz = {burst_rate_hz}");
            let windows = burst_windows
                .iter()
                .map(|(a, b)| format!("{a}:{b}"))
                .collect::<Vec<_>>()
                .join(", ");
            let _ = writeln!(s, "burst_windows = {windows}");
            let _ = writeln!(s, "duration_us = {duration_us}");
            let _ = writeln!(s, "trials = {trials}");
        }
    }
    let net = &cfg.network;
    let _ = writeln!(s, "\n[network]");
    let hidden = net
        .hidden
        .iter()
        .map(|h| h.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    let _ = writeln!(s, "hidden = {hidden}");
    let _ = writeln!(
        s,
        "neuron_model = {}",
        match net.model_kind {
            ModelKind::Lif => "lif",
            ModelKind::Srm => "srm",
        }
    );
    let _ = writeln!(s, "dt_ms = {}", net.dt_ms);
    let _ = writeln!(s, "num_steps = {}", net.num_steps);
    let _ = writeln!(
        s,
        "readout = {}",
        match net.readout {
            Readout::SpikeCount => "spike-count",
            Readout::MembraneIntegral => "membrane-integral",
        }
    );
    let _ = writeln!(s, "tau1_ms = {}", net.tau1_ms);
    let _ = writeln!(s, "tau_m_ms = {}", net.lif.tau_m);
    let _ = writeln!(s, "e_l = {}", net.lif.e_l);
    let _ = writeln!(s, "r_m = {}", net.lif.r_m);
    let _ = writeln!(s, "v_reset = {}", net.lif.v_reset);
    let _ = writeln!(s, "t_ref_ms = {}", net.lif.t_ref);
    let _ = writeln!(s, "tau_eps_ms = {}", net.srm.tau_eps);
    let _ = writeln!(s, "tau_zeta_ms = {}", net.srm.tau_zeta);
    let _ = writeln!(s, "zeta_amp = {}", net.srm.zeta_amp);
    let _ = writeln!(s, "\n[policy]");
    match cfg.policy.kind {
        PolicyKind::Fixed => {
            let _ = writeln!(s, "kind = fixed");
        }
        PolicyKind::Abn => {
            let _ = writeln!(s, "kind = abn");
        }
        PolicyKind::AbnMasked {
            use_mg,
            use_trg,
            use_se,
        } => {
            let _ = writeln!(s, "kind = abn-masked");
            let _ = writeln!(s, "use_mg = {use_mg}");
            let _ = writeln!(s, "use_trg = {use_trg}");
            let _ = writeln!(s, "use_se = {use_se}");
        }
    }
    let p = &cfg.policy.params;
    let _ = writeln!(s, "k1 = {}", p.k1);
    let _ = writeln!(s, "k2 = {}", p.k2);
    let _ = writeln!(s, "k3 = {}", p.k3);
    let _ = writeln!(s, "eta = {}", p.eta);
    let _ = writeln!(s, "alpha = {}", p.alpha);
    let _ = writeln!(s, "window_n = {}", p.window_n);
    let _ = writeln!(s, "theta_init = {}", p.theta_init);
    let _ = writeln!(s, "theta_min = {}", p.theta_min);
    let _ = writeln!(s, "theta_max = {}", p.theta_max);
    let _ = writeln!(s, "\n[train]");
    let _ = writeln!(s, "learning_rate = {}", cfg.train.learning_rate);
    let _ = writeln!(s, "epochs = {}", cfg.train.epochs);
    let _ = writeln!(s, "batch_size = {}", cfg.train.batch_size);
    let _ = writeln!(s, "surrogate_width = {}", cfg.train.surrogate_width);
    if let Some(ckpt) = &cfg.eval_checkpoint {
        let _ = writeln!(s, "\n[eval]");
        let _ = writeln!(s, "checkpoint = {}", ckpt.display());
    }
    let _ = writeln!(s, "\n[sweep]");
    let grid = cfg
        .sweep_grid
        .iter()
        .map(|(a, b, c)| format!("{a}:{b}:{c}"))
        .collect::<Vec<_>>()
        .join(", ");
    let _ = writeln!(s, "grid = {grid}");
    let _ = writeln!(s, "\n[homeostasis]");
    let conds = cfg
        .homeostasis
        .conditions
        .iter()
        .map(|c| c.name().to_string())
        .collect::<Vec<_>>()
        .join(", ");
    let _ = writeln!(s, "conditions = {conds}");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[run]\nseed = 1\n";

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config(MINIMAL, &Overrides::default()).unwrap();
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.network.hidden, vec![128]);
        assert_eq!(cfg.policy.kind, PolicyKind::Abn);
        assert_eq!(cfg.sweep_grid.len(), 5);
    }

    #[test]
    fn missing_seed_is_an_error() {
        assert!(parse_config("[run]\nworkers = 1\n", &Overrides::default()).is_err());
        // ... unless supplied on the command line.
        let o = Overrides {
            seed: Some(9),
            ..Default::default()
        };
        assert_eq!(parse_config("[run]\nworkers = 1\n", &o).unwrap().seed, 9);
    }

    #[test]
    fn unknown_key_is_a_hard_error() {
        let text = "[run]\nseed = 1\nlerning_rate = 0.1\n";
        let err = parse_config(text, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("lerning_rate"), "{err}");
    }

    #[test]
    fn unknown_section_is_a_hard_error() {
        let text = "[run]\nseed = 1\n[nets]\nx = 1\n";
        assert!(parse_config(text, &Overrides::default()).is_err());
    }

    #[test]
    fn duplicate_key_is_an_error() {
        let text = "[run]\nseed = 1\nseed = 2\n";
        assert!(parse_config(text, &Overrides::default()).is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# top\n[run]\nseed = 3   # inline\n\n[policy]\nkind = fixed\n";
        let cfg = parse_config(text, &Overrides::default()).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.policy.kind, PolicyKind::Fixed);
    }

    #[test]
    fn resolved_text_round_trips() {
        let text = "[run]\nseed = 11\n[dataset]\nkind = burst\nburst_windows = 1000:2000, 5000:9000\n[policy]\nkind = abn-masked\nuse_se = false\n";
        let cfg = parse_config(text, &Overrides::default()).unwrap();
        let echo = resolved_text(&cfg, Command::Train);
        let back = parse_config(&echo, &Overrides::default()).unwrap();
        assert_eq!(cfg.seed, back.seed);
        assert_eq!(cfg.dataset, back.dataset);
        assert_eq!(cfg.policy, back.policy);
        assert_eq!(resolved_text(&back, Command::Train), echo);
    }

    #[test]
    fn nmnist_path_must_exist() {
        let text = "[run]\nseed = 1\n[dataset]\nkind = nmnist\npath = /no/such/dir\n";
        assert!(parse_config(text, &Overrides::default()).is_err());
    }

    #[test]
    fn masked_policy_parses_flags() {
        let text =
            "[run]\nseed = 1\n[policy]\nkind = abn-masked\nuse_mg = true\nuse_trg = false\nuse_se = false\n";
        let cfg = parse_config(text, &Overrides::default()).unwrap();
        assert_eq!(
            cfg.policy.kind,
            PolicyKind::AbnMasked {
                use_mg: true,
                use_trg: false,
                use_se: false
            }
        );
    }
}
