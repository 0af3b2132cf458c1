//! Flat key=value run configuration.
//!
//! One `RunConfig` pins everything an experiment needs: dataset location,
//! model family and sizes, regularizers, noise preset, optimizer constants,
//! split ratios, and the seed list. Precedence when assembling one: built-in
//! defaults, then the `QUANGCN_DATA_ROOT` environment variable (data root
//! only), then a config file, then command-line flags. The canonical echo is
//! embedded in result files so a finished run can be reproduced or
//! re-evaluated without the original invocation.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelKind};
use crate::noise::{InjectionPolicy, NoiseModel};

pub const DEFAULT_DATA_ROOT: &str = "data";
pub const DATA_ROOT_ENV: &str = "QUANGCN_DATA_ROOT";

/// Measurement-noise settings without a seed; the run seed policy decides
/// the trajectory streams.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    pub gate_error_1q: f64,
    pub gate_error_2q: f64,
    pub readout_flip: f64,
    pub trajectories: usize,
}

impl NoiseSpec {
    /// Accepts `none`, `default`, or `p1q,p2q,readout,trajectories`.
    pub fn parse(text: &str) -> Result<Option<Self>> {
        let t = text.trim();
        if t == "none" {
            return Ok(None);
        }
        if t == "default" {
            let m = NoiseModel::default_preset();
            return Ok(Some(NoiseSpec {
                gate_error_1q: m.gate_error_1q,
                gate_error_2q: m.gate_error_2q,
                readout_flip: m.readout_flip,
                trajectories: m.trajectories,
            }));
        }
        let parts: Vec<&str> = t.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::config(format!(
                "noise must be none, default, or p1q,p2q,readout,trajectories; got {text:?}"
            )));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::config(format!("noise {what} is not a number: {s:?}")))
        };
        let spec = NoiseSpec {
            gate_error_1q: num(parts[0], "single-qubit error")?,
            gate_error_2q: num(parts[1], "two-qubit error")?,
            readout_flip: num(parts[2], "readout flip")?,
            trajectories: parts[3].parse().map_err(|_| {
                Error::config(format!("noise trajectory count is not an integer: {:?}", parts[3]))
            })?,
        };
        spec.to_model(0).validate()?;
        Ok(Some(spec))
    }

    pub fn canonical(&self) -> String {
        format!(
            "{},{},{},{}",
            self.gate_error_1q, self.gate_error_2q, self.readout_flip, self.trajectories
        )
    }

    pub fn to_model(&self, seed: u64) -> NoiseModel {
        NoiseModel {
            gate_error_1q: self.gate_error_1q,
            gate_error_2q: self.gate_error_2q,
            readout_flip: self.readout_flip,
            trajectories: self.trajectories,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data_root: PathBuf,
    pub dataset: String,
    pub model: ModelKind,
    pub qubits: usize,
    pub layers: usize,
    pub hidden: usize,
    pub skip: bool,
    pub sparse_lambda: f64,
    pub mask_threshold: f64,
    pub sgc_hops: usize,
    pub inject: bool,
    pub inject_prob: f64,
    pub inject_spread: f64,
    pub noise: Option<NoiseSpec>,
    pub noise_seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub train_ratio: f64,
    pub val_ratio: f64,
    pub test_ratio: f64,
    pub seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_root: PathBuf::from(DEFAULT_DATA_ROOT),
            dataset: crate::data::synthetic::BUILTIN_NAME.to_string(),
            model: ModelKind::QuanGcn,
            qubits: 4,
            layers: 2,
            hidden: 32,
            skip: false,
            sparse_lambda: 0.0,
            mask_threshold: 0.55,
            sgc_hops: 2,
            inject: false,
            inject_prob: 0.1,
            inject_spread: PI / 8.0,
            noise: None,
            noise_seed: 17,
            epochs: 100,
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            train_ratio: 0.8,
            val_ratio: 0.1,
            test_ratio: 0.1,
            seeds: (0..10).collect(),
        }
    }
}

/// Seed lists are either comma separated (`0,3,17`) or an inclusive range
/// (`0..9`).
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let t = text.trim();
    if let Some((lo, hi)) = t.split_once("..") {
        let lo: u64 = lo
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("bad seed range start {lo:?}")))?;
        let hi: u64 = hi
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("bad seed range end {hi:?}")))?;
        if hi < lo {
            return Err(Error::config(format!(
                "seed range {t:?} runs backwards; the range is inclusive"
            )));
        }
        return Ok((lo..=hi).collect());
    }
    t.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::config(format!("bad seed {s:?}")))
        })
        .collect()
}

fn seeds_canonical(seeds: &[u64]) -> String {
    seeds
        .iter()
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("{key} expects a number, got {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(Error::config(format!(
            "{key} expects true or false, got {other:?}"
        ))),
    }
}

impl RunConfig {
    /// Built-in defaults with the data root taken from the environment when
    /// set.
    pub fn default_with_env() -> Self {
        let mut cfg = RunConfig::default();
        if let Ok(root) = std::env::var(DATA_ROOT_ENV) {
            if !root.is_empty() {
                cfg.data_root = PathBuf::from(root);
            }
        }
        cfg
    }

    /// Applies one key=value assignment. Unknown keys are rejected.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "data_root" => self.data_root = PathBuf::from(value),
            "dataset" => self.dataset = value.to_string(),
            "model" => self.model = ModelKind::parse(value)?,
            "qubits" => self.qubits = parse_num(key, value)?,
            "layers" => self.layers = parse_num(key, value)?,
            "hidden" => self.hidden = parse_num(key, value)?,
            "skip" => self.skip = parse_bool(key, value)?,
            "sparse_lambda" => self.sparse_lambda = parse_num(key, value)?,
            "mask_threshold" => self.mask_threshold = parse_num(key, value)?,
            "sgc_hops" => self.sgc_hops = parse_num(key, value)?,
            "inject" => self.inject = parse_bool(key, value)?,
            "inject_prob" => self.inject_prob = parse_num(key, value)?,
            "inject_spread" => self.inject_spread = parse_num(key, value)?,
            "noise" => self.noise = NoiseSpec::parse(value)?,
            "noise_seed" => self.noise_seed = parse_num(key, value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "lr" => self.lr = parse_num(key, value)?,
            "beta1" => self.beta1 = parse_num(key, value)?,
            "beta2" => self.beta2 = parse_num(key, value)?,
            "eps" => self.eps = parse_num(key, value)?,
            "train_ratio" => self.train_ratio = parse_num(key, value)?,
            "val_ratio" => self.val_ratio = parse_num(key, value)?,
            "test_ratio" => self.test_ratio = parse_num(key, value)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            other => {
                return Err(Error::config(format!(
                    "unknown configuration key {other:?}"
                )));
            }
        }
        Ok(())
    }

    /// Reads `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(
                    path.display().to_string(),
                    lineno + 1,
                    format!("expected key = value, got {line:?}"),
                ));
            };
            self.apply(key.trim(), value.trim()).map_err(|e| {
                Error::parse(path.display().to_string(), lineno + 1, e.to_string())
            })?;
        }
        Ok(())
    }

    /// Rebuilds a config from a canonical echo.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (k, v) in pairs {
            cfg.apply(k, v)?;
        }
        Ok(cfg)
    }

    /// Canonical sorted echo; every key appears, in the fixed order below.
    pub fn echo(&self) -> Vec<(String, String)> {
        let noise = match &self.noise {
            None => "none".to_string(),
            Some(s) => s.canonical(),
        };
        let pairs: Vec<(&str, String)> = vec![
            ("beta1", self.beta1.to_string()),
            ("beta2", self.beta2.to_string()),
            ("data_root", self.data_root.display().to_string()),
            ("dataset", self.dataset.clone()),
            ("epochs", self.epochs.to_string()),
            ("eps", self.eps.to_string()),
            ("hidden", self.hidden.to_string()),
            ("inject", self.inject.to_string()),
            ("inject_prob", self.inject_prob.to_string()),
            ("inject_spread", self.inject_spread.to_string()),
            ("layers", self.layers.to_string()),
            ("lr", self.lr.to_string()),
            ("mask_threshold", self.mask_threshold.to_string()),
            ("model", self.model.name().to_string()),
            ("noise", noise),
            ("noise_seed", self.noise_seed.to_string()),
            ("qubits", self.qubits.to_string()),
            ("seeds", seeds_canonical(&self.seeds)),
            ("sgc_hops", self.sgc_hops.to_string()),
            ("skip", self.skip.to_string()),
            ("sparse_lambda", self.sparse_lambda.to_string()),
            ("test_ratio", self.test_ratio.to_string()),
            ("train_ratio", self.train_ratio.to_string()),
            ("val_ratio", self.val_ratio.to_string()),
        ];
        pairs
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    /// Checks the model-independent parts; model-shape checks happen when the
    /// dataset dimensions are known.
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config(format!("lr must be positive, got {}", self.lr)));
        }
        for (name, v) in [
            ("train_ratio", self.train_ratio),
            ("val_ratio", self.val_ratio),
            ("test_ratio", self.test_ratio),
        ] {
            if !(v.is_finite() && v > 0.0 && v < 1.0) {
                return Err(Error::config(format!(
                    "{name} must lie strictly between 0 and 1, got {v}"
                )));
            }
        }
        if self.train_ratio + self.val_ratio + self.test_ratio > 1.0 + 1e-9 {
            return Err(Error::config("split ratios sum to more than 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("need at least one seed"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::config("duplicate seeds in the seed list"));
        }
        if self.inject {
            if !self.model.is_quantum() {
                return Err(Error::config(
                    "gate injection applies to quantum models only",
                ));
            }
            if !(0.0..=1.0).contains(&self.inject_prob) {
                return Err(Error::config(format!(
                    "inject_prob must lie in [0,1], got {}",
                    self.inject_prob
                )));
            }
            if !self.inject_spread.is_finite() || self.inject_spread < 0.0 {
                return Err(Error::config(format!(
                    "inject_spread must be non-negative, got {}",
                    self.inject_spread
                )));
            }
        }
        if let Some(spec) = &self.noise {
            spec.to_model(self.noise_seed).validate()?;
        }
        // Shape-independent model constraints surface early with placeholder
        // dimensions; the real ones are rechecked against the dataset.
        self.model_config(1, 2).validate()?;
        Ok(())
    }

    pub fn model_config(&self, feature_dim: usize, num_classes: usize) -> ModelConfig {
        ModelConfig {
            kind: self.model,
            feature_dim,
            num_classes,
            qubits: self.qubits,
            layers: self.layers,
            hidden: self.hidden,
            skip: self.skip,
            sparse_lambda: self.sparse_lambda,
            mask_threshold: self.mask_threshold,
            sgc_hops: self.sgc_hops,
        }
    }

    pub fn noise_model(&self) -> Option<NoiseModel> {
        self.noise.as_ref().map(|s| s.to_model(self.noise_seed))
    }

    pub fn injection_policy(&self) -> Option<InjectionPolicy> {
        self.inject.then(|| InjectionPolicy {
            insert_prob: self.inject_prob,
            angle_spread: self.inject_spread,
            kinds: vec![crate::gates::GateKind::Ry],
        })
    }

    pub fn ratios(&self) -> (f64, f64, f64) {
        (self.train_ratio, self.val_ratio, self.test_ratio)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_the_echo() {
        let cfg = RunConfig::default();
        let again = RunConfig::from_pairs(&cfg.echo()).unwrap();
        assert_eq!(cfg, again);
        // Echo keys arrive sorted.
        let keys: Vec<String> = cfg.echo().into_iter().map(|(k, _)| k).collect();
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn non_default_values_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.apply("model", "quanmlp").unwrap();
        cfg.apply("skip", "true").unwrap();
        cfg.apply("noise", "default").unwrap();
        cfg.apply("seeds", "3..5").unwrap();
        cfg.apply("lr", "0.005").unwrap();
        assert_eq!(cfg.seeds, vec![3, 4, 5]);
        let again = RunConfig::from_pairs(&cfg.echo()).unwrap();
        assert_eq!(cfg, again);
        let noise = again.noise.unwrap();
        assert_eq!(noise.trajectories, 256);
        assert_eq!(noise.readout_flip, 0.02);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply("qubitz", "4").is_err());
        assert!(cfg.apply("qubits", "four").is_err());
        assert!(cfg.apply("skip", "yes").is_err());
        assert!(cfg.apply("noise", "0.1,0.2").is_err());
        assert!(cfg.apply("seeds", "9..3").is_err());
    }

    #[test]
    fn seed_lists_parse_both_ways() {
        assert_eq!(parse_seeds("0,1,2").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("0..9").unwrap(), (0..=9).collect::<Vec<_>>());
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert_eq!(parse_seeds(" 4 , 2 ").unwrap(), vec![4, 2]);
        assert!(parse_seeds("a,b").is_err());
    }

    #[test]
    fn validation_catches_inconsistent_setups() {
        let mut cfg = RunConfig::default();
        cfg.validate().unwrap();
        cfg.train_ratio = 0.9;
        assert!(cfg.validate().is_err()); // ratios sum over 1
        cfg.train_ratio = 0.6;
        cfg.seeds = vec![1, 1];
        assert!(cfg.validate().is_err());
        cfg.seeds = vec![1];
        cfg.model = ModelKind::Gcn;
        cfg.inject = true;
        assert!(cfg.validate().is_err()); // injection needs a circuit
        cfg.inject = false;
        cfg.validate().unwrap(); // quangcn-only knobs are at defaults
    }

    #[test]
    fn config_files_apply_in_order_with_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(
            &path,
            "# experiment\nmodel = quansgc\n\nqubits = 5\nseeds = 0..2\n",
        )
        .unwrap();
        let mut cfg = RunConfig::default();
        cfg.apply_file(&path).unwrap();
        assert_eq!(cfg.model, ModelKind::QuanSgc);
        assert_eq!(cfg.qubits, 5);
        assert_eq!(cfg.seeds, vec![0, 1, 2]);

        std::fs::write(&path, "model: quangcn\n").unwrap();
        let err = cfg.apply_file(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn noise_spec_forms() {
        assert!(NoiseSpec::parse("none").unwrap().is_none());
        let d = NoiseSpec::parse("default").unwrap().unwrap();
        assert_eq!(d.canonical(), "0.005,0.02,0.02,256");
        let custom = NoiseSpec::parse("0.01, 0.03, 0.5, 64").unwrap().unwrap();
        assert_eq!(custom.trajectories, 64);
        assert_eq!(custom.readout_flip, 0.5);
        assert!(NoiseSpec::parse("0.01,0.03,1.5,64").is_err()); // flip > 1
    }
}
