//! Run configuration: a flat key-value config file, every key overridable
//! by a CLI flag (flags win), echoed canonically into reports and
//! checkpoints.

use crate::encoder::PoolMode;
use crate::error::{Error, Result};
use crate::pretrain::PretrainConfig;
use crate::prompt::PromptConfig;
use std::fmt::Write as _;
use std::path::Path;

/// Full pipeline configuration (pre-train + prompt stages + prediction).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    // pre-train stage
    pub batch_size: usize,
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub lr: f64,
    pub k: usize,
    pub dim: usize,
    pub tau: f64,
    pub rho: f64,
    pub lambda: f64,
    pub hop_cap: Option<usize>,
    // prompt stage
    pub prompt_epochs: usize,
    pub prompt_lr: f64,
    pub hidden: usize,
    pub alpha: f64,
    pub m: usize,
    // prediction
    pub num_pred: Option<usize>,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            batch_size: 256,
            epochs: 30,
            batches_per_epoch: 1,
            lr: 1e-3,
            k: 2,
            dim: 128,
            tau: 0.1,
            rho: 0.85,
            lambda: 0.1,
            hop_cap: None,
            prompt_epochs: 30,
            prompt_lr: 1e-3,
            hidden: 128,
            alpha: 0.1,
            m: 10,
            num_pred: None,
            workers: 0,
        }
    }
}

impl RunConfig {
    pub fn pretrain_config(&self) -> PretrainConfig {
        PretrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            batches_per_epoch: self.batches_per_epoch,
            lr: self.lr,
            k: self.k,
            dim: self.dim,
            tau: self.tau,
            rho: self.rho,
            lambda: self.lambda,
            seed: self.seed,
            hop_cap: self.hop_cap,
            pool_mode: PoolMode::Sum,
        }
    }

    pub fn prompt_config(&self) -> PromptConfig {
        PromptConfig {
            epochs: self.prompt_epochs,
            lr: self.prompt_lr,
            hidden: self.hidden,
            alpha: self.alpha,
            k: self.k,
            seed: self.seed,
            hop_cap: self.hop_cap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pretrain_config().validate()?;
        if self.m == 0 {
            return Err(Error::Usage("m must be >= 1".into()));
        }
        if let Some(n) = self.num_pred {
            if n == 0 {
                return Err(Error::Usage("num-pred must be >= 1".into()));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Usage("alpha must be in [0, 1]".into()));
        }
        Ok(())
    }

    /// Set one key; keys match the config-file/flag names.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let err = |k: &str, v: &str| Error::Usage(format!("invalid value {v:?} for key {k:?}"));
        match key {
            "seed" => self.seed = value.parse().map_err(|_| err(key, value))?,
            "batch_size" | "batch-size" => {
                self.batch_size = value.parse().map_err(|_| err(key, value))?
            }
            "epochs" => self.epochs = value.parse().map_err(|_| err(key, value))?,
            "batches_per_epoch" => {
                self.batches_per_epoch = value.parse().map_err(|_| err(key, value))?
            }
            "lr" => self.lr = value.parse().map_err(|_| err(key, value))?,
            "k" => self.k = value.parse().map_err(|_| err(key, value))?,
            "dim" => self.dim = value.parse().map_err(|_| err(key, value))?,
            "tau" => self.tau = value.parse().map_err(|_| err(key, value))?,
            "rho" => self.rho = value.parse().map_err(|_| err(key, value))?,
            "lambda" => self.lambda = value.parse().map_err(|_| err(key, value))?,
            "hop_cap" => {
                self.hop_cap = Some(value.parse().map_err(|_| err(key, value))?);
            }
            "prompt_epochs" => {
                self.prompt_epochs = value.parse().map_err(|_| err(key, value))?
            }
            "prompt_lr" => self.prompt_lr = value.parse().map_err(|_| err(key, value))?,
            "hidden" => self.hidden = value.parse().map_err(|_| err(key, value))?,
            "alpha" => self.alpha = value.parse().map_err(|_| err(key, value))?,
            "m" => self.m = value.parse().map_err(|_| err(key, value))?,
            "num_pred" | "num-pred" => {
                self.num_pred = Some(value.parse().map_err(|_| err(key, value))?)
            }
            "workers" => self.workers = value.parse().map_err(|_| err(key, value))?,
            other => return Err(Error::Usage(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Load `key = value` lines ('#' comments) on top of this config.
    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Usage(format!(
                    "{}:{}: expected 'key = value'",
                    path.display(),
                    lineno + 1
                ))
            })?;
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Canonical echo: one `key = value` line per field, fixed order.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "batches_per_epoch = {}", self.batches_per_epoch);
        let _ = writeln!(s, "lr = {}", self.lr);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(s, "tau = {}", self.tau);
        let _ = writeln!(s, "rho = {}", self.rho);
        let _ = writeln!(s, "lambda = {}", self.lambda);
        match self.hop_cap {
            Some(c) => {
                let _ = writeln!(s, "hop_cap = {c}");
            }
            None => {
                let _ = writeln!(s, "hop_cap = none");
            }
        }
        let _ = writeln!(s, "prompt_epochs = {}", self.prompt_epochs);
        let _ = writeln!(s, "prompt_lr = {}", self.prompt_lr);
        let _ = writeln!(s, "hidden = {}", self.hidden);
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "m = {}", self.m);
        match self.num_pred {
            Some(n) => {
                let _ = writeln!(s, "num_pred = {n}");
            }
            None => {
                let _ = writeln!(s, "num_pred = auto");
            }
        }
        s
    }
}
