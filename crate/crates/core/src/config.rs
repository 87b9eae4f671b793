//! Run configuration: flat `key = value` text, one setting per line.
//!
//! Blank lines and lines starting with `#` are skipped. Unknown keys are
//! errors. Lists are comma separated (`g_widths = 128,128,128`); an empty
//! `out_dir` disables file output.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::loss::LossForm;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Gmm8,
    Gmm8Conditional,
}

impl Task {
    pub fn is_conditional(self) -> bool {
        self == Task::Gmm8Conditional
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Gmm8 => "gmm8",
            Task::Gmm8Conditional => "gmm8_conditional",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gmm8" => Ok(Task::Gmm8),
            "gmm8_conditional" => Ok(Task::Gmm8Conditional),
            other => Err(Error::Config(format!("unknown task `{other}`"))),
        }
    }
}

/// Which scoring stage the discriminator ends in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadKind {
    /// Cascading rejection (conditional variant for the conditional task).
    Cascade,
    /// Single bias-free dense score; the traditional discriminator, `N` must be 1.
    Dense,
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeadKind::Cascade => "cr",
            HeadKind::Dense => "dense",
        })
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cr" => Ok(HeadKind::Cascade),
            "dense" => Ok(HeadKind::Dense),
            other => Err(Error::Config(format!("unknown head `{other}` (expected cr or dense)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub task: Task,
    pub n_heads: usize,
    pub head: HeadKind,
    pub loss_form: LossForm,
    pub g_widths: Vec<usize>,
    pub d_widths: Vec<usize>,
    pub latent_dim: usize,
    pub batch_size: usize,
    pub total_g_updates: usize,
    pub d_steps_per_g: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub spectral_norm: bool,
    pub eval_every: usize,
    pub eval_samples: usize,
    pub snapshot_svg: bool,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            task: Task::Gmm8,
            n_heads: 8,
            head: HeadKind::Cascade,
            loss_form: LossForm::Hinge,
            g_widths: vec![128, 128, 128],
            d_widths: vec![128, 128],
            latent_dim: 2,
            batch_size: 64,
            total_g_updates: 4000,
            d_steps_per_g: 5,
            lr: 2e-4,
            beta1: 0.0,
            beta2: 0.9,
            spectral_norm: true,
            eval_every: 200,
            eval_samples: 8000,
            snapshot_svg: false,
            out_dir: Some(PathBuf::from("runs/latest")),
        }
    }
}

pub const KEYS: [&str; 19] = [
    "seed",
    "task",
    "n_heads",
    "head",
    "loss_form",
    "g_widths",
    "d_widths",
    "latent_dim",
    "batch_size",
    "total_g_updates",
    "d_steps_per_g",
    "lr",
    "beta1",
    "beta2",
    "spectral_norm",
    "eval_every",
    "eval_samples",
    "snapshot_svg",
    "out_dir",
];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected a boolean, got `{value}`"))),
    }
}

fn parse_widths(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|w| parse_num::<usize>(key, w.trim())).collect()
}

fn join(widths: &[usize]) -> String {
    widths.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Defaults overridden by the settings in `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got `{line}`", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_num(key, value)?,
            "task" => self.task = value.parse()?,
            "n_heads" => self.n_heads = parse_num(key, value)?,
            "head" => self.head = value.parse()?,
            "loss_form" => self.loss_form = value.parse()?,
            "g_widths" => self.g_widths = parse_widths(key, value)?,
            "d_widths" => self.d_widths = parse_widths(key, value)?,
            "latent_dim" => self.latent_dim = parse_num(key, value)?,
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "total_g_updates" => self.total_g_updates = parse_num(key, value)?,
            "d_steps_per_g" => self.d_steps_per_g = parse_num(key, value)?,
            "lr" => self.lr = parse_num(key, value)?,
            "beta1" => self.beta1 = parse_num(key, value)?,
            "beta2" => self.beta2 = parse_num(key, value)?,
            "spectral_norm" => self.spectral_norm = parse_bool(key, value)?,
            "eval_every" => self.eval_every = parse_num(key, value)?,
            "eval_samples" => self.eval_samples = parse_num(key, value)?,
            "snapshot_svg" => self.snapshot_svg = parse_bool(key, value)?,
            "out_dir" => self.out_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "seed" => self.seed.to_string(),
            "task" => self.task.to_string(),
            "n_heads" => self.n_heads.to_string(),
            "head" => self.head.to_string(),
            "loss_form" => self.loss_form.to_string(),
            "g_widths" => join(&self.g_widths),
            "d_widths" => join(&self.d_widths),
            "latent_dim" => self.latent_dim.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "total_g_updates" => self.total_g_updates.to_string(),
            "d_steps_per_g" => self.d_steps_per_g.to_string(),
            "lr" => self.lr.to_string(),
            "beta1" => self.beta1.to_string(),
            "beta2" => self.beta2.to_string(),
            "spectral_norm" => self.spectral_norm.to_string(),
            "eval_every" => self.eval_every.to_string(),
            "eval_samples" => self.eval_samples.to_string(),
            "snapshot_svg" => self.snapshot_svg.to_string(),
            "out_dir" => self
                .out_dir
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            _ => return None,
        })
    }

    /// Every setting as `key=value`, in [`KEYS`] order. Parses back to `self`.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k}={}\n", self.get(k).unwrap_or_default()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_heads == 0 {
            return fail("n_heads must be at least 1".into());
        }
        if self.batch_size < 2 {
            return fail(format!("batch_size must be at least 2, got {}", self.batch_size));
        }
        if self.latent_dim == 0 {
            return fail("latent_dim must be at least 1".into());
        }
        if self.d_steps_per_g == 0 {
            return fail("d_steps_per_g must be at least 1".into());
        }
        if self.eval_every == 0 {
            return fail("eval_every must be at least 1".into());
        }
        if self.eval_samples < 2 {
            return fail("eval_samples must be at least 2".into());
        }
        if self.g_widths.contains(&0) || self.d_widths.contains(&0) {
            return fail("layer widths must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail("beta1 and beta2 must lie in [0, 1)".into());
        }
        if self.head == HeadKind::Dense && (self.n_heads != 1 || self.task.is_conditional()) {
            return fail("head = dense needs n_heads = 1 and the unconditional task".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn parse_overrides_and_comments() {
        let cfg =
            RunConfig::parse("# comment\nseed = 7\n\nn_heads=2\ng_widths = 16, 16\nloss_form=log_paper\nout_dir=\n")
                .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.n_heads, 2);
        assert_eq!(cfg.g_widths, vec![16, 16]);
        assert_eq!(cfg.loss_form, LossForm::LogPaper);
        assert_eq!(cfg.out_dir, None);
    }

    #[test]
    fn unknown_key_is_error() {
        let err = RunConfig::parse("colour = blue").unwrap_err();
        assert!(err.to_string().contains("colour"));
    }

    #[test]
    fn bad_values_are_errors() {
        assert!(RunConfig::parse("n_heads = zero").is_err());
        assert!(RunConfig::parse("n_heads = 0").is_err());
        assert!(RunConfig::parse("batch_size = 1").is_err());
        assert!(RunConfig::parse("just a line").is_err());
        assert!(RunConfig::parse("head = dense\nn_heads = 4").is_err());
    }

    #[test]
    fn text_round_trip() {
        let cfg = RunConfig {
            lr: 1.25e-3,
            d_widths: vec![],
            task: Task::Gmm8Conditional,
            ..RunConfig::default()
        };
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }
}
