//! Flat `key = value` configuration files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// Every setting a command can read. Unset fields fall back to defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub seed: Option<u64>,
    pub layers: Option<usize>,
    pub dim: Option<usize>,
    pub char_dim: Option<usize>,
    pub ff_hidden: Option<usize>,
    pub pointing_hidden: Option<usize>,
    pub label_hidden: Option<usize>,
    pub head_dim: Option<usize>,
    pub max_len: Option<usize>,
    pub batch: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub warmup: Option<usize>,
    pub oov_dropout: Option<f64>,
    pub clip_norm: Option<f64>,
    pub punct_exclude: Option<Vec<String>>,
    pub log_space_scores: Option<bool>,
    pub delimiter: Option<String>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow::anyhow!("line {line}: bad value for {key}: {e}"))
}

/// Whitespace-separated list; commas are ordinary characters since `,` is
/// itself a punctuation tag.
pub fn split_list(value: &str) -> Vec<String> {
    value.split_whitespace().map(str::to_string).collect()
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        let mut seen = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                bail!("line {line}: expected `key = value`, found `{content}`");
            };
            let key = key.trim().replace('-', "_");
            let value = value.trim();
            if let Some(prev) = seen.insert(key.clone(), line) {
                bail!("line {line}: {key} already set on line {prev}");
            }
            match key.as_str() {
                "train" => s.train = Some(value.into()),
                "dev" => s.dev = Some(value.into()),
                "test" => s.test = Some(value.into()),
                "model" => s.model = Some(value.into()),
                "log" => s.log = Some(value.into()),
                "seed" => s.seed = Some(parse_value(&key, value, line)?),
                "layers" => s.layers = Some(parse_value(&key, value, line)?),
                "dim" => s.dim = Some(parse_value(&key, value, line)?),
                "char_dim" => s.char_dim = Some(parse_value(&key, value, line)?),
                "ff_hidden" => s.ff_hidden = Some(parse_value(&key, value, line)?),
                "pointing_hidden" => s.pointing_hidden = Some(parse_value(&key, value, line)?),
                "label_hidden" => s.label_hidden = Some(parse_value(&key, value, line)?),
                "head_dim" => s.head_dim = Some(parse_value(&key, value, line)?),
                "max_len" => s.max_len = Some(parse_value(&key, value, line)?),
                "batch" => s.batch = Some(parse_value(&key, value, line)?),
                "epochs" => s.epochs = Some(parse_value(&key, value, line)?),
                "lr" => s.lr = Some(parse_value(&key, value, line)?),
                "warmup" => s.warmup = Some(parse_value(&key, value, line)?),
                "oov_dropout" => s.oov_dropout = Some(parse_value(&key, value, line)?),
                "clip_norm" => s.clip_norm = Some(parse_value(&key, value, line)?),
                "punct_exclude" => s.punct_exclude = Some(split_list(value)),
                "log_space_scores" => s.log_space_scores = Some(parse_value(&key, value, line)?),
                "delimiter" => s.delimiter = Some(value.to_string()),
                _ => bail!("line {line}: unknown key {key}"),
            }
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Settings::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(mut self, other: Settings) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            train, dev, test, model, log, seed, layers, dim, char_dim, ff_hidden, pointing_hidden, label_hidden,
            head_dim, max_len, batch, epochs, lr, warmup, oov_dropout, clip_norm, punct_exclude, log_space_scores,
            delimiter
        );
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_comments_and_lists() {
        let s = Settings::parse(
            "# training run\ntrain = data/train.mrg\nseed = 7\nlayers=3\nlr = 0.002 # tuned\n\
             punct-exclude = , . :\nlog_space_scores = true\n",
        )
        .unwrap();
        assert_eq!(s.train, Some(PathBuf::from("data/train.mrg")));
        assert_eq!((s.seed, s.layers, s.lr), (Some(7), Some(3), Some(0.002)));
        assert_eq!(s.punct_exclude, Some(vec![",".into(), ".".into(), ":".into()]));
        assert_eq!(s.log_space_scores, Some(true));
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(Settings::parse("seed = x").unwrap_err().to_string().contains("line 1"));
        assert!(Settings::parse("\nnonsense").unwrap_err().to_string().contains("line 2"));
        assert!(Settings::parse("colour = red").unwrap_err().to_string().contains("unknown key"));
        assert!(Settings::parse("seed = 1\nseed = 2").is_err());
    }

    #[test]
    fn overlay_prefers_later() {
        let file = Settings::parse("seed = 1\ndim = 32").unwrap();
        let flags = Settings {
            seed: Some(9),
            ..Settings::default()
        };
        let s = file.overlay(flags);
        assert_eq!((s.seed, s.dim), (Some(9), Some(32)));
    }
}
