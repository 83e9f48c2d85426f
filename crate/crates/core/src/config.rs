//! Flat `key = value` configuration files.
//!
//! Keys are the [`TrainConfig`] field names. Blank lines and lines starting
//! with `#` are ignored. `hidden_dim = none` restores the default of tying
//! the hidden size to the embedding size.

use std::path::Path;

use crate::error::{Error, Result};
use crate::train::TrainConfig;

fn value<T: std::str::FromStr>(raw: &str, key: &str, location: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::parse(location, format!("invalid value {raw:?} for {key}")))
}

/// Applies every assignment in `text` on top of `config`.
pub fn apply_config_text(config: &mut TrainConfig, text: &str, source: &str) -> Result<()> {
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let location = format!("{source}:{}", n + 1);
        let (key, raw) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(&location, "expected key = value"))?;
        let (key, raw) = (key.trim(), raw.trim());
        let loc = location.as_str();
        match key {
            "learning_rate" => config.learning_rate = value(raw, key, loc)?,
            "batch_size" => config.batch_size = value(raw, key, loc)?,
            "dropout_p" => config.dropout_p = value(raw, key, loc)?,
            "dropout_embeddings" => config.dropout_embeddings = value(raw, key, loc)?,
            "dropout_representation" => config.dropout_representation = value(raw, key, loc)?,
            "l2_coeff" => config.l2_coeff = value(raw, key, loc)?,
            "embedding_dim" => config.embedding_dim = value(raw, key, loc)?,
            "hidden_dim" => {
                config.hidden_dim = if raw.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(value(raw, key, loc)?)
                }
            }
            "max_epochs" => config.max_epochs = value(raw, key, loc)?,
            "early_stop_patience" => config.early_stop_patience = value(raw, key, loc)?,
            "seed" => config.seed = value(raw, key, loc)?,
            "dev_fraction" => config.dev_fraction = value(raw, key, loc)?,
            "init_low" => config.init_low = value(raw, key, loc)?,
            "init_high" => config.init_high = value(raw, key, loc)?,
            "fine_tune_embeddings" => config.fine_tune_embeddings = value(raw, key, loc)?,
            other => return Err(Error::parse(loc, format!("unknown key {other:?}"))),
        }
    }
    Ok(())
}

pub fn load_config_file(config: &mut TrainConfig, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    apply_config_text(config, &text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_only_listed_keys() {
        let mut c = TrainConfig::default();
        apply_config_text(
            &mut c,
            "# comment\nlearning_rate = 0.01\n\nhidden_dim=32\ndropout_embeddings = false\n",
            "t",
        )
        .unwrap();
        assert_eq!(c.learning_rate, 0.01);
        assert_eq!(c.hidden_dim, Some(32));
        assert!(!c.dropout_embeddings);
        assert_eq!(c.batch_size, TrainConfig::default().batch_size);
        apply_config_text(&mut c, "hidden_dim = none", "t").unwrap();
        assert_eq!(c.hidden_dim, None);
    }

    #[test]
    fn errors_name_the_line() {
        let mut c = TrainConfig::default();
        let err = apply_config_text(&mut c, "seed = 1\nbogus = 2", "cfg").unwrap_err();
        assert!(err.to_string().contains("cfg:2"), "{err}");
        let err = apply_config_text(&mut c, "batch_size = many", "cfg").unwrap_err();
        assert!(err.to_string().contains("batch_size"), "{err}");
        assert!(apply_config_text(&mut c, "no equals sign", "cfg").is_err());
    }
}
