//! `key = value` config files. Keys are long flag names without the dashes;
//! anything given on the command line wins.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key = value", i + 1);
        };
        let k = k.trim();
        if k.is_empty() || k.starts_with('-') || k == "config" {
            bail!("config line {}: bad key {k:?}", i + 1);
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(argv: &[String]) -> Option<String> {
    argv.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            argv.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    })
}

fn has_flag(argv: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    argv.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
}

/// `argv` with every config entry appended that is not already set.
pub fn merge(argv: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(Path::new(&path)).with_context(|| format!("reading config {path}"))?;
    let mut out = argv.clone();
    for (k, v) in parse(&text)? {
        if !has_flag(&argv, &k) {
            out.push(format!("--{k}={v}"));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_comments() {
        let pairs = parse("window = 64\n# note\ntol=1e-8 # trailing\n\n").unwrap();
        assert_eq!(
            pairs,
            vec![("window".into(), "64".into()), ("tol".into(), "1e-8".into())]
        );
        assert!(parse("nonsense").is_err());
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "window = 64\ntol = 1e-8\n").unwrap();
        let argv: Vec<String> = ["latquant", "norm", "--window", "8", "--config", cfg.to_str().unwrap()]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let merged = merge(argv).unwrap();
        assert!(merged.contains(&"--tol=1e-8".to_string()));
        assert!(!merged.iter().any(|a| a == "--window=64"));
    }
}
