//! Run configuration: defaults, then an optional config file, then flags.
//!
//! Config files are either JSON objects or flat `key = value` lines; keys
//! are the long flag names. Unknown keys are rejected.

use std::fs;
use std::io::{self, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use serde::de::{DeserializeOwned, Error as _};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

use super::CliError;
use crate::regress::{Fallback, ThresholdPolicy};

/// Accepts strings, numbers and booleans as text, so that flat config
/// files need no quoting.
pub fn stringish<'de, D: Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    Ok(match Option::<Value>::deserialize(d)? {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s),
        Some(Value::Number(n)) => Some(n.to_string()),
        Some(Value::Bool(b)) => Some(b.to_string()),
        Some(other) => return Err(D::Error::custom(format!("expected a scalar, found {other}"))),
    })
}

fn scalar(text: &str) -> Value {
    let t = text.trim();
    if let Ok(v) = t.parse::<u64>() {
        return Value::from(v);
    }
    if let Ok(v) = t.parse::<i64>() {
        return Value::from(v);
    }
    if let Ok(v) = t.parse::<f64>() {
        if let Some(n) = serde_json::Number::from_f64(v) {
            return Value::Number(n);
        }
    }
    match t {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => Value::String(t.trim_matches('"').to_string()),
    }
}

fn normalize_key(key: &str) -> String {
    key.trim().replace('_', "-")
}

/// Parses a config file into a JSON object.
pub fn parse_config_text(text: &str) -> Result<Map<String, Value>, CliError> {
    if text.trim_start().starts_with('{') {
        let value: Value =
            serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config file is not valid JSON: {e}")))?;
        let Value::Object(map) = value else {
            return Err(CliError::Usage("JSON config must be an object".into()));
        };
        return Ok(map.into_iter().map(|(k, v)| (normalize_key(&k), v)).collect());
    }
    let mut map = Map::new();
    for (number, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') || line.starts_with('[') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("config line {}: expected key = value", number + 1)));
        };
        map.insert(normalize_key(key), scalar(value));
    }
    Ok(map)
}

pub fn load_config_file(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

/// Merges `defaults`, `file` and the explicitly given flags (in that order
/// of precedence, lowest first) and deserializes the result. Returns the
/// typed arguments and the merged object for echoing.
pub fn resolve<T: Serialize + DeserializeOwned>(
    flags: &T,
    file: Option<&Map<String, Value>>,
    defaults: Value,
) -> Result<(T, Value), CliError> {
    let mut merged = match defaults {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    if let Some(file) = file {
        for (k, v) in file {
            merged.insert(k.clone(), v.clone());
        }
    }
    let Value::Object(given) = serde_json::to_value(flags).map_err(|e| CliError::Usage(e.to_string()))? else {
        return Err(CliError::Usage("flags did not serialize to an object".into()));
    };
    for (k, v) in given {
        if !v.is_null() {
            merged.insert(k, v);
        }
    }
    let value = Value::Object(merged);
    let typed = serde_json::from_value(value.clone()).map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
    Ok((typed, value))
}

pub fn required<T>(value: Option<T>, key: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing required setting '{key}'")))
}

/// `"4..10"`, `"4..=10"` or a single level.
pub fn parse_level_range(text: &str) -> Result<RangeInclusive<u32>, CliError> {
    let bad = || CliError::Usage(format!("invalid level range '{text}' (expected e.g. 4..10)"));
    let t = text.trim();
    if let Some((a, b)) = t.split_once("..") {
        let b = b.trim_start_matches('=');
        let lo: u32 = a.trim().parse().map_err(|_| bad())?;
        let hi: u32 = b.trim().parse().map_err(|_| bad())?;
        if hi < lo {
            return Err(bad());
        }
        Ok(lo..=hi)
    } else {
        let j: u32 = t.parse().map_err(|_| bad())?;
        Ok(j..=j)
    }
}

/// Comma-separated list of values.
pub fn parse_list<T: std::str::FromStr>(text: &str, key: &str) -> Result<Vec<T>, CliError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("invalid entry '{}' in '{key}'", s.trim())))
        })
        .collect()
}

pub fn parse_policy(name: &str, g_min: Option<f64>, inverse_pi: Option<f64>) -> Result<ThresholdPolicy, CliError> {
    match name {
        "theory" => Ok(ThresholdPolicy::Theory),
        "density-floor" => Ok(ThresholdPolicy::KnownDensityFloor { g_min: required(g_min, "g-min")? }),
        "decile" => Ok(ThresholdPolicy::EmpiricalDecile),
        "fixed" => Ok(ThresholdPolicy::Fixed { inverse_pi: required(inverse_pi, "inverse-pi")? }),
        other => Err(CliError::Usage(format!(
            "unknown policy '{other}' (expected theory, density-floor, decile or fixed)"
        ))),
    }
}

pub fn parse_fallback(name: &str) -> Result<Fallback, CliError> {
    match name {
        "zero" => Ok(Fallback::Zero),
        "demote-level" => Ok(Fallback::DemoteLevel),
        "neighbor-average" => Ok(Fallback::NeighborAverage),
        other => Err(CliError::Usage(format!(
            "unknown fallback '{other}' (expected zero, demote-level or neighbor-average)"
        ))),
    }
}

pub fn positive(value: f64, key: &str) -> Result<f64, CliError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::Usage(format!("'{key}' must be positive, got {value}")))
    }
}

/// Output directory, created if needed.
pub fn prepare_out_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io_err = |e: io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io_err)
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_and_json_files() {
        let flat = parse_config_text("# run\nseed = 7\nsignal = blocks\nkappa=0.5\nj = 4..10\n").unwrap();
        assert_eq!(flat["seed"], Value::from(7u64));
        assert_eq!(flat["signal"], Value::from("blocks"));
        assert_eq!(flat["j"], Value::from("4..10"));
        let json = parse_config_text("{\"seed\": 7, \"g_min\": 0.5}").unwrap();
        assert_eq!(json["g-min"], Value::from(0.5));
        assert!(parse_config_text("seed 7").is_err());
    }

    #[test]
    fn level_ranges() {
        assert_eq!(parse_level_range("4..10").unwrap(), 4..=10);
        assert_eq!(parse_level_range("4..=10").unwrap(), 4..=10);
        assert_eq!(parse_level_range("5").unwrap(), 5..=5);
        assert!(parse_level_range("10..4").is_err());
        assert!(parse_level_range("a..b").is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
