//! `key = value` config files, merged below flags and `SOE_*` variables.

use std::ffi::OsString;
use std::path::Path;

use soe_core::Error;

/// Flags that exclude each other; a config value for one is dropped when
/// the other is given on the command line or in the environment.
const EXCLUSIVE: &[&[&str]] = &[&["k", "top-ratio"], &["ratios", "ks"], &["fractions", "attr-sweep"]];

pub fn env_name(key: &str) -> String {
    format!("SOE_{}", key.replace('-', "_").to_ascii_uppercase())
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    std::env::var_os("SOE_CONFIG")
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, Error> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Usage(format!("config line {}: expected `key = value`", i + 1))
        })?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(Error::Usage(format!("config line {}: invalid key `{}`", i + 1, k.trim())));
        }
        let v = v.trim();
        let v = v
            .strip_prefix('"')
            .and_then(|s| s.strip_suffix('"'))
            .unwrap_or(v);
        out.push((key, v.to_string()));
    }
    Ok(out)
}

fn given(args: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    let with_value = format!("--{key}=");
    args.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&with_value)
    }) || std::env::var_os(env_name(key)).is_some()
}

/// Appends config entries as flags unless the command line or the
/// environment already sets them.
pub fn merge(args: Vec<OsString>) -> Result<Vec<OsString>, Error> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))?;
    let mut extra = Vec::new();
    for (key, value) in parse(&text)? {
        let blocked = EXCLUSIVE
            .iter()
            .filter(|g| g.contains(&key.as_str()))
            .flat_map(|g| g.iter())
            .any(|k| given(&args, k));
        if blocked || given(&args, &key) {
            continue;
        }
        match value.as_str() {
            "true" => extra.push(OsString::from(format!("--{key}"))),
            "false" => {}
            _ => {
                extra.push(OsString::from(format!("--{key}")));
                extra.push(OsString::from(value));
            }
        }
    }
    let mut args = args;
    args.extend(extra);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs() {
        let kv = parse("# comment\nk = 5\nmissing_policy=ignore\nmissing-token = \"NA\"\n").unwrap();
        assert_eq!(
            kv,
            vec![
                ("k".into(), "5".into()),
                ("missing-policy".into(), "ignore".into()),
                ("missing-token".into(), "NA".into()),
            ]
        );
        assert!(parse("nonsense").is_err());
    }

    #[test]
    fn env_names() {
        assert_eq!(env_name("top-ratio"), "SOE_TOP_RATIO");
    }
}
