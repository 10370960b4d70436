//! Flat key=value run configuration.
//!
//! A config is a text file of `key=value` lines with `#` comments; command
//! line flags override file keys. Every run echoes its fully resolved
//! configuration (defaults included) to `manifest` in the output directory,
//! and that manifest is itself a valid config: rerunning the command with
//! `--config <out>/manifest` reproduces the run bit-exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Format version stamped into manifests and validated on the way back in.
pub const ARTIFACT_VERSION: &str = "1";

#[derive(Debug, Clone)]
enum Origin {
    File(usize),
    Flag,
}

impl Origin {
    fn describe(&self) -> String {
        match self {
            Origin::File(line) => format!("config line {line}"),
            Origin::Flag => "command line".into(),
        }
    }
}

/// Parsed key=value configuration with consumption tracking: keys are
/// removed as the command reads them, and any survivor is reported as
/// unknown.
#[derive(Debug)]
pub struct Config {
    entries: BTreeMap<String, (String, Origin)>,
}

impl Config {
    /// Loads `path` (when given), applies `overrides` on top, and validates
    /// the reserved `command` / `artifact_version` keys against `command`.
    pub fn load(
        path: Option<&Path>,
        overrides: &[(String, String)],
        command: &str,
    ) -> Result<Self, CliError> {
        let mut entries: BTreeMap<String, (String, Origin)> = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::config(format!("cannot read config {}: {e}", path.display()))
            })?;
            for (i, raw) in text.lines().enumerate() {
                let line_no = i + 1;
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(CliError::config(format!(
                        "{}:{line_no}: expected key=value, got `{line}`",
                        path.display()
                    )));
                };
                let key = key.trim().to_string();
                let value = value.trim().to_string();
                if key.is_empty() {
                    return Err(CliError::config(format!(
                        "{}:{line_no}: empty key",
                        path.display()
                    )));
                }
                if let Some((_, prev)) = entries.get(&key) {
                    return Err(CliError::config(format!(
                        "{}:{line_no}: duplicate key `{key}` (first set on {})",
                        path.display(),
                        prev.describe()
                    )));
                }
                entries.insert(key, (value, Origin::File(line_no)));
            }
        }
        for (key, value) in overrides {
            entries.insert(key.clone(), (value.clone(), Origin::Flag));
        }
        let mut cfg = Self { entries };
        if let Some(stored) = cfg.take("command") {
            if stored != command {
                return Err(CliError::config(format!(
                    "config was written for command `{stored}`, not `{command}`"
                )));
            }
        }
        if let Some(version) = cfg.take("artifact_version") {
            if version != ARTIFACT_VERSION {
                return Err(CliError::config(format!(
                    "unsupported artifact_version `{version}` (this build writes {ARTIFACT_VERSION})"
                )));
            }
        }
        Ok(cfg)
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(v, _)| v)
    }

    fn take_parsed<T, F>(&mut self, key: &str, kind: &str, parse: F) -> Result<Option<T>, CliError>
    where
        F: FnOnce(&str) -> Option<T>,
    {
        match self.entries.remove_entry(key) {
            None => Ok(None),
            Some((key, (value, origin))) => match parse(&value) {
                Some(v) => Ok(Some(v)),
                None => Err(CliError::config(format!(
                    "key `{key}` ({}): expected {kind}, got `{value}`",
                    origin.describe()
                ))),
            },
        }
    }

    pub fn required_string(&mut self, key: &str) -> Result<String, CliError> {
        self.take(key)
            .ok_or_else(|| CliError::config(format!("missing required key `{key}`")))
    }

    pub fn path(&mut self, key: &str) -> Option<PathBuf> {
        self.take(key).map(PathBuf::from)
    }

    pub fn f64(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self
            .take_parsed(key, "a number", |v| v.parse().ok().filter(|x: &f64| x.is_finite()))?
            .unwrap_or(default))
    }

    pub fn usize(&mut self, key: &str, default: usize) -> Result<usize, CliError> {
        Ok(self
            .take_parsed(key, "a nonnegative integer", |v| v.parse().ok())?
            .unwrap_or(default))
    }

    pub fn u64(&mut self, key: &str, default: u64) -> Result<u64, CliError> {
        Ok(self
            .take_parsed(key, "a nonnegative integer", |v| v.parse().ok())?
            .unwrap_or(default))
    }

    pub fn bool(&mut self, key: &str, default: bool) -> Result<bool, CliError> {
        Ok(self
            .take_parsed(key, "true or false", |v| v.parse().ok())?
            .unwrap_or(default))
    }

    /// Either a number or the literal `auto` (mapped to `None`).
    pub fn f64_or_auto(&mut self, key: &str) -> Result<Option<f64>, CliError> {
        Ok(self
            .take_parsed(key, "a number or `auto`", |v| {
                if v == "auto" {
                    Some(None)
                } else {
                    v.parse().ok().filter(|x: &f64| x.is_finite()).map(Some)
                }
            })?
            .flatten())
    }

    /// Comma-separated coordinate triple, e.g. `0.5,0.5,0.5`.
    pub fn triple(&mut self, key: &str, default: [f64; 3]) -> Result<[f64; 3], CliError> {
        Ok(self
            .take_parsed(key, "x,y,z", parse_triple)?
            .unwrap_or(default))
    }

    /// Semicolon-separated list of coordinate triples.
    pub fn triples(&mut self, key: &str) -> Result<Option<Vec<[f64; 3]>>, CliError> {
        self.take_parsed(key, "x,y,z;x,y,z;...", |v| {
            let items: Option<Vec<_>> = v.split(';').map(|s| parse_triple(s.trim())).collect();
            items.filter(|it| !it.is_empty())
        })
    }

    /// Comma-separated list of numbers.
    pub fn f64_list(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        Ok(self
            .take_parsed(key, "a comma-separated number list", |v| {
                let items: Option<Vec<f64>> = v.split(',').map(|s| s.trim().parse().ok()).collect();
                items.filter(|it| !it.is_empty())
            })?
            .unwrap_or_else(|| default.to_vec()))
    }

    /// One of a fixed set of names.
    pub fn choice(&mut self, key: &str, allowed: &[&str], default: &str) -> Result<String, CliError> {
        debug_assert!(allowed.contains(&default));
        let joined = allowed.join("|");
        Ok(self
            .take_parsed(key, &format!("one of {joined}"), |v| {
                allowed.contains(&v).then(|| v.to_string())
            })?
            .unwrap_or_else(|| default.to_string()))
    }

    /// Fails if any key was never consumed (typo'd or misplaced keys).
    pub fn finish(self, command: &str) -> Result<(), CliError> {
        if let Some((key, (_, origin))) = self.entries.into_iter().next() {
            return Err(CliError::config(format!(
                "unknown key `{key}` for `{command}` ({})",
                origin.describe()
            )));
        }
        Ok(())
    }
}

fn parse_triple(v: &str) -> Option<[f64; 3]> {
    let mut it = v.split(',').map(|s| s.trim().parse::<f64>().ok());
    let x = it.next()??;
    let y = it.next()??;
    let z = it.next()??;
    if it.next().is_some() || !(x.is_finite() && y.is_finite() && z.is_finite()) {
        return None;
    }
    Some([x, y, z])
}

/// Renders a value list `key=value` for the manifest. Floats go through
/// Rust's shortest round-trip formatting, so reloading them is exact.
pub fn manifest_text(command: &str, resolved: &[(String, String)]) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "# vortexiter run manifest");
    let _ = writeln!(text, "artifact_version={ARTIFACT_VERSION}");
    let _ = writeln!(text, "command={command}");
    let mut sorted: Vec<_> = resolved.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    for (key, value) in sorted {
        let _ = writeln!(text, "{key}={value}");
    }
    text
}

/// Writes the manifest into `out_dir/manifest`.
pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    resolved: &[(String, String)],
) -> Result<(), CliError> {
    let path = out_dir.join("manifest");
    std::fs::write(&path, manifest_text(command, resolved))
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

/// Formats an f64 so it reloads exactly (shortest round-trip decimal).
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub fn fmt_triple(x: [f64; 3]) -> String {
    format!("{},{},{}", x[0], x[1], x[2])
}

pub fn fmt_triples(xs: &[[f64; 3]]) -> String {
    xs.iter()
        .map(|&t| fmt_triple(t))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn fmt_f64_list(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let path = dir.path().join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn file_keys_parse_and_flags_override() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "run.cfg", "# demo\nn=16\ndt=0.001\n\nseed=7\n");
        let overrides = vec![("dt".to_string(), "0.002".to_string())];
        let mut cfg = Config::load(Some(&path), &overrides, "kernel").unwrap();
        assert_eq!(cfg.usize("n", 0).unwrap(), 16);
        assert_eq!(cfg.f64("dt", 0.0).unwrap(), 0.002);
        assert_eq!(cfg.u64("seed", 0).unwrap(), 7);
        cfg.finish("kernel").unwrap();
    }

    #[test]
    fn malformed_lines_report_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "bad.cfg", "n=16\nnot a pair\n");
        let err = Config::load(Some(&path), &[], "kernel").unwrap_err();
        let msg = err.message();
        assert!(msg.contains("bad.cfg:2"), "{msg}");
        assert!(msg.contains("key=value"), "{msg}");
    }

    #[test]
    fn unknown_keys_and_wrong_command_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "run.cfg", "command=verify\n");
        let err = Config::load(Some(&path), &[], "kernel").unwrap_err();
        assert!(err.message().contains("command `verify`"));

        let path2 = write_file(&dir, "run2.cfg", "mystery=1\n");
        let cfg = Config::load(Some(&path2), &[], "kernel").unwrap();
        let err = cfg.finish("kernel").unwrap_err();
        assert!(err.message().contains("unknown key `mystery`"), "{}", err.message());
        assert!(err.message().contains("line 1"), "{}", err.message());
    }

    #[test]
    fn typed_getters_diagnose_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "run.cfg", "dt=fast\n");
        let mut cfg = Config::load(Some(&path), &[], "kernel").unwrap();
        let err = cfg.f64("dt", 0.0).unwrap_err();
        let msg = err.message();
        assert!(msg.contains("`dt`") && msg.contains("expected a number"), "{msg}");
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn triples_and_lists_round_trip_through_formatting() {
        let targets = vec![[0.5, 0.25, 0.125], [0.1, 0.2, 0.3]];
        let rendered = fmt_triples(&targets);
        let overrides = vec![("targets".to_string(), rendered)];
        let mut cfg = Config::load(None, &overrides, "kernel").unwrap();
        assert_eq!(cfg.triples("targets").unwrap().unwrap(), targets);

        let betas = vec![1.5, 2.0, 4.0];
        let overrides = vec![("betas".to_string(), fmt_f64_list(&betas))];
        let mut cfg = Config::load(None, &overrides, "verify").unwrap();
        assert_eq!(cfg.f64_list("betas", &[]).unwrap(), betas);
    }

    #[test]
    fn manifest_reloads_as_a_config_for_the_same_command() {
        let resolved = vec![
            ("dt".to_string(), fmt_f64(0.1 + 0.2)),
            ("n".to_string(), "32".to_string()),
        ];
        let dir = tempfile::tempdir().unwrap();
        write_manifest(dir.path(), "kernel", &resolved).unwrap();
        let mut cfg = Config::load(Some(&dir.path().join("manifest")), &[], "kernel").unwrap();
        let dt = cfg.f64("dt", 0.0).unwrap();
        assert_eq!(dt, 0.1 + 0.2);
        assert_eq!(cfg.usize("n", 0).unwrap(), 32);
        cfg.finish("kernel").unwrap();

        let err = Config::load(Some(&dir.path().join("manifest")), &[], "verify").unwrap_err();
        assert!(err.message().contains("not `verify`"));
    }
}
