//! Flat `key = value` configuration with three layers: built-in defaults,
//! a config file, and command-line flags. Later layers win.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use qmimo::{QamOrder, Resolution};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Default,
    File(usize),
    Manifest,
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Default => write!(f, "default"),
            Origin::File(line) => write!(f, "config line {line}"),
            Origin::Manifest => write!(f, "manifest"),
            Origin::Flag => write!(f, "command line"),
        }
    }
}

/// Documented keys and their defaults. An empty default means "unset".
pub const KEYS: &[(&str, &str)] = &[
    ("n_antennas", "256"),
    ("n_users", "20"),
    ("pilot_len", ""),
    ("mod_order", "16"),
    ("bits", "1,2,3,4,full"),
    ("ebn0", "-20:10:1"),
    ("pu_db", ""),
    ("target_ber", "1e-3"),
    ("csi", "estimated"),
    ("expression", "two_term"),
    ("seed", "1"),
    ("workers", "0"),
    ("n_blocks", "auto"),
    ("symbols_per_block", "500"),
    ("scaling", "statistical"),
    ("min_errors", "0"),
    ("bit_cap", "1e10"),
    ("axis", "pilot_len"),
    ("taus", "20:110:10"),
    ("tau_ref", "20"),
    ("ebn0_ref", "-12.9"),
    ("n_range", "50:1000:1"),
    ("antenna_cap", "4096"),
    ("fom", "1432.1e-15"),
    ("sample_rate", "100e6"),
    ("rf_per_antenna", "0"),
    ("static_power", "0"),
    ("noise_ref", "1e-3"),
    ("calibrate_crossing_n", ""),
    ("calibrate_bits", "1"),
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: Origin,
}

#[derive(Debug, Clone)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
}

fn check_key(key: &str, origin: Origin) -> Result<(), CliError> {
    if KEYS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        Err(CliError::usage(format!("{origin}: unknown key `{key}`")))
    }
}

impl Default for Config {
    fn default() -> Self {
        let entries = KEYS
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| {
                (
                    k.to_string(),
                    Entry {
                        value: v.to_string(),
                        origin: Origin::Default,
                    },
                )
            })
            .collect();
        Self { entries }
    }
}

impl Config {
    pub fn set(&mut self, key: &str, value: &str, origin: Origin) -> Result<(), CliError> {
        check_key(key, origin)?;
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.trim().to_string(),
                origin,
            },
        );
        Ok(())
    }

    /// Overlays `key = value` lines. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let origin = Origin::File(i + 1);
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!("{origin}: expected `key = value`, got `{line}`"))
            })?;
            self.set(k.trim(), v, origin)?;
        }
        Ok(())
    }

    /// Overlays the `resolved_config` of a run manifest.
    pub fn apply_manifest(&mut self, json: &str) -> Result<(), CliError> {
        let m: crate::manifest::RunManifest =
            serde_json::from_str(json).map_err(|e| CliError::usage(format!("manifest: {e}")))?;
        for (k, v) in &m.resolved_config {
            self.set(k, v, Origin::Manifest)?;
        }
        Ok(())
    }

    /// Loads a key/value file or, if it parses as JSON, a run manifest.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        if text.trim_start().starts_with('{') {
            self.apply_manifest(&text)
        } else {
            self.apply_text(&text)
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn origin(&self, key: &str) -> Option<Origin> {
        self.entries.get(key).map(|e| e.origin)
    }

    /// Every resolved key, for the manifest.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.entries
            .iter()
            .map(|(k, e)| (k.clone(), e.value.clone()))
            .collect()
    }

    fn field_error(&self, key: &str, msg: impl fmt::Display) -> CliError {
        let origin = self.origin(key).unwrap_or(Origin::Default);
        CliError::usage(format!("{origin}: field `{key}`: {msg}"))
    }

    fn required(&self, key: &str) -> Result<&str, CliError> {
        self.raw(key)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| CliError::usage(format!("missing required key `{key}`")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: fmt::Display,
    {
        let v = self.required(key)?;
        v.parse::<T>()
            .map_err(|e| self.field_error(key, format!("`{v}`: {e}")))
    }

    pub fn parse_opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None | Some("") => Ok(None),
            Some(_) => self.parse(key).map(Some),
        }
    }

    /// Integer that may be written in float notation, e.g. `1e10`.
    pub fn count(&self, key: &str) -> Result<u64, CliError> {
        let v: f64 = self.parse(key)?;
        if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
            Ok(v as u64)
        } else {
            Err(self.field_error(key, format!("`{v}` is not a non-negative integer")))
        }
    }

    pub fn mod_order(&self) -> Result<QamOrder, CliError> {
        let m: u32 = self.parse("mod_order")?;
        QamOrder::new(m).map_err(|e| self.field_error("mod_order", e))
    }

    pub fn resolutions(&self) -> Result<Vec<Resolution>, CliError> {
        let v = self.required("bits")?;
        let list = v
            .split(',')
            .map(|s| s.trim().parse::<Resolution>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| self.field_error("bits", e))?;
        if list.is_empty() {
            return Err(self.field_error("bits", "empty list"));
        }
        Ok(list)
    }

    /// `START:STOP:STEP` (inclusive) or a single value.
    pub fn range(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let v = self.required(key)?;
        parse_range(v).map_err(|e| self.field_error(key, e))
    }

    pub fn int_range(&self, key: &str) -> Result<Vec<usize>, CliError> {
        let vals = self.range(key)?;
        vals.iter()
            .map(|&x| {
                if x >= 0.0 && (x - x.round()).abs() < 1e-9 {
                    Ok(x.round() as usize)
                } else {
                    Err(self.field_error(key, format!("{x} is not a non-negative integer")))
                }
            })
            .collect()
    }
}

pub fn parse_range(v: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("`{s}`: {e}"));
    match parts.as_slice() {
        [x] => Ok(vec![num(x)?]),
        [a, b, s] => {
            let (a, b, s) = (num(a)?, num(b)?, num(s)?);
            if s.is_nan() || s <= 0.0 || !a.is_finite() || !b.is_finite() {
                return Err("step must be positive and bounds finite".into());
            }
            if b < a {
                return Err(format!("empty range {v}"));
            }
            let n = ((b - a) / s + 1e-9).floor() as usize + 1;
            if n > 1_000_000 {
                return Err(format!("range {v} has more than 1e6 points"));
            }
            // round away accumulated binary noise so printed grids are clean
            Ok((0..n)
                .map(|i| ((a + i as f64 * s) * 1e9).round() / 1e9)
                .collect())
        }
        _ => Err(format!("expected START:STOP:STEP, got `{v}`")),
    }
}
