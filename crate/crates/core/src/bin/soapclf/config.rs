//! Config-file overlay: values in the file replace the flag-derived defaults.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use soapclf::{Error, Result};

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    root: serde_json::Map<String, Value>,
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
            message: e.message().to_string(),
        })?;
        let value = serde_json::to_value(table).map_err(|e| Error::InvalidInput(e.to_string()))?;
        match value {
            Value::Object(root) => Ok(ConfigFile { root }),
            _ => unreachable!("a TOML document is a table"),
        }
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.root
            .get(key)
            .map(|v| {
                v.as_u64()
                    .ok_or_else(|| Error::InvalidInput(format!("config key {key} must be a non-negative integer")))
            })
            .transpose()
    }

    /// Whether the file sets the dotted key `path`.
    pub fn has(&self, path: &str) -> bool {
        let mut parts = path.split('.');
        let Some(mut v) = parts.next().and_then(|k| self.root.get(k)) else {
            return false;
        };
        for k in parts {
            match v.get(k) {
                Some(next) => v = next,
                None => return false,
            }
        }
        true
    }

    /// `base` with the `section` table of the file laid over it.
    pub fn overlay<T: Serialize + DeserializeOwned>(&self, section: &str, base: T) -> Result<T> {
        let Some(over) = self.root.get(section) else {
            return Ok(base);
        };
        let mut v = serde_json::to_value(&base).map_err(|e| Error::InvalidInput(e.to_string()))?;
        merge(&mut v, over.clone());
        serde_json::from_value(v).map_err(|e| Error::InvalidInput(format!("config section [{section}]: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use soapclf::synth::SynthConfig;

    #[test]
    fn file_values_win() {
        let c = ConfigFile::parse("seed = 9\n[synth]\nn_transcripts = 3\n[synth.corruption]\nturn_merge_rate = 0.5\n").unwrap();
        assert_eq!(c.u64("seed").unwrap(), Some(9));
        let base = SynthConfig {
            n_transcripts: 50,
            min_utterances: 7,
            ..SynthConfig::default()
        };
        let s = c.overlay("synth", base).unwrap();
        assert_eq!(s.n_transcripts, 3);
        assert_eq!(s.min_utterances, 7);
        assert_eq!(s.corruption.turn_merge_rate, 0.5);
        assert!(c.has("synth.corruption.turn_merge_rate"));
        assert!(!c.has("synth.corruption.turn_split_rate"));
        assert!(!c.has("train"));
    }

    #[test]
    fn bad_values_are_reported() {
        assert!(ConfigFile::parse("seed = ").is_err());
        let c = ConfigFile::parse("[synth]\nn_transcripts = \"many\"\n").unwrap();
        assert!(c.overlay("synth", SynthConfig::default()).is_err());
    }
}
