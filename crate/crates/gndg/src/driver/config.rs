//! INI-style configuration: [section] headers with key = value lines,
//! '#' or ';' comments. CLI --set overrides are applied on top.

use crate::error::Error;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Default)]
pub struct Ini {
    /// section -> key -> value (sections and keys lowercased)
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Ini, Error> {
        let mut ini = Ini::default();
        let mut current = String::from("");
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split(|c| c == '#' || c == ';').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') {
                    return Err(Error::Config(format!(
                        "line {}: malformed section header '{raw}'",
                        lineno + 1
                    )));
                }
                current = line[1..line.len() - 1].trim().to_ascii_lowercase();
                ini.sections.entry(current.clone()).or_default();
            } else if let Some(eq) = line.find('=') {
                let key = line[..eq].trim().to_ascii_lowercase();
                let value = line[eq + 1..].trim().to_string();
                ini.sections
                    .entry(current.clone())
                    .or_default()
                    .insert(key, value);
            } else {
                return Err(Error::Config(format!(
                    "line {}: expected key = value, got '{raw}'",
                    lineno + 1
                )));
            }
        }
        Ok(ini)
    }

    pub fn load(path: &std::path::Path) -> Result<Ini, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Ini::parse(&text)
    }

    /// Apply a `section.key=value` override.
    pub fn set_override(&mut self, spec: &str) -> Result<(), Error> {
        let (path, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{spec}' is not section.key=value")))?;
        let (section, key) = path
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("override '{spec}' is not section.key=value")))?;
        self.sections
            .entry(section.trim().to_ascii_lowercase())
            .or_default()
            .insert(key.trim().to_ascii_lowercase(), value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(|s| s.as_str())
    }

    pub fn get_f64(&self, section: &str, key: &str) -> Result<Option<f64>, Error> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("[{section}] {key} = '{v}' is not a number"))),
        }
    }

    pub fn get_usize(&self, section: &str, key: &str) -> Result<Option<usize>, Error> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("[{section}] {key} = '{v}' is not an integer"))),
        }
    }

    pub fn get_bool(&self, section: &str, key: &str) -> Result<Option<bool>, Error> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => Ok(Some(true)),
                "false" | "no" | "off" | "0" => Ok(Some(false)),
                _ => Err(Error::Config(format!(
                    "[{section}] {key} = '{v}' is not a boolean"
                ))),
            },
        }
    }

    /// "x, y" pair.
    pub fn get_pair(&self, section: &str, key: &str) -> Result<Option<(f64, f64)>, Error> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => {
                let parts: Vec<&str> = v.split(',').map(|s| s.trim()).collect();
                if parts.len() != 2 {
                    return Err(Error::Config(format!(
                        "[{section}] {key} = '{v}' is not 'x, y'"
                    )));
                }
                let x = parts[0].parse().map_err(|_| {
                    Error::Config(format!("[{section}] {key}: bad number '{}'", parts[0]))
                })?;
                let y = parts[1].parse().map_err(|_| {
                    Error::Config(format!("[{section}] {key}: bad number '{}'", parts[1]))
                })?;
                Ok(Some((x, y)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_keys_comments() {
        let text = r#"
# comment
[Scenario]
k = 2
t_max = 50.0   ; trailing comment
name = lake-at-rest

[mesh]
source = regular:8x8
"#;
        let ini = Ini::parse(text).unwrap();
        assert_eq!(ini.get("scenario", "k"), Some("2"));
        assert_eq!(ini.get_f64("scenario", "t_max").unwrap(), Some(50.0));
        assert_eq!(ini.get("scenario", "name"), Some("lake-at-rest"));
        assert_eq!(ini.get("mesh", "source"), Some("regular:8x8"));
        assert_eq!(ini.get("mesh", "missing"), None);
    }

    #[test]
    fn overrides_win() {
        let mut ini = Ini::parse("[scenario]\nk = 2\n").unwrap();
        ini.set_override("scenario.k=3").unwrap();
        ini.set_override("output.dir=/tmp/x").unwrap();
        assert_eq!(ini.get("scenario", "k"), Some("3"));
        assert_eq!(ini.get("output", "dir"), Some("/tmp/x"));
        assert!(ini.set_override("bad").is_err());
    }

    #[test]
    fn rejects_malformed() {
        assert!(Ini::parse("[unclosed\nk=2").is_err());
        assert!(Ini::parse("[s]\nnot a kv line").is_err());
    }
}
