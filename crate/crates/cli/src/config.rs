//! Layered settings: built-in defaults, then a TOML file section, then
//! command-line flags (applied by each command).

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

/// Defaults overlaid with the `[section]` table of `file`, if any.
///
/// Keys that do not exist in the defaults are rejected so typos surface.
pub fn resolve<T: Serialize + DeserializeOwned + Default>(file: Option<&Path>, section: &str) -> Result<T> {
    let mut value = serde_json::to_value(T::default())?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let table: toml::Table = text.parse().map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
        if let Some(over) = table.get(section) {
            let over = serde_json::to_value(over)?;
            merge(&mut value, over, section)?;
        }
    }
    serde_json::from_value(value).map_err(|e| invalid(format!("config section [{section}]: {e}")))
}

fn merge(base: &mut Value, over: Value, path: &str) -> Result<()> {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                let key = format!("{path}.{k}");
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, &key)?,
                    None => bail!(invalid(format!("unknown config key {key}"))),
                }
            }
        }
        (slot, v) => *slot = v,
    }
    Ok(())
}

pub fn invalid(msg: String) -> anyhow::Error {
    egoloc::Error::InvalidParameter(msg).into()
}

/// Parses `"a,b,c"` into a list.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(|e| invalid(format!("{p:?}: {e}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    struct Inner {
        a: f64,
        b: Option<u32>,
    }

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    struct Outer {
        n: usize,
        inner: Inner,
    }

    fn write(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn file_overrides_nested_defaults() {
        let f = write("[x]\nn = 3\n[x.inner]\nb = 7\n");
        let got: Outer = resolve(Some(f.path()), "x").unwrap();
        assert_eq!(got, Outer { n: 3, inner: Inner { a: 0.0, b: Some(7) } });
        let other: Outer = resolve(Some(f.path()), "y").unwrap();
        assert_eq!(other, Outer::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        let f = write("[x]\nnn = 3\n");
        assert!(resolve::<Outer>(Some(f.path()), "x").is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list::<usize>("10, 30,60").unwrap(), vec![10, 30, 60]);
        assert!(parse_list::<usize>("1,x").is_err());
    }
}
