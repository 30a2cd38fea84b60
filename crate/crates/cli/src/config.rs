use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

/// Built-in defaults, overlaid by the JSON file, overlaid by flags. Objects
/// merge key by key; `null` overrides are ignored.
pub fn resolve<C: Serialize + DeserializeOwned + Default>(file: Option<&Path>, flags: Value) -> Result<C> {
    let mut v = serde_json::to_value(C::default())?;
    if let Some(path) = file {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let from_file: Value = serde_json::from_str(&text)
            .map_err(|e| sinklab::Error::Format(format!("config {}: {e}", path.display())))?;
        merge(&mut v, from_file);
    }
    merge(&mut v, flags);
    serde_json::from_value(v).map_err(|e| sinklab::Error::Config(e.to_string()).into())
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                if v.is_null() {
                    continue;
                }
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) if !v.is_null() => *slot = v,
        _ => {}
    }
}
