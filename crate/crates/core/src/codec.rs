//! JSON decoding with field-path errors, and the canonical encoding used for
//! plans, transcripts and golden files (sorted keys, no insignificant
//! whitespace, shortest round-trip number formatting).

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    if text.trim().is_empty() {
        return Err(Error::Parse {
            location: "document".into(),
            message: "empty document".into(),
        });
    }
    let de = &mut serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            location: if path == "." {
                format!("line {} column {}", inner.line(), inner.column())
            } else {
                format!("{path} (line {} column {})", inner.line(), inner.column())
            },
            message: inner.to_string(),
        }
    })?;
    Ok(value)
}

pub fn from_value<T: DeserializeOwned>(value: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| Error::Parse {
        location: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}

/// Canonical text of any serializable value.
pub fn canonical<T: Serialize>(value: &T) -> String {
    // Round-tripping through `Value` sorts every object's keys.
    let v = serde_json::to_value(value).expect("serializable value");
    serde_json::to_string(&v).expect("json value always encodes")
}

pub fn canonical_pretty<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable value");
    let mut s = serde_json::to_string_pretty(&v).expect("json value always encodes");
    s.push('\n');
    s
}
