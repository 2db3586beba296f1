use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ProtocolError;

/// Versioned name of a modular interface, written `name/version`
/// (for example `core.selection/1`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModuleInterfaceId {
    name: String,
    version: u32,
}

impl ModuleInterfaceId {
    pub fn new(name: impl Into<String>, version: u32) -> Result<Self, ProtocolError> {
        let name = name.into();
        if !valid_name(&name) {
            return Err(ProtocolError::InvalidModuleId(format!("{name}/{version}")));
        }
        if version == 0 {
            return Err(ProtocolError::InvalidModuleId(format!("{name}/{version}")));
        }
        Ok(Self { name, version })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> u32 {
        self.version
    }
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '.')
}

impl fmt::Display for ModuleInterfaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.version)
    }
}

impl FromStr for ModuleInterfaceId {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, version) = s
            .rsplit_once('/')
            .ok_or_else(|| ProtocolError::InvalidModuleId(s.to_string()))?;
        // Reject "+1", "01" and friends so the text form stays canonical.
        if version.is_empty()
            || !version.chars().all(|c| c.is_ascii_digit())
            || (version.len() > 1 && version.starts_with('0'))
        {
            return Err(ProtocolError::InvalidModuleId(s.to_string()));
        }
        let version = version
            .parse::<u32>()
            .map_err(|_| ProtocolError::InvalidModuleId(s.to_string()))?;
        Self::new(name, version).map_err(|_| ProtocolError::InvalidModuleId(s.to_string()))
    }
}

impl Serialize for ModuleInterfaceId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModuleInterfaceId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Shorthand for ids that are known to be valid at compile time.
///
/// Panics on malformed input; only use it with literals.
pub fn mid(s: &str) -> ModuleInterfaceId {
    s.parse().unwrap_or_else(|e| panic!("bad module id literal {s:?}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_form() {
        let id: ModuleInterfaceId = "core.selection/1".parse().unwrap();
        assert_eq!(id.name(), "core.selection");
        assert_eq!(id.version(), 1);
        assert_eq!(id.to_string(), "core.selection/1");
    }

    #[test]
    fn rejects_bad_ids() {
        for bad in [
            "Core.selection/1",
            "core.selection/0",
            "core.selection",
            "/1",
            "1core/1",
            "core-sel/1",
            "core.sel/01",
            "core.sel/+1",
            "core.sel/",
        ] {
            assert!(bad.parse::<ModuleInterfaceId>().is_err(), "{bad} accepted");
        }
    }

    #[test]
    fn serde_as_string() {
        let id = mid("adm.semantic/1");
        let json = serde_json::to_string(&id).unwrap();
        assert_eq!(json, "\"adm.semantic/1\"");
        let back: ModuleInterfaceId = serde_json::from_str(&json).unwrap();
        assert_eq!(back, id);
        assert!(serde_json::from_str::<ModuleInterfaceId>("\"x/0\"").is_err());
    }

    #[test]
    fn versions_are_distinct() {
        assert_ne!(mid("core.menu/1"), mid("core.menu/2"));
    }
}
