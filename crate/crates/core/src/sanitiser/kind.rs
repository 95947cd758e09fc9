use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Family of a network error.
///
/// The three built-in families cover socket failures, failed name lookups
/// and unroutable hosts. Third parties may add their own kinds.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NetworkErrorKind {
    SocketFailure,
    UnknownHost,
    NoRouteToHost,
    Custom(String),
}

impl NetworkErrorKind {
    pub const BUILT_IN: [NetworkErrorKind; 3] = [
        NetworkErrorKind::SocketFailure,
        NetworkErrorKind::UnknownHost,
        NetworkErrorKind::NoRouteToHost,
    ];

    pub fn name(&self) -> &str {
        match self {
            NetworkErrorKind::SocketFailure => "SocketFailure",
            NetworkErrorKind::UnknownHost => "UnknownHost",
            NetworkErrorKind::NoRouteToHost => "NoRouteToHost",
            NetworkErrorKind::Custom(name) => name,
        }
    }

    pub fn is_built_in(&self) -> bool {
        !matches!(self, NetworkErrorKind::Custom(_))
    }

    /// Whether `tag` names this kind or a refinement of it. A refinement
    /// extends the kind name with a dot, e.g. `SocketFailure.ConnectionReset`.
    pub fn matches_tag(&self, tag: &str) -> bool {
        tag_refines(tag, self.name())
    }
}

pub(crate) fn tag_refines(tag: &str, base: &str) -> bool {
    match tag.strip_prefix(base) {
        Some(rest) => rest.is_empty() || rest.starts_with('.'),
        None => false,
    }
}

impl fmt::Display for NetworkErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NetworkErrorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s.chars().any(char::is_whitespace) {
            return Err(format!("invalid network error kind `{s}`"));
        }
        Ok(NetworkErrorKind::BUILT_IN
            .into_iter()
            .find(|k| k.name() == s)
            .unwrap_or_else(|| NetworkErrorKind::Custom(s.to_string())))
    }
}

impl Serialize for NetworkErrorKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for NetworkErrorKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
