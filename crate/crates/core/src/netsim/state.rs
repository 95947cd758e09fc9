use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use super::NetsimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum NetworkMode {
    #[default]
    On,
    Off,
}

impl NetworkMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NetworkMode::On => "on",
            NetworkMode::Off => "off",
        }
    }
}

impl fmt::Display for NetworkMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NetworkMode {
    type Err = NetsimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "on" | "true" => Ok(NetworkMode::On),
            "off" | "false" => Ok(NetworkMode::Off),
            other => Err(NetsimError::Config(format!("invalid mode `{other}`"))),
        }
    }
}

/// Fault injected for one host while the network is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HostOverride {
    /// Name lookups fail.
    Unreachable,
    /// Connections fail with no route to the host.
    NoRoute,
    /// Connections are refused (server unavailable).
    RefuseConnect,
    /// Connections succeed but reset after the given number of response bytes.
    DropAfterBytes(usize),
}

impl fmt::Display for HostOverride {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HostOverride::Unreachable => f.write_str("unreachable"),
            HostOverride::NoRoute => f.write_str("no-route"),
            HostOverride::RefuseConnect => f.write_str("refuse"),
            HostOverride::DropAfterBytes(n) => write!(f, "drop-after:{n}"),
        }
    }
}

impl FromStr for HostOverride {
    type Err = NetsimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "unreachable" => Ok(HostOverride::Unreachable),
            "no-route" => Ok(HostOverride::NoRoute),
            "refuse" => Ok(HostOverride::RefuseConnect),
            _ => s
                .strip_prefix("drop-after:")
                .and_then(|n| n.trim().parse().ok())
                .map(HostOverride::DropAfterBytes)
                .ok_or_else(|| NetsimError::Config(format!("invalid host override `{s}`"))),
        }
    }
}

/// Connectivity seen by every simulated network operation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NetworkState {
    pub mode: NetworkMode,
    /// Only consulted while `mode` is on.
    pub overrides: BTreeMap<String, HostOverride>,
    pub latency: Option<Duration>,
}

impl NetworkState {
    pub fn on() -> Self {
        Self::default()
    }

    pub fn off() -> Self {
        Self {
            mode: NetworkMode::Off,
            ..Self::default()
        }
    }

    pub fn with_mode(mut self, mode: NetworkMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_override(mut self, host: impl Into<String>, o: HostOverride) -> Self {
        self.overrides.insert(host.into(), o);
        self
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = Some(latency);
        self
    }

    pub(crate) fn override_for(&self, host: &str) -> Option<HostOverride> {
        match self.mode {
            NetworkMode::On => self.overrides.get(host).copied(),
            NetworkMode::Off => None,
        }
    }

    /// Parses the `key = value` configuration format:
    ///
    /// ```text
    /// mode = on
    /// latency_ms = 2
    /// override.help.example.org = unreachable
    /// override.api.example.org = drop-after:16
    /// ```
    pub fn parse_config(text: &str) -> Result<Self, NetsimError> {
        let mut state = NetworkState::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(NetsimError::Config(format!("line {}: expected key=value", no + 1)));
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "mode" => state.mode = value.parse()?,
                "latency_ms" => {
                    let ms: u64 = value
                        .parse()
                        .map_err(|_| NetsimError::Config(format!("line {}: invalid latency `{value}`", no + 1)))?;
                    state.latency = (ms > 0).then(|| Duration::from_millis(ms));
                }
                _ => match key.strip_prefix("override.") {
                    Some(host) if !host.is_empty() => {
                        state.overrides.insert(host.to_string(), value.parse()?);
                    }
                    _ => return Err(NetsimError::Config(format!("line {}: unknown key `{key}`", no + 1))),
                },
            }
        }
        Ok(state)
    }

    pub fn load(path: &Path) -> Result<Self, NetsimError> {
        let text = fs::read_to_string(path)
            .map_err(|e| NetsimError::Config(format!("{}: {e}", path.display())))?;
        Self::parse_config(&text)
    }

    /// Inverse of [`NetworkState::parse_config`].
    pub fn to_config(&self) -> String {
        let mut out = format!("mode = {}\n", self.mode);
        if let Some(l) = self.latency {
            out.push_str(&format!("latency_ms = {}\n", l.as_millis()));
        }
        for (host, o) in &self.overrides {
            out.push_str(&format!("override.{host} = {o}\n"));
        }
        out
    }
}
