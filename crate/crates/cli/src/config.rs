use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ini::{Ini, ParseOption};

/// Bad or unknown configuration input. Always names the key.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

pub const COMMANDS: [&str; 5] = ["forward", "invert", "verify", "norm-scan", "constants"];

const PHANTOM_KEYS: [&str; 6] = ["n", "phantom", "center", "scale", "m", "r_max"];

pub fn keys_for(command: &str) -> Vec<&'static str> {
    let own: &[&str] = match command {
        "forward" => &["transform", "lo", "hi", "nodes"],
        "invert" => &[
            "kind",
            "method",
            "ell",
            "eps_schedule",
            "stencil_h",
            "exponent",
            "r_out",
            "g_nodes",
            "angular_nodes",
            "radial_nodes",
            "spacing",
            "lo",
            "hi",
            "nodes",
        ],
        "verify" => &["identity", "tol", "lo", "hi", "nodes"],
        "norm-scan" => &["transform", "p", "q", "s", "lambda1", "lambda2"],
        "constants" => return vec!["n", "ell"],
        _ => &[],
    };
    PHANTOM_KEYS.iter().chain(own).copied().collect()
}

/// Comma-separated numbers, written back the same way.
#[derive(Debug, Clone, PartialEq)]
pub struct List(pub Vec<f64>);

impl FromStr for List {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| format!("`{}` is not a number", t.trim())))
            .collect::<Result<Vec<_>, _>>()
            .map(List)
    }
}

impl fmt::Display for List {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Comma-separated node counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Counts(pub Vec<usize>);

impl FromStr for Counts {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| format!("`{}` is not a count", t.trim())))
            .collect::<Result<Vec<_>, _>>()
            .map(Counts)
    }
}

impl fmt::Display for Counts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// File values for one command (its section over the global keys) plus the
/// record of every resolved parameter.
pub struct Resolver {
    command: &'static str,
    file: BTreeMap<String, String>,
    pub resolved: Vec<(String, String)>,
}

impl Resolver {
    pub fn new(command: &'static str, path: Option<&Path>) -> anyhow::Result<Self> {
        let mut file = BTreeMap::new();
        if let Some(path) = path {
            let opt = ParseOption {
                enabled_quote: false,
                enabled_escape: false,
                ..ParseOption::default()
            };
            let ini = Ini::load_from_file_opt(path, opt)
                .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
            let all: Vec<&str> = COMMANDS.iter().flat_map(|c| keys_for(c)).collect();
            let mut section_values = BTreeMap::new();
            for (section, props) in ini.iter() {
                match section {
                    None => {
                        for (k, v) in props.iter() {
                            if !all.contains(&k) {
                                return Err(config_error(format!("unknown config key `{k}`")));
                            }
                            file.insert(k.to_string(), v.to_string());
                        }
                    }
                    Some(name) => {
                        if !COMMANDS.contains(&name) {
                            return Err(config_error(format!("unknown config section `[{name}]`")));
                        }
                        let known = keys_for(name);
                        for (k, v) in props.iter() {
                            if !known.contains(&k) {
                                return Err(config_error(format!("unknown config key `{k}` in section [{name}]")));
                            }
                            if name == command {
                                section_values.insert(k.to_string(), v.to_string());
                            }
                        }
                    }
                }
            }
            let own = keys_for(command);
            file.retain(|k, _| own.contains(&k.as_str()));
            file.extend(section_values);
        }
        Ok(Self {
            command,
            file,
            resolved: Vec::new(),
        })
    }

    /// Flag, then file, then nothing.
    pub fn get_opt<T>(&mut self, key: &str, flag: Option<T>) -> anyhow::Result<Option<T>>
    where
        T: FromStr + fmt::Display,
        T::Err: fmt::Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(raw) => Some(
                    raw.parse::<T>()
                        .map_err(|e| config_error(format!("invalid value for `{key}` in [{}]: {e}", self.command)))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.resolved.push((key.to_string(), v.to_string()));
        }
        Ok(value)
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: impl FnOnce() -> T) -> anyhow::Result<T>
    where
        T: FromStr + fmt::Display,
        T::Err: fmt::Display,
    {
        match self.get_opt(key, flag)? {
            Some(v) => Ok(v),
            None => {
                let v = default();
                self.resolved.push((key.to_string(), v.to_string()));
                Ok(v)
            }
        }
    }

    /// String-valued key parsed into a library type, recorded as written.
    pub fn get_parsed<T>(&mut self, key: &str, flag: Option<String>, default: &str) -> anyhow::Result<T>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        let raw = self.get(key, flag, || default.to_string())?;
        raw.parse::<T>()
            .map_err(|e| config_error(format!("invalid value for `{key}`: {e}")))
    }
}
