use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use classwatch_core::alert::AlertRule;
use classwatch_core::detector::DEFAULT_MAX_GAP;
use classwatch_core::prosodic::ProsodicConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{name}: {message}")]
    Invalid { name: String, message: String },
}

/// Service settings. Relative paths resolve against the config file's
/// directory when loaded from a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApiConfig {
    #[serde(default = "default_bind")]
    pub bind: IpAddr,
    #[serde(default = "default_port")]
    pub port: u16,
    pub bank: PathBuf,
    pub model: PathBuf,
    pub pinyin: PathBuf,
    pub segmentation: PathBuf,
    pub subjects: PathBuf,
    pub event_log: PathBuf,
    /// Base directory for relative WAV paths in submitted manifests.
    #[serde(default = "default_session_root")]
    pub session_root: PathBuf,
    #[serde(default = "default_max_gap")]
    pub max_gap: usize,
    #[serde(default)]
    pub rule: AlertRule,
    #[serde(default)]
    pub prosodic: ProsodicConfig,
}

fn default_bind() -> IpAddr {
    IpAddr::V4(Ipv4Addr::LOCALHOST)
}

fn default_port() -> u16 {
    8080
}

fn default_session_root() -> PathBuf {
    PathBuf::from(".")
}

fn default_max_gap() -> usize {
    DEFAULT_MAX_GAP
}

/// Environment variables that override file settings.
pub const ENV_OVERRIDES: [&str; 10] = [
    "CLASSWATCH_BIND",
    "CLASSWATCH_PORT",
    "CLASSWATCH_BANK",
    "CLASSWATCH_MODEL",
    "CLASSWATCH_PINYIN",
    "CLASSWATCH_SEGMENTATION",
    "CLASSWATCH_SUBJECTS",
    "CLASSWATCH_EVENT_LOG",
    "CLASSWATCH_SESSION_ROOT",
    "CLASSWATCH_QUALITY_THRESHOLD",
];

impl ApiConfig {
    /// All resource paths under one directory, using the file names written
    /// by the demo corpus.
    pub fn in_dir(dir: &Path) -> Self {
        ApiConfig {
            bind: default_bind(),
            port: default_port(),
            bank: dir.join("bank.json"),
            model: dir.join("model.json"),
            pinyin: dir.join("pinyin.txt"),
            segmentation: dir.join("segmentation.txt"),
            subjects: dir.join("subjects.json"),
            event_log: dir.join("events.jsonl"),
            session_root: dir.to_path_buf(),
            max_gap: DEFAULT_MAX_GAP,
            rule: AlertRule::default(),
            prosodic: ProsodicConfig::default(),
        }
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut config: ApiConfig = toml::from_str(text)?;
        for p in [
            &mut config.bank,
            &mut config.model,
            &mut config.pinyin,
            &mut config.segmentation,
            &mut config.subjects,
            &mut config.event_log,
            &mut config.session_root,
        ] {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Applies `CLASSWATCH_*` overrides from `lookup` (normally `std::env::var`).
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn parsed<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e: T::Err| ConfigError::Invalid {
                name: name.to_string(),
                message: e.to_string(),
            })
        }
        for name in ENV_OVERRIDES {
            let Some(value) = lookup(name) else { continue };
            match name {
                "CLASSWATCH_BIND" => self.bind = parsed(name, &value)?,
                "CLASSWATCH_PORT" => self.port = parsed(name, &value)?,
                "CLASSWATCH_BANK" => self.bank = value.into(),
                "CLASSWATCH_MODEL" => self.model = value.into(),
                "CLASSWATCH_PINYIN" => self.pinyin = value.into(),
                "CLASSWATCH_SEGMENTATION" => self.segmentation = value.into(),
                "CLASSWATCH_SUBJECTS" => self.subjects = value.into(),
                "CLASSWATCH_EVENT_LOG" => self.event_log = value.into(),
                "CLASSWATCH_SESSION_ROOT" => self.session_root = value.into(),
                "CLASSWATCH_QUALITY_THRESHOLD" => self.rule.quality_threshold = parsed(name, &value)?,
                _ => unreachable!(),
            }
        }
        Ok(())
    }

    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.port)
    }

    /// Every input file must exist; the event log may be new but its
    /// directory must exist.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let missing = |name: &str, p: &Path| ConfigError::Invalid {
            name: name.to_string(),
            message: format!("{} does not exist", p.display()),
        };
        for (name, p) in [
            ("bank", &self.bank),
            ("model", &self.model),
            ("pinyin", &self.pinyin),
            ("segmentation", &self.segmentation),
            ("subjects", &self.subjects),
        ] {
            if !p.is_file() {
                return Err(missing(name, p));
            }
        }
        if !self.session_root.is_dir() {
            return Err(missing("session_root", &self.session_root));
        }
        let log_dir = match self.event_log.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        if !log_dir.is_dir() {
            return Err(missing("event_log directory", log_dir));
        }
        self.rule.validate().map_err(|e| ConfigError::Invalid {
            name: "rule".into(),
            message: e.to_string(),
        })
    }
}
