//! Flat `key = value` simulation configuration.
//!
//! ```text
//! # great circle on the line
//! grid.n = 1
//! grid.points = 64
//! grid.lengths = 2pi
//! initial.generator = great_circle
//! initial.k = 2
//! ```
//!
//! Lists are comma separated. Reals accept a `pi` suffix (`2pi`, `0.5pi`).
//! [`SimConfig::to_text`] renders the fully resolved configuration, which
//! parses back to an identical value.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::dynamics::{IntegratorConfig, Scheme, Variant};
use crate::error::{Error, Result};
use crate::field::GridSpec;
use crate::sphere::PenaltyParams;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    GreatCircle {
        k: Vec<i64>,
        omega: f64,
        phase: f64,
    },
    Random {
        max_mode: usize,
        amplitude: f64,
        velocity_amplitude: f64,
        seed: u64,
        smooth_modes: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: GridSpec,
    pub l: usize,
    pub epsilon: f64,
    pub scheme: Scheme,
    pub dt: f64,
    pub variant: Variant,
    pub dealias: bool,
    pub initial: InitialData,
    pub t_final: f64,
    pub sample_every: usize,
    pub diagnostics_path: Option<PathBuf>,
    pub snapshot_path: Option<PathBuf>,
    pub converge_levels: usize,
}

const KEYS: &[&str] = &[
    "grid.n",
    "grid.points",
    "grid.lengths",
    "target.l",
    "penalty.epsilon",
    "integrator.scheme",
    "integrator.dt",
    "integrator.variant",
    "integrator.dealias",
    "initial.generator",
    "initial.k",
    "initial.omega",
    "initial.phase",
    "initial.max_mode",
    "initial.amplitude",
    "initial.velocity_amplitude",
    "initial.seed",
    "initial.smooth_modes",
    "run.t_final",
    "run.sample_every",
    "output.diagnostics",
    "output.snapshot",
    "converge.levels",
];

pub fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let parsed = match s.strip_suffix("pi") {
        Some("") => Ok(PI),
        Some(prefix) => prefix.trim().parse::<f64>().map(|x| x * PI),
        None => s.parse::<f64>(),
    };
    match parsed {
        Ok(x) if x.is_finite() => Ok(x),
        Ok(x) => Err(format!("non-finite number {x}")),
        Err(_) => Err(format!("cannot parse '{s}' as a real number")),
    }
}

/// Key/value entries with the line each came from.
struct Entries {
    map: HashMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                msg: format!("expected 'key = value', got '{content}'"),
            })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::Config { line, msg: format!("unknown key '{key}'") });
            }
            if map.insert(key.to_string(), (line, value.trim().to_string())).is_some() {
                return Err(Error::Config { line, msg: format!("duplicate key '{key}'") });
            }
        }
        Ok(Self { map })
    }

    fn line(&self, key: &str) -> usize {
        self.map.get(key).map(|(l, _)| *l).unwrap_or(0)
    }

    fn get<T>(&self, key: &str, default: T, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Result<T> {
        match self.map.get(key) {
            None => Ok(default),
            Some((line, v)) => parse(v).map_err(|msg| Error::Config { line: *line, msg: format!("{key}: {msg}") }),
        }
    }

    fn get_opt<T>(&self, key: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some((line, v)) => parse(v)
                .map(Some)
                .map_err(|msg| Error::Config { line: *line, msg: format!("{key}: {msg}") }),
        }
    }

    fn fail(&self, key: &str, msg: impl Into<String>) -> Error {
        Error::Config { line: self.line(key), msg: format!("{key}: {}", msg.into()) }
    }
}

fn parse_int<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
    s.trim().parse::<T>().map_err(|_| format!("cannot parse '{}' as an integer", s.trim()))
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    s.split(',').map(|x| item(x.trim())).collect()
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!("expected true or false, got '{other}'")),
    }
}

fn parse_positive(s: &str) -> std::result::Result<f64, String> {
    let x = parse_real(s)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("must be positive, got {x}"))
    }
}

fn broadcast<T: Clone>(mut v: Vec<T>, n: usize) -> std::result::Result<Vec<T>, String> {
    if v.len() == 1 && n > 1 {
        v = vec![v[0].clone(); n];
    }
    if v.len() != n {
        return Err(format!("expected {n} entries, got {}", v.len()));
    }
    Ok(v)
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl SimConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let e = Entries::parse(text)?;
        let n: usize = e.get("grid.n", 1, parse_int)?;
        let points = e.get("grid.points", vec![64], |s| parse_list(s, parse_int::<usize>))?;
        let points = broadcast(points, n).map_err(|m| e.fail("grid.points", m))?;
        let lengths = e.get("grid.lengths", vec![2.0 * PI], |s| parse_list(s, parse_real))?;
        let lengths = broadcast(lengths, n).map_err(|m| e.fail("grid.lengths", m))?;
        let grid = GridSpec::new(points, lengths).map_err(|err| e.fail("grid.points", err.to_string()))?;

        let l: usize = e.get("target.l", 2, parse_int)?;
        if l < 1 {
            return Err(e.fail("target.l", "target sphere dimension must be >= 1"));
        }
        let epsilon = e.get("penalty.epsilon", 0.01, parse_positive)?;
        let scheme = e.get("integrator.scheme", Scheme::StrangSplit, |s| match s {
            "strang" | "strang_split" => Ok(Scheme::StrangSplit),
            "verlet" | "velocity_verlet" => Ok(Scheme::VelocityVerlet),
            other => Err(format!("unknown scheme '{other}'")),
        })?;
        let dt = e.get("integrator.dt", IntegratorConfig::default_dt(epsilon), parse_positive)?;
        let variant = e.get("integrator.variant", Variant::Standard, |s| match s {
            "standard" => Ok(Variant::Standard),
            "tangential_laplacian" => Ok(Variant::TangentialLaplacian),
            other => Err(format!("unknown variant '{other}'")),
        })?;
        let dealias = e.get("integrator.dealias", false, parse_bool)?;

        let generator = e.get("initial.generator", "random".to_string(), |s| Ok(s.to_string()))?;
        let initial = match generator.as_str() {
            "great_circle" => {
                let k = e.get("initial.k", vec![1], |s| parse_list(s, parse_int::<i64>))?;
                let k = broadcast(k, n).map_err(|m| e.fail("initial.k", m))?;
                // linear dispersion relation ω = |ξ|²
                let xi_sq: f64 = k
                    .iter()
                    .zip(grid.lengths())
                    .map(|(&ki, li)| (2.0 * PI * ki as f64 / li).powi(2))
                    .sum();
                let omega = e.get("initial.omega", xi_sq, parse_real)?;
                let phase = e.get("initial.phase", 0.0, parse_real)?;
                InitialData::GreatCircle { k, omega, phase }
            }
            "random" => InitialData::Random {
                max_mode: e.get("initial.max_mode", 4, parse_int)?,
                amplitude: e.get("initial.amplitude", 0.5, parse_real)?,
                velocity_amplitude: e.get("initial.velocity_amplitude", 0.5, parse_real)?,
                seed: e.get("initial.seed", 1, parse_int)?,
                smooth_modes: e.get_opt("initial.smooth_modes", parse_int)?,
            },
            other => return Err(e.fail("initial.generator", format!("unknown generator '{other}'"))),
        };

        let t_final = e.get("run.t_final", 1.0, parse_positive)?;
        let sample_every = e.get("run.sample_every", 10, parse_int::<usize>)?;
        if sample_every == 0 {
            return Err(e.fail("run.sample_every", "must be at least 1"));
        }
        let path = |s: &str| -> std::result::Result<PathBuf, String> {
            if s.is_empty() {
                Err("empty path".into())
            } else {
                Ok(PathBuf::from(s))
            }
        };
        Ok(Self {
            grid,
            l,
            epsilon,
            scheme,
            dt,
            variant,
            dealias,
            initial,
            t_final,
            sample_every,
            diagnostics_path: e.get_opt("output.diagnostics", path)?,
            snapshot_path: e.get_opt("output.snapshot", path)?,
            converge_levels: e.get("converge.levels", 4, parse_int)?,
        })
    }

    pub fn penalty(&self) -> Result<PenaltyParams> {
        PenaltyParams::new(self.epsilon)
    }

    pub fn integrator(&self) -> Result<IntegratorConfig> {
        Ok(IntegratorConfig {
            dt: self.dt,
            scheme: self.scheme,
            variant: self.variant,
            penalty: self.penalty()?,
            dealias: self.dealias,
        })
    }

    /// Fully resolved configuration, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("grid.n", self.grid.dim().to_string());
        kv("grid.points", join(self.grid.points()));
        kv("grid.lengths", join(self.grid.lengths()));
        kv("target.l", self.l.to_string());
        kv("penalty.epsilon", self.epsilon.to_string());
        kv(
            "integrator.scheme",
            match self.scheme {
                Scheme::StrangSplit => "strang",
                Scheme::VelocityVerlet => "verlet",
            }
            .into(),
        );
        kv("integrator.dt", self.dt.to_string());
        kv(
            "integrator.variant",
            match self.variant {
                Variant::Standard => "standard",
                Variant::TangentialLaplacian => "tangential_laplacian",
            }
            .into(),
        );
        kv("integrator.dealias", self.dealias.to_string());
        match &self.initial {
            InitialData::GreatCircle { k, omega, phase } => {
                kv("initial.generator", "great_circle".into());
                kv("initial.k", join(k));
                kv("initial.omega", omega.to_string());
                kv("initial.phase", phase.to_string());
            }
            InitialData::Random { max_mode, amplitude, velocity_amplitude, seed, smooth_modes } => {
                kv("initial.generator", "random".into());
                kv("initial.max_mode", max_mode.to_string());
                kv("initial.amplitude", amplitude.to_string());
                kv("initial.velocity_amplitude", velocity_amplitude.to_string());
                kv("initial.seed", seed.to_string());
                if let Some(m) = smooth_modes {
                    kv("initial.smooth_modes", m.to_string());
                }
            }
        }
        kv("run.t_final", self.t_final.to_string());
        kv("run.sample_every", self.sample_every.to_string());
        if let Some(p) = &self.diagnostics_path {
            kv("output.diagnostics", p.display().to_string());
        }
        if let Some(p) = &self.snapshot_path {
            kv("output.snapshot", p.display().to_string());
        }
        kv("converge.levels", self.converge_levels.to_string());
        s
    }

    /// Recovers the configuration embedded as leading `# ` lines of a
    /// diagnostics file.
    pub fn from_embedded(diagnostics: &str) -> Result<Self> {
        let text: String = diagnostics
            .lines()
            .map_while(|l| l.strip_prefix("# "))
            .map(|l| format!("{l}\n"))
            .collect();
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_round_trip() {
        let cfg = SimConfig::parse("").unwrap();
        assert_eq!(cfg.grid.points(), &[64]);
        assert_eq!(cfg.dt, 1e-3);
        let again = SimConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn great_circle_with_pi_lengths() {
        let text = "grid.n = 2\ngrid.points = 32, 16\ngrid.lengths = 2pi\ninitial.generator = great_circle # wave\ninitial.k = 1,2\n";
        let cfg = SimConfig::parse(text).unwrap();
        assert_eq!(cfg.grid.points(), &[32, 16]);
        assert!((cfg.grid.lengths()[1] - 2.0 * PI).abs() < 1e-15);
        match &cfg.initial {
            InitialData::GreatCircle { k, omega, .. } => {
                assert_eq!(k, &vec![1, 2]);
                assert!((omega - 5.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(SimConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn errors_name_the_line() {
        let err = SimConfig::parse("grid.n = 1\n\ngrid.pionts = 64\n").unwrap_err();
        match err {
            Error::Config { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains("grid.pionts"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(SimConfig::parse("penalty.epsilon = -1\n"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(SimConfig::parse("a line\n"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(
            SimConfig::parse("grid.points = 64\ngrid.points = 32\n"),
            Err(Error::Config { line: 2, .. })
        ));
        assert!(matches!(SimConfig::parse("grid.points = 7\n"), Err(Error::Config { line: 1, .. })));
    }

    #[test]
    fn embedded_config_is_recovered() {
        let cfg = SimConfig::parse("penalty.epsilon = 0.001\ninitial.seed = 9\n").unwrap();
        let file: String = cfg.to_text().lines().map(|l| format!("# {l}\n")).collect::<String>() + "t,E_eps\n0,1\n";
        assert_eq!(SimConfig::from_embedded(&file).unwrap(), cfg);
    }
}
