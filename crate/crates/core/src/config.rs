//! Simulation configuration, presets and the flat `key = value` format.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::{dbm_to_watts, TopologyConfig};
use crate::flow_split::LearningSchedule;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheduler {
    Mrt,
    Zfbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Jfcs,
    /// Equal power per served UE at every RU.
    NumFra,
    /// Flows split evenly over their path sets.
    NumEfsd,
    /// Each flow uses only its nearest RU.
    NumNru,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Jfcs, Scheme::NumFra, Scheme::NumEfsd, Scheme::NumNru];
    pub const BENCHMARKS: [Scheme; 3] = [Scheme::NumFra, Scheme::NumEfsd, Scheme::NumNru];
}

impl FromStr for Scheduler {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mrt" => Ok(Self::Mrt),
            "zfbf" | "zf" => Ok(Self::Zfbf),
            _ => Err(Error::config(format!("unknown scheduler `{s}` (expected mrt or zfbf)"))),
        }
    }
}

impl fmt::Display for Scheduler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mrt => "mrt",
            Self::Zfbf => "zfbf",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jfcs" => Ok(Self::Jfcs),
            "num-fra" => Ok(Self::NumFra),
            "num-efsd" => Ok(Self::NumEfsd),
            "num-nru" => Ok(Self::NumNru),
            _ => Err(Error::config(format!(
                "unknown scheme `{s}` (expected jfcs, num-fra, num-efsd or num-nru)"
            ))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Jfcs => "jfcs",
            Self::NumFra => "num-fra",
            Self::NumEfsd => "num-efsd",
            Self::NumNru => "num-nru",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub topology: TopologyConfig,
    pub frames: usize,
    pub slots_per_frame: usize,
    pub tau: f64,
    pub phi: f64,
    pub learning: LearningSchedule,
    /// Per-frame arrival rates are uniform on `[arrival_lo, arrival_hi]`, bits/s.
    pub arrival_lo: f64,
    pub arrival_hi: f64,
    /// Cap on the admitted rate, bits/s.
    pub a_max: f64,
    /// Bits (and bits/s) per utility unit.
    pub utility_unit: f64,
    pub max_delay_s: f64,
    pub reliability: f64,
    pub paths_per_ue: usize,
    pub scheduler: Scheduler,
    pub scheme: Scheme,
    pub seed: u64,
    pub warmup_fraction: f64,
    pub ia_tol: f64,
    pub ia_max_iter: usize,
    pub inner_max_steps: usize,
    pub output: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            topology: TopologyConfig::default(),
            frames: 10_000,
            slots_per_frame: 10,
            tau: 1e-3,
            phi: 5.0,
            learning: LearningSchedule::default(),
            arrival_lo: 1e9,
            arrival_hi: 3e9,
            a_max: 3e9,
            utility_unit: 1e9,
            max_delay_s: 10e-3,
            reliability: 0.95,
            paths_per_ue: 4,
            scheduler: Scheduler::Zfbf,
            scheme: Scheme::Jfcs,
            seed: 1,
            warmup_fraction: crate::queueing::DEFAULT_WARMUP_FRACTION,
            ia_tol: 1e-5,
            ia_max_iter: 50,
            inner_max_steps: 500,
            output: None,
        }
    }
}

/// Arrival and unit scale of the desk preset relative to the full setup.
pub const DESK_RATE_SCALE: f64 = 1e-2;

impl SimConfig {
    /// Small network that keeps every mechanism: 2 DUs with 2 RUs each,
    /// 4 UEs, 8 antennas, 500 frames. Arrivals, the admission cap and the
    /// utility unit are scaled down so the offered load fits the link
    /// capacity of the smaller network.
    pub fn desk() -> Self {
        let topology = TopologyConfig {
            rus_per_du: vec![2, 2],
            num_ues: 4,
            antennas_per_ru: vec![8; 4],
            ..TopologyConfig::default()
        };
        let base = Self::default();
        Self {
            topology,
            frames: 500,
            arrival_lo: base.arrival_lo * DESK_RATE_SCALE,
            arrival_hi: base.arrival_hi * DESK_RATE_SCALE,
            a_max: base.a_max * DESK_RATE_SCALE,
            utility_unit: base.utility_unit * DESK_RATE_SCALE,
            ..base
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "full" | "default" => Ok(Self::default()),
            _ => Err(Error::config(format!("unknown preset `{name}`"))),
        }
    }

    pub fn mean_arrival(&self) -> f64 {
        0.5 * (self.arrival_lo + self.arrival_hi)
    }

    pub fn total_slots(&self) -> usize {
        self.frames * self.slots_per_frame
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        if self.frames == 0 || self.slots_per_frame == 0 {
            return Err(Error::config("frames and slots_per_frame must be at least 1"));
        }
        let positive = [
            ("tau", self.tau),
            ("phi", self.phi),
            ("lambda", self.learning.lambda),
            ("utility_unit", self.utility_unit),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.arrival_lo >= 0.0 && self.arrival_lo <= self.arrival_hi) {
            return Err(Error::config("need 0 <= arrival_lo <= arrival_hi"));
        }
        if !(self.a_max >= self.arrival_hi && self.a_max.is_finite()) {
            return Err(Error::config("a_max must be finite and at least arrival_hi"));
        }
        if !(self.reliability > 0.0 && self.reliability <= 1.0) {
            return Err(Error::config("reliability must lie in (0, 1]"));
        }
        if !(self.max_delay_s >= 0.0) {
            return Err(Error::config("max_delay must be nonnegative"));
        }
        if self.paths_per_ue == 0 {
            return Err(Error::config("paths_per_ue must be at least 1"));
        }
        if !(self.warmup_fraction >= 0.0 && self.warmup_fraction < 1.0) {
            return Err(Error::config("warmup_fraction must lie in [0, 1)"));
        }
        if self.scheduler == Scheduler::Zfbf && self.paths_per_ue >= self.topology.num_rus() {
            let k = self.topology.num_ues;
            if let Some(m) = self.topology.antennas_per_ru.iter().find(|&&m| m <= k) {
                return Err(Error::config(format!(
                    "zero forcing needs more antennas than UEs ({m} <= {k})"
                )));
            }
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::config(format!("invalid value `{v}` for `{key}`")))
        }
        let t = &mut self.topology;
        match key {
            "preset" => {
                let output = self.output.take();
                *self = Self::preset(value)?;
                self.output = output;
            }
            "frames" => self.frames = num(key, value)?,
            "slots_per_frame" => self.slots_per_frame = num(key, value)?,
            "tau" => self.tau = num(key, value)?,
            "phi" => self.phi = num(key, value)?,
            "lambda" => self.learning.lambda = num(key, value)?,
            "eta_utility_exp" => self.learning.e_utility = num(key, value)?,
            "eta_regret_exp" => self.learning.e_regret = num(key, value)?,
            "eta_split_exp" => self.learning.e_split = num(key, value)?,
            "arrival_lo" => self.arrival_lo = num(key, value)?,
            "arrival_hi" => self.arrival_hi = num(key, value)?,
            "a_max" => self.a_max = num(key, value)?,
            "utility_unit" => self.utility_unit = num(key, value)?,
            "max_delay" => self.max_delay_s = num(key, value)?,
            "reliability" => self.reliability = num(key, value)?,
            "paths_per_ue" => self.paths_per_ue = num(key, value)?,
            "scheduler" => self.scheduler = value.parse()?,
            "scheme" => self.scheme = value.parse()?,
            "seed" => self.seed = num(key, value)?,
            "warmup_fraction" => self.warmup_fraction = num(key, value)?,
            "ia_tol" => self.ia_tol = num(key, value)?,
            "ia_max_iter" => self.ia_max_iter = num(key, value)?,
            "inner_max_steps" => self.inner_max_steps = num(key, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            "num_ues" => t.num_ues = num(key, value)?,
            "rus_per_du" => {
                t.rus_per_du = value
                    .split(',')
                    .map(|s| num(key, s.trim()))
                    .collect::<Result<_>>()?;
                let m = t.antennas_per_ru.first().copied().unwrap_or(1);
                t.antennas_per_ru = vec![m; t.num_rus()];
            }
            "antennas" => {
                let m: usize = num(key, value)?;
                t.antennas_per_ru = vec![m; t.num_rus()];
            }
            "cell_radius" => t.cell_radius_m = num(key, value)?,
            "bandwidth" => t.bandwidth_hz = num(key, value)?,
            "noise_figure" => t.noise_figure_db = num(key, value)?,
            "power_dbm" => t.power_budget_w = dbm_to_watts(num(key, value)?),
            "shadow_sigma" => t.shadow_sigma_db = num(key, value)?,
            _ => return Err(Error::config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies every setting of a `key = value` document. Blank lines and
    /// `#` comments are ignored; a `preset` line resets all earlier keys.
    pub fn apply_str(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: n + 1,
                    msg: format!("expected `key = value`, got `{line}`"),
                });
            };
            self.set(k.trim(), v.trim()).map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line: n + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_str(&text, path)?;
        Ok(cfg)
    }
}
