use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo <= self.hi)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn within_percent_scale(&self) -> bool {
        self.lo >= 0.0 && self.hi <= 100.0
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.lo, self.hi)
    }
}

impl FromStr for Interval {
    type Err = String;

    /// Accepts `lo,hi` optionally wrapped in brackets: `[10, 100]`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let trimmed = s.trim().trim_start_matches('[').trim_end_matches(']');
        let (lo, hi) = trimmed
            .split_once(',')
            .ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
        let lo = lo.trim().parse::<f64>().map_err(|e| e.to_string())?;
        let hi = hi.trim().parse::<f64>().map_err(|e| e.to_string())?;
        Ok(Interval::new(lo, hi))
    }
}

/// Every tunable constant of the simulator.
///
/// The allowed ranges, initial observables and the α interval are fixed by the
/// greenhouse model; the remaining values are calibration constants chosen so
/// that the uncontrolled greenhouse collapses in about ten hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub temp_range: Interval,
    pub air_hum_range: Interval,
    pub ground_hum_range: Interval,
    pub init_temp: f64,
    pub init_air_hum: f64,
    pub init_ground_hum: f64,
    pub init_plant_height: f64,
    pub init_pesticide: f64,
    pub harvest_band: Interval,
    pub harvest_bonus: f64,
    pub plant_growth_rate: f64,
    pub episode_cap: u32,
    pub alpha_range: Interval,
    pub weather_check_period: u32,
    pub weather_change_prob: f64,
    pub sunny_prob: f64,
    pub rainy_prob: f64,
    pub outside_temp_range: Interval,
    pub outside_hum_init_range: Interval,
    pub water_temperature: f64,
    pub transpiration_scale: f64,
    /// Whether sunlight drying also takes moisture out of the soil.
    pub sun_dries_ground: bool,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            temp_range: Interval::new(10.0, 100.0),
            air_hum_range: Interval::new(10.0, 90.0),
            ground_hum_range: Interval::new(30.0, 80.0),
            init_temp: 21.0,
            init_air_hum: 50.0,
            init_ground_hum: 50.0,
            init_plant_height: 51.0,
            init_pesticide: 0.0,
            harvest_band: Interval::new(90.0, 99.0),
            harvest_bonus: 100.0,
            plant_growth_rate: 0.1,
            episode_cap: 1000,
            alpha_range: Interval::new(0.01, 0.2),
            weather_check_period: 6,
            weather_change_prob: 0.5,
            sunny_prob: 0.99,
            rainy_prob: 0.0,
            outside_temp_range: Interval::new(40.0, 55.0),
            outside_hum_init_range: Interval::new(10.0, 90.0),
            water_temperature: 15.0,
            transpiration_scale: 2.7,
            sun_dries_ground: true,
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let percent_ranges = [
            ("temp_range", self.temp_range),
            ("air_hum_range", self.air_hum_range),
            ("ground_hum_range", self.ground_hum_range),
            ("harvest_band", self.harvest_band),
            ("alpha_range", self.alpha_range),
            ("outside_hum_init_range", self.outside_hum_init_range),
        ];
        for (name, range) in percent_ranges {
            if range.is_empty() {
                return Err(Error::Config(format!("{name} is empty: [{range}]")));
            }
            if !range.within_percent_scale() {
                return Err(Error::Config(format!("{name} must lie in [0, 100]: [{range}]")));
            }
        }
        if self.outside_temp_range.is_empty() || !self.outside_temp_range.lo.is_finite() {
            return Err(Error::Config("outside_temp_range is empty".into()));
        }
        if self.alpha_range.lo <= 0.0 {
            return Err(Error::Config("alpha_range must be strictly positive".into()));
        }
        if self.episode_cap == 0 {
            return Err(Error::Config("episode_cap must be positive".into()));
        }
        if self.weather_check_period == 0 {
            return Err(Error::Config("weather_check_period must be positive".into()));
        }
        for (name, p) in [
            ("weather_change_prob", self.weather_change_prob),
            ("sunny_prob", self.sunny_prob),
            ("rainy_prob", self.rainy_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be a probability, got {p}")));
            }
        }
        if self.sunny_prob + self.rainy_prob > 1.0 + 1e-12 {
            return Err(Error::Config("sunny_prob + rainy_prob exceeds 1".into()));
        }
        let scalars = [
            ("init_temp", self.init_temp),
            ("init_air_hum", self.init_air_hum),
            ("init_ground_hum", self.init_ground_hum),
            ("init_plant_height", self.init_plant_height),
            ("init_pesticide", self.init_pesticide),
            ("water_temperature", self.water_temperature),
        ];
        for (name, v) in scalars {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 100], got {v}")));
            }
        }
        if !self.plant_growth_rate.is_finite() || !self.harvest_bonus.is_finite() {
            return Err(Error::Config("non-finite growth rate or harvest bonus".into()));
        }
        Ok(())
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are skipped;
    /// keys not present keep their default value.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = EnvConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, format!("expected `key = value`, got `{line}`")))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|msg| Error::parse(line_no, msg))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(v: &str) -> std::result::Result<T, String>
        where
            T::Err: fmt::Display,
        {
            v.parse::<T>().map_err(|e| format!("bad value `{v}`: {e}"))
        }
        match key {
            "temp_range" => self.temp_range = value.parse()?,
            "air_hum_range" => self.air_hum_range = value.parse()?,
            "ground_hum_range" => self.ground_hum_range = value.parse()?,
            "init_temp" => self.init_temp = num(value)?,
            "init_air_hum" => self.init_air_hum = num(value)?,
            "init_ground_hum" => self.init_ground_hum = num(value)?,
            "init_plant_height" => self.init_plant_height = num(value)?,
            "init_pesticide" => self.init_pesticide = num(value)?,
            "harvest_band" => self.harvest_band = value.parse()?,
            "harvest_bonus" => self.harvest_bonus = num(value)?,
            "plant_growth_rate" => self.plant_growth_rate = num(value)?,
            "episode_cap" => self.episode_cap = num(value)?,
            "alpha_range" => self.alpha_range = value.parse()?,
            "weather_check_period" => self.weather_check_period = num(value)?,
            "weather_change_prob" => self.weather_change_prob = num(value)?,
            "sunny_prob" => self.sunny_prob = num(value)?,
            "rainy_prob" => self.rainy_prob = num(value)?,
            "outside_temp_range" => self.outside_temp_range = value.parse()?,
            "outside_hum_init_range" => self.outside_hum_init_range = value.parse()?,
            "water_temperature" => self.water_temperature = num(value)?,
            "transpiration_scale" => self.transpiration_scale = num(value)?,
            "sun_dries_ground" => self.sun_dries_ground = num(value)?,
            "seed" => self.seed = num(value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Renders the config in the same `key = value` form accepted by [`EnvConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("temp_range", self.temp_range.to_string());
        put("air_hum_range", self.air_hum_range.to_string());
        put("ground_hum_range", self.ground_hum_range.to_string());
        put("init_temp", self.init_temp.to_string());
        put("init_air_hum", self.init_air_hum.to_string());
        put("init_ground_hum", self.init_ground_hum.to_string());
        put("init_plant_height", self.init_plant_height.to_string());
        put("init_pesticide", self.init_pesticide.to_string());
        put("harvest_band", self.harvest_band.to_string());
        put("harvest_bonus", self.harvest_bonus.to_string());
        put("plant_growth_rate", self.plant_growth_rate.to_string());
        put("episode_cap", self.episode_cap.to_string());
        put("alpha_range", self.alpha_range.to_string());
        put("weather_check_period", self.weather_check_period.to_string());
        put("weather_change_prob", self.weather_change_prob.to_string());
        put("sunny_prob", self.sunny_prob.to_string());
        put("rainy_prob", self.rainy_prob.to_string());
        put("outside_temp_range", self.outside_temp_range.to_string());
        put("outside_hum_init_range", self.outside_hum_init_range.to_string());
        put("water_temperature", self.water_temperature.to_string());
        put("transpiration_scale", self.transpiration_scale.to_string());
        put("sun_dries_ground", self.sun_dries_ground.to_string());
        put("seed", self.seed.to_string());
        out
    }
}
