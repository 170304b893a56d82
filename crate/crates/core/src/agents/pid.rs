//! Independent per-variable PID loops, the way a smart-farm operator would
//! wire them: each loop watches one observable and the loudest loop picks the
//! corrective action.

use serde::{Deserialize, Serialize};

use crate::env::{Action, EnvConfig, ObservableState};

/// Bound on the magnitude of the integral term accumulator.
pub const INTEGRAL_LIMIT: f64 = 100.0;
/// Controls at or below this magnitude (normalized units) are ignored.
pub const DEADBAND: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub setpoint: f64,
    pub integral: f64,
    pub prev_error: f64,
}

impl PidState {
    pub fn new(kp: f64, ki: f64, kd: f64, setpoint: f64) -> Self {
        Self {
            kp,
            ki,
            kd,
            setpoint,
            integral: 0.0,
            prev_error: 0.0,
        }
    }

    /// One control update with a unit time step. The previous error starts at zero.
    pub fn step(&mut self, measurement: f64) -> f64 {
        let error = self.setpoint - measurement;
        self.integral = (self.integral + error).clamp(-INTEGRAL_LIMIT, INTEGRAL_LIMIT);
        let derivative = error - self.prev_error;
        self.prev_error = error;
        self.kp * error + self.ki * self.integral + self.kd * derivative
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = 0.0;
    }
}

/// When the PID bank is allowed to act.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PidTrial {
    /// Every hour.
    A,
    /// Every third hour.
    B,
    /// From hour 6 on.
    C,
}

impl PidTrial {
    pub fn acts_at(self, hour: u32) -> bool {
        match self {
            PidTrial::A => true,
            PidTrial::B => hour % 3 == 0,
            PidTrial::C => hour >= 6,
        }
    }
}

impl std::str::FromStr for PidTrial {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(PidTrial::A),
            "B" | "b" => Ok(PidTrial::B),
            "C" | "c" => Ok(PidTrial::C),
            other => Err(format!("unknown PID trial `{other}` (expected A, B or C)")),
        }
    }
}

impl std::fmt::Display for PidTrial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let c = match self {
            PidTrial::A => "A",
            PidTrial::B => "B",
            PidTrial::C => "C",
        };
        f.write_str(c)
    }
}

/// Loops for temperature, air humidity and ground humidity, in that
/// (tie-break) priority order. Measurements and setpoints are on the
/// normalized 0..1 scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PidBank {
    pub loops: [PidState; 3],
}

impl PidBank {
    /// Base `(kp, ki, kd)`.
    pub const GAINS: (f64, f64, f64) = (1.0, 0.05, 0.1);
    /// Per-loop multiplier on the base gains. The ground loop is the most
    /// aggressive: its allowed band is the narrowest of the three.
    pub const LOOP_SCALE: [f64; 3] = [1.0, 1.0, 5.0];

    /// Default gains with setpoints at the midpoints of the allowed ranges.
    pub fn for_config(config: &EnvConfig) -> Self {
        let (kp, ki, kd) = Self::GAINS;
        let mids = [
            config.temp_range.midpoint(),
            config.air_hum_range.midpoint(),
            config.ground_hum_range.midpoint(),
        ];
        Self {
            loops: std::array::from_fn(|i| {
                let k = Self::LOOP_SCALE[i];
                PidState::new(k * kp, k * ki, k * kd, mids[i] / 100.0)
            }),
        }
    }

    pub fn reset(&mut self) {
        self.loops.iter_mut().for_each(PidState::reset);
    }

    /// Updates all three loops with the current readings.
    pub fn update(&mut self, obs: &ObservableState) -> [f64; 3] {
        let readings = [obs.temp_in, obs.air_humidity, obs.ground_humidity];
        let mut controls = [0.0; 3];
        for ((pid, reading), out) in self.loops.iter_mut().zip(readings).zip(&mut controls) {
            *out = pid.step(reading / 100.0);
        }
        controls
    }
}

/// Maps the dominant loop's control to an action. A positive control means
/// the variable is below its setpoint.
pub fn select_action(controls: [f64; 3]) -> Action {
    let mut best: Option<(usize, f64)> = None;
    for (i, &c) in controls.iter().enumerate() {
        if c.abs() <= DEADBAND {
            continue;
        }
        // Strict comparison keeps the earlier (higher priority) loop on ties.
        if best.map_or(true, |(_, b)| c.abs() > b.abs()) {
            best = Some((i, c));
        }
    }
    match best {
        None => Action::NoOp,
        Some((0, c)) if c > 0.0 => Action::LightOn,
        Some((1 | 2, c)) if c > 0.0 => Action::WaterInside,
        Some(_) => Action::FanOn,
    }
}

/// The PID policy: the bank measures every hour, the trial decides whether
/// the resulting action is applied.
pub fn pid_policy(obs: &ObservableState, bank: &mut PidBank, trial: PidTrial, hour: u32) -> Action {
    let controls = bank.update(obs);
    if trial.acts_at(hour) {
        select_action(controls)
    } else {
        Action::NoOp
    }
}
