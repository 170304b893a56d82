//! Discrete-time (one step = one hour) greenhouse simulator.
//!
//! Every hour runs the same fixed pipeline: the chosen action is registered,
//! all active action effects are applied in [`Action`] order, the outside
//! perturbations run (weather, rain, sun, ground/air coupling, clamping,
//! human and insect events) and finally the terminal conditions are checked.
//! Each gradient term draws a fresh coefficient α from `alpha_range`.

mod config;
mod dynamics;
mod rng;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use config::{EnvConfig, Interval};
pub use dynamics::{
    check_terminal, clamp_state, gradient_update, perturb, register_action, tick_effects,
    HUMAN_ABSENCE_HOURS, HUMAN_DWELL_HOURS, HUMAN_ENTRY_PROB, HUMAN_EXIT_PROB, INSECT_PROB,
    PESTICIDE_WINDOW,
};
pub use rng::{sample_alpha, EnvRng, Randomness};

use crate::error::{Error, Result};

/// The seven sensor readings an agent receives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableState {
    pub temp_in: f64,
    pub air_humidity: f64,
    pub ground_humidity: f64,
    pub plant_height: f64,
    pub pesticide_density: f64,
    pub human_present: bool,
    pub insect_present: bool,
}

impl ObservableState {
    pub const LEN: usize = 7;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weather {
    Sunny,
    Rainy,
    Cloudy,
}

/// Environment internals that shape the dynamics but are never observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenState {
    pub outside_temp: f64,
    pub outside_humidity: f64,
    pub weather: Weather,
    pub water_temperature: f64,
    pub hours_since_human: u32,
    pub hours_human_present: u32,
    /// Saturates at [`PESTICIDE_WINDOW`].
    pub hours_since_pesticide: u32,
    pub hours_since_weather_check: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    FanOn,
    CurtainOpen,
    WaterInside,
    WaterOutside,
    PesticideInject,
    LightOn,
    NutrientSpray,
    Harvest,
    /// Harness-only "do nothing"; agents never emit it.
    NoOp,
}

impl Action {
    pub const COUNT: usize = 8;

    /// The actions an agent may choose from, indexed 0..8.
    pub const AGENT_ACTIONS: [Action; 8] = [
        Action::FanOn,
        Action::CurtainOpen,
        Action::WaterInside,
        Action::WaterOutside,
        Action::PesticideInject,
        Action::LightOn,
        Action::NutrientSpray,
        Action::Harvest,
    ];

    pub fn from_index(index: usize) -> Option<Action> {
        Self::AGENT_ACTIONS.get(index).copied()
    }

    /// Agent index, `None` for [`Action::NoOp`].
    pub fn index(self) -> Option<usize> {
        Self::AGENT_ACTIONS.iter().position(|&a| a == self)
    }

    /// How many hours a registered action keeps acting. Zero for actions
    /// that queue no effect.
    pub fn duration(self) -> u32 {
        match self {
            Action::FanOn | Action::WaterInside | Action::PesticideInject | Action::NutrientSpray => 10,
            Action::CurtainOpen => 30,
            Action::WaterOutside => 20,
            Action::LightOn => 50,
            Action::Harvest | Action::NoOp => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::FanOn => "fan_on",
            Action::CurtainOpen => "curtain_open",
            Action::WaterInside => "water_inside",
            Action::WaterOutside => "water_outside",
            Action::PesticideInject => "pesticide_inject",
            Action::LightOn => "light_on",
            Action::NutrientSpray => "nutrient_spray",
            Action::Harvest => "harvest",
            Action::NoOp => "noop",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveEffect {
    pub kind: Action,
    pub remaining_hours: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    None,
    TempOut,
    AirHumOut,
    GroundHumOut,
    HarvestSuccess,
    HarvestFail,
    EpisodeCap,
}

impl TerminalReason {
    pub fn is_terminal(self) -> bool {
        self != TerminalReason::None
    }

    /// The hour counts toward the score: the greenhouse was still viable.
    pub fn survived(self) -> bool {
        matches!(self, TerminalReason::None | TerminalReason::EpisodeCap)
    }

    pub fn name(self) -> &'static str {
        match self {
            TerminalReason::None => "none",
            TerminalReason::TempOut => "temp_out",
            TerminalReason::AirHumOut => "air_hum_out",
            TerminalReason::GroundHumOut => "ground_hum_out",
            TerminalReason::HarvestSuccess => "harvest_success",
            TerminalReason::HarvestFail => "harvest_fail",
            TerminalReason::EpisodeCap => "episode_cap",
        }
    }
}

impl fmt::Display for TerminalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: ObservableState,
    pub reward: f64,
    pub done: bool,
    pub reason: TerminalReason,
}

/// One hour of an episode trace, as exported to JSONL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Clock after the step.
    pub clock: u32,
    #[serde(flatten)]
    pub observation: ObservableState,
    pub action: Action,
    pub reward: f64,
    pub done: bool,
    pub reason: TerminalReason,
}

impl TraceRecord {
    pub fn new(clock: u32, action: Action, step: &StepResult) -> Self {
        Self {
            clock,
            observation: step.observation,
            action,
            reward: step.reward,
            done: step.done,
            reason: step.reason,
        }
    }
}

/// Full world state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub observable: ObservableState,
    pub hidden: HiddenState,
    /// Sorted by action kind; at most one entry per kind.
    pub effects: Vec<ActiveEffect>,
    /// Completed hours.
    pub clock: u32,
    /// Inside temperature when the current hour began; the sun only dries
    /// the air in hours where the inside temperature went up.
    pub hour_start_temp: f64,
}

impl EnvState {
    pub fn effect(&self, kind: Action) -> Option<&ActiveEffect> {
        self.effects.iter().find(|e| e.kind == kind)
    }
}

/// A seeded greenhouse instance.
#[derive(Debug, Clone)]
pub struct Greenhouse {
    config: EnvConfig,
    state: EnvState,
    rng: EnvRng,
    done: bool,
}

impl Greenhouse {
    /// Builds an environment and resets it with `config.seed`.
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = EnvRng::new(config.seed, config.alpha_range);
        let state = initial_state(&config, &mut rng);
        Ok(Self {
            config,
            state,
            rng,
            done: false,
        })
    }

    /// Re-initialises every variable. Observables take their configured
    /// initial values; hidden variables are drawn from the seeded RNG.
    pub fn reset(&mut self, seed: u64) -> ObservableState {
        self.rng = EnvRng::new(seed, self.config.alpha_range);
        self.state = initial_state(&self.config, &mut self.rng);
        self.done = false;
        self.state.observable
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::Usage("step called on a finished episode; reset first".into()));
        }
        let state = &mut self.state;
        state.hour_start_temp = state.observable.temp_in;
        register_action(state, action);
        tick_effects(state, &mut self.rng);
        perturb(state, &self.config, &mut self.rng);
        state.clock += 1;
        let reason = check_terminal(state, &self.config, action);
        let reward = match reason {
            TerminalReason::HarvestSuccess => self.config.harvest_bonus,
            r if r.survived() => 1.0,
            _ => 0.0,
        };
        self.done = reason.is_terminal();
        Ok(StepResult {
            observation: state.observable,
            reward,
            done: self.done,
            reason,
        })
    }

    pub fn observe(&self) -> ObservableState {
        self.state.observable
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut EnvState {
        &mut self.state
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn clock(&self) -> u32 {
        self.state.clock
    }

    /// Number of α coefficients drawn since the last reset.
    pub fn alpha_draws(&self) -> u64 {
        self.rng.alpha_draws()
    }
}

fn initial_state(config: &EnvConfig, rng: &mut EnvRng) -> EnvState {
    let outside_temp = rng.uniform(config.outside_temp_range.lo, config.outside_temp_range.hi);
    let outside_humidity =
        rng.uniform(config.outside_hum_init_range.lo, config.outside_hum_init_range.hi);
    let weather = dynamics::sample_weather(config, rng);
    EnvState {
        observable: ObservableState {
            temp_in: config.init_temp,
            air_humidity: config.init_air_hum,
            ground_humidity: config.init_ground_hum,
            plant_height: config.init_plant_height,
            pesticide_density: config.init_pesticide,
            human_present: false,
            insect_present: false,
        },
        hidden: HiddenState {
            outside_temp,
            outside_humidity,
            weather,
            water_temperature: config.water_temperature,
            hours_since_human: 0,
            hours_human_present: 0,
            hours_since_pesticide: PESTICIDE_WINDOW,
            hours_since_weather_check: 0,
        },
        effects: Vec::new(),
        clock: 0,
        hour_start_temp: config.init_temp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(seed: u64) -> Greenhouse {
        Greenhouse::new(EnvConfig {
            seed,
            ..EnvConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn reset_uses_initial_observables() {
        let obs = env(42).observe();
        assert_eq!(obs.temp_in, 21.0);
        assert_eq!(obs.air_humidity, 50.0);
        assert_eq!(obs.ground_humidity, 50.0);
        assert!(!obs.human_present);
        assert!(!obs.insect_present);
    }

    #[test]
    fn reset_is_deterministic() {
        let mut a = env(7);
        let b = env(7);
        a.step(Action::FanOn).unwrap();
        a.reset(7);
        assert_eq!(a.state(), b.state());
        assert!(a.state().effects.is_empty());
        assert_eq!(a.clock(), 0);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = EnvConfig {
            episode_cap: 0,
            ..EnvConfig::default()
        };
        assert!(matches!(Greenhouse::new(cfg), Err(Error::Config(_))));
    }

    #[test]
    fn stepping_a_finished_episode_is_an_error() {
        let mut g = env(1);
        loop {
            if g.step(Action::NoOp).unwrap().done {
                break;
            }
        }
        assert!(matches!(g.step(Action::NoOp), Err(Error::Usage(_))));
    }

    #[test]
    fn surviving_step_rewards_one() {
        let mut g = env(3);
        let r = g.step(Action::NoOp).unwrap();
        assert_eq!(r.reason, TerminalReason::None);
        assert_eq!(r.reward, 1.0);
        assert_eq!(g.clock(), 1);
    }

    #[test]
    fn early_harvest_fails() {
        let mut g = env(3);
        let r = g.step(Action::Harvest).unwrap();
        assert_eq!(r.reason, TerminalReason::HarvestFail);
        assert!(r.done);
        assert_eq!(r.reward, 0.0);
    }

    #[test]
    fn trace_record_json_shape() {
        let mut g = env(3);
        let step = g.step(Action::LightOn).unwrap();
        let rec = TraceRecord::new(g.clock(), Action::LightOn, &step);
        let json = serde_json::to_string(&rec).unwrap();
        for key in [
            "\"clock\":1",
            "\"temp_in\"",
            "\"air_humidity\"",
            "\"ground_humidity\"",
            "\"plant_height\"",
            "\"pesticide_density\"",
            "\"human_present\"",
            "\"insect_present\"",
            "\"action\":\"light_on\"",
            "\"reward\":1.0",
            "\"done\":false",
            "\"reason\":\"none\"",
        ] {
            assert!(json.contains(key), "{key} missing from {json}");
        }
        let back: TraceRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn action_indices_round_trip() {
        for (i, a) in Action::AGENT_ACTIONS.iter().enumerate() {
            assert_eq!(a.index(), Some(i));
            assert_eq!(Action::from_index(i), Some(*a));
        }
        assert_eq!(Action::NoOp.index(), None);
        assert_eq!(Action::from_index(8), None);
    }
}
