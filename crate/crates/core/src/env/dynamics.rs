use super::{
    Action, ActiveEffect, EnvConfig, EnvState, Randomness, TerminalReason, Weather,
};

/// A human enters once the greenhouse has been empty this many hours.
pub const HUMAN_ABSENCE_HOURS: u32 = 30;
pub const HUMAN_ENTRY_PROB: f64 = 1.0 / 3.0;
/// A human may leave once present for more than this many hours.
pub const HUMAN_DWELL_HOURS: u32 = 20;
pub const HUMAN_EXIT_PROB: f64 = 0.8;
/// Insects stay away for this many hours after a pesticide application.
pub const PESTICIDE_WINDOW: u32 = 600;
pub const INSECT_PROB: f64 = 0.1;

const SUN_HEAT: f64 = 4.0;
const SUN_DRYING_MAX: f64 = 6.0;
const SUNNY_OUTSIDE_HUM: (f64, f64) = (10.0, 30.0);
const TRANSPIRATION_HEIGHT: f64 = 50.0;
const SATURATION: f64 = 100.0;

/// One explicit step of `ds/dt = α (target - s)` with `dt = 1`, scaled.
pub fn gradient_update(s: f64, target: f64, alpha: f64, scale: f64) -> f64 {
    s + scale * alpha * (target - s)
}

/// Queues the effect of `action`. Re-issuing an active kind restarts its timer.
pub fn register_action(state: &mut EnvState, action: Action) {
    if action == Action::PesticideInject {
        state.hidden.hours_since_pesticide = 0;
    }
    let duration = action.duration();
    if duration == 0 {
        return;
    }
    match state.effects.binary_search_by_key(&action, |e| e.kind) {
        Ok(pos) => state.effects[pos].remaining_hours = duration,
        Err(pos) => state.effects.insert(
            pos,
            ActiveEffect {
                kind: action,
                remaining_hours: duration,
            },
        ),
    }
}

/// Applies one hour of every active effect, in action order, then ages the
/// queue.
pub fn tick_effects(state: &mut EnvState, rng: &mut impl Randomness) {
    let outside_temp = state.hidden.outside_temp;
    let outside_hum = state.hidden.outside_humidity;
    let water_temp = state.hidden.water_temperature;
    for effect in &state.effects {
        let o = &mut state.observable;
        match effect.kind {
            Action::FanOn => {
                let air_before = o.air_humidity;
                o.temp_in = gradient_update(o.temp_in, outside_temp, rng.alpha(), 1.0);
                o.air_humidity = gradient_update(o.air_humidity, outside_hum, rng.alpha(), 1.0);
                o.ground_humidity =
                    gradient_update(o.ground_humidity, air_before, rng.alpha(), 0.1);
                o.pesticide_density *= 0.9;
            }
            Action::CurtainOpen => {
                let air_before = o.air_humidity;
                o.temp_in = gradient_update(o.temp_in, outside_temp, rng.alpha(), 3.0);
                o.air_humidity = gradient_update(o.air_humidity, outside_hum, rng.alpha(), 3.0);
                o.ground_humidity =
                    gradient_update(o.ground_humidity, air_before, rng.alpha(), 0.2);
                o.pesticide_density *= 0.8;
            }
            Action::WaterInside => {
                o.temp_in = gradient_update(o.temp_in, water_temp, rng.alpha(), 3.0);
                o.air_humidity *= 1.1;
                o.ground_humidity *= 1.3;
                o.pesticide_density *= 0.7;
            }
            Action::WaterOutside => {
                o.temp_in += 0.5;
                o.air_humidity *= 0.9;
                o.ground_humidity *= 0.95;
            }
            Action::PesticideInject => {
                o.air_humidity *= 1.1;
                o.ground_humidity *= 1.2;
                o.pesticide_density *= 2.0;
            }
            Action::LightOn => {
                o.temp_in *= 1.01;
                o.air_humidity *= 0.95;
                o.ground_humidity *= 0.98;
            }
            Action::NutrientSpray => {
                o.air_humidity *= 1.1;
                o.ground_humidity *= 1.2;
                o.pesticide_density *= 0.8;
            }
            Action::Harvest | Action::NoOp => {}
        }
    }
    state.effects.retain_mut(|e| {
        e.remaining_hours -= 1;
        e.remaining_hours > 0
    });
}

pub(crate) fn sample_weather(config: &EnvConfig, rng: &mut impl Randomness) -> Weather {
    let u = rng.unit();
    if u < config.sunny_prob {
        Weather::Sunny
    } else if u < config.sunny_prob + config.rainy_prob {
        Weather::Rainy
    } else {
        Weather::Cloudy
    }
}

/// Outside influences for one hour, ending with clamping and the human and
/// insect events.
pub fn perturb(state: &mut EnvState, config: &EnvConfig, rng: &mut impl Randomness) {
    // Weather change.
    let h = &mut state.hidden;
    h.hours_since_weather_check += 1;
    if h.hours_since_weather_check >= config.weather_check_period {
        h.hours_since_weather_check = 0;
        if rng.chance(config.weather_change_prob) {
            h.weather = sample_weather(config, rng);
            h.outside_temp =
                rng.uniform(config.outside_temp_range.lo, config.outside_temp_range.hi);
            let o = &mut state.observable;
            o.temp_in = gradient_update(o.temp_in, h.outside_temp, rng.alpha(), 1.0);
        }
    }

    let h = &mut state.hidden;
    let o = &mut state.observable;
    match h.weather {
        Weather::Rainy => {
            h.outside_humidity = SATURATION;
            o.air_humidity = gradient_update(o.air_humidity, h.outside_humidity, rng.alpha(), 1.0);
            o.temp_in = gradient_update(o.temp_in, h.outside_temp, rng.alpha(), 1.0);
        }
        Weather::Sunny => {
            h.outside_humidity = rng.uniform(SUNNY_OUTSIDE_HUM.0, SUNNY_OUTSIDE_HUM.1);
            o.temp_in = gradient_update(o.temp_in, h.outside_temp, rng.alpha(), 1.0) + SUN_HEAT;
            if o.temp_in > state.hour_start_temp {
                let drying = rng.uniform(0.0, SUN_DRYING_MAX);
                o.air_humidity -= drying;
                if config.sun_dries_ground {
                    o.ground_humidity -= drying;
                }
            }
            if o.plant_height > TRANSPIRATION_HEIGHT {
                o.air_humidity += rng.alpha()
                    * (SATURATION - o.air_humidity)
                    * config.transpiration_scale;
            }
        }
        Weather::Cloudy => {}
    }

    // Ground follows air; the plant grows.
    o.ground_humidity = gradient_update(o.ground_humidity, o.air_humidity, rng.alpha(), 1.0);
    o.plant_height += config.plant_growth_rate;

    clamp_state(state);

    let h = &mut state.hidden;
    let o = &mut state.observable;
    if o.human_present {
        h.hours_human_present += 1;
        if h.hours_human_present > HUMAN_DWELL_HOURS && rng.chance(HUMAN_EXIT_PROB) {
            o.human_present = false;
            h.hours_since_human = 0;
        }
    } else {
        h.hours_since_human += 1;
        if h.hours_since_human >= HUMAN_ABSENCE_HOURS && rng.chance(HUMAN_ENTRY_PROB) {
            o.human_present = true;
            h.hours_human_present = 0;
        }
    }

    h.hours_since_pesticide = (h.hours_since_pesticide + 1).min(PESTICIDE_WINDOW);
    if h.hours_since_pesticide < PESTICIDE_WINDOW {
        o.insect_present = false;
    } else if !o.insect_present && rng.chance(INSECT_PROB) {
        o.insect_present = true;
    }
}

/// Clips every scalar observable and the outside humidity into `[0, 100]`.
pub fn clamp_state(state: &mut EnvState) {
    let o = &mut state.observable;
    for v in [
        &mut o.temp_in,
        &mut o.air_humidity,
        &mut o.ground_humidity,
        &mut o.plant_height,
        &mut o.pesticide_density,
        &mut state.hidden.outside_humidity,
    ] {
        *v = v.clamp(0.0, 100.0);
    }
}

/// Range violations take precedence over harvesting, which takes precedence
/// over the episode cap. Range bounds are inclusive.
pub fn check_terminal(state: &EnvState, config: &EnvConfig, action: Action) -> TerminalReason {
    let o = &state.observable;
    if !config.temp_range.contains(o.temp_in) {
        TerminalReason::TempOut
    } else if !config.air_hum_range.contains(o.air_humidity) {
        TerminalReason::AirHumOut
    } else if !config.ground_hum_range.contains(o.ground_humidity) {
        TerminalReason::GroundHumOut
    } else if action == Action::Harvest {
        if config.harvest_band.contains(o.plant_height) {
            TerminalReason::HarvestSuccess
        } else {
            TerminalReason::HarvestFail
        }
    } else if state.clock >= config.episode_cap {
        TerminalReason::EpisodeCap
    } else {
        TerminalReason::None
    }
}
