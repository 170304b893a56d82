use greenhouse_core::env::{
    check_terminal, perturb, register_action, tick_effects, Action, EnvConfig, EnvRng, Greenhouse, TerminalReason,
    Weather,
};
use proptest::prelude::*;

fn action() -> impl Strategy<Value = Action> {
    (0usize..9).prop_map(|i| Action::from_index(i).unwrap_or(Action::NoOp))
}

fn weather() -> impl Strategy<Value = Weather> {
    prop_oneof![Just(Weather::Sunny), Just(Weather::Rainy), Just(Weather::Cloudy)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn observables_stay_in_unit_range(seed in any::<u64>(), actions in prop::collection::vec(action(), 1..200)) {
        let mut env = Greenhouse::new(EnvConfig::default()).unwrap();
        env.reset(seed);
        for a in actions {
            if env.is_done() {
                break;
            }
            let r = env.step(a).unwrap();
            let o = r.observation;
            for v in [o.temp_in, o.air_humidity, o.ground_humidity, o.plant_height, o.pesticide_density] {
                prop_assert!((0.0..=100.0).contains(&v), "{v} after {a}");
            }
            prop_assert!((0.0..=100.0).contains(&env.state().hidden.outside_humidity));
        }
    }

    #[test]
    fn perturbing_wild_states_clamps(
        seed in any::<u64>(),
        vals in prop::array::uniform5(-1e3f64..1e3),
        w in weather(),
        a in action(),
    ) {
        let cfg = EnvConfig::default();
        let mut env = Greenhouse::new(cfg.clone()).unwrap();
        env.reset(seed);
        let mut s = env.state().clone();
        let o = &mut s.observable;
        [o.temp_in, o.air_humidity, o.ground_humidity, o.plant_height, o.pesticide_density] = vals;
        s.hidden.weather = w;
        let mut rng = EnvRng::new(seed, cfg.alpha_range);
        register_action(&mut s, a);
        tick_effects(&mut s, &mut rng);
        perturb(&mut s, &cfg, &mut rng);
        let o = s.observable;
        for v in [o.temp_in, o.air_humidity, o.ground_humidity, o.plant_height, o.pesticide_density] {
            prop_assert!((0.0..=100.0).contains(&v));
        }
    }

    #[test]
    fn terminal_iff_out_of_range(t in 0.0f64..100.0, ha in 0.0f64..100.0, hg in 0.0f64..100.0) {
        let cfg = EnvConfig::default();
        let mut env = Greenhouse::new(cfg.clone()).unwrap();
        env.reset(0);
        let s = env.state_mut();
        s.observable.temp_in = t;
        s.observable.air_humidity = ha;
        s.observable.ground_humidity = hg;
        let inside = cfg.temp_range.contains(t) && cfg.air_hum_range.contains(ha) && cfg.ground_hum_range.contains(hg);
        let reason = check_terminal(env.state(), &cfg, Action::NoOp);
        prop_assert_eq!(reason == TerminalReason::None, inside);
    }

    #[test]
    fn reset_is_deterministic(seed in any::<u64>()) {
        let run = || {
            let mut env = Greenhouse::new(EnvConfig::default()).unwrap();
            env.reset(seed);
            let mut trace = Vec::new();
            while !env.is_done() {
                trace.push(env.step(Action::NoOp).unwrap());
            }
            (trace, env.alpha_draws())
        };
        prop_assert_eq!(run(), run());
    }
}

#[test]
fn every_effect_lasts_its_duration() {
    let cfg = EnvConfig::default();
    let mut env = Greenhouse::new(cfg.clone()).unwrap();
    for a in &Action::AGENT_ACTIONS[..7] {
        env.reset(1);
        let mut s = env.state().clone();
        let mut rng = EnvRng::new(1, cfg.alpha_range);
        register_action(&mut s, *a);
        let mut hours = 0;
        while s.effect(*a).is_some() {
            tick_effects(&mut s, &mut rng);
            hours += 1;
        }
        assert_eq!(hours, a.duration(), "{a}");
    }
    assert_eq!(
        Action::AGENT_ACTIONS.map(|a| a.duration()),
        [10, 30, 10, 20, 10, 50, 10, 0]
    );
}

#[test]
fn re_registering_restarts_the_timer() {
    let cfg = EnvConfig::default();
    let mut env = Greenhouse::new(cfg.clone()).unwrap();
    env.reset(2);
    let mut s = env.state().clone();
    let mut rng = EnvRng::new(2, cfg.alpha_range);
    register_action(&mut s, Action::CurtainOpen);
    for _ in 0..12 {
        tick_effects(&mut s, &mut rng);
    }
    register_action(&mut s, Action::CurtainOpen);
    assert_eq!(s.effects.len(), 1);
    assert_eq!(s.effect(Action::CurtainOpen).unwrap().remaining_hours, 30);
}

#[test]
fn harvest_band_is_inclusive() {
    let cfg = EnvConfig::default();
    let mut env = Greenhouse::new(cfg.clone()).unwrap();
    env.reset(0);
    for (h, want) in [
        (cfg.harvest_band.lo, TerminalReason::HarvestSuccess),
        (cfg.harvest_band.hi, TerminalReason::HarvestSuccess),
        (cfg.harvest_band.lo - 1e-9, TerminalReason::HarvestFail),
        (cfg.harvest_band.hi + 1e-9, TerminalReason::HarvestFail),
    ] {
        env.state_mut().observable.plant_height = h;
        assert_eq!(check_terminal(env.state(), &cfg, Action::Harvest), want, "height {h}");
    }
}

#[test]
fn cap_ends_an_episode_that_never_fails() {
    let mut cfg = EnvConfig::default();
    cfg.episode_cap = 5;
    // Nothing can leave the viable ranges.
    cfg.temp_range.lo = 0.0;
    cfg.temp_range.hi = 100.0;
    cfg.air_hum_range.lo = 0.0;
    cfg.air_hum_range.hi = 100.0;
    cfg.ground_hum_range.lo = 0.0;
    cfg.ground_hum_range.hi = 100.0;
    let mut env = Greenhouse::new(cfg).unwrap();
    env.reset(3);
    let reasons: Vec<_> = (0..5).map(|_| env.step(Action::NoOp).unwrap().reason).collect();
    assert_eq!(reasons[..4], [TerminalReason::None; 4]);
    assert_eq!(reasons[4], TerminalReason::EpisodeCap);
    assert!(env.step(Action::NoOp).is_err());
}
