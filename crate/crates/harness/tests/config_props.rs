use proptest::prelude::*;
use pvm_harness::config::KEYS;
use pvm_harness::RunConfig;

proptest! {
    #[test]
    fn text_form_round_trips(
        seed in any::<u64>(),
        rate in 0.0f64..1.0,
        tau in 0.0f64..0.999,
        epochs in 0usize..50,
        mi in any::<bool>(),
        noise in 0.0f64..5.0,
        floor in prop_oneof![Just(f64::INFINITY), 0.0f64..10.0],
    ) {
        let mut c = RunConfig { seed, learning_rate: rate, tau, epochs, motion_integration: mi, ..RunConfig::default() };
        c.saccade.noise = noise;
        c.saccade.threshold_floor = floor;
        let mut back = RunConfig { seed: seed.wrapping_add(1), ..RunConfig::default() };
        back.apply_text(&c.to_text()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn every_key_reads_back_what_was_set(i in 0..KEYS.len()) {
        let c = RunConfig::default();
        let key = KEYS[i].0;
        let text = c.get(key).unwrap();
        let mut d = RunConfig::default();
        d.set(key, &text).unwrap();
        prop_assert_eq!(d.get(key).unwrap(), text);
    }
}
