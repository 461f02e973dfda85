//! Arbitrary text through the run-configuration parser. Every outcome must
//! be either a validated config or a list of line-numbered errors.

#![no_main]

use libfuzzer_sys::fuzz_target;
use sheath::config::{parse_config, parse_config_for, Mode};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Err(errors) = parse_config(&text) {
        assert!(!errors.0.is_empty());
    }
    for mode in [Mode::Profile, Mode::Limit, Mode::Simulate, Mode::Converge, Mode::Entropy] {
        if let Ok(config) = parse_config_for(&text, Some(mode)) {
            assert_eq!(config.mode, mode);
        }
    }
});
