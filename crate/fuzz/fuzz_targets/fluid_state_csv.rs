#![no_main]

use libfuzzer_sys::fuzz_target;
use sheath::euler_limit::FluidState;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok((x, state)) = FluidState::from_csv(&text, 0.0) {
        assert_eq!(x.len(), state.len());
        assert!(state.validate().is_ok());
    }
});
