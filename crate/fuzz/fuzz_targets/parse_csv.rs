#![no_main]

use libfuzzer_sys::fuzz_target;
use sheath::io::parse_csv;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    for header in [&["x", "n", "u"][..], &["t", "entropy"][..], &["z"][..]] {
        if let Ok(columns) = parse_csv(&text, header) {
            assert_eq!(columns.len(), header.len());
            assert!(columns.windows(2).all(|w| w[0].len() == w[1].len()));
        }
    }
});
