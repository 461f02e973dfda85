#![no_main]

use libfuzzer_sys::fuzz_target;
use sheath::profiles::ProfileTable;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(table) = ProfileTable::parse(&text) {
        let z_end = *table.z.last().unwrap();
        if let Ok(profile) = table.into_profile(1.0, 1.0) {
            for z in [0.0, 0.5 * z_end, z_end, 2.0 * z_end + 1.0] {
                let _ = profile.eval(z);
                let _ = profile.n_layer_at(z);
            }
            let _ = profile.layer_mass();
        }
    }
});
