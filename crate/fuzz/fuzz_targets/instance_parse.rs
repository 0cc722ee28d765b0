#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // resolving runs the algebra closure, so keep inputs small
        if let Ok(file) = opindep::io::parse_instance_file(text) {
            if file.ambient_dim <= 4 {
                let _ = file.resolve();
            }
        }
    }
});
