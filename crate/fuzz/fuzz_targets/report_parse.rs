#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(report) = opindep::io::parse_report(text) {
            let again = opindep::io::parse_report(&report.to_json()).expect("serialized report parses");
            assert_eq!(again, report);
        }
    }
});
