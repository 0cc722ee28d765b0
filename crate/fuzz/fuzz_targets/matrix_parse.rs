#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = opindep::io::parse_matrix(text) {
            let json = serde_json_text(&m);
            assert_eq!(opindep::io::parse_matrix(&json).expect("round trip"), m);
        }
    }
});

fn serde_json_text(m: &opindep::ComplexMatrix) -> String {
    let rows: Vec<String> = m
        .row_iter()
        .map(|r| {
            let entries: Vec<String> = r.iter().map(|z| format!("[{:?},{:?}]", z.re, z.im)).collect();
            format!("[{}]", entries.join(","))
        })
        .collect();
    format!("[{}]", rows.join(","))
}
