#![no_main]
use bpdmn::format::{parse_document, ParseOptions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse_document(text, ParseOptions { lenient: false });
    let _ = parse_document(text, ParseOptions { lenient: true });
});
