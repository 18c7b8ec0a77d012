#![no_main]
use bpdmn::format::parse_behaviors;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = parse_behaviors(text);
});
