#![no_main]
use bpdmn::format::{parse_document, serialize_document, ParseOptions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let Ok(parsed) = parse_document(text, ParseOptions::default()) else {
        return;
    };
    let once = serialize_document(&parsed.document);
    let again = parse_document(&once, ParseOptions::default()).expect("serialized output parses");
    assert_eq!(serialize_document(&again.document), once);
});
