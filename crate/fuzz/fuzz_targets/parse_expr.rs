#![no_main]
use bpdmn::expr::parse_expr;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(e) = parse_expr(text) {
        // Display output must parse back to the same tree.
        let printed = e.to_string();
        assert_eq!(parse_expr(&printed).as_ref(), Ok(&e), "{printed}");
    }
});
