#![no_main]

use libfuzzer_sys::fuzz_target;
use metasel::data::parse_vocabulary;

fuzz_target!(|data: &[u8]| {
    let _ = parse_vocabulary("u.genre", data);
});
