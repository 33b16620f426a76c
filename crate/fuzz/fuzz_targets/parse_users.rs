#![no_main]

use libfuzzer_sys::fuzz_target;
use metasel::data::parse_users;

fuzz_target!(|data: &[u8]| {
    let _ = parse_users("u.user", data, None);
    let vocab = ["artist".to_string(), "writer".to_string()];
    let _ = parse_users("u.user", data, Some(&vocab));
});
