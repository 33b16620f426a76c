#![no_main]

use libfuzzer_sys::fuzz_target;
use metasel::data::{parse_items, parse_release_year};

fuzz_target!(|data: &[u8]| {
    if let Ok(items) = parse_items("u.item", data, None) {
        if let Some(first) = items.first() {
            assert!(items.iter().all(|it| it.genres.len() == first.genres.len()));
        }
    }
    let _ = parse_items("u.item", data, Some(19));
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = parse_release_year(s);
    }
});
