#![no_main]

use libfuzzer_sys::fuzz_target;
use metasel::data::{parse_ratings, RatingScale};

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = parse_ratings("u.data", data, RatingScale::MOVIELENS) {
        for r in records {
            assert!(RatingScale::MOVIELENS.contains(r.rating));
        }
    }
});
