#![no_main]

use libfuzzer_sys::fuzz_target;
use metasel::data::IncomeTable;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = IncomeTable::parse_csv("income.csv", data) {
        assert!(t.global_median() > 0.0);
        let _ = t.lookup("55105");
    }
});
