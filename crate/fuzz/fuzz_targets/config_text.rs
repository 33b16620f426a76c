#![no_main]

use libfuzzer_sys::fuzz_target;
use metasel::config::ConfigLayers;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let mut layers = ConfigLayers::new();
    if layers.push_text("fuzz.cfg", text).is_err() {
        return;
    }
    if let Ok(cfg) = layers.resolve() {
        let mut again = ConfigLayers::new();
        again.push_text("snapshot", &cfg.to_text()).expect("snapshot parses");
        assert_eq!(again.resolve().expect("snapshot resolves"), cfg);
    }
});
