#![no_main]

use husimi_lab_cli::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_toml(text) {
        let back = RunConfig::from_toml(&cfg.to_toml()).expect("round trip");
        // NaN fields compare unequal, so only check the shape survived
        assert_eq!(back.to_toml(), cfg.to_toml());
    }
});
