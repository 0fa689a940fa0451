#![no_main]

use husimi_lab::cvmode::{CvConfig, CvState};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok((st, sigma, hbar)) = CvState::from_json(text) {
        if let Ok(cfg) = CvConfig::with_scales(sigma, hbar) {
            let (back, _, _) = CvState::from_json(&st.to_json(&cfg)).expect("round trip");
            assert_eq!(back.dim(), st.dim());
        }
    }
});
