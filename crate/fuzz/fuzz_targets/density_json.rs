#![no_main]

use husimi_lab::qspin::DensityMatrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rho) = DensityMatrix::from_json(text) {
        // anything accepted must survive a round trip
        let back = DensityMatrix::from_json(&rho.to_json()).expect("round trip");
        assert_eq!(back.dim(), rho.dim());
    }
});
