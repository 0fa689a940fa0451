#![no_main]

use husimi_lab::bayes::DirectionLog;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(log) = DirectionLog::read_csv(data, None) {
        let mut buf = Vec::new();
        log.write_csv(&mut buf).expect("write");
        let back = DirectionLog::read_csv(buf.as_slice(), Some(log.trials())).expect("re-read");
        assert_eq!(back.accepted(), log.accepted());
    }
});
