#![no_main]

use libfuzzer_sys::fuzz_target;
use trackassign_cli::TargetRange;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(r) = text.parse::<TargetRange>() else { return };
    assert!(r.lo >= 1 && r.lo <= r.hi);
    assert_eq!(r.to_string().parse::<TargetRange>(), Ok(r));
});
