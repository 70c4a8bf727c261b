#![no_main]

use libfuzzer_sys::fuzz_target;
use trackassign_cli::{emit_config, parse_config};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = parse_config(text) else { return };
    // seeds beyond i64 cannot be written back as TOML integers
    let Ok(emitted) = emit_config(&cfg) else { return };
    let again = parse_config(&emitted).expect("emitted config must parse");
    assert_eq!(emit_config(&again).unwrap(), emitted);
});
