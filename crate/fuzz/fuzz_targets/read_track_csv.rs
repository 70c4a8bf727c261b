#![no_main]

use libfuzzer_sys::fuzz_target;
use trackassign_cli::output::{read_track_csv, write_track};
use trackassign_cli::Format;

fuzz_target!(|data: &[u8]| {
    let Ok(rows) = read_track_csv(data) else { return };
    let mut first = Vec::new();
    write_track(&rows, Format::Csv, &mut first).unwrap();
    let back = read_track_csv(&first[..]).expect("emitted table must parse");
    let mut second = Vec::new();
    write_track(&back, Format::Csv, &mut second).unwrap();
    assert_eq!(first, second);
});
