#![no_main]

use libfuzzer_sys::fuzz_target;
use trackassign_cli::output::{read_compare_csv, write_compare};
use trackassign_cli::Format;

fuzz_target!(|data: &[u8]| {
    let Ok(rows) = read_compare_csv(data) else { return };
    let mut first = Vec::new();
    write_compare(&rows, Format::Csv, &mut first).unwrap();
    let back = read_compare_csv(&first[..]).expect("emitted table must parse");
    let mut second = Vec::new();
    write_compare(&back, Format::Csv, &mut second).unwrap();
    assert_eq!(first, second);
});
