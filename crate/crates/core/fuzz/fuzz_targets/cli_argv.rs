#![no_main]

use libfuzzer_sys::fuzz_target;

// One argument per line.
fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let args: Vec<&str> = text.lines().collect();
    let _ = qinfo::cli::run(std::iter::once("qinfo").chain(args));
});
