#![no_main]

use libfuzzer_sys::fuzz_target;
use qinfo::cli::MatrixDocument;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(doc) = MatrixDocument::parse(text) {
            let _ = doc.to_object(1e-9);
        }
    }
});
