#![no_main]

use libfuzzer_sys::fuzz_target;
use sdca_topk::data::{parse_libsvm, write_libsvm};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    for multilabel in [false, true] {
        if let Ok(ds) = parse_libsvm(text, multilabel) {
            // whatever parses must survive a round trip
            let mut out = Vec::new();
            write_libsvm(&ds, &mut out).unwrap();
            let again = parse_libsvm(std::str::from_utf8(&out).unwrap(), multilabel).unwrap();
            assert_eq!(again.labels, ds.labels);
            assert_eq!(again.features.to_dense(), ds.features.to_dense());
        }
    }
});
