#![no_main]

use libfuzzer_sys::fuzz_target;
use sdca_topk::data::parse_csv;

fuzz_target!(|data: &[u8]| {
    for multilabel in [false, true] {
        if let Ok(ds) = parse_csv(data, multilabel) {
            ds.validate().unwrap();
        }
    }
});
