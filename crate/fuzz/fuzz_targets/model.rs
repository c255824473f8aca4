#![no_main]

use libfuzzer_sys::fuzz_target;
use sdca_topk::solver::Model;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = Model::decode(data) {
        assert_eq!(Model::decode(&model.encode()).unwrap(), model);
    }
});
