#![no_main]

use libfuzzer_sys::fuzz_target;
use sdca_topk::data::{decode_gram, gram_checksum, parse_gram_sidecar, GramMeta};

// Input: sidecar text, a NUL byte, then the raw payload.
fuzz_target!(|data: &[u8]| {
    let (head, payload) = match data.iter().position(|&b| b == 0) {
        Some(i) => (&data[..i], &data[i + 1..]),
        None => (data, &[][..]),
    };
    if let Ok(text) = std::str::from_utf8(head) {
        if let Ok(meta) = parse_gram_sidecar(text) {
            let _ = decode_gram(payload, &meta);
        }
    }
    // a payload with a matching sidecar decodes iff its values are finite
    if payload.len() % 8 == 0 && !payload.is_empty() {
        let meta = GramMeta {
            rows: 1,
            cols: payload.len() / 8,
            sha256: gram_checksum(payload),
        };
        let finite = payload
            .chunks_exact(8)
            .all(|c| f64::from_le_bytes(c.try_into().unwrap()).is_finite());
        assert_eq!(decode_gram(payload, &meta).is_ok(), finite);
    }
});
