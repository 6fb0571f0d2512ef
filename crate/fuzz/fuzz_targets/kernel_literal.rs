#![no_main]

use kpolar::gf2kernel::{is_polarizing, partial_distances};
use kpolar::BitMatrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(g) = text.parse::<BitMatrix>() else { return };
    let again: BitMatrix = g.to_literal().parse().expect("literal of a parsed kernel parses");
    assert_eq!(again, g);
    if let Ok(d) = partial_distances(&g) {
        assert!(d.iter().zip(g.row_weights()).all(|(&d, w)| d <= w));
    }
    if g.ell() <= 8 {
        let _ = is_polarizing(&g);
    }
});
