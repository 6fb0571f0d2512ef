#![no_main]

use kpolar::becpolar::LevelCdf;
use libfuzzer_sys::fuzz_target;

// The first two bytes choose ℓ and n; the rest is the CSV text.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let ell = 2 + (data[0] % 15) as usize;
    let n = (data[1] % 64) as usize;
    let Ok(text) = std::str::from_utf8(&data[2..]) else { return };
    if let Ok(cdf) = LevelCdf::from_csv(text, ell, n) {
        let again = LevelCdf::from_csv(&cdf.to_csv(), ell, n).expect("exported level parses");
        assert_eq!(again.sorted_neglogs(), cdf.sorted_neglogs());
        let _ = cdf.fraction_below_double_exponent(1.0);
    }
});
