#![no_main]

use kpolar::becpolar::ErasurePolynomialSet;
use kpolar::ExtendedUnitValue;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(set) = ErasurePolynomialSet::from_json(text) else { return };
    let again = ErasurePolynomialSet::from_json(&set.to_json()).expect("exported set parses");
    assert_eq!(again, set);
    let z = ExtendedUnitValue::from_prob(0.3);
    for j in 0..set.ell {
        let _ = set.step(z, j);
    }
});
