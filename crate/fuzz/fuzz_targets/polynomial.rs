#![no_main]

use curvegas::polynomial::Polynomial;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = Polynomial::parse(text) {
        let q = Polynomial::parse(&p.to_string()).expect("display output parses");
        assert_eq!(p, q);
        let _ = p.dx().dy().eval(0.5, -0.25);
    }
});
