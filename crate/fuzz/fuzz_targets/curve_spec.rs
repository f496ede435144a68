#![no_main]

use curvegas::curve::{ArcLengthCurve, CurveSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = serde_json::from_slice::<CurveSpec>(data) else { return };
    if let CurveSpec::Fourier { coeffs, .. } = &spec {
        // table construction cost grows with the mode count
        if coeffs.len() > 16 {
            return;
        }
    }
    if let Ok(curve) = ArcLengthCurve::new(spec, 1e-8) {
        let l = curve.length();
        assert!(l.is_finite() && l > 0.0);
        for k in 0..8 {
            let s = l * k as f64 / 8.0;
            let t = curve.tangent(s);
            assert!((t.norm() - 1.0).abs() < 1e-6);
            let hit = curve.locate(curve.point(s), None);
            assert!(hit.distance < 1e-6 * (1.0 + l));
        }
    }
});
