#![no_main]

use curvegas::experiment::ExperimentConfig;
use curvegas::Error;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match ExperimentConfig::from_json(text) {
        Ok(cfg) => {
            // validation never panics and only reports configuration errors
            if let Err(e) = cfg.validate() {
                assert!(matches!(e, Error::Config { .. }), "{e:?}");
            }
            let again = serde_json::to_string(&cfg).unwrap();
            assert_eq!(ExperimentConfig::from_json(&again).unwrap(), cfg);
        }
        Err(e) => assert_eq!(e.exit_code(), 2),
    }
});
