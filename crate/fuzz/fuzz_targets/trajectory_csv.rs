#![no_main]

use curvegas::io::read_trajectory_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = read_trajectory_csv(data) {
        assert_eq!(table.times.len(), table.states.len());
        assert!(table.states.iter().all(|s| s.len() == table.particles()));
        assert!(table.times.windows(2).all(|w| w[0] <= w[1]));
    }
});
