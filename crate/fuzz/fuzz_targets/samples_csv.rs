//! Fuzz the `(signal, price_change)` CSV reader and the empirical model
//! estimation it feeds. Malformed input must error, never panic.

#![no_main]

use libfuzzer_sys::fuzz_target;
use threshold_exec::gain;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = gain::read_samples_csv(data) {
        let _ = gain::GainModel::empirical_from_samples(&rows);
    }
});
