//! Fuzz the gain-model JSON import path. Accepted models must be safe to
//! evaluate across the whole probability grid and to re-export.

#![no_main]

use libfuzzer_sys::fuzz_target;
use threshold_exec::gain::GainModel;

fuzz_target!(|data: &str| {
    if let Ok(model) = GainModel::from_json(data) {
        for k in 0..=20 {
            let p = k as f64 / 20.0;
            let _ = model.gain(p);
            let _ = model.threshold_of_quantile(p);
        }
        let round_trip = model.to_json();
        GainModel::from_json(&round_trip).expect("re-export must parse");
    }
});
