//! Fuzz the TOML run-configuration parser.

#![no_main]

use libfuzzer_sys::fuzz_target;
use threshold_exec_cli::config::FileConfig;

fuzz_target!(|data: &str| {
    let _ = FileConfig::parse_str(data);
});
