#![no_main]

use deconfound::harness::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_toml_str(text) {
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().expect("valid configs serialize"))
            .expect("serialized configs parse");
        assert_eq!(cfg, again);
    }
});
