#![no_main]

use deconfound::harness::{parse_dataset_csv, CsvSchema};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = parse_dataset_csv(data, &CsvSchema::default()) {
        assert_eq!(ds.treatment().len(), ds.n());
        assert!(ds.treatment().iter().all(|t| *t == 0.0 || *t == 1.0));
        assert!(ds.outcome().iter().all(|y| y.is_finite()));
    }
});
