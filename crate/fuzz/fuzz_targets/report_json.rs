#![no_main]

use deconfound::harness::ExperimentReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = ExperimentReport::from_json_str(text) {
        let again = ExperimentReport::from_json_str(&report.to_json_string().expect("parsed reports serialize"))
            .expect("serialized reports parse");
        assert_eq!(report.cells.len(), again.cells.len());
    }
    let _ = ExperimentReport::from_csv_str(text);
});
