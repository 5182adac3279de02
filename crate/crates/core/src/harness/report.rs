use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 11] = [
    "setting",
    "outcome_penalty",
    "propensity_penalty",
    "estimator",
    "score_label",
    "rmse",
    "abs_bias",
    "sd",
    "n_runs",
    "fallback_count",
    "trim_total",
];

/// Aggregated errors of one estimator on one score in one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellRecord {
    pub setting: String,
    pub outcome_penalty: String,
    pub propensity_penalty: String,
    pub estimator: String,
    pub score_label: String,
    pub rmse: f64,
    pub abs_bias: f64,
    pub sd: f64,
    pub n_runs: usize,
    pub fallback_count: usize,
    pub trim_total: usize,
}

impl CellRecord {
    fn key(&self) -> (&str, &str, &str, &str, &str) {
        (
            &self.setting,
            &self.outcome_penalty,
            &self.propensity_penalty,
            &self.estimator,
            &self.score_label,
        )
    }
}

/// RMSE, absolute bias and sample SD (ddof 1) of per-replication errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    pub rmse: f64,
    pub abs_bias: f64,
    pub sd: f64,
}

impl ErrorMetrics {
    pub fn from_errors(errors: &[f64]) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::invalid("no errors to aggregate"));
        }
        let n = errors.len() as f64;
        let bias = errors.iter().sum::<f64>() / n;
        let ss = errors.iter().map(|e| (e - bias) * (e - bias)).sum::<f64>();
        let sd = if errors.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
        let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
        Ok(ErrorMetrics {
            rmse,
            abs_bias: bias.abs(),
            sd,
        })
    }
}

/// Records sorted on the first five columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentReport {
    pub cells: Vec<CellRecord>,
}

impl ExperimentReport {
    pub fn new(mut cells: Vec<CellRecord>) -> Self {
        cells.sort_by(|a, b| a.key().cmp(&b.key()));
        ExperimentReport { cells }
    }

    pub fn find(&self, setting: &str, estimator: &str, score_label: &str) -> Option<&CellRecord> {
        self.cells
            .iter()
            .find(|c| c.setting == setting && c.estimator == estimator && c.score_label == score_label)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        let io = |e: csv::Error| Error::invalid(format!("csv serialization failed: {e}"));
        w.write_record(CSV_COLUMNS).map_err(io)?;
        for c in &self.cells {
            w.serialize(c).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::invalid(format!("json serialization failed: {e}")))
    }

    pub fn from_csv_str(s: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(s.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| Error::Schema { row: None, message: e.to_string() })?;
        if headers.iter().ne(CSV_COLUMNS) {
            return Err(Error::Schema {
                row: None,
                message: format!("report header must be {}", CSV_COLUMNS.join(",")),
            });
        }
        let cells = rdr
            .deserialize()
            .enumerate()
            .map(|(r, rec)| rec.map_err(|e| Error::Schema { row: Some(r + 1), message: e.to_string() }))
            .collect::<Result<Vec<CellRecord>>>()?;
        Ok(Self::new(cells))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let report: ExperimentReport =
            serde_json::from_str(s).map_err(|e| Error::Schema { row: None, message: e.to_string() })?;
        Ok(Self::new(report.cells))
    }

    pub fn emit(&self, path: &Path, format: ReportFormat) -> Result<()> {
        let text = match format {
            ReportFormat::Csv => self.to_csv_string()?,
            ReportFormat::Json => self.to_json_string()? + "\n",
        };
        write_atomically(path, text.as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

impl ReportFormat {
    /// Format implied by a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

/// Writes through a sibling temporary file so readers never see a partial file.
pub fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cell(setting: &str, est: &str, label: &str, rmse: f64) -> CellRecord {
        CellRecord {
            setting: setting.into(),
            outcome_penalty: "lasso".into(),
            propensity_penalty: "lasso".into(),
            estimator: est.into(),
            score_label: label.into(),
            rmse,
            abs_bias: 0.1,
            sd: 0.2,
            n_runs: 3,
            fallback_count: 0,
            trim_total: 1,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let csv = ExperimentReport::default().to_csv_string().unwrap();
        assert_eq!(csv, CSV_COLUMNS.join(",") + "\n");
        assert_eq!(ExperimentReport::from_csv_str(&csv).unwrap(), ExperimentReport::default());
    }

    #[test]
    fn one_cell_round_trips() {
        let r = ExperimentReport::new(vec![cell("s_t=1;s_y=2", "ipw", "w=-1.00", 0.123_456_789_012_345_6)]);
        let csv = r.to_csv_string().unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(ExperimentReport::from_csv_str(&csv).unwrap(), r);
        assert_eq!(ExperimentReport::from_json_str(&r.to_json_string().unwrap()).unwrap(), r);
    }

    #[test]
    fn records_are_sorted_and_emission_is_stable() {
        let r = ExperimentReport::new(vec![cell("b", "regr", "X", 1.0), cell("a", "regr", "X", 2.0), cell("a", "ipw", "X", 3.0)]);
        let order: Vec<_> = r.cells.iter().map(|c| (c.setting.as_str(), c.estimator.as_str())).collect();
        assert_eq!(order, vec![("a", "ipw"), ("a", "regr"), ("b", "regr")]);
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        r.emit(&p1, ReportFormat::Csv).unwrap();
        r.emit(&p2, ReportFormat::Csv).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let bad = dir.path().join("missing").join("r.csv");
        assert!(matches!(r.emit(&bad, ReportFormat::Csv), Err(Error::Io { .. })));
    }

    #[test]
    fn malformed_reports_are_schema_errors() {
        assert!(ExperimentReport::from_csv_str("a,b\n1,2\n").is_err());
        assert!(ExperimentReport::from_json_str("{\"cells\": [{}]}").is_err());
        assert!(ExperimentReport::from_json_str("[").is_err());
    }

    #[test]
    fn metrics_examples() {
        let m = ErrorMetrics::from_errors(&[1.0, -1.0, 3.0]).unwrap();
        assert_eq!(m.abs_bias, 1.0);
        assert_eq!(m.sd, 2.0);
        assert!((m.rmse - (11.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(ErrorMetrics::from_errors(&[0.5]).unwrap().sd, 0.0);
        assert!(ErrorMetrics::from_errors(&[]).is_err());
    }

    proptest! {
        #[test]
        fn rmse_decomposition(errors in prop::collection::vec(-1e3f64..1e3, 1..60)) {
            let m = ErrorMetrics::from_errors(&errors).unwrap();
            let n = errors.len() as f64;
            let rhs = m.abs_bias.powi(2) + m.sd.powi(2) * (n - 1.0) / n;
            prop_assert!((m.rmse.powi(2) - rhs).abs() <= 1e-9 * m.rmse.powi(2).max(1e-300));
        }
    }
}
