use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimators::Dataset;
use crate::glm::DesignMatrix;

/// Column names of a dataset file. Covariates are `{prefix}1..{prefix}p`
/// and may appear in any order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub treatment: String,
    pub outcome: String,
    pub covariate_prefix: String,
    pub mu0: String,
    pub mu1: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            treatment: "t".into(),
            outcome: "y".into(),
            covariate_prefix: "x".into(),
            mu0: "mu0".into(),
            mu1: "mu1".into(),
        }
    }
}

enum Role {
    Treatment,
    Outcome,
    Covariate(usize),
    Mu0,
    Mu1,
}

fn schema_error(row: Option<usize>, message: impl Into<String>) -> Error {
    Error::Schema {
        row,
        message: message.into(),
    }
}

fn classify(name: &str, schema: &CsvSchema) -> Option<Role> {
    if name == schema.treatment {
        Some(Role::Treatment)
    } else if name == schema.outcome {
        Some(Role::Outcome)
    } else if name == schema.mu0 {
        Some(Role::Mu0)
    } else if name == schema.mu1 {
        Some(Role::Mu1)
    } else {
        let idx = name.strip_prefix(schema.covariate_prefix.as_str())?;
        if idx.starts_with('0') || !idx.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        idx.parse::<usize>().ok().filter(|&k| k >= 1).map(Role::Covariate)
    }
}

pub fn load_dataset_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset_csv(file, schema)
}

/// Parses a dataset. Rows are numbered from 1 for the first data row.
pub fn parse_dataset_csv(reader: impl Read, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| schema_error(None, format!("unreadable header: {e}")))?
        .clone();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let mut roles = Vec::with_capacity(headers.len());
    let mut p = 0;
    for (j, name) in headers.iter().enumerate() {
        if seen.insert(name, j).is_some() {
            return Err(schema_error(None, format!("duplicate column `{name}`")));
        }
        let role = classify(name, schema).ok_or_else(|| schema_error(None, format!("unexpected column `{name}`")))?;
        if let Role::Covariate(k) = role {
            p = p.max(k);
        }
        roles.push(role);
    }
    for required in [&schema.treatment, &schema.outcome] {
        if !seen.contains_key(required.as_str()) {
            return Err(schema_error(None, format!("missing column `{required}`")));
        }
    }
    if p == 0 {
        return Err(schema_error(None, "no covariate columns"));
    }
    let covariates = roles.iter().filter(|r| matches!(r, Role::Covariate(_))).count();
    if covariates != p {
        return Err(schema_error(
            None,
            format!("covariate columns must be {0}1..{0}{p} without gaps", schema.covariate_prefix),
        ));
    }
    let has_mu0 = seen.contains_key(schema.mu0.as_str());
    let has_mu1 = seen.contains_key(schema.mu1.as_str());
    if has_mu0 != has_mu1 {
        return Err(schema_error(None, "oracle columns must come in pairs"));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let (mut t, mut y, mut mu0, mut mu1) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| schema_error(Some(row), e.to_string()))?;
        if record.len() != headers.len() {
            return Err(schema_error(
                Some(row),
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        let mut x = vec![0.0; p];
        for ((field, name), role) in record.iter().zip(headers.iter()).zip(&roles) {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                column: name.to_string(),
                message: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: name.to_string(),
                    message: format!("`{field}` is not finite"),
                });
            }
            match role {
                Role::Treatment => {
                    if v != 0.0 && v != 1.0 {
                        return Err(schema_error(Some(row), format!("treatment must be 0 or 1, found {field}")));
                    }
                    t.push(v);
                }
                Role::Outcome => y.push(v),
                Role::Covariate(k) => x[k - 1] = v,
                Role::Mu0 => mu0.push(v),
                Role::Mu1 => mu1.push(v),
            }
        }
        rows.push(x);
    }
    let design = DesignMatrix::from_rows(&rows)?;
    let oracle = |v: Vec<f64>| if has_mu0 { Some(v) } else { None };
    Dataset::new(design, t, y, oracle(mu0), oracle(mu1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Dataset> {
        parse_dataset_csv(s.as_bytes(), &CsvSchema::default())
    }

    #[test]
    fn three_row_file() {
        let ds = parse("t,y,x1,x2\n1,2.0,0.1,0.2\n0,1.0,-0.3,0.4\n1,3.0,0.0,0.0\n").unwrap();
        assert_eq!((ds.n(), ds.p()), (3, 2));
        assert_eq!(ds.treatment(), &[1.0, 0.0, 1.0]);
        assert_eq!(ds.design().row(1), vec![-0.3, 0.4]);
        assert!(ds.oracle_m0().is_none());
    }

    #[test]
    fn columns_in_any_order_with_oracles() {
        let ds = parse("x2,mu1,t,x1,y,mu0\n0.2,3,1,0.1,2,1\n0.4,2,0,-0.3,1,1\n").unwrap();
        assert_eq!(ds.design().row(0), vec![0.1, 0.2]);
        assert_eq!(ds.oracle_m1().unwrap(), &[3.0, 2.0]);
        let att = crate::dgp::sample_att_semisynthetic(ds.oracle_m1().unwrap(), ds.oracle_m0().unwrap(), ds.treatment()).unwrap();
        assert_eq!(att, 2.0);
    }

    #[test]
    fn treatment_outside_binary_names_the_row() {
        let err = parse("t,y,x1\n1,2,0\n2,1,0\n0,1,1\n").unwrap_err();
        match err {
            Error::Schema { row: Some(2), message } => assert!(message.contains('2')),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_and_parse_errors() {
        assert!(matches!(parse("t,y,x1,x1\n1,2,0,0\n"), Err(Error::Schema { row: None, .. })));
        assert!(matches!(parse("t,x1\n1,0\n"), Err(Error::Schema { row: None, .. })));
        assert!(matches!(parse("t,y,x1,x3\n1,2,0,0\n"), Err(Error::Schema { row: None, .. })));
        assert!(matches!(parse("t,y,x1,z\n1,2,0,0\n"), Err(Error::Schema { row: None, .. })));
        assert!(matches!(parse("t,y,x1,mu0\n1,2,0,0\n"), Err(Error::Schema { row: None, .. })));
        assert!(matches!(parse("t,y,x01\n1,2,0\n"), Err(Error::Schema { row: None, .. })));
        assert!(matches!(parse("t,y,x1\n1,2\n0,1,0\n"), Err(Error::Schema { row: Some(1), .. })));
        match parse("t,y,x1\n1,2,0\n0,abc,1\n") {
            Err(Error::Parse { row: 2, column, .. }) => assert_eq!(column, "y"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("t,y,x1\n1,2,NaN\n0,1,1\n"), Err(Error::Parse { row: 1, .. })));
        assert!(matches!(parse("t,y,x1\n1,2,0\n1,1,1\n"), Err(Error::DegenerateTreatmentArm(_))));
    }

    #[test]
    fn load_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "t,y,x1\n1,2,0\n0,1,1\n").unwrap();
        assert_eq!(load_dataset_csv(&path, &CsvSchema::default()).unwrap().n(), 2);
        assert!(matches!(load_dataset_csv(&dir.path().join("none.csv"), &CsvSchema::default()), Err(Error::Io { .. })));
    }
}
