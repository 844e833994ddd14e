//! Loading an RCT from CSV and restricting it to a two-category subpopulation.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use rctsub::TabularDataset;

use crate::error::{BenchError, Result};

/// How CSV columns map onto the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaHints {
    pub treatment: String,
    pub outcome: String,
    /// Numeric covariate columns.
    #[serde(default)]
    pub covariates: Vec<String>,
    /// Free-text column featurized into bag-of-words proxies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    /// Categorical column used by the subpopulation filter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

impl SchemaHints {
    pub fn check(&self) -> Result<()> {
        let mut names: Vec<&str> = vec![&self.treatment, &self.outcome];
        names.extend(self.covariates.iter().map(String::as_str));
        names.extend(self.text.as_deref());
        names.extend(self.category.as_deref());
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(BenchError::Config(format!("column `{n}` is mapped twice")));
            }
        }
        Ok(())
    }
}

/// An ingested table: the numeric dataset plus the raw string columns it
/// does not hold.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub dataset: TabularDataset,
    pub texts: Option<Vec<String>>,
    pub categories: Option<Vec<String>>,
}

/// Parse a numeric cell. `true`/`false`/`yes`/`no` coerce to 1/0.
fn parse_cell(raw: &str, column: &str, row: usize) -> Result<f64> {
    let s = raw.trim();
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" => return Ok(1.0),
        "false" | "no" => return Ok(0.0),
        "" => {
            return Err(BenchError::Input(format!(
                "row {row}, column `{column}`: missing value"
            )));
        }
        _ => {}
    }
    s.parse::<f64>()
        .map_err(|_| BenchError::Input(format!("row {row}, column `{column}`: non-numeric value `{s}`")))
}

/// Read a headed UTF-8 CSV into a validated dataset. Rows are numbered from 0
/// after the header.
pub fn ingest_csv(path: &Path, schema: &SchemaHints) -> Result<RawTable> {
    schema.check()?;
    let mut reader = csv::Reader::from_path(path).map_err(|e| BenchError::Input(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| BenchError::Input(format!("{}: {e}", path.display())))?
        .clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let column = |name: &str| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| BenchError::Input(format!("missing required column `{name}`")))
    };
    let t_col = column(&schema.treatment)?;
    let y_col = column(&schema.outcome)?;
    let cov_cols: Vec<usize> = schema.covariates.iter().map(|c| column(c)).collect::<Result<_>>()?;
    let text_col = schema.text.as_deref().map(column).transpose()?;
    let cat_col = schema.category.as_deref().map(column).transpose()?;

    let mut t = Vec::new();
    let mut y = Vec::new();
    let mut covs = vec![Vec::new(); cov_cols.len()];
    let mut texts = text_col.map(|_| Vec::new());
    let mut cats = cat_col.map(|_| Vec::new());
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| BenchError::Input(format!("row {row}: {e}")))?;
        let get = |c: usize| record.get(c).unwrap_or("");
        let tv = parse_cell(get(t_col), &schema.treatment, row)?;
        if tv != 0.0 && tv != 1.0 {
            return Err(BenchError::Input(format!(
                "row {row}, column `{}`: treatment {tv} is not 0 or 1",
                schema.treatment
            )));
        }
        t.push(tv as u8);
        y.push(parse_cell(get(y_col), &schema.outcome, row)?);
        for ((col, &c), name) in covs.iter_mut().zip(&cov_cols).zip(&schema.covariates) {
            col.push(parse_cell(get(c), name, row)?);
        }
        if let (Some(v), Some(c)) = (texts.as_mut(), text_col) {
            v.push(get(c).to_string());
        }
        if let (Some(v), Some(c)) = (cats.as_mut(), cat_col) {
            v.push(get(c).trim().to_string());
        }
    }
    let dataset = TabularDataset::try_new(schema.covariates.clone(), covs, t, y)?;
    Ok(RawTable {
        dataset,
        texts,
        categories: cats,
    })
}

/// Recoding of the two kept categories: `first -> 0`, `second -> 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMapping {
    pub zero: String,
    pub one: String,
}

/// Name of the binary covariate added by [`subpopulation_filter`].
pub const SUBPOPULATION_COVARIATE: &str = "C";

/// Keep the rows whose category is one of `categories` and add covariate
/// `C` (0 for the first category, 1 for the second).
pub fn subpopulation_filter(table: &RawTable, categories: (&str, &str)) -> Result<(RawTable, CategoryMapping)> {
    let cats = table
        .categories
        .as_ref()
        .ok_or_else(|| BenchError::Input("table has no category column".into()))?;
    for wanted in [categories.0, categories.1] {
        if !cats.iter().any(|c| c == wanted) {
            return Err(BenchError::Input(format!("category `{wanted}` is absent")));
        }
    }
    let rows: Vec<usize> = (0..cats.len())
        .filter(|&i| cats[i] == categories.0 || cats[i] == categories.1)
        .collect();
    let sub = table.dataset.take_rows(&rows);
    let c: Vec<f64> = rows
        .iter()
        .map(|&i| f64::from(u8::from(cats[i] == categories.1)))
        .collect();
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for (name, col) in sub.column_names().iter().zip(sub.covariates()) {
        if name != SUBPOPULATION_COVARIATE {
            names.push(name.clone());
            columns.push(col.clone());
        }
    }
    names.push(SUBPOPULATION_COVARIATE.into());
    columns.push(c);
    let mut dataset = TabularDataset::try_new(names, columns, sub.treatment().to_vec(), sub.outcome().to_vec())?;
    if let Some(p) = sub.proxies() {
        dataset = dataset.with_proxies(p.clone());
    }
    let pick = |v: &Vec<String>| rows.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
    Ok((
        RawTable {
            dataset,
            texts: table.texts.as_ref().map(pick),
            categories: Some(pick(cats)),
        },
        CategoryMapping {
            zero: categories.0.into(),
            one: categories.1.into(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn schema() -> SchemaHints {
        SchemaHints {
            treatment: "treated".into(),
            outcome: "clicked".into(),
            covariates: vec!["x".into()],
            text: Some("abstract".into()),
            category: Some("field".into()),
        }
    }

    #[test]
    fn two_row_csv() {
        let f = write("treated,clicked,x,abstract,field\n1,true,0.5,some words,Physics\n0,0,1.5,,Medicine\n");
        let t = ingest_csv(f.path(), &schema()).unwrap();
        assert_eq!(t.dataset.n_rows(), 2);
        assert_eq!(t.dataset.outcome(), &[1.0, 0.0]);
        assert_eq!(t.texts.unwrap()[1], "");
    }

    #[test]
    fn nan_outcome_names_row() {
        let f = write("treated,clicked,x,abstract,field\n1,1,0,a,P\n0,NaN,0,b,M\n");
        let err = ingest_csv(f.path(), &schema()).unwrap_err().to_string();
        assert!(err.contains("row 1"), "{err}");
    }

    #[test]
    fn missing_column_and_bad_cell() {
        let f = write("treated,clicked,abstract,field\n1,1,a,P\n");
        assert!(ingest_csv(f.path(), &schema()).unwrap_err().to_string().contains("`x`"));
        let f = write("treated,clicked,x,abstract,field\n1,1,abc,a,P\n");
        assert!(ingest_csv(f.path(), &schema())
            .unwrap_err()
            .to_string()
            .contains("non-numeric"));
    }

    #[test]
    fn filter_recodes_categories() {
        let f = write("treated,clicked,x,abstract,field\n1,1,0,a,P\n0,0,0,b,M\n1,0,0,c,E\n0,1,0,d,P\n");
        let t = ingest_csv(f.path(), &schema()).unwrap();
        let (sub, map) = subpopulation_filter(&t, ("P", "M")).unwrap();
        assert_eq!(sub.dataset.n_rows(), 3);
        assert_eq!(sub.dataset.covariate("C").unwrap(), &[0.0, 1.0, 0.0]);
        assert_eq!(map.one, "M");
        assert!(subpopulation_filter(&t, ("P", "Z")).is_err());
    }
}
