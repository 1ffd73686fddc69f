//! Sample CSV files and model JSON files.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use opt_density::eval::Density;
use opt_density::fee::FeeDensity;
use opt_density::{HmapTree, OptError};

use crate::CliError;

/// Version of the sample CSV layout, written as a leading comment line.
pub const SAMPLES_FORMAT_VERSION: u32 = 1;

/// Reads numeric rows. Lines starting with `#` are skipped and a first row
/// that does not parse as numbers is taken as a header.
pub fn read_rows(path: &Path, delimiter: u8) -> Result<Vec<Vec<f64>>, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let parsed: Result<Vec<f64>, usize> = record
            .iter()
            .enumerate()
            .map(|(j, field)| field.parse::<f64>().map_err(|_| j))
            .collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(col) => {
                return Err(OptError::Data {
                    row: i,
                    col,
                    reason: format!("{:?} is not a number", &record[col]),
                }
                .into())
            }
        }
    }
    if rows.is_empty() {
        return Err(OptError::Empty(format!("no samples in {}", path.display())).into());
    }
    Ok(rows)
}

/// Rows as CSV with a version comment and an `x0,x1,…` header.
/// Floats use the shortest representation that reads back exactly.
pub fn rows_to_csv(rows: &[Vec<f64>], p: usize, extra: Option<(&str, &[f64])>) -> String {
    let mut out = format!("# format_version={SAMPLES_FORMAT_VERSION}\n");
    let mut header: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
    if let Some((name, _)) = extra {
        header.push(name.to_string());
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some((_, values)) = extra {
            fields.push(values[i].to_string());
        }
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

/// Writes to the file, or to standard output when there is none.
pub fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Data(format!("cannot write to standard output: {e}")))
        }
    }
}

/// A saved piecewise-constant tree or finite element density.
#[allow(clippy::large_enum_variant)]
pub enum Model {
    Tree(HmapTree),
    Fee(FeeDensity),
}

impl Model {
    pub fn load(path: &Path) -> Result<Model, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{} is not valid JSON: {e}", path.display())))?;
        let context = |e: OptError| CliError::Data(format!("{}: {e}", path.display()));
        if value.get("coeffs").is_some() {
            Ok(Model::Fee(FeeDensity::from_json(&value).map_err(context)?))
        } else {
            Ok(Model::Tree(HmapTree::from_json(&value).map_err(context)?))
        }
    }

    pub fn as_density(&self) -> &dyn Density {
        match self {
            Model::Tree(t) => t,
            Model::Fee(f) => f,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Model::Tree(_) => "tree",
            Model::Fee(_) => "fee",
        }
    }
}
