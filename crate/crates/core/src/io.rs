//! CSV ingestion.
//!
//! Files are UTF-8, comma separated, with an optional header row. When a
//! group column is named, rows are split into one sample per distinct label,
//! in order of first appearance.

use std::path::Path;

use crate::coeffs::Sample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum Header {
    /// Treat the first row as a header when any of its cells is non-numeric.
    #[default]
    Auto,
    Present,
    Absent,
}

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub header: Header,
    /// Column (by header name, or 0-based index) holding group labels.
    pub group_col: Option<String>,
}

/// A sample with the label it was grouped under.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub label: String,
    pub sample: Sample,
}

/// Parsed numeric rows plus the column names (if a header was present).
#[derive(Debug, Clone)]
struct Table {
    columns: Option<Vec<String>>,
    // (line number, cells)
    rows: Vec<(usize, Vec<String>)>,
}

fn read_table(text: &str, path: &str, header: &Header) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, rec.iter().map(str::to_owned).collect::<Vec<_>>()));
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            message: "file has no data rows".into(),
        });
    }
    let has_header = match header {
        Header::Present => true,
        Header::Absent => false,
        Header::Auto => rows[0].1.iter().any(|c| c.parse::<f64>().is_err()) && {
            // a grouped file has a label column in every row; compare against row 2
            rows.len() < 2
                || rows[0]
                    .1
                    .iter()
                    .zip(&rows[1].1)
                    .any(|(a, b)| a.parse::<f64>().is_err() && b.parse::<f64>().is_ok())
        },
    };
    let columns = if has_header { Some(rows.remove(0).1) } else { None };
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.into(),
            line: 2,
            message: "file has a header but no data rows".into(),
        });
    }
    let width = columns.as_ref().map_or(rows[0].1.len(), Vec::len);
    for (line, cells) in &rows {
        if cells.len() != width {
            return Err(Error::Parse {
                path: path.into(),
                line: *line,
                message: format!("expected {width} fields, found {}", cells.len()),
            });
        }
    }
    Ok(Table { columns, rows })
}

fn resolve_column(table: &Table, name: &str, path: &str) -> Result<usize> {
    if let Some(cols) = &table.columns {
        if let Some(i) = cols.iter().position(|c| c == name) {
            return Ok(i);
        }
    }
    let width = table.rows[0].1.len();
    match name.parse::<usize>() {
        Ok(i) if i < width => Ok(i),
        _ => Err(Error::Parse {
            path: path.into(),
            line: 1,
            message: format!("no column named '{name}'"),
        }),
    }
}

fn to_sample(rows: &[&(usize, Vec<String>)], skip: Option<usize>, path: &str) -> Result<Sample> {
    let mut data = Vec::new();
    let mut p = 0;
    for (line, cells) in rows {
        p = 0;
        for (c, cell) in cells.iter().enumerate() {
            if Some(c) == skip {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.into(),
                line: *line,
                message: format!("column {}: '{cell}' is not a number", c + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.into(),
                    line: *line,
                    message: format!("column {}: value is not finite", c + 1),
                });
            }
            data.push(v);
            p += 1;
        }
    }
    Sample::new(rows.len(), p, data)
}

/// Parses CSV text. `path` is only used in error messages.
pub fn parse_csv(text: &str, path: &str, opts: &CsvOptions) -> Result<Vec<LabeledSample>> {
    let table = read_table(text, path, &opts.header)?;
    let Some(group) = &opts.group_col else {
        let rows: Vec<_> = table.rows.iter().collect();
        return Ok(vec![LabeledSample {
            label: path.to_owned(),
            sample: to_sample(&rows, None, path)?,
        }]);
    };
    let g = resolve_column(&table, group, path)?;
    let mut labels: Vec<String> = Vec::new();
    let mut groups: Vec<Vec<&(usize, Vec<String>)>> = Vec::new();
    for row in &table.rows {
        let label = &row.1[g];
        match labels.iter().position(|l| l == label) {
            Some(i) => groups[i].push(row),
            None => {
                labels.push(label.clone());
                groups.push(vec![row]);
            }
        }
    }
    labels
        .into_iter()
        .zip(groups)
        .map(|(label, rows)| {
            Ok(LabeledSample {
                label,
                sample: to_sample(&rows, Some(g), path)?,
            })
        })
        .collect()
}

/// Reads one CSV file into one sample, or one sample per group.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Vec<LabeledSample>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, &path.display().to_string(), opts)
}

/// The bundled Iris measurements, one sample per species
/// (setosa, versicolor, virginica), columns SL, SW, PL, PW.
pub fn iris() -> Vec<LabeledSample> {
    let text = include_str!("../data/iris.csv");
    let opts = CsvOptions {
        header: Header::Present,
        group_col: Some("species".into()),
    };
    parse_csv(text, "iris.csv", &opts).expect("bundled iris data parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain() -> CsvOptions {
        CsvOptions::default()
    }

    #[test]
    fn three_by_two() {
        let s = parse_csv("1,2\n3,4\n5,6", "t", &plain()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].sample, Sample::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
    }

    #[test]
    fn header_is_detected() {
        let s = parse_csv("a,b\n1,2\n3,4\n", "t", &plain()).unwrap();
        assert_eq!(s[0].sample.n(), 2);
        let forced = CsvOptions {
            header: Header::Absent,
            ..plain()
        };
        assert!(matches!(parse_csv("a,b\n1,2\n", "t", &forced), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn grouped_without_header() {
        let opts = CsvOptions {
            group_col: Some("2".into()),
            ..plain()
        };
        let s = parse_csv("1,2,x\n3,4,y\n5,6,x\n", "t", &opts).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].label.as_str(), s[0].sample.n()), ("x", 2));
        assert_eq!(s[1].sample.row(0), &[3.0, 4.0]);
    }

    #[test]
    fn non_numeric_cell_names_line_and_column() {
        let err = parse_csv("1,2\n3,oops\n", "f.csv", &plain()).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("column 2"), "{message}");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let err = parse_csv("1,2\n3,4,5\n", "f.csv", &plain()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn unknown_group_column() {
        let opts = CsvOptions {
            group_col: Some("nope".into()),
            ..plain()
        };
        assert!(parse_csv("a,b\n1,2\n", "t", &opts).is_err());
        assert!(parse_csv("", "t", &plain()).is_err());
    }

    #[test]
    fn iris_has_three_species_of_fifty() {
        let s = iris();
        let labels: Vec<&str> = s.iter().map(|l| l.label.as_str()).collect();
        assert_eq!(labels, ["setosa", "versicolor", "virginica"]);
        assert!(s.iter().all(|l| l.sample.n() == 50 && l.sample.p() == 4));
    }

    #[test]
    fn load_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "u,v\n0.1,0.2\n0.3,0.4\n").unwrap();
        let s = load_csv(&path, &plain()).unwrap();
        assert_eq!(s[0].sample.n(), 2);
        assert!(load_csv(dir.path().join("missing.csv"), &plain()).is_err());
    }
}
