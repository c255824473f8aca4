use std::fs;
use std::io::Write;
use std::path::Path;

use super::{index_labels, Dataset, Features};
use crate::error::{Error, Result};

/// Reads a dense CSV file with a header row. The column named `label` holds
/// the class name, or `;`-separated names when `multilabel` is set; every
/// other column is a feature.
pub fn read_csv(path: impl AsRef<Path>, multilabel: bool) -> Result<Dataset> {
    let text = fs::read(path)?;
    parse_csv(&text, multilabel)
}

pub fn parse_csv(bytes: &[u8], multilabel: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .clone();
    let label_col = header
        .iter()
        .position(|h| h.eq_ignore_ascii_case("label"))
        .ok_or_else(|| Error::parse(1, "no 'label' column in header"))?;
    let d = header.len() - 1;
    let mut values = Vec::new();
    let mut raw = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let line = r + 2;
        let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(Error::parse(
                line,
                format!("{} fields, header has {}", rec.len(), header.len()),
            ));
        }
        for (c, field) in rec.iter().enumerate() {
            if c == label_col {
                let mut names: Vec<String> =
                    field.split(';').map(|s| s.trim().to_string()).collect();
                if names.iter().any(|s| s.is_empty()) {
                    return Err(Error::parse(line, format!("empty label in '{field}'")));
                }
                if !multilabel && names.len() > 1 {
                    return Err(Error::parse(
                        line,
                        format!("label set '{field}' in a multiclass file"),
                    ));
                }
                names.sort();
                if names.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::parse(line, format!("repeated label in '{field}'")));
                }
                raw.push(names);
            } else {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::parse(line, format!("bad feature value '{field}'")))?;
                if !v.is_finite() {
                    return Err(Error::parse(line, format!("non-finite value '{field}'")));
                }
                values.push(v);
            }
        }
    }
    if raw.is_empty() {
        return Err(Error::Format("no examples in CSV input".into()));
    }
    let n = raw.len();
    let (labels, classes) = index_labels(raw, multilabel);
    Dataset::new(Features::dense(n, d, values)?, labels, classes)
}

/// Writes a dense CSV with a `label` column followed by `f1 … fd`.
pub fn write_csv(ds: &Dataset, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["label".to_string()];
    header.extend((1..=ds.d()).map(|j| format!("f{j}")));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..ds.n() {
        let names: Vec<&str> = ds
            .labels
            .set(i)
            .iter()
            .map(|&c| ds.classes[c].as_str())
            .collect();
        let mut rec = vec![names.join(";")];
        rec.extend(
            ds.features
                .row(i)
                .to_dense(ds.d())
                .iter()
                .map(|v| v.to_string()),
        );
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        k => Error::Format(format!("{k:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Labels;

    #[test]
    fn parses_header_and_labels() {
        let ds = parse_csv(b"x,label,y\n1.5,b,2\n-1,a,0\n", false).unwrap();
        assert_eq!(ds.classes, vec!["a", "b"]);
        assert_eq!(ds.labels, Labels::Multiclass(vec![1, 0]));
        assert_eq!(ds.features.to_dense(), vec![1.5, 2.0, -1.0, 0.0]);
    }

    #[test]
    fn multilabel_cells() {
        let ds = parse_csv(b"label,x\n2;1,0.5\n", true).unwrap();
        assert_eq!(ds.labels, Labels::Multilabel(vec![vec![0, 1]]));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_csv(b"x,y\n1,2\n", false).is_err());
        assert!(parse_csv(b"label,x\n", false).is_err());
        assert!(matches!(
            parse_csv(b"label,x\na,1\nb,zz\n", false),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(parse_csv(b"label,x\na,1,2\n", false).is_err());
    }

    #[test]
    fn round_trip() {
        let ds = parse_csv(b"label,x,y\n1,0.1,-3e-7\n2,1e300,4\n", false).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        assert_eq!(parse_csv(&buf, false).unwrap(), ds);
    }
}
