use std::fs;
use std::io::Write;
use std::path::Path;

use super::{index_labels, Dataset, Features};
use crate::error::{Error, Result};

/// Largest accepted 1-based feature index.
const MAX_INDEX: usize = 1 << 31;

/// Reads a LibSVM file. With `multilabel`, the label field is a
/// comma-separated set.
pub fn read_libsvm(path: impl AsRef<Path>, multilabel: bool) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse_libsvm(&text, multilabel)
}

/// Parses `label[,label…] idx:val …` lines. Indexes are 1-based and must be
/// unique within a line; `#` starts a comment; blank lines are skipped.
pub fn parse_libsvm(text: &str, multilabel: bool) -> Result<Dataset> {
    let mut raw_labels = Vec::new();
    let mut indptr = vec![0];
    let mut indices = Vec::new();
    let mut values = Vec::new();
    let mut d = 0;
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.split('#').next().unwrap_or("");
        let mut tokens = line.split_whitespace();
        let Some(head) = tokens.next() else {
            continue;
        };
        if head.contains(':') {
            return Err(Error::parse(lineno, "missing label"));
        }
        let names: Vec<String> = head.split(',').map(str::to_string).collect();
        if names.iter().any(|s| s.is_empty()) {
            return Err(Error::parse(lineno, format!("empty label in '{head}'")));
        }
        if !multilabel && names.len() > 1 {
            return Err(Error::parse(
                lineno,
                format!("label set '{head}' in a multiclass file"),
            ));
        }
        let mut names = names;
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::parse(lineno, format!("repeated label in '{head}'")));
        }
        let start = indices.len();
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| Error::parse(lineno, format!("expected idx:val, got '{tok}'")))?;
            let i: usize = i
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad feature index '{i}'")))?;
            if i == 0 || i > MAX_INDEX {
                return Err(Error::parse(
                    lineno,
                    format!("feature index {i} out of range"),
                ));
            }
            let v: f64 = v
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad feature value '{v}'")))?;
            if !v.is_finite() {
                return Err(Error::parse(lineno, format!("non-finite value '{tok}'")));
            }
            indices.push(i - 1);
            values.push(v);
            d = d.max(i);
        }
        let mut order: Vec<usize> = (start..indices.len()).collect();
        order.sort_by_key(|&p| indices[p]);
        let idx: Vec<usize> = order.iter().map(|&p| indices[p]).collect();
        let val: Vec<f64> = order.iter().map(|&p| values[p]).collect();
        if let Some(w) = idx.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::parse(
                lineno,
                format!("duplicate feature index {}", w[0] + 1),
            ));
        }
        indices[start..].copy_from_slice(&idx);
        values[start..].copy_from_slice(&val);
        indptr.push(indices.len());
        raw_labels.push(names);
    }
    if raw_labels.is_empty() {
        return Err(Error::Format("no examples in LibSVM input".into()));
    }
    let n = raw_labels.len();
    let (labels, classes) = index_labels(raw_labels, multilabel);
    Dataset::new(
        Features::Sparse {
            n,
            d,
            indptr,
            indices,
            values,
        },
        labels,
        classes,
    )
}

/// Writes LibSVM text using shortest round-trip float formatting, so that
/// reading the file back reproduces every value bit for bit. Zero entries are
/// omitted.
pub fn write_libsvm(ds: &Dataset, mut out: impl Write) -> Result<()> {
    for i in 0..ds.n() {
        let names: Vec<&str> = ds
            .labels
            .set(i)
            .iter()
            .map(|&c| ds.classes[c].as_str())
            .collect();
        write!(out, "{}", names.join(","))?;
        let mut err = Ok(());
        ds.features.row(i).for_each(|j, v| {
            if v != 0.0 && err.is_ok() {
                err = write!(out, " {}:{}", j + 1, v);
            }
        });
        err?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}
