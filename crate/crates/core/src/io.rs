//! Output plumbing: locale-independent float formatting and atomic file writes.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Formats `x` with 12 significant digits, `%g` style, always with a '.' decimal.
pub fn fmt_g12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..12).contains(&exp) {
        let prec = (11 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", prec, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".to_string()
    } else {
        t.to_string()
    }
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = parent.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Renders a numeric table as CSV text with [`fmt_g12`] cells.
pub fn numeric_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Dimension { expected: header.len(), got: row.len() });
        }
        w.write_record(row.iter().map(|&x| fmt_g12(x)))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("ascii csv"))
}

/// Parses a numeric CSV with the expected header, returning the rows.
pub fn read_numeric_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(Error::Config(format!(
            "{}: expected columns {:?}, found {:?}",
            path.display(),
            header,
            got
        )));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|c| c.parse::<f64>().map_err(|e| Error::Config(format!("bad number `{c}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g12_formats() {
        assert_eq!(fmt_g12(0.5), "0.5");
        assert_eq!(fmt_g12(-1600.0), "-1600");
        assert_eq!(fmt_g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_g12(2e-8), "2e-8");
        assert_eq!(fmt_g12(1.23456789012345e15), "1.23456789012e15");
        assert_eq!(fmt_g12(0.0), "0");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
