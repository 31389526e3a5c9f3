//! Dataset CSV input and metadata-stamped CSV output.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use geodesy_core::{Dataset, Support};

use crate::config::Output;
use crate::error::CliError;

/// Reads a dataset with header `x1,...,xd,a,y`.
///
/// Lines starting with `#` are skipped. Without an explicit `support` the observed
/// range of `a` is used.
pub fn read_dataset(path: &Path, support: Option<Support>) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file);
    let data_err = |line: u64, message: String| CliError::Data { path: path.to_path_buf(), line, message };
    let header = reader.headers().map_err(|e| data_err(1, e.to_string()))?.clone();
    let d = check_header(&header).map_err(|m| data_err(1, m))?;
    let (mut x, mut a, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            data_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != d + 2 {
            return Err(data_err(line, format!("expected {} fields, found {}", d + 2, record.len())));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| data_err(line, format!("column `{}`: cannot read `{field}` as a number", &header[j])))?;
            if !v.is_finite() {
                return Err(data_err(line, format!("column `{}`: non-finite value {v}", &header[j])));
            }
            match j {
                _ if j < d => x.push(v),
                _ if j == d => a.push(v),
                _ => y.push(v),
            }
        }
    }
    if a.is_empty() {
        return Err(data_err(1, "no observations".into()));
    }
    let support = match support {
        Some(s) => {
            if let Some(i) = a.iter().position(|&v| !s.contains(v)) {
                return Err(CliError::Usage(format!(
                    "{}: observation {} has a = {} outside the support [{}, {}]",
                    path.display(),
                    i + 1,
                    a[i],
                    s.lo(),
                    s.hi()
                )));
            }
            s
        }
        None => {
            let lo = a.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Support::new(lo, hi).map_err(|_| {
                CliError::Usage(format!("{}: every exposure equals {lo}; pass --support", path.display()))
            })?
        }
    };
    Ok(Dataset::new(d, x, a, y, support)?)
}

/// Number of covariates named by a valid header.
fn check_header(header: &csv::StringRecord) -> Result<usize, String> {
    let names: Vec<&str> = header.iter().collect();
    let n = names.len();
    let expected = |d: usize| {
        let mut v: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
        v.push("a".into());
        v.push("y".into());
        v
    };
    if n < 3 || names != expected(n - 2) {
        return Err(format!(
            "header must be x1,...,xd,a,y with at least one covariate; found `{}`",
            names.join(",")
        ));
    }
    Ok(n - 2)
}

/// Writes `data` with the standard header, preceded by an optional comment line.
pub fn write_dataset(path: &Path, data: &Dataset, comment: Option<&str>) -> Result<(), CliError> {
    let mut header: Vec<String> = (1..=data.d()).map(|j| format!("x{j}")).collect();
    header.push("a".into());
    header.push("y".into());
    let mut w = CsvOut::create(&Output::File(path.to_path_buf()), comment, &header)?;
    for i in 0..data.n() {
        let mut row: Vec<f64> = data.x_row(i).to_vec();
        row.push(data.a()[i]);
        row.push(data.y()[i]);
        w.row(&row)?;
    }
    w.finish()
}

/// Shortest decimal form that reads back to the same value.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v != 0.0 && !(1e-5..1e16).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// CSV writer with a leading comment line.
pub struct CsvOut {
    writer: csv::Writer<Box<dyn Write>>,
    path: PathBuf,
}

impl CsvOut {
    pub fn create(out: &Output, comment: Option<&str>, header: &[impl AsRef<str>]) -> Result<Self, CliError> {
        let (mut sink, path): (Box<dyn Write>, PathBuf) = match out {
            Output::Stdout => (Box::new(BufWriter::new(io::stdout())), PathBuf::from("<stdout>")),
            Output::File(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
                }
                let f = File::create(p).map_err(CliError::io(p))?;
                (Box::new(BufWriter::new(f)), p.clone())
            }
        };
        if let Some(c) = comment {
            writeln!(sink, "{c}").map_err(CliError::io(&path))?;
        }
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(header.iter().map(AsRef::as_ref)).map_err(|e| csv_err(&path, e))?;
        Ok(Self { writer, path })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<(), CliError> {
        self.fields(values.iter().map(|&v| fmt_f64(v)))
    }

    pub fn fields<I: IntoIterator<Item = S>, S: AsRef<[u8]>>(&mut self, fields: I) -> Result<(), CliError> {
        self.writer.write_record(fields).map_err(|e| csv_err(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush().map_err(CliError::io(&self.path))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io { path: path.to_path_buf(), source },
        other => CliError::Usage(format!("{}: {other:?}", path.display())),
    }
}
