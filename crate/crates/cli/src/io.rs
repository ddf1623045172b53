//! Dataset ingestion and output files.
//!
//! CSV input is read twice: once to count records, then again to parse
//! straight into a preallocated column-major buffer, so peak memory stays
//! close to the size of the matrix itself.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use iboss_core::simgen::{DataFormat, Transform};
use iboss_core::{DataMatrix, Matrix, Subdata};
use thiserror::Error;

/// Magic bytes at the start of a columnar file.
pub const MAGIC: &[u8; 4] = b"IBOS";
pub const COLUMNAR_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 8;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: cannot parse `{value}` in column `{column}` as a finite number")]
    Parse {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged { line: u64, expected: usize, found: usize },
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("line {line}: column `{column}` must be positive to take logs")]
    NonPositiveForLog { column: String, line: u64 },
    #[error("response column `{0}` not found")]
    MissingResponse(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("dataset has no rows or no covariates")]
    Empty,
    #[error("not a columnar dataset: {0}")]
    BadHeader(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// A loaded dataset with its covariate and response names.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub data: DataMatrix,
    pub covariate_names: Vec<String>,
    pub response_name: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub format: DataFormat,
    /// Response column: a header name for CSV; for columnar files an
    /// optional column index overriding the header's.
    pub response: Option<String>,
    pub transform: Transform,
    /// Covariates to discard.
    pub drop: Vec<String>,
}

pub fn load_dataset(path: &Path, opts: &LoadOptions) -> Result<Dataset, IoError> {
    let mut ds = match opts.format {
        DataFormat::Csv => load_csv(path, opts)?,
        DataFormat::F64leColumnar => load_columnar(path, opts)?,
    };
    apply_transform(&mut ds, &opts.transform)?;
    Ok(ds)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::with_capacity(1 << 20, file)))
}

fn csv_error(e: csv::Error) -> IoError {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => IoError::Ragged {
            line,
            expected: *expected_len as usize,
            found: *len as usize,
        },
        _ => IoError::Csv {
            line,
            message: e.to_string(),
        },
    }
}

fn load_csv(path: &Path, opts: &LoadOptions) -> Result<Dataset, IoError> {
    let response = opts.response.clone().unwrap_or_else(|| "y".to_string());
    let mut rdr = csv_reader(path)?;
    let headers: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    let resp_idx = headers
        .iter()
        .position(|h| *h == response)
        .ok_or_else(|| IoError::MissingResponse(response.clone()))?;
    for d in &opts.drop {
        if !headers.contains(d) || *d == response {
            return Err(IoError::UnknownColumn(d.clone()));
        }
    }
    // target slot of each field: Some(j) for covariate j, None if skipped
    let mut slots = Vec::with_capacity(headers.len());
    let mut names = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if i == resp_idx || opts.drop.contains(h) {
            slots.push(None);
        } else {
            slots.push(Some(names.len()));
            names.push(h.clone());
        }
    }

    let mut record = csv::ByteRecord::new();
    let mut n = 0usize;
    while rdr.read_byte_record(&mut record).map_err(csv_error)? {
        n += 1;
    }
    let p = names.len();
    if n == 0 || p == 0 {
        return Err(IoError::Empty);
    }

    let mut z = vec![0.0; n * p];
    let mut y = vec![0.0; n];
    let mut rdr = csv_reader(path)?;
    let mut row = 0;
    while rdr.read_byte_record(&mut record).map_err(csv_error)? {
        if row == n {
            break; // file grew between passes
        }
        let line = record.position().map_or(0, |p| p.line());
        for (field, (i, slot)) in record.iter().zip(slots.iter().enumerate()) {
            if slot.is_none() && i != resp_idx {
                continue;
            }
            let v = parse_field(field).ok_or_else(|| IoError::Parse {
                line,
                column: headers[i].clone(),
                value: String::from_utf8_lossy(field).into_owned(),
            })?;
            match slot {
                Some(j) => z[j * n + row] = v,
                None => y[row] = v,
            }
        }
        row += 1;
    }
    if row != n {
        return Err(IoError::Csv {
            line: 0,
            message: "file changed while reading".into(),
        });
    }
    let covariates = Matrix::new(n, p, z).map_err(|_| IoError::Empty)?;
    let data = DataMatrix::new(covariates, y).map_err(|_| IoError::Empty)?;
    Ok(Dataset {
        data,
        covariate_names: names,
        response_name: response,
    })
}

fn parse_field(field: &[u8]) -> Option<f64> {
    let s = std::str::from_utf8(field).ok()?;
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

struct ColumnarHeader {
    n: usize,
    p: usize,
    response: usize,
}

fn read_header(r: &mut impl Read) -> Result<ColumnarHeader, IoError> {
    let mut buf = [0u8; HEADER_LEN];
    r.read_exact(&mut buf)
        .map_err(|_| IoError::BadHeader("file shorter than the header".into()))?;
    if &buf[..4] != MAGIC {
        return Err(IoError::BadHeader("bad magic".into()));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().expect("4 bytes"));
    if version != COLUMNAR_VERSION {
        return Err(IoError::BadHeader(format!("unsupported version {version}")));
    }
    let word = |at: usize| u64::from_le_bytes(buf[at..at + 8].try_into().expect("8 bytes")) as usize;
    let (n, p, response) = (word(8), word(16), word(24));
    if response > p {
        return Err(IoError::BadHeader(format!("response index {response} exceeds p = {p}")));
    }
    Ok(ColumnarHeader { n, p, response })
}

/// Covariate names used for columnar files, which carry none.
pub fn columnar_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("z{j}")).collect()
}

fn load_columnar(path: &Path, opts: &LoadOptions) -> Result<Dataset, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = BufReader::with_capacity(1 << 20, file);
    let h = read_header(&mut r)?;
    let resp = match &opts.response {
        Some(s) => s
            .parse::<usize>()
            .ok()
            .filter(|&i| i <= h.p)
            .ok_or_else(|| IoError::MissingResponse(s.clone()))?,
        None => h.response,
    };
    if h.n == 0 || h.p == 0 {
        return Err(IoError::Empty);
    }
    let all_names = columnar_names(h.p + 1);
    let mut z = Vec::with_capacity(h.n * h.p);
    let mut y = vec![0.0; h.n];
    let mut names = Vec::with_capacity(h.p);
    let mut bytes = vec![0u8; 8 * 65536];
    for block in 0..=h.p {
        let keep = block != resp && !opts.drop.contains(&all_names[block]);
        let mut remaining = h.n;
        let mut filled = 0;
        while remaining > 0 {
            let take = remaining.min(65536);
            r.read_exact(&mut bytes[..8 * take])
                .map_err(|_| IoError::BadHeader("file shorter than its header declares".into()))?;
            let vals = bytes[..8 * take]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
            if block == resp {
                for (slot, v) in y[filled..filled + take].iter_mut().zip(vals) {
                    *slot = v;
                }
            } else if keep {
                z.extend(vals);
            }
            filled += take;
            remaining -= take;
        }
        if keep {
            names.push(all_names[block].clone());
        }
    }
    for d in &opts.drop {
        if !all_names.contains(d) {
            return Err(IoError::UnknownColumn(d.clone()));
        }
    }
    let p = names.len();
    let check = |col: usize, v: &[f64]| -> Result<(), IoError> {
        match v.iter().position(|x| !x.is_finite()) {
            Some(i) => Err(IoError::Parse {
                line: i as u64,
                column: col.to_string(),
                value: v[i].to_string(),
            }),
            None => Ok(()),
        }
    };
    check(resp, &y)?;
    for j in 0..p {
        check(j, &z[j * h.n..(j + 1) * h.n])?;
    }
    let covariates = Matrix::new(h.n, p, z).map_err(|_| IoError::Empty)?;
    let data = DataMatrix::new(covariates, y).map_err(|_| IoError::Empty)?;
    Ok(Dataset {
        data,
        covariate_names: names,
        response_name: all_names[resp].clone(),
    })
}

/// Writes `data` in the columnar format: header, then the `p` covariate
/// columns followed by the response column.
pub fn save_columnar(path: &Path, data: &DataMatrix) -> Result<(), IoError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::with_capacity(1 << 20, file);
    let (n, p) = (data.n(), data.p());
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&COLUMNAR_VERSION.to_le_bytes());
    for v in [n as u64, p as u64, p as u64] {
        header.extend_from_slice(&v.to_le_bytes());
    }
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(io_err(path));
    write(&header)?;
    for j in 0..=p {
        let col = if j < p { data.column(j) } else { data.response() };
        for chunk in col.chunks(65536) {
            let bytes: Vec<u8> = chunk.iter().flat_map(|v| v.to_le_bytes()).collect();
            write(&bytes)?;
        }
    }
    w.flush().map_err(io_err(path))
}

fn apply_transform(ds: &mut Dataset, transform: &Transform) -> Result<(), IoError> {
    let targets: Vec<usize> = match transform {
        Transform::None => return Ok(()),
        Transform::Log => (0..ds.covariate_names.len()).collect(),
        Transform::LogExcluding { columns } => {
            for c in columns {
                if !ds.covariate_names.contains(c) {
                    return Err(IoError::UnknownColumn(c.clone()));
                }
            }
            (0..ds.covariate_names.len())
                .filter(|&j| !columns.contains(&ds.covariate_names[j]))
                .collect()
        }
    };
    let (mut z, y) = ds.data.clone().into_parts();
    for j in targets {
        let col = z.col_mut(j);
        if let Some(i) = col.iter().position(|&v| !(v > 0.0)) {
            return Err(IoError::NonPositiveForLog {
                column: ds.covariate_names[j].clone(),
                // header is line 1
                line: i as u64 + 2,
            });
        }
        col.iter_mut().for_each(|v| *v = v.ln());
    }
    ds.data = DataMatrix::new(z, y).map_err(|_| IoError::Empty)?;
    Ok(())
}

/// Row indices, one per line.
pub fn write_indices(w: &mut impl Write, indices: &[usize]) -> std::io::Result<()> {
    for i in indices {
        writeln!(w, "{i}")?;
    }
    Ok(())
}

/// The selected rows as CSV, covariates first and the response last.
pub fn write_subdata_csv(w: impl Write, sub: &Subdata, names: &[String], response: &str) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
    header.push(response);
    out.write_record(&header)?;
    let z = sub.z_star();
    for (i, yv) in sub.y_star().iter().enumerate() {
        let mut rec: Vec<String> = (0..z.cols()).map(|j| z[(i, j)].to_string()).collect();
        rec.push(yv.to_string());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
