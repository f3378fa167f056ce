//! Chain dump files.
//!
//! Two encodings are understood:
//!
//! * CSV: comma separated, one iteration per row, `p` columns, with an
//!   optional single header row (recognised by a non-numeric first token).
//! * Binary: a 24-byte header followed by row-major little-endian `f64`s.
//!
//! ```text
//! offset  size  field
//!      0     8  magic "MCSTREAM"
//!      8     4  version, u32 LE (1)
//!     12     4  encoding, u32 LE (1 = f64le)
//!     16     8  p, u64 LE
//!     24   8p*  payload
//! ```
//!
//! Files are told apart by the magic bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::source::SampleSource;
use crate::stopping::ProgressSink;

pub const MAGIC: &[u8; 8] = b"MCSTREAM";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Csv,
    F64Le,
}

impl Encoding {
    fn code(self) -> u32 {
        match self {
            Encoding::Csv => 0,
            Encoding::F64Le => 1,
        }
    }

    /// `.csv` selects CSV, anything else the binary format.
    pub fn from_path(path: &Path) -> Encoding {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Encoding::Csv,
            _ => Encoding::F64Le,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainFileHeader {
    pub version: u32,
    pub p: usize,
    pub encoding: Encoding,
}

impl ChainFileHeader {
    pub fn f64le(p: usize) -> Self {
        ChainFileHeader {
            version: VERSION,
            p,
            encoding: Encoding::F64Le,
        }
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN as usize] {
        let mut out = [0u8; HEADER_LEN as usize];
        out[..8].copy_from_slice(MAGIC);
        out[8..12].copy_from_slice(&self.version.to_le_bytes());
        out[12..16].copy_from_slice(&self.encoding.code().to_le_bytes());
        out[16..24].copy_from_slice(&(self.p as u64).to_le_bytes());
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN as usize {
            return Err(Error::Format(format!(
                "binary header truncated: {} of {HEADER_LEN} bytes",
                bytes.len()
            )));
        }
        if &bytes[..8] != MAGIC {
            return Err(Error::Format("missing MCSTREAM magic".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported chain file version {version}"
            )));
        }
        let code = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
        if code != Encoding::F64Le.code() {
            return Err(Error::Format(format!(
                "unsupported payload encoding {code}"
            )));
        }
        let p = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        if p == 0 || p > u32::MAX as u64 {
            return Err(Error::Format(format!("invalid coordinate count {p}")));
        }
        Ok(ChainFileHeader {
            version,
            p: p as usize,
            encoding: Encoding::F64Le,
        })
    }
}

enum Body<R> {
    Binary {
        reader: R,
        offset: u64,
        record: Vec<u8>,
    },
    Csv {
        reader: R,
        line_no: usize,
        line: String,
        pending: Option<Vec<f64>>,
    },
}

/// Streams draws out of a chain file of either encoding.
pub struct ChainReader<R> {
    dim: usize,
    encoding: Encoding,
    column_names: Option<Vec<String>>,
    body: Body<R>,
}

impl ChainReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        ChainReader::new(BufReader::new(file))
    }
}

fn parse_row(line: &str, line_no: usize, expected: Option<usize>) -> Result<Vec<f64>> {
    let values = line
        .split(',')
        .enumerate()
        .map(|(col, tok)| {
            tok.trim().parse::<f64>().map_err(|_| {
                Error::Format(format!(
                    "line {line_no}, column {}: cannot parse {:?} as a number",
                    col + 1,
                    tok.trim()
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(p) = expected {
        if values.len() != p {
            return Err(Error::Format(format!(
                "line {line_no}: expected {p} columns, found {}",
                values.len()
            )));
        }
    }
    if let Some((col, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Format(format!(
            "line {line_no}, column {}: non-finite value {v}",
            col + 1
        )));
    }
    Ok(values)
}

impl<R: BufRead> ChainReader<R> {
    pub fn new(mut reader: R) -> Result<Self> {
        let head = reader.fill_buf()?;
        if head.starts_with(MAGIC)
            || (head.len() < 8 && MAGIC.starts_with(head) && !head.is_empty())
        {
            let mut bytes = [0u8; HEADER_LEN as usize];
            read_fully(&mut reader, &mut bytes).map_err(|got| {
                Error::Format(format!(
                    "binary header truncated: {got} of {HEADER_LEN} bytes"
                ))
            })?;
            let header = ChainFileHeader::parse(&bytes)?;
            return Ok(ChainReader {
                dim: header.p,
                encoding: Encoding::F64Le,
                column_names: None,
                body: Body::Binary {
                    reader,
                    offset: HEADER_LEN,
                    record: vec![0u8; 8 * header.p],
                },
            });
        }

        let mut line = String::new();
        let mut line_no = 0;
        let mut column_names = None;
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                return Err(Error::Format("CSV chain file contains no data rows".into()));
            }
            line_no += 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let first = trimmed.split(',').next().unwrap_or("").trim();
            if column_names.is_none() && line_no == 1 && first.parse::<f64>().is_err() {
                column_names = Some(trimmed.split(',').map(|s| s.trim().to_string()).collect());
                continue;
            }
            let expected = column_names.as_ref().map(|c: &Vec<String>| c.len());
            let row = parse_row(trimmed, line_no, expected)?;
            return Ok(ChainReader {
                dim: row.len(),
                encoding: Encoding::Csv,
                column_names,
                body: Body::Csv {
                    reader,
                    line_no,
                    line,
                    pending: Some(row),
                },
            });
        }
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    /// Reads every remaining draw into a row-major buffer.
    pub fn read_all(&mut self) -> Result<Vec<f64>> {
        let mut rows = Vec::new();
        let mut buf = vec![0.0; self.dim];
        while self.next_into(&mut buf)? {
            rows.extend_from_slice(&buf);
        }
        Ok(rows)
    }
}

/// Fills `buf`, returning the number of bytes read on a short read.
fn read_fully<R: Read>(reader: &mut R, buf: &mut [u8]) -> std::result::Result<(), usize> {
    let mut got = 0;
    while got < buf.len() {
        match reader.read(&mut buf[got..]) {
            Ok(0) => return Err(got),
            Ok(k) => got += k,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(_) => return Err(got),
        }
    }
    Ok(())
}

impl<R: BufRead> SampleSource for ChainReader<R> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn next_into(&mut self, out: &mut [f64]) -> Result<bool> {
        let dim = self.dim;
        match &mut self.body {
            Body::Binary {
                reader,
                offset,
                record,
            } => {
                // Distinguish clean EOF from a partial record.
                if reader.fill_buf()?.is_empty() {
                    return Ok(false);
                }
                if let Err(got) = read_fully(reader, record) {
                    return Err(Error::Format(format!(
                        "truncated record at byte offset {offset}: {got} of {} bytes",
                        record.len()
                    )));
                }
                for (j, (o, chunk)) in out.iter_mut().zip(record.chunks_exact(8)).enumerate() {
                    let v = f64::from_le_bytes(chunk.try_into().unwrap());
                    if !v.is_finite() {
                        return Err(Error::Format(format!(
                            "non-finite value {v} at byte offset {}",
                            *offset + 8 * j as u64
                        )));
                    }
                    *o = v;
                }
                *offset += record.len() as u64;
                Ok(true)
            }
            Body::Csv {
                reader,
                line_no,
                line,
                pending,
            } => {
                if let Some(row) = pending.take() {
                    out.copy_from_slice(&row);
                    return Ok(true);
                }
                loop {
                    line.clear();
                    if reader.read_line(line)? == 0 {
                        return Ok(false);
                    }
                    *line_no += 1;
                    let trimmed = line.trim();
                    if trimmed.is_empty() {
                        continue;
                    }
                    let row = parse_row(trimmed, *line_no, Some(dim))?;
                    out.copy_from_slice(&row);
                    return Ok(true);
                }
            }
        }
    }
}

/// Reads a whole chain file, returning `(p, rows)`.
pub fn read_chain(path: impl AsRef<Path>) -> Result<(usize, Vec<f64>)> {
    let mut reader = ChainReader::open(path)?;
    let rows = reader.read_all()?;
    Ok((reader.dim(), rows))
}

/// Writes draws in either encoding. Also usable as a [`ProgressSink`] to
/// dump a chain while a stopping rule runs.
pub struct ChainWriter<W: Write> {
    writer: W,
    encoding: Encoding,
    dim: usize,
    line: String,
}

impl ChainWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, dim: usize) -> Result<Self> {
        let path = path.as_ref();
        let file = File::create(path)?;
        ChainWriter::new(BufWriter::new(file), Encoding::from_path(path), dim)
    }
}

impl<W: Write> ChainWriter<W> {
    pub fn new(mut writer: W, encoding: Encoding, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if encoding == Encoding::F64Le {
            writer.write_all(&ChainFileHeader::f64le(dim).to_bytes())?;
        }
        Ok(ChainWriter {
            writer,
            encoding,
            dim,
            line: String::new(),
        })
    }

    pub fn write_row(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        match self.encoding {
            Encoding::F64Le => {
                for v in x {
                    self.writer.write_all(&v.to_le_bytes())?;
                }
            }
            Encoding::Csv => {
                use std::fmt::Write as _;
                self.line.clear();
                for (j, v) in x.iter().enumerate() {
                    if j > 0 {
                        self.line.push(',');
                    }
                    // Display prints the shortest representation that parses
                    // back to the same f64.
                    write!(self.line, "{v}").unwrap();
                }
                self.line.push('\n');
                self.writer.write_all(self.line.as_bytes())?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.writer.flush()?;
        Ok(self.writer)
    }

    pub fn flush(&mut self) -> Result<()> {
        Ok(self.writer.flush()?)
    }
}

impl<W: Write> ProgressSink for ChainWriter<W> {
    fn on_sample(&mut self, x: &[f64]) -> Result<()> {
        self.write_row(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn write(encoding: Encoding, dim: usize, rows: &[f64]) -> Vec<u8> {
        let mut w = ChainWriter::new(Vec::new(), encoding, dim).unwrap();
        for r in rows.chunks(dim) {
            w.write_row(r).unwrap();
        }
        w.finish().unwrap()
    }

    fn read(bytes: &[u8]) -> Result<(usize, Vec<f64>)> {
        let mut r = ChainReader::new(Cursor::new(bytes))?;
        let rows = r.read_all()?;
        Ok((r.dim(), rows))
    }

    #[test]
    fn header_layout() {
        let h = ChainFileHeader::f64le(7).to_bytes();
        assert_eq!(&h[..8], b"MCSTREAM");
        assert_eq!(&h[8..12], &[1, 0, 0, 0]);
        assert_eq!(&h[12..16], &[1, 0, 0, 0]);
        assert_eq!(&h[16..24], &[7, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(
            ChainFileHeader::parse(&h).unwrap(),
            ChainFileHeader::f64le(7)
        );
    }

    #[test]
    fn both_encodings_read_back_identically() {
        let rows = [0.1, -2.5e-300, 3.0, 1e300, 1.0 / 3.0, -0.0];
        for enc in [Encoding::Csv, Encoding::F64Le] {
            let (dim, back) = read(&write(enc, 2, &rows)).unwrap();
            assert_eq!(dim, 2);
            assert!(rows.iter().zip(&back).all(|(a, b)| a == b), "{enc:?}");
        }
        assert_eq!(write(Encoding::F64Le, 2, &rows).len(), 24 + 8 * 6);
    }

    #[test]
    fn csv_header_and_blank_lines() {
        let text = "alpha, beta\n1,2\n\n3 , 4\n";
        let mut r = ChainReader::new(Cursor::new(text)).unwrap();
        assert_eq!(r.column_names().unwrap(), &["alpha", "beta"]);
        assert_eq!(r.read_all().unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        let (dim, rows) = read(b"5\n6\n7").unwrap();
        assert_eq!((dim, rows), (1, vec![5.0, 6.0, 7.0]));
    }

    #[test]
    fn csv_errors_name_lines() {
        let err = read(b"1,2\n3,4\n5\n").unwrap_err().to_string();
        assert!(
            err.contains("line 3") && err.contains("expected 2 columns"),
            "{err}"
        );
        let err = read(b"1,2\n3,x\n").unwrap_err().to_string();
        assert!(err.contains("line 2, column 2"), "{err}");
        let err = read(b"a,b\n1,2,3\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let err = read(b"1\nNaN\n").unwrap_err().to_string();
        assert!(err.contains("non-finite"), "{err}");
        assert!(read(b"").is_err());
        assert!(read(b"x,y\n").is_err());
    }

    #[test]
    fn truncated_binary_record() {
        let mut bytes = write(Encoding::F64Le, 2, &[1.0, 2.0, 3.0, 4.0]);
        bytes.truncate(bytes.len() - 3);
        let err = read(&bytes).unwrap_err().to_string();
        assert!(err.contains("byte offset 40"), "{err}");
        assert!(err.contains("13 of 16"), "{err}");
    }

    #[test]
    fn bad_binary_headers() {
        let mut bytes = write(Encoding::F64Le, 1, &[1.0]);
        bytes[8] = 2;
        assert!(read(&bytes).unwrap_err().to_string().contains("version"));
        let mut bytes = write(Encoding::F64Le, 1, &[1.0]);
        bytes[12] = 0;
        assert!(read(&bytes).unwrap_err().to_string().contains("encoding"));
        let bytes = write(Encoding::F64Le, 1, &[1.0]);
        assert!(read(&bytes[..10])
            .unwrap_err()
            .to_string()
            .contains("header truncated"));
        let mut bytes = write(Encoding::F64Le, 1, &[1.0]);
        bytes[24..32].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(read(&bytes)
            .unwrap_err()
            .to_string()
            .contains("byte offset 24"));
    }

    #[test]
    fn encoding_from_extension() {
        assert_eq!(Encoding::from_path(Path::new("a/b.CSV")), Encoding::Csv);
        assert_eq!(Encoding::from_path(Path::new("chain.bin")), Encoding::F64Le);
        assert_eq!(Encoding::from_path(Path::new("chain")), Encoding::F64Le);
    }
}
