//! Pull interface for chain output.

use crate::error::{Error, Result};

/// Something that yields one p-dimensional draw at a time.
pub trait SampleSource {
    fn dim(&self) -> usize;

    /// Writes the next draw into `out` (of length `dim()`). Returns
    /// `Ok(false)` at end of stream.
    fn next_into(&mut self, out: &mut [f64]) -> Result<bool>;
}

impl<S: SampleSource + ?Sized> SampleSource for Box<S> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn next_into(&mut self, out: &mut [f64]) -> Result<bool> {
        (**self).next_into(out)
    }
}

impl<S: SampleSource + ?Sized> SampleSource for &mut S {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn next_into(&mut self, out: &mut [f64]) -> Result<bool> {
        (**self).next_into(out)
    }
}

/// Replays a row-major in-memory chain.
#[derive(Debug, Clone)]
pub struct RowSource<'a> {
    dim: usize,
    rows: &'a [f64],
    pos: usize,
}

impl<'a> RowSource<'a> {
    pub fn new(dim: usize, rows: &'a [f64]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if !rows.len().is_multiple_of(dim) {
            return Err(Error::Format(format!(
                "buffer of {} values is not a whole number of {dim}-vectors",
                rows.len()
            )));
        }
        Ok(RowSource { dim, rows, pos: 0 })
    }
}

impl SampleSource for RowSource<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn next_into(&mut self, out: &mut [f64]) -> Result<bool> {
        if self.pos >= self.rows.len() {
            return Ok(false);
        }
        out.copy_from_slice(&self.rows[self.pos..self.pos + self.dim]);
        self.pos += self.dim;
        Ok(true)
    }
}

/// Places several sources side by side; the stream ends when any part ends.
pub struct Stacked {
    parts: Vec<Box<dyn SampleSource + Send>>,
    dim: usize,
}

impl Stacked {
    pub fn new(parts: Vec<Box<dyn SampleSource + Send>>) -> Result<Self> {
        let dim = parts.iter().map(|p| p.dim()).sum();
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Stacked { parts, dim })
    }
}

impl SampleSource for Stacked {
    fn dim(&self) -> usize {
        self.dim
    }

    fn next_into(&mut self, out: &mut [f64]) -> Result<bool> {
        let mut offset = 0;
        for part in &mut self.parts {
            let d = part.dim();
            if !part.next_into(&mut out[offset..offset + d])? {
                return Ok(false);
            }
            offset += d;
        }
        Ok(true)
    }
}

/// Stops the wrapped source after `limit` draws.
pub struct Take<S> {
    inner: S,
    remaining: u64,
}

impl<S: SampleSource> Take<S> {
    pub fn new(inner: S, limit: u64) -> Self {
        Take {
            inner,
            remaining: limit,
        }
    }
}

impl<S: SampleSource> SampleSource for Take<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn next_into(&mut self, out: &mut [f64]) -> Result<bool> {
        if self.remaining == 0 {
            return Ok(false);
        }
        self.remaining -= 1;
        self.inner.next_into(out)
    }
}

/// Draws `n` samples into a row-major buffer. Stops early at end of stream.
pub fn collect_rows<S: SampleSource + ?Sized>(source: &mut S, n: usize) -> Result<Vec<f64>> {
    let dim = source.dim();
    let mut rows = Vec::with_capacity(n * dim);
    let mut buf = vec![0.0; dim];
    for _ in 0..n {
        if !source.next_into(&mut buf)? {
            break;
        }
        rows.extend_from_slice(&buf);
    }
    Ok(rows)
}
