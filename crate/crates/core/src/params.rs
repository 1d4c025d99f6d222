//! Named parameter blocks with stable iteration order, plus the text
//! checkpoint container (magic header, `(name, shape, row-major values)`
//! records). Values round-trip exactly: the shortest-float formatting used by
//! `Display` parses back to the identical bits.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

const MAGIC: &str = "netalign-params v1";

/// Ordered collection of uniquely named parameter blocks.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamSet<F> {
    blocks: Vec<(String, DenseMatrix<F>)>,
}

impl<F: Scalar> ParamSet<F> {
    pub fn new() -> Self {
        Self { blocks: Vec::new() }
    }

    /// Add a block; names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, value: DenseMatrix<F>) {
        let name = name.into();
        assert!(
            self.index_of(&name).is_none(),
            "duplicate parameter block {name:?}"
        );
        self.blocks.push((name, value));
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.blocks.iter().position(|(n, _)| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&DenseMatrix<F>> {
        self.index_of(name).map(|i| &self.blocks[i].1)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut DenseMatrix<F>> {
        let i = self.index_of(name)?;
        Some(&mut self.blocks[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DenseMatrix<F>)> {
        self.blocks.iter().map(|(n, m)| (n.as_str(), m))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut DenseMatrix<F>)> {
        self.blocks.iter_mut().map(|(n, m)| (n.as_str(), m))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.blocks.iter().map(|(n, _)| n.as_str())
    }

    /// Same block names and shapes, all-zero values.
    pub fn zeros_like(&self) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|(n, m)| (n.clone(), DenseMatrix::zeros(m.rows(), m.cols())))
            .collect();
        Self { blocks }
    }

    /// All blocks where `name` starts with `prefix`.
    pub fn with_prefix<'a>(
        &'a self,
        prefix: &'a str,
    ) -> impl Iterator<Item = (&'a str, &'a DenseMatrix<F>)> {
        self.iter().filter(move |(n, _)| n.starts_with(prefix))
    }

    pub fn total_len(&self) -> usize {
        self.blocks.iter().map(|(_, m)| m.len()).sum()
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{MAGIC}")?;
        for (name, m) in &self.blocks {
            writeln!(w, "block {} {} {}", name, m.rows(), m.cols())?;
            for i in 0..m.rows() {
                let line: Vec<String> = m.row(i).iter().map(|v| format!("{v}")).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
        }
        writeln!(w, "end")?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_string());
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("empty file"))??;
        if header.trim() != MAGIC {
            return Err(bad(&format!("bad magic header {header:?}")));
        }
        let mut set = Self::new();
        loop {
            let line = lines.next().ok_or_else(|| bad("missing end marker"))??;
            let line = line.trim();
            if line == "end" {
                break;
            }
            let mut toks = line.split_whitespace();
            if toks.next() != Some("block") {
                return Err(bad(&format!("expected block record, got {line:?}")));
            }
            let name = toks.next().ok_or_else(|| bad("block without name"))?;
            let rows: usize = toks
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad("bad row count"))?;
            let cols: usize = toks
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad("bad col count"))?;
            let mut data = Vec::with_capacity(rows * cols);
            while data.len() < rows * cols {
                let row = lines.next().ok_or_else(|| bad("truncated block"))??;
                for tok in row.split_whitespace() {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| bad(&format!("bad value {tok:?}")))?;
                    data.push(F::cast(v));
                }
            }
            if data.len() != rows * cols {
                return Err(bad(&format!("block {name} has wrong value count")));
            }
            set.insert(name, DenseMatrix::from_vec(rows, cols, data));
        }
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(BufReader::new(f))
    }

    /// Canonical serialized form; equal strings imply bit-identical params.
    pub fn canonical_string(&self) -> String {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("in-memory write");
        String::from_utf8(out).expect("utf8")
    }
}
