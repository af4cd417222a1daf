//! CSV output with a provenance header line, and the matching reader.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::scenario::Scenario;
use crate::{Error, Result};

/// First line of every emitted file: `# scenario_hash=<hex> seed=<n> kind=<name>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub scenario_hash: String,
    pub seed: u64,
    pub kind: String,
}

impl Header {
    pub fn new(scenario: &Scenario, kind: &str) -> Self {
        Self {
            scenario_hash: scenario.hash(),
            seed: scenario.seed,
            kind: kind.to_string(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "# scenario_hash={} seed={} kind={}",
            self.scenario_hash, self.seed, self.kind
        )
    }

    pub fn parse(line: &str) -> Option<Self> {
        let rest = line.strip_prefix('#')?.trim();
        let (mut hash, mut seed, mut kind) = (None, None, None);
        for field in rest.split_whitespace() {
            let (k, v) = field.split_once('=')?;
            match k {
                "scenario_hash" => hash = Some(v.to_string()),
                "seed" => seed = v.parse().ok(),
                "kind" => kind = Some(v.to_string()),
                _ => {}
            }
        }
        Some(Self {
            scenario_hash: hash?,
            seed: seed?,
            kind: kind?,
        })
    }
}

/// Streaming CSV writer for one record type.
pub struct CsvSink<T> {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
    rows: usize,
    _marker: std::marker::PhantomData<fn(&T)>,
}

impl<T: Serialize> CsvSink<T> {
    pub fn create(path: impl AsRef<Path>, header: &Header) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut buf = BufWriter::new(file);
        writeln!(buf, "{}", header.line()).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            writer: csv::Writer::from_writer(buf),
            path,
            rows: 0,
            _marker: std::marker::PhantomData,
        })
    }

    pub fn push(&mut self, row: &T) -> Result<()> {
        self.writer.serialize(row)?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.path)
    }
}

/// Write all `rows` to `path` in one go.
pub fn write_csv<'a, T: Serialize + 'a>(
    path: impl AsRef<Path>,
    header: &Header,
    rows: impl IntoIterator<Item = &'a T>,
) -> Result<PathBuf> {
    let mut sink = CsvSink::create(path, header)?;
    for r in rows {
        sink.push(r)?;
    }
    sink.finish()
}

/// Read a file written by [`write_csv`] or [`CsvSink`].
pub fn read_csv<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<(Header, Vec<T>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    let header = Header::parse(first.trim_end())
        .ok_or_else(|| Error::Config(format!("{} has no provenance header", path.display())))?;
    let mut csv = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(reader);
    let rows = csv.deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok((header, rows))
}

/// Write `text` to `path`.
pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<PathBuf> {
    let path = path.as_ref().to_path_buf();
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Create the output directory if needed.
pub fn ensure_dir(dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}
