use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};

/// Writes files into one directory, each via a temp file and rename.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.{}.tmp", std::process::id()));
        let result = (|| {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, &target)
        })();
        if let Err(e) = result {
            let _ = fs::remove_file(&tmp);
            return Err(CliError::io(&target, e));
        }
        self.written.push(target);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(value).expect("report types serialize");
        text.push(b'\n');
        self.write(name, &text)
    }

    pub fn write_csv(&mut self, name: &str, table: Table) -> Result<()> {
        let bytes = table
            .into_bytes()
            .map_err(|e| CliError::io(self.dir.join(name), e))?;
        self.write(name, &bytes)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// A CSV table built in memory. Floats are fixed at six decimals.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

pub enum Cell<'a> {
    Text(&'a str),
    Num(f64),
    Opt(Option<f64>),
    Int(usize),
    Bool(bool),
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        let fields: Vec<String> = cells
            .iter()
            .map(|c| match c {
                Cell::Text(s) => s.to_string(),
                Cell::Num(x) => fixed(*x),
                Cell::Opt(x) => x.map(fixed).unwrap_or_default(),
                Cell::Int(n) => n.to_string(),
                Cell::Bool(b) => b.to_string(),
            })
            .collect();
        self.writer.write_record(&fields).expect("in-memory write");
    }

    fn into_bytes(self) -> std::io::Result<Vec<u8>> {
        self.writer.into_inner().map_err(|e| e.into_error())
    }
}

/// Six decimals, with negative zero printed as zero.
pub fn fixed(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}
