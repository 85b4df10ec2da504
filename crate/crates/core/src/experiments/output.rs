//! File emission: CSV with a commented provenance header, gnuplot scripts
//! and JSON reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::ExperimentSpec;
use crate::error::{Error, Result};

/// Paths written by a scenario run (empty when the spec has no output
/// directory).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
}

/// `x` with 12 significant digits, `%g`-style: fixed notation for
/// moderate exponents, scientific otherwise, trailing zeros trimmed.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `# key: value` provenance lines shared by every output file.
pub(crate) fn provenance(spec: &ExperimentSpec) -> String {
    let mut out = String::new();
    writeln!(out, "# simcap {}", spec.scenario).unwrap();
    writeln!(out, "# seed: {}", spec.seed).unwrap();
    writeln!(out, "# config: {}", spec.config.to_json()).unwrap();
    writeln!(out, "# spec: {}", serde_json::to_string(spec).expect("spec serializes")).unwrap();
    out
}

/// Accumulates CSV rows; each cell is either text or a number formatted by
/// [`format_number`].
pub(crate) struct Csv {
    text: String,
}

pub(crate) enum Cell<'a> {
    Text(&'a str),
    Num(f64),
    Int(u64),
    Empty,
}

impl Csv {
    pub fn new(spec: &ExperimentSpec, notes: &[String], header: &str) -> Self {
        let mut text = provenance(spec);
        for note in notes {
            writeln!(text, "# {note}").unwrap();
        }
        text.push_str(header);
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match cell {
                Cell::Text(s) => self.text.push_str(s),
                Cell::Num(x) => self.text.push_str(&format_number(*x)),
                Cell::Int(n) => write!(self.text, "{n}").unwrap(),
                Cell::Empty => {}
            }
        }
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// Gnuplot preamble reading a comma-separated file named `csv`.
pub(crate) fn gnuplot_header(spec: &ExperimentSpec, csv: &str, xlabel: &str, ylabel: &str) -> String {
    let mut out = provenance(spec);
    writeln!(out, "set datafile separator ','").unwrap();
    writeln!(out, "set datafile missing ''").unwrap();
    writeln!(out, "set terminal pngcairo size 900,600").unwrap();
    writeln!(out, "set output '{}.png'", spec.scenario).unwrap();
    writeln!(out, "set xlabel '{xlabel}'").unwrap();
    writeln!(out, "set ylabel '{ylabel}'").unwrap();
    writeln!(out, "set key outside right").unwrap();
    writeln!(out, "set grid").unwrap();
    writeln!(out, "data = '{csv}'").unwrap();
    out
}

/// Writes `files` (name, contents) under the spec's output directory.
pub(crate) fn write_files(spec: &ExperimentSpec, files: &[(String, String)]) -> Result<Artifacts> {
    let Some(dir) = &spec.output_dir else {
        return Ok(Artifacts::default());
    };
    fs::create_dir_all(dir).map_err(|e| io_context(e, dir))?;
    let mut written = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| io_context(e, &path))?;
        written.push(path);
    }
    Ok(Artifacts { files: written })
}

fn io_context(e: std::io::Error, path: &Path) -> Error {
    Error::from(e).context(format!("writing {}", path.display()))
}
