//! Files: the parameter document, data CSVs and experiment outputs.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::elliptical::{SampleMatrix, VmfEllipticalParams};
use crate::error::{Error, Result};
use crate::experiment::{run_grid, summarize, CaseResult, ExperimentSpec, GridOptions, SummaryRow};
use crate::radial::GeneratorKind;
use crate::vmf::{UnitVector, VmfParams};

/// On-disk form of [`VmfEllipticalParams`]. `lambda` holds the lower triangle
/// row by row (row `i` has `i + 1` entries); square rows with a zero upper
/// triangle are accepted on input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDocument {
    pub m: usize,
    pub mu: Vec<f64>,
    pub lambda: Vec<Vec<f64>>,
    pub mu_v: Vec<f64>,
    pub tau: f64,
    pub generator: GeneratorKind,
}

impl From<&VmfEllipticalParams> for ParamsDocument {
    fn from(p: &VmfEllipticalParams) -> Self {
        let m = p.dim();
        ParamsDocument {
            m,
            mu: p.mu().iter().copied().collect(),
            lambda: (0..m).map(|i| (0..=i).map(|j| p.lambda()[(i, j)]).collect()).collect(),
            mu_v: p.vmf().mu_v().as_vector().iter().copied().collect(),
            tau: p.vmf().tau(),
            generator: p.generator_kind(),
        }
    }
}

impl ParamsDocument {
    pub fn into_params(self) -> Result<VmfEllipticalParams> {
        let m = self.m;
        if m < 2 {
            return Err(Error::Parse(format!("m: dimension must be >= 2, got {m}")));
        }
        let check_len = |field: &str, len: usize| {
            if len != m {
                Err(Error::Parse(format!("{field}: expected {m} entries, got {len}")))
            } else {
                Ok(())
            }
        };
        check_len("mu", self.mu.len())?;
        check_len("mu_v", self.mu_v.len())?;
        check_len("lambda", self.lambda.len())?;
        let mut lambda = DMatrix::zeros(m, m);
        for (i, row) in self.lambda.iter().enumerate() {
            if row.len() != i + 1 && row.len() != m {
                return Err(Error::Parse(format!(
                    "lambda[{i}]: expected {} (lower triangle) or {m} entries, got {}",
                    i + 1,
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if j > i && v != 0.0 {
                    return Err(Error::Parse(format!(
                        "lambda[{i}][{j}]: entries above the diagonal must be 0, got {v}"
                    )));
                }
                lambda[(i, j)] = v;
            }
        }
        let mu_v = UnitVector::new(DVector::from_vec(self.mu_v))?;
        VmfEllipticalParams::new(
            DVector::from_vec(self.mu),
            lambda,
            VmfParams::new(mu_v, self.tau)?,
            self.generator,
        )
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse(format!("{path}: {}", e.into_inner()))
    })
}

pub fn params_from_str(text: &str) -> Result<VmfEllipticalParams> {
    parse_json::<ParamsDocument>(text)?.into_params()
}

pub fn params_to_string(params: &VmfEllipticalParams) -> String {
    let mut s = serde_json::to_string_pretty(&ParamsDocument::from(params)).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn read_params(path: &Path) -> Result<VmfEllipticalParams> {
    params_from_str(&fs::read_to_string(path)?)
}

pub fn write_params(path: &Path, params: &VmfEllipticalParams) -> Result<()> {
    fs::write(path, params_to_string(params))?;
    Ok(())
}

pub fn experiment_spec_from_str(text: &str) -> Result<ExperimentSpec> {
    let spec: ExperimentSpec = parse_json(text)?;
    spec.validate()?;
    Ok(spec)
}

/// Read a data CSV with a header row; the header width fixes the dimension.
pub fn read_samples<R: Read>(reader: R) -> Result<SampleMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let m = rdr
        .headers()
        .map_err(|e| Error::Parse(format!("header: {e}")))?
        .len();
    if m == 0 {
        return Err(Error::Parse("line 1: missing header".into()));
    }
    let mut out = SampleMatrix::empty(m);
    let mut row = vec![0.0; m];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| match e.position() {
            Some(pos) => Error::Parse(format!("line {}: {e}", pos.line())),
            None => Error::Parse(e.to_string()),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != m {
            return Err(Error::Parse(format!("line {line}: expected {m} fields, got {}", rec.len())));
        }
        for (j, field) in rec.iter().enumerate() {
            row[j] = field
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {line}, column {}: {field:?} is not a number", j + 1)))?;
        }
        out.push_row(&row)?;
    }
    Ok(out)
}

pub fn read_samples_file(path: &Path) -> Result<SampleMatrix> {
    read_samples(File::open(path)?)
}

/// Header `x1..xm`, one row per observation, shortest round-trip decimals.
pub fn write_samples<W: Write>(writer: W, data: &SampleMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record((1..=data.dim()).map(|j| format!("x{j}")))
        .map_err(csv_io)?;
    for r in data.rows() {
        w.write_record(r.iter().map(|v| v.to_string())).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_samples_file(path: &Path, data: &SampleMatrix) -> Result<()> {
    write_samples(BufWriter::new(File::create(path)?), data)
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// `%.{digits}g`-style formatting: fixed notation for moderate exponents,
/// scientific otherwise, trailing zeros removed.
pub fn format_significant(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        return format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Summary of a fit written next to the fitted parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReportDocument {
    pub generator: GeneratorKind,
    pub method: String,
    pub n: usize,
    pub loglik: f64,
    pub iters: usize,
    pub converged: bool,
    pub trace_path: String,
}

pub fn write_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["iter", "loglik"]).map_err(csv_io)?;
    for (i, l) in trace.iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()]).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub const RESULTS_HEADER: [&str; 8] = ["generator", "m", "tau", "trial", "error_ratio", "iters", "converged", "wall_time_s"];
pub const SUMMARY_HEADER: [&str; 6] = ["generator", "m", "tau", "mean_error_ratio", "std_error_ratio", "n_converged"];

/// `results.csv` and `summary.csv` inside an output directory. Both files are
/// created on construction so an unwritable directory fails before any work.
pub struct ExperimentWriter {
    results: csv::Writer<File>,
    summary: csv::Writer<File>,
    dir: PathBuf,
}

impl ExperimentWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut results = csv::Writer::from_writer(File::create(dir.join("results.csv"))?);
        let summary = csv::Writer::from_writer(File::create(dir.join("summary.csv"))?);
        results.write_record(RESULTS_HEADER).map_err(csv_io)?;
        results.flush()?;
        Ok(ExperimentWriter {
            results,
            summary,
            dir: dir.to_path_buf(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Append one row and flush, so an interrupted run leaves whole rows.
    pub fn write_result(&mut self, r: &CaseResult) -> Result<()> {
        self.results
            .write_record([
                r.generator.to_string(),
                r.m.to_string(),
                r.tau.to_string(),
                r.trial.to_string(),
                r.error_ratio.to_string(),
                r.iters.to_string(),
                r.converged.to_string(),
                r.wall_time_s.to_string(),
            ])
            .map_err(csv_io)?;
        self.results.flush()?;
        Ok(())
    }

    pub fn write_summary(&mut self, rows: &[SummaryRow]) -> Result<()> {
        self.summary.write_record(SUMMARY_HEADER).map_err(csv_io)?;
        for s in rows {
            self.summary
                .write_record([
                    s.generator.to_string(),
                    s.m.to_string(),
                    s.tau.to_string(),
                    s.mean_error_ratio.to_string(),
                    s.std_error_ratio.to_string(),
                    s.n_converged.to_string(),
                ])
                .map_err(csv_io)?;
        }
        self.summary.flush()?;
        Ok(())
    }
}

/// Run the grid and write `results.csv` and `summary.csv` into `out_dir`.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path, options: &GridOptions) -> Result<Vec<SummaryRow>> {
    spec.validate()?;
    let mut writer = ExperimentWriter::create(out_dir)?;
    let rows = run_grid(spec, options, |r| writer.write_result(r))?;
    let summary = summarize(&rows);
    writer.write_summary(&summary)?;
    Ok(summary)
}
