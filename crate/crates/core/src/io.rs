//! CSV and JSON encodings of state tables and information curves, plus the
//! metadata sidecar.
//!
//! Column order is fixed by [`SCHEMA_VERSION`]. Undefined and low-confidence
//! hazard cells are written empty (CSV) or `null` (JSON), never as zero.
//! Numbers are printed in scientific notation with a configurable number of
//! fractional digits; the default of 16 round-trips every `f64` exactly.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::info::{Bits, InfoCurve};
use crate::table::{CountRow, EnsembleTable, StateRow, TableSource};
use crate::verify::SweepPoint;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_PRECISION: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Format> {
        path.extension()?.to_str()?.parse().ok()
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Schema(format!("unknown format `{other}` (expected csv or json)"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

const X: [&str; 2] = ["x+1", "x-1"];
const A: [&str; 2] = ["u+1", "u-1"];

/// Column names of the table schema, in order.
pub fn table_columns() -> Vec<String> {
    let mut c: Vec<String> = ["schema_version", "source", "confidence_floor", "k"].map(String::from).into();
    let pairs = || X.iter().flat_map(|x| A.iter().map(move |a| format!("{x}_{a}")));
    c.extend(pairs().map(|p| format!("p_term_at_{p}")));
    c.extend(pairs().map(|p| format!("p_term_upto_{p}")));
    c.extend(X.iter().map(|x| format!("p_survive_{x}")));
    c.extend(X.iter().map(|x| format!("low_confidence_{x}")));
    c.extend(X.iter().map(|x| format!("survivors_{x}")));
    c.extend(pairs().map(|p| format!("absorbed_{p}")));
    c.extend(pairs().map(|p| format!("cumulative_{p}")));
    c
}

/// `v` in scientific notation with `precision` fractional digits.
pub fn fmt_num(v: f64, precision: usize) -> String {
    if v == 0.0 {
        // avoid "-0e0"
        return format!("{:.*e}", precision, 0.0);
    }
    format!("{v:.precision$e}")
}

/// One table row as optional fields (`None` → empty cell).
fn row_fields(t: &EnsembleTable, r: &StateRow, precision: usize) -> Vec<Option<String>> {
    let num = |v: f64| Some(fmt_num(v, precision));
    let mut f: Vec<Option<String>> = vec![
        Some(SCHEMA_VERSION.to_string()),
        Some(t.source.label().to_string()),
        Some(t.confidence_floor.to_string()),
        Some(r.k.to_string()),
    ];
    for x in 0..2 {
        for a in 0..2 {
            f.push(r.term_at[x][a].filter(|_| !r.low_confidence[x]).and_then(num));
        }
    }
    for x in 0..2 {
        for a in 0..2 {
            f.push(num(r.term_upto[x][a]));
        }
    }
    for x in 0..2 {
        f.push(num(r.survive[x]));
    }
    for x in 0..2 {
        f.push(Some(u8::from(r.low_confidence[x]).to_string()));
    }
    match r.counts {
        Some(c) => {
            f.extend(c.survivors.iter().map(|s| Some(s.to_string())));
            f.extend(c.absorbed.iter().flatten().map(|s| Some(s.to_string())));
            f.extend(c.cumulative.iter().flatten().map(|s| Some(s.to_string())));
        }
        None => f.extend(std::iter::repeat_n(None, 10)),
    }
    f
}

fn csv_err(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
        _ => Error::Schema(e.to_string()),
    }
}

/// Writes a table in the chosen format.
pub fn write_table<W: Write>(t: &EnsembleTable, format: Format, precision: usize, w: W) -> Result<()> {
    let cols = table_columns();
    match format {
        Format::Csv => {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(&cols).map_err(csv_err)?;
            for r in &t.rows {
                let f = row_fields(t, r, precision);
                out.write_record(f.iter().map(|v| v.as_deref().unwrap_or(""))).map_err(csv_err)?;
            }
            out.flush()?;
        }
        Format::Json => {
            let rows: Vec<Value> = t
                .rows
                .iter()
                .map(|r| {
                    let f = row_fields(t, r, precision);
                    Value::Array(f.into_iter().zip(&cols).map(|(v, c)| json_cell(v, c)).collect())
                })
                .collect();
            let doc = serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "kind": "state_table",
                "source": t.source,
                "horizon": t.horizon,
                "trials_per_hypothesis": t.trials_per_hypothesis,
                "censored_fraction": json_num(t.censored_fraction, precision),
                "confidence_floor": t.confidence_floor,
                "columns": cols,
                "rows": rows,
            });
            let mut w = BufWriter::new(w);
            serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(w)?;
            w.flush()?;
        }
    }
    Ok(())
}

/// A number rounded to the printed precision; JSON then carries its shortest exact form.
fn json_num(v: f64, precision: usize) -> Value {
    let rounded: f64 = fmt_num(v, precision).parse().unwrap_or(v);
    serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
}

fn json_cell(v: Option<String>, col: &str) -> Value {
    match v {
        None => Value::Null,
        Some(s) if col == "source" => Value::String(s),
        Some(s) => s
            .parse::<u64>()
            .map(Value::from)
            .ok()
            .or_else(|| s.parse::<f64>().ok().and_then(serde_json::Number::from_f64).map(Value::Number))
            .unwrap_or(Value::String(s)),
    }
}

/// Reads a table. Rows and counts are taken verbatim, so a damaged file is
/// caught by the conservation check rather than silently repaired.
pub fn read_table<R: Read>(format: Format, r: R) -> Result<EnsembleTable> {
    let cols = table_columns();
    let raw: Vec<Vec<Option<String>>> = match format {
        Format::Csv => {
            let mut rd = csv::Reader::from_reader(r);
            let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(String::from).collect();
            if header != cols {
                return Err(Error::Schema(format!(
                    "header does not match schema version {SCHEMA_VERSION}: {header:?}"
                )));
            }
            rd.records()
                .map(|rec| {
                    let rec = rec.map_err(csv_err)?;
                    Ok(rec.iter().map(|s| (!s.is_empty()).then(|| s.to_string())).collect())
                })
                .collect::<Result<_>>()?
        }
        Format::Json => {
            let doc: Value = serde_json::from_reader(BufReader::new(r)).map_err(|e| Error::Schema(e.to_string()))?;
            let version = doc.get("schema_version").and_then(Value::as_u64);
            if version != Some(SCHEMA_VERSION as u64) {
                return Err(Error::Schema(format!("unsupported schema_version {version:?}")));
            }
            let header: Vec<String> = doc
                .get("columns")
                .and_then(Value::as_array)
                .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
                .unwrap_or_default();
            if header != cols {
                return Err(Error::Schema("columns do not match the schema".into()));
            }
            doc.get("rows")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Schema("missing rows".into()))?
                .iter()
                .map(|row| {
                    let cells = row.as_array().ok_or_else(|| Error::Schema("row is not an array".into()))?;
                    Ok(cells
                        .iter()
                        .map(|v| match v {
                            Value::Null => None,
                            Value::String(s) => Some(s.clone()),
                            other => Some(other.to_string()),
                        })
                        .collect())
                })
                .collect::<Result<_>>()?
        }
    };
    assemble(&cols, raw)
}

fn assemble(cols: &[String], raw: Vec<Vec<Option<String>>>) -> Result<EnsembleTable> {
    if raw.is_empty() {
        return Err(Error::Schema("table has no rows".into()));
    }
    let mut rows = Vec::with_capacity(raw.len());
    let mut source = None;
    let mut floor = 0;
    for (i, f) in raw.iter().enumerate() {
        if f.len() != cols.len() {
            return Err(Error::Schema(format!("row {i} has {} fields, expected {}", f.len(), cols.len())));
        }
        let field = |j: usize| f[j].as_deref();
        let req = |j: usize| field(j).ok_or_else(|| Error::Schema(format!("row {i}: `{}` is empty", cols[j])));
        let num = |j: usize| -> Result<f64> {
            req(j)?
                .parse()
                .map_err(|_| Error::Schema(format!("row {i}: `{}` is not a number", cols[j])))
        };
        let opt_num = |j: usize| -> Result<Option<f64>> { field(j).map(|_| num(j)).transpose() };
        let int = |j: usize| -> Result<Option<u64>> {
            field(j)
                .map(|s| s.parse().map_err(|_| Error::Schema(format!("row {i}: `{}` is not an integer", cols[j]))))
                .transpose()
        };

        if req(0)? != SCHEMA_VERSION.to_string() {
            return Err(Error::Schema(format!("row {i}: schema_version {:?}", field(0))));
        }
        let src = match req(1)? {
            "monte_carlo" => TableSource::MonteCarlo,
            "oracle" => TableSource::Oracle,
            s => return Err(Error::Schema(format!("row {i}: unknown source `{s}`"))),
        };
        if *source.get_or_insert(src) != src {
            return Err(Error::Schema(format!("row {i}: mixed sources")));
        }
        floor = int(2)?.unwrap_or(0);
        let k = int(3)?.ok_or_else(|| Error::Schema(format!("row {i}: missing k")))? as usize;
        if k != i {
            return Err(Error::Schema(format!("row {i} has k = {k}")));
        }

        let mut term_at = [[None; 2]; 2];
        let mut term_upto = [[0.0; 2]; 2];
        for x in 0..2 {
            for a in 0..2 {
                term_at[x][a] = opt_num(4 + 2 * x + a)?;
                term_upto[x][a] = num(8 + 2 * x + a)?;
            }
        }
        let survive = [num(12)?, num(13)?];
        let low_confidence = [int(14)? == Some(1), int(15)? == Some(1)];
        let counts: Vec<Option<u64>> = (16..26).map(int).collect::<Result<_>>()?;
        let counts = if counts.iter().all(Option::is_some) {
            let c: Vec<u64> = counts.into_iter().flatten().collect();
            Some(CountRow {
                survivors: [c[0], c[1]],
                absorbed: [[c[2], c[3]], [c[4], c[5]]],
                cumulative: [[c[6], c[7]], [c[8], c[9]]],
            })
        } else if counts.iter().all(Option::is_none) {
            None
        } else {
            return Err(Error::Schema(format!("row {i}: partial counts")));
        };
        rows.push(StateRow {
            k,
            term_at,
            term_upto,
            survive,
            low_confidence,
            counts,
        });
    }

    // Low-confidence hazards are not written; Monte Carlo ones are recovered from counts.
    for k in 1..rows.len() {
        let (Some(prev), Some(c)) = (rows[k - 1].counts, rows[k].counts) else {
            continue;
        };
        for x in 0..2 {
            if prev.survivors[x] > 0 {
                for a in 0..2 {
                    if rows[k].term_at[x][a].is_none() {
                        rows[k].term_at[x][a] = Some(c.absorbed[x][a] as f64 / prev.survivors[x] as f64);
                    }
                }
            }
        }
    }

    let source = source.unwrap_or(TableSource::MonteCarlo);
    let last = rows.last().expect("non-empty");
    let trials = rows[0].counts.map(|c| c.survivors[0]);
    let censored_fraction = match (trials, last.counts) {
        (Some(n), Some(c)) if n > 0 => (c.survivors[0] + c.survivors[1]) as f64 / (2.0 * n as f64),
        _ => last.survive_pooled(),
    };
    Ok(EnsembleTable {
        source,
        horizon: rows.len() - 1,
        trials_per_hypothesis: if source == TableSource::MonteCarlo { trials } else { None },
        censored_fraction,
        confidence_floor: floor,
        rows,
    })
}

pub fn write_table_file(t: &EnsembleTable, path: &Path, format: Format, precision: usize) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_table(t, format, precision, BufWriter::new(f))
}

/// Reads a table, taking the format from the extension.
pub fn read_table_file(path: &Path) -> Result<EnsembleTable> {
    let format = Format::from_path(path)
        .ok_or_else(|| Error::Schema(format!("{}: cannot tell the format from the extension", path.display())))?;
    let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_table(format, BufReader::new(f))
}

const STATE_LABELS: [&str; 3] = ["u+1", "u-1", "ue"];

pub fn info_columns() -> Vec<String> {
    let mut c: Vec<String> = [
        "schema_version",
        "k",
        "mi",
        "mi_closed_form",
        "mi_increment",
        "markov_residual",
        "kappa_at",
        "kappa_upto",
    ]
    .map(String::from)
    .into();
    for x in X {
        for u in STATE_LABELS {
            c.push(format!("i_{x}_{u}"));
        }
    }
    for x in X {
        for u in STATE_LABELS {
            for p in STATE_LABELS {
                c.push(format!("ci_{x}_{u}_prev_{}", &p[1..]));
            }
        }
    }
    c
}

fn bits_field(b: Option<Bits>, precision: usize) -> Option<String> {
    b.map(|b| {
        if b.0 == f64::NEG_INFINITY {
            "-inf".to_string()
        } else {
            fmt_num(b.0, precision)
        }
    })
}

/// Writes an information curve, one row per k. `−∞` densities are written as `-inf`.
pub fn write_info_curve<W: Write>(c: &InfoCurve, format: Format, precision: usize, w: W) -> Result<()> {
    let cols = info_columns();
    let num = |v: f64| Some(fmt_num(v, precision));
    let rows: Vec<Vec<Option<String>>> = (0..c.mi.len())
        .map(|k| {
            let mut f = vec![
                Some(SCHEMA_VERSION.to_string()),
                Some(k.to_string()),
                num(c.mi[k]),
                num(c.mi_closed_form[k]),
                num(c.mi_increment[k]),
                num(c.markov[k]),
                c.kappa_at[k].and_then(num),
                c.kappa_upto[k].and_then(num),
            ];
            f.extend(c.info_density[k].iter().flatten().map(|b| bits_field(*b, precision)));
            f.extend(c.cond_info_density[k].iter().flatten().flatten().map(|b| bits_field(*b, precision)));
            f
        })
        .collect();
    match format {
        Format::Csv => {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(&cols).map_err(csv_err)?;
            for f in &rows {
                out.write_record(f.iter().map(|v| v.as_deref().unwrap_or(""))).map_err(csv_err)?;
            }
            out.flush()?;
        }
        Format::Json => {
            let rows: Vec<Value> = rows
                .into_iter()
                .map(|f| Value::Array(f.into_iter().zip(&cols).map(|(v, c)| json_cell(v, c)).collect()))
                .collect();
            let doc = serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "kind": "info_curve",
                "horizon": c.horizon,
                "alpha_hat": json_num(c.alpha_hat, precision),
                "mi_final": json_num(c.mi_final, precision),
                "columns": cols,
                "rows": rows,
            });
            let mut w = BufWriter::new(w);
            serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(w)?;
            w.flush()?;
        }
    }
    Ok(())
}

pub fn sweep_columns() -> Vec<String> {
    [
        "schema_version",
        "rho",
        "alpha",
        "horizon",
        "transient",
        "alpha_hat",
        "kappa_median",
        "kappa_flatness",
        "kappa_ideal_gap",
        "linearity_relative",
        "recursion_interior",
        "recursion_absorbing",
        "absorbing_reduction",
        "markov_max",
        "survival_at_horizon",
        "mass_residual",
        "tail_error_bound",
        "mean_time",
        "wald_mean_time",
    ]
    .map(String::from)
    .into()
}

/// Writes one row per sweep point.
pub fn write_sweep_points<W: Write>(points: &[SweepPoint], format: Format, precision: usize, w: W) -> Result<()> {
    let cols = sweep_columns();
    let num = |v: f64| Some(fmt_num(v, precision));
    let rows: Vec<Vec<Option<String>>> = points
        .iter()
        .map(|p| {
            vec![
                Some(SCHEMA_VERSION.to_string()),
                num(p.rho),
                num(p.alpha),
                Some(p.horizon.to_string()),
                Some(p.transient.to_string()),
                num(p.alpha_hat),
                p.kappa_median.and_then(num),
                p.kappa_flatness.and_then(num),
                p.kappa_ideal_gap.and_then(num),
                num(p.linearity_relative),
                num(p.recursion_interior),
                num(p.recursion_absorbing),
                num(p.absorbing_reduction),
                num(p.markov_max),
                num(p.survival_at_horizon),
                num(p.mass_residual),
                p.tail_error_bound.and_then(num),
                num(p.mean_time),
                num(p.wald_mean_time),
            ]
        })
        .collect();
    match format {
        Format::Csv => {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(&cols).map_err(csv_err)?;
            for f in &rows {
                out.write_record(f.iter().map(|v| v.as_deref().unwrap_or(""))).map_err(csv_err)?;
            }
            out.flush()?;
        }
        Format::Json => {
            let rows: Vec<Value> = rows
                .into_iter()
                .map(|f| Value::Array(f.into_iter().zip(&cols).map(|(v, c)| json_cell(v, c)).collect()))
                .collect();
            let doc = serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "kind": "sweep",
                "columns": cols,
                "rows": rows,
            });
            let mut w = BufWriter::new(w);
            serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(w)?;
            w.flush()?;
        }
    }
    Ok(())
}

/// Sidecar describing one run. Wall-clock data lives only in `timings`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub master_seed: Option<u64>,
    /// The effective configuration, as a JSON object.
    pub config: Value,
    pub outputs: Vec<String>,
    /// Named numerical residuals (mass conservation, grid refinement, ...).
    pub residuals: serde_json::Map<String, Value>,
    pub warnings: Vec<String>,
    pub timings: Timings,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    /// Seconds since the Unix epoch at start.
    pub started_unix: f64,
    pub elapsed_seconds: f64,
}

impl Metadata {
    pub fn new(command: &str, config: Value) -> Self {
        Metadata {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            master_seed: None,
            config,
            outputs: Vec::new(),
            residuals: serde_json::Map::new(),
            warnings: Vec::new(),
            timings: Timings::default(),
        }
    }

    pub fn residual(&mut self, name: &str, v: impl Serialize) {
        self.residuals
            .insert(name.into(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::run_ensemble;
    use crate::model::TestConfig;
    use crate::oracle::{oracle_tables, propagate};
    use crate::table::check_conservation;

    fn mc() -> EnsembleTable {
        run_ensemble(&TestConfig::reference().with_max_steps(120).unwrap(), 500, 3).unwrap()
    }

    fn round_trip(t: &EnsembleTable, f: Format, precision: usize) -> EnsembleTable {
        let mut buf = Vec::new();
        write_table(t, f, precision, &mut buf).unwrap();
        read_table(f, buf.as_slice()).unwrap()
    }

    #[test]
    fn monte_carlo_tables_round_trip_exactly() {
        let t = mc();
        for f in [Format::Csv, Format::Json] {
            let back = round_trip(&t, f, DEFAULT_PRECISION);
            assert_eq!(back, t, "{f}");
        }
    }

    #[test]
    fn oracle_tables_round_trip_on_confident_cells() {
        let t = oracle_tables(&propagate(&TestConfig::reference(), 80, 256).unwrap());
        for f in [Format::Csv, Format::Json] {
            let back = round_trip(&t, f, DEFAULT_PRECISION);
            assert_eq!(back.source, TableSource::Oracle);
            for (a, b) in t.rows.iter().zip(&back.rows) {
                assert_eq!(a.term_upto, b.term_upto);
                assert_eq!(a.survive, b.survive);
                for x in 0..2 {
                    if a.low_confidence[x] {
                        assert_eq!(b.term_at[x], [None, None]);
                    } else {
                        assert_eq!(a.term_at[x], b.term_at[x]);
                    }
                }
            }
        }
    }

    #[test]
    fn low_confidence_cells_are_empty_not_zero() {
        let t = mc();
        let mut buf = Vec::new();
        write_table(&t, Format::Csv, 6, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row0 = text.lines().nth(1).unwrap();
        assert!(row0.starts_with("1,monte_carlo,100,0,,,,,"), "{row0}");
    }

    #[test]
    fn precision_is_honoured() {
        assert_eq!(fmt_num(0.1, 3), "1.000e-1");
        assert_eq!(fmt_num(-0.0, 2), "0.00e0");
        let t = mc();
        let back = round_trip(&t, Format::Csv, 4);
        for (a, b) in t.rows.iter().zip(&back.rows) {
            assert!((a.term_upto[0][0] - b.term_upto[0][0]).abs() <= 5e-5 * a.term_upto[0][0].abs().max(1e-300));
        }
    }

    #[test]
    fn tampered_file_fails_conservation() {
        let t = mc();
        let mut buf = Vec::new();
        write_table(&t, Format::Csv, DEFAULT_PRECISION, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut f: Vec<String> = lines[20].split(',').map(String::from).collect();
        let n: u64 = f[16].parse().unwrap();
        f[16] = (n + 1).to_string();
        lines[20] = f.join(",");
        let back = read_table(Format::Csv, lines.join("\n").as_bytes()).unwrap();
        assert!(!check_conservation(&back).passed());
    }

    #[test]
    fn schema_mismatch_is_reported() {
        let bad = "k,p\n0,1\n";
        assert!(matches!(read_table(Format::Csv, bad.as_bytes()), Err(Error::Schema(_))));
        assert!(matches!(read_table(Format::Json, "{}".as_bytes()), Err(Error::Schema(_))));
        assert!("yaml".parse::<Format>().is_err());
    }

    #[test]
    fn info_curve_writes_sentinels() {
        let t = mc();
        let c = crate::info::info_curve(&t).unwrap();
        let mut buf = Vec::new();
        write_info_curve(&c, Format::Csv, 8, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), t.rows.len() + 1);
        assert_eq!(text.lines().next().unwrap().split(',').count(), info_columns().len());
        let mut buf = Vec::new();
        write_info_curve(&c, Format::Json, 8, &mut buf).unwrap();
        let v: Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["kind"], "info_curve");
    }
}
