//! CSV tables with provenance lines, grid-function files and atomic output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use smoothinglab_core::fixpoint::{GridFunction, LowerTail};

use crate::LabError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where every number in a report came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub module: String,
    pub op: String,
    pub seed: u64,
}

impl Provenance {
    pub fn line(&self) -> String {
        format!(
            "# smoothinglab {VERSION} config={} module={} op={} seed={}",
            self.config_hash, self.module, self.op, self.seed
        )
    }
}

/// Shortest round-trip rendering of a float.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        let row: Vec<String> = row.into_iter().collect();
        debug_assert_eq!(row.len(), self.header.len(), "row width in table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self, prov: &Provenance) -> Result<Vec<u8>, LabError> {
        let mut out = Vec::new();
        writeln!(out, "{}", prov.line())?;
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.header)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        Ok(out)
    }
}

/// Everything a subcommand produces.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    /// Extra files (name, bytes), e.g. grid functions as JSON.
    pub files: Vec<(String, Vec<u8>)>,
    /// Outcome of acceptance checks, for `verify` bundles.
    pub passed: Option<bool>,
    /// Human-readable lines for stderr.
    pub notes: Vec<String>,
}

impl Report {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// Writes all outputs of `report` into `dir`. Files are staged as temporary
/// files in `dir` and renamed only after every file was written.
pub fn write_all(dir: &Path, report: &Report, prov: &Provenance) -> Result<Vec<PathBuf>, LabError> {
    let mut blobs: Vec<(String, Vec<u8>)> = Vec::new();
    for t in &report.tables {
        blobs.push((format!("{}.csv", t.name), t.to_csv(prov)?));
    }
    blobs.extend(report.files.iter().cloned());
    fs::create_dir_all(dir)?;
    let mut staged = Vec::with_capacity(blobs.len());
    for (name, bytes) in &blobs {
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(bytes)?;
        tmp.flush()?;
        staged.push((tmp, dir.join(name)));
    }
    let mut paths = Vec::with_capacity(staged.len());
    for (tmp, path) in staged {
        tmp.persist(&path).map_err(|e| LabError::Io(e.error))?;
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LowerSpec {
    One,
    Hold,
    SelfSimilar { alpha: f64, period: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFunctionFile {
    ts: Vec<f64>,
    values: Vec<f64>,
    #[serde(default)]
    stderr: Option<Vec<f64>>,
    lower: LowerSpec,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    provenance: String,
}

fn lower_spec(l: LowerTail) -> LowerSpec {
    match l {
        LowerTail::One => LowerSpec::One,
        LowerTail::Hold => LowerSpec::Hold,
        LowerTail::SelfSimilar { alpha, period } => LowerSpec::SelfSimilar { alpha, period },
    }
}

fn lower_tail(l: LowerSpec) -> LowerTail {
    match l {
        LowerSpec::One => LowerTail::One,
        LowerSpec::Hold => LowerTail::Hold,
        LowerSpec::SelfSimilar { alpha, period } => LowerTail::SelfSimilar { alpha, period },
    }
}

pub fn grid_function_json(f: &GridFunction) -> Result<Vec<u8>, LabError> {
    let file = GridFunctionFile {
        ts: f.ts().to_vec(),
        values: f.values().to_vec(),
        stderr: f.stderr().map(|s| s.to_vec()),
        lower: lower_spec(f.lower()),
        alpha: f.alpha,
        provenance: f.provenance.clone(),
    };
    let mut v = serde_json::to_vec_pretty(&file)?;
    v.push(b'\n');
    Ok(v)
}

/// Table `t, value, stderr` of a grid function.
pub fn grid_function_table(name: &str, f: &GridFunction) -> Table {
    let mut t = Table::new(name, &["t", "value", "stderr"]);
    for (i, (&x, &v)) in f.ts().iter().zip(f.values()).enumerate() {
        let se = f.stderr().map(|s| s[i]).unwrap_or(0.0);
        t.push([num(x), num(v), num(se)]);
    }
    t
}

/// Reads a grid function from JSON (`.json`) or CSV (`t,value[,stderr]`,
/// `#` lines ignored). CSV input gets the lower tail `One`.
pub fn read_grid_function(path: &Path) -> Result<GridFunction, LabError> {
    let bytes = fs::read(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
    let bad = |e: String| LabError::Config(format!("{}: {e}", path.display()));
    if path.extension().is_some_and(|e| e == "json") {
        let f: GridFunctionFile = serde_json::from_slice(&bytes).map_err(|e| bad(e.to_string()))?;
        let mut g = GridFunction::new(f.ts, f.values, lower_tail(f.lower))?.with_provenance(f.provenance);
        if let Some(se) = f.stderr {
            g = g.with_stderr(se)?;
        }
        if let Some(a) = f.alpha {
            g = g.with_alpha(a);
        }
        return Ok(g);
    }
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(bytes.as_slice());
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |n: &str| header.iter().position(|h| h == n);
    let (ti, vi) = match (col("t"), col("value")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(bad("CSV needs columns t and value".into())),
    };
    let si = col("stderr");
    let (mut ts, mut vs, mut ses) = (Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let parse = |i: usize| -> Result<f64, LabError> {
            rec.get(i).unwrap_or("").trim().parse::<f64>().map_err(|e| bad(format!("bad number: {e}")))
        };
        ts.push(parse(ti)?);
        vs.push(parse(vi)?);
        if let Some(i) = si {
            ses.push(parse(i)?);
        }
    }
    let mut g = GridFunction::new(ts, vs, LowerTail::One)?;
    if si.is_some() && ses.iter().any(|&s| s > 0.0) {
        g = g.with_stderr(ses)?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov() -> Provenance {
        Provenance { config_hash: "ab".into(), module: "m".into(), op: "o".into(), seed: 3 }
    }

    #[test]
    fn csv_has_provenance_and_header() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push([num(0.1), num(2.0)]);
        let s = String::from_utf8(t.to_csv(&prov()).unwrap()).unwrap();
        assert_eq!(s, format!("# smoothinglab {VERSION} config=ab module=m op=o seed=3\na,b\n0.1,2\n"));
    }

    #[test]
    fn grid_functions_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = GridFunction::from_fn(vec![0.5, 1.0, 2.0], |t| (-t).exp(), LowerTail::SelfSimilar { alpha: 1.0, period: 1.0 })
            .unwrap()
            .with_stderr(vec![0.0, 0.1, 0.2])
            .unwrap()
            .with_alpha(1.0);
        let jp = dir.path().join("f.json");
        fs::write(&jp, grid_function_json(&f).unwrap()).unwrap();
        assert_eq!(read_grid_function(&jp).unwrap(), f);
        let cp = dir.path().join("f.csv");
        fs::write(&cp, grid_function_table("f", &f).to_csv(&prov()).unwrap()).unwrap();
        let g = read_grid_function(&cp).unwrap();
        assert_eq!(g.values(), f.values());
        assert_eq!(g.stderr(), f.stderr());
    }

    #[test]
    fn outputs_land_together() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = Report::default();
        r.tables.push(Table::new("one", &["a"]));
        r.files.push(("two.json".into(), b"{}".to_vec()));
        let paths = write_all(&dir.path().join("out"), &r, &prov()).unwrap();
        assert_eq!(paths.len(), 2);
        let names: Vec<_> = fs::read_dir(dir.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 2);
    }
}
