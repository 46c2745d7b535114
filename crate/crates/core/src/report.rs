//! Structured key-value reports and CSV side files.
//!
//! A report is a TOML document with a `format` tag, the resolved run
//! configuration and one table per result block. CSV files start with `#`
//! comment lines naming the columns, then a header row. Floats are written
//! in shortest round-trip form so equal runs give equal bytes.

use std::path::Path;

use crate::bounds::{AsympRow, BoundReport, BoundedCell};
use crate::counting::{CountResult, Hit};
use crate::covering::CoverageResult;
use crate::error::{Error, Result};
use crate::exponents::ApproxRecord;
use crate::sieve::SieveCheck;

pub const REPORT_FORMAT: &str = "affinelab-report/1";
pub const CSV_FORMAT: &str = "affinelab-csv/1";

/// Keys excluded when comparing reports for determinism.
pub const VOLATILE_KEYS: [&str; 2] = ["elapsed", "timestamp"];

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    table: toml::Table,
}

impl Report {
    pub fn new(command: &str) -> Self {
        let mut table = toml::Table::new();
        table.insert("format".into(), REPORT_FORMAT.into());
        table.insert("command".into(), command.into());
        Report { table }
    }

    pub fn set(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.table.insert(key.into(), value.into());
    }

    /// Named block, created on first use.
    pub fn section(&mut self, name: &str) -> &mut toml::Table {
        let v = self.table.entry(name.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        match v {
            toml::Value::Table(t) => t,
            _ => panic!("report key {name} is not a table"),
        }
    }

    /// Serialize any value into a block.
    pub fn embed<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let v = toml::Value::try_from(value).map_err(|e| Error::InvalidArgument(format!("report block {name}: {e}")))?;
        self.table.insert(name.into(), v);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&toml::Value> {
        self.table.get(key)
    }

    pub fn render(&self) -> String {
        toml::to_string(&self.table).expect("report tables serialize")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::Parse { pos: 0, msg: format!("report: {e}") })?;
        match table.get("format").and_then(|v| v.as_str()) {
            Some(REPORT_FORMAT) => Ok(Report { table }),
            other => Err(Error::Parse { pos: 0, msg: format!("unsupported report format {other:?}") }),
        }
    }

    /// The report with every volatile key removed, at any depth.
    pub fn stable(&self) -> Report {
        fn strip(t: &mut toml::Table) {
            for k in VOLATILE_KEYS {
                t.remove(k);
            }
            for (_, v) in t.iter_mut() {
                if let toml::Value::Table(inner) = v {
                    strip(inner);
                }
            }
        }
        let mut table = self.table.clone();
        strip(&mut table);
        Report { table }
    }
}

/// Shortest round-trip text of a float; `inf`, `-inf` and `nan` spelled out.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

/// A CSV table with comment lines above the header.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(title: &str, header: &[&str]) -> Self {
        CsvTable {
            comments: vec![format!("{CSV_FORMAT} {title}"), format!("columns: {}", header.join(", "))],
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(mut self, line: impl Into<String>) -> Self {
        self.comments.push(line.into());
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Header and rows only.
    pub fn body(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory csv");
        for r in &self.rows {
            w.write_record(r).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&self.body());
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    /// Parse text produced by [`CsvTable::render`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut comments = Vec::new();
        let mut rest = text;
        while let Some(line) = rest.strip_prefix("# ") {
            let (c, tail) = line.split_once('\n').unwrap_or((line, ""));
            comments.push(c.to_string());
            rest = tail;
        }
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(rest.as_bytes());
        let header = r.headers().map_err(|e| Error::Parse { pos: 0, msg: format!("csv: {e}") })?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec.map_err(|e| Error::Parse { pos: 0, msg: format!("csv: {e}") })?.iter().map(String::from).collect());
        }
        Ok(CsvTable { comments, header, rows })
    }
}

/// `(q, a_1..a_d, residual_1..residual_m)` for `N`; `(a_0..a_d, residuals)`
/// for `N'`.
pub fn hits_csv(hits: &[Hit], d: usize, m: usize, with_q: bool) -> CsvTable {
    let mut header: Vec<String> = Vec::new();
    if with_q {
        header.push("q".into());
        header.extend((1..=d).map(|i| format!("a_{i}")));
    } else {
        header.extend((0..=d).map(|i| format!("a_{i}")));
    }
    header.extend((1..=m).map(|j| format!("residual_{j}")));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = CsvTable::new("hits", &refs);
    for h in hits {
        let mut row: Vec<String> = h.coords.iter().map(|c| c.to_string()).collect();
        row.extend(h.residual.iter().map(|&r| fmt_f64(r)));
        t.push(row);
    }
    t
}

/// Counts keyed by a caller-chosen label (instance number, cell name).
pub fn counts_csv(rows: &[(String, CountResult)]) -> CsvTable {
    let mut t = CsvTable::new("counts", &["label", "count_certain", "count_ambiguous"]);
    for (label, c) in rows {
        t.push(vec![label.clone(), c.count_certain.to_string(), c.count_ambiguous.to_string()]);
    }
    t
}

/// Best approximation records with log-log coordinates.
pub fn records_csv(records: &[ApproxRecord]) -> CsvTable {
    let mut t = CsvTable::new("records", &["norm_q", "q", "err", "err_lo", "err_hi", "exact_zero", "log_q", "neg_log_err"])
        .comment("q is space separated; neg_log_err is -ln(err), inf for exact zeros");
    for r in records {
        let q: Vec<String> = r.q.iter().map(|v| v.to_string()).collect();
        t.push(vec![
            r.norm_q.to_string(),
            q.join(" "),
            fmt_f64(r.err),
            fmt_f64(r.err_lo),
            fmt_f64(r.err_hi),
            r.exact_zero.to_string(),
            fmt_f64((r.norm_q as f64).ln()),
            fmt_f64(-r.err.ln()),
        ]);
    }
    t
}

pub fn bounds_csv(reports: &[BoundReport]) -> CsvTable {
    let kind = reports.first().map(|r| r.kind.as_str()).unwrap_or("none");
    let mut t = CsvTable::new("bounds", &["Q", "delta", "measured_lo", "measured_hi", "bound", "ratio", "pass", "applicable"])
        .comment(format!("kind: {kind}; ratio = measured_hi / bound"));
    for r in reports {
        t.push(vec![
            r.q.to_string(),
            r.delta.text().to_string(),
            r.measured_lo().to_string(),
            r.measured_hi().to_string(),
            fmt_f64(r.bound),
            fmt_f64(r.ratio),
            r.pass.as_str().into(),
            r.applicable.to_string(),
        ]);
    }
    t
}

pub fn bounded_csv(cells: &[BoundedCell]) -> CsvTable {
    let mut t = CsvTable::new("bounded-regime", &["Q", "delta", "measured_hi", "exact", "limit", "pass"]);
    for c in cells {
        t.push(vec![
            c.q.to_string(),
            c.delta.text().to_string(),
            c.measured_hi.to_string(),
            c.exact.to_string(),
            fmt_f64(c.limit),
            c.pass.as_str().into(),
        ]);
    }
    t
}

pub fn asymp_csv(rows: &[AsympRow]) -> CsvTable {
    let mut t = CsvTable::new("asymptotic-ratio", &["Q", "delta", "measured_lo", "measured_hi", "ratio", "degenerate"])
        .comment("ratio = measured_hi / (delta^m Q^(d+1))");
    for r in rows {
        t.push(vec![
            r.q.to_string(),
            r.delta.text().to_string(),
            r.measured.count_certain.to_string(),
            r.measured.upper().to_string(),
            fmt_f64(r.ratio),
            r.degenerate.to_string(),
        ]);
    }
    t
}

pub fn sieve_csv(rows: &[(u64, SieveCheck)]) -> CsvTable {
    let mut t = CsvTable::new("sieve", &["instance", "lhs", "lhs_hi", "rhs", "rhs_lo", "ratio", "verdict"]);
    for (i, c) in rows {
        t.push(vec![
            i.to_string(),
            fmt_f64(c.lhs),
            fmt_f64(c.lhs_hi),
            fmt_f64(c.rhs),
            fmt_f64(c.rhs_lo),
            fmt_f64(c.ratio()),
            c.holds.as_str().into(),
        ]);
    }
    t
}

pub fn coverage_csv(rows: &[(u64, CoverageResult)]) -> CsvTable {
    let mut t =
        CsvTable::new("coverage", &["Q", "fraction", "std_err", "ball_count", "radius", "samples", "covered", "ambiguous", "empty"]);
    for (q, c) in rows {
        t.push(vec![
            q.to_string(),
            fmt_f64(c.fraction),
            c.std_err.map(fmt_f64).unwrap_or_default(),
            c.ball_count.to_string(),
            fmt_f64(c.radius),
            c.samples.to_string(),
            c.covered.to_string(),
            c.ambiguous.to_string(),
            c.empty.to_string(),
        ]);
    }
    t
}
