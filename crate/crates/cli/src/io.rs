//! CSV loading and table output.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use eor_core::{Candidate, CandidatePool};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Decimal rendering with at most 10 significant digits and no trailing
/// zeros.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.9e}").parse().expect("float formatting round-trips");
    let exp = rounded.abs().log10().floor() as i32;
    let decimals = (9 - exp).max(0) as usize;
    let mut s = format!("{rounded:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// `x` rounded the same way [`fmt_num`] prints it.
pub fn round_num(x: f64) -> f64 {
    fmt_num(x).parse().unwrap_or(x)
}

fn json_num(x: f64) -> Value {
    serde_json::Number::from_f64(round_num(x)).map_or(Value::Null, Value::Number)
}

/// Column-safe versions of the group names: characters outside
/// `[A-Za-z0-9_]` become `_`, and collisions get a numeric suffix.
pub fn sanitize_names(names: &[String]) -> Vec<String> {
    let mut used = HashSet::new();
    names
        .iter()
        .map(|name| {
            let mut base: String = name
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
                .collect();
            if base.is_empty() {
                base.push('_');
            }
            let mut candidate = base.clone();
            let mut suffix = 2;
            while !used.insert(candidate.clone()) {
                candidate = format!("{base}_{suffix}");
                suffix += 1;
            }
            candidate
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Text(String),
    Num(f64),
    Flag(bool),
    Missing,
}

impl Cell {
    fn to_csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Num(x) => fmt_num(*x),
            Cell::Flag(b) => b.to_string(),
            Cell::Missing => String::new(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Num(x) => json_num(*x),
            Cell::Flag(b) => Value::from(*b),
            Cell::Missing => Value::Null,
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Num)
    }
}

/// Rows with named columns; CSV renders one line per row, JSON an array
/// of objects with the same keys.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Table {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .headers
                        .iter()
                        .cloned()
                        .zip(row.iter().map(Cell::to_json))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }

    pub fn to_csv(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Input(format!("cannot encode CSV: {e}"));
        w.write_record(&self.headers).map_err(fail)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_csv)).map_err(fail)?;
        }
        w.into_inner()
            .map_err(|e| CliError::Input(format!("cannot encode CSV: {e}")))
    }

    pub fn render(&self, format: Format) -> CliResult<Vec<u8>> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => json_bytes(&self.to_json()),
        }
    }
}

pub fn json_bytes(value: &Value) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Input(format!("cannot encode JSON: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes to `out`, or standard output when absent.
pub fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| CliError::io(format!("cannot write {}", path.display()), e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io("cannot write to standard output", e))
        }
    }
}

/// Column positions of a CSV header, matched case-insensitively.
struct Columns {
    index: HashMap<String, usize>,
}

impl Columns {
    fn new(headers: &csv::StringRecord) -> Self {
        let index = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_ascii_lowercase(), i))
            .collect();
        Columns { index }
    }

    fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    fn require(&self, name: &str, path: &Path) -> CliResult<usize> {
        self.get(name).ok_or_else(|| {
            CliError::Input(format!("{}: line 1: missing column '{name}'", path.display()))
        })
    }

    fn first_of(&self, names: &[&str], path: &Path) -> CliResult<usize> {
        names.iter().find_map(|n| self.get(n)).ok_or_else(|| {
            CliError::Input(format!(
                "{}: line 1: missing column '{}'",
                path.display(),
                names[0]
            ))
        })
    }
}

fn open_csv(path: &Path) -> CliResult<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(format!("cannot read {}", path.display()), io),
            other => CliError::Input(format!("{}: {other:?}", path.display())),
        })
}

fn record_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    CliError::Input(format!("{}: line {line}: {e}", path.display()))
}

/// Probability, group and optional label of one CSV row.
struct RowFields {
    id: String,
    group: String,
    prob: f64,
    label: Option<bool>,
}

fn row_fields(
    record: &csv::StringRecord,
    cols: (usize, usize, usize, Option<usize>),
    path: &Path,
    line: u64,
) -> CliResult<RowFields> {
    let (id_c, group_c, prob_c, label_c) = cols;
    let bad = |msg: String| CliError::Input(format!("{}: line {line}: {msg}", path.display()));
    let field = |c: usize, name: &str| -> CliResult<&str> {
        record.get(c).ok_or_else(|| bad(format!("missing field '{name}'")))
    };
    let id = field(id_c, "id")?;
    if id.is_empty() {
        return Err(bad("empty id".into()));
    }
    let group = field(group_c, "group")?;
    if group.is_empty() {
        return Err(bad("empty group".into()));
    }
    let raw = field(prob_c, "prob")?;
    let prob: f64 = raw.parse().map_err(|_| bad(format!("prob {raw:?} is not a number")))?;
    if !(0.0..=1.0).contains(&prob) {
        return Err(bad(format!("prob {raw} is outside [0, 1]")));
    }
    let label = match label_c.map(|c| record.get(c).unwrap_or("")) {
        None | Some("") => None,
        Some("1") => Some(true),
        Some("0") => Some(false),
        Some(other) => return Err(bad(format!("label {other:?} is not 0 or 1"))),
    };
    Ok(RowFields {
        id: id.to_string(),
        group: group.to_string(),
        prob,
        label,
    })
}

/// Maps group names to indices in order of first appearance.
#[derive(Debug, Default)]
struct GroupNames {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl GroupNames {
    fn intern(&mut self, name: &str) -> usize {
        if let Some(&g) = self.index.get(name) {
            return g;
        }
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }
}

fn check_labels(rows: &[(u64, Option<bool>)], path: &Path) -> CliResult<()> {
    let labeled = rows.iter().filter(|(_, l)| l.is_some()).count();
    if labeled != 0 && labeled != rows.len() {
        let (line, _) = rows.iter().find(|(_, l)| l.is_none()).expect("some row is unlabeled");
        return Err(CliError::Input(format!(
            "{}: line {line}: labels must be given for every row or for none",
            path.display()
        )));
    }
    Ok(())
}

/// Reads a pool file with header `id,group,prob[,label]`.
pub fn load_pool(path: &Path) -> CliResult<CandidatePool> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers().map_err(|e| record_error(path, e))?.clone();
    let cols = Columns::new(&headers);
    let layout = (
        cols.require("id", path)?,
        cols.require("group", path)?,
        cols.require("prob", path)?,
        cols.get("label"),
    );
    let mut groups = GroupNames::default();
    let mut seen = HashSet::new();
    let mut candidates = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| record_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = row_fields(&record, layout, path, line)?;
        if !seen.insert(row.id.clone()) {
            return Err(CliError::Input(format!(
                "{}: line {line}: duplicate id {:?}",
                path.display(),
                row.id
            )));
        }
        let mut c = Candidate::new(row.id, groups.intern(&row.group), row.prob);
        if let Some(l) = row.label {
            c = c.with_label(l);
        }
        labels.push((line, row.label));
        candidates.push(c);
    }
    if candidates.is_empty() {
        return Err(CliError::Input(format!("{}: no candidates", path.display())));
    }
    check_labels(&labels, path)?;
    Ok(CandidatePool::new(candidates, groups.names)?)
}

/// One query of a logged-ranking file: the pool in logged order, so the
/// logged ranking is the identity.
#[derive(Debug)]
pub struct LoggedQuery {
    pub query_id: String,
    pub pool: CandidatePool,
}

/// Reads logged rankings with header `query_id,position,id,group,prob`
/// (`rank` is accepted for `position`; without `query_id` the whole file
/// is one query). Group indices are shared by all queries: `groups` first,
/// then any other name in order of first appearance.
pub fn load_logged(path: &Path, groups: &[String]) -> CliResult<Vec<LoggedQuery>> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers().map_err(|e| record_error(path, e))?.clone();
    let cols = Columns::new(&headers);
    let query_c = cols.get("query_id");
    let pos_c = cols.first_of(&["position", "rank"], path)?;
    let layout = (
        cols.require("id", path)?,
        cols.require("group", path)?,
        cols.require("prob", path)?,
        cols.get("label"),
    );

    struct Row {
        line: u64,
        position: i64,
        fields: RowFields,
    }
    let mut order: Vec<String> = Vec::new();
    let mut queries: HashMap<String, Vec<Row>> = HashMap::new();
    let mut names = GroupNames::default();
    for g in groups {
        names.intern(g);
    }
    let mut groups = names;
    for record in rdr.records() {
        let record = record.map_err(|e| record_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let fields = row_fields(&record, layout, path, line)?;
        groups.intern(&fields.group);
        let raw = record.get(pos_c).unwrap_or("");
        let position: i64 = raw.parse().map_err(|_| {
            CliError::Input(format!("{}: line {line}: position {raw:?} is not an integer", path.display()))
        })?;
        let qid = query_c.and_then(|c| record.get(c)).unwrap_or("").to_string();
        if !queries.contains_key(&qid) {
            order.push(qid.clone());
        }
        queries.entry(qid).or_default().push(Row { line, position, fields });
    }
    if order.is_empty() {
        return Err(CliError::Input(format!("{}: no rows", path.display())));
    }

    let mut out = Vec::with_capacity(order.len());
    for qid in order {
        let mut rows = queries.remove(&qid).expect("query was recorded");
        rows.sort_by_key(|r| r.position);
        for pair in rows.windows(2) {
            if pair[0].position == pair[1].position {
                return Err(CliError::Input(format!(
                    "{}: line {}: duplicate position {} in query {qid:?}",
                    path.display(),
                    pair[1].line.max(pair[0].line),
                    pair[1].position
                )));
            }
        }
        let labels: Vec<(u64, Option<bool>)> = rows.iter().map(|r| (r.line, r.fields.label)).collect();
        check_labels(&labels, path)?;
        let mut seen = HashSet::new();
        let mut candidates = Vec::with_capacity(rows.len());
        for r in rows {
            if !seen.insert(r.fields.id.clone()) {
                return Err(CliError::Input(format!(
                    "{}: line {}: duplicate id {:?} in query {qid:?}",
                    path.display(),
                    r.line,
                    r.fields.id
                )));
            }
            let mut c = Candidate::new(r.fields.id, groups.index[&r.fields.group], r.fields.prob);
            if let Some(l) = r.fields.label {
                c = c.with_label(l);
            }
            candidates.push(c);
        }
        let pool = CandidatePool::new(candidates, groups.names.clone())?;
        out.push(LoggedQuery { query_id: qid, pool });
    }
    Ok(out)
}
