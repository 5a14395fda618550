//! CSV ingestion and output formats.
//!
//! Every reader reports malformed input as [`Error::Parse`] with the file and
//! 1-based line number. Writers use Rust's shortest round-trip float
//! formatting, so identical values always produce identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::encode::{feature_names, parse_angle, CurrentNode, CurrentProfile, WaveSpec, DEFAULT_SPECTRAL_WIDTH};
use crate::error::{Error, Result};
use crate::learner::IterationRecord;
use crate::metrics::{AggregateRow, ComparisonRow};
use crate::oracle::{LabeledTable, Target, TargetVector, TARGET_COUNT};
use crate::pool::{LoadingCase, Pool};
use crate::CaseId;

pub const CURRENT_COLUMNS: [&str; 4] = ["case_id", "depth_m", "speed_ms", "angle_deg"];
pub const WAVE_COLUMNS: [&str; 7] = [
    "case_id",
    "height_m",
    "period_s",
    "azimuth_deg",
    "alpha",
    "gamma",
    "sigma",
];
pub const RUN_COLUMNS: [&str; 6] = ["n", "target", "eps_rms", "eps_max", "sigma_rms", "sigma_max"];
pub const AGGREGATE_COLUMNS: [&str; 6] = ["n", "target", "metric", "mean", "ci_lo", "ci_hi"];
pub const COMPARISON_COLUMNS: [&str; 5] = ["n", "target", "mean_diff", "ci_lo", "ci_hi"];

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Header-indexed view over one CSV file.
struct Table {
    path: PathBuf,
    columns: Vec<String>,
    records: Vec<csv::StringRecord>,
}

struct Row<'a> {
    table: &'a Table,
    record: &'a csv::StringRecord,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| csv_err(path, e))?;
        let columns: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_err(path, e))?
            .iter()
            .map(str::to_owned)
            .collect();
        if columns.iter().all(|c| c.is_empty()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: "empty file".into(),
            });
        }
        let records = rdr
            .records()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| csv_err(path, e))?;
        Ok(Table {
            path: path.to_path_buf(),
            columns,
            records,
        })
    }

    fn require(&self, names: &[&str]) -> Result<()> {
        match names.iter().find(|n| !self.columns.iter().any(|c| c == *n)) {
            Some(missing) => Err(Error::Parse {
                path: self.path.clone(),
                line: 1,
                msg: format!("missing column {missing:?}"),
            }),
            None => Ok(()),
        }
    }

    fn require_rows(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::Parse {
                path: self.path.clone(),
                line: 2,
                msg: "no data rows".into(),
            });
        }
        Ok(())
    }

    fn rows(&self) -> impl Iterator<Item = Row<'_>> {
        self.records.iter().map(move |record| Row { table: self, record })
    }
}

impl Row<'_> {
    fn line(&self) -> u64 {
        self.record.position().map_or(0, |p| p.line())
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.table.path.clone(),
            line: self.line(),
            msg: msg.into(),
        }
    }

    fn opt(&self, name: &str) -> Option<&str> {
        let i = self.table.columns.iter().position(|c| c == name)?;
        self.record.get(i).filter(|s| !s.is_empty())
    }

    fn str(&self, name: &str) -> Result<&str> {
        self.opt(name).ok_or_else(|| self.err(format!("missing value for {name}")))
    }

    fn f64(&self, name: &str) -> Result<f64> {
        let s = self.str(name)?;
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(format!("{name}: not a finite number: {s:?}")))
    }

    fn case_id(&self) -> Result<CaseId> {
        let s = self.str("case_id")?;
        s.parse::<u32>()
            .map(CaseId)
            .map_err(|_| self.err(format!("case_id: not a non-negative integer: {s:?}")))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("{other:?}"),
        },
    }
}

fn node(row: &Row<'_>) -> Result<CurrentNode> {
    let angle = parse_angle(row.str("angle_deg")?).map_err(|e| row.err(e.to_string()))?;
    Ok(CurrentNode {
        depth: row.f64("depth_m")?,
        speed: row.f64("speed_ms")?,
        angle,
    })
}

fn profile(path: &Path, id: CaseId, nodes: Vec<CurrentNode>) -> Result<CurrentProfile> {
    CurrentProfile::new(nodes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: format!("current {id}: {e}"),
    })
}

/// Long-format currents: one row per `(case_id, depth)`, nodes in file order.
pub fn read_currents(path: &Path) -> Result<BTreeMap<CaseId, CurrentProfile>> {
    let t = Table::read(path)?;
    t.require(&CURRENT_COLUMNS)?;
    t.require_rows()?;
    let mut nodes: BTreeMap<CaseId, Vec<CurrentNode>> = BTreeMap::new();
    for row in t.rows() {
        nodes.entry(row.case_id()?).or_default().push(node(&row)?);
    }
    nodes
        .into_iter()
        .map(|(id, n)| Ok((id, profile(path, id, n)?)))
        .collect()
}

/// A directory of `<case_id>.csv` files, each with `depth_m,speed_ms,angle_deg`.
pub fn read_current_dir(dir: &Path) -> Result<BTreeMap<CaseId, CurrentProfile>> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse::<u32>().ok())
            .map(CaseId)
            .ok_or_else(|| Error::input(format!("{}: file name is not a case id", path.display())))?;
        let t = Table::read(&path)?;
        t.require(&CURRENT_COLUMNS[1..])?;
        t.require_rows()?;
        let nodes = t.rows().map(|r| node(&r)).collect::<Result<Vec<_>>>()?;
        out.insert(id, profile(&path, id, nodes)?);
    }
    if out.is_empty() {
        return Err(Error::input(format!("{}: no current files", dir.display())));
    }
    Ok(out)
}

/// Wave table; a missing or empty `sigma` takes the default spectral width.
pub fn read_waves(path: &Path) -> Result<BTreeMap<CaseId, WaveSpec>> {
    let t = Table::read(path)?;
    t.require(&WAVE_COLUMNS[..6])?;
    t.require_rows()?;
    let mut out = BTreeMap::new();
    for row in t.rows() {
        let id = row.case_id()?;
        let sigma = match row.opt("sigma") {
            Some(_) => row.f64("sigma")?,
            None => DEFAULT_SPECTRAL_WIDTH,
        };
        let w = WaveSpec {
            height: row.f64("height_m")?,
            period: row.f64("period_s")?,
            azimuth: row.f64("azimuth_deg")?,
            alpha: row.f64("alpha")?,
            gamma: row.f64("gamma")?,
            sigma,
        };
        w.validate().map_err(|e| row.err(e.to_string()))?;
        if out.insert(id, w).is_some() {
            return Err(row.err(format!("duplicate case id {id}")));
        }
    }
    Ok(out)
}

/// Join currents and waves on case id; both sides must list the same cases.
pub fn join_cases(
    currents: BTreeMap<CaseId, CurrentProfile>,
    mut waves: BTreeMap<CaseId, WaveSpec>,
) -> Result<Vec<LoadingCase>> {
    let mut cases = Vec::with_capacity(currents.len());
    for (id, current) in currents {
        let wave = waves
            .remove(&id)
            .ok_or_else(|| Error::input(format!("case {id} has a current but no wave")))?;
        cases.push(LoadingCase { id, current, wave });
    }
    if let Some(id) = waves.keys().next() {
        return Err(Error::input(format!("case {id} has a wave but no current")));
    }
    Ok(cases)
}

fn create(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn finish<W: Write>(path: &Path, mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| io_err(path, e))
}

macro_rules! write_row {
    ($path:expr, $w:expr, $($field:expr),+ $(,)?) => {
        $w.write_record([$($field.to_string()),+]).map_err(|e| csv_err($path, e))?
    };
}

pub fn write_cases(currents: &Path, waves: &Path, cases: &[LoadingCase]) -> Result<()> {
    let mut w = create(currents)?;
    w.write_record(CURRENT_COLUMNS).map_err(|e| csv_err(currents, e))?;
    for c in cases {
        for n in c.current.nodes() {
            write_row!(currents, w, c.id, n.depth, n.speed, n.angle);
        }
    }
    finish(currents, w)?;

    let mut w = create(waves)?;
    w.write_record(WAVE_COLUMNS).map_err(|e| csv_err(waves, e))?;
    for c in cases {
        let v = &c.wave;
        write_row!(waves, w, c.id, v.height, v.period, v.azimuth, v.alpha, v.gamma, v.sigma);
    }
    finish(waves, w)
}

/// Pre-encoded pool: `case_id` followed by the raw (unnormalized) features.
pub fn write_features(path: &Path, pool: &Pool) -> Result<()> {
    let raw = pool.raw();
    let nodes = (raw.ncols() - crate::encode::WAVE_FEATURES) / 2;
    let mut w = create(path)?;
    let header = std::iter::once("case_id".to_owned()).chain(feature_names(nodes));
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for (id, row) in pool.ids().iter().zip(raw.rows()) {
        let rec = std::iter::once(id.to_string()).chain(row.iter().map(f64::to_string));
        w.write_record(rec).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn read_features(path: &Path) -> Result<Pool> {
    let t = Table::read(path)?;
    t.require(&["case_id"])?;
    t.require_rows()?;
    let names: Vec<String> = t.columns.iter().filter(|c| *c != "case_id").cloned().collect();
    if names.len() <= crate::encode::WAVE_FEATURES {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("expected feature columns, found {}", names.len()),
        });
    }
    let mut ids = Vec::with_capacity(t.records.len());
    let mut flat = Vec::with_capacity(t.records.len() * names.len());
    for row in t.rows() {
        ids.push(row.case_id()?);
        for n in &names {
            flat.push(row.f64(n)?);
        }
    }
    let raw = Array2::from_shape_vec((ids.len(), names.len()), flat)
        .map_err(|e| Error::input(e.to_string()))?;
    Pool::from_encoded(ids, raw)
}

/// One labeled table per riser configuration; `config_id` defaults to the file stem.
pub fn read_labeled_table(path: &Path) -> Result<LabeledTable> {
    let t = Table::read(path)?;
    let mut cols = vec!["case_id"];
    cols.extend(Target::ALL.map(Target::name));
    t.require(&cols)?;
    t.require_rows()?;
    let config = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table");
    let mut table = LabeledTable::new(config);
    for row in t.rows() {
        let id = row.case_id()?;
        let mut v = [0.0; TARGET_COUNT];
        for (slot, tgt) in v.iter_mut().zip(Target::ALL) {
            *slot = row.f64(tgt.name())?;
        }
        table
            .insert(id, TargetVector::new(v))
            .map_err(|e| row.err(e.to_string()))?;
    }
    Ok(table)
}

pub fn write_labeled_table(path: &Path, table: &LabeledTable) -> Result<()> {
    let mut w = create(path)?;
    let header = std::iter::once("case_id").chain(Target::ALL.map(Target::name));
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for (id, v) in table.iter() {
        let rec = std::iter::once(id.to_string()).chain(v.0.iter().map(f64::to_string));
        w.write_record(rec).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Learning curve of one run, one row per `(n, target)` for the listed targets.
pub fn write_run(path: &Path, records: &[IterationRecord], targets: &[Target]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(RUN_COLUMNS).map_err(|e| csv_err(path, e))?;
    for r in records {
        for &t in targets {
            let m = r.metrics.target(t);
            write_row!(path, w, r.metrics.n, t, m.eps_rms, m.eps_max, m.sigma_rms, m.sigma_max);
        }
    }
    finish(path, w)
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(AGGREGATE_COLUMNS).map_err(|e| csv_err(path, e))?;
    for r in rows {
        write_row!(path, w, r.n, r.target, r.metric.name(), r.ci.mean, r.ci.lo, r.ci.hi);
    }
    finish(path, w)
}

pub fn write_comparison(path: &Path, rows: &[ComparisonRow]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(COMPARISON_COLUMNS).map_err(|e| csv_err(path, e))?;
    for r in rows {
        write_row!(path, w, r.n, r.target, r.diff.mean, r.diff.lo, r.diff.hi);
    }
    finish(path, w)
}
