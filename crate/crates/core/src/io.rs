//! ETH-UCY text files, external prediction tables and run artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{Point, Trajectory, TrajectorySample};
use crate::predictor::LookupPredictor;

#[derive(Debug, Clone, PartialEq)]
pub struct EthUcyData {
    /// Windows sorted by agent id, then start frame.
    pub samples: Vec<TrajectorySample>,
    pub agents_total: usize,
    /// Agents with fewer than `t_obs + t_pred` rows.
    pub agents_skipped: usize,
}

fn parse_id(field: &str) -> Option<i64> {
    let v: f64 = field.parse().ok()?;
    (v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
}

/// Parses `frame agent x y` rows. Ids may be written as floats (`780.0`).
/// Blank lines and lines starting with `#` are ignored.
pub fn parse_ethucy<R: Read>(
    reader: R,
    origin: &Path,
    t_obs: usize,
    t_pred: usize,
    stride: usize,
) -> Result<EthUcyData> {
    if t_obs == 0 || t_pred == 0 || stride == 0 {
        return Err(Error::invalid("t_obs, t_pred and stride must be positive"));
    }
    let mut tracks: BTreeMap<i64, Vec<(i64, Point)>> = BTreeMap::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: line_no,
            message,
        };
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(format!("expected 4 fields, found {}", fields.len())));
        }
        let frame = parse_id(fields[0]).ok_or_else(|| parse_err(format!("bad frame id {:?}", fields[0])))?;
        let agent = parse_id(fields[1]).ok_or_else(|| parse_err(format!("bad agent id {:?}", fields[1])))?;
        let coord = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(format!("bad coordinate {s:?}")))
        };
        let p = Point::new(coord(fields[2])?, coord(fields[3])?);
        tracks.entry(agent).or_default().push((frame, p));
    }

    let window = t_obs + t_pred;
    let agents_total = tracks.len();
    let mut agents_skipped = 0;
    let mut samples = Vec::new();
    for (agent, mut rows) in tracks {
        rows.sort_by_key(|&(f, _)| f);
        if rows.len() < window {
            agents_skipped += 1;
            continue;
        }
        let mut start = 0;
        while start + window <= rows.len() {
            let pts = &rows[start..start + window];
            samples.push(TrajectorySample {
                past: pts[..t_obs].iter().map(|&(_, p)| p).collect(),
                future: pts[t_obs..].iter().map(|&(_, p)| p).collect(),
                agent_id: agent,
                origin_frame: pts[0].0,
            });
            start += stride;
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptyDataset(origin.to_path_buf()));
    }
    Ok(EthUcyData {
        samples,
        agents_total,
        agents_skipped,
    })
}

/// Loads sliding windows of `t_obs + t_pred` rows per agent.
///
/// `stride = t_pred` gives non-overlapping test windows. Smaller strides
/// produce overlapping windows that share points, which weakens the
/// exchangeability the coverage guarantee relies on.
pub fn load_ethucy(path: &Path, t_obs: usize, t_pred: usize, stride: usize) -> Result<EthUcyData> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ethucy(file, path, t_obs, t_pred, stride)
}

/// Writes samples as ETH-UCY rows, one frame per point starting at
/// `origin_frame`, with six decimals.
pub fn export_ethucy(samples: &[TrajectorySample], path: &Path) -> Result<()> {
    let mut body = String::new();
    for s in samples {
        for (t, p) in s.past.points().iter().chain(s.future.points()).enumerate() {
            body.push_str(&format!("{} {} {:.6} {:.6}\n", s.origin_frame + t as i64, s.agent_id, p.x, p.y));
        }
    }
    write_atomic(path, body.as_bytes())
}

/// Reads `sample_index,t,x,y` rows (`t` counted from 0) into a lookup
/// predictor. A header row is optional.
pub fn load_predictions(path: &Path) -> Result<LookupPredictor> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(file, path)
}

pub fn parse_predictions<R: Read>(reader: R, origin: &Path) -> Result<LookupPredictor> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(reader);
    let mut cells: BTreeMap<(usize, usize), Point> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.position().map_or(i + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        if i == 0 && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if rec.len() != 4 {
            return Err(parse_err(format!("expected 4 fields, found {}", rec.len())));
        }
        let index: usize = rec[0].parse().map_err(|_| parse_err(format!("bad sample index {:?}", &rec[0])))?;
        let t: usize = rec[1].parse().map_err(|_| parse_err(format!("bad step {:?}", &rec[1])))?;
        let coord = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(format!("bad coordinate {s:?}")))
        };
        let p = Point::new(coord(&rec[2])?, coord(&rec[3])?);
        if cells.insert((index, t), p).is_some() {
            return Err(parse_err(format!("duplicate cell for sample {index} step {t}")));
        }
    }
    if cells.is_empty() {
        return Err(Error::IncompletePredictions(format!("{} has no prediction rows", origin.display())));
    }
    let n = cells.keys().map(|&(i, _)| i).max().expect("nonempty") + 1;
    let horizon = cells.keys().map(|&(_, t)| t).max().expect("nonempty") + 1;
    let mut predictions = Vec::with_capacity(n);
    for i in 0..n {
        let mut pts = Vec::with_capacity(horizon);
        for t in 0..horizon {
            match cells.get(&(i, t)) {
                Some(&p) => pts.push(p),
                None => {
                    return Err(Error::IncompletePredictions(format!(
                        "{} is missing sample {i} step {t}",
                        origin.display()
                    )))
                }
            }
        }
        predictions.push(Trajectory::new(pts));
    }
    LookupPredictor::new(format!("external:{}", origin.display()), predictions)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// SHA-256 of the canonical configuration text.
    pub config_hash: String,
    pub seed: u64,
    pub dataset_id: String,
    /// Unix seconds.
    pub started_at: u64,
    pub finished_at: Option<u64>,
    /// Emitted files, relative to the output directory.
    pub artifacts: Vec<String>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(config_text: &str, seed: u64, dataset_id: impl Into<String>) -> Self {
        Self {
            config_hash: sha256_hex(config_text.as_bytes()),
            seed,
            dataset_id: dataset_id.into(),
            started_at: unix_now(),
            finished_at: None,
            artifacts: Vec::new(),
        }
    }
}

/// A named table of homogeneous records, emitted as `<name>.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    /// Flattens records that serialize to JSON objects with scalar fields.
    /// Column order follows the first record's field order.
    pub fn from_records<R: Serialize>(name: &str, columns: &[&str], records: &[R]) -> Result<Self> {
        let columns: Vec<String> = columns.iter().map(|c| c.to_string()).collect();
        let mut rows = Vec::with_capacity(records.len());
        for r in records {
            let v = serde_json::to_value(r).map_err(|e| Error::Serialization(e.to_string()))?;
            let obj = v
                .as_object()
                .ok_or_else(|| Error::Serialization(format!("{name} record is not an object")))?;
            let mut row = Vec::with_capacity(columns.len());
            for c in &columns {
                let cell = obj
                    .get(c)
                    .ok_or_else(|| Error::Serialization(format!("{name} record lacks column {c}")))?;
                if cell.is_object() || cell.is_array() {
                    row.push(Value::String(cell.to_string()));
                } else {
                    row.push(cell.clone());
                }
            }
            rows.push(row);
        }
        Ok(Self {
            name: name.into(),
            columns,
            rows,
        })
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(&self.columns).map_err(ser)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| match v {
                Value::Null => String::new(),
                Value::String(s) => s.clone(),
                other => other.to_string(),
            }))
            .map_err(ser)?;
        }
        w.into_inner().map_err(|e| Error::Serialization(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub manifest: RunManifest,
    pub tables: Vec<Table>,
}

/// Writes `report.json` plus one CSV per table into `dir`, each atomically,
/// and records every file in the manifest once.
pub fn write_report(manifest: &mut RunManifest, tables: &[Table], dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut names: Vec<String> = Vec::with_capacity(tables.len() + 1);
    for t in tables {
        let file = format!("{}.csv", t.name);
        if names.contains(&file) {
            return Err(Error::invalid(format!("duplicate table name {}", t.name)));
        }
        write_atomic(&dir.join(&file), &t.to_csv()?)?;
        names.push(file);
    }
    names.push("report.json".into());
    for n in names {
        if !manifest.artifacts.contains(&n) {
            manifest.artifacts.push(n);
        }
    }
    manifest.finished_at = Some(unix_now());
    let report = Report {
        manifest: manifest.clone(),
        tables: tables.to_vec(),
    };
    let json = serde_json::to_vec_pretty(&report).map_err(|e| Error::Serialization(e.to_string()))?;
    let path = dir.join("report.json");
    write_atomic(&path, &json)?;
    Ok(path)
}

pub fn read_report(path: &Path) -> Result<Report> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Serialization(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::Predictor;

    fn rows(agent: i64, n: usize) -> String {
        (0..n)
            .map(|f| format!("{}.0 {agent}.0 {:.2} {:.2}\n", f * 10, f as f64 * 0.5, -(f as f64)))
            .collect()
    }

    fn parse(text: &str, stride: usize) -> Result<EthUcyData> {
        parse_ethucy(text.as_bytes(), Path::new("mem.txt"), 8, 12, stride)
    }

    #[test]
    fn window_counts() {
        assert_eq!(parse(&rows(1, 20), 20).unwrap().samples.len(), 1);
        let d = parse(&format!("{}{}", rows(1, 20), rows(2, 19)), 20).unwrap();
        assert_eq!((d.samples.len(), d.agents_skipped, d.agents_total), (1, 1, 2));
        assert!(matches!(parse(&rows(2, 19), 20), Err(Error::EmptyDataset(_))));
        assert_eq!(parse(&rows(1, 32), 12).unwrap().samples.len(), 2);
    }

    #[test]
    fn samples_sorted_by_agent_then_frame() {
        let d = parse(&format!("{}{}", rows(7, 44), rows(3, 20)), 12).unwrap();
        let keys: Vec<(i64, i64)> = d.samples.iter().map(|s| (s.agent_id, s.origin_frame)).collect();
        assert_eq!(keys, vec![(3, 0), (7, 0), (7, 120), (7, 240)]);
        assert_eq!(d.samples[0].past[1], Point::new(0.5, -1.0));
    }

    #[test]
    fn malformed_rows_report_line() {
        let text = format!("{}\n10 1 0.5 abc\n", rows(1, 3));
        match parse(&text, 12) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("1 2 3\n", 12), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("1 2 nan 3\n", 12), Err(Error::Parse { .. })));
        assert!(matches!(parse("1.5 2 0 3\n", 12), Err(Error::Parse { .. })));
        assert!(parse(&rows(1, 20), 0).is_err());
    }

    #[test]
    fn predictions_complete_and_gapped() {
        let mut text = String::from("sample_index,t,x,y\n");
        for i in 0..10 {
            for t in 0..12 {
                text.push_str(&format!("{i},{t},{}.0,{}.5\n", i, t));
            }
        }
        let lp = parse_predictions(text.as_bytes(), Path::new("p.csv")).unwrap();
        assert_eq!((lp.len(), lp.horizon()), (10, 12));
        assert_eq!(lp.by_index(9).unwrap()[11], Point::new(9.0, 11.5));
        assert!(lp.by_index(10).is_err());

        let gapped: String = text.lines().filter(|l| *l != "4,7,4.0,7.5").map(|l| format!("{l}\n")).collect();
        match parse_predictions(gapped.as_bytes(), Path::new("p.csv")) {
            Err(Error::IncompletePredictions(msg)) => assert!(msg.contains("sample 4 step 7"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_predictions("".as_bytes(), Path::new("p.csv")),
            Err(Error::IncompletePredictions(_))
        ));
        assert!(matches!(
            parse_predictions("0,0,1,1\n0,0,1,1\n".as_bytes(), Path::new("p.csv")),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[derive(Serialize)]
    struct Row {
        name: String,
        q: f64,
        ok: bool,
    }

    #[test]
    fn report_round_trip_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![
            Row { name: "a".into(), q: 1.25, ok: true },
            Row { name: "b".into(), q: f64::INFINITY, ok: false },
        ];
        let table = Table::from_records("rows", &["name", "q", "ok"], &recs).unwrap();
        let empty = Table::from_records::<Row>("empty", &["name", "q", "ok"], &[]).unwrap();
        let mut m = RunManifest::new("seed = 1", 1, "synthetic");
        let path = write_report(&mut m, &[table.clone(), empty.clone()], dir.path()).unwrap();
        assert_eq!(m.artifacts, vec!["rows.csv", "empty.csv", "report.json"]);
        let back = read_report(&path).unwrap();
        assert_eq!(back.tables[1].rows.len(), 0);
        assert_eq!(back.manifest.config_hash.len(), 64);
        let csv1 = fs::read_to_string(dir.path().join("rows.csv")).unwrap();
        assert_eq!(csv1, "name,q,ok\na,1.25,true\nb,,false\n");

        let mut m2 = RunManifest::new("seed = 1", 1, "synthetic");
        write_report(&mut m2, &[table, empty], dir.path()).unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("rows.csv")).unwrap(), csv1);
        assert_eq!(m2.artifacts.len(), 3);
    }

    #[test]
    fn unwritable_directory_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let mut m = RunManifest::new("", 0, "x");
        assert!(matches!(write_report(&mut m, &[], &blocker.join("sub")), Err(Error::Io { .. })));
    }
}
