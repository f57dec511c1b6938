//! File formats.
//!
//! * pulse CSV: header `k,re,im` (momentum) or `t,re,im` (time), plus a
//!   sidecar `<file>.json` with `{n, k_max, domain}`
//! * two-photon dump: row-major `re,im` pairs, sidecar with `domain = "k1k2"`
//! * traces: JSON lines, one [`TraceLine`] per iteration
//! * sweeps: CSV with a header row
//! * `manifest.json` in every output directory

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use photonsort_core::optimize::{OptimizationTrace, TraceRecord};
use photonsort_core::{Grid, Pulse, TimePulse, TwoPhotonState};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    K,
    T,
    K1k2,
}

impl Domain {
    fn column(self) -> &'static str {
        match self {
            Domain::K => "k",
            Domain::T => "t",
            Domain::K1k2 => "k1k2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub n: usize,
    pub k_max: f64,
    pub domain: Domain,
    /// Rates and momenta are in units of the first emitter's coupling.
    #[serde(default = "default_units")]
    pub units: String,
}

fn default_units() -> String {
    "gamma1".into()
}

impl Sidecar {
    fn new(g: &Grid, domain: Domain) -> Self {
        Sidecar { n: g.n(), k_max: g.k_max(), domain, units: default_units() }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn create(path: &Path) -> AppResult<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
        }
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| AppError::io(path, e))?))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> AppResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| AppError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> AppResult<T> {
    let f = File::open(path).map_err(|e| AppError::io(path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| AppError::Format {
        what: "json",
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

pub fn write_text(path: &Path, text: &str) -> AppResult<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| AppError::io(path, e))
}

fn write_samples(path: &Path, column: &str, rows: impl Iterator<Item = (f64, C64)>, side: Sidecar) -> AppResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record([column, "re", "im"])?;
    for (x, v) in rows {
        w.write_record(&[fmt(x), fmt(v.re), fmt(v.im)])?;
    }
    w.flush().map_err(|e| AppError::io(path, e))?;
    write_json(&sidecar_path(path), &side)
}

/// Shortest representation that round-trips.
fn fmt(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_pulse_csv(path: &Path, p: &Pulse) -> AppResult<()> {
    let g = *p.grid();
    write_samples(path, "k", g.points().zip(p.amp().iter().copied()), Sidecar::new(&g, Domain::K))
}

pub fn write_time_csv(path: &Path, p: &TimePulse) -> AppResult<()> {
    let g = *p.grid();
    let rows = (0..g.n()).map(|m| g.time(m)).zip(p.amp().iter().copied());
    write_samples(path, "t", rows, Sidecar::new(&g, Domain::T))
}

/// Pulse in both domains: `<stem>_k.csv` and `<stem>_t.csv`.
pub fn write_pulse_pair(dir: &Path, stem: &str, p: &Pulse) -> AppResult<Vec<PathBuf>> {
    let k = dir.join(format!("{stem}_k.csv"));
    let t = dir.join(format!("{stem}_t.csv"));
    write_pulse_csv(&k, p)?;
    write_time_csv(&t, &p.to_time_domain())?;
    Ok(vec![k, t])
}

fn format_err(path: &Path, detail: impl Into<String>) -> AppError {
    AppError::Format { what: "pulse csv", path: path.to_path_buf(), detail: detail.into() }
}

fn read_samples(path: &Path, expected: Domain) -> AppResult<(Grid, Vec<(f64, C64)>)> {
    let side: Sidecar = read_json(&sidecar_path(path))?;
    if side.domain != expected {
        return Err(format_err(path, format!("sidecar domain is {:?}, expected {:?}", side.domain, expected)));
    }
    let g = Grid::new(side.n, side.k_max).map_err(|e| format_err(path, e.to_string()))?;
    let f = File::open(path).map_err(|e| AppError::io(path, e))?;
    let mut r = csv::Reader::from_reader(BufReader::new(f));
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != [expected.column(), "re", "im"] {
        return Err(format_err(path, format!("header must be {},re,im", expected.column())));
    }
    let mut rows = Vec::with_capacity(g.n());
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> AppResult<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| format_err(path, format!("bad value on line {}", rows.len() + 2)))
        };
        rows.push((parse(0)?, C64::new(parse(1)?, parse(2)?)));
    }
    if rows.len() != g.n() {
        return Err(format_err(path, format!("{} rows for a grid of {}", rows.len(), g.n())));
    }
    Ok((g, rows))
}

pub fn read_pulse_csv(path: &Path) -> AppResult<Pulse> {
    let (g, rows) = read_samples(path, Domain::K)?;
    for (j, (k, _)) in rows.iter().enumerate() {
        if (k - g.k(j)).abs() > 1e-9 * g.k_max() {
            return Err(format_err(path, format!("row {j}: k = {k} is off the grid")));
        }
    }
    Ok(Pulse::new(g, rows.into_iter().map(|r| r.1).collect())?)
}

pub fn read_time_csv(path: &Path) -> AppResult<TimePulse> {
    let (g, rows) = read_samples(path, Domain::T)?;
    Ok(TimePulse::new(g, rows.into_iter().map(|r| r.1).collect())?)
}

/// Two-photon amplitude as `re,im` rows in row-major `(k₁, k₂)` order.
pub fn write_two_photon(path: &Path, s: &TwoPhotonState) -> AppResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["re", "im"])?;
    for v in s.amp() {
        w.write_record(&[fmt(v.re), fmt(v.im)])?;
    }
    w.flush().map_err(|e| AppError::io(path, e))?;
    write_json(&sidecar_path(path), &Sidecar::new(s.grid(), Domain::K1k2))
}

pub fn read_two_photon(path: &Path) -> AppResult<TwoPhotonState> {
    let side: Sidecar = read_json(&sidecar_path(path))?;
    let g = Grid::new(side.n, side.k_max).map_err(|e| format_err(path, e.to_string()))?;
    let f = File::open(path).map_err(|e| AppError::io(path, e))?;
    let mut amp = Vec::with_capacity(g.n() * g.n());
    for rec in csv::Reader::from_reader(BufReader::new(f)).records() {
        let rec = rec?;
        let re = rec.get(0).and_then(|s| s.parse::<f64>().ok());
        let im = rec.get(1).and_then(|s| s.parse::<f64>().ok());
        match (re, im) {
            (Some(re), Some(im)) => amp.push(C64::new(re, im)),
            _ => return Err(format_err(path, "bad two-photon row")),
        }
    }
    Ok(TwoPhotonState::new(g, amp)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub iter: usize,
    pub objective: f64,
    pub error: f64,
    pub n2: f64,
    pub fidelity: f64,
    pub dtau: f64,
}

impl From<&TraceRecord> for TraceLine {
    fn from(r: &TraceRecord) -> Self {
        TraceLine { iter: r.iter, objective: r.objective, error: r.error, n2: r.n2, fidelity: r.fidelity, dtau: r.dtau }
    }
}

/// Trace scalars as JSON lines, snapshots as `snapshots/iter_<n>_k.csv`.
pub fn write_trace(dir: &Path, trace: &OptimizationTrace) -> AppResult<Vec<PathBuf>> {
    let path = dir.join("trace.jsonl");
    let mut w = create(&path)?;
    for r in &trace.records {
        serde_json::to_writer(&mut w, &TraceLine::from(r))?;
        w.write_all(b"\n").map_err(|e| AppError::io(&path, e))?;
    }
    w.flush().map_err(|e| AppError::io(&path, e))?;
    let mut files = vec![path];
    for (iter, p) in &trace.snapshots {
        let f = dir.join("snapshots").join(format!("iter_{iter:06}_k.csv"));
        write_pulse_csv(&f, p)?;
        files.push(f);
    }
    Ok(files)
}

pub fn read_trace(path: &Path) -> AppResult<Vec<TraceLine>> {
    let f = File::open(path).map_err(|e| AppError::io(path, e))?;
    BufReader::new(f)
        .lines()
        .map(|l| {
            let l = l.map_err(|e| AppError::io(path, e))?;
            serde_json::from_str(&l).map_err(|e| AppError::Format {
                what: "trace",
                path: path.to_path_buf(),
                detail: e.to_string(),
            })
        })
        .collect()
}

pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> AppResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

/// Enough to rerun the command that produced a directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub argv: Vec<String>,
    pub version: String,
    pub config: String,
    pub parameters: serde_json::Value,
    pub files: Vec<PathBuf>,
}

impl Manifest {
    pub fn new(command: &str, argv: &[String], config: String, parameters: serde_json::Value) -> Self {
        Manifest {
            command: command.into(),
            argv: argv.to_vec(),
            version: env!("CARGO_PKG_VERSION").into(),
            config,
            parameters,
            files: Vec::new(),
        }
    }

    /// Writes `manifest.json` and `config.toml`; file paths are stored
    /// relative to `dir`.
    pub fn write(mut self, dir: &Path) -> AppResult<PathBuf> {
        write_text(&dir.join("config.toml"), &self.config)?;
        self.files.push(PathBuf::from("config.toml"));
        for f in self.files.iter_mut() {
            if let Ok(rel) = f.strip_prefix(dir) {
                *f = rel.to_path_buf();
            }
        }
        self.files.sort();
        self.files.dedup();
        let path = dir.join("manifest.json");
        write_json(&path, &self)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use photonsort_core::grid::gaussian_pulse;
    use photonsort_core::state::product_state;

    #[test]
    fn pulse_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(64, 8.0).unwrap();
        let p = gaussian_pulse(g, 1.3).unwrap().delayed(0.4);
        let f = dir.path().join("p.csv");
        write_pulse_csv(&f, &p).unwrap();
        assert_eq!(read_pulse_csv(&f).unwrap(), p);
        let head = fs::read_to_string(&f).unwrap();
        assert!(head.starts_with("k,re,im\n"));
        let side: Sidecar = read_json(&sidecar_path(&f)).unwrap();
        assert_eq!((side.n, side.k_max, side.domain), (64, 8.0, Domain::K));

        let t = dir.path().join("t.csv");
        write_time_csv(&t, &p.to_time_domain()).unwrap();
        assert_eq!(read_time_csv(&t).unwrap(), p.to_time_domain());
        assert!(read_pulse_csv(&t).is_err());
    }

    #[test]
    fn two_photon_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(64, 8.0).unwrap();
        let s = product_state(&gaussian_pulse(g, 1.0).unwrap()).unwrap();
        let f = dir.path().join("s.csv");
        write_two_photon(&f, &s).unwrap();
        assert_eq!(read_two_photon(&f).unwrap(), s);
    }

    #[test]
    fn malformed_pulse_files() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(64, 8.0).unwrap();
        let f = dir.path().join("p.csv");
        write_pulse_csv(&f, &gaussian_pulse(g, 1.0).unwrap()).unwrap();
        let good = fs::read_to_string(&f).unwrap();

        fs::write(&f, good.replacen("k,re,im", "x,re,im", 1)).unwrap();
        assert!(read_pulse_csv(&f).is_err());
        let short: String = good.lines().take(5).map(|l| format!("{l}\n")).collect();
        fs::write(&f, short).unwrap();
        assert!(read_pulse_csv(&f).is_err());
        fs::write(&f, good.replacen("\n", "\n-4.0,nan,0.0\n", 1)).unwrap();
        assert!(read_pulse_csv(&f).is_err());
        fs::remove_file(sidecar_path(&f)).unwrap();
        assert!(matches!(read_pulse_csv(&f), Err(AppError::Io { .. })));
    }

    #[test]
    fn manifest_paths_are_relative() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new("bell-table", &["photonsort".into()], "schema_version = 1\n".into(), serde_json::json!({}));
        m.files.push(dir.path().join("table.csv"));
        let path = m.write(dir.path()).unwrap();
        let back: Manifest = read_json(&path).unwrap();
        assert_eq!(back.files, vec![PathBuf::from("config.toml"), PathBuf::from("table.csv")]);
        assert!(dir.path().join("config.toml").exists());
    }
}
