//! CSV tables with `# key: value` metadata headers, and dataset-store
//! directories described by a `manifest.json`.
//!
//! Numbers are written in shortest round-trip form, so a write/read cycle
//! reproduces every value bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dnp::{BuildupCurve, DnpSpectrum};
use crate::error::{Error, Result};
use crate::signal::{DatasetStore, FidRecord};
use crate::spectra::SpectrumGrid;

/// Named numeric columns plus free-form metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub metadata: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            metadata: BTreeMap::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn from_columns(names: &[&str], data: &[&[f64]]) -> Result<Self> {
        let n = data.first().map_or(0, |c| c.len());
        if names.len() != data.len() || data.iter().any(|c| c.len() != n) {
            return Err(Error::Domain("columns must have equal lengths and names".into()));
        }
        let mut t = Table::new(names);
        t.rows = (0..n).map(|i| data.iter().map(|c| c[i]).collect()).collect();
        Ok(t)
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.into(), value.to_string());
        self
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Format { row: 0, message: format!("missing column '{name}'") })?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn meta_f64(&self, key: &str) -> Result<Option<f64>> {
        self.metadata
            .get(key)
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| Error::Format {
                    row: 0,
                    message: format!("metadata '{key}' is not a number: '{v}'"),
                })
            })
            .transpose()
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            if k.contains(':') || k.contains('\n') || v.contains('\n') {
                return Err(Error::Domain(format!("metadata entry '{k}' cannot be written")));
            }
            out.push_str(&format!("# {k}: {v}\n"));
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
        }
        let body = w.into_inner().map_err(|e| Error::Domain(e.to_string()))?;
        out.push_str(std::str::from_utf8(&body).expect("csv output is UTF-8"));
        Ok(out)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut metadata = BTreeMap::new();
        let mut header_line = 0;
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let Some(rest) = line.trim_end().strip_prefix('#') else { break };
            header_line += 1;
            offset += line.len();
            let rest = rest.trim();
            if rest.is_empty() {
                continue;
            }
            let (k, v) = rest.split_once(':').ok_or_else(|| Error::Format {
                row: header_line,
                message: "metadata line must read '# key: value'".into(),
            })?;
            metadata.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text[offset..].as_bytes());
        let columns: Vec<String> = r
            .headers()
            .map_err(|e| Error::Format { row: header_line + 1, message: e.to_string() })?
            .iter()
            .map(str::to_string)
            .collect();
        if columns.is_empty() || columns.iter().all(|c| c.is_empty()) {
            return Err(Error::Format { row: header_line + 1, message: "missing column header".into() });
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| {
                let row = e.position().map_or(0, |p| p.line() as usize) + header_line;
                Error::Format { row, message: e.to_string() }
            })?;
            let row = rec.position().map_or(0, |p| p.line() as usize) + header_line;
            if rec.len() != columns.len() {
                return Err(Error::Format {
                    row,
                    message: format!("expected {} fields, found {}", columns.len(), rec.len()),
                });
            }
            let vals = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::Format { row, message: format!("not a finite number: '{f}'") })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(vals);
        }
        Ok(Table { metadata, columns, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Domain(format!("csv: {e}"))
}

fn kind_meta(t: &Table, want: &str) -> Result<()> {
    match t.metadata.get("kind") {
        Some(k) if k != want => Err(Error::Format { row: 0, message: format!("expected a {want} file, found {k}") }),
        _ => Ok(()),
    }
}

pub fn spectrum_table(s: &SpectrumGrid) -> Table {
    let mut t = Table::from_columns(&["frequency_ghz", "intensity"], &[&s.frequencies_ghz, &s.intensities])
        .expect("spectrum columns agree");
    t.metadata = s.metadata.clone();
    t.metadata.insert("kind".into(), "odmr".into());
    t
}

pub fn spectrum_from_table(t: &Table) -> Result<SpectrumGrid> {
    kind_meta(t, "odmr")?;
    let mut s = SpectrumGrid::new(t.column("frequency_ghz")?, t.column("intensity")?)?;
    s.metadata = t.metadata.clone();
    s.metadata.remove("kind");
    Ok(s)
}

pub fn dnp_table(s: &DnpSpectrum) -> Table {
    Table::from_columns(&["mw_frequency_ghz", "signal"], &[&s.mw_frequencies_ghz, &s.signal])
        .expect("dnp columns agree")
        .with_meta("kind", "dnp")
}

pub fn dnp_from_table(t: &Table) -> Result<DnpSpectrum> {
    kind_meta(t, "dnp")?;
    DnpSpectrum::new(t.column("mw_frequency_ghz")?, t.column("signal")?)
}

pub fn buildup_table(c: &BuildupCurve) -> Table {
    let mut t = match &c.uncertainty {
        Some(u) => Table::from_columns(&["time_s", "polarization", "uncertainty"], &[&c.times_s, &c.polarization, u]),
        None => Table::from_columns(&["time_s", "polarization"], &[&c.times_s, &c.polarization]),
    }
    .expect("buildup columns agree");
    t.metadata.insert("kind".into(), "buildup".into());
    t
}

pub fn buildup_from_table(t: &Table) -> Result<BuildupCurve> {
    kind_meta(t, "buildup")?;
    let mut c = BuildupCurve::new(t.column("time_s")?, t.column("polarization")?)?;
    if t.columns.iter().any(|c| c == "uncertainty") {
        c.uncertainty = Some(t.column("uncertainty")?);
        c.validate()?;
    }
    Ok(c)
}

pub fn fid_table(f: &FidRecord) -> Table {
    let re: Vec<f64> = f.samples.iter().map(|z| z.re).collect();
    let im: Vec<f64> = f.samples.iter().map(|z| z.im).collect();
    Table::from_columns(&["time_s", "real", "imag"], &[&f.times(), &re, &im])
        .expect("fid columns agree")
        .with_meta("kind", "fid")
        .with_meta("dwell_s", f.dwell_s)
        .with_meta("start_time_s", f.start_time_s)
}

pub fn fid_from_table(t: &Table) -> Result<FidRecord> {
    kind_meta(t, "fid")?;
    let times = t.column("time_s")?;
    let re = t.column("real")?;
    let im = t.column("imag")?;
    let start = match t.meta_f64("start_time_s")? {
        Some(v) => v,
        None => *times.first().ok_or(Error::Format { row: 0, message: "empty FID".into() })?,
    };
    let dwell = match (t.meta_f64("dwell_s")?, times.len()) {
        (Some(d), _) => d,
        (None, n) if n >= 2 => times[1] - times[0],
        _ => return Err(Error::Format { row: 0, message: "cannot infer dwell time".into() }),
    };
    for (i, &ti) in times.iter().enumerate() {
        let want = start + i as f64 * dwell;
        if (ti - want).abs() > 1e-9 * dwell.abs().max(want.abs()) {
            return Err(Error::Format {
                row: i + 2 + t.metadata.len(),
                message: format!("time {ti} breaks the uniform grid (expected {want})"),
            });
        }
    }
    let samples = re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect();
    FidRecord::new(samples, dwell, start)
}

/// `manifest.json` of a dataset directory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    /// Thermal signal-averaging blocks, one FID CSV each.
    pub blocks: Vec<String>,
    /// Hyperpolarized FID used as the fitting model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyperpolarized: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correction_factor: Option<f64>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

pub const MANIFEST: &str = "manifest.json";

/// A dataset directory loaded into memory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub store: DatasetStore,
    pub hyperpolarized: Option<FidRecord>,
}

fn read_fid(path: &Path) -> Result<FidRecord> {
    let t = Table::read(path).map_err(|e| match e {
        Error::Format { row, message } => Error::Format { row, message: format!("{}: {message}", path.display()) },
        other => other,
    })?;
    fid_from_table(&t)
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(dir.join(MANIFEST))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let blocks = manifest
        .blocks
        .iter()
        .map(|f| read_fid(&dir.join(f)))
        .collect::<Result<Vec<_>>>()?;
    let hyperpolarized = manifest.hyperpolarized.as_ref().map(|f| read_fid(&dir.join(f))).transpose()?;
    Ok(Dataset { store: DatasetStore::new(blocks)?, hyperpolarized, manifest })
}

/// Write blocks as `block_NNNN.csv` plus an optional `hyperpolarized.csv`.
pub fn write_dataset(dir: &Path, store: &DatasetStore, hp: Option<&FidRecord>, mut manifest: Manifest) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    manifest.blocks.clear();
    for (i, b) in store.blocks().iter().enumerate() {
        let name = format!("block_{i:04}.csv");
        fid_table(b).write(&dir.join(&name))?;
        manifest.blocks.push(name);
    }
    manifest.hyperpolarized = match hp {
        Some(f) => {
            fid_table(f).write(&dir.join("hyperpolarized.csv"))?;
            Some("hyperpolarized.csv".into())
        }
        None => None,
    };
    std::fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}
