//! Demonstration datasets: validation, isotropic normalization, delimited
//! file I/O with a JSON sidecar manifest, smoothing, finite-difference
//! velocities, and synthetic oracles.

mod filter;
mod oracle;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{check_finite, Error, Result};
pub use filter::{finite_difference_velocities, savitzky_golay, savitzky_golay_noise_gain};
pub use oracle::{synth_oracle, synth_oracle_raw, OracleKind, SpeedProfile};

const MANIFEST_VERSION: u32 = 1;

/// Isotropic affine map `x_norm = (x − offset)·scale`; velocities are
/// multiplied by the same `scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub offset: Vec<f64>,
    pub scale: f64,
}

impl Normalization {
    pub fn identity(n: usize) -> Self {
        Self { offset: vec![0.0; n], scale: 1.0 }
    }

    pub fn position(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.offset).map(|(v, o)| (v - o) * self.scale).collect()
    }

    pub fn velocity(&self, v: &[f64]) -> Vec<f64> {
        v.iter().map(|c| c * self.scale).collect()
    }

    pub fn inverse_position(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.offset).map(|(v, o)| v / self.scale + o).collect()
    }

    pub fn inverse_velocity(&self, v: &[f64]) -> Vec<f64> {
        v.iter().map(|c| c / self.scale).collect()
    }

    /// Composition `other ∘ self` (apply `self` first).
    pub fn then(&self, other: &Normalization) -> Normalization {
        let offset = self
            .offset
            .iter()
            .zip(&other.offset)
            .map(|(a, b)| a + b / self.scale)
            .collect();
        Normalization { offset, scale: self.scale * other.scale }
    }
}

/// Timestamped demonstration `⟨T, X, Ẋ, Z⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleDataset {
    /// Timestamps in seconds, strictly increasing.
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// Scalar conditioning per sample.
    pub z: Option<Vec<f64>>,
    /// Half-open index range of the periodic subset.
    pub periodic: (usize, usize),
    /// Period in seconds.
    pub period: f64,
    /// Whether each demonstration ends where it starts (last sample
    /// duplicates the first).
    pub closed: bool,
    pub units: String,
    /// Transform from raw units to the stored values, if normalized.
    pub normalization: Option<Normalization>,
}

/// Sidecar manifest written beside a dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub n: usize,
    pub period: f64,
    pub periodic_start: usize,
    pub periodic_end: usize,
    pub units: String,
    pub has_velocity: bool,
    pub has_conditioning: bool,
    pub closed: bool,
    pub normalization: Option<Normalization>,
}

impl OracleDataset {
    /// Validated dataset whose periodic subset is every sample.
    pub fn new(t: Vec<f64>, x: Vec<Vec<f64>>, v: Vec<Vec<f64>>, z: Option<Vec<f64>>, period: f64, closed: bool) -> Result<Self> {
        let len = t.len();
        let ds = Self { t, x, v, z, periodic: (0, len), period, closed, units: "m".into(), normalization: None };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, |x| x.len())
    }

    /// Conditioning of sample `i` (0 when unconditioned).
    pub fn z_at(&self, i: usize) -> f64 {
        self.z.as_ref().map_or(0.0, |z| z[i])
    }

    /// Sorted distinct conditioning values.
    pub fn conditionings(&self) -> Vec<f64> {
        let mut zs: Vec<f64> = self.z.clone().unwrap_or_else(|| vec![0.0]);
        zs.sort_by(f64::total_cmp);
        zs.dedup();
        zs
    }

    /// Index ranges of the individual demonstrations (maximal runs of
    /// equal conditioning).
    pub fn demos(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.len() {
            if i == self.len() || self.z_at(i) != self.z_at(start) {
                out.push(start..i);
                start = i;
            }
        }
        out
    }

    /// Largest demonstrated speed.
    pub fn max_speed(&self) -> f64 {
        self.v.iter().map(|v| crate::linalg::norm(v)).fold(0.0, f64::max)
    }

    /// Mean sampling interval.
    pub fn mean_dt(&self) -> f64 {
        let demos = self.demos();
        let (mut span, mut steps) = (0.0, 0usize);
        for d in demos {
            span += self.t[d.end - 1] - self.t[d.start];
            steps += d.len() - 1;
        }
        if steps == 0 {
            0.0
        } else {
            span / steps as f64
        }
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.len();
        if len == 0 {
            return Err(Error::Empty("dataset"));
        }
        let n = self.dim();
        if n < 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: n });
        }
        if self.x.len() != len {
            return Err(Error::LengthMismatch { left: len, right: self.x.len() });
        }
        if self.v.len() != len {
            return Err(Error::LengthMismatch { left: len, right: self.v.len() });
        }
        if let Some(z) = &self.z {
            if z.len() != len {
                return Err(Error::LengthMismatch { left: len, right: z.len() });
            }
            check_finite(z, "conditioning")?;
        }
        for row in self.x.iter().chain(&self.v) {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: row.len() });
            }
            check_finite(row, "dataset values")?;
        }
        check_finite(&self.t, "timestamps")?;
        for i in 1..len {
            if !(self.t[i] > self.t[i - 1]) {
                return Err(Error::NonMonotoneTimestamps { index: i });
            }
        }
        let (a, b) = self.periodic;
        if a > b || b > len {
            return Err(Error::Schema(format!("periodic range {a}..{b} outside 0..{len}")));
        }
        if a < b && !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::InvalidParameter("period must be positive when a periodic subset exists".into()));
        }
        Ok(())
    }

    /// Isotropically normalized copy and the transform applied: per
    /// coordinate zero mean, max-abs coordinate 0.5.
    pub fn normalize(&self) -> Result<(OracleDataset, Normalization)> {
        if self.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        let n = self.dim();
        let len = self.len() as f64;
        let mut offset = vec![0.0; n];
        for x in &self.x {
            for i in 0..n {
                offset[i] += x[i];
            }
        }
        offset.iter_mut().for_each(|o| *o /= len);
        let mut max_dev: f64 = 0.0;
        for i in 0..n {
            let dev = self.x.iter().map(|x| (x[i] - offset[i]).abs()).fold(0.0, f64::max);
            if dev == 0.0 {
                return Err(Error::ZeroRange { coordinate: i });
            }
            max_dev = max_dev.max(dev);
        }
        let norm = Normalization { offset, scale: 0.5 / max_dev };
        let mut out = self.clone();
        out.x = self.x.iter().map(|x| norm.position(x)).collect();
        out.v = self.v.iter().map(|v| norm.velocity(v)).collect();
        out.normalization = Some(match &self.normalization {
            Some(prev) => prev.then(&norm),
            None => norm.clone(),
        });
        Ok((out, norm))
    }

    /// Copy in raw units (undoes the recorded normalization).
    pub fn denormalize(&self) -> OracleDataset {
        let mut out = self.clone();
        if let Some(norm) = &self.normalization {
            out.x = self.x.iter().map(|x| norm.inverse_position(x)).collect();
            out.v = self.v.iter().map(|v| norm.inverse_velocity(v)).collect();
            out.normalization = None;
        }
        out
    }

    /// Concatenates single-demonstration datasets with equal period and
    /// dimension, tagging demonstration `k` with conditioning `zs[k]` and
    /// shifting its timestamps by `2kP` so they stay strictly increasing
    /// while keeping the same phase.
    pub fn concat(parts: &[OracleDataset], zs: &[f64]) -> Result<OracleDataset> {
        if parts.is_empty() {
            return Err(Error::Empty("dataset list"));
        }
        if parts.len() != zs.len() {
            return Err(Error::LengthMismatch { left: parts.len(), right: zs.len() });
        }
        let first = &parts[0];
        let (mut t, mut x, mut v, mut z) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (k, (p, &zk)) in parts.iter().zip(zs).enumerate() {
            if p.dim() != first.dim() {
                return Err(Error::DimensionMismatch { expected: first.dim(), found: p.dim() });
            }
            if p.period != first.period {
                return Err(Error::InvalidParameter("concatenated demonstrations must share the period".into()));
            }
            let shift = 2.0 * k as f64 * p.period;
            t.extend(p.t.iter().map(|s| s - p.t[0] + shift));
            x.extend(p.x.iter().cloned());
            v.extend(p.v.iter().cloned());
            z.extend(std::iter::repeat_n(zk, p.len()));
        }
        let mut out = OracleDataset::new(t, x, v, Some(z), first.period, first.closed)?;
        out.units = first.units.clone();
        Ok(out)
    }

    /// Sidecar manifest path for a dataset file: `<stem>.manifest.json`.
    pub fn manifest_path(path: &Path) -> PathBuf {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        path.with_file_name(format!("{stem}.manifest.json"))
    }

    pub fn manifest(&self) -> DatasetManifest {
        DatasetManifest {
            version: MANIFEST_VERSION,
            n: self.dim(),
            period: self.period,
            periodic_start: self.periodic.0,
            periodic_end: self.periodic.1,
            units: self.units.clone(),
            has_velocity: true,
            has_conditioning: self.z.is_some(),
            closed: self.closed,
            normalization: self.normalization.clone(),
        }
    }

    /// Writes the delimited file and its manifest. Floats are written in
    /// shortest round-trip form, so loading is bit-exact.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let n = self.dim();
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend((1..=n).map(|i| format!("v_{i}")));
        if self.z.is_some() {
            header.push("z".into());
        }
        w.write_record(&header).map_err(csv_err)?;
        for k in 0..self.len() {
            let mut row = vec![format!("{:?}", self.t[k])];
            row.extend(self.x[k].iter().map(|v| format!("{v:?}")));
            row.extend(self.v[k].iter().map(|v| format!("{v:?}")));
            if let Some(z) = &self.z {
                row.push(format!("{:?}", z[k]));
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        std::fs::write(Self::manifest_path(path), serde_json::to_string_pretty(&self.manifest())?)?;
        Ok(())
    }

    /// Loads and validates a dataset file. The manifest is optional; when
    /// absent the whole file is treated as one open periodic demonstration
    /// whose period is the timestamp span. Missing velocity columns are
    /// filled by finite differences.
    pub fn load(path: impl AsRef<Path>) -> Result<OracleDataset> {
        let path = path.as_ref();
        let mpath = Self::manifest_path(path);
        let manifest: Option<DatasetManifest> = if mpath.exists() {
            Some(serde_json::from_str(&std::fs::read_to_string(&mpath)?)?)
        } else {
            None
        };
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(csv_err)?;
        let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let col = |name: &str| header.iter().position(|h| h == name);
        let t_col = col("t").ok_or_else(|| Error::Schema("missing column 't'".into()))?;
        let x_cols: Vec<usize> = (1..).map_while(|i| col(&format!("x_{i}"))).collect();
        let v_cols: Vec<usize> = (1..).map_while(|i| col(&format!("v_{i}"))).collect();
        let z_col = col("z");
        let n = x_cols.len();
        if n < 2 {
            return Err(Error::Schema("need at least columns x_1, x_2".into()));
        }
        if !v_cols.is_empty() && v_cols.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: v_cols.len() });
        }
        if let Some(m) = &manifest {
            if m.n != n {
                return Err(Error::DimensionMismatch { expected: m.n, found: n });
            }
        }
        let (mut t, mut x, mut v, mut z) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let num = |c: usize| -> Result<f64> {
                let s = rec.get(c).ok_or_else(|| Error::Schema(format!("row {} is short", line + 1)))?;
                s.parse::<f64>().map_err(|_| Error::Schema(format!("row {}: '{s}' is not a number", line + 1)))
            };
            t.push(num(t_col)?);
            x.push(x_cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>>>()?);
            if !v_cols.is_empty() {
                v.push(v_cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>>>()?);
            }
            if let Some(c) = z_col {
                z.push(num(c)?);
            }
        }
        if t.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        let len = t.len();
        let closed = manifest.as_ref().is_some_and(|m| m.closed);
        let z = z_col.map(|_| z);
        let mut ds = OracleDataset {
            t,
            x,
            v: Vec::new(),
            z,
            periodic: (0, len),
            period: 0.0,
            closed,
            units: "m".into(),
            normalization: None,
        };
        for i in 1..len {
            if !(ds.t[i] > ds.t[i - 1]) {
                return Err(Error::NonMonotoneTimestamps { index: i });
            }
        }
        ds.v = if v_cols.is_empty() {
            let mut v = Vec::with_capacity(len);
            for d in ds.demos() {
                v.extend(finite_difference_velocities(&ds.x[d.clone()], &ds.t[d], closed)?);
            }
            v
        } else {
            v
        };
        match manifest {
            Some(m) => {
                ds.periodic = (m.periodic_start, m.periodic_end);
                ds.period = m.period;
                ds.units = m.units;
                ds.normalization = m.normalization;
            }
            None => ds.period = ds.t[len - 1] - ds.t[0],
        }
        ds.validate()?;
        Ok(ds)
    }

    /// Loads a dataset and normalizes it unless it already is.
    pub fn load_normalized(path: impl AsRef<Path>) -> Result<OracleDataset> {
        let ds = Self::load(path)?;
        if ds.normalization.is_some() {
            Ok(ds)
        } else {
            Ok(ds.normalize()?.0)
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}
