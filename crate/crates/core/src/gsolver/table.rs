use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::grid::SpatialGrid;
use super::SolverSettings;
use crate::error::{Error, Result};
use crate::hawkes::HawkesParams;
use crate::market::MarketParams;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "mvhawkes-gtable";

/// Solution values on one time slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub time: f64,
    pub grid: SpatialGrid,
    /// g̃ at each node, flat in grid order.
    pub values: Vec<f64>,
    /// Monte Carlo standard error of each value (zero on the terminal slice).
    pub std_err: Vec<f64>,
}

impl Slice {
    #[inline]
    pub fn interpolate(&self, lambda: &[f64]) -> (f64, bool) {
        self.grid.interpolate(&self.values, lambda)
    }

    pub fn interpolate_std_err(&self, lambda: &[f64]) -> f64 {
        self.grid.interpolate(&self.std_err, lambda).0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub format_version: u32,
    pub settings: SolverSettings,
    pub hawkes: HawkesParams,
    pub market: MarketParams,
    pub hawkes_hash: String,
    pub market_hash: String,
    pub interpolation: String,
    pub sampling: String,
    /// Number of off-grid lookups that had to be clamped during the solve.
    pub clamped_lookups: u64,
}

/// The solved surface g̃(t, λ) = e^{g(t, λ)} on a backward time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GTable {
    pub meta: TableMeta,
    /// `slices[i]` holds time `i·Δt`; the last slice is the terminal one.
    pub slices: Vec<Slice>,
}

#[derive(Serialize, Deserialize)]
struct Header<'a> {
    magic: &'a str,
    #[serde(flatten)]
    meta: TableMeta,
    slices: usize,
}

impl GTable {
    pub fn dt(&self) -> f64 {
        self.meta.settings.dt
    }

    pub fn horizon(&self) -> f64 {
        self.meta.settings.horizon
    }

    pub fn dim(&self) -> usize {
        self.meta.hawkes.dim()
    }

    /// Slice nearest to time `t` (clamped to the table's time range).
    #[inline]
    pub fn slice_at(&self, t: f64) -> &Slice {
        let last = self.slices.len() - 1;
        let i = (t / self.dt()).round();
        let i = if i <= 0.0 { 0 } else { (i as usize).min(last) };
        &self.slices[i]
    }

    /// Value at `(0, lambda)`.
    pub fn initial_value(&self, lambda: &[f64]) -> Result<f64> {
        eval_g(self, 0.0, lambda)
    }

    /// Monte Carlo standard error at `(0, lambda)`, interpolated like the value.
    pub fn initial_std_err(&self, lambda: &[f64]) -> f64 {
        self.slices[0].interpolate_std_err(lambda)
    }

    pub fn total_points(&self) -> usize {
        self.slices.iter().map(|s| s.values.len()).sum()
    }

    /// Self-describing text container: one JSON header line, then one JSON line per slice.
    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        let header = Header {
            magic: MAGIC,
            meta: self.meta.clone(),
            slices: self.slices.len(),
        };
        serde_json::to_writer(&mut w, &header).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w)?;
        for s in &self.slices {
            serde_json::to_writer(&mut w, s).map_err(|e| Error::Format(e.to_string()))?;
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        use std::io::BufRead;
        let mut lines = BufReader::new(r).lines();
        let first = lines.next().ok_or_else(|| Error::Format("missing header".into()))??;
        let header: Header = serde_json::from_str(&first).map_err(|e| Error::Format(e.to_string()))?;
        if header.magic != MAGIC {
            return Err(Error::Format(format!("bad magic `{}`", header.magic)));
        }
        if header.meta.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format version {}",
                header.meta.format_version
            )));
        }
        let mut slices = Vec::with_capacity(header.slices);
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            slices.push(serde_json::from_str(&line).map_err(|e| Error::Format(e.to_string()))?);
        }
        if slices.len() != header.slices {
            return Err(Error::Format(format!(
                "expected {} slices, found {}",
                header.slices,
                slices.len()
            )));
        }
        Ok(GTable {
            meta: header.meta,
            slices,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        self.write_to(std::fs::File::create(&tmp)?)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }

    /// CSV export with columns `t, lambda_1..lambda_m, g_tilde, std_err`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        let m = self.dim();
        let mut head = vec!["t".to_string()];
        head.extend((1..=m).map(|l| format!("lambda_{l}")));
        head.push("g_tilde".into());
        head.push("std_err".into());
        writeln!(w, "{}", head.join(","))?;
        for s in &self.slices {
            for idx in 0..s.values.len() {
                let mut row = vec![format_float(s.time)];
                row.extend(s.grid.node(idx).into_iter().map(format_float));
                row.push(format_float(s.values[idx]));
                row.push(format_float(s.std_err[idx]));
                writeln!(w, "{}", row.join(","))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// g̃ at `(t, lambda)`: `t` snaps to the nearest slice, `lambda` is
/// interpolated multilinearly and clamped (with a warning) outside the slice.
pub fn eval_g(table: &GTable, t: f64, lambda: &[f64]) -> Result<f64> {
    if table.slices.is_empty() {
        return Err(Error::EmptyTable);
    }
    let horizon = table.horizon();
    if !(t >= 0.0 && t <= horizon * (1.0 + 1e-12)) {
        return Err(Error::param("t", format!("must lie in [0, {horizon}]")));
    }
    if lambda.len() != table.dim() {
        return Err(Error::param("lambda", format!("expected {} components", table.dim())));
    }
    let slice = table.slice_at(t);
    let (v, clamped) = slice.interpolate(lambda);
    if clamped {
        log::warn!(
            "lambda {lambda:?} outside the grid of slice t = {}; clamped to the boundary",
            slice.time
        );
    }
    Ok(v)
}

/// Fixed 17-significant-digit rendering used for every CSV number.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("parameters serialize");
    hex::encode(&Sha256::digest(bytes)[..12])
}

pub fn hawkes_hash(h: &HawkesParams) -> String {
    // λ₀ does not enter the surface, only where it is read.
    digest(&(&h.lambda_inf, &h.alpha, &h.beta))
}

/// Hash of the market fields the solver depends on (the sampling law is excluded).
pub fn market_hash(m: &MarketParams) -> String {
    digest(&(m.r, &m.mu, &m.sigma, &m.jump_scale, &m.jump_mean, &m.jump_second))
}

/// Cache key identifying a solve.
pub fn cache_key(h: &HawkesParams, m: &MarketParams, s: &SolverSettings) -> String {
    digest(&(hawkes_hash(h), market_hash(m), s, FORMAT_VERSION))
}
