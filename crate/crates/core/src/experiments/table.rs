use std::path::Path;

use crate::error::{Error, Result};
use crate::fmt_f64;

/// Column order of exported tables.
pub const HEADER: [&str; 13] = [
    "scenario",
    "sweep",
    "sweep_value",
    "noise_variance",
    "role",
    "mean_ber",
    "frac_below_1e-3",
    "frac_1e-3_to_1e-1",
    "frac_above_1e-1",
    "rmse",
    "pairs",
    "failures",
    "seed",
];

/// Upper edges of the low and middle BER buckets.
pub const BUCKET_EDGES: [f64; 2] = [1e-3, 1e-1];

/// Which sweep a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sweep {
    Noise,
    Jamming,
}

impl Sweep {
    pub fn name(self) -> &'static str {
        match self {
            Sweep::Noise => "noise",
            Sweep::Jamming => "jamming",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "noise" => Some(Sweep::Noise),
            "jamming" => Some(Sweep::Jamming),
            _ => None,
        }
    }
}

/// Role label of a legitimate receiver.
pub const LEGITIMATE: &str = "legitimate";

/// `eve-5%` for fraction 0.05.
pub fn eve_role(fraction: f64) -> String {
    let pct = (fraction * 100.0 * 1e9).round() / 1e9;
    format!("eve-{pct}%")
}

/// Inverse of [`eve_role`].
pub fn parse_eve_role(role: &str) -> Option<f64> {
    role.strip_prefix("eve-")?.strip_suffix('%')?.parse::<f64>().ok().map(|p| p / 100.0)
}

/// `jam-rate-100` for 100 injections per second.
pub fn jam_role(rate: f64) -> String {
    format!("jam-rate-{rate}")
}

/// One aggregated (sweep point, role) result.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub sweep: Sweep,
    /// `σ²` for the noise sweep, the jamming rate for the jamming sweep.
    pub sweep_value: f64,
    pub noise_variance: f64,
    pub role: String,
    pub mean_ber: f64,
    /// Fractions of pairs whose trial-averaged BER falls below 1e-3,
    /// in [1e-3, 1e-1], and above 1e-1.
    pub buckets: [f64; 3],
    pub rmse: Option<f64>,
    /// Pairs with at least one successful trial.
    pub pairs: usize,
    /// (pair, trial) combinations whose relay selection failed.
    pub failures: usize,
    pub seed: u64,
}

/// Bucket fractions of per-pair BERs.
pub fn bucket_fractions(bers: &[f64]) -> [f64; 3] {
    let mut counts = [0usize; 3];
    for &b in bers {
        let k = if b < BUCKET_EDGES[0] {
            0
        } else if b <= BUCKET_EDGES[1] {
            1
        } else {
            2
        };
        counts[k] += 1;
    }
    let n = bers.len().max(1) as f64;
    counts.map(|c| c as f64 / n)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

fn parse_err(path: &str, line: usize, detail: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        detail: detail.into(),
    }
}

impl ResultTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows_for<'a>(&'a self, sweep: Sweep, role: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.sweep == sweep && r.role == role)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::invalid(e.to_string());
        w.write_record(HEADER).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.scenario.clone(),
                r.sweep.name().to_string(),
                fmt_f64(r.sweep_value),
                fmt_f64(r.noise_variance),
                r.role.clone(),
                fmt_f64(r.mean_ber),
                fmt_f64(r.buckets[0]),
                fmt_f64(r.buckets[1]),
                fmt_f64(r.buckets[2]),
                r.rmse.map(fmt_f64).unwrap_or_default(),
                r.pairs.to_string(),
                r.failures.to_string(),
                r.seed.to_string(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str, name: &str) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = rd.headers().map_err(|e| parse_err(name, 1, e.to_string()))?;
        if header.iter().ne(HEADER.iter().copied()) {
            return Err(parse_err(name, 1, "unexpected header"));
        }
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| parse_err(name, line, e.to_string()))?;
            let f = |k: usize| -> Result<f64> {
                rec[k]
                    .parse::<f64>()
                    .map_err(|e| parse_err(name, line, format!("{}: {e}", HEADER[k])))
            };
            let u = |k: usize| -> Result<u64> {
                rec[k]
                    .parse::<u64>()
                    .map_err(|e| parse_err(name, line, format!("{}: {e}", HEADER[k])))
            };
            rows.push(ResultRow {
                scenario: rec[0].to_string(),
                sweep: Sweep::parse(&rec[1]).ok_or_else(|| parse_err(name, line, "unknown sweep"))?,
                sweep_value: f(2)?,
                noise_variance: f(3)?,
                role: rec[4].to_string(),
                mean_ber: f(5)?,
                buckets: [f(6)?, f(7)?, f(8)?],
                rmse: if rec[9].is_empty() { None } else { Some(f(9)?) },
                pairs: u(10)? as usize,
                failures: u(11)? as usize,
                seed: u(12)?,
            });
        }
        Ok(Self { rows })
    }

    pub fn export_csv(&self, path: &Path) -> Result<()> {
        if self.is_empty() {
            return Err(Error::invalid("refusing to export an empty table"));
        }
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }

    pub fn import_csv(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingData(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, &path.display().to_string())
    }
}
