use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::table::{parse_eve_role, ResultRow, ResultTable, Sweep, LEGITIMATE};
use crate::error::{Error, Result};
use crate::fmt_f64;

/// Figures that plot data can be produced for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Mean BER against noise variance, per role.
    Fig3a,
    /// Eve's reconstruction RMSE against hacked fraction, per noise variance.
    Fig3b,
    /// BER bucket fractions against noise variance, per role and bucket.
    Fig4,
    /// Mean BER against jamming rate, per noise variance.
    Fig5,
    /// BER bucket fractions against jamming rate, per noise variance and bucket.
    Fig6,
}

impl Figure {
    pub const ALL: [Figure; 5] = [Figure::Fig3a, Figure::Fig3b, Figure::Fig4, Figure::Fig5, Figure::Fig6];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig3a => "fig3a",
            Figure::Fig3b => "fig3b",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown figure {s:?}")))
    }
}

/// One curve: `(x, y)` points sorted by `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y\n");
        for &(x, y) in &self.points {
            out.push_str(&format!("{},{}\n", fmt_f64(x), fmt_f64(y)));
        }
        out
    }
}

const BUCKET_NAMES: [&str; 3] = ["below-1e-3", "1e-3-to-1e-1", "above-1e-1"];

fn slug(role: &str) -> String {
    role.replace('%', "pct")
}

fn var_label(v: f64) -> String {
    format!("noise-{v:e}")
}

fn sorted(mut points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    points
}

/// Group rows of a sweep by a key, keeping first-seen order.
fn group<'a, K: Ord + Clone>(rows: impl Iterator<Item = &'a ResultRow>, key: impl Fn(&ResultRow) -> K) -> BTreeMap<K, Vec<&'a ResultRow>> {
    let mut m: BTreeMap<K, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        m.entry(key(r)).or_default().push(r);
    }
    m
}

/// Curves of a figure. Fails if the table lacks any of them.
pub fn figure_series(table: &ResultTable, figure: Figure) -> Result<Vec<Series>> {
    let missing = |what: &str| Error::invalid(format!("{}: table has no {what}", figure.name()));
    let noise = table.rows.iter().filter(|r| r.sweep == Sweep::Noise);
    let jamming = table.rows.iter().filter(|r| r.sweep == Sweep::Jamming);
    let mut out = Vec::new();
    match figure {
        Figure::Fig3a | Figure::Fig4 => {
            let by_role = group(noise, |r| role_order(&r.role));
            if !by_role.keys().any(|(_, _, role)| role == LEGITIMATE) {
                return Err(missing("legitimate noise-sweep rows"));
            }
            for ((_, _, role), rows) in by_role {
                if figure == Figure::Fig3a {
                    out.push(Series {
                        name: format!("fig3a_{}", slug(&role)),
                        points: sorted(rows.iter().map(|r| (r.sweep_value, r.mean_ber)).collect()),
                    });
                } else {
                    for (b, bname) in BUCKET_NAMES.iter().enumerate() {
                        out.push(Series {
                            name: format!("fig4_{}_{bname}", slug(&role)),
                            points: sorted(rows.iter().map(|r| (r.sweep_value, r.buckets[b])).collect()),
                        });
                    }
                }
            }
        }
        Figure::Fig3b => {
            let by_var = group(noise.filter(|r| r.rmse.is_some()), |r| r.noise_variance.to_bits());
            if by_var.is_empty() {
                return Err(missing("eavesdropper RMSE rows"));
            }
            for (bits, rows) in by_var {
                let mut points = Vec::new();
                for r in rows {
                    let f = parse_eve_role(&r.role).ok_or_else(|| missing("eavesdropper role labels"))?;
                    points.push((f, r.rmse.unwrap_or(f64::NAN)));
                }
                out.push(Series {
                    name: format!("fig3b_{}", var_label(f64::from_bits(bits))),
                    points: sorted(points),
                });
            }
        }
        Figure::Fig5 | Figure::Fig6 => {
            let by_var = group(jamming, |r| r.noise_variance.to_bits());
            if by_var.is_empty() {
                return Err(missing("jamming-sweep rows"));
            }
            for (bits, rows) in by_var {
                let label = var_label(f64::from_bits(bits));
                if figure == Figure::Fig5 {
                    out.push(Series {
                        name: format!("fig5_{label}"),
                        points: sorted(rows.iter().map(|r| (r.sweep_value, r.mean_ber)).collect()),
                    });
                } else {
                    for (b, bname) in BUCKET_NAMES.iter().enumerate() {
                        out.push(Series {
                            name: format!("fig6_{label}_{bname}"),
                            points: sorted(rows.iter().map(|r| (r.sweep_value, r.buckets[b])).collect()),
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Legitimate first, then eavesdroppers by fraction, then anything else.
fn role_order(role: &str) -> (u8, u64, String) {
    if role == LEGITIMATE {
        (0, 0, role.to_string())
    } else if let Some(f) = parse_eve_role(role) {
        (1, f.to_bits(), role.to_string())
    } else {
        (2, 0, role.to_string())
    }
}

/// Write one `x,y` CSV per curve of `figure` into `dir`. Every series is
/// built before anything is written, so a failure leaves no files behind.
pub fn emit_plot_data(table: &ResultTable, figure: Figure, dir: &Path) -> Result<Vec<PathBuf>> {
    if table.is_empty() {
        return Err(Error::invalid("empty result table"));
    }
    let series = figure_series(table, figure)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(series.len());
    for s in &series {
        let path = dir.join(format!("{}.csv", s.name));
        if let Err(e) = std::fs::write(&path, s.to_csv()) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            return Err(Error::io(&path, e));
        }
        written.push(path);
    }
    Ok(written)
}
