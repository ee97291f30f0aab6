//! Bus-data file reader.
//!
//! The file is a CSV made of three blocks separated by blank lines, each
//! introduced by its own header row (bus numbers are one-based):
//!
//! ```text
//! from,to,G,B            # one row per branch: series conductance/susceptance (p.u.)
//! bus,H,K_P,K_I,D        # one row per generator bus
//! bus,PL_mean,PL_var     # one row per load bus: reference load and its variance (p.u.)
//! ```
//!
//! Branch rows carry the series admittance `g + jb` of the line; the bus
//! admittance matrix is assembled as `Y_ij -= y`, `Y_ii += y`. Lines starting
//! with `#` are comments.

use std::path::Path;

use nalgebra::DMatrix;

use super::swing::{GeneratorParams, LoadParams, SwingParams};
use super::topology::NetworkTopology;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub conductance: f64,
    pub susceptance: f64,
}

/// Parsed bus-data file (zero-based indices).
#[derive(Debug, Clone, PartialEq)]
pub struct BusData {
    pub node_count: usize,
    pub branches: Vec<Branch>,
    pub generators: Vec<GeneratorParams>,
    pub loads: Vec<LoadParams>,
}

#[derive(Clone, Copy, PartialEq)]
enum Block {
    None,
    Branch,
    Generator,
    Load,
}

impl BusData {
    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingData(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, name: &str) -> Result<Self> {
        let mut block = Block::None;
        let mut branches = Vec::new();
        let mut generators = Vec::new();
        let mut loads = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |detail: String| Error::Parse {
                path: name.to_string(),
                line: ln + 1,
                detail,
            };
            let header: String = line.chars().filter(|c| !c.is_whitespace()).collect();
            match header.as_str() {
                "from,to,G,B" => {
                    block = Block::Branch;
                    continue;
                }
                "bus,H,K_P,K_I,D" => {
                    block = Block::Generator;
                    continue;
                }
                "bus,PL_mean,PL_var" => {
                    block = Block::Load;
                    continue;
                }
                _ => {}
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let num = |i: usize| -> Result<f64> {
                fields
                    .get(i)
                    .ok_or_else(|| err(format!("missing field {}", i + 1)))?
                    .parse::<f64>()
                    .map_err(|e| err(format!("field {}: {e}", i + 1)))
            };
            let bus = |i: usize| -> Result<usize> {
                let v: usize = fields
                    .get(i)
                    .ok_or_else(|| err(format!("missing field {}", i + 1)))?
                    .parse()
                    .map_err(|e| err(format!("field {}: {e}", i + 1)))?;
                if v == 0 {
                    return Err(err("bus numbers are one-based".into()));
                }
                Ok(v - 1)
            };
            let expect = |n: usize| -> Result<()> {
                if fields.len() == n {
                    Ok(())
                } else {
                    Err(err(format!("expected {n} fields, got {}", fields.len())))
                }
            };
            match block {
                Block::None => return Err(err("data row before any block header".into())),
                Block::Branch => {
                    expect(4)?;
                    branches.push(Branch {
                        from: bus(0)?,
                        to: bus(1)?,
                        conductance: num(2)?,
                        susceptance: num(3)?,
                    });
                }
                Block::Generator => {
                    expect(5)?;
                    generators.push(GeneratorParams {
                        bus: bus(0)?,
                        inertia: num(1)?,
                        kp: num(2)?,
                        ki: num(3)?,
                        damping: num(4)?,
                    });
                }
                Block::Load => {
                    expect(3)?;
                    loads.push(LoadParams {
                        bus: bus(0)?,
                        mean: num(1)?,
                        variance: num(2)?,
                    });
                }
            }
        }
        let node_count = branches
            .iter()
            .flat_map(|b| [b.from, b.to])
            .chain(generators.iter().map(|g| g.bus))
            .chain(loads.iter().map(|l| l.bus))
            .max()
            .map_or(0, |m| m + 1);
        if node_count == 0 {
            return Err(Error::Parse {
                path: name.to_string(),
                line: 0,
                detail: "no buses defined".into(),
            });
        }
        Ok(Self {
            node_count,
            branches,
            generators,
            loads,
        })
    }

    pub fn topology(&self) -> Result<NetworkTopology> {
        let links: Vec<(usize, usize)> = self.branches.iter().map(|b| (b.from, b.to)).collect();
        let gens: Vec<usize> = self.generators.iter().map(|g| g.bus).collect();
        NetworkTopology::undirected(self.node_count, &links, &gens)
    }

    /// Assemble the bus admittance matrix `Y = G + jB`.
    pub fn admittance(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.node_count;
        let mut g = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, n);
        for br in &self.branches {
            let (i, j) = (br.from, br.to);
            g[(i, j)] -= br.conductance;
            g[(j, i)] -= br.conductance;
            b[(i, j)] -= br.susceptance;
            b[(j, i)] -= br.susceptance;
            g[(i, i)] += br.conductance;
            g[(j, j)] += br.conductance;
            b[(i, i)] += br.susceptance;
            b[(j, j)] += br.susceptance;
        }
        (g, b)
    }

    pub fn swing_params(&self) -> Result<SwingParams> {
        let (g, b) = self.admittance();
        let mut loads = self.loads.clone();
        loads.sort_by_key(|l| l.bus);
        let mut generators = self.generators.clone();
        generators.sort_by_key(|g| g.bus);
        SwingParams::new(g, b, generators, loads, super::swing::SYNC_SPEED)
    }

    /// Topology and swing parameters in one go.
    pub fn load_model(path: &Path) -> Result<(NetworkTopology, SwingParams)> {
        let data = Self::read(path)?;
        let topo = data.topology()?;
        let params = data.swing_params()?;
        params.check_topology(&topo)?;
        Ok((topo, params))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "from,to,G,B\n1,2,1.0,-10.0\n2,3,0.5,-5.0\n\nbus,H,K_P,K_I,D\n3,5.0,1.0,1.0,1.0\n\nbus,PL_mean,PL_var\n1,0.5,0.01\n2,0.2,0.01\n";

    #[test]
    fn parses_blocks() {
        let d = BusData::parse(SMALL, "small").unwrap();
        assert_eq!(d.node_count, 3);
        assert_eq!(d.branches.len(), 2);
        assert_eq!(d.generators[0].bus, 2);
        assert_eq!(d.loads.len(), 2);
        let (g, b) = d.admittance();
        assert_eq!(g[(0, 1)], -1.0);
        assert_eq!(b[(1, 1)], -15.0);
        assert_eq!(g, g.transpose());
        let t = d.topology().unwrap();
        assert_eq!(t.link_count(), 4);
        assert_eq!(t.generators(), &[2]);
    }

    #[test]
    fn rejects_malformed_rows() {
        assert!(BusData::parse("1,2,3,4\n", "x").is_err());
        assert!(BusData::parse("from,to,G,B\n1,2,abc,4\n", "x").is_err());
        assert!(BusData::parse("from,to,G,B\n0,2,1,4\n", "x").is_err());
        assert!(BusData::parse("from,to,G,B\n1,2,1\n", "x").is_err());
    }

    #[test]
    fn missing_file_is_reported() {
        let e = BusData::read(Path::new("/definitely/not/here.csv")).unwrap_err();
        assert_eq!(e.category(), "missing-data");
    }
}
