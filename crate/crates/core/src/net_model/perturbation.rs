use nalgebra::DVector;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{Error, Result};
use crate::seed;

/// Gaussian law for injection amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianSpec {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance >= 0.0) || !mean.is_finite() {
            return Err(Error::invalid("gaussian variance must be non-negative"));
        }
        Ok(Self { mean, variance })
    }
}

/// One injection event at a sample index.
///
/// `updates` holds `(node, amplitude)` pairs. The linear model adds them to
/// the state; the swing model sets the load deviation of each listed bus.
/// `arrivals` counts the Poisson events that rounded onto this index.
#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    pub index: usize,
    pub arrivals: u32,
    pub updates: Vec<(usize, f64)>,
}

impl Injection {
    /// Dense amplitude vector `b_{k_i}` over `node_count` nodes.
    pub fn amplitude_vector(&self, node_count: usize) -> DVector<f64> {
        let mut b = DVector::zeros(node_count);
        for &(n, v) in &self.updates {
            b[n] += v;
        }
        b
    }
}

/// Sparse impulse perturbations `b_k = Σ b_{k_i} δ(k − k_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationProcess {
    injections: Vec<Injection>,
    rate: f64,
    amplitude: Option<GaussianSpec>,
    seed: u64,
}

/// Parameters of a Poisson injection process.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSpec {
    /// Expected injections per second.
    pub rate: f64,
    pub dt: f64,
    pub horizon: usize,
    pub targets: Vec<usize>,
    pub amplitude: GaussianSpec,
    pub seed: u64,
}

impl PerturbationProcess {
    pub fn none() -> Self {
        Self {
            injections: Vec::new(),
            rate: 0.0,
            amplitude: None,
            seed: 0,
        }
    }

    /// Explicit injection list; indices must be strictly increasing and `< horizon`.
    pub fn from_injections(injections: Vec<Injection>, horizon: usize) -> Result<Self> {
        for w in injections.windows(2) {
            if w[1].index <= w[0].index {
                return Err(Error::invalid("injection times must be strictly increasing"));
            }
        }
        if let Some(last) = injections.last() {
            if last.index >= horizon {
                return Err(Error::invalid(format!(
                    "injection at {} outside horizon {horizon}",
                    last.index
                )));
            }
        }
        Ok(Self {
            injections,
            rate: 0.0,
            amplitude: None,
            seed: 0,
        })
    }

    /// Poisson arrivals in continuous time rounded to sample indices; events
    /// that land on the same index share one amplitude draw per target.
    pub fn poisson(spec: &PoissonSpec) -> Result<Self> {
        if !(spec.rate >= 0.0) || !spec.rate.is_finite() {
            return Err(Error::invalid("rate must be non-negative"));
        }
        if !(spec.dt > 0.0) {
            return Err(Error::invalid("dt must be positive"));
        }
        let mut rng = seed::rng(spec.seed);
        let mut injections: Vec<Injection> = Vec::new();
        if spec.rate > 0.0 && !spec.targets.is_empty() {
            let exp = Exp::new(spec.rate).map_err(|e| Error::invalid(e.to_string()))?;
            let normal = Normal::new(spec.amplitude.mean, spec.amplitude.variance.sqrt())
                .map_err(|e| Error::invalid(e.to_string()))?;
            let end = spec.horizon as f64 * spec.dt;
            let mut t = 0.0;
            loop {
                t += exp.sample(&mut rng);
                if t >= end {
                    break;
                }
                let index = (t / spec.dt).round() as usize;
                if index >= spec.horizon {
                    break;
                }
                match injections.last_mut() {
                    Some(last) if last.index == index => last.arrivals += 1,
                    _ => injections.push(Injection {
                        index,
                        arrivals: 1,
                        updates: Vec::new(),
                    }),
                }
            }
            for inj in &mut injections {
                inj.updates = spec
                    .targets
                    .iter()
                    .map(|&n| (n, normal.sample(&mut rng)))
                    .collect();
            }
        }
        Ok(Self {
            injections,
            rate: spec.rate,
            amplitude: Some(spec.amplitude),
            seed: spec.seed,
        })
    }

    /// Union of two processes. Updates at a shared index are applied in
    /// order: `self` first, then `other`.
    pub fn merge(&self, other: &PerturbationProcess) -> PerturbationProcess {
        let mut all: Vec<Injection> = Vec::with_capacity(self.injections.len() + other.injections.len());
        let (mut i, mut j) = (0, 0);
        while i < self.injections.len() || j < other.injections.len() {
            let take_self = match (self.injections.get(i), other.injections.get(j)) {
                (Some(a), Some(b)) => a.index <= b.index,
                (Some(_), None) => true,
                _ => false,
            };
            let next = if take_self {
                i += 1;
                &self.injections[i - 1]
            } else {
                j += 1;
                &other.injections[j - 1]
            };
            match all.last_mut() {
                Some(last) if last.index == next.index => {
                    last.arrivals += next.arrivals;
                    last.updates.extend_from_slice(&next.updates);
                }
                _ => all.push(next.clone()),
            }
        }
        PerturbationProcess {
            injections: all,
            rate: self.rate + other.rate,
            amplitude: self.amplitude.or(other.amplitude),
            seed: self.seed ^ other.seed,
        }
    }

    pub fn injections(&self) -> &[Injection] {
        &self.injections
    }

    /// Total number of Poisson arrivals, counting coincident ones.
    pub fn arrival_count(&self) -> usize {
        self.injections.iter().map(|i| i.arrivals as usize).sum()
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn amplitude(&self) -> Option<GaussianSpec> {
        self.amplitude
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_empty(&self) -> bool {
        self.injections.is_empty()
    }

    pub fn first_index(&self) -> Option<usize> {
        self.injections.first().map(|i| i.index)
    }

    /// Serialize as CSV rows `index,arrivals,node,amplitude` (one-based node).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,arrivals,node,amplitude\n");
        for inj in &self.injections {
            for &(n, v) in &inj.updates {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    inj.index,
                    inj.arrivals,
                    n + 1,
                    crate::fmt_f64(v)
                ));
            }
        }
        out
    }

    /// Parse the output of [`PerturbationProcess::to_csv`].
    pub fn from_csv(text: &str, horizon: usize) -> Result<Self> {
        let mut injections: Vec<Injection> = Vec::new();
        for (ln, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |d: String| Error::Parse {
                path: "<schedule>".into(),
                line: ln + 1,
                detail: d,
            };
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(bad(format!("expected 4 fields, got {}", f.len())));
            }
            let index: usize = f[0].parse().map_err(|e| bad(format!("{e}")))?;
            let arrivals: u32 = f[1].parse().map_err(|e| bad(format!("{e}")))?;
            let node: usize = f[2].parse().map_err(|e| bad(format!("{e}")))?;
            let v: f64 = f[3].parse().map_err(|e| bad(format!("{e}")))?;
            if node == 0 {
                return Err(bad("node ids are one-based".into()));
            }
            match injections.last_mut() {
                Some(last) if last.index == index => last.updates.push((node - 1, v)),
                _ => injections.push(Injection {
                    index,
                    arrivals,
                    updates: vec![(node - 1, v)],
                }),
            }
        }
        Self::from_injections(injections, horizon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(rate: f64, seed: u64) -> PoissonSpec {
        PoissonSpec {
            rate,
            dt: 1e-3,
            horizon: 5000,
            targets: vec![0, 2],
            amplitude: GaussianSpec::new(0.0, 5.0).unwrap(),
            seed,
        }
    }

    #[test]
    fn zero_rate_is_empty() {
        let p = PerturbationProcess::poisson(&spec(0.0, 1)).unwrap();
        assert!(p.is_empty());
        assert_eq!(p.arrival_count(), 0);
    }

    #[test]
    fn indices_strictly_increasing_and_in_horizon() {
        let p = PerturbationProcess::poisson(&spec(500.0, 3)).unwrap();
        for w in p.injections().windows(2) {
            assert!(w[0].index < w[1].index);
        }
        assert!(p.injections().iter().all(|i| i.index < 5000));
    }

    #[test]
    fn rejects_unsorted_and_negative_rate() {
        let inj = |index| Injection {
            index,
            arrivals: 1,
            updates: vec![],
        };
        assert!(PerturbationProcess::from_injections(vec![inj(3), inj(3)], 10).is_err());
        assert!(PerturbationProcess::from_injections(vec![inj(10)], 10).is_err());
        assert!(PerturbationProcess::poisson(&spec(-1.0, 0)).is_err());
    }

    #[test]
    fn merge_keeps_order_and_combines_coincident() {
        let a = PerturbationProcess::from_injections(
            vec![
                Injection { index: 1, arrivals: 1, updates: vec![(0, 1.0)] },
                Injection { index: 5, arrivals: 1, updates: vec![(0, 2.0)] },
            ],
            10,
        )
        .unwrap();
        let b = PerturbationProcess::from_injections(
            vec![
                Injection { index: 3, arrivals: 1, updates: vec![(1, 3.0)] },
                Injection { index: 5, arrivals: 2, updates: vec![(1, 4.0)] },
            ],
            10,
        )
        .unwrap();
        let m = a.merge(&b);
        let idx: Vec<usize> = m.injections().iter().map(|i| i.index).collect();
        assert_eq!(idx, vec![1, 3, 5]);
        assert_eq!(m.injections()[2].updates, vec![(0, 2.0), (1, 4.0)]);
        assert_eq!(m.arrival_count(), 5);
    }

    #[test]
    fn csv_round_trip() {
        let p = PerturbationProcess::poisson(&spec(50.0, 9)).unwrap();
        let back = PerturbationProcess::from_csv(&p.to_csv(), 5000).unwrap();
        assert_eq!(back.injections(), p.injections());
    }
}
