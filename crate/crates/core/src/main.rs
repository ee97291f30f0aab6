use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gls::adversary::{eve_decrypt, greedy_sampling_set, reconstruct_dynamics, PassiveEveConfig};
use gls::experiments::{emit_plot_data, plans_for, run_scenario, Figure, ResultTable, Scenario, ScenarioConfig};
use gls::gft::GftSurrogate;
use gls::linalg::select_rows;
use gls::net_model::{noise_rows, DynamicsTrace};
use gls::pipeline::{transmit, BitStream};
use gls::secrecy::{read_plans, write_plans, RelayPlan};
use gls::seed::{self, tag};
use gls::{fmt_f64, Error, Result};

#[derive(Parser)]
#[command(name = "gls", version, about = "Graph layer security experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the transmission trace (or a training trace) of one trial.
    Simulate {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Write training run D instead of the transmission trace.
        #[arg(long)]
        training_run: Option<usize>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Fit the GFT surrogate from a trial's training runs.
    TrainGft {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Optimise relay plans for the configured pairs.
    SelectRelays {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        surrogate: PathBuf,
        #[arg(long)]
        noise_variance: f64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Transmit random bits through each plan over a noisy trace.
    RunBer {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        surrogate: PathBuf,
        #[arg(long)]
        plans: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        noise_variance: f64,
        /// Directory for per-pair audit trails.
        #[arg(long)]
        audit: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Passive eavesdropper with a hacked fraction of sensors.
    AttackPassive {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        surrogate: PathBuf,
        #[arg(long)]
        plans: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        noise_variance: f64,
        #[arg(long)]
        fraction: f64,
        /// Write the reconstructed network signal.
        #[arg(long)]
        recovery: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Transmission trace of one trial under jamming.
    AttackActive {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(short, long)]
        out: PathBuf,
        /// Write the injection schedule.
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Run every configured sweep and write the result table.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Plot-ready series files from a result table.
    PlotData {
        #[arg(short, long)]
        table: PathBuf,
        /// fig3a, fig3b, fig4, fig5, fig6 or all.
        #[arg(short, long)]
        figure: String,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn scenario(path: &Path) -> Result<Scenario> {
    Scenario::new(ScenarioConfig::load(path)?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            Ok(())
        }
    }
}

/// Noisy measurement of a stored trace in the surrogate's signal mode.
fn measured(sc: &Scenario, s: &GftSurrogate, trace: &Path, var: f64, role: &str) -> Result<(DynamicsTrace, nalgebra::DMatrix<f64>)> {
    let tr = DynamicsTrace::read_csv(trace, sc.dt())?;
    let n = tr.node_count();
    let noise = noise_rows(&(0..n).collect::<Vec<_>>(), tr.horizon(), var, seed::derive(sc.config.seed, &[tag(role)]));
    let m = s.mode().apply(&(tr.values() + noise))?;
    Ok((tr, m))
}

fn bits_for(sc: &Scenario, len: usize, k: usize) -> Vec<u8> {
    BitStream::random(len, seed::derive(sc.config.seed, &[tag("bits"), 0, k as u64])).bits
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            trial,
            training_run,
            out,
        } => {
            let sc = scenario(&config)?;
            let tr = match training_run {
                Some(d) => sc
                    .training_traces(trial)?
                    .into_iter()
                    .nth(d)
                    .ok_or_else(|| Error::InvalidInput(format!("training run {d} out of range")))?,
                None => sc.transmission_trace(trial)?,
            };
            tr.write_csv(&out)
        }
        Command::TrainGft { config, trial, out } => {
            let s = scenario(&config)?.fit(trial)?;
            s.save(&out)?;
            println!("rank {} mode {}", s.rank(), s.mode().name());
            Ok(())
        }
        Command::SelectRelays {
            config,
            surrogate,
            noise_variance,
            out,
        } => {
            let sc = scenario(&config)?;
            let s = GftSurrogate::load(&surrogate)?;
            let all = plans_for(&sc, &s, noise_variance);
            let failed = all.iter().filter(|p| p.is_none()).count();
            let plans: Vec<RelayPlan> = all.into_iter().flatten().collect();
            write_plans(&out, &plans)?;
            println!("plans {} failed {failed}", plans.len());
            Ok(())
        }
        Command::RunBer {
            config,
            surrogate,
            plans,
            trace,
            noise_variance,
            audit,
            out,
        } => {
            let sc = scenario(&config)?;
            let s = GftSurrogate::load(&surrogate)?;
            let (_, m) = measured(&sc, &s, &trace, noise_variance, "noise")?;
            if let Some(dir) = &audit {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                    path: dir.clone(),
                    source: e,
                })?;
            }
            let mut text = String::from("tx,rx,ber\n");
            for (k, p) in read_plans(&plans)?.iter().enumerate() {
                let bits = bits_for(&sc, m.ncols(), k);
                let rec = transmit(p, &m, &bits, sc.config.amplitude)?;
                if let Some(dir) = &audit {
                    rec.write_csv(&dir.join(format!("pair_{}_{}.csv", p.tx + 1, p.rx + 1)))?;
                }
                text.push_str(&format!("{},{},{}\n", p.tx + 1, p.rx + 1, fmt_f64(rec.ber(&bits)?)));
            }
            emit(out.as_deref(), &text)
        }
        Command::AttackPassive {
            config,
            surrogate,
            plans,
            trace,
            noise_variance,
            fraction,
            recovery,
            out,
        } => {
            let sc = scenario(&config)?;
            let s = GftSurrogate::load(&surrogate)?;
            let (tr, m) = measured(&sc, &s, &trace, noise_variance, "noise")?;
            let eve_var = sc
                .config
                .passive
                .as_ref()
                .and_then(|p| p.noise_variance)
                .unwrap_or(noise_variance);
            let (_, eve_m) = measured(&sc, &s, &trace, eve_var, "eve-noise")?;
            let size = PassiveEveConfig::new(fraction)?.sample_size(tr.node_count());
            let truth = s.mode().apply(tr.values())?;
            let report = if size == 0 {
                None
            } else {
                let set = greedy_sampling_set(s.surrogate(), size)?;
                let r = reconstruct_dynamics(s.surrogate(), &set.nodes, &select_rows(&eve_m, &set.nodes), Some(&truth))?;
                eprintln!(
                    "sampled {:?} condition {:e} rmse {:e}",
                    set.nodes.iter().map(|i| i + 1).collect::<Vec<_>>(),
                    set.condition,
                    r.rmse.unwrap_or(f64::NAN)
                );
                Some(r)
            };
            if let (Some(path), Some(r)) = (&recovery, &report) {
                r.write_csv(path, &truth)?;
            }
            let mut text = String::from("tx,rx,eve_ber\n");
            for (k, p) in read_plans(&plans)?.iter().enumerate() {
                let bits = bits_for(&sc, m.ncols(), k);
                let rec = transmit(p, &m, &bits, sc.config.amplitude)?;
                let row: Option<Vec<f64>> = report.as_ref().map(|r| r.reconstructed.row(p.tx).iter().copied().collect());
                let eve = eve_decrypt(rec.ciphertext(), row.as_deref(), p.weights[p.tx], &bits, sc.config.amplitude)?;
                text.push_str(&format!("{},{},{}\n", p.tx + 1, p.rx + 1, fmt_f64(eve.ber)));
            }
            emit(out.as_deref(), &text)
        }
        Command::AttackActive {
            config,
            rate,
            trial,
            out,
            schedule,
        } => {
            let sc = scenario(&config)?;
            let mut attack = match sc.config.active {
                Some(_) => sc.attack(trial, 0)?,
                None => gls::adversary::ActiveAttackConfig::new(
                    rate,
                    5.0,
                    sc.perturbable_nodes(),
                    seed::derive(sc.config.seed, &[tag("jamming"), trial as u64, 0]),
                )?,
            };
            attack.jamming_rate = rate;
            let (tr, jam) = sc.jammed_trace(trial, &attack)?;
            tr.write_csv(&out)?;
            if let Some(p) = schedule {
                write_text(&p, &jam.to_csv())?;
            }
            println!("injections {}", jam.injections().len());
            Ok(())
        }
        Command::Sweep { config, out } => {
            let table = run_scenario(&scenario(&config)?)?;
            table.export_csv(&out)?;
            println!("rows {}", table.rows.len());
            Ok(())
        }
        Command::PlotData { table, figure, out } => {
            let figures = if figure == "all" {
                Figure::ALL.to_vec()
            } else {
                vec![Figure::parse(&figure)?]
            };
            let t = ResultTable::import_csv(&table)?;
            for f in figures {
                for p in emit_plot_data(&t, f, &out)? {
                    println!("{}", p.display());
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
