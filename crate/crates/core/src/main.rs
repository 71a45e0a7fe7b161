use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use diosense::arrays::{
    coarray_lags, design_coprime_array, design_diophantine_array, ArrayGeometry,
};
use diosense::diophantine::{build_schedule, delay_bound, solve_scheme};
use diosense::harness::{self, emit_csv, run_experiment, spearman, ExperimentConfig, Method, Mode};
use diosense::{Error, Result};

#[derive(Parser)]
#[command(
    name = "diosense",
    version,
    about = "Diophantine sparse sampling and sparse array toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the scheme for three rates and print its sample schedule.
    DesignScheme {
        /// Three pairwise-distinct down-sampling rates.
        #[arg(long, value_delimiter = ',', default_values_t = [2u64, 3, 5])]
        rates: Vec<u64>,
        /// Added to every rate.
        #[arg(long, default_value_t = 0)]
        gamma: u64,
        #[arg(long, default_value_t = 8)]
        lags: u64,
        #[arg(long, default_value_t = 4)]
        snapshots: u64,
    },
    /// Print sensor positions with their subarray labels.
    DesignArray(ArraySpec),
    /// Coarray lags with witness counts, followed by a summary.
    CoarrayReport(ArraySpec),
    /// One frequency-estimation trial.
    SimulateFreq(SimulateArgs),
    /// One direction-of-arrival trial.
    SimulateDoa(SimulateArgs),
    /// Monte-Carlo RMSE sweep over SNR.
    SweepSnr {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Leave out the timing column so repeated runs are byte-identical.
        #[arg(long)]
        no_runtime_column: bool,
    },
}

#[derive(Args)]
struct ArraySpec {
    #[arg(long, requires_all = ["p2", "q"], conflicts_with = "coprime")]
    p1: Option<u64>,
    #[arg(long)]
    p2: Option<u64>,
    #[arg(long)]
    q: Option<u64>,
    /// Co-prime baseline `M1,M2` instead of a three-subarray design.
    #[arg(long, value_delimiter = ',')]
    coprime: Option<Vec<u64>>,
}

impl ArraySpec {
    fn geometry(&self) -> Result<ArrayGeometry> {
        match (&self.coprime, self.p1, self.p2, self.q) {
            (Some(m), ..) => match m.as_slice() {
                [m1, m2] => design_coprime_array(*m1, *m2),
                _ => Err(Error::InvalidArgument("--coprime expects M1,M2".into())),
            },
            (None, Some(p1), Some(p2), Some(q)) => design_diophantine_array(p1, p2, q),
            _ => design_diophantine_array(4, 3, 5),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Base configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sources: Option<usize>,
    #[arg(long, allow_hyphen_values = true, default_value_t = 10.0)]
    snr_db: f64,
    #[arg(long)]
    snapshots: Option<u64>,
    /// Frequency mode only.
    #[arg(long)]
    lags: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    trial: usize,
    #[arg(long, default_value = "diophantine")]
    method: String,
    /// Extra `key=value` overrides.
    #[arg(long = "set")]
    overrides: Vec<String>,
    /// Write the lag moment sequence as CSV.
    #[arg(long)]
    moments: Option<PathBuf>,
    /// Write the pseudospectrum as CSV.
    #[arg(long)]
    spectrum: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<()> {
    let mut out = create(path)?;
    f(&mut out)
        .and_then(|_| out.flush())
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn stdout_err(source: io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source,
    }
}

fn design_scheme(rates: &[u64], gamma: u64, lags: u64, snapshots: u64) -> Result<()> {
    if rates.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "--rates expects three values, got {}",
            rates.len()
        )));
    }
    let shifted: Vec<u64> = rates
        .iter()
        .map(|r| r.checked_add(gamma).ok_or(Error::Overflow("shifted rate")))
        .collect::<Result<_>>()?;
    let scheme = solve_scheme([shifted[0], shifted[1], shifted[2]])?;
    let schedule = build_schedule(&scheme, lags, snapshots)?;
    let bound = delay_bound(&scheme, lags, snapshots)?;
    let mut out = io::stdout().lock();
    let w = |out: &mut io::StdoutLock| -> io::Result<()> {
        writeln!(out, "# rates {:?}", scheme.rates())?;
        writeln!(out, "# a {:?}", scheme.a())?;
        writeln!(out, "# b {:?}", scheme.b())?;
        writeln!(out, "# max_index {} bound {}", schedule.max_index(), bound)?;
        writeln!(out, "# k l i1 i2 i3 conj_slot")?;
        for e in schedule.entries() {
            writeln!(
                out,
                "{} {} {} {} {} {}",
                e.k,
                e.l,
                e.indices[0],
                e.indices[1],
                e.indices[2],
                schedule.conj_slot() + 1
            )?;
        }
        Ok(())
    };
    w(&mut out).map_err(stdout_err)
}

fn design_array(spec: &ArraySpec) -> Result<()> {
    let g = spec.geometry()?;
    let mut out = io::stdout().lock();
    let w = |out: &mut io::StdoutLock| -> io::Result<()> {
        writeln!(
            out,
            "# sensors={} formula_sensors={} min_spacing={}",
            g.sensor_count(),
            g.formula_sensor_count(),
            g.min_spacing().map_or("-".to_string(), |s| s.to_string())
        )?;
        writeln!(out, "position,subarrays")?;
        for &p in g.positions() {
            let labels: Vec<String> = g.labels_at(p).iter().map(|l| (l + 1).to_string()).collect();
            writeln!(out, "{p},{}", labels.join(";"))?;
        }
        Ok(())
    };
    w(&mut out).map_err(stdout_err)
}

fn coarray_report(spec: &ArraySpec) -> Result<()> {
    let report = coarray_lags(&spec.geometry()?);
    let mut out = io::stdout().lock();
    let w = |out: &mut io::StdoutLock| -> io::Result<()> {
        writeln!(out, "lag,witness_count")?;
        for (lag, count) in &report.witness_counts {
            writeln!(out, "{lag},{count}")?;
        }
        writeln!(out, "#span,dof,distinct,min_spacing,sensors")?;
        writeln!(
            out,
            "#{},{},{},{},{}",
            report.span,
            report.dof,
            report.distinct_lags,
            report
                .min_spacing
                .map_or("-".to_string(), |s| s.to_string()),
            report.sensor_count
        )?;
        writeln!(
            out,
            "#formula_sensors={},guaranteed_dof={}",
            report.formula_sensor_count,
            report
                .guaranteed_dof()
                .map_or("-".to_string(), |d| d.to_string())
        )
    };
    w(&mut out).map_err(stdout_err)
}

fn simulate(mode: Mode, args: &SimulateArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default_for(mode),
    };
    if cfg.mode != mode {
        return Err(Error::Config(format!(
            "config is for mode {}, expected {mode}",
            cfg.mode
        )));
    }
    cfg.seed = args.seed;
    if let Some(d) = args.sources {
        cfg.sources = d;
    }
    if let Some(l) = args.snapshots {
        cfg.snapshots = l;
    }
    if let Some(k) = args.lags {
        cfg.lags = k;
    }
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    let method: Method = args.method.parse()?;
    cfg.methods = vec![method];
    let out = harness::run_single(&cfg, args.trial, args.snr_db, method)?;
    if let Some(path) = &args.moments {
        write_file(path, |f| out.moments.write_csv(f))?;
    }
    if let Some(path) = &args.spectrum {
        write_file(path, |f| out.spectrum.write_csv(f))?;
    }
    let unit = match mode {
        Mode::Freq => "rad",
        Mode::Doa => "deg",
    };
    let mut truth = out.truth.clone();
    truth.sort_by(f64::total_cmp);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "truth ({unit}): {}", fmt(&truth))
        .and_then(|_| writeln!(stdout, "estimate ({unit}): {}", fmt(&out.estimates)))
        .and_then(|_| writeln!(stdout, "rmse ({unit}): {}", out.rmse))
        .map_err(stdout_err)
}

fn sweep(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
    no_runtime_column: bool,
) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    let result = run_experiment(&cfg)?;
    emit_csv(&result, out, !no_runtime_column)?;
    let mut stdout = io::stdout().lock();
    for &m in &cfg.methods {
        if let Ok(s) = spearman(&result.trial_points(m)) {
            writeln!(stdout, "{m}: spearman rho={} p={}", s.rho, s.p_value).map_err(stdout_err)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::DesignScheme {
            rates,
            gamma,
            lags,
            snapshots,
        } => design_scheme(&rates, gamma, lags, snapshots),
        Command::DesignArray(spec) => design_array(&spec),
        Command::CoarrayReport(spec) => coarray_report(&spec),
        Command::SimulateFreq(args) => simulate(Mode::Freq, &args),
        Command::SimulateDoa(args) => simulate(Mode::Doa, &args),
        Command::SweepSnr {
            config,
            out,
            seed,
            trials,
            no_runtime_column,
        } => sweep(&config, &out, seed, trials, no_runtime_column),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io { source, .. }) if source.kind() == io::ErrorKind::BrokenPipe => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("diosense: {e}");
            ExitCode::FAILURE
        }
    }
}
