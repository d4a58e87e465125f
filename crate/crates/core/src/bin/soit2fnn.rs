use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use clap::{Args, Parser, Subcommand};

use soit2fnn::config::ExperimentConfig;
use soit2fnn::data::{add_noise, parse_timestamp, synthetic_microgrid, MackeyGlass, Table};
use soit2fnn::error::{Error, Result};
use soit2fnn::eval::{EvalReport, Forecaster};
use soit2fnn::experiment::{firing_csv, metrics_csv, predictions_csv, prepare_data, run_experiment, score};
use soit2fnn::gradients::random_gradient_check;

#[derive(Parser)]
#[command(name = "soit2fnn", version, about = "Self-organizing interval type-2 fuzzy neural network forecaster")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Mackey-Glass or synthetic microgrid CSV.
    GenData(GenData),
    /// Run structure learning and evaluation from a config file.
    Train(RunArgs),
    /// Forecast from raw input rows with a trained model directory.
    Predict(PredictArgs),
    /// Re-evaluate a trained model directory on its configured data.
    Eval(RunArgs),
    /// Compare analytic gradients with finite differences on random networks.
    GradCheck(GradCheckArgs),
    /// Write predictions.csv and firing.csv for a trained model directory.
    Report(RunArgs),
}

#[derive(Args)]
struct GenData {
    /// Integrate the Mackey-Glass equation.
    #[arg(long, conflicts_with = "microgrid")]
    mackey_glass: bool,
    /// Generate an hourly microgrid-like record.
    #[arg(long)]
    microgrid: bool,
    #[arg(long, default_value_t = 30.0)]
    tau: f64,
    #[arg(long, default_value_t = 1.2)]
    x0: f64,
    /// Number of samples (Mackey-Glass).
    #[arg(long, default_value_t = 1500)]
    len: usize,
    /// First sampled integer time (Mackey-Glass).
    #[arg(long, default_value_t = 31)]
    t_start: usize,
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    /// Gaussian noise as a fraction of the series standard deviation.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of days (microgrid).
    #[arg(long, default_value_t = 366)]
    days: usize,
    /// First day, YYYY-MM-DD (microgrid).
    #[arg(long, default_value = "2020-01-01")]
    start: String,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PredictArgs {
    /// Directory holding manifest.json and the model file(s).
    #[arg(long, short)]
    model: PathBuf,
    /// CSV with a header and one raw input row per line. An optional leading
    /// `timestamp` column gives the prediction origin.
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradCheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random network configurations.
    #[arg(long, default_value_t = 50)]
    configs: usize,
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn gen_data(a: &GenData) -> Result<()> {
    let table = if a.microgrid {
        let start = NaiveDate::parse_from_str(&a.start, "%Y-%m-%d").map_err(|e| Error::Config(format!("--start: {e}")))?;
        synthetic_microgrid(start, a.days, a.seed)
    } else if a.mackey_glass {
        let mg = MackeyGlass { tau: a.tau, x0: a.x0, step: a.step };
        if !mg.is_chaotic() {
            eprintln!("warning: tau = {} < 17, the series is not in the chaotic regime", a.tau);
        }
        let series = mg.generate(a.t_start, a.len)?;
        let values: Vec<f64> = series.iter().map(|(_, x)| *x).collect();
        let values = add_noise(&values, a.noise, a.seed)?;
        let origin = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        Table {
            timestamps: series.iter().map(|(t, _)| origin + Duration::hours(*t as i64)).collect(),
            names: vec!["value".into()],
            columns: vec![values],
        }
    } else {
        return Err(Error::Config("gen-data needs --mackey-glass or --microgrid".into()));
    };
    emit(a.out.as_deref(), &table.to_csv_string())
}

fn print_report(report: &EvalReport) {
    print!("{}", report.table());
    println!("wall clock {:.1} s", report.wall_clock_secs);
}

fn train(args: &RunArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let outcome = run_experiment(&cfg, true)?;
    print_report(&outcome.report);
    println!("artifacts written to {}", cfg.output_dir.display());
    Ok(())
}

fn eval(args: &RunArgs) -> Result<()> {
    let started = std::time::Instant::now();
    let cfg = load_config(args)?;
    let forecaster = Forecaster::load(&cfg.output_dir)?;
    let data = prepare_data(&cfg)?;
    let (train, test, _) = score(&forecaster, &data, cfg.mpe_epsilon)?;
    let report = EvalReport {
        scheme: forecaster.scheme,
        rules: forecaster.models.iter().map(|m| m.n_rules()).collect(),
        train,
        test,
        learning_log: Some(cfg.output_dir.join("learning_log.txt")),
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    std::fs::write(cfg.output_dir.join("metrics.csv"), metrics_csv(&report.train, &report.test))
        .map_err(|e| Error::io(cfg.output_dir.join("metrics.csv"), e))?;
    print_report(&report);
    Ok(())
}

fn report(args: &RunArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let forecaster = Forecaster::load(&cfg.output_dir)?;
    let data = prepare_data(&cfg)?;
    let (_, _, preds) = score(&forecaster, &data, cfg.mpe_epsilon)?;
    let dir = &cfg.output_dir;
    std::fs::write(dir.join("predictions.csv"), predictions_csv(&data, &preds)).map_err(|e| Error::io(dir, e))?;
    std::fs::write(dir.join("firing.csv"), firing_csv(&forecaster, &data)?).map_err(|e| Error::io(dir, e))?;
    println!("wrote {} and {}", dir.join("predictions.csv").display(), dir.join("firing.csv").display());
    Ok(())
}

fn predict(a: &PredictArgs) -> Result<()> {
    let forecaster = Forecaster::load(&a.model)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(&a.input)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", a.input.display())))?;
    let header = reader.headers().map_err(|e| Error::Csv { row: 0, msg: e.to_string() })?.clone();
    let has_ts = header.get(0) == Some("timestamp");
    let k = forecaster.spec.n_outputs();
    let mut out = String::new();
    if has_ts {
        out.push_str("timestamp,");
    }
    out.push_str(&(1..=k).map(|s| format!("predicted_{s}")).collect::<Vec<_>>().join(","));
    out.push('\n');
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Csv { row, msg: e.to_string() })?;
        let mut fields = rec.iter();
        let origin: Option<NaiveDateTime> = if has_ts {
            let raw = fields.next().unwrap_or("");
            Some(parse_timestamp(raw).ok_or_else(|| Error::Csv { row, msg: format!("unparseable timestamp `{raw}`") })?)
        } else {
            None
        };
        let x: Vec<f64> = fields
            .map(|f| f.parse::<f64>().map_err(|_| Error::Csv { row, msg: format!("invalid value `{f}`") }))
            .collect::<Result<_>>()?;
        let y = forecaster.predict(&x, origin).map_err(|e| Error::Csv { row, msg: e.to_string() })?;
        if let Some(ts) = origin {
            out.push_str(&ts.format("%Y-%m-%dT%H:%M:%S,").to_string());
        }
        out.push_str(&y.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    emit(a.out.as_deref(), &out)
}

fn grad_check(a: &GradCheckArgs) -> Result<bool> {
    let r = random_gradient_check(a.seed, a.configs);
    let verdict = if r.passed() { "PASS" } else { "FAIL" };
    println!(
        "{verdict} seed={} configs={} checked={} skipped={} failures={} max_rel_error={:.3e} max_abs_error={:.3e}",
        a.seed, a.configs, r.checked, r.skipped, r.failures, r.max_rel_error, r.max_abs_error
    );
    Ok(r.passed())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::GenData(a) => gen_data(a).map(|_| true),
        Command::Train(a) => train(a).map(|_| true),
        Command::Predict(a) => predict(a).map(|_| true),
        Command::Eval(a) => eval(a).map(|_| true),
        Command::GradCheck(a) => grad_check(a),
        Command::Report(a) => report(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
