use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use dsest_core::analysis::analyze;
use dsest_core::io::{parse_vector, render_markdown, render_svg, write_csv, DecayVerdict, EstimatorFile, Report, SystemFile};
use dsest_core::sim::{simulate, InitialState, InputSignal, SimGrid, DEFAULT_DT, DEFAULT_HORIZON};
use dsest_core::synthesis::{synthesize, Synthesis};
use dsest_core::{Error, Tolerance};

#[derive(Parser)]
#[command(name = "dsest", version, about = "Functional estimators for linear descriptor systems")]
struct Cli {
    #[command(flatten)]
    tol: TolFlags,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone, Copy)]
struct TolFlags {
    /// Relative threshold for numerical rank decisions.
    #[arg(long, global = true, env = "DSEST_RANK_RTOL")]
    rank_rtol: Option<f64>,
    /// Estimator poles are placed left of `-margin`.
    #[arg(long, global = true, env = "DSEST_MARGIN")]
    margin: Option<f64>,
    /// Eigenvalues with real part below `-stability_margin` count as stable.
    #[arg(long, global = true)]
    stability_margin: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Decide partial causal detectability; exit 0 when it holds, 2 when not.
    Analyze {
        system: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a Markdown rendering.
        #[arg(long)]
        markdown: Option<PathBuf>,
    },
    /// Construct an estimator (N, H, R, M); exit 2 when the system admits none.
    Synth {
        system: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate plant and estimator and write a CSV trace.
    Simulate(SimArgs),
    /// Analysis, synthesis and an optional simulation verdict as JSON and Markdown.
    Report {
        system: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        markdown: Option<PathBuf>,
        /// Simulate with these settings and include the decay verdict.
        #[arg(long)]
        simulate: bool,
        #[command(flatten)]
        sim: SimSettings,
    },
}

#[derive(Args)]
struct SimArgs {
    system: PathBuf,
    estimator: PathBuf,
    #[command(flatten)]
    settings: SimSettings,
    /// CSV output path; `-` for stdout.
    #[arg(long, default_value = "-")]
    out: String,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct SimSettings {
    /// Initial state, comma separated (default zero).
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    /// Initial estimator state, comma separated (default zero).
    #[arg(long, allow_hyphen_values = true)]
    w0: Option<String>,
    /// Input channels separated by ';', e.g. "t" or "sin(1,2,0); 0" (default zero).
    #[arg(long, allow_hyphen_values = true)]
    input: Option<String>,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    tf: f64,
    #[arg(long, default_value_t = DEFAULT_DT)]
    dt: f64,
}

/// Failure carrying its exit status.
struct Exit {
    code: u8,
    err: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Exit {
    fn from(e: E) -> Self {
        Exit { code: 1, err: e.into() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Exit { code, err }) => {
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Exit> {
    match cli.cmd {
        Command::Analyze { system, out, markdown } => {
            let (file, tol) = load_system(&system, cli.tol)?;
            let analysis = analyze(&file.system, &tol)?;
            let verdict = analysis.partially_causal_detectable;
            let report = Report { system: file.name, analysis, synthesis: None, synthesis_error: None, decay: None };
            emit(out.as_deref(), &report.to_json())?;
            if let Some(p) = markdown {
                write_file(&p, &render_markdown(&report))?;
            }
            eprintln!("partially causal detectable: {verdict}");
            Ok(if verdict { 0 } else { 2 })
        }
        Command::Synth { system, out } => {
            let (file, tol) = load_system(&system, cli.tol)?;
            let Synthesis { estimator, trace } = synthesize(&file.system, &tol).map_err(refusal)?;
            let summary = trace.summary(&estimator);
            let doc = EstimatorFile { name: file.name, estimator, trace: Some(summary) };
            write_file(&out, &doc.to_json())?;
            eprintln!("estimator of order {} written to {}", doc.estimator.order(), out.display());
            Ok(0)
        }
        Command::Simulate(args) => simulate_cmd(args, cli.tol),
        Command::Report { system, json, markdown, simulate: with_sim, sim } => {
            let (file, tol) = load_system(&system, cli.tol)?;
            let analysis = analyze(&file.system, &tol)?;
            let verdict = analysis.partially_causal_detectable;
            let mut report = Report { system: file.name.clone(), analysis, synthesis: None, synthesis_error: None, decay: None };
            if verdict {
                match synthesize(&file.system, &tol) {
                    Ok(s) => {
                        report.synthesis = Some(s.trace.summary(&s.estimator));
                        if with_sim {
                            let tr = run_simulation(&file, &s.estimator, &sim, &tol)?;
                            let norms = tr.error_norms();
                            report.decay =
                                Some(DecayVerdict::from_metrics(tr.grid.horizon(), tr.grid.dt, &norms, &tr.metrics()));
                        }
                    }
                    Err(e) => report.synthesis_error = Some(e.to_string()),
                }
            }
            match &json {
                Some(p) => write_file(p, &report.to_json())?,
                None if markdown.is_none() => emit(None, &report.to_json())?,
                None => {}
            }
            if let Some(p) = markdown {
                write_file(&p, &render_markdown(&report))?;
            }
            Ok(if verdict { 0 } else { 2 })
        }
    }
}

fn refusal(e: Error) -> Exit {
    let code = if matches!(e, Error::Precondition(_)) { 2 } else { 1 };
    Exit { code, err: anyhow::Error::new(e).context("synthesis refused") }
}

fn tolerance(flags: TolFlags, file: &SystemFile) -> anyhow::Result<Tolerance> {
    let mut t = file.tolerance(Tolerance::default());
    if let Some(v) = flags.rank_rtol {
        t.rank_rtol = v;
    }
    if let Some(v) = flags.margin {
        t.synthesis_margin = v;
    }
    if let Some(v) = flags.stability_margin {
        t.eig_stability_margin = v;
    }
    t.validate().context("invalid tolerance")?;
    Ok(t)
}

fn load_system(path: &Path, flags: TolFlags) -> anyhow::Result<(SystemFile, Tolerance)> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let file = SystemFile::parse(&text).with_context(|| format!("{}", path.display()))?;
    let tol = tolerance(flags, &file)?;
    Ok((file, tol))
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn vector_or_zero(flag: &str, text: Option<&str>, n: usize) -> anyhow::Result<nalgebra::DVector<f64>> {
    let v = match text {
        Some(t) => parse_vector(t).with_context(|| format!("--{flag}"))?,
        None => nalgebra::DVector::zeros(n),
    };
    if v.len() != n {
        bail!("--{flag} has {} entries, expected {n}", v.len());
    }
    Ok(v)
}

fn run_simulation(
    file: &SystemFile,
    est: &dsest_core::Estimator,
    s: &SimSettings,
    tol: &Tolerance,
) -> anyhow::Result<dsest_core::sim::SimulationTrace> {
    let d = file.system.dims();
    est.check_compatible(&file.system)?;
    let x0 = vector_or_zero("x0", s.x0.as_deref(), d.n)?;
    let w0 = vector_or_zero("w0", s.w0.as_deref(), est.order())?;
    let u = match &s.input {
        Some(spec) => InputSignal::parse(spec).context("--input")?,
        None => InputSignal::zero(d.l),
    };
    if u.dim() != d.l {
        bail!("--input has {} channels, the system has {} inputs", u.dim(), d.l);
    }
    let grid = SimGrid::new(s.tf, s.dt)?;
    let tr = simulate(&file.system, est, &InitialState::Full(x0), &w0, &u, None, grid, tol)?;
    Ok(tr)
}

fn simulate_cmd(args: SimArgs, flags: TolFlags) -> Result<u8, Exit> {
    let (file, tol) = load_system(&args.system, flags)?;
    let text = fs::read_to_string(&args.estimator).with_context(|| format!("cannot read {}", args.estimator.display()))?;
    let est = EstimatorFile::parse(&text).with_context(|| format!("{}", args.estimator.display()))?;
    let tr = run_simulation(&file, &est.estimator, &args.settings, &tol)?;
    if args.out == "-" {
        let stdout = std::io::stdout();
        let mut w = BufWriter::new(stdout.lock());
        write_csv(&mut w, &tr)?;
        w.flush()?;
    } else {
        let f = fs::File::create(&args.out).with_context(|| format!("cannot write {}", args.out))?;
        let mut w = BufWriter::new(f);
        write_csv(&mut w, &tr)?;
        w.flush()?;
    }
    if let Some(p) = &args.svg {
        write_file(p, &render_svg(&tr))?;
    }
    let norms = tr.error_norms();
    let v = DecayVerdict::from_metrics(tr.grid.horizon(), tr.grid.dt, &norms, &tr.metrics());
    let rate = v.fitted_rate.map_or("n/a".into(), |r| format!("{r:.4}"));
    eprintln!(
        "{}: final |e| = {:.3e}, fitted rate {rate}",
        if v.convergent { "convergent" } else { "not convergent" },
        v.final_error
    );
    Ok(0)
}
