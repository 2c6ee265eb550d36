use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use multibayes::divergence::{kl_single, kl_vector, write_gap_curve_csv, GapCurve, HyperVariance};
use multibayes::marginal::score_table_with;
use multibayes::posterior::{posterior, SummaryJson};
use multibayes::priors::write_penalty_csv;
use multibayes::sim::{run_scenario, write_outputs, ScenarioConfig};
use multibayes::{load_csv, Backend, Base, Error, GPriorSpec, PriorSpec};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "multibayes", version, about = "Bayesian variable selection with multiplicity correction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate all models of a CSV dataset and write posterior summaries.
    Analyze {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        response: String,
        /// fb, eb, fixed:<p> or fb:<a>,<b>
        #[arg(long, default_value = "fb", value_parser = parse_prior)]
        prior: PriorSpec,
        /// zs or g:<value>
        #[arg(long, default_value = "zs")]
        gprior: String,
        #[arg(long, value_enum, default_value_t = BaseArg::Null)]
        base: BaseArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a seeded simulation study described by a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit prior information-gap or prior-penalty curves.
    Curves {
        #[arg(long, value_enum)]
        what: CurveArg,
        #[arg(long)]
        m_max: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// KL divergence of the normal-means example for m' = 1..=m.
    NormalMeans {
        #[arg(long)]
        m: usize,
        /// Hyper-variance, a positive number or `inf`.
        #[arg(long = "A", default_value = "inf", value_parser = parse_hyper)]
        a: HyperVariance,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        ybar: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BaseArg {
    Null,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum CurveArg {
    KlGap,
    HellingerGap,
    Penalty,
}

fn parse_prior(s: &str) -> Result<PriorSpec, String> {
    let err = |e: Error| e.to_string();
    match s {
        "fb" => Ok(PriorSpec::uniform_beta_binomial()),
        "eb" => Ok(PriorSpec::EmpiricalBayes),
        _ => {
            if let Some(p) = s.strip_prefix("fixed:") {
                let p: f64 = p.parse().map_err(|_| format!("bad probability `{p}`"))?;
                PriorSpec::fixed_p(p).map_err(err)
            } else if let Some(ab) = s.strip_prefix("fb:") {
                let (a, b) = ab
                    .split_once(',')
                    .ok_or_else(|| "expected fb:<a>,<b>".to_string())?;
                let a: f64 = a.parse().map_err(|_| format!("bad shape `{a}`"))?;
                let b: f64 = b.parse().map_err(|_| format!("bad shape `{b}`"))?;
                PriorSpec::beta_binomial(a, b).map_err(err)
            } else {
                Err(format!("unknown prior `{s}`; expected fb, eb, fixed:<p> or fb:<a>,<b>"))
            }
        }
    }
}

fn parse_hyper(s: &str) -> Result<HyperVariance, String> {
    if s.eq_ignore_ascii_case("inf") {
        return Ok(HyperVariance::Infinite);
    }
    match s.parse::<f64>() {
        Ok(a) if a > 0.0 && a.is_finite() => Ok(HyperVariance::Finite(a)),
        _ => Err(format!("`{s}` is not a positive number or `inf`")),
    }
}

fn parse_gprior(s: &str, base: Base) -> Result<GPriorSpec, Error> {
    if s == "zs" {
        return Ok(GPriorSpec::zellner_siow(base));
    }
    match s.strip_prefix("g:").map(str::parse::<f64>) {
        Some(Ok(g)) => GPriorSpec::fixed_g(g, base),
        _ => Err(Error::Invalid(format!("unknown g-prior `{s}`; expected zs or g:<value>"))),
    }
}

#[derive(Serialize)]
struct AnalyzeReport<'a> {
    response: &'a str,
    n: usize,
    m: usize,
    variables: &'a [String],
    prior: PriorSpec,
    g_prior: GPriorSpec,
    #[serde(flatten)]
    summary: SummaryJson,
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>, Error> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_error(parent))?;
    }
    let f = fs::File::create(path).map_err(io_error(path))?;
    Ok(std::io::BufWriter::new(f))
}

fn analyze(
    data: &Path,
    response: &str,
    prior: PriorSpec,
    gprior: &str,
    base: BaseArg,
    out: &Path,
) -> Result<(), Error> {
    let base = match base {
        BaseArg::Null => Base::NullBased,
        BaseArg::Full => Base::FullBased,
    };
    let spec = parse_gprior(gprior, base)?;
    let ds = load_csv(data, response)?;
    let table = score_table_with(&ds, spec, Backend::Parallel)?;
    let summary = posterior(&table, prior)?;

    fs::create_dir_all(out).map_err(io_error(out))?;
    let report = AnalyzeReport {
        response: ds.response_name(),
        n: ds.n(),
        m: ds.m(),
        variables: ds.names(),
        prior,
        g_prior: spec,
        summary: summary.to_json(),
    };
    let json = serde_json::to_string_pretty(&report)? + "\n";
    let path = out.join("summary.json");
    fs::write(&path, &json).map_err(io_error(&path))?;
    table.write_csv(create(&out.join("scores.csv"))?)?;
    summary.write_inclusion_csv(Some(ds.names()), create(&out.join("inclusion.csv"))?)?;
    let mut stdout = std::io::stdout().lock();
    stdout
        .write_all(json.as_bytes())
        .map_err(io_error(Path::new("<stdout>")))
}

fn simulate(config: &Path, out: &Path) -> Result<(), Error> {
    let text = fs::read_to_string(config).map_err(io_error(config))?;
    let cfg: ScenarioConfig = serde_json::from_str(&text)?;
    let output = run_scenario(&cfg)?;
    write_outputs(&output, out)?;
    let a = &output.aggregate;
    println!(
        "reps={} degeneracy_fraction={} degenerate_zero={} degenerate_one={}",
        a.reps, a.degeneracy_fraction, a.degenerate_zero, a.degenerate_one
    );
    Ok(())
}

fn curves(what: CurveArg, m_max: usize, out: &Path) -> Result<(), Error> {
    let w = create(out)?;
    match what {
        CurveArg::KlGap => write_gap_curve_csv(GapCurve::Kl, m_max, w),
        CurveArg::HellingerGap => write_gap_curve_csv(GapCurve::Hellinger, m_max, w),
        CurveArg::Penalty => write_penalty_csv(m_max, w),
    }
}

fn normal_means(m: usize, a: HyperVariance, ybar: f64, out: &Path) -> Result<(), Error> {
    if m == 0 {
        return Err(Error::Invalid("m must be at least 1".into()));
    }
    if !ybar.is_finite() {
        return Err(Error::Invalid("ybar must be finite".into()));
    }
    let mut w = csv::Writer::from_writer(create(out)?);
    w.write_record(["m", "kl_single", "kl_vector"])?;
    for k in 1..=m {
        w.write_record([
            k.to_string(),
            kl_single(k, a, ybar).to_string(),
            kl_vector(k, a, ybar).to_string(),
        ])?;
    }
    w.flush().map_err(io_error(out))
}

fn exit_code(e: &Error) -> u8 {
    if e.is_data_error() {
        EXIT_DATA
    } else {
        EXIT_NUMERIC
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Analyze {
            data,
            response,
            prior,
            gprior,
            base,
            out,
        } => analyze(data, response, *prior, gprior, *base, out),
        Command::Simulate { config, out } => simulate(config, out),
        Command::Curves { what, m_max, out } => curves(*what, *m_max, out),
        Command::NormalMeans { m, a, ybar, out } => normal_means(*m, *a, *ybar, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
