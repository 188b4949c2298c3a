//! `cubevar`: covariances of signed cubic variations of fBm with `H = 1/6`.

mod output;

use std::io::{self, Write};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cubevar::exact::{exact_cov_tilde, exact_cov_w, CovRequest, Mode};
use cubevar::kernel::GridPair;
use cubevar::limits::{RegimeSpec, RhoFunction};
use cubevar::series::{self, FArgs};
use cubevar::simulate::{mc_cov, GridStrategy, McConfig};
use cubevar::{Error, TruncationBudget};

use output::{emit, Format, OutputRecord};

#[derive(Parser, Debug)]
#[command(name = "cubevar", version, about = "Covariances of signed cubic variations of fBm with H = 1/6")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args, Debug)]
struct Global {
    /// Target truncation error for series evaluations.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
    /// Seed for Monte Carlo commands (required by them).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of Monte Carlo paths.
    #[arg(long, global = true, default_value_t = 10_000)]
    paths: u64,
    /// Band half-width for the exact engine; full double sum when absent.
    #[arg(long, global = true)]
    band: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Record wall-clock runtime in the metadata.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// κ² by the direct series and by (3/4) f_1(0).
    Kappa,
    /// f_L(x), its periodic extension, or a single term f_{m,L}(x).
    F {
        #[arg(long)]
        l: f64,
        #[arg(long)]
        x: f64,
        /// Evaluate only the term with this index.
        #[arg(long, allow_hyphen_values = true)]
        m: Option<i64>,
        /// Periodic extension, accepting any real x.
        #[arg(long)]
        hat: bool,
    },
    /// Asymptotic covariance density ρ(t).
    Rho(RegimeAt),
    /// Asymptotic correlation γ(t) = ∫₀ᵗρ / (κ² t).
    Gamma(RegimeAt),
    /// Entries of the lower factor σ(t) with σσᵀ the limit covariance density.
    Sigma(RegimeAt),
    /// Exact finite-n covariance E[W_a(s) W_b(t)].
    Exact {
        #[arg(long)]
        a: u64,
        #[arg(long)]
        b: u64,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        t: f64,
        /// Drop the first-chaos part.
        #[arg(long)]
        tilde: bool,
    },
    /// Monte Carlo estimate of E[W_a(s) W_b(t)].
    Mc {
        #[arg(long)]
        a: u64,
        #[arg(long)]
        b: u64,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum, default_value_t = Strategy::Lcm)]
        strategy: Strategy,
    },
    /// Worked examples with certified values.
    Examples {
        #[arg(long, value_enum)]
        which: Which,
        /// Time for the oscillating example.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Residue parameter for the oscillating example.
        #[arg(long, default_value_t = 1)]
        k: u64,
    },
}

#[derive(Args, Debug)]
struct RegimeAt {
    #[arg(long, value_enum)]
    regime: Regime,
    #[arg(long)]
    p: Option<u64>,
    #[arg(long)]
    q: Option<u64>,
    #[arg(long)]
    l: Option<f64>,
    #[arg(long)]
    k: Option<u64>,
    #[arg(long)]
    t: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Regime {
    Degenerate,
    Rational,
    Integral,
    ModK,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Strategy {
    Lcm,
    Union,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum Which {
    #[value(name = "4.1")]
    E41,
    #[value(name = "4.2")]
    E42,
    #[value(name = "4.3")]
    E43,
    #[value(name = "4.4")]
    E44,
}

fn missing(name: &str) -> Error {
    Error::Precondition(format!("--{name} is required for this regime"))
}

impl RegimeAt {
    fn spec(&self) -> Result<RegimeSpec, Error> {
        Ok(match self.regime {
            Regime::Degenerate => RegimeSpec::Degenerate,
            Regime::Rational => RegimeSpec::RationalConstant {
                p: self.p.ok_or_else(|| missing("p"))?,
                q: self.q.unwrap_or(1),
            },
            Regime::Integral => RegimeSpec::IntegralConstant { l: self.l.ok_or_else(|| missing("l"))? },
            Regime::ModK => RegimeSpec::ModK {
                l: self.l.ok_or_else(|| missing("l"))?,
                k: self.k.ok_or_else(|| missing("k"))?,
            },
        })
    }

    fn inputs(&self, spec: RegimeSpec) -> output::Map {
        let mut m = regime_inputs(spec);
        m.insert("t".into(), self.t.into());
        m
    }
}

fn regime_inputs(spec: RegimeSpec) -> output::Map {
    match spec {
        RegimeSpec::Degenerate => inputs! {"regime" => "degenerate"},
        RegimeSpec::RationalConstant { p, q } => inputs! {"regime" => "rational", "p" => p, "q" => q},
        RegimeSpec::IntegralConstant { l } => inputs! {"regime" => "integral", "l" => l},
        RegimeSpec::ModK { l, k } => inputs! {"regime" => "mod-k", "l" => l, "k" => k},
    }
}

fn gamma_record(spec: RegimeSpec, t: f64, budget: TruncationBudget, example: &str) -> Result<OutputRecord, Error> {
    let rho = RhoFunction::new(spec, budget)?;
    let mut inputs = regime_inputs(spec);
    inputs.insert("t".into(), t.into());
    inputs.insert("example".into(), example.into());
    Ok(OutputRecord::certified("gamma", inputs, rho.gamma(t)?))
}

fn run(cli: &Cli) -> Result<Vec<OutputRecord>, Error> {
    let g = &cli.global;
    let budget = TruncationBudget::Tolerance(g.tol);
    let mut records = match &cli.command {
        Command::Kappa => {
            let direct = series::kappa_sq(budget)?;
            let via_f = series::f_l(1.0, 0.0, budget)?.scale(0.75);
            vec![
                OutputRecord::certified("kappa", inputs! {"method" => "direct"}, direct),
                OutputRecord::certified("kappa", inputs! {"method" => "three_quarters_f1_at_0"}, via_f),
            ]
        }
        Command::F { l, x, m, hat } => {
            let mut inputs = inputs! {"l" => *l, "x" => *x, "hat" => *hat};
            match m {
                Some(m) => {
                    inputs.insert("m".into(), (*m).into());
                    let args = if *hat {
                        FArgs::new(*m, *l, x - x.floor())?
                    } else {
                        FArgs::new(*m, *l, *x)?
                    };
                    vec![OutputRecord::new("f", inputs, series::f_ml(args), Some(0.0))]
                }
                None => {
                    let v = if *hat { series::f_hat_l(*l, *x, budget)? } else { series::f_l(*l, *x, budget)? };
                    vec![OutputRecord::certified("f", inputs, v)]
                }
            }
        }
        Command::Rho(r) => {
            let spec = r.spec()?;
            let rho = RhoFunction::new(spec, budget)?;
            vec![OutputRecord::certified("rho", r.inputs(spec), rho.rho_value(r.t)?)]
        }
        Command::Gamma(r) => {
            let spec = r.spec()?;
            let rho = RhoFunction::new(spec, budget)?;
            vec![OutputRecord::certified("gamma", r.inputs(spec), rho.gamma(r.t)?)]
        }
        Command::Sigma(r) => {
            let spec = r.spec()?;
            let rho = RhoFunction::new(spec, budget)?;
            let sigma = rho.sigma(r.t)?;
            let err = rho.sigma_error(r.t)?;
            let mut out = Vec::new();
            for (i, row) in sigma.entries.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    let mut inputs = r.inputs(spec);
                    inputs.insert("entry".into(), format!("{}{}", i + 1, j + 1).into());
                    out.push(OutputRecord::new("sigma", inputs, *v, Some(err[i][j])));
                }
            }
            out
        }
        Command::Exact { a, b, s, t, tilde } => {
            let grid = GridPair::new(*a, *b)?;
            let mode = g.band.map_or(Mode::Full, |band| Mode::Banded { band });
            let req = CovRequest { grid, s: *s, t: *t, mode };
            let res = if *tilde { exact_cov_tilde(&req)? } else { exact_cov_w(&req)? };
            let mut inputs = inputs! {"a" => *a, "b" => *b, "s" => *s, "t" => *t, "tilde" => *tilde};
            if let Some(band) = g.band {
                inputs.insert("band".into(), band.into());
            }
            vec![OutputRecord::new("exact", inputs, res.value, Some(res.certified_remainder))]
        }
        Command::Mc { a, b, s, t, strategy } => {
            let seed = g.seed.ok_or_else(|| Error::Precondition("mc requires an explicit --seed".into()))?;
            let strategy = match strategy {
                Strategy::Lcm => GridStrategy::LcmRefinement,
                Strategy::Union => GridStrategy::UnionCholesky,
            };
            let cfg = McConfig::new(g.paths, seed)?.with_strategy(strategy);
            let est = mc_cov(*a, *b, *s, *t, &cfg)?;
            let inputs = inputs! {"a" => *a, "b" => *b, "s" => *s, "t" => *t};
            let mut r = OutputRecord::new("mc", inputs, est.mean, None);
            r.meta("std_error", est.std_error)
                .meta("paths", est.paths_used)
                .meta("seed", seed)
                .meta("strategy", format!("{strategy:?}"));
            vec![r]
        }
        Command::Examples { which, t, k } => examples(*which, *t, *k, budget)?,
    };
    for r in &mut records {
        r.meta("tol", g.tol);
    }
    Ok(records)
}

fn examples(which: Which, t: f64, k: u64, budget: TruncationBudget) -> Result<Vec<OutputRecord>, Error> {
    Ok(match which {
        Which::E41 => [2, 5]
            .into_iter()
            .map(|l| gamma_record(RegimeSpec::RationalConstant { p: l, q: 1 }, 1.0, budget, "4.1"))
            .collect::<Result<_, _>>()?,
        Which::E42 => vec![gamma_record(RegimeSpec::ModK { l: 1.0, k: 1 }, 0.8, budget, "4.2")?],
        Which::E43 => [1.0, 2.0]
            .into_iter()
            .map(|l| gamma_record(RegimeSpec::IntegralConstant { l }, 1.0, budget, "4.3"))
            .collect::<Result<_, _>>()?,
        Which::E44 => {
            if k == 0 {
                return Err(Error::Precondition("k must be positive".into()));
            }
            let odd = RhoFunction::new(RegimeSpec::ModK { l: 1.0, k: 2 * k }, budget)?.cum_cov(t)?;
            let even = RhoFunction::new(RegimeSpec::ModK { l: 1.0, k }, budget)?.cum_cov(t)?;
            let base = inputs! {"example" => "4.4", "t" => t, "k" => k};
            let with = |name: &str| {
                let mut m = base.clone();
                m.insert("subsequence".into(), name.into());
                m
            };
            let mut diff = OutputRecord::new(
                "cum_cov_difference",
                with("odd_minus_even"),
                odd.value - even.value,
                Some(odd.error_bound + even.error_bound),
            );
            diff.meta("quadrature_estimate", odd.quadrature_estimate + even.quadrature_estimate)
                .meta("separated", (odd.value - even.value).abs() > odd.total_error() + even.total_error());
            vec![
                OutputRecord::certified("cum_cov", with("odd"), odd),
                OutputRecord::certified("cum_cov", with("even"), even),
                diff,
            ]
        }
    })
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::Precondition(_) => 2,
        Error::Resource(_) => 3,
    }
}

fn main() -> ExitCode {
    std::panic::set_hook(Box::new(|info| {
        eprintln!("internal error: {info}");
        std::process::exit(4);
    }));
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(4);
        }
    }
    let start = Instant::now();
    match run(&cli) {
        Ok(mut records) => {
            if cli.global.timing {
                let secs = start.elapsed().as_secs_f64();
                for r in &mut records {
                    r.meta("runtime_seconds", secs);
                }
            }
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            if emit(&records, cli.global.format, &mut lock).and_then(|_| lock.flush()).is_err() {
                return ExitCode::from(4);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
