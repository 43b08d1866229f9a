//! Command-line driver. Every command builds its inputs first (any failure
//! there is a usage error), then runs, then emits one JSON report that
//! embeds the resolved configuration.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{Command, MapName, Overrides, RunConfig, OUT_DIR_ENV};
use crate::counterexample::{lemma61_report, ConvergenceReport, CounterexampleParams};
use crate::dynamics::IntervalPartition;
use crate::entropy::{
    counterexample_formula_report, entropy_formula_report, skew_product_formula_report, FormulaConfig, FormulaReport,
};
use crate::error::{Error, Result};
use crate::inducing::{build_lsv_scheme, trivial_scheme, InducingScheme};
use crate::maps1d::{
    doubling_map, lorenz_like_map, lsv_map, singular_intermittent_map, PiecewiseMap1D, SkewProductMap,
};
use crate::par::with_threads;
use crate::skew2d::{
    injectivity_check, quotient_conjugacy_residual, slots_disjoint, InjectivityReport, SkewIntegralConfig, SkewSystem,
    UnstableIntegralReport,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "inducing-entropy", version, about = "Verify entropy formulas through inducing schemes")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Compare the Jacobian integral with Birkhoff and block-entropy estimates.
    Verify {
        /// doubling, lorenz, lsv, singular or skewprod
        map: String,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        alpha0: Option<f64>,
        #[arg(long)]
        alpha1: Option<f64>,
        #[arg(long)]
        p0: Option<f64>,
        /// Largest return time kept in the LSV scheme.
        #[arg(long)]
        n_max: Option<u64>,
        /// Root-solve tolerance of the implicitly defined map.
        #[arg(long)]
        implicit_tol: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Partial sums and the entropy-formula failure on the infinite-entropy scheme.
    Counterexample {
        /// Comma-separated truncation levels.
        #[arg(long, value_delimiter = ',')]
        n_max_list: Option<Vec<u64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Injectivity, quotient conjugacy and the unstable Jacobian integral of the skew system.
    Skew {
        #[arg(long)]
        lambda: Option<f64>,
        /// Truncation level of the underlying scheme.
        #[arg(long)]
        n_max: Option<u64>,
        /// Random pairs for the injectivity check.
        #[arg(long)]
        n_pairs: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_orbits: Option<usize>,
    #[arg(long)]
    n_iters: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// Ulam grid size.
    #[arg(long)]
    bins: Option<usize>,
    /// Longest block for the block-entropy curve (0 disables it).
    #[arg(long)]
    block_n: Option<usize>,
    /// Worker threads (default: all cores). Does not change results.
    #[arg(long)]
    threads: Option<usize>,
    /// File of `key = value` lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the JSON report and CSV side files.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn overrides(self) -> Result<(Overrides, Option<PathBuf>)> {
        let flags = Overrides {
            seed: self.seed,
            n_orbits: self.n_orbits,
            n_iters: self.n_iters,
            burn_in: self.burn_in,
            bins: self.bins,
            block_n: self.block_n,
            threads: self.threads,
            out: self.out,
            ..Default::default()
        };
        let file = match &self.config {
            Some(p) => Overrides::from_file(p)?,
            None => Overrides::default(),
        };
        Ok((flags.or(file), std::env::var_os(OUT_DIR_ENV).map(PathBuf::from)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => EXIT_PASS,
            Outcome::Fail => EXIT_FAIL,
            Outcome::Inconclusive => EXIT_INCONCLUSIVE,
        }
    }
}

/// Top-level JSON document written by every command.
#[derive(Debug, Clone, Serialize)]
pub struct Report<T: Serialize> {
    pub config: RunConfig,
    pub outcome: Outcome,
    pub report: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleOutput {
    pub convergence: Option<ConvergenceReport>,
    pub formula: Option<FormulaReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkewOutput {
    pub injectivity: InjectivityReport,
    pub slots_disjoint: bool,
    pub conjugacy_residual: f64,
    pub conjugacy_samples: usize,
    pub unstable_integral: UnstableIntegralReport,
}

const CONJUGACY_SAMPLES: usize = 100_000;

/// Parses `args` (program name first), runs the command, writes the JSON
/// report to `stdout`, and returns the process exit code.
pub fn run<I, T, W>(args: I, stdout: &mut W) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    W: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let prepared = match prepare(cli.command) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let threads = prepared.config().threads.unwrap_or(0);
    match with_threads(threads, || prepared.execute()) {
        Ok((name, json, outcome, side_files)) => {
            if let Err(e) = emit(&name, &json, &side_files, stdout, prepared.config()) {
                eprintln!("error: {e}");
                return EXIT_FAIL;
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAIL
        }
    }
}

/// Validated inputs, ready to run.
enum Prepared {
    Verify { config: RunConfig, system: VerifySystem },
    Counterexample { config: RunConfig, list: Vec<u64> },
    Skew { config: RunConfig, params: CounterexampleParams, sys: SkewSystem },
}

enum VerifySystem {
    Interval { map: PiecewiseMap1D, scheme: InducingScheme },
    Skewprod(SkewProductMap),
}

type SideFile = (String, Vec<u8>);

/// File name and text of the JSON report, outcome, CSV side files.
type Executed = (String, String, Outcome, Vec<SideFile>);

fn prepare(cmd: Cmd) -> Result<Prepared> {
    match cmd {
        Cmd::Verify { map, alpha, gamma, alpha0, alpha1, p0, n_max, implicit_tol, common } => {
            let name = MapName::parse(&map)?;
            let (layer, env_out) = common.overrides()?;
            let layer = Overrides { alpha, gamma, alpha0, alpha1, p0, n_max, implicit_tol, ..Default::default() }.or(layer);
            let config = RunConfig::resolve(Command::Verify, Some(name), layer, env_out);
            check_estimator_sizes(&config)?;
            let system = match name {
                MapName::Doubling => interval(doubling_map(), None)?,
                MapName::Lorenz => interval(lorenz_like_map(config.alpha.unwrap())?, None)?,
                MapName::Lsv => {
                    let alpha = config.alpha.unwrap();
                    let map = lsv_map(alpha)?;
                    let n_max = u32::try_from(config.n_max.unwrap())
                        .map_err(|_| Error::InvalidParameter("n_max too large".into()))?;
                    interval(map, Some(build_lsv_scheme(alpha, n_max)?))?
                }
                MapName::Singular => {
                    let tol = config.implicit_tol.unwrap();
                    if !tol.is_finite() || tol <= 0.0 {
                        return Err(Error::InvalidParameter("implicit_tol must be positive".into()));
                    }
                    interval(singular_intermittent_map(config.gamma.unwrap(), tol)?, None)?
                }
                MapName::Skewprod => VerifySystem::Skewprod(SkewProductMap::new(
                    config.alpha0.unwrap(),
                    config.alpha1.unwrap(),
                    config.p0.unwrap(),
                )?),
            };
            Ok(Prepared::Verify { config, system })
        }
        Cmd::Counterexample { n_max_list, common } => {
            let (layer, env_out) = common.overrides()?;
            let layer = Overrides { n_max_list, ..Default::default() }.or(layer);
            let config = RunConfig::resolve(Command::Counterexample, None, layer, env_out);
            let mut list = config.n_max_list.clone().unwrap_or_default();
            if list.is_empty() || list.contains(&0) {
                return Err(Error::InvalidParameter("n_max_list needs positive entries".into()));
            }
            list.sort_unstable();
            list.dedup();
            Ok(Prepared::Counterexample { config, list })
        }
        Cmd::Skew { lambda, n_max, n_pairs, common } => {
            let (layer, env_out) = common.overrides()?;
            let layer = Overrides { lambda, n_max, n_pairs, ..Default::default() }.or(layer);
            let config = RunConfig::resolve(Command::Skew, None, layer, env_out);
            check_estimator_sizes(&config)?;
            let lambda = config.lambda.unwrap();
            if !(lambda > 0.0 && lambda <= 0.5) {
                return Err(Error::InvalidParameter(format!("lambda must lie in (0, 1/2] (got {lambda})")));
            }
            let n_max = config.n_max.unwrap();
            if n_max < 16 {
                return Err(Error::InvalidParameter("skew needs n_max >= 16".into()));
            }
            let params = CounterexampleParams::new(n_max)?;
            let sys = SkewSystem::new(&params, lambda)?;
            Ok(Prepared::Skew { config, params, sys })
        }
    }
}

fn interval(map: PiecewiseMap1D, scheme: Option<InducingScheme>) -> Result<VerifySystem> {
    let scheme = match scheme {
        Some(s) => s,
        None => trivial_scheme(&map)?,
    };
    Ok(VerifySystem::Interval { map, scheme })
}

fn check_estimator_sizes(c: &RunConfig) -> Result<()> {
    if c.n_orbits == Some(0) || c.n_iters == Some(0) {
        return Err(Error::InvalidParameter("n_orbits and n_iters must be positive".into()));
    }
    if c.bins.is_some_and(|b| b < 4) {
        return Err(Error::InvalidParameter("bins must be at least 4".into()));
    }
    if c.block_n.is_some_and(|b| b > 20) {
        return Err(Error::InvalidParameter("block_n must be at most 20".into()));
    }
    Ok(())
}

impl Prepared {
    fn config(&self) -> &RunConfig {
        match self {
            Prepared::Verify { config, .. } | Prepared::Counterexample { config, .. } | Prepared::Skew { config, .. } => {
                config
            }
        }
    }

    fn execute(&self) -> Result<Executed> {
        match self {
            Prepared::Verify { config, system } => {
                let fc = FormulaConfig {
                    bins: config.bins.unwrap(),
                    n_orbits: config.n_orbits.unwrap(),
                    n_iters: config.n_iters.unwrap(),
                    burn_in: config.burn_in.unwrap(),
                    seed: config.seed.unwrap(),
                    block_n: config.block_n.unwrap(),
                };
                let report = match system {
                    VerifySystem::Interval { map, scheme } => {
                        let partition = IntervalPartition::from_map(map);
                        entropy_formula_report(&map.name, map, scheme, Some(&partition), &fc)?
                    }
                    VerifySystem::Skewprod(map) => skew_product_formula_report(map, &fc)?,
                };
                let outcome = match report.verdict.as_str() {
                    "pass" => Outcome::Pass,
                    "fail" => Outcome::Fail,
                    _ => Outcome::Inconclusive,
                };
                let mut side = Vec::new();
                if let Some(b) = &report.block_entropy {
                    let mut buf = Vec::new();
                    b.write_csv(&mut buf)?;
                    side.push((format!("verify-{}-blocks.csv", config.map.unwrap().as_str()), buf));
                }
                let name = format!("verify-{}.json", config.map.unwrap().as_str());
                Ok((name, to_json(config, outcome, &report)?, outcome, side))
            }
            Prepared::Counterexample { config, list } => {
                let (output, outcome) = if list.len() < 3 || list[0] < 3 {
                    let note = "at least three truncation levels >= 3 are needed for a verdict".to_string();
                    (CounterexampleOutput { convergence: None, formula: None, note: Some(note) }, Outcome::Inconclusive)
                } else {
                    let convergence = lemma61_report(list)?;
                    let params = CounterexampleParams::new(*list.last().unwrap())?;
                    let formula = counterexample_formula_report(&params)?;
                    let outcome = if convergence.matches_expected() && formula.verdict == "formula_fails" {
                        Outcome::Pass
                    } else {
                        Outcome::Inconclusive
                    };
                    (CounterexampleOutput { convergence: Some(convergence), formula: Some(formula), note: None }, outcome)
                };
                let mut side = Vec::new();
                if let Some(c) = &output.convergence {
                    side.push(("counterexample-sums.csv".to_string(), convergence_csv(c)));
                }
                Ok(("counterexample.json".into(), to_json(config, outcome, &output)?, outcome, side))
            }
            Prepared::Skew { config, params, sys } => {
                let seed = config.seed.unwrap();
                let injectivity = injectivity_check(sys, config.n_pairs.unwrap(), seed);
                let disjoint = slots_disjoint(sys, sys.resolvable_return_time());
                let residual = quotient_conjugacy_residual(sys, CONJUGACY_SAMPLES, seed.wrapping_add(1))?;
                let ic = SkewIntegralConfig {
                    n_orbits: config.n_orbits.unwrap(),
                    n_iters: config.n_iters.unwrap(),
                    burn_in: config.burn_in.unwrap(),
                    seed: seed.wrapping_add(2),
                };
                let integral = crate::skew2d::unstable_integral_report(sys, params, &ic)?;
                let ok = injectivity.verdict == "pass" && disjoint && residual == 0.0 && integral.verdict == "pass";
                let outcome = if ok { Outcome::Pass } else { Outcome::Fail };
                let output = SkewOutput {
                    injectivity,
                    slots_disjoint: disjoint,
                    conjugacy_residual: residual,
                    conjugacy_samples: CONJUGACY_SAMPLES,
                    unstable_integral: integral,
                };
                let mut orbit = Vec::new();
                let start = (0.5 * sys.tower().scheme().base_len(), 0, 0.5);
                sys.write_orbit_csv(start, 1000, &mut orbit)?;
                let side = vec![("skew-orbit.csv".to_string(), orbit)];
                Ok(("skew.json".into(), to_json(config, outcome, &output)?, outcome, side))
            }
        }
    }
}

fn to_json<T: Serialize>(config: &RunConfig, outcome: Outcome, report: &T) -> Result<String> {
    let doc = Report { config: config.clone(), outcome, report };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

fn convergence_csv(c: &ConvergenceReport) -> Vec<u8> {
    let mut out = String::from("n,sum_a,sum_n_a,sum_phi,sum_n_phi,tail_a,tail_n_a,tail_phi\n");
    for r in &c.rows {
        out.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            r.n, r.sum_a, r.sum_n_a, r.sum_phi, r.sum_n_phi, r.tail_a, r.tail_n_a, r.tail_phi
        ));
    }
    out.into_bytes()
}

fn emit<W: Write>(name: &str, json: &str, files: &[SideFile], stdout: &mut W, config: &RunConfig) -> Result<()> {
    stdout.write_all(json.as_bytes())?;
    if let Some(dir) = &config.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), json)?;
        for (file, bytes) in files {
            std::fs::write(dir.join(file), bytes)?;
        }
    }
    Ok(())
}
