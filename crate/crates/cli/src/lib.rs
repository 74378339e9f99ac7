//! Command-line front end. [`run`] parses arguments, calls the library and
//! returns the exit code with the text to print, so tests can drive it
//! in-process.
//!
//! Exit codes: 0 on success, 1 when the library reports a domain error, 2 on
//! usage errors and unreadable or malformed input.

use std::fs;
use std::path::{Path, PathBuf};

use chaincalc::chain::{Chain, Segment, SetTuple};
use chaincalc::constants::{self, LadderConfig};
use chaincalc::formula;
use chaincalc::homog::{self, PairColoring};
use chaincalc::interp::{self, Interpretation};
use chaincalc::randomgraph::{self, Graph};
use chaincalc::theory::{self, LabeledChain, Theory};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Default cap on enumerations, overridable with `CHAINCALC_CAP`.
pub const CAP_ENV: &str = "CHAINCALC_CAP";

#[derive(Debug, Parser)]
#[command(name = "chaincalc", version, about = "Partial theories of monadic logic over finite chains")]
pub struct Cli {
    /// Pretty-print JSON output.
    #[arg(long, global = true)]
    pub pretty: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Partial theories.
    #[command(subcommand)]
    Theory(TheoryCmd),
    /// Random graphs and bigness.
    #[command(subcommand)]
    Graph(GraphCmd),
    /// Semi-homogeneous sets and suitable blocks.
    #[command(subcommand)]
    Homog(HomogCmd),
    /// Interpretations of graphs in chains.
    #[command(subcommand)]
    Interp(InterpCmd),
    /// Ramsey bounds and the constant ladder.
    #[command(subcommand)]
    Constants(ConstantsCmd),
}

#[derive(Debug, Args)]
pub struct Instance {
    /// Chain length.
    #[arg(long)]
    pub chain: usize,
    /// Subset tuple as JSON lists, e.g. "[[0,2],[1]]".
    #[arg(long, default_value = "[]")]
    pub sets: String,
}

#[derive(Debug, Subcommand)]
pub enum TheoryCmd {
    /// Th^n of a chain with distinguished subsets.
    Compute {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        instance: Instance,
    },
    /// Formal sum of two theory files.
    Compose {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
    },
    /// All theories realised by finite chains.
    Enumerate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        arity: usize,
        /// Print only the number of theories.
        #[arg(long)]
        count: bool,
    },
    /// Decide a formula from a theory file.
    Decide {
        #[arg(long)]
        theory: PathBuf,
        #[arg(long)]
        formula: String,
    },
    /// Probe whether Th^m of labelled sums is a function of the index theory.
    FvProbe {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        /// JSON list of labelled chains, each {"labels": [theory, ...]}.
        #[arg(long)]
        instances: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum GraphCmd {
    /// Check K-randomness, reporting a violating pair if any.
    CheckRandom {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Search a bigness witness for a vertex set.
    Bigness {
        #[arg(long)]
        graph: PathBuf,
        /// Vertex list as JSON.
        #[arg(long)]
        set: String,
        #[arg(long)]
        k1: usize,
        #[arg(long)]
        k2: usize,
    },
    /// Find a big cell of a partition of a big set.
    Split {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        set: String,
        /// Cells as JSON lists.
        #[arg(long)]
        parts: String,
        #[arg(long)]
        k1: usize,
        #[arg(long)]
        k2: usize,
    },
    /// Generate a graph.
    Gen {
        #[arg(long)]
        n: usize,
        /// Edge probability; ignored with --bits.
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// The bit graph: i < j adjacent iff bit i of j is set.
        #[arg(long)]
        bits: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Side {
    Right,
    Left,
    Both,
}

#[derive(Debug, Args)]
pub struct ColoringSource {
    /// Colouring file.
    #[arg(long, conflicts_with = "random")]
    pub coloring: Option<PathBuf>,
    /// Use a seeded random colouring of this size instead.
    #[arg(long, requires_all = ["colors", "seed"])]
    pub random: Option<usize>,
    #[arg(long)]
    pub colors: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum HomogCmd {
    /// Check semi-homogeneity of an index set.
    Check {
        #[command(flatten)]
        source: ColoringSource,
        #[arg(long)]
        set: String,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value = "both")]
        side: Side,
    },
    /// Greedy extraction of a semi-homogeneous set.
    Extract {
        #[command(flatten)]
        source: ColoringSource,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "both")]
        side: Side,
    },
    /// Suitable block sequence of a chain.
    Blocks {
        #[command(flatten)]
        instance: Instance,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        k: usize,
    },
}

#[derive(Debug, Args)]
pub struct InterpSource {
    /// Interpretation file.
    #[arg(long)]
    pub file: PathBuf,
    /// Chain length.
    #[arg(long)]
    pub chain: usize,
}

#[derive(Debug, Subcommand)]
pub enum InterpCmd {
    /// Validate an interpretation and print the quotient graph.
    Verify {
        #[arg(long)]
        file: PathBuf,
        /// Chain length.
        #[arg(long, alias = "chain")]
        prefix: usize,
        /// Also tabulate separators for pairs of sets of size < k.
        #[arg(long)]
        k: Option<usize>,
        /// Restrict the separation table to these representatives (JSON list of tuples).
        #[arg(long)]
        pool: Option<String>,
    },
    /// Bouquet size of a segment.
    Bouquet {
        #[command(flatten)]
        source: InterpSource,
        /// Segment as "[lo,hi]".
        #[arg(long)]
        segment: String,
    },
    /// Major, fat and consistency flags at every cut.
    Cuts {
        #[command(flatten)]
        source: InterpSource,
        #[arg(long)]
        k1: usize,
        #[arg(long)]
        k2: usize,
        /// Override M1 instead of enumerating |T_{n,3d}|.
        #[arg(long)]
        m1: Option<u128>,
    },
    /// Vicinity of a representative for the initial segment [0, q).
    Vicinity {
        #[command(flatten)]
        source: InterpSource,
        #[arg(long)]
        tuple: String,
        #[arg(long)]
        q: usize,
    },
    /// Print the built-in interpretation of a 2-random graph.
    Fact26 {
        #[arg(long)]
        prefix: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum ConstantsCmd {
    /// The constant ladder as JSON.
    Ladder {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        m_star: Option<usize>,
        /// Digits allowed in an exact value.
        #[arg(long, default_value_t = constants::DEFAULT_SIZE_CAP)]
        exact_cap: u64,
    },
    /// Ramsey upper bound, and the exact value by search with --max-n.
    Ramsey {
        #[arg(long)]
        colors: u64,
        #[arg(long)]
        target: u64,
        #[arg(long, default_value_t = 2)]
        uniformity: u8,
        #[arg(long)]
        max_n: Option<usize>,
        #[arg(long, default_value_t = 100_000_000)]
        work_cap: u64,
    },
}

/// Exit code and the text for stdout or stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

enum Failure {
    Usage(String),
    Domain(String),
}

impl<E: Into<chaincalc::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Domain(e.into().to_string())
    }
}

type Res<T> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Res<T> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("malformed {}: {e}", path.display())))
}

fn parse_json<T: DeserializeOwned>(what: &str, text: &str) -> Res<T> {
    serde_json::from_str(text).map_err(|e| usage(format!("malformed {what}: {e}")))
}

fn cap(default: usize) -> Res<usize> {
    match std::env::var(CAP_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| usage(format!("{CAP_ENV} must be a number, got {v:?}"))),
        Err(_) => Ok(default),
    }
}

fn chain(len: usize) -> Res<Chain> {
    Ok(Chain::new(len)?)
}

fn instance(i: &Instance) -> Res<(Chain, SetTuple)> {
    let c = chain(i.chain)?;
    let t: SetTuple = parse_json("--sets", &i.sets)?;
    t.check_over(&c)?;
    Ok((c, t))
}

fn coloring(src: &ColoringSource) -> Res<PairColoring> {
    match (&src.coloring, src.random) {
        (Some(p), _) => read_json(p),
        (None, Some(size)) => Ok(PairColoring::random(size, src.colors.unwrap_or(2), src.seed.unwrap_or(0))),
        (None, None) => Err(usage("give --coloring FILE or --random SIZE --colors C --seed S")),
    }
}

fn rep_cap() -> Res<u128> {
    Ok(cap(1 << 20)? as u128)
}

/// Validation report of `interp verify`.
#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub chain: usize,
    pub depth: usize,
    pub representatives: usize,
    pub classes: usize,
    pub quotient: interp::Quotient,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation: Option<Vec<interp::SeparationCase>>,
}

#[derive(Debug, Serialize)]
struct RandomReport {
    k: usize,
    random: bool,
    violation: Option<(Vec<usize>, Vec<usize>)>,
}

#[derive(Debug, Serialize)]
struct RamseyReport {
    uniformity: u8,
    colors: u64,
    target: u64,
    upper: constants::Magnitude,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<Option<usize>>,
}

#[derive(Debug, Serialize)]
struct Count {
    count: usize,
}

#[derive(Debug, Serialize)]
struct Decision {
    holds: bool,
}

#[derive(Debug, Serialize)]
struct Verdict {
    holds: bool,
}

#[derive(Debug, Serialize)]
struct Size {
    size: usize,
}

fn emit<T: Serialize>(value: &T, pretty: bool) -> Res<String> {
    let s = if pretty { serde_json::to_string_pretty(value) } else { serde_json::to_string(value) };
    s.map_err(|e| Failure::Domain(format!("cannot serialise the result: {e}")))
}

fn dispatch(cli: &Cli) -> Res<String> {
    let p = cli.pretty;
    match &cli.command {
        Command::Theory(cmd) => match cmd {
            TheoryCmd::Compute { n, instance: i } => {
                let (c, t) = instance(i)?;
                emit(&theory::th(*n, &c, &t)?, p)
            }
            TheoryCmd::Compose { left, right } => {
                let a: Theory = read_json(left)?;
                let b: Theory = read_json(right)?;
                emit(&theory::add(&a, &b)?, p)
            }
            TheoryCmd::Enumerate { n, arity, count } => {
                let all = theory::enumerate_fin(*n, *arity, cap(theory::DEFAULT_CAP)?)?;
                if *count {
                    emit(&Count { count: all.len() }, p)
                } else {
                    emit(&all, p)
                }
            }
            TheoryCmd::Decide { theory: path, formula: text } => {
                let t: Theory = read_json(path)?;
                let f = formula::parse(text).map_err(|e| usage(e.to_string()))?;
                emit(&Decision { holds: theory::decide(&t, &f)? }, p)
            }
            TheoryCmd::FvProbe { m, n, instances } => {
                let inst: Vec<LabeledChain> = read_json(instances)?;
                emit(&theory::fv_probe(*m, *n, &inst)?, p)
            }
        },
        Command::Graph(cmd) => match cmd {
            GraphCmd::CheckRandom { graph, k } => {
                let g: Graph = read_json(graph)?;
                let violation = randomgraph::randomness_violation(&g, *k)?;
                emit(&RandomReport { k: *k, random: violation.is_none(), violation }, p)
            }
            GraphCmd::Bigness { graph, set, k1, k2 } => {
                let g: Graph = read_json(graph)?;
                let a: Vec<usize> = parse_json("--set", set)?;
                emit(&randomgraph::is_big(&g, &a, *k1, *k2)?, p)
            }
            GraphCmd::Split { graph, set, parts, k1, k2 } => {
                let g: Graph = read_json(graph)?;
                let a: Vec<usize> = parse_json("--set", set)?;
                let cells: Vec<Vec<usize>> = parse_json("--parts", parts)?;
                emit(&randomgraph::split_big(&g, &a, &cells, *k1, *k2)?, p)
            }
            GraphCmd::Gen { n, p: prob, seed, bits } => {
                let g = if *bits {
                    Graph::bit_graph(*n)
                } else {
                    let seed = seed.ok_or_else(|| usage("random graphs need --seed"))?;
                    randomgraph::gen_graph(*n, *prob, seed)?
                };
                emit(&g, p)
            }
        },
        Command::Homog(cmd) => match cmd {
            HomogCmd::Check { source, set, k, side } => {
                let f = coloring(source)?;
                let t: Vec<usize> = parse_json("--set", set)?;
                let holds = match side {
                    Side::Right => homog::is_right_sh(&f, &t, *k)?,
                    Side::Left => homog::is_left_sh(&f, &t, *k)?,
                    Side::Both => homog::is_sh(&f, &t, *k)?,
                };
                emit(&Verdict { holds }, p)
            }
            HomogCmd::Extract { source, k, n, side } => {
                let f = coloring(source)?;
                let out = match side {
                    Side::Right => homog::extract_right(&f, *k, *n)?,
                    Side::Left => homog::extract_left(&f, *k, *n)?,
                    Side::Both => homog::extract_two_sided(&f, *k, *n)?,
                };
                emit(&out, p)
            }
            HomogCmd::Blocks { instance: i, r, k } => {
                let (c, t) = instance(i)?;
                emit(&homog::find_suitable_blocks(&c, &t, *r, *k)?, p)
            }
        },
        Command::Interp(cmd) => match cmd {
            InterpCmd::Verify { file, prefix, k, pool } => {
                let i: Interpretation = read_json(file)?;
                i.validate_layout()?;
                let c = chain(*prefix)?;
                let q = interp::build_graph(&c, &i, rep_cap()?)?;
                let separation = match k {
                    Some(k) => {
                        let pool: Vec<SetTuple> = match pool {
                            Some(text) => parse_json("--pool", text)?,
                            None => q.leaders.iter().map(|&r| q.reps[r].clone()).collect(),
                        };
                        Some(interp::separation_table(&q, &pool, *k)?)
                    }
                    None => None,
                };
                emit(
                    &VerifyReport {
                        chain: *prefix,
                        depth: i.depth(),
                        representatives: q.reps.len(),
                        classes: q.class_count(),
                        quotient: q,
                        separation,
                    },
                    p,
                )
            }
            InterpCmd::Bouquet { source, segment } => {
                let i: Interpretation = read_json(&source.file)?;
                let seg: Segment = parse_json("--segment", segment)?;
                emit(&Size { size: interp::bouquet(&chain(source.chain)?, &i, &seg, rep_cap()?)? }, p)
            }
            InterpCmd::Cuts { source, k1, k2, m1 } => {
                let i: Interpretation = read_json(&source.file)?;
                let m1 = match m1 {
                    Some(m) => *m,
                    None => interp::m1_finite(&i, cap(theory::DEFAULT_CAP)?)?,
                };
                emit(&interp::cut_report(&chain(source.chain)?, &i, *k1, *k2, m1, rep_cap()?)?, p)
            }
            InterpCmd::Vicinity { source, tuple, q } => {
                let i: Interpretation = read_json(&source.file)?;
                let x: SetTuple = parse_json("--tuple", tuple)?;
                emit(&interp::vicinity(&chain(source.chain)?, &i, &x, *q, rep_cap()?)?, p)
            }
            InterpCmd::Fact26 { prefix } => emit(&interp::fact26(*prefix)?, p),
        },
        Command::Constants(cmd) => match cmd {
            ConstantsCmd::Ladder { n, d, m_star, exact_cap } => {
                let cfg = LadderConfig { n: *n, d: *d, m_star: *m_star, size_cap: *exact_cap, enum_cap: cap(theory::DEFAULT_CAP)? };
                emit(&constants::ladder(&cfg)?, p)
            }
            ConstantsCmd::Ramsey { colors, target, uniformity, max_n, work_cap } => {
                let upper = constants::ramsey_upper(*uniformity, *colors, *target)?;
                let exact = match max_n {
                    Some(m) if *uniformity == 2 => Some(constants::ramsey_exact(*colors, *target as usize, *m, *work_cap)?),
                    Some(_) => return Err(usage("exact search covers pairs only")),
                    None => None,
                };
                emit(&RamseyReport { uniformity: *uniformity, colors: *colors, target: *target, upper, exact }, p)
            }
        },
    }
}

/// Runs one invocation; `args` includes the program name.
pub fn run<I, T>(args: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Output { code: 2, stdout: String::new(), stderr: text }
            } else {
                // --help and --version
                Output { code: 0, stdout: text, stderr: String::new() }
            };
        }
    };
    match dispatch(&cli) {
        Ok(mut s) => {
            s.push('\n');
            Output { code: 0, stdout: s, stderr: String::new() }
        }
        Err(Failure::Domain(m)) => Output { code: 1, stdout: String::new(), stderr: format!("error: {m}\n") },
        Err(Failure::Usage(m)) => Output { code: 2, stdout: String::new(), stderr: format!("usage error: {m}\n") },
    }
}
