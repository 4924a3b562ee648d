//! Command-line front end: build grammars, build and serialize indexes, run
//! queries, and run the differential self-test and benchmarks.
//!
//! TSV results go to stdout, diagnostics to stderr. Exit codes: 0 success,
//! 1 mismatch or assertion failure, 2 usage or IO errors.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use cooc_core::compress;
use cooc_core::index::Index;
use cooc_core::oracle;
use cooc_core::selftest;
use cooc_core::textfmt;
use cooc_core::GrammarKind;

#[derive(Parser)]
#[command(name = "cooc", version, about = "Consecutive co-occurrence queries on grammar-compressed text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a grammar file from raw text.
    Build {
        /// Input text file.
        input: PathBuf,
        /// Output grammar file.
        output: PathBuf,
        /// Also run the run-length transform (writes an RLSLP).
        #[arg(long)]
        rlslp: bool,
        /// Seed for the randomized transform levels.
        #[arg(long, default_value_t = 0xC00C)]
        seed: u64,
    },
    /// Build and serialize the query index from a grammar file.
    Index {
        /// Input grammar file (SLP or RLSLP).
        grammar: PathBuf,
        /// Output index file.
        output: PathBuf,
        /// Materialize all anchor quadruples up front (small grammars only).
        #[arg(long, value_name = "CAP", num_args = 0..=1, default_missing_value = "4096")]
        eager: Option<u64>,
        #[arg(long, default_value_t = 0xC00C)]
        seed: u64,
    },
    /// Report co-occurrences of two patterns.
    Query {
        /// Index file produced by `cooc index`.
        index: PathBuf,
        /// Patterns as literal bytes; omitted ones come from --p1-file /
        /// --p2-file.
        #[arg(value_name = "PATTERN", num_args = 0..=2)]
        patterns: Vec<String>,
        #[command(flatten)]
        mode: QueryMode,
        /// Read the first pattern from a file (binary safe).
        #[arg(long, value_name = "FILE")]
        p1_file: Option<PathBuf>,
        /// Read the second pattern from a file (binary safe).
        #[arg(long, value_name = "FILE")]
        p2_file: Option<PathBuf>,
    },
    /// Run the randomized differential suite.
    Selftest {
        /// Number of random texts.
        #[arg(long, default_value_t = 50)]
        n: u64,
        /// Maximum text length.
        #[arg(long, default_value_t = 200)]
        maxlen: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Inject a fault into index answers (harness validation; must fail).
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Time index construction and queries on generated corpora.
    Bench {
        /// Text length for the generated corpora.
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
        /// Number of query pattern pairs per corpus.
        #[arg(long, default_value_t = 100)]
        queries: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct QueryMode {
    /// Report b-close co-occurrences only.
    #[arg(long, value_name = "B")]
    b: Option<u64>,
    /// Report all co-occurrences regardless of distance.
    #[arg(long)]
    all: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Build { input, output, rlslp, seed } => {
            let text = fs::read(&input)?;
            let slp = compress::build_slp(&text)?;
            let n = slp.text_len();
            if rlslp {
                let (g, scheme) = compress::to_rlslp_seeded(&slp, seed)?;
                println!(
                    "g={} g'={} N={} height={}",
                    slp.len(),
                    g.len(),
                    n,
                    g.parse_height()
                );
                fs::write(&output, textfmt::write_grammar(&g, Some(&scheme)))?;
            } else {
                println!("g={} N={}", slp.len(), n);
                fs::write(&output, textfmt::write_grammar(&slp, None))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Index { grammar, output, eager, seed } => {
            let text = fs::read_to_string(&grammar)?;
            let (g, scheme) = textfmt::parse_grammar(&text)?;
            let idx = match g.kind() {
                GrammarKind::Slp => Index::build_from_slp(&g, seed)?,
                GrammarKind::Rlslp => {
                    Index::build_from_rlslp(g, scheme.unwrap_or_default(), seed)?
                }
            };
            if let Some(cap) = eager {
                let total = idx.co.build_eager(&idx.grammar, cap)?;
                eprintln!("eager: {total} quadruples materialized");
            }
            println!(
                "g'={} N={} height={} points={}",
                idx.grammar.len(),
                idx.grammar.text_len(),
                idx.grammar.parse_height(),
                idx.occ.total_points()
            );
            let mut f = fs::File::create(&output)?;
            idx.write_to(&mut f)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Query { index, patterns, mode, p1_file, p2_file } => {
            let f = fs::File::open(&index)?;
            let idx = Index::read_from(f)?;
            let mut literals = patterns.into_iter();
            let p1 = read_pattern(&mut literals, p1_file)?;
            let p2 = read_pattern(&mut literals, p2_file)?;
            if literals.next().is_some() {
                return Err("too many patterns".into());
            }
            let pairs = if mode.all {
                idx.report_all(&p1, &p2)?
            } else {
                idx.query_close(&p1, &p2, mode.b.unwrap() as i64)?
            };
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for c in pairs {
                writeln!(out, "{}\t{}", c.q1, c.q2)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest { n, maxlen, seed, inject_fault } => {
            let config = selftest::Config {
                cases: n,
                max_len: maxlen,
                seed,
                pairs_per_case: 6,
                fault: inject_fault.then_some(selftest::Fault::DropLastPair),
            };
            match selftest::run(&config) {
                Ok(report) => {
                    eprintln!(
                        "selftest: {} cases, {} queries, all matching",
                        report.cases, report.queries
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Err(m) => {
                    eprintln!("{m}");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Bench { n, queries, seed } => {
            bench(n, queries, seed);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn read_pattern(
    literals: &mut impl Iterator<Item = String>,
    file: Option<PathBuf>,
) -> Result<Vec<u8>, Box<dyn std::error::Error>> {
    match file {
        Some(f) => Ok(fs::read(f)?),
        None => literals
            .next()
            .map(String::into_bytes)
            .ok_or_else(|| "missing pattern".into()),
    }
}

fn bench(n: usize, queries: u32, seed: u64) {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    let corpora: Vec<(&str, Vec<u8>)> = vec![
        ("fibonacci", oracle::fibonacci_word(n)),
        ("thue-morse", oracle::thue_morse_word(n)),
    ];
    for (name, text) in corpora {
        let t0 = Instant::now();
        let idx = Index::build_from_text(&text, seed).expect("build");
        let built = t0.elapsed();
        let mut rng = StdRng::seed_from_u64(seed);
        let t1 = Instant::now();
        let mut total_pairs = 0usize;
        for _ in 0..queries {
            let m1 = rng.gen_range(1..=12).min(text.len());
            let at1 = rng.gen_range(0..=text.len() - m1);
            let m2 = rng.gen_range(1..=12).min(text.len());
            let at2 = rng.gen_range(0..=text.len() - m2);
            let b = rng.gen_range(0..=40u64);
            let p1 = &text[at1..at1 + m1];
            let p2 = &text[at2..at2 + m2];
            total_pairs += idx.query_close(p1, p2, b as i64).expect("query").len();
        }
        let queried = t1.elapsed();
        println!(
            "{name}: N={} g'={} height={} build={:.2?} {} queries={:.2?} pairs={}",
            text.len(),
            idx.grammar.len(),
            idx.grammar.parse_height(),
            built,
            queries,
            queried,
            total_pairs
        );
    }
}
