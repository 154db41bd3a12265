//! Command-line front end: argument parsing, file I/O, and JSON/CSV
//! emission. Every subcommand is a thin adapter over the library; no
//! numeric logic lives here.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::brick::{
    check_admissible, check_evanescent, report_to_csv, run_experiment, AdmissibilityReport,
    EvanescenceReport, ExperimentConfig, GaugeRule, GaugeSpec,
};
use crate::certify::{scan_levels, CertifyContext, CertifyMode};
use crate::debruijn::{build_graph, cycle_records, enumerate_cycles, CycleRecord};
use crate::haar::{
    forward_transform, HaarCoefficients, SequenceSpec, StepFunction, MAX_LEVEL,
};
use crate::optimize::ergodic_supremum;
use crate::polytope::{build_polytope, face_census};
use crate::rat::{format_rat, parse_rat, Rat};
use crate::{Error, Result};

/// Level cap the CLI validates depth-like flags against: the library's
/// hard cap, lowered (never raised) by the SHIFTMAX_MAX_LEVEL environment
/// variable.
pub fn level_cap() -> u32 {
    std::env::var("SHIFTMAX_MAX_LEVEL")
        .ok()
        .and_then(|v| v.trim().parse::<u32>().ok())
        .map_or(MAX_LEVEL, |v| v.min(MAX_LEVEL))
}

#[derive(Parser)]
#[command(
    name = "shiftmax",
    version,
    about = "Ergodic optimization of step functions on the binary shift: \
             de Bruijn cycles, rotation polytopes, maximizing orbits, \
             certification, and brick experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for randomized subcommands (overrides any config value).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write the JSON output to this path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write the per-sample CSV table (experiment only).
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Conservative,
    Sharp,
}

impl From<ModeArg> for CertifyMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Conservative => CertifyMode::Conservative,
            ModeArg::Sharp => CertifyMode::Sharp,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// List the simple cycles of the level-n de Bruijn graph as canonical
    /// periodic words with periods and cylinder-frequency vectors.
    Graph {
        #[arg(long)]
        n: u32,
        /// Also write the JSON output to this path.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Emit the level-n rotation polytope: vertices, dimension, edges, and
    /// (with --faces) the face census by dimension.
    Polytope {
        #[arg(long)]
        n: u32,
        /// Enumerate the full face lattice (exponential; capped at low n).
        #[arg(long)]
        faces: bool,
        /// Also write the JSON output to this path.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Maximize a step function over invariant measures: ergodic supremum,
    /// maximizing periodic orbit, and the gap to the second-best vertex.
    Optimize {
        /// Step function as JSON {"level": n, "values": ["p/q", ...]}.
        #[arg(long)]
        function: PathBuf,
    },
    /// Certify that a function's maximizing measure is its truncation's
    /// maximizing orbit, via the gap criterion against a coefficient tail.
    Certify {
        /// The known part: a step function {"level", "values"} or Haar
        /// coefficients {"mean", "coeffs"}.
        #[arg(long)]
        head: PathBuf,
        /// Tail description: JSON {"sequence": ..., "gauge": ...,
        /// "lip0": "p/q"} (all fields optional).
        #[arg(long)]
        gauge: PathBuf,
        /// Deepest level to scan.
        #[arg(long, default_value_t = 6)]
        max_level: u32,
        /// Tail accounting: conservative (analytic bound from level n on)
        /// or sharp (actual known coefficients below the head's depth).
        #[arg(long, value_enum, default_value_t = ModeArg::Sharp)]
        mode: ModeArg,
    },
    /// Sample functions from a Hilbert brick and report how often the gap
    /// criterion certifies, per level, against the proved failure bounds.
    Experiment {
        /// Experiment configuration JSON; see the library's config schema.
        #[arg(long)]
        config: PathBuf,
        /// Number of samples (overrides the config value).
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Check a modulus sequence and a gauge for evanescence and
    /// admissibility at a finite horizon.
    CheckGauge {
        /// Modulus sequence: "default", "doubly-exponential:e0=K",
        /// "geometric:log2theta=p/q", or "table:r1,r2,...".
        #[arg(long)]
        a: String,
        /// Gauge: "2^-n*a_n", "a_n", "1/n*a_n", "zero",
        /// "scaled:s=S,t=T", or "table:r1,r2,...".
        #[arg(long)]
        b: String,
        /// Deepest level both checks inspect.
        #[arg(long, default_value_t = 20)]
        horizon: usize,
    },
}

/// Parses the sequence DSL used by check-gauge.
pub fn parse_sequence_dsl(s: &str) -> Result<SequenceSpec> {
    let s = s.trim();
    if s == "default" {
        return Ok(SequenceSpec::default());
    }
    if let Some(rest) = s.strip_prefix("doubly-exponential:") {
        let e0 = rest
            .strip_prefix("e0=")
            .and_then(|v| v.trim().parse::<u64>().ok())
            .ok_or_else(|| {
                Error::Parse(format!("expected doubly-exponential:e0=<integer>, got `{s}`"))
            })?;
        return Ok(SequenceSpec::DoublyExponential { e0 });
    }
    if let Some(rest) = s.strip_prefix("geometric:") {
        let log2_theta = rest
            .strip_prefix("log2theta=")
            .ok_or_else(|| {
                Error::Parse(format!("expected geometric:log2theta=<rational>, got `{s}`"))
            })
            .and_then(parse_rat)?;
        return Ok(SequenceSpec::Geometric { log2_theta });
    }
    if let Some(rest) = s.strip_prefix("table:") {
        let log2_values = rest
            .split(',')
            .map(parse_rat)
            .collect::<Result<Vec<Rat>>>()?;
        return Ok(SequenceSpec::Table { log2_values });
    }
    Err(Error::Parse(format!(
        "unknown sequence `{s}`; use default, doubly-exponential:e0=K, \
         geometric:log2theta=p/q, or table:r1,r2,..."
    )))
}

/// Parses the gauge DSL used by check-gauge.
pub fn parse_gauge_dsl(s: &str) -> Result<GaugeSpec> {
    let s = s.trim();
    match s {
        "2^-n*a_n" => {
            return Ok(GaugeSpec::new(GaugeRule::ScaledSequence {
                per_level_shift: -1,
                shift: 0,
            }))
        }
        "a_n" => {
            return Ok(GaugeSpec::new(GaugeRule::ScaledSequence {
                per_level_shift: 0,
                shift: 0,
            }))
        }
        "1/n*a_n" => return Ok(GaugeSpec::new(GaugeRule::Harmonic)),
        "zero" => return Ok(GaugeSpec::new(GaugeRule::Zero)),
        _ => {}
    }
    if let Some(rest) = s.strip_prefix("scaled:") {
        let mut per_level_shift = None;
        let mut shift = None;
        for part in rest.split(',') {
            match part.trim().split_once('=') {
                Some(("s", v)) => per_level_shift = v.trim().parse::<i64>().ok(),
                Some(("t", v)) => shift = v.trim().parse::<i64>().ok(),
                _ => {}
            }
        }
        let (Some(per_level_shift), Some(shift)) = (per_level_shift, shift) else {
            return Err(Error::Parse(format!(
                "expected scaled:s=<integer>,t=<integer>, got `{s}`"
            )));
        };
        return Ok(GaugeSpec::new(GaugeRule::ScaledSequence {
            per_level_shift,
            shift,
        }));
    }
    if let Some(rest) = s.strip_prefix("table:") {
        let log2_values = rest
            .split(',')
            .map(parse_rat)
            .collect::<Result<Vec<Rat>>>()?;
        return Ok(GaugeSpec::new(GaugeRule::LevelTable { log2_values }));
    }
    Err(Error::Parse(format!(
        "unknown gauge `{s}`; use 2^-n*a_n, a_n, 1/n*a_n, zero, \
         scaled:s=S,t=T, or table:r1,r2,..."
    )))
}

#[derive(Serialize)]
struct GraphOutput {
    n: u32,
    cycle_count: usize,
    cycles: Vec<CycleRecord>,
}

#[derive(Serialize)]
struct PolytopeOutput {
    n: u32,
    dim: i64,
    vertex_count: usize,
    vertices: Vec<CycleRecord>,
    edges: Vec<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    face_census: Option<BTreeMap<i64, usize>>,
}

#[derive(Serialize)]
struct OptimizeOutput {
    n: u32,
    ergsup: String,
    maximizer: String,
    period: u32,
    gap: String,
    tie: bool,
}

/// The head of a certification problem: either a fully known step function
/// (its deeper coefficients are genuinely zero, so the scan may extend past
/// its level) or a coefficient prefix (the scan stops at its depth, beyond
/// which only the gauge bounds the unknown).
#[derive(Deserialize)]
#[serde(untagged)]
enum HeadInput {
    Function(StepFunction),
    Coefficients(HaarCoefficients),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TailFile {
    #[serde(default)]
    sequence: SequenceSpec,
    #[serde(default)]
    gauge: GaugeSpec,
    #[serde(default)]
    lip0: Option<String>,
}

#[derive(Serialize)]
struct CheckGaugeOutput {
    evanescent: bool,
    admissible: bool,
    evanescence: EvanescenceReport,
    admissibility: AdmissibilityReport,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::Parse(format!(
            "malformed JSON in {} at line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

fn render_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::invalid(format!("cannot serialize output: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)
        .map_err(|e| Error::invalid(format!("cannot write {}: {e}", path.display())))
}

/// Prints to stdout and mirrors the same bytes to every requested path.
fn deliver(text: &str, paths: [Option<&PathBuf>; 2]) -> Result<()> {
    for p in paths.into_iter().flatten() {
        write_text(p, text)?;
    }
    print!("{text}");
    Ok(())
}

/// Runs one parsed invocation; the binary maps Err onto exit status 2.
pub fn dispatch(cli: Cli) -> Result<()> {
    if cli.csv.is_some() && !matches!(cli.command, Command::Experiment { .. }) {
        return Err(Error::invalid("--csv applies to the experiment subcommand"));
    }
    match cli.command {
        Command::Graph { n, emit } => {
            validate_level("--n", n, level_cap())?;
            let g = build_graph(n)?;
            let cycles = enumerate_cycles(&g)?;
            let records = cycle_records(&g, &cycles)?;
            let out = GraphOutput {
                n,
                cycle_count: records.len(),
                cycles: records,
            };
            deliver(&render_json(&out)?, [emit.as_ref(), cli.out.as_ref()])
        }
        Command::Polytope { n, faces, emit } => {
            validate_level("--n", n, level_cap())?;
            let p = build_polytope(n)?;
            let g = p.graph();
            let vertices = cycle_records(
                g,
                &(0..p.vertex_count())
                    .map(|i| p.cycle(i).clone())
                    .collect::<Vec<_>>(),
            )?;
            let face_census_out = if faces {
                Some(face_census(&p.face_lattice()?))
            } else {
                None
            };
            let out = PolytopeOutput {
                n,
                dim: p.dim(),
                vertex_count: p.vertex_count(),
                vertices,
                edges: p.edges(),
                face_census: face_census_out,
            };
            deliver(&render_json(&out)?, [emit.as_ref(), cli.out.as_ref()])
        }
        Command::Optimize { function } => {
            let f: StepFunction = read_json(&function)?;
            let opt = ergodic_supremum(&f)?;
            let out = OptimizeOutput {
                n: f.level().max(1),
                ergsup: format_rat(&opt.ergsup),
                maximizer: opt.maximizer.to_string(),
                period: opt.maximizer.period(),
                gap: format_rat(&opt.gap),
                tie: opt.tie,
            };
            deliver(&render_json(&out)?, [cli.out.as_ref(), None])
        }
        Command::Certify {
            head,
            gauge,
            max_level,
            mode,
        } => {
            validate_level("--max-level", max_level, level_cap())?;
            let tail: TailFile = read_json(&gauge)?;
            let lip0 = match &tail.lip0 {
                None => Rat::from_integer(0.into()),
                Some(s) => parse_rat(s)?,
            };
            // A step function is total knowledge: zero-pad so deeper levels
            // can be scanned. A coefficient prefix is partial: scan only to
            // its depth.
            let coeffs = match read_json::<HeadInput>(&head)? {
                HeadInput::Function(f) => {
                    forward_transform(&f).padded_to_level(max_level.max(f.level()))?
                }
                HeadInput::Coefficients(c) => c,
            };
            let scan_to = max_level.min(coeffs.level()).max(1);
            let ctx = CertifyContext::new(scan_to)?;
            let scan = scan_levels(
                &ctx,
                &coeffs,
                &tail.sequence,
                &tail.gauge,
                &lip0,
                CertifyMode::from(mode),
            )?;
            let cert = scan
                .smallest_certificate()
                .or(scan.levels.last())
                .ok_or_else(|| {
                    Error::invalid("the head carries no coefficient levels to scan")
                })?;
            deliver(&render_json(cert)?, [cli.out.as_ref(), None])
        }
        Command::Experiment { config, samples } => {
            let mut cfg: ExperimentConfig = read_json(&config)?;
            if let Some(n) = samples {
                cfg.samples = n;
            }
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let report = run_experiment(&cfg)?;
            if let Some(p) = &cli.csv {
                write_text(p, &report_to_csv(&report)?)?;
            }
            deliver(&render_json(&report)?, [cli.out.as_ref(), None])
        }
        Command::CheckGauge { a, b, horizon } => {
            let seq = parse_sequence_dsl(&a)?;
            seq.validate()?;
            let gauge = parse_gauge_dsl(&b)?;
            let evanescence = check_evanescent(&seq, gauge.c_eva_log2(), horizon.max(1))?;
            let admissibility = check_admissible(&gauge, &seq, horizon)?;
            println!(
                "evanescent: {}, admissible: {}",
                evanescence.ok,
                admissibility.ok()
            );
            if let Some(d) = &evanescence.detail {
                println!("  evanescence: {d}");
            }
            if !admissibility.ok() {
                println!("  admissibility: {}", admissibility.describe());
            }
            if let Some(p) = &cli.out {
                let out = CheckGaugeOutput {
                    evanescent: evanescence.ok,
                    admissible: admissibility.ok(),
                    evanescence,
                    admissibility,
                };
                write_text(p, &render_json(&out)?)?;
            }
            Ok(())
        }
    }
}

fn validate_level(flag: &str, n: u32, cap: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid(format!("{flag} must be at least 1")));
    }
    if n > cap {
        return Err(Error::cap(format!("{flag} = {n} exceeds the level cap {cap}")));
    }
    Ok(())
}
