//! `hdnn`: explore, compile, simulate and estimate accelerator designs.

mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hdnn_core::compiler::{compile_model, CompiledModel, Schedule};
use hdnn_core::dse::{design_point, enumerate_hw, explore};
use hdnn_core::error::Error;
use hdnn_core::isa::{Opcode, Program};
use hdnn_core::model::{parse_model, random_model_data, reference_forward, DnnModel};
use hdnn_core::perfmodel::{fits, model_latency, resource_usage, HwConfig, Platform, ResourceUsage};
use hdnn_core::simulator::{simulate_model, simulate_timing, SimOptions, Summary};

use report::{CompileReport, DesignFile, DesignReport, ErrorReport, EstimateReport, ExploreReport};

const ORACLE_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "hdnn", version, about = "Hybrid Spatial/Winograd accelerator toolchain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search hardware parameters and per-layer schedules.
    Explore {
        #[command(flatten)]
        run: RunArgs,
        /// Ranked candidates to include in the report.
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Emit the instruction stream and DRAM memory map for a design.
    Compile {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the compiled program on the cycle-level simulator.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Binary program to run instead of the freshly compiled one.
        #[arg(long)]
        program: Option<PathBuf>,
        /// Write a `cycle,module,event,index` trace.
        #[arg(long)]
        trace: bool,
        /// Serialize all modules (debug).
        #[arg(long)]
        no_double_buffer: bool,
        /// Count cycles only; skips data movement and the oracle check.
        #[arg(long)]
        timing_only: bool,
    },
    /// Analytical latency and resource report for a design.
    Estimate {
        #[command(flatten)]
        run: RunArgs,
    },
}

/// Inputs shared by every subcommand.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    platform: PathBuf,
    /// Per-layer mode/dataflow override (JSON).
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Design point written by `explore` or `compile`; explored when omitted.
    #[arg(long)]
    design: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for the random input and weights.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Golden report to diff the fresh report against.
    #[arg(long)]
    check: Option<PathBuf>,
}

struct Failure {
    code: &'static str,
    message: String,
}

impl Failure {
    fn new(code: &'static str, message: impl ToString) -> Self {
        Failure {
            code,
            message: message.to_string(),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn core_code(e: &Error) -> &'static str {
    match e {
        Error::Parse(_) | Error::InvalidLayer { .. } | Error::UnsupportedStride(_) | Error::ShapeMismatch(_) => {
            "E_MODEL"
        }
        Error::Platform(_) => "E_PLATFORM",
        Error::InvalidSchedule(_) => "E_SCHEDULE",
        Error::InvalidHw(_) => "E_DESIGN",
        Error::Unmappable { .. }
        | Error::DramCapacity { .. }
        | Error::Dependency { .. }
        | Error::FieldOverflow { .. } => "E_COMPILE",
        Error::NoFeasibleHw(_) | Error::NoCandidates => "E_DSE",
        Error::InvalidOpcode(_) | Error::InvalidWord(_) | Error::ProgramFormat(_) => "E_PROGRAM",
        Error::Deadlock { .. } | Error::BufferOverrun { .. } | Error::DramOutOfBounds { .. } => "E_SIM",
        Error::UnsupportedWinograd { .. } => "E_INTERNAL",
        Error::Io(_) => "E_IO",
        Error::Json(_) => "E_JSON",
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::new(core_code(&e), e)
    }
}

fn read(path: &Path, code: &'static str) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::new(code, format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| Failure::new("E_IO", format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<serde_json::Value> {
    let v = serde_json::to_value(value).map_err(|e| Failure::new("E_JSON", e))?;
    let text = serde_json::to_string_pretty(&v).map_err(|e| Failure::new("E_JSON", e))?;
    write(path, text + "\n")?;
    Ok(v)
}

/// Resolved inputs of one run.
struct Manifest {
    model: DnnModel,
    platform: Platform,
    schedule: Option<Schedule>,
    design: Option<DesignFile>,
    out: PathBuf,
    seed: u64,
    check: Option<PathBuf>,
}

impl Manifest {
    fn load(args: &RunArgs) -> CliResult<Manifest> {
        let model = parse_model(&read(&args.model, "E_MODEL")?).map_err(|e| Failure::new("E_MODEL", e))?;
        let platform =
            Platform::parse(&read(&args.platform, "E_PLATFORM")?).map_err(|e| Failure::new("E_PLATFORM", e))?;
        let schedule = match &args.schedule {
            Some(p) => {
                let s: Schedule =
                    serde_json::from_str(&read(p, "E_SCHEDULE")?).map_err(|e| Failure::new("E_SCHEDULE", e))?;
                s.validate(&model).map_err(|e| Failure::new("E_SCHEDULE", e))?;
                Some(s)
            }
            None => None,
        };
        let design = match &args.design {
            Some(p) => Some(serde_json::from_str(&read(p, "E_DESIGN")?).map_err(|e| Failure::new("E_DESIGN", e))?),
            None => None,
        };
        fs::create_dir_all(&args.out).map_err(|e| Failure::new("E_IO", format!("{}: {e}", args.out.display())))?;
        Ok(Manifest {
            model,
            platform,
            schedule,
            design,
            out: args.out.clone(),
            seed: args.seed,
            check: args.check.clone(),
        })
    }

    /// Hardware and schedule to use: the given design, else the explored
    /// best; an explicit `--schedule` overrides either.
    fn design(&self) -> CliResult<(HwConfig, Schedule)> {
        let (hw, schedule) = match &self.design {
            Some(d) => {
                let hw = HwConfig::new(d.pi, d.po, d.pt, d.ni, self.platform.clone())
                    .map_err(|e| Failure::new("E_DESIGN", e))?;
                let schedule = match &d.schedule {
                    Some(s) => s.clone(),
                    None => hdnn_core::dse::schedule_layers(&hw, &self.model)?.0,
                };
                (hw, schedule)
            }
            None => {
                let best = explore(&self.model, &self.platform)?.best;
                log::info!("explored design {}", best.hw.label());
                (best.hw, best.schedule)
            }
        };
        let schedule = self.schedule.clone().unwrap_or(schedule);
        schedule
            .validate(&self.model)
            .map_err(|e| Failure::new("E_SCHEDULE", e))?;
        Ok((hw, schedule))
    }

    fn check(&self, report: &serde_json::Value) -> CliResult<()> {
        let Some(golden) = &self.check else {
            return Ok(());
        };
        let want: serde_json::Value =
            serde_json::from_str(&read(golden, "E_CHECK")?).map_err(|e| Failure::new("E_CHECK", e))?;
        let diffs = report::diff(report, &want);
        if diffs.is_empty() {
            println!("CHECK PASS: report matches {}", golden.display());
            Ok(())
        } else {
            Err(Failure::new(
                "E_CHECK",
                format!("{} field(s) differ: {}", diffs.len(), diffs.join("; ")),
            ))
        }
    }
}

fn design_file(hw: &HwConfig, schedule: &Schedule) -> DesignFile {
    DesignFile {
        pi: hw.pi,
        po: hw.po,
        pt: hw.pt,
        ni: hw.ni,
        schedule: Some(schedule.clone()),
    }
}

fn cmd_explore(m: &Manifest, top: usize) -> CliResult<()> {
    let cands = enumerate_hw(&m.platform)?;
    let e = explore(&m.model, &m.platform)?;
    let report = ExploreReport {
        model: m.model.name.clone(),
        platform: m.platform.name.clone(),
        candidates: cands.hw.len(),
        frontier: e.frontier.iter().map(HwConfig::label).collect(),
        best: DesignReport::from_point(&e.best),
        ranked: e.ranked.iter().take(top).map(DesignReport::from_point).collect(),
    };
    let v = write_json(&m.out.join("explore.json"), &report)?;
    write_json(&m.out.join("design.json"), &design_file(&e.best.hw, &e.best.schedule))?;
    println!(
        "best {} latency {:.6} s, {:.1} GOPS over {} candidates",
        e.best.hw.label(),
        e.best.total_latency,
        e.best.throughput / 1e9,
        cands.hw.len()
    );
    m.check(&v)
}

fn compile(m: &Manifest) -> CliResult<(HwConfig, CompiledModel)> {
    let (hw, schedule) = m.design()?;
    let compiled = compile_model(&m.model, &schedule, &hw)?;
    Ok((hw, compiled))
}

fn cmd_compile(m: &Manifest) -> CliResult<()> {
    let (hw, compiled) = compile(m)?;
    let bytes = compiled.program.to_bytes()?;
    write(&m.out.join("program.bin"), &bytes)?;
    write(&m.out.join("program.asm"), compiled.program.disassemble())?;
    write_json(&m.out.join("memory_map.json"), &compiled.map)?;
    write_json(&m.out.join("design.json"), &design_file(&hw, &compiled.schedule))?;
    let per_opcode: BTreeMap<String, usize> = [
        Opcode::LoadInp,
        Opcode::LoadWgt,
        Opcode::LoadBias,
        Opcode::Comp,
        Opcode::Save,
    ]
    .into_iter()
    .map(|op| (op.mnemonic().to_string(), compiled.program.count(op)))
    .collect();
    let report = CompileReport {
        model: m.model.name.clone(),
        design: hw.label(),
        instructions: compiled.program.len(),
        per_opcode,
        program_bytes: bytes.len(),
        dram_words: compiled.map.total_words,
    };
    let v = write_json(&m.out.join("compile.json"), &report)?;
    println!(
        "{} instructions for {} ({} DRAM words)",
        compiled.program.len(),
        hw.label(),
        compiled.map.total_words
    );
    m.check(&v)
}

fn cmd_simulate(
    m: &Manifest,
    program: Option<&Path>,
    trace: bool,
    no_double_buffer: bool,
    timing_only: bool,
) -> CliResult<()> {
    let (hw, mut compiled) = compile(m)?;
    if let Some(path) = program {
        let bytes = fs::read(path).map_err(|e| Failure::new("E_PROGRAM", format!("{}: {e}", path.display())))?;
        let loaded = Program::from_bytes(&bytes)?;
        if loaded.len() != compiled.program.len() {
            return Err(Failure::new(
                "E_PROGRAM",
                format!(
                    "program has {} instructions, the design compiles to {}",
                    loaded.len(),
                    compiled.program.len()
                ),
            ));
        }
        compiled.program.instructions = loaded.instructions;
    }
    let opts = SimOptions {
        double_buffer: !no_double_buffer,
        trace,
        timing_only,
    };
    let (result, summary, verdict) = if timing_only {
        let (result, summary) = simulate_timing(&m.model, &compiled, &hw, opts)?;
        (result, summary, None)
    } else {
        let (input, params) = random_model_data(&m.model, m.seed);
        let run = simulate_model(&m.model, &compiled, &hw, &input, &params, opts)?;
        let outputs = reference_forward(&m.model, &input, &params)?;
        let reference =
            hdnn_core::model::host_ops(&m.model, m.model.len() - 1, outputs.last().expect("non-empty").clone());
        let diff = run.output.max_rel_diff(&reference);
        write(&m.out.join("activations.bin"), run.output.to_le_bytes())?;
        write(&m.out.join("oracle.bin"), reference.to_le_bytes())?;
        (run.result, run.summary, Some(diff))
    };
    let v = write_json(&m.out.join("summary.json"), &summary)?;
    if trace {
        write(&m.out.join("trace.csv"), result.trace_text())?;
    }
    print_summary(&summary, &hw);
    if let Some(diff) = verdict {
        write_json(
            &m.out.join("oracle.json"),
            &serde_json::json!({ "max_rel_diff": diff, "tolerance": ORACLE_TOL, "pass": diff <= ORACLE_TOL }),
        )?;
        if diff > ORACLE_TOL {
            println!("FAIL: output deviates from oracle");
            return Err(Failure::new(
                "E_MISMATCH",
                format!("max relative difference {diff:e} exceeds {ORACLE_TOL:e}"),
            ));
        }
        println!("PASS: output matches oracle");
    }
    m.check(&v)
}

fn print_summary(s: &Summary, hw: &HwConfig) {
    println!(
        "{} cycles ({:.6} s at {} MHz), {} stall cycles, {:.2} GOPS",
        s.total_cycles,
        s.total_cycles as f64 / hw.platform.freq_hz,
        hw.platform.freq_hz / 1e6,
        s.stall_cycles,
        s.gops_at_freq
    );
}

fn cmd_estimate(m: &Manifest) -> CliResult<()> {
    let (hw, schedule) = m.design()?;
    let lat = model_latency(&m.model, &hw, &schedule)?;
    let point = design_point(&hw, &m.model, schedule, lat.layers.clone());
    let caps = &m.platform.caps;
    let report = EstimateReport {
        model: m.model.name.clone(),
        platform: m.platform.name.clone(),
        design: DesignReport::new(&hw, &lat.layers, lat.total, lat.throughput_ops, resource_usage(&hw)),
        caps: ResourceUsage {
            lut: caps.lut,
            dsp: caps.dsp,
            bram: caps.bram,
        },
        fits: fits(&hw),
    };
    let v = write_json(&m.out.join("estimate.json"), &report)?;
    println!(
        "{} latency {:.6} s, {:.1} GOPS, fits: {}",
        hw.label(),
        point.total_latency,
        point.throughput / 1e9,
        report.fits
    );
    m.check(&v)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Explore { run, top } => cmd_explore(&Manifest::load(&run)?, top),
        Command::Compile { run } => cmd_compile(&Manifest::load(&run)?),
        Command::Simulate {
            run,
            program,
            trace,
            no_double_buffer,
            timing_only,
        } => cmd_simulate(
            &Manifest::load(&run)?,
            program.as_deref(),
            trace,
            no_double_buffer,
            timing_only,
        ),
        Command::Estimate { run } => cmd_estimate(&Manifest::load(&run)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HDNN_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let report = ErrorReport {
                code: f.code,
                message: f.message,
            };
            eprintln!("{}", serde_json::to_string(&report).expect("error report serializes"));
            ExitCode::from(2)
        }
    }
}
