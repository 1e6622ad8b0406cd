mod literal;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use meminv::circuit::{build_inversion_circuit, clamp_instance, format};
use meminv::dynamics::{self, MemcomputingParams, ModelConfig, SimConfig};
use meminv::embedding::{
    build_embedding, oracle_divide, quotient_scalar, EmbeddingLayout, FixedPointScalar,
    OperandMode, Sign,
};
use meminv::harness::{
    config_echo, config_pairs, run_sweep, write_sweep_csv, write_trace_csv, SweepSpec,
};
use meminv::linear::{format_rational, invert_matrix, Execution, LinearError, Matrix2};
use num_bigint::BigUint;

use literal::{parse_sizes, Literal};

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_NO_CONVERGENCE: u8 = 2;

#[derive(Parser)]
#[command(name = "meminv", version, about = "Fixed-point inversion with self-organizing logic circuits")]
struct Cli {
    /// Directory for reports, traces and netlists.
    #[arg(long, global = true, env = "MEMINV_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute c / a on an inversion circuit.
    Invert(InvertArgs),
    /// Invert a 2×2 matrix column by column.
    Matrix(MatrixArgs),
    /// Invert one scalar with circuits of several sizes.
    Sweep(SweepArgs),
    /// Write an inversion netlist.
    Export(ExportArgs),
}

#[derive(Args, Clone)]
struct SimArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Convergence threshold on C(t).
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    /// Simulated-time budget.
    #[arg(long, default_value_t = 1.0e5)]
    t_max: f64,
    #[arg(long, default_value_t = 20)]
    record_every: usize,
    /// Store every node voltage in the trace.
    #[arg(long)]
    record_voltages: bool,
    /// Rigidity coupling of the clause memories [default: 1, matrix: 3]
    #[arg(long)]
    zeta: Option<f64>,
    /// Weight of the corner-relaxation term [default: 1]
    #[arg(long)]
    kappa: Option<f64>,
}

impl SimArgs {
    fn config(&self, defaults: MemcomputingParams) -> SimConfig {
        SimConfig {
            epsilon: self.epsilon,
            t_max: self.t_max,
            seed: self.seed,
            record_every: self.record_every,
            record_voltages: self.record_voltages,
            model: ModelConfig::Memcomputing(MemcomputingParams {
                zeta: self.zeta.unwrap_or(defaults.zeta),
                kappa: self.kappa.unwrap_or(defaults.kappa),
                ..defaults
            }),
            ..SimConfig::default()
        }
    }
}

#[derive(Args)]
struct InvertArgs {
    /// Divisor mantissa, decimal or 0b-prefixed binary.
    #[arg(long, allow_hyphen_values = true)]
    a: Literal,
    /// Dividend mantissa.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    c: Literal,
    /// Mantissa width.
    #[arg(long)]
    n: usize,
    /// Satisfiability bits; defaults to n.
    #[arg(long)]
    nb: Option<usize>,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    exp_a: i64,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    exp_c: i64,
    /// Require normalized operands.
    #[arg(long)]
    strict: bool,
    /// Trace CSV path; defaults to a file in the output directory.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Report JSON path; defaults to a file in the output directory.
    #[arg(long)]
    report_out: Option<PathBuf>,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Args)]
struct MatrixArgs {
    #[arg(long, allow_hyphen_values = true)]
    a11: Literal,
    #[arg(long, allow_hyphen_values = true)]
    a12: Literal,
    #[arg(long, allow_hyphen_values = true)]
    a21: Literal,
    #[arg(long, allow_hyphen_values = true)]
    a22: Literal,
    /// Magnitude width of the unknowns.
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Slack bits per equation.
    #[arg(long, default_value_t = 0)]
    nb: usize,
    /// Solve the columns one after the other.
    #[arg(long)]
    sequential: bool,
    /// Seeds tried per column before giving up.
    #[arg(long, default_value_t = 3)]
    attempts: u32,
    #[arg(long)]
    report_out: Option<PathBuf>,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    a: Literal,
    #[arg(long, default_value = "1")]
    c: Literal,
    /// Circuit sizes: `2..6`, `2..=6` or `2,4,6`.
    #[arg(long, default_value = "2..6")]
    sizes: String,
    /// Satisfiability bits; defaults to n for each size.
    #[arg(long)]
    nb: Option<usize>,
    /// Seeds per size, counting up from --seed.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// Sweep CSV path; defaults to a file in the output directory.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Also write the C(t) trace of the first seed at the first size.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    nb: usize,
    /// Clamp an instance: divisor mantissa.
    #[arg(long, requires = "c")]
    a: Option<Literal>,
    /// Clamp an instance: dividend mantissa.
    #[arg(long, requires = "a")]
    c: Option<Literal>,
    /// Output path, or `-` for stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Invert(args) => invert(&cli.out_dir, args),
        Command::Matrix(args) => matrix(&cli.out_dir, args),
        Command::Sweep(args) => sweep(&cli.out_dir, args),
        Command::Export(args) => export(&cli.out_dir, args),
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn scalar(lit: &Literal, exponent: i64, n: usize) -> Result<FixedPointScalar> {
    let sign = if lit.negative { Sign::Neg } else { Sign::Pos };
    Ok(FixedPointScalar::from_mantissa_int(
        sign,
        exponent,
        &BigUint::from(lit.mantissa(n)?),
        n,
    ))
}

fn invert(out_dir: &Path, args: InvertArgs) -> Result<u8> {
    let n = args.n;
    let nb = args.nb.unwrap_or(n);
    let layout = EmbeddingLayout::new(n, nb);
    let a = scalar(&args.a, args.exp_a, n)?;
    let c = scalar(&args.c, args.exp_c, n)?;
    let mode = if args.strict { OperandMode::Strict } else { OperandMode::Raw };
    let instance = build_embedding(&a, &c, layout, mode)?;
    let netlist = clamp_instance(&build_inversion_circuit(layout)?, &instance)?;
    let config = args.sim.config(MemcomputingParams::default());

    let mut pairs = vec![
        ("command".to_string(), "invert".to_string()),
        ("a".into(), format!("{}0b{}", sign_prefix(a.sign), a.mantissa_string())),
        ("c".into(), format!("{}0b{}", sign_prefix(c.sign), c.mantissa_string())),
        ("exp_a".into(), a.exponent.to_string()),
        ("exp_c".into(), c.exponent.to_string()),
        ("n".into(), n.to_string()),
        ("nb".into(), nb.to_string()),
        ("strict".into(), args.strict.to_string()),
    ];
    pairs.extend(config_pairs(&config));
    let echo = config_echo(&pairs);
    print!("{echo}");

    let solve = dynamics::run(&netlist, &instance, &config)?;
    let stem = format!(
        "invert-a{}-c{}-n{n}-nb{nb}-seed{}",
        instance.a_int, instance.c_int, config.seed
    );
    let trace_path = args.trace_out.unwrap_or_else(|| out_dir.join(format!("{stem}.csv")));
    let report_path = args.report_out.unwrap_or_else(|| out_dir.join(format!("{stem}.json")));
    let mut csv = Vec::new();
    write_trace_csv(&mut csv, &echo, &solve.trace)?;
    write_file(&trace_path, &csv)?;
    write_file(&report_path, solve.report.to_json().as_bytes())?;

    // no exact quotient exists when the slack does not fit in n_b bits
    let oracle = oracle_divide(&instance).ok();
    let report = &solve.report;
    println!("gates = {}", netlist.gates().len());
    let code = match (&solve.decoded, report.converged) {
        (Some(decoded), true) => {
            let q = quotient_scalar(decoded, &instance, &a, &c);
            println!("converged at t = {} after {} steps", report.t_c.unwrap_or(0.0), report.steps);
            println!("b = 0.{}", q.mantissa_string());
            println!("exponent = {}", q.exponent);
            println!("sign = {}", q.sign);
            println!("value = {}", format_rational(&q.value()));
            println!("b_f = {}", decoded.b_f);
            println!("c_f = {}", decoded.c_f);
            if let Some(oracle) = &oracle {
                println!("oracle b = 0.{} (c_f = {})", oracle.b_string(), oracle.c_f);
            }
            println!(
                "readout = {}",
                report
                    .readout_flag
                    .map(|f| f.to_string())
                    .unwrap_or_else(|| "off by more than one ulp".into())
            );
            let ok = report.identity_ok == Some(true);
            println!("identity = {}", if ok { "ok" } else { "FAILED" });
            if ok {
                EXIT_OK
            } else {
                EXIT_NO_CONVERGENCE
            }
        }
        _ => {
            if oracle.is_none() {
                println!("no exact quotient fits in {nb} satisfiability bits");
            }
            println!(
                "no convergence within t_max = {} (final C = {}, {} steps)",
                config.t_max, report.final_c, report.steps
            );
            EXIT_NO_CONVERGENCE
        }
    };
    println!("trace = {}", trace_path.display());
    println!("report = {}", report_path.display());
    Ok(code)
}

fn sign_prefix(sign: Sign) -> &'static str {
    match sign {
        Sign::Pos => "",
        Sign::Neg => "-",
    }
}

fn matrix(out_dir: &Path, args: MatrixArgs) -> Result<u8> {
    let mut ints = [[0i64; 2]; 2];
    for (i, row) in [[args.a11, args.a12], [args.a21, args.a22]].iter().enumerate() {
        for (j, lit) in row.iter().enumerate() {
            ints[i][j] = lit.signed()?;
        }
    }
    let a = Matrix2::from_ints(ints);
    let layout = EmbeddingLayout::new(args.n, args.nb);
    let config = args.sim.config(MemcomputingParams::linear());
    let execution = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let mut pairs = vec![
        ("command".to_string(), "matrix".to_string()),
        ("a".into(), format!("{ints:?}")),
        ("n".into(), args.n.to_string()),
        ("nb".into(), args.nb.to_string()),
        ("sequential".into(), args.sequential.to_string()),
        ("attempts".into(), args.attempts.to_string()),
    ];
    pairs.extend(config_pairs(&config));
    print!("{}", config_echo(&pairs));

    let result = match invert_matrix(&a, layout, &config, execution, args.attempts) {
        Ok(r) => r,
        Err(LinearError::Singular) => bail!("matrix is singular"),
        Err(e) => return Err(e.into()),
    };
    let report_path = args.report_out.unwrap_or_else(|| {
        out_dir.join(format!(
            "matrix-{}-{}-{}-{}-n{}-seed{}.json",
            ints[0][0], ints[0][1], ints[1][0], ints[1][1], args.n, config.seed
        ))
    });
    write_file(&report_path, format!("{:#}", result.to_json()).as_bytes())?;

    for col in &result.columns {
        match col.t_c {
            Some(t) => println!(
                "column {}: converged at t = {t} after {} steps (seed {}, attempt {})",
                col.column + 1,
                col.steps,
                col.seed,
                col.attempts
            ),
            None => println!(
                "column {}: no convergence within t_max = {} in {} attempts (final C = {})",
                col.column + 1,
                config.t_max,
                col.attempts,
                col.final_c
            ),
        }
    }
    println!("kappa_bound = {}", format_rational(&result.kappa_bound));
    let code = match (&result.x, &result.residual) {
        (Some(x), Some(residual)) => {
            for row in x.values() {
                println!("X = [{}, {}]", format_rational(&row[0]), format_rational(&row[1]));
            }
            for (i, col) in result.columns.iter().enumerate() {
                if let Some(r) = &col.readout {
                    println!("slack column {} = [{}, {}]", i + 1, r.slack[0], r.slack[1]);
                }
            }
            println!("residual = {}", format_rational(residual));
            println!("residual_bound = {}", format_rational(&result.residual_bound));
            if result.within_bound() == Some(true) {
                EXIT_OK
            } else {
                println!("residual exceeds bound");
                EXIT_NO_CONVERGENCE
            }
        }
        _ => EXIT_NO_CONVERGENCE,
    };
    println!("report = {}", report_path.display());
    Ok(code)
}

fn sweep(out_dir: &Path, args: SweepArgs) -> Result<u8> {
    let sizes = parse_sizes(&args.sizes)?;
    let max = *sizes.iter().max().expect("non-empty");
    let a = args.a.mantissa(max)?;
    let c = args.c.mantissa(max)?;
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let config = args.sim.config(MemcomputingParams::default());
    let spec = SweepSpec {
        a,
        c,
        sizes: sizes.clone(),
        n_b: args.nb,
        seeds: (config.seed..config.seed + args.seeds).collect(),
        config: config.clone(),
    };
    let mut pairs = vec![
        ("command".to_string(), "sweep".to_string()),
        ("a".into(), a.to_string()),
        ("c".into(), c.to_string()),
        ("sizes".into(), format!("{sizes:?}")),
        ("nb".into(), args.nb.map_or("n".into(), |v| v.to_string())),
        ("seeds".into(), args.seeds.to_string()),
    ];
    pairs.extend(config_pairs(&config));
    let echo = config_echo(&pairs);
    print!("{echo}");

    let (_, rows) = run_sweep(&spec)?;
    let csv_path = args
        .csv
        .unwrap_or_else(|| out_dir.join(format!("sweep-a{a}-c{c}.csv")));
    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, &echo, &rows)?;
    write_file(&csv_path, &csv)?;
    std::io::stdout().write_all(&csv[echo.len()..])?;

    if let Some(path) = args.trace_out {
        let n = sizes[0];
        let layout = EmbeddingLayout::new(n, args.nb.unwrap_or(n));
        let instance = meminv::embedding::EmbeddedInstance::from_ints(a, c, layout)?;
        let netlist = clamp_instance(&build_inversion_circuit(layout)?, &instance)?;
        let solve = dynamics::run(&netlist, &instance, &config)?;
        let mut trace_pairs = pairs.clone();
        trace_pairs.push(("trace_n".into(), n.to_string()));
        let mut out = Vec::new();
        write_trace_csv(&mut out, &config_echo(&trace_pairs), &solve.trace)?;
        write_file(&path, &out)?;
        println!("trace = {}", path.display());
    }
    println!("csv = {}", csv_path.display());
    Ok(EXIT_OK)
}

fn export(out_dir: &Path, args: ExportArgs) -> Result<u8> {
    let layout = EmbeddingLayout::new(args.n, args.nb);
    let mut netlist = build_inversion_circuit(layout)?;
    let mut stem = format!("netlist-n{}-nb{}", args.n, args.nb);
    if let (Some(a), Some(c)) = (args.a, args.c) {
        let instance = meminv::embedding::EmbeddedInstance::from_ints(
            a.mantissa(args.n)?,
            c.mantissa(args.n)?,
            layout,
        )?;
        netlist = clamp_instance(&netlist, &instance)?;
        stem = format!("{stem}-a{}-c{}", instance.a_int, instance.c_int);
    }
    let text = format::export_netlist(&netlist);
    match args.out {
        Some(p) if p.as_os_str() == "-" => print!("{text}"),
        out => {
            let path = out.unwrap_or_else(|| out_dir.join(format!("{stem}.solc")));
            write_file(&path, text.as_bytes())?;
            println!("netlist = {}", path.display());
        }
    }
    Ok(EXIT_OK)
}
