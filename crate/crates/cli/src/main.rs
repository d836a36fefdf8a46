use std::process::ExitCode;

use bmcurrent::cone::cone_report;
use bmcurrent::evaluator::{evaluate_current, pair, Convention, EvalOptions};
use bmcurrent::linalg::{index_data, subsets, ExponentMatrix};
use bmcurrent::mb::{mb_selfcheck, MbEvaluator, MbOptions};
use bmcurrent::oracle::OracleOptions;
use bmcurrent::profile::RadialProfile;
use bmcurrent::structure::{decompose, render_text};
use bmcurrent::testform::{Component, SeparableCoefficient, TestForm};
use bmcurrent::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num::complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

mod input;
mod verify;

#[derive(Parser)]
#[command(name = "bmcurrent", version, about = "Bochner-Martinelli residue currents of monomial mappings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConventionArg {
    Definition,
    Bracket,
}

#[derive(Args)]
struct MatrixArg {
    /// Exponent matrix {"p":..,"n":..,"A":[[..],..]}, inline or @file.
    #[arg(long)]
    matrix: String,
}

#[derive(Args)]
struct NumericArgs {
    /// Relative tolerance of the radial quadrature.
    #[arg(long, default_value_t = 1e-9)]
    rel_tol: f64,
    /// Absolute tolerance of the radial quadrature.
    #[arg(long, default_value_t = 1e-13)]
    abs_tol: f64,
    /// Fixed Mellin-Barnes truncation height |Im λ| ≤ H.
    #[arg(long)]
    height: Option<f64>,
    #[arg(long, value_enum, default_value_t = ConventionArg::Definition)]
    convention: ConventionArg,
}

#[derive(Subcommand)]
enum Command {
    /// Cone reports for every index set.
    Analyze {
        #[command(flatten)]
        matrix: MatrixArg,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Terms of the structure formula.
    Structure {
        #[command(flatten)]
        matrix: MatrixArg,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Pair the current with a test form.
    Eval {
        #[command(flatten)]
        matrix: MatrixArg,
        /// Test form document, inline or @file.
        #[arg(long)]
        testform: String,
        #[command(flatten)]
        numeric: NumericArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Compare the structure formula with the regularized-integral oracle.
    Verify {
        #[command(flatten)]
        matrix: MatrixArg,
        /// Test form documents; repeat for several cases.
        #[arg(long)]
        testform: Vec<String>,
        /// Additional random admissible test forms.
        #[arg(long, default_value_t = 0)]
        random: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Relative tolerance of the comparison.
        #[arg(long, default_value_t = 0.01)]
        tolerance: f64,
        /// Explicit τ grid, comma-separated and decreasing.
        #[arg(long)]
        taus: Option<String>,
        /// Length of the default geometric τ grid.
        #[arg(long, default_value_t = 8)]
        tau_points: usize,
        #[command(flatten)]
        numeric: NumericArgs,
        /// Exit 1 when a case fails.
        #[arg(long)]
        strict: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Evaluate a Mellin-Barnes factor.
    Mb {
        /// MB spec document, inline or @file.
        #[arg(long)]
        spec: String,
        /// Bases x_j, comma-separated.
        #[arg(long)]
        x: String,
        #[arg(long)]
        height: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Built-in consistency suites.
    Selfcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random matrices in the exactness suite.
        #[arg(long, default_value_t = 50)]
        cases: usize,
        #[arg(long)]
        strict: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

struct Output {
    text: String,
    json: Value,
    failed: bool,
}

fn emit(out: Output, format: Format, strict: bool) -> ExitCode {
    match format {
        Format::Text => print!("{}", out.text),
        Format::Json => println!("{}", serde_json::to_string_pretty(&out.json).expect("serializable")),
    }
    if out.failed && strict {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::StructuralAssumption { .. } => 4,
        e if e.is_numeric() => 3,
        _ => 2,
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn eval_options(n: &NumericArgs) -> Result<EvalOptions, Error> {
    let mut opts = EvalOptions::default();
    opts.quad.rel_tol = input::positive("rel-tol", n.rel_tol)?;
    opts.quad.abs_tol = input::positive("abs-tol", n.abs_tol)?;
    if let Some(h) = n.height {
        opts.mb.height = Some(input::positive("height", h)?);
    }
    opts.convention = match n.convention {
        ConventionArg::Definition => Convention::Definition,
        ConventionArg::Bracket => Convention::Bracket,
    };
    Ok(opts)
}

fn analyze(a: &ExponentMatrix) -> Result<Output, Error> {
    let mut reports = Vec::new();
    let mut text = String::new();
    for s in subsets(a.n(), a.p()) {
        let r = cone_report(a, &index_data(a, &s)?)?;
        text.push_str(&format!("I = {}  q = {}  J = {}  vanishing = {}", r.subset, r.q, r.j, to_value(&r.vanishing).as_str().unwrap_or("")));
        if let Some(w) = &r.witness {
            let w: Vec<String> = w.iter().map(|x| x.to_string()).collect();
            text.push_str(&format!("  witness = ({})", w.join(", ")));
        }
        text.push('\n');
        reports.push(r);
    }
    Ok(Output { text, json: json!({ "reports": to_value(&reports) }), failed: false })
}

fn structure(a: &ExponentMatrix) -> Result<Output, Error> {
    let dec = decompose(a)?;
    let mut text = String::new();
    for t in &dec.terms {
        text.push_str(&format!("I = {}: {}\n", t.subset, render_text(t)));
    }
    for s in &dec.skipped {
        text.push_str(&format!("I = {}: skipped ({})\n", s.subset, to_value(&s.reason).as_str().unwrap_or("")));
    }
    if dec.terms.is_empty() {
        text.push_str("T_f = 0\n");
    }
    Ok(Output { text, json: to_value(&dec), failed: false })
}

fn eval(a: &ExponentMatrix, form: &TestForm, opts: &EvalOptions) -> Result<Output, Error> {
    let r = evaluate_current(a, form, opts)?;
    let mut text = format!(
        "value = {:+.12e} {:+.12e}i\nerror estimate = {:.3e}\nconvention = {}\nquadrature evaluations = {}\n",
        r.value.re,
        r.value.im,
        r.abs_error_estimate,
        to_value(&r.convention).as_str().unwrap_or(""),
        r.quadrature_evaluations
    );
    for t in &r.selection_trace {
        text.push_str(&format!("  I = {}: {:+.12e} {:+.12e}i\n", t.subset, t.value[0], t.value[1]));
    }
    Ok(Output { text, json: to_value(&r), failed: false })
}

fn mb(spec_arg: &str, x_arg: &str, height: Option<f64>) -> Result<Output, Error> {
    let spec = input::mb_spec(spec_arg)?;
    let x = input::float_list(x_arg)?;
    if x.len() != spec.dim || x.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidInput(format!("--x needs {} positive bases", spec.dim)));
    }
    let height = height.map(|h| input::positive("height", h)).transpose()?;
    let v = MbEvaluator::new(&spec, &MbOptions { height, ..MbOptions::default() })?.eval(&x)?;
    let text = format!(
        "F = {:+.15e}\nerror estimate = {:.3e}\ntruncation height = {}\nnodes = {}\n",
        v.value, v.abs_error_estimate, v.truncation_height, v.nodes
    );
    let json = json!({
        "abs_error_estimate": v.abs_error_estimate,
        "nodes": v.nodes,
        "truncation_height": v.truncation_height,
        "value": v.value,
    });
    Ok(Output { text, json, failed: false })
}

/// Random matrices: emitted terms satisfy their invariants and pairings
/// violating the angular rule are exactly zero without quadrature.
fn exactness_suite(seed: u64, cases: usize) -> Result<(bool, String), Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = 0;
    for _ in 0..cases {
        let a = loop {
            let p = rng.gen_range(1..=3);
            let n = rng.gen_range(p..=5);
            let rows = (0..p).map(|_| (0..n).map(|_| rng.gen_range(0..=3)).collect()).collect();
            if let Ok(a) = ExponentMatrix::new(rows) {
                break a;
            }
        };
        let n = a.n();
        let sums = a.column_sums();
        for t in decompose(&a)?.terms {
            if t.check_invariants().is_err() {
                return Ok((false, format!("invariant violated for I = {}", t.subset)));
            }
            let b: Vec<u32> = (0..n).map(|m| 1 + (sums[m] == 0) as u32).collect();
            let mut av: Vec<u32> = (0..n).map(|m| sums[m] + b[m] - t.subset.contains(m) as u32).collect();
            av[rng.gen_range(0..n)] += 1;
            let comp = Component {
                subset: t.subset.clone(),
                weight: Complex64::new(1.0, 0.0),
                coeff: SeparableCoefficient::uniform(av, b, RadialProfile::bump(1.0)),
            };
            let r = pair(&t, &TestForm::new(n, vec![comp])?, &EvalOptions::default())?;
            if r.value != Complex64::new(0.0, 0.0) || r.quadrature_evaluations != 0 {
                return Ok((false, format!("nonzero violating pairing for I = {}", t.subset)));
            }
            terms += 1;
        }
    }
    Ok((true, format!("{cases} matrices, {terms} terms")))
}

fn selfcheck(seed: u64, cases: usize) -> Result<Output, Error> {
    let mut suites = Vec::new();
    let mb = mb_selfcheck();
    suites.push(("mb_reflection", mb.pass, format!("max deviation {:.2e}", mb.max_deviation)));

    let mut worst: f64 = 0.0;
    for k in 1..=3u32 {
        let a = ExponentMatrix::new(vec![vec![k]])?;
        let comp = Component {
            subset: subsets(1, 1).remove(0),
            weight: Complex64::new(1.0, 0.0),
            coeff: SeparableCoefficient::uniform(vec![k - 1], vec![0], RadialProfile::bump(1.0)),
        };
        let v = evaluate_current(&a, &TestForm::new(1, vec![comp])?, &EvalOptions::default())?.value;
        worst = worst.max((v - 1.0).norm());
    }
    suites.push(("one_dimensional", worst <= 1e-9, format!("max deviation {worst:.2e}")));

    let (ok, detail) = exactness_suite(seed, cases)?;
    suites.push(("exactness", ok, detail));

    let failed = suites.iter().any(|s| !s.1);
    let mut text = String::new();
    for (name, pass, detail) in &suites {
        text.push_str(&format!("{} {name}: {detail}\n", if *pass { "PASS" } else { "FAIL" }));
    }
    text.push_str(&format!("overall: {}\n", if failed { "FAIL" } else { "PASS" }));
    let json = json!({
        "pass": !failed,
        "suites": suites.iter().map(|(n, p, d)| json!({"detail": d, "name": n, "pass": p})).collect::<Vec<_>>(),
    });
    Ok(Output { text, json, failed })
}

#[allow(clippy::too_many_arguments)]
fn verify_cmd(
    a: &ExponentMatrix,
    forms_arg: &[String],
    random: usize,
    seed: u64,
    tolerance: f64,
    taus: Option<&str>,
    tau_points: usize,
    numeric: &NumericArgs,
) -> Result<Output, Error> {
    let taus = taus.map(input::float_list).transpose()?;
    if let Some(t) = &taus {
        if t.len() < 4 || t.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidInput("--taus needs at least 4 positive values".into()));
        }
    }
    if tau_points < 4 {
        return Err(Error::InvalidInput("--tau-points must be at least 4".into()));
    }
    let settings = verify::VerifySettings {
        eval: eval_options(numeric)?,
        oracle: OracleOptions::default(),
        tolerance: input::positive("tolerance", tolerance)?,
        taus,
        tau_points,
    };
    if settings.eval.convention != Convention::Definition {
        return Err(Error::InvalidInput("the oracle computes definition-normalized values".into()));
    }
    let mut forms = Vec::new();
    for (k, f) in forms_arg.iter().enumerate() {
        forms.push((format!("form-{}", k + 1), input::testform(f)?));
    }
    for (k, f) in verify::random_forms(a, random, seed).into_iter().enumerate() {
        forms.push((format!("random-{}", k + 1), f));
    }
    let mut cases = Vec::new();
    for (label, f) in forms {
        cases.push(verify::run_case(a, &f, label, &settings)?);
    }
    let report = verify::report_verify(cases);
    Ok(Output { text: verify::render_text(&report), failed: !report.pass, json: to_value(&report) })
}

fn run(cli: Cli) -> Result<(Output, Format, bool), Error> {
    Ok(match cli.command {
        Command::Analyze { matrix, format } => (analyze(&input::matrix(&matrix.matrix)?)?, format, false),
        Command::Structure { matrix, format } => (structure(&input::matrix(&matrix.matrix)?)?, format, false),
        Command::Eval { matrix, testform, numeric, format } => {
            let a = input::matrix(&matrix.matrix)?;
            let form = input::testform(&testform)?;
            (eval(&a, &form, &eval_options(&numeric)?)?, format, false)
        }
        Command::Verify { matrix, testform, random, seed, tolerance, taus, tau_points, numeric, strict, format } => {
            let a = input::matrix(&matrix.matrix)?;
            let out = verify_cmd(&a, &testform, random, seed, tolerance, taus.as_deref(), tau_points, &numeric)?;
            (out, format, strict)
        }
        Command::Mb { spec, x, height, format } => (mb(&spec, &x, height)?, format, false),
        Command::Selfcheck { seed, cases, strict, format } => (selfcheck(seed, cases)?, format, strict),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok((out, format, strict)) => emit(out, format, strict),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
