//! Command-line front end. Each subcommand resolves its inputs, calls one
//! library routine and prints the result; exit codes are 0 on success, 1 for
//! math-level failures and 2 for usage errors.

use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde::Serialize;

use crate::expr::{parse, Expr};
use crate::leaves::{flow, leaf_form, LeafError};
use crate::models::{catalogue, critical_locus_indicator, model, ModelName, ModelSpec};
use crate::point::Point4;
use crate::poisson::{
    casimir_residual, flaschka_ratiu, is_poisson, jacobiator, rank_at, Bivector, CasimirPair,
    PoissonVerdict, COORDS, TRIPLES,
};

/// Version of the JSON layouts emitted by the CLI.
pub const SCHEMA_VERSION: u32 = 1;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (schema 1)");

#[derive(Debug, Parser)]
#[command(
    name = "wrinkled-poisson",
    version = VERSION,
    about = "Poisson bivectors from Casimir pairs on R^4"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the bivector built from the Casimir pair
    Bivector(Common),
    /// Check the Jacobi identity exactly
    Jacobi {
        #[command(flatten)]
        common: Common,
        /// Exit with status 1 when the bivector is not Poisson
        #[arg(long)]
        expect_poisson: bool,
    },
    /// Check that functions are Casimirs (C1 and C2, or --h)
    CasimirCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        h: Option<String>,
    },
    /// Numeric rank of the bivector at a point
    Rank {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        at: At,
    },
    /// Leaf symplectic form at a regular point
    LeafForm {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        at: At,
    },
    /// Integrate a Hamiltonian vector field with RK4
    Flow {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        at: At,
        #[arg(long)]
        h: String,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
    /// Whether a point lies on the critical locus
    Locus {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        at: At,
    },
    /// Print the built-in model catalogue
    ListModels {
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Built-in model name
    #[arg(long)]
    pub model: Option<String>,
    /// Value of the move parameter s
    #[arg(long, allow_negative_numbers = true)]
    pub s: Option<f64>,
    #[arg(long)]
    pub c1: Option<String>,
    #[arg(long)]
    pub c2: Option<String>,
    /// Conformal factor (polynomial)
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct At {
    /// Point as x,y,z,t
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Math(String),
}

type Outcome = Result<String, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Runs one invocation. `args` includes the program name.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    return 0;
                }
                _ => 2,
            };
            let _ = write!(err, "{e}");
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(payload) => {
            let _ = out.write_all(payload.as_bytes());
            0
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(Failure::Math(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
    }
}

/// Resolved inputs shared by the math subcommands.
struct Setup {
    bivector: Bivector,
    spec: Option<ModelSpec>,
    s: Option<f64>,
}

fn parse_flag(flag: &str, text: &str) -> Result<Expr, Failure> {
    parse(text).map_err(|e| usage(format!("--{flag}: {e}")))
}

fn exact(s: f64) -> Result<BigRational, Failure> {
    BigRational::from_float(s).ok_or_else(|| usage(format!("--s: must be finite, got {s}")))
}

fn setup(c: &Common, numeric: bool) -> Result<Setup, Failure> {
    let (casimirs, spec) = match (&c.model, &c.c1, &c.c2) {
        (Some(name), None, None) => {
            let name: ModelName = name.parse().map_err(|e| usage(format!("--model: {e}")))?;
            let spec = model(name, c.s).map_err(|e| usage(format!("--model/--s: {e}")))?;
            (spec.casimirs.clone(), Some(spec))
        }
        (None, Some(c1), Some(c2)) => {
            let mut cas = CasimirPair::new(parse_flag("c1", c1)?, parse_flag("c2", c2)?);
            if let Some(s) = c.s {
                cas = cas.substitute_s(&exact(s)?);
            } else if numeric && (cas.c1.depends_on_s() || cas.c2.depends_on_s()) {
                return Err(usage("--c1/--c2 depend on s; pass --s"));
            }
            (cas, None)
        }
        (Some(_), _, _) => return Err(usage("--model cannot be combined with --c1/--c2")),
        (None, None, None) => return Err(usage("pass either --model or both --c1 and --c2")),
        (None, _, _) => return Err(usage("--c1 and --c2 must be given together")),
    };
    let k = match &c.k {
        None => None,
        Some(text) => {
            let mut k = parse_flag("k", text)?;
            if let Some(s) = c.s {
                k = k.substitute_s(&exact(s)?);
            }
            if k.is_zero() {
                return Err(usage(
                    "--k: conformal factor must not be the zero polynomial",
                ));
            }
            Some(k)
        }
    };
    let bivector = flaschka_ratiu(&casimirs, k).map_err(|e| usage(format!("--k: {e}")))?;
    Ok(Setup {
        bivector,
        spec,
        s: c.s,
    })
}

fn parse_point(text: &str, s: Option<f64>) -> Result<Point4, Failure> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(usage(format!("--point: expected x,y,z,t, got '{text}'")));
    }
    let mut c = [0.0; 4];
    for (slot, part) in c.iter_mut().zip(&parts) {
        *slot = part
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| usage(format!("--point: '{part}' is not a finite number")))?;
    }
    Ok(Point4::from_coords(c, s.unwrap_or(0.0)))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn no_csv(format: Format) -> Result<(), Failure> {
    if format == Format::Csv {
        return Err(usage("--format csv is only available for flow"));
    }
    Ok(())
}

fn point_label(p: &Point4) -> String {
    format!("({}, {}, {}, {})", p.x, p.y, p.z, p.t)
}

fn dispatch(cmd: &Command) -> Outcome {
    match cmd {
        Command::Bivector(c) => {
            no_csv(c.format)?;
            let b = setup(c, false)?.bivector;
            Ok(match c.format {
                Format::Json => json(&b.to_json()),
                _ => b.to_string(),
            })
        }
        Command::Jacobi {
            common: c,
            expect_poisson,
        } => {
            no_csv(c.format)?;
            jacobi(c, *expect_poisson)
        }
        Command::CasimirCheck { common: c, h } => {
            no_csv(c.format)?;
            casimir_cmd(c, h.as_deref())
        }
        Command::Rank { common: c, at } => {
            no_csv(c.format)?;
            let st = setup(c, true)?;
            let p = parse_point(&at.point, st.s)?;
            let rank = rank_at(&st.bivector, &p);
            Ok(match c.format {
                Format::Json => json(&RankJson {
                    point: p.coords(),
                    rank,
                }),
                _ => format!("rank: {rank}\n"),
            })
        }
        Command::LeafForm { common: c, at } => {
            no_csv(c.format)?;
            leaf_cmd(c, at)
        }
        Command::Flow {
            common: c,
            at,
            h,
            dt,
            steps,
        } => flow_cmd(c, at, h, *dt, *steps),
        Command::Locus { common: c, at } => {
            no_csv(c.format)?;
            let st = setup(c, true)?;
            let p = parse_point(&at.point, st.s)?;
            let critical = match &st.spec {
                Some(spec) => critical_locus_indicator(spec.name, spec.s)
                    .map_err(|e| usage(e.to_string()))?
                    .contains(&p),
                None => {
                    let m = st.bivector.evaluate(&p);
                    m.iter().all(|v| v.abs() <= crate::models::LOCUS_TOL)
                }
            };
            Ok(match c.format {
                Format::Json => json(&LocusJson {
                    point: p.coords(),
                    critical,
                }),
                _ => format!("critical: {critical}\n"),
            })
        }
        Command::ListModels { format } => match format {
            Format::Json => Ok(json(&catalogue())),
            Format::Text => Ok(catalogue()
                .iter()
                .map(|m| format!("{}: C1 = {}, C2 = {}\n", m.name.as_str(), m.c1, m.c2))
                .collect()),
            Format::Csv => Err(usage("--format csv is only available for flow")),
        },
    }
}

#[derive(Serialize)]
struct TripleJson {
    triple: String,
    value: String,
}

#[derive(Serialize)]
struct JacobiJson {
    poisson: bool,
    jacobiator: Vec<TripleJson>,
    witness: Option<String>,
}

fn triple_name((i, j, k): (usize, usize, usize)) -> String {
    format!("{}{}{}", COORDS[i], COORDS[j], COORDS[k])
}

fn jacobi(c: &Common, expect_poisson: bool) -> Outcome {
    let st = setup(c, false)?;
    let verdict = is_poisson(&st.bivector);
    let jac = jacobiator(&st.bivector);
    let witness = match &verdict {
        PoissonVerdict::Poisson => None,
        PoissonVerdict::NotPoisson { triple, .. } => {
            Some(format!("{}{}{}", triple.0, triple.1, triple.2))
        }
    };
    let payload = match c.format {
        Format::Json => json(&JacobiJson {
            poisson: verdict.is_poisson(),
            jacobiator: TRIPLES
                .iter()
                .zip(&jac)
                .map(|(t, e)| TripleJson {
                    triple: triple_name(*t),
                    value: e.to_string(),
                })
                .collect(),
            witness: witness.clone(),
        }),
        _ => match &verdict {
            PoissonVerdict::Poisson => "Poisson: true\n".to_string(),
            PoissonVerdict::NotPoisson { triple, jacobiator } => format!(
                "Poisson: false\nwitness: ({}, {}, {})\nJ = {jacobiator}\n",
                triple.0, triple.1, triple.2
            ),
        },
    };
    if expect_poisson && !verdict.is_poisson() {
        return Err(Failure::Math(format!(
            "--expect-poisson: Jacobi identity fails at triple {}\n{}",
            witness.unwrap_or_default(),
            payload.trim_end()
        )));
    }
    Ok(payload)
}

#[derive(Serialize)]
struct CasimirJson {
    function: String,
    casimir: bool,
    residual: Vec<String>,
}

fn casimir_cmd(c: &Common, h: Option<&str>) -> Outcome {
    let st = setup(c, false)?;
    let cas = st.bivector.casimirs().expect("built from Casimirs").clone();
    let funcs: Vec<(String, Expr)> = match h {
        Some(text) => {
            let mut e = parse_flag("h", text)?;
            if let Some(s) = st.s {
                e = e.substitute_s(&exact(s)?);
            }
            vec![("h".into(), e)]
        }
        None => vec![("C1".into(), cas.c1), ("C2".into(), cas.c2)],
    };
    let rows: Vec<CasimirJson> = funcs
        .iter()
        .map(|(label, f)| {
            let r = casimir_residual(&st.bivector, f);
            CasimirJson {
                function: label.clone(),
                casimir: r.is_zero(),
                residual: r.0.iter().map(Expr::to_string).collect(),
            }
        })
        .collect();
    Ok(match c.format {
        Format::Json => json(&rows),
        _ => rows
            .iter()
            .map(|r| format!("{}: {}\n", r.function, r.casimir))
            .collect(),
    })
}

#[derive(Serialize)]
struct RankJson {
    point: [f64; 4],
    rank: usize,
}

#[derive(Serialize)]
struct LocusJson {
    point: [f64; 4],
    critical: bool,
}

#[derive(Serialize)]
struct LeafJson {
    point: [f64; 4],
    coefficient: f64,
    from_beta: f64,
    u: [f64; 4],
    v: [f64; 4],
    alpha: [f64; 4],
    beta: [f64; 4],
    closed_form: Option<f64>,
}

fn math(e: LeafError) -> Failure {
    Failure::Math(e.to_string())
}

fn leaf_cmd(c: &Common, at: &At) -> Outcome {
    let st = setup(c, true)?;
    let p = parse_point(&at.point, st.s)?;
    let form = leaf_form(&st.bivector, &p).map_err(math)?;
    let closed_form = st
        .spec
        .as_ref()
        .and_then(|m| m.expected_leaf_coefficient.as_ref())
        .map(|r| r.evaluate(&p));
    let f = &form.frame;
    Ok(match c.format {
        Format::Json => json(&LeafJson {
            point: p.coords(),
            coefficient: form.coefficient,
            from_beta: form.from_beta,
            u: f.u.0,
            v: f.v.0,
            alpha: f.alpha.0,
            beta: f.beta.0,
            closed_form,
        }),
        _ => {
            let mut s = format!(
                "point: {}\ncoefficient: {}\n-<beta,u>: {}\nu: {:?}\nv: {:?}\n",
                point_label(&p),
                form.coefficient,
                form.from_beta,
                f.u.0,
                f.v.0
            );
            if let Some(cf) = closed_form {
                s.push_str(&format!("closed form (chart-plane coefficient): {cf}\n"));
            }
            s
        }
    })
}

#[derive(Serialize)]
struct DriftJson {
    c1: f64,
    c2: f64,
    h: f64,
}

#[derive(Serialize)]
struct FlowJson {
    dt: f64,
    steps: usize,
    start: [f64; 4],
    end: [f64; 4],
    drift: DriftJson,
}

fn flow_cmd(c: &Common, at: &At, h: &str, dt: f64, steps: usize) -> Outcome {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(usage(format!(
            "--dt: must be a finite non-negative number, got {dt}"
        )));
    }
    if steps == 0 {
        return Err(usage("--steps: must be at least 1"));
    }
    let st = setup(c, true)?;
    let p = parse_point(&at.point, st.s)?;
    let mut h = parse_flag("h", h)?;
    if let Some(s) = st.s {
        h = h.substitute_s(&exact(s)?);
    } else if h.depends_on_s() {
        return Err(usage("--h depends on s; pass --s"));
    }
    let tr = flow(&st.bivector, &h, &p, dt, steps).map_err(math)?;
    let end = tr.points.last().expect("at least two points").coords();
    Ok(match c.format {
        Format::Csv => tr.to_csv(),
        Format::Json => json(&FlowJson {
            dt,
            steps,
            start: p.coords(),
            end,
            drift: DriftJson {
                c1: tr.drift.c1,
                c2: tr.drift.c2,
                h: tr.drift.h,
            },
        }),
        Format::Text => format!(
            "steps: {steps}\ndt: {dt}\nend: {}\ndrift C1: {:e}\ndrift C2: {:e}\ndrift H: {:e}\n",
            point_label(&Point4::from_coords(end, 0.0)),
            tr.drift.c1,
            tr.drift.c2,
            tr.drift.h
        ),
    })
}
