//! `subdivkit`: analyze, construct and run interpolatory subdivision schemes.
//!
//! Exit codes: 0 verified, 2 identities hold but smoothness unconfirmed,
//! 1 failed, 3 infeasible, 4 resource cap, 64 usage or input error.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_integer::Integer;
use num_rational::BigRational;
use serde_json::{json, Value};
use subdivkit::construct::{self, ConstructionSpec};
use subdivkit::interp::{self, Verdict, VerifyOptions};
use subdivkit::io::{self, scalar_value, Polygon};
use subdivkit::quasistat::{self, SchemeSpec};
use subdivkit::transition::{self, pow_checked};
use subdivkit::{analysis, rationalize, seq, Error, Mask, Scalar};

const EXIT_VERIFIED: u8 = 0;
const EXIT_FAILED: u8 = 1;
const EXIT_UNCONFIRMED: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_RESOURCE: u8 = 4;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "subdivkit", version, about = "Interpolatory subdivision schemes: analysis, construction, refinement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sum rules, smoothness bounds and the interpolation certificate of a mask.
    Analyze {
        mask: PathBuf,
        /// Smoothness order to certify.
        #[arg(long, default_value_t = 0)]
        m: u32,
        /// Highest level for the coset smoothness bound.
        #[arg(long, default_value_t = interp::DEFAULT_LEVELS)]
        n_max: u32,
        /// Interpolation shift; defaults to the one implied by the first moment.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_rational)]
        sa: Option<BigRational>,
    },
    /// Build a mask from sum rules, support and interpolation shift.
    Construct {
        #[arg(long)]
        dilation: u64,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_rational)]
        sa: BigRational,
        /// Support as `l:h`.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_support)]
        support: (i64, i64),
        #[arg(long)]
        sum_rules: u32,
        #[arg(long)]
        symmetric: bool,
        /// Smoothness order the accepted mask must reach.
        #[arg(long, default_value_t = 0)]
        m: u32,
        /// Maximize sm2 over the remaining free parameters.
        #[arg(long)]
        optimize: bool,
    },
    /// Refine a control polygon with a scheme (or single mask) file.
    Subdivide {
        scheme: PathBuf,
        polygon: PathBuf,
        #[arg(long, default_value_t = 1)]
        levels: u32,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Treat the polygon as closed (periodic).
        #[arg(long)]
        closed: bool,
    },
    /// Values (or scaled differences) of the refinable function on M^-n Z.
    SamplePhi {
        mask: PathBuf,
        #[arg(long, default_value_t = 4)]
        level: u32,
        #[arg(long, default_value_t = 0)]
        deriv: u32,
    },
    /// Eigenvalues of the transition matrix, largest modulus first.
    Spectrum {
        mask: PathBuf,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        gamma: i64,
        /// Use the iterated mask A_n with dilation M^n.
        #[arg(long, default_value_t = 1)]
        power: u32,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
    Json,
}

fn parse_rational(s: &str) -> Result<BigRational, String> {
    match s.parse::<Scalar>() {
        Ok(Scalar::Exact(r)) => Ok(r),
        Ok(Scalar::Float(_)) => Err(format!("{s:?} is not an exact rational (use p/q)")),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_support(s: &str) -> Result<(i64, i64), String> {
    let (l, h) = s.split_once(':').ok_or_else(|| format!("expected l:h, got {s:?}"))?;
    let l: i64 = l.trim().parse().map_err(|_| format!("bad lower end in {s:?}"))?;
    let h: i64 = h.trim().parse().map_err(|_| format!("bad upper end in {s:?}"))?;
    Ok((l, h))
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible(_) => EXIT_INFEASIBLE,
            Error::Resource { .. } => EXIT_RESOURCE,
            Error::Parse(_)
            | Error::InvalidArgument(_)
            | Error::InvalidDilation(_)
            | Error::NotNormalized(_)
            | Error::NotAdmissible(_)
            | Error::ZeroMask => EXIT_USAGE,
            _ => EXIT_FAILED,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Text for stdout and the exit code.
type Outcome = Result<(String, u8), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_USAGE,
        message: format!("{}: {e}", path.display()),
    })
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

fn verdict_code(v: &Verdict) -> u8 {
    match v {
        Verdict::Verified { .. } => EXIT_VERIFIED,
        Verdict::Unconfirmed { .. } => EXIT_UNCONFIRMED,
        Verdict::Failed { .. } => EXIT_FAILED,
    }
}

/// The shift implied by the first moment, snapped to a nearby rational for
/// float masks.
fn default_shift(a: &Mask) -> Result<BigRational, Failure> {
    match analysis::shift_parameter(a) {
        Scalar::Exact(r) => Ok(r),
        Scalar::Float(x) => rationalize::snap(x, 1_000_000, 1e-9).ok_or_else(|| Failure {
            code: EXIT_USAGE,
            message: format!("s_a = {x} has no nearby rational; pass --sa"),
        }),
    }
}

fn analyze(path: &Path, m: u32, n_max: u32, sa: Option<BigRational>) -> Outcome {
    let text = read(path)?;
    let file: io::MaskFile = serde_json::from_str(&text).map_err(|e| Failure::from(Error::Parse(e.to_string())))?;
    let a = file.to_mask()?;
    a.require_normalized()?;
    let s_a = match sa {
        Some(s) => s,
        None => default_shift(&a)?,
    };
    let (l, h) = a.nonzero_support()?;
    let sr = analysis::sum_rule_order(&a)?;
    let smoothness = if sr >= 1 {
        Some(analysis::smoothness_report(&a, n_max, None)?)
    } else {
        None
    };
    let cert = interp::verify_interpolatory(&a, &s_a, m, VerifyOptions { max_level: n_max })?;
    let center = seq::symmetry_center(&a).map(|c| BigRational::new(c.into(), 2.into()).to_string());
    let doc = json!({
        "name": file.name,
        "dilation": a.dilation(),
        "support": [l, h],
        "exact": a.is_exact(),
        "sum_rules": sr,
        "first_moment": scalar_value(&analysis::first_moment(&a)),
        "s_a_from_moments": scalar_value(&analysis::shift_parameter(&a)),
        "linear_phase": analysis::linear_phase_residuals(&a, sr).holds,
        "symmetry_center": center,
        "smoothness": smoothness.as_ref().map(report::smoothness),
        "interpolation": report::certificate(&cert),
    });
    Ok((pretty(&doc), verdict_code(&cert.verdict)))
}

#[allow(clippy::too_many_arguments)]
fn construct_cmd(
    dilation: u64,
    sa: BigRational,
    support: (i64, i64),
    sum_rules: u32,
    symmetric: bool,
    m: u32,
    optimize: bool,
) -> Outcome {
    let mut spec = ConstructionSpec::new(dilation, sum_rules, support, sa);
    spec.symmetric = symmetric;
    spec.m = m;
    spec.optimize = optimize;
    spec.validate()?;
    let c = construct::construct(&spec)?;
    let best = c.best();
    let code = if best.accepted && best.certificate.verdict.is_verified() {
        EXIT_VERIFIED
    } else {
        EXIT_UNCONFIRMED
    };
    Ok((pretty(&report::construction(&c)), code))
}

/// Refined points with their parameter values t.
struct Refined {
    polygon: Polygon,
    indices: Vec<i64>,
    params: Vec<Scalar>,
}

fn refine(spec: &SchemeSpec, p: &Polygon, levels: u32, closed: bool) -> Result<Refined, Failure> {
    let n = p.points.len() as i64;
    let (alpha, beta) = quasistat::parameter_map(spec, levels);
    let (indices, columns): (Vec<i64>, Vec<Vec<Scalar>>) = if closed {
        let cols = (0..p.dim())
            .map(|c| quasistat::quasi_subdivide_periodic(spec, &p.column_vec(c), levels))
            .collect::<subdivkit::Result<Vec<_>>>()?;
        ((0..cols[0].len() as i64).collect(), cols)
    } else {
        let (lo, hi) = quasistat::determined_range(spec, (0, n - 1), levels).ok_or_else(|| Failure {
            code: EXIT_USAGE,
            message: format!("{n} control points are too few for {levels} levels of this scheme"),
        })?;
        let cols = (0..p.dim())
            .map(|c| {
                quasistat::quasi_subdivide(spec, &p.column(c), levels).map(|v| (lo..=hi).map(|j| v.at(j)).collect())
            })
            .collect::<subdivkit::Result<Vec<Vec<Scalar>>>>()?;
        ((lo..=hi).collect(), cols)
    };
    let points = (0..indices.len()).map(|i| columns.iter().map(|c| c[i].clone()).collect()).collect();
    let params = indices.iter().map(|&j| &(&alpha * &Scalar::from_int(j)) + &beta).collect();
    Ok(Refined {
        polygon: Polygon {
            header: p.header.clone(),
            points,
        },
        indices,
        params,
    })
}

fn subdivide_cmd(scheme: &Path, polygon: &Path, levels: u32, format: Format, closed: bool) -> Outcome {
    let spec = io::parse_scheme(&read(scheme)?)?;
    let p = io::parse_polygon(&read(polygon)?)?;
    let r = refine(&spec, &p, levels, closed)?;
    let text = match format {
        Format::Csv => io::polygon_csv(&r.polygon),
        Format::Svg => io::polygon_svg(&r.polygon, closed),
        Format::Json => {
            let points: Vec<Value> = r
                .indices
                .iter()
                .zip(&r.params)
                .zip(&r.polygon.points)
                .map(|((j, t), pt)| {
                    json!({
                        "index": j,
                        "t": scalar_value(t),
                        "coords": pt.iter().map(scalar_value).collect::<Vec<_>>(),
                    })
                })
                .collect();
            pretty(&json!({
                "levels": levels,
                "closed": closed,
                "dilation": spec.dilation(),
                "period": spec.period(),
                "columns": r.polygon.header,
                "parameter_shift": scalar_value(&spec.shift()),
                "points": points,
            }))
        }
    };
    Ok((text, EXIT_VERIFIED))
}

fn sample_phi_cmd(path: &Path, level: u32, deriv: u32) -> Outcome {
    let a = io::parse_mask(&read(path)?)?;
    a.require_normalized()?;
    let samples = transition::sample_phi_grid(&a, level, deriv)?;
    if !samples.verified {
        eprintln!("warning: continuity of the refinable function is not certified");
    }
    let (l, h) = a.nonzero_support()?;
    let step = pow_checked(a.dilation(), level)? as i64;
    let m1 = a.m() - 1;
    let lo = Integer::div_ceil(&(step * l), &m1);
    let hi = Integer::div_floor(&(step * h), &m1) + deriv as i64;
    let rows = (lo..=hi).map(|k| (Scalar::ratio(k, step), samples.values.at(k)));
    Ok((io::samples_csv(rows), EXIT_VERIFIED))
}

fn spectrum_cmd(path: &Path, gamma: i64, power: u32) -> Outcome {
    let a = io::parse_mask(&read(path)?)?;
    let big = transition::iterated_as_mask(&a, power)?;
    let t = transition::transition_matrix(&big, gamma)?;
    let mut ev = transition::spectrum(&t);
    ev.sort_by(|x, y| {
        y.norm()
            .total_cmp(&x.norm())
            .then(y.re.total_cmp(&x.re))
            .then(y.im.total_cmp(&x.im))
    });
    let doc = json!({
        "dilation": big.dilation(),
        "gamma": gamma,
        "power": power,
        "index_range": t.range.map(|(lo, hi)| [lo, hi]),
        "eigenvalues": ev.into_iter().map(report::complex).collect::<Vec<_>>(),
    });
    Ok((pretty(&doc), EXIT_VERIFIED))
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Analyze { mask, m, n_max, sa } => analyze(&mask, m, n_max, sa),
        Command::Construct {
            dilation,
            sa,
            support,
            sum_rules,
            symmetric,
            m,
            optimize,
        } => construct_cmd(dilation, sa, support, sum_rules, symmetric, m, optimize),
        Command::Subdivide {
            scheme,
            polygon,
            levels,
            format,
            closed,
        } => subdivide_cmd(&scheme, &polygon, levels, format, closed),
        Command::SamplePhi { mask, level, deriv } => sample_phi_cmd(&mask, level, deriv),
        Command::Spectrum { mask, gamma, power } => spectrum_cmd(&mask, gamma, power),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_VERIFIED });
        }
    };
    match run(cli) {
        Ok((text, code)) => {
            print!("{text}");
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
