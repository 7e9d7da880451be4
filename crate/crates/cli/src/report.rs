//! JSON documents emitted by the command-line tool.

use num_complex::Complex64;
use serde_json::{json, Map, Value};
use subdivkit::analysis::SmoothnessReport;
use subdivkit::construct::{Construction, ConstructionResult, Family};
use subdivkit::interp::{Admissibility, InterpolationCertificate, Verdict};
use subdivkit::io::{float_value, scalar_value, MaskFile};
use subdivkit::{FiniteSequence, Scalar};

pub fn complex(z: Complex64) -> Value {
    json!({ "re": float_value(z.re), "im": float_value(z.im), "modulus": float_value(z.norm()) })
}

pub fn sequence(v: &FiniteSequence) -> Value {
    json!({
        "start": v.start(),
        "values": v.coeffs().iter().map(scalar_value).collect::<Vec<_>>(),
    })
}

pub fn admissibility(a: &Admissibility) -> Value {
    json!({
        "s_a": a.s_a.to_string(),
        "m_s": a.m_s,
        "n_s": a.n_s,
        "gamma": a.gamma.to_string(),
    })
}

pub fn verdict(v: &Verdict) -> Value {
    let mut out = Map::new();
    out.insert("verdict".into(), v.label().into());
    match v {
        Verdict::Verified { m } => {
            out.insert("m".into(), (*m).into());
        }
        Verdict::Unconfirmed { best_bound, level } => {
            out.insert("best_bound".into(), float_value(*best_bound));
            out.insert("level".into(), json!(level));
        }
        Verdict::Failed { reason } => {
            out.insert("reason".into(), reason.clone().into());
        }
    }
    Value::Object(out)
}

pub fn smoothness(r: &SmoothnessReport) -> Value {
    json!({
        "sum_rules": r.sr,
        "sm2": float_value(r.sm2),
        "lambda_c": complex(r.lambda_c),
        "lambda_c_complex": r.lambda_c_complex,
        "sminf_lower": r.sminf_lower.iter().map(|&(n, b)| json!({ "n": n, "bound": float_value(b) })).collect::<Vec<_>>(),
        "best_bound": float_value(r.best_bound()),
        "resource_limited_at": r.resource_limited_at,
    })
}

fn residual(r: &Option<Scalar>) -> Value {
    r.as_ref().map_or(Value::Null, scalar_value)
}

pub fn certificate(c: &InterpolationCertificate) -> Value {
    json!({
        "admissibility": admissibility(&c.admissibility),
        "target": c.target,
        "w": sequence(&c.w),
        "support_window": c.support_window.map(|(lo, hi)| [lo, hi]),
        "residual_coarse": residual(&c.residual_coarse),
        "residual_refine": residual(&c.residual_refine),
        "residual_direct": residual(&c.residual_direct),
        "tolerance": float_value(c.tolerance),
        "result": verdict(&c.verdict),
    })
}

pub fn family(f: &Family) -> Value {
    let strings = |v: &[num_rational::BigRational]| v.iter().map(ToString::to_string).collect::<Vec<_>>();
    match f {
        Family::Affine {
            labels,
            start,
            constant,
            directions,
        } => json!({
            "kind": "affine",
            "parameters": labels,
            "start": start,
            "constant": strings(constant),
            "directions": directions.iter().map(|d| strings(d)).collect::<Vec<_>>(),
        }),
        Family::Implicit { coordinates } => json!({
            "kind": "implicit",
            "coordinates": coordinates,
        }),
    }
}

pub fn candidate(c: &ConstructionResult) -> Value {
    json!({
        "mask": serde_json::to_value(MaskFile::from_mask(&c.mask, None)).expect("mask serializes"),
        "exact": c.mask.is_exact(),
        "route": c.route.label(),
        "residual": float_value(c.residual),
        "float_root": c.float_root.as_ref().map(|x| x.iter().copied().map(float_value).collect::<Vec<_>>()),
        "family": c.family.as_ref().map(family),
        "parameters": c.parameters.iter().map(scalar_value).collect::<Vec<_>>(),
        "sm2": float_value(c.sm2.value),
        "lambda_c_modulus": float_value(c.sm2.modulus()),
        "accepted": c.accepted,
        "interpolation": verdict(&c.certificate.verdict),
    })
}

pub fn construction(c: &Construction) -> Value {
    let s = &c.spec;
    json!({
        "spec": {
            "dilation": s.dilation,
            "sum_rules": s.sum_rules,
            "support": [s.support.0, s.support.1],
            "s_a": s.s_a.to_string(),
            "symmetric": s.symmetric,
            "m": s.m,
            "optimize": s.optimize,
        },
        "admissibility": admissibility(&c.admissibility),
        "moment_model_dimension": c.model.dim(),
        "best": candidate(c.best()),
        "candidates": c.candidates.iter().map(candidate).collect::<Vec<_>>(),
    })
}
