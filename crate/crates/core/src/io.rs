//! Mask, scheme and polygon file formats plus CSV and SVG emitters.
//!
//! Exact values travel as `"p/q"` strings (integers as `"p"`), floats as
//! decimal strings; unknown JSON fields are rejected.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::quasistat::SchemeSpec;
use crate::scalar::{decimal17, Scalar};
use crate::seq::{FiniteSequence, Mask};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dilation: u64,
    /// [l, h], inclusive.
    pub support: [i64; 2],
    pub coeffs: Vec<String>,
}

impl MaskFile {
    pub fn from_mask(a: &Mask, name: Option<&str>) -> Self {
        let (l, h) = a.support().unwrap_or((0, 0));
        MaskFile {
            name: name.map(str::to_owned),
            dilation: a.dilation(),
            support: [l, h],
            coeffs: (l..=h).map(|k| a.at(k).to_string()).collect(),
        }
    }

    pub fn to_mask(&self) -> Result<Mask> {
        let [l, h] = self.support;
        if h < l {
            return Err(Error::Parse(format!("support [{l}, {h}] is empty")));
        }
        let want = (h - l + 1) as usize;
        if self.coeffs.len() != want {
            return Err(Error::Parse(format!(
                "support [{l}, {h}] needs {want} coefficients, found {}",
                self.coeffs.len()
            )));
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| c.parse::<Scalar>())
            .collect::<Result<Vec<_>>>()?;
        let a = Mask::new(FiniteSequence::new(l, coeffs), self.dilation)?;
        a.nonzero_support()?;
        Ok(a)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dilation: u64,
    pub masks: Vec<MaskFile>,
}

impl SchemeFile {
    pub fn from_spec(spec: &SchemeSpec, name: Option<&str>) -> Self {
        SchemeFile {
            name: name.map(str::to_owned),
            dilation: spec.dilation(),
            masks: spec.masks().iter().map(|a| MaskFile::from_mask(a, None)).collect(),
        }
    }

    pub fn to_spec(&self) -> Result<SchemeSpec> {
        let masks = self
            .masks
            .iter()
            .enumerate()
            .map(|(i, f)| {
                if f.dilation != self.dilation {
                    return Err(Error::Parse(format!(
                        "mask {} has dilation {}, scheme has {}",
                        i + 1,
                        f.dilation,
                        self.dilation
                    )));
                }
                f.to_mask()
            })
            .collect::<Result<Vec<_>>>()?;
        SchemeSpec::new(masks)
    }
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

pub fn parse_mask(text: &str) -> Result<Mask> {
    serde_json::from_str::<MaskFile>(text).map_err(json_error)?.to_mask()
}

/// A scheme file, or a single mask file read as a scheme with r = 1.
pub fn parse_scheme(text: &str) -> Result<SchemeSpec> {
    let value: Value = serde_json::from_str(text).map_err(json_error)?;
    if value.get("masks").is_some() {
        serde_json::from_value::<SchemeFile>(value).map_err(json_error)?.to_spec()
    } else {
        let a = serde_json::from_value::<MaskFile>(value).map_err(json_error)?.to_mask()?;
        SchemeSpec::new(vec![a])
    }
}

pub fn mask_json(a: &Mask, name: Option<&str>) -> String {
    serde_json::to_string_pretty(&MaskFile::from_mask(a, name)).expect("mask serializes")
}

/// Exact scalars as `"p/q"` strings, floats as JSON numbers.
pub fn scalar_value(s: &Scalar) -> Value {
    match s {
        Scalar::Exact(_) => Value::String(s.to_string()),
        Scalar::Float(x) => float_value(*x),
    }
}

/// Non-finite floats become `null`.
pub fn float_value(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

/// Control points in input order; every row has `dim` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    pub header: Option<Vec<String>>,
    pub points: Vec<Vec<Scalar>>,
}

impl Polygon {
    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// Coordinate `c` as a sequence indexed from 0.
    pub fn column(&self, c: usize) -> FiniteSequence {
        FiniteSequence::new(0, self.points.iter().map(|p| p[c].clone()).collect())
    }

    pub fn column_vec(&self, c: usize) -> Vec<Scalar> {
        self.points.iter().map(|p| p[c].clone()).collect()
    }
}

/// Rows `x,y` or `x,y,z`; a first row that does not parse as numbers is a
/// header.
pub fn parse_polygon(text: &str) -> Result<Polygon> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut header: Option<Vec<String>> = None;
    let mut points: Vec<Vec<Scalar>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<Scalar>> = rec.iter().map(str::parse).collect();
        match parsed {
            Ok(p) => {
                if !(2..=3).contains(&p.len()) {
                    return Err(Error::Parse(format!("row {}: expected 2 or 3 columns, found {}", i + 1, p.len())));
                }
                if let Some(first) = points.first() {
                    if first.len() != p.len() {
                        return Err(Error::Parse(format!("row {}: column count changed", i + 1)));
                    }
                }
                points.push(p);
            }
            Err(_) if i == 0 => {
                header = Some(rec.iter().map(str::to_owned).collect());
            }
            Err(e) => return Err(Error::Parse(format!("row {}: {e}", i + 1))),
        }
    }
    if points.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "a polygon needs at least 2 points, found {}",
            points.len()
        )));
    }
    if let Some(h) = &header {
        if h.len() != points[0].len() {
            return Err(Error::Parse("header and data column counts differ".into()));
        }
    }
    Ok(Polygon { header, points })
}

/// CSV with the input's header (if any) and 17-significant-digit values.
pub fn polygon_csv(p: &Polygon) -> String {
    let mut out = String::new();
    if let Some(h) = &p.header {
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for row in &p.points {
        let cells: Vec<String> = row.iter().map(decimal17).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// SVG 1.1 document with one path through the first two coordinates; the
/// y axis is flipped so that larger y is drawn higher.
pub fn polygon_svg(p: &Polygon, closed: bool) -> String {
    let pts: Vec<(f64, f64)> = p.points.iter().map(|r| (r[0].to_f64(), r[1].to_f64())).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let pad = 0.05 * span;
    let (w, h) = (x1 - x0 + 2.0 * pad, y1 - y0 + 2.0 * pad);
    let mut d = String::new();
    for (i, &(x, y)) in pts.iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        let _ = write!(d, "{}{} {} ", cmd, fmt_svg(x), fmt_svg(-y));
    }
    if closed {
        d.push('Z');
    }
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"{} {} {} {}\">\n\
         <path d=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"{}\"/>\n\
         </svg>\n",
        fmt_svg(x0 - pad),
        fmt_svg(-y1 - pad),
        fmt_svg(w),
        fmt_svg(h),
        d.trim_end(),
        fmt_svg(span / 400.0)
    )
}

/// Shortest round-trip decimal, with −0 printed as 0.
fn fmt_svg(x: f64) -> String {
    format!("{}", if x == 0.0 { 0.0 } else { x })
}

/// CSV rows `x,value` for grid samples of φ.
pub fn samples_csv(rows: impl IntoIterator<Item = (Scalar, Scalar)>) -> String {
    let mut out = String::from("x,value\n");
    for (x, v) in rows {
        let _ = writeln!(out, "{},{}", decimal17(&x), decimal17(&v));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn mask_roundtrip_is_exact() {
        for f in fixtures::stationary() {
            let text = mask_json(&f.mask, Some(f.name));
            assert_eq!(parse_mask(&text).unwrap(), f.mask, "{}", f.name);
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"dilation": 2, "support": [-1, 1], "coeffs": ["1/4","1/2","1/4"], "dilaton": 2}"#;
        assert!(matches!(parse_mask(text), Err(Error::Parse(_))));
    }

    #[test]
    fn coefficient_count_must_match_support() {
        let text = r#"{"dilation": 2, "support": [-1, 2], "coeffs": ["1/4","1/2","1/4"]}"#;
        assert!(parse_mask(text).is_err());
    }

    #[test]
    fn decimal_coefficients_are_floats() {
        let text = r#"{"dilation": 2, "support": [-1, 1], "coeffs": ["0.25","0.5","0.25"]}"#;
        let a = parse_mask(text).unwrap();
        assert!(!a.is_exact());
        assert!(a.is_normalized());
    }

    #[test]
    fn scheme_requires_normalized_masks() {
        let text = r#"{"dilation": 2, "masks": [{"dilation": 2, "support": [0, 1], "coeffs": ["1/2","1/4"]}]}"#;
        assert!(matches!(parse_scheme(text), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn single_mask_reads_as_scheme() {
        let spec = parse_scheme(&mask_json(&Mask::hat(), None)).unwrap();
        assert_eq!(spec.period(), 1);
        assert_eq!(spec.composed(), &Mask::hat());
    }

    #[test]
    fn scheme_roundtrip() {
        let spec = SchemeSpec::new(fixtures::quasi_pair_c1()).unwrap();
        let text = serde_json::to_string(&SchemeFile::from_spec(&spec, Some("pair"))).unwrap();
        assert_eq!(parse_scheme(&text).unwrap(), spec);
    }

    #[test]
    fn polygon_with_and_without_header() {
        let p = parse_polygon("x,y\n0,0\n1,0\n1,1\n").unwrap();
        assert_eq!(p.header, Some(vec!["x".to_string(), "y".to_string()]));
        assert_eq!(p.points.len(), 3);
        let q = parse_polygon("0, 0, 1\n1/2, 2.5, 0\n").unwrap();
        assert_eq!(q.header, None);
        assert_eq!(q.dim(), 3);
        assert_eq!(q.points[1][0], Scalar::ratio(1, 2));
        assert_eq!(polygon_csv(&p), "x,y\n0,0\n1,0\n1,1\n");
    }

    #[test]
    fn polygon_validation() {
        assert!(parse_polygon("").is_err());
        assert!(parse_polygon("x,y\n1,2\n").is_err());
        assert!(parse_polygon("1\n2\n").is_err());
        assert!(parse_polygon("1,2\n3,4,5\n").is_err());
        assert!(parse_polygon("1,2\nnan,4\n").is_err());
    }

    #[test]
    fn svg_has_one_path() {
        let p = parse_polygon("0,0\n1,0\n1,1\n0,1\n").unwrap();
        let svg = polygon_svg(&p, true);
        assert_eq!(svg.matches("<path").count(), 1);
        assert!(svg.contains("viewBox=\"-0.05 -1.05 1.1 1.1\""), "{svg}");
        assert!(svg.contains("d=\"M0 0 L1 0 L1 -1 L0 -1 Z\""), "{svg}");
    }
}
