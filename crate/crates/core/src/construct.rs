//! Mask construction: parameterize under sum rules, impose linear-phase
//! moments, solve the interpolation identities, gate on smoothness, and
//! optionally maximize sm2 over a remaining family.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::analysis::{self, box_filter, Sm2};
use crate::error::{Error, Result};
use crate::interp::{self, Admissibility, InterpolationCertificate, Verdict, VerifyOptions};
use crate::linalg::{numerical_rank, solve_affine, Matrix};
use crate::rationalize::snap;
use crate::scalar::{int, rational_to_f64, Scalar};
use crate::seq::{convolve, FiniteSequence, Mask};
use crate::solver::{self, gauss_newton, halton, NewtonOptions, OptimizeOptions};
use crate::transition::{bigint_to_i64, pow_checked};

/// Largest denominator accepted when snapping float roots.
pub const MAX_SNAP_DENOMINATOR: i64 = 1_000_000;

/// Relative tolerance for snapping float roots.
pub const SNAP_TOL: f64 = 1e-9;

/// Relative singular-value cutoff for the rank of a finite-difference Jacobian.
pub const JACOBIAN_RANK_TOL: f64 = 1e-6;

/// Float masks closer than this in every coefficient count as one root.
pub const DUPLICATE_TOL: f64 = 1e-6;

/// Most free parameters handed to the optimizer.
pub const MAX_OPTIMIZED_PARAMETERS: usize = 3;

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub starts: usize,
    pub newton: NewtonOptions,
    pub optimize: OptimizeOptions,
    pub verify: VerifyOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            starts: 64,
            newton: NewtonOptions::default(),
            optimize: OptimizeOptions::default(),
            verify: VerifyOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConstructionSpec {
    pub dilation: u64,
    pub sum_rules: u32,
    /// [l_a, h_a].
    pub support: (i64, i64),
    pub s_a: BigRational,
    /// Impose a(k) = a(l_a + h_a − k).
    pub symmetric: bool,
    /// Target smoothness order for the gate.
    pub m: u32,
    pub optimize: bool,
    pub solver: SolverOptions,
}

impl ConstructionSpec {
    pub fn new(dilation: u64, sum_rules: u32, support: (i64, i64), s_a: BigRational) -> Self {
        ConstructionSpec {
            dilation,
            sum_rules,
            support,
            s_a,
            symmetric: false,
            m: 0,
            optimize: false,
            solver: SolverOptions::default(),
        }
    }

    /// h̃_a = h_a − (M−1)J, the top index of the quotient unknowns.
    pub fn quotient_top(&self) -> i64 {
        self.support.1 - (self.dilation as i64 - 1) * self.sum_rules as i64
    }

    pub fn validate(&self) -> Result<()> {
        if self.dilation < 2 {
            return Err(Error::InvalidDilation(self.dilation));
        }
        let (l, h) = self.support;
        if l > h {
            return Err(Error::InvalidArgument(format!("empty support [{l}, {h}]")));
        }
        if self.sum_rules < 1 {
            return Err(Error::InvalidArgument("at least one sum rule is required".into()));
        }
        if self.quotient_top() < l {
            return Err(Error::Infeasible(format!(
                "support [{l}, {h}] is too short for {} sum rules with M = {}",
                self.sum_rules, self.dilation
            )));
        }
        if self.symmetric {
            let center = int(l + h) / int(2 * (self.dilation as i64 - 1));
            if center != self.s_a {
                return Err(Error::InvalidArgument(format!(
                    "symmetric masks on [{l}, {h}] need s_a = {center}, got {}",
                    self.s_a
                )));
            }
        }
        Ok(())
    }
}

/// c + Σ_i x_i B_i over the rationals.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearForm {
    pub constant: BigRational,
    pub coeffs: Vec<BigRational>,
}

impl LinearForm {
    pub fn zero(dim: usize) -> Self {
        LinearForm {
            constant: BigRational::zero(),
            coeffs: vec![BigRational::zero(); dim],
        }
    }

    pub fn add_scaled(&mut self, other: &LinearForm, c: &BigRational) {
        if c.is_zero() {
            return;
        }
        self.constant += &other.constant * c;
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += y * c;
        }
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }
}

/// A sequence on [start, start + len) whose entries are affine in the
/// parameters: constant + Σ_i x_i basis_i.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineModel {
    pub start: i64,
    pub constant: Vec<BigRational>,
    pub basis: Vec<Vec<BigRational>>,
    pub labels: Vec<String>,
}

impl AffineModel {
    /// Every entry on [start, start + len) a free unknown labelled `name(k)`.
    pub fn free(name: &str, start: i64, len: usize) -> Self {
        let basis = (0..len)
            .map(|i| {
                let mut v = vec![BigRational::zero(); len];
                v[i] = BigRational::one();
                v
            })
            .collect();
        AffineModel {
            start,
            constant: vec![BigRational::zero(); len],
            basis,
            labels: (0..len).map(|i| format!("{name}({})", start + i as i64)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn len(&self) -> usize {
        self.constant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constant.is_empty()
    }

    pub fn end(&self) -> i64 {
        self.start + self.len() as i64 - 1
    }

    pub fn form(&self, k: i64) -> LinearForm {
        if k < self.start || k > self.end() {
            return LinearForm::zero(self.dim());
        }
        let i = (k - self.start) as usize;
        LinearForm {
            constant: self.constant[i].clone(),
            coeffs: self.basis.iter().map(|b| b[i].clone()).collect(),
        }
    }

    pub fn eval_exact(&self, x: &[BigRational]) -> Vec<BigRational> {
        let mut out = self.constant.clone();
        for (b, xi) in self.basis.iter().zip(x) {
            if xi.is_zero() {
                continue;
            }
            for (o, bj) in out.iter_mut().zip(b) {
                *o += bj * xi;
            }
        }
        out
    }

    pub fn sequence(&self, x: &[BigRational]) -> FiniteSequence {
        FiniteSequence::from_rationals(self.start, self.eval_exact(x))
    }

    /// Entries that are the same for every parameter value.
    pub fn is_pinned_at(&self, k: i64) -> bool {
        self.form(k).is_constant()
    }

    /// Restricts the parameters to the solutions of `forms[i] = targets[i]`,
    /// or `None` when the equations are inconsistent.
    pub fn impose(&self, equations: &[(LinearForm, BigRational)]) -> Option<AffineModel> {
        if equations.is_empty() {
            return Some(self.clone());
        }
        let rows: Vec<Vec<Scalar>> = equations
            .iter()
            .map(|(f, _)| f.coeffs.iter().cloned().map(Scalar::Exact).collect())
            .collect();
        let rhs: Vec<Scalar> = equations
            .iter()
            .map(|(f, t)| Scalar::Exact(t - &f.constant))
            .collect();
        if self.dim() == 0 {
            return rhs.iter().all(Scalar::is_zero).then(|| self.clone());
        }
        let sol = solve_affine(&Matrix::from_rows(rows), &rhs)?;
        let exact = |v: &[Scalar]| -> Vec<BigRational> {
            v.iter()
                .map(|s| s.as_rational().cloned().expect("exact elimination"))
                .collect()
        };
        let particular = exact(&sol.particular);
        Some(AffineModel {
            start: self.start,
            constant: self.eval_exact(&particular),
            basis: sol
                .basis
                .iter()
                .map(|v| {
                    let mut col = self.eval_exact(&exact(v));
                    for (c, k) in col.iter_mut().zip(&self.constant) {
                        *c -= k;
                    }
                    col
                })
                .collect(),
            labels: sol.free.iter().map(|&f| self.labels[f].clone()).collect(),
        })
    }

    /// Σ_k k^j x(k) = targets[j] for j = 0..targets.len().
    pub fn moment_equations(&self, targets: &[BigRational]) -> Vec<(LinearForm, BigRational)> {
        targets
            .iter()
            .enumerate()
            .map(|(j, t)| {
                let mut f = LinearForm::zero(self.dim());
                for k in self.start..=self.end() {
                    f.add_scaled(&self.form(k), &int(k).pow(j as i32));
                }
                (f, t.clone())
            })
            .collect()
    }

    fn to_float(&self) -> FloatModel {
        let conv = |v: &[BigRational]| v.iter().map(rational_to_f64).collect::<Vec<f64>>();
        FloatModel {
            start: self.start,
            constant: conv(&self.constant),
            basis: self.basis.iter().map(|b| conv(b)).collect(),
        }
    }
}

#[derive(Clone, Debug)]
struct FloatModel {
    start: i64,
    constant: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

impl FloatModel {
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.constant.clone();
        for (b, xi) in self.basis.iter().zip(x) {
            for (o, bj) in out.iter_mut().zip(b) {
                *o += bj * xi;
            }
        }
        out
    }

    fn gradient_at(&self, k: i64) -> Vec<f64> {
        let i = (k - self.start) as usize;
        self.basis.iter().map(|b| b[i]).collect()
    }

    fn constant_at(&self, k: i64) -> f64 {
        self.constant[(k - self.start) as usize]
    }
}

/// Mask coefficients on [l_a, h_a] as (1 + z + … + z^{M−1})^J · b̃(z) with
/// unknowns b(l_a..=h̃_a), folded pairwise when symmetric.
pub fn parameterize(spec: &ConstructionSpec) -> Result<AffineModel> {
    spec.validate()?;
    let (l, h) = spec.support;
    let top = spec.quotient_top();
    let mut factor = FiniteSequence::delta();
    let boxf = box_filter(spec.dilation);
    for _ in 0..spec.sum_rules {
        factor = convolve(&factor, &boxf);
    }
    let len = (h - l + 1) as usize;
    let count = (top - l + 1) as usize;
    let groups: Vec<Vec<usize>> = if spec.symmetric {
        (0..count.div_ceil(2))
            .map(|i| if i == count - 1 - i { vec![i] } else { vec![i, count - 1 - i] })
            .collect()
    } else {
        (0..count).map(|i| vec![i]).collect()
    };
    let mut basis = Vec::with_capacity(groups.len());
    let mut labels = Vec::with_capacity(groups.len());
    for g in &groups {
        let mut col = vec![BigRational::zero(); len];
        for &i in g {
            let shifted = factor.shift(l + i as i64);
            for (k, c) in shifted.iter() {
                col[(k - l) as usize] += c.as_rational().expect("exact factor");
            }
        }
        basis.push(col);
        labels.push(format!("b({})", l + g[0] as i64));
    }
    Ok(AffineModel {
        start: l,
        constant: vec![BigRational::zero(); len],
        basis,
        labels,
    })
}

/// Σ_k k^j a(k) = ((M−1)s_a)^j for j = 0..J−1, solved exactly.
pub fn solve_moment_constraints(model: &AffineModel, spec: &ConstructionSpec) -> Result<AffineModel> {
    let m_a = &spec.s_a * int(spec.dilation as i64 - 1);
    let targets: Vec<BigRational> = (0..spec.sum_rules).map(|j| m_a.pow(j as i32)).collect();
    model
        .impose(&model.moment_equations(&targets))
        .ok_or_else(|| Error::Infeasible("linear-phase moment equations are inconsistent".into()))
}

/// Samples w on the open window with Σ_k k^j w(k) = (s_a − M^{m_s}s_a)^j.
pub fn sample_model(spec: &ConstructionSpec, adm: &Admissibility) -> Result<AffineModel> {
    let (l, h) = spec.support;
    let m1 = int(spec.dilation as i64 - 1);
    let x = &spec.s_a * BigRational::from_integer(BigInt::from(spec.dilation).pow(adm.m_s));
    let lo = bigint_to_i64(&((int(l) / &m1 - &x).floor().to_integer() + 1))?;
    let hi = bigint_to_i64(&((int(h) / &m1 - &x).ceil().to_integer() - 1))?;
    if lo > hi {
        return Err(Error::Infeasible("the sample window is empty".into()));
    }
    let free = AffineModel::free("w", lo, (hi - lo + 1) as usize);
    let base = &spec.s_a - &x;
    let targets: Vec<BigRational> = (0..spec.sum_rules).map(|j| base.pow(j as i32)).collect();
    free.impose(&free.moment_equations(&targets))
        .ok_or_else(|| Error::Infeasible("sample moment equations are inconsistent".into()))
}

/// How the interpolation identities were solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// m_s = 0, n_s = 1: a(γ + Mk) = M^{−1}δ(k).
    Direct,
    /// m_s = 0, n_s = 2 with the γ-coset of a fixed by the moments.
    PinnedCoset,
    /// m_s = 1, n_s = 1 with the samples w fixed by their moments.
    PinnedSamples,
    Newton,
}

impl Route {
    pub fn label(&self) -> &'static str {
        match self {
            Route::Direct => "linear-direct",
            Route::PinnedCoset => "linear-pinned-coset",
            Route::PinnedSamples => "linear-pinned-samples",
            Route::Newton => "newton",
        }
    }
}

/// Remaining freedom of a constructed mask.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// mask = constant + Σ θ_i directions_i on [start, ...], every θ valid.
    Affine {
        labels: Vec<String>,
        start: i64,
        constant: Vec<BigRational>,
        directions: Vec<Vec<BigRational>>,
    },
    /// Solution set locally parameterized by the listed mask or sample
    /// coordinates; members are found by Newton.
    Implicit { coordinates: Vec<String> },
}

impl Family {
    pub fn dimension(&self) -> usize {
        match self {
            Family::Affine { directions, .. } => directions.len(),
            Family::Implicit { coordinates } => coordinates.len(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConstructionResult {
    pub mask: Mask,
    pub route: Route,
    /// Max-norm residual of the float identities before snapping; 0 on
    /// linear routes.
    pub residual: f64,
    /// The float root whose snap failed verification, when `mask` is float.
    pub float_root: Option<Vec<f64>>,
    pub family: Option<Family>,
    /// Family coordinates of this member.
    pub parameters: Vec<Scalar>,
    pub sm2: Sm2,
    pub certificate: InterpolationCertificate,
    /// |λ_c| < M^{−2m−2}.
    pub accepted: bool,
}

#[derive(Clone, Debug)]
pub struct Construction {
    pub spec: ConstructionSpec,
    pub admissibility: Admissibility,
    /// Model after the moment equations.
    pub model: AffineModel,
    /// Candidates in selection order; never empty.
    pub candidates: Vec<ConstructionResult>,
}

impl Construction {
    pub fn best(&self) -> &ConstructionResult {
        &self.candidates[0]
    }
}

/// |λ_c| < M^{−2m−2}.
pub fn smoothness_gate(a: &Mask, m: u32) -> Result<(Sm2, bool)> {
    let s = analysis::sm2(a)?;
    let bound = (a.dilation() as f64).powi(-2 * m as i32 - 2);
    let accepted = s.modulus() < bound;
    Ok((s, accepted))
}

/// Re-checks every construction constraint on a concrete mask: support,
/// symmetry, sum rules, linear-phase moments, and the interpolation
/// identities. Returns the certificate when all hold.
pub fn check_candidate(spec: &ConstructionSpec, a: &Mask) -> Result<Option<InterpolationCertificate>> {
    if a.dilation() != spec.dilation || !a.is_normalized() {
        return Ok(None);
    }
    let (l, h) = spec.support;
    match a.support() {
        Some((lo, hi)) if lo >= l && hi <= h => {}
        _ => return Ok(None),
    }
    if spec.symmetric {
        let tol = 1e-12 * a.seq().norm1_f64();
        let symmetric = (l..=h).all(|k| {
            let d = a.at(k) - a.at(l + h - k);
            if d.is_exact() {
                d.is_zero()
            } else {
                d.to_f64().abs() <= tol
            }
        });
        if !symmetric {
            return Ok(None);
        }
    }
    if analysis::sum_rule_order(a)? < spec.sum_rules {
        return Ok(None);
    }
    if !analysis::linear_phase_residuals(a, spec.sum_rules).holds {
        return Ok(None);
    }
    let cert = interp::verify_interpolatory(a, &spec.s_a, spec.m, spec.solver.verify)?;
    Ok((!matches!(cert.verdict, Verdict::Failed { .. })).then_some(cert))
}

/// Equations that make the identities linear, when the admissible pair
/// allows it.
fn linear_identities(model: &AffineModel, samples: Option<&AffineModel>, adm: &Admissibility, m: i64) -> Result<Option<(Route, Vec<(LinearForm, BigRational)>)>> {
    let gamma = bigint_to_i64(&adm.gamma)?;
    let (l, h) = (model.start, model.end());
    let dim = model.dim();
    let delta = |k: i64, scale: i64| if k == 0 { int(1) / int(scale) } else { BigRational::zero() };
    let k_range = |lo: i64, hi: i64, offset: i64, step: i64| {
        let a = Integer::div_ceil(&(lo - offset), &step).min(0);
        let b = Integer::div_floor(&(hi - offset), &step).max(0);
        a..=b
    };
    match (adm.m_s, adm.n_s) {
        (0, 1) => {
            let eqs = k_range(l, h, gamma, m)
                .map(|k| (model.form(gamma + m * k), delta(k, m)))
                .collect();
            Ok(Some((Route::Direct, eqs)))
        }
        (0, 2) => {
            let coset: Vec<i64> = (l..=h).filter(|k| (k - gamma).rem_euclid(m) == 0).collect();
            if !coset.iter().all(|&k| model.is_pinned_at(k)) {
                return Ok(None);
            }
            // A_2(γ + M²k) = Σ_i a(i) a(γ + M(Mk − i)).
            let (lo2, hi2) = (l + m * l, h + m * h);
            let eqs = k_range(lo2, hi2, gamma, m * m)
                .map(|k| {
                    let mut f = LinearForm::zero(dim);
                    for i in l..=h {
                        let c = &model.form(gamma + m * (m * k - i)).constant;
                        f.add_scaled(&model.form(i), c);
                    }
                    (f, delta(k, m * m))
                })
                .collect();
            Ok(Some((Route::PinnedCoset, eqs)))
        }
        (1, 1) => {
            let Some(w) = samples else { return Ok(None) };
            if w.dim() != 0 {
                return Ok(None);
            }
            let wv = w.sequence(&[]);
            let (wl, wh) = (w.start, w.end());
            let conv_form = |target: i64| {
                let mut f = LinearForm::zero(dim);
                for i in l..=h {
                    if let Some(c) = wv.at(target - i).as_rational() {
                        f.add_scaled(&model.form(i), c);
                    }
                }
                f
            };
            let mut eqs: Vec<(LinearForm, BigRational)> = k_range(l + wl, h + wh, 0, m)
                .map(|k| (conv_form(m * k), delta(k, m)))
                .collect();
            let refine_lo = Integer::div_ceil(&(l + wl - gamma), &m).min(wl);
            let refine_hi = Integer::div_floor(&(h + wh - gamma), &m).max(wh);
            for k in refine_lo..=refine_hi {
                let target = wv.at(k).as_rational().cloned().expect("exact samples") / int(m);
                eqs.push((conv_form(gamma + m * k), target));
            }
            Ok(Some((Route::PinnedSamples, eqs)))
        }
        _ => Ok(None),
    }
}

/// Float residuals of the identities as a function of (model, sample)
/// parameters.
struct IdentityResiduals {
    mask: FloatModel,
    samples: Option<FloatModel>,
    m: i64,
    gamma: i64,
    m_s: u32,
    n_s: u32,
}

fn conv_f64(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Ã_n(z) = ã(z) Ã_{n−1}(z^M) on its structural support.
fn iterate_f64(a: &[f64], l: i64, m: i64, n: u32) -> (i64, Vec<f64>) {
    let mut start = 0i64;
    let mut v = vec![1.0];
    for _ in 0..n {
        let mut up = vec![0.0; (v.len() - 1) * m as usize + 1];
        for (i, x) in v.iter().enumerate() {
            up[i * m as usize] = *x;
        }
        v = conv_f64(a, &up);
        start = l + m * start;
    }
    (start, v)
}

fn at(start: i64, v: &[f64], k: i64) -> f64 {
    let i = k - start;
    if i < 0 || i as usize >= v.len() {
        0.0
    } else {
        v[i as usize]
    }
}

impl IdentityResiduals {
    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        x.split_at(self.mask.basis.len())
    }

    fn dim(&self) -> usize {
        self.mask.basis.len() + self.samples.as_ref().map_or(0, |s| s.basis.len())
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let (p, q) = self.split(x);
        let a = self.mask.eval(p);
        let l = self.mask.start;
        let mn = self.m.pow(self.n_s);
        let (an_start, an) = iterate_f64(&a, l, self.m, self.n_s);
        let an_end = an_start + an.len() as i64 - 1;
        let mut out = Vec::new();
        match &self.samples {
            None => {
                let lo = Integer::div_ceil(&(an_start - self.gamma), &mn).min(0);
                let hi = Integer::div_floor(&(an_end - self.gamma), &mn).max(0);
                for k in lo..=hi {
                    let d = if k == 0 { 1.0 / mn as f64 } else { 0.0 };
                    out.push(at(an_start, &an, self.gamma + mn * k) - d);
                }
            }
            Some(sm) => {
                let w = sm.eval(q);
                let (wl, wh) = (sm.start, sm.start + w.len() as i64 - 1);
                let mm = self.m.pow(self.m_s);
                let (am_start, am) = iterate_f64(&a, l, self.m, self.m_s);
                let coarse = conv_f64(&am, &w);
                let c_start = am_start + wl;
                let c_end = c_start + coarse.len() as i64 - 1;
                let lo = Integer::div_ceil(&c_start, &mm).min(0);
                let hi = Integer::div_floor(&c_end, &mm).max(0);
                for k in lo..=hi {
                    let d = if k == 0 { 1.0 / mm as f64 } else { 0.0 };
                    out.push(at(c_start, &coarse, mm * k) - d);
                }
                let refine = conv_f64(&an, &w);
                let r_start = an_start + wl;
                let r_end = r_start + refine.len() as i64 - 1;
                let lo = Integer::div_ceil(&(r_start - self.gamma), &mn).min(wl);
                let hi = Integer::div_floor(&(r_end - self.gamma), &mn).max(wh);
                for k in lo..=hi {
                    out.push(at(r_start, &refine, self.gamma + mn * k) - at(wl, &w, k) / mn as f64);
                }
            }
        }
        out
    }

    /// Gradient rows of the family coordinates, in preference order:
    /// γ-coset mask entries, then other mask entries (highest index first),
    /// then samples.
    fn coordinate_rows(&self) -> Vec<Coordinate> {
        let dim = self.dim();
        let np = self.mask.basis.len();
        let l = self.mask.start;
        let h = l + self.mask.constant.len() as i64 - 1;
        let mut idx: Vec<i64> = (l..=h).rev().collect();
        idx.sort_by_key(|k| (k - self.gamma).rem_euclid(self.m) != 0);
        let mut rows: Vec<Coordinate> = idx
            .into_iter()
            .map(|k| {
                let mut gradient = self.mask.gradient_at(k);
                gradient.resize(dim, 0.0);
                Coordinate {
                    label: format!("a({k})"),
                    offset: self.mask.constant_at(k),
                    gradient,
                }
            })
            .collect();
        if let Some(sf) = &self.samples {
            let end = sf.start + sf.constant.len() as i64 - 1;
            for k in (sf.start..=end).rev() {
                let mut gradient = vec![0.0; np];
                gradient.extend(sf.gradient_at(k));
                rows.push(Coordinate {
                    label: format!("w({k})"),
                    offset: sf.constant_at(k),
                    gradient,
                });
            }
        }
        rows
    }
}

/// An affine coordinate offset + gradient · x of the unknowns.
#[derive(Clone, Debug)]
struct Coordinate {
    label: String,
    offset: f64,
    gradient: Vec<f64>,
}

impl Coordinate {
    fn value(&self, x: &[f64]) -> f64 {
        self.offset + self.gradient.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
}

struct NewtonRoot {
    x: Vec<f64>,
    residual: f64,
    /// Chosen coordinates when the root lies on a family.
    family: Option<Vec<Coordinate>>,
}

fn stack(rows: &[Vec<f64>]) -> nalgebra::DMatrix<f64> {
    let cols = rows.first().map_or(0, Vec::len);
    nalgebra::DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

/// Greedily picks coordinate rows until the stacked Jacobian has full
/// column rank.
fn choose_coordinates(jac: &nalgebra::DMatrix<f64>, candidates: Vec<Coordinate>) -> Vec<Coordinate> {
    let dim = jac.ncols();
    let mut rows: Vec<Vec<f64>> = (0..jac.nrows()).map(|i| jac.row(i).iter().copied().collect()).collect();
    let mut rank = numerical_rank(&stack(&rows), JACOBIAN_RANK_TOL);
    let mut chosen = Vec::new();
    for c in candidates {
        if rank >= dim {
            break;
        }
        rows.push(c.gradient.clone());
        let r = numerical_rank(&stack(&rows), JACOBIAN_RANK_TOL);
        if r > rank {
            rank = r;
            chosen.push(c);
        } else {
            rows.pop();
        }
    }
    chosen
}

fn coordinate_values(coords: &[Coordinate], x: &[f64]) -> Vec<f64> {
    coords.iter().map(|c| c.value(x)).collect()
}

/// Solves the identities together with coordinate(x) = values.
fn family_member(res: &IdentityResiduals, coords: &[Coordinate], values: &[f64], x0: &[f64], opts: &NewtonOptions) -> Option<Vec<f64>> {
    let f = |x: &[f64]| {
        let mut r = res.eval(x);
        r.extend(coords.iter().zip(values).map(|(c, v)| c.value(x) - v));
        r
    };
    let out = gauss_newton(&f, x0.to_vec(), opts);
    out.converged.then_some(out.x)
}

fn snap_vector(x: &[f64]) -> Option<Vec<BigRational>> {
    x.iter().map(|&v| snap(v, MAX_SNAP_DENOMINATOR, SNAP_TOL)).collect()
}

fn float_mask(model: &FloatModel, p: &[f64], m: u64) -> Result<Mask> {
    Mask::new(FiniteSequence::from_f64(model.start, &model.eval(p)), m)
}

struct Builder<'a> {
    spec: &'a ConstructionSpec,
    model: &'a AffineModel,
}

impl Builder<'_> {
    /// Exact mask from rational parameters, or the float mask when the snap
    /// fails verification.
    fn finish(&self, route: Route, p: &[f64], residual: f64, family: Option<Family>, parameters: Vec<Scalar>) -> Result<Option<ConstructionResult>> {
        if let Some(pr) = snap_vector(p) {
            let exact = Mask::new(self.model.sequence(&pr), self.spec.dilation)?;
            if let Some(cert) = check_candidate(self.spec, &exact)? {
                return self.result(exact, route, residual, None, family, parameters, cert).map(Some);
            }
        }
        let fm = float_mask(&self.model.to_float(), p, self.spec.dilation)?;
        match check_candidate(self.spec, &fm)? {
            Some(cert) => self
                .result(fm, route, residual, Some(p.to_vec()), family, parameters, cert)
                .map(Some),
            None => Ok(None),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn result(&self, mask: Mask, route: Route, residual: f64, float_root: Option<Vec<f64>>, family: Option<Family>, parameters: Vec<Scalar>, certificate: InterpolationCertificate) -> Result<ConstructionResult> {
        let (sm2, accepted) = smoothness_gate(&mask, self.spec.m)?;
        Ok(ConstructionResult {
            mask,
            route,
            residual,
            float_root,
            family,
            parameters,
            sm2,
            certificate,
            accepted,
        })
    }
}

fn sm2_value(a: &Mask) -> f64 {
    analysis::sm2(a).map_or(f64::NEG_INFINITY, |s| s.value)
}

/// Rational point near `x` with a small denominator.
fn tidy(x: f64) -> Scalar {
    match snap(x, MAX_SNAP_DENOMINATOR, 1e-6) {
        Some(r) => Scalar::Exact(r),
        None => Scalar::Float(x),
    }
}

fn solve_linear(b: &Builder, route: Route, eqs: &[(LinearForm, BigRational)]) -> Result<Vec<ConstructionResult>> {
    let spec = b.spec;
    let Some(reduced) = b.model.impose(eqs) else {
        return Err(Error::Infeasible(format!(
            "the interpolation equations ({}) are inconsistent",
            route.label()
        )));
    };
    let dim = reduced.dim();
    let family = (dim > 0).then(|| Family::Affine {
        labels: reduced.labels.clone(),
        start: reduced.start,
        constant: reduced.constant.clone(),
        directions: reduced.basis.clone(),
    });
    let mut theta: Vec<Scalar> = vec![Scalar::zero(); dim];
    if spec.optimize && (1..=MAX_OPTIMIZED_PARAMETERS).contains(&dim) {
        let fm = reduced.to_float();
        let best = solver::maximize(
            |x| float_mask(&fm, x, spec.dilation).map_or(f64::NEG_INFINITY, |a| sm2_value(&a)),
            &vec![0.0; dim],
            &spec.solver.optimize,
        );
        theta = best.x.iter().map(|&v| tidy(v)).collect();
    }
    let mask = if theta.iter().all(Scalar::is_exact) {
        let t: Vec<BigRational> = theta.iter().map(|s| s.as_rational().cloned().unwrap()).collect();
        Mask::new(reduced.sequence(&t), spec.dilation)?
    } else {
        let t: Vec<f64> = theta.iter().map(Scalar::to_f64).collect();
        float_mask(&reduced.to_float(), &t, spec.dilation)?
    };
    let sub = Builder {
        spec,
        model: &reduced,
    };
    match check_candidate(spec, &mask)? {
        Some(cert) => Ok(vec![sub.result(mask, route, 0.0, None, family, theta, cert)?]),
        None => Err(Error::Infeasible(format!(
            "the {} solution fails exact re-verification",
            route.label()
        ))),
    }
}

fn solve_newton(b: &Builder, res: &IdentityResiduals) -> Result<Vec<ConstructionResult>> {
    let spec = b.spec;
    let opts = &spec.solver.newton;
    let dim = res.dim();
    let np = res.mask.basis.len();
    let mut roots: Vec<NewtonRoot> = Vec::new();
    let starts: Vec<Vec<f64>> = if dim == 0 {
        vec![Vec::new()]
    } else {
        halton(spec.solver.starts, dim)
            .into_iter()
            .map(|u| u.into_iter().map(|v| 2.0 * v - 1.0).collect())
            .collect()
    };
    let f = |x: &[f64]| res.eval(x);
    for x0 in starts {
        let out = gauss_newton(&f, x0, opts);
        if !out.converged {
            continue;
        }
        let r0 = res.eval(&out.x);
        let jac = solver::jacobian(&f, &out.x, &r0, opts.fd_step);
        let rank = numerical_rank(&jac, JACOBIAN_RANK_TOL);
        let family = if rank < dim {
            Some(choose_coordinates(&jac, res.coordinate_rows())).filter(|c| !c.is_empty())
        } else {
            None
        };
        roots.push(NewtonRoot {
            x: out.x,
            residual: out.residual,
            family,
        });
    }
    let fm = res.mask.clone();
    let mut results: Vec<ConstructionResult> = Vec::new();
    let mut seen: Vec<Vec<f64>> = Vec::new();
    let mut fresh = |x: &[f64]| {
        let a = fm.eval(&x[..np]);
        let dup = seen
            .iter()
            .any(|s| s.iter().zip(&a).all(|(u, v)| (u - v).abs() <= DUPLICATE_TOL));
        if !dup {
            seen.push(a);
        }
        !dup
    };
    for root in roots {
        let candidate = match &root.family {
            None => {
                if !fresh(&root.x) {
                    continue;
                }
                b.finish(Route::Newton, &root.x[..np], root.residual, None, Vec::new())?
            }
            Some(rows) => {
                let fam = Family::Implicit {
                    coordinates: rows.iter().map(|c| c.label.clone()).collect(),
                };
                // Anchor each family at its zero-coordinate member so that
                // roots on the same family collapse to one candidate.
                let zeros = vec![0.0; rows.len()];
                let (anchor_u, anchor) = match family_member(res, rows, &zeros, &root.x, opts) {
                    Some(x) => (zeros, x),
                    None => (coordinate_values(rows, &root.x), root.x.clone()),
                };
                if !fresh(&anchor) {
                    continue;
                }
                let (values, x) = if spec.optimize && rows.len() <= MAX_OPTIMIZED_PARAMETERS {
                    let mut warm = anchor.clone();
                    let best = solver::maximize(
                        |u| match family_member(res, rows, u, &warm, opts) {
                            Some(x) => {
                                let v = float_mask(&fm, &x[..np], spec.dilation).map_or(f64::NEG_INFINITY, |a| sm2_value(&a));
                                warm = x;
                                v
                            }
                            None => f64::NEG_INFINITY,
                        },
                        &anchor_u,
                        &spec.solver.optimize,
                    );
                    let u: Vec<f64> = best.x.iter().map(|&v| tidy(v).to_f64()).collect();
                    match family_member(res, rows, &u, &anchor, opts) {
                        Some(x) => (u, x),
                        None => (anchor_u, anchor),
                    }
                } else {
                    (anchor_u, anchor)
                };
                let params = values.iter().map(|&v| tidy(v)).collect();
                let residual = res.eval(&x).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                b.finish(Route::Newton, &x[..np], residual, Some(fam), params)?
            }
        };
        if let Some(c) = candidate {
            if !results.iter().any(|r| same_mask(&r.mask, &c.mask)) {
                results.push(c);
            }
        }
    }
    if results.is_empty() {
        return Err(Error::Infeasible(format!(
            "no solution of the interpolation identities (m_s = {}, n_s = {}) within {} Newton starts",
            res.m_s, res.n_s, spec.solver.starts
        )));
    }
    Ok(results)
}

fn same_mask(a: &Mask, b: &Mask) -> bool {
    let (Some((l1, h1)), Some((l2, h2))) = (a.support(), b.support()) else {
        return a.support() == b.support();
    };
    let (lo, hi) = (l1.min(l2), h1.max(h2));
    (lo..=hi).all(|k| (a.at(k).to_f64() - b.at(k).to_f64()).abs() <= DUPLICATE_TOL)
}

fn selection_key(a: &ConstructionResult, b: &ConstructionResult) -> std::cmp::Ordering {
    b.accepted
        .cmp(&a.accepted)
        .then(b.sm2.value.total_cmp(&a.sm2.value))
        .then(a.residual.total_cmp(&b.residual))
        .then_with(|| {
            let (lo, hi) = (a.mask.seq().start().min(b.mask.seq().start()), a.mask.seq().start().max(b.mask.seq().start()) + a.mask.seq().len().max(b.mask.seq().len()) as i64);
            (lo..=hi)
                .map(|k| a.mask.at(k).to_f64().total_cmp(&b.mask.at(k).to_f64()))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
}

/// Runs the full construction and returns the candidates in selection
/// order: accepted first, then larger sm2, smaller residual, and
/// lexicographically smaller coefficients.
pub fn construct(spec: &ConstructionSpec) -> Result<Construction> {
    let s1 = parameterize(spec)?;
    let model = solve_moment_constraints(&s1, spec)?;
    let adm = interp::admissible_params(&spec.s_a, spec.dilation)?;
    let m = spec.dilation as i64;
    pow_checked(spec.dilation, adm.m_s + adm.n_s)?;
    let samples = if adm.m_s > 0 {
        Some(sample_model(spec, &adm)?)
    } else {
        None
    };
    let b = Builder { spec, model: &model };
    let mut candidates = match linear_identities(&model, samples.as_ref(), &adm, m)? {
        Some((route, eqs)) => solve_linear(&b, route, &eqs)?,
        None => {
            let res = IdentityResiduals {
                mask: model.to_float(),
                samples: samples.as_ref().map(AffineModel::to_float),
                m,
                gamma: bigint_to_i64(&adm.gamma)?,
                m_s: adm.m_s,
                n_s: adm.n_s,
            };
            solve_newton(&b, &res)?
        }
    };
    candidates.sort_by(selection_key);
    Ok(Construction {
        spec: spec.clone(),
        admissibility: adm,
        model,
        candidates,
    })
}

/// Exact member of an affine family at rational parameters.
pub fn affine_member(family: &Family, theta: &[BigRational], dilation: u64) -> Result<Mask> {
    match family {
        Family::Affine {
            start,
            constant,
            directions,
            ..
        } => {
            if theta.len() != directions.len() {
                return Err(Error::InvalidArgument(format!(
                    "expected {} parameters, got {}",
                    directions.len(),
                    theta.len()
                )));
            }
            let mut out = constant.clone();
            for (d, t) in directions.iter().zip(theta) {
                for (o, di) in out.iter_mut().zip(d) {
                    *o += di * t;
                }
            }
            Mask::from_rationals(*start, out, dilation)
        }
        Family::Implicit { .. } => Err(Error::InvalidArgument("implicit families have no closed form".into())),
    }
}

/// Max |a(k)| over an exact residual sequence, for reporting.
pub fn max_abs_rational(v: &[BigRational]) -> BigRational {
    v.iter().map(|x| x.abs()).max().unwrap_or_else(BigRational::zero)
}
