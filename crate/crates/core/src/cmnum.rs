//! High-precision evaluation of j at CM points and Hilbert class polynomials.
//!
//! `j(tau)` is evaluated as `E4(q)^3 / Delta(q)` with
//! `Delta = (q^{1/24} * P(q))^24`, where `P` is the sparse pentagonal eta
//! product and `q^{1/24} = e^{2 pi i tau / 24}` comes straight from `tau`,
//! avoiding any branch ambiguity. Every reduced form has
//! `Im tau >= sqrt(3)/2`, so `|q| <= e^{-pi sqrt(3)}` and all series tails
//! are controlled by a geometric bound.
//!
//! The class polynomial is assembled as a product of real linear factors
//! (self-conjugate forms) and real quadratic factors (conjugate pairs), then
//! rounded to integers under a margin check; failure retries at doubled
//! precision, at most three times.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::fixed::{pi, Complex, Real};
use crate::qforms::{reduced_forms, Discriminant, QuadForm};
use crate::qseries::divisor_power_sieve;
use crate::{Error, Result};

/// Hard cap on q-expansion length in numeric evaluation; hitting it means the
/// requested precision is far beyond the desk scale this engine targets.
pub const MAX_SERIES_TERMS: usize = 150_000;

const LN_2: f64 = std::f64::consts::LN_2;
const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Working precision plus the acceptance threshold for integer rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrecisionContext {
    bits: u32,
    margin_log2: u32,
}

impl PrecisionContext {
    /// Requires `bits >= 64` and a margin of at most `2^-20`.
    pub fn new(bits: u32, margin_log2: u32) -> Result<Self> {
        if bits < 64 {
            return Err(Error::InvalidArgument(format!(
                "precision must be at least 64 bits, got {bits}"
            )));
        }
        if margin_log2 < 20 {
            return Err(Error::InvalidArgument(format!(
                "rounding margin must be at most 2^-20, got 2^-{margin_log2}"
            )));
        }
        Ok(PrecisionContext { bits, margin_log2 })
    }

    pub fn with_bits(bits: u32) -> Result<Self> {
        Self::new(bits, 20)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn margin_log2(&self) -> u32 {
        self.margin_log2
    }

    pub fn doubled(&self) -> Self {
        PrecisionContext { bits: self.bits * 2, margin_log2: self.margin_log2 }
    }

    pub(crate) fn raised_to(&self, bits: u32) -> Self {
        PrecisionContext { bits: self.bits.max(bits), margin_log2: self.margin_log2 }
    }
}

impl Default for PrecisionContext {
    fn default() -> Self {
        PrecisionContext { bits: 64, margin_log2: 20 }
    }
}

/// The CM point `tau = (-b + i sqrt(d')) / (2a)` of a reduced form, with
/// `Im tau >= sqrt(3)/2`.
#[derive(Debug, Clone)]
pub struct CMPoint {
    pub form: QuadForm,
    pub tau: Complex,
}

impl CMPoint {
    pub fn new(form: &QuadForm, scale: u32) -> Self {
        let d = -form.discriminant();
        assert!(d > 0, "form must be positive definite");
        let re = Real::from_ratio(-form.b, 2 * form.a, scale);
        let im = Real::sqrt_u64(d as u64, scale).div_small(2 * form.a);
        CMPoint { form: *form, tau: Complex::new(re, im) }
    }
}

/// Heuristic bit requirement for the coefficients of the class polynomial of
/// discriminant `-d`, plus guard: `ceil(pi sqrt(d)/ln 2 * sum 1/a) + 64 + 10h`.
pub fn required_bits(d: Discriminant) -> u32 {
    let forms = reduced_forms(d);
    let inv_a_sum: f64 = forms.iter().map(|q| 1.0 / q.a as f64).sum();
    let main = (std::f64::consts::PI * (d.get() as f64).sqrt() / LN_2) * inv_a_sum;
    main.ceil() as u32 + 64 + 10 * forms.len() as u32
}

/// Series length needed for the geometric tail (with the polynomial growth
/// of the Eisenstein coefficients folded in) to drop below the working
/// precision.
fn series_len(im_tau: f64, work_bits: u32) -> Result<usize> {
    let log2_q = -TWO_PI * im_tau / LN_2;
    debug_assert!(log2_q < 0.0);
    let base = work_bits as f64 + 40.0;
    let mut n = (base / -log2_q).ceil() as usize + 2;
    loop {
        let need = base + 8.0 + 3.0 * (n as f64).log2();
        let refined = (need / -log2_q).ceil() as usize + 2;
        if refined <= n {
            break;
        }
        n = refined;
    }
    if n > MAX_SERIES_TERMS {
        Err(Error::PrecisionInfeasible { terms: n, cap: MAX_SERIES_TERMS })
    } else {
        Ok(n)
    }
}

/// `j(tau)` for an arbitrary point with `Im tau > 0`, with absolute error
/// within a few guard bits of `2^-target_bits`.
pub fn eval_j_at(tau: &Complex, target_bits: u32) -> Result<Complex> {
    let im_tau = tau.im.to_f64();
    assert!(im_tau > 0.0, "tau must lie in the upper half plane");
    // |j| is close to |q^-1| = e^{2 pi Im tau}
    let mag = (TWO_PI * im_tau / LN_2).ceil() as u32 + 8;
    let work = target_bits + mag + 64;
    let n = series_len(im_tau, work)?;

    let tau_w = tau.to_scale(work);
    let p = pi(work);

    // z = 2 pi i tau / 24; u^-1 = e^{-z} (the growing direction, so exp is
    // taken of the negated argument and inverted, preserving relative error)
    let minus_z = Complex::new(p.mul(&tau_w.im).div_small(12), p.mul(&tau_w.re).div_small(-12));
    let u_inv = minus_z.exp();
    let u = u_inv.recip();
    let q = u.powu(24);

    // pentagonal product P = prod (1 - q^m), walked over its sparse exponents
    let mut pent = Complex::from_i64(1, work);
    let mut cur = Complex::from_i64(1, work); // q^cur_exp
    let mut cur_exp = 0u64;
    let mut k = 1u64;
    'outer: loop {
        for exp in [k * (3 * k - 1) / 2, k * (3 * k + 1) / 2] {
            if exp > n as u64 {
                break 'outer;
            }
            cur = cur.mul(&q.powu((exp - cur_exp) as u32));
            cur_exp = exp;
            if k % 2 == 1 {
                pent = pent.sub(&cur);
            } else {
                pent = pent.add(&cur);
            }
        }
        k += 1;
    }

    // E4 = 1 + 240 sum sigma_3(m) q^m, dense
    let sigma3 = divisor_power_sieve(n, 3);
    let mut e4 = Complex::from_i64(1, work);
    let mut qm = Complex::from_i64(1, work);
    for &s3 in sigma3.iter().skip(1) {
        qm = qm.mul(&q);
        let c = 240u128 * s3;
        assert!(c <= i64::MAX as u128, "Eisenstein coefficient overflow");
        e4 = e4.add(&qm.mul_small(c as i64));
    }

    // 1/Delta = (u^-1 * P^-1)^24
    let delta_inv_root = u_inv.mul(&pent.recip());
    let j = e4.powu(3).mul(&delta_inv_root.powu(24));
    Ok(j.to_scale(target_bits))
}

/// `j` at the CM point of a reduced primitive form, with absolute error
/// within a few guard bits of `2^-ctx.bits()`.
pub fn eval_j(form: &QuadForm, ctx: &PrecisionContext) -> Result<Complex> {
    let d = -form.discriminant();
    assert!(d > 0 && form.is_reduced() && form.is_primitive());
    let im_tau = (d as f64).sqrt() / (2.0 * form.a as f64);
    let mag = (TWO_PI * im_tau / LN_2).ceil() as u32 + 8;
    let work = ctx.bits + mag + 64;
    let point = CMPoint::new(form, work);
    eval_j_at(&point.tau, ctx.bits)
}

/// Nearest integer if `|x - nearest| < 2^-margin_log2`, else a rounding error.
pub fn round_checked(x: &Real, margin_log2: u32) -> Result<BigInt> {
    let (n, dist) = x.round_nearest();
    match dist {
        None => Ok(n),
        Some(d) if d <= -(margin_log2 as i64) => Ok(n),
        Some(d) => Err(Error::RoundingFailure { dist_log2: d, margin_log2 }),
    }
}

/// A monic polynomial with exact integer coefficients (ascending).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntPolynomial {
    coeffs: Vec<BigInt>,
}

impl IntPolynomial {
    pub fn new(coeffs: Vec<BigInt>) -> Self {
        assert!(coeffs.last().map(|c| c.is_one()) == Some(true), "polynomial must be monic");
        IntPolynomial { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> &BigInt {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }
}

impl std::fmt::Display for IntPolynomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() && self.degree() > 0 {
                continue;
            }
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
                first = false;
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if k == 0 || !mag.is_one() {
                write!(f, "{mag}")?;
            }
            match k {
                0 => {}
                1 => write!(f, "X")?,
                _ => write!(f, "X^{k}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Evaluation summary of a class-polynomial computation.
#[derive(Debug, Clone, Copy)]
pub struct HilbertStats {
    /// Precision at which the accepted computation ran.
    pub bits_used: u32,
    /// Number of doubled-precision retries that were needed (0 normally).
    pub retries: u32,
    /// log2 of the largest pre-rounding distance from a coefficient to its
    /// integer; `None` when every coefficient landed exactly.
    pub max_dist_log2: Option<i64>,
}

/// Representative of a conjugation orbit of reduced forms: a form with
/// `b > 0` that is not self-conjugate stands for the pair `(a, ±b, c)`.
pub(crate) struct OrbitRep {
    pub form: QuadForm,
    pub paired: bool,
}

/// Conjugation-orbit representatives (the `b >= 0` side) of a reduced system.
pub(crate) fn orbit_reps(forms: &[QuadForm]) -> Vec<OrbitRep> {
    forms
        .iter()
        .filter(|q| q.b >= 0)
        .map(|q| OrbitRep { form: *q, paired: !q.is_self_conjugate() })
        .collect()
}

/// Multiplies the monic real polynomial `poly` (ascending, exact leading 1)
/// in place by a monic factor whose lower coefficients are `lower`.
fn mul_monic_factor(poly: &mut Vec<Real>, lower: &[Real], scale: u32) {
    let fdeg = lower.len();
    let mut out = vec![Real::zero(scale); poly.len() + fdeg];
    for (i, c) in poly.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        out[i + fdeg] = out[i + fdeg].add(c);
        for (k, l) in lower.iter().enumerate() {
            out[i + k] = out[i + k].add(&c.mul(l));
        }
    }
    *poly = out;
}

/// Hilbert class polynomial `H_d(X) = prod_Q (X - j(tau_Q))`, with every
/// coefficient rounded to an integer under the margin check; a failed
/// rounding retries at doubled precision, at most three times.
pub fn hilbert_class_poly(d: Discriminant, ctx: &PrecisionContext) -> Result<IntPolynomial> {
    hilbert_class_poly_detailed(d, ctx).map(|(p, _)| p)
}

/// Same as [`hilbert_class_poly`] but reporting precision statistics.
pub fn hilbert_class_poly_detailed(
    d: Discriminant,
    ctx: &PrecisionContext,
) -> Result<(IntPolynomial, HilbertStats)> {
    let forms = reduced_forms(d);
    let reps = orbit_reps(&forms);
    let mut bits = ctx.bits.max(required_bits(d));
    let mut last_err = None;
    for retries in 0..=3u32 {
        let eval_ctx = PrecisionContext { bits, margin_log2: ctx.margin_log2 };
        match hilbert_attempt(&reps, &eval_ctx) {
            Ok((poly, max_dist)) => {
                return Ok((
                    poly,
                    HilbertStats { bits_used: bits, retries, max_dist_log2: max_dist },
                ));
            }
            Err(e @ Error::RoundingFailure { .. }) => {
                last_err = Some(e);
                bits *= 2;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap())
}

/// Builds the class polynomial from already-evaluated orbit values; exposed
/// within the crate so the trace engine can reuse its cached j values.
pub(crate) fn hilbert_from_values(
    values: &[(bool, Complex)], // (paired, j)
    scale: u32,
    margin_log2: u32,
) -> Result<(IntPolynomial, Option<i64>)> {
    let mut acc = vec![Real::from_i64(1, scale)];
    for (paired, j) in values {
        if *paired {
            let lower = [j.norm_sqr(), j.re.mul_small(-2)];
            mul_monic_factor(&mut acc, &lower, scale);
        } else {
            let lower = [j.re.neg()];
            mul_monic_factor(&mut acc, &lower, scale);
        }
    }

    let mut coeffs = Vec::with_capacity(acc.len());
    let mut max_dist: Option<i64> = None;
    for c in &acc[..acc.len() - 1] {
        let (n, dist) = c.round_nearest();
        if let Some(d) = dist {
            if d > -(margin_log2 as i64) {
                return Err(Error::RoundingFailure { dist_log2: d, margin_log2 });
            }
            max_dist = Some(max_dist.map_or(d, |m: i64| m.max(d)));
        }
        coeffs.push(n);
    }
    // the product of monic factors keeps an exact unit leading coefficient
    let (lead, lead_dist) = acc.last().unwrap().round_nearest();
    if !lead.is_one() || lead_dist.is_some() {
        return Err(Error::Internal("class polynomial lost its exact monic lead".into()));
    }
    coeffs.push(lead);
    Ok((IntPolynomial::new(coeffs), max_dist))
}

fn hilbert_attempt(
    reps: &[OrbitRep],
    ctx: &PrecisionContext,
) -> Result<(IntPolynomial, Option<i64>)> {
    let mut values = Vec::with_capacity(reps.len());
    for rep in reps {
        values.push((rep.paired, eval_j(&rep.form, ctx)?));
    }
    hilbert_from_values(&values, ctx.bits, ctx.margin_log2)
}
