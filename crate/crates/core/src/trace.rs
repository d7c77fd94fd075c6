//! Exact traces of singular moduli and the p-adic congruence verifier.
//!
//! `t_f(d)` sums `2 f(j(E)) / #Aut(E)` over CM curves whose endomorphism ring
//! contains the order of discriminant `-d`. Two independent strategies
//! compute each class-group sum of `f(j)`:
//!
//! - numeric: evaluate `f` at every CM point in high precision, pair
//!   conjugate classes, and round the (integral) sum under a margin check;
//! - exact: read the same sum off the Hilbert class polynomial through
//!   Newton's power sums.
//!
//! The default strategy runs both and refuses to return on disagreement.
//! Per-discriminant data (CM values and the class polynomial) is cached, so
//! grid verification shares work across cells.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;

use crate::cmnum::{
    eval_j, hilbert_from_values, orbit_reps, required_bits, IntPolynomial, PrecisionContext,
};
use crate::fixed::{Complex, Real};
use crate::qforms::{
    alpha, is_prime, is_split, reduced_forms, suborder_decomposition, Discriminant, SubOrderPart,
};
use crate::qseries::{faber_poly, JPolynomial};
use crate::{Error, Result};

/// Which trace pipeline(s) to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    Numeric,
    Exact,
    #[default]
    Both,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Numeric => "numeric",
            Strategy::Exact => "exact",
            Strategy::Both => "both",
        })
    }
}

/// Contribution of one sub-order to a trace.
#[derive(Debug, Clone)]
pub struct TracePart {
    pub part: SubOrderPart,
    pub class_number: usize,
    pub value: BigRational,
}

/// An exact trace value with its per-sub-order breakdown.
#[derive(Debug, Clone)]
pub struct TraceResult {
    pub d: Discriminant,
    pub f: JPolynomial,
    pub strategy: Strategy,
    pub value: BigRational,
    pub parts: Vec<TracePart>,
    /// Largest working precision used by any sub-order.
    pub bits: u32,
}

/// p-adic valuation; `None` encodes +infinity (the valuation of 0).
pub fn padic_valuation(x: &BigInt, p: u64) -> Option<u64> {
    if x.is_zero() {
        return None;
    }
    let p = BigInt::from(p);
    let mut v = 0u64;
    let mut x = x.clone();
    loop {
        let (q, r) = num_integer::Integer::div_rem(&x, &p);
        if !r.is_zero() {
            return Some(v);
        }
        v += 1;
        x = q;
    }
}

/// `p_0 = deg H` and the power sums `p_1 ..= p_kmax` of the roots of a monic
/// integer polynomial, by Newton's identities (exact).
pub fn power_sums_from_poly(h: &IntPolynomial, kmax: usize) -> Vec<BigInt> {
    let n = h.degree();
    // e[i] = (-1)^i * coefficient of X^{n-i}
    let e: Vec<BigInt> = (0..=n)
        .map(|i| {
            let c = h.coeff(n - i).clone();
            if i % 2 == 0 {
                c
            } else {
                -c
            }
        })
        .collect();
    let mut p = Vec::with_capacity(kmax + 1);
    p.push(BigInt::from(n));
    for k in 1..=kmax {
        let mut acc = BigInt::zero();
        for i in 1..k.min(n + 1) {
            let term = &e[i] * &p[k - i];
            if i % 2 == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        if k <= n {
            let term = &e[k] * BigInt::from(k);
            if k % 2 == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        p.push(acc);
    }
    p
}

/// Cached per-discriminant data: CM values for one representative per
/// conjugation orbit, and the class polynomial they round to.
struct ClassData {
    class_number: usize,
    bits: u32,
    /// `(paired, j)` per orbit representative; a paired entry stands for the
    /// two conjugate classes `(a, ±b, c)`.
    values: Vec<(bool, Complex)>,
    hilbert: IntPolynomial,
    hilbert_retries: u32,
    hilbert_max_dist_log2: Option<i64>,
}

/// Trace computations with shared per-discriminant caching.
///
/// `poly_degree` is the largest degree of `f` this engine will be asked to
/// evaluate; it enters the precision heuristic, so fixing it up front keeps
/// reported precisions independent of the order in which cells run.
pub struct TraceEngine {
    ctx: PrecisionContext,
    poly_degree: u32,
    classes: Mutex<HashMap<u64, Arc<ClassData>>>,
}

const LN_2: f64 = std::f64::consts::LN_2;

impl TraceEngine {
    pub fn new(ctx: PrecisionContext, poly_degree: u32) -> Self {
        TraceEngine { ctx, poly_degree, classes: Mutex::new(HashMap::new()) }
    }

    pub fn context(&self) -> &PrecisionContext {
        &self.ctx
    }

    /// Precision for one class group: enough for the class polynomial
    /// coefficients plus the magnitude of `j^deg` at the principal form.
    fn class_bits(&self, dprime: Discriminant) -> u32 {
        let mag = (std::f64::consts::PI * (dprime.get() as f64).sqrt() / LN_2).ceil() as u32 + 2;
        self.ctx.bits().max(required_bits(dprime) + self.poly_degree * mag)
    }

    /// Cached entries are always computed from `class_bits(dprime)`, which
    /// depends only on the engine configuration, so cache contents (and the
    /// precisions reported in results) are independent of evaluation order.
    fn class_data(&self, dprime: Discriminant) -> Result<Arc<ClassData>> {
        if let Some(data) = self.classes.lock().unwrap().get(&dprime.get()) {
            return Ok(Arc::clone(data));
        }
        let data = Arc::new(self.compute_class_data(dprime, self.class_bits(dprime))?);
        let mut cache = self.classes.lock().unwrap();
        let entry = cache.entry(dprime.get()).or_insert_with(|| Arc::clone(&data));
        Ok(Arc::clone(entry))
    }

    fn compute_class_data(&self, dprime: Discriminant, bits: u32) -> Result<ClassData> {
        let forms = reduced_forms(dprime);
        let reps = orbit_reps(&forms);
        let mut bits = bits;
        let mut last_err = None;
        for retries in 0..=3u32 {
            let eval_ctx = self.ctx.raised_to(bits);
            let mut values = Vec::with_capacity(reps.len());
            for rep in &reps {
                values.push((rep.paired, eval_j(&rep.form, &eval_ctx)?));
            }
            match hilbert_from_values(&values, eval_ctx.bits(), self.ctx.margin_log2()) {
                Ok((hilbert, max_dist)) => {
                    return Ok(ClassData {
                        class_number: forms.len(),
                        bits: eval_ctx.bits(),
                        values,
                        hilbert,
                        hilbert_retries: retries,
                        hilbert_max_dist_log2: max_dist,
                    });
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

    /// `sum_Q f(j_Q)` over all classes of discriminant `-dprime`, via
    /// high-precision evaluation (an exact integer after checked rounding).
    /// A rounding failure retries on a private doubled-precision copy so the
    /// shared cache stays at its canonical precision.
    fn class_sum_numeric(&self, dprime: Discriminant, f: &JPolynomial) -> Result<(BigInt, u32)> {
        let mut data = self.class_data(dprime)?;
        let mut last_err = None;
        for _ in 0..=3u32 {
            match numeric_sum(&data, f, self.ctx.margin_log2()) {
                Ok(v) => return Ok((v, data.bits)),
                Err(e @ Error::RoundingFailure { .. }) => {
                    last_err = Some(e);
                    data = Arc::new(self.compute_class_data(dprime, data.bits * 2)?);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last_err.unwrap())
    }

    /// The same class-group sum read from the Hilbert class polynomial
    /// through Newton's identities.
    fn class_sum_exact(&self, dprime: Discriminant, f: &JPolynomial) -> Result<(BigInt, u32)> {
        let data = self.class_data(dprime)?;
        let sums = power_sums_from_poly(&data.hilbert, f.degree());
        let mut acc = BigInt::zero();
        for (k, p) in sums.iter().enumerate() {
            let c = f.coeff(k);
            if !c.is_zero() {
                acc += c * p;
            }
        }
        Ok((acc, data.bits))
    }

    /// The trace `t_f(d)` with its sub-order breakdown.
    pub fn trace(
        &self,
        f: &JPolynomial,
        d: Discriminant,
        strategy: Strategy,
    ) -> Result<TraceResult> {
        assert!(
            f.degree() as u32 <= self.poly_degree,
            "engine was sized for degree {} but got degree {}",
            self.poly_degree,
            f.degree()
        );
        let mut parts = Vec::new();
        let mut total = BigRational::zero();
        let mut bits_used = 0u32;
        for sp in suborder_decomposition(d) {
            let (sum, bits) = match strategy {
                Strategy::Numeric => self.class_sum_numeric(sp.dprime, f)?,
                Strategy::Exact => self.class_sum_exact(sp.dprime, f)?,
                Strategy::Both => {
                    let (numeric, nbits) = self.class_sum_numeric(sp.dprime, f)?;
                    let (exact, _) = self.class_sum_exact(sp.dprime, f)?;
                    if numeric != exact {
                        return Err(Error::StrategyDisagreement {
                            d: sp.dprime.get(),
                            numeric: numeric.to_string(),
                            exact: exact.to_string(),
                        });
                    }
                    (numeric, nbits)
                }
            };
            bits_used = bits_used.max(bits);
            let value = BigRational::new(BigInt::from(2) * &sum, BigInt::from(sp.weight));
            total += &value;
            let class_number = self.classes.lock().unwrap()[&sp.dprime.get()].class_number;
            parts.push(TracePart { part: sp, class_number, value });
        }

        let result =
            TraceResult { d, f: f.clone(), strategy, value: total, parts, bits: bits_used };
        self.check_trace_invariants(&result)?;
        Ok(result)
    }

    /// Denominator and integrality laws that hold for every valid trace; a
    /// violation means a pipeline bug, not a mathematical surprise.
    fn check_trace_invariants(&self, t: &TraceResult) -> Result<()> {
        let sum: BigRational = t.parts.iter().map(|p| p.value.clone()).sum();
        if sum != t.value {
            return Err(Error::Internal("trace parts do not add up to the total".into()));
        }
        if !(&t.value * BigInt::from(6)).is_integer() {
            return Err(Error::Internal(format!(
                "trace denominator of {} does not divide 6",
                t.value
            )));
        }
        let a = alpha(t.d);
        if !(t.value.clone() * BigInt::from(a)).is_integer() {
            return Err(Error::Internal(format!(
                "alpha(d) * t = {} * {} is not an integer",
                a, t.value
            )));
        }
        Ok(())
    }

    /// Status of one congruence check, including per-sub-order statistics,
    /// the working precision and the elapsed time.
    pub fn verify(&self, d: Discriminant, p: u64, n: u32, m: u32) -> Result<CongruenceReport> {
        self.verify_with_options(d, p, n, m, Strategy::Both, false)
    }

    /// `diagnose` additionally computes the trace for rows whose hypotheses
    /// fail (inert primes, p | d) so the valuation can be inspected; their
    /// status stays `HypothesisViolation` and `holds` stays unset.
    pub fn verify_with_options(
        &self,
        d: Discriminant,
        p: u64,
        n: u32,
        m: u32,
        strategy: Strategy,
        diagnose: bool,
    ) -> Result<CongruenceReport> {
        let start = Instant::now();
        if !is_prime(p) {
            return Err(Error::InvalidArgument(format!("{p} is not prime")));
        }
        if n < 1 {
            return Err(Error::InvalidArgument("need n >= 1".into()));
        }
        if m < 1 {
            return Err(Error::InvalidArgument("need m >= 1".into()));
        }
        let status = if d.get().is_multiple_of(p) {
            CongruenceStatus::HypothesisViolation(Hypothesis::PrimeDividesD)
        } else if !is_split(p, d)? {
            CongruenceStatus::HypothesisViolation(Hypothesis::NotSplit)
        } else {
            CongruenceStatus::Verified
        };

        let lifted =
            p.checked_pow(2 * n).and_then(|q| q.checked_mul(d.get())).ok_or_else(|| {
                Error::InvalidArgument(format!("p^(2n) * d overflows for p={p}, n={n}"))
            })?;
        // p^2n * d keeps the residue class of d; only the range check can fail
        let lifted = Discriminant::new(lifted).map_err(|_| {
            Error::InvalidArgument(format!("p^(2n) * d = {lifted} is out of supported range"))
        })?;

        let mut report = CongruenceReport {
            d: d.get(),
            p,
            n,
            m,
            alpha: alpha(d),
            lifted: lifted.get(),
            status,
            strategy,
            scaled_trace: None,
            valuation: None,
            holds: None,
            class_numbers: Vec::new(),
            bits: 0,
            millis: 0,
        };

        if report.status == CongruenceStatus::Verified || diagnose {
            let f = faber_poly(m)?;
            let t = self.trace(&f, lifted, strategy)?;
            let scaled = t.value * BigInt::from(report.alpha);
            if !scaled.is_integer() {
                return Err(Error::Internal(format!(
                    "alpha(d) t_f(p^2n d) = {scaled} is not an integer"
                )));
            }
            let scaled = scaled.to_integer();
            let valuation = padic_valuation(&scaled, p);
            report.class_numbers =
                t.parts.iter().map(|pt| (pt.part.dprime.get(), pt.class_number)).collect();
            report.bits = t.bits;
            report.scaled_trace = Some(scaled);
            report.valuation = Some(valuation);
            if report.status == CongruenceStatus::Verified {
                report.holds = Some(valuation.is_none_or(|v| v >= n as u64));
            }
        }
        report.millis = start.elapsed().as_millis() as u64;
        Ok(report)
    }

    /// Runs every tuple of the grid (deterministic order: d, then p, n, m).
    /// Tuples whose lifted discriminant exceeds `max_lifted` are skipped;
    /// tuples with failing hypotheses appear as violation rows.
    pub fn verify_grid(&self, grid: &GridSpec) -> Result<Vec<CongruenceReport>> {
        let tuples = grid.tuples();
        tuples
            .par_iter()
            .map(|&(d, p, n, m)| self.verify_with_options(d, p, n, m, grid.strategy, grid.diagnose))
            .collect()
    }
}

/// Which hypothesis of the congruence statement a tuple violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    PrimeDividesD,
    NotSplit,
}

/// Outcome classification of a congruence check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CongruenceStatus {
    /// Hypotheses hold; `holds` says whether the divisibility came out.
    Verified,
    /// A hypothesis fails; nothing is asserted about the congruence.
    HypothesisViolation(Hypothesis),
}

impl CongruenceStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CongruenceStatus::Verified => "ok",
            CongruenceStatus::HypothesisViolation(Hypothesis::PrimeDividesD) => {
                "hypothesis-violation:p-divides-d"
            }
            CongruenceStatus::HypothesisViolation(Hypothesis::NotSplit) => {
                "hypothesis-violation:not-split"
            }
        }
    }
}

/// One row of congruence verification: the data of
/// `alpha(d) * t_{F_m}(p^{2n} d) mod p^n`.
#[derive(Debug, Clone)]
pub struct CongruenceReport {
    pub d: u64,
    pub p: u64,
    pub n: u32,
    pub m: u32,
    pub alpha: u32,
    /// `p^{2n} * d`.
    pub lifted: u64,
    pub status: CongruenceStatus,
    /// Trace strategy the check ran with.
    pub strategy: Strategy,
    /// The integer `alpha(d) * t_{F_m}(p^{2n} d)`.
    pub scaled_trace: Option<BigInt>,
    /// `v_p` of the scaled trace; inner `None` is +infinity.
    pub valuation: Option<Option<u64>>,
    /// Whether the congruence holds; only set for `Verified` rows.
    pub holds: Option<bool>,
    /// Class number per sub-order of the lifted discriminant.
    pub class_numbers: Vec<(u64, usize)>,
    pub bits: u32,
    pub millis: u64,
}

/// Batch description for [`verify_grid`]: all `d <= dmax` with
/// `d === 0, 3 (mod 4)`, the given primes, `n <= nmax`, `m <= mmax`.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub dmax: u64,
    pub primes: Vec<u64>,
    pub nmax: u32,
    pub mmax: u32,
    /// Skip tuples with `p^{2n} d` above this bound (compute budget).
    pub max_lifted: Option<u64>,
    /// Trace strategy for every cell.
    pub strategy: Strategy,
    /// Compute diagnostics for hypothesis-violation rows too.
    pub diagnose: bool,
}

impl GridSpec {
    fn tuples(&self) -> Vec<(Discriminant, u64, u32, u32)> {
        let mut primes = self.primes.clone();
        primes.sort_unstable();
        primes.dedup();
        let mut tuples = Vec::new();
        for d in 3..=self.dmax {
            let Ok(d) = Discriminant::new(d) else {
                continue;
            };
            for &p in &primes {
                for n in 1..=self.nmax {
                    let lifted = p.checked_pow(2 * n).and_then(|q| q.checked_mul(d.get()));
                    let Some(lifted) = lifted else { continue };
                    if self.max_lifted.is_some_and(|cap| lifted > cap) {
                        continue;
                    }
                    for m in 1..=self.mmax {
                        tuples.push((d, p, n, m));
                    }
                }
            }
        }
        tuples
    }
}

/// `t_f(d)` by the numeric strategy alone.
pub fn trace_numeric(
    f: &JPolynomial,
    d: Discriminant,
    ctx: &PrecisionContext,
) -> Result<BigRational> {
    Ok(TraceEngine::new(*ctx, f.degree() as u32).trace(f, d, Strategy::Numeric)?.value)
}

/// `t_f(d)` by the Newton-identity strategy alone.
pub fn trace_exact(
    f: &JPolynomial,
    d: Discriminant,
    ctx: &PrecisionContext,
) -> Result<BigRational> {
    Ok(TraceEngine::new(*ctx, f.degree() as u32).trace(f, d, Strategy::Exact)?.value)
}

/// `t_f(d)` with the requested strategy and full breakdown.
pub fn trace(
    f: &JPolynomial,
    d: Discriminant,
    strategy: Strategy,
    ctx: &PrecisionContext,
) -> Result<TraceResult> {
    TraceEngine::new(*ctx, f.degree() as u32).trace(f, d, strategy)
}

/// Checks `alpha(d) * t_{F_m}(p^{2n} d) === 0 (mod p^n)` for a single tuple.
pub fn verify_congruence(
    d: Discriminant,
    p: u64,
    n: u32,
    m: u32,
    ctx: &PrecisionContext,
) -> Result<CongruenceReport> {
    TraceEngine::new(*ctx, m).verify(d, p, n, m)
}

/// Runs [`TraceEngine::verify_grid`] on a fresh engine.
pub fn verify_grid(grid: &GridSpec, ctx: &PrecisionContext) -> Result<Vec<CongruenceReport>> {
    TraceEngine::new(*ctx, grid.mmax).verify_grid(grid)
}

/// Evaluates `f` at each cached CM value and rounds the class-group sum.
fn numeric_sum(data: &ClassData, f: &JPolynomial, margin_log2: u32) -> Result<BigInt> {
    let scale = data.bits;
    let mut total = Real::zero(scale);
    for (paired, j) in &data.values {
        let fj = eval_poly_complex(f, j, scale);
        let mult = if *paired { 2 } else { 1 };
        total = total.add(&fj.re.mul_small(mult));
    }
    crate::cmnum::round_checked(&total, margin_log2)
}

fn eval_poly_complex(f: &JPolynomial, z: &Complex, scale: u32) -> Complex {
    let deg = f.degree();
    let mut r = Complex::from_real(Real::from_bigint(&f.coeff(deg), scale));
    for k in (0..deg).rev() {
        r = r.mul(z);
        let c = f.coeff(k);
        if !c.is_zero() {
            r = r.add(&Complex::from_real(Real::from_bigint(&c, scale)));
        }
    }
    r
}

impl TraceEngine {
    /// Class polynomial for `dprime` as cached by this engine, with its
    /// rounding statistics.
    pub fn hilbert(
        &self,
        dprime: Discriminant,
    ) -> Result<(IntPolynomial, crate::cmnum::HilbertStats)> {
        let data = self.class_data(dprime)?;
        Ok((
            data.hilbert.clone(),
            crate::cmnum::HilbertStats {
                bits_used: data.bits,
                retries: data.hilbert_retries,
                max_dist_log2: data.hilbert_max_dist_log2,
            },
        ))
    }
}

impl CongruenceReport {
    /// Valuation rendered with `inf` for the valuation of zero.
    pub fn valuation_str(&self) -> String {
        match self.valuation {
            None => String::new(),
            Some(None) => "inf".into(),
            Some(Some(v)) => v.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn disc(d: u64) -> Discriminant {
        Discriminant::new(d).unwrap()
    }

    fn ctx() -> PrecisionContext {
        PrecisionContext::default()
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn f1() -> JPolynomial {
        faber_poly(1).unwrap()
    }

    #[test]
    fn newton_power_sums() {
        let h = IntPolynomial::new(vec![BigInt::from(-1728), BigInt::one()]);
        assert_eq!(
            power_sums_from_poly(&h, 2),
            vec![BigInt::from(1), BigInt::from(1728), BigInt::from(2985984i64)]
        );

        let h = IntPolynomial::new(vec![BigInt::zero(), BigInt::one()]);
        assert_eq!(power_sums_from_poly(&h, 3), [1, 0, 0, 0].map(BigInt::from).to_vec());

        // roots 2 and 3
        let h = IntPolynomial::new(vec![BigInt::from(6), BigInt::from(-5), BigInt::one()]);
        assert_eq!(power_sums_from_poly(&h, 2), [2, 5, 13].map(BigInt::from).to_vec());
        assert_eq!(power_sums_from_poly(&h, 5)[5], BigInt::from(2i64.pow(5) + 3i64.pow(5)));
    }

    #[test]
    fn padic_valuations() {
        assert_eq!(padic_valuation(&BigInt::from(0), 7), None);
        assert_eq!(padic_valuation(&BigInt::from(1), 7), Some(0));
        assert_eq!(padic_valuation(&BigInt::from(-49), 7), Some(2));
        assert_eq!(padic_valuation(&BigInt::from(343 * 5), 7), Some(3));
    }

    #[test]
    fn small_traces_match_hand_computation() {
        // single class, j = 0, weight 6: 2(0 - 744)/6
        assert_eq!(trace_numeric(&f1(), disc(3), &ctx()).unwrap(), rat(-248, 1));
        // single class, j = 1728, weight 4: 2(1728 - 744)/4
        assert_eq!(trace_numeric(&f1(), disc(4), &ctx()).unwrap(), rat(492, 1));
        // single class, j = -3375, weight 2
        assert_eq!(trace_exact(&f1(), disc(7), &ctx()).unwrap(), rat(-4119, 1));
        // d = 12: (54000 - 744) + (-248)
        assert_eq!(trace_numeric(&f1(), disc(12), &ctx()).unwrap(), rat(53008, 1));
        // constant 1: single class of weight 6 contributes 2/6
        assert_eq!(trace_numeric(&JPolynomial::constant(1), disc(3), &ctx()).unwrap(), rat(1, 3));
        assert_eq!(trace_numeric(&JPolynomial::constant(1), disc(4), &ctx()).unwrap(), rat(1, 2));
        assert_eq!(trace_exact(&JPolynomial::constant(0), disc(20), &ctx()).unwrap(), rat(0, 1));
    }

    #[test]
    fn zagier_trace_table() {
        // t(d) for f = j - 744, from the classical table of traces
        for (d, t) in [
            (3u64, -248i64),
            (4, 492),
            (7, -4119),
            (8, 7256),
            (11, -33512),
            (12, 53008),
            (15, -192513),
            (16, 287244),
            (19, -885480),
            (20, 1262512),
        ] {
            let got = trace(&f1(), disc(d), Strategy::Both, &ctx()).unwrap();
            assert_eq!(got.value, rat(t, 1), "t(d) for d = {d}");
        }
    }

    #[test]
    fn trace_parts_breakdown() {
        let t = trace(&f1(), disc(147), Strategy::Both, &ctx()).unwrap();
        assert_eq!(t.parts.len(), 2);
        assert_eq!(t.parts[0].part.dprime.get(), 147);
        assert_eq!(t.parts[0].class_number, 2);
        assert_eq!(t.parts[1].part.dprime.get(), 3);
        assert_eq!(t.parts[1].value, rat(-248, 1));
        let sum: BigRational = t.parts.iter().map(|p| p.value.clone()).sum();
        assert_eq!(sum, t.value);
    }

    #[test]
    fn strategies_agree_on_a_spread() {
        for d in [23u64, 31, 48, 60, 75, 100, 147, 180] {
            for m in 1..=3u32 {
                let f = faber_poly(m).unwrap();
                let n = trace_numeric(&f, disc(d), &ctx()).unwrap();
                let e = trace_exact(&f, disc(d), &ctx()).unwrap();
                assert_eq!(n, e, "d = {d}, m = {m}");
            }
        }
    }

    #[test]
    fn trace_is_linear() {
        let d = disc(23);
        let f = faber_poly(2).unwrap();
        let g = faber_poly(1).unwrap();
        let tf = trace_exact(&f, d, &ctx()).unwrap();
        let tg = trace_exact(&g, d, &ctx()).unwrap();
        let tfg = trace_exact(&f.add(&g), d, &ctx()).unwrap();
        assert_eq!(tfg, tf + tg);

        let tcf = trace_exact(&f.scale(&BigInt::from(-7)), d, &ctx()).unwrap();
        let tf = trace_exact(&f, d, &ctx()).unwrap();
        assert_eq!(tcf, tf * BigRational::from(BigInt::from(-7)));
    }

    #[test]
    fn congruence_examples() {
        // d = 3, p = 7 splits: alpha(3) t(147) must vanish mod 7
        let r = verify_congruence(disc(3), 7, 1, 1, &ctx()).unwrap();
        assert_eq!(r.status, CongruenceStatus::Verified);
        assert_eq!(r.holds, Some(true));
        assert_eq!(r.alpha, 3);
        assert_eq!(r.lifted, 147);

        // d = 4, p = 5 === 1 mod 4 splits in Q(i)
        let r = verify_congruence(disc(4), 5, 1, 1, &ctx()).unwrap();
        assert_eq!(r.status, CongruenceStatus::Verified);
        assert_eq!(r.holds, Some(true));

        // 5 is inert in Q(sqrt(-3)): hypothesis violation, not a failure
        let r = verify_congruence(disc(3), 5, 1, 1, &ctx()).unwrap();
        assert_eq!(r.status, CongruenceStatus::HypothesisViolation(Hypothesis::NotSplit));
        assert_eq!(r.holds, None);
        assert!(r.scaled_trace.is_none());

        let r = verify_congruence(disc(3), 3, 1, 1, &ctx()).unwrap();
        assert_eq!(r.status, CongruenceStatus::HypothesisViolation(Hypothesis::PrimeDividesD));
    }

    #[test]
    fn congruence_holds_at_depth_three() {
        // d = 3, p = 7, n = 3: checks mod 7^3 on the order of discriminant
        // -3 * 7^6; the working precision climbs past 10k bits here
        let r = verify_congruence(disc(3), 7, 3, 1, &ctx()).unwrap();
        assert_eq!(r.holds, Some(true));
        assert!(matches!(r.valuation, Some(Some(v)) if v >= 3));
        assert_eq!(r.lifted, 352_947);
    }

    #[test]
    fn verify_rejects_degenerate_parameters() {
        assert!(matches!(
            verify_congruence(disc(3), 7, 0, 1, &ctx()),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            verify_congruence(disc(3), 7, 1, 0, &ctx()),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            verify_congruence(disc(3), 6, 1, 1, &ctx()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn deeper_congruence_implies_shallower() {
        let r2 = verify_congruence(disc(3), 7, 2, 1, &ctx()).unwrap();
        assert_eq!(r2.holds, Some(true));
        let v = r2.valuation.unwrap();
        assert!(v.is_none_or(|v| v >= 2));
        // valuation >= 2 trivially gives the n = 1 congruence on the same integer
        let r1 = verify_congruence(disc(3), 7, 1, 1, &ctx()).unwrap();
        assert_eq!(r1.holds, Some(true));
    }

    #[test]
    fn grid_example() {
        let grid = GridSpec {
            dmax: 10,
            primes: vec![7],
            nmax: 1,
            mmax: 1,
            max_lifted: None,
            strategy: Strategy::Both,
            diagnose: false,
        };
        let reports = verify_grid(&grid, &ctx()).unwrap();
        // d in {3, 4, 7, 8}
        assert_eq!(reports.len(), 4);
        assert_eq!(reports[0].status, CongruenceStatus::Verified); // -3 is a square mod 7
        assert_eq!(reports[0].holds, Some(true));
        assert_eq!(reports[1].status, CongruenceStatus::HypothesisViolation(Hypothesis::NotSplit));
        assert_eq!(
            reports[2].status,
            CongruenceStatus::HypothesisViolation(Hypothesis::PrimeDividesD)
        );
        assert_eq!(reports[3].status, CongruenceStatus::HypothesisViolation(Hypothesis::NotSplit));
    }

    #[test]
    fn empty_grid() {
        let grid = GridSpec {
            dmax: 0,
            primes: vec![5],
            nmax: 1,
            mmax: 1,
            max_lifted: None,
            strategy: Strategy::Both,
            diagnose: false,
        };
        assert!(verify_grid(&grid, &ctx()).unwrap().is_empty());
    }

    #[test]
    fn engine_reuses_class_data() {
        let engine = TraceEngine::new(ctx(), 1);
        let t1 = engine.trace(&f1(), disc(48), Strategy::Both).unwrap();
        let t2 = engine.trace(&f1(), disc(48), Strategy::Both).unwrap();
        assert_eq!(t1.value, t2.value);
        assert_eq!(t1.bits, t2.bits);
        assert_eq!(engine.classes.lock().unwrap().len(), 3); // 48, 12, 3
    }

    #[test]
    fn denominator_laws() {
        // no sub-order with dprime = 3 or 4: integer trace for constant f
        let t = trace(&JPolynomial::constant(1), disc(20), Strategy::Both, &ctx()).unwrap();
        assert!(t.value.is_integer());
        // d = 36: parts 36, 4 (conductor 3): denominator divides 2 but not 3
        let t = trace(&JPolynomial::constant(1), disc(36), Strategy::Both, &ctx()).unwrap();
        assert_eq!(t.value.denom(), &BigInt::from(2));
    }
}
