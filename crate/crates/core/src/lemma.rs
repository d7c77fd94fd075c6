//! The roots-of-unity divisibility kernel: `S(k, p, n) = sum_{x^{p^n}=1} (x-1)^k`
//! is divisible by `p^n`.
//!
//! The sum is Galois-stable, hence a rational integer, and an algebraic
//! integer lying in `p^n` times the ring of integers, so integer divisibility
//! is the faithful computable statement. Because this one line carries the
//! whole divisibility argument, it is computed by three independent routes:
//!
//! 1. closed form: expanding `(x-1)^k` and using
//!    `sum_x x^j = p^n * [p^n | j]` gives
//!    `S = p^n * sum_{p^n | j} (-1)^{k-j} C(k, j)`;
//! 2. polynomial reduction: `p^n` times the constant coefficient of
//!    `(X-1)^k mod (X^{p^n} - 1)`, by exact cyclic convolution;
//! 3. complex summation over the actual roots of unity in high precision,
//!    rounded to the nearest integer (where the precision budget allows).

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::cmnum::PrecisionContext;
use crate::fixed::{pi, Complex, Real};
use crate::qforms::is_prime;
use crate::trace::padic_valuation;
use crate::{Error, Result};

/// Budget beyond which the complex-sum route is skipped.
pub const ORACLE_MAX_K: u64 = 2048;
pub const ORACLE_MAX_ROOT_COUNT: u64 = 4096;

/// One checked instance of the divisibility statement.
#[derive(Debug, Clone)]
pub struct LemmaReport {
    pub k: u64,
    pub p: u64,
    pub n: u32,
    /// The integer `S(k, p, n)`.
    pub value: BigInt,
    /// `v_p(S)`; `None` is +infinity (S = 0).
    pub valuation: Option<u64>,
    /// Whether `v_p(S) >= n`.
    pub holds: bool,
    /// Whether all computed routes produced the same integer.
    pub routes_agree: bool,
    /// Whether the complex-sum route ran (it is skipped above the budget).
    pub oracle_ran: bool,
}

/// Binomial row `C(k, 0..=k)` (exact).
fn pascal_row(k: u64) -> Vec<BigInt> {
    let mut row = vec![BigInt::one()];
    for j in 0..k {
        let next = &row[j as usize] * BigInt::from(k - j) / BigInt::from(j + 1);
        row.push(next);
    }
    row
}

/// `S(k, p, n)` by the closed binomial form.
pub fn lemma_sum(k: u64, p: u64, n: u32) -> BigInt {
    assert!(is_prime(p), "{p} is not prime");
    let pn = BigInt::from(p).pow(n);
    let Some(step) = p.checked_pow(n) else {
        // p^n beyond u64 certainly exceeds any feasible k: only j = 0 survives
        return if k.is_multiple_of(2) { pn } else { -pn };
    };
    let row = pascal_row(k);
    let mut acc = BigInt::zero();
    let mut j = 0u64;
    while j <= k {
        let sign_negative = (k - j) % 2 == 1;
        if sign_negative {
            acc -= &row[j as usize];
        } else {
            acc += &row[j as usize];
        }
        match j.checked_add(step) {
            Some(next) => j = next,
            None => break,
        }
    }
    acc * pn
}

/// `S(k, p, n)` as `p^n` times the constant coefficient of
/// `(X-1)^k mod (X^{p^n} - 1)`, by exact cyclic polynomial arithmetic.
pub fn lemma_sum_poly(k: u64, p: u64, n: u32) -> BigInt {
    assert!(is_prime(p), "{p} is not prime");
    let pn_big = BigInt::from(p).pow(n);
    let pn = usize::try_from(p.checked_pow(n).expect("p^n fits u64")).expect("p^n fits usize");
    // multiply by (X - 1) k times in Z[X]/(X^{p^n} - 1)
    let mut c = vec![BigInt::zero(); pn];
    c[0] = BigInt::one();
    for _ in 0..k {
        let mut next = vec![BigInt::zero(); pn];
        for (i, v) in c.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            next[(i + 1) % pn] += v;
            next[i] -= v;
        }
        c = next;
    }
    &c[0] * pn_big
}

/// `S(k, p, n)` summed over the actual complex `p^n`-th roots of unity. The
/// rounded real part must sit within 1/4 of an integer and the imaginary
/// part must stay below 1/4, otherwise the precision budget was too small.
pub fn lemma_sum_oracle(k: u64, p: u64, n: u32, ctx: &PrecisionContext) -> Result<BigInt> {
    assert!(is_prime(p), "{p} is not prime");
    let count = p
        .checked_pow(n)
        .ok_or_else(|| Error::InvalidArgument(format!("p^n overflows u64 for p={p}, n={n}")))?;
    if k > ORACLE_MAX_K || count > ORACLE_MAX_ROOT_COUNT {
        return Err(Error::PrecisionInfeasible {
            terms: (k.max(count)) as usize,
            cap: ORACLE_MAX_K as usize,
        });
    }
    // |x - 1|^k <= 2^k, summed over p^n roots
    let scale = ctx.bits().max(k as u32 + 64 + count.ilog2());
    let step = pi(scale).mul_small(2).div_small(count as i64);
    let one = Complex::from_i64(1, scale);
    let mut total = Complex::zero(scale);
    let mut root = Complex::from_i64(1, scale);
    let rot = Complex::new(Real::zero(scale), step.clone()).exp();
    for j in 0..count {
        if j > 0 {
            root = rot.mul(&root);
        }
        total = total.add(&root.sub(&one).powu(k as u32));
    }

    let quarter_log2 = -2i64;
    if total.im.abs().log2_bound().unwrap_or(i64::MIN) > quarter_log2 {
        return Err(Error::Internal(format!(
            "imaginary part of the root-of-unity sum is not negligible for k={k}, p^n={count}"
        )));
    }
    let (value, dist) = total.re.round_nearest();
    if dist.unwrap_or(i64::MIN) > quarter_log2 {
        return Err(Error::Internal(format!(
            "root-of-unity sum is not close enough to an integer for k={k}, p^n={count}"
        )));
    }
    Ok(value)
}

/// Checks `v_p(S(k, p, n)) >= n` for all `k <= kmax` and all prime powers in
/// the list, with all three routes compared wherever budgeted. Failures are
/// recorded in the reports, not raised.
pub fn check_lemma(kmax: u64, pn_list: &[(u64, u32)], ctx: &PrecisionContext) -> Vec<LemmaReport> {
    let mut reports = Vec::new();
    for &(p, n) in pn_list {
        for k in 0..=kmax {
            let value = lemma_sum(k, p, n);
            let mut routes_agree = lemma_sum_poly(k, p, n) == value;
            let oracle = lemma_sum_oracle(k, p, n, ctx);
            let oracle_ran = !matches!(oracle, Err(Error::PrecisionInfeasible { .. }));
            if let Ok(o) = &oracle {
                routes_agree = routes_agree && o == &value;
            } else if oracle_ran {
                routes_agree = false; // precision failure inside the budget
            }
            let valuation = padic_valuation(&value, p);
            let holds = valuation.is_none_or(|v| v >= n as u64);
            reports.push(LemmaReport {
                k,
                p,
                n,
                value,
                valuation,
                holds,
                routes_agree,
                oracle_ran,
            });
        }
    }
    reports
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::default()
    }

    #[test]
    fn closed_form_examples() {
        // k = 0: each of the p^n terms is 1
        assert_eq!(lemma_sum(0, 7, 1), BigInt::from(7));
        assert_eq!(lemma_sum(0, 2, 2), BigInt::from(4));
        assert_eq!(lemma_sum(0, 3, 2), BigInt::from(9));
        // k = 1 with p^n > 1: the roots sum to zero, minus p^n ones
        assert_eq!(lemma_sum(1, 5, 1), BigInt::from(-5));
        assert_eq!(lemma_sum(1, 2, 3), BigInt::from(-8));
        // k = 3, p^n = 2: roots {1, -1} give 0 + (-2)^3
        assert_eq!(lemma_sum(3, 2, 1), BigInt::from(-8));
        // n = 0: the only root is 1, so S = 0^k
        assert_eq!(lemma_sum(0, 5, 0), BigInt::from(1));
        assert_eq!(lemma_sum(4, 5, 0), BigInt::from(0));
    }

    #[test]
    fn poly_route_matches_closed_form() {
        for (p, n) in [(2u64, 1u32), (2, 2), (3, 1), (3, 2), (5, 1), (7, 1), (13, 1)] {
            for k in 0..=40u64 {
                assert_eq!(lemma_sum_poly(k, p, n), lemma_sum(k, p, n), "k={k}, p={p}, n={n}");
            }
        }
    }

    #[test]
    fn oracle_matches_closed_form() {
        assert_eq!(lemma_sum_oracle(0, 2, 2, &ctx()).unwrap(), BigInt::from(4));
        assert_eq!(lemma_sum_oracle(2, 2, 1, &ctx()).unwrap(), BigInt::from(4)); // 0 + (-2)^2
        assert_eq!(lemma_sum_oracle(7, 5, 1, &ctx()).unwrap(), lemma_sum(7, 5, 1));
        assert_eq!(lemma_sum_oracle(5, 3, 1, &ctx()).unwrap(), lemma_sum(5, 3, 1));
        for k in [10u64, 41, 100] {
            assert_eq!(lemma_sum_oracle(k, 7, 2, &ctx()).unwrap(), lemma_sum(k, 7, 2), "k={k}");
        }
    }

    #[test]
    fn oracle_budget_is_enforced() {
        let e = lemma_sum_oracle(5000, 2, 1, &ctx());
        assert!(matches!(e, Err(Error::PrecisionInfeasible { .. })));
    }

    #[test]
    fn divisibility_small_sweep() {
        let reports = check_lemma(10, &[(2, 1)], &ctx());
        assert_eq!(reports.len(), 11);
        for r in &reports {
            assert!(r.holds, "k={}", r.k);
            assert!(r.routes_agree, "k={}", r.k);
            assert!(r.oracle_ran);
        }
    }

    #[test]
    fn divisibility_k0_p9() {
        let reports = check_lemma(0, &[(3, 2)], &ctx());
        assert_eq!(reports.len(), 1);
        let r = &reports[0];
        assert_eq!(r.value, BigInt::from(9));
        assert_eq!(r.valuation, Some(2));
        assert!(r.holds);
    }

    #[test]
    fn divisibility_deep_k() {
        for r in check_lemma(300, &[(7, 2)], &ctx()) {
            assert!(r.holds, "k={}", r.k);
            assert!(r.routes_agree, "k={}", r.k);
        }
    }

    #[test]
    fn valuations_often_exceed_n() {
        // the lemma guarantees v >= n; larger valuations do occur
        let r = check_lemma(8, &[(2, 1)], &ctx());
        assert!(r.iter().any(|r| matches!(r.valuation, Some(v) if v > 1)));
    }
}
