//! Exact integer q-expansions and Faber polynomials of the j-function.
//!
//! Everything here is integer arithmetic on truncated Laurent series: the
//! Dedekind eta product (without its q^{1/24} prefactor), the Eisenstein
//! series E4 and E6, the j-function computed as E4^3/Delta and cross-checked
//! against E6^2/Delta + 1728, and the monic polynomials `F_m` characterized
//! by `F_m(j) = q^{-m} + O(q)`.

use std::sync::Mutex;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::{Error, Result};

/// A truncated Laurent series with exact integer coefficients: the
/// coefficients of `q^e` are tracked for `lead_exp() <= e <= order()` and the
/// series is unknown beyond `order()`. Arithmetic propagates the truncation
/// order so that every stored coefficient is exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaurentSeries {
    lead: i64,
    coeffs: Vec<BigInt>,
}

impl LaurentSeries {
    /// Builds a series from coefficients for exponents `lead ..= lead + coeffs.len() - 1`.
    pub fn from_coeffs(lead: i64, coeffs: Vec<BigInt>) -> Self {
        assert!(!coeffs.is_empty(), "series must track at least one coefficient");
        LaurentSeries { lead, coeffs }
    }

    /// The constant `c`, tracked through `order`.
    pub fn constant(c: BigInt, order: i64) -> Self {
        assert!(order >= 0);
        let mut coeffs = vec![BigInt::zero(); (order + 1) as usize];
        coeffs[0] = c;
        LaurentSeries { lead: 0, coeffs }
    }

    pub fn one(order: i64) -> Self {
        Self::constant(BigInt::one(), order)
    }

    /// `c * q^exp`, tracked through `order`.
    pub fn monomial(c: BigInt, exp: i64, order: i64) -> Self {
        assert!(exp <= order);
        let mut coeffs = vec![BigInt::zero(); (order - exp + 1) as usize];
        coeffs[0] = c;
        LaurentSeries { lead: exp, coeffs }
    }

    /// Lowest tracked exponent (coefficients below are identically zero).
    pub fn lead_exp(&self) -> i64 {
        self.lead
    }

    /// Highest exponent with a known coefficient.
    pub fn order(&self) -> i64 {
        self.lead + self.coeffs.len() as i64 - 1
    }

    /// Coefficient of `q^e`. Panics when `e` is beyond the truncation order:
    /// that coefficient was never computed.
    pub fn coeff(&self, e: i64) -> BigInt {
        assert!(
            e <= self.order(),
            "coefficient of q^{e} is beyond truncation order {}",
            self.order()
        );
        if e < self.lead {
            BigInt::zero()
        } else {
            self.coeffs[(e - self.lead) as usize].clone()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Restricts to coefficients `<= order` (which must already be known).
    pub fn truncate(&self, order: i64) -> Self {
        assert!(order <= self.order());
        assert!(order >= self.lead, "truncation would drop every tracked coefficient");
        LaurentSeries {
            lead: self.lead,
            coeffs: self.coeffs[..(order - self.lead + 1) as usize].to_vec(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let lead = self.lead.min(rhs.lead);
        let order = self.order().min(rhs.order());
        assert!(order >= lead);
        let mut coeffs = vec![BigInt::zero(); (order - lead + 1) as usize];
        for e in lead..=order {
            let mut v = BigInt::zero();
            if e >= self.lead && e <= self.order() {
                v += &self.coeffs[(e - self.lead) as usize];
            }
            if e >= rhs.lead && e <= rhs.order() {
                v += &rhs.coeffs[(e - rhs.lead) as usize];
            }
            coeffs[(e - lead) as usize] = v;
        }
        LaurentSeries { lead, coeffs }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.scale(&BigInt::from(-1)))
    }

    pub fn scale(&self, c: &BigInt) -> Self {
        LaurentSeries { lead: self.lead, coeffs: self.coeffs.iter().map(|x| x * c).collect() }
    }

    /// Multiplication by `q^k`.
    pub fn shift(&self, k: i64) -> Self {
        LaurentSeries { lead: self.lead + k, coeffs: self.coeffs.clone() }
    }

    /// Schoolbook product; the result is known through
    /// `min(self.order() + rhs.lead_exp(), rhs.order() + self.lead_exp())`.
    pub fn mul(&self, rhs: &Self) -> Self {
        let lead = self.lead + rhs.lead;
        let order = (self.order() + rhs.lead).min(rhs.order() + self.lead);
        assert!(order >= lead);
        let mut coeffs = vec![BigInt::zero(); (order - lead + 1) as usize];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let e1 = self.lead + i as i64;
            let max_j = (order - rhs.lead - e1).min(rhs.coeffs.len() as i64 - 1);
            for j in 0..=max_j {
                let b = &rhs.coeffs[j as usize];
                if b.is_zero() {
                    continue;
                }
                let e = e1 + rhs.lead + j - lead;
                coeffs[e as usize] += a * b;
            }
        }
        LaurentSeries { lead, coeffs }
    }

    /// Integer power by repeated squaring. `pow(0)` is 1 through this
    /// series' truncation order.
    pub fn pow(&self, k: u32) -> Self {
        if k == 0 {
            return Self::one(self.order().max(0));
        }
        let mut result: Option<LaurentSeries> = None;
        let mut base = self.clone();
        let mut e = k;
        loop {
            if e & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.mul(&base),
                });
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            base = base.mul(&base);
        }
        result.unwrap()
    }

    /// Exact division; the divisor's leading nonzero coefficient must be
    /// a unit (±1), which keeps everything over the integers.
    pub fn div_exact(&self, den: &Self) -> Self {
        // effective lead of the divisor
        let j0 = den.coeffs.iter().position(|c| !c.is_zero()).expect("division by the zero series");
        let dlead = den.lead + j0 as i64;
        let dunit = &den.coeffs[j0];
        assert!(dunit.is_one() || (-dunit).is_one(), "divisor leading coefficient must be a unit");

        let qlead = self.lead - dlead;
        let qorder = (self.order() - dlead).min(den.order() + self.lead - 2 * dlead);
        assert!(qorder >= qlead, "division result would carry no known coefficients");

        let mut q = vec![BigInt::zero(); (qorder - qlead + 1) as usize];
        for k in 0..q.len() {
            let e = self.lead + k as i64; // numerator exponent being matched
            let mut acc = self.coeff(e);
            for (i, qi) in q.iter().enumerate().take(k) {
                if qi.is_zero() {
                    continue;
                }
                let dexp = e - (qlead + i as i64);
                if dexp <= den.order() {
                    acc -= qi * den.coeff(dexp);
                }
            }
            q[k] = if dunit.is_one() { acc } else { -acc };
        }
        LaurentSeries { lead: qlead, coeffs: q }
    }
}

impl std::fmt::Display for LaurentSeries {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let e = self.lead + i as i64;
            if first {
                write!(f, "{c}")?;
                first = false;
            } else if c.is_negative() {
                write!(f, " - {}", -c)?;
            } else {
                write!(f, " + {c}")?;
            }
            if e != 0 {
                write!(f, "*q^{e}")?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(q^{})", self.order() + 1)
    }
}

/// An element of `Z[j]`, stored by ascending coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JPolynomial {
    coeffs: Vec<BigInt>,
}

impl JPolynomial {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.len() > 1 && coeffs.last().map(|c| c.is_zero()) == Some(true) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(BigInt::zero());
        }
        JPolynomial { coeffs }
    }

    pub fn constant(c: i64) -> Self {
        JPolynomial::new(vec![BigInt::from(c)])
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> BigInt {
        self.coeffs.get(k).cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        let coeffs = (0..len).map(|k| self.coeff(k) + rhs.coeff(k)).collect();
        JPolynomial::new(coeffs)
    }

    pub fn scale(&self, c: &BigInt) -> Self {
        JPolynomial::new(self.coeffs.iter().map(|x| x * c).collect())
    }
}

impl std::fmt::Display for JPolynomial {
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
        Ok(())
    }
}

/// q-expansion of `prod_{n >= 1} (1 - q^n)` through `q^order`, via the sparse
/// pentagonal-number series. The `q^{1/24}` prefactor of eta is handled only
/// in numeric evaluation.
pub fn eta_series(order: i64) -> LaurentSeries {
    assert!(order >= 0);
    let mut coeffs = vec![BigInt::zero(); order as usize + 1];
    coeffs[0] = BigInt::one();
    let mut k = 1i64;
    loop {
        let e1 = k * (3 * k - 1) / 2;
        let e2 = k * (3 * k + 1) / 2;
        if e1 > order && e2 > order {
            break;
        }
        let sign = if k % 2 == 0 { BigInt::one() } else { BigInt::from(-1) };
        if e1 <= order {
            coeffs[e1 as usize] += &sign;
        }
        if e2 <= order {
            coeffs[e2 as usize] += &sign;
        }
        k += 1;
    }
    LaurentSeries::from_coeffs(0, coeffs)
}

/// Divisor power sums `sigma_power(n)` for `n = 0 ..= order` (index 0 unused).
pub(crate) fn divisor_power_sieve(order: usize, power: u32) -> Vec<u128> {
    let mut sigma = vec![0u128; order + 1];
    for div in 1..=order {
        let dpow = (div as u128).pow(power);
        let mut n = div;
        while n <= order {
            sigma[n] += dpow;
            n += div;
        }
    }
    sigma
}

/// Eisenstein weight selector for [`eisenstein`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EisensteinWeight {
    Four,
    Six,
}

/// `E4 = 1 + 240 sum sigma_3(n) q^n` or `E6 = 1 - 504 sum sigma_5(n) q^n`
/// through `q^order`, with exact divisor sums.
pub fn eisenstein(weight: EisensteinWeight, order: i64) -> LaurentSeries {
    assert!(order >= 0);
    let (scale, power) = match weight {
        EisensteinWeight::Four => (BigInt::from(240), 3),
        EisensteinWeight::Six => (BigInt::from(-504), 5),
    };
    let sigma = divisor_power_sieve(order as usize, power);
    let mut coeffs = vec![BigInt::zero(); order as usize + 1];
    coeffs[0] = BigInt::one();
    for n in 1..=order as usize {
        coeffs[n] = &scale * BigInt::from(sigma[n]);
    }
    LaurentSeries::from_coeffs(0, coeffs)
}

static J_MEMO: Mutex<Option<LaurentSeries>> = Mutex::new(None);

/// q-expansion of `j = E4^3 / Delta` from `q^{-1}` through `q^order`,
/// cross-checked coefficient by coefficient against the independently
/// computed `E6^2 / Delta + 1728`. The largest expansion computed so far is
/// memoized process-wide; the coefficients do not depend on the order
/// requested, so the memo cannot change any result.
pub fn j_expansion(order: i64) -> Result<LaurentSeries> {
    assert!(order >= -1);
    let mut memo = J_MEMO.lock().unwrap();
    if memo.as_ref().map(|j| j.order() >= order) != Some(true) {
        *memo = Some(compute_j(order.max(1))?);
    }
    Ok(memo.as_ref().unwrap().truncate(order))
}

fn compute_j(order: i64) -> Result<LaurentSeries> {
    // Division by Delta (lead exponent 1) loses two orders of truncation.
    let n = order + 2;
    let delta = eta_series(n).pow(24).shift(1);
    let e4 = eisenstein(EisensteinWeight::Four, n);
    let j = e4.pow(3).div_exact(&delta);

    let e6 = eisenstein(EisensteinWeight::Six, n);
    let alt = e6.pow(2).div_exact(&delta).add(&LaurentSeries::constant(BigInt::from(1728), n - 2));

    for e in -1..=j.order().min(alt.order()) {
        if j.coeff(e) != alt.coeff(e) {
            return Err(Error::SeriesSelfCheck { exponent: e });
        }
    }
    Ok(j.truncate(order))
}

/// The unique monic degree-`m` polynomial `F_m` with
/// `F_m(j(q)) = q^{-m} + O(q)` (zero constant term), solved over the
/// integers: each `j^k` is monic in `q^{-k}`, so eliminating the exponents
/// `-m+1 ..= 0` one at a time is a unit-diagonal triangular system.
pub fn faber_poly(m: u32) -> Result<JPolynomial> {
    let m = m as usize;
    if m == 0 {
        return Ok(JPolynomial::constant(1));
    }
    let j = j_expansion(m as i64)?;
    let mut powers = Vec::with_capacity(m + 1);
    powers.push(LaurentSeries::one(m as i64));
    for k in 1..=m {
        powers.push(powers[k - 1].mul(&j));
    }

    let mut coeffs = vec![BigInt::zero(); m + 1];
    coeffs[m] = BigInt::one();
    let mut rem = powers[m].clone();
    for e in (0..m).rev() {
        let excess = rem.coeff(-(e as i64));
        if !excess.is_zero() {
            coeffs[e] = -&excess;
            rem = rem.sub(&powers[e].scale(&excess));
        }
    }

    for e in (-(m as i64) + 1)..=0 {
        if !rem.coeff(e).is_zero() {
            return Err(Error::Internal(format!(
                "Faber solve left a nonzero coefficient at q^{e} for m = {m}"
            )));
        }
    }
    Ok(JPolynomial::new(coeffs))
}

/// Exact expansion of `f(j(q))` through `q^order`, by Horner composition.
pub fn poly_expansion(f: &JPolynomial, order: i64) -> Result<LaurentSeries> {
    assert!(order >= 0);
    let deg = f.degree() as i64;
    if deg == 0 {
        return Ok(LaurentSeries::constant(f.coeff(0), order));
    }
    let j = j_expansion(order + deg)?;
    let horner_order = order + deg;
    let mut r = LaurentSeries::constant(f.coeff(deg as usize), horner_order);
    for k in (0..deg).rev() {
        r = r.mul(&j);
        let c = f.coeff(k as usize);
        if !c.is_zero() {
            r = r.add(&LaurentSeries::constant(c, r.order()));
        }
    }
    Ok(r.truncate(order))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn big(n: i64) -> BigInt {
        BigInt::from(n)
    }

    /// Oracle for eta: multiply the factors (1 - q^n) directly.
    fn eta_by_direct_product(order: i64) -> LaurentSeries {
        let mut acc = LaurentSeries::one(order);
        for n in 1..=order {
            let factor = LaurentSeries::one(order).sub(&LaurentSeries::monomial(big(1), n, order));
            acc = acc.mul(&factor).truncate(order);
        }
        acc
    }

    #[test]
    fn eta_examples() {
        let e = eta_series(2);
        assert_eq!((e.coeff(0), e.coeff(1), e.coeff(2)), (big(1), big(-1), big(-1)));
        let e = eta_series(5);
        assert_eq!(e, eta_by_direct_product(5));
        assert_eq!(e.coeff(5), big(1));
        assert_eq!(e.coeff(3), big(0));
        assert_eq!(eta_series(0).coeff(0), big(1));
    }

    #[test]
    fn eta_matches_product_oracle() {
        for order in [1i64, 7, 12, 26, 40] {
            assert_eq!(eta_series(order), eta_by_direct_product(order), "order {order}");
        }
    }

    #[test]
    fn eisenstein_examples() {
        let e4 = eisenstein(EisensteinWeight::Four, 3);
        assert_eq!(e4.coeff(0), big(1));
        assert_eq!(e4.coeff(1), big(240));
        assert_eq!(e4.coeff(2), big(2160)); // sigma_3(2) = 9
        assert_eq!(e4.coeff(3), big(6720)); // sigma_3(3) = 28
        let e6 = eisenstein(EisensteinWeight::Six, 2);
        assert_eq!(e6.coeff(1), big(-504));
        assert_eq!(e6.coeff(2), big(-16632)); // sigma_5(2) = 33
    }

    #[test]
    fn j_expansion_first_coefficients() {
        let j = j_expansion(4).unwrap();
        assert_eq!(j.lead_exp(), -1);
        assert_eq!(j.coeff(-1), big(1));
        assert_eq!(j.coeff(0), big(744));
        assert_eq!(j.coeff(1), big(196884));
        assert_eq!(j.coeff(2), big(21493760));
        assert_eq!(j.coeff(3), big(864299970));
        assert_eq!(j.coeff(4), big(20245856256));
    }

    #[test]
    fn faber_small() {
        assert_eq!(faber_poly(0).unwrap(), JPolynomial::constant(1));
        assert_eq!(faber_poly(1).unwrap(), JPolynomial::new(vec![big(-744), big(1)]));
        assert_eq!(faber_poly(2).unwrap(), JPolynomial::new(vec![big(159768), big(-1488), big(1)]));
        assert_eq!(
            faber_poly(3).unwrap(),
            JPolynomial::new(vec![big(-36866976), big(1069956), big(-2232), big(1)])
        );
    }

    #[test]
    fn faber_defining_property() {
        for m in 0..=8u32 {
            let f = faber_poly(m).unwrap();
            let expansion = poly_expansion(&f, 2).unwrap();
            assert_eq!(expansion.coeff(-(m as i64)), big(1), "m = {m}");
            for e in (-(m as i64) + 1)..=0 {
                assert_eq!(expansion.coeff(e), big(0), "m = {m}, exponent {e}");
            }
        }
    }

    #[test]
    fn poly_expansion_examples() {
        let one = JPolynomial::constant(1);
        assert_eq!(poly_expansion(&one, 3).unwrap(), LaurentSeries::constant(big(1), 3));

        let f1 = faber_poly(1).unwrap();
        let e = poly_expansion(&f1, 1).unwrap();
        assert_eq!(e.coeff(-1), big(1));
        assert_eq!(e.coeff(0), big(0));
        assert_eq!(e.coeff(1), big(196884));

        let f2 = faber_poly(2).unwrap();
        let e = poly_expansion(&f2, 0).unwrap();
        assert_eq!(e.coeff(-2), big(1));
        assert_eq!(e.coeff(-1), big(0));
        assert_eq!(e.coeff(0), big(0));
    }

    #[test]
    fn display_polynomial() {
        assert_eq!(faber_poly(2).unwrap().to_string(), "X^2 - 1488X + 159768");
        assert_eq!(JPolynomial::constant(0).to_string(), "0");
        assert_eq!(JPolynomial::new(vec![big(0), big(1)]).to_string(), "X");
    }

    fn arb_series() -> impl Strategy<Value = LaurentSeries> {
        (-4i64..4, prop::collection::vec(-9i64..9, 1..8)).prop_map(|(lead, coeffs)| {
            LaurentSeries::from_coeffs(lead, coeffs.into_iter().map(BigInt::from).collect())
        })
    }

    proptest! {
        #[test]
        fn mul_commutes(a in arb_series(), b in arb_series()) {
            prop_assert_eq!(a.mul(&b), b.mul(&a));
        }

        #[test]
        fn mul_distributes_over_add(a in arb_series(), b in arb_series(), c in arb_series()) {
            let lhs = a.mul(&b.add(&c));
            let rhs = a.mul(&b).add(&a.mul(&c));
            let order = lhs.order().min(rhs.order());
            prop_assert_eq!(lhs.truncate(order), rhs.truncate(order));
        }

        #[test]
        fn division_inverts_multiplication(a in arb_series(), b in arb_series()) {
            // force the divisor to have unit leading coefficient
            let mut coeffs: Vec<BigInt> = b.coeffs.clone();
            coeffs[0] = BigInt::one();
            let b = LaurentSeries::from_coeffs(b.lead, coeffs);
            let q = a.mul(&b).div_exact(&b);
            let order = q.order().min(a.order());
            prop_assert_eq!(q.truncate(order), a.truncate(order));
        }
    }
}
