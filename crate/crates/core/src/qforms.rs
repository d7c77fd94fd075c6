//! Binary quadratic forms and the arithmetic of imaginary quadratic orders.
//!
//! Classes of primitive reduced positive-definite forms of discriminant `-d`
//! stand in for isomorphism classes of complex elliptic curves with
//! endomorphism ring equal to the order of discriminant `-d`. Enumeration is
//! a direct double loop over `a <= sqrt(d/3)`, `-a < b <= a`, which is plenty
//! at the discriminant sizes this crate targets (d up to a few times 10^4).

use crate::{Error, Result};

/// A positive integer `d` with `d === 0 or 3 (mod 4)`, standing for the
/// imaginary quadratic order of discriminant `-d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Discriminant(u64);

impl Discriminant {
    /// Validates `d >= 1` and `d === 0, 3 (mod 4)`.
    pub fn new(d: u64) -> Result<Self> {
        if d > (1 << 60) {
            // keeps every form coefficient comfortably inside i64
            return Err(Error::InvalidArgument(format!("discriminant {d} is out of range")));
        }
        if d >= 1 && matches!(d % 4, 0 | 3) {
            Ok(Discriminant(d))
        } else {
            Err(Error::InvalidDiscriminant(d))
        }
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

impl std::fmt::Display for Discriminant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A primitive reduced positive-definite integral binary quadratic form
/// `a x^2 + b x y + c y^2` of discriminant `b^2 - 4ac = -d < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuadForm {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl QuadForm {
    pub fn discriminant(&self) -> i64 {
        self.b * self.b - 4 * self.a * self.c
    }

    /// Reduction condition: `-a < b <= a < c` or `0 <= b <= a = c`.
    pub fn is_reduced(&self) -> bool {
        let QuadForm { a, b, c } = *self;
        (-a < b && b <= a && a < c) || (0 <= b && b <= a && a == c)
    }

    pub fn is_primitive(&self) -> bool {
        gcd(gcd(self.a.unsigned_abs(), self.b.unsigned_abs()), self.c.unsigned_abs()) == 1
    }

    /// Fixed by conjugation `(a, b, c) -> (a, -b, c)`: exactly the forms with
    /// `b = 0`, `b = a` or `a = c`, whose singular modulus is real.
    pub fn is_self_conjugate(&self) -> bool {
        self.b == 0 || self.b == self.a || self.a == self.c
    }
}

impl std::fmt::Display for QuadForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.a, self.b, self.c)
    }
}

/// One term of the decomposition of `O_d` by over-orders: the order of
/// discriminant `-dprime` with `d = conductor^2 * dprime`, together with the
/// automorphism weight of its CM curves (6 for `dprime = 3`, 4 for
/// `dprime = 4`, 2 otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubOrderPart {
    pub dprime: Discriminant,
    pub conductor: u64,
    pub weight: u32,
}

/// Complete list of primitive reduced forms of discriminant `-d`, in
/// lexicographic `(a, b)` order. Its length is the class number `h(-d)`.
pub fn reduced_forms(d: Discriminant) -> Vec<QuadForm> {
    let d = d.get() as i64;
    let mut forms = Vec::new();
    let mut a = 1i64;
    while 3 * a * a <= d {
        for b in (1 - a)..=a {
            let num = b * b + d;
            if num % (4 * a) != 0 {
                continue;
            }
            let c = num / (4 * a);
            let q = QuadForm { a, b, c };
            if q.is_reduced() && q.is_primitive() {
                forms.push(q);
            }
        }
        a += 1;
    }
    forms
}

/// Class number `h(-d)`.
pub fn class_number(d: Discriminant) -> usize {
    reduced_forms(d).len()
}

/// All pairs `(dprime, g)` with `d = g^2 * dprime` and `dprime` a valid
/// discriminant, each with its automorphism weight, sorted by `g` ascending.
/// The pair `(d, 1)` is always present.
pub fn suborder_decomposition(d: Discriminant) -> Vec<SubOrderPart> {
    let dv = d.get();
    let mut parts = Vec::new();
    let mut g = 1u64;
    while g * g <= dv {
        if dv.is_multiple_of(g * g) {
            if let Ok(dprime) = Discriminant::new(dv / (g * g)) {
                let weight = match dprime.get() {
                    3 => 6,
                    4 => 4,
                    _ => 2,
                };
                parts.push(SubOrderPart { dprime, conductor: g, weight });
            }
        }
        g += 1;
    }
    parts
}

/// `alpha(d)`: 2 when `Q(sqrt(-d)) = Q(i)` (d a perfect square), 3 when
/// `Q(sqrt(-d)) = Q(sqrt(-3))` (d three times a square), 1 otherwise.
pub fn alpha(d: Discriminant) -> u32 {
    let d = d.get();
    if is_square(d) {
        2
    } else if d.is_multiple_of(3) && is_square(d / 3) {
        3
    } else {
        1
    }
}

/// The discriminant of the field `Q(sqrt(-d))`: the fundamental discriminant
/// `D_K < 0` with `-d = D_K * s^2`.
pub fn fundamental_discriminant(d: Discriminant) -> i64 {
    let m = squarefree_part(d.get()) as i64;
    // -m === 1 (mod 4) iff m === 3 (mod 4)
    if m % 4 == 3 {
        -m
    } else {
        -4 * m
    }
}

/// Whether the prime `p` splits in `Q(sqrt(-d))`, i.e. the Kronecker symbol
/// `(D_K | p)` equals 1. Errors when `p` is not prime or divides `d`.
pub fn is_split(p: u64, d: Discriminant) -> Result<bool> {
    if !is_prime(p) {
        return Err(Error::InvalidArgument(format!("{p} is not prime")));
    }
    if d.get().is_multiple_of(p) {
        return Err(Error::PrimeDividesD { p, d: d.get() });
    }
    Ok(kronecker(fundamental_discriminant(d), p as i64) == 1)
}

/// Kronecker symbol `(a | n)` for `n >= 1`, by the standard reciprocity
/// recursion; the even part of `n` goes through `(a | 2)`, which is
/// `0, 1, -1` for `a` even, `a === ±1 (mod 8)`, `a === ±3 (mod 8)`.
pub fn kronecker(a: i64, n: i64) -> i32 {
    assert!(n >= 1, "kronecker symbol implemented for positive n only");
    let mut a = a;
    let mut n = n;
    let mut sign = 1i32;
    // strip factors of 2 from n
    while n % 2 == 0 {
        n /= 2;
        match a.rem_euclid(8) {
            1 | 7 => {}
            3 | 5 => sign = -sign,
            _ => return 0, // a even
        }
    }
    // now n odd >= 1: Jacobi symbol
    a = a.rem_euclid(n);
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            if matches!(n % 8, 3 | 5) {
                sign = -sign;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            sign = -sign;
        }
        a %= n;
    }
    if n == 1 {
        sign
    } else {
        0
    }
}

/// Deterministic trial-division primality test, adequate at desk scale.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut f = 3u64;
    while f * f <= n {
        if n.is_multiple_of(f) {
            return false;
        }
        f += 2;
    }
    true
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

fn is_square(n: u64) -> bool {
    let r = n.isqrt();
    r * r == n
}

/// Largest squarefree divisor `m` with `n = m * s^2`, by trial division.
fn squarefree_part(n: u64) -> u64 {
    let mut n = n;
    let mut m = 1u64;
    let mut f = 2u64;
    while f * f <= n {
        if n.is_multiple_of(f) {
            let mut e = 0u32;
            while n.is_multiple_of(f) {
                n /= f;
                e += 1;
            }
            if e % 2 == 1 {
                m *= f;
            }
        }
        f += 1;
    }
    m * n
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn disc(d: u64) -> Discriminant {
        Discriminant::new(d).unwrap()
    }

    /// Independent enumeration straight from the definition: all triples
    /// `(a, b, c)` in box ranges with `b^2 - 4ac = -d`, filtered.
    fn brute_force_forms(d: u64) -> Vec<QuadForm> {
        let d = d as i64;
        let mut out = Vec::new();
        for a in 1..=(d / 3 + 1) {
            if 3 * a * a > d {
                break;
            }
            for b in -a..=a {
                for c in a..=(d / (4 * a) + a + 1) {
                    let q = QuadForm { a, b, c };
                    if q.discriminant() == -d && q.is_reduced() && q.is_primitive() {
                        out.push(q);
                    }
                }
            }
        }
        out.sort_by_key(|q| (q.a, q.b));
        out
    }

    #[test]
    fn validate_discriminant() {
        assert_eq!(disc(3).get(), 3);
        assert_eq!(disc(12).get(), 12);
        assert!(matches!(Discriminant::new(5), Err(Error::InvalidDiscriminant(5))));
        assert!(Discriminant::new(0).is_err());
        assert!(Discriminant::new(1).is_err());
        assert!(Discriminant::new(2).is_err());
    }

    #[test]
    fn reduced_forms_small() {
        assert_eq!(reduced_forms(disc(3)), vec![QuadForm { a: 1, b: 1, c: 1 }]);
        assert_eq!(reduced_forms(disc(4)), vec![QuadForm { a: 1, b: 0, c: 1 }]);
        assert_eq!(
            reduced_forms(disc(23)),
            vec![
                QuadForm { a: 1, b: 1, c: 6 },
                QuadForm { a: 2, b: -1, c: 3 },
                QuadForm { a: 2, b: 1, c: 3 },
            ]
        );
        // (2, 2, 2) is excluded as imprimitive
        assert_eq!(reduced_forms(disc(12)), vec![QuadForm { a: 1, b: 0, c: 3 }]);
    }

    #[test]
    fn class_numbers_match_tables() {
        for (d, h) in [
            (3, 1),
            (4, 1),
            (7, 1),
            (8, 1),
            (11, 1),
            (12, 1),
            (15, 2),
            (16, 1),
            (19, 1),
            (20, 2),
            (23, 3),
            (24, 2),
            (31, 3),
            (47, 5),
            (71, 7),
            (148, 2),
            (163, 1),
        ] {
            assert_eq!(class_number(disc(d)), h, "h(-{d})");
        }
    }

    #[test]
    fn reduced_forms_agree_with_brute_force() {
        for d in 3..=600u64 {
            if !matches!(d % 4, 0 | 3) {
                continue;
            }
            assert_eq!(reduced_forms(disc(d)), brute_force_forms(d), "d = {d}");
        }
    }

    #[test]
    fn form_invariants() {
        for d in [3u64, 4, 23, 47, 403, 1992, 1995] {
            if !matches!(d % 4, 0 | 3) {
                continue;
            }
            let forms = reduced_forms(disc(d));
            for q in &forms {
                assert_eq!(q.discriminant(), -(d as i64));
                assert!(q.is_primitive());
                assert!(q.is_reduced());
                assert!(3 * q.a * q.a <= d as i64);
            }
            // involution: (a, b, c) present iff (a, -b, c) present, except
            // for forms fixed by conjugation
            for q in &forms {
                let conj = QuadForm { a: q.a, b: -q.b, c: q.c };
                if q.is_self_conjugate() {
                    assert!(!forms.contains(&conj) || conj == *q);
                } else {
                    assert!(forms.contains(&conj), "missing conjugate of {q} for d = {d}");
                }
            }
        }
    }

    #[test]
    fn suborders_small() {
        let parts = suborder_decomposition(disc(3));
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0], SubOrderPart { dprime: disc(3), conductor: 1, weight: 6 });

        let parts = suborder_decomposition(disc(147));
        assert_eq!(
            parts,
            vec![
                SubOrderPart { dprime: disc(147), conductor: 1, weight: 2 },
                SubOrderPart { dprime: disc(3), conductor: 7, weight: 6 },
            ]
        );

        // 16/16 = 1 is not a discriminant and is excluded
        let parts = suborder_decomposition(disc(16));
        assert_eq!(
            parts,
            vec![
                SubOrderPart { dprime: disc(16), conductor: 1, weight: 2 },
                SubOrderPart { dprime: disc(4), conductor: 2, weight: 4 },
            ]
        );

        let parts = suborder_decomposition(disc(48));
        assert_eq!(
            parts,
            vec![
                SubOrderPart { dprime: disc(48), conductor: 1, weight: 2 },
                SubOrderPart { dprime: disc(12), conductor: 2, weight: 2 },
                SubOrderPart { dprime: disc(3), conductor: 4, weight: 6 },
            ]
        );
    }

    #[test]
    fn suborder_reconstructs_d() {
        for d in (3..400u64).filter(|d| matches!(d % 4, 0 | 3)) {
            let parts = suborder_decomposition(disc(d));
            assert_eq!(parts[0].conductor, 1);
            assert_eq!(parts[0].dprime.get(), d);
            for p in parts {
                assert_eq!(p.conductor * p.conductor * p.dprime.get(), d);
            }
        }
    }

    #[test]
    fn alpha_values() {
        assert_eq!(alpha(disc(3)), 3);
        assert_eq!(alpha(disc(4)), 2);
        assert_eq!(alpha(disc(7)), 1);
        assert_eq!(alpha(disc(12)), 3);
        assert_eq!(alpha(disc(147)), 3);
        assert_eq!(alpha(disc(16)), 2);
        assert_eq!(alpha(disc(20)), 1);
    }

    #[test]
    fn alpha_is_a_field_invariant() {
        for d in (3..200u64).filter(|d| matches!(d % 4, 0 | 3)) {
            for p in [2u64, 3, 5, 7] {
                for n in 1..=2u32 {
                    let lifted = p.pow(2 * n) * d;
                    assert_eq!(alpha(disc(d)), alpha(disc(lifted)), "d={d} p={p} n={n}");
                }
            }
        }
    }

    #[test]
    fn fundamental_discriminants() {
        assert_eq!(fundamental_discriminant(disc(3)), -3);
        assert_eq!(fundamental_discriminant(disc(12)), -3);
        assert_eq!(fundamental_discriminant(disc(20)), -20);
        assert_eq!(fundamental_discriminant(disc(4)), -4);
        assert_eq!(fundamental_discriminant(disc(16)), -4);
        assert_eq!(fundamental_discriminant(disc(7)), -7);
        assert_eq!(fundamental_discriminant(disc(28)), -7);
        assert_eq!(fundamental_discriminant(disc(8)), -8);
        assert_eq!(fundamental_discriminant(disc(48)), -3);
    }

    #[test]
    fn split_examples() {
        assert!(is_split(7, disc(3)).unwrap());
        assert!(!is_split(5, disc(3)).unwrap());
        assert!(is_split(2, disc(7)).unwrap());
        assert!(is_split(2, disc(15)).unwrap());
        assert!(is_split(13, disc(3)).unwrap());
        assert!(matches!(is_split(3, disc(3)), Err(Error::PrimeDividesD { p: 3, d: 3 })));
        assert!(is_split(6, disc(7)).is_err());
    }

    #[test]
    fn split_matches_legendre_of_minus_d_for_odd_p() {
        for d in (3..300u64).filter(|d| matches!(d % 4, 0 | 3)) {
            for p in [3u64, 5, 7, 11, 13, 17] {
                if d % p == 0 {
                    continue;
                }
                assert_eq!(
                    is_split(p, disc(d)).unwrap(),
                    kronecker(-(d as i64), p as i64) == 1,
                    "d={d} p={p}"
                );
            }
        }
    }

    #[test]
    fn split_is_a_field_invariant() {
        for d in (3..150u64).filter(|d| matches!(d % 4, 0 | 3)) {
            for p in [2u64, 3, 5, 7, 11] {
                if d % p == 0 {
                    continue;
                }
                for q in [3u64, 5, 7] {
                    if q == p || (d * q * q) % p == 0 {
                        continue;
                    }
                    assert_eq!(
                        is_split(p, disc(d)).unwrap(),
                        is_split(p, disc(d * q * q)).unwrap(),
                        "d={d} p={p} q={q}"
                    );
                }
            }
        }
    }

    #[test]
    fn kronecker_against_euler_criterion() {
        // For odd primes p, (a | p) agrees with Euler's criterion.
        for p in [3u64, 5, 7, 11, 13, 17, 19, 23].map(|p| p as i64) {
            for a in -30..30i64 {
                let e = {
                    let r = a.rem_euclid(p) as u64;
                    if r == 0 {
                        0
                    } else {
                        let mut acc = 1u64;
                        for _ in 0..(p - 1) / 2 {
                            acc = acc * r % p as u64;
                        }
                        if acc == 1 {
                            1
                        } else {
                            -1
                        }
                    }
                };
                assert_eq!(kronecker(a, p), e, "({a} | {p})");
            }
        }
    }

    #[test]
    fn kronecker_two_rule() {
        assert_eq!(kronecker(-7, 2), 1); // -7 === 1 (mod 8)
        assert_eq!(kronecker(-3, 2), -1); // -3 === 5 (mod 8)
        assert_eq!(kronecker(17, 2), 1);
        assert_eq!(kronecker(-4, 2), 0);
    }

    proptest! {
        #[test]
        fn kronecker_is_multiplicative_in_the_top(a in -60i64..60, b in -60i64..60, n in 1i64..120) {
            prop_assume!(n % 2 == 1);
            prop_assert_eq!(kronecker(a, n) * kronecker(b, n), kronecker(a * b, n));
        }

        #[test]
        fn brute_force_agrees_on_random_discriminants(d in 3u64..2000) {
            prop_assume!(matches!(d % 4, 0 | 3));
            prop_assert_eq!(reduced_forms(disc(d)), brute_force_forms(d));
        }
    }
}
