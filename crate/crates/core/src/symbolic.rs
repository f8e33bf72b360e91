//! Exact scalars: Gaussian-rational combinations of monomials
//! `q^{a/2} * u^b * gamma^k * tau^e`, with `gamma^4 = 1` and `tau^2 = (-1|p) q`.
//!
//! `u` stands for `q^{-s}`. `gamma` is the Weil index of X (a fourth root of
//! unity left unevaluated) and `tau` the quadratic Gauss sum mod p.

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

pub type Gauss = Complex<BigRational>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mono {
    /// Exponent of q^{1/2}.
    pub q2: i32,
    /// Exponent of u = q^{-s}.
    pub u: i32,
    /// Exponent of gamma, mod 4.
    pub gamma: u8,
    /// Exponent of tau, 0 or 1.
    pub tau: u8,
}

impl Mono {
    pub const ONE: Mono = Mono { q2: 0, u: 0, gamma: 0, tau: 0 };
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn gauss_real(r: BigRational) -> Gauss {
    Complex::new(r, BigRational::zero())
}

#[derive(Clone, Debug, Default)]
pub struct SymbolicScalar {
    terms: BTreeMap<Mono, Gauss>,
    /// Legendre symbol (-1|p), needed to reduce tau^2; 0 when not yet bound.
    lm1: i8,
}

impl PartialEq for SymbolicScalar {
    fn eq(&self, other: &Self) -> bool {
        self.sub(other).is_zero()
    }
}

impl SymbolicScalar {
    pub fn zero() -> Self {
        SymbolicScalar::default()
    }

    pub fn one() -> Self {
        SymbolicScalar::monomial(gauss_real(BigRational::one()), Mono::ONE)
    }

    pub fn from_rational(r: BigRational) -> Self {
        SymbolicScalar::monomial(gauss_real(r), Mono::ONE)
    }

    pub fn from_ratio(n: i64, d: i64) -> Self {
        SymbolicScalar::from_rational(rat(n, d))
    }

    pub fn from_int(n: i64) -> Self {
        SymbolicScalar::from_ratio(n, 1)
    }

    pub fn i() -> Self {
        SymbolicScalar::monomial(Complex::new(BigRational::zero(), BigRational::one()), Mono::ONE)
    }

    pub fn monomial(c: Gauss, m: Mono) -> Self {
        let mut s = SymbolicScalar::zero();
        if !c.is_zero() {
            s.terms.insert(m, c);
        }
        s
    }

    pub fn q_half(k: i32) -> Self {
        SymbolicScalar::monomial(gauss_real(BigRational::one()), Mono { q2: k, ..Mono::ONE })
    }

    pub fn q_pow(k: i32) -> Self {
        SymbolicScalar::q_half(2 * k)
    }

    pub fn u_pow(k: i32) -> Self {
        SymbolicScalar::monomial(gauss_real(BigRational::one()), Mono { u: k, ..Mono::ONE })
    }

    pub fn gamma_pow(k: i32) -> Self {
        SymbolicScalar::monomial(
            gauss_real(BigRational::one()),
            Mono { gamma: k.rem_euclid(4) as u8, ..Mono::ONE },
        )
    }

    pub fn tau(lm1: i8) -> Self {
        let mut s = SymbolicScalar::monomial(gauss_real(BigRational::one()), Mono { tau: 1, ..Mono::ONE });
        s.lm1 = lm1;
        s
    }

    pub fn sign(s: i8) -> Self {
        SymbolicScalar::from_int(s as i64)
    }

    pub fn with_lm1(mut self, lm1: i8) -> Self {
        self.lm1 = lm1;
        self
    }

    pub fn lm1(&self) -> i8 {
        self.lm1
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Gauss)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn merge_lm1(a: i8, b: i8) -> i8 {
        if a == 0 {
            b
        } else {
            assert!(b == 0 || a == b, "scalars bound to different primes");
            a
        }
    }

    fn insert(&mut self, m: Mono, c: Gauss) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(m).or_insert_with(Gauss::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn add(&self, o: &SymbolicScalar) -> SymbolicScalar {
        let mut r = self.clone();
        r.lm1 = Self::merge_lm1(self.lm1, o.lm1);
        for (m, c) in &o.terms {
            r.insert(*m, c.clone());
        }
        r
    }

    pub fn neg(&self) -> SymbolicScalar {
        SymbolicScalar {
            terms: self.terms.iter().map(|(m, c)| (*m, -c.clone())).collect(),
            lm1: self.lm1,
        }
    }

    pub fn sub(&self, o: &SymbolicScalar) -> SymbolicScalar {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &SymbolicScalar) -> SymbolicScalar {
        let lm1 = Self::merge_lm1(self.lm1, o.lm1);
        let mut r = SymbolicScalar { terms: BTreeMap::new(), lm1 };
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                let mut c = c1 * c2;
                let mut m = Mono {
                    q2: m1.q2 + m2.q2,
                    u: m1.u + m2.u,
                    gamma: (m1.gamma + m2.gamma) % 4,
                    tau: m1.tau + m2.tau,
                };
                if m.tau == 2 {
                    assert!(lm1 != 0, "tau^2 needs the prime bound");
                    m.tau = 0;
                    m.q2 += 2;
                    if lm1 < 0 {
                        c = -c;
                    }
                }
                r.insert(m, c);
            }
        }
        r
    }

    pub fn scale(&self, r: &BigRational) -> SymbolicScalar {
        self.mul(&SymbolicScalar::from_rational(r.clone()))
    }

    pub fn scale_int(&self, k: i64) -> SymbolicScalar {
        self.scale(&rat(k, 1))
    }

    /// Complex conjugate: gamma -> gamma^{-1}, tau -> (-1|p) tau.
    pub fn conj(&self) -> SymbolicScalar {
        let mut r = SymbolicScalar { terms: BTreeMap::new(), lm1: self.lm1 };
        for (m, c) in &self.terms {
            let mut c = c.conj();
            if m.tau == 1 {
                assert!(self.lm1 != 0);
                if self.lm1 < 0 {
                    c = -c;
                }
            }
            r.insert(Mono { gamma: (4 - m.gamma) % 4, ..*m }, c);
        }
        r
    }

    /// Single-monomial scalar as (coefficient, monomial).
    pub fn as_monomial(&self) -> Option<(Gauss, Mono)> {
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            Some((c.clone(), *m))
        } else {
            None
        }
    }

    /// Inverse of a single monomial with a nonzero coefficient.
    pub fn inv_monomial(&self) -> Option<SymbolicScalar> {
        let (c, m) = self.as_monomial()?;
        let n = c.norm_sqr();
        let ci = Complex::new(c.re.clone() / n.clone(), -c.im.clone() / n);
        let mut r = SymbolicScalar::monomial(
            ci,
            Mono { q2: -m.q2, u: -m.u, gamma: (4 - m.gamma) % 4, tau: 0 },
        );
        r.lm1 = self.lm1;
        if m.tau == 1 {
            // 1/tau = (-1|p) tau / q
            assert!(self.lm1 != 0);
            r = r.mul(&SymbolicScalar::tau(self.lm1)).mul(&SymbolicScalar::q_pow(-1));
            if self.lm1 < 0 {
                r = r.neg();
            }
        }
        Some(r)
    }

    pub fn div_monomial(&self, d: &SymbolicScalar) -> Option<SymbolicScalar> {
        Some(self.mul(&d.inv_monomial()?))
    }

    /// Fold q into the coefficients, leaving at most one factor sqrt(q).
    pub fn at_q(&self, q: u32) -> SymbolicScalar {
        let mut r = SymbolicScalar { terms: BTreeMap::new(), lm1: self.lm1 };
        for (m, c) in &self.terms {
            let half = m.q2.rem_euclid(2);
            let k = (m.q2 - half) / 2;
            let f = if k >= 0 {
                rat((q as i64).pow(k as u32), 1)
            } else {
                rat(1, (q as i64).pow((-k) as u32))
            };
            r.insert(Mono { q2: half, ..*m }, c * f);
        }
        r
    }

    /// Is this a plain rational (no q, u, gamma, tau, no imaginary part)?
    pub fn as_rational(&self) -> Option<BigRational> {
        if self.is_zero() {
            return Some(BigRational::zero());
        }
        let (c, m) = self.as_monomial()?;
        if m == Mono::ONE && c.im.is_zero() {
            Some(c.re)
        } else {
            None
        }
    }

    /// Numeric value given the formal constants.
    pub fn eval(&self, q: f64, gamma: Complex<f64>, tau: Complex<f64>, u: Complex<f64>) -> Complex<f64> {
        let mut acc = Complex::new(0.0, 0.0);
        for (m, c) in &self.terms {
            let cf = Complex::new(c.re.to_f64().unwrap_or(f64::NAN), c.im.to_f64().unwrap_or(f64::NAN));
            let mut t = cf * q.powf(m.q2 as f64 / 2.0) * u.powi(m.u) * gamma.powi(m.gamma as i32);
            if m.tau == 1 {
                t *= tau;
            }
            acc += t;
        }
        acc
    }

    pub fn max_abs_coeff_is_unimodular_monomial(&self, q: u32) -> bool {
        match self.at_q(q).as_monomial() {
            Some((c, m)) => {
                if m.u != 0 {
                    return false;
                }
                // |c| * q^{q2/2} * q^{tau/2} == 1
                let n = c.norm_sqr();
                let e = m.q2 + m.tau as i32;
                let target = if e >= 0 {
                    rat(1, (q as i64).pow(e as u32))
                } else {
                    rat((q as i64).pow((-e) as u32), 1)
                };
                n == target
            }
            None => false,
        }
    }
}

fn fmt_rat(r: &BigRational) -> String {
    if r.is_integer() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn fmt_coeff(c: &Gauss) -> String {
    if c.im.is_zero() {
        fmt_rat(&c.re)
    } else if c.re.is_zero() {
        format!("{}i", fmt_rat(&c.im))
    } else {
        let sign = if c.im.is_negative() { "-" } else { "+" };
        format!("({}{}{}i)", fmt_rat(&c.re), sign, fmt_rat(&c.im.abs()))
    }
}

impl fmt::Display for SymbolicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(m, c)| {
                let mut s = fmt_coeff(c);
                if m.q2 != 0 {
                    if m.q2 % 2 == 0 {
                        s.push_str(&format!("·q^{{{}}}", m.q2 / 2));
                    } else {
                        s.push_str(&format!("·q^{{{}/2}}", m.q2));
                    }
                }
                if m.u != 0 {
                    s.push_str(&format!("·u^{{{}}}", m.u));
                }
                if m.gamma != 0 {
                    s.push_str(&format!("·γ^{{{}}}", m.gamma));
                }
                if m.tau != 0 {
                    s.push_str("·τ");
                }
                s
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

#[derive(Serialize, Deserialize)]
struct TermDto {
    re: String,
    im: String,
    q2: i32,
    u: i32,
    gamma: u8,
    tau: u8,
}

#[derive(Serialize, Deserialize)]
struct ScalarDto {
    lm1: i8,
    terms: Vec<TermDto>,
}

fn parse_rat(s: &str) -> Result<BigRational, String> {
    let mut it = s.split('/');
    let n: BigInt = it.next().ok_or("empty")?.trim().parse().map_err(|e| format!("{e}"))?;
    let d: BigInt = match it.next() {
        Some(d) => d.trim().parse().map_err(|e| format!("{e}"))?,
        None => BigInt::one(),
    };
    if d.is_zero() {
        return Err("zero denominator".into());
    }
    Ok(BigRational::new(n, d))
}

impl Serialize for SymbolicScalar {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let dto = ScalarDto {
            lm1: self.lm1,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| TermDto {
                    re: fmt_rat(&c.re),
                    im: fmt_rat(&c.im),
                    q2: m.q2,
                    u: m.u,
                    gamma: m.gamma,
                    tau: m.tau,
                })
                .collect(),
        };
        dto.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymbolicScalar {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let dto = ScalarDto::deserialize(d)?;
        let mut r = SymbolicScalar { terms: BTreeMap::new(), lm1: dto.lm1 };
        for t in dto.terms {
            let re = parse_rat(&t.re).map_err(serde::de::Error::custom)?;
            let im = parse_rat(&t.im).map_err(serde::de::Error::custom)?;
            if t.gamma > 3 || t.tau > 1 {
                return Err(serde::de::Error::custom("monomial exponents out of range"));
            }
            r.insert(Mono { q2: t.q2, u: t.u, gamma: t.gamma, tau: t.tau }, Complex::new(re, im));
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_squared_reduces() {
        let t = SymbolicScalar::tau(-1);
        let t2 = t.mul(&t);
        assert_eq!(t2, SymbolicScalar::q_pow(1).neg());
        let t = SymbolicScalar::tau(1);
        assert_eq!(t.mul(&t.conj()), SymbolicScalar::q_pow(1));
    }

    #[test]
    fn gamma_has_order_four() {
        let g = SymbolicScalar::gamma_pow(1);
        let g4 = g.mul(&g).mul(&g).mul(&g);
        assert_eq!(g4, SymbolicScalar::one());
    }

    #[test]
    fn monomial_inverse() {
        let x = SymbolicScalar::tau(-1).mul(&SymbolicScalar::q_half(-3)).mul(&SymbolicScalar::gamma_pow(1)).scale_int(2);
        let y = x.inv_monomial().unwrap();
        assert_eq!(x.mul(&y), SymbolicScalar::one());
    }

    #[test]
    fn display_and_json_round_trip() {
        let x = SymbolicScalar::from_ratio(5, 2)
            .add(&SymbolicScalar::q_half(-1).mul(&SymbolicScalar::u_pow(1)).scale(&rat(1, 4)));
        let s = x.to_string();
        assert!(s.contains("5/2"));
        assert!(s.contains("q^{-1/2}"));
        let j = serde_json::to_string(&x).unwrap();
        let y: SymbolicScalar = serde_json::from_str(&j).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn at_q_folds_integer_powers() {
        let x = SymbolicScalar::q_pow(2).add(&SymbolicScalar::q_half(3));
        let y = x.at_q(3);
        assert_eq!(y, SymbolicScalar::from_int(9).add(&SymbolicScalar::q_half(1).scale_int(3)));
    }
}
