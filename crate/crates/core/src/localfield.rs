//! Arithmetic in a p-adic field L and its quadratic extensions.
//!
//! Elements are stored as `p^val * unit`. An *exact* element carries an
//! integer unit coprime to p (so every element of `Z[1/p]` with small
//! numerator is represented without loss). Anything else is *truncated*:
//! the unit is known modulo `p^prec`. A truncated element with `prec == 0`
//! is the big-O value `O(p^val)`, an unknown element of `p^val * Z_p`.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use thiserror::Error;

/// Marker for an exact unit.
pub const EXACT: u32 = u32::MAX;
/// Relative precision used when an exact value has to be truncated.
pub const DEFAULT_PREC: u32 = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("inverse of zero")]
    InverseOfZero,
    #[error("precision exhausted: valuation cannot be determined")]
    PrecisionExhausted,
    #[error("zero input where a unit or non-zero element is required")]
    ZeroInput,
    #[error("configuration: {0}")]
    Config(String),
}

pub type FieldResult<T> = Result<T, FieldError>;

pub fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u32;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Largest k with p^k < 2^62.
pub fn max_prec(p: u32) -> u32 {
    let mut k = 0;
    let mut acc: u128 = 1;
    while acc * (p as u128) < (1u128 << 62) {
        acc *= p as u128;
        k += 1;
    }
    k
}

pub fn ipow(p: u32, k: u32) -> i64 {
    (p as i64).pow(k)
}

fn modinv(a: i64, m: i64) -> i64 {
    let (mut r0, mut r1) = (a.rem_euclid(m) as i128, m as i128);
    let (mut s0, mut s1) = (1i128, 0i128);
    while r1 != 0 {
        let qt = r0 / r1;
        (r0, r1) = (r1, r0 - qt * r1);
        (s0, s1) = (s1, s0 - qt * s1);
    }
    debug_assert_eq!(r0, 1);
    (s0.rem_euclid(m as i128)) as i64
}

fn mulmod(a: i64, b: i64, m: i64) -> i64 {
    ((a as i128 * b as i128).rem_euclid(m as i128)) as i64
}

/// Legendre symbol (a | p) for odd prime p; 0 when p divides a.
pub fn legendre(a: i64, p: u32) -> i8 {
    let pm = p as i64;
    let a = a.rem_euclid(pm);
    if a == 0 {
        return 0;
    }
    let mut e = (pm - 1) / 2;
    let mut base = a;
    let mut acc = 1i64;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % pm;
        }
        base = base * base % pm;
        e >>= 1;
    }
    if acc == 1 {
        1
    } else {
        -1
    }
}

/// Smallest positive quadratic non-residue mod p.
pub fn smallest_nonresidue(p: u32) -> i64 {
    (2..p as i64).find(|&a| legendre(a, p) == -1).expect("odd prime has a non-residue")
}

#[derive(Clone, Copy, Debug)]
pub struct Padic {
    p: u32,
    zero: bool,
    val: i32,
    unit: i64,
    prec: u32,
}

impl Padic {
    pub fn zero(p: u32) -> Self {
        Padic { p, zero: true, val: 0, unit: 0, prec: EXACT }
    }

    pub fn one(p: u32) -> Self {
        Padic::from_i64(p, 1)
    }

    pub fn from_i64(p: u32, n: i64) -> Self {
        if n == 0 {
            return Padic::zero(p);
        }
        let mut v = 0;
        let mut u = n;
        while u % p as i64 == 0 {
            u /= p as i64;
            v += 1;
        }
        Padic { p, zero: false, val: v, unit: u, prec: EXACT }
    }

    /// `p^val * unit` with an exact integer unit (must be coprime to p).
    pub fn exact(p: u32, val: i32, unit: i64) -> Self {
        assert!(unit % p as i64 != 0, "unit part divisible by p");
        Padic { p, zero: false, val, unit, prec: EXACT }
    }

    /// `p^val * unit` with the unit known modulo `p^prec`.
    pub fn truncated(p: u32, val: i32, unit: i64, prec: u32) -> Self {
        if prec == 0 {
            return Padic::big_o(p, val);
        }
        let prec = prec.min(max_prec(p));
        let m = ipow(p, prec);
        let u = unit.rem_euclid(m);
        assert!(u % p as i64 != 0, "unit part divisible by p");
        Padic { p, zero: false, val, unit: u, prec }
    }

    /// The unknown element `O(p^val)`.
    pub fn big_o(p: u32, val: i32) -> Self {
        Padic { p, zero: false, val, unit: 0, prec: 0 }
    }

    pub fn uniformizer_pow(p: u32, k: i32) -> Self {
        Padic::exact(p, k, 1)
    }

    pub fn from_ratio(p: u32, num: i64, den: i64) -> Self {
        assert!(den != 0);
        Padic::from_i64(p, num).mul(Padic::from_i64(p, den).inv().expect("nonzero"))
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn is_exact(&self) -> bool {
        self.zero || self.prec == EXACT
    }

    /// True when the value is only known to lie in `p^val * Z_p`.
    pub fn is_big_o(&self) -> bool {
        !self.zero && self.prec == 0
    }

    pub fn valuation(&self) -> FieldResult<i32> {
        if self.zero {
            return Err(FieldError::ZeroInput);
        }
        if self.prec == 0 {
            return Err(FieldError::PrecisionExhausted);
        }
        Ok(self.val)
    }

    /// Valuation with zero mapped to `i32::MAX`.
    pub fn val_or_inf(&self) -> FieldResult<i32> {
        if self.zero {
            Ok(i32::MAX)
        } else {
            self.valuation()
        }
    }

    /// Lower bound on the valuation, always available.
    pub fn val_lower_bound(&self) -> i32 {
        if self.zero {
            i32::MAX
        } else {
            self.val
        }
    }

    pub fn relative_prec(&self) -> u32 {
        self.prec
    }

    /// Absolute precision (i64::MAX when exact).
    pub fn abs_prec(&self) -> i64 {
        if self.is_exact() {
            i64::MAX
        } else {
            self.val as i64 + self.prec as i64
        }
    }

    /// Unit part modulo `p^k`.
    pub fn unit_residue(&self, k: u32) -> FieldResult<i64> {
        if self.zero {
            return Err(FieldError::ZeroInput);
        }
        if self.prec != EXACT && self.prec < k {
            return Err(FieldError::PrecisionExhausted);
        }
        Ok(self.unit.rem_euclid(ipow(self.p, k)))
    }

    /// Raw unit (exact integer, or residue mod p^prec).
    pub fn unit_raw(&self) -> i64 {
        self.unit
    }

    pub fn in_ideal(&self, m: i32) -> FieldResult<bool> {
        if self.zero {
            return Ok(true);
        }
        if self.prec == 0 {
            return if self.val >= m { Ok(true) } else { Err(FieldError::PrecisionExhausted) };
        }
        Ok(self.val >= m)
    }

    pub fn in_shell(&self, m: i32) -> FieldResult<bool> {
        if self.zero {
            return Ok(false);
        }
        if self.prec == 0 {
            return if self.val > m { Ok(false) } else { Err(FieldError::PrecisionExhausted) };
        }
        Ok(self.val == m)
    }

    fn to_truncated(self, rel: u32) -> Self {
        if self.zero || self.prec != EXACT {
            return self;
        }
        Padic::truncated(self.p, self.val, self.unit, rel)
    }

    pub fn add(self, other: Padic) -> Padic {
        assert_eq!(self.p, other.p, "mixed primes");
        if self.zero {
            return other;
        }
        if other.zero {
            return self;
        }
        let p = self.p;
        let (a, b) = if self.val <= other.val { (self, other) } else { (other, self) };
        let d = (b.val - a.val) as u32;
        if a.prec == EXACT && b.prec == EXACT {
            let s = (p as i64)
                .checked_pow(d)
                .and_then(|pd| b.unit.checked_mul(pd))
                .and_then(|t| t.checked_add(a.unit));
            if let Some(s) = s {
                if s == 0 {
                    return Padic::zero(p);
                }
                let z = Padic::from_i64(p, s);
                return Padic { val: z.val + a.val, ..z };
            }
            return a.to_truncated(DEFAULT_PREC + d).add(b.to_truncated(DEFAULT_PREC));
        }
        let abs = a.abs_prec().min(b.abs_prec());
        let mp = max_prec(p) as i64;
        let rel = (abs - a.val as i64).min(mp);
        if rel <= 0 {
            return Padic::big_o(p, abs.min(i32::MAX as i64) as i32);
        }
        let rel = rel as u32;
        let m = ipow(p, rel);
        let mut s = a.unit.rem_euclid(m);
        if d < rel {
            let bm = ipow(p, rel - d);
            let t = b.unit.rem_euclid(bm) * ipow(p, d);
            s = (s + t).rem_euclid(m);
        }
        if s == 0 {
            return Padic::big_o(p, a.val + rel as i32);
        }
        let mut k = 0u32;
        while s % p as i64 == 0 {
            s /= p as i64;
            k += 1;
        }
        Padic::truncated(p, a.val + k as i32, s, rel - k)
    }

    pub fn neg(self) -> Padic {
        if self.zero || self.prec == 0 {
            return self;
        }
        if self.prec == EXACT {
            return Padic { unit: -self.unit, ..self };
        }
        Padic::truncated(self.p, self.val, -self.unit, self.prec)
    }

    pub fn sub(self, other: Padic) -> Padic {
        self.add(other.neg())
    }

    pub fn mul(self, other: Padic) -> Padic {
        assert_eq!(self.p, other.p, "mixed primes");
        let p = self.p;
        if self.zero || other.zero {
            return Padic::zero(p);
        }
        let val = self.val + other.val;
        if self.prec == 0 || other.prec == 0 {
            return Padic::big_o(p, val);
        }
        if self.prec == EXACT && other.prec == EXACT {
            if let Some(u) = self.unit.checked_mul(other.unit) {
                return Padic { p, zero: false, val, unit: u, prec: EXACT };
            }
            return self.to_truncated(DEFAULT_PREC).mul(other.to_truncated(DEFAULT_PREC));
        }
        let prec = self.prec.min(other.prec).min(max_prec(p));
        let m = ipow(p, prec);
        Padic::truncated(p, val, mulmod(self.unit, other.unit, m), prec)
    }

    pub fn inv(self) -> FieldResult<Padic> {
        if self.zero {
            return Err(FieldError::InverseOfZero);
        }
        if self.prec == 0 {
            return Err(FieldError::PrecisionExhausted);
        }
        if self.prec == EXACT && (self.unit == 1 || self.unit == -1) {
            return Ok(Padic { val: -self.val, ..self });
        }
        let prec = if self.prec == EXACT { DEFAULT_PREC } else { self.prec };
        let m = ipow(self.p, prec);
        Ok(Padic::truncated(self.p, -self.val, modinv(self.unit, m), prec))
    }

    pub fn div(self, other: Padic) -> FieldResult<Padic> {
        Ok(self.mul(other.inv()?))
    }

    pub fn pow(self, k: u32) -> Padic {
        let mut acc = Padic::one(self.p);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Whether the two elements cannot be distinguished at the available precision.
    pub fn approx_eq(&self, other: &Padic) -> bool {
        let d = self.sub(*other);
        d.zero || d.prec == 0
    }

    /// Legendre symbol of the leading unit digit.
    pub fn unit_legendre(&self) -> FieldResult<i8> {
        Ok(legendre(self.unit_residue(1)?, self.p))
    }

    /// Square root when it exists (Hensel lifting of the unit part).
    pub fn sqrt(&self) -> Option<Padic> {
        if self.zero {
            return Some(*self);
        }
        if self.prec == 0 || self.val % 2 != 0 {
            return None;
        }
        let p = self.p;
        if self.unit_legendre().ok()? != 1 {
            return None;
        }
        if self.prec == EXACT && self.unit > 0 {
            let r = (self.unit as f64).sqrt().round() as i64;
            for c in [r - 1, r, r + 1] {
                if c > 0 && c * c == self.unit {
                    return Some(Padic::exact(p, self.val / 2, c));
                }
            }
        }
        let prec = if self.prec == EXACT { DEFAULT_PREC } else { self.prec };
        let u0 = self.unit.rem_euclid(p as i64);
        let mut r = (1..p as i64).find(|r| (r * r - u0) % p as i64 == 0)?;
        let mut k = 1;
        while k < prec {
            k = (2 * k).min(prec);
            let m = ipow(p, k);
            let f = (mulmod(r, r, m) - self.unit.rem_euclid(m)).rem_euclid(m);
            let corr = mulmod(f, modinv(2 * r, m), m);
            r = (r - corr).rem_euclid(m);
        }
        Some(Padic::truncated(p, self.val / 2, r, prec))
    }

    /// p-adic fractional part {x} in [0,1).
    pub fn psi_angle(&self) -> FieldResult<Ratio<i64>> {
        if self.zero || self.val >= 0 {
            return Ok(Ratio::from_integer(0));
        }
        let k = (-self.val) as u32;
        if self.prec != EXACT && self.prec < k {
            return Err(FieldError::PrecisionExhausted);
        }
        let m = ipow(self.p, k);
        Ok(Ratio::new(self.unit.rem_euclid(m), m))
    }

    /// Rational value for exact elements with small numerator/denominator.
    pub fn to_ratio(&self) -> Option<Ratio<i64>> {
        if self.zero {
            return Some(Ratio::from_integer(0));
        }
        if self.prec != EXACT {
            return None;
        }
        let pv = (self.p as i64).checked_pow(self.val.unsigned_abs())?;
        if self.val >= 0 {
            Some(Ratio::from_integer(self.unit.checked_mul(pv)?))
        } else {
            Some(Ratio::new(self.unit, pv))
        }
    }
}

impl PartialEq for Padic {
    fn eq(&self, other: &Self) -> bool {
        self.approx_eq(other)
    }
}

impl fmt::Display for Padic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.zero {
            return write!(f, "0");
        }
        if self.prec == 0 {
            return write!(f, "O({}^{})", self.p, self.val);
        }
        if let Some(r) = self.to_ratio() {
            return write!(f, "{}", r);
        }
        if self.prec == EXACT {
            write!(f, "{}*{}^{}", self.unit, self.p, self.val)
        } else {
            write!(f, "{}*{}^{}+O({}^{})", self.unit, self.p, self.val, self.p, self.val + self.prec as i32)
        }
    }
}

impl Add for Padic {
    type Output = Padic;
    fn add(self, o: Padic) -> Padic {
        Padic::add(self, o)
    }
}
impl Sub for Padic {
    type Output = Padic;
    fn sub(self, o: Padic) -> Padic {
        Padic::sub(self, o)
    }
}
impl Mul for Padic {
    type Output = Padic;
    fn mul(self, o: Padic) -> Padic {
        Padic::mul(self, o)
    }
}
impl Neg for Padic {
    type Output = Padic;
    fn neg(self) -> Padic {
        Padic::neg(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtKind {
    Split,
    Inert,
    Ramified,
}

impl ExtKind {
    pub fn parse(s: &str) -> Option<ExtKind> {
        match s {
            "split" => Some(ExtKind::Split),
            "inert" => Some(ExtKind::Inert),
            "ramified" => Some(ExtKind::Ramified),
            _ => None,
        }
    }
    pub fn name(&self) -> &'static str {
        match self {
            ExtKind::Split => "split",
            ExtKind::Inert => "inert",
            ExtKind::Ramified => "ramified",
        }
    }
}

/// Residue characteristic, extension type and the defining element delta.
#[derive(Clone, Copy, Debug)]
pub struct FieldParams {
    pub p: u32,
    pub q: u32,
    pub kind: ExtKind,
    pub delta: Padic,
    /// chi at the uniformizer p (ramified only; 1 otherwise).
    pub chi_varpi: i8,
}

impl FieldParams {
    pub fn new(p: u32, kind: ExtKind) -> FieldResult<Self> {
        FieldParams::with_alt(p, kind, false)
    }

    /// `alt` selects, in the ramified case, delta = eps * p with eps the
    /// smallest non-residue instead of delta = p.
    pub fn with_alt(p: u32, kind: ExtKind, alt: bool) -> FieldResult<Self> {
        if p == 2 || !is_prime(p) {
            return Err(FieldError::Config(format!("p = {} is not an odd prime", p)));
        }
        if p > 1000 {
            return Err(FieldError::Config(format!("p = {} is outside the supported range", p)));
        }
        let delta = match kind {
            ExtKind::Split => Padic::one(p),
            ExtKind::Inert => Padic::from_i64(p, smallest_nonresidue(p)),
            ExtKind::Ramified => {
                let eps = if alt { smallest_nonresidue(p) } else { 1 };
                Padic::exact(p, 1, eps)
            }
        };
        // chi(-delta) = 1 forces chi(p) = Legendre(-eps).
        let chi_varpi = match kind {
            ExtKind::Ramified => legendre(-delta.unit_raw(), p),
            _ => 1,
        };
        Ok(FieldParams { p, q: p, kind, delta, chi_varpi })
    }

    pub fn legendre_m1(&self) -> i8 {
        legendre(-1, self.p)
    }

    /// The quadratic character attached to E/L.
    pub fn chi(&self, x: &Padic) -> FieldResult<i8> {
        if x.is_zero() {
            return Err(FieldError::ZeroInput);
        }
        let v = x.valuation()?;
        Ok(match self.kind {
            ExtKind::Split => 1,
            ExtKind::Inert => {
                if v.rem_euclid(2) == 0 {
                    1
                } else {
                    -1
                }
            }
            ExtKind::Ramified => {
                let l = x.unit_legendre()?;
                if v.rem_euclid(2) == 0 {
                    l
                } else {
                    l * self.chi_varpi
                }
            }
        })
    }

    pub fn padic(&self, n: i64) -> Padic {
        Padic::from_i64(self.p, n)
    }

    pub fn ext(&self, a: i64, b: i64) -> ExtElement {
        ExtElement { a: self.padic(a), b: self.padic(b) }
    }
}

/// a + b*sqrt(delta) (non-split), or the pair (a, b) in L x L (split).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtElement {
    pub a: Padic,
    pub b: Padic,
}

impl ExtElement {
    pub fn new(a: Padic, b: Padic) -> Self {
        ExtElement { a, b }
    }

    pub fn from_base(fp: &FieldParams, a: Padic) -> Self {
        match fp.kind {
            ExtKind::Split => ExtElement { a, b: a },
            _ => ExtElement { a, b: Padic::zero(fp.p) },
        }
    }

    pub fn zero(fp: &FieldParams) -> Self {
        ExtElement { a: Padic::zero(fp.p), b: Padic::zero(fp.p) }
    }

    pub fn one(fp: &FieldParams) -> Self {
        ExtElement::from_base(fp, Padic::one(fp.p))
    }

    /// sqrt(delta); the uniformizer of E in the ramified case.
    pub fn sqrt_delta(fp: &FieldParams) -> Self {
        ExtElement { a: Padic::zero(fp.p), b: Padic::one(fp.p) }
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn add(&self, o: &ExtElement) -> ExtElement {
        ExtElement { a: self.a + o.a, b: self.b + o.b }
    }

    pub fn sub(&self, o: &ExtElement) -> ExtElement {
        ExtElement { a: self.a - o.a, b: self.b - o.b }
    }

    pub fn neg(&self) -> ExtElement {
        ExtElement { a: -self.a, b: -self.b }
    }

    pub fn scale(&self, t: Padic) -> ExtElement {
        ExtElement { a: self.a * t, b: self.b * t }
    }

    pub fn mul(&self, o: &ExtElement, fp: &FieldParams) -> ExtElement {
        match fp.kind {
            ExtKind::Split => ExtElement { a: self.a * o.a, b: self.b * o.b },
            _ => ExtElement {
                a: self.a * o.a + fp.delta * self.b * o.b,
                b: self.a * o.b + self.b * o.a,
            },
        }
    }

    pub fn conj(&self, fp: &FieldParams) -> ExtElement {
        match fp.kind {
            ExtKind::Split => ExtElement { a: self.b, b: self.a },
            _ => ExtElement { a: self.a, b: -self.b },
        }
    }

    pub fn norm(&self, fp: &FieldParams) -> Padic {
        match fp.kind {
            ExtKind::Split => self.a * self.b,
            _ => self.a * self.a - fp.delta * self.b * self.b,
        }
    }

    pub fn trace(&self, fp: &FieldParams) -> Padic {
        match fp.kind {
            ExtKind::Split => self.a + self.b,
            _ => self.a + self.a,
        }
    }

    pub fn inv(&self, fp: &FieldParams) -> FieldResult<ExtElement> {
        match fp.kind {
            ExtKind::Split => Ok(ExtElement { a: self.a.inv()?, b: self.b.inv()? }),
            _ => {
                let n = self.norm(fp);
                if n.is_zero() {
                    return Err(FieldError::InverseOfZero);
                }
                let ni = n.inv()?;
                let c = self.conj(fp);
                Ok(c.scale(ni))
            }
        }
    }

    /// Normalized valuation on E (non-split only).
    pub fn val_e(&self, fp: &FieldParams) -> FieldResult<i32> {
        if self.is_zero() {
            return Err(FieldError::ZeroInput);
        }
        match fp.kind {
            ExtKind::Split => Err(FieldError::Config("no valuation on L x L".into())),
            ExtKind::Inert => {
                let va = self.a.val_or_inf()?;
                let vb = self.b.val_or_inf()?;
                Ok(va.min(vb))
            }
            ExtKind::Ramified => {
                let va = self.a.val_or_inf()?.saturating_mul(2);
                let vb = self.b.val_or_inf()?.saturating_mul(2).saturating_add(1);
                Ok(va.min(vb))
            }
        }
    }

    /// Valuation on E with zero mapped to i32::MAX.
    pub fn val_e_or_inf(&self, fp: &FieldParams) -> FieldResult<i32> {
        if self.is_zero() {
            Ok(i32::MAX)
        } else {
            self.val_e(fp)
        }
    }

    /// Membership in the ideal P^m of o_E.
    pub fn in_ideal_e(&self, m: i32, fp: &FieldParams) -> FieldResult<bool> {
        let (ma, mb) = e_ideal_levels(fp.kind, m);
        Ok(self.a.in_ideal(ma)? && self.b.in_ideal(mb)?)
    }

    /// psi_E = psi composed with the trace.
    pub fn psi_e_angle(&self, fp: &FieldParams) -> FieldResult<Ratio<i64>> {
        self.trace(fp).psi_angle()
    }
}

/// Coordinate levels (for a and b) cutting out P^m inside o_E = o + o*sqrt(delta).
pub fn e_ideal_levels(kind: ExtKind, m: i32) -> (i32, i32) {
    match kind {
        ExtKind::Ramified => (div_ceil(m, 2), div_ceil(m - 1, 2)),
        _ => (m, m),
    }
}

pub fn div_ceil(a: i32, b: i32) -> i32 {
    -((-a).div_euclid(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valuations_add_under_mul() {
        let x = Padic::exact(5, 2, 3);
        let y = Padic::exact(5, -1, 2);
        assert_eq!((x * y).valuation().unwrap(), 1);
    }

    #[test]
    fn additive_inverse_is_exact_zero() {
        let x = Padic::exact(3, -2, 7);
        assert!((x + (-x)).is_zero());
        let t = Padic::truncated(3, 1, 5, 4);
        let z = t - t;
        assert!(z.is_big_o() || z.is_zero());
    }

    #[test]
    fn inverse_of_uniformizer_times_unit() {
        let x = Padic::exact(5, 1, 2);
        let y = x.inv().unwrap();
        assert_eq!(y.valuation().unwrap(), -1);
        assert_eq!(y.unit_residue(1).unwrap(), 3);
        assert_eq!(x * y, Padic::one(5));
        assert_eq!(Padic::zero(5).inv(), Err(FieldError::InverseOfZero));
    }

    #[test]
    fn cancellation_reports_precision() {
        let a = Padic::truncated(3, 0, 1, 2);
        let b = Padic::truncated(3, 0, 8, 2);
        let s = a + b;
        assert!(s.is_big_o());
        assert_eq!(s.valuation(), Err(FieldError::PrecisionExhausted));
        assert!(s.in_ideal(2).unwrap());
    }

    #[test]
    fn norm_and_trace_small_cases() {
        let fp = FieldParams::new(5, ExtKind::Inert).unwrap();
        let x = fp.ext(3, 0);
        assert_eq!(x.norm(&fp), fp.padic(9));
        let s = fp.ext(0, 1);
        assert_eq!(s.norm(&fp), -fp.delta);
        let fs = FieldParams::new(5, ExtKind::Split).unwrap();
        let y = fs.ext(2, 3);
        assert_eq!(y.norm(&fs), fs.padic(6));
        assert_eq!(y.trace(&fs), fs.padic(5));
        assert_eq!(y.conj(&fs).conj(&fs), y);
    }

    #[test]
    fn inert_norm_valuation_even_at_depth_three() {
        let fp = FieldParams::new(3, ExtKind::Inert).unwrap();
        for a in 0..27 {
            for b in 0..27 {
                if a == 0 && b == 0 {
                    continue;
                }
                let n = fp.ext(a, b).norm(&fp);
                assert_eq!(n.valuation().unwrap() % 2, 0);
            }
        }
    }

    #[test]
    fn psi_angle_examples() {
        assert_eq!(Padic::from_i64(5, 7).psi_angle().unwrap(), Ratio::from_integer(0));
        assert_eq!(Padic::exact(5, -1, 1).psi_angle().unwrap(), Ratio::new(1, 5));
        let s: f64 = (1..5)
            .map(|u| {
                let a = Padic::exact(5, -1, u).psi_angle().unwrap();
                (2.0 * std::f64::consts::PI * (*a.numer() as f64 / *a.denom() as f64)).cos()
            })
            .sum();
        assert!((s + 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_split_is_trivial_and_squares_are_plus() {
        let fs = FieldParams::new(7, ExtKind::Split).unwrap();
        assert_eq!(fs.chi(&Padic::exact(7, 3, 3)).unwrap(), 1);
        for kind in [ExtKind::Inert, ExtKind::Ramified] {
            let fp = FieldParams::new(7, kind).unwrap();
            for u in 1..7 {
                assert_eq!(fp.chi(&fp.padic(u * u)).unwrap(), 1);
            }
        }
    }

    #[test]
    fn sqrt_lifts() {
        let x = Padic::from_i64(7, 2);
        let r = x.sqrt().unwrap();
        assert_eq!(r * r, x);
        assert!(Padic::from_i64(7, 3).sqrt().is_none());
        assert!(Padic::exact(7, 1, 1).sqrt().is_none());
    }

    #[test]
    fn e_ideal_levels_match_valuation() {
        let fp = FieldParams::new(3, ExtKind::Ramified).unwrap();
        for a in -9..9i64 {
            for b in -9..9i64 {
                let x = fp.ext(a, b);
                if x.is_zero() {
                    continue;
                }
                let v = x.val_e(&fp).unwrap();
                assert!(x.in_ideal_e(v, &fp).unwrap());
                assert!(!x.in_ideal_e(v + 1, &fp).unwrap());
            }
        }
    }
}
