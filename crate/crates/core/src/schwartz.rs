//! Schwartz functions on X and X x X as finite sums of coordinate boxes.
//!
//! A term is `coeff * prod_i [chi(c_i)] 1_{S_i}(c_i) * prod_k 1[Q_k in p^{m_k}]`
//! where the `S_i` are fractional ideals, unit shells, everything or {0},
//! and the `Q_k` are the quadratic forms <x,x>, <x,y>, <y,y>.

use crate::localfield::{e_ideal_levels, ExtKind, FieldError, FieldParams, FieldResult, Padic};
use crate::quadspace::{QuadSpace, XPoint};
use crate::symbolic::SymbolicScalar;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

pub const SCHEMA: &str = "thetalift.schwartz/1";
/// Point budget for exhaustive scans.
pub const SCAN_BUDGET: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CoordSet {
    All,
    Zero,
    Ideal(i32),
    Shell(i32),
}

impl CoordSet {
    pub fn contains(&self, x: &Padic) -> FieldResult<bool> {
        match self {
            CoordSet::All => Ok(true),
            CoordSet::Zero => Ok(x.is_zero()),
            CoordSet::Ideal(m) => x.in_ideal(*m),
            CoordSet::Shell(m) => x.in_shell(*m),
        }
    }

    /// Lower bound for the valuation of elements (i64 to allow infinities).
    pub fn lower(&self) -> i64 {
        match self {
            CoordSet::All => NEG_INF,
            CoordSet::Zero => POS_INF,
            CoordSet::Ideal(m) | CoordSet::Shell(m) => *m as i64,
        }
    }

    /// Smallest ideal containing the set.
    pub fn hull(&self) -> CoordSet {
        match self {
            CoordSet::Shell(m) => CoordSet::Ideal(*m),
            s => *s,
        }
    }

    /// Translation period of the indicator (untwisted or twisted): the set
    /// is stable under adding elements of the returned ideal.
    pub fn period(&self) -> CoordSet {
        match self {
            CoordSet::Ideal(m) => CoordSet::Ideal(*m),
            CoordSet::Shell(m) => CoordSet::Ideal(*m + 1),
            CoordSet::All => CoordSet::All,
            CoordSet::Zero => CoordSet::Zero,
        }
    }

    pub fn shift(&self, k: i32) -> CoordSet {
        match self {
            CoordSet::Ideal(m) => CoordSet::Ideal(m + k),
            CoordSet::Shell(m) => CoordSet::Shell(m + k),
            s => *s,
        }
    }
}

pub const NEG_INF: i64 = i64::MIN / 4;
pub const POS_INF: i64 = i64::MAX / 4;

/// Ideal inclusion a ⊂ b for ideal-like sets.
pub fn ideal_subset(a: &CoordSet, b: &CoordSet) -> bool {
    match (a, b) {
        (CoordSet::Zero, _) => true,
        (_, CoordSet::All) => true,
        (CoordSet::All, _) => false,
        (_, CoordSet::Zero) => false,
        (x, y) => x.lower() >= y.lower(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Xx,
    Xy,
    Yy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Constraint {
    pub form: Form,
    pub level: i32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermKey {
    pub sets: Vec<CoordSet>,
    pub twist: u16,
    pub cons: Vec<Constraint>,
}

#[derive(Clone, Debug)]
pub struct BoxTerm {
    pub coeff: SymbolicScalar,
    pub key: TermKey,
}

impl BoxTerm {
    pub fn new(coeff: SymbolicScalar, sets: Vec<CoordSet>) -> Self {
        BoxTerm { coeff, key: TermKey { sets, twist: 0, cons: vec![] } }
    }

    pub fn twisted(mut self, i: usize) -> Self {
        self.key.twist |= 1 << i;
        self
    }

    pub fn constrained(mut self, form: Form, level: i32) -> Self {
        self.key.cons.push(Constraint { form, level });
        self
    }

    pub fn is_twisted(&self, i: usize) -> bool {
        self.key.twist & (1 << i) != 0
    }
}

/// One factor of a product: a linear combination of boxes on a group of coordinates.
#[derive(Clone, Debug)]
pub struct Factor {
    pub coords: Vec<usize>,
    pub options: Vec<(SymbolicScalar, Vec<CoordSet>, u16)>,
}

impl Factor {
    pub fn single(i: usize, s: CoordSet) -> Self {
        Factor { coords: vec![i], options: vec![(SymbolicScalar::one(), vec![s], 0)] }
    }

    pub fn twisted_shell(i: usize, m: i32) -> Self {
        Factor { coords: vec![i], options: vec![(SymbolicScalar::one(), vec![CoordSet::Shell(m)], 1)] }
    }

    /// Indicator of P^m on the E-coordinate pair (i, i+1).
    pub fn e_ideal(kind: ExtKind, i: usize, m: i32) -> Self {
        let (a, b) = e_ideal_levels(kind, m);
        Factor {
            coords: vec![i, i + 1],
            options: vec![(SymbolicScalar::one(), vec![CoordSet::Ideal(a), CoordSet::Ideal(b)], 0)],
        }
    }

    /// Indicator of the E-shell P^m minus P^{m+1} on the pair (i, i+1).
    pub fn e_shell(kind: ExtKind, i: usize, m: i32) -> Self {
        let (a, b) = e_ideal_levels(kind, m);
        let (c, d) = e_ideal_levels(kind, m + 1);
        Factor {
            coords: vec![i, i + 1],
            options: vec![
                (SymbolicScalar::one(), vec![CoordSet::Ideal(a), CoordSet::Ideal(b)], 0),
                (SymbolicScalar::from_int(-1), vec![CoordSet::Ideal(c), CoordSet::Ideal(d)], 0),
            ],
        }
    }
}

#[derive(Clone, Debug)]
pub struct SchwartzFunction {
    pub space: QuadSpace,
    /// 1 for functions on X, 2 for functions on X x X.
    pub arity: usize,
    pub terms: Vec<BoxTerm>,
}

/// How an equality verdict was reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Certificate {
    Canonical,
    Exhaustive { points: u64 },
    Sampled { points: u64 },
    Undecided,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EqualityVerdict {
    pub equal: bool,
    pub certificate: Certificate,
}

impl SchwartzFunction {
    pub fn zero(space: QuadSpace, arity: usize) -> Self {
        SchwartzFunction { space, arity, terms: vec![] }
    }

    pub fn from_terms(space: QuadSpace, arity: usize, terms: Vec<BoxTerm>) -> Self {
        for t in &terms {
            assert_eq!(t.key.sets.len(), 4 * arity, "box has wrong dimension");
        }
        SchwartzFunction { space, arity, terms }
    }

    /// Indicator of a product box.
    pub fn indicator(space: QuadSpace, sets: Vec<CoordSet>) -> Self {
        let arity = sets.len() / 4;
        SchwartzFunction::from_terms(space, arity, vec![BoxTerm::new(SymbolicScalar::one(), sets)])
    }

    /// Expand a product of factors; coordinates not covered are `All`.
    pub fn product(space: QuadSpace, arity: usize, factors: &[Factor]) -> Self {
        let dim = 4 * arity;
        let mut terms = vec![BoxTerm::new(SymbolicScalar::one(), vec![CoordSet::All; dim])];
        for f in factors {
            let mut next = Vec::new();
            for t in &terms {
                for (c, sets, tw) in &f.options {
                    let mut nt = t.clone();
                    nt.coeff = nt.coeff.mul(c);
                    for (k, &i) in f.coords.iter().enumerate() {
                        nt.key.sets[i] = sets[k];
                        if tw & (1 << k) != 0 {
                            nt.key.twist |= 1 << i;
                        }
                    }
                    next.push(nt);
                }
            }
            terms = next;
        }
        SchwartzFunction::from_terms(space, arity, terms)
    }

    pub fn fp(&self) -> &FieldParams {
        &self.space.fp
    }

    pub fn dim(&self) -> usize {
        4 * self.arity
    }

    pub fn add(&self, o: &SchwartzFunction) -> SchwartzFunction {
        assert_eq!(self.arity, o.arity);
        let mut terms = self.terms.clone();
        terms.extend(o.terms.iter().cloned());
        SchwartzFunction { space: self.space, arity: self.arity, terms }
    }

    pub fn scale(&self, c: &SymbolicScalar) -> SchwartzFunction {
        SchwartzFunction {
            space: self.space,
            arity: self.arity,
            terms: self.terms.iter().map(|t| BoxTerm { coeff: t.coeff.mul(c), key: t.key.clone() }).collect(),
        }
    }

    pub fn sub(&self, o: &SchwartzFunction) -> SchwartzFunction {
        self.add(&o.scale(&SymbolicScalar::from_int(-1)))
    }

    pub fn with_constraint(&self, form: Form, level: i32) -> SchwartzFunction {
        SchwartzFunction {
            space: self.space,
            arity: self.arity,
            terms: self.terms.iter().cloned().map(|t| t.constrained(form, level)).collect(),
        }
    }

    /// (f1 ⊗ f2)(x, y) = f1(x) f2(y).
    pub fn tensor(f1: &SchwartzFunction, f2: &SchwartzFunction) -> SchwartzFunction {
        assert!(f1.arity == 1 && f2.arity == 1);
        let mut terms = Vec::new();
        for a in &f1.terms {
            for b in &f2.terms {
                let mut sets = a.key.sets.clone();
                sets.extend(b.key.sets.iter().cloned());
                let mut cons = a.key.cons.clone();
                for c in &b.key.cons {
                    assert_eq!(c.form, Form::Xx);
                    cons.push(Constraint { form: Form::Yy, level: c.level });
                }
                terms.push(BoxTerm {
                    coeff: a.coeff.mul(&b.coeff),
                    key: TermKey { sets, twist: a.key.twist | (b.key.twist << 4), cons },
                });
            }
        }
        SchwartzFunction::from_terms(f1.space, 2, terms)
    }

    /// x ↦ f(a x) (and y ↦ f(b y) on X x X).
    pub fn scale_argument(&self, a: Padic, b: Option<Padic>) -> FieldResult<SchwartzFunction> {
        let fp = *self.fp();
        let va = a.valuation()?;
        let (vb, chib) = match b {
            Some(b) => (b.valuation()?, fp.chi(&b)?),
            None => (0, 1),
        };
        let chia = fp.chi(&a)?;
        let mut terms = Vec::new();
        for t in &self.terms {
            let mut nt = t.clone();
            let mut sign = 1i8;
            for i in 0..self.dim() {
                let (v, ch) = if i < 4 { (va, chia) } else { (vb, chib) };
                nt.key.sets[i] = t.key.sets[i].shift(-v);
                if t.is_twisted(i) {
                    sign *= ch;
                }
            }
            for c in nt.key.cons.iter_mut() {
                c.level -= match c.form {
                    Form::Xx => 2 * va,
                    Form::Xy => va + vb,
                    Form::Yy => 2 * vb,
                };
            }
            nt.coeff = nt.coeff.mul(&SymbolicScalar::sign(sign));
            terms.push(nt);
        }
        Ok(SchwartzFunction { space: self.space, arity: self.arity, terms })
    }

    /// Lower bound on ν(Q) over the box of a term.
    pub fn form_lower_bound(&self, sets: &[CoordSet], form: Form) -> i64 {
        let (ox, oy) = match form {
            Form::Xx => (0, 0),
            Form::Xy => (0, 4),
            Form::Yy => (4, 4),
        };
        let mut lb = POS_INF;
        for t in self.space.form_terms() {
            let a = sets[ox + t.i].lower();
            let b = sets[oy + t.j].lower();
            let c = t.coef.val_lower_bound() as i64;
            let s = if a <= NEG_INF || b <= NEG_INF {
                NEG_INF
            } else if a >= POS_INF || b >= POS_INF {
                POS_INF
            } else {
                a + b + c
            };
            lb = lb.min(s);
        }
        lb
    }

    fn normalize_term(&self, t: &BoxTerm, out: &mut Vec<BoxTerm>) {
        let kind = self.fp().kind;
        let mut t = t.clone();
        // twists
        for i in 0..self.dim() {
            if !t.is_twisted(i) {
                continue;
            }
            match kind {
                ExtKind::Split => t.key.twist &= !(1 << i),
                ExtKind::Inert => {
                    if let CoordSet::Shell(m) = t.key.sets[i] {
                        if m.rem_euclid(2) == 1 {
                            t.coeff = t.coeff.neg();
                        }
                        t.key.twist &= !(1 << i);
                    } else {
                        panic!("twisted coordinate must be a shell");
                    }
                }
                ExtKind::Ramified => {
                    assert!(matches!(t.key.sets[i], CoordSet::Shell(_)), "twisted coordinate must be a shell");
                }
            }
        }
        // untwisted shells become ideal differences
        let mut stack = vec![t];
        while let Some(t) = stack.pop() {
            let pos = (0..self.dim()).find(|&i| !t.is_twisted(i) && matches!(t.key.sets[i], CoordSet::Shell(_)));
            match pos {
                Some(i) => {
                    let m = match t.key.sets[i] {
                        CoordSet::Shell(m) => m,
                        _ => unreachable!(),
                    };
                    let mut a = t.clone();
                    a.key.sets[i] = CoordSet::Ideal(m);
                    let mut b = t.clone();
                    b.key.sets[i] = CoordSet::Ideal(m + 1);
                    b.coeff = b.coeff.neg();
                    stack.push(a);
                    stack.push(b);
                }
                None => out.push(self.simplify_constraints(t)),
            }
        }
    }

    fn simplify_constraints(&self, mut t: BoxTerm) -> BoxTerm {
        let mut best: BTreeMap<Form, i32> = BTreeMap::new();
        for c in &t.key.cons {
            let e = best.entry(c.form).or_insert(c.level);
            *e = (*e).max(c.level);
        }
        t.key.cons = best
            .into_iter()
            .filter(|(f, m)| self.form_lower_bound(&t.key.sets, *f) < *m as i64)
            .map(|(form, level)| Constraint { form, level })
            .collect();
        t
    }

    /// Canonical form: twists normalized, shells expanded, identical boxes merged.
    pub fn canonical(&self) -> SchwartzFunction {
        let mut expanded = Vec::new();
        for t in &self.terms {
            if t.coeff.is_zero() {
                continue;
            }
            self.normalize_term(t, &mut expanded);
        }
        let mut merged: BTreeMap<TermKey, SymbolicScalar> = BTreeMap::new();
        for t in expanded {
            let e = merged.entry(t.key).or_default();
            *e = e.add(&t.coeff);
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(key, coeff)| BoxTerm { coeff, key })
            .collect();
        SchwartzFunction { space: self.space, arity: self.arity, terms }
    }

    pub fn is_zero_canonical(&self) -> bool {
        self.canonical().terms.is_empty()
    }

    fn form_value(&self, pts: &[XPoint], form: Form) -> Padic {
        match form {
            Form::Xx => self.space.pair(&pts[0], &pts[0]),
            Form::Xy => self.space.pair(&pts[0], &pts[1]),
            Form::Yy => self.space.pair(&pts[1], &pts[1]),
        }
    }

    /// Value factor (0 or ±1) of a term's box and twists at a point.
    fn term_sign(&self, t: &BoxTerm, coords: &[Padic], pts: &[XPoint]) -> FieldResult<i8> {
        let mut sign = 1i8;
        for (i, s) in t.key.sets.iter().enumerate() {
            if !s.contains(&coords[i])? {
                return Ok(0);
            }
            if t.is_twisted(i) {
                sign *= self.fp().chi(&coords[i])?;
            }
        }
        for c in &t.key.cons {
            if !self.form_value(pts, c.form).in_ideal(c.level)? {
                return Ok(0);
            }
        }
        Ok(sign)
    }

    fn coords_of(pts: &[XPoint]) -> Vec<Padic> {
        pts.iter().flat_map(|x| x.c.iter().cloned()).collect()
    }

    pub fn evaluate(&self, pts: &[XPoint]) -> FieldResult<SymbolicScalar> {
        if pts.len() != self.arity {
            return Err(FieldError::Config("point arity mismatch".into()));
        }
        let coords = Self::coords_of(pts);
        let mut acc = SymbolicScalar::zero();
        for t in &self.terms {
            let s = self.term_sign(t, &coords, pts)?;
            if s != 0 {
                acc = acc.add(&t.coeff.mul(&SymbolicScalar::sign(s)));
            }
        }
        Ok(acc)
    }

    /// Numeric evaluation with precomputed term values.
    pub fn numeric(&self, consts: &NumericConstants) -> NumericFunction<'_> {
        let vals = self
            .terms
            .iter()
            .map(|t| t.coeff.eval(self.fp().q as f64, consts.gamma, consts.tau, consts.u))
            .collect();
        NumericFunction { f: self, vals }
    }

    /// Per-term activity pattern at a point (term index, sign).
    fn pattern(&self, pts: &[XPoint]) -> FieldResult<Vec<(u32, i8)>> {
        let coords = Self::coords_of(pts);
        let mut pat = Vec::new();
        for (k, t) in self.terms.iter().enumerate() {
            let s = self.term_sign(t, &coords, pts)?;
            if s != 0 {
                pat.push((k as u32, s));
            }
        }
        Ok(pat)
    }

    /// Scan window (lo, hi) per coordinate, or None when some set is not compact/open.
    fn scan_window(&self) -> Option<Vec<(i32, i32)>> {
        let dim = self.dim();
        let mut lo = vec![i32::MAX; dim];
        let mut hi = vec![i32::MIN; dim];
        let mut max_con = i32::MIN;
        for t in &self.terms {
            for (i, s) in t.key.sets.iter().enumerate() {
                match s {
                    CoordSet::All | CoordSet::Zero => return None,
                    CoordSet::Ideal(m) => {
                        lo[i] = lo[i].min(*m);
                        hi[i] = hi[i].max(*m);
                    }
                    CoordSet::Shell(m) => {
                        lo[i] = lo[i].min(*m);
                        hi[i] = hi[i].max(*m + 1);
                    }
                }
            }
            for c in &t.key.cons {
                max_con = max_con.max(c.level);
            }
        }
        let lo_all = *lo.iter().min()?;
        if max_con > i32::MIN {
            let need = (max_con - lo_all.min(0)).max(max_con);
            for h in hi.iter_mut() {
                *h = (*h).max(need);
            }
        }
        Some(lo.into_iter().zip(hi).map(|(l, h)| (l, h.max(l))).collect())
    }

    /// Extensional equality.
    pub fn equal(&self, g: &SchwartzFunction) -> EqualityVerdict {
        self.equal_with_budget(g, SCAN_BUDGET, 0x5eed)
    }

    pub fn equal_with_budget(&self, g: &SchwartzFunction, budget: u64, seed: u64) -> EqualityVerdict {
        let diff = self.sub(g).canonical();
        if diff.terms.is_empty() {
            return EqualityVerdict { equal: true, certificate: Certificate::Canonical };
        }
        if diff.terms.iter().all(|t| t.key.cons.is_empty()) {
            return EqualityVerdict { equal: false, certificate: Certificate::Canonical };
        }
        match diff.zero_scan(budget, seed) {
            Some((zero, cert)) => EqualityVerdict { equal: zero, certificate: cert },
            None => EqualityVerdict { equal: false, certificate: Certificate::Undecided },
        }
    }

    /// Decide whether the function vanishes identically by scanning a complete
    /// residue grid (or a sample of it when the grid exceeds the budget).
    pub fn zero_scan(&self, budget: u64, seed: u64) -> Option<(bool, Certificate)> {
        let win = self.scan_window()?;
        let p = self.fp().p;
        let sizes: Vec<u64> = win.iter().map(|(l, h)| (p as u64).pow((h - l) as u32)).collect();
        let total = sizes.iter().try_fold(1u64, |a, &s| a.checked_mul(s));
        let mut memo: HashMap<Vec<(u32, i8)>, bool> = HashMap::new();
        let check = |pts: &[XPoint], memo: &mut HashMap<Vec<(u32, i8)>, bool>| -> Option<bool> {
            let pat = self.pattern(pts).ok()?;
            if let Some(&z) = memo.get(&pat) {
                return Some(z);
            }
            let mut acc = SymbolicScalar::zero();
            for (k, s) in &pat {
                acc = acc.add(&self.terms[*k as usize].coeff.mul(&SymbolicScalar::sign(*s)));
            }
            let z = acc.is_zero();
            memo.insert(pat, z);
            Some(z)
        };
        let point = |idx: &[u64]| -> Vec<XPoint> {
            let coords: Vec<Padic> = idx
                .iter()
                .zip(&win)
                .map(|(&k, (l, _))| Padic::from_i64(p, k as i64).mul(Padic::uniformizer_pow(p, *l)))
                .collect();
            coords.chunks(4).map(|c| XPoint::new([c[0], c[1], c[2], c[3]])).collect()
        };
        match total {
            Some(total) if total <= budget => {
                let mut idx = vec![0u64; sizes.len()];
                for _ in 0..total {
                    if !check(&point(&idx), &mut memo)? {
                        return Some((false, Certificate::Exhaustive { points: total }));
                    }
                    for d in 0..idx.len() {
                        idx[d] += 1;
                        if idx[d] < sizes[d] {
                            break;
                        }
                        idx[d] = 0;
                    }
                }
                Some((true, Certificate::Exhaustive { points: total }))
            }
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let n = budget.min(1_000_000);
                for _ in 0..n {
                    let idx: Vec<u64> = sizes.iter().map(|&s| rng.gen_range(0..s)).collect();
                    if !check(&point(&idx), &mut memo)? {
                        return Some((false, Certificate::Sampled { points: n }));
                    }
                }
                Some((true, Certificate::Sampled { points: n }))
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(SchwartzDto::from(self)).expect("serializable")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<SchwartzFunction, String> {
        let dto: SchwartzDto = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
        dto.into_function()
    }
}

/// Numeric values of the formal constants.
#[derive(Clone, Copy, Debug)]
pub struct NumericConstants {
    pub gamma: Complex<f64>,
    pub tau: Complex<f64>,
    pub u: Complex<f64>,
}

pub struct NumericFunction<'a> {
    f: &'a SchwartzFunction,
    vals: Vec<Complex<f64>>,
}

impl NumericFunction<'_> {
    pub fn at(&self, pts: &[XPoint]) -> FieldResult<Complex<f64>> {
        let coords = SchwartzFunction::coords_of(pts);
        let mut acc = Complex::new(0.0, 0.0);
        for (t, v) in self.f.terms.iter().zip(&self.vals) {
            let s = self.f.term_sign(t, &coords, pts)?;
            if s != 0 {
                acc += v * s as f64;
            }
        }
        Ok(acc)
    }
}

#[derive(Serialize, Deserialize)]
struct TermDto {
    coeff: SymbolicScalar,
    #[serde(rename = "box")]
    sets: Vec<CoordSet>,
    twists: Vec<usize>,
    constraints: Vec<Constraint>,
}

#[derive(Serialize, Deserialize)]
struct SchwartzDto {
    schema: String,
    p: u32,
    kind: ExtKind,
    #[serde(rename = "deltaUnit")]
    delta_unit: i64,
    arity: usize,
    terms: Vec<TermDto>,
}

impl From<&SchwartzFunction> for SchwartzDto {
    fn from(f: &SchwartzFunction) -> Self {
        SchwartzDto {
            schema: SCHEMA.into(),
            p: f.fp().p,
            kind: f.fp().kind,
            delta_unit: f.fp().delta.unit_raw(),
            arity: f.arity,
            terms: f
                .terms
                .iter()
                .map(|t| TermDto {
                    coeff: t.coeff.clone(),
                    sets: t.key.sets.clone(),
                    twists: (0..f.dim()).filter(|&i| t.is_twisted(i)).collect(),
                    constraints: t.key.cons.clone(),
                })
                .collect(),
        }
    }
}

impl SchwartzDto {
    fn into_function(self) -> Result<SchwartzFunction, String> {
        if self.schema != SCHEMA {
            return Err(format!("unknown schema {}", self.schema));
        }
        let alt = self.kind == ExtKind::Ramified && self.delta_unit != 1;
        let fp = FieldParams::with_alt(self.p, self.kind, alt).map_err(|e| e.to_string())?;
        if fp.delta.unit_raw() != self.delta_unit {
            return Err("delta does not match a supported choice".into());
        }
        let dim = 4 * self.arity;
        let mut terms = Vec::new();
        for t in self.terms {
            if t.sets.len() != dim {
                return Err("box dimension mismatch".into());
            }
            let mut twist = 0u16;
            for i in t.twists {
                if i >= dim {
                    return Err("twist index out of range".into());
                }
                twist |= 1 << i;
            }
            terms.push(BoxTerm { coeff: t.coeff, key: TermKey { sets: t.sets, twist, cons: t.constraints } });
        }
        Ok(SchwartzFunction { space: QuadSpace::new(fp), arity: self.arity, terms })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use CoordSet::*;

    fn space(kind: ExtKind, p: u32) -> QuadSpace {
        QuadSpace::new(FieldParams::new(p, kind).unwrap())
    }

    #[test]
    fn indicator_of_integral_matrices_at_identity() {
        let x = space(ExtKind::Split, 5);
        let f = SchwartzFunction::indicator(x, vec![Ideal(0); 4]);
        let id = XPoint::from_ints(5, [1, 0, 0, 1]);
        assert_eq!(f.evaluate(&[id]).unwrap(), SymbolicScalar::one());
    }

    #[test]
    fn split_phi1_vanishes_off_support() {
        let x = space(ExtKind::Split, 5);
        // (n1, n2) = (1, 0): [[p^0, o], [p^1, p^1]]
        let f = SchwartzFunction::indicator(x, vec![Ideal(0), Ideal(0), Ideal(1), Ideal(1)]);
        let pt = XPoint::new([Padic::exact(5, -1, 1), Padic::zero(5), Padic::zero(5), Padic::zero(5)]);
        assert!(f.evaluate(&[pt]).unwrap().is_zero());
    }

    #[test]
    fn add_is_commutative_up_to_canonical_form() {
        let x = space(ExtKind::Ramified, 3);
        let a = SchwartzFunction::indicator(x, vec![Ideal(0), Ideal(1), Shell(-1), Ideal(0)]);
        let b = SchwartzFunction::from_terms(
            x,
            1,
            vec![BoxTerm::new(SymbolicScalar::from_int(2), vec![Ideal(1), Ideal(0), Ideal(0), Shell(0)]).twisted(3)],
        );
        assert!(a.add(&b).equal(&b.add(&a)).equal);
        assert!(a.sub(&a).is_zero_canonical());
    }

    #[test]
    fn shell_union_identity() {
        let x = space(ExtKind::Inert, 3);
        let a = SchwartzFunction::indicator(x, vec![Shell(2), Ideal(0), Ideal(0), Ideal(0)])
            .add(&SchwartzFunction::indicator(x, vec![Ideal(3), Ideal(0), Ideal(0), Ideal(0)]));
        let b = SchwartzFunction::indicator(x, vec![Ideal(2), Ideal(0), Ideal(0), Ideal(0)]);
        assert_eq!(a.equal(&b).certificate, Certificate::Canonical);
        assert!(a.equal(&b).equal);
    }

    #[test]
    fn scale_argument_shifts_boxes() {
        let x = space(ExtKind::Split, 3);
        let f = SchwartzFunction::indicator(x, vec![Ideal(1), Ideal(0), Ideal(3), Ideal(2)]);
        let g = f.scale_argument(Padic::uniformizer_pow(3, 3), None).unwrap();
        let expect = SchwartzFunction::indicator(x, vec![Ideal(-2), Ideal(-3), Ideal(0), Ideal(-1)]);
        assert!(g.equal(&expect).equal);
    }

    #[test]
    fn implied_constraints_are_dropped() {
        let x = space(ExtKind::Split, 3);
        let f = SchwartzFunction::indicator(x, vec![Ideal(1), Ideal(1), Ideal(0), Ideal(1)]).with_constraint(Form::Xx, 1);
        let g = SchwartzFunction::indicator(x, vec![Ideal(1), Ideal(1), Ideal(0), Ideal(1)]);
        assert_eq!(f.equal(&g).certificate, Certificate::Canonical);
    }

    #[test]
    fn constraint_equality_uses_scan() {
        let x = space(ExtKind::Split, 3);
        // det x in p for x = [[a, b], [c, d]] with b, c in p: same as a d in p.
        let box_ = vec![Ideal(0), Ideal(1), Ideal(1), Ideal(0)];
        let f = SchwartzFunction::indicator(x, box_.clone()).with_constraint(Form::Xx, 1);
        let g = SchwartzFunction::indicator(x, vec![Ideal(1), Ideal(1), Ideal(1), Ideal(0)])
            .add(&SchwartzFunction::indicator(x, vec![Shell(0), Ideal(1), Ideal(1), Ideal(1)]));
        let v = f.equal(&g);
        assert!(v.equal);
        assert!(matches!(v.certificate, Certificate::Exhaustive { .. }));
        let h = SchwartzFunction::indicator(x, box_);
        assert!(!f.equal(&h).equal);
    }

    #[test]
    fn json_round_trip() {
        let x = space(ExtKind::Ramified, 5);
        let f = SchwartzFunction::from_terms(
            x,
            1,
            vec![BoxTerm::new(SymbolicScalar::tau(1), vec![Ideal(0), Ideal(-1), Shell(-1), Ideal(0)])
                .twisted(2)
                .constrained(Form::Xx, 1)],
        );
        let j = f.to_json();
        let g = SchwartzFunction::from_json(&j).unwrap();
        assert!(f.equal(&g).equal);
        assert_eq!(j, g.to_json());
    }
}
