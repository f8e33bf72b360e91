//! GSp(4) over L: similitude checks, paramodular and Klingen membership,
//! the subgroup T, generator families, coset lists and closure scans.
//!
//! Matrices preserve J = [[0, 1], [-1, 0]] up to λ: ᵗg J g = λ J.

use crate::localfield::{ipow, FieldError, FieldResult, Padic};
use crate::quadspace::{m2l_det, m2l_inv, m2l_mul, M2L};
use crate::weilrep::{Companion, Generator};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroupError {
    #[error("matrix is not in GSp(4)")]
    NotGsp,
    #[error("element is not in Kl(p^{0})")]
    NotKlingen(i32),
    #[error("factorization failed at working precision")]
    Precision,
    #[error(transparent)]
    Field(#[from] FieldError),
}

pub type M4 = [[Padic; 4]; 4];

#[derive(Clone, Copy, Debug)]
pub struct Gsp4Matrix {
    m: M4,
    lambda: Padic,
}

fn m4_mul(a: &M4, b: &M4) -> M4 {
    let p = a[0][0].p();
    let mut out = [[Padic::zero(p); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut s = Padic::zero(p);
            for k in 0..4 {
                if !a[i][k].is_zero() && !b[k][j].is_zero() {
                    s = s + a[i][k] * b[k][j];
                }
            }
            out[i][j] = s;
        }
    }
    out
}

fn transpose(a: &M4) -> M4 {
    let mut t = *a;
    for i in 0..4 {
        for j in 0..4 {
            t[i][j] = a[j][i];
        }
    }
    t
}

fn j4(p: u32) -> M4 {
    let mut m = [[Padic::zero(p); 4]; 4];
    for i in 0..2 {
        m[i][i + 2] = Padic::one(p);
        m[i + 2][i] = Padic::from_i64(p, -1);
    }
    m
}

impl Gsp4Matrix {
    /// Checks ᵗg J g = λ J exactly (up to working precision).
    pub fn new(m: M4) -> Result<Self, GroupError> {
        let p = m[0][0].p();
        let s = m4_mul(&m4_mul(&transpose(&m), &j4(p)), &m);
        let lambda = s[0][2];
        let j = j4(p);
        for i in 0..4 {
            for k in 0..4 {
                if !s[i][k].approx_eq(&(lambda * j[i][k])) {
                    return Err(GroupError::NotGsp);
                }
            }
        }
        if lambda.is_zero() || lambda.is_big_o() {
            return Err(GroupError::NotGsp);
        }
        Ok(Gsp4Matrix { m, lambda })
    }

    fn trusted(m: M4, lambda: Padic) -> Self {
        Gsp4Matrix { m, lambda }
    }

    pub fn from_ints(p: u32, rows: [[i64; 4]; 4]) -> Result<Self, GroupError> {
        let mut m = [[Padic::zero(p); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = Padic::from_i64(p, rows[i][j]);
            }
        }
        Gsp4Matrix::new(m)
    }

    pub fn p(&self) -> u32 {
        self.lambda.p()
    }

    pub fn entries(&self) -> &M4 {
        &self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> Padic {
        self.m[i][j]
    }

    pub fn lambda(&self) -> Padic {
        self.lambda
    }

    pub fn identity(p: u32) -> Self {
        let mut m = [[Padic::zero(p); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = Padic::one(p);
        }
        Gsp4Matrix::trusted(m, Padic::one(p))
    }

    pub fn mul(&self, o: &Gsp4Matrix) -> Gsp4Matrix {
        Gsp4Matrix::trusted(m4_mul(&self.m, &o.m), self.lambda * o.lambda)
    }

    /// g^{-1} = λ^{-1} J^{-1} ᵗg J.
    pub fn inverse(&self) -> FieldResult<Gsp4Matrix> {
        let p = self.p();
        let li = self.lambda.inv()?;
        let jinv = {
            let mut j = j4(p);
            for row in j.iter_mut() {
                for x in row.iter_mut() {
                    *x = -*x;
                }
            }
            j
        };
        let mut m = m4_mul(&m4_mul(&jinv, &transpose(&self.m)), &j4(p));
        for row in m.iter_mut() {
            for x in row.iter_mut() {
                *x = *x * li;
            }
        }
        Ok(Gsp4Matrix::trusted(m, li))
    }

    pub fn approx_eq(&self, o: &Gsp4Matrix) -> bool {
        (0..4).all(|i| (0..4).all(|j| self.m[i][j].approx_eq(&o.m[i][j])))
    }

    /// m(A) = diag(A, λ ᵗA^{-1}).
    pub fn levi(a: &M2L, lambda: Padic) -> FieldResult<Self> {
        let p = lambda.p();
        let ai = m2l_inv(a)?;
        let mut m = [[Padic::zero(p); 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = a[i][j];
                m[i + 2][j + 2] = lambda * ai[j][i];
            }
        }
        Ok(Gsp4Matrix::trusted(m, lambda))
    }

    /// n(B) with B = [[b1, b2], [b2, b3]].
    pub fn unipotent(b1: Padic, b2: Padic, b3: Padic) -> Self {
        let p = b1.p();
        let mut g = Gsp4Matrix::identity(p);
        g.m[0][2] = b1;
        g.m[0][3] = b2;
        g.m[1][2] = b2;
        g.m[1][3] = b3;
        g
    }

    /// [[1, 0], [C, 1]] with C = [[c1, c2], [c2, c3]].
    pub fn lower(c1: Padic, c2: Padic, c3: Padic) -> Self {
        let p = c1.p();
        let mut g = Gsp4Matrix::identity(p);
        g.m[2][0] = c1;
        g.m[2][1] = c2;
        g.m[3][0] = c2;
        g.m[3][1] = c3;
        g
    }

    fn weyl(p: u32, coord: usize) -> Self {
        let mut g = Gsp4Matrix::identity(p);
        g.m[coord][coord] = Padic::zero(p);
        g.m[coord + 2][coord + 2] = Padic::zero(p);
        g.m[coord][coord + 2] = Padic::one(p);
        g.m[coord + 2][coord] = Padic::from_i64(p, -1);
        g
    }

    pub fn s1(p: u32) -> Self {
        Gsp4Matrix::weyl(p, 0)
    }

    pub fn s2(p: u32) -> Self {
        Gsp4Matrix::weyl(p, 1)
    }

    pub fn j(p: u32) -> Self {
        Gsp4Matrix::trusted(j4(p), Padic::one(p))
    }

    pub fn t_n(p: u32, n: i32) -> Self {
        let mut g = Gsp4Matrix::s1(p);
        g.m[0][2] = Padic::uniformizer_pow(p, -n);
        g.m[2][0] = -Padic::uniformizer_pow(p, n);
        g
    }

    /// diag(1, 1, u, u).
    pub fn similitude(u: Padic) -> Self {
        let mut g = Gsp4Matrix::identity(u.p());
        g.m[2][2] = u;
        g.m[3][3] = u;
        g.lambda = u;
        g
    }

    pub fn central(z: Padic) -> Self {
        let p = z.p();
        let mut m = [[Padic::zero(p); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = z;
        }
        Gsp4Matrix::trusted(m, z * z)
    }

    /// The matrix of a Weil-engine generator.
    pub fn from_generator(g: &Generator, p: u32) -> FieldResult<Self> {
        Ok(match g {
            Generator::Levi(a) => Gsp4Matrix::levi(a, Padic::one(p))?,
            Generator::Unip(b) => Gsp4Matrix::unipotent(b[0], b[1], b[2]),
            Generator::S1 => Gsp4Matrix::s1(p),
            Generator::S2 => Gsp4Matrix::s2(p),
            Generator::J => Gsp4Matrix::j(p),
            Generator::TN(n) => Gsp4Matrix::t_n(p, *n),
            Generator::Similitude(u, _) => Gsp4Matrix::similitude(*u),
            Generator::Central(z) => Gsp4Matrix::central(*z),
            Generator::LowerConj(c, _) => Gsp4Matrix::lower(c[0], c[1], c[2]),
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<String>> = self.m.iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect();
        serde_json::json!({ "entries": rows, "lambda": self.lambda.to_string() })
    }
}

impl fmt::Display for Gsp4Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .m
            .iter()
            .map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "))
            .collect();
        write!(f, "[{}]", rows.join("; "))
    }
}

/// Entry-valuation pattern: entry (i, j) must lie in p^{pat[i][j]}.
pub type Pattern = [[i32; 4]; 4];

pub fn paramodular_pattern(n: i32) -> Pattern {
    [[0, 0, -n, 0], [n, 0, 0, 0], [n, n, 0, n], [n, 0, 0, 0]]
}

pub fn klingen_pattern(n: i32) -> Pattern {
    [[0, 0, 0, 0], [n, 0, 0, 0], [n, n, 0, n], [n, 0, 0, 0]]
}

/// Valuation pattern containing T; closed under products and inverses.
pub fn t_pattern(n: i32) -> Pattern {
    [[0, 0, -n + 1, 0], [n, 0, 0, 1], [n, n - 1, 0, n], [n - 1, 0, 0, 0]]
}

pub fn pattern_meet(a: &Pattern, b: &Pattern) -> Pattern {
    let mut out = *a;
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[i][j].max(b[i][j]);
        }
    }
    out
}

/// Some(true) if x ∈ p^level, Some(false) if not, None if precision runs out.
fn entry_in(x: &Padic, level: i32) -> Option<bool> {
    if x.is_zero() {
        return Some(true);
    }
    if x.is_big_o() {
        return if x.val_lower_bound() >= level { Some(true) } else { None };
    }
    Some(x.val_lower_bound() >= level)
}

fn fits(g: &Gsp4Matrix, pat: &Pattern) -> Option<bool> {
    let mut undecided = false;
    for i in 0..4 {
        for j in 0..4 {
            match entry_in(&g.m[i][j], pat[i][j]) {
                Some(false) => return Some(false),
                None => undecided = true,
                _ => {}
            }
        }
    }
    if undecided {
        None
    } else {
        Some(true)
    }
}

fn unit_lambda(g: &Gsp4Matrix) -> bool {
    matches!(g.lambda.valuation(), Ok(0))
}

pub fn in_paramodular(g: &Gsp4Matrix, n: i32) -> bool {
    unit_lambda(g) && fits(g, &paramodular_pattern(n)) == Some(true)
}

pub fn in_klingen(g: &Gsp4Matrix, n: i32) -> bool {
    unit_lambda(g) && fits(g, &klingen_pattern(n)) == Some(true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Membership {
    Member,
    NotMember,
    Undecided,
}

/// Factorization g = lower(X) m(A) n(Y) with each factor a T generator.
pub struct TFactorization {
    pub lower: [Padic; 3],
    pub levi: M2L,
    pub upper: [Padic; 3],
}

fn block(g: &Gsp4Matrix, r: usize, c: usize) -> M2L {
    [[g.m[r][c], g.m[r][c + 1]], [g.m[r + 1][c], g.m[r + 1][c + 1]]]
}

pub fn t_factor(g: &Gsp4Matrix, n: i32) -> Option<TFactorization> {
    let p = g.p();
    if !g.lambda.approx_eq(&Padic::one(p)) {
        return None;
    }
    let a = block(g, 0, 0);
    let b = block(g, 0, 2);
    let c = block(g, 2, 0);
    let det = m2l_det(&a);
    if det.is_big_o() || det.valuation().ok()? != 0 {
        return None;
    }
    let ai = m2l_inv(&a).ok()?;
    let x = m2l_mul(&c, &ai);
    let y = m2l_mul(&ai, &b);
    let pat = t_pattern(n);
    let ok = |v: &Padic, l: i32| entry_in(v, l) == Some(true);
    if !(ok(&a[1][0], n) && ok(&a[0][0], 0) && ok(&a[0][1], 0) && ok(&a[1][1], 0)) {
        return None;
    }
    if !(x[0][1].approx_eq(&x[1][0]) && y[0][1].approx_eq(&y[1][0])) {
        return None;
    }
    if !(ok(&x[0][0], pat[2][0]) && ok(&x[0][1], pat[2][1]) && ok(&x[1][1], pat[3][1])) {
        return None;
    }
    if !(ok(&y[0][0], pat[0][2]) && ok(&y[0][1], pat[0][3]) && ok(&y[1][1], pat[1][3])) {
        return None;
    }
    Some(TFactorization { lower: [x[0][0], x[0][1], x[1][1]], levi: a, upper: [y[0][0], y[0][1], y[1][1]] })
}

/// Membership in T, the group generated by m(A) (A ∈ Γ0(p^N)),
/// n(B) (B ∈ [p^{-N+1}, o; o, p]) and lower(C) (C ∈ [p^N, p^{N-1}; p^{N-1}, o]).
pub fn in_t(g: &Gsp4Matrix, n: i32) -> Membership {
    let p = g.p();
    if !g.lambda.approx_eq(&Padic::one(p)) {
        return Membership::NotMember;
    }
    match fits(g, &t_pattern(n)) {
        Some(false) => Membership::NotMember,
        None => Membership::Undecided,
        Some(true) => {
            if t_factor(g, n).is_some() {
                Membership::Member
            } else {
                Membership::Undecided
            }
        }
    }
}

/// Iwahori factorization of a Klingen element: upper · levi · lower.
pub fn iwahori_factor(k: &Gsp4Matrix, n: i32) -> Result<(Gsp4Matrix, Gsp4Matrix, Gsp4Matrix), GroupError> {
    if !in_klingen(k, n) {
        return Err(GroupError::NotKlingen(n));
    }
    let p = k.p();
    let m = &k.m;
    let k33 = m[2][2];
    let k33i = k33.inv()?;
    // row 3 of k is k33 times row 3 of the lower factor
    let lo_c = m[2][0] * k33i;
    let lo_b = m[2][1] * k33i;
    let lo_a = -(m[2][3] * k33i);
    let mut lower = Gsp4Matrix::identity(p);
    lower.m[1][0] = lo_a;
    lower.m[2][0] = lo_c;
    lower.m[2][1] = lo_b;
    lower.m[2][3] = -lo_a;
    lower.m[3][0] = lo_b;
    let r = k.mul(&lower.inverse()?);
    let mu = r.m[2][2];
    let mui = mu.inv()?;
    let (a, b, c) = (-(r.m[3][2] * mui), r.m[1][2] * mui, r.m[0][2] * mui);
    let mut upper = Gsp4Matrix::identity(p);
    upper.m[0][1] = a;
    upper.m[0][2] = c;
    upper.m[0][3] = b;
    upper.m[1][2] = b;
    upper.m[3][2] = -a;
    let mut levi = Gsp4Matrix::identity(p);
    levi.m[0][0] = r.m[0][0];
    levi.m[1][1] = r.m[1][1];
    levi.m[1][3] = r.m[1][3];
    levi.m[3][1] = r.m[3][1];
    levi.m[3][3] = r.m[3][3];
    levi.m[2][2] = mu;
    levi.lambda = k.lambda;
    let upper = Gsp4Matrix::new(upper.m)?;
    let levi = Gsp4Matrix::new(levi.m)?;
    let lower = Gsp4Matrix::new(lower.m)?;
    if !upper.mul(&levi).mul(&lower).approx_eq(k) {
        return Err(GroupError::Precision);
    }
    Ok((upper, levi, lower))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CosetKind {
    #[serde(rename = "K_mod_Kl")]
    KModKl,
    #[serde(rename = "Kl_mod_KlT")]
    KlModKlT,
    #[serde(rename = "K_mod_KT")]
    KModKT,
}

impl CosetKind {
    pub fn parse(s: &str) -> Option<CosetKind> {
        match s {
            "K_mod_Kl" => Some(CosetKind::KModKl),
            "Kl_mod_KlT" => Some(CosetKind::KlModKlT),
            "K_mod_KT" => Some(CosetKind::KModKT),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CosetKind::KModKl => "K_mod_Kl",
            CosetKind::KlModKlT => "Kl_mod_KlT",
            CosetKind::KModKT => "K_mod_KT",
        }
    }

    fn sub_pattern(&self, n: i32) -> Pattern {
        match self {
            CosetKind::KModKl => klingen_pattern(n),
            CosetKind::KlModKlT => pattern_meet(&klingen_pattern(n), &t_pattern(n)),
            CosetKind::KModKT => pattern_meet(&paramodular_pattern(n), &t_pattern(n)),
        }
    }

    fn sub_membership(&self, g: &Gsp4Matrix, n: i32) -> Membership {
        match self {
            CosetKind::KModKl => {
                if in_klingen(g, n) {
                    Membership::Member
                } else {
                    Membership::NotMember
                }
            }
            CosetKind::KlModKlT => {
                if !in_klingen(g, n) {
                    Membership::NotMember
                } else {
                    in_t(g, n)
                }
            }
            CosetKind::KModKT => {
                if !in_paramodular(g, n) {
                    Membership::NotMember
                } else {
                    in_t(g, n)
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct CosetList {
    pub kind: CosetKind,
    pub n: i32,
    pub p: u32,
    pub reps: Vec<Gsp4Matrix>,
    pub labels: Vec<String>,
}

impl CosetList {
    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let reps: Vec<serde_json::Value> = self
            .reps
            .iter()
            .zip(&self.labels)
            .map(|(r, l)| {
                let mut v = r.to_json();
                v["label"] = serde_json::Value::String(l.clone());
                v
            })
            .collect();
        serde_json::json!({ "kind": self.kind.name(), "N": self.n, "p": self.p, "count": self.reps.len(), "representatives": reps })
    }
}

pub fn cosets(kind: CosetKind, p: u32, n: i32) -> CosetList {
    let pad = |k: i64| Padic::from_i64(p, k);
    let zero = Padic::zero(p);
    let q = p as i64;
    let mut reps = Vec::new();
    let mut labels = Vec::new();
    match kind {
        CosetKind::KModKl => {
            assert!(n >= 1, "K/Kl needs N >= 1");
            for u in 0..ipow(p, n as u32) {
                reps.push(Gsp4Matrix::unipotent(pad(u) * Padic::uniformizer_pow(p, -n), zero, zero));
                labels.push(format!("upper(u={})", u));
            }
            for u in 0..ipow(p, (n - 1) as u32) {
                let x = Gsp4Matrix::unipotent(pad(u) * Padic::uniformizer_pow(p, -n + 1), zero, zero);
                reps.push(Gsp4Matrix::t_n(p, n).mul(&x));
                labels.push(format!("t_N·upper(u={})", u));
            }
        }
        CosetKind::KlModKlT => {
            reps.push(Gsp4Matrix::s2(p));
            labels.push("s2".into());
            for v in 0..q {
                reps.push(Gsp4Matrix::unipotent(zero, zero, pad(v)));
                labels.push(format!("unipotent(v={})", v));
            }
        }
        CosetKind::KModKT => {
            let pn = Padic::uniformizer_pow(p, -n);
            for u in 0..q {
                for v in 0..q {
                    reps.push(Gsp4Matrix::unipotent(pad(u) * pn, zero, pad(v)));
                    labels.push(format!("upper(u={},v={})", u, v));
                }
            }
            for u in 0..q {
                reps.push(Gsp4Matrix::s2(p).mul(&Gsp4Matrix::unipotent(pad(u) * pn, zero, zero)));
                labels.push(format!("s2·upper(u={})", u));
            }
            for v in 0..q {
                reps.push(Gsp4Matrix::t_n(p, n).mul(&Gsp4Matrix::unipotent(zero, zero, pad(v))));
                labels.push(format!("t_N·upper(v={})", v));
            }
            reps.push(Gsp4Matrix::t_n(p, n).mul(&Gsp4Matrix::s2(p)));
            labels.push("t_N·s2".into());
        }
    }
    CosetList { kind, n, p, reps, labels }
}

/// The Klingen coset representative of k ∈ Kl(p^N) modulo Kl ∩ T, as an
/// index into cosets(Kl_mod_KlT): 0 is s2, 1 + v is unipotent(v).
pub fn klingen_coset_index(k: &Gsp4Matrix, n: i32) -> Result<usize, GroupError> {
    let (_, levi, _) = iwahori_factor(k, n)?;
    let s2 = levi.m[1][3];
    let s4 = levi.m[3][3];
    if s4.is_big_o() {
        return Err(GroupError::Precision);
    }
    if s4.is_zero() || s4.valuation()? > 0 {
        return Ok(0);
    }
    let v = s2 * s4.inv()?;
    if v.is_zero() {
        return Ok(1);
    }
    if v.valuation()? > 0 {
        return Ok(1);
    }
    let r = v.unit_residue(1)? as usize;
    Ok(1 + r)
}

/// A generator instance: the matrix, its family, and the Weil-engine form.
#[derive(Clone, Debug)]
pub struct GenInstance {
    pub family: &'static str,
    pub matrix: Gsp4Matrix,
    pub op: Generator,
}

pub fn residues(p: u32, depth: u32) -> Vec<i64> {
    (0..ipow(p, depth)).collect()
}

pub fn unit_residues(p: u32, depth: u32) -> Vec<i64> {
    (1..ipow(p, depth)).filter(|u| u % p as i64 != 0).collect()
}

fn levi_instance(family: &'static str, a: M2L) -> GenInstance {
    let p = a[0][0].p();
    GenInstance { family, matrix: Gsp4Matrix::levi(&a, Padic::one(p)).expect("invertible"), op: Generator::Levi(a) }
}

/// The families generating K(p^N), with parameters swept over residues mod p^depth.
/// Family (a) is split into one-parameter subfamilies generating Γ0(p^N), plus
/// the similitudes diag(1, 1, u, u).
pub fn generators_k(p: u32, n: i32, depth: u32) -> Vec<(&'static str, Vec<GenInstance>)> {
    let pad = |k: i64| Padic::from_i64(p, k);
    let one = Padic::one(p);
    let zero = Padic::zero(p);
    let units = unit_residues(p, depth);
    let all = residues(p, depth);
    let pn = Padic::uniformizer_pow(p, n);
    let mut out = Vec::new();
    out.push(("levi_diag_a", units.iter().map(|&a| levi_instance("levi_diag_a", [[pad(a), zero], [zero, one]])).collect()));
    out.push(("levi_diag_d", units.iter().map(|&d| levi_instance("levi_diag_d", [[one, zero], [zero, pad(d)]])).collect()));
    out.push(("levi_upper", all.iter().map(|&b| levi_instance("levi_upper", [[one, pad(b)], [zero, one]])).collect()));
    let low_depth = depth.saturating_sub(n as u32).max(1);
    out.push((
        "levi_lower",
        residues(p, low_depth).iter().map(|&c| levi_instance("levi_lower", [[one, zero], [pad(c) * pn, one]])).collect(),
    ));
    out.push((
        "similitude",
        units
            .iter()
            .map(|&u| GenInstance {
                family: "similitude",
                matrix: Gsp4Matrix::similitude(pad(u)),
                op: Generator::Similitude(pad(u), Companion::Identity),
            })
            .collect(),
    ));
    let pmn = Padic::uniformizer_pow(p, -n);
    let unip = |family: &'static str, k: usize| -> Vec<GenInstance> {
        all.iter()
            .map(|&b| {
                let mut bs = [zero, zero, zero];
                bs[k] = if k == 0 { pad(b) * pmn } else { pad(b) };
                GenInstance { family, matrix: Gsp4Matrix::unipotent(bs[0], bs[1], bs[2]), op: Generator::Unip(bs) }
            })
            .collect()
    };
    out.push(("unip_b1", unip("unip_b1", 0)));
    out.push(("unip_b2", unip("unip_b2", 1)));
    out.push(("unip_b3", unip("unip_b3", 2)));
    out.push(("s2", vec![GenInstance { family: "s2", matrix: Gsp4Matrix::s2(p), op: Generator::S2 }]));
    out.push(("t_N", vec![GenInstance { family: "t_N", matrix: Gsp4Matrix::t_n(p, n), op: Generator::TN(n) }]));
    out
}

/// Generator families of Kl(p^N) used for closure scans of Kl/(Kl ∩ T).
pub fn generators_klingen(p: u32, n: i32, depth: u32) -> Vec<(&'static str, Vec<GenInstance>)> {
    let pad = |k: i64| Padic::from_i64(p, k);
    let zero = Padic::zero(p);
    let pn = Padic::uniformizer_pow(p, n);
    let mut out: Vec<(&'static str, Vec<GenInstance>)> = generators_k(p, n, depth)
        .into_iter()
        .filter(|(f, _)| *f != "t_N" && *f != "unip_b1")
        .collect();
    let all = residues(p, depth);
    out.push((
        "unip_b1_integral",
        all.iter()
            .map(|&b| GenInstance {
                family: "unip_b1_integral",
                matrix: Gsp4Matrix::unipotent(pad(b), zero, zero),
                op: Generator::Unip([pad(b), zero, zero]),
            })
            .collect(),
    ));
    let low_depth = depth.saturating_sub(n as u32).max(1);
    for (k, family) in ["lower_c1", "lower_c2"].iter().enumerate() {
        out.push((
            family,
            residues(p, low_depth)
                .iter()
                .map(|&c| {
                    let mut cs = [zero, zero, zero];
                    cs[k] = pad(c) * pn;
                    GenInstance { family, matrix: Gsp4Matrix::lower(cs[0], cs[1], cs[2]), op: Generator::LowerConj(cs, n) }
                })
                .collect(),
        ));
    }
    out
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ClosureReport {
    pub instances: usize,
    pub pairs: usize,
    pub unmatched: usize,
    pub ambiguous: usize,
    pub undecided: usize,
    pub not_permutation: usize,
}

impl ClosureReport {
    pub fn passed(&self) -> bool {
        self.unmatched == 0 && self.ambiguous == 0 && self.undecided == 0 && self.not_permutation == 0
    }
}

/// Precomputed inverses for coset searches.
pub struct CosetIndex<'a> {
    list: &'a CosetList,
    inverses: Vec<Gsp4Matrix>,
    pattern: Pattern,
}

impl<'a> CosetIndex<'a> {
    pub fn new(list: &'a CosetList) -> Self {
        let inverses = list.reps.iter().map(|r| r.inverse().expect("invertible representative")).collect();
        CosetIndex { list, inverses, pattern: list.kind.sub_pattern(list.n) }
    }

    fn prefilter(&self, j: usize, m: &Gsp4Matrix) -> bool {
        let inv = &self.inverses[j];
        for r in 0..4 {
            for c in 0..4 {
                let mut s = Padic::zero(m.p());
                for k in 0..4 {
                    if !inv.m[r][k].is_zero() && !m.m[k][c].is_zero() {
                        s = s + inv.m[r][k] * m.m[k][c];
                    }
                }
                if entry_in(&s, self.pattern[r][c]) == Some(false) {
                    return false;
                }
            }
        }
        true
    }

    /// The representatives r_j with r_j^{-1} m in the subgroup.
    pub fn locate(&self, m: &Gsp4Matrix) -> (Vec<usize>, usize) {
        let mut hits = Vec::new();
        let mut undecided = 0;
        for j in 0..self.inverses.len() {
            if !self.prefilter(j, m) {
                continue;
            }
            match self.list.kind.sub_membership(&self.inverses[j].mul(m), self.list.n) {
                Membership::Member => hits.push(j),
                Membership::Undecided => undecided += 1,
                Membership::NotMember => {}
            }
        }
        (hits, undecided)
    }
}

/// For each generator g and representative r_i, find r_j with g r_i ∈ r_j H
/// (similitudes act by conjugation g r_i g^{-1}). Checks that each g permutes the cosets.
pub fn closure_scan(list: &CosetList, families: &[(&'static str, Vec<GenInstance>)]) -> ClosureReport {
    let index = CosetIndex::new(list);
    let instances: Vec<&GenInstance> = families.iter().flat_map(|(_, v)| v.iter()).collect();
    let results: Vec<(usize, usize, usize, bool)> = instances
        .par_iter()
        .map(|inst| {
            let conj = !inst.matrix.lambda().approx_eq(&Padic::one(list.p));
            let ginv = if conj { Some(inst.matrix.inverse().expect("invertible")) } else { None };
            let mut unmatched = 0;
            let mut ambiguous = 0;
            let mut undecided = 0;
            let mut seen = vec![false; list.len()];
            let mut perm = true;
            for r in &list.reps {
                let mut m = inst.matrix.mul(r);
                if let Some(gi) = &ginv {
                    m = m.mul(gi);
                }
                let (hits, und) = index.locate(&m);
                undecided += und;
                match hits.len() {
                    0 => unmatched += 1,
                    1 => {
                        if seen[hits[0]] {
                            perm = false;
                        }
                        seen[hits[0]] = true;
                    }
                    _ => ambiguous += 1,
                }
            }
            (unmatched, ambiguous, undecided, perm)
        })
        .collect();
    let mut rep = ClosureReport { instances: instances.len(), pairs: instances.len() * list.len(), ..Default::default() };
    for (u, a, d, perm) in results {
        rep.unmatched += u;
        rep.ambiguous += a;
        rep.undecided += d;
        if !perm {
            rep.not_permutation += 1;
        }
    }
    rep
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DisjointnessReport {
    pub pairs: usize,
    pub overlaps: usize,
    pub undecided: usize,
}

pub fn disjointness_scan(list: &CosetList) -> DisjointnessReport {
    let index = CosetIndex::new(list);
    let mut rep = DisjointnessReport::default();
    for i in 0..list.len() {
        for j in (i + 1)..list.len() {
            rep.pairs += 1;
            let m = index.inverses[i].mul(&list.reps[j]);
            match list.kind.sub_membership(&m, list.n) {
                Membership::Member => rep.overlaps += 1,
                Membership::Undecided => rep.undecided += 1,
                Membership::NotMember => {}
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_lie_in_k() {
        for n in 0..3 {
            for (_, fam) in generators_k(3, n, (n + 1) as u32) {
                for g in fam {
                    assert!(Gsp4Matrix::new(g.matrix.m).is_ok());
                    assert!(in_paramodular(&g.matrix, n), "{} {}", g.family, g.matrix);
                }
            }
        }
    }

    #[test]
    fn t_n_membership() {
        let t = Gsp4Matrix::t_n(5, 2);
        assert!(in_paramodular(&t, 2));
        assert!(!in_klingen(&t, 2));
        let id = Gsp4Matrix::identity(5);
        assert!(in_paramodular(&id, 2) && in_klingen(&id, 2));
        assert_eq!(in_t(&id, 2), Membership::Member);
    }

    #[test]
    fn upper_b1_valuation() {
        let z = Padic::zero(3);
        let g = Gsp4Matrix::unipotent(Padic::uniformizer_pow(3, -2), z, z);
        assert!(in_paramodular(&g, 2));
        assert_eq!(in_t(&g, 2), Membership::NotMember);
        let h = Gsp4Matrix::unipotent(Padic::uniformizer_pow(3, -1), z, z);
        assert_eq!(in_t(&h, 2), Membership::Member);
    }

    #[test]
    fn lower_conjugation_identity() {
        let p = 5;
        let n = 3;
        let c = [Padic::exact(p, 3, 2), Padic::exact(p, 2, 1), Padic::from_i64(p, 4)];
        let g = Gsp4Matrix::t_n(p, n).mul(&Gsp4Matrix::s2(p));
        let pn = Padic::uniformizer_pow(p, -n);
        let cp = Gsp4Matrix::unipotent(-(c[0] * pn * pn), -(c[1] * pn), -c[2]);
        let lhs = g.inverse().unwrap().mul(&cp).mul(&g);
        assert!(lhs.approx_eq(&Gsp4Matrix::lower(c[0], c[1], c[2])));
    }

    #[test]
    fn coset_counts() {
        assert_eq!(cosets(CosetKind::KModKl, 3, 1).len(), 4);
        assert_eq!(cosets(CosetKind::KModKl, 3, 2).len(), 12);
        assert_eq!(cosets(CosetKind::KModKT, 3, 2).len(), 16);
        assert_eq!(cosets(CosetKind::KlModKlT, 5, 2).len(), 6);
    }

    #[test]
    fn iwahori_identity_and_weyl_branch() {
        let id = Gsp4Matrix::identity(5);
        let (u, l, d) = iwahori_factor(&id, 2).unwrap();
        assert!(u.approx_eq(&id) && l.approx_eq(&id) && d.approx_eq(&id));
        let s2 = Gsp4Matrix::s2(5);
        assert_eq!(klingen_coset_index(&s2, 2).unwrap(), 0);
        let v = Gsp4Matrix::unipotent(Padic::zero(5), Padic::zero(5), Padic::from_i64(5, 3));
        assert_eq!(klingen_coset_index(&v, 2).unwrap(), 4);
    }

    #[test]
    fn small_closure_scans() {
        for (kind, n) in [(CosetKind::KModKl, 1), (CosetKind::KlModKlT, 2), (CosetKind::KModKT, 2)] {
            let list = cosets(kind, 3, n);
            let fams = if kind == CosetKind::KlModKlT { generators_klingen(3, n, n as u32 + 1) } else { generators_k(3, n, n as u32 + 1) };
            let rep = closure_scan(&list, &fams);
            assert!(rep.passed(), "{:?} {:?}", kind, rep);
            let d = disjointness_scan(&list);
            assert_eq!((d.overlaps, d.undecided), (0, 0), "{:?}", kind);
        }
    }
}
