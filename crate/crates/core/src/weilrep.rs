//! Symbolic Weil action on Schwartz functions on X x X.
//!
//! Conventions (v = (x, y) a row of two vectors in X):
//! - m(A) = diag(A, tA^{-1}): chi(det A) |det A|^2 phi(vA)
//! - n(B): psi(b1 <x,x> + 2 b2 <x,y> + b3 <y,y>) phi
//! - J: gamma^2 F, with F the Fourier transform in both variables
//! - s1, s2: gamma F in the x (resp. y) variable
//! - t_N: gamma chi(p)^N q^{-2N} F_x(phi(p^N x, y))
//!
//! `gamma` is the Weil index of X for the SL(2) action on S(X).

use crate::localfield::{ExtElement, ExtKind, FieldError, FieldParams, Padic};
use crate::quadspace::{m2e_diag, m2l_diag, GsoElement, QuadSpace, M2L};
use crate::schwartz::{
    BoxTerm, CoordSet, Form, SchwartzFunction, TermKey, NEG_INF, POS_INF,
};
use crate::symbolic::{rat, SymbolicScalar};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeilError {
    #[error("oracle-only: {0}")]
    OracleOnly(String),
    #[error("unsupported generator: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

pub type WeilResult<T> = Result<T, WeilError>;

/// Haar constant making the coordinate measure self-dual for psi(2<x,y>).
pub fn haar_constant(space: &QuadSpace) -> SymbolicScalar {
    let mut k = 0;
    for t in space.form_terms() {
        k += t.coef.val_lower_bound();
    }
    SymbolicScalar::q_half(-k)
}

/// The same constant relative to the self-dual measure on E
/// (which gives o_E volume |disc|^{1/2}).
pub fn haar_constant_relative_to_e(space: &QuadSpace) -> SymbolicScalar {
    match space.fp.kind {
        ExtKind::Ramified => haar_constant(space).mul(&SymbolicScalar::q_half(1)),
        _ => haar_constant(space),
    }
}

/// Integral over S of [chi(y)] psi(c y) dy with vol(o) = 1.
pub fn gauss_integral(fp: &FieldParams, set: CoordSet, twisted: bool, c: &Padic) -> WeilResult<SymbolicScalar> {
    let lm1 = fp.legendre_m1();
    let nu = c.val_or_inf()? as i64;
    let q = |k: i32| SymbolicScalar::q_pow(k);
    match (set, twisted) {
        (CoordSet::Ideal(n), false) => Ok(if nu >= -(n as i64) { q(-n) } else { SymbolicScalar::zero() }),
        (CoordSet::Shell(n), false) => Ok(if nu >= -(n as i64) {
            q(-n).sub(&q(-n - 1))
        } else if nu == -(n as i64) - 1 {
            q(-n - 1).neg()
        } else {
            SymbolicScalar::zero()
        }),
        (CoordSet::Shell(n), true) => match fp.kind {
            ExtKind::Split => gauss_integral(fp, set, false, c),
            ExtKind::Inert => {
                let s = if n.rem_euclid(2) == 0 { 1 } else { -1 };
                Ok(gauss_integral(fp, set, false, c)?.scale_int(s))
            }
            ExtKind::Ramified => {
                if nu != -(n as i64) - 1 {
                    return Ok(SymbolicScalar::zero());
                }
                let chi_c = fp.chi(c)?;
                Ok(SymbolicScalar::tau(lm1)
                    .mul(&q(-n - 1))
                    .mul(&SymbolicScalar::sign(fp.chi_varpi * chi_c)))
            }
        },
        (CoordSet::Ideal(n), true) => match fp.kind {
            ExtKind::Split => gauss_integral(fp, set, false, c),
            ExtKind::Ramified => {
                // only the shell of valuation -ν(c) - 1 survives
                let k = -nu - 1;
                if c.is_zero() || k < n as i64 {
                    Ok(SymbolicScalar::zero())
                } else {
                    gauss_integral(fp, CoordSet::Shell(k as i32), true, c)
                }
            }
            ExtKind::Inert => {
                // shells below -ν(c), then a geometric tail on which ψ(cy) = 1
                let top = if c.is_zero() { n } else { (n as i64).max(-nu) as i32 };
                let mut acc = SymbolicScalar::zero();
                for k in n..top {
                    acc = acc.add(&gauss_integral(fp, CoordSet::Shell(k), true, c)?);
                }
                let sign = if top.rem_euclid(2) == 0 { 1 } else { -1 };
                let qq = fp.q as i64;
                let tail = q(-top).scale(&rat(sign * (qq - 1), qq + 1));
                Ok(acc.add(&tail))
            }
        },
        (s, _) => Err(WeilError::Unsupported(format!("Gauss integral over {:?}", s))),
    }
}

/// Fourier transform of a function on X.
pub fn fourier1(f: &SchwartzFunction) -> WeilResult<SchwartzFunction> {
    assert_eq!(f.arity, 1);
    fourier_block(f, 0)
}

/// Fourier transform in one variable (block 0 = x, block 1 = y).
pub fn fourier_block(f: &SchwartzFunction, block: usize) -> WeilResult<SchwartzFunction> {
    let f = f.canonical();
    let space = f.space;
    let fp = space.fp;
    let lm1 = fp.legendre_m1();
    let haar = haar_constant(&space);
    let off = 4 * block;
    let mut out = Vec::new();
    for t in &f.terms {
        for c in &t.key.cons {
            let touches = match c.form {
                Form::Xy => true,
                Form::Xx => block == 0,
                Form::Yy => block == 1,
            };
            if touches {
                return Err(WeilError::OracleOnly("form constraint on the transformed variable".into()));
            }
        }
        let mut coeff = t.coeff.mul(&haar);
        let mut key = t.key.clone();
        for j in 0..4 {
            key.twist &= !(1 << (off + j));
        }
        for j in 0..4 {
            let (i, coef) = space.partner(j);
            let vc = coef.valuation()?;
            let src = t.key.sets[off + j];
            let tw = t.is_twisted(off + j);
            match (src, tw) {
                (CoordSet::Ideal(n), false) => {
                    coeff = coeff.mul(&SymbolicScalar::q_pow(-n));
                    key.sets[off + i] = CoordSet::Ideal(-n - vc);
                }
                (CoordSet::Shell(n), true) => {
                    let s = fp.chi_varpi * fp.chi(&coef)?;
                    coeff = coeff
                        .mul(&SymbolicScalar::tau(lm1))
                        .mul(&SymbolicScalar::q_pow(-n - 1))
                        .mul(&SymbolicScalar::sign(s));
                    key.sets[off + i] = CoordSet::Shell(-n - 1 - vc);
                    key.twist |= 1 << (off + i);
                }
                (s, _) => {
                    return Err(WeilError::OracleOnly(format!("cannot transform coordinate set {:?}", s)));
                }
            }
        }
        out.push(BoxTerm { coeff, key });
    }
    Ok(SchwartzFunction::from_terms(space, f.arity, out).canonical())
}

/// Lower bound of ν(Q) on a term's support, using its box and constraints.
fn form_bound(f: &SchwartzFunction, key: &TermKey, form: Form) -> i64 {
    let mut lb = f.form_lower_bound(&key.sets, form);
    for c in &key.cons {
        if c.form == form {
            lb = lb.max(c.level as i64);
        }
    }
    lb
}

fn add_bounds(a: i64, b: i64) -> i64 {
    if a <= NEG_INF || b <= NEG_INF {
        NEG_INF
    } else if a >= POS_INF || b >= POS_INF {
        POS_INF
    } else {
        a + b
    }
}

fn var_forms(from: usize) -> (Form, Form, Form) {
    // (from-from, from-to, to-to)
    if from == 0 {
        (Form::Xx, Form::Xy, Form::Yy)
    } else {
        (Form::Yy, Form::Xy, Form::Xx)
    }
}

/// Certify that v_to ↦ v_to + b v_from leaves every term unchanged.
fn translation_invariant(f: &SchwartzFunction, from: usize, b: &Padic) -> WeilResult<()> {
    if b.is_zero() {
        return Ok(());
    }
    let to = 1 - from;
    let vb = b.valuation()? as i64;
    let (ff, ft, tt) = var_forms(from);
    for t in &f.terms {
        for j in 0..4 {
            let src = t.key.sets[4 * from + j];
            let dst = t.key.sets[4 * to + j].period();
            let ok = match dst {
                CoordSet::All => true,
                CoordSet::Zero => src == CoordSet::Zero,
                d => add_bounds(vb, src.lower()) >= d.lower(),
            };
            if !ok {
                return Err(WeilError::OracleOnly(format!("translation moves coordinate {} out of its box", j)));
            }
        }
        for c in &t.key.cons {
            let change = if c.form == ff {
                POS_INF
            } else if c.form == ft {
                add_bounds(vb, form_bound(f, &t.key, ff))
            } else {
                debug_assert_eq!(c.form, tt);
                add_bounds(vb, form_bound(f, &t.key, ft)).min(add_bounds(2 * vb, form_bound(f, &t.key, ff)))
            };
            if change < c.level as i64 {
                return Err(WeilError::OracleOnly("translation changes a form constraint".into()));
            }
        }
    }
    Ok(())
}

/// Scale the variables by units: x ↦ a x, y ↦ d y.
fn unit_scale(f: &SchwartzFunction, a: &Padic, d: &Padic) -> WeilResult<SchwartzFunction> {
    let fp = f.fp();
    let ca = fp.chi(a)?;
    let cd = fp.chi(d)?;
    let mut terms = Vec::new();
    for t in &f.terms {
        let mut s = 1i8;
        for i in 0..f.dim() {
            if t.is_twisted(i) {
                s *= if i < 4 { ca } else { cd };
            }
        }
        terms.push(BoxTerm { coeff: t.coeff.mul(&SymbolicScalar::sign(s)), key: t.key.clone() });
    }
    Ok(SchwartzFunction::from_terms(f.space, f.arity, terms))
}

/// ω(m(diag(a, d))).
fn levi_diag(f: &SchwartzFunction, a: &Padic, d: &Padic) -> WeilResult<SchwartzFunction> {
    let fp = *f.fp();
    let det = *a * *d;
    let vdet = det.valuation()?;
    let factor = SymbolicScalar::sign(fp.chi(&det)?).mul(&SymbolicScalar::q_pow(-2 * vdet));
    let g = if a.valuation()? == 0 && d.valuation()? == 0 {
        unit_scale(f, a, d)?
    } else {
        f.scale_argument(*a, Some(*d))?
    };
    Ok(g.scale(&factor).canonical())
}

/// ψ-multiplier of n(B) is identically 1 on the support of f.
fn psi_trivial(f: &SchwartzFunction, b: &[Padic; 3]) -> WeilResult<()> {
    let forms = [Form::Xx, Form::Xy, Form::Yy];
    for t in &f.terms {
        for (k, bk) in b.iter().enumerate() {
            if bk.is_zero() {
                continue;
            }
            let v = bk.valuation()? as i64;
            if add_bounds(v, form_bound(f, &t.key, forms[k])) < 0 {
                return Err(WeilError::OracleOnly(format!("psi multiplier not certified trivial on {:?}", forms[k])));
            }
        }
    }
    Ok(())
}

/// Sum over u in o/p of ψ(p^{-k} u Q) f = q 1[Q ∈ p^k] f, valid when ν(Q) ≥ k-1 on the support.
pub fn unip_coset_sum(f: &SchwartzFunction, form: Form, k: i32) -> WeilResult<SchwartzFunction> {
    let f = f.canonical();
    for t in &f.terms {
        if form_bound(&f, &t.key, form) < (k - 1) as i64 {
            return Err(WeilError::OracleOnly("coset sum needs the form in p^{k-1}".into()));
        }
    }
    Ok(f.with_constraint(form, k).scale(&SymbolicScalar::q_pow(1)).canonical())
}

/// Companion elements of GSO(X) used with similitude generators.
#[derive(Clone, Copy, Debug)]
pub enum Companion {
    Identity,
    /// split: rho(diag(u, 1), 1)
    SplitRow(Padic),
    /// non-split: rho(1, diag(u_E, 1))
    EScale(ExtElement),
    /// rho(z, 1) (split) or rho(z^{-1}, 1) (non-split); similitude z^2
    Scalar(Padic),
}

impl Companion {
    pub fn to_gso(&self, fp: &FieldParams) -> WeilResult<GsoElement> {
        let p = fp.p;
        let one = Padic::one(p);
        Ok(match self {
            Companion::Identity => GsoElement::identity(fp),
            Companion::SplitRow(u) => GsoElement::split(m2l_diag(*u, one), m2l_diag(one, one)),
            Companion::EScale(e) => GsoElement::nonsplit(one, m2e_diag(*e, ExtElement::one(fp), fp), fp)?,
            Companion::Scalar(z) => match fp.kind {
                ExtKind::Split => GsoElement::split(m2l_diag(*z, *z), m2l_diag(one, one)),
                _ => GsoElement::nonsplit(z.inv()?, m2e_diag(ExtElement::one(fp), ExtElement::one(fp), fp), fp)?,
            },
        })
    }

    pub fn lambda(&self, fp: &FieldParams) -> WeilResult<Padic> {
        Ok(self.to_gso(fp)?.lambda())
    }
}

/// An E-unit with the given norm, when one exists.
pub fn norm_preimage(fp: &FieldParams, u: &Padic) -> Option<ExtElement> {
    let p = fp.p;
    for b in 0..p as i64 {
        let bb = Padic::from_i64(p, b);
        let a2 = *u + fp.delta * bb * bb;
        if a2.is_zero() {
            continue;
        }
        if let Some(a) = a2.sqrt() {
            return Some(ExtElement::new(a, bb));
        }
    }
    None
}

/// φ ↦ φ∘h^{-1} for a companion h.
fn compose_companion(f: &SchwartzFunction, h: &Companion) -> WeilResult<SchwartzFunction> {
    let fp = *f.fp();
    match h {
        Companion::Identity => Ok(f.clone()),
        Companion::SplitRow(u) => {
            if u.valuation()? != 0 {
                return Err(WeilError::Unsupported("non-unit companion".into()));
            }
            Ok(f.clone())
        }
        Companion::EScale(e) => {
            if e.val_e(&fp)? != 0 {
                return Err(WeilError::Unsupported("non-unit companion".into()));
            }
            let nu = e.norm(&fp);
            let cn = fp.chi(&nu)?;
            let mut terms = Vec::new();
            for t in &f.canonical().terms {
                let mut s = 1i8;
                for blk in 0..f.arity {
                    let o = 4 * blk;
                    if t.is_twisted(o) || t.is_twisted(o + 1) {
                        return Err(WeilError::OracleOnly("twisted E-coordinate".into()));
                    }
                    if !e_stable(fp.kind, t.key.sets[o], t.key.sets[o + 1]) {
                        return Err(WeilError::OracleOnly("E-coordinate box is not an o_E-module".into()));
                    }
                    if t.is_twisted(o + 2) {
                        s *= cn;
                    }
                }
                terms.push(BoxTerm { coeff: t.coeff.mul(&SymbolicScalar::sign(s)), key: t.key.clone() });
            }
            Ok(SchwartzFunction::from_terms(f.space, f.arity, terms))
        }
        Companion::Scalar(z) => {
            // h x = z x in both models
            let zi = z.inv()?;
            f.scale_argument(zi, if f.arity == 2 { Some(zi) } else { None })
            .map_err(WeilError::from)
        }
    }
}

/// Is the pair box an o_E-submodule of E?
pub fn e_stable(kind: ExtKind, a: CoordSet, b: CoordSet) -> bool {
    match (a, b) {
        (CoordSet::All, CoordSet::All) | (CoordSet::Zero, CoordSet::Zero) => true,
        (CoordSet::Ideal(x), CoordSet::Ideal(y)) => match kind {
            ExtKind::Ramified => x == y || x == y + 1,
            _ => x == y,
        },
        _ => false,
    }
}

/// Symplectic generators and similitudes supported by the symbolic engine.
#[derive(Clone, Debug)]
pub enum Generator {
    /// m(A) with A = [[a1, a2], [a3, a4]], a1 ≠ 0.
    Levi(M2L),
    /// n(B) with B = [[b1, b2], [b2, b3]].
    Unip([Padic; 3]),
    S1,
    S2,
    J,
    TN(i32),
    /// diag(1, 1, u, u) together with a companion of similitude u.
    Similitude(Padic, Companion),
    /// z 1_4 together with the companion Scalar(z).
    Central(Padic),
    /// lower(C) = [[1, 0], [C, 1]], C = [[c1, c2], [c2, c3]], certified by
    /// conjugating with t_N s2.
    LowerConj([Padic; 3], i32),
}

impl Generator {
    pub fn name(&self) -> &'static str {
        match self {
            Generator::Levi(_) => "levi",
            Generator::Unip(_) => "unipotent",
            Generator::S1 => "s1",
            Generator::S2 => "s2",
            Generator::J => "J",
            Generator::TN(_) => "t_N",
            Generator::Similitude(..) => "similitude",
            Generator::Central(_) => "central",
            Generator::LowerConj(..) => "lower",
        }
    }
}

/// ω(g, h) φ for a supported generator (φ on X x X).
pub fn weil_apply(g: &Generator, f: &SchwartzFunction) -> WeilResult<SchwartzFunction> {
    assert_eq!(f.arity, 2, "the Weil action is on functions on X x X");
    let f = f.canonical();
    let p = f.fp().p;
    let gamma = SymbolicScalar::gamma_pow(1);
    match g {
        Generator::Levi(a) => {
            let a1 = a[0][0];
            if a1.is_zero() {
                return Err(WeilError::Unsupported("Levi block with a1 = 0".into()));
            }
            let a1i = a1.inv()?;
            let det = a1 * a[1][1] - a[0][1] * a[1][0];
            // A = [[1,0],[a3/a1,1]] diag(a1, det/a1) [[1,a2/a1],[0,1]]
            let upper = a[0][1] * a1i;
            let lower = a[1][0] * a1i;
            translation_invariant(&f, 0, &upper)?;
            let g1 = levi_diag(&f, &a1, &(det * a1i))?;
            translation_invariant(&g1, 1, &lower)?;
            Ok(g1)
        }
        Generator::Unip(b) => {
            psi_trivial(&f, b)?;
            Ok(f)
        }
        Generator::S1 => Ok(fourier_block(&f, 0)?.scale(&gamma).canonical()),
        Generator::S2 => Ok(fourier_block(&f, 1)?.scale(&gamma).canonical()),
        Generator::J => Ok(fourier_block(&fourier_block(&f, 0)?, 1)?
            .scale(&gamma.mul(&gamma))
            .canonical()),
        Generator::TN(n) => {
            let fp = *f.fp();
            let s = if n.rem_euclid(2) == 0 { 1 } else { fp.chi_varpi };
            let scaled = f
                .scale_argument(Padic::uniformizer_pow(p, *n), Some(Padic::one(p)))?
                .scale(&SymbolicScalar::sign(s).mul(&SymbolicScalar::q_pow(-2 * n)));
            Ok(fourier_block(&scaled, 0)?.scale(&gamma).canonical())
        }
        Generator::Similitude(u, h) => {
            let fp = *f.fp();
            if !h.lambda(&fp)?.approx_eq(u) {
                return Err(WeilError::Unsupported("companion similitude does not match".into()));
            }
            let vu = u.valuation()?;
            // ω(g, h) φ = |λ|^{-2} ω(g diag(1,1,λ^{-1},λ^{-1}), 1)(φ∘h^{-1}); here the Sp part is 1
            let g0 = compose_companion(&f, h)?;
            Ok(g0.scale(&SymbolicScalar::q_pow(2 * vu)).canonical())
        }
        Generator::Central(z) => {
            // z 1_4 = diag(z, z, z^{-1}, z^{-1}) diag(1, 1, z^2, z^2)
            let vz = z.valuation()?;
            let g0 = compose_companion(&f, &Companion::Scalar(*z))?;
            let g1 = levi_diag(&g0, z, z)?;
            Ok(g1.scale(&SymbolicScalar::q_pow(4 * vz)).canonical())
        }
        Generator::LowerConj(c, n) => {
            let phi_conj = weil_apply(&Generator::TN(*n), &weil_apply(&Generator::S2, &f)?)?;
            let pn = Padic::uniformizer_pow(p, -*n);
            let b = [-(c[0] * pn * pn), -(c[1] * pn), -c[2]];
            psi_trivial(&phi_conj, &b)?;
            Ok(f)
        }
    }
}

/// Compare ω(g)φ with γ^k φ; returns the k that matches.
pub fn invariance_exponent(g: &Generator, f: &SchwartzFunction) -> WeilResult<Option<u8>> {
    let h = weil_apply(g, f)?;
    for k in 0..4 {
        let target = f.scale(&SymbolicScalar::gamma_pow(k));
        if h.equal(&target).equal {
            return Ok(Some(k as u8));
        }
    }
    Ok(None)
}

/// Deterministic family of test functions on X: products of ideal, shell and
/// twisted-shell boxes at levels -1..2, plus a few linear combinations.
pub fn fourier_library(space: QuadSpace) -> Vec<(String, SchwartzFunction)> {
    use crate::schwartz::Factor;
    let kind = space.fp.kind;
    let mut out = Vec::new();
    for i in 0..24usize {
        let lv = |k: usize| ((i / k) % 4) as i32 - 1;
        let mut factors = Vec::new();
        let mut label = Vec::new();
        if kind == ExtKind::Ramified && i % 3 == 0 {
            factors.push(if i % 2 == 0 { Factor::e_ideal(kind, 0, lv(1)) } else { Factor::e_shell(kind, 0, lv(1)) });
            label.push(format!("E{}{}", if i % 2 == 0 { "P" } else { "S" }, lv(1)));
        } else {
            factors.push(Factor::single(0, CoordSet::Ideal(lv(1))));
            factors.push(Factor::single(1, if i % 2 == 0 { CoordSet::Ideal(lv(2)) } else { CoordSet::Shell(lv(2)) }));
            label.push(format!("I{}", lv(1)));
            label.push(format!("{}{}", if i % 2 == 0 { "I" } else { "S" }, lv(2)));
        }
        factors.push(Factor::single(2, CoordSet::Ideal(lv(3))));
        label.push(format!("I{}", lv(3)));
        if i % 4 == 3 {
            factors.push(Factor::twisted_shell(3, lv(5)));
            label.push(format!("T{}", lv(5)));
        } else {
            factors.push(Factor::single(3, CoordSet::Shell(lv(5))));
            label.push(format!("S{}", lv(5)));
        }
        out.push((label.join("x"), SchwartzFunction::product(space, 1, &factors)));
    }
    for i in 0..4 {
        let (a, b) = (&out[i].1, &out[i + 5].1);
        let f = a.add(&b.scale(&SymbolicScalar::from_ratio(-3, 2)));
        out.push((format!("{} - 3/2 {}", out[i].0, out[i + 5].0), f));
    }
    out
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct InvolutionReport {
    pub kind: &'static str,
    pub p: u32,
    pub functions: usize,
    pub failures: Vec<String>,
    pub haar_constant: String,
    pub haar_constant_relative_to_e: String,
    pub haar_expected: String,
    pub passed: bool,
}

/// Checks F(F f)(x) = f(-x) on the library and the Haar constant
/// (1 for split and inert, q_E^{-1} = q^{-1} for ramified).
pub fn involution_report(space: QuadSpace) -> WeilResult<InvolutionReport> {
    let lib = fourier_library(space);
    let mut failures = Vec::new();
    let minus_one = Padic::from_i64(space.p(), -1);
    for (label, f) in &lib {
        let ff = fourier1(&fourier1(f)?)?;
        let neg = f.scale_argument(minus_one, None)?;
        let v = ff.equal(&neg);
        if !v.equal || v.certificate != crate::schwartz::Certificate::Canonical {
            failures.push(label.clone());
        }
    }
    let expected = match space.fp.kind {
        ExtKind::Ramified => SymbolicScalar::q_pow(-1),
        _ => SymbolicScalar::one(),
    };
    let rel = haar_constant_relative_to_e(&space);
    Ok(InvolutionReport {
        kind: space.fp.kind.name(),
        p: space.p(),
        functions: lib.len(),
        passed: failures.is_empty() && rel == expected,
        failures,
        haar_constant: haar_constant(&space).to_string(),
        haar_constant_relative_to_e: rel.to_string(),
        haar_expected: expected.to_string(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResolvedConstants {
    pub gamma: [f64; 2],
    pub tau: [f64; 2],
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schwartz::{CoordSet::*, Factor};

    fn space(kind: ExtKind, p: u32) -> QuadSpace {
        QuadSpace::new(FieldParams::new(p, kind).unwrap())
    }

    #[test]
    fn gauss_integral_closed_values() {
        let fp = FieldParams::new(5, ExtKind::Ramified).unwrap();
        let c = Padic::exact(5, -1, 1);
        assert!(gauss_integral(&fp, Ideal(0), false, &c).unwrap().is_zero());
        assert_eq!(gauss_integral(&fp, Shell(0), false, &c).unwrap(), SymbolicScalar::q_pow(-1).neg());
        let v = gauss_integral(&fp, Shell(0), true, &c).unwrap();
        assert_eq!(v, SymbolicScalar::tau(1).mul(&SymbolicScalar::q_pow(-1)).scale_int(fp.chi_varpi as i64));
    }

    #[test]
    fn integral_matrices_are_self_dual() {
        for kind in [ExtKind::Split, ExtKind::Inert] {
            let x = space(kind, 3);
            let f = SchwartzFunction::indicator(x, vec![Ideal(0); 4]);
            assert!(fourier1(&f).unwrap().equal(&f).equal);
        }
    }

    #[test]
    fn haar_constants() {
        assert_eq!(haar_constant(&space(ExtKind::Split, 5)), SymbolicScalar::one());
        assert_eq!(haar_constant(&space(ExtKind::Inert, 5)), SymbolicScalar::one());
        assert_eq!(haar_constant(&space(ExtKind::Ramified, 5)), SymbolicScalar::q_half(-3));
        assert_eq!(haar_constant_relative_to_e(&space(ExtKind::Ramified, 5)), SymbolicScalar::q_pow(-1));
    }

    #[test]
    fn involution_on_twisted_function() {
        let x = space(ExtKind::Ramified, 3);
        let f = SchwartzFunction::product(
            x,
            1,
            &[Factor::e_ideal(ExtKind::Ramified, 0, 1), Factor::single(2, Ideal(0)), Factor::twisted_shell(3, 2)],
        );
        let ff = fourier1(&fourier1(&f).unwrap()).unwrap();
        let neg = f.scale_argument(Padic::from_i64(3, -1), None).unwrap();
        assert!(ff.equal(&neg).equal);
    }

    #[test]
    fn library_involution_at_three() {
        for kind in [ExtKind::Split, ExtKind::Inert, ExtKind::Ramified] {
            let r = involution_report(space(kind, 3)).unwrap();
            assert!(r.functions >= 20);
            assert!(r.passed, "{:?}", r);
        }
    }

    #[test]
    fn central_element_acts_trivially() {
        for kind in [ExtKind::Split, ExtKind::Inert, ExtKind::Ramified] {
            let x = space(kind, 5);
            let f1 = SchwartzFunction::indicator(x, vec![Ideal(1), Ideal(0), Ideal(2), Ideal(-1)]);
            let f = SchwartzFunction::tensor(&f1, &f1);
            for z in [Padic::exact(5, 1, 2), Padic::from_i64(5, 3)] {
                let g = weil_apply(&Generator::Central(z), &f).unwrap();
                assert!(g.equal(&f).equal);
            }
        }
    }
}
