//! The explicit test functions φ for the three extension types, their
//! paramodular invariance, support classification on H\SO(X), and the Bessel
//! integral at the identity with Z(s, W) kept as a formal symbol.

use crate::gsp4cosets::{closure_scan, cosets, generators_k, residues, ClosureReport, CosetKind, GenInstance, Gsp4Matrix};
use crate::localfield::{legendre, smallest_nonresidue, ExtElement, ExtKind, FieldError, FieldParams, Padic};
use crate::oracle::{resolve_constants, OracleError, ResolvedConstants, C64};
use crate::quadspace::{m2e_det, m2e_inv, m2l_det, GsoElement, QuadSpace, XPoint, M2E, M2L};
use crate::schwartz::{Certificate, CoordSet, Factor, Form, SchwartzFunction};
use crate::symbolic::{rat, SymbolicScalar};
use crate::weilrep::{fourier1, invariance_exponent, norm_preimage, unip_coset_sum, weil_apply, Companion, Generator, WeilError};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Levels above this are rejected (Padic precision and sweep sizes).
pub const MAX_LEVEL: u32 = 6;
/// Budget for extensional comparisons that need a residue scan.
const COMPARE_BUDGET: u64 = 50_000;

#[derive(Debug, Error)]
pub enum LiftError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("element is not in SO(X)")]
    NotOrthogonal,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Weil(#[from] WeilError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

pub type LiftResult<T> = Result<T, LiftError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Case {
    Split { n1: u32, n2: u32 },
    Inert { n: u32 },
    Ramified { n: u32 },
}

impl Case {
    pub fn new(kind: ExtKind, n: Option<u32>, n1: Option<u32>, n2: Option<u32>) -> LiftResult<Case> {
        let case = match kind {
            ExtKind::Split => {
                if n.is_some() {
                    return Err(LiftError::Config("split case takes --n1 and --n2".into()));
                }
                Case::Split { n1: n1.unwrap_or(0), n2: n2.unwrap_or(0) }
            }
            _ => {
                if n1.is_some() || n2.is_some() {
                    return Err(LiftError::Config("non-split cases take --n".into()));
                }
                let n = n.unwrap_or(0);
                if kind == ExtKind::Inert {
                    Case::Inert { n }
                } else {
                    Case::Ramified { n }
                }
            }
        };
        if case.level() as u32 > MAX_LEVEL + 2 || case.n_max() > MAX_LEVEL {
            return Err(LiftError::Config(format!("levels above {} are not supported", MAX_LEVEL)));
        }
        Ok(case)
    }

    pub fn kind(&self) -> ExtKind {
        match self {
            Case::Split { .. } => ExtKind::Split,
            Case::Inert { .. } => ExtKind::Inert,
            Case::Ramified { .. } => ExtKind::Ramified,
        }
    }

    /// The paramodular level N.
    pub fn level(&self) -> i32 {
        match *self {
            Case::Split { n1, n2 } => (n1 + n2) as i32,
            Case::Inert { n } => 2 * n as i32,
            Case::Ramified { n } => n as i32 + 2,
        }
    }

    pub fn n_max(&self) -> u32 {
        match *self {
            Case::Split { n1, n2 } => n1.max(n2),
            Case::Inert { n } | Case::Ramified { n } => n,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind().name()
    }

    pub fn levels_json(&self) -> Value {
        match *self {
            Case::Split { n1, n2 } => json!({ "n1": n1, "n2": n2 }),
            Case::Inert { n } | Case::Ramified { n } => json!({ "n": n }),
        }
    }
}

/// A case over a concrete residue characteristic.
#[derive(Clone, Copy, Debug)]
pub struct Lift {
    pub case: Case,
    pub space: QuadSpace,
}

impl Lift {
    pub fn new(p: u32, case: Case) -> LiftResult<Lift> {
        let fp = FieldParams::new(p, case.kind())?;
        Ok(Lift { case, space: QuadSpace::new(fp) })
    }

    pub fn fp(&self) -> &FieldParams {
        &self.space.fp
    }

    pub fn p(&self) -> u32 {
        self.space.fp.p
    }

    pub fn q(&self) -> u32 {
        self.space.fp.q
    }

    pub fn level(&self) -> i32 {
        self.case.level()
    }

    /// χ(2) for the field (trivial unless ramified).
    pub fn chi_two(&self) -> i8 {
        match self.case {
            Case::Ramified { .. } => legendre(2, self.p()),
            _ => 1,
        }
    }

    /// χ(δ); for δ = ϖ this is forced to be (−1|p).
    pub fn chi_delta(&self) -> i8 {
        match self.case {
            Case::Ramified { .. } => self.fp().chi(&self.fp().delta).expect("delta is nonzero"),
            _ => 1,
        }
    }
}

/// One of the four explicit summands of the ramified φ.
#[derive(Clone, Debug)]
pub struct Summand {
    pub label: &'static str,
    /// The explicit box formula without its weight.
    pub display: SchwartzFunction,
    /// The weight in front of the explicit formula.
    pub weight: SymbolicScalar,
    /// Σ ω(r) φ̃ over the corresponding block of coset representatives.
    pub block: SchwartzFunction,
    /// block = kappa · display, when certified.
    pub kappa: Option<SymbolicScalar>,
    pub certificate: Certificate,
}

#[derive(Clone, Debug)]
pub struct PhiBundle {
    pub case: Case,
    /// The K(p^N)-invariant function.
    pub phi: SchwartzFunction,
    /// Ramified: the T-invariant seed φ̃ = φ1 ⊗ φ2.
    pub seed: Option<SchwartzFunction>,
    pub factors: Option<(SchwartzFunction, SchwartzFunction)>,
    pub summands: Vec<Summand>,
}

impl PhiBundle {
    /// The weighted sum of the explicit summands (ramified) or φ itself.
    pub fn displayed(&self) -> SchwartzFunction {
        if self.summands.is_empty() {
            return self.phi.clone();
        }
        let mut acc = SchwartzFunction::zero(self.phi.space, 2);
        for s in &self.summands {
            acc = acc.add(&s.display.scale(&s.weight));
        }
        acc
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "case": self.case.name(),
            "levels": self.case.levels_json(),
            "N": self.case.level(),
            "phi": self.phi.to_json(),
        });
        if let Some(s) = &self.seed {
            v["seed"] = s.to_json();
        }
        if !self.summands.is_empty() {
            v["summands"] = Value::Array(
                self.summands
                    .iter()
                    .map(|s| {
                        json!({
                            "label": s.label,
                            "weight": s.weight.to_string(),
                            "kappa": s.kappa.as_ref().map(|k| k.to_string()),
                            "certificate": s.certificate,
                            "display": s.display.to_json(),
                        })
                    })
                    .collect(),
            );
        }
        v
    }
}

fn ramified_factors(space: QuadSpace, n: i32) -> (SchwartzFunction, SchwartzFunction) {
    let k = ExtKind::Ramified;
    let phi1 = SchwartzFunction::product(
        space,
        1,
        &[Factor::e_ideal(k, 0, n + 1), Factor::single(2, CoordSet::Ideal(0)), Factor::twisted_shell(3, n)],
    );
    let phi2 = SchwartzFunction::product(
        space,
        1,
        &[Factor::e_ideal(k, 0, -1), Factor::single(2, CoordSet::Ideal(-1)), Factor::twisted_shell(3, -1)],
    );
    (phi1, phi2)
}

/// The boxes on the right of the two Fourier identities:
/// χ(x2) f_{P^{N}}(x1) f_{o^×}(x2) f_{p^{N-1}}(x3) and χ(x2) f_{o_E}(x1) f_{p^{-1} o^×}(x2) f_o(x3).
pub fn ramified_fourier_targets(space: QuadSpace, n: i32) -> (SchwartzFunction, SchwartzFunction) {
    let k = ExtKind::Ramified;
    let big_n = n + 2;
    let g1 = SchwartzFunction::product(
        space,
        1,
        &[Factor::e_ideal(k, 0, big_n), Factor::twisted_shell(2, 0), Factor::single(3, CoordSet::Ideal(big_n - 1))],
    );
    let g2 = SchwartzFunction::product(
        space,
        1,
        &[Factor::e_ideal(k, 0, 0), Factor::twisted_shell(2, -1), Factor::single(3, CoordSet::Ideal(0))],
    );
    (g1, g2)
}

/// Find kappa with block = kappa · display.
fn proportionality(block: &SchwartzFunction, display: &SchwartzFunction, seed: u64) -> (Option<SymbolicScalar>, Certificate) {
    let b = block.canonical();
    let d = display.canonical();
    let Some(t0) = d.terms.first() else {
        return (None, Certificate::Undecided);
    };
    let Some(bt) = b.terms.iter().find(|t| t.key == t0.key) else {
        return (None, Certificate::Undecided);
    };
    let Some(k) = bt.coeff.div_monomial(&t0.coeff) else {
        return (None, Certificate::Undecided);
    };
    let v = b.equal_with_budget(&d.scale(&k), COMPARE_BUDGET, seed);
    if v.equal {
        (Some(k), v.certificate)
    } else {
        (None, v.certificate)
    }
}

pub fn build_phi(lift: &Lift) -> LiftResult<PhiBundle> {
    let space = lift.space;
    let c = CoordSet::Ideal;
    match lift.case {
        Case::Split { n1, n2 } => {
            let (n1, n2) = (n1 as i32, n2 as i32);
            let sets = vec![c(n2), c(0), c(n1 + n2), c(n1), c(0), c(0), c(0), c(0)];
            Ok(PhiBundle {
                case: lift.case,
                phi: SchwartzFunction::indicator(space, sets),
                seed: None,
                factors: None,
                summands: vec![],
            })
        }
        Case::Inert { n } => {
            let n = n as i32;
            let sets = vec![c(n), c(n), c(0), c(2 * n), c(0), c(0), c(0), c(0)];
            Ok(PhiBundle {
                case: lift.case,
                phi: SchwartzFunction::indicator(space, sets),
                seed: None,
                factors: None,
                summands: vec![],
            })
        }
        Case::Ramified { n } => {
            let n = n as i32;
            let big_n = n + 2;
            let (phi1, phi2) = ramified_factors(space, n);
            let (g1, g2) = ramified_fourier_targets(space, n);
            let seed = SchwartzFunction::tensor(&phi1, &phi2);
            let q = SymbolicScalar::q_pow(1);
            let displays = [
                ("x-lattice", SchwartzFunction::tensor(&phi1, &phi2).with_constraint(Form::Xx, big_n).with_constraint(Form::Yy, 0), SymbolicScalar::q_pow(2)),
                ("y-dual", SchwartzFunction::tensor(&phi1, &g2).with_constraint(Form::Xx, big_n), q.clone()),
                ("x-dual", SchwartzFunction::tensor(&g1, &phi2).with_constraint(Form::Yy, 0), q),
                ("both-dual", SchwartzFunction::tensor(&g1, &g2), SymbolicScalar::one()),
            ];
            let sx = unip_coset_sum(&seed, Form::Xx, big_n)?;
            let sy = unip_coset_sum(&seed, Form::Yy, 0)?;
            let blocks = [
                unip_coset_sum(&sx, Form::Yy, 0)?,
                weil_apply(&Generator::S2, &sx)?,
                weil_apply(&Generator::TN(big_n), &sy)?,
                weil_apply(&Generator::TN(big_n), &weil_apply(&Generator::S2, &seed)?)?,
            ];
            let mut phi = SchwartzFunction::zero(space, 2);
            let mut summands = Vec::new();
            for (i, ((label, display, weight), block)) in displays.into_iter().zip(blocks).enumerate() {
                phi = phi.add(&block);
                let (kappa, certificate) = proportionality(&block, &display, 0x5eed + i as u64);
                summands.push(Summand { label, display, weight, block, kappa, certificate });
            }
            Ok(PhiBundle {
                case: lift.case,
                phi: phi.canonical(),
                seed: Some(seed),
                factors: Some((phi1, phi2)),
                summands,
            })
        }
    }
}

/// Box-level disjointness of two coordinate sets.
fn sets_disjoint(a: CoordSet, b: CoordSet) -> bool {
    use CoordSet::*;
    match (a, b) {
        (Shell(m), Shell(k)) => m != k,
        (Shell(m), Ideal(k)) | (Ideal(k), Shell(m)) => k > m,
        (Shell(_), Zero) | (Zero, Shell(_)) => true,
        _ => false,
    }
}

/// Pairs (i, j) of explicit summands whose boxes may overlap.
pub fn summand_overlaps(bundle: &PhiBundle) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let s = &bundle.summands;
    for i in 0..s.len() {
        for j in (i + 1)..s.len() {
            let overlap = s[i].display.terms.iter().any(|a| {
                s[j].display.terms.iter().any(|b| !a.key.sets.iter().zip(&b.key.sets).any(|(x, y)| sets_disjoint(*x, *y)))
            });
            if overlap {
                out.push((i, j));
            }
        }
    }
    out
}

/// Result of checking F1(φ_i) against its explicit right-hand side.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FourierIdentity {
    pub label: String,
    /// F = q_power · kappa · target.
    pub q_power: Option<String>,
    pub kappa: Option<String>,
    pub kappa_fourth_is_one: bool,
    pub kappa_modulus: Option<f64>,
    pub passed: bool,
}

fn unimodular_part(c: &SymbolicScalar, q: u32) -> Option<(SymbolicScalar, SymbolicScalar)> {
    let (g, m) = c.as_monomial()?;
    // |c|^2 = |g|^2 q^{q2 + tau}; |g|^2 must be a power of q
    let qq = num_bigint::BigInt::from(q);
    let mut num = g.norm_sqr().numer().clone();
    let mut den = g.norm_sqr().denom().clone();
    let mut k = 0i32;
    while (&num % &qq).is_zero() {
        num /= &qq;
        k += 1;
    }
    while (&den % &qq).is_zero() {
        den /= &qq;
        k -= 1;
    }
    if !num.is_one() || !den.is_one() {
        return None;
    }
    let qp = SymbolicScalar::q_half(k + m.q2 + m.tau as i32);
    let kappa = c.div_monomial(&qp)?;
    Some((qp, kappa))
}

pub fn fourier_identities(lift: &Lift, consts: &ResolvedConstants) -> LiftResult<Vec<FourierIdentity>> {
    let Case::Ramified { n } = lift.case else {
        return Ok(vec![]);
    };
    let n = n as i32;
    let big_n = n + 2;
    let p = lift.p();
    let (phi1, phi2) = ramified_factors(lift.space, n);
    let (g1, g2) = ramified_fourier_targets(lift.space, n);
    let lhs1 = fourier1(&phi1)?.scale_argument(Padic::uniformizer_pow(p, -big_n), None)?.scale(&SymbolicScalar::q_pow(big_n));
    let lhs2 = fourier1(&phi2)?;
    let mut out = Vec::new();
    for (label, lhs, target) in [("F(phi1)(p^-N x)", lhs1, g1), ("F(phi2)", lhs2, g2)] {
        let (k, _) = proportionality(&lhs, &target, 7);
        let mut fi = FourierIdentity {
            label: label.into(),
            q_power: None,
            kappa: None,
            kappa_fourth_is_one: false,
            kappa_modulus: None,
            passed: false,
        };
        if let Some(k) = k {
            if let Some((qp, kappa)) = unimodular_part(&k, lift.q()) {
                let k4 = kappa.mul(&kappa).mul(&kappa).mul(&kappa);
                fi.kappa_fourth_is_one = k4 == SymbolicScalar::one();
                let m = consts.eval(&kappa, lift.q()).norm();
                fi.kappa_modulus = Some(m);
                fi.q_power = Some(qp.to_string());
                fi.kappa = Some(kappa.to_string());
                fi.passed = fi.kappa_fourth_is_one && (m - 1.0).abs() <= 1e-9;
            }
        }
        out.push(fi);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// invariance

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FamilyVerdict {
    pub family: String,
    /// "phi", or "seed" for the ramified T-invariant seed.
    pub target: &'static str,
    pub instances: usize,
    /// Distinct symbolic evaluations (instances grouped by valuation and leading residue).
    pub distinct: usize,
    pub skipped: usize,
    pub failures: usize,
    pub gamma_exponents: Vec<u8>,
    pub certificate: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CosetSumCheck {
    pub label: String,
    pub weight: String,
    pub kappa: Option<String>,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct InvarianceReport {
    pub case: &'static str,
    pub levels: Value,
    #[serde(rename = "N")]
    pub level: i32,
    pub p: u32,
    pub depth: u32,
    pub families: Vec<FamilyVerdict>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub seed_families: Vec<FamilyVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closure: Option<ClosureReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub coset_sum: Vec<CosetSumCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_moved_by_t_n: Option<bool>,
    pub passed: bool,
}

fn padic_sig(x: &Padic) -> String {
    if x.is_zero() {
        return "0".into();
    }
    match (x.valuation(), x.unit_residue(1)) {
        (Ok(v), Ok(r)) => format!("{}:{}", v, r),
        _ => format!("{}", x),
    }
}

/// The symbolic engine's verdict depends only on valuations and leading residues.
fn signature(g: &Generator) -> String {
    match g {
        Generator::Levi(a) => format!("L[{},{},{},{}]", padic_sig(&a[0][0]), padic_sig(&a[0][1]), padic_sig(&a[1][0]), padic_sig(&a[1][1])),
        Generator::Unip(b) => format!("U[{},{},{}]", padic_sig(&b[0]), padic_sig(&b[1]), padic_sig(&b[2])),
        Generator::Similitude(u, _) => format!("S[{}]", padic_sig(u)),
        Generator::Central(z) => format!("Z[{}]", padic_sig(z)),
        Generator::LowerConj(c, n) => format!("C{}[{},{},{}]", n, padic_sig(&c[0]), padic_sig(&c[1]), padic_sig(&c[2])),
        Generator::TN(n) => format!("T{}", n),
        other => other.name().to_string(),
    }
}

/// Attach the companion h with λ(h) = u to similitude generators.
fn with_companion(g: &Generator, fp: &FieldParams) -> Option<Generator> {
    match g {
        Generator::Similitude(u, _) => match fp.kind {
            ExtKind::Split => Some(Generator::Similitude(*u, Companion::SplitRow(*u))),
            _ => norm_preimage(fp, u).map(|e| Generator::Similitude(*u, Companion::EScale(e))),
        },
        other => Some(other.clone()),
    }
}

fn gamma_power_is_one(consts: &ResolvedConstants, k: u8) -> bool {
    let g = C64::new(consts.gamma[0], consts.gamma[1]);
    (g.powi(k as i32) - C64::new(1.0, 0.0)).norm() <= 1e-9
}

fn sweep_family(
    f: &SchwartzFunction,
    family: &str,
    target: &'static str,
    ops: &[Generator],
    consts: &ResolvedConstants,
) -> FamilyVerdict {
    let fp = *f.fp();
    let mut groups: BTreeMap<String, Generator> = BTreeMap::new();
    let mut skipped = 0;
    let mut instances = 0;
    for op in ops {
        match with_companion(op, &fp) {
            Some(g) => {
                instances += 1;
                groups.entry(signature(&g)).or_insert(g);
            }
            None => skipped += 1,
        }
    }
    let reps: Vec<(&String, &Generator)> = groups.iter().collect();
    let results: Vec<(String, Result<Option<u8>, String>)> = reps
        .par_iter()
        .map(|(sig, g)| ((*sig).clone(), invariance_exponent(g, f).map_err(|e| e.to_string())))
        .collect();
    let mut failures = 0;
    let mut exps = BTreeSet::new();
    let mut notes = Vec::new();
    for (sig, r) in results {
        match r {
            Ok(Some(k)) => {
                exps.insert(k);
                if !gamma_power_is_one(consts, k) {
                    failures += 1;
                    notes.push(format!("{}: gamma^{} does not resolve to 1", sig, k));
                }
            }
            Ok(None) => {
                failures += 1;
                notes.push(format!("{}: not invariant", sig));
            }
            Err(e) => {
                failures += 1;
                notes.push(format!("{}: {}", sig, e));
            }
        }
    }
    notes.truncate(8);
    FamilyVerdict {
        family: family.to_string(),
        target,
        instances,
        distinct: groups.len(),
        skipped,
        failures,
        gamma_exponents: exps.into_iter().collect(),
        certificate: "symbolic".into(),
        passed: failures == 0 && instances > 0,
        notes,
    }
}

/// Generators of K(p^N) ∩ T(p^N) for the ramified seed, swept at the given depth.
pub fn t_generators(p: u32, n: i32, depth: u32) -> Vec<(&'static str, Vec<GenInstance>)> {
    let pad = |k: i64| Padic::from_i64(p, k);
    let zero = Padic::zero(p);
    let keep = ["levi_diag_a", "levi_diag_d", "levi_upper", "levi_lower", "similitude", "unip_b2"];
    let mut out: Vec<(&'static str, Vec<GenInstance>)> =
        generators_k(p, n, depth).into_iter().filter(|(f, _)| keep.contains(f)).collect();
    let all = residues(p, depth);
    let unip = |family: &'static str, k: usize, shift: i32| -> Vec<GenInstance> {
        all.iter()
            .map(|&b| {
                let mut bs = [zero, zero, zero];
                bs[k] = pad(b) * Padic::uniformizer_pow(p, shift);
                GenInstance { family, matrix: Gsp4Matrix::unipotent(bs[0], bs[1], bs[2]), op: Generator::Unip(bs) }
            })
            .collect()
    };
    out.push(("unip_b1_t", unip("unip_b1_t", 0, 1 - n)));
    out.push(("unip_b3_t", unip("unip_b3_t", 2, 1)));
    for (k, family, shift) in [(0usize, "lower_c1", n), (1, "lower_c2", n - 1), (2, "lower_c3", 0)] {
        let d = depth.saturating_sub(shift.max(0) as u32).max(1);
        out.push((
            family,
            residues(p, d)
                .iter()
                .map(|&c| {
                    let mut cs = [zero, zero, zero];
                    cs[k] = pad(c) * Padic::uniformizer_pow(p, shift);
                    GenInstance { family, matrix: Gsp4Matrix::lower(cs[0], cs[1], cs[2]), op: Generator::LowerConj(cs, n) }
                })
                .collect(),
        ));
    }
    out
}

pub fn invariance_report(lift: &Lift, bundle: &PhiBundle, depth: u32) -> LiftResult<InvarianceReport> {
    let p = lift.p();
    let n = lift.level();
    let consts = resolve_constants(&lift.space)?;
    let fams = generators_k(p, n, depth);
    let mut rep = InvarianceReport {
        case: lift.case.name(),
        levels: lift.case.levels_json(),
        level: n,
        p,
        depth,
        families: vec![],
        seed_families: vec![],
        closure: None,
        coset_sum: vec![],
        seed_moved_by_t_n: None,
        passed: false,
    };
    match &bundle.seed {
        None => {
            for (name, insts) in &fams {
                let ops: Vec<Generator> = insts.iter().map(|g| g.op.clone()).collect();
                rep.families.push(sweep_family(&bundle.phi, name, "phi", &ops, &consts));
            }
            rep.passed = rep.families.iter().all(|f| f.passed);
        }
        Some(seed) => {
            for (name, insts) in t_generators(p, n, depth) {
                let ops: Vec<Generator> = insts.iter().map(|g| g.op.clone()).collect();
                rep.seed_families.push(sweep_family(seed, name, "seed", &ops, &consts));
            }
            let seed_ok = rep.seed_families.iter().all(|f| f.passed);
            let list = cosets(CosetKind::KModKT, p, n);
            let mut total = ClosureReport::default();
            for (name, insts) in &fams {
                let c = closure_scan(&list, &[(name, insts.clone())]);
                let ok = c.passed();
                total.instances += c.instances;
                total.pairs += c.pairs;
                total.unmatched += c.unmatched;
                total.ambiguous += c.ambiguous;
                total.undecided += c.undecided;
                total.not_permutation += c.not_permutation;
                rep.families.push(FamilyVerdict {
                    family: name.to_string(),
                    target: "phi",
                    instances: c.instances,
                    distinct: c.instances,
                    skipped: 0,
                    failures: c.unmatched + c.ambiguous + c.undecided + c.not_permutation,
                    gamma_exponents: vec![],
                    certificate: "coset-closure".into(),
                    passed: ok && seed_ok,
                    notes: if seed_ok { vec![] } else { vec!["seed is not T-invariant".into()] },
                });
            }
            let mut sums_ok = true;
            for s in &bundle.summands {
                sums_ok &= s.kappa.is_some();
                rep.coset_sum.push(CosetSumCheck {
                    label: s.label.into(),
                    weight: s.weight.to_string(),
                    kappa: s.kappa.as_ref().map(|k| k.to_string()),
                    certificate: s.certificate,
                });
            }
            rep.seed_moved_by_t_n = Some(match invariance_exponent(&Generator::TN(n), seed) {
                Ok(Some(k)) => !gamma_power_is_one(&consts, k),
                _ => true,
            });
            rep.passed = seed_ok && total.passed() && sums_ok;
            rep.closure = Some(total);
        }
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// support on H\SO(X)

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum SupportClass {
    Outside,
    Inside,
    FamilyA,
    FamilyB,
    FamilyC,
    FamilyD,
    Conflict,
}

impl SupportClass {
    pub fn name(&self) -> &'static str {
        match self {
            SupportClass::Outside => "outside",
            SupportClass::Inside => "support",
            SupportClass::FamilyA => "a",
            SupportClass::FamilyB => "b",
            SupportClass::FamilyC => "c",
            SupportClass::FamilyD => "d",
            SupportClass::Conflict => "conflict",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SupportVerdict {
    pub closed_form: SupportClass,
    pub direct: SupportClass,
    /// φ (the displayed sum, ramified) at h^{-1}(x1, x2).
    pub value: SymbolicScalar,
}

impl SupportVerdict {
    pub fn agree(&self) -> bool {
        self.closed_form == self.direct
    }
}

fn is_orthogonal(h: &GsoElement, p: u32) -> bool {
    h.lambda().approx_eq(&Padic::one(p))
}

const INF: i64 = 1 << 40;
/// An unknown O(p^k) with k at least this far past every level in use counts as zero.
const NEGLIGIBLE_VAL: i32 = MAX_LEVEL as i32 + 6;

fn vinf(x: &Padic) -> LiftResult<i64> {
    if x.is_zero() || (x.is_big_o() && x.val_lower_bound() >= NEGLIGIBLE_VAL) {
        return Ok(INF);
    }
    Ok(x.valuation()? as i64)
}

fn vinf_e(x: &ExtElement, fp: &FieldParams) -> LiftResult<i64> {
    let (va, vb) = (vinf(&x.a)?, vinf(&x.b)?);
    Ok(match fp.kind {
        ExtKind::Ramified => (2 * va).min(2 * vb + 1).min(INF),
        _ => va.min(vb),
    })
}

/// Is there h' ∈ H with h'h ∈ ρ(Γ0(p^{n1}) × diag(2^{-1}, 1) Γ0(p^{n2}))?
fn split_closed_form(g1: &M2L, g2: &M2L, n1: i64, n2: i64) -> LiftResult<bool> {
    let (a1, b1, c1, d1) = (vinf(&g1[0][0])?, vinf(&g1[0][1])?, vinf(&g1[1][0])?, vinf(&g1[1][1])?);
    let (a2, b2, c2, d2) = (vinf(&g2[0][0])?, vinf(&g2[0][1])?, vinf(&g2[1][0])?, vinf(&g2[1][1])?);
    // h' and the kernel of ρ scale the rows of g1 by (α, β) and of g2 by (2/α, 1/β)
    let lo_a = -a1.min(b1);
    let hi_a = a2.min(b2);
    let lo_b = (n1 - c1).max(-d1);
    let hi_b = (c2 - n2).min(d2);
    Ok(lo_a <= hi_a && lo_b <= hi_b)
}

fn e_pow(x: &ExtElement, k: i32, fp: &FieldParams) -> LiftResult<ExtElement> {
    let base = if k < 0 { x.inv(fp)? } else { *x };
    let mut r = ExtElement::one(fp);
    for _ in 0..k.unsigned_abs() {
        r = r.mul(&base, fp);
    }
    Ok(r)
}

fn m2e_scalar(a: &M2E, z: &ExtElement, fp: &FieldParams) -> M2E {
    [[z.mul(&a[0][0], fp), z.mul(&a[0][1], fp)], [z.mul(&a[1][0], fp), z.mul(&a[1][1], fp)]]
}

/// Normalize h = ρ(t, B) through the kernel ρ(N(z), z) so that t is a unit,
/// and return A = B^{-1} (the E-matrix of h^{-1}); None if ν(t) is odd (inert).
fn normalized_inverse_matrix(t: &Padic, b: &M2E, fp: &FieldParams) -> LiftResult<Option<M2E>> {
    let k = t.valuation()?;
    let z = match fp.kind {
        ExtKind::Inert => {
            if k.rem_euclid(2) != 0 {
                return Ok(None);
            }
            ExtElement::from_base(fp, Padic::uniformizer_pow(fp.p, -k / 2))
        }
        _ => e_pow(&ExtElement::sqrt_delta(fp), -k, fp)?,
    };
    Ok(Some(m2e_inv(&m2e_scalar(b, &z, fp), fp)?))
}

/// Pattern of A = [[a, b], [c, d]] in terms of E-valuations.
fn ramified_family(a: &M2E, n: i64, fp: &FieldParams) -> LiftResult<SupportClass> {
    let (va, vb, vc, vd) = (vinf_e(&a[0][0], fp)?, vinf_e(&a[0][1], fp)?, vinf_e(&a[1][0], fp)?, vinf_e(&a[1][1], fp)?);
    Ok(if va >= 0 && vb >= 0 && vc == n && vd == 0 {
        SupportClass::FamilyA
    } else if n == 0 && va >= 0 && vb == 0 && vc == 0 && vd >= 1 {
        SupportClass::FamilyB
    } else if va == 0 && vb >= 0 && vc >= n + 1 && vd == 0 {
        SupportClass::FamilyC
    } else if va == 0 && vb == 0 && vc >= n + 1 && vd >= 1 {
        SupportClass::FamilyD
    } else {
        SupportClass::Outside
    })
}

pub fn closed_form_class(lift: &Lift, h: &GsoElement) -> LiftResult<SupportClass> {
    let fp = lift.fp();
    if !is_orthogonal(h, fp.p) {
        return Err(LiftError::NotOrthogonal);
    }
    match (lift.case, h) {
        (Case::Split { n1, n2 }, GsoElement::Split { g1, g2, .. }) => Ok(if split_closed_form(g1, g2, n1 as i64, n2 as i64)? {
            SupportClass::Inside
        } else {
            SupportClass::Outside
        }),
        (Case::Inert { n }, GsoElement::NonSplit { t, b, .. }) => {
            let Some(a) = normalized_inverse_matrix(t, b, fp)? else {
                return Ok(SupportClass::Outside);
            };
            let int = |x: &ExtElement| -> LiftResult<bool> { Ok(vinf_e(x, fp)? >= 0) };
            let inside = int(&a[0][0])?
                && int(&a[0][1])?
                && vinf_e(&a[1][0], fp)? >= n as i64
                && int(&a[1][1])?
                && vinf_e(&m2e_det(&a, fp), fp)? == 0;
            Ok(if inside { SupportClass::Inside } else { SupportClass::Outside })
        }
        (Case::Ramified { n }, GsoElement::NonSplit { t, b, .. }) => {
            let a = normalized_inverse_matrix(t, b, fp)?.expect("ramified normalization always exists");
            ramified_family(&a, n as i64, fp)
        }
        _ => Err(LiftError::Config("element does not match the case".into())),
    }
}

/// h^{-1}(x1, x2).
pub fn pulled_back_points(lift: &Lift, h: &GsoElement) -> LiftResult<[XPoint; 2]> {
    let hi = h.inverse(lift.fp())?;
    let (x1, x2) = lift.space.base_points();
    Ok([lift.space.rho_apply(&hi, &x1)?, lift.space.rho_apply(&hi, &x2)?])
}

pub fn direct_class(lift: &Lift, bundle: &PhiBundle, h: &GsoElement) -> LiftResult<(SupportClass, SymbolicScalar)> {
    if !is_orthogonal(h, lift.p()) {
        return Err(LiftError::NotOrthogonal);
    }
    let pts = pulled_back_points(lift, h)?;
    if bundle.summands.is_empty() {
        let v = bundle.phi.evaluate(&pts)?;
        let c = if v.is_zero() { SupportClass::Outside } else { SupportClass::Inside };
        return Ok((c, v));
    }
    let classes = [SupportClass::FamilyA, SupportClass::FamilyB, SupportClass::FamilyC, SupportClass::FamilyD];
    let mut hit = SupportClass::Outside;
    let mut total = SymbolicScalar::zero();
    for (s, c) in bundle.summands.iter().zip(classes) {
        let v = s.display.evaluate(&pts)?;
        if !v.is_zero() {
            hit = if hit == SupportClass::Outside { c } else { SupportClass::Conflict };
            total = total.add(&v.mul(&s.weight));
        }
    }
    Ok((hit, total))
}

pub fn classify_support(lift: &Lift, bundle: &PhiBundle, h: &GsoElement) -> LiftResult<SupportVerdict> {
    let closed_form = closed_form_class(lift, h)?;
    let (direct, value) = direct_class(lift, bundle, h)?;
    Ok(SupportVerdict { closed_form, direct, value })
}

// ---------------------------------------------------------------------------
// volumes

/// [GL(2, o) : Γ0(p^n)] over a residue field of size qq.
pub fn gamma0_index(qq: u64, n: u32) -> u64 {
    if n == 0 {
        1
    } else {
        (qq + 1) * qq.pow(n - 1)
    }
}

/// vol(Γ) for the ramified case.
pub fn gamma_volume(q: u32) -> BigRational {
    rat(1, q as i64 + 1)
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VolumeRow {
    pub pattern: &'static str,
    #[serde(serialize_with = "ser_rat")]
    pub volume: BigRational,
    pub summand: u8,
}

fn ser_rat<S: serde::Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&SymbolicScalar::from_rational(r.clone()).to_string())
}

/// Volumes of the pieces of Γ0(P^n) cut out by valuation patterns, with vol(Γ) = 1/(q+1).
pub fn table_rows(q: u32, n: u32) -> Vec<VolumeRow> {
    let g = gamma_volume(q);
    let qi = rat(1, q as i64);
    let one = BigRational::one();
    if n == 0 {
        vec![
            VolumeRow { pattern: "[o^x, o^x; o^x, P]", volume: (&one - &qi) * &g, summand: 2 },
            VolumeRow { pattern: "[P, o^x; o^x, o^x]", volume: (&one - &qi) * &g, summand: 1 },
            VolumeRow { pattern: "[P, o^x; o^x, P]", volume: &qi * &g, summand: 2 },
            VolumeRow { pattern: "[o^x, o; o^x, o^x] ∩ GL2", volume: &one - (rat(3, 1) - &qi) * &g, summand: 1 },
            VolumeRow { pattern: "[o^x, o; P, o^x]", volume: g.clone(), summand: 3 },
        ]
    } else {
        vec![
            VolumeRow { pattern: "[o^x, o; p^n o^x, o^x]", volume: (&one - &qi) * &g, summand: 1 },
            VolumeRow { pattern: "[o^x, o; P^{n+1}, o^x]", volume: &qi * &g, summand: 3 },
        ]
    }
}

/// Volumes of the ramified support families (a), (b), (c).
pub fn ramified_family_volumes(q: u32, n: u32) -> [BigRational; 3] {
    let mut v = [BigRational::zero(), BigRational::zero(), BigRational::zero()];
    for r in table_rows(q, n) {
        v[(r.summand - 1) as usize] += r.volume;
    }
    v
}

/// Volume of the support of h ↦ φ(h^{-1}(x1, x2)) in H\SO(X).
pub fn support_volume(case: Case, q: u32) -> BigRational {
    let q = q as u64;
    match case {
        Case::Split { n1, n2 } => rat(1, (gamma0_index(q, n1) * gamma0_index(q, n2)) as i64),
        Case::Inert { n } => rat(1, gamma0_index(q * q, n) as i64),
        Case::Ramified { n } => ramified_family_volumes(q as u32, n).iter().cloned().sum(),
    }
}

// ---------------------------------------------------------------------------
// zeta integrals and Bessel transformation laws

/// Z(s, π(ρ(diag(t1, t2), ·))W) = |t2/t1|^{s-1/2} Z(s, W) as a monomial in u = q^{-s},
/// for e = ν(t2/t1); `inert` uses |·|_E = |·|^2.
pub fn zeta_monomial(e: i32, kind: ExtKind) -> SymbolicScalar {
    match kind {
        ExtKind::Inert => SymbolicScalar::u_pow(2 * e).mul(&SymbolicScalar::q_pow(e)),
        _ => SymbolicScalar::u_pow(e).mul(&SymbolicScalar::q_half(e)),
    }
}

/// ν(t2/t1) for g = diag(t1, t2) k, k ∈ Γ0(p^n) (GL2(o) when n = 0); None when g has no such factorization.
fn torus_exponent_l(g: &M2L, n: i64) -> LiftResult<Option<i64>> {
    let det = m2l_det(g);
    let (mut vd, vdet) = (vinf(&g[1][1])?, vinf(&det)?);
    if n == 0 {
        vd = vd.min(vinf(&g[1][0])?);
    }
    if vd == INF || vdet == INF {
        return Ok(None);
    }
    let vt1 = vdet - vd;
    if vinf(&g[1][0])? < vd + n || vinf(&g[0][0])? < vt1 || vinf(&g[0][1])? < vt1 {
        return Ok(None);
    }
    Ok(Some(vd - vt1))
}

fn torus_exponent_e(g: &M2E, n: i64, fp: &FieldParams) -> LiftResult<Option<i64>> {
    let det = m2e_det(g, fp);
    let (mut vd, vdet) = (vinf_e(&g[1][1], fp)?, vinf_e(&det, fp)?);
    if n == 0 {
        vd = vd.min(vinf_e(&g[1][0], fp)?);
    }
    if vd == INF || vdet == INF {
        return Ok(None);
    }
    let vt1 = vdet - vd;
    if vinf_e(&g[1][0], fp)? < vd + n || vinf_e(&g[0][0], fp)? < vt1 || vinf_e(&g[0][1], fp)? < vt1 {
        return Ok(None);
    }
    Ok(Some(vd - vt1))
}

/// The factor Z(s, π(h)W) / Z(s, W) for the newform W, when h lies in torus · Γ0.
pub fn zeta_translate(lift: &Lift, h: &GsoElement) -> LiftResult<SymbolicScalar> {
    let fp = lift.fp();
    let e = match (lift.case, h) {
        (Case::Split { n1, n2 }, GsoElement::Split { g1, g2, .. }) => {
            match (torus_exponent_l(g1, n1 as i64)?, torus_exponent_l(g2, n2 as i64)?) {
                (Some(a), Some(b)) => a + b,
                _ => return Err(LiftError::Unsupported("h is not in torus · Γ0".into())),
            }
        }
        (Case::Inert { n } | Case::Ramified { n }, GsoElement::NonSplit { b, .. }) => match torus_exponent_e(b, n as i64, fp)? {
            Some(a) => a,
            None => return Err(LiftError::Unsupported("h is not in torus · Γ0".into())),
        },
        _ => return Err(LiftError::Config("element does not match the case".into())),
    };
    Ok(zeta_monomial(e as i32, fp.kind))
}

/// A left translation g ↦ x g of the Bessel integral.
#[derive(Clone, Debug)]
pub enum BesselMove {
    /// diag(t1, t2, t2, t1)
    Torus { t1: Padic, t2: Padic },
    /// [[1, B], [0, 1]], B = [[b1, b2], [b2, b3]]
    Unipotent { b: [Padic; 3] },
    /// The extension to all of GSp(4) through the similitude factor λ.
    Similitude { lambda: Padic },
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BesselFactor {
    /// Exact factor when it is a monomial in q^{1/2}, u and fourth roots of unity.
    pub exact: Option<String>,
    /// ψ(b2) as a rational angle a/b (ψ = e^{2πi a/b}).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<String>,
}

pub fn bessel_transform(m: &BesselMove) -> LiftResult<(Option<SymbolicScalar>, BesselFactor)> {
    match m {
        BesselMove::Torus { t1, t2 } => {
            let k = t1.valuation()? - t2.valuation()?;
            // |t1/t2|^{1/2-s} = q^{-k/2} u^{-k}
            let f = SymbolicScalar::q_half(-k).mul(&SymbolicScalar::u_pow(-k));
            Ok((Some(f.clone()), BesselFactor { exact: Some(f.to_string()), phase: None }))
        }
        BesselMove::Unipotent { b } => {
            let a = b[1].psi_angle()?;
            let (num, den) = (*a.numer(), *a.denom());
            let exact = match (num.rem_euclid(den), den) {
                (0, _) => Some(SymbolicScalar::one()),
                (1, 2) => Some(SymbolicScalar::from_int(-1)),
                (1, 4) => Some(SymbolicScalar::i()),
                (3, 4) => Some(SymbolicScalar::i().neg()),
                _ => None,
            };
            Ok((
                exact.clone(),
                BesselFactor { exact: exact.map(|e| e.to_string()), phase: Some(format!("{}/{}", num, den)) },
            ))
        }
        BesselMove::Similitude { lambda } => {
            let k = lambda.valuation()?;
            let f = SymbolicScalar::q_half(-k).mul(&SymbolicScalar::u_pow(-k));
            Ok((Some(f.clone()), BesselFactor { exact: Some(f.to_string()), phase: None }))
        }
    }
}

// ---------------------------------------------------------------------------
// the Bessel integral at the identity

/// Valuation pattern of a matrix entry.
#[derive(Clone, Copy, Debug)]
enum EntryPat {
    Unit,
    Int,
    Ideal(i32),
    Shell(i32),
}

/// (valuation or None for zero) options for a pattern.
fn pat_valuations(p: EntryPat) -> Vec<Option<i32>> {
    match p {
        EntryPat::Unit => vec![Some(0)],
        EntryPat::Int => vec![None, Some(0), Some(1)],
        EntryPat::Ideal(m) => vec![None, Some(m), Some(m + 1)],
        EntryPat::Shell(m) => vec![Some(m)],
    }
}

/// Elements of E (or L, as ExtElements with b = 0) with prescribed valuation and leading unit.
fn e_with_valuation(v: i32, unit: &ExtElement, fp: &FieldParams) -> LiftResult<ExtElement> {
    let u = match fp.kind {
        ExtKind::Ramified => e_pow(&ExtElement::sqrt_delta(fp), v, fp)?,
        _ => ExtElement::from_base(fp, Padic::uniformizer_pow(fp.p, v)),
    };
    Ok(u.mul(unit, fp))
}

/// Leading units of o_E modulo the maximal ideal (of o for split).
fn residue_units(fp: &FieldParams) -> Vec<ExtElement> {
    let p = fp.p as i64;
    match fp.kind {
        ExtKind::Inert => (0..p).flat_map(|a| (0..p).map(move |b| (a, b))).filter(|&(a, b)| a != 0 || b != 0).map(|(a, b)| fp.ext(a, b)).collect(),
        _ => (1..p).map(|a| fp.ext(a, 0)).collect(),
    }
}

struct FamilySpec {
    class: SupportClass,
    label: &'static str,
    pats: [[EntryPat; 2]; 2],
    /// Second matrix pattern (split only).
    pats2: Option<[[EntryPat; 2]; 2]>,
    volume: BigRational,
}

fn family_specs(lift: &Lift) -> Vec<FamilySpec> {
    use EntryPat::*;
    let q = lift.q();
    match lift.case {
        Case::Split { n1, n2 } => vec![FamilySpec {
            class: SupportClass::Inside,
            label: "support",
            pats: [[Int, Int], [Ideal(n1 as i32), Int]],
            pats2: Some([[Int, Int], [Ideal(n2 as i32), Int]]),
            volume: support_volume(lift.case, q),
        }],
        Case::Inert { n } => vec![FamilySpec {
            class: SupportClass::Inside,
            label: "support",
            pats: [[Int, Int], [Ideal(n as i32), Int]],
            pats2: None,
            volume: support_volume(lift.case, q),
        }],
        Case::Ramified { n } => {
            let v = ramified_family_volumes(q, n);
            let ni = n as i32;
            let mut out = vec![FamilySpec {
                class: SupportClass::FamilyA,
                label: "a",
                pats: [[Int, Int], [Shell(ni), Unit]],
                pats2: None,
                volume: v[0].clone(),
            }];
            if n == 0 {
                out.push(FamilySpec {
                    class: SupportClass::FamilyB,
                    label: "b",
                    pats: [[Int, Unit], [Unit, Ideal(1)]],
                    pats2: None,
                    volume: v[1].clone(),
                });
            }
            out.push(FamilySpec {
                class: SupportClass::FamilyC,
                label: "c",
                pats: [[Unit, Int], [Ideal(ni + 1), Unit]],
                pats2: None,
                volume: v[2].clone(),
            });
            out
        }
    }
}

/// Entry options for one pattern: zero or (valuation, leading unit).
fn entry_options(pat: EntryPat, units: &[ExtElement], fp: &FieldParams) -> LiftResult<Vec<ExtElement>> {
    let mut out = Vec::new();
    for v in pat_valuations(pat) {
        match v {
            None => out.push(ExtElement::zero(fp)),
            Some(v) => {
                for u in units {
                    out.push(e_with_valuation(v, u, fp)?);
                }
            }
        }
    }
    Ok(out)
}

fn to_l(m: &[[ExtElement; 2]; 2]) -> M2L {
    [[m[0][0].a, m[0][1].a], [m[1][0].a, m[1][1].a]]
}

/// Build the element of SO(X) whose inverse carries the matrix `a` (t a unit),
/// with the determinant normalized; None if `a` is singular or det(a) not a unit.
pub fn member_from_matrix(lift: &Lift, a: &M2E, a2: Option<&M2E>, t: &Padic) -> LiftResult<Option<GsoElement>> {
    let fp = lift.fp();
    let p = fp.p;
    match lift.case {
        Case::Split { .. } => {
            let g1 = to_l(a);
            let mut g2 = to_l(a2.expect("split needs two matrices"));
            let d1 = m2l_det(&g1);
            let d2 = m2l_det(&g2);
            if vinf(&d1)? != 0 || vinf(&d2)? != 0 {
                return Ok(None);
            }
            // h2 ∈ diag(2^{-1}, 1) Γ0, then fix λ = 1 on the first row
            let half = Padic::from_ratio(p, 1, 2);
            let s = (d1 * d2 * half).inv()?;
            g2[0][0] = g2[0][0] * half * s;
            g2[0][1] = g2[0][1] * half * s;
            Ok(Some(GsoElement::split(g1, g2)))
        }
        _ => {
            let det = m2e_det(a, fp);
            if vinf_e(&det, fp)? != 0 {
                return Ok(None);
            }
            // det A' = 1/t so that N(det B) = t^2 for B = A'^{-1}
            let s = ExtElement::from_base(fp, *t).mul(&det, fp).inv(fp)?;
            let a1 = [[a[0][0], a[0][1]], [s.mul(&a[1][0], fp), s.mul(&a[1][1], fp)]];
            let b = m2e_inv(&a1, fp)?;
            Ok(Some(GsoElement::nonsplit(*t, b, fp)?))
        }
    }
}

/// Members of a support family: exhaustive over leading residues when the grid
/// has at most `budget` points, otherwise `budget` seeded samples.
fn family_members(lift: &Lift, fam: &FamilySpec, budget: usize, seed: u64) -> LiftResult<(Vec<GsoElement>, String)> {
    let fp = lift.fp();
    let units = residue_units(fp);
    let mut slots: Vec<Vec<ExtElement>> = Vec::new();
    for row in &fam.pats {
        for e in row {
            slots.push(entry_options(*e, &units, fp)?);
        }
    }
    if let Some(p2) = &fam.pats2 {
        for row in p2 {
            for e in row {
                slots.push(entry_options(*e, &units, fp)?);
            }
        }
    }
    let ts: Vec<Padic> = match lift.case {
        Case::Split { .. } => vec![Padic::one(fp.p)],
        _ => vec![Padic::one(fp.p), Padic::from_i64(fp.p, smallest_nonresidue(fp.p))],
    };
    let total: usize = slots.iter().map(|s| s.len()).product::<usize>() * ts.len();
    let build = |idx: &[usize], t: &Padic| -> LiftResult<Option<GsoElement>> {
        let e: Vec<ExtElement> = idx.iter().zip(&slots).map(|(&i, s)| s[i]).collect();
        let a = [[e[0], e[1]], [e[2], e[3]]];
        let a2 = if e.len() == 8 { Some([[e[4], e[5]], [e[6], e[7]]]) } else { None };
        member_from_matrix(lift, &a, a2.as_ref(), t)
    };
    let mut out = Vec::new();
    if total <= budget {
        let mut idx = vec![0usize; slots.len()];
        for _ in 0..(total / ts.len()) {
            for t in &ts {
                if let Some(h) = build(&idx, t)? {
                    out.push(h);
                }
            }
            for d in 0..idx.len() {
                idx[d] += 1;
                if idx[d] < slots[d].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok((out, format!("exhaustive:{}", total)))
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..budget {
            let idx: Vec<usize> = slots.iter().map(|s| rng.gen_range(0..s.len())).collect();
            let t = &ts[rng.gen_range(0..ts.len())];
            if let Some(h) = build(&idx, t)? {
                out.push(h);
            }
        }
        Ok((out, format!("sampled:{}", budget)))
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BesselFamily {
    pub family: &'static str,
    #[serde(serialize_with = "ser_rat")]
    pub volume: BigRational,
    /// φ(h^{-1}(x1, x2)) on the family (explicit weights for ramified).
    pub value: String,
    /// The same with the coset-sum φ (ramified).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value_coset_sum: Option<String>,
    pub zeta: String,
    pub members: usize,
    pub certificate: String,
    pub constant: bool,
    pub classified: bool,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BesselValue {
    pub case: &'static str,
    pub levels: Value,
    #[serde(rename = "N")]
    pub level: i32,
    pub p: u32,
    /// The closed form, as the coefficient of Z(s, W).
    pub coefficient: String,
    /// The closed form with its sign parameters and volumes spelled out.
    pub factored: String,
    /// Σ volume · value · zeta over the support families.
    pub assembled: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assembled_coset_sum: Option<String>,
    pub consistent: bool,
    pub nonzero: bool,
    pub chi_delta: i8,
    pub chi_two: i8,
    pub families: Vec<BesselFamily>,
    pub certified: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip)]
    pub exact: SymbolicScalar,
}

fn times_z(c: &SymbolicScalar) -> String {
    if c.terms().count() > 1 {
        format!("({})·Z", c)
    } else {
        format!("{}·Z", c)
    }
}

fn r(x: i64) -> BigRational {
    rat(x, 1)
}

/// Closed forms for the coefficient of Z(s, W) at g = 1.
pub fn bessel_closed_form(case: Case, q: u32, chi_delta: i8, chi_two: i8) -> (BigRational, String) {
    match case {
        Case::Split { .. } | Case::Inert { .. } => {
            let v = support_volume(case, q);
            let s = format!("vol·Z = {}·Z", SymbolicScalar::from_rational(v.clone()));
            (v, s)
        }
        Case::Ramified { n } => {
            let g = gamma_volume(q);
            let qq = r(q as i64);
            let cd = r(chi_delta as i64);
            let c2 = r(chi_two as i64);
            if n > 0 {
                let inner = &cd * (BigRational::one() - BigRational::one() / &qq) + BigRational::one() / &qq;
                let v = &c2 * &g * &inner;
                let s = format!(
                    "χ(2)·vol(Γ)·[χ(δ)(1−1/q)+1/q]·Z = ({})·({})·({})·Z",
                    chi_two,
                    SymbolicScalar::from_rational(g),
                    SymbolicScalar::from_rational(inner)
                );
                (v, s)
            } else {
                let inner = &cd * &qq + &g * (&cd * (r(4) * &qq - r(2)) + &qq * &qq + &qq);
                let v = &c2 * &inner;
                let s = format!(
                    "χ(2)·[χ(δ)q + vol(Γ)(χ(δ)(4q−2) + q² + q)]·Z = ({})·({})·Z",
                    chi_two,
                    SymbolicScalar::from_rational(inner)
                );
                (v, s)
            }
        }
    }
}

/// B(1, φ, W, s) as a multiple of Z(s, W). `chi_delta` feeds the ramified closed form.
pub fn bessel_at_identity(lift: &Lift, bundle: &PhiBundle, chi_delta: Option<i8>, budget: usize) -> LiftResult<BesselValue> {
    let q = lift.q();
    let chi_two = lift.chi_two();
    let cd = chi_delta.unwrap_or(lift.chi_delta());
    let mut notes = Vec::new();
    if cd != lift.chi_delta() {
        notes.push(format!("chi(delta) = {} requested; the field has chi(delta) = {}", cd, lift.chi_delta()));
    }
    let (coef, factored) = bessel_closed_form(lift.case, q, cd, chi_two);
    let mut assembled = SymbolicScalar::zero();
    let mut assembled_cs = SymbolicScalar::zero();
    let mut families = Vec::new();
    let mut certified = true;
    for (k, fam) in family_specs(lift).iter().enumerate() {
        let (members, certificate) = family_members(lift, fam, budget, 0xbe55e1 + k as u64)?;
        let mut values = BTreeSet::new();
        let mut cs_values = BTreeSet::new();
        let mut zetas = BTreeSet::new();
        let mut classified = true;
        let mut value = SymbolicScalar::zero();
        let mut value_cs = SymbolicScalar::zero();
        let mut zeta = SymbolicScalar::one();
        for h in &members {
            let (c, v) = direct_class(lift, bundle, h)?;
            classified &= c == fam.class && closed_form_class(lift, h)? == fam.class;
            values.insert(v.to_string());
            value = v;
            if bundle.seed.is_some() {
                let pts = pulled_back_points(lift, h)?;
                let w = bundle.phi.evaluate(&pts)?;
                cs_values.insert(w.to_string());
                value_cs = w;
            }
            match zeta_translate(lift, h) {
                Ok(z) => {
                    zetas.insert(z.to_string());
                    zeta = z;
                }
                Err(_) => {
                    zetas.insert("unfactored".into());
                }
            }
        }
        let constant = !members.is_empty() && values.len() == 1 && zetas.len() == 1 && cs_values.len() <= 1;
        certified &= constant && classified;
        let vol = SymbolicScalar::from_rational(fam.volume.clone());
        assembled = assembled.add(&vol.mul(&value).mul(&zeta));
        assembled_cs = assembled_cs.add(&vol.mul(&value_cs).mul(&zeta));
        families.push(BesselFamily {
            family: fam.label,
            volume: fam.volume.clone(),
            value: value.at_q(q).to_string(),
            value_coset_sum: bundle.seed.as_ref().map(|_| value_cs.at_q(q).to_string()),
            zeta: zeta.to_string(),
            members: members.len(),
            certificate,
            constant,
            classified,
        });
    }
    let exact = SymbolicScalar::from_rational(coef.clone());
    let assembled = assembled.at_q(q);
    let assembled_cs = assembled_cs.at_q(q);
    let consistent = assembled.as_rational().as_ref() == Some(&coef);
    if !consistent {
        notes.push("the closed form differs from the family-by-family assembly".into());
    }
    Ok(BesselValue {
        case: lift.case.name(),
        levels: lift.case.levels_json(),
        level: lift.level(),
        p: lift.p(),
        coefficient: times_z(&exact),
        factored,
        assembled: times_z(&assembled),
        assembled_coset_sum: bundle.seed.as_ref().map(|_| times_z(&assembled_cs)),
        consistent,
        nonzero: !coef.is_zero(),
        chi_delta: cd,
        chi_two,
        families,
        certified,
        notes,
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lift(p: u32, case: Case) -> Lift {
        Lift::new(p, case).unwrap()
    }

    #[test]
    fn levels() {
        assert_eq!(Case::Split { n1: 1, n2: 2 }.level(), 3);
        assert_eq!(Case::Inert { n: 2 }.level(), 4);
        assert_eq!(Case::Ramified { n: 0 }.level(), 2);
        assert!(Case::new(ExtKind::Split, Some(1), None, None).is_err());
    }

    #[test]
    fn closed_forms() {
        let (v, _) = bessel_closed_form(Case::Ramified { n: 0 }, 3, -1, -1);
        assert_eq!(v, rat(5, 2));
        let (v, _) = bessel_closed_form(Case::Ramified { n: 2 }, 3, -1, -1);
        assert_eq!(v, rat(1, 12));
        let (v, _) = bessel_closed_form(Case::Split { n1: 1, n2: 1 }, 5, 1, 1);
        assert_eq!(v, rat(1, 36));
        let (v, _) = bessel_closed_form(Case::Inert { n: 0 }, 5, 1, 1);
        assert_eq!(v, rat(1, 1));
    }

    #[test]
    fn zeta_torus() {
        let l = lift(5, Case::Split { n1: 0, n2: 0 });
        let p = 5;
        let one = Padic::one(p);
        let z = Padic::zero(p);
        let h = GsoElement::split([[Padic::uniformizer_pow(p, 1), z], [z, one]], [[one, z], [z, one]]);
        let m = zeta_translate(&l, &h).unwrap();
        assert_eq!(m, SymbolicScalar::u_pow(-1).mul(&SymbolicScalar::q_half(-1)));
    }

    #[test]
    fn transform_factors() {
        let p = 3;
        let z = Padic::from_i64(p, 7);
        let (f, _) = bessel_transform(&BesselMove::Torus { t1: z, t2: z }).unwrap();
        assert_eq!(f.unwrap(), SymbolicScalar::one());
        let (f, _) = bessel_transform(&BesselMove::Similitude { lambda: Padic::uniformizer_pow(p, 2) }).unwrap();
        assert_eq!(f.unwrap(), SymbolicScalar::u_pow(-2).mul(&SymbolicScalar::q_pow(-1)));
        let b = [Padic::zero(p), Padic::from_i64(p, 2), Padic::zero(p)];
        let (f, _) = bessel_transform(&BesselMove::Unipotent { b }).unwrap();
        assert_eq!(f.unwrap(), SymbolicScalar::one());
    }

    #[test]
    fn ramified_family_a_example() {
        let l = lift(3, Case::Ramified { n: 1 });
        let fp = *l.fp();
        let one = ExtElement::one(&fp);
        let z = ExtElement::zero(&fp);
        let c = e_pow(&ExtElement::sqrt_delta(&fp), 1, &fp).unwrap();
        let b = [[one, z], [c, one]];
        let h = GsoElement::nonsplit(Padic::one(3), b, &fp).unwrap();
        assert_eq!(closed_form_class(&l, &h).unwrap(), SupportClass::FamilyA);
    }
}
