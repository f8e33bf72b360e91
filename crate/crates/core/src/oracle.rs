//! Brute-force numeric model on finite residue windows.
//!
//! A window fixes, per coordinate, a support level `lo` and an invariance
//! level `hi`; points are p^lo o / p^hi o. Integrals are finite sums with
//! cell volume q^{-Σ hi} times the Haar constant of X.

use crate::gsp4cosets::Gsp4Matrix;
use crate::localfield::{ipow, legendre, smallest_nonresidue, ExtElement, ExtKind, FieldError, FieldParams, FieldResult, Padic};
use crate::quadspace::{m2l_det, m2l_inv, m2l_mul, GsoElement, QuadSpace, XPoint, M2L};
use crate::schwartz::{CoordSet, NumericConstants, SchwartzFunction};
use crate::symbolic::SymbolicScalar;
use crate::thetalift::{classify_support, Lift, PhiBundle, SupportClass};
use crate::weilrep::{gauss_integral, haar_constant, norm_preimage, Companion};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use thiserror::Error;

pub type C64 = Complex<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    #[error("aliasing: {0}")]
    Aliasing(String),
    #[error("inconsistent constant resolution: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

pub type OracleResult<T> = Result<T, OracleError>;

pub fn psi(x: &Padic) -> OracleResult<C64> {
    let a = x.psi_angle()?;
    let t = 2.0 * PI * (*a.numer() as f64) / (*a.denom() as f64);
    Ok(C64::new(t.cos(), t.sin()))
}

/// x mod p^d for integral x.
pub fn residue(x: &Padic, d: u32) -> Option<i64> {
    if d == 0 || x.is_zero() {
        return Some(0);
    }
    let v = x.val_lower_bound();
    if v >= d as i32 {
        return Some(0);
    }
    if x.is_big_o() || v < 0 {
        return None;
    }
    let u = x.unit_residue(d - v as u32).ok()?;
    Some((u * ipow(x.p(), v as u32)).rem_euclid(ipow(x.p(), d)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteWindow {
    pub p: u32,
    pub lo: [i32; 4],
    pub hi: [i32; 4],
}

impl FiniteWindow {
    pub fn new(p: u32, lo: [i32; 4], hi: [i32; 4]) -> Self {
        assert!((0..4).all(|i| lo[i] <= hi[i]), "window needs lo <= hi");
        FiniteWindow { p, lo, hi }
    }

    pub fn digits(&self, i: usize) -> u32 {
        (self.hi[i] - self.lo[i]) as u32
    }

    pub fn len(&self) -> usize {
        (0..4).map(|i| ipow(self.p, self.digits(i)) as usize).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate measure of one cell.
    pub fn cell_volume(&self) -> f64 {
        (self.p as f64).powi(-self.hi.iter().sum::<i32>())
    }

    pub fn point(&self, mut idx: usize) -> XPoint {
        let p = self.p;
        let mut c = [Padic::zero(p); 4];
        for i in (0..4).rev() {
            let m = ipow(p, self.digits(i)) as usize;
            let k = (idx % m) as i64;
            idx /= m;
            c[i] = Padic::from_i64(p, k) * Padic::uniformizer_pow(p, self.lo[i]);
        }
        XPoint::new(c)
    }

    pub fn points(&self) -> Vec<XPoint> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    pub fn index_of(&self, x: &XPoint) -> Option<usize> {
        let mut idx = 0usize;
        for i in 0..4 {
            let y = x.c[i] * Padic::uniformizer_pow(self.p, -self.lo[i]);
            let r = residue(&y, self.digits(i))?;
            idx = idx * ipow(self.p, self.digits(i)) as usize + r as usize;
        }
        Some(idx)
    }

    /// The window carrying Fourier transforms of functions on this one.
    pub fn dual(&self, space: &QuadSpace) -> FiniteWindow {
        let mut lo = [0; 4];
        let mut hi = [0; 4];
        for j in 0..4 {
            let (i, coef) = space.partner(j);
            let v = coef.val_lower_bound();
            lo[i] = -self.hi[j] - v;
            hi[i] = -self.lo[j] - v;
        }
        FiniteWindow::new(self.p, lo, hi)
    }

    /// A self-dual window M*/M with M integral, stable under Sp(4, o).
    pub fn lattice_model(space: &QuadSpace) -> FiniteWindow {
        let p = space.p();
        match space.fp.kind {
            ExtKind::Split => FiniteWindow::new(p, [-1, 0, 0, 0], [0, 0, 0, 1]),
            ExtKind::Inert => FiniteWindow::new(p, [0, 0, -1, 0], [0, 0, 0, 1]),
            ExtKind::Ramified => FiniteWindow::new(p, [0, -1, -1, -1], [0, 0, 0, 0]),
        }
    }

    /// Smallest window containing the support of every term and on whose
    /// cells every term is constant (block = coordinates 4·block..4·block+4).
    pub fn covering(f: &SchwartzFunction, block: usize) -> OracleResult<FiniteWindow> {
        let mut lo = [i32::MAX; 4];
        let mut hi = [i32::MIN; 4];
        let mut con = i32::MIN;
        for t in &f.terms {
            for j in 0..4 {
                let s = t.key.sets[4 * block + j];
                let (l, h) = match s {
                    CoordSet::Ideal(m) => (m, m),
                    CoordSet::Shell(m) => (m, m + 1),
                    _ => return Err(OracleError::WindowTooSmall(format!("coordinate set {:?}", s))),
                };
                lo[j] = lo[j].min(l);
                hi[j] = hi[j].max(h);
            }
            for c in &t.key.cons {
                con = con.max(c.level);
            }
        }
        if lo[0] == i32::MAX {
            lo = [0; 4];
            hi = [0; 4];
        }
        if con > i32::MIN {
            // a shift m ∈ p^hi changes <x,x> by 2<x,m> + <m,m>
            let lmin = *lo.iter().min().unwrap();
            let need = (con - lmin.min(0)).max(con);
            for h in hi.iter_mut() {
                *h = (*h).max(need);
            }
        }
        for j in 0..4 {
            hi[j] = hi[j].max(lo[j]);
        }
        Ok(FiniteWindow::new(f.fp().p, lo, hi))
    }

    pub fn enlarge(&self, by: i32) -> FiniteWindow {
        let mut lo = self.lo;
        let mut hi = self.hi;
        for j in 0..4 {
            lo[j] -= by;
            hi[j] += by;
        }
        FiniteWindow::new(self.p, lo, hi)
    }
}

/// Values on a window (arity 1) or a product window (arity 2, x-major).
#[derive(Clone, Debug)]
pub struct Table {
    pub windows: Vec<FiniteWindow>,
    pub values: Vec<C64>,
}

impl Table {
    pub fn max_diff(&self, o: &Table) -> f64 {
        assert_eq!(self.values.len(), o.values.len());
        self.values.iter().zip(&o.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn total_mass(&self, space: &QuadSpace) -> f64 {
        let h = haar_numeric(space);
        let vol: f64 = self.windows.iter().map(|w| w.cell_volume() * h).product();
        self.values.iter().sum::<C64>().re * vol
    }
}

pub fn haar_numeric(space: &QuadSpace) -> f64 {
    haar_constant(space).eval(space.fp.q as f64, C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)).re
}

/// Values of f at every point of the window(s).
pub fn sample(f: &SchwartzFunction, windows: &[FiniteWindow], consts: &NumericConstants) -> OracleResult<Table> {
    assert_eq!(windows.len(), f.arity);
    let num = f.numeric(consts);
    let mut values = Vec::new();
    if f.arity == 1 {
        for x in windows[0].points() {
            values.push(num.at(&[x])?);
        }
    } else {
        let ys = windows[1].points();
        for x in windows[0].points() {
            for y in &ys {
                values.push(num.at(&[x, *y])?);
            }
        }
    }
    Ok(Table { windows: windows.to_vec(), values })
}

/// Guard against windows that cut the support: f must vanish on the
/// boundary shell of a one-step larger window.
pub fn check_window(f: &SchwartzFunction, w: &FiniteWindow, consts: &NumericConstants) -> OracleResult<()> {
    assert_eq!(f.arity, 1);
    let big = FiniteWindow::new(w.p, w.lo.map(|l| l - 1), w.hi.map(|h| h + 1));
    let num = f.numeric(consts);
    for x in big.points() {
        let v = num.at(&[x])?;
        let inside = (0..4).all(|i| x.c[i].is_zero() || x.c[i].val_lower_bound() >= w.lo[i]);
        if !inside && v.norm() > 1e-12 {
            return Err(OracleError::WindowTooSmall("nonzero value on the boundary shell".into()));
        }
        if inside {
            // representative of the same cell in w
            let rep = w.point(w.index_of(&x).expect("inside"));
            if (num.at(&[rep])? - v).norm() > 1e-12 {
                return Err(OracleError::WindowTooSmall("function not constant on window cells".into()));
            }
        }
    }
    Ok(())
}

/// Fourier kernel ψ(2<x', x>) between an output and an input window.
fn kernel(space: &QuadSpace, out: &FiniteWindow, inp: &FiniteWindow) -> OracleResult<Vec<Vec<C64>>> {
    let xs = out.points();
    let ys = inp.points();
    let mut k = Vec::with_capacity(xs.len());
    for x in &xs {
        let mut row = Vec::with_capacity(ys.len());
        for y in &ys {
            row.push(psi(&space.pair2(x, y))?);
        }
        k.push(row);
    }
    Ok(k)
}

/// Finite Riemann sum for the Fourier transform in one variable.
pub fn numeric_fourier(space: &QuadSpace, t: &Table, block: usize) -> OracleResult<Table> {
    let inp = t.windows[block];
    let out = inp.dual(space);
    let k = kernel(space, &out, &inp)?;
    let scale = haar_numeric(space) * inp.cell_volume();
    let mut windows = t.windows.clone();
    windows[block] = out;
    let (na, nb) = if t.windows.len() == 1 { (1, 1) } else { (t.windows[0].len(), t.windows[1].len()) };
    let mut values;
    if t.windows.len() == 1 {
        values = vec![C64::new(0.0, 0.0); out.len()];
        for (i, row) in k.iter().enumerate() {
            let mut s = C64::new(0.0, 0.0);
            for (j, kv) in row.iter().enumerate() {
                s += kv * t.values[j];
            }
            values[i] = s * scale;
        }
    } else if block == 0 {
        let nout = out.len();
        values = vec![C64::new(0.0, 0.0); nout * nb];
        for (i, row) in k.iter().enumerate() {
            for (j, kv) in row.iter().enumerate() {
                for y in 0..nb {
                    values[i * nb + y] += kv * t.values[j * nb + y];
                }
            }
        }
        values.iter_mut().for_each(|v| *v *= scale);
    } else {
        let nout = out.len();
        values = vec![C64::new(0.0, 0.0); na * nout];
        for x in 0..na {
            for (i, row) in k.iter().enumerate() {
                let mut s = C64::new(0.0, 0.0);
                for (j, kv) in row.iter().enumerate() {
                    s += kv * t.values[x * nb + j];
                }
                values[x * nout + i] = s * scale;
            }
        }
    }
    Ok(Table { windows, values })
}

fn chi_of_varpi(fp: &FieldParams) -> i8 {
    match fp.kind {
        ExtKind::Split => 1,
        ExtKind::Inert => -1,
        ExtKind::Ramified => fp.chi_varpi,
    }
}

fn chi_unit_residue(fp: &FieldParams, k: i64) -> i8 {
    match fp.kind {
        ExtKind::Ramified => legendre(k, fp.p),
        _ => 1,
    }
}

/// Shells summed beyond the last oscillating one for a twisted ideal (q^{-40} < 1e-19).
const TWISTED_IDEAL_SHELLS: i32 = 40;

/// ∫_S [χ(y)] ψ(c y) dy as an explicit residue sum.
pub fn numeric_gauss(fp: &FieldParams, set: CoordSet, twisted: bool, c: &Padic) -> OracleResult<C64> {
    numeric_gauss_memo(fp, set, twisted, c, &mut BTreeMap::new())
}

/// Memo key: untwisted sums (and split twisted ones, χ being trivial) do not depend on the field kind.
type GaussMemo = BTreeMap<(Option<&'static str>, String, String), C64>;

fn numeric_gauss_memo(fp: &FieldParams, set: CoordSet, twisted: bool, c: &Padic, memo: &mut GaussMemo) -> OracleResult<C64> {
    let key = ((twisted && fp.kind != ExtKind::Split).then(|| fp.kind.name()), format!("{:?}", set), format!("{:?}", c));
    if let Some(v) = memo.get(&key) {
        return Ok(*v);
    }
    let v = numeric_gauss_uncached(fp, set, twisted, c, memo)?;
    memo.insert(key, v);
    Ok(v)
}

fn numeric_gauss_uncached(fp: &FieldParams, set: CoordSet, twisted: bool, c: &Padic, memo: &mut GaussMemo) -> OracleResult<C64> {
    let p = fp.p;
    let (m, shell) = match set {
        CoordSet::Ideal(m) => (m, false),
        CoordSet::Shell(m) => (m, true),
        s => return Err(OracleError::WindowTooSmall(format!("non-compact set {:?}", s))),
    };
    if twisted && !shell {
        // χ is not locally constant at 0: add up shells until q^{-k} is negligible
        let mut s = C64::new(0.0, 0.0);
        for k in m..m + TWISTED_IDEAL_SHELLS + (-c.val_or_inf()?.min(0) - m).max(0) {
            s += numeric_gauss_memo(fp, CoordSet::Shell(k), true, c, memo)?;
        }
        return Ok(s);
    }
    // y = p^m k with k mod p^d; ψ(c y) constant on cells once ν(c) + m + d >= 0
    let vc = if c.is_zero() { None } else { Some(c.valuation()?) };
    let need = vc.map(|v| -v - m).unwrap_or(0);
    let d = need.max(if shell { 1 } else { 0 }).max(0) as u32;
    let modulus = ipow(p, d);
    // c p^m = a / p^{need} with a a unit
    let (a, shift) = match vc {
        None => (0i64, 0u32),
        Some(v) => {
            let shift = (-(v + m)).max(0) as u32;
            let a = residue(&(*c * Padic::uniformizer_pow(p, -v)), shift.max(1))
                .ok_or(OracleError::Field(FieldError::PrecisionExhausted))?;
            (a, shift)
        }
    };
    let den = ipow(p, shift);
    let chi_m = if twisted && m.rem_euclid(2) == 1 { chi_of_varpi(fp) } else { 1 };
    let chi_table: Vec<i32> = (0..p as i64).map(|k| if twisted { (chi_unit_residue(fp, k) * chi_m) as i32 } else { 1 }).collect();
    // integer weight per root of unity e^{2πi r/den}
    let mut bins = vec![0i32; den as usize];
    let (step, pp) = (a.rem_euclid(den), p as i64);
    let (mut r, mut kp) = (0i64, 0i64);
    for _ in 0..modulus {
        if !(shell && kp == 0) {
            bins[r as usize] += chi_table[kp as usize];
        }
        r += step;
        if r >= den {
            r -= den;
        }
        kp += 1;
        if kp == pp {
            kp = 0;
        }
    }
    Ok(root_of_unity_sum(&bins, p) * (p as f64).powi(-m - d as i32))
}

/// Σ_r w_r e^{2πi r/p^s}. Fibers r0 + j p^{s-1} (j mod p) sum to zero against a
/// constant weight, so each fiber is reduced by its most common weight first;
/// sums that vanish identically come out as exact zeros.
fn root_of_unity_sum(bins: &[i32], p: u32) -> C64 {
    let den = bins.len();
    if den == 1 {
        return C64::new(bins[0] as f64, 0.0);
    }
    let stride = den / p as usize;
    let mut s = C64::new(0.0, 0.0);
    for r0 in 0..stride {
        let w0 = bins[r0];
        if (1..p as usize).all(|j| bins[r0 + j * stride] == w0) {
            continue;
        }
        let fiber: Vec<i32> = (0..p as usize).map(|j| bins[r0 + j * stride]).collect();
        let mut sorted = fiber.clone();
        sorted.sort_unstable();
        let mut best = (sorted[0], 0usize);
        let mut i = 0;
        while i < sorted.len() {
            let j = sorted[i..].iter().take_while(|&&x| x == sorted[i]).count();
            if j > best.1 {
                best = (sorted[i], j);
            }
            i += j;
        }
        for (j, w) in fiber.iter().enumerate() {
            let w = w - best.0;
            if w != 0 {
                let r = r0 + j * stride;
                if r == 0 {
                    s += C64::new(w as f64, 0.0);
                } else {
                    let ang = 2.0 * PI * r as f64 / den as f64;
                    s += C64::new(ang.cos(), ang.sin()) * w as f64;
                }
            }
        }
    }
    s
}

/// Σ_{u mod p} (u/p) e^{2πi u/p}.
pub fn classical_gauss_sum(p: u32) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for u in 1..p as i64 {
        let a = 2.0 * PI * u as f64 / p as f64;
        s += C64::new(a.cos(), a.sin()) * legendre(u, p) as f64;
    }
    s
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ResolvedConstants {
    pub gamma: [f64; 2],
    pub tau: [f64; 2],
}

impl ResolvedConstants {
    pub fn numeric(&self) -> NumericConstants {
        NumericConstants {
            gamma: C64::new(self.gamma[0], self.gamma[1]),
            tau: C64::new(self.tau[0], self.tau[1]),
            u: C64::new(1.0, 0.0),
        }
    }

    pub fn eval(&self, s: &SymbolicScalar, q: u32) -> C64 {
        let n = self.numeric();
        s.eval(q as f64, n.gamma, n.tau, n.u)
    }
}

/// The lattice model of the Weil representation on S((M*/M)^2).
pub struct LatticeModel {
    pub space: QuadSpace,
    pub window: FiniteWindow,
    pts: Vec<XPoint>,
    kernel: Vec<Vec<C64>>,
    qform: Vec<Padic>,
    scale: f64,
    pub gamma: C64,
}

fn round_unit(z: C64) -> OracleResult<C64> {
    for k in 0..4 {
        let r = C64::i().powi(k);
        if (z - r).norm() < 1e-8 {
            return Ok(r);
        }
    }
    Err(OracleError::Inconsistent(format!("expected a fourth root of unity, got {}", z)))
}

impl LatticeModel {
    pub fn new(space: QuadSpace) -> OracleResult<Self> {
        let window = FiniteWindow::lattice_model(&space);
        if window.dual(&space) != window {
            return Err(OracleError::Aliasing("lattice window is not self-dual".into()));
        }
        let pts = window.points();
        let kernel = kernel(&space, &window, &window)?;
        let qform = pts.iter().map(|x| space.pair(x, x)).collect();
        let scale = haar_numeric(&space) * window.cell_volume();
        let mut model = LatticeModel { space, window, pts, kernel, qform, scale, gamma: C64::new(1.0, 0.0) };
        model.gamma = model.resolve_gamma()?;
        Ok(model)
    }

    pub fn size(&self) -> usize {
        self.pts.len()
    }

    fn fourier1(&self, v: &[C64]) -> Vec<C64> {
        self.kernel.iter().map(|row| row.iter().zip(v).map(|(k, x)| k * x).sum::<C64>() * self.scale).collect()
    }

    /// (F M)^3 = c Id with M = ψ(<x,x>); c is the Weil index. Tested on seeded random vectors.
    fn resolve_gamma(&self) -> OracleResult<C64> {
        use rand::{Rng, SeedableRng};
        let n = self.size();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        let mult: Vec<C64> = self.qform.iter().map(psi).collect::<Result<_, _>>()?;
        let mut c: Option<C64> = None;
        for _ in 0..2 {
            let v0: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let mut v = v0.clone();
            for _ in 0..3 {
                for (x, m) in v.iter_mut().zip(&mult) {
                    *x *= m;
                }
                v = self.fourier1(&v);
            }
            let norm2: f64 = v0.iter().map(|x| x.norm_sqr()).sum();
            let val = v0.iter().zip(&v).map(|(a, b)| a.conj() * b).sum::<C64>() / norm2;
            let resid = v0.iter().zip(&v).map(|(a, b)| (b - a * val).norm_sqr()).sum::<f64>().sqrt();
            if resid > 1e-8 * norm2.sqrt() {
                return Err(OracleError::Inconsistent("(F M)^3 is not scalar".into()));
            }
            match c {
                None => c = Some(val),
                Some(c0) if (c0 - val).norm() > 1e-8 => {
                    return Err(OracleError::Inconsistent("(F M)^3 is not scalar".into()))
                }
                _ => {}
            }
        }
        round_unit(c.unwrap())
    }

    pub fn random_table(&self, seed: u64) -> Vec<C64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..self.size() * self.size()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    /// ω(m(A)): χ(det A)|det A|^2 φ((x, y) A).
    pub fn apply_levi(&self, a: &M2L, v: &[C64]) -> OracleResult<Vec<C64>> {
        let n = self.size();
        let det = m2l_det(a);
        let fp = self.space.fp;
        let factor = fp.chi(&det)? as f64 * (fp.q as f64).powi(-2 * det.valuation()?);
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for (ix, x) in self.pts.iter().enumerate() {
            for (iy, y) in self.pts.iter().enumerate() {
                let nx = x.scale(a[0][0]).add(&y.scale(a[1][0]));
                let ny = x.scale(a[0][1]).add(&y.scale(a[1][1]));
                let jx = self.window.index_of(&nx).ok_or_else(|| OracleError::Aliasing("m(A) leaves the lattice".into()))?;
                let jy = self.window.index_of(&ny).ok_or_else(|| OracleError::Aliasing("m(A) leaves the lattice".into()))?;
                out[ix * n + iy] = v[jx * n + jy] * factor;
            }
        }
        Ok(out)
    }

    /// ω(n(B)): ψ(b1 <x,x> + 2 b2 <x,y> + b3 <y,y>) φ.
    pub fn apply_unip(&self, b: &[Padic; 3], v: &[C64]) -> OracleResult<Vec<C64>> {
        let n = self.size();
        let mut out = v.to_vec();
        for ix in 0..n {
            for iy in 0..n {
                let arg = b[0] * self.qform[ix] + b[1] * self.space.pair2(&self.pts[ix], &self.pts[iy]) + b[2] * self.qform[iy];
                out[ix * n + iy] *= psi(&arg)?;
            }
        }
        Ok(out)
    }

    /// γ F in one variable.
    pub fn apply_weyl(&self, block: usize, v: &[C64]) -> Vec<C64> {
        let n = self.size();
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        if block == 0 {
            for iy in 0..n {
                let col: Vec<C64> = (0..n).map(|ix| v[ix * n + iy]).collect();
                let f = self.fourier1(&col);
                for ix in 0..n {
                    out[ix * n + iy] = f[ix] * self.gamma;
                }
            }
        } else {
            for ix in 0..n {
                let f = self.fourier1(&v[ix * n..(ix + 1) * n]);
                for iy in 0..n {
                    out[ix * n + iy] = f[iy] * self.gamma;
                }
            }
        }
        out
    }

    pub fn apply_j(&self, v: &[C64]) -> Vec<C64> {
        self.apply_weyl(1, &self.apply_weyl(0, v))
    }

    /// φ ↦ φ∘h^{-1} in both variables.
    pub fn apply_companion(&self, h: &GsoElement, v: &[C64]) -> OracleResult<Vec<C64>> {
        let n = self.size();
        let hi = h.inverse(&self.space.fp)?;
        let mut img = Vec::with_capacity(n);
        for x in &self.pts {
            let y = self.space.rho_apply(&hi, x)?;
            img.push(self.window.index_of(&y).ok_or_else(|| OracleError::Aliasing("companion leaves the lattice".into()))?);
        }
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for ix in 0..n {
            for iy in 0..n {
                out[ix * n + iy] = v[img[ix] * n + img[iy]];
            }
        }
        Ok(out)
    }

    /// ω(g) for g ∈ Sp(4, o) via g = w^{-1} n(AC^{-1}) J m(-C) n(C^{-1}D).
    pub fn apply_sp(&self, g: &Gsp4Matrix, v: &[C64]) -> OracleResult<Vec<C64>> {
        let p = self.space.p();
        if !g.lambda().approx_eq(&Padic::one(p)) {
            return Err(OracleError::Inconsistent("apply_sp needs λ = 1".into()));
        }
        let weyls: [(Gsp4Matrix, Option<usize>); 4] = [
            (Gsp4Matrix::identity(p), None),
            (Gsp4Matrix::s1(p), Some(0)),
            (Gsp4Matrix::s2(p), Some(1)),
            (Gsp4Matrix::j(p), Some(2)),
        ];
        for (w, which) in weyls.iter() {
            let h = w.mul(g);
            let e = h.entries();
            let a: M2L = [[e[0][0], e[0][1]], [e[1][0], e[1][1]]];
            let c: M2L = [[e[2][0], e[2][1]], [e[3][0], e[3][1]]];
            let d: M2L = [[e[2][2], e[2][3]], [e[3][2], e[3][3]]];
            let det = m2l_det(&c);
            if det.is_zero() || det.is_big_o() || det.valuation()? != 0 {
                continue;
            }
            let ci = m2l_inv(&c)?;
            let x = m2l_mul(&a, &ci);
            let z = m2l_mul(&ci, &d);
            let negc: M2L = [[-c[0][0], -c[0][1]], [-c[1][0], -c[1][1]]];
            let mut t = self.apply_unip(&[z[0][0], z[0][1], z[1][1]], v)?;
            t = self.apply_levi(&negc, &t)?;
            t = self.apply_j(&t);
            t = self.apply_unip(&[x[0][0], x[0][1], x[1][1]], &t)?;
            // undo w: ω(w)^{-1} = ω(w)^3
            if let Some(k) = which {
                for _ in 0..3 {
                    t = match k {
                        0 => self.apply_weyl(0, &t),
                        1 => self.apply_weyl(1, &t),
                        _ => self.apply_j(&t),
                    };
                }
            }
            return Ok(t);
        }
        Err(OracleError::Inconsistent("no Bruhat cell found".into()))
    }

    /// ω(g, h) for g ∈ GSp(4, o) with λ(g) = λ(h) a unit.
    pub fn numeric_weil(&self, g: &Gsp4Matrix, h: Option<&GsoElement>, v: &[C64]) -> OracleResult<Vec<C64>> {
        let lam = g.lambda();
        let w = match h {
            Some(h) => {
                if !h.lambda().approx_eq(&lam) {
                    return Err(OracleError::Inconsistent("similitudes differ".into()));
                }
                self.apply_companion(h, v)?
            }
            None => v.to_vec(),
        };
        let li = lam.inv()?;
        let g1 = g.mul(&Gsp4Matrix::similitude(li));
        self.apply_sp(&g1, &w)
    }
}

/// Numeric values of γ and τ, each checked to be unimodular (τ/√q).
pub fn resolve_constants(space: &QuadSpace) -> OracleResult<ResolvedConstants> {
    let fp = space.fp;
    let tau = classical_gauss_sum(fp.p);
    let q = fp.q as f64;
    if ((tau * tau) - C64::new(fp.legendre_m1() as f64 * q, 0.0)).norm() > 1e-9 {
        return Err(OracleError::Inconsistent("τ^2 ≠ χ(-1) q".into()));
    }
    if (tau.norm() / q.sqrt() - 1.0).abs() > 1e-9 {
        return Err(OracleError::Inconsistent("|τ| ≠ √q".into()));
    }
    let model = LatticeModel::new(*space)?;
    let g = model.gamma;
    if (g.norm() - 1.0).abs() > 1e-9 {
        return Err(OracleError::Inconsistent("|γ| ≠ 1".into()));
    }
    Ok(ResolvedConstants { gamma: [g.re, g.im], tau: [tau.re, tau.im] })
}

/// Max deviation between a symbolic function sampled on the table's windows and the table.
pub fn crosscheck(f: &SchwartzFunction, t: &Table, consts: &NumericConstants) -> OracleResult<f64> {
    let s = sample(f, &t.windows, consts)?;
    Ok(s.max_diff(t))
}

/// One disagreement between the closed-form support test and direct evaluation.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SupportMismatch {
    pub index: u64,
    pub element: String,
    pub closed_form: &'static str,
    pub direct: &'static str,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SupportScan {
    pub case: &'static str,
    pub p: u32,
    /// Entry valuations range over [-2, depth - 1].
    pub depth: u32,
    pub unit_digits: u32,
    pub grid_size: u64,
    pub scanned: u64,
    /// "exhaustive" or "sampled".
    pub certificate: &'static str,
    pub mismatch_count: u64,
    pub mismatches: Vec<SupportMismatch>,
    pub errors: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub error_samples: Vec<String>,
    /// Closed-form class counts.
    pub classes: BTreeMap<&'static str, u64>,
    /// Points where two explicit summands are both nonzero.
    pub overlaps: u64,
    /// Points whose h^{-1} matrix has the excluded pattern (d).
    pub family_d_pattern: u64,
    /// Points where the fourth summand is nonzero.
    pub family_d_support: u64,
    pub passed: bool,
}

/// Unit residues with `digits` digits: in o (split) or o_E.
fn grid_units(fp: &FieldParams, digits: u32) -> Vec<ExtElement> {
    let p = fp.p as i64;
    let m = ipow(fp.p, digits);
    match fp.kind {
        ExtKind::Split => (1..m).filter(|a| a % p != 0).map(|a| fp.ext(a, 0)).collect(),
        ExtKind::Inert => (0..m)
            .flat_map(|a| (0..m).map(move |b| (a, b)))
            .filter(|&(a, b)| a % p != 0 || b % p != 0)
            .map(|(a, b)| fp.ext(a, b))
            .collect(),
        ExtKind::Ramified => {
            let ma = ipow(fp.p, digits.div_ceil(2));
            let mb = ipow(fp.p, digits / 2);
            (1..ma).filter(|a| a % p != 0).flat_map(|a| (0..mb).map(move |b| fp.ext(a, b))).collect()
        }
    }
}

fn uniformizer_e(fp: &FieldParams, v: i32) -> FieldResult<ExtElement> {
    match fp.kind {
        ExtKind::Ramified => {
            let s = ExtElement::sqrt_delta(fp);
            let base = if v < 0 { s.inv(fp)? } else { s };
            let mut r = ExtElement::one(fp);
            for _ in 0..v.unsigned_abs() {
                r = r.mul(&base, fp);
            }
            Ok(r)
        }
        _ => Ok(ExtElement::from_base(fp, Padic::uniformizer_pow(fp.p, v))),
    }
}

/// Zero and every ϖ^v u with v in [lo, hi] and u a unit residue.
fn grid_entries(fp: &FieldParams, lo: i32, hi: i32, units: &[ExtElement]) -> FieldResult<Vec<ExtElement>> {
    let mut out = vec![ExtElement::zero(fp)];
    for v in lo..=hi {
        let w = uniformizer_e(fp, v)?;
        for u in units {
            out.push(w.mul(u, fp));
        }
    }
    Ok(out)
}

struct SupportGrid {
    /// Split: normalized rows of g1.
    rows: Vec<[Padic; 2]>,
    /// Non-split: t over L^x / N(E^x).
    ts: Vec<Padic>,
    entries: Vec<ExtElement>,
}

impl SupportGrid {
    fn new(lift: &Lift, depth: u32, unit_digits: u32) -> FieldResult<SupportGrid> {
        let fp = lift.fp();
        let p = fp.p;
        let hi = depth as i32 - 1;
        let units = grid_units(fp, unit_digits);
        let entries = grid_entries(fp, -2, hi, &units)?;
        let mut rows = Vec::new();
        let mut ts = Vec::new();
        match fp.kind {
            ExtKind::Split => {
                let one = Padic::one(p);
                let lower0: Vec<Padic> = grid_entries(fp, 0, hi, &units)?.iter().map(|e| e.a).collect();
                let lower1: Vec<Padic> = grid_entries(fp, 1, hi, &units)?.iter().map(|e| e.a).collect();
                rows.extend(lower0.iter().map(|x| [one, *x]));
                rows.extend(lower1.iter().map(|x| [*x, one]));
            }
            ExtKind::Inert => ts = vec![Padic::one(p), Padic::uniformizer_pow(p, 1)],
            ExtKind::Ramified => ts = vec![Padic::one(p), Padic::from_i64(p, smallest_nonresidue(p))],
        }
        Ok(SupportGrid { rows, ts, entries })
    }

    /// Points: (outer choices) x (e^3 generic + e^2 with a vanishing corner).
    fn outer(&self) -> u64 {
        if self.rows.is_empty() {
            self.ts.len() as u64
        } else {
            (self.rows.len() * self.rows.len()) as u64
        }
    }

    fn size(&self) -> u64 {
        let e = self.entries.len() as u64;
        self.outer() * (e * e * e + e * e)
    }

    fn element(&self, lift: &Lift, idx: u64) -> FieldResult<Option<GsoElement>> {
        let fp = lift.fp();
        let e = self.entries.len() as u64;
        let inner = e * e * e + e * e;
        let (o, mut r) = (idx / inner, idx % inner);
        let generic = r < e * e * e;
        if !generic {
            r -= e * e * e;
        }
        let mut pick = || {
            let x = self.entries[(r % e) as usize];
            r /= e;
            x
        };
        // (a, b, c) generic with d solved, or a = 0 with (c, d) and b solved
        let (x0, x1, x2) = if generic { (pick(), pick(), pick()) } else { (pick(), pick(), ExtElement::zero(fp)) };
        if self.rows.is_empty() {
            let t = self.ts[o as usize];
            let te = ExtElement::from_base(fp, t);
            let b = if generic {
                let (a, b, c) = (x0, x1, x2);
                if a.is_zero() {
                    return Ok(None);
                }
                let d = te.add(&b.mul(&c, fp)).mul(&a.inv(fp)?, fp);
                [[a, b], [c, d]]
            } else {
                let (c, d) = (x0, x1);
                if c.is_zero() {
                    return Ok(None);
                }
                let b = te.mul(&c.inv(fp)?, fp).neg();
                [[ExtElement::zero(fp), b], [c, d]]
            };
            Ok(Some(GsoElement::nonsplit(t, b, fp)?))
        } else {
            let n = self.rows.len() as u64;
            let (r1, r2) = (self.rows[(o / n) as usize], self.rows[(o % n) as usize]);
            let g1 = [r1, r2];
            let det1 = m2l_det(&g1);
            if det1.is_zero() {
                return Ok(None);
            }
            let target = det1.inv()?;
            let g2 = if generic {
                let (a, b, c) = (x0.a, x1.a, x2.a);
                if a.is_zero() {
                    return Ok(None);
                }
                [[a, b], [c, (target + b * c) * a.inv()?]]
            } else {
                let (c, d) = (x0.a, x1.a);
                if c.is_zero() {
                    return Ok(None);
                }
                [[Padic::zero(fp.p), -(target * c.inv()?)], [c, d]]
            };
            Ok(Some(GsoElement::split(g1, g2)))
        }
    }
}

fn describe(h: &GsoElement) -> String {
    match h {
        GsoElement::Split { g1, g2, .. } => format!("rho({}, {})", m2l_string(g1), m2l_string(g2)),
        GsoElement::NonSplit { t, b, .. } => format!(
            "rho({}, [[{}, {}], [{}, {}]])",
            t,
            e_string(&b[0][0]),
            e_string(&b[0][1]),
            e_string(&b[1][0]),
            e_string(&b[1][1])
        ),
    }
}

fn m2l_string(g: &M2L) -> String {
    format!("[[{}, {}], [{}, {}]]", g[0][0], g[0][1], g[1][0], g[1][1])
}

fn e_string(x: &ExtElement) -> String {
    format!("{} + {}·r", x.a, x.b)
}

#[derive(Default)]
struct ScanTally {
    mismatches: Vec<SupportMismatch>,
    mismatch_count: u64,
    errors: u64,
    error_samples: Vec<String>,
    scanned: u64,
    classes: BTreeMap<&'static str, u64>,
    overlaps: u64,
    d_pattern: u64,
    d_support: u64,
}

impl ScanTally {
    fn merge(mut self, o: ScanTally) -> ScanTally {
        self.mismatches.extend(o.mismatches);
        self.mismatches.sort_by_key(|m| m.index);
        self.mismatches.truncate(MAX_REPORTED_MISMATCHES);
        self.mismatch_count += o.mismatch_count;
        self.errors += o.errors;
        self.error_samples.extend(o.error_samples);
        self.error_samples.sort();
        self.error_samples.dedup();
        self.error_samples.truncate(MAX_REPORTED_MISMATCHES);
        self.scanned += o.scanned;
        for (k, v) in o.classes {
            *self.classes.entry(k).or_default() += v;
        }
        self.overlaps += o.overlaps;
        self.d_pattern += o.d_pattern;
        self.d_support += o.d_support;
        self
    }

    fn record(mut self, lift: &Lift, bundle: &PhiBundle, grid: &SupportGrid, idx: u64) -> ScanTally {
        let h = match grid.element(lift, idx) {
            Ok(Some(h)) => h,
            Ok(None) => return self,
            Err(e) => {
                self.error(format!("building h at index {}: {}", idx, e));
                return self;
            }
        };
        match classify_support(lift, bundle, &h) {
            Ok(v) => {
                self.scanned += 1;
                *self.classes.entry(v.closed_form.name()).or_default() += 1;
                if v.direct == SupportClass::Conflict {
                    self.overlaps += 1;
                }
                if v.closed_form == SupportClass::FamilyD {
                    self.d_pattern += 1;
                }
                if v.direct == SupportClass::FamilyD {
                    self.d_support += 1;
                }
                if !v.agree() {
                    self.mismatch_count += 1;
                    if self.mismatches.len() < MAX_REPORTED_MISMATCHES {
                        self.mismatches.push(SupportMismatch {
                            index: idx,
                            element: describe(&h),
                            closed_form: v.closed_form.name(),
                            direct: v.direct.name(),
                        });
                    }
                }
            }
            Err(e) => self.error(format!("{}: {}", describe(&h), e)),
        }
        self
    }

    fn error(&mut self, msg: String) {
        self.errors += 1;
        if self.error_samples.len() < MAX_REPORTED_MISMATCHES {
            self.error_samples.push(msg);
        }
    }
}

const MAX_REPORTED_MISMATCHES: usize = 20;

/// Compare the closed-form support classification with direct evaluation of φ
/// over a grid of h ∈ SO(X): exhaustive when the grid has at most `budget`
/// points, otherwise `budget` seeded samples.
pub fn scan_support(lift: &Lift, bundle: &PhiBundle, depth: u32, unit_digits: u32, budget: u64, seed: u64) -> OracleResult<SupportScan> {
    let grid = SupportGrid::new(lift, depth, unit_digits)?;
    let size = grid.size();
    let exhaustive = size <= budget;
    let count = if exhaustive { size } else { budget };
    let index = |i: u64| -> u64 {
        if exhaustive {
            i
        } else {
            ChaCha8Rng::seed_from_u64(seed ^ i.wrapping_mul(0x9e37_79b9_7f4a_7c15)).gen_range(0..size)
        }
    };
    let tally = (0..count)
        .into_par_iter()
        .fold(ScanTally::default, |t, i| t.record(lift, bundle, &grid, index(i)))
        .reduce(ScanTally::default, ScanTally::merge);
    let passed = tally.mismatch_count == 0 && tally.errors == 0 && tally.overlaps == 0 && tally.d_support == 0;
    Ok(SupportScan {
        case: lift.case.name(),
        p: lift.p(),
        depth,
        unit_digits,
        grid_size: size,
        scanned: tally.scanned,
        certificate: if exhaustive { "exhaustive" } else { "sampled" },
        mismatch_count: tally.mismatch_count,
        mismatches: tally.mismatches,
        errors: tally.errors,
        error_samples: tally.error_samples,
        classes: tally.classes,
        overlaps: tally.overlaps,
        family_d_pattern: tally.d_pattern,
        family_d_support: tally.d_support,
        passed,
    })
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GaussMismatch {
    pub kind: &'static str,
    pub set: String,
    pub twisted: bool,
    pub nu_c: i32,
    pub symbolic: String,
    pub numeric: [f64; 2],
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GaussSuite {
    pub p: u32,
    pub cases: usize,
    pub rational_cases: usize,
    pub max_rational_deviation: f64,
    pub max_deviation: f64,
    pub mismatches: Vec<GaussMismatch>,
    pub passed: bool,
}

/// Tolerance for rational Gauss values (they are sums of at most p^d roots of unity).
pub const RATIONAL_TOL: f64 = 1e-12;
pub const ROOT_OF_UNITY_TOL: f64 = 1e-9;

/// gauss_integral against residue sums over every field kind, set kind, level m ∈ [-3, 3],
/// ν(c) ∈ [-5, 3] (plus c = 0) and both twists.
pub fn gauss_suite(p: u32) -> OracleResult<GaussSuite> {
    let mut out = GaussSuite {
        p,
        cases: 0,
        rational_cases: 0,
        max_rational_deviation: 0.0,
        max_deviation: 0.0,
        mismatches: vec![],
        passed: false,
    };
    let mut memo = GaussMemo::new();
    for kind in [ExtKind::Split, ExtKind::Inert, ExtKind::Ramified] {
        let fp = FieldParams::new(p, kind)?;
        let rc = resolve_constants(&QuadSpace::new(fp))?;
        for m in -3..=3 {
            for set in [CoordSet::Ideal(m), CoordSet::Shell(m)] {
                for twisted in [false, true] {
                    // χ(c) only matters for the ramified twist
                    let units = if kind == ExtKind::Ramified { vec![1, smallest_nonresidue(p)] } else { vec![1] };
                    let mut cs: Vec<Padic> = (-5..=3).flat_map(|v| units.iter().map(move |&u| Padic::exact(p, v, u))).collect();
                    cs.push(Padic::zero(p));
                    for c in cs {
                        let sym = gauss_integral(&fp, set, twisted, &c).map_err(|e| OracleError::Inconsistent(e.to_string()))?;
                        let num = numeric_gauss_memo(&fp, set, twisted, &c, &mut memo)?;
                        let exact = sym.at_q(p).as_rational();
                        let dev = (rc.eval(&sym, p) - num).norm();
                        out.cases += 1;
                        let ok = match &exact {
                            Some(_) => {
                                out.rational_cases += 1;
                                out.max_rational_deviation = out.max_rational_deviation.max(dev);
                                dev <= RATIONAL_TOL
                            }
                            None => dev <= ROOT_OF_UNITY_TOL,
                        };
                        out.max_deviation = out.max_deviation.max(dev);
                        if !ok && out.mismatches.len() < 20 {
                            out.mismatches.push(GaussMismatch {
                                kind: kind.name(),
                                set: format!("{:?}", set),
                                twisted,
                                nu_c: c.val_or_inf()?,
                                symbolic: sym.to_string(),
                                numeric: [num.re, num.im],
                            });
                        }
                    }
                }
            }
        }
    }
    out.passed = out.mismatches.is_empty();
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RepresentationCheck {
    pub kind: &'static str,
    pub p: u32,
    pub words: usize,
    pub max_deviation: f64,
    pub passed: bool,
}

pub const REPRESENTATION_TOL: f64 = 1e-8;

/// A random generator of GSp(4, o) with unit similitude and its companion in GSO(X).
fn random_generator(rng: &mut ChaCha8Rng, fp: &FieldParams) -> (Gsp4Matrix, Option<GsoElement>) {
    let p = fp.p;
    let r = |rng: &mut ChaCha8Rng| Padic::from_i64(p, rng.gen_range(0..p as i64));
    let unit = |rng: &mut ChaCha8Rng| Padic::from_i64(p, rng.gen_range(1..p as i64));
    loop {
        match rng.gen_range(0..6) {
            0 => {
                let a: M2L = [[r(rng), r(rng)], [r(rng), r(rng)]];
                let d = m2l_det(&a);
                if d.is_zero() || d.valuation() != Ok(0) {
                    continue;
                }
                return (Gsp4Matrix::levi(&a, Padic::one(p)).expect("unit determinant"), None);
            }
            1 => return (Gsp4Matrix::unipotent(r(rng), r(rng), r(rng)), None),
            2 => return (Gsp4Matrix::j(p), None),
            3 => return (Gsp4Matrix::s1(p), None),
            4 => return (Gsp4Matrix::s2(p), None),
            _ => {
                let u = unit(rng);
                let comp = match fp.kind {
                    ExtKind::Split => Companion::SplitRow(u),
                    _ => match norm_preimage(fp, &u) {
                        Some(e) => Companion::EScale(e),
                        None => continue,
                    },
                };
                let h = comp.to_gso(fp).expect("companion of a unit similitude");
                return (Gsp4Matrix::similitude(u), Some(h));
            }
        }
    }
}

/// ω(g1)ω(g2)ω(g3) against ω(g1 g2 g3) in the lattice model, on random words of length 1 to 3.
pub fn representation_check(space: &QuadSpace, words: usize, seed: u64) -> OracleResult<RepresentationCheck> {
    let fp = space.fp;
    let model = LatticeModel::new(*space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_dev: f64 = 0.0;
    for _ in 0..words {
        let len = rng.gen_range(1..=3);
        let word: Vec<(Gsp4Matrix, Option<GsoElement>)> = (0..len).map(|_| random_generator(&mut rng, &fp)).collect();
        let v = model.random_table(rng.gen());
        let mut stepwise = v.clone();
        for (g, h) in word.iter().rev() {
            stepwise = model.numeric_weil(g, h.as_ref(), &stepwise)?;
        }
        let mut g = Gsp4Matrix::identity(fp.p);
        let mut h = GsoElement::identity(&fp);
        for (gi, hi) in &word {
            g = g.mul(gi);
            h = match hi {
                Some(hi) => h.compose(hi, &fp)?,
                None => h,
            };
        }
        let whole = model.numeric_weil(&g, Some(&h), &v)?;
        let dev = stepwise.iter().zip(&whole).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        max_dev = max_dev.max(dev);
    }
    Ok(RepresentationCheck { kind: fp.kind.name(), p: fp.p, words, max_deviation: max_dev, passed: max_dev <= REPRESENTATION_TOL })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schwartz::CoordSet::*;
    use crate::weilrep::{fourier1, gauss_integral};

    #[test]
    fn sample_counts_and_masses() {
        let x = QuadSpace::new(FieldParams::new(3, ExtKind::Split).unwrap());
        let c = resolve_constants(&x).unwrap().numeric();
        let w = FiniteWindow::new(3, [0; 4], [2, 0, 0, 0]);
        assert_eq!(w.len(), 9);
        let f = SchwartzFunction::indicator(x, vec![Ideal(0); 4]);
        let t = sample(&f, &[w], &c).unwrap();
        assert!(t.values.iter().all(|v| (v - C64::new(1.0, 0.0)).norm() < 1e-12));
        assert!((t.total_mass(&x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_sums_match() {
        for p in [3, 5] {
            let fp = FieldParams::new(p, ExtKind::Ramified).unwrap();
            let rc = resolve_constants(&QuadSpace::new(fp)).unwrap();
            for v in -3..2 {
                let c = Padic::exact(p, v, 2);
                for set in [Ideal(0), Shell(0), Shell(1)] {
                    for tw in [false, true] {
                        if tw && matches!(set, Ideal(_)) {
                            continue;
                        }
                        let s = rc.eval(&gauss_integral(&fp, set, tw, &c).unwrap(), p);
                        let n = numeric_gauss(&fp, set, tw, &c).unwrap();
                        assert!((s - n).norm() < 1e-9, "{:?} {} {} {} {}", set, tw, v, s, n);
                    }
                }
            }
        }
    }

    #[test]
    fn fourier_crosscheck_and_sensitivity() {
        let x = QuadSpace::new(FieldParams::new(3, ExtKind::Ramified).unwrap());
        let c = resolve_constants(&x).unwrap().numeric();
        let f = SchwartzFunction::product(
            x,
            1,
            &[
                crate::schwartz::Factor::e_ideal(ExtKind::Ramified, 0, 1),
                crate::schwartz::Factor::single(2, Ideal(0)),
                crate::schwartz::Factor::twisted_shell(3, 1),
            ],
        );
        let w = FiniteWindow::covering(&f, 0).unwrap();
        check_window(&f, &w, &c).unwrap();
        let t = sample(&f, &[w], &c).unwrap();
        let nf = numeric_fourier(&x, &t, 0).unwrap();
        let sf = fourier1(&f).unwrap();
        assert!(crosscheck(&sf, &nf, &c).unwrap() < 1e-8);
        let bumped = sf.scale(&SymbolicScalar::from_ratio(11, 10));
        assert!(crosscheck(&bumped, &nf, &c).unwrap() > 1e-3);
    }

    #[test]
    fn weil_relations_hold() {
        for kind in [ExtKind::Split, ExtKind::Inert, ExtKind::Ramified] {
            let x = QuadSpace::new(FieldParams::new(3, kind).unwrap());
            let m = LatticeModel::new(x).unwrap();
            let v = m.random_table(7);
            let p = 3;
            let a: M2L = [[Padic::from_i64(p, 1), Padic::from_i64(p, 2)], [Padic::from_i64(p, 1), Padic::from_i64(p, 1)]];
            let g1 = Gsp4Matrix::levi(&a, Padic::one(p)).unwrap();
            let g2 = Gsp4Matrix::j(p);
            let g3 = Gsp4Matrix::unipotent(Padic::from_i64(p, 1), Padic::from_i64(p, 2), Padic::zero(p));
            let prod = g1.mul(&g2).mul(&g3);
            let lhs = m.apply_levi(&a, &m.apply_j(&m.apply_unip(&[Padic::from_i64(p, 1), Padic::from_i64(p, 2), Padic::zero(p)], &v).unwrap())).unwrap();
            let rhs = m.apply_sp(&prod, &v).unwrap();
            let d = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(d < 1e-8, "{:?} {}", kind, d);
        }
    }
}
