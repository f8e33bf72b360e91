//! The four-dimensional quadratic space X and the similitude action on it.
//!
//! Split: X = M(2, L) with `<x, x> = det x`.
//! Non-split: X sits in M(2, E) as `[[c1 + c2 s, c3 s], [c4 s, c1 - c2 s]]`
//! where `s = sqrt(delta)`, again with `<x, x> = det x`.

use crate::localfield::{ExtElement, ExtKind, FieldError, FieldParams, FieldResult, Padic};

pub type M2L = [[Padic; 2]; 2];
pub type M2E = [[ExtElement; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XPoint {
    pub c: [Padic; 4],
}

impl XPoint {
    pub fn new(c: [Padic; 4]) -> Self {
        XPoint { c }
    }

    pub fn zero(p: u32) -> Self {
        XPoint { c: [Padic::zero(p); 4] }
    }

    pub fn from_ints(p: u32, v: [i64; 4]) -> Self {
        XPoint { c: v.map(|n| Padic::from_i64(p, n)) }
    }

    pub fn scale(&self, a: Padic) -> XPoint {
        XPoint { c: self.c.map(|x| x * a) }
    }

    pub fn add(&self, o: &XPoint) -> XPoint {
        XPoint { c: [0, 1, 2, 3].map(|i| self.c[i] + o.c[i]) }
    }

    pub fn neg(&self) -> XPoint {
        XPoint { c: self.c.map(|x| -x) }
    }
}

pub fn m2l_mul(a: &M2L, b: &M2L) -> M2L {
    let mut r = [[a[0][0]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    r
}

pub fn m2l_det(a: &M2L) -> Padic {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn m2l_adj(a: &M2L) -> M2L {
    [[a[1][1], -a[0][1]], [-a[1][0], a[0][0]]]
}

pub fn m2l_inv(a: &M2L) -> FieldResult<M2L> {
    let d = m2l_det(a).inv()?;
    Ok(m2l_adj(a).map(|r| r.map(|x| x * d)))
}

pub fn m2l_diag(a: Padic, d: Padic) -> M2L {
    let z = Padic::zero(a.p());
    [[a, z], [z, d]]
}

pub fn m2l_identity(p: u32) -> M2L {
    m2l_diag(Padic::one(p), Padic::one(p))
}

pub fn m2e_mul(a: &M2E, b: &M2E, fp: &FieldParams) -> M2E {
    let mut r = [[ExtElement::zero(fp); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = a[i][0].mul(&b[0][j], fp).add(&a[i][1].mul(&b[1][j], fp));
        }
    }
    r
}

pub fn m2e_det(a: &M2E, fp: &FieldParams) -> ExtElement {
    a[0][0].mul(&a[1][1], fp).sub(&a[0][1].mul(&a[1][0], fp))
}

pub fn m2e_adj(a: &M2E) -> M2E {
    [[a[1][1], a[0][1].neg()], [a[1][0].neg(), a[0][0]]]
}

pub fn m2e_conj(a: &M2E, fp: &FieldParams) -> M2E {
    a.map(|r| r.map(|x| x.conj(fp)))
}

pub fn m2e_inv(a: &M2E, fp: &FieldParams) -> FieldResult<M2E> {
    let d = m2e_det(a, fp).inv(fp)?;
    Ok(m2e_adj(a).map(|r| r.map(|x| x.mul(&d, fp))))
}

pub fn m2e_scale(a: &M2E, t: Padic) -> M2E {
    a.map(|r| r.map(|x| x.scale(t)))
}

pub fn m2e_diag(a: ExtElement, d: ExtElement, fp: &FieldParams) -> M2E {
    let z = ExtElement::zero(fp);
    [[a, z], [z, d]]
}

pub fn m2e_identity(fp: &FieldParams) -> M2E {
    m2e_diag(ExtElement::one(fp), ExtElement::one(fp), fp)
}

/// An element of GSO(X) in the form rho(g1, g2) (split) or rho(t, b) (non-split).
#[derive(Clone, Copy, Debug)]
pub enum GsoElement {
    Split { g1: M2L, g2: M2L, lambda: Padic },
    NonSplit { t: Padic, b: M2E, lambda: Padic },
}

impl GsoElement {
    pub fn split(g1: M2L, g2: M2L) -> Self {
        let lambda = m2l_det(&g1) * m2l_det(&g2);
        GsoElement::Split { g1, g2, lambda }
    }

    pub fn nonsplit(t: Padic, b: M2E, fp: &FieldParams) -> FieldResult<Self> {
        let ti = t.inv()?;
        let lambda = ti * ti * m2e_det(&b, fp).norm(fp);
        Ok(GsoElement::NonSplit { t, b, lambda })
    }

    pub fn identity(fp: &FieldParams) -> Self {
        match fp.kind {
            ExtKind::Split => GsoElement::split(m2l_identity(fp.p), m2l_identity(fp.p)),
            _ => GsoElement::nonsplit(Padic::one(fp.p), m2e_identity(fp), fp).unwrap(),
        }
    }

    pub fn lambda(&self) -> Padic {
        match self {
            GsoElement::Split { lambda, .. } | GsoElement::NonSplit { lambda, .. } => *lambda,
        }
    }

    pub fn compose(&self, o: &GsoElement, fp: &FieldParams) -> FieldResult<GsoElement> {
        match (self, o) {
            (GsoElement::Split { g1, g2, .. }, GsoElement::Split { g1: h1, g2: h2, .. }) => {
                Ok(GsoElement::split(m2l_mul(g1, h1), m2l_mul(g2, h2)))
            }
            (GsoElement::NonSplit { t, b, .. }, GsoElement::NonSplit { t: s, b: c, .. }) => {
                GsoElement::nonsplit(*t * *s, m2e_mul(b, c, fp), fp)
            }
            _ => Err(FieldError::Config("mixed GSO element kinds".into())),
        }
    }

    pub fn inverse(&self, fp: &FieldParams) -> FieldResult<GsoElement> {
        match self {
            GsoElement::Split { g1, g2, .. } => Ok(GsoElement::split(m2l_inv(g1)?, m2l_inv(g2)?)),
            GsoElement::NonSplit { t, b, .. } => GsoElement::nonsplit(t.inv()?, m2e_inv(b, fp)?, fp),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadSpace {
    pub fp: FieldParams,
}

/// `2<x, y> = sum coef * x[i] * y[j]` with exactly one partner per coordinate.
#[derive(Clone, Copy, Debug)]
pub struct FormTerm {
    pub i: usize,
    pub j: usize,
    pub coef: Padic,
}

impl QuadSpace {
    pub fn new(fp: FieldParams) -> Self {
        QuadSpace { fp }
    }

    pub fn p(&self) -> u32 {
        self.fp.p
    }

    pub fn is_split(&self) -> bool {
        self.fp.kind == ExtKind::Split
    }

    pub fn form_terms(&self) -> [FormTerm; 4] {
        let p = self.p();
        let one = Padic::one(p);
        if self.is_split() {
            [
                FormTerm { i: 0, j: 3, coef: one },
                FormTerm { i: 1, j: 2, coef: -one },
                FormTerm { i: 2, j: 1, coef: -one },
                FormTerm { i: 3, j: 0, coef: one },
            ]
        } else {
            let d = self.fp.delta;
            let two = Padic::from_i64(p, 2);
            [
                FormTerm { i: 0, j: 0, coef: two },
                FormTerm { i: 1, j: 1, coef: -(two * d) },
                FormTerm { i: 2, j: 3, coef: -d },
                FormTerm { i: 3, j: 2, coef: -d },
            ]
        }
    }

    /// The coordinate of x paired with coordinate j of y, and its coefficient.
    pub fn partner(&self, j: usize) -> (usize, Padic) {
        let t = self.form_terms().into_iter().find(|t| t.j == j).unwrap();
        (t.i, t.coef)
    }

    /// 2<x, y>.
    pub fn pair2(&self, x: &XPoint, y: &XPoint) -> Padic {
        let mut acc = Padic::zero(self.p());
        for t in self.form_terms() {
            acc = acc + t.coef * x.c[t.i] * y.c[t.j];
        }
        acc
    }

    pub fn pair(&self, x: &XPoint, y: &XPoint) -> Padic {
        let half = Padic::from_ratio(self.p(), 1, 2);
        self.pair2(x, y) * half
    }

    pub fn base_points(&self) -> (XPoint, XPoint) {
        let p = self.p();
        if self.is_split() {
            (XPoint::from_ints(p, [0, 1, 0, 0]), XPoint::from_ints(p, [0, 0, -2, 0]))
        } else {
            let c4 = Padic::from_i64(p, -2).mul(self.fp.delta.inv().unwrap());
            let z = Padic::zero(p);
            (XPoint::from_ints(p, [0, 0, 1, 0]), XPoint::new([z, z, z, c4]))
        }
    }

    pub fn to_matrix_l(&self, x: &XPoint) -> M2L {
        [[x.c[0], x.c[1]], [x.c[2], x.c[3]]]
    }

    pub fn from_matrix_l(&self, m: &M2L) -> XPoint {
        XPoint::new([m[0][0], m[0][1], m[1][0], m[1][1]])
    }

    /// Non-split: the matrix in M(2, E).
    pub fn to_matrix_e(&self, x: &XPoint) -> M2E {
        let fp = &self.fp;
        let z = Padic::zero(fp.p);
        [
            [ExtElement::new(x.c[0], x.c[1]), ExtElement::new(z, x.c[2])],
            [ExtElement::new(z, x.c[3]), ExtElement::new(x.c[0], -x.c[1])],
        ]
    }

    pub fn from_matrix_e(&self, m: &M2E) -> FieldResult<XPoint> {
        let fp = &self.fp;
        let closed = m[0][1].a.approx_eq(&Padic::zero(fp.p))
            && m[1][0].a.approx_eq(&Padic::zero(fp.p))
            && m[1][1].approx_eq_e(&m[0][0].conj(fp));
        if !closed {
            return Err(FieldError::Config("matrix does not lie in X".into()));
        }
        Ok(XPoint::new([m[0][0].a, m[0][0].b, m[0][1].b, m[1][0].b]))
    }

    /// Raw off-diagonal entries (c3 sqrt(delta), c4 sqrt(delta)) as used by the
    /// secondary coordinate view.
    pub fn raw_offdiag(&self, x: &XPoint) -> (ExtElement, ExtElement) {
        let m = self.to_matrix_e(x);
        (m[0][1], m[1][0])
    }

    /// 2<x, y> in the raw view: 2 a1 b1 - 2 delta a2 b2 - x3 y4 - x4 y3,
    /// with x3, x4 the raw E-valued off-diagonal entries.
    pub fn pair2_raw_view(&self, x: &XPoint, y: &XPoint) -> Padic {
        let fp = &self.fp;
        let two = Padic::from_i64(fp.p, 2);
        let (x3, x4) = self.raw_offdiag(x);
        let (y3, y4) = self.raw_offdiag(y);
        let cross = x3.mul(&y4, fp).add(&x4.mul(&y3, fp));
        two * x.c[0] * y.c[0] - two * fp.delta * x.c[1] * y.c[1] - cross.a
    }

    /// 2<x, y> = Tr(x adj(y)), computed through matrices.
    pub fn pair2_trace(&self, x: &XPoint, y: &XPoint) -> Padic {
        if self.is_split() {
            let m = m2l_mul(&self.to_matrix_l(x), &m2l_adj(&self.to_matrix_l(y)));
            m[0][0] + m[1][1]
        } else {
            let fp = &self.fp;
            let m = m2e_mul(&self.to_matrix_e(x), &m2e_adj(&self.to_matrix_e(y)), fp);
            m[0][0].add(&m[1][1]).a
        }
    }

    pub fn rho_apply(&self, h: &GsoElement, x: &XPoint) -> FieldResult<XPoint> {
        match h {
            GsoElement::Split { g1, g2, .. } => {
                let m = m2l_mul(&m2l_mul(g1, &self.to_matrix_l(x)), &m2l_adj(g2));
                Ok(self.from_matrix_l(&m))
            }
            GsoElement::NonSplit { t, b, .. } => {
                let fp = &self.fp;
                let bs = m2e_adj(&m2e_conj(b, fp));
                let m = m2e_mul(&m2e_mul(b, &self.to_matrix_e(x), fp), &bs, fp);
                self.from_matrix_e(&m2e_scale(&m, t.inv()?))
            }
        }
    }

    /// h fixes x1 and x2.
    pub fn fixes_base_points(&self, h: &GsoElement) -> FieldResult<bool> {
        let (x1, x2) = self.base_points();
        Ok(self.rho_apply(h, &x1)? == x1 && self.rho_apply(h, &x2)? == x2)
    }

    /// Closed-form description of the stabilizer H.
    pub fn in_stabilizer(&self, h: &GsoElement) -> FieldResult<bool> {
        let fp = &self.fp;
        let zero = Padic::zero(fp.p);
        let one = Padic::one(fp.p);
        match h {
            GsoElement::Split { g1, g2, .. } => {
                let diag = |g: &M2L| g[0][1] == zero && g[1][0] == zero;
                Ok(diag(g1) && diag(g2) && g1[0][0] * g2[0][0] == one && g1[1][1] * g2[1][1] == one)
            }
            GsoElement::NonSplit { t, b, .. } => {
                let ez = ExtElement::zero(fp);
                if !(b[0][1].approx_eq_e(&ez) && b[1][0].approx_eq_e(&ez)) {
                    return Ok(false);
                }
                let n1 = b[0][0].norm(fp);
                let n2 = b[1][1].norm(fp);
                Ok(n1 == *t && n2 == *t)
            }
        }
    }

    /// lambda-consistency on the canonical basis.
    pub fn check_similitude(&self, h: &GsoElement) -> FieldResult<bool> {
        let p = self.p();
        let basis: Vec<XPoint> = (0..4)
            .map(|i| {
                let mut v = [0i64; 4];
                v[i] = 1;
                XPoint::from_ints(p, v)
            })
            .collect();
        let lam = h.lambda();
        for x in &basis {
            for y in &basis {
                let hx = self.rho_apply(h, x)?;
                let hy = self.rho_apply(h, y)?;
                if self.pair2(&hx, &hy) != lam * self.pair2(x, y) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

impl ExtElement {
    pub fn approx_eq_e(&self, o: &ExtElement) -> bool {
        self.a.approx_eq(&o.a) && self.b.approx_eq(&o.b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(kind: ExtKind) -> QuadSpace {
        QuadSpace::new(FieldParams::new(5, kind).unwrap())
    }

    #[test]
    fn base_points_pairing() {
        for kind in [ExtKind::Split, ExtKind::Inert, ExtKind::Ramified] {
            let x = space(kind);
            let (x1, x2) = x.base_points();
            assert_eq!(x.pair(&x1, &x2), Padic::one(5));
            assert!(x.pair(&x1, &x1).is_zero());
            assert!(x.pair(&x2, &x2).is_zero());
        }
    }

    #[test]
    fn split_example_pairing() {
        let x = space(ExtKind::Split);
        let a = XPoint::from_ints(5, [0, 1, 0, 0]);
        let b = XPoint::from_ints(5, [0, 0, -2, 0]);
        assert_eq!(x.pair(&a, &b), Padic::one(5));
    }

    #[test]
    fn raw_view_agrees_with_canonical_form() {
        let x = space(ExtKind::Ramified);
        let a = XPoint::from_ints(5, [1, 2, 3, 4]);
        let b = XPoint::from_ints(5, [-3, 7, 2, 11]);
        assert_eq!(x.pair2_raw_view(&a, &b), x.pair2(&a, &b));
        assert_eq!(x.pair2_trace(&a, &b), x.pair2(&a, &b));
    }

    #[test]
    fn kernel_element_acts_trivially() {
        let x = space(ExtKind::Inert);
        let fp = x.fp;
        let z = fp.ext(2, 3);
        let h = GsoElement::nonsplit(z.norm(&fp), m2e_diag(z, z, &fp), &fp).unwrap();
        let v = XPoint::from_ints(5, [1, -4, 6, 9]);
        assert_eq!(x.rho_apply(&h, &v).unwrap(), v);
    }

    #[test]
    fn stabilizer_examples() {
        let xs = space(ExtKind::Split);
        let id = GsoElement::identity(&xs.fp);
        assert!(xs.in_stabilizer(&id).unwrap());
        let a = Padic::from_i64(5, 3);
        let one = Padic::one(5);
        let h = GsoElement::split(m2l_diag(a, one), m2l_identity(5));
        assert!(!xs.in_stabilizer(&h).unwrap());
        assert!(!xs.fixes_base_points(&h).unwrap());
        let xn = space(ExtKind::Inert);
        let fp = xn.fp;
        // u = (1 + 2 s)/(1 - 2 s) has norm one
        let w = fp.ext(1, 2);
        let u = w.mul(&w.conj(&fp).inv(&fp).unwrap(), &fp);
        let h = GsoElement::nonsplit(one, m2e_diag(ExtElement::one(&fp), u, &fp), &fp).unwrap();
        assert!(xn.in_stabilizer(&h).unwrap());
        assert!(xn.fixes_base_points(&h).unwrap());
    }
}
