use num_traits::Zero;
use proptest::prelude::*;
use thetalift_core::gsp4cosets::Gsp4Matrix;
use thetalift_core::localfield::{ExtElement, ExtKind, FieldParams, Padic};
use thetalift_core::oracle::{check_window, crosscheck, numeric_fourier, resolve_constants, sample, FiniteWindow};
use thetalift_core::quadspace::{m2l_det, GsoElement, QuadSpace, XPoint, M2E, M2L};
use thetalift_core::schwartz::SchwartzFunction;
use thetalift_core::thetalift::{build_phi, classify_support, Case, Lift};
use thetalift_core::weilrep::{fourier1, fourier_library, weil_apply, Generator};

const KINDS: [ExtKind; 3] = [ExtKind::Split, ExtKind::Inert, ExtKind::Ramified];

fn prime() -> impl Strategy<Value = u32> {
    prop::sample::select(vec![3u32, 5, 7])
}

fn unit(p: u32) -> impl Strategy<Value = i64> {
    (1i64..2000).prop_map(move |u| if u % p as i64 == 0 { u + 1 } else { u })
}

fn nonzero(p: u32) -> impl Strategy<Value = Padic> {
    (-3i32..4, unit(p)).prop_map(move |(v, u)| Padic::exact(p, v, u))
}

fn element(p: u32) -> impl Strategy<Value = Padic> {
    prop_oneof![1 => Just(Padic::zero(p)), 6 => nonzero(p)]
}

fn integral(p: u32) -> impl Strategy<Value = Padic> {
    prop_oneof![1 => Just(Padic::zero(p)), 4 => (0i32..3, unit(p)).prop_map(move |(v, u)| Padic::exact(p, v, u))]
}

fn gl2(p: u32) -> impl Strategy<Value = M2L> {
    [integral(p), integral(p), integral(p), integral(p)]
        .prop_map(|[a, b, c, d]| [[a, b], [c, d]])
        .prop_filter("invertible", |m| !m2l_det(m).is_zero())
}

fn ext(fp: FieldParams) -> impl Strategy<Value = ExtElement> {
    (integral(fp.p), integral(fp.p)).prop_map(|(a, b)| ExtElement::new(a, b))
}

fn gso(fp: FieldParams) -> BoxedStrategy<GsoElement> {
    match fp.kind {
        ExtKind::Split => (gl2(fp.p), gl2(fp.p)).prop_map(|(a, b)| GsoElement::split(a, b)).boxed(),
        _ => (nonzero(fp.p), ext(fp), ext(fp), ext(fp), ext(fp))
            .prop_filter_map("invertible", move |(t, a, b, c, d)| {
                let m: M2E = [[a, b], [c, d]];
                let det = a.mul(&d, &fp).sub(&b.mul(&c, &fp));
                if det.is_zero() {
                    return None;
                }
                GsoElement::nonsplit(t, m, &fp).ok()
            })
            .boxed(),
    }
}

/// Elements of SO(X) (λ = 1): rescale one row so the similitude factor is 1.
fn so(fp: FieldParams) -> BoxedStrategy<GsoElement> {
    match fp.kind {
        ExtKind::Split => (gl2(fp.p), gl2(fp.p))
            .prop_map(|(a, mut b)| {
                let s = (m2l_det(&a) * m2l_det(&b)).inv().unwrap();
                b[0][0] = b[0][0] * s;
                b[0][1] = b[0][1] * s;
                GsoElement::split(a, b)
            })
            .boxed(),
        _ => (nonzero(fp.p), ext(fp), ext(fp), ext(fp), ext(fp))
            .prop_filter_map("invertible", move |(t, a, b, c, d)| {
                let det = a.mul(&d, &fp).sub(&b.mul(&c, &fp));
                if det.is_zero() {
                    return None;
                }
                let s = ExtElement::from_base(&fp, t).mul(&det.inv(&fp).ok()?, &fp);
                let m: M2E = [[a, b], [s.mul(&c, &fp), s.mul(&d, &fp)]];
                GsoElement::nonsplit(t, m, &fp).ok()
            })
            .boxed(),
    }
}

fn xpoint(p: u32) -> impl Strategy<Value = XPoint> {
    [element(p), element(p), element(p), element(p)].prop_map(XPoint::new)
}

fn frac(r: num_rational::Ratio<i64>) -> num_rational::Ratio<i64> {
    r - r.floor()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn valuation_laws((_p, x, y) in prime().prop_flat_map(|p| (Just(p), nonzero(p), nonzero(p)))) {
        prop_assert_eq!((x * y).valuation().unwrap(), x.valuation().unwrap() + y.valuation().unwrap());
        let s = x + y;
        let (vx, vy) = (x.valuation().unwrap(), y.valuation().unwrap());
        if !s.is_zero() {
            if let Ok(vs) = s.valuation() {
                prop_assert!(vs >= vx.min(vy));
                if vx != vy {
                    prop_assert_eq!(vs, vx.min(vy));
                }
            }
        }
    }

    #[test]
    fn chi_is_multiplicative((p, x, y) in prime().prop_flat_map(|p| (Just(p), nonzero(p), nonzero(p)))) {
        for kind in KINDS {
            let fp = FieldParams::new(p, kind).unwrap();
            prop_assert_eq!(fp.chi(&(x * y)).unwrap(), fp.chi(&x).unwrap() * fp.chi(&y).unwrap());
        }
    }

    #[test]
    fn chi_trivial_on_norms(p in prime(), a in 0i64..400, b in 0i64..400, v in -2i32..3) {
        for kind in KINDS {
            let fp = FieldParams::new(p, kind).unwrap();
            let z = ExtElement::new(Padic::from_i64(p, a), Padic::from_i64(p, b)).scale(Padic::uniformizer_pow(p, v));
            if z.is_zero() || (kind == ExtKind::Split && (z.a.is_zero() || z.b.is_zero())) {
                continue;
            }
            let n = z.norm(&fp);
            if n.is_zero() {
                continue;
            }
            prop_assert_eq!(fp.chi(&n).unwrap(), 1, "{:?} {:?}", kind, z);
        }
    }

    #[test]
    fn psi_is_additive_and_trivial_on_o((_p, x, y) in prime().prop_flat_map(|p| (Just(p), element(p), element(p)))) {
        let lhs = frac(x.add(y).psi_angle().unwrap());
        let rhs = frac(x.psi_angle().unwrap() + y.psi_angle().unwrap());
        prop_assert_eq!(lhs, rhs);
        let trivial = x.psi_angle().unwrap().is_zero();
        prop_assert_eq!(trivial, x.is_zero() || x.valuation().unwrap() >= 0);
    }

    #[test]
    fn psi_e_conductor_is_o_e(p in prime(), a in 0i64..200, b in 0i64..200, v in -3i32..3) {
        let fp = FieldParams::new(p, ExtKind::Ramified).unwrap();
        let z = ExtElement::new(Padic::from_i64(p, a), Padic::from_i64(p, b)).scale(Padic::uniformizer_pow(p, v));
        let pi_inv = ExtElement::sqrt_delta(&fp).inv(&fp).unwrap();
        let mut all_trivial = true;
        // ψ_E^{ϖ_E^{-1}} is trivial on z·o_E iff z ∈ o_E
        for (c, d) in [(1, 0), (0, 1), (1, 1)] {
            let w = z.mul(&fp.ext(c, d), &fp).mul(&pi_inv, &fp);
            all_trivial &= w.trace(&fp).psi_angle().unwrap().is_zero();
        }
        let integral = z.is_zero() || z.val_e(&fp).unwrap() >= 0;
        prop_assert_eq!(all_trivial, integral);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, ..ProptestConfig::default() })]

    #[test]
    fn rho_is_a_homomorphism_of_similitudes(
        (kind, fp, h1, h2, x) in (prime(), 0usize..3).prop_flat_map(|(p, k)| {
            let fp = FieldParams::new(p, KINDS[k]).unwrap();
            (Just(KINDS[k]), Just(fp), gso(fp), gso(fp), xpoint(p))
        })
    ) {
        let space = QuadSpace::new(fp);
        let h = h1.compose(&h2, &fp).unwrap();
        let lhs = space.rho_apply(&h, &x).unwrap();
        let rhs = space.rho_apply(&h1, &space.rho_apply(&h2, &x).unwrap()).unwrap();
        for i in 0..4 {
            prop_assert!(lhs.c[i].approx_eq(&rhs.c[i]), "{:?} {:?} {:?}", kind, lhs, rhs);
        }
        prop_assert!(h.lambda().approx_eq(&(h1.lambda() * h2.lambda())));
        prop_assert!(space.check_similitude(&h1).unwrap());
    }

    #[test]
    fn gsp4_lambda_is_multiplicative(
        (p, a, b, l1, l2, bs) in prime().prop_flat_map(|p| (Just(p), gl2(p), gl2(p), nonzero(p), nonzero(p), [integral(p), integral(p), integral(p)]))
    ) {
        let g = Gsp4Matrix::levi(&a, l1).unwrap().mul(&Gsp4Matrix::unipotent(bs[0], bs[1], bs[2]));
        let h = Gsp4Matrix::j(p).mul(&Gsp4Matrix::levi(&b, l2).unwrap());
        prop_assert!(g.mul(&h).lambda().approx_eq(&(g.lambda() * h.lambda())));
    }

    #[test]
    fn central_elements_act_trivially(k in 0usize..3, i in 0usize..28, v in -2i32..3, u in 1i64..5) {
        let p = 5;
        let space = QuadSpace::new(FieldParams::new(p, KINDS[k]).unwrap());
        let lib = fourier_library(space);
        let f1 = &lib[i].1;
        let f = SchwartzFunction::tensor(f1, f1);
        let g = weil_apply(&Generator::Central(Padic::exact(p, v, u)), &f).unwrap();
        prop_assert!(g.equal(&f).equal);
    }

    #[test]
    fn canonical_form_is_idempotent_and_tensor_multiplies(
        k in 0usize..3, i in 0usize..28, j in 0usize..28,
        pts in prop::collection::vec((xpoint(3), xpoint(3)), 20)
    ) {
        let space = QuadSpace::new(FieldParams::new(3, KINDS[k]).unwrap());
        let lib = fourier_library(space);
        let (f, g) = (&lib[i].1, &lib[j].1);
        let c = f.canonical();
        prop_assert!(c.canonical().equal(&c).equal);
        prop_assert!(c.equal(f).equal);
        let t = SchwartzFunction::tensor(f, g);
        for (x, y) in &pts {
            let lhs = t.evaluate(&[*x, *y]).unwrap();
            let rhs = f.evaluate(&[*x]).unwrap().mul(&g.evaluate(&[*y]).unwrap());
            prop_assert_eq!(lhs, rhs);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn symbolic_fourier_matches_numeric(k in 0usize..3, i in 0usize..28) {
        let space = QuadSpace::new(FieldParams::new(3, KINDS[k]).unwrap());
        let consts = resolve_constants(&space).unwrap().numeric();
        let f = fourier_library(space).swap_remove(i).1;
        let w = FiniteWindow::covering(&f, 0).unwrap();
        prop_assume!(w.len() <= 6561);
        check_window(&f, &w, &consts).unwrap();
        let t = sample(&f, &[w], &consts).unwrap();
        let nf = numeric_fourier(&space, &t, 0).unwrap();
        prop_assert!(crosscheck(&fourier1(&f).unwrap(), &nf, &consts).unwrap() < 1e-8);
    }

    #[test]
    fn oracle_mass_is_window_independent(k in 0usize..3, i in 0usize..28) {
        let space = QuadSpace::new(FieldParams::new(3, KINDS[k]).unwrap());
        let consts = resolve_constants(&space).unwrap().numeric();
        let f = fourier_library(space).swap_remove(i).1;
        let w = FiniteWindow::covering(&f, 0).unwrap();
        prop_assume!(w.len() <= 729);
        let m1 = sample(&f, &[w.clone()], &consts).unwrap().total_mass(&space);
        let m2 = sample(&f, &[w.enlarge(1)], &consts).unwrap().total_mass(&space);
        prop_assert!((m1 - m2).abs() < 1e-8, "{} {}", m1, m2);
    }

    #[test]
    fn support_classification_agrees_with_direct_evaluation(
        (k, level, h) in (0usize..3, 0u32..3).prop_flat_map(|(k, level)| {
            let fp = FieldParams::new(3, KINDS[k]).unwrap();
            (Just(k), Just(level), so(fp))
        })
    ) {
        let case = match KINDS[k] {
            ExtKind::Split => Case::Split { n1: level, n2: level.saturating_sub(1) },
            ExtKind::Inert => Case::Inert { n: level },
            ExtKind::Ramified => Case::Ramified { n: level },
        };
        let lift = Lift::new(3, case).unwrap();
        let bundle = build_phi(&lift).unwrap();
        let v = classify_support(&lift, &bundle, &h).unwrap();
        prop_assert!(h.lambda().approx_eq(&Padic::one(3)));
        prop_assert!(v.agree(), "{:?} {:?}", case, v);
    }
}

#[test]
fn congruent_points_evaluate_equally() {
    // every box term is constant on cosets of p^6 in each coordinate
    let p = 3;
    for kind in KINDS {
        let space = QuadSpace::new(FieldParams::new(p, kind).unwrap());
        for (_, f) in fourier_library(space) {
            for seed in 0..30i64 {
                let base: [i64; 4] = [seed * 7 + 1, seed * 13, seed * 5 + 2, 40 - seed];
                let x = XPoint::new(base.map(|b| Padic::from_ratio(p, b, 9)));
                let y = XPoint::new(base.map(|b| Padic::from_ratio(p, b, 9) + Padic::from_i64(p, 1 + seed) * Padic::uniformizer_pow(p, 6)));
                assert_eq!(f.evaluate(&[x]).unwrap(), f.evaluate(&[y]).unwrap());
            }
        }
    }
}
