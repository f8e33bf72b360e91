use num_rational::BigRational;
use num_traits::{One, Zero};
use thetalift_core::localfield::legendre;
use thetalift_core::thetalift::{
    bessel_at_identity, bessel_closed_form, build_phi, gamma0_index, ramified_family_volumes, support_volume, table_rows, Case, Lift,
};

fn r(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// All 2x2 matrices mod m with unit determinant, as (a, b, c, d).
fn gl2_mod(p: i64, m: i64) -> Vec<[i64; 4]> {
    let mut out = Vec::new();
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    if (a * d - b * c).rem_euclid(p) != 0 {
                        out.push([a, b, c, d]);
                    }
                }
            }
        }
    }
    out
}

fn val(x: i64, p: i64, cap: u32) -> u32 {
    if x == 0 {
        return cap;
    }
    let mut v = 0;
    let mut x = x;
    while x % p == 0 && v < cap {
        x /= p;
        v += 1;
    }
    v
}

#[test]
fn gamma0_index_by_counting() {
    for (p, n) in [(3i64, 1u32), (3, 2), (5, 1), (7, 1)] {
        let m = p.pow(n);
        let all = gl2_mod(p, m);
        let sub = all.iter().filter(|g| g[2] % m == 0).count();
        assert_eq!((all.len() / sub) as u64, gamma0_index(p as u64, n), "p={} n={}", p, n);
    }
    assert_eq!(gamma0_index(9, 0), 1);
}

#[test]
fn level_zero_rows_by_counting() {
    for p in [3i64, 5, 7] {
        let all = gl2_mod(p, p);
        let total = all.len() as i64;
        let nz = |x: i64| x != 0;
        let preds: [Box<dyn Fn(&[i64; 4]) -> bool>; 5] = [
            Box::new(move |g| nz(g[0]) && nz(g[1]) && nz(g[2]) && !nz(g[3])),
            Box::new(move |g| !nz(g[0]) && nz(g[1]) && nz(g[2]) && nz(g[3])),
            Box::new(move |g| !nz(g[0]) && nz(g[1]) && nz(g[2]) && !nz(g[3])),
            Box::new(move |g| nz(g[0]) && nz(g[2]) && nz(g[3])),
            Box::new(move |g| !nz(g[2])),
        ];
        let rows = table_rows(p as u32, 0);
        assert_eq!(rows.len(), preds.len());
        for (row, pred) in rows.iter().zip(&preds) {
            let count = all.iter().filter(|g| pred(g)).count() as i64;
            assert_eq!(row.volume, r(count, total), "p={} {}", p, row.pattern);
        }
    }
}

#[test]
fn positive_level_rows_by_counting() {
    for (p, n) in [(3i64, 1u32), (3, 2), (5, 1)] {
        let m = p.pow(n + 1);
        let gamma: Vec<[i64; 4]> = gl2_mod(p, m).into_iter().filter(|g| val(g[2], p, n + 1) >= n).collect();
        let g_vol = r(1, p + 1);
        let exact_n = gamma.iter().filter(|g| val(g[2], p, n + 1) == n).count() as i64;
        let deeper = gamma.len() as i64 - exact_n;
        let rows = table_rows(p as u32, n);
        assert_eq!(rows[0].volume, r(exact_n, gamma.len() as i64) * &g_vol);
        assert_eq!(rows[1].volume, r(deeper, gamma.len() as i64) * &g_vol);
    }
}

#[test]
fn family_volumes_sum_to_support() {
    for q in [3u32, 5, 7] {
        for n in 0..3 {
            let v = ramified_family_volumes(q, n);
            let s: BigRational = v.iter().cloned().sum();
            assert_eq!(s, support_volume(Case::Ramified { n }, q));
            assert!(v.iter().all(|x| *x >= BigRational::zero()));
        }
    }
}

fn index(q: i64, n: u32) -> i64 {
    if n == 0 {
        1
    } else {
        (q + 1) * q.pow(n - 1)
    }
}

/// The closed forms written out directly.
fn expected(case: Case, q: i64, cd: i64, c2: i64) -> BigRational {
    match case {
        Case::Split { n1, n2 } => r(1, index(q, n1) * index(q, n2)),
        Case::Inert { n } => r(1, index(q * q, n)),
        Case::Ramified { n } if n > 0 => r(c2, q + 1) * (r(cd * (q - 1), q) + r(1, q)),
        Case::Ramified { .. } => {
            let inner = r(cd * q, 1) + r(cd * (4 * q - 2) + q * q + q, q + 1);
            inner * r(c2, 1)
        }
    }
}

fn all_cases() -> Vec<Case> {
    let mut v = Vec::new();
    for n1 in 0..3 {
        for n2 in 0..3 {
            v.push(Case::Split { n1, n2 });
        }
    }
    for n in 0..3 {
        v.push(Case::Inert { n });
        v.push(Case::Ramified { n });
    }
    v
}

#[test]
fn closed_forms_match_direct_formulas_and_never_vanish() {
    for q in [3i64, 5, 7] {
        for case in all_cases() {
            for cd in [1i64, -1] {
                let c2 = legendre(2, q as u32) as i64;
                let (v, s) = bessel_closed_form(case, q as u32, cd as i8, c2 as i8);
                assert_eq!(v, expected(case, q, cd, c2), "{:?} q={} {}", case, q, s);
                assert!(!v.is_zero(), "{:?} q={} chi(delta)={}", case, q, cd);
            }
        }
    }
}

#[test]
fn unramified_coefficient_is_one() {
    for p in [3, 5, 7] {
        let lift = Lift::new(p, Case::Inert { n: 0 }).unwrap();
        let b = bessel_at_identity(&lift, &build_phi(&lift).unwrap(), None, 2_000).unwrap();
        assert!(b.exact.as_rational().unwrap().is_one(), "{}", b.coefficient);
        assert!(b.consistent && b.certified);
    }
}

#[test]
fn split_and_inert_assembly_matches_closed_form() {
    for case in [Case::Split { n1: 0, n2: 1 }, Case::Split { n1: 2, n2: 1 }, Case::Inert { n: 1 }, Case::Inert { n: 2 }] {
        let lift = Lift::new(3, case).unwrap();
        let b = bessel_at_identity(&lift, &build_phi(&lift).unwrap(), None, 2_000).unwrap();
        assert!(b.consistent, "{:?} {} vs {}", case, b.coefficient, b.assembled);
        assert!(b.certified && b.nonzero, "{:?}", case);
    }
}

#[test]
fn ramified_families_are_certified() {
    for n in 0..3 {
        let lift = Lift::new(3, Case::Ramified { n }).unwrap();
        let b = bessel_at_identity(&lift, &build_phi(&lift).unwrap(), None, 2_000).unwrap();
        assert!(b.certified && b.nonzero, "n={} {:?}", n, b.families);
    }
}
