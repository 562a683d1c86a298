use maxplus_lab::maxplus::{proj_metric, project, vec_metric, MaxPlus, MpMatrix};
use maxplus_lab::semigroup::arithmetic_lattice_test;
use maxplus_lab::spectral::{enumerate_circuits, max_cycle_mean};
use num_rational::Rational64;
use proptest::prelude::*;

fn entry(sparsity: u32) -> impl Strategy<Value = MaxPlus> {
    (0u32..100, -12i64..=12, 1i64..=4).prop_map(move |(roll, n, d)| {
        if roll < sparsity {
            MaxPlus::NegInf
        } else {
            MaxPlus::rat(n, d)
        }
    })
}

/// Square rational matrix with a finite entry in every row.
fn operator(max_dim: usize) -> impl Strategy<Value = MpMatrix> {
    (1..=max_dim, 0u32..70).prop_flat_map(|(d, sparsity)| {
        (prop::collection::vec(entry(sparsity), d * d), prop::collection::vec(0..d, d)).prop_map(
            move |(mut e, keep)| {
                for (i, j) in keep.into_iter().enumerate() {
                    if e[i * d..(i + 1) * d].iter().all(|v| v.is_neg_inf()) {
                        e[i * d + j] = MaxPlus::rat(i as i64 - j as i64, 1);
                    }
                }
                MpMatrix::new(d, e).unwrap()
            },
        )
    })
}

fn vector(d: usize) -> impl Strategy<Value = Vec<Rational64>> {
    prop::collection::vec((-30i64..=30, 1i64..=6).prop_map(|(n, k)| Rational64::new(n, k)), d)
}

fn to_f64(x: &[Rational64]) -> Vec<f64> {
    x.iter().map(|r| *r.numer() as f64 / *r.denom() as f64).collect()
}

fn sup(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Weight of the heaviest path `i → j` with exactly `n` arcs, by enumeration.
fn best_path(a: &MpMatrix, i: usize, j: usize, n: usize) -> MaxPlus {
    if n == 0 {
        return if i == j { MaxPlus::ONE } else { MaxPlus::ZERO };
    }
    (0..a.dim())
        .map(|k| a.get(i, k).otimes(best_path(a, k, j, n - 1)))
        .fold(MaxPlus::ZERO, MaxPlus::oplus)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn homogeneous_exactly(a in operator(6), seed in vector(6), c in (-9i64..9, 1i64..5)) {
        let d = a.dim();
        let x = &seed[..d];
        let shift = Rational64::new(c.0, c.1);
        let lifted: Vec<Rational64> = x.iter().map(|v| v + shift).collect();
        let ax = a.apply_exact(x).unwrap();
        let expect: Vec<Rational64> = ax.iter().map(|v| v + shift).collect();
        prop_assert_eq!(a.apply_exact(&lifted).unwrap(), expect);
    }

    #[test]
    fn isotone(a in operator(6), x in vector(6), bump in prop::collection::vec(0i64..5, 6)) {
        let d = a.dim();
        let x = &x[..d];
        let y: Vec<Rational64> = x.iter().zip(&bump).map(|(v, b)| v + Rational64::from(*b)).collect();
        let ax = a.apply_exact(x).unwrap();
        let ay = a.apply_exact(&y).unwrap();
        prop_assert!(ax.iter().zip(&ay).all(|(p, q)| p <= q));
    }

    #[test]
    fn non_expansive(a in operator(6), x in vector(6), y in vector(6)) {
        let d = a.dim();
        let (x, y) = (to_f64(&x[..d]), to_f64(&y[..d]));
        let (ax, ay) = (a.apply(&x).unwrap(), a.apply(&y).unwrap());
        prop_assert!(sup(&ax, &ay) <= sup(&x, &y) + 1e-9);
        prop_assert!(vec_metric(&ax, &ay).unwrap() <= vec_metric(&x, &y).unwrap() + 1e-9);
        let (px, py) = (project(&ax).unwrap(), project(&ay).unwrap());
        prop_assert!(proj_metric(&px, &py).unwrap() <= vec_metric(&x, &y).unwrap() + 1e-9);
    }

    #[test]
    fn product_is_associative(a in operator(5), b in operator(5), c in operator(5)) {
        let d = a.dim().min(b.dim()).min(c.dim());
        let cut = |m: &MpMatrix| {
            let mut e = Vec::with_capacity(d * d);
            for i in 0..d {
                e.extend_from_slice(&m.row(i)[..d]);
            }
            MpMatrix::new(d, e).unwrap()
        };
        let (a, b, c) = (cut(&a), cut(&b), cut(&c));
        let left = a.mul(&b).unwrap().mul(&c).unwrap();
        let right = a.mul(&b.mul(&c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn karp_matches_circuit_enumeration(a in operator(5)) {
        let best = enumerate_circuits(&a, a.dim())
            .unwrap()
            .into_iter()
            .map(|c| c.mean)
            .max();
        prop_assert_eq!(max_cycle_mean(&a), best);
    }

    #[test]
    fn powers_are_heaviest_paths(a in operator(4), n in 1usize..5) {
        let p = a.power(n);
        for i in 0..a.dim() {
            for j in 0..a.dim() {
                prop_assert_eq!(p.get(i, j), best_path(&a, i, j, n));
            }
        }
    }

    #[test]
    fn lattice_contains_its_inputs(
        offset in (-20i64..20, 1i64..6),
        step in (1i64..10, 1i64..6),
        ks in prop::collection::vec(-15i64..15, 1..8),
    ) {
        let a = MaxPlus::rat(offset.0, offset.1);
        let b = MaxPlus::rat(step.0, step.1);
        let values: Vec<MaxPlus> = ks.iter().map(|k| a.otimes(b.mul_int(*k))).collect();
        let fit = arithmetic_lattice_test(&values, 1e-9).unwrap().expect("rational values are arithmetic");
        prop_assert!(values.iter().all(|v| fit.contains(*v, 1e-9)));
        if ks.iter().all(|k| *k == ks[0]) {
            prop_assert!(fit.step.is_zero_value());
        } else {
            // gaps are multiples of b, and the fit keeps their gcd
            let ratio = fit.step.as_rational().unwrap() / b.as_rational().unwrap();
            prop_assert!(ratio.is_integer());
        }
    }
}

#[test]
fn irrational_gap_has_no_lattice() {
    let values = [MaxPlus::int(0), MaxPlus::int(1), MaxPlus::real(2f64.sqrt())];
    assert_eq!(arithmetic_lattice_test(&values, 1e-9).unwrap(), None);
}
