use proptest::prelude::*;

use pnn_core::dimension::{neurovariety_dim, DimOptions};
use pnn_core::learning_degree::moment_form;
use pnn_core::linalg::Mat;
use pnn_core::network::{apply_symmetry, coefficients, Architecture, SymmetryElement, WeightVector};
use pnn_core::rng::seeded;
use pnn_core::scalar::{Fp, Rational, Scalar};
use pnn_core::symtensor::{
    enumerate_multiindices, format_poly, monomial_count, monomial_rank, parse_polys, poly_to_tensor, tensor_to_poly,
    HomogeneousPoly,
};
use pnn_core::training::{coefficient_rank, extract_coefficients};

fn fp() -> impl Strategy<Value = Fp> {
    (0..Fp::MODULUS).prop_map(Fp::new)
}

fn small_rational() -> impl Strategy<Value = Rational> {
    (-40i64..=40, 1i64..=12).prop_map(|(n, d)| Rational::from_i64(n) * Rational::from_i64(d).inv().unwrap())
}

fn architecture() -> impl Strategy<Value = Architecture> {
    (prop::collection::vec(1usize..=3, 3..=4), 1u32..=3).prop_map(|(w, r)| Architecture::new(w, r).unwrap())
}

fn rational_poly() -> impl Strategy<Value = HomogeneousPoly<Rational>> {
    (1usize..=3, 0usize..=4).prop_flat_map(|(n, d)| {
        prop::collection::vec(small_rational(), monomial_count(n, d))
            .prop_map(move |c| HomogeneousPoly::from_dense(n, d, c).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn monomial_rank_inverts_enumeration(n in 1usize..=4, d in 0usize..=6) {
        for (i, m) in enumerate_multiindices(n, d).iter().enumerate() {
            prop_assert_eq!(monomial_rank(&m.0), i);
        }
    }

    #[test]
    fn prime_field_axioms(a in fp(), b in fp(), c in fp()) {
        prop_assert_eq!(a + b, b + a);
        prop_assert_eq!(a * b, b * a);
        prop_assert_eq!((a + b) + c, a + (b + c));
        prop_assert_eq!((a * b) * c, a * (b * c));
        prop_assert_eq!(a * (b + c), a * b + a * c);
        prop_assert_eq!(a - a, Fp::zero());
        prop_assert_eq!(a + (-a), Fp::zero());
        prop_assert!(a.value() < Fp::MODULUS);
        if !a.is_zero() {
            prop_assert_eq!(a * a.inv().unwrap(), Fp::one());
        } else {
            prop_assert!(a.inv().is_none());
        }
    }

    #[test]
    fn tensor_round_trip(p in rational_poly()) {
        prop_assert_eq!(tensor_to_poly(&poly_to_tensor(&p)), p);
    }

    #[test]
    fn text_round_trip(p in rational_poly()) {
        let parsed = parse_polys(&format_poly(&p)).unwrap();
        prop_assert_eq!(parsed, vec![p]);
    }

    #[test]
    fn architecture_round_trip(a in architecture()) {
        let back: Architecture = a.to_string().parse().unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn symmetry_leaves_coefficients_fixed(a in architecture(), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let w = WeightVector::<Rational>::random(&a, &mut rng);
        let g = SymmetryElement::<Rational>::random(&a, &mut rng);
        let moved = apply_symmetry(&a, &w, &g).unwrap();
        prop_assert_eq!(coefficients(&a, &moved).unwrap(), coefficients(&a, &w).unwrap());
    }

    #[test]
    fn realized_polynomials_are_homogeneous(a in architecture(), seed in any::<u64>(), t in -5i64..=5) {
        prop_assume!(t != 0);
        let mut rng = seeded(seed);
        let w = WeightVector::<Rational>::random(&a, &mut rng);
        let c = coefficients(&a, &w).unwrap();
        let x: Vec<Rational> = (0..a.input_dim()).map(|i| Rational::from_i64(i as i64 + 2)).collect();
        let tx: Vec<Rational> = x.iter().map(|v| v.clone() * Rational::from_i64(t)).collect();
        let scale = Scalar::pow(&Rational::from_i64(t), a.output_degree());
        let lhs = c.eval(&tx);
        let rhs: Vec<Rational> = c.eval(&x).into_iter().map(|v| v * scale.clone()).collect();
        prop_assert_eq!(lhs, rhs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dimension_is_bounded_by_expectation(a in architecture(), seed in 0u64..1000) {
        let opts = DimOptions { seed, trials: 2, ..DimOptions::default() };
        let rep = neurovariety_dim(&a, &opts).unwrap();
        prop_assert!(rep.dim <= rep.edim, "{}: dim {} > edim {}", a, rep.dim, rep.edim);
        prop_assert!(rep.edim <= rep.ambient);
        prop_assert_eq!(rep.defect, rep.edim as i64 - rep.dim as i64);
        prop_assert_eq!(rep.filling, rep.dim == rep.ambient);
    }
}

fn arb_mat(rows: usize, cols: usize) -> impl Strategy<Value = Mat<f64>> {
    prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |d| Mat::from_vec(rows, cols, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn moment_form_matches_sample_average(
        samples in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 2), 1..30),
        rho in arb_mat(3, 3),
        phi in arb_mat(3, 3),
    ) {
        let form = moment_form(&samples, 2).unwrap();
        let direct: f64 = samples
            .iter()
            .map(|x| {
                let v: Vec<f64> = form.basis.iter().map(|m| m.eval(x)).collect();
                let diff = rho.sub(&phi);
                (0..3).map(|i| diff.row(i).iter().zip(&v).map(|(a, b)| a * b).sum::<f64>().powi(2)).sum::<f64>()
            })
            .sum::<f64>()
            / samples.len() as f64;
        let got = form.loss(&rho, &phi);
        prop_assert!((got - direct).abs() <= 1e-9 * (1.0 + direct.abs()), "{} vs {}", got, direct);
    }

    #[test]
    fn extracted_coefficients_have_rank_at_most_two(w1 in arb_mat(2, 2), w2 in arb_mat(3, 2)) {
        let c = extract_coefficients(&w1, &w2);
        let (rank, _) = coefficient_rank(&c, 1e-9, 0.0);
        prop_assert!(rank <= 2);
        let exact = extract_coefficients(&w1.map(|v| rat(*v)), &w2.map(|v| rat(*v)));
        prop_assert!(exact.rank() <= 2);
    }
}

fn rat(v: f64) -> Rational {
    Rational::from_float(v).unwrap()
}
