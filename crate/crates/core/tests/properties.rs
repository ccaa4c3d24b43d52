use std::collections::BTreeMap;

use arena_core::answer::{canonicalize_str, judge};
use arena_core::rasch::{gradient, log_likelihood};
use arena_core::{fit, rank_ranges, Axis, FitConfig, IntervalRow, ModelId, OutcomeMatrix, ProblemId, RaschFit};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

/// An integer expression in infix or LaTeX form paired with its value,
/// computed directly on rationals. `None` when a division by zero occurs.
fn expr() -> impl Strategy<Value = (String, Option<BigRational>)> {
    let leaf = (-30i64..=30).prop_map(|n| {
        let text = if n < 0 { format!("({n})") } else { n.to_string() };
        (text, Some(BigRational::from_integer(BigInt::from(n))))
    });
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), 0..4usize).prop_map(|((a, x), (b, y), op)| {
                let value = match (x, y) {
                    (Some(x), Some(y)) => match op {
                        0 => Some(x + y),
                        1 => Some(x - y),
                        2 => Some(x * y),
                        _ if y.is_zero() => None,
                        _ => Some(x / y),
                    },
                    _ => None,
                };
                let text = match op {
                    0 => format!("({a} + {b})"),
                    1 => format!("({a} - {b})"),
                    2 => format!(r"({a} \cdot {b})"),
                    _ => format!(r"\frac{{{a}}}{{{b}}}"),
                };
                (text, value)
            }),
            (inner, 0u32..4).prop_map(|((a, x), k)| {
                let value = x.map(|x| (0..k).fold(BigRational::one(), |acc, _| acc * &x));
                (format!("({a})^{{{k}}}"), value)
            }),
        ]
    })
}

fn rational_text(v: &BigRational) -> String {
    if v.denom().is_one() {
        v.numer().to_string()
    } else {
        format!("({})/({})", v.numer(), v.denom())
    }
}

fn id(name: &str) -> ModelId {
    ModelId::new(name).unwrap()
}

/// A dense matrix of `solvers` × `problems` with outcomes from `bits`;
/// problem `p` is authored by solver `p % solvers`, who does not attempt it.
fn dense(solvers: usize, problems: usize, bits: &[bool]) -> OutcomeMatrix {
    let mut m = OutcomeMatrix::new();
    let mut k = 0;
    for p in 0..problems {
        for s in 0..solvers {
            if s == p % solvers {
                continue;
            }
            m.insert(id(&format!("s{s}")), ProblemId::new(format!("p{p:03}")), id(&format!("s{}", p % solvers)), bits[k % bits.len()])
                .unwrap();
            k += 1;
        }
    }
    m
}

fn params(m: &OutcomeMatrix, xs: &[f64], lambda: f64) -> RaschFit {
    let abilities: BTreeMap<ModelId, f64> = m.solvers().into_iter().zip(xs).map(|(s, &x)| (s.clone(), x)).collect();
    let difficulties: BTreeMap<ProblemId, f64> = m
        .problems()
        .zip(xs.iter().skip(abilities.len()))
        .map(|(p, &x)| (p.clone(), x))
        .collect();
    RaschFit {
        abilities,
        difficulties,
        lambda,
        converged: false,
        iterations: 0,
        final_grad_norm: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn judge_matches_the_rational_oracle((text, value) in expr()) {
        match value {
            Some(v) => {
                let gold = rational_text(&v);
                prop_assert!(judge(&text, &gold).unwrap().outcome, "{} vs {}", text, gold);
                let off = rational_text(&(v + BigRational::new(1.into(), 7.into())));
                prop_assert!(!judge(&text, &off).unwrap().outcome, "{} vs {}", text, off);
            }
            None => prop_assert!(canonicalize_str(&text).is_err()),
        }
    }

    #[test]
    fn equivalence_is_reflexive_and_symmetric((a, x) in expr(), (b, y) in expr()) {
        prop_assume!(x.is_some() && y.is_some());
        let (fa, fb) = (canonicalize_str(&a).unwrap(), canonicalize_str(&b).unwrap());
        prop_assert!(fa.equivalent_to(&fa));
        prop_assert_eq!(fa.equivalent_to(&fb), fb.equivalent_to(&fa));
        prop_assert_eq!(fa.equivalent_to(&fb), x == y);
    }

    #[test]
    fn canonicalization_is_idempotent((text, value) in expr()) {
        prop_assume!(value.is_some());
        let once = canonicalize_str(&text).unwrap();
        let twice = canonicalize_str(&once.normalized_tree.to_string()).unwrap();
        prop_assert_eq!(&once.exact_value, &twice.exact_value);
        prop_assert_eq!(&once.numeric_value, &twice.numeric_value);
    }

    #[test]
    fn likelihood_is_shift_invariant_without_penalty(
        bits in prop::collection::vec(any::<bool>(), 1..64),
        xs in prop::collection::vec(-3.0f64..3.0, 16),
        c in -5.0f64..5.0,
    ) {
        let m = dense(4, 12, &bits);
        let base = params(&m, &xs, 0.0);
        let mut shifted = base.clone();
        shifted.abilities.values_mut().for_each(|s| *s += c);
        shifted.difficulties.values_mut().for_each(|d| *d += c);
        prop_assert!((log_likelihood(&base, &m) - log_likelihood(&shifted, &m)).abs() < 1e-10);
    }

    #[test]
    fn gradient_matches_central_differences(
        bits in prop::collection::vec(any::<bool>(), 1..64),
        xs in prop::collection::vec(-3.0f64..3.0, 16),
        lambda in 0.0f64..0.5,
    ) {
        let m = dense(4, 12, &bits);
        let at = params(&m, &xs, lambda);
        let g = gradient(&at, &m);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for key in at.abilities.keys() {
            let (mut up, mut down) = (at.clone(), at.clone());
            *up.abilities.get_mut(key).unwrap() += h;
            *down.abilities.get_mut(key).unwrap() -= h;
            let fd = (log_likelihood(&up, &m) - log_likelihood(&down, &m)) / (2.0 * h);
            worst = worst.max((fd - g.abilities[key]).abs());
        }
        for key in at.difficulties.keys() {
            let (mut up, mut down) = (at.clone(), at.clone());
            *up.difficulties.get_mut(key).unwrap() += h;
            *down.difficulties.get_mut(key).unwrap() -= h;
            let fd = (log_likelihood(&up, &m) - log_likelihood(&down, &m)) / (2.0 * h);
            worst = worst.max((fd - g.difficulties[key]).abs());
        }
        prop_assert!(worst / g.inf_norm().max(1.0) < 1e-6, "relative error {}", worst);
    }

    #[test]
    fn fitted_optimum_has_vanishing_gradient(bits in prop::collection::vec(any::<bool>(), 8..64)) {
        let m = dense(4, 12, &bits);
        if let Ok(f) = fit(&m, &FitConfig::default()) {
            prop_assert!(f.converged);
            prop_assert!(gradient(&f, &m).inf_norm() < 1e-6);
        }
    }

    #[test]
    fn rank_ranges_bracket_a_consistent_order(bounds in prop::collection::vec((0.0f64..100.0, 0.0f64..30.0), 1..12)) {
        let rows: Vec<IntervalRow> = bounds
            .iter()
            .enumerate()
            .map(|(i, &(lo, w))| IntervalRow { model: id(&format!("m{i:02}")), axis: Axis::Composite, point: lo + w / 2.0, lower: lo, upper: lo + w })
            .collect();
        let ranges = rank_ranges(&rows);
        let n = rows.len();
        // Ranking by point estimate is one ordering consistent with every interval.
        let mut order: Vec<&IntervalRow> = rows.iter().collect();
        order.sort_by(|a, b| b.point.total_cmp(&a.point));
        for (pos, r) in order.iter().enumerate() {
            let g = ranges[&r.model];
            prop_assert!(1 <= g.best && g.best <= g.worst && g.worst <= n);
            prop_assert!(g.best <= pos + 1 && pos < g.worst, "{:?} at {}", g, pos + 1);
        }
    }
}
