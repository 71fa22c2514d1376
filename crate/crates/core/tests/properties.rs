use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sraal_core::diffcore::{Tape, Tensor, Var};
use sraal_core::kcenter::{brute_force_optimal_radius, covering_radius, greedy_kcenter, greedy_kcenter_from, EmbeddingSet};
use sraal_core::losses::{binary_disc_loss_value, disc_loss_value, gen_adv_loss_value, kl_gaussian};
use sraal_core::nets::LatentCode;
use sraal_core::oui::{min_var, oui_score, variance, ProbVector};

fn simplex(c: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, c).prop_filter_map("degenerate", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| w.iter().map(|x| x / s).collect())
    })
}

fn any_simplex() -> impl Strategy<Value = Vec<f64>> {
    (2usize..40).prop_flat_map(simplex)
}

fn naive_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn oui_in_unit_interval(v in any_simplex()) {
        let s = oui_score(&ProbVector::new(v).unwrap()).value();
        prop_assert!((0.0..1.0).contains(&s), "{s}");
    }

    #[test]
    fn oui_permutation_invariant(v in any_simplex(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut w = v.clone();
        w.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = oui_score(&ProbVector::new(v).unwrap()).value();
        let b = oui_score(&ProbVector::new(w).unwrap()).value();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn variance_matches_two_pass(v in any_simplex()) {
        let got = variance(&ProbVector::new(v.clone()).unwrap());
        prop_assert!((got - naive_variance(&v)).abs() < 1e-14);
    }

    #[test]
    fn min_var_is_a_lower_bound(v in any_simplex()) {
        let p = ProbVector::new(v).unwrap();
        let bound = min_var(p.classes(), p.max()).unwrap();
        prop_assert!(variance(&p) >= bound - 1e-12);
    }

    #[test]
    fn minimum_variance_shape_scores_one_minus_max(c in 2usize..30, t in 0.0f64..1.0) {
        let lo = 1.0 / c as f64;
        let m1 = lo + t * (1.0 - lo) * 0.5;
        let m2 = m1 + (1.0 - m1) * 0.5;
        let shape = |m: f64| {
            let mut v = vec![(1.0 - m) / (c - 1) as f64; c];
            v[0] = m;
            ProbVector::new(v).unwrap()
        };
        let (s1, s2) = (oui_score(&shape(m1)).value(), oui_score(&shape(m2)).value());
        if m1 - lo > 1e-6 {
            prop_assert!((s1 - (1.0 - m1)).abs() < 1e-9);
        }
        prop_assert!((s2 - (1.0 - m2)).abs() < 1e-9);
        prop_assert!(s2 < s1);
    }

    #[test]
    fn score_increases_with_variance_at_fixed_max(c in 4usize..20, m in 0.3f64..0.6, a in 0.05f64..0.95) {
        // Both vectors share the maximum m; the second moves mass between
        // two non-max entries, raising the variance.
        prop_assume!(m * (c - 1) as f64 > 1.0 - m + 1e-3);
        let rest = (1.0 - m) / (c - 1) as f64;
        let mut base = vec![rest; c];
        base[0] = m;
        let shift = a * rest.min(m - rest);
        let mut spread = base.clone();
        spread[1] += shift;
        spread[2] -= shift;
        let pb = ProbVector::new(base).unwrap();
        let ps = ProbVector::new(spread).unwrap();
        prop_assert_eq!(pb.max(), ps.max());
        prop_assert!(variance(&ps) > variance(&pb));
        prop_assert!(oui_score(&ps).value() > oui_score(&pb).value());
    }

    #[test]
    fn kl_nonnegative(mean in prop::collection::vec(-3.0f64..3.0, 1..6), lv in prop::collection::vec(-3.0f64..3.0, 6)) {
        let lv = lv[..mean.len()].to_vec();
        let code = LatentCode::new(mean, lv).unwrap();
        prop_assert!(kl_gaussian(&code) >= 0.0);
    }

    #[test]
    fn disc_losses_permutation_invariant(
        pairs in prop::collection::vec((0.01f64..0.99, 0.01f64..0.99, 0.0f64..1.0), 1..12),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let split = |p: &[(f64, f64, f64)]| {
            (p.iter().map(|t| t.0).collect::<Vec<_>>(), p.iter().map(|t| t.1).collect::<Vec<_>>(), p.iter().map(|t| t.2).collect::<Vec<_>>())
        };
        let (l, u, s) = split(&pairs);
        let (l2, u2, s2) = split(&shuffled);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
        prop_assert!(close(disc_loss_value(&l, &u, &s).unwrap(), disc_loss_value(&l2, &u2, &s2).unwrap()));
        prop_assert!(close(binary_disc_loss_value(&l, &u).unwrap(), binary_disc_loss_value(&l2, &u2).unwrap()));
        prop_assert!(close(gen_adv_loss_value(&l, &u).unwrap(), gen_adv_loss_value(&l2, &u2).unwrap()));
    }

    #[test]
    fn indicator_one_reduces_to_binary_bitwise(pairs in prop::collection::vec((0.001f64..0.999, 0.001f64..0.999), 1..16)) {
        let l: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let u: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let ones = vec![1.0; u.len()];
        prop_assert_eq!(disc_loss_value(&l, &u, &ones).unwrap().to_bits(), binary_disc_loss_value(&l, &u).unwrap().to_bits());
    }
}

fn points_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, usize)> {
    (2usize..12, 1usize..4).prop_flat_map(|(n, d)| {
        (prop::collection::vec(prop::collection::vec(-5.0f64..5.0, d), n), 1usize..=4usize.min(n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kcenter_is_two_approximate((pts, m) in points_strategy(), seed in any::<u64>()) {
        let emb = EmbeddingSet::from_points(pts).unwrap();
        let sel = greedy_kcenter(&emb, m, 1, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let opt = brute_force_optimal_radius(&emb, m).unwrap();
        prop_assert!(sel.radius <= 2.0 * opt + 1e-9, "{} > 2 x {}", sel.radius, opt);
        prop_assert!((covering_radius(&emb, &sel.ids).unwrap() - sel.radius).abs() < 1e-12);
    }

    #[test]
    fn kcenter_radius_non_increasing_in_m((pts, _) in points_strategy(), start in any::<prop::sample::Index>()) {
        let emb = EmbeddingSet::from_points(pts).unwrap();
        let s = start.index(emb.len());
        let mut prev = f64::INFINITY;
        for m in 1..=emb.len() {
            let r = greedy_kcenter_from(&emb, m, &[s]).unwrap().radius;
            prop_assert!(r <= prev + 1e-15);
            prev = r;
        }
        prop_assert_eq!(prev, 0.0);
    }

    #[test]
    fn kcenter_follows_argmax_of_min_distance((pts, m) in points_strategy()) {
        let emb = EmbeddingSet::from_points(pts.clone()).unwrap();
        let sel = greedy_kcenter_from(&emb, m, &[0]).unwrap();
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        for k in 1..sel.ids.len() {
            let chosen = &sel.ids[..k];
            let gap = |i: usize| chosen.iter().map(|&c| dist(&pts[i], &pts[c])).fold(f64::INFINITY, f64::min);
            let best = (0..pts.len()).filter(|i| !chosen.contains(i)).map(gap).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((gap(sel.ids[k]) - best).abs() < 1e-12);
        }
    }
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::randn(shape, 1.0, rng)
}

/// Small MLP-style loss touching most primitives.
fn composite(tape: &mut Tape, p: &[Var], x: &Tensor, which: usize) -> Var {
    let xv = tape.leaf(x.clone());
    let h = tape.matmul(xv, p[0]).unwrap();
    let h = tape.add_bias(h, p[1]).unwrap();
    let h = tape.tanh(h);
    let o = tape.matmul(h, p[2]).unwrap();
    match which {
        0 => {
            let ls = tape.log_softmax(o).unwrap();
            let s = tape.sum(ls);
            tape.scale(s, -1.0)
        }
        _ => {
            let s = tape.sigmoid(o);
            let l = tape.log(s);
            tape.mean(l).unwrap()
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = [random_tensor(&mut rng, &[4, 5]), random_tensor(&mut rng, &[5]), random_tensor(&mut rng, &[5, 3])];
        let x = random_tensor(&mut rng, &[6, 4]);
        let grads = |wf: f64, wg: f64| {
            let mut tape = Tape::new();
            let vars: Vec<Var> = params.iter().map(|t| tape.leaf(t.clone())).collect();
            let f = composite(&mut tape, &vars, &x, 0);
            let g = composite(&mut tape, &vars, &x, 1);
            let f = tape.scale(f, wf);
            let g = tape.scale(g, wg);
            let loss = tape.add(f, g).unwrap();
            tape.backward(loss).unwrap().collect(&vars)
        };
        let (gf, gg, gc) = (grads(1.0, 0.0), grads(0.0, 1.0), grads(a, b));
        for ((f, g), c) in gf.iter().zip(&gg).zip(&gc) {
            for ((x, y), z) in f.data().iter().zip(g.data()).zip(c.data()) {
                prop_assert!((a * x + b * y - z).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn tape_replay_is_bitwise_identical(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = [random_tensor(&mut rng, &[4, 5]), random_tensor(&mut rng, &[5]), random_tensor(&mut rng, &[5, 3])];
        let x = random_tensor(&mut rng, &[6, 4]);
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|t| tape.leaf(t.clone())).collect();
        let loss = composite(&mut tape, &vars, &x, 0);
        let first = tape.backward(loss).unwrap().collect(&vars);
        let second = tape.backward(loss).unwrap().collect(&vars);
        for (a, b) in first.iter().zip(&second) {
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(a), bits(b));
        }
    }
}
