mod common;

use common::{naive_components, naive_score, rel_close, scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use satprov::netmodel::{Allocation, EvalParams};

#[test]
fn naive_evaluator_agrees_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for seed in 0..100u64 {
        let s = scenario(8, 3, seed);
        let senior = if seed % 2 == 0 { s.initial_allocation().senior() } else { rng.random_range(0..3) };
        let a = Allocation::new((0..8).map(|_| rng.random_range(0..3)).collect(), senior, 3).unwrap();
        let p = EvalParams::default();
        let r = s.evaluate(&a).unwrap();
        if senior == s.initial_allocation().senior() {
            let (to, td, sc) = naive_score(&s, &a, &p);
            assert!(rel_close(r.term_o, to, 1e-9), "seed {seed}: term_o {} vs {to}", r.term_o);
            assert!(rel_close(r.term_d, td, 1e-9), "seed {seed}: term_d {} vs {td}", r.term_d);
            assert!(rel_close(r.score, sc, 1e-9), "seed {seed}: score {} vs {sc}", r.score);
        }
        let raw = satprov::netmodel::evaluate(s.snapshot(), &a, s.traffic(), &p, None).unwrap();
        let (n, d_intra) = naive_components(&s, &a, &p);
        for (name, x, y) in [
            ("o_syn", raw.o_syn, n.o_syn),
            ("o_flow", raw.o_flow, n.o_flow),
            ("o_path", raw.o_path, n.o_path),
            ("o_total", raw.o_total, n.o_total),
            ("d_inter", raw.d_inter, n.d_inter),
            ("d_avg", raw.d_avg, n.d_avg),
        ] {
            assert!(rel_close(x, y, 1e-9), "seed {seed}: {name} {x} vs {y}");
        }
        for (x, y) in raw.d_intra.iter().zip(&d_intra) {
            assert!(rel_close(*x, *y, 1e-9), "seed {seed}: d_intra {x} vs {y}");
        }
    }
}

#[test]
fn naive_evaluator_literal_delay_model_differs_only_in_d_avg() {
    let s = scenario(8, 3, 11);
    let a = Allocation::new(vec![0, 1, 2, 0, 1, 2, 0, 1], s.initial_allocation().senior(), 3).unwrap();
    let per_flow = EvalParams::default();
    let literal = EvalParams { delay_model: satprov::netmodel::DelayModel::Literal, ..per_flow };
    let x = satprov::netmodel::evaluate(s.snapshot(), &a, s.traffic(), &per_flow, None).unwrap();
    let y = satprov::netmodel::evaluate(s.snapshot(), &a, s.traffic(), &literal, None).unwrap();
    assert_eq!(x.o_total, y.o_total);
    assert_eq!(x.d_inter, y.d_inter);
    assert!(y.d_avg >= x.d_avg);
}
