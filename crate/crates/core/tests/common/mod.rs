#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stpath_core::instance::{gen_random_metric, metric_closure, GenKind};
use stpath_core::rational::Rational;
use stpath_core::subtour::LpSolution;
use stpath_core::Instance;

/// The fixed random suite: 100 seeds per generator kind, n = 5 + seed mod 8.
pub fn random_suite() -> Vec<Instance> {
    let mut out = Vec::with_capacity(200);
    for kind in [GenKind::Euclidean, GenKind::GraphMetric] {
        for seed in 0..100u64 {
            out.push(gen_random_metric(5 + (seed as usize % 8), seed, kind));
        }
    }
    out
}

/// Uniform mixture of `k` random Hamiltonian s-t paths: always in the subtour polytope.
pub fn path_mixture(inst: &Instance, k: usize, rng: &mut ChaCha8Rng) -> LpSolution {
    let n = inst.n();
    let mut x = vec![Rational::zero(); inst.m()];
    let w = Rational::new(1, k as i64);
    for _ in 0..k {
        let mut mid: Vec<usize> = (0..n).filter(|&v| v != inst.s() && v != inst.t()).collect();
        mid.shuffle(rng);
        let mut path = vec![inst.s()];
        path.extend(mid);
        path.push(inst.t());
        for p in path.windows(2) {
            x[inst.edge(p[0], p[1])] += &w;
        }
    }
    LpSolution::from_vector(inst, x)
}

/// Euclidean instance with a mixture of two or three paths, n in [6, 10].
pub fn mixture_case(seed: u64) -> (Instance, LpSolution) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(6..=10);
    let inst = gen_random_metric(n, seed, GenKind::Euclidean);
    let k = rng.gen_range(2..=3);
    let x = path_mixture(&inst, k, &mut rng);
    (inst, x)
}

/// Ladder on s, a_1..a_m, b_1..b_m, t: rails and end edges at 1/2, rungs at 1.
/// Every narrow cut has size 1 and no edge lies in two of them.
pub fn ladder(m: usize, seed: u64) -> (Instance, LpSolution) {
    let n = 2 * m + 2;
    let (s, t) = (0, n - 1);
    let a = |j: usize| 1 + j;
    let b = |j: usize| 1 + m + j;
    let half = Rational::new(1, 2);
    let mut support: Vec<(usize, usize, Rational)> = vec![(s, a(0), half.clone()), (s, b(0), half.clone())];
    for j in 0..m {
        support.push((a(j), b(j), Rational::one()));
        if j + 1 < m {
            support.push((a(j), a(j + 1), half.clone()));
            support.push((b(j), b(j + 1), half.clone()));
        }
    }
    support.push((a(m - 1), t, half.clone()));
    support.push((b(m - 1), t, half));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m_all = n * (n - 1) / 2;
    let mut raw: Vec<Option<Rational>> = vec![None; m_all];
    let probe = Instance::from_fn(n, s, t, |_, _| Rational::one()).expect("unit metric");
    let mut x = vec![Rational::zero(); m_all];
    for (u, v, val) in support {
        let e = probe.edge(u, v);
        raw[e] = Some(Rational::from_integer(rng.gen_range(1..=9)));
        x[e] = val;
    }
    let cost = metric_closure(n, &raw).expect("ladder is connected");
    let mut inst = Instance::new(n, s, t, cost).expect("closure is metric");
    inst.name = Some(format!("ladder-m{m}-seed{seed}"));
    let xs = LpSolution::from_vector(&inst, x);
    (inst, xs)
}
