//! Small hand-built instance with a fractional optimum on eight vertices
//! `s, 1, ..., 6, t`, plus two ways of writing it as a combination of three trees.
//!
//! Vertex `s` is index 0, `1..6` keep their numbers and `t` is index 7.

use crate::graph::edge_id;
use crate::instance::{metric_closure, Instance};
use crate::rational::{rat, Rational};
use crate::subtour::LpSolution;

pub const N: usize = 8;

const FULL: [&str; 3] = ["12", "56", "34"];
const TWO_THIRDS: [&str; 3] = ["s1", "45", "6t"];
const ONE_THIRD: [&str; 6] = ["s3", "13", "52", "t2", "36", "24"];

pub fn vertex(label: char) -> usize {
    match label {
        's' => 0,
        't' => 7,
        d => d.to_digit(10).filter(|&d| (1..=6).contains(&d)).expect("fixture vertex label") as usize,
    }
}

/// Edge id of a two-character edge name such as `"s1"`.
pub fn edge(name: &str) -> usize {
    let mut chars = name.chars();
    let u = vertex(chars.next().expect("edge name"));
    let v = vertex(chars.next().expect("edge name"));
    edge_id(N, u, v)
}

fn edges(names: &[&str]) -> Vec<usize> {
    let mut out: Vec<usize> = names.iter().map(|e| edge(e)).collect();
    out.sort_unstable();
    out
}

/// The fractional vector over the complete graph on eight vertices.
pub fn figure1_vector() -> Vec<Rational> {
    let mut x = vec![Rational::zero(); edge_id(N, N - 2, N - 1) + 1];
    for e in FULL {
        x[edge(e)] = rat(1, 1);
    }
    for e in TWO_THIRDS {
        x[edge(e)] = rat(2, 3);
    }
    for e in ONE_THIRD {
        x[edge(e)] = rat(1, 3);
    }
    x
}

/// Shortest-path metric of the support with unit lengths.
pub fn figure1_instance() -> Instance {
    let x = figure1_vector();
    let raw: Vec<Option<Rational>> = x.iter().map(|v| v.is_positive().then(|| rat(1, 1))).collect();
    let cost = metric_closure(N, &raw).expect("support is connected");
    let mut inst = Instance::new(N, 0, 7, cost).expect("closure is metric");
    inst.name = Some("figure1".into());
    inst
}

pub fn figure1() -> (Instance, LpSolution) {
    let inst = figure1_instance();
    let xstar = LpSolution::from_vector(&inst, figure1_vector());
    (inst, xstar)
}

/// Layered combination: the first tree has one edge in every narrow cut.
pub fn figure2_trees() -> Vec<Vec<usize>> {
    vec![
        edges(&["s1", "12", "24", "34", "45", "56", "6t"]),
        edges(&["12", "34", "56", "6t", "s3", "52", "36"]),
        edges(&["s1", "12", "34", "45", "56", "13", "t2"]),
    ]
}

/// A combination of the same vector that is not layered.
pub fn figure5_trees() -> Vec<Vec<usize>> {
    vec![
        edges(&["s1", "12", "34", "45", "56", "6t", "52"]),
        edges(&["12", "24", "34", "45", "56", "6t", "s3"]),
        edges(&["s1", "12", "34", "56", "13", "t2", "36"]),
    ]
}
