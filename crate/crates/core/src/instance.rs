//! Metric s-t path TSP instances: loading, validation, closure and generation.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use num::{BigInt, Integer, One, Signed, ToPrimitive};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{edge_count, edge_ends, edge_id, is_connected};
use crate::rational::Rational;

/// A complete metric cost function on `n` vertices with endpoints `s` and `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    n: usize,
    s: usize,
    t: usize,
    cost: Vec<Rational>,
    ends: Vec<(usize, usize)>,
    pub name: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Tsplib,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "tsplib" | "tsp" | "tsplib-subset" => Ok(Format::Tsplib),
            other => Err(Error::Parse(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GenKind {
    Euclidean,
    GraphMetric,
}

impl FromStr for GenKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(GenKind::Euclidean),
            "graph-metric" | "graph" => Ok(GenKind::GraphMetric),
            other => Err(Error::Parse(format!("unknown generator kind {other:?}"))),
        }
    }
}

impl fmt::Display for GenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GenKind::Euclidean => "euclidean",
            GenKind::GraphMetric => "graph-metric",
        })
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Replace the costs by their shortest-path closure before validation.
    pub closure: bool,
    /// Endpoint overrides (0-based); TSPLIB defaults to the first two nodes.
    pub s: Option<usize>,
    pub t: Option<usize>,
}

impl Instance {
    /// Builds and validates an instance from a full cost vector indexed by edge id.
    pub fn new(n: usize, s: usize, t: usize, cost: Vec<Rational>) -> Result<Self> {
        let inst = Instance::new_unchecked(n, s, t, cost)?;
        inst.validate_metric()?;
        Ok(inst)
    }

    fn new_unchecked(n: usize, s: usize, t: usize, cost: Vec<Rational>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInstance(format!("need n >= 2, got {n}")));
        }
        if s >= n || t >= n || s == t {
            return Err(Error::InvalidInstance(format!(
                "endpoints must be distinct vertices below {n}, got s={s}, t={t}"
            )));
        }
        if cost.len() != edge_count(n) {
            return Err(Error::InvalidInstance(format!(
                "expected {} costs, got {}",
                edge_count(n),
                cost.len()
            )));
        }
        if let Some(e) = cost.iter().position(|c| c.is_negative()) {
            return Err(Error::InvalidInstance(format!("negative cost on edge {:?}", edge_ends(n)[e])));
        }
        Ok(Instance {
            n,
            s,
            t,
            cost,
            ends: edge_ends(n),
            name: None,
        })
    }

    /// Builds an instance from a cost matrix accessor.
    pub fn from_fn(n: usize, s: usize, t: usize, f: impl Fn(usize, usize) -> Rational) -> Result<Self> {
        let cost = edge_ends(n).into_iter().map(|(u, v)| f(u, v)).collect();
        Instance::new(n, s, t, cost)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Number of complete-graph edges.
    pub fn m(&self) -> usize {
        self.cost.len()
    }

    pub fn edge(&self, u: usize, v: usize) -> usize {
        edge_id(self.n, u, v)
    }

    pub fn ends(&self, e: usize) -> (usize, usize) {
        self.ends[e]
    }

    pub fn all_ends(&self) -> &[(usize, usize)] {
        &self.ends
    }

    pub fn cost(&self, u: usize, v: usize) -> &Rational {
        &self.cost[self.edge(u, v)]
    }

    pub fn edge_cost(&self, e: usize) -> &Rational {
        &self.cost[e]
    }

    pub fn costs(&self) -> &[Rational] {
        &self.cost
    }

    /// Total cost of an edge multiset.
    pub fn cost_of(&self, edges: &[usize]) -> Rational {
        edges.iter().map(|&e| &self.cost[e]).sum()
    }

    /// Cost of the fractional vector `x` (indexed by edge id).
    pub fn cost_of_vector(&self, x: &[Rational]) -> Rational {
        x.iter()
            .zip(&self.cost)
            .filter(|(v, _)| !v.is_zero())
            .map(|(v, c)| v * c)
            .sum()
    }

    /// Cost of a vertex sequence.
    pub fn path_cost(&self, path: &[usize]) -> Rational {
        path.windows(2).map(|w| self.cost(w[0], w[1]).clone()).sum()
    }

    /// Full O(n^3) triangle-inequality scan.
    pub fn validate_metric(&self) -> Result<()> {
        check_triangles(self.n, &self.cost)
    }

    pub fn with_endpoints(&self, s: usize, t: usize) -> Result<Self> {
        let mut inst = Instance::new_unchecked(self.n, s, t, self.cost.clone())?;
        inst.name = self.name.clone();
        Ok(inst)
    }

    pub fn to_json(&self) -> InstanceJson {
        InstanceJson {
            name: self.name.clone(),
            n: self.n,
            s: self.s,
            t: self.t,
            costs: self
                .ends
                .iter()
                .zip(&self.cost)
                .map(|(&(u, v), c)| (Vertex(u), Vertex(v), c.clone()))
                .collect(),
        }
    }

    pub fn write_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("instance serializes")
    }
}

fn check_triangles(n: usize, cost: &[Rational]) -> Result<()> {
    let c = |u: usize, v: usize| &cost[edge_id(n, u, v)];
    for a in 0..n {
        for cc in a + 1..n {
            let direct = c(a, cc);
            for b in 0..n {
                if b == a || b == cc {
                    continue;
                }
                let detour = c(a, b) + c(b, cc);
                if *direct > detour {
                    return Err(Error::MetricViolation {
                        a,
                        b,
                        c: cc,
                        direct: direct.clone(),
                        detour,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Vertex label in JSON: an integer or a string holding one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Vertex(pub usize);

impl Serialize for Vertex {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Vertex {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(usize),
            Str(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Int(v) => Ok(Vertex(v)),
            Raw::Str(s) => s
                .trim()
                .parse()
                .map(Vertex)
                .map_err(|_| serde::de::Error::custom(format!("bad vertex label {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    pub s: usize,
    pub t: usize,
    pub costs: Vec<(Vertex, Vertex, Rational)>,
}

/// Reads an instance in the given format.
pub fn load_instance<R: Read>(mut source: R, format: Format, opts: LoadOptions) -> Result<Instance> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let (n, s, t, raw, name) = match format {
        Format::Json => parse_json(&text)?,
        Format::Tsplib => parse_tsplib(&text)?,
    };
    let s = opts.s.unwrap_or(s);
    let t = opts.t.unwrap_or(t);
    let cost = if opts.closure {
        metric_closure(n, &raw)?
    } else {
        raw.into_iter()
            .enumerate()
            .map(|(e, c)| {
                c.ok_or_else(|| {
                    let (u, v) = edge_ends(n)[e];
                    Error::Parse(format!("missing cost for pair ({u}, {v})"))
                })
            })
            .collect::<Result<Vec<_>>>()?
    };
    let mut inst = Instance::new(n, s, t, cost)?;
    inst.name = name;
    Ok(inst)
}

type RawInstance = (usize, usize, usize, Vec<Option<Rational>>, Option<String>);

fn parse_json(text: &str) -> Result<RawInstance> {
    let doc: InstanceJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let n = doc.n;
    if n < 2 {
        return Err(Error::InvalidInstance(format!("need n >= 2, got {n}")));
    }
    let mut raw: Vec<Option<Rational>> = vec![None; edge_count(n)];
    for (Vertex(u), Vertex(v), c) in doc.costs {
        if u >= n || v >= n || u == v {
            return Err(Error::Parse(format!("bad pair ({u}, {v}) for n = {n}")));
        }
        let slot = &mut raw[edge_id(n, u, v)];
        match slot {
            Some(prev) if *prev != c => {
                return Err(Error::Parse(format!("conflicting costs {prev} and {c} for pair ({u}, {v})")));
            }
            _ => *slot = Some(c),
        }
    }
    Ok((n, doc.s, doc.t, raw, doc.name))
}

fn parse_decimal(tok: &str) -> Result<Rational> {
    let bad = || Error::Parse(format!("bad number {tok:?}"));
    let t = tok.trim();
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all: BigInt = format!("0{int_part}{frac_part}").parse().map_err(|_| bad())?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        Rational::from_bigints(all * num::pow(ten, scale as usize), BigInt::one())
    } else {
        Rational::from_bigints(all, num::pow(ten, (-scale) as usize))
    };
    if neg {
        value = -value;
    }
    Ok(value)
}

/// Nearest integer to `sqrt(q)` for rational `q >= 0`, rounding halves up.
fn nint_sqrt(q: &Rational) -> BigInt {
    // k = floor(sqrt(q) + 1/2)  <=>  (k - 1/2)^2 <= q < (k + 1/2)^2
    let mut k = BigInt::from(q.to_f64().sqrt().round() as i64);
    let half = Rational::new(1, 2);
    let sq = |k: &BigInt, d: &Rational| {
        let v = &Rational::from_bigints(k.clone(), BigInt::one()) + d;
        &v * &v
    };
    loop {
        if k.is_positive() && sq(&k, &-&half) > *q {
            k -= 1;
        } else if sq(&k, &half) <= *q {
            k += 1;
        } else {
            return k;
        }
    }
}

fn parse_tsplib(text: &str) -> Result<RawInstance> {
    let mut name = None;
    let mut dimension: Option<usize> = None;
    let mut weight_type: Option<String> = None;
    let mut weight_format: Option<String> = None;
    let mut coords: Vec<Option<(Rational, Rational)>> = Vec::new();
    let mut matrix: Vec<Rational> = Vec::new();

    enum Section {
        Header,
        Coords,
        Weights,
    }
    let mut section = Section::Header;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "EOF" {
            break;
        }
        let keyword = line.split([':', ' ', '\t']).next().unwrap_or("").trim();
        match keyword {
            "NODE_COORD_SECTION" => {
                let n = dimension.ok_or_else(|| Error::Parse("DIMENSION must precede NODE_COORD_SECTION".into()))?;
                coords = vec![None; n];
                section = Section::Coords;
                continue;
            }
            "EDGE_WEIGHT_SECTION" => {
                section = Section::Weights;
                continue;
            }
            "DISPLAY_DATA_SECTION" | "TOUR_SECTION" | "DEMAND_SECTION" | "FIXED_EDGES_SECTION" => {
                return Err(Error::Parse(format!("unsupported section {keyword}")));
            }
            _ => {}
        }
        if let Some((key, value)) = line.split_once(':') {
            {
                let key = key.trim();
                let value = value.trim().to_string();
                match key {
                    "NAME" => name = Some(value),
                    "TYPE" => {
                        if value != "TSP" && value != "ATSP" && value != "HPP" {
                            return Err(Error::Parse(format!("unsupported TYPE {value}")));
                        }
                        if value == "ATSP" {
                            return Err(Error::Parse("asymmetric instances are not supported".into()));
                        }
                    }
                    "DIMENSION" => {
                        dimension = Some(value.parse().map_err(|_| Error::Parse(format!("bad DIMENSION {value:?}")))?)
                    }
                    "EDGE_WEIGHT_TYPE" => weight_type = Some(value),
                    "EDGE_WEIGHT_FORMAT" => weight_format = Some(value),
                    "COMMENT" | "NODE_COORD_TYPE" | "DISPLAY_DATA_TYPE" => {}
                    other => return Err(Error::Parse(format!("unsupported keyword {other}"))),
                }
                section = Section::Header;
                continue;
            }
        }
        match section {
            Section::Header => return Err(Error::Parse(format!("unexpected line {line:?}"))),
            Section::Coords => {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(Error::Parse(format!("bad coordinate line {line:?}")));
                }
                let id: usize = toks[0].parse().map_err(|_| Error::Parse(format!("bad node id {:?}", toks[0])))?;
                if id == 0 || id > coords.len() {
                    return Err(Error::Parse(format!("node id {id} out of range")));
                }
                coords[id - 1] = Some((parse_decimal(toks[1])?, parse_decimal(toks[2])?));
            }
            Section::Weights => {
                for tok in line.split_whitespace() {
                    matrix.push(parse_decimal(tok)?);
                }
            }
        }
    }

    let n = dimension.ok_or_else(|| Error::Parse("missing DIMENSION".into()))?;
    if n < 2 {
        return Err(Error::InvalidInstance(format!("need n >= 2, got {n}")));
    }
    let ends = edge_ends(n);
    let raw: Vec<Option<Rational>> = match weight_type.as_deref() {
        Some("EUC_2D") => {
            let pts: Vec<(Rational, Rational)> = coords
                .into_iter()
                .enumerate()
                .map(|(i, p)| p.ok_or_else(|| Error::Parse(format!("missing coordinates for node {}", i + 1))))
                .collect::<Result<_>>()?;
            ends.iter()
                .map(|&(u, v)| {
                    let dx = &pts[u].0 - &pts[v].0;
                    let dy = &pts[u].1 - &pts[v].1;
                    let d2 = &dx * &dx + &dy * &dy;
                    Some(Rational::from_bigints(nint_sqrt(&d2), BigInt::one()))
                })
                .collect()
        }
        Some("EXPLICIT") => {
            match weight_format.as_deref() {
                Some("FULL_MATRIX") => {}
                other => return Err(Error::Parse(format!("unsupported EDGE_WEIGHT_FORMAT {other:?}"))),
            }
            if matrix.len() != n * n {
                return Err(Error::Parse(format!("expected {} matrix entries, got {}", n * n, matrix.len())));
            }
            let mut out = Vec::with_capacity(ends.len());
            for &(u, v) in &ends {
                let (a, b) = (&matrix[u * n + v], &matrix[v * n + u]);
                if a != b {
                    return Err(Error::Parse(format!("matrix is not symmetric at ({}, {})", u + 1, v + 1)));
                }
                out.push(Some(a.clone()));
            }
            out
        }
        other => return Err(Error::Parse(format!("unsupported EDGE_WEIGHT_TYPE {other:?}"))),
    };
    Ok((n, 0, 1, raw, name))
}

/// All-pairs shortest-path closure of a partial cost vector (`None` = no edge).
pub fn metric_closure(n: usize, raw: &[Option<Rational>]) -> Result<Vec<Rational>> {
    if raw.len() != edge_count(n) {
        return Err(Error::InvalidInstance(format!("expected {} entries, got {}", edge_count(n), raw.len())));
    }
    if raw.iter().flatten().any(|c| c.is_negative()) {
        return Err(Error::InvalidInstance("negative cost".into()));
    }
    let ends = edge_ends(n);
    let support = raw.iter().zip(&ends).filter(|(c, _)| c.is_some()).map(|(_, &uv)| uv);
    if !is_connected(n, support) {
        return Err(Error::Disconnected);
    }
    let mut d: Vec<Vec<Option<Rational>>> = vec![vec![None; n]; n];
    for v in 0..n {
        d[v][v] = Some(Rational::zero());
    }
    for (e, c) in raw.iter().enumerate() {
        if let Some(c) = c {
            let (u, v) = ends[e];
            d[u][v] = Some(c.clone());
            d[v][u] = Some(c.clone());
        }
    }
    for k in 0..n {
        for i in 0..n {
            let Some(dik) = d[i][k].clone() else { continue };
            for j in 0..n {
                if let Some(dkj) = &d[k][j] {
                    let via = &dik + dkj;
                    if d[i][j].as_ref().map_or(true, |cur| via < *cur) {
                        d[i][j] = Some(via);
                    }
                }
            }
        }
    }
    Ok(ends.iter().map(|&(u, v)| d[u][v].clone().expect("connected")).collect())
}

fn isqrt_ceil(v: u64) -> u64 {
    let mut r = (v as f64).sqrt() as u64;
    while r * r > v {
        r -= 1;
    }
    while r * r < v {
        r += 1;
    }
    r
}

/// Deterministic random metric instance with `s = 0`, `t = 1`.
pub fn gen_random_metric(n: usize, seed: u64, kind: GenKind) -> Instance {
    assert!(n >= 3, "generator needs n >= 3");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ends = edge_ends(n);
    let cost = match kind {
        GenKind::Euclidean => {
            let mut pts: Vec<(i64, i64)> = Vec::with_capacity(n);
            while pts.len() < n {
                let p = (rng.gen_range(0..100), rng.gen_range(0..100));
                if !pts.contains(&p) {
                    pts.push(p);
                }
            }
            // ceil(10 * dist) / 10 keeps the triangle inequality exact
            ends.iter()
                .map(|&(u, v)| {
                    let (dx, dy) = (pts[u].0 - pts[v].0, pts[u].1 - pts[v].1);
                    let tenths = isqrt_ceil((100 * (dx * dx + dy * dy)) as u64);
                    Rational::new(tenths as i64, 10)
                })
                .collect()
        }
        GenKind::GraphMetric => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut raw: Vec<Option<Rational>> = vec![None; edge_count(n)];
            for i in 1..n {
                let j = rng.gen_range(0..i);
                raw[edge_id(n, order[i], order[j])] = Some(Rational::one());
            }
            for slot in raw.iter_mut() {
                if slot.is_none() && rng.gen_bool(0.25) {
                    *slot = Some(Rational::one());
                }
            }
            metric_closure(n, &raw).expect("spanning tree keeps the graph connected")
        }
    };
    let mut inst = Instance::new(n, 0, 1, cost).expect("generated costs are metric");
    inst.name = Some(format!("{kind}-n{n}-seed{seed}"));
    inst
}

/// Least common multiple of all cost denominators.
pub fn cost_denominator(inst: &Instance) -> BigInt {
    inst.costs().iter().fold(BigInt::one(), |acc, c| acc.lcm(&c.denom()))
}

/// Costs scaled to integers if they fit comfortably in `i64`.
pub fn integer_costs(inst: &Instance, headroom: u64) -> Option<Vec<i64>> {
    let k = cost_denominator(inst);
    let mut out = Vec::with_capacity(inst.m());
    for c in inst.costs() {
        let scaled = c.numer() * (&k / c.denom());
        let v = scaled.to_i64()?;
        if v.unsigned_abs() > i64::MAX as u64 / headroom.max(1) {
            return None;
        }
        out.push(v);
    }
    Some(out)
}
