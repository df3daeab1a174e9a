//! Exact functional graphs of digitized chaotic maps.
//!
//! Every map here is evaluated without floating-point error: fixed-point
//! Logistic values are dyadic rationals, minifloat values are rounded from
//! exact dyadic products, and the Arnold map is integer arithmetic mod `2^e`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::keystream::{decompose, Quantizer};

/// Finite map with exactly one successor per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionalGraph {
    succ: Vec<usize>,
    labels: Vec<u64>,
}

impl FunctionalGraph {
    pub fn new(succ: Vec<usize>, labels: Vec<u64>) -> Result<Self> {
        let n = succ.len();
        if labels.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {n} nodes",
                labels.len()
            )));
        }
        if let Some((i, &s)) = succ.iter().enumerate().find(|(_, &s)| s >= n) {
            return Err(Error::InvalidArgument(format!(
                "node {i} has successor {s} outside 0..{n}"
            )));
        }
        Ok(FunctionalGraph { succ, labels })
    }

    /// Graph labeled by node index.
    pub fn from_successors(succ: Vec<usize>) -> Result<Self> {
        let labels = (0..succ.len() as u64).collect();
        Self::new(succ, labels)
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }

    pub fn successors(&self) -> &[usize] {
        &self.succ
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.len()];
        for &s in &self.succ {
            deg[s] += 1;
        }
        deg
    }

    pub fn is_permutation(&self) -> bool {
        self.in_degrees().iter().all(|&d| d == 1)
    }
}

/// One row of a [`ComponentCensus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CensusEntry {
    pub cycle_length: usize,
    pub component_size: usize,
    pub count: usize,
}

/// Weakly connected components grouped by `(cycle length, component size)`.
///
/// Sorted by cycle length, then component size, both descending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentCensus {
    pub entries: Vec<CensusEntry>,
}

impl ComponentCensus {
    pub fn node_total(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.component_size * e.count)
            .sum()
    }

    pub fn component_total(&self) -> usize {
        self.entries.iter().map(|e| e.count).sum()
    }

    /// Components per cycle length, summed over sizes.
    pub fn by_period(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry(e.cycle_length).or_insert(0) += e.count;
        }
        out
    }

    /// `cycle_length,component_size,count` lines under a header.
    pub fn to_text(&self) -> String {
        let mut s = String::from("cycle_length,component_size,count\n");
        for e in &self.entries {
            let _ = writeln!(s, "{},{},{}", e.cycle_length, e.component_size, e.count);
        }
        s
    }
}

/// Decomposes a functional graph into components.
///
/// Iterative walk with white/grey/black marking: each walk stops at a black
/// node (already assigned) or closes a new cycle at a grey one. Linear time.
pub fn component_census(graph: &FunctionalGraph) -> ComponentCensus {
    const WHITE: u8 = 0;
    const GREY: u8 = 1;
    const BLACK: u8 = 2;

    let n = graph.len();
    let succ = graph.successors();
    let mut color = vec![WHITE; n];
    let mut comp = vec![usize::MAX; n];
    let mut cycle_len: Vec<usize> = Vec::new();
    let mut path = Vec::new();

    for start in 0..n {
        if color[start] != WHITE {
            continue;
        }
        path.clear();
        let mut v = start;
        while color[v] == WHITE {
            color[v] = GREY;
            path.push(v);
            v = succ[v];
        }
        let id = if color[v] == GREY {
            let pos = path
                .iter()
                .position(|&p| p == v)
                .expect("grey node lies on the current path");
            cycle_len.push(path.len() - pos);
            cycle_len.len() - 1
        } else {
            comp[v]
        };
        for &p in &path {
            color[p] = BLACK;
            comp[p] = id;
        }
    }

    let mut sizes = vec![0usize; cycle_len.len()];
    for &c in &comp {
        sizes[c] += 1;
    }
    let mut agg: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (id, &len) in cycle_len.iter().enumerate() {
        *agg.entry((len, sizes[id])).or_insert(0) += 1;
    }
    let entries = agg
        .into_iter()
        .rev()
        .map(|((cycle_length, component_size), count)| CensusEntry {
            cycle_length,
            component_size,
            count,
        })
        .collect();
    ComponentCensus { entries }
}

/// Fixed-point arithmetic domain `{0, 1, ..., 2^e}` (values `i / 2^e`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPointSpec {
    pub e: u32,
    pub quantizer: Quantizer,
}

/// Logistic map with `μ = mu_num / 2^mu_den_pow2` on a fixed-point grid.
///
/// Node `i` maps to `quantizer(mu_num · i · (2^e - i) / 2^(d + e))`,
/// clamped to `2^e`. Nodes are labeled `i`.
pub fn logistic_fixed_map(
    mu_num: u64,
    mu_den_pow2: u32,
    spec: FixedPointSpec,
) -> Result<FunctionalGraph> {
    if spec.e == 0 || spec.e > 24 {
        return Err(Error::InvalidArgument(format!(
            "fixed-point precision must be in 1..=24, got {}",
            spec.e
        )));
    }
    if mu_den_pow2 > 64 {
        return Err(Error::InvalidArgument(format!(
            "μ denominator 2^{mu_den_pow2} too large"
        )));
    }
    let top = 1u64 << spec.e;
    let shift = mu_den_pow2 + spec.e;
    let succ = (0..=top)
        .map(|i| {
            let num = u128::from(mu_num) * u128::from(i) * u128::from(top - i);
            spec.quantizer.apply_dyadic(num, shift).min(u128::from(top)) as usize
        })
        .collect();
    FunctionalGraph::new(succ, (0..=top).collect())
}

/// Non-negative minifloat format with IEEE-style subnormals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MiniFloatSpec {
    pub sign_bits: u32,
    pub exp_bits: u32,
    pub mant_bits: u32,
    pub bias: i32,
}

impl MiniFloatSpec {
    /// 1 sign + 4 exponent + 4 significand bits, bias 7.
    pub const NINE_BIT: MiniFloatSpec = MiniFloatSpec {
        sign_bits: 1,
        exp_bits: 4,
        mant_bits: 4,
        bias: 7,
    };

    pub fn validate(&self) -> Result<()> {
        if self.sign_bits > 1 {
            return Err(Error::InvalidArgument("sign bits must be 0 or 1".into()));
        }
        if self.exp_bits == 0
            || self.mant_bits == 0
            || self.sign_bits + self.exp_bits + self.mant_bits > 16
        {
            return Err(Error::InvalidArgument(format!(
                "minifloat layout {}+{}+{} not enumerable",
                self.sign_bits, self.exp_bits, self.mant_bits
            )));
        }
        let (_, max_exp) = self.max_finite();
        let span =
            i64::from(max_exp) - i64::from(self.quantum_exp()) + i64::from(self.mant_bits) + 1;
        if self.quantum_exp() < -60 || self.quantum_exp() > 0 || span > 120 {
            return Err(Error::InvalidArgument(format!(
                "minifloat exponent range (bias {}) exceeds exact 128-bit evaluation",
                self.bias
            )));
        }
        Ok(())
    }

    fn min_exp(&self) -> i32 {
        1 - self.bias
    }

    /// Exponent of the subnormal spacing; every value is a multiple of `2^quantum_exp`.
    pub fn quantum_exp(&self) -> i32 {
        self.min_exp() - self.mant_bits as i32
    }

    /// Largest finite value as `(significand, exponent)`; the all-ones exponent is reserved.
    fn max_finite(&self) -> (u128, i32) {
        let top_biased = (1i32 << self.exp_bits) - 2;
        let sig = (1u128 << (self.mant_bits + 1)) - 1;
        (sig, top_biased - self.bias - self.mant_bits as i32)
    }

    /// Value of a non-negative encoding as `k · 2^quantum_exp`, or `None`
    /// for the reserved exponent.
    fn decode(&self, biased: u32, mant: u32) -> Option<u128> {
        if biased == (1 << self.exp_bits) - 1 {
            return None;
        }
        let m = u128::from(mant);
        if biased == 0 {
            Some(m)
        } else {
            Some(((1u128 << self.mant_bits) | m) << (biased - 1))
        }
    }

    /// Rounds `num · 2^exp` to the nearest representable value (ties to
    /// even), saturating at the largest finite value. The result is a
    /// multiple of `2^quantum_exp`, returned as that multiple.
    fn round(&self, num: u128, exp: i32) -> u128 {
        if num == 0 {
            return 0;
        }
        let msb = 127 - num.leading_zeros() as i32 + exp;
        let step_exp = msb.max(self.min_exp()) - self.mant_bits as i32;
        let q = self.quantum_exp();
        let rounded_steps = if exp >= step_exp {
            num << (exp - step_exp) as u32
        } else {
            Quantizer::Round.apply_dyadic(num, (step_exp - exp) as u32)
        };
        let value = rounded_steps << (step_exp - q) as u32;
        let (max_sig, max_exp) = self.max_finite();
        value.min(max_sig << (max_exp - q) as u32)
    }
}

/// Logistic map evaluated in a minifloat format on all representable
/// values in `[0, 1]`.
///
/// Each product `(μ·x)` and `(1 - x)` and the final product is rounded to
/// the format; `μ` itself is used exactly. Successors above one are clamped
/// to one. Nodes are labeled `x · 2^-quantum_exp` (i.e. `i` for `i/2^10` in
/// the 9-bit default).
pub fn logistic_minifloat_map(mu: f64, spec: MiniFloatSpec) -> Result<FunctionalGraph> {
    spec.validate()?;
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "μ must be finite and non-negative, got {mu}"
        )));
    }
    let q = spec.quantum_exp();
    let one = 1u128 << (-q) as u32;

    let mut values: Vec<u128> = Vec::new();
    for biased in 0..(1u32 << spec.exp_bits) {
        for mant in 0..(1u32 << spec.mant_bits) {
            if let Some(v) = spec.decode(biased, mant) {
                if v <= one {
                    values.push(v);
                }
            }
        }
    }
    values.sort_unstable();
    values.dedup();
    let index: HashMap<u128, usize> = values.iter().enumerate().map(|(i, &v)| (v, i)).collect();

    let (mu_sig, mu_exp) = decompose(mu);
    let succ = values
        .iter()
        .map(|&x| {
            let mu_x = spec.round(u128::from(mu_sig) * x, mu_exp + q);
            let one_minus = spec.round(one - x, q);
            let y = spec.round(mu_x * one_minus, 2 * q).min(one);
            index[&y]
        })
        .collect();
    let labels = values.iter().map(|&v| v as u64).collect();
    FunctionalGraph::new(succ, labels)
}

/// Arnold map on `Z_{2^e} × Z_{2^e}`, node `z = x + y·2^e`:
/// `(x, y) -> (x + a·y, b·x + (1 + a·b)·y) mod 2^e`.
pub fn arnold_mod_map(a_prime: u64, b_prime: u64, e: u32) -> Result<FunctionalGraph> {
    if e == 0 || e > 12 {
        return Err(Error::InvalidArgument(format!(
            "Arnold precision must be in 1..=12, got {e}"
        )));
    }
    let size = 1u64 << e;
    let mask = size - 1;
    let a = a_prime & mask;
    let b = b_prime & mask;
    let ab1 = (a * b + 1) & mask;
    let succ = (0..size * size)
        .map(|z| {
            let (x, y) = (z & mask, z >> e);
            let nx = (x + a * y) & mask;
            let ny = (b * x + ab1 * y) & mask;
            (nx + (ny << e)) as usize
        })
        .collect();
    FunctionalGraph::from_successors(succ)
}

/// DOT rendering: one labeled node line and one `a -> b;` edge per node.
pub fn export_dot(graph: &FunctionalGraph, name: &str) -> String {
    let mut s = String::with_capacity(graph.len() * 24);
    let _ = writeln!(s, "digraph {} {{", sanitize_id(name));
    for (i, label) in graph.labels().iter().enumerate() {
        let _ = writeln!(s, "  {i} [label=\"{label}\"];");
    }
    for (i, &t) in graph.successors().iter().enumerate() {
        let _ = writeln!(s, "  {i} -> {t};");
    }
    s.push_str("}\n");
    s
}

fn sanitize_id(name: &str) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    if cleaned.is_empty() || cleaned.starts_with(|c: char| c.is_ascii_digit()) {
        format!("g_{cleaned}")
    } else {
        cleaned
    }
}

/// Binary size of `10^m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pow10Stats {
    pub m: u32,
    /// Exact bit length of `10^m`.
    pub bit_length: u64,
    /// `ceil(m · log2 10)`.
    pub formula_bit_length: u64,
    /// Number of one bits.
    pub popcount: u64,
}

pub fn pow10_stats(m: u32) -> Result<Pow10Stats> {
    if !(1..=50).contains(&m) {
        return Err(Error::InvalidArgument(format!(
            "m must be in 1..=50, got {m}"
        )));
    }
    let p = BigUint::from(10u32).pow(m);
    let stats = Pow10Stats {
        m,
        bit_length: p.bits(),
        formula_bit_length: (f64::from(m) * 10f64.log2()).ceil() as u64,
        popcount: p.count_ones(),
    };
    if stats.bit_length != stats.formula_bit_length {
        return Err(Error::Internal(format!(
            "bit length of 10^{m}: exact {} vs formula {}",
            stats.bit_length, stats.formula_bit_length
        )));
    }
    Ok(stats)
}
