//! Known dimensions and filling facts, used as oracles for computed results.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::network::Architecture;
use crate::symtensor::binomial;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Table1,
    AlexanderHirschowitz,
    TypicalRank,
    WidthOne,
}

impl Source {
    pub fn tag(self) -> &'static str {
        match self {
            Source::Table1 => "table-1",
            Source::AlexanderHirschowitz => "AH",
            Source::TypicalRank => "typical-rank",
            Source::WidthOne => "width-1",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Confidence {
    Proved,
    Claimed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub value: bool,
    pub confidence: Confidence,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnownFact {
    pub arch: Architecture,
    pub dim: Option<usize>,
    pub edim: usize,
    pub ambient: usize,
    pub filling: Option<bool>,
    pub manifold_equals_variety: Option<Claim>,
    pub source: Source,
    /// The architecture the fact was looked up under, when a rewrite applied.
    pub normalized: Option<Architecture>,
    pub note: Option<String>,
}

impl KnownFact {
    pub fn defect(&self) -> Option<usize> {
        self.dim.map(|d| self.edim - d)
    }
}

/// Rows `(d₀, d₁, d₂, dim, edim, ambient, M = V)` for `r = 2`.
pub const TABLE1: [(usize, usize, usize, usize, usize, usize, bool); 27] = [
    (1, 1, 1, 1, 1, 1, true),
    (1, 1, 2, 2, 2, 2, true),
    (1, 1, 3, 3, 3, 3, true),
    (1, 2, 1, 1, 1, 1, true),
    (1, 2, 2, 2, 2, 2, true),
    (1, 2, 3, 3, 3, 3, true),
    (1, 3, 1, 1, 1, 1, true),
    (1, 3, 2, 2, 2, 2, true),
    (1, 3, 3, 3, 3, 3, true),
    (2, 1, 1, 2, 2, 3, true),
    (2, 1, 2, 3, 3, 6, true),
    (2, 1, 3, 4, 4, 9, true),
    (2, 2, 1, 3, 3, 3, true),
    (2, 2, 2, 6, 6, 6, false),
    (2, 2, 3, 8, 8, 9, false),
    (2, 3, 1, 3, 3, 3, true),
    (2, 3, 2, 6, 6, 6, true),
    (2, 3, 3, 9, 9, 9, true),
    (3, 1, 1, 3, 3, 6, true),
    (3, 1, 2, 4, 4, 12, true),
    (3, 1, 3, 5, 5, 18, true),
    (3, 2, 1, 5, 6, 6, true),
    (3, 2, 2, 8, 8, 12, false),
    (3, 2, 3, 10, 10, 18, false),
    (3, 3, 1, 6, 6, 6, true),
    (3, 3, 2, 12, 12, 12, false),
    (3, 3, 3, 15, 15, 18, false),
];

/// Rows whose `M = V` entry is claimed without proof.
const TABLE1_CLAIMED: [(usize, usize, usize); 2] = [(3, 2, 2), (3, 2, 3)];

/// `(d₀, d₁, r, dim)` for the defective single-output shallow cases with `r ≥ 3`.
pub const AH_EXCEPTIONS: [(usize, usize, u32, usize); 4] = [(5, 7, 3, 34), (3, 5, 4, 14), (4, 9, 4, 34), (5, 14, 4, 69)];

fn table1_fact(arch: &Architecture) -> Option<KnownFact> {
    if arch.activation_degree() != 2 || arch.layers() != 2 {
        return None;
    }
    let w = arch.widths();
    let &(_, _, _, dim, edim, ambient, mv) = TABLE1.iter().find(|row| (row.0, row.1, row.2) == (w[0], w[1], w[2]))?;
    let confidence =
        if TABLE1_CLAIMED.contains(&(w[0], w[1], w[2])) { Confidence::Claimed } else { Confidence::Proved };
    Some(KnownFact {
        arch: arch.clone(),
        dim: Some(dim),
        edim,
        ambient,
        filling: Some(dim == ambient),
        manifold_equals_variety: Some(Claim { value: mv, confidence }),
        source: Source::Table1,
        normalized: None,
        note: None,
    })
}

/// Dimension of the single-output shallow neurovariety `(d₀, d₁, 1)` of degree `r ≥ 2`.
pub fn ah_expected_dim(d0: usize, d1: usize, r: u32) -> usize {
    let ambient = binomial((d0 + r as usize - 1) as u64, r as u64).map_or(usize::MAX, |b| b as usize);
    let expected = (d0 * d1).min(ambient);
    if r == 2 && 2 <= d1 && d1 < d0 {
        return d0 * d1 - d1 * (d1 - 1) / 2;
    }
    match AH_EXCEPTIONS.iter().find(|e| (e.0, e.1, e.2) == (d0, d1, r)) {
        Some(&(_, _, _, dim)) => dim,
        None => expected,
    }
}

fn ah_fact(arch: &Architecture) -> Option<KnownFact> {
    let w = arch.widths();
    let r = arch.activation_degree();
    if arch.layers() != 2 || w[2] != 1 || r < 2 {
        return None;
    }
    let dim = ah_expected_dim(w[0], w[1], r);
    let ambient = arch.ambient_dim();
    Some(KnownFact {
        arch: arch.clone(),
        dim: Some(dim),
        edim: arch.expected_dim(),
        ambient,
        filling: Some(dim == ambient),
        manifold_equals_variety: None,
        source: Source::AlexanderHirschowitz,
        normalized: None,
        note: None,
    })
}

/// `(d₀, d₁, 1, …, 1, d_L)` for an architecture whose first width-1 hidden
/// layer is followed by wider hidden layers.
pub fn width_one_normal_form(arch: &Architecture) -> Option<Architecture> {
    let w = arch.widths();
    let last = w.len() - 1;
    let first = (1..last).find(|&i| w[i] == 1)?;
    let mut normal = w.to_vec();
    for v in normal.iter_mut().take(last).skip(first) {
        *v = 1;
    }
    Architecture::new(normal, arch.activation_degree()).ok()
}

fn width_one_fact(arch: &Architecture) -> Option<KnownFact> {
    let normal = width_one_normal_form(arch)?;
    let w = arch.widths();
    let d_last = w[w.len() - 1];
    let dim = if w[1] == 1 { Some(w[0] + d_last - 1) } else { None };
    let note = if dim.is_none() {
        Some("neuromanifold equals that of the normalized architecture".to_string())
    } else {
        None
    };
    Some(KnownFact {
        arch: arch.clone(),
        dim,
        edim: arch.expected_dim(),
        ambient: arch.ambient_dim(),
        filling: dim.map(|d| d == arch.ambient_dim()).or(if w[0] > 1 { Some(false) } else { None }),
        manifold_equals_variety: None,
        source: Source::WidthOne,
        normalized: if &normal != arch { Some(normal) } else { None },
        note,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypicalRankFact {
    pub d0: usize,
    pub d1: usize,
    pub r: u32,
    pub filling: bool,
    pub min_filling_width: usize,
    /// Hidden widths of the printed inclusion chain of Euclidean closures.
    pub chain: Vec<usize>,
    /// `strict[i]` when the inclusion between `chain[i]` and `chain[i + 1]` is strict.
    pub strict: Vec<bool>,
    /// Width `d₁ + 1` when the closure for `d₁` is strictly contained in it.
    pub strictly_nested_in: Option<usize>,
}

impl TypicalRankFact {
    pub fn chain_text(&self) -> String {
        let mut out = String::new();
        for (i, w) in self.chain.iter().enumerate() {
            out.push_str(&format!("cl(M_({},{},1),{})", self.d0, w, self.r));
            if i + 1 < self.chain.len() {
                out.push_str(if self.strict[i] { " ⊊ " } else { " ⊆ " });
            }
        }
        out.push_str(&format!(" = Sym_{}(R^{})", self.r, self.d0));
        out
    }
}

struct ChainSpec {
    d0: usize,
    r: u32,
    chain: &'static [usize],
    strict: &'static [bool],
}

const TYPICAL_RANK_CHAINS: [ChainSpec; 6] = [
    ChainSpec { d0: 2, r: 3, chain: &[2, 3], strict: &[true] },
    ChainSpec { d0: 2, r: 4, chain: &[3, 4], strict: &[true] },
    ChainSpec { d0: 2, r: 5, chain: &[3, 4, 5], strict: &[true, true] },
    ChainSpec { d0: 3, r: 4, chain: &[6, 7, 8], strict: &[true, false] },
    ChainSpec { d0: 3, r: 5, chain: &[7, 8, 9, 10, 11, 12, 13], strict: &[true, false, false, false, false, false] },
    ChainSpec { d0: 4, r: 3, chain: &[5, 6], strict: &[true] },
];

/// Filling facts for `(d₀, d₁, 1)` derived from typical symmetric ranks.
pub fn typical_rank_filling(d0: usize, d1: usize, r: u32) -> Option<TypicalRankFact> {
    let spec = TYPICAL_RANK_CHAINS.iter().find(|s| s.d0 == d0 && s.r == r)?;
    let strictly_nested_in =
        spec.chain.iter().position(|&w| w == d1).filter(|&i| i < spec.strict.len() && spec.strict[i]).map(|_| d1 + 1);
    Some(TypicalRankFact {
        d0,
        d1,
        r,
        filling: d1 >= spec.chain[0],
        min_filling_width: spec.chain[0],
        chain: spec.chain.to_vec(),
        strict: spec.strict.to_vec(),
        strictly_nested_in,
    })
}

fn typical_rank_fact(arch: &Architecture) -> Option<KnownFact> {
    let w = arch.widths();
    if arch.layers() != 2 || w[2] != 1 {
        return None;
    }
    let t = typical_rank_filling(w[0], w[1], arch.activation_degree())?;
    Some(KnownFact {
        arch: arch.clone(),
        dim: if t.filling { Some(arch.ambient_dim()) } else { None },
        edim: arch.expected_dim(),
        ambient: arch.ambient_dim(),
        filling: Some(t.filling),
        manifold_equals_variety: None,
        source: Source::TypicalRank,
        normalized: None,
        note: Some(t.chain_text()),
    })
}

/// Every stored fact about `arch`, most specific first.
pub fn lookup_all(arch: &Architecture) -> Vec<KnownFact> {
    [table1_fact(arch), width_one_fact(arch), typical_rank_fact(arch), ah_fact(arch)].into_iter().flatten().collect()
}

pub fn lookup(arch: &Architecture) -> Option<KnownFact> {
    lookup_all(arch).into_iter().next()
}

/// The 27 architectures of [`TABLE1`] in row order.
pub fn table1_architectures() -> Vec<Architecture> {
    TABLE1.iter().map(|row| Architecture::new(vec![row.0, row.1, row.2], 2).expect("valid")).collect()
}
