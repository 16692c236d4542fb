//! Binary words, the Θ order, Möbius-IFS intervals `I_σ = M_σ([0,1])`,
//! Stern–Brocot levels and streaming enumeration of partition levels.
//!
//! Level `n` of the partition consists of the `2^n` intervals `I_σ`,
//! `|σ| = n`, listed in Θ order, which is also the left-to-right order on
//! `[0, 1]`. Their endpoints are the Stern–Brocot sequence `B^n`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::exact::{farey_det, Fraction, UnimodularMap};
use crate::scalar::ExactInt;

/// Largest level `stern_brocot` materialises unless told otherwise.
pub const DEFAULT_LEVEL_BUDGET: usize = 26;

/// `QMARK_MAX_SB_LEVEL` if set and valid, else [`DEFAULT_LEVEL_BUDGET`].
pub fn level_budget_from_env() -> usize {
    std::env::var("QMARK_MAX_SB_LEVEL")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_LEVEL_BUDGET)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("index {index} is out of range for level {level}")]
    IndexOutOfRange { level: usize, index: String },
    #[error("level {level} exceeds the materialisation budget {budget}")]
    OverBudget { level: usize, budget: usize },
    #[error("invalid word {0:?}: only the letters 0 and 1 are allowed")]
    BadWord(String),
}

/// A finite word σ over `{0, 1}`.
#[derive(Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Word {
    bits: Vec<bool>,
}

impl Word {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// The word `b^n`.
    pub fn repeated(bit: bool, n: usize) -> Self {
        Self { bits: vec![bit; n] }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    /// Concatenation `ση`.
    pub fn concat(&self, other: &Word) -> Word {
        let mut bits = self.bits.clone();
        bits.extend_from_slice(&other.bits);
        Word { bits }
    }

    /// `self` followed by `count` copies of `bit`.
    pub fn extended(&self, bit: bool, count: usize) -> Word {
        let mut bits = Vec::with_capacity(self.bits.len() + count);
        bits.extend_from_slice(&self.bits);
        bits.resize(self.bits.len() + count, bit);
        Word { bits }
    }

    /// Letter-wise exchange of 0 and 1; reflects `I_σ` about `1/2`.
    pub fn mirrored(&self) -> Word {
        Word {
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn is_constant(&self, bit: bool) -> bool {
        self.bits.iter().all(|&b| b == bit)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits.is_empty() {
            f.write_str("∅")
        } else {
            write!(f, "\"{self}\"")
        }
    }
}

impl FromStr for Word {
    type Err = PartitionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "∅" {
            return Ok(Word::empty());
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(PartitionError::BadWord(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Word::from_bits)
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `Θ(σ) = Σ_j σ_j 2^{n−j}`.
pub fn theta(w: &Word) -> BigUint {
    let mut acc = BigUint::zero();
    for &b in &w.bits {
        acc <<= 1usize;
        if b {
            acc += 1u32;
        }
    }
    acc
}

/// Inverse of [`theta`] on `Σ^n`.
pub fn word_of_index(n: usize, j: &BigUint) -> Result<Word, PartitionError> {
    if j.bits() as usize > n {
        return Err(PartitionError::IndexOutOfRange {
            level: n,
            index: j.to_string(),
        });
    }
    let bits = (0..n).rev().map(|i| j.bit(i as u64)).collect();
    Ok(Word::from_bits(bits))
}

/// Lexicographic successor in `Σ^{|w|}`, `None` for `1^n`.
pub fn successor_word(w: &Word) -> Option<Word> {
    let pos = w.bits.iter().rposition(|&b| !b)?;
    let mut bits = w.bits.clone();
    bits[pos] = true;
    bits[pos + 1..].iter_mut().for_each(|b| *b = false);
    Some(Word { bits })
}

/// Lexicographic predecessor in `Σ^{|w|}`, `None` for `0^n`.
pub fn predecessor_word(w: &Word) -> Option<Word> {
    let pos = w.bits.iter().rposition(|&b| b)?;
    let mut bits = w.bits.clone();
    bits[pos] = false;
    bits[pos + 1..].iter_mut().for_each(|b| *b = true);
    Some(Word { bits })
}

/// `I_σ = [x_σ, x_σ̂]` together with `M_σ`.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "T: ExactInt")]
pub struct IfsInterval<T> {
    pub word: Word,
    pub left: Fraction<T>,
    pub right: Fraction<T>,
    pub map: UnimodularMap<T>,
}

impl<T: ExactInt> IfsInterval<T> {
    pub fn root() -> Self {
        Self::from_map(Word::empty(), UnimodularMap::identity())
    }

    fn from_map(word: Word, map: UnimodularMap<T>) -> Self {
        Self {
            word,
            left: map.at_zero(),
            right: map.at_one(),
            map,
        }
    }

    pub fn level(&self) -> usize {
        self.word.len()
    }

    /// Lebesgue length `1/(q q̂)`.
    pub fn length(&self) -> Fraction<T> {
        Fraction::new_unchecked(
            T::one(),
            self.left.denom().clone() * self.right.denom().clone(),
        )
    }

    pub fn theta(&self) -> BigUint {
        theta(&self.word)
    }
}

impl<T: ExactInt> fmt::Debug for IfsInterval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "I{:?}=[{}, {}]", self.word, self.left, self.right)
    }
}

/// `I_σ` from `M_σ = M_{σ_1} ∘ … ∘ M_{σ_n}`.
pub fn interval_of_word<T: ExactInt>(w: &Word) -> IfsInterval<T> {
    let map = w
        .bits
        .iter()
        .fold(UnimodularMap::identity(), |m: UnimodularMap<T>, &b| {
            m.then_generator(b)
        });
    IfsInterval::from_map(w.clone(), map)
}

/// `(I_{σ0}, I_{σ1})`, split at the mediant of the endpoints.
pub fn children<T: ExactInt>(iv: &IfsInterval<T>) -> (IfsInterval<T>, IfsInterval<T>) {
    let mut w0 = iv.word.clone();
    w0.push(false);
    let mut w1 = iv.word.clone();
    w1.push(true);
    (
        IfsInterval::from_map(w0, iv.map.then_generator(false)),
        IfsInterval::from_map(w1, iv.map.then_generator(true)),
    )
}

/// `B^n` as an increasing list of `2^n + 1` fractions.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "T: ExactInt")]
pub struct SternBrocotLevel<T> {
    pub n: usize,
    pub points: Vec<Fraction<T>>,
}

impl<T: ExactInt> fmt::Debug for SternBrocotLevel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B^{}{:?}", self.n, self.points)
    }
}

/// Mediant refinement of `{0, 1}`, materialised. `budget` caps `n`.
pub fn stern_brocot<T: ExactInt>(
    n: usize,
    budget: usize,
) -> Result<SternBrocotLevel<T>, PartitionError> {
    if n > budget {
        return Err(PartitionError::OverBudget { level: n, budget });
    }
    let mut points = vec![Fraction::zero(), Fraction::one()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(2 * points.len() - 1);
        for pair in points.windows(2) {
            next.push(pair[0].clone());
            next.push(pair[0].mediant(&pair[1]));
        }
        next.push(points.last().unwrap().clone());
        points = next;
    }
    Ok(SternBrocotLevel { n, points })
}

impl<T: ExactInt> SternBrocotLevel<T> {
    /// Strictly increasing from 0 to 1 with unit Farey determinant between
    /// neighbours.
    pub fn is_well_formed(&self) -> bool {
        self.points.len() == (1usize << self.n) + 1
            && self.points.first().is_some_and(Fraction::is_zero)
            && self.points.last().is_some_and(Fraction::is_one)
            && self
                .points
                .windows(2)
                .all(|p| p[0] < p[1] && farey_det(&p[0], &p[1]).is_one())
    }
}

/// A node of the partition tree seen during enumeration.
#[derive(Clone, Copy)]
pub struct Node<'a, T> {
    pub bits: &'a [bool],
    pub map: &'a UnimodularMap<T>,
}

impl<T: ExactInt> Node<'_, T> {
    pub fn depth(&self) -> usize {
        self.bits.len()
    }

    /// Denominator `q` of the left endpoint.
    pub fn q_left(&self) -> &T {
        &self.map.d
    }

    /// Denominator `q̂` of the right endpoint.
    pub fn q_right(&self) -> T {
        self.map.c.clone() + self.map.d.clone()
    }

    pub fn left(&self) -> Fraction<T> {
        self.map.at_zero()
    }

    pub fn right(&self) -> Fraction<T> {
        self.map.at_one()
    }

    pub fn word(&self) -> Word {
        Word::from_bits(self.bits.to_vec())
    }

    pub fn to_interval(&self) -> IfsInterval<T> {
        IfsInterval::from_map(self.word(), self.map.clone())
    }
}

/// Callbacks for [`enumerate_level`].
pub trait LevelVisitor<T> {
    /// Called on every node above the target level, the root included;
    /// `false` skips its whole subtree.
    fn descend(&mut self, _node: &Node<'_, T>) -> bool {
        true
    }

    /// Called on each node at the target level, in increasing order.
    fn visit(&mut self, node: &Node<'_, T>);
}

/// Depth-first walk over the level-`n` intervals with `O(n)` live nodes.
pub fn enumerate_level<T: ExactInt, V: LevelVisitor<T>>(n: usize, visitor: &mut V) {
    walk_subtree(&[], UnimodularMap::identity(), n, visitor);
}

fn walk_subtree<T: ExactInt, V: LevelVisitor<T>>(
    prefix: &[bool],
    map: UnimodularMap<T>,
    n: usize,
    visitor: &mut V,
) {
    let base = prefix.len();
    debug_assert!(base <= n);
    let mut path: Vec<bool> = prefix.to_vec();
    // (depth, last letter, map); the root of the subtree carries no letter.
    let mut stack: Vec<(usize, bool, UnimodularMap<T>)> = vec![(base, false, map)];
    while let Some((depth, bit, map)) = stack.pop() {
        if depth > base {
            path.truncate(depth - 1);
            path.push(bit);
        }
        let node = Node {
            bits: &path,
            map: &map,
        };
        if depth == n {
            visitor.visit(&node);
            continue;
        }
        if !visitor.descend(&node) {
            continue;
        }
        stack.push((depth + 1, true, map.then_generator(true)));
        stack.push((depth + 1, false, map.then_generator(false)));
    }
}

/// Frontier collection for the parallel walk: records nodes at depth `split`.
struct Frontier<'v, T, V> {
    split: usize,
    probe: &'v mut V,
    roots: Vec<(Vec<bool>, UnimodularMap<T>)>,
}

impl<T: ExactInt, V: LevelVisitor<T>> LevelVisitor<T> for Frontier<'_, T, V> {
    fn descend(&mut self, node: &Node<'_, T>) -> bool {
        self.probe.descend(node)
    }

    fn visit(&mut self, node: &Node<'_, T>) {
        debug_assert_eq!(node.depth(), self.split);
        self.roots.push((node.bits.to_vec(), node.map.clone()));
    }
}

/// Parallel form of [`enumerate_level`]: independent subtrees rooted at
/// depth `split` are walked by fresh visitors from `make`. The returned
/// visitors are in Θ order of their subtrees, so folding them left to right
/// restores the sequential order.
pub fn par_enumerate_level<T, V, M>(n: usize, split: usize, make: M) -> Vec<V>
where
    T: ExactInt,
    V: LevelVisitor<T> + Send,
    M: Fn() -> V + Sync,
{
    let split = split.min(n);
    let mut probe = make();
    if split == n {
        enumerate_level(n, &mut probe);
        return vec![probe];
    }
    let mut frontier = Frontier {
        split,
        probe: &mut probe,
        roots: Vec::new(),
    };
    enumerate_level(split, &mut frontier);
    let roots = frontier.roots;
    roots
        .into_par_iter()
        .map(|(prefix, map)| {
            let mut v = make();
            walk_subtree(&prefix, map, n, &mut v);
            v
        })
        .collect()
}

/// Collects every level-`n` interval; for tests and small levels.
pub fn level_intervals<T: ExactInt>(n: usize) -> Vec<IfsInterval<T>> {
    struct Collect<T>(Vec<IfsInterval<T>>);
    impl<T: ExactInt> LevelVisitor<T> for Collect<T> {
        fn visit(&mut self, node: &Node<'_, T>) {
            self.0.push(node.to_interval());
        }
    }
    let mut c = Collect(Vec::with_capacity(1 << n.min(20)));
    enumerate_level(n, &mut c);
    c.0
}
