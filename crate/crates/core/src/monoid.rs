//! Merge operators, randomized law checks, and fold trees.
//!
//! A [`MonoidSpec`] bundles a carrier sampler, a binary operation and its
//! identity. [`check_laws`] tests associativity, commutativity and the unit
//! law on sampled values and shrinks any counterexample; the result is
//! empirical evidence, not a proof. [`fuzz_schedule_independence`] and
//! [`exhaustive_schedule_independence`] evaluate many fold trees over the
//! same leaves and report the first pair of trees that disagree.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Version of the law-report document layout.
pub const LAW_REPORT_SCHEMA_VERSION: u32 = 1;

pub type Op<T> = fn(&T, &T) -> T;
pub type Sampler<T> = fn(&mut Rng) -> T;
pub type Shrinker<T> = fn(&T) -> Vec<T>;

#[derive(Clone)]
pub struct MonoidSpec<T> {
    pub name: &'static str,
    pub carrier: &'static str,
    pub op: Op<T>,
    pub identity: T,
    pub sample: Sampler<T>,
    /// Candidate simplifications of a value, simplest first.
    pub shrink: Option<Shrinker<T>>,
}

impl<T: Debug> Debug for MonoidSpec<T> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("MonoidSpec")
            .field("name", &self.name)
            .field("carrier", &self.carrier)
            .field("identity", &self.identity)
            .finish()
    }
}

impl<T: Clone> MonoidSpec<T> {
    pub fn combine(&self, a: &T, b: &T) -> T {
        (self.op)(a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Law {
    Associativity,
    Commutativity,
    Identity,
}

/// A concrete violation of one law.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness<T> {
    /// `(a⊕b)⊕c ≠ a⊕(b⊕c)`.
    Associativity { a: T, b: T, c: T, left: T, right: T },
    /// `a⊕b ≠ b⊕a`.
    Commutativity { a: T, b: T, ab: T, ba: T },
    /// `a⊕0 ≠ a` or `0⊕a ≠ a`.
    Identity { a: T, right: T, left: T },
}

impl<T: Debug> Witness<T> {
    pub fn law(&self) -> Law {
        match self {
            Witness::Associativity { .. } => Law::Associativity,
            Witness::Commutativity { .. } => Law::Commutativity,
            Witness::Identity { .. } => Law::Identity,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Witness::Associativity { a, b, c, left, right } => format!(
                "({a:?} ⊕ {b:?}) ⊕ {c:?} = {left:?} but {a:?} ⊕ ({b:?} ⊕ {c:?}) = {right:?}"
            ),
            Witness::Commutativity { a, b, ab, ba } => {
                format!("{a:?} ⊕ {b:?} = {ab:?} but {b:?} ⊕ {a:?} = {ba:?}")
            }
            Witness::Identity { a, right, left } => {
                format!("{a:?} ⊕ 0 = {right:?} and 0 ⊕ {a:?} = {left:?}, expected {a:?}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LawOutcome<T> {
    Passed { samples: u64 },
    Failed(Witness<T>),
}

impl<T> LawOutcome<T> {
    pub fn passed(&self) -> bool {
        matches!(self, LawOutcome::Passed { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawCheck<T> {
    pub associativity: LawOutcome<T>,
    pub commutativity: LawOutcome<T>,
    pub identity: LawOutcome<T>,
    pub samples: u64,
    pub seed: u64,
}

impl<T: Clone + Debug> LawCheck<T> {
    pub fn passed(&self) -> bool {
        self.associativity.passed() && self.commutativity.passed() && self.identity.passed()
    }

    /// The first failing law in associativity, commutativity, identity order.
    pub fn first_witness(&self) -> Option<&Witness<T>> {
        [&self.associativity, &self.commutativity, &self.identity]
            .into_iter()
            .find_map(|o| match o {
                LawOutcome::Failed(w) => Some(w),
                LawOutcome::Passed { .. } => None,
            })
    }
}

pub fn associativity_at<T: Clone + PartialEq>(m: &MonoidSpec<T>, a: &T, b: &T, c: &T) -> Option<Witness<T>> {
    let left = m.combine(&m.combine(a, b), c);
    let right = m.combine(a, &m.combine(b, c));
    (left != right).then(|| Witness::Associativity {
        a: a.clone(),
        b: b.clone(),
        c: c.clone(),
        left,
        right,
    })
}

pub fn commutativity_at<T: Clone + PartialEq>(m: &MonoidSpec<T>, a: &T, b: &T) -> Option<Witness<T>> {
    let ab = m.combine(a, b);
    let ba = m.combine(b, a);
    (ab != ba).then(|| Witness::Commutativity {
        a: a.clone(),
        b: b.clone(),
        ab,
        ba,
    })
}

pub fn identity_at<T: Clone + PartialEq>(m: &MonoidSpec<T>, a: &T) -> Option<Witness<T>> {
    let right = m.combine(a, &m.identity);
    let left = m.combine(&m.identity, a);
    (right != *a || left != *a).then(|| Witness::Identity {
        a: a.clone(),
        right,
        left,
    })
}

/// Greedy shrinking: replace one coordinate at a time by its first simpler
/// candidate that still fails, until no replacement applies.
fn shrink_args<T: Clone>(
    args: &mut [T],
    shrink: Shrinker<T>,
    fails: impl Fn(&[T]) -> bool,
) {
    let mut budget = 10_000;
    'outer: while budget > 0 {
        for i in 0..args.len() {
            for cand in shrink(&args[i]) {
                budget -= 1;
                let mut trial = args.to_vec();
                trial[i] = cand;
                if fails(&trial) {
                    args.clone_from_slice(&trial);
                    continue 'outer;
                }
                if budget == 0 {
                    break 'outer;
                }
            }
        }
        break;
    }
}

/// Randomized check of the three abelian-monoid laws on `n_samples` draws.
pub fn check_laws<T: Clone + PartialEq + Debug>(m: &MonoidSpec<T>, n_samples: u64, seed: u64) -> LawCheck<T> {
    let mut rng = rng::seeded(seed);
    let mut assoc: Option<Vec<T>> = None;
    let mut comm: Option<Vec<T>> = None;
    let mut ident: Option<Vec<T>> = None;
    for _ in 0..n_samples {
        let a = (m.sample)(&mut rng);
        let b = (m.sample)(&mut rng);
        let c = (m.sample)(&mut rng);
        if assoc.is_none() && associativity_at(m, &a, &b, &c).is_some() {
            assoc = Some(vec![a.clone(), b.clone(), c.clone()]);
        }
        if comm.is_none() && commutativity_at(m, &a, &b).is_some() {
            comm = Some(vec![a.clone(), b.clone()]);
        }
        if ident.is_none() && identity_at(m, &a).is_some() {
            ident = Some(vec![a.clone()]);
        }
        if assoc.is_some() && comm.is_some() && ident.is_some() {
            break;
        }
    }
    let finish = |found: Option<Vec<T>>, law: Law| -> LawOutcome<T> {
        let Some(mut args) = found else {
            return LawOutcome::Passed { samples: n_samples };
        };
        let witness = |v: &[T]| match law {
            Law::Associativity => associativity_at(m, &v[0], &v[1], &v[2]),
            Law::Commutativity => commutativity_at(m, &v[0], &v[1]),
            Law::Identity => identity_at(m, &v[0]),
        };
        if let Some(shrink) = m.shrink {
            shrink_args(&mut args, shrink, |v| witness(v).is_some());
        }
        LawOutcome::Failed(witness(&args).expect("shrinking keeps the failure"))
    };
    LawCheck {
        associativity: finish(assoc, Law::Associativity),
        commutativity: finish(comm, Law::Commutativity),
        identity: finish(ident, Law::Identity),
        samples: n_samples,
        seed,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shape {
    Leaf(usize),
    Node(Box<Shape>, Box<Shape>),
}

impl Shape {
    fn depth(&self) -> usize {
        match self {
            Shape::Leaf(_) => 0,
            Shape::Node(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    fn leaves(&self, out: &mut Vec<usize>) {
        match self {
            Shape::Leaf(i) => out.push(*i),
            Shape::Node(l, r) => {
                l.leaves(out);
                r.leaves(out);
            }
        }
    }

    fn internal_nodes(&self) -> usize {
        match self {
            Shape::Leaf(_) => 0,
            Shape::Node(l, r) => 1 + l.internal_nodes() + r.internal_nodes(),
        }
    }
}

/// A full binary tree whose leaves are a permutation of `leaves`.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldTree<T> {
    leaves: Vec<T>,
    shape: Option<Shape>,
}

impl<T: Clone> FoldTree<T> {
    /// Checks that `shape` uses every leaf index exactly once.
    pub fn new(leaves: Vec<T>, shape: Option<Shape>) -> Result<Self> {
        let mut used = Vec::new();
        if let Some(s) = &shape {
            s.leaves(&mut used);
        }
        used.sort_unstable();
        if used != (0..leaves.len()).collect::<Vec<_>>() {
            return Err(Error::invalid("tree", "shape must use each leaf exactly once"));
        }
        Ok(FoldTree { leaves, shape })
    }

    pub fn leaves(&self) -> &[T] {
        &self.leaves
    }

    pub fn shape(&self) -> Option<&Shape> {
        self.shape.as_ref()
    }

    /// Edges from the root to the deepest leaf; 0 for one leaf or none.
    pub fn depth(&self) -> usize {
        self.shape.as_ref().map_or(0, Shape::depth)
    }

    pub fn internal_nodes(&self) -> usize {
        self.shape.as_ref().map_or(0, Shape::internal_nodes)
    }

    /// Leaf indices in left-to-right order.
    pub fn leaf_order(&self) -> Vec<usize> {
        let mut out = Vec::new();
        if let Some(s) = &self.shape {
            s.leaves(&mut out);
        }
        out
    }

    /// Depth-`⌈log₂ n⌉` tree over the leaves in their given order.
    pub fn balanced(leaves: Vec<T>) -> Self {
        let n = leaves.len();
        let idx: Vec<usize> = (0..n).collect();
        FoldTree {
            shape: (n > 0).then(|| balanced_shape(&idx)),
            leaves,
        }
    }

    /// Random permutation of the leaves with uniformly random split points.
    pub fn random(leaves: Vec<T>, rng: &mut Rng) -> Self {
        let mut idx: Vec<usize> = (0..leaves.len()).collect();
        idx.shuffle(rng);
        FoldTree {
            shape: (!idx.is_empty()).then(|| random_shape(&idx, rng)),
            leaves,
        }
    }
}

fn balanced_shape(idx: &[usize]) -> Shape {
    if idx.len() == 1 {
        return Shape::Leaf(idx[0]);
    }
    let mid = idx.len().div_ceil(2);
    Shape::Node(Box::new(balanced_shape(&idx[..mid])), Box::new(balanced_shape(&idx[mid..])))
}

fn random_shape(idx: &[usize], rng: &mut Rng) -> Shape {
    if idx.len() == 1 {
        return Shape::Leaf(idx[0]);
    }
    let split = rng.gen_range(1..idx.len());
    Shape::Node(
        Box::new(random_shape(&idx[..split], rng)),
        Box::new(random_shape(&idx[split..], rng)),
    )
}

/// Every full binary tree shape over the leaf sequence `idx`.
fn all_shapes(idx: &[usize]) -> Vec<Shape> {
    if idx.len() == 1 {
        return vec![Shape::Leaf(idx[0])];
    }
    let mut out = Vec::new();
    for split in 1..idx.len() {
        let left = all_shapes(&idx[..split]);
        let right = all_shapes(&idx[split..]);
        for l in &left {
            for r in &right {
                out.push(Shape::Node(Box::new(l.clone()), Box::new(r.clone())));
            }
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Largest leaf count accepted by [`all_fold_trees`].
pub const EXHAUSTIVE_MAX_LEAVES: usize = 6;

/// All full binary trees over all permutations of `leaves`:
/// `n!·C(n−1)` trees, where `C` is the Catalan number.
pub fn all_fold_trees<T: Clone>(leaves: &[T]) -> Result<Vec<FoldTree<T>>> {
    let n = leaves.len();
    if n > EXHAUSTIVE_MAX_LEAVES {
        return Err(Error::Budget {
            what: "exhaustive fold leaves",
            size: n,
            limit: EXHAUSTIVE_MAX_LEAVES,
        });
    }
    if n == 0 {
        return Ok(vec![FoldTree {
            leaves: Vec::new(),
            shape: None,
        }]);
    }
    let mut out = Vec::new();
    for perm in permutations(n) {
        for shape in all_shapes(&perm) {
            out.push(FoldTree {
                leaves: leaves.to_vec(),
                shape: Some(shape),
            });
        }
    }
    Ok(out)
}

/// Bottom-up evaluation; an empty tree folds to the identity.
pub fn fold<T: Clone>(m: &MonoidSpec<T>, tree: &FoldTree<T>) -> T {
    fn go<T: Clone>(m: &MonoidSpec<T>, leaves: &[T], s: &Shape) -> T {
        match s {
            Shape::Leaf(i) => leaves[*i].clone(),
            Shape::Node(l, r) => m.combine(&go(m, leaves, l), &go(m, leaves, r)),
        }
    }
    match &tree.shape {
        None => m.identity.clone(),
        Some(s) => go(m, &tree.leaves, s),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleOutcome<T> {
    Pass { trees: u64, value: T },
    Fail {
        first: FoldTree<T>,
        second: FoldTree<T>,
        first_value: T,
        second_value: T,
    },
}

impl<T> ScheduleOutcome<T> {
    pub fn passed(&self) -> bool {
        matches!(self, ScheduleOutcome::Pass { .. })
    }
}

fn compare_all<T: Clone + PartialEq, I: IntoIterator<Item = FoldTree<T>>>(
    m: &MonoidSpec<T>,
    trees: I,
) -> ScheduleOutcome<T> {
    let mut reference: Option<(FoldTree<T>, T)> = None;
    let mut count = 0;
    for tree in trees {
        count += 1;
        let value = fold(m, &tree);
        match &reference {
            None => reference = Some((tree, value)),
            Some((first, first_value)) => {
                if value != *first_value {
                    return ScheduleOutcome::Fail {
                        first: first.clone(),
                        second: tree,
                        first_value: first_value.clone(),
                        second_value: value,
                    };
                }
            }
        }
    }
    let value = reference.map_or_else(|| m.identity.clone(), |(_, v)| v);
    ScheduleOutcome::Pass { trees: count, value }
}

/// Folds `n_trees` random trees over random permutations of `leaves`.
pub fn fuzz_schedule_independence<T: Clone + PartialEq>(
    m: &MonoidSpec<T>,
    leaves: &[T],
    n_trees: u64,
    seed: u64,
) -> ScheduleOutcome<T> {
    let mut rng = rng::seeded(seed);
    let trees = (0..n_trees).map(move |_| FoldTree::random(leaves.to_vec(), &mut rng));
    compare_all(m, trees)
}

/// Folds every tree over every permutation of `leaves`.
pub fn exhaustive_schedule_independence<T: Clone + PartialEq>(
    m: &MonoidSpec<T>,
    leaves: &[T],
) -> Result<ScheduleOutcome<T>> {
    Ok(compare_all(m, all_fold_trees(leaves)?))
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LawStatus {
    Unchecked,
    Passed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LawEntry {
    pub law: Law,
    pub status: LawStatus,
    pub samples: u64,
    pub witness: Option<String>,
}

/// Machine-readable summary of a law check.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LawReport {
    pub schema_version: u32,
    pub monoid: String,
    pub carrier: String,
    pub status: LawStatus,
    pub seed: Option<u64>,
    pub laws: Vec<LawEntry>,
    pub evidence: String,
}

pub const EVIDENCE_LABEL: &str = "empirical evidence, not a proof term";

/// Report for `m`; `check` is `None` when the laws were never checked.
pub fn emit_law_report<T: Clone + Debug>(m: &MonoidSpec<T>, check: Option<&LawCheck<T>>) -> LawReport {
    let entry = |law: Law, outcome: Option<&LawOutcome<T>>| match outcome {
        None => LawEntry {
            law,
            status: LawStatus::Unchecked,
            samples: 0,
            witness: None,
        },
        Some(LawOutcome::Passed { samples }) => LawEntry {
            law,
            status: LawStatus::Passed,
            samples: *samples,
            witness: None,
        },
        Some(LawOutcome::Failed(w)) => LawEntry {
            law,
            status: LawStatus::Failed,
            samples: check.map_or(0, |c| c.samples),
            witness: Some(w.describe()),
        },
    };
    let laws = vec![
        entry(Law::Associativity, check.map(|c| &c.associativity)),
        entry(Law::Commutativity, check.map(|c| &c.commutativity)),
        entry(Law::Identity, check.map(|c| &c.identity)),
    ];
    let status = match check {
        None => LawStatus::Unchecked,
        Some(c) if c.passed() => LawStatus::Passed,
        Some(_) => LawStatus::Failed,
    };
    LawReport {
        schema_version: LAW_REPORT_SCHEMA_VERSION,
        monoid: m.name.into(),
        carrier: m.carrier.into(),
        status,
        seed: check.map(|c| c.seed),
        laws,
        evidence: EVIDENCE_LABEL.into(),
    }
}

/// Ready-made merge operators, including two that violate the laws.
pub mod catalog {
    use super::*;

    fn small_or_wide(rng: &mut Rng) -> i64 {
        if rng.gen_bool(0.5) {
            rng.gen_range(-100..=100)
        } else {
            rng.gen()
        }
    }

    fn shrink_i64(v: &i64) -> Vec<i64> {
        let v = *v;
        let mut out = Vec::new();
        if v != 0 {
            out.push(0);
            if v / 2 != 0 {
                out.push(v / 2);
            }
            let step = v - v.signum();
            if step != 0 && step != v / 2 {
                out.push(step);
            }
        }
        out
    }

    fn shrink_u64(v: &u64) -> Vec<u64> {
        let v = *v;
        let mut out = Vec::new();
        if v != 0 {
            out.push(0);
            if v / 2 != 0 {
                out.push(v / 2);
            }
            if v - 1 != 0 && v - 1 != v / 2 {
                out.push(v - 1);
            }
        }
        out
    }

    fn any_u64(rng: &mut Rng) -> u64 {
        if rng.gen_bool(0.5) {
            rng.gen_range(0..=64)
        } else {
            rng.gen()
        }
    }

    pub fn sum_i64() -> MonoidSpec<i64> {
        MonoidSpec {
            name: "wrapping_sum",
            carrier: "i64",
            op: |a, b| a.wrapping_add(*b),
            identity: 0,
            sample: small_or_wide,
            shrink: Some(shrink_i64),
        }
    }

    pub fn product_u64() -> MonoidSpec<u64> {
        MonoidSpec {
            name: "wrapping_product",
            carrier: "u64",
            op: |a, b| a.wrapping_mul(*b),
            identity: 1,
            sample: any_u64,
            shrink: Some(shrink_u64),
        }
    }

    pub fn max_i64() -> MonoidSpec<i64> {
        MonoidSpec {
            name: "max",
            carrier: "i64",
            op: |a, b| *a.max(b),
            identity: i64::MIN,
            sample: small_or_wide,
            shrink: Some(shrink_i64),
        }
    }

    pub fn min_u64() -> MonoidSpec<u64> {
        MonoidSpec {
            name: "min",
            carrier: "u64",
            op: |a, b| *a.min(b),
            identity: u64::MAX,
            sample: any_u64,
            shrink: Some(shrink_u64),
        }
    }

    pub fn xor_u64() -> MonoidSpec<u64> {
        MonoidSpec {
            name: "xor",
            carrier: "u64",
            op: |a, b| a ^ b,
            identity: 0,
            sample: any_u64,
            shrink: Some(shrink_u64),
        }
    }

    pub fn or_u64() -> MonoidSpec<u64> {
        MonoidSpec {
            name: "bit_or",
            carrier: "u64",
            op: |a, b| a | b,
            identity: 0,
            sample: any_u64,
            shrink: Some(shrink_u64),
        }
    }

    pub fn and_u64() -> MonoidSpec<u64> {
        MonoidSpec {
            name: "bit_and",
            carrier: "u64",
            op: |a, b| a & b,
            identity: u64::MAX,
            sample: any_u64,
            shrink: Some(shrink_u64),
        }
    }

    fn gcd(mut a: u64, mut b: u64) -> u64 {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    }

    pub fn gcd_u64() -> MonoidSpec<u64> {
        MonoidSpec {
            name: "gcd",
            carrier: "u64",
            op: |a, b| gcd(*a, *b),
            identity: 0,
            sample: |rng| rng.gen_range(0..=12u64) * rng.gen_range(1..=30u64),
            shrink: Some(shrink_u64),
        }
    }

    const MODULUS: u64 = 1_000_000_007;

    pub fn sum_mod_prime() -> MonoidSpec<u64> {
        MonoidSpec {
            name: "sum_mod_1000000007",
            carrier: "u64 mod 1000000007",
            op: |a, b| (a + b) % MODULUS,
            identity: 0,
            sample: |rng| rng.gen_range(0..MODULUS),
            shrink: None,
        }
    }

    /// `(sum, count)` pairs, the state of a running mean.
    pub fn sum_count() -> MonoidSpec<(i64, u64)> {
        MonoidSpec {
            name: "sum_count",
            carrier: "(i64, u64)",
            op: |a, b| (a.0.wrapping_add(b.0), a.1.wrapping_add(b.1)),
            identity: (0, 0),
            sample: |rng| (small_or_wide(rng), rng.gen_range(0..1000)),
            shrink: None,
        }
    }

    /// Multiset union on sorted byte vectors.
    pub fn multiset_union() -> MonoidSpec<Vec<u8>> {
        MonoidSpec {
            name: "multiset_union",
            carrier: "sorted Vec<u8>",
            op: |a, b| {
                let mut out = Vec::with_capacity(a.len() + b.len());
                let (mut i, mut j) = (0, 0);
                while i < a.len() && j < b.len() {
                    if a[i] <= b[j] {
                        out.push(a[i]);
                        i += 1;
                    } else {
                        out.push(b[j]);
                        j += 1;
                    }
                }
                out.extend_from_slice(&a[i..]);
                out.extend_from_slice(&b[j..]);
                out
            },
            identity: Vec::new(),
            sample: |rng| {
                let len = rng.gen_range(0..4);
                let mut v: Vec<u8> = (0..len).map(|_| rng.gen_range(0..8)).collect();
                v.sort_unstable();
                v
            },
            shrink: None,
        }
    }

    /// Integer subtraction: not associative, not commutative, no two-sided unit.
    pub fn difference_i64() -> MonoidSpec<i64> {
        MonoidSpec {
            name: "difference",
            carrier: "i64",
            op: |a, b| a.wrapping_sub(*b),
            identity: 0,
            sample: |rng| rng.gen_range(-1000..=1000),
            shrink: Some(shrink_i64),
        }
    }

    /// IEEE-754 addition, associative only up to rounding.
    pub fn float_sum() -> MonoidSpec<f64> {
        MonoidSpec {
            name: "float_sum",
            carrier: "f64",
            op: |a, b| a + b,
            identity: 0.0,
            sample: |rng| {
                let mantissa: f64 = rng.gen_range(-1.0..1.0);
                let exp: i32 = rng.gen_range(-8..=8);
                mantissa * libm::pow(10.0, exp as f64)
            },
            shrink: None,
        }
    }
}

/// Runs the law check and turns a failure into an error carrying the witness.
pub fn require_laws<T: Clone + PartialEq + Debug>(m: &MonoidSpec<T>, n_samples: u64, seed: u64) -> Result<LawCheck<T>> {
    let check = check_laws(m, n_samples, seed);
    match check.first_witness() {
        None => Ok(check),
        Some(w) => Err(Error::LawViolation(format!("{}: {}", m.name, w.describe()))),
    }
}

#[cfg(test)]
mod tests {
    use super::catalog::*;
    use super::*;

    #[test]
    fn sum_passes_laws() {
        let c = check_laws(&sum_i64(), 2000, 1);
        assert!(c.passed());
        assert_eq!(c.associativity, LawOutcome::Passed { samples: 2000 });
    }

    #[test]
    fn subtraction_fails_with_shrunk_associativity_witness() {
        let m = difference_i64();
        assert!(associativity_at(&m, &1, &2, &3).is_some());
        let c = check_laws(&m, 100, 7);
        assert!(!c.passed());
        match c.first_witness().unwrap() {
            Witness::Associativity { a, b, c, left, right } => {
                assert_eq!((*a, *b), (0, 0));
                assert_eq!(c.abs(), 1);
                assert_ne!(left, right);
            }
            w => panic!("expected associativity witness, got {w:?}"),
        }
        assert!(!c.commutativity.passed());
        assert!(!c.identity.passed());
    }

    #[test]
    fn float_addition_has_rounding_witness() {
        let c = check_laws(&float_sum(), 10_000, 3);
        match c.associativity {
            LawOutcome::Failed(Witness::Associativity { left, right, .. }) => assert_ne!(left, right),
            other => panic!("expected a rounding witness, got {other:?}"),
        }
    }

    #[test]
    fn fold_examples() {
        let m = sum_i64();
        let leaves: Vec<i64> = (1..=8).collect();
        let mut rng = rng::seeded(11);
        for _ in 0..3 {
            assert_eq!(fold(&m, &FoldTree::random(leaves.clone(), &mut rng)), 36);
        }
        assert_eq!(fold(&m, &FoldTree::balanced(Vec::new())), 0);
        let mx = max_i64();
        assert_eq!(fold(&mx, &FoldTree::random(vec![5, 5, 5], &mut rng)), 5);
    }

    #[test]
    fn balanced_depth_is_ceil_log2() {
        for n in 1..=40usize {
            let t = FoldTree::balanced((0..n as i64).collect());
            let expected = if n == 1 { 0 } else { (usize::BITS - (n - 1).leading_zeros()) as usize };
            assert_eq!(t.depth(), expected, "n = {n}");
            assert_eq!(t.internal_nodes(), n - 1);
        }
    }

    #[test]
    fn tree_counts_are_factorial_times_catalan() {
        let catalan = [1, 1, 2, 5, 14];
        let fact = [1, 1, 2, 6, 24, 120];
        for n in 1..=5 {
            let leaves: Vec<i64> = (0..n as i64).collect();
            let trees = all_fold_trees(&leaves).unwrap();
            assert_eq!(trees.len(), fact[n] * catalan[n - 1]);
        }
        assert!(all_fold_trees(&[0i64; 7]).is_err());
    }

    #[test]
    fn schedule_independence() {
        let m = sum_i64();
        let mut rng = rng::seeded(5);
        let leaves: Vec<i64> = (0..16).map(|_| rng.gen_range(-1000..1000)).collect();
        assert!(fuzz_schedule_independence(&m, &leaves, 1000, 2).passed());
        assert!(exhaustive_schedule_independence(&m, &leaves[..5]).unwrap().passed());
        assert!(fuzz_schedule_independence(&m, &[42], 10, 2).passed());
        let sub = difference_i64();
        assert!(!exhaustive_schedule_independence(&sub, &[1, 2, 3]).unwrap().passed());
    }

    #[test]
    fn two_trees_expose_subtraction() {
        let sub = difference_i64();
        let left = FoldTree::new(
            vec![1, 2, 3],
            Some(Shape::Node(
                Box::new(Shape::Node(Box::new(Shape::Leaf(0)), Box::new(Shape::Leaf(1)))),
                Box::new(Shape::Leaf(2)),
            )),
        )
        .unwrap();
        let right = FoldTree::new(
            vec![1, 2, 3],
            Some(Shape::Node(
                Box::new(Shape::Leaf(0)),
                Box::new(Shape::Node(Box::new(Shape::Leaf(1)), Box::new(Shape::Leaf(2)))),
            )),
        )
        .unwrap();
        assert_eq!(fold(&sub, &left), -4);
        assert_eq!(fold(&sub, &right), 2);
        assert!(!compare_all(&sub, [left, right]).passed());
    }

    #[test]
    fn reports() {
        let m = sum_i64();
        let unchecked = emit_law_report(&m, None);
        assert_eq!(unchecked.status, LawStatus::Unchecked);
        assert!(unchecked.laws.iter().all(|l| l.status == LawStatus::Unchecked));
        let c = check_laws(&m, 64, 1);
        let r = emit_law_report(&m, Some(&c));
        assert_eq!(r.status, LawStatus::Passed);
        assert_eq!(r.laws.len(), 3);
        assert!(r.laws.iter().all(|l| l.status == LawStatus::Passed && l.samples == 64));
        assert_eq!(r.evidence, EVIDENCE_LABEL);
        let sub = difference_i64();
        let c = check_laws(&sub, 64, 1);
        let r = emit_law_report(&sub, Some(&c));
        assert_eq!(r.status, LawStatus::Failed);
        assert!(r.laws[0].witness.is_some());
        assert!(require_laws(&sub, 64, 1).is_err());
    }

    #[test]
    fn invalid_shape_rejected() {
        assert!(FoldTree::new(vec![1i64, 2], Some(Shape::Leaf(0))).is_err());
    }
}
