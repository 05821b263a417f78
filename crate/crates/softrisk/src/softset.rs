//! Soft sets over a patient universe: alpha-cuts of fuzzy columns, the
//! AND/OR product operations, and trivial parameter reduction.
//!
//! A soft set maps each alpha level to the crisp subset of patients whose
//! membership clears that level. Levels are kept strictly increasing and the
//! level sets are nested by construction.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzify::FuzzyTable;

/// Cells of a product soft set are materialized eagerly up to this count and
/// computed on demand above it. Both paths produce identical sets.
const EAGER_CELL_LIMIT: usize = 1_000_000;

/// An alpha level: finite, in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value <= 0.0 || value > 1.0 {
            return Err(Error::InvalidInput(format!(
                "alpha level {value} is outside (0, 1]"
            )));
        }
        Ok(Alpha(value))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

// The constructor rejects NaN, so equality and ordering are total.
impl Eq for Alpha {}

impl PartialOrd for Alpha {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Alpha {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Alpha::new(value)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Validates that a grid is strictly increasing.
pub fn check_grid(variable: &str, term: &str, grid: &[Alpha]) -> Result<()> {
    for pair in grid.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidGrid {
                variable: variable.to_string(),
                term: term.to_string(),
                reason: format!(
                    "levels {} and {} are not strictly increasing",
                    pair[0], pair[1]
                ),
            });
        }
    }
    Ok(())
}

/// The ordered set of patient ids under analysis. Order is fixed at
/// construction and drives every downstream ordering.
#[derive(Debug, Clone)]
pub struct Universe {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl Universe {
    pub fn new(ids: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId { id: id.clone() });
            }
        }
        Ok(Universe { ids, index })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }
}

impl PartialEq for Universe {
    fn eq(&self, other: &Self) -> bool {
        self.ids == other.ids
    }
}

impl Eq for Universe {}

/// A subset of the universe, stored as a fixed-width bitset indexed by
/// universe position.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MemberSet {
    nbits: usize,
    blocks: Vec<u64>,
}

impl MemberSet {
    pub fn empty(nbits: usize) -> Self {
        MemberSet {
            nbits,
            blocks: vec![0; nbits.div_ceil(64)],
        }
    }

    pub fn full(nbits: usize) -> Self {
        let mut set = MemberSet {
            nbits,
            blocks: vec![u64::MAX; nbits.div_ceil(64)],
        };
        set.mask_tail();
        set
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(nbits: usize, indices: I) -> Self {
        let mut set = MemberSet::empty(nbits);
        for i in indices {
            set.insert(i);
        }
        set
    }

    // Keeps bits past `nbits` zero so Eq/Hash see a canonical form.
    fn mask_tail(&mut self) {
        let rem = self.nbits % 64;
        if rem != 0 {
            if let Some(last) = self.blocks.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn insert(&mut self, index: usize) {
        assert!(
            index < self.nbits,
            "index {index} out of range {}",
            self.nbits
        );
        self.blocks[index / 64] |= 1u64 << (index % 64);
    }

    pub fn contains(&self, index: usize) -> bool {
        index < self.nbits && self.blocks[index / 64] & (1u64 << (index % 64)) != 0
    }

    pub fn count(&self) -> usize {
        self.blocks.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.iter().all(|&b| b == 0)
    }

    pub fn is_full(&self) -> bool {
        self.count() == self.nbits
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn intersection(&self, other: &MemberSet) -> MemberSet {
        assert_eq!(self.nbits, other.nbits, "member sets of different width");
        MemberSet {
            nbits: self.nbits,
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    pub fn union(&self, other: &MemberSet) -> MemberSet {
        assert_eq!(self.nbits, other.nbits, "member sets of different width");
        MemberSet {
            nbits: self.nbits,
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a | b)
                .collect(),
        }
    }

    pub fn intersect_with(&mut self, other: &MemberSet) {
        assert_eq!(self.nbits, other.nbits, "member sets of different width");
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            *a &= b;
        }
    }

    pub fn is_subset_of(&self, other: &MemberSet) -> bool {
        assert_eq!(self.nbits, other.nbits, "member sets of different width");
        self.blocks
            .iter()
            .zip(&other.blocks)
            .all(|(a, b)| a & !b == 0)
    }

    /// Member indices in universe order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nbits).filter(move |&i| self.contains(i))
    }

    /// Member ids in universe order.
    pub fn ids<'a>(&'a self, universe: &'a Universe) -> impl Iterator<Item = &'a str> + 'a {
        self.iter().map(move |i| universe.id(i))
    }
}

impl fmt::Debug for MemberSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Tag naming the fuzzy column a soft set was cut from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceTag {
    pub variable: String,
    pub term: String,
}

impl fmt::Display for SourceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.variable, self.term)
    }
}

/// An ordered mapping from alpha levels to nested subsets of the universe.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftSet {
    universe: Arc<Universe>,
    source: SourceTag,
    levels: Vec<(Alpha, MemberSet)>,
}

impl SoftSet {
    /// Builds a soft set, validating level ordering, set widths, and the
    /// nesting invariant (higher levels are subsets of lower ones).
    pub fn new(
        universe: Arc<Universe>,
        source: SourceTag,
        levels: Vec<(Alpha, MemberSet)>,
    ) -> Result<Self> {
        for pair in levels.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::InvalidGrid {
                    variable: source.variable.clone(),
                    term: source.term.clone(),
                    reason: format!(
                        "levels {} and {} are not strictly increasing",
                        pair[0].0, pair[1].0
                    ),
                });
            }
            if !pair[1].1.is_subset_of(&pair[0].1) {
                return Err(Error::InvalidInput(format!(
                    "soft set {} violates nesting between levels {} and {}",
                    source, pair[0].0, pair[1].0
                )));
            }
        }
        for (_, set) in &levels {
            if set.nbits() != universe.len() {
                return Err(Error::InvalidInput(format!(
                    "soft set {source} has a level set sized for a different universe"
                )));
            }
        }
        Ok(SoftSet {
            universe,
            source,
            levels,
        })
    }

    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn source(&self) -> &SourceTag {
        &self.source
    }

    pub fn levels(&self) -> &[(Alpha, MemberSet)] {
        &self.levels
    }

    pub fn level(&self, alpha: Alpha) -> Option<&MemberSet> {
        self.levels
            .iter()
            .find(|(a, _)| *a == alpha)
            .map(|(_, s)| s)
    }

    pub fn grid(&self) -> Vec<Alpha> {
        self.levels.iter().map(|(a, _)| *a).collect()
    }
}

/// Cuts a fuzzy column into a soft set: `levels[alpha] = { v : mu(v) >= alpha }`.
///
/// The weak inequality makes a patient whose membership equals the level a
/// member of that level set.
pub fn alpha_cut(
    table: &FuzzyTable,
    variable: &str,
    term: &str,
    grid: &[Alpha],
) -> Result<SoftSet> {
    check_grid(variable, term, grid)?;
    let column = table
        .column(variable, term)
        .ok_or_else(|| Error::UnknownColumn {
            variable: variable.to_string(),
            term: term.to_string(),
        })?;
    let universe = table.universe().clone();
    let levels = grid
        .iter()
        .map(|&alpha| {
            let set = MemberSet::from_indices(
                universe.len(),
                column
                    .iter()
                    .enumerate()
                    .filter(|(_, &mu)| mu >= alpha.get())
                    .map(|(i, _)| i),
            );
            (alpha, set)
        })
        .collect();
    SoftSet::new(
        universe,
        SourceTag {
            variable: variable.to_string(),
            term: term.to_string(),
        },
        levels,
    )
}

/// How a product combines its factors' level sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetOp {
    Intersection,
    Union,
}

impl SetOp {
    fn apply(self, a: &MemberSet, b: &MemberSet) -> MemberSet {
        match self {
            SetOp::Intersection => a.intersection(b),
            SetOp::Union => a.union(b),
        }
    }
}

/// The cartesian product of soft sets: one cell per tuple of alpha levels,
/// each cell the combination (intersection for AND, union for OR) of the
/// factor level sets.
#[derive(Debug, Clone)]
pub struct ProductSoftSet {
    universe: Arc<Universe>,
    factors: Vec<SourceTag>,
    grids: Vec<Vec<Alpha>>,
    factor_sets: Vec<Vec<MemberSet>>,
    op: SetOp,
    cells: Option<Vec<MemberSet>>,
}

impl ProductSoftSet {
    fn build(
        factors: Vec<(SourceTag, Vec<(Alpha, MemberSet)>)>,
        op: SetOp,
        universe: Arc<Universe>,
    ) -> Self {
        let mut tags = Vec::with_capacity(factors.len());
        let mut grids = Vec::with_capacity(factors.len());
        let mut sets = Vec::with_capacity(factors.len());
        for (tag, levels) in factors {
            tags.push(tag);
            grids.push(levels.iter().map(|(a, _)| *a).collect());
            sets.push(levels.into_iter().map(|(_, s)| s).collect());
        }
        let mut product = ProductSoftSet {
            universe,
            factors: tags,
            grids,
            factor_sets: sets,
            op,
            cells: None,
        };
        if product.cell_count().is_some_and(|n| n <= EAGER_CELL_LIMIT) {
            product.materialize();
        }
        product
    }

    #[cfg(test)]
    fn force_lazy(mut self) -> Self {
        self.cells = None;
        self
    }

    fn materialize(&mut self) {
        let count = self.cell_count().expect("cell count overflow");
        let mut cells = Vec::with_capacity(count);
        let mut idx = vec![0usize; self.grids.len()];
        for _ in 0..count {
            cells.push(self.compute_cell(&idx));
            // row-major odometer, last factor fastest
            for pos in (0..idx.len()).rev() {
                idx[pos] += 1;
                if idx[pos] < self.grids[pos].len() {
                    break;
                }
                idx[pos] = 0;
            }
        }
        self.cells = Some(cells);
    }

    fn compute_cell(&self, idx: &[usize]) -> MemberSet {
        let mut acc = self.factor_sets[0][idx[0]].clone();
        for (pos, &i) in idx.iter().enumerate().skip(1) {
            acc = self.op.apply(&acc, &self.factor_sets[pos][i]);
        }
        acc
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for (pos, &i) in idx.iter().enumerate() {
            flat = flat * self.grids[pos].len() + i;
        }
        flat
    }

    /// Total number of cells, `None` on overflow.
    pub fn cell_count(&self) -> Option<usize> {
        self.grids
            .iter()
            .try_fold(1usize, |acc, g| acc.checked_mul(g.len()))
    }

    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn factors(&self) -> &[SourceTag] {
        &self.factors
    }

    pub fn grids(&self) -> &[Vec<Alpha>] {
        &self.grids
    }

    pub fn op(&self) -> SetOp {
        self.op
    }

    /// Cell by per-factor level indices; `None` if an index is out of range.
    pub fn cell(&self, idx: &[usize]) -> Option<MemberSet> {
        if idx.len() != self.grids.len() || idx.iter().zip(&self.grids).any(|(&i, g)| i >= g.len())
        {
            return None;
        }
        Some(match &self.cells {
            Some(cells) => cells[self.flat_index(idx)].clone(),
            None => self.compute_cell(idx),
        })
    }

    /// Cell addressed by alpha values instead of indices.
    pub fn cell_at(&self, alphas: &[Alpha]) -> Option<MemberSet> {
        if alphas.len() != self.grids.len() {
            return None;
        }
        let idx: Option<Vec<usize>> = alphas
            .iter()
            .zip(&self.grids)
            .map(|(a, g)| g.iter().position(|x| x == a))
            .collect();
        self.cell(&idx?)
    }

    /// Extends the product with one more factor under the same operation.
    pub fn and_then(&self, next: &SoftSet) -> Result<ProductSoftSet> {
        if **next.universe() != *self.universe {
            return Err(Error::UniverseMismatch);
        }
        let mut factors: Vec<(SourceTag, Vec<(Alpha, MemberSet)>)> = Vec::new();
        for (pos, tag) in self.factors.iter().enumerate() {
            let levels = self.grids[pos]
                .iter()
                .copied()
                .zip(self.factor_sets[pos].iter().cloned())
                .collect();
            factors.push((tag.clone(), levels));
        }
        factors.push((next.source().clone(), next.levels().to_vec()));
        Ok(ProductSoftSet::build(
            factors,
            self.op,
            self.universe.clone(),
        ))
    }
}

fn combine(a: &SoftSet, b: &SoftSet, op: SetOp) -> Result<ProductSoftSet> {
    if a.universe() != b.universe() {
        return Err(Error::UniverseMismatch);
    }
    Ok(ProductSoftSet::build(
        vec![
            (a.source().clone(), a.levels().to_vec()),
            (b.source().clone(), b.levels().to_vec()),
        ],
        op,
        a.universe().clone(),
    ))
}

/// Soft-set AND: cells are intersections of the factor level sets.
pub fn and_op(a: &SoftSet, b: &SoftSet) -> Result<ProductSoftSet> {
    combine(a, b, SetOp::Intersection)
}

/// Soft-set OR: cells are unions of the factor level sets. Provided for
/// algebra completeness; the diagnostic pipeline does not use it.
pub fn or_op(a: &SoftSet, b: &SoftSet) -> Result<ProductSoftSet> {
    combine(a, b, SetOp::Union)
}

/// Drops every level whose set is empty or equals the full universe.
/// Surviving levels keep their sets and order.
pub fn reduce_trivial(s: &SoftSet) -> SoftSet {
    let levels = s
        .levels()
        .iter()
        .filter(|(_, set)| !set.is_empty() && !set.is_full())
        .cloned()
        .collect();
    SoftSet {
        universe: s.universe.clone(),
        source: s.source.clone(),
        levels,
    }
}

/// Collapses runs of levels with identical sets, keeping the lowest alpha of
/// each run. Nesting makes identical sets adjacent.
pub fn merge_duplicate_levels(s: &SoftSet) -> SoftSet {
    let mut levels: Vec<(Alpha, MemberSet)> = Vec::with_capacity(s.levels.len());
    for (alpha, set) in &s.levels {
        if levels.last().map(|(_, prev)| prev) == Some(set) {
            continue;
        }
        levels.push((*alpha, set.clone()));
    }
    SoftSet {
        universe: s.universe.clone(),
        source: s.source.clone(),
        levels,
    }
}
