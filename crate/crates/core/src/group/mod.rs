//! Group families, exact element arithmetic, and generating multisets.
//!
//! Three families are supported: free groups `free:k`, free abelian groups
//! `zd:d`, and free products of finite cyclic groups `fpc:n1,n2,...`.
//! Elements carry a canonical normal form (reduced syllable words for the
//! free families, coordinate vectors for zd), so `==` and `Hash` agree with
//! group equality.

pub mod multiset;
pub mod parse;

pub use multiset::{GeneratorMultiset, WeightedMultiset};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Letters usable as generator names. 'e' is reserved for the identity.
const ALPHABET: &[u8] = b"abcdfghijklmnopqrstuvwxyz";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Free group of the given rank.
    Free { rank: usize },
    /// Z^d under addition.
    ZPower { dim: usize },
    /// Free product of cyclic groups Z/n1 * Z/n2 * ...
    FreeProductCyclic { orders: Vec<u32> },
}

/// One maximal run of a single generator in a reduced word.
///
/// Canonical exponents: nonzero for free groups, in `1..order` for cyclic
/// factors. Adjacent syllables always name distinct generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Syllable {
    pub gen: u16,
    pub exp: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum Repr {
    Word(Vec<Syllable>),
    Vector(Vec<i64>),
}

/// An element in canonical normal form. Equality, hashing, and ordering are
/// structural, hence exact. All arithmetic goes through [`GroupContext`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement {
    pub(crate) repr: Repr,
}

impl GroupElement {
    pub fn is_identity(&self) -> bool {
        match &self.repr {
            Repr::Word(w) => w.is_empty(),
            Repr::Vector(v) => v.iter().all(|&c| c == 0),
        }
    }

    pub(crate) fn word(syllables: Vec<Syllable>) -> Self {
        GroupElement {
            repr: Repr::Word(syllables),
        }
    }

    pub(crate) fn vector(coords: Vec<i64>) -> Self {
        GroupElement {
            repr: Repr::Vector(coords),
        }
    }

    pub(crate) fn syllables(&self) -> Option<&[Syllable]> {
        match &self.repr {
            Repr::Word(w) => Some(w),
            Repr::Vector(_) => None,
        }
    }

    /// Lattice coordinates, for elements of a vector family.
    pub fn coords(&self) -> Option<&[i64]> {
        match &self.repr {
            Repr::Vector(v) => Some(v),
            Repr::Word(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupContext {
    family: Family,
}

impl GroupContext {
    pub fn new(family: Family) -> Result<Self> {
        match &family {
            Family::Free { rank } => {
                if *rank == 0 {
                    return Err(Error::Range("free group rank must be >= 1".into()));
                }
                if *rank > ALPHABET.len() {
                    return Err(Error::Range(format!(
                        "free group rank {rank} exceeds the {} available generator names",
                        ALPHABET.len()
                    )));
                }
            }
            Family::ZPower { dim } => {
                if *dim == 0 {
                    return Err(Error::Range("zd dimension must be >= 1".into()));
                }
            }
            Family::FreeProductCyclic { orders } => {
                if orders.is_empty() {
                    return Err(Error::Range("fpc needs at least one cyclic factor".into()));
                }
                if orders.len() > ALPHABET.len() {
                    return Err(Error::Range(format!(
                        "fpc with {} factors exceeds the {} available generator names",
                        orders.len(),
                        ALPHABET.len()
                    )));
                }
                if let Some(o) = orders.iter().find(|&&o| o < 2) {
                    return Err(Error::Range(format!(
                        "cyclic factor order {o} must be >= 2"
                    )));
                }
            }
        }
        Ok(GroupContext { family })
    }

    pub fn free(rank: usize) -> Result<Self> {
        Self::new(Family::Free { rank })
    }

    pub fn zd(dim: usize) -> Result<Self> {
        Self::new(Family::ZPower { dim })
    }

    pub fn fpc(orders: Vec<u32>) -> Result<Self> {
        Self::new(Family::FreeProductCyclic { orders })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn is_word_family(&self) -> bool {
        !matches!(self.family, Family::ZPower { .. })
    }

    /// Exposed because the finite-support sup rule changes on finite groups.
    pub fn finite_order(&self) -> Option<u64> {
        match &self.family {
            // A free product of two or more nontrivial groups is infinite.
            Family::FreeProductCyclic { orders } if orders.len() == 1 => Some(orders[0] as u64),
            _ => None,
        }
    }

    /// True when multiplication commutes: lattices, the free group of rank
    /// one, and single cyclic factors. Free products of two or more factors
    /// are never abelian.
    pub fn is_abelian(&self) -> bool {
        match &self.family {
            Family::ZPower { .. } => true,
            Family::Free { rank } => *rank == 1,
            Family::FreeProductCyclic { orders } => orders.len() == 1,
        }
    }

    pub fn generator_count(&self) -> usize {
        match &self.family {
            Family::Free { rank } => *rank,
            Family::ZPower { dim } => *dim,
            Family::FreeProductCyclic { orders } => orders.len(),
        }
    }

    /// Order of the cyclic factor a generator lives in (word families).
    fn cyclic_order(&self, gen: u16) -> Option<i64> {
        match &self.family {
            Family::FreeProductCyclic { orders } => Some(orders[gen as usize] as i64),
            _ => None,
        }
    }

    pub fn generator_name(&self, i: usize) -> String {
        debug_assert!(i < self.generator_count());
        match &self.family {
            Family::ZPower { .. } => format!("e{}", i + 1),
            _ => (ALPHABET[i] as char).to_string(),
        }
    }

    pub fn identity(&self) -> GroupElement {
        match &self.family {
            Family::ZPower { dim } => GroupElement::vector(vec![0; *dim]),
            _ => GroupElement::word(Vec::new()),
        }
    }

    pub fn generator(&self, i: usize) -> GroupElement {
        assert!(i < self.generator_count(), "generator index out of range");
        match &self.family {
            Family::ZPower { dim } => {
                let mut v = vec![0; *dim];
                v[i] = 1;
                GroupElement::vector(v)
            }
            _ => GroupElement::word(vec![Syllable {
                gen: i as u16,
                exp: 1,
            }]),
        }
    }

    pub fn generators(&self) -> Vec<GroupElement> {
        (0..self.generator_count()).map(|i| self.generator(i)).collect()
    }

    /// Builds a lattice element from explicit coordinates.
    pub fn vector_element(&self, coords: Vec<i64>) -> Result<GroupElement> {
        match &self.family {
            Family::ZPower { dim } if coords.len() == *dim => Ok(GroupElement::vector(coords)),
            Family::ZPower { dim } => Err(Error::Argument(format!(
                "expected {dim} coordinates, got {}",
                coords.len()
            ))),
            _ => Err(Error::ContextMismatch(
                "vector elements only exist in lattice families".into(),
            )),
        }
    }

    /// One entry per generator, then the inverses: the usual symmetric set.
    pub fn standard_symmetric(&self) -> GeneratorMultiset {
        GeneratorMultiset::new(self.generators())
            .symmetrized(self)
            .expect("standard generators invert")
    }

    /// Checks that an element is a valid canonical form for this context.
    pub fn validate(&self, g: &GroupElement) -> Result<()> {
        match (&self.family, &g.repr) {
            (Family::ZPower { dim }, Repr::Vector(v)) => {
                if v.len() == *dim {
                    Ok(())
                } else {
                    Err(Error::ContextMismatch(format!(
                        "vector of dimension {} in zd:{dim}",
                        v.len()
                    )))
                }
            }
            (Family::ZPower { .. }, Repr::Word(_)) => Err(Error::ContextMismatch(
                "word element used in a zd context".into(),
            )),
            (_, Repr::Vector(_)) => Err(Error::ContextMismatch(
                "vector element used in a word-family context".into(),
            )),
            (_, Repr::Word(w)) => {
                let count = self.generator_count() as u16;
                let mut prev: Option<u16> = None;
                for syl in w {
                    if syl.gen >= count {
                        return Err(Error::ContextMismatch(format!(
                            "generator index {} out of range (context has {count})",
                            syl.gen
                        )));
                    }
                    if prev == Some(syl.gen) {
                        return Err(Error::ContextMismatch(
                            "word is not reduced (adjacent syllables share a generator)".into(),
                        ));
                    }
                    let ok = match self.cyclic_order(syl.gen) {
                        None => syl.exp != 0,
                        Some(order) => (1..order).contains(&syl.exp),
                    };
                    if !ok {
                        return Err(Error::ContextMismatch(format!(
                            "non-canonical exponent {} for generator {}",
                            syl.exp, syl.gen
                        )));
                    }
                    prev = Some(syl.gen);
                }
                Ok(())
            }
        }
    }

    /// Appends one syllable to a reduced word, keeping it reduced.
    fn push_syllable(&self, word: &mut Vec<Syllable>, gen: u16, exp: i64) -> Result<()> {
        let order = self.cyclic_order(gen);
        let canonical = |e: i64| -> Option<i64> {
            match order {
                None => (e != 0).then_some(e),
                Some(n) => {
                    let r = e.rem_euclid(n);
                    (r != 0).then_some(r)
                }
            }
        };
        let exp = match canonical(exp) {
            Some(e) => e,
            None => return Ok(()),
        };
        match word.last_mut() {
            Some(last) if last.gen == gen => {
                let merged = last
                    .exp
                    .checked_add(exp)
                    .ok_or_else(|| Error::Range("word exponent overflow".into()))?;
                match canonical(merged) {
                    Some(e) => last.exp = e,
                    None => {
                        word.pop();
                    }
                }
            }
            _ => word.push(Syllable { gen, exp }),
        }
        Ok(())
    }

    pub fn mul(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        self.validate(g)?;
        self.validate(h)?;
        match (&g.repr, &h.repr) {
            (Repr::Vector(a), Repr::Vector(b)) => {
                let mut out = Vec::with_capacity(a.len());
                for (x, y) in a.iter().zip(b) {
                    out.push(
                        x.checked_add(*y)
                            .ok_or_else(|| Error::Range("coordinate overflow".into()))?,
                    );
                }
                Ok(GroupElement::vector(out))
            }
            (Repr::Word(a), Repr::Word(b)) => {
                let mut out = a.clone();
                for syl in b {
                    self.push_syllable(&mut out, syl.gen, syl.exp)?;
                }
                Ok(GroupElement::word(out))
            }
            _ => Err(Error::ContextMismatch(
                "cannot multiply a word by a vector".into(),
            )),
        }
    }

    pub fn inv(&self, g: &GroupElement) -> Result<GroupElement> {
        self.validate(g)?;
        match &g.repr {
            Repr::Vector(v) => {
                let mut out = Vec::with_capacity(v.len());
                for x in v {
                    out.push(
                        x.checked_neg()
                            .ok_or_else(|| Error::Range("coordinate overflow".into()))?,
                    );
                }
                Ok(GroupElement::vector(out))
            }
            Repr::Word(w) => {
                let mut out = Vec::with_capacity(w.len());
                for syl in w.iter().rev() {
                    let exp = match self.cyclic_order(syl.gen) {
                        None => -syl.exp,
                        Some(order) => order - syl.exp,
                    };
                    out.push(Syllable { gen: syl.gen, exp });
                }
                Ok(GroupElement::word(out))
            }
        }
    }

    /// `g^-1 * h` without an intermediate allocation for `g^-1`.
    pub fn inv_mul(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        let gi = self.inv(g)?;
        self.mul(&gi, h)
    }

    /// Splits a word element into minimal units: signed single letters for
    /// free groups, whole syllables for cyclic factors. Unit count is the
    /// depth currency of prefix-classified functions.
    pub fn word_units(&self, g: &GroupElement) -> Result<Vec<Syllable>> {
        self.validate(g)?;
        let w = g
            .syllables()
            .ok_or_else(|| Error::MethodNotApplicable("unit split needs a word family".into()))?;
        let mut units = Vec::new();
        for syl in w {
            match self.cyclic_order(syl.gen) {
                Some(_) => units.push(*syl),
                None => {
                    let step = if syl.exp > 0 { 1 } else { -1 };
                    for _ in 0..syl.exp.unsigned_abs() {
                        units.push(Syllable {
                            gen: syl.gen,
                            exp: step,
                        });
                    }
                }
            }
        }
        Ok(units)
    }

    pub fn unit_len(&self, g: &GroupElement) -> Result<usize> {
        let w = g
            .syllables()
            .ok_or_else(|| Error::MethodNotApplicable("unit length needs a word family".into()))?;
        Ok(match &self.family {
            Family::FreeProductCyclic { .. } => w.len(),
            _ => w.iter().map(|s| s.exp.unsigned_abs() as usize).sum(),
        })
    }

    /// Reassembles a word from units (or any syllable run), reducing as it goes.
    pub fn from_units(&self, units: &[Syllable]) -> Result<GroupElement> {
        let mut out = Vec::new();
        for syl in units {
            self.push_syllable(&mut out, syl.gen, syl.exp)?;
        }
        let g = GroupElement::word(out);
        self.validate(&g)?;
        Ok(g)
    }

    /// All unit extensions of a reduced word by one unit on the right,
    /// i.e. the children in the prefix tree of normal forms.
    pub(crate) fn unit_extensions(&self, units: &[Syllable]) -> Vec<Syllable> {
        let mut out = Vec::new();
        let last = units.last();
        for gen in 0..self.generator_count() as u16 {
            match self.cyclic_order(gen) {
                Some(order) => {
                    if last.map(|s| s.gen) == Some(gen) {
                        continue;
                    }
                    for exp in 1..order {
                        out.push(Syllable { gen, exp });
                    }
                }
                None => {
                    for exp in [1i64, -1] {
                        // Skip the unit that would cancel the previous one.
                        if let Some(l) = last {
                            if l.gen == gen && l.exp == -exp {
                                continue;
                            }
                        }
                        out.push(Syllable { gen, exp });
                    }
                }
            }
        }
        out
    }

    /// Every element of unit length <= depth, grouped by length.
    /// Free-family growth is exponential; `cap` guards the total count.
    pub fn words_by_unit_len(&self, depth: usize, cap: usize) -> Result<Vec<Vec<GroupElement>>> {
        if !self.is_word_family() {
            return Err(Error::MethodNotApplicable(
                "prefix enumeration needs a word family".into(),
            ));
        }
        let mut levels: Vec<Vec<GroupElement>> = vec![vec![self.identity()]];
        let mut total = 1usize;
        for _ in 0..depth {
            let prev = levels.last().unwrap();
            let mut next = Vec::new();
            for g in prev {
                let units = self.word_units(g)?;
                for ext in self.unit_extensions(&units) {
                    let mut w = units.clone();
                    w.push(ext);
                    next.push(self.from_units(&w)?);
                }
            }
            next.sort();
            next.dedup();
            total += next.len();
            if total > cap {
                return Err(Error::Budget {
                    what: "prefix enumeration",
                    requested: total as u64,
                    limit: cap as u64,
                });
            }
            if next.is_empty() {
                break;
            }
            levels.push(next);
        }
        Ok(levels)
    }

    pub fn format(&self, g: &GroupElement) -> String {
        match &g.repr {
            Repr::Vector(v) => {
                let body: Vec<String> = v.iter().map(|c| c.to_string()).collect();
                format!("({})", body.join(","))
            }
            Repr::Word(w) => {
                if w.is_empty() {
                    return "e".to_string();
                }
                let mut out = String::new();
                for syl in w {
                    out.push_str(&self.generator_name(syl.gen as usize));
                    if syl.exp != 1 {
                        out.push('^');
                        out.push_str(&syl.exp.to_string());
                    }
                }
                out
            }
        }
    }

    pub fn parse_element(&self, s: &str) -> Result<GroupElement> {
        parse::parse_element(self, s)
    }
}
