//! Words in free *-algebra generators and their finite linear combinations.

use std::collections::BTreeMap;

use crate::opcore::{cr, C64};

/// One letter of a word: a generator index, possibly starred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Letter {
    pub gen: usize,
    pub starred: bool,
}

/// A word in the generators; the empty word is the identity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.0.clone();
        letters.extend_from_slice(&other.0);
        Word(letters)
    }

    /// Reverses the word and flips every star.
    pub fn adjoint(&self) -> Word {
        Word(
            self.0
                .iter()
                .rev()
                .map(|l| Letter {
                    gen: l.gen,
                    starred: !l.starred,
                })
                .collect(),
        )
    }

    /// Signed count: copies of generator `j` minus copies of its adjoint.
    pub fn n_count(&self, j: usize) -> i64 {
        self.0
            .iter()
            .filter(|l| l.gen == j)
            .map(|l| if l.starred { -1 } else { 1 })
            .sum()
    }

    pub fn max_generator(&self) -> Option<usize> {
        self.0.iter().map(|l| l.gen).max()
    }
}

/// A finitely supported linear combination of words; zero coefficients are
/// never stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FreeElement {
    terms: BTreeMap<Word, C64>,
}

impl FreeElement {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(word: Word, coeff: C64) -> Self {
        let mut terms = BTreeMap::new();
        if coeff != C64::new(0.0, 0.0) {
            terms.insert(word, coeff);
        }
        Self { terms }
    }

    pub fn one() -> Self {
        Self::monomial(Word::identity(), cr(1.0))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &C64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, word: &Word) -> C64 {
        self.terms.get(word).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.terms.values().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn add_term(&mut self, word: Word, coeff: C64) {
        use std::collections::btree_map::Entry;
        let zero = C64::new(0.0, 0.0);
        match self.terms.entry(word) {
            Entry::Vacant(v) => {
                if coeff != zero {
                    v.insert(coeff);
                }
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += coeff;
                if *o.get() == zero {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &FreeElement) -> FreeElement {
        let mut out = self.clone();
        for (w, cf) in other.terms() {
            out.add_term(w.clone(), *cf);
        }
        out
    }

    pub fn scale(&self, z: C64) -> FreeElement {
        if z == C64::new(0.0, 0.0) {
            return FreeElement::zero();
        }
        FreeElement {
            terms: self.terms.iter().map(|(w, cf)| (w.clone(), cf * z)).collect(),
        }
    }

    pub fn sub(&self, other: &FreeElement) -> FreeElement {
        self.add(&other.scale(cr(-1.0)))
    }

    pub fn mul(&self, other: &FreeElement) -> FreeElement {
        let mut out = FreeElement::zero();
        for (wa, ca) in self.terms() {
            for (wb, cb) in other.terms() {
                out.add_term(wa.concat(wb), ca * cb);
            }
        }
        out
    }

    pub fn adjoint(&self) -> FreeElement {
        FreeElement {
            terms: self
                .terms
                .iter()
                .map(|(w, cf)| (w.adjoint(), cf.conj()))
                .collect(),
        }
    }
}

/// The word-counting derivation `d_j`, extended linearly:
/// `d_j(b) = n_j(b) b` on each word.
pub fn apply_derivation(x: &FreeElement, j: usize) -> FreeElement {
    let mut out = FreeElement::zero();
    for (w, cf) in x.terms() {
        let n = w.n_count(j);
        if n != 0 {
            out.add_term(w.clone(), cf * cr(n as f64));
        }
    }
    out
}
