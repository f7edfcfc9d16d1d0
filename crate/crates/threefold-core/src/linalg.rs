//! Sparse exact linear algebra over the rationals.
//!
//! Everything the cohomology solvers need: an incrementally built echelon
//! form with optional tracking of how each row was combined from the
//! original generators (for coboundary witnesses), membership reduction
//! with canonical residuals, and a kernel computation.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_rational::BigRational;
use num_traits::Zero;

/// A sparse vector indexed by `usize`, zero entries never stored.
pub type SparseVec = BTreeMap<usize, BigRational>;

pub fn sv_is_zero(v: &SparseVec) -> bool {
    v.is_empty()
}

/// `target += c * source`
pub fn sv_add_scaled(target: &mut SparseVec, c: &BigRational, source: &SparseVec) {
    if c.is_zero() {
        return;
    }
    for (i, a) in source {
        let entry = target.entry(*i).or_insert_with(BigRational::zero);
        *entry += c * a;
        if entry.is_zero() {
            target.remove(i);
        }
    }
}

pub fn sv_scale(v: &mut SparseVec, c: &BigRational) {
    for a in v.values_mut() {
        *a *= c.clone();
    }
}

/// Incremental echelon basis of a subspace of Q^n.
///
/// Rows are kept normalized (pivot coefficient 1) with pairwise distinct
/// pivots; the pivot of a row is its minimal index. Reduction eliminates
/// every pivot index from a vector (tails included, by the ascending
/// sweep), so residuals are canonical coset representatives even though
/// rows are not inter-reduced: a span element vanishing on every pivot
/// index is zero.
pub struct Echelon {
    /// pivot index -> (row, combination over generator indices)
    rows: BTreeMap<usize, (SparseVec, SparseVec)>,
    track: bool,
    n_inserted: usize,
}

impl Echelon {
    pub fn new(track_combinations: bool) -> Self {
        Echelon { rows: BTreeMap::new(), track: track_combinations, n_inserted: 0 }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Canonical residual of `v` modulo the span, together with the
    /// combination of generators that was subtracted (empty when tracking is
    /// off).
    pub fn reduce(&self, v: &SparseVec) -> (SparseVec, SparseVec) {
        let mut res = v.clone();
        let mut combo: SparseVec = SparseVec::new();
        // Ascending sweep; eliminations only create entries at larger
        // indices, so one pass reaches a fixpoint.
        let mut cursor = 0usize;
        loop {
            let next = res.range(cursor..).next().map(|(i, _)| *i);
            let Some(idx) = next else { break };
            if let Some((row, row_combo)) = self.rows.get(&idx) {
                let c = res.get(&idx).cloned().unwrap_or_else(BigRational::zero);
                let minus_c = -c;
                sv_add_scaled(&mut res, &minus_c, row);
                if self.track {
                    sv_add_scaled(&mut combo, &minus_c, row_combo);
                }
                debug_assert!(!res.contains_key(&idx));
            }
            cursor = idx + 1;
        }
        (res, combo)
    }

    /// Insert a generator. Returns the generator's index and whether it
    /// increased the rank.
    pub fn insert(&mut self, v: SparseVec) -> (usize, bool) {
        let gen_index = self.n_inserted;
        self.n_inserted += 1;
        let (mut res, mut combo) = self.reduce(&v);
        if self.track {
            combo.insert(gen_index, BigRational::from_integer(1.into()));
        }
        if res.is_empty() {
            return (gen_index, false);
        }
        let (&pivot, coeff) = res.iter().next().unwrap();
        let inv = coeff.recip();
        sv_scale(&mut res, &inv);
        if self.track {
            sv_scale(&mut combo, &inv);
        }
        self.rows.insert(pivot, (res, combo));
        (gen_index, true)
    }

    /// The solution of `v = sum_j x_j gen_j` as a combination over generator
    /// indices, if `v` lies in the span. Requires tracking.
    pub fn express(&self, v: &SparseVec) -> Option<SparseVec> {
        assert!(self.track, "express requires combination tracking");
        let (res, combo) = self.reduce(v);
        if res.is_empty() {
            let mut sol = combo;
            for c in sol.values_mut() {
                *c = -c.clone();
            }
            Some(sol)
        } else {
            None
        }
    }

    pub fn contains(&self, v: &SparseVec) -> bool {
        self.reduce(v).0.is_empty()
    }
}

/// Kernel of the linear map sending unknown `j` to `columns[j]`.
///
/// Returns a basis of the kernel, each element a combination over the
/// unknown indices `0..columns.len()`.
pub fn kernel_basis(columns: &[SparseVec]) -> Vec<SparseVec> {
    let mut ech = Echelon::new(true);
    let mut kernel = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        let (res, mut combo) = ech.reduce(col);
        combo.insert(j, BigRational::from_integer(1.into()));
        if res.is_empty() {
            kernel.push(combo);
        } else {
            // mirror of Echelon::insert, reusing the already-computed residual
            let mut res = res;
            let (&pivot, coeff) = res.iter().next().unwrap();
            let inv = coeff.recip();
            sv_scale(&mut res, &inv);
            sv_scale(&mut combo, &inv);
            ech.rows.insert(pivot, (res, combo));
            ech.n_inserted += 1;
        }
    }
    kernel
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_of(entries: &[(usize, i64)]) -> SparseVec {
        entries
            .iter()
            .filter(|(_, c)| *c != 0)
            .map(|(i, c)| (*i, BigRational::from_integer((*c).into())))
            .collect()
    }

    #[test]
    fn rank_and_membership() {
        let mut e = Echelon::new(false);
        e.insert(vec_of(&[(0, 1), (1, 2)]));
        e.insert(vec_of(&[(1, 1), (2, 1)]));
        assert_eq!(e.rank(), 2);
        // (1, 2, 0) + 3*(0, 1, 1) = (1, 5, 3)
        assert!(e.contains(&vec_of(&[(0, 1), (1, 5), (2, 3)])));
        assert!(!e.contains(&vec_of(&[(2, 1), (3, 1)])));
        // inserting a dependent vector does not raise the rank
        let (_, fresh) = e.insert(vec_of(&[(0, 2), (1, 4)]));
        assert!(!fresh);
        assert_eq!(e.rank(), 2);
    }

    #[test]
    fn express_recovers_combinations() {
        let mut e = Echelon::new(true);
        let g0 = vec_of(&[(0, 1), (1, 1)]);
        let g1 = vec_of(&[(1, 1), (2, -1)]);
        e.insert(g0.clone());
        e.insert(g1.clone());
        let target = vec_of(&[(0, 2), (1, 5), (2, -3)]);
        let sol = e.express(&target).expect("in span");
        // recompose and compare
        let mut acc = SparseVec::new();
        for (j, c) in &sol {
            let g = if *j == 0 { &g0 } else { &g1 };
            sv_add_scaled(&mut acc, c, g);
        }
        assert_eq!(acc, target);
    }

    #[test]
    fn residuals_are_canonical() {
        let mut e = Echelon::new(false);
        e.insert(vec_of(&[(0, 1), (2, 1)]));
        e.insert(vec_of(&[(1, 1), (2, 2)]));
        let a = vec_of(&[(2, 7), (3, 1)]);
        let mut b = a.clone();
        // shift b by a span element
        sv_add_scaled(&mut b, &BigRational::from_integer(5.into()), &vec_of(&[(0, 1), (2, 1)]));
        assert_eq!(e.reduce(&a).0, e.reduce(&b).0);
    }

    #[test]
    fn kernel_of_a_small_map() {
        // columns: c0 = (1,0), c1 = (0,1), c2 = (1,1) -> kernel spanned by c0 + c1 - c2
        let cols = [vec_of(&[(0, 1)]), vec_of(&[(1, 1)]), vec_of(&[(0, 1), (1, 1)])];
        let ker = kernel_basis(&cols);
        assert_eq!(ker.len(), 1);
        let k = &ker[0];
        // verify: sum_j k_j col_j = 0
        let mut acc = SparseVec::new();
        for (j, c) in k {
            sv_add_scaled(&mut acc, c, &cols[*j]);
        }
        assert!(acc.is_empty());
    }
}
