//! Čech cohomology on the two-chart cover.
//!
//! For a bundle with transition matrix M over an invertible base transition,
//! a 1-cochain is a component vector on the chart overlap, written in
//! U variables. It is a coboundary exactly when it splits as
//!
//! ```text
//! sigma = alpha + M^-1 * beta
//! ```
//!
//! with `alpha` holomorphic on U and `beta` holomorphic on V (transported to
//! U variables through the transition). Within a truncation window that
//! splitting is a finite sparse linear system over the rationals, so
//! membership, witnesses, obstruction certificates and basis computations
//! are all exact. Windows are grown and results accepted only once repeated
//! growth leaves them unchanged.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_rational::BigRational;
use num_traits::One;

use crate::geometry::{matrix_apply, BundleTransition, GeometryError};
use crate::linalg::{kernel_basis, Echelon, SparseVec};
use crate::series::{Chart, Exponent, MultiSeries, SeriesError, TruncationPolicy};

/// A vector-valued 1-cochain in U variables; the component count matches
/// the rank of the bundle it is used with.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorCochain {
    pub components: Vec<MultiSeries>,
}

impl VectorCochain {
    pub fn zero(rank: usize, policy: TruncationPolicy) -> Self {
        VectorCochain {
            components: (0..rank).map(|_| MultiSeries::zero(Chart::U, policy)).collect(),
        }
    }

    pub fn monomial(
        rank: usize,
        component: usize,
        e: Exponent,
        c: BigRational,
        policy: TruncationPolicy,
    ) -> Self {
        let mut v = Self::zero(rank, policy);
        v.components[component] = MultiSeries::monomial(Chart::U, policy, e, c);
        v
    }

    pub fn rank(&self) -> usize {
        self.components.len()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.is_zero())
    }

    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        assert_eq!(self.rank(), other.rank());
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.add(b))
            .collect::<Result<_, _>>()?;
        Ok(VectorCochain { components })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        VectorCochain { components: self.components.iter().map(|c| c.neg()).collect() }
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        VectorCochain { components: self.components.iter().map(|s| s.scale(c)).collect() }
    }

    /// Componentwise principal part (base exponent < 0).
    pub fn principal_part(&self) -> Self {
        VectorCochain {
            components: self.components.iter().map(|c| c.holomorphic_split().1).collect(),
        }
    }

    pub fn is_u_holomorphic(&self) -> bool {
        self.components.iter().all(|c| c.is_holomorphic())
    }

    pub fn truncate_u_total(&self, n: u32) -> Self {
        VectorCochain {
            components: self.components.iter().map(|c| c.truncate_u_total(n)).collect(),
        }
    }

    pub fn truncated_to(&self, policy: TruncationPolicy) -> Self {
        VectorCochain {
            components: self.components.iter().map(|c| c.truncated_to(policy)).collect(),
        }
    }

    pub fn boundary_touched(&self) -> bool {
        self.components.iter().any(|c| c.boundary_touched())
    }
}

impl fmt::Display for VectorCochain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CechError {
    Geometry(GeometryError),
    Series(SeriesError),
    /// A solve was infeasible and enlarging the window up to the growth cap
    /// never made two consecutive windows agree.
    WindowTooSmall { context: String },
}

impl fmt::Display for CechError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CechError::Geometry(e) => write!(f, "{e}"),
            CechError::Series(e) => write!(f, "{e}"),
            CechError::WindowTooSmall { context } => {
                write!(f, "window too small: {context}")
            }
        }
    }
}

impl core::error::Error for CechError {}

impl From<GeometryError> for CechError {
    fn from(e: GeometryError) -> Self {
        CechError::Geometry(e)
    }
}

impl From<SeriesError> for CechError {
    fn from(e: SeriesError) -> Self {
        CechError::Series(e)
    }
}

/// Both halves of a coboundary splitting. `alpha` is U-holomorphic in U
/// variables; `beta` is V-holomorphic and stored in V variables.
#[derive(Clone, Debug, PartialEq)]
pub struct CoboundaryWitness {
    pub alpha: VectorCochain,
    pub beta: Vec<MultiSeries>,
}

/// Why a cochain is not a coboundary: a monomial its candidates cannot
/// produce. `reachable_by` lists the generators whose raw images touch the
/// monomial (before elimination); an empty list is a proof by inspection.
#[derive(Clone, Debug, PartialEq)]
pub struct ObstructionCertificate {
    pub component: usize,
    pub exponent: Exponent,
    pub reachable_by: Vec<String>,
}

impl fmt::Display for ObstructionCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = Chart::U.var_names();
        let e = &self.exponent;
        write!(
            f,
            "unreachable monomial {}^{}*{}^{}*{}^{} in component {}",
            names[0], e.z, names[1], e.u1, names[2], e.u2, self.component + 1
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CoboundaryDecision {
    Coboundary(CoboundaryWitness),
    NotCoboundary(ObstructionCertificate),
}

impl CoboundaryDecision {
    pub fn is_coboundary(&self) -> bool {
        matches!(self, CoboundaryDecision::Coboundary(_))
    }
}

/// Families of classes detected to grow with the fiber-degree cap, plus the
/// dimension observed at each cap. Reported instead of a bare number when a
/// group keeps growing.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthPattern {
    pub families: Vec<String>,
    pub dims_by_u_cap: Vec<(u32, usize)>,
}

/// An echelonized list of cocycle representatives certified for a window.
#[derive(Clone, Debug)]
pub struct CohomologyBasis {
    pub classes: Vec<VectorCochain>,
    pub certified_window: TruncationPolicy,
    pub stabilized: bool,
    pub family_pattern: Option<GrowthPattern>,
}

impl CohomologyBasis {
    pub fn dimension(&self) -> usize {
        self.classes.len()
    }
}

// ---- monomial indexing ----

/// Stable numbering of the window's vector monomials, in canonical term
/// order with the component as tie-breaker.
struct MonomialIndex {
    by_key: BTreeMap<(Exponent, usize), usize>,
    reverse: Vec<(usize, Exponent)>,
}

fn window_exponents(policy: &TruncationPolicy) -> Vec<Exponent> {
    let mut out = Vec::new();
    for ud in 0..=policy.u_deg_max {
        for u1 in 0..=ud {
            let u2 = ud - u1;
            for z in policy.z_min..=policy.z_max {
                out.push(Exponent::new(z, u1, u2));
            }
        }
    }
    out
}

impl MonomialIndex {
    fn new(rank: usize, policy: &TruncationPolicy) -> Self {
        let mut by_key = BTreeMap::new();
        let mut reverse = Vec::new();
        for e in window_exponents(policy) {
            for comp in 0..rank {
                by_key.insert((e, comp), reverse.len());
                reverse.push((comp, e));
            }
        }
        MonomialIndex { by_key, reverse }
    }

    fn vectorize(&self, c: &VectorCochain) -> SparseVec {
        let mut v = SparseVec::new();
        for (comp, series) in c.components.iter().enumerate() {
            for (e, coeff) in series.terms() {
                if let Some(idx) = self.by_key.get(&(*e, comp)) {
                    v.insert(*idx, coeff.clone());
                }
            }
        }
        v
    }

}

// ---- the coboundary span ----

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum GeneratorKind {
    /// U-holomorphic monomial, enters the splitting as itself.
    Alpha { component: usize, exponent: Exponent },
    /// V-holomorphic monomial (exponent in V variables), enters through
    /// M^-1 and the chart transition.
    Beta { component: usize, exponent: Exponent },
}

impl GeneratorKind {
    fn label(&self) -> String {
        match self {
            GeneratorKind::Alpha { component, exponent } => {
                format!("alpha[{}] z^{} u1^{} u2^{}", component + 1, exponent.z, exponent.u1, exponent.u2)
            }
            GeneratorKind::Beta { component, exponent } => {
                format!("beta[{}] xi^{} v1^{} v2^{}", component + 1, exponent.z, exponent.u1, exponent.u2)
            }
        }
    }
}

struct CoboundarySpan {
    index: MonomialIndex,
    echelon: Echelon,
    kinds: Vec<GeneratorKind>,
    images: Vec<SparseVec>,
}

type PolicyKey = (u32, i32, i32);

fn policy_key(p: &TruncationPolicy) -> PolicyKey {
    (p.u_deg_max, p.z_min, p.z_max)
}

/// Cohomology solver for one bundle; caches inverse matrices and coboundary
/// spans per window.
pub struct Cohomology<'a> {
    bundle: &'a BundleTransition,
    inverses: BTreeMap<PolicyKey, Vec<MultiSeries>>,
    tracked_spans: BTreeMap<PolicyKey, CoboundarySpan>,
    untracked_spans: BTreeMap<PolicyKey, CoboundarySpan>,
}

impl<'a> Cohomology<'a> {
    pub fn new(bundle: &'a BundleTransition) -> Self {
        Cohomology {
            bundle,
            inverses: BTreeMap::new(),
            tracked_spans: BTreeMap::new(),
            untracked_spans: BTreeMap::new(),
        }
    }

    pub fn bundle(&self) -> &BundleTransition {
        self.bundle
    }

    fn rebased(&self, policy: TruncationPolicy) -> Result<BundleTransition, GeometryError> {
        self.bundle.with_policy(policy)
    }

    fn inverse_at(&mut self, policy: TruncationPolicy) -> Result<Vec<MultiSeries>, CechError> {
        if let Some(inv) = self.inverses.get(&policy_key(&policy)) {
            return Ok(inv.clone());
        }
        let rebased = self.rebased(policy)?;
        let inv = rebased.inverse_entries()?;
        self.inverses.insert(policy_key(&policy), inv.clone());
        Ok(inv)
    }

    fn span_at(
        &mut self,
        policy: TruncationPolicy,
        tracked: bool,
    ) -> Result<&CoboundarySpan, CechError> {
        let cache_key = policy_key(&policy);
        let present = if tracked {
            self.tracked_spans.contains_key(&cache_key)
        } else {
            self.untracked_spans.contains_key(&cache_key)
        };
        if !present {
            let span = self.build_span(policy, tracked)?;
            if tracked {
                self.tracked_spans.insert(cache_key, span);
            } else {
                self.untracked_spans.insert(cache_key, span);
            }
        }
        Ok(if tracked {
            self.tracked_spans.get(&cache_key).unwrap()
        } else {
            self.untracked_spans.get(&cache_key).unwrap()
        })
    }

    fn build_span(
        &mut self,
        policy: TruncationPolicy,
        tracked: bool,
    ) -> Result<CoboundarySpan, CechError> {
        let rebased = self.rebased(policy)?;
        let transition = rebased.transition().clone();
        if let Err(e) = transition.inverse() {
            return Err(CechError::Geometry(e));
        }
        let rank = rebased.rank();
        let minv = self.inverse_at(policy)?;
        let index = MonomialIndex::new(rank, &policy);
        let mut echelon = Echelon::new(tracked);
        let mut kinds = Vec::new();
        let mut images = Vec::new();

        // alpha generators: U-holomorphic monomials, image = themselves
        for e in window_exponents(&policy) {
            if e.z < 0 {
                continue;
            }
            for comp in 0..rank {
                let mut v = SparseVec::new();
                v.insert(index.by_key[&(e, comp)], BigRational::one());
                kinds.push(GeneratorKind::Alpha { component: comp, exponent: e });
                images.push(v.clone());
                echelon.insert(v);
            }
        }

        // beta generators: V-holomorphic monomials pulled back through the
        // transition and multiplied by M^-1
        for e in window_exponents(&policy) {
            if e.z < 0 {
                continue;
            }
            let beta_mono = MultiSeries::monomial(Chart::V, policy, e, BigRational::one());
            let pulled = transition.to_u(&beta_mono)?;
            for comp in 0..rank {
                let mut cochain = VectorCochain::zero(rank, policy);
                for row in 0..rank {
                    cochain.components[row] = minv[row * rank + comp].mul(&pulled)?;
                }
                let v = index.vectorize(&cochain);
                kinds.push(GeneratorKind::Beta { component: comp, exponent: e });
                images.push(v.clone());
                echelon.insert(v);
            }
        }

        Ok(CoboundarySpan { index, echelon, kinds, images })
    }

    /// One decision at one window, no stabilization.
    fn decide_at(
        &mut self,
        c: &VectorCochain,
        policy: TruncationPolicy,
    ) -> Result<CoboundaryDecision, CechError> {
        let rank = self.bundle.rank();
        assert_eq!(c.rank(), rank);
        let local = c.truncated_to(policy);
        let span = self.span_at(policy, true)?;
        let v = span.index.vectorize(&local);
        match span.echelon.express(&v) {
            Some(combo) => {
                let mut alpha = VectorCochain::zero(rank, policy);
                let mut beta: Vec<MultiSeries> =
                    (0..rank).map(|_| MultiSeries::zero(Chart::V, policy)).collect();
                for (gen, coeff) in &combo {
                    match span.kinds[*gen] {
                        GeneratorKind::Alpha { component, exponent } => {
                            let m = MultiSeries::monomial(Chart::U, policy, exponent, coeff.clone());
                            alpha.components[component] =
                                alpha.components[component].add(&m)?;
                        }
                        GeneratorKind::Beta { component, exponent } => {
                            let m = MultiSeries::monomial(Chart::V, policy, exponent, coeff.clone());
                            beta[component] = beta[component].add(&m)?;
                        }
                    }
                }
                let witness = CoboundaryWitness { alpha, beta };
                // recompose and check exactly within the window
                let recomposed = self.recompose(&witness, policy)?;
                let delta = recomposed.sub(&local)?;
                if !delta.is_zero() {
                    return Err(CechError::WindowTooSmall {
                        context: "witness recomposition drifted out of the window".to_string(),
                    });
                }
                Ok(CoboundaryDecision::Coboundary(witness))
            }
            None => {
                let (residual, _) = span.echelon.reduce(&v);
                let (&lead, _) = residual.iter().next().expect("nonzero residual");
                let (component, exponent) = span.index.reverse[lead];
                let mut reachable_by = Vec::new();
                for (kind, image) in span.kinds.iter().zip(&span.images) {
                    if image.contains_key(&lead) {
                        reachable_by.push(kind.label());
                    }
                }
                Ok(CoboundaryDecision::NotCoboundary(ObstructionCertificate {
                    component,
                    exponent,
                    reachable_by,
                }))
            }
        }
    }

    /// Canonical residual of a cochain modulo the coboundary span at the
    /// bundle's own window. Two cochains are cohomologous within the window
    /// iff their residuals agree, so ranks of residual collections compute
    /// dimensions of spans of classes.
    pub fn residual_class(&mut self, c: &VectorCochain) -> Result<SparseVec, CechError> {
        self.residual_at(c, self.bundle.policy())
    }

    /// Canonical residual of a cochain modulo the coboundary span at one
    /// window. Two cochains are cohomologous within the window iff their
    /// residuals agree.
    pub(crate) fn residual_at(
        &mut self,
        c: &VectorCochain,
        policy: TruncationPolicy,
    ) -> Result<SparseVec, CechError> {
        let local = c.truncated_to(policy);
        let span = self.span_at(policy, false)?;
        let v = span.index.vectorize(&local);
        Ok(span.echelon.reduce(&v).0)
    }

    /// Witness splitting at one window, if the cochain is a coboundary
    /// there: returns (alpha, beta) with beta in V variables.
    pub(crate) fn witness_at(
        &mut self,
        c: &VectorCochain,
        policy: TruncationPolicy,
    ) -> Result<Option<CoboundaryWitness>, CechError> {
        match self.decide_at(c, policy)? {
            CoboundaryDecision::Coboundary(w) => Ok(Some(w)),
            CoboundaryDecision::NotCoboundary(_) => Ok(None),
        }
    }

    /// Recompose alpha + M^-1 beta in U variables at the given window.
    pub fn recompose(
        &mut self,
        w: &CoboundaryWitness,
        policy: TruncationPolicy,
    ) -> Result<VectorCochain, CechError> {
        let rank = self.bundle.rank();
        let rebased = self.rebased(policy)?;
        let transition = rebased.transition();
        let minv = self.inverse_at(policy)?;
        let pulled: Vec<MultiSeries> = w
            .beta
            .iter()
            .map(|b| transition.to_u(&b.truncated_to(policy)))
            .collect::<Result<_, _>>()?;
        let transported = matrix_apply(rank, &minv, &pulled, Chart::U, policy)?;
        let mut out = w.alpha.truncated_to(policy);
        for (i, t) in transported.into_iter().enumerate() {
            out.components[i] = out.components[i].add(&t)?;
        }
        Ok(out)
    }

    /// Exact coboundary decision with witness or obstruction certificate.
    /// The answer is accepted once two consecutive windows agree; otherwise
    /// the window keeps growing up to `growth_cap` steps.
    pub fn is_coboundary(
        &mut self,
        c: &VectorCochain,
        growth_cap: u32,
    ) -> Result<CoboundaryDecision, CechError> {
        self.is_coboundary_mod(c, self.bundle.policy().u_deg_max, growth_cap)
    }

    /// Coboundary decision modulo fiber degree `u_cap + 1`. Because every
    /// generator image has fiber degree at least that of the generator, a
    /// negative answer here certifies a negative answer at every higher
    /// cap; a positive answer is a splitting statement mod I^{u_cap + 1}.
    pub fn is_coboundary_mod(
        &mut self,
        c: &VectorCochain,
        u_cap: u32,
        growth_cap: u32,
    ) -> Result<CoboundaryDecision, CechError> {
        let base = self.bundle.policy();
        let mut window = base.with_u_deg(u_cap.min(base.u_deg_max));
        let mut previous = self.decide_at(c, window)?;
        for _ in 0..growth_cap {
            let grown = window.grow_z();
            let next = self.decide_at(c, grown)?;
            if next.is_coboundary() == previous.is_coboundary() {
                return Ok(previous);
            }
            window = grown;
            previous = next;
        }
        Err(CechError::WindowTooSmall {
            context: format!(
                "coboundary decision kept flipping up to z window [{}, {}]",
                window.z_min, window.z_max
            ),
        })
    }

    /// A cohomologous normal form: drop the U-holomorphic part, transport,
    /// drop the V-holomorphic part, transport back; iterate to a fixpoint.
    pub fn reduce_representative(
        &mut self,
        c: &VectorCochain,
    ) -> Result<VectorCochain, CechError> {
        let policy = self.bundle.policy();
        self.reduce_representative_at(c, policy)
    }

    fn reduce_representative_at(
        &mut self,
        c: &VectorCochain,
        policy: TruncationPolicy,
    ) -> Result<VectorCochain, CechError> {
        let rank = self.bundle.rank();
        let rebased = self.rebased(policy)?;
        let transition = rebased.transition().clone();
        if let Err(e) = transition.inverse() {
            return Err(CechError::Geometry(e));
        }
        let minv = self.inverse_at(policy)?;
        let mut current = c.truncated_to(policy).principal_part();
        for _ in 0..32 {
            // transport to the V side
            let m_c = rebased.apply(&current.components)?;
            let on_v: Vec<MultiSeries> =
                m_c.iter().map(|s| transition.to_v(s)).collect::<Result<_, _>>()?;
            // keep only the V-principal part
            let principal_v: Vec<MultiSeries> =
                on_v.iter().map(|s| s.holomorphic_split().1).collect();
            // transport back
            let pulled: Vec<MultiSeries> =
                principal_v.iter().map(|s| transition.to_u(s)).collect::<Result<_, _>>()?;
            let back = matrix_apply(rank, &minv, &pulled, Chart::U, policy)?;
            let next = VectorCochain { components: back }.principal_part();
            if next.sub(&current)?.is_zero() {
                return Ok(next);
            }
            current = next;
        }
        Ok(current)
    }

    /// Classes of the base-window principal candidates modulo the
    /// coboundary span built at `span_policy`. Keeping the candidate set
    /// pinned to `candidate_policy` while the span window grows makes the
    /// stabilization comparison meaningful: a candidate near the window
    /// edge whose splitting needs slightly larger exponents stops showing
    /// up once the span covers them.
    fn h1_at(
        &mut self,
        span_policy: TruncationPolicy,
        candidate_policy: TruncationPolicy,
    ) -> Result<Vec<(usize, Exponent)>, CechError> {
        let rank = self.bundle.rank();
        self.span_at(span_policy, false)?;
        let span = self.untracked_spans.get(&policy_key(&span_policy)).unwrap();
        let mut picked = Vec::new();
        let mut class_space = Echelon::new(false);
        for e in window_exponents(&candidate_policy) {
            if e.z >= 0 {
                continue;
            }
            for comp in 0..rank {
                let mut v = SparseVec::new();
                v.insert(span.index.by_key[&(e, comp)], BigRational::one());
                let (residual, _) = span.echelon.reduce(&v);
                if residual.is_empty() {
                    continue;
                }
                let (_, fresh) = class_space.insert(residual);
                if fresh {
                    picked.push((comp, e));
                }
            }
        }
        Ok(picked)
    }

    /// Grow the span window until the picked candidate set survives two
    /// consecutive growths. Returns the picked set and the certified span
    /// window.
    fn h1_stabilize(
        &mut self,
        growth_cap: u32,
    ) -> Result<(Vec<(usize, Exponent)>, TruncationPolicy), CechError> {
        let base = self.bundle.policy();
        let mut span_w = base;
        let mut picked = self.h1_at(span_w, base)?;
        let mut agreements = 0u32;
        for _ in 0..=growth_cap {
            let grown = span_w.grow_z();
            let next = self.h1_at(grown, base)?;
            span_w = grown;
            if next == picked {
                agreements += 1;
                if agreements == 2 {
                    return Ok((picked, span_w));
                }
            } else {
                agreements = 0;
                picked = next;
            }
        }
        Err(CechError::WindowTooSmall {
            context: format!(
                "H^1 basis did not stabilize before z window [{}, {}]",
                span_w.z_min, span_w.z_max
            ),
        })
    }

    /// Stabilized H^1 dimension only: cheaper than [`Cohomology::h1_basis`]
    /// because no normal forms or growth patterns are computed.
    pub fn h1_dimension(&mut self, growth_cap: u32) -> Result<usize, CechError> {
        Ok(self.h1_stabilize(growth_cap)?.0.len())
    }

    /// Basis of H^1 within the window: enumerate principal monomial
    /// candidates, reduce them modulo the coboundary span, and echelonize.
    /// The span window grows until two consecutive growths leave the basis
    /// unchanged.
    pub fn h1_basis(&mut self, growth_cap: u32) -> Result<CohomologyBasis, CechError> {
        self.h1_basis_opt(growth_cap, true)
    }

    /// As [`Cohomology::h1_basis`], optionally skipping the growth-pattern
    /// scan over lower fiber caps.
    pub fn h1_basis_opt(
        &mut self,
        growth_cap: u32,
        detect_patterns: bool,
    ) -> Result<CohomologyBasis, CechError> {
        let base = self.bundle.policy();
        let (picked, span_w) = self.h1_stabilize(growth_cap)?;
        let rank = self.bundle.rank();
        let mut classes = Vec::new();
        for (comp, e) in &picked {
            let c = VectorCochain::monomial(rank, *comp, *e, BigRational::one(), span_w);
            let nf = self.reduce_representative_at(&c, span_w)?;
            classes.push(nf.truncated_to(base));
        }
        let family_pattern =
            if detect_patterns { self.detect_h1_pattern(base, span_w)? } else { None };
        Ok(CohomologyBasis { classes, certified_window: base, stabilized: true, family_pattern })
    }

    /// Run the candidate classes at three fiber caps over the certified
    /// span window; families whose class count rises with every cap are
    /// reported as growth patterns.
    fn detect_h1_pattern(
        &mut self,
        base: TruncationPolicy,
        span_w: TruncationPolicy,
    ) -> Result<Option<GrowthPattern>, CechError> {
        if base.u_deg_max < 2 {
            return Ok(None);
        }
        let caps = [base.u_deg_max - 2, base.u_deg_max - 1, base.u_deg_max];
        let mut dims = Vec::new();
        let mut signatures: Vec<BTreeMap<(usize, i32, u32), Vec<u32>>> = Vec::new();
        for cap in caps {
            let picked = self.h1_at(span_w.with_u_deg(cap), base.with_u_deg(cap))?;
            dims.push((cap, picked.len()));
            let mut sig: BTreeMap<(usize, i32, u32), Vec<u32>> = BTreeMap::new();
            for (comp, e) in picked {
                sig.entry((comp, e.z, e.u1)).or_default().push(e.u2);
            }
            signatures.push(sig);
        }
        let mut families = Vec::new();
        let last = &signatures[2];
        for (key, u2s) in last {
            let (comp, z, u1) = *key;
            // a family grows by one class per extra cap and always reaches
            // the current cap
            let counts: Vec<usize> = signatures
                .iter()
                .map(|s| s.get(key).map(|v| v.len()).unwrap_or(0))
                .collect();
            let reaches_cap = u2s.iter().max().copied() == Some(caps[2] - u1);
            if reaches_cap && counts[2] == counts[1] + 1 && counts[1] == counts[0] + 1 {
                let names = Chart::U.var_names();
                let mut desc = format!("component {}: ", comp + 1);
                if z != 0 {
                    desc.push_str(&format!("{}^{}*", names[0], z));
                }
                if u1 != 0 {
                    desc.push_str(&format!("{}^{}*", names[1], u1));
                }
                desc.push_str(&format!("{}^s", names[2]));
                families.push(desc);
            }
        }
        if families.is_empty() {
            Ok(None)
        } else {
            Ok(Some(GrowthPattern { families, dims_by_u_cap: dims }))
        }
    }

    /// Sections built from base-window unknowns, with the vanishing
    /// constraints assembled inside the (larger) span window so that no
    /// constraint is lost to truncation.
    fn h0_at(
        &mut self,
        span_policy: TruncationPolicy,
        base: TruncationPolicy,
        neighborhood: Option<u32>,
    ) -> Result<Vec<VectorCochain>, CechError> {
        let rank = self.bundle.rank();
        let rebased = self.rebased(span_policy)?;
        let transition = rebased.transition().clone();
        if let Err(e) = transition.inverse() {
            return Err(CechError::Geometry(e));
        }
        let u_cap = neighborhood.map_or(base.u_deg_max, |n| n.min(base.u_deg_max));
        let index = MonomialIndex::new(rank, &span_policy);
        // unknowns: U-holomorphic base-window monomials up to the
        // neighborhood order
        let mut unknowns = Vec::new();
        for e in window_exponents(&base) {
            if e.z < 0 || e.u_degree() > u_cap {
                continue;
            }
            for comp in 0..rank {
                unknowns.push((comp, e));
            }
        }
        // constraint columns: the V-principal part of the transported image
        let mut columns = Vec::with_capacity(unknowns.len());
        for (comp, e) in &unknowns {
            let cochain =
                VectorCochain::monomial(rank, *comp, *e, BigRational::one(), span_policy);
            let image = rebased.apply(&cochain.components)?;
            let mut constraint = VectorCochain::zero(rank, span_policy);
            for (row, entry) in image.iter().enumerate() {
                let on_v = transition.to_v(entry)?.truncate_u_total(u_cap);
                let (_, principal) = on_v.holomorphic_split();
                // index the V-side principal monomials as U-exponent keys;
                // only the vanishing of their coefficients matters
                constraint.components[row] = MultiSeries::from_terms(
                    Chart::U,
                    span_policy,
                    principal.terms().map(|(ex, c)| (*ex, c.clone())),
                );
            }
            columns.push(index.vectorize(&constraint));
        }
        let kernel = kernel_basis(&columns);
        let mut sections = Vec::new();
        for combo in kernel {
            let mut section = VectorCochain::zero(rank, base);
            for (j, coeff) in &combo {
                let (comp, e) = unknowns[*j];
                let m = MultiSeries::monomial(Chart::U, base, e, coeff.clone());
                section.components[comp] = section.components[comp].add(&m)?;
            }
            sections.push(section);
        }
        Ok(sections)
    }

    /// Basis of H^0: U-holomorphic vectors whose transported image is
    /// V-holomorphic, modulo fiber degree `neighborhood + 1` when a formal
    /// neighborhood order is given.
    pub fn h0_basis(
        &mut self,
        neighborhood: Option<u32>,
        growth_cap: u32,
    ) -> Result<CohomologyBasis, CechError> {
        let base = self.bundle.policy();
        let fingerprint = |sections: &[VectorCochain]| {
            let mut fp: Vec<String> = sections.iter().map(|s| s.to_string()).collect();
            fp.sort();
            fp
        };
        let mut span_w = base;
        let mut sections = self.h0_at(span_w, base, neighborhood)?;
        let mut fp = fingerprint(&sections);
        let mut agreements = 0u32;
        for _ in 0..=growth_cap {
            let grown = span_w.grow_z();
            let next = self.h0_at(grown, base, neighborhood)?;
            let fp_next = fingerprint(&next);
            span_w = grown;
            if fp_next == fp {
                agreements += 1;
                if agreements == 2 {
                    return Ok(CohomologyBasis {
                        classes: sections,
                        certified_window: base,
                        stabilized: true,
                        family_pattern: None,
                    });
                }
            } else {
                agreements = 0;
                sections = next;
                fp = fp_next;
            }
        }
        Err(CechError::WindowTooSmall {
            context: format!(
                "H^0 basis did not stabilize before z window [{}, {}]",
                span_w.z_min, span_w.z_max
            ),
        })
    }

    /// Does a section of the restriction to the N-th neighborhood exist
    /// whose fiber-degree-0 part equals `s0`?
    pub fn section_extends(
        &mut self,
        s0: &VectorCochain,
        neighborhood: u32,
    ) -> Result<bool, CechError> {
        let basis = self.h0_basis(Some(neighborhood), 4)?;
        // the degree-0 parts of sections span the extendable degree-0 data
        let policy = basis.certified_window;
        let index = MonomialIndex::new(self.bundle.rank(), &policy);
        let mut ech = Echelon::new(false);
        for s in &basis.classes {
            let deg0 = s.truncate_u_total(0).truncated_to(policy);
            let v = index.vectorize(&deg0);
            if !v.is_empty() {
                ech.insert(v);
            }
        }
        let target = index.vectorize(&s0.truncated_to(policy).truncate_u_total(0));
        Ok(ech.contains(&target))
    }
}

/// The monomial set that survives the two-sided holomorphy reduction for
/// the line bundle O(j1 - j2): principal candidates whose transported image
/// can still carry a principal term, decided by the mininal base exponent
/// of the inverse rules. Each survivor is returned as the extension cocycle
/// monomial p = z^{j2} sigma.
pub fn ext_generator_monomials(
    j1: i32,
    j2: i32,
    spec: &crate::geometry::ThreefoldSpec,
    policy: TruncationPolicy,
) -> Result<Vec<Exponent>, CechError> {
    let transition = crate::geometry::build_transition(spec, policy);
    let inv = transition.inverse().map_err(CechError::Geometry)?;
    let min_f1 = inv
        .image(crate::series::Var::Fiber1)
        .and_then(|s| s.min_z_exp())
        .unwrap_or(0);
    let min_f2 = inv
        .image(crate::series::Var::Fiber2)
        .and_then(|s| s.min_z_exp())
        .unwrap_or(0);
    let d = j1 - j2;
    let mut out = Vec::new();
    for e in window_exponents(&policy) {
        if e.z >= 0 {
            continue;
        }
        let l = -e.z; // sigma = z^{-l} u1^i u2^s with l >= 1
        let min_image_exp = l + d + (e.u1 as i32) * min_f1 + (e.u2 as i32) * min_f2;
        if min_image_exp < 0 {
            let p_z = e.z + j2;
            out.push(Exponent::new(p_z, e.u1, e.u2));
        }
    }
    Ok(out)
}

/// Ext^1(O(j2), O(j1)) through the twist isomorphism: compute H^1 of
/// O(j1 - j2) and rescale each class by z^{j2}.
pub struct ExtBasis {
    pub j1: i32,
    pub j2: i32,
    pub h1: CohomologyBasis,
    /// Extension cocycles p (U variables), one per class.
    pub cocycles: Vec<MultiSeries>,
    /// The reduction-stable monomial universe, before any echelonization.
    pub generator_monomials: Vec<Exponent>,
}

pub fn ext_group_basis(
    j1: i32,
    j2: i32,
    spec: &crate::geometry::ThreefoldSpec,
    policy: TruncationPolicy,
    growth_cap: u32,
) -> Result<ExtBasis, CechError> {
    let bundle = crate::geometry::line_bundle_transition(j1 - j2, spec, policy)?;
    let mut solver = Cohomology::new(&bundle);
    let h1 = solver.h1_basis(growth_cap)?;
    let twist = MultiSeries::monomial(
        Chart::U,
        policy,
        Exponent::new(j2, 0, 0),
        BigRational::one(),
    );
    let mut cocycles = Vec::new();
    for class in &h1.classes {
        cocycles.push(class.components[0].mul(&twist)?);
    }
    let generator_monomials = ext_generator_monomials(j1, j2, spec, policy)?;
    Ok(ExtBasis { j1, j2, h1, cocycles, generator_monomials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{line_bundle_transition, tangent_jacobian, ThreefoldSpec};
    use crate::series::rat;

    fn pol() -> TruncationPolicy {
        TruncationPolicy::new(6, -12, 12)
    }

    fn sigma(rank: usize, s: u32, policy: TruncationPolicy) -> VectorCochain {
        VectorCochain::monomial(rank, 1, Exponent::new(-1, 0, s), rat(1), policy)
    }

    #[test]
    fn u_holomorphic_cochains_reduce_to_zero() {
        let p = pol();
        let jac = tangent_jacobian(&ThreefoldSpec::w2_y(2, p), p).unwrap();
        let mut solver = Cohomology::new(&jac);
        let c = VectorCochain::monomial(3, 0, Exponent::new(2, 1, 1), rat(3), p);
        assert!(solver.reduce_representative(&c).unwrap().is_zero());
    }

    #[test]
    fn tangent_classes_of_w2_y_survive_reduction() {
        let p = pol();
        let jac = tangent_jacobian(&ThreefoldSpec::w2_y(3, p), p).unwrap();
        let mut solver = Cohomology::new(&jac);
        // sigma_s = [0, z^-1 u2^s, 0] is its own normal form
        let c = sigma(3, 1, p);
        let red = solver.reduce_representative(&c).unwrap();
        assert_eq!(red, c);
        // reduction is idempotent
        assert_eq!(solver.reduce_representative(&red).unwrap(), red);
        // a representative in other components dies
        let c = VectorCochain::monomial(3, 0, Exponent::new(-1, 0, 0), rat(1), p);
        assert!(solver.reduce_representative(&c).unwrap().is_zero());
    }

    #[test]
    fn coboundary_cases_of_the_w2_y_family() {
        let p = pol();
        let y = 3u32;
        let jac = tangent_jacobian(&ThreefoldSpec::w2_y(y, p), p).unwrap();
        let mut solver = Cohomology::new(&jac);
        // s >= y - 1: coboundary
        for s in [2u32, 3, 4] {
            let d = solver.is_coboundary(&sigma(3, s, p), 4).unwrap();
            assert!(d.is_coboundary(), "sigma_{s} should be a coboundary for y = {y}");
        }
        // s <= y - 2: obstruction on the monomial z^-1 u2^s itself
        for s in [0u32, 1] {
            match solver.is_coboundary(&sigma(3, s, p), 4).unwrap() {
                CoboundaryDecision::NotCoboundary(obs) => {
                    assert_eq!(obs.component, 1);
                    assert_eq!(obs.exponent, Exponent::new(-1, 0, s));
                }
                CoboundaryDecision::Coboundary(_) => panic!("sigma_{s} must not split"),
            }
        }
    }

    #[test]
    fn witness_recomposition_is_exact() {
        let p = pol();
        let y = 3u32;
        let jac = tangent_jacobian(&ThreefoldSpec::w2_y(y, p), p).unwrap();
        let mut solver = Cohomology::new(&jac);
        let c = sigma(3, 3, p);
        match solver.is_coboundary(&c, 4).unwrap() {
            CoboundaryDecision::Coboundary(w) => {
                assert!(w.alpha.is_u_holomorphic());
                assert!(w.beta.iter().all(|b| b.is_holomorphic()));
                let back = solver.recompose(&w, p).unwrap();
                assert_eq!(back.sub(&c).unwrap(), VectorCochain::zero(3, p));
            }
            CoboundaryDecision::NotCoboundary(_) => panic!("expected a witness"),
        }
    }

    #[test]
    fn h1_of_tangent_w1_vanishes() {
        let p = pol();
        let jac = tangent_jacobian(&ThreefoldSpec::w(1), p).unwrap();
        let mut solver = Cohomology::new(&jac);
        let basis = solver.h1_basis(4).unwrap();
        assert_eq!(basis.dimension(), 0);
        assert!(basis.stabilized);
    }

    #[test]
    fn h1_of_tangent_w2_y_has_dimension_y_minus_one() {
        let p = pol();
        for y in [0u32, 1, 2, 4] {
            let jac = tangent_jacobian(&ThreefoldSpec::w2_y(y, p), p).unwrap();
            let mut solver = Cohomology::new(&jac);
            let basis = solver.h1_basis(4).unwrap();
            let expected = (y as usize).saturating_sub(1);
            assert_eq!(basis.dimension(), expected, "y = {y}");
            for (s, class) in basis.classes.iter().enumerate() {
                assert_eq!(*class, sigma(3, s as u32, p), "basis class sigma_{s}");
            }
        }
    }

    #[test]
    fn h1_of_tangent_w2_reports_a_growth_pattern() {
        let p = pol();
        let jac = tangent_jacobian(&ThreefoldSpec::w(2), p).unwrap();
        let mut solver = Cohomology::new(&jac);
        let basis = solver.h1_basis(4).unwrap();
        let pattern = basis.family_pattern.expect("growing family");
        assert_eq!(pattern.families, vec!["component 2: z^-1*u2^s".to_string()]);
        let dims: Vec<usize> = pattern.dims_by_u_cap.iter().map(|(_, d)| *d).collect();
        assert_eq!(dims, vec![5, 6, 7]);
    }

    #[test]
    fn h0_of_line_bundles_on_the_zero_neighborhood() {
        let p = pol();
        let spec = ThreefoldSpec::w(2);
        for (d, expected) in [(0i32, 1usize), (2, 3), (5, 6), (-1, 0), (-3, 0)] {
            let b = line_bundle_transition(d, &spec, p).unwrap();
            let mut solver = Cohomology::new(&b);
            let basis = solver.h0_basis(Some(0), 4).unwrap();
            assert_eq!(basis.dimension(), expected, "O({d}) on the line");
        }
    }

    #[test]
    fn ext_generator_monomials_for_j_two() {
        // Ext^1(O(2), O(-2)) over the tau = u2 deformation: the six families
        // z u2^s, u2^s, z^-1 u2^s, z u1 u2^s, u1 u2^s, z u1^2 u2^s
        let p = TruncationPolicy::new(3, -6, 6);
        let spec = ThreefoldSpec::w2_tau(&[(1, rat(1))], p);
        let got = ext_generator_monomials(-2, 2, &spec, p).unwrap();
        let mut expected = Vec::new();
        for s in 0..=3u32 {
            expected.push(Exponent::new(1, 0, s));
            expected.push(Exponent::new(0, 0, s));
            expected.push(Exponent::new(-1, 0, s));
            if s <= 2 {
                expected.push(Exponent::new(1, 1, s));
                expected.push(Exponent::new(0, 1, s));
            }
            if s <= 1 {
                expected.push(Exponent::new(1, 2, s));
            }
        }
        let sort = |mut v: Vec<Exponent>| {
            v.sort();
            v
        };
        assert_eq!(sort(got), sort(expected));
    }

    #[test]
    fn h1_trivial_bundle_small_k() {
        let p = pol();
        for k in [1i32, 2] {
            let b = line_bundle_transition(0, &ThreefoldSpec::w(k), p).unwrap();
            let mut solver = Cohomology::new(&b);
            assert_eq!(solver.h1_basis(4).unwrap().dimension(), 0, "O on W_{k}");
        }
    }

    #[test]
    fn h1_trivial_bundle_w3_is_not_zero() {
        // Functions on W_3 = Tot(O(-3) + O(1)) decompose along fiber
        // monomials u1^i u2^s as sections of O(3i - s); H^1 picks up the
        // summands of degree <= -2, the first being u2^2.
        let p = pol();
        let b = line_bundle_transition(0, &ThreefoldSpec::w(3), p).unwrap();
        let mut solver = Cohomology::new(&b);
        let basis = solver.h1_basis(4).unwrap();
        assert!(basis.dimension() > 0);
        let rendered: Vec<String> = basis.classes.iter().map(|c| c.to_string()).collect();
        assert!(rendered.contains(&"[z^-1*u2^2]".to_string()));
    }
}
