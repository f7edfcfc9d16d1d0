//! Threefolds as two-chart gluing data, their transitions and bundles.
//!
//! A [`ThreefoldSpec`] records the integers (k1, k2) and perturbation series
//! of the gluing rule
//!
//! ```text
//! (xi, v1, v2) = (z^-1, z^k1 u1 + P1, z^k2 u2 + P2).
//! ```
//!
//! With no perturbations and (k1, k2) = (k, -k+2) this is the Calabi-Yau
//! threefold W_k, the total space of O(-k) + O(k-2) over the line. Building
//! a [`Transition`] computes the inverse rules exactly when they exist;
//! Jacobians and bundle transition matrices are derived symbolically from
//! the forward rules, never written out by hand.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_rational::BigRational;
use num_traits::One;

use crate::series::{
    Chart, Exponent, MultiSeries, SeriesError, SubstRules, TruncationPolicy, Var,
};

/// Which forward rule a perturbation is added to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Slot {
    V1,
    V2,
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::V1 => write!(f, "v1"),
            Slot::V2 => write!(f, "v2"),
        }
    }
}

/// Two-chart gluing data for a threefold fibered over the line.
#[derive(Clone, Debug, PartialEq)]
pub struct ThreefoldSpec {
    pub k1: i32,
    pub k2: i32,
    /// Perturbation series in U-chart variables, added to the named slot.
    pub perturbations: Vec<(Slot, MultiSeries)>,
}

impl ThreefoldSpec {
    /// W_k = Tot(O(-k) + O(k-2)).
    pub fn w(k: i32) -> Self {
        ThreefoldSpec { k1: k, k2: 2 - k, perturbations: Vec::new() }
    }

    /// Tot(O(-k1) + O(-k2)) with the exponent pair stored directly.
    pub fn w_pair(k1: i32, k2: i32) -> Self {
        ThreefoldSpec { k1, k2, perturbations: Vec::new() }
    }

    pub fn with_perturbation(mut self, slot: Slot, p: MultiSeries) -> Self {
        assert_eq!(p.chart(), Chart::U, "perturbations are stored in U variables");
        if !p.is_zero() {
            self.perturbations.push((slot, p));
        }
        self
    }

    /// The deformation of W_2 with rule v1 = z^2 u1 + z tau(u2).
    pub fn w2_tau(tau_coeffs: &[(u32, BigRational)], policy: TruncationPolicy) -> Self {
        let pert = MultiSeries::from_terms(
            Chart::U,
            policy,
            tau_coeffs.iter().map(|(s, c)| (Exponent::new(1, 0, *s), c.clone())),
        );
        ThreefoldSpec::w(2).with_perturbation(Slot::V1, pert)
    }

    /// The deformation W_2(y) given by v1 = z^2 u1 + z u2^y.
    pub fn w2_y(y: u32, policy: TruncationPolicy) -> Self {
        ThreefoldSpec::w2_tau(&[(y, BigRational::one())], policy)
    }

    fn slot_sum(&self, slot: Slot, policy: TruncationPolicy) -> MultiSeries {
        let mut acc = MultiSeries::zero(Chart::U, policy);
        for (s, p) in &self.perturbations {
            if *s == slot {
                acc = acc.add(&p.truncated_to(policy)).expect("same chart");
            }
        }
        acc
    }

    /// Forward rule values (xi, v1, v2) as U-chart series.
    pub fn forward_values(&self, policy: TruncationPolicy) -> [MultiSeries; 3] {
        let one = BigRational::one;
        let xi = MultiSeries::monomial(Chart::U, policy, Exponent::new(-1, 0, 0), one());
        let v1 = MultiSeries::monomial(Chart::U, policy, Exponent::new(self.k1, 1, 0), one())
            .add(&self.slot_sum(Slot::V1, policy))
            .expect("same chart");
        let v2 = MultiSeries::monomial(Chart::U, policy, Exponent::new(self.k2, 0, 1), one())
            .add(&self.slot_sum(Slot::V2, policy))
            .expect("same chart");
        [xi, v1, v2]
    }

    /// All perturbations vanish on the zero section, so the line z-axis
    /// survives into the glued space.
    pub fn preserves_line(&self) -> bool {
        self.perturbations.iter().all(|(_, p)| p.u_degree_zero_part().is_zero())
    }
}

/// Inverse rules of a transition, or the reason none exist.
#[derive(Clone, Debug, PartialEq)]
pub enum InverseRules {
    Rules(SubstRules),
    NotInvertible { reason: String },
}

/// The transition of a [`ThreefoldSpec`]: substitution rules in both
/// directions. `v_to_u` rewrites V-chart series in U variables (it stores
/// the forward values of xi, v1, v2); `u_to_v` is the exact inverse when
/// one exists.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub v_to_u: SubstRules,
    pub u_to_v: InverseRules,
}

impl Transition {
    pub fn inverse(&self) -> Result<&SubstRules, GeometryError> {
        match &self.u_to_v {
            InverseRules::Rules(r) => Ok(r),
            InverseRules::NotInvertible { reason } => {
                Err(GeometryError::NotInvertible(reason.clone()))
            }
        }
    }

    pub fn is_invertible(&self) -> bool {
        matches!(self.u_to_v, InverseRules::Rules(_))
    }

    /// Rewrite a V-chart series to U variables.
    pub fn to_u(&self, s: &MultiSeries) -> Result<MultiSeries, SeriesError> {
        debug_assert_eq!(s.chart(), Chart::V);
        s.substitute(&self.v_to_u)
    }

    /// Rewrite a U-chart series to V variables.
    pub fn to_v(&self, s: &MultiSeries) -> Result<MultiSeries, GeometryError> {
        debug_assert_eq!(s.chart(), Chart::U);
        Ok(s.substitute(self.inverse()?)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GeometryError {
    Series(SeriesError),
    /// The transition has no inverse rules.
    NotInvertible(String),
    /// A bundle matrix whose determinant is not a unit in the window.
    NonUnitDeterminant(String),
    /// Matrix inversion failed.
    InversionFailure(String),
    /// The zero section is not preserved by the transition.
    LineNotPreserved(String),
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::Series(e) => write!(f, "{e}"),
            GeometryError::NotInvertible(r) => write!(f, "transition not invertible: {r}"),
            GeometryError::NonUnitDeterminant(r) => write!(f, "determinant is not a unit: {r}"),
            GeometryError::InversionFailure(r) => write!(f, "matrix inversion failed: {r}"),
            GeometryError::LineNotPreserved(r) => write!(f, "zero section not preserved: {r}"),
        }
    }
}

impl core::error::Error for GeometryError {}

impl From<SeriesError> for GeometryError {
    fn from(e: SeriesError) -> Self {
        GeometryError::Series(e)
    }
}

/// Build the transition of a spec: forward rules always, inverse rules by
/// exact solving. Solving succeeds iff no perturbed slot depends on its own
/// fiber variable and the two slots do not depend on each other circularly.
pub fn build_transition(spec: &ThreefoldSpec, policy: TruncationPolicy) -> Transition {
    let forward = spec.forward_values(policy);
    let v_to_u = SubstRules::new(Chart::U, forward[0].clone(), forward[1].clone(), forward[2].clone());

    let p1 = spec.slot_sum(Slot::V1, policy);
    let p2 = spec.slot_sum(Slot::V2, policy);

    let fail = |reason: String| Transition {
        v_to_u: v_to_u.clone(),
        u_to_v: InverseRules::NotInvertible { reason },
    };

    if p1.depends_on(Var::Fiber1) {
        return fail("v1 perturbation depends on u1".to_string());
    }
    if p2.depends_on(Var::Fiber2) {
        return fail("v2 perturbation depends on u2".to_string());
    }
    if p1.depends_on(Var::Fiber2) && p2.depends_on(Var::Fiber1) {
        return fail("v1 and v2 perturbations depend on each other's fiber variable".to_string());
    }

    let one = BigRational::one;
    let z_img = MultiSeries::monomial(Chart::V, policy, Exponent::new(-1, 0, 0), one());
    let v1_var = MultiSeries::var(Chart::V, policy, Var::Fiber1);
    let v2_var = MultiSeries::var(Chart::V, policy, Var::Fiber2);
    let xi_pow = |k: i32| MultiSeries::monomial(Chart::V, policy, Exponent::new(k, 0, 0), one());

    // u_i = xi^{k_i} (v_i - P_i), with P_i rewritten through the rules solved
    // so far. Solve the slot that does not involve the other fiber first.
    let solve = |p: &MultiSeries, partial: &SubstRules| -> Result<MultiSeries, SeriesError> {
        p.substitute(partial)
    };

    let (u1_img, u2_img) = if !p2.depends_on(Var::Fiber1) {
        let rules0 = SubstRules::partial(Chart::V, [Some(z_img.clone()), None, None]);
        let p2v = match solve(&p2, &rules0) {
            Ok(s) => s,
            Err(e) => return fail(e.to_string()),
        };
        let u2 = v2_var.sub(&p2v).expect("same chart").mul(&xi_pow(spec.k2)).expect("same chart");
        let rules1 =
            SubstRules::partial(Chart::V, [Some(z_img.clone()), None, Some(u2.clone())]);
        let p1v = match solve(&p1, &rules1) {
            Ok(s) => s,
            Err(e) => return fail(e.to_string()),
        };
        let u1 = v1_var.sub(&p1v).expect("same chart").mul(&xi_pow(spec.k1)).expect("same chart");
        (u1, u2)
    } else {
        let rules0 = SubstRules::partial(Chart::V, [Some(z_img.clone()), None, None]);
        let p1v = match solve(&p1, &rules0) {
            Ok(s) => s,
            Err(e) => return fail(e.to_string()),
        };
        let u1 = v1_var.sub(&p1v).expect("same chart").mul(&xi_pow(spec.k1)).expect("same chart");
        let rules1 =
            SubstRules::partial(Chart::V, [Some(z_img.clone()), Some(u1.clone()), None]);
        let p2v = match solve(&p2, &rules1) {
            Ok(s) => s,
            Err(e) => return fail(e.to_string()),
        };
        let u2 = v2_var.sub(&p2v).expect("same chart").mul(&xi_pow(spec.k2)).expect("same chart");
        (u1, u2)
    };

    Transition {
        v_to_u,
        u_to_v: InverseRules::Rules(SubstRules::new(Chart::V, z_img, u1_img, u2_img)),
    }
}

/// A vector bundle presented by its transition matrix in U variables.
/// The determinant is checked to be a unit at construction.
#[derive(Clone, Debug)]
pub struct BundleTransition {
    rank: usize,
    /// Row-major rank x rank entries.
    entries: Vec<MultiSeries>,
    spec: ThreefoldSpec,
    transition: Transition,
    policy: TruncationPolicy,
}

impl BundleTransition {
    pub fn new(
        rank: usize,
        entries: Vec<MultiSeries>,
        spec: ThreefoldSpec,
        policy: TruncationPolicy,
    ) -> Result<Self, GeometryError> {
        assert_eq!(entries.len(), rank * rank);
        let det = matrix_det(rank, &entries, Chart::U, policy);
        if !det.is_unit() {
            return Err(GeometryError::NonUnitDeterminant(format!(
                "det = {det} within the window"
            )));
        }
        let transition = build_transition(&spec, policy);
        Ok(BundleTransition { rank, entries, spec, transition, policy })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn entry(&self, row: usize, col: usize) -> &MultiSeries {
        &self.entries[row * self.rank + col]
    }

    pub fn entries(&self) -> &[MultiSeries] {
        &self.entries
    }

    pub fn spec(&self) -> &ThreefoldSpec {
        &self.spec
    }

    pub fn transition(&self) -> &Transition {
        &self.transition
    }

    pub fn policy(&self) -> TruncationPolicy {
        self.policy
    }

    pub fn det(&self) -> MultiSeries {
        matrix_det(self.rank, &self.entries, Chart::U, self.policy)
    }

    /// M applied to a component vector (U variables).
    pub fn apply(&self, v: &[MultiSeries]) -> Result<Vec<MultiSeries>, SeriesError> {
        assert_eq!(v.len(), self.rank);
        matrix_apply(self.rank, &self.entries, v, Chart::U, self.policy)
    }

    /// The inverse matrix within the window, via the fiber-degree grading:
    /// M = M0 + N with N of positive fiber degree, so M^-1 is a terminating
    /// geometric series around the Laurent-monomial part M0.
    pub fn inverse_entries(&self) -> Result<Vec<MultiSeries>, GeometryError> {
        matrix_inverse(self.rank, &self.entries, Chart::U, self.policy)
    }

    /// Rebase the same matrix onto a different window.
    pub fn with_policy(&self, policy: TruncationPolicy) -> Result<Self, GeometryError> {
        // Entries were constructed inside the old window; re-truncating to a
        // larger one cannot recover lost terms, so rebuild from the exact
        // entry data (entries are finite and stored exactly).
        let entries = self.entries.iter().map(|e| e.truncated_to(policy)).collect();
        BundleTransition::new(self.rank, entries, self.spec.clone(), policy)
    }
}

/// The 3x3 transition matrix of the tangent bundle: partial derivatives of
/// the forward rules with respect to (z, u1, u2), in U variables.
pub fn tangent_jacobian(
    spec: &ThreefoldSpec,
    policy: TruncationPolicy,
) -> Result<BundleTransition, GeometryError> {
    let forward = spec.forward_values(policy);
    let mut entries = Vec::with_capacity(9);
    for value in &forward {
        for var in Var::ALL {
            entries.push(value.partial(var));
        }
    }
    BundleTransition::new(3, entries, spec.clone(), policy)
}

/// An extension of O(j) by O(-j) presented by its upper-triangular cocycle.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtensionClass {
    pub j: i32,
    /// Extension cocycle in U variables.
    pub p: MultiSeries,
}

impl ExtensionClass {
    pub fn new(j: i32, p: MultiSeries) -> Self {
        assert!(j >= 0, "splitting type is nonnegative");
        assert_eq!(p.chart(), Chart::U);
        ExtensionClass { j, p }
    }

    /// Every term linear in the fiber variables?
    pub fn is_first_order(&self) -> bool {
        !self.p.is_zero() && self.p.terms().all(|(e, _)| e.u_degree() == 1)
    }
}

/// The 2x2 matrix [[z^j, p], [0, z^-j]].
pub fn extension_to_transition(
    ext: &ExtensionClass,
    spec: &ThreefoldSpec,
    policy: TruncationPolicy,
) -> Result<BundleTransition, GeometryError> {
    let one = BigRational::one;
    let entries = vec![
        MultiSeries::monomial(Chart::U, policy, Exponent::new(ext.j, 0, 0), one()),
        ext.p.truncated_to(policy),
        MultiSeries::zero(Chart::U, policy),
        MultiSeries::monomial(Chart::U, policy, Exponent::new(-ext.j, 0, 0), one()),
    ];
    BundleTransition::new(2, entries, spec.clone(), policy)
}

/// O(d) as the 1x1 matrix [z^-d].
pub fn line_bundle_transition(
    d: i32,
    spec: &ThreefoldSpec,
    policy: TruncationPolicy,
) -> Result<BundleTransition, GeometryError> {
    let entries = vec![MultiSeries::monomial(
        Chart::U,
        policy,
        Exponent::new(-d, 0, 0),
        BigRational::one(),
    )];
    BundleTransition::new(1, entries, spec.clone(), policy)
}

/// End(E) as a rank^2 transition acting on row-major vectorized
/// endomorphisms: g maps to M g M^-1, i.e. the matrix with entries
/// N[(a,b),(c,d)] = M[a,c] * (M^-1)[d,b].
pub fn endomorphism_transition(b: &BundleTransition) -> Result<BundleTransition, GeometryError> {
    let r = b.rank();
    let minv = b.inverse_entries()?;
    let mut entries = Vec::with_capacity(r * r * r * r);
    for a in 0..r {
        for bb in 0..r {
            for c in 0..r {
                for d in 0..r {
                    let m_ac = b.entry(a, c);
                    let minv_db = &minv[d * r + bb];
                    entries.push(m_ac.mul(minv_db)?);
                }
            }
        }
    }
    BundleTransition::new(r * r, entries, b.spec().clone(), b.policy())
}

/// Splitting degrees of the conormal bundle of the zero section: restrict
/// the inverse transpose of the Jacobian's fiber block to u = 0 and
/// diagonalize the resulting 2x2 Laurent matrix.
pub fn conormal_on_line(
    spec: &ThreefoldSpec,
    policy: TruncationPolicy,
) -> Result<(i32, i32), GeometryError> {
    if !spec.preserves_line() {
        return Err(GeometryError::LineNotPreserved(
            "a perturbation has a fiber-degree-0 term".to_string(),
        ));
    }
    let jac = tangent_jacobian(spec, policy)?;
    // Fiber block on the line.
    let b11 = jac.entry(1, 1).restrict_to_line();
    let b12 = jac.entry(1, 2).restrict_to_line();
    let b21 = jac.entry(2, 1).restrict_to_line();
    let b22 = jac.entry(2, 2).restrict_to_line();
    let det = b11.mul(&b22)?.sub(&b12.mul(&b21)?)?;
    let det_inv = det
        .invert()
        .map_err(|e| GeometryError::InversionFailure(e.to_string()))?;
    // (B^T)^{-1} = adj(B^T) / det(B) = [[b22, -b21], [-b12, b11]] / det.
    let c = [
        b22.mul(&det_inv)?,
        b21.neg().mul(&det_inv)?,
        b12.neg().mul(&det_inv)?,
        b11.mul(&det_inv)?,
    ];
    let (e1, e2) = crate::bundles::splitting_exponents_2x2(&c, policy)
        .map_err(GeometryError::InversionFailure)?;
    // transition z^e corresponds to O(-e); report degrees sorted descending
    let (d1, d2) = (-e2, -e1);
    Ok(if d1 >= d2 { (d1, d2) } else { (d2, d1) })
}

// ---- matrix helpers over MultiSeries ----

pub(crate) fn matrix_apply(
    rank: usize,
    m: &[MultiSeries],
    v: &[MultiSeries],
    chart: Chart,
    policy: TruncationPolicy,
) -> Result<Vec<MultiSeries>, SeriesError> {
    let mut out = Vec::with_capacity(rank);
    for row in 0..rank {
        let mut acc = MultiSeries::zero(chart, policy);
        for col in 0..rank {
            acc = acc.add(&m[row * rank + col].mul(&v[col])?)?;
        }
        out.push(acc);
    }
    Ok(out)
}

pub(crate) fn matrix_mul(
    rank: usize,
    a: &[MultiSeries],
    b: &[MultiSeries],
    chart: Chart,
    policy: TruncationPolicy,
) -> Result<Vec<MultiSeries>, SeriesError> {
    let mut out = Vec::with_capacity(rank * rank);
    for i in 0..rank {
        for j in 0..rank {
            let mut acc = MultiSeries::zero(chart, policy);
            for k in 0..rank {
                acc = acc.add(&a[i * rank + k].mul(&b[k * rank + j])?)?;
            }
            out.push(acc);
        }
    }
    Ok(out)
}

/// Determinant by dynamic programming over column subsets; fine up to the
/// rank-9 endomorphism matrices.
pub(crate) fn matrix_det(
    rank: usize,
    m: &[MultiSeries],
    chart: Chart,
    policy: TruncationPolicy,
) -> MultiSeries {
    let full = 1usize << rank;
    let mut dp: Vec<Option<MultiSeries>> = vec![None; full];
    dp[0] = Some(MultiSeries::one(chart, policy));
    for mask in 0..full {
        let Some(current) = dp[mask].clone() else { continue };
        if current.is_zero() && mask != 0 {
            continue;
        }
        let row = (mask as u32).count_ones() as usize;
        if row == rank {
            continue;
        }
        for col in 0..rank {
            if mask & (1 << col) != 0 {
                continue;
            }
            let entry = &m[row * rank + col];
            if entry.is_zero() {
                continue;
            }
            // parity of inversions introduced by assigning `col` after the
            // columns already used above it
            let higher = mask >> (col + 1);
            let sign_neg = (higher as u32).count_ones() % 2 == 1;
            let mut term = current.mul(entry).expect("same chart");
            if sign_neg {
                term = term.neg();
            }
            let slot = mask | (1 << col);
            dp[slot] = Some(match dp[slot].take() {
                Some(acc) => acc.add(&term).expect("same chart"),
                None => term,
            });
        }
    }
    dp[full - 1].take().unwrap_or_else(|| MultiSeries::zero(chart, policy))
}

/// Inverse of a matrix whose determinant is a unit in the window, by the
/// fiber-degree splitting M = M0 + N described on [`BundleTransition::inverse_entries`].
pub(crate) fn matrix_inverse(
    rank: usize,
    m: &[MultiSeries],
    chart: Chart,
    policy: TruncationPolicy,
) -> Result<Vec<MultiSeries>, GeometryError> {
    let m0: Vec<MultiSeries> = m.iter().map(|e| e.u_degree_zero_part()).collect();
    let det0 = matrix_det(rank, &m0, chart, policy);
    let det0_inv = det0.invert().map_err(|_| {
        GeometryError::InversionFailure(format!(
            "fiber-degree-0 determinant {det0} is not a unit monomial"
        ))
    })?;
    // adjugate of M0
    let mut m0_inv = Vec::with_capacity(rank * rank);
    for i in 0..rank {
        for j in 0..rank {
            // cofactor C_ji: delete row j, column i
            let mut minor = Vec::with_capacity((rank - 1) * (rank - 1));
            for r in 0..rank {
                if r == j {
                    continue;
                }
                for c in 0..rank {
                    if c == i {
                        continue;
                    }
                    minor.push(m0[r * rank + c].clone());
                }
            }
            let mut cof = if rank == 1 {
                MultiSeries::one(chart, policy)
            } else {
                matrix_det(rank - 1, &minor, chart, policy)
            };
            if (i + j) % 2 == 1 {
                cof = cof.neg();
            }
            m0_inv.push(cof.mul(&det0_inv)?);
        }
    }
    // P = -M0^-1 N, then M^-1 = (sum_t P^t) M0^-1
    let mut n = Vec::with_capacity(rank * rank);
    for (full, low) in m.iter().zip(&m0) {
        n.push(full.sub(low)?);
    }
    let p = matrix_mul(rank, &m0_inv, &n, chart, policy)?
        .into_iter()
        .map(|e| e.neg())
        .collect::<Vec<_>>();
    let mut acc = m0_inv.clone();
    let mut power = m0_inv;
    for _ in 0..policy.u_deg_max {
        power = matrix_mul(rank, &p, &power, chart, policy)?;
        if power.iter().all(|e| e.is_zero()) {
            break;
        }
        for (a, t) in acc.iter_mut().zip(&power) {
            *a = a.add(t)?;
        }
    }
    Ok(acc)
}

#[cfg(test)]
pub(crate) fn matrix_identity(rank: usize, chart: Chart, policy: TruncationPolicy) -> Vec<MultiSeries> {
    let mut out = Vec::with_capacity(rank * rank);
    for i in 0..rank {
        for j in 0..rank {
            if i == j {
                out.push(MultiSeries::one(chart, policy));
            } else {
                out.push(MultiSeries::zero(chart, policy));
            }
        }
    }
    out
}

pub(crate) fn matrices_equal_mod_window(a: &[MultiSeries], b: &[MultiSeries]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| x.sub(y).map(|d| d.is_zero()).unwrap_or(false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{rat, ratio};

    fn pol() -> TruncationPolicy {
        TruncationPolicy::new(6, -12, 12)
    }

    #[test]
    fn w2_y_forward_and_inverse_rules() {
        let p = pol();
        let spec = ThreefoldSpec::w2_y(3, p);
        let t = build_transition(&spec, p);
        let [xi, v1, v2] = spec.forward_values(p);
        assert_eq!(xi.to_string(), "z^-1");
        assert_eq!(v1.to_string(), "z^2*u1 + z*u2^3");
        assert_eq!(v2.to_string(), "u2");
        let inv = t.inverse().unwrap();
        assert_eq!(inv.image(Var::Base).unwrap().to_string(), "xi^-1");
        assert_eq!(inv.image(Var::Fiber1).unwrap().to_string(), "xi^2*v1 - xi*v2^3");
        assert_eq!(inv.image(Var::Fiber2).unwrap().to_string(), "v2");
    }

    #[test]
    fn perturbation_on_own_fiber_is_not_invertible() {
        let p = pol();
        // z^l u1^i u2^s with i >= 1 in the v1 slot
        let pert = MultiSeries::monomial(Chart::U, p, Exponent::new(-2, 1, 1), rat(1));
        let spec = ThreefoldSpec::w(3).with_perturbation(Slot::V1, pert);
        let t = build_transition(&spec, p);
        assert!(!t.is_invertible());

        // z^l u1^i u2^s with s >= 1 in the v2 slot
        let pert = MultiSeries::monomial(Chart::U, p, Exponent::new(-1, 0, 2), rat(1));
        let spec = ThreefoldSpec::w(3).with_perturbation(Slot::V2, pert);
        assert!(!build_transition(&spec, p).is_invertible());

        // circular cross dependence
        let spec = ThreefoldSpec::w(3)
            .with_perturbation(Slot::V1, MultiSeries::monomial(Chart::U, p, Exponent::new(1, 0, 1), rat(1)))
            .with_perturbation(Slot::V2, MultiSeries::monomial(Chart::U, p, Exponent::new(1, 1, 0), rat(1)));
        assert!(!build_transition(&spec, p).is_invertible());
    }

    #[test]
    fn cross_dependence_in_one_direction_solves() {
        let p = pol();
        // v1 perturbed by a u2 term only: solvable, u2 first
        let spec = ThreefoldSpec::w(3)
            .with_perturbation(Slot::V1, MultiSeries::monomial(Chart::U, p, Exponent::new(-1, 0, 2), rat(1)));
        let t = build_transition(&spec, p);
        assert!(t.is_invertible());
        round_trip_ok(&spec, p);

        // v2 perturbed by a u1 term only: solvable, u1 first
        let spec = ThreefoldSpec::w(3)
            .with_perturbation(Slot::V2, MultiSeries::monomial(Chart::U, p, Exponent::new(-2, 2, 0), rat(1)));
        let t = build_transition(&spec, p);
        assert!(t.is_invertible());
        round_trip_ok(&spec, p);
    }

    fn round_trip_ok(spec: &ThreefoldSpec, p: TruncationPolicy) {
        let t = build_transition(spec, p);
        let inv = t.inverse().unwrap();
        for var in Var::ALL {
            let x = MultiSeries::var(Chart::U, p, var);
            let there = x.substitute(inv).unwrap();
            let back = there.substitute(&t.v_to_u).unwrap();
            assert_eq!(back.sub(&x).unwrap().truncate_u_total(p.u_deg_max - 2), {
                MultiSeries::zero(Chart::U, p)
            });
        }
    }

    #[test]
    fn w2_y_round_trip() {
        let p = pol();
        round_trip_ok(&ThreefoldSpec::w2_y(2, p), p);
        round_trip_ok(&ThreefoldSpec::w(3), p);
    }

    #[test]
    fn tangent_jacobian_of_w2_y() {
        let p = pol();
        let y = 4u32;
        let spec = ThreefoldSpec::w2_y(y, p);
        let jac = tangent_jacobian(&spec, p).unwrap();
        assert_eq!(jac.entry(0, 0).to_string(), "-z^-2");
        assert_eq!(jac.entry(0, 1).to_string(), "0");
        assert_eq!(jac.entry(0, 2).to_string(), "0");
        assert_eq!(jac.entry(1, 0).to_string(), "2*z*u1 + u2^4");
        assert_eq!(jac.entry(1, 1).to_string(), "z^2");
        assert_eq!(jac.entry(1, 2).to_string(), "4*z*u2^3");
        assert_eq!(jac.entry(2, 0).to_string(), "0");
        assert_eq!(jac.entry(2, 1).to_string(), "0");
        assert_eq!(jac.entry(2, 2).to_string(), "1");
    }

    #[test]
    fn tangent_jacobian_of_w3() {
        // hand-differentiated from (z^-1, z^3 u1, z^-1 u2)
        let p = pol();
        let jac = tangent_jacobian(&ThreefoldSpec::w(3), p).unwrap();
        let expect = [
            "-z^-2", "0", "0",
            "3*z^2*u1", "z^3", "0",
            "-z^-2*u2", "0", "z^-1",
        ];
        for (idx, want) in expect.iter().enumerate() {
            assert_eq!(jac.entries()[idx].to_string(), *want, "entry {idx}");
        }
    }

    #[test]
    fn zero_twist_slot_gives_identity_row() {
        let p = pol();
        let jac = tangent_jacobian(&ThreefoldSpec::w_pair(1, 0), p).unwrap();
        assert_eq!(jac.entry(2, 0).to_string(), "0");
        assert_eq!(jac.entry(2, 1).to_string(), "0");
        assert_eq!(jac.entry(2, 2).to_string(), "1");
    }

    #[test]
    fn extension_matrices_and_unit_determinant() {
        let p = pol();
        let spec = ThreefoldSpec::w2_tau(&[(1, rat(1))], p);
        let e1 = ExtensionClass::new(2, MultiSeries::monomial(Chart::U, p, Exponent::new(1, 1, 0), rat(1)));
        let m = extension_to_transition(&e1, &spec, p).unwrap();
        assert_eq!(m.entry(0, 0).to_string(), "z^2");
        assert_eq!(m.entry(0, 1).to_string(), "z*u1");
        assert_eq!(m.entry(1, 0).to_string(), "0");
        assert_eq!(m.entry(1, 1).to_string(), "z^-2");
        assert_eq!(m.det().to_string(), "1");

        let split = ExtensionClass::new(3, MultiSeries::zero(Chart::U, p));
        let m = extension_to_transition(&split, &ThreefoldSpec::w(2), p).unwrap();
        assert_eq!(m.det().to_string(), "1");
    }

    #[test]
    fn line_bundle_transitions() {
        let p = pol();
        let spec = ThreefoldSpec::w(2);
        assert_eq!(line_bundle_transition(0, &spec, p).unwrap().entry(0, 0).to_string(), "1");
        assert_eq!(line_bundle_transition(-4, &spec, p).unwrap().entry(0, 0).to_string(), "z^4");
        assert_eq!(line_bundle_transition(3, &spec, p).unwrap().entry(0, 0).to_string(), "z^-3");
    }

    #[test]
    fn matrix_inverse_of_tangent() {
        let p = pol();
        let jac = tangent_jacobian(&ThreefoldSpec::w2_y(2, p), p).unwrap();
        let inv = jac.inverse_entries().unwrap();
        let prod = matrix_mul(3, jac.entries(), &inv, Chart::U, p).unwrap();
        let id = matrix_identity(3, Chart::U, p);
        // products of window-bounded series: compare after re-truncation
        for (got, want) in prod.iter().zip(&id) {
            assert!(got.sub(want).unwrap().truncate_u_total(p.u_deg_max - 1).is_zero());
        }
    }

    #[test]
    fn endomorphism_of_rank_one_is_identity() {
        let p = pol();
        let line = line_bundle_transition(5, &ThreefoldSpec::w(2), p).unwrap();
        let end = endomorphism_transition(&line).unwrap();
        assert_eq!(end.rank(), 1);
        assert_eq!(end.entry(0, 0).to_string(), "1");
    }

    #[test]
    fn endomorphism_fixes_identity_endomorphism() {
        let p = pol();
        let jac = tangent_jacobian(&ThreefoldSpec::w(2), p).unwrap();
        let end = endomorphism_transition(&jac).unwrap();
        // vec(Id) under g -> M g M^-1 is fixed
        let mut vec_id = Vec::new();
        for a in 0..3 {
            for b in 0..3 {
                if a == b {
                    vec_id.push(MultiSeries::one(Chart::U, p));
                } else {
                    vec_id.push(MultiSeries::zero(Chart::U, p));
                }
            }
        }
        let image = end.apply(&vec_id).unwrap();
        for (got, want) in image.iter().zip(&vec_id) {
            assert!(got.sub(want).unwrap().truncate_u_total(p.u_deg_max - 1).is_zero());
        }
    }

    #[test]
    fn cocycle_condition_for_tangent() {
        // rewrite M to V coordinates, multiply by the rewrite of M^-1: identity
        let p = pol();
        let jac = tangent_jacobian(&ThreefoldSpec::w2_y(1, p), p).unwrap();
        let inv = jac.inverse_entries().unwrap();
        let t = jac.transition();
        let to_v = |m: &[MultiSeries]| -> Vec<MultiSeries> {
            m.iter().map(|e| t.to_v(e).unwrap()).collect()
        };
        let mv = to_v(jac.entries());
        let minv_v = to_v(&inv);
        let prod = matrix_mul(3, &mv, &minv_v, Chart::V, p).unwrap();
        let id = matrix_identity(3, Chart::V, p);
        for (got, want) in prod.iter().zip(&id) {
            assert!(got.sub(want).unwrap().truncate_u_total(p.u_deg_max - 2).is_zero());
        }
    }

    #[test]
    fn conormal_degrees() {
        let p = pol();
        // W_1: O(1) + O(1), ample
        assert_eq!(conormal_on_line(&ThreefoldSpec::w(1), p).unwrap(), (1, 1));
        // W_2 and a deformation vanishing to second order on the line
        assert_eq!(conormal_on_line(&ThreefoldSpec::w(2), p).unwrap(), (2, 0));
        let spec = ThreefoldSpec::w2_tau(&[(2, ratio(1, 1))], p);
        assert_eq!(conormal_on_line(&spec, p).unwrap(), (2, 0));
        // W_k dualizes the defining bundle; k = 3 gives (3, -1)
        assert_eq!(conormal_on_line(&ThreefoldSpec::w(3), p).unwrap(), (3, -1));
        // tau with tau(0) != 0 does not preserve the line
        let bad = ThreefoldSpec::w2_tau(&[(0, ratio(1, 1))], p);
        assert!(matches!(conormal_on_line(&bad, p), Err(GeometryError::LineNotPreserved(_))));
    }

    #[test]
    fn conormal_of_the_sharply_deformed_w2() {
        // tau = u2 has a first-order zero; the transition is equivalent to
        // W_1 and the conormal sharpens to (1, 1).
        let p = pol();
        let spec = ThreefoldSpec::w2_tau(&[(1, ratio(1, 1))], p);
        assert_eq!(conormal_on_line(&spec, p).unwrap(), (1, 1));
    }
}
