//! Deformation machinery: integrating tangent cocycles into new gluing
//! data, rigidity classification, affine-bundle isomorphism decisions and
//! holomorphic map verification.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::cech::{CechError, Cohomology, VectorCochain};
use crate::geometry::{build_transition, tangent_jacobian, GeometryError, InverseRules, Slot, ThreefoldSpec};
use crate::linalg::{Echelon, SparseVec};
use crate::series::{Chart, Exponent, MultiSeries, SeriesError, SubstRules, TruncationPolicy};

#[derive(Clone, Debug, PartialEq)]
pub enum DeformError {
    Cech(CechError),
    Geometry(GeometryError),
    Series(SeriesError),
    InvalidInput(String),
}

impl fmt::Display for DeformError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeformError::Cech(e) => write!(f, "{e}"),
            DeformError::Geometry(e) => write!(f, "{e}"),
            DeformError::Series(e) => write!(f, "{e}"),
            DeformError::InvalidInput(s) => write!(f, "invalid input: {s}"),
        }
    }
}

impl core::error::Error for DeformError {}

impl From<CechError> for DeformError {
    fn from(e: CechError) -> Self {
        DeformError::Cech(e)
    }
}

impl From<GeometryError> for DeformError {
    fn from(e: GeometryError) -> Self {
        DeformError::Geometry(e)
    }
}

impl From<SeriesError> for DeformError {
    fn from(e: SeriesError) -> Self {
        DeformError::Series(e)
    }
}

/// Result of trying to turn a tangent cocycle into actual gluing data.
#[derive(Clone, Debug)]
pub enum IntegrationResult {
    Integrated(ThreefoldSpec),
    NotIntegrable { variable: String, reason: String },
}

impl IntegrationResult {
    pub fn is_integrable(&self) -> bool {
        matches!(self, IntegrationResult::Integrated(_))
    }

    pub fn spec(&self) -> Option<&ThreefoldSpec> {
        match self {
            IntegrationResult::Integrated(s) => Some(s),
            IntegrationResult::NotIntegrable { .. } => None,
        }
    }
}

/// Add a tangent-valued cocycle to the transition rules. The deformed rule
/// is diag(z^-2, z^k1, z^k2) applied to (coordinates + cocycle), so a
/// component c in the v1 slot perturbs v1 by z^k1 c, and similarly for v2.
/// The result is a deformation exactly when the perturbed transition still
/// inverts.
pub fn integrate_cocycle(
    spec: &ThreefoldSpec,
    cocycle: &VectorCochain,
    policy: TruncationPolicy,
) -> Result<IntegrationResult, DeformError> {
    if cocycle.rank() != 3 {
        return Err(DeformError::InvalidInput("tangent cocycles have three components".to_string()));
    }
    if !cocycle.components[0].is_zero() {
        return Ok(IntegrationResult::NotIntegrable {
            variable: "xi".to_string(),
            reason: "a base-direction perturbation leaves the fibered transition shape".to_string(),
        });
    }
    // widen the base window so the twist shift is exact
    let spread = spec.k1.abs().max(spec.k2.abs());
    let wide = TruncationPolicy::new(
        policy.u_deg_max,
        policy.z_min - spread,
        policy.z_max + spread,
    );
    let twist = |k: i32, c: &MultiSeries| -> Result<MultiSeries, SeriesError> {
        let zk = MultiSeries::monomial(Chart::U, wide, Exponent::new(k, 0, 0), BigRational::one());
        c.truncated_to(wide).mul(&zk)
    };
    let mut deformed = spec.clone();
    let p1 = twist(spec.k1, &cocycle.components[1])?;
    let p2 = twist(spec.k2, &cocycle.components[2])?;
    deformed = deformed.with_perturbation(Slot::V1, p1);
    deformed = deformed.with_perturbation(Slot::V2, p2);
    let transition = build_transition(&deformed, policy);
    match transition.u_to_v {
        InverseRules::Rules(_) => Ok(IntegrationResult::Integrated(deformed)),
        InverseRules::NotInvertible { reason } => {
            let variable = if reason.contains("v1") { "v1" } else { "v2" }.to_string();
            Ok(IntegrationResult::NotIntegrable { variable, reason })
        }
    }
}

/// Tangent-cohomology profile of W_{k1,k2} across three fiber caps.
#[derive(Clone, Debug, PartialEq)]
pub enum RigidityClass {
    Zero,
    Finite(usize),
    GrowingPattern { dims_by_u_cap: Vec<(u32, usize)> },
}

/// Run the tangent H^1 at three increasing fiber caps and classify: all
/// zero, stabilized finite, or growing.
pub fn classify_rigidity(
    k1: i32,
    k2: i32,
    policy: TruncationPolicy,
    growth_cap: u32,
) -> Result<RigidityClass, DeformError> {
    let spec = ThreefoldSpec::w_pair(k1, k2);
    let top = policy.u_deg_max;
    let caps = if top >= 2 { [top - 2, top - 1, top] } else { [top, top + 1, top + 2] };
    let mut dims = Vec::new();
    for cap in caps {
        let jac = tangent_jacobian(&spec, policy.with_u_deg(cap))?;
        let mut solver = Cohomology::new(&jac);
        dims.push((cap, solver.h1_dimension(growth_cap)?));
    }
    if dims.iter().all(|(_, d)| *d == 0) {
        Ok(RigidityClass::Zero)
    } else if dims[1].1 == dims[2].1 {
        Ok(RigidityClass::Finite(dims[2].1))
    } else {
        Ok(RigidityClass::GrowingPattern { dims_by_u_cap: dims })
    }
}

/// A holomorphic map between two-chart total spaces, with an expression on
/// each chart: `on_u` gives the target U coordinates as series in the
/// source U coordinates, `on_v` likewise on the V side.
#[derive(Clone, Debug, PartialEq)]
pub struct MapSpec {
    pub on_u: [MultiSeries; 3],
    pub on_v: [MultiSeries; 3],
}

impl MapSpec {
    pub fn new(on_u: [MultiSeries; 3], on_v: [MultiSeries; 3]) -> Self {
        for s in &on_u {
            assert_eq!(s.chart(), Chart::U);
        }
        for s in &on_v {
            assert_eq!(s.chart(), Chart::V);
        }
        MapSpec { on_u, on_v }
    }
}

/// Check T_target . m_U = m_V . T_source exactly within the window, plus
/// chart holomorphy of both expressions. Only the forward rules enter, so
/// the check also applies to sources whose transition does not invert.
pub fn verify_map_holomorphic(
    map: &MapSpec,
    source: &ThreefoldSpec,
    target: &ThreefoldSpec,
    policy: TruncationPolicy,
) -> Result<bool, DeformError> {
    if !map.on_u.iter().all(|s| s.is_holomorphic()) {
        return Ok(false);
    }
    if !map.on_v.iter().all(|s| s.is_holomorphic()) {
        return Ok(false);
    }
    let source_forward = source.forward_values(policy);
    let target_forward = target.forward_values(policy);
    // left: target transition composed with the U-side expression
    let into_source_u = SubstRules::new(
        Chart::U,
        map.on_u[0].clone(),
        map.on_u[1].clone(),
        map.on_u[2].clone(),
    );
    // right: V-side expression composed with the source transition
    let through_source = SubstRules::new(
        Chart::U,
        source_forward[0].clone(),
        source_forward[1].clone(),
        source_forward[2].clone(),
    );
    for (target_value, map_value) in target_forward.iter().zip(&map.on_v) {
        let lhs = target_value.substitute(&into_source_u)?;
        let rhs = map_value.substitute(&through_source)?;
        if !lhs.sub(&rhs)?.is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The affine line bundles E(j) over the surface glued by
/// (xi, v) = (z^-1, z^-1 u): E(j) has fiber rule u1 -> z^3 u1 + z^2 u2^j.
/// Deciding whether E(j1) and E(j2) are isomorphic as affine bundles is a
/// linear problem in the fiberwise data A, b of an affine map.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineIsoProblem {
    pub j1: u32,
    pub j2: u32,
    /// Degree cap for the polynomial unknowns.
    pub ansatz_degree: u32,
}

#[derive(Clone, Debug)]
pub enum AffineIsoVerdict {
    Isomorphic {
        /// The nowhere-vanishing linear part (a nonzero constant).
        a: BigRational,
    },
    NotIsomorphic {
        /// The linear part every solution is forced to, which vanishes on
        /// the zero section.
        forced_a: MultiSeries,
        certificate: String,
    },
    Inconclusive {
        reason: String,
    },
}

impl AffineIsoVerdict {
    pub fn is_isomorphic(&self) -> bool {
        matches!(self, AffineIsoVerdict::Isomorphic { .. })
    }

    pub fn is_not_isomorphic(&self) -> bool {
        matches!(self, AffineIsoVerdict::NotIsomorphic { .. })
    }
}

// unknown families of the affine matching system
#[derive(Clone, Copy, PartialEq, Eq)]
enum AffineUnknown {
    /// coefficient of z^m u2^s in A^U
    AU(u32, u32),
    /// coefficient of xi^n u2^s in A^V
    AV(u32, u32),
    /// coefficient of z^m u2^s in b^U
    BU(u32, u32),
    /// coefficient of xi^n u2^s in b^V
    BV(u32, u32),
}

/// Decide affine-bundle isomorphism of E(j1) and E(j2) by matching linear
/// and affine parts over the overlap:
///
/// ```text
/// A^V z^3 = A^U z^3
/// A^V z^2 u2^{j1} + b^V = b^U z^3 + z^2 u2^{j2}
/// ```
///
/// with A^U, b^U polynomial in (z, u2) and A^V, b^V polynomial in
/// (xi, u2), all capped at the ansatz degree. An isomorphism needs a
/// nowhere-vanishing A, i.e. a nonzero constant.
pub fn affine_bundle_iso(
    problem: &AffineIsoProblem,
    policy: TruncationPolicy,
) -> Result<AffineIsoVerdict, DeformError> {
    let (j1, j2) = (problem.j1.min(problem.j2), problem.j1.max(problem.j2));
    let deg = problem.ansatz_degree;
    if deg < j2 {
        return Ok(AffineIsoVerdict::Inconclusive {
            reason: format!("ansatz degree {deg} below j2 = {j2}"),
        });
    }
    // overlap monomials z^e u2^s indexed densely
    let span = (deg as i32) + 4;
    let index = |e: i32, s: u32| -> usize { ((e + span) as usize) * 256 + s as usize };

    let contributions = |u: AffineUnknown| -> Vec<(usize, BigRational)> {
        let one = BigRational::one();
        match u {
            // compare1: A^V z^3 - A^U z^3 = 0; compare2 carries A^V again
            AffineUnknown::AU(m, s) => {
                alloc::vec![(index(m as i32 + 3, s), -one.clone())]
            }
            AffineUnknown::AV(n, s) => {
                let mut v = alloc::vec![(index(3 - n as i32, s), one.clone())];
                // second block: A^V z^2 u2^{j1}
                v.push((index_second(2 - n as i32, s + j1, span), one));
                v
            }
            AffineUnknown::BU(m, s) => {
                alloc::vec![(index_second(m as i32 + 3, s, span), -one)]
            }
            AffineUnknown::BV(n, s) => {
                alloc::vec![(index_second(-(n as i32), s, span), one)]
            }
        }
    };

    // right-hand side: z^2 u2^{j2} in the second block
    let mut rhs = SparseVec::new();
    rhs.insert(index_second(2, j2, span), BigRational::one());

    let mut unknowns: Vec<AffineUnknown> = Vec::new();
    for m in 0..=deg {
        for s in 0..=deg {
            unknowns.push(AffineUnknown::AU(m, s));
            unknowns.push(AffineUnknown::AV(m, s));
            unknowns.push(AffineUnknown::BU(m, s));
            unknowns.push(AffineUnknown::BV(m, s));
        }
    }

    let solve = |selected: &dyn Fn(AffineUnknown) -> bool| -> Option<SparseVec> {
        let mut ech = Echelon::new(true);
        let mut kept = Vec::new();
        for u in &unknowns {
            if !selected(*u) {
                continue;
            }
            let mut col = SparseVec::new();
            for (i, c) in contributions(*u) {
                let entry = col.entry(i).or_insert_with(BigRational::zero);
                *entry += c;
                if entry.is_zero() {
                    col.remove(&i);
                }
            }
            kept.push(*u);
            ech.insert(col);
        }
        ech.express(&rhs).map(|combo| {
            let mut named = SparseVec::new();
            for (gen, c) in combo {
                // re-key by position in the full unknown list
                let u = kept[gen];
                let pos = unknowns.iter().position(|x| *x == u).unwrap();
                named.insert(pos, c);
            }
            named
        })
    };

    // phase 1: a constant, nowhere-vanishing linear part
    let constant_only = |u: AffineUnknown| match u {
        AffineUnknown::AU(m, s) | AffineUnknown::AV(m, s) => m == 0 && s == 0,
        _ => true,
    };
    if let Some(sol) = solve(&constant_only) {
        let a = sol
            .iter()
            .find_map(|(pos, c)| match unknowns[*pos] {
                AffineUnknown::AU(0, 0) => Some(c.clone()),
                _ => None,
            })
            .unwrap_or_else(BigRational::zero);
        if !a.is_zero() {
            return Ok(AffineIsoVerdict::Isomorphic { a });
        }
    }

    // phase 2: the full ansatz; the linear part of any solution is unique,
    // and when it vanishes somewhere no affine isomorphism exists
    let everything = |_: AffineUnknown| true;
    match solve(&everything) {
        Some(sol) => {
            let mut forced_a = MultiSeries::zero(Chart::U, policy);
            for (pos, c) in &sol {
                if let AffineUnknown::AU(m, s) = unknowns[*pos] {
                    forced_a = forced_a.add(&MultiSeries::monomial(
                        Chart::U,
                        policy,
                        Exponent::new(m as i32, 0, s),
                        c.clone(),
                    ))?;
                }
            }
            // re-verify: the forced linear part vanishes at u2 = 0
            let at_zero = forced_a.restrict_to_line();
            if at_zero.is_zero() && !forced_a.is_zero() {
                Ok(AffineIsoVerdict::NotIsomorphic {
                    certificate: format!(
                        "the matching equations force A = {forced_a}, which vanishes on u2 = 0, \
                         but an affine isomorphism needs a nowhere-vanishing linear part"
                    ),
                    forced_a,
                })
            } else if forced_a.is_zero() {
                Ok(AffineIsoVerdict::NotIsomorphic {
                    certificate: "only the degenerate A = 0 solves the matching equations"
                        .to_string(),
                    forced_a,
                })
            } else {
                // a nonvanishing non-constant polynomial cannot exist; treat
                // any leftover as an undecided ansatz
                Ok(AffineIsoVerdict::Inconclusive {
                    reason: format!("unexpected solvable linear part {forced_a}"),
                })
            }
        }
        None => Ok(AffineIsoVerdict::Inconclusive {
            reason: format!("no affine relation within ansatz degree {deg}"),
        }),
    }
}

fn index_second(e: i32, s: u32, span: i32) -> usize {
    // second equation block lives at a disjoint index range
    1_000_000 + ((e + 2 * span) as usize) * 256 + s as usize
}
