//! Sparse Laurent series in the base variable with polynomial fiber variables.
//!
//! A [`MultiSeries`] is a finite sum of monomials `c * z^l * u1^i * u2^s`
//! (or `c * xi^l * v1^i * v2^s` on the other chart) with exact rational
//! coefficients. The base exponent `l` may be negative, the fiber exponents
//! may not. Every series carries a [`TruncationPolicy`] describing the box of
//! exponents it is certified for; operations drop monomials that leave the
//! box and record the loss in a `boundary_touched` flag so that callers can
//! grow the window and retry.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Which coordinate chart a series lives on. The algebra is identical on
/// both; the tag fixes variable names and what "holomorphic" means for the
/// base exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Chart {
    U,
    V,
}

impl Chart {
    pub fn other(self) -> Chart {
        match self {
            Chart::U => Chart::V,
            Chart::V => Chart::U,
        }
    }

    /// Display names for (base, fiber1, fiber2).
    pub fn var_names(self) -> [&'static str; 3] {
        match self {
            Chart::U => ["z", "u1", "u2"],
            Chart::V => ["xi", "v1", "v2"],
        }
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Chart::U => write!(f, "U"),
            Chart::V => write!(f, "V"),
        }
    }
}

/// One of the three chart variables, independent of the chart tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    /// `z` on U, `xi` on V.
    Base,
    /// `u1` on U, `v1` on V.
    Fiber1,
    /// `u2` on U, `v2` on V.
    Fiber2,
}

impl Var {
    pub const ALL: [Var; 3] = [Var::Base, Var::Fiber1, Var::Fiber2];

    pub fn index(self) -> usize {
        match self {
            Var::Base => 0,
            Var::Fiber1 => 1,
            Var::Fiber2 => 2,
        }
    }
}

/// Exponent triple of one monomial: base exponent (any integer) and the two
/// fiber exponents (nonnegative).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Exponent {
    pub z: i32,
    pub u1: u32,
    pub u2: u32,
}

impl Exponent {
    pub const ONE: Exponent = Exponent { z: 0, u1: 0, u2: 0 };

    pub fn new(z: i32, u1: u32, u2: u32) -> Self {
        Exponent { z, u1, u2 }
    }

    /// Total degree in the fiber variables; grades the formal neighborhoods
    /// of the zero section.
    pub fn u_degree(&self) -> u32 {
        self.u1 + self.u2
    }

    pub fn checked_mul(&self, other: &Exponent) -> Option<Exponent> {
        Some(Exponent {
            z: self.z.checked_add(other.z)?,
            u1: self.u1.checked_add(other.u1)?,
            u2: self.u2.checked_add(other.u2)?,
        })
    }

    fn key(&self) -> (u32, u32, u32, i32) {
        (self.u_degree(), self.u1, self.u2, self.z)
    }
}

/// Canonical term order: by total fiber degree, then u1, then u2, then the
/// base exponent, all ascending. Groups each formal neighborhood together.
impl Ord for Exponent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The certified exponent box: all fiber degrees up to `u_deg_max`, base
/// exponents in `[z_min, z_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TruncationPolicy {
    pub u_deg_max: u32,
    pub z_min: i32,
    pub z_max: i32,
}

impl TruncationPolicy {
    pub fn new(u_deg_max: u32, z_min: i32, z_max: i32) -> Self {
        assert!(z_min <= 0 && 0 <= z_max, "window must contain z^0");
        TruncationPolicy { u_deg_max, z_min, z_max }
    }

    pub fn contains(&self, e: &Exponent) -> bool {
        self.z_min <= e.z && e.z <= self.z_max && e.u_degree() <= self.u_deg_max
    }

    /// Shared window of two policies.
    pub fn intersect(&self, other: &TruncationPolicy) -> TruncationPolicy {
        TruncationPolicy {
            u_deg_max: self.u_deg_max.min(other.u_deg_max),
            z_min: self.z_min.max(other.z_min),
            z_max: self.z_max.min(other.z_max),
        }
    }

    /// Doubled base window (with floor 4), used by the stabilization
    /// protocol. The fiber cap is left alone.
    pub fn grow_z(&self) -> TruncationPolicy {
        TruncationPolicy {
            u_deg_max: self.u_deg_max,
            z_min: (self.z_min * 2).min(-4),
            z_max: (self.z_max * 2).max(4),
        }
    }

    pub fn with_u_deg(&self, u_deg_max: u32) -> TruncationPolicy {
        TruncationPolicy { u_deg_max, ..*self }
    }
}

/// Errors from series arithmetic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SeriesError {
    /// Binary operation on series from different charts.
    ChartMismatch { left: Chart, right: Chart },
    /// A negative base power was required but the base rule is not a unit
    /// monomial times an invertible series inside the window.
    NonInvertibleSubstitution(String),
    /// A substitution rule was missing for a variable that occurs.
    MissingRule(Var),
}

impl fmt::Display for SeriesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesError::ChartMismatch { left, right } => {
                write!(f, "chart mismatch: {left} vs {right}")
            }
            SeriesError::NonInvertibleSubstitution(why) => {
                write!(f, "non-invertible substitution: {why}")
            }
            SeriesError::MissingRule(v) => write!(f, "missing substitution rule for {v:?}"),
        }
    }
}

impl core::error::Error for SeriesError {}

/// A sparse Laurent-polynomial series on one chart. Immutable by
/// convention: all operations return new values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiSeries {
    chart: Chart,
    policy: TruncationPolicy,
    terms: BTreeMap<Exponent, BigRational>,
    boundary_touched: bool,
}

impl MultiSeries {
    pub fn zero(chart: Chart, policy: TruncationPolicy) -> Self {
        MultiSeries { chart, policy, terms: BTreeMap::new(), boundary_touched: false }
    }

    pub fn constant(chart: Chart, policy: TruncationPolicy, c: BigRational) -> Self {
        Self::monomial(chart, policy, Exponent::ONE, c)
    }

    pub fn one(chart: Chart, policy: TruncationPolicy) -> Self {
        Self::constant(chart, policy, BigRational::one())
    }

    /// A single term `c * base^e`. Terms outside the window are dropped (and
    /// flagged), matching every other constructor.
    pub fn monomial(chart: Chart, policy: TruncationPolicy, e: Exponent, c: BigRational) -> Self {
        let mut s = Self::zero(chart, policy);
        s.add_term(e, c);
        s
    }

    /// The variable `v` itself as a series.
    pub fn var(chart: Chart, policy: TruncationPolicy, v: Var) -> Self {
        let e = match v {
            Var::Base => Exponent::new(1, 0, 0),
            Var::Fiber1 => Exponent::new(0, 1, 0),
            Var::Fiber2 => Exponent::new(0, 0, 1),
        };
        Self::monomial(chart, policy, e, BigRational::one())
    }

    pub fn from_terms<I>(chart: Chart, policy: TruncationPolicy, terms: I) -> Self
    where
        I: IntoIterator<Item = (Exponent, BigRational)>,
    {
        let mut s = Self::zero(chart, policy);
        for (e, c) in terms {
            s.add_term(e, c);
        }
        s
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn policy(&self) -> &TruncationPolicy {
        &self.policy
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// True if some operation on the way to this value discarded a monomial
    /// that fell outside the window.
    pub fn boundary_touched(&self) -> bool {
        self.boundary_touched
    }

    pub fn with_boundary_flag(mut self, flag: bool) -> Self {
        self.boundary_touched = flag;
        self
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &BigRational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, e: &Exponent) -> BigRational {
        self.terms.get(e).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Does the series involve the given variable?
    pub fn depends_on(&self, v: Var) -> bool {
        self.terms.keys().any(|e| match v {
            Var::Base => e.z != 0,
            Var::Fiber1 => e.u1 != 0,
            Var::Fiber2 => e.u2 != 0,
        })
    }

    fn add_term(&mut self, e: Exponent, c: BigRational) {
        if c.is_zero() {
            return;
        }
        if !self.policy.contains(&e) {
            self.boundary_touched = true;
            return;
        }
        use alloc::collections::btree_map::Entry;
        match self.terms.entry(e) {
            Entry::Vacant(slot) => {
                slot.insert(c);
            }
            Entry::Occupied(mut slot) => {
                *slot.get_mut() += c;
                if slot.get().is_zero() {
                    slot.remove();
                }
            }
        }
    }

    /// Re-truncate to a (usually smaller) window.
    pub fn truncated_to(&self, policy: TruncationPolicy) -> Self {
        let mut out = Self::zero(self.chart, policy);
        out.boundary_touched = self.boundary_touched;
        for (e, c) in &self.terms {
            out.add_term(*e, c.clone());
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_chart(other)?;
        let policy = self.policy.intersect(&other.policy);
        let mut out = Self::zero(self.chart, policy);
        out.boundary_touched = self.boundary_touched || other.boundary_touched;
        for (e, c) in self.terms.iter().chain(other.terms.iter()) {
            out.add_term(*e, c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = -c.clone();
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero(self.chart, self.policy).with_boundary_flag(self.boundary_touched);
        }
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v *= c.clone();
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_chart(other)?;
        let policy = self.policy.intersect(&other.policy);
        let mut out = Self::zero(self.chart, policy);
        out.boundary_touched = self.boundary_touched || other.boundary_touched;
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                match ea.checked_mul(eb) {
                    Some(e) => out.add_term(e, ca * cb),
                    None => out.boundary_touched = true,
                }
            }
        }
        Ok(out)
    }

    /// Small nonnegative powers by repeated multiplication.
    pub fn pow(&self, n: u32) -> Result<Self, SeriesError> {
        let mut out = Self::one(self.chart, self.policy);
        for _ in 0..n {
            out = out.mul(self)?;
        }
        Ok(out)
    }

    /// Formal partial derivative. The window is conceptually widened by one
    /// in the differentiated direction and then re-truncated, so a term
    /// sitting on the lower base boundary disappears with the flag set.
    pub fn partial(&self, v: Var) -> Self {
        let mut out = Self::zero(self.chart, self.policy);
        out.boundary_touched = self.boundary_touched;
        for (e, c) in &self.terms {
            let (e1, factor) = match v {
                Var::Base => (
                    Exponent::new(e.z - 1, e.u1, e.u2),
                    BigRational::from_integer(e.z.into()),
                ),
                Var::Fiber1 => {
                    if e.u1 == 0 {
                        continue;
                    }
                    (Exponent::new(e.z, e.u1 - 1, e.u2), BigRational::from_integer(e.u1.into()))
                }
                Var::Fiber2 => {
                    if e.u2 == 0 {
                        continue;
                    }
                    (Exponent::new(e.z, e.u1, e.u2 - 1), BigRational::from_integer(e.u2.into()))
                }
            };
            out.add_term(e1, c * factor);
        }
        out
    }

    /// True iff every term has nonnegative base exponent, i.e. the series
    /// extends over the origin of its own chart.
    pub fn is_holomorphic(&self) -> bool {
        self.terms.keys().all(|e| e.z >= 0)
    }

    /// Split into (holomorphic, principal): terms with base exponent >= 0
    /// and < 0 respectively. The parts sum back to the input.
    pub fn holomorphic_split(&self) -> (Self, Self) {
        let mut hol = Self::zero(self.chart, self.policy);
        let mut pri = Self::zero(self.chart, self.policy);
        hol.boundary_touched = self.boundary_touched;
        pri.boundary_touched = self.boundary_touched;
        for (e, c) in &self.terms {
            if e.z >= 0 {
                hol.add_term(*e, c.clone());
            } else {
                pri.add_term(*e, c.clone());
            }
        }
        (hol, pri)
    }

    /// The part of fiber degree exactly zero (a Laurent polynomial in the
    /// base variable).
    pub fn u_degree_zero_part(&self) -> Self {
        self.filter_terms(|e| e.u_degree() == 0)
    }

    /// Keep only terms of total fiber degree <= n (reduction mod I^{n+1}).
    /// This is an exact quotient-ring operation, not a window loss, so the
    /// boundary flag is not set.
    pub fn truncate_u_total(&self, n: u32) -> Self {
        self.filter_terms(|e| e.u_degree() <= n)
    }

    /// Restriction to the zero section u1 = u2 = 0.
    pub fn restrict_to_line(&self) -> Self {
        self.u_degree_zero_part()
    }

    fn filter_terms(&self, keep: impl Fn(&Exponent) -> bool) -> Self {
        let mut out = Self::zero(self.chart, self.policy);
        out.boundary_touched = self.boundary_touched;
        for (e, c) in &self.terms {
            if keep(e) {
                out.add_term(*e, c.clone());
            }
        }
        out
    }

    /// A series is a unit inside the window when its fiber-degree-zero part
    /// is a single monomial; the rest is then nilpotent up to the fiber cap
    /// and a geometric series inverts it.
    pub fn is_unit(&self) -> bool {
        self.unit_monomial().is_some()
    }

    fn unit_monomial(&self) -> Option<(Exponent, BigRational)> {
        let base = self.u_degree_zero_part();
        if base.terms.len() != 1 {
            return None;
        }
        let (e, c) = base.terms.iter().next().unwrap();
        Some((*e, c.clone()))
    }

    /// Multiplicative inverse within the window.
    pub fn invert(&self) -> Result<Self, SeriesError> {
        let (e0, c0) = self.unit_monomial().ok_or_else(|| {
            SeriesError::NonInvertibleSubstitution(
                "fiber-degree-zero part is not a single monomial".to_string(),
            )
        })?;
        // self = c0 z^{e0} (1 + t) with t of positive fiber degree.
        let lead_inv = Self::monomial(
            self.chart,
            self.policy,
            Exponent::new(-e0.z, 0, 0),
            c0.recip(),
        );
        let mut t = self.mul(&lead_inv)?;
        t.terms.remove(&Exponent::ONE);
        debug_assert!(t.terms.keys().all(|e| e.u_degree() > 0));
        // (1 + t)^{-1} = sum (-t)^n, truncated by the fiber cap.
        let minus_t = t.neg();
        let mut sum = Self::one(self.chart, self.policy);
        let mut pw = Self::one(self.chart, self.policy);
        for _ in 0..self.policy.u_deg_max {
            pw = pw.mul(&minus_t)?;
            if pw.is_zero() {
                break;
            }
            sum = sum.add(&pw)?;
        }
        sum.mul(&lead_inv)
    }

    /// Substitute the given images for this series' variables, landing on
    /// the rules' target chart. Ring homomorphism on the shared window.
    pub fn substitute(&self, rules: &SubstRules) -> Result<Self, SeriesError> {
        let chart = rules.target;
        let policy = rules.policy();
        let mut out = Self::zero(chart, policy);
        out.boundary_touched = self.boundary_touched;

        // Power caches, including negative base powers when needed.
        let mut base_pows: BTreeMap<i32, MultiSeries> = BTreeMap::new();
        let mut f1_pows: BTreeMap<u32, MultiSeries> = BTreeMap::new();
        let mut f2_pows: BTreeMap<u32, MultiSeries> = BTreeMap::new();
        let mut base_inv: Option<MultiSeries> = None;

        for (e, c) in &self.terms {
            let mut term = Self::constant(chart, policy, c.clone());
            if e.z != 0 {
                let img = rules.image(Var::Base).ok_or(SeriesError::MissingRule(Var::Base))?;
                if e.z < 0 && base_inv.is_none() {
                    base_inv = Some(img.invert()?);
                }
                let pw = base_pows.entry(e.z).or_insert_with(|| {
                    let gen = if e.z > 0 { img } else { base_inv.as_ref().unwrap() };
                    gen.pow(e.z.unsigned_abs()).expect("same chart")
                });
                term = term.mul(pw)?;
            }
            if e.u1 != 0 {
                let img =
                    rules.image(Var::Fiber1).ok_or(SeriesError::MissingRule(Var::Fiber1))?;
                let pw = f1_pows.entry(e.u1).or_insert_with(|| img.pow(e.u1).expect("same chart"));
                term = term.mul(pw)?;
            }
            if e.u2 != 0 {
                let img =
                    rules.image(Var::Fiber2).ok_or(SeriesError::MissingRule(Var::Fiber2))?;
                let pw = f2_pows.entry(e.u2).or_insert_with(|| img.pow(e.u2).expect("same chart"));
                term = term.mul(pw)?;
            }
            out = out.add(&term)?;
        }
        Ok(out)
    }

    fn check_chart(&self, other: &Self) -> Result<(), SeriesError> {
        if self.chart != other.chart {
            return Err(SeriesError::ChartMismatch { left: self.chart, right: other.chart });
        }
        Ok(())
    }

    /// Minimal base exponent over all terms, if any.
    pub fn min_z_exp(&self) -> Option<i32> {
        self.terms.keys().map(|e| e.z).min()
    }

    pub fn max_z_exp(&self) -> Option<i32> {
        self.terms.keys().map(|e| e.z).max()
    }

    /// Exactly one stored term?
    pub fn single_term(&self) -> Option<(Exponent, BigRational)> {
        if self.terms.len() == 1 {
            let (e, c) = self.terms.iter().next().unwrap();
            Some((*e, c.clone()))
        } else {
            None
        }
    }
}

impl fmt::Display for MultiSeries {
    /// Canonical rendering: terms in canonical order, `p/q` coefficients,
    /// `*`-separated factors, e.g. `z^2*u1 - 1/2*z^-1*u2`. This format is
    /// stable and round-trips through the text parser of the CLI crate.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let names = self.chart.var_names();
        for (idx, (e, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            if idx == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mag = c.abs();
            let mut factors: Vec<String> = Vec::new();
            for (name, exp) in [(names[0], e.z as i64), (names[1], e.u1 as i64), (names[2], e.u2 as i64)] {
                if exp == 0 {
                    continue;
                }
                if exp == 1 {
                    factors.push(name.to_string());
                } else {
                    factors.push(alloc::format!("{name}^{exp}"));
                }
            }
            if factors.is_empty() {
                write!(f, "{mag}")?;
            } else {
                if !mag.is_one() {
                    write!(f, "{mag}*")?;
                }
                write!(f, "{}", factors.join("*"))?;
            }
        }
        Ok(())
    }
}

/// Images for the three variables of one chart as series on the other (or
/// the same) chart. Applying them to a series converts it to the target
/// chart; see [`MultiSeries::substitute`].
#[derive(Clone, Debug, PartialEq)]
pub struct SubstRules {
    pub target: Chart,
    images: [Option<MultiSeries>; 3],
}

impl SubstRules {
    pub fn new(target: Chart, base: MultiSeries, fiber1: MultiSeries, fiber2: MultiSeries) -> Self {
        for img in [&base, &fiber1, &fiber2] {
            assert_eq!(img.chart(), target, "rule image must live on the target chart");
        }
        SubstRules { target, images: [Some(base), Some(fiber1), Some(fiber2)] }
    }

    /// Rules that only cover some variables; substitution fails if an
    /// uncovered variable occurs.
    pub fn partial(target: Chart, images: [Option<MultiSeries>; 3]) -> Self {
        SubstRules { target, images }
    }

    pub fn image(&self, v: Var) -> Option<&MultiSeries> {
        self.images[v.index()].as_ref()
    }

    pub fn policy(&self) -> TruncationPolicy {
        let mut it = self.images.iter().flatten();
        let first = it.next().expect("rules must contain at least one image");
        it.fold(*first.policy(), |acc, s| acc.intersect(s.policy()))
    }

    /// Identity rules on a chart.
    pub fn identity(chart: Chart, policy: TruncationPolicy) -> Self {
        SubstRules::new(
            chart,
            MultiSeries::var(chart, policy, Var::Base),
            MultiSeries::var(chart, policy, Var::Fiber1),
            MultiSeries::var(chart, policy, Var::Fiber2),
        )
    }
}

/// Convenience: rational from an integer.
pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

/// Convenience: rational `p/q`.
pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(p.into(), q.into())
}
