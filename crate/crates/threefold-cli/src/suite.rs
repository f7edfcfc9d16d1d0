//! The full verification suite: every headline computation the engine is
//! built to reproduce, run as one table of named checks with expected and
//! computed values.
//!
//! Three checks document known discrepancies: the engine's exact values
//! disagree with the originally tabulated expectations for the deformed
//! moduli dimension, the blocked section extension, and the two-parameter
//! family map. Those rows stay red on purpose; the computed values are
//! backed by the independent oracles in the test suite.

use num_rational::BigRational;
use num_traits::One;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use threefold_core::bundles::{
    distinguish_bundles, first_neighborhood_moduli, probe_extension, shift_equivalent,
    splitting_type_on_line, verify_wq_identity, BundleVerdict, ShiftDecision,
};
use threefold_core::cech::{
    ext_generator_monomials, Cohomology, CoboundaryWitness, VectorCochain,
};
use threefold_core::deform::{
    affine_bundle_iso, classify_rigidity, integrate_cocycle, verify_map_holomorphic,
    AffineIsoProblem, AffineIsoVerdict, MapSpec, RigidityClass,
};
use threefold_core::geometry::{
    tangent_jacobian, BundleTransition, ExtensionClass, Slot, ThreefoldSpec,
};
use threefold_core::linalg::Echelon;
use threefold_core::series::{rat, ratio, Chart, Exponent, MultiSeries, TruncationPolicy, Var};

use crate::config::RunConfig;
use crate::report::{SuiteCheckJson, SuiteJson};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Informational comparison; a mismatch is reported, not failed.
    Recorded,
    /// The configured window is too small to certify this check.
    Window,
}

impl CheckStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Recorded => "recorded",
            CheckStatus::Window => "window",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: String,
    pub expected: String,
    pub computed: String,
    pub status: CheckStatus,
}

impl CheckOutcome {
    fn new(name: &str, expected: impl Into<String>, computed: impl Into<String>, ok: bool) -> Self {
        CheckOutcome {
            name: name.to_string(),
            expected: expected.into(),
            computed: computed.into(),
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
        }
    }

    fn recorded(name: &str, expected: impl Into<String>, computed: impl Into<String>) -> Self {
        CheckOutcome {
            name: name.to_string(),
            expected: expected.into(),
            computed: computed.into(),
            status: CheckStatus::Recorded,
        }
    }

    fn window(name: &str, u_need: u32, z_need: i32, policy: &TruncationPolicy) -> Self {
        CheckOutcome {
            name: name.to_string(),
            expected: format!("window with u-deg >= {u_need} and z range >= [-{z_need}, {z_need}]"),
            computed: format!(
                "window has u-deg {} and z range [{}, {}]",
                policy.u_deg_max, policy.z_min, policy.z_max
            ),
            status: CheckStatus::Window,
        }
    }

    fn error(name: &str, expected: impl Into<String>, err: impl std::fmt::Display) -> Self {
        let text = err.to_string();
        let status = if text.contains("window too small") {
            CheckStatus::Window
        } else {
            CheckStatus::Fail
        };
        CheckOutcome {
            name: name.to_string(),
            expected: expected.into(),
            computed: format!("error: {text}"),
            status,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteOutcome {
    pub checks: Vec<CheckOutcome>,
}

impl SuiteOutcome {
    pub fn counts(&self) -> (usize, usize, usize, usize) {
        let mut c = (0, 0, 0, 0);
        for check in &self.checks {
            match check.status {
                CheckStatus::Pass => c.0 += 1,
                CheckStatus::Fail => c.1 += 1,
                CheckStatus::Recorded => c.2 += 1,
                CheckStatus::Window => c.3 += 1,
            }
        }
        c
    }

    pub fn exit_code(&self) -> i32 {
        let (_, failed, _, window) = self.counts();
        if failed > 0 {
            1
        } else if window > 0 {
            2
        } else {
            0
        }
    }

    pub fn to_json(&self) -> SuiteJson {
        let (passed, failed, recorded, window_limited) = self.counts();
        SuiteJson {
            checks: self
                .checks
                .iter()
                .map(|c| SuiteCheckJson {
                    name: c.name.clone(),
                    expected: c.expected.clone(),
                    computed: c.computed.clone(),
                    status: c.status.as_str().to_string(),
                })
                .collect(),
            passed,
            failed,
            recorded,
            window_limited,
        }
    }

    pub fn render_table(&self) -> String {
        let mut name_w = "check".len();
        let mut exp_w = "expected".len();
        let mut comp_w = "computed".len();
        for c in &self.checks {
            name_w = name_w.max(c.name.len());
            exp_w = exp_w.max(c.expected.len());
            comp_w = comp_w.max(c.computed.len());
        }
        let mut out = format!(
            "{:<name_w$}  {:<exp_w$}  {:<comp_w$}  status\n",
            "check", "expected", "computed"
        );
        for c in &self.checks {
            out.push_str(&format!(
                "{:<name_w$}  {:<exp_w$}  {:<comp_w$}  {}\n",
                c.name,
                c.expected,
                c.computed,
                c.status.as_str()
            ));
        }
        let (p, f, r, w) = self.counts();
        out.push_str(&format!(
            "\n{p} passed, {f} failed, {r} recorded, {w} window-limited\n"
        ));
        out
    }
}

/// Some checks need a minimum window before their inputs even exist
/// (twists like z^{2j} must fit). Returns a window-limited row when the
/// configured window is smaller.
fn gate(name: &str, policy: &TruncationPolicy, u_need: u32, z_need: i32) -> Option<CheckOutcome> {
    if policy.u_deg_max < u_need || policy.z_max < z_need || policy.z_min > -z_need {
        Some(CheckOutcome::window(name, u_need, z_need, policy))
    } else {
        None
    }
}

fn mono(e: Exponent, c: i64, p: TruncationPolicy) -> MultiSeries {
    MultiSeries::monomial(Chart::U, p, e, rat(c))
}

fn sigma(s: u32, p: TruncationPolicy) -> VectorCochain {
    VectorCochain::monomial(3, 1, Exponent::new(-1, 0, s), rat(1), p)
}

fn w2_u2(p: TruncationPolicy) -> ThreefoldSpec {
    ThreefoldSpec::w2_tau(&[(1, rat(1))], p)
}

/// Run every check. Windows below a check's requirement mark it
/// window-limited instead of failing it.
pub fn run_suite(config: &RunConfig) -> SuiteOutcome {
    let mut checks = Vec::new();
    checks.extend(check_01_w1_rigidity(config));
    checks.extend(check_02_w2y_dimensions(config));
    checks.extend(check_03_witnesses(config));
    checks.extend(check_04_w3_classes(config));
    checks.extend(check_05_integrability_grid(config));
    checks.extend(check_06_family_construction(config));
    checks.extend(check_07_wq(config));
    checks.extend(check_08_ext_generators(config));
    checks.extend(check_09_moduli(config));
    checks.extend(check_10_deformed_moduli(config));
    checks.extend(check_11_sections(config));
    checks.extend(check_12_maps(config));
    checks.extend(check_13_affine(config));
    checks.extend(check_14_rigidity(config));
    checks.extend(check_15_endomorphisms(config));
    checks.extend(check_16_properties(config));
    SuiteOutcome { checks }
}

fn check_01_w1_rigidity(config: &RunConfig) -> Vec<CheckOutcome> {
    let name = "01 tangent H1 of W_1";
    let expected = "dimension 0, stabilized";
    let p = config.policy;
    if let Some(row) = gate(name, &p, 2, 4) {
        return vec![row];
    }
    let jac = match tangent_jacobian(&ThreefoldSpec::w(1), p) {
        Ok(j) => j,
        Err(e) => return vec![CheckOutcome::error(name, expected, e)],
    };
    let mut solver = Cohomology::new(&jac);
    match solver.h1_basis_opt(config.growth_cap, false) {
        Ok(basis) => vec![CheckOutcome::new(
            name,
            expected,
            format!("dimension {}, stabilized {}", basis.dimension(), basis.stabilized),
            basis.dimension() == 0 && basis.stabilized,
        )],
        Err(e) => vec![CheckOutcome::error(name, expected, e)],
    }
}

fn check_02_w2y_dimensions(config: &RunConfig) -> Vec<CheckOutcome> {
    let p = config.policy;
    let mut out = Vec::new();
    for y in 0..=6u32 {
        let name = format!("02 tangent H1 of W_2(y={y})");
        if let Some(row) = gate(&name, &p, y.max(2), 4) {
            out.push(row);
            continue;
        }
        let expected_dim = (y as usize).saturating_sub(1);
        let expected_classes: Vec<String> =
            (0..expected_dim as u32).map(|s| sigma(s, p).to_string()).collect();
        let expected = if expected_dim == 0 {
            "dimension 0".to_string()
        } else {
            format!("dimension {expected_dim}, basis sigma_0..sigma_{}", y - 2)
        };
        let jac = match tangent_jacobian(&ThreefoldSpec::w2_y(y, p), p) {
            Ok(j) => j,
            Err(e) => {
                out.push(CheckOutcome::error(&name, expected, e));
                continue;
            }
        };
        let mut solver = Cohomology::new(&jac);
        match solver.h1_basis_opt(config.growth_cap, false) {
            Ok(basis) => {
                let mut got: Vec<String> =
                    basis.classes.iter().map(|c| c.to_string()).collect();
                got.sort();
                let mut want = expected_classes.clone();
                want.sort();
                let ok = basis.dimension() == expected_dim && got == want;
                out.push(CheckOutcome::new(
                    &name,
                    expected,
                    format!("dimension {}, basis {}", basis.dimension(), got.join(", ")),
                    ok,
                ));
            }
            Err(e) => out.push(CheckOutcome::error(&name, expected, e)),
        }
    }
    out
}

fn check_03_witnesses(config: &RunConfig) -> Vec<CheckOutcome> {
    let p = config.policy;
    let mut out = Vec::new();
    if let Some(row) = gate("03 splitting witnesses", &p, 3, 4) {
        return vec![row];
    }
    let v_mono = |e: Exponent, c: BigRational| MultiSeries::monomial(Chart::V, p, e, c);
    // (y, s, label, alpha components, beta components)
    let third = |num: i64, den: i64| ratio(num, den);
    let cases: Vec<(u32, u32, &str, VectorCochain, Vec<MultiSeries>)> = vec![
        (
            3,
            3,
            "case 1 (s >= y)",
            VectorCochain {
                components: vec![
                    mono(Exponent::new(1, 0, 0), 1, p),
                    MultiSeries::zero(Chart::U, p),
                    MultiSeries::monomial(Chart::U, p, Exponent::new(0, 0, 1), third(2, 3)),
                ],
            },
            vec![
                v_mono(Exponent::new(1, 0, 0), rat(1)),
                v_mono(Exponent::new(0, 1, 0), rat(-2)),
                v_mono(Exponent::new(0, 0, 1), third(-2, 3)),
            ],
        ),
        (
            3,
            2,
            "case 2 (s = y-1)",
            VectorCochain {
                components: vec![
                    MultiSeries::zero(Chart::U, p),
                    MultiSeries::zero(Chart::U, p),
                    MultiSeries::constant(Chart::U, p, third(1, 3)),
                ],
            },
            // the transported correction is the constant -1/y: the rescaled
            // row of the Jacobian cancels the u2 power exactly
            vec![
                MultiSeries::zero(Chart::V, p),
                MultiSeries::zero(Chart::V, p),
                MultiSeries::constant(Chart::V, p, third(-1, 3)),
            ],
        ),
        (
            0,
            2,
            "case 3 (y = 0)",
            VectorCochain {
                components: vec![
                    mono(Exponent::new(1, 0, 2), -1, p),
                    MultiSeries::zero(Chart::U, p),
                    MultiSeries::zero(Chart::U, p),
                ],
            },
            vec![
                v_mono(Exponent::new(1, 0, 2), rat(-1)),
                v_mono(Exponent::new(0, 1, 2), rat(2)),
                MultiSeries::zero(Chart::V, p),
            ],
        ),
    ];
    for (y, s, label, alpha, beta) in cases {
        let name = format!("03 witness {label}, y={y}, s={s}");
        let expected = "solver witness and hand witness both recompose to sigma_s";
        let jac = match tangent_jacobian(&ThreefoldSpec::w2_y(y, p), p) {
            Ok(j) => j,
            Err(e) => {
                out.push(CheckOutcome::error(&name, expected, e));
                continue;
            }
        };
        let mut solver = Cohomology::new(&jac);
        let target = sigma(s, p);
        let solver_ok = match solver.is_coboundary(&target, config.growth_cap) {
            Ok(d) => d.is_coboundary(),
            Err(e) => {
                out.push(CheckOutcome::error(&name, expected, e));
                continue;
            }
        };
        let hand = CoboundaryWitness { alpha, beta };
        let hand_ok = match solver.recompose(&hand, p) {
            Ok(back) => back.sub(&target).map(|d| d.is_zero()).unwrap_or(false),
            Err(e) => {
                out.push(CheckOutcome::error(&name, expected, e));
                continue;
            }
        };
        out.push(CheckOutcome::new(
            &name,
            expected,
            format!("solver witness: {solver_ok}, hand witness recomposes: {hand_ok}"),
            solver_ok && hand_ok,
        ));
    }
    out
}

fn check_04_w3_classes(config: &RunConfig) -> Vec<CheckOutcome> {
    let name = "04 tangent classes z^l u2^s over W_3";
    let expected = "10 non-coboundaries (l = -1, -2; s = 0..4), pairwise independent";
    let p = config.policy;
    if let Some(row) = gate(name, &p, 4, 4) {
        return vec![row];
    }
    let jac = match tangent_jacobian(&ThreefoldSpec::w(3), p) {
        Ok(j) => j,
        Err(e) => return vec![CheckOutcome::error(name, expected, e)],
    };
    let mut solver = Cohomology::new(&jac);
    let mut nontrivial = 0usize;
    let mut space = Echelon::new(false);
    let mut independent = 0usize;
    for l in [-1i32, -2] {
        for s in 0..=4u32 {
            let c = VectorCochain::monomial(3, 1, Exponent::new(l, 0, s), rat(1), p);
            match solver.is_coboundary(&c, config.growth_cap) {
                Ok(d) if !d.is_coboundary() => nontrivial += 1,
                Ok(_) => {}
                Err(e) => return vec![CheckOutcome::error(name, expected, e)],
            }
            match solver.residual_class(&c) {
                Ok(residual) => {
                    if !residual.is_empty() && space.insert(residual).1 {
                        independent += 1;
                    }
                }
                Err(e) => return vec![CheckOutcome::error(name, expected, e)],
            }
        }
    }
    vec![CheckOutcome::new(
        name,
        expected,
        format!("{nontrivial} non-coboundaries, rank {independent}"),
        nontrivial == 10 && independent == 10,
    )]
}

fn check_05_integrability_grid(config: &RunConfig) -> Vec<CheckOutcome> {
    let name = "05 integrability over W_3";
    let expected = "v1 cocycles integrate iff i = 0; v2 cocycles iff s = 0 (l in -4..-1, i,s in 0..3)";
    let p = config.policy;
    if let Some(row) = gate(name, &p, 6, 6) {
        return vec![row];
    }
    let w3 = ThreefoldSpec::w(3);
    let mut mismatches = Vec::new();
    for l in -4..=-1i32 {
        for i in 0..=3u32 {
            for s in 0..=3u32 {
                for (component, want) in [(1usize, i == 0), (2usize, s == 0)] {
                    let c = VectorCochain::monomial(
                        3,
                        component,
                        Exponent::new(l, i, s),
                        rat(1),
                        p,
                    );
                    match integrate_cocycle(&w3, &c, p) {
                        Ok(r) => {
                            if r.is_integrable() != want {
                                mismatches.push(format!(
                                    "slot {} z^{l} u1^{i} u2^{s}",
                                    component + 1
                                ));
                            }
                        }
                        Err(e) => return vec![CheckOutcome::error(name, expected, e)],
                    }
                }
            }
        }
    }
    vec![CheckOutcome::new(
        name,
        expected,
        if mismatches.is_empty() {
            "all 128 verdicts match".to_string()
        } else {
            format!("mismatches: {}", mismatches.join(", "))
        },
        mismatches.is_empty(),
    )]
}

fn check_06_family_construction(config: &RunConfig) -> Vec<CheckOutcome> {
    let p = config.policy;
    let mut out = Vec::new();
    for k in 2..=5i32 {
        let name = format!("06 integrated family of W_{k}");
        if let Some(row) = gate(&name, &p, 1, k + 1) {
            out.push(row);
            continue;
        }
        let expected = format!("v1 = z^{k} u1 + sum t_q z^q u2 with t_q = q + 1");
        let mut cocycle = VectorCochain::zero(3, p);
        let mut expected_spec = ThreefoldSpec::w(k);
        let mut pert = MultiSeries::zero(Chart::U, p);
        for q in 0..k {
            cocycle.components[1] = cocycle.components[1]
                .add(&mono(Exponent::new(q - k, 0, 1), q as i64 + 1, p))
                .expect("same chart");
            pert = pert.add(&mono(Exponent::new(q, 0, 1), q as i64 + 1, p)).expect("same chart");
        }
        expected_spec = expected_spec.with_perturbation(Slot::V1, pert);
        match integrate_cocycle(&ThreefoldSpec::w(k), &cocycle, p) {
            Ok(result) => match result.spec() {
                Some(deformed) => {
                    let got = deformed.forward_values(p);
                    let want = expected_spec.forward_values(p);
                    let ok = got
                        .iter()
                        .zip(&want)
                        .all(|(a, b)| a.sub(b).map(|d| d.is_zero()).unwrap_or(false));
                    out.push(CheckOutcome::new(
                        &name,
                        expected,
                        format!("v1 = {}", got[1]),
                        ok,
                    ));
                }
                None => out.push(CheckOutcome::new(&name, expected, "not integrable", false)),
            },
            Err(e) => out.push(CheckOutcome::error(&name, expected, e)),
        }
    }
    out
}

fn check_07_wq(config: &RunConfig) -> Vec<CheckOutcome> {
    let p = config.policy;
    if let Some(row) = gate("07 factorization and splitting", &p, 0, 10) {
        return vec![row];
    }
    let mut identity_fail = Vec::new();
    let mut split_fail = Vec::new();
    for k in 2..=6i32 {
        for q in 1..k {
            match verify_wq_identity(k, q, p) {
                Ok(true) => {}
                Ok(false) => identity_fail.push(format!("({k},{q})")),
                Err(e) => {
                    return vec![CheckOutcome::error(
                        "07 factorization identity",
                        "true for all 0 < q < k <= 6",
                        e,
                    )]
                }
            }
            let entries = vec![
                mono(Exponent::new(k, 0, 0), 1, p),
                mono(Exponent::new(q, 0, 0), 1, p),
                MultiSeries::zero(Chart::U, p),
                mono(Exponent::new(2 - k, 0, 0), 1, p),
            ];
            let bundle = match BundleTransition::new(2, entries, ThreefoldSpec::w(k), p) {
                Ok(b) => b,
                Err(e) => {
                    return vec![CheckOutcome::error(
                        "07 splitting types",
                        "diagonal exponents (q, 2-q)",
                        e,
                    )]
                }
            };
            match splitting_type_on_line(&bundle) {
                Ok(st) => {
                    let want = if q >= 2 - q { (q, 2 - q) } else { (2 - q, q) };
                    if (st.a1, st.a2) != want {
                        split_fail.push(format!("({k},{q}) -> {st}"));
                    }
                }
                Err(e) => {
                    return vec![CheckOutcome::error(
                        "07 splitting types",
                        "diagonal exponents (q, 2-q)",
                        e,
                    )]
                }
            }
        }
    }
    vec![
        CheckOutcome::new(
            "07 factorization identity",
            "true for all 0 < q < k <= 6",
            if identity_fail.is_empty() {
                "all 15 identities hold".to_string()
            } else {
                format!("failed: {}", identity_fail.join(", "))
            },
            identity_fail.is_empty(),
        ),
        CheckOutcome::new(
            "07 splitting types",
            "off-diagonal z^q matrices split as diag(z^q, z^{2-q})",
            if split_fail.is_empty() {
                "all 15 splittings match".to_string()
            } else {
                format!("failed: {}", split_fail.join(", "))
            },
            split_fail.is_empty(),
        ),
    ]
}

fn check_08_ext_generators(config: &RunConfig) -> Vec<CheckOutcome> {
    let name = "08 Ext^1(O(2), O(-2)) generator monomials";
    let p = config.policy;
    if let Some(row) = gate(name, &p, 2, 4) {
        return vec![row];
    }
    let s_cap = p.u_deg_max - 2;
    let expected_desc = format!(
        "families z*u2^s, u2^s, z^-1*u2^s, z*u1*u2^s, u1*u2^s, z*u1^2*u2^s for s <= {s_cap}"
    );
    let spec = w2_u2(p);
    match ext_generator_monomials(-2, 2, &spec, p) {
        Ok(monomials) => {
            let mut got: Vec<Exponent> =
                monomials.into_iter().filter(|e| e.u2 <= s_cap).collect();
            let mut want = Vec::new();
            for s in 0..=s_cap {
                for (z, u1) in [(1i32, 0u32), (0, 0), (-1, 0), (1, 1), (0, 1), (1, 2)] {
                    want.push(Exponent::new(z, u1, s));
                }
            }
            got.sort();
            want.sort();
            let ok = got == want;
            vec![CheckOutcome::new(
                name,
                expected_desc,
                format!("{} monomials, exact match: {ok}", got.len()),
                ok,
            )]
        }
        Err(e) => vec![CheckOutcome::error(name, expected_desc, e)],
    }
}

fn check_09_moduli(config: &RunConfig) -> Vec<CheckOutcome> {
    let p = config.policy;
    let mut out = Vec::new();
    for k in 1..=3i32 {
        for j in 2..=4i32 {
            let name = format!("09 moduli of W_{k}, splitting type {j}");
            if let Some(row) = gate(&name, &p, 1, 2 * j) {
                out.push(row);
                continue;
            }
            let expected = format!("count {}, projective dimension {}", 4 * (j - 1), 4 * j - 5);
            match first_neighborhood_moduli(j, &ThreefoldSpec::w(k), p, config.growth_cap) {
                Ok(report) => {
                    let ok = report.count == (4 * (j - 1)) as usize
                        && report.projective_dimension == (4 * j - 5) as i64;
                    out.push(CheckOutcome::new(
                        &name,
                        expected,
                        format!(
                            "count {}, projective dimension {}",
                            report.count, report.projective_dimension
                        ),
                        ok,
                    ));
                }
                Err(e) => out.push(CheckOutcome::error(&name, expected, e)),
            }
        }
    }
    let name = "09 moduli at splitting type 1";
    let expected = "W_1 empty; W_2 a point; W_3 one-dimensional";
    let mut got = Vec::new();
    let mut ok = true;
    for (k, want) in [(1i32, -1i64), (2, 0), (3, 1)] {
        match first_neighborhood_moduli(1, &ThreefoldSpec::w(k), p, config.growth_cap) {
            Ok(report) => {
                got.push(format!("W_{k}: {}", report.projective_dimension));
                ok &= report.projective_dimension == want;
            }
            Err(e) => return vec![CheckOutcome::error(name, expected, e)],
        }
    }
    out.push(CheckOutcome::new(name, expected, got.join("; "), ok));
    out
}

fn check_10_deformed_moduli(config: &RunConfig) -> Vec<CheckOutcome> {
    let p = config.policy;
    if let Some(row) = gate("10 deformed moduli", &p, 1, 4) {
        return vec![row];
    }
    let mut out = Vec::new();
    let spec = w2_u2(p);

    // 10a: the shift relating z^-1 u2 and u1
    {
        let name = "10a shift equivalence over tau = u2";
        let expected = "z^-1 u2 and u1 give the same bundle (shift by v1)";
        let pm = ExtensionClass::new(2, mono(Exponent::new(-1, 0, 1), 1, p));
        let qm = ExtensionClass::new(2, mono(Exponent::new(0, 1, 0), 1, p));
        match shift_equivalent(&pm, &qm, &spec, p, config.growth_cap) {
            Ok(ShiftDecision::Equivalent(w)) => {
                out.push(CheckOutcome::new(
                    name,
                    expected,
                    format!("equivalent, lambda = {}, beta = {}", w.lambda, w.beta),
                    true,
                ));
            }
            Ok(ShiftDecision::NotEquivalent { reason }) => {
                out.push(CheckOutcome::new(name, expected, format!("not equivalent: {reason}"), false));
            }
            Err(e) => out.push(CheckOutcome::error(name, expected, e)),
        }
    }

    // 10b: the deformed moduli dimension. The engine disagrees with the
    // tabulated strict drop: the four first-order classes stay independent
    // (consistent with the identification of this deformation with W_1).
    {
        let name = "10b deformed moduli dimension, j = 2";
        let expected = "1 <= projective dimension < 3";
        match first_neighborhood_moduli(2, &spec, p, config.growth_cap) {
            Ok(report) => {
                let d = report.projective_dimension;
                out.push(CheckOutcome::new(
                    name,
                    expected,
                    format!("projective dimension {d}"),
                    (1..3).contains(&d),
                ));
            }
            Err(e) => out.push(CheckOutcome::error(name, expected, e)),
        }
    }

    // 10c: the probe extensions stay non-isomorphic
    {
        let name = "10c probe extensions z u1 vs z u2";
        let expected = "not isomorphic";
        let run = || -> Result<BundleVerdict, Box<dyn std::error::Error>> {
            let e1 = probe_extension(1, &spec, p)?;
            let e2 = probe_extension(2, &spec, p)?;
            Ok(distinguish_bundles(&e1, &e2, config.growth_cap)?)
        };
        match run() {
            Ok(verdict) => out.push(CheckOutcome::new(
                name,
                expected,
                format!("{verdict:?}"),
                verdict.is_not_isomorphic(),
            )),
            Err(e) => out.push(CheckOutcome::error(name, expected, e)),
        }
    }
    out
}

fn check_11_sections(config: &RunConfig) -> Vec<CheckOutcome> {
    let p = config.policy;
    if let Some(row) = gate("11 section extensions", &p, 1, 4) {
        return vec![row];
    }
    let mut out = Vec::new();
    let spec = w2_u2(p);
    let run = || -> Result<(bool, bool, usize, usize), Box<dyn std::error::Error>> {
        let e1 = probe_extension(1, &spec, p)?;
        let e2 = probe_extension(2, &spec, p)?;
        let s0 = VectorCochain::monomial(2, 1, Exponent::ONE, rat(1), e1.policy());
        let mut c1 = Cohomology::new(&e1);
        let ext1 = c1.section_extends(&s0, 1)?;
        let mut c2 = Cohomology::new(&e2);
        let ext2 = c2.section_extends(&s0, 1)?;
        let (d1, _) = threefold_core::bundles::formal_section_dimension(&e1, 1, config.growth_cap)?;
        let (d2, _) = threefold_core::bundles::formal_section_dimension(&e2, 1, config.growth_cap)?;
        Ok((ext1, ext2, d1, d2))
    };
    match run() {
        Ok((ext1, ext2, d1, d2)) => {
            out.push(CheckOutcome::new(
                "11a s_0 extends to the first neighborhood of E_2",
                "extends",
                format!("extends: {ext2}"),
                ext2,
            ));
            // The engine disagrees with the tabulated claim here: the
            // transported image z u1 = xi v1 - v2 is already holomorphic,
            // so [0, 1] extends for E_1 as well.
            out.push(CheckOutcome::new(
                "11b s_0 blocked on the first neighborhood of E_1",
                "does not extend",
                format!("extends: {ext1}"),
                !ext1,
            ));
            out.push(CheckOutcome::new(
                "11c section dimensions differ at N = 1",
                "h0(E_1) != h0(E_2)",
                format!("h0(E_1) = {d1}, h0(E_2) = {d2}"),
                d1 != d2,
            ));
            out.push(CheckOutcome::recorded(
                "11d section dimensions vs tabulated values",
                "tabulated h0 = 5 and 6",
                format!(
                    "engine h0 = {d1} and {d2}{}",
                    if (d1, d2) == (5, 6) { "" } else { " (mismatch with the tabulated values)" }
                ),
            ));
        }
        Err(e) => out.push(CheckOutcome::error("11 section extensions", "see sub-checks", e)),
    }
    out
}

fn check_12_maps(config: &RunConfig) -> Vec<CheckOutcome> {
    let p = config.policy;
    if let Some(row) = gate("12 holomorphic maps", &p, 4, 4) {
        return vec![row];
    }
    let mut out = Vec::new();
    let var_u = |v: Var| MultiSeries::var(Chart::U, p, v);
    let var_v = |v: Var| MultiSeries::var(Chart::V, p, v);
    let v_mono = |e: Exponent, c: i64| MultiSeries::monomial(Chart::V, p, e, rat(c));

    let phi = MapSpec::new(
        [var_u(Var::Base), mono(Exponent::new(1, 2, 0), 1, p), var_u(Var::Fiber2)],
        [var_v(Var::Base), v_mono(Exponent::new(0, 2, 0), 1), v_mono(Exponent::new(1, 0, 1), 1)],
    );
    match verify_map_holomorphic(&phi, &ThreefoldSpec::w(2), &ThreefoldSpec::w(3), p) {
        Ok(holds) => out.push(CheckOutcome::new(
            "12a squaring map W_2 -> W_3",
            "holomorphic",
            format!("holomorphic: {holds}"),
            holds,
        )),
        Err(e) => out.push(CheckOutcome::error("12a squaring map W_2 -> W_3", "holomorphic", e)),
    }

    let psi = MapSpec::new(
        [var_u(Var::Base), var_u(Var::Fiber1), mono(Exponent::new(2, 1, 1), 1, p)],
        [var_v(Var::Base), v_mono(Exponent::new(1, 1, 0), 1), v_mono(Exponent::new(0, 1, 1), 1)],
    );
    match verify_map_holomorphic(&psi, &ThreefoldSpec::w(3), &ThreefoldSpec::w(2), p) {
        Ok(holds) => out.push(CheckOutcome::new(
            "12b projection map W_3 -> W_2",
            "holomorphic",
            format!("holomorphic: {holds}"),
            holds,
        )),
        Err(e) => out.push(CheckOutcome::error("12b projection map W_3 -> W_2", "holomorphic", e)),
    }

    // the two-parameter family map with (t0, t1) = (1, 2); expected to
    // commute by the tabulated claim, but expanding tau(u2') through the
    // map's third coordinate leaves mixed terms, so the engine finds it
    // does not
    let (t0, t1) = (1i64, 2i64);
    let source = ThreefoldSpec::w(3).with_perturbation(
        Slot::V1,
        mono(Exponent::new(2, 0, 0), t0, p)
            .add(&mono(Exponent::new(2, 0, 1), t1, p))
            .expect("same chart"),
    );
    let target = ThreefoldSpec::w(2).with_perturbation(
        Slot::V1,
        mono(Exponent::new(1, 0, 0), t0, p)
            .add(&mono(Exponent::new(1, 0, 1), t1, p))
            .expect("same chart"),
    );
    let third = mono(Exponent::new(2, 1, 1), 1, p)
        .add(&mono(Exponent::new(1, 0, 1), t0, p))
        .and_then(|s| s.add(&mono(Exponent::new(1, 0, 2), t1, p)))
        .expect("same chart");
    let phibar = MapSpec::new(
        [var_u(Var::Base), var_u(Var::Fiber1), third],
        [var_v(Var::Base), v_mono(Exponent::new(1, 1, 0), 1), v_mono(Exponent::new(0, 1, 1), 1)],
    );
    match verify_map_holomorphic(&phibar, &source, &target, p) {
        Ok(holds) => out.push(CheckOutcome::new(
            "12c family map with (t0, t1) = (1, 2)",
            "holomorphic",
            format!("holomorphic: {holds}"),
            holds,
        )),
        Err(e) => {
            out.push(CheckOutcome::error("12c family map with (t0, t1) = (1, 2)", "holomorphic", e))
        }
    }
    out
}

fn check_13_affine(config: &RunConfig) -> Vec<CheckOutcome> {
    let p = config.policy;
    if let Some(row) = gate("13 affine bundles", &p, 2, 2) {
        return vec![row];
    }
    let mut out = Vec::new();
    for (j1, j2) in [(1u32, 2u32), (1, 3), (2, 3)] {
        let name = format!("13 affine bundles E({j1}) vs E({j2})");
        let power = j2 - j1;
        let forced = if power == 1 { "u2".to_string() } else { format!("u2^{power}") };
        let expected = format!("not isomorphic, forced linear part {forced}");
        match affine_bundle_iso(&AffineIsoProblem { j1, j2, ansatz_degree: j2 + 2 }, p) {
            Ok(AffineIsoVerdict::NotIsomorphic { forced_a, .. }) => {
                let ok = forced_a.to_string() == forced;
                out.push(CheckOutcome::new(
                    &name,
                    expected,
                    format!("not isomorphic, forced linear part {forced_a}"),
                    ok,
                ));
            }
            Ok(other) => out.push(CheckOutcome::new(&name, expected, format!("{other:?}"), false)),
            Err(e) => out.push(CheckOutcome::error(&name, expected, e)),
        }
    }
    out
}

fn check_14_rigidity(config: &RunConfig) -> Vec<CheckOutcome> {
    let p = config.policy;
    if let Some(row) = gate("14 rigidity classification", &p, 3, 4) {
        return vec![row];
    }
    let mut out = Vec::new();
    // (k1, k2, expected classification); the (0, -1) expectation is the
    // tabulated one, which the engine refutes: functions on the O(1)
    // summand already carry nonzero H^1
    let cases: [(i32, i32, &str); 7] = [
        (0, -1, "zero"),
        (0, 0, "zero"),
        (2, 1, "finite"),
        (3, 2, "finite"),
        (2, -1, "growing"),
        (3, 0, "growing"),
        (3, -1, "growing"),
    ];
    for (k1, k2, want) in cases {
        let name = format!("14 rigidity of W_({k1},{k2})");
        match classify_rigidity(k1, k2, p, config.growth_cap) {
            Ok(class) => {
                let got = match &class {
                    RigidityClass::Zero => "zero".to_string(),
                    RigidityClass::Finite(n) => format!("finite({n})"),
                    RigidityClass::GrowingPattern { dims_by_u_cap } => {
                        let dims: Vec<String> =
                            dims_by_u_cap.iter().map(|(c, d)| format!("{d}@{c}")).collect();
                        format!("growing [{}]", dims.join(", "))
                    }
                };
                let ok = got.starts_with(want);
                out.push(CheckOutcome::new(&name, want, got, ok));
            }
            Err(e) => out.push(CheckOutcome::error(&name, want, e)),
        }
    }
    out
}

fn check_15_endomorphisms(config: &RunConfig) -> Vec<CheckOutcome> {
    let p = config.policy;
    if let Some(row) = gate("15 End(TW_2) classes", &p, 4, 4) {
        return vec![row];
    }
    let run = |classes: Vec<(usize, Exponent)>| -> Result<Vec<(String, bool)>, Box<dyn std::error::Error>> {
        let jac = tangent_jacobian(&ThreefoldSpec::w(2), p)?;
        let end = threefold_core::geometry::endomorphism_transition(&jac)?;
        let mut solver = Cohomology::new(&end);
        let mut results = Vec::new();
        for (pos, e) in classes {
            let c = VectorCochain::monomial(9, pos, e, rat(1), p);
            let decision = solver.is_coboundary_mod(&c, e.u_degree(), config.growth_cap)?;
            results.push((
                format!("position {}, z^{} u1^{} u2^{}", pos + 1, e.z, e.u1, e.u2),
                !decision.is_coboundary(),
            ));
        }
        Ok(results)
    };
    let summarize = |name: &str, expected: &str, results: Result<Vec<(String, bool)>, Box<dyn std::error::Error>>| match results {
        Ok(results) => {
            let bad: Vec<String> =
                results.iter().filter(|(_, ok)| !ok).map(|(n, _)| n.clone()).collect();
            CheckOutcome::new(
                name,
                expected,
                if bad.is_empty() {
                    format!("{} non-coboundaries", results.len())
                } else {
                    format!("split: {}", bad.join(", "))
                },
                bad.is_empty(),
            )
        }
        Err(e) => CheckOutcome::error(name, expected, e),
    };
    // row-major positions (1-based) 4, 6 and 7 of the vectorized
    // endomorphism; entries listed with increasing u2 power
    let mut pure: Vec<(usize, Exponent)> = Vec::new();
    let mut mixed: Vec<(usize, Exponent)> = Vec::new();
    for s in 0..=2u32 {
        mixed.push((3, Exponent::new(-1, 1, s)));
        for i in 1..=3i32 {
            pure.push((3, Exponent::new(-i, 0, s)));
        }
        pure.push((5, Exponent::new(-1, 0, s)));
        pure.push((6, Exponent::new(-1, 0, s)));
    }
    vec![
        summarize(
            "15 End(TW_2) classes z^-i u2^s at positions 4, 6, 7",
            "15 non-coboundaries (i = 1..3 at position 4; i = 1 at 6, 7; s = 0, 1, 2)",
            run(pure),
        ),
        // The tabulated generator list also names z^-1 u1 u2^s at position
        // 4, but these split exactly: conjugating the (1,1) elementary
        // matrix moves it by 2 z^-1 u1 into the (2,1) slot, so the engine
        // finds the splitting with beta = -(1/2) E_11 v2^s.
        summarize(
            "15 End(TW_2) mixed classes z^-1 u1 u2^s at position 4",
            "3 non-coboundaries (s = 0, 1, 2)",
            run(mixed),
        ),
    ]
}

fn check_16_properties(config: &RunConfig) -> Vec<CheckOutcome> {
    let p = config.policy;
    if let Some(row) = gate("16 property suites", &p, 2, 4) {
        return vec![row];
    }
    let mut out = Vec::new();
    let mut rng = StdRng::seed_from_u64(0x5eed);

    // 16a: assembled splittings are always accepted
    {
        let name = "16a random splittings accepted";
        let expected = "200 of 200 per geometry";
        let mut accepted = 0usize;
        let mut total = 0usize;
        let mut failed = None;
        'outer: for spec in [ThreefoldSpec::w2_y(2, p), ThreefoldSpec::w(3)] {
            let jac = match tangent_jacobian(&spec, p) {
                Ok(j) => j,
                Err(e) => {
                    out.push(CheckOutcome::error(name, expected, e));
                    break 'outer;
                }
            };
            let mut solver = Cohomology::new(&jac);
            let mut count = 0usize;
            while count < 200 {
                let alpha = VectorCochain {
                    components: (0..3)
                        .map(|_| random_holomorphic(&mut rng, Chart::U, p))
                        .collect(),
                };
                let beta: Vec<MultiSeries> =
                    (0..3).map(|_| random_holomorphic(&mut rng, Chart::V, p)).collect();
                let witness = CoboundaryWitness { alpha, beta };
                let c = match solver.recompose(&witness, p) {
                    Ok(c) => c,
                    Err(e) => {
                        out.push(CheckOutcome::error(name, expected, e));
                        break 'outer;
                    }
                };
                if c.boundary_touched() {
                    continue;
                }
                count += 1;
                total += 1;
                match solver.is_coboundary(&c, config.growth_cap) {
                    Ok(d) if d.is_coboundary() => accepted += 1,
                    Ok(_) => failed = Some(c.to_string()),
                    Err(e) => {
                        out.push(CheckOutcome::error(name, expected, e));
                        break 'outer;
                    }
                }
            }
        }
        out.push(CheckOutcome::new(
            name,
            expected,
            match failed {
                None => format!("{accepted} of {total} accepted"),
                Some(c) => format!("{accepted} of {total} accepted; first rejection {c}"),
            },
            accepted == total && total == 400,
        ));
    }

    // 16b: substitution homomorphism and transition round trip
    {
        let name = "16b substitution homomorphism and round trip";
        let expected = "200 of 200 identities hold";
        let spec = ThreefoldSpec::w2_y(1, p);
        let t = threefold_core::geometry::build_transition(&spec, p);
        let rules = t.inverse().expect("invertible");
        let mut good = 0usize;
        for _ in 0..200 {
            let a = random_interior(&mut rng, p);
            let b = random_interior(&mut rng, p);
            let hom = (|| {
                let prod = a.mul(&b).ok()?.substitute(rules).ok()?;
                let prod2 = a.substitute(rules).ok()?.mul(&b.substitute(rules).ok()?).ok()?;
                Some(prod.sub(&prod2).ok()?.is_zero())
            })()
            .unwrap_or(false);
            let round = (|| {
                let there = a.substitute(rules).ok()?;
                let back = there.substitute(&t.v_to_u).ok()?;
                if back.boundary_touched() || there.boundary_touched() {
                    return Some(true); // boundary cases carry no claim
                }
                Some(back.sub(&a).ok()?.is_zero())
            })()
            .unwrap_or(false);
            if hom && round {
                good += 1;
            }
        }
        out.push(CheckOutcome::new(name, expected, format!("{good} of 200"), good == 200));
    }

    // 16c: reduction idempotence
    {
        let name = "16c reduction idempotence";
        let expected = "200 of 200 idempotent";
        let jac = tangent_jacobian(&ThreefoldSpec::w2_y(2, p), p).expect("unit determinant");
        let mut solver = Cohomology::new(&jac);
        let mut good = 0usize;
        for _ in 0..200 {
            let comp = rng.random_range(0..3);
            let e = Exponent::new(
                rng.random_range(-3..=-1),
                rng.random_range(0..=1),
                rng.random_range(0..=2),
            );
            let c = VectorCochain::monomial(3, comp, e, rat(rng.random_range(1..=3)), p);
            let check = (|| {
                let once = solver.reduce_representative(&c).ok()?;
                let twice = solver.reduce_representative(&once).ok()?;
                Some(once == twice)
            })()
            .unwrap_or(false);
            if check {
                good += 1;
            }
        }
        out.push(CheckOutcome::new(name, expected, format!("{good} of 200"), good == 200));
    }

    // 16d: shift equivalence behaves like an equivalence relation
    {
        let name = "16d shift equivalence relation laws";
        let expected = "reflexive, symmetric, transitive";
        let spec = w2_u2(p);
        let base = ExtensionClass::new(2, mono(Exponent::new(-1, 0, 1), 1, p));
        let shifted = ExtensionClass::new(
            2,
            mono(Exponent::new(-1, 0, 1), 3, p)
                .add(&mono(Exponent::new(2, 1, 1), 2, p))
                .expect("same chart"),
        );
        let third = ExtensionClass::new(
            2,
            mono(Exponent::new(-1, 0, 1), -2, p)
                .add(&mono(Exponent::new(3, 0, 1), 1, p))
                .expect("same chart"),
        );
        let run = || -> Result<bool, Box<dyn std::error::Error>> {
            let refl = shift_equivalent(&base, &base, &spec, p, config.growth_cap)?;
            let pq = shift_equivalent(&base, &shifted, &spec, p, config.growth_cap)?;
            let qp = shift_equivalent(&shifted, &base, &spec, p, config.growth_cap)?;
            let qr = shift_equivalent(&shifted, &third, &spec, p, config.growth_cap)?;
            let pr = shift_equivalent(&base, &third, &spec, p, config.growth_cap)?;
            let sym = match (&pq, &qp) {
                (ShiftDecision::Equivalent(a), ShiftDecision::Equivalent(b)) => {
                    a.lambda.clone() * b.lambda.clone() == BigRational::one()
                }
                _ => false,
            };
            Ok(refl.is_equivalent() && sym && qr.is_equivalent() && pr.is_equivalent())
        };
        match run() {
            Ok(ok) => out.push(CheckOutcome::new(
                name,
                expected,
                if ok { "all laws hold" } else { "a law failed" },
                ok,
            )),
            Err(e) => out.push(CheckOutcome::error(name, expected, e)),
        }
    }
    out
}

fn random_holomorphic(rng: &mut StdRng, chart: Chart, p: TruncationPolicy) -> MultiSeries {
    let mut out = MultiSeries::zero(chart, p);
    for _ in 0..2 {
        let e = Exponent::new(rng.random_range(0..=2), rng.random_range(0..=1), rng.random_range(0..=1));
        let c = rat(rng.random_range(-3..=3));
        out = out.add(&MultiSeries::monomial(chart, p, e, c)).expect("same chart");
    }
    out
}

fn random_interior(rng: &mut StdRng, p: TruncationPolicy) -> MultiSeries {
    let mut out = MultiSeries::zero(Chart::U, p);
    for _ in 0..3 {
        let e = Exponent::new(rng.random_range(-2..=2), rng.random_range(0..=1), rng.random_range(0..=1));
        let c = rat(rng.random_range(-3..=3));
        out = out.add(&MultiSeries::monomial(Chart::U, p, e, c)).expect("same chart");
    }
    out
}
