//! Acceptance gate: every headline computation, one test per criterion,
//! printing one pass/fail line per table row. The expectations mirror the
//! suite table exactly; the handful of red rows are deliberate — the
//! engine's exact values, cross-checked by the independent oracle at the
//! bottom of this file, contradict the originally tabulated expectations
//! there, and the tests record that honestly rather than bending the
//! assertions.

use std::sync::OnceLock;

use threefold_cli::config::RunConfig;
use threefold_cli::suite::{run_suite, CheckStatus, SuiteOutcome};

static OUTCOME: OnceLock<SuiteOutcome> = OnceLock::new();

fn outcome() -> &'static SuiteOutcome {
    OUTCOME.get_or_init(|| run_suite(&RunConfig::default()))
}

/// Assert that every row whose name starts with `prefix` passed (or has the
/// explicitly allowed status), printing each row on the way.
fn assert_rows(prefix: &str, allowed: &[CheckStatus]) {
    let rows: Vec<_> =
        outcome().checks.iter().filter(|c| c.name.starts_with(prefix)).collect();
    assert!(!rows.is_empty(), "no suite rows named `{prefix}*`");
    let mut bad = Vec::new();
    for row in rows {
        println!(
            "{}: {} (expected {}; computed {})",
            row.name,
            row.status.as_str(),
            row.expected,
            row.computed
        );
        if !allowed.contains(&row.status) {
            bad.push(format!(
                "{} -> {} (expected {}, computed {})",
                row.name,
                row.status.as_str(),
                row.expected,
                row.computed
            ));
        }
    }
    assert!(bad.is_empty(), "failing rows:\n{}", bad.join("\n"));
}

fn assert_pass(prefix: &str) {
    assert_rows(prefix, &[CheckStatus::Pass]);
}

#[test]
fn criterion_01_w1_rigidity() {
    assert_pass("01");
}

#[test]
fn criterion_02_w2y_dimensions_and_bases() {
    assert_pass("02");
}

#[test]
fn criterion_03_coboundary_witnesses() {
    assert_pass("03");
}

#[test]
fn criterion_04_w3_classes() {
    assert_pass("04");
}

#[test]
fn criterion_05_integrability_grid() {
    assert_pass("05");
}

#[test]
fn criterion_06_family_construction() {
    assert_pass("06");
}

#[test]
fn criterion_07_wq_identity_and_splitting() {
    assert_pass("07");
}

#[test]
fn criterion_08_ext_generators() {
    assert_pass("08");
}

#[test]
fn criterion_09_moduli_dimensions() {
    assert_pass("09");
}

#[test]
fn criterion_10a_shift_equivalence() {
    assert_pass("10a");
}

#[test]
fn criterion_10b_deformed_moduli_drop_known_discrepancy() {
    // Tabulated: the tau = u2 deformation drops the projective dimension
    // below 3. The engine keeps all four first-order classes independent,
    // consistent with this deformation being a relabeling of W_1, whose
    // moduli at splitting type 2 also has dimension 4*2 - 5 = 3.
    assert_pass("10b");
}

#[test]
fn criterion_10c_probe_bundles_not_isomorphic() {
    assert_pass("10c");
}

#[test]
fn criterion_11a_s0_extends_over_e2() {
    assert_pass("11a");
}

#[test]
fn criterion_11b_s0_blocked_over_e1_known_discrepancy() {
    // Tabulated: s_0 = [0, 1] does not extend to the first neighborhood of
    // E_1. The engine finds that it extends as a global section: the
    // transported image is [z u1, z^-2] = [xi v1 - v2, xi^2], holomorphic
    // on the V chart. The oracle below confirms the section count.
    assert_pass("11b");
}

#[test]
fn criterion_11c_section_dimensions_differ_known_discrepancy() {
    // Tabulated: h0 on the first neighborhood distinguishes E_1 from E_2.
    // The engine computes equal dimensions; the independent oracle in
    // `oracle_section_counts` agrees.
    assert_pass("11c");
}

#[test]
fn criterion_11d_section_dimensions_recorded() {
    assert_rows("11d", &[CheckStatus::Recorded]);
}

#[test]
fn criterion_12ab_maps() {
    assert_pass("12a");
    assert_pass("12b");
}

#[test]
fn criterion_12c_family_map_known_discrepancy() {
    // Tabulated: the family map commutes for any parameters. Composing the
    // target rule with the map inserts the third coordinate into every
    // tau power, which leaves mixed terms whenever t_s != 0 for s >= 1;
    // the identity holds only for single-parameter families.
    assert_pass("12c");
}

#[test]
fn criterion_13_affine_bundles() {
    assert_pass("13");
}

#[test]
fn criterion_14_rigidity_classification() {
    for pair in ["(0,0)", "(2,1)", "(3,2)", "(2,-1)", "(3,0)", "(3,-1)"] {
        assert_pass(&format!("14 rigidity of W_{pair}"));
    }
}

#[test]
fn criterion_14_positive_summand_rigidity_known_discrepancy() {
    // Tabulated: W_(0,-1) is formally rigid. The engine refutes it: the
    // O(1) summand's function sheaf already has nonzero H^1 (classes
    // z^-l u2^s with 1 <= l <= s-1 feed the tangent direction along the
    // trivial factor), so the deformation space keeps growing.
    assert_pass("14 rigidity of W_(0,-1)");
}

#[test]
fn criterion_15_endomorphism_classes() {
    assert_pass("15 End(TW_2) classes");
}

#[test]
fn criterion_15_mixed_classes_known_discrepancy() {
    // Tabulated: z^-1 u1 u2^s at position 4 are nonzero classes. They
    // split exactly: conjugating the (1,1) elementary matrix produces
    // -2 z^-1 u1 in the (2,1) slot, so beta = -(1/2) E_11 v2^s is a
    // witness. The engine returns that witness.
    assert_pass("15 End(TW_2) mixed classes");
}

#[test]
fn criterion_16_property_suites() {
    assert_pass("16");
}

// ---------------------------------------------------------------------
// Independent oracle for the section counts of criterion 11: a separate
// brute-force linear-algebra computation of h0 on the first neighborhood
// for the two probe extensions over the tau = u2 deformation, written
// directly against the transition rules with its own tiny exact solver.
// ---------------------------------------------------------------------

mod oracle {
    use num_rational::BigRational;
    use num_traits::Zero;
    use std::collections::BTreeMap;

    /// V-chart monomial xi^e v1^i v2^s.
    type VMono = (i64, u8, u8);
    type VPoly = BTreeMap<VMono, BigRational>;

    fn add_term(poly: &mut VPoly, m: VMono, c: BigRational) {
        let entry = poly.entry(m).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            poly.remove(&m);
        }
    }

    /// Transform z^m u1^i u2^s (i + s <= 1) to the V chart of the tau = u2
    /// deformation: z = xi^-1, u1 = xi^2 v1 - xi v2, u2 = v2.
    fn to_v(m: i64, i: u8, s: u8, c: &BigRational) -> VPoly {
        let mut out = VPoly::new();
        match i {
            0 => add_term(&mut out, (-m, 0, s), c.clone()),
            1 => {
                add_term(&mut out, (2 - m, 1, s), c.clone());
                add_term(&mut out, (1 - m, 0, s + 1), -c.clone());
            }
            _ => panic!("first neighborhood only"),
        }
        out
    }

    type Column = BTreeMap<(usize, VMono), BigRational>;

    /// Exact kernel dimension of the homogeneous system given by sparse
    /// columns (one per unknown).
    fn kernel_dim(columns: Vec<Column>) -> usize {
        let mut rows: Vec<Column> = Vec::new();
        let mut kernel = 0usize;
        for mut col in columns {
            // eliminate against existing pivots
            while let Some((lead, coeff)) = col.iter().next().map(|(k, v)| (*k, v.clone())) {
                let Some(row) = rows.iter().find(|r| r.keys().next() == Some(&lead)) else {
                    break;
                };
                let factor = coeff.clone();
                let row = row.clone();
                for (k, v) in &row {
                    let entry = col.entry(*k).or_insert_with(BigRational::zero);
                    *entry -= &factor * v;
                    if entry.is_zero() {
                        col.remove(k);
                    }
                }
            }
            if col.is_empty() {
                kernel += 1;
            } else {
                // normalize the pivot to 1
                let lead_coeff = col.values().next().unwrap().clone();
                for v in col.values_mut() {
                    *v /= lead_coeff.clone();
                }
                rows.push(col);
                rows.sort_by(|a, b| a.keys().next().cmp(&b.keys().next()));
            }
        }
        kernel
    }

    /// h0 of [[z^2, p], [0, z^-2]] on the first neighborhood, where p is
    /// z*u1 (probe 1) or z*u2 (probe 2). Unknown sections [a, b] run over
    /// U-monomials z^m u1^i u2^s with 0 <= m <= deg_bound, i + s <= 1; the
    /// constraints say every negative xi power of the transported image
    /// vanishes (mod fiber degree 2).
    pub fn section_count(probe: u8, deg_bound: i64) -> usize {
        let one = || BigRational::from_integer(1.into());
        let mut unknowns: Vec<(usize, i64, u8, u8)> = Vec::new();
        for comp in 0..2usize {
            for m in 0..=deg_bound {
                for (i, s) in [(0u8, 0u8), (1, 0), (0, 1)] {
                    unknowns.push((comp, m, i, s));
                }
            }
        }
        let mut columns = Vec::new();
        for (comp, m, i, s) in unknowns {
            // image of the unknown monomial under the transition
            let mut image: Vec<(usize, VPoly)> = Vec::new();
            match comp {
                0 => {
                    // a sits in the first component: contributes z^2 * a
                    image.push((0, to_v(m + 2, i, s, &one())));
                }
                1 => {
                    // b contributes p * b to the first component (dropping
                    // fiber degree 2) and z^-2 b to the second
                    if i == 0 && s == 0 {
                        match probe {
                            1 => image.push((0, to_v(m + 1, 1, 0, &one()))),
                            2 => image.push((0, to_v(m + 1, 0, 1, &one()))),
                            _ => unreachable!(),
                        }
                    }
                    image.push((1, to_v(m - 2, i, s, &one())));
                }
                _ => unreachable!(),
            }
            // keep only the principal (negative xi power) part
            let mut col = BTreeMap::new();
            for (row, poly) in image {
                for ((e, vi, vs), c) in poly {
                    if e < 0 {
                        let entry =
                            col.entry((row, (e, vi, vs))).or_insert_with(BigRational::zero);
                        *entry += c;
                        if entry.is_zero() {
                            col.remove(&(row, (e, vi, vs)));
                        }
                    }
                }
            }
            columns.push(col);
        }
        kernel_dim(columns)
    }
}

#[test]
fn oracle_section_counts_match_the_engine() {
    // stability of the oracle under its own degree bound
    let e1_lo = oracle::section_count(1, 8);
    let e1_hi = oracle::section_count(1, 12);
    let e2_lo = oracle::section_count(2, 8);
    let e2_hi = oracle::section_count(2, 12);
    assert_eq!(e1_lo, e1_hi, "oracle not stable for probe 1");
    assert_eq!(e2_lo, e2_hi, "oracle not stable for probe 2");
    println!("oracle h0 on the first neighborhood: E_1 = {e1_hi}, E_2 = {e2_hi}");
    // frozen oracle values, computed before wiring the comparison
    assert_eq!((e1_hi, e2_hi), (11, 11));
    // engine agreement
    let row = outcome()
        .checks
        .iter()
        .find(|c| c.name.starts_with("11c"))
        .expect("row 11c present");
    assert_eq!(
        row.computed,
        format!("h0(E_1) = {e1_hi}, h0(E_2) = {e2_hi}"),
        "engine and oracle disagree"
    );
}
