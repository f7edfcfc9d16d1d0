//! `threefold`: exact two-chart cohomology computations from the command
//! line. Exit codes: 0 on a certified result, 1 on parse or usage errors,
//! 2 when the truncation window was too small to certify an answer.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use threefold_cli::cache;
use threefold_cli::config::{OutputFormat, RunConfig};
use threefold_cli::report::*;
use threefold_cli::specfile;
use threefold_cli::suite;

use threefold_core::bundles::{
    distinguish_bundles, first_neighborhood_moduli, formal_section_dimension,
    splitting_type_on_line, BundleVerdict, BundlesError,
};
use threefold_core::cech::{ext_group_basis, CechError, Cohomology};
use threefold_core::deform::{
    affine_bundle_iso, integrate_cocycle, verify_map_holomorphic, AffineIsoProblem,
    AffineIsoVerdict, DeformError, IntegrationResult,
};
use threefold_core::geometry::{
    endomorphism_transition, extension_to_transition, line_bundle_transition, tangent_jacobian,
    ExtensionClass, GeometryError,
};
use threefold_core::series::Chart;

#[derive(Parser)]
#[command(
    name = "threefold",
    about = "Exact Cech cohomology on two-chart total spaces over the projective line",
    version
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// Config file in the key-value format; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cap on the total fiber degree u1 + u2.
    #[arg(long, global = true)]
    u_deg: Option<u32>,
    /// Lower bound of the base exponent window.
    #[arg(long, global = true, allow_negative_numbers = true)]
    z_min: Option<i32>,
    /// Upper bound of the base exponent window.
    #[arg(long, global = true, allow_negative_numbers = true)]
    z_max: Option<i32>,
    /// Number of window doublings tried before giving up.
    #[arg(long, global = true)]
    growth_cap: Option<u32>,
    /// Output format: text or json.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Directory for the content-addressed report cache.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// First cohomology of a bundle over a spec file.
    H1 {
        #[arg(long)]
        spec: PathBuf,
        /// One of `tangent`, `end-tangent`, or `line:<d>`.
        #[arg(long)]
        bundle: String,
    },
    /// Ext^1(O(j), O(-j)) classes and generator monomials.
    Ext {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        j: i32,
    },
    /// First-neighborhood moduli of splitting type j.
    Moduli {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        j: i32,
    },
    /// Sections of an extension bundle on a formal neighborhood.
    Sections {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        j: i32,
        /// Extension cocycle in U variables, e.g. "z*u2".
        #[arg(long, allow_hyphen_values = true)]
        p: String,
        #[arg(long, default_value_t = 0)]
        neighborhood: u32,
    },
    /// Splitting type of an extension bundle on the zero section.
    SplitType {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        j: i32,
        #[arg(long, allow_hyphen_values = true)]
        p: String,
    },
    /// Compare two extension bundles over the same spec.
    Iso {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        j: i32,
        #[arg(long, allow_hyphen_values = true)]
        p: String,
        #[arg(long, allow_hyphen_values = true)]
        q: String,
    },
    /// Integrate a tangent cocycle into new gluing data.
    Integrate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        cocycle: PathBuf,
    },
    /// Decide affine-bundle isomorphism of E(j1) and E(j2).
    AffineIso {
        #[arg(long)]
        j1: u32,
        #[arg(long)]
        j2: u32,
        #[arg(long)]
        ansatz: Option<u32>,
    },
    /// Check that a map between two specs is holomorphic.
    VerifyMap {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
    },
    /// Run the whole verification suite.
    Suite,
}

struct CommandOutput {
    text: String,
    json: serde_json::Value,
    code: u8,
}

impl CommandOutput {
    fn from_report<T: Serialize>(report: &T, text: String, code: u8) -> Result<Self, CliError> {
        Ok(CommandOutput {
            text,
            json: serde_json::to_value(report).map_err(|e| CliError::internal(e.to_string()))?,
            code,
        })
    }
}

struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { message: message.into(), code: 1 }
    }

    fn internal(message: impl Into<String>) -> Self {
        CliError { message: message.into(), code: 1 }
    }
}

impl From<specfile::ParseError> for CliError {
    fn from(e: specfile::ParseError) -> Self {
        CliError { message: e.to_string(), code: 1 }
    }
}

impl From<CechError> for CliError {
    fn from(e: CechError) -> Self {
        let code = match &e {
            CechError::WindowTooSmall { .. } => 2,
            _ => 1,
        };
        CliError { message: e.to_string(), code }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError { message: e.to_string(), code: 1 }
    }
}

impl From<BundlesError> for CliError {
    fn from(e: BundlesError) -> Self {
        match e {
            BundlesError::Cech(inner) => inner.into(),
            other => CliError { message: other.to_string(), code: 1 },
        }
    }
}

impl From<DeformError> for CliError {
    fn from(e: DeformError) -> Self {
        match e {
            DeformError::Cech(inner) => inner.into(),
            other => CliError { message: other.to_string(), code: 1 },
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn build_config(opts: &GlobalOpts) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::default();
    if let Some(path) = &opts.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        config.apply_file(&text)?;
    }
    let mut u_deg = config.policy.u_deg_max;
    let mut z_min = config.policy.z_min;
    let mut z_max = config.policy.z_max;
    if let Some(v) = opts.u_deg {
        u_deg = v;
    }
    if let Some(v) = opts.z_min {
        z_min = v;
    }
    if let Some(v) = opts.z_max {
        z_max = v;
    }
    if !(z_min <= 0 && 0 <= z_max) {
        return Err(CliError::usage("the base window must contain z^0"));
    }
    config.policy = threefold_core::series::TruncationPolicy::new(u_deg, z_min, z_max);
    if let Some(v) = opts.growth_cap {
        config.growth_cap = v;
    }
    if let Some(v) = &opts.format {
        config.format = match v.as_str() {
            "text" => OutputFormat::Text,
            "json" => OutputFormat::Json,
            other => return Err(CliError::usage(format!("unknown format `{other}`"))),
        };
    }
    if let Some(dir) = &opts.cache_dir {
        config.cache_dir = Some(dir.clone());
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let config = build_config(&cli.global)?;

    // cache key: every input file, the command identity, and the config
    let mut key_parts: Vec<Vec<u8>> = Vec::new();
    let command_id;
    let add_file = |path: &PathBuf, parts: &mut Vec<Vec<u8>>| -> Result<Vec<u8>, CliError> {
        let bytes =
            fs::read(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        parts.push(bytes.clone());
        Ok(bytes)
    };

    let output = match &cli.command {
        Command::H1 { spec, bundle } => {
            let bytes = add_file(spec, &mut key_parts)?;
            command_id = format!("h1:{bundle}");
            cmd_h1(&config, &bytes, bundle)?
        }
        Command::Ext { spec, j } => {
            let bytes = add_file(spec, &mut key_parts)?;
            command_id = format!("ext:{j}");
            cmd_ext(&config, &bytes, *j)?
        }
        Command::Moduli { spec, j } => {
            let bytes = add_file(spec, &mut key_parts)?;
            command_id = format!("moduli:{j}");
            cmd_moduli(&config, &bytes, *j)?
        }
        Command::Sections { spec, j, p, neighborhood } => {
            let bytes = add_file(spec, &mut key_parts)?;
            command_id = format!("sections:{j}:{p}:{neighborhood}");
            cmd_sections(&config, &bytes, *j, p, *neighborhood)?
        }
        Command::SplitType { spec, j, p } => {
            let bytes = add_file(spec, &mut key_parts)?;
            command_id = format!("split-type:{j}:{p}");
            cmd_split_type(&config, &bytes, *j, p)?
        }
        Command::Iso { spec, j, p, q } => {
            let bytes = add_file(spec, &mut key_parts)?;
            command_id = format!("iso:{j}:{p}:{q}");
            cmd_iso(&config, &bytes, *j, p, q)?
        }
        Command::Integrate { spec, cocycle } => {
            let spec_bytes = add_file(spec, &mut key_parts)?;
            let cocycle_bytes = add_file(cocycle, &mut key_parts)?;
            command_id = "integrate".to_string();
            cmd_integrate(&config, &spec_bytes, &cocycle_bytes)?
        }
        Command::AffineIso { j1, j2, ansatz } => {
            command_id = format!("affine-iso:{j1}:{j2}:{ansatz:?}");
            cmd_affine_iso(&config, *j1, *j2, *ansatz)?
        }
        Command::VerifyMap { map, source, target } => {
            let map_bytes = add_file(map, &mut key_parts)?;
            let source_bytes = add_file(source, &mut key_parts)?;
            let target_bytes = add_file(target, &mut key_parts)?;
            command_id = "verify-map".to_string();
            cmd_verify_map(&config, &map_bytes, &source_bytes, &target_bytes)?
        }
        Command::Suite => {
            command_id = "suite".to_string();
            cmd_suite(&config)?
        }
    };

    // serve and populate the cache when enabled
    let rendered = match config.format {
        OutputFormat::Text => output.text.clone(),
        OutputFormat::Json => serde_json::to_string_pretty(&output.json)
            .map_err(|e| CliError::internal(e.to_string()))?,
    };
    if let Some(dir) = &config.cache_dir {
        let mut parts: Vec<&[u8]> = vec![command_id.as_bytes()];
        for p in &key_parts {
            parts.push(p);
        }
        let canonical = config.canonical_string();
        parts.push(canonical.as_bytes());
        let format_tag = match config.format {
            OutputFormat::Text => "text",
            OutputFormat::Json => "json",
        };
        parts.push(format_tag.as_bytes());
        let key = cache::cache_key(&parts);
        if let Some(hit) = cache::lookup(dir, &key) {
            if let Ok(entry) = serde_json::from_str::<serde_json::Value>(&hit) {
                if let (Some(out), Some(code)) = (
                    entry.get("stdout").and_then(|v| v.as_str()),
                    entry.get("exit_code").and_then(|v| v.as_u64()),
                ) {
                    print_ignoring_closed_pipe(out.trim_end_matches('\n'));
                    return Ok(code as u8);
                }
            }
        }
        let entry = serde_json::json!({
            "exit_code": output.code,
            "stdout": format!("{rendered}\n"),
        });
        let _ = cache::store(dir, &key, &entry.to_string());
    }
    print_ignoring_closed_pipe(&rendered);
    Ok(output.code)
}

fn print_ignoring_closed_pipe(text: &str) {
    use std::io::Write;
    let stdout = std::io::stdout();
    let mut handle = stdout.lock();
    let _ = writeln!(handle, "{text}");
    let _ = handle.flush();
}

fn parse_spec(
    config: &RunConfig,
    bytes: &[u8],
) -> Result<threefold_core::geometry::ThreefoldSpec, CliError> {
    let text =
        std::str::from_utf8(bytes).map_err(|_| CliError::usage("spec file is not UTF-8"))?;
    Ok(specfile::parse_threefold_spec(text, config.policy)?)
}

fn cmd_h1(config: &RunConfig, spec_bytes: &[u8], bundle: &str) -> Result<CommandOutput, CliError> {
    let spec = parse_spec(config, spec_bytes)?;
    let p = config.policy;
    let transition = match bundle {
        "tangent" => tangent_jacobian(&spec, p)?,
        "end-tangent" => endomorphism_transition(&tangent_jacobian(&spec, p)?)?,
        other => match other.strip_prefix("line:") {
            Some(d) => {
                let d: i32 = d
                    .parse()
                    .map_err(|_| CliError::usage(format!("bad line bundle degree `{d}`")))?;
                line_bundle_transition(d, &spec, p)?
            }
            None => {
                return Err(CliError::usage(format!(
                    "unknown bundle `{other}`; use tangent, end-tangent or line:<d>"
                )))
            }
        },
    };
    let mut solver = Cohomology::new(&transition);
    let basis = solver.h1_basis(config.growth_cap)?;
    let report = BasisReport::from_basis(&basis);
    let mut text = format!("h1 dimension: {}\n", report.dimension);
    for class in &report.classes {
        text.push_str(&format!("  class {class}\n"));
    }
    if let Some(pattern) = &report.family_pattern {
        text.push_str(&format!("pattern: {pattern}\n"));
    }
    text.push_str(&format!(
        "window: u-deg {}, z in [{}, {}]; stabilized: {}",
        report.certified_window.u_deg,
        report.certified_window.z_min,
        report.certified_window.z_max,
        report.stabilized
    ));
    CommandOutput::from_report(&report, text, 0)
}

fn cmd_ext(config: &RunConfig, spec_bytes: &[u8], j: i32) -> Result<CommandOutput, CliError> {
    let spec = parse_spec(config, spec_bytes)?;
    let basis = ext_group_basis(-j, j, &spec, config.policy, config.growth_cap)?;
    let names = Chart::U.var_names();
    let monomial_name = |e: &threefold_core::series::Exponent| {
        let mut out = String::new();
        for (name, exp) in
            [(names[0], e.z as i64), (names[1], e.u1 as i64), (names[2], e.u2 as i64)]
        {
            if exp == 0 {
                continue;
            }
            if !out.is_empty() {
                out.push('*');
            }
            if exp == 1 {
                out.push_str(name);
            } else {
                out.push_str(&format!("{name}^{exp}"));
            }
        }
        if out.is_empty() {
            out.push('1');
        }
        out
    };
    let report = ExtReport {
        j1: -j,
        j2: j,
        dimension: basis.h1.dimension(),
        certified_window: basis.h1.certified_window.into(),
        cocycles: basis.cocycles.iter().map(|c| c.to_string()).collect(),
        generator_monomials: basis.generator_monomials.iter().map(monomial_name).collect(),
        stabilized: basis.h1.stabilized,
    };
    let mut text =
        format!("ext^1(O({j}), O({})) dimension in window: {}\n", -j, report.dimension);
    text.push_str(&format!("cocycles: {}\n", report.cocycles.join(", ")));
    text.push_str(&format!("generator monomials: {}", report.generator_monomials.join(", ")));
    CommandOutput::from_report(&report, text, 0)
}

fn cmd_moduli(config: &RunConfig, spec_bytes: &[u8], j: i32) -> Result<CommandOutput, CliError> {
    let spec = parse_spec(config, spec_bytes)?;
    let report = first_neighborhood_moduli(j, &spec, config.policy, config.growth_cap)?;
    let json = ModuliJson {
        j,
        spec_hash: cache::sha256_hex(spec_bytes),
        count: report.count,
        projective_dimension: report.projective_dimension,
        generators: report.generators.iter().map(|g| g.p.to_string()).collect(),
    };
    let text = format!(
        "moduli at splitting type {j}: count {}, projective dimension {}\ngenerators: {}",
        json.count,
        json.projective_dimension,
        json.generators.join(", ")
    );
    CommandOutput::from_report(&json, text, 0)
}

fn parse_extension(config: &RunConfig, j: i32, p: &str) -> Result<ExtensionClass, CliError> {
    let series = specfile::parse_series(p, Chart::U, config.policy)?;
    if j < 0 {
        return Err(CliError::usage("the splitting type j must be nonnegative"));
    }
    Ok(ExtensionClass::new(j, series))
}

fn cmd_sections(
    config: &RunConfig,
    spec_bytes: &[u8],
    j: i32,
    p: &str,
    neighborhood: u32,
) -> Result<CommandOutput, CliError> {
    let spec = parse_spec(config, spec_bytes)?;
    let ext = parse_extension(config, j, p)?;
    let bundle = extension_to_transition(&ext, &spec, config.policy)?;
    let (dimension, basis) = formal_section_dimension(&bundle, neighborhood, config.growth_cap)?;
    let report = SectionsReport {
        j,
        p: ext.p.to_string(),
        neighborhood,
        dimension,
        basis: basis.iter().map(|b| b.to_string()).collect(),
    };
    let mut text = format!(
        "h0 on neighborhood {neighborhood} of the extension (j = {j}, p = {}): {dimension}\n",
        report.p
    );
    for b in &report.basis {
        text.push_str(&format!("  section {b}\n"));
    }
    text.pop();
    CommandOutput::from_report(&report, text, 0)
}

fn cmd_split_type(
    config: &RunConfig,
    spec_bytes: &[u8],
    j: i32,
    p: &str,
) -> Result<CommandOutput, CliError> {
    let spec = parse_spec(config, spec_bytes)?;
    let ext = parse_extension(config, j, p)?;
    let bundle = extension_to_transition(&ext, &spec, config.policy)?;
    let st = splitting_type_on_line(&bundle)?;
    let report = SplitTypeReport { a1: st.a1, a2: st.a2 };
    let text = format!("splitting type on the zero section: ({}, {})", st.a1, st.a2);
    CommandOutput::from_report(&report, text, 0)
}

fn cmd_iso(
    config: &RunConfig,
    spec_bytes: &[u8],
    j: i32,
    p: &str,
    q: &str,
) -> Result<CommandOutput, CliError> {
    let spec = parse_spec(config, spec_bytes)?;
    let ext_p = parse_extension(config, j, p)?;
    let ext_q = parse_extension(config, j, q)?;
    let b1 = extension_to_transition(&ext_p, &spec, config.policy)?;
    let b2 = extension_to_transition(&ext_q, &spec, config.policy)?;
    let verdict = distinguish_bundles(&b1, &b2, config.growth_cap)?;
    let (name, detail) = match &verdict {
        BundleVerdict::NotIsomorphic { invariant } => ("not_isomorphic", invariant.clone()),
        BundleVerdict::Isomorphic { witness } => (
            "isomorphic",
            witness
                .as_ref()
                .map(|w| format!("lambda = {}, b = {}, beta = {}", w.lambda, w.b, w.beta))
                .unwrap_or_else(|| "identical transition data".to_string()),
        ),
        BundleVerdict::PossiblyIsomorphic => {
            ("possibly_isomorphic", "no separating invariant found".to_string())
        }
    };
    let report = IsoReport { verdict: name.to_string(), detail: detail.clone() };
    let text = format!("verdict: {name}\n{detail}");
    CommandOutput::from_report(&report, text, 0)
}

fn cmd_integrate(
    config: &RunConfig,
    spec_bytes: &[u8],
    cocycle_bytes: &[u8],
) -> Result<CommandOutput, CliError> {
    let spec = parse_spec(config, spec_bytes)?;
    let cocycle_text = std::str::from_utf8(cocycle_bytes)
        .map_err(|_| CliError::usage("cocycle file is not UTF-8"))?;
    let cocycle = specfile::parse_cocycle(cocycle_text, config.policy)?;
    let result = integrate_cocycle(&spec, &cocycle, config.policy)?;
    let report = match &result {
        IntegrationResult::Integrated(deformed) => IntegrateReport {
            integrable: true,
            spec: Some(specfile::render_threefold_spec(deformed)),
            variable: None,
            reason: None,
        },
        IntegrationResult::NotIntegrable { variable, reason } => IntegrateReport {
            integrable: false,
            spec: None,
            variable: Some(variable.clone()),
            reason: Some(reason.clone()),
        },
    };
    let text = match &result {
        IntegrationResult::Integrated(deformed) => {
            format!("integrable\n{}", specfile::render_threefold_spec(deformed))
        }
        IntegrationResult::NotIntegrable { variable, reason } => {
            format!("not integrable at {variable}: {reason}")
        }
    };
    CommandOutput::from_report(&report, text, 0)
}

fn cmd_affine_iso(
    config: &RunConfig,
    j1: u32,
    j2: u32,
    ansatz: Option<u32>,
) -> Result<CommandOutput, CliError> {
    let ansatz_degree = ansatz.unwrap_or(j1.max(j2) + 2);
    let verdict = affine_bundle_iso(&AffineIsoProblem { j1, j2, ansatz_degree }, config.policy)?;
    let (name, detail, code) = match &verdict {
        AffineIsoVerdict::Isomorphic { a } => {
            ("isomorphic".to_string(), format!("linear part {a}"), 0)
        }
        AffineIsoVerdict::NotIsomorphic { certificate, .. } => {
            ("not_isomorphic".to_string(), certificate.clone(), 0)
        }
        AffineIsoVerdict::Inconclusive { reason } => {
            ("inconclusive".to_string(), reason.clone(), 2)
        }
    };
    let report = AffineIsoReport { j1, j2, verdict: name.clone(), detail: detail.clone() };
    let text = format!("verdict: {name}\n{detail}");
    CommandOutput::from_report(&report, text, code)
}

fn cmd_verify_map(
    config: &RunConfig,
    map_bytes: &[u8],
    source_bytes: &[u8],
    target_bytes: &[u8],
) -> Result<CommandOutput, CliError> {
    let map_text =
        std::str::from_utf8(map_bytes).map_err(|_| CliError::usage("map file is not UTF-8"))?;
    let map = specfile::parse_map_spec(map_text, config.policy)?;
    let source = parse_spec(config, source_bytes)?;
    let target = parse_spec(config, target_bytes)?;
    let holomorphic = verify_map_holomorphic(&map, &source, &target, config.policy)?;
    let report = VerifyMapReport { holomorphic };
    let text = format!("holomorphic: {holomorphic}");
    CommandOutput::from_report(&report, text, 0)
}

fn cmd_suite(config: &RunConfig) -> Result<CommandOutput, CliError> {
    let outcome = suite::run_suite(config);
    let json = outcome.to_json();
    let text = outcome.render_table();
    let code = outcome.exit_code() as u8;
    CommandOutput::from_report(&json, text, code)
}
