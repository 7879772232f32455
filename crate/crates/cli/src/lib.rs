//! Command-line front end for the `hinf` tool.
//!
//! [`run`] takes the argument vector and returns the process exit code so
//! that tests can drive the tool in-process.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use hinf_core::baseline::{self, BaselineResult};
use hinf_core::format::{self, LoadError, Model, ModelDocument};
use hinf_core::netgen::{self, NetworkModel, NetworkParams};
use hinf_core::numkit::RMatrix;
use hinf_core::synth;
use hinf_core::verify::{
    self, Certificate, CertifyOptions, ModeCertificate, NormPeak, Plant, Sparsity, Tolerances, Verdict,
};
use hinf_core::{DescriptorPlant, Error, FrequencyGrid, FrequencyModel, Gain, GainFormula, WeightedObjective};

pub mod presets;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;
pub const EXIT_SUBOPTIMAL: i32 = 4;
pub const EXIT_UNSTABLE: i32 = 5;
pub const EXIT_INTERNAL: i32 = 7;

#[derive(Debug, Parser)]
#[command(name = "hinf", version, about = "Closed-form H-infinity optimal static feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the explicit gain.
    Synth(Common),
    /// Compute the gain (or read one) and certify it.
    Verify(Common),
    /// Supremum of the lower bound on the optimal value.
    LowerBound(Common),
    /// Closed-form gain against the Riccati baseline.
    Compare(Common),
    /// Write a model file from a preset.
    Generate(GenerateArgs),
    /// Closed-loop largest singular value per frequency, as CSV.
    Freqresp(Common),
}

#[derive(Debug, Args)]
struct Common {
    model: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative tolerance on the optimality gap.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 1e-4)]
    grid_min: f64,
    #[arg(long, default_value_t = 1e4)]
    grid_max: f64,
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Frequency at which the gain is built; overrides the model file.
    #[arg(long)]
    omega0: Option<f64>,
    /// Output weight document `{"format": 1, "q": [[...]]}`.
    #[arg(long)]
    weighted: Option<PathBuf>,
    /// Verify this gain instead of the synthesized one (`{"k": [[...]], "omega0": w}`).
    #[arg(long)]
    gain: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// One of: example1, example2, example3, va, circulant, droop, buffer,
    /// buffer-random, irrigation, thermal, machine, case3.
    preset: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Preset parameter `key=value` (values may be comma-separated lists).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_invariant_violation() { EXIT_INVARIANT } else { EXIT_INTERNAL };
        Failure { code, message: e.to_string() }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Invariant(e) => e.into(),
            LoadError::Schema { .. } | LoadError::Io { .. } => Failure { code: EXIT_SCHEMA, message: e.to_string() },
        }
    }
}

fn internal(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_INTERNAL, message: message.into() }
}

fn invariant(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_INVARIANT, message: message.into() }
}

/// Exit code for a verdict.
pub fn exit_code(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::Optimal => EXIT_OK,
        Verdict::StableButSuboptimal => EXIT_SUBOPTIMAL,
        Verdict::Unstable => EXIT_UNSTABLE,
    }
}

#[derive(Debug, Serialize)]
pub struct ModelInfo {
    pub digest: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct BaselineReport {
    pub gamma: f64,
    pub gamma_infeasible: f64,
    #[serde(with = "hinf_core::rows")]
    pub k: RMatrix,
    pub closed_loop_norm: f64,
    pub sparsity: Sparsity,
    /// Entries below 1e-2 in magnitude.
    pub small_entries: usize,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub model: ModelInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain: Option<Gain>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_certificates: Option<Vec<ModeCertificate>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<Sparsity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<NormPeak>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineReport>,
    pub grid: FrequencyGrid,
    pub tolerances: Tolerances,
}

/// Parses arguments, runs the command and returns the exit code. Errors go
/// to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_SCHEMA } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("hinf: {}", f.message);
            f.code
        }
    }
}

fn execute(cmd: Command) -> Result<i32, Failure> {
    match cmd {
        Command::Synth(c) => cmd_synth(&c),
        Command::Verify(c) => cmd_verify(&c),
        Command::LowerBound(c) => cmd_lower_bound(&c),
        Command::Compare(c) => cmd_compare(&c),
        Command::Freqresp(c) => cmd_freqresp(&c),
        Command::Generate(g) => cmd_generate(&g),
    }
}

struct Loaded {
    doc: ModelDocument,
    info: ModelInfo,
}

fn load(path: &Path) -> Result<Loaded, Failure> {
    let bytes = std::fs::read(path)
        .map_err(|e| Failure { code: EXIT_SCHEMA, message: format!("cannot read {}: {e}", path.display()) })?;
    let digest = format!("sha256:{:x}", Sha256::digest(&bytes));
    let text = String::from_utf8(bytes)
        .map_err(|_| Failure { code: EXIT_SCHEMA, message: format!("{} is not UTF-8", path.display()) })?;
    let doc = format::parse_model(&text)?;
    let network = match &doc.model {
        Model::Network(n) => Some(n.kind().to_string()),
        _ => None,
    };
    let info = ModelInfo { digest, kind: doc.model.kind().to_string(), network };
    Ok(Loaded { doc, info })
}

impl Common {
    fn grid(&self) -> Result<FrequencyGrid, Failure> {
        let g = FrequencyGrid { omega_min: self.grid_min, omega_max: self.grid_max, points: self.points, ..Default::default() };
        g.validate()?;
        Ok(g)
    }

    fn tolerances(&self) -> Result<Tolerances, Failure> {
        if !(self.tol > 0.0) {
            return Err(invariant("--tol must be positive"));
        }
        Ok(Tolerances { norm_rtol: self.tol, ..Default::default() })
    }

    fn weight(&self) -> Result<Option<WeightedObjective>, Failure> {
        match &self.weighted {
            None => Ok(None),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure { code: EXIT_SCHEMA, message: format!("cannot read {}: {e}", p.display()) })?;
                Ok(Some(format::parse_weight(&text)?))
            }
        }
    }

    fn options(&self) -> Result<CertifyOptions, Failure> {
        Ok(CertifyOptions { grid: self.grid()?, tolerances: self.tolerances()?, weight: self.weight()? })
    }
}

/// A model reduced to what the commands operate on.
enum Target {
    Descriptor(DescriptorPlant),
    Rational(hinf_core::RationalPlant),
    Machine(netgen::MachineNetwork),
}

fn target(doc: &ModelDocument) -> Result<Target, Failure> {
    Ok(match &doc.model {
        Model::Descriptor(p) => Target::Descriptor(p.clone()),
        Model::Rational(p) => Target::Rational(p.clone()),
        Model::Network(net) => match net.params {
            NetworkParams::Machine { .. } => Target::Machine(netgen::compile_machine(net)?),
            _ => Target::Descriptor(netgen::compile(net, false)?),
        },
    })
}

fn synthesize(doc: &ModelDocument, t: &Target, c: &Common) -> Result<Gain, Failure> {
    let omega0 = c.omega0.or(doc.omega0).unwrap_or(0.0);
    let weight = c.weight()?;
    let gain = match (t, &weight) {
        (Target::Machine(m), None) => synth::machine_modal_gains(m.inertia, m.damping, &m.laplacian)?,
        (Target::Machine(_), Some(_)) => return Err(invariant("weighted objectives are not supported for machine networks")),
        (Target::Descriptor(p), Some(w)) => synth::weighted_gain(p, w, omega0)?,
        (Target::Rational(p), Some(w)) => synth::weighted_gain(p, w, omega0)?,
        (Target::Descriptor(p), None) => match &doc.model {
            Model::Network(net @ NetworkModel { params: NetworkParams::Buffer { .. }, .. }) if omega0 == 0.0 => {
                synth::buffer_law(net)?
            }
            _ if omega0 == 0.0 => synth::descriptor_gain(p)?,
            _ => synth::closed_form_gain(p, omega0)?,
        },
        (Target::Rational(p), None) => synth::closed_form_gain(p, omega0)?,
    };
    Ok(gain)
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct GainDoc {
    #[serde(default)]
    #[allow(dead_code)]
    format: Option<u64>,
    k: Vec<Vec<f64>>,
    #[serde(default)]
    omega0: f64,
}

fn read_gain(path: &Path) -> Result<Gain, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure { code: EXIT_SCHEMA, message: format!("cannot read {}: {e}", path.display()) })?;
    let doc: GainDoc =
        serde_json::from_str(&text).map_err(|e| Failure { code: EXIT_SCHEMA, message: format!("gain file: {e}") })?;
    let k = hinf_core::rows::from_rows(&doc.k, 0).map_err(|m| Failure { code: EXIT_SCHEMA, message: format!("k: {m}") })?;
    Ok(Gain::new(k, doc.omega0, GainFormula::Theorem1))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| internal(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| internal(e.to_string()))
        }
    }
}

fn emit_report(out: Option<&Path>, report: &Report) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| internal(e.to_string()))?;
    text.push('\n');
    emit(out, &text)
}

fn base_report(command: &'static str, info: ModelInfo, c: &Common) -> Result<Report, Failure> {
    Ok(Report {
        tool: "hinf",
        version: env!("CARGO_PKG_VERSION"),
        command,
        model: info,
        gain: None,
        certificate: None,
        mode_certificates: None,
        verdict: None,
        sparsity: None,
        lower_bound: None,
        baseline: None,
        grid: c.grid()?,
        tolerances: c.tolerances()?,
    })
}

fn cmd_synth(c: &Common) -> Result<i32, Failure> {
    let Loaded { doc, info } = load(&c.model)?;
    let t = target(&doc)?;
    let gain = synthesize(&doc, &t, c)?;
    let mut report = base_report("synth", info, c)?;
    report.sparsity = Some(verify::sparsity_pattern(&gain.k));
    report.gain = Some(gain);
    emit_report(c.out.as_deref(), &report)?;
    Ok(EXIT_OK)
}

fn worst(verdicts: impl Iterator<Item = Verdict>) -> Verdict {
    verdicts.fold(Verdict::Optimal, |acc, v| match (acc, v) {
        (Verdict::Unstable, _) | (_, Verdict::Unstable) => Verdict::Unstable,
        (Verdict::StableButSuboptimal, _) | (_, Verdict::StableButSuboptimal) => Verdict::StableButSuboptimal,
        _ => Verdict::Optimal,
    })
}

fn cmd_verify(c: &Common) -> Result<i32, Failure> {
    let Loaded { doc, info } = load(&c.model)?;
    let t = target(&doc)?;
    let gain = match &c.gain {
        Some(p) => read_gain(p)?,
        None => synthesize(&doc, &t, c)?,
    };
    let opts = c.options()?;
    let mut report = base_report("verify", info, c)?;
    let verdict = match &t {
        Target::Descriptor(p) => {
            let cert = verify::certify_optimality(Plant::Descriptor(p), &gain, &opts)?;
            let v = cert.verdict;
            report.certificate = Some(cert);
            v
        }
        Target::Rational(p) => {
            let cert = verify::certify_optimality(Plant::Rational(p), &gain, &opts)?;
            let v = cert.verdict;
            report.certificate = Some(cert);
            v
        }
        Target::Machine(m) => {
            if c.gain.is_some() {
                return Err(invariant("machine networks are verified per mode from the synthesized gain"));
            }
            let certs = verify::certify_machine_modes(m.inertia, m.damping, &gain, &opts)?;
            let v = worst(certs.iter().map(|m| m.certificate.verdict));
            report.mode_certificates = Some(certs);
            v
        }
    };
    report.verdict = Some(verdict);
    report.sparsity = Some(verify::sparsity_pattern(&gain.k));
    report.gain = Some(gain);
    emit_report(c.out.as_deref(), &report)?;
    Ok(exit_code(verdict))
}

fn cmd_lower_bound(c: &Common) -> Result<i32, Failure> {
    let Loaded { doc, info } = load(&c.model)?;
    let t = target(&doc)?;
    let grid = c.grid()?;
    let weight = c.weight()?;
    let model: &dyn FrequencyModel = match &t {
        Target::Descriptor(p) => p,
        Target::Rational(p) => p,
        Target::Machine(_) => return Err(invariant("machine networks have one bound per mode; use verify")),
    };
    let bound = match &weight {
        Some(w) => verify::weighted_lower_bound(model, w, &grid)?,
        None => verify::lower_bound(model, &grid)?,
    };
    let mut report = base_report("lower-bound", info, c)?;
    report.lower_bound = Some(bound);
    emit_report(c.out.as_deref(), &report)?;
    Ok(EXIT_OK)
}

/// Threshold below which a baseline entry counts as small in the comparison.
pub const SMALL_ENTRY: f64 = 1e-2;

fn cmd_compare(c: &Common) -> Result<i32, Failure> {
    let Loaded { doc, info } = load(&c.model)?;
    let Target::Descriptor(p) = target(&doc)? else {
        return Err(invariant("compare needs a descriptor plant or a network that compiles to one"));
    };
    if c.weighted.is_some() {
        return Err(invariant("compare does not support weighted objectives"));
    }
    let gain = synthesize(&doc, &Target::Descriptor(p.clone()), c)?;
    let opts = c.options()?;
    let cert = verify::certify_optimality(Plant::Descriptor(&p), &gain, &opts)?;
    let BaselineResult { gamma, gamma_infeasible, k, .. } = baseline::baseline_for(&p, 1e-6)?;
    let cl = verify::weighted_closed_loop(&p, &k, None)?;
    let closed_loop_norm = verify::hinf_norm_ss(&cl, opts.tolerances.hinf_rtol)?.norm;
    let base = BaselineReport {
        gamma,
        gamma_infeasible,
        sparsity: verify::sparsity_pattern(&k),
        small_entries: verify::sparsity_with_threshold(&k, SMALL_ENTRY).zeros,
        k,
        closed_loop_norm,
    };
    let mut report = base_report("compare", info, c)?;
    report.verdict = Some(cert.verdict);
    report.certificate = Some(cert);
    report.sparsity = Some(verify::sparsity_pattern(&gain.k));
    report.gain = Some(gain);
    report.baseline = Some(base);
    emit_report(c.out.as_deref(), &report)?;
    Ok(EXIT_OK)
}

fn cmd_freqresp(c: &Common) -> Result<i32, Failure> {
    let Loaded { doc, .. } = load(&c.model)?;
    let t = target(&doc)?;
    let gain = match &c.gain {
        Some(p) => read_gain(p)?,
        None => synthesize(&doc, &t, c)?,
    };
    let weight = c.weight()?;
    let grid = c.grid()?;
    let q = weight.as_ref().map(|w| w.q());
    let model: &dyn FrequencyModel = match &t {
        Target::Descriptor(p) => p,
        Target::Rational(p) => p,
        Target::Machine(_) => return Err(invariant("freqresp needs a single plant; machine networks are modal")),
    };
    let rows = verify::frequency_response(model, &gain.k, q, &grid.points())?;
    let peak = rows
        .iter()
        .fold(None::<(f64, f64)>, |best, &(w, s)| match best {
            Some((_, bs)) if bs >= s => best,
            _ => Some((w, s)),
        })
        .map(|(w, _)| w);
    let mut csv = String::from("omega,sigma_max,is_peak\n");
    for (w, s) in &rows {
        csv.push_str(&format!("{w},{s},{}\n", u8::from(Some(*w) == peak)));
    }
    emit(c.out.as_deref(), &csv)?;
    Ok(EXIT_OK)
}

fn cmd_generate(g: &GenerateArgs) -> Result<i32, Failure> {
    let params = presets::Params::parse(&g.set).map_err(|m| Failure { code: EXIT_SCHEMA, message: m })?;
    let doc = presets::generate(&g.preset, &params)?;
    emit(g.out.as_deref(), &format::model_to_json(&doc))?;
    Ok(EXIT_OK)
}
