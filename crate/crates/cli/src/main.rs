use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use flexgate::certify::{certify, CertifyOptions, DEFAULT_BRANCH_TOL};
use flexgate::dehn::{
    auto_basis, decompose_lengths, BasisElement, LengthBasis, LengthDecomposition, DEFAULT_DECOMP_TOL, DEFAULT_DEHN_TOL,
    DEFAULT_MAX_DENOMINATOR,
};
use flexgate::flex::{flex_space, DEFAULT_FLEX_TOL, DEFAULT_RANK_TOL};
use flexgate::geometry::{dihedral_data, Branch, BranchPolicy, DEFAULT_TRIG_TOL};
use flexgate::io::{
    continuation_csv, decomposition_from_alpha, flex_to_json, mesh_to_json, read_flex, read_mesh_with, write_off, LoadedMesh,
    MeshDocument,
};
use flexgate::mesh::OrientationRule;
use flexgate::minors::{Strategy, DEFAULT_DERIV_TOL, DEFAULT_SAMPLE_COUNT, DEFAULT_SEED, DEFAULT_VALUE_TOL};
use flexgate::oracle::{continue_flex, gen_example, ExampleSpec, DEFAULT_NEWTON_TOL};
use flexgate::{OracleError, Vec3};
use serde_json::json;

#[derive(Parser)]
#[command(name = "flexgate", version, about = "Check whether a first-order flex of a polyhedron can extend to a flex")]
struct Cli {
    /// Outward side of each surface: positive signed volume when meaningful (auto), or the input windings as given or reversed.
    #[arg(long, global = true, value_enum, default_value_t = Orientation::Auto)]
    orientation: Orientation,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Orientation {
    Auto,
    Input,
    Reversed,
}

impl From<Orientation> for OrientationRule {
    fn from(o: Orientation) -> Self {
        match o {
            Orientation::Auto => OrientationRule::Auto,
            Orientation::Input => OrientationRule::Input,
            Orientation::Reversed => OrientationRule::Reversed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Topology, per-edge dihedral data and degeneracy flags.
    Analyze {
        mesh: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TRIG_TOL)]
        trig_tol: f64,
    },
    /// Run every necessary condition on a flex; exit 0 if none fails, 1 otherwise.
    Certify(CertifyArgs),
    /// Rigidity-matrix kernel and its nontrivial part.
    Flexspace {
        mesh: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        rank_tol: f64,
        /// Print only nontrivial basis vector INDEX, as a flex file.
        #[arg(long, value_name = "INDEX")]
        emit_flex: Option<usize>,
    },
    /// Follow a flex numerically and log edge drift and Dehn expressions as CSV.
    Continue(ContinueArgs),
    /// Write a built-in example mesh.
    Gen {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = MeshFormat::Json)]
        format: MeshFormat,
        /// Edge length for the regular examples.
        #[arg(long)]
        edge: Option<f64>,
        /// Vertex A of bricard1, as x,y,z.
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        a: Option<Vec3>,
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        b: Option<Vec3>,
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        c: Option<Vec3>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MeshFormat {
    Json,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum MinorStrategy {
    Full,
    Sampled,
}

#[derive(Args)]
struct BasisArgs {
    /// JSON list of {"label", "value"}, or a document with "length_basis" and optional "alpha".
    #[arg(long)]
    basis: Option<PathBuf>,
    /// Skip the Dehn conditions when neither the mesh nor --basis supplies a basis.
    #[arg(long)]
    no_auto_basis: bool,
    #[arg(long, default_value_t = DEFAULT_DECOMP_TOL)]
    decomp_tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_DENOMINATOR)]
    max_denominator: i64,
}

#[derive(Args)]
struct CertifyArgs {
    mesh: PathBuf,
    flex: PathBuf,
    #[command(flatten)]
    basis: BasisArgs,
    /// Minor size; defaults to 3V-6.
    #[arg(long)]
    minor_size: Option<usize>,
    #[arg(long, value_enum, default_value_t = MinorStrategy::Full)]
    minor_strategy: MinorStrategy,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_COUNT)]
    samples: usize,
    /// Sampling seed; FLEXGATE_SEED overrides it.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Evaluate minors on the flex with rigid motions projected out.
    #[arg(long)]
    project_trivial: bool,
    /// prefer-stable, force-r, force-s or mixed:XYZ with X, Y, Z in {r, s}.
    #[arg(long, default_value = "prefer-stable", value_parser = parse_policy)]
    policy: BranchPolicy,
    #[arg(long, default_value_t = DEFAULT_DEHN_TOL)]
    dehn_tol: f64,
    #[arg(long, default_value_t = DEFAULT_FLEX_TOL)]
    flex_tol: f64,
    #[arg(long, default_value_t = DEFAULT_TRIG_TOL)]
    trig_tol: f64,
    #[arg(long, default_value_t = DEFAULT_VALUE_TOL)]
    value_tol: f64,
    #[arg(long, default_value_t = DEFAULT_DERIV_TOL)]
    deriv_tol: f64,
    #[arg(long, default_value_t = DEFAULT_BRANCH_TOL)]
    branch_tol: f64,
}

#[derive(Args)]
struct ContinueArgs {
    mesh: PathBuf,
    /// Index into the nontrivial flex basis.
    #[arg(long, default_value_t = 0)]
    direction: usize,
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[arg(long, default_value_t = 1e-2)]
    step_size: f64,
    #[arg(long, default_value_t = DEFAULT_NEWTON_TOL)]
    newton_tol: f64,
    /// Write the CSV log here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the final mesh as JSON.
    #[arg(long)]
    final_mesh: Option<PathBuf>,
    #[command(flatten)]
    basis: BasisArgs,
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let xs: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match xs[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err(format!("expected x,y,z, got {s:?}")),
    }
}

fn parse_policy(s: &str) -> Result<BranchPolicy, String> {
    match s {
        "prefer-stable" => Ok(BranchPolicy::PreferStable),
        "force-r" => Ok(BranchPolicy::ForceR),
        "force-s" => Ok(BranchPolicy::ForceS),
        _ => {
            let mask = s.strip_prefix("mixed:").ok_or_else(|| format!("unknown policy {s:?}"))?;
            let slots: Vec<Branch> = mask
                .chars()
                .map(|c| match c {
                    'r' => Ok(Branch::R),
                    's' => Ok(Branch::S),
                    _ => Err(format!("mixed slot {c:?} is not r or s")),
                })
                .collect::<Result<_, _>>()?;
            let slots: [Branch; 3] = slots.try_into().map_err(|_| "mixed policy needs three slots".to_string())?;
            Ok(BranchPolicy::MixedSlots(slots))
        }
    }
}

/// Writes to stdout; a closed pipe is not an error.
fn write_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    write_stdout(&(serde_json::to_string_pretty(v)? + "\n"))
}

fn load(path: &Path, rule: OrientationRule) -> Result<LoadedMesh> {
    read_mesh_with(path, rule).with_context(|| format!("reading mesh {}", path.display()))
}

/// Basis precedence: --basis file, then the mesh's own data, then the
/// greedy basis unless disabled.
fn resolve_decomposition(mesh: &LoadedMesh, args: &BasisArgs) -> Result<Option<LengthDecomposition>> {
    let p = &mesh.polyhedron;
    let (basis, alpha) = if let Some(path) = &args.basis {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading basis {}", path.display()))?;
        let v: serde_json::Value = serde_json::from_str(&text)?;
        if v.is_array() {
            (Some(LengthBasis::new(serde_json::from_value::<Vec<BasisElement>>(v)?)?), None)
        } else {
            let elements: Vec<BasisElement> = serde_json::from_value(v["length_basis"].clone())
                .context("basis document needs a \"length_basis\" list")?;
            let alpha = match v.get("alpha") {
                Some(a) => Some(serde_json::from_value(a.clone())?),
                None => None,
            };
            (Some(LengthBasis::new(elements)?), alpha)
        }
    } else {
        (mesh.basis.clone(), mesh.alpha.clone())
    };
    match (basis, alpha) {
        (Some(b), Some(a)) => Ok(Some(decomposition_from_alpha(p, &b, &a, args.decomp_tol)?)),
        (Some(b), None) => Ok(Some(decompose_lengths(p, &b, args.decomp_tol, args.max_denominator)?)),
        (None, _) if args.no_auto_basis => Ok(None),
        (None, _) => {
            let b = auto_basis(p, args.decomp_tol, args.max_denominator);
            Ok(Some(decompose_lengths(p, &b, args.decomp_tol, args.max_denominator)?))
        }
    }
}

fn analyze(mesh: &Path, trig_tol: f64, rule: OrientationRule) -> Result<()> {
    let p = load(mesh, rule)?.polyhedron;
    let stats = p.topology_stats();
    let degenerate: Vec<usize> = (0..p.num_faces()).filter(|&f| p.is_face_degenerate(f)).collect();
    let edges = if p.is_oriented() {
        p.edge_frames()?
            .iter()
            .map(|f| match dihedral_data(&p, f) {
                Ok(d) => json!({
                    "edge": [p.edges()[f.edge_id].lo, p.edges()[f.edge_id].hi],
                    "frame": f,
                    "length": d.ell,
                    "cos_phi": d.cos_phi,
                    "sin_phi": d.sin_phi,
                    "phi": d.phi,
                    "flat": d.sin_phi.abs() <= trig_tol && d.cos_phi < 0.0,
                    "r_defined": d.sin_phi.abs() > trig_tol,
                    "s_defined": d.cos_phi.abs() > trig_tol,
                }),
                Err(e) => json!({ "edge": [p.edges()[f.edge_id].lo, p.edges()[f.edge_id].hi], "error": e.to_string() }),
            })
            .collect()
    } else {
        Vec::new()
    };
    let vertices: Vec<[f64; 3]> = p.vertices().iter().map(|v| [v.x, v.y, v.z]).collect();
    print_json(&json!({
        "topology": stats,
        "vertices": vertices,
        "oriented": p.is_oriented(),
        "signed_volume": p.signed_volume(),
        "degenerate_faces": degenerate,
        "edges": edges,
    }))
}

fn certify_cmd(a: &CertifyArgs, rule: OrientationRule) -> Result<bool> {
    let mesh = load(&a.mesh, rule)?;
    let flex = read_flex(&a.flex).with_context(|| format!("reading flex {}", a.flex.display()))?;
    let decomp = resolve_decomposition(&mesh, &a.basis)?;
    let mut opts = CertifyOptions::default();
    opts.dehn.policy = a.policy;
    opts.dehn.dehn_tol = a.dehn_tol;
    opts.dehn.flex_tol = a.flex_tol;
    opts.dehn.trig_tol = a.trig_tol;
    opts.minor_size = a.minor_size;
    opts.minors.value_tol = a.value_tol;
    opts.minors.deriv_tol = a.deriv_tol;
    opts.minors.project_trivial = a.project_trivial;
    opts.branch_tol = a.branch_tol;
    opts.minors.strategy = match a.minor_strategy {
        MinorStrategy::Full => Strategy::Full,
        MinorStrategy::Sampled => Strategy::Sampled {
            count: a.samples,
            seed: seed(a.seed)?,
        },
    };
    let rep = certify(&mesh.polyhedron, &flex, decomp.as_ref(), &opts)?;
    print_json(&rep)?;
    Ok(rep.obstructed())
}

fn seed(default: u64) -> Result<u64> {
    match std::env::var("FLEXGATE_SEED") {
        Ok(s) => s.trim().parse().map_err(|_| anyhow!("FLEXGATE_SEED={s:?} is not a 64-bit unsigned integer")),
        Err(_) => Ok(default),
    }
}

fn flexspace(mesh: &Path, rank_tol: f64, emit: Option<usize>, rule: OrientationRule) -> Result<()> {
    let p = load(mesh, rule)?.polyhedron;
    let rep = flex_space(&p, rank_tol)?;
    match emit {
        Some(i) => {
            let f = rep
                .nontrivial_basis
                .get(i)
                .ok_or_else(|| anyhow!("nontrivial basis has {} vectors; index {i} is out of range", rep.nontrivial_basis.len()))?;
            write_stdout(&(flex_to_json(f) + "\n"))
        }
        None => print_json(&rep),
    }
}

enum ContinueOutcome {
    Done,
    Stalled(String),
}

fn continue_cmd(a: &ContinueArgs, rule: OrientationRule) -> Result<ContinueOutcome> {
    let mesh = load(&a.mesh, rule)?;
    let p = &mesh.polyhedron;
    let fs = flex_space(p, DEFAULT_RANK_TOL)?;
    if fs.nontrivial_basis.is_empty() {
        bail!("no nontrivial direction: kernel dimension is {}", fs.kernel_dim);
    }
    let dir = fs
        .nontrivial_basis
        .get(a.direction)
        .ok_or_else(|| anyhow!("direction {} out of range ({} available)", a.direction, fs.nontrivial_basis.len()))?;
    let decomp = resolve_decomposition(&mesh, &a.basis)?;
    let res = match continue_flex(p, dir, a.step_size, a.steps, a.newton_tol) {
        Ok(r) => r,
        Err(e @ OracleError::ContinuationStalled { .. }) => return Ok(ContinueOutcome::Stalled(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let csv = continuation_csv(p, &res, decomp.as_ref())?;
    match &a.csv {
        Some(path) => std::fs::write(path, csv)?,
        None => write_stdout(&csv)?,
    }
    if let Some(path) = &a.final_mesh {
        let last = res.polyhedron_at(p, res.steps.len() - 1);
        std::fs::write(path, mesh_to_json(&MeshDocument::from_polyhedron(&last)))?;
    }
    Ok(ContinueOutcome::Done)
}

fn gen(
    name: &str,
    out: Option<&Path>,
    format: MeshFormat,
    edge: Option<f64>,
    abc: [Option<Vec3>; 3],
) -> Result<()> {
    let mut spec = ExampleSpec::from_name(name)
        .ok_or_else(|| anyhow!("UnknownExample: {name:?} (known: {})", ExampleSpec::NAMES.join(", ")))?;
    match &mut spec {
        ExampleSpec::TetraRegular { edge: e } | ExampleSpec::OctaRegular { edge: e } => {
            if let Some(v) = edge {
                *e = v;
            }
        }
        ExampleSpec::Bricard1 { a, b, c } => {
            for (dst, src) in [a, b, c].into_iter().zip(abc) {
                if let Some(v) = src {
                    *dst = v;
                }
            }
        }
        ExampleSpec::BipyramidQ => {}
    }
    let p = gen_example(&spec)?;
    let text = match format {
        MeshFormat::Json => mesh_to_json(&MeshDocument::from_polyhedron(&p)),
        MeshFormat::Off => write_off(&p),
    };
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => write_stdout(&(text + "\n")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let rule = OrientationRule::from(cli.orientation);
    let result = match &cli.command {
        Command::Analyze { mesh, trig_tol } => analyze(mesh, *trig_tol, rule).map(|_| ExitCode::SUCCESS),
        Command::Certify(a) => certify_cmd(a, rule).map(|obstructed| ExitCode::from(if obstructed { 1 } else { 0 })),
        Command::Flexspace { mesh, rank_tol, emit_flex } => flexspace(mesh, *rank_tol, *emit_flex, rule).map(|_| ExitCode::SUCCESS),
        Command::Continue(a) => continue_cmd(a, rule).map(|o| match o {
            ContinueOutcome::Done => ExitCode::SUCCESS,
            ContinueOutcome::Stalled(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(3)
            }
        }),
        Command::Gen { name, out, format, edge, a, b, c } => {
            gen(name, out.as_deref(), *format, *edge, [*a, *b, *c]).map(|_| ExitCode::SUCCESS)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
