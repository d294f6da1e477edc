//! Command-line pipeline: generate or load points, build the complex and its
//! operators, then run one analysis and write CSV/JSON artifacts plus a
//! manifest.

pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use helmholtzian::complex::{PointCloud, DEFAULT_MAX_EDGES};
use helmholtzian::datasets::{generate, DatasetKind, Sampling, SyntheticSpec};
use helmholtzian::flows::{cochain_from_field, trajectory_to_cochain};
use helmholtzian::io;
use helmholtzian::learning::{
    cross_validate, default_hyper_grid, fit_laplacian_rls, fit_updown_rls, r2_score, smooth_flow,
    train_mask, EdgeKernel, SplitReport,
};
use helmholtzian::operators::{Part, DEFAULT_A, DEFAULT_B, DEFAULT_EXPLICIT_MAX_EDGES};
use helmholtzian::pipeline::{manifold_helmholtzian, BuildConfig, Estimate};
use helmholtzian::spectral::{analyze, estimate_betti1, hodge_decompose, EigenOptions, GapPolicy};
use helmholtzian::weights::Kernel;
use helmholtzian::Error;

use config::ConfigFile;
use manifest::Recorder;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    MissingFile(String),
    Malformed(String),
    Precondition(String),
    Numerical(String),
    Io(String),
    Internal(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::MissingFile(format!("{}: {e}", path.display()))
        } else {
            CliError::Io(format!("{}: {e}", path.display()))
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::MissingFile(_) => 3,
            CliError::Malformed(_) => 4,
            CliError::Precondition(_) => 5,
            CliError::Numerical(_) => 6,
            CliError::Io(_) => 7,
            CliError::Internal(_) => 8,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::MissingFile(_) => "missing_file",
            CliError::Malformed(_) => "malformed_input",
            CliError::Precondition(_) => "precondition",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
            CliError::Internal(_) => "internal",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::MissingFile(m)
            | CliError::Malformed(m)
            | CliError::Precondition(m)
            | CliError::Numerical(m)
            | CliError::Io(m)
            | CliError::Internal(m) => m,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "error": {
                "kind": self.kind(),
                "exit_code": self.exit_code(),
                "message": self.message(),
            }
        })
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidInput(_) | Error::CapExceeded { .. } => CliError::Precondition(msg),
            Error::NoConvergence { .. } | Error::EigenNoConvergence { .. } | Error::Singular(_) => {
                CliError::Numerical(msg)
            }
            Error::Malformed { .. } | Error::Csv(_) => CliError::Malformed(msg),
            Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
                CliError::MissingFile(msg)
            }
            Error::Io(_) => CliError::Io(msg),
            Error::Internal(_) => CliError::Internal(msg),
        }
    }
}

type Res<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "helmholtzian",
    version,
    about = "Helmholtzian estimation and edge-flow analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic point cloud (and its field, if any).
    Generate(GenerateArgs),
    /// Build the complex, weights and operators of a point cloud.
    Build(BuildArgs),
    /// Lowest eigenpairs of the symmetrized Helmholtzian with flow classes.
    Spectrum(SpectrumArgs),
    /// First Betti number from the spectral gap.
    Betti(SpectrumArgs),
    /// Gradient, curl and harmonic parts of an edge flow.
    Decompose(FlowArgs),
    /// Low-pass filter an edge flow.
    Smooth(SmoothArgs),
    /// Semi-supervised edge-flow regression.
    Ssl(SslArgs),
    /// Edge flow from trajectories, interpolated to unobserved edges.
    Trajectory(TrajectoryArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Settings file (key=value lines or a JSON object); flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ComplexArgs {
    /// Point cloud CSV, one point per row.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Rips radius.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Kernel bandwidth; derived from the complex when absent.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Weight of the down part.
    #[arg(long)]
    pub a: Option<f64>,
    /// Weight of the up part.
    #[arg(long)]
    pub b: Option<f64>,
    /// exp or indicator.
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub max_edges: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    /// circle, torus, flat_torus or strip.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// grid, jittered or iid.
    #[arg(long)]
    pub sampling: Option<String>,
    /// Gaussian noise level; defaults to 1% of the object scale.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Also build the complex at this radius and write the field's cochain.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub complex: ComplexArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub complex: ComplexArgs,
    /// Number of eigenpairs.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct FlowSource {
    /// Edge cochain CSV (i,j,value).
    #[arg(long)]
    pub cochain: Option<PathBuf>,
    /// Vector field CSV sampled at the input points.
    #[arg(long)]
    pub field: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FlowArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub complex: ComplexArgs,
    #[command(flatten)]
    pub source: FlowSource,
}

#[derive(Debug, Clone, Args)]
pub struct SmoothArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub complex: ComplexArgs,
    #[command(flatten)]
    pub source: FlowSource,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RegressionArgs {
    /// laplacian or updown.
    #[arg(long)]
    pub penalty: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Fixed ridge weight; tuned by cross-validation when absent.
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Fixed smoothness weight (both halves for updown).
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub lambda2_up: Option<f64>,
    #[arg(long)]
    pub lambda2_down: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SslArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub complex: ComplexArgs,
    #[command(flatten)]
    pub source: FlowSource,
    #[command(flatten)]
    pub regression: RegressionArgs,
    /// Share of labeled edges used for training in each split.
    #[arg(long)]
    pub train_ratio: Option<f64>,
    /// Number of random splits.
    #[arg(long)]
    pub splits: Option<usize>,
    /// Train ratio of the single split used for tuning.
    #[arg(long)]
    pub tune_ratio: Option<f64>,
    /// Re-tune hyperparameters on every split instead of once.
    #[arg(long)]
    pub tune_each_split: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub complex: ComplexArgs,
    #[command(flatten)]
    pub regression: RegressionArgs,
    /// Trajectory CSV (traj_id,t,coord_0,..).
    #[arg(long)]
    pub trajectories: Option<PathBuf>,
}

/// Parse `args`, run, print an error JSON on failure, return the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let err = CliError::Usage(e.to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match run(cli.command) {
        Ok(_) => 0,
        Err(err) => {
            eprintln!("{}", err.to_json());
            err.exit_code()
        }
    }
}

pub fn run(command: Command) -> Res<manifest::Manifest> {
    match command {
        Command::Generate(a) => cmd_generate(a),
        Command::Build(a) => cmd_build(a),
        Command::Spectrum(a) => cmd_spectrum(a, false),
        Command::Betti(a) => cmd_spectrum(a, true),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Smooth(a) => cmd_smooth(a),
        Command::Ssl(a) => cmd_ssl(a),
        Command::Trajectory(a) => cmd_trajectory(a),
    }
}

/// Settings shared by every command.
struct Context {
    file: ConfigFile,
    out_dir: PathBuf,
    seed: u64,
}

impl Context {
    fn new(common: &Common) -> Res<Self> {
        let file = match &common.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let out_dir = file
            .resolve("output_dir", common.output_dir.clone())?
            .unwrap_or_else(|| PathBuf::from("."));
        let seed = file.resolve_or("seed", common.seed, 0)?;
        Ok(Self {
            file,
            out_dir,
            seed,
        })
    }

    fn recorder(&self, command: &str) -> Res<Recorder> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| CliError::io(&self.out_dir, e))?;
        let mut rec = Recorder::new(command, self.seed, &self.out_dir);
        rec.config("output_dir", self.out_dir.display().to_string());
        rec.config("seed", self.seed);
        Ok(rec)
    }
}

fn precondition(ok: bool, msg: impl FnOnce() -> String) -> Res<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Precondition(msg()))
    }
}

fn positive(name: &str, v: f64) -> Res<()> {
    precondition(v > 0.0 && v.is_finite(), || {
        format!("{name} must be positive and finite, got {v}")
    })
}

fn nonnegative(name: &str, v: f64) -> Res<()> {
    precondition(v >= 0.0 && v.is_finite(), || {
        format!("{name} must be nonnegative and finite, got {v}")
    })
}

fn parse_with<T: std::str::FromStr<Err = Error>>(raw: &str) -> Res<T> {
    raw.parse::<T>()
        .map_err(|e| CliError::Precondition(e.to_string()))
}

/// Validated complex-building settings, resolved from flags and file.
struct ComplexPlan {
    input: PathBuf,
    build: BuildConfig,
}

impl ComplexPlan {
    fn resolve(ctx: &Context, a: &ComplexArgs) -> Res<Self> {
        let f = &ctx.file;
        let input = f
            .resolve("input", a.input.clone())?
            .ok_or_else(|| CliError::Usage("--input is required".into()))?;
        let delta = f
            .resolve("delta", a.delta)?
            .ok_or_else(|| CliError::Usage("--delta is required".into()))?;
        positive("delta", delta)?;
        let epsilon = f.resolve("epsilon", a.epsilon)?;
        if let Some(e) = epsilon {
            positive("epsilon", e)?;
        }
        let wa = f.resolve_or("a", a.a, DEFAULT_A)?;
        let wb = f.resolve_or("b", a.b, DEFAULT_B)?;
        nonnegative("a", wa)?;
        nonnegative("b", wb)?;
        precondition(wa + wb > 0.0, || "a and b cannot both be zero".into())?;
        let kernel: Kernel = match f.resolve::<String>("kernel", a.kernel.clone())? {
            Some(k) => parse_with(&k)?,
            None => Kernel::default(),
        };
        let max_edges = f.resolve_or("max_edges", a.max_edges, DEFAULT_MAX_EDGES)?;
        precondition(max_edges > 0, || "max_edges must be positive".into())?;
        let mut build = BuildConfig::new(delta).with_coefficients(wa, wb);
        build.epsilon = epsilon;
        build.kernel = kernel;
        build.max_edges = max_edges;
        build.explicit_max_edges = DEFAULT_EXPLICIT_MAX_EDGES;
        Ok(Self { input, build })
    }

    fn record(&self, rec: &mut Recorder) {
        rec.config("input", self.input.display().to_string());
        rec.config("delta", self.build.delta);
        rec.config("epsilon", self.build.epsilon);
        rec.config("a", self.build.a);
        rec.config("b", self.build.b);
        rec.config("kernel", self.build.kernel.name());
        rec.config("max_edges", self.build.max_edges);
    }

    fn execute(&self, rec: &mut Recorder) -> Res<(PointCloud, Estimate)> {
        rec.input(&self.input)?;
        let points = io::read_points(&self.input)?;
        let est = manifold_helmholtzian(&points, &self.build)?;
        rec.result("n_vertices", est.complex.n_vertices());
        rec.result("n_edges", est.complex.n_edges());
        rec.result("n_triangles", est.complex.n_triangles());
        rec.result("epsilon", est.weights.epsilon);
        rec.result("clamped_vertices", &est.ops.w0().clamped);
        rec.result("clamped_edges", &est.ops.w1().clamped);
        precondition(est.complex.n_edges() > 0, || {
            format!(
                "delta = {} yields a complex without edges",
                self.build.delta
            )
        })?;
        Ok((points, est))
    }
}

fn load_flow(
    ctx: &Context,
    src: &FlowSource,
    rec: &mut Recorder,
    points: &PointCloud,
    est: &Estimate,
) -> Res<(Vec<f64>, Vec<bool>)> {
    let cochain = ctx.file.resolve("cochain", src.cochain.clone())?;
    let field = ctx.file.resolve("field", src.field.clone())?;
    match (cochain, field) {
        (Some(p), None) => {
            rec.config("cochain", p.display().to_string());
            rec.input(&p)?;
            Ok(io::read_cochain(&p, &est.complex)?)
        }
        (None, Some(p)) => {
            rec.config("field", p.display().to_string());
            rec.input(&p)?;
            let f = io::read_field(&p)?;
            let values = cochain_from_field(points, &f, &est.complex)?;
            Ok((values, vec![true; est.complex.n_edges()]))
        }
        (None, None) => Err(CliError::Usage(
            "one of --cochain or --field is required".into(),
        )),
        (Some(_), Some(_)) => Err(CliError::Usage(
            "--cochain and --field are exclusive".into(),
        )),
    }
}

fn require_complete(present: &[bool]) -> Res<()> {
    let missing = present.iter().filter(|&&p| !p).count();
    precondition(missing == 0, || {
        format!("cochain leaves {missing} edges without a value")
    })
}

fn cmd_generate(a: GenerateArgs) -> Res<manifest::Manifest> {
    let ctx = Context::new(&a.common)?;
    let f = &ctx.file;
    let kind: DatasetKind =
        parse_with(&f.resolve_or("kind", a.kind.clone(), "circle".to_string())?)?;
    let n = f.resolve_or("n", a.n, 2000)?;
    precondition(n >= 3, || format!("n must be at least 3, got {n}"))?;
    let mut spec = SyntheticSpec::new(kind, n).with_seed(ctx.seed);
    if let Some(s) = f.resolve::<String>("sampling", a.sampling.clone())? {
        spec = spec.with_sampling(parse_with::<Sampling>(&s)?);
    }
    if let Some(noise) = f.resolve("noise", a.noise)? {
        nonnegative("noise", noise)?;
        spec.noise_sigma = Some(noise);
    }
    let delta = f.resolve("delta", a.delta)?;
    if let Some(d) = delta {
        positive("delta", d)?;
    }

    let mut rec = ctx.recorder("generate")?;
    rec.config("kind", kind.name());
    rec.config("n", n);
    rec.config("sampling", format!("{:?}", spec.sampling));
    rec.config("noise", spec.noise());
    rec.config("delta", delta);
    let data = generate(&spec)?;
    io::write_points(&rec.output("points.csv"), &data.points)?;
    if let Some(field) = &data.field {
        io::write_field(&rec.output("field.csv"), field)?;
        if let Some(d) = delta {
            let c = helmholtzian::complex::build_vr_complex(&data.points, d, DEFAULT_MAX_EDGES)?;
            let omega = cochain_from_field(&data.points, field, &c)?;
            io::write_cochain(&rec.output("cochain.csv"), &c, &omega)?;
            rec.result("n_edges", c.n_edges());
        }
    }
    rec.result("n_points", data.points.len());
    rec.result("dim", data.points.dim());
    rec.finish()
}

fn cmd_build(a: BuildArgs) -> Res<manifest::Manifest> {
    let ctx = Context::new(&a.common)?;
    let plan = ComplexPlan::resolve(&ctx, &a.complex)?;
    let mut rec = ctx.recorder("build")?;
    plan.record(&mut rec);
    let (_, est) = plan.execute(&mut rec)?;
    io::write_edges(&rec.output("edges.csv"), &est.complex)?;
    io::write_triangles(&rec.output("triangles.csv"), &est.complex)?;
    io::write_weights(&rec.output("vertex_weights.csv"), &est.weights.w0)?;
    io::write_weights(&rec.output("edge_weights.csv"), &est.weights.w1)?;
    io::write_weights(&rec.output("triangle_weights.csv"), &est.weights.w2)?;
    rec.result("explicit_operators", est.ops.is_explicit());
    if est.ops.is_explicit() {
        for (part, name) in [
            (Part::L1, "helmholtzian.csv"),
            (Part::L1Sym, "helmholtzian_sym.csv"),
        ] {
            let m = est.ops.assemble(part)?;
            io::write_triplets(&rec.output(name), &m)?;
        }
    }
    rec.result("spectrum_bound", est.ops.spectrum_bound());
    rec.finish()
}

fn cmd_spectrum(a: SpectrumArgs, betti: bool) -> Res<manifest::Manifest> {
    let ctx = Context::new(&a.common)?;
    let plan = ComplexPlan::resolve(&ctx, &a.complex)?;
    let default_k = if betti {
        GapPolicy::default().max_considered
    } else {
        10
    };
    let k = ctx.file.resolve_or("k", a.k, default_k)?;
    precondition(k >= 1, || "k must be at least 1".into())?;
    let mut rec = ctx.recorder(if betti { "betti" } else { "spectrum" })?;
    plan.record(&mut rec);
    rec.config("k", k);
    let (_, est) = plan.execute(&mut rec)?;
    precondition(k <= est.complex.n_edges(), || {
        format!(
            "k = {k} exceeds the {} edges of the complex",
            est.complex.n_edges()
        )
    })?;
    let opts = EigenOptions {
        seed: ctx.seed,
        ..EigenOptions::default()
    };
    let spectrum = analyze(&est.ops, k, &opts)?;
    io::write_spectrum(&rec.output("spectrum.csv"), &spectrum)?;
    if betti {
        let b = estimate_betti1(&spectrum.eigenvalues, &GapPolicy::default())?;
        rec.result("beta1", b.beta);
        rec.result("gap_ratio", b.gap_ratio);
        rec.result("low_confidence", b.low_confidence);
    } else {
        io::write_eigenvectors(&rec.output("eigenvectors.csv"), &spectrum.eigenvectors)?;
    }
    rec.result(
        "max_residual",
        spectrum.residuals.iter().copied().fold(0.0, f64::max),
    );
    rec.finish()
}

fn cmd_decompose(a: FlowArgs) -> Res<manifest::Manifest> {
    let ctx = Context::new(&a.common)?;
    let plan = ComplexPlan::resolve(&ctx, &a.complex)?;
    let mut rec = ctx.recorder("decompose")?;
    plan.record(&mut rec);
    let (points, est) = plan.execute(&mut rec)?;
    let (omega, present) = load_flow(&ctx, &a.source, &mut rec, &points, &est)?;
    require_complete(&present)?;
    let parts = hodge_decompose(&omega, est.ops.b1(), est.ops.b2(), &est.ops.w1().values)?;
    let energy = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    for (name, v) in [
        ("gradient", &parts.gradient),
        ("curl", &parts.curl),
        ("harmonic", &parts.harmonic),
    ] {
        io::write_cochain(&rec.output(&format!("{name}.csv")), &est.complex, v)?;
        rec.result(&format!("{name}_energy"), energy(v));
    }
    rec.result("total_energy", energy(&omega));
    rec.finish()
}

fn cmd_smooth(a: SmoothArgs) -> Res<manifest::Manifest> {
    let ctx = Context::new(&a.common)?;
    let plan = ComplexPlan::resolve(&ctx, &a.complex)?;
    let alpha = ctx
        .file
        .resolve("alpha", a.alpha)?
        .ok_or_else(|| CliError::Usage("--alpha is required".into()))?;
    nonnegative("alpha", alpha)?;
    let mut rec = ctx.recorder("smooth")?;
    plan.record(&mut rec);
    rec.config("alpha", alpha);
    let (points, est) = plan.execute(&mut rec)?;
    let (omega, present) = load_flow(&ctx, &a.source, &mut rec, &points, &est)?;
    require_complete(&present)?;
    let smoothed = smooth_flow(&omega, &est.ops.view(Part::L1Sym), alpha)?;
    io::write_cochain(&rec.output("smoothed.csv"), &est.complex, &smoothed)?;
    rec.finish()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PenaltyKind {
    Laplacian,
    UpDown,
}

/// Hyperparameters: `(lambda1, lambda2_up, lambda2_down)`; the Laplacian
/// penalty uses equal smoothness weights.
type Hyper = (f64, f64, f64);

struct Regressor<'a> {
    est: &'a Estimate,
    kernel: Arc<EdgeKernel>,
    penalty: PenaltyKind,
    folds: usize,
    fixed: Option<Hyper>,
    seed: u64,
}

impl<'a> Regressor<'a> {
    fn resolve(
        ctx: &Context,
        a: &RegressionArgs,
        est: &'a Estimate,
        rec: &mut Recorder,
    ) -> Res<Self> {
        let f = &ctx.file;
        let penalty = match f
            .resolve_or("penalty", a.penalty.clone(), "laplacian".to_string())?
            .as_str()
        {
            "laplacian" => PenaltyKind::Laplacian,
            "updown" => PenaltyKind::UpDown,
            other => return Err(CliError::Precondition(format!("unknown penalty '{other}'"))),
        };
        let folds = f.resolve_or("folds", a.folds, 5)?;
        precondition(folds >= 2, || {
            format!("folds must be at least 2, got {folds}")
        })?;
        let l1 = f.resolve("lambda1", a.lambda1)?;
        let l2 = f.resolve("lambda2", a.lambda2)?;
        let up = f.resolve("lambda2_up", a.lambda2_up)?.or(l2);
        let down = f.resolve("lambda2_down", a.lambda2_down)?.or(l2);
        let fixed = match (l1, up, down) {
            (Some(l1), Some(u), Some(d)) => {
                positive("lambda1", l1)?;
                nonnegative("lambda2_up", u)?;
                nonnegative("lambda2_down", d)?;
                precondition(penalty == PenaltyKind::UpDown || u == d, || {
                    "the laplacian penalty takes a single lambda2".into()
                })?;
                Some((l1, u, d))
            }
            (None, None, None) => None,
            _ => {
                return Err(CliError::Usage(
                    "give lambda1 and lambda2 (or both halves) together, or neither".into(),
                ))
            }
        };
        rec.config("penalty", format!("{penalty:?}").to_lowercase());
        rec.config("folds", folds);
        rec.config("fixed_hyperparameters", fixed);
        Ok(Self {
            est,
            kernel: Arc::new(EdgeKernel::new(&est.complex)),
            penalty,
            folds,
            fixed,
            seed: ctx.seed,
        })
    }

    fn fit(&self, omega: &[f64], train: &[bool], h: &Hyper) -> Res<Vec<f64>> {
        let ops = &self.est.ops;
        let model = match self.penalty {
            PenaltyKind::Laplacian => {
                fit_laplacian_rls(omega, train, &self.kernel, &ops.view(Part::L1Sym), h.0, h.1)?
            }
            PenaltyKind::UpDown => {
                let (up, down) = ops.scaled_halves();
                fit_updown_rls(omega, train, &self.kernel, &up, &down, h.0, h.1, h.2)?
            }
        };
        Ok(model.predict())
    }

    fn grid(&self) -> Vec<Hyper> {
        let g = default_hyper_grid();
        let mut out = Vec::new();
        for &l1 in &g {
            for &u in &g {
                match self.penalty {
                    PenaltyKind::Laplacian => out.push((l1, u, u)),
                    PenaltyKind::UpDown => out.extend(g.iter().map(|&d| (l1, u, d))),
                }
            }
        }
        out
    }

    /// Fixed hyperparameters, or the cross-validated best on `labeled`.
    fn hyper(&self, omega: &[f64], labeled: &[bool]) -> Res<(Hyper, Option<f64>)> {
        if let Some(h) = self.fixed {
            return Ok((h, None));
        }
        // Failed fits score NaN and lose rather than abort the search.
        let fit = |tr: &[bool], h: &Hyper| {
            Ok(self
                .fit(omega, tr, h)
                .unwrap_or_else(|_| vec![f64::NAN; omega.len()]))
        };
        let out = cross_validate(fit, omega, labeled, self.folds, &self.grid(), self.seed)?;
        Ok((out.best, Some(out.best_score)))
    }
}

fn record_hyper(rec: &mut Recorder, h: &Hyper, cv: Option<f64>) {
    rec.result("lambda1", h.0);
    rec.result("lambda2_up", h.1);
    rec.result("lambda2_down", h.2);
    rec.result("cv_r2", cv);
}

fn cmd_ssl(a: SslArgs) -> Res<manifest::Manifest> {
    let ctx = Context::new(&a.common)?;
    let plan = ComplexPlan::resolve(&ctx, &a.complex)?;
    let ratio = ctx.file.resolve_or("train_ratio", a.train_ratio, 0.3)?;
    precondition(ratio > 0.0 && ratio < 1.0, || {
        format!("train_ratio must lie in (0, 1), got {ratio}")
    })?;
    let splits = ctx.file.resolve_or("splits", a.splits, 20)?;
    precondition(splits >= 1, || "splits must be at least 1".into())?;
    let tune_ratio = ctx.file.resolve_or("tune_ratio", a.tune_ratio, 0.2)?;
    precondition(tune_ratio > 0.0 && tune_ratio < 1.0, || {
        format!("tune_ratio must lie in (0, 1), got {tune_ratio}")
    })?;
    let tune_each = a.tune_each_split
        || ctx
            .file
            .resolve_or("tune_each_split", None::<bool>, false)?;
    let mut rec = ctx.recorder("ssl")?;
    plan.record(&mut rec);
    rec.config("train_ratio", ratio);
    rec.config("splits", splits);
    rec.config("tune_ratio", tune_ratio);
    rec.config("tune_each_split", tune_each);
    let (points, est) = plan.execute(&mut rec)?;
    let (omega, present) = load_flow(&ctx, &a.source, &mut rec, &points, &est)?;
    let reg = Regressor::resolve(&ctx, &a.regression, &est, &mut rec)?;
    let labeled: Vec<usize> = (0..omega.len()).filter(|&e| present[e]).collect();
    precondition(labeled.len() >= 2, || {
        "need at least two labeled edges".into()
    })?;

    let split = |r: f64, seed: u64| -> Res<(Vec<bool>, Vec<bool>)> {
        let local = train_mask(labeled.len(), r, seed)?;
        let mut train = vec![false; omega.len()];
        let mut test = vec![false; omega.len()];
        for (pos, &e) in labeled.iter().enumerate() {
            if local[pos] {
                train[e] = true;
            } else {
                test[e] = true;
            }
        }
        Ok((train, test))
    };
    let once = if tune_each {
        None
    } else {
        Some(reg.hyper(&omega, &split(tune_ratio, ctx.seed)?.0)?)
    };
    let mut scores = Vec::with_capacity(splits);
    let mut tuned = once;
    let mut first_prediction = None;
    for s in 0..splits {
        let (train, test) = split(ratio, ctx.seed.wrapping_add(s as u64))?;
        let h = match &once {
            Some(t) => *t,
            None => {
                let t = reg.hyper(&omega, &train)?;
                tuned.get_or_insert(t);
                t
            }
        };
        let pred = reg.fit(&omega, &train, &h.0)?;
        scores.push(r2_score(&pred, &omega, &test)?);
        if first_prediction.is_none() {
            first_prediction = Some(pred);
        }
    }
    let (h, cv) = tuned.expect("at least one split");
    record_hyper(&mut rec, &h, cv);
    let report = SplitReport::from_scores(ratio, ctx.seed, &scores);
    let metrics = json!({
        "train_ratio": report.train_ratio,
        "r2_median": report.r2_median,
        "r2_p5": report.r2_p5,
        "r2_p95": report.r2_p95,
        "seed": report.seed,
    });
    let path = rec.output("metrics.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&metrics).expect("plain JSON") + "\n",
    )
    .map_err(|e| CliError::io(&path, e))?;
    io::write_cochain(
        &rec.output("predictions.csv"),
        &est.complex,
        &first_prediction.expect("one split"),
    )?;
    rec.result("r2_median", report.r2_median);
    rec.result("n_labeled", labeled.len());
    rec.finish()
}

fn cmd_trajectory(a: TrajectoryArgs) -> Res<manifest::Manifest> {
    let ctx = Context::new(&a.common)?;
    let plan = ComplexPlan::resolve(&ctx, &a.complex)?;
    let traj_path = ctx
        .file
        .resolve("trajectories", a.trajectories.clone())?
        .ok_or_else(|| CliError::Usage("--trajectories is required".into()))?;
    let mut rec = ctx.recorder("trajectory")?;
    plan.record(&mut rec);
    rec.config("trajectories", traj_path.display().to_string());
    let (points, est) = plan.execute(&mut rec)?;
    rec.input(&traj_path)?;
    let set = io::read_trajectories(&traj_path)?;
    precondition(
        set.trajectories()[0].points[0].len() == points.dim(),
        || "trajectory coordinates do not match the point dimension".into(),
    )?;
    let obs = trajectory_to_cochain(&set, &points, &est.complex)?;
    let reg = Regressor::resolve(&ctx, &a.regression, &est, &mut rec)?;
    let n_obs = obs.observed.iter().filter(|&&o| o).count();
    precondition(n_obs >= reg.folds, || {
        format!(
            "trajectories touch {n_obs} edges, fewer than the {} folds",
            reg.folds
        )
    })?;
    let (h, cv) = reg.hyper(&obs.values, &obs.observed)?;
    let pred = reg.fit(&obs.values, &obs.observed, &h)?;
    // Observed edges keep their counts; the rest take the interpolant.
    let filled: Vec<f64> = (0..pred.len())
        .map(|e| {
            if obs.observed[e] {
                obs.values[e]
            } else {
                pred[e]
            }
        })
        .collect();
    io::write_cochain_subset(
        &rec.output("observed.csv"),
        &est.complex,
        &obs.values,
        Some(&obs.observed),
    )?;
    io::write_cochain(&rec.output("interpolated.csv"), &est.complex, &filled)?;
    record_hyper(&mut rec, &h, cv);
    rec.result("n_trajectories", set.len());
    rec.result("observed_edges", n_obs);
    rec.result("skipped_steps", obs.skipped_steps);
    rec.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_errors_map_to_distinct_codes() {
        let cases = [
            CliError::from(Error::InvalidInput("x".into())),
            CliError::from(Error::Malformed {
                line: 1,
                message: "x".into(),
            }),
            CliError::from(Error::Singular("x".into())),
            CliError::from(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "x",
            ))),
            CliError::Usage("x".into()),
        ];
        let mut codes: Vec<i32> = cases.iter().map(CliError::exit_code).collect();
        codes.sort_unstable();
        codes.dedup();
        assert_eq!(codes.len(), cases.len());
        assert!(codes.iter().all(|&c| c != 0));
    }

    #[test]
    fn error_json_shape() {
        let v = CliError::Precondition("k must be at least 1".into()).to_json();
        assert_eq!(v["error"]["kind"], "precondition");
        assert_eq!(v["error"]["exit_code"], 5);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
