//! Batch command-line front end: fit polynomials to point data, extract
//! rotation-invariant feature vectors, compare them, rotate inputs, and
//! enumerate contraction diagrams.
//!
//! Exit codes: 0 success, 2 usage, 3 input parse, 4 numerical or domain
//! failure.

mod output;

use std::fmt;
use std::time::Instant;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rotinv::catalog::{self, CatalogConfig, FeatureVector};
use rotinv::contraction::{self, ContractionGraph};
use rotinv::fitting::{
    self, parse_point_csv, write_point_csv, FitConfig, PointCloud, RadialWeight, Ridge, ScaleMode,
    ValueSource, XyzFile,
};
use rotinv::tensor_poly::{OrthogonalMatrix, Polynomial};

use output::{read_input, to_json_string, write_output, RunManifest};

#[derive(Parser)]
#[command(
    name = "rotinv",
    version,
    about = "Rotation-invariant polynomial features for point clouds and molecules"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a polynomial to CSV or XYZ point data
    Fit(FitArgs),
    /// Compute the invariant feature vector of a polynomial JSON file
    Features(FeaturesArgs),
    /// Compare two feature vectors
    Compare(CompareArgs),
    /// Rotate a point cloud, molecule, or polynomial
    Rotate(RotateArgs),
    /// Enumerate contraction graphs for a vertex spec
    Graphs(GraphsArgs),
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum FormatArg {
    Csv,
    Xyz,
    Poly,
}

#[derive(Clone, Copy, ValueEnum)]
enum RadialArg {
    None,
    Gauss,
    Exp,
}

impl From<RadialArg> for RadialWeight {
    fn from(arg: RadialArg) -> Self {
        match arg {
            RadialArg::None => RadialWeight::None,
            RadialArg::Gauss => RadialWeight::Gaussian,
            RadialArg::Exp => RadialWeight::Exponential,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    None,
    Unit,
}

#[derive(Clone, Copy, ValueEnum)]
enum ValueSourceArg {
    One,
    Mass,
}

#[derive(Args)]
struct FitArgs {
    /// Point data, CSV or XYZ; `-` reads stdin
    input: String,
    /// Maximum polynomial degree D
    #[arg(long)]
    degree: usize,
    /// Ridge strength c; omitted means the automatic default
    #[arg(long)]
    ridge: Option<f64>,
    /// Radial weight folded into the basis
    #[arg(long, value_enum, default_value_t = RadialArg::None)]
    radial: RadialArg,
    /// Fit a spherical envelope on degrees D-1 and D
    #[arg(long)]
    spherical: bool,
    /// Scale normalization; defaults to unit for CSV and none for XYZ
    #[arg(long, value_enum)]
    scale: Option<ScaleArg>,
    /// Value assigned to each atom of an XYZ input
    #[arg(long, value_enum, default_value_t = ValueSourceArg::Mass)]
    value_source: ValueSourceArg,
    /// Number of CSV coordinate columns (extras are value, then weight)
    #[arg(long)]
    dim: Option<usize>,
    /// Input format override; inferred from the extension otherwise
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Output path for the polynomial JSON; `-` writes stdout
    #[arg(short, long, default_value = "-")]
    output: String,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Polynomial JSON; `-` reads stdin
    input: String,
    /// Include the mixed invariants
    #[arg(long)]
    mixed: bool,
    /// File of extra graph specs, one per line
    #[arg(long)]
    graphs: Option<String>,
    /// Replace each k-vertex graph value v by sign(v) |v|^(1/k)
    #[arg(long)]
    normalize_order: bool,
    /// Highest trace power (default: the dimension)
    #[arg(long)]
    max_trace_power: Option<usize>,
    #[arg(short, long, default_value = "-")]
    output: String,
}

#[derive(Args)]
struct CompareArgs {
    /// First feature vector JSON
    a: String,
    /// Second feature vector JSON
    b: String,
    /// Optional per-entry positive weights, one per line
    #[arg(long)]
    weights: Option<String>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["seed", "matrix"])))]
struct RotateArgs {
    /// Point CSV, XYZ molecule, or polynomial JSON; `-` reads stdin
    input: String,
    /// Seed for a random orthogonal matrix (Gaussian QR, sign-fixed)
    #[arg(long)]
    seed: Option<u64>,
    /// File with an explicit orthogonal matrix, one row per line
    #[arg(long)]
    matrix: Option<String>,
    /// Force a reflection (negative determinant) for seeded matrices
    #[arg(long)]
    reflect: bool,
    /// Number of CSV coordinate columns
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(short, long, default_value = "-")]
    output: String,
}

#[derive(Args)]
struct GraphsArgs {
    /// Vertex spec, e.g. `3:p,3:p,2:p`
    spec: String,
    /// Evaluate every graph on this polynomial JSON
    #[arg(long)]
    eval: Option<String>,
    #[arg(short, long, default_value = "-")]
    output: String,
}

#[derive(Debug)]
enum CliError {
    Io {
        path: String,
        source: std::io::Error,
    },
    Json {
        path: String,
        source: serde_json::Error,
    },
    Lib(rotinv::Error),
    BadInput(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, source } => write!(f, "{path}: {source}"),
            CliError::Json { path, source } => write!(f, "{path}: {source}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::BadInput(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<rotinv::Error> for CliError {
    fn from(e: rotinv::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Json { .. } | CliError::BadInput(_) => 3,
            CliError::Lib(e) => match e {
                rotinv::Error::Parse { .. } | rotinv::Error::GraphSpec(_) => 3,
                _ => 4,
            },
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Features(args) => cmd_features(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Rotate(args) => cmd_rotate(args),
        Command::Graphs(args) => cmd_graphs(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn read(path: &str) -> Result<String, CliError> {
    read_input(path).map_err(|source| CliError::Io {
        path: path.to_string(),
        source,
    })
}

fn write(path: &str, content: &str) -> Result<(), CliError> {
    write_output(path, content).map_err(|source| CliError::Io {
        path: path.to_string(),
        source,
    })
}

fn detect_format(explicit: Option<FormatArg>, path: &str, fallback: FormatArg) -> FormatArg {
    if let Some(f) = explicit {
        return f;
    }
    let lower = path.to_lowercase();
    if lower.ends_with(".xyz") {
        FormatArg::Xyz
    } else if lower.ends_with(".json") {
        FormatArg::Poly
    } else if lower.ends_with(".csv") {
        FormatArg::Csv
    } else {
        fallback
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &str, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|source| CliError::Json {
        path: path.to_string(),
        source,
    })
}

fn emit_manifest(manifest: RunManifest, output: &str, started: Instant) -> Result<(), CliError> {
    manifest.emit(output, started).map_err(|source| CliError::Io {
        path: output.to_string(),
        source,
    })
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let text = read(&args.input)?;
    let format = detect_format(args.format, &args.input, FormatArg::Csv);
    let cloud: PointCloud = match format {
        FormatArg::Xyz => {
            let xyz = XyzFile::parse(&text)?;
            let source = match args.value_source {
                ValueSourceArg::One => ValueSource::One,
                ValueSourceArg::Mass => ValueSource::Mass,
            };
            fitting::xyz_to_cloud(&xyz, source)?
        }
        FormatArg::Csv => parse_point_csv(&text, args.dim)?,
        FormatArg::Poly => {
            return Err(CliError::BadInput(
                "fit expects point data, not a polynomial file".into(),
            ))
        }
    };
    let scale_mode = match args.scale {
        Some(ScaleArg::None) => ScaleMode::None,
        Some(ScaleArg::Unit) => ScaleMode::UnitMeanDistance,
        // Molecules share a physical scale; generic clouds do not.
        None => match format {
            FormatArg::Xyz => ScaleMode::None,
            _ => ScaleMode::UnitMeanDistance,
        },
    };
    let (normalized, record) = fitting::normalize(&cloud, scale_mode)?;
    let ridge = args.ridge.map(Ridge::Value).unwrap_or(Ridge::Auto);
    let (poly, diagnostics) = if args.spherical {
        fitting::fit_spherical(&normalized, args.degree, ridge)?
    } else {
        let cfg = FitConfig {
            max_degree: args.degree,
            ridge,
            radial_weight: args.radial.into(),
            spherical: false,
        };
        fitting::fit(&normalized, &cfg)?
    };

    write(&args.output, &to_json_string(&poly).expect("polynomial serializes"))?;
    eprintln!("{}", to_json_string(&diagnostics).expect("diagnostics serialize"));

    let mut manifest = RunManifest::new(
        vec![args.input.clone()],
        serde_json::json!({
            "degree": args.degree,
            "ridge": args.ridge,
            "radial": match args.radial {
                RadialArg::None => "none",
                RadialArg::Gauss => "gauss",
                RadialArg::Exp => "exp",
            },
            "spherical": args.spherical,
            "scale": match scale_mode {
                ScaleMode::None => "none",
                ScaleMode::UnitMeanDistance => "unit",
            },
        }),
    );
    manifest.diagnostics = Some(diagnostics);
    manifest.normalization = Some(record);
    emit_manifest(manifest, &args.output, started)
}

fn cmd_features(args: FeaturesArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let text = read(&args.input)?;
    let poly: Polynomial = parse_json(&args.input, &text)?;
    let mut cfg = CatalogConfig {
        include_mixed: args.mixed,
        normalize_by_order: args.normalize_order,
        max_trace_power: args.max_trace_power,
        ..CatalogConfig::default()
    };
    if let Some(path) = &args.graphs {
        let spec_text = read(path)?;
        cfg.extra_graphs = contraction::parse_graph_spec_file(&spec_text)?;
    }
    let features = catalog::feature_vector(&poly, &cfg)?;
    write(&args.output, &to_json_string(&features).expect("features serialize"))?;

    let manifest = RunManifest::new(
        vec![args.input.clone()],
        serde_json::json!({
            "mixed": args.mixed,
            "normalize_order": args.normalize_order,
            "max_trace_power": args.max_trace_power,
            "graphs": args.graphs,
        }),
    );
    emit_manifest(manifest, &args.output, started)
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let fa: FeatureVector = parse_json(&args.a, &read(&args.a)?)?;
    let fb: FeatureVector = parse_json(&args.b, &read(&args.b)?)?;
    let weights: Option<Vec<f64>> = match &args.weights {
        Some(path) => {
            let text = read(path)?;
            let parsed: Result<Vec<f64>, CliError> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| {
                    l.parse::<f64>()
                        .map_err(|_| CliError::BadInput(format!("bad weight `{l}` in {path}")))
                })
                .collect();
            Some(parsed?)
        }
        None => None,
    };
    let d = catalog::distance(&fa, &fb, weights.as_deref())?;
    let mut report = format!("distance: {d:.16e}\n");
    let mut diffs: Vec<(&str, f64)> = fa
        .entries()
        .iter()
        .zip(fb.entries())
        .map(|(x, y)| (x.name.as_str(), (x.value - y.value).abs()))
        .collect();
    diffs.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (name, diff) in diffs {
        report.push_str(&format!("{name}\t{diff:.16e}\n"));
    }
    write("-", &report)?;

    let manifest = RunManifest::new(
        vec![args.a.clone(), args.b.clone()],
        serde_json::json!({ "weights": args.weights, "distance": d }),
    );
    emit_manifest(manifest, "-", started)
}

fn parse_matrix_file(path: &str, text: &str) -> Result<OrthogonalMatrix, CliError> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|line| {
            line.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .map(|f| {
                    f.parse::<f64>().map_err(|_| {
                        CliError::BadInput(format!("bad matrix entry `{f}` in {path}"))
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    Ok(OrthogonalMatrix::from_rows(&rows)?)
}

fn cmd_rotate(args: RotateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let text = read(&args.input)?;
    let format = detect_format(args.format, &args.input, FormatArg::Csv);

    enum Payload {
        Poly(Polynomial),
        Xyz(XyzFile),
        Csv(PointCloud),
    }
    let payload = match format {
        FormatArg::Poly => Payload::Poly(parse_json(&args.input, &text)?),
        FormatArg::Xyz => Payload::Xyz(XyzFile::parse(&text)?),
        FormatArg::Csv => Payload::Csv(parse_point_csv(&text, args.dim)?),
    };
    let dimension = match &payload {
        Payload::Poly(p) => p.dimension(),
        Payload::Xyz(_) => 3,
        Payload::Csv(pc) => pc.dimension(),
    };

    let rotation = match (&args.matrix, args.seed) {
        (Some(path), _) => parse_matrix_file(path, &read(path)?)?,
        (None, Some(seed)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if args.reflect {
                OrthogonalMatrix::random_with_det(dimension, &mut rng, true)
            } else {
                OrthogonalMatrix::random_haar(dimension, &mut rng)
            }
        }
        (None, None) => unreachable!("clap requires seed or matrix"),
    };
    if rotation.dimension() != dimension {
        return Err(CliError::Lib(rotinv::Error::DimensionMismatch {
            expected: dimension,
            got: rotation.dimension(),
        }));
    }

    let rendered = match payload {
        Payload::Poly(p) => {
            let rotated = p.apply_rotation(&rotation)?;
            to_json_string(&rotated).expect("polynomial serializes")
        }
        Payload::Xyz(mut xyz) => {
            for atom in &mut xyz.atoms {
                let rotated = rotation.apply(&atom.position);
                atom.position = [rotated[0], rotated[1], rotated[2]];
            }
            xyz.write()
        }
        Payload::Csv(pc) => {
            let rotated = pc.map_points(|p| rotation.apply(p))?;
            write_point_csv(&rotated)
        }
    };
    write(&args.output, &rendered)?;

    let mut manifest = RunManifest::new(
        vec![args.input.clone()],
        serde_json::json!({
            "seed": args.seed,
            "matrix": args.matrix,
            "reflect": args.reflect,
            "determinant": rotation.determinant(),
        }),
    );
    manifest.rotation = Some(rotation.rows());
    emit_manifest(manifest, &args.output, started)
}

/// Parse a vertex-only spec like `3:p,3:p,2:p` into (degree, slot) pairs.
fn parse_vertex_spec(spec: &str) -> Result<Vec<(usize, usize)>, CliError> {
    let mut names: Vec<String> = Vec::new();
    let mut out = Vec::new();
    for token in spec.split(',') {
        let token = token.trim();
        let (deg, name) = token.split_once(':').ok_or_else(|| {
            CliError::BadInput(format!("vertex `{token}` is not of the form deg:poly"))
        })?;
        let degree: usize = deg
            .trim()
            .parse()
            .map_err(|_| CliError::BadInput(format!("bad vertex degree `{deg}`")))?;
        let name = name.trim().to_string();
        let slot = match names.iter().position(|n| *n == name) {
            Some(i) => i,
            None => {
                names.push(name);
                names.len() - 1
            }
        };
        out.push((degree, slot));
    }
    Ok(out)
}

fn cmd_graphs(args: GraphsArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let spec = parse_vertex_spec(&args.spec)?;
    let graphs: Vec<ContractionGraph> =
        contraction::enumerate_graphs(&spec, contraction::CANONICAL_VERTEX_CAP)?;

    let poly: Option<Polynomial> = match &args.eval {
        Some(path) => Some(parse_json(path, &read(path)?)?),
        None => None,
    };

    let mut report = String::new();
    for graph in &graphs {
        match &poly {
            Some(p) => {
                let value = contraction::evaluate_graph(graph, &[p])?;
                report.push_str(&format!("{}\t{value:.16e}\n", graph.to_spec_string()));
            }
            None => report.push_str(&format!("{}\n", graph.to_spec_string())),
        }
    }
    report.push_str(&format!("count: {}\n", graphs.len()));
    write(&args.output, &report)?;

    let manifest = RunManifest::new(
        args.eval.iter().cloned().collect(),
        serde_json::json!({ "spec": args.spec }),
    );
    emit_manifest(manifest, &args.output, started)
}
