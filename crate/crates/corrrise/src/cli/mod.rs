//! The `corrrise` command line: `explain`, `evaluate`, `sanity-check`, and
//! `genmasks` subcommands over the library.
//!
//! Every flag can also come from a `key=value` config file (`--config`);
//! flags win over file values. Errors print to stderr with a
//! machine-parseable `error[<category>]:` prefix and map to exit codes
//! 1 (usage), 2 (data), 3 (backend).

mod commands;
mod modelspec;

pub use modelspec::build_backend;

use crate::error::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "corrrise",
    version,
    about = "Signed saliency explanations for face verification, plus deletion/insertion evaluation of saliency methods"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explain one verification decision with signed saliency maps.
    Explain(ExplainArgs),
    /// Score saliency methods with deletion/insertion curves over a manifest.
    Evaluate(EvaluateArgs),
    /// Parameter-randomization sanity check: trained vs randomized maps.
    SanityCheck(SanityArgs),
    /// Dump a mask stack as PNG files for inspection.
    Genmasks(GenmasksArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Corrrise,
    Random,
    Center,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RankingArg {
    Signed,
    PositiveOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CropArg {
    Center,
    None,
}

#[derive(Debug, Args, Clone)]
pub struct CommonArgs {
    /// Model: an ONNX file path, or a toy spec such as `toy:grid=4`,
    /// `toy:grid=4,region=0:0:56:112`, `toy:gated,gate=0.25`,
    /// `toy:constant,dim=8`.
    #[arg(long)]
    pub model: Option<String>,

    /// Base seed for every random stream in the run.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Number of mask iterations (N).
    #[arg(long)]
    pub iterations: Option<usize>,

    /// Square patches per mask.
    #[arg(long)]
    pub patches: Option<usize>,

    /// Patch side length in pixels.
    #[arg(long)]
    pub patch_size: Option<usize>,

    /// Optional box-blur radius applied to each mask (0 = hard edges).
    #[arg(long)]
    pub blur_radius: Option<usize>,

    /// Parallel worker threads (0 = one per core).
    #[arg(long)]
    pub workers: Option<usize>,

    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Flat key=value config file; command-line flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Per-channel normalization mean for the ONNX backend, e.g. `0.5,0.5,0.5`.
    #[arg(long)]
    pub norm_mean: Option<String>,

    /// Per-channel normalization std for the ONNX backend.
    #[arg(long)]
    pub norm_std: Option<String>,

    /// How to fit non-square inputs to the backend size.
    #[arg(long, value_enum)]
    pub crop: Option<CropArg>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    #[arg(long)]
    pub image_a: Option<PathBuf>,

    #[arg(long)]
    pub image_b: Option<PathBuf>,

    /// Decision threshold; when given, the metadata records the
    /// match/nonmatch decision for the unperturbed pair.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    #[arg(long)]
    pub manifest: Option<PathBuf>,

    /// Saliency method to evaluate; repeat for several. Default: all three.
    #[arg(long, value_enum)]
    pub method: Vec<MethodArg>,

    /// Curve steps n (points at fractions k/n for k = 0..n).
    #[arg(long)]
    pub steps: Option<usize>,

    /// Fixed decision threshold; chosen on the unmodified pairs when absent.
    #[arg(long)]
    pub threshold: Option<f64>,

    /// Fill value for deleted pixels.
    #[arg(long)]
    pub deletion_fill: Option<f64>,

    /// Base value of the plain image pixels are inserted onto.
    #[arg(long)]
    pub insertion_base: Option<f64>,

    /// Pixel ranking source.
    #[arg(long, value_enum)]
    pub ranking: Option<RankingArg>,

    /// Disable the on-disk saliency cache.
    #[arg(long)]
    pub no_cache: bool,
}

#[derive(Debug, Args)]
pub struct SanityArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenmasksArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Mask dimensions as two values: height width.
    #[arg(long, num_args = 2, value_names = ["H", "W"])]
    pub size: Vec<usize>,

    /// Number of masks to dump.
    #[arg(long)]
    pub num: Option<usize>,
}

/// Flat `key=value` config file; `#` starts a comment line.
#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut values = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}: line {}: expected key=value, got `{line}`",
                    path.display(),
                    lineno + 1
                ))
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    /// Flag value if present, else the parsed file value, else none.
    pub fn resolve<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Config(format!("config key `{key}`: cannot parse `{raw}`"))),
        }
    }

    pub fn resolve_path(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.or_else(|| self.get(key).map(PathBuf::from))
    }
}

fn parse_channel_list(raw: &str, what: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{what}: cannot parse `{s}` as a number")))
        })
        .collect()
}

/// Fully resolved run settings shared by all commands.
pub struct Resolved {
    pub model: Option<String>,
    pub seed: u64,
    pub iterations: usize,
    pub patches: usize,
    pub patch_size: Option<usize>,
    pub blur_radius: usize,
    pub workers: usize,
    pub out: PathBuf,
    pub preprocessing: Option<crate::embedder::Preprocessing>,
    pub crop: crate::io::CropMode,
}

impl CommonArgs {
    pub fn resolve(&self, default_out: &str) -> Result<(Resolved, FileConfig)> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let model = self.model.clone().or_else(|| file.get("model").map(String::from));
        let norm_mean = self
            .norm_mean
            .clone()
            .or_else(|| file.get("norm-mean").map(String::from))
            .map(|raw| parse_channel_list(&raw, "norm-mean"))
            .transpose()?;
        let norm_std = self
            .norm_std
            .clone()
            .or_else(|| file.get("norm-std").map(String::from))
            .map(|raw| parse_channel_list(&raw, "norm-std"))
            .transpose()?;
        let preprocessing = match (norm_mean, norm_std) {
            (None, None) => None,
            (mean, std) => {
                let mean = mean.ok_or_else(|| {
                    Error::Config("norm-std given without norm-mean".into())
                })?;
                let std = std.ok_or_else(|| {
                    Error::Config("norm-mean given without norm-std".into())
                })?;
                Some(crate::embedder::Preprocessing { mean, std })
            }
        };
        let crop_arg = match file.resolve(self.crop, "crop")? {
            Some(c) => c,
            None => CropArg::Center,
        };
        let resolved = Resolved {
            model,
            seed: file.resolve(self.seed, "seed")?.unwrap_or(0),
            iterations: file
                .resolve(self.iterations, "iterations")?
                .unwrap_or(crate::maskgen::DEFAULT_NUM_MASKS),
            patches: file
                .resolve(self.patches, "patches")?
                .unwrap_or(crate::maskgen::DEFAULT_PATCHES_PER_MASK),
            patch_size: file.resolve(self.patch_size, "patch-size")?,
            blur_radius: file.resolve(self.blur_radius, "blur-radius")?.unwrap_or(0),
            workers: file.resolve(self.workers, "workers")?.unwrap_or(0),
            out: file
                .resolve_path(self.out.clone(), "out")
                .unwrap_or_else(|| PathBuf::from(default_out)),
            preprocessing,
            crop: match crop_arg {
                CropArg::Center => crate::io::CropMode::CenterSquare,
                CropArg::None => crate::io::CropMode::None,
            },
        };
        Ok((resolved, file))
    }
}

impl Resolved {
    /// Mask generator config for the given image dimensions.
    pub fn mask_config(&self, height: usize, width: usize) -> crate::maskgen::MaskGenConfig {
        let mut cfg = crate::maskgen::MaskGenConfig::default_for(height, width, self.seed);
        cfg.num_masks = self.iterations;
        cfg.patches_per_mask = self.patches;
        if let Some(ps) = self.patch_size {
            cfg.patch_size = ps;
        }
        cfg.blur_radius = self.blur_radius;
        cfg
    }

    pub fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Config(format!("workers: {e}")))
    }
}

impl std::str::FromStr for CropArg {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "center" => Ok(CropArg::Center),
            "none" => Ok(CropArg::None),
            other => Err(format!("unknown crop mode `{other}`")),
        }
    }
}

/// Parse argv and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("error[usage]: {e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Explain(args) => commands::cmd_explain(args),
        Command::Evaluate(args) => commands::cmd_evaluate(args),
        Command::SanityCheck(args) => commands::cmd_sanity_check(args),
        Command::Genmasks(args) => commands::cmd_genmasks(args),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn config_file_parses_and_flags_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "# comment\niterations=100\nseed=9\nmodel=toy:grid=2").unwrap();
        let file = FileConfig::load(&path).unwrap();
        assert_eq!(file.resolve(None::<usize>, "iterations").unwrap(), Some(100));
        assert_eq!(file.resolve(Some(7u64), "seed").unwrap(), Some(7));
        assert_eq!(file.get("model"), Some("toy:grid=2"));
        assert_eq!(file.get("missing"), None);
    }

    #[test]
    fn malformed_config_line_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.conf");
        std::fs::write(&path, "iterations 100\n").unwrap();
        let err = FileConfig::load(&path).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn defaults_resolve_without_model() {
        let args = CommonArgs {
            model: None,
            seed: None,
            iterations: None,
            patches: None,
            patch_size: None,
            blur_radius: None,
            workers: None,
            out: None,
            config: None,
            norm_mean: None,
            norm_std: None,
            crop: None,
        };
        let (resolved, _) = args.resolve("default-out").unwrap();
        assert!(resolved.model.is_none());
        assert_eq!(resolved.iterations, crate::maskgen::DEFAULT_NUM_MASKS);
        assert_eq!(resolved.out, PathBuf::from("default-out"));
    }
}
