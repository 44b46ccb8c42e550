use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Voxel shape completion for unseen categories: toy data, priors, training,
/// refinement, evaluation and export.
#[derive(Debug, Parser)]
#[command(name = "voxcomplete", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a procedural toy corpus with simulated partial scans.
    GenToy {
        #[command(flatten)]
        common: Common,
    },
    /// Build the seen-category bank and one category-specific bank per test category.
    BuildPriors {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train the coarse completion model on the training split.
    TrainCosl {
        #[arg(long)]
        manifest: PathBuf,
        /// Seen-category bank directory or bank.json.
        #[arg(long)]
        bank: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Write binarized coarse shapes for every test object.
    InferCosl {
        #[arg(long)]
        manifest: PathBuf,
        /// Seen-category bank directory or bank.json.
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Refine coarse shapes per test category from partial scans only.
    RefineCasr {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory holding one category-specific bank per category subdirectory.
        #[arg(long)]
        bank: PathBuf,
        /// Directory of coarse shapes named <object_id>.wvox.
        #[arg(long)]
        pred: PathBuf,
        /// Refine only this category.
        #[arg(long)]
        category: Option<String>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        hp: HpFlags,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Score predictions against ground truth.
    Eval {
        /// Directory of predictions named <object_id>.wvox.
        #[arg(long)]
        pred: PathBuf,
        /// Directory of ground truth named <object_id>.wvox; defaults to the manifest's shapes.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Export grids (.wvox) or fields (.wfld) as point lists or cube meshes.
    Export {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = ExportFormat::Points)]
        format: ExportFormat,
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub resolution: Option<usize>,
    /// key=value overlay file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HpFlags {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub gamma1: Option<f64>,
    #[arg(long)]
    pub gamma2: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    /// One "x y z" voxel centre per line.
    Points,
    /// Wavefront OBJ with one unit cube per voxel.
    CubesObj,
}
