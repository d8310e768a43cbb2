//! Command-line harness: synthetic scene generation, train/test
//! sampling, leakage audits, filtering, feature extraction,
//! classification, evaluation and full experiment runs.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hsieval::classify::TrainedModel;
use hsieval::datamodel::SplitState;
use hsieval::error::{Error, Result};
use hsieval::features::labeled_pixels;
use hsieval::filters::{gaussian_filter, mean_filter, GaussianSpec, WindowSpec};
use hsieval::harness::{
    parse_strategy, render_map, run_experiment, ClassifierKind, ExperimentConfig, FeatureKind,
};
use hsieval::ingest::{read_cube, read_labels, read_split, write_cube, write_labels, write_split};
use hsieval::leakage::{correlation_decay, overlap_rate, Axis};
use hsieval::metrics::{confusion, oa_aa_kappa};
use hsieval::sampling::{SamplingPlan, SplitSummary};
use hsieval::synthgen::{generate_scene, Layout, SceneConfig};

#[derive(Parser)]
#[command(
    name = "hsieval",
    about = "Hyperspectral classification experiments with leakage-aware train/test sampling",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene (cube + label files)
    Generate {
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 16)]
        bands: usize,
        #[arg(long, default_value_t = 4)]
        classes: u16,
        /// grid:<block> or voronoi:<seeds_per_class>
        #[arg(long, default_value = "grid:8")]
        layout: String,
        /// Minimum L2 distance between class mean spectra
        #[arg(long, default_value_t = 1.0)]
        separation: f64,
        /// Per-band Gaussian noise standard deviation
        #[arg(long, default_value_t = 0.1)]
        noise_sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output cube path
        #[arg(long)]
        cube: PathBuf,
        /// Output label-map path
        #[arg(long)]
        labels: PathBuf,
    },
    /// Draw a train/test split from a label map
    Sample {
        #[arg(long)]
        labels: PathBuf,
        /// stratified or controlled
        #[arg(long)]
        strategy: String,
        #[arg(long)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report the train/test window-overlap rate of a split
    Audit {
        #[arg(long)]
        split: PathBuf,
        /// Comma-separated odd window sizes
        #[arg(long, default_value = "3,5,7,9")]
        windows: String,
        /// Output CSV (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Smooth a cube with a mean or Gaussian filter
    Filter {
        #[arg(long)]
        cube: PathBuf,
        /// Odd square mean-filter window
        #[arg(long, conflicts_with = "gaussian")]
        mean: Option<usize>,
        /// Gaussian sigma in pixels
        #[arg(long)]
        gaussian: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract per-pixel features to CSV
    Features {
        #[arg(long)]
        cube: PathBuf,
        /// Restrict to labeled pixels of this map (all pixels when omitted)
        #[arg(long)]
        labels: Option<PathBuf>,
        /// raw | coords | mean:<w> | gaussian:<sigma> | dwt3d | emp:<m>,<n>
        #[arg(long)]
        feature: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on a split's Train pixels and predict its Test pixels
    Classify {
        #[arg(long)]
        cube: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        feature: String,
        /// knn:<k> | svm | svm:<cost> | forest:<trees>[,<depth>]
        #[arg(long)]
        classifier: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Predictions CSV (y,x,predicted,truth)
        #[arg(long)]
        out: PathBuf,
        /// Also render a PPM map of the predictions (test pixels) over
        /// the ground truth
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Score a predictions CSV against its truth column
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        /// Class count override (defaults to the max id seen)
        #[arg(long)]
        classes: Option<u16>,
    },
    /// Run a full experiment grid from a config file
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Spectral correlation as a function of pixel lag
    Correlate {
        #[arg(long)]
        cube: PathBuf,
        /// x or y
        #[arg(long, default_value = "x")]
        axis: String,
        #[arg(long, default_value_t = 10)]
        max_lag: usize,
        /// Output CSV (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_or_print(out: Option<&PathBuf>, data: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, data).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        }),
        None => {
            print!("{data}");
            Ok(())
        }
    }
}

fn parse_odd_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidConfig(format!("bad window '{w}'")))
        })
        .collect()
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate {
            height,
            width,
            bands,
            classes,
            layout,
            separation,
            noise_sigma,
            seed,
            cube,
            labels,
        } => {
            let layout = parse_layout_arg(&layout)?;
            let config = SceneConfig {
                height,
                width,
                bands,
                classes,
                layout,
                signature_separation: separation,
                noise_sigma,
                rng_seed: seed,
            };
            let (c, l) = generate_scene(&config)?;
            write_cube(&c, &cube)?;
            write_labels(&l, &labels)?;
            eprintln!(
                "wrote {height}x{width}x{bands} cube to {} and labels to {}",
                cube.display(),
                labels.display()
            );
            Ok(())
        }
        Command::Sample {
            labels,
            strategy,
            rate,
            seed,
            out,
        } => {
            let map = read_labels(&labels)?;
            let plan = SamplingPlan {
                rate,
                seed,
                strategy: parse_strategy(&strategy)?,
            };
            let split = plan.split(&map)?;
            write_split(&split, &out)?;
            let SplitSummary {
                train_total,
                test_total,
                ..
            } = hsieval::sampling::split_summary(&split, &map)?;
            eprintln!("split: {train_total} train, {test_total} test -> {}", out.display());
            Ok(())
        }
        Command::Audit {
            split,
            windows,
            out,
        } => {
            let mask = read_split(&split)?;
            let mut csv = String::from("window,overlap_rate\n");
            for w in parse_odd_list(&windows)? {
                let rate = overlap_rate(&mask, w)?;
                csv.push_str(&format!("{w},{rate}\n"));
            }
            write_or_print(out.as_ref(), &csv)
        }
        Command::Filter {
            cube,
            mean,
            gaussian,
            out,
        } => {
            let c = read_cube(&cube)?;
            let filtered = match (mean, gaussian) {
                (Some(w), None) => mean_filter(&c, WindowSpec::square(w))?,
                (None, Some(sigma)) => gaussian_filter(&c, GaussianSpec { sigma })?,
                _ => {
                    return Err(Error::InvalidConfig(
                        "pass exactly one of --mean or --gaussian".into(),
                    ));
                }
            };
            write_cube(&filtered, &out)
        }
        Command::Features {
            cube,
            labels,
            feature,
            out,
        } => {
            let c = read_cube(&cube)?;
            let kind = FeatureKind::parse(&feature)?;
            let selection = match labels {
                Some(path) => labeled_pixels(&read_labels(&path)?),
                None => hsieval::features::all_pixels(c.height(), c.width()),
            };
            let filtered = kind.preprocess(&c)?;
            let set = kind.extract(&filtered, &selection)?;
            let mut csv = String::from("y,x");
            for d in 0..set.dim() {
                csv.push_str(&format!(",f{d}"));
            }
            csv.push('\n');
            for i in 0..set.count() {
                let (y, x) = set.coords()[i];
                csv.push_str(&format!("{y},{x}"));
                for v in set.row(i) {
                    csv.push_str(&format!(",{v}"));
                }
                csv.push('\n');
            }
            write_or_print(Some(&out), &csv)
        }
        Command::Classify {
            cube,
            labels,
            split,
            feature,
            classifier,
            seed,
            out,
            map,
        } => {
            let c = read_cube(&cube)?;
            let l = read_labels(&labels)?;
            let mask = read_split(&split)?;
            let kind = FeatureKind::parse(&feature)?;
            let clf = ClassifierKind::parse(&classifier)?;
            let filtered = kind.preprocess(&c)?;
            let all = kind.extract(&filtered, &labeled_pixels(&l))?;
            let (train_f, train_l) = all.select_by_state(&mask, &l, SplitState::Train)?;
            let (test_f, test_l) = all.select_by_state(&mask, &l, SplitState::Test)?;
            let model: TrainedModel = clf.train(&train_f, &train_l, seed)?;
            let pred = model.predict(&test_f)?;
            let mut csv = String::from("y,x,predicted,truth\n");
            for (i, &(y, x)) in test_f.coords().iter().enumerate() {
                csv.push_str(&format!("{y},{x},{},{}\n", pred[i], test_l[i]));
            }
            write_or_print(Some(&out), &csv)?;
            if let Some(path) = map {
                // ground truth everywhere, predictions over test pixels
                let mut grid = l.labels().to_vec();
                for (i, &(y, x)) in test_f.coords().iter().enumerate() {
                    grid[y * l.width() + x] = pred[i];
                }
                for warning in render_map(&grid, l.height(), l.width(), &path)? {
                    eprintln!("warning: {warning}");
                }
            }
            Ok(())
        }
        Command::Evaluate {
            predictions,
            classes,
        } => {
            let text =
                std::fs::read_to_string(&predictions).map_err(|source| Error::Io {
                    path: predictions.clone(),
                    source,
                })?;
            let mut pred = Vec::new();
            let mut truth = Vec::new();
            for (i, line) in text.lines().enumerate().skip(1) {
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() != 4 {
                    return Err(Error::Parse {
                        path: predictions.clone(),
                        message: format!("line {}: expected y,x,predicted,truth", i + 1),
                    });
                }
                let parse = |s: &str| -> Result<u16> {
                    s.trim().parse().map_err(|_| Error::Parse {
                        path: predictions.clone(),
                        message: format!("line {}: bad class id '{s}'", i + 1),
                    })
                };
                pred.push(parse(fields[2])?);
                truth.push(parse(fields[3])?);
            }
            let c = classes
                .unwrap_or_else(|| pred.iter().chain(&truth).copied().max().unwrap_or(0));
            let m = confusion(&pred, &truth, c)?;
            let (oa, aa, kappa) = oa_aa_kappa(&m)?;
            println!("oa {oa}");
            println!("aa {aa}");
            println!("kappa {kappa}");
            Ok(())
        }
        Command::Run { config } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let out = run_experiment(&cfg)?;
            let failures = out.rows.iter().filter(|r| r.outcome.is_err()).count();
            eprintln!(
                "wrote {} result rows ({failures} failed) to {}",
                out.rows.len(),
                cfg.output_dir.join("results.csv").display()
            );
            if failures > 0 {
                return Err(Error::InvalidData(format!(
                    "{failures} repetitions failed; see results.csv"
                )));
            }
            Ok(())
        }
        Command::Correlate {
            cube,
            axis,
            max_lag,
            out,
        } => {
            let c = read_cube(&cube)?;
            let axis = match axis.as_str() {
                "x" => Axis::X,
                "y" => Axis::Y,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "axis must be x or y, got '{other}'"
                    )));
                }
            };
            let curve = correlation_decay(&c, axis, max_lag)?;
            let mut csv = String::from("lag,rho\n");
            for (lag, rho) in curve.lags.iter().zip(&curve.rho) {
                match rho {
                    Some(r) => csv.push_str(&format!("{lag},{r}\n")),
                    None => csv.push_str(&format!("{lag},NA\n")),
                }
            }
            write_or_print(out.as_ref(), &csv)
        }
    }
}

fn parse_layout_arg(text: &str) -> Result<Layout> {
    let bad = || Error::InvalidConfig(format!("unknown layout '{text}'"));
    match text.split_once(':') {
        Some(("grid", a)) => Ok(Layout::GridBlocks {
            block: a.parse().map_err(|_| bad())?,
        }),
        Some(("voronoi", a)) => Ok(Layout::VoronoiBlobs {
            seeds_per_class: a.parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are successes, everything else is
            // a usage error
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
