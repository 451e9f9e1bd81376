use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use log::info;

use pftrack::image::{save_ppm, RegionRect};
use pftrack::sequence::{
    bench_histograms, evaluate, evaluate_sequence, generate_synthetic, load_sequence, overlay, parse_ground_truth,
    read_results_csv, track_sequence, write_bench_csv, write_eval_csv, write_results_csv, BenchSpec, EvalReport,
    SequenceError, SynthSpec,
};
use pftrack::tracker::TrackerConfig;
use pftrack::ungm::{run_comparison, write_runs_csv, write_trace_csv, UngmParams};

#[derive(Parser)]
#[command(name = "pftrack", version, about = "Particle-filter face tracking toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Paired TRPF/IRPF runs on the nonstationary growth model.
    UngmBench {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[arg(long, default_value_t = 100)]
        particles: usize,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Writes a synthetic sequence with exact ground truth.
    Synth {
        #[arg(long, value_enum, default_value_t = SynthKind::Occlusion)]
        kind: SynthKind,
        /// JSON sequence description; overrides --kind.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tracks the target through a sequence directory.
    Track {
        /// Directory holding img/ and optionally groundtruth_rect.txt.
        sequence: PathBuf,
        /// Tracker configuration JSON; omitted fields keep their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Initial window as x,y,w,h; defaults to the first ground-truth rectangle.
        #[arg(long, value_parser = parse_rect)]
        init: Option<RegionRect>,
        /// Color likelihood only, with fixed fusion weights.
        #[arg(long)]
        color_only: bool,
        /// Kernel-weighted histograms per particle instead of integral-histogram queries.
        #[arg(long)]
        exact_histograms: bool,
        /// Overrides the seed in the configuration.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also write each frame with the estimated window drawn in.
        #[arg(long)]
        overlays: bool,
        /// Worker threads for likelihood evaluation.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Times naive region histograms against integral-histogram queries.
    BenchHist {
        #[arg(long, default_value_t = 480)]
        width: usize,
        #[arg(long, default_value_t = 360)]
        height: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [20, 50, 100, 200, 500])]
        particles: Vec<usize>,
        /// Region size as WxH.
        #[arg(long, default_value = "64x80", value_parser = parse_size)]
        region: (usize, usize),
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Scores a results.csv against ground truth.
    Eval {
        #[arg(long)]
        results: PathBuf,
        /// Sequence directory or ground-truth file.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Plain,
    Occlusion,
    Illumination,
}

fn parse_rect(s: &str) -> Result<RegionRect, String> {
    let v: Vec<i64> = s
        .split(',')
        .map(|f| f.trim().parse::<i64>().map_err(|e| format!("{f:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, w, h] if w > 0 && h > 0 => Ok(RegionRect::new(x, y, w, h)),
        [_, _, _, _] => Err("width and height must be positive".into()),
        _ => Err("expected x,y,w,h".into()),
    }
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once('x').ok_or("expected WxH")?;
    let w = w.parse().map_err(|e| format!("{e}"))?;
    let h = h.parse().map_err(|e| format!("{e}"))?;
    Ok((w, h))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<fs::File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn print_eval(report: &EvalReport) {
    println!(
        "mean CLE {:.3} px, RMSE {:.3} px, success {:.1}%",
        report.mean_cle,
        report.rmse,
        100.0 * report.success_rate
    );
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::UngmBench {
            seed,
            runs,
            particles,
            steps,
            out,
        } => {
            let params = UngmParams {
                seed,
                runs,
                particle_count: particles,
                steps,
                ..UngmParams::default()
            };
            let results = run_comparison(&params)?;
            write_runs_csv(create(&out, "ungm_runs.csv")?, &results)?;
            if let Some(first) = results.first() {
                write_trace_csv(create(&out, "ungm_trace.csv")?, first)?;
            }
            let n = results.len().max(1) as f64;
            let trpf = results.iter().map(|r| r.rmse_trpf).sum::<f64>() / n;
            let irpf = results.iter().map(|r| r.rmse_irpf).sum::<f64>() / n;
            let wins = results.iter().filter(|r| r.rmse_irpf < r.rmse_trpf).count();
            println!("mean RMSE TRPF {trpf:.4}, IRPF {irpf:.4}; IRPF better in {wins}/{} runs", results.len());
        }
        Command::Synth {
            kind,
            spec,
            seed,
            frames,
            out,
        } => {
            let mut spec = match spec {
                Some(path) => {
                    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
                }
                None => match kind {
                    SynthKind::Plain => SynthSpec {
                        seed,
                        ..SynthSpec::default()
                    },
                    SynthKind::Occlusion => SynthSpec::occlusion(seed),
                    SynthKind::Illumination => SynthSpec::illumination(seed),
                },
            };
            if let Some(n) = frames {
                spec.frame_count = n;
            }
            let seq = generate_synthetic(&spec, &out)?;
            println!("wrote {} frames to {}", seq.len(), out.display());
        }
        Command::Track {
            sequence,
            config,
            init,
            color_only,
            exact_histograms,
            seed,
            out,
            overlays,
            threads,
        } => {
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
            }
            let mut cfg = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    TrackerConfig::from_json(&text).with_context(|| format!("in {}", path.display()))?
                }
                None => TrackerConfig::default(),
            };
            if color_only {
                cfg = cfg.color_only();
            }
            if exact_histograms {
                cfg.fast_histogram = false;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let seq = load_sequence(&sequence)?;
            let overlay_dir = out.join("overlays");
            if overlays {
                fs::create_dir_all(&overlay_dir).with_context(|| format!("creating {}", overlay_dir.display()))?;
            }
            let started = Instant::now();
            let results = track_sequence(&seq, &cfg, init, |frame, result| {
                if overlays {
                    let path = overlay_dir.join(format!("{:04}.ppm", result.frame + 1));
                    save_ppm(&overlay(frame, result), &path)?;
                }
                Ok(())
            });
            let results = match results {
                Err(SequenceError::MissingInit) => {
                    eprintln!("error: {}", SequenceError::MissingInit);
                    eprintln!("{}", Cli::command().render_usage());
                    std::process::exit(2);
                }
                other => other?,
            };
            let elapsed = started.elapsed().as_secs_f64();
            info!("tracked {} frames in {elapsed:.3} s", results.len());
            write_results_csv(create(&out, "results.csv")?, &results)?;
            if seq.ground_truth.is_some() {
                let mut report = evaluate_sequence(&results, &seq)?;
                report.runtime_seconds = Some(elapsed);
                write_eval_csv(create(&out, "eval.csv")?, &report)?;
                print_eval(&report);
            }
        }
        Command::BenchHist {
            width,
            height,
            particles,
            region,
            reps,
            seed,
            out,
        } => {
            let spec = BenchSpec {
                width,
                height,
                particle_counts: particles,
                region,
                repetitions: reps,
                seed,
            };
            let rows = bench_histograms(&spec)?;
            write_bench_csv(create(&out, "bench_hist.csv")?, &rows)?;
            println!("particles  naive_s  build_s  query_s  integral_total_s");
            for r in &rows {
                println!(
                    "{:9}  {:.5}  {:.5}  {:.5}  {:.5}",
                    r.particles, r.naive_s, r.integral_build_s, r.integral_query_s, r.integral_total_s
                );
            }
        }
        Command::Eval { results, truth, out } => {
            let file = fs::File::open(&results).with_context(|| format!("opening {}", results.display()))?;
            let rows = read_results_csv(file)?;
            let rects = if truth.is_dir() {
                load_sequence(&truth)?.ground_truth.ok_or(SequenceError::NoGroundTruth)?
            } else {
                let text = fs::read_to_string(&truth).with_context(|| format!("reading {}", truth.display()))?;
                parse_ground_truth(&text)?
            };
            if rows.iter().enumerate().any(|(i, r)| r.frame != i) {
                bail!("{} does not list frames 0..{} in order", results.display(), rows.len());
            }
            let centers: Vec<(f64, f64)> = rows.iter().map(|r| (r.cx, r.cy)).collect();
            let report = evaluate(&centers, &rects)?;
            write_eval_csv(create(&out, "eval.csv")?, &report)?;
            print_eval(&report);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PFTRACK_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
