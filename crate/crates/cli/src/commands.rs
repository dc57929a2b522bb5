use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::error::ErrorKind;
use clap::CommandFactory;
use socnav_gnn::analysis::{self, duplicate_sets, human_baseline_mse, kappa_matrix, read_ratings};
use socnav_gnn::graph::SocialGraph;
use socnav_gnn::heatmap::{self, Question, RenderOptions, SweepSpec};
use socnav_gnn::scene::{
    self, convert_legacy, generate_random_scenario, read_scenario, validate_scenario, write_scenario, Augmentation,
    RoomKind, Scenario,
};
use socnav_gnn::training::{
    build_dataset, evaluate, load_scenarios, predictions, sample_hyperparams, split_by_base, train, Checkpoint,
    Dataset, DatasetSplits, HyperParams, Split, TrainingLog,
};

use crate::{Cli, Command, Global, QuestionArg, SplitArg};

pub enum Failure {
    Usage(clap::Error),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn usage(kind: ErrorKind, msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(Cli::command().error(kind, msg))
}

fn required<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| usage(ErrorKind::MissingRequiredArgument, format!("this command needs {flag}")))
}

fn check_spacing(spacing: f64) -> Result<()> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(usage(ErrorKind::InvalidValue, "--spacing must be positive"));
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let g = cli.global;
    match cli.command {
        Command::Validate { paths } => validate(&paths),
        Command::Augment { scenario, out_dir } => augment(&scenario, &out_dir),
        Command::Transform { scenario, out, spacing } => {
            check_spacing(spacing)?;
            let s = read_scenario(&scenario)?;
            let graph = SocialGraph::from_scenario(&s, spacing)?;
            fs::write(&out, graph.dump()).with_context(|| format!("writing {}", out.display()))?;
            Ok(())
        }
        Command::Convert { input_dir, out_dir } => convert(&input_dir, &out_dir),
        Command::Generate {
            out_dir,
            count,
            max_humans,
            max_objects,
        } => generate(&g, &out_dir, count, max_humans, max_objects),
        Command::Split { dev, test, out } => {
            let data_dir = required(&g.data_dir, "--data-dir")?;
            let ids: Vec<String> = load_scenarios(data_dir)?.into_iter().map(|s| s.id).collect();
            let splits = split_by_base(&ids, dev, test, g.seed.unwrap_or(0))?;
            splits.write(&out)?;
            println!(
                "train={} dev={} test={} sha256={}",
                splits.train.len(),
                splits.dev.len(),
                splits.test.len(),
                splits.sha256()
            );
            Ok(())
        }
        Command::Train {
            out,
            log,
            augment,
            search,
            max_epochs,
            spacing,
        } => {
            check_spacing(spacing)?;
            train_command(&g, &out, log.as_deref(), augment, search, max_epochs, spacing)
        }
        Command::Eval {
            checkpoint,
            split,
            spacing,
        } => {
            check_spacing(spacing)?;
            let ckpt = Checkpoint::load(&checkpoint)?;
            let (data, splits) = load_split_data(&g, &ckpt, spacing)?;
            let graphs = data.split(&splits, split_of(split))?;
            let mse = evaluate(&ckpt.model, &graphs, ckpt.hyperparams.batch_size)?;
            println!("{}_mse={mse}", split_of(split).name());
            Ok(())
        }
        Command::Histogram {
            checkpoint,
            split,
            question,
            bins,
            out,
            spacing,
        } => {
            check_spacing(spacing)?;
            if bins == 0 {
                return Err(usage(ErrorKind::InvalidValue, "--bins must be at least 1"));
            }
            let ckpt = Checkpoint::load(&checkpoint)?;
            let (data, splits) = load_split_data(&g, &ckpt, spacing)?;
            let graphs = data.split(&splits, split_of(split))?;
            let preds = predictions(&ckpt.model, &graphs, ckpt.hyperparams.batch_size)?;
            let columns: &[usize] = match question {
                QuestionArg::Q1 => &[0],
                QuestionArg::Q2 => &[1],
                QuestionArg::Both => &[0, 1],
            };
            let (mut p, mut l) = (Vec::new(), Vec::new());
            for (pred, graph) in preds.iter().zip(&graphs) {
                for &c in columns {
                    p.push(pred[c]);
                    l.push(graph.labels[c]);
                }
            }
            let hist = analysis::error_histogram(&p, &l, bins)?;
            hist.write_csv(BufWriter::new(fs::File::create(&out)?))?;
            println!("samples={} bins={bins}", hist.total);
            Ok(())
        }
        Command::Kappa { ratings, question } => kappa(&ratings, question),
        Command::Heatmap {
            checkpoint,
            scenario,
            question,
            res,
            out,
            adv,
            rot,
            heading,
            pixels_per_cell,
            spacing,
        } => {
            let question = match question {
                QuestionArg::Q1 => Question::Q1,
                QuestionArg::Q2 => Question::Q2,
                QuestionArg::Both => return Err(usage(ErrorKind::InvalidValue, "heatmap scores one question")),
            };
            let spec = SweepSpec {
                question,
                action: scene::Command { adv, rot },
                resolution: res,
                heading,
                spacing_s: spacing,
            };
            if let Err(e) = spec.validate() {
                return Err(usage(ErrorKind::InvalidValue, e));
            }
            let ckpt = Checkpoint::load(&checkpoint)?;
            let s = read_scenario(&scenario)?;
            let grid = heatmap::sweep(&ckpt.model, &s, &spec)?;
            let snap = s.snapshots.last().expect("swept scenarios have snapshots");
            let img = heatmap::render(&grid, snap, RenderOptions { pixels_per_cell });
            heatmap::save_image(&img, &out)?;
            let csv = heatmap::sidecar_csv(&out);
            grid.write_csv(BufWriter::new(fs::File::create(&csv)?))?;
            println!(
                "grid={}x{} cells={} image={} csv={}",
                grid.layout.rows,
                grid.layout.cols,
                grid.scores().count(),
                out.display(),
                csv.display()
            );
            Ok(())
        }
    }
}

fn split_of(s: SplitArg) -> Split {
    match s {
        SplitArg::Train => Split::Train,
        SplitArg::Dev => Split::Dev,
        SplitArg::Test => Split::Test,
    }
}

fn validate(paths: &[PathBuf]) -> Result<()> {
    let mut failed = 0;
    for p in paths {
        match read_scenario(p) {
            Ok(s) => {
                let violations = validate_scenario(&s);
                if violations.is_empty() {
                    println!("OK {}", p.display());
                } else {
                    failed += 1;
                    println!("INVALID {}", p.display());
                    for v in violations {
                        println!("  {v}");
                    }
                }
            }
            Err(e) => {
                failed += 1;
                println!("INVALID {}", p.display());
                println!("  {e}");
            }
        }
    }
    if failed > 0 {
        return Err(anyhow!("{failed} of {} scenarios failed validation", paths.len()).into());
    }
    Ok(())
}

fn write_into(dir: &Path, s: &Scenario) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.json", s.id));
    write_scenario(&path, s)?;
    Ok(path)
}

fn augment(scenario: &Path, out_dir: &Path) -> Result<()> {
    let s = read_scenario(scenario)?;
    let violations = validate_scenario(&s);
    if !violations.is_empty() {
        return Err(anyhow!("{}: {}", scenario.display(), scene::ScenarioError::Semantic(violations)).into());
    }
    for aug in &Augmentation::ALL[1..] {
        println!("{}", write_into(out_dir, &aug.apply(&s))?.display());
    }
    Ok(())
}

fn convert(input_dir: &Path, out_dir: &Path) -> Result<()> {
    let mut paths: Vec<PathBuf> = fs::read_dir(input_dir)
        .with_context(|| format!("reading {}", input_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    for p in &paths {
        let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        let raw = fs::read(p)?;
        let s = convert_legacy(&raw, id).with_context(|| format!("converting {}", p.display()))?;
        write_into(out_dir, &s)?;
    }
    println!("converted={}", paths.len());
    Ok(())
}

fn generate(g: &Global, out_dir: &Path, count: usize, max_humans: usize, max_objects: usize) -> Result<()> {
    let base = g.seed.unwrap_or(0);
    for i in 0..count as u64 {
        let seed = base.wrapping_add(i);
        let kind = if seed % 3 == 2 { RoomKind::LShaped } else { RoomKind::Rectangular };
        let humans = (seed as usize).wrapping_mul(7) % (max_humans + 1);
        let objects = (seed as usize).wrapping_mul(5) % (max_objects + 1);
        write_into(out_dir, &generate_random_scenario(seed, humans, objects, kind))?;
    }
    println!("generated={count}");
    Ok(())
}

fn load_hyperparams(g: &Global) -> Result<HyperParams> {
    let mut hp = match &g.config {
        Some(p) => {
            let raw = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&raw).with_context(|| format!("parsing {}", p.display()))?
        }
        None => HyperParams::reference(),
    };
    if let Some(seed) = g.seed {
        hp.rng_seed = seed;
    }
    Ok(hp)
}

fn load_split_data(g: &Global, ckpt: &Checkpoint, spacing: f64) -> Result<(Dataset, DatasetSplits)> {
    let data_dir = required(&g.data_dir, "--data-dir")?;
    let manifest = required(&g.manifest, "--manifest")?;
    let splits = DatasetSplits::read(manifest)?;
    if !ckpt.manifest_sha256.is_empty() && ckpt.manifest_sha256 != splits.sha256() {
        eprintln!("warning: the checkpoint was trained with a different split manifest");
    }
    let data = Dataset::new(build_dataset(&load_scenarios(data_dir)?, false, spacing)?);
    Ok((data, splits))
}

fn train_command(
    g: &Global,
    out: &Path,
    log: Option<&Path>,
    augment: bool,
    search: Option<usize>,
    max_epochs: Option<usize>,
    spacing: f64,
) -> Result<()> {
    let data_dir = required(&g.data_dir, "--data-dir")?;
    let manifest = required(&g.manifest, "--manifest")?;
    let splits = DatasetSplits::read(manifest)?;
    let scenarios = load_scenarios(data_dir)?;
    let plain = Dataset::new(build_dataset(&scenarios, false, spacing)?);
    let train_data = if augment {
        Dataset::new(build_dataset(&scenarios, true, spacing)?)
    } else {
        plain.clone()
    };
    let train_set = train_data.split(&splits, Split::Train)?;
    let dev_set = plain.split(&splits, Split::Dev)?;

    let configs: Vec<HyperParams> = match search {
        Some(0) => return Err(usage(ErrorKind::InvalidValue, "--search must be at least 1")),
        Some(n) => {
            let base = g.seed.unwrap_or(0);
            (0..n as u64).map(|i| sample_hyperparams(base.wrapping_add(i))).collect()
        }
        None => vec![load_hyperparams(g)?],
    };
    let sha = splits.sha256();
    let mut best: Option<Checkpoint> = None;
    for (trial, mut hp) in configs.into_iter().enumerate() {
        if let Some(m) = max_epochs {
            hp.max_epochs = m;
        }
        let mut logger = match log {
            Some(p) if search.is_some() => {
                let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("train");
                Some(TrainingLog::create(p.with_file_name(format!("{stem}-trial{trial}.csv")))?)
            }
            Some(p) => Some(TrainingLog::create(p)?),
            None => None,
        };
        let ckpt = train(&hp, &train_set, &dev_set, &sha, &mut |r| {
            eprintln!(
                "trial {trial} epoch {} train_mse={:.6} dev_mse={:.6}",
                r.epoch, r.train_mse, r.dev_mse
            );
            if let Some(l) = logger.as_mut() {
                l.record(r)?;
            }
            Ok(())
        })?;
        let dev = ckpt.history.as_ref().map_or(f64::INFINITY, |h| h.best_dev_mse);
        println!("trial={trial} block={} best_dev_mse={dev}", hp.block_kind.name());
        let better = best
            .as_ref()
            .and_then(|b| b.history.as_ref())
            .is_none_or(|h| dev < h.best_dev_mse);
        if better {
            best = Some(ckpt);
        }
    }
    let best = best.expect("at least one configuration is trained");
    best.save(out).with_context(|| format!("writing {}", out.display()))?;
    let h = best.history.as_ref().expect("trained checkpoints carry a history");
    println!("best_epoch={} dev_mse={} checkpoint={}", h.best_epoch, h.best_dev_mse, out.display());
    Ok(())
}

fn kappa(ratings: &Path, question: QuestionArg) -> Result<()> {
    let file = fs::File::open(ratings).with_context(|| format!("opening {}", ratings.display()))?;
    let records = read_ratings(file)?;
    let questions: &[&str] = match question {
        QuestionArg::Q1 => &["q1"],
        QuestionArg::Q2 => &["q2"],
        QuestionArg::Both => &["q1", "q2"],
    };
    for q in questions {
        let m = kappa_matrix(&records, q);
        if m.raters.is_empty() {
            return Err(anyhow!("no {q} ratings in {}", ratings.display()).into());
        }
        println!("{q} weighted kappa (diagonal: intra-rater)");
        println!("rater,{}", m.raters.join(","));
        for (name, row) in m.raters.iter().zip(&m.values) {
            let cells: Vec<String> = row
                .iter()
                .map(|v| match v {
                    Ok(k) => format!("{k:.4}"),
                    Err(analysis::AnalysisError::Degenerate) => "DEGENERATE".into(),
                    Err(_) => "NA".into(),
                })
                .collect();
            println!("{name},{}", cells.join(","));
        }
        let sets = duplicate_sets(&records, q);
        if !sets.is_empty() {
            let b = human_baseline_mse(&sets)?;
            for (rater, mse) in &b.per_rater {
                println!("{q} baseline_mse {rater}={mse:.6}");
            }
            println!("{q} baseline_mse average={:.6}", b.average);
        }
    }
    Ok(())
}
