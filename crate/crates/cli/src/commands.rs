use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::thread;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use salnet::data::{
    augment_mirror, load_dataset, read_map, split, synth_generate, write_map_png, write_map_raw, DatasetStats,
    Pipeline, Preprocessor, Sample, SaliencyMap,
};
use salnet::gradcheck::{check_network, layer_suite, network_case, render_reports, BlockReport, CheckOptions, GradReport};
use salnet::metrics::{evaluate, rank_models, ranking_table, EvalConfig};
use salnet::models::{
    import_external_weights, load_model, predict_sample, preset, render_table, save_model,
    InitScheme, NetSpec, Network, OutputKind, PostProcess, ShallowConfig, PRESET_NAMES,
};
use salnet::optim::{dataset_mse, train as run_training, IterRecord, Schedule, Stop, TrainConfig, TrainObserver};
use salnet::Error;

use crate::{EvalArgs, Failure, GradcheckArgs, Init, InspectArgs, PredictArgs, ReportFormat, SpecArgs, SynthArgs, TrainArgs};

type CmdResult = Result<(), Failure>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Lib(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn resolve_spec(args: &SpecArgs) -> Result<NetSpec, Failure> {
    if let Some(path) = &args.spec_file {
        let text = fs::read_to_string(path).map_err(|e| {
            Failure::Usage(format!("cannot read spec file {}: {e}", path.display()))
        })?;
        return Ok(NetSpec::from_text(&text)?);
    }
    let name = args.spec.as_deref().unwrap_or_default();
    preset(name).ok_or_else(|| {
        Failure::Usage(format!("unknown spec {name:?}; presets are {}", PRESET_NAMES.join(", ")))
    })
}

fn is_deep(spec: &NetSpec) -> bool {
    spec.output == OutputKind::FullResolution
}

struct Progress {
    every: usize,
}

impl TrainObserver for Progress {
    fn on_iteration(&mut self, r: &IterRecord) {
        if self.every > 0 && r.iteration % self.every == 0 {
            eprintln!("iter {:>7}  epoch {:>5}  lr {:.3e}  loss {:.6e}", r.iteration, r.epoch, r.lr, r.train_loss);
        }
    }

    fn on_validation(&mut self, iteration: usize, loss: f64) {
        if self.every > 0 {
            eprintln!("iter {iteration:>7}  validation loss {loss:.6e}");
        }
    }
}

fn train_config(args: &TrainArgs, deep: bool) -> TrainConfig {
    let mut cfg = if deep { TrainConfig::deep() } else { TrainConfig::shallow() };
    cfg.seed = args.seed;
    cfg.val_interval = args.val_interval;
    if let Some(it) = args.iters {
        cfg.stop = Stop::Iterations(it);
    }
    if let Some(e) = args.epochs {
        cfg.stop = Stop::Epochs(e as usize);
    }
    if let Some(b) = args.batch {
        cfg.batch_size = b as usize;
    }
    if let Some(lr) = args.lr {
        cfg.schedule = Schedule::Constant(lr);
    }
    if let Some(m) = args.momentum {
        cfg.sgd.momentum = m;
    }
    if let Some(wd) = args.weight_decay {
        cfg.sgd.weight_decay = wd;
    }
    if args.no_maxnorm {
        cfg.maxnorm_cap = None;
    } else if let Some(cap) = args.maxnorm {
        cfg.maxnorm_cap = Some(cap);
    }
    cfg
}

pub fn train(args: TrainArgs, verbose: u8) -> CmdResult {
    let spec = resolve_spec(&args.spec)?;
    let deep = is_deep(&spec);
    let cfg = train_config(&args, deep);
    cfg.validate()?;

    let samples = load_dataset(&args.data)?;
    if samples.is_empty() {
        return Err(Failure::Lib(Error::Data {
            id: args.data.display().to_string(),
            message: "no images".into(),
        }));
    }
    let (mut train_samples, val_samples) = if args.val_fraction > 0.0 {
        split(&samples, 1.0 - args.val_fraction, args.seed)?
    } else {
        (samples, Vec::new())
    };
    if args.mirror {
        train_samples = augment_mirror(&train_samples);
    }

    let pipeline = Pipeline::for_spec(&spec);
    let stats = DatasetStats::compute(&train_samples, pipeline)?;
    let pre = Preprocessor::new(pipeline, stats);
    let train_set = pre.examples(&train_samples)?;
    let val_set = pre.examples(&val_samples)?;

    let scheme = match args.init.unwrap_or(if deep { Init::He } else { Init::Gaussian }) {
        Init::Gaussian => InitScheme::SHALLOW,
        Init::He => InitScheme::He,
    };
    let mut init_rng = ChaCha8Rng::seed_from_u64(args.seed);
    init_rng.set_stream(2);
    let mut net = Network::new(spec, scheme, &mut init_rng)?;
    if let Some(donor) = &args.import {
        import_external_weights(&mut net, donor, &args.import_map)?;
    }

    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let start = Instant::now();
    let every = match verbose {
        0 => 0,
        1 => 100,
        _ => 1,
    };
    let history = run_training(&mut net, &train_set, &val_set, &cfg, &mut Progress { every })?;
    let elapsed = start.elapsed();

    let model_path = args.out.join("model.salnet");
    save_model(&net, &model_path)?;
    stats.save(&args.out.join("meta.txt"))?;
    let loss_path = args.out.join("loss.csv");
    fs::write(&loss_path, history.to_csv()).map_err(io_err(&loss_path))?;

    let mut summary = String::new();
    summary.push_str(&format!("spec: {}\n", net.spec().name));
    summary.push_str(&format!("train images: {}\n", train_set.len()));
    summary.push_str(&format!("validation images: {}\n", val_set.len()));
    summary.push_str(&format!("iterations: {}\n", history.iterations.len()));
    match history.final_train_loss() {
        Some(l) => summary.push_str(&format!("final batch loss: {l:e}\n")),
        None => summary.push_str("final batch loss: -\n"),
    }
    summary.push_str(&format!("train mse: {:e}\n", dataset_mse(&net, &train_set)?));
    if let Some(&(_, v)) = history.validation.last() {
        summary.push_str(&format!("last validation loss: {v:e}\n"));
    }
    summary.push_str(&format!("model: {}\n", model_path.display()));
    let summary_path = args.out.join("summary.txt");
    fs::write(&summary_path, &summary).map_err(io_err(&summary_path))?;
    print!("{summary}");
    if verbose > 0 {
        eprintln!("trained in {:.1} s", elapsed.as_secs_f64());
    }
    Ok(())
}

fn predict_all(
    net: &Network<f32>,
    pre: &Preprocessor,
    samples: &[Sample],
    post: PostProcess,
    threads: usize,
) -> salnet::Result<Vec<SaliencyMap>> {
    if threads <= 1 || samples.len() <= 1 {
        return samples.iter().map(|s| predict_sample(net, pre, s, post)).collect();
    }
    let chunk = samples.len().div_ceil(threads);
    thread::scope(|scope| {
        let handles: Vec<_> = samples
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|s| predict_sample(net, pre, s, post))
                        .collect::<salnet::Result<Vec<_>>>()
                })
            })
            .collect();
        let mut out = Vec::with_capacity(samples.len());
        for h in handles {
            out.extend(h.join().expect("prediction worker panicked")?);
        }
        Ok(out)
    })
}

pub fn predict(args: PredictArgs, verbose: u8) -> CmdResult {
    let net = load_model(&args.model)?;
    let meta = args
        .meta
        .clone()
        .unwrap_or_else(|| args.model.parent().unwrap_or(Path::new(".")).join("meta.txt"));
    let stats = DatasetStats::load(&meta)?;
    let pre = Preprocessor::for_spec(net.spec(), stats);
    let post = match args.sigma {
        Some(sigma) => PostProcess { sigma },
        None => PostProcess::for_output(net.spec().output),
    };
    let samples = load_dataset(&args.data)?;
    let maps = predict_all(&net, &pre, &samples, post, args.threads as usize)?;

    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    for (s, m) in samples.iter().zip(&maps) {
        write_map_png(m, &args.out.join(format!("{}.png", s.id)))?;
        if args.raw {
            write_map_raw(m, &args.out.join(format!("{}.f32", s.id)))?;
        }
        if verbose > 0 {
            eprintln!("{}: {}x{}", s.id, m.width(), m.height());
        }
    }
    println!("wrote {} maps to {}", maps.len(), args.out.display());
    Ok(())
}

fn load_predictions(dir: &Path, samples: &[Sample]) -> Result<Vec<SaliencyMap>, Failure> {
    if !dir.is_dir() {
        return Err(io_err(dir)(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            "missing prediction directory",
        )));
    }
    samples
        .iter()
        .map(|s| {
            let path = dir.join(format!("{}.png", s.id));
            if !path.is_file() {
                return Err(io_err(&path)(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    "missing prediction",
                )));
            }
            Ok(read_map(&path)?)
        })
        .collect()
}

fn label_for(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

pub fn eval(args: EvalArgs) -> CmdResult {
    if !args.name.is_empty() && args.name.len() != args.pred.len() {
        return Err(Failure::Usage(format!(
            "{} --name values for {} --pred directories",
            args.name.len(),
            args.pred.len()
        )));
    }
    let samples = load_dataset(&args.data)?;
    let cfg = EvalConfig {
        n_splits: args.splits as usize,
        sigma_fix: args.sigma_fix,
        seed: args.seed,
    };
    let mut reports = Vec::with_capacity(args.pred.len());
    for (i, dir) in args.pred.iter().enumerate() {
        let name = args.name.get(i).cloned().unwrap_or_else(|| label_for(dir));
        let preds = load_predictions(dir, &samples)?;
        reports.push(evaluate(&name, &samples, &preds, &cfg)?);
    }

    let mut text = String::new();
    for r in &reports {
        match args.format {
            ReportFormat::Table => text.push_str(&r.to_table()),
            ReportFormat::Csv => {
                if reports.len() > 1 {
                    text.push_str(&format!("# model: {}\n", r.model));
                }
                text.push_str(&r.to_csv());
            }
        }
    }
    if reports.len() > 1 {
        rank_models(&mut reports);
        text.push('\n');
        text.push_str(&ranking_table(&reports));
    }
    match &args.out {
        Some(path) => fs::write(path, text).map_err(io_err(path))?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn inspect(args: InspectArgs) -> CmdResult {
    let spec = resolve_spec(&args.spec)?;
    let mut input = spec.input_dims();
    if let (Some(h), Some(w)) = (args.height, args.width) {
        input[1] = h as usize;
        input[2] = w as usize;
    }
    print!("{}", render_table(&spec, input)?);
    Ok(())
}

/// Folds reports with the same label into one, keeping the worst block.
fn merge_reports(reports: Vec<GradReport>) -> Vec<GradReport> {
    let mut order: Vec<String> = Vec::new();
    let mut merged: BTreeMap<String, Vec<BlockReport>> = BTreeMap::new();
    for r in reports {
        let blocks = merged.entry(r.label.clone()).or_insert_with(|| {
            order.push(r.label.clone());
            Vec::new()
        });
        for b in r.blocks {
            match blocks.iter_mut().find(|m| m.name == b.name) {
                Some(m) => {
                    m.checked += b.checked;
                    m.skipped += b.skipped;
                    if b.max_rel_error > m.max_rel_error {
                        m.max_rel_error = b.max_rel_error;
                        m.worst = b.worst;
                    }
                }
                None => blocks.push(b),
            }
        }
    }
    order
        .into_iter()
        .map(|label| GradReport {
            blocks: merged.remove(&label).unwrap_or_default(),
            label,
        })
        .collect()
}

pub fn gradcheck(args: GradcheckArgs, verbose: u8) -> CmdResult {
    let start = Instant::now();
    let mut layer_reports = Vec::new();
    let mut net_reports = Vec::new();
    for i in 0..args.seeds {
        let seed = args.seed.wrapping_add(i);
        layer_reports.extend(layer_suite(seed, args.epsilon)?);
        let (net, x, t) = network_case(ShallowConfig::shrunken().build(), seed)?;
        let opts = CheckOptions {
            epsilon: args.epsilon,
            max_coords: Some(args.net_coords as usize),
            seed,
        };
        net_reports.push(check_network(&net, &x, &t, &opts)?);
        if verbose > 0 {
            eprintln!("seed {seed} done");
        }
    }
    let layers = merge_reports(layer_reports);
    let nets = merge_reports(net_reports);
    println!("layers ({} seeds, tolerance {:e})", args.seeds, args.tol);
    print!("{}", render_reports(&layers, args.tol));
    println!();
    println!("network ({} seeds, tolerance {:e})", args.seeds, args.net_tol);
    print!("{}", render_reports(&nets, args.net_tol));
    if verbose > 0 {
        eprintln!("checked in {:.1} s", start.elapsed().as_secs_f64());
    }
    let failed: Vec<String> = layers
        .iter()
        .filter(|r| !r.passes(args.tol))
        .chain(nets.iter().filter(|r| !r.passes(args.net_tol)))
        .map(|r| r.label.clone())
        .collect();
    if failed.is_empty() {
        println!("all checks passed");
        Ok(())
    } else {
        Err(Failure::GradientCheck(format!("gradient check failed: {}", failed.join(", "))))
    }
}

pub fn synth(args: SynthArgs) -> CmdResult {
    let samples = synth_generate(args.n as usize, args.side as usize, args.seed, &args.out)?;
    let fixations: usize = samples.iter().filter_map(|s| s.fixations.as_ref()).map(|f| f.len()).sum();
    println!(
        "wrote {} images of {}x{} ({} fixations) to {}",
        samples.len(),
        args.side,
        args.side,
        fixations,
        args.out.display()
    );
    Ok(())
}
