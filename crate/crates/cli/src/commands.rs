use std::fmt::Display;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sadl::classifier::predict_all;
use sadl::data::{load_dataset, save_dataset, save_dataset_binary, split};
use sadl::structure::build_targets;
use sadl::{evaluate, Dataset, Mode, Model, RidgeClassifier, Scorer, Split, SynthSpec, TrainConfig};

use crate::{BenchArgs, EvalArgs, ModeArg, PredictArgs, SynthArgs, TrainArgs};

pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Display) -> Self {
        Failure {
            code: 1,
            message: message.to_string(),
        }
    }

    fn data(message: impl Display) -> Self {
        Failure {
            code: 2,
            message: message.to_string(),
        }
    }

    fn in_file(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

impl From<sadl::Error> for Failure {
    fn from(e: sadl::Error) -> Self {
        let code = if e.is_numerical() {
            3
        } else if e.is_config() {
            1
        } else {
            2
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::data(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::data(e)
    }
}

type Outcome = Result<(), Failure>;

fn require_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::data(format!("file not found: {}", path.display())))
    }
}

fn read_dataset(path: &Path) -> Result<Dataset, Failure> {
    require_file(path)?;
    load_dataset(path).map_err(|e| Failure::from(e).in_file(path))
}

fn read_model(path: &Path) -> Result<Model, Failure> {
    require_file(path)?;
    Model::load(path).map_err(|e| Failure::from(e).in_file(path))
}

fn read_config(path: Option<&Path>) -> Result<TrainConfig, Failure> {
    match path {
        None => Ok(TrainConfig::default()),
        Some(p) => {
            if !p.is_file() {
                return Err(Failure::usage(format!("config file not found: {}", p.display())));
            }
            TrainConfig::load(p).map_err(|e| Failure::from(e).in_file(p))
        }
    }
}

fn check_input_dim(model: &Model, data: &Dataset) -> Result<(), Failure> {
    if model.input_dim() != data.dim() {
        return Err(Failure::data(format!(
            "model expects {}-dimensional samples, dataset has {}",
            model.input_dim(),
            data.dim()
        )));
    }
    Ok(())
}

fn method_label(model: &Model) -> &'static str {
    let is_identity = |m: &nalgebra::DMatrix<f64>| m.is_square() && m == &nalgebra::DMatrix::identity(m.nrows(), m.ncols());
    if is_identity(model.omega()) && is_identity(model.q()) {
        "Ridge"
    } else {
        match model.config().mode {
            Mode::Sadl => "SADL",
            Mode::PlainAdl => "ADL",
        }
    }
}

/// Either a trained model or the packed ridge baseline, plus training time.
struct Fitted {
    model: Model,
    state: Option<sadl::TrainState>,
    seconds: f64,
}

fn fit(data: &Dataset, cfg: &TrainConfig, mode: ModeArg) -> Result<Fitted, Failure> {
    let start = Instant::now();
    if mode == ModeArg::Ridge {
        let model = RidgeClassifier::fit(data, cfg.ridge_gamma)?.to_model()?;
        return Ok(Fitted {
            model,
            state: None,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let mut cfg = cfg.clone();
    cfg.mode = match mode {
        ModeArg::PlainAdl => Mode::PlainAdl,
        _ => Mode::Sadl,
    };
    let targets = build_targets(data, cfg.block_rows)?;
    let (model, state) = sadl::train(data, &targets, &cfg)?;
    Ok(Fitted {
        model,
        state: Some(state),
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn resolve_mode(arg: Option<ModeArg>, cfg: &TrainConfig) -> ModeArg {
    arg.unwrap_or(match cfg.mode {
        Mode::Sadl => ModeArg::Sadl,
        Mode::PlainAdl => ModeArg::PlainAdl,
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

pub fn train(args: TrainArgs) -> Outcome {
    let mut cfg = read_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let mode = resolve_mode(args.mode, &cfg);
    let data = read_dataset(&args.data)?;
    let fitted = fit(&data, &cfg, mode)?;
    fitted.model.save(&args.model)?;

    println!("samples        {}", data.len());
    println!("classes        {}", data.classes());
    if let Some(state) = &fitted.state {
        let trace_path = args.out.unwrap_or_else(|| with_suffix(&args.model, ".trace.csv"));
        state.save_trace_csv(&trace_path)?;
        let last = state.trace.last().expect("at least one iteration");
        println!("atoms          {}", fitted.model.atoms());
        println!("iterations     {} (converged: {})", state.iterations, state.converged);
        println!("objective      {:.6e}", last.objective);
        println!("‖H − QU‖_F     {:.6e}", last.residual_h);
        println!("‖L − WQU‖_F    {:.6e}", last.residual_l);
        println!("trace          {}", trace_path.display());
    } else {
        println!("ridge gamma    {}", cfg.ridge_gamma);
    }
    println!("wall time      {:.3} s", fitted.seconds);
    println!("model          {}", args.model.display());
    Ok(())
}

pub fn predict(args: PredictArgs) -> Outcome {
    let model = read_model(&args.model)?;
    let data = read_dataset(&args.data)?;
    check_input_dim(&model, &data)?;
    let preds = if args.chained {
        predict_all(&model, &data)?
    } else {
        predict_all(&Scorer::from(&model), &data)?
    };
    match args.out {
        Some(path) => {
            let mut wtr = csv::Writer::from_path(path)?;
            wtr.write_record(["index", "predicted", "label"])?;
            for (i, (p, l)) in preds.iter().zip(data.labels()).enumerate() {
                wtr.write_record([i.to_string(), p.to_string(), l.to_string()])?;
            }
            wtr.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            for p in preds {
                writeln!(out, "{p}")?;
            }
        }
    }
    Ok(())
}

pub fn eval(args: EvalArgs) -> Outcome {
    if args.reps == 0 {
        return Err(Failure::usage("--reps must be at least 1"));
    }
    let model = read_model(&args.model)?;
    let data = read_dataset(&args.data)?;
    check_input_dim(&model, &data)?;
    if data.classes() > model.classes() {
        return Err(Failure::data(format!(
            "dataset has {} classes, model predicts {}",
            data.classes(),
            model.classes()
        )));
    }
    let report = evaluate(&Scorer::from(&model), &data, args.reps)?;
    print!("{}", report.to_table(method_label(&model)));
    println!();
    println!("Accuracy {:.2}%", 100.0 * report.accuracy);
    println!();
    print!("{}", report.confusion_table());
    if let Some(path) = args.out {
        report.write_csv(BufWriter::new(File::create(path)?))?;
    }
    Ok(())
}

pub fn synth(args: SynthArgs) -> Outcome {
    let spec = SynthSpec {
        classes: args.classes,
        subspace_dim: args.subspace_dim,
        ambient_dim: args.dim,
        per_class_train: args.train_per_class,
        per_class_test: args.test_per_class,
        noise_sigma: args.noise,
        seed: args.seed,
        mean_offset: args.offset,
    };
    spec.validate().map_err(Failure::usage)?;
    let (train, test) = sadl::generate_synthetic(&spec)?;
    let ext = if args.binary { ".bin" } else { ".txt" };
    for (part, data) in [("_train", &train), ("_test", &test)] {
        let path = with_suffix(&args.out, &format!("{part}{ext}"));
        if args.binary {
            save_dataset_binary(data, &path)?;
        } else {
            save_dataset(data, &path)?;
        }
        println!("{} samples -> {}", data.len(), path.display());
    }
    Ok(())
}

struct BenchRow {
    size: usize,
    realization: usize,
    accuracy: f64,
    train_s: f64,
    test_s_per_sample: f64,
}

fn bench_run(
    pool: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainConfig,
    mode: ModeArg,
    args: &BenchArgs,
    size: usize,
    realization: usize,
) -> Result<BenchRow, Failure> {
    let seed = cfg.seed.wrapping_add(realization as u64);
    let owned;
    let (train, test) = match test {
        Some(t) => (pool, t),
        None => {
            owned = split(pool, Split::Fraction(args.train_fraction), seed)?;
            (&owned.0, &owned.1)
        }
    };
    let cfg = TrainConfig {
        dict_size: size,
        seed,
        parallel: false,
        ..cfg.clone()
    };
    let fitted = fit(train, &cfg, mode)?;
    let report = evaluate(&Scorer::from(&fitted.model), test, args.reps)?;
    Ok(BenchRow {
        size,
        realization,
        accuracy: report.accuracy,
        train_s: fitted.seconds,
        test_s_per_sample: report.test_seconds_per_sample,
    })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn bench(args: BenchArgs) -> Outcome {
    if args.realizations == 0 {
        return Err(Failure::usage("--realizations must be at least 1"));
    }
    if args.reps == 0 {
        return Err(Failure::usage("--reps must be at least 1"));
    }
    if args.jobs == Some(0) {
        return Err(Failure::usage("--jobs must be at least 1"));
    }
    let mut cfg = read_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let mode = resolve_mode(args.mode, &cfg);
    let pool = read_dataset(&args.data)?;
    let test = args.test.as_deref().map(read_dataset).transpose()?;
    if let Some(t) = &test {
        if t.dim() != pool.dim() {
            return Err(Failure::data(format!(
                "test samples are {}-dimensional, training samples {}",
                t.dim(),
                pool.dim()
            )));
        }
    }

    let classes = pool.classes();
    let mut sizes = Vec::new();
    for &s in &args.sizes {
        if s < classes {
            eprintln!("warning: skipping dictionary size {s}, fewer atoms than the {classes} classes");
        } else if !sizes.contains(&s) {
            sizes.push(s);
        }
    }
    if sizes.is_empty() {
        return Err(Failure::usage("no usable dictionary sizes"));
    }

    let jobs: Vec<(usize, usize)> = sizes
        .iter()
        .flat_map(|&s| (0..args.realizations).map(move |k| (s, k)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.jobs {
        builder = builder.num_threads(n);
    }
    let workers = builder.build().map_err(Failure::usage)?;
    let rows: Vec<BenchRow> = workers.install(|| {
        jobs.par_iter()
            .map(|&(size, k)| bench_run(&pool, test.as_ref(), &cfg, mode, &args, size, k))
            .collect::<Result<_, _>>()
    })?;

    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout()),
    };
    let mut wtr = csv::Writer::from_writer(sink);
    wtr.write_record(["size", "realization", "accuracy", "train_s", "test_s_per_sample"])?;
    for r in &rows {
        wtr.write_record([
            r.size.to_string(),
            r.realization.to_string(),
            r.accuracy.to_string(),
            r.train_s.to_string(),
            r.test_s_per_sample.to_string(),
        ])?;
    }
    wtr.flush()?;
    drop(wtr);

    let mut summary = match &args.summary {
        Some(p) => Some(csv::Writer::from_path(p)?),
        None => None,
    };
    if let Some(w) = summary.as_mut() {
        w.write_record([
            "size",
            "realizations",
            "accuracy_mean",
            "accuracy_std",
            "train_s_mean",
            "test_s_per_sample_mean",
        ])?;
    }
    eprintln!("{:>6}  {:>14}  {:>12}  {:>11}", "size", "accuracy (%)", "training (s)", "testing (s)");
    for &size in &sizes {
        let group: Vec<&BenchRow> = rows.iter().filter(|r| r.size == size).collect();
        let acc: Vec<f64> = group.iter().map(|r| r.accuracy).collect();
        let (acc_mean, acc_std) = mean_std(&acc);
        let (train_mean, _) = mean_std(&group.iter().map(|r| r.train_s).collect::<Vec<_>>());
        let (test_mean, _) = mean_std(&group.iter().map(|r| r.test_s_per_sample).collect::<Vec<_>>());
        eprintln!(
            "{size:>6}  {:>8.2} ± {:>4.2}  {train_mean:>12.3}  {test_mean:>11.2e}",
            100.0 * acc_mean,
            100.0 * acc_std
        );
        if let Some(w) = summary.as_mut() {
            w.write_record([
                size.to_string(),
                group.len().to_string(),
                acc_mean.to_string(),
                acc_std.to_string(),
                train_mean.to_string(),
                test_mean.to_string(),
            ])?;
        }
    }
    if let Some(mut w) = summary {
        w.flush()?;
    }
    Ok(())
}
