use std::fmt::Write as _;
use std::path::Path;
use std::process::ExitCode;

use wpmixer::data::{load_csv, Part};
use wpmixer::run::{self, metrics_csv};
use wpmixer::{flops, gradcheck, selftest, Checkpoint, Error, Result, RunConfig, Tensor};

use crate::{Command, RunArgs, SplitArg};

pub fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Train(args) => train(&args),
        Command::Eval { run, checkpoint, split } => eval(&run, &checkpoint, split),
        Command::Predict { checkpoint, input, output } => predict(&checkpoint, &input, output.as_deref()),
        Command::Gradcheck { config, seed, batch, tol } => gradcheck(config.as_deref(), seed, batch, tol),
        Command::Flops { config, batch } => flop_count(&config, batch),
        Command::Selftest => selftest(),
    }
}

fn resolve(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    cfg.apply_env(|k| std::env::var(k).ok())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(strict) = args.strict_splits {
        cfg.data.back_reach = !strict;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn train(args: &RunArgs) -> Result<ExitCode> {
    let cfg = resolve(args)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::Io { path: cfg.out_dir.clone(), source: e })?;
    let result = run::train_run(&cfg, |e| {
        let val = e.val.map_or(String::new(), |m| format!(" val_mse {:.6} val_mae {:.6}", m.mse, m.mae));
        eprintln!("epoch {:>3} lr {:.3e} train_loss {:.6}{val} ({:.1}s)", e.epoch, e.lr, e.train_loss, e.seconds);
    })?;
    let out = &cfg.out_dir;
    result.checkpoint.save(out.join("model.ckpt"))?;
    write(&out.join("train_report.csv"), &result.report.to_csv())?;
    let csv = metrics_csv(&result.rows);
    write(&out.join("metrics.csv"), &csv)?;
    write(&out.join("config.toml"), &cfg.to_toml())?;
    for r in &result.rows {
        eprintln!("{} mse {:.6} mae {:.6}", r.split, r.metrics.mse, r.metrics.mae);
    }
    print!("{csv}");
    Ok(ExitCode::SUCCESS)
}

fn eval(args: &RunArgs, ckpt_path: &Path, split: SplitArg) -> Result<ExitCode> {
    let cfg = resolve(args)?;
    let ckpt = Checkpoint::load(ckpt_path)?;
    let part = match split {
        SplitArg::Train => Part::Train,
        SplitArg::Val => Part::Val,
        SplitArg::Test => Part::Test,
    };
    let row = run::eval_run(&cfg, &ckpt, part)?;
    print!("{}", metrics_csv(&[row]));
    Ok(ExitCode::SUCCESS)
}

fn predict(ckpt_path: &Path, input: &Path, output: Option<&Path>) -> Result<ExitCode> {
    let ckpt = Checkpoint::load(ckpt_path)?;
    let scaling = ckpt
        .scaling
        .as_ref()
        .ok_or_else(|| Error::Checkpoint("no data statistics stored; cannot map to raw units".into()))?;
    let cfg = ckpt.model.config();
    let table = load_csv(input)?;
    let (c, l, t) = (cfg.channels, cfg.seq_len, cfg.pred_len);
    if table.channels() != c {
        return Err(Error::config(format!(
            "{} has {} value columns, the model expects {c}",
            input.display(),
            table.channels()
        )));
    }
    if table.rows() < l {
        return Err(Error::config(format!(
            "{} has {} rows; the model needs at least L = {l}",
            input.display(),
            table.rows()
        )));
    }
    let start = table.rows() - l;
    let mut x = vec![0.0; c * l];
    for r in 0..l {
        for (ch, &v) in table.row(start + r).iter().enumerate() {
            x[ch * l + r] = v;
        }
    }
    scaling.transform_channel_major(&mut x, l);
    let mut y = ckpt.model.predict(&Tensor::new(vec![1, c, l], x)?)?.into_data();
    scaling.inverse_channel_major(&mut y, t);
    let mut s = format!("step,{}\n", table.columns.join(","));
    for step in 0..t {
        let _ = write!(s, "{}", step + 1);
        for ch in 0..c {
            let _ = write!(s, ",{:?}", y[ch * t + step]);
        }
        s.push('\n');
    }
    match output {
        Some(p) => write(p, &s)?,
        None => print!("{s}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn gradcheck(config: Option<&Path>, seed: u64, batch: usize, tol: f64) -> Result<ExitCode> {
    let model = match config {
        Some(p) => RunConfig::load(p)?.model,
        None => gradcheck::toy_config(),
    };
    let r = gradcheck::check_model(&model, batch, seed)?;
    println!(
        "checked {} entries; max relative error {:.3e} at {} (analytic {:.6e}, numeric {:.6e})",
        r.checked, r.max_rel_error, r.worst, r.analytic, r.numeric
    );
    Ok(if r.max_rel_error < tol {
        ExitCode::SUCCESS
    } else {
        eprintln!("gradient check failed: {:.3e} >= {tol:e}", r.max_rel_error);
        ExitCode::from(1)
    })
}

fn flop_count(config: &Path, batch: Option<usize>) -> Result<ExitCode> {
    let cfg = RunConfig::load(config)?;
    let batch = batch.unwrap_or(cfg.train.batch_size);
    let r = flops::count(&cfg.model, batch)?;
    println!("term,flops");
    for (name, v) in &r.terms {
        println!("{name},{v}");
    }
    println!("total,{}", r.total());
    println!("gflops,{:.6}", r.gflops());
    Ok(ExitCode::SUCCESS)
}

fn selftest() -> Result<ExitCode> {
    let checks = selftest::run();
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
