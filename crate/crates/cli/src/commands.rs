use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use smiley_core::leakage::{audit, honest_relabel, AuditOptions, ClassifierSpec, Finding};
use smiley_core::lottery::{enumerate_range, monte_carlo_jackpot, probability_report};
use smiley_core::models::{
    evaluate, read_checkpoint, train, write_checkpoint, EvalReport, ModelState,
};
use smiley_core::repro::run_repro;
use smiley_core::stats::{binomial_test, wilson_ci};
use smiley_core::tessim::{
    export_dataset, generate_dataset, import_dataset, split_dataset, Dataset,
};
use smiley_core::LossKind;

use crate::config::RunConfig;
use crate::{
    AuditArgs, ClassifierChoice, Cli, Command, EvalArgs, Failure, GenerateArgs, LotteryArgs,
    ReproArgs, TrainArgs,
};

pub const SMILEY_WARNING: &str = "smiley loss has zero gradient; parameters unchanged";

struct Ctx {
    cfg: RunConfig,
    out: Option<PathBuf>,
    quiet: bool,
}

impl Ctx {
    fn say(&self, text: impl AsRef<str>) {
        if !self.quiet {
            // A closed pipe (e.g. `| head`) is not an error worth a panic.
            let _ = writeln!(std::io::stdout().lock(), "{}", text.as_ref().trim_end());
        }
    }

    fn out_dir(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

pub fn run(cli: &Cli) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    let mut ctx = Ctx {
        cfg,
        out: cli.out.clone(),
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Generate(a) => generate(&mut ctx, a),
        Command::Train(a) => train_cmd(&mut ctx, a),
        Command::Eval(a) => eval(&mut ctx, a),
        Command::Audit(a) => audit_cmd(&mut ctx, a),
        Command::Lottery(a) => lottery(&mut ctx, a),
        Command::Repro(a) => repro(&mut ctx, a),
    }
}

fn io_fail(path: &Path, e: std::io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_fail(path, e))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))
}

/// Output must not land inside the dataset being read.
fn guard_input(data: &Path, out: &Path) -> Result<(), Failure> {
    let resolve = |p: &Path| p.canonicalize().or_else(|_| std::path::absolute(p));
    if let (Ok(d), Ok(o)) = (resolve(data), resolve(out)) {
        if o.starts_with(&d) {
            return Err(Failure::Usage(format!(
                "output directory {} is inside the dataset {}; choose another --out",
                out.display(),
                data.display()
            )));
        }
    }
    Ok(())
}

fn load_dataset(data: &Path) -> Result<Dataset, Failure> {
    import_dataset(data).map_err(|e| Failure::Data(e.to_string()))
}

fn significance_lines(report: &EvalReport) -> Result<String, Failure> {
    let test = binomial_test(report.correct, report.n, 0.5)?;
    let (lo, hi) = wilson_ci(report.correct, report.n, 0.95)?;
    Ok(format!(
        "{report}\nexact binomial test vs 0.5: p = {:.3e} (one-sided)\n95% Wilson interval: [{lo:.4}, {hi:.4}]",
        test.p_value
    ))
}

fn generate(ctx: &mut Ctx, a: &GenerateArgs) -> Result<(), Failure> {
    let sim = &mut ctx.cfg.sim;
    if let Some(v) = a.rounds {
        sim.rounds = v;
    }
    if let Some(v) = a.k_change {
        sim.k_change = v;
    }
    if let Some(v) = a.width {
        sim.width = v;
    }
    if let Some(v) = a.height {
        sim.height = v;
    }
    if let Some(v) = a.sampling {
        sim.sampling_mode = v.into();
    }
    if let Some(v) = a.tea_fraction {
        sim.base_spec.tea_fraction = v;
    }
    if let Some(v) = a.blobs {
        sim.base_spec.blob_count = v;
    }
    if let Some(v) = a.base_seed {
        sim.base_spec.seed = v;
    }
    let ds = generate_dataset(sim)?;
    let out = ctx.out_dir("data");
    let manifest = export_dataset(&ds, &out)?;
    ctx.cfg.write(&out)?;

    let trace: String = ds
        .parity_trace()
        .iter()
        .take(40)
        .map(|b| b.to_string())
        .collect();
    ctx.say(format!(
        "wrote {} images (I_0..I_{}) and {} manifest rows to {}\nrounds {}, k_change {}, {}x{}, {:?} sampling\nparity trace: {}{}\nprovenance hash {}",
        ds.len() + 1,
        ds.len(),
        manifest.rows.len(),
        out.display(),
        ds.config.rounds,
        ds.config.k_change,
        ds.config.width,
        ds.config.height,
        ds.config.sampling_mode,
        trace,
        if ds.len() > 40 { "..." } else { "" },
        ds.provenance_hash
    ));
    Ok(())
}

fn train_cmd(ctx: &mut Ctx, a: &TrainArgs) -> Result<(), Failure> {
    let cfg = &mut ctx.cfg;
    if let Some(v) = a.features {
        cfg.features = v;
    }
    if let Some(v) = a.loss {
        cfg.train.loss = v;
    }
    if let Some(v) = a.split {
        cfg.split = v;
    }
    if let Some(v) = a.arch {
        cfg.architecture = v;
    }
    if let Some(v) = a.lr {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = a.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = a.batch_size {
        cfg.train.batch_size = v;
    }
    cfg.train.validate()?;
    let out = ctx.out_dir("train_out");
    guard_input(&a.data, &out)?;

    let ds = load_dataset(&a.data)?;
    let cfg = &ctx.cfg;
    let (tr, te) = split_dataset(&ds, &cfg.split)?;
    let model = ModelState::new(
        cfg.architecture,
        cfg.features,
        ds.config.width,
        ds.config.height,
        cfg.sim.seed,
    )?;
    if cfg.train.loss == LossKind::Smiley {
        eprintln!("warning: {SMILEY_WARNING}");
    }
    let outcome = train(&model, &tr, &cfg.train)?;
    let report = evaluate(&outcome.model, &te)?;

    create_dir(&out)?;
    write_checkpoint(&outcome.model, &out.join("model.ckpt"))?;
    let mut history = String::from("epoch,loss\n");
    for (i, l) in outcome.history.iter().enumerate() {
        history.push_str(&format!("{},{l:.17e}\n", i + 1));
    }
    write_file(&out.join("history.csv"), history)?;
    write_file(
        &out.join("eval.json"),
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    )?;
    cfg.write(&out)?;

    ctx.say(format!(
        "trained {} on {} features, split {} ({} train / {} test), loss {:?}",
        cfg.architecture,
        cfg.features.name(),
        cfg.split.name(),
        tr.len(),
        te.len(),
        cfg.train.loss
    ));
    ctx.say(format!("test accuracy {:.4}", report.accuracy));
    ctx.say(significance_lines(&report)?);
    ctx.say(format!(
        "checkpoint written to {}",
        out.join("model.ckpt").display()
    ));
    Ok(())
}

fn eval(ctx: &mut Ctx, a: &EvalArgs) -> Result<(), Failure> {
    let report = match (a.correct, a.n, &a.data, &a.model) {
        (Some(correct), Some(n), _, _) => EvalReport::from_counts(correct, n)?,
        (_, _, Some(data), Some(model)) => {
            let ds = load_dataset(data)?;
            let model = read_checkpoint(model)?;
            let target = match a.split {
                Some(split) => split_dataset(&ds, &split)?.1,
                None => ds,
            };
            evaluate(&model, &target)?
        }
        _ => {
            return Err(Failure::Usage(
                "eval needs either --correct and --n, or --data and --model".into(),
            ))
        }
    };
    ctx.say(significance_lines(&report)?);
    if let Some(out) = &ctx.out {
        create_dir(out)?;
        write_file(
            &out.join("eval.json"),
            serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        )?;
        ctx.cfg.write(out)?;
    }
    Ok(())
}

fn audit_cmd(ctx: &mut Ctx, a: &AuditArgs) -> Result<(), Failure> {
    if let Some(v) = a.split {
        ctx.cfg.split = v;
    }
    if let Some(v) = a.compare_with {
        ctx.cfg.audit.compare_with = Some(v);
    }
    if let Some(v) = a.n_perm {
        ctx.cfg.audit.n_perm = v;
    }
    let out = ctx.out_dir("audit_out");
    guard_input(&a.data, &out)?;

    let mut ds = load_dataset(&a.data)?;
    if a.honest_relabel {
        ds = honest_relabel(&ds, ctx.cfg.audit.seed);
    }
    let cfg = &ctx.cfg;
    let classifier = match a.classifier {
        ClassifierChoice::ParityOracle => ClassifierSpec::ParityOracle,
        ClassifierChoice::Majority => ClassifierSpec::Majority,
        ClassifierChoice::Model => cfg.classifier(),
    };
    let report = audit(
        &ds,
        &AuditOptions {
            split: cfg.split,
            compare_with: cfg.audit.compare_with,
            classifier,
            n_perm: cfg.audit.n_perm,
            seed: cfg.audit.seed,
            leak_threshold_bits: cfg.audit.leak_threshold_bits,
            no_signal_threshold_bits: cfg.audit.no_signal_threshold_bits,
        },
    )?;

    create_dir(&out)?;
    write_file(
        &out.join("audit.json"),
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    )?;
    write_file(&out.join("audit.txt"), report.to_text())?;
    cfg.write(&out)?;
    ctx.say(report.to_text());

    if a.fail_on_leak && report.has(Finding::ParityLeak) {
        return Err(Failure::Leak);
    }
    Ok(())
}

fn lottery(ctx: &mut Ctx, a: &LotteryArgs) -> Result<(), Failure> {
    let l = &mut ctx.cfg.lottery;
    if let Some(v) = a.p_bit {
        l.p_bit = v;
    }
    if let Some(v) = a.trials {
        l.trials = v;
    }
    if let Some(v) = a.truth_pool {
        l.truth_pool = v.into();
    }
    let l = ctx.cfg.lottery.clone();

    if a.enumerate_range {
        let range = enumerate_range();
        ctx.say(format!(
            "reachable range [{}, {}] over all 1024 ten-bit patterns\nunreachable pool values {:?}\npatterns producing 0: {}",
            range.min, range.max, range.unreachable_pool_values, range.zero_patterns
        ));
        let counts: Vec<String> = range
            .multiplicity
            .iter()
            .enumerate()
            .map(|(v, c)| format!("{v}:{c}"))
            .collect();
        ctx.say(format!("patterns per value: {}", counts.join(" ")));
    }

    let mut report = probability_report(l.p_bit)?;
    if a.simulate {
        report.monte_carlo = Some(monte_carlo_jackpot(
            l.p_bit,
            l.trials,
            l.seed,
            l.truth_pool,
        )?);
    }
    ctx.say(report.to_text());
    if let Some(out) = &ctx.out {
        create_dir(out)?;
        write_file(
            &out.join("lottery.json"),
            serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        )?;
        ctx.cfg.write(out)?;
    }
    Ok(())
}

fn repro(ctx: &mut Ctx, a: &ReproArgs) -> Result<(), Failure> {
    if let Some(v) = a.k_change {
        ctx.cfg.sim.k_change = v;
    }
    if let Some(v) = a.n_perm {
        ctx.cfg.audit.n_perm = v;
    }
    if let Some(v) = a.trials {
        ctx.cfg.lottery.trials = v;
    }
    if a.export_data {
        ctx.cfg.repro.export_dataset = true;
    }
    let out = ctx.out_dir("repro_out");
    let report = run_repro(&ctx.cfg.repro_options())?;
    report.write(&out)?;
    ctx.cfg.write(&out)?;
    ctx.say(report.to_text());
    ctx.say(format!("report files written to {}", out.display()));
    Ok(())
}
