use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use foresight_core::datagen::{build_dataset, Dataset};
use foresight_core::forward_model::{eval_prediction, train, Backend, PredictionReport};
use foresight_core::microworld::{enumerate_affordances, random_scene, render, WorldState};
use foresight_core::nn::{load_checkpoint, save_checkpoint, Network};
use foresight_core::planner::{execute_plan, plan, GoalRecord, PlanFile, PlannerConfig};
use foresight_core::raster::{export_ppm, load_raster, save_raster, ChannelMask};
use foresight_core::recognition::{eval_recall, recognize, write_detections, RecallReport};
use foresight_core::tasks::{task_suite, TASK_RESOLUTION};
use foresight_core::{Error, GoalSpec, ParametrizedAffordance, Polarity};

use crate::fixtures::{load_tasks, TaskFixture};
use crate::{
    BackendArg, ChannelsArg, Cli, Command, EvalTarget, GlobalArgs, PolarityArg, RunConfig,
    EXIT_INTERNAL, EXIT_STRICT, EXIT_USAGE,
};

pub const MIN_RECALL: f64 = 0.95;
pub const MAX_SPURIOUS_PER_IMAGE: f64 = 0.2;
pub const MAX_CHANGED_MAE: f64 = 0.08;
pub const MAX_ALL_MAE: f64 = 0.01;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, missing or malformed input files.
    Usage(String),
    /// A threshold checked under `--strict` was missed.
    Strict(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Strict(_) => EXIT_STRICT,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => f.write_str(m),
            CliError::Strict(m) => write!(f, "acceptance check failed: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Errors while reading user-supplied inputs are usage errors.
fn input<T>(r: foresight_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Usage(e.to_string()))
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let g = &cli.global;
    let cfg = run_config(g)?;
    match &cli.command {
        Command::GenData { sequences } => gen_data(
            &cfg,
            &out_dir(g, "data"),
            sequences.unwrap_or(cfg.sequences),
        ),
        Command::Train { data, batches } => {
            let mut cfg = cfg.clone();
            if let Some(b) = batches {
                cfg.train.batches = *b;
            }
            cmd_train(&cfg, data.as_deref(), &out_dir(g, "model"))
        }
        Command::Eval {
            target: EvalTarget::Recognition,
            ..
        } => eval_recognition(&cfg, &out_dir(g, "eval"), g.strict),
        Command::Eval {
            target: EvalTarget::Prediction,
            data,
        } => {
            let net = load_net(g, &cfg)?;
            eval_pred(
                &cfg,
                data.as_deref(),
                backend(g, net.as_ref())?,
                &out_dir(g, "eval"),
                g.strict,
            )
        }
        Command::Plan { scene } => {
            let net = load_net(g, &cfg)?;
            cmd_plan(
                g,
                &cfg,
                scene,
                backend(g, net.as_ref())?,
                &out_dir(g, "plan"),
            )
        }
        Command::Tasks { fixtures, only } => {
            let net = load_net(g, &cfg)?;
            cmd_tasks(
                g,
                &cfg,
                fixtures.as_deref(),
                only,
                backend(g, net.as_ref())?,
                &out_dir(g, "tasks"),
            )
        }
        Command::Render { scene } => cmd_render(&cfg, scene, &out_dir(g, "render")),
        Command::ExportTasks => export_tasks(&out_dir(g, "fixtures")),
    }
}

/// Defaults, then the config file, then flags.
pub fn run_config(g: &GlobalArgs) -> CliResult<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => input(RunConfig::load(p))?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
        cfg.train.seed = s;
        cfg.train.init_seed = s;
    }
    if let Some(r) = g.resolution {
        cfg.resolution = r;
        cfg.train.net.resolution = r;
    }
    if let Some(n) = g.n_max {
        cfg.n_max = n;
    }
    if let Some(c) = g.cutoff {
        cfg.cutoff = c;
    }
    input(cfg.validate())?;
    Ok(cfg)
}

fn out_dir(g: &GlobalArgs, default: &str) -> PathBuf {
    g.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let json =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    std::fs::write(path, json + "\n")
        .map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}

fn load_net(g: &GlobalArgs, cfg: &RunConfig) -> CliResult<Option<Network<f32>>> {
    if g.backend != Some(BackendArg::Neural) {
        return Ok(None);
    }
    let path = g
        .checkpoint
        .as_ref()
        .ok_or_else(|| CliError::Usage("--backend neural needs --checkpoint".into()))?;
    let (net, _) = input(load_checkpoint(path))?;
    if net.config.resolution != cfg.resolution {
        return Err(CliError::Usage(format!(
            "checkpoint resolution {} differs from --resolution {}",
            net.config.resolution, cfg.resolution
        )));
    }
    Ok(Some(net))
}

fn backend<'a>(g: &GlobalArgs, net: Option<&'a Network<f32>>) -> CliResult<Backend<'a>> {
    Ok(match (g.backend.unwrap_or(BackendArg::Oracle), net) {
        (BackendArg::Oracle, _) => Backend::Oracle,
        (BackendArg::Neural, Some(n)) => Backend::Neural(n),
        (BackendArg::Neural, None) => return Err(CliError::Internal("network not loaded".into())),
    })
}

fn dataset(cfg: &RunConfig, dir: Option<&Path>) -> CliResult<Dataset> {
    let d = match dir {
        Some(d) => input(Dataset::load(d))?,
        None => build_dataset(cfg.sequences, cfg.seed, cfg.resolution)?,
    };
    if d.resolution != cfg.resolution {
        return Err(CliError::Usage(format!(
            "dataset resolution {} differs from --resolution {}",
            d.resolution, cfg.resolution
        )));
    }
    Ok(d)
}

pub fn gen_data(cfg: &RunConfig, out: &Path, sequences: usize) -> CliResult<()> {
    let d = input(build_dataset(sequences, cfg.seed, cfg.resolution))?;
    create_dir(out)?;
    d.save(out)?;
    let m = d.manifest();
    println!(
        "{} sequences ({} train, {} val, {} test), {} executions -> {}",
        sequences,
        m.counts.train,
        m.counts.val,
        m.counts.test,
        m.total_executions,
        out.display()
    );
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig, data: Option<&Path>, out: &Path) -> CliResult<()> {
    let d = dataset(cfg, data)?;
    create_dir(out)?;
    let t0 = Instant::now();
    let (net, report) = input(train(&d, &cfg.train, |r| {
        eprintln!(
            "batch {:>6}  train {:.5}  val {:.5}  lr {:.2e}{}",
            r.batch,
            r.train_loss,
            r.val_loss,
            r.lr,
            if r.improved { "  *" } else { "" }
        )
    }))?;
    let meta = BTreeMap::from([
        ("batches".to_string(), report.batches.to_string()),
        ("best_batch".to_string(), report.best_batch.to_string()),
        (
            "best_val_loss".to_string(),
            format!("{:.6}", report.best_val_loss),
        ),
        ("dataset_seed".to_string(), d.seed.to_string()),
        ("train_seed".to_string(), cfg.train.seed.to_string()),
    ]);
    save_checkpoint(&out.join("net.ckpt"), &net, &meta)?;
    write_json(&out.join("train_report.json"), &report)?;
    eprintln!("trained in {:.1}s", t0.elapsed().as_secs_f64());
    println!(
        "best validation loss {:.5} at batch {} -> {}",
        report.best_val_loss,
        report.best_batch,
        out.join("net.ckpt").display()
    );
    Ok(())
}

/// Recall of recognition on rendered random scenes.
pub fn recognition_report(cfg: &RunConfig) -> RecallReport {
    let rc = cfg.recognition();
    let (dets, truth): (Vec<_>, Vec<_>) = (0..cfg.recognition_scenes as u64)
        .map(|i| {
            let w = random_scene(cfg.recognition_seed + i);
            (
                recognize(&render(&w, cfg.resolution), &rc),
                enumerate_affordances(&w),
            )
        })
        .unzip();
    eval_recall(&dets, &truth).expect("one list per scene")
}

pub fn recognition_ok(r: &RecallReport) -> bool {
    r.overall().recall() >= MIN_RECALL && r.spurious_per_image() <= MAX_SPURIOUS_PER_IMAGE
}

fn eval_recognition(cfg: &RunConfig, out: &Path, strict: bool) -> CliResult<()> {
    let r = recognition_report(cfg);
    create_dir(out)?;
    write_json(&out.join("recognition.json"), &r)?;
    print!("{}", r.table());
    if strict && !recognition_ok(&r) {
        return Err(CliError::Strict(format!(
            "recall {:.3} (min {MIN_RECALL}), spurious/image {:.3} (max {MAX_SPURIOUS_PER_IMAGE})",
            r.overall().recall(),
            r.spurious_per_image()
        )));
    }
    Ok(())
}

/// Step rows that miss the error bounds.
pub fn prediction_failures(r: &PredictionReport) -> Vec<String> {
    r.steps
        .iter()
        .filter(|s| s.frames > 0 && (s.changed_area > MAX_CHANGED_MAE || s.all_area > MAX_ALL_MAE))
        .map(|s| {
            format!(
                "step {}: changed {:.4}, all {:.4}",
                s.step, s.changed_area, s.all_area
            )
        })
        .collect()
}

fn eval_pred(
    cfg: &RunConfig,
    data: Option<&Path>,
    backend: Backend,
    out: &Path,
    strict: bool,
) -> CliResult<()> {
    let d = dataset(cfg, data)?;
    let r = eval_prediction(backend, &d.test)?;
    create_dir(out)?;
    write_json(&out.join("prediction.json"), &r)?;
    print!("{}", r.table());
    let failed = prediction_failures(&r);
    if strict && !failed.is_empty() {
        return Err(CliError::Strict(failed.join("; ")));
    }
    Ok(())
}

fn goal_spec(g: &GlobalArgs) -> CliResult<(GoalSpec, PathBuf)> {
    let path = g
        .goal
        .clone()
        .ok_or_else(|| CliError::Usage("plan needs --goal".into()))?;
    let raster = input(load_raster(&path))?;
    let polarity = match g.polarity.unwrap_or(PolarityArg::Pos) {
        PolarityArg::Pos => Polarity::Positive,
        PolarityArg::Neg => Polarity::Negative,
    };
    let spec = match g.channels {
        None => GoalSpec::with_default_mask(raster, polarity),
        Some(c) => GoalSpec::new(
            raster,
            polarity,
            match c {
                ChannelsArg::Rgb => ChannelMask::RGB,
                ChannelsArg::Rgbd => ChannelMask::RGBD,
            },
        ),
    };
    Ok((input(spec)?, path))
}

fn cmd_plan(
    g: &GlobalArgs,
    cfg: &RunConfig,
    scene: &Path,
    backend: Backend,
    out: &Path,
) -> CliResult<()> {
    let world = input(WorldState::load(scene))?;
    let (goal, goal_path) = goal_spec(g)?;
    let pc = cfg.planner();
    let root = render(&world, cfg.resolution);
    if goal.width() > cfg.resolution || goal.height() > cfg.resolution {
        return Err(CliError::Usage(format!(
            "goal is {}x{} but the scene renders at {}x{}",
            goal.width(),
            goal.height(),
            cfg.resolution,
            cfg.resolution
        )));
    }
    let (r, _) = plan(&root, Some(&world), &goal, &pc, backend)?;
    create_dir(out)?;
    let mut frames = Vec::new();
    for (i, f) in r.frames.iter().enumerate() {
        let stem = format!("frame{:02}", i + 1);
        export_ppm(f, out.join(format!("{stem}.ppm")))?;
        save_raster(f.raster(), out.join(format!("{stem}.rgbdf")))?;
        frames.push(format!("{stem}.ppm"));
    }
    let file = PlanFile {
        goal: GoalRecord {
            path: goal_path.display().to_string(),
            polarity: goal.polarity().short().to_string(),
            channels: goal.mask().name(),
        },
        steps: r.steps.clone(),
        residual_loss: r.residual_loss,
        frames,
    };
    file.save(&out.join("plan.json"))?;
    if r.no_affordances {
        println!("no affordances recognized; empty plan");
    }
    for (i, a) in r.steps.iter().enumerate() {
        println!("{:>2}. {}", i + 1, a.describe());
    }
    let ex = execute_plan(&world, &r.steps, &goal, &pc, cfg.resolution)?;
    println!(
        "{} steps, predicted loss {:.5}, executed loss {:.5}: {}",
        r.steps.len(),
        r.residual_loss,
        ex.final_loss,
        verdict(ex.success, ex.failed_step)
    );
    if g.strict && !ex.success {
        return Err(CliError::Strict("the executed plan misses the goal".into()));
    }
    Ok(())
}

fn verdict(success: bool, failed_step: Option<usize>) -> String {
    match (success, failed_step) {
        (true, _) => "pass".into(),
        (false, Some(i)) => format!("FAIL (step {} not afforded)", i + 1),
        (false, None) => "FAIL".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskOutcome {
    pub id: usize,
    pub name: String,
    pub polarity: Polarity,
    pub n_max: usize,
    pub steps: Vec<ParametrizedAffordance>,
    pub root_loss: f64,
    pub predicted_loss: f64,
    pub executed_loss: f64,
    pub nodes: usize,
    pub failed_step: Option<usize>,
    pub success: bool,
}

/// Plan one task with `backend` and execute the plan in the simulator.
pub fn run_task(
    t: &TaskFixture,
    backend: Backend,
    cfg: &PlannerConfig,
) -> foresight_core::Result<TaskOutcome> {
    let root = render(&t.world, TASK_RESOLUTION);
    let (r, _) = plan(&root, Some(&t.world), &t.goal, cfg, backend)?;
    let ex = execute_plan(&t.world, &r.steps, &t.goal, cfg, TASK_RESOLUTION)?;
    Ok(TaskOutcome {
        id: t.id,
        name: t.meta.name.clone(),
        polarity: t.goal.polarity(),
        n_max: cfg.n_max,
        steps: r.steps,
        root_loss: r.root_loss,
        predicted_loss: r.residual_loss,
        executed_loss: ex.final_loss,
        nodes: r.nodes_expanded,
        failed_step: ex.failed_step,
        success: ex.success,
    })
}

pub fn task_table(outcomes: &[TaskOutcome]) -> String {
    let mut s = format!(
        "{:<4} {:<28} {:<4} {:>5} {:>7} {:>10} {:>10}  {}\n",
        "task", "name", "goal", "steps", "nodes", "predicted", "executed", "result"
    );
    for o in outcomes {
        s += &format!(
            "{:<4} {:<28} {:<4} {:>5} {:>7} {:>10.5} {:>10.5}  {}\n",
            format!("{:02}", o.id),
            o.name,
            o.polarity.short(),
            o.steps.len(),
            o.nodes,
            o.predicted_loss,
            o.executed_loss,
            verdict(o.success, o.failed_step)
        );
        for a in &o.steps {
            s += &format!("       {}\n", a.describe());
        }
    }
    let passed = outcomes.iter().filter(|o| o.success).count();
    s += &format!("{passed}/{} tasks passed\n", outcomes.len());
    s
}

fn cmd_tasks(
    g: &GlobalArgs,
    cfg: &RunConfig,
    fixtures: Option<&Path>,
    only: &[usize],
    backend: Backend,
    out: &Path,
) -> CliResult<()> {
    if cfg.resolution != TASK_RESOLUTION {
        return Err(CliError::Usage(format!(
            "the task suite runs at resolution {TASK_RESOLUTION}"
        )));
    }
    let tasks = input(load_tasks(fixtures))?;
    if let Some(bad) = only.iter().find(|&&i| !tasks.iter().any(|t| t.id == i)) {
        return Err(CliError::Usage(format!("no task {bad}")));
    }
    let t0 = Instant::now();
    let mut outcomes = Vec::new();
    for t in tasks
        .iter()
        .filter(|t| only.is_empty() || only.contains(&t.id))
    {
        let mut pc = cfg.planner();
        pc.n_max = g.n_max.unwrap_or(t.meta.n_max);
        outcomes.push(run_task(t, backend, &pc)?);
    }
    create_dir(out)?;
    write_json(&out.join("tasks.json"), &outcomes)?;
    print!("{}", task_table(&outcomes));
    eprintln!(
        "suite ran in {:.2}s with the {} backend",
        t0.elapsed().as_secs_f64(),
        backend.name()
    );
    if g.strict && outcomes.iter().any(|o| !o.success) {
        let failed: Vec<String> = outcomes
            .iter()
            .filter(|o| !o.success)
            .map(|o| format!("{:02}", o.id))
            .collect();
        return Err(CliError::Strict(format!(
            "tasks {} failed",
            failed.join(", ")
        )));
    }
    Ok(())
}

fn cmd_render(cfg: &RunConfig, scene: &Path, out: &Path) -> CliResult<()> {
    let world = input(WorldState::load(scene))?;
    let state = render(&world, cfg.resolution);
    create_dir(out)?;
    save_raster(state.raster(), out.join("scene.rgbdf"))?;
    export_ppm(&state, out.join("scene.ppm"))?;
    let path = out.join("affordances.jsonl");
    let f = std::fs::File::create(&path)
        .map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))?;
    let truth = enumerate_affordances(&world);
    let mut w = std::io::BufWriter::new(f);
    write_detections(&truth, &mut w)?;
    std::io::Write::flush(&mut w)
        .map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))?;
    println!("{} affordances -> {}", truth.len(), out.display());
    Ok(())
}

fn export_tasks(out: &Path) -> CliResult<()> {
    create_dir(out)?;
    for t in task_suite()? {
        TaskFixture::from_task(&t).save(out)?;
    }
    println!("task fixtures -> {}", out.display());
    Ok(())
}
