//! Problem instances, solver arms, cached reference optima and convergence
//! logs.
//!
//! `rel_subopt` follows the usual metric `(g(ω_t) − g⋆)/|g⋆|` on the model's
//! own objective: the regularized primal for the ℓ1 and group tasks, the SVM
//! primal for `svm`. `g(ω_t)` is the best value seen so far, and `g⋆` is a
//! certified lower bound from a reference solve at gap 1e-12.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use blitz_core::engine::{Engine, EngineConfig};
use blitz_core::losses::LossKind;
use blitz_core::screening::{blitz_screen, RegionKind, SafeRegion};
use blitz_core::problems::{
    build_group_dual, build_l1_dual, build_svm_primal, compute_lambda_max, group_lambda_max, standardize_groups,
    GroupDual, L1Dual, SvmPrimal,
};
use blitz_core::solvers::{Dca, DualCd, PlainConfig, PlainRunner, ProxNewton, ScreenRule, SubproblemSolver};
use blitz_core::{Exec, PiecewiseProblem};
use serde::{Deserialize, Serialize};

use crate::error::{config, HarnessError, Result};
use crate::fixtures::sha256_hex;
use crate::libsvm::{format_groups, format_libsvm, Dataset};
use crate::preprocess::{preprocess, PreprocessOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Lasso,
    Logreg,
    Grouplasso,
    Svm,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Lasso => "lasso",
            Task::Logreg => "logreg",
            Task::Grouplasso => "grouplasso",
            Task::Svm => "svm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
pub enum Arm {
    #[value(name = "blitzws")]
    #[serde(rename = "blitzws")]
    BlitzWs,
    #[value(name = "plain")]
    #[serde(rename = "plain")]
    Plain,
    #[value(name = "plain+blitzscreen")]
    #[serde(rename = "plain+blitzscreen")]
    PlainBlitzScreen,
    #[value(name = "plain+gapsafe")]
    #[serde(rename = "plain+gapsafe")]
    PlainGapSafe,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::BlitzWs, Arm::Plain, Arm::PlainBlitzScreen, Arm::PlainGapSafe];

    pub fn name(self) -> &'static str {
        match self {
            Arm::BlitzWs => "blitzws",
            Arm::Plain => "plain",
            Arm::PlainBlitzScreen => "plain+blitzscreen",
            Arm::PlainGapSafe => "plain+gapsafe",
        }
    }

    fn screen(self) -> ScreenRule {
        match self {
            Arm::PlainBlitzScreen => ScreenRule::Blitz,
            Arm::PlainGapSafe => ScreenRule::GapSafe,
            _ => ScreenRule::Off,
        }
    }
}

/// Regularization: λ, λ as a fraction of λ_max, or the SVM's C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Reg {
    Lambda(f64),
    Ratio(f64),
    C(f64),
}

/// Data after preprocessing, ready to become an instance.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub task: Task,
    pub dataset: Dataset,
    pub groups: Option<Vec<Vec<usize>>>,
    pub bias: bool,
    pub options: PreprocessOptions,
    /// Back-translation to the original columns.
    pub kept: Vec<usize>,
    pub scales: Vec<f64>,
    pub n_original: usize,
}

/// Preprocesses `ds` for `task`: pruning and unit variance per column; group
/// tasks then rescale each group, and classification labels map to ±1.
pub fn prepare(
    task: Task,
    ds: &Dataset,
    groups: Option<&[Vec<usize>]>,
    options: PreprocessOptions,
    bias: bool,
) -> Result<Prepared> {
    let pre = preprocess(&ds.data, &options)?;
    if pre.data.n_cols() == 0 {
        return config("no columns left after preprocessing");
    }
    let mut labels = ds.labels.clone();
    if matches!(task, Task::Logreg | Task::Svm) {
        if labels.iter().any(|b| b.abs() != 1.0) {
            log::warn!("labels mapped to ±1 by sign (> 0 is positive)");
        }
        labels.iter_mut().for_each(|b| *b = if *b > 0.0 { 1.0 } else { -1.0 });
    }
    if task == Task::Svm && bias {
        return config("the svm task has no bias term; use a bias column instead");
    }
    let mut data = pre.data.clone();
    let mut scales = pre.scales.clone();
    let groups = match (task, groups) {
        (Task::Grouplasso, Some(g)) => {
            let mut g = pre.remap_groups(g);
            if options.bias_column {
                g.push(vec![data.n_cols() - 1]);
            }
            let (d, s) = standardize_groups(&data, &g);
            for (gi, grp) in g.iter().enumerate() {
                for &j in grp {
                    if j < scales.len() {
                        scales[j] *= s[gi];
                    }
                }
            }
            data = d;
            Some(g)
        }
        (Task::Grouplasso, None) => return config("grouplasso needs groups"),
        _ => None,
    };
    Ok(Prepared {
        task,
        dataset: Dataset { data, labels },
        groups,
        bias,
        options,
        kept: pre.kept,
        scales,
        n_original: pre.n_original,
    })
}

#[derive(Debug, Clone)]
pub enum Model {
    L1(L1Dual),
    Group(GroupDual),
    Svm(SvmPrimal),
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub task: Task,
    pub model: Model,
    /// λ, or C for `svm`.
    pub value: f64,
    pub lambda_max: Option<f64>,
    /// Hash of (data, task, value, preprocessing flags).
    pub key: String,
}

impl Instance {
    pub fn problem(&self) -> &PiecewiseProblem {
        match &self.model {
            Model::L1(m) => &m.problem,
            Model::Group(m) => &m.problem,
            Model::Svm(m) => &m.problem,
        }
    }

    pub fn start(&self) -> Vec<f64> {
        vec![0.0; self.problem().dim()]
    }

    pub fn set_exec(&mut self, exec: Exec) {
        match &mut self.model {
            Model::L1(m) => m.problem.set_exec(exec),
            Model::Group(m) => m.problem.set_exec(exec),
            Model::Svm(m) => m.problem.set_exec(exec),
        }
    }
}

/// Thread count from `BLITZ_THREADS`; unset or unparsable means the rayon
/// default.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("BLITZ_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// `BLITZ_THREADS=1` runs every scan on the calling thread.
pub fn exec_from_env() -> Exec {
    match threads_from_env() {
        Some(1) => Exec::Sequential,
        _ => Exec::Parallel,
    }
}

/// Sizes the global rayon pool from `BLITZ_THREADS`. Later calls are no-ops.
pub fn init_threads() {
    if let Some(n) = threads_from_env() {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("rayon pool already initialized");
        }
    }
}

pub fn lambda_max(p: &Prepared) -> Result<Option<f64>> {
    let d = &p.dataset;
    Ok(match p.task {
        Task::Lasso => Some(compute_lambda_max(&d.data, &d.labels, LossKind::Squared, p.bias)?),
        Task::Logreg => Some(compute_lambda_max(&d.data, &d.labels, LossKind::Logistic, p.bias)?),
        Task::Grouplasso => Some(group_lambda_max(&d.data, &d.labels, p.groups.as_ref().unwrap(), p.bias)),
        Task::Svm => None,
    })
}

pub fn build_instance(p: &Prepared, reg: Reg) -> Result<Instance> {
    let lmax = lambda_max(p)?;
    let value = match (p.task, reg) {
        (Task::Svm, Reg::C(c)) => c,
        (Task::Svm, _) => return config("svm takes --C"),
        (_, Reg::C(_)) => return config(format!("{} takes --lambda or --lambda-ratio", p.task.name())),
        (_, Reg::Lambda(l)) => l,
        (_, Reg::Ratio(r)) => {
            if !(r > 0.0) {
                return config("lambda ratio must be positive");
            }
            r * lmax.unwrap()
        }
    };
    if !(value > 0.0 && value.is_finite()) {
        return config(format!("regularization must be positive, got {value}"));
    }
    let d = &p.dataset;
    let model = match p.task {
        Task::Lasso => Model::L1(build_l1_dual(&d.data, &d.labels, LossKind::Squared, value, p.bias)?),
        Task::Logreg => Model::L1(build_l1_dual(&d.data, &d.labels, LossKind::Logistic, value, p.bias)?),
        Task::Grouplasso => {
            Model::Group(build_group_dual(&d.data, &d.labels, p.groups.clone().unwrap(), value, p.bias)?)
        }
        Task::Svm => Model::Svm(build_svm_primal(&d.rows(), &d.labels, d.n_cols(), value, false)?),
    };
    let mut h = format_libsvm(d);
    if let Some(g) = &p.groups {
        h.push_str("#groups\n");
        h.push_str(&format_groups(g));
    }
    h.push_str(&format!(
        "#task {} value {:016x} bias {} prep {}\n",
        p.task.name(),
        value.to_bits(),
        p.bias,
        serde_json::to_string(&p.options)?
    ));
    let mut inst = Instance { task: p.task, model, value, lambda_max: lmax, key: sha256_hex(h.as_bytes()) };
    inst.set_exec(exec_from_env());
    Ok(inst)
}

/// Solver-side readout of the model objective and solution.
pub trait Readout: SubproblemSolver + Sized {
    fn make(problem: &PiecewiseProblem) -> Result<Self>;
    /// `(w, bias)` in the model's columns.
    fn solution(&self, inst: &Instance, y: &[f64]) -> (Vec<f64>, f64);
    fn objective(&self, inst: &Instance, y: &[f64]) -> f64 {
        let (w, b) = self.solution(inst, y);
        model_objective(inst, &w, b, y)
    }
}

fn model_objective(inst: &Instance, w: &[f64], b: f64, y: &[f64]) -> f64 {
    match &inst.model {
        Model::L1(m) => m.primal_objective(w, b),
        Model::Group(m) => m.primal_objective(w, b),
        Model::Svm(m) => m.problem.evaluate_full(y).unwrap_or(f64::INFINITY),
    }
}

impl Readout for DualCd {
    fn make(problem: &PiecewiseProblem) -> Result<Self> {
        Ok(DualCd::new(problem)?)
    }

    fn solution(&self, inst: &Instance, y: &[f64]) -> (Vec<f64>, f64) {
        match &inst.model {
            Model::L1(m) => m.primal_from_slopes(self.slopes()),
            Model::Group(m) => m.primal_from_slopes(self.slopes()),
            Model::Svm(_) => (y.to_vec(), 0.0),
        }
    }
}

impl Readout for ProxNewton {
    fn make(problem: &PiecewiseProblem) -> Result<Self> {
        Ok(ProxNewton::new(problem)?)
    }

    fn solution(&self, inst: &Instance, y: &[f64]) -> (Vec<f64>, f64) {
        match &inst.model {
            Model::L1(m) => (self.omega()[..m.n_features()].to_vec(), self.bias()),
            _ => (y.to_vec(), 0.0),
        }
    }

    fn objective(&self, inst: &Instance, y: &[f64]) -> f64 {
        match &inst.model {
            Model::L1(_) => self.primal_objective(inst.problem()),
            _ => model_objective(inst, y, 0.0, y),
        }
    }
}

impl Readout for Dca {
    fn make(problem: &PiecewiseProblem) -> Result<Self> {
        Ok(Dca::new(problem)?)
    }

    fn solution(&self, _inst: &Instance, y: &[f64]) -> (Vec<f64>, f64) {
        (y.to_vec(), 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub key: String,
    pub task: Task,
    pub value: f64,
    /// Certified lower bound on the optimal model objective.
    pub g_star: f64,
    /// Best model objective found by the reference solve.
    pub g_best: f64,
    pub gap: f64,
    pub solver: String,
}

pub const REFERENCE_TOL: f64 = 1e-12;

fn reference_from<S: Readout>(inst: &Instance, y: &[f64], f_y: f64, lb: f64, solver: &S, how: &str) -> Reference {
    let g_best = solver.objective(inst, y);
    // ℓ1 and group models solve the dual: g⋆ = −f⋆ ≥ −f(y)
    let g_star = match inst.model {
        Model::Svm(_) => lb,
        _ => -f_y,
    };
    Reference {
        key: inst.key.clone(),
        task: inst.task,
        value: inst.value,
        g_star,
        g_best,
        gap: f_y - lb,
        solver: how.into(),
    }
}

fn solve_reference_with<S: Readout>(inst: &Instance) -> Result<Reference> {
    let p = inst.problem();
    let cfg = PlainConfig { rel_tol: REFERENCE_TOL, max_passes: 200_000, ..Default::default() };
    let mut plain = PlainRunner::new(p, S::make(p)?, inst.start(), cfg)?;
    let st = plain.run()?;
    if plain.converged() {
        return Ok(reference_from(inst, plain.y(), st.f_y, st.lb_value, plain.solver(), "plain"));
    }
    let plain_gap = st.gap;
    let cfg = EngineConfig { rel_tol: REFERENCE_TOL, time_limits: false, max_iterations: 5000, ..Default::default() };
    let mut e = Engine::new(p, S::make(p)?, inst.start(), cfg)?;
    e.run()?;
    let s = e.state();
    if e.converged() {
        return Ok(reference_from(inst, &s.y, s.f_y, s.lb_value, e.solver(), "blitzws"));
    }
    Err(HarnessError::Reference(format!(
        "{} at {}: plain gap {:e} after {} passes, blitzws gap {:e} after {} iterations (f = {})",
        inst.task.name(),
        inst.value,
        plain_gap,
        st.passes,
        s.gap,
        s.t,
        s.f_y
    )))
}

pub fn solve_reference(inst: &Instance) -> Result<Reference> {
    match inst.task {
        Task::Lasso | Task::Grouplasso => solve_reference_with::<DualCd>(inst),
        Task::Logreg => solve_reference_with::<ProxNewton>(inst),
        Task::Svm => solve_reference_with::<Dca>(inst),
    }
}

/// Loads `<dir>/<key>.json` or solves and stores it.
pub fn cached_reference(inst: &Instance, dir: Option<&Path>) -> Result<Reference> {
    let Some(dir) = dir else { return solve_reference(inst) };
    let path = dir.join(format!("{}.json", inst.key));
    if let Ok(text) = std::fs::read_to_string(&path) {
        match serde_json::from_str::<Reference>(&text) {
            Ok(r) if r.key == inst.key => return Ok(r),
            _ => log::warn!("ignoring unreadable reference cache entry {}", path.display()),
        }
    }
    let r = solve_reference(inst)?;
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    std::fs::write(&path, serde_json::to_string_pretty(&r)? + "\n").map_err(|e| HarnessError::io(&path, e))?;
    Ok(r)
}

/// One convergence record; field order is fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    /// Outer iteration (blitzws) or pass (plain arms).
    pub t: usize,
    pub wall_seconds: f64,
    pub rel_subopt: f64,
    pub ws_size: usize,
    pub xi: Option<f64>,
    pub eps: Option<f64>,
    pub screened_count: usize,
    /// `null` before the first certificate.
    #[serde(with = "inf_as_null")]
    pub gap: f64,
    /// Σ NNZ over coordinate updates so far.
    pub work: u64,
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub task: Task,
    pub arm: Arm,
    pub value: f64,
    pub lambda_max: Option<f64>,
    pub steps: usize,
    pub wall_seconds: f64,
    pub objective: f64,
    pub g_star: f64,
    pub rel_subopt: f64,
    pub gap: f64,
    pub work: u64,
    /// Work when rel_subopt first reached 1e-6.
    pub work_to_1e6: Option<u64>,
    pub screened_count: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct ArmRun {
    pub records: Vec<LogRecord>,
    pub summary: Summary,
    pub w: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmOptions {
    /// Relative certified gap at which the arm stops.
    pub tol: f64,
    pub max_seconds: f64,
    pub max_steps: usize,
    /// Plain arms screen every this many passes.
    pub screen_every: usize,
    /// BlitzWS subproblem time limits from the tuner.
    pub time_limits: bool,
}

impl Default for ArmOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_seconds: 600.0, max_steps: 1_000_000, screen_every: 5, time_limits: true }
    }
}

/// Solver wall time, excluding readout.
struct Clock {
    total: f64,
    last: f64,
}

impl Clock {
    fn add(&mut self, since: Instant) -> f64 {
        self.total += since.elapsed().as_secs_f64();
        // a coarse clock could repeat a reading
        if self.total <= self.last {
            self.total = self.last + 1e-9;
        }
        self.last = self.total;
        self.total
    }
}

struct Tracker<'a> {
    inst: &'a Instance,
    reference: &'a Reference,
    best: f64,
    records: Vec<LogRecord>,
    work_to_1e6: Option<u64>,
}

impl<'a> Tracker<'a> {
    fn rel(&self, g: f64) -> f64 {
        ((g - self.reference.g_star) / self.reference.g_star.abs().max(f64::MIN_POSITIVE)).max(0.0)
    }

    fn push(&mut self, g: f64, mut rec: LogRecord) {
        self.best = self.best.min(g);
        rec.rel_subopt = self.rel(self.best);
        if rec.rel_subopt <= 1e-6 && self.work_to_1e6.is_none() {
            self.work_to_1e6 = Some(rec.work);
        }
        self.records.push(rec);
    }

    fn finish(self, arm: Arm, steps: usize, gap: f64, screened: usize, converged: bool, w: Vec<f64>, bias: f64) -> ArmRun {
        let last = self.records.last().cloned().expect("at least the initial record");
        let summary = Summary {
            task: self.inst.task,
            arm,
            value: self.inst.value,
            lambda_max: self.inst.lambda_max,
            steps,
            wall_seconds: last.wall_seconds,
            objective: self.best,
            g_star: self.reference.g_star,
            rel_subopt: last.rel_subopt,
            gap,
            work: last.work,
            work_to_1e6: self.work_to_1e6,
            screened_count: screened,
            converged,
        };
        ArmRun { records: self.records, summary, w, bias }
    }
}

fn run_engine<S: Readout>(inst: &Instance, reference: &Reference, opts: &ArmOptions) -> Result<ArmRun> {
    let p = inst.problem();
    let mut clock = Clock { total: 0.0, last: -1.0 };
    let t0 = Instant::now();
    let cfg = EngineConfig { rel_tol: opts.tol, time_limits: opts.time_limits, ..Default::default() };
    let mut e = Engine::new(p, S::make(p)?, inst.start(), cfg)?;
    let mut wall = clock.add(t0);
    let mut tr = Tracker { inst, reference, best: f64::INFINITY, records: Vec::new(), work_to_1e6: None };
    let g = e.solver().objective(inst, &e.state().y);
    let rec = |t, wall, ws, xi, eps, gap, work| LogRecord {
        t,
        wall_seconds: wall,
        rel_subopt: 0.0,
        ws_size: ws,
        xi,
        eps,
        screened_count: 0,
        gap,
        work,
    };
    tr.push(g, rec(0, wall, p.n_terms(), None, None, e.state().gap, e.work()));
    while e.state().t < opts.max_steps && wall < opts.max_seconds {
        let t1 = Instant::now();
        let Some(log) = e.step()? else { break };
        wall = clock.add(t1);
        let g = e.solver().objective(inst, &e.state().y);
        tr.push(g, rec(log.t, wall, log.ws_size, Some(log.xi), Some(log.eps), log.gap, e.work()));
    }
    let s = e.state();
    let (w, b) = e.solver().solution(inst, &s.y);
    let (t, gap, conv) = (s.t, s.gap, e.converged());
    Ok(tr.finish(Arm::BlitzWs, t, gap, 0, conv, w, b))
}

fn run_plain<S: Readout>(inst: &Instance, reference: &Reference, arm: Arm, opts: &ArmOptions) -> Result<ArmRun> {
    let p = inst.problem();
    let mut clock = Clock { total: 0.0, last: -1.0 };
    let t0 = Instant::now();
    let cfg = PlainConfig { rel_tol: opts.tol, max_passes: opts.max_steps, screen: arm.screen(), screen_every: opts.screen_every };
    let mut r = PlainRunner::new(p, S::make(p)?, inst.start(), cfg)?;
    let mut wall = clock.add(t0);
    let mut tr = Tracker { inst, reference, best: f64::INFINITY, records: Vec::new(), work_to_1e6: None };
    let g = r.solver().objective(inst, r.y());
    tr.push(
        g,
        LogRecord {
            t: 0,
            wall_seconds: wall,
            rel_subopt: 0.0,
            ws_size: p.n_terms(),
            xi: None,
            eps: None,
            screened_count: 0,
            gap: r.status().gap,
            work: 0,
        },
    );
    while r.status().passes < opts.max_steps && wall < opts.max_seconds && !r.converged() {
        let t1 = Instant::now();
        let st = r.step()?;
        wall = clock.add(t1);
        let g = r.solver().objective(inst, r.y());
        tr.push(
            g,
            LogRecord {
                t: st.passes,
                wall_seconds: wall,
                rel_subopt: 0.0,
                ws_size: p.n_terms() - st.screened,
                xi: None,
                eps: None,
                screened_count: st.screened,
                gap: st.gap,
                work: st.work,
            },
        );
    }
    let st = r.status();
    let (w, b) = r.solver().solution(inst, r.y());
    let conv = r.converged();
    Ok(tr.finish(arm, st.passes, st.gap, st.screened, conv, w, b))
}

pub fn run_arm(inst: &Instance, reference: &Reference, arm: Arm, opts: &ArmOptions) -> Result<ArmRun> {
    fn go<S: Readout>(inst: &Instance, r: &Reference, arm: Arm, o: &ArmOptions) -> Result<ArmRun> {
        match arm {
            Arm::BlitzWs => run_engine::<S>(inst, r, o),
            _ => run_plain::<S>(inst, r, arm, o),
        }
    }
    match inst.task {
        Task::Lasso | Task::Grouplasso => go::<DualCd>(inst, reference, arm, opts),
        Task::Logreg => go::<ProxNewton>(inst, reference, arm, opts),
        Task::Svm => go::<Dca>(inst, reference, arm, opts),
    }
}

pub fn write_jsonl(path: &Path, records: &[LogRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n").map_err(|e| HarnessError::io(path, e))?;
    }
    f.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<LogRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| Ok(serde_json::from_str(l)?)).collect()
}

pub fn summary_table(rows: &[Summary]) -> String {
    let mut out = format!(
        "{:<11} {:<18} {:>11} {:>7} {:>10} {:>11} {:>11} {:>12} {:>9} {:>5}\n",
        "task", "arm", "value", "steps", "wall_s", "rel_subopt", "gap", "work", "screened", "conv"
    );
    for s in rows {
        out.push_str(&format!(
            "{:<11} {:<18} {:>11.4e} {:>7} {:>10.4} {:>11.3e} {:>11.3e} {:>12} {:>9} {:>5}\n",
            s.task.name(),
            s.arm.name(),
            s.value,
            s.steps,
            s.wall_seconds,
            s.rel_subopt,
            s.gap,
            s.work,
            s.screened_count,
            if s.converged { "yes" } else { "no" }
        ));
    }
    out
}

/// Where the data comes from: a libsvm file or a seeded fixture.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File { path: PathBuf, groups: Option<PathBuf> },
    Synthetic(crate::fixtures::FixtureSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub data: DataSource,
    pub reg: Reg,
    pub arms: Vec<Arm>,
    pub options: ArmOptions,
    pub preprocess: PreprocessOptions,
    pub bias: bool,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

pub struct BenchOutput {
    pub instance: Instance,
    pub prepared: Prepared,
    pub reference: Reference,
    pub runs: Vec<ArmRun>,
}

impl BenchOutput {
    pub fn summaries(&self) -> Vec<Summary> {
        self.runs.iter().map(|r| r.summary.clone()).collect()
    }
}

pub fn load_data(source: &DataSource) -> Result<(Dataset, Option<Vec<Vec<usize>>>)> {
    match source {
        DataSource::File { path, groups } => {
            let ds = crate::libsvm::read_libsvm(path)?;
            let groups = match groups {
                Some(g) => {
                    let text = std::fs::read_to_string(g).map_err(|e| HarnessError::io(g, e))?;
                    Some(crate::libsvm::parse_groups(&text)?)
                }
                None => None,
            };
            Ok((ds, groups))
        }
        DataSource::Synthetic(spec) => {
            let fx = crate::fixtures::make_fixture(spec)?;
            Ok((fx.dataset, fx.groups))
        }
    }
}

/// Runs every configured arm against one cached reference and writes
/// `<task>_<arm>.jsonl`, `summary.json` and `summary.txt` under `out`.
pub fn run_benchmark(cfg: &RunConfig) -> Result<BenchOutput> {
    let (ds, groups) = load_data(&cfg.data)?;
    let prepared = prepare(cfg.task, &ds, groups.as_deref(), cfg.preprocess, cfg.bias)?;
    let instance = build_instance(&prepared, cfg.reg)?;
    let reference = cached_reference(&instance, cfg.cache_dir.as_deref())?;
    let mut runs = Vec::new();
    for &arm in &cfg.arms {
        log::info!("{} {} at {:.4e}", cfg.task.name(), arm.name(), instance.value);
        runs.push(run_arm(&instance, &reference, arm, &cfg.options)?);
    }
    let out = BenchOutput { instance, prepared, reference, runs };
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        for r in &out.runs {
            let name = format!("{}_{}.jsonl", cfg.task.name(), r.summary.arm.name());
            write_jsonl(&dir.join(name), &r.records)?;
        }
        let sums = out.summaries();
        let p = dir.join("summary.json");
        std::fs::write(&p, serde_json::to_string_pretty(&sums)? + "\n").map_err(|e| HarnessError::io(&p, e))?;
        let p = dir.join("summary.txt");
        std::fs::write(&p, summary_table(&sums)).map_err(|e| HarnessError::io(&p, e))?;
    }
    Ok(out)
}

/// Blitz and GapSafe regions built from the same certificate after `passes`
/// unscreened passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenReport {
    pub task: Task,
    pub value: f64,
    pub passes: usize,
    pub gap: f64,
    pub n_terms: usize,
    pub blitz_screened: usize,
    pub gapsafe_screened: usize,
    pub blitz_radius: f64,
    pub gapsafe_radius: f64,
    /// GapSafe radius over Blitz radius; `null` when the Blitz ball is a point.
    #[serde(with = "inf_as_null")]
    pub radius_ratio: f64,
}

pub fn screen_report(inst: &Instance, passes: usize) -> Result<ScreenReport> {
    fn go<S: Readout>(inst: &Instance, passes: usize) -> Result<ScreenReport> {
        let p = inst.problem();
        let cfg = PlainConfig { rel_tol: 0.0, max_passes: passes.max(1), screen: ScreenRule::Off, screen_every: 1 };
        let mut r = PlainRunner::new(p, S::make(p)?, inst.start(), cfg)?;
        let st = r.run()?;
        let cert = r.last_certificate().ok_or_else(|| HarnessError::Config("no certificate".into()))?;
        let f_y = p.evaluate_full(r.y())?;
        let b = SafeRegion::from_certificate(&cert.x, cert.lb_value, r.y(), f_y, RegionKind::Blitz)?;
        let g = SafeRegion::from_certificate(&cert.x, cert.lb_value, r.y(), f_y, RegionKind::GapSafe)?;
        Ok(ScreenReport {
            task: inst.task,
            value: inst.value,
            passes: st.passes,
            gap: st.gap,
            n_terms: p.n_terms(),
            blitz_screened: blitz_screen(p, &b)?.screened,
            gapsafe_screened: blitz_screen(p, &g)?.screened,
            blitz_radius: b.radius,
            gapsafe_radius: g.radius,
            radius_ratio: if b.radius > 0.0 { g.radius / b.radius } else { f64::INFINITY },
        })
    }
    match inst.task {
        Task::Lasso | Task::Grouplasso => go::<DualCd>(inst, passes),
        Task::Logreg => go::<ProxNewton>(inst, passes),
        Task::Svm => go::<Dca>(inst, passes),
    }
}
