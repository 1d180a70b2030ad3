//! The four subcommands and the artifact layout they share.
//!
//! An artifact directory holds `config.toml` (the normalised config),
//! `summary.csv`, and one `eps_<i>/` directory per epsilon with
//! `trajectory.csv`, `balance.csv`, `curve.csv`, `timeline.csv`,
//! `jumps.txt`, `transition_<j>.csv` and `bv.txt`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mrbv::bv_analysis::{write_jump_report, write_timeline, BvReport, JumpRecord, RegimeLabel};
use mrbv::pipeline::{analyze_curve, run_eps, CurveAnalysis, EpsRun};
use mrbv::probes;
use mrbv::rescale::ParamCurve;
use mrbv::viscous_solver::{apriori_stats, ed_balance_residual, fmt_num, Trajectory};

use crate::config::{ConfigError, ExperimentConfig};

/// Failure of a subcommand, mapped onto the exit codes.
#[derive(Debug)]
pub enum Failure {
    /// exit 1: bad config, missing inputs
    Config(String),
    /// exit 2: solver, analysis or output failure
    Run(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Run(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Run(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(format!("config error at {e}"))
    }
}

fn run_err(what: impl std::fmt::Display) -> Failure {
    Failure::Run(what.to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| run_err(format!("{}: {e}", path.display())))
}

pub fn eps_dir(root: &Path, i: usize) -> PathBuf {
    root.join(format!("eps_{i}"))
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub eps: f64,
    pub tau: f64,
    pub steps: usize,
    pub length: f64,
    pub u_l1: f64,
    pub r_var: f64,
    pub balance_residual: f64,
    pub bv_balance_residual: f64,
    pub stationarity_max: f64,
    pub jumps: usize,
    pub max_jump_gap: f64,
    pub violations: usize,
    pub variation: f64,
    pub m0_integral: f64,
}

pub const SUMMARY_HEADER: [&str; 14] = [
    "eps",
    "tau",
    "steps",
    "S_eps",
    "u_L1",
    "R_var",
    "balance_residual",
    "bv_balance_residual",
    "stationarity_max",
    "jumps",
    "max_jump_gap",
    "violations",
    "variation",
    "m0_integral",
];

impl SummaryRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            fmt_num(self.eps),
            fmt_num(self.tau),
            self.steps.to_string(),
            fmt_num(self.length),
            fmt_num(self.u_l1),
            fmt_num(self.r_var),
            fmt_num(self.balance_residual),
            fmt_num(self.bv_balance_residual),
            fmt_num(self.stationarity_max),
            self.jumps.to_string(),
            fmt_num(self.max_jump_gap),
            self.violations.to_string(),
            fmt_num(self.variation),
            fmt_num(self.m0_integral),
        ]
    }

    fn from_run(run: &EpsRun) -> Self {
        Self {
            eps: run.eps,
            tau: run.tau,
            steps: run.trajectory.len() - 1,
            length: run.curve.length(),
            u_l1: run.apriori.u_l1,
            r_var: run.apriori.r_var,
            balance_residual: run.balance.total(),
            bv_balance_residual: run.bv.balance_residual,
            stationarity_max: run.bv.stationarity_max,
            jumps: run.jumps.len(),
            max_jump_gap: max_gap(&run.bv),
            violations: run.violations(),
            variation: run.variation,
            m0_integral: run.m0_integral,
        }
    }
}

fn max_gap(bv: &BvReport) -> f64 {
    bv.jump_gaps.iter().copied().fold(0.0, f64::max)
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>, Failure> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| run_err(format!("{}: {e}", path.display())))?;
        let f = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok()).unwrap_or(f64::NAN);
        let u = |i: usize| rec.get(i).and_then(|s| s.parse::<usize>().ok()).unwrap_or(0);
        rows.push(SummaryRow {
            eps: f(0),
            tau: f(1),
            steps: u(2),
            length: f(3),
            u_l1: f(4),
            r_var: f(5),
            balance_residual: f(6),
            bv_balance_residual: f(7),
            stationarity_max: f(8),
            jumps: u(9),
            max_jump_gap: f(10),
            violations: u(11),
            variation: f(12),
            m0_integral: f(13),
        });
    }
    Ok(rows)
}

fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<(), Failure> {
    let mut wr = csv::Writer::from_writer(create(path)?);
    wr.write_record(SUMMARY_HEADER).map_err(run_err)?;
    for r in rows {
        wr.write_record(r.record()).map_err(run_err)?;
    }
    wr.flush().map_err(run_err)
}

fn write_bv(path: &Path, a: &CurveAnalysis) -> Result<(), Failure> {
    let mut w = create(path)?;
    let gaps: Vec<String> = a.bv.jump_gaps.iter().map(|g| fmt_num(*g)).collect();
    let rel = (a.variation - a.m0_integral).abs() / a.variation.abs().max(f64::MIN_POSITIVE);
    let text = format!(
        "stationarity_max = {}\nstability_max = {}\nbalance_residual = {}\njump_gaps = {}\nvariation = {}\nm0_integral = {}\nvariation_vs_m0 = {}\n",
        fmt_num(a.bv.stationarity_max),
        fmt_num(a.bv.stability_max),
        fmt_num(a.bv.balance_residual),
        gaps.join(" "),
        fmt_num(a.variation),
        fmt_num(a.m0_integral),
        fmt_num(rel),
    );
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(run_err)
}

fn write_analysis(dir: &Path, curve: &ParamCurve, a: &CurveAnalysis) -> Result<(), Failure> {
    write_timeline(create(&dir.join("timeline.csv"))?, curve, &a.classes).map_err(run_err)?;
    write_jump_report(create(&dir.join("jumps.txt"))?, &a.jumps).map_err(run_err)?;
    write_transitions(dir, &a.jumps)?;
    write_bv(&dir.join("bv.txt"), a)
}

fn write_transitions(dir: &Path, jumps: &[JumpRecord]) -> Result<(), Failure> {
    for (j, rec) in jumps.iter().enumerate() {
        if let Some(f) = &rec.finsler {
            f.curve.write_csv(create(&dir.join(format!("transition_{j}.csv")))?).map_err(run_err)?;
        }
    }
    Ok(())
}

fn write_balance(path: &Path, tr: &Trajectory, per_step: &[f64], cumulative: &[f64]) -> Result<(), Failure> {
    let mut wr = csv::Writer::from_writer(create(path)?);
    wr.write_record(["t", "residual", "cumulative"]).map_err(run_err)?;
    for k in 0..tr.len() {
        wr.write_record([fmt_num(tr.t[k]), fmt_num(per_step[k]), fmt_num(cumulative[k])]).map_err(run_err)?;
    }
    wr.flush().map_err(run_err)
}

fn write_run(dir: &Path, run: &EpsRun) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| run_err(format!("{}: {e}", dir.display())))?;
    run.trajectory.write_csv(create(&dir.join("trajectory.csv"))?).map_err(run_err)?;
    write_balance(&dir.join("balance.csv"), &run.trajectory, &run.balance.per_step, &run.balance.cumulative)?;
    run.curve.write_csv(create(&dir.join("curve.csv"))?).map_err(run_err)?;
    let a = CurveAnalysis {
        tolerances: run.tolerances,
        jumps: run.jumps.clone(),
        classes: run.classes.clone(),
        bv: run.bv.clone(),
        variation: run.variation,
        m0_integral: run.m0_integral,
    };
    write_analysis(dir, &run.curve, &a)
}

/// `solve <config>`: the epsilon sweep. Each epsilon writes its own
/// directory as soon as it finishes; the summary lists the successful runs.
pub fn solve(config_path: &Path) -> Result<PathBuf, Failure> {
    let cfg = ExperimentConfig::load(config_path)?;
    let system = cfg.system()?;
    let settings = cfg.settings();
    let root = config_path.parent().unwrap_or(Path::new(".")).join(&cfg.out_dir);
    fs::create_dir_all(&root).map_err(|e| Failure::Config(format!("out_dir: cannot create {}: {e}", root.display())))?;
    fs::write(root.join("config.toml"), cfg.to_toml()).map_err(|e| Failure::Config(format!("out_dir: cannot write: {e}")))?;
    let jobs: Vec<(usize, f64)> = cfg.eps.iter().copied().enumerate().collect();
    let results = mrbv::par::map(&jobs, |&(i, eps)| {
        log::info!("eps = {eps}: solving");
        let run = run_eps(&system, &settings, eps).map_err(|e| format!("eps = {eps}: {e}"))?;
        write_run(&eps_dir(&root, i), &run).map_err(|e| format!("eps = {eps}: {}", e.message()))?;
        log::info!("eps = {eps}: {} steps, {} jumps", run.trajectory.len() - 1, run.jumps.len());
        Ok::<_, String>(SummaryRow::from_run(&run))
    });
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => errors.push(e),
        }
    }
    write_summary(&root.join("summary.csv"), &rows)?;
    if errors.is_empty() {
        Ok(root)
    } else {
        Err(Failure::Run(errors.join("\n")))
    }
}

fn require(paths: &[PathBuf]) -> Result<(), Failure> {
    let missing: Vec<String> = paths.iter().filter(|p| !p.is_file()).map(|p| p.display().to_string()).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Failure::Config(format!("missing inputs:\n  {}", missing.join("\n  "))))
    }
}

fn open_config(dir: &Path) -> Result<ExperimentConfig, Failure> {
    require(&[dir.join("config.toml")])?;
    Ok(ExperimentConfig::load(&dir.join("config.toml"))?)
}

fn read_trajectory(path: &Path, eps: f64, alpha: f64) -> Result<Trajectory, Failure> {
    let f = File::open(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Trajectory::read_csv(std::io::BufReader::new(f), eps, alpha).map_err(|e| run_err(format!("{}: {e}", path.display())))
}

fn read_curve(path: &Path, eps: f64, alpha: f64) -> Result<ParamCurve, Failure> {
    let f = File::open(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    ParamCurve::read_csv(std::io::BufReader::new(f), eps, alpha).map_err(|e| run_err(format!("{}: {e}", path.display())))
}

/// `analyze <dir>`: recomputes every check from the stored trajectories and
/// curves (with the tolerances currently in `config.toml`), rewrites the
/// per-epsilon reports and `summary.csv`, and prints the summary.
pub fn analyze(dir: &Path) -> Result<Vec<SummaryRow>, Failure> {
    let cfg = open_config(dir)?;
    let system = cfg.system()?;
    let settings = cfg.settings();
    let inputs: Vec<PathBuf> =
        (0..cfg.eps.len()).flat_map(|i| ["trajectory.csv", "curve.csv"].map(|f| eps_dir(dir, i).join(f))).collect();
    require(&inputs)?;
    let jobs: Vec<(usize, f64)> = cfg.eps.iter().copied().enumerate().collect();
    let rows = mrbv::par::map(&jobs, |&(i, eps)| {
        let sub = eps_dir(dir, i);
        let tr = read_trajectory(&sub.join("trajectory.csv"), eps, cfg.alpha)?;
        let curve = read_curve(&sub.join("curve.csv"), eps, cfg.alpha)?;
        let a = analyze_curve(&system, &settings, &curve).map_err(|e| run_err(format!("eps = {eps}: {e}")))?;
        write_analysis(&sub, &curve, &a)?;
        let balance = ed_balance_residual(&tr, system.energy.as_ref());
        let ap = apriori_stats(&tr, &system);
        Ok(SummaryRow {
            eps,
            tau: settings.tau_for(eps),
            steps: tr.len() - 1,
            length: curve.length(),
            u_l1: ap.u_l1,
            r_var: ap.r_var,
            balance_residual: balance.total(),
            bv_balance_residual: a.bv.balance_residual,
            stationarity_max: a.bv.stationarity_max,
            jumps: a.jumps.len(),
            max_jump_gap: max_gap(&a.bv),
            violations: a.classes.iter().filter(|c| c.label.violates(cfg.alpha)).count(),
            variation: a.variation,
            m0_integral: a.m0_integral,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, Failure>>()?;
    write_summary(&dir.join("summary.csv"), &rows)?;
    Ok(rows)
}

/// Long-format writer for `series,x,y` files.
struct Tidy {
    wr: csv::Writer<BufWriter<File>>,
}

impl Tidy {
    fn new(path: &Path) -> Result<Self, Failure> {
        let mut wr = csv::Writer::from_writer(create(path)?);
        wr.write_record(["series", "x", "y"]).map_err(run_err)?;
        Ok(Self { wr })
    }

    fn row(&mut self, series: &str, x: f64, y: f64) -> Result<(), Failure> {
        self.wr.write_record([series, &fmt_num(x), &fmt_num(y)]).map_err(run_err)
    }

    fn finish(mut self) -> Result<(), Failure> {
        self.wr.flush().map_err(run_err)
    }
}

/// Plot files written by [`plotdata`].
pub const PLOT_FILES: [&str; 4] = ["tu.csv", "tz.csv", "staircase.csv", "regimes.csv"];

/// `plotdata <dir>`: tidy `series,x,y` files under `<dir>/plotdata/`:
/// (t, u_i) and (t, z_i) per epsilon, the (s, t(s)) staircase, and the
/// regime ribbon (x = s, y = epsilon index, series = epsilon and label).
pub fn plotdata(dir: &Path) -> Result<PathBuf, Failure> {
    let cfg = open_config(dir)?;
    let inputs: Vec<PathBuf> = (0..cfg.eps.len())
        .flat_map(|i| ["trajectory.csv", "curve.csv", "timeline.csv"].map(|f| eps_dir(dir, i).join(f)))
        .collect();
    require(&inputs)?;
    let out = dir.join("plotdata");
    fs::create_dir_all(&out).map_err(|e| run_err(format!("{}: {e}", out.display())))?;
    let mut tu = Tidy::new(&out.join(PLOT_FILES[0]))?;
    let mut tz = Tidy::new(&out.join(PLOT_FILES[1]))?;
    let mut stair = Tidy::new(&out.join(PLOT_FILES[2]))?;
    let mut ribbon = Tidy::new(&out.join(PLOT_FILES[3]))?;
    for (i, &eps) in cfg.eps.iter().enumerate() {
        let sub = eps_dir(dir, i);
        let tag = format!("eps={}", fmt_num(eps));
        let tr = read_trajectory(&sub.join("trajectory.csv"), eps, cfg.alpha)?;
        for k in 0..tr.len() {
            for (c, x) in tr.u[k].iter().enumerate() {
                tu.row(&format!("{tag}/u_{c}"), tr.t[k], *x)?;
            }
            for (c, x) in tr.z[k].iter().enumerate() {
                tz.row(&format!("{tag}/z_{c}"), tr.t[k], *x)?;
            }
        }
        let curve = read_curve(&sub.join("curve.csv"), eps, cfg.alpha)?;
        for k in 0..curve.len() {
            stair.row(&tag, curve.s[k], curve.t[k])?;
        }
        let path = sub.join("timeline.csv");
        let mut rd = csv::Reader::from_path(&path).map_err(|e| run_err(format!("{}: {e}", path.display())))?;
        for rec in rd.records() {
            let rec = rec.map_err(|e| run_err(format!("{}: {e}", path.display())))?;
            let s: f64 = rec.get(0).and_then(|x| x.parse().ok()).ok_or_else(|| run_err(format!("{}: bad s column", path.display())))?;
            let label = rec.get(1).unwrap_or("");
            if !RegimeLabel::ALL.iter().any(|l| l.to_string() == label) {
                return Err(run_err(format!("{}: unknown label {label:?}", path.display())));
            }
            ribbon.row(&format!("{tag}/{label}"), s, i as f64)?;
        }
    }
    for t in [tu, tz, stair, ribbon] {
        t.finish()?;
    }
    Ok(out)
}

/// `selftest`: the random property suites, one line per suite on `out`.
pub fn selftest<W: Write>(out: &mut W, draws: usize, seed: u64) -> Result<(), Failure> {
    let reports = probes::all_suites(draws, seed);
    for r in &reports {
        let verdict = if r.passed() { "ok" } else { "FAILED" };
        writeln!(out, "{}: {} draws, {} failures, {verdict}", r.name, r.trials, r.failures).map_err(run_err)?;
        if let Some(f) = &r.first_failure {
            writeln!(out, "  first failure: {f}").map_err(run_err)?;
        }
    }
    match reports.iter().filter(|r| !r.passed()).count() {
        0 => Ok(()),
        n => Err(Failure::Run(format!("{n} property suites failed"))),
    }
}
