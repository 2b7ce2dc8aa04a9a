use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crtprune::ascension::AscensionLaw;
use crtprune::dynamics::{mark_tree_at_eta, Growth};
use crtprune::gw::{law_at, GaltonWatson, SpineSampler};
use crtprune::harness::{run_selection, to_json, Config};
use crtprune::metric::Excursion;
use crtprune::rng::stream;
use crtprune::tree::newick::to_newick;
use crtprune::{Error, Mechanism, Result};

#[derive(Parser)]
#[command(name = "crtprune", version, about = "Galton-Watson sub-trees of Levy trees under pruning and sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file, `-` for standard output.
    #[arg(long, default_value = "-")]
    out: String,
    #[arg(long)]
    replicates: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Offspring law and landmarks of the configured mechanism.
    Law(Common),
    /// Galton-Watson trees at pruning time theta (default 0), as Newick.
    Sample(Common),
    /// Trees at q (default 0) pruned to theta (default 1).
    Prune(Common),
    /// Trees at theta (default 1) grown back to q (default 0.5).
    Grow(Common),
    /// Ascension times with the tree at ascension.
    Ascension(Common),
    /// Spine trees at theta (default 1).
    Spine(Common),
    /// GHP bounds between nested excursion trees at lambda 5, 20, 80, 320.
    Ghp(Common),
    /// Run the verification experiments.
    Verify {
        #[command(flatten)]
        common: Common,
        /// E1 to E8, or all.
        #[arg(long)]
        experiment: Option<String>,
    },
}

struct Run {
    cfg: Config,
    seed: u64,
    out: String,
}

impl Run {
    fn new(c: &Common) -> Result<Self> {
        let mut cfg = match &c.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        if let Some(n) = c.replicates {
            if n == 0 {
                return Err(Error::Config("--replicates must be positive".into()));
            }
            cfg.replicates = Some(n);
        }
        let seed = c.seed.unwrap_or(cfg.seed);
        Ok(Run { cfg, seed, out: c.out.clone() })
    }

    fn mechanism(&self) -> Mechanism {
        self.cfg.mechanism.clone().unwrap_or_else(|| Mechanism::quadratic(1.0))
    }

    fn lam(&self) -> f64 {
        self.cfg.lambda.unwrap_or(1.0)
    }

    fn count(&self) -> usize {
        self.cfg.replicates.unwrap_or(1)
    }

    fn write(&self, text: &str) -> Result<()> {
        let io = |e: std::io::Error| Error::Config(format!("{}: {e}", self.out));
        if self.out == "-" {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(io)?;
            stdout.flush().map_err(io)
        } else {
            std::fs::write(&self.out, text).map_err(io)
        }
    }

    fn write_json(&self, v: &Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v).expect("values serialize");
        s.push('\n');
        self.write(&s)
    }

    /// One record per replicate, each on its own stream.
    fn records<F: Fn(&mut crtprune::rng::Rng) -> Result<Value>>(&self, f: F) -> Result<Value> {
        (0..self.count() as u64).map(|i| f(&mut stream(self.seed, i))).collect::<Result<Vec<_>>>().map(Value::Array)
    }
}

fn law(run: &Run) -> Result<()> {
    let mech = run.mechanism();
    let eta = mech.invert(run.lam())?;
    let theta = run.cfg.theta.unwrap_or(0.0);
    let law = law_at(&mech.shift(theta)?, eta, run.cfg.tolerances.tail)?;
    run.write_json(&json!({
        "lambda": run.lam(),
        "theta": theta,
        "eta": eta,
        "landmarks": mech.landmarks(),
        "probs": law.probs(),
        "tail_mass": law.tail_mass(),
        "mean": law.mean(),
    }))
}

fn sample(run: &Run) -> Result<()> {
    let mech = run.mechanism();
    let eta = mech.invert(run.lam())?;
    let gw = GaltonWatson::pruned(&mech, run.cfg.theta.unwrap_or(0.0), eta, run.cfg.tolerances.tail)?;
    let v = run.records(|rng| Ok(json!({ "tree": to_newick(&gw.sample(rng, run.cfg.caps)?) })))?;
    run.write_json(&v)
}

fn prune(run: &Run) -> Result<()> {
    let mech = run.mechanism();
    let eta = mech.invert(run.lam())?;
    let (q, theta) = (run.cfg.q.unwrap_or(0.0), run.cfg.theta.unwrap_or(1.0));
    if !(theta > q) {
        return Err(Error::Config("theta must exceed q".into()));
    }
    let base = GaltonWatson::pruned(&mech, q, eta, run.cfg.tolerances.tail)?;
    let shifted = mech.shift(q)?;
    let v = run.records(|rng| {
        let t = base.sample(rng, run.cfg.caps)?;
        let pruned = mark_tree_at_eta(&t, &shifted, eta, theta - q, rng)?.prune_at(theta - q)?;
        Ok(json!({ "base": to_newick(&t), "pruned": to_newick(&pruned) }))
    })?;
    run.write_json(&v)
}

fn grow(run: &Run) -> Result<()> {
    let mech = run.mechanism();
    let eta = mech.invert(run.lam())?;
    let (q, theta) = (run.cfg.q.unwrap_or(0.5), run.cfg.theta.unwrap_or(1.0));
    let start = GaltonWatson::pruned(&mech, theta, eta, run.cfg.tolerances.tail)?;
    let growth = Growth::at_eta(&mech, eta, q, theta, run.cfg.tolerances.tail)?;
    let v = run.records(|rng| {
        let t = start.sample(rng, run.cfg.caps)?;
        let grown = growth.step(&t, rng, run.cfg.caps)?;
        Ok(json!({ "start": to_newick(&t), "grown": to_newick(&grown) }))
    })?;
    run.write_json(&v)
}

fn ascension(run: &Run) -> Result<()> {
    let law = AscensionLaw::new(&run.mechanism(), run.lam())?;
    let v = run.records(|rng| {
        let (a, s) = law.sample_tree(rng, run.cfg.caps)?;
        Ok(json!({ "time": a, "spine": s.spine.len(), "grafts": s.grafts, "tree": to_newick(&s.tree) }))
    })?;
    run.write_json(&json!({ "eta": law.eta(), "theta_lambda": law.theta_lambda(), "samples": v }))
}

fn spine(run: &Run) -> Result<()> {
    let sampler = SpineSampler::new(&run.mechanism(), run.lam(), run.cfg.theta.unwrap_or(1.0), run.cfg.tolerances.tail)?;
    let v = run.records(|rng| {
        let s = sampler.sample(rng, run.cfg.caps)?;
        Ok(json!({ "spine": s.spine.len(), "grafts": s.grafts, "tree": to_newick(&s.tree) }))
    })?;
    run.write_json(&json!({ "stop_probability": sampler.stop_probability(), "samples": v }))
}

fn ghp(run: &Run) -> Result<()> {
    let lams = [5.0, 20.0, 80.0, 320.0];
    let v = run.records(|rng| {
        let family = Excursion::sample(20_000, rng)?.subtrees(&lams, rng, true)?;
        let bounds = (0..lams.len() - 1).map(|k| family.ghp_pair(k, k + 1)).collect::<Result<Vec<_>>>()?;
        let leaves: Vec<usize> = family.levels.iter().map(|l| l.leaves.len()).collect();
        Ok(json!({ "lambda": lams, "leaves": leaves, "ghp_next": bounds }))
    })?;
    run.write_json(&v)
}

fn verify(run: &Run, experiment: Option<&str>) -> Result<bool> {
    let selection = experiment.or(run.cfg.experiment.as_deref()).unwrap_or("all");
    let reports = run_selection(selection, &run.cfg, run.seed)?;
    for r in &reports {
        eprintln!("{} {} in {:.1} s", r.experiment, if r.pass { "pass" } else { "FAIL" }, r.elapsed.as_secs_f64());
    }
    run.write(&to_json(&reports))?;
    Ok(reports.iter().all(|r| r.pass))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify { common, experiment } => Run::new(common).and_then(|run| verify(&run, experiment.as_deref())),
        Command::Law(c) => Run::new(c).and_then(|r| law(&r)).map(|_| true),
        Command::Sample(c) => Run::new(c).and_then(|r| sample(&r)).map(|_| true),
        Command::Prune(c) => Run::new(c).and_then(|r| prune(&r)).map(|_| true),
        Command::Grow(c) => Run::new(c).and_then(|r| grow(&r)).map(|_| true),
        Command::Ascension(c) => Run::new(c).and_then(|r| ascension(&r)).map(|_| true),
        Command::Spine(c) => Run::new(c).and_then(|r| spine(&r)).map(|_| true),
        Command::Ghp(c) => Run::new(c).and_then(|r| ghp(&r)).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
