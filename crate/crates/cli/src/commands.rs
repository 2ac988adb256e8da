use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use brwire_core::config::RunConfig;
use brwire_core::functionals::{decomposition_residual, w, w_bar, QuenchedNormalizers};
use brwire_core::harness::{self, HarnessError, RunContext, Status, VerificationReport};
use brwire_core::output::{Cell, Table};
use brwire_core::simulator::{SimError, Simulator, SummarySpec};
use brwire_core::{Rates, RatesError};

pub enum CommandError {
    Config(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CommandError {
    fn from(e: anyhow::Error) -> Self {
        CommandError::Runtime(e)
    }
}

#[derive(Serialize)]
struct CapStatus {
    max_particles: usize,
    exceeded: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    generation: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reached: Option<usize>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    config: String,
    config_hash: String,
    seed: u64,
    versions: Versions,
    status: &'a str,
    cap: CapStatus,
    artifacts: Vec<String>,
}

#[derive(Serialize)]
struct Versions {
    brwire: &'static str,
}

struct Outcome {
    status: &'static str,
    artifacts: Vec<String>,
}

struct Writer<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Writer<'_> {
    fn text(&mut self, name: &str, contents: &str) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, table: &Table) -> anyhow::Result<()> {
        self.text(name, &table.to_csv()?)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.text(name, &text)
    }
}

pub fn run(name: &str, config: &RunConfig, config_path: &Path, out: &Path, quiet: bool) -> Result<bool, CommandError> {
    let dir = out.join(name);
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(CommandError::Runtime)?;
    let mut writer = Writer { dir: &dir, written: Vec::new() };
    let mut cap = CapStatus {
        max_particles: config.simulation.max_particles,
        exceeded: false,
        generation: None,
        reached: None,
    };

    let result = dispatch(name, config, &mut writer, quiet);
    let status = match &result {
        Ok(o) => o.status,
        Err(Failure::Cap { generation, reached }) => {
            cap.exceeded = true;
            cap.generation = Some(*generation);
            cap.reached = Some(*reached);
            "error"
        }
        Err(_) => "error",
    };
    let artifacts = match &result {
        Ok(o) => o.artifacts.clone(),
        Err(_) => writer.written.clone(),
    };
    let manifest = Manifest {
        subcommand: name,
        config: config_path.display().to_string(),
        config_hash: config.hash(),
        seed: config.seed,
        versions: Versions { brwire: env!("CARGO_PKG_VERSION") },
        status,
        cap,
        artifacts,
    };
    writer.json("manifest.json", &manifest).map_err(CommandError::Runtime)?;

    match result {
        Ok(o) => Ok(o.status != "fail"),
        Err(Failure::Config(m)) => Err(CommandError::Config(m)),
        Err(Failure::Cap { generation, reached }) => Err(CommandError::Runtime(anyhow::anyhow!(
            "particle cap {} exceeded at generation {generation} (reached generation {reached}); lower n or raise simulation.max_particles",
            config.simulation.max_particles
        ))),
        Err(Failure::Runtime(e)) => Err(CommandError::Runtime(e)),
    }
}

enum Failure {
    Config(String),
    Cap { generation: usize, reached: usize },
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::CapExceeded { generation, reached, .. } => Failure::Cap { generation, reached },
            SimError::InvalidModel(report) => Failure::Config(format!("invalid model:\n{report}")),
            SimError::InvalidConfig(m) => Failure::Config(m),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Sim(s) => s.into(),
            HarnessError::Precondition(m) => Failure::Config(m),
            HarnessError::Rates(r) => r.into(),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<RatesError> for Failure {
    fn from(e: RatesError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn dispatch(name: &str, config: &RunConfig, writer: &mut Writer, quiet: bool) -> Result<Outcome, Failure> {
    let model = config.model().map_err(|e| Failure::Config(e.to_string()))?;
    let ctx = RunContext::new(config.seed)
        .with_config_hash(config.hash())
        .with_max_particles(config.simulation.max_particles);
    let v = &config.verify;
    let report = match name {
        "simulate" => return simulate(config, &model, writer, quiet),
        "rates" => return rates(config, &model, writer, quiet),
        "verify-clt" => harness::verify_clt(&model, &v.clt, &ctx)?,
        "verify-mdp" => harness::verify_mdp(&model, &v.mdp, &ctx)?,
        "verify-free-energy" => harness::verify_free_energy(&model, &v.free_energy, &ctx)?,
        "verify-ldp" => harness::verify_ldp(&model, &v.ldp, &ctx)?,
        "verify-lp-rate" => harness::verify_lp_rate(&model, &v.lp_rate, &ctx)?,
        "verify-martingale" => harness::verify_martingale(&model, &v.martingale, &ctx)?,
        "verify-decomposition" => harness::verify_decomposition(&model, &v.decomposition, &ctx)?,
        other => return Err(Failure::Runtime(anyhow::anyhow!("unknown subcommand {other}"))),
    };
    write_report(name, &report, writer, quiet)
}

fn write_report(name: &str, report: &VerificationReport, writer: &mut Writer, quiet: bool) -> Result<Outcome, Failure> {
    let stem = name.trim_start_matches("verify-");
    writer.json(&format!("{stem}.json"), report)?;
    writer
        .csv(&format!("{stem}.csv"), &report.table().map_err(anyhow::Error::from)?)?;
    if !quiet || report.failed() {
        println!("{}", report.summary());
    }
    let status = match report.status {
        Status::Pass => "pass",
        Status::Fail => "fail",
        Status::HypothesisUnmet => "hypothesis_unmet",
    };
    Ok(Outcome { status, artifacts: writer.written.clone() })
}

fn rates(config: &RunConfig, model: &brwire_core::EnvModel, writer: &mut Writer, quiet: bool) -> Result<Outcome, Failure> {
    let rates = Rates::new(model)?;
    let table = rates.table(&config.t_grid(), &config.x_grid());
    let header = table.header();
    writer.csv("rates_t.csv", &table.t_table().map_err(anyhow::Error::from)?)?;
    writer.csv("rates_x.csv", &table.x_table().map_err(anyhow::Error::from)?)?;
    writer.json("rates.json", &header)?;
    let pass = header.invariants.iter().all(|c| c.pass);
    if !quiet || !pass {
        println!(
            "{} rates: t- = {}, t+ = {}, case {:?}, sigma2 = {}",
            if pass { "PASS" } else { "FAIL" },
            table.t_minus,
            table.t_plus,
            table.case,
            table.sigma2
        );
        for c in header.invariants.iter().filter(|c| !c.pass) {
            println!("  invariant {} violated (worst {})", c.name, c.worst);
        }
    }
    Ok(Outcome {
        status: if pass { "pass" } else { "fail" },
        artifacts: writer.written.clone(),
    })
}

fn simulate(config: &RunConfig, model: &brwire_core::EnvModel, writer: &mut Writer, quiet: bool) -> Result<Outcome, Failure> {
    let grid = config.t_grid();
    let spec = SummarySpec::new(grid.clone()).with_founders();
    let sim = Simulator::new(model, config.sim_config(), spec)?;
    let norm = QuenchedNormalizers::new(sim.environment(), &grid);
    let trajectories = sim.run_all()?;

    let mut summary = Table::new(["replica", "n", "total", "root_total", "immigrants_joined", "rightmost"]);
    let mut laplace = Table::new(["replica", "n", "t", "log_laplace", "log_laplace_root"]);
    let mut functionals = Table::new(["replica", "n", "t", "W", "W_bar", "residual", "R_n", "b_n"]);
    let push = |table: &mut Table, row: Vec<Cell>| table.push(row).map_err(anyhow::Error::from);
    for traj in &trajectories {
        let ws = w(traj, &norm).map_err(anyhow::Error::from)?;
        let wbars = w_bar(traj, &norm).map_err(anyhow::Error::from)?;
        for s in &traj.summaries {
            let replica = u64::from(traj.replica);
            let joined = if s.n == 0 { 0 } else { traj.immigration.count(s.n - 1) };
            push(
                &mut summary,
                vec![replica.into(), s.n.into(), s.total.into(), s.root_total.into(), joined.into(), s.rightmost.into()],
            )?;
            for (ti, &t) in grid.iter().enumerate() {
                push(
                    &mut laplace,
                    vec![replica.into(), s.n.into(), t.into(), s.log_laplace[ti].into(), s.log_laplace_root[ti].into()],
                )?;
                let residual = decomposition_residual(traj, &norm, s.n, ti).map_err(anyhow::Error::from)?;
                push(
                    &mut functionals,
                    vec![
                        replica.into(),
                        s.n.into(),
                        t.into(),
                        ws[s.n][ti].into(),
                        wbars[s.n][ti].into(),
                        residual.into(),
                        s.rightmost.into(),
                        norm.b(s.n).into(),
                    ],
                )?;
            }
        }
    }
    writer.csv("trajectory.csv", &summary)?;
    writer.csv("laplace.csv", &laplace)?;
    writer.csv("functionals.csv", &functionals)?;
    writer.json("validation.json", sim.validation())?;
    if !quiet {
        let last = trajectories[0].summaries.last().expect("generation 0 exists");
        println!(
            "simulated {} replica(s) x {} generations; replica 0: Z_n(R) = {}, R_n = {}",
            trajectories.len(),
            config.simulation.generations,
            last.total,
            last.rightmost
        );
        for warning in sim.validation().warnings() {
            println!("  {warning}");
        }
    }
    Ok(Outcome { status: "pass", artifacts: writer.written.clone() })
}
