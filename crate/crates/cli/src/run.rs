//! Executes a validated configuration into a run directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use hnls_core::field::{write_binary, GridPolicy};
use hnls_core::lattice::admissible_threshold_exact;
use hnls_core::nls::{
    contraction_threshold, inflation_probe, picard_iterate, split_step, step_halving, ContractionStatus, NlsProblem,
};
use hnls_core::propagator::boost_deviation;
use hnls_core::seed::{streams, task_rng};
use hnls_core::strichartz::{
    all_patterns, bilinear_sweep, gaussian, multilinear_table, strichartz_sweep, BilinearConfig,
    InitialData, NormRoute, SweepConfig, Tolerance,
};
use hnls_core::weyl::{dispersive_sweep, KernelSweepConfig};
use hnls_core::lattice::Cube;
use hnls_core::{Complex64, Execution, Signature, SpectralField};
use serde::{Deserialize, Serialize};

use crate::config::{
    BilinearSpec, Caps, Config, Experiment, GalileanSpec, InflationSpec, KernelSpec, MultilinearSpec, NlsData,
    PicardSpec, SolveSpec, StrichartzSpec, TableSpec, SCHEMA_VERSION,
};
use crate::error::{CliError, Result};
use crate::output::{real, sha256_hex, Host, RunManifest, RunWriter, Timing, SUMMARY};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    pub predicted: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub index: usize,
    pub kind: String,
    /// Non-finite values serialize as `null`.
    pub metrics: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub metric: String,
    pub experiment: usize,
    pub value: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub kind: String,
    pub experiments: Vec<ExperimentSummary>,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub summary: Summary,
}

/// Hex SHA-256 of the canonical configuration JSON.
pub fn config_hash(cfg: &Config) -> String {
    sha256_hex(&serde_json::to_vec(&cfg.canonical()).expect("config serializes"))
}

/// `root/<kind>-<first 12 hex digits of the config hash>`.
pub fn default_dir(cfg: &Config, root: &Path) -> PathBuf {
    root.join(format!("{}-{}", cfg.kind(), &config_hash(cfg)[..12]))
}

pub fn run_config(cfg: &Config, out: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis());
    let clock = Instant::now();
    let mut writer = RunWriter::create(out)?;
    let mut experiments = Vec::with_capacity(cfg.experiments.len());
    for (idx, exp) in cfg.experiments.iter().enumerate() {
        let t0 = Instant::now();
        let mut ctx = Ctx {
            idx,
            seed: cfg.seed,
            exec: cfg.execution,
            caps: &cfg.caps,
            writer: &mut writer,
            metrics: BTreeMap::new(),
            verdicts: Vec::new(),
        };
        match exp {
            Experiment::Strichartz(s) => ctx.strichartz(s)?,
            Experiment::Bilinear(s) => ctx.bilinear(s)?,
            Experiment::Multilinear(s) => ctx.multilinear(s)?,
            Experiment::Kernel(s) => ctx.kernel(s)?,
            Experiment::Galilean(s) => ctx.galilean(s)?,
            Experiment::Solve(s) => ctx.solve(s)?,
            Experiment::Picard(s) => ctx.picard(s)?,
            Experiment::Inflation(s) => ctx.inflation(s)?,
            Experiment::AdmissibilityTable(s) => ctx.table(s)?,
        }
        if let Some(limit) = cfg.caps.max_wall_seconds {
            let used = t0.elapsed().as_secs_f64();
            if used > limit {
                return Err(CliError::ResourceCap(format!(
                    "experiment {idx} took {used:.1} s, budget is {limit} s"
                )));
            }
        }
        experiments.push(ExperimentSummary {
            index: idx,
            kind: exp.kind().into(),
            metrics: ctx.metrics,
            verdicts: ctx.verdicts,
        });
    }
    let checks = evaluate_checks(cfg, &experiments);
    let passed = checks.iter().all(|c| c.pass)
        && experiments
            .iter()
            .flat_map(|e| &e.verdicts)
            .all(|v| v.pass != Some(false));
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        kind: cfg.kind().into(),
        experiments,
        checks,
        passed,
    };
    writer.write_json(SUMMARY, "summary/1", &summary)?;
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        artifact_version: env!("CARGO_PKG_VERSION").into(),
        kind: cfg.kind().into(),
        config_sha256: config_hash(cfg),
        seed: cfg.seed,
        signatures: cfg
            .experiments
            .iter()
            .filter_map(|e| e.signature())
            .map(|s| serde_json::to_value(s).expect("signature serializes"))
            .collect(),
        execution: serde_json::to_value(cfg.execution)?
            .as_str()
            .unwrap_or_default()
            .to_string(),
        timing: Timing {
            started_unix_ms: started,
            wall_seconds: clock.elapsed().as_secs_f64(),
        },
        host: Host::current(),
        config: cfg.canonical(),
        outputs: Vec::new(),
    };
    let dir = writer.finish(manifest)?;
    Ok(RunOutcome { dir, summary })
}

fn evaluate_checks(cfg: &Config, experiments: &[ExperimentSummary]) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for c in &cfg.checks {
        for e in experiments {
            if c.experiment.is_some_and(|i| i != e.index) {
                continue;
            }
            let value = e.metrics.get(&c.metric).copied();
            let pass = value.is_some_and(|v| c.min.is_none_or(|lo| v >= lo) && c.max.is_none_or(|hi| v <= hi));
            out.push(CheckResult {
                metric: c.metric.clone(),
                experiment: e.index,
                value,
                min: c.min,
                max: c.max,
                pass,
            });
        }
    }
    out
}

struct Ctx<'a> {
    idx: usize,
    seed: u64,
    exec: Execution,
    caps: &'a Caps,
    writer: &'a mut RunWriter,
    metrics: BTreeMap<String, f64>,
    verdicts: Vec<Verdict>,
}

fn opt(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

impl Ctx<'_> {
    fn name(&self, file: &str) -> String {
        format!("e{}_{file}", self.idx)
    }

    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    fn csv(&mut self, file: &str, schema: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let name = self.name(file);
        self.writer.write_csv(&name, schema, header, rows)
    }

    fn json<T: Serialize>(&mut self, file: &str, schema: &str, value: &T) -> Result<()> {
        let name = self.name(file);
        self.writer.write_json(&name, schema, value)
    }

    fn field(&mut self, file: &str, f: &SpectralField) -> Result<()> {
        let mut bytes = Vec::new();
        write_binary(f, &mut bytes)?;
        let name = self.name(file);
        self.writer.write_bytes(&name, "field/1", &bytes)
    }

    fn capped(&self, policy: &GridPolicy) -> GridPolicy {
        let mut p = policy.clone();
        if let Some(cap) = self.caps.max_cost {
            p.max_cost = Some(p.max_cost.map_or(cap, |c| c.min(cap)));
        }
        p
    }

    fn check_cost(&self, what: &str, cost: u128) -> Result<()> {
        match self.caps.max_cost {
            Some(cap) if cost > cap => Err(CliError::ResourceCap(format!(
                "{what} needs {cost} space-time samples, cap is {cap}"
            ))),
            _ => Ok(()),
        }
    }

    fn strichartz(&mut self, s: &StrichartzSpec) -> Result<()> {
        let policy = self.capped(&s.policy);
        // full quadratures are priced before anything runs
        if matches!(s.route, NormRoute::Quadrature | NormRoute::Auto) {
            for &n in &s.ns {
                if let InitialData::Dense(f) = s.data.build(&s.sig, n, self.seed)? {
                    let exact = s.p == 4.0 && s.sig.integer_coefficients().is_some() && s.t_max.fract() == 0.0;
                    if s.route == NormRoute::Auto && exact {
                        continue;
                    }
                    let grid = policy.resolve(&f, s.p, s.t_max)?;
                    let mut cost = grid.cost(s.sig.dim());
                    if policy.sentinel_tol.is_some() {
                        cost += grid.refined().cost(s.sig.dim());
                    }
                    self.check_cost(&format!("N = {n}"), cost)?;
                }
            }
        }
        let cfg = SweepConfig {
            policy,
            route: s.route,
            seed: self.seed,
            t_max: s.t_max,
            amplitude: s.amplitude,
            tolerance: s.tolerance.map(Tolerance::symmetric),
            ..SweepConfig::new(s.sig.clone(), s.p, s.data.clone(), s.ns.clone())
        };
        let res = strichartz_sweep(&cfg, self.exec)?;
        let rows: Vec<Vec<String>> = res
            .sweep
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    real(r.norm),
                    route_name(r.route),
                    r.grid.map(|g| g.g.to_string()).unwrap_or_default(),
                    r.grid.map(|g| g.n_t.to_string()).unwrap_or_default(),
                    opt(r.rel_change),
                ]
            })
            .collect();
        self.csv("norms.csv", "strichartz_norms/1", &["n", "norm", "route", "g", "n_t", "rel_change"], &rows)?;
        if !res.sweep.failures.is_empty() {
            let rows: Vec<Vec<String>> =
                res.sweep.failures.iter().map(|f| vec![f.n.to_string(), f.reason.clone()]).collect();
            self.csv("failures.csv", "strichartz_failures/1", &["n", "reason"], &rows)?;
        }
        let fit = &res.fit;
        self.json("fit.json", "strichartz_fit/1", fit)?;
        self.metric("slope", fit.slope);
        self.metric("predicted", fit.predicted);
        self.metric("deviation", fit.deviation);
        self.metric("residual", fit.residual);
        self.metric("failures", res.sweep.failures.len() as f64);
        self.verdicts.push(Verdict {
            name: "slope".into(),
            value: fit.slope,
            predicted: Some(fit.predicted),
            tolerance: s.tolerance,
            pass: fit.pass,
        });
        Ok(())
    }

    fn bilinear(&mut self, s: &BilinearSpec) -> Result<()> {
        let cfg = BilinearConfig {
            sig: s.sig.clone(),
            n1: s.n1,
            n2s: s.n2s.clone(),
            samples: s.samples,
            seed: self.seed,
            t_max: s.t_max,
            policy: self.capped(&s.policy),
        };
        let res = bilinear_sweep(&cfg, self.exec)?;
        let rows: Vec<Vec<String>> = res
            .rows
            .iter()
            .map(|r| vec![r.n2.to_string(), r.sample.to_string(), real(r.norm)])
            .collect();
        self.csv("products.csv", "bilinear_products/1", &["n2", "sample", "norm"], &rows)?;
        let rows: Vec<Vec<String>> = res.means.iter().map(|(n, v)| vec![n.to_string(), real(*v)]).collect();
        self.csv("means.csv", "bilinear_means/1", &["n2", "mean_norm"], &rows)?;
        self.metric("slope", res.fit.slope);
        self.metric("residual", res.fit.residual);
        self.metric("exact", f64::from(u8::from(res.exact)));
        self.verdicts.push(Verdict {
            name: "slope".into(),
            value: res.fit.slope,
            predicted: None,
            tolerance: None,
            pass: None,
        });
        Ok(())
    }

    fn multilinear(&mut self, s: &MultilinearSpec) -> Result<()> {
        let report = multilinear_table(&s.sig, s.m, s.s, &s.bases, s.rescales, self.exec)?;
        let flag = |b: bool| u8::from(b).to_string();
        let rows: Vec<Vec<String>> = report
            .rows
            .iter()
            .map(|r| {
                let mut row: Vec<String> = r.base.iter().map(u64::to_string).collect();
                row.push(r.scale.to_string());
                row.extend(r.pattern.iter().map(|c| flag(*c)));
                row.push(real(r.ratio));
                row
            })
            .collect();
        self.csv(
            "ratios.csv",
            "multilinear_ratios/1",
            &["n0", "n1", "n2", "n3", "scale", "conj1", "conj2", "conj3", "ratio"],
            &rows,
        )?;
        let rows: Vec<Vec<String>> = report
            .stability
            .iter()
            .map(|r| {
                let mut row: Vec<String> = r.base.iter().map(u64::to_string).collect();
                row.extend(r.pattern.iter().map(|c| flag(*c)));
                row.push(real(r.variation));
                row
            })
            .collect();
        self.csv(
            "stability.csv",
            "multilinear_stability/1",
            &["n0", "n1", "n2", "n3", "conj1", "conj2", "conj3", "variation"],
            &rows,
        )?;
        debug_assert_eq!(report.stability.len(), s.bases.len() * all_patterns().len());
        let ratios = report.rows.iter().map(|r| r.ratio);
        self.metric("max_variation", report.max_variation());
        self.metric("min_ratio", ratios.clone().fold(f64::INFINITY, f64::min));
        self.metric("max_ratio", ratios.fold(0.0, f64::max));
        Ok(())
    }

    fn kernel(&mut self, s: &KernelSpec) -> Result<()> {
        let cfg = KernelSweepConfig {
            sig: s.sig.clone(),
            cutoff: s.cutoff.clone(),
            ns: s.ns.clone(),
            samples: s.samples,
            sigma: s.sigma,
            seed: self.seed,
            points: s.points,
        };
        if s.ns.iter().any(|&n| !(2..=hnls_core::weyl::MAX_DIRICHLET_N).contains(&n)) {
            return Err(CliError::Schema(format!("kernel scales {:?} outside 2..=2^24", s.ns)));
        }
        let sweep = dispersive_sweep(&cfg, self.exec);
        let d = s.sig.dim();
        let mut header: Vec<String> = vec!["n".into(), "t".into()];
        header.extend((0..d).map(|j| format!("x{j}")));
        header.extend(["re", "im", "bound", "ratio", "minor_ratio", "major_arc", "admissible"].map(String::from));
        header.extend((0..d).map(|j| format!("q{j}")));
        let rows: Vec<Vec<String>> = sweep
            .samples
            .iter()
            .map(|k| {
                let mut row = vec![k.n.to_string(), real(k.t)];
                row.extend(k.x.iter().map(|x| real(*x)));
                row.extend([
                    real(k.value.re),
                    real(k.value.im),
                    real(k.bound),
                    real(k.ratio),
                    real(k.minor_ratio(s.sigma)),
                    u8::from(k.major_arc).to_string(),
                    u8::from(k.admissible).to_string(),
                ]);
                row.extend(k.approx.iter().map(|a| a.q.to_string()));
                row
            })
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        self.csv("samples.csv", "kernel_samples/1", &header, &rows)?;
        let rows: Vec<Vec<String>> = sweep
            .summaries
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    r.samples.to_string(),
                    r.admissible.to_string(),
                    r.major.to_string(),
                    real(r.max_ratio),
                    real(r.max_minor_ratio),
                ]
            })
            .collect();
        self.csv(
            "by_n.csv",
            "kernel_by_n/1",
            &["n", "samples", "admissible", "major", "max_ratio", "max_minor_ratio"],
            &rows,
        )?;
        self.metric("max_ratio", sweep.max_ratio());
        self.metric("max_minor_ratio", sweep.max_minor_ratio());
        if let Some(f) = &sweep.ratio_fit {
            self.metric("ratio_slope", f.slope);
        }
        if let Some(f) = &sweep.minor_fit {
            self.metric("minor_slope", f.slope);
        }
        Ok(())
    }

    fn galilean(&mut self, s: &GalileanSpec) -> Result<()> {
        let d = s.sig.dim();
        self.check_cost("boost check", (s.grid as u128).pow(d as u32) * s.times.len() as u128)?;
        let mut rng = task_rng(self.seed, streams::BOOST, self.idx as u64);
        let f = SpectralField::from_fn(&s.sig, &vec![s.half; d], |_| gaussian(&mut rng))?;
        let cube = Cube::with_side(&s.center, s.side)?;
        let mut rows = Vec::new();
        let mut worst = 0.0f64;
        for &t in &s.times {
            let dev = boost_deviation(&f, &cube, t, s.grid)?;
            worst = worst.max(dev);
            rows.push(vec![real(t), real(dev)]);
        }
        self.csv("deviation.csv", "galilean_deviation/1", &["t", "max_deviation"], &rows)?;
        self.metric("max_deviation", worst);
        Ok(())
    }

    fn nls_data(&self, sig: &Signature, data: &NlsData) -> Result<SpectralField> {
        Ok(match data {
            NlsData::Gaussian { half } => {
                let mut rng = task_rng(self.seed, streams::SOLVER, self.idx as u64);
                SpectralField::from_fn(sig, &vec![*half; sig.dim()], |_| gaussian(&mut rng))?
            }
            NlsData::PlaneWave { k, re, im } => SpectralField::single_mode(sig, k, Complex64::new(*re, *im))?,
            NlsData::Modes { modes } => {
                let reach = modes
                    .iter()
                    .flat_map(|m| m.k.iter())
                    .map(|k| k.unsigned_abs() as usize)
                    .max()
                    .unwrap_or(0);
                let mut f = SpectralField::zeros(sig, &vec![reach; sig.dim()])?;
                for m in modes {
                    f.set(&m.k, Complex64::new(m.re, m.im))?;
                }
                f
            }
        })
    }

    fn solver_cost(&self, p: &NlsProblem, time_levels: usize) -> Result<()> {
        let points: u128 = p.work_half().iter().map(|m| 2 * *m as u128 + 1).product();
        self.check_cost("solver", points * time_levels as u128)
    }

    fn solve(&mut self, s: &SolveSpec) -> Result<()> {
        let mut u0 = self.nls_data(&s.sig, &s.data)?;
        if let Some(target) = s.mass_norm {
            u0 = rescale(&u0, u0.l2_norm(), target)?;
        }
        let mut problem = NlsProblem::new(u0, s.m, s.nonlinearity, s.t_max)?;
        if let Some(reg) = s.s {
            problem.s = reg;
        }
        let steps = (s.t_max / s.h).round() as usize;
        self.solver_cost(&problem, if s.step_halving { 11 * steps } else { steps })?;
        let run = split_step(&problem, s.h, s.record_every)?;
        let rows: Vec<Vec<String>> = run
            .diagnostics
            .iter()
            .map(|r| vec![real(r.t), real(r.mass), real(r.energy), real(r.hs_norm)])
            .collect();
        self.csv("diagnostics.csv", "solve_diagnostics/1", &["t", "mass", "energy", "hs_norm"], &rows)?;
        for (i, (_, u)) in run.trajectory.iter().enumerate() {
            self.field(&format!("checkpoints/{i:05}.bin"), u)?;
        }
        self.json("scheme.json", "solve_scheme/1", &run.scheme)?;
        self.metric("mass_drift", run.mass_drift);
        self.metric("energy_drift", run.energy_drift);
        if s.step_halving {
            let sh = step_halving(&problem, s.h)?;
            self.json("step_halving.json", "solve_step_halving/1", &sh)?;
            self.metric("halving_ratio", sh.ratio);
            self.metric("energy_halving_ratio", sh.energy_ratio);
        }
        Ok(())
    }

    fn picard(&mut self, s: &PicardSpec) -> Result<()> {
        let u0 = self.nls_data(&s.sig, &s.data)?;
        let mut problem = NlsProblem::new(u0, s.m, s.nonlinearity, s.t_max)?;
        if let Some(a) = s.amplitude {
            let norm = problem.u0.sobolev_norm(problem.critical_index());
            problem = problem.with_data(rescale(&problem.u0, norm, a)?);
        }
        self.solver_cost(&problem, s.n_iter * s.n_time)?;
        let run = picard_iterate(&problem, s.n_iter, s.n_time)?;
        let rep = &run.report;
        let rows: Vec<Vec<String>> = rep
            .d
            .iter()
            .enumerate()
            .map(|(n, d)| {
                let ratio = rep.ratios.get(n).copied().flatten();
                vec![n.to_string(), real(*d), opt(ratio)]
            })
            .collect();
        self.csv("contraction.csv", "picard_contraction/1", &["n", "difference", "ratio_to_next"], &rows)?;
        self.json("contraction.json", "picard_report/1", rep)?;
        let last = run.last().last().expect("at least two nodes").clone();
        self.field("final.bin", &last)?;
        if let Some(r) = rep.max_ratio_from(1) {
            self.metric("max_ratio", r);
        }
        if let Some(d) = rep.d.last() {
            self.metric("last_difference", *d);
        }
        self.metric("diverging", f64::from(u8::from(rep.status == ContractionStatus::Diverging)));
        if s.compare_split_step {
            let h = s.t_max / (s.n_time - 1) as f64;
            let reference = split_step(&problem, h, s.n_time)?;
            let err = last.sub(reference.final_state())?.l2_norm();
            self.metric("split_step_error", err);
        }
        if let Some(th) = &s.threshold {
            let t = contraction_threshold(&problem, s.n_iter, s.n_time, th.lo, th.hi, th.bisections)?;
            self.json("threshold.json", "picard_threshold/1", &t)?;
            self.metric("threshold_amplitude", t.amplitude);
        }
        Ok(())
    }

    fn inflation(&mut self, s: &InflationSpec) -> Result<()> {
        let u0 = self.nls_data(&s.sig, &s.data)?;
        let u0 = rescale(&u0, u0.sobolev_norm(s.s), s.amplitude)?;
        let mut problem = NlsProblem::new(u0, s.m, s.nonlinearity, s.t_max)?;
        problem.s = s.s;
        self.solver_cost(&problem, (s.t_max / s.h).round() as usize)?;
        let rep = inflation_probe(&problem, s.h, s.s)?;
        let rows: Vec<Vec<String>> =
            rep.times.iter().zip(&rep.growth).map(|(t, g)| vec![real(*t), real(*g)]).collect();
        self.csv("growth.csv", "inflation_growth/1", &["t", "growth"], &rows)?;
        self.metric("max_growth", rep.max_growth);
        Ok(())
    }

    fn table(&mut self, s: &TableSpec) -> Result<()> {
        let mut rows = Vec::new();
        for &d in &s.dims {
            if d == 0 {
                return Err(CliError::Schema("dimension 0 in admissibility table".into()));
            }
            for j0 in 0..=d {
                let delta = j0.min(d - j0);
                let p = admissible_threshold_exact(d, delta);
                let value = *p.numer() as f64 / *p.denom() as f64;
                rows.push(vec![d.to_string(), j0.to_string(), delta.to_string(), real(value), p.to_string()]);
            }
        }
        self.csv(
            "thresholds.csv",
            "admissibility_table/1",
            &["d", "j0", "delta", "p_star", "p_star_exact"],
            &rows,
        )?;
        self.metric("rows", rows.len() as f64);
        Ok(())
    }
}

fn route_name(r: NormRoute) -> String {
    serde_json::to_value(r)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

fn rescale(f: &SpectralField, norm: f64, target: f64) -> Result<SpectralField> {
    if norm == 0.0 {
        return if target == 0.0 {
            Ok(f.clone())
        } else {
            Err(CliError::Schema("cannot rescale vanishing data".into()))
        };
    }
    Ok(f.scaled(Complex64::new(target / norm, 0.0)))
}

