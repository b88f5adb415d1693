use std::fmt::Write as _;
use std::path::PathBuf;

use clap::ValueEnum;
use log::info;
use serde::Serialize;

use cltlab_core::dependence::{evaluate_conditions, phi_profile, series_condphi, ConditionReport, SeriesConfig};
use cltlab_core::experiments::{
    berry_esseen_cascade, calibration_floor, render_svg, run_experiment, to_json, write_csv, Target,
    DEFAULT_CALIBRATION_REPS, DEFAULT_REPLICATES,
};
use cltlab_core::processes::{partial_sums_batch, Prepared, PreparedProcess};

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::manifest::{persist, Persisted, RunManifest};
use crate::suites::{run_suite, selected, SuiteReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
    All,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
            Format::All => "all",
        }
    }

    fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::All)
    }

    fn json(self) -> bool {
        matches!(self, Format::Json | Format::All)
    }

    fn svg(self) -> bool {
        matches!(self, Format::Svg | Format::All)
    }
}

/// Everything a command needs: the parsed config, its text for the manifest,
/// and where to write.
pub struct Run {
    pub command: &'static str,
    pub config_text: String,
    pub cfg: Config,
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
}

type Files = Vec<(String, Vec<u8>)>;

fn json_bytes<T: Serialize + ?Sized>(v: &T) -> CliResult<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Quotes a CSV field when it holds a separator, quote or newline.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl Run {
    fn finish(&self, files: Files) -> CliResult<()> {
        let manifest = RunManifest::new(self.command, self.format.name(), &self.config_text, self.seed, self.cfg.tolerances());
        let names: Vec<String> = files.iter().map(|f| f.0.clone()).collect();
        match persist(&self.out, manifest, files)? {
            Persisted::Fresh => info!("wrote {} files to {}", names.len(), self.out.display()),
            Persisted::Reproduced => info!("outputs in {} reproduced byte for byte", self.out.display()),
        }
        println!("outputs: {} ({})", self.out.display(), names.join(", "));
        Ok(())
    }

    pub fn simulate(&self) -> CliResult<()> {
        let plan = self.cfg.plan_with(self.seed, Vec::new(), Target::Sigma2)?;
        let spec = plan.process.clone();
        let process = PreparedProcess::new(&spec).map_err(CliError::at_validation)?;
        let batch = partial_sums_batch(&process, &plan.n_grid, plan.replicates, self.seed, plan.step_budget)
            .map_err(CliError::at_validation)?;
        let mut cache = Vec::new();
        batch.write_binary(&mut cache)?;
        let mut files: Files = vec![("trajectories.cltr".into(), cache)];
        let summary = batch.summary();
        if self.format.csv() {
            let mut s = String::from("n,mean,stderr\n");
            for g in &summary {
                let _ = writeln!(s, "{},{:e},{:e}", g.n, g.mean, g.stderr);
            }
            files.push(("summary.csv".into(), s.into_bytes()));
        }
        if self.format.json() {
            files.push(("summary.json".into(), json_bytes(&summary)?));
        }
        println!("{}: {} replicates on {} grid points", spec.family_name(), plan.replicates, plan.n_grid.len());
        for g in &summary {
            println!("  n = {:>6}  mean {:+.4e} ± {:.2e}", g.n, g.mean, g.stderr);
        }
        self.finish(files)
    }

    pub fn rates(&self) -> CliResult<()> {
        let plan = self.cfg.plan(self.seed)?;
        let res = run_experiment(&plan)?;
        let mut files: Files = Vec::new();
        if self.format.csv() {
            let mut buf = Vec::new();
            write_csv(&res, &mut buf)?;
            files.push(("rates.csv".into(), buf));
        }
        if self.format.json() {
            let mut s = to_json(&res)?;
            s.push('\n');
            files.push(("rates.json".into(), s.into_bytes()));
        }
        if self.format.svg() {
            files.push(("rates.svg".into(), render_svg(&res).into_bytes()));
        }
        let cascade_r = plan.p - 2.0;
        if plan.r_list.iter().any(|r| (r - cascade_r).abs() < 1e-12) {
            let c = berry_esseen_cascade(&res)?;
            if self.format.csv() {
                let mut s = String::from("n,w,prokhorov,kolmogorov_bound,kolmogorov_bound_upper,measured_kolmogorov,holds\n");
                for row in &c.rows {
                    let _ = writeln!(
                        s,
                        "{},{:e},{:e},{:e},{:e},{:e},{}",
                        row.n, row.w, row.prokhorov, row.kolmogorov_bound, row.kolmogorov_bound_upper,
                        row.measured_kolmogorov, row.holds
                    );
                }
                files.push(("cascade.csv".into(), s.into_bytes()));
            }
            if self.format.json() {
                files.push(("cascade.json".into(), json_bytes(&c)?));
            }
            let held = c.rows.iter().filter(|r| r.holds).count();
            println!("Berry–Esseen cascade (r = {cascade_r}): bound holds at {held}/{} grid points", c.rows.len());
        }
        println!("σ² = {:.6} ({:?})", res.variance.sigma2, res.variance.method);
        for c in &res.curves {
            let usable = res.points_for(c.r).filter(|p| p.usable).count();
            let slope = c.fit.as_ref().map(|f| format!("{:+.3} ± {:.3}", f.slope, f.slope_se)).unwrap_or_else(|| "—".into());
            println!(
                "r = {:<4} predicted {:+.3}  fitted {slope}  usable {usable}/{}  verdict {:?}",
                c.r,
                c.theory.w_exp,
                plan.n_grid.len(),
                c.verdict
            );
        }
        self.finish(files)
    }

    pub fn conditions(&self) -> CliResult<()> {
        let wanted = self.cfg.conditions()?;
        let spec = self.cfg.process_spec(self.seed)?;
        let process = PreparedProcess::new(&spec).map_err(CliError::at_validation)?;
        let d = &self.cfg.dependence;
        let series = SeriesConfig { outer_draws: d.outer_draws, seed: self.seed, gap_cap: d.gap_cap };
        let mut reports = evaluate_conditions(&process, d.n_terms, &series).map_err(CliError::at_validation)?;
        if let Prepared::DavydovChain { chain, f, .. } = &process.process {
            let prof = phi_profile(chain, Some(f), d.n_terms, d.gap_cap)?;
            let phi2: Vec<f64> = prof.phi2.iter().map(|c| c.value).collect();
            reports.push(series_condphi(&phi2, spec.p_moment, d.condphi_s).map_err(CliError::at_validation)?);
        }
        if let Some(wanted) = wanted {
            let available: Vec<&str> = reports.iter().map(|r| r.id.label()).collect();
            if let Some(missing) = wanted.iter().find(|w| !reports.iter().any(|r| r.id == **w)) {
                return Err(CliError::Config(format!(
                    "condition {} is not available for family {}; available: {}",
                    missing.label(),
                    spec.family_name(),
                    available.join(", ")
                )));
            }
            reports.retain(|r| wanted.contains(&r.id));
            reports.sort_by_key(|r| wanted.iter().position(|w| *w == r.id));
        }
        let files = self.condition_files(&reports)?;
        println!("{:<16} {:<13} {:>6} {:>14}  method", "condition", "verdict", "terms", "partial sum");
        for r in &reports {
            println!(
                "{:<16} {:<13} {:>6} {:>14.6e}  {}",
                r.id.label(),
                format!("{:?}", r.verdict),
                r.terms.len(),
                r.total(),
                r.method
            );
        }
        self.finish(files)
    }

    fn condition_files(&self, reports: &[ConditionReport]) -> CliResult<Files> {
        let mut files = Vec::new();
        if self.format.csv() {
            let mut s = String::from("condition,verdict,terms,total,last_block_ratio,local_slope,method,reason\n");
            for r in reports {
                let verdict = serde_json::to_value(r.verdict).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
                let _ = writeln!(
                    s,
                    "{},{},{},{:e},{},{},{},{}",
                    r.id.label(),
                    verdict,
                    r.terms.len(),
                    r.total(),
                    opt(r.diagnostics.ratios.last().copied()),
                    opt(r.diagnostics.local_slope),
                    csv_field(&r.method),
                    csv_field(&r.diagnostics.reason)
                );
            }
            files.push(("conditions.csv".into(), s.into_bytes()));
            let mut terms = String::new();
            for (i, r) in reports.iter().enumerate() {
                let mut buf = Vec::new();
                r.write_csv(&mut buf)?;
                let text = String::from_utf8(buf).map_err(|e| CliError::Internal(e.to_string()))?;
                let body = if i == 0 { text.as_str() } else { text.split_once('\n').map(|x| x.1).unwrap_or("") };
                terms.push_str(body);
            }
            files.push(("terms.csv".into(), terms.into_bytes()));
        }
        if self.format.json() {
            files.push(("conditions.json".into(), json_bytes(reports)?));
        }
        Ok(files)
    }

    pub fn verify(&self) -> CliResult<()> {
        let names = selected(&self.cfg)?;
        let mut reports: Vec<SuiteReport> = Vec::new();
        for name in names {
            let r = run_suite(name, &self.cfg, self.seed)?;
            println!(
                "{:<11} {:>4}/{:<4} passed  worst ratio {:.3e}{}",
                r.suite,
                r.passed,
                r.cases,
                r.worst_ratio,
                if r.failed > 0 { "  FAILED" } else { "" }
            );
            for f in &r.failures {
                println!("    {f}");
            }
            reports.push(r);
        }
        let mut files = Vec::new();
        if self.format.csv() {
            let mut s = String::from("suite,cases,passed,failed,worst_ratio,first_failure\n");
            for r in &reports {
                let first = r.failures.first().map(|f| csv_field(f)).unwrap_or_default();
                let _ = writeln!(s, "{},{},{},{},{:e},{}", r.suite, r.cases, r.passed, r.failed, r.worst_ratio, first);
            }
            files.push(("verify.csv".into(), s.into_bytes()));
        }
        if self.format.json() {
            files.push(("verify.json".into(), json_bytes(&reports)?));
        }
        self.finish(files)?;
        let failed: Vec<&SuiteReport> = reports.iter().filter(|r| r.failed > 0).collect();
        if let Some(first) = failed.first() {
            let names: Vec<&str> = failed.iter().map(|r| r.suite.as_str()).collect();
            return Err(CliError::CheckFailed(format!(
                "suites {} failed; first: {}",
                names.join(", "),
                first.failures.first().map(String::as_str).unwrap_or("")
            )));
        }
        Ok(())
    }

    pub fn calibrate(&self) -> CliResult<()> {
        let e = &self.cfg.experiments;
        let ms = e.calibration_m.clone().unwrap_or_else(|| vec![e.replicates.unwrap_or(DEFAULT_REPLICATES)]);
        let rs = e.r_list.clone().unwrap_or_else(|| vec![1.0]);
        let reps = e.calibration_reps.unwrap_or(DEFAULT_CALIBRATION_REPS);
        if ms.is_empty() || rs.is_empty() {
            return Err(CliError::Config("calibrate needs at least one M and one r".into()));
        }
        let mut floors = Vec::new();
        for &m in &ms {
            for &r in &rs {
                let f = calibration_floor(m, r, reps, self.seed).map_err(CliError::at_validation)?;
                println!("M = {:>7}  r = {:<4}  floor {:.4e} ± {:.1e}", f.replicates, f.r, f.mean, f.stderr);
                floors.push(f);
            }
        }
        let mut files = Vec::new();
        if self.format.csv() {
            let mut s = String::from("replicates,r,reps,mean,stderr\n");
            for f in &floors {
                let _ = writeln!(s, "{},{},{},{:e},{:e}", f.replicates, f.r, f.reps, f.mean, f.stderr);
            }
            files.push(("calibration.csv".into(), s.into_bytes()));
        }
        if self.format.json() {
            files.push(("calibration.json".into(), json_bytes(&floors)?));
        }
        self.finish(files)
    }
}
