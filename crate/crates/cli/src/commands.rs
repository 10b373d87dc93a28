use rand::Rng;
use schurloc_core::follow::{EnergyFollower, EnergyTrace, FollowOptions, Sign, TraceStatus};
use schurloc_core::model::spectrum_range_check;
use schurloc_core::multiscale::{fundamental_certificate, Multiscale};
use schurloc_core::rng::trial_rng;
use schurloc_core::stats::{self, Estimate, PolynomialProbe, ProbeBlock};
use schurloc_core::{DisorderField, Instance, Lattice, ModelParams};
use serde_json::json;

use crate::config::{Command, RunConfig};
use crate::output::{fmt_bool, fmt_f64, fmt_opt, RunDir, Table};
use crate::CliError;

const ALL_OUTPUTS: [&str; 5] = ["manifest.json", "results.csv", "trace.jsonl", "certificates.json", "summary.json"];

pub fn dispatch(cfg: &RunConfig, out: &mut RunDir) -> Result<(), CliError> {
    out.ensure_fresh(&ALL_OUTPUTS)?;
    out.write_manifest()?;
    match cfg.command {
        Command::Spectrum => spectrum(cfg, out),
        Command::Multiscale => multiscale(cfg, out),
        Command::Follow => follow(cfg, out),
        Command::Dos => dos(cfg, out),
        Command::Spacing => spacing(cfg, out),
        Command::Correlator => correlator(cfg, out),
        Command::Percolation => percolation(cfg, out),
        Command::ProbeDet => probe(cfg, out, true),
        Command::ProbeDisc => probe(cfg, out, false),
        Command::Certify => certify(cfg, out),
    }
}

fn lattice(cfg: &RunConfig) -> Result<Lattice, CliError> {
    Ok(Lattice::new(cfg.dims.clone())?)
}

fn params(cfg: &RunConfig) -> Result<ModelParams, CliError> {
    Ok(ModelParams::with_phi(cfg.gamma, cfg.phi)?)
}

fn instance(cfg: &RunConfig, trial: u64) -> Result<Instance, CliError> {
    let lat = lattice(cfg)?;
    let field = if let Some(u) = &cfg.u {
        DisorderField::from_values(lat, u.clone(), cfg.seed)?
    } else if let Some(path) = &cfg.disorder {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("disorder: {}: {e}", path.display())))?;
        let f = DisorderField::from_json(&text)?;
        if f.lattice() != &lat {
            return Err(CliError::Usage(format!("disorder: lattice {:?} does not match dims {:?}", f.lattice().dims(), cfg.dims)));
        }
        f
    } else {
        DisorderField::sample(lat, cfg.seed, trial)
    };
    Ok(Instance::new(field, params(cfg)?))
}

fn position(lat: &Lattice, coords: &Option<Vec<i64>>, default: usize) -> Result<usize, CliError> {
    match coords {
        Some(c) => lat.flat(c).ok_or_else(|| CliError::Usage(format!("{c:?} is not a lattice position"))),
        None => Ok(default),
    }
}

fn estimate_table(estimates: &[Estimate]) -> Table {
    let names: Vec<String> = estimates.first().map(|e| e.params.iter().map(|(k, _)| k.clone()).collect()).unwrap_or_default();
    let mut t = Table::new(
        names
            .iter()
            .cloned()
            .chain(["estimate", "stderr", "n", "bound", "pass", "reference", "failures", "seed"].map(String::from)),
    );
    for e in estimates {
        let mut row: Vec<String> = e.params.iter().map(|(_, v)| fmt_f64(*v)).collect();
        row.extend([
            fmt_f64(e.value),
            fmt_f64(e.stderr),
            e.n.to_string(),
            fmt_opt(e.bound),
            fmt_bool(e.pass),
            fmt_opt(e.reference),
            e.failures.to_string(),
            e.seed.to_string(),
        ]);
        t.push(row);
    }
    t
}

fn spectrum(cfg: &RunConfig, out: &mut RunDir) -> Result<(), CliError> {
    let inst = instance(cfg, cfg.trial)?;
    let mut t = Table::new(["index", "eigenvalue"]);
    for (i, l) in inst.hamiltonian.eigenvalues().iter().enumerate() {
        t.push(vec![i.to_string(), fmt_f64(*l)]);
    }
    out.write_csv("results.csv", &t)?;
    let summary = json!({
        "u": inst.field.u(),
        "range_check": spectrum_range_check(&inst.hamiltonian, &inst.params, inst.lattice()),
        "warnings": inst.params.warnings(),
    });
    out.write_json("summary.json", "summary", &summary)
}

fn multiscale(cfg: &RunConfig, out: &mut RunDir) -> Result<(), CliError> {
    let inst = instance(cfg, cfg.trial)?;
    let ms = Multiscale::new(&inst);
    let states = ms.run(cfg.energy, cfg.k_max)?;
    let records: Vec<_> = states.iter().map(|s| ms.record(s)).collect();
    let mut t = Table::new([
        "k",
        "eps_k",
        "resonant",
        "blocks",
        "isolated",
        "removed_positions",
        "gap",
        "truncation_discrepancy",
        "discrepancy_envelope",
    ]);
    for r in &records {
        t.push(vec![
            r.k.to_string(),
            fmt_f64(r.eps_k),
            r.resonant.len().to_string(),
            r.blocks.len().to_string(),
            r.blocks.iter().filter(|b| b.isolated).count().to_string(),
            r.removed_count.to_string(),
            fmt_f64(r.gap),
            fmt_opt(r.truncation_discrepancy),
            fmt_f64(r.discrepancy_envelope),
        ]);
    }
    out.write_csv("results.csv", &t)?;
    out.write_jsonl("trace.jsonl", &records)
}

fn follow(cfg: &RunConfig, out: &mut RunDir) -> Result<(), CliError> {
    let inst = instance(cfg, cfg.trial)?;
    let opts = FollowOptions { k_max: cfg.k_max, residual_tol: cfg.residual_tol, ..FollowOptions::default() };
    let f = EnergyFollower::new(&inst, opts);
    let (traces, report): (Vec<EnergyTrace>, Option<_>) = match &cfg.x {
        Some(_) => {
            let x = position(inst.lattice(), &cfg.x, 0)?;
            let mut ts = f.follow(x, Sign::Plus)?;
            ts.extend(f.follow(x, Sign::Minus)?);
            (ts, None)
        }
        None => {
            let (rep, ts) = f.sweep_all_eigenvalues()?;
            (ts, Some(rep))
        }
    };
    let lat = inst.lattice();
    let mut t = Table::new(["x", "sign", "branch", "status", "lambda0", "residual", "stopping_scale", "near_degenerate", "steps"]);
    let mut records = Vec::new();
    for tr in &traces {
        let (residual, status) = match (&tr.status, f.reconstruct_eigenfunction(tr)) {
            (TraceStatus::Converged, Ok(r)) => (Some(r.residual), "converged".to_string()),
            (TraceStatus::Converged, Err(e)) => (None, format!("reconstruction failed: {e}")),
            (TraceStatus::Failed(m), _) => (None, format!("failed: {m}")),
            (TraceStatus::Active, _) => (None, "active".to_string()),
        };
        let coords: Vec<String> = lat.coords(tr.x).iter().map(|c| c.to_string()).collect();
        t.push(vec![
            coords.join(" "),
            if tr.sign == Sign::Plus { "+" } else { "-" }.to_string(),
            tr.branch_id(),
            status,
            fmt_opt(tr.lambda0),
            fmt_opt(residual),
            tr.stopping_scale.map(|k| k.to_string()).unwrap_or_else(|| "pending".into()),
            tr.near_degenerate.to_string(),
            tr.energies.len().to_string(),
        ]);
        records.extend(tr.records(lat, f.constants()));
    }
    out.write_csv("results.csv", &t)?;
    out.write_jsonl("trace.jsonl", &records)?;
    if let Some(rep) = report {
        out.write_json("summary.json", "completeness", &rep)?;
    }
    Ok(())
}

fn dos(cfg: &RunConfig, out: &mut RunDir) -> Result<(), CliError> {
    let est = stats::estimate_dos(&lattice(cfg)?, &params(cfg)?, cfg.energy, cfg.delta, cfg.samples, cfg.seed)?;
    out.write_csv("results.csv", &estimate_table(&[est]))
}

fn spacing(cfg: &RunConfig, out: &mut RunDir) -> Result<(), CliError> {
    let est = stats::estimate_min_spacing_cdf(&lattice(cfg)?, &params(cfg)?, &cfg.delta_grid, cfg.samples, cfg.seed)?;
    out.write_csv("results.csv", &estimate_table(&est))
}

fn correlator(cfg: &RunConfig, out: &mut RunDir) -> Result<(), CliError> {
    let lat = lattice(cfg)?;
    let p = params(cfg)?;
    let y = position(&lat, &cfg.y, 0)?;
    let zs: Vec<usize> = match &cfg.z {
        Some(_) => vec![position(&lat, &cfg.z, 0)?],
        None => (0..lat.num_positions()).collect(),
    };
    let est = stats::estimate_correlator_profile(&lat, &p, y, &zs, cfg.samples, cfg.seed, None)?;
    out.write_csv("results.csv", &estimate_table(&est))?;
    let mut by_r: std::collections::BTreeMap<u64, Vec<f64>> = Default::default();
    for e in est.iter().filter(|e| e.param("r").unwrap_or(0.0) >= 1.0) {
        by_r.entry(e.param("r").unwrap() as u64).or_default().push(e.value);
    }
    let points: Vec<(f64, f64)> = by_r.into_iter().map(|(r, v)| (r as f64, v.iter().sum::<f64>() / v.len() as f64)).collect();
    let fit = stats::fit_correlator_decay(&points, schurloc_core::constants::CHI, cfg.gamma).ok();
    let identity = stats::identity_resolution_defect(&instance(cfg, 0)?.hamiltonian, y);
    out.write_json("summary.json", "summary", &json!({ "fit": fit, "identity_defect": identity }))
}

fn percolation(cfg: &RunConfig, out: &mut RunDir) -> Result<(), CliError> {
    let lat = lattice(cfg)?;
    let x = position(&lat, &cfg.x, 0)?;
    let y = position(&lat, &cfg.y, 1.min(lat.num_positions() - 1))?;
    let est = stats::estimate_block_percolation(&lat, &params(cfg)?, cfg.energy, cfg.k, x, y, cfg.samples, cfg.seed)?;
    out.write_csv("results.csv", &estimate_table(&[est]))
}

fn probe_table(p: &PolynomialProbe) -> Table {
    let mut t = Table::new(["threshold", "empirical", "stderr", "envelope", "n", "pass"]);
    for tp in &p.tail {
        t.push(vec![
            fmt_f64(tp.threshold),
            fmt_f64(tp.empirical),
            fmt_f64(tp.stderr),
            fmt_f64(tp.envelope),
            tp.n_samples.to_string(),
            fmt_bool(tp.pass),
        ]);
    }
    t
}

fn probe(cfg: &RunConfig, out: &mut RunDir, determinant: bool) -> Result<(), CliError> {
    let block = ProbeBlock::new(vec![cfg.block_n], cfg.gamma)?;
    let p = if determinant {
        stats::probe_determinant(&block, cfg.energy, &cfg.delta_grid, cfg.samples, cfg.seed)?
    } else {
        stats::probe_discriminant(&block, &cfg.delta_grid, cfg.samples, cfg.seed)?
    };
    out.write_csv("results.csv", &probe_table(&p))?;
    out.write_json("summary.json", "probe", &p)
}

fn certify(cfg: &RunConfig, out: &mut RunDir) -> Result<(), CliError> {
    let single = cfg.u.is_some() || cfg.disorder.is_some();
    let trials: Vec<u64> = if single { vec![cfg.trial] } else { (0..cfg.samples).collect() };
    let mut t = Table::new(["trial", "E", "full", "reduced", "max_shift_over_bound", "passed"]);
    let mut certs = Vec::new();
    for trial in trials {
        let inst = instance(cfg, trial)?;
        let rep = fundamental_certificate(&inst, cfg.energy)?;
        let worst = rep.pairs.iter().map(|p| (p.lambda - p.lambda_tilde).abs() / p.bound).fold(0.0, f64::max);
        t.push(vec![
            trial.to_string(),
            fmt_f64(rep.e),
            rep.counts.full.to_string(),
            rep.counts.reduced.to_string(),
            fmt_f64(worst),
            rep.passed.to_string(),
        ]);
        certs.push(json!({ "trial": trial, "report": rep }));
    }
    out.write_csv("results.csv", &t)?;
    out.write_json("certificates.json", "certificates", &certs)
}

/// Energy at a bare level of a position drawn from the auxiliary stream of `trial`.
pub fn sampled_level(inst: &Instance, seed: u64, trial: u64) -> f64 {
    let n = inst.lattice().num_positions();
    let x = trial_rng(seed ^ 0x5eed_e4e7, trial).random_range(0..n);
    inst.field.t(x)
}
