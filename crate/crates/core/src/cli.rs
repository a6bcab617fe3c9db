//! Config-driven command runner: one command per call, artifacts plus a manifest.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use log::info;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::analytic::analytic_check;
use crate::config::{Command, RunConfig};
use crate::curve::spectral_curve;
use crate::error::{Error, Result};
use crate::measure::{log_potential_at, DiscreteMeasure, Grid, HalfLine};
use crate::sampler::{compare_cdf, mcmc_pooled, ChainStats, SamplerOptions};
use crate::scalar::{scalar_support_end, scalar_variational_report, solve_scalar, ScalarOptions, ScalarSolution};
use crate::vector::{
    balayage_halfline, default_grids, point_mass_balayage_density, solve_vector, VectorGridSpec, VectorOptions,
};

/// Exit codes of the binary.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Ok,
    NotConverged(String),
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::Parse(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

/// Single-line machine-readable error.
pub fn error_line(kind: &str, message: &str) -> String {
    json!({ "error": kind, "message": message }).to_string()
}

#[derive(Serialize)]
struct ArtifactEntry {
    file: String,
    sha256: String,
    bytes: usize,
}

struct Artifacts<'a> {
    dir: &'a Path,
    entries: Vec<ArtifactEntry>,
}

impl<'a> Artifacts<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir, entries: Vec::new() })
    }

    fn put(&mut self, name: &str, bytes: Vec<u8>) -> Result<()> {
        fs::write(self.dir.join(name), &bytes)?;
        self.entries.push(ArtifactEntry {
            file: name.to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
            bytes: bytes.len(),
        });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let mut s = serde_json::to_vec_pretty(v).map_err(|e| Error::Numerical(e.to_string()))?;
        s.push(b'\n');
        self.put(name, s)
    }

    fn measure(&mut self, name: &str, m: &DiscreteMeasure) -> Result<()> {
        let mut buf = Vec::new();
        m.write_csv(&mut buf)?;
        self.put(name, buf)
    }

    fn finish(self, cfg: &RunConfig, status: &Status) -> Result<()> {
        let (st, note) = match status {
            Status::Ok => ("ok", None),
            Status::NotConverged(m) => ("not-converged", Some(m.clone())),
        };
        let manifest = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": cfg.command.name(),
            "config_sha256": cfg.hash(),
            "config": cfg,
            "status": st,
            "note": note,
            "artifacts": self.entries,
        });
        let mut s = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Numerical(e.to_string()))?;
        s.push(b'\n');
        fs::write(self.dir.join("manifest.json"), s)?;
        Ok(())
    }
}

fn scalar(cfg: &RunConfig) -> Result<ScalarSolution> {
    let theta = cfg.theta()?;
    let v = cfg.field.field()?;
    let radius = match cfg.grid.radius {
        Some(r) => r,
        None => 1.5 * scalar_support_end(theta, &v)?,
    };
    let grid = Arc::new(Grid::clustered(HalfLine::Positive, radius, cfg.grid.cells, cfg.grid.clustering.into())?);
    solve_scalar(theta, &v, grid, &ScalarOptions::default())
}

fn scalar_report(sol: &ScalarSolution, cfg: &RunConfig) -> Result<serde_json::Value> {
    let rep = scalar_variational_report(sol, &cfg.field.field()?);
    Ok(json!({
        "theta": cfg.theta()?.to_string(),
        "kernels": sol.kernels,
        "ell": sol.ell,
        "support": sol.support,
        "residual_on_support": sol.residual_on_support,
        "residual_off_support": sol.residual_off_support,
        "max_equality_defect": rep.max_equality_defect,
        "min_inequality_defect": rep.min_inequality_defect,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "truncation_warning": sol.truncation_warning,
    }))
}

fn vector(cfg: &RunConfig, q: u32, r: u32) -> Result<crate::vector::EquilibriumSolution> {
    let vhat = cfg.field.field()?.transformed(q);
    let spec = VectorGridSpec {
        center_cells: cfg.grid.center_cells,
        center_radius: cfg.grid.radius,
        per_decade: cfg.grid.per_decade,
        band_per_decade: cfg.grid.band_per_decade,
        eps_tail: cfg.grid.eps_tail,
        ..VectorGridSpec::default()
    };
    let grids = default_grids(q, r, &vhat, &spec)?;
    let opts = VectorOptions { tol_var: cfg.tolerances.tol_var, tol_fixed: cfg.tolerances.tol_fixed, ..VectorOptions::default() };
    solve_vector(q, r, &vhat, &grids, &opts)
}

fn sampler_opts(cfg: &RunConfig) -> SamplerOptions {
    let s = &cfg.sample;
    SamplerOptions {
        sweeps: s.sweeps,
        burn_in: s.burn_in,
        bins: s.bins,
        max_particles: s.max_particles,
        ..SamplerOptions::default()
    }
}

fn sample(cfg: &RunConfig) -> Result<ChainStats> {
    let v = cfg.field.field()?;
    mcmc_pooled(cfg.sample.n, cfg.theta()?.value(), &v, cfg.sample.chains, cfg.seed, &sampler_opts(cfg))
}

fn histogram_csv(s: &ChainStats) -> Vec<u8> {
    let mut out = String::from("lo,hi,count,cdf\n");
    let e = s.edges();
    for (k, c) in s.counts.iter().enumerate() {
        out.push_str(&format!("{:e},{:e},{},{:e}\n", e[k], e[k + 1], c, s.cdf(e[k + 1])));
    }
    out.push_str(&format!("{:e},inf,{},1\n", s.hist_max, s.overflow));
    out.into_bytes()
}

#[derive(Serialize)]
struct StatsSummary<'a> {
    n: usize,
    theta: f64,
    seed: u64,
    chains: usize,
    sweeps: usize,
    burn_in: usize,
    step: f64,
    acceptance: f64,
    autocorrelation: f64,
    hist_max: f64,
    bins: usize,
    overflow: u64,
    max_position: f64,
    options: &'a SamplerOptions,
}

fn summary<'a>(s: &ChainStats, opts: &'a SamplerOptions) -> StatsSummary<'a> {
    StatsSummary {
        n: s.n,
        theta: s.theta,
        seed: s.seed,
        chains: s.chains,
        sweeps: s.sweeps,
        burn_in: s.burn_in,
        step: s.step,
        acceptance: s.acceptance,
        autocorrelation: s.autocorrelation,
        hist_max: s.hist_max,
        bins: s.counts.len(),
        overflow: s.overflow,
        max_position: s.max_position,
        options: opts,
    }
}

fn balayage(cfg: &RunConfig, art: &mut Artifacts) -> Result<Status> {
    let b = &cfg.balayage;
    let target = if b.target == "negative" { HalfLine::Negative } else { HalfLine::Positive };
    let source_side = if target == HalfLine::Negative { HalfLine::Positive } else { HalfLine::Negative };
    if b.atoms.iter().any(|&(x, _)| x == 0.0 || !source_side.contains(x)) {
        return Err(Error::InvalidArgument("atoms must lie strictly off the target half-line".into()));
    }
    let mut atoms = b.atoms.clone();
    atoms.sort_by(|p, q| p.0.total_cmp(&q.0));
    let pts: Vec<f64> = atoms.iter().map(|a| a.0).collect();
    let src = DiscreteMeasure::new(Arc::new(Grid::atoms(source_side, &pts)?), atoms.iter().map(|a| a.1).collect())?;
    let grid = Arc::new(Grid::log_graded(target, b.inner, b.outer, b.per_decade, &b.bands)?);
    let beta = balayage_halfline(&src, target, grid.clone())?;
    // potentials agree on the target up to the truncation constant, checked on the moderate range
    let sg = target.sign();
    let nodes: Vec<f64> = grid.nodes().iter().copied().filter(|x| (0.01..=50.0).contains(&(x * sg))).collect();
    let diffs: Vec<f64> = nodes.iter().map(|&x| log_potential_at(&beta, x) - log_potential_at(&src, x)).collect();
    let max_potential_defect = diffs.iter().map(|d| d.abs()).fold(0.0, f64::max);
    let density_defect = if atoms.len() == 1 && target == HalfLine::Negative {
        let (a, m) = atoms[0];
        let xs: Vec<f64> = (0..=200).map(|k| -(0.01f64.ln() + (50f64 / 0.01).ln() * k as f64 / 200.0).exp()).collect();
        Some(xs.iter().map(|&x| (beta.density_at(x) - m * point_mass_balayage_density(a, x)).abs()).fold(0.0, f64::max))
    } else {
        None
    };
    art.measure("balayage.csv", &beta)?;
    art.json(
        "report.json",
        &json!({
            "target": b.target,
            "atoms": atoms,
            "cells": grid.len(),
            "mass": beta.total(),
            "source_mass": src.total(),
            "max_potential_defect": max_potential_defect,
            "max_density_defect_vs_closed_form": density_defect,
        }),
    )?;
    Ok(Status::Ok)
}

/// Runs one command, writing artifacts and `manifest.json` into `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<Status> {
    cfg.validate()?;
    let mut art = Artifacts::new(out)?;
    info!("{} -> {}", cfg.command.name(), out.display());
    let status = match cfg.command {
        Command::SolveScalar => {
            let sol = scalar(cfg)?;
            art.measure("measure.csv", &sol.measure)?;
            art.json("report.json", &scalar_report(&sol, cfg)?)?;
            if sol.converged {
                Status::Ok
            } else {
                Status::NotConverged("scalar minimization did not reach its KKT tolerance".into())
            }
        }
        Command::SolveVector => {
            let t = cfg.theta()?;
            let sol = vector(cfg, t.q, t.r)?;
            for j in sol.family.indices() {
                art.measure(&format!("component_{j}.csv"), sol.component(j).unwrap())?;
            }
            art.json(
                "report.json",
                &json!({
                    "q": sol.q,
                    "r": sol.r,
                    "ell": sol.ell,
                    "masses": sol.family.indices().map(|j| (j, sol.component(j).unwrap().total())).collect::<Vec<_>>(),
                    "sweeps": sol.sweeps,
                    "converged": sol.converged,
                    "truncation": sol.truncation,
                    "nominal_radii": sol.nominal_radii,
                    "advisories": sol.advisories,
                    "variational": sol.report,
                    "history": sol.history,
                }),
            )?;
            if sol.converged {
                Status::Ok
            } else {
                Status::NotConverged(format!("no convergence after {} sweeps", sol.sweeps))
            }
        }
        Command::AnalyticCheck => {
            let rep = analytic_check(cfg.r.unwrap_or(2), cfg.analytic.a)?;
            art.json("report.json", &rep)?;
            Status::Ok
        }
        Command::Balayage => balayage(cfg, &mut art)?,
        Command::SpectralCurve => {
            let t = cfg.theta()?;
            let s = scalar(cfg)?;
            let vs = if t.r >= 2 { Some(vector(cfg, 1, t.r)?) } else { None };
            let fit = spectral_curve(&s, vs.as_ref(), &cfg.field.derivative()?, None, None)?;
            art.json("curve.json", &fit)?;
            let worst = fit.holdout_residual.max(fit.root_residual).max(fit.f_residual.unwrap_or(0.0));
            if worst <= cfg.tolerances.curve {
                Status::Ok
            } else {
                let per_k: Vec<String> = fit.symmetric.iter().map(|s| format!("e{} {:.2e}", s.k, s.holdout_residual)).collect();
                Status::NotConverged(format!("curve residual {worst:.2e} above {:.1e} ({})", cfg.tolerances.curve, per_k.join(", ")))
            }
        }
        Command::Sample => {
            let s = sample(cfg)?;
            art.put("histogram.csv", histogram_csv(&s))?;
            art.json("stats.json", &summary(&s, &sampler_opts(cfg)))?;
            Status::Ok
        }
        Command::Compare => {
            let sol = scalar(cfg)?;
            let s = sample(cfg)?;
            let d = compare_cdf(&s, &sol);
            art.put("histogram.csv", histogram_csv(&s))?;
            art.measure("measure.csv", &sol.measure)?;
            art.json(
                "compare.json",
                &json!({ "sup_cdf_distance": d, "stats": summary(&s, &sampler_opts(cfg)), "solver": scalar_report(&sol, cfg)? }),
            )?;
            Status::Ok
        }
    };
    art.finish(cfg, &status)?;
    Ok(status)
}
