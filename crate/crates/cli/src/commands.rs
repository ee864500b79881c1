//! One function per subcommand. Each writes `<name>.csv` plus a JSON
//! manifest `<name>.json` into the output directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use nhgauge::doublon::{self, linspace, phase_diagram, reality_criterion};
use nhgauge::floquet::{convergence_ratios, convergence_sweep, quoted_couplings, write_convergence_csv};
use nhgauge::linalg::hausdorff_distance;
use nhgauge::observables::cluster_weight;
use nhgauge::spectral::{self, complex_sector};
use nhgauge::topology::doublon_winding_closed_form;
use nhgauge::*;
use serde_json::{json, Value};

use crate::config::Settings;

const REALITY_TOLERANCE: f64 = 1e-8;

struct Outputs {
    csv: std::path::PathBuf,
    manifest: std::path::PathBuf,
}

impl Outputs {
    fn new(dir: &Path, name: &str) -> Self {
        Outputs { csv: dir.join(format!("{name}.csv")), manifest: dir.join(format!("{name}.json")) }
    }

    fn csv_writer(&self) -> Result<BufWriter<File>> {
        let f = File::create(&self.csv).with_context(|| format!("creating {}", self.csv.display()))?;
        Ok(BufWriter::new(f))
    }
}

fn c(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn execute(name: &str, settings: &Settings, dir: &Path) -> Result<()> {
    let out = Outputs::new(dir, name);
    let start = Instant::now();
    let results = match name {
        "spectrum" => spectrum(settings, &out)?,
        "winding" => winding(settings, &out)?,
        "correlator" => correlator(settings, &out)?,
        "skin" => skin(settings, &out)?,
        "doublon" => doublon(settings, &out)?,
        "phase-diagram" => phase(settings, &out)?,
        "floquet" => floquet(settings, &out)?,
        other => bail!("unknown command {other}"),
    };
    let manifest = json!({
        "schema_version": 1,
        "tool": "nhgauge",
        "version": env!("CARGO_PKG_VERSION"),
        "command": name,
        "config": settings,
        "results": results,
        "outputs": { "csv": out.csv.file_name().and_then(|s| s.to_str()) },
        "timings": { "total_seconds": start.elapsed().as_secs_f64() },
    });
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&out.manifest, text + "\n").with_context(|| format!("writing {}", out.manifest.display()))?;
    Ok(())
}

fn solve(settings: &Settings) -> Result<(ModelParams, ManyBodyMatrix, ComplexSpectrum)> {
    let params = settings.model()?;
    let h = build_hamiltonian(&params)?;
    let s = eigendecompose(&h)?;
    Ok((params, h, s))
}

fn spectrum(settings: &Settings, out: &Outputs) -> Result<Value> {
    let (params, h, s) = solve(settings)?;
    let rows = diagnostics(&s, h.basis(), params.boundary, None)?;
    let mut w = out.csv_writer()?;
    writeln!(w, "index,re,im,residual,cluster_weight,center_of_mass,participation_ratio")?;
    for (i, (d, r)) in rows.iter().zip(s.residuals()).enumerate() {
        writeln!(
            w,
            "{i},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            d.energy.re, d.energy.im, r, d.cluster_weight, d.center_of_mass, d.participation_ratio
        )?;
    }
    w.flush()?;
    let threshold = settings.complex_threshold.unwrap_or(spectral::DEFAULT_COMPLEX_THRESHOLD);
    let cut = settings.cluster_threshold.unwrap_or(observables::CLUSTER_THRESHOLD);
    let complex = complex_sector(s.eigenvalues(), threshold);
    let bound = complex.iter().filter(|&&i| rows[i].cluster_weight >= cut).count();
    Ok(json!({
        "dimension": s.len(),
        "hermiticity_defect": h.hermiticity_defect(),
        "matrix_norm": s.matrix_norm(),
        "max_imag": s.max_imag(),
        "max_residual": s.residuals().iter().cloned().fold(0.0, f64::max),
        "complex_states": complex.len(),
        "complex_states_clustered": bound,
        "clustered_states": rows.iter().filter(|d| d.cluster_weight >= cut).count(),
    }))
}

fn gap_point(settings: &Settings, eigenvalues: &[Complex64]) -> Result<PointGapProbe> {
    Ok(match settings.delta()? {
        Some(delta) => PointGapProbe::new(eigenvalues, delta),
        None => suggest_gap_point(eigenvalues, settings.complex_threshold.unwrap_or_default())?,
    })
}

fn winding_options(settings: &Settings) -> WindingOptions {
    let mut options = WindingOptions::with_grid(settings.grid.unwrap_or(256));
    options.max_grid_size = settings.max_grid.unwrap_or(4096).max(options.grid_size);
    options
}

fn winding(settings: &Settings, out: &Outputs) -> Result<Value> {
    let params = settings.model()?;
    if !params.boundary.is_periodic() {
        bail!("the winding number needs a periodic chain (--pbc)");
    }
    let h = build_hamiltonian(&params)?;
    let ev = spectral::eigenvalues(h.matrix().as_ref())?;
    let probe = gap_point(settings, &ev)?;
    let result = winding_number(&params, probe.delta, &winding_options(settings))?;
    let mut w = out.csv_writer()?;
    result.write_csv(&mut w)?;
    w.flush()?;
    Ok(json!({
        "delta": c(result.delta),
        "delta_auto": settings.delta()?.is_none(),
        "winding": result.winding,
        "phase_accumulation": result.phase_accumulation,
        "estimators_agree": result.estimators_agree(),
        "grid_size": result.grid_size(),
        "min_distance": result.min_distance,
        "max_phase_step": result.max_phase_step,
    }))
}

fn correlator(settings: &Settings, out: &Outputs) -> Result<Value> {
    let (params, h, s) = solve(settings)?;
    let k = settings.k.unwrap_or(0);
    let rows = diagnostics(&s, h.basis(), params.boundary, Some(k))?;
    let mut w = out.csv_writer()?;
    let columns: Vec<String> = (0..params.sites).map(|j| format!("g_{j}")).collect();
    writeln!(w, "index,re,im,cluster_weight,{}", columns.join(","))?;
    for (i, d) in rows.iter().enumerate() {
        write!(w, "{i},{:.16e},{:.16e},{:.16e}", d.energy.re, d.energy.im, d.cluster_weight)?;
        for g in d.correlator_row.as_deref().unwrap_or_default() {
            write!(w, ",{g:.16e}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(json!({ "dimension": s.len(), "reference_site": k }))
}

fn skin(settings: &Settings, out: &Outputs) -> Result<Value> {
    let (params, h, s) = solve(settings)?;
    let metrics = skin_metrics(&s, h.basis())?;
    let rows = diagnostics(&s, h.basis(), params.boundary, None)?;
    let q = metrics.quarter;
    let mut w = out.csv_writer()?;
    writeln!(w, "index,re,im,center_of_mass,participation_ratio,left_weight,right_weight")?;
    for (i, d) in rows.iter().enumerate() {
        let total: f64 = d.density_profile.iter().sum();
        let left: f64 = d.density_profile[..q].iter().sum::<f64>() / total;
        let right: f64 = d.density_profile[params.sites - q..].iter().sum::<f64>() / total;
        writeln!(
            w,
            "{i},{:.16e},{:.16e},{:.16e},{:.16e},{left:.16e},{right:.16e}",
            d.energy.re, d.energy.im, d.center_of_mass, d.participation_ratio
        )?;
    }
    w.flush()?;
    Ok(json!({
        "quarter": q,
        "left_edge_fraction": metrics.left_edge_fraction,
        "right_edge_fraction": metrics.right_edge_fraction,
        "dominant_edge_fraction": metrics.dominant_edge_fraction(),
    }))
}

fn doublon(settings: &Settings, out: &Outputs) -> Result<Value> {
    let (params, h, s) = solve(settings)?;
    let dp = derive_doublon_params(&params);
    let dh = doublon::doublon_realspace(&dp, params.boundary, settings.termination()?)?;
    let dev = spectral::eigenvalues(dh.as_ref())?;
    let cut = settings.cluster_threshold.unwrap_or(observables::CLUSTER_THRESHOLD);
    let mut clustered = Vec::new();
    for (i, e) in s.eigenvalues().iter().enumerate() {
        if cluster_weight(&s.eigenvector(i), h.basis(), params.boundary)? >= cut {
            clustered.push(*e);
        }
    }

    let mut w = out.csv_writer()?;
    writeln!(w, "source,index,re,im")?;
    for (source, values) in [("doublon", &dev), ("clustered", &clustered)] {
        for (i, e) in values.iter().enumerate() {
            writeln!(w, "{source},{i},{:.16e},{:.16e}", e.re, e.im)?;
        }
    }
    w.flush()?;

    let bloch = if params.boundary.is_periodic() {
        let probe = gap_point(settings, &dev)?;
        let options = winding_options(settings);
        let r = doublon_bloch_winding(&dp, probe.delta, &options)?;
        json!({
            "delta": c(probe.delta),
            "winding": r.winding,
            "closed_form": doublon_winding_closed_form(&dp, probe.delta, options.max_grid_size),
        })
    } else {
        Value::Null
    };
    let criterion = if dp.has_real_gauge_couplings() { Some(reality_criterion(&dp)?) } else { None };
    Ok(json!({
        "couplings": { "j1": c(dp.j1), "j2": c(dp.j2), "j3": c(dp.j3), "j4": c(dp.j4) },
        "cells": dp.cells,
        "doublon_states": dev.len(),
        "clustered_states": clustered.len(),
        "hausdorff_distance": hausdorff_distance(&dev, &clustered),
        "doublon_max_imag": dev.iter().map(|e| e.im.abs()).fold(0.0, f64::max),
        "reality_criterion": criterion,
        "bloch": bloch,
    }))
}

fn phase(settings: &Settings, out: &Outputs) -> Result<Value> {
    let params = settings.model()?;
    let range = settings.range.unwrap_or(2.0);
    let gammas = linspace(-range, range, settings.points.unwrap_or(20));
    let points = phase_diagram(params.t, params.sites, &gammas, settings.termination()?)?;
    let mut w = out.csv_writer()?;
    writeln!(w, "gamma_l,gamma_r,criterion,max_imag,is_real")?;
    for p in &points {
        writeln!(
            w,
            "{:.16e},{:.16e},{},{:.16e},{}",
            p.gamma_l,
            p.gamma_r,
            p.criterion,
            p.max_imag,
            p.is_real(REALITY_TOLERANCE)
        )?;
    }
    w.flush()?;
    let mismatches = points.iter().filter(|p| p.criterion != p.is_real(REALITY_TOLERANCE)).count();
    Ok(json!({ "points": points.len(), "mismatches": mismatches, "reality_tolerance": REALITY_TOLERANCE }))
}

fn floquet(settings: &Settings, out: &Outputs) -> Result<Value> {
    let protocol = settings.protocol()?;
    let params = settings.model()?;
    let basis = Arc::new(params.basis()?);
    let freqs = settings.frequencies()?;
    let form = settings.form()?;
    let points = convergence_sweep(&protocol, &freqs, &basis, form, StepControl::default())?;
    let mut w = out.csv_writer()?;
    write_convergence_csv(&points, &mut w)?;
    w.flush()?;

    let mapped = effective_model_params(&protocol, params.sites, params.particles).ok().map(
        |m| json!({ "t": m.t, "gamma_l": c(m.gamma_l), "gamma_r": c(m.gamma_r), "interaction": c(m.interaction) }),
    );
    let quoted = quoted_couplings(&protocol).map(|(gl, gr)| json!({ "gamma_l": c(gl), "gamma_r": c(gr) }));
    Ok(json!({
        "period": protocol.period(),
        "ratios": convergence_ratios(&points),
        "max_matched_distance": points.iter().map(|p| p.max_matched_distance).collect::<Vec<_>>(),
        "effective_model": mapped,
        "quoted_couplings": quoted,
    }))
}
