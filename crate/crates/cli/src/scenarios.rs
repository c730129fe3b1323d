//! Named scenarios. Each returns the files it wants written; nothing touches disk here.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use soc_metrology::measurement::{
    classical_fisher_information, mle_monte_carlo, pair_correlation_distribution, single_particle_distribution,
    MleConfig,
};
use soc_metrology::metrology::{
    generator_prefactor, local_generator, qfi_bosonic_asymptotic, qfi_mixed_spectral, qfi_bosonic_excited_analytic, qfi_collective_variance,
    qfi_fermionic_analytic, qfi_single_particle_analytic, qfi_thermal_closed_form, qfi_thermal_geometric,
    qfi_thermal_spectral, relative_gap, sql_hl_thresholds, VarianceRoute, MAX_COMBINATORIAL_ATOMS,
};
use soc_metrology::models::{thermal_cutoff, thermal_state};
use soc_metrology::{Grid1D, ManyBodyProbe, ModelParams, Observable, SqueezedFockState, Statistics};

use crate::config::{RunConfig, Scenario, SweepParameter, SweepSpec, Spacing, FIG2_RATIO_CAP};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, json_report, Artifact, CsvTable};

pub fn run(config: &RunConfig) -> CliResult<Vec<Artifact>> {
    let scenario = config.scenario.ok_or_else(|| CliError::Config("no scenario given".into()))?;
    match scenario {
        Scenario::Fig2 => fig2(config),
        Scenario::Scaling => scaling(config),
        Scenario::Thermal => thermal(config),
        Scenario::Limits => limits(config),
        Scenario::Mle => mle(config),
    }
}

fn sweep_values(config: &RunConfig, expected: SweepParameter, default: SweepSpec) -> CliResult<Vec<f64>> {
    let sweep = config.sweep.clone().unwrap_or(default);
    if sweep.parameter != expected {
        return Err(CliError::Config(format!("this scenario sweeps {expected:?}, not {:?}", sweep.parameter)));
    }
    Ok(sweep.values())
}

/// Rejects NaN, infinite and negative Fisher values before anything is written.
fn check_information(label: &str, at: f64, values: &[f64]) -> CliResult<()> {
    for &v in values {
        if !(v.is_finite() && v >= 0.0) {
            return Err(CliError::Numerical {
                context: format!("{label} at {at}"),
                source: soc_metrology::Error::Numerical(format!("invalid Fisher information {v}")),
            });
        }
    }
    Ok(())
}

/// Position grid wide enough for every Omega touched by a two-step central difference.
fn stencil_grid(p: &ModelParams, n_max: usize, step: f64, points: usize) -> CliResult<Grid1D> {
    let widest = p.with_omega_atom(p.omega_atom - 2.5 * step).squeeze().map_err(|e| CliError::at("grid", e))?;
    let g = Grid1D::default_for(widest, n_max, p, Observable::Position).map_err(|e| CliError::at("grid", e))?;
    Ok(Grid1D { n_points: points, ..g })
}

#[derive(Serialize)]
struct Fig2Point {
    k_over_kc: f64,
    qfi_analytic: f64,
    cfi_position: f64,
    relative_gap: f64,
    richardson_rel_diff: Option<f64>,
    excluded_mass: Option<f64>,
    notes: Vec<String>,
}

fn fig2(config: &RunConfig) -> CliResult<Vec<Artifact>> {
    let default = SweepSpec { parameter: SweepParameter::KOverKc, start: 0.1, stop: FIG2_RATIO_CAP, points: 12, spacing: Spacing::Linear };
    let ratios = sweep_values(config, SweepParameter::KOverKc, default)?;
    if let Some(&r) = ratios.iter().chain(&config.fig2.density_at).find(|&&r| !(0.0..=FIG2_RATIO_CAP).contains(&r)) {
        return Err(CliError::Config(format!("fig2 accepts k/k_c in [0, {FIG2_RATIO_CAP}], got {r}")));
    }
    let base = config.params.with_n_atoms(2);
    let points = config.numerics.grid_points;

    let rows = ratios
        .par_iter()
        .map(|&r| -> CliResult<Fig2Point> {
            let p = base.with_ratio(r);
            let step = config.numerics.d_omega_rel * p.omega_atom;
            let grid = stencil_grid(&p, 1, step, points)?;
            let provider = |q: &ModelParams| {
                let probe = ManyBodyProbe::new(Statistics::Fermionic, 2, q.squeeze()?)?;
                pair_correlation_distribution(&probe, &grid, q, Observable::Position)
            };
            let ctx = format!("k/k_c = {r}");
            let cfi = classical_fisher_information(provider, &p, Some(step)).map_err(|e| CliError::at(&ctx, e))?;
            let qfi = qfi_fermionic_analytic(&p).map_err(|e| CliError::at(&ctx, e))?.value;
            check_information("fig2", r, &[cfi.value, qfi])?;
            Ok(Fig2Point {
                k_over_kc: r,
                qfi_analytic: qfi,
                cfi_position: cfi.value,
                relative_gap: relative_gap(cfi.value, qfi),
                richardson_rel_diff: cfi.metadata.richardson_rel_diff,
                excluded_mass: cfi.metadata.excluded_mass,
                notes: cfi.metadata.notes,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut table = CsvTable::new(config, "fig2", &["k_over_kc", "qfi_analytic", "cfi_position", "relative_gap"]);
    table.meta("n_atoms", "2 (forced)");
    table.meta("Omega", fmt_f64(base.omega_atom));
    table.meta("omega", fmt_f64(base.omega));
    table.meta("grid_points_per_axis", points);
    table.meta("d_omega_rel", fmt_f64(config.numerics.d_omega_rel));
    table.meta("k_over_kc_cap", fmt_f64(FIG2_RATIO_CAP));
    for row in &rows {
        table.push(vec![fmt_f64(row.k_over_kc), fmt_f64(row.qfi_analytic), fmt_f64(row.cfi_position), fmt_f64(row.relative_gap)]);
    }

    let mut diagnostics = Vec::new();
    for row in &rows {
        if row.cfi_position > row.qfi_analytic * 1.01 {
            diagnostics.push(format!("k/k_c = {}: CFI exceeds QFI by more than 1%", row.k_over_kc));
        }
        diagnostics.extend(row.notes.iter().map(|n| format!("k/k_c = {}: {n}", row.k_over_kc)));
    }
    let max_gap = rows.iter().map(|r| r.relative_gap).fold(0.0, f64::max);
    let mut artifacts = vec![
        Artifact::main("csv", table.render()),
        Artifact::extra(
            "",
            "json",
            json_report(
                config,
                json!({ "points": rows, "max_relative_gap": max_gap, "k_over_kc_cap": FIG2_RATIO_CAP }),
                json!(diagnostics),
            ),
        ),
    ];

    for &r in &config.fig2.density_at {
        let p = base.with_ratio(r);
        let xi = p.squeeze().map_err(|e| CliError::at("density dump", e))?;
        let grid = Grid1D { n_points: config.fig2.density_points, ..Grid1D::default_for(xi, 1, &p, Observable::Position).map_err(|e| CliError::at("density dump", e))? };
        let probe = ManyBodyProbe::new(Statistics::Fermionic, 2, xi).map_err(|e| CliError::at("density dump", e))?;
        let dist = pair_correlation_distribution(&probe, &grid, &p, Observable::Position).map_err(|e| CliError::at("density dump", e))?;
        let mut t = CsvTable::new(config, "fig2-density", &["x1", "x2", "density"]);
        t.meta("k_over_kc", fmt_f64(r));
        t.meta("captured_mass", fmt_f64(dist.captured_mass));
        for i in 0..grid.n_points {
            for j in 0..grid.n_points {
                let d = dist.pair_density(i, j).unwrap_or(0.0);
                t.push(vec![fmt_f64(grid.point(i)), fmt_f64(grid.point(j)), fmt_f64(d)]);
            }
        }
        artifacts.push(Artifact::extra(format!("_density_k{r}"), "csv", t.render()));
    }
    Ok(artifacts)
}

fn column_name(s: Statistics) -> &'static str {
    match s {
        Statistics::Fermionic => "qfi_fermionic",
        Statistics::SymmetricBosonic => "qfi_symmetric_bosonic",
        Statistics::TonksGirardeau => "qfi_tonks_girardeau",
    }
}

/// Least-squares slope of `ln y` against `ln n`.
pub fn loglog_slope(points: &[(usize, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|&(n, y)| ((n as f64).ln(), y.ln())).collect();
    let m = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / m;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / m;
    let num: f64 = xy.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xy.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    (den > 0.0).then(|| num / den)
}

fn scaling(config: &RunConfig) -> CliResult<Vec<Artifact>> {
    let spec = &config.scaling;
    if spec.n_list.is_empty() || spec.n_list.contains(&0) || spec.statistics.is_empty() {
        return Err(CliError::Config("scaling needs a non-empty n_list of positive atom numbers and statistics".into()));
    }
    let base = config.params_at(config.k_over_kc);
    let mut diagnostics = Vec::new();
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); spec.statistics.len()];
    let mut table = CsvTable::new(config, "scaling", &[]);
    table.columns = std::iter::once("n_atoms".to_string())
        .chain(spec.statistics.iter().map(|&s| column_name(s).to_string()))
        .collect();
    table.meta("k_over_kc", fmt_f64(config.k_over_kc));
    table.meta("Omega", fmt_f64(base.omega_atom));
    table.meta("tonks_girardeau", "equal to fermionic by construction; generator variance checked for N <= 12");

    for &n in &spec.n_list {
        let p = base.with_n_atoms(n);
        let mut row = vec![n.to_string()];
        for (col, &stats) in spec.statistics.iter().enumerate() {
            let v = match stats {
                Statistics::Fermionic | Statistics::TonksGirardeau => qfi_fermionic_analytic(&p),
                Statistics::SymmetricBosonic => qfi_bosonic_excited_analytic(&p),
            }
            .map_err(|e| CliError::at(format!("N = {n}"), e))?
            .value;
            check_information("scaling", n as f64, &[v])?;
            if n <= MAX_COMBINATORIAL_ATOMS {
                let probe = ManyBodyProbe::for_params(stats, &p).map_err(|e| CliError::at("probe", e))?;
                let var = qfi_collective_variance(&probe, &p, n + 4, VarianceRoute::Combinatorial)
                    .map_err(|e| CliError::at(format!("N = {n}"), e))?
                    .value;
                if relative_gap(var, v) > 1e-10 {
                    diagnostics.push(format!("N = {n} {stats:?}: generator variance {var} differs from closed form {v}"));
                }
            }
            columns[col].push((n, v));
            row.push(fmt_f64(v));
        }
        table.push(row);
    }

    let mut slopes = serde_json::Map::new();
    for (col, &stats) in spec.statistics.iter().enumerate() {
        let pts = &columns[col];
        let window: Vec<(usize, f64)> = match stats {
            Statistics::SymmetricBosonic => pts.iter().copied().filter(|&(n, _)| n >= 50).collect(),
            _ => pts.iter().copied().filter(|&(n, _)| (2..=100).contains(&n)).collect(),
        };
        slopes.insert(
            column_name(stats).to_string(),
            json!({ "all": loglog_slope(pts), "window": loglog_slope(&window),
                    "window_rule": if stats == Statistics::SymmetricBosonic { "N >= 50" } else { "2 <= N <= 100" } }),
        );
    }
    let n_max = *spec.n_list.iter().max().unwrap();
    let kf = base.k;
    let asym = qfi_bosonic_asymptotic(&base.with_n_atoms(n_max), kf).map_err(|e| CliError::at("asymptotic", e))?.value;
    let exact = qfi_bosonic_excited_analytic(&base.with_n_atoms(n_max)).map_err(|e| CliError::at("asymptotic", e))?.value;
    let results = json!({
        "slopes": slopes,
        "bosonic_exact_over_asymptotic": { "n_atoms": n_max, "ratio": exact / asym },
    });
    Ok(vec![Artifact::main("csv", table.render()), Artifact::extra("", "json", json_report(config, results, json!(diagnostics)))])
}

#[derive(Serialize)]
struct ThermalPoint {
    beta_omega: f64,
    closed_form: f64,
    spectral: f64,
    geometric: f64,
    relative_gap: f64,
    cutoff: usize,
}

fn thermal(config: &RunConfig) -> CliResult<Vec<Artifact>> {
    let mut bws = match &config.sweep {
        Some(_) => sweep_values(config, SweepParameter::BetaOmega, SweepSpec { parameter: SweepParameter::BetaOmega, start: 0.2, stop: 50.0, points: 2, spacing: Spacing::Log })?,
        None => vec![0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0],
    };
    bws.sort_by(f64::total_cmp);
    let base = config.params_at(config.k_over_kc);
    let rows = bws
        .par_iter()
        .map(|&bw| -> CliResult<ThermalPoint> {
            let p = base.with_beta(Some(bw / base.omega));
            let ctx = format!("beta*omega = {bw}");
            let closed = qfi_thermal_closed_form(&p).map_err(|e| CliError::at(&ctx, e))?.value;
            let cutoff = config.numerics.cutoff.unwrap_or_else(|| thermal_cutoff(&p));
            let spectral = match config.numerics.cutoff {
                None => qfi_thermal_spectral(&p),
                Some(c) => thermal_state(&p, c).and_then(|t| qfi_mixed_spectral(&t.populations, &local_generator(&p, c + 2)?)),
            }
            .map_err(|e| CliError::at(&ctx, e))?
            .value;
            let geometric = qfi_thermal_geometric(&p).map_err(|e| CliError::at(&ctx, e))?.value;
            check_information("thermal", bw, &[closed, spectral, geometric])?;
            Ok(ThermalPoint { beta_omega: bw, closed_form: closed, spectral, geometric, relative_gap: relative_gap(closed, spectral), cutoff })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut table = CsvTable::new(config, "thermal", &["beta_omega", "qfi_closed_form", "qfi_spectral", "qfi_geometric", "relative_gap"]);
    table.meta("k_over_kc", fmt_f64(config.k_over_kc));
    table.meta("Omega", fmt_f64(base.omega_atom));
    table.meta("cutoffs", rows.iter().map(|r| r.cutoff.to_string()).collect::<Vec<_>>().join(" "));
    for r in &rows {
        table.push(vec![fmt_f64(r.beta_omega), fmt_f64(r.closed_form), fmt_f64(r.spectral), fmt_f64(r.geometric), fmt_f64(r.relative_gap)]);
    }
    let non_increasing = |f: fn(&ThermalPoint) -> f64| rows.windows(2).all(|w| f(&w[1]) <= f(&w[0]));
    let zero_t = qfi_single_particle_analytic(&base).map_err(|e| CliError::at("zero temperature", e))?.value;
    let coldest = rows.last().unwrap();
    let max_closed_gap = rows.iter().map(|r| r.relative_gap).fold(0.0, f64::max);
    let max_geometric_gap = rows.iter().map(|r| relative_gap(r.geometric, r.spectral)).fold(0.0, f64::max);
    let mut diagnostics = Vec::new();
    if max_closed_gap > 1e-6 {
        diagnostics.push(format!(
            "printed closed form departs from the normalized spectral sum by up to {max_closed_gap:.4e}; the geometric closed form agrees to {max_geometric_gap:.1e}"
        ));
    }
    let results = json!({
        "points": rows,
        "monotone_closed_form": non_increasing(|r| r.closed_form),
        "monotone_spectral": non_increasing(|r| r.spectral),
        "coldest_vs_zero_temperature": relative_gap(coldest.spectral, zero_t),
        "max_relative_gap_closed_form": max_closed_gap,
        "max_relative_gap_geometric": max_geometric_gap,
    });
    Ok(vec![Artifact::main("csv", table.render()), Artifact::extra("", "json", json_report(config, results, json!(diagnostics)))])
}

fn limits(config: &RunConfig) -> CliResult<Vec<Artifact>> {
    let p = config.params;
    let k_f = config.k_over_kc * p.critical_coupling();
    let report = sql_hl_thresholds(&p, k_f).map_err(|e| CliError::at("thresholds", e))?;
    let at = p.with_k(k_f);
    let mut diagnostics: Vec<String> = at.advisories().iter().map(|a| format!("advisory: {a:?}")).collect();
    diagnostics.push("threshold flags hold up to numerical factors; compare margins".into());
    let results = json!({
        "inputs": {
            "omega": p.omega, "Omega": p.omega_atom, "gamma": p.gamma, "n_atoms": p.n_atoms,
            "k_f_over_kc": config.k_over_kc, "Omega_over_omega": p.omega_atom / p.omega,
        },
        "report": report,
        "n_ceiling": report.excitation_ceiling,
        "n_min": report.n_min,
    });
    Ok(vec![Artifact::main("json", json_report(config, results, json!(diagnostics)))])
}

fn mle(config: &RunConfig) -> CliResult<Vec<Artifact>> {
    let p = config.params_at(config.k_over_kc);
    let spec = &config.mle;
    let estimator: &MleConfig = &spec.estimator;
    let mode = spec.mode;
    // QFI of S(xi)|n> bounds the CFI from above, so this bracket estimate is the narrowest one
    let c = generator_prefactor(&p).map_err(|e| CliError::at("mle", e))?;
    let qfi = 8.0 * (1 + mode + mode * mode) as f64 * c * c;
    if !(qfi > 0.0) {
        return Err(CliError::Config("mle needs k_over_kc > 0".into()));
    }
    let half = estimator.bracket_sigmas / (spec.sample_count as f64 * qfi).sqrt();
    let grid = stencil_grid(&p, mode, half * 1.2 / 2.5, config.numerics.grid_points)?;
    let provider = |q: &ModelParams| single_particle_distribution(&SqueezedFockState::new(mode, q.squeeze()?)?, &grid, q, Observable::Position);
    let run = mle_monte_carlo(provider, &p, spec.sample_count, config.numerics.seed, estimator).map_err(|e| CliError::at("mle", e))?;
    let results = json!({
        "true_Omega": run.true_omega,
        "sample_count": run.sample_count,
        "batches": run.estimates.len(),
        "mean": run.mean,
        "bias": run.bias,
        "empirical_variance": run.empirical_variance,
        "fisher_per_sample": run.fisher_per_sample,
        "qfi_per_sample": qfi,
        "cramer_rao": run.cramer_rao,
        "variance_ratio": run.variance_ratio,
        "bracket": [run.bracket.0, run.bracket.1],
        "estimates": run.estimates,
    });
    let diagnostics: Vec<Value> = Vec::new();
    Ok(vec![Artifact::main("json", json_report(config, results, json!(diagnostics)))])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Overrides;

    fn resolve(scenario: Scenario, params: &[&str]) -> RunConfig {
        RunConfig::resolve(
            None,
            &Overrides { scenario: Some(scenario), params: params.iter().map(|s| s.to_string()).collect(), ..Default::default() },
        )
        .unwrap()
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(usize, f64)> = (1..20).map(|n| (n, 3.0 * (n as f64).powi(2))).collect();
        assert!((loglog_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert!(loglog_slope(&pts[..1]).is_none());
    }

    #[test]
    fn fig2_rejects_points_beyond_cap() {
        let c = resolve(Scenario::Fig2, &["sweep.parameter=k-over-kc", "sweep.start=0.5", "sweep.stop=0.995", "sweep.points=3"]);
        assert_eq!(run(&c).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn fig2_zero_coupling_row() {
        let c = resolve(
            Scenario::Fig2,
            &["sweep.parameter=k-over-kc", "sweep.start=0", "sweep.stop=0.5", "sweep.points=2", "numerics.grid_points=128"],
        );
        let out = run(&c).unwrap();
        let csv = &out[0].content;
        let first = csv.lines().find(|l| l.starts_with("0,")).unwrap();
        assert_eq!(first, "0,0,0,0");
    }

    #[test]
    fn scaling_tg_column_equals_fermionic() {
        let out = run(&resolve(Scenario::Scaling, &[])).unwrap();
        for line in out[0].content.lines().filter(|l| !l.starts_with('#')).skip(1) {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells[1], cells[3]);
        }
        let report: Value = serde_json::from_str(&out[1].content).unwrap();
        assert_eq!(report["diagnostics"], json!([]));
    }

    #[test]
    fn thermal_rejects_wrong_sweep() {
        let c = resolve(Scenario::Thermal, &["sweep.parameter=k-over-kc", "sweep.start=0.1", "sweep.stop=0.5", "sweep.points=3"]);
        assert_eq!(run(&c).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn limits_echo_inputs() {
        let c = resolve(Scenario::Limits, &["params.Omega=1000", "k_over_kc=0.5"]);
        let out = run(&c).unwrap();
        let r: Value = serde_json::from_str(&out[0].content).unwrap();
        assert_eq!(r["results"]["inputs"]["Omega"], json!(1000.0));
        assert!((r["results"]["n_ceiling"].as_f64().unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(r["config"]["params"]["Omega"], json!(1000.0));
    }

    #[test]
    fn missing_scenario() {
        assert_eq!(run(&RunConfig::default()).unwrap_err().exit_code(), 2);
    }
}
