//! One function per subcommand. Each returns its table, its JSON document
//! and the one-line summary; [`crate::cli`] decides where they go.

use modalmr_core::harness::{
    gamma_sweep_tasks, learning_curve_cells, robustness_replicate, run_learning_curve_cell,
    run_replicate, summarize_gamma_sweep, summarize_learning_curve, summarize_robustness,
    ExperimentConfig,
};
use modalmr_core::robustness::contamination_experiment;
use modalmr_core::solver::RmrModel;
use modalmr_core::{ChainFamily, PhiKind, RepresentingFunction, VERSION};
use serde::Serialize;
use serde_json::{json, Value};

use crate::cli::{
    BreakdownArgs, ChainInfoArgs, CheckKernelArgs, Command, FitArgs, GammaSweepArgs,
    LearningCurveArgs, PredictArgs, RobustCompareArgs,
};
use crate::formats::{self, csv, fmt12};
use crate::parallel;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub csv: Option<String>,
    pub json: Option<Value>,
    pub summary: String,
    /// Set when the command ran but its check did not pass.
    pub failure: Option<String>,
}

pub fn run(command: &Command) -> Result<Report, CliError> {
    match command {
        Command::ChainInfo(a) => chain_info(a),
        Command::CheckKernel(a) => check_kernel(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::LearningCurve(a) => learning_curve(a),
        Command::GammaSweep(a) => gamma_sweep(a),
        Command::Breakdown(a) => breakdown(a),
        Command::RobustCompare(a) => robust_compare(a),
    }
}

fn manifest<A: Serialize>(command: &str, args: &A, summary: Value) -> Value {
    json!({
        "command": command,
        "version": VERSION,
        "config": serde_json::to_value(args).expect("arguments serialize"),
        "summary": summary,
    })
}

fn list(values: &[f64]) -> String {
    values.iter().map(|&v| fmt12(v)).collect::<Vec<_>>().join(", ")
}

fn opt(value: Option<f64>) -> String {
    value.map_or_else(|| "n/a".to_string(), fmt12)
}

fn chain_info(args: &ChainInfoArgs) -> Result<Report, CliError> {
    let chain = args.chain.build()?;
    let diag = chain.diagnostics(args.k_max, args.t_max)?;
    let summary = format!(
        "states={} reversible={} gamma={} gamma_abs={} gamma_pseudo={} pi=({})",
        chain.n_states(),
        diag.reversible,
        opt(diag.gamma),
        fmt12(diag.gamma_abs),
        fmt12(diag.gamma_pseudo),
        list(&diag.pi),
    );
    let moduli: Vec<f64> = chain
        .eigenvalues()
        .iter()
        .map(|z| z.re.hypot(z.im))
        .collect();
    let json = manifest(
        "chain-info",
        args,
        json!({
            "n_states": chain.n_states(),
            "dim": chain.dim(),
            "pi": diag.pi,
            "reversible": diag.reversible,
            "gamma": diag.gamma,
            "gamma_abs": diag.gamma_abs,
            "gamma_pseudo": diag.gamma_pseudo,
            "discount": 2.0 * diag.gamma_abs - diag.gamma_abs * diag.gamma_abs,
            "eigenvalue_moduli": moduli,
            "tv_decay": diag.tv_decay,
        }),
    );
    Ok(Report {
        csv: None,
        json: Some(json),
        summary,
        failure: None,
    })
}

fn check_kernel(args: &CheckKernelArgs) -> Result<Report, CliError> {
    let kinds: Vec<PhiKind> = match args.phi {
        Some(phi) => vec![phi.kind()],
        None => PhiKind::ALL
            .into_iter()
            .filter(|k| RepresentingFunction::new(*k).is_calibrated())
            .collect(),
    };
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for kind in &kinds {
        let report = RepresentingFunction::new(*kind).check_calibration(args.halfwidth, args.points)?;
        let passes = report.passes(args.integral_tol);
        if !passes {
            failed.push(kind.name());
        }
        rows.push(vec![
            kind.name().to_string(),
            fmt12(report.symmetry_violation),
            fmt12(report.peak_excess),
            fmt12(report.integral),
            fmt12(report.integral_error),
            fmt12(report.second_moment),
            fmt12(report.lipschitz_estimate),
            fmt12(report.lipschitz_bound),
            passes.to_string(),
        ]);
    }
    let table = csv(
        &[
            "phi",
            "symmetry_violation",
            "peak_excess",
            "integral",
            "integral_error",
            "second_moment",
            "lipschitz_estimate",
            "lipschitz_bound",
            "passes",
        ],
        &rows,
    );
    let summary = format!(
        "check-kernel passed={}/{}{}",
        kinds.len() - failed.len(),
        kinds.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" failed={}", failed.join(","))
        }
    );
    let failure = (!failed.is_empty())
        .then(|| format!("representing function {} fails calibration", failed.join(", ")));
    Ok(Report {
        csv: Some(table),
        json: Some(manifest("check-kernel", args, json!({ "failed": failed }))),
        summary,
        failure,
    })
}

fn fit(args: &FitArgs) -> Result<Report, CliError> {
    let data = formats::read_dataset(&args.data)?;
    let kernel = args.kernel.build()?;
    let phi = args.solver.phi();
    let config = args.solver.config(1.0, 1e-2)?;
    let model = RmrModel::fit(kernel, &data.inputs, &data.y, phi, config)?;
    formats::write_text(&args.model, &formats::write_model(&model))?;
    let fitted = model.predict_many(&data.inputs)?;
    let rows: Vec<Vec<String>> = data
        .y
        .iter()
        .zip(&fitted)
        .enumerate()
        .map(|(i, (y, f))| vec![i.to_string(), fmt12(*y), fmt12(*f)])
        .collect();
    let objective = model.objective_trace().last().copied();
    let summary = format!(
        "fit m={} d={} objective={} iterations={} coef_norm={}",
        data.y.len(),
        model.dim(),
        opt(objective),
        model.objective_trace().len(),
        fmt12(model.coef_norm()),
    );
    Ok(Report {
        csv: Some(csv(&["index", "y", "fitted"], &rows)),
        json: Some(manifest(
            "fit",
            args,
            json!({ "objective": objective, "coef_norm": model.coef_norm() }),
        )),
        summary,
        failure: None,
    })
}

fn predict(args: &PredictArgs) -> Result<Report, CliError> {
    let model = formats::read_model(&args.model)?;
    let inputs = formats::parse_inputs(&formats::read_text(&args.data)?, &args.data, model.dim())?;
    let predictions = model.predict_many(&inputs)?;
    let rows: Vec<Vec<String>> = predictions
        .iter()
        .enumerate()
        .map(|(i, p)| vec![i.to_string(), fmt12(*p)])
        .collect();
    Ok(Report {
        csv: Some(csv(&["index", "prediction"], &rows)),
        json: Some(manifest("predict", args, json!({ "n": predictions.len() }))),
        summary: format!("predict n={}", predictions.len()),
        failure: None,
    })
}

fn learning_curve(args: &LearningCurveArgs) -> Result<Report, CliError> {
    let config = ExperimentConfig {
        task: args.task.build()?,
        kernel: args.kernel.build()?,
        phi: args.solver.phi(),
        m_grid: args.m_grid.clone(),
        n_replicates: args.replicates,
        schedule: args.schedule.build(&args.solver)?,
        seed: args.common.seed,
        solver: args.solver.config(1.0, 1e-2)?,
    };
    config.validate()?;
    let gamma = config.task.chain().absolute_spectral_gap();
    config.schedule.parameters(config.m_grid[0], gamma)?;

    let cells = learning_curve_cells(&config);
    let rows = parallel::map(&cells, args.common.jobs, |&(m, r)| {
        log::debug!("learning-curve m={m} replicate={r}");
        run_learning_curve_cell(&config, gamma, m, r)
    });
    let result = summarize_learning_curve(&config, rows);
    if result.failures > 0 {
        log::warn!("{} fits failed and were left out of the slope", result.failures);
    }

    let table: Vec<Vec<String>> = result
        .rows
        .iter()
        .map(|r| {
            vec![
                r.m.to_string(),
                fmt12(r.gamma_abs),
                r.replicate.to_string(),
                fmt12(r.excess_risk.unwrap_or(f64::NAN)),
                fmt12(r.lambda_used),
                fmt12(r.sigma_used),
            ]
        })
        .collect();
    let ci = result
        .slope_ci
        .map_or_else(|| "n/a".to_string(), |(lo, hi)| format!("[{}, {}]", fmt12(lo), fmt12(hi)));
    let summary = format!(
        "learning-curve gamma_abs={} rows={} failures={} slope={} ci90={}",
        fmt12(gamma),
        result.rows.len(),
        result.failures,
        opt(result.slope),
        ci,
    );
    let means: Vec<Value> = result
        .means
        .iter()
        .map(|&(m, mean, n_ok)| json!({ "m": m, "mean_excess_risk": mean, "n_ok": n_ok }))
        .collect();
    let json = manifest(
        "learning-curve",
        args,
        json!({
            "gamma_abs": gamma,
            "means": means,
            "slope": result.slope,
            "slope_ci90": result.slope_ci.map(|(lo, hi)| [lo, hi]),
            "failures": result.failures,
        }),
    );
    Ok(Report {
        csv: Some(csv(
            &["m", "gamma_abs", "replicate", "excess_risk", "lambda", "sigma"],
            &table,
        )),
        json: Some(json),
        summary,
        failure: None,
    })
}

fn gamma_sweep(args: &GammaSweepArgs) -> Result<Report, CliError> {
    let task = args.task.build()?;
    let mut chains = Vec::new();
    for &stay in &args.sweep_stays {
        chains.push(ChainFamily::sticky_uniform(args.task.chain.states, stay).build(args.task.chain.dim)?);
    }
    for path in &args.sweep_chains {
        chains.push(formats::read_chain(path)?);
    }
    if chains.is_empty() {
        chains.push(task.chain().clone());
    }
    let config = ExperimentConfig {
        task,
        kernel: args.kernel.build()?,
        phi: args.solver.phi(),
        m_grid: vec![args.m],
        n_replicates: args.replicates,
        schedule: args.schedule.build(&args.solver)?,
        seed: args.common.seed,
        solver: args.solver.config(1.0, 1e-2)?,
    };
    config.validate()?;
    let tasks = gamma_sweep_tasks(&config, &chains)?;
    for (_, gamma) in &tasks {
        config.schedule.parameters(args.m, *gamma)?;
    }

    let cells: Vec<(usize, usize)> = (0..tasks.len())
        .flat_map(|c| (0..args.replicates).map(move |r| (c, r)))
        .collect();
    let outcomes = parallel::map(&cells, args.common.jobs, |&(c, r)| {
        log::debug!("gamma-sweep chain={c} replicate={r}");
        let (task, gamma) = &tasks[c];
        run_replicate(&config, task, *gamma, args.m, r)
            .ok()
            .map(|o| o.excess_risk)
    });
    let risks: Vec<Vec<Option<f64>>> = outcomes
        .chunks(args.replicates)
        .map(<[Option<f64>]>::to_vec)
        .collect();
    let rows = summarize_gamma_sweep(&tasks, risks);

    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.chain_index.to_string(),
                fmt12(r.gamma_abs),
                fmt12(r.discount),
                fmt12(r.mean_excess_risk),
                (r.risks.len() - r.failures).to_string(),
                r.failures.to_string(),
            ]
        })
        .collect();
    let summary = format!(
        "gamma-sweep m={} chains={} mean_excess_risk_by_gamma=[{}]",
        args.m,
        rows.len(),
        rows.iter()
            .map(|r| format!("{}:{}", fmt12(r.gamma_abs), fmt12(r.mean_excess_risk)))
            .collect::<Vec<_>>()
            .join(", "),
    );
    let per_chain: Vec<Value> = rows
        .iter()
        .map(|r| json!({ "chain_index": r.chain_index, "gamma_abs": r.gamma_abs, "risks": r.risks }))
        .collect();
    Ok(Report {
        csv: Some(csv(
            &["chain_index", "gamma_abs", "discount", "mean_excess_risk", "n_ok", "failures"],
            &table,
        )),
        json: Some(manifest("gamma-sweep", args, json!({ "chains": per_chain }))),
        summary,
        failure: None,
    })
}

fn breakdown(args: &BreakdownArgs) -> Result<Report, CliError> {
    let task = args.task.build()?;
    let report = contamination_experiment(
        &task,
        args.m,
        &args.outliers,
        &args.magnitudes,
        args.kernel.build()?,
        args.solver.phi(),
        args.solver.config(1.0, 1e-2)?,
        args.common.seed,
    )?;
    let table: Vec<Vec<String>> = report
        .curve
        .iter()
        .map(|p| vec![p.n_outliers.to_string(), fmt12(p.magnitude), fmt12(p.coef_norm)])
        .collect();
    let summary = format!(
        "breakdown m={} N={} bracket=[{}, {}] fraction={} clean_norm={}",
        report.m,
        fmt12(report.n_value),
        report.n_star_low,
        report.n_star_high,
        fmt12(report.breakdown_fraction),
        fmt12(report.clean_norm),
    );
    let json = manifest(
        "breakdown",
        args,
        json!({
            "N": report.n_value,
            "bracket": [report.n_star_low, report.n_star_high],
            "fraction": report.breakdown_fraction,
            "m": report.m,
            "clean_norm": report.clean_norm,
        }),
    );
    Ok(Report {
        csv: Some(csv(&["n_outliers", "magnitude", "coef_norm"], &table)),
        json: Some(json),
        summary,
        failure: None,
    })
}

fn robust_compare(args: &RobustCompareArgs) -> Result<Report, CliError> {
    if args.replicates == 0 {
        return Err(CliError::invalid("replicates", "must be at least 1"));
    }
    if args.m == 0 {
        return Err(CliError::invalid("m", "must be at least 1"));
    }
    let task = args.task.build()?;
    let kernel = args.kernel.build()?;
    let phi = args.solver.phi();
    let config = args.solver.config(1.0, 1e-3)?;
    let replicates: Vec<usize> = (0..args.replicates).collect();
    let rows = parallel::map(&replicates, args.common.jobs, |&r| {
        log::debug!("robust-compare replicate={r}");
        robustness_replicate(&task, kernel, phi, args.m, config, args.common.seed, r)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let result = summarize_robustness(rows);
    let table: Vec<Vec<String>> = result
        .rows
        .iter()
        .map(|r| vec![r.replicate.to_string(), fmt12(r.mse_rmr), fmt12(r.mse_ls)])
        .collect();
    let summary = format!(
        "robust-compare m={} replicates={} rmr_win_fraction={} mean_mse_rmr={} mean_mse_ls={}",
        args.m,
        result.rows.len(),
        fmt12(result.rmr_win_fraction),
        fmt12(result.mean_mse_rmr),
        fmt12(result.mean_mse_ls),
    );
    let json = manifest(
        "robust-compare",
        args,
        json!({
            "rmr_win_fraction": result.rmr_win_fraction,
            "mean_mse_rmr": result.mean_mse_rmr,
            "mean_mse_ls": result.mean_mse_ls,
        }),
    );
    Ok(Report {
        csv: Some(csv(&["replicate", "mse_rmr", "mse_ls"], &table)),
        json: Some(json),
        summary,
        failure: None,
    })
}
