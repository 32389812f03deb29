//! One function per subcommand, each producing an [`Output`].

use serde::Serialize;
use serde_json::{json, Value};
use spectral_relax::accel::{
    accelerated_profile_step, accelerated_rigidity_bound, build_qm, default_plan, PlanMode,
};
use spectral_relax::first_passage::{absorb, monitor_tail_bound, tail_ratio_bound, Start};
use spectral_relax::power::{
    adaptive_stop, eigenvector_error_sq, gamma, observable_variance, run_power, StoppingConfig,
};
use spectral_relax::rigidity::rigidity_time;
use spectral_relax::thermo::{canonical_covariance, clausius_check, general_threshold, thermo_ledger, LedgerRow};
use spectral_relax::zoo::hypercube_profile;
use spectral_relax::{ledger_at, spectral_decomposition, Ledger, RelaxError, SpectralProfile, Tolerances};

use crate::config::{PlanSpec, StartSpec};
use crate::error::{CliError, CliResult};
use crate::input::Loaded;
use crate::output::{json_float, normalize_floats, Cell, Output, Table};

const RIGIDITY_DELTA: f64 = 0.1;

fn to_json<T: Serialize>(v: &T) -> Value {
    let mut v = serde_json::to_value(v).unwrap_or(Value::Null);
    normalize_floats(&mut v);
    v
}

/// The value on success, otherwise `{"error": message}`.
fn or_error<T: Serialize>(r: Result<T, RelaxError>) -> Value {
    match r {
        Ok(v) => to_json(&v),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn text(s: impl Into<String>) -> Cell {
    Cell::Text(s.into())
}

fn max_modulus(values: &[f64]) -> f64 {
    values.iter().map(|l| l.abs()).fold(0.0, f64::max)
}

pub fn analyze(input: &Loaded, tol: &Tolerances) -> CliResult<Output> {
    let profile = input.profile()?;
    let (kind, size, spectrum) = match input {
        Loaded::Profile(p) => ("profile", p.len(), p.lambdas()),
        _ => {
            let (chain, _) = input.chain("analyze")?;
            let d = spectral_decomposition(&chain)?;
            ("chain", chain.n(), d.eigenvalues()[1..].to_vec())
        }
    };
    let lambda2 = spectrum[0];
    let lambda3 = max_modulus(&spectrum[1..]);
    let slow_multiplicity = spectrum.iter().filter(|l| (*l - lambda2).abs() <= tol.cluster).count();
    let dominating = spectrum[1..]
        .iter()
        .filter(|l| l.abs() > lambda2 + tol.cluster)
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .copied();
    let ratio = lambda3 / lambda2;
    let delta_star = (lambda2 > 0.0 && ratio < 1.0).then(|| 1.0 - f64::max(0.5, ratio * ratio));
    let report = rigidity_time(&profile, RIGIDITY_DELTA, None)?;

    let mut t = Table::new(&["key", "value"]);
    t.push(vec![text("source"), text(kind)]);
    t.push(vec![text("size"), Cell::Int(size as u64)]);
    t.push(vec![text("lambda2"), lambda2.into()]);
    t.push(vec![text("lambda3"), lambda3.into()]);
    t.push(vec![text("gap"), (1.0 - lambda2).into()]);
    t.push(vec![text("ratio"), ratio.into()]);
    t.push(vec![text("delta_star"), delta_star.into()]);
    t.push(vec![text("slow_multiplicity"), Cell::Int(slow_multiplicity as u64)]);
    t.push(vec![
        text("degenerate_slow"),
        text(if slow_multiplicity > 1 { "true" } else { "false" }),
    ]);
    t.push(vec![text("dominating_fast"), dominating.into()]);
    t.push(vec![text("observable_modes"), Cell::Int(profile.len() as u64)]);
    t.push(vec![text("init_ratio"), report.init_ratio.into()]);
    t.push(vec![text("L_0.1"), report.l.into()]);
    t.push(vec![text("T_rigid_0.1"), report.t_rigid().into()]);
    for (i, l) in spectrum.iter().enumerate() {
        t.push(vec![Cell::Text(format!("lambda[{}]", i + 2)), (*l).into()]);
    }
    Ok(Output::table(t))
}

pub fn ledger_table(rows: &[LedgerRow]) -> Table {
    let mut t = Table::new(&LedgerRow::HEADER);
    for r in rows {
        t.push(vec![
            Cell::Int(r.k),
            r.e.into(),
            r.rho.into(),
            r.d.into(),
            r.alpha2.into(),
            r.s_spec.into(),
            r.cov.into(),
            r.kl.into(),
            r.g.into(),
            r.a.into(),
            r.b.into(),
            r.gamma.into(),
            r.vhat.into(),
        ]);
    }
    t
}

pub fn simulate(input: &Loaded, horizon: u64) -> CliResult<Output> {
    let profile = input.profile()?;
    Ok(Output::table(ledger_table(&thermo_ledger(&profile, horizon))))
}

pub fn thermo(input: &Loaded, horizon: u64, modes_at: &[u64]) -> CliResult<Output> {
    let profile = input.profile()?;
    let table = ledger_table(&thermo_ledger(&profile, horizon));
    let modes: Vec<Value> = modes_at
        .iter()
        .map(|&k| {
            let terms = canonical_covariance(&profile, k).map(|c| c.terms);
            json!({ "k": k, "terms": or_error(terms) })
        })
        .collect();
    let summary = json!({
        "clausius": or_error(clausius_check(&profile, 1e-10, 100_000)),
        "threshold": or_error(general_threshold(&profile)),
        "modes": modes,
    });
    Ok(Output {
        table,
        summary: Some(summary),
    })
}

pub fn rigidity(input: &Loaded, deltas: &[f64]) -> CliResult<Output> {
    let profile = input.profile()?;
    let mut t = Table::new(&["delta", "L", "T_rigid", "ratio", "init_ratio"]);
    for &delta in deltas {
        let r = rigidity_time(&profile, delta, None)?;
        t.push(vec![
            delta.into(),
            r.l.into(),
            r.t_rigid().into(),
            r.ratio.into(),
            r.init_ratio.into(),
        ]);
    }
    Ok(Output::table(t))
}

pub fn power(
    input: &Loaded,
    epsilon: f64,
    tau: Option<f64>,
    stopping: StoppingConfig,
    max_iter: usize,
) -> CliResult<Output> {
    let (chain, g0) = input.chain("power")?;
    let phi2 = spectral_decomposition(&chain)?.eigenvector(1);
    let run = run_power(&chain, &g0, max_iter)?;
    let true_error = |k: usize| -> CliResult<f64> {
        let v = run.iterate(k).expect("iterate exists for every logged step");
        Ok(eigenvector_error_sq(&chain, v, &phi2)?.sqrt())
    };
    let vhat = |k: usize| -> Option<f64> {
        match (run.rho.get(k), run.rho.get(k + 1)) {
            (Some(&a), Some(&b)) => observable_variance(a, b).ok(),
            _ => None,
        }
    };

    let mut t = Table::new(&["k", "E", "rho", "Gamma", "Vhat", "tauhat", "true_error"]);
    for k in 0..run.log_e.len() {
        let g = match (run.rho.get(k), run.rho.get(k + 1)) {
            (Some(&a), Some(&b)) => gamma(a, b).ok(),
            _ => None,
        };
        let tau_hat = match (vhat(k), vhat(k + 1)) {
            (Some(v0), Some(v1)) if v0 > 0.0 => Some(1.0 - (v1 / v0).sqrt()),
            _ => None,
        };
        t.push(vec![
            Cell::Int(k as u64),
            run.log_e[k].exp().into(),
            run.rho.get(k).copied().into(),
            g.into(),
            vhat(k).into(),
            tau_hat.into(),
            true_error(k)?.into(),
        ]);
    }

    let verdict = match adaptive_stop(run.rho.iter().copied(), epsilon, tau, stopping) {
        Ok(state) => {
            let k = state.stopped_at().expect("adaptive_stop returns only on a stop");
            json!({
                "verdict": "stopped",
                "k": k,
                "epsilon": json_float(epsilon),
                "gamma": json_float(state.gamma_history[k]),
                "eta": json_float(state.eta()),
                "tau": json_float(state.tau_used()),
                "tau_source": if tau.is_some() { "given" } else { "estimated" },
                "true_error": json_float(true_error(k)?),
            })
        }
        Err(RelaxError::TauCollapse { k, tau_hat }) => json!({
            "verdict": "tau_collapse",
            "k": k,
            "tau_hat": json_float(tau_hat),
        }),
        Err(RelaxError::StreamEnded { steps }) => json!({
            "verdict": "not_stopped",
            "steps": steps,
        }),
        Err(e) => return Err(e.into()),
    };
    Ok(Output {
        table: t,
        summary: Some(verdict),
    })
}

fn alpha2_at(profile: &SpectralProfile, k: u64) -> Option<f64> {
    match ledger_at(profile, k) {
        Ledger::Active(l) => Some(l.alpha2()),
        Ledger::Dead { .. } => None,
    }
}

pub fn accel(
    input: &Loaded,
    degree: usize,
    plan: &PlanSpec,
    compare_plain: bool,
    rounds: u64,
) -> CliResult<Output> {
    let profile = input.profile()?;
    let plan = match *plan {
        PlanSpec::Default => default_plan(degree, &profile)?,
        PlanSpec::Interval(a, b) => build_qm(degree, PlanMode::Interval { a, b })?,
        PlanSpec::PaperSimple(lambda2) => build_qm(degree, PlanMode::PaperSimple { lambda2 })?,
    };
    let accelerated = accelerated_profile_step(&profile, &plan)?;
    let m = degree as u64;
    let mut t = Table::new(&["step_equivalent", "alpha2_plain", "alpha2_accel"]);
    for j in 0..=rounds {
        let plain = if compare_plain { alpha2_at(&profile, j * m) } else { None };
        t.push(vec![Cell::Int(j * m), plain.into(), alpha2_at(&accelerated, j).into()]);
    }
    let t_plain = rigidity_time(&profile, RIGIDITY_DELTA, None).map(|r| r.t_rigid());
    let t_accel = rigidity_time(&accelerated, RIGIDITY_DELTA, None).map(|r| r.t_rigid());
    let s = profile.split();
    let bound = accelerated_rigidity_bound(&plan, s.lambda2, s.c2_sq(), s.r0(), RIGIDITY_DELTA);
    let summary = json!({
        "plan": to_json(&plan),
        "delta": json_float(RIGIDITY_DELTA),
        "t_rigid_plain": or_error(t_plain),
        "t_rigid_accel_steps": or_error(t_accel),
        "bound": or_error(bound),
    });
    Ok(Output {
        table: t,
        summary: Some(summary),
    })
}

fn resolve_start(spec: &StartSpec) -> CliResult<Start> {
    Ok(match spec {
        StartSpec::Uniform => Start::Uniform,
        StartSpec::QuasiStationary => Start::QuasiStationary,
        StartSpec::RestrictedPi => Start::RestrictedPi,
        StartSpec::File(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let v: Vec<f64> = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            Start::Custom(v)
        }
    })
}

pub fn fpt(input: &Loaded, target: usize, start: &StartSpec, kmax: u64) -> CliResult<Output> {
    let (chain, _) = input.chain("fpt")?;
    let start = resolve_start(start)?;
    let full = spectral_decomposition(&chain)?;
    let model = absorb(&chain, target)?;
    let alphas = model.tail_coefficients(&start)?;
    let nu = model.spectrum();
    let mut t = Table::new(&["k", "tail", "spectral_tail", "exp_approx", "rel_err", "bound"]);
    for p in model.tail_series(&start, kmax)? {
        let approx = alphas[0] * model.nu2().powi(p.k as i32);
        t.push(vec![
            Cell::Int(p.k),
            p.matrix.into(),
            p.spectral.into(),
            approx.into(),
            (p.spectral / approx - 1.0).abs().into(),
            tail_ratio_bound(&alphas, nu, p.k)?.into(),
        ]);
    }
    let summary = json!({
        "target": target,
        "nu": to_json(&nu),
        "alphas": to_json(&alphas),
        "interlacing": or_error(model.interlacing(full.eigenvalues(), 1e-9)),
        "tail_bound_monitor": or_error(monitor_tail_bound(&model, full.eigenvalues(), &start, RIGIDITY_DELTA, 50)),
    });
    Ok(Output {
        table: t,
        summary: Some(summary),
    })
}

pub fn hypercube(n: usize, alphas: &[f64]) -> CliResult<Output> {
    let h = hypercube_profile(n)?;
    let mut t = Table::new(&["alpha", "k", "S_spec", "E", "alpha2"]);
    for p in h.collapse(alphas)? {
        t.push(vec![
            p.alpha.into(),
            Cell::Int(p.k),
            p.s_spec.into(),
            p.energy().into(),
            p.alpha2.into(),
        ]);
    }
    Ok(Output::table(t))
}
