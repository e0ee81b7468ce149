use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nlch_core::degiorgi::{
    estimate_c_hat, estimate_c_p, estimate_c_tau, lemma_conv_bound, level_sequence, recursion_coefficient, tau_tilde,
    verify_scheme_on_trajectory, DeGiorgiParams, PhaseReport,
};
use nlch_core::dynamics::{init_state, run, MonitorChecks, RunControl};
use nlch_core::equilibrium::solve_stationary;
use nlch_core::io::csv::{CsvSink, Tee};
use nlch_core::io::snapshot::{read_snapshot_dir, read_snapshot_on, write_snapshot, SnapshotWriter};
use nlch_core::io::{parse_config, RunConfig};
use nlch_core::{Error, Result};

macro_rules! outln {
    ($out:expr, $($arg:tt)*) => {
        let _ = writeln!($out, $($arg)*);
    };
}

fn load(path: &Path) -> Result<RunConfig> {
    parse_config(&fs::read_to_string(path)?)
}

fn out_dir(config: &RunConfig, over: Option<PathBuf>) -> Result<PathBuf> {
    let dir = over.unwrap_or_else(|| config.output.directory.clone());
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

pub fn simulate(out: &mut String, path: &Path, output: Option<PathBuf>) -> Result<()> {
    let config = load(path)?;
    let kernel = config.kernel()?;
    let potential = config.potential()?;
    let dir = out_dir(&config, output)?;
    let state = init_state(&kernel, &potential, &config.initial_data()?, config.initial.delta0)?;

    fs::write(dir.join("config.cfg"), config.serialize())?;
    let csv_path = dir.join("timeseries.csv");
    let mut csv = CsvSink::create(&csv_path)?;
    let snapshot_stride = (config.output.snapshot_stride > 0).then_some(config.output.snapshot_stride);
    let mut snaps = SnapshotWriter::new(dir.join("snapshots"))?;
    let control = RunControl {
        row_stride: config.output.csv_stride,
        snapshot_stride,
        checks: MonitorChecks::default(),
    };
    let mut tee = Tee {
        first: &mut csv,
        second: &mut snaps,
    };
    let outcome = run(
        state,
        config.run.t_end,
        &config.stepper,
        &kernel,
        &potential,
        &control,
        &mut tee,
    );
    csv.flush()?;
    let (state, series) = outcome?;

    let last = series.rows.last().expect("run emits at least the initial row");
    outln!(out, "t = {:?}", state.t);
    outln!(out, "steps = {}", state.step_count);
    outln!(out, "mass = {:?}", last.mass);
    outln!(out, "energy = {:?}", last.energy);
    outln!(out, "energy_residual = {:?}", last.energy_residual);
    outln!(out, "delta_sep = {:?}", last.delta_sep);
    let min_sep = series.rows.iter().map(|r| r.delta_sep).fold(f64::INFINITY, f64::min);
    outln!(out, "min_delta_sep = {min_sep:?}");
    outln!(out, "rows = {}", series.len());
    outln!(out, "snapshots = {}", snaps.written);
    outln!(out, "csv = {}", csv_path.display());
    Ok(())
}

pub fn equilibrium(out: &mut String, path: &Path, guess: Option<PathBuf>, output: Option<PathBuf>) -> Result<()> {
    let config = load(path)?;
    let kernel = config.kernel()?;
    let potential = config.potential()?;
    let dir = out_dir(&config, output)?;
    let guess = match guess {
        Some(p) => read_snapshot_on(&p, &config.grid()?)?.0,
        None => init_state(&kernel, &potential, &config.initial_data()?, config.initial.delta0)?.phi,
    };
    let m = guess.mean();
    let result = solve_stationary(&kernel, &potential, m, &guess, &config.equilibrium)?;
    let snap = dir.join("equilibrium.nlch");
    write_snapshot(&result.phi_inf, f64::INFINITY, &snap)?;

    outln!(out, "converged = {}", result.converged);
    outln!(out, "iterations = {}", result.iterations);
    outln!(out, "m = {m:?}");
    outln!(out, "mu_inf = {:?}", result.mu_inf);
    outln!(out, "residual_linf = {:?}", result.residual_linf);
    outln!(out, "mass_error = {:?}", result.mass_error);
    outln!(out, "separation_margin = {:?}", result.separation_margin);
    outln!(
        out,
        "energy = {:?}",
        nlch_core::diagnostics::energy(&result.phi_inf, &kernel, &potential)?
    );
    outln!(out, "snapshot = {}", snap.display());
    result.into_converged().map(|_| ())
}

fn print_phase(out: &mut String, name: &str, phase: &PhaseReport) {
    let m = &phase.measurement;
    outln!(out, "{name}.y0_within_threshold = {}", phase.y0_within_threshold);
    outln!(out, "{name}.bounds_hold = {}", phase.bounds_hold);
    outln!(out, "{name}.nonincreasing = {}", phase.nonincreasing);
    outln!(out, "{name}.superlevel_measure = {:?}", phase.superlevel_measure);
    outln!(out, "{name}.separated = {}", phase.separated());
    outln!(out, "{name}.n_cap = {}", m.n_cap);
    outln!(out, "{name}: n level y_n bound");
    for (i, (y, level)) in m.y.iter().zip(&m.levels).enumerate() {
        let bound = phase.bounds.get(i).copied().unwrap_or(f64::NAN);
        outln!(out, "{name}: {} {:?} {y:?} {bound:?}", level.n, level.value);
    }
}

pub fn degiorgi(
    out: &mut String,
    path: &Path,
    dir: &Path,
    c_p: Option<f64>,
    c_tau: Option<f64>,
    c_hat: Option<f64>,
) -> Result<()> {
    let config = load(path)?;
    let kernel = config.kernel()?;
    let potential = config.potential()?;
    let snaps = read_snapshot_dir(dir)?;
    let grid = config.grid()?;
    let (Some(first), Some(last)) = (snaps.first(), snaps.last()) else {
        return Err(Error::Trajectory(format!("no snapshots in {}", dir.display())));
    };
    if first.1.grid() != grid {
        return Err(Error::GridMismatch {
            expected: grid.to_string(),
            found: first.1.grid().to_string(),
        });
    }
    let dg = config.degiorgi;
    let window = dg.window.unwrap_or((last.0 - first.0) / 3.0);

    // Truncation levels for the constant estimates: the De Giorgi levels plus
    // a sweep below the trajectory maximum so that separated trajectories
    // still give nonzero truncations.
    let sup = snaps.iter().map(|(_, f)| f.sup_norm()).fold(0.0, f64::max);
    let mut levels: Vec<f64> = level_sequence(dg.delta, dg.n_max)?.iter().map(|l| l.value).collect();
    levels.extend((0..8).map(|i| sup * (0.5 + 0.06 * i as f64)));
    let fields = || snaps.iter().map(|(_, f)| f);
    let need = |v: Option<f64>, key: &str| {
        v.ok_or_else(|| Error::Trajectory(format!("cannot estimate {key} from the snapshots; pass --{key}")))
    };
    let params = DeGiorgiParams {
        delta: dg.delta,
        potential,
        grad_j_l1: kernel.grad_j_l1(),
        c_hat: match c_hat {
            Some(v) => v,
            None => need(estimate_c_hat(fields(), &levels)?, "c-hat")?,
        },
        c_p: match c_p {
            Some(v) => v,
            None => need(estimate_c_p(fields(), &levels)?, "c-p")?,
        },
        c_tau: match c_tau {
            Some(v) => v,
            None => estimate_c_tau(fields(), &potential)?,
        },
    };
    let report = verify_scheme_on_trajectory(&snaps, &params, window, dg.n_max)?;

    outln!(out, "snapshots = {}", snaps.len());
    outln!(out, "window = {:?}", report.window);
    outln!(out, "delta = {:?}", params.delta);
    outln!(out, "grad_j_l1 = {:?}", params.grad_j_l1);
    outln!(out, "c_hat = {:?}", params.c_hat);
    outln!(out, "c_p = {:?}", params.c_p);
    outln!(out, "c_tau = {:?}", params.c_tau);
    outln!(out, "tau_tilde = {:?}", report.tau_tilde);
    outln!(out, "c_rec = {:?}", report.recursion.c_rec);
    outln!(out, "threshold = {:?}", report.recursion.threshold);
    outln!(out, "theta = {:?}", report.theta);
    print_phase(out, "upper", &report.upper);
    print_phase(out, "lower", &report.lower);
    Ok(())
}

pub fn constants(
    out: &mut String,
    path: &Path,
    delta: f64,
    c_p: f64,
    c_tau: f64,
    c_hat: f64,
    grad_j: Option<f64>,
) -> Result<()> {
    let config = load(path)?;
    let grad_j_l1 = match grad_j {
        Some(v) => v,
        None => config.kernel()?.grad_j_l1(),
    };
    let params = DeGiorgiParams {
        delta,
        potential: config.potential()?,
        grad_j_l1,
        c_hat,
        c_p,
        c_tau,
    };
    let tau = tau_tilde(&params)?;
    let rec = recursion_coefficient(&params)?;
    let theta = nlch_core::degiorgi::lemma_threshold(rec.c_rec, rec.b, rec.eps);
    outln!(out, "grad_j_l1 = {grad_j_l1:?}");
    outln!(out, "tau_tilde = {tau:?}");
    outln!(out, "c_rec = {:?}", rec.c_rec);
    outln!(out, "b = {:?}", rec.b);
    outln!(out, "eps = {:?}", rec.eps);
    outln!(out, "theta = {theta:?}");
    outln!(out, "threshold = {:?}", rec.threshold);
    Ok(())
}

pub fn lemma(out: &mut String, c: f64, b: f64, eps: f64, y0: f64, n: usize) -> Result<()> {
    let report = lemma_conv_bound(c, b, eps, y0, n)?;
    outln!(out, "theta = {:?}", report.theta);
    outln!(out, "within_threshold = {}", report.within_threshold);
    outln!(out, "violations = {}", report.violations.len());
    outln!(out, "n y_n bound");
    for (i, (y, bound)) in report.sequence.iter().zip(&report.bounds).enumerate() {
        outln!(out, "{i} {y:?} {bound:?}");
    }
    Ok(())
}

pub fn potential_check(out: &mut String, path: &Path) -> Result<()> {
    let potential = load(path)?.potential()?;
    let deltas: Vec<f64> = (2..=8).map(|e| 10f64.powi(-e)).collect();
    let report = potential.check_h4_asymptotics(&deltas)?;
    outln!(out, "second_limit = {:?}", report.second_limit);
    outln!(out, "first_limit = {:?}", report.first_limit);
    outln!(out, "second_converged = {}", report.second_converged);
    outln!(out, "first_converged = {}", report.first_converged);
    outln!(
        out,
        "delta scaled_second scaled_first mirrored_scaled_second mirrored_scaled_first"
    );
    for r in &report.rows {
        outln!(
            out,
            "{:?} {:?} {:?} {:?} {:?}",
            r.delta,
            r.scaled_second,
            r.scaled_first,
            r.mirrored_scaled_second,
            r.mirrored_scaled_first
        );
    }
    Ok(())
}
