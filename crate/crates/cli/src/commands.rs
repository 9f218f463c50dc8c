use std::path::Path;

use coherence_forge::iterative::{
    compose_iteration, reduced_kraus, sequential_povm, simulate_sequential,
    simulate_two_stage_direct, KrausSet,
};
use coherence_forge::linalg::{self, CMatrix};
use coherence_forge::optics::{
    choi_of_filter, compensate_phases, effective_filter, process_metrics, InterferometerSpec,
    PhaseProfile, PpbsModel,
};
use coherence_forge::oracle::{grid_search, point_objective, verify_frontier, OracleConfig};
use coherence_forge::state::{coherence, mixed_qubit_product, tensor};
use coherence_forge::synthesis::{
    coherence_min_success, coherence_optimal_filter_pure, frontier_point, mixed_scan,
    optimal_filter, plateau_threshold, trace_frontier, tsallis_optimal_filter,
    two_qubit_closed_form, Family, FilterTarget, FrontierPoint,
};
use coherence_forge::{DiagonalFilter, EnergySpectrum, QState, QubitParams};

use crate::args::{
    ChoiArgs, Cli, Command, FamilyArg, FilterArgs, FrontierArgs, IterateArgs, LogBase,
    MixedScanArgs, Mode, OpticsArgs, OracleArgs, StateArgs, Synthesizer,
};
use crate::error::{CliError, CliResult};
use crate::format::{csv_text, emit, list, num, parse_list, write_file};
use crate::svg::{line_plot, Series};

/// Objective shortfall accepted by the oracle and iterate checks.
const SHORTFALL_TOL: f64 = coherence_forge::oracle::SHORTFALL_TOL;
const RESIDUAL_TOL: f64 = 1e-10;

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    let ctx = Ctx {
        spectrum: cli.spectrum.clone(),
        seed: cli.seed,
        log_base: cli.log_base,
    };
    match &cli.command {
        Command::Filter(a) => cmd_filter(&ctx, a),
        Command::Frontier(a) => cmd_frontier(&ctx, a),
        Command::MixedScan(a) => cmd_mixed_scan(a),
        Command::Iterate(a) => cmd_iterate(&ctx, a),
        Command::Choi(a) => cmd_choi(a),
        Command::Optics(a) => cmd_optics(a),
        Command::Oracle(a) => cmd_oracle(&ctx, a),
    }
}

struct Ctx {
    spectrum: Option<String>,
    seed: u64,
    log_base: LogBase,
}

impl Ctx {
    fn spectrum(&self, dim: usize) -> CliResult<EnergySpectrum> {
        let spectrum = match &self.spectrum {
            Some(text) => EnergySpectrum::new(parse_list(text, "--spectrum")?)?,
            None => excitation_spectrum(dim).ok_or_else(|| {
                CliError::Usage(format!("--spectrum is required for a {dim}-level state"))
            })?,
        };
        if spectrum.dim() != dim {
            return Err(CliError::Domain(format!(
                "spectrum has {} levels but the state has {dim}",
                spectrum.dim()
            )));
        }
        Ok(spectrum)
    }

    fn coherence(&self, nats: f64) -> String {
        format!(
            "{} {}",
            num(self.log_base.convert(nats)),
            self.log_base.unit()
        )
    }
}

/// Default spectra: excitation number of one or two qubits. Larger product
/// bases are not energy ordered, so they need an explicit `--spectrum`.
fn excitation_spectrum(dim: usize) -> Option<EnergySpectrum> {
    match dim {
        2 => Some(EnergySpectrum::qubit()),
        4 => Some(EnergySpectrum::two_qubit()),
        _ => None,
    }
}

fn load_state(path: &Path) -> CliResult<QState> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Domain(format!("{}: invalid state file: {e}", path.display())))
}

fn product_input(p: f64, eta: f64, qubits: usize) -> CliResult<QState> {
    if qubits == 0 || qubits > 6 {
        return Err(CliError::Domain(format!("--qubits {qubits} outside 1..=6")));
    }
    Ok(mixed_qubit_product(QubitParams::new(p, eta)?, qubits)?)
}

fn resolve_state(input: &StateArgs) -> CliResult<QState> {
    match (&input.state, input.p) {
        (Some(path), _) => load_state(path),
        (None, Some(p)) => product_input(p, input.eta, input.qubits),
        (None, None) => Err(CliError::Usage("either --p or --state is required".into())),
    }
}

/// `(a, b)` when the filter has the form `(a, b, b, 1)`.
fn two_qubit_form(filter: &DiagonalFilter) -> Option<(f64, f64)> {
    if filter.dim() != 4 {
        return None;
    }
    let m = filter.amplitudes();
    ((m[1] - m[2]).abs() < 1e-12 && (m[3] - 1.0).abs() < 1e-12).then_some((m[0], m[1]))
}

fn closed_form_applies(input: &StateArgs, target: FilterTarget) -> bool {
    input.state.is_none()
        && input.qubits == 2
        && input.eta == 1.0
        && input.p.is_some_and(|p| p > 0.0 && p < 0.5)
        && target != FilterTarget::CoherenceTsallis
}

fn print_point(ctx: &Ctx, point: &FrontierPoint) {
    if let Some((a, b)) = two_qubit_form(&point.filter) {
        println!("a: {}", num(a));
        println!("b: {}", num(b));
    }
    println!("m: {}", list(&point.filter.amplitudes()));
    if point.filter.coeffs().iter().any(|z| z.im != 0.0) {
        let phases: Vec<f64> = point.filter.coeffs().iter().map(|z| z.arg()).collect();
        println!("phases: {}", list(&phases));
    }
    println!("p_success: {}", num(point.p_success));
    println!(
        "coherence: {} nats ({} bits)",
        num(point.coherence),
        num(LogBase::Two.convert(point.coherence))
    );
    if ctx.log_base == LogBase::Two {
        println!("coherence_reported: {}", ctx.coherence(point.coherence));
    }
    println!("coherence_tsallis: {}", num(point.coherence_tsallis));
    println!("mean_energy: {}", num(point.mean_energy));
}

fn cmd_filter(ctx: &Ctx, args: &FilterArgs) -> CliResult<()> {
    let state = resolve_state(&args.input)?;
    let spectrum = ctx.spectrum(state.dim())?;
    let target = FilterTarget::from(args.target);
    let mode = match args.mode {
        Mode::Auto if closed_form_applies(&args.input, target) => Mode::ClosedForm,
        Mode::Auto => Mode::General,
        m => m,
    };
    let filter = match mode {
        Mode::ClosedForm => {
            if !closed_form_applies(&args.input, target) {
                return Err(CliError::Domain(
                    "closed form needs a pure two-qubit product (--eta 1, --qubits 2), 0 < p < 0.5 \
                     and target energy or coherence; use --mode general"
                        .into(),
                ));
            }
            let p = args.input.p.expect("checked above");
            two_qubit_closed_form(p, args.ps, target)?.to_filter()
        }
        Mode::General => optimal_filter(&state, &spectrum, target, args.ps)?,
        Mode::Tsallis => tsallis_optimal_filter(&state, args.ps)?,
        Mode::Auto => unreachable!("resolved above"),
    };
    let point = frontier_point(&state, &spectrum, filter, Family::Optimal)?;
    println!("mode: {}", mode_name(mode));
    println!("target: {target}");
    print_point(ctx, &point);
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&point.filter).expect("filter serializes");
        write_file(path, &(json + "\n"))?;
    }
    Ok(())
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Auto => "auto",
        Mode::ClosedForm => "closed-form",
        Mode::General => "general",
        Mode::Tsallis => "tsallis",
    }
}

pub const FRONTIER_HEADER: [&str; 6] = [
    "p_success",
    "coherence_nats",
    "mean_energy",
    "a",
    "b",
    "family",
];

fn frontier_row(point: &FrontierPoint) -> Vec<String> {
    let (a, b) = match two_qubit_form(&point.filter) {
        Some((a, b)) => (num(a), num(b)),
        None => (String::new(), String::new()),
    };
    vec![
        num(point.p_success),
        num(point.coherence),
        num(point.mean_energy),
        a,
        b,
        point.family.to_string(),
    ]
}

fn cmd_frontier(ctx: &Ctx, args: &FrontierArgs) -> CliResult<()> {
    let state = resolve_state(&args.input)?;
    let spectrum = ctx.spectrum(state.dim())?;
    let target = FilterTarget::from(args.target);
    let families: &[Family] = match args.family {
        FamilyArg::Optimal => &[Family::Optimal],
        FamilyArg::Factorized => &[Family::Factorized],
        FamilyArg::Both => &[Family::Optimal, Family::Factorized],
    };
    let mut curves = Vec::new();
    for &family in families {
        curves.push((
            family,
            trace_frontier(&state, &spectrum, target, family, args.grid)?,
        ));
    }

    let rows: Vec<Vec<String>> = curves
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(frontier_row))
        .collect();
    emit(args.out_csv.as_deref(), &csv_text(&FRONTIER_HEADER, &rows))?;

    let mut summary = Vec::new();
    if let Some(path) = &args.out_csv {
        summary.push(format!("wrote {} rows to {}", rows.len(), path.display()));
    }
    if let Some(path) = &args.out_svg {
        let series: Vec<Series> = curves
            .iter()
            .map(|(family, pts)| Series {
                label: family.to_string(),
                points: pts
                    .iter()
                    .map(|pt| (pt.p_success, plotted(ctx.log_base, target, pt)))
                    .collect(),
            })
            .collect();
        let y_label = match target {
            FilterTarget::Energy => "mean energy".to_string(),
            FilterTarget::Coherence => format!("coherence ({})", ctx.log_base.unit()),
            FilterTarget::CoherenceTsallis => "Tsallis coherence".to_string(),
        };
        write_file(path, &line_plot(&series, "success probability", &y_label))?;
        summary.push(format!("wrote plot to {}", path.display()));
    }
    if let Some(samples) = args.verify {
        let config = OracleConfig {
            seed: ctx.seed,
            ..OracleConfig::default()
        };
        for (family, pts) in &curves {
            let report = verify_frontier(pts, &state, &spectrum, target, samples, &config)?;
            summary.push(format!(
                "verify {family}: {} samples, max shortfall {}: {}",
                report.checks.len(),
                num(report.max_shortfall),
                if report.pass { "PASS" } else { "FAIL" }
            ));
        }
    }
    // Keep stdout pure CSV when the table goes there.
    for line in summary {
        if args.out_csv.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
    Ok(())
}

fn plotted(base: LogBase, target: FilterTarget, pt: &FrontierPoint) -> f64 {
    match target {
        FilterTarget::Energy => pt.mean_energy,
        FilterTarget::Coherence => base.convert(pt.coherence),
        FilterTarget::CoherenceTsallis => pt.coherence_tsallis,
    }
}

pub const MIXED_HEADER: [&str; 7] = [
    "p",
    "eta",
    "coherence_nats",
    "mean_energy",
    "b_opt",
    "input_coherence",
    "input_energy",
];

fn cmd_mixed_scan(args: &MixedScanArgs) -> CliResult<()> {
    if args.steps < 2 {
        return Err(CliError::Domain(format!(
            "--steps {} must be at least 2",
            args.steps
        )));
    }
    if !(args.p_min > 0.0 && args.p_min < args.p_max && args.p_max < 1.0) {
        return Err(CliError::Domain(format!(
            "need 0 < p-min < p-max < 1, got {} and {}",
            args.p_min, args.p_max
        )));
    }
    let n = args.steps - 1;
    let ps: Vec<f64> = (0..=n)
        .map(|k| args.p_min + (args.p_max - args.p_min) * k as f64 / n as f64)
        .collect();
    let scan = mixed_scan(args.eta, &ps)?;
    let rows: Vec<Vec<String>> = scan
        .iter()
        .map(|s| {
            [
                s.p,
                s.eta,
                s.coherence,
                s.mean_energy,
                s.b_opt,
                s.input_coherence,
                s.input_energy,
            ]
            .iter()
            .map(|&v| num(v))
            .collect()
        })
        .collect();
    emit(args.out_csv.as_deref(), &csv_text(&MIXED_HEADER, &rows))?;

    let mut summary = Vec::new();
    if let Some(path) = &args.out_csv {
        summary.push(format!("wrote {} rows to {}", rows.len(), path.display()));
    }
    if args.threshold {
        summary.push(match plateau_threshold(args.eta)? {
            Some(p) => format!("plateau threshold: p_th = {}", num(p)),
            None => "plateau threshold: none (no coherence)".to_string(),
        });
    }
    for line in summary {
        if args.out_csv.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
    Ok(())
}

fn stage_filter(a: f64, b: f64) -> CliResult<DiagonalFilter> {
    Ok(DiagonalFilter::from_real(&[a, b, b, 1.0])?)
}

/// Best coherence a single filter reaches on `state` at success `ps`, and
/// the tolerance to compare with (exact for pure inputs, oracle otherwise).
fn single_copy_best(state: &QState, ps: f64) -> CliResult<(f64, f64, &'static str)> {
    if state.is_pure(1e-9) {
        if ps >= coherence_min_success(state) {
            let f = coherence_optimal_filter_pure(state, ps)?;
            let (out, _) = coherence_forge::state::apply_filter(state, &f)?;
            Ok((coherence(&out), 1e-6, "synthesized"))
        } else {
            let occupied = state.populations().iter().filter(|&&q| q > 1e-14).count();
            Ok(((occupied as f64).ln(), 1e-6, "equalized"))
        }
    } else {
        let spectrum = excitation_spectrum(state.dim())
            .ok_or_else(|| CliError::Domain("unsupported dimension".into()))?;
        let found = grid_search(state, &spectrum, FilterTarget::Coherence, ps, 0.02, 0.02)?;
        Ok((found.objective, SHORTFALL_TOL, "oracle"))
    }
}

fn cmd_iterate(ctx: &Ctx, args: &IterateArgs) -> CliResult<()> {
    let rho = product_input(args.p, args.eta, 1)?;
    let first = stage_filter(args.a, args.b)?;
    let second = stage_filter(args.a2.unwrap_or(args.a), args.b2.unwrap_or(args.b))?;

    let (kraus, input, expected, direct_residual): (KrausSet, QState, CMatrix, Option<f64>) =
        match args.stages {
            1 => {
                let kraus = reduced_kraus(&first, &rho)?;
                let expected = kraus.apply(rho.matrix())?;
                (kraus, rho.clone(), expected, None)
            }
            2 => {
                let (kraus, sigma) = compose_iteration(&first, &second, &rho)?;
                let direct = simulate_two_stage_direct(&first, &second, &rho)?;
                let residual = linalg::max_abs_diff(&sigma, &direct);
                (kraus, tensor(&rho, &rho), sigma, Some(residual))
            }
            n => {
                return Err(CliError::Domain(format!(
                    "--stages {n} not supported; use 1 or 2"
                )))
            }
        };
    let povm = sequential_povm(&kraus)?;
    let outcome = simulate_sequential(&povm, &input)?;
    let mixture = outcome.mixture.as_ref().ok_or_else(|| {
        CliError::Domain("no branch succeeds: total success probability is 0".into())
    })?;
    let seq_residual = linalg::max_abs_diff(&outcome.unnormalized, &expected);
    let residual = direct_residual.map_or(seq_residual, |r| r.max(seq_residual));
    let c_iter = coherence(mixture);
    let (c_single, tol, source) = single_copy_best(&input, outcome.p_total)?;
    let pass = residual <= RESIDUAL_TOL && c_iter <= c_single + tol;

    println!("stages: {}", args.stages);
    println!("kraus_operators: {}", kraus.len());
    println!("p_total: {}", num(outcome.p_total));
    println!("p_all_minus: {}", num(outcome.p_all_minus));
    println!("branch_probs: {}", list(&outcome.branch_probs));
    println!("coherence_iterative: {}", ctx.coherence(c_iter));
    println!(
        "coherence_single_copy: {} ({source})",
        ctx.coherence(c_single)
    );
    println!(
        "povm_completeness_residual: {}",
        num(povm.completeness_residual())
    );
    println!("sequential_residual: {}", num(seq_residual));
    if let Some(r) = direct_residual {
        println!("direct_simulation_residual: {}", num(r));
    }
    println!("{}", if pass { "PASS" } else { "FAIL" });

    if let Some(path) = &args.out {
        let json = serde_json::json!({ "kraus": kraus, "povm": povm });
        write_file(
            path,
            &(serde_json::to_string_pretty(&json).expect("serializes") + "\n"),
        )?;
    }
    Ok(())
}

fn cmd_choi(args: &ChoiArgs) -> CliResult<()> {
    let filter = stage_filter(args.a, args.b)?;
    let phases = match &args.phases {
        Some(text) => Some(PhaseProfile::new(parse_list(text, "--phases")?)?),
        None => None,
    };
    let ideal = choi_of_filter(&filter, None)?;
    let chi = choi_of_filter(&filter, phases.as_ref())?;
    let (purity, fidelity) = process_metrics(&chi, &ideal)?;
    let (fixed, found) = compensate_phases(&chi)?;
    let (_, compensated) = process_metrics(&fixed, &ideal)?;

    println!("filter: {}", list(&filter.amplitudes()));
    println!("trace: {}", num(chi.trace()));
    println!("purity: {}", num(purity));
    println!("fidelity: {}", num(fidelity));
    println!("extracted_phases: {}", list(found.phases()));
    println!("fidelity_compensated: {}", num(compensated));
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&chi).expect("Choi matrix serializes");
        write_file(path, &(json + "\n"))?;
    }
    Ok(())
}

fn cmd_optics(args: &OpticsArgs) -> CliResult<()> {
    let att = parse_list(&args.attenuations, "--attenuations")?;
    let attenuations: [f64; 4] = att
        .try_into()
        .map_err(|_| CliError::Usage("--attenuations needs four values".into()))?;
    let pbs_model = match &args.ppbs {
        Some(text) => match parse_list(text, "--ppbs")?[..] {
            [t_h, t_v] => Some(PpbsModel { t_h, t_v }),
            _ => return Err(CliError::Usage("--ppbs needs two values t_H,t_V".into())),
        },
        None => None,
    };
    let spec = InterferometerSpec {
        bs_transmittance: args.bs_transmittance,
        attenuations,
        pbs_model,
    };
    let (filter, p_l) = effective_filter(&spec)?;
    let phases: Vec<f64> = filter
        .coeffs()
        .iter()
        .map(|z| if z.norm() > 0.0 { z.arg() } else { 0.0 })
        .collect();
    println!("m: {}", list(&filter.amplitudes()));
    println!("phases: {}", list(&phases));
    println!("p_l: {}", num(p_l));
    let m = filter.amplitudes();
    if (m[1] - m[2]).abs() < 1e-12 && (m[3] - 1.0).abs() < 1e-12 {
        println!("a: {}", num(m[0]));
        println!("b: {}", num(m[1]));
        let valid = m[0] <= m[1] * m[1] + 1e-12;
        println!("a <= b^2: {}", if valid { "yes" } else { "no" });
    } else {
        println!("form (a, b, b, 1): no");
    }
    Ok(())
}

fn cmd_oracle(ctx: &Ctx, args: &OracleArgs) -> CliResult<()> {
    let state = resolve_state(&args.input)?;
    let spectrum = ctx.spectrum(state.dim())?;
    let target = FilterTarget::from(args.target);
    let filter = match args.synthesizer {
        Synthesizer::Optimal => optimal_filter(&state, &spectrum, target, args.ps)?,
        Synthesizer::Identity => DiagonalFilter::identity(state.dim()),
    };
    let point = frontier_point(&state, &spectrum, filter, Family::Optimal)?;
    let synthesized = point_objective(&point, target);
    let found = grid_search(
        &state,
        &spectrum,
        target,
        args.ps,
        args.grid_step,
        args.tolerance,
    )?;
    let shortfall = found.objective - synthesized;
    let pass = shortfall <= SHORTFALL_TOL;

    println!("target: {target}");
    println!("grid_step: {}", num(args.grid_step));
    println!("oracle_grid_weights: {}", list(&found.grid_weights));
    println!("oracle_weights: {}", list(&found.filter.weights()));
    println!("oracle_p_success: {}", num(found.p_success));
    println!("oracle_objective: {}", num(found.objective));
    println!(
        "synthesizer: {}",
        match args.synthesizer {
            Synthesizer::Optimal => "optimal",
            Synthesizer::Identity => "identity",
        }
    );
    println!("synthesized_weights: {}", list(&point.filter.weights()));
    println!("synthesized_p_success: {}", num(point.p_success));
    println!("synthesized_objective: {}", num(synthesized));
    println!("shortfall: {}", num(shortfall));
    println!("{}", if pass { "PASS" } else { "FAIL" });
    Ok(())
}
