//! The experiment registry. Each entry reads its parameters through
//! [`Context`], validates them with the owning module, computes, and records
//! tables, scalars and checks.

use std::path::PathBuf;

use super::{Context, Experiment, RunError, Table};
use crate::cosmo::{self, Background, ModeOptions};
use crate::fielddecomp::{self, Grid3D, ScalarField, Spectral, SymTensorField, VectorField};
use crate::gauge_pt::{
    self, Constants, GridPreset, Interaction, LorentzOptions, ModeGrid, Orientation, OscillatorPair,
};
use crate::hilbert::{DensityMatrix, MatrixDocument, WitnessOperator};
use crate::interferometer::{self as ifm, CouplingModel, InterferometerConfig};
use crate::pathint::{self, Kernel, ProtocolDocument, SplitAxis, SplitHoldMerge};

const INTERFEROMETER_KEYS: [&str; 7] = ["m1", "m2", "d", "delta_x", "t", "G", "hbar"];

macro_rules! keys {
    ($base:expr $(, $extra:literal)* $(,)?) => {{
        const BASE: [&str; 7] = $base;
        const EXTRA: &[&str] = &[$($extra),*];
        const N: usize = BASE.len() + EXTRA.len();
        const ALL: [&str; N] = {
            let mut out = [""; N];
            let mut i = 0;
            while i < BASE.len() {
                out[i] = BASE[i];
                i += 1;
            }
            let mut j = 0;
            while j < EXTRA.len() {
                out[i + j] = EXTRA[j];
                j += 1;
            }
            out
        };
        &ALL
    }};
}

pub static REGISTRY: &[Experiment] = &[
    Experiment {
        name: "gie-phases",
        module: "interferometer",
        description: "branch phases, negativity and witness value for one configuration",
        params: &INTERFEROMETER_KEYS,
        tolerances: &["negativity"],
        run: gie_phases,
    },
    Experiment {
        name: "gie-scan",
        module: "interferometer",
        description: "phases, negativity and witness over a time range (quantum or mean-field)",
        params: keys!(INTERFEROMETER_KEYS, "t_min", "t_max", "steps", "model"),
        tolerances: &["negativity"],
        run: gie_scan,
    },
    Experiment {
        name: "max-entanglement-time",
        module: "interferometer",
        description: "first time with phi+ + phi- = pi and the negativity reached there",
        params: &INTERFEROMETER_KEYS,
        tolerances: &["negativity"],
        run: max_entanglement_time,
    },
    Experiment {
        name: "witness",
        module: "hilbert",
        description:
            "default (or file-supplied) and swap witnesses on the maximally entangled and product branch states",
        params: keys!(INTERFEROMETER_KEYS, "witness_file"),
        tolerances: &["product"],
        run: witness,
    },
    Experiment {
        name: "gauge-equiv",
        module: "gauge_pt",
        description: "Lorentz-gauge mediator sums vs the Coulomb amplitude on a grid ladder, with scalar-mode ablation",
        params: &[
            "mass",
            "omega",
            "charge",
            "separation",
            "orientation",
            "fock_cutoff",
            "grids",
            "drop_scalar_photons",
            "include_transverse",
            "form_factor_length",
        ],
        tolerances: &["gauge", "ablation"],
        run: gauge_equiv,
    },
    Experiment {
        name: "analog-coupling",
        module: "gauge_pt",
        description: "gravitational analogue amplitude vs the Coulomb amplitude with q^2/4pi eps0 -> -G m^2",
        params: &["mass", "omega", "separation", "G"],
        tolerances: &["analog"],
        run: analog_coupling,
    },
    Experiment {
        name: "decompose",
        module: "fielddecomp",
        description:
            "projector and constraint-solver suite on random band-limited fields, or decomposition of a field file",
        params: &["n", "L", "fields", "G", "input", "output_dir"],
        tolerances: &["decomposition", "solver"],
        run: decompose,
    },
    Experiment {
        name: "newton-check",
        module: "fielddecomp",
        description: "Newtonian cross term of two Gaussian masses vs the periodic (Ewald) reference at n and 2n",
        params: &["m1", "m2", "L", "d", "sigma", "G", "n"],
        tolerances: &["newton"],
        run: newton_check,
    },
    Experiment {
        name: "branch-phase",
        module: "pathint",
        description: "four branch phases and the entangling phase of a protocol under a chosen kernel",
        params: &[
            "protocol_file",
            "protocol",
            "kernel",
            "d",
            "delta_x",
            "coupling",
            "hbar",
            "c",
            "duration",
            "speed",
            "hold",
            "axis",
            "fraction",
        ],
        tolerances: &["static"],
        run: branch_phase,
    },
    Experiment {
        name: "kernel-causality",
        module: "pathint",
        description: "retarded vs instantaneous kernels: static equality, (v/c)^2 scaling, spacelike split/merge",
        params: &["d", "delta_x", "coupling", "hbar", "c", "speed", "hold", "factors", "axis", "fraction"],
        tolerances: &["exponent", "spacelike"],
        run: kernel_causality,
    },
    Experiment {
        name: "cosmo-spectrum",
        module: "cosmo",
        description: "Mukhanov-Sasaki spectra on de Sitter or power-law backgrounds, with tilt fit",
        params: &["model", "eps", "kmin", "kmax", "nk", "H0", "eval_ktau", "start_ktau"],
        tolerances: &["wronskian", "mode_function", "flatness", "tilt"],
        run: cosmo_spectrum,
    },
];

fn interferometer_cfg(ctx: &mut Context) -> Result<InterferometerConfig<f64>, RunError> {
    let cfg = InterferometerConfig {
        m1: ctx.f64("m1", 1e-14)?,
        m2: ctx.f64("m2", 1e-14)?,
        d: ctx.f64("d", 450e-6)?,
        delta_x: ctx.f64("delta_x", 250e-6)?,
        t: ctx.f64("t", 2.5)?,
        g: ctx.f64("G", ifm::CODATA_G)?,
        hbar: ctx.f64("hbar", ifm::CODATA_HBAR)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn negativity_formula(sum: f64) -> f64 {
    (0.5 * sum).sin().abs() / 2.0
}

fn gie_phases(ctx: &mut Context) -> Result<(), RunError> {
    let cfg = interferometer_cfg(ctx)?;
    let tol = ctx.tol("negativity", 1e-10)?;
    let (plus, minus) = ifm::branch_phases(&cfg)?;
    let state = ifm::evolve_branches(&cfg)?;
    let n = ifm::branch_negativity(&state.state)?;
    let w = ifm::default_witness(&cfg)?;
    let wv = DensityMatrix::from_pure(&state.state).witness_expectation(&w)?;
    ctx.scalar("phi_plus", plus);
    ctx.scalar("phi_minus", minus);
    ctx.scalar("phase_sum", plus + minus);
    ctx.scalar("prefactor", cfg.prefactor());
    ctx.scalar("negativity", n);
    ctx.scalar("witness", wv);
    ctx.scalar("max_entanglement_time", ifm::max_entanglement_time(&cfg)?);
    let mut t = Table::new("phases", &["branch", "distance", "phase"]);
    let dist = [cfg.d, cfg.d + cfg.delta_x, cfg.d - cfg.delta_x, cfg.d];
    for (i, label) in pathint::BRANCH_LABELS.iter().enumerate() {
        t.push(vec![(*label).into(), dist[i].into(), state.phases[i].into()]);
    }
    ctx.table(t);
    let err = (n - negativity_formula(plus + minus)).abs();
    ctx.check_le("negativity_formula", err, tol, "|N - |sin((phi+ + phi-)/2)|/2|");
    ctx.check("attractive_signs", plus < 0.0 && 0.0 < minus, None, None, "phi+ < 0 < phi-");
    Ok(())
}

fn gie_scan(ctx: &mut Context) -> Result<(), RunError> {
    let cfg = interferometer_cfg(ctx)?;
    let steps = ctx.usize("steps", 100)?;
    let t_max = ctx.f64("t_max", cfg.t)?;
    let t_min = ctx.f64("t_min", t_max / steps.max(1) as f64)?;
    let model = match ctx.string("model", "quantum").as_str() {
        "quantum" => CouplingModel::Quantum,
        "mean-field" => CouplingModel::MeanField,
        other => return Err(RunError::invalid("model", format!("quantum or mean-field (got {other:?})"))),
    };
    let tol = ctx.tol("negativity", 1e-10)?;
    if steps == 0 {
        return Err(RunError::invalid("steps", "steps >= 1"));
    }
    if !(t_min > 0.0 && t_max >= t_min) {
        return Err(RunError::invalid("t_min/t_max", "0 < t_min <= t_max"));
    }
    let times = ifm::linear_times(t_min, t_max, steps);
    let rows = ifm::entanglement_scan(&cfg, &times, None, model)?;
    let mut t = Table::new("scan", &["t", "phi_plus", "phi_minus", "phase_sum", "negativity", "witness"]);
    let mut worst = 0.0f64;
    let mut monotone = true;
    let mut prev = f64::NEG_INFINITY;
    for r in &rows {
        let sum = r.phi_plus + r.phi_minus;
        monotone &= sum > prev;
        prev = sum;
        let expected = match model {
            CouplingModel::Quantum => negativity_formula(sum),
            CouplingModel::MeanField => 0.0,
        };
        worst = worst.max((r.negativity - expected).abs());
        t.push(vec![
            r.t.into(),
            r.phi_plus.into(),
            r.phi_minus.into(),
            sum.into(),
            r.negativity.into(),
            r.witness.into(),
        ]);
    }
    ctx.table(t);
    ctx.scalar("max_negativity", rows.iter().map(|r| r.negativity).fold(0.0, f64::max));
    if model == CouplingModel::Quantum {
        ctx.check("monotone_phase", monotone, None, None, "phase sum strictly increasing in t");
    }
    let what = match model {
        CouplingModel::Quantum => "max |N - |sin((phi+ + phi-)/2)|/2|",
        CouplingModel::MeanField => "max N (mean-field states are products)",
    };
    ctx.check_le("negativity", worst, tol, what);
    Ok(())
}

fn max_entanglement_time(ctx: &mut Context) -> Result<(), RunError> {
    let cfg = interferometer_cfg(ctx)?;
    let tol = ctx.tol("negativity", 1e-10)?;
    let t_star = ifm::max_entanglement_time(&cfg)?;
    let state = ifm::evolve_branches(&cfg.with_time(t_star))?;
    let n = ifm::branch_negativity(&state.state)?;
    ctx.scalar("t_star", t_star);
    ctx.scalar("negativity", n);
    ctx.check_le("maximal_negativity", (n - 0.5).abs(), tol, "|N(t*) - 1/2|");
    Ok(())
}

fn witness(ctx: &mut Context) -> Result<(), RunError> {
    let cfg = interferometer_cfg(ctx)?;
    let tol = ctx.tol("product", 1e-12)?;
    let file = ctx.string("witness_file", "");
    let w = if file.is_empty() {
        ifm::default_witness(&cfg)?
    } else {
        let text = std::fs::read_to_string(&file).map_err(|e| RunError::Config(format!("cannot read {file}: {e}")))?;
        let doc = MatrixDocument::from_json(&text).map_err(|e| RunError::invalid("witness_file", e.to_string()))?;
        let w = WitnessOperator::from_document(&doc).map_err(|e| RunError::invalid("witness_file", e.to_string()))?;
        if w.dims() != [2usize, 2] {
            return Err(RunError::invalid("witness_file", "a 4x4 operator with dims [2, 2]"));
        }
        w
    };
    let t_star = ifm::max_entanglement_time(&cfg)?;
    let entangled = DensityMatrix::from_pure(&ifm::evolve_branches(&cfg.with_time(t_star))?.state);
    let product = DensityMatrix::from_pure(&ifm::branch_state_from_phases(0.0, 0.0));
    let swap = WitnessOperator::swap(2)?;
    let we = entangled.witness_expectation(&w)?;
    let wp = product.witness_expectation(&w)?;
    ctx.scalar("projector_entangled", we);
    ctx.scalar("projector_product", wp);
    ctx.scalar("swap_entangled", entangled.witness_expectation(&swap)?);
    ctx.scalar("swap_product", product.witness_expectation(&swap)?);
    ctx.check("detects_entanglement", we < 0.0, Some(we), None, "default witness < 0 at t*");
    ctx.check("product_nonnegative", wp >= -tol, Some(wp), Some(tol), "default witness >= -tol on a product state");
    Ok(())
}

fn gauge_pair(ctx: &mut Context) -> Result<OscillatorPair<f64>, RunError> {
    let reference = OscillatorPair::<f64>::reference();
    let default_charge = match reference.interaction {
        Interaction::Electric { charge } => charge,
        Interaction::Gravitational => 0.0,
    };
    let orientation = match ctx.string("orientation", "axial").as_str() {
        "axial" => Orientation::Axial,
        "transverse" => Orientation::Transverse,
        other => return Err(RunError::invalid("orientation", format!("axial or transverse (got {other:?})"))),
    };
    let pair = OscillatorPair {
        mass: ctx.f64("mass", reference.mass)?,
        omega: ctx.f64("omega", reference.omega)?,
        interaction: Interaction::Electric { charge: ctx.f64("charge", default_charge)? },
        separation: ctx.f64("separation", reference.separation)?,
        orientation,
        fock_cutoff: ctx.usize("fock_cutoff", reference.fock_cutoff)?,
        constants: Constants::natural(),
    };
    pair.validate()?;
    Ok(pair)
}

fn gauge_equiv(ctx: &mut Context) -> Result<(), RunError> {
    let pair = gauge_pair(ctx)?;
    let grid_names: Vec<String> = ctx.list("grids", &["coarse".to_string(), "medium".into(), "fine".into()])?;
    let drop_scalar = ctx.bool("drop_scalar_photons", false)?;
    let transverse = ctx.bool("include_transverse", false)?;
    let ell = ctx.f64("form_factor_length", pair.separation / 8.0)?;
    let tol = ctx.tol("gauge", 0.05)?;
    let ablation_min = ctx.tol("ablation", 0.5)?;
    if !(ell > 0.0) {
        return Err(RunError::invalid("form_factor_length", "a positive length"));
    }
    let presets = grid_names
        .iter()
        .map(|g| {
            GridPreset::parse(g)
                .ok_or_else(|| RunError::invalid("grids", format!("coarse, medium or fine (got {g:?})")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let grids = presets.iter().map(|&p| ModeGrid::preset(p, &pair, ell)).collect::<Result<Vec<_>, _>>()?;
    let opts = LorentzOptions { scalar: !drop_scalar, longitudinal: true, transverse, form_factor: Some(ell) };
    let report = gauge_pt::gauge_equivalence_report(&pair, &grids, &opts, tol)?;
    let mut t = Table::new("convergence", &["grid", "modes", "epsilon_re", "epsilon_im", "rel_error"]);
    for r in &report.rows {
        t.push(vec![
            r.grid.clone().into(),
            r.modes.into(),
            r.epsilon_re.into(),
            r.epsilon_im.into(),
            r.rel_error.into(),
        ]);
    }
    ctx.table(t);
    ctx.scalar("epsilon_coulomb", report.epsilon_coulomb);
    let last = report.rows.last().map_or(f64::INFINITY, |r| r.rel_error);
    ctx.check("monotone_convergence", report.monotone, None, None, report.diagnostics.join("; "));
    ctx.check_le("finest_grid", last, tol, "|eps_L/eps_C - 1| on the last grid");
    if !drop_scalar {
        let finest = grids.last().expect("at least two grids");
        let ablated = LorentzOptions { scalar: false, ..opts };
        let eps = gauge_pt::epsilon_lorentz(&pair, finest, &ablated)?.value;
        let coulomb = gauge_pt::epsilon_coulomb(&pair)?.value;
        let dev = (eps / coulomb - 1.0).norm();
        ctx.scalar("ablation_deviation", dev);
        ctx.check(
            "scalar_ablation",
            dev > ablation_min,
            Some(dev),
            Some(ablation_min),
            "dropping scalar modes must break agreement by more than the threshold",
        );
    }
    Ok(())
}

fn analog_coupling(ctx: &mut Context) -> Result<(), RunError> {
    let g = ctx.f64("G", 1.0)?;
    let pair = OscillatorPair {
        mass: ctx.f64("mass", 1.0)?,
        omega: ctx.f64("omega", 1.0)?,
        interaction: Interaction::Gravitational,
        separation: ctx.f64("separation", 10.0)?,
        orientation: Orientation::Axial,
        fock_cutoff: 4,
        constants: Constants { g_newton: g, ..Constants::natural() },
    };
    let tol = ctx.tol("analog", 1e-12)?;
    pair.validate()?;
    let analog = gauge_pt::epsilon_analog_gravity(&pair)?.value;
    let substituted = gauge_pt::epsilon_coulomb(&pair)?.value;
    let rel = (analog - substituted).norm() / substituted.norm();
    ctx.scalar("epsilon_analog", analog.re);
    ctx.scalar("epsilon_coulomb_substituted", substituted.re);
    ctx.scalar("rel_difference", rel);
    ctx.check_le("coupling_map", rel, tol, "|eps_analog - eps_C(q^2/4pi eps0 -> -G m^2)| / |eps_C|");
    Ok(())
}

fn random_vector(grid: Grid3D<f64>, band: usize, seed: u64) -> VectorField<f64> {
    let c = |s| fielddecomp::band_limited_random(grid, band, s).values;
    VectorField { grid, components: [c(seed), c(seed + 1), c(seed + 2)] }
}

fn random_traceless(grid: Grid3D<f64>, band: usize, seed: u64) -> SymTensorField<f64> {
    let components = std::array::from_fn(|i| fielddecomp::band_limited_random(grid, band, seed + i as u64).values);
    SymTensorField { grid, components }.traceless_part()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn decompose(ctx: &mut Context) -> Result<(), RunError> {
    let input = ctx.string("input", "");
    if !input.is_empty() {
        let out = ctx.string("output_dir", ".");
        return decompose_file(ctx, PathBuf::from(input), PathBuf::from(out));
    }
    let n = ctx.usize("n", 32)?;
    let l = ctx.f64("L", 1.0)?;
    let fields = ctx.usize("fields", 20)?;
    let g = ctx.f64("G", 1.0)?;
    let tol = ctx.tol("decomposition", 1e-10)?;
    let solver_tol = ctx.tol("solver", 1e-10)?;
    let grid = Grid3D::new(n, l)?;
    let band = n / 4;
    let sp = Spectral::new(grid);
    let kmax = std::f64::consts::PI * n as f64 / l;
    let mut t = Table::new(
        "projectors",
        &[
            "field",
            "completeness",
            "orthogonality",
            "idempotence",
            "div_transverse",
            "curl_longitudinal",
            "tt_transverse",
            "tt_traceless",
            "tensor_idempotence",
        ],
    );
    let mut worst = [0.0f64; 8];
    for i in 0..fields {
        let seed = ctx.seed().wrapping_mul(1000).wrapping_add(10 * i as u64);
        let f = random_vector(grid, band, seed);
        let scale = f.max_abs();
        let (par, perp) = sp.helmholtz_vector(&f);
        let completeness = (0..3)
            .map(|a| {
                let sum: Vec<f64> = par.components[a].iter().zip(&perp.components[a]).map(|(x, y)| x + y).collect();
                max_diff(&sum, &f.components[a])
            })
            .fold(0.0, f64::max)
            / scale;
        let (par_of_perp, _) = sp.helmholtz_vector(&perp);
        let (par_of_par, perp_of_par) = sp.helmholtz_vector(&par);
        let orthogonality = par_of_perp.max_abs().max(perp_of_par.max_abs()) / scale;
        let idempotence = par_of_par.sub(&par).max_abs() / scale;
        let div_perp = sp.divergence(&perp).max_abs() / (kmax * scale);
        let curl_par = sp.curl(&par).max_abs() / (kmax * scale);

        let pi = random_traceless(grid, band, seed + 5);
        let pscale = pi.max_abs();
        let parts = fielddecomp::decompose_tensor(&pi)?;
        let tt = &parts.transverse_traceless;
        let tt_div = sp.tensor_divergence(tt).max_abs() / (kmax * pscale);
        let tt_trace = tt.trace().max_abs() / pscale;
        let again = fielddecomp::decompose_tensor(tt)?;
        let tensor_idem = again.longitudinal.max_abs().max(again.rotational.max_abs()) / pscale;
        let row = [completeness, orthogonality, idempotence, div_perp, curl_par, tt_div, tt_trace, tensor_idem];
        for (w, v) in worst.iter_mut().zip(row) {
            *w = w.max(v);
        }
        let mut cells = vec![i.into()];
        cells.extend(row.iter().map(|&v| v.into()));
        t.push(cells);
    }
    ctx.table(t);
    let names = [
        "completeness",
        "orthogonality",
        "idempotence",
        "div_transverse",
        "curl_longitudinal",
        "tt_transverse",
        "tt_traceless",
        "tensor_idempotence",
    ];
    for (name, v) in names.iter().zip(worst) {
        ctx.scalar(&format!("max_{name}"), v);
        ctx.check_le(name, v, tol, "worst relative error over all fields");
    }

    // Single-mode inversions against closed forms.
    let tau = std::f64::consts::TAU / l;
    let m = [1.0, 2.0, 0.0];
    let k = m.map(|v| v * tau);
    let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    let phase = move |p: [f64; 3]| (k[0] * p[0] + k[1] * p[1] + k[2] * p[2]).cos();
    let four_pi_g = 4.0 * std::f64::consts::PI * g;
    let src = ScalarField::from_fn(grid, phase);
    let psi = fielddecomp::solve_psi(&src, g)?;
    let psi_err = src.values.iter().zip(&psi.values).fold(0.0f64, |e, (s, p)| e.max((p + four_pi_g * s / k2).abs()))
        / (four_pi_g / k2);
    let e_perp = [2.0 / 5f64.sqrt(), -1.0 / 5f64.sqrt(), 0.0];
    let f_perp = VectorField::from_fn(grid, move |p| e_perp.map(|e| e * phase(p)));
    let w = fielddecomp::solve_w(&f_perp, g)?;
    let w_scale = 4.0 * four_pi_g / k2;
    let w_err = (0..3)
        .map(|a| {
            f_perp.components[a].iter().zip(&w.components[a]).fold(0.0f64, |e, (f, wv)| e.max((wv + w_scale * f).abs()))
        })
        .fold(0.0, f64::max)
        / w_scale;
    let kn = k2.sqrt();
    let kh = k.map(|v| v / kn);
    let amp: [f64; 6] = std::array::from_fn(|slot| {
        let (a, b) = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)][slot];
        kh[a] * kh[b] - if a == b { 1.0 / 3.0 } else { 0.0 }
    });
    let pi = SymTensorField::from_fn(grid, move |p| amp.map(|c| c * phase(p)));
    let zero = ScalarField::zeros(grid);
    let phi = fielddecomp::solve_phi(&zero, &pi, g)?;
    let phi_scale = 2.0 * four_pi_g / k2;
    let phi_err =
        src.values.iter().zip(&phi.values).fold(0.0f64, |e, (s, p)| e.max((p - phi_scale * s).abs())) / phi_scale;
    ctx.scalar("psi_single_mode", psi_err);
    ctx.scalar("w_single_mode", w_err);
    ctx.scalar("phi_single_mode", phi_err);
    ctx.check_le("solve_psi", psi_err, solver_tol, "psi = -4 pi G cos(k.x)/k^2");
    ctx.check_le("solve_w", w_err, solver_tol, "w = -16 pi G f/k^2");
    ctx.check_le("solve_phi", phi_err, solver_tol, "phi - psi = 8 pi G Pi_par/k^2");
    Ok(())
}

fn decompose_file(ctx: &mut Context, input: PathBuf, out: PathBuf) -> Result<(), RunError> {
    let (grid, comps) = fielddecomp::read_field(&input)?;
    std::fs::create_dir_all(&out).map_err(|e| RunError::Io(format!("{}: {e}", out.display())))?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("field").to_string();
    let write =
        |suffix: &str, parts: &[&[f64]]| fielddecomp::write_field(&out.join(format!("{stem}_{suffix}")), &grid, parts);
    let mut t = Table::new("parts", &["part", "components", "max_abs"]);
    match comps.len() {
        1 => {
            let mut f = ScalarField { grid, values: comps[0].clone() };
            let mean = f.mean();
            f.values.iter_mut().for_each(|v| *v -= mean);
            let psi = fielddecomp::solve_psi(&f, 1.0)?;
            write("psi", &[&psi.values])?;
            ctx.scalar("removed_mean", mean);
            t.push(vec!["psi".into(), 1usize.into(), psi.max_abs().into()]);
        }
        3 => {
            let f = VectorField { grid, components: [comps[0].clone(), comps[1].clone(), comps[2].clone()] };
            let (par, perp) = fielddecomp::helmholtz_vector(&f);
            for (name, v) in [("longitudinal", &par), ("transverse", &perp)] {
                let refs: Vec<&[f64]> = v.components.iter().map(Vec::as_slice).collect();
                write(name, &refs)?;
                t.push(vec![name.into(), 3usize.into(), v.max_abs().into()]);
            }
        }
        6 => {
            let f = SymTensorField { grid, components: std::array::from_fn(|i| comps[i].clone()) };
            let parts = fielddecomp::decompose_tensor(&f)?;
            for (name, v) in [
                ("longitudinal", &parts.longitudinal),
                ("rotational", &parts.rotational),
                ("tt", &parts.transverse_traceless),
            ] {
                let refs: Vec<&[f64]> = v.components.iter().map(Vec::as_slice).collect();
                write(name, &refs)?;
                t.push(vec![name.into(), 6usize.into(), v.max_abs().into()]);
            }
        }
        c => return Err(RunError::invalid("input", format!("1, 3 or 6 components (got {c})"))),
    }
    ctx.table(t);
    Ok(())
}

fn newton_check(ctx: &mut Context) -> Result<(), RunError> {
    let m1 = ctx.f64("m1", 1.0)?;
    let m2 = ctx.f64("m2", 1.0)?;
    let l = ctx.f64("L", 1.0)?;
    let d = ctx.f64("d", l / 4.0)?;
    let sigma = ctx.f64("sigma", d / 10.0)?;
    let g = ctx.f64("G", 1.0)?;
    let n = ctx.usize("n", 64)?;
    let tol = ctx.tol("newton", 0.02)?;
    Grid3D::new(n, l)?;
    let report = fielddecomp::newtonian_reduction_check(m1, m2, d, sigma, l, g, &[n, 2 * n])?;
    let mut t =
        Table::new("newton", &["n", "sigma", "cross_term", "periodic_reference", "point_reference", "rel_error"]);
    for r in &report.rows {
        t.push(vec![
            r.n.into(),
            r.sigma.into(),
            r.cross_term.into(),
            r.periodic_reference.into(),
            r.point_reference.into(),
            r.rel_error.into(),
        ]);
    }
    ctx.table(t);
    let first = report.rows[0].rel_error;
    ctx.check_le("newtonian_limit", first, tol, format!("relative error at n = {n}"));
    ctx.check("monotone_refinement", report.monotone, None, None, "error decreases from n to 2n");
    Ok(())
}

fn split_axis(ctx: &mut Context) -> Result<SplitAxis, RunError> {
    match ctx.string("axis", "transverse").as_str() {
        "transverse" => Ok(SplitAxis::Transverse),
        "separation" => Ok(SplitAxis::Separation),
        other => Err(RunError::invalid("axis", format!("transverse or separation (got {other:?})"))),
    }
}

fn branch_phase(ctx: &mut Context) -> Result<(), RunError> {
    let kernel_name = ctx.string("kernel", "retarded");
    let kernel = Kernel::parse(&kernel_name).ok_or_else(|| {
        RunError::invalid("kernel", format!("retarded, instantaneous or symmetric (got {kernel_name:?})"))
    })?;
    let tol = ctx.tol("static", 1e-9)?;
    let file = ctx.string("protocol_file", "");
    let mut static_reference = None;
    let protocol = if !file.is_empty() {
        let text = std::fs::read_to_string(&file).map_err(|e| RunError::Config(format!("cannot read {file}: {e}")))?;
        ProtocolDocument::from_json(&text)?.into_protocol()?
    } else {
        let d = ctx.f64("d", 1.0)?;
        let dx = ctx.f64("delta_x", 0.1)?;
        let coupling = ctx.f64("coupling", -1.0)?;
        let hbar = ctx.f64("hbar", 1.0)?;
        let c = ctx.f64("c", 1.0)?;
        match ctx.string("protocol", "static").as_str() {
            "static" => {
                let duration = ctx.f64("duration", 10.0)?;
                // φ₊ + φ₋ of the interferometer with G m₁m₂ = −coupling.
                let p = -coupling * duration / hbar;
                static_reference = Some(p * (1.0 / (d + dx) + 1.0 / (d - dx) - 2.0 / d));
                pathint::static_gie(d, dx, duration, coupling, hbar, c)?
            }
            "adiabatic" => {
                let axis = split_axis(ctx)?;
                let speed = ctx.f64("speed", 0.005)?;
                let hold = ctx.f64("hold", 20.0)?;
                if !(speed > 0.0 && speed < c) {
                    return Err(RunError::invalid("speed", "0 < speed < c"));
                }
                SplitHoldMerge::with_speed(d, dx, axis, speed, hold).protocol(coupling, hbar, c)?
            }
            "spacelike" => {
                let axis = split_axis(ctx)?;
                let fraction = ctx.f64("fraction", 0.5)?;
                if !(fraction > 0.0 && fraction < 1.0) {
                    return Err(RunError::invalid("fraction", "0 < fraction < 1"));
                }
                SplitHoldMerge::spacelike(d, dx, axis, c, fraction).protocol(coupling, hbar, c)?
            }
            other => {
                return Err(RunError::invalid("protocol", format!("static, adiabatic or spacelike (got {other:?})")))
            }
        }
    };
    let report = pathint::phase_report(&protocol, kernel)?;
    let mut t = Table::new("branches", &["branch", "phase"]);
    for (label, phase) in &report.branch_phases {
        t.push(vec![label.clone().into(), (*phase).into()]);
        ctx.scalar(&format!("phase_{label}"), *phase);
    }
    ctx.table(t);
    ctx.scalar("entangling_phase", report.entangling_phase);
    ctx.scalar("max_speed_over_c", protocol.max_speed() / protocol.c);
    if let Some(expected) = static_reference {
        let rel = ((report.entangling_phase - expected) / expected).abs();
        ctx.scalar("interferometer_phase_sum", expected);
        ctx.check_le("static_oracle", rel, tol, "relative difference from phi+ + phi- of the interferometer");
    }
    Ok(())
}

fn kernel_causality(ctx: &mut Context) -> Result<(), RunError> {
    let d = ctx.f64("d", 1.0)?;
    let dx = ctx.f64("delta_x", 0.1)?;
    let coupling = ctx.f64("coupling", -1.0)?;
    let hbar = ctx.f64("hbar", 1.0)?;
    let c = ctx.f64("c", 1.0)?;
    let speed = ctx.f64("speed", 0.005)?;
    let hold = ctx.f64("hold", 20.0)?;
    let factors: Vec<f64> = ctx.list("factors", &[1.0, 2.0, 4.0, 8.0])?;
    let axis = split_axis(ctx)?;
    let fraction = ctx.f64("fraction", 0.5)?;
    let exp_tol = ctx.tol("exponent", 0.2)?;
    let spacelike_tol = ctx.tol("spacelike", 1e-6)?;
    if !(speed > 0.0 && speed < c) {
        return Err(RunError::invalid("speed", "0 < speed < c"));
    }
    if factors.len() < 2 || factors.iter().any(|&f| !(f >= 1.0)) {
        return Err(RunError::invalid("factors", "at least two dilation factors >= 1"));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(RunError::invalid("fraction", "0 < fraction < 1"));
    }

    let fixed = pathint::static_gie(d, dx, hold, coupling, hbar, c)?;
    let inst = pathint::branch_phases(&fixed, Kernel::Instantaneous)?;
    let ret = pathint::branch_phases(&fixed, Kernel::Retarded)?;
    let bit_equal = inst.iter().zip(&ret).all(|(a, b)| a.to_bits() == b.to_bits());
    ctx.check(
        "static_bit_equal",
        bit_equal,
        None,
        None,
        "instantaneous and retarded branch phases identical bit for bit",
    );

    let base = SplitHoldMerge::with_speed(d, dx, axis, speed, hold);
    let scan = pathint::kernel_deviation_scan(&base, &factors, coupling, hbar, c)?;
    let mut t = Table::new("adiabatic", &["v_over_c", "rel_deviation"]);
    for &(v, dev) in &scan {
        t.push(vec![v.into(), dev.into()]);
    }
    ctx.table(t);
    let exponent = pathint::log_log_slope(&scan).unwrap_or(f64::NAN);
    ctx.scalar("exponent", exponent);
    ctx.check_le("deviation_exponent", (exponent - 2.0).abs(), exp_tol, "|fitted exponent - 2|");

    let reference = pathint::entangling_phase(&base.protocol(coupling, hbar, c)?, Kernel::Retarded)?;
    let sl = SplitHoldMerge::spacelike(d, dx, axis, c, fraction).protocol(coupling, hbar, c)?;
    let sl_ret = pathint::entangling_phase(&sl, Kernel::Retarded)?;
    let sl_inst = pathint::entangling_phase(&sl, Kernel::Instantaneous)?;
    ctx.scalar("adiabatic_reference", reference);
    ctx.scalar("spacelike_retarded", sl_ret);
    ctx.scalar("spacelike_instantaneous", sl_inst);
    let ratio_ret = (sl_ret / reference).abs();
    let ratio_inst = (sl_inst / reference).abs();
    ctx.check_le("spacelike_retarded", ratio_ret, spacelike_tol, "|phi_ent| / adiabatic reference, retarded kernel");
    ctx.check(
        "spacelike_instantaneous",
        ratio_inst > spacelike_tol,
        Some(ratio_inst),
        Some(spacelike_tol),
        "instantaneous kernel entangles across spacelike separation",
    );
    Ok(())
}

fn cosmo_spectrum(ctx: &mut Context) -> Result<(), RunError> {
    let model = ctx.string("model", "desitter");
    let eps = ctx.f64("eps", if model == "powerlaw" { 0.02 } else { 0.0 })?;
    let kmin = ctx.f64("kmin", 1.0)?;
    let kmax = ctx.f64("kmax", 10.0)?;
    let nk = ctx.usize("nk", 32)?;
    let h0 = ctx.f64("H0", 1.0)?;
    let opts = ModeOptions {
        eval_ktau: ctx.f64("eval_ktau", 1e-2)?,
        start_ktau: ctx.f64("start_ktau", cosmo::MIN_START_KTAU)?,
        ..ModeOptions::default()
    };
    let wr_tol = ctx.tol("wronskian", 1e-8)?;
    let bg = match model.as_str() {
        "desitter" => {
            if eps != 0.0 {
                return Err(RunError::invalid("eps", "eps = 0 for the de Sitter model"));
            }
            Background::de_sitter(h0)?
        }
        "powerlaw" => Background::power_law(eps, h0)?,
        other => return Err(RunError::invalid("model", format!("desitter or powerlaw (got {other:?})"))),
    };
    if !(kmin > 0.0 && kmax >= kmin) {
        return Err(RunError::invalid("kmin/kmax", "0 < kmin <= kmax"));
    }
    let ks = if nk == 0 { Vec::new() } else { cosmo::log_spaced(kmin, kmax, nk) };
    let rows = cosmo::power_spectrum(&ks, &bg, &opts)?;
    let mut t = Table::new("spectrum", &["k", "p_v", "p_zeta", "p_phi", "wronskian_drift"]);
    for r in &rows {
        t.push(vec![r.k.into(), r.p_v.into(), r.p_zeta.into(), r.p_phi.into(), r.wronskian_drift.into()]);
    }
    ctx.table(t);
    let drift = rows.iter().map(|r| r.wronskian_drift).fold(0.0, f64::max);
    ctx.scalar("max_wronskian_drift", drift);
    ctx.check_le("wronskian", drift, wr_tol, "max |W - 1| over all modes and samples");
    let ps: Vec<f64> = rows.iter().map(|r| r.p_zeta).collect();
    let fit = cosmo::spectral_tilt(&ks, &ps).ok();
    if let Some(tilt) = fit {
        ctx.scalar("tilt", tilt);
    }
    ctx.scalar("analytic_tilt", bg.analytic_tilt());
    match model.as_str() {
        "desitter" => {
            let mf_tol = ctx.tol("mode_function", 1e-6)?;
            let flat_tol = ctx.tol("flatness", 1e-3)?;
            let two_pi2 = 2.0 * std::f64::consts::PI.powi(2);
            let mode_err = rows
                .iter()
                .map(|r| {
                    let v2 = r.p_v * two_pi2 / r.k.powi(3);
                    (v2 / cosmo::de_sitter_power(r.k, -opts.eval_ktau / r.k) - 1.0).abs()
                })
                .fold(0.0, f64::max);
            ctx.scalar("max_mode_function_error", mode_err);
            ctx.check_le("mode_function", mode_err, mf_tol, "|v|^2 vs (1 + 1/(k tau)^2)/2k at evaluation");
            if !ps.is_empty() {
                let (lo, hi) = ps.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &p| (a.min(p), b.max(p)));
                let decades = (kmax / kmin).log10().max(1.0);
                let spread = (hi / lo - 1.0) / decades;
                ctx.scalar("flatness_per_decade", spread);
                ctx.check_le("flatness", spread, flat_tol, "(max/min - 1) of P_zeta per decade");
            }
        }
        _ => {
            let tilt_tol = ctx.tol("tilt", 0.1)?;
            let analytic = bg.analytic_tilt();
            match fit {
                Some(tilt) => {
                    let rel = (tilt / analytic - 1.0).abs();
                    ctx.check("red_tilt", tilt < 0.0, Some(tilt), None, "n_s - 1 < 0");
                    ctx.check_le("tilt_magnitude", rel, tilt_tol, "|fit/analytic - 1|");
                }
                None => ctx.check("tilt_fit", false, None, None, "tilt fit needs >= 5 modes over >= 1 decade"),
            }
        }
    }
    Ok(())
}
