use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use eraser_core::entanglement::{
    chsh_value_with, concurrence, fidelity, maximize_chsh, ChshGrid, ChshSettings,
};
use eraser_core::montecarlo::{
    estimate_chsh, estimate_coincidence_prob, sample_chsh_tables, sample_run, sample_tomography,
    RunSpec, TomographySource,
};
use eraser_core::optics::{
    emission_directions, phase_match_angle, pump_diameter_ok, walkoff_angle, CrystalCatalog,
    EmissionGeometry, PhaseMatchProblem, Ray,
};
use eraser_core::protocol::{
    bell_state, classical_mixture, coincidence_probability, conditional_coincidence_probability,
    ghz_state, herald_outcome, unconditioned_ab_density, xi_states, ExperimentConfig, HeraldPort,
    HeraldStrategy, Parity,
};
use eraser_core::tomography::{reconstruct_density, simulate_tomography_probabilities};
use eraser_core::DensityMatrix;

use crate::config::{sweep_values, MonteCarloSection, RunConfig, StateName};
use crate::format::g12;
use crate::{CliError, Common};

/// Main output (stdout or `--out`) plus a channel for summary lines that
/// keeps CSV on stdout clean.
struct Output {
    writer: Box<dyn Write>,
    to_file: bool,
}

impl Output {
    fn open(common: &Common, cfg: &RunConfig) -> Result<Self, CliError> {
        let path: Option<&PathBuf> = common.out.as_ref().or(cfg.output.path.as_ref());
        Ok(match path {
            Some(path) => Output {
                writer: Box::new(BufWriter::new(File::create(path).map_err(|e| {
                    CliError::Usage(format!("cannot create {}: {e}", path.display()))
                })?)),
                to_file: true,
            },
            None => Output {
                writer: Box::new(BufWriter::new(io::stdout().lock())),
                to_file: false,
            },
        })
    }

    fn line(&mut self, text: &str) -> Result<(), CliError> {
        writeln!(self.writer, "{text}").map_err(io_error)
    }

    fn csv(&mut self) -> csv::Writer<&mut dyn Write> {
        csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut *self.writer)
    }

    /// Summary lines go to stdout when the data went to a file, else stderr.
    fn summary(&self, text: &str) {
        if self.to_file {
            println!("{text}");
        } else {
            eprintln!("{text}");
        }
    }

    fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush().map_err(io_error)
    }
}

fn io_error(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("write failed: {e}"))
}

fn montecarlo_section<'a>(
    cfg: &'a mut RunConfig,
    common: &Common,
) -> Option<&'a MonteCarloSection> {
    if let (Some(mc), Some(seed)) = (cfg.montecarlo.as_mut(), common.seed) {
        mc.seed = seed;
    }
    cfg.montecarlo.as_ref()
}

#[derive(Debug, Args)]
pub struct PhaseMatchArgs {
    /// Crystal name from the data file (default: `crystal.name`, then calcite).
    #[arg(long)]
    crystal: Option<String>,
    /// Pump wavelength in nm (default: `crystal.pump_nm`, then 405).
    #[arg(long)]
    pump_nm: Option<f64>,
}

pub fn phase_match(common: &Common, args: &PhaseMatchArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load_optional(common.config.as_deref())?;
    let name = args
        .crystal
        .clone()
        .or(cfg.crystal.name.clone())
        .unwrap_or_else(|| "calcite".into());
    let pump_nm = args.pump_nm.or(cfg.crystal.pump_nm).unwrap_or(405.0);
    let catalog = CrystalCatalog::from_env()?;
    let crystal = catalog.get(&name)?;
    let problem = PhaseMatchProblem::new(crystal, pump_nm);
    let pm = phase_match_angle(&problem)?;
    let daughter_nm = problem.daughter_wavelength_nm();
    let rho = if problem.process.daughters.contains(&Ray::Extraordinary) {
        walkoff_angle(crystal, daughter_nm, pm.psi)?
    } else {
        0.0
    };
    let mut out = Output::open(common, &cfg)?;
    out.line(&format!(
        "crystal={name} pump_nm={} psi_pm_deg={} residual={} walkoff_rad={} walkoff_wavelength_nm={}",
        g12(pump_nm),
        g12(pm.psi.to_degrees()),
        g12(pm.residual),
        g12(rho),
        g12(daughter_nm)
    ))?;
    out.finish()
}

/// P(A+, B+) for one channel: conditional on a herald port, or with the
/// herald unanalyzed for a direct herald. `None` when the port never fires.
fn coincidence(cfg: &ExperimentConfig, port: Option<HeraldPort>) -> Result<Option<f64>, CliError> {
    let ghz = ghz_state();
    match port {
        None => Ok(Some(coincidence_probability(&ghz, cfg)?)),
        Some(p) => match conditional_coincidence_probability(&ghz, cfg, p) {
            Ok(v) => Ok(Some(v)),
            Err(eraser_core::Error::ImpossibleOutcome { .. }) => Ok(None),
            Err(e) => Err(e.into()),
        },
    }
}

fn ports(cfg: &RunConfig, herald: &HeraldStrategy) -> Vec<Option<HeraldPort>> {
    match (herald, cfg.experiment.port) {
        (HeraldStrategy::Direct, _) => vec![None],
        (_, Some(p)) => vec![Some(p.into())],
        (_, None) => HeraldPort::ALL.iter().map(|&p| Some(p)).collect(),
    }
}

fn port_label(port: Option<HeraldPort>) -> &'static str {
    port.map_or("none", HeraldPort::label)
}

/// Rows are ordered alpha (outer), beta, then port `plus` before `minus`.
/// A port that never fires at the configured herald yields `nan`.
pub fn sweep(common: &Common) -> Result<(), CliError> {
    let cfg = RunConfig::load_optional(common.config.as_deref())?;
    let exp = &cfg.experiment;
    let base = exp.config()?;
    let alphas = sweep_values("alpha_sweep_deg", exp.alpha_deg, exp.alpha_sweep_deg)?;
    let betas = sweep_values("beta_sweep_deg", exp.beta_deg, exp.beta_sweep_deg)?;
    let ports = ports(&cfg, &base.herald);
    let mut out = Output::open(common, &cfg)?;
    {
        let mut w = out.csv();
        w.write_record(["alpha_deg", "beta_deg", "herald", "port", "p_coincidence"])
            .map_err(io_error)?;
        for &a in &alphas {
            for &b in &betas {
                let c = base.with_angles(a.to_radians(), b.to_radians());
                for &port in &ports {
                    let p = coincidence(&c, port)?.unwrap_or(f64::NAN);
                    w.write_record([
                        g12(a),
                        g12(b),
                        base.herald.label().to_string(),
                        port_label(port).to_string(),
                        g12(p),
                    ])
                    .map_err(io_error)?;
                }
            }
        }
        w.flush().map_err(io_error)?;
    }
    out.finish()
}

/// The A,B state seen in one channel.
fn channel_state(
    herald: &HeraldStrategy,
    port: Option<HeraldPort>,
) -> Result<DensityMatrix, CliError> {
    let ghz = ghz_state();
    Ok(match port {
        None => unconditioned_ab_density(&ghz)?,
        Some(p) => herald_outcome(&ghz, herald, p)?.0.to_density(),
    })
}

pub fn chsh(common: &Common) -> Result<(), CliError> {
    let mut cfg = RunConfig::load_optional(common.config.as_deref())?;
    let template = cfg.experiment.config()?;
    let port = match template.herald {
        HeraldStrategy::Direct => None,
        _ => Some(cfg.experiment.port.map_or(HeraldPort::Plus, Into::into)),
    };
    let rho = channel_state(&template.herald, port)?;
    let settings: ChshSettings = if cfg.experiment.maximize {
        maximize_chsh(&rho, &template, ChshGrid::default())?.settings
    } else {
        cfg.experiment.chsh_settings()
    };
    let s = chsh_value_with(&rho, &settings, &template)?;
    let mut lines = vec![format!(
        "herald={} port={} a_deg={} a_prime_deg={} b_deg={} b_prime_deg={} S={}",
        template.herald.label(),
        port_label(port),
        g12(settings.a.to_degrees()),
        g12(settings.a_prime.to_degrees()),
        g12(settings.b.to_degrees()),
        g12(settings.b_prime.to_degrees()),
        g12(s)
    )];
    if let Some(mc) = montecarlo_section(&mut cfg, common) {
        let tables = sample_chsh_tables(&template, &settings, mc.n, mc.efficiencies(), mc.seed)?;
        let est = estimate_chsh(&tables, port)?;
        lines.push(format!(
            "n_per_setting={} seed={} S_hat={} stderr={}",
            mc.n,
            mc.seed,
            g12(est.value),
            g12(est.stderr)
        ));
    }
    let mut out = Output::open(common, &cfg)?;
    for l in &lines {
        out.line(l)?;
    }
    out.finish()
}

pub fn tomography(common: &Common) -> Result<(), CliError> {
    let mut cfg = RunConfig::load_optional(common.config.as_deref())?;
    let settings = cfg.experiment.tomography_settings()?;
    let state = cfg.experiment.state.unwrap_or(StateName::Heralded);
    let herald = cfg.experiment.herald()?;
    let port: HeraldPort = cfg.experiment.port.map_or(HeraldPort::Plus, Into::into);
    let (xi_plus, xi_minus) = xi_states();
    let truth = match state {
        StateName::PhiPlus => bell_state(Parity::Plus).to_density(),
        StateName::PhiMinus => bell_state(Parity::Minus).to_density(),
        StateName::XiPlus => xi_plus.to_density(),
        StateName::XiMinus => xi_minus.to_density(),
        StateName::Mixture => classical_mixture(),
        StateName::Heralded => {
            if herald == HeraldStrategy::Direct {
                unconditioned_ab_density(&ghz_state())?
            } else {
                channel_state(&herald, Some(port))?
            }
        }
    };
    let ghz = ghz_state();
    let (rho, mode) = match montecarlo_section(&mut cfg, common) {
        None => {
            let table = simulate_tomography_probabilities(&truth, &settings)?;
            (reconstruct_density(&table)?, "exact".to_string())
        }
        Some(mc) => {
            let source = if state == StateName::Heralded && herald != HeraldStrategy::Direct {
                TomographySource::Heralded {
                    state: &ghz,
                    herald,
                    port,
                }
            } else {
                TomographySource::Pair(&truth)
            };
            let counts = sample_tomography(source, &settings, mc.n, mc.seed, mc.efficiencies())?;
            (
                counts.reconstruct()?,
                format!("sampled n_per_setting={} seed={}", mc.n, mc.seed),
            )
        }
    };
    let mut out = Output::open(common, &cfg)?;
    {
        let mut w = out.csv();
        w.write_record(["row", "col", "re", "im"])
            .map_err(io_error)?;
        let m = rho.matrix();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let z = m[(r, c)];
                w.write_record([r.to_string(), c.to_string(), g12(z.re), g12(z.im)])
                    .map_err(io_error)?;
            }
        }
        w.flush().map_err(io_error)?;
    }
    out.summary(&format!(
        "mode={mode} fidelity={} concurrence={}",
        g12(fidelity(&rho, &truth)?),
        g12(concurrence(&rho)?)
    ));
    out.finish()
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    /// Herald angle from the pump, degrees.
    #[arg(long)]
    phi_deg: Option<f64>,
    /// Offset of each o photon from the ring centre, degrees.
    #[arg(long)]
    ring_deg: Option<f64>,
    /// Orientation of the o,o′ diameter, degrees.
    #[arg(long, allow_hyphen_values = true)]
    azimuth_deg: Option<f64>,
    /// Pump beam diameter, mm.
    #[arg(long)]
    d_mm: Option<f64>,
    /// Crystal length, mm.
    #[arg(long)]
    l_c_mm: Option<f64>,
    /// Waveplate length, mm.
    #[arg(long)]
    l_w_mm: Option<f64>,
}

pub fn geometry(common: &Common, args: &GeometryArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load_optional(common.config.as_deref())?;
    let g = &cfg.geometry;
    let require = |flag: Option<f64>, file: Option<f64>, name: &str| {
        flag.or(file).ok_or_else(|| {
            CliError::Usage(format!(
                "missing --{} (or geometry.{})",
                name.replace('_', "-"),
                name
            ))
        })
    };
    let phi_deg = require(args.phi_deg, g.phi_deg, "phi_deg")?;
    let ring_deg = args.ring_deg.or(g.ring_deg).unwrap_or(0.0);
    let azimuth_deg = args.azimuth_deg.or(g.azimuth_deg).unwrap_or(0.0);
    let geom = EmissionGeometry::new(
        phi_deg.to_radians(),
        ring_deg.to_radians(),
        azimuth_deg.to_radians(),
    )?;
    let dirs = emission_directions(&geom);
    let deg = |v: [f64; 2]| format!("{},{}", g12(v[0].to_degrees()), g12(v[1].to_degrees()));
    let mut out = Output::open(common, &cfg)?;
    out.line(&format!("herald_deg={}", deg(dirs.herald)))?;
    out.line(&format!("o_deg={}", deg(dirs.o)))?;
    out.line(&format!("o_prime_deg={}", deg(dirs.o_prime)))?;
    out.line(&format!("ring_centre_deg={}", deg(dirs.ring_centre)))?;
    let sum = dirs.transverse_sum();
    out.line(&format!(
        "transverse_sum_rad={},{}",
        g12(sum[0]),
        g12(sum[1])
    ))?;
    let d = args.d_mm.or(g.d_mm);
    let l_c = args.l_c_mm.or(g.l_c_mm);
    let l_w = args.l_w_mm.or(g.l_w_mm);
    match (d, l_c, l_w) {
        (Some(d), Some(l_c), Some(l_w)) => {
            let check = pump_diameter_ok(d, phi_deg.to_radians(), l_c, l_w)?;
            out.line(&format!(
                "pump_diameter_ok={} margin_mm={}",
                check.ok,
                g12(check.margin)
            ))?;
        }
        (None, None, None) => {}
        _ => {
            return Err(CliError::Usage(
                "the pump-diameter check needs all of d_mm, l_c_mm and l_w_mm".into(),
            ))
        }
    }
    out.finish()
}

pub fn montecarlo(common: &Common) -> Result<(), CliError> {
    let mut cfg = RunConfig::load_optional(common.config.as_deref())?;
    let config = cfg.experiment.config()?;
    let Some(mc) = montecarlo_section(&mut cfg, common) else {
        return Err(CliError::Usage(
            "montecarlo needs a [montecarlo] section with n".into(),
        ));
    };
    let spec = RunSpec::new(config, mc.n, mc.seed).with_efficiencies(mc.efficiencies());
    let table = sample_run(&spec)?;
    let channels = ports(&cfg, &config.herald);
    let mut out = Output::open(common, &cfg)?;
    {
        let mut w = out.csv();
        w.write_record(["port", "a", "b", "count"])
            .map_err(io_error)?;
        for &ch in &channels {
            for a in HeraldPort::ALL {
                for b in HeraldPort::ALL {
                    w.write_record([
                        port_label(ch),
                        a.label(),
                        b.label(),
                        &table.count(ch, a, b).to_string(),
                    ])
                    .map_err(io_error)?;
                }
            }
        }
        w.flush().map_err(io_error)?;
    }
    let mut summary = format!("emitted={} detected={}", table.emitted(), table.detected());
    for &ch in &channels {
        if let Ok(est) = estimate_coincidence_prob(&table, ch) {
            summary.push_str(&format!(
                " p_hat_{}={} stderr_{}={}",
                port_label(ch),
                g12(est.value),
                port_label(ch),
                g12(est.stderr)
            ));
        }
    }
    out.summary(&summary);
    out.finish()
}
