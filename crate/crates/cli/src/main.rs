//! `plasmon`: simulate acquisitions, analyse tag files and reproduce the
//! tables and figures.
//!
//! Exit codes: 0 success, 2 usage, 3 configuration, 4 I/O, 5 analysis.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plasmon_core::config::{parse_duration, Config};
use plasmon_core::correlator::{heralded_g2_zero, reconstruct_waveform, CorrelatorError};
use plasmon_core::hom::{fit_coherence_time, hom_curve, VisibilityPoint};
use plasmon_core::io::{fmt_f64, read_tag_file, write_tag_file, CsvTable};
use plasmon_core::model::{BiphotonAmplitude, Shape, TimeTagStream, CH_HERALD, CH_HERALD_SPLIT, CH_REEMIT_A, CH_REEMIT_B};
use plasmon_core::spectrum::{
    bethe_hole_transmission, bethe_transmittance, fano_from_observables, fano_spectrum, fit_fano, spp_resonance_wavelengths,
    ArrayGeometry, Interface, PermittivityTable, Polarization,
};
use plasmon_core::workflow::{self, Arm, FIG5_DELAYS};

#[derive(Debug)]
enum CliError {
    Usage(String),
    Config(String),
    Io(String),
    Analysis(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Io(_) => 4,
            CliError::Analysis(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Config(m) | CliError::Io(m) | CliError::Analysis(m) => m,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn analysis<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Analysis(e.to_string())
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

impl From<workflow::WorkflowError> for CliError {
    fn from(e: workflow::WorkflowError) -> Self {
        match e {
            workflow::WorkflowError::Config(c) => CliError::Config(c.to_string()),
            other => CliError::Analysis(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "plasmon", version, about = "Single-photon to single-plasmon conversion: simulation and analysis")]
struct Cli {
    /// Random seed; overrides `run.seed` of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an acquisition and write a tag file.
    Simulate(SimulateArgs),
    /// Analyse a tag file.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Frequency-domain Hong–Ou–Mandel interference.
    #[command(subcommand)]
    Hom(HomCommand),
    /// Nanohole array transmission.
    #[command(subcommand)]
    Spectrum(SpectrumCommand),
    /// Reproduce a table or figure end to end.
    Repro(ReproArgs),
    /// Print the configuration with every key and its description.
    Config(ConfigArgs),
}

#[derive(Args)]
struct ConfigOpt {
    /// Configuration file (`section.key = value`).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigOpt,
    /// Acquisition time with unit, e.g. `60s`.
    #[arg(long)]
    duration: Option<String>,
    /// Measure the incident photons (sample bypassed).
    #[arg(long)]
    incident: bool,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct TagsIn {
    /// Input tag file.
    #[arg(long)]
    tags: PathBuf,
    #[command(flatten)]
    config: ConfigOpt,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Heralded g²(0).
    G2 {
        #[command(flatten)]
        input: TagsIn,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Cauchy–Schwarz parameter C(τ), one CSV per bin width.
    Cs {
        #[command(flatten)]
        input: TagsIn,
        /// Bin widths in ns.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        bins: Vec<f64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Herald-conditioned waveform of the reemitted arm.
    Waveform {
        #[command(flatten)]
        input: TagsIn,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct AmplitudeArgs {
    #[arg(long, default_value = "double-exponential")]
    shape: String,
    /// ns.
    #[arg(long, default_value_t = 50.0)]
    fwhm: f64,
    /// ns.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    offset: f64,
}

impl AmplitudeArgs {
    fn amplitude(&self) -> Result<BiphotonAmplitude<f64>> {
        let shape: Shape = self.shape.parse().map_err(|e: plasmon_core::model::ModelError| CliError::Usage(e.to_string()))?;
        BiphotonAmplitude::new(shape, self.fwhm, self.offset).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Subcommand)]
enum HomCommand {
    /// Coincidence probability against signal–idler detuning.
    Curve {
        #[command(flatten)]
        amplitude: AmplitudeArgs,
        /// Optical delay, ns.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        delay: f64,
        /// Detuning range and step, MHz.
        #[arg(long, default_value_t = -30.0, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, default_value_t = 30.0, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 0.25)]
        step: f64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Fit the waveform width to visibilities (`delay_ns,visibility,error`).
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        amplitude: AmplitudeArgs,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GeometryArgs {
    /// nm.
    #[arg(long, default_value_t = 430.0)]
    pitch: f64,
    /// nm.
    #[arg(long, default_value_t = 200.0)]
    diameter: f64,
    /// nm.
    #[arg(long, default_value_t = 100.0)]
    thickness: f64,
    /// Degrees.
    #[arg(long, default_value_t = 17.0)]
    taper: f64,
}

impl GeometryArgs {
    fn geometry(&self) -> Result<ArrayGeometry<f64>> {
        ArrayGeometry::new(self.pitch, self.diameter, self.thickness, self.taper).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Args)]
struct GridArgs {
    /// Wavelength range and step, nm.
    #[arg(long, default_value_t = 600.0)]
    from: f64,
    #[arg(long, default_value_t = 1000.0)]
    to: f64,
    #[arg(long, default_value_t = 1.0)]
    step: f64,
}

impl GridArgs {
    fn grid(&self) -> Result<Vec<f64>> {
        linspace(self.from, self.to, self.step)
    }
}

fn linspace(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(to >= from) || !from.is_finite() || !to.is_finite() {
        return Err(CliError::Usage(format!("bad range {from}..{to} step {step}")));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| from + k as f64 * step).collect())
}

#[derive(Subcommand)]
enum SpectrumCommand {
    /// Bethe transmission of one hole and of the array.
    Bethe {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// SPP resonance wavelengths against angle of incidence.
    Resonance {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[arg(long, default_value = "glass")]
        interface: String,
        #[arg(long, default_value = "tm")]
        polarization: String,
        /// Orders as `i:j`, comma separated.
        #[arg(long, default_value = "1:0,-1:0,0:1,0:-1", allow_hyphen_values = true)]
        orders: String,
        /// Angle range and step, degrees.
        #[arg(long, default_value_t = 0.0)]
        theta_from: f64,
        #[arg(long, default_value_t = 10.0)]
        theta_to: f64,
        #[arg(long, default_value_t = 1.0)]
        theta_step: f64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Fano transmission spectrum with a given observed peak.
    Fano {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Peak position, nm.
        #[arg(long, default_value_t = 805.0)]
        peak_wavelength: f64,
        #[arg(long, default_value_t = 0.36)]
        peak: f64,
        /// Full width of the peak, nm.
        #[arg(long, default_value_t = 96.0)]
        fwhm: f64,
        #[arg(long, default_value_t = 8.0, allow_hyphen_values = true)]
        q: f64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Fit a Fano profile to `wavelength_nm,transmittance` data.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Report the fitted transmittance here, nm.
        #[arg(long, default_value_t = 795.0)]
        at: f64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Recipe {
    Table1,
    Fig3,
    Fig4,
    Fig5,
}

#[derive(Args)]
struct ReproArgs {
    #[arg(value_enum)]
    recipe: Recipe,
    #[command(flatten)]
    config: ConfigOpt,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Heralds to integrate per waveform (fig4, fig5).
    #[arg(long, default_value_t = 1_000_000)]
    heralds: u64,
}

#[derive(Args)]
struct ConfigArgs {
    #[command(flatten)]
    config: ConfigOpt,
}

fn load_config(opt: &ConfigOpt, seed: Option<u64>) -> Result<Config> {
    let mut cfg = match &opt.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(io_err(p))?;
            Config::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => Config::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn emit(table: &CsvTable, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => table.write(p).map_err(io_err(p)),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&table.to_bytes()).map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

fn write_in(dir: &Path, name: &str, table: &CsvTable) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let p = dir.join(name);
    table.write(&p).map_err(io_err(&p))?;
    Ok(p)
}

fn read_csv(path: &Path) -> Result<CsvTable> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    CsvTable::parse(&bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn numeric_column(t: &CsvTable, name: &str, fallback: usize, path: &Path) -> Result<Vec<f64>> {
    let k = t.header.iter().position(|h| h == name).unwrap_or(fallback);
    if k >= t.header.len() {
        return Err(CliError::Analysis(format!("{}: missing column `{name}`", path.display())));
    }
    t.rows
        .iter()
        .map(|r| r[k].trim().parse::<f64>().map_err(|_| CliError::Analysis(format!("{}: `{}` is not a number", path.display(), r[k]))))
        .collect()
}

/// Herald channels present in a recorded stream.
fn heralds_of(stream: &TimeTagStream) -> Vec<u8> {
    if stream.count(CH_HERALD_SPLIT) > 0 {
        vec![CH_HERALD, CH_HERALD_SPLIT]
    } else {
        vec![CH_HERALD]
    }
}

fn ns_label(x: f64) -> String {
    fmt_f64(x).replace('-', "m")
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Simulate(a) => {
            let mut cfg = load_config(&a.config, seed)?;
            if let Some(d) = &a.duration {
                cfg.duration = parse_duration(d).ok_or_else(|| CliError::Usage(format!("bad duration `{d}`")))?;
            }
            if a.incident {
                cfg = workflow::with_arm(&cfg, Arm::Incident);
            }
            cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
            let run = workflow::simulate_seeded(&cfg)?;
            write_tag_file(&a.out, &run.stream).map_err(|e| CliError::Io(format!("{}: {e}", a.out.display())))?;
            eprintln!("{} tags, {} emitted pairs", run.stream.len(), run.emitted_pairs);
        }
        Command::Analyze(cmd) => analyze(cmd, seed)?,
        Command::Hom(cmd) => hom(cmd)?,
        Command::Spectrum(cmd) => spectrum(cmd)?,
        Command::Repro(a) => repro(a, seed)?,
        Command::Config(a) => print!("{}", load_config(&a.config, seed)?.to_text()),
    }
    Ok(())
}

fn load_tags(input: &TagsIn, seed: Option<u64>) -> Result<(TimeTagStream, Config)> {
    let cfg = load_config(&input.config, seed)?;
    let stream = read_tag_file(&input.tags).map_err(|e| CliError::Io(format!("{}: {e}", input.tags.display())))?;
    Ok((stream, cfg))
}

fn analyze(cmd: AnalyzeCommand, seed: Option<u64>) -> Result<()> {
    match cmd {
        AnalyzeCommand::G2 { input, out } => {
            let (stream, cfg) = load_tags(&input, seed)?;
            let g = heralded_g2_zero(&stream, &heralds_of(&stream), CH_REEMIT_A, CH_REEMIT_B, cfg.herald_window()).map_err(analysis)?;
            let mut t = CsvTable::new(["g2", "error", "n1", "n12", "n13", "n123"]);
            t.push([fmt_f64(g.value), fmt_f64(g.error), g.n1.to_string(), g.n12.to_string(), g.n13.to_string(), g.n123.to_string()]);
            emit(&t, out.as_deref())
        }
        AnalyzeCommand::Cs { input, bins, out_dir } => {
            let (stream, cfg) = load_tags(&input, seed)?;
            let heralds = heralds_of(&stream);
            if heralds.len() != 2 {
                return Err(analysis(CorrelatorError::NeedSplitHerald(heralds.len())));
            }
            let center = cfg.source.amplitude.offset();
            for b in bins {
                let ps = (b * 1e3).round();
                if !(ps >= 1.0) {
                    return Err(CliError::Usage(format!("bin width {b} ns is below 1 ps")));
                }
                let r = workflow::measure_cs(&stream, &cfg, ps as u64)?;
                let p = write_in(&out_dir, &format!("cs_{}ns.csv", ns_label(b)), &workflow::cs_csv(&r))?;
                match workflow::cs_peak_near(&r, center, 25.0) {
                    Some((tau, c, e)) => println!("{}: bin {b} ns, peak C = {c} ± {e} at {tau} ns", p.display()),
                    None => println!("{}: bin {b} ns, C undefined", p.display()),
                }
            }
            Ok(())
        }
        AnalyzeCommand::Waveform { input, out } => {
            let (stream, cfg) = load_tags(&input, seed)?;
            let binning = cfg.binning(cfg.analysis.bin_width, cfg.analysis.waveform_window);
            let w = reconstruct_waveform(&stream, &heralds_of(&stream), &[CH_REEMIT_A, CH_REEMIT_B], binning).map_err(analysis)?;
            emit(&workflow::waveform_csv(&w), out.as_deref())
        }
    }
}

fn hom(cmd: HomCommand) -> Result<()> {
    match cmd {
        HomCommand::Curve { amplitude, delay, from, to, step, out } => {
            let amp = amplitude.amplitude()?;
            let mhz = linspace(from, to, step)?;
            let c = hom_curve(&amp, &mhz, delay).map_err(analysis)?;
            let mut t = CsvTable::new(["detuning_mhz", "coincidence"]);
            for (d, v) in c.detunings_mhz.iter().zip(&c.values) {
                t.push_f64(&[*d, *v]);
            }
            emit(&t, out.as_deref())
        }
        HomCommand::Fit { input, amplitude, out } => {
            let amp = amplitude.amplitude()?;
            let data = read_csv(&input)?;
            let delay = numeric_column(&data, "delay_ns", 0, &input)?;
            let vis = numeric_column(&data, "visibility", 1, &input)?;
            let err = if data.header.len() > 2 { numeric_column(&data, "error", 2, &input)? } else { vec![0.0; delay.len()] };
            let points: Vec<VisibilityPoint<f64>> =
                delay.iter().zip(&vis).zip(&err).map(|((&d, &v), &e)| VisibilityPoint { delay: d, visibility: v, error: e }).collect();
            let fit = fit_coherence_time(&points, &amp).map_err(analysis)?;
            let mut t = CsvTable::new(["parameter", "value", "error"]);
            t.push(["fwhm_ns".to_string(), fmt_f64(fit.fwhm), fmt_f64(fit.error)]);
            t.push(["residual_norm".to_string(), fmt_f64(fit.residual_norm), String::new()]);
            emit(&t, out.as_deref())
        }
    }
}

fn parse_orders(s: &str) -> Result<Vec<(i32, i32)>> {
    s.split(',')
        .map(|o| {
            let (i, j) = o.split_once(':').ok_or_else(|| CliError::Usage(format!("order `{o}` is not `i:j`")))?;
            let p = |x: &str| x.trim().parse::<i32>().map_err(|_| CliError::Usage(format!("order `{o}` is not `i:j`")));
            Ok((p(i)?, p(j)?))
        })
        .collect()
}

fn spectrum(cmd: SpectrumCommand) -> Result<()> {
    match cmd {
        SpectrumCommand::Bethe { geometry, grid, out } => {
            let g = geometry.geometry()?;
            let mut t = CsvTable::new(["wavelength_nm", "hole", "array"]);
            for l in grid.grid()? {
                t.push_f64(&[l, bethe_hole_transmission(g.hole_diameter, l), bethe_transmittance(&g, l)]);
            }
            emit(&t, out.as_deref())
        }
        SpectrumCommand::Resonance { geometry, interface, polarization, orders, theta_from, theta_to, theta_step, out } => {
            let g = geometry.geometry()?;
            let iface: Interface = interface.parse().map_err(|e: plasmon_core::spectrum::SpectrumError| CliError::Usage(e.to_string()))?;
            let pol: Polarization = polarization.parse().map_err(|e: plasmon_core::spectrum::SpectrumError| CliError::Usage(e.to_string()))?;
            let orders = parse_orders(&orders)?;
            let perm = PermittivityTable::gold();
            let mut header = vec!["theta_deg".to_string()];
            header.extend(orders.iter().map(|(i, j)| format!("order_{i}_{j}_nm")));
            let mut t = CsvTable::new(header);
            for theta in linspace(theta_from, theta_to, theta_step)? {
                let l = spp_resonance_wavelengths(&g, &perm, iface, theta, pol, &orders).map_err(analysis)?;
                let mut row = vec![theta];
                row.extend(l);
                t.push_f64(&row);
            }
            emit(&t, out.as_deref())
        }
        SpectrumCommand::Fano { geometry, grid, peak_wavelength, peak, fwhm, q, out } => {
            let g = geometry.geometry()?;
            let p = fano_from_observables(&g, peak_wavelength, peak, fwhm, q).map_err(analysis)?;
            eprintln!("resonance {} nm, width {} nm, q {}", p.resonance, p.fwhm, p.q);
            let s = fano_spectrum(&g, p, &grid.grid()?).map_err(analysis)?;
            let mut t = CsvTable::new(["wavelength_nm", "resonance", "diffraction", "total"]);
            let total = s.total();
            for (k, l) in s.wavelengths().iter().enumerate() {
                t.push_f64(&[*l, s.resonance()[k], s.diffraction()[k], total[k]]);
            }
            emit(&t, out.as_deref())
        }
        SpectrumCommand::Fit { input, geometry, at, out } => {
            let g = geometry.geometry()?;
            let data = read_csv(&input)?;
            let l = numeric_column(&data, "wavelength_nm", 0, &input)?;
            let v = numeric_column(&data, "transmittance", 1, &input)?;
            let points: Vec<(f64, f64)> = l.into_iter().zip(v).collect();
            let fit = fit_fano(&g, &points, None).map_err(analysis)?;
            let model = plasmon_core::spectrum::FanoModel::new(g, fit.params).map_err(analysis)?;
            let mut t = CsvTable::new(["parameter", "value", "error"]);
            let (p, e) = (fit.params, fit.errors);
            for (name, value, err) in [
                ("resonance_nm", p.resonance, e.resonance),
                ("peak", p.peak, e.peak),
                ("width_nm", p.fwhm, e.fwhm),
                ("q", p.q, e.q),
            ] {
                t.push([name.to_string(), fmt_f64(value), fmt_f64(err)]);
            }
            t.push([format!("transmittance_at_{}nm", fmt_f64(at)), fmt_f64(model.total(at)), String::new()]);
            t.push(["peak_wavelength_nm".to_string(), fmt_f64(model.peak_wavelength()), String::new()]);
            emit(&t, out.as_deref())
        }
    }
}

fn repro(a: ReproArgs, seed: Option<u64>) -> Result<()> {
    let cfg = load_config(&a.config, seed)?;
    let dir = &a.out_dir;
    match a.recipe {
        Recipe::Table1 => {
            let rows = workflow::table1(&cfg)?;
            let p = write_in(dir, "table1.csv", &workflow::table1_csv(&rows))?;
            for r in &rows {
                println!("{:9} {:9} g2(0) = {:.4} ± {:.4}", r.waveform, r.arm.name(), r.g2.value, r.g2.error);
            }
            println!("wrote {}", p.display());
        }
        Recipe::Fig3 => {
            let bins = [1_000, 2_000, 4_000, 8_000];
            let results = workflow::fig3(&cfg, &bins)?;
            for r in &results {
                write_in(dir, &format!("fig3_cs_{}ns.csv", r.bin_width / 1_000), &workflow::cs_csv(r))?;
            }
            let summary = workflow::fig3_summary_csv(&results, cfg.source.amplitude.offset());
            let p = write_in(dir, "fig3_summary.csv", &summary)?;
            for row in &summary.rows {
                println!("bin {} ns: peak C = {} ± {}", row[0], row[2], row[3]);
            }
            println!("wrote {}", p.display());
        }
        Recipe::Fig4 => {
            let pairs = workflow::fig4(&cfg, a.heralds)?;
            let mut s = CsvTable::new(["waveform", "heralds_incident", "heralds_reemitted", "cosine_similarity"]);
            for pr in &pairs {
                write_in(dir, &format!("fig4_{}_incident.csv", pr.label), &workflow::waveform_csv(&pr.incident))?;
                write_in(dir, &format!("fig4_{}_reemitted.csv", pr.label), &workflow::waveform_csv(&pr.reemitted))?;
                s.push([pr.label.to_string(), pr.heralds.0.to_string(), pr.heralds.1.to_string(), fmt_f64(pr.similarity)]);
                println!("{}: cosine similarity {:.4}", pr.label, pr.similarity);
            }
            let p = write_in(dir, "fig4_summary.csv", &s)?;
            println!("wrote {}", p.display());
        }
        Recipe::Fig5 => {
            let f = workflow::fig5(&cfg, &FIG5_DELAYS, a.heralds)?;
            for (k, d) in FIG5_DELAYS.iter().enumerate() {
                let t = workflow::hom_curves_csv(&f.theory[k], &f.incident[k], &f.reemitted[k]);
                write_in(dir, &format!("fig5_hom_{}ns.csv", ns_label(*d)), &t)?;
                println!("delay {d} ns: incident/reemitted curve similarity {:.6}", f.similarity[k]);
            }
            let v = workflow::visibility_csv(&f.incident_visibility, &f.reemitted_visibility, &cfg.source.amplitude)?;
            write_in(dir, "fig5_visibility.csv", &v)?;
            let mut s = CsvTable::new(["arm", "fitted_fwhm_ns", "error"]);
            s.push(["incident".to_string(), fmt_f64(f.incident_coherence.fwhm), fmt_f64(f.incident_coherence.error)]);
            s.push(["reemitted".to_string(), fmt_f64(f.reemitted_coherence.fwhm), fmt_f64(f.reemitted_coherence.error)]);
            let p = write_in(dir, "fig5_summary.csv", &s)?;
            println!(
                "coherence fit: incident {:.2} ± {:.2} ns, reemitted {:.2} ± {:.2} ns",
                f.incident_coherence.fwhm, f.incident_coherence.error, f.reemitted_coherence.fwhm, f.reemitted_coherence.error
            );
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            if let CliError::Usage(_) = e {
                eprintln!("run `plasmon --help` for usage");
            }
            ExitCode::from(e.code())
        }
    }
}
