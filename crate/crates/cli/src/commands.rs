use std::path::PathBuf;

use clap::{Args, ValueEnum};

use efpsa_core::control::{
    allocate_channels, crosstalk_report, eliminate_crosstalk, local_drive, synthesize_drive, ChannelRequest,
    ControlOptions, DriveTarget, SiteCrosstalk, SynthesisRequest,
};
use efpsa_core::device::{load_device, DeviceModel, NvField, SPEED_OF_LIGHT};
use efpsa_core::field::profiles::{log_radii, profile_curve};
use efpsa_core::field::{
    assemble_g, fit_loglog_slope, superpose, Components, FieldBasisSet, FieldMap, GMatrix, ProfileKind, V3,
    DEFAULT_FIN_CONFINEMENT,
};
use efpsa_core::photonic::{EmitterPosition, LossUnits, OpticalInterface, PurcellProfile};
use efpsa_core::repeater::{
    channel_capacity, herald_density, monte_carlo_protocol, optimize_hybrid, rate_curve, scheme_crossover,
    scheme_rates, superradiance_fidelity, superradiance_time, tradeoff, Architecture, Limit, LinkParams, PairModel,
    RateCurve, SwapCost,
};
use efpsa_core::spin::{
    average_gate_fidelity, dephasing_pi_fidelity, rabi_frequency, DriveConfig, Transition,
};
use efpsa_core::thermal::{efpsa_impedance, heat_sweep, omega_grid, CircuitParams};

use crate::{CliError, CliResult, Command, Document, GlobalArgs, Manifest, RunOutput};

fn e(x: f64) -> String {
    format!("{x:e}")
}

fn parse_count(s: &str) -> Result<usize, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
    if !(v >= 0.0 && v.fract() == 0.0 && v <= 1e15) {
        return Err(format!("'{s}' is not a non-negative integer"));
    }
    Ok(v as usize)
}

/// `lo:hi` or `lo:hi:n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub lo: f64,
    pub hi: f64,
    pub n: Option<usize>,
}

impl std::fmt::Display for Sweep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.n {
            Some(n) => write!(f, "{:e}:{:e}:{n}", self.lo, self.hi),
            None => write!(f, "{:e}:{:e}", self.lo, self.hi),
        }
    }
}

fn parse_sweep(s: &str) -> Result<Sweep, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(format!("'{s}' must be LO:HI or LO:HI:N"));
    }
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number"));
    let (lo, hi) = (num(parts[0])?, num(parts[1])?);
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(format!("'{s}' needs 0 < LO < HI"));
    }
    let n = match parts.get(2) {
        Some(t) => {
            let n = parse_count(t)?;
            if n < 2 {
                return Err("sweep needs at least 2 points".into());
            }
            Some(n)
        }
        None => None,
    };
    Ok(Sweep { lo, hi, n })
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    log_radii(lo, hi, n)
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::validation(format!("--{name} must be > 0 (got {v})")))
    }
}

struct Ctx<'a> {
    global: &'a GlobalArgs,
    manifest: Manifest,
    warnings: Vec<String>,
}

impl<'a> Ctx<'a> {
    fn new(global: &'a GlobalArgs, command: &str) -> Self {
        Self { global, manifest: Manifest::new(command), warnings: Vec::new() }
    }

    fn device(&mut self) -> CliResult<DeviceModel> {
        let text = match &self.global.config {
            Some(p) => self.manifest.read_input("config", p)?,
            None => String::new(),
        };
        let m = load_device(&text)?;
        self.warnings.extend(m.warnings.iter().cloned());
        Ok(m)
    }

    fn imported(&self) -> bool {
        !self.global.field_maps.is_empty()
    }

    fn basis(&mut self, dev: &DeviceModel, fin: f64) -> CliResult<FieldBasisSet> {
        if self.imported() {
            let mut maps = Vec::new();
            for (i, p) in self.global.field_maps.clone().iter().enumerate() {
                let text = self.manifest.read_input(&format!("field-map[{i}]"), p)?;
                maps.push(FieldMap::parse(&text).map_err(|e| CliError::from(e).context(p))?);
            }
            self.manifest.param("basis", "imported");
            Ok(FieldBasisSet::from_maps(maps)?)
        } else {
            self.manifest.param("basis", "surrogate");
            self.manifest.param("fin_confinement", fin);
            Ok(FieldBasisSet::surrogate(&dev.geometry, fin)?)
        }
    }

    /// G from `--gmatrix` when given, else assembled from `basis`.
    fn gmatrix(&mut self, dev: &DeviceModel, basis: &FieldBasisSet, comps: Components) -> CliResult<GMatrix> {
        match self.global.gmatrix.clone() {
            Some(p) => {
                let text = self.manifest.read_input("gmatrix", &p)?;
                Ok(GMatrix::from_csv(&text).map_err(|e| CliError::from(e).context(&p))?)
            }
            None => Ok(assemble_g(basis, &dev.geometry.nv_positions(), &dev.frame, comps)?),
        }
    }

    fn control_options(&self, basis: Option<&FieldBasisSet>) -> ControlOptions {
        ControlOptions {
            strict: self.global.strict,
            surface_field_per_volt: basis.map(|b| b.surface_field_per_volt()),
        }
    }

    fn finish(mut self, documents: Vec<Document>, seeded: bool) -> CliResult<RunOutput> {
        self.manifest.param("strict", self.global.strict);
        if seeded {
            self.manifest.seed = Some(self.global.seed);
        }
        Ok(RunOutput { manifest: self.manifest, documents, warnings: self.warnings })
    }
}

impl CliError {
    fn context(mut self, path: &std::path::Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

pub(crate) fn dispatch(global: &GlobalArgs, command: &Command) -> CliResult<RunOutput> {
    match command {
        Command::GateFidelity(a) => gate_fidelity(global, a),
        Command::FieldProfile(a) => field_profile(global, a),
        Command::Gmatrix(a) => gmatrix(global, a),
        Command::Synthesize(a) => synthesize(global, a),
        Command::HeatBudget(a) => heat_budget(global, a),
        Command::Rates(a) => rates(global, a),
        Command::Schemes(a) => schemes(global, a),
        Command::Mc(a) => mc(global, a),
        Command::Fig2(a) => fig2(global, a),
        Command::Fig4(a) => fig4(global, a),
        Command::Appendix(a) => appendix(global, a),
    }
}

// ---------------------------------------------------------------- spin

#[derive(Debug, Args)]
pub struct GateFidelityArgs {
    /// Transverse field sweep LO:HI:N (V/m, log-spaced).
    #[arg(long, default_value = "1e6:1e8:21", value_parser = parse_sweep)]
    pub e_perp: Sweep,
    /// Monte Carlo samples per point.
    #[arg(long, default_value = "1e5", value_parser = parse_count)]
    pub samples: usize,
    /// Dephasing time (s); defaults to the configured T2*.
    #[arg(long)]
    pub t2: Option<f64>,
}

fn gate_fidelity(global: &GlobalArgs, a: &GateFidelityArgs) -> CliResult<RunOutput> {
    let mut ctx = Ctx::new(global, "gate-fidelity");
    let dev = ctx.device()?;
    let k = &dev.constants;
    let t2 = a.t2.unwrap_or(k.t2_star);
    positive("t2", t2)?;
    let n = a.e_perp.n.unwrap_or(21);
    ctx.manifest.param("e_perp_v_per_m", a.e_perp);
    ctx.manifest.param("samples", a.samples);
    ctx.manifest.param("t2_s", e(t2));
    ctx.manifest.param("transition", "+1<->-1");
    let mut body = String::from("e_perp_v_per_m,rabi_hz,t_pi_s,f_equator,f_avg\n");
    for (i, &ep) in log_grid(a.e_perp.lo, a.e_perp.hi, n).iter().enumerate() {
        let drive = DriveConfig::resonant(Transition::PlusMinus, NvField::new(0.0, ep, 0.0), 0.0, 0.0, k);
        let omega = rabi_frequency(&drive, k);
        let f_eq = dephasing_pi_fidelity(omega, t2);
        let f_avg = average_gate_fidelity(omega, t2, a.samples, global.seed.wrapping_add(i as u64))?;
        body.push_str(&format!("{},{},{},{},{}\n", e(ep), e(omega), e(1.0 / (2.0 * omega)), e(f_eq), e(f_avg)));
    }
    ctx.finish(vec![Document::new("gate_fidelity.csv", body)], true)
}

// ---------------------------------------------------------------- field

fn parse_kind(s: &str) -> Result<ProfileKind, String> {
    s.parse::<ProfileKind>().map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct FieldProfileArgs {
    /// Structure kind; all kinds when omitted.
    #[arg(long, value_parser = parse_kind)]
    pub kind: Vec<ProfileKind>,
    /// Radius sweep LO:HI:N (m, log-spaced).
    #[arg(long, default_value = "5e-8:5e-5:61", value_parser = parse_sweep)]
    pub radii: Sweep,
}

fn profile_table(kinds: &[ProfileKind], radii: &[f64]) -> CliResult<String> {
    let curves: Vec<Vec<f64>> = kinds.iter().map(|&k| profile_curve(k, radii)).collect::<Result<_, _>>()?;
    let mut body = String::from("r_m");
    for k in kinds {
        body.push_str(&format!(",{}", k.name()));
    }
    body.push('\n');
    for (i, r) in radii.iter().enumerate() {
        body.push_str(&e(*r));
        for c in &curves {
            body.push_str(&format!(",{}", e(c[i])));
        }
        body.push('\n');
    }
    Ok(body)
}

/// Far-field slopes over 5–50 µm.
fn slopes(kinds: &[ProfileKind]) -> CliResult<Vec<(ProfileKind, f64)>> {
    let rs = log_grid(5e-6, 50e-6, 21);
    kinds
        .iter()
        .map(|&k| Ok((k, fit_loglog_slope(&rs, &profile_curve(k, &rs)?))))
        .collect()
}

fn field_profile(global: &GlobalArgs, a: &FieldProfileArgs) -> CliResult<RunOutput> {
    let mut ctx = Ctx::new(global, "field-profile");
    let kinds: Vec<ProfileKind> = if a.kind.is_empty() { ProfileKind::ALL.to_vec() } else { a.kind.clone() };
    let n = a.radii.n.unwrap_or(61);
    let names: Vec<&str> = kinds.iter().map(|k| k.name()).collect();
    ctx.manifest.param("kinds", names.join(","));
    ctx.manifest.param("radii_m", a.radii);
    let body = profile_table(&kinds, &log_grid(a.radii.lo, a.radii.hi, n))?;
    for (k, s) in slopes(&kinds)? {
        ctx.manifest.result(&format!("slope_5_50um {}", k.name()), format!("{s:.6}"));
    }
    ctx.finish(vec![Document::new("field_profile.csv", body)], false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ComponentsArg {
    Perp2,
    Full3,
}

impl From<ComponentsArg> for Components {
    fn from(c: ComponentsArg) -> Self {
        match c {
            ComponentsArg::Perp2 => Components::Perp2,
            ComponentsArg::Full3 => Components::Full3,
        }
    }
}

#[derive(Debug, Args)]
pub struct GmatrixArgs {
    #[arg(long, value_enum, default_value = "full3")]
    pub components: ComponentsArg,
    /// Fin field-enhancement factor of the surrogate.
    #[arg(long, default_value_t = DEFAULT_FIN_CONFINEMENT)]
    pub fin: f64,
}

fn gmatrix(global: &GlobalArgs, a: &GmatrixArgs) -> CliResult<RunOutput> {
    let mut ctx = Ctx::new(global, "gmatrix");
    if global.gmatrix.is_some() {
        return Err(CliError::validation("gmatrix assembles G; --gmatrix is not accepted here"));
    }
    let dev = ctx.device()?;
    let basis = ctx.basis(&dev, a.fin)?;
    ctx.manifest.param("components", format!("{:?}", a.components).to_lowercase());
    let g = assemble_g(&basis, &dev.geometry.nv_positions(), &dev.frame, a.components.into())?;
    ctx.manifest.result("condition_number", e(g.condition_number));
    ctx.finish(vec![Document::new("gmatrix.csv", g.to_csv())], false)
}

// ---------------------------------------------------------------- control

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    /// Drive target or channel plan (JSON).
    #[arg(long, value_name = "PATH")]
    pub target: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FIN_CONFINEMENT)]
    pub fin: f64,
}

fn voltages_csv(v: &[f64]) -> String {
    let mut s = String::from("electrode,voltage_v\n");
    for (j, x) in v.iter().enumerate() {
        s.push_str(&format!("{j},{}\n", e(*x)));
    }
    s
}

fn synthesize(global: &GlobalArgs, a: &SynthesizeArgs) -> CliResult<RunOutput> {
    let mut ctx = Ctx::new(global, "synthesize");
    let text = ctx.manifest.read_input("target", &a.target)?;
    let request = SynthesisRequest::from_json(&text).map_err(|e| CliError::from(e).context(&a.target))?;
    let dev = ctx.device()?;
    let k = dev.constants.clone();
    let basis = if global.gmatrix.is_none() { Some(ctx.basis(&dev, a.fin)?) } else { None };
    let opts = ctx.control_options(basis.as_ref());
    let comps = match request {
        SynthesisRequest::Drive(_) => Components::Perp2,
        SynthesisRequest::Stark(_) => Components::Full3,
    };
    let g = match &basis {
        Some(b) => ctx.gmatrix(&dev, b, comps)?,
        None => ctx.gmatrix(&dev, &FieldBasisSet::uniform(Vec::new()), comps)?,
    };
    let mut docs = Vec::new();
    match request {
        SynthesisRequest::Drive(target) => {
            ctx.manifest.param("mode", "drive");
            let s = synthesize_drive(&g, &target, &k, &opts)?;
            ctx.warnings.extend(s.warnings.iter().cloned());
            ctx.manifest.result("relative_residual", e(s.relative_residual));
            ctx.manifest.result("condition_number", e(s.condition_number));
            if let Some(p) = s.peak_surface_field {
                ctx.manifest.result("peak_surface_field_v_per_m", e(p));
            }
            let gp = g.perp_rows();
            let achieved = gp.apply(&s.voltages)?;
            let xt: Vec<SiteCrosstalk> = if target.targets().is_empty() {
                Vec::new()
            } else {
                crosstalk_report(&g, &s.voltages, &target, &k)?
            };
            let mut body =
                String::from("site,target_mu1_v_per_m,target_mu2_v_per_m,mu1_v_per_m,mu2_v_per_m,rabi_hz,xt_equator,xt_bloch\n");
            for site in 0..target.n_sites() {
                let (t1, t2) = target.fields[site];
                let f = NvField::new(0.0, achieved[2 * site], achieved[2 * site + 1]);
                let d = DriveConfig::resonant(Transition::PlusMinus, f, 0.0, 0.0, &k);
                let (xe, xb) = match xt.iter().find(|c| c.site == site) {
                    Some(c) => (e(c.equator), e(c.bloch_average)),
                    None => (String::new(), String::new()),
                };
                body.push_str(&format!(
                    "{site},{},{},{},{},{},{xe},{xb}\n",
                    e(t1),
                    e(t2),
                    e(f.mu1),
                    e(f.mu2),
                    e(rabi_frequency(&d, &k))
                ));
            }
            docs.push(Document::new("voltages.csv", voltages_csv(&s.voltages)));
            docs.push(Document::new("fields.csv", body));
        }
        SynthesisRequest::Stark(plan) => {
            ctx.manifest.param("mode", "stark");
            let alloc = allocate_channels(&g, &plan, &k, &opts)?;
            ctx.warnings.extend(alloc.warnings.iter().cloned());
            ctx.manifest.result("max_zeroed_ratio", e(alloc.max_zeroed_ratio));
            if let Some(p) = alloc.peak_surface_field {
                ctx.manifest.result("peak_surface_field_v_per_m", e(p));
            }
            let mut body = String::from(
                "site,request,required_shift_hz,achieved_shift_hz,e_par_v_per_m,e_mu1_v_per_m,e_mu2_v_per_m\n",
            );
            for (site, f) in alloc.fields.iter().enumerate() {
                let req = match plan.assignment[site] {
                    ChannelRequest::Channel(c) => format!("ch{c}"),
                    ChannelRequest::ShiftHz(_) => "shift".to_string(),
                };
                body.push_str(&format!(
                    "{site},{req},{},{},{},{},{}\n",
                    e(alloc.required_shifts[site]),
                    e(alloc.achieved_shifts[site]),
                    e(f.par),
                    e(f.mu1),
                    e(f.mu2)
                ));
            }
            docs.push(Document::new("voltages.csv", voltages_csv(&alloc.voltages)));
            docs.push(Document::new("shifts.csv", body));
        }
    }
    ctx.finish(docs, false)
}

// ---------------------------------------------------------------- thermal

#[derive(Debug, Args)]
pub struct HeatBudgetArgs {
    /// Target Rabi frequency (Hz).
    #[arg(long, default_value_t = 2e6)]
    pub rabi: f64,
    /// Drive-frequency sweep LO:HI[:N] in Hz; ω = 2πf.
    #[arg(long, default_value = "1e6:2e9:61", value_parser = parse_sweep)]
    pub omega_sweep: Sweep,
    /// Array capacitance (F).
    #[arg(long)]
    pub c: Option<f64>,
    /// Leakage resistance (Ω).
    #[arg(long)]
    pub r: Option<f64>,
    /// Wire resistance (Ω).
    #[arg(long)]
    pub r_w: Option<f64>,
    /// Wire capacitance (F).
    #[arg(long)]
    pub c_w: Option<f64>,
    /// Line impedance (Ω).
    #[arg(long)]
    pub z0: Option<f64>,
    /// Voltage-to-field length (m).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Room-temperature line length (m).
    #[arg(long)]
    pub l1: Option<f64>,
    /// Cold line length (m).
    #[arg(long)]
    pub l2: Option<f64>,
}

fn heat_budget(global: &GlobalArgs, a: &HeatBudgetArgs) -> CliResult<RunOutput> {
    let mut ctx = Ctx::new(global, "heat-budget");
    let dev = ctx.device()?;
    positive("rabi", a.rabi)?;
    let mut p = CircuitParams::default();
    for (slot, v) in [
        (&mut p.c, a.c),
        (&mut p.r, a.r),
        (&mut p.r_w, a.r_w),
        (&mut p.c_w, a.c_w),
        (&mut p.z0, a.z0),
        (&mut p.lambda, a.lambda),
        (&mut p.l1, a.l1),
        (&mut p.l2, a.l2),
    ] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    p.validate()?;
    let n = a.omega_sweep.n.unwrap_or(61);
    ctx.manifest.param("rabi_hz", e(a.rabi));
    ctx.manifest.param("f_sweep_hz", a.omega_sweep);
    for (name, v) in [
        ("c_f", p.c),
        ("r_ohm", p.r),
        ("r_w_ohm", p.r_w),
        ("c_w_f", p.c_w),
        ("z0_ohm", p.z0),
        ("lambda_m", p.lambda),
        ("l1_m", p.l1),
        ("l2_m", p.l2),
    ] {
        ctx.manifest.param(name, e(v));
    }
    let omegas = omega_grid(a.omega_sweep.lo, a.omega_sweep.hi, n);
    // One line per warning category: the last (highest-frequency) instance and a count.
    let mut seen: Vec<(String, String, usize)> = Vec::new();
    for &w in &omegas {
        for msg in efpsa_impedance(&p, w).warnings {
            let key = msg.split(" = ").next().unwrap_or(&msg).to_string();
            match seen.iter_mut().find(|(k, _, _)| *k == key) {
                Some(entry) => {
                    entry.1 = msg;
                    entry.2 += 1;
                }
                None => seen.push((key, msg, 1)),
            }
        }
    }
    let flagged: Vec<String> = seen
        .into_iter()
        .map(|(_, msg, count)| if count > 1 { format!("{msg} ({count} of {n} sweep points)") } else { msg })
        .collect();
    if global.strict && !flagged.is_empty() {
        return Err(CliError::validation(flagged.join("; ")));
    }
    ctx.warnings.extend(flagged);
    let rows = heat_sweep(&p, a.rabi, &omegas, &dev.constants);
    let (lo, hi) = rows
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.heat_electric), hi.max(r.heat_electric)));
    ctx.manifest.result("heat_electric_min_j", e(lo));
    ctx.manifest.result("heat_electric_max_j", e(hi));
    let mut body = String::from(
        "f_hz,omega_rad_per_s,z_c_abs_ohm,heat_electric_j,heat_magnetic_j,ratio,ratio_single_quantum\n",
    );
    for r in &rows {
        body.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e(r.omega / (2.0 * std::f64::consts::PI)),
            e(r.omega),
            e(r.z_c_abs),
            e(r.heat_electric),
            e(r.heat_magnetic),
            e(r.ratio),
            e(r.ratio_single_quantum)
        ));
    }
    ctx.finish(vec![Document::new("heat_budget.csv", body)], false)
}

// ---------------------------------------------------------------- repeater

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Db,
    Nats,
}

#[derive(Debug, Args, Clone)]
pub struct LinkArgs {
    /// Link length (km).
    #[arg(long = "length-km", visible_alias = "L", default_value_t = 1.0)]
    pub length_km: f64,
    /// Fiber attenuation (km⁻¹).
    #[arg(long, default_value_t = 0.041)]
    pub gamma_fiber: f64,
    #[arg(long, default_value_t = 0.83)]
    pub p_d: f64,
    #[arg(long, default_value_t = 0.33)]
    pub p_c: f64,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// Photon lifetime (s).
    #[arg(long, default_value_t = 10e-9)]
    pub t_ph: f64,
    #[arg(long, default_value_t = 10)]
    pub n_freq: usize,
    #[arg(long, default_value_t = 0.92)]
    pub mzi_eff: f64,
    /// Heralding signals travel at c/n_g instead of c.
    #[arg(long, value_name = "N_G")]
    pub fiber_index: Option<f64>,
    /// Local Barrett–Kok attempt time (s).
    #[arg(long, default_value_t = 20e-9)]
    pub bk_time: f64,
    #[arg(long, default_value_t = 0.0)]
    pub swap_time: f64,
    #[arg(long, default_value_t = 1.0)]
    pub swap_fidelity: f64,
    /// Purcell factor at the emitter.
    #[arg(long, default_value_t = 10.0)]
    pub purcell: f64,
    /// Purcell table CSV (detuning_Hz,F_P); requires --detuning.
    #[arg(long, value_name = "PATH")]
    pub purcell_table: Option<PathBuf>,
    /// Take F_P from the Purcell profile at this band-edge detuning (Hz).
    #[arg(long)]
    pub detuning: Option<f64>,
    /// Waveguide loss per period.
    #[arg(long, default_value_t = 4e-3)]
    pub t_wg: f64,
    #[arg(long, value_enum, default_value = "db")]
    pub loss_units: LossArg,
    /// Emitter at the middle of the device.
    #[arg(long)]
    pub midpoint: bool,
}

fn link_setup(ctx: &mut Ctx, a: &LinkArgs, dev: &DeviceModel) -> CliResult<(LinkParams, OpticalInterface)> {
    let lp = LinkParams {
        length_km: a.length_km,
        gamma_fiber: a.gamma_fiber,
        p_d: a.p_d,
        p_c: a.p_c,
        alpha: a.alpha,
        t_ph: a.t_ph,
        n_freq: a.n_freq,
        mzi_eff: a.mzi_eff,
        signal_velocity: match a.fiber_index {
            Some(n) => {
                positive("fiber-index", n)?;
                SPEED_OF_LIGHT / n
            }
            None => SPEED_OF_LIGHT,
        },
        bk_attempt_time: a.bk_time,
        swap: SwapCost { time: a.swap_time, fidelity: a.swap_fidelity },
    };
    lp.validate()?;
    let profile = match &a.purcell_table {
        Some(p) => {
            let text = ctx.manifest.read_input("purcell-table", p)?;
            PurcellProfile::from_csv(&text).map_err(|e| CliError::from(e).context(p))?
        }
        None => PurcellProfile::default(),
    };
    let purcell = match a.detuning {
        Some(d) => profile.purcell_at(d)?,
        None if a.purcell_table.is_some() => {
            return Err(CliError::validation("--purcell-table needs --detuning"));
        }
        None => a.purcell,
    };
    let optics = OpticalInterface {
        purcell,
        debye_waller: dev.constants.debye_waller,
        t_wg: a.t_wg,
        units: match a.loss_units {
            LossArg::Db => LossUnits::Decibel,
            LossArg::Nats => LossUnits::Neper,
        },
        position: if a.midpoint { EmitterPosition::Midpoint } else { EmitterPosition::FullLength },
        profile,
        ..OpticalInterface::default()
    };
    optics.validate()?;
    let m = &mut ctx.manifest;
    m.param("length_km", e(lp.length_km));
    m.param("gamma_fiber_per_km", e(lp.gamma_fiber));
    m.param("p_d", e(lp.p_d));
    m.param("p_c", e(lp.p_c));
    m.param("alpha", e(lp.alpha));
    m.param("t_ph_s", e(lp.t_ph));
    m.param("n_freq", lp.n_freq);
    m.param("mzi_eff", e(lp.mzi_eff));
    m.param("signal_velocity_m_per_s", e(lp.signal_velocity));
    m.param("bk_attempt_time_s", e(lp.bk_attempt_time));
    m.param("swap_time_s", e(lp.swap.time));
    m.param("swap_fidelity", e(lp.swap.fidelity));
    m.param("purcell", e(optics.purcell));
    if let Some(d) = a.detuning {
        m.param("detuning_hz", e(d));
    }
    m.param("debye_waller", e(optics.debye_waller));
    m.param("t_wg_per_period", e(optics.t_wg));
    m.param("loss_units", format!("{:?}", a.loss_units).to_lowercase());
    m.param("emitter_position", if a.midpoint { "midpoint" } else { "full-length" });
    m.result("beta", e(optics.beta()));
    m.result("channel_capacity", channel_capacity(&lp));
    m.result("t_link_s", e(lp.t_link()));
    Ok((lp, optics))
}

fn limit_name(l: Limit) -> &'static str {
    match l {
        Limit::Loss => "loss",
        Limit::Capacity => "capacity",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    Efpsa,
    Mzi,
    Hybrid,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[arg(long, value_enum, default_value = "efpsa")]
    pub arch: ArchArg,
    #[arg(long, default_value = "1", value_parser = parse_count)]
    pub nmin: usize,
    #[arg(long = "nmax", visible_alias = "Nmax", default_value = "5000", value_parser = parse_count)]
    pub nmax: usize,
    #[arg(long, default_value = "1", value_parser = parse_count)]
    pub nstep: usize,
    /// Fixed device count for the hybrid; the optimal envelope when omitted.
    #[arg(long, value_parser = parse_count)]
    pub n_dev: Option<usize>,
    #[command(flatten)]
    pub link: LinkArgs,
}

fn n_range(lo: usize, hi: usize, step: usize) -> CliResult<Vec<usize>> {
    if lo == 0 || hi < lo || step == 0 {
        return Err(CliError::validation(format!("need 1 <= nmin <= nmax and nstep >= 1 (got {lo}, {hi}, {step})")));
    }
    Ok((lo..=hi).step_by(step).collect())
}

fn curve_csv(curve: &RateCurve) -> String {
    let mut body = String::from("n,rate_ebits_per_s,limit,n_dev\n");
    for p in curve {
        let nd = p.n_dev.map(|d| d.to_string()).unwrap_or_default();
        body.push_str(&format!("{},{},{},{nd}\n", p.n, e(p.rate), limit_name(p.limit)));
    }
    body
}

fn peak(curve: &RateCurve) -> Option<(usize, f64)> {
    curve.iter().max_by(|a, b| a.rate.total_cmp(&b.rate)).map(|p| (p.n, p.rate))
}

fn rates(global: &GlobalArgs, a: &RatesArgs) -> CliResult<RunOutput> {
    let mut ctx = Ctx::new(global, "rates");
    let dev = ctx.device()?;
    let (lp, op) = link_setup(&mut ctx, &a.link, &dev)?;
    let ns = n_range(a.nmin, a.nmax, a.nstep)?;
    ctx.manifest.param("arch", format!("{:?}", a.arch).to_lowercase());
    ctx.manifest.param("n_range", format!("{}..={} step {}", a.nmin, a.nmax, a.nstep));
    let curve = match (a.arch, a.n_dev) {
        (ArchArg::Efpsa, _) => rate_curve(Architecture::Efpsa, &ns, &lp, &op),
        (ArchArg::Mzi, _) => rate_curve(Architecture::Mzi, &ns, &lp, &op),
        (ArchArg::Hybrid, Some(d)) => {
            if d == 0 || d > a.nmin {
                return Err(CliError::validation(format!("--n-dev must lie in [1, nmin = {}]", a.nmin)));
            }
            ctx.manifest.param("n_dev", d);
            let mut c = rate_curve(Architecture::Hybrid { n_dev: d }, &ns, &lp, &op);
            c.iter_mut().for_each(|p| p.n_dev = Some(d));
            c
        }
        (ArchArg::Hybrid, None) => {
            ctx.manifest.param("n_dev", "optimal");
            efpsa_core::repeater::hybrid_envelope(&ns, &lp, &op)
        }
    };
    if let Some((n, r)) = peak(&curve) {
        ctx.manifest.result("peak_n", n);
        ctx.manifest.result("peak_rate_ebits_per_s", e(r));
    }
    let name = format!("rates_{}.csv", format!("{:?}", a.arch).to_lowercase());
    ctx.finish(vec![Document::new(&name, curve_csv(&curve))], false)
}

#[derive(Debug, Args)]
pub struct SchemesArgs {
    /// Target fidelity.
    #[arg(long, default_value_t = 0.99)]
    pub fidelity: f64,
    /// Detection-efficiency sweep LO:HI:N (log-spaced).
    #[arg(long, default_value = "1e-4:1:41", value_parser = parse_sweep)]
    pub pdet_sweep: Sweep,
}

fn schemes_table(ctx: &mut Ctx, f: f64, sweep: Sweep) -> CliResult<String> {
    if sweep.hi > 1.0 {
        return Err(CliError::validation("p_det sweep must stay within (0, 1]"));
    }
    let mut body = String::from("p_det,barrett_kok,single_photon,superradiance,bk_superradiance,best\n");
    for p in log_grid(sweep.lo, sweep.hi, sweep.n.unwrap_or(41)) {
        let r = scheme_rates(f, p.min(1.0))?;
        body.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e(p),
            e(r.barrett_kok),
            e(r.single_photon),
            e(r.superradiance),
            e(r.combined),
            r.best().name()
        ));
    }
    match scheme_crossover(f)? {
        Some(p) => ctx.manifest.result("combined_best_above_p_det", e(p)),
        None => ctx.manifest.result("combined_best_above_p_det", "never"),
    }
    ctx.manifest.result("tradeoff", e(tradeoff(f)));
    Ok(body)
}

fn schemes(global: &GlobalArgs, a: &SchemesArgs) -> CliResult<RunOutput> {
    let mut ctx = Ctx::new(global, "schemes");
    ctx.manifest.param("fidelity", e(a.fidelity));
    ctx.manifest.param("p_det_sweep", a.pdet_sweep);
    let body = schemes_table(&mut ctx, a.fidelity, a.pdet_sweep)?;
    ctx.finish(vec![Document::new("schemes.csv", body)], false)
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long, default_value = "1e5", value_parser = parse_count)]
    pub trials: usize,
    /// Qubit counts (comma-separated).
    #[arg(long, value_delimiter = ',', default_value = "10,100,800", value_parser = parse_count)]
    pub n: Vec<usize>,
    #[arg(long, value_enum, default_value = "efpsa")]
    pub arch: ArchArg,
    /// Device count for `--arch hybrid`.
    #[arg(long, value_parser = parse_count)]
    pub n_dev: Option<usize>,
    #[command(flatten)]
    pub link: LinkArgs,
}

fn mc(global: &GlobalArgs, a: &McArgs) -> CliResult<RunOutput> {
    let mut ctx = Ctx::new(global, "mc");
    let dev = ctx.device()?;
    let (lp, op) = link_setup(&mut ctx, &a.link, &dev)?;
    ctx.manifest.param("arch", format!("{:?}", a.arch).to_lowercase());
    ctx.manifest.param("trials", a.trials);
    ctx.manifest.param("n", a.n.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","));
    let arch = match (a.arch, a.n_dev) {
        (ArchArg::Efpsa, _) => Architecture::Efpsa,
        (ArchArg::Mzi, _) => Architecture::Mzi,
        (ArchArg::Hybrid, Some(d)) if d >= 1 && a.n.iter().all(|&n| d <= n) => {
            ctx.manifest.param("n_dev", d);
            Architecture::Hybrid { n_dev: d }
        }
        (ArchArg::Hybrid, _) => return Err(CliError::validation("--arch hybrid needs 1 <= --n-dev <= every N")),
    };
    let mut body =
        String::from("n,closed_form_ebits_per_s,mc_ebits_per_s,mc_stderr,z_score,mean_link_s,mean_local_s,mean_swap_s\n");
    for &n in &a.n {
        let model = PairModel::new(arch, n, &lp, &op);
        let est = monte_carlo_protocol(&model, global.seed, a.trials)?;
        let cf = model.rate();
        let z = if est.stderr > 0.0 { (est.rate - cf) / est.stderr } else { 0.0 };
        let t = est.mean_step_times;
        body.push_str(&format!(
            "{n},{},{},{},{},{},{},{}\n",
            e(cf),
            e(est.rate),
            e(est.stderr),
            e(z),
            e(t[0].1),
            e(t[1].1),
            e(t[2].1)
        ));
    }
    ctx.finish(vec![Document::new("mc.csv", body)], true)
}

// ---------------------------------------------------------------- figures

#[derive(Debug, Args)]
pub struct Fig2Args {
    /// Driven site; the central site when omitted.
    #[arg(long)]
    pub site: Option<usize>,
    /// Target transverse field along μ̂₁ (V/m).
    #[arg(long, default_value_t = 1e7)]
    pub e_perp: f64,
    #[arg(long, default_value_t = DEFAULT_FIN_CONFINEMENT)]
    pub fin: f64,
    /// Require imported field maps.
    #[arg(long)]
    pub imported: bool,
    /// Samples per lattice period along the array axis.
    #[arg(long, default_value_t = 20)]
    pub samples_per_period: usize,
}

fn fig2(global: &GlobalArgs, a: &Fig2Args) -> CliResult<RunOutput> {
    let mut ctx = Ctx::new(global, "fig2");
    if a.imported && !ctx.imported() {
        return Err(CliError::validation("--imported needs at least one --field-map"));
    }
    positive("e-perp", a.e_perp)?;
    if a.samples_per_period == 0 {
        return Err(CliError::validation("--samples-per-period must be >= 1"));
    }
    let dev = ctx.device()?;
    let k = dev.constants.clone();
    let n = dev.geometry.n_sites;
    let site = a.site.unwrap_or((n - 1) / 2);
    if site >= n {
        return Err(CliError::validation(format!("--site {site} out of range 0..{n}")));
    }
    let basis = ctx.basis(&dev, a.fin)?;
    let g = ctx.gmatrix(&dev, &basis, Components::Perp2)?;
    ctx.manifest.param("site", site);
    ctx.manifest.param("e_perp_v_per_m", e(a.e_perp));
    ctx.manifest.param("samples_per_period", a.samples_per_period);
    let field = (a.e_perp, 0.0);
    let target = DriveTarget::single_site(n, site, field);
    let opts = ctx.control_options(Some(&basis));
    let v_local = local_drive(&g, site, field)?;
    let ce = eliminate_crosstalk(&g, &target, &k, &opts)?;
    ctx.warnings.extend(ce.warnings.iter().cloned());
    ctx.manifest.result("ce_relative_residual", e(ce.relative_residual));
    ctx.manifest.result("condition_number", e(ce.condition_number));

    let a_len = dev.geometry.a;
    let steps = (n + 1) * a.samples_per_period;
    let zs: Vec<f64> = (0..=steps).map(|i| -a_len + a_len * i as f64 / a.samples_per_period as f64).collect();
    let axis: Vec<V3> = zs.iter().map(|&z| V3::new(0.0, 0.0, z)).collect();
    let profile = |v: &[f64]| -> CliResult<String> {
        let fields = superpose(&basis, v, &axis)?;
        let mut body = String::from("z_m,e_perp_v_per_m,rabi_hz\n");
        for (z, f) in zs.iter().zip(&fields) {
            let nv = dev.frame.lab_to_nv(f);
            let d = DriveConfig::resonant(Transition::PlusMinus, NvField::new(0.0, nv.mu1, nv.mu2), 0.0, 0.0, &k);
            body.push_str(&format!("{},{},{}\n", e(*z), e(nv.perp()), e(rabi_frequency(&d, &k))));
        }
        Ok(body)
    };
    let doc_a = profile(&v_local)?;
    let doc_b = profile(&ce.voltages)?;

    let xt_local = crosstalk_report(&g, &v_local, &target, &k)?;
    let xt_ce = crosstalk_report(&g, &ce.voltages, &target, &k)?;
    // Bare electrodes for comparison, surrogate only.
    let xt_bare = if basis.provenance() == efpsa_core::field::Provenance::Surrogate && global.gmatrix.is_none() {
        let bare = FieldBasisSet::surrogate(&dev.geometry, 1.0)?;
        let gb = assemble_g(&bare, &dev.geometry.nv_positions(), &dev.frame, Components::Perp2)?;
        Some(crosstalk_report(&gb, &local_drive(&gb, site, field)?, &target, &k)?)
    } else {
        None
    };
    let gp = g.perp_rows();
    let (el, ec) = (gp.apply(&v_local)?, gp.apply(&ce.voltages)?);
    let amp = |v: &[f64], s: usize| v[2 * s].hypot(v[2 * s + 1]);
    let find = |r: &[SiteCrosstalk], s: usize| r.iter().find(|c| c.site == s).copied();
    let mut body = String::from(
        "site,e_perp_single_v_per_m,e_perp_ce_v_per_m,xt_single_equator,xt_ce_equator,xt_bare_equator,xt_single_bloch,xt_ce_bloch\n",
    );
    let opt = |c: Option<SiteCrosstalk>, f: fn(&SiteCrosstalk) -> f64| c.map(|c| e(f(&c))).unwrap_or_default();
    for s in 0..n {
        let (l, c) = (find(&xt_local, s), find(&xt_ce, s));
        let b = xt_bare.as_ref().and_then(|r| find(r, s));
        body.push_str(&format!(
            "{s},{},{},{},{},{},{},{}\n",
            e(amp(&el, s)),
            e(amp(&ec, s)),
            opt(l, |c| c.equator),
            opt(c, |c| c.equator),
            opt(b, |c| c.equator),
            opt(l, |c| c.bloch_average),
            opt(c, |c| c.bloch_average)
        ));
    }
    let neighbours: Vec<usize> = [site.wrapping_sub(1), site + 1].into_iter().filter(|&s| s < n).collect();
    let worst = |r: &[SiteCrosstalk]| {
        neighbours.iter().filter_map(|&s| find(r, s)).map(|c| c.equator).fold(1.0, f64::min)
    };
    ctx.manifest.result("neighbour_xt_single_equator", e(worst(&xt_local)));
    ctx.manifest.result("neighbour_xt_ce_equator", e(worst(&xt_ce)));
    if let Some(b) = &xt_bare {
        ctx.manifest.result("neighbour_xt_bare_equator", e(worst(b)));
    }
    let max_off = (0..n).filter(|&s| s != site).map(|s| amp(&ec, s)).fold(0.0, f64::max);
    ctx.manifest.result("ce_max_offsite_ratio", e(max_off / amp(&ec, site)));
    ctx.finish(
        vec![
            Document::new("fig2a_single_electrode.csv", doc_a),
            Document::new("fig2b_crosstalk_eliminated.csv", doc_b),
            Document::new("fig2c_sites.csv", body),
        ],
        false,
    )
}

#[derive(Debug, Args)]
pub struct Fig4Args {
    #[arg(long = "nmax", visible_alias = "Nmax", default_value = "5000", value_parser = parse_count)]
    pub nmax: usize,
    /// Fixed hybrid device counts for the per-split curves.
    #[arg(long, value_delimiter = ',', default_value = "1,4,16,64,256", value_parser = parse_count)]
    pub n_dev: Vec<usize>,
    /// Link lengths (km) for the length sweep.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,5,10,20,50")]
    pub lengths: Vec<f64>,
    /// Qubit-number grid points per length.
    #[arg(long, default_value = "40", value_parser = parse_count)]
    pub grid_points: usize,
    #[command(flatten)]
    pub link: LinkArgs,
}

fn fig4(global: &GlobalArgs, a: &Fig4Args) -> CliResult<RunOutput> {
    let mut ctx = Ctx::new(global, "fig4");
    let dev = ctx.device()?;
    let (lp, op) = link_setup(&mut ctx, &a.link, &dev)?;
    if a.nmax < 2 || a.grid_points < 2 {
        return Err(CliError::validation("--nmax and --grid-points must be >= 2"));
    }
    if a.n_dev.contains(&0) {
        return Err(CliError::validation("--n-dev entries must be >= 1"));
    }
    if let Some(l) = a.lengths.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(CliError::validation(format!("--lengths entries must be > 0 (got {l})")));
    }
    ctx.manifest.param("nmax", a.nmax);
    ctx.manifest.param("n_dev", a.n_dev.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","));
    ctx.manifest.param("lengths_km", a.lengths.iter().map(|l| e(*l)).collect::<Vec<_>>().join(","));
    ctx.manifest.param("grid_points", a.grid_points);
    let ns: Vec<usize> = (1..=a.nmax).collect();

    let ef = rate_curve(Architecture::Efpsa, &ns, &lp, &op);
    let mz = rate_curve(Architecture::Mzi, &ns, &lp, &op);
    let mut b = String::from("n,efpsa_ebits_per_s,efpsa_limit,mzi_ebits_per_s,mzi_limit\n");
    for (p, q) in ef.iter().zip(&mz) {
        b.push_str(&format!("{},{},{},{},{}\n", p.n, e(p.rate), limit_name(p.limit), e(q.rate), limit_name(q.limit)));
    }
    if let Some((n, r)) = peak(&ef) {
        ctx.manifest.result("efpsa_peak_n", n);
        ctx.manifest.result("efpsa_peak_ebits_per_s", e(r));
    }
    let cap = channel_capacity(&lp);
    if cap <= a.nmax {
        let (re, rm) = (ef[cap - 1].rate, mz[cap - 1].rate);
        ctx.manifest.result("mzi_over_efpsa_at_capacity", format!("{:.4}", rm / re));
    }

    let env = efpsa_core::repeater::hybrid_envelope(&ns, &lp, &op);
    let mut c = String::from("n");
    for d in &a.n_dev {
        c.push_str(&format!(",hybrid_ndev_{d}"));
    }
    c.push_str(",envelope_ebits_per_s,envelope_n_dev,limit\n");
    for (i, p) in env.iter().enumerate() {
        let n = ns[i];
        c.push_str(&n.to_string());
        for &d in &a.n_dev {
            if d <= n {
                c.push_str(&format!(",{}", e(PairModel::new(Architecture::Hybrid { n_dev: d }, n, &lp, &op).rate())));
            } else {
                c.push(',');
            }
        }
        c.push_str(&format!(",{},{},{}\n", e(p.rate), p.n_dev.unwrap_or(1), limit_name(p.limit)));
    }

    let grid: Vec<usize> = {
        let mut g: Vec<usize> =
            log_grid(1.0, a.nmax as f64, a.grid_points).iter().map(|x| x.round() as usize).collect();
        g.dedup();
        g
    };
    let mut d = String::from("length_km,n,optimal_ebits_per_s,n_dev,limit\n");
    let mut best = String::from("length_km,best_n,best_ebits_per_s,n_dev,channel_capacity\n");
    for &l in &a.lengths {
        let lpl = LinkParams { length_km: l, ..lp.clone() };
        let cap_l = channel_capacity(&lpl);
        let mut top = (0, 0.0, 1);
        for &n in &grid {
            let (nd, r) = optimize_hybrid(n, &lpl, &op);
            let lim = if n > cap_l { Limit::Capacity } else { Limit::Loss };
            d.push_str(&format!("{},{n},{},{nd},{}\n", e(l), e(r), limit_name(lim)));
            if r > top.1 {
                top = (n, r, nd);
            }
        }
        best.push_str(&format!("{},{},{},{},{cap_l}\n", e(l), top.0, e(top.1), top.2));
    }
    ctx.finish(
        vec![
            Document::new("fig4b_architectures.csv", b),
            Document::new("fig4c_hybrid.csv", c),
            Document::new("fig4d_length_sweep.csv", d),
            Document::new("fig4d_best.csv", best),
        ],
        false,
    )
}

#[derive(Debug, Args)]
pub struct AppendixArgs {
    /// Radius sweep LO:HI:N (m, log-spaced).
    #[arg(long, default_value = "5e-8:5e-5:61", value_parser = parse_sweep)]
    pub radii: Sweep,
    /// Single-emitter decay rate Γ_sp (s⁻¹).
    #[arg(long, default_value_t = 100e6)]
    pub gamma_sp: f64,
    #[arg(long, default_value_t = 0.99)]
    pub fidelity: f64,
    /// Herald-time grid end (s).
    #[arg(long, default_value_t = 100e-9)]
    pub t_max: f64,
    #[arg(long, default_value = "101", value_parser = parse_count)]
    pub t_points: usize,
    #[arg(long, default_value = "1e-4:1:41", value_parser = parse_sweep)]
    pub pdet_sweep: Sweep,
}

fn appendix(global: &GlobalArgs, a: &AppendixArgs) -> CliResult<RunOutput> {
    let mut ctx = Ctx::new(global, "appendix");
    positive("gamma-sp", a.gamma_sp)?;
    positive("t-max", a.t_max)?;
    if a.t_points < 2 {
        return Err(CliError::validation("--t-points must be >= 2"));
    }
    ctx.manifest.param("radii_m", a.radii);
    ctx.manifest.param("gamma_sp_per_s", e(a.gamma_sp));
    ctx.manifest.param("fidelity", e(a.fidelity));
    ctx.manifest.param("t_max_s", e(a.t_max));
    ctx.manifest.param("t_points", a.t_points);
    ctx.manifest.param("p_det_sweep", a.pdet_sweep);

    let kinds = ProfileKind::ALL;
    let profiles = profile_table(&kinds, &log_grid(a.radii.lo, a.radii.hi, a.radii.n.unwrap_or(61)))?;
    let mut sl = String::from("kind,expected_slope,fitted_slope,deviation\n");
    for (k, s) in slopes(&kinds)? {
        sl.push_str(&format!("{},{},{},{}\n", k.name(), e(k.expected_slope()), e(s), e(s - k.expected_slope())));
    }

    let t0 = superradiance_time(a.fidelity, a.gamma_sp)?;
    ctx.manifest.result("t0_s", e(t0));
    let mut sr = String::from("t_s,fidelity,herald_density_per_s,late_herald_probability\n");
    for i in 0..a.t_points {
        let t = a.t_max * i as f64 / (a.t_points - 1) as f64;
        let f = superradiance_fidelity(t, a.gamma_sp);
        // (1−F)/(2F) evaluated directly would lose digits as F → 1.
        let late = (-a.gamma_sp * t).exp();
        sr.push_str(&format!("{},{},{},{}\n", e(t), e(f), e(herald_density(t, a.gamma_sp)), e(late)));
    }
    let sc = schemes_table(&mut ctx, a.fidelity, a.pdet_sweep)?;
    ctx.finish(
        vec![
            Document::new("appendix_profiles.csv", profiles),
            Document::new("appendix_slopes.csv", sl),
            Document::new("appendix_superradiance.csv", sr),
            Document::new("appendix_schemes.csv", sc),
        ],
        false,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_and_sweep_parsing() {
        assert_eq!(parse_count("1e5").unwrap(), 100_000);
        assert!(parse_count("2.5").is_err());
        assert!(parse_count("-1").is_err());
        assert_eq!(parse_sweep("1e6:2e9").unwrap(), Sweep { lo: 1e6, hi: 2e9, n: None });
        assert_eq!(parse_sweep("1:10:5").unwrap().n, Some(5));
        for bad in ["1", "2:1", "0:1", "1:2:1", "a:b", "1:2:3:4"] {
            assert!(parse_sweep(bad).is_err(), "{bad}");
        }
    }
}
