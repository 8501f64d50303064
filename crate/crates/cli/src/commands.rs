use std::path::Path;

use serde_json::json;

use qmimo::analytic::{
    ber_closed_form, ber_two_term, ebn0_to_pu, estimation_variances, joint_compensation,
    pilot_compensation_estimation, pu_to_ebn0, Compensation, CsiRegime, LinkParameters, QamOrder,
    QuantizerSpec,
};
use qmimo::scalar::db_to_linear;
use qmimo::simulator::{
    blocks_for_target, run_ber, run_ber_min_errors, run_estimation_error, CsiMode, InputScaling,
    SimConfig,
};
use qmimo::solvers::{
    calibrate_noise_ref, max_users, min_antennas, power_optimal_resolution, Model, PowerModel,
    PowerSweep,
};
use qmimo::{BerExpression, Quantizer};

use crate::config::Config;
use crate::error::CliError;
use crate::manifest::{OutputSet, RunManifest};
use crate::table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    fn render(self, t: &Table) -> String {
        match self {
            Format::Csv => t.to_csv(),
            Format::Json => t.to_json(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Nmin,
    Kmax,
    Power,
}

impl Scenario {
    fn name(self) -> &'static str {
        match self {
            Scenario::Nmin => "nmin",
            Scenario::Kmax => "kmax",
            Scenario::Power => "power",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Simulate,
    Estimate,
    Compensate,
    Scenario(Scenario),
}

impl Command {
    pub fn name(self) -> String {
        match self {
            Command::Analyze => "analyze".into(),
            Command::Simulate => "simulate".into(),
            Command::Estimate => "estimate".into(),
            Command::Compensate => "compensate".into(),
            Command::Scenario(s) => format!("scenario {}", s.name()),
        }
    }

    fn stem(self) -> String {
        match self {
            Command::Scenario(s) => format!("scenario_{}", s.name()),
            other => other.name(),
        }
    }
}

/// What a command produced.
pub struct Outcome {
    pub manifest: RunManifest,
    /// False when every requested solve came back infeasible.
    pub any_feasible: bool,
}

struct Link {
    n: usize,
    k: usize,
    tau: f64,
    m: QamOrder,
}

fn link_of(cfg: &Config) -> Result<Link, CliError> {
    let k: usize = cfg.parse("n_users")?;
    let tau = cfg.parse_opt::<f64>("pilot_len")?.unwrap_or(k as f64);
    Ok(Link {
        n: cfg.parse("n_antennas")?,
        k,
        tau,
        m: cfg.mod_order()?,
    })
}

impl Link {
    fn params(&self, pu: f64) -> Result<LinkParameters<f64>, CliError> {
        Ok(LinkParameters::new(
            self.n,
            self.k,
            Some(self.tau),
            pu,
            self.m,
        )?)
    }
}

/// Power grid in Eb/N0 dB. `pu_db` (linear `p_u` in dB) replaces `ebn0` when set.
fn ebn0_grid(cfg: &Config, m: QamOrder) -> Result<Vec<f64>, CliError> {
    match cfg.raw("pu_db").filter(|v| !v.is_empty()) {
        Some(_) => Ok(cfg
            .range("pu_db")?
            .into_iter()
            .map(|p| pu_to_ebn0(db_to_linear(p), m))
            .collect()),
        None => cfg.range("ebn0"),
    }
}

fn model_of(cfg: &Config) -> Result<Model, CliError> {
    let estimated_csi = csi_of(cfg)? == CsiMode::Estimated;
    let expression = match cfg.raw("expression").unwrap_or("two_term") {
        "two_term" => BerExpression::TwoTerm,
        "full_sum" => BerExpression::FullSum,
        other => {
            return Err(CliError::usage(format!(
                "field `expression`: `{other}` is not two_term|full_sum"
            )))
        }
    };
    Ok(Model {
        estimated_csi,
        expression,
    })
}

fn csi_of(cfg: &Config) -> Result<CsiMode, CliError> {
    match cfg.raw("csi").unwrap_or("estimated") {
        "estimated" => Ok(CsiMode::Estimated),
        "perfect" => Ok(CsiMode::Perfect),
        other => Err(CliError::usage(format!(
            "field `csi`: `{other}` is not estimated|perfect"
        ))),
    }
}

fn scaling_of(cfg: &Config) -> Result<InputScaling, CliError> {
    match cfg.raw("scaling").unwrap_or("statistical") {
        "statistical" => Ok(InputScaling::Statistical),
        "per_antenna" => Ok(InputScaling::PerAntenna),
        other => Err(CliError::usage(format!(
            "field `scaling`: `{other}` is not statistical|per_antenna"
        ))),
    }
}

fn finite_bits(cfg: &Config) -> Result<Vec<u32>, CliError> {
    cfg.resolutions()?
        .into_iter()
        .map(|r| {
            r.bits()
                .ok_or_else(|| CliError::usage("this command needs finite resolutions in `bits`"))
        })
        .collect()
}

pub fn workers_of(cfg: &Config) -> Result<usize, CliError> {
    let w: usize = cfg.parse("workers")?;
    Ok(if w == 0 {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    } else {
        w
    })
}

/// Seed of grid point `(curve, point)`: a splitmix64 mix of the master seed.
fn point_seed(seed: u64, curve: usize, point: usize) -> u64 {
    let mut z = seed ^ ((curve as u64) << 32 | point as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn analyze(cfg: &Config) -> Result<(Table, serde_json::Value, bool), CliError> {
    let link = link_of(cfg)?;
    let grid = ebn0_grid(cfg, link.m)?;
    let estimated = csi_of(cfg)? == CsiMode::Estimated;
    let mut curves: Vec<(String, QuantizerSpec<f64>, CsiRegime)> = cfg
        .resolutions()?
        .into_iter()
        .map(|r| {
            let q = QuantizerSpec::new(r)?;
            Ok((format!("b={r}"), q, CsiRegime::for_quantizer(estimated, &q)))
        })
        .collect::<Result<_, CliError>>()?;
    let fp = QuantizerSpec::full_precision();
    curves.push((
        "full_perfect_csi".into(),
        fp,
        CsiRegime::PerfectCsiFullPrecision,
    ));
    curves.push((
        "full_estimated_csi".into(),
        fp,
        CsiRegime::ImperfectCsiFullPrecision,
    ));

    let mut t = Table::new(&["curve", "ebn0_db", "pu", "ber_closed", "ber_two_term"]);
    for (name, q, regime) in &curves {
        for &e in &grid {
            let pu = ebn0_to_pu(e, link.m);
            let p = link.params(pu)?;
            let closed = ber_closed_form(&p, q, *regime)?.0;
            let two = ber_two_term(&p, q, *regime)?;
            t.push(vec![
                name.as_str().into(),
                e.into(),
                pu.into(),
                closed.into(),
                two.into(),
            ]);
        }
    }
    Ok((t, json!({ "curves": curves.len() }), true))
}

fn simulate(cfg: &Config, workers: usize) -> Result<(Table, serde_json::Value, bool), CliError> {
    let link = link_of(cfg)?;
    let grid = ebn0_grid(cfg, link.m)?;
    let resolutions = cfg.resolutions()?;
    let csi = csi_of(cfg)?;
    let scaling = scaling_of(cfg)?;
    let seed: u64 = cfg.parse("seed")?;
    let target: f64 = cfg.parse("target_ber")?;
    let spb = cfg.count("symbols_per_block")? as usize;
    let min_errors = cfg.count("min_errors")?;
    let bit_cap = cfg.count("bit_cap")?;
    if spb == 0 {
        return Err(CliError::usage(
            "field `symbols_per_block` must be positive",
        ));
    }
    if csi == CsiMode::Estimated && link.tau.ceil() < link.k as f64 {
        return Err(CliError::usage(format!(
            "pilot_len {} is shorter than n_users {}",
            link.tau, link.k
        )));
    }

    let quantizers = resolutions
        .iter()
        .map(|&r| Quantizer::<f64>::design(r))
        .collect::<Result<Vec<_>, _>>()?;
    let base = |q: &Quantizer<f64>, pu: f64| -> Result<SimConfig<f64>, CliError> {
        Ok(SimConfig::new(link.params(pu)?, q.clone(), csi, seed)
            .with_symbols_per_block(spb)
            .with_scaling(scaling))
    };
    let probe = base(&quantizers[0], 1.0)?;
    let n_blocks = match cfg.raw("n_blocks") {
        Some("auto") | None => blocks_for_target(&probe, target),
        Some(_) => cfg.count("n_blocks")? as usize,
    };
    if n_blocks == 0 {
        return Err(CliError::usage("field `n_blocks` must be positive"));
    }
    let points = (grid.len() * quantizers.len()) as u64;
    let per_block = probe.bits_per_block();

    // Budget: fixed runs need exactly points * n_blocks blocks; error-driven
    // runs are estimated from the analytic BER at each point.
    let required_bits: f64 = if min_errors == 0 {
        (points * n_blocks as u64 * per_block) as f64
    } else {
        let mut total = 0.0;
        for q in &quantizers {
            let spec = q.spec();
            let regime = CsiRegime::for_quantizer(csi == CsiMode::Estimated, &spec);
            for &e in &grid {
                let b =
                    ber_two_term(&link.params(ebn0_to_pu(e, link.m))?, &spec, regime)?.max(1e-300);
                total += (min_errors as f64 / b).max((n_blocks as u64 * per_block) as f64);
            }
        }
        total
    };
    if required_bits > bit_cap as f64 {
        return Err(CliError::usage(format!(
            "simulation needs about {required_bits:.3e} bits, above bit_cap = {bit_cap}; raise bit_cap or shrink the grid"
        )));
    }
    let max_blocks = ((bit_cap / per_block.max(1)) / points.max(1)).max(n_blocks as u64) as usize;

    let mut t = Table::new(&[
        "resolution",
        "ebn0_db",
        "ber",
        "ci_low",
        "ci_high",
        "bits_simulated",
        "seed",
    ]);
    let mut records = Vec::new();
    for (ci, q) in quantizers.iter().enumerate() {
        for (pi, &e) in grid.iter().enumerate() {
            let s = point_seed(seed, ci, pi);
            let mut sc = base(q, ebn0_to_pu(e, link.m))?.with_blocks(n_blocks);
            sc.seed = s;
            let r = if min_errors == 0 {
                run_ber(&sc, workers)?
            } else {
                run_ber_min_errors(&sc, min_errors, max_blocks, workers)?
            };
            if pi == 0 {
                records.push(sc.record());
            }
            t.push(vec![
                q.resolution().to_string().into(),
                e.into(),
                r.ber.into(),
                r.ci_low.into(),
                r.ci_high.into(),
                r.bits.into(),
                s.into(),
            ]);
        }
    }
    Ok((t, json!({ "simulations": records }), true))
}

fn estimate(cfg: &Config, workers: usize) -> Result<(Table, serde_json::Value, bool), CliError> {
    let link = link_of(cfg)?;
    let seed: u64 = cfg.parse("seed")?;
    let scaling = scaling_of(cfg)?;
    let n_blocks = match cfg.raw("n_blocks") {
        Some("auto") | None => 2000,
        Some(_) => cfg.count("n_blocks")? as usize,
    };
    let axis = cfg.raw("axis").unwrap_or("pilot_len").to_string();
    // (x, pu, tau) triples
    let points: Vec<(f64, f64, f64)> = match axis.as_str() {
        "power" => {
            let grid = match cfg.raw("pu_db").filter(|v| !v.is_empty()) {
                Some(_) => cfg.range("pu_db")?,
                None => cfg
                    .range("ebn0")?
                    .into_iter()
                    .map(|e| 10.0 * ebn0_to_pu(e, link.m).log10())
                    .collect(),
            };
            grid.into_iter()
                .map(|x| (x, db_to_linear(x), link.tau))
                .collect()
        }
        "pilot_len" => {
            let pu = match cfg.raw("pu_db").filter(|v| !v.is_empty()) {
                Some(_) => db_to_linear(cfg.range("pu_db")?[0]),
                None => ebn0_to_pu(cfg.range("ebn0")?[0], link.m),
            };
            cfg.range("taus")?.into_iter().map(|t| (t, pu, t)).collect()
        }
        other => {
            return Err(CliError::usage(format!(
                "field `axis`: `{other}` is not power|pilot_len"
            )))
        }
    };
    let mut t = Table::new(&[
        "resolution",
        "x",
        "pu",
        "pilot_len",
        "sigma2_eq_analytic",
        "sigma2_eq_empirical",
        "std_error",
    ]);
    for (ci, r) in cfg.resolutions()?.into_iter().enumerate() {
        let q = Quantizer::<f64>::design(r)?;
        let spec = QuantizerSpec::new(r)?;
        for (pi, &(x, pu, tau)) in points.iter().enumerate() {
            if tau.ceil() < link.k as f64 {
                return Err(CliError::usage(format!(
                    "pilot length {tau} is shorter than n_users {}",
                    link.k
                )));
            }
            let p = LinkParameters::new(link.n, link.k, Some(tau), pu, link.m)?;
            let analytic = estimation_variances(&p, &spec)?.var_error;
            let mut sc = SimConfig::new(p, q.clone(), CsiMode::Estimated, point_seed(seed, ci, pi))
                .with_blocks(n_blocks)
                .with_scaling(scaling);
            sc.symbols_per_block = 1;
            let emp = run_estimation_error(&sc, workers)?;
            t.push(vec![
                r.to_string().into(),
                x.into(),
                pu.into(),
                tau.into(),
                analytic.into(),
                emp.mean.into(),
                emp.std_error.into(),
            ]);
        }
    }
    Ok((t, json!({ "axis": axis, "n_blocks": n_blocks }), true))
}

fn compensate(cfg: &Config) -> Result<(Table, serde_json::Value, bool), CliError> {
    let link = link_of(cfg)?;
    let tau_ref: f64 = cfg.parse("tau_ref")?;
    let ebn0_ref: f64 = cfg.parse("ebn0_ref")?;
    let pu_ref = ebn0_to_pu(ebn0_ref, link.m);
    let grid = ebn0_grid(cfg, link.m)?;
    let mut t = Table::new(&[
        "resolution",
        "ebn0_q_db",
        "tau_q_estimation",
        "tau_q_sinr",
        "sinr_feasible",
    ]);
    let mut any = false;
    let mut infeasible = Vec::new();
    for b in finite_bits(cfg)? {
        let alpha = QuantizerSpec::<f64>::bits(b)?.alpha();
        for &e in &grid {
            let pu_q = ebn0_to_pu(e, link.m);
            let est = pilot_compensation_estimation(tau_ref, pu_ref, pu_q, alpha, link.k)?;
            let sinr = joint_compensation(tau_ref, pu_ref, pu_q, alpha, link.k)?;
            let feasible = matches!(sinr, Compensation::Required(_));
            any |= feasible;
            if !feasible {
                infeasible.push(json!({ "bits": b, "ebn0_q_db": e }));
            }
            t.push(vec![
                b.to_string().into(),
                e.into(),
                est.into(),
                sinr.required().into(),
                feasible.into(),
            ]);
        }
    }
    let summary =
        json!({ "tau_ref": tau_ref, "ebn0_ref": ebn0_ref, "sinr_infeasible": infeasible });
    Ok((t, summary, any))
}

fn scenario_nmin(cfg: &Config) -> Result<(Table, serde_json::Value, bool), CliError> {
    let link = link_of(cfg)?;
    let target: f64 = cfg.parse("target_ber")?;
    let cap = cfg.count("antenna_cap")? as usize;
    let model = model_of(cfg)?;
    let grid = ebn0_grid(cfg, link.m)?;
    let mut t = Table::new(&["resolution", "ebn0_db", "n_min", "feasible"]);
    let mut any = false;
    let mut summary = Vec::new();
    for r in cfg.resolutions()? {
        let q = QuantizerSpec::new(r)?;
        let base = LinkParameters::new(link.k, link.k, Some(link.tau), 1.0, link.m)?;
        let mut row = Vec::new();
        for &e in &grid {
            let n = min_antennas(&base, &q, target, e, cap, model)?.value();
            any |= n.is_some();
            row.push(json!({ "ebn0_db": e, "n_min": n }));
            t.push(vec![
                r.to_string().into(),
                e.into(),
                n.into(),
                n.is_some().into(),
            ]);
        }
        summary.push(json!({ "resolution": r.to_string(), "points": row }));
    }
    Ok((
        t,
        json!({ "target_ber": target, "antenna_cap": cap, "limits": summary }),
        any,
    ))
}

fn scenario_kmax(cfg: &Config) -> Result<(Table, serde_json::Value, bool), CliError> {
    let link = link_of(cfg)?;
    let target: f64 = cfg.parse("target_ber")?;
    let model = model_of(cfg)?;
    let grid = ebn0_grid(cfg, link.m)?;
    let mut t = Table::new(&["resolution", "ebn0_db", "k_max"]);
    let mut any = false;
    let mut summary = Vec::new();
    for r in cfg.resolutions()? {
        let q = QuantizerSpec::new(r)?;
        let mut best = 0usize;
        for &e in &grid {
            let k = max_users(link.n, &q, link.tau, link.m, target, e, model)?;
            best = best.max(k);
            any |= k > 0;
            t.push(vec![r.to_string().into(), e.into(), k.into()]);
        }
        summary.push(json!({ "resolution": r.to_string(), "k_max_over_grid": best }));
    }
    Ok((t, json!({ "target_ber": target, "limits": summary }), any))
}

fn scenario_power(cfg: &Config) -> Result<(Table, serde_json::Value, bool), CliError> {
    let link = link_of(cfg)?;
    let sweep = PowerSweep {
        n_users: link.k,
        pilot_len: link.tau,
        mod_order: link.m,
        target: cfg.parse("target_ber")?,
        model: model_of(cfg)?,
    };
    let mut power = PowerModel {
        fom: cfg.parse("fom")?,
        sample_rate: cfg.parse("sample_rate")?,
        rf_per_antenna: cfg.parse("rf_per_antenna")?,
        static_power: cfg.parse("static_power")?,
        noise_ref: cfg.parse("noise_ref")?,
    };
    power.validate()?;
    let bits = finite_bits(cfg)?;
    let n_range = cfg.int_range("n_range")?;
    if n_range.iter().any(|&n| n < link.k) {
        return Err(CliError::usage(
            "field `n_range`: every N must be at least n_users",
        ));
    }
    if let Some(n_cal) = cfg.parse_opt::<usize>("calibrate_crossing_n")? {
        let b: u32 = cfg.parse("calibrate_bits")?;
        power.noise_ref = calibrate_noise_ref(&power, &sweep, b, n_cal)?;
    }
    let study = power_optimal_resolution(&power, &sweep, &bits, &n_range)?;
    let mut t = Table::new(&[
        "resolution",
        "n_antennas",
        "ebn0_db",
        "pu",
        "total_power",
        "feasible",
    ]);
    let mut infeasible = Vec::new();
    for c in &study.curves {
        let mut bad = 0usize;
        for p in &c.points {
            bad += p.total_power.is_none() as usize;
            t.push(vec![
                c.bits.to_string().into(),
                p.n_antennas.into(),
                p.ebn0_db.into(),
                p.pu.into(),
                p.total_power.into(),
                p.total_power.is_some().into(),
            ]);
        }
        infeasible.push(json!({ "bits": c.bits, "infeasible_points": bad }));
    }
    let summary = json!({
        "noise_ref": power.noise_ref,
        "power_model": power,
        "optimum": study.optimum.map(|(b, n, p)| json!({ "bits": b, "n_antennas": n, "total_power": p })),
        "crossings": study.crossings,
        "infeasible": infeasible,
    });
    Ok((t, summary, study.optimum.is_some()))
}

/// Runs `command` with a resolved configuration and writes its artifacts.
pub fn execute(
    command: Command,
    cfg: &Config,
    out_dir: &Path,
    format: Format,
) -> Result<Outcome, CliError> {
    let workers = workers_of(cfg)?;
    let seed: u64 = cfg.parse("seed")?;
    let (table, details, any_feasible) = match command {
        Command::Analyze => analyze(cfg)?,
        Command::Simulate => simulate(cfg, workers)?,
        Command::Estimate => estimate(cfg, workers)?,
        Command::Compensate => compensate(cfg)?,
        Command::Scenario(Scenario::Nmin) => scenario_nmin(cfg)?,
        Command::Scenario(Scenario::Kmax) => scenario_kmax(cfg)?,
        Command::Scenario(Scenario::Power) => scenario_power(cfg)?,
    };
    let mut out = OutputSet::new(out_dir);
    out.write(
        &format!("{}.{}", command.stem(), format.ext()),
        format.render(&table).as_bytes(),
    )?;
    if let Command::Scenario(_) = command {
        let mut s = serde_json::to_string_pretty(&details).expect("summary serializes");
        s.push('\n');
        out.write("summary.json", s.as_bytes())?;
    }
    let manifest = out.finish(&command.name(), cfg.resolved(), seed, details)?;
    Ok(Outcome {
        manifest,
        any_feasible,
    })
}
