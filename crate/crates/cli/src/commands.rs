use brownian_marble::analysis::{ks_two_sample, lambda_params, EmpiricalSample};
use brownian_marble::branching::{
    many_to_one_check, simulate_population, ManyToOneConfig, PopulationConfig, TestFunction, DEFAULT_CAP,
};
use brownian_marble::exec::Executor;
use brownian_marble::marble::{extract_bubbles, simulate_marble, BubbleSet, MarbleConfig, MergeRule};
use brownian_marble::rbessel::{endpoint_laws, ladder_sweep, replicate_endpoints};
use brownian_marble::render::{encode_ppm_annotated, marble_svg, render_marble, Viewport};
use brownian_marble::report::LawCheck;
use brownian_marble::stochastics::{tags, RngStream, TimeGrid};
use brownian_marble::vein::{conditioned_bessel_check, replicate_bubbles, uniformity_check, BubbleConfig};
use serde_json::json;

use crate::config::{require, Config};
use crate::error::CliError;
use crate::output::{csv_writer, finish_csv, write_bytes, write_json, Provenance};

pub const BESSEL_KEYS: &[&str] = &["lambda", "n", "rate", "r0", "t", "replicas", "seed", "out", "threshold"];
pub const VEIN_KEYS: &[&str] = &["lambda", "n", "rate", "r0", "t", "x", "dt", "replicas", "seed", "out", "threshold"];
pub const MARBLE_KEYS: &[&str] = &[
    "lambda", "n", "rate", "r0", "t", "dt", "delta", "window", "margin", "seed", "out", "render", "svg", "width",
    "height", "record_every", "merge_rule", "palette_seed",
];
pub const BRANCHING_KEYS: &[&str] = &[
    "lambda", "n", "rate", "r0", "split", "y", "t", "dt", "diffusivity", "replicas", "seed", "out", "cap", "series",
    "threshold",
];
pub const SWEEP_KEYS: &[&str] = &["lambda", "levels", "t", "replicas", "seed", "out", "quantile", "threshold"];

fn replicas(cfg: &mut Config, default: usize) -> Result<usize, CliError> {
    let r = cfg.get("replicas", default)?;
    require(r >= 1, || "replicas must be at least 1".into())?;
    Ok(r)
}

fn positive(cfg: &mut Config, key: &str, default: f64) -> Result<f64, CliError> {
    let v = cfg.get(key, default)?;
    require(v > 0.0 && v.is_finite(), || format!("{key} must be positive, got {v}"))?;
    Ok(v)
}

/// `dt` defaulting to `10⁻³·t`, checked against the thinning bound.
fn step(cfg: &mut Config, t: f64, bound: Option<f64>) -> Result<f64, CliError> {
    let dt = positive(cfg, "dt", 1e-3 * t)?;
    if let Some(m) = bound {
        require(m * dt <= 0.1, || format!("rate bound {m} times dt {dt} exceeds 0.1; reduce dt"))?;
    }
    Ok(dt)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn bessel(mut cfg: Config, exec: Executor) -> Result<bool, CliError> {
    let rate = cfg.rate("truncated", 3.0, 1024.0)?;
    let lambda = rate.lambda().unwrap_or(0.0);
    let t = positive(&mut cfg, "t", 1.0)?;
    let n = replicas(&mut cfg, 10_000)?;
    let seed = cfg.get("seed", 1u64)?;
    let threshold = positive(&mut cfg, "threshold", 0.03)?;
    let dir = cfg.out_dir()?;
    let prov = Provenance::new("bessel", &cfg);

    let samples = replicate_endpoints(&rate, 0.0, t, None, n, seed, exec)?;
    let (mut w, path) = csv_writer(&dir, "bessel.csv", &prov)?;
    w.write_record(["replica", "x_t", "sigma_t", "n_jumps", "max_excursion"])?;
    for (i, s) in samples.iter().enumerate() {
        w.write_record([i.to_string(), s.x_t.to_string(), opt(s.sigma_t), s.n_jumps.to_string(), s.max_excursion.to_string()])?;
    }
    finish_csv(w, &path)?;

    let subcritical = lambda > 0.0 && lambda < 6.0;
    let (report, pass) = if subcritical {
        let laws = endpoint_laws(&samples, lambda, t, threshold)?;
        let pass = laws.birth.pass && laws.height.pass && laws.endpoint.pass;
        (
            json!({
                "lambda": lambda,
                "rate": rate.to_string(),
                "ks_beta": laws.birth.statistic,
                "pass_beta": laws.birth.pass,
                "ks_gamma": laws.height.statistic,
                "pass_gamma": laws.height.pass,
                "ks_endpoint": laws.endpoint.statistic,
                "pass_endpoint": laws.endpoint.pass,
                "checks": laws,
                "pass": pass,
            }),
            pass,
        )
    } else {
        let mean_sq = samples.iter().map(|s| s.x_t * s.x_t).sum::<f64>() / n as f64;
        (
            json!({
                "lambda": lambda,
                "rate": rate.to_string(),
                "mean_x_squared": mean_sq,
                "checks": null,
                "pass": true,
            }),
            true,
        )
    };
    write_json(&dir, "bessel.json", &prov, &report)?;
    Ok(pass)
}

pub fn vein(mut cfg: Config, exec: Executor) -> Result<bool, CliError> {
    let rate = cfg.rate("truncated", 3.0, 1024.0)?;
    let lambda = rate.lambda().unwrap_or(0.0);
    let t = positive(&mut cfg, "t", 1.0)?;
    let x = cfg.get("x", 0.0)?;
    let dt = step(&mut cfg, t, None)?;
    let n = replicas(&mut cfg, 10_000)?;
    let seed = cfg.get("seed", 1u64)?;
    let threshold = positive(&mut cfg, "threshold", 0.03)?;
    require(lambda < 6.0, || format!("the vein needs lambda < 6, got {lambda}"))?;
    let dir = cfg.out_dir()?;
    let prov = Provenance::new("vein", &cfg);

    let bc = BubbleConfig {
        rate: rate.clone(),
        t,
        x,
        dt,
        continuation_horizon: None,
    };
    let samples = replicate_bubbles(&bc, n, seed, exec)?;
    let (mut w, path) = csv_writer(&dir, "vein.csv", &prov)?;
    w.write_record(["replica", "l_t", "c_t", "u_t", "sigma", "n_jumps"])?;
    for (i, s) in samples.iter().enumerate() {
        w.write_record([
            i.to_string(),
            s.l_t.to_string(),
            s.c_t.to_string(),
            s.u_t.to_string(),
            s.sigma.to_string(),
            s.n_jumps.to_string(),
        ])?;
    }
    finish_csv(w, &path)?;

    let triples: Vec<_> = samples.iter().map(|s| (s.l_t, s.c_t, s.u_t)).collect();
    let uni = uniformity_check(&triples)?;
    let uni_pass = uni.ks < 0.033 && uni.correlation.abs() < 0.05;
    let endpoint: LawCheck = conditioned_bessel_check(&samples, lambda, t, threshold)?;
    let pass = uni_pass && endpoint.pass;
    write_json(
        &dir,
        "vein.json",
        &prov,
        &json!({
            "lambda": lambda,
            "rate": rate.to_string(),
            "uniformity": uni,
            "pass_uniformity": uni_pass,
            "endpoint": endpoint,
            "pass": pass,
        }),
    )?;
    Ok(pass)
}

pub fn marble(mut cfg: Config) -> Result<bool, CliError> {
    let rate = cfg.rate("truncated", 3.0, 256.0)?;
    let bound = rate.require_bound()?;
    let t = positive(&mut cfg, "t", 1.0)?;
    let window = cfg.window((0.0, 1.0))?;
    let delta = positive(&mut cfg, "delta", 1e-3)?;
    let dt = positive(&mut cfg, "dt", 100.0 * delta * delta)?;
    require(bound * dt <= 0.1, || format!("rate bound {bound} times dt {dt} exceeds 0.1; reduce dt"))?;
    require(delta <= dt.sqrt(), || format!("delta {delta} exceeds sqrt(dt) = {}", dt.sqrt()))?;
    let seed = cfg.get("seed", 1u64)?;
    let render = cfg.flag("render")?;
    let svg = cfg.flag("svg")?;
    let width = cfg.get("width", 800usize)?;
    let height = cfg.get("height", 400usize)?;
    let merge_rule = match cfg.get("merge_rule", "left".to_owned())?.as_str() {
        "left" => MergeRule::Left,
        "midpoint" => MergeRule::Midpoint,
        other => return Err(CliError::Usage(format!("unknown merge rule {other:?}"))),
    };
    let steps = TimeGrid::with_step(0.0, t, dt)?.n_steps;
    let record_every = cfg.get("record_every", (steps / width.max(1)).max(1))?;
    let palette_seed = cfg.get("palette_seed", seed)?;
    let margin: Option<f64> = cfg.get_opt("margin")?;
    let dir = cfg.out_dir()?;
    let prov = Provenance::new("marble", &cfg);

    let mc = MarbleConfig {
        rate,
        window,
        horizon: t,
        dt,
        delta,
        margin,
        record_every,
        log_events: true,
        track_bubbles: render || svg,
        merge_rule,
    };
    let mut rng = RngStream::derive(seed, tags::MARBLE, 0);
    let trace = simulate_marble(&mc, &mut rng)?;

    let (mut w, path) = csv_writer(&dir, "marble_events.csv", &prov)?;
    w.write_record(["event_kind", "time", "L", "U"])?;
    for e in &trace.events {
        w.write_record([e.kind.as_str().to_owned(), e.time.to_string(), e.lower.to_string(), e.upper.to_string()])?;
    }
    finish_csv(w, &path)?;

    let front = trace.final_front();
    let (mut w, path) = csv_writer(&dir, "marble_front.csv", &prov)?;
    w.write_record(["particle_id", "position", "gap_above_id"])?;
    for (i, (&id, &x)) in front.ids.iter().zip(&front.positions).enumerate() {
        let gap = front.gap_ids.get(i).map(|g| g.to_string()).unwrap_or_default();
        w.write_record([id.to_string(), x.to_string(), gap])?;
    }
    finish_csv(w, &path)?;

    let bubbles = if mc.track_bubbles {
        extract_bubbles(&trace)?
    } else {
        BubbleSet { bubbles: vec![] }
    };
    let vp = Viewport::of(&trace);
    if render {
        let img = render_marble(&trace, &bubbles, vp, (width, height), palette_seed)?;
        write_bytes(&dir.join("marble.ppm"), &encode_ppm_annotated(&img, &prov.lines())?)?;
    }
    if svg {
        let body = marble_svg(&trace, &bubbles, vp, (width, height), palette_seed)?;
        let head: String = prov.lines().iter().map(|l| format!("<!-- {} -->\n", l.replace("--", "- -"))).collect();
        write_bytes(&dir.join("marble.svg"), format!("{head}{body}").as_bytes())?;
    }
    write_json(
        &dir,
        "marble.json",
        &prov,
        &json!({
            "fragmentations": trace.fragmentation_count,
            "coalescences": trace.events.len() as u64 - trace.fragmentation_count,
            "final_particles": front.positions.len(),
            "final_particles_in_window": front.count_in(window.0, window.1),
            "fronts_kept": trace.fronts.len(),
            "bubbles": bubbles.bubbles.len(),
        }),
    )?;
    Ok(true)
}

pub fn branching(mut cfg: Config, exec: Executor) -> Result<bool, CliError> {
    let rate = cfg.rate("constant", 3.0, 16.0)?;
    let bound = rate.require_bound()?;
    let n_split = cfg.get("split", 2u32)?;
    require(n_split >= 2, || format!("split must be at least 2, got {n_split}"))?;
    let y = positive(&mut cfg, "y", 1.0)?;
    let t = positive(&mut cfg, "t", 1.0)?;
    let dt = step(&mut cfg, t, Some(bound))?;
    let diffusivity = positive(&mut cfg, "diffusivity", 2.0)?;
    let n = replicas(&mut cfg, 10_000)?;
    let seed = cfg.get("seed", 1u64)?;
    let cap = cfg.get("cap", DEFAULT_CAP)?;
    let series = cfg.get("series", 10usize)?.min(n);
    let threshold = positive(&mut cfg, "threshold", 0.03)?;
    let dir = cfg.out_dir()?;
    let prov = Provenance::new("branching", &cfg);

    let grid = TimeGrid::with_step(0.0, t, dt)?;
    let every = (grid.n_steps / 100).max(1);
    let pop = PopulationConfig {
        rate: rate.clone(),
        n_split,
        diffusivity,
        cap,
        record_states: false,
    };
    let runs = exec.try_map(series, |i| {
        let mut rng = RngStream::derive(seed, tags::POPULATION, i as u64);
        simulate_population(&pop, &[y], &grid, &mut rng)
    })?;
    let (mut w, path) = csv_writer(&dir, "branching.csv", &prov)?;
    w.write_record(["replica", "time", "n_alive", "total_mass"])?;
    for (i, tr) in runs.iter().enumerate() {
        for k in (0..tr.n_alive.len()).filter(|k| k % every == 0 || k + 1 == tr.n_alive.len()) {
            w.write_record([i.to_string(), grid.time(k).to_string(), tr.n_alive[k].to_string(), tr.total_mass[k].to_string()])?;
        }
    }
    finish_csv(w, &path)?;

    let check = |f| {
        many_to_one_check(
            &ManyToOneConfig {
                rate: rate.clone(),
                n_split,
                y,
                t,
                dt,
                diffusivity,
                f,
                replicas: n,
                cap,
            },
            seed,
            exec,
        )
    };
    let m2o = check(TestFunction::XExpNegX)?;
    let mass = check(TestFunction::Identity)?;
    let mass_ok = (mass.lhs - y).abs() < 3.0 * mass.lhs_stderr.max(f64::MIN_POSITIVE);
    let pass = m2o.relative_difference < threshold && mass_ok;
    write_json(
        &dir,
        "branching.json",
        &prov,
        &json!({
            "many_to_one": m2o,
            "mass": mass,
            "pass_many_to_one": m2o.relative_difference < threshold,
            "pass_mass": mass_ok,
            "pass": pass,
        }),
    )?;
    if !m2o.valid || !mass.valid {
        return Err(CliError::Abort(format!(
            "population cap {cap} hit in {} of {n} runs",
            m2o.capped_runs.max(mass.capped_runs)
        )));
    }
    Ok(pass)
}

pub fn sweep(mut cfg: Config, exec: Executor) -> Result<bool, CliError> {
    let lambda = cfg.get("lambda", 8.0)?;
    lambda_params(lambda)?;
    let levels = cfg.list("levels", "64,256,1024,4096")?;
    require(levels.len() >= 2 && levels.windows(2).all(|w| w[0] < w[1]), || {
        "levels must be at least two increasing truncations".into()
    })?;
    let t = positive(&mut cfg, "t", 1.0)?;
    let n = replicas(&mut cfg, 10_000)?;
    let seed = cfg.get("seed", 1u64)?;
    let quantile = cfg.get("quantile", 0.9)?;
    let threshold = positive(&mut cfg, "threshold", 0.03)?;
    let dir = cfg.out_dir()?;
    let prov = Provenance::new("sweep", &cfg);

    let sweep = ladder_sweep(lambda, &levels, t, n, quantile, seed, exec)?;
    let (mut w, path) = csv_writer(&dir, "sweep.csv", &prov)?;
    w.write_record(["level", "replica", "x_t", "max_excursion"])?;
    for l in &sweep.levels {
        for (i, (x, e)) in l.x.iter().zip(&l.max_excursion).enumerate() {
            w.write_record([l.n.to_string(), i.to_string(), x.to_string(), e.to_string()])?;
        }
    }
    finish_csv(w, &path)?;

    let k = sweep.levels.len();
    let ks = ks_two_sample(
        &EmpiricalSample::from_values(sweep.levels[k - 2].x.clone())?,
        &EmpiricalSample::from_values(sweep.levels[k - 1].x.clone())?,
    );
    let (medians, quantiles) = (sweep.medians_decreasing(), sweep.quantiles_decreasing());
    let pass = if lambda >= 6.0 { medians && quantiles } else { ks < threshold };
    let per_level: Vec<_> = sweep
        .levels
        .iter()
        .map(|l| json!({ "n": l.n, "median_x": l.median_x, "max_excursion_quantile": l.max_excursion_quantile }))
        .collect();
    write_json(
        &dir,
        "sweep.json",
        &prov,
        &json!({
            "lambda": lambda,
            "quantile": quantile,
            "levels": per_level,
            "medians_decreasing": medians,
            "quantiles_decreasing": quantiles,
            "last_two_levels_ks": ks,
            "pass": pass,
        }),
    )?;
    Ok(pass)
}
