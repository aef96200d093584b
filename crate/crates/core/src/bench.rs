//! Experiment sweeps comparing the update solver against a from-scratch HBS
//! solver on the perturbed curve, with CSV, text and SVG output.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::shapes::{self, Family};
use crate::geometry::Scenario;
use crate::hbs::{self, HbsOptions, DEFAULT_LEAF_SIZE};
use crate::kernel::{Cross, KernelBlock};
use crate::oracle::{self, TestProblem, DENSE_CAP};
use crate::update::{self, UpdateOptions};

/// Accuracy contract on `E`.
pub const E_THRESHOLD: f64 = 1e-8;
/// Largest `A_kc` (in entries) whose SVD is computed for `k_opt`.
pub const KOPT_ENTRY_CAP: usize = 1 << 25;
/// Minimum timed repetitions of a solve phase.
pub const SOLVE_REPETITIONS: usize = 10;
/// Nodes per panel of the star refinement: `N_p = 48 * 2^level`.
const STAR_NP_UNIT: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    NoseThinning,
    NoseFixed,
    BumpShrinking,
    BumpFixed,
    StarRefine,
    /// Nothing cut or added; `r_s` should sit near 1.
    Identity,
}

/// Which size a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    NOriginal,
    NAdded,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::NOriginal => "N_o",
            Axis::NAdded => "N_p",
        }
    }

    pub fn of(self, row: &ExperimentRow) -> usize {
        match self {
            Axis::NOriginal => row.n_o,
            Axis::NAdded => row.n_p,
        }
    }
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::NoseThinning,
        Experiment::NoseFixed,
        Experiment::BumpShrinking,
        Experiment::BumpFixed,
        Experiment::StarRefine,
        Experiment::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::NoseThinning => "nose-thinning",
            Experiment::NoseFixed => "nose-fixed",
            Experiment::BumpShrinking => "bump-shrinking",
            Experiment::BumpFixed => "bump-fixed",
            Experiment::StarRefine => "star-refine",
            Experiment::Identity => "identity",
        }
    }

    pub fn axis(self) -> Axis {
        match self {
            Experiment::StarRefine => Axis::NAdded,
            _ => Axis::NOriginal,
        }
    }

    /// Sweep values: `N_o` for most experiments, `N_p` for star-refine.
    pub fn default_sweep(self) -> Vec<usize> {
        match self {
            Experiment::StarRefine => (1..=6).map(|l| STAR_NP_UNIT << l).collect(),
            _ => vec![2000, 4000, 8000, 16000, 32000],
        }
    }

    /// Geometry for one sweep value.
    pub fn scenario(self, n: usize) -> Result<Scenario> {
        match self {
            Experiment::NoseThinning => shapes::square_with_nose(n, Family::Shrinking),
            Experiment::NoseFixed => shapes::square_with_nose(n, Family::Fixed),
            Experiment::BumpShrinking => shapes::circle_with_bump(n, Family::Shrinking),
            Experiment::BumpFixed => shapes::circle_with_bump(n, Family::Fixed),
            Experiment::Identity => shapes::circle_identity(n),
            Experiment::StarRefine => {
                let level = (n / STAR_NP_UNIT).trailing_zeros();
                if n == 0 || n != STAR_NP_UNIT << level {
                    return Err(Error::InvalidArgument(format!(
                        "star-refine sweeps N_p = {STAR_NP_UNIT} * 2^level, got {n}"
                    )));
                }
                shapes::star_with_refined_panels(level)
            }
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                Error::InvalidArgument(format!("unknown experiment {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub sweep: Vec<usize>,
    pub eps: f64,
    /// Seed of the random charge strengths.
    pub seed: u64,
    pub leaf_size: usize,
    /// Timed repetitions per phase after one discarded warmup; at least 3.
    pub repetitions: usize,
    /// Adds the dense extended-system comparison where `N_ext <= dense_cap`.
    pub dense_oracle: bool,
    pub dense_cap: usize,
    pub e_threshold: f64,
    /// Runs sweep points on separate threads; timings then share the machine.
    pub parallel: bool,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            sweep: experiment.default_sweep(),
            eps: 1e-10,
            seed: 1,
            leaf_size: DEFAULT_LEAF_SIZE,
            repetitions: 3,
            dense_oracle: false,
            dense_cap: DENSE_CAP,
            e_threshold: E_THRESHOLD,
            parallel: false,
        }
    }

    /// Parses `key = value` lines; `#` starts a comment. `experiment` is
    /// required and every other key defaults as in [`ExperimentConfig::new`].
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Config {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut pairs = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(no + 1, format!("expected `key = value`, found {line:?}")))?;
            pairs.push((no + 1, key.trim(), value.trim()));
        }
        let (_, _, name) = pairs
            .iter()
            .find(|p| p.1 == "experiment")
            .ok_or_else(|| err(0, "missing `experiment`".into()))?;
        let experiment = name.parse().map_err(|e: Error| {
            let line = pairs.iter().find(|p| p.1 == "experiment").map_or(0, |p| p.0);
            err(line, e.to_string())
        })?;
        let mut cfg = Self::new(experiment);
        let mut seen = Vec::new();
        for (line, key, value) in pairs {
            if seen.contains(&key) {
                return Err(err(line, format!("duplicate key `{key}`")));
            }
            seen.push(key);
            cfg.set(key, value).map_err(|m| err(line, m))?;
        }
        cfg.validate().map_err(|e| err(0, e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("`{key}`: cannot parse {v:?}"))
        }
        match key {
            "experiment" => self.experiment = value.parse().map_err(|e: Error| e.to_string())?,
            "sweep" => {
                self.sweep = value
                    .split(',')
                    .map(|v| num(key, v.trim()))
                    .collect::<std::result::Result<_, _>>()?
            }
            "eps" => self.eps = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "leaf_size" => self.leaf_size = num(key, value)?,
            "repetitions" => self.repetitions = num(key, value)?,
            "dense_oracle" => self.dense_oracle = num(key, value)?,
            "dense_cap" => self.dense_cap = num(key, value)?,
            "e_threshold" => self.e_threshold = num(key, value)?,
            "parallel" => self.parallel = num(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidTolerance(self.eps));
        }
        if self.sweep.is_empty() {
            return Err(Error::InvalidArgument("empty sweep".into()));
        }
        if self.repetitions < 3 {
            return Err(Error::InvalidArgument(format!(
                "{} repetitions; timings need at least 3",
                self.repetitions
            )));
        }
        Ok(())
    }

    fn hbs_options(&self) -> HbsOptions {
        HbsOptions {
            eps: self.eps,
            leaf_size: self.leaf_size,
        }
    }
}

/// One sweep point. Times are in seconds; `k`, `k0` and `k_opt` describe `A_kc`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub geometry: String,
    #[serde(rename = "N_o")]
    pub n_o: usize,
    #[serde(rename = "N_p")]
    pub n_p: usize,
    #[serde(rename = "N_c")]
    pub n_c: usize,
    #[serde(rename = "T_new_p")]
    pub t_new_p: f64,
    #[serde(rename = "T_hbs_p")]
    pub t_hbs_p: f64,
    pub r_p: f64,
    #[serde(rename = "T_new_s")]
    pub t_new_s: f64,
    #[serde(rename = "T_hbs_s")]
    pub t_hbs_s: f64,
    pub r_s: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub k: usize,
    pub k0: usize,
    pub k_opt: Option<usize>,
    /// Solves after which the update solver has paid for itself.
    pub break_even: Option<f64>,
    /// Rank of the whole update `Q`.
    pub k_total: usize,
    /// Relative difference to the dense extended solve, when formed.
    pub oracle_difference: Option<f64>,
}

impl ExperimentRow {
    pub const HEADER: [&'static str; 17] = [
        "geometry",
        "N_o",
        "N_p",
        "N_c",
        "T_new_p",
        "T_hbs_p",
        "r_p",
        "T_new_s",
        "T_hbs_s",
        "r_s",
        "E",
        "k",
        "k0",
        "k_opt",
        "break_even",
        "k_total",
        "oracle_difference",
    ];

    pub fn axis(&self) -> Axis {
        match self.geometry.parse::<Experiment>() {
            Ok(e) => e.axis(),
            Err(_) => Axis::NOriginal,
        }
    }
}

/// `(T_hbs_p - T_new_p) / (T_new_s - T_hbs_s)` when both differences are positive.
pub fn break_even(t_new_p: f64, t_hbs_p: f64, t_new_s: f64, t_hbs_s: f64) -> Option<f64> {
    let (gain, loss) = (t_hbs_p - t_new_p, t_new_s - t_hbs_s);
    (gain > 0.0 && loss > 0.0).then(|| gain / loss)
}

/// Minimum over `reps` timed calls after one warmup; returns the last value.
/// Each previous value is dropped before the next call, so at most one is alive.
fn time_min<T>(reps: usize, mut f: impl FnMut() -> Result<T>) -> Result<(f64, T)> {
    let mut value = Some(f()?);
    let mut best = f64::INFINITY;
    for _ in 0..reps {
        drop(value.take());
        let start = Instant::now();
        let v = f()?;
        best = best.min(start.elapsed().as_secs_f64());
        value = Some(v);
    }
    Ok((best, value.expect("at least the warmup value")))
}

/// Solves take milliseconds, so a single scheduler hiccup dominates a short
/// series; they get more repetitions than the precomputations.
fn solve_reps(cfg: &ExperimentConfig) -> usize {
    cfg.repetitions.max(SOLVE_REPETITIONS)
}

/// Runs one sweep point.
pub fn run_point(cfg: &ExperimentConfig, n: usize) -> Result<ExperimentRow> {
    let scenario = cfg.experiment.scenario(n)?;
    let pg = &scenario.geometry;
    let perturbed = pg.perturbed();
    let problem = TestProblem::new(&scenario, cfg.seed)?;
    let f = problem.boundary_data(&perturbed.nodes);
    let (f_k, f_p) = pg.split_boundary_data(&f)?;

    // Reused precomputation, not timed.
    let base = hbs::invert(&hbs::compress(&pg.original, cfg.hbs_options())?)?;

    let (t_hbs_p, scratch) = time_min(cfg.repetitions, || hbs::invert(&hbs::compress(&perturbed, cfg.hbs_options())?))?;
    let (t_hbs_s, _) = time_min(solve_reps(cfg), || scratch.solve_vec(&f))?;
    drop(scratch);

    let opts = UpdateOptions {
        eps: cfg.eps,
        leaf_size: cfg.leaf_size,
        ..UpdateOptions::default()
    };
    let (t_new_p, solver) = time_min(cfg.repetitions, || {
        let factors = update::factor_update(&base.rep, pg, opts)?;
        update::build_perturbed_solver(&base, update::a_pp(pg).as_ref(), factors)
    })?;
    let (t_new_s, x) = time_min(solve_reps(cfg), || {
        let f_ext = update::assemble_extended_rhs(pg, &f_k, &f_p)?;
        update::solve_perturbed(&solver, &f_ext)
    })?;
    let e = problem.error(&perturbed, &pg.perturbed_density(&x.x))?;

    let kc = &solver.factors.kc;
    let k_opt = if pg.kept.len() * pg.cut.len() <= KOPT_ENTRY_CAP && !pg.cut.is_empty() {
        let (kd, cd) = (pg.original.subset(&pg.kept), pg.original.subset(&pg.cut));
        Some(oracle::svd_rank(&Cross::new(&kd, &cd)?.dense(), cfg.eps)?)
    } else {
        None
    };
    let oracle_difference = if cfg.dense_oracle && pg.n_extended() <= cfg.dense_cap {
        let f_ext = update::assemble_extended_rhs(pg, &f_k, &f_p)?;
        let (xd, _) = oracle::dense_extended_solve(pg, &f_ext, cfg.dense_cap)?;
        Some(oracle::relative_error(&xd, &x.x)?)
    } else {
        None
    };

    Ok(ExperimentRow {
        geometry: cfg.experiment.name().into(),
        n_o: pg.n_original(),
        n_p: pg.n_added(),
        n_c: pg.cut.len(),
        t_new_p,
        t_hbs_p,
        r_p: t_new_p / t_hbs_p,
        t_new_s,
        t_hbs_s,
        r_s: t_new_s / t_hbs_s,
        e,
        k: kc.rank(),
        k0: kc.k0,
        k_opt,
        break_even: break_even(t_new_p, t_hbs_p, t_new_s, t_hbs_s),
        k_total: solver.rank(),
        oracle_difference,
    })
}

/// Runs the whole sweep, in sweep order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    if !cfg.parallel {
        return cfg.sweep.iter().map(|&n| run_point(cfg, n)).collect();
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = cfg.sweep.iter().map(|&n| s.spawn(move || run_point(cfg, n))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::InvalidArgument("sweep thread panicked".into()))))
            .collect()
    })
}

/// Rows whose `E` exceeds `threshold`.
pub fn accuracy_violations(rows: &[ExperimentRow], threshold: f64) -> Vec<&ExperimentRow> {
    rows.iter().filter(|r| !(r.e <= threshold)).collect()
}

/// Writes the header and one line per row; an empty slice gives a header-only file.
pub fn write_csv<W: Write>(rows: &[ExperimentRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(ExperimentRow::HEADER).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ExperimentRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers().map_err(csv_error)?.iter().map(String::from).collect();
    if header != ExperimentRow::HEADER {
        return Err(Error::Format(format!("unexpected header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Format(format!("{other:?}")),
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(format!("{} x and {} y values", x.len(), y.len())));
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument("log-log fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all sweep sizes are equal".into()));
    }
    Ok(sxy / sxx)
}

/// Slopes of each timed column against the sweep axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingFit {
    pub axis: Axis,
    pub t_new_p: f64,
    pub t_hbs_p: f64,
    pub t_new_s: f64,
    pub t_hbs_s: f64,
    /// `T_new_p` slope over the last three points only.
    pub t_new_p_top: f64,
    pub t_new_s_top: f64,
}

impl ScalingFit {
    pub fn columns(&self) -> [(&'static str, f64); 6] {
        [
            ("T_new_p", self.t_new_p),
            ("T_hbs_p", self.t_hbs_p),
            ("T_new_s", self.t_new_s),
            ("T_hbs_s", self.t_hbs_s),
            ("T_new_p (top 3)", self.t_new_p_top),
            ("T_new_s (top 3)", self.t_new_s_top),
        ]
    }
}

pub fn fit_scaling(rows: &[ExperimentRow]) -> Result<ScalingFit> {
    if rows.len() < 4 {
        return Err(Error::InvalidArgument(format!("{} rows; a scaling fit needs at least 4", rows.len())));
    }
    let axis = rows[0].axis();
    let x: Vec<f64> = rows.iter().map(|r| axis.of(r) as f64).collect();
    let col = |f: fn(&ExperimentRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let top = x.len() - 3;
    let (new_p, new_s) = (col(|r| r.t_new_p), col(|r| r.t_new_s));
    Ok(ScalingFit {
        axis,
        t_new_p: loglog_slope(&x, &new_p)?,
        t_hbs_p: loglog_slope(&x, &col(|r| r.t_hbs_p))?,
        t_new_s: loglog_slope(&x, &new_s)?,
        t_hbs_s: loglog_slope(&x, &col(|r| r.t_hbs_s))?,
        t_new_p_top: loglog_slope(&x[top..], &new_p[top..])?,
        t_new_s_top: loglog_slope(&x[top..], &new_s[top..])?,
    })
}

/// Aligned text table of the rows.
pub fn format_table(rows: &[ExperimentRow]) -> String {
    let opt_n = |v: Option<usize>| v.map_or("-".into(), |x| x.to_string());
    let opt_f = |v: Option<f64>| v.map_or("-".into(), |x| format!("{x:.1}"));
    let mut out = format!(
        "{:<15} {:>6} {:>5} {:>5} {:>9} {:>9} {:>6} {:>9} {:>9} {:>6} {:>9} {:>4} {:>5} {:>5} {:>8}\n",
        "geometry", "N_o", "N_p", "N_c", "T_new_p", "T_hbs_p", "r_p", "T_new_s", "T_hbs_s", "r_s", "E", "k", "k0", "k_opt",
        "break"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<15} {:>6} {:>5} {:>5} {:>9.3e} {:>9.3e} {:>6.3} {:>9.3e} {:>9.3e} {:>6.3} {:>9.2e} {:>4} {:>5} {:>5} {:>8}",
            r.geometry,
            r.n_o,
            r.n_p,
            r.n_c,
            r.t_new_p,
            r.t_hbs_p,
            r.r_p,
            r.t_new_s,
            r.t_hbs_s,
            r.r_s,
            r.e,
            r.k,
            r.k0,
            opt_n(r.k_opt),
            opt_f(r.break_even)
        );
    }
    out
}

pub fn format_fit(fit: &ScalingFit) -> String {
    let mut out = format!("log-log slopes against {}:\n", fit.axis.label());
    for (name, s) in fit.columns() {
        let _ = writeln!(out, "  {name:<16} {s:.3}");
    }
    out
}

/// Log-log plot of the four timed columns with a slope-1 reference line.
pub fn plot_svg(rows: &[ExperimentRow], title: &str) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("nothing to plot".into()));
    }
    let axis = rows[0].axis();
    let series: [(&str, &str, fn(&ExperimentRow) -> f64); 4] = [
        ("T_new_p", "#1f77b4", |r| r.t_new_p),
        ("T_hbs_p", "#d62728", |r| r.t_hbs_p),
        ("T_new_s", "#2ca02c", |r| r.t_new_s),
        ("T_hbs_s", "#ff7f0e", |r| r.t_hbs_s),
    ];
    let xs: Vec<f64> = rows.iter().map(|r| (axis.of(r) as f64).log10()).collect();
    let ys: Vec<f64> = rows
        .iter()
        .flat_map(|r| series.iter().map(move |s| s.2(r)))
        .filter(|v| *v > 0.0)
        .map(f64::log10)
        .collect();
    let bounds = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min).floor();
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil();
        (lo, if hi > lo { hi } else { lo + 1.0 })
    };
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys);
    let (w, h, m) = (640.0, 480.0, 60.0);
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    let _ = writeln!(svg, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(svg, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\">{title}</text>", w / 2.0);
    let _ = writeln!(
        svg,
        "<polyline fill=\"none\" stroke=\"black\" points=\"{},{} {},{} {},{}\"/>",
        px(x0),
        py(y1),
        px(x0),
        py(y0),
        px(x1),
        py(y0)
    );
    for d in x0 as i32..=x1 as i32 {
        let x = px(d as f64);
        let _ = writeln!(svg, "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">1e{d}</text>", h - m + 18.0);
    }
    for d in y0 as i32..=y1 as i32 {
        let y = py(d as f64);
        let _ = writeln!(svg, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">1e{d}</text>", m - 6.0, y + 4.0);
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        w / 2.0,
        h - 12.0,
        axis.label()
    );
    let _ = writeln!(svg, "<text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">seconds</text>", h / 2.0, h / 2.0);

    // Slope-1 reference through the first T_hbs_p point.
    let anchor = rows[0].t_hbs_p.log10();
    let (ra, rb) = (anchor, anchor + (xs[xs.len() - 1] - xs[0]));
    let _ = writeln!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>",
        px(xs[0]),
        py(ra),
        px(xs[xs.len() - 1]),
        py(rb)
    );
    for (i, (name, color, f)) in series.iter().enumerate() {
        let pts: Vec<String> = rows
            .iter()
            .zip(&xs)
            .filter(|(r, _)| f(r) > 0.0)
            .map(|(r, &x)| format!("{:.1},{:.1}", px(x), py(f(r).log10())))
            .collect();
        let _ = writeln!(svg, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>", pts.join(" "));
        let ly = m + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/><text x=\"{}\" y=\"{}\">{name}</text>",
            m + 10.0,
            m + 30.0,
            m + 36.0,
            ly + 4.0
        );
    }
    let ly = m + 16.0 * series.len() as f64;
    let _ = writeln!(
        svg,
        "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"gray\" stroke-dasharray=\"6,4\"/><text x=\"{}\" y=\"{}\">slope 1</text>",
        m + 10.0,
        m + 30.0,
        m + 36.0,
        ly + 4.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Output paths of one experiment under `dir`.
pub fn output_path(dir: &Path, experiment: &str, ext: &str) -> PathBuf {
    dir.join(format!("{experiment}.{ext}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize, t: f64) -> ExperimentRow {
        ExperimentRow {
            geometry: "bump-shrinking".into(),
            n_o: n,
            n_p: 224,
            n_c: 192,
            t_new_p: t,
            t_hbs_p: 2.0 * t,
            r_p: 0.5,
            t_new_s: t,
            t_hbs_s: t,
            r_s: 1.0,
            e: 1e-10,
            k: 17,
            k0: 100,
            k_opt: None,
            break_even: Some(3.5),
            k_total: 300,
            oracle_difference: None,
        }
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!("bump".parse::<Experiment>().is_err());
    }

    #[test]
    fn config_parses_and_reports_lines() {
        let cfg = ExperimentConfig::parse(
            "# sweep\nexperiment = nose-fixed\nsweep = 2000, 4000\n\neps = 1e-8 # looser\nseed=9\n",
            Path::new("c.cfg"),
        )
        .unwrap();
        assert_eq!(cfg.experiment, Experiment::NoseFixed);
        assert_eq!(cfg.sweep, vec![2000, 4000]);
        assert_eq!((cfg.eps, cfg.seed), (1e-8, 9));

        let bad = |text: &str| match ExperimentConfig::parse(text, Path::new("c.cfg")) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("expected a config error, got {other:?}"),
        };
        assert_eq!(bad("experiment = identity\n\nsweep = 10, x\n"), 3);
        assert_eq!(bad("experiment = identity\nfoo = 1\n"), 2);
        assert_eq!(bad("experiment = identity\njust words\n"), 2);
        assert_eq!(bad("eps = 1e-10\n"), 0);
        assert_eq!(bad("experiment = disc\n"), 1);
        assert_eq!(bad("experiment = identity\nseed = 1\nseed = 2\n"), 3);
    }

    #[test]
    fn csv_header_matches_field_order() {
        let mut with_header = csv::Writer::from_writer(Vec::new());
        with_header.serialize(row(2000, 1.0)).unwrap();
        let text = String::from_utf8(with_header.into_inner().unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), ExperimentRow::HEADER.join(","));

        let mut out = Vec::new();
        write_csv(&[], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().trim_end(), ExperimentRow::HEADER.join(","));
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![row(2000, 0.5), row(4000, 1.0)];
        let mut out = Vec::new();
        write_csv(&rows, &mut out).unwrap();
        assert_eq!(read_csv(out.as_slice()).unwrap(), rows);
    }

    #[test]
    fn exact_power_laws_fit_exactly() {
        let rows: Vec<ExperimentRow> = [2000, 4000, 8000, 16000, 32000].iter().map(|&n| row(n, 3e-5 * n as f64)).collect();
        let fit = fit_scaling(&rows).unwrap();
        for (_, s) in fit.columns() {
            assert!((s - 1.0).abs() < 1e-6, "{s}");
        }
        assert!(fit_scaling(&rows[..3]).is_err());
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 5.0 * v.powf(1.5)).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn break_even_needs_a_tradeoff() {
        assert_eq!(break_even(1.0, 3.0, 0.2, 0.1), Some(2.0 / 0.1));
        assert_eq!(break_even(3.0, 1.0, 0.2, 0.1), None);
        assert_eq!(break_even(1.0, 3.0, 0.1, 0.2), None);
    }

    #[test]
    fn svg_has_every_series() {
        let rows: Vec<ExperimentRow> = [2000, 4000, 8000].iter().map(|&n| row(n, 1e-4 * n as f64)).collect();
        let svg = plot_svg(&rows, "bump").unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 5);
        assert!(svg.contains("slope 1"));
        assert!(plot_svg(&[], "x").is_err());
    }

    #[test]
    fn star_sweep_values_are_checked() {
        assert!(Experiment::StarRefine.scenario(100).is_err());
        assert_eq!(Experiment::StarRefine.scenario(96).unwrap().geometry.n_added(), 96);
    }
}
