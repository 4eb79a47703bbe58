//! Experiment suites writing CSV tables and matching plot scripts.
//!
//! Cells `(N, method)` run on a rayon pool whose size can be capped with
//! `HMGN_THREADS`; rows always come out in `(N, method)` order. Timing cells
//! run one at a time so they do not compete for cores.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::bench::generate::{add_noise, apply_gaps, Preset};
use crate::bench::io::WeightArg;
use crate::bench::known_minimum::{build_known_minimum, KnownMinimumProblem};
use crate::error::{Error, Result};
use crate::nullspace::EvalMode;
use crate::projection::{project_gamma, project_onto_glrr_space};
use crate::series::{normalize_glrr, TimeSeries};
use crate::solvers::{fit, glrr_relative_residual, mgn_step, vpgn_step, FitResult, Method, SolverConfig};
use crate::weights::{mask_missing, norm, WeightSpec};

/// Largest `N` accepted unless large runs are allowed explicitly.
pub const N_CEILING: usize = 10_000;
/// Offset of the start from `a*` in the known-minimum runs.
pub const START_OFFSET: f64 = 1e-6;
/// Gaps of the 50-point example, 1-based inclusive.
pub const ISHTEVA50_GAPS: [(usize, usize); 2] = [(10, 19), (35, 39)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    KnownMinimumAccuracy,
    ResidualVsN,
    IterationTiming,
    GappedFit,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::KnownMinimumAccuracy => "known_minimum_accuracy",
            ExperimentKind::ResidualVsN => "residual_vs_N",
            ExperimentKind::IterationTiming => "iteration_timing",
            ExperimentKind::GappedFit => "gapped_fit",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            ExperimentKind::KnownMinimumAccuracy,
            ExperimentKind::ResidualVsN,
            ExperimentKind::IterationTiming,
            ExperimentKind::GappedFit,
        ]
        .into_iter()
        .find(|k| k.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| Error::Parse(format!("unknown experiment kind '{s}'")))
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub n_list: Vec<usize>,
    pub methods: Vec<Method>,
    pub weights: WeightArg,
    pub seed: u64,
    pub allow_large: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods given".into()));
        }
        if self.kind == ExperimentKind::GappedFit {
            return Ok(());
        }
        if self.n_list.is_empty() {
            return Err(Error::InvalidArgument("empty N list".into()));
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("N list must be strictly increasing".into()));
        }
        if self.n_list[0] < 13 {
            return Err(Error::SeriesTooShort {
                needed: 13,
                len: self.n_list[0],
            });
        }
        let top = *self.n_list.last().unwrap();
        if top > N_CEILING && !self.allow_large {
            return Err(Error::InvalidArgument(format!(
                "N = {top} exceeds {N_CEILING}; pass --allow-large to run it"
            )));
        }
        Ok(())
    }
}

/// Parses `20,100,1000`.
pub fn parse_n_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad N '{t}'")))
        })
        .collect()
}

pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Method::ALL.to_vec());
    }
    s.split(',').map(|t| t.trim().parse()).collect()
}

fn pool() -> rayon::ThreadPool {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(k) = std::env::var("HMGN_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if k > 0 {
            b = b.num_threads(k);
        }
    }
    b.build().expect("thread pool")
}

fn cells(n_list: &[usize], methods: &[Method]) -> Vec<(usize, Method)> {
    n_list
        .iter()
        .flat_map(|&n| methods.iter().map(move |&m| (n, m)))
        .collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}

#[derive(Debug, Clone)]
pub struct AccuracyRow {
    pub n: usize,
    pub method: Method,
    pub outcome: std::result::Result<AccuracyOutcome, String>,
}

#[derive(Debug, Clone)]
pub struct AccuracyOutcome {
    /// `‖S̃ - Y*‖`.
    pub distance: f64,
    pub rel_residual: f64,
    /// `‖X - S̃‖ - ‖X - Y*‖`.
    pub obj_gap: f64,
    pub fit: FitResult,
}

/// One known-minimum run started at `a* + START_OFFSET · 1`.
pub fn known_minimum_run(p: &KnownMinimumProblem, method: Method) -> Result<AccuracyOutcome> {
    let n = p.x.len();
    let w = WeightSpec::identity(n);
    let f = fit(&p.x, 3, &w, &SolverConfig::new(method), Some(&p.start(START_OFFSET)))?;
    let x = p.x.values();
    Ok(AccuracyOutcome {
        distance: dist(&f.signal, p.y_star.values()),
        rel_residual: glrr_relative_residual(&f.glrr, &f.signal)?,
        obj_gap: dist(x, &f.signal) - dist(x, p.y_star.values()),
        fit: f,
    })
}

pub fn known_minimum_accuracy(n_list: &[usize], methods: &[Method]) -> Vec<AccuracyRow> {
    let todo = cells(n_list, methods);
    pool().install(|| {
        todo.par_iter()
            .map(|&(n, method)| AccuracyRow {
                n,
                method,
                outcome: build_known_minimum(n)
                    .and_then(|p| known_minimum_run(&p, method))
                    .map_err(|e| e.to_string()),
            })
            .collect()
    })
}

#[derive(Debug, Clone)]
pub struct ProjectionRow {
    pub n: usize,
    pub method: Method,
    /// `(‖Q^T(a*) S‖ / ‖a*‖, ‖S - Y*‖)` for `S = Π_{Z(a*)} X`.
    pub outcome: std::result::Result<(f64, f64), String>,
}

/// Projection of the known-minimum series onto `Z(a*)` through each
/// method's projection route.
pub fn residual_vs_n(n_list: &[usize], methods: &[Method]) -> Vec<ProjectionRow> {
    let todo = cells(n_list, methods);
    pool().install(|| {
        todo.par_iter()
            .map(|&(n, method)| {
                let run = || -> Result<(f64, f64)> {
                    let p = build_known_minimum(n)?;
                    let w = WeightSpec::identity(n);
                    let x = p.x.values();
                    let s = match method {
                        Method::Mgn => project_onto_glrr_space(&p.a_star, &w, x, EvalMode::Plain)?.projected,
                        Method::SMgn | Method::SVpgn => {
                            project_onto_glrr_space(&p.a_star, &w, x, EvalMode::Compensated)?.projected
                        }
                        Method::Vpgn => project_gamma(&p.a_star, &w, x)?,
                    };
                    Ok((glrr_relative_residual(&p.a_star, &s)?, dist(&s, p.y_star.values())))
                };
                ProjectionRow {
                    n,
                    method,
                    outcome: run().map_err(|e| e.to_string()),
                }
            })
            .collect()
    })
}

#[derive(Debug, Clone)]
pub struct TimingRow {
    pub n: usize,
    pub method: Method,
    /// Median seconds of one direction computation.
    pub outcome: std::result::Result<f64, String>,
}

/// Median wall time of one Gauss-Newton direction (projection included).
pub fn time_step(p: &KnownMinimumProblem, method: Method, w: &WeightSpec, min_reps: usize) -> Result<f64> {
    let nz = normalize_glrr(&p.start(START_OFFSET));
    let x = p.x.values();
    let once = || -> Result<()> {
        match method {
            Method::Mgn => mgn_step(&nz.adot, nz.tau, x, w, EvalMode::Plain).map(|_| ()),
            Method::SMgn => mgn_step(&nz.adot, nz.tau, x, w, EvalMode::Compensated).map(|_| ()),
            Method::Vpgn => vpgn_step(&nz.adot, nz.tau, x, w, false).map(|_| ()),
            Method::SVpgn => vpgn_step(&nz.adot, nz.tau, x, w, true).map(|_| ()),
        }
    };
    once()?;
    let mut times = Vec::new();
    let start = Instant::now();
    while times.len() < min_reps || (start.elapsed().as_secs_f64() < 0.2 && times.len() < 200) {
        let t = Instant::now();
        once()?;
        times.push(t.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

pub fn iteration_timing(n_list: &[usize], methods: &[Method], weights: &WeightArg) -> Vec<TimingRow> {
    cells(n_list, methods)
        .into_iter()
        .map(|(n, method)| {
            let run = || -> Result<f64> {
                let p = build_known_minimum(n)?;
                let w = weights.build(n, &vec![true; n])?;
                time_step(&p, method, &w, 5)
            };
            TimingRow {
                n,
                method,
                outcome: run().map_err(|e| e.to_string()),
            }
        })
        .collect()
}

/// Reference length for normalized timings: 100 when present, else the
/// smallest `N`.
fn timing_reference(n_list: &[usize]) -> usize {
    if n_list.contains(&100) {
        100
    } else {
        n_list[0]
    }
}

/// Fits without and with gaps, or the error message.
pub type FitPair = std::result::Result<(FitResult, FitResult), String>;

#[derive(Debug, Clone)]
pub struct GappedFit {
    pub signal: Vec<f64>,
    pub noisy: TimeSeries,
    pub gapped: TimeSeries,
    pub fits: Vec<(Method, FitPair)>,
}

/// The 50-point example fitted with and without gaps.
pub fn gapped_fit(methods: &[Method], seed: u64) -> Result<GappedFit> {
    let preset = Preset::Ishteva50;
    let signal = preset.signal()?;
    let noisy_vals = add_noise(&signal, preset.default_noise(), seed);
    let noisy = TimeSeries::new(noisy_vals.clone())?;
    let gapped = TimeSeries::from_nan_values(&apply_gaps(&noisy_vals, &ISHTEVA50_GAPS)?)?;
    let n = signal.len();
    let r = crate::bench::generate::ISHTEVA50_RANK;
    let full_w = WeightSpec::identity(n);
    let gap_w = mask_missing(WeightSpec::identity(n), gapped.mask())?;
    let fits = methods
        .iter()
        .map(|&m| {
            let cfg = SolverConfig::new(m);
            let run = || -> Result<(FitResult, FitResult)> {
                Ok((fit(&noisy, r, &full_w, &cfg, None)?, fit(&gapped, r, &gap_w, &cfg, None)?))
            };
            (m, run().map_err(|e| e.to_string()))
        })
        .collect();
    Ok(GappedFit {
        signal,
        noisy,
        gapped,
        fits,
    })
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Header and rows of one CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn status<T>(r: &std::result::Result<T, String>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => format!("error: {e}"),
    }
}

pub fn accuracy_table(rows: &[AccuracyRow]) -> Table {
    let mut t = Table::new(&["N", "method", "status", "distance", "rel_residual", "obj_gap", "iterations", "termination"]);
    for r in rows {
        let mut row = vec![r.n.to_string(), r.method.to_string(), status(&r.outcome)];
        match &r.outcome {
            Ok(o) => row.extend([
                num(o.distance),
                num(o.rel_residual),
                num(o.obj_gap),
                o.fit.trace.steps().to_string(),
                o.fit.trace.termination.to_string(),
            ]),
            Err(_) => row.extend(std::iter::repeat_n(String::new(), 5)),
        }
        t.rows.push(row);
    }
    t
}

pub fn projection_table(rows: &[ProjectionRow]) -> Table {
    let mut t = Table::new(&["N", "method", "status", "rel_residual", "distance"]);
    for r in rows {
        let mut row = vec![r.n.to_string(), r.method.to_string(), status(&r.outcome)];
        match &r.outcome {
            Ok((res, d)) => row.extend([num(*res), num(*d)]),
            Err(_) => row.extend([String::new(), String::new()]),
        }
        t.rows.push(row);
    }
    t
}

pub fn timing_table(rows: &[TimingRow], n_list: &[usize]) -> Table {
    let reference = timing_reference(n_list);
    let mut t = Table::new(&["N", "method", "status", "seconds", "normalized"]);
    for r in rows {
        let base = rows
            .iter()
            .find(|q| q.n == reference && q.method == r.method)
            .and_then(|q| q.outcome.as_ref().ok().copied());
        let mut row = vec![r.n.to_string(), r.method.to_string(), status(&r.outcome)];
        match (&r.outcome, base) {
            (Ok(s), Some(b)) => row.extend([num(*s), num(s / b)]),
            (Ok(s), None) => row.extend([num(*s), String::new()]),
            (Err(_), _) => row.extend([String::new(), String::new()]),
        }
        t.rows.push(row);
    }
    t
}

pub fn gapped_table(g: &GappedFit) -> Table {
    let mut header = vec!["index".to_string(), "signal".into(), "observed".into(), "observed_gapped".into()];
    for (m, _) in &g.fits {
        header.push(format!("fitted_{m}"));
        header.push(format!("fitted_gapped_{m}"));
    }
    let gv = g.gapped.to_nan_values();
    let rows = (0..g.signal.len())
        .map(|i| {
            let mut row = vec![(i + 1).to_string(), num(g.signal[i]), num(g.noisy.values()[i]), num(gv[i])];
            for (_, f) in &g.fits {
                match f {
                    Ok((full, gap)) => row.extend([num(full.signal[i]), num(gap.signal[i])]),
                    Err(_) => row.extend([String::new(), String::new()]),
                }
            }
            row
        })
        .collect();
    Table { header, rows }
}

const PLOT_PRELUDE: &str = "import csv\nimport sys\nimport matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n";

fn plot_script(kind: ExperimentKind, csv_name: &str) -> String {
    let body = match kind {
        ExperimentKind::GappedFit => format!(
            r#"rows = list(csv.DictReader(open("{csv_name}")))
idx = [int(r["index"]) for r in rows]
val = lambda r, k: float(r[k]) if r[k] else float("nan")
fits = [k for k in rows[0] if k.startswith("fitted_") and not k.startswith("fitted_gapped_")]
fig, axes = plt.subplots(1, 2, figsize=(11, 4), sharey=True)
for ax, obs, prefix in [(axes[0], "observed", "fitted_"), (axes[1], "observed_gapped", "fitted_gapped_")]:
    ax.plot(idx, [val(r, obs) for r in rows], "k.", label="observed")
    ax.plot(idx, [val(r, "signal") for r in rows], "b-", label="signal")
    for k in fits:
        m = k[len("fitted_"):]
        ax.plot(idx, [val(r, prefix + m) for r in rows], "-", label=m)
    ax.legend()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "{csv_name}".replace(".csv", ".png"))
"#
        ),
        _ => {
            let cols: &[&str] = match kind {
                ExperimentKind::KnownMinimumAccuracy => &["distance", "rel_residual", "obj_gap"],
                ExperimentKind::ResidualVsN => &["rel_residual", "distance"],
                _ => &["normalized"],
            };
            let cols = cols.iter().map(|c| format!("\"{c}\"")).collect::<Vec<_>>().join(", ");
            format!(
                r#"rows = [r for r in csv.DictReader(open("{csv_name}")) if r["status"] == "ok"]
cols = [{cols}]
methods = sorted({{r["method"] for r in rows}})
fig, axes = plt.subplots(1, len(cols), figsize=(5 * len(cols), 4), squeeze=False)
for ax, c in zip(axes[0], cols):
    for m in methods:
        pts = [(int(r["N"]), abs(float(r[c]))) for r in rows if r["method"] == m and r[c]]
        ax.loglog([p[0] for p in pts], [max(p[1], 1e-18) for p in pts], "o-", label=m)
    ax.set_xlabel("N")
    ax.set_title(c)
    ax.legend()
fig.tight_layout()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "{csv_name}".replace(".csv", ".png"))
"#
            )
        }
    };
    format!("{PLOT_PRELUDE}{body}")
}

/// Runs one experiment and writes `<kind>.csv` and `plot_<kind>.py` into
/// `out_dir`. Failed cells become rows with an error status.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<Vec<PathBuf>> {
    spec.validate()?;
    let table = match spec.kind {
        ExperimentKind::KnownMinimumAccuracy => accuracy_table(&known_minimum_accuracy(&spec.n_list, &spec.methods)),
        ExperimentKind::ResidualVsN => projection_table(&residual_vs_n(&spec.n_list, &spec.methods)),
        ExperimentKind::IterationTiming => {
            timing_table(&iteration_timing(&spec.n_list, &spec.methods, &spec.weights), &spec.n_list)
        }
        ExperimentKind::GappedFit => gapped_table(&gapped_fit(&spec.methods, spec.seed)?),
    };
    fs::create_dir_all(out_dir)?;
    let csv_name = format!("{}.csv", spec.kind.name());
    let csv_path = out_dir.join(&csv_name);
    table.write(&csv_path)?;
    let plot_path = out_dir.join(format!("plot_{}.py", spec.kind.name()));
    fs::write(&plot_path, plot_script(spec.kind, &csv_name))?;
    Ok(vec![csv_path, plot_path])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: ExperimentKind, n_list: Vec<usize>) -> ExperimentSpec {
        ExperimentSpec {
            kind,
            n_list,
            methods: vec![Method::Mgn, Method::SMgn],
            weights: WeightArg::Identity,
            seed: 1,
            allow_large: false,
        }
    }

    #[test]
    fn spec_validation() {
        assert!(spec(ExperimentKind::ResidualVsN, vec![20, 100]).validate().is_ok());
        assert!(spec(ExperimentKind::ResidualVsN, vec![100, 20]).validate().is_err());
        assert!(spec(ExperimentKind::ResidualVsN, vec![]).validate().is_err());
        assert!(spec(ExperimentKind::ResidualVsN, vec![5]).validate().is_err());
        let mut big = spec(ExperimentKind::ResidualVsN, vec![20, 20_000]);
        assert!(big.validate().is_err());
        big.allow_large = true;
        assert!(big.validate().is_ok());
        assert!(spec(ExperimentKind::GappedFit, vec![]).validate().is_ok());
    }

    #[test]
    fn parsing() {
        assert_eq!(parse_n_list("20, 100,1000").unwrap(), vec![20, 100, 1000]);
        assert!(parse_n_list("20,x").is_err());
        assert_eq!(parse_methods("all").unwrap(), Method::ALL.to_vec());
        assert_eq!(parse_methods("mgn,s-vpgn").unwrap(), vec![Method::Mgn, Method::SVpgn]);
        assert_eq!("residual_vs_N".parse::<ExperimentKind>().unwrap(), ExperimentKind::ResidualVsN);
        assert!("nope".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn accuracy_rows_in_cell_order() {
        let rows = known_minimum_accuracy(&[20, 40], &[Method::SMgn, Method::Mgn]);
        let order: Vec<(usize, Method)> = rows.iter().map(|r| (r.n, r.method)).collect();
        assert_eq!(order, vec![(20, Method::SMgn), (20, Method::Mgn), (40, Method::SMgn), (40, Method::Mgn)]);
        for r in &rows {
            let o = r.outcome.as_ref().unwrap();
            assert!(o.distance <= 1e-6 && o.rel_residual <= 1e-8);
        }
    }

    #[test]
    fn failures_become_rows() {
        // banded W has no banded inverse, so the Γ route is unavailable
        let rows = iteration_timing(&[30], &[Method::Vpgn, Method::Mgn], &WeightArg::parse("ar:0.5").unwrap());
        assert!(rows[0].outcome.is_err());
        assert!(rows[1].outcome.is_ok());
        let t = timing_table(&rows, &[30]);
        assert!(t.rows[0][2].starts_with("error"));
        assert_eq!(t.rows[1][4], "1");
    }

    #[test]
    fn outputs_are_reproducible() {
        let dir = std::env::temp_dir().join(format!("hmgn-exp-{}", std::process::id()));
        for kind in [ExperimentKind::KnownMinimumAccuracy, ExperimentKind::ResidualVsN, ExperimentKind::GappedFit] {
            let s = spec(kind, vec![20, 60]);
            let a = run_experiment(&s, &dir.join("a")).unwrap();
            let b = run_experiment(&s, &dir.join("b")).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
            }
        }
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn gapped_table_shape() {
        let g = gapped_fit(&[Method::Mgn], 5).unwrap();
        let t = gapped_table(&g);
        assert_eq!(t.header.len(), 6);
        assert_eq!(t.rows.len(), 50);
        // gaps are empty in the gapped column only
        assert_eq!(t.rows[9][3], "");
        assert_ne!(t.rows[9][2], "");
        assert!(t.rows.iter().all(|r| !r[5].is_empty()));
    }
}
