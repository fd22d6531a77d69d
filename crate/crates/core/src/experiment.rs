//! Sweep driver: configuration, per-cell evaluation, CSV emission and the
//! derived summaries and figure slices.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::adaptive::{QuadraturePlan, Refinement};
use crate::baselines::{Baseline, DD_MIN_ENERGY};
use crate::error::{Error, Result};
use crate::information::{ratio_and_gain, DetectorKind};
use crate::modulation::{gamma_amplitude_density, ModulationScheme};
use crate::numeric::log_space;
use crate::optimizer::{default_nu_grid, optimize_z, optimize_z_nu, OptimizerSettings};
use crate::pnr::PnrResolution;

/// Column names of the results CSV, in order.
pub const CSV_HEADER: [&str; 13] = [
    "experiment",
    "n_S",
    "M",
    "detector",
    "modulation",
    "bits_per_use",
    "pie",
    "ratio",
    "gain",
    "z_opt",
    "nu_opt",
    "node_count",
    "wall_time_s",
];

/// Modulation label of rows maximized over the Gamma shape.
pub const NGM_LABEL: &str = "ngm";

/// Modulation label of closed-form baseline rows.
pub const CLOSED_FORM_LABEL: &str = "closed_form";

const PIE_CONSISTENCY: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Experiment {
    Baselines,
    SingleQuadrature,
    PhotonStarved,
    DoubleQuadrature,
    Gains,
    Ngm,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Baselines,
        Experiment::SingleQuadrature,
        Experiment::PhotonStarved,
        Experiment::DoubleQuadrature,
        Experiment::Gains,
        Experiment::Ngm,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Experiment::Baselines => "baselines",
            Experiment::SingleQuadrature => "single_quadrature",
            Experiment::PhotonStarved => "photon_starved",
            Experiment::DoubleQuadrature => "double_quadrature",
            Experiment::Gains => "gains",
            Experiment::Ngm => "ngm",
        }
    }

    pub fn default_grid(self) -> Grid {
        let (min, max, points) = match self {
            Experiment::Baselines => (1e-3, 1e2, 101),
            Experiment::SingleQuadrature => (1e-3, 1e1, 25),
            Experiment::PhotonStarved => (1e-6, 1e-1, 21),
            Experiment::DoubleQuadrature => (1e-2, 1e2, 25),
            Experiment::Gains => (1e-1, 1e2, 25),
            Experiment::Ngm => (1e-4, 1e2, 25),
        };
        Grid { min, max, points }
    }

    fn tasks(self) -> &'static [Task] {
        use Task::*;
        match self {
            Experiment::Baselines => &[
                Closed(Baseline::Sh),
                Closed(Baseline::Dh),
                Closed(Baseline::Holevo),
                Closed(Baseline::Dd),
            ],
            Experiment::SingleQuadrature | Experiment::PhotonStarved => {
                &[Gaussian(DetectorKind::Wh), Gaussian(DetectorKind::Hl)]
            }
            Experiment::DoubleQuadrature | Experiment::Gains => {
                &[Gaussian(DetectorKind::Wh), Gaussian(DetectorKind::Dw)]
            }
            Experiment::Ngm => &[Gaussian(DetectorKind::Wh), NonGaussian],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.label() == s)
            .ok_or_else(|| Error::config(format!("unknown experiment `{s}`")))
    }
}

/// Log-spaced grid of received energies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::config(format!(
                "grid bounds must be positive and finite, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.min < DD_MIN_ENERGY {
            return Err(Error::config(format!(
                "grid minimum {} is below {DD_MIN_ENERGY}",
                self.min
            )));
        }
        if self.points < 2 || self.max <= self.min {
            return Err(Error::config("grid needs min < max and at least 2 points"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        log_space(self.min, self.max, self.points)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub experiment: Experiment,
    pub grid: Grid,
    pub m_list: Vec<u32>,
    pub refinement: Refinement,
    pub optimizer: OptimizerSettings,
    pub output: Option<PathBuf>,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

impl SweepConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            grid: experiment.default_grid(),
            m_list: vec![1, 3, 5, 10],
            refinement: Refinement::default(),
            optimizer: OptimizerSettings::default(),
            output: None,
            threads: 0,
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.m_list.is_empty() {
            return Err(Error::config("resolution list is empty"));
        }
        for &m in &self.m_list {
            PnrResolution::new(m)?;
        }
        self.refinement.validate()?;
        self.optimizer.validate()
    }
}

impl FromStr for SweepConfig {
    type Err = Error;

    /// Parses `key = value` lines grouped under `[section]` headers. `#`
    /// starts a comment. Unknown sections or keys are rejected.
    fn from_str(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, String, String, String)> = Vec::new();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    Error::config(format!("line {line_no}: unterminated section header"))
                })?;
                section = Some(name.trim().to_string());
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {line_no}: expected `key = value`"))
            })?;
            let section = section.clone().ok_or_else(|| {
                Error::config(format!("line {line_no}: key outside of any section"))
            })?;
            entries.push((
                line_no,
                section,
                key.trim().to_string(),
                value.trim().to_string(),
            ));
        }

        let experiment = entries
            .iter()
            .find(|(_, s, k, _)| s == "sweep" && k == "experiment")
            .ok_or_else(|| Error::config("missing `experiment` in [sweep]"))?
            .3
            .parse::<Experiment>()?;
        let mut cfg = SweepConfig::new(experiment);
        let (mut nu_min, mut nu_max, mut nu_points) = (0.6_f64, 1e3_f64, 25usize);

        for (line_no, section, key, value) in &entries {
            let at = |e: Error| match e {
                Error::Config(msg) => Error::config(format!("line {line_no}: {msg}")),
                other => other,
            };
            match (section.as_str(), key.as_str()) {
                ("sweep", "experiment") => {}
                ("sweep", "output") => cfg.output = Some(PathBuf::from(value)),
                ("sweep", "threads") => cfg.threads = parse_value(key, value).map_err(at)?,
                ("grid", "min") => cfg.grid.min = parse_value(key, value).map_err(at)?,
                ("grid", "max") => cfg.grid.max = parse_value(key, value).map_err(at)?,
                ("grid", "points") => cfg.grid.points = parse_value(key, value).map_err(at)?,
                ("detectors", "M") => {
                    cfg.m_list = value
                        .split(',')
                        .map(|v| parse_value(key, v.trim()))
                        .collect::<Result<_>>()
                        .map_err(at)?
                }
                ("quadrature", "order") => {
                    cfg.refinement.order = parse_value(key, value).map_err(at)?
                }
                ("quadrature", "fine_width") => {
                    cfg.refinement.fine_width = parse_value(key, value).map_err(at)?
                }
                ("quadrature", "prior_width") => {
                    cfg.refinement.prior_width = parse_value(key, value).map_err(at)?
                }
                ("quadrature", "grading_levels") => {
                    cfg.refinement.grading_levels = parse_value(key, value).map_err(at)?
                }
                ("optimizer", "z2_min") => {
                    cfg.optimizer.z2_min = parse_value(key, value).map_err(at)?
                }
                ("optimizer", "z2_max") => {
                    cfg.optimizer.z2_max = parse_value(key, value).map_err(at)?
                }
                ("optimizer", "coarse_points") => {
                    cfg.optimizer.coarse_points = parse_value(key, value).map_err(at)?
                }
                ("optimizer", "refine_tol") => {
                    cfg.optimizer.refine_tol = parse_value(key, value).map_err(at)?
                }
                ("optimizer", "starts") => {
                    cfg.optimizer.starts = parse_value(key, value).map_err(at)?
                }
                ("optimizer", "nu_min") => nu_min = parse_value(key, value).map_err(at)?,
                ("optimizer", "nu_max") => nu_max = parse_value(key, value).map_err(at)?,
                ("optimizer", "nu_points") => nu_points = parse_value(key, value).map_err(at)?,
                (s, k) => {
                    return Err(Error::config(format!(
                        "line {line_no}: unknown key `{k}` in [{s}]"
                    )))
                }
            }
        }
        if !(nu_min >= 0.5 && nu_min < nu_max && nu_max.is_finite()) || nu_points < 2 {
            return Err(Error::config(format!(
                "nu grid needs 1/2 <= nu_min < nu_max and 2+ points, got [{nu_min}, {nu_max}] x {nu_points}"
            )));
        }
        cfg.optimizer.nu_grid = default_nu_grid(nu_min, nu_max, nu_points);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("cannot parse `{value}` for `{key}`")))
}

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub n_s: f64,
    /// Detector resolution; 0 for closed-form baselines.
    pub m: u32,
    pub detector: String,
    pub modulation: String,
    pub bits_per_use: f64,
    pub pie: f64,
    pub ratio: f64,
    pub gain: f64,
    /// 0 for closed-form baselines.
    pub z_opt: f64,
    /// `inf` stands for BPSK.
    pub nu_opt: Option<f64>,
    pub node_count: usize,
    pub wall_time_s: f64,
}

impl ResultRow {
    fn validate(&self) -> Result<()> {
        let fields = [
            ("n_S", self.n_s),
            ("bits_per_use", self.bits_per_use),
            ("pie", self.pie),
            ("ratio", self.ratio),
            ("gain", self.gain),
            ("z_opt", self.z_opt),
            ("wall_time_s", self.wall_time_s),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::numeric(self.coordinates(), format!("{name} = {v}")));
            }
        }
        if let Some(nu) = self.nu_opt {
            if nu.is_nan() {
                return Err(Error::numeric(self.coordinates(), "nu_opt is NaN"));
            }
        }
        if (self.pie * self.n_s - self.bits_per_use).abs() > PIE_CONSISTENCY {
            return Err(Error::numeric(
                self.coordinates(),
                "pie * n_S disagrees with bits_per_use",
            ));
        }
        Ok(())
    }

    fn coordinates(&self) -> String {
        format!(
            "{} n_S={} M={} {}/{}",
            self.experiment, self.n_s, self.m, self.detector, self.modulation
        )
    }

    fn closed_form(experiment: &str, n_s: f64, baseline: Baseline) -> Result<Self> {
        let bits = baseline.capacity(n_s)?;
        let (ratio, gain) = ratio_and_gain(bits, n_s, Baseline::Sh)?;
        Ok(Self {
            experiment: experiment.to_string(),
            n_s,
            m: 0,
            detector: baseline.label().to_string(),
            modulation: CLOSED_FORM_LABEL.to_string(),
            bits_per_use: bits,
            pie: bits / n_s,
            ratio,
            gain,
            z_opt: 0.0,
            nu_opt: None,
            node_count: 0,
            wall_time_s: 0.0,
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Task {
    Closed(Baseline),
    Gaussian(DetectorKind),
    NonGaussian,
}

impl Task {
    fn label(self) -> &'static str {
        match self {
            Task::Closed(b) => b.label(),
            Task::Gaussian(k) => k.label(),
            Task::NonGaussian => DetectorKind::Wh.label(),
        }
    }
}

fn locate(err: Error, where_: &str) -> Error {
    match err {
        Error::Numeric { location, detail } => Error::Numeric {
            location: format!("{where_}: {location}"),
            detail,
        },
        Error::Domain(msg) => Error::Domain(format!("{where_}: {msg}")),
        other => other,
    }
}

fn run_cell(cfg: &SweepConfig, n_s: f64, m: u32, task: Task) -> Result<ResultRow> {
    let experiment = cfg.experiment.label();
    let start = Instant::now();
    let mut row = match task {
        Task::Closed(b) => ResultRow::closed_form(experiment, n_s, b)?,
        Task::Gaussian(kind) => {
            let res = PnrResolution::new(m)?;
            let scheme = if kind.is_bivariate() {
                ModulationScheme::gaussian_bi(n_s)?
            } else {
                ModulationScheme::gaussian_uni(n_s)?
            };
            let plan = QuadraturePlan::Adapted(cfg.refinement);
            let opt = optimize_z(kind, res, &scheme, &plan, &cfg.optimizer)?;
            let (ratio, gain) = ratio_and_gain(opt.bits, n_s, kind.shannon_baseline())?;
            ResultRow {
                experiment: experiment.to_string(),
                n_s,
                m,
                detector: kind.label().to_string(),
                modulation: scheme.kind().label().to_string(),
                bits_per_use: opt.bits,
                pie: opt.bits / n_s,
                ratio,
                gain,
                z_opt: opt.z_opt,
                nu_opt: None,
                node_count: opt.nodes,
                wall_time_s: 0.0,
            }
        }
        Task::NonGaussian => {
            let res = PnrResolution::new(m)?;
            let opt = optimize_z_nu(res, n_s, &cfg.optimizer, &cfg.refinement)?;
            let (ratio, gain) = ratio_and_gain(opt.bits, n_s, Baseline::Sh)?;
            ResultRow {
                experiment: experiment.to_string(),
                n_s,
                m,
                detector: DetectorKind::Wh.label().to_string(),
                modulation: NGM_LABEL.to_string(),
                bits_per_use: opt.bits,
                pie: opt.bits / n_s,
                ratio,
                gain,
                z_opt: opt.z_opt,
                nu_opt: Some(opt.nu_opt.value()),
                node_count: opt.nodes,
                wall_time_s: 0.0,
            }
        }
    };
    row.wall_time_s = start.elapsed().as_secs_f64();
    Ok(row)
}

/// Evaluates every `(n_S, M, detector)` cell of the sweep. Cells run in
/// parallel; rows come back sorted by `(n_S, M)` with the detector order of
/// the experiment.
pub fn run_experiment(cfg: &SweepConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let m_list: Vec<u32> = if cfg.experiment == Experiment::Baselines {
        vec![0]
    } else {
        cfg.m_list.clone()
    };
    let cells: Vec<(f64, u32, Task)> = cfg
        .grid
        .values()
        .into_iter()
        .flat_map(|n| {
            m_list.iter().flat_map(move |&m| {
                cfg.experiment.tasks().iter().map(move |&t| (n, m, t))
            })
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    let mut rows = pool.install(|| {
        cells
            .par_iter()
            .map(|&(n, m, task)| {
                run_cell(cfg, n, m, task).map_err(|e| {
                    locate(
                        e,
                        &format!("{} n_S={n} M={m} {}", cfg.experiment, task.label()),
                    )
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    rows.sort_by(|a, b| {
        a.experiment
            .cmp(&b.experiment)
            .then(a.n_s.total_cmp(&b.n_s))
            .then(a.m.cmp(&b.m))
    });
    Ok(rows)
}

fn fmt_float(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.11e}")
}

/// Renders rows as CSV text under [`CSV_HEADER`].
pub fn to_csv_string(rows: &[ResultRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::domain("no result rows to write"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for row in rows {
        row.validate()?;
        w.write_record([
            row.experiment.clone(),
            fmt_float(row.n_s),
            row.m.to_string(),
            row.detector.clone(),
            row.modulation.clone(),
            fmt_float(row.bits_per_use),
            fmt_float(row.pie),
            fmt_float(row.ratio),
            fmt_float(row.gain),
            fmt_float(row.z_opt),
            row.nu_opt.map(fmt_float).unwrap_or_default(),
            row.node_count.to_string(),
            fmt_float(row.wall_time_s),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Csv(e.to_string()))
}

pub fn write_csv(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = to_csv_string(rows)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| Error::Csv(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Csv(format!(
            "unexpected header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Csv(format!("line {line}: {e}")))?;
        let num = |idx: usize| -> Result<f64> {
            record[idx].parse::<f64>().map_err(|_| {
                Error::Csv(format!(
                    "line {line}: `{}` in column {} is not a number",
                    &record[idx], CSV_HEADER[idx]
                ))
            })
        };
        let int = |idx: usize| -> Result<u64> {
            record[idx].parse::<u64>().map_err(|_| {
                Error::Csv(format!(
                    "line {line}: `{}` in column {} is not an integer",
                    &record[idx], CSV_HEADER[idx]
                ))
            })
        };
        let m = u32::try_from(int(2)?)
            .map_err(|_| Error::Csv(format!("line {line}: M out of range")))?;
        let row = ResultRow {
            experiment: record[0].to_string(),
            n_s: num(1)?,
            m,
            detector: record[3].to_string(),
            modulation: record[4].to_string(),
            bits_per_use: num(5)?,
            pie: num(6)?,
            ratio: num(7)?,
            gain: num(8)?,
            z_opt: num(9)?,
            nu_opt: if record[10].is_empty() {
                None
            } else {
                Some(num(10)?)
            },
            node_count: int(11)? as usize,
            wall_time_s: num(12)?,
        };
        row.validate()
            .map_err(|e| Error::Csv(format!("line {line}: {e}")))?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

/// First sign change of `diff` along increasing `n`, interpolated linearly in
/// `ln n`.
fn first_crossing(points: &[(f64, f64)]) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let ((n0, d0), (n1, d1)) = (w[0], w[1]);
        if d0 == 0.0 {
            return Some(n0);
        }
        if d0.signum() == d1.signum() && d1 != 0.0 {
            return None;
        }
        let t = d0 / (d0 - d1);
        Some((n0.ln() + t * (n1.ln() - n0.ln())).exp())
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crossover {
    pub experiment: String,
    /// Curves compared, e.g. `sh-dd` or `dw-wh`.
    pub curves: String,
    pub m: u32,
    pub n_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extremum {
    pub experiment: String,
    pub detector: String,
    pub modulation: String,
    pub m: u32,
    pub value: f64,
    pub n_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgmEnhancement {
    pub m: u32,
    pub ratio: f64,
    pub ratio_at: f64,
    pub gain: f64,
    pub gain_at: f64,
}

/// Headline scalars derived from a results table alone.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub crossovers: Vec<Crossover>,
    pub max_gains: Vec<Extremum>,
    pub max_ratios: Vec<Extremum>,
    pub ngm: Vec<NgmEnhancement>,
}

type SeriesKey = (String, String, String, u32);

fn series(rows: &[ResultRow]) -> BTreeMap<SeriesKey, Vec<&ResultRow>> {
    let mut out: BTreeMap<SeriesKey, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        out.entry((
            r.experiment.clone(),
            r.detector.clone(),
            r.modulation.clone(),
            r.m,
        ))
        .or_default()
        .push(r);
    }
    for v in out.values_mut() {
        v.sort_by(|a, b| a.n_s.total_cmp(&b.n_s));
    }
    out
}

fn paired_differences(
    a: &[&ResultRow],
    b: &[&ResultRow],
    field: impl Fn(&ResultRow) -> f64,
) -> Vec<(f64, f64)> {
    a.iter()
        .filter_map(|ra| {
            b.iter()
                .find(|rb| rb.n_s == ra.n_s)
                .map(|rb| (ra.n_s, field(ra) - field(rb)))
        })
        .collect()
}

fn argmax(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    points
        .iter()
        .copied()
        .fold(None, |best: Option<(f64, f64)>, p| match best {
            Some(b) if b.1 >= p.1 => Some(b),
            _ => Some(p),
        })
}

pub fn summarize(rows: &[ResultRow]) -> Summary {
    let groups = series(rows);
    let mut summary = Summary::default();

    for ((exp, det, modu, m), pts) in &groups {
        if modu == CLOSED_FORM_LABEL {
            if det == "sh" || det == "dh" {
                if let Some(dd) = groups.get(&(exp.clone(), "dd".into(), modu.clone(), *m)) {
                    let d = paired_differences(pts, dd, |r| r.bits_per_use);
                    if let Some(n_s) = first_crossing(&d) {
                        summary.crossovers.push(Crossover {
                            experiment: exp.clone(),
                            curves: format!("{det}-dd"),
                            m: *m,
                            n_s,
                        });
                    }
                }
            }
            continue;
        }
        if det == "dw" {
            let wh = (exp.clone(), "wh".to_string(), "gaussian".to_string(), *m);
            if let Some(wh) = groups.get(&wh) {
                let d = paired_differences(pts, wh, |r| r.bits_per_use);
                if let Some(n_s) = first_crossing(&d) {
                    summary.crossovers.push(Crossover {
                        experiment: exp.clone(),
                        curves: "dw-wh".into(),
                        m: *m,
                        n_s,
                    });
                }
            }
        }
        let extremum = |field: fn(&ResultRow) -> f64| {
            let p: Vec<(f64, f64)> = pts.iter().map(|r| (r.n_s, field(r))).collect();
            argmax(&p).map(|(n_s, value)| Extremum {
                experiment: exp.clone(),
                detector: det.clone(),
                modulation: modu.clone(),
                m: *m,
                value,
                n_s,
            })
        };
        summary.max_gains.extend(extremum(|r| r.gain));
        summary.max_ratios.extend(extremum(|r| r.ratio));

        if modu == NGM_LABEL {
            let base = (exp.clone(), det.clone(), "gaussian".to_string(), *m);
            if let Some(base) = groups.get(&base) {
                let dr = argmax(&paired_differences(pts, base, |r| r.ratio));
                let dg = argmax(&paired_differences(pts, base, |r| r.gain));
                if let (Some((ratio_at, ratio)), Some((gain_at, gain))) = (dr, dg) {
                    summary.ngm.push(NgmEnhancement {
                        m: *m,
                        ratio,
                        ratio_at,
                        gain,
                        gain_at,
                    });
                }
            }
        }
    }
    summary
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.crossovers {
            writeln!(
                f,
                "crossover {} {} M={}: n_S = {:.6}",
                c.experiment, c.curves, c.m, c.n_s
            )?;
        }
        for (name, list) in [("gain", &self.max_gains), ("ratio", &self.max_ratios)] {
            for e in list {
                writeln!(
                    f,
                    "max {name} {} {}/{} M={}: {:.6} at n_S = {:.6e}",
                    e.experiment, e.detector, e.modulation, e.m, e.value, e.n_s
                )?;
            }
        }
        for e in &self.ngm {
            writeln!(
                f,
                "ngm enhancement M={}: ratio {:+.6} at n_S = {:.6e}, gain {:+.6} at n_S = {:.6e}",
                e.m, e.ratio, e.ratio_at, e.gain, e.gain_at
            )?;
        }
        Ok(())
    }
}

/// A named CSV file of the figure set.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureSlice {
    pub name: String,
    pub csv: String,
}

const FIG9_SHAPES: [f64; 3] = [0.5, 2.0, 10.0];
const FIG9_ENERGY: f64 = 4.0;
const FIG9_HALF_WIDTH: f64 = 8.0;
const FIG9_POINTS: usize = 641;

fn select(rows: &[ResultRow], experiments: &[&str]) -> Vec<ResultRow> {
    rows.iter()
        .filter(|r| experiments.contains(&r.experiment.as_str()))
        .cloned()
        .collect()
}

fn with_overlays(mut rows: Vec<ResultRow>, baselines: &[Baseline]) -> Result<Vec<ResultRow>> {
    let mut energies: Vec<f64> = rows.iter().map(|r| r.n_s).collect();
    energies.sort_by(f64::total_cmp);
    energies.dedup();
    for n in energies {
        for &b in baselines {
            rows.push(ResultRow::closed_form(
                Experiment::Baselines.label(),
                n,
                b,
            )?);
        }
    }
    Ok(rows)
}

fn density_profiles() -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(["nu", "n_S", "x", "density"]).map_err(csv_err)?;
    for nu in FIG9_SHAPES {
        for i in 0..FIG9_POINTS {
            let x = -FIG9_HALF_WIDTH
                + 2.0 * FIG9_HALF_WIDTH * i as f64 / (FIG9_POINTS - 1) as f64;
            let p = gamma_amplitude_density(x, nu, FIG9_ENERGY)?;
            w.write_record([fmt_float(nu), fmt_float(FIG9_ENERGY), fmt_float(x), fmt_float(p)])
                .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Csv(e.to_string()))
}

/// Splits a results table into the per-figure files. Figures whose source
/// experiment is absent are skipped; `fig1` falls back to the default
/// baseline grid and `fig9` needs no input.
pub fn figure_slices(rows: &[ResultRow]) -> Result<Vec<FigureSlice>> {
    use Baseline::*;
    let mut fig1 = select(rows, &["baselines"]);
    if fig1.is_empty() {
        fig1 = Experiment::Baselines
            .default_grid()
            .values()
            .into_iter()
            .flat_map(|n| {
                [Sh, Dh, Holevo, Dd]
                    .map(|b| ResultRow::closed_form(Experiment::Baselines.label(), n, b))
            })
            .collect::<Result<_>>()?;
    }
    let plans: [(&str, Vec<ResultRow>, &[Baseline]); 7] = [
        ("fig4", select(rows, &["single_quadrature"]), &[Sh, Dd]),
        (
            "fig5",
            select(rows, &["photon_starved", "single_quadrature"]),
            &[Sh],
        ),
        ("fig6", select(rows, &["double_quadrature"]), &[Sh, Dh, Dd]),
        ("fig7", select(rows, &["gains"]), &[Sh, Dh]),
        ("fig8", select(rows, &["double_quadrature"]), &[Sh, Dh]),
        ("fig10", select(rows, &["ngm"]), &[]),
        ("fig11", select(rows, &["ngm"]), &[Sh]),
    ];

    let mut out = vec![FigureSlice {
        name: "fig1.csv".into(),
        csv: to_csv_string(&fig1)?,
    }];
    for (name, selected, overlays) in plans {
        if selected.is_empty() {
            continue;
        }
        out.push(FigureSlice {
            name: format!("{name}.csv"),
            csv: to_csv_string(&with_overlays(selected, overlays)?)?,
        });
    }
    out.push(FigureSlice {
        name: "fig9.csv".into(),
        csv: density_profiles()?,
    });
    out.sort_by_key(|s| {
        s.name
            .trim_start_matches("fig")
            .trim_end_matches(".csv")
            .parse::<u32>()
            .unwrap_or(u32::MAX)
    });
    Ok(out)
}

/// Writes [`figure_slices`] into `dir`, creating it if needed.
pub fn write_figures(rows: &[ResultRow], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    figure_slices(rows)?
        .into_iter()
        .map(|slice| {
            let path = dir.join(&slice.name);
            std::fs::write(&path, slice.csv).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baselines_at(n: &[f64]) -> Vec<ResultRow> {
        n.iter()
            .flat_map(|&n| {
                [Baseline::Sh, Baseline::Dh, Baseline::Holevo, Baseline::Dd]
                    .map(|b| ResultRow::closed_form("baselines", n, b).unwrap())
            })
            .collect()
    }

    #[test]
    fn config_parses_sections_and_defaults() {
        let cfg: SweepConfig = "
            # comment
            [sweep]
            experiment = gains
            threads = 2
            [grid]
            min = 0.5
            max = 2   # trailing comment
            points = 3
            [detectors]
            M = 2, 4
            [quadrature]
            order = 12
            [optimizer]
            starts = 2
            nu_points = 5
        "
        .parse()
        .unwrap();
        assert_eq!(cfg.experiment, Experiment::Gains);
        assert_eq!(cfg.threads, 2);
        assert_eq!(cfg.grid, Grid { min: 0.5, max: 2.0, points: 3 });
        assert_eq!(cfg.m_list, vec![2, 4]);
        assert_eq!(cfg.refinement.order, 12);
        assert_eq!(cfg.refinement.fine_width, Refinement::default().fine_width);
        assert_eq!(cfg.optimizer.starts, 2);
        assert_eq!(cfg.optimizer.nu_grid.len(), 7);
        assert_eq!(cfg.output, None);
    }

    #[test]
    fn config_rejects_bad_input() {
        let bad = [
            "[grid]\nmin = 1",
            "[sweep]\nexperiment = nope",
            "experiment = gains",
            "[sweep]\nexperiment = gains\n[grid]\nmin = 0",
            "[sweep]\nexperiment = gains\n[grid]\npoints = 1",
            "[sweep]\nexperiment = gains\n[grid]\nmin = 10\nmax = 1",
            "[sweep]\nexperiment = gains\n[grid]\nmin = 1e-13",
            "[sweep]\nexperiment = gains\n[grid]\ncolour = red",
            "[sweep]\nexperiment = gains\n[detectors]\nM = 0",
            "[sweep]\nexperiment = gains\n[detectors]\nM = x",
            "[sweep]\nexperiment = gains\n[optimizer]\nnu_min = 0.4",
            "[sweep\nexperiment = gains",
            "[sweep]\nexperiment gains",
        ];
        for text in bad {
            let err = text.parse::<SweepConfig>().unwrap_err();
            assert!(matches!(err, Error::Config(_) | Error::Domain(_)), "{text}: {err}");
        }
    }

    #[test]
    fn holevo_row_at_one_photon() {
        let rows = baselines_at(&[1.0]);
        let holevo = rows.iter().find(|r| r.detector == "holevo").unwrap();
        assert!((holevo.bits_per_use - 2.0).abs() < 1e-12);
        let csv = to_csv_string(&rows).unwrap();
        let back = parse_csv(&csv).unwrap();
        let holevo = back.iter().find(|r| r.detector == "holevo").unwrap();
        assert!((holevo.bits_per_use - 2.0).abs() < 1e-10);
    }

    #[test]
    fn empty_rows_rejected() {
        assert!(to_csv_string(&[]).is_err());
    }

    #[test]
    fn csv_round_trip_keeps_values_and_tokens() {
        let mut rows = baselines_at(&[0.01, 3.0]);
        rows.push(ResultRow {
            experiment: "ngm".into(),
            n_s: 0.05,
            m: 5,
            detector: "wh".into(),
            modulation: NGM_LABEL.into(),
            bits_per_use: 0.0625,
            pie: 1.25,
            ratio: 0.9,
            gain: -0.1,
            z_opt: 1.5,
            nu_opt: Some(f64::INFINITY),
            node_count: 321,
            wall_time_s: 0.25,
        });
        let text = to_csv_string(&rows).unwrap();
        assert!(text.starts_with(&CSV_HEADER.join(",")));
        assert!(text.contains(",inf,321,"));
        let back = parse_csv(&text).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.experiment, b.experiment);
            assert_eq!((a.m, a.node_count), (b.m, b.node_count));
            assert_eq!(a.nu_opt.is_some(), b.nu_opt.is_some());
            for (x, y) in [
                (a.n_s, b.n_s),
                (a.bits_per_use, b.bits_per_use),
                (a.pie, b.pie),
                (a.ratio, b.ratio),
                (a.gain, b.gain),
                (a.z_opt, b.z_opt),
            ] {
                assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0), "{x} vs {y}");
            }
        }
        assert_eq!(back.last().unwrap().nu_opt, Some(f64::INFINITY));
    }

    #[test]
    fn csv_parse_errors() {
        assert!(parse_csv("a,b\n1,2\n").is_err());
        let header = CSV_HEADER.join(",");
        let bad_num = format!("{header}\nx,abc,1,wh,gaussian,1,1,1,1,1,,1,0\n");
        assert!(matches!(parse_csv(&bad_num), Err(Error::Csv(_))));
        let bad_pie = format!("{header}\nx,1,1,wh,gaussian,1,2,1,1,1,,1,0\n");
        assert!(parse_csv(&bad_pie).is_err());
        let nan = format!("{header}\nx,1,1,wh,gaussian,NaN,NaN,1,1,1,,1,0\n");
        assert!(parse_csv(&nan).is_err());
    }

    #[test]
    fn baseline_sweep_rows_and_crossovers() {
        let mut cfg = SweepConfig::new(Experiment::Baselines);
        cfg.grid = Grid { min: 0.05, max: 2.0, points: 161 };
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 4 * 161);
        assert!(rows.iter().all(|r| r.m == 0));
        let s = summarize(&rows);
        let sh = s.crossovers.iter().find(|c| c.curves == "sh-dd").unwrap();
        let dh = s.crossovers.iter().find(|c| c.curves == "dh-dd").unwrap();
        assert!((sh.n_s - 0.22).abs() < 0.02, "{}", sh.n_s);
        assert!((dh.n_s - 0.79).abs() < 0.02, "{}", dh.n_s);
    }

    #[test]
    fn crossing_interpolates_in_log_energy() {
        let n = first_crossing(&[(1.0, -1.0), (100.0, 1.0)]).unwrap();
        assert!((n - 10.0).abs() < 1e-12);
        assert_eq!(first_crossing(&[(1.0, 1.0), (2.0, 1.0)]), None);
    }

    #[test]
    fn summary_reports_ngm_enhancement() {
        let mk = |modu: &str, n: f64, bits: f64| {
            let (ratio, gain) = ratio_and_gain(bits, n, Baseline::Sh).unwrap();
            ResultRow {
                experiment: "ngm".into(),
                n_s: n,
                m: 5,
                detector: "wh".into(),
                modulation: modu.into(),
                bits_per_use: bits,
                pie: bits / n,
                ratio,
                gain,
                z_opt: 1.0,
                nu_opt: (modu == NGM_LABEL).then_some(0.5),
                node_count: 10,
                wall_time_s: 0.0,
            }
        };
        let rows = vec![
            mk("gaussian", 0.1, 0.1),
            mk(NGM_LABEL, 0.1, 0.11),
            mk("gaussian", 1.0, 0.8),
            mk(NGM_LABEL, 1.0, 0.8),
        ];
        let s = summarize(&rows);
        assert_eq!(s.ngm.len(), 1);
        assert!(s.ngm[0].gain > 0.0);
        assert_eq!(s.ngm[0].gain_at, 0.1);
        assert_eq!(s.max_gains.len(), 2);
        assert!(!s.to_string().is_empty());
    }

    #[test]
    fn figure_slices_always_include_baselines_and_densities() {
        let slices = figure_slices(&baselines_at(&[0.1, 1.0])).unwrap();
        let names: Vec<_> = slices.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["fig1.csv", "fig9.csv"]);
        let fig9 = &slices[1].csv;
        assert!(fig9.starts_with("nu,n_S,x,density"));
        assert_eq!(fig9.lines().count(), 1 + 3 * FIG9_POINTS);
    }

    #[test]
    fn fig9_profiles_are_normalized() {
        for nu in FIG9_SHAPES {
            let h = 2.0 * FIG9_HALF_WIDTH / (FIG9_POINTS - 1) as f64;
            let mass: f64 = (0..FIG9_POINTS)
                .map(|i| {
                    let x = -FIG9_HALF_WIDTH + h * i as f64;
                    gamma_amplitude_density(x, nu, FIG9_ENERGY).unwrap() * h
                })
                .sum();
            assert!((mass - 1.0).abs() < 1e-3, "nu={nu} mass={mass}");
        }
    }
}
