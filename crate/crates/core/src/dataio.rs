//! Presets, dataset files, synthetic data and SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::fitting::{ExperimentalDataset, FitError};
use crate::material::MaterialParams;
use crate::uniaxial::{simulate_creep, CreepCurve, CreepOptions, CreepSegment, UniaxialError};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("missing metadata `{0}`")]
    MissingMetadata(&'static str),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Dataset(#[from] FitError),
    #[error(transparent)]
    Simulation(#[from] UniaxialError),
    #[error("nothing to plot")]
    EmptyPlot,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub material: &'static str,
    pub temperature_c: f64,
    pub uts_mpa: Option<f64>,
    /// Pa
    pub mu_p_bar: f64,
    /// Pa
    pub mu_g_bar: f64,
    /// Pa·s
    pub eta: f64,
    /// Fraction of UTS at which the parameters were identified.
    pub load_fraction: Option<f64>,
    /// Applied stress of the identifying test when given directly (Pa).
    pub stress_pa: Option<f64>,
    /// Load/unload weight used in the identification.
    pub weight: f64,
}

impl Preset {
    pub fn params(&self) -> MaterialParams {
        MaterialParams {
            mu_p_bar: self.mu_p_bar,
            mu_g_bar: self.mu_g_bar,
            eta: self.eta,
            thermal: None,
        }
    }

    /// Stress of the identifying test (Pa).
    pub fn reference_stress(&self) -> Option<f64> {
        self.stress_pa
            .or_else(|| Some(self.load_fraction? * self.uts_mpa? * 1e6))
    }

    /// `fraction × UTS` in Pa.
    pub fn stress_at_fraction(&self, fraction: f64) -> Option<f64> {
        self.uts_mpa.map(|uts| fraction * uts * 1e6)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetTable {
    pub rows: Vec<Preset>,
}

#[allow(clippy::too_many_arguments)]
const fn hfpe(
    name: &'static str,
    temp: f64,
    uts: f64,
    mu_p: f64,
    mu_g: f64,
    eta: f64,
    frac: f64,
    w: f64,
) -> Preset {
    Preset {
        name,
        material: "HFPE-II-52",
        temperature_c: temp,
        uts_mpa: Some(uts),
        mu_p_bar: mu_p,
        mu_g_bar: mu_g,
        eta,
        load_fraction: Some(frac),
        stress_pa: None,
        weight: w,
    }
}

/// Identified parameter sets for HFPE-II-52 (285–330 °C) and PMR-15 (288 °C).
pub fn presets() -> PresetTable {
    PresetTable {
        rows: vec![
            hfpe("hfpe285", 285.0, 43.0, 4.79e8, 1.43e9, 3.95e13, 0.45, 0.5),
            hfpe("hfpe300", 300.0, 40.2, 4.12e8, 0.51e9, 2.23e13, 0.45, 0.5),
            hfpe("hfpe315", 315.0, 36.3, 4.19e8, 0.79e9, 4.04e13, 0.30, 0.75),
            hfpe("hfpe330", 330.0, 23.8, 5.07e8, 0.79e9, 3.19e13, 0.20, 0.75),
            Preset {
                name: "pmr15_288",
                material: "PMR-15",
                temperature_c: 288.0,
                uts_mpa: None,
                mu_p_bar: 3.76e8,
                mu_g_bar: 4.42e8,
                eta: 6.22e12,
                load_fraction: None,
                stress_pa: Some(10e6),
                weight: 0.75,
            },
        ],
    }
}

impl PresetTable {
    pub fn get(&self, name: &str) -> Result<&Preset, DataError> {
        self.rows
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| DataError::UnknownPreset(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.rows.iter().map(|p| p.name).collect()
    }

    /// Tab-separated table in the published scaling (μ̄_p in 10⁸ Pa, μ̄_G in
    /// 10⁹ Pa, η in 10¹³ Pa·s), followed by one line per directly stressed set.
    pub fn render(&self) -> String {
        let mut out = String::from(
            "Temperature\tUTS (MPa)\tmu_p (x1e8 Pa)\tmu_G (x1e9 Pa)\teta (x1e13 Pa.s)\tParameter loading value\n",
        );
        for p in &self.rows {
            if let (Some(uts), Some(frac)) = (p.uts_mpa, p.load_fraction) {
                let _ = writeln!(
                    out,
                    "{:.0}°C\t{:.1}\t{:.2}\t{:.2}\t{:.2}\t{:.2} UTS",
                    p.temperature_c,
                    uts,
                    p.mu_p_bar / 1e8,
                    p.mu_g_bar / 1e9,
                    p.eta / 1e13,
                    frac
                );
            }
        }
        for p in self.rows.iter().filter(|p| p.stress_pa.is_some()) {
            let _ = writeln!(
                out,
                "{} {} at {:.0}°C, {} MPa: mu_G = {:.2e} Pa, mu_p = {:.2e} Pa, eta = {:.2e} Pa.s",
                p.name,
                p.material,
                p.temperature_c,
                p.stress_pa.unwrap_or_default() / 1e6,
                p.mu_g_bar,
                p.mu_p_bar,
                p.eta
            );
        }
        out
    }
}

/// Reads a dataset CSV: `# key=value` metadata (`stress_pa` required;
/// `temperature_c`, `provenance`, `unload_start_s` optional), then a
/// `segment,t_s,strain` table with `load`/`unload` rows.
pub fn parse_dataset(text: &str) -> Result<ExperimentalDataset, DataError> {
    let mut ds = ExperimentalDataset::default();
    let mut stress = None;
    for (i, line) in text.lines().enumerate() {
        let Some(meta) = line.trim_start().strip_prefix('#') else {
            continue;
        };
        let Some((key, value)) = meta.split_once('=') else {
            continue;
        };
        let line_no = i as u64 + 1;
        let num = || {
            value.trim().parse::<f64>().map_err(|e| DataError::Parse {
                line: line_no,
                message: format!("{}: {e}", key.trim()),
            })
        };
        match key.trim() {
            "stress_pa" => stress = Some(num()?),
            "temperature_c" => ds.temperature_c = Some(num()?),
            "unload_start_s" => ds.unload_start = Some(num()?),
            "provenance" => ds.provenance = value.trim().to_string(),
            _ => {}
        }
    }
    ds.stress = stress.ok_or(DataError::MissingMetadata("stress_pa"))?;

    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header_line = rdr.position().line();
    let headers = rdr
        .headers()
        .map_err(|e| DataError::Parse {
            line: header_line.max(1),
            message: e.to_string(),
        })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["segment", "t_s", "strain"] {
        return Err(DataError::Parse {
            line: rdr.position().line().saturating_sub(1).max(1),
            message: format!(
                "expected header `segment,t_s,strain`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DataError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| DataError::Parse { line, message };
        if rec.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", rec.len())));
        }
        let t: f64 = rec[1].parse().map_err(|e| bad(format!("t_s: {e}")))?;
        let e: f64 = rec[2].parse().map_err(|e| bad(format!("strain: {e}")))?;
        if !t.is_finite() || !e.is_finite() {
            return Err(bad("non-finite value".into()));
        }
        let phase = match &rec[0] {
            "load" => {
                if !ds.unload.is_empty() {
                    return Err(bad("load row after unload rows".into()));
                }
                &mut ds.load
            }
            "unload" => {
                if let Some(&(tl, _)) = ds.load.last() {
                    if t < tl {
                        return Err(bad(format!("unload time {t} precedes load time {tl}")));
                    }
                }
                &mut ds.unload
            }
            other => return Err(bad(format!("unknown segment label `{other}`"))),
        };
        if let Some(&(prev, _)) = phase.last() {
            if !(t > prev) {
                return Err(bad(format!("time {t} does not increase (previous {prev})")));
            }
        }
        phase.push((t, e));
    }
    ds.validate()?;
    Ok(ds)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<ExperimentalDataset, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_dataset(&text)
}

/// Writes `ds` in the format read by [`parse_dataset`], at full precision.
pub fn write_dataset<W: Write>(ds: &ExperimentalDataset, mut w: W) -> io::Result<()> {
    writeln!(w, "# stress_pa={}", ds.stress)?;
    if let Some(t) = ds.temperature_c {
        writeln!(w, "# temperature_c={t}")?;
    }
    if let Some(tu) = ds.unload_start {
        writeln!(w, "# unload_start_s={tu}")?;
    }
    if !ds.provenance.is_empty() {
        writeln!(w, "# provenance={}", ds.provenance.replace('\n', " "))?;
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["segment", "t_s", "strain"])?;
    for (label, pts) in [("load", &ds.load), ("unload", &ds.unload)] {
        for (t, e) in pts.iter() {
            out.write_record([label, &t.to_string(), &e.to_string()])?;
        }
    }
    out.flush()
}

pub fn save_dataset(ds: &ExperimentalDataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(io_err(path))?;
    write_dataset(ds, io::BufWriter::new(file)).map_err(io_err(path))
}

/// Splits a simulated load/unload curve into a dataset: samples before the
/// second segment are the load phase, the rest the unload phase.
pub fn dataset_from_curve(
    curve: &CreepCurve,
    stress: f64,
) -> Result<ExperimentalDataset, DataError> {
    let split = curve
        .markers
        .get(1)
        .map_or(curve.samples.len(), |m| m.sample);
    let pts =
        |r: &[crate::uniaxial::CurveSample]| r.iter().map(|s| (s.t, s.strain)).collect::<Vec<_>>();
    let ds = ExperimentalDataset {
        load: pts(&curve.samples[..split]),
        unload: pts(&curve.samples[split..]),
        stress,
        temperature_c: None,
        provenance: curve.label.clone(),
        unload_start: curve.markers.get(1).map(|m| m.start),
    };
    ds.validate()?;
    Ok(ds)
}

/// Recipe for a simulated creep/recovery record with multiplicative noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub params: MaterialParams,
    /// Pa
    pub stress: f64,
    pub t_load: f64,
    pub t_unload: f64,
    pub n_load: usize,
    pub n_unload: usize,
    /// Standard deviation of the relative noise.
    pub noise: f64,
    pub seed: u64,
    pub creep: CreepOptions,
}

impl SyntheticSpec {
    /// 50 load and 20 unload points over `t_load` and `t_unload`, noise-free.
    pub fn new(params: MaterialParams, stress: f64, t_load: f64, t_unload: f64) -> Self {
        Self {
            params,
            stress,
            t_load,
            t_unload,
            n_load: 50,
            n_unload: 20,
            noise: 0.0,
            seed: 0,
            creep: CreepOptions::default(),
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Evenly spaced samples of a simulated test, both phases including `t_u`,
/// each strain multiplied by `1 + noise·N(0, 1)`.
pub fn synthetic_dataset(spec: &SyntheticSpec) -> Result<ExperimentalDataset, DataError> {
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(DataError::Params(format!(
            "noise level {} is invalid",
            spec.noise
        )));
    }
    let mut segs = vec![CreepSegment::new(spec.stress, spec.t_load)?];
    if spec.n_unload > 0 {
        segs.push(CreepSegment::new(0.0, spec.t_unload)?);
    }
    let sol = simulate_creep(&segs, &spec.params, &spec.creep)?;
    let normal =
        Normal::new(0.0, spec.noise.max(0.0)).map_err(|e| DataError::Params(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut noisy = |e: f64| {
        if spec.noise > 0.0 {
            e * (1.0 + normal.sample(&mut rng))
        } else {
            e
        }
    };
    let tu = spec.t_load;
    let mut load = Vec::with_capacity(spec.n_load);
    for t in linspace(0.0, tu, spec.n_load) {
        let e = sol
            .strain_in_segment(0, t)
            .expect("sample inside load segment");
        load.push((t, noisy(e)));
    }
    let mut unload = Vec::with_capacity(spec.n_unload);
    for t in linspace(tu, tu + spec.t_unload, spec.n_unload) {
        let e = sol
            .strain_in_segment(1, t)
            .expect("sample inside unload segment");
        unload.push((t, noisy(e)));
    }
    let ds = ExperimentalDataset {
        load,
        unload,
        stress: spec.stress,
        temperature_c: None,
        provenance: format!(
            "synthetic: mu_p={:e} mu_g={:e} eta={:e} noise={} seed={}",
            spec.params.mu_p_bar, spec.params.mu_g_bar, spec.params.eta, spec.noise, spec.seed
        ),
        unload_start: (spec.n_unload > 0).then_some(tu),
    };
    ds.validate()?;
    Ok(ds)
}

/// Parameters from JSON `{"mu_p_bar": .., "mu_g_bar": .., "eta": .., "thermal": {..}}`.
pub fn parse_params(text: &str) -> Result<MaterialParams, DataError> {
    let mp: MaterialParams = serde_json::from_str(text).map_err(|e| DataError::Parse {
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    mp.validate()
        .map_err(|e| DataError::Params(e.to_string()))?;
    Ok(mp)
}

pub fn load_params(path: impl AsRef<Path>) -> Result<MaterialParams, DataError> {
    let path = path.as_ref();
    parse_params(&fs::read_to_string(path).map_err(io_err(path))?)
}

pub fn write_json<T: serde::Serialize>(value: &T, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| DataError::Params(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub const SVG_WIDTH: f64 = 800.0;
pub const SVG_HEIGHT: f64 = 600.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const PLOT_LEFT: f64 = 90.0;
const PLOT_RIGHT: f64 = 780.0;
const PLOT_TOP: f64 = 20.0;
const PLOT_BOTTOM: f64 = 540.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let half = 0.5 * lo.abs().max(1e-3);
        (lo - half, hi + half)
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-2..1e5).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

/// Line plot of strain against time: one polyline per curve, shared axes.
pub fn render_svg(curves: &[CreepCurve]) -> Result<String, DataError> {
    let pts = curves
        .iter()
        .flat_map(|c| c.samples.iter())
        .filter(|s| s.t.is_finite() && s.strain.is_finite());
    let (mut t0, mut t1, mut e0, mut e1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for s in pts {
        t0 = t0.min(s.t);
        t1 = t1.max(s.t);
        e0 = e0.min(s.strain);
        e1 = e1.max(s.strain);
    }
    if curves.is_empty() || !t0.is_finite() {
        return Err(DataError::EmptyPlot);
    }
    let (t0, t1) = padded(t0, t1);
    let (e0, e1) = padded(e0, e1);
    let x = |t: f64| PLOT_LEFT + (t - t0) / (t1 - t0) * (PLOT_RIGHT - PLOT_LEFT);
    let y = |e: f64| PLOT_BOTTOM - (e - e0) / (e1 - e0) * (PLOT_BOTTOM - PLOT_TOP);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>"#
    );
    // axes: the time axis sits on strain = 0 when it is in view
    let base = if e0 <= 0.0 && e1 >= 0.0 {
        y(0.0)
    } else {
        PLOT_BOTTOM
    };
    let _ = writeln!(
        svg,
        r#"<line x1="{PLOT_LEFT}" y1="{base:.2}" x2="{PLOT_RIGHT}" y2="{base:.2}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{PLOT_LEFT}" y1="{PLOT_TOP}" x2="{PLOT_LEFT}" y2="{PLOT_BOTTOM}" stroke="black"/>"#
    );
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let (tv, ev) = (t0 + f * (t1 - t0), e0 + f * (e1 - e0));
        let (tx, ey) = (x(tv), y(ev));
        let _ = writeln!(
            svg,
            r#"<line x1="{tx:.2}" y1="{PLOT_BOTTOM}" x2="{tx:.2}" y2="{:.2}" stroke="black"/><text x="{tx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            PLOT_BOTTOM + 5.0,
            PLOT_BOTTOM + 20.0,
            tick_label(tv)
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{ey:.2}" x2="{PLOT_LEFT}" y2="{ey:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            PLOT_LEFT - 5.0,
            PLOT_LEFT - 8.0,
            ey + 4.0,
            tick_label(ev)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">time (s)</text>"#,
        0.5 * (PLOT_LEFT + PLOT_RIGHT),
        SVG_HEIGHT - 20.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">strain</text>"#,
        0.5 * (PLOT_TOP + PLOT_BOTTOM),
        0.5 * (PLOT_TOP + PLOT_BOTTOM)
    );

    for (k, c) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = c
            .samples
            .iter()
            .filter(|s| s.t.is_finite() && s.strain.is_finite())
            .map(|s| format!("{:.2},{:.2}", x(s.t), y(s.strain)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
    }
    let _ = writeln!(svg, r#"<g class="legend">"#);
    for (k, c) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let ly = PLOT_TOP + 15.0 + 18.0 * k as f64;
        let label = if c.label.is_empty() {
            format!("curve {}", k + 1)
        } else {
            escape(&c.label)
        };
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{label}</text>"#,
            PLOT_RIGHT - 180.0,
            PLOT_RIGHT - 155.0,
            PLOT_RIGHT - 150.0,
            ly + 4.0
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    Ok(svg)
}
