//! Config-driven analysis runs and resolution sweeps.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::balls::{doubling_report, BallScope, DoublingReport};
use crate::error::{Error, Result};
use crate::generators::{GeneratorKind, GeneratorSpec};
use crate::holes::{
    dyadic_exponent, hole_doubling_constant, lemma33_constant, BallRef, HoleDoublingReport, Lemma33Report,
};
use crate::io::load_augmented_space;
use crate::msdist::{delta_space, ms_distance, sandwich_holds, MsParams};
use crate::muckenhoupt::{
    a1_constant, decay_profile, distance_weight, obstacle_mesh, theoretical_constants, A1Report, DecayConstants,
    DecayInputs,
};
use crate::porosity::{certify_porosity, CertifyOptions, PorosityReport, PorosityStatus};
use crate::report::format_f64;
use crate::space::{equivalence_constants, validate_quasi_metric, AugmentedSpace};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Section {
    Constants,
    Holes,
    Porosity,
    A1,
    Decay,
}

impl Section {
    pub fn name(self) -> &'static str {
        match self {
            Section::Constants => "constants",
            Section::Holes => "holes",
            Section::Porosity => "porosity",
            Section::A1 => "a1",
            Section::Decay => "decay",
        }
    }
}

fn all_sections() -> Vec<Section> {
    vec![Section::Constants, Section::Holes, Section::Porosity, Section::A1, Section::Decay]
}

fn default_k_max() -> u32 {
    60
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    #[serde(default = "default_k_max")]
    pub k_max: u32,
    /// Chain parameters; derived from `K` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ms: Option<MsParams>,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig { k_max: default_k_max(), ms: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space_file: Option<PathBuf>,
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default = "all_sections")]
    pub sections: Vec<Section>,
    #[serde(default)]
    pub scope: BallScope,
    /// Scope of the porosity scan; `scope` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub porosity_scope: Option<BallScope>,
    #[serde(default)]
    pub decay: DecayConfig,
}

impl PipelineConfig {
    pub fn from_generator(generator: GeneratorSpec) -> Self {
        PipelineConfig {
            generator: Some(generator),
            space_file: None,
            alphas: Vec::new(),
            sigma: None,
            gamma: None,
            sections: all_sections(),
            scope: BallScope::Exhaustive,
            porosity_scope: None,
            decay: DecayConfig::default(),
        }
    }

    /// Parses JSON or TOML (by extension). Relative paths are resolved
    /// against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = parse_config(path, &text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(f) = &mut cfg.space_file {
            *f = base.join(&*f);
        }
        if let Some(GeneratorSpec { kind: GeneratorKind::File { path: f }, .. }) = &mut cfg.generator {
            *f = base.join(&*f);
        }
        Ok(cfg)
    }

    pub fn build_space(&self) -> Result<AugmentedSpace> {
        match (&self.generator, &self.space_file) {
            (Some(g), None) => g.build(),
            (None, Some(p)) => load_augmented_space(p),
            (Some(_), Some(_)) => Err(Error::Config("give either generator or space_file, not both".into())),
            (None, None) => Err(Error::Config("config names neither a generator nor a space_file".into())),
        }
    }

    fn sigma_gamma(&self, section: Section) -> Result<(f64, f64)> {
        match (self.sigma, self.gamma) {
            (Some(s), Some(g)) => Ok((s, g)),
            _ => Err(Error::Config(format!("section {} needs sigma and gamma", section.name()))),
        }
    }

    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

pub(crate) fn parse_config<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T> {
    let toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    if toml {
        toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    } else {
        serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceSummary {
    pub n_sample: usize,
    pub n_obstacles: usize,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "A")]
    pub a: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsSection {
    pub doubling: DoublingReport,
    pub diameter: f64,
    pub min_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolesSection {
    pub doubling: HoleDoublingReport,
    pub lemma33: Lemma33Report,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct A1Entry {
    pub alpha: f64,
    pub report: A1Report,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub k: u32,
    pub epsilon: f64,
    pub measure: f64,
    /// `q^k mu(B)`.
    pub bound: f64,
    /// `epsilon >= 10 * mesh`.
    pub above_mesh: bool,
    pub holds: bool,
}

/// Decay of obstacle neighbourhoods measured with the chain distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySection {
    pub beta: f64,
    pub sandwich: bool,
    pub c1: f64,
    pub c2: f64,
    pub m: i32,
    #[serde(rename = "C_d_E")]
    pub c_d_e: f64,
    pub constants: DecayConstants,
    pub ball: BallRef,
    pub mesh: f64,
    pub ball_measure: f64,
    pub steps: Vec<DecayRow>,
    /// Every step above the mesh floor satisfies its bound.
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub tool_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub summary: SpaceSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holes: Option<HolesSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub porosity: Option<PorosityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<Vec<A1Entry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecaySection>,
    pub provenance: Provenance,
}

impl AnalysisReport {
    pub fn porosity_status(&self) -> Option<PorosityStatus> {
        self.porosity.as_ref().map(|p| p.status)
    }

    /// Two-column `quantity,value` table of the headline numbers.
    pub fn summary_csv(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![
            ("n_sample".into(), self.summary.n_sample.to_string()),
            ("n_obstacles".into(), self.summary.n_obstacles.to_string()),
            ("K".into(), format_f64(self.summary.k)),
            ("A".into(), format_f64(self.summary.a)),
        ];
        if let Some(h) = &self.holes {
            rows.push(("C_d_E".into(), format_f64(h.doubling.c)));
            rows.push(("C0".into(), format_f64(h.lemma33.c0)));
        }
        if let Some(p) = &self.porosity {
            rows.push(("porosity_status".into(), status_name(p.status).into()));
            rows.push(("porosity_min_fraction".into(), format_f64(p.min_fraction)));
        }
        for e in self.a1.iter().flatten() {
            rows.push((format!("a1_alpha_{}", format_f64(e.alpha)), format_f64(e.report.constant)));
        }
        if let Some(d) = &self.decay {
            rows.push(("p".into(), format_f64(d.constants.p)));
            rows.push(("q".into(), format_f64(d.constants.q)));
            rows.push(("alpha_star".into(), format_f64(d.constants.alpha_star)));
            rows.push(("decay_holds".into(), d.holds.to_string()));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["quantity", "value"]).expect("in-memory CSV");
        for (k, v) in rows {
            w.write_record([k, v]).expect("in-memory CSV");
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("CSV is UTF-8")
    }
}

pub fn status_name(s: PorosityStatus) -> &'static str {
    match s {
        PorosityStatus::Certified => "certified",
        PorosityStatus::NotCertified => "not-certified",
        PorosityStatus::Disproved => "disproved",
    }
}

fn in_section<T>(s: Section, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Section { section: s.name().into(), source: Box::new(e) })
}

/// Runs the configured sections in the order constants, holes, porosity,
/// a1, decay.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<AnalysisReport> {
    let space = cfg.build_space()?;
    run_pipeline_on(cfg, &space)
}

pub fn run_pipeline_on(cfg: &PipelineConfig, space: &AugmentedSpace) -> Result<AnalysisReport> {
    let k = validate_quasi_metric(space)?;
    let doubling = doubling_report(space, cfg.scope);
    let mut sections = cfg.sections.clone();
    sections.sort();
    sections.dedup();

    let mut report = AnalysisReport {
        summary: SpaceSummary { n_sample: space.n_sample(), n_obstacles: space.n_obstacles(), k, a: doubling.a },
        constants: None,
        holes: None,
        porosity: None,
        a1: None,
        decay: None,
        provenance: Provenance { config_hash: cfg.hash(), tool_version: TOOL_VERSION.into() },
    };
    let certify_opts =
        CertifyOptions { scope: cfg.porosity_scope.unwrap_or(cfg.scope), detail_limit: 0, ..CertifyOptions::default() };

    for s in sections {
        match s {
            Section::Constants => {
                report.constants = Some(ConstantsSection {
                    doubling,
                    diameter: space.sample_diameter(),
                    min_gap: space.min_sample_gap(),
                })
            }
            Section::Holes => {
                let h = in_section(s, holes_section(space, cfg.scope))?;
                report.holes = Some(h);
            }
            Section::Porosity => {
                let (sigma, gamma) = cfg.sigma_gamma(s)?;
                let p = in_section(s, certify_porosity(space, sigma, gamma, &certify_opts))?;
                report.porosity = Some(p);
            }
            Section::A1 => {
                if cfg.alphas.is_empty() {
                    return Err(Error::Config("section a1 needs a non-empty alphas list".into()));
                }
                let entries = in_section(
                    s,
                    cfg.alphas
                        .iter()
                        .map(|&alpha| {
                            let w = distance_weight(space, alpha)?;
                            Ok(A1Entry { alpha, report: a1_constant(space, &w, cfg.scope, 0)? })
                        })
                        .collect::<Result<Vec<_>>>(),
                )?;
                report.a1 = Some(entries);
            }
            Section::Decay => {
                let (sigma, gamma) = cfg.sigma_gamma(s)?;
                let cert = match &report.porosity {
                    Some(p) => p.clone(),
                    None => in_section(s, certify_porosity(space, sigma, gamma, &certify_opts))?,
                };
                if cert.status != PorosityStatus::Certified {
                    return Err(Error::Section {
                        section: s.name().into(),
                        source: Box::new(Error::Config(format!(
                            "the decay chain needs a porosity certificate; ({sigma}, {gamma}) is {}",
                            status_name(cert.status)
                        ))),
                    });
                }
                let c_d_e = match &report.holes {
                    Some(h) => h.doubling.c,
                    None => in_section(s, hole_doubling_constant(space, cfg.scope))?.c,
                };
                let d = in_section(s, decay_chain(space, sigma, gamma, doubling.a, c_d_e, &cfg.decay, cfg.scope))?;
                report.decay = Some(d);
            }
        }
    }
    Ok(report)
}

fn holes_section(space: &AugmentedSpace, scope: BallScope) -> Result<HolesSection> {
    Ok(HolesSection { doubling: hole_doubling_constant(space, scope)?, lemma33: lemma33_constant(space, scope)? })
}

/// Porosity constants transferred from `d` to an equivalent distance with
/// constants `(c1, c2)`: `(sigma / (A_new A_d)^m, c1 gamma / (c2 C_d^m))`
/// with `2^(m-1) < c2/c1 <= 2^m`.
pub fn transfer_porosity(sigma: f64, gamma: f64, c1: f64, c2: f64, a_d: f64, a_new: f64, c_d_e: f64) -> (f64, f64) {
    let m = dyadic_exponent(c2 / c1);
    (sigma / (a_new * a_d).powi(m), c1 * gamma / (c2 * c_d_e.powi(m)))
}

/// From a `(sigma, gamma)` certificate on `d`: build the chain distance,
/// transfer the constants, derive `(p, q)` and measure the decay on the
/// whole space as one ball.
pub fn decay_chain(
    space: &AugmentedSpace,
    sigma: f64,
    gamma: f64,
    a_d: f64,
    c_d_e: f64,
    cfg: &DecayConfig,
    scope: BallScope,
) -> Result<DecaySection> {
    let params = match cfg.ms {
        Some(p) => p,
        None => MsParams::default_for(space)?,
    };
    let ms = ms_distance(space, &params)?;
    let sandwich = sandwich_holds(space, &ms)?;
    let dspace = delta_space(space, &ms)?;
    let (c1, c2) = equivalence_constants(&space.to_table(), &dspace.to_table())?;
    let a_delta = doubling_report(&dspace, scope).a;
    let c_delta_e = hole_doubling_constant(&dspace, scope)?.c;
    let (sigma0, gamma0) = transfer_porosity(sigma, gamma, c1, c2, a_d, a_delta, c_d_e);
    let constants = theoretical_constants(DecayInputs {
        sigma0,
        gamma0,
        k_delta: ms.k_delta_bound,
        a_delta,
        c_delta_e,
        beta: ms.beta,
    })?;
    let ball = BallRef { center: dspace.id(0), radius: dspace.full_radius() };
    let mesh = obstacle_mesh(&dspace, ball)?;
    let ball_measure = dspace.total_measure();
    let steps: Vec<DecayRow> = decay_profile(&dspace, ball, constants.p, cfg.k_max)?
        .into_iter()
        .map(|st| {
            let bound = constants.q.powi(st.k as i32) * ball_measure;
            let above_mesh = st.epsilon >= 10.0 * mesh;
            DecayRow {
                k: st.k,
                epsilon: st.epsilon,
                measure: st.measure,
                bound,
                above_mesh,
                holds: st.measure <= bound * (1.0 + 1e-12),
            }
        })
        .collect();
    let holds = steps.iter().filter(|r| r.above_mesh).all(|r| r.holds);
    Ok(DecaySection {
        beta: ms.beta,
        sandwich,
        c1,
        c2,
        m: dyadic_exponent(c2 / c1),
        c_d_e,
        constants,
        ball,
        mesh,
        ball_measure,
        steps,
        holds,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub generator: GeneratorSpec,
    pub alphas: Vec<f64>,
    pub depths: Vec<u32>,
    /// Report the largest certified sigma at this gamma.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub scope: BallScope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub porosity_scope: Option<BallScope>,
}

impl SweepConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        parse_config(path, &text)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub depth: u32,
    pub n_sample: usize,
    pub n_obstacles: usize,
    /// A1 constant per alpha, in config order.
    pub a1: Vec<f64>,
    #[serde(rename = "C_d_E")]
    pub hole_c: f64,
    pub hole_violations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTrends {
    /// `a1_ratios[j][i]`: depth `i+1` over depth `i` at `alphas[j]`.
    pub a1_ratios: Vec<Vec<f64>>,
    pub hole_c_ratios: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_sigma_ratios: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub alphas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub rows: Vec<SweepRow>,
    pub trends: SweepTrends,
}

fn ratios(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[1] / w[0]).collect()
}

/// Rebuilds the space at each depth and tabulates the A1 constants, the
/// hole doubling constant and the best certified sigma.
pub fn resolution_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    if cfg.depths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("depths must be strictly increasing".into()));
    }
    let mut rows = Vec::with_capacity(cfg.depths.len());
    for &depth in &cfg.depths {
        let space = cfg.generator.at_depth(depth)?.build()?;
        let a1 = cfg
            .alphas
            .iter()
            .map(|&alpha| Ok(a1_constant(&space, &distance_weight(&space, alpha)?, cfg.scope, 0)?.constant))
            .collect::<Result<Vec<_>>>()?;
        let holes = hole_doubling_constant(&space, cfg.scope)?;
        let best_sigma = match cfg.gamma {
            Some(gamma) => {
                let opts = CertifyOptions {
                    scope: cfg.porosity_scope.unwrap_or(cfg.scope),
                    detail_limit: 0,
                    failure_limit: 0,
                };
                Some(certify_porosity(&space, f64::MIN_POSITIVE, gamma, &opts)?.min_fraction)
            }
            None => None,
        };
        rows.push(SweepRow {
            depth,
            n_sample: space.n_sample(),
            n_obstacles: space.n_obstacles(),
            a1,
            hole_c: holes.c,
            hole_violations: holes.violation_count,
            best_sigma,
        });
    }
    let trends = SweepTrends {
        a1_ratios: (0..cfg.alphas.len()).map(|j| ratios(&rows.iter().map(|r| r.a1[j]).collect::<Vec<_>>())).collect(),
        hole_c_ratios: ratios(&rows.iter().map(|r| r.hole_c).collect::<Vec<_>>()),
        best_sigma_ratios: cfg
            .gamma
            .map(|_| ratios(&rows.iter().map(|r| r.best_sigma.unwrap_or(f64::NAN)).collect::<Vec<_>>())),
    };
    Ok(SweepReport { alphas: cfg.alphas.clone(), gamma: cfg.gamma, rows, trends })
}

impl SweepReport {
    /// One row per depth with values and ratios to the previous depth.
    pub fn trend_csv(&self) -> String {
        let mut header = vec!["depth".to_string(), "n_sample".into(), "n_obstacles".into()];
        for a in &self.alphas {
            header.push(format!("a1_alpha_{}", format_f64(*a)));
            header.push(format!("a1_alpha_{}_ratio", format_f64(*a)));
        }
        header.extend(["C_d_E".into(), "C_d_E_ratio".into(), "hole_violations".into()]);
        if self.gamma.is_some() {
            header.extend(["best_sigma".into(), "best_sigma_ratio".into()]);
        }
        let ratio = |v: &[f64], i: usize| if i == 0 { String::new() } else { format_f64(v[i - 1]) };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&header).expect("in-memory CSV");
        for (i, r) in self.rows.iter().enumerate() {
            let mut rec = vec![r.depth.to_string(), r.n_sample.to_string(), r.n_obstacles.to_string()];
            for (j, a) in r.a1.iter().enumerate() {
                rec.push(format_f64(*a));
                rec.push(ratio(&self.trends.a1_ratios[j], i));
            }
            rec.push(format_f64(r.hole_c));
            rec.push(ratio(&self.trends.hole_c_ratios, i));
            rec.push(r.hole_violations.to_string());
            if let Some(sr) = &self.trends.best_sigma_ratios {
                rec.push(r.best_sigma.map(format_f64).unwrap_or_default());
                rec.push(ratio(sr, i));
            }
            w.write_record(&rec).expect("in-memory CSV");
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("CSV is UTF-8")
    }
}
