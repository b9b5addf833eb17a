//! Replicated experiment execution from a declarative config file.
//!
//! A config names a scenario (a built-in preset or a directory of dumped
//! matrices), a clusterer, and a list of methods to compare. The runner
//! realizes one scenario per replication, executes every method on the same
//! realization, and reports per-step metrics plus a per-method summary.
//! Everything is deterministic given the base seed: replication r draws its
//! scenario from one derived stream and its clustering decisions from
//! another, so methods within a run see identical data.

use crate::assignment::ClusterAssignment;
use crate::baselines::{BaselineKind, BaselineTracker};
use crate::boids::{boids_run, BoidsConfig, BoidsEvent};
use crate::cluster::{
    HierarchicalClusterer, KSelection, KmeansClusterer, Linkage, SpectralClusterer,
    SpectralVariant, StaticClusterer,
};
use crate::error::{Error, Result};
use crate::eval::{mse, rand_index};
use crate::gmm::{gmm_run, oracle_alpha_series, DynamicGmmConfig, GmmEvent, MeanWalk};
use crate::io;
use crate::proximity::{ProximityKind, ProximityMatrix};
use crate::tracking::{affect_step, InitPolicy, SmoothedState};
use crate::util::derive_seed;
use ndarray::Array2;
use rayon::prelude::*;
use serde::Deserialize;
use std::fs;
use std::path::{Path, PathBuf};

/// Top-level run configuration, usually loaded from a TOML file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    /// Method strings: `affect`, `static`, `oracle`, `constant:<a>`,
    /// `pcq:<a>`. Defaults to `["affect", "static"]`.
    #[serde(default)]
    pub methods: Option<Vec<String>>,
    /// Defaults to the scenario preset's published pairing.
    #[serde(default)]
    pub clusterer: Option<ClustererConfig>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    /// Refinement passes per step for the adaptive method.
    #[serde(default)]
    pub iterations: Option<usize>,
    /// Starting assignment for the adaptive refinement loop: `static`
    /// (default, re-cluster the raw observation so membership changes show
    /// up in the first moment estimate) or `previous` (carry the last
    /// step's assignment).
    #[serde(default)]
    pub init: Option<String>,
    #[serde(default)]
    pub out: Option<String>,
    /// Also write each replication's realized scenario under the output
    /// directory for later replay.
    #[serde(default)]
    pub dump_scenario: bool,
}

fn default_runs() -> usize {
    1
}

/// Scenario source plus optional overrides of preset parameters.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// One of `well-separated`, `colliding`, `boids-fixed`,
    /// `boids-variable`.
    #[serde(default)]
    pub preset: Option<String>,
    /// Directory of `step_NNNN.csv` files, either flat or as written by the
    /// scenario dump.
    #[serde(default)]
    pub csv_dir: Option<String>,
    /// Proximity kind for `csv_dir`: `similarity` or `dissimilarity`.
    #[serde(default)]
    pub kind: Option<String>,
    /// Object count override for the mixture presets; boid count override
    /// (split evenly over flocks) for the boids presets.
    #[serde(default)]
    pub n: Option<usize>,
    /// Number of observations to generate.
    #[serde(default)]
    pub steps: Option<usize>,
    /// Boids presets: `distance` or `gaussian` observations.
    #[serde(default)]
    pub proximity: Option<String>,
    /// Scale of the Gaussian observation kernel.
    #[serde(default)]
    pub rho: Option<f64>,
    /// Distance between neighboring flock home cubes at setup.
    #[serde(default)]
    pub flock_spacing: Option<f64>,
}

/// Which clustering family runs inside every method.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClustererConfig {
    /// `kmeans`, `hierarchical`, or `spectral`.
    pub kind: String,
    /// Hierarchical only: `single`, `complete`, or `average`.
    #[serde(default)]
    pub linkage: Option<String>,
    /// Spectral only: `average-association`, `ratio-cut`, `normalized-cut`.
    #[serde(default)]
    pub variant: Option<String>,
    #[serde(default)]
    pub k: Option<usize>,
    /// Spectral only: modularity selection over `k_min..=k_max`.
    #[serde(default)]
    pub k_min: Option<usize>,
    #[serde(default)]
    pub k_max: Option<usize>,
}

/// Reads and parses a TOML config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text)
        .map_err(|e| Error::BadConfig(format!("{}: {e}", path.display())))
}

/// The directory reports are written to.
pub fn output_dir(config: &RunConfig) -> PathBuf {
    config
        .out
        .clone()
        .unwrap_or_else(|| "results".to_string())
        .into()
}

/// One comparison method named in the config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodSpec {
    /// Adaptive smoothing with the estimated forgetting factor.
    Affect,
    /// Smoothing driven by the true moments; needs a scenario that knows
    /// them.
    Oracle,
    Baseline(BaselineKind),
}

impl MethodSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if let Some(rest) = text.strip_prefix("constant:") {
            return Ok(MethodSpec::Baseline(BaselineKind::ConstantAlpha(
                parse_factor(rest, text)?,
            )));
        }
        if let Some(rest) = text.strip_prefix("pcq:") {
            return Ok(MethodSpec::Baseline(BaselineKind::Pcq(parse_factor(
                rest, text,
            )?)));
        }
        match text {
            "affect" => Ok(MethodSpec::Affect),
            "oracle" => Ok(MethodSpec::Oracle),
            "static" => Ok(MethodSpec::Baseline(BaselineKind::Static)),
            other => Err(Error::BadConfig(format!(
                "unknown method {other:?}; expected affect, oracle, static, constant:<a>, or pcq:<a>"
            ))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            MethodSpec::Affect => "affect".to_string(),
            MethodSpec::Oracle => "oracle".to_string(),
            MethodSpec::Baseline(kind) => kind.label(),
        }
    }
}

fn parse_factor(text: &str, whole: &str) -> Result<f64> {
    let value: f64 = text
        .trim()
        .parse()
        .map_err(|_| Error::BadConfig(format!("method {whole:?} has a malformed factor")))?;
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::BadConfig(format!(
            "method {whole:?} needs a factor in [0, 1]"
        )));
    }
    Ok(value)
}

/// A fully validated experiment plan.
#[derive(Debug, Clone)]
pub struct Experiment {
    scenario: ScenarioPlan,
    methods: Vec<MethodSpec>,
    clusterer: ClustererPlan,
    runs: usize,
    seed: u64,
    iterations: usize,
    init_policy: InitPolicy,
    dump_to: Option<PathBuf>,
}

#[derive(Debug, Clone)]
enum ScenarioPlan {
    Gmm(DynamicGmmConfig),
    Boids {
        config: BoidsConfig,
        proximity: BoidsProximity,
    },
    CsvDir {
        dir: PathBuf,
        kind: ProximityKind,
    },
}

#[derive(Debug, Clone, Copy)]
enum BoidsProximity {
    Distance,
    Gaussian { rho: f64 },
}

#[derive(Debug, Clone, Copy)]
enum ClustererPlan {
    Kmeans { k: usize },
    Hierarchical { linkage: Linkage, k: usize },
    Spectral { variant: SpectralVariant, k: KSelection },
}

impl ClustererPlan {
    fn build(&self) -> Box<dyn StaticClusterer> {
        match *self {
            ClustererPlan::Kmeans { k } => Box::new(KmeansClusterer::new(k)),
            ClustererPlan::Hierarchical { linkage, k } => {
                Box::new(HierarchicalClusterer { linkage, k })
            }
            ClustererPlan::Spectral { variant, k } => {
                Box::new(SpectralClusterer { variant, k })
            }
        }
    }
}

fn eye2(scale: f64) -> Array2<f64> {
    Array2::eye(2) * scale
}

fn well_separated_preset(n: usize, steps: usize) -> DynamicGmmConfig {
    DynamicGmmConfig {
        means: vec![vec![4.0, 0.0], vec![-4.0, 0.0]],
        covariances: vec![eye2(0.1), eye2(0.1)],
        proportions: vec![0.5, 0.5],
        n,
        steps,
        walk: MeanWalk::RandomSteps {
            dimension: 0,
            step: 0.1,
        },
        events: vec![
            GmmEvent::SetCovariance {
                t: 19,
                cluster: 0,
                covariance: eye2(0.3),
            },
            GmmEvent::SetCovariance {
                t: 19,
                cluster: 1,
                covariance: eye2(0.3),
            },
        ],
    }
}

fn colliding_preset(n: usize, steps: usize) -> DynamicGmmConfig {
    DynamicGmmConfig {
        means: vec![vec![3.0, 3.0], vec![-3.0, -3.0]],
        covariances: vec![eye2(1.0), eye2(1.0)],
        proportions: vec![0.5, 0.5],
        n,
        steps,
        walk: MeanWalk::Linear {
            cluster: 1,
            velocity: vec![0.4, 0.4],
            from_t: 1,
            to_t: 10,
        },
        events: vec![
            GmmEvent::SetProportions {
                t: 10,
                proportions: vec![0.625, 0.375],
            },
            GmmEvent::SetProportions {
                t: 11,
                proportions: vec![0.75, 0.25],
            },
        ],
    }
}

fn boids_preset(scenario: &ScenarioConfig, variable: bool) -> Result<BoidsConfig> {
    let mut config = BoidsConfig::default();
    if let Some(n) = scenario.n {
        if n == 0 || n % config.flocks != 0 {
            return Err(Error::BadConfig(format!(
                "boid count {n} does not split evenly over {} flocks",
                config.flocks
            )));
        }
        config.boids_per_flock = n / config.flocks;
    }
    if let Some(steps) = scenario.steps {
        config.steps = steps;
    }
    if let Some(spacing) = scenario.flock_spacing {
        config.flock_spacing = spacing;
    }
    if variable {
        config.events = vec![
            BoidsEvent::Scatter { t: 17 },
            BoidsEvent::Regroup { t: 19, flocks: 2 },
        ];
    }
    Ok(config)
}

fn parse_kind(text: &str) -> Result<ProximityKind> {
    match text {
        "similarity" => Ok(ProximityKind::Similarity),
        "dissimilarity" => Ok(ProximityKind::Dissimilarity),
        other => Err(Error::BadConfig(format!(
            "unknown proximity kind {other:?}; expected similarity or dissimilarity"
        ))),
    }
}

fn parse_linkage(text: &str) -> Result<Linkage> {
    match text {
        "single" => Ok(Linkage::Single),
        "complete" => Ok(Linkage::Complete),
        "average" => Ok(Linkage::Average),
        other => Err(Error::BadConfig(format!(
            "unknown linkage {other:?}; expected single, complete, or average"
        ))),
    }
}

fn parse_variant(text: &str) -> Result<SpectralVariant> {
    match text {
        "average-association" => Ok(SpectralVariant::AverageAssociation),
        "ratio-cut" => Ok(SpectralVariant::RatioCut),
        "normalized-cut" => Ok(SpectralVariant::NormalizedCut),
        other => Err(Error::BadConfig(format!(
            "unknown spectral variant {other:?}; expected average-association, ratio-cut, or normalized-cut"
        ))),
    }
}

/// What a preset supplies when the config leaves a knob unset.
struct PresetDefaults {
    clusterer: Option<ClustererPlan>,
    iterations: usize,
}

fn resolve_clusterer(config: &ClustererConfig) -> Result<ClustererPlan> {
    let selection = match (config.k, config.k_min, config.k_max) {
        (Some(k), None, None) => KSelection::Fixed(k),
        (None, Some(lo), Some(hi)) => KSelection::Modularity { lo, hi },
        (None, None, None) => {
            return Err(Error::BadConfig(
                "clusterer needs k, or k_min and k_max".into(),
            ))
        }
        _ => {
            return Err(Error::BadConfig(
                "clusterer takes either k or the k_min/k_max pair, not a mix".into(),
            ))
        }
    };
    match config.kind.as_str() {
        "kmeans" => {
            if config.linkage.is_some() || config.variant.is_some() {
                return Err(Error::BadConfig(
                    "linkage and variant do not apply to kmeans".into(),
                ));
            }
            match selection {
                KSelection::Fixed(k) => Ok(ClustererPlan::Kmeans { k }),
                KSelection::Modularity { .. } => Err(Error::BadConfig(
                    "modularity selection is only available for spectral clustering".into(),
                )),
            }
        }
        "hierarchical" => {
            if config.variant.is_some() {
                return Err(Error::BadConfig(
                    "variant does not apply to hierarchical clustering".into(),
                ));
            }
            let linkage = parse_linkage(config.linkage.as_deref().unwrap_or("complete"))?;
            match selection {
                KSelection::Fixed(k) => Ok(ClustererPlan::Hierarchical { linkage, k }),
                KSelection::Modularity { .. } => Err(Error::BadConfig(
                    "modularity selection is only available for spectral clustering".into(),
                )),
            }
        }
        "spectral" => {
            if config.linkage.is_some() {
                return Err(Error::BadConfig(
                    "linkage does not apply to spectral clustering".into(),
                ));
            }
            let variant = parse_variant(config.variant.as_deref().unwrap_or("normalized-cut"))?;
            Ok(ClustererPlan::Spectral {
                variant,
                k: selection,
            })
        }
        other => Err(Error::BadConfig(format!(
            "unknown clusterer kind {other:?}; expected kmeans, hierarchical, or spectral"
        ))),
    }
}

impl RunConfig {
    /// Validates the config and fills preset defaults.
    pub fn resolve(&self) -> Result<Experiment> {
        if self.runs == 0 {
            return Err(Error::BadConfig("runs must be at least 1".into()));
        }
        let scenario = &self.scenario;
        let gmm_knobs_unused = |name: &str| -> Result<()> {
            if scenario.proximity.is_some() || scenario.rho.is_some()
                || scenario.flock_spacing.is_some()
            {
                return Err(Error::BadConfig(format!(
                    "proximity, rho, and flock_spacing do not apply to the {name} scenario"
                )));
            }
            Ok(())
        };

        let (plan, defaults) = match (&scenario.preset, &scenario.csv_dir) {
            (Some(_), Some(_)) => {
                return Err(Error::BadConfig(
                    "scenario takes either a preset or a csv_dir, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::BadConfig(
                    "scenario needs a preset or a csv_dir".into(),
                ))
            }
            (Some(preset), None) => {
                if scenario.kind.is_some() {
                    return Err(Error::BadConfig(
                        "kind only applies to csv_dir scenarios".into(),
                    ));
                }
                match preset.as_str() {
                    "well-separated" => {
                        gmm_knobs_unused("well-separated")?;
                        let plan = ScenarioPlan::Gmm(well_separated_preset(
                            scenario.n.unwrap_or(40),
                            scenario.steps.unwrap_or(41),
                        ));
                        (
                            plan,
                            PresetDefaults {
                                clusterer: Some(ClustererPlan::Kmeans { k: 2 }),
                                iterations: 1,
                            },
                        )
                    }
                    "colliding" => {
                        gmm_knobs_unused("colliding")?;
                        let plan = ScenarioPlan::Gmm(colliding_preset(
                            scenario.n.unwrap_or(40),
                            scenario.steps.unwrap_or(19),
                        ));
                        (
                            plan,
                            PresetDefaults {
                                clusterer: Some(ClustererPlan::Kmeans { k: 2 }),
                                iterations: 3,
                            },
                        )
                    }
                    "boids-fixed" => {
                        let config = boids_preset(scenario, false)?;
                        let flocks = config.flocks;
                        let proximity = match scenario.proximity.as_deref() {
                            None | Some("distance") => {
                                if scenario.rho.is_some() {
                                    return Err(Error::BadConfig(
                                        "rho only applies to gaussian observations".into(),
                                    ));
                                }
                                BoidsProximity::Distance
                            }
                            Some("gaussian") => BoidsProximity::Gaussian {
                                rho: scenario.rho.unwrap_or(30.0),
                            },
                            Some(other) => {
                                return Err(Error::BadConfig(format!(
                                    "unknown proximity {other:?}; expected distance or gaussian"
                                )))
                            }
                        };
                        (
                            ScenarioPlan::Boids { config, proximity },
                            PresetDefaults {
                                clusterer: Some(ClustererPlan::Hierarchical {
                                    linkage: Linkage::Complete,
                                    k: flocks,
                                }),
                                iterations: 3,
                            },
                        )
                    }
                    "boids-variable" => {
                        let config = boids_preset(scenario, true)?;
                        let proximity = match scenario.proximity.as_deref() {
                            None | Some("gaussian") => BoidsProximity::Gaussian {
                                rho: scenario.rho.unwrap_or(30.0),
                            },
                            Some("distance") => BoidsProximity::Distance,
                            Some(other) => {
                                return Err(Error::BadConfig(format!(
                                    "unknown proximity {other:?}; expected distance or gaussian"
                                )))
                            }
                        };
                        (
                            ScenarioPlan::Boids { config, proximity },
                            PresetDefaults {
                                clusterer: Some(ClustererPlan::Spectral {
                                    variant: SpectralVariant::NormalizedCut,
                                    k: KSelection::Modularity { lo: 1, hi: 8 },
                                }),
                                iterations: 3,
                            },
                        )
                    }
                    other => {
                        return Err(Error::BadConfig(format!(
                            "unknown preset {other:?}; expected well-separated, colliding, boids-fixed, or boids-variable"
                        )))
                    }
                }
            }
            (None, Some(dir)) => {
                gmm_knobs_unused("csv_dir")?;
                if scenario.n.is_some() || scenario.steps.is_some() {
                    return Err(Error::BadConfig(
                        "n and steps do not apply to csv_dir scenarios".into(),
                    ));
                }
                let kind = parse_kind(scenario.kind.as_deref().ok_or_else(|| {
                    Error::BadConfig("csv_dir scenarios need an explicit kind".into())
                })?)?;
                (
                    ScenarioPlan::CsvDir {
                        dir: dir.into(),
                        kind,
                    },
                    PresetDefaults {
                        clusterer: None,
                        iterations: 3,
                    },
                )
            }
        };

        let clusterer = match &self.clusterer {
            Some(config) => resolve_clusterer(config)?,
            None => defaults.clusterer.ok_or_else(|| {
                Error::BadConfig("csv_dir scenarios need an explicit clusterer".into())
            })?,
        };

        let method_names = self
            .methods
            .clone()
            .unwrap_or_else(|| vec!["affect".to_string(), "static".to_string()]);
        if method_names.is_empty() {
            return Err(Error::BadConfig("methods must not be empty".into()));
        }
        let methods: Vec<MethodSpec> = method_names
            .iter()
            .map(|m| MethodSpec::parse(m))
            .collect::<Result<_>>()?;
        for (i, spec) in methods.iter().enumerate() {
            if methods[..i].iter().any(|m| m.label() == spec.label()) {
                return Err(Error::BadConfig(format!(
                    "method {:?} is listed twice",
                    spec.label()
                )));
            }
        }

        let iterations = self.iterations.unwrap_or(defaults.iterations);
        if iterations == 0 {
            return Err(Error::BadConfig("iterations must be at least 1".into()));
        }
        let init_policy = match self.init.as_deref() {
            None | Some("static") => InitPolicy::Static,
            Some("previous") => InitPolicy::Previous,
            Some(other) => {
                return Err(Error::BadConfig(format!(
                    "unknown init policy {other:?}; expected previous or static"
                )))
            }
        };

        Ok(Experiment {
            scenario: plan,
            methods,
            clusterer,
            runs: self.runs,
            seed: self.seed,
            iterations,
            init_policy,
            dump_to: self.dump_scenario.then(|| output_dir(self)),
        })
    }
}

/// One observation step together with whatever ground truth the scenario
/// knows.
#[derive(Debug, Clone)]
pub struct ScenarioStep {
    pub observation: ProximityMatrix,
    pub truth: Option<ClusterAssignment>,
    /// Entrywise expectation of the observation, when the generator knows
    /// it.
    pub oracle_mean: Option<ProximityMatrix>,
    /// Entrywise variance of the observation, when the generator knows it.
    pub oracle_var: Option<Array2<f64>>,
}

fn realize(plan: &ScenarioPlan, seed: u64) -> Result<Vec<ScenarioStep>> {
    match plan {
        ScenarioPlan::Gmm(config) => Ok(gmm_run(config, seed)?
            .into_iter()
            .map(|step| ScenarioStep {
                observation: step.similarity,
                truth: Some(step.memberships),
                oracle_mean: Some(step.oracle_psi),
                oracle_var: Some(step.oracle_var),
            })
            .collect()),
        ScenarioPlan::Boids { config, proximity } => boids_run(config, seed)?
            .into_iter()
            .map(|step| {
                let ids = step.memberships.ids().to_vec();
                let observation = match proximity {
                    BoidsProximity::Distance => {
                        ProximityMatrix::euclidean_distances(&step.positions, ids)?
                    }
                    BoidsProximity::Gaussian { rho } => {
                        ProximityMatrix::gaussian_similarity(&step.positions, *rho, ids)?
                    }
                };
                Ok(ScenarioStep {
                    observation,
                    truth: Some(step.memberships),
                    oracle_mean: None,
                    oracle_var: None,
                })
            })
            .collect(),
        ScenarioPlan::CsvDir { dir, kind } => load_scenario(dir, *kind),
    }
}

/// Writes a realized scenario as replayable CSV directories: `steps/` plus
/// `truth_labels/`, `truth_psi/`, and `truth_var/` for whatever ground truth
/// is present.
pub fn dump_scenario(dir: &Path, steps: &[ScenarioStep]) -> Result<()> {
    fs::create_dir_all(dir.join("steps"))?;
    for (t, step) in steps.iter().enumerate() {
        let name = io::step_file_name(t);
        io::write_proximity_csv(&dir.join("steps").join(&name), &step.observation)?;
        if let Some(truth) = &step.truth {
            let sub = dir.join("truth_labels");
            fs::create_dir_all(&sub)?;
            io::write_labels_csv(&sub.join(&name), truth)?;
        }
        if let Some(mean) = &step.oracle_mean {
            let sub = dir.join("truth_psi");
            fs::create_dir_all(&sub)?;
            io::write_proximity_csv(&sub.join(&name), mean)?;
        }
        if let Some(var) = &step.oracle_var {
            let sub = dir.join("truth_var");
            fs::create_dir_all(&sub)?;
            io::write_matrix_csv(&sub.join(&name), var, step.observation.ids())?;
        }
    }
    Ok(())
}

/// Reads a scenario back from disk. A directory with a `steps/` child is
/// treated as a dump (ground-truth directories are optional); anything else
/// is read as a flat directory of observations with no ground truth.
pub fn load_scenario(dir: &Path, kind: ProximityKind) -> Result<Vec<ScenarioStep>> {
    let steps_dir = dir.join("steps");
    let flat = !steps_dir.is_dir();
    let observations = io::ingest_dir(if flat { dir } else { &steps_dir }, kind)?;

    let mut steps: Vec<ScenarioStep> = observations
        .into_iter()
        .map(|observation| ScenarioStep {
            observation,
            truth: None,
            oracle_mean: None,
            oracle_var: None,
        })
        .collect();
    if flat {
        return Ok(steps);
    }

    let expected_len = steps.len();
    let check_len = move |what: &str, len: usize| -> Result<()> {
        if len != expected_len {
            return Err(Error::BadConfig(format!(
                "{what} holds {len} files but steps holds {expected_len}"
            )));
        }
        Ok(())
    };
    fn check_ids(what: &str, t: usize, ids: &[String], expected: &[String]) -> Result<()> {
        if ids != expected {
            return Err(Error::BadConfig(format!(
                "{what} step {t} names different objects than its observation"
            )));
        }
        Ok(())
    }

    let labels_dir = dir.join("truth_labels");
    if labels_dir.is_dir() {
        let files = io::step_files(&labels_dir)?;
        check_len("truth_labels", files.len())?;
        for (t, file) in files.iter().enumerate() {
            let truth = io::read_labels_csv(file)?;
            check_ids("truth_labels", t, truth.ids(), steps[t].observation.ids())?;
            steps[t].truth = Some(truth);
        }
    }
    let psi_dir = dir.join("truth_psi");
    if psi_dir.is_dir() {
        let files = io::step_files(&psi_dir)?;
        check_len("truth_psi", files.len())?;
        for (t, file) in files.iter().enumerate() {
            let mean = io::read_proximity_csv(file, kind)?;
            check_ids("truth_psi", t, mean.ids(), steps[t].observation.ids())?;
            steps[t].oracle_mean = Some(mean);
        }
    }
    let var_dir = dir.join("truth_var");
    if var_dir.is_dir() {
        let files = io::step_files(&var_dir)?;
        check_len("truth_var", files.len())?;
        for (t, file) in files.iter().enumerate() {
            let (var, ids) = io::read_matrix_csv(file)?;
            check_ids("truth_var", t, &ids, steps[t].observation.ids())?;
            steps[t].oracle_var = Some(var);
        }
    }
    Ok(steps)
}

/// Everything recorded about one method at one step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: usize,
    /// Blend factor applied this step; absent at the first step and for the
    /// static method.
    pub alpha: Option<f64>,
    /// Per-refinement-pass factor estimates (adaptive method only).
    pub alpha_trace: Vec<f64>,
    /// Occupied clusters in the produced assignment.
    pub k: Option<usize>,
    pub rand: Option<f64>,
    /// Mean squared error of the clustered matrix against the true
    /// expectation.
    pub mse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: String,
    pub records: Vec<StepRecord>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub run: usize,
    /// Seed the scenario realization was drawn from.
    pub seed: u64,
    pub methods: Vec<MethodRun>,
}

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub method: String,
    /// Mean over runs of the per-run mean Rand index.
    pub mean_rand: Option<f64>,
    /// Standard error of that mean across runs.
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub runs: Vec<RunResult>,
    pub summary: Vec<SummaryRow>,
}

fn eval_rand(assignment: &ClusterAssignment, step: &ScenarioStep) -> Result<Option<f64>> {
    match &step.truth {
        Some(truth) => Ok(Some(rand_index(assignment, truth)?)),
        None => Ok(None),
    }
}

fn eval_mse(matrix: &Array2<f64>, step: &ScenarioStep) -> Result<Option<f64>> {
    match &step.oracle_mean {
        Some(mean) => Ok(Some(mse(matrix, mean.values())?)),
        None => Ok(None),
    }
}

fn run_affect(
    scenario: &[ScenarioStep],
    clusterer: &dyn StaticClusterer,
    iterations: usize,
    init_policy: InitPolicy,
    seed: u64,
) -> Result<MethodRun> {
    let mut state: Option<SmoothedState> = None;
    let mut init: Option<ClusterAssignment> = None;
    let mut records = Vec::with_capacity(scenario.len());
    for (t, step) in scenario.iter().enumerate() {
        let step_seed = derive_seed(seed, t as u64);
        let outcome = match affect_step(
            state.as_ref(),
            &step.observation,
            clusterer,
            init.as_ref(),
            init_policy,
            iterations,
            step_seed,
        ) {
            // No object survived: restart the tracker on this observation.
            Err(Error::EmptyIntersection) => affect_step(
                None,
                &step.observation,
                clusterer,
                None,
                init_policy,
                iterations,
                step_seed,
            )?,
            other => other?,
        };
        let alpha_trace: Vec<f64> = outcome.estimates.iter().map(|e| e.alpha).collect();
        records.push(StepRecord {
            t,
            alpha: alpha_trace.last().copied(),
            alpha_trace,
            k: Some(outcome.assignment.occupied_clusters()),
            rand: eval_rand(&outcome.assignment, step)?,
            mse: eval_mse(outcome.state.psi_hat.values(), step)?,
        });
        init = Some(outcome.assignment);
        state = Some(outcome.state);
    }
    Ok(MethodRun {
        method: MethodSpec::Affect.label(),
        records,
    })
}

fn run_comparison(
    kind: BaselineKind,
    scenario: &[ScenarioStep],
    clusterer: &dyn StaticClusterer,
    seed: u64,
) -> Result<MethodRun> {
    let mut tracker = BaselineTracker::new(kind)?;
    let mut records = Vec::with_capacity(scenario.len());
    for (t, step) in scenario.iter().enumerate() {
        let matrix = match tracker.step(&step.observation) {
            Err(Error::EmptyIntersection) => {
                tracker.reset();
                tracker.step(&step.observation)?
            }
            other => other?,
        };
        let assignment = clusterer.cluster(&matrix, None, derive_seed(seed, t as u64))?;
        records.push(StepRecord {
            t,
            alpha: if t == 0 { None } else { kind.alpha() },
            alpha_trace: Vec::new(),
            k: Some(assignment.occupied_clusters()),
            rand: eval_rand(&assignment, step)?,
            mse: eval_mse(matrix.values(), step)?,
        });
    }
    Ok(MethodRun {
        method: kind.label(),
        records,
    })
}

fn run_oracle(scenario: &[ScenarioStep]) -> Result<MethodRun> {
    let observed: Vec<&ProximityMatrix> = scenario.iter().map(|s| &s.observation).collect();
    let mean: Vec<&ProximityMatrix> = scenario
        .iter()
        .map(|s| {
            s.oracle_mean.as_ref().ok_or_else(|| {
                Error::BadConfig("the oracle method needs a scenario with true moments".into())
            })
        })
        .collect::<Result<_>>()?;
    let var: Vec<&Array2<f64>> = scenario
        .iter()
        .map(|s| {
            s.oracle_var.as_ref().ok_or_else(|| {
                Error::BadConfig("the oracle method needs a scenario with true moments".into())
            })
        })
        .collect::<Result<_>>()?;
    let oracle = oracle_alpha_series(&observed, &mean, &var)?;
    let records = (0..scenario.len())
        .map(|t| StepRecord {
            t,
            alpha: if t == 0 {
                None
            } else {
                Some(oracle.alphas[t - 1])
            },
            alpha_trace: Vec::new(),
            k: None,
            rand: None,
            mse: Some(oracle.mse[t]),
        })
        .collect();
    Ok(MethodRun {
        method: MethodSpec::Oracle.label(),
        records,
    })
}

fn summarize(methods: &[MethodSpec], runs: &[RunResult]) -> Vec<SummaryRow> {
    methods
        .iter()
        .enumerate()
        .map(|(m, spec)| {
            let per_run: Vec<f64> = runs
                .iter()
                .filter_map(|run| {
                    let values: Vec<f64> = run.methods[m]
                        .records
                        .iter()
                        .filter_map(|rec| rec.rand)
                        .collect();
                    if values.is_empty() {
                        None
                    } else {
                        Some(values.iter().sum::<f64>() / values.len() as f64)
                    }
                })
                .collect();
            if per_run.is_empty() {
                return SummaryRow {
                    method: spec.label(),
                    mean_rand: None,
                    std_error: None,
                };
            }
            let n = per_run.len() as f64;
            let mean = per_run.iter().sum::<f64>() / n;
            let std_error = if per_run.len() < 2 {
                0.0
            } else {
                let var = per_run.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / (n - 1.0);
                (var / n).sqrt()
            };
            SummaryRow {
                method: spec.label(),
                mean_rand: Some(mean),
                std_error: Some(std_error),
            }
        })
        .collect()
}

/// Executes every replication and method named by the config.
///
/// Replications run in parallel; each draws its scenario and its clustering
/// seeds from streams derived from the base seed, so results are identical
/// however the work is scheduled.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentResult> {
    let experiment = config.resolve()?;
    let runs: Vec<RunResult> = (0..experiment.runs)
        .into_par_iter()
        .map(|run| {
            let scenario_seed = derive_seed(experiment.seed, 2 * run as u64);
            let clustering_seed = derive_seed(experiment.seed, 2 * run as u64 + 1);
            let scenario = realize(&experiment.scenario, scenario_seed)?;
            if let Some(out) = &experiment.dump_to {
                dump_scenario(&out.join(format!("scenario_run_{run:04}")), &scenario)?;
            }
            let clusterer = experiment.clusterer.build();
            let mut methods = Vec::with_capacity(experiment.methods.len());
            for (m, spec) in experiment.methods.iter().enumerate() {
                let method_seed = derive_seed(clustering_seed, m as u64);
                methods.push(match spec {
                    MethodSpec::Affect => run_affect(
                        &scenario,
                        clusterer.as_ref(),
                        experiment.iterations,
                        experiment.init_policy,
                        method_seed,
                    )?,
                    MethodSpec::Oracle => run_oracle(&scenario)?,
                    MethodSpec::Baseline(kind) => {
                        run_comparison(*kind, &scenario, clusterer.as_ref(), method_seed)?
                    }
                });
            }
            Ok(RunResult {
                run,
                seed: scenario_seed,
                methods,
            })
        })
        .collect::<Result<_>>()?;
    let summary = summarize(&experiment.methods, &runs);
    Ok(ExperimentResult { runs, summary })
}

fn opt_field(value: Option<f64>) -> String {
    value.map(|v| format!("{v}")).unwrap_or_default()
}

/// Writes `metrics.csv`, `alpha.csv`, and `summary.csv` into `dir`.
pub fn write_reports(result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;

    let mut metrics = csv::Writer::from_path(dir.join("metrics.csv"))?;
    metrics.write_record(["run", "seed", "t", "method", "alpha", "k", "rand", "mse"])?;
    for run in &result.runs {
        for method in &run.methods {
            for rec in &method.records {
                metrics.write_record([
                    run.run.to_string(),
                    run.seed.to_string(),
                    rec.t.to_string(),
                    method.method.clone(),
                    opt_field(rec.alpha),
                    rec.k.map(|k| k.to_string()).unwrap_or_default(),
                    opt_field(rec.rand),
                    opt_field(rec.mse),
                ])?;
            }
        }
    }
    metrics.flush().map_err(Error::Io)?;

    let mut alphas = csv::Writer::from_path(dir.join("alpha.csv"))?;
    alphas.write_record(["run", "t", "iteration", "alpha"])?;
    for run in &result.runs {
        for method in &run.methods {
            if method.method != "affect" {
                continue;
            }
            for rec in &method.records {
                for (i, a) in rec.alpha_trace.iter().enumerate() {
                    alphas.write_record([
                        run.run.to_string(),
                        rec.t.to_string(),
                        (i + 1).to_string(),
                        format!("{a}"),
                    ])?;
                }
            }
        }
    }
    alphas.flush().map_err(Error::Io)?;

    let mut summary = csv::Writer::from_path(dir.join("summary.csv"))?;
    summary.write_record(["method", "mean_rand", "std_error"])?;
    for row in &result.summary {
        summary.write_record([
            row.method.clone(),
            opt_field(row.mean_rand),
            opt_field(row.std_error),
        ])?;
    }
    summary.flush().map_err(Error::Io)?;
    Ok(())
}
