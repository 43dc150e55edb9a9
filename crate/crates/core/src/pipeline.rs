//! Three-stage controller and experiment harness.
//!
//! Stage 1 collects CSI-labeled rasters and trains the classifier while
//! scheduling from CSI for continuity. Stage 2 schedules from classifier
//! predictions alone; stage 3 probes a few users with fresh CSI per slot
//! and requests retraining when the windowed mismatch rate crosses the
//! threshold. The harness compares CSI-driven, stale-CSI and camera-driven
//! scheduling over seeded trials; everything derives from (config, seed).

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};

use crate::channel::{
    best_beam_csi, generate_channel, generate_dft_codebook, ArrayGeometry, Codebook, GainModel,
    UserChannel,
};
use crate::clustering::{
    noma_bb, order_users_sic, BeamAssignment, ClusteringConfig, Schedule, SicOrdering,
};
use crate::error::{Result, SimError};
use crate::noma_phy::{evaluate_schedule, RadioConfig, SystemMetrics};
use crate::predictor::{
    classify_image, init_classifier, train, Architecture, ClassifierParameters, TrainingConfig,
};
use crate::rng::{derive_rng, derive_seed, standard_normal};
use crate::scene::{
    generate_scene, make_training_set, render_user_image, training_snapshot, RenderConfig, Scene,
    SceneConfig, SceneUser,
};
use crate::types::Position;

// Stream tags; distinct purposes must never share a stream.
const TAG_TRAIN_DATA: u64 = 0x01;
const TAG_TRAIN_INIT: u64 = 0x02;
const TAG_TRAIN_SGD: u64 = 0x03;
const TAG_EVAL_SCENE: u64 = 0x04;
const TAG_EVAL_CHAN: u64 = 0x05;
const TAG_EVAL_RENDER: u64 = 0x06;
const TAG_MOTION: u64 = 0x07;
const TAG_SLOT_CHAN: u64 = 0x08;
const TAG_SLOT_RENDER: u64 = 0x09;

/// Which pipeline produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Clustering, ordering and power from current CSI.
    CsiFresh,
    /// Clustering and ordering from CSI captured `staleness` slots ago,
    /// evaluated against current channels.
    CsiStale,
    /// Clustering from classifier predictions on the current camera frame;
    /// no CSI consumed in stage 2.
    Vision,
    /// The vision pipeline with a perfect predictor (best beam from true
    /// CSI); isolates classifier error from pipeline error.
    OracleVision,
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::CsiFresh => "csi_fresh",
            Scheme::CsiStale => "csi_stale",
            Scheme::Vision => "vision",
            Scheme::OracleVision => "oracle_vision",
        }
    }
}

/// Controller phase. Execution and validation run co-active, so validation
/// can only be active while execution is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageState {
    Training,
    ExecutionValidation,
}

impl StageState {
    pub fn execution_active(&self) -> bool {
        matches!(self, StageState::ExecutionValidation)
    }

    pub fn validation_active(&self) -> bool {
        self.execution_active()
    }

    /// Training finishes into co-active execution + validation; a retrain
    /// decision falls back to training.
    pub fn advance(&self, decision: Option<ValidationDecision>) -> StageState {
        match (self, decision) {
            (StageState::Training, _) => StageState::ExecutionValidation,
            (StageState::ExecutionValidation, Some(ValidationDecision::Retrain)) => {
                StageState::Training
            }
            (StageState::ExecutionValidation, _) => StageState::ExecutionValidation,
        }
    }
}

/// Stage-3 probing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationConfig {
    /// Users probed with fresh CSI per slot.
    pub sample_rate: usize,
    /// Sliding-window length in probes.
    pub window: usize,
    /// Retrain once the windowed mismatch rate exceeds this; 1.0 disables
    /// retraining.
    pub error_threshold: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self { sample_rate: 2, window: 50, error_threshold: 0.1 }
    }
}

impl ValidationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(SimError::Domain("validation.sample_rate: must be >= 1".into()));
        }
        if self.window < self.sample_rate {
            return Err(SimError::Domain("validation.window: must be >= sample_rate".into()));
        }
        if !(self.error_threshold > 0.0 && self.error_threshold <= 1.0) {
            return Err(SimError::Domain("validation.error_threshold: must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Per-slot isotropic Gaussian user motion, reflected at the room walls,
/// plus how many slots old the stale-CSI pipeline's channels are.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobilityModel {
    pub step_sigma: f64,
    pub staleness: usize,
}

impl Default for MobilityModel {
    fn default() -> Self {
        Self { step_sigma: 0.2, staleness: 4 }
    }
}

impl MobilityModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_sigma >= 0.0) {
            return Err(SimError::Domain("mobility.step_sigma: must be >= 0".into()));
        }
        Ok(())
    }
}

/// Everything one trial needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub geometry: ArrayGeometry,
    pub beam_count: usize,
    pub gain: GainModel,
    pub scene: SceneConfig,
    pub render: RenderConfig,
    pub hidden_layers: Vec<usize>,
    pub training: TrainingConfig,
    pub n_train: usize,
    pub clustering: ClusteringConfig,
    pub radio: RadioConfig,
    pub validation: ValidationConfig,
    pub mobility: MobilityModel,
    /// Frames simulated by the mobility scenario.
    pub slots: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            geometry: ArrayGeometry::default(),
            beam_count: 64,
            gain: GainModel::default(),
            scene: SceneConfig::default(),
            render: RenderConfig::default(),
            hidden_layers: vec![128],
            training: TrainingConfig::default(),
            n_train: 100,
            clustering: ClusteringConfig::default(),
            radio: RadioConfig::default(),
            validation: ValidationConfig::default(),
            mobility: MobilityModel::default(),
            slots: 30,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.gain.validate()?;
        self.scene.validate()?;
        self.render.validate()?;
        self.training.validate()?;
        self.clustering.validate()?;
        self.radio.validate()?;
        self.validation.validate()?;
        self.mobility.validate()?;
        if self.beam_count == 0 {
            return Err(SimError::Domain("beam_count: must be >= 1".into()));
        }
        if self.n_train == 0 {
            return Err(SimError::Domain("n_train: must be >= 1".into()));
        }
        if self.slots == 0 {
            return Err(SimError::Domain("slots: must be >= 1".into()));
        }
        if self.hidden_layers.contains(&0) {
            return Err(SimError::Domain("hidden_layers: widths must be >= 1".into()));
        }
        Ok(())
    }

    fn architecture(&self) -> Architecture {
        Architecture {
            input: self.render.width * self.render.height,
            hidden: self.hidden_layers.clone(),
            output: self.beam_count,
        }
    }
}

/// One scheme's result in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub scheme: Scheme,
    pub seed: u64,
    pub metrics: SystemMetrics,
    /// Fraction of users assigned their true (fresh-CSI) best beam.
    pub beam_accuracy: f64,
    pub cluster_count: usize,
    pub slot_count: usize,
    /// Snapshot of the configuration that produced this result.
    pub config: PipelineConfig,
}

/// Detailed per-scheme output of a snapshot comparison trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutcome {
    pub scheme: Scheme,
    pub assignment: BeamAssignment,
    pub schedule: Schedule,
    pub metrics: SystemMetrics,
    pub beam_accuracy: f64,
}

/// Channels for every user of a scene, drawn in ascending user-id order.
pub fn channels_for_scene<R: Rng + ?Sized>(
    scene: &Scene,
    geometry: &ArrayGeometry,
    gain: &GainModel,
    rng: &mut R,
) -> Result<BTreeMap<u32, UserChannel>> {
    let mut channels = BTreeMap::new();
    for user in &scene.users {
        channels.insert(
            user.id,
            generate_channel(geometry, gain, user.id, user.position, scene.bs_position, rng)?,
        );
    }
    Ok(channels)
}

/// CSI-based assignment: every user's exhaustive best beam.
pub fn best_beam_assignment(
    channels: &BTreeMap<u32, UserChannel>,
    codebook: &Codebook,
) -> BeamAssignment {
    channels.iter().map(|(&u, ch)| (u, best_beam_csi(ch, codebook))).collect()
}

fn order_schedule(
    schedule: &Schedule,
    mode: SicOrdering,
    channels: &BTreeMap<u32, UserChannel>,
    codebook: &Codebook,
) -> Result<Schedule> {
    let mut slots = Vec::with_capacity(schedule.slots.len());
    for slot in &schedule.slots {
        slots.push(
            slot.iter()
                .map(|c| order_users_sic(c, channels, codebook, mode))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(Schedule { slots })
}

fn train_classifier(
    config: &PipelineConfig,
    samples: &[crate::scene::LabeledSample],
    seed: u64,
) -> Result<ClassifierParameters> {
    let init_seed = derive_seed(seed, &[TAG_TRAIN_INIT, config.training.seed]);
    let params =
        init_classifier(&config.architecture(), config.training.weight_init_scale, init_seed)?;
    let mut training = config.training;
    training.seed = derive_seed(seed, &[TAG_TRAIN_SGD, config.training.seed]);
    train(params, samples, &training)
}

/// One stage-1 snapshot the system served while collecting data.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Slot {
    pub scene: Scene,
    pub channels: BTreeMap<u32, UserChannel>,
    pub schedule: Schedule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Output {
    pub params: ClassifierParameters,
    pub slots: Vec<Stage1Slot>,
}

/// Stage 1: collect `n_train` labeled samples from fresh scenes, train the
/// classifier, and emit the CSI-based schedules served meanwhile.
pub fn run_stage1(config: &PipelineConfig, seed: u64) -> Result<Stage1Output> {
    config.validate()?;
    let codebook = generate_dft_codebook(&config.geometry, config.beam_count)?;
    let mut rng = derive_rng(seed, &[TAG_TRAIN_DATA]);
    let mut samples = Vec::with_capacity(config.n_train);
    let mut slots = Vec::with_capacity(config.n_train);
    for _ in 0..config.n_train {
        let (scene, channels, sample) = training_snapshot(
            &config.scene,
            &config.geometry,
            &config.gain,
            &codebook,
            &config.render,
            &mut rng,
        )?;
        let assignment = best_beam_assignment(&channels, &codebook);
        let schedule = order_schedule(
            &noma_bb(&assignment, &config.clustering)?,
            config.clustering.sic_ordering,
            &channels,
            &codebook,
        )?;
        samples.push(sample);
        slots.push(Stage1Slot { scene, channels, schedule });
    }
    let params = train_classifier(config, &samples, seed)?;
    Ok(Stage1Output { params, slots })
}

/// Stage 2: render every user's single-user image, predict its beam, and
/// cluster from the predicted assignment. Consumes no CSI; the returned
/// schedule is still in ascending-id order within clusters.
pub fn run_stage2<R: Rng + ?Sized>(
    params: &ClassifierParameters,
    scene: &Scene,
    render_config: &RenderConfig,
    clustering_config: &ClusteringConfig,
    rng: &mut R,
) -> Result<(BeamAssignment, Schedule)> {
    let mut assignment = BeamAssignment::new();
    for user in &scene.users {
        let image = render_user_image(scene, user.id, render_config, rng)?;
        assignment.set(user.id, classify_image(params, &image)?);
    }
    let schedule = noma_bb(&assignment, clustering_config)?;
    Ok((assignment, schedule))
}

/// Beam source used by stage-3 probing.
#[derive(Clone, Copy)]
pub enum BeamPredictor<'a> {
    Classifier(&'a ClassifierParameters),
    /// Returns the true CSI-derived best beam; mismatch rate is zero by
    /// definition.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationDecision {
    Continue,
    Retrain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MismatchStats {
    pub probed: usize,
    pub mismatched: usize,
    pub window_len: usize,
    pub window_rate: f64,
}

/// Sliding-window mismatch tracker; the retrain decision is a pure
/// function of the recorded probe outcomes.
#[derive(Debug, Clone)]
pub struct Stage3Validator {
    config: ValidationConfig,
    window: VecDeque<bool>,
}

impl Stage3Validator {
    pub fn new(config: ValidationConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, window: VecDeque::new() })
    }

    pub fn record(&mut self, mismatch: bool) {
        self.window.push_back(mismatch);
        while self.window.len() > self.config.window {
            self.window.pop_front();
        }
    }

    pub fn window_rate(&self) -> f64 {
        if self.window.is_empty() {
            return 0.0;
        }
        self.window.iter().filter(|&&m| m).count() as f64 / self.window.len() as f64
    }

    pub fn decision(&self) -> ValidationDecision {
        if self.window_rate() > self.config.error_threshold {
            ValidationDecision::Retrain
        } else {
            ValidationDecision::Continue
        }
    }
}

/// Stage 3 for one slot: probe `sample_rate` uniformly chosen users,
/// compare the predicted beam with the best beam from a freshly drawn
/// channel, and fold the outcomes into the validator window.
pub fn run_stage3_validate<R: Rng + ?Sized>(
    validator: &mut Stage3Validator,
    predictor: BeamPredictor<'_>,
    scene: &Scene,
    geometry: &ArrayGeometry,
    gain: &GainModel,
    codebook: &Codebook,
    render_config: &RenderConfig,
    rng: &mut R,
) -> Result<(ValidationDecision, MismatchStats)> {
    let n = scene.users.len();
    let k = validator.config.sample_rate.min(n);
    let picks = rand::seq::index::sample(rng, n, k);
    let mut mismatched = 0;
    for idx in picks.iter() {
        let user = scene.users[idx];
        let fresh = generate_channel(geometry, gain, user.id, user.position, scene.bs_position, rng)?;
        let truth = best_beam_csi(&fresh, codebook);
        let predicted = match predictor {
            BeamPredictor::Classifier(params) => {
                let image = render_user_image(scene, user.id, render_config, rng)?;
                classify_image(params, &image)?
            }
            BeamPredictor::Oracle => truth,
        };
        let mismatch = predicted != truth;
        mismatched += usize::from(mismatch);
        validator.record(mismatch);
    }
    let stats = MismatchStats {
        probed: k,
        mismatched,
        window_len: validator.window.len(),
        window_rate: validator.window_rate(),
    };
    Ok((validator.decision(), stats))
}

fn trial_result(
    config: &PipelineConfig,
    seed: u64,
    outcome: &SchemeOutcome,
) -> TrialResult {
    TrialResult {
        scheme: outcome.scheme,
        seed,
        metrics: outcome.metrics.clone(),
        beam_accuracy: outcome.beam_accuracy,
        cluster_count: outcome.schedule.cluster_count(),
        slot_count: outcome.schedule.depth(),
        config: config.clone(),
    }
}

/// The stage-1 labeled sample stream for (config, seed): `n_train` samples
/// from fresh scenes, exactly what the in-pipeline training consumes.
pub fn stage1_training_set(
    config: &PipelineConfig,
    seed: u64,
) -> Result<Vec<crate::scene::LabeledSample>> {
    config.validate()?;
    let codebook = generate_dft_codebook(&config.geometry, config.beam_count)?;
    let mut rng = derive_rng(seed, &[TAG_TRAIN_DATA]);
    make_training_set(
        &config.scene,
        &config.geometry,
        &config.gain,
        &codebook,
        config.n_train,
        &config.render,
        &mut rng,
    )
}

/// One snapshot trial: a fresh scene population evaluated under the
/// requested schemes. Training runs only if the vision scheme is present;
/// the evaluation snapshot derives from the seed alone, so it is identical
/// across scheme subsets and training budgets.
pub fn comparison_trial(
    config: &PipelineConfig,
    seed: u64,
    schemes: &[Scheme],
) -> Result<Vec<SchemeOutcome>> {
    config.validate()?;
    let codebook = generate_dft_codebook(&config.geometry, config.beam_count)?;

    let params = if schemes.contains(&Scheme::Vision) {
        let samples = stage1_training_set(config, seed)?;
        Some(train_classifier(config, &samples, seed)?)
    } else {
        None
    };

    let scene = generate_scene(&config.scene, &mut derive_rng(seed, &[TAG_EVAL_SCENE]))?;
    let channels =
        channels_for_scene(&scene, &config.geometry, &config.gain, &mut derive_rng(seed, &[TAG_EVAL_CHAN]))?;
    let csi_assignment = best_beam_assignment(&channels, &codebook);

    let mut outcomes = Vec::with_capacity(schemes.len());
    for &scheme in schemes {
        let (assignment, unordered, ordering) = match scheme {
            Scheme::CsiFresh | Scheme::OracleVision => {
                // The oracle predictor reproduces the CSI assignment and,
                // having CSI by definition, orders like the CSI pipeline.
                let schedule = noma_bb(&csi_assignment, &config.clustering)?;
                (csi_assignment.clone(), schedule, config.clustering.sic_ordering)
            }
            Scheme::Vision => {
                let params = params.as_ref().ok_or_else(|| {
                    SimError::Domain("vision scheme requested without training".into())
                })?;
                let mut render_rng = derive_rng(seed, &[TAG_EVAL_RENDER]);
                let (assignment, schedule) =
                    run_stage2(params, &scene, &config.render, &config.clustering, &mut render_rng)?;
                (assignment, schedule, config.clustering.vision_sic_ordering)
            }
            Scheme::CsiStale => {
                return Err(SimError::Domain(
                    "csi_stale is only defined for the mobility scenario".into(),
                ))
            }
        };
        let schedule = order_schedule(&unordered, ordering, &channels, &codebook)?;
        let (metrics, _) = evaluate_schedule(&schedule, &channels, &codebook, &config.radio)?;
        let beam_accuracy = assignment.agreement_with(&csi_assignment);
        outcomes.push(SchemeOutcome { scheme, assignment, schedule, metrics, beam_accuracy });
    }
    Ok(outcomes)
}

/// Snapshot comparison over many seeds.
pub fn run_comparison(
    config: &PipelineConfig,
    seeds: &[u64],
    schemes: &[Scheme],
) -> Result<Vec<TrialResult>> {
    if seeds.is_empty() {
        return Err(SimError::Domain("run_comparison: need at least one seed".into()));
    }
    let mut results = Vec::with_capacity(seeds.len() * schemes.len());
    for &seed in seeds {
        for outcome in comparison_trial(config, seed, schemes)? {
            results.push(trial_result(config, seed, &outcome));
        }
    }
    Ok(results)
}

fn reflect_into(value: f64, limit: f64) -> f64 {
    let period = 2.0 * limit;
    let m = value.rem_euclid(period);
    if m <= limit {
        m
    } else {
        period - m
    }
}

/// Gaussian displacement per user, reflected at the room walls.
pub fn move_users<R: Rng + ?Sized>(
    users: &mut [SceneUser],
    room_width: f64,
    room_depth: f64,
    step_sigma: f64,
    rng: &mut R,
) {
    for user in users.iter_mut() {
        let dx = standard_normal(rng) * step_sigma;
        let dy = standard_normal(rng) * step_sigma;
        user.position = Position::new(
            reflect_into(user.position.x + dx, room_width),
            reflect_into(user.position.y + dy, room_depth),
        );
    }
}

/// Mobility scenario comparing fresh-CSI, stale-CSI and vision scheduling
/// over `config.slots` frames.
///
/// Per frame, users move; fresh CSI schedules from current channels; stale
/// CSI schedules (assignment and SIC order) from channels captured
/// `staleness` frames ago yet is evaluated against current ones; vision
/// schedules from the current camera frame. All random streams are derived
/// from (seed, purpose, frame), so vision results do not depend on the
/// staleness parameter at all.
pub fn run_stale_csi_scenario(config: &PipelineConfig, seed: u64) -> Result<Vec<TrialResult>> {
    config.validate()?;
    let codebook = generate_dft_codebook(&config.geometry, config.beam_count)?;
    let samples = stage1_training_set(config, seed)?;
    let params = train_classifier(config, &samples, seed)?;

    let scene0 = generate_scene(&config.scene, &mut derive_rng(seed, &[TAG_EVAL_SCENE]))?;
    let mut users = scene0.users.clone();
    let mut history: VecDeque<BTreeMap<u32, UserChannel>> = VecDeque::new();

    struct Tally {
        frames: Vec<SystemMetrics>,
        accuracy_sum: f64,
        clusters: usize,
        slots: usize,
    }
    impl Tally {
        fn new() -> Self {
            Self { frames: Vec::new(), accuracy_sum: 0.0, clusters: 0, slots: 0 }
        }
        fn push(&mut self, schedule: &Schedule, metrics: SystemMetrics, accuracy: f64) {
            self.clusters += schedule.cluster_count();
            self.slots += schedule.depth();
            self.accuracy_sum += accuracy;
            self.frames.push(metrics);
        }
    }
    let mut fresh_tally = Tally::new();
    let mut stale_tally = Tally::new();
    let mut vision_tally = Tally::new();

    for t in 0..config.slots {
        if t > 0 {
            let mut motion_rng = derive_rng(seed, &[TAG_MOTION, t as u64]);
            move_users(
                &mut users,
                config.scene.room_width,
                config.scene.room_depth,
                config.mobility.step_sigma,
                &mut motion_rng,
            );
        }
        let scene_t = Scene {
            room_width: config.scene.room_width,
            room_depth: config.scene.room_depth,
            bs_position: config.scene.bs_position,
            users: users.clone(),
        };
        let channels_t = channels_for_scene(
            &scene_t,
            &config.geometry,
            &config.gain,
            &mut derive_rng(seed, &[TAG_SLOT_CHAN, t as u64]),
        )?;
        history.push_back(channels_t.clone());
        while history.len() > config.mobility.staleness + 1 {
            history.pop_front();
        }
        let stale_channels = history.front().expect("history is never empty");

        let fresh_assignment = best_beam_assignment(&channels_t, &codebook);
        let fresh_schedule = order_schedule(
            &noma_bb(&fresh_assignment, &config.clustering)?,
            config.clustering.sic_ordering,
            &channels_t,
            &codebook,
        )?;
        let (fresh_metrics, _) =
            evaluate_schedule(&fresh_schedule, &channels_t, &codebook, &config.radio)?;
        fresh_tally.push(&fresh_schedule, fresh_metrics, 1.0);

        let stale_assignment = best_beam_assignment(stale_channels, &codebook);
        let stale_schedule = order_schedule(
            &noma_bb(&stale_assignment, &config.clustering)?,
            config.clustering.sic_ordering,
            stale_channels,
            &codebook,
        )?;
        let (stale_metrics, _) =
            evaluate_schedule(&stale_schedule, &channels_t, &codebook, &config.radio)?;
        stale_tally.push(
            &stale_schedule,
            stale_metrics,
            stale_assignment.agreement_with(&fresh_assignment),
        );

        let mut render_rng = derive_rng(seed, &[TAG_SLOT_RENDER, t as u64]);
        let (vision_assignment, vision_unordered) =
            run_stage2(&params, &scene_t, &config.render, &config.clustering, &mut render_rng)?;
        let vision_schedule = order_schedule(
            &vision_unordered,
            config.clustering.vision_sic_ordering,
            &channels_t,
            &codebook,
        )?;
        let (vision_metrics, _) =
            evaluate_schedule(&vision_schedule, &channels_t, &codebook, &config.radio)?;
        vision_tally.push(
            &vision_schedule,
            vision_metrics,
            vision_assignment.agreement_with(&fresh_assignment),
        );
    }

    let finish = |scheme: Scheme, tally: Tally| TrialResult {
        scheme,
        seed,
        metrics: SystemMetrics::merge(&tally.frames),
        beam_accuracy: tally.accuracy_sum / config.slots as f64,
        cluster_count: tally.clusters,
        slot_count: tally.slots,
        config: config.clone(),
    };
    Ok(vec![
        finish(Scheme::CsiFresh, fresh_tally),
        finish(Scheme::CsiStale, stale_tally),
        finish(Scheme::Vision, vision_tally),
    ])
}

/// Runs the mobility scenario for every (staleness, seed) pair.
pub fn run_stale_sweep(
    config: &PipelineConfig,
    staleness_values: &[usize],
    seeds: &[u64],
) -> Result<Vec<(usize, TrialResult)>> {
    if seeds.is_empty() || staleness_values.is_empty() {
        return Err(SimError::Domain("run_stale_sweep: empty sweep".into()));
    }
    let mut results = Vec::new();
    for &staleness in staleness_values {
        let mut cfg = config.clone();
        cfg.mobility.staleness = staleness;
        for &seed in seeds {
            for result in run_stale_csi_scenario(&cfg, seed)? {
                results.push((staleness, result));
            }
        }
    }
    Ok(results)
}

/// Mean and standard deviation of spectral efficiency and beam accuracy
/// per scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    pub trials: usize,
    pub mean_avg_se: f64,
    pub std_avg_se: f64,
    pub mean_beam_accuracy: f64,
    pub std_beam_accuracy: f64,
}

pub fn summarize(results: &[TrialResult]) -> Vec<SchemeSummary> {
    let stats = |values: &[f64]| {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
        (mean, var.sqrt())
    };
    [Scheme::CsiFresh, Scheme::CsiStale, Scheme::Vision, Scheme::OracleVision]
        .into_iter()
        .filter_map(|scheme| {
            let se: Vec<f64> = results
                .iter()
                .filter(|r| r.scheme == scheme)
                .map(|r| r.metrics.avg_se)
                .collect();
            if se.is_empty() {
                return None;
            }
            let acc: Vec<f64> = results
                .iter()
                .filter(|r| r.scheme == scheme)
                .map(|r| r.beam_accuracy)
                .collect();
            let (mean_avg_se, std_avg_se) = stats(&se);
            let (mean_beam_accuracy, std_beam_accuracy) = stats(&acc);
            Some(SchemeSummary {
                scheme,
                trials: se.len(),
                mean_avg_se,
                std_avg_se,
                mean_beam_accuracy,
                std_beam_accuracy,
            })
        })
        .collect()
}
