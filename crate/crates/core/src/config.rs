//! Tunable parameters for every stage, grouped the way they are stored in
//! `config.json`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tabletop simulator settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub width: usize,
    pub height: usize,
    pub n_objects: usize,
    pub n_pushes: usize,
    /// Push length in pixels.
    pub push_distance: f64,
    /// Sub-step length used while executing a push.
    pub push_step: f64,
    /// Rotation noise half-width (radians) applied to moved objects.
    pub rotation_noise: f64,
    /// Surface gap range used when packing the initial cluster.
    pub init_gap_min: f64,
    pub init_gap_max: f64,
    /// Object extents (full side length or diameter), pixels.
    pub min_extent: f64,
    pub max_extent: f64,
    /// Object footprint area range, square pixels.
    pub min_area: f64,
    pub max_area: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            width: 256,
            height: 256,
            n_objects: 5,
            n_pushes: 20,
            push_distance: 25.0,
            push_step: 1.0,
            rotation_noise: 0.1,
            init_gap_min: 0.0,
            init_gap_max: 2.0,
            min_extent: 8.0,
            max_extent: 40.0,
            min_area: 200.0,
            max_area: 600.0,
        }
    }
}

impl SimConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.width < 16 || self.height < 16 {
            return Err(Error::invalid("sim.width", "workspace must be at least 16x16"));
        }
        if self.width > u16::MAX as usize || self.height > u16::MAX as usize {
            return Err(Error::invalid("sim.width", "workspace too large"));
        }
        if self.n_objects == 0 || self.n_objects > u16::MAX as usize {
            return Err(Error::invalid("sim.n_objects", "must be in 1..=65535"));
        }
        positive("sim.push_distance", self.push_distance)?;
        positive("sim.push_step", self.push_step)?;
        non_negative("sim.rotation_noise", self.rotation_noise)?;
        non_negative("sim.init_gap_min", self.init_gap_min)?;
        if !(self.init_gap_max >= self.init_gap_min) {
            return Err(Error::invalid("sim.init_gap_max", "must be >= init_gap_min"));
        }
        positive("sim.min_extent", self.min_extent)?;
        if !(self.max_extent >= self.min_extent) {
            return Err(Error::invalid("sim.max_extent", "must be >= min_extent"));
        }
        positive("sim.min_area", self.min_area)?;
        if !(self.max_area >= self.min_area) {
            return Err(Error::invalid("sim.max_area", "must be >= min_area"));
        }
        let (lo, hi) = (
            self.min_extent * self.min_extent,
            self.max_extent * self.max_extent,
        );
        if self.max_area < lo || self.min_area > hi {
            return Err(Error::invalid(
                "sim.min_area",
                "area range is unreachable with the extent range",
            ));
        }
        Ok(())
    }

    pub fn center(&self) -> crate::Vec2 {
        crate::Vec2::new(self.width as f64 / 2.0, self.height as f64 / 2.0)
    }
}

/// The under-segmenting stand-in for the pre-trained segmentation network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterConfig {
    /// Objects whose pixel gap is smaller than this are merged.
    pub d_merge: u32,
    /// Probability of eroding each output mask by one pixel.
    pub erosion_prob: f64,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            d_merge: 3,
            erosion_prob: 0.0,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<()> {
        ratio("segmenter.erosion_prob", self.erosion_prob)
    }
}

/// Tracking and propagation thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelParams {
    pub tau_assoc: f64,
    pub tau_refine: f64,
    /// Minimum mean flow magnitude (pixels) for a detection to count as pushed.
    pub delta_move: f64,
    /// Seed IoU at which two propagated objects are treated as one.
    pub dedupe_iou: f64,
    /// Fraction of another object's mask that must lie inside a propagated
    /// mask for it to count as contained.
    pub containment: f64,
}

impl Default for LabelParams {
    fn default() -> Self {
        LabelParams {
            tau_assoc: 0.6,
            tau_refine: 0.8,
            delta_move: 1.0,
            dedupe_iou: 0.95,
            containment: 0.9,
        }
    }
}

impl LabelParams {
    pub fn validate(&self) -> Result<()> {
        ratio("label.tau_assoc", self.tau_assoc)?;
        ratio("label.tau_refine", self.tau_refine)?;
        non_negative("label.delta_move", self.delta_move)?;
        ratio("label.dedupe_iou", self.dedupe_iou)?;
        ratio("label.containment", self.containment)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowMode {
    #[default]
    Oracle,
    Blockmatch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockMatchParams {
    pub patch: usize,
    pub search: usize,
}

impl Default for BlockMatchParams {
    fn default() -> Self {
        BlockMatchParams {
            patch: 7,
            search: 31,
        }
    }
}

impl BlockMatchParams {
    pub fn validate(&self) -> Result<()> {
        if self.patch.is_multiple_of(2) {
            return Err(Error::invalid("blockmatch.patch", "must be odd"));
        }
        if self.search == 0 {
            return Err(Error::invalid("blockmatch.search", "must be >= 1"));
        }
        Ok(())
    }
}

/// Parallel-jaw gripper geometry and the table-clearing retry budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraspParams {
    pub max_width: f64,
    pub finger_length: f64,
    pub finger_thickness: f64,
    pub clearance: f64,
    /// Extra attempts allowed per object after a failed grasp.
    pub retry_budget: usize,
}

impl Default for GraspParams {
    fn default() -> Self {
        GraspParams {
            max_width: 60.0,
            finger_length: 20.0,
            finger_thickness: 2.0,
            clearance: 2.0,
            retry_budget: 2,
        }
    }
}

impl GraspParams {
    pub fn validate(&self) -> Result<()> {
        positive("grasp.max_width", self.max_width)?;
        positive("grasp.finger_length", self.finger_length)?;
        positive("grasp.finger_thickness", self.finger_thickness)?;
        non_negative("grasp.clearance", self.clearance)
    }
}

/// Everything needed to generate, label, evaluate and benchmark.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub sim: SimConfig,
    pub segmenter: SegmenterConfig,
    pub label: LabelParams,
    /// Boundary metric tolerance; `None` derives it from the image diagonal.
    pub boundary_tol: Option<usize>,
    pub flow: FlowMode,
    pub blockmatch: BlockMatchParams,
    pub grasp: GraspParams,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.segmenter.validate()?;
        self.label.validate()?;
        self.blockmatch.validate()?;
        self.grasp.validate()
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::invalid(field, "must be a positive finite number"));
    }
    Ok(())
}

fn non_negative(field: &'static str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::invalid(field, "must be a non-negative finite number"));
    }
    Ok(())
}

fn ratio(field: &'static str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::invalid(field, "must lie in [0, 1]"));
    }
    Ok(())
}
