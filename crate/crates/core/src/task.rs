//! Prediction tasks and their label/output conventions.

use std::fmt;
use std::str::FromStr;

use crate::capture::ObjectLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Task {
    /// Hand-to-object distance in mm.
    Distance,
    /// Time until grasp in ms.
    Time,
    /// Both regression targets from one network: `[distance_mm, time_ms]`.
    DistanceTime,
    /// Identity among the 7 real objects.
    RealObject,
    /// Identity among the 9 synthetic solids.
    SyntheticObject,
    /// Synthetic object size (small, medium, large).
    Size,
    /// Synthetic object shape (sphere, box, cylinder).
    Shape,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::Distance,
        Task::Time,
        Task::DistanceTime,
        Task::RealObject,
        Task::SyntheticObject,
        Task::Size,
        Task::Shape,
    ];

    pub fn id(self) -> u32 {
        self as u32
    }

    pub fn from_id(id: u32) -> Option<Task> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Distance => "distance",
            Task::Time => "time",
            Task::DistanceTime => "distance+time",
            Task::RealObject => "object-real",
            Task::SyntheticObject => "object-synthetic",
            Task::Size => "size",
            Task::Shape => "shape",
        }
    }

    pub fn is_classification(self) -> bool {
        !matches!(self, Task::Distance | Task::Time | Task::DistanceTime)
    }

    /// Width of the output layer.
    pub fn outputs(self) -> usize {
        match self {
            Task::Distance | Task::Time => 1,
            Task::DistanceTime => 2,
            Task::RealObject => 7,
            Task::SyntheticObject => 9,
            Task::Size | Task::Shape => 3,
        }
    }

    /// Hidden size used by the reference recipe.
    pub fn default_hidden(self) -> usize {
        if self.is_classification() {
            128
        } else {
            64
        }
    }

    /// Class index of `object` for classification tasks, `None` when the
    /// object does not belong to the task's label set.
    pub fn class_of(self, object: &ObjectLabel) -> Option<usize> {
        match self {
            Task::RealObject if object.is_real() => Some(object.object_class()),
            Task::SyntheticObject if !object.is_real() => Some(object.object_class()),
            Task::Size => object.size_class(),
            Task::Shape => object.shape_class(),
            _ => None,
        }
    }

    /// Whether a recording of `object` contributes labels to this task.
    pub fn accepts(self, object: &ObjectLabel) -> bool {
        !self.is_classification() || self.class_of(object).is_some()
    }

    pub fn class_names(self) -> Vec<String> {
        match self {
            Task::RealObject => ObjectLabel::all_real().iter().map(|o| o.to_string()).collect(),
            Task::SyntheticObject => ObjectLabel::all_synthetic()
                .iter()
                .map(|o| o.to_string())
                .collect(),
            Task::Size => ["small", "medium", "large"].map(String::from).to_vec(),
            Task::Shape => ["sphere", "box", "cylinder"].map(String::from).to_vec(),
            _ => Vec::new(),
        }
    }

    /// Names of the regression outputs, in output order.
    pub fn target_names(self) -> &'static [&'static str] {
        match self {
            Task::Distance => &["distance_mm"],
            Task::Time => &["time_ms"],
            Task::DistanceTime => &["distance_mm", "time_ms"],
            _ => &[],
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        let alias = match s.as_str() {
            "merged" | "distance-time" | "distance_time" => Some(Task::DistanceTime),
            "real" | "object_real" => Some(Task::RealObject),
            "synthetic" | "object_synthetic" => Some(Task::SyntheticObject),
            _ => None,
        };
        alias
            .or_else(|| Self::ALL.into_iter().find(|t| t.name() == s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown task `{s}`")))
    }
}
