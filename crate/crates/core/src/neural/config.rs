use crate::error::{Error, Result};
use crate::features::FeatureSetId;
use crate::task::Task;

pub const DEFAULT_FC: usize = 16;
pub const DEFAULT_DROPOUT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub task: Task,
    pub feature_set: FeatureSetId,
    pub input_dim: usize,
    pub hidden: usize,
    pub fc: usize,
    pub outputs: usize,
    pub seq_len: usize,
    pub dropout: f64,
}

impl ModelConfig {
    /// Reference architecture for a task: H = 64 (regression) or 128
    /// (classification), FC = 16, dropout 0.2.
    pub fn for_task(task: Task, feature_set: FeatureSetId, seq_len: usize) -> Self {
        ModelConfig {
            task,
            feature_set,
            input_dim: feature_set.dim(),
            hidden: task.default_hidden(),
            fc: DEFAULT_FC,
            outputs: task.outputs(),
            seq_len,
            dropout: DEFAULT_DROPOUT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 || self.fc == 0 || self.seq_len == 0 {
            return Err(Error::InvalidArgument(
                "model dimensions must be positive".into(),
            ));
        }
        if self.outputs != self.task.outputs() {
            return Err(Error::InvalidArgument(format!(
                "task {} needs {} outputs, config has {}",
                self.task,
                self.task.outputs(),
                self.outputs
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument("dropout must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn is_classification(&self) -> bool {
        self.task.is_classification()
    }
}

/// Offsets of the parameter blocks inside one flat vector. Block order
/// matches the model file: W (4H×D), U (4H×H), b (4H), FC weights (F×H),
/// FC bias (F), output weights (O×F), output bias (O). Gate order inside
/// W, U and b is input, forget, candidate, output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub input_dim: usize,
    pub hidden: usize,
    pub fc: usize,
    pub outputs: usize,
}

impl Layout {
    pub fn new(config: &ModelConfig) -> Self {
        Layout {
            input_dim: config.input_dim,
            hidden: config.hidden,
            fc: config.fc,
            outputs: config.outputs,
        }
    }

    /// Lengths of the 16 serialized arrays: W_i, W_f, W_g, W_o, U_i, U_f,
    /// U_g, U_o, b_i, b_f, b_g, b_o, FC_W, FC_b, OUT_W, OUT_b.
    pub fn array_lengths(&self) -> [usize; 16] {
        let (d, h, f, o) = (self.input_dim, self.hidden, self.fc, self.outputs);
        [
            h * d,
            h * d,
            h * d,
            h * d,
            h * h,
            h * h,
            h * h,
            h * h,
            h,
            h,
            h,
            h,
            f * h,
            f,
            o * f,
            o,
        ]
    }

    pub fn w(&self) -> std::ops::Range<usize> {
        0..4 * self.hidden * self.input_dim
    }

    pub fn u(&self) -> std::ops::Range<usize> {
        let start = self.w().end;
        start..start + 4 * self.hidden * self.hidden
    }

    pub fn b(&self) -> std::ops::Range<usize> {
        let start = self.u().end;
        start..start + 4 * self.hidden
    }

    pub fn fc_w(&self) -> std::ops::Range<usize> {
        let start = self.b().end;
        start..start + self.fc * self.hidden
    }

    pub fn fc_b(&self) -> std::ops::Range<usize> {
        let start = self.fc_w().end;
        start..start + self.fc
    }

    pub fn out_w(&self) -> std::ops::Range<usize> {
        let start = self.fc_b().end;
        start..start + self.outputs * self.fc
    }

    pub fn out_b(&self) -> std::ops::Range<usize> {
        let start = self.out_w().end;
        start..start + self.outputs
    }

    pub fn len(&self) -> usize {
        self.out_b().end
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Trainable parameter count: `4(HD + H² + H) + (F·H + F) + (O·F + O)`.
pub fn count_params(config: &ModelConfig) -> usize {
    Layout::new(config).len()
}
