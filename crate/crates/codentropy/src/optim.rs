//! Adam and the mini-batch truncated-BPTT training loop.
//!
//! The stream is cut into `batch_size` contiguous lanes advanced in parallel;
//! each step runs forward/backward over one fixed-length window per lane,
//! averages the lane gradients, clips the global norm and applies one Adam
//! update. Hidden state carries across consecutive windows of the same lane;
//! gradients do not cross window boundaries.
//!
//! Lanes are processed in a fixed number of contiguous groups and group sums
//! are combined in group order, so results are bit-identical regardless of
//! how many worker threads actually run.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lm::TokenId;
use crate::nn::{backward, forward, LstmGradients, LstmParams, LstmState};

/// Fixed lane-group count for deterministic gradient summation.
const LANE_GROUPS: usize = 4;

const LN_2: f64 = std::f64::consts::LN_2;

/// Adam hyperparameters and loop limits.
#[derive(Debug, Clone)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    pub clip_norm: f64,
}

impl AdamConfig {
    pub fn new(max_steps: usize) -> Self {
        Self {
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 128,
            max_steps,
            clip_norm: 5.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(Error::InvalidConfig("alpha must be > 0".into()));
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0 < v && v < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must be in (0, 1)")));
            }
        }
        if !self.eps.is_finite() || self.eps <= 0.0 {
            return Err(Error::InvalidConfig("eps must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be >= 1".into()));
        }
        if !self.clip_norm.is_finite() || self.clip_norm <= 0.0 {
            return Err(Error::InvalidConfig("clip_norm must be > 0".into()));
        }
        Ok(())
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &LstmParams) -> Self {
        Self {
            m: vec![0.0; params.data().len()],
            v: vec![0.0; params.data().len()],
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update: m and v updated with the raw gradient, bias-corrected,
/// then `theta -= alpha * m_hat / (sqrt(v_hat) + eps)`.
#[allow(clippy::needless_range_loop)]
pub fn adam_step(
    params: &mut LstmParams,
    grads: &LstmGradients,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if grads.data().len() != params.data().len() {
        return Err(Error::ShapeMismatch(
            "gradient buffer does not match parameter buffer".into(),
        ));
    }
    if grads.data().iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric {
            context: "gradient entry passed to adam_step".into(),
        });
    }
    state.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
    let data = params.data_mut();
    for j in 0..data.len() {
        let g = grads.data()[j];
        state.m[j] = cfg.beta1 * state.m[j] + (1.0 - cfg.beta1) * g;
        state.v[j] = cfg.beta2 * state.v[j] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[j] / bc1;
        let v_hat = state.v[j] / bc2;
        data[j] -= cfg.alpha * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

/// Scale parameter gradients so their global L2 norm is at most `clip_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut LstmGradients, clip_norm: f64) -> f64 {
    let norm: f64 = grads.data().iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > clip_norm {
        let k = clip_norm / norm;
        for g in grads.data_mut() {
            *g *= k;
        }
    }
    norm
}

/// One training-log record.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogEntry {
    pub step: usize,
    pub tokens_seen: usize,
    pub cross_entropy_bits: f64,
}

/// Per-step mean cross-entropy trace plus any setup warnings.
#[derive(Debug, Clone, Default)]
pub struct TrainingLog {
    pub entries: Vec<TrainLogEntry>,
    pub warnings: Vec<String>,
}

impl TrainingLog {
    pub fn final_cross_entropy_bits(&self) -> Option<f64> {
        self.entries.last().map(|e| e.cross_entropy_bits)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,tokens_seen,cross_entropy_bits\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{:.6}", e.step, e.tokens_seen, e.cross_entropy_bits);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

struct LanePlan {
    batch: usize,
    lane_len: usize,
    windows_per_lane: usize,
}

fn plan_lanes(stream_len: usize, requested_batch: usize, bptt: usize) -> Result<LanePlan> {
    if stream_len == 0 {
        return Err(Error::EmptyInput("training stream is empty".into()));
    }
    if stream_len < 2 {
        return Err(Error::EmptyInput(
            "training stream needs at least two tokens".into(),
        ));
    }
    let batch = requested_batch.min((stream_len / (bptt + 1)).max(1));
    let lane_len = stream_len / batch;
    let windows_per_lane = ((lane_len - 1) / bptt).max(1);
    Ok(LanePlan {
        batch,
        lane_len,
        windows_per_lane,
    })
}

/// Train in place over one token stream. Deterministic for fixed inputs.
///
/// Each step processes one `bptt_len` window per lane (the last tokens of a
/// lane that do not fill a window are dropped). When the stream is too short
/// for the requested batch size the lane count is reduced and a warning is
/// recorded. After a full pass over all windows the lane states reset and the
/// pass repeats until `max_steps`.
pub fn train(
    params: &mut LstmParams,
    stream: &[TokenId],
    cfg: &AdamConfig,
) -> Result<TrainingLog> {
    cfg.validate()?;
    let bptt = params.config().bptt_len;
    let plan = plan_lanes(stream.len(), cfg.batch_size, bptt)?;
    let mut log = TrainingLog::default();
    if plan.batch < cfg.batch_size {
        log.warnings.push(format!(
            "stream of {} tokens is too short for batch_size {}; using {} lanes",
            stream.len(),
            cfg.batch_size,
            plan.batch
        ));
    }

    let lanes: Vec<&[TokenId]> = (0..plan.batch)
        .map(|i| &stream[i * plan.lane_len..(i + 1) * plan.lane_len])
        .collect();
    let mut states: Vec<LstmState> = (0..plan.batch)
        .map(|_| LstmState::zeros(params.config()))
        .collect();
    let mut adam = AdamState::new(params);
    let group_size = plan.batch.div_ceil(LANE_GROUPS);
    let mut tokens_seen = 0usize;
    let mut step = 0usize;

    'outer: loop {
        for w in 0..plan.windows_per_lane {
            if step >= cfg.max_steps {
                break 'outer;
            }
            let start = w * bptt;
            let window = bptt.min(plan.lane_len - 1 - start);

            let mut group_results: Vec<Result<(LstmGradients, f64)>> = Vec::new();
            std::thread::scope(|scope| {
                let mut handles = Vec::new();
                for (group, state_chunk) in states.chunks_mut(group_size).enumerate() {
                    let lane_base = group * group_size;
                    let lanes = &lanes;
                    let params: &LstmParams = params;
                    handles.push(scope.spawn(move || -> Result<(LstmGradients, f64)> {
                        let mut sum: Option<LstmGradients> = None;
                        let mut loss = 0.0;
                        for (k, state) in state_chunk.iter_mut().enumerate() {
                            let lane = lanes[lane_base + k];
                            let inputs = &lane[start..start + window];
                            let targets = &lane[start + 1..start + 1 + window];
                            let fwd = forward(params, state, inputs)?;
                            loss += fwd.mean_cross_entropy_nats(targets)?;
                            let grads = backward(params, &fwd.tape, targets)?;
                            *state = fwd.final_state;
                            match &mut sum {
                                None => sum = Some(grads),
                                Some(s) => s.add_assign(&grads),
                            }
                        }
                        Ok((sum.expect("non-empty lane group"), loss))
                    }));
                }
                for h in handles {
                    group_results.push(h.join().expect("training worker panicked"));
                }
            });

            let mut total: Option<LstmGradients> = None;
            let mut loss_nats = 0.0;
            for r in group_results {
                let (g, l) = r?;
                loss_nats += l;
                match &mut total {
                    None => total = Some(g),
                    Some(t) => t.add_assign(&g),
                }
            }
            let mut grads = total.expect("at least one lane group");
            grads.scale(1.0 / plan.batch as f64);
            clip_global_norm(&mut grads, cfg.clip_norm);
            adam_step(params, &grads, &mut adam, cfg)?;

            tokens_seen += window * plan.batch;
            step += 1;
            log.entries.push(TrainLogEntry {
                step,
                tokens_seen,
                cross_entropy_bits: loss_nats / plan.batch as f64 / LN_2,
            });
        }
        if step >= cfg.max_steps {
            break;
        }
        // New pass over the stream: restart every lane from its beginning.
        for s in &mut states {
            *s = LstmState::zeros(params.config());
        }
    }

    if params.data().iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric {
            context: "trained parameters".into(),
        });
    }
    Ok(log)
}
