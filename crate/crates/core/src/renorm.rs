//! The FTNR (Frobenius) and LTNR (linear) renormalization protocols.
//!
//! Both share one control flow and differ only in which norm they use and in
//! the degree `k` of that norm in a uniform node scale factor (`k = 2` for the
//! squared Frobenius norm, `k = 1` for the linear norm):
//!
//! 1. If the full norm is finite, multiply every node by `(F / norm)^(1/N)`
//!    and stop.
//! 2. Partial norm at one node: on overflow divide every node by
//!    `(10 (1 + xi))^(1/kN)`, on underflow multiply by it, then go back to 1.
//! 3. Partial norms at `n = 2..N-1`: if one is non-finite, divide by the
//!    previous (finite) partial norm to the `1/kN`; if one is finite but
//!    outside `(aF, bF)`, divide by `(partial / F)^(1/kN)`. Either way go back
//!    to 1 and resume at the same `n`.
//! 4. If every partial norm passes but the full norm is still non-finite,
//!    divide by `(partial_{N-1} / F)^(1/kN)` and go back to 1.
//!
//! Each rescaling in 2-4 is a counted step. The environment cache is rescaled
//! along with the nodes so that resuming at `n` does not recontract the prefix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::TensorNetworkLayer;
use crate::norm::{method_norm, partial_norm, EnvironmentCache, Method};
use crate::value::NormValue;

pub const DEFAULT_RANGE_LO: f64 = 1e-3;
pub const DEFAULT_RANGE_HI: f64 = 1e3;
pub const DEFAULT_MAX_STEPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenormConfig {
    /// Target norm `F`.
    pub target: f64,
    /// Partial norms must lie in `(range_lo * F, range_hi * F)`.
    pub range_lo: f64,
    pub range_hi: f64,
    pub max_steps: usize,
    /// Seed of the stream that draws `xi` for one-node rescues.
    pub xi_seed: u64,
    pub method: Method,
    /// Recompute each event's partial norm from scratch and record whether it
    /// agrees with the cached value's classification. Slow; for debugging.
    #[serde(default)]
    pub audit: bool,
}

impl RenormConfig {
    pub fn new(method: Method, target: f64) -> Self {
        RenormConfig {
            target,
            range_lo: DEFAULT_RANGE_LO,
            range_hi: DEFAULT_RANGE_HI,
            max_steps: DEFAULT_MAX_STEPS,
            xi_seed: 0,
            method,
            audit: false,
        }
    }

    /// Default target `n_A * m_A`: the number of entries of the represented
    /// tensor.
    pub fn for_layer(method: Method, tn: &TensorNetworkLayer) -> Self {
        Self::new(method, tn.element_count())
    }

    pub fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.range_lo = lo;
        self.range_hi = hi;
        self
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_xi_seed(mut self, seed: u64) -> Self {
        self.xi_seed = seed;
        self
    }

    pub fn with_audit(mut self, audit: bool) -> Self {
        self.audit = audit;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target.is_finite() && self.target > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "target must be finite and positive, got {}",
                self.target
            )));
        }
        if !(self.range_lo > 0.0 && self.range_lo <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "range_lo must lie in (0, 1], got {}",
                self.range_lo
            )));
        }
        if self.range_hi.is_nan() || self.range_hi < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "range_hi must be >= 1, got {}",
                self.range_hi
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Success,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepCause {
    OneNodeOverflow,
    OneNodeUnderflow,
    PartialNonfinite,
    PartialRange,
    FullResidual,
    /// The closing exact normalization. Not a counted step.
    FinalNormalization,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCounts {
    pub one_node_overflow: usize,
    pub one_node_underflow: usize,
    pub partial_nonfinite: usize,
    pub partial_range: usize,
    pub full_residual: usize,
}

impl StepCounts {
    pub fn total(&self) -> usize {
        self.one_node_overflow
            + self.one_node_underflow
            + self.partial_nonfinite
            + self.partial_range
            + self.full_residual
    }

    /// Steps triggered by an infinity or a zero, leaving out out-of-range
    /// rescalings of finite partial norms.
    pub fn nonfinite(&self) -> usize {
        self.total() - self.partial_range
    }

    fn bump(&mut self, cause: StepCause) {
        match cause {
            StepCause::OneNodeOverflow => self.one_node_overflow += 1,
            StepCause::OneNodeUnderflow => self.one_node_underflow += 1,
            StepCause::PartialNonfinite => self.partial_nonfinite += 1,
            StepCause::PartialRange => self.partial_range += 1,
            StepCause::FullResidual => self.full_residual += 1,
            StepCause::FinalNormalization => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub cause: StepCause,
    /// Prefix length whose partial norm triggered the event (`N` for the
    /// full-norm events).
    pub n: usize,
    /// Multiplier applied to every node entry.
    pub factor: f64,
    pub negative_total: bool,
    /// With auditing on: whether a from-scratch recomputation agrees with the
    /// cause.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenormReport {
    pub status: Status,
    pub steps_total: usize,
    pub steps_by_cause: StepCounts,
    /// Sum of the logs of every multiplier applied to the node entries,
    /// including the final normalization.
    pub cumulative_log_scale: f64,
    /// The method norm (`||A||_F` or `||A||_L`) of the output network,
    /// recomputed from scratch.
    pub final_norm: NormValue,
    pub trace: Vec<TraceEvent>,
    pub negative_total_seen: bool,
}

impl RenormReport {
    /// Overall log-scale of the represented tensor: every node carries the
    /// same multiplier, so the tensor picked up `N` times the node log-scale.
    pub fn tensor_log_scale(&self, nodes: usize) -> f64 {
        self.cumulative_log_scale * nodes as f64
    }
}

/// Frobenius Tensor Network Renormalization.
pub fn ftnr(tn: &mut TensorNetworkLayer, cfg: &RenormConfig) -> Result<RenormReport> {
    if cfg.method != Method::Frobenius {
        return Err(Error::InvalidArgument(
            "ftnr needs a frobenius configuration".into(),
        ));
    }
    renormalize(tn, cfg)
}

/// Lineal Tensor Network Renormalization. Meant for networks with positive
/// entries; negative totals are flagged and handled as underflow.
pub fn ltnr(tn: &mut TensorNetworkLayer, cfg: &RenormConfig) -> Result<RenormReport> {
    if cfg.method != Method::Linear {
        return Err(Error::InvalidArgument(
            "ltnr needs a linear configuration".into(),
        ));
    }
    renormalize(tn, cfg)
}

/// Runs the protocol selected by `cfg.method`, rescaling `tn` in place.
///
/// Failure to converge within `max_steps` is reported through
/// [`Status::Failed`]; the network is left in its last rescaled state.
pub fn renormalize(tn: &mut TensorNetworkLayer, cfg: &RenormConfig) -> Result<RenormReport> {
    cfg.validate()?;
    if tn.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot renormalize an empty network".into(),
        ));
    }
    Protocol::new(tn, cfg).run()
}

/// Applies the multipliers recorded in `report` to `original`, in order.
pub fn replay(original: &TensorNetworkLayer, report: &RenormReport) -> TensorNetworkLayer {
    let mut tn = original.clone();
    for event in &report.trace {
        tn.scale_all_nodes(event.factor);
    }
    tn
}

struct Protocol<'a> {
    tn: &'a mut TensorNetworkLayer,
    cfg: &'a RenormConfig,
    xi: ChaCha8Rng,
    cache: EnvironmentCache,
    counts: StepCounts,
    trace: Vec<TraceEvent>,
    log_scale: f64,
    negative_seen: bool,
    /// `k * N`
    root: f64,
}

impl<'a> Protocol<'a> {
    fn new(tn: &'a mut TensorNetworkLayer, cfg: &'a RenormConfig) -> Self {
        let root = (cfg.method.degree() as usize * tn.len()) as f64;
        Protocol {
            tn,
            cfg,
            xi: ChaCha8Rng::seed_from_u64(cfg.xi_seed),
            cache: EnvironmentCache::new(cfg.method),
            counts: StepCounts::default(),
            trace: Vec::new(),
            log_scale: 0.0,
            negative_seen: false,
            root,
        }
    }

    fn run(mut self) -> Result<RenormReport> {
        let big_n = self.tn.len();
        let ln_target = self.cfg.target.ln();
        let mut n = 1usize;

        loop {
            let full = self.full_norm()?;
            if let Some(norm) = full.finite() {
                // ||A|| is the unsquared norm for both methods here
                let factor = ((ln_target - norm.ln()) / big_n as f64).exp();
                self.apply(StepCause::FinalNormalization, big_n, factor, false, None);
                return Ok(self.finish(Status::Success));
            }
            self.note_negative(full);
            if self.counts.total() >= self.cfg.max_steps {
                return Ok(self.finish(Status::Failed));
            }

            loop {
                if n >= big_n {
                    let audit = self.audit_full_nonfinite();
                    if big_n == 1 {
                        // the one-node partial norm is the full norm, so this
                        // only happens if the two disagree
                        self.random_rescue(full, big_n, audit);
                        break;
                    }
                    let (at, prev) = self.partial_at(big_n - 1)?;
                    match prev.finite() {
                        Some(p) if at == big_n - 1 => {
                            let factor = (-(p.ln() - ln_target) / self.root).exp();
                            self.apply(StepCause::FullResidual, big_n, factor, false, audit);
                            break;
                        }
                        _ => {
                            n = at;
                            continue;
                        }
                    }
                }

                let (at, value) = self.partial_at(n)?;
                n = at;
                self.note_negative(value);
                if n == 1 {
                    if value.is_finite() {
                        n = 2;
                        continue;
                    }
                    let audit = self.audit_nonfinite(1);
                    self.random_rescue(value, 1, audit);
                    break;
                }

                match value.finite() {
                    None => {
                        let audit = self.audit_nonfinite(n);
                        match self.cache.current().finite() {
                            Some(prev) if self.cache.prefix_len() == n - 1 => {
                                let factor = (-prev.ln() / self.root).exp();
                                let neg = value.negative_total();
                                self.apply(StepCause::PartialNonfinite, n, factor, neg, audit);
                            }
                            _ => self.random_rescue(value, n, audit),
                        }
                        break;
                    }
                    Some(v) if !self.in_range(v) => {
                        let audit = self.audit_out_of_range(n);
                        let factor = (-(v.ln() - ln_target) / self.root).exp();
                        self.apply(StepCause::PartialRange, n, factor, false, audit);
                        break;
                    }
                    Some(_) => n += 1,
                }
            }
        }
    }

    fn in_range(&self, v: f64) -> bool {
        let f = self.cfg.target;
        v > self.cfg.range_lo * f && v < self.cfg.range_hi * f
    }

    /// Method norm of the whole network, reusing the cached prefix.
    fn full_norm(&mut self) -> Result<NormValue> {
        let mut probe = if self.cache.is_valid() {
            self.cache.clone()
        } else {
            EnvironmentCache::new(self.cfg.method)
        };
        let value = probe.extend_to(self.tn, self.tn.len())?;
        if probe.prefix_len() < self.tn.len() {
            return Ok(value);
        }
        Ok(match self.cfg.method {
            Method::Frobenius => value.sqrt(),
            Method::Linear => value,
        })
    }

    /// Partial norm at `n`, with the cache left at `n` on success or `n - 1`
    /// on failure. If the cache has to be rebuilt and the rebuild itself fails
    /// earlier, returns that earlier prefix instead.
    fn partial_at(&mut self, n: usize) -> Result<(usize, NormValue)> {
        if !self.cache.is_valid() || self.cache.prefix_len() > n {
            self.cache = EnvironmentCache::new(self.cfg.method);
        }
        if self.cache.prefix_len() < n - 1 {
            let v = self.cache.extend_to(self.tn, n - 1)?;
            if self.cache.prefix_len() < n - 1 {
                return Ok((self.cache.prefix_len() + 1, v));
            }
        }
        if self.cache.prefix_len() == n {
            return Ok((n, self.cache.current()));
        }
        Ok((n, self.cache.extend(self.tn)?))
    }

    /// Random order-of-magnitude rescue: divide on overflow, multiply on
    /// underflow.
    fn random_rescue(&mut self, value: NormValue, n: usize, audit: Option<bool>) {
        let xi: f64 = self.xi.random();
        let step = (10.0 * (1.0 + xi)).ln() / self.root;
        let overflow = value.is_overflow();
        let factor = if overflow { (-step).exp() } else { step.exp() };
        let cause = match (n, overflow) {
            (1, true) => StepCause::OneNodeOverflow,
            (1, false) => StepCause::OneNodeUnderflow,
            (n, _) if n >= self.tn.len() => StepCause::FullResidual,
            _ => StepCause::PartialNonfinite,
        };
        self.apply(cause, n, factor, value.negative_total(), audit);
    }

    fn apply(
        &mut self,
        cause: StepCause,
        n: usize,
        factor: f64,
        negative_total: bool,
        audit: Option<bool>,
    ) {
        self.tn.scale_all_nodes(factor);
        self.cache.rescale(factor);
        self.counts.bump(cause);
        self.log_scale += factor.ln();
        self.trace.push(TraceEvent {
            cause,
            n,
            factor,
            negative_total,
            audit,
        });
    }

    fn note_negative(&mut self, value: NormValue) {
        self.negative_seen |= value.negative_total();
    }

    fn audit_nonfinite(&self, n: usize) -> Option<bool> {
        self.cfg.audit.then(|| {
            partial_norm(self.tn, self.cfg.method, n)
                .map(|v| !v.is_finite())
                .unwrap_or(false)
        })
    }

    fn audit_out_of_range(&self, n: usize) -> Option<bool> {
        self.cfg.audit.then(|| {
            partial_norm(self.tn, self.cfg.method, n)
                .ok()
                .and_then(NormValue::finite)
                .is_some_and(|v| !self.in_range(v))
        })
    }

    fn audit_full_nonfinite(&self) -> Option<bool> {
        self.cfg
            .audit
            .then(|| !method_norm(self.tn, self.cfg.method).is_finite())
    }

    fn finish(self, status: Status) -> RenormReport {
        let final_norm = method_norm(self.tn, self.cfg.method);
        RenormReport {
            status,
            steps_total: self.counts.total(),
            steps_by_cause: self.counts,
            cumulative_log_scale: self.log_scale,
            final_norm,
            trace: self.trace,
            negative_total_seen: self.negative_seen || final_norm.negative_total(),
        }
    }
}
