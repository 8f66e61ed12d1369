//! The multi-offset forecaster and a linear reference model.
//!
//! Pipeline for an input `x: [B, N, L]`:
//!
//! 1. RevIN normalize.
//! 2. Split into `O` interleaved phases, stacked as `[B, O, N, T]`.
//! 3. MI-KAN: one RBF-KAN layer `T -> T` applied to every phase.
//! 4. Per-phase self-attention over the `N` variate tokens (feature dim `T`)
//!    with a residual: `A_u = M'_u + MSA(M'_u, M'_u, M'_u)`.
//! 5. Reassemble the phases into `A: [B, N, L]`.
//! 6. Cross-attention fusion with the normalized input:
//!    `H = X + MSA(Q = A, K = X, V = X)`.
//! 7. Linear head `L -> F` per variate.
//! 8. RevIN denormalize.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::mote::{self, PadMode};
use crate::nn::{Conv1dBlock, Ctx, Linear, MlpBlock, MultiHeadAttention, RbfGrid, RbfKanLayer};
use crate::param::ParamStore;
use crate::revin::{Revin, RevinState};
use crate::tensor::Tensor;

/// Architectural variant used for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// The complete model.
    #[default]
    Full,
    /// MI-KAN replaced by identity; both attention stages kept.
    MotiOnly,
    /// Phase split, MI-KAN and reassembly only; both attention stages
    /// removed, the global residual `H = X + A` kept.
    MoteOnly,
    /// Both attention operators replaced by identity, residuals kept:
    /// `A_u = M'_u + M'_u`, `H = X + A`.
    NoTrans,
    /// MI-KAN replaced by identity.
    NoKan,
    /// MI-KAN replaced by linear -> GELU -> linear.
    MlpSwap,
    /// MI-KAN replaced by a same-length 1-D convolution.
    Conv1dSwap,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Full,
        Variant::MotiOnly,
        Variant::MoteOnly,
        Variant::NoTrans,
        Variant::NoKan,
        Variant::MlpSwap,
        Variant::Conv1dSwap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::MotiOnly => "moti-only",
            Variant::MoteOnly => "mote-only",
            Variant::NoTrans => "no-trans",
            Variant::NoKan => "no-kan",
            Variant::MlpSwap => "mlp-swap",
            Variant::Conv1dSwap => "conv1d-swap",
        }
    }

    fn mixer(self) -> MixerKind {
        match self {
            Variant::MotiOnly | Variant::NoKan => MixerKind::Identity,
            Variant::MlpSwap => MixerKind::Mlp,
            Variant::Conv1dSwap => MixerKind::Conv,
            Variant::Full | Variant::MoteOnly | Variant::NoTrans => MixerKind::Kan,
        }
    }

    fn interaction(self) -> Interaction {
        match self {
            Variant::MoteOnly => Interaction::Skip,
            Variant::NoTrans => Interaction::IdentityAttention,
            _ => Interaction::Attention,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<_> = Variant::ALL.iter().map(|v| v.as_str()).collect();
                Error::Config(format!("unknown variant `{s}` (expected one of {})", known.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MixerKind {
    Kan,
    Mlp,
    Conv,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Interaction {
    Attention,
    IdentityAttention,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of variates `N`.
    pub n_vars: usize,
    /// Lookback `L`.
    pub lookback: usize,
    /// Horizon `F`.
    pub horizon: usize,
    /// Offset count `O`.
    pub offsets: usize,
    pub heads: usize,
    /// Number of RBF centers `K`.
    pub rbf_k: usize,
    pub rbf_range: [f64; 2],
    pub kan_prenorm: bool,
    /// One MI-KAN layer for all phases (otherwise one per phase).
    pub share_kan: bool,
    pub dropout: f64,
    pub revin_affine: bool,
    /// Number of stacked MI-KAN + interaction blocks.
    pub depth: usize,
    pub pad_mode: PadMode,
    /// Hidden width of the MLP swap; defaults to `2 T`.
    pub mlp_hidden: Option<usize>,
    pub conv_kernel: usize,
    pub variant: Variant,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_vars: 7,
            lookback: 96,
            horizon: 96,
            offsets: 4,
            heads: 8,
            rbf_k: 8,
            rbf_range: [-2.0, 2.0],
            kan_prenorm: true,
            share_kan: true,
            dropout: 0.1,
            revin_affine: true,
            depth: 1,
            pad_mode: PadMode::Strict,
            mlp_hidden: None,
            conv_kernel: 3,
            variant: Variant::Full,
            seed: 2024,
        }
    }
}

impl ModelConfig {
    /// Lookback after MOTE padding.
    pub fn padded_lookback(&self) -> Result<usize> {
        Ok(self.lookback + mote::pad_amount(self.lookback, self.offsets, self.pad_mode)?)
    }

    /// Sub-sequence length `T`.
    pub fn sub_length(&self) -> Result<usize> {
        Ok(self.padded_lookback()? / self.offsets)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_vars == 0 || self.horizon == 0 {
            return Err(Error::Config("n_vars and horizon must be positive".into()));
        }
        if self.lookback < 2 {
            return Err(Error::Config(format!("lookback {} < 2", self.lookback)));
        }
        let t = self.sub_length()?;
        let lp = self.padded_lookback()?;
        if self.variant.interaction() == Interaction::Attention
            && (self.heads == 0 || t % self.heads != 0 || lp % self.heads != 0)
        {
            return Err(Error::Config(format!(
                "heads={} must divide both T={t} and L={lp}",
                self.heads
            )));
        }
        if self.depth == 0 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Mixer {
    Kan(RbfKanLayer),
    Mlp(MlpBlock),
    Conv(Conv1dBlock),
}

impl Mixer {
    fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        match self {
            Mixer::Kan(l) => l.forward(ctx, x),
            Mixer::Mlp(l) => l.forward(ctx, x),
            Mixer::Conv(l) => l.forward(ctx, x),
        }
    }
}

#[derive(Debug, Clone)]
struct Block {
    /// Empty for identity; one entry when shared; `O` entries otherwise.
    mixers: Vec<Mixer>,
    offset_attn: Option<MultiHeadAttention>,
    fusion_attn: Option<MultiHeadAttention>,
}

/// Intermediate tensors of one interaction block.
#[derive(Debug, Clone, Serialize)]
pub struct BlockTrace {
    /// `M'_u`, each `[B, N, T]`.
    pub mikan: Vec<Tensor>,
    /// `A_u`, each `[B, N, T]`.
    pub offset_interaction: Vec<Tensor>,
    /// Reassembled query `A: [B, N, L]`.
    pub query: Tensor,
    /// Fused representation `H: [B, N, L]`.
    pub fused: Tensor,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ForwardTrace {
    pub blocks: Vec<BlockTrace>,
}

#[derive(Debug, Serialize)]
struct TensorSummary {
    shape: Vec<usize>,
    mean: f64,
    std: f64,
    min: f64,
    max: f64,
}

impl TensorSummary {
    fn of(t: &Tensor) -> Self {
        let mean = t.mean();
        let var = t.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t.len() as f64;
        TensorSummary {
            shape: t.shape().to_vec(),
            mean,
            std: var.sqrt(),
            min: t.data().iter().copied().fold(f64::INFINITY, f64::min),
            max: t.data().iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

impl ForwardTrace {
    /// Shapes and summary statistics of every traced tensor, as JSON.
    pub fn summary_json(&self) -> serde_json::Value {
        let blocks: Vec<_> = self
            .blocks
            .iter()
            .map(|b| {
                serde_json::json!({
                    "mikan": b.mikan.iter().map(TensorSummary::of).collect::<Vec<_>>(),
                    "offset_interaction": b.offset_interaction.iter().map(TensorSummary::of).collect::<Vec<_>>(),
                    "query": TensorSummary::of(&b.query),
                    "fused": TensorSummary::of(&b.fused),
                })
            })
            .collect();
        serde_json::json!({ "blocks": blocks })
    }
}

/// The full forecaster: configuration, parameters and layer layout.
#[derive(Debug, Clone)]
pub struct TimeTk {
    config: ModelConfig,
    pub store: ParamStore,
    revin: Revin,
    blocks: Vec<Block>,
    head: Linear,
}

impl TimeTk {
    /// Builds and initializes a model from `config.seed`. Only the
    /// components used by `config.variant` are allocated.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let revin = Revin::new(&mut store, "revin", config.n_vars, config.revin_affine)?;
        let t = config.sub_length()?;
        let lp = config.padded_lookback()?;
        let variant = config.variant;

        let mut blocks = Vec::with_capacity(config.depth);
        for bi in 0..config.depth {
            let prefix = format!("block{bi}");
            let n_mixers = if config.share_kan { 1 } else { config.offsets };
            let mut mixers = Vec::new();
            for mi in 0..n_mixers {
                let name = format!("{prefix}.mikan.{mi}");
                let mixer = match variant.mixer() {
                    MixerKind::Identity => None,
                    MixerKind::Kan => {
                        let grid = RbfGrid::uniform(config.rbf_range[0], config.rbf_range[1], config.rbf_k)?;
                        Some(Mixer::Kan(RbfKanLayer::new(
                            &mut store,
                            &name,
                            t,
                            t,
                            grid,
                            config.kan_prenorm,
                            &mut rng,
                        )?))
                    }
                    MixerKind::Mlp => {
                        let hidden = config.mlp_hidden.unwrap_or(2 * t);
                        Some(Mixer::Mlp(MlpBlock::new(&mut store, &name, t, hidden, t, &mut rng)?))
                    }
                    MixerKind::Conv => Some(Mixer::Conv(Conv1dBlock::new(
                        &mut store,
                        &name,
                        config.conv_kernel,
                        &mut rng,
                    )?)),
                };
                mixers.extend(mixer);
            }
            let (offset_attn, fusion_attn) = if variant.interaction() == Interaction::Attention {
                (
                    Some(MultiHeadAttention::new(
                        &mut store,
                        &format!("{prefix}.offset_attn"),
                        t,
                        config.heads,
                        config.dropout,
                        &mut rng,
                    )?),
                    Some(MultiHeadAttention::new(
                        &mut store,
                        &format!("{prefix}.fusion_attn"),
                        lp,
                        config.heads,
                        config.dropout,
                        &mut rng,
                    )?),
                )
            } else {
                (None, None)
            };
            blocks.push(Block {
                mixers,
                offset_attn,
                fusion_attn,
            });
        }
        let head = Linear::new(&mut store, "head", lp, config.horizon, true, &mut rng)?;
        Ok(TimeTk {
            config,
            store,
            revin,
            blocks,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    /// Exact number of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        self.store.trainable_count()
    }

    /// Whether this model has the components `variant` needs.
    pub fn supports(&self, variant: Variant) -> bool {
        let needs_mixer = variant.mixer();
        let have_mixer = self.config.variant.mixer();
        let mixer_ok = needs_mixer == MixerKind::Identity || needs_mixer == have_mixer;
        let attn_ok = variant.interaction() != Interaction::Attention
            || self.config.variant.interaction() == Interaction::Attention;
        mixer_ok && attn_ok
    }

    /// Forward pass of the configured variant; `x: [B, N, L]` -> `[B, N, F]`.
    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        self.forward_impl(ctx, x, self.config.variant, None)
    }

    /// Forward pass with a different variant, reusing this model's
    /// parameters. Fails if the model lacks a component the variant needs.
    pub fn forward_variant(&self, ctx: &mut Ctx, x: Var, variant: Variant) -> Result<Var> {
        self.forward_impl(ctx, x, variant, None)
    }

    /// Forward pass that also records the intermediate tensors.
    pub fn forward_traced(&self, ctx: &mut Ctx, x: Var) -> Result<(Var, ForwardTrace)> {
        let mut trace = ForwardTrace::default();
        let y = self.forward_impl(ctx, x, self.config.variant, Some(&mut trace))?;
        Ok((y, trace))
    }

    /// Inference on a plain tensor.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let mut ctx = Ctx::eval(&self.store);
        let xv = ctx.input(x.clone())?;
        let y = self.forward(&mut ctx, xv)?;
        Ok(ctx.graph.value(y).clone())
    }

    fn forward_impl(
        &self,
        ctx: &mut Ctx,
        x: Var,
        variant: Variant,
        mut trace: Option<&mut ForwardTrace>,
    ) -> Result<Var> {
        if !self.supports(variant) {
            return Err(Error::Config(format!(
                "a `{}` model cannot run as `{}`",
                self.config.variant, variant
            )));
        }
        let cfg = &self.config;
        let shape = ctx.graph.shape(x).to_vec();
        if shape.len() != 3 || shape[1] != cfg.n_vars || shape[2] != cfg.lookback {
            return Err(Error::shape("timetk.forward", &shape, &[0, cfg.n_vars, cfg.lookback]));
        }
        let (normed, state): (Var, RevinState) = self.revin.normalize(ctx, x)?;
        let pad = mote::pad_amount(cfg.lookback, cfg.offsets, cfg.pad_mode)?;
        let mut h = mote::left_pad(&mut ctx.graph, normed, pad)?;
        for block in &self.blocks {
            h = self.block_forward(ctx, block, h, variant, trace.as_deref_mut())?;
        }
        let y = self.head.forward(ctx, h)?;
        self.revin.denormalize(ctx, y, &state)
    }

    fn block_forward(
        &self,
        ctx: &mut Ctx,
        block: &Block,
        x: Var,
        variant: Variant,
        trace: Option<&mut ForwardTrace>,
    ) -> Result<Var> {
        let o = self.config.offsets;
        let stacked = mote::split_stacked(&mut ctx.graph, x, o)?;
        let [b, _, n, t] = ctx.graph.shape(stacked).try_into().expect("rank 4");

        let mixed = if variant.mixer() == MixerKind::Identity {
            stacked
        } else if block.mixers.len() == 1 {
            block.mixers[0].forward(ctx, stacked)?
        } else {
            let mut parts = Vec::with_capacity(o);
            for (u, mixer) in block.mixers.iter().enumerate() {
                let sub = ctx.graph.slice_strided(stacked, 1, u, o)?;
                parts.push(mixer.forward(ctx, sub)?);
            }
            ctx.graph.concat(&parts, 1)?
        };

        let interacted = match variant.interaction() {
            Interaction::Attention => {
                let attn = block.offset_attn.as_ref().expect("attention allocated");
                let tokens = ctx.graph.reshape(mixed, &[b * o, n, t])?;
                let msa = attn.forward(ctx, tokens, tokens, tokens)?;
                let sum = ctx.graph.add(tokens, msa)?;
                ctx.graph.reshape(sum, &[b, o, n, t])?
            }
            Interaction::IdentityAttention => ctx.graph.add(mixed, mixed)?,
            Interaction::Skip => mixed,
        };

        let query = mote::reassemble_stacked(&mut ctx.graph, interacted)?;
        let fused = match variant.interaction() {
            Interaction::Attention => {
                let attn = block.fusion_attn.as_ref().expect("attention allocated");
                let msa = attn.forward(ctx, query, x, x)?;
                ctx.graph.add(x, msa)?
            }
            Interaction::IdentityAttention | Interaction::Skip => ctx.graph.add(x, query)?,
        };

        if let Some(trace) = trace {
            let per_phase = |g: &Graph, v: Var| -> Result<Vec<Tensor>> {
                (0..o)
                    .map(|u| {
                        crate::autograd::slice_strided(g.value(v), 1, u, o)?.reshape(&[b, n, t])
                    })
                    .collect()
            };
            trace.blocks.push(BlockTrace {
                mikan: per_phase(&ctx.graph, mixed)?,
                offset_interaction: per_phase(&ctx.graph, interacted)?,
                query: ctx.graph.value(query).clone(),
                fused: ctx.graph.value(fused).clone(),
            });
        }
        Ok(fused)
    }
}

/// Anything the trainer and gradient checker can drive.
pub trait Forecaster {
    fn store(&self) -> &ParamStore;
    fn store_mut(&mut self) -> &mut ParamStore;
    /// `x: [B, N, L]` -> `[B, N, F]`.
    fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var>;

    fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let mut ctx = Ctx::eval(self.store());
        let xv = ctx.input(x.clone())?;
        let y = self.forward(&mut ctx, xv)?;
        Ok(ctx.graph.value(y).clone())
    }
}

impl Forecaster for TimeTk {
    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        TimeTk::forward(self, ctx, x)
    }
}

/// A single `L -> F` linear map shared across variates, with no
/// normalization. Exactly linear in its parameters.
#[derive(Debug, Clone)]
pub struct LinearForecaster {
    pub store: ParamStore,
    head: Linear,
}

impl LinearForecaster {
    pub fn new(lookback: usize, horizon: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let head = Linear::new(&mut store, "head", lookback, horizon, true, &mut rng)?;
        Ok(LinearForecaster { store, head })
    }
}

impl Forecaster for LinearForecaster {
    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        self.head.forward(ctx, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(variant: Variant) -> ModelConfig {
        ModelConfig {
            n_vars: 3,
            lookback: 8,
            horizon: 3,
            offsets: 2,
            heads: 2,
            rbf_k: 4,
            dropout: 0.0,
            variant,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn variant_tags_roundtrip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!("kan-only".parse::<Variant>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = small(Variant::Full);
        cfg.lookback = 9;
        assert!(TimeTk::new(cfg.clone()).is_err());
        cfg.pad_mode = PadMode::ReplicateLeft;
        cfg.heads = 1;
        let m = TimeTk::new(cfg).unwrap();
        assert_eq!(m.config().padded_lookback().unwrap(), 10);
        let mut cfg = small(Variant::Full);
        cfg.heads = 3;
        assert!(TimeTk::new(cfg).is_err());
    }

    #[test]
    fn reduced_model_cannot_run_full() {
        let m = TimeTk::new(small(Variant::NoKan)).unwrap();
        assert!(m.supports(Variant::NoKan) && m.supports(Variant::MotiOnly));
        assert!(!m.supports(Variant::Full));
        let mut ctx = Ctx::eval(&m.store);
        let x = ctx.input(Tensor::zeros(&[1, 3, 8])).unwrap();
        assert!(m.forward_variant(&mut ctx, x, Variant::Full).is_err());
    }

    #[test]
    fn head_count_and_kan_scaling() {
        let m = TimeTk::new(small(Variant::Full)).unwrap();
        let head = m.store.by_name("head.weight").unwrap().value.len()
            + m.store.by_name("head.bias").unwrap().value.len();
        assert_eq!(head, 8 * 3 + 3);
        let kan = m.store.by_name("block0.mikan.0.weights").unwrap().value.len();
        let mut cfg = small(Variant::Full);
        cfg.rbf_k = 8;
        let m2 = TimeTk::new(cfg).unwrap();
        assert_eq!(m2.store.by_name("block0.mikan.0.weights").unwrap().value.len(), 2 * kan);
    }
}
