//! Neural building blocks: embeddings, character encoder, BiLSTM stack,
//! MLPs, biaffine scorers and layer attention.

mod attention;
mod biaffine;
pub mod context;
mod embedding;
pub mod init;
mod linear;
mod lstm;

pub use attention::{token_dropout, LayerAttention, MixOutput, LAYER_DROPOUT_RETRIES};
pub use biaffine::Biaffine;
pub use context::ContextLayers;
pub use embedding::{component_dropout, Embedding, WordEmbedding};
pub use linear::{Activation, Linear, Mlp, LEAKY_SLOPE};
pub use lstm::{BiLstmStack, CharEncoder, DirectionMasks, Lstm};
