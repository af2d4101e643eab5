//! Conversational recommendation with learned intrinsic rewards.
//!
//! The crate provides the conversation MDP and user simulator ([`env`]), a
//! softmax policy with closed-form gradients ([`policy`]), a learned
//! intrinsic reward ([`intrinsic`]), the bi-level meta-gradient trainer
//! ([`bilevel`]) and the evaluation metrics ([`eval`]), together with the
//! synthetic world generator and embedding pretraining ([`catalog`],
//! [`embedding`]).

pub mod bilevel;
pub mod catalog;
pub mod checkpoint;
pub mod embedding;
pub mod env;
pub mod error;
pub mod eval;
pub mod ids;
pub mod intrinsic;
pub mod math;
pub mod params;
pub mod policy;

pub use catalog::{Catalog, InteractionSplits, WorldSpec};
pub use embedding::EmbeddingTable;
pub use env::{Action, ConversationState, EnvConfig, RewardScheme, UserSimulator, World};
pub use error::{Error, Result};
pub use ids::{AttrId, ItemId, UserId};
