//! Group model: connectivity, social views, perfect-copy diffusion, and the
//! synchronous round loop.

mod diffusion;
mod round;
mod social;
mod topology;

pub use diffusion::{diffuse_perfect_copy, DiffusionEvent};
pub use round::{run_round, AgentEvent, GroupState, RoundReport};
pub use social::{social_view, SocialView};
pub use topology::{
    advance_topology, GroupTopology, TopologyError, TopologySpec, Visit, VisitEvent,
};
