//! Task generators and simulators.

pub mod bandit;
pub mod darkroom;

pub use bandit::{
    bandit_transition, behaviour_distribution, gen_bandit_context, pull, sample_bandit, BanditContext, BanditTask, BehaviourSpec, LabelMode,
    BANDIT_STATE,
};
pub use darkroom::{
    cell_state, darkroom_split, darkroom_step, gen_darkroom_dataset, greedy_action, move_cell, optimal_action_reward,
    state_cell, Cell, DarkroomManifest, DarkroomTask, Split,
};
