//! Shared numerical operators.

mod apg;
mod blur;
mod lipschitz;
mod prox;
mod spa;
mod volume;
mod woodbury;

pub use apg::{minimize, ApgOptions, ApgOutcome, ApgStop, Composite};
pub use blur::BlurOperator;
pub use lipschitz::{estimate_lipschitz, LIPSCHITZ_SAFETY};
pub use prox::{project_nonneg, prox_l1_nonneg};
pub use spa::{spa_select, SpaSelection};
pub use volume::{q_norm_sq, volume_gradient, volume_surrogate};
pub use woodbury::{woodbury_solve, WoodburySolver};
