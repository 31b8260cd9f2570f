//! Predictive controllers on closed-loop data and the receding-horizon
//! executive.
//!
//! Every controller plans `u_f` over `L_f` samples by minimizing
//! `||ŷ_f - y_r||²_Q + ||u_f||²_R`; they differ in how `ŷ_f` is tied to the
//! decision:
//!
//! | variant | output prediction |
//! |---|---|
//! | Oracle | `Γ x̂ + H^u u_f`, Kalman filtered state |
//! | SPC / DDPC-IV* | `Ω* col(z_p, u_f)` for the respective instrument |
//! | RDDPC-IV | `Y_f g` with `λ ||(I - Π) g||` added to the cost |
//! | tightened | `Y_f Φᵀ h` with `col(Z_p, U_f) Φᵀ h = col(z_p, u_f)` |

mod plan;
mod rddpc;
mod run;
mod task;
mod variant;

pub use plan::{
    kalman_update, predictor_step, tightened_step, KalmanState, OraclePlanner, Plan, Planner, PredictorPlanner,
    TightenedPlanner,
};
pub use rddpc::{rddpc_step, RddpcL1Planner, RddpcPlanner, ReducedBasis, RegNorm, MAX_L1_COLUMNS};
pub use run::{fmt_f64, receding_horizon_run, RunTrace};
pub use task::{cost_index, ChannelBox, ChannelReference, ControlTask};
pub use variant::{build_policy, ControllerVariant, OfflineContext, OnlinePolicy};
