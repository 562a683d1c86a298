//! Monte Carlo estimators for the limit theorems of the cocycle
//! `S_n = φ(x(n)) − φ(x0)`: law of large numbers, CLT and its rate, local
//! limit, renewal and large deviations.

mod estimators;
mod ldp;
mod local;
mod plan;
mod run;
mod sim;

pub use estimators::{
    berry_esseen_fit, clt_test, estimate_gamma, estimate_sigma2, matrix_form_applies,
    sigma2_matrix_form, CltRow, GammaEstimate, SigmaEstimate, SlopeReport,
};
pub use ldp::{ldp_rate, LdpConfig, LdpCurve, LdpMethod, LdpPoint, LdpValue, MIN_HITS};
pub use local::{
    llt_box_estimate, renewal_horizon, renewal_sum, window_mass, LltRow, RenewalRow, Tent, Window,
};
pub use plan::{parse_plan, ExperimentPlan, LdpSpec, LltSpec, RenewalSpec, Stat, MIN_TRIALS};
pub use run::{csv_header, render_csv, run_plan, Check, Row, RunOutput, RUN_PRODUCT_CAP, TOOL, VERSION};
pub use sim::{simulate, HorizonSample, InitialCondition, Samples, BATCHES};
