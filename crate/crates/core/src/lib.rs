//! Ground-truth and worker-ability estimation for crowdsourced binary labels
//! under the one-coin Dawid–Skene model.
//!
//! - [`model`]: label matrices, ability and label vectors, crowd statistics,
//!   the joint objective and the marginal likelihood.
//! - [`simulate`]: seeded one-coin, spammer/expert, homogeneous and two-type generators.
//! - [`estimators`]: majority voting, the moment initializer and projected / classical EM.
//! - [`metrics`]: error metrics, rate bounds and the residual diagnostic.
//! - [`oracle`]: brute-force grid maximum likelihood for tiny instances.
//! - [`harness`]: Monte Carlo experiments, CSV ingestion and report export.
//!
//! ```
//! use crowdlabel::prelude::*;
//!
//! let truth = sample_truth(200, 0.3, true, Seed(1)).unwrap();
//! let abilities = make_homogeneous(15, 0.8).unwrap();
//! let x = sample_one_coin(&abilities, &truth, Seed(2)).unwrap();
//! let fit = run_em(&x, &EmConfig::default()).unwrap();
//! assert!(labeling_error(&fit.y_final, &truth).unwrap() < 0.05);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod simulate;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::estimators::{
        disambiguate, e_step, estimate_pi, init_abilities, m_step, majority_vote, projected_m_step,
        run_em, run_em_from, EmConfig, EmMode, EmResult, Initialization, PiEstimate,
    };
    pub use crate::metrics::{
        ability_errors, clt_residuals, clustering_error, ks_statistic_normal, labeling_error,
        lower_bound_minimax, mv_asymptotic_error, upper_bound_global, upper_bound_pem, ErrorReport,
        TheoryBounds,
    };
    pub use crate::model::{
        crowd_stats, harden, kl_binary, marginal_loglik, objective_f, Abilities, CrowdStats,
        GroundTruth, HardLabels, LabelMatrix, SoftLabels,
    };
    pub use crate::oracle::{grid_mle, oracle_agreement, GridSpec};
    pub use crate::simulate::{
        derive_trial_seed, make_experts_power, make_homogeneous, make_spammer_expert,
        sample_one_coin, sample_truth, sample_two_type, sample_uniform_abilities, Seed,
        TwoTypeSpec,
    };
}
