//! Training objectives for both supervision branches.

pub mod assign;
pub mod pn;
pub mod pu;

pub use assign::{sinkhorn_targets, softmax_responsibilities, SinkhornConfig, SinkhornOutcome, TargetMatrix};
pub use pn::{
    build_sample_sets, combine_vs, contrastive_loss, total_pn_loss, vs_loss, ExpansionConfig, PnConfig, PnInputs, PnLoss,
    PnTerms, SampleCaps, SampleSets,
};
pub use pu::{
    combined_neg_loss, compactness_loss, lort_base_loss, neg_center_loss, prototype_ce_loss, pu_targets, repulsion_loss,
    responsibility_loss,
    total_pu_loss, view_consistency_loss, CenterBank, PuConfig, PuInputs, PuLoss, PuTargets, PuTerms,
};
