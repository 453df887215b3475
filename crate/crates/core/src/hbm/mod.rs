//! Harmonic balance continuation with Floquet stability: the reference the
//! experiments are judged against.

mod continuation;
mod floquet;
mod isola;
mod residual;

pub use continuation::{
    continue_branch, folds_match_multipliers, newton_correct, newton_correct_constrained,
    Constraint, ContinuationSettings, Corrected, Corrector, HbmBranch, HbmPoint, Parameter,
    Predictor,
};
pub use floquet::{floquet_multipliers, monodromy, Floquet, STABILITY_MARGIN};
pub use isola::{isola_seed_search, IsolaSearch, OrbitClass};
pub use residual::{hbm_residual, linearize, Aft, HbmProblem, Linearization};
