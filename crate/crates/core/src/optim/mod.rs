//! Optimization layer: a dense simplex solver, the brute-force integer
//! oracle, the fair top-k relaxation with its dual certificates, and the
//! exposure baselines.

mod aggregation;
mod certificate;
mod exposure;
mod ilp;
mod simplex;

pub use aggregation::{exposure_ratio, group_exposure, rank_aggregation_exposure, AggregationOutcome};
pub use certificate::{
    delta_max_bound, dual_certificate, eor_primal_lp, eor_primal_program, verify_certificate,
    CertificateReport, DualCertificate, CERT_TOL,
};
pub use exposure::{
    exposure_lp, position_weight, BirkhoffDecomposition, DoublyStochasticRanking, EXPOSURE_MAX_N,
};
pub use ilp::{ilp_top_k, ilp_top_k_with, IlpSearch, IlpSolution, CAP_SLACK, ILP_MAX_N};
pub use simplex::{
    simplex_solve, Constraint, LinearProgram, LpSolution, LpStatus, Relation, FEAS_TOL, OPT_TOL,
    PIVOT_TOL,
};
