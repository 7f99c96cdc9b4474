//! Mechanism analysis: loss bounds, properness, implied scoring rules, MSR
//! equivalence and the risk-measure view of a utility.

mod loss;
mod msr;
mod properness;
mod risk;
mod search;
mod table;

pub use loss::{numeric_worst_case_loss, worst_case_loss, LossBound};
pub use msr::{
    closed_form_cost, closed_form_prices, msr_equivalence_check, EquivalenceReport, MsrRule,
    MsrUtility,
};
pub use properness::{
    check_properness, implicit_scoring_rule, maximize_tilted, probe_monotone, PropernessReport,
    ScoringRuleView, TiltedOptimum,
};
pub use risk::{risk_dual_check, risk_measure, DualCheck, RiskEvaluation};
pub use table::{table1, PenaltyFamily, PenaltyFit, Properness, Table1Row};
