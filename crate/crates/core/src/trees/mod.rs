//! Core families over the multiresolution balls, the ball trees they induce,
//! the good/bad localization of a tree, and curves drawn through tree leaves.

mod cores;
mod leaves;
mod localization;
mod tree;

pub use cores::{
    build_cores, check_cores, default_c, Core, CoreFamily, CoreGeometry, CoreLevel, CoreReport, Cores,
    DiameterViolation, GapViolation,
};
pub use leaves::{leaves_curve, LeavesCurve};
pub use localization::{beta_payoff, good_bad, GoodBadPartition};
pub use tree::{build_tree, BallTree, TreeNode};
