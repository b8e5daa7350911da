//! Command-line orchestration for the sparse-CCE toolkit: game generation,
//! lifting, learning, extraction, verification and the end-to-end pipeline.

pub mod commands;
pub mod io;
pub mod pipeline;

use sparse_cce::Error as CoreError;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const INVALID_INPUT: i32 = 2;
    pub const EXTRACTION_FAILED: i32 = 3;
    pub const BUDGET_EXCEEDED: i32 = 4;
}

/// Default cap on lifted-game nodes.
pub const DEFAULT_NODE_BUDGET: u128 = 1_000_000;

/// Maps an error to its exit code: budget errors anywhere in the chain give
/// [`exit::BUDGET_EXCEEDED`], everything else is treated as invalid input.
pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    let budget = err
        .chain()
        .any(|c| matches!(c.downcast_ref::<CoreError>(), Some(CoreError::BudgetExceeded { .. })));
    if budget {
        exit::BUDGET_EXCEEDED
    } else {
        exit::INVALID_INPUT
    }
}

/// Fails with a budget error when the lifted tree would exceed `budget` nodes.
pub fn check_node_budget(m: usize, horizon: usize, budget: u128) -> anyhow::Result<u128> {
    let needed = sparse_cce::lifted::node_count(m, horizon).map_err(|_| CoreError::BudgetExceeded {
        needed: u128::MAX,
        budget,
    })?;
    if needed > budget {
        return Err(CoreError::BudgetExceeded { needed, budget }.into());
    }
    Ok(needed)
}
