use thiserror::Error;

use crate::amisim::SimError;
use crate::estimation::EstimationError;
use crate::lowrank::LowRankError;
use crate::netmodel::CaseError;
use crate::numkit::NumError;
use crate::observability::ObservabilityError;
use crate::powerflow::PowerFlowError;
use crate::sensitivity::SensitivityError;

/// Umbrella error for callers that chain several modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
    #[error(transparent)]
    Sensitivity(#[from] SensitivityError),
    #[error(transparent)]
    Observability(#[from] ObservabilityError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    LowRank(#[from] LowRankError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
