//! Exit codes: 0 success, 2 invalid input, 3 infeasible design, 4 solver
//! failure.

use wecfarm::Error;

pub const INVALID: u8 = 2;
pub const INFEASIBLE: u8 = 3;
pub const SOLVER: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: INVALID,
            message: message.into(),
        }
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        Failure {
            code: INFEASIBLE,
            message: message.into(),
        }
    }

    pub fn solver(message: impl Into<String>) -> Self {
        Failure {
            code: SOLVER,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Overlap { .. } => INFEASIBLE,
            Error::Solver { .. }
            | Error::Singular { .. }
            | Error::Iteration(_)
            | Error::DegenerateDenominator(_) => SOLVER,
            _ => INVALID,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::invalid(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;
