//! Exit status of a failed command.

use mcb_tsa::algorithm::AlgorithmError;
use mcb_tsa::bench::BenchError;
use mcb_tsa::gep::GepError;
use mcb_tsa::ml::MlError;
use mcb_tsa::tsa::TsaError;

pub const OTHER: u8 = 1;
pub const VALIDATION: u8 = 2;
pub const SOLVER: u8 = 3;
pub const PARTIAL: u8 = 4;

fn gep(e: &GepError) -> u8 {
    match e {
        GepError::NotOptimal(_) | GepError::Lp(_) => SOLVER,
        _ => VALIDATION,
    }
}

fn ml(e: &MlError) -> u8 {
    match e {
        MlError::Gep(g) => gep(g),
        MlError::Io(_) => OTHER,
        _ => VALIDATION,
    }
}

fn tsa(e: &TsaError) -> u8 {
    match e {
        TsaError::Gep(g) => gep(g),
        _ => VALIDATION,
    }
}

fn algorithm(e: &AlgorithmError) -> u8 {
    match e {
        AlgorithmError::Config(_) => VALIDATION,
        AlgorithmError::UndefinedGap => SOLVER,
        AlgorithmError::Gep(g) => gep(g),
        AlgorithmError::Ml(m) => ml(m),
        AlgorithmError::Tsa(t) => tsa(t),
        AlgorithmError::Aborted { source, .. } => algorithm(source),
    }
}

fn bench(e: &BenchError) -> u8 {
    match e {
        BenchError::Io(_) => OTHER,
        BenchError::Gep(g) => gep(g),
        BenchError::Algorithm(a) => algorithm(a),
        _ => VALIDATION,
    }
}

pub fn code(e: &anyhow::Error) -> u8 {
    if let Some(e) = e.downcast_ref::<BenchError>() {
        bench(e)
    } else if let Some(e) = e.downcast_ref::<AlgorithmError>() {
        algorithm(e)
    } else if let Some(e) = e.downcast_ref::<GepError>() {
        gep(e)
    } else if let Some(e) = e.downcast_ref::<MlError>() {
        ml(e)
    } else if let Some(e) = e.downcast_ref::<TsaError>() {
        tsa(e)
    } else {
        OTHER
    }
}
