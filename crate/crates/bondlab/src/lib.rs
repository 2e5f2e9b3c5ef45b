//! Command-line front end for the bond laboratory: JSON configuration,
//! delimited-text file formats, a synthetic universe generator with known
//! ground truth, and the end-to-end pipeline runner.

pub mod config;
pub mod io;
pub mod pipeline;
pub mod synth;

use bondlab_core::Error;

/// Process exit code for an error: 2 configuration, 3 data, 4 numerical.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::MissingColumn(_) => 2,
        Error::Data(_)
        | Error::BeforeDatedDate { .. }
        | Error::UnsupportedDayCount(_)
        | Error::Identification(_)
        | Error::InsufficientData(_) => 3,
        Error::Singular(_) | Error::Numerical(_) => 4,
    }
}
