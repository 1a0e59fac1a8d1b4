use std::io;
use std::path::PathBuf;

use spectral_holonomy::cartography::CartographyError;
use spectral_holonomy::family::FamilyError;
use spectral_holonomy::holonomy::HolonomyError;
use spectral_holonomy::spectra::SpectraError;
use spectral_holonomy::waveguide::WaveguideError;
use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_MISMATCH: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// Prefixes the message with the item it concerns.
    pub fn context(self, what: &str) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("`{what}`: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("`{what}`: {m}")),
            io => io,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<FamilyError> for CliError {
    fn from(e: FamilyError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SpectraError> for CliError {
    fn from(e: SpectraError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<HolonomyError> for CliError {
    fn from(e: HolonomyError) -> Self {
        match &e {
            HolonomyError::Family(_)
            | HolonomyError::Permutation(_)
            | HolonomyError::DegenerateSpec(_)
            | HolonomyError::Discontinuous { .. }
            | HolonomyError::SizeMismatch
            | HolonomyError::NotALoop
            | HolonomyError::BasePointMismatch { .. } => CliError::Config(e.to_string()),
            HolonomyError::TrackingAmbiguous { segment: Some(s), .. } => {
                CliError::Numerical(format!("{e} (path segment {s})"))
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<CartographyError> for CliError {
    fn from(e: CartographyError) -> Self {
        match e {
            CartographyError::Holonomy(h) => h.into(),
            CartographyError::InvalidPlane(_)
            | CartographyError::InvalidSeed(_)
            | CartographyError::InvalidProbe(_)
            | CartographyError::Family(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<WaveguideError> for CliError {
    fn from(e: WaveguideError) -> Self {
        match e {
            WaveguideError::InvalidStep { .. } | WaveguideError::SizeMismatch { .. } | WaveguideError::Family(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
