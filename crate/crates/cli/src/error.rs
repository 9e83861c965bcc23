use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Core(#[from] isac_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical failures, 1 for IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(isac_core::Error::Io(_)) => 1,
            CliError::Core(_) => 2,
            CliError::Io { .. } => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let config = CliError::Config {
            field: "x".into(),
            message: "bad".into(),
        };
        assert_eq!(config.exit_code(), 2);
        let numerical = CliError::Core(isac_core::Error::WaterLevel {
            iterations: 200,
            lo: 0.0,
            hi: 1.0,
            residual: 1.0,
            budget: 1.0,
        });
        assert_eq!(numerical.exit_code(), 3);
        let in_trial = CliError::Core(isac_core::Error::Trial {
            trial: 4,
            source: Box::new(isac_core::Error::WaterLevel {
                iterations: 200,
                lo: 0.0,
                hi: 1.0,
                residual: 1.0,
                budget: 1.0,
            }),
        });
        assert_eq!(in_trial.exit_code(), 3);
        let dead = CliError::Core(isac_core::Error::DeadChannel { floor: 1e-12 });
        assert_eq!(dead.exit_code(), 2);
        let io = CliError::Io {
            path: "x".into(),
            source: std::io::Error::other("nope"),
        };
        assert_eq!(io.exit_code(), 1);
    }
}
