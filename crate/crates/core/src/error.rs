use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the sensor model, the processing pipeline and the
/// configuration loader.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    /// The silicone surface reached the photoreflector face.
    #[error(
        "gap saturation: silicone touches the sensor at indent {indent_mm} mm (gap {gap_mm} mm)"
    )]
    Saturation { indent_mm: f64, gap_mm: f64 },

    #[error("range error: {0}")]
    Range(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("simulation failed at t = {time_s} s")]
    Simulation {
        time_s: f64,
        #[source]
        source: Box<Error>,
    },

    /// A configuration field violates its constraint.
    #[error("config: {field}: {message}")]
    Config { field: String, message: String },

    #[error("config parse error")]
    ConfigParse(#[from] serde_json::Error),

    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl Error {
    /// This error and its causes, joined with `: `.
    pub fn report(&self) -> String {
        let mut s = self.to_string();
        let mut cur: Option<&dyn std::error::Error> = std::error::Error::source(self);
        while let Some(e) = cur {
            s.push_str(": ");
            s.push_str(&e.to_string());
            cur = e.source();
        }
        s
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_walks_causes_once() {
        let e = Error::Simulation {
            time_s: 8.2,
            source: Box::new(Error::Range("gap 0.99 mm".into())),
        };
        assert_eq!(
            e.report(),
            "simulation failed at t = 8.2 s: range error: gap 0.99 mm"
        );
    }
}
