use tracing_subscriber::EnvFilter;

use crate::{LogFormat, LogLevel};

/// Logs go to stderr. `NEWSRAG_LOG` (an `EnvFilter` directive) wins over `level`.
pub fn init(level: LogLevel, format: LogFormat) {
    let filter = EnvFilter::try_from_env("NEWSRAG_LOG")
        .unwrap_or_else(|_| EnvFilter::new(level.as_str()));
    let builder = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr);
    let _ = match format {
        LogFormat::Text => builder.try_init(),
        LogFormat::Json => builder.json().try_init(),
    };
}
