use std::io::Write;

use serde_json::json;

use super::config::FileConfig;
use super::io::{seed, sink, spec_json, stream_spec};
use super::{CliError, CliResult, SimulateArgs};
use crate::streamgen::{generate, write_csv};

pub fn cmd_simulate(file: &FileConfig, a: &SimulateArgs) -> CliResult<()> {
    let seed = seed(&a.stream, file);
    let spec = stream_spec(&a.stream, file, seed, a.t_len)?.ok_or_else(|| {
        CliError::Usage("nothing to simulate: pass --paper-synthetic or a [stream] config section".into())
    })?;
    let samples = generate(&spec)?;
    let mut out = sink(a.out.as_ref())?;
    write_csv(&samples, spec.d, spec.k_max(), &mut out)?;
    out.flush()?;
    if let Some(path) = &a.out {
        let mut side = path.clone().into_os_string();
        side.push(".config.json");
        let resolved = json!({ "command": "simulate", "stream": spec_json(&spec) });
        super::io::write_json(Some(&side.into()), &resolved)?;
    }
    Ok(())
}
