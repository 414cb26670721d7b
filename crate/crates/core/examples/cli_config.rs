//! Running a command from an in-memory config, as the binary does.

use netflux::cli::{run, Command, ExperimentConfig};

fn main() -> netflux::Result<()> {
    let config = ExperimentConfig::from_json(
        r#"{
            "model": "qwalk",
            "window": { "extent": [-9, 9, -6, 5] },
            "coins": { "kind": "preset", "name": "remark-perturbation" },
            "seed": 4
        }"#,
    )?;
    let out = run(Command::QwIndex, &config)?;
    println!("config hash {}", out.record.config_hash);
    println!("{}", serde_json::to_string_pretty(&out.record.results)?);
    Ok(())
}
