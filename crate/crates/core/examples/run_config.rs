// Drives the `orderid` front end from code: parse a config, run a subcommand,
// read back the report.
//
// `cargo run --example run_config`

use clap::Parser;
use orderid::cli::{run, Cli};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("orderid-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let config = dir.join("divergence.toml");
    std::fs::write(&config, "[divergence]\nf = [[1.0, 0.0, 1.0]]\ng = [[0.5, -1.0, 1.0], [0.5, 1.0, 1.0]]\nalpha = 0.5\n")?;
    let out = dir.join("out");
    let cli = Cli::try_parse_from(["orderid", "divergence", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])?;
    run(&cli.command, &|_| None)?;
    print!("{}", std::fs::read_to_string(out.join("report.json"))?);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
