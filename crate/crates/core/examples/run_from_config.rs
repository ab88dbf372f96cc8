//! Parses a TOML configuration and runs it, the same path the CLI takes.

use spectral_closure::config::parse_config;
use spectral_closure::run::run;

const CONFIG: &str = r#"
mode = "decay"
closure = "let"
output_dir = "target/example-run"

[grid]
n_k = 24
n_mu = 12

[time]
dt = 0.02
n_steps = 32
"#;

fn main() -> spectral_closure::Result<()> {
    let cfg = parse_config(CONFIG, None)?;
    let outcome = run(&cfg)?;
    println!("status {} (exit code {})", outcome.manifest.status.name(), outcome.exit_code());
    for name in &outcome.manifest.outputs {
        println!("  {}", outcome.dir.join(name).display());
    }
    Ok(())
}
