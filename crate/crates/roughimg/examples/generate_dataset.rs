//! Drive an experiment from TOML: parse a config, simulate, add measurement
//! noise, and round-trip the dataset through its binary file format.
//!
//!     cargo run --release --example generate_dataset

use roughimg::experiment::{add_noise, load_dataset, parse_config, save_dataset};
use roughimg::forward::cauchy_data;

const CONFIG: &str = r#"
[surface]
name = "gamma3"

[physics]
bc = "impedance"
k_plus = 12.0
rho = "5+exp(2*pi*x1*i)"

[measurement]
height = 1.5
half_width = 4.0
n_half = 20

[noise]
delta = 0.1
seed = 42
"#;

fn main() -> roughimg::Result<()> {
    let cfg = parse_config(CONFIG)?;
    let data = cauchy_data(
        &cfg.boundary_condition()?,
        &cfg.surface()?,
        cfg.physics.k_plus,
        &cfg.measurement_line()?,
        &Default::default(),
    )?;
    let noisy = add_noise(&data, cfg.noise.delta, cfg.noise.seed)?;

    let dir = std::env::temp_dir().join("roughimg-generate-dataset");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("dataset.rid");
    save_dataset(&noisy, &path)?;

    let back = load_dataset(&path)?;
    assert!(back == noisy, "file round trip must be lossless");
    println!(
        "wrote {} ({} bytes): {} x {} complex pairs",
        path.display(),
        std::fs::metadata(&path)?.len(),
        back.line.count(),
        back.line.count()
    );
    println!(
        "  surface {}, bc {}, k+ = {}, delta = {}, seed = {}",
        back.surface_label, back.bc_label, back.k_plus, back.noise_delta, back.seed
    );
    Ok(())
}
