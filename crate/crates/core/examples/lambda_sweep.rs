//! Sweeps the regularization weight on a short synthetic occlusion sequence
//! and writes the table and plot to a directory (default: a temporary one).
//!
//!     cargo run --release --example lambda_sweep -- [out_dir]

use std::path::PathBuf;

use llctrack::config::RunConfig;
use llctrack::evaluation::{lambda_sweep, write_sweep_csv, write_sweep_svg};
use llctrack::synth::{SynthKind, SynthSpec};

fn main() -> llctrack::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("llctrack-sweep"));
    std::fs::create_dir_all(&out)?;

    let spec = SynthSpec::new(SynthKind::Occlusion, 45, 42);
    let gt: Vec<_> = (0..spec.frames).map(|i| spec.ground_truth(i)).collect();
    let config = RunConfig {
        n_particles: 200,
        ..RunConfig::default()
    };
    let lambdas = [0.0, 0.01, 0.1, 0.5, 0.8, 1.0, 5.0, 10.0];
    let rows = lambda_sweep(&spec, &gt, &config, &lambdas, true);
    for r in &rows {
        match (r.mean_overlap, &r.error) {
            (Some(o), _) => println!("lambda {:>5}: mean overlap {o:.4}", r.lambda),
            (None, e) => println!("lambda {:>5}: failed ({e:?})", r.lambda),
        }
    }
    write_sweep_csv(out.join("sweep.csv"), &rows)?;
    write_sweep_svg(out.join("sweep.svg"), &rows)?;
    println!("wrote {}", out.display());
    Ok(())
}
