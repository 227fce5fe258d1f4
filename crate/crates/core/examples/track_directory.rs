//! Tracks an OTB-layout sequence (`img/0001.jpg ...` plus
//! `groundtruth_rect.txt`) and scores it. Without an argument a synthetic
//! sequence is written to a temporary directory first.
//!
//!     cargo run --release --example track_directory -- [sequence_dir]

use std::path::PathBuf;

use llctrack::evaluation::write_track_csv;
use llctrack::sequence::FrameSequence;
use llctrack::synth::{SynthKind, SynthSpec};
use llctrack::tracker::{run_sequence, TrackerConfig};
use llctrack::SequenceReport;

fn main() -> llctrack::Result<()> {
    let dir = match std::env::args().nth(1) {
        Some(d) => PathBuf::from(d),
        None => {
            let d = std::env::temp_dir().join("llctrack-demo-seq");
            SynthSpec::new(SynthKind::MovingSquare, 30, 7).write(&d)?;
            d
        }
    };
    let seq = FrameSequence::open(&dir)?;
    let gt = seq
        .ground_truth()?
        .ok_or_else(|| llctrack::Error::Config("sequence has no groundtruth_rect.txt".into()))?;
    let run = run_sequence(&seq, &gt[0], &TrackerConfig::default())?;

    let csv = dir.join("llctrack.csv");
    write_track_csv(&csv, &run.results)?;
    let n = run.results.len().min(gt.len());
    let report = SequenceReport::from_boxes(&run.boxes()[..n], &gt[..n], Some(run.fps()))?;
    println!(
        "{} frames, mean CLE {:.2} px, mean overlap {:.3}, {:.1} fps; boxes in {}",
        report.frames,
        report.mean_cle,
        report.mean_overlap,
        run.fps(),
        csv.display()
    );
    Ok(())
}
