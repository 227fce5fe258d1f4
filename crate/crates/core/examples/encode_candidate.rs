//! Builds the template store on the first synthetic frame and encodes a few
//! candidates: one on the target, one shifted, one on the background.

use llctrack::encoder::{encode, reconstruction_errors, EncoderConfig};
use llctrack::imaging::extract_patch;
use llctrack::synth::{SynthKind, SynthSpec};
use llctrack::templates::{StoreConfig, TemplateStore};
use llctrack::tracker::{confidence, count_negatives_used, AffineState};

fn main() -> llctrack::Result<()> {
    let spec = SynthSpec::new(SynthKind::MovingSquare, 10, 42);
    let frame = spec.frame(0);
    let init = spec.ground_truth(0);
    let store = TemplateStore::init(&frame, &init, &StoreConfig::default(), 0)?;
    println!(
        "store: {} positives, {} negatives",
        store.n_positives(),
        store.n_negatives()
    );

    let (cx, cy) = init.center();
    let config = EncoderConfig::default();
    for (label, dx, dy) in [("on target", 0.0, 0.0), ("shifted 8 px", 8.0, 0.0), ("background", 60.0, 40.0)] {
        let patch = extract_patch(&frame, &AffineState::at(cx + dx, cy + dy), store.template_size())?;
        let enc = encode(&patch, &store, &config)?;
        let (pos, neg) = reconstruction_errors(&patch, &store, &enc.combined);
        println!(
            "{label:>13}: weights {:.3?}, pos error {pos:.4}, neg error {neg:.4}, negatives used {}, confidence {:.4}",
            enc.weights.as_slice(),
            count_negatives_used(&enc.combined, 1e-3),
            confidence(pos, neg, 2.5),
        );
    }
    Ok(())
}
