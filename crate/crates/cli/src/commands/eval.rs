//! `moto eval` — score a labelled corpus against a checkpoint.
//!
//! Prints a tab-separated report: sample count, the overall row (loss,
//! accuracy, macro-averaged precision/recall/F1), then one row per class.
//! Numbers print at full precision so the report is reproducible
//! bit-for-bit and parseable without rounding surprises.

use moto_core::checkpoint;
use moto_core::encode::Featurizer;
use moto_core::train::evaluate;

use crate::commands::{load_corpus, load_dicts, model_path, require};
use crate::config::Settings;
use crate::error::Result;
use crate::logging::Logger;

pub fn run(settings: &Settings, logger: &Logger) -> Result<()> {
    let test_path = require(&settings.test, "--test", "test")?;
    let ck = checkpoint::load(&model_path(settings))?;
    let dicts = load_dicts(settings)?;
    let featurizer = Featurizer::restore(ck.vocabs.clone(), ck.params.stream_lens, dicts);

    let corpus = load_corpus(test_path, Some(&ck.labels), settings, logger)?;
    let encoded = featurizer.encode_corpus(&corpus);
    logger.debug(format!("scoring {} samples", encoded.len()));
    let (loss, cm) = evaluate(&ck.params, &encoded);

    println!("samples\t{}", encoded.len());
    println!("split\tloss\taccuracy\tmacroP\tmacroR\tmacroF1");
    println!(
        "test\t{loss}\t{}\t{}\t{}\t{}",
        cm.accuracy(),
        cm.macro_precision(),
        cm.macro_recall(),
        cm.macro_f1()
    );
    println!("class\tprecision\trecall\tf1");
    for (label, m) in ck.labels.iter().zip(cm.per_class()) {
        println!("{label}\t{}\t{}\t{}", m.precision, m.recall, m.f1);
    }
    Ok(())
}
