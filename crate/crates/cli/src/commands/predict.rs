//! `moto predict` — classify one text and optionally dump its attention.
//!
//! Prints the winning label, then one `prob<TAB>label<TAB>p` line per
//! class at full precision (the printed values parse back to the exact
//! floats, which sum to 1 within normal rounding). `--dump-attention`
//! writes a TSV of every attention weight: `stream j i alpha` where `j`
//! indexes the auxiliary stream's positions and `i` the character
//! positions, so each stream contributes `l_aux × l_char` rows and each
//! `(stream, i)` column is a probability distribution over `j`.

use std::fmt::Write as _;
use std::path::Path;

use moto_core::checkpoint;
use moto_core::encode::Featurizer;

use crate::commands::{load_dicts, model_path, write_file};
use crate::config::Settings;
use crate::error::{CliError, Result};
use crate::logging::Logger;

pub fn run(
    settings: &Settings,
    text: &str,
    dump_attention: Option<&Path>,
    logger: &Logger,
) -> Result<()> {
    if text.trim().is_empty() {
        return Err(CliError::usage("the text to classify is empty"));
    }
    let ck = checkpoint::load(&model_path(settings))?;
    let dicts = load_dicts(settings)?;
    let featurizer = Featurizer::restore(ck.vocabs.clone(), ck.params.stream_lens, dicts);

    let streams = featurizer.encode(text);
    let prediction = ck.params.predict(&streams);

    println!("label\t{}", ck.labels[prediction.class]);
    for (label, p) in ck.labels.iter().zip(&prediction.probs) {
        println!("prob\t{label}\t{p}");
    }

    if let Some(path) = dump_attention {
        let mut out = String::from("stream\tj\ti\talpha\n");
        for (g, alpha) in &prediction.attention {
            for j in 0..alpha.rows() {
                for i in 0..alpha.cols() {
                    writeln!(out, "{}\t{j}\t{i}\t{}", g.name(), alpha.at2(j, i)).unwrap();
                }
            }
        }
        if path == Path::new("-") {
            print!("{out}");
        } else {
            write_file(path, &out)?;
            logger.info(format!("wrote attention weights to {}", path.display()));
        }
    }
    Ok(())
}
