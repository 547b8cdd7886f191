//! `ragkit index`: build and persist the configured indexes.

use std::path::Path;

use ragkit::lexical::{build_index, save_index, Bm25Params};
use ragkit::semantic::{build_vector_index, save_vector_index};
use ragkit::Score;

use crate::config::RunConfig;
use crate::pipeline::{build_encoder, load_documents};
use crate::CliError;

fn refuse_existing(path: &Path, force: bool) -> Result<(), CliError> {
    if path.exists() && !force {
        return Err(CliError::Usage(format!(
            "refusing to overwrite existing index {}; pass --force to rebuild",
            path.display()
        )));
    }
    Ok(())
}

pub fn cmd_index(config: &RunConfig, force: bool) -> Result<(), CliError> {
    let index = config.index()?;
    if index.lexical.is_none() && index.vector.is_none() {
        return Err(CliError::Usage(
            "config [index] must set at least one of lexical or vector".into(),
        ));
    }
    // check overwrite refusals before any long-running work
    if let Some(path) = &index.lexical {
        refuse_existing(path, force)?;
    }
    if let Some(path) = &index.vector {
        refuse_existing(path, force)?;
    }
    let docs = load_documents(config)?;
    if let Some(path) = &index.lexical {
        let params = Bm25Params::new(config.bm25.k1, config.bm25.b)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let built = build_index(&docs, params).map_err(|e| CliError::Runtime(e.into()))?;
        save_index(path, &built).map_err(|e| CliError::Runtime(e.into()))?;
        println!(
            "lexical: N={} avgDL={:.4} terms={} -> {}",
            built.total_docs(),
            built.avg_doc_length(),
            built.term_count(),
            path.display()
        );
    }
    if let Some(path) = &index.vector {
        let encoder = build_encoder(config)?;
        let built = build_vector_index::<Score>(&encoder, &docs)
            .map_err(|e| CliError::Runtime(e.into()))?;
        save_vector_index(path, &built).map_err(|e| CliError::Runtime(e.into()))?;
        println!("vector: N={} dim={} -> {}", built.len(), built.dim(), path.display());
    }
    Ok(())
}
